//! Parametric input models p(xi | theta): density, sampling, MLE fitting,
//! Fisher information, and exponential tilting.
//!
//! Multivariate inputs are products of independent univariate families; all
//! density work is in log space. The exponential family is parametrized by
//! its mean at the API surface (that is the quantity whose coverage the
//! experiments report); the rate form only appears where the algebra wants
//! it (tilting, and the optional rate-coordinate asymptotic bootstrap).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::normal::sample_standard_normal;
use crate::stream::RngStream;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

// ---- samples -------------------------------------------------------------

/// Row-major block of n points in d coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    dim: usize,
    values: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not tile into rows of {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            values: Vec::with_capacity(dim * n),
        }
    }

    pub fn from_scalars(values: Vec<f64>) -> Self {
        Self { dim: 1, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dim + col]
    }

    pub fn push(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.values.extend_from_slice(point);
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// First n rows, copied.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n() {
            return Err(Error::InvalidArgument(format!(
                "prefix {n} outside 1..={}",
                self.n()
            )));
        }
        Ok(Self {
            dim: self.dim,
            values: self.values[..n * self.dim].to_vec(),
        })
    }
}

// ---- model ---------------------------------------------------------------

/// Family shape without parameter values; what MLE fitting is told to fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Gaussian,
    Product(Vec<Family>),
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::Exponential | Family::Gaussian => 1,
            Family::Product(cs) => cs.iter().map(Family::dim).sum(),
        }
    }
}

/// Which coordinate system parameter vectors are expressed in. Exponential
/// components use their mean under `Mean` and their rate under `Rate`;
/// Gaussian components are (mean, stdev) in both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    Mean,
    Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParametricModel {
    Exponential { mean: f64 },
    Gaussian { mean: f64, stdev: f64 },
    Product { components: Vec<ParametricModel> },
}

impl ParametricModel {
    pub fn exponential(mean: f64) -> Result<Self> {
        let m = ParametricModel::Exponential { mean };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(mean: f64, stdev: f64) -> Result<Self> {
        let m = ParametricModel::Gaussian { mean, stdev };
        m.validate()?;
        Ok(m)
    }

    pub fn product(components: Vec<ParametricModel>) -> Result<Self> {
        let m = ParametricModel::Product { components };
        m.validate()?;
        Ok(m)
    }

    pub fn family(&self) -> Family {
        match self {
            ParametricModel::Exponential { .. } => Family::Exponential,
            ParametricModel::Gaussian { .. } => Family::Gaussian,
            ParametricModel::Product { components } => {
                Family::Product(components.iter().map(ParametricModel::family).collect())
            }
        }
    }

    /// Coordinate count of one sample point.
    pub fn dim(&self) -> usize {
        match self {
            ParametricModel::Exponential { .. } | ParametricModel::Gaussian { .. } => 1,
            ParametricModel::Product { components } => {
                components.iter().map(ParametricModel::dim).sum()
            }
        }
    }

    /// Length of the flat parameter vector.
    pub fn param_count(&self) -> usize {
        match self {
            ParametricModel::Exponential { .. } => 1,
            ParametricModel::Gaussian { .. } => 2,
            ParametricModel::Product { components } => {
                components.iter().map(ParametricModel::param_count).sum()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricModel::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential mean must be finite and positive, got {mean}"
                    )));
                }
            }
            ParametricModel::Gaussian { mean, stdev } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian mean must be finite, got {mean}"
                    )));
                }
                if !(stdev.is_finite() && *stdev > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian stdev must be finite and positive, got {stdev}"
                    )));
                }
            }
            ParametricModel::Product { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter(
                        "product model needs at least one component".into(),
                    ));
                }
                for c in components {
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<f64> {
        self.params_in(Parametrization::Mean)
    }

    pub fn params_in(&self, p: Parametrization) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.collect_params(p, &mut out);
        out
    }

    fn collect_params(&self, p: Parametrization, out: &mut Vec<f64>) {
        match self {
            ParametricModel::Exponential { mean } => out.push(match p {
                Parametrization::Mean => *mean,
                Parametrization::Rate => 1.0 / mean,
            }),
            ParametricModel::Gaussian { mean, stdev } => {
                out.push(*mean);
                out.push(*stdev);
            }
            ParametricModel::Product { components } => {
                for c in components {
                    c.collect_params(p, out);
                }
            }
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        fn walk(m: &ParametricModel, prefix: &str, out: &mut Vec<String>) {
            match m {
                ParametricModel::Exponential { .. } => out.push(format!("{prefix}mean")),
                ParametricModel::Gaussian { .. } => {
                    out.push(format!("{prefix}mean"));
                    out.push(format!("{prefix}stdev"));
                }
                ParametricModel::Product { components } => {
                    for (i, c) in components.iter().enumerate() {
                        walk(c, &format!("{prefix}{i}."), out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(self, "", &mut out);
        out
    }

    /// Same family shape with a new flat parameter vector (mean
    /// parametrization).
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        self.with_params_in(params, Parametrization::Mean)
    }

    pub fn with_params_in(&self, params: &[f64], p: Parametrization) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut rest = params;
        let model = self.consume_params(&mut rest, p)?;
        model.validate()?;
        Ok(model)
    }

    fn consume_params(&self, rest: &mut &[f64], p: Parametrization) -> Result<Self> {
        Ok(match self {
            ParametricModel::Exponential { .. } => {
                let v = rest[0];
                *rest = &rest[1..];
                let mean = match p {
                    Parametrization::Mean => v,
                    Parametrization::Rate => {
                        if !(v.is_finite() && v > 0.0) {
                            return Err(Error::InvalidParameter(format!(
                                "exponential rate must be finite and positive, got {v}"
                            )));
                        }
                        1.0 / v
                    }
                };
                ParametricModel::Exponential { mean }
            }
            ParametricModel::Gaussian { .. } => {
                let (mean, stdev) = (rest[0], rest[1]);
                *rest = &rest[2..];
                ParametricModel::Gaussian { mean, stdev }
            }
            ParametricModel::Product { components } => ParametricModel::Product {
                components: components
                    .iter()
                    .map(|c| c.consume_params(rest, p))
                    .collect::<Result<_>>()?,
            },
        })
    }

    /// Per-parameter scale d(mean-coords)/d(rate-coords) at the current
    /// parameters, as a diagonal. Transports Fisher matrices between the two
    /// coordinate systems at a stationary point.
    pub(crate) fn mean_from_rate_scale(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        fn walk(m: &ParametricModel, out: &mut Vec<f64>) {
            match m {
                // d(mu)/d(lambda) = -1/lambda^2 = -mu^2; the sandwich only
                // sees the magnitude.
                ParametricModel::Exponential { mean } => out.push(mean * mean),
                ParametricModel::Gaussian { .. } => {
                    out.push(1.0);
                    out.push(1.0);
                }
                ParametricModel::Product { components } => {
                    for c in components {
                        walk(c, out);
                    }
                }
            }
        }
        walk(self, &mut out);
        out
    }

    // ---- density ----

    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        if point.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument(
                "point contains a NaN coordinate".into(),
            ));
        }
        let mut rest = point;
        Ok(self.log_density_consuming(&mut rest))
    }

    fn log_density_consuming(&self, rest: &mut &[f64]) -> f64 {
        match self {
            ParametricModel::Exponential { mean } => {
                let x = rest[0];
                *rest = &rest[1..];
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let rate = 1.0 / mean;
                    rate.ln() - rate * x
                }
            }
            ParametricModel::Gaussian { mean, stdev } => {
                let x = rest[0];
                *rest = &rest[1..];
                let z = (x - mean) / stdev;
                -stdev.ln() - 0.5 * (LN_2PI + z * z)
            }
            ParametricModel::Product { components } => {
                let mut sum = 0.0;
                for c in components {
                    sum += c.log_density_consuming(rest);
                }
                sum
            }
        }
    }

    // ---- sampling ----

    /// One draw written into `out` (length = dim). Consumes a fixed number of
    /// uniforms per coordinate, so chunked sampling stays reproducible.
    pub fn sample_point(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut rest = out;
        self.sample_consuming(rng, &mut rest);
    }

    fn sample_consuming(&self, rng: &mut ChaCha8Rng, rest: &mut &mut [f64]) {
        match self {
            ParametricModel::Exponential { mean } => {
                let u: f64 = rng.gen();
                let taken = std::mem::take(rest);
                let (head, tail) = taken.split_first_mut().unwrap();
                // Inverse CDF; 1 - u in (0, 1] so the log never sees zero.
                *head = -mean * (1.0 - u).ln();
                *rest = tail;
            }
            ParametricModel::Gaussian { mean, stdev } => {
                let taken = std::mem::take(rest);
                let (head, tail) = taken.split_first_mut().unwrap();
                *head = mean + stdev * sample_standard_normal(rng);
                *rest = tail;
            }
            ParametricModel::Product { components } => {
                for c in components {
                    c.sample_consuming(rng, rest);
                }
            }
        }
    }

    pub fn sample(&self, count: usize, stream: &RngStream) -> Result<Samples> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        self.validate()?;
        let d = self.dim();
        let mut out = Samples {
            dim: d,
            values: vec![0.0; count * d],
        };
        let mut rng = stream.rng();
        for i in 0..count {
            let row = &mut out.values[i * d..(i + 1) * d];
            let mut rest = row;
            self.sample_consuming(&mut rng, &mut rest);
        }
        Ok(out)
    }

    // ---- tilting ----

    /// Exponential tilt by t (one coordinate per sample dimension):
    /// p_t(x) proportional to e^{t.x} p(x). Exponential(rate l) -> rate l-t,
    /// requiring t < l; Gaussian(m, s) -> Gaussian(m + t s^2, s).
    pub fn exponential_tilt(&self, tilt: &[f64]) -> Result<Self> {
        if tilt.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: tilt.len(),
            });
        }
        if tilt.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("tilt must be finite".into()));
        }
        let mut rest = tilt;
        self.tilt_consuming(&mut rest)
    }

    fn tilt_consuming(&self, rest: &mut &[f64]) -> Result<Self> {
        Ok(match self {
            ParametricModel::Exponential { mean } => {
                let t = rest[0];
                *rest = &rest[1..];
                let rate = 1.0 / mean;
                if t >= rate {
                    return Err(Error::InvalidParameter(format!(
                        "tilt {t} must stay below the exponential rate {rate} to keep the \
                         normalizer finite"
                    )));
                }
                ParametricModel::Exponential {
                    mean: 1.0 / (rate - t),
                }
            }
            ParametricModel::Gaussian { mean, stdev } => {
                let t = rest[0];
                *rest = &rest[1..];
                ParametricModel::Gaussian {
                    mean: mean + t * stdev * stdev,
                    stdev: *stdev,
                }
            }
            ParametricModel::Product { components } => ParametricModel::Product {
                components: components
                    .iter()
                    .map(|c| c.tilt_consuming(rest))
                    .collect::<Result<_>>()?,
            },
        })
    }
}

// ---- fitting -------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub model: ParametricModel,
    pub sample_count: usize,
    pub fisher_closed: SymMatrix,
    pub fisher_empirical: SymMatrix,
}

pub fn fit_mle(family: &Family, data: &Samples) -> Result<FittedModel> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: data.dim(),
        });
    }
    let model = fit_family(family, data, 0)?;
    let fisher_closed = fisher_information(&model)?;
    let fisher_empirical = empirical_fisher(&model, data)?;
    Ok(FittedModel {
        model,
        sample_count: data.n(),
        fisher_closed,
        fisher_empirical,
    })
}

fn fit_family(family: &Family, data: &Samples, col: usize) -> Result<ParametricModel> {
    match family {
        Family::Exponential => {
            let k = data.n();
            let mut sum = 0.0;
            for i in 0..k {
                let x = data.value(i, col);
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::DegenerateData(format!(
                        "exponential data must be finite and nonnegative; row {i}, column {col} \
                         is {x}"
                    )));
                }
                sum += x;
            }
            let mean = sum / k as f64;
            if mean <= 0.0 {
                return Err(Error::DegenerateData(
                    "exponential data is all zero".into(),
                ));
            }
            Ok(ParametricModel::Exponential { mean })
        }
        Family::Gaussian => {
            let k = data.n();
            if k < 2 {
                return Err(Error::DegenerateData(
                    "gaussian fit needs at least 2 observations".into(),
                ));
            }
            let mut sum = 0.0;
            for i in 0..k {
                let x = data.value(i, col);
                if !x.is_finite() {
                    return Err(Error::DegenerateData(format!(
                        "gaussian data must be finite; row {i}, column {col} is {x}"
                    )));
                }
                sum += x;
            }
            let mean = sum / k as f64;
            let mut ss = 0.0;
            for i in 0..k {
                let d = data.value(i, col) - mean;
                ss += d * d;
            }
            // Divisor k: the actual MLE, not the unbiased k-1 estimator.
            let stdev = (ss / k as f64).sqrt();
            if stdev <= 0.0 {
                return Err(Error::DegenerateData(
                    "gaussian data has zero variance".into(),
                ));
            }
            Ok(ParametricModel::Gaussian { mean, stdev })
        }
        Family::Product(fams) => {
            let mut comps = Vec::with_capacity(fams.len());
            let mut c = col;
            for f in fams {
                comps.push(fit_family(f, data, c)?);
                c += f.dim();
            }
            Ok(ParametricModel::Product { components: comps })
        }
    }
}

// ---- fisher information ----------------------------------------------------

/// Closed-form Fisher information in mean parametrization:
/// Exponential I(mu) = 1/mu^2, Gaussian diag(1/s^2, 2/s^2), Product
/// block-diagonal.
pub fn fisher_information(model: &ParametricModel) -> Result<SymMatrix> {
    model.validate()?;
    Ok(fisher_block(model))
}

fn fisher_block(model: &ParametricModel) -> SymMatrix {
    match model {
        ParametricModel::Exponential { mean } => SymMatrix::from_diag(&[1.0 / (mean * mean)]),
        ParametricModel::Gaussian { stdev, .. } => {
            let s2 = stdev * stdev;
            SymMatrix::from_diag(&[1.0 / s2, 2.0 / s2])
        }
        ParametricModel::Product { components } => {
            let blocks: Vec<SymMatrix> = components.iter().map(fisher_block).collect();
            SymMatrix::block_diag(&blocks)
        }
    }
}

/// Empirical Fisher information: minus the average Hessian of the
/// log-density over the data, evaluated at the model's parameters.
pub fn empirical_fisher(model: &ParametricModel, data: &Samples) -> Result<SymMatrix> {
    model.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: data.dim(),
        });
    }
    let mut blocks = Vec::new();
    empirical_blocks(model, data, 0, &mut blocks)?;
    Ok(SymMatrix::block_diag(&blocks))
}

fn empirical_blocks(
    model: &ParametricModel,
    data: &Samples,
    col: usize,
    out: &mut Vec<SymMatrix>,
) -> Result<()> {
    let k = data.n() as f64;
    match model {
        ParametricModel::Exponential { mean } => {
            let mut xbar = 0.0;
            for i in 0..data.n() {
                let x = data.value(i, col);
                if x < 0.0 {
                    return Err(Error::DegenerateData(format!(
                        "exponential support violated at row {i}, column {col}"
                    )));
                }
                xbar += x;
            }
            xbar /= k;
            // -(1/k) sum d2/dmu2 [-ln mu - x/mu] = 2 xbar/mu^3 - 1/mu^2.
            let m2 = mean * mean;
            out.push(SymMatrix::from_diag(&[2.0 * xbar / (m2 * mean) - 1.0 / m2]));
        }
        ParametricModel::Gaussian { mean, stdev } => {
            let (mut d1, mut d2) = (0.0, 0.0);
            for i in 0..data.n() {
                let d = data.value(i, col) - mean;
                d1 += d;
                d2 += d * d;
            }
            d1 /= k;
            d2 /= k;
            let s2 = stdev * stdev;
            let mut m = SymMatrix::zeros(2);
            m.set_sym(0, 0, 1.0 / s2);
            m.set_sym(0, 1, 2.0 * d1 / (s2 * stdev));
            m.set_sym(1, 1, 3.0 * d2 / (s2 * s2) - 1.0 / s2);
            out.push(m);
        }
        ParametricModel::Product { components } => {
            let mut c = col;
            for comp in components {
                empirical_blocks(comp, data, c, out)?;
                c += comp.dim();
            }
        }
    }
    Ok(())
}

// ---- tests -----------------------------------------------------------------
