//! Bootstrap quantification of input uncertainty: parameter replicates by
//! plain, parametric, or asymptotic-Gaussian resampling, per-replicate
//! estimates either from fresh experiments or by likelihood-ratio reuse of
//! one existing batch, and quantile confidence intervals over the results.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input_models::{fit_mle, FittedModel, ParametricModel, Parametrization, Samples};
use crate::matrix::SymMatrix;
use crate::monte_carlo::{
    lr_sums, run_batch, EstimateKind, EstimateWithCI, ExperimentBatch, PerformanceFunction,
};
use crate::normal::sample_standard_normal;
use crate::stream::RngStream;

/// How parameter replicates are produced from a fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapKind {
    /// Resample the original data with replacement and refit.
    Plain,
    /// Draw fresh data of the original size from the fitted model and refit.
    Parametric,
    /// Draw parameters from N(theta_hat, I^{-1}(theta_hat)/k) with the
    /// closed-form Fisher information.
    AsymptoticClosedFisher,
    /// Same, with the empirical (observed) Fisher information.
    AsymptoticEmpiricalFisher,
}

impl BootstrapKind {
    pub const ALL: [BootstrapKind; 4] = [
        BootstrapKind::Plain,
        BootstrapKind::Parametric,
        BootstrapKind::AsymptoticClosedFisher,
        BootstrapKind::AsymptoticEmpiricalFisher,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            BootstrapKind::Plain => "plain",
            BootstrapKind::Parametric => "parametric",
            BootstrapKind::AsymptoticClosedFisher => "asymptotic_closed_fisher",
            BootstrapKind::AsymptoticEmpiricalFisher => "asymptotic_empirical_fisher",
        }
    }
}

impl Default for BootstrapKind {
    /// Parametric gives the best small-sample coverage of the schemes here.
    fn default() -> Self {
        BootstrapKind::Parametric
    }
}

/// A resampling scheme plus its replicate budget. The resample size is
/// always the fitted model's original sample count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapScheme {
    pub kind: BootstrapKind,
    pub replicate_count: usize,
    /// Coordinate system for the asymptotic schemes' Gaussian; replicates
    /// are always reported back in mean parametrization.
    pub parametrization: Parametrization,
}

impl BootstrapScheme {
    pub fn new(kind: BootstrapKind, replicate_count: usize) -> Result<Self> {
        if replicate_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "replicate count must be >= 2, got {replicate_count}"
            )));
        }
        Ok(Self {
            kind,
            replicate_count,
            parametrization: Parametrization::Mean,
        })
    }

    pub fn with_parametrization(mut self, p: Parametrization) -> Self {
        self.parametrization = p;
        self
    }
}

/// Weight concentration summary for one replicate's reweighting pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDiagnostics {
    pub ess: f64,
    pub max_ratio: f64,
}

/// Parameter replicates with their estimates and diagnostics, index-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapReplicates {
    pub params: Vec<Vec<f64>>,
    pub estimates: Vec<f64>,
    pub diagnostics: Vec<ReplicateDiagnostics>,
}

impl BootstrapReplicates {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// CSV export: replicate index, parameter coordinates (named from the
    /// model), estimate, ESS, max weight ratio.
    pub fn save_csv(&self, path: &Path, model_template: &ParametricModel) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["replicate".to_string()];
        header.extend(model_template.param_names());
        header.push("estimate".into());
        header.push("ess".into());
        header.push("max_ratio".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut record = vec![format!("{i}")];
            for p in &self.params[i] {
                record.push(format!("{p}"));
            }
            record.push(format!("{}", self.estimates[i]));
            record.push(format!("{}", self.diagnostics[i].ess));
            record.push(format!("{}", self.diagnostics[i].max_ratio));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---- replicate generation ---------------------------------------------------

/// B parameter replicates (mean parametrization) of the fitted model. Plain
/// needs the original data; the other schemes work from the fit alone. Each
/// replicate runs on its own child stream, so the set is identical for any
/// thread count.
pub fn resample_params(
    scheme: &BootstrapScheme,
    fitted: &FittedModel,
    data: Option<&Samples>,
    stream: &RngStream,
) -> Result<Vec<Vec<f64>>> {
    if scheme.replicate_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "replicate count must be >= 2, got {}",
            scheme.replicate_count
        )));
    }
    let k = fitted.sample_count;
    if k == 0 {
        return Err(Error::EmptyData);
    }
    let b = scheme.replicate_count;
    match scheme.kind {
        BootstrapKind::Plain => {
            let data = data.ok_or_else(|| {
                Error::InvalidArgument(
                    "the plain bootstrap resamples the original data, which was not provided"
                        .into(),
                )
            })?;
            if data.n() != k {
                return Err(Error::InvalidArgument(format!(
                    "data has {} rows but the model was fitted on {k}",
                    data.n()
                )));
            }
            let family = fitted.model.family();
            let d = data.dim();
            (0..b)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream.child_index(i as u64).rng();
                    let mut values = Vec::with_capacity(k * d);
                    for _ in 0..k {
                        let row = rng.gen_range(0..k);
                        values.extend_from_slice(data.point(row));
                    }
                    let resampled = Samples::new(d, values)?;
                    Ok(fit_mle(&family, &resampled)?.model.params())
                })
                .collect()
        }
        BootstrapKind::Parametric => {
            let family = fitted.model.family();
            (0..b)
                .into_par_iter()
                .map(|i| {
                    let fresh = fitted.model.sample(k, &stream.child_index(i as u64))?;
                    Ok(fit_mle(&family, &fresh)?.model.params())
                })
                .collect()
        }
        BootstrapKind::AsymptoticClosedFisher | BootstrapKind::AsymptoticEmpiricalFisher => {
            let fisher = match scheme.kind {
                BootstrapKind::AsymptoticClosedFisher => &fitted.fisher_closed,
                _ => &fitted.fisher_empirical,
            };
            asymptotic_replicates(fitted, fisher, scheme.parametrization, b, stream)
        }
    }
}

/// Draws theta^i ~ N(theta_hat, I^{-1}/k) in the requested coordinates,
/// rejecting draws that violate family constraints (at most 1000 redraws per
/// replicate) and converting back to mean parametrization.
fn asymptotic_replicates(
    fitted: &FittedModel,
    fisher_mean: &SymMatrix,
    parametrization: Parametrization,
    b: usize,
    stream: &RngStream,
) -> Result<Vec<Vec<f64>>> {
    let k = fitted.sample_count as f64;
    let fisher = match parametrization {
        Parametrization::Mean => fisher_mean.clone(),
        // Fisher transports as a diagonal sandwich between the two
        // coordinate systems; exact at the MLE where the score vanishes.
        Parametrization::Rate => fisher_mean.diag_sandwich(&fitted.model.mean_from_rate_scale()),
    };
    let dim = fisher.dim();
    let mut scaled = fisher;
    for i in 0..dim {
        for j in 0..=i {
            scaled.set_sym(i, j, scaled.get(i, j) * k);
        }
    }
    // Covariance (k I)^{-1}: factor k I = L L^T once, then map standard
    // normals z through L^{-T}.
    let chol = scaled.cholesky()?;
    let center = fitted.model.params_in(parametrization);

    (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child_index(i as u64).rng();
            let mut draw = vec![0.0; dim];
            for attempt in 0..1000 {
                for z in draw.iter_mut() {
                    *z = sample_standard_normal(&mut rng);
                }
                chol.solve_transpose_in_place(&mut draw);
                for (d, c) in draw.iter_mut().zip(&center) {
                    *d += c;
                }
                if let Ok(model) = fitted.model.with_params_in(&draw, parametrization) {
                    return Ok(model.params());
                }
                let _ = attempt;
            }
            Err(Error::ResamplingStuck {
                replicate: i,
                rejections: 1000,
            })
        })
        .collect()
}

// ---- replicate estimates -----------------------------------------------------

/// The expensive baseline: for each replicate theta^i, run a fresh batch of
/// r experiments under theta^i and average the outputs. Evaluates perf
/// exactly r * B times.
pub fn classic_replicate_estimates(
    params: &[Vec<f64>],
    nominal: &ParametricModel,
    perf: &dyn PerformanceFunction,
    r: usize,
    stream: &RngStream,
) -> Result<BootstrapReplicates> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "per-replicate sample count must be >= 1".into(),
        ));
    }
    let estimates: Vec<f64> = params
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let model = nominal.with_params(p)?;
            let batch = run_batch(&model, &model, perf, r, &stream.child_index(i as u64))?;
            Ok(batch.outputs().iter().sum::<f64>() / r as f64)
        })
        .collect::<Result<_>>()?;
    let diagnostics = vec![
        ReplicateDiagnostics {
            ess: r as f64,
            max_ratio: 1.0,
        };
        params.len()
    ];
    Ok(BootstrapReplicates {
        params: params.to_vec(),
        estimates,
        diagnostics,
    })
}

/// Reweights one existing batch to every replicate theta^i: g-bar^i is the
/// mean of exp(log p(xi_j | theta^i) - log q(xi_j)) * f(xi_j) over the batch.
/// No performance evaluations happen here; the savings over the classic
/// route is the entire r * B experiment budget. Weight blow-up is reported
/// through the ESS and max-ratio diagnostics, never clipped.
pub fn lr_reuse_estimates(
    params: &[Vec<f64>],
    batch: &ExperimentBatch,
) -> Result<BootstrapReplicates> {
    let n = batch.n();
    let rows: Vec<(f64, ReplicateDiagnostics)> = params
        .par_iter()
        .map(|p| {
            let target = batch.nominal_model().with_params(p)?;
            let mut lbuf = Vec::new();
            let sums = lr_sums(&target, batch, &mut lbuf)?;
            Ok((
                sums.point(),
                ReplicateDiagnostics {
                    ess: sums.ess(),
                    max_ratio: sums.max_ratio(n),
                },
            ))
        })
        .collect::<Result<_>>()?;

    let low_ess = rows.iter().filter(|(_, d)| d.ess < 0.01 * n as f64).count();
    if low_ess > 0 {
        let min_ess = rows.iter().map(|(_, d)| d.ess).fold(f64::INFINITY, f64::min);
        log::warn!(
            "{low_ess} of {} replicates have ESS below 1% of n={n} (min {min_ess:.1}); their \
             reweighted estimates rest on very few effective samples",
            rows.len()
        );
    }

    let (estimates, diagnostics) = rows.into_iter().unzip();
    Ok(BootstrapReplicates {
        params: params.to_vec(),
        estimates,
        diagnostics,
    })
}

// ---- intervals and diagnostics -------------------------------------------------

/// Empirical two-sided quantile interval over replicate values, with
/// Hyndman-Fan type-7 interpolation (h = (B-1)u, linear between order
/// statistics). Fixed to type 7 so results match across languages.
pub fn quantile_ci(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "quantile interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(
            "quantile interval input contains NaN".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((
        quantile_type7_sorted(&sorted, alpha / 2.0),
        quantile_type7_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}

/// Type-7 quantile of an ascending slice at probability u in [0, 1].
pub(crate) fn quantile_type7_sorted(sorted: &[f64], u: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * u;
    let lo = (h.floor() as usize).min(sorted.len() - 1);
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Effective sample size of a weight vector: (sum w)^2 / sum w^2.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyData);
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if w.is_nan() || w < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight {i} must be nonnegative, got {w}"
            )));
        }
        s += w;
        s2 += w * w;
    }
    if s2 == 0.0 {
        return Err(Error::InvalidArgument("all weights are zero".into()));
    }
    Ok(s * s / s2)
}

/// End-to-end input-uncertainty interval: resample B parameter replicates,
/// reweight the batch to each, and take the quantile interval of the
/// replicate estimates. The point and stderr come from the batch's own
/// importance-sampling estimate under the fitted model.
pub fn lr_uq_interval(
    batch: &ExperimentBatch,
    fitted: &FittedModel,
    data: Option<&Samples>,
    scheme: &BootstrapScheme,
    alpha: f64,
    stream: &RngStream,
) -> Result<(EstimateWithCI, BootstrapReplicates)> {
    let params = resample_params(scheme, fitted, data, &stream.child("resample"))?;
    let replicates = lr_reuse_estimates(&params, batch)?;
    let (lower, upper) = quantile_ci(&replicates.estimates, alpha)?;
    let base = crate::monte_carlo::is_estimate(batch, &fitted.model, alpha)?;
    let estimate = EstimateWithCI {
        point: base.point,
        stderr: base.stderr,
        lower,
        upper,
        alpha,
        kind: EstimateKind::BootstrapQuantile,
    };
    Ok((estimate, replicates))
}

// ---- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input_models::Family;
    use crate::monte_carlo::{is_estimate, CountingPerf, FnPerf};
    use crate::normal::normal_sf;
    use proptest::prelude::*;

    fn stream() -> RngStream {
        RngStream::root(909).child("bootstrap-tests")
    }

    fn exp_fit(data: Vec<f64>) -> (FittedModel, Samples) {
        let samples = Samples::from_scalars(data);
        let fitted = fit_mle(&Family::Exponential, &samples).unwrap();
        (fitted, samples)
    }

    #[test]
    fn plain_with_a_single_datum_is_constant() {
        let (fitted, data) = exp_fit(vec![3.5]);
        let scheme = BootstrapScheme::new(BootstrapKind::Plain, 16).unwrap();
        let params =
            resample_params(&scheme, &fitted, Some(&data), &stream().child("single")).unwrap();
        assert_eq!(params.len(), 16);
        assert!(params.iter().all(|p| p == &vec![3.5]));
    }

    #[test]
    fn plain_requires_the_original_data() {
        let (fitted, _) = exp_fit(vec![1.0, 2.0]);
        let scheme = BootstrapScheme::new(BootstrapKind::Plain, 8).unwrap();
        assert!(resample_params(&scheme, &fitted, None, &stream()).is_err());
    }

    #[test]
    fn asymptotic_closed_replicate_spread_matches_theory() {
        // Exponential mean 2 on k=100 points: replicate sd should be
        // sqrt(mu^2/k) = 0.2.
        let (fitted, _) = exp_fit(vec![2.0; 100]);
        let scheme = BootstrapScheme::new(BootstrapKind::AsymptoticClosedFisher, 10_000).unwrap();
        let params = resample_params(&scheme, &fitted, None, &stream().child("asym")).unwrap();
        let vals: Vec<f64> = params.iter().map(|p| p[0]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() - 1) as f64)
            .sqrt();
        assert!((0.17..=0.23).contains(&sd), "replicate sd {sd}");
    }

    #[test]
    fn rate_parametrization_asymptotic_matches_mean_spread() {
        let (fitted, _) = exp_fit(vec![2.0; 100]);
        let scheme = BootstrapScheme::new(BootstrapKind::AsymptoticClosedFisher, 10_000)
            .unwrap()
            .with_parametrization(Parametrization::Rate);
        let params = resample_params(&scheme, &fitted, None, &stream().child("rate")).unwrap();
        let vals: Vec<f64> = params.iter().map(|p| p[0]).collect();
        // Delta method: sd of the mean replicate is ~0.2 in either
        // coordinate system at k=100; the rate route reports means too.
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() - 1) as f64)
            .sqrt();
        assert!((1.9..=2.1).contains(&mean), "replicate mean {mean}");
        assert!((0.16..=0.24).contains(&sd), "replicate sd {sd}");
    }

    #[test]
    fn parametric_replicate_mean_recenters_on_the_mle() {
        let (fitted, _) = exp_fit(vec![2.0; 10_000]);
        let scheme = BootstrapScheme::new(BootstrapKind::Parametric, 200).unwrap();
        let params = resample_params(&scheme, &fitted, None, &stream().child("param")).unwrap();
        let mean = params.iter().map(|p| p[0]).sum::<f64>() / params.len() as f64;
        assert!((1.94..=2.06).contains(&mean), "replicate mean {mean}");
    }

    #[test]
    fn gaussian_asymptotic_draws_joint_mean_and_stdev() {
        let truth = ParametricModel::gaussian(1.0, 2.0).unwrap();
        let data = truth.sample(400, &stream().child("gauss-data")).unwrap();
        let fitted = fit_mle(&Family::Gaussian, &data).unwrap();
        let scheme = BootstrapScheme::new(BootstrapKind::AsymptoticClosedFisher, 5000).unwrap();
        let params = resample_params(&scheme, &fitted, None, &stream().child("gauss")).unwrap();
        let sigma_hat = fitted.model.params()[1];
        let mu_sd_theory = sigma_hat / (400f64).sqrt();
        let sd_sd_theory = sigma_hat / (800f64).sqrt();
        let mu_vals: Vec<f64> = params.iter().map(|p| p[0]).collect();
        let sd_vals: Vec<f64> = params.iter().map(|p| p[1]).collect();
        let spread = |vals: &[f64]| {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        };
        assert!((spread(&mu_vals) / mu_sd_theory - 1.0).abs() < 0.1);
        assert!((spread(&sd_vals) / sd_sd_theory - 1.0).abs() < 0.1);
        assert!(sd_vals.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn classic_constant_perf_gives_unit_estimates() {
        let one = FnPerf::new("one", |_: &[f64]| 1.0);
        let nominal = ParametricModel::exponential(2.0).unwrap();
        let params = vec![vec![1.0], vec![2.0], vec![3.0]];
        let reps =
            classic_replicate_estimates(&params, &nominal, &one, 50, &stream().child("classic"))
                .unwrap();
        assert!(reps.estimates.iter().all(|&g| g == 1.0));
        assert!(reps.diagnostics.iter().all(|d| d.max_ratio == 1.0));
    }

    #[test]
    fn classic_gaussian_tail_matches_oracle() {
        let perf = FnPerf::new("tail2", |x: &[f64]| if x[0] > 2.0 { 1.0 } else { 0.0 });
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let params = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let r = 100_000;
        let reps = classic_replicate_estimates(
            &params,
            &nominal,
            &perf,
            r,
            &stream().child("classic-tail"),
        )
        .unwrap();
        let truth = normal_sf(2.0);
        let se = (truth * (1.0 - truth) / r as f64).sqrt();
        for g in &reps.estimates {
            assert!((g - truth).abs() <= 3.0 * se, "estimate {g} vs {truth}");
        }
    }

    fn gaussian_tail_batch(n: usize, label: &str) -> (ExperimentBatch, FittedModel) {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let sampling = ParametricModel::gaussian(5.0, 1.0).unwrap();
        let perf = FnPerf::new("tail5", |x: &[f64]| if x[0] > 5.0 { 1.0 } else { 0.0 });
        let batch = run_batch(&sampling, &nominal, &perf, n, &stream().child(label)).unwrap();
        let data = nominal
            .sample(100, &stream().child(label).child("fit-data"))
            .unwrap();
        let fitted = fit_mle(&Family::Gaussian, &data).unwrap();
        (batch, fitted)
    }

    #[test]
    fn lr_reuse_at_the_nominal_parameters_equals_is_estimate_exactly() {
        let (batch, _) = gaussian_tail_batch(20_000, "lr-identity");
        let nominal_params = batch.nominal_model().params();
        let params = vec![nominal_params; 4];
        let reps = lr_reuse_estimates(&params, &batch).unwrap();
        let is = is_estimate(&batch, batch.nominal_model(), 0.05).unwrap();
        for g in &reps.estimates {
            assert_eq!(g.to_bits(), is.point.to_bits());
        }
    }

    #[test]
    fn lr_reuse_tracks_the_shifted_tail_oracle() {
        let (batch, _) = gaussian_tail_batch(100_000, "lr-shift");
        let params = vec![vec![0.1, 1.0], vec![0.0, 1.0]];
        let reps = lr_reuse_estimates(&params, &batch).unwrap();
        let shifted = is_estimate(
            &batch,
            &ParametricModel::gaussian(0.1, 1.0).unwrap(),
            0.05,
        )
        .unwrap();
        let truth = normal_sf(4.9);
        assert!((truth - 4.79183e-7).abs() < 1e-11, "oracle drifted: {truth}");
        assert!(
            (reps.estimates[0] - truth).abs() <= 3.0 * shifted.stderr,
            "estimate {} vs {truth}",
            reps.estimates[0]
        );
        assert!(reps.diagnostics[0].ess > 0.0 && reps.diagnostics[0].ess <= 100_000.0);
        assert!(reps.diagnostics[0].max_ratio >= 1.0);
    }

    #[test]
    fn lr_reuse_on_an_all_zero_batch_is_zero() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let perf = FnPerf::new("never", |_: &[f64]| 0.0);
        let batch =
            run_batch(&nominal, &nominal, &perf, 1000, &stream().child("zero")).unwrap();
        let reps = lr_reuse_estimates(&[vec![0.3, 1.2]], &batch).unwrap();
        assert_eq!(reps.estimates, vec![0.0]);
    }

    #[test]
    fn lr_reuse_makes_no_perf_calls() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let perf = CountingPerf::new(FnPerf::new("tail2", |x: &[f64]| {
            if x[0] > 2.0 {
                1.0
            } else {
                0.0
            }
        }));
        let batch =
            run_batch(&nominal, &nominal, &perf, 2000, &stream().child("reuse-count")).unwrap();
        let before = perf.calls();
        assert_eq!(before, 2000);
        let params: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.01, 1.0]).collect();
        lr_reuse_estimates(&params, &batch).unwrap();
        assert_eq!(perf.calls(), before);
    }

    #[test]
    fn quantile_ci_hand_cases() {
        let (lo, hi) = quantile_ci(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.4).unwrap();
        assert!((lo - 1.8).abs() < 1e-15);
        assert!((hi - 4.2).abs() < 1e-15);

        let (lo, hi) = quantile_ci(&[7.5, 7.5, 7.5], 0.1).unwrap();
        assert_eq!((lo, hi), (7.5, 7.5));

        let (lo, hi) = quantile_ci(&[0.0, 1.0], 0.5).unwrap();
        assert_eq!((lo, hi), (0.25, 0.75));
    }

    #[test]
    fn quantile_ci_rejects_degenerate_input() {
        assert!(quantile_ci(&[1.0], 0.05).is_err());
        assert!(quantile_ci(&[1.0, 2.0], 0.0).is_err());
        assert!(quantile_ci(&[1.0, f64::NAN], 0.05).is_err());
    }

    #[test]
    fn ess_hand_cases() {
        assert_eq!(ess(&[0.4, 0.4, 0.4, 0.4]).unwrap(), 4.0);
        assert_eq!(ess(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!((ess(&[1.0, 1.0, 2.0]).unwrap() - 16.0 / 6.0).abs() < 1e-15);
        assert!(ess(&[0.0, 0.0]).is_err());
        assert!(ess(&[1.0, -0.5]).is_err());
        assert!(ess(&[]).is_err());
    }

    #[test]
    fn lr_uq_interval_wraps_the_pipeline() {
        let (batch, fitted) = gaussian_tail_batch(20_000, "uq");
        let scheme = BootstrapScheme::new(BootstrapKind::Parametric, 100).unwrap();
        let (est, reps) =
            lr_uq_interval(&batch, &fitted, None, &scheme, 0.05, &stream().child("uq-run"))
                .unwrap();
        assert_eq!(est.kind, EstimateKind::BootstrapQuantile);
        assert_eq!(reps.len(), 100);
        assert!(est.lower <= est.upper);
    }

    #[test]
    fn replicates_csv_round_trip_shape() {
        let (batch, _) = gaussian_tail_batch(2000, "csv");
        let params = vec![vec![0.0, 1.0], vec![0.1, 1.1]];
        let reps = lr_reuse_estimates(&params, &batch).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replicates.csv");
        reps.save_csv(&path, batch.nominal_model()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "replicate,mean,stdev,estimate,ess,max_ratio"
        );
        assert_eq!(lines.count(), 2);
    }

    proptest! {
        #[test]
        fn plain_replicates_stay_in_the_data_range(
            data in proptest::collection::vec(0.01f64..100.0, 5..40)
        ) {
            let (fitted, samples) = exp_fit(data.clone());
            let scheme = BootstrapScheme::new(BootstrapKind::Plain, 32).unwrap();
            let params = resample_params(
                &scheme,
                &fitted,
                Some(&samples),
                &stream().child("range"),
            )
            .unwrap();
            let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for p in params {
                prop_assert!(p[0] >= lo && p[0] <= hi, "replicate {} outside [{lo}, {hi}]", p[0]);
            }
        }

        #[test]
        fn quantile_ci_shifts_with_integer_offsets(
            mut values in proptest::collection::vec(-50i32..50, 4..30),
            offset in -1000i32..1000,
            alpha_pct in 1u32..99,
        ) {
            values.sort_unstable();
            let alpha = alpha_pct as f64 / 100.0;
            let base: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let shifted: Vec<f64> = values.iter().map(|&v| (v + offset) as f64).collect();
            let (lo, hi) = quantile_ci(&base, alpha).unwrap();
            let (slo, shi) = quantile_ci(&shifted, alpha).unwrap();
            // Interpolation weights do not distribute exactly over the
            // shift, so allow interpolation-rounding slack.
            prop_assert!((slo - (lo + offset as f64)).abs() <= 1e-9);
            prop_assert!((shi - (hi + offset as f64)).abs() <= 1e-9);
        }

        #[test]
        fn quantile_ci_scales_with_positive_constants(
            values in proptest::collection::vec(-100.0f64..100.0, 4..30),
            scale in 0.01f64..100.0,
            alpha_pct in 1u32..99,
        ) {
            let alpha = alpha_pct as f64 / 100.0;
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let (lo, hi) = quantile_ci(&values, alpha).unwrap();
            let (slo, shi) = quantile_ci(&scaled, alpha).unwrap();
            let tol = 1e-9 * scale.max(1.0) * 100.0;
            prop_assert!((slo - lo * scale).abs() <= tol);
            prop_assert!((shi - hi * scale).abs() <= tol);
            prop_assert!(lo <= hi);
        }
    }
}
