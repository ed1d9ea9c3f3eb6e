//! Crude and importance-sampling estimation of E[f(xi) | theta] with
//! CLT-based simulation-uncertainty intervals, built around a reusable
//! batch of evaluated samples.
//!
//! run_batch and crude_scan are the only places in the crate that invoke a
//! performance function. Everything downstream (crude and IS estimates,
//! bootstrap reweighting, second moments) reworks the recorded outputs.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input_models::{ParametricModel, Samples};
pub use crate::normal::normal_quantile;
use crate::stream::RngStream;

/// Samples are generated and evaluated in fixed-size chunks, each with its
/// own child stream, so batch contents are identical for any thread count.
pub(crate) const BATCH_CHUNK: usize = 1024;

// ---- performance functions -------------------------------------------------

/// The system under evaluation: xi -> f(xi). Implementations must be
/// deterministic (same point, same value) and callable from worker threads.
pub trait PerformanceFunction: Sync {
    fn name(&self) -> &str;

    /// Logging hint only; nothing branches on it.
    fn is_expensive(&self) -> bool {
        false
    }

    fn evaluate(&self, point: &[f64]) -> std::result::Result<f64, String>;
}

/// A performance function backed by a plain closure.
pub struct FnPerf<F> {
    name: String,
    f: F,
}

impl<F> FnPerf<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> PerformanceFunction for FnPerf<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, point: &[f64]) -> std::result::Result<f64, String> {
        Ok((self.f)(point))
    }
}

/// Wrapper that counts evaluations; the reuse guarantees in this crate are
/// asserted against this counter.
pub struct CountingPerf<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P: PerformanceFunction> CountingPerf<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<P: PerformanceFunction> PerformanceFunction for CountingPerf<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn is_expensive(&self) -> bool {
        self.inner.is_expensive()
    }

    fn evaluate(&self, point: &[f64]) -> std::result::Result<f64, String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(point)
    }
}

// ---- experiment batch --------------------------------------------------------

/// Everything recorded about one run of n experiments: the points, the
/// performance outputs, and the log-density of each point under the sampling
/// model. The stored log-densities are exactly recomputable from the
/// sampling model, which is what makes later reweighting trustworthy.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentBatch {
    nominal_model: ParametricModel,
    sampling_model: ParametricModel,
    samples: Samples,
    outputs: Vec<f64>,
    sampling_logdensity: Vec<f64>,
    stream_key: String,
}

#[derive(Serialize, Deserialize)]
struct BatchSidecar {
    nominal_model: ParametricModel,
    sampling_model: ParametricModel,
    n: usize,
    dim: usize,
    stream_key: String,
}

impl ExperimentBatch {
    pub fn new(
        nominal_model: ParametricModel,
        sampling_model: ParametricModel,
        samples: Samples,
        outputs: Vec<f64>,
        sampling_logdensity: Vec<f64>,
        stream_key: String,
    ) -> Result<Self> {
        let batch = Self {
            nominal_model,
            sampling_model,
            samples,
            outputs,
            sampling_logdensity,
            stream_key,
        };
        batch.validate()?;
        Ok(batch)
    }

    fn validate(&self) -> Result<()> {
        self.nominal_model.validate()?;
        self.sampling_model.validate()?;
        let n = self.samples.n();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if self.samples.dim() != self.sampling_model.dim()
            || self.sampling_model.dim() != self.nominal_model.dim()
        {
            return Err(Error::ModelMismatch(format!(
                "sample dim {} vs sampling model dim {} vs nominal model dim {}",
                self.samples.dim(),
                self.sampling_model.dim(),
                self.nominal_model.dim()
            )));
        }
        if self.outputs.len() != n || self.sampling_logdensity.len() != n {
            return Err(Error::InvalidArgument(format!(
                "batch lists disagree: {} samples, {} outputs, {} log-densities",
                n,
                self.outputs.len(),
                self.sampling_logdensity.len()
            )));
        }
        for (i, f) in self.outputs.iter().enumerate() {
            if !f.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "output {i} is non-finite ({f})"
                )));
            }
        }
        for (i, point) in self.samples.points().enumerate() {
            let recomputed = self.sampling_model.log_density(point)?;
            let stored = self.sampling_logdensity[i];
            if recomputed.to_bits() != stored.to_bits() {
                return Err(Error::InvalidArgument(format!(
                    "stored log-density {stored} at row {i} does not match the sampling model \
                     (recomputed {recomputed})"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.samples.n()
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn nominal_model(&self) -> &ParametricModel {
        &self.nominal_model
    }

    pub fn sampling_model(&self) -> &ParametricModel {
        &self.sampling_model
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn sampling_logdensity(&self) -> &[f64] {
        &self.sampling_logdensity
    }

    pub fn stream_key(&self) -> &str {
        &self.stream_key
    }

    /// The batch restricted to its first n samples. Prefixes of one batch
    /// are how estimator behavior is traced across sample budgets without
    /// re-running experiments.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Ok(Self {
            nominal_model: self.nominal_model.clone(),
            sampling_model: self.sampling_model.clone(),
            samples: self.samples.prefix(n)?,
            outputs: self.outputs[..n].to_vec(),
            sampling_logdensity: self.sampling_logdensity[..n].to_vec(),
            stream_key: self.stream_key.clone(),
        })
    }

    /// Writes the per-sample table to `csv_path` and the models plus stream
    /// provenance to `sidecar_path` (JSON). Floats are written in shortest
    /// round-trip form, so a reload reproduces every bit.
    pub fn save(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header: Vec<String> = (0..d).map(|c| format!("x{c}")).collect();
        header.push("output".into());
        header.push("log_sampling_density".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(d + 2);
        for (i, point) in self.samples.points().enumerate() {
            record.clear();
            for x in point {
                record.push(format!("{x}"));
            }
            record.push(format!("{}", self.outputs[i]));
            record.push(format!("{}", self.sampling_logdensity[i]));
            w.write_record(&record)?;
        }
        w.flush()?;

        let sidecar = BatchSidecar {
            nominal_model: self.nominal_model.clone(),
            sampling_model: self.sampling_model.clone(),
            n: self.n(),
            dim: d,
            stream_key: self.stream_key.clone(),
        };
        let mut json = serde_json::to_string_pretty(&sidecar)?;
        json.push('\n');
        fs::write(sidecar_path, json)?;
        Ok(())
    }

    pub fn load(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let sidecar: BatchSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
        let d = sidecar.dim;
        let mut reader = csv::Reader::from_path(csv_path)?;
        {
            let headers = reader.headers()?;
            let mut expected: Vec<String> = (0..d).map(|c| format!("x{c}")).collect();
            expected.push("output".into());
            expected.push("log_sampling_density".into());
            if headers.iter().collect::<Vec<_>>() != expected {
                return Err(Error::InvalidArgument(format!(
                    "unexpected batch header {:?}",
                    headers
                )));
            }
        }
        let mut values = Vec::with_capacity(sidecar.n * d);
        let mut outputs = Vec::with_capacity(sidecar.n);
        let mut logq = Vec::with_capacity(sidecar.n);
        let column_name = |col: usize| -> String {
            if col < d {
                format!("x{col}")
            } else if col == d {
                "output".into()
            } else {
                "log_sampling_density".into()
            }
        };
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let field = |col: usize| -> Result<f64> {
                record
                    .get(col)
                    .ok_or_else(|| Error::CsvRecord {
                        row,
                        column: column_name(col),
                        message: "missing field".into(),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::CsvRecord {
                        row,
                        column: column_name(col),
                        message: e.to_string(),
                    })
            };
            for c in 0..d {
                values.push(field(c)?);
            }
            outputs.push(field(d)?);
            logq.push(field(d + 1)?);
        }
        if outputs.len() != sidecar.n {
            return Err(Error::InvalidArgument(format!(
                "sidecar says n={} but the CSV holds {} rows",
                sidecar.n,
                outputs.len()
            )));
        }
        Self::new(
            sidecar.nominal_model,
            sidecar.sampling_model,
            Samples::new(d, values)?,
            outputs,
            logq,
            sidecar.stream_key,
        )
    }
}

// ---- batch generation --------------------------------------------------------

/// Draws n points from `sampling_model`, evaluates `perf` on each (exactly n
/// calls), and records the log sampling densities. Chunks of `BATCH_CHUNK`
/// samples run in parallel, each on a child stream indexed by chunk number,
/// and are spliced back in index order.
pub fn run_batch(
    sampling_model: &ParametricModel,
    nominal_model: &ParametricModel,
    perf: &dyn PerformanceFunction,
    n: usize,
    stream: &RngStream,
) -> Result<ExperimentBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    sampling_model.validate()?;
    nominal_model.validate()?;
    if sampling_model.dim() != nominal_model.dim() {
        return Err(Error::DimensionMismatch {
            expected: sampling_model.dim(),
            got: nominal_model.dim(),
        });
    }
    let d = sampling_model.dim();

    struct Chunk {
        xs: Vec<f64>,
        outputs: Vec<f64>,
        logq: Vec<f64>,
    }

    let chunk_count = n.div_ceil(BATCH_CHUNK);
    let chunks = (0..chunk_count)
        .into_par_iter()
        .map(|c| -> Result<Chunk> {
            let start = c * BATCH_CHUNK;
            let len = BATCH_CHUNK.min(n - start);
            let mut rng = stream.child_index(c as u64).rng();
            let mut xs = vec![0.0; len * d];
            let mut outputs = Vec::with_capacity(len);
            let mut logq = Vec::with_capacity(len);
            for i in 0..len {
                sampling_model.sample_point(&mut rng, &mut xs[i * d..(i + 1) * d]);
                let point = &xs[i * d..(i + 1) * d];
                logq.push(sampling_model.log_density(point)?);
                let f = perf.evaluate(point).map_err(|message| Error::PerfEvaluation {
                    name: perf.name().to_string(),
                    sample: point.to_vec(),
                    message,
                })?;
                if !f.is_finite() {
                    return Err(Error::PerfEvaluation {
                        name: perf.name().to_string(),
                        sample: point.to_vec(),
                        message: format!("returned non-finite value {f}"),
                    });
                }
                outputs.push(f);
            }
            Ok(Chunk { xs, outputs, logq })
        })
        .collect::<Result<Vec<Chunk>>>()?;

    let mut values = Vec::with_capacity(n * d);
    let mut outputs = Vec::with_capacity(n);
    let mut logq = Vec::with_capacity(n);
    for chunk in chunks {
        values.extend_from_slice(&chunk.xs);
        outputs.extend_from_slice(&chunk.outputs);
        logq.extend_from_slice(&chunk.logq);
    }
    Ok(ExperimentBatch {
        nominal_model: nominal_model.clone(),
        sampling_model: sampling_model.clone(),
        samples: Samples::new(d, values)?,
        outputs,
        sampling_logdensity: logq,
        stream_key: stream.key_hex(),
    })
}

/// Streaming crude Monte Carlo under `model` itself: mean of f over n fresh
/// draws, never materializing them. This is the brute-force oracle used to
/// cross-check importance-sampling results, so n may be enormous.
pub fn crude_scan(
    model: &ParametricModel,
    perf: &dyn PerformanceFunction,
    n: usize,
    stream: &RngStream,
    alpha: f64,
) -> Result<EstimateWithCI> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    model.validate()?;
    let d = model.dim();
    let chunk_count = n.div_ceil(BATCH_CHUNK);
    let partials = (0..chunk_count)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let start = c * BATCH_CHUNK;
            let len = BATCH_CHUNK.min(n - start);
            let mut rng = stream.child_index(c as u64).rng();
            let mut point = vec![0.0; d];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                model.sample_point(&mut rng, &mut point);
                let f = perf.evaluate(&point).map_err(|message| Error::PerfEvaluation {
                    name: perf.name().to_string(),
                    sample: point.clone(),
                    message,
                })?;
                s += f;
                s2 += f * f;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut sum, mut sumsq) = (0.0, 0.0);
    for (s, s2) in partials {
        sum += s;
        sumsq += s2;
    }
    let nf = n as f64;
    let point = sum / nf;
    let var = if n > 1 {
        ((sumsq - nf * point * point) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let variance_of_mean = var / nf;
    let (lower, upper) = clt_ci(point, variance_of_mean, alpha)?;
    Ok(EstimateWithCI {
        point,
        stderr: variance_of_mean.sqrt(),
        lower,
        upper,
        alpha,
        kind: EstimateKind::CltSimulationOnly,
    })
}

// ---- estimators ---------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    CltSimulationOnly,
    BootstrapQuantile,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub kind: EstimateKind,
}

impl EstimateWithCI {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Shared core of every likelihood-ratio computation over a batch. All sums
/// run in sample order with the max log-ratio subtracted before
/// exponentiation, so callers that feed the same target get bit-identical
/// results.
pub(crate) struct LrSums {
    pub scale: f64,
    pub mean_wf_scaled: f64,
    pub mean_wf2_scaled: f64,
    pub sum_w: f64,
    pub sum_w2: f64,
    pub max_w: f64,
}

impl LrSums {
    pub fn point(&self) -> f64 {
        self.scale.exp() * self.mean_wf_scaled
    }

    /// (sum w)^2 / sum w^2, invariant to the scale factor.
    pub fn ess(&self) -> f64 {
        if self.sum_w2 > 0.0 {
            self.sum_w * self.sum_w / self.sum_w2
        } else {
            0.0
        }
    }

    /// Largest weight over the mean weight.
    pub fn max_ratio(&self, n: usize) -> f64 {
        if self.sum_w > 0.0 {
            self.max_w * n as f64 / self.sum_w
        } else {
            0.0
        }
    }
}

pub(crate) fn lr_sums(
    target: &ParametricModel,
    batch: &ExperimentBatch,
    log_ratios: &mut Vec<f64>,
) -> Result<LrSums> {
    let n = batch.n();
    log_ratios.clear();
    log_ratios.reserve(n);
    for (j, point) in batch.samples.points().enumerate() {
        log_ratios.push(target.log_density(point)? - batch.sampling_logdensity[j]);
    }
    let mut scale = f64::NEG_INFINITY;
    for &l in log_ratios.iter() {
        if l > scale {
            scale = l;
        }
    }
    if !scale.is_finite() {
        // Every point is outside the target's support; all weights are zero.
        scale = 0.0;
    }
    let (mut swf, mut swf2, mut sw, mut sw2, mut maxw) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
    for (j, &l) in log_ratios.iter().enumerate() {
        let w = (l - scale).exp();
        let wf = w * batch.outputs[j];
        swf += wf;
        swf2 += wf * wf;
        sw += w;
        sw2 += w * w;
        if w > maxw {
            maxw = w;
        }
    }
    let nf = n as f64;
    Ok(LrSums {
        scale,
        mean_wf_scaled: swf / nf,
        mean_wf2_scaled: swf2 / nf,
        sum_w: sw,
        sum_w2: sw2,
        max_w: maxw,
    })
}

/// Importance-sampling estimate of E[f | target]: the sample mean of
/// exp(log p(xi_i | target) - log q(xi_i)) * f(xi_i) over the batch, with a
/// CLT interval from the sample variance (divisor n-1).
pub fn is_estimate(
    batch: &ExperimentBatch,
    target_model: &ParametricModel,
    alpha: f64,
) -> Result<EstimateWithCI> {
    let mut lbuf = Vec::new();
    let sums = lr_sums(target_model, batch, &mut lbuf)?;
    let n = batch.n();
    let escale = sums.scale.exp();
    let point = sums.point();

    let mut ss = 0.0;
    for (j, &l) in lbuf.iter().enumerate() {
        let g = (l - sums.scale).exp() * batch.outputs[j];
        let dev = g - sums.mean_wf_scaled;
        ss += dev * dev;
    }
    let var_scaled = if n > 1 { ss / (n as f64 - 1.0) } else { 0.0 };
    let stderr = escale * (var_scaled / n as f64).sqrt();

    let ess = sums.ess();
    if ess < 0.01 * n as f64 {
        log::warn!(
            "importance weights are concentrated: ESS {ess:.1} out of n={n}; the target is far \
             from the sampling model"
        );
    }

    let (lower, upper) = clt_ci(point, stderr * stderr, alpha)?;
    Ok(EstimateWithCI {
        point,
        stderr,
        lower,
        upper,
        alpha,
        kind: EstimateKind::CltSimulationOnly,
    })
}

/// Plain sample mean of the outputs. Only valid when the batch really was
/// drawn from the nominal model, so a tilted batch is rejected.
pub fn crude_estimate(batch: &ExperimentBatch, alpha: f64) -> Result<EstimateWithCI> {
    if batch.sampling_model != batch.nominal_model {
        return Err(Error::ModelMismatch(
            "crude estimation needs the batch drawn from the nominal model itself; use \
             is_estimate for tilted batches"
                .into(),
        ));
    }
    let n = batch.n();
    let mut sum = 0.0;
    for &f in &batch.outputs {
        sum += f;
    }
    let point = sum / n as f64;
    let mut ss = 0.0;
    for &f in &batch.outputs {
        let dev = f - point;
        ss += dev * dev;
    }
    let var = if n > 1 { ss / (n as f64 - 1.0) } else { 0.0 };
    let stderr = (var / n as f64).sqrt();
    let (lower, upper) = clt_ci(point, stderr * stderr, alpha)?;
    Ok(EstimateWithCI {
        point,
        stderr,
        lower,
        upper,
        alpha,
        kind: EstimateKind::CltSimulationOnly,
    })
}

/// Two-sided symmetric CLT interval: point +- z_{1-alpha/2} * sqrt(variance
/// of the mean).
pub fn clt_ci(point: f64, variance_of_mean: f64, alpha: f64) -> Result<(f64, f64)> {
    if !variance_of_mean.is_finite() || variance_of_mean < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variance of the mean must be finite and nonnegative, got {variance_of_mean}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let half = z * variance_of_mean.sqrt();
    Ok((point - half, point + half))
}

// ---- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::normal_sf;

    fn stream() -> RngStream {
        RngStream::root(77).child("monte-carlo-tests")
    }

    fn gauss(mean: f64, stdev: f64) -> ParametricModel {
        ParametricModel::gaussian(mean, stdev).unwrap()
    }

    fn tail_perf(beta: f64) -> FnPerf<impl Fn(&[f64]) -> f64 + Sync> {
        FnPerf::new("tail-indicator", move |x: &[f64]| {
            if x[0] > beta {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn constant_perf_gives_all_ones() {
        let m = gauss(0.0, 1.0);
        let one = FnPerf::new("one", |_: &[f64]| 1.0);
        let batch = run_batch(&m, &m, &one, 100, &stream().child("const")).unwrap();
        assert_eq!(batch.n(), 100);
        assert!(batch.outputs().iter().all(|&f| f == 1.0));
    }

    #[test]
    fn rare_event_batch_is_all_zero_under_nominal() {
        let m = gauss(0.0, 1.0);
        let perf = tail_perf(5.0);
        let batch = run_batch(&m, &m, &perf, 10_000, &stream().child("rare")).unwrap();
        assert!(batch.outputs().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn tilted_batch_hits_the_event_half_the_time() {
        let perf = tail_perf(5.0);
        let batch = run_batch(
            &gauss(5.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            10_000,
            &stream().child("tilted"),
        )
        .unwrap();
        let frac = batch.outputs().iter().sum::<f64>() / batch.n() as f64;
        assert!((0.45..=0.55).contains(&frac), "hit fraction {frac}");
    }

    #[test]
    fn run_batch_evaluates_exactly_n_times() {
        let m = gauss(0.0, 1.0);
        let perf = CountingPerf::new(tail_perf(1.0));
        run_batch(&m, &m, &perf, 4321, &stream().child("count")).unwrap();
        assert_eq!(perf.calls(), 4321);
    }

    #[test]
    fn run_batch_is_identical_across_thread_counts() {
        let perf = tail_perf(2.0);
        let make = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                run_batch(
                    &gauss(2.0, 1.0),
                    &gauss(0.0, 1.0),
                    &perf,
                    5000,
                    &stream().child("threads"),
                )
                .unwrap()
            })
        };
        assert_eq!(make(1), make(4));
    }

    #[test]
    fn perf_failure_aborts_with_sample_attached() {
        struct Failing;
        impl PerformanceFunction for Failing {
            fn name(&self) -> &str {
                "failing"
            }
            fn evaluate(&self, point: &[f64]) -> std::result::Result<f64, String> {
                if point[0] > 0.0 {
                    Err("solver diverged".into())
                } else {
                    Ok(0.0)
                }
            }
        }
        let m = gauss(0.0, 1.0);
        let err = run_batch(&m, &m, &Failing, 100, &stream().child("fail")).unwrap_err();
        match err {
            Error::PerfEvaluation { name, sample, message } => {
                assert_eq!(name, "failing");
                assert_eq!(sample.len(), 1);
                assert!(sample[0] > 0.0);
                assert!(message.contains("diverged"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn is_estimate_with_identical_target_is_the_output_mean() {
        let perf = tail_perf(2.0);
        let sampling = gauss(2.0, 1.0);
        let batch = run_batch(
            &sampling,
            &sampling,
            &perf,
            10_000,
            &stream().child("identity"),
        )
        .unwrap();
        let is = is_estimate(&batch, &sampling, 0.05).unwrap();
        let crude = crude_estimate(&batch, 0.05).unwrap();
        assert_eq!(is.point.to_bits(), crude.point.to_bits());
    }

    #[test]
    fn is_estimate_recovers_the_gaussian_tail() {
        let perf = tail_perf(5.0);
        let batch = run_batch(
            &gauss(5.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            100_000,
            &stream().child("tail5"),
        )
        .unwrap();
        let est = is_estimate(&batch, &gauss(0.0, 1.0), 0.05).unwrap();
        // 20-digit tail oracle for P(xi > 5) under N(0,1).
        let truth = 2.866515718791939e-7;
        assert!(
            (est.point - truth).abs() <= 3.0 * est.stderr,
            "point {} vs {truth} (stderr {})",
            est.point,
            est.stderr
        );
        assert!(est.lower <= est.point && est.point <= est.upper);
    }

    #[test]
    fn is_estimate_beats_crude_variance_by_100x() {
        let perf = tail_perf(5.0);
        let batch = run_batch(
            &gauss(5.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            10_000,
            &stream().child("varred"),
        )
        .unwrap();
        let est = is_estimate(&batch, &gauss(0.0, 1.0), 0.05).unwrap();
        let gamma = 2.866515718791939e-7;
        let crude_stderr = (gamma * (1.0 - gamma) / 10_000f64).sqrt();
        assert!(
            est.stderr * 100.0 <= crude_stderr,
            "IS stderr {} vs crude {crude_stderr}",
            est.stderr
        );
    }

    #[test]
    fn single_sample_estimate_is_the_weighted_output() {
        // One exponential sample at x = 0: log q = 0, and a target with mean
        // 1/0.3 puts log p(0) = ln 0.3, so the single weight is 0.3.
        let sampling = ParametricModel::exponential(1.0).unwrap();
        let target = ParametricModel::exponential(1.0 / 0.3).unwrap();
        let batch = ExperimentBatch::new(
            sampling.clone(),
            sampling.clone(),
            Samples::from_scalars(vec![0.0]),
            vec![1.0],
            vec![sampling.log_density(&[0.0]).unwrap()],
            "test".into(),
        )
        .unwrap();
        let est = is_estimate(&batch, &target, 0.05).unwrap();
        assert!((est.point - 0.3).abs() < 1e-15);
        assert_eq!(est.stderr, 0.0);
        assert_eq!((est.lower, est.upper), (est.point, est.point));
    }

    #[test]
    fn unbiasedness_across_tilts_at_beta_2() {
        let perf = tail_perf(2.0);
        let nominal = gauss(0.0, 1.0);
        let crude_batch = run_batch(
            &nominal,
            &nominal,
            &perf,
            100_000,
            &stream().child("unbiased-crude"),
        )
        .unwrap();
        let crude = crude_estimate(&crude_batch, 0.05).unwrap();
        let is_batch = run_batch(
            &gauss(2.0, 1.0),
            &nominal,
            &perf,
            100_000,
            &stream().child("unbiased-is"),
        )
        .unwrap();
        let is = is_estimate(&is_batch, &nominal, 0.05).unwrap();
        let combined = (crude.stderr.powi(2) + is.stderr.powi(2)).sqrt();
        assert!(
            (crude.point - is.point).abs() <= 5.0 * combined,
            "crude {} vs IS {}",
            crude.point,
            is.point
        );
    }

    #[test]
    fn crude_estimate_hand_cases() {
        let m = ParametricModel::exponential(1.0).unwrap();
        let samples = Samples::from_scalars(vec![0.5, 1.5, 2.5, 3.5]);
        let logq: Vec<f64> = samples
            .points()
            .map(|p| m.log_density(p).unwrap())
            .collect();
        let batch = ExperimentBatch::new(
            m.clone(),
            m.clone(),
            samples,
            vec![0.0, 0.0, 1.0, 1.0],
            logq,
            "test".into(),
        )
        .unwrap();
        let est = crude_estimate(&batch, 0.05).unwrap();
        assert_eq!(est.point, 0.5);
    }

    #[test]
    fn crude_estimate_matches_tail_mass_at_z_1p96() {
        let m = gauss(0.0, 1.0);
        let perf = tail_perf(1.959964);
        let batch = run_batch(&m, &m, &perf, 1_000_000, &stream().child("crude-tail")).unwrap();
        let est = crude_estimate(&batch, 0.05).unwrap();
        assert!((0.024..=0.026).contains(&est.point), "point {}", est.point);
    }

    #[test]
    fn all_zero_outputs_give_a_degenerate_interval() {
        let m = gauss(0.0, 1.0);
        let perf = tail_perf(50.0);
        let batch = run_batch(&m, &m, &perf, 1000, &stream().child("zero")).unwrap();
        let est = crude_estimate(&batch, 0.05).unwrap();
        assert_eq!((est.point, est.stderr), (0.0, 0.0));
        assert_eq!((est.lower, est.upper), (0.0, 0.0));
    }

    #[test]
    fn crude_estimate_rejects_tilted_batches() {
        let perf = tail_perf(5.0);
        let batch = run_batch(
            &gauss(5.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            100,
            &stream().child("mismatch"),
        )
        .unwrap();
        assert!(matches!(
            crude_estimate(&batch, 0.05),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn clt_ci_hand_cases() {
        let (lo, hi) = clt_ci(1.0, 0.04, 0.05).unwrap();
        assert!((lo - 0.6080071).abs() < 1e-6, "lo {lo}");
        assert!((hi - 1.3919929).abs() < 1e-6, "hi {hi}");

        assert_eq!(clt_ci(3.25, 0.0, 0.05).unwrap(), (3.25, 3.25));

        let (lo, hi) = clt_ci(0.0, 1.0, 0.3173).unwrap();
        assert!((lo + 1.0).abs() < 1e-3, "lo {lo}");
        assert!((hi - 1.0).abs() < 1e-3, "hi {hi}");
    }

    #[test]
    fn clt_ci_is_symmetric_about_zero() {
        for var in [1e-12, 0.04, 1.0, 123.456] {
            let (lo, hi) = clt_ci(0.0, var, 0.05).unwrap();
            assert_eq!(lo, -hi);
        }
    }

    #[test]
    fn clt_ci_rejects_bad_inputs() {
        assert!(clt_ci(0.0, -1.0, 0.05).is_err());
        assert!(clt_ci(0.0, f64::NAN, 0.05).is_err());
        assert!(clt_ci(0.0, 1.0, 0.0).is_err());
        assert!(clt_ci(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn clt_ci_covers_the_gaussian_mean_at_nominal_rate() {
        let m = gauss(0.0, 1.0);
        let base = stream().child("coverage");
        let reps = 10_000;
        let n = 100;
        let mut covered = 0usize;
        for rep in 0..reps {
            let s = m.sample(n, &base.child_index(rep as u64)).unwrap();
            let mean = s.values().iter().sum::<f64>() / n as f64;
            let ss: f64 = s.values().iter().map(|x| (x - mean) * (x - mean)).sum();
            let var_of_mean = ss / ((n - 1) as f64 * n as f64);
            let (lo, hi) = clt_ci(mean, var_of_mean, 0.05).unwrap();
            if lo <= 0.0 && 0.0 <= hi {
                covered += 1;
            }
        }
        let coverage = covered as f64 / reps as f64;
        assert!(
            (0.94..=0.96).contains(&coverage),
            "coverage {coverage}"
        );
    }

    #[test]
    fn crude_scan_matches_known_tail() {
        let m = gauss(0.0, 1.0);
        let perf = tail_perf(2.0);
        let est = crude_scan(&m, &perf, 1_000_000, &stream().child("scan"), 0.05).unwrap();
        let truth = normal_sf(2.0);
        assert!(
            (est.point - truth).abs() <= 5.0 * est.stderr,
            "point {} vs {truth}",
            est.point
        );
    }

    #[test]
    fn crude_scan_is_identical_across_thread_counts() {
        let perf = tail_perf(1.0);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                crude_scan(
                    &gauss(0.0, 1.0),
                    &perf,
                    100_000,
                    &stream().child("scan-threads"),
                    0.05,
                )
                .unwrap()
            })
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.point.to_bits(), b.point.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn batch_round_trips_through_csv_bit_exactly() {
        let perf = tail_perf(2.0);
        let batch = run_batch(
            &gauss(2.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            1000,
            &stream().child("roundtrip"),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("batch.csv");
        let sidecar = dir.path().join("batch.json");
        batch.save(&csv, &sidecar).unwrap();
        let reloaded = ExperimentBatch::load(&csv, &sidecar).unwrap();
        assert_eq!(batch, reloaded);

        // Saving the reload reproduces the files byte for byte.
        let csv2 = dir.path().join("batch2.csv");
        let sidecar2 = dir.path().join("batch2.json");
        reloaded.save(&csv2, &sidecar2).unwrap();
        assert_eq!(fs::read(&csv).unwrap(), fs::read(&csv2).unwrap());
        assert_eq!(fs::read(&sidecar).unwrap(), fs::read(&sidecar2).unwrap());
    }

    #[test]
    fn load_rejects_tampered_log_densities() {
        let perf = tail_perf(2.0);
        let batch = run_batch(
            &gauss(2.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            50,
            &stream().child("tamper"),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("batch.csv");
        let sidecar = dir.path().join("batch.json");
        batch.save(&csv, &sidecar).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
        let col = fields.len() - 1;
        fields[col] = "-0.123456".into();
        lines[1] = fields.join(",");
        fs::write(&csv, lines.join("\n") + "\n").unwrap();
        assert!(ExperimentBatch::load(&csv, &sidecar).is_err());
    }

    #[test]
    fn prefix_truncates_consistently() {
        let perf = tail_perf(2.0);
        let batch = run_batch(
            &gauss(2.0, 1.0),
            &gauss(0.0, 1.0),
            &perf,
            500,
            &stream().child("prefix"),
        )
        .unwrap();
        let head = batch.prefix(100).unwrap();
        assert_eq!(head.n(), 100);
        assert_eq!(head.outputs(), &batch.outputs()[..100]);
        assert_eq!(
            head.sampling_logdensity(),
            &batch.sampling_logdensity()[..100]
        );
        assert!(batch.prefix(501).is_err());
        assert!(batch.prefix(0).is_err());
    }
}
