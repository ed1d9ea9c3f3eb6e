//! Experiment drivers behind the CLI: the two coverage studies, the
//! lane-change demo, the variance decomposition check, and their CSV
//! emitters.
//!
//! Every driver derives one sub-stream per meta-replication from (master
//! seed, experiment label, replication index) and collects results by
//! replication index, so reports are identical for any thread count.

use std::path::Path;

use rayon::prelude::*;

use crate::bootstrap::{
    lr_reuse_estimates, quantile_ci, resample_params, BootstrapScheme,
};
use crate::config::{ExperimentConfig, ExperimentId};
use crate::cross_entropy::{cross_entropy_tilt, CEConfig, CeIterate};
use crate::error::{Error, Result};
use crate::input_models::{fit_mle, Family, ParametricModel};
use crate::lane_change::{
    crash_performance, dataset_inputs, default_generator, scaled_severity_fn, synthesize_dataset,
    LaneChangeSample, SurrogateAVConfig,
};
use crate::monte_carlo::{crude_scan, is_estimate, run_batch, EstimateWithCI, FnPerf};
use crate::normal::normal_sf;
use crate::stream::RngStream;

/// Known-parameter scale for the first coverage study; coverage is
/// scale-free for the exponential family.
pub const TABLE1_TRUE_MEAN: f64 = 1.0;

/// Coverage of one (method, k) cell aggregated over meta-replications.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub method: String,
    pub k: usize,
    pub meta_reps: usize,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_width: f64,
}

impl CoverageReport {
    fn from_outcomes(method: &str, k: usize, outcomes: &[(bool, f64)]) -> Self {
        let reps = outcomes.len();
        let covered = outcomes.iter().filter(|(c, _)| *c).count();
        let coverage = covered as f64 / reps as f64;
        Self {
            method: method.to_string(),
            k,
            meta_reps: reps,
            coverage,
            coverage_se: (coverage * (1.0 - coverage) / reps as f64).sqrt(),
            mean_width: outcomes.iter().map(|(_, w)| w).sum::<f64>() / reps as f64,
        }
    }
}

pub fn save_coverage_csv(path: &Path, reports: &[CoverageReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "k",
        "meta_reps",
        "coverage",
        "coverage_se",
        "mean_width",
    ])?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            format!("{}", r.k),
            format!("{}", r.meta_reps),
            format!("{}", r.coverage),
            format!("{}", r.coverage_se),
            format!("{}", r.mean_width),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn expect_experiment(config: &ExperimentConfig, id: ExperimentId) -> Result<()> {
    if config.experiment != id {
        return Err(Error::Config(format!(
            "configuration is for {}, but {} was requested",
            config.experiment.label(),
            id.label()
        )));
    }
    config.validate()
}

/// Known-parameter coverage study: for each (scheme, k), repeatedly draw k
/// exponential observations, bootstrap replicate means, and record whether
/// the quantile interval covers the generating mean.
pub fn run_table1(config: &ExperimentConfig) -> Result<Vec<CoverageReport>> {
    expect_experiment(config, ExperimentId::Table1)?;
    let truth = ParametricModel::exponential(TABLE1_TRUE_MEAN)?;
    let root = RngStream::root(config.seed).child("table1");
    let mut reports = Vec::new();
    for &kind in &config.schemes {
        let scheme = BootstrapScheme::new(kind, config.replicate_count)?;
        for &k in &config.k_list {
            let base = root.child(kind.label()).child_index(k as u64);
            let outcomes: Vec<(bool, f64)> = (0..config.meta_reps)
                .into_par_iter()
                .map(|rep| {
                    let s = base.child_index(rep as u64);
                    let data = truth.sample(k, &s.child("data"))?;
                    let fitted = fit_mle(&Family::Exponential, &data)?;
                    let params = resample_params(&scheme, &fitted, Some(&data), &s.child("resample"))?;
                    let means: Vec<f64> = params.iter().map(|p| p[0]).collect();
                    let (lower, upper) = quantile_ci(&means, config.alpha)?;
                    Ok((
                        lower <= TABLE1_TRUE_MEAN && TABLE1_TRUE_MEAN <= upper,
                        upper - lower,
                    ))
                })
                .collect::<Result<_>>()?;
            reports.push(CoverageReport::from_outcomes(kind.label(), k, &outcomes));
        }
    }
    Ok(reports)
}

/// Estimated-tail coverage study. Each meta-replication fits a Gaussian to
/// k draws, builds one importance-sampling batch from the mean-shifted
/// model centered at beta, and produces three intervals around the fitted
/// tail probability: CF (closed-form tail at each replicate parameter), LR
/// (the same replicates reweighted onto the shared batch), and SU (the
/// simulation-only CLT interval). Coverage is against the true tail under
/// the generating standard normal.
pub fn run_table2(config: &ExperimentConfig) -> Result<Vec<CoverageReport>> {
    expect_experiment(config, ExperimentId::Table2)?;
    let beta = config.beta;
    let truth_value = normal_sf(beta);
    let truth_model = ParametricModel::gaussian(0.0, 1.0)?;
    let scheme = BootstrapScheme::new(config.schemes[0], config.replicate_count)?;
    let perf = FnPerf::new("tail-indicator", move |x: &[f64]| {
        if x[0] > beta {
            1.0
        } else {
            0.0
        }
    });
    let root = RngStream::root(config.seed).child("table2");
    let mut reports = Vec::new();
    for &k in &config.k_list {
        let base = root.child_index(k as u64);
        let rows: Vec<([bool; 3], [f64; 3])> = (0..config.meta_reps)
            .into_par_iter()
            .map(|rep| {
                let s = base.child_index(rep as u64);
                let data = truth_model.sample(k, &s.child("data"))?;
                let fitted = fit_mle(&Family::Gaussian, &data)?;
                let sigma = fitted.model.params()[1];
                let sampling = ParametricModel::gaussian(beta, sigma)?;
                let batch = run_batch(
                    &sampling,
                    &fitted.model,
                    &perf,
                    config.batch_size,
                    &s.child("batch"),
                )?;
                let params = resample_params(&scheme, &fitted, Some(&data), &s.child("resample"))?;

                let closed_form: Vec<f64> = params
                    .iter()
                    .map(|p| normal_sf((beta - p[0]) / p[1]))
                    .collect();
                let cf = quantile_ci(&closed_form, config.alpha)?;
                let reused = lr_reuse_estimates(&params, &batch)?;
                let lr = quantile_ci(&reused.estimates, config.alpha)?;
                let su_est = is_estimate(&batch, &fitted.model, config.alpha)?;
                let su = (su_est.lower, su_est.upper);

                let covers = |(lo, hi): (f64, f64)| lo <= truth_value && truth_value <= hi;
                Ok((
                    [covers(cf), covers(lr), covers(su)],
                    [cf.1 - cf.0, lr.1 - lr.0, su.1 - su.0],
                ))
            })
            .collect::<Result<_>>()?;
        for (m, method) in ["CF", "LR", "SU"].into_iter().enumerate() {
            let outcomes: Vec<(bool, f64)> =
                rows.iter().map(|(c, w)| (c[m], w[m])).collect();
            reports.push(CoverageReport::from_outcomes(method, k, &outcomes));
        }
    }
    Ok(reports)
}

/// One grid point of the lane-change demo: simulation-only and
/// input-uncertainty intervals at a prefix of the shared batch.
#[derive(Clone, Debug, PartialEq)]
pub struct AvDemoRow {
    pub n: usize,
    pub point: f64,
    pub su_lower: f64,
    pub su_upper: f64,
    pub su_width: f64,
    pub lr_lower: f64,
    pub lr_upper: f64,
    pub lr_width: f64,
}

#[derive(Clone, Debug)]
pub struct AvDemoReport {
    pub dataset: Vec<LaneChangeSample>,
    pub fitted_model: ParametricModel,
    pub tilt: Vec<f64>,
    pub trajectory: Vec<CeIterate>,
    pub rows: Vec<AvDemoRow>,
    pub oracle: Option<EstimateWithCI>,
}

/// Prefix sizes for the demo grid: full decades up to and including n.
pub fn decade_grid(n_full: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut g = 100usize;
    while g < n_full {
        grid.push(g);
        g = g.saturating_mul(10);
    }
    grid.push(n_full);
    grid.dedup();
    grid
}

/// The lane-change evaluation end to end: synthesize the dataset, fit the
/// exponential input models, search an accelerating distribution, build one
/// batch, then report both uncertainty intervals on a grid of batch
/// prefixes. `oracle_samples` optionally adds a crude-sampling check of the
/// crash probability under the fitted model.
pub fn run_av_demo(
    config: &ExperimentConfig,
    oracle_samples: Option<usize>,
) -> Result<AvDemoReport> {
    run_av_demo_with(config, None, oracle_samples)
}

/// As `run_av_demo`, but on a caller-supplied dataset instead of a
/// synthesized one.
pub fn run_av_demo_with(
    config: &ExperimentConfig,
    dataset_override: Option<Vec<LaneChangeSample>>,
    oracle_samples: Option<usize>,
) -> Result<AvDemoReport> {
    expect_experiment(config, ExperimentId::AvDemo)?;
    let surrogate = SurrogateAVConfig::default();
    let root = RngStream::root(config.seed).child("av-demo");

    let dataset = match dataset_override {
        Some(dataset) => {
            if dataset.is_empty() {
                return Err(Error::EmptyData);
            }
            dataset
        }
        None => synthesize_dataset(
            config.k_list[0],
            &default_generator(),
            &root.child("dataset"),
        )?,
    };
    let inputs = dataset_inputs(&dataset);
    let fitted = fit_mle(
        &Family::Product(vec![Family::Exponential, Family::Exponential]),
        &inputs,
    )?;

    let ce = cross_entropy_tilt(
        &fitted.model,
        &CEConfig::new(scaled_severity_fn(surrogate)),
        &root.child("cross-entropy"),
    )?;

    let n_full = config.batch_size.min(100_000);
    let perf = crash_performance(surrogate);
    let batch = run_batch(&ce.model, &fitted.model, &perf, n_full, &root.child("batch"))?;

    let scheme = BootstrapScheme::new(config.schemes[0], config.replicate_count)?;
    let params = resample_params(&scheme, &fitted, Some(&inputs), &root.child("resample"))?;

    let mut rows = Vec::new();
    for n in decade_grid(n_full) {
        let prefix = batch.prefix(n)?;
        let su = is_estimate(&prefix, &fitted.model, config.alpha)?;
        let reused = lr_reuse_estimates(&params, &prefix)?;
        let (lr_lower, lr_upper) = quantile_ci(&reused.estimates, config.alpha)?;
        rows.push(AvDemoRow {
            n,
            point: su.point,
            su_lower: su.lower,
            su_upper: su.upper,
            su_width: su.upper - su.lower,
            lr_lower,
            lr_upper,
            lr_width: lr_upper - lr_lower,
        });
    }

    let oracle = match oracle_samples {
        Some(m) => Some(crude_scan(
            &fitted.model,
            &perf,
            m,
            &root.child("oracle"),
            config.alpha,
        )?),
        None => None,
    };

    Ok(AvDemoReport {
        dataset,
        fitted_model: fitted.model,
        tilt: ce.tilt,
        trajectory: ce.trajectory,
        rows,
        oracle,
    })
}

pub fn save_av_rows_csv(path: &Path, rows: &[AvDemoRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "n", "point", "su_lower", "su_upper", "su_width", "lr_lower", "lr_upper", "lr_width",
    ])?;
    for r in rows {
        w.write_record([
            format!("{}", r.n),
            format!("{}", r.point),
            format!("{}", r.su_lower),
            format!("{}", r.su_upper),
            format!("{}", r.su_width),
            format!("{}", r.lr_lower),
            format!("{}", r.lr_upper),
            format!("{}", r.lr_width),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_av_summary_csv(path: &Path, report: &AvDemoReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["quantity", "value"])?;
    let mut put = |key: &str, value: String| w.write_record([key.to_string(), value]);
    put("dataset_rows", format!("{}", report.dataset.len()))?;
    for (name, value) in report
        .fitted_model
        .param_names()
        .into_iter()
        .zip(report.fitted_model.params())
    {
        put(&format!("fitted_{name}"), format!("{value}"))?;
    }
    for (c, t) in report.tilt.iter().enumerate() {
        put(&format!("tilt_{c}"), format!("{t}"))?;
    }
    put("ce_iterations", format!("{}", report.trajectory.len()))?;
    if let Some(last) = report.rows.last() {
        put("batch_size", format!("{}", last.n))?;
        put("crash_probability", format!("{}", last.point))?;
        put("su_lower", format!("{}", last.su_lower))?;
        put("su_upper", format!("{}", last.su_upper))?;
        put("lr_lower", format!("{}", last.lr_lower))?;
        put("lr_upper", format!("{}", last.lr_upper))?;
    }
    if let Some(oracle) = &report.oracle {
        put("oracle_point", format!("{}", oracle.point))?;
        put("oracle_stderr", format!("{}", oracle.stderr))?;
        put("oracle_lower", format!("{}", oracle.lower))?;
        put("oracle_upper", format!("{}", oracle.upper))?;
    }
    w.flush()?;
    Ok(())
}

/// One nested-sampling estimate of the variance split: LHS is the variance
/// of a single-batch estimator over refitted inputs, T1 the input part
/// (covariance of two conditionally independent batches), T2 the simulation
/// part (half the mean squared batch disagreement).
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceDecompositionRow {
    pub k: usize,
    pub inner_n: usize,
    pub outer_reps: usize,
    pub lhs: f64,
    pub t1: f64,
    pub t2: f64,
    pub gap: f64,
}

pub fn variance_decomposition_row(
    k: usize,
    inner_n: usize,
    outer_reps: usize,
    beta: f64,
    alpha: f64,
    stream: &RngStream,
) -> Result<VarianceDecompositionRow> {
    if outer_reps < 2 {
        return Err(Error::InvalidArgument(
            "the outer loop needs at least 2 replications".into(),
        ));
    }
    let truth = ParametricModel::gaussian(0.0, 1.0)?;
    let perf = FnPerf::new("tail-indicator", move |x: &[f64]| {
        if x[0] > beta {
            1.0
        } else {
            0.0
        }
    });
    let pairs: Vec<(f64, f64)> = (0..outer_reps)
        .into_par_iter()
        .map(|rep| {
            let s = stream.child_index(rep as u64);
            let data = truth.sample(k, &s.child("data"))?;
            let fitted = fit_mle(&Family::Gaussian, &data)?;
            let sigma = fitted.model.params()[1];
            let sampling = ParametricModel::gaussian(beta, sigma)?;
            let estimate = |label: &str| -> Result<f64> {
                let batch = run_batch(&sampling, &fitted.model, &perf, inner_n, &s.child(label))?;
                Ok(is_estimate(&batch, &fitted.model, alpha)?.point)
            };
            Ok((estimate("inner-a")?, estimate("inner-b")?))
        })
        .collect::<Result<_>>()?;

    let m = outer_reps as f64;
    let mean_a = pairs.iter().map(|(a, _)| a).sum::<f64>() / m;
    let mean_b = pairs.iter().map(|(_, b)| b).sum::<f64>() / m;
    let mut lhs = 0.0;
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for (a, b) in &pairs {
        lhs += (a - mean_a) * (a - mean_a);
        t1 += (a - mean_a) * (b - mean_b);
        t2 += (a - b) * (a - b);
    }
    lhs /= m - 1.0;
    t1 /= m - 1.0;
    t2 /= 2.0 * m;
    let gap = if lhs > 0.0 {
        ((lhs - (t1 + t2)) / lhs).abs()
    } else {
        0.0
    };
    Ok(VarianceDecompositionRow {
        k,
        inner_n,
        outer_reps,
        lhs,
        t1,
        t2,
        gap,
    })
}

/// The identity check plus two scaling sweeps: the simulation term against
/// the inner batch size, and the input term against the data size.
pub fn run_variance_decomposition_check(
    config: &ExperimentConfig,
) -> Result<Vec<VarianceDecompositionRow>> {
    expect_experiment(config, ExperimentId::VarCheck)?;
    let root = RngStream::root(config.seed).child("var-check");
    let mut rows = Vec::new();
    for &k in &config.k_list {
        rows.push(variance_decomposition_row(
            k,
            config.batch_size,
            config.meta_reps,
            config.beta,
            config.alpha,
            &root.child(&format!("identity-k{k}")),
        )?);
    }
    let k0 = config.k_list[0];
    for inner_n in [100usize, 1000, 10_000] {
        rows.push(variance_decomposition_row(
            k0,
            inner_n,
            1000,
            config.beta,
            config.alpha,
            &root.child(&format!("inner-sweep-n{inner_n}")),
        )?);
    }
    for k in [100usize, 10_000] {
        rows.push(variance_decomposition_row(
            k,
            100,
            config.meta_reps,
            config.beta,
            config.alpha,
            &root.child(&format!("data-sweep-k{k}")),
        )?);
    }
    Ok(rows)
}

pub fn save_variance_csv(path: &Path, rows: &[VarianceDecompositionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "inner_n", "outer_reps", "lhs", "t1", "t2", "gap"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.k),
            format!("{}", r.inner_n),
            format!("{}", r.outer_reps),
            format!("{}", r.lhs),
            format!("{}", r.t1),
            format!("{}", r.t2),
            format!("{}", r.gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---- tests -----------------------------------------------------------------
