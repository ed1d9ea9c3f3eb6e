//! Cross-entropy search for an accelerating distribution: iteratively tilt
//! the nominal model toward the rare set, guided by an elite quantile of a
//! continuous severity score whose sign marks set membership.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::bootstrap::quantile_type7_sorted;
use crate::error::{Error, Result};
use crate::input_models::ParametricModel;
use crate::monte_carlo::{lr_sums, ExperimentBatch};
use crate::stream::RngStream;

pub type SeverityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Tuning for the cross-entropy recursion. The severity function must
/// satisfy s(xi) >= 0 exactly when xi lies in the rare set.
#[derive(Clone)]
pub struct CEConfig {
    pub samples_per_iter: usize,
    pub elite_fraction: f64,
    pub max_iters: usize,
    pub smoothing: f64,
    pub severity: SeverityFn,
}

impl CEConfig {
    pub fn new(severity: SeverityFn) -> Self {
        Self {
            samples_per_iter: 2000,
            elite_fraction: 0.1,
            max_iters: 50,
            smoothing: 0.7,
            severity,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "elite fraction must lie in (0, 1), got {}",
                self.elite_fraction
            )));
        }
        if (self.samples_per_iter as f64) * self.elite_fraction < 10.0 {
            return Err(Error::InvalidArgument(format!(
                "elite set too small: {} samples at fraction {} leave fewer than 10 elites",
                self.samples_per_iter, self.elite_fraction
            )));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must lie in (0, 1], got {}",
                self.smoothing
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Debug for CEConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CEConfig")
            .field("samples_per_iter", &self.samples_per_iter)
            .field("elite_fraction", &self.elite_fraction)
            .field("max_iters", &self.max_iters)
            .field("smoothing", &self.smoothing)
            .finish_non_exhaustive()
    }
}

/// One step of the recursion, as exported to the trajectory CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CeIterate {
    pub iteration: usize,
    pub level: f64,
    pub tilt: Vec<f64>,
    pub elite_count: usize,
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct CeResult {
    pub tilt: Vec<f64>,
    pub model: ParametricModel,
    pub trajectory: Vec<CeIterate>,
}

/// Per-coordinate family facts needed for the closed-form tilt update.
enum CoordKind {
    Exp { rate0: f64 },
    Gauss { mean0: f64, var0: f64 },
}

fn coord_kinds(model: &ParametricModel, out: &mut Vec<CoordKind>) {
    match model {
        ParametricModel::Exponential { mean } => out.push(CoordKind::Exp { rate0: 1.0 / mean }),
        ParametricModel::Gaussian { mean, stdev } => out.push(CoordKind::Gauss {
            mean0: *mean,
            var0: stdev * stdev,
        }),
        ParametricModel::Product { components } => {
            for c in components {
                coord_kinds(c, out);
            }
        }
    }
}

/// Runs the cross-entropy recursion from the untilted nominal model.
///
/// Each iteration draws N samples from the current tilted model, sets the
/// level gamma_t = min(upper elite_fraction quantile of severity, 0), takes
/// samples at or above the level as elites, and moment-matches the tilt to
/// the elites' likelihood-ratio-weighted mean, smoothed by the configured
/// factor. Exponential coordinates are clamped to 95% of the tilt boundary
/// (and flagged) so every iterate stays a valid model. The search stops
/// after the update of the first iteration whose level reaches 0, meaning
/// the elite set sits inside the rare set, or at max_iters; ten consecutive
/// iterations without level progress abort with the trajectory attached.
pub fn cross_entropy_tilt(
    nominal: &ParametricModel,
    config: &CEConfig,
    stream: &RngStream,
) -> Result<CeResult> {
    nominal.validate()?;
    config.validate()?;
    let d = nominal.dim();
    let mut kinds = Vec::with_capacity(d);
    coord_kinds(nominal, &mut kinds);

    let mut tilt = vec![0.0; d];
    let mut model = nominal.clone();
    let mut trajectory: Vec<CeIterate> = Vec::new();
    let mut best_level = f64::NEG_INFINITY;
    let mut stalled = 0usize;

    for iteration in 0..config.max_iters {
        let samples = model.sample(
            config.samples_per_iter,
            &stream.child_index(iteration as u64),
        )?;
        let mut severities = Vec::with_capacity(samples.n());
        for point in samples.points() {
            let s = (config.severity)(point);
            if s.is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "severity returned NaN at {point:?}"
                )));
            }
            severities.push(s);
        }
        let mut sorted = severities.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let level = quantile_type7_sorted(&sorted, 1.0 - config.elite_fraction).min(0.0);

        let mut sum_w = 0.0;
        let mut weighted_x = vec![0.0; d];
        let mut elite_count = 0usize;
        for (i, point) in samples.points().enumerate() {
            if severities[i] >= level {
                elite_count += 1;
                let w = (nominal.log_density(point)? - model.log_density(point)?).exp();
                sum_w += w;
                for (acc, &x) in weighted_x.iter_mut().zip(point) {
                    *acc += w * x;
                }
            }
        }

        let mut clamped = false;
        if sum_w > 0.0 {
            let mut next = vec![0.0; d];
            for c in 0..d {
                let m = weighted_x[c] / sum_w;
                let t_star = match kinds[c] {
                    CoordKind::Exp { rate0 } => {
                        if m > 0.0 {
                            rate0 - 1.0 / m
                        } else {
                            tilt[c]
                        }
                    }
                    CoordKind::Gauss { mean0, var0 } => (m - mean0) / var0,
                };
                let mut t = config.smoothing * t_star + (1.0 - config.smoothing) * tilt[c];
                if let CoordKind::Exp { rate0 } = kinds[c] {
                    let cap = 0.95 * rate0;
                    if t > cap {
                        t = cap;
                        clamped = true;
                    }
                }
                next[c] = t;
            }
            tilt = next;
            model = nominal.exponential_tilt(&tilt)?;
        }

        trajectory.push(CeIterate {
            iteration,
            level,
            tilt: tilt.clone(),
            elite_count,
            clamped,
        });

        if level > best_level {
            best_level = level;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 10 {
                return Err(Error::CeStalled { trajectory });
            }
        }
        if level == 0.0 {
            break;
        }
    }

    Ok(CeResult {
        tilt,
        model,
        trajectory,
    })
}

/// Mean squared weighted output (1/n) sum (w_j f_j)^2, the quantity an
/// accelerating distribution tries to minimize; lower is better at equal n.
pub fn is_second_moment(batch: &ExperimentBatch, target_model: &ParametricModel) -> Result<f64> {
    let mut lbuf = Vec::new();
    let sums = lr_sums(target_model, batch, &mut lbuf)?;
    Ok((2.0 * sums.scale).exp() * sums.mean_wf2_scaled)
}

/// Trajectory CSV: iteration, level, elite count, clamp flag, then one tilt
/// column per coordinate.
pub fn save_trajectory_csv(path: &Path, trajectory: &[CeIterate]) -> Result<()> {
    let dim = trajectory.first().map_or(0, |it| it.tilt.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "iteration".to_string(),
        "level".to_string(),
        "elite_count".to_string(),
        "clamped".to_string(),
    ];
    header.extend((0..dim).map(|c| format!("t{c}")));
    w.write_record(&header)?;
    for it in trajectory {
        let mut record = vec![
            format!("{}", it.iteration),
            format!("{}", it.level),
            format!("{}", it.elite_count),
            format!("{}", it.clamped),
        ];
        for t in &it.tilt {
            record.push(format!("{t}"));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

// ---- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::input_models::Samples;
    use crate::monte_carlo::{is_estimate, run_batch, FnPerf};

    fn stream() -> RngStream {
        RngStream::root(1313).child("ce-tests")
    }

    fn severity_shift(beta: f64) -> SeverityFn {
        Arc::new(move |x: &[f64]| x[0] - beta)
    }

    #[test]
    fn config_validation_rejects_bad_settings() {
        let mut cfg = CEConfig::new(severity_shift(5.0));
        cfg.elite_fraction = 0.0;
        assert!(cross_entropy_tilt(
            &ParametricModel::gaussian(0.0, 1.0).unwrap(),
            &cfg,
            &stream()
        )
        .is_err());

        let mut cfg = CEConfig::new(severity_shift(5.0));
        cfg.samples_per_iter = 50;
        assert!(cross_entropy_tilt(
            &ParametricModel::gaussian(0.0, 1.0).unwrap(),
            &cfg,
            &stream()
        )
        .is_err());
    }

    #[test]
    fn non_rare_event_converges_immediately() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let cfg = CEConfig::new(Arc::new(|x: &[f64]| x[0]));
        let res = cross_entropy_tilt(&nominal, &cfg, &stream().child("non-rare")).unwrap();
        assert_eq!(res.trajectory.len(), 1);
        assert_eq!(res.trajectory[0].level, 0.0);
        assert!(res.tilt[0].abs() <= 1.0, "tilt {}", res.tilt[0]);
        assert!(res.trajectory[0].elite_count >= 500);
    }

    #[test]
    fn gaussian_tail_search_lands_near_the_event() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let cfg = CEConfig::new(severity_shift(5.0));
        let res = cross_entropy_tilt(&nominal, &cfg, &stream().child("tail5")).unwrap();
        // Unit variance, so the tilted mean equals the tilt itself.
        assert!(
            (4.0..=6.0).contains(&res.tilt[0]),
            "final tilt {}",
            res.tilt[0]
        );
        assert_eq!(res.trajectory.last().unwrap().level, 0.0);
        match res.model {
            ParametricModel::Gaussian { mean, stdev } => {
                assert!((mean - res.tilt[0]).abs() < 1e-12);
                assert_eq!(stdev, 1.0);
            }
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn hopeless_severity_stalls_with_trajectory() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let cfg = CEConfig::new(Arc::new(|_: &[f64]| -1.0));
        let err = cross_entropy_tilt(&nominal, &cfg, &stream().child("stall")).unwrap_err();
        match err {
            Error::CeStalled { trajectory } => {
                assert_eq!(trajectory.len(), 11);
                assert!(trajectory.iter().all(|it| it.level == -1.0));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn levels_rise_monotonically_in_most_runs() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let base = RngStream::root(555).child("ce-monotone");
        let mut monotone = 0;
        for seed in 0..100u64 {
            let cfg = CEConfig::new(severity_shift(5.0));
            let res = cross_entropy_tilt(&nominal, &cfg, &base.child_index(seed)).unwrap();
            let levels: Vec<f64> = res.trajectory.iter().map(|it| it.level).collect();
            if levels.windows(2).all(|w| w[1] >= w[0]) {
                monotone += 1;
            }
        }
        assert!(monotone >= 90, "only {monotone} of 100 runs were monotone");
    }

    #[test]
    fn exponential_tilts_are_clamped_inside_the_boundary() {
        let nominal = ParametricModel::exponential(1.0).unwrap();
        let mut cfg = CEConfig::new(Arc::new(|x: &[f64]| x[0] - 100.0));
        cfg.max_iters = 15;
        let res = cross_entropy_tilt(&nominal, &cfg, &stream().child("clamp")).unwrap();
        assert!(res.trajectory.iter().any(|it| it.clamped));
        let last = res.trajectory.last().unwrap();
        assert!(last.tilt[0] <= 0.95 + 1e-12, "tilt {}", last.tilt[0]);
        assert_eq!(res.tilt[0], 0.95);
    }

    #[test]
    fn ce_distribution_is_nearly_as_good_as_the_known_optimum() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let cfg = CEConfig::new(severity_shift(5.0));
        let res = cross_entropy_tilt(&nominal, &cfg, &stream().child("quality")).unwrap();
        let perf = FnPerf::new("tail5", |x: &[f64]| if x[0] > 5.0 { 1.0 } else { 0.0 });
        let ce_batch = run_batch(
            &res.model,
            &nominal,
            &perf,
            10_000,
            &stream().child("quality-ce-batch"),
        )
        .unwrap();
        let opt_batch = run_batch(
            &ParametricModel::gaussian(5.0, 1.0).unwrap(),
            &nominal,
            &perf,
            10_000,
            &stream().child("quality-opt-batch"),
        )
        .unwrap();
        let ce = is_estimate(&ce_batch, &nominal, 0.05).unwrap();
        let opt = is_estimate(&opt_batch, &nominal, 0.05).unwrap();
        assert!(
            ce.stderr <= 1.2 * opt.stderr,
            "CE stderr {} vs optimal {}",
            ce.stderr,
            opt.stderr
        );
    }

    #[test]
    fn second_moment_hand_cases() {
        // One exponential sample with likelihood ratio 0.3 and f = 1.
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
        let m2 = is_second_moment(&batch, &target).unwrap();
        assert!((m2 - 0.09).abs() < 1e-15, "m2 {m2}");

        let zero_batch = ExperimentBatch::new(
            sampling.clone(),
            sampling.clone(),
            Samples::from_scalars(vec![0.5, 1.5]),
            vec![0.0, 0.0],
            vec![
                sampling.log_density(&[0.5]).unwrap(),
                sampling.log_density(&[1.5]).unwrap(),
            ],
            "test".into(),
        )
        .unwrap();
        assert_eq!(is_second_moment(&zero_batch, &target).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_matches_the_analytic_tail_value() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let sampling = ParametricModel::gaussian(5.0, 1.0).unwrap();
        let perf = FnPerf::new("tail5", |x: &[f64]| if x[0] > 5.0 { 1.0 } else { 0.0 });
        let batch = run_batch(&sampling, &nominal, &perf, 100_000, &stream().child("m2")).unwrap();
        let m2 = is_second_moment(&batch, &nominal).unwrap();
        // e^25 * SF(10), by substitution in the tail integral.
        let truth = 5.48666749970354e-13;
        assert!(
            (m2 - truth).abs() <= 0.2 * truth,
            "m2 {m2} vs analytic {truth}"
        );
    }

    #[test]
    fn trajectory_csv_has_one_row_per_iteration() {
        let nominal = ParametricModel::gaussian(0.0, 1.0).unwrap();
        let cfg = CEConfig::new(severity_shift(5.0));
        let res = cross_entropy_tilt(&nominal, &cfg, &stream().child("csv")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        save_trajectory_csv(&path, &res.trajectory).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iteration,level,elite_count,clamped,t0");
        assert_eq!(lines.count(), res.trajectory.len());
    }
}
