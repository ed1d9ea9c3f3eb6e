//! Lane-change evaluation scenario: a closed-form kinematic crash surrogate
//! plus synthetic dataset generation and CSV ingestion.
//!
//! The surrogate stands in for a full vehicle simulator. The lead vehicle
//! cuts in at range R closing at speed u = R / TTC; the following vehicle
//! coasts for a reaction time and then brakes at constant deceleration, so
//! it crashes exactly when u*tau + u^2/(2a) >= R. All defaults here
//! (reaction time, braking level, generator means) are synthetic
//! calibration choices, not measurements.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cross_entropy::SeverityFn;
use crate::error::{Error, Result};
use crate::input_models::{ParametricModel, Samples};
use crate::monte_carlo::FnPerf;
use crate::stream::RngStream;

/// Lead-vehicle initial speed, fixed for every scenario.
pub const FIXED_VELOCITY_MPS: f64 = 30.0;

/// Default number of synthetic lane-change records.
pub const DEFAULT_DATASET_ROWS: usize = 12_304;

/// One observed lane-change scenario. The model inputs are the reciprocals
/// of range and time-to-collision, which is what the exponential input fit
/// consumes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeSample {
    pub v: f64,
    pub inv_range: f64,
    pub inv_ttc: f64,
}

impl LaneChangeSample {
    pub fn new(v: f64, inv_range: f64, inv_ttc: f64) -> Result<Self> {
        let sample = Self {
            v,
            inv_range,
            inv_ttc,
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Builds a sample at the fixed velocity from a model point laid out as
    /// [inv_range, inv_ttc].
    pub fn from_inputs(inv_range: f64, inv_ttc: f64) -> Result<Self> {
        Self::new(FIXED_VELOCITY_MPS, inv_range, inv_ttc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v.is_finite() && self.v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "velocity must be positive and finite, got {}",
                self.v
            )));
        }
        if !(self.inv_range.is_finite() && self.inv_range > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse range must be positive and finite, got {}",
                self.inv_range
            )));
        }
        if !(self.inv_ttc.is_finite() && self.inv_ttc >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse TTC must be nonnegative and finite, got {}",
                self.inv_ttc
            )));
        }
        Ok(())
    }
}

/// Reaction-then-constant-braking follower parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateAVConfig {
    pub reaction_time: f64,
    pub braking_decel: f64,
}

impl Default for SurrogateAVConfig {
    fn default() -> Self {
        Self {
            reaction_time: 0.4,
            braking_decel: 6.0,
        }
    }
}

impl SurrogateAVConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reaction_time.is_finite() && self.reaction_time >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reaction time must be nonnegative and finite, got {}",
                self.reaction_time
            )));
        }
        if !(self.braking_decel.is_finite() && self.braking_decel > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "braking deceleration must be positive and finite, got {}",
                self.braking_decel
            )));
        }
        Ok(())
    }
}

/// Distance closed during reaction and braking minus the initial range.
/// Nonnegative exactly when the scenario ends in a crash.
pub fn severity(sample: &LaneChangeSample, config: &SurrogateAVConfig) -> f64 {
    let range = 1.0 / sample.inv_range;
    let closing = range * sample.inv_ttc;
    closing * config.reaction_time + closing * closing / (2.0 * config.braking_decel) - range
}

pub fn crash_indicator(sample: &LaneChangeSample, config: &SurrogateAVConfig) -> u8 {
    u8::from(severity(sample, config) >= 0.0)
}

fn sample_from_point(point: &[f64]) -> LaneChangeSample {
    LaneChangeSample {
        v: FIXED_VELOCITY_MPS,
        inv_range: point[0],
        inv_ttc: point[1],
    }
}

/// Crash indicator as a batch performance function over [inv_range, inv_ttc]
/// points.
pub fn crash_performance(
    config: SurrogateAVConfig,
) -> FnPerf<impl Fn(&[f64]) -> f64 + Send + Sync> {
    FnPerf::new("lane_change_crash", move |point: &[f64]| {
        f64::from(crash_indicator(&sample_from_point(point), &config))
    })
}

/// Severity over [inv_range, inv_ttc] points.
pub fn severity_fn(config: SurrogateAVConfig) -> SeverityFn {
    Arc::new(move |point: &[f64]| severity(&sample_from_point(point), &config))
}

/// Range-scaled severity for the cross-entropy search: severity times
/// inv_range, which is w*tau + w^2 u / (2a) - 1 in the model coordinates.
/// The sign matches `severity` at every point, but the raw severity creeps
/// toward 0 from below as the range grows, a no-crash direction that can
/// capture the elite quantile; the scaled form stays near -1 there and
/// rewards the small-range corner where the crash mass actually lives.
pub fn scaled_severity_fn(config: SurrogateAVConfig) -> SeverityFn {
    Arc::new(move |point: &[f64]| {
        let inv_range = point[0];
        let inv_ttc = point[1];
        let closing = inv_ttc / inv_range;
        inv_ttc * config.reaction_time + inv_ttc * closing / (2.0 * config.braking_decel) - 1.0
    })
}

/// Synthetic generator behind the default dataset: independent exponentials
/// on inverse range and inverse TTC, calibrated so a crash is a rare event
/// under the default surrogate.
pub fn default_generator() -> ParametricModel {
    ParametricModel::product(vec![
        ParametricModel::exponential(0.025).unwrap(),
        ParametricModel::exponential(0.002).unwrap(),
    ])
    .unwrap()
}

pub fn synthesize_dataset(
    count: usize,
    generator: &ParametricModel,
    stream: &RngStream,
) -> Result<Vec<LaneChangeSample>> {
    if generator.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: generator.dim(),
        });
    }
    let draws = generator.sample(count, stream)?;
    draws
        .points()
        .map(|p| LaneChangeSample::from_inputs(p[0], p[1]))
        .collect()
}

/// Packs the model inputs [inv_range, inv_ttc] of each sample for fitting.
pub fn dataset_inputs(samples: &[LaneChangeSample]) -> Samples {
    let mut inputs = Samples::with_capacity(2, samples.len());
    for s in samples {
        inputs.push(&[s.inv_range, s.inv_ttc]);
    }
    inputs
}

pub fn save_dataset_csv(path: &Path, samples: &[LaneChangeSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["v_mps", "inv_range_per_m", "inv_ttc_per_s"])?;
    for s in samples {
        w.write_record([
            format!("{}", s.v),
            format!("{}", s.inv_range),
            format!("{}", s.inv_ttc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset_csv(path: &Path) -> Result<Vec<LaneChangeSample>> {
    let mut reader = csv::Reader::from_path(path)?;
    {
        let headers = reader.headers()?;
        let expected = ["v_mps", "inv_range_per_m", "inv_ttc_per_s"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidArgument(format!(
                "unexpected dataset header {headers:?}"
            )));
        }
    }
    let columns = ["v_mps", "inv_range_per_m", "inv_ttc_per_s"];
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |col: usize| -> Result<f64> {
            record
                .get(col)
                .ok_or_else(|| Error::CsvRecord {
                    row,
                    column: columns[col].into(),
                    message: "missing field".into(),
                })?
                .parse::<f64>()
                .map_err(|e| Error::CsvRecord {
                    row,
                    column: columns[col].into(),
                    message: e.to_string(),
                })
        };
        let sample = LaneChangeSample {
            v: field(0)?,
            inv_range: field(1)?,
            inv_ttc: field(2)?,
        };
        for (col, check) in [
            (0, sample.v.is_finite() && sample.v > 0.0),
            (1, sample.inv_range.is_finite() && sample.inv_range > 0.0),
            (2, sample.inv_ttc.is_finite() && sample.inv_ttc >= 0.0),
        ] {
            if !check {
                return Err(Error::CsvRecord {
                    row,
                    column: columns[col].into(),
                    message: format!("out-of-domain value {}", field(col)?),
                });
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

// ---- tests -----------------------------------------------------------------
