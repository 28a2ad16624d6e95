//! Calibrated parameter sets: a declining-transmission path with
//! variance-driven sorting, and a population whose coresidence bias is
//! smallest in the mid twenties.

use serde::{Deserialize, Serialize};

use crate::coresidence::YearWindow;
use crate::data_io::RegionId;
use crate::error::{Error, Result};
use crate::model::{simulate_dynamics_with, FeedbackSpec, GenerationMoments, ModelParams, Schedule};
use crate::synth::{BlockModel, CompletionDelay, LeaveHomeModel, ModelSource, MIN_LEAVE_AGE, PopulationConfig};

/// Endpoints of the slope and sorting trends to be matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendTargets {
    pub slope_start: f64,
    pub slope_end: f64,
    pub rho_start: f64,
    pub rho_end: f64,
    pub generations: usize,
    pub initial_variance: f64,
    pub sigma_eps2: f64,
    pub mu: f64,
}

impl Default for TrendTargets {
    fn default() -> Self {
        TrendTargets {
            slope_start: 0.57,
            slope_end: 0.33,
            rho_start: 0.66,
            rho_end: 0.55,
            generations: 4,
            initial_variance: 16.0,
            sigma_eps2: 6.0,
            mu: 8.0,
        }
    }
}

/// A transmission schedule and linear feedback that hit [`TrendTargets`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPath {
    pub targets: TrendTargets,
    pub params: ModelParams,
    pub feedback: FeedbackSpec,
    pub schedule: Schedule,
    pub moments: Vec<GenerationMoments>,
}

/// Solve for the path.
///
/// Transmission falls linearly between the values that give the target
/// slopes at the target sorting levels. Sorting follows
/// `intercept + slope * variance`, with the two coefficients set so that
/// sorting equals its targets at the first and last generation's variance.
/// The last variance depends on the feedback, so the two are iterated to a
/// fixed point.
pub fn calibrate_trends(targets: &TrendTargets) -> Result<CalibratedPath> {
    let t = targets;
    if t.generations < 2 {
        return Err(Error::param("generations", "must be at least 2"));
    }
    let lambda_start = 2.0 * t.slope_start / (1.0 + t.rho_start);
    let lambda_end = 2.0 * t.slope_end / (1.0 + t.rho_end);
    let params = ModelParams::new(lambda_start, t.rho_start, t.sigma_eps2, t.mu)?;
    ModelParams::new(lambda_end, t.rho_end, t.sigma_eps2, t.mu)?;
    let schedule = Schedule::linear(lambda_start, lambda_end, t.generations);

    let v0 = t.initial_variance;
    // start from the path with sorting held at its first value
    let mut v_end = simulate_dynamics_with(&params, &FeedbackSpec::Constant, v0, &schedule)?
        .last()
        .expect("at least two generations")
        .variance;
    for _ in 0..200 {
        let feedback = feedback_through(v0, t.rho_start, v_end, t.rho_end)?;
        let moments = simulate_dynamics_with(&params, &feedback, v0, &schedule)?;
        let next = moments.last().expect("at least two generations").variance;
        if (next - v_end).abs() <= 1e-13 * v0.max(1.0) {
            return Ok(CalibratedPath {
                targets: *t,
                params,
                feedback,
                schedule,
                moments,
            });
        }
        v_end = next;
    }
    Err(Error::param("targets", "calibration did not converge"))
}

fn feedback_through(v0: f64, r0: f64, v1: f64, r1: f64) -> Result<FeedbackSpec> {
    if r0 == r1 {
        return Ok(FeedbackSpec::LinearClipped { intercept: r0, slope: 0.0 });
    }
    if (r0 - r1) * (v0 - v1) <= 0.0 {
        return Err(Error::param(
            "targets",
            "sorting must move with the variance; the implied feedback slope is not positive",
        ));
    }
    let slope = (r0 - r1) / (v0 - v1);
    Ok(FeedbackSpec::LinearClipped {
        intercept: r0 - slope * v0,
        slope,
    })
}

const OWN_GRADIENT: f64 = -0.15;

/// Single-region population in which children finish school late and
/// leave home gradually, so that the coresident sample is censored at young
/// ages and selected at older ones.
pub fn coresidence_population(n_per_cohort: usize, cohorts: (i32, i32), seed: u64) -> Result<PopulationConfig> {
    let params = ModelParams::new(0.6, 0.6, 5.0, 8.0)?;
    let model = BlockModel::steady_state(params)?;
    let mut config = PopulationConfig::new(
        vec![RegionId::new("r000")],
        cohorts,
        n_per_cohort,
        ModelSource::Shared(model),
        seed,
    );
    config.leave_home = LeaveHomeModel {
        hazard: (MIN_LEAVE_AGE..=45)
            .map(|age| match age {
                ..=17 => 0.002,
                18..=20 => 0.01,
                21..=23 => 0.015,
                24..=26 => 0.07,
                27..=29 => 0.13,
                _ => 0.15,
            })
            .collect(),
        own_gradient: OWN_GRADIENT,
        ..LeaveHomeModel::late_leaving()
    };
    config.completion_delay = CompletionDelay {
        probability: 0.6,
        max_years: 5,
    };
    Ok(config)
}

/// Survey years and ages used with [`coresidence_population`].
pub struct CoresidenceDesign {
    pub ages: Vec<u32>,
    pub benchmark_age: u32,
    pub window: YearWindow,
    pub cohorts: (i32, i32),
}

impl Default for CoresidenceDesign {
    fn default() -> Self {
        CoresidenceDesign {
            ages: (18..=32).collect(),
            benchmark_age: 35,
            window: YearWindow::new(2000, 2004),
            cohorts: (1965, 1986),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::theoretical_parent_child_slope;

    #[test]
    fn path_hits_targets() {
        let path = calibrate_trends(&TrendTargets::default()).unwrap();
        let (first, last) = (path.moments[0], *path.moments.last().unwrap());
        assert!((first.slope_to_child - 0.57).abs() < 1e-9);
        assert!((last.slope_to_child - 0.33).abs() < 1e-9);
        assert!((first.rho_used - 0.66).abs() < 1e-9);
        assert!((last.rho_used - 0.55).abs() < 1e-9);
        assert!(path.moments.windows(2).all(|w| w[1].variance < w[0].variance));
        let mut p = path.params;
        p.lambda = last.lambda;
        p.rho = last.rho_used;
        assert!((theoretical_parent_child_slope(&p) - last.slope_to_child).abs() < 1e-12);
    }

    #[test]
    fn rising_variance_cannot_lower_sorting() {
        let t = TrendTargets {
            initial_variance: 1.0,
            ..TrendTargets::default()
        };
        assert!(calibrate_trends(&t).is_err());
    }
}
