//! Closed-form overlapping-generations model of sorting, dispersion and
//! persistence in schooling.
//!
//! Each generation forms couples with sorting strength `rho`, children
//! inherit a share `lambda` of the parental midpoint plus an idiosyncratic
//! shock with variance `sigma_eps2`. Dispersion feeds back into sorting
//! through a [`FeedbackSpec`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural parameters of one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Transmission strength, in (0, 1).
    pub lambda: f64,
    /// Sorting strength, in [0, 1].
    pub rho: f64,
    /// Variance of the idiosyncratic shock, in squared years.
    pub sigma_eps2: f64,
    /// Mean schooling in years.
    pub mu: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, rho: f64, sigma_eps2: f64, mu: f64) -> Result<Self> {
        let p = ModelParams {
            lambda,
            rho,
            sigma_eps2,
            mu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("rho", self.rho),
            ("sigma_eps2", self.sigma_eps2),
            ("mu", self.mu),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::param("lambda", format!("{} not in (0,1)", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param("rho", format!("{} not in [0,1]", self.rho)));
        }
        if self.sigma_eps2 < 0.0 {
            return Err(Error::param("sigma_eps2", "must be non-negative"));
        }
        Ok(())
    }

    /// Multiplier on parental variance in the variance recursion.
    pub fn variance_multiplier(&self) -> f64 {
        self.lambda * self.lambda * (1.0 + self.rho) / 2.0
    }

    /// Fixed point of [`variance_recursion`], if the recursion is contracting.
    pub fn steady_state_variance(&self) -> Option<f64> {
        let m = self.variance_multiplier();
        (m < 1.0).then(|| self.sigma_eps2 / (1.0 - m))
    }
}

/// Expected schooling of a spouse given own schooling `e_i`.
pub fn spouse_conditional_mean(e_i: f64, params: &ModelParams) -> f64 {
    params.mu + params.rho * (e_i - params.mu)
}

/// Variance of children's schooling given parental variance `sigma_t2`.
pub fn variance_recursion(sigma_t2: f64, params: &ModelParams) -> f64 {
    params.variance_multiplier() * sigma_t2 + params.sigma_eps2
}

/// Regression slope of a child's schooling on one parent's schooling.
///
/// Written as Cov(parent, child) / Var(parent); it only coincides with a
/// correlation when parent and child variances are equal.
pub fn theoretical_parent_child_slope(params: &ModelParams) -> f64 {
    params.lambda * (1.0 + params.rho) / 2.0
}

/// Match utility: both partners' schooling plus a match-specific term.
pub fn match_utility(e_i: f64, e_j: f64, ell: f64) -> f64 {
    e_i + e_j + ell
}

/// Mapping from parental variance to sorting strength.
///
/// All variants are clipped to [0, 1] and non-decreasing in variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedbackSpec {
    /// Sorting stays at `ModelParams::rho`.
    Constant,
    /// `intercept + slope * variance`, clipped.
    LinearClipped { intercept: f64, slope: f64 },
    /// `floor + (ceiling - floor) / (1 + exp(-steepness * (variance - midpoint)))`.
    Logistic {
        floor: f64,
        ceiling: f64,
        midpoint: f64,
        steepness: f64,
    },
}

impl FeedbackSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FeedbackSpec::Constant => Ok(()),
            FeedbackSpec::LinearClipped { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() {
                    return Err(Error::NonFinite("feedback"));
                }
                if slope < 0.0 {
                    return Err(Error::param("feedback.slope", "must be non-negative"));
                }
                Ok(())
            }
            FeedbackSpec::Logistic {
                floor,
                ceiling,
                midpoint,
                steepness,
            } => {
                if ![floor, ceiling, midpoint, steepness].iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("feedback"));
                }
                if steepness < 0.0 {
                    return Err(Error::param("feedback.steepness", "must be non-negative"));
                }
                if floor > ceiling {
                    return Err(Error::param("feedback.floor", "exceeds ceiling"));
                }
                Ok(())
            }
        }
    }

    /// Sorting implied by parental variance `sigma2`.
    pub fn rho(&self, sigma2: f64, params: &ModelParams) -> f64 {
        let raw = match *self {
            FeedbackSpec::Constant => params.rho,
            FeedbackSpec::LinearClipped { intercept, slope } => intercept + slope * sigma2,
            FeedbackSpec::Logistic {
                floor,
                ceiling,
                midpoint,
                steepness,
            } => floor + (ceiling - floor) / (1.0 + (-steepness * (sigma2 - midpoint)).exp()),
        };
        raw.clamp(0.0, 1.0)
    }
}

/// Moments of one simulated generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationMoments {
    pub t: usize,
    pub mean: f64,
    pub variance: f64,
    /// Sorting applied when this generation formed couples.
    pub rho_used: f64,
    pub lambda: f64,
    /// Parent-child slope produced by this generation's couples.
    pub slope_to_child: f64,
}

/// Time-varying inputs for [`simulate_dynamics_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Transmission per generation; its length sets the number of generations.
    pub lambdas: Vec<f64>,
    /// Additive per-generation change of the mean (0 holds the mean fixed).
    #[serde(default)]
    pub mean_trend: f64,
}

impl Schedule {
    /// Linear interpolation from `from` to `to` over `generations` steps.
    pub fn linear(from: f64, to: f64, generations: usize) -> Self {
        let lambdas = (0..generations)
            .map(|t| {
                if generations == 1 {
                    from
                } else {
                    from + (to - from) * t as f64 / (generations - 1) as f64
                }
            })
            .collect();
        Schedule {
            lambdas,
            mean_trend: 0.0,
        }
    }
}

/// Iterate the closed-form model for `generations` steps with constant
/// transmission.
pub fn simulate_dynamics(
    params: &ModelParams,
    feedback: &FeedbackSpec,
    initial_variance: f64,
    generations: usize,
) -> Result<Vec<GenerationMoments>> {
    let schedule = Schedule {
        lambdas: vec![params.lambda; generations],
        mean_trend: 0.0,
    };
    simulate_dynamics_with(params, feedback, initial_variance, &schedule)
}

/// Iterate the model along a transmission schedule.
///
/// Each step sets sorting from the current variance through `feedback`,
/// records the implied parent-child slope, then advances the variance with
/// [`variance_recursion`]. The mean evolves as
/// `mu' = lambda * mu + (1 - lambda) * mu + trend`, i.e. it is held fixed
/// unless a trend is given.
pub fn simulate_dynamics_with(
    params: &ModelParams,
    feedback: &FeedbackSpec,
    initial_variance: f64,
    schedule: &Schedule,
) -> Result<Vec<GenerationMoments>> {
    params.validate()?;
    feedback.validate()?;
    if schedule.lambdas.is_empty() {
        return Err(Error::param("generations", "must be at least 1"));
    }
    if !initial_variance.is_finite() || !schedule.mean_trend.is_finite() {
        return Err(Error::NonFinite("initial_variance"));
    }
    if initial_variance < 0.0 {
        return Err(Error::param("initial_variance", "must be non-negative"));
    }

    let mut out = Vec::with_capacity(schedule.lambdas.len());
    let mut variance = initial_variance;
    let mut mean = params.mu;
    for (t, &lambda) in schedule.lambdas.iter().enumerate() {
        let mut step = *params;
        step.lambda = lambda;
        step.mu = mean;
        step.validate()?;
        step.rho = feedback.rho(variance, &step);
        out.push(GenerationMoments {
            t,
            mean,
            variance,
            rho_used: step.rho,
            lambda,
            slope_to_child: theoretical_parent_child_slope(&step),
        });
        variance = variance_recursion(variance, &step);
        mean = lambda * mean + (1.0 - lambda) * mean + schedule.mean_trend;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lambda: f64, rho: f64) -> ModelParams {
        ModelParams::new(lambda, rho, 1.0, 10.0).unwrap()
    }

    #[test]
    fn spouse_mean_examples() {
        assert_eq!(spouse_conditional_mean(10.0, &p(0.5, 0.3)), 10.0);
        assert_eq!(spouse_conditional_mean(12.0, &p(0.5, 0.5)), 11.0);
        assert_eq!(spouse_conditional_mean(8.0, &p(0.5, 1.0)), 8.0);
    }

    #[test]
    fn variance_recursion_examples() {
        assert!((variance_recursion(1.0, &p(0.8, 0.5)) - 1.48).abs() < 1e-12);
        assert_eq!(variance_recursion(0.0, &p(0.3, 0.9)), 1.0);
    }

    #[test]
    fn slope_examples() {
        assert!((theoretical_parent_child_slope(&p(0.8, 0.5)) - 0.6).abs() < 1e-12);
        assert!((theoretical_parent_child_slope(&p(0.7, 1.0)) - 0.7).abs() < 1e-12);
        assert!((theoretical_parent_child_slope(&p(0.5, 0.0)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn slope_strictly_increasing_in_rho() {
        for lambda in [0.1, 0.4, 0.9] {
            let slopes: Vec<f64> = (0..=20)
                .map(|k| theoretical_parent_child_slope(&p(lambda, k as f64 / 20.0)))
                .collect();
            assert!(slopes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn utility_examples() {
        assert_eq!(match_utility(10.0, 12.0, 0.0), 22.0);
        assert_eq!(match_utility(0.0, 0.0, 1.5), 1.5);
        assert_eq!(match_utility(3.0, 7.5, -0.25), match_utility(7.5, 3.0, -0.25));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(1.0, 0.5, 1.0, 10.0).is_err());
        assert!(ModelParams::new(0.5, 1.2, 1.0, 10.0).is_err());
        assert!(ModelParams::new(0.5, 0.5, -1.0, 10.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.5, 1.0, 10.0).is_err());
        assert!(simulate_dynamics(&p(0.5, 0.5), &FeedbackSpec::Constant, f64::INFINITY, 3).is_err());
        assert!(simulate_dynamics(&p(0.5, 0.5), &FeedbackSpec::Constant, 1.0, 0).is_err());
    }

    #[test]
    fn constant_feedback_matches_plain_recursion() {
        let params = p(0.8, 0.5);
        let path = simulate_dynamics(&params, &FeedbackSpec::Constant, 1.0, 30).unwrap();
        let mut v = 1.0;
        for m in &path {
            assert_eq!(m.variance, v);
            assert_eq!(m.rho_used, 0.5);
            assert!((m.slope_to_child - 0.6).abs() < 1e-15);
            v = variance_recursion(v, &params);
        }
    }

    #[test]
    fn feedback_is_clipped() {
        let params = p(0.5, 0.5);
        let lin = FeedbackSpec::LinearClipped {
            intercept: -0.5,
            slope: 0.3,
        };
        assert_eq!(lin.rho(0.0, &params), 0.0);
        assert_eq!(lin.rho(100.0, &params), 1.0);
        let logi = FeedbackSpec::Logistic {
            floor: -0.2,
            ceiling: 1.4,
            midpoint: 5.0,
            steepness: 2.0,
        };
        for s in [0.0, 4.0, 5.0, 6.0, 50.0] {
            let r = logi.rho(s, &params);
            assert!((0.0..=1.0).contains(&r));
        }
        assert!(FeedbackSpec::LinearClipped {
            intercept: 0.0,
            slope: -1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn trend_moves_mean() {
        let sched = Schedule {
            lambdas: vec![0.5; 4],
            mean_trend: 0.5,
        };
        let path = simulate_dynamics_with(&p(0.5, 0.5), &FeedbackSpec::Constant, 1.0, &sched).unwrap();
        let means: Vec<f64> = path.iter().map(|m| m.mean).collect();
        assert_eq!(means, vec![10.0, 10.5, 11.0, 11.5]);
    }
}
