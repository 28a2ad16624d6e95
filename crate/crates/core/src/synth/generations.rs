//! Monte Carlo counterpart of the closed-form dynamics.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matching::match_latents;
use super::population::child_latent;
use crate::error::{Error, Result};
use crate::estimators::{igc, igr};
use crate::model::{FeedbackSpec, GenerationMoments, ModelParams, Schedule};
use crate::rng::stream;

/// Moments of one simulated generation, with realized sorting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedGeneration {
    pub moments: GenerationMoments,
    /// Spousal correlation of latents actually achieved.
    pub realized_rho: f64,
}

/// Simulate `schedule.lambdas.len()` generations of `n_couples` couples.
///
/// Each couple has a son and a daughter; the sons and daughters form the
/// next generation's marriage market. Sorting in each generation comes from
/// `feedback` applied to the sample variance of that generation.
pub fn simulate_generations(
    params: &ModelParams,
    feedback: &FeedbackSpec,
    initial_variance: f64,
    schedule: &Schedule,
    n_couples: usize,
    seed: u64,
) -> Result<Vec<SimulatedGeneration>> {
    params.validate()?;
    feedback.validate()?;
    if n_couples < 3 {
        return Err(Error::param("n_couples", "must be at least 3"));
    }
    if !(initial_variance.is_finite() && initial_variance >= 0.0) {
        return Err(Error::param("initial_variance", "must be finite and non-negative"));
    }
    let start = Normal::new(params.mu, initial_variance.sqrt()).map_err(|e| Error::param("initial_variance", e.to_string()))?;
    let mut rng = stream(seed, &[u64::MAX]);
    let mut men: Vec<f64> = (0..n_couples).map(|_| start.sample(&mut rng)).collect();
    let mut women: Vec<f64> = (0..n_couples).map(|_| start.sample(&mut rng)).collect();

    let mut out = Vec::with_capacity(schedule.lambdas.len());
    for (t, &lambda) in schedule.lambdas.iter().enumerate() {
        let mut rng = stream(seed, &[t as u64]);
        let n = 2 * n_couples;
        let mean = men.iter().chain(&women).sum::<f64>() / n as f64;
        let variance = men.iter().chain(&women).map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;

        let mut step = *params;
        step.lambda = lambda;
        step.mu = params.mu + schedule.mean_trend * t as f64;
        step.validate()?;
        step.rho = feedback.rho(variance, &step);

        let wife = match_latents(&men, &women, step.rho, &mut rng)?;
        let wives: Vec<f64> = wife.iter().map(|&j| women[j]).collect();
        let realized_rho = igc(&wives, &men)?.value;

        let shock = Normal::new(0.0, step.sigma_eps2.sqrt()).map_err(|e| Error::param("sigma_eps2", e.to_string()))?;
        // the intercept follows the intended mean path, not the sample mean
        let mut child = |f: f64, m: f64| child_latent(f, m, &step, shock.sample(&mut rng)) + schedule.mean_trend;
        let sons: Vec<f64> = men.iter().zip(&wives).map(|(&f, &m)| child(f, m)).collect();
        let daughters: Vec<f64> = men.iter().zip(&wives).map(|(&f, &m)| child(f, m)).collect();

        let kids: Vec<f64> = sons.iter().chain(&daughters).copied().collect();
        let dads: Vec<f64> = men.iter().chain(&men).copied().collect();
        let slope = igr(&kids, &dads)?.value;

        out.push(SimulatedGeneration {
            moments: GenerationMoments {
                t,
                mean,
                variance,
                rho_used: step.rho,
                lambda,
                slope_to_child: slope,
            },
            realized_rho,
        });
        men = sons;
        women = daughters;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simulate_dynamics;

    #[test]
    fn tracks_closed_form() {
        let params = ModelParams::new(0.8, 0.5, 1.0, 10.0).unwrap();
        let fb = FeedbackSpec::Constant;
        let closed = simulate_dynamics(&params, &fb, 1.0, 6).unwrap();
        let mc = simulate_generations(&params, &fb, 1.0, &Schedule::linear(0.8, 0.8, 6), 40_000, 3).unwrap();
        for (c, m) in closed.iter().zip(&mc) {
            assert!((c.variance - m.moments.variance).abs() < 0.05 * c.variance.max(1.0));
            assert!((c.slope_to_child - m.moments.slope_to_child).abs() < 0.02);
            assert!((m.realized_rho - 0.5).abs() < 0.02);
            assert!((m.moments.mean - 10.0).abs() < 0.05);
        }
    }
}
