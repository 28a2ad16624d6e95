//! Schooling completion and leaving the parental home.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::EDUCATION_GRID;
use crate::error::{Error, Result};

/// Age at which each grid level is normally completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionProfile {
    /// Completion ages aligned with `EDUCATION_GRID`.
    pub ages: [u32; 7],
}

impl Default for CompletionProfile {
    fn default() -> Self {
        CompletionProfile {
            ages: [7, 9, 12, 15, 18, 22, 24],
        }
    }
}

/// Earliest age recorded as completion of schooling.
pub const MIN_COMPLETION_AGE: u32 = 14;

impl CompletionProfile {
    pub fn validate(&self) -> Result<()> {
        if self.ages.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param(
                "completion_profile",
                "ages must be non-decreasing in schooling",
            ));
        }
        Ok(())
    }

    /// Standard completion age of `level` (of the highest grid level not
    /// above it, for off-grid input).
    pub fn standard_age(&self, level: u8) -> u32 {
        let pos = EDUCATION_GRID.iter().rposition(|&g| g <= level).unwrap_or(0);
        self.ages[pos]
    }

    /// Completion age for someone finishing at `level` after `delay`
    /// extra years.
    pub fn completion_age(&self, level: u8, delay: u32) -> u32 {
        (self.standard_age(level) + delay).max(MIN_COMPLETION_AGE)
    }

    /// Oldest standard completion age.
    pub fn max_age(&self) -> u32 {
        self.ages[6]
    }

    /// Schooling attained at `age` by someone who ends at `edu_final` at
    /// `completion_age`.
    ///
    /// The standard trajectory is shifted by the person's own delay, so the
    /// result is non-decreasing in age and equals `edu_final` from
    /// `completion_age` on.
    pub fn attained_at(&self, edu_final: u8, completion_age: u32, age: u32) -> u8 {
        if age >= completion_age {
            return edu_final;
        }
        let delay = completion_age as i64 - self.standard_age(edu_final) as i64;
        EDUCATION_GRID
            .iter()
            .zip(self.ages)
            .filter(|&(&g, a)| g <= edu_final && a as i64 + delay <= age as i64)
            .map(|(&g, _)| g)
            .last()
            .unwrap_or(EDUCATION_GRID[0])
    }
}

/// Random extra years before completing schooling beyond secondary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionDelay {
    /// Probability that a person with post-secondary schooling is delayed.
    pub probability: f64,
    /// Delays are uniform on `1..=max_years`.
    pub max_years: u32,
}

impl CompletionDelay {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::param("completion_delay.probability", "must lie in [0, 1]"));
        }
        if self.probability > 0.0 && self.max_years == 0 {
            return Err(Error::param("completion_delay.max_years", "must be positive"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, edu_final: u8, rng: &mut R) -> u32 {
        if edu_final <= 11 || self.probability == 0.0 {
            return 0;
        }
        if rng.random::<f64>() < self.probability {
            rng.random_range(1..=self.max_years)
        } else {
            0
        }
    }
}

/// Leave-home age recorded for people who never leave.
pub const NEVER_LEAVES: u32 = 99;
/// Earliest possible leave-home age.
pub const MIN_LEAVE_AGE: u32 = 15;

/// Discrete-time leave-home process.
///
/// At each age from 15 the baseline hazard `h` is turned into
/// `1 - (1 - h)^m` with `m = exp(own_gradient * (edu - reference_years) +
/// parent_gradient * (father - reference_years))`. Surviving past the table
/// means never leaving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaveHomeModel {
    /// Baseline hazards for ages 15, 16, ...
    #[serde(default)]
    pub hazard: Vec<f64>,
    #[serde(default)]
    pub own_gradient: f64,
    #[serde(default)]
    pub parent_gradient: f64,
    #[serde(default = "default_reference")]
    pub reference_years: f64,
}

fn default_reference() -> f64 {
    8.0
}

impl Default for LeaveHomeModel {
    /// Nobody leaves.
    fn default() -> Self {
        LeaveHomeModel {
            hazard: Vec::new(),
            own_gradient: 0.0,
            parent_gradient: 0.0,
            reference_years: default_reference(),
        }
    }
}

impl LeaveHomeModel {
    /// Late-leaving profile with an education gradient: about 55% of a
    /// typical cohort still live with their parents at 27, and the less
    /// educated leave first.
    pub fn late_leaving() -> Self {
        let mut hazard = Vec::new();
        for age in MIN_LEAVE_AGE..=45 {
            hazard.push(match age {
                15..=17 => 0.004,
                18..=20 => 0.02,
                21..=23 => 0.045,
                24..=26 => 0.075,
                27..=29 => 0.10,
                30..=34 => 0.13,
                _ => 0.15,
            });
        }
        LeaveHomeModel {
            hazard,
            own_gradient: -0.07,
            parent_gradient: 0.0,
            reference_years: default_reference(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hazard.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(Error::param("leave_home.hazard", "probabilities must lie in [0, 1]"));
        }
        if ![self.own_gradient, self.parent_gradient, self.reference_years]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("leave_home"));
        }
        Ok(())
    }

    fn multiplier(&self, edu: u8, father: Option<u8>) -> f64 {
        let own = self.own_gradient * (edu as f64 - self.reference_years);
        let parent = father
            .map(|f| self.parent_gradient * (f as f64 - self.reference_years))
            .unwrap_or(0.0);
        (own + parent).exp()
    }

    fn hazard_at(&self, i: usize, m: f64) -> f64 {
        1.0 - (1.0 - self.hazard[i]).powf(m)
    }

    pub fn sample<R: Rng + ?Sized>(&self, edu: u8, father: Option<u8>, rng: &mut R) -> u32 {
        if self.hazard.is_empty() {
            return NEVER_LEAVES;
        }
        let m = self.multiplier(edu, father);
        for i in 0..self.hazard.len() {
            if rng.random::<f64>() < self.hazard_at(i, m) {
                return MIN_LEAVE_AGE + i as u32;
            }
        }
        NEVER_LEAVES
    }

    /// Probability of still living at home at `age`, i.e. of a leave-home
    /// age above `age`.
    pub fn survival(&self, edu: u8, father: Option<u8>, age: u32) -> f64 {
        let m = self.multiplier(edu, father);
        (0..self.hazard.len())
            .take_while(|&i| MIN_LEAVE_AGE + i as u32 <= age)
            .map(|i| 1.0 - self.hazard_at(i, m))
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn attained_follows_profile() {
        let p = CompletionProfile::default();
        assert_eq!(p.attained_at(18, 24, 16), 8);
        assert_eq!(p.attained_at(18, 24, 20), 11);
        assert_eq!(p.attained_at(18, 24, 23), 15);
        assert_eq!(p.attained_at(18, 24, 24), 18);
        // two years late
        assert_eq!(p.attained_at(15, 24, 22), 11);
        assert_eq!(p.attained_at(15, 24, 24), 15);
        // low levels reached long before 16
        assert_eq!(p.attained_at(5, p.completion_age(5, 0), 16), 5);
    }

    #[test]
    fn attained_is_monotone_and_capped() {
        let p = CompletionProfile::default();
        for &g in &EDUCATION_GRID {
            for delay in 0..5 {
                let c = p.completion_age(g, delay);
                assert!(c >= MIN_COMPLETION_AGE);
                let path: Vec<u8> = (10..50).map(|a| p.attained_at(g, c, a)).collect();
                assert!(path.windows(2).all(|w| w[0] <= w[1]));
                assert!(path.iter().all(|&v| v <= g));
            }
        }
    }

    #[test]
    fn never_leaving_by_default() {
        let m = LeaveHomeModel::default();
        assert_eq!(m.sample(11, Some(8), &mut stream(1, &[])), NEVER_LEAVES);
        assert_eq!(m.survival(11, Some(8), 40), 1.0);
    }

    #[test]
    fn less_educated_leave_earlier() {
        let m = LeaveHomeModel::late_leaving();
        assert!(m.survival(5, None, 27) < m.survival(15, None, 27));
        let at_ref = m.survival(8, None, 27);
        assert!((0.45..0.65).contains(&at_ref), "{at_ref}");
    }

    #[test]
    fn sampled_ages_respect_floor() {
        let m = LeaveHomeModel::late_leaving();
        let mut rng = stream(2, &[]);
        for _ in 0..1000 {
            let a = m.sample(8, Some(5), &mut rng);
            assert!(a >= MIN_LEAVE_AGE);
        }
    }
}
