//! Synthetic regional populations whose schooling parameters drift across
//! regions and periods.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::panel::{compute_panel, Panel, PanelRules, PeriodScheme};
use super::types::Period;
use crate::data_io::{Microdata, RegionId, RegionRegistry};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::stream;
use crate::synth::{generate_population, BlockModel, ModelSource, PopulationConfig};

/// Stationary AR(1) deviation of a regional knob from its base value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knob {
    pub base: f64,
    /// Cross-region standard deviation of the deviation.
    pub sd: f64,
    /// Autocorrelation from one period to the next.
    pub persistence: f64,
}

impl Knob {
    pub const fn fixed(base: f64) -> Self {
        Knob {
            base,
            sd: 0.0,
            persistence: 0.0,
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.base.is_finite() && self.sd.is_finite() && self.sd >= 0.0) {
            return Err(Error::param(name, "base must be finite and sd non-negative"));
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return Err(Error::param(name, "persistence must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Regional data-generating process.
///
/// Per region, four AR(1) deviations drive the parents' mean and log
/// standard deviation of latent schooling, their sorting and the
/// transmission coefficient. Sorting and transmission may also load on the
/// log standard deviation, which links inequality to immobility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionalDgp {
    pub first_cohort: i32,
    pub periods: usize,
    pub n_per_cell: usize,
    pub mean: Knob,
    pub log_sd: Knob,
    pub rho: Knob,
    pub lambda: Knob,
    /// Loading of sorting on the log standard deviation deviation.
    pub rho_on_log_sd: f64,
    /// Loading of transmission on the log standard deviation deviation.
    pub lambda_on_log_sd: f64,
    pub sigma_eps2: f64,
}

/// Parameters of one (region, period) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    pub region_id: RegionId,
    pub period: Period,
    pub mu: f64,
    pub parent_sd: f64,
    pub rho: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct RegionalDraw {
    pub truth: Vec<CellTruth>,
    pub microdata: Microdata,
    pub panel: Panel,
}

const RHO_MAX: f64 = 0.98;
const LAMBDA_RANGE: (f64, f64) = (0.02, 0.98);

impl RegionalDgp {
    /// Regions that differ persistently, with precision falling from the
    /// mean to dispersion to mobility to sorting.
    pub fn persistent_regions() -> Self {
        RegionalDgp {
            first_cohort: 1930,
            periods: 8,
            n_per_cell: 400,
            mean: Knob {
                base: 8.0,
                sd: 1.6,
                persistence: 0.8,
            },
            log_sd: Knob {
                base: 4.0f64.ln(),
                sd: 0.3,
                persistence: 0.8,
            },
            rho: Knob {
                base: 0.55,
                sd: 0.035,
                persistence: 0.8,
            },
            lambda: Knob {
                base: 0.55,
                sd: 0.07,
                persistence: 0.8,
            },
            rho_on_log_sd: 0.0,
            lambda_on_log_sd: 0.0,
            sigma_eps2: 3.0,
        }
    }

    /// Large cells where sorting rises with parental inequality, so that
    /// part of the inequality and immobility association runs through
    /// assortative mating.
    pub fn vicious_cycle() -> Self {
        RegionalDgp {
            first_cohort: 1950,
            periods: 4,
            n_per_cell: 2000,
            mean: Knob {
                base: 8.0,
                sd: 1.0,
                persistence: 0.8,
            },
            log_sd: Knob {
                base: 4.0f64.ln(),
                sd: 0.15,
                persistence: 0.8,
            },
            rho: Knob {
                base: 0.55,
                sd: 0.05,
                persistence: 0.8,
            },
            lambda: Knob {
                base: 0.55,
                sd: 0.03,
                persistence: 0.8,
            },
            rho_on_log_sd: 0.8,
            lambda_on_log_sd: 0.0,
            sigma_eps2: 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods < 2 {
            return Err(Error::param("periods", "must be at least 2"));
        }
        if self.n_per_cell < 4 {
            return Err(Error::param("n_per_cell", "must be at least 4"));
        }
        self.mean.validate("mean")?;
        self.log_sd.validate("log_sd")?;
        self.rho.validate("rho")?;
        self.lambda.validate("lambda")?;
        if !(self.sigma_eps2.is_finite() && self.sigma_eps2 >= 0.0) {
            return Err(Error::param("sigma_eps2", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn cohorts(&self) -> (i32, i32) {
        (self.first_cohort, self.first_cohort + self.periods as i32 - 1)
    }

    /// One period per birth cohort.
    pub fn period_scheme(&self) -> PeriodScheme {
        PeriodScheme::Bins {
            origin: self.first_cohort,
            width: 1,
        }
    }

    /// Draw cell parameters for every region of `registry`.
    pub fn draw_truth(&self, registry: &RegionRegistry, seed: u64) -> Result<Vec<CellTruth>> {
        self.validate()?;
        let knobs = [self.mean, self.log_sd, self.rho, self.lambda];
        let mut out = Vec::with_capacity(registry.len() * self.periods);
        for (r, entry) in registry.entries().iter().enumerate() {
            let mut rng = stream(seed, &[u64::MAX - 1, r as u64]);
            let mut z = [0.0f64; 4];
            for t in 0..self.periods {
                for (k, knob) in knobs.iter().enumerate() {
                    let shock: f64 = StandardNormal.sample(&mut rng);
                    let phi = knob.persistence;
                    z[k] = if t == 0 {
                        knob.sd * shock
                    } else {
                        phi * z[k] + (1.0 - phi * phi).sqrt() * knob.sd * shock
                    };
                }
                out.push(CellTruth {
                    region_id: entry.region_id.clone(),
                    period: Period(self.first_cohort + t as i32),
                    mu: self.mean.base + z[0],
                    parent_sd: (self.log_sd.base + z[1]).exp(),
                    rho: (self.rho.base + self.rho_on_log_sd * z[1] + z[2]).clamp(0.0, RHO_MAX),
                    lambda: (self.lambda.base + self.lambda_on_log_sd * z[1] + z[3])
                        .clamp(LAMBDA_RANGE.0, LAMBDA_RANGE.1),
                });
            }
        }
        Ok(out)
    }

    /// Population configuration realizing `truth`.
    pub fn population_config(&self, registry: &RegionRegistry, truth: &[CellTruth], seed: u64) -> Result<PopulationConfig> {
        let mut blocks = HashMap::with_capacity(truth.len());
        for c in truth {
            let params = ModelParams::new(c.lambda, c.rho, self.sigma_eps2, c.mu)?;
            blocks.insert((c.region_id.clone(), c.period.0), BlockModel::new(params, c.parent_sd * c.parent_sd));
        }
        let regions = registry.entries().iter().map(|e| e.region_id.clone()).collect();
        Ok(PopulationConfig::new(
            regions,
            self.cohorts(),
            self.n_per_cell,
            ModelSource::ByBlock(blocks),
            seed,
        ))
    }

    /// Draw parameters, generate the population and compile its panel.
    pub fn generate(&self, registry: &RegionRegistry, rules: &PanelRules, seed: u64) -> Result<RegionalDraw> {
        let truth = self.draw_truth(registry, seed)?;
        let config = self.population_config(registry, &truth, seed)?;
        let microdata = generate_population(&config)?.to_microdata();
        let panel = compute_panel(&microdata, registry, &self.period_scheme(), rules)?;
        Ok(RegionalDraw {
            truth,
            microdata,
            panel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regional::StatKind;

    fn small() -> RegionalDgp {
        RegionalDgp {
            n_per_cell: 120,
            periods: 3,
            ..RegionalDgp::persistent_regions()
        }
    }

    #[test]
    fn truth_is_deterministic_and_bounded() {
        let reg = RegionRegistry::synthetic(20);
        let a = small().draw_truth(&reg, 5).unwrap();
        assert_eq!(a, small().draw_truth(&reg, 5).unwrap());
        assert_eq!(a.len(), 60);
        assert!(a.iter().all(|c| (0.0..=RHO_MAX).contains(&c.rho) && c.parent_sd > 0.0));
    }

    #[test]
    fn fixed_knobs_give_identical_cells() {
        let dgp = RegionalDgp {
            mean: Knob::fixed(9.0),
            log_sd: Knob::fixed(1.0),
            rho: Knob::fixed(0.5),
            lambda: Knob::fixed(0.6),
            ..small()
        };
        let truth = dgp.draw_truth(&RegionRegistry::synthetic(3), 1).unwrap();
        assert!(truth.iter().all(|c| c.mu == 9.0 && c.rho == 0.5 && c.lambda == 0.6));
    }

    #[test]
    fn panel_covers_every_cell() {
        let reg = RegionRegistry::synthetic(6);
        let draw = small().generate(&reg, &PanelRules::default(), 2).unwrap();
        assert_eq!(draw.microdata.len(), 6 * 3 * 120);
        let igc = draw.panel.stats.iter().filter(|s| s.stat_kind == StatKind::Igc).count();
        assert_eq!(igc, 18);
        assert!(draw.panel.stats.iter().all(|s| s.halves().is_some()));
    }
}
