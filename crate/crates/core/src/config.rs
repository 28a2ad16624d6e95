//! Experiment configuration files (TOML).
//!
//! Every table rejects unknown keys, and [`ExperimentConfig::validate`]
//! checks cross-field constraints before any work starts.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coresidence::{ShareSource, YearWindow};
use crate::data_io::RegionRegistry;
use crate::error::{Error, Result};
use crate::estimators::ParentVariable;
use crate::model::{simulate_dynamics_with, FeedbackSpec, GenerationMoments, ModelParams, Schedule};
use crate::regional::{PanelRules, PeriodScheme, RegionalDgp, RegressionSpec, StatKind};
use crate::synth::{
    BlockModel, CompletionDelay, CompletionProfile, LeaveHomeModel, ModelSource, ObservationRule, PopulationConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Where outputs go unless `--out` is given; relative to the config file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub population: Option<PopulationSection>,
    #[serde(default)]
    pub regional_dgp: Option<RegionalDgpSection>,
    #[serde(default)]
    pub observation: Vec<ObservationSection>,
    #[serde(default)]
    pub panel: Option<PanelSection>,
    #[serde(default)]
    pub regressions: Vec<RegressionSpec>,
    /// Canned regression sets run by `regress` after `regressions`.
    #[serde(default)]
    pub batteries: Vec<BatteryKind>,
    #[serde(default)]
    pub bias_lab: Option<BiasLabSection>,
    #[serde(default)]
    pub report: ReportSection,
}

/// Closed-form dynamics and the parameters shared by generated blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    pub rho: f64,
    pub sigma_eps2: f64,
    pub mu: f64,
    #[serde(default = "constant_feedback")]
    pub feedback: FeedbackSpec,
    #[serde(default = "one")]
    pub generations: usize,
    /// Starting variance; defaults to the steady state at `lambda`, `rho`.
    #[serde(default)]
    pub initial_variance: Option<f64>,
    /// Transmission in the last generation; `lambda` is the first.
    #[serde(default)]
    pub lambda_end: Option<f64>,
    #[serde(default)]
    pub mean_trend: f64,
}

fn constant_feedback() -> FeedbackSpec {
    FeedbackSpec::Constant
}
fn one() -> usize {
    1
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.lambda, self.rho, self.sigma_eps2, self.mu)
    }

    pub fn schedule(&self) -> Schedule {
        let mut s = Schedule::linear(self.lambda, self.lambda_end.unwrap_or(self.lambda), self.generations);
        s.mean_trend = self.mean_trend;
        s
    }

    pub fn initial_variance(&self) -> Result<f64> {
        match self.initial_variance {
            Some(v) => Ok(v),
            None => self
                .params()?
                .steady_state_variance()
                .ok_or_else(|| Error::Config("model has no steady state; set initial_variance".into())),
        }
    }

    fn validate(&self) -> Result<()> {
        self.params()?;
        self.feedback.validate()?;
        if self.generations == 0 {
            return Err(Error::Config("model.generations must be at least 1".into()));
        }
        if let Some(l) = self.lambda_end {
            ModelParams::new(l, self.rho, self.sigma_eps2, self.mu)?;
        }
        let v = self.initial_variance()?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config("model.initial_variance must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Which regions exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegistrySource {
    /// The bundled 107-region scheme.
    Spanish,
    /// `n` anonymous regions `r000`, `r001`, ...
    Synthetic(usize),
    /// A `region_id,name,kind` CSV file.
    File(PathBuf),
}

impl Default for RegistrySource {
    fn default() -> Self {
        RegistrySource::Synthetic(1)
    }
}

impl RegistrySource {
    pub fn load(&self, base: &Path) -> Result<RegionRegistry> {
        match self {
            RegistrySource::Spanish => Ok(RegionRegistry::spanish_default()),
            RegistrySource::Synthetic(n) => Ok(RegionRegistry::synthetic(*n)),
            RegistrySource::File(p) => RegionRegistry::load(base.join(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum LeaveHomeSection {
    /// Everybody lives with their parents.
    Never,
    /// The bundled late-leaving hazard table.
    Late,
    Custom(LeaveHomeModel),
}

impl LeaveHomeSection {
    pub fn model(&self) -> LeaveHomeModel {
        match self {
            LeaveHomeSection::Never => LeaveHomeModel::default(),
            LeaveHomeSection::Late => LeaveHomeModel::late_leaving(),
            LeaveHomeSection::Custom(m) => m.clone(),
        }
    }
}

/// A population whose blocks all share the model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    #[serde(default)]
    pub registry: RegistrySource,
    /// Inclusive range of birth cohorts.
    pub cohorts: [i32; 2],
    pub n_per_region_cohort: usize,
    /// Parents' variance; defaults to the model's starting variance.
    #[serde(default)]
    pub parent_variance: Option<f64>,
    #[serde(default)]
    pub child_rho: Option<f64>,
    /// Let cohorts move along the simulated generation path: the parents of
    /// each cohort get the variance, sorting and transmission interpolated
    /// between the first and last generation.
    #[serde(default)]
    pub drift: bool,
    #[serde(default)]
    pub leave_home: Option<LeaveHomeSection>,
    #[serde(default)]
    pub completion_profile: Option<CompletionProfile>,
    #[serde(default)]
    pub completion_delay: Option<CompletionDelay>,
}

/// A population whose block parameters are drawn region by region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionalDgpSection {
    #[serde(default)]
    pub registry: RegistrySource,
    /// Named fixture used as the base: `persistent_regions` or
    /// `vicious_cycle`.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub n_per_cell: Option<usize>,
    #[serde(default)]
    pub periods: Option<usize>,
    #[serde(default)]
    pub rho_on_log_sd: Option<f64>,
    /// Full specification; overrides `preset`.
    #[serde(default)]
    pub dgp: Option<RegionalDgp>,
}

impl RegionalDgpSection {
    pub fn dgp(&self) -> Result<RegionalDgp> {
        let mut d = match (&self.dgp, self.preset.as_deref()) {
            (Some(d), _) => d.clone(),
            (None, Some("persistent_regions") | None) => RegionalDgp::persistent_regions(),
            (None, Some("vicious_cycle")) => RegionalDgp::vicious_cycle(),
            (None, Some(other)) => return Err(Error::Config(format!("unknown regional_dgp.preset {other:?}"))),
        };
        if let Some(n) = self.n_per_cell {
            d.n_per_cell = n;
        }
        if let Some(p) = self.periods {
            d.periods = p;
        }
        if let Some(b) = self.rho_on_log_sd {
            d.rho_on_log_sd = b;
        }
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    pub measure_age: u32,
    #[serde(default)]
    pub coresident_only: bool,
    /// Also tabulate men and women separately.
    #[serde(default)]
    pub by_sex: bool,
}

impl ObservationSection {
    pub fn rule(&self) -> ObservationRule {
        ObservationRule {
            measure_age: self.measure_age,
            coresident_only: self.coresident_only,
            survey_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSection {
    #[serde(default)]
    pub registry: Option<RegistrySource>,
    #[serde(default)]
    pub scheme: Option<PeriodScheme>,
    /// Age at which schooling is read for the panel.
    #[serde(default = "default_panel_age")]
    pub measure_age: u32,
    #[serde(default)]
    pub stats: Option<Vec<StatKind>>,
    #[serde(default)]
    pub min_cell: Option<usize>,
    #[serde(default)]
    pub min_half: Option<usize>,
    #[serde(default)]
    pub parent: ParentVariable,
    /// Defaults to the top-level seed.
    #[serde(default)]
    pub split_seed: Option<u64>,
}

fn default_panel_age() -> u32 {
    35
}

impl PanelSection {
    pub fn rules(&self, seed: u64) -> PanelRules {
        let d = PanelRules::default();
        PanelRules {
            stats: self.stats.clone().unwrap_or(d.stats),
            min_cell: self.min_cell.unwrap_or(d.min_cell),
            min_half: self.min_half.unwrap_or(d.min_half),
            parent: self.parent,
            split_seed: self.split_seed.unwrap_or(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasLabSection {
    pub ages: Vec<u32>,
    pub benchmark_age: u32,
    pub windows: Vec<YearWindow>,
    #[serde(default)]
    pub shares: ShareSource,
    #[serde(default)]
    pub parent: ParentVariable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryKind {
    /// Each statistic on its own lag, OLS and split IV.
    Persistence,
    Gatsby,
    Sorting,
    /// Includes the share of the SD coefficient mediated by sorting.
    Mediation,
}

/// Which acceptance checks `report` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecksMode {
    #[default]
    Full,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    #[serde(default)]
    pub checks: ChecksMode,
    #[serde(default)]
    pub targets: Vec<Target>,
}

/// A bound on one of the report's headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub metric: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.model {
            m.validate()?;
        }
        if self.population.is_some() && self.regional_dgp.is_some() {
            return Err(Error::Config("population and regional_dgp are mutually exclusive".into()));
        }
        if let Some(p) = &self.population {
            if self.model.is_none() {
                return Err(Error::Config("population requires a model section".into()));
            }
            if p.cohorts[0] > p.cohorts[1] {
                return Err(Error::Config("population.cohorts must be [first, last]".into()));
            }
            if p.n_per_region_cohort == 0 {
                return Err(Error::Config("population.n_per_region_cohort must be positive".into()));
            }
        }
        if let Some(d) = &self.regional_dgp {
            d.dgp()?;
        }
        for o in &self.observation {
            o.rule().validate()?;
        }
        if let Some(p) = &self.panel {
            if let Some(s) = &p.scheme {
                s.validate()?;
            }
            ObservationRule::at_age(p.measure_age).validate()?;
        }
        for r in &self.regressions {
            r.validate()?;
        }
        if let Some(b) = &self.bias_lab {
            if b.ages.is_empty() || b.windows.is_empty() {
                return Err(Error::Config("bias_lab needs ages and windows".into()));
            }
        }
        for t in &self.report.targets {
            if t.min.is_none() && t.max.is_none() {
                return Err(Error::Config(format!("target {:?} has neither min nor max", t.metric)));
            }
        }
        Ok(())
    }

    /// Population configuration for `simulate`, if the config describes one.
    /// Regional populations come from [`RegionalDgp::generate`] instead.
    pub fn population_config(&self, base: &Path) -> Result<Option<PopulationConfig>> {
        let (Some(p), Some(m)) = (&self.population, &self.model) else {
            return Ok(None);
        };
        let params = m.params()?;
        let mut block = BlockModel::new(params, p.parent_variance.map_or_else(|| m.initial_variance(), Ok)?);
        block.child_rho = p.child_rho;
        let registry = p.registry.load(base)?;
        let regions: Vec<_> = registry.entries().iter().map(|e| e.region_id.clone()).collect();
        let source = if p.drift {
            let path = simulate_dynamics_with(&params, &m.feedback, m.initial_variance()?, &m.schedule())?;
            let mut blocks = HashMap::new();
            for c in p.cohorts[0]..=p.cohorts[1] {
                let b = drifted_block(&path, &block, (c - p.cohorts[0]) as f64 / (p.cohorts[1] - p.cohorts[0]).max(1) as f64)?;
                for r in &regions {
                    blocks.insert((r.clone(), c), b.clone());
                }
            }
            ModelSource::ByBlock(blocks)
        } else {
            ModelSource::Shared(block)
        };
        let mut cfg = PopulationConfig::new(
            regions,
            (p.cohorts[0], p.cohorts[1]),
            p.n_per_region_cohort,
            source,
            self.seed,
        );
        if let Some(l) = &p.leave_home {
            cfg.leave_home = l.model();
        }
        if let Some(c) = &p.completion_profile {
            cfg.completion_profile = c.clone();
        }
        if let Some(d) = &p.completion_delay {
            cfg.completion_delay = *d;
        }
        cfg.validate()?;
        Ok(Some(cfg))
    }

    /// Completion schedule used when reading generated microdata.
    pub fn completion_profile(&self) -> CompletionProfile {
        self.population
            .as_ref()
            .and_then(|p| p.completion_profile.clone())
            .unwrap_or_default()
    }
}

/// Block parameters at fraction `x` of the way along `path`.
fn drifted_block(path: &[GenerationMoments], base: &BlockModel, x: f64) -> Result<BlockModel> {
    let pos = x * (path.len() - 1) as f64;
    let (i, w) = (pos.floor() as usize, pos.fract());
    let j = (i + 1).min(path.len() - 1);
    let lerp = |f: fn(&GenerationMoments) -> f64| f(&path[i]) * (1.0 - w) + f(&path[j]) * w;
    let params = ModelParams::new(lerp(|g| g.lambda), lerp(|g| g.rho_used), base.params.sigma_eps2, lerp(|g| g.mean))?;
    let mut b = BlockModel::new(params, lerp(|g| g.variance));
    b.child_rho = base.child_rho;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
[model]
lambda = 0.8
rho = 0.5
sigma_eps2 = 1.0
mu = 8.0
generations = 3
"#;

    #[test]
    fn parses_minimal() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        let m = c.model.unwrap();
        assert!((m.initial_variance().unwrap() - 25.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{MINIMAL}colour = 3\n");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = MINIMAL.replace("mu = 8.0", "mu = 8.0\nmuu = 1.0");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("muu"), "{err}");
    }

    #[test]
    fn rejects_invalid_values() {
        let bad = MINIMAL.replace("rho = 0.5", "rho = 1.5");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().is_validation());
        let bad = format!("{MINIMAL}[population]\ncohorts = [1970, 1960]\nn_per_region_cohort = 10\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn registry_sources() {
        let text = format!("{MINIMAL}[population]\nregistry = {{ synthetic = 3 }}\ncohorts = [1960, 1961]\nn_per_region_cohort = 10\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let pc = c.population_config(Path::new(".")).unwrap().unwrap();
        assert_eq!(pc.regions.len(), 3);
        let text = text.replace("{ synthetic = 3 }", "\"spanish\"");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.population_config(Path::new(".")).unwrap().unwrap().regions.len(), 107);
    }

    #[test]
    fn dgp_presets() {
        let c = ExperimentConfig::from_toml("[regional_dgp]\npreset = \"vicious_cycle\"\nn_per_cell = 100\n").unwrap();
        assert_eq!(c.regional_dgp.unwrap().dgp().unwrap().n_per_cell, 100);
        assert!(ExperimentConfig::from_toml("[regional_dgp]\npreset = \"nope\"\n").is_err());
    }
}
