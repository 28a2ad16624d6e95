//! Block-wise generation of synthetic people.
//!
//! A block is one (region, birth cohort). Each block draws a parent
//! generation, matches it into couples, gives every couple one child, and
//! then matches the children among themselves to create spouse links.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lifecycle::{CompletionDelay, CompletionProfile, LeaveHomeModel};
use super::matching::match_latents;
use crate::data_io::{discretize_education, MicroRecord, Microdata, RegionId, Sex};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{stream, StreamRng};

/// One synthetic person.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub region_id: RegionId,
    pub cohort: i32,
    pub sex: Sex,
    pub edu_latent: f64,
    /// Final schooling on the grid.
    pub edu_final: u8,
    pub father_edu: Option<u8>,
    pub mother_edu: Option<u8>,
    pub father_latent: Option<f64>,
    pub mother_latent: Option<f64>,
    pub spouse_id: Option<u64>,
    pub leave_home_age: u32,
    pub edu_completion_age: u32,
}

impl Individual {
    /// Microdata row reporting final schooling.
    pub fn to_record(&self) -> MicroRecord {
        MicroRecord {
            id: self.id,
            region_id: self.region_id.clone(),
            cohort: self.cohort,
            sex: self.sex,
            edu_years: self.edu_final,
            father_edu_years: self.father_edu,
            mother_edu_years: self.mother_edu,
            spouse_id: self.spouse_id,
            leave_home_age: self.leave_home_age,
            edu_completion_age: self.edu_completion_age,
        }
    }
}

/// Pair men and women from `singles` so spouses' latents correlate at
/// `rho_target`. Returns `(husband id, wife id)` pairs ordered by husband.
pub fn match_couples(singles: &[Individual], rho_target: f64, seed: u64) -> Result<Vec<(u64, u64)>> {
    let (men, women): (Vec<&Individual>, Vec<&Individual>) =
        singles.iter().partition(|p| p.sex == Sex::Male);
    let xs: Vec<f64> = men.iter().map(|p| p.edu_latent).collect();
    let ys: Vec<f64> = women.iter().map(|p| p.edu_latent).collect();
    let wife = match_latents(&xs, &ys, rho_target, &mut stream(seed, &[]))?;
    Ok(men
        .iter()
        .zip(wife)
        .map(|(m, j)| (m.id, women[j].id))
        .collect())
}

/// Set symmetric spouse links for matched pairs.
pub fn link_spouses(people: &mut [Individual], couples: &[(u64, u64)]) {
    let index: HashMap<u64, usize> = people.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
    for &(a, b) in couples {
        if let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) {
            people[i].spouse_id = Some(b);
            people[j].spouse_id = Some(a);
        }
    }
}

/// Child latent schooling: `lambda * midpoint + (1 - lambda) * mu + shock`.
///
/// The intercept keeps the mean at `mu` across generations.
pub fn child_latent(father: f64, mother: f64, params: &ModelParams, shock: f64) -> f64 {
    params.lambda * 0.5 * (father + mother) + (1.0 - params.lambda) * params.mu + shock
}

/// Where newly produced children belong.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFrame {
    pub region_id: RegionId,
    pub cohort: i32,
    /// First id; children are numbered consecutively from here.
    pub id_base: u64,
}

/// One child per `(father latent, mother latent)` couple, with normal
/// shocks. Sexes are balanced (the odd child out is female) and randomly
/// assigned; schooling is complete at the profile's standard age and
/// nobody has left home yet.
pub fn produce_children<R: Rng + ?Sized>(
    couples: &[(f64, f64)],
    params: &ModelParams,
    frame: &BlockFrame,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    params.validate()?;
    let shock = Normal::new(0.0, params.sigma_eps2.sqrt()).map_err(|e| Error::param("sigma_eps2", e.to_string()))?;
    let mut sexes: Vec<Sex> = (0..couples.len())
        .map(|i| if i < couples.len() / 2 { Sex::Male } else { Sex::Female })
        .collect();
    sexes.shuffle(rng);
    let profile = CompletionProfile::default();
    Ok(couples
        .iter()
        .zip(sexes)
        .enumerate()
        .map(|(i, (&(f, m), sex))| {
            let latent = child_latent(f, m, params, shock.sample(rng));
            let edu_final = discretize_education(latent);
            Individual {
                id: frame.id_base + i as u64,
                region_id: frame.region_id.clone(),
                cohort: frame.cohort,
                sex,
                edu_latent: latent,
                edu_final,
                father_edu: Some(discretize_education(f)),
                mother_edu: Some(discretize_education(m)),
                father_latent: Some(f),
                mother_latent: Some(m),
                spouse_id: None,
                leave_home_age: super::lifecycle::NEVER_LEAVES,
                edu_completion_age: profile.completion_age(edu_final, 0),
            }
        })
        .collect())
}

/// Parameters of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockModel {
    /// `mu` is the parents' mean, `rho` their sorting.
    pub params: ModelParams,
    /// Variance of parents' latent schooling.
    pub parent_variance: f64,
    /// Sorting among the children; defaults to `params.rho`.
    #[serde(default)]
    pub child_rho: Option<f64>,
}

impl BlockModel {
    pub fn new(params: ModelParams, parent_variance: f64) -> Self {
        BlockModel {
            params,
            parent_variance,
            child_rho: None,
        }
    }

    /// Parents at the model's steady-state variance.
    pub fn steady_state(params: ModelParams) -> Result<Self> {
        let v = params
            .steady_state_variance()
            .ok_or_else(|| Error::param("params", "no steady state"))?;
        Ok(Self::new(params, v))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.parent_variance.is_finite() {
            return Err(Error::NonFinite("parent_variance"));
        }
        if self.parent_variance < 0.0 {
            return Err(Error::param("parent_variance", "must be non-negative"));
        }
        if let Some(r) = self.child_rho {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::param("child_rho", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Block parameters, shared or varying by cohort or by block.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Shared(BlockModel),
    ByCohort(BTreeMap<i32, BlockModel>),
    ByBlock(HashMap<(RegionId, i32), BlockModel>),
}

impl ModelSource {
    pub fn get(&self, region: &RegionId, cohort: i32) -> Result<&BlockModel> {
        let found = match self {
            ModelSource::Shared(m) => Some(m),
            ModelSource::ByCohort(map) => map.get(&cohort),
            ModelSource::ByBlock(map) => map.get(&(region.clone(), cohort)),
        };
        found.ok_or_else(|| Error::param("model", format!("no parameters for ({region}, {cohort})")))
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelSource::Shared(m) => m.validate(),
            ModelSource::ByCohort(map) => map.values().try_for_each(BlockModel::validate),
            ModelSource::ByBlock(map) => map.values().try_for_each(BlockModel::validate),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    pub n_per_region_cohort: usize,
    pub regions: Vec<RegionId>,
    /// Inclusive range of birth years.
    pub cohorts: (i32, i32),
    pub model: ModelSource,
    pub leave_home: LeaveHomeModel,
    pub completion_profile: CompletionProfile,
    pub completion_delay: CompletionDelay,
    pub seed: u64,
}

const MAX_BLOCK_SIZE: usize = 1 << 24;

impl PopulationConfig {
    pub fn new(regions: Vec<RegionId>, cohorts: (i32, i32), n: usize, model: ModelSource, seed: u64) -> Self {
        PopulationConfig {
            n_per_region_cohort: n,
            regions,
            cohorts,
            model,
            leave_home: LeaveHomeModel::default(),
            completion_profile: CompletionProfile::default(),
            completion_delay: CompletionDelay::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_region_cohort == 0 {
            return Err(Error::param("n_per_region_cohort", "must be at least 1"));
        }
        if self.n_per_region_cohort >= MAX_BLOCK_SIZE {
            return Err(Error::param("n_per_region_cohort", "must be below 2^24"));
        }
        if self.regions.is_empty() {
            return Err(Error::param("regions", "must not be empty"));
        }
        if self.cohorts.0 > self.cohorts.1 {
            return Err(Error::param("cohorts", "first cohort after last"));
        }
        self.model.validate()?;
        self.leave_home.validate()?;
        self.completion_profile.validate()?;
        self.completion_delay.validate()
    }

    pub fn cohort_list(&self) -> Vec<i32> {
        (self.cohorts.0..=self.cohorts.1).collect()
    }
}

/// A generated population together with the completion schedule used to
/// build it.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub completion_profile: CompletionProfile,
}

impl Population {
    /// Final-schooling microdata for everyone.
    pub fn to_microdata(&self) -> Microdata {
        Microdata::new(self.individuals.iter().map(Individual::to_record).collect())
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }
}

fn generate_block(config: &PopulationConfig, region_idx: usize, cohort: i32, block_idx: usize) -> Result<Vec<Individual>> {
    let region = &config.regions[region_idx];
    let model = config.model.get(region, cohort)?;
    let params = &model.params;
    let n = config.n_per_region_cohort;
    let mut rng: StreamRng = stream(config.seed, &[region_idx as u64, cohort as i64 as u64]);

    let parent = Normal::new(params.mu, model.parent_variance.sqrt())
        .map_err(|e| Error::param("parent_variance", e.to_string()))?;
    let fathers: Vec<f64> = (0..n).map(|_| parent.sample(&mut rng)).collect();
    let mothers: Vec<f64> = (0..n).map(|_| parent.sample(&mut rng)).collect();
    let wife = match_latents(&fathers, &mothers, params.rho, &mut rng)?;
    let couples: Vec<(f64, f64)> = fathers.iter().zip(&wife).map(|(&f, &j)| (f, mothers[j])).collect();

    let frame = BlockFrame {
        region_id: region.clone(),
        cohort,
        id_base: (block_idx as u64) << 24,
    };
    let mut children = produce_children(&couples, params, &frame, &mut rng)?;

    let men: Vec<usize> = (0..n).filter(|&i| children[i].sex == Sex::Male).collect();
    let women: Vec<usize> = (0..n).filter(|&i| children[i].sex == Sex::Female).collect();
    let k = men.len().min(women.len());
    let xs: Vec<f64> = men[..k].iter().map(|&i| children[i].edu_latent).collect();
    let ys: Vec<f64> = women[..k].iter().map(|&i| children[i].edu_latent).collect();
    let child_rho = model.child_rho.unwrap_or(params.rho);
    let spouse = match_latents(&xs, &ys, child_rho, &mut rng)?;
    for (a, &b) in spouse.iter().enumerate() {
        let (i, j) = (men[a], women[b]);
        children[i].spouse_id = Some(children[j].id);
        children[j].spouse_id = Some(children[i].id);
    }

    for c in &mut children {
        let delay = config.completion_delay.sample(c.edu_final, &mut rng);
        c.edu_completion_age = config.completion_profile.completion_age(c.edu_final, delay);
        c.leave_home_age = config.leave_home.sample(c.edu_final, c.father_edu, &mut rng);
    }
    Ok(children)
}

/// Generate every (region, cohort) block in parallel.
///
/// Each block has its own random stream keyed by the seed, the region's
/// position and the cohort, so the output does not depend on the number of
/// worker threads.
pub fn generate_population(config: &PopulationConfig) -> Result<Population> {
    config.validate()?;
    let cohorts = config.cohort_list();
    let blocks: Vec<(usize, i32)> = (0..config.regions.len())
        .flat_map(|r| cohorts.iter().map(move |&c| (r, c)))
        .collect();
    let parts: Vec<Vec<Individual>> = blocks
        .par_iter()
        .enumerate()
        .map(|(b, &(r, c))| generate_block(config, r, c, b))
        .collect::<Result<_>>()?;
    Ok(Population {
        individuals: parts.into_iter().flatten().collect(),
        completion_profile: config.completion_profile.clone(),
    })
}
