//! Measurement-error experiments and the regression batteries run on
//! regional panels.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regress::{first_stage, regress, FirstStage, RegressionResult, RegressionSpec, Regressor};
use super::types::{Period, RegionalStat, StatKind};
use crate::data_io::RegionId;
use crate::error::{Error, Result};
use crate::rng::stream;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn check_reliability(name: &'static str, r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::param(name, "must lie in (0, 1]"));
    }
    Ok(())
}

fn cell(region: usize, period: i32, kind: StatKind, value: f64, half_a: f64, half_b: f64) -> RegionalStat {
    RegionalStat {
        region_id: RegionId::new(format!("r{region:03}")),
        period: Period(period),
        stat_kind: kind,
        value,
        n: 0,
        half_a: Some(half_a),
        half_b: Some(half_b),
    }
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Single-regressor design with a regressor of known reliability.
///
/// Each cell has a true regressor value `x*` with unit variance and two
/// replicates `x* + u`, with noise variance `(1 - r) / r`. The cell's
/// observed value is the first replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationDesign {
    pub reliability: f64,
    pub beta: f64,
    pub regions: usize,
    pub periods: usize,
    /// Standard deviation of the outcome's own error.
    pub error_sd: f64,
    pub replications: usize,
}

impl AttenuationDesign {
    pub fn new(reliability: f64) -> Self {
        AttenuationDesign {
            reliability,
            beta: 0.5,
            regions: 100,
            periods: 5,
            error_sd: 0.5,
            replications: 500,
        }
    }

    fn validate(&self) -> Result<()> {
        check_reliability("reliability", self.reliability)?;
        if self.regions * self.periods < 10 || self.periods == 0 || self.replications == 0 {
            return Err(Error::param("design", "needs at least 10 cells and one replication"));
        }
        Ok(())
    }

    /// One simulated panel with `x` stored as `sd` and `y` as `igc`.
    pub fn panel(&self, seed: u64, replication: usize) -> Vec<RegionalStat> {
        let mut rng = stream(seed, &[replication as u64]);
        let noise = ((1.0 - self.reliability) / self.reliability).sqrt();
        let mut out = Vec::with_capacity(2 * self.regions * self.periods);
        for t in 0..self.periods {
            let alpha = 0.1 * t as f64;
            for r in 0..self.regions {
                let x = normal(&mut rng);
                let (a, b) = (x + noise * normal(&mut rng), x + noise * normal(&mut rng));
                let y = alpha + self.beta * x + self.error_sd * normal(&mut rng);
                out.push(cell(r, t as i32, StatKind::Sd, a, a, b));
                out.push(cell(r, t as i32, StatKind::Igc, y, y, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationReport {
    pub reliability: f64,
    pub beta: f64,
    pub mean_ols: f64,
    pub mean_ssiv: f64,
    pub mean_ssiv_se: f64,
    pub mean_first_stage: f64,
    /// Mean OLS estimate over the true coefficient.
    pub ols_ratio: f64,
    /// Share of replications whose 95% split-IV interval covers the truth.
    pub ssiv_coverage: f64,
}

impl AttenuationReport {
    /// Absolute gap between the mean split-IV estimate and the truth, in
    /// units of the mean standard error.
    pub fn ssiv_bias_in_se(&self) -> f64 {
        (self.mean_ssiv - self.beta).abs() / self.mean_ssiv_se
    }
}

pub fn attenuation_experiment(design: &AttenuationDesign, seed: u64) -> Result<AttenuationReport> {
    design.validate()?;
    let x = Regressor::current(StatKind::Sd);
    let ols = RegressionSpec::ols(StatKind::Igc, &[x]);
    let iv = RegressionSpec::split_iv(StatKind::Igc, &[x]);
    let reps: Vec<(f64, f64, f64, f64)> = (0..design.replications)
        .into_par_iter()
        .map(|rep| {
            let panel = design.panel(seed, rep);
            let o = regress(&ols, &panel)?;
            let s = regress(&iv, &panel)?;
            let c = s.coef(&x.name()).expect("regressor present");
            Ok((o.estimate(&x), c.estimate, c.se, s.first_stage[0].slope))
        })
        .collect::<Result<_>>()?;
    let mean_ols = mean(reps.iter().map(|r| r.0));
    Ok(AttenuationReport {
        reliability: design.reliability,
        beta: design.beta,
        mean_ols,
        mean_ssiv: mean(reps.iter().map(|r| r.1)),
        mean_ssiv_se: mean(reps.iter().map(|r| r.2)),
        mean_first_stage: mean(reps.iter().map(|r| r.3)),
        ols_ratio: mean_ols / design.beta,
        ssiv_coverage: mean(reps.iter().map(|r| f64::from(u8::from((r.1 - design.beta).abs() <= 1.96 * r.2)))),
    })
}

/// Two correlated regressors, one measured precisely and one noisily.
///
/// The precise regressor is stored as `father_sd` and the noisy one as
/// `am`, with outcome `igc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationDesign {
    pub beta_precise: f64,
    pub beta_noisy: f64,
    /// Correlation of the true regressors.
    pub correlation: f64,
    pub reliability_precise: f64,
    pub reliability_noisy: f64,
    pub regions: usize,
    pub periods: usize,
    pub error_sd: f64,
    pub replications: usize,
}

impl Default for ContaminationDesign {
    fn default() -> Self {
        ContaminationDesign {
            beta_precise: 0.5,
            beta_noisy: 0.5,
            correlation: 0.5,
            reliability_precise: 0.85,
            reliability_noisy: 0.3,
            regions: 100,
            periods: 5,
            error_sd: 0.5,
            replications: 500,
        }
    }
}

impl ContaminationDesign {
    fn validate(&self) -> Result<()> {
        check_reliability("reliability_precise", self.reliability_precise)?;
        check_reliability("reliability_noisy", self.reliability_noisy)?;
        if !(-1.0 < self.correlation && self.correlation < 1.0) {
            return Err(Error::param("correlation", "must lie in (-1, 1)"));
        }
        if self.regions * self.periods < 10 || self.periods == 0 || self.replications == 0 {
            return Err(Error::param("design", "needs at least 10 cells and one replication"));
        }
        Ok(())
    }

    pub fn panel(&self, seed: u64, replication: usize) -> Vec<RegionalStat> {
        let mut rng = stream(seed, &[replication as u64]);
        let np = ((1.0 - self.reliability_precise) / self.reliability_precise).sqrt();
        let nn = ((1.0 - self.reliability_noisy) / self.reliability_noisy).sqrt();
        let c = self.correlation;
        let mut out = Vec::with_capacity(3 * self.regions * self.periods);
        for t in 0..self.periods {
            for r in 0..self.regions {
                let x1 = normal(&mut rng);
                let x2 = c * x1 + (1.0 - c * c).sqrt() * normal(&mut rng);
                let y = 0.1 * t as f64 + self.beta_precise * x1 + self.beta_noisy * x2 + self.error_sd * normal(&mut rng);
                let (a1, b1) = (x1 + np * normal(&mut rng), x1 + np * normal(&mut rng));
                let (a2, b2) = (x2 + nn * normal(&mut rng), x2 + nn * normal(&mut rng));
                out.push(cell(r, t as i32, StatKind::FatherSd, a1, a1, b1));
                out.push(cell(r, t as i32, StatKind::Am, a2, a2, b2));
                out.push(cell(r, t as i32, StatKind::Igc, y, y, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoCoefficients {
    pub precise: f64,
    pub noisy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub truth: TwoCoefficients,
    pub ols: TwoCoefficients,
    pub ssiv: TwoCoefficients,
    pub ssiv_se: TwoCoefficients,
}

impl ContaminationReport {
    /// Moving from OLS to split IV raises the noisy coefficient and lowers
    /// the precise one.
    pub fn has_contamination_signature(&self) -> bool {
        self.ssiv.noisy > self.ols.noisy && self.ssiv.precise < self.ols.precise
    }

    /// Largest split-IV deviation from the truth in standard errors.
    pub fn ssiv_bias_in_se(&self) -> f64 {
        let p = (self.ssiv.precise - self.truth.precise).abs() / self.ssiv_se.precise;
        let n = (self.ssiv.noisy - self.truth.noisy).abs() / self.ssiv_se.noisy;
        p.max(n)
    }
}

pub fn contamination_experiment(design: &ContaminationDesign, seed: u64) -> Result<ContaminationReport> {
    design.validate()?;
    let (p, q) = (Regressor::current(StatKind::FatherSd), Regressor::current(StatKind::Am));
    let ols = RegressionSpec::ols(StatKind::Igc, &[p, q]);
    let iv = RegressionSpec::split_iv(StatKind::Igc, &[p, q]);
    let reps: Vec<[f64; 6]> = (0..design.replications)
        .into_par_iter()
        .map(|rep| {
            let panel = design.panel(seed, rep);
            let o = regress(&ols, &panel)?;
            let s = regress(&iv, &panel)?;
            let se = |r: &Regressor| s.coef(&r.name()).map_or(f64::NAN, |c| c.se);
            Ok([o.estimate(&p), o.estimate(&q), s.estimate(&p), s.estimate(&q), se(&p), se(&q)])
        })
        .collect::<Result<_>>()?;
    let m = |i: usize| mean(reps.iter().map(|r| r[i]));
    Ok(ContaminationReport {
        truth: TwoCoefficients {
            precise: design.beta_precise,
            noisy: design.beta_noisy,
        },
        ols: TwoCoefficients { precise: m(0), noisy: m(1) },
        ssiv: TwoCoefficients { precise: m(2), noisy: m(3) },
        ssiv_se: TwoCoefficients { precise: m(4), noisy: m(5) },
    })
}

/// A titled set of regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub title: String,
    pub columns: Vec<RegressionResult>,
}

impl Battery {
    fn run(title: &str, specs: &[RegressionSpec], panel: &[RegionalStat]) -> Result<Self> {
        let columns = specs
            .par_iter()
            .map(|s| regress(s, panel))
            .collect::<Result<Vec<_>>>()?;
        Ok(Battery {
            title: title.to_string(),
            columns,
        })
    }

    pub fn column(&self, name: &str) -> Option<&RegressionResult> {
        self.columns.iter().find(|c| c.spec.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("== {} ==\n", self.title);
        for c in &self.columns {
            s.push_str(&c.to_text());
        }
        s
    }
}

/// Both designs of a column, named `prefix` and `d.prefix`.
fn levels_and_changes(specs: Vec<RegressionSpec>) -> Vec<RegressionSpec> {
    let changes: Vec<RegressionSpec> = specs
        .iter()
        .map(|s| {
            let name = format!("d.{}", s.name);
            s.clone().differenced().named(name)
        })
        .collect();
    specs.into_iter().chain(changes).collect()
}

/// Persistence of one statistic, OLS against split IV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceRow {
    pub stat: StatKind,
    pub ols: f64,
    pub ssiv: f64,
    pub ols_se: f64,
    pub ssiv_se: f64,
    pub r2: f64,
    pub first_stage: FirstStage,
}

impl PersistenceRow {
    pub fn gap(&self) -> f64 {
        self.ssiv - self.ols
    }
}

/// Each statistic regressed on its own lag, by OLS and by split IV.
pub fn persistence_battery(panel: &[RegionalStat], stats: &[StatKind]) -> Result<Vec<PersistenceRow>> {
    stats
        .par_iter()
        .map(|&stat| {
            let lag = [Regressor::lagged(stat)];
            let ols = regress(&RegressionSpec::ols(stat, &lag), panel)?;
            let iv = regress(&RegressionSpec::split_iv(stat, &lag), panel)?;
            let name = lag[0].name();
            let (o, s) = (ols.coef(&name).expect("present"), iv.coef(&name).expect("present"));
            Ok(PersistenceRow {
                stat,
                ols: o.estimate,
                ssiv: s.estimate,
                ols_se: o.se,
                ssiv_se: s.se,
                r2: ols.r2.unwrap_or(f64::NAN),
                first_stage: first_stage(stat, panel)?,
            })
        })
        .collect()
}

pub const PERSISTENCE_STATS: [StatKind; 4] = [StatKind::Mean, StatKind::Sd, StatKind::Igc, StatKind::Am];

pub fn persistence_to_text(rows: &[PersistenceRow]) -> String {
    let mut s = String::from("stat      ols      ssiv     gap      first_stage\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>7.3}  {:>7.3}  {:>7.3}  {:>7.3}",
            r.stat.as_str(),
            r.ols,
            r.ssiv,
            r.gap(),
            r.first_stage.slope
        );
    }
    s
}

/// Mobility on the fathers' mean and dispersion.
pub fn gatsby_battery(panel: &[RegionalStat]) -> Result<Battery> {
    let (m, sd) = (Regressor::current(StatKind::FatherMean), Regressor::current(StatKind::FatherSd));
    let specs = levels_and_changes(vec![
        RegressionSpec::ols(StatKind::Igc, &[m]).named("mean"),
        RegressionSpec::ols(StatKind::Igc, &[m, sd]).named("mean+sd"),
        RegressionSpec::split_iv(StatKind::Igc, &[m, sd]).named("mean+sd ssiv"),
    ]);
    Battery::run("IGC on fathers' mean and SD", &specs, panel)
}

/// Child dispersion on parental sorting, and sorting on fathers' dispersion.
pub fn sorting_battery(panel: &[RegionalStat]) -> Result<Battery> {
    let (am, sd) = (Regressor::current(StatKind::Am), Regressor::current(StatKind::FatherSd));
    let specs = levels_and_changes(vec![
        RegressionSpec::ols(StatKind::Sd, &[am]).named("sd~am"),
        RegressionSpec::split_iv(StatKind::Sd, &[am]).named("sd~am ssiv"),
        RegressionSpec::ols(StatKind::Am, &[sd]).named("am~sd"),
        RegressionSpec::split_iv(StatKind::Am, &[sd]).named("am~sd ssiv"),
    ]);
    Battery::run("Sorting and inequality", &specs, panel)
}

/// Mobility on fathers' dispersion and parental sorting, with the split-IV
/// version of the dispersion-only column needed for the mediation share.
pub fn mediation_battery(panel: &[RegionalStat]) -> Result<Battery> {
    let (sd, am) = (Regressor::current(StatKind::FatherSd), Regressor::current(StatKind::Am));
    let specs = levels_and_changes(vec![
        RegressionSpec::ols(StatKind::Igc, &[sd]).named("sd"),
        RegressionSpec::ols(StatKind::Igc, &[am]).named("am"),
        RegressionSpec::ols(StatKind::Igc, &[sd, am]).named("sd+am"),
        RegressionSpec::split_iv(StatKind::Igc, &[sd, am]).named("sd+am ssiv"),
        RegressionSpec::split_iv(StatKind::Igc, &[sd]).named("sd ssiv"),
    ]);
    Battery::run("IGC on fathers' SD and parental AM", &specs, panel)
}

/// Share of the dispersion coefficient that disappears once sorting is
/// controlled for, both under split IV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mediation {
    pub sd_alone: f64,
    pub sd_with_am: f64,
    pub share: f64,
}

impl Mediation {
    pub fn from_battery(b: &Battery, changes: bool) -> Option<Self> {
        let p = if changes { "d." } else { "" };
        let sd = Regressor::current(StatKind::FatherSd);
        let alone = b.column(&format!("{p}sd ssiv"))?.estimate(&sd);
        let with = b.column(&format!("{p}sd+am ssiv"))?.estimate(&sd);
        Some(Mediation {
            sd_alone: alone,
            sd_with_am: with,
            share: (alone - with) / alone,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatsbySummary {
    pub gatsby: Battery,
    pub mediation_battery: Battery,
    pub mediation: Mediation,
}

impl GatsbySummary {
    pub fn to_text(&self) -> String {
        format!(
            "{}{}mediated by AM: {:.3} (SD coefficient {:.4} alone, {:.4} with AM)\n",
            self.gatsby.to_text(),
            self.mediation_battery.to_text(),
            self.mediation.share,
            self.mediation.sd_alone,
            self.mediation.sd_with_am
        )
    }
}

pub fn gatsby_summary(panel: &[RegionalStat]) -> Result<GatsbySummary> {
    let kinds: std::collections::BTreeSet<StatKind> = panel.iter().map(|s| s.stat_kind).collect();
    for need in [StatKind::Igc, StatKind::FatherSd, StatKind::FatherMean, StatKind::Am] {
        if !kinds.contains(&need) {
            return Err(Error::InvalidSpec(format!("panel has no {need} cells")));
        }
    }
    let gatsby = gatsby_battery(panel)?;
    let mediation_battery = mediation_battery(panel)?;
    let mediation = Mediation::from_battery(&mediation_battery, false).expect("columns defined above");
    Ok(GatsbySummary {
        gatsby,
        mediation_battery,
        mediation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_reliability_leaves_ols_unbiased() {
        let d = AttenuationDesign {
            replications: 20,
            ..AttenuationDesign::new(1.0)
        };
        let r = attenuation_experiment(&d, 1).unwrap();
        assert!((r.mean_ols - r.mean_ssiv).abs() < 1e-12);
        assert!((r.mean_first_stage - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_contamination_is_truth() {
        let d = ContaminationDesign {
            reliability_precise: 1.0,
            reliability_noisy: 1.0,
            error_sd: 0.0,
            replications: 3,
            ..ContaminationDesign::default()
        };
        let r = contamination_experiment(&d, 4).unwrap();
        assert!((r.ols.precise - 0.5).abs() < 1e-10 && (r.ols.noisy - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(attenuation_experiment(&AttenuationDesign::new(0.0), 1).is_err());
        let d = ContaminationDesign {
            correlation: 1.0,
            ..ContaminationDesign::default()
        };
        assert!(contamination_experiment(&d, 1).is_err());
    }
}
