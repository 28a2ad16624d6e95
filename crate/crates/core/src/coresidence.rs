//! Coresidence bias: censoring versus selection by age of measurement, and
//! the shift correction for children who left the parental home.
//!
//! Children still living with their parents ("dependents") are the only
//! ones whose parental schooling a household survey records. Measured
//! young, their schooling is censored; measured old, they are a selected
//! group. The correction assumes independents' conditional mean differs
//! from dependents' by a constant and recovers that constant from the
//! independents' overall mean and parental-group shares borrowed from a
//! younger age in the same survey year.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{atomic_write, MicroRecord, Microdata};
use crate::error::{Error, Result};
use crate::estimators::{igc, igr, parent_child_vectors, ParentVariable};
use crate::linalg;
use crate::synth::CompletionProfile;

/// Group mean recombined from dependents and independents.
pub fn decompose_group_mean(d: f64, y_dep: f64, y_indep: f64) -> f64 {
    d * y_dep + (1.0 - d) * y_indep
}

/// Dependents of one parental-schooling group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependentGroup {
    pub parent_edu: f64,
    pub y_dep: f64,
    pub n_dep: usize,
    /// Estimated share of all independents coming from this group.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilgerInputs {
    pub groups: Vec<DependentGroup>,
    pub y_indep: f64,
    pub n_indep: usize,
}

const SHARE_TOL: f64 = 1e-9;

fn group_means(rows: &[&MicroRecord], parent: ParentVariable) -> BTreeMap<u8, (f64, usize)> {
    let mut acc: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
    for r in rows {
        if let Some(p) = parent.of(r) {
            let e = acc.entry(p).or_default();
            e.0 += r.edu_years as f64;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(g, (s, n))| (g, (s / n as f64, n))).collect()
}

fn mean_edu(rows: &[&MicroRecord]) -> f64 {
    rows.iter().map(|r| r.edu_years as f64).sum::<f64>() / rows.len() as f64
}

impl HilgerInputs {
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::EmptySample("no parental groups".into()));
        }
        if self.groups.iter().any(|g| !(g.share.is_finite() && g.share >= 0.0)) {
            return Err(Error::param("share", "must be finite and non-negative"));
        }
        let total: f64 = self.groups.iter().map(|g| g.share).sum();
        if (total - 1.0).abs() > SHARE_TOL {
            return Err(Error::param("share", format!("shares sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Inputs with the true parental shares of the independents (only
    /// available in simulated data). `rows` are observed at one age.
    ///
    /// Independents from parental groups without any dependent are left
    /// out, since the correction has no dependent mean to shift for them.
    pub fn exact(rows: &[&MicroRecord], age: u32, parent: ParentVariable) -> Result<Self> {
        let (dep, indep): (Vec<&MicroRecord>, Vec<&MicroRecord>) =
            rows.iter().copied().filter(|r| parent.of(r).is_some()).partition(|r| r.coresident_at(age));
        let dep_means = group_means(&dep, parent);
        let indep: Vec<&MicroRecord> = indep
            .into_iter()
            .filter(|r| parent.of(r).is_some_and(|p| dep_means.contains_key(&p)))
            .collect();
        let indep_counts = group_means(&indep, parent);
        let n_indep = indep.len();
        let groups = dep_means
            .iter()
            .map(|(&g, &(y, n))| DependentGroup {
                parent_edu: g as f64,
                y_dep: y,
                n_dep: n,
                share: indep_counts.get(&g).map_or(0.0, |&(_, m)| m as f64 / n_indep.max(1) as f64),
            })
            .collect();
        Ok(HilgerInputs {
            groups,
            y_indep: if n_indep > 0 { mean_edu(&indep) } else { f64::NAN },
            n_indep,
        })
    }

    /// Inputs with independents' shares inferred from parental-group shares
    /// of a younger proxy sample (e.g. dependents aged 16 in the same
    /// survey year): group totals are the proxy shares times the number of
    /// children at the target age, and independents are what remains after
    /// removing the observed dependents.
    pub fn from_proxy_shares(
        rows: &[&MicroRecord],
        age: u32,
        proxy: &[&MicroRecord],
        parent: ParentVariable,
    ) -> Result<Self> {
        let proxy_counts = group_means(proxy, parent);
        let proxy_total: usize = proxy_counts.values().map(|&(_, n)| n).sum();
        if proxy_total == 0 {
            return Err(Error::EmptySample("proxy sample has no parental information".into()));
        }
        let mut inputs = Self::exact(rows, age, parent)?;
        let n_total = inputs.n_indep + inputs.groups.iter().map(|g| g.n_dep).sum::<usize>();
        let raw: Vec<f64> = inputs
            .groups
            .iter()
            .map(|g| {
                let s = proxy_counts.get(&(g.parent_edu as u8)).map_or(0.0, |&(_, n)| n as f64 / proxy_total as f64);
                (s * n_total as f64 - g.n_dep as f64).max(0.0)
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        for (g, r) in inputs.groups.iter_mut().zip(&raw) {
            g.share = if sum > 0.0 { r / sum } else { 1.0 / raw.len() as f64 };
        }
        Ok(inputs)
    }
}

/// Constant gap between independents and dependents:
/// `y_indep - sum_g share_g * y_dep_g`.
pub fn estimate_rho_hat(inputs: &HilgerInputs) -> Result<f64> {
    if inputs.n_indep == 0 || !inputs.y_indep.is_finite() {
        return Err(Error::EmptySample("no independent children".into()));
    }
    inputs.validate()?;
    Ok(inputs.y_indep - inputs.groups.iter().map(|g| g.share * g.y_dep).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedGroup {
    pub parent_edu: f64,
    /// Estimated dependency rate.
    pub d_hat: f64,
    pub y_hat: f64,
    /// Estimated group size (dependents plus imputed independents).
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedCef {
    pub groups: Vec<CorrectedGroup>,
    /// Parental values of groups dropped for lack of data.
    pub dropped: Vec<f64>,
    /// Weighted least-squares slope of corrected means on parental schooling.
    pub igr: f64,
}

/// Corrected conditional means `y_dep + (1 - d_hat) * rho_hat` and the
/// implied slope.
pub fn hilger_corrected_cef(inputs: &HilgerInputs, rho_hat: f64) -> Result<CorrectedCef> {
    if !rho_hat.is_finite() {
        return Err(Error::NonFinite("rho_hat"));
    }
    let mut groups = Vec::new();
    let mut dropped = Vec::new();
    for g in &inputs.groups {
        let n_ind = g.share * inputs.n_indep as f64;
        let total = g.n_dep as f64 + n_ind;
        if g.n_dep == 0 || total <= 0.0 || !g.y_dep.is_finite() {
            dropped.push(g.parent_edu);
            continue;
        }
        let d_hat = g.n_dep as f64 / total;
        groups.push(CorrectedGroup {
            parent_edu: g.parent_edu,
            d_hat,
            y_hat: decompose_group_mean(d_hat, g.y_dep, g.y_dep + rho_hat),
            weight: total,
        });
    }
    let igr = weighted_slope(&groups)?;
    Ok(CorrectedCef { groups, dropped, igr })
}

fn weighted_slope(groups: &[CorrectedGroup]) -> Result<f64> {
    let w: f64 = groups.iter().map(|g| g.weight).sum();
    if groups.len() < 2 || w <= 0.0 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: groups.len(),
        });
    }
    let mx = groups.iter().map(|g| g.weight * g.parent_edu).sum::<f64>() / w;
    let my = groups.iter().map(|g| g.weight * g.y_hat).sum::<f64>() / w;
    let sxx: f64 = groups.iter().map(|g| g.weight * (g.parent_edu - mx).powi(2)).sum();
    let sxy: f64 = groups.iter().map(|g| g.weight * (g.parent_edu - mx) * (g.y_hat - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateVariance("parent"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coef {
    pub estimate: f64,
    pub se: f64,
}

impl Coef {
    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.se
    }
}

/// `y = alpha + beta * parent + rho * indep + gamma * parent * indep`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelTrends {
    pub alpha: Coef,
    pub beta: Coef,
    pub rho: Coef,
    pub gamma: Coef,
    pub n: usize,
}

/// Regress child schooling on parental schooling, an independence
/// indicator and their interaction, for children observed at `age` with
/// known parents. HC1 standard errors.
pub fn parallel_trends_test(rows: &[&MicroRecord], age: u32, parent: ParentVariable) -> Result<ParallelTrends> {
    let mut cols = vec![Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut y = Vec::new();
    for r in rows {
        let Some(p) = parent.of(r) else { continue };
        let d = if r.coresident_at(age) { 0.0 } else { 1.0 };
        let p = p as f64;
        cols[0].push(1.0);
        cols[1].push(p);
        cols[2].push(d);
        cols[3].push(p * d);
        y.push(r.edu_years as f64);
    }
    let names: Vec<String> = ["const", "parent_edu", "independent", "parent_edu_x_independent"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let fit = linalg::ols(&linalg::design(&cols), &DVector::from_vec(y), &names, 0)?;
    let c = |i: usize| Coef {
        estimate: fit.coef[i],
        se: fit.se[i],
    };
    Ok(ParallelTrends {
        alpha: c(0),
        beta: c(1),
        rho: c(2),
        gamma: c(3),
        n: fit.n,
    })
}

/// A labelled range of fictitious survey years.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearWindow {
    pub label: String,
    pub first: i32,
    pub last: i32,
}

impl YearWindow {
    pub fn new(first: i32, last: i32) -> Self {
        YearWindow {
            label: format!("{first}-{last}"),
            first,
            last,
        }
    }
}

/// Coresidence bias at one measurement age, averaged over a window of
/// survey years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub age: u32,
    pub period: String,
    pub diff_igc: f64,
    pub abs_diff_igc: f64,
    pub diff_mean: f64,
    pub coresidence_share: f64,
    pub n_dep: usize,
    pub n_all: usize,
    /// Survey years averaged over.
    pub years: usize,
}

pub const BIAS_REPORT_HEADER: [&str; 7] = [
    "age",
    "period",
    "diff_igc",
    "abs_diff_igc",
    "coresidence_share",
    "n_dep",
    "n_all",
];

/// Rows of a population indexed by cohort.
pub struct CohortIndex<'a> {
    by_cohort: BTreeMap<i32, Vec<&'a MicroRecord>>,
    profile: &'a CompletionProfile,
}

impl<'a> CohortIndex<'a> {
    pub fn new(records: &'a [MicroRecord], profile: &'a CompletionProfile) -> Self {
        let mut by_cohort: BTreeMap<i32, Vec<&MicroRecord>> = BTreeMap::new();
        for r in records {
            by_cohort.entry(r.cohort).or_default().push(r);
        }
        CohortIndex { by_cohort, profile }
    }

    pub fn cohorts(&self) -> (i32, i32) {
        let first = self.by_cohort.keys().next().copied().unwrap_or(0);
        let last = self.by_cohort.keys().next_back().copied().unwrap_or(-1);
        (first, last)
    }

    /// Cohort observed at `age`, with reported schooling at that age.
    pub fn at_age(&self, cohort: i32, age: u32) -> Vec<MicroRecord> {
        self.by_cohort
            .get(&cohort)
            .map(|rows| {
                rows.iter()
                    .map(|r| MicroRecord {
                        edu_years: self.profile.attained_at(r.edu_years, r.edu_completion_age, age),
                        ..(*r).clone()
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

struct YearCell {
    diff: f64,
    diff_mean: f64,
    share: f64,
    n_dep: usize,
    n_all: usize,
}

fn year_cell(idx: &CohortIndex, year: i32, age: u32, benchmark_age: u32, parent: ParentVariable) -> Result<YearCell> {
    let young = idx.at_age(year - age as i32, age);
    let dep: Vec<&MicroRecord> = young.iter().filter(|r| r.coresident_at(age)).collect();
    let bench = idx.at_age(year - benchmark_age as i32, benchmark_age);
    let (cd, pd) = parent_child_vectors(dep.iter().copied(), parent);
    let (cb, pb) = parent_child_vectors(&bench, parent);
    let igc_dep = igc(&cd, &pd)?.value;
    let igc_all = igc(&cb, &pb)?.value;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(YearCell {
        diff: igc_dep - igc_all,
        diff_mean: mean(&cd) - mean(&cb),
        share: dep.len() as f64 / young.len().max(1) as f64,
        n_dep: cd.len(),
        n_all: cb.len(),
    })
}

/// Survey years of `window` in which every age in `ages` and the benchmark
/// age map to a cohort present in the data.
pub fn common_years(window: &YearWindow, cohorts: (i32, i32), ages: &[u32], benchmark_age: u32) -> Vec<i32> {
    let oldest = ages.iter().copied().chain([benchmark_age]).max().unwrap_or(benchmark_age) as i32;
    let youngest = ages.iter().copied().chain([benchmark_age]).min().unwrap_or(benchmark_age) as i32;
    let lo = window.first.max(cohorts.0 + oldest);
    let hi = window.last.min(cohorts.1 + youngest);
    (lo..=hi).collect()
}

/// Signed and absolute bias of the dependents-only IGC at each age relative
/// to the all-children IGC at `benchmark_age`, both taken in the same
/// fictitious survey year and averaged with equal year weights.
pub fn bias_by_age(
    md: &Microdata,
    profile: &CompletionProfile,
    ages: &[u32],
    benchmark_age: u32,
    windows: &[YearWindow],
    parent: ParentVariable,
) -> Result<Vec<BiasReport>> {
    let idx = CohortIndex::new(&md.records, profile);
    let cohorts = idx.cohorts();
    let mut jobs = Vec::new();
    for w in windows {
        let years = common_years(w, cohorts, ages, benchmark_age);
        if years.is_empty() {
            return Err(Error::EmptySample(format!("no usable survey years in {}", w.label)));
        }
        for &a in ages {
            jobs.push((w, a, years.clone()));
        }
    }
    jobs.par_iter()
        .map(|(w, a, years)| {
            let cells: Vec<YearCell> = years
                .iter()
                .map(|&y| year_cell(&idx, y, *a, benchmark_age, parent))
                .collect::<Result<_>>()?;
            let k = cells.len() as f64;
            Ok(BiasReport {
                age: *a,
                period: w.label.clone(),
                diff_igc: cells.iter().map(|c| c.diff).sum::<f64>() / k,
                abs_diff_igc: cells.iter().map(|c| c.diff.abs()).sum::<f64>() / k,
                diff_mean: cells.iter().map(|c| c.diff_mean).sum::<f64>() / k,
                coresidence_share: cells.iter().map(|c| c.share).sum::<f64>() / k,
                n_dep: cells.iter().map(|c| c.n_dep).sum(),
                n_all: cells.iter().map(|c| c.n_all).sum(),
                years: cells.len(),
            })
        })
        .collect()
}

/// Mean of a report column over windows, by age.
pub fn average_over_periods(reports: &[BiasReport], f: impl Fn(&BiasReport) -> f64) -> BTreeMap<u32, f64> {
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for r in reports {
        let e = acc.entry(r.age).or_default();
        e.0 += f(r);
        e.1 += 1;
    }
    acc.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect()
}

pub fn bias_reports_to_csv(reports: &[BiasReport]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BIAS_REPORT_HEADER).expect("in-memory write");
    for r in reports {
        w.write_record([
            r.age.to_string(),
            r.period.clone(),
            r.diff_igc.to_string(),
            r.abs_diff_igc.to_string(),
            r.coresidence_share.to_string(),
            r.n_dep.to_string(),
            r.n_all.to_string(),
        ])
        .expect("in-memory write");
    }
    let mut out = w.into_inner().expect("in-memory write");
    out.flush().expect("in-memory write");
    out
}

pub fn write_bias_reports(reports: &[BiasReport], path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), &bias_reports_to_csv(reports))
}

/// Where the independents' parental shares come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ShareSource {
    /// Dependents at this age in the same survey year.
    Proxy { age: u32 },
    /// True shares (simulation only).
    #[default]
    Exact,
}

/// Dependents-only, corrected and benchmark IGR for one cohort and age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilgerComparison {
    pub age: u32,
    pub cohort: i32,
    pub igr_dependent: f64,
    pub igr_corrected: f64,
    pub igr_benchmark: f64,
    pub rho_hat: f64,
    pub dropped_groups: usize,
}

pub const HILGER_HEADER: [&str; 7] = [
    "age",
    "cohort",
    "igr_dependent",
    "igr_corrected",
    "igr_benchmark",
    "rho_hat",
    "dropped_groups",
];

/// Compare the three IGR series for every cohort and age where the needed
/// samples exist. The benchmark is the same cohort at `benchmark_age`,
/// dependents and independents together.
pub fn hilger_comparison(
    md: &Microdata,
    profile: &CompletionProfile,
    ages: &[u32],
    benchmark_age: u32,
    shares: ShareSource,
    parent: ParentVariable,
) -> Result<Vec<HilgerComparison>> {
    let idx = CohortIndex::new(&md.records, profile);
    let (first, last) = idx.cohorts();
    let mut jobs = Vec::new();
    for &a in ages {
        for c in first..=last {
            if let ShareSource::Proxy { age: pa } = shares {
                let pc = c + a as i32 - pa as i32;
                if pc < first || pc > last {
                    continue;
                }
            }
            jobs.push((a, c));
        }
    }
    jobs.par_iter()
        .map(|&(a, c)| {
            let rows = idx.at_age(c, a);
            let refs: Vec<&MicroRecord> = rows.iter().collect();
            let dep: Vec<&MicroRecord> = refs.iter().copied().filter(|r| r.coresident_at(a)).collect();
            let (cd, pd) = parent_child_vectors(dep.iter().copied(), parent);
            let igr_dependent = igr(&cd, &pd)?.value;
            let bench = idx.at_age(c, benchmark_age);
            let (cb, pb) = parent_child_vectors(&bench, parent);
            let igr_benchmark = igr(&cb, &pb)?.value;
            let inputs = match shares {
                ShareSource::Exact => HilgerInputs::exact(&refs, a, parent)?,
                ShareSource::Proxy { age: pa } => {
                    let proxy_rows = idx.at_age(c + a as i32 - pa as i32, pa);
                    let proxy: Vec<&MicroRecord> = proxy_rows.iter().filter(|r| r.coresident_at(pa)).collect();
                    HilgerInputs::from_proxy_shares(&refs, a, &proxy, parent)?
                }
            };
            let (rho_hat, cef) = if inputs.n_indep == 0 {
                (0.0, hilger_corrected_cef(&inputs, 0.0)?)
            } else {
                let r = estimate_rho_hat(&inputs)?;
                (r, hilger_corrected_cef(&inputs, r)?)
            };
            Ok(HilgerComparison {
                age: a,
                cohort: c,
                igr_dependent,
                igr_corrected: cef.igr,
                igr_benchmark,
                rho_hat,
                dropped_groups: cef.dropped.len(),
            })
        })
        .collect()
}

pub fn hilger_to_csv(rows: &[HilgerComparison]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HILGER_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.age.to_string(),
            r.cohort.to_string(),
            r.igr_dependent.to_string(),
            r.igr_corrected.to_string(),
            r.igr_benchmark.to_string(),
            r.rho_hat.to_string(),
            r.dropped_groups.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::Sex;

    #[test]
    fn decomposition_examples() {
        assert_eq!(decompose_group_mean(1.0, 7.0, 3.0), 7.0);
        assert_eq!(decompose_group_mean(0.5, 10.0, 8.0), 9.0);
    }

    fn inputs(shift: f64, shares: [f64; 3]) -> HilgerInputs {
        let y_dep = [6.0, 9.0, 13.0];
        let groups: Vec<DependentGroup> = (0..3)
            .map(|g| DependentGroup {
                parent_edu: [5.0, 8.0, 11.0][g],
                y_dep: y_dep[g],
                n_dep: 100,
                share: shares[g],
            })
            .collect();
        let y_indep = (0..3).map(|g| shares[g] * (y_dep[g] + shift)).sum();
        HilgerInputs {
            groups,
            y_indep,
            n_indep: 60,
        }
    }

    #[test]
    fn rho_hat_recovers_constant_shift() {
        let inp = inputs(2.0, [0.5, 0.3, 0.2]);
        assert!((estimate_rho_hat(&inp).unwrap() - 2.0).abs() < 1e-12);
        assert!(estimate_rho_hat(&inputs(0.0, [0.2, 0.3, 0.5])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn misestimated_shares_bias_rho_hat() {
        let truth = [0.5, 0.3, 0.2];
        let mut inp = inputs(2.0, truth);
        let wrong = [0.3, 0.3, 0.4];
        for (g, s) in inp.groups.iter_mut().zip(wrong) {
            g.share = s;
        }
        let err: f64 = (0..3).map(|g| (truth[g] - wrong[g]) * inp.groups[g].y_dep).sum();
        assert!((estimate_rho_hat(&inp).unwrap() - (2.0 + err)).abs() < 1e-12);
    }

    #[test]
    fn shares_must_sum_to_one() {
        assert!(estimate_rho_hat(&inputs(1.0, [0.5, 0.5, 0.5])).is_err());
        let mut none = inputs(1.0, [0.5, 0.3, 0.2]);
        none.n_indep = 0;
        assert!(matches!(estimate_rho_hat(&none), Err(Error::EmptySample(_))));
    }

    #[test]
    fn zero_shift_full_dependency_is_identity() {
        let mut inp = inputs(0.0, [0.5, 0.3, 0.2]);
        inp.n_indep = 0;
        let cef = hilger_corrected_cef(&inp, 0.0).unwrap();
        for (c, g) in cef.groups.iter().zip(&inp.groups) {
            assert_eq!(c.y_hat, g.y_dep);
            assert_eq!(c.d_hat, 1.0);
        }
    }

    #[test]
    fn empty_groups_dropped() {
        let mut inp = inputs(1.0, [0.5, 0.3, 0.2]);
        inp.groups[1].n_dep = 0;
        let cef = hilger_corrected_cef(&inp, 1.0).unwrap();
        assert_eq!(cef.dropped, vec![8.0]);
        assert_eq!(cef.groups.len(), 2);
    }

    fn rec(id: u64, edu: u8, father: u8, leave: u32) -> MicroRecord {
        MicroRecord {
            id,
            region_id: "r".into(),
            cohort: 1970,
            sex: Sex::Female,
            edu_years: edu,
            father_edu_years: Some(father),
            mother_edu_years: None,
            spouse_id: None,
            leave_home_age: leave,
            edu_completion_age: 18,
        }
    }

    #[test]
    fn parallel_trends_needs_both_groups() {
        let rows: Vec<MicroRecord> = (0..20).map(|i| rec(i, [5, 8, 11][i as usize % 3], [1, 5, 8, 11][i as usize % 4], 99)).collect();
        let refs: Vec<&MicroRecord> = rows.iter().collect();
        match parallel_trends_test(&refs, 27, ParentVariable::Father) {
            Err(Error::RankDeficient(cols)) => assert!(cols.contains(&"independent".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let bytes = bias_reports_to_csv(&[]);
        assert_eq!(String::from_utf8(bytes).unwrap().trim(), BIAS_REPORT_HEADER.join(","));
    }

    #[test]
    fn years_need_every_cohort() {
        let w = YearWindow::new(1950, 1964);
        let years = common_years(&w, (1920, 1940), &[18, 32], 35);
        assert_eq!(years, (1955..=1958).collect::<Vec<_>>());
    }
}
