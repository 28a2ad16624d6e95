//! Per-(region, period) statistics with split-half replicates.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::types::{Period, RegionalStat, StatKind};
use crate::data_io::{MicroRecord, Microdata, RegionId, RegionRegistry, Sex};
use crate::error::{Error, Result};
use crate::estimators::{igc, igr, mean_sd, mean_sd_cv, parent_child_vectors, rank_correlation, ParentVariable};
use crate::rng::{key_hash, stream};

/// Maps birth cohorts to period labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PeriodScheme {
    /// Fixed-width bins; a cohort maps to the first year of its bin.
    Bins { origin: i32, width: i32 },
    /// Explicit inclusive cohort ranges with their labels.
    Explicit { bins: Vec<PeriodBin> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodBin {
    pub label: i32,
    pub first: i32,
    pub last: i32,
}

impl PeriodScheme {
    pub fn decades() -> Self {
        PeriodScheme::Bins { origin: 1900, width: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PeriodScheme::Bins { width, .. } if *width <= 0 => {
                Err(Error::param("period_scheme.width", "must be positive"))
            }
            PeriodScheme::Explicit { bins } => {
                let mut sorted = bins.clone();
                sorted.sort_by_key(|b| b.first);
                if bins.iter().any(|b| b.first > b.last) || sorted.windows(2).any(|w| w[0].last >= w[1].first) {
                    return Err(Error::param("period_scheme.bins", "ranges must be non-empty and disjoint"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn period_of(&self, cohort: i32) -> Option<Period> {
        match self {
            PeriodScheme::Bins { origin, width } => {
                Some(Period(origin + (cohort - origin).div_euclid(*width) * width))
            }
            PeriodScheme::Explicit { bins } => bins
                .iter()
                .find(|b| (b.first..=b.last).contains(&cohort))
                .map(|b| Period(b.label)),
        }
    }
}

/// Settings for [`compute_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelRules {
    #[serde(default = "default_stats")]
    pub stats: Vec<StatKind>,
    /// Cells with fewer usable rows are omitted.
    #[serde(default = "default_min_cell")]
    pub min_cell: usize,
    /// Half-sample values are dropped when either half has fewer rows.
    #[serde(default = "default_min_half")]
    pub min_half: usize,
    #[serde(default)]
    pub parent: ParentVariable,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_stats() -> Vec<StatKind> {
    StatKind::ALL.to_vec()
}
fn default_min_cell() -> usize {
    50
}
fn default_min_half() -> usize {
    25
}

impl Default for PanelRules {
    fn default() -> Self {
        PanelRules {
            stats: default_stats(),
            min_cell: default_min_cell(),
            min_half: default_min_half(),
            parent: ParentVariable::Father,
            split_seed: 0,
        }
    }
}

/// Statistic of `kind` on a set of rows, with the number of rows it used.
pub fn cell_statistic(rows: &[&MicroRecord], kind: StatKind, parent: ParentVariable) -> Result<(f64, usize)> {
    let child: Vec<f64> = rows.iter().map(|r| r.edu_years as f64).collect();
    let fathers = || -> Vec<f64> {
        rows.iter()
            .filter_map(|r| r.father_edu_years.map(f64::from))
            .collect()
    };
    Ok(match kind {
        StatKind::Mean => (mean_sd(&child)?.0, child.len()),
        StatKind::Sd => (mean_sd(&child)?.1, child.len()),
        StatKind::Cv => (mean_sd_cv(&child)?.cv, child.len()),
        StatKind::Igc | StatKind::Igr | StatKind::Rank => {
            let (c, p) = parent_child_vectors(rows.iter().copied(), parent);
            let r = match kind {
                StatKind::Igc => igc(&c, &p)?,
                StatKind::Igr => igr(&c, &p)?,
                _ => rank_correlation(&c, &p)?,
            };
            (r.value, r.n)
        }
        StatKind::Am => {
            let (f, m): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter_map(|r| Some((r.father_edu_years? as f64, r.mother_edu_years? as f64)))
                .unzip();
            let r = igc(&m, &f)?;
            (r.value, r.n)
        }
        StatKind::FatherMean => {
            let f = fathers();
            (mean_sd(&f)?.0, f.len())
        }
        StatKind::FatherSd => {
            let f = fathers();
            (mean_sd(&f)?.1, f.len())
        }
    })
}

/// Stratum of a row: sex, cohort and region.
type Stratum = (Sex, i32, RegionId);

fn stratum_rng(seed: u64, sex: Option<Sex>, cohort: i32, region: &RegionId) -> crate::rng::StreamRng {
    let s = match sex {
        Some(Sex::Male) => 1,
        Some(Sex::Female) => 2,
        None => 0,
    };
    stream(seed, &[s, cohort as i64 as u64, key_hash(region.as_str())])
}

/// Assign every row to half A (`true`) or half B.
///
/// Within each (sex, cohort, region) stratum rows are split as evenly as
/// possible; the larger side of an odd stratum is decided by a seeded coin.
/// Spouses present in the table always land in the same half: couples are
/// split first, within the husband's cohort and region, and single rows
/// then even out each stratum.
pub fn split_assignment(md: &Microdata, seed: u64) -> Vec<bool> {
    let n = md.records.len();
    let index: HashMap<u64, usize> = md.records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    let mut couple_groups: BTreeMap<(i32, RegionId), Vec<(usize, usize)>> = BTreeMap::new();
    let mut singles: BTreeMap<Stratum, Vec<usize>> = BTreeMap::new();
    for (i, r) in md.records.iter().enumerate() {
        let partner = r
            .spouse_id
            .and_then(|s| index.get(&s).copied())
            .filter(|&j| md.records[j].spouse_id == Some(r.id) && j != i);
        match partner {
            Some(j) => {
                let (a, b) = if r.id < md.records[j].id { (i, j) } else { continue };
                let key = if md.records[a].sex == Sex::Male { a } else { b };
                let k = &md.records[key];
                couple_groups.entry((k.cohort, k.region_id.clone())).or_default().push((a, b));
            }
            None => singles.entry((r.sex, r.cohort, r.region_id.clone())).or_default().push(i),
        }
    }

    let mut side = vec![false; n];
    let mut balance: HashMap<Stratum, i64> = HashMap::new();
    let stratum = |i: usize| {
        let r = &md.records[i];
        (r.sex, r.cohort, r.region_id.clone())
    };
    for ((cohort, region), mut pairs) in couple_groups {
        let mut rng = stratum_rng(seed, None, cohort, &region);
        pairs.shuffle(&mut rng);
        let first: bool = rng.random();
        for (k, (a, b)) in pairs.into_iter().enumerate() {
            let to_a = (k % 2 == 0) == first;
            side[a] = to_a;
            side[b] = to_a;
            for i in [a, b] {
                *balance.entry(stratum(i)).or_default() += if to_a { 1 } else { -1 };
            }
        }
    }
    for (key, mut rows) in singles {
        let mut rng = stratum_rng(seed, Some(key.0), key.1, &key.2);
        rows.shuffle(&mut rng);
        let first: bool = rng.random();
        let mut diff = balance.get(&key).copied().unwrap_or(0);
        let mut k = 0usize;
        for i in rows {
            let to_a = if diff < 0 {
                true
            } else if diff > 0 {
                false
            } else {
                let t = (k % 2 == 0) == first;
                k += 1;
                t
            };
            side[i] = to_a;
            diff += if to_a { 1 } else { -1 };
        }
    }
    side
}

/// Split microdata into two stratified halves (see [`split_assignment`]).
pub fn split_halves(md: &Microdata, seed: u64) -> (Microdata, Microdata) {
    let side = split_assignment(md, seed);
    let (a, b): (Vec<_>, Vec<_>) = md.records.iter().cloned().zip(side).partition(|(_, s)| *s);
    (
        Microdata::new(a.into_iter().map(|(r, _)| r).collect()),
        Microdata::new(b.into_iter().map(|(r, _)| r).collect()),
    )
}

/// A cell left out of the panel, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedCell {
    pub region_id: RegionId,
    pub period: Period,
    pub stat_kind: StatKind,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub stats: Vec<RegionalStat>,
    pub omitted: Vec<OmittedCell>,
}

/// One statistic per (region, period, kind) from microdata, with split-half
/// replicates. Rows whose cohort falls outside the period scheme are
/// ignored; unknown regions are an error.
pub fn compute_panel(
    md: &Microdata,
    registry: &RegionRegistry,
    scheme: &PeriodScheme,
    rules: &PanelRules,
) -> Result<Panel> {
    scheme.validate()?;
    let unknown = registry.unknown(md.records.iter().map(|r| &r.region_id));
    if !unknown.is_empty() {
        return Err(Error::UnknownRegions(unknown));
    }
    let side = split_assignment(md, rules.split_seed);
    let mut cells: BTreeMap<(usize, Period), (Vec<&MicroRecord>, Vec<bool>)> = BTreeMap::new();
    for (r, &s) in md.records.iter().zip(&side) {
        if let Some(p) = scheme.period_of(r.cohort) {
            let pos = registry.position(&r.region_id).expect("checked above");
            let e = cells.entry((pos, p)).or_default();
            e.0.push(r);
            e.1.push(s);
        }
    }
    let cells: Vec<_> = cells.into_iter().collect();
    let results: Vec<Vec<std::result::Result<RegionalStat, OmittedCell>>> = cells
        .par_iter()
        .map(|((pos, period), (rows, sides))| {
            let region = registry.entries()[*pos].region_id.clone();
            let half_a: Vec<&MicroRecord> = rows.iter().zip(sides).filter(|(_, s)| **s).map(|(r, _)| *r).collect();
            let half_b: Vec<&MicroRecord> = rows.iter().zip(sides).filter(|(_, s)| !**s).map(|(r, _)| *r).collect();
            rules
                .stats
                .iter()
                .map(|&kind| {
                    let omit = |reason: String| OmittedCell {
                        region_id: region.clone(),
                        period: *period,
                        stat_kind: kind,
                        reason,
                    };
                    let (value, n) = cell_statistic(rows, kind, rules.parent).map_err(|e| omit(e.to_string()))?;
                    if n < rules.min_cell {
                        return Err(omit(format!("n = {n} below {}", rules.min_cell)));
                    }
                    let half = |h: &[&MicroRecord]| {
                        cell_statistic(h, kind, rules.parent)
                            .ok()
                            .filter(|&(_, m)| m >= rules.min_half)
                            .map(|(v, _)| v)
                    };
                    let (ha, hb) = match (half(&half_a), half(&half_b)) {
                        (Some(a), Some(b)) => (Some(a), Some(b)),
                        _ => (None, None),
                    };
                    Ok(RegionalStat {
                        region_id: region.clone(),
                        period: *period,
                        stat_kind: kind,
                        value,
                        n,
                        half_a: ha,
                        half_b: hb,
                    })
                })
                .collect()
        })
        .collect();
    let mut panel = Panel::default();
    for r in results.into_iter().flatten() {
        match r {
            Ok(s) => panel.stats.push(s),
            Err(o) => {
                log::debug!("omitting {} {} {}: {}", o.region_id, o.period, o.stat_kind, o.reason);
                panel.omitted.push(o);
            }
        }
    }
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u64, region: &str, cohort: i32, sex: Sex, edu: u8, father: u8, spouse: Option<u64>) -> MicroRecord {
        MicroRecord {
            id,
            region_id: region.into(),
            cohort,
            sex,
            edu_years: edu,
            father_edu_years: Some(father),
            mother_edu_years: Some(father.min(11)),
            spouse_id: spouse,
            leave_home_age: 99,
            edu_completion_age: 18,
        }
    }

    fn singles(n: usize, region: &str, cohort: i32) -> Vec<MicroRecord> {
        (0..n)
            .map(|i| {
                let g = [1, 3, 5, 8, 11, 15, 18];
                row(i as u64 + 1000 * cohort as u64, region, cohort, Sex::Female, g[i % 7], g[(i * 3) % 7], None)
            })
            .collect()
    }

    #[test]
    fn stratum_splits() {
        for (n, sizes) in [(10, (5, 5)), (11, (6, 5))] {
            let md = Microdata::new(singles(n, "r000", 1960));
            let side = split_assignment(&md, 3);
            let a = side.iter().filter(|s| **s).count();
            let (lo, hi) = (a.min(n - a), a.max(n - a));
            assert_eq!((hi, lo), sizes);
        }
        // the coin decides which side is larger
        let md = Microdata::new(singles(11, "r000", 1960));
        let larger: Vec<bool> = (0..20)
            .map(|s| split_assignment(&md, s).iter().filter(|x| **x).count() == 6)
            .collect();
        assert!(larger.iter().any(|b| *b) && larger.iter().any(|b| !*b));
    }

    #[test]
    fn couples_stay_together() {
        let mut rows = Vec::new();
        for i in 0..15u64 {
            rows.push(row(2 * i, "r000", 1960, Sex::Male, 8, 5, Some(2 * i + 1)));
            rows.push(row(2 * i + 1, "r000", 1960, Sex::Female, 11, 8, Some(2 * i)));
        }
        rows.push(row(100, "r000", 1960, Sex::Male, 5, 5, None));
        let md = Microdata::new(rows);
        let side = split_assignment(&md, 9);
        for i in 0..15 {
            assert_eq!(side[2 * i], side[2 * i + 1]);
        }
        let men_a = md.records.iter().zip(&side).filter(|(r, s)| r.sex == Sex::Male && **s).count();
        assert!((men_a as i64 * 2 - 16).abs() <= 1);
        let (a, b) = split_halves(&md, 9);
        assert_eq!(a.len() + b.len(), md.len());
    }

    #[test]
    fn threshold_boundary() {
        let registry = RegionRegistry::synthetic(2);
        let mut rows = singles(49, "r000", 1960);
        rows.extend(singles(51, "r001", 1961));
        let panel = compute_panel(
            &Microdata::new(rows),
            &registry,
            &PeriodScheme::decades(),
            &PanelRules {
                stats: vec![StatKind::Mean],
                ..PanelRules::default()
            },
        )
        .unwrap();
        assert_eq!(panel.stats.len(), 1);
        assert_eq!(panel.stats[0].region_id, RegionId::from("r001"));
        assert_eq!(panel.stats[0].period, Period(1960));
        assert_eq!(panel.omitted.len(), 1);
    }

    #[test]
    fn unknown_regions_listed() {
        let registry = RegionRegistry::synthetic(1);
        let mut rows = singles(3, "r000", 1960);
        rows.extend(singles(2, "nowhere", 1960));
        match compute_panel(&Microdata::new(rows), &registry, &PeriodScheme::decades(), &PanelRules::default()) {
            Err(Error::UnknownRegions(v)) => assert_eq!(v, vec!["nowhere".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn period_schemes() {
        let d = PeriodScheme::Bins { origin: 1900, width: 10 };
        assert_eq!(d.period_of(1969), Some(Period(1960)));
        assert_eq!(d.period_of(1899), Some(Period(1890)));
        let e = PeriodScheme::Explicit {
            bins: vec![PeriodBin { label: 2001, first: 1960, last: 1975 }],
        };
        assert_eq!(e.period_of(1970), Some(Period(2001)));
        assert_eq!(e.period_of(1980), None);
        let bad = PeriodScheme::Explicit {
            bins: vec![PeriodBin { label: 1, first: 1960, last: 1975 }, PeriodBin { label: 2, first: 1970, last: 1980 }],
        };
        assert!(bad.validate().is_err());
    }
}
