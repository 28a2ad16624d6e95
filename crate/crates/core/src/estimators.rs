//! Distributional statistics: dispersion, intergenerational correlation and
//! regression coefficient, rank correlation, spousal correlation and
//! cohort smoothing.
//!
//! Correlations carry delete-one jackknife standard errors; means and
//! slopes carry analytic ones.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data_io::{MicroRecord, Microdata};
use crate::error::{Error, Result};

/// A point estimate with its sample size and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub value: f64,
    pub n: usize,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub cv: f64,
    pub mean_se: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean, standard deviation and coefficient of variation.
pub fn mean_sd_cv(x: &[f64]) -> Result<Dispersion> {
    let (mean, sd) = mean_sd(x)?;
    if mean == 0.0 {
        return Err(Error::UndefinedCv);
    }
    Ok(Dispersion {
        n: x.len(),
        mean,
        sd,
        cv: sd / mean,
        mean_se: sd / (x.len() as f64).sqrt(),
    })
}

/// Mean and sample standard deviation.
pub fn mean_sd(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: x.len(),
        });
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((m, (ss / (x.len() - 1) as f64).sqrt()))
}

/// Centered second moments of a paired sample.
#[derive(Debug, Clone)]
struct Centered {
    n: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Centered {
    fn new(y: &[f64], x: &[f64]) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: x.len(),
            });
        }
        if x.len() < 3 {
            return Err(Error::TooFewObservations {
                needed: 3,
                got: x.len(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        let (mx, my) = (mean(x), mean(y));
        let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
        let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
        let sxx = dx.iter().map(|d| d * d).sum::<f64>();
        let syy = dy.iter().map(|d| d * d).sum::<f64>();
        let sxy = dx.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>();
        if sxx <= 0.0 {
            return Err(Error::DegenerateVariance("parent"));
        }
        if syy <= 0.0 {
            return Err(Error::DegenerateVariance("child"));
        }
        Ok(Centered {
            n: x.len(),
            dx,
            dy,
            sxx,
            syy,
            sxy,
        })
    }

    fn correlation(&self) -> f64 {
        (self.sxy / (self.sxx.sqrt() * self.syy.sqrt())).clamp(-1.0, 1.0)
    }

    /// Delete-one jackknife SE of the correlation, via rank-one downdates of
    /// the centered sums.
    fn jackknife_correlation_se(&self) -> f64 {
        let n = self.n as f64;
        let k = n / (n - 1.0);
        let reps: Vec<f64> = self
            .dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| {
                let sxx = self.sxx - a * a * k;
                let syy = self.syy - b * b * k;
                let sxy = self.sxy - a * b * k;
                sxy / (sxx * syy).sqrt()
            })
            .filter(|r| r.is_finite())
            .collect();
        jackknife_se(&reps)
    }
}

fn jackknife_se(reps: &[f64]) -> f64 {
    if reps.len() < 2 {
        return 0.0;
    }
    let n = reps.len() as f64;
    let m = mean(reps);
    ((n - 1.0) / n * reps.iter().map(|r| (r - m) * (r - m)).sum::<f64>()).sqrt()
}

/// Pearson correlation between child and parent schooling.
pub fn igc(child: &[f64], parent: &[f64]) -> Result<StatResult> {
    let c = Centered::new(child, parent)?;
    Ok(StatResult {
        value: c.correlation(),
        n: c.n,
        se: c.jackknife_correlation_se(),
    })
}

/// OLS slope of child on parent schooling, with its conventional SE.
///
/// Shares its centered sums with [`igc`], so
/// `igr == igc * sd(child) / sd(parent)` up to rounding.
pub fn igr(child: &[f64], parent: &[f64]) -> Result<StatResult> {
    let c = Centered::new(child, parent)?;
    let slope = c.sxy / c.sxx;
    let rss = (c.syy - slope * c.sxy).max(0.0);
    let se = if c.n > 2 {
        (rss / (c.n - 2) as f64 / c.sxx).sqrt()
    } else {
        0.0
    };
    Ok(StatResult {
        value: slope,
        n: c.n,
        se,
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1)..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman correlation with midrank tie handling.
///
/// The jackknife holds the full-sample ranks fixed and deletes one pair at
/// a time, which keeps it linear in `n`.
pub fn rank_correlation(child: &[f64], parent: &[f64]) -> Result<StatResult> {
    if child.len() != parent.len() {
        return Err(Error::LengthMismatch {
            left: child.len(),
            right: parent.len(),
        });
    }
    if child.iter().chain(parent).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample"));
    }
    let c = Centered::new(&midranks(child), &midranks(parent))?;
    Ok(StatResult {
        value: c.correlation(),
        n: c.n,
        se: c.jackknife_correlation_se(),
    })
}

/// Order-free correlation of paired values: every pair enters in both
/// orientations, so swapping the members of any pair leaves the result
/// bit-identical.
pub fn symmetric_correlation(pairs: &[(f64, f64)]) -> Result<StatResult> {
    if pairs.len() < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            got: pairs.len(),
        });
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::NonFinite("pairs"));
    }
    let n = pairs.len();
    let m = pairs.iter().map(|(a, b)| a + b).sum::<f64>() / (2 * n) as f64;
    let terms: Vec<(f64, f64, f64)> = pairs
        .iter()
        .map(|(a, b)| {
            let (da, db) = (a - m, b - m);
            (da * da + db * db, 2.0 * da * db, da + db)
        })
        .collect();
    let ss: f64 = terms.iter().map(|t| t.0).sum();
    let cc: f64 = terms.iter().map(|t| t.1).sum();
    if ss <= 0.0 {
        return Err(Error::DegenerateVariance("spouses"));
    }
    let rest = (2 * n - 2) as f64;
    let reps: Vec<f64> = terms
        .iter()
        .map(|&(s, c, d)| {
            let adj = d * d / rest;
            (cc - c - adj) / (ss - s - adj)
        })
        .filter(|r| r.is_finite())
        .collect();
    Ok(StatResult {
        value: (cc / ss).clamp(-1.0, 1.0),
        n,
        se: jackknife_se(&reps),
    })
}

/// Which partners count toward a spousal correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeRule {
    /// A couple qualifies when at least one partner has this age ...
    pub at_least_one_aged: i32,
    /// ... in this survey year.
    pub survey_year: i32,
}

impl AgeRule {
    /// Couples in which a partner born in `cohort` is aged `age`.
    pub fn for_cohort(cohort: i32, age: i32) -> Self {
        AgeRule {
            at_least_one_aged: age,
            survey_year: cohort + age,
        }
    }

    fn qualifies(&self, a: &MicroRecord, b: &MicroRecord) -> bool {
        a.age_in(self.survey_year) == self.at_least_one_aged
            || b.age_in(self.survey_year) == self.at_least_one_aged
    }
}

/// Couples in the table as index pairs `(lower id, higher id)`, each once,
/// sorted by the lower id. Links pointing outside the table are ignored;
/// one-sided links are an error.
pub fn couples(md: &Microdata) -> Result<Vec<(usize, usize)>> {
    let index: HashMap<u64, usize> = md.records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    let mut out = Vec::new();
    for (i, r) in md.records.iter().enumerate() {
        let Some(sid) = r.spouse_id else { continue };
        let Some(&j) = index.get(&sid) else { continue };
        if md.records[j].spouse_id != Some(r.id) {
            return Err(Error::param(
                "spouse_id",
                format!("asymmetric spouse link {} -> {}", r.id, sid),
            ));
        }
        if r.id < sid {
            out.push((i, j));
        }
    }
    out.sort_by_key(|&(i, _)| md.records[i].id);
    Ok(out)
}

/// Spousal correlation in schooling over couples satisfying `rule`.
pub fn spousal_correlation(md: &Microdata, rule: &AgeRule) -> Result<StatResult> {
    let pairs: Vec<(f64, f64)> = couples(md)?
        .into_iter()
        .filter(|&(i, j)| rule.qualifies(&md.records[i], &md.records[j]))
        .map(|(i, j)| (md.records[i].edu_years as f64, md.records[j].edu_years as f64))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptySample(format!(
            "no couples with a partner aged {} in {}",
            rule.at_least_one_aged, rule.survey_year
        )));
    }
    symmetric_correlation(&pairs)
}

/// Parent variable used for intergenerational statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentVariable {
    #[default]
    Father,
    Mother,
    MaxOfParents,
}

impl ParentVariable {
    pub fn of(self, r: &MicroRecord) -> Option<u8> {
        match self {
            ParentVariable::Father => r.father_edu_years,
            ParentVariable::Mother => r.mother_edu_years,
            ParentVariable::MaxOfParents => match (r.father_edu_years, r.mother_edu_years) {
                (Some(f), Some(m)) => Some(f.max(m)),
                (f, m) => f.or(m),
            },
        }
    }
}

/// `(child, parent)` schooling vectors over rows with a known parent value.
pub fn parent_child_vectors<'a>(
    records: impl IntoIterator<Item = &'a MicroRecord>,
    parent: ParentVariable,
) -> (Vec<f64>, Vec<f64>) {
    records
        .into_iter()
        .filter_map(|r| parent.of(r).map(|p| (r.edu_years as f64, p as f64)))
        .unzip()
}

/// Centered three-cohort moving average; boundary cohorts average the
/// neighbours that exist.
pub fn moving_average_3yr(series: &BTreeMap<i32, f64>) -> BTreeMap<i32, f64> {
    series
        .keys()
        .map(|&c| {
            let vals: Vec<f64> = (c - 1..=c + 1).filter_map(|k| series.get(&k).copied()).collect();
            (c, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::Sex;

    #[test]
    fn dispersion_examples() {
        let d = mean_sd_cv(&[10.0, 10.0, 10.0]).unwrap();
        assert_eq!((d.mean, d.sd, d.cv), (10.0, 0.0, 0.0));
        let d = mean_sd_cv(&[8.0, 12.0]).unwrap();
        assert_eq!(d.mean, 10.0);
        assert!((d.sd - 8f64.sqrt()).abs() < 1e-12);
        assert!((d.cv - 8f64.sqrt() / 10.0).abs() < 1e-12);
        assert!(matches!(mean_sd_cv(&[-1.0, 1.0]), Err(Error::UndefinedCv)));
        assert!(mean_sd_cv(&[1.0]).is_err());
    }

    #[test]
    fn identical_vectors_correlate_perfectly() {
        let x = [1.0, 3.0, 5.0, 8.0, 11.0];
        assert!((igc(&x, &x).unwrap().value - 1.0).abs() < 1e-15);
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!((igr(&twice, &x).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_variance_errors() {
        assert!(matches!(
            igc(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]),
            Err(Error::DegenerateVariance("parent"))
        ));
        assert!(matches!(
            igr(&[4.0, 4.0, 4.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateVariance("child"))
        ));
        assert!(igc(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(igc(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn monotone_transform_rank_one() {
        let p = [1.0, 3.0, 5.0, 8.0, 11.0, 15.0, 18.0];
        let c: Vec<f64> = p.iter().map(|v: &f64| v.powi(3) + 2.0).collect();
        assert!((rank_correlation(&c, &p).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moving_average_examples() {
        let s: BTreeMap<i32, f64> = [(1990, 0.3), (1991, 0.6), (1992, 0.3)].into();
        let m = moving_average_3yr(&s);
        assert!((m[&1991] - 0.4).abs() < 1e-12);
        assert!((m[&1990] - 0.45).abs() < 1e-12);
        let flat: BTreeMap<i32, f64> = (1950..1960).map(|c| (c, 0.5)).collect();
        assert_eq!(moving_average_3yr(&flat), flat);
        assert!(moving_average_3yr(&BTreeMap::new()).is_empty());
        // gaps are skipped, not interpolated
        let gap: BTreeMap<i32, f64> = [(1, 1.0), (3, 3.0)].into();
        assert_eq!(moving_average_3yr(&gap), gap);
    }

    fn person(id: u64, spouse: u64, cohort: i32, edu: u8) -> MicroRecord {
        MicroRecord {
            id,
            region_id: "r".into(),
            cohort,
            sex: if id % 2 == 0 { Sex::Male } else { Sex::Female },
            edu_years: edu,
            father_edu_years: None,
            mother_edu_years: None,
            spouse_id: Some(spouse),
            leave_home_age: 99,
            edu_completion_age: 18,
        }
    }

    #[test]
    fn spousal_correlation_identical_couples() {
        let md = Microdata::new(vec![
            person(0, 1, 1960, 5),
            person(1, 0, 1960, 5),
            person(2, 3, 1960, 11),
            person(3, 2, 1961, 11),
            person(4, 5, 1959, 18),
            person(5, 4, 1960, 18),
        ]);
        let r = spousal_correlation(&md, &AgeRule::for_cohort(1960, 35)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert_eq!(r.n, 3);
        assert!(matches!(
            spousal_correlation(&md, &AgeRule::for_cohort(1900, 35)),
            Err(Error::EmptySample(_))
        ));
    }

    #[test]
    fn asymmetric_links_rejected() {
        let md = Microdata::new(vec![person(0, 1, 1960, 5), person(1, 2, 1960, 5), person(2, 1, 1960, 8)]);
        assert!(couples(&md).is_err());
    }

    #[test]
    fn max_of_parents() {
        let mut r = person(0, 1, 1960, 5);
        r.father_edu_years = Some(8);
        r.mother_edu_years = Some(11);
        assert_eq!(ParentVariable::MaxOfParents.of(&r), Some(11));
        r.father_edu_years = None;
        assert_eq!(ParentVariable::MaxOfParents.of(&r), Some(11));
        assert_eq!(ParentVariable::Father.of(&r), None);
    }
}
