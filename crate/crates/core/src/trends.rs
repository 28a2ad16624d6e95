//! Cohort-by-cohort national statistics with three-year smoothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_io::{MicroRecord, Microdata, Sex};
use crate::error::Result;
use crate::estimators::{
    igc, igr, mean_sd_cv, moving_average_3yr, parent_child_vectors, rank_correlation, spousal_correlation, AgeRule,
    ParentVariable,
};
use crate::synth::{observe_microdata, CompletionProfile, ObservationRule};

/// Statistics for one birth cohort. Missing values are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub cohort: i32,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub cv: f64,
    pub igc: f64,
    pub igr: f64,
    pub rank: f64,
    pub am: f64,
    pub sd_ma3: f64,
    pub cv_ma3: f64,
    pub igc_ma3: f64,
    pub igr_ma3: f64,
    pub am_ma3: f64,
}

pub const TREND_HEADER: [&str; 14] = [
    "cohort", "n", "mean", "sd", "cv", "igc", "igr", "rank", "am", "sd_ma3", "cv_ma3", "igc_ma3", "igr_ma3", "am_ma3",
];

/// Per-cohort statistics of `md` observed under `rule`.
///
/// With `sex` set only that sex enters the schooling and mobility columns;
/// sorting is always computed on couples whose husband and wife were both
/// observed.
pub fn national_trends(
    md: &Microdata,
    rule: &ObservationRule,
    profile: &CompletionProfile,
    parent: ParentVariable,
    sex: Option<Sex>,
) -> Result<Vec<TrendRow>> {
    let observed = observe_microdata(md, rule, profile)?;
    let mut by_cohort: BTreeMap<i32, Vec<&MicroRecord>> = BTreeMap::new();
    for r in observed.records.iter().filter(|r| sex.is_none_or(|s| r.sex == s)) {
        by_cohort.entry(r.cohort).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(by_cohort.len());
    for (&cohort, recs) in &by_cohort {
        let edu: Vec<f64> = recs.iter().map(|r| r.edu_years as f64).collect();
        let (mean, sd, cv) = mean_sd_cv(&edu).map_or((f64::NAN, f64::NAN, f64::NAN), |d| (d.mean, d.sd, d.cv));
        let (c, p) = parent_child_vectors(recs.iter().copied(), parent);
        let am = spousal_correlation(&observed, &AgeRule::for_cohort(cohort, rule.measure_age as i32))
            .map_or(f64::NAN, |s| s.value);
        rows.push(TrendRow {
            cohort,
            n: recs.len(),
            mean,
            sd,
            cv,
            igc: igc(&c, &p).map_or(f64::NAN, |s| s.value),
            igr: igr(&c, &p).map_or(f64::NAN, |s| s.value),
            rank: rank_correlation(&c, &p).map_or(f64::NAN, |s| s.value),
            am,
            sd_ma3: f64::NAN,
            cv_ma3: f64::NAN,
            igc_ma3: f64::NAN,
            igr_ma3: f64::NAN,
            am_ma3: f64::NAN,
        });
    }
    smooth(&mut rows, |r| r.sd, |r, v| r.sd_ma3 = v);
    smooth(&mut rows, |r| r.cv, |r, v| r.cv_ma3 = v);
    smooth(&mut rows, |r| r.igc, |r, v| r.igc_ma3 = v);
    smooth(&mut rows, |r| r.igr, |r, v| r.igr_ma3 = v);
    smooth(&mut rows, |r| r.am, |r, v| r.am_ma3 = v);
    Ok(rows)
}

fn smooth(rows: &mut [TrendRow], get: impl Fn(&TrendRow) -> f64, set: impl Fn(&mut TrendRow, f64)) {
    let series: BTreeMap<i32, f64> = rows
        .iter()
        .filter(|r| get(r).is_finite())
        .map(|r| (r.cohort, get(r)))
        .collect();
    let ma = moving_average_3yr(&series);
    for r in rows.iter_mut() {
        if let Some(&v) = ma.get(&r.cohort) {
            set(r, v);
        }
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn trends_to_csv(rows: &[TrendRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TREND_HEADER).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.cohort.to_string(), r.n.to_string()];
        rec.extend(
            [
                r.mean, r.sd, r.cv, r.igc, r.igr, r.rank, r.am, r.sd_ma3, r.cv_ma3, r.igc_ma3, r.igr_ma3, r.am_ma3,
            ]
            .map(fmt),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::synth::{generate_population, BlockModel, ModelSource, PopulationConfig};

    fn md() -> Microdata {
        let params = ModelParams::new(0.6, 0.5, 4.0, 9.0).unwrap();
        let cfg = PopulationConfig::new(
            vec!["a".into()],
            (1960, 1964),
            400,
            ModelSource::Shared(BlockModel::new(params, 16.0)),
            3,
        );
        generate_population(&cfg).unwrap().to_microdata()
    }

    #[test]
    fn universal_coresidence_tables_match() {
        let md = md();
        let p = CompletionProfile::default();
        let all = national_trends(&md, &ObservationRule::at_age(30), &p, ParentVariable::Father, None).unwrap();
        let dep =
            national_trends(&md, &ObservationRule::at_age(30).coresident(), &p, ParentVariable::Father, None).unwrap();
        assert_eq!(trends_to_csv(&all), trends_to_csv(&dep));
        assert_eq!(all.len(), 5);
        assert!(all.iter().all(|r| r.am > 0.3 && r.igc > 0.3));
    }

    #[test]
    fn sex_split_pools_means() {
        let md = md();
        let p = CompletionProfile::default();
        let rule = ObservationRule::at_age(30);
        let all = national_trends(&md, &rule, &p, ParentVariable::Father, None).unwrap();
        let m = national_trends(&md, &rule, &p, ParentVariable::Father, Some(Sex::Male)).unwrap();
        let f = national_trends(&md, &rule, &p, ParentVariable::Father, Some(Sex::Female)).unwrap();
        for ((a, m), f) in all.iter().zip(&m).zip(&f) {
            let pooled = (m.mean * m.n as f64 + f.mean * f.n as f64) / (m.n + f.n) as f64;
            assert!((pooled - a.mean).abs() < 1e-12);
        }
    }
}
