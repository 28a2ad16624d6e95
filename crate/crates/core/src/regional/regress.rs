//! Regional regressions: OLS and split-sample IV, in levels or first
//! differences, with period fixed effects.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::types::{Period, RegionalStat, StatKind};
use crate::data_io::RegionId;
use crate::error::{Error, Result};
use crate::linalg::{self, design};

/// A regressor: a statistic, optionally taken from the previous period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regressor {
    pub stat: StatKind,
    #[serde(default)]
    pub lag: bool,
}

impl Regressor {
    pub fn current(stat: StatKind) -> Self {
        Regressor { stat, lag: false }
    }

    pub fn lagged(stat: StatKind) -> Self {
        Regressor { stat, lag: true }
    }

    pub fn name(&self) -> String {
        if self.lag {
            format!("L.{}", self.stat)
        } else {
            self.stat.to_string()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    #[default]
    Levels,
    FirstDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEffects {
    None,
    #[default]
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Ols,
    SplitIv,
}

/// Declarative regression over a regional panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    #[serde(default)]
    pub name: String,
    pub dependent: StatKind,
    pub regressors: Vec<Regressor>,
    #[serde(default)]
    pub design: Design,
    #[serde(default)]
    pub fixed_effects: FixedEffects,
    #[serde(default)]
    pub estimator: Estimator,
    /// Regressors replaced by their half-A value and instrumented by the
    /// half-B twin. Empty under `split_iv` means all of them.
    #[serde(default)]
    pub instrumented: Vec<Regressor>,
}

impl RegressionSpec {
    pub fn ols(dependent: StatKind, regressors: &[Regressor]) -> Self {
        RegressionSpec {
            name: String::new(),
            dependent,
            regressors: regressors.to_vec(),
            design: Design::Levels,
            fixed_effects: FixedEffects::Time,
            estimator: Estimator::Ols,
            instrumented: Vec::new(),
        }
    }

    pub fn split_iv(dependent: StatKind, regressors: &[Regressor]) -> Self {
        RegressionSpec {
            estimator: Estimator::SplitIv,
            ..Self::ols(dependent, regressors)
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn differenced(mut self) -> Self {
        self.design = Design::FirstDifference;
        self
    }

    pub fn without_fixed_effects(mut self) -> Self {
        self.fixed_effects = FixedEffects::None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(Error::InvalidSpec("at least one regressor is required".into()));
        }
        let distinct: BTreeSet<_> = self.regressors.iter().collect();
        if distinct.len() != self.regressors.len() {
            return Err(Error::InvalidSpec("duplicate regressor".into()));
        }
        if let Some(r) = self.instrumented.iter().find(|r| !self.regressors.contains(r)) {
            return Err(Error::InvalidSpec(format!("instrumented {} is not a regressor", r.name())));
        }
        if self.estimator == Estimator::Ols && !self.instrumented.is_empty() {
            return Err(Error::InvalidSpec("ols takes no instrumented regressors".into()));
        }
        Ok(())
    }

    /// Regressors actually instrumented.
    pub fn endogenous(&self) -> Vec<Regressor> {
        match self.estimator {
            Estimator::Ols => Vec::new(),
            Estimator::SplitIv if self.instrumented.is_empty() => self.regressors.clone(),
            Estimator::SplitIv => self.instrumented.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    /// HC1 robust standard error.
    pub se: f64,
    /// `estimate * sd_x / sd_y` on the estimation sample.
    pub std_beta: f64,
    /// Standard deviation of the regressor as entered (before demeaning).
    pub sd_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub name: String,
    /// Coefficient on the regressor's own half-B twin.
    pub slope: f64,
    pub se: f64,
    /// Squared robust t statistic of the twin.
    pub f_stat: f64,
    pub n: usize,
    /// F below 4.
    pub weak: bool,
    /// Fewer than 10 cells.
    pub low_power: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub spec: RegressionSpec,
    pub n: usize,
    pub coefficients: Vec<Coefficient>,
    /// Overall R-squared, OLS only.
    pub r2: Option<f64>,
    pub sd_y: f64,
    pub first_stage: Vec<FirstStage>,
    /// (region, period) of each observation used.
    pub sample: Vec<(RegionId, Period)>,
    pub warnings: Vec<String>,
}

impl RegressionResult {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, r: &Regressor) -> f64 {
        self.coef(&r.name()).map_or(f64::NAN, |c| c.estimate)
    }

    /// Plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let title = if self.spec.name.is_empty() {
            self.spec.dependent.to_string()
        } else {
            format!("{} ({})", self.spec.name, self.spec.dependent)
        };
        let _ = writeln!(
            s,
            "{title}: {:?}, {:?}, fixed effects {:?}, n = {}",
            self.spec.estimator, self.spec.design, self.spec.fixed_effects, self.n
        );
        for c in &self.coefficients {
            let _ = writeln!(s, "  {:<16} {:>9.4} ({:.4}) [{:.3}]", c.name, c.estimate, c.se, c.std_beta);
        }
        if let Some(r2) = self.r2 {
            let _ = writeln!(s, "  R2 {r2:.3}");
        }
        for f in &self.first_stage {
            let _ = writeln!(s, "  first stage {:<10} {:.3} ({:.3}) F = {:.1}", f.name, f.slope, f.se, f.f_stat);
        }
        for w in &self.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
enum Field {
    Value,
    HalfA,
    HalfB,
}

/// Panel cells indexed for lookup.
struct Index<'a> {
    cells: HashMap<(&'a RegionId, Period, StatKind), &'a RegionalStat>,
    periods: Vec<Period>,
    regions: BTreeSet<&'a RegionId>,
}

impl<'a> Index<'a> {
    fn new(panel: &'a [RegionalStat]) -> Self {
        Index {
            cells: panel.iter().map(|s| ((&s.region_id, s.period, s.stat_kind), s)).collect(),
            periods: panel.iter().map(|s| s.period).collect::<BTreeSet<_>>().into_iter().collect(),
            regions: panel.iter().map(|s| &s.region_id).collect(),
        }
    }

    fn get(&self, region: &RegionId, t: usize, stat: StatKind, field: Field) -> Option<f64> {
        let s = self.cells.get(&(region, self.periods[t], stat))?;
        match field {
            Field::Value => Some(s.value),
            Field::HalfA => s.half_a,
            Field::HalfB => s.half_b,
        }
    }

    /// Regressor value at period index `t`, honouring the lag.
    fn regressor(&self, region: &RegionId, t: usize, r: &Regressor, field: Field) -> Option<f64> {
        let t = if r.lag { t.checked_sub(1)? } else { t };
        self.get(region, t, r.stat, field)
    }

    /// Level, or difference with the previous period, of a lookup.
    fn design_value(&self, design: Design, t: usize, f: impl Fn(usize) -> Option<f64>) -> Option<f64> {
        match design {
            Design::Levels => f(t),
            Design::FirstDifference => Some(f(t)? - f(t.checked_sub(1)?)?),
        }
    }
}

struct Assembled {
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    period: Vec<usize>,
    sample: Vec<(RegionId, Period)>,
}

fn assemble(spec: &RegressionSpec, panel: &[RegionalStat]) -> Assembled {
    let idx = Index::new(panel);
    let endo = spec.endogenous();
    let k = spec.regressors.len();
    let mut out = Assembled {
        y: Vec::new(),
        x: vec![Vec::new(); k],
        z: vec![Vec::new(); k],
        period: Vec::new(),
        sample: Vec::new(),
    };
    for region in &idx.regions {
        'periods: for t in 0..idx.periods.len() {
            let Some(y) = idx.design_value(spec.design, t, |s| idx.get(region, s, spec.dependent, Field::Value)) else {
                continue;
            };
            let mut xs = Vec::with_capacity(k);
            let mut zs = Vec::with_capacity(k);
            for r in &spec.regressors {
                let (fx, fz) = if endo.contains(r) {
                    (Field::HalfA, Field::HalfB)
                } else {
                    (Field::Value, Field::Value)
                };
                let x = idx.design_value(spec.design, t, |s| idx.regressor(region, s, r, fx));
                let z = idx.design_value(spec.design, t, |s| idx.regressor(region, s, r, fz));
                match (x, z) {
                    (Some(x), Some(z)) => {
                        xs.push(x);
                        zs.push(z);
                    }
                    _ => continue 'periods,
                }
            }
            out.y.push(y);
            for j in 0..k {
                out.x[j].push(xs[j]);
                out.z[j].push(zs[j]);
            }
            out.period.push(t);
            out.sample.push(((*region).clone(), idx.periods[t]));
        }
    }
    out
}

fn sd(v: &[f64]) -> f64 {
    crate::estimators::mean_sd(v).map_or(f64::NAN, |(_, s)| s)
}

/// Subtract group means in place; returns the number of groups.
fn demean(v: &mut [f64], groups: &[usize]) -> usize {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (x, g) in v.iter().zip(groups) {
        let e = acc.entry(*g).or_default();
        e.0 += x;
        e.1 += 1;
    }
    for (x, g) in v.iter_mut().zip(groups) {
        let (s, n) = acc[g];
        *x -= s / n as f64;
    }
    acc.len()
}

/// Run a regression on a panel.
///
/// Period effects are absorbed by demeaning within period in every stage.
/// Under split IV each instrumented regressor enters with its half-A value
/// and is instrumented by its half-B value; other regressors and the
/// dependent variable use full-sample values.
pub fn regress(spec: &RegressionSpec, panel: &[RegionalStat]) -> Result<RegressionResult> {
    spec.validate()?;
    let data = assemble(spec, panel);
    let n = data.y.len();
    let k = spec.regressors.len();
    let mut names: Vec<String> = spec.regressors.iter().map(Regressor::name).collect();
    let endo = spec.endogenous();
    let mut inames: Vec<String> = spec
        .regressors
        .iter()
        .map(|r| if endo.contains(r) { format!("{}@b", r.name()) } else { r.name() })
        .collect();

    let sd_y = sd(&data.y);
    let sd_x: Vec<f64> = data.x.iter().map(|c| sd(c)).collect();
    let y_raw = data.y.clone();

    let (mut y, mut xc, mut zc) = (data.y, data.x, data.z);
    let absorbed = match spec.fixed_effects {
        FixedEffects::Time => {
            let g = demean(&mut y, &data.period);
            for c in xc.iter_mut().chain(zc.iter_mut()) {
                demean(c, &data.period);
            }
            g
        }
        FixedEffects::None => {
            xc.insert(0, vec![1.0; n]);
            zc.insert(0, vec![1.0; n]);
            names.insert(0, "const".into());
            inames.insert(0, "const".into());
            0
        }
    };
    let offset = xc.len() - k;
    let (x, z, yv) = (design(&xc), design(&zc), DVector::from_vec(y.clone()));

    let fit = match spec.estimator {
        Estimator::Ols => linalg::ols(&x, &yv, &names, absorbed)?,
        Estimator::SplitIv => linalg::tsls(&x, &z, &yv, &names, &inames, absorbed)?,
    };

    let mut warnings = Vec::new();
    let mut first_stage = Vec::new();
    for (j, r) in spec.regressors.iter().enumerate() {
        if !endo.contains(r) {
            continue;
        }
        let col = offset + j;
        let target = DVector::from_vec(xc[col].clone());
        let fs = linalg::ols(&z, &target, &inames, absorbed)?;
        let (slope, se) = (fs.coef[col], fs.se[col]);
        let f_stat = if se > 0.0 { (slope / se).powi(2) } else { f64::INFINITY };
        let stage = FirstStage {
            name: r.name(),
            slope,
            se,
            f_stat,
            n,
            weak: f_stat < 4.0,
            low_power: n < 10,
        };
        if stage.weak {
            warnings.push(format!("weak first stage for {} (F = {:.2})", stage.name, f_stat));
        }
        if stage.low_power {
            warnings.push(format!("only {n} cells in the first stage for {}", stage.name));
        }
        first_stage.push(stage);
    }

    let r2 = (spec.estimator == Estimator::Ols).then(|| {
        let m = y_raw.iter().sum::<f64>() / n as f64;
        let sst: f64 = y_raw.iter().map(|v| (v - m) * (v - m)).sum();
        let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
        1.0 - ssr / sst
    });

    let coefficients = (0..xc.len())
        .map(|c| {
            let sdx = if c >= offset { sd_x[c - offset] } else { 0.0 };
            Coefficient {
                name: names[c].clone(),
                estimate: fit.coef[c],
                se: fit.se[c],
                std_beta: fit.coef[c] * sdx / sd_y,
                sd_x: sdx,
            }
        })
        .collect();

    Ok(RegressionResult {
        spec: spec.clone(),
        n,
        coefficients,
        r2,
        sd_y,
        first_stage,
        sample: data.sample,
        warnings,
    })
}

/// Reliability of a statistic: slope of half-A values on half-B values
/// across cells, with period effects.
pub fn first_stage(stat: StatKind, panel: &[RegionalStat]) -> Result<FirstStage> {
    let cells: Vec<&RegionalStat> = panel.iter().filter(|s| s.stat_kind == stat && s.halves().is_some()).collect();
    let mut a: Vec<f64> = cells.iter().map(|s| s.half_a.unwrap_or_default()).collect();
    let mut b: Vec<f64> = cells.iter().map(|s| s.half_b.unwrap_or_default()).collect();
    let periods: Vec<Period> = cells.iter().map(|s| s.period).collect::<BTreeSet<_>>().into_iter().collect();
    let groups: Vec<usize> = cells
        .iter()
        .map(|s| periods.binary_search(&s.period).expect("collected above"))
        .collect();
    let g = demean(&mut a, &groups);
    demean(&mut b, &groups);
    let n = cells.len();
    let fit = linalg::ols(&design(&[b]), &DVector::from_vec(a), &[format!("{stat}@b")], g)?;
    let (slope, se) = (fit.coef[0], fit.se[0]);
    let f_stat = if se > 0.0 { (slope / se).powi(2) } else { f64::INFINITY };
    Ok(FirstStage {
        name: stat.to_string(),
        slope,
        se,
        f_stat,
        n,
        weak: f_stat < 4.0,
        low_power: n < 10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(region: usize, t: i32, kind: StatKind, v: f64, a: f64, b: f64) -> RegionalStat {
        RegionalStat {
            region_id: RegionId::new(format!("r{region:03}")),
            period: Period(t),
            stat_kind: kind,
            value: v,
            n: 100,
            half_a: Some(a),
            half_b: Some(b),
        }
    }

    fn noiseless(beta: f64) -> Vec<RegionalStat> {
        let mut p = Vec::new();
        for r in 0..30 {
            for (ti, t) in [1950, 1960, 1970].into_iter().enumerate() {
                let x = ((r * 7 + ti * 3) % 11) as f64 * 0.1 + 0.01 * (r * r) as f64;
                let y = 0.3 * ti as f64 + beta * x;
                p.push(stat(r, t, StatKind::Sd, x, x, x));
                p.push(stat(r, t, StatKind::Igc, y, y, y));
            }
        }
        p
    }

    #[test]
    fn noiseless_recovers_beta() {
        let panel = noiseless(0.5);
        let sd = Regressor::current(StatKind::Sd);
        for spec in [
            RegressionSpec::ols(StatKind::Igc, &[sd]),
            RegressionSpec::split_iv(StatKind::Igc, &[sd]),
            RegressionSpec::ols(StatKind::Igc, &[sd]).differenced(),
        ] {
            let res = regress(&spec, &panel).unwrap();
            assert!((res.estimate(&sd) - 0.5).abs() < 1e-10, "{spec:?}");
        }
        let res = regress(&RegressionSpec::ols(StatKind::Igc, &[sd]), &panel).unwrap();
        assert!((res.r2.unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(res.n, 90);
        let fd = regress(&RegressionSpec::ols(StatKind::Igc, &[sd]).differenced(), &panel).unwrap();
        assert_eq!(fd.n, 60);
    }

    #[test]
    fn lag_uses_previous_period() {
        let panel = noiseless(0.5);
        let spec = RegressionSpec::ols(StatKind::Sd, &[Regressor::lagged(StatKind::Sd)]);
        let res = regress(&spec, &panel).unwrap();
        assert_eq!(res.n, 60);
        assert!(res.sample.iter().all(|(_, p)| p.0 > 1950));
    }

    #[test]
    fn standardized_beta_identity() {
        let mut panel = noiseless(0.5);
        for (i, s) in panel.iter_mut().enumerate() {
            if s.stat_kind == StatKind::Igc {
                s.value += ((i * 31) % 7) as f64 * 0.01;
            }
        }
        let sd = Regressor::current(StatKind::Sd);
        let res = regress(&RegressionSpec::ols(StatKind::Igc, &[sd]), &panel).unwrap();
        let c = res.coef("sd").unwrap();
        assert_eq!(c.std_beta, c.estimate * c.sd_x / res.sd_y);
    }

    #[test]
    fn collinear_regressors_named() {
        let mut panel = noiseless(0.5);
        let copies: Vec<RegionalStat> = panel
            .iter()
            .filter(|s| s.stat_kind == StatKind::Sd)
            .map(|s| RegionalStat {
                stat_kind: StatKind::Cv,
                value: 2.0 * s.value,
                ..s.clone()
            })
            .collect();
        panel.extend(copies);
        let spec = RegressionSpec::ols(StatKind::Igc, &[Regressor::current(StatKind::Sd), Regressor::current(StatKind::Cv)]);
        match regress(&spec, &panel) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["sd".to_string(), "cv".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        let sd = Regressor::current(StatKind::Sd);
        let mut spec = RegressionSpec::split_iv(StatKind::Igc, &[sd]);
        spec.instrumented = vec![Regressor::current(StatKind::Am)];
        assert!(matches!(regress(&spec, &[]), Err(Error::InvalidSpec(_))));
        assert!(RegressionSpec::ols(StatKind::Igc, &[]).validate().is_err());
    }

    #[test]
    fn duplicate_halves_give_unit_first_stage() {
        let fs = first_stage(StatKind::Sd, &noiseless(0.5)).unwrap();
        assert!((fs.slope - 1.0).abs() < 1e-12);
        assert!(!fs.low_power);
    }
}
