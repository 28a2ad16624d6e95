//! The batch commands behind the `mobility-lab` binary.
//!
//! Every command writes into one output directory and records what it wrote
//! in `manifest.json`: a SHA-256 digest per file, the command, the seed and
//! config digest it ran under, and the digests of the files it read. `report`
//! uses the manifest to detect missing, edited or outdated files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checks::{run_all, CheckResult};
use crate::config::{BatteryKind, ChecksMode, ExperimentConfig, Target};
use crate::coresidence::{average_over_periods, bias_by_age, bias_reports_to_csv, hilger_comparison, hilger_to_csv};
use crate::data_io::{atomic_write, panel_from_csv_reader, panel_to_csv_bytes, Microdata, RegionRegistry, Sex};
use crate::error::{Error, Result};
use crate::estimators::ParentVariable;
use crate::model::{simulate_dynamics_with, GenerationMoments};
use crate::regional::{
    compute_panel, gatsby_battery, mediation_battery, persistence_battery, persistence_to_text, regress,
    sorting_battery, Battery, Mediation, PeriodScheme, PersistenceRow, RegionalStat, RegressionResult,
    PERSISTENCE_STATS,
};
use crate::synth::{generate_population, observe_microdata, ObservationRule};
use crate::trends::{national_trends, trends_to_csv, TrendRow};

pub const MANIFEST: &str = "manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A loaded config with the run-time overrides applied.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub config_digest: String,
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
}

impl Run {
    /// Load `path`; `seed` and `out` override the config's values.
    pub fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, base, seed, out).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_text(text: &str, base: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let mut config = ExperimentConfig::from_toml(text)?;
        let seed = seed.unwrap_or(config.seed);
        config.seed = seed;
        let out = out.unwrap_or_else(|| base.join(config.output_dir.clone().unwrap_or_else(|| "out".into())));
        Ok(Run {
            config,
            config_digest: sha256_hex(text.as_bytes()),
            base,
            out,
            seed,
        })
    }
}

/// One file written by a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub sha256: String,
    pub command: String,
    pub seed: u64,
    pub config_digest: String,
    /// Digests of the files read to produce this one.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Seed and config digest of the most recent command.
    pub seed: u64,
    pub config_digest: String,
    pub files: BTreeMap<String, FileRecord>,
    /// Headline numbers by command.
    #[serde(default)]
    pub metrics: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Manifest {
    pub fn read(out: &Path) -> Result<Option<Self>> {
        let path = out.join(MANIFEST);
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

/// What a command wrote, for printing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub lines: Vec<String>,
}

/// Files and numbers produced by one command before they are committed.
struct Session<'a> {
    run: &'a Run,
    command: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: Vec<(String, Vec<u8>)>,
    metrics: BTreeMap<String, f64>,
}

impl<'a> Session<'a> {
    fn new(run: &'a Run, command: &'static str) -> Self {
        Session {
            run,
            command,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    fn read_input(&mut self, name: &str, produced_by: &str) -> Result<Vec<u8>> {
        let path = self.run.out.join(name);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInputs(vec![format!("{name} (run `{produced_by}` first)")]),
            _ => Error::io(&path, e),
        })?;
        self.inputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn microdata(&mut self) -> Result<Microdata> {
        let bytes = self.read_input("microdata.csv", "simulate")?;
        Microdata::from_csv_reader(&bytes[..], "microdata.csv")
    }

    fn output(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.outputs.push((name.into(), bytes));
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.into(), value);
        }
    }

    /// Write the files and update the manifest.
    fn commit(self) -> Result<Outcome> {
        let run = self.run;
        let mut manifest = Manifest::read(&run.out)?.unwrap_or_default();
        manifest.files.retain(|_, f| f.command != self.command);
        let mut lines = vec![
            format!("seed {}", run.seed),
            format!("config sha256 {}", run.config_digest),
        ];
        for (name, bytes) in &self.outputs {
            atomic_write(&run.out.join(name), bytes)?;
            let digest = sha256_hex(bytes);
            lines.push(format!("{name} sha256 {digest}"));
            manifest.files.insert(
                name.clone(),
                FileRecord {
                    sha256: digest,
                    command: self.command.to_string(),
                    seed: run.seed,
                    config_digest: run.config_digest.clone(),
                    inputs: self.inputs.clone(),
                },
            );
        }
        manifest.seed = run.seed;
        manifest.config_digest = run.config_digest.clone();
        manifest.metrics.insert(self.command.to_string(), self.metrics);
        atomic_write(&run.out.join(MANIFEST), &to_json(&manifest)?)?;
        Ok(Outcome { lines })
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

fn first_last(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let finite: Vec<f64> = values.filter(|v| v.is_finite()).collect();
    Some((*finite.first()?, *finite.last()?))
}

/// Closed-form moments, and microdata when the config describes a population.
pub fn cmd_simulate(run: &Run) -> Result<Outcome> {
    let cfg = &run.config;
    if cfg.model.is_none() && cfg.regional_dgp.is_none() {
        return Err(Error::Config("nothing to simulate: add a model or regional_dgp section".into()));
    }
    let mut s = Session::new(run, "simulate");
    if let Some(m) = &cfg.model {
        let moments = simulate_dynamics_with(&m.params()?, &m.feedback, m.initial_variance()?, &m.schedule())?;
        let pairs = |f: fn(&GenerationMoments) -> f64| first_last(moments.iter().map(f));
        for (name, f) in [
            ("variance", (|g: &GenerationMoments| g.variance) as fn(&GenerationMoments) -> f64),
            ("rho", |g| g.rho_used),
            ("slope", |g| g.slope_to_child),
        ] {
            if let Some((a, b)) = pairs(f) {
                s.metric(format!("moments.{name}.first"), a);
                s.metric(format!("moments.{name}.last"), b);
            }
        }
        s.output("moments.csv", csv_of(&moments)?);
    }
    if let Some(pc) = cfg.population_config(&run.base)? {
        let md = generate_population(&pc)?.to_microdata();
        s.metric("microdata.rows", md.len() as f64);
        s.output("microdata.csv", md.to_csv_bytes());
    }
    if let Some(d) = &cfg.regional_dgp {
        let dgp = d.dgp()?;
        let registry = d.registry.load(&run.base)?;
        let truth = dgp.draw_truth(&registry, run.seed)?;
        let pc = dgp.population_config(&registry, &truth, run.seed)?;
        let md = generate_population(&pc)?.to_microdata();
        s.metric("microdata.rows", md.len() as f64);
        s.output("truth.csv", csv_of(&truth)?);
        s.output("microdata.csv", md.to_csv_bytes());
    }
    s.commit()
}

fn trend_metrics(s: &mut Session, stem: &str, rows: &[TrendRow]) {
    for (name, f) in [
        ("sd", (|r: &TrendRow| r.sd) as fn(&TrendRow) -> f64),
        ("igc", |r| r.igc),
        ("igr", |r| r.igr),
        ("am", |r| r.am),
    ] {
        if let Some((a, b)) = first_last(rows.iter().map(f)) {
            s.metric(format!("{stem}.{name}.first"), a);
            s.metric(format!("{stem}.{name}.last"), b);
        }
    }
}

/// National trend tables, one per observation rule (and sex on request).
pub fn cmd_estimate(run: &Run) -> Result<Outcome> {
    let cfg = &run.config;
    if cfg.observation.is_empty() {
        return Err(Error::Config("estimate needs at least one [[observation]] entry".into()));
    }
    let mut s = Session::new(run, "estimate");
    let md = s.microdata()?;
    let profile = cfg.completion_profile();
    for o in &cfg.observation {
        let stem = format!(
            "trends_age{}{}",
            o.measure_age,
            if o.coresident_only { "_coresident" } else { "" }
        );
        let mut variants = vec![(stem.clone(), None)];
        if o.by_sex {
            variants.push((format!("{stem}_male"), Some(Sex::Male)));
            variants.push((format!("{stem}_female"), Some(Sex::Female)));
        }
        for (name, sex) in variants {
            let rows = national_trends(&md, &o.rule(), &profile, ParentVariable::Father, sex)?;
            trend_metrics(&mut s, &name, &rows);
            s.output(format!("{name}.csv"), trends_to_csv(&rows));
        }
    }
    s.commit()
}

/// Coresidence bias by age and the corrected-estimator comparison.
pub fn cmd_bias_lab(run: &Run) -> Result<Outcome> {
    let cfg = &run.config;
    let Some(b) = &cfg.bias_lab else {
        return Err(Error::Config("bias-lab needs a [bias_lab] section".into()));
    };
    let mut s = Session::new(run, "bias-lab");
    let md = s.microdata()?;
    let profile = cfg.completion_profile();
    let reports = bias_by_age(&md, &profile, &b.ages, b.benchmark_age, &b.windows, b.parent)?;
    let abs = average_over_periods(&reports, |r| r.abs_diff_igc);
    for (age, v) in &abs {
        s.metric(format!("bias.abs_diff.age{age}"), *v);
    }
    if let Some((age, v)) = abs.iter().min_by(|a, b| a.1.total_cmp(b.1)) {
        s.metric("bias.min_age", *age as f64);
        s.metric("bias.min_abs_diff", *v);
    }
    let hilger = hilger_comparison(&md, &profile, &b.ages, b.benchmark_age, b.shares, b.parent)?;
    if !hilger.is_empty() {
        let k = hilger.len() as f64;
        let gap = |f: fn(&crate::coresidence::HilgerComparison) -> f64| hilger.iter().map(f).sum::<f64>() / k;
        s.metric("hilger.mean_abs_gap_dependent", gap(|h| (h.igr_dependent - h.igr_benchmark).abs()));
        s.metric("hilger.mean_abs_gap_corrected", gap(|h| (h.igr_corrected - h.igr_benchmark).abs()));
    }
    s.output("bias_by_age.csv", bias_reports_to_csv(&reports));
    s.output("hilger.csv", hilger_to_csv(&hilger));
    s.commit()
}

/// Regional panel with split-half replicates.
pub fn cmd_panel(run: &Run) -> Result<Outcome> {
    let cfg = &run.config;
    let dgp = cfg.regional_dgp.as_ref().map(|d| d.dgp()).transpose()?;
    let Some(section) = cfg.panel.clone().or_else(|| {
        dgp.as_ref()
            .map(|_| toml::from_str("").expect("panel section defaults"))
    }) else {
        return Err(Error::Config("panel needs a [panel] section".into()));
    };
    let registry: RegionRegistry = match (&section.registry, &cfg.population, &cfg.regional_dgp) {
        (Some(r), _, _) => r.load(&run.base)?,
        (None, Some(p), _) => p.registry.load(&run.base)?,
        (None, None, Some(d)) => d.registry.load(&run.base)?,
        (None, None, None) => return Err(Error::Config("panel.registry is required".into())),
    };
    let scheme = match (&section.scheme, &dgp) {
        (Some(s), _) => s.clone(),
        (None, Some(d)) => d.period_scheme(),
        (None, None) => PeriodScheme::decades(),
    };
    let mut s = Session::new(run, "panel");
    let md = s.microdata()?;
    let observed = observe_microdata(&md, &ObservationRule::at_age(section.measure_age), &cfg.completion_profile())?;
    let panel = compute_panel(&observed, &registry, &scheme, &section.rules(run.seed))?;
    s.metric("panel.cells", panel.stats.len() as f64);
    s.metric("panel.omitted", panel.omitted.len() as f64);
    s.output("panel.csv", panel_to_csv_bytes(&panel.stats));
    s.commit()
}

/// Everything `regress` writes to `regressions.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionOutput {
    pub regressions: Vec<RegressionResult>,
    pub persistence: Option<Vec<PersistenceRow>>,
    pub batteries: Vec<Battery>,
    pub mediation: Option<Mediation>,
    pub mediation_changes: Option<Mediation>,
}

/// Configured regressions and batteries on the panel.
pub fn cmd_regress(run: &Run) -> Result<Outcome> {
    let cfg = &run.config;
    if cfg.regressions.is_empty() && cfg.batteries.is_empty() {
        return Err(Error::Config("regress needs [[regressions]] or batteries".into()));
    }
    let mut s = Session::new(run, "regress");
    let bytes = s.read_input("panel.csv", "panel")?;
    let panel: Vec<RegionalStat> = panel_from_csv_reader(&bytes[..], "panel.csv")?;
    let mut out = RegressionOutput {
        regressions: Vec::new(),
        persistence: None,
        batteries: Vec::new(),
        mediation: None,
        mediation_changes: None,
    };
    let mut text = String::new();
    for (i, spec) in cfg.regressions.iter().enumerate() {
        let r = regress(spec, &panel)?;
        let name = if spec.name.is_empty() { format!("reg{}", i + 1) } else { spec.name.clone() };
        for c in &r.coefficients {
            s.metric(format!("{name}.{}", c.name), c.estimate);
        }
        let _ = writeln!(text, "== {name} ==");
        text.push_str(&r.to_text());
        out.regressions.push(r);
    }
    let mut kinds = cfg.batteries.clone();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        match kind {
            BatteryKind::Persistence => {
                let rows = persistence_battery(&panel, &PERSISTENCE_STATS)?;
                for r in &rows {
                    let k = r.stat.as_str();
                    s.metric(format!("persistence.{k}.ols"), r.ols);
                    s.metric(format!("persistence.{k}.ssiv"), r.ssiv);
                    s.metric(format!("persistence.{k}.gap"), r.gap());
                }
                text.push_str("== Persistence ==\n");
                text.push_str(&persistence_to_text(&rows));
                out.persistence = Some(rows);
            }
            BatteryKind::Gatsby | BatteryKind::Sorting => {
                let b = if kind == BatteryKind::Gatsby { gatsby_battery(&panel)? } else { sorting_battery(&panel)? };
                text.push_str(&b.to_text());
                out.batteries.push(b);
            }
            BatteryKind::Mediation => {
                let b = mediation_battery(&panel)?;
                out.mediation = Mediation::from_battery(&b, false);
                out.mediation_changes = Mediation::from_battery(&b, true);
                if let Some(m) = out.mediation {
                    s.metric("mediation.share", m.share);
                    let _ = writeln!(text, "mediated by AM: {:.3}", m.share);
                }
                if let Some(m) = out.mediation_changes {
                    s.metric("mediation.changes.share", m.share);
                }
                text.push_str(&b.to_text());
                out.batteries.push(b);
            }
        }
    }
    s.output("regressions.json", to_json(&out)?);
    s.output("regressions.txt", text.into_bytes());
    s.commit()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileStatus {
    pub name: String,
    pub command: String,
    /// `ok`, or why the file cannot be trusted.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub metric: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub config_digest: String,
    pub files: Vec<FileStatus>,
    pub metrics: BTreeMap<String, f64>,
    pub targets: Vec<TargetResult>,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn problems(&self) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| f.status != "ok")
            .map(|f| format!("{}: {}", f.name, f.status))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("seed {}\nconfig sha256 {}\n\nfiles\n", self.seed, self.config_digest);
        for f in &self.files {
            let _ = writeln!(s, "  {:<32} {:<9} {}", f.name, f.command, f.status);
        }
        s.push_str("\nmetrics\n");
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "  {k:<40} {v:.6}");
        }
        if !self.targets.is_empty() {
            s.push_str("\ntargets\n");
            for t in &self.targets {
                let bound = |b: Option<f64>| b.map_or("-".to_string(), |v| v.to_string());
                let _ = writeln!(
                    s,
                    "  [{}] {} in [{}, {}]: {}",
                    if t.passed { "PASS" } else { "FAIL" },
                    t.metric,
                    bound(t.min),
                    bound(t.max),
                    t.value.map_or("missing".to_string(), |v| format!("{v:.6}"))
                );
            }
        }
        if !self.checks.is_empty() {
            s.push_str("\nchecks\n");
            for c in &self.checks {
                let _ = writeln!(s, "  {}", c.line());
            }
        }
        s
    }
}

fn evaluate(targets: &[Target], metrics: &BTreeMap<String, f64>) -> Vec<TargetResult> {
    targets
        .iter()
        .map(|t| {
            let value = metrics.get(&t.metric).copied();
            let passed = value.is_some_and(|v| t.min.is_none_or(|m| v >= m) && t.max.is_none_or(|m| v <= m));
            TargetResult {
                metric: t.metric.clone(),
                min: t.min,
                max: t.max,
                value,
                passed,
            }
        })
        .collect()
}

/// Status of every file in the manifest. With `current` set, files made
/// under another seed or config are outdated.
pub fn verify(out: &Path, manifest: &Manifest, current: Option<(u64, &str)>) -> Vec<FileStatus> {
    let (seed, digest) = current.unwrap_or((manifest.seed, &manifest.config_digest));
    manifest
        .files
        .iter()
        .map(|(name, rec)| {
            let status = match std::fs::read(out.join(name)) {
                Err(_) => "missing".to_string(),
                Ok(bytes) if sha256_hex(&bytes) != rec.sha256 => "modified since it was written".to_string(),
                Ok(_) => {
                    let changed: Vec<&str> = rec
                        .inputs
                        .iter()
                        .filter(|(input, sha)| manifest.files.get(*input).is_none_or(|f| &f.sha256 != *sha))
                        .map(|(input, _)| input.as_str())
                        .collect();
                    if !changed.is_empty() {
                        format!("stale: {} changed since", changed.join(", "))
                    } else if rec.seed != seed || rec.config_digest != digest {
                        "stale: produced under a different seed or config".to_string()
                    } else {
                        "ok".to_string()
                    }
                }
            };
            FileStatus {
                name: name.clone(),
                command: rec.command.clone(),
                status,
            }
        })
        .collect()
}

/// Consolidated summary of `out`.
///
/// Returns `Ok(None)` when the directory holds no manifest. Problem files
/// are listed in the written report and then returned as an error.
pub fn cmd_report(out: &Path, run: Option<&Run>) -> Result<Option<Report>> {
    let Some(manifest) = Manifest::read(out)? else {
        return Ok(None);
    };
    let current = run.map(|r| (r.seed, r.config_digest.as_str()));
    let files = verify(out, &manifest, current);
    let metrics: BTreeMap<String, f64> = manifest.metrics.values().flatten().map(|(k, v)| (k.clone(), *v)).collect();
    let seed = run.map_or(manifest.seed, |r| r.seed);
    let (checks_mode, targets) = run.map_or((ChecksMode::Full, &[][..]), |r| {
        (r.config.report.checks, &r.config.report.targets[..])
    });
    let checks = match checks_mode {
        ChecksMode::Full => run_all(seed),
        ChecksMode::Skip => Vec::new(),
    };
    let report = Report {
        seed,
        config_digest: run.map_or(manifest.config_digest.clone(), |r| r.config_digest.clone()),
        files,
        targets: evaluate(targets, &metrics),
        metrics,
        checks,
    };
    atomic_write(&out.join(REPORT_JSON), &to_json(&report)?)?;
    atomic_write(&out.join(REPORT_TXT), report.to_text().as_bytes())?;
    let problems = report.problems();
    if !problems.is_empty() {
        return Err(Error::MissingInputs(problems));
    }
    Ok(Some(report))
}
