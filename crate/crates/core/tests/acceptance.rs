//! The twelve acceptance criteria, one PASS/FAIL line each. Every check
//! compares the library with an oracle computed here.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use mobility_lab::calibration::{calibrate_trends, coresidence_population, CoresidenceDesign, TrendTargets};
use mobility_lab::coresidence::{bias_by_age, estimate_rho_hat, hilger_corrected_cef, DependentGroup, HilgerInputs};
use mobility_lab::data_io::{MicroRecord, RegionRegistry};
use mobility_lab::estimators::{igc, igr, rank_correlation, symmetric_correlation, ParentVariable};
use mobility_lab::model::{simulate_dynamics_with, variance_recursion, FeedbackSpec, ModelParams, Schedule};
use mobility_lab::regional::{
    attenuation_experiment, contamination_experiment, gatsby_summary, persistence_battery, regress, AttenuationDesign,
    ContaminationDesign, PanelRules, RegionalDgp, RegressionSpec, Regressor, StatKind, PERSISTENCE_STATS,
};
use mobility_lab::rng::stream;
use mobility_lab::synth::{generate_population, match_latents, simulate_generations};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

const SEED: u64 = 20261015;

type Outcome = (bool, String);

fn ac1_slope_grid() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for lambda in [0.3, 0.5, 0.8] {
        for rho in [0.0, 0.5, 1.0] {
            let p = ModelParams::new(lambda, rho, 1.0, 0.0).unwrap();
            // 500k couples with two children each: 10^6 parent-child pairs
            let g = simulate_generations(&p, &FeedbackSpec::Constant, 1.0, &Schedule::linear(lambda, lambda, 1), 500_000, SEED)
                .unwrap();
            let expected = lambda * (1.0 + rho) / 2.0;
            worst = worst.max((g[0].moments.slope_to_child - expected).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (worst <= 0.005 && secs < 60.0, format!("max |slope error| {worst:.4}, {secs:.1}s"))
}

fn ac2_steady_state() -> Outcome {
    let p = ModelParams::new(0.8, 0.5, 1.0, 0.0).unwrap();
    // oracle: bisection on v - (a v + s) with the map written out here
    let a = 0.8f64 * 0.8 * 1.5 / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1e6f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - (a * mid + 1.0) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let mut v = 0.0;
    for _ in 0..2000 {
        v = variance_recursion(v, &p);
    }
    let closed = p.steady_state_variance().unwrap();
    let rel = |x: f64| ((x - oracle) / oracle).abs();
    let worst = rel(v).max(rel(closed)).max(rel(25.0 / 13.0));
    (worst < 1e-10, format!("iterated {v:.12}, closed {closed:.12}, oracle {oracle:.12}"))
}

fn ac3_matching() -> Outcome {
    let n = 100_000;
    let mut rng = stream(SEED, &[3]);
    let women_dist = Normal::new(1.0, 2.0).unwrap();
    let men: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let women: Vec<f64> = (0..n).map(|_| women_dist.sample(&mut rng)).collect();
    let mut sorted_women = women.clone();
    sorted_women.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    let mut preserved = true;
    for target in [0.0, 0.55, 0.62, 0.66, 1.0] {
        let wife = match_latents(&men, &women, target, &mut rng).unwrap();
        let mut used = wife.clone();
        used.sort_unstable();
        used.dedup();
        let mut wives: Vec<f64> = wife.iter().map(|&j| women[j]).collect();
        worst = worst.max((pearson(&wives, &men) - target).abs());
        wives.sort_by(f64::total_cmp);
        preserved &= used.len() == n && wives == sorted_women;
    }
    (worst <= 0.01 && preserved, format!("max |error| {worst:.4}, marginals preserved {preserved}"))
}

fn ac4_attenuation() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [0.25, 0.40, 0.70, 0.96] {
        let design = AttenuationDesign::new(r);
        let rep = attenuation_experiment(&design, SEED).unwrap();
        // oracle: both estimators recomputed on every replication
        let (mut ols, mut iv) = (0.0, 0.0);
        for k in 0..design.replications {
            let c = cells(&design.panel(SEED, k));
            let y: Vec<f64> = c.values().filter(|s| s.stat_kind == StatKind::Igc).map(|s| s.value).collect();
            let sd: Vec<&_> = c.values().filter(|s| s.stat_kind == StatKind::Sd).collect();
            let (a, b): (Vec<f64>, Vec<f64>) = sd.iter().map(|s| s.halves().unwrap()).unzip();
            let t: Vec<i32> = sd.iter().map(|s| s.period.0).collect();
            ols += fe_iv(&y, &[a.clone()], &[a.clone()], &t)[0];
            iv += fe_iv(&y, &[a], &[b], &t)[0];
        }
        let reps = design.replications as f64;
        let (ols, iv) = (ols / reps, iv / reps);
        let agrees = (ols - rep.mean_ols).abs() < 1e-9 && (iv - rep.mean_ssiv).abs() < 1e-9;
        let ratio = ols / design.beta;
        let in_se = (iv - design.beta).abs() / rep.mean_ssiv_se;
        ok &= agrees && (ratio - r).abs() <= 0.05 && in_se <= 3.0;
        parts.push(format!("r={r}: ols/beta {ratio:.3}, ssiv {iv:.3} ({in_se:.2} se)"));
    }
    (ok, parts.join("; "))
}

fn ac5_persistence() -> Outcome {
    let draw = RegionalDgp::persistent_regions()
        .generate(&RegionRegistry::spanish_default(), &PanelRules::default(), SEED)
        .unwrap();
    let c = cells(&draw.panel.stats);
    let rows = persistence_battery(&draw.panel.stats, &PERSISTENCE_STATS).unwrap();
    let mut gaps = Vec::new();
    let mut agrees = true;
    let mut parts = Vec::new();
    for row in &rows {
        let (ols, iv, _) = persistence(&c, row.stat);
        agrees &= (ols - row.ols).abs() < 1e-9 && (iv - row.ssiv).abs() < 1e-9;
        gaps.push(iv - ols);
        parts.push(format!("{} {ols:.3}->{iv:.3}", row.stat));
    }
    let ordered = gaps.iter().all(|g| *g > 0.0) && gaps[0] < gaps[1] && gaps[1] < gaps[2] && gaps[2] <= gaps[3];
    (agrees && ordered, parts.join(", "))
}

fn ac6_contamination() -> Outcome {
    let design = ContaminationDesign::default();
    let rep = contamination_experiment(&design, SEED).unwrap();
    // oracle on the first replications
    let (p, q) = (Regressor::current(StatKind::FatherSd), Regressor::current(StatKind::Am));
    let spec = RegressionSpec::split_iv(StatKind::Igc, &[p, q]);
    let mut agrees = true;
    for k in 0..5 {
        let panel = design.panel(SEED, k);
        let lib = regress(&spec, &panel).unwrap();
        let o = split_iv(&cells(&panel), StatKind::Igc, &[StatKind::FatherSd, StatKind::Am]);
        agrees &= (lib.estimate(&p) - o[0]).abs() < 1e-9 && (lib.estimate(&q) - o[1]).abs() < 1e-9;
    }
    let signature = rep.ssiv.noisy > rep.ols.noisy && rep.ssiv.precise < rep.ols.precise;
    let within = (rep.ssiv.precise - rep.truth.precise).abs() <= 3.0 * rep.ssiv_se.precise
        && (rep.ssiv.noisy - rep.truth.noisy).abs() <= 3.0 * rep.ssiv_se.noisy;
    (
        agrees && signature && within,
        format!(
            "precise {:.3}->{:.3}, noisy {:.3}->{:.3} (truth {:.1}, {:.1})",
            rep.ols.precise, rep.ssiv.precise, rep.ols.noisy, rep.ssiv.noisy, rep.truth.precise, rep.truth.noisy
        ),
    )
}

/// Groups at parental schooling `p` with dependents at `a + b p` and
/// independents at `a + b p + shift + gamma p`; returns the inputs and the
/// population slope.
fn hilger_case(gamma: f64) -> (HilgerInputs, f64) {
    let (a, b, shift) = (2.0, 0.45, 1.3);
    let parents = [1.0, 3.0, 5.0, 8.0, 11.0, 15.0, 18.0];
    let n_dep = [300usize, 420, 510, 380, 260, 150, 90];
    let n_ind = [80usize, 120, 200, 210, 190, 130, 70];
    let ind_total: usize = n_ind.iter().sum();
    let y_dep: Vec<f64> = parents.iter().map(|p| a + b * p).collect();
    let y_ind: Vec<f64> = parents.iter().map(|p| a + b * p + shift + gamma * p).collect();
    let groups = (0..7)
        .map(|g| DependentGroup {
            parent_edu: parents[g],
            y_dep: y_dep[g],
            n_dep: n_dep[g],
            share: n_ind[g] as f64 / ind_total as f64,
        })
        .collect();
    let y_indep = (0..7).map(|g| y_ind[g] * n_ind[g] as f64).sum::<f64>() / ind_total as f64;
    // full population: every child is a point on its group's mean
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for g in 0..7 {
        xs.extend(std::iter::repeat_n(parents[g], n_dep[g] + n_ind[g]));
        ys.extend(std::iter::repeat_n(y_dep[g], n_dep[g]));
        ys.extend(std::iter::repeat_n(y_ind[g], n_ind[g]));
    }
    let inputs = HilgerInputs {
        groups,
        y_indep,
        n_indep: ind_total,
    };
    (inputs, ols_slope(&ys, &xs))
}

fn ac7_hilger() -> Outcome {
    let corrected = |gamma: f64| {
        let (inputs, truth) = hilger_case(gamma);
        let rho = estimate_rho_hat(&inputs).unwrap();
        hilger_corrected_cef(&inputs, rho).unwrap().igr - truth
    };
    let (exact, biased) = (corrected(0.0), corrected(0.1));
    (
        exact.abs() < 1e-6 && biased.abs() > 1e-3,
        format!("gap {exact:.1e} with parallel trends, residual bias {biased:.4} with gamma = 0.1"),
    )
}

fn ac8_u_shape() -> Outcome {
    let d = CoresidenceDesign::default();
    let pop = generate_population(&coresidence_population(30_000, d.cohorts, SEED).unwrap()).unwrap();
    let md = pop.to_microdata();
    let profile = &pop.completion_profile;
    let reports =
        bias_by_age(&md, profile, &d.ages, d.benchmark_age, std::slice::from_ref(&d.window), ParentVariable::Father)
            .unwrap();
    // oracle for two ages: rebuild each year's samples from the records
    let observed = |r: &MicroRecord, age: u32| profile.attained_at(r.edu_years, r.edu_completion_age, age) as f64;
    let igc_of = |rows: Vec<&MicroRecord>, age: u32| {
        let (c, p): (Vec<f64>, Vec<f64>) = rows
            .into_iter()
            .filter_map(|r| r.father_edu_years.map(|f| (observed(r, age), f as f64)))
            .unzip();
        pearson(&c, &p)
    };
    let mut agrees = true;
    for age in [23u32, 30] {
        let years = d.window.first..=d.window.last;
        let k = years.clone().count() as f64;
        let abs: f64 = years
            .map(|y| {
                let dep = md.iter().filter(|r| r.cohort == y - age as i32 && r.coresident_at(age)).collect();
                let all = md.iter().filter(|r| r.cohort == y - d.benchmark_age as i32).collect();
                (igc_of(dep, age) - igc_of(all, d.benchmark_age)).abs()
            })
            .sum::<f64>()
            / k;
        let lib = reports.iter().find(|r| r.age == age).unwrap().abs_diff_igc;
        agrees &= (abs - lib).abs() < 1e-9;
    }
    let abs = |a: u32| reports.iter().find(|r| r.age == a).unwrap().abs_diff_igc;
    let (age_min, min) = reports
        .iter()
        .map(|r| (r.age, r.abs_diff_igc))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    (
        agrees && (23..=27).contains(&age_min) && min <= 0.03 && abs(30) > abs(27),
        format!("minimum {min:.4} at {age_min}; 27: {:.4}, 30: {:.4}", abs(27), abs(30)),
    )
}

fn ac9_calibration() -> Outcome {
    let t = TrendTargets::default();
    let path = calibrate_trends(&t).unwrap();
    let FeedbackSpec::LinearClipped { intercept, slope } = path.feedback else {
        return (false, "unexpected feedback form".into());
    };
    // oracle: the recursion and the feedback line written out here
    let mut v = t.initial_variance;
    let mut oracle = Vec::new();
    for &l in &path.schedule.lambdas {
        let rho = (intercept + slope * v).clamp(0.0, 1.0);
        oracle.push((l * (1.0 + rho) / 2.0, rho));
        v = l * l * (1.0 + rho) / 2.0 * v + t.sigma_eps2;
    }
    let closed = simulate_dynamics_with(&path.params, &path.feedback, t.initial_variance, &path.schedule).unwrap();
    let agrees = closed
        .iter()
        .zip(&oracle)
        .all(|(g, o)| (g.slope_to_child - o.0).abs() < 1e-12 && (g.rho_used - o.1).abs() < 1e-12);
    let sim = simulate_generations(
        &path.params,
        &path.feedback,
        t.initial_variance,
        &path.schedule,
        200_000,
        SEED,
    )
    .unwrap();
    let (first, last) = (sim[0], sim[sim.len() - 1]);
    let near = |x: f64, y: f64| (x - y).abs() <= 0.05;
    let ok = agrees
        && near(oracle[0].0, 0.57)
        && near(oracle[3].0, 0.33)
        && near(oracle[0].1, 0.66)
        && near(oracle[3].1, 0.55)
        && near(first.moments.slope_to_child, 0.57)
        && near(last.moments.slope_to_child, 0.33)
        && near(first.realized_rho, 0.66)
        && near(last.realized_rho, 0.55);
    (
        ok,
        format!(
            "slope {:.3}->{:.3}, sorting {:.3}->{:.3}; simulated slope {:.3}->{:.3}, sorting {:.3}->{:.3}",
            oracle[0].0,
            oracle[3].0,
            oracle[0].1,
            oracle[3].1,
            first.moments.slope_to_child,
            last.moments.slope_to_child,
            first.realized_rho,
            last.realized_rho
        ),
    )
}

fn ac10_mediation() -> Outcome {
    let draw = RegionalDgp::vicious_cycle()
        .generate(&RegionRegistry::spanish_default(), &PanelRules::default(), SEED)
        .unwrap();
    let c = cells(&draw.panel.stats);
    let alone = split_iv(&c, StatKind::Igc, &[StatKind::FatherSd])[0];
    let with = split_iv(&c, StatKind::Igc, &[StatKind::FatherSd, StatKind::Am])[0];
    let share = (alone - with) / alone;
    let lib = gatsby_summary(&draw.panel.stats).unwrap().mediation.share;
    (
        (share - lib).abs() < 1e-9 && (share - 0.5).abs() <= 0.15,
        format!("SD coefficient {alone:.4} alone, {with:.4} with AM: share {share:.3}"),
    )
}

fn pipeline(config: &Path, out: &Path, threads: usize) -> bool {
    let bin = env!("CARGO_BIN_EXE_mobility-lab");
    ["simulate", "estimate", "bias-lab", "panel", "regress", "report"].iter().all(|cmd| {
        Command::new(bin)
            .args([*cmd, "--config"])
            .arg(config)
            .arg("--out")
            .arg(out)
            .args(["--threads", &threads.to_string()])
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn ac11_determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quickstart.toml");
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = [(1, "a"), (1, "b"), (4, "c")]
        .iter()
        .map(|(threads, name)| {
            let out = dir.path().join(name);
            (pipeline(&config, &out, *threads), out)
        })
        .collect();
    if !runs.iter().all(|r| r.0) {
        return (false, "a pipeline command failed".into());
    }
    let (a, b, c) = (files(&runs[0].1), files(&runs[1].1), files(&runs[2].1));
    (
        a == b && a == c && a.len() >= 10,
        format!("{} files identical across reruns and 1 vs 4 threads: {}", a.len(), a == b && a == c),
    )
}

fn ac12_identities() -> Outcome {
    let mut rng = stream(SEED, &[12]);
    let mut worst_identity: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut invariant = true;
    for _ in 0..50 {
        let n = rng.random_range(3..=20);
        // schooling-like values with ties
        let x: Vec<f64> = (0..n).map(|_| [1.0, 3.0, 5.0, 8.0, 11.0, 15.0, 18.0][rng.random_range(0..7)]).collect();
        let noise = Normal::new(0.0, 3.0).unwrap();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + noise.sample(&mut rng)).collect();
        let (Ok(c), Ok(r)) = (igc(&y, &x), igr(&y, &x)) else { continue };
        let sd = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        worst_identity = worst_identity.max((r.value - c.value * sd(&y) / sd(&x)).abs());
        let rank = rank_correlation(&y, &x).unwrap().value;
        let pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        let sym = symmetric_correlation(&pairs).unwrap().value;
        worst_oracle = worst_oracle
            .max((c.value - pearson_pairwise(&y, &x)).abs())
            .max((r.value - ols_slope(&y, &x)).abs())
            .max((rank - spearman(&y, &x)).abs())
            .max((sym - double_entry(&pairs)).abs());
        let ty: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let tx: Vec<f64> = x.iter().map(|v| v * v * v + 2.0).collect();
        invariant &= rank_correlation(&ty, &tx).unwrap().value == rank;
    }
    (
        worst_identity <= 1e-12 && worst_oracle <= 1e-12 && invariant,
        format!("IGR identity {worst_identity:.1e}, oracle {worst_oracle:.1e}, rank invariance {invariant}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("slope closed form vs simulation", ac1_slope_grid),
        ("steady-state variance", ac2_steady_state),
        ("matching engine", ac3_matching),
        ("attenuation law", ac4_attenuation),
        ("persistence pattern", ac5_persistence),
        ("contamination signature", ac6_contamination),
        ("corrected CEF exactness", ac7_hilger),
        ("coresidence bias U-shape", ac8_u_shape),
        ("declining-mobility calibration", ac9_calibration),
        ("mediation share", ac10_mediation),
        ("determinism", ac11_determinism),
        ("estimator identities", ac12_identities),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let (ok, detail) = std::panic::catch_unwind(f).unwrap_or_else(|_| (false, "panicked".into()));
        println!("[{}] AC{:<2} {title}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!ok);
    }
    println!("{} of 12 acceptance criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
