//! Bias of dependents-only mobility estimates by measurement age, and the
//! corrected estimator next to the benchmark.

use mobility_lab::calibration::{coresidence_population, CoresidenceDesign};
use mobility_lab::coresidence::{average_over_periods, bias_by_age, hilger_comparison, ShareSource};
use mobility_lab::estimators::ParentVariable;
use mobility_lab::synth::generate_population;

fn main() -> mobility_lab::Result<()> {
    let design = CoresidenceDesign::default();
    let pop = generate_population(&coresidence_population(10_000, design.cohorts, 3)?)?;
    let md = pop.to_microdata();

    let reports = bias_by_age(
        &md,
        &pop.completion_profile,
        &design.ages,
        design.benchmark_age,
        std::slice::from_ref(&design.window),
        ParentVariable::Father,
    )?;
    let share = average_over_periods(&reports, |r| r.coresidence_share);
    println!("age  diff     |diff|   living at home");
    for r in &reports {
        println!("{:>3}  {:>7.4}  {:>6.4}   {:.2}", r.age, r.diff_igc, r.abs_diff_igc, share[&r.age]);
    }

    let rows = hilger_comparison(
        &md,
        &pop.completion_profile,
        &[27],
        design.benchmark_age,
        ShareSource::Exact,
        ParentVariable::Father,
    )?;
    println!("\ncohort  dependents  corrected  benchmark (IGR at 27)");
    for h in rows.iter().step_by(4) {
        println!("{}    {:.3}       {:.3}      {:.3}", h.cohort, h.igr_dependent, h.igr_corrected, h.igr_benchmark);
    }
    Ok(())
}
