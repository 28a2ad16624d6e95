//! Attenuation of OLS under a noisy regional regressor, the split-sample
//! IV fix, and the contamination of a precise co-regressor.

use mobility_lab::regional::{attenuation_experiment, contamination_experiment, AttenuationDesign, ContaminationDesign};

fn main() -> mobility_lab::Result<()> {
    println!("reliability  ols/beta  ssiv    ssiv bias (SE)");
    for r in [0.25, 0.4, 0.7, 0.96] {
        let design = AttenuationDesign {
            replications: 200,
            ..AttenuationDesign::new(r)
        };
        let rep = attenuation_experiment(&design, 1)?;
        println!(
            "{r:>11.2}  {:>8.3}  {:>6.3}  {:>6.2}",
            rep.ols_ratio,
            rep.mean_ssiv,
            rep.ssiv_bias_in_se()
        );
    }

    let c = contamination_experiment(&ContaminationDesign::default(), 1)?;
    println!("\n            precise  noisy");
    println!("truth       {:.3}    {:.3}", c.truth.precise, c.truth.noisy);
    println!("ols         {:.3}    {:.3}", c.ols.precise, c.ols.noisy);
    println!("split IV    {:.3}    {:.3}", c.ssiv.precise, c.ssiv.noisy);
    Ok(())
}
