//! Closed-form dynamics: the steady state, a variance feedback on sorting,
//! and the calibrated path with falling transmission.

use mobility_lab::calibration::{calibrate_trends, TrendTargets};
use mobility_lab::model::{
    simulate_dynamics, theoretical_parent_child_slope, variance_recursion, FeedbackSpec, ModelParams,
};

fn main() -> mobility_lab::Result<()> {
    let p = ModelParams::new(0.8, 0.5, 1.0, 8.0)?;
    println!("slope {:.3}", theoretical_parent_child_slope(&p));
    println!("steady-state variance {:.6}", p.steady_state_variance().unwrap());
    let mut v = 4.0;
    for _ in 0..5 {
        v = variance_recursion(v, &p);
    }
    println!("after five generations from 4.0: {v:.6}");

    let feedback = FeedbackSpec::LinearClipped { intercept: 0.2, slope: 0.1 };
    println!("\n t  variance   rho   slope");
    for g in simulate_dynamics(&p, &feedback, 4.0, 8)? {
        println!("{:>2} {:>9.4} {:>6.3} {:>6.3}", g.t, g.variance, g.rho_used, g.slope_to_child);
    }

    let path = calibrate_trends(&TrendTargets::default())?;
    println!("\ncalibrated feedback: {:?}", path.feedback);
    for g in &path.moments {
        println!(
            "generation {}: lambda {:.3}, variance {:.3}, rho {:.3}, slope {:.3}",
            g.t, g.lambda, g.variance, g.rho_used, g.slope_to_child
        );
    }
    Ok(())
}
