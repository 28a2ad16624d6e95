//! Regional panels from the two synthetic DGPs: persistence of each
//! statistic, and the inequality-mobility link with its sorting channel.

use mobility_lab::data_io::RegionRegistry;
use mobility_lab::regional::{
    gatsby_summary, persistence_battery, persistence_to_text, PanelRules, RegionalDgp, PERSISTENCE_STATS,
};

fn main() -> mobility_lab::Result<()> {
    let registry = RegionRegistry::spanish_default();

    let draw = RegionalDgp::persistent_regions().generate(&registry, &PanelRules::default(), 5)?;
    println!("{} cells, {} omitted", draw.panel.stats.len(), draw.panel.omitted.len());
    let rows = persistence_battery(&draw.panel.stats, &PERSISTENCE_STATS)?;
    print!("{}", persistence_to_text(&rows));

    let draw = RegionalDgp::vicious_cycle().generate(&registry, &PanelRules::default(), 5)?;
    let summary = gatsby_summary(&draw.panel.stats)?;
    println!();
    print!("{}", summary.to_text());
    Ok(())
}
