//! Harmonizing survey labels, CSV round trips and joining an external
//! regional table.

use mobility_lab::data_io::{
    harmonize, join_external, panel_from_csv_reader, panel_to_csv_bytes, EducationCategory, ExternalTable,
    HarmonizationScheme, Microdata, RegionRegistry,
};
use mobility_lab::regional::{compute_panel, PanelRules, PeriodScheme};
use mobility_lab::synth::{generate_population, BlockModel, ModelSource, PopulationConfig};
use mobility_lab::model::ModelParams;

fn main() -> mobility_lab::Result<()> {
    let scheme = HarmonizationScheme::default().with_label("FP2", EducationCategory::AcademicOrProfessional);
    for label in ["Primary Schooling", "FP2", "Long college degree"] {
        println!("{label:<22} -> {} years", harmonize(label, &scheme)?);
    }
    match harmonize("Doctorate", &scheme) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }

    let registry = RegionRegistry::synthetic(4);
    let params = ModelParams::new(0.5, 0.5, 4.0, 8.0)?;
    let config = PopulationConfig::new(
        registry.ids().cloned().collect(),
        (1950, 1969),
        100,
        ModelSource::Shared(BlockModel::steady_state(params)?),
        9,
    );
    let md = generate_population(&config)?.to_microdata();
    let bytes = md.to_csv_bytes();
    let back = Microdata::from_csv_reader(&bytes[..], "memory")?;
    println!("\nmicrodata: {} rows, round trip identical: {}", back.len(), back == md);

    let panel = compute_panel(&md, &registry, &PeriodScheme::decades(), &PanelRules::default())?;
    let csv = panel_to_csv_bytes(&panel.stats);
    let reread = panel_from_csv_reader(&csv[..], "memory")?;
    println!("panel: {} rows, round trip identical: {}", reread.len(), reread == panel.stats);

    let external = ExternalTable::from_csv_reader(&b"region_id,gdp\nr000,1.2\nr001,0.9\nr999,1.0\n"[..], "memory")?;
    let joined = join_external(&panel.stats, &external);
    println!(
        "joined {} rows; panel-only regions {:?}, table-only regions {:?}",
        joined.rows.len(),
        joined.unmatched_panel,
        joined.unmatched_external
    );
    Ok(())
}
