//! Regional panels, split-sample replicates, regressions and the
//! measurement-error experiments built on them.

mod dgp;
mod experiments;
mod panel;
mod regress;
mod types;

pub use dgp::{CellTruth, Knob, RegionalDgp, RegionalDraw};
pub use experiments::{
    attenuation_experiment, contamination_experiment, gatsby_battery, gatsby_summary, mediation_battery,
    persistence_battery, persistence_to_text, sorting_battery, AttenuationDesign, AttenuationReport, Battery,
    ContaminationDesign, ContaminationReport, GatsbySummary, Mediation, PersistenceRow, TwoCoefficients,
    PERSISTENCE_STATS,
};
pub use panel::{
    cell_statistic, compute_panel, split_assignment, split_halves, OmittedCell, Panel, PanelRules, PeriodBin,
    PeriodScheme,
};
pub use regress::{
    first_stage, regress, Coefficient, Design, Estimator, FirstStage, FixedEffects, RegressionResult, RegressionSpec,
    Regressor,
};
pub use types::{Period, RegionalStat, StatKind};
