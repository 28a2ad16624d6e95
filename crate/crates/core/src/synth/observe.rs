//! Survey-style observation of a population at a given age.

use serde::{Deserialize, Serialize};

use super::lifecycle::CompletionProfile;
use super::population::Population;
use crate::data_io::{MicroRecord, Microdata};
use crate::error::{Error, Result};

/// How a population is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRule {
    pub measure_age: u32,
    /// Keep only people still living with their parents at `measure_age`.
    #[serde(default)]
    pub coresident_only: bool,
    /// Restrict to the cohort aged `measure_age` in this year.
    #[serde(default)]
    pub survey_year: Option<i32>,
}

impl ObservationRule {
    pub fn at_age(measure_age: u32) -> Self {
        ObservationRule {
            measure_age,
            coresident_only: false,
            survey_year: None,
        }
    }

    pub fn coresident(mut self) -> Self {
        self.coresident_only = true;
        self
    }

    pub fn in_year(mut self, survey_year: i32) -> Self {
        self.survey_year = Some(survey_year);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(16..=45).contains(&self.measure_age) {
            return Err(Error::param("measure_age", "must lie in [16, 45]"));
        }
        Ok(())
    }
}

/// Observe microdata holding final schooling.
///
/// Each kept row reports the schooling attained at `measure_age`; rows of
/// people who left home by then are dropped when `coresident_only` is set.
/// An empty result is returned as an empty table.
pub fn observe_microdata(
    md: &Microdata,
    rule: &ObservationRule,
    profile: &CompletionProfile,
) -> Result<Microdata> {
    rule.validate()?;
    let age = rule.measure_age;
    let records = md
        .records
        .iter()
        .filter(|r| {
            rule.survey_year
                .is_none_or(|y| r.cohort as i64 + age as i64 == y as i64)
        })
        .filter(|r| !rule.coresident_only || r.coresident_at(age))
        .map(|r| MicroRecord {
            edu_years: profile.attained_at(r.edu_years, r.edu_completion_age, age),
            ..r.clone()
        })
        .collect();
    Ok(Microdata::new(records))
}

pub fn observe(population: &Population, rule: &ObservationRule) -> Result<Microdata> {
    observe_microdata(&population.to_microdata(), rule, &population.completion_profile)
}
