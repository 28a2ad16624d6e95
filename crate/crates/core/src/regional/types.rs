use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_io::RegionId;

/// Ordinal period label (e.g. first birth year of a decade, or a census
/// wave). Only the ordering matters; spacing may be irregular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Period(pub i32);

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Kind of regional statistic.
///
/// Child-generation statistics use reported schooling; `FatherMean` and
/// `FatherSd` describe the fathers of the same rows, and `Am` is the
/// correlation between each row's father and mother.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Mean,
    Sd,
    Cv,
    Igc,
    Igr,
    Am,
    Rank,
    FatherMean,
    FatherSd,
}

impl StatKind {
    pub const ALL: [StatKind; 9] = [
        StatKind::Mean,
        StatKind::Sd,
        StatKind::Cv,
        StatKind::Igc,
        StatKind::Igr,
        StatKind::Am,
        StatKind::Rank,
        StatKind::FatherMean,
        StatKind::FatherSd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatKind::Mean => "mean",
            StatKind::Sd => "sd",
            StatKind::Cv => "cv",
            StatKind::Igc => "igc",
            StatKind::Igr => "igr",
            StatKind::Am => "am",
            StatKind::Rank => "rank",
            StatKind::FatherMean => "father_mean",
            StatKind::FatherSd => "father_sd",
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        StatKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown stat kind {s:?}"))
    }
}

/// One (region, period, statistic) cell with its split-half replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalStat {
    pub region_id: RegionId,
    pub period: Period,
    pub stat_kind: StatKind,
    pub value: f64,
    pub n: usize,
    pub half_a: Option<f64>,
    pub half_b: Option<f64>,
}

impl RegionalStat {
    pub fn halves(&self) -> Option<(f64, f64)> {
        self.half_a.zip(self.half_b)
    }
}
