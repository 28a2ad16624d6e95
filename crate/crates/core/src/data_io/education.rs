//! Seven-level schooling classification and its years-of-schooling grid.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Years of schooling assigned to each harmonized level, ascending.
pub const EDUCATION_GRID: [u8; 7] = [1, 3, 5, 8, 11, 15, 18];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EducationCategory {
    Illiterate,
    Literate,
    Primary,
    Secondary,
    AcademicOrProfessional,
    ShortCollege,
    LongCollege,
}

impl EducationCategory {
    pub const ALL: [EducationCategory; 7] = [
        EducationCategory::Illiterate,
        EducationCategory::Literate,
        EducationCategory::Primary,
        EducationCategory::Secondary,
        EducationCategory::AcademicOrProfessional,
        EducationCategory::ShortCollege,
        EducationCategory::LongCollege,
    ];

    pub fn years(self) -> u8 {
        EDUCATION_GRID[self as usize]
    }

    pub fn from_years(years: u8) -> Option<Self> {
        EDUCATION_GRID
            .iter()
            .position(|&y| y == years)
            .map(|i| Self::ALL[i])
    }

    /// Canonical label of the harmonized level.
    pub fn label(self) -> &'static str {
        match self {
            EducationCategory::Illiterate => "Illiterate",
            EducationCategory::Literate => "Literate",
            EducationCategory::Primary => "Primary Schooling",
            EducationCategory::Secondary => "Secondary School",
            EducationCategory::AcademicOrProfessional => {
                "Academic high school and professional studies"
            }
            EducationCategory::ShortCollege => "Short college degree",
            EducationCategory::LongCollege => "Long college degree",
        }
    }
}

impl fmt::Display for EducationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn is_grid_value(years: u8) -> bool {
    EDUCATION_GRID.contains(&years)
}

/// Nearest grid value to a continuous schooling level; ties go to the lower
/// grid point. Values outside the grid clamp to its ends.
pub fn discretize_education(edu_latent: f64) -> u8 {
    let mut best = EDUCATION_GRID[0];
    let mut best_dist = (edu_latent - best as f64).abs();
    for &g in &EDUCATION_GRID[1..] {
        let d = (edu_latent - g as f64).abs();
        if d < best_dist {
            best = g;
            best_dist = d;
        }
    }
    best
}

/// Label-to-level mapping used when ingesting categorical schooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonizationScheme {
    labels: BTreeMap<String, EducationCategory>,
}

impl Default for HarmonizationScheme {
    /// The seven canonical labels and nothing else.
    fn default() -> Self {
        HarmonizationScheme {
            labels: EducationCategory::ALL
                .iter()
                .map(|c| (c.label().to_string(), *c))
                .collect(),
        }
    }
}

impl HarmonizationScheme {
    pub fn new() -> Self {
        HarmonizationScheme {
            labels: BTreeMap::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>, category: EducationCategory) -> Self {
        self.labels.insert(label.into(), category);
        self
    }

    /// Map a raw label to grid years. `row` is carried into the error.
    pub fn harmonize(&self, label: &str, row: Option<usize>) -> Result<u8> {
        self.labels
            .get(label.trim())
            .map(|c| c.years())
            .ok_or_else(|| Error::UnknownLabel {
                label: label.to_string(),
                row,
            })
    }
}

/// Map a raw label to grid years under `scheme`.
pub fn harmonize(label: &str, scheme: &HarmonizationScheme) -> Result<u8> {
    scheme.harmonize(label, None)
}
