//! Individual-level microdata table and its CSV form.
//!
//! Header: `id,region_id,cohort,sex,edu_years,father_edu_years,
//! mother_edu_years,spouse_id,leave_home_age,edu_completion_age`.
//! Empty fields encode missing values.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::education::is_grid_value;
use super::registry::RegionId;
use crate::error::{Error, Result};

pub const MICRODATA_HEADER: [&str; 10] = [
    "id",
    "region_id",
    "cohort",
    "sex",
    "edu_years",
    "father_edu_years",
    "mother_edu_years",
    "spouse_id",
    "leave_home_age",
    "edu_completion_age",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            other => Err(format!("unknown sex {other:?}")),
        }
    }
}

/// One row of microdata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroRecord {
    pub id: u64,
    pub region_id: RegionId,
    pub cohort: i32,
    pub sex: Sex,
    /// Reported schooling, on the seven-level grid.
    pub edu_years: u8,
    pub father_edu_years: Option<u8>,
    pub mother_edu_years: Option<u8>,
    pub spouse_id: Option<u64>,
    pub leave_home_age: u32,
    pub edu_completion_age: u32,
}

impl MicroRecord {
    /// Age in a given survey year.
    pub fn age_in(&self, survey_year: i32) -> i32 {
        survey_year - self.cohort
    }

    pub fn coresident_at(&self, age: u32) -> bool {
        self.leave_home_age > age
    }
}

/// A table of microdata rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Microdata {
    pub records: Vec<MicroRecord>,
}

impl Microdata {
    pub fn new(records: Vec<MicroRecord>) -> Self {
        Microdata { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MicroRecord> {
        self.records.iter()
    }

    /// Grid, duplicate-id and spouse-symmetry checks. Spouses that are not
    /// part of the table (e.g. filtered out) are allowed.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            if !seen.insert(r.id) {
                return Err(Error::Malformed {
                    path: "<microdata>".into(),
                    line,
                    reason: format!("duplicate id {}", r.id),
                });
            }
            check_grid(r.edu_years, "edu_years", line)?;
            if let Some(f) = r.father_edu_years {
                check_grid(f, "father_edu_years", line)?;
            }
            if let Some(m) = r.mother_edu_years {
                check_grid(m, "mother_edu_years", line)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(64 * (self.records.len() + 1));
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(MICRODATA_HEADER).expect("in-memory write");
            for r in &self.records {
                w.write_record([
                    r.id.to_string(),
                    r.region_id.0.clone(),
                    r.cohort.to_string(),
                    r.sex.as_str().to_string(),
                    r.edu_years.to_string(),
                    opt(r.father_edu_years),
                    opt(r.mother_edu_years),
                    opt(r.spouse_id),
                    r.leave_home_age.to_string(),
                    r.edu_completion_age.to_string(),
                ])
                .expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        buf
    }

    pub fn from_csv_reader<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != MICRODATA_HEADER {
            return Err(Error::Malformed {
                path: origin.into(),
                line: 1,
                reason: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
            });
        }
        let mut records = Vec::new();
        let mut ids = HashSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let bad = |reason: String| Error::Malformed {
                path: origin.into(),
                line,
                reason,
            };
            if rec.len() != MICRODATA_HEADER.len() {
                return Err(bad(format!("expected 10 fields, found {}", rec.len())));
            }
            let r = MicroRecord {
                id: req(&rec[0], "id").map_err(bad)?,
                region_id: RegionId(rec[1].to_string()),
                cohort: req(&rec[2], "cohort").map_err(bad)?,
                sex: rec[3].parse().map_err(bad)?,
                edu_years: req(&rec[4], "edu_years").map_err(bad)?,
                father_edu_years: optional(&rec[5], "father_edu_years").map_err(bad)?,
                mother_edu_years: optional(&rec[6], "mother_edu_years").map_err(bad)?,
                spouse_id: optional(&rec[7], "spouse_id").map_err(bad)?,
                leave_home_age: req(&rec[8], "leave_home_age").map_err(bad)?,
                edu_completion_age: req(&rec[9], "edu_completion_age").map_err(bad)?,
            };
            if r.region_id.0.is_empty() {
                return Err(bad("empty region_id".into()));
            }
            for (v, name) in [
                (Some(r.edu_years), "edu_years"),
                (r.father_edu_years, "father_edu_years"),
                (r.mother_edu_years, "mother_edu_years"),
            ] {
                if let Some(v) = v {
                    check_grid(v, name, line).map_err(|_| {
                        bad(format!("{name}={v} is not on the schooling grid"))
                    })?;
                }
            }
            if !ids.insert(r.id) {
                return Err(bad(format!("duplicate id {}", r.id)));
            }
            records.push(r);
        }
        Ok(Microdata { records })
    }
}

fn check_grid(v: u8, name: &str, line: usize) -> Result<()> {
    if is_grid_value(v) {
        Ok(())
    } else {
        Err(Error::Malformed {
            path: "<microdata>".into(),
            line,
            reason: format!("{name}={v} is not on the schooling grid"),
        })
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn req<T: FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("invalid {name} {s:?}"))
}

fn optional<T: FromStr>(s: &str, name: &str) -> std::result::Result<Option<T>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        req(s, name).map(Some)
    }
}

pub fn read_microdata(path: impl AsRef<Path>) -> Result<Microdata> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Microdata::from_csv_reader(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn write_microdata(table: &Microdata, path: impl AsRef<Path>) -> Result<()> {
    super::atomic_write(path.as_ref(), &table.to_csv_bytes())
}
