//! Region registry: municipalities above 100k inhabitants, the rest of each
//! province, and the two autonomous cities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static DEFAULT_REGISTRY: &str = include_str!("../../data/regions.csv");

/// Registry key of a region, e.g. `mun-madrid` or `prov-madrid`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub String);

impl RegionId {
    pub fn new(id: impl Into<String>) -> Self {
        RegionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RegionId {
    fn from(s: &str) -> Self {
        RegionId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Municipality,
    RestOfProvince,
    AutonomousCity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub region_id: RegionId,
    pub name: String,
    pub kind: RegionKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionRegistry {
    entries: Vec<RegionEntry>,
    index: BTreeMap<RegionId, usize>,
}

impl RegionRegistry {
    /// The bundled 107-region scheme; its 55/50/2 composition is checked.
    pub fn spanish_default() -> Self {
        let reg = Self::from_reader(DEFAULT_REGISTRY.as_bytes(), "<bundled regions.csv>")
            .expect("bundled registry parses");
        reg.check_spanish_scheme().expect("bundled registry composition");
        reg
    }

    pub fn from_entries(entries: Vec<RegionEntry>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.region_id.clone(), i).is_some() {
                return Err(Error::DuplicateKey(e.region_id.0.clone()));
            }
        }
        Ok(RegionRegistry { entries, index })
    }

    /// Registry of `n` anonymous municipalities, handy for experiments that
    /// do not care about geography.
    pub fn synthetic(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| RegionEntry {
                region_id: RegionId(format!("r{i:03}")),
                name: format!("Region {i}"),
                kind: RegionKind::Municipality,
            })
            .collect();
        Self::from_entries(entries).expect("synthetic ids are unique")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["region_id", "name", "kind"] {
            return Err(Error::Malformed {
                path: origin.to_string(),
                line: 1,
                reason: format!("expected header region_id,name,kind, got {:?}", headers),
            });
        }
        let mut entries = Vec::new();
        for (i, rec) in rdr.deserialize::<RegionEntry>().enumerate() {
            let entry = rec.map_err(|e| Error::Malformed {
                path: origin.to_string(),
                line: i + 2,
                reason: e.to_string(),
            })?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for e in &self.entries {
                w.serialize(e)?;
            }
            w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
        }
        super::atomic_write(path.as_ref(), &buf)
    }

    /// Check the 55 municipalities / 50 provinces / 2 cities composition.
    pub fn check_spanish_scheme(&self) -> Result<()> {
        let count = |k| self.entries.iter().filter(|e| e.kind == k).count();
        let (m, p, c) = (
            count(RegionKind::Municipality),
            count(RegionKind::RestOfProvince),
            count(RegionKind::AutonomousCity),
        );
        if (m, p, c) != (55, 50, 2) {
            return Err(Error::Registry(format!(
                "expected 55/50/2 municipalities/provinces/cities, found {m}/{p}/{c}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RegionEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &RegionId> {
        self.entries.iter().map(|e| &e.region_id)
    }

    pub fn get(&self, id: &RegionId) -> Option<&RegionEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, id: &RegionId) -> bool {
        self.index.contains_key(id)
    }

    /// Position of a region in registry order.
    pub fn position(&self, id: &RegionId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Ids in `ids` that are not registered, sorted and deduplicated.
    pub fn unknown<'a>(&self, ids: impl IntoIterator<Item = &'a RegionId>) -> Vec<String> {
        ids.into_iter()
            .filter(|id| !self.contains(id))
            .map(|id| id.0.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_composition() {
        let reg = RegionRegistry::spanish_default();
        assert_eq!(reg.len(), 107);
        assert!(reg.contains(&RegionId::from("mun-madrid")));
        assert!(reg.contains(&RegionId::from("prov-madrid")));
        assert!(reg.contains(&RegionId::from("city-melilla")));
        assert_eq!(
            reg.get(&"mun-coruna-a".into()).unwrap().name,
            "Coruña (A)"
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = RegionEntry {
            region_id: "x".into(),
            name: "X".into(),
            kind: RegionKind::Municipality,
        };
        assert!(matches!(
            RegionRegistry::from_entries(vec![e.clone(), e]),
            Err(Error::DuplicateKey(_))
        ));
    }

    #[test]
    fn wrong_composition_flagged() {
        assert!(RegionRegistry::synthetic(107).check_spanish_scheme().is_err());
    }

    #[test]
    fn bad_header_rejected() {
        let r = RegionRegistry::from_reader("id,name,kind\na,A,municipality\n".as_bytes(), "t");
        assert!(matches!(r, Err(Error::Malformed { line: 1, .. })));
    }
}
