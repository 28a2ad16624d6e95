//! Inner join of a regional panel with an external region-level table.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::RegionId;
use crate::error::{Error, Result};
use crate::regional::RegionalStat;

/// External statistics keyed by `region_id`, one row per region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalTable {
    pub columns: Vec<String>,
    pub rows: BTreeMap<RegionId, Vec<f64>>,
}

impl ExternalTable {
    pub fn from_csv_reader<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let header = rdr.headers()?.clone();
        let key_pos = header
            .iter()
            .position(|h| h == "region_id")
            .ok_or_else(|| Error::Malformed {
                path: origin.into(),
                line: 1,
                reason: "missing region_id column".into(),
            })?;
        let columns: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != key_pos)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut rows = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let key = RegionId(rec[key_pos].to_string());
            let mut values = Vec::with_capacity(columns.len());
            for (j, field) in rec.iter().enumerate() {
                if j == key_pos {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| Error::Malformed {
                    path: origin.into(),
                    line,
                    reason: format!("non-numeric value {field:?}"),
                })?;
                values.push(v);
            }
            if rows.insert(key.clone(), values).is_some() {
                return Err(Error::DuplicateKey(key.0));
            }
        }
        Ok(ExternalTable { columns, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    /// Pivot a panel to one row per region with a `stat@period` column per
    /// cell.
    pub fn from_panel_wide(panel: &[RegionalStat]) -> Self {
        let columns: BTreeSet<(crate::regional::StatKind, crate::regional::Period)> =
            panel.iter().map(|s| (s.stat_kind, s.period)).collect();
        let columns: Vec<_> = columns.into_iter().collect();
        let mut rows: BTreeMap<RegionId, Vec<f64>> = BTreeMap::new();
        for s in panel {
            let j = columns
                .binary_search(&(s.stat_kind, s.period))
                .expect("column collected above");
            rows.entry(s.region_id.clone())
                .or_insert_with(|| vec![f64::NAN; columns.len()])[j] = s.value;
        }
        ExternalTable {
            columns: columns.iter().map(|(k, p)| format!("{k}@{p}")).collect(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinedRow {
    pub stat: RegionalStat,
    pub external: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinedPanel {
    pub external_columns: Vec<String>,
    pub rows: Vec<JoinedRow>,
    /// Panel regions absent from the external table.
    pub unmatched_panel: Vec<RegionId>,
    /// External regions absent from the panel.
    pub unmatched_external: Vec<RegionId>,
}

impl JoinedPanel {
    pub fn regions(&self) -> BTreeSet<&RegionId> {
        self.rows.iter().map(|r| &r.stat.region_id).collect()
    }

    pub fn unmatched_count(&self) -> usize {
        self.unmatched_panel.len() + self.unmatched_external.len()
    }
}

pub fn join_external(panel: &[RegionalStat], external: &ExternalTable) -> JoinedPanel {
    let panel_regions: BTreeSet<&RegionId> = panel.iter().map(|s| &s.region_id).collect();
    let rows = panel
        .iter()
        .filter_map(|s| {
            external.rows.get(&s.region_id).map(|ext| JoinedRow {
                stat: s.clone(),
                external: ext.clone(),
            })
        })
        .collect();
    JoinedPanel {
        external_columns: external.columns.clone(),
        rows,
        unmatched_panel: panel_regions
            .iter()
            .filter(|r| !external.rows.contains_key(**r))
            .map(|r| (*r).clone())
            .collect(),
        unmatched_external: external
            .rows
            .keys()
            .filter(|k| !panel_regions.contains(k))
            .cloned()
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regional::{Period, StatKind};

    fn cell(region: &str, v: f64) -> RegionalStat {
        RegionalStat {
            region_id: region.into(),
            period: Period(1990),
            stat_kind: StatKind::Igc,
            value: v,
            n: 100,
            half_a: None,
            half_b: None,
        }
    }

    #[test]
    fn duplicate_external_keys_rejected() {
        let text = "region_id,x\na,1\na,2\n";
        assert!(matches!(
            ExternalTable::from_csv_reader(text.as_bytes(), "t"),
            Err(Error::DuplicateKey(k)) if k == "a"
        ));
    }

    #[test]
    fn disjoint_keys_join_empty() {
        let panel = vec![cell("a", 0.1), cell("b", 0.2)];
        let ext = ExternalTable::from_csv_reader("region_id,x\nc,1\n".as_bytes(), "t").unwrap();
        let j = join_external(&panel, &ext);
        assert!(j.rows.is_empty());
        assert_eq!(j.unmatched_panel.len(), 2);
        assert_eq!(j.unmatched_external, vec![RegionId::from("c")]);
    }

    #[test]
    fn self_join_duplicates_values() {
        let panel = vec![cell("a", 0.1), cell("b", 0.2)];
        let wide = ExternalTable::from_panel_wide(&panel);
        let j = join_external(&panel, &wide);
        assert_eq!(j.rows.len(), 2);
        for r in &j.rows {
            assert_eq!(r.external, vec![r.stat.value]);
        }
        assert_eq!(j.unmatched_count(), 0);
    }

    #[test]
    fn key_column_may_be_anywhere() {
        let ext = ExternalTable::from_csv_reader("x,region_id,y\n1,a,2\n".as_bytes(), "t").unwrap();
        assert_eq!(ext.columns, vec!["x", "y"]);
        assert_eq!(ext.rows[&RegionId::from("a")], vec![1.0, 2.0]);
    }
}
