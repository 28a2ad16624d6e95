//! Panel CSV: `region_id,period,stat_kind,value,n,half_a,half_b`.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::regional::{Period, RegionalStat};

use super::RegionId;

pub const PANEL_HEADER: [&str; 7] = ["region_id", "period", "stat_kind", "value", "n", "half_a", "half_b"];

pub fn panel_to_csv_bytes(panel: &[RegionalStat]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(PANEL_HEADER).expect("in-memory write");
        for s in panel {
            w.write_record([
                s.region_id.0.clone(),
                s.period.0.to_string(),
                s.stat_kind.as_str().to_string(),
                s.value.to_string(),
                s.n.to_string(),
                s.half_a.map(|v| v.to_string()).unwrap_or_default(),
                s.half_b.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    buf
}

pub fn panel_from_csv_reader<R: Read>(reader: R, origin: &str) -> Result<Vec<RegionalStat>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PANEL_HEADER {
        return Err(Error::Malformed {
            path: origin.into(),
            line: 1,
            reason: "unexpected panel header".into(),
        });
    }
    let mut out = Vec::new();
    let mut keys = std::collections::HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |reason: String| Error::Malformed {
            path: origin.into(),
            line,
            reason,
        };
        if rec.len() != PANEL_HEADER.len() {
            return Err(bad(format!("expected 7 fields, found {}", rec.len())));
        }
        let num = |s: &str, name: &str| -> std::result::Result<f64, String> {
            let v: f64 = s.parse().map_err(|_| format!("invalid {name} {s:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("non-finite {name}"))
            }
        };
        let opt_num = |s: &str, name: &str| -> std::result::Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, name).map(Some)
            }
        };
        let stat = RegionalStat {
            region_id: RegionId(rec[0].to_string()),
            period: Period(rec[1].parse().map_err(|_| bad(format!("invalid period {:?}", &rec[1])))?),
            stat_kind: rec[2].parse().map_err(bad)?,
            value: num(&rec[3], "value").map_err(bad)?,
            n: rec[4].parse().map_err(|_| bad(format!("invalid n {:?}", &rec[4])))?,
            half_a: opt_num(&rec[5], "half_a").map_err(bad)?,
            half_b: opt_num(&rec[6], "half_b").map_err(bad)?,
        };
        if !keys.insert((stat.region_id.clone(), stat.period, stat.stat_kind)) {
            return Err(bad(format!(
                "duplicate cell ({}, {}, {})",
                stat.region_id, stat.period, stat.stat_kind
            )));
        }
        out.push(stat);
    }
    Ok(out)
}

pub fn read_panel(path: impl AsRef<Path>) -> Result<Vec<RegionalStat>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    panel_from_csv_reader(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn write_panel(panel: &[RegionalStat], path: impl AsRef<Path>) -> Result<()> {
    super::atomic_write(path.as_ref(), &panel_to_csv_bytes(panel))
}
