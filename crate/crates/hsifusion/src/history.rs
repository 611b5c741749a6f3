//! Training history as CSV, one row per iteration.

use std::fs;
use std::path::Path;

use hsifusion_core::trainer::{HistoryRecord, Phase};
use hsifusion_core::TrainHistory;

use crate::error::{Error, Result};

pub const HEADER: &str = "phase,iter,lr,mm,cyc,ide,total";

pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::with_capacity(64 * (history.records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &history.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.phase.as_str(),
            r.iter,
            r.lr,
            r.mm,
            r.cyc,
            r.ide,
            r.total
        ));
    }
    out
}

pub fn write_history_csv(history: &TrainHistory, path: &Path) -> Result<()> {
    fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}

pub fn read_history_csv(path: &Path) -> Result<TrainHistory> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(Error::format(path, format!("expected header {HEADER}")));
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = || Error::format(path, format!("malformed row {}", i + 2));
        let phase = match &row[0] {
            "pretrain" => Phase::Pretrain,
            "train" => Phase::Train,
            _ => return Err(bad()),
        };
        let num = |j: usize| row[j].parse::<f64>().map_err(|_| bad());
        records.push(HistoryRecord {
            phase,
            iter: row[1].parse().map_err(|_| bad())?,
            lr: num(2)?,
            mm: num(3)?,
            cyc: num(4)?,
            ide: num(5)?,
            total: num(6)?,
        });
    }
    Ok(TrainHistory { records })
}
