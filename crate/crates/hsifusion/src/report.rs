//! Metrics reports as JSON and their comparison outputs: a per-band RMSE
//! table, a metrics table and a rendered RMSE plot.

use std::fs;
use std::path::{Path, PathBuf};

use hsifusion_core::MetricsReport;
use plotters::prelude::*;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

fn encode(v: f64) -> Value {
    if v == f64::INFINITY {
        Value::String("inf".into())
    } else if v == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        json!(v)
    }
}

fn decode(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        Value::String(s) if s == "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

/// A metrics report plus the band wavelengths when they are known.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredReport {
    pub metrics: MetricsReport,
    pub wavelengths_nm: Option<Vec<f64>>,
}

pub fn report_json(report: &MetricsReport, wavelengths_nm: Option<&[f64]>) -> String {
    let mut obj = Map::new();
    obj.insert("psnr_db".into(), encode(report.psnr_db));
    obj.insert("sam_deg".into(), encode(report.sam_deg));
    obj.insert("ergas".into(), encode(report.ergas));
    obj.insert("ssim".into(), encode(report.ssim));
    obj.insert("rmse_per_band".into(), Value::Array(report.rmse_per_band.iter().map(|&v| encode(v)).collect()));
    if let Some(wl) = wavelengths_nm {
        obj.insert("wavelengths_nm".into(), json!(wl));
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(report: &MetricsReport, wavelengths_nm: Option<&[f64]>, path: &Path) -> Result<()> {
    fs::write(path, report_json(report, wavelengths_nm)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<StoredReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::format(path, format!("cannot read report: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| Error::format(path, "report is not a JSON object"))?;
    let scalar = |key: &str| {
        obj.get(key).and_then(decode).ok_or_else(|| Error::format(path, format!("missing or invalid {key:?}")))
    };
    let list = |key: &str| -> Result<Option<Vec<f64>>> {
        match obj.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| decode(v).ok_or_else(|| Error::format(path, format!("invalid entry in {key:?}"))))
                .collect::<Result<Vec<f64>>>()
                .map(Some),
            Some(_) => Err(Error::format(path, format!("{key:?} is not a list"))),
        }
    };
    let metrics = MetricsReport {
        psnr_db: scalar("psnr_db")?,
        sam_deg: scalar("sam_deg")?,
        ergas: scalar("ergas")?,
        ssim: scalar("ssim")?,
        rmse_per_band: list("rmse_per_band")?.ok_or_else(|| Error::format(path, "missing \"rmse_per_band\""))?,
    };
    Ok(StoredReport { metrics, wavelengths_nm: list("wavelengths_nm")? })
}

/// `PSNR=… SAM=… ERGAS=… SSIM=…`
pub fn summary_line(r: &MetricsReport) -> String {
    format!("PSNR={:.4} SAM={:.4} ERGAS={:.4} SSIM={:.4}", r.psnr_db, r.sam_deg, r.ergas, r.ssim)
}

/// Column labels from file stems, made unique by suffixing the position.
pub fn report_labels(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            let file = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            file.strip_suffix(".json").unwrap_or(&file).to_string()
        })
        .collect();
    stems
        .iter()
        .enumerate()
        .map(|(i, s)| if stems.iter().filter(|t| *t == s).count() > 1 { format!("{s}_{}", i + 1) } else { s.clone() })
        .collect()
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        v.to_string()
    }
}

/// Per-band RMSE table: `band`, optional `wavelength_nm`, then one column
/// per report in the given order.
pub fn rmse_table(labels: &[String], reports: &[StoredReport]) -> Result<String> {
    let bands = reports.first().map_or(0, |r| r.metrics.rmse_per_band.len());
    if let Some(r) = reports.iter().find(|r| r.metrics.rmse_per_band.len() != bands) {
        return Err(Error::Config(format!(
            "reports disagree on band count: {} vs {}",
            bands,
            r.metrics.rmse_per_band.len()
        )));
    }
    let wl = reports.iter().find_map(|r| r.wavelengths_nm.clone()).filter(|w| w.len() == bands);
    let mut header = vec!["band".to_string()];
    if wl.is_some() {
        header.push("wavelength_nm".into());
    }
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = (0..bands)
        .map(|b| {
            let mut row = vec![b.to_string()];
            if let Some(w) = &wl {
                row.push(fmt(w[b]));
            }
            row.extend(reports.iter().map(|r| fmt(r.metrics.rmse_per_band[b])));
            row
        })
        .collect();
    Ok(csv_text(&header, &rows))
}

/// One row per report: `report,psnr_db,sam_deg,ergas,ssim`.
pub fn metrics_table(labels: &[String], reports: &[StoredReport]) -> String {
    let header: Vec<String> = ["report", "psnr_db", "sam_deg", "ergas", "ssim"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = labels
        .iter()
        .zip(reports)
        .map(|(l, r)| {
            let m = &r.metrics;
            vec![l.clone(), fmt(m.psnr_db), fmt(m.sam_deg), fmt(m.ergas), fmt(m.ssim)]
        })
        .collect();
    csv_text(&header, &rows)
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Renders per-band RMSE curves as a PNG, one colored line per report in
/// palette order. The image carries no text; band numbers and labels live
/// in the CSV tables written alongside it.
pub fn plot_rmse(reports: &[StoredReport], path: &Path) -> Result<()> {
    let bands = reports.first().map_or(0, |r| r.metrics.rmse_per_band.len());
    let ymax = reports
        .iter()
        .flat_map(|r| r.metrics.rmse_per_band.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let ymax = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };
    let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = BitMapBackend::new(path, (800, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let xmax = (bands.max(2) - 1) as f64;
        let mut chart = ChartBuilder::on(&root).margin(20).build_cartesian_2d(0f64..xmax, 0f64..ymax)?;
        let grid = RGBColor(220, 220, 220);
        for i in 0..=10 {
            let y = ymax * i as f64 / 10.0;
            chart.draw_series(LineSeries::new([(0.0, y), (xmax, y)], grid))?;
        }
        chart.draw_series(LineSeries::new([(0.0, ymax), (0.0, 0.0), (xmax, 0.0)], BLACK))?;
        for (i, r) in reports.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points = r.metrics.rmse_per_band.iter().enumerate().map(|(b, &v)| (b as f64, v.min(ymax)));
            chart.draw_series(LineSeries::new(points, color.stroke_width(2)))?;
        }
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}
