//! Artifact readers and writers shared across subcommands: prediction CSVs,
//! trace CSVs, convergence traces, plot-ready long-format data, and the
//! aligned evaluation table.

use std::path::Path;

use hydroflux::abcd::AbcdTrace;
use hydroflux::metrics::MetricSummary;
use hydroflux::timeseries::{format_value, MonthStamp};

use crate::CliError;

pub struct PredictionSeries {
    pub stamps: Vec<MonthStamp>,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

pub fn write_predictions(path: &Path, p: &PredictionSeries) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let bounds = p.lower.is_some() && p.upper.is_some();
    if bounds {
        w.write_record(["date", "observed", "predicted", "lower", "upper"])?;
    } else {
        w.write_record(["date", "observed", "predicted"])?;
    }
    for i in 0..p.stamps.len() {
        let mut row = vec![
            p.stamps[i].to_string(),
            format_value(p.observed[i]),
            format_value(p.predicted[i]),
        ];
        if bounds {
            row.push(format_value(p.lower.as_ref().unwrap()[i]));
            row.push(format_value(p.upper.as_ref().unwrap()[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<PredictionSeries, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let idx = |name: &str| headers.iter().position(|h| h == name);
    let (Some(di), Some(oi), Some(pi)) = (idx("date"), idx("observed"), idx("predicted")) else {
        return Err(CliError::data(format!(
            "{} must carry date, observed, predicted columns",
            path.display()
        )));
    };
    let (li, ui) = (idx("lower"), idx("upper"));
    let mut out = PredictionSeries {
        stamps: vec![],
        observed: vec![],
        predicted: vec![],
        lower: li.map(|_| vec![]),
        upper: ui.map(|_| vec![]),
    };
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let cell = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| CliError::data(format!("bad number at row {row} of {}", path.display())))
        };
        out.stamps.push(
            record
                .get(di)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| CliError::data(format!("bad date at row {row}: {e}")))?,
        );
        out.observed.push(cell(oi)?);
        out.predicted.push(cell(pi)?);
        if let (Some(l), Some(v)) = (li, out.lower.as_mut()) {
            v.push(cell(l)?);
        }
        if let (Some(u), Some(v)) = (ui, out.upper.as_mut()) {
            v.push(cell(u)?);
        }
    }
    Ok(out)
}

pub fn write_trace_csv(path: &Path, trace: &AbcdTrace<f64>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "W", "Y", "ET", "SM", "DR", "GR", "GW", "GD", "Q"])?;
    for (i, r) in trace.records().iter().enumerate() {
        w.write_record(&[
            trace.stamp(i).to_string(),
            format_value(r.w),
            format_value(r.y),
            format_value(r.et),
            format_value(r.sm),
            format_value(r.dr),
            format_value(r.gr),
            format_value(r.gw),
            format_value(r.gd),
            format_value(r.q),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence_csv(path: &Path, convergence: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "best_objective"])?;
    for (i, v) in convergence.iter().enumerate() {
        w.write_record(&[(i + 1).to_string(), format!("{v:.12e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format plot data: one row per (month, variable, series).
pub struct PlotBlock<'a> {
    pub variable: &'a str,
    pub series: &'a str,
    pub stamps: &'a [MonthStamp],
    pub values: &'a [f64],
}

pub fn write_plot_data(path: &Path, blocks: &[PlotBlock<'_>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "variable", "series", "value_mm"])?;
    for b in blocks {
        for (stamp, value) in b.stamps.iter().zip(b.values) {
            w.write_record(&[
                stamp.to_string(),
                b.variable.to_string(),
                b.series.to_string(),
                format_value(*value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text rendering of per-variable metric summaries.
pub fn render_report_table(rows: &[(String, MetricSummary<f64>, Option<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>10} {:>10} {:>10} {:>16} {:>8} {:>10}\n",
        "variable", "nse", "pbias", "rmse", "class", "n", "coverage"
    ));
    for (name, m, coverage) in rows {
        out.push_str(&format!(
            "{:<10} {:>10.3} {:>10.3} {:>10.3} {:>16} {:>8} {:>10}\n",
            name,
            m.nse,
            m.pbias,
            m.rmse,
            m.moriasi_class.to_string(),
            m.n,
            coverage.map_or("-".to_string(), |c| format!("{c:.3}")),
        ));
    }
    out
}

pub fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("cannot serialize json: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
