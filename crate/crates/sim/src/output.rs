//! CSV tables, trial logs and plotting scripts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::sweep::{Table, TrialRecord};

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "scheme",
    "channel_kind",
    "sweep_param",
    "sweep_value",
    "snr_db",
    "trials",
    "mean_sum_rate_bps_hz",
    "stderr_sum_rate",
    "mean_per_user_rate_min",
    "mean_per_user_rate_max",
    "feasible",
];

/// Shortest decimal that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Write the table as CSV. Infeasible rows keep their coordinates and leave
/// the statistics empty.
pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<csv::Writer<W>> {
    if table.rows.is_empty() {
        return Err(SimError::EmptyTable);
    }
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| SimError::io("<csv>", e.into());
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for row in &table.rows {
        let stats = row
            .stats
            .map(|s| [s.mean_sum_rate, s.stderr_sum_rate, s.mean_per_user_rate_min, s.mean_per_user_rate_max].map(num));
        let [mean, stderr, lo, hi] = stats.unwrap_or_default();
        w.write_record([
            row.scenario.clone(),
            row.scheme.label().to_string(),
            row.channel_kind.label().to_string(),
            row.sweep_param.map_or("none", |p| p.label()).to_string(),
            row.sweep_value.map(num).unwrap_or_default(),
            num(row.snr_db),
            row.trials.to_string(),
            mean,
            stderr,
            lo,
            hi,
            row.stats.is_some().to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush().map_err(|e| SimError::io("<csv>", e))?;
    Ok(w)
}

pub fn csv_string(table: &Table) -> Result<String> {
    let w = write_csv(table, Vec::new())?;
    let bytes = w.into_inner().map_err(|e| SimError::io("<csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv fields are utf-8"))
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let text = csv_string(table)?;
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}

#[derive(Serialize)]
struct SchemeLog<'a> {
    scheme: &'a str,
    snr_db: Vec<f64>,
    sum_rate: Vec<f64>,
    per_user_rate: Vec<&'a [f64]>,
    water_level: &'a [f64],
    nulling_residual: &'a [f64],
    power_error: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    combiner_indices: Option<&'a [Vec<usize>]>,
    flagged: bool,
}

#[derive(Serialize)]
struct TrialLog<'a> {
    trial: u64,
    sweep_value: Option<f64>,
    wall_time_secs: f64,
    schemes: Vec<SchemeLog<'a>>,
}

/// One JSON object per trial and sweep point.
pub fn write_trial_log(records: &[TrialRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        for point in &record.points {
            let schemes = point
                .outcomes
                .iter()
                .filter_map(|(_, o)| o.as_ref())
                .map(|o| SchemeLog {
                    scheme: o.scheme.label(),
                    snr_db: o.reports.iter().map(|r| r.snr_db).collect(),
                    sum_rate: o.reports.iter().map(|r| r.sum_rate).collect(),
                    per_user_rate: o.reports.iter().map(|r| r.per_user_rate.as_slice()).collect(),
                    water_level: &o.water_levels,
                    nulling_residual: &o.nulling_residuals,
                    power_error: &o.power_errors,
                    combiner_indices: o.combiner_indices.as_deref(),
                    flagged: o.flagged(),
                })
                .collect();
            let line = TrialLog {
                trial: record.trial_index,
                sweep_value: point.value,
                wall_time_secs: record.wall_time_secs,
                schemes,
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| SimError::io(path, e.into()))?;
            out.write_all(b"\n").map_err(|e| SimError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| SimError::io(path, e))
}

/// A matplotlib script that only reads and draws `csv_path`.
pub fn plot_script(csv_path: &Path) -> String {
    let csv = csv_path.display().to_string().replace('\\', "\\\\").replace('"', "\\\"");
    format!(
        r#"import csv
from collections import defaultdict

import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open("{csv}")) if r["feasible"] == "true"]
swept = rows and rows[0]["sweep_param"] not in ("none", "snr")
curves = defaultdict(list)
for r in rows:
    if swept:
        key = (r["scheme"], "SNR " + r["snr_db"] + " dB")
        x = float(r["sweep_value"])
    else:
        key = (r["scheme"], "")
        x = float(r["snr_db"])
    curves[key].append((x, float(r["mean_sum_rate_bps_hz"])))

for (scheme, label), points in sorted(curves.items()):
    xs, ys = zip(*sorted(points))
    plt.plot(xs, ys, marker="o", label=(scheme + " " + label).strip())
plt.xlabel(rows[0]["sweep_param"] if swept else "SNR (dB)")
plt.ylabel("sum spectral efficiency (bits/s/Hz)")
plt.grid(True)
plt.legend()
plt.title(rows[0]["scenario"] if rows else "")
plt.savefig("{csv}".rsplit(".", 1)[0] + ".png", dpi=150)
"#
    )
}

pub fn write_plot_script(csv_path: &Path, script_path: &Path) -> Result<()> {
    std::fs::write(script_path, plot_script(csv_path)).map_err(|e| SimError::io(script_path, e))
}
