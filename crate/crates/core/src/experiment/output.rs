use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::Transcript;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "MANIFEST.json";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const PLOT_FILE: &str = "plot.py";

pub const CSV_HEADER: &str = "experiment,layout,backend,strategy,p,d,k,l,m,p0,alpha,metric,value,stderr,trials";

/// One metric at one grid point. Inputs that do not apply are left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub layout: String,
    pub backend: String,
    pub strategy: String,
    pub p: Option<f64>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<u32>,
    pub m: Option<usize>,
    pub p0: Option<f64>,
    pub alpha: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub trials: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TranscriptLine {
    pub point: u64,
    pub strategy: String,
    pub transcript: Transcript,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointTiming {
    pub point: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub complete: bool,
    pub points: usize,
    pub rows: usize,
    pub transcripts: usize,
    pub timings: Vec<PointTiming>,
    pub wall_seconds: f64,
    pub decoder_validity_checks: u64,
    pub error: Option<String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Integrity(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))
    }
}

pub fn csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Io(e.into()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_outputs(
    dir: &Path,
    rows: &[ResultRow],
    transcripts: &[TranscriptLine],
    manifest: &Manifest,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SUMMARY_FILE), csv_bytes(rows)?)?;
    if !transcripts.is_empty() {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join(TRANSCRIPTS_FILE))?);
        for t in transcripts {
            serde_json::to_writer(&mut f, t)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    fs::write(dir.join(PLOT_FILE), PLOT_SCRIPT)?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot every metric in summary.csv against p (or p0), one line per
remaining input combination. Usage: python3 plot.py [summary.csv]"""
import sys
import pandas as pd
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "summary.csv"
df = pd.read_csv(path)
inputs = ["strategy", "d", "k", "l", "m", "alpha"]
for metric, rows in df.groupby("metric"):
    x = "p" if rows["p"].notna().any() else "p0"
    if rows[x].isna().all():
        continue
    fig, ax = plt.subplots()
    keys = [c for c in inputs if rows[c].notna().any()]
    groups = rows.groupby(keys, dropna=False) if keys else [((), rows)]
    for key, g in groups:
        g = g.sort_values(x)
        label = ", ".join(f"{c}={v}" for c, v in zip(keys, key if isinstance(key, tuple) else (key,)))
        ax.errorbar(g[x], g["value"], yerr=g["stderr"].fillna(0), marker="o", label=label)
    ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(metric)
    if keys:
        ax.legend(fontsize="small")
    fig.savefig(f"{metric}.png", dpi=120, bbox_inches="tight")
    plt.close(fig)
"#;
