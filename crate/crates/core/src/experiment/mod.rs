//! Experiment configuration, sweep execution, result files and replay.

mod config;
mod output;
mod runner;

use std::io::BufRead;
use std::path::Path;
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentKind, Grid, Layout, NoiseSpec, StrategySpec, SCHEMA_VERSION};
pub use output::{
    csv_bytes, Manifest, PointTiming, ResultRow, TranscriptLine, CSV_HEADER, MANIFEST_FILE, PLOT_FILE, SUMMARY_FILE,
    TRANSCRIPTS_FILE,
};
pub use runner::{enumerate_points, noise_model, protocol_config, run_point, LatticeCache, Point};

use crate::decode::validity_checks;
use crate::error::{Error, Result};
use crate::protocol::run_trial;

/// Process exit status for a run outcome.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::Capacity { .. }) => 3,
        Err(Error::Config(_) | Error::Parse(_) | Error::InvalidSpec(_) | Error::Domain(_) | Error::TableCoverage(_)) => 2,
        Err(_) => 1,
    }
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

/// Runs every point of `cfg` on a pool of `threads` workers and writes the
/// result files to `out_dir`. A failing point still leaves the finished
/// rows and a manifest with `complete: false` behind.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let points = enumerate_points(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let checks_before = validity_checks();
    let (rows, transcripts, times, failure) = pool.install(|| runner::run_points(cfg, &points));
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(cfg)?,
        config_sha256: cfg.sha256(),
        seed: cfg.seed,
        threads: threads.max(1),
        complete: failure.is_none(),
        points: points.len(),
        rows: rows.len(),
        transcripts: transcripts.len(),
        timings: times
            .iter()
            .enumerate()
            .map(|(i, &t)| PointTiming {
                point: i as u64,
                wall_seconds: t,
            })
            .collect(),
        wall_seconds: start.elapsed().as_secs_f64(),
        decoder_validity_checks: validity_checks() - checks_before,
        error: failure.as_ref().map(ToString::to_string),
    };
    output::write_outputs(out_dir, &rows, &transcripts, &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(RunOutput { rows, manifest }),
    }
}

/// Verifies a finished run's manifest against its embedded config.
pub fn verified_config(manifest: &Manifest) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| Error::Integrity(format!("manifest config does not parse: {e}")))?;
    if cfg.sha256() != manifest.config_sha256 {
        return Err(Error::Integrity("config hash does not match the manifest".into()));
    }
    if cfg.seed != manifest.seed {
        return Err(Error::Integrity(format!(
            "manifest seed {} differs from config seed {}",
            manifest.seed, cfg.seed
        )));
    }
    cfg.validate().map_err(|e| Error::Integrity(format!("manifest config invalid: {e}")))?;
    Ok(cfg)
}

/// Regenerates trial `trial` of grid point `point` from the run whose
/// transcript stream is `transcripts`. The manifest must sit in the same
/// directory. If the stream holds that trial, the regenerated line must
/// match it byte for byte.
pub fn replay(transcripts: &Path, point: u64, trial: u64, threads: usize) -> Result<String> {
    let dir = transcripts.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let manifest = Manifest::load(dir)?;
    let cfg = verified_config(&manifest)?;
    let points = enumerate_points(&cfg)?;
    let pt = points
        .iter()
        .find(|p| p.index == point)
        .ok_or_else(|| Error::Integrity(format!("run has no point {point}")))?;
    if pt.strategy.is_none() {
        return Err(Error::Config(format!("{} runs have no transcripts", cfg.experiment.name())));
    }
    if trial >= cfg.trials {
        return Err(Error::Config(format!("trial {trial} outside 0..{}", cfg.trials)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let line = pool.install(|| -> Result<String> {
        let pc = protocol_config(&cfg, pt, &mut LatticeCache::default())?;
        let strategy = pt.strategy.as_ref().map(StrategySpec::label).unwrap_or_default();
        Ok(serde_json::to_string(&TranscriptLine {
            point,
            strategy,
            transcript: run_trial(&pc, trial)?,
        })?)
    })?;
    if let Some(recorded) = find_recorded(transcripts, point, trial)? {
        if recorded != line {
            return Err(Error::Integrity(format!(
                "regenerated transcript for point {point} trial {trial} differs from the recorded one"
            )));
        }
    }
    Ok(line)
}

fn find_recorded(path: &Path, point: u64, trial: u64) -> Result<Option<String>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    #[derive(serde::Deserialize)]
    struct Key {
        point: u64,
        transcript: TrialKey,
    }
    #[derive(serde::Deserialize)]
    struct TrialKey {
        trial: u64,
    }
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        let key: Key = serde_json::from_str(&line).map_err(|e| Error::Integrity(format!("bad transcript line: {e}")))?;
        if key.point == point && key.transcript.trial == trial {
            return Ok(Some(line));
        }
    }
    Ok(None)
}
