use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decode::Backend;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AcceptanceSweep,
    DetectionSuite,
    DecoderValidation,
    BoundsTable,
    ProtocolSingle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AcceptanceSweep => "acceptance_sweep",
            ExperimentKind::DetectionSuite => "detection_suite",
            ExperimentKind::DecoderValidation => "decoder_validation",
            ExperimentKind::BoundsTable => "bounds_table",
            ExperimentKind::ProtocolSingle => "protocol_single",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "empty-vacuum")]
    EmptyVacuum,
    #[default]
    #[serde(rename = "fig2-pair")]
    Fig2Pair,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::EmptyVacuum => "empty-vacuum",
            Layout::Fig2Pair => "fig2-pair",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empty-vacuum" => Ok(Layout::EmptyVacuum),
            "fig2-pair" => Ok(Layout::Fig2Pair),
            other => Err(Error::Config(format!("unknown layout {other:?} (expected empty-vacuum or fig2-pair)"))),
        }
    }
}

/// Physical noise family; the flip probability comes from the `p` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    IidZ {},
    IidDepolarizingXz {},
    /// Per-qubit CSV table; `p` is ignored.
    Table { path: PathBuf },
}

/// Grid axes. Empty axes take per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub l: Vec<u32>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub p0: Vec<f64>,
}

/// Prover behavior as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// The configured noise family at rate `p`, or at each grid `p` if unset.
    Honest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
    /// The layout's canonical logical error on one block, the rest clean.
    SingleBadBlock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default)]
        position: usize,
    },
    /// The canonical logical error on every listed block.
    BadBlocks {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        positions: Vec<usize>,
    },
    /// Independent iid noise with a separate rate per block.
    BlockTable {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        p: Vec<f64>,
    },
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match self {
            StrategySpec::Honest { name: Some(n), .. }
            | StrategySpec::SingleBadBlock { name: Some(n), .. }
            | StrategySpec::BadBlocks { name: Some(n), .. }
            | StrategySpec::BlockTable { name: Some(n), .. } => n.clone(),
            StrategySpec::Honest { .. } => "honest".into(),
            StrategySpec::SingleBadBlock { .. } => "single_bad_block".into(),
            StrategySpec::BadBlocks { positions, .. } => format!("bad_blocks_{}", positions.len()),
            StrategySpec::BlockTable { .. } => "block_table".into(),
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::IidZ {}
    }
}

fn default_trials() -> u64 {
    1
}

fn default_nu_max() -> usize {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Significance level; `1/√(2k+1)` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<StrategySpec>,
    /// Leading trials per grid point written to the transcript stream.
    #[serde(default)]
    pub transcripts: u64,
    #[serde(default = "default_nu_max")]
    pub nu_max: usize,
    #[serde(default)]
    pub cross_check: bool,
    /// CSV of self-avoiding walk counts `(nu, count)` for the bounds table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saw_table: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical serialization; the integrity hash is taken over it.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn ps(&self) -> Vec<f64> {
        or_default(&self.grid.p, 0.0)
    }

    pub fn ds(&self) -> Vec<usize> {
        or_default(&self.grid.d, 3)
    }

    pub fn ks(&self) -> Vec<usize> {
        or_default(&self.grid.k, 1)
    }

    pub fn ls(&self) -> Vec<u32> {
        or_default(&self.grid.l, 0)
    }

    pub fn ms(&self) -> Vec<usize> {
        or_default(&self.grid.m, 1)
    }

    pub fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or_else(|| 1.0 / ((2 * k + 1) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported config version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let g = &self.grid;
        if let Some(p) = g.p.iter().chain(&g.p0).find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("probability {p} outside [0, 1]"));
        }
        if let Some(d) = g.d.iter().find(|&&d| d < 2) {
            return bad(format!("distance {d} below 2"));
        }
        if g.k.contains(&0) {
            return bad("k must be at least 1".into());
        }
        if g.m.contains(&0) {
            return bad("m must be at least 1".into());
        }
        if let Some(l) = g.l.iter().find(|&&l| l > crate::rmcode::MAX_LEVELS) {
            return bad(format!("level {l} exceeds {}", crate::rmcode::MAX_LEVELS));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("alpha {a} outside (0, 1]"));
            }
        }
        for s in &self.strategies {
            match s {
                StrategySpec::Honest { p: Some(p), .. } if !(0.0..=1.0).contains(p) => {
                    return bad(format!("strategy probability {p} outside [0, 1]"));
                }
                StrategySpec::BlockTable { p, .. } if p.iter().any(|p| !(0.0..=1.0).contains(p)) => {
                    return bad("block table probability outside [0, 1]".into());
                }
                StrategySpec::BadBlocks { positions, .. } if positions.is_empty() => {
                    return bad("bad_blocks needs at least one position".into());
                }
                _ => {}
            }
        }
        match self.experiment {
            ExperimentKind::DetectionSuite if self.strategies.is_empty() => {
                bad("detection_suite needs a nonempty strategies list".into())
            }
            ExperimentKind::BoundsTable
                if g.p0.is_empty() && g.p.is_empty() && g.k.is_empty() =>
            {
                bad("bounds_table needs at least one of grid.p0, grid.p, grid.k".into())
            }
            _ => Ok(()),
        }
    }
}

fn or_default<T: Clone>(v: &[T], default: T) -> Vec<T> {
    if v.is_empty() {
        vec![default]
    } else {
        v.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(r#"{"version": 1, "experiment": "protocol_single"}"#).unwrap();
        assert_eq!(c.layout, Layout::Fig2Pair);
        assert_eq!(c.backend, Backend::Exact);
        assert_eq!(c.trials, 1);
        assert_eq!(c.ds(), vec![3]);
        assert_eq!(c.noise, NoiseSpec::IidZ {});
        assert!((c.alpha_for(5) - 11f64.sqrt().recip()).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"version": 1, "experiment": "protocol_single", "trails": 3}"#,
            r#"{"version": 1, "experiment": "protocol_single", "grid": {"q": [1]}}"#,
            r#"{"version": 1, "experiment": "detection_suite", "strategies": [{"kind": "honest", "rate": 0.1}]}"#,
            r#"{"version": 1, "experiment": "protocol_single", "noise": {"kind": "iid_z", "p": 0.1}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invariants() {
        for text in [
            r#"{"version": 2, "experiment": "protocol_single"}"#,
            r#"{"version": 1, "experiment": "protocol_single", "trials": 0}"#,
            r#"{"version": 1, "experiment": "protocol_single", "grid": {"p": [1.5]}}"#,
            r#"{"version": 1, "experiment": "protocol_single", "grid": {"k": [0]}}"#,
            r#"{"version": 1, "experiment": "protocol_single", "layout": "moebius"}"#,
            r#"{"version": 1, "experiment": "detection_suite"}"#,
            r#"{"version": 1, "experiment": "bounds_table"}"#,
            r#"{"version": 1, "experiment": "protocol_single", "backend": "magic"}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(r#"{"version": 1, "experiment": "protocol_single"}"#).unwrap();
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.seed = 1;
        assert_ne!(a.sha256(), b.sha256());
        let back: ExperimentConfig = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn strategy_labels() {
        let s: Vec<StrategySpec> = serde_json::from_str(
            r#"[{"kind": "honest", "p": 0.02}, {"kind": "bad_blocks", "positions": [0, 1]},
                {"kind": "single_bad_block", "name": "one"}]"#,
        )
        .unwrap();
        let labels: Vec<String> = s.iter().map(StrategySpec::label).collect();
        assert_eq!(labels, ["honest", "bad_blocks_2", "one"]);
    }
}
