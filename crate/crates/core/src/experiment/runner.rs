use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, Layout, NoiseSpec, StrategySpec};
use super::output::{ResultRow, TranscriptLine};
use crate::bounds::{p0_fault, rm_acceptance_bound, rm_fault_recursion, sf_rejection_bound, theorem1_bound, trace_distance_bound, SawTable};
use crate::decode::{in_ssf, SsfOptions};
use crate::error::{Error, Result};
use crate::f2core::{deviation, TestKind};
use crate::lattice::{ClusterLattice, LatticeSpec, Sublattice};
use crate::noise::{sample_block_error, AdversaryStrategy, NoiseModel};
use crate::protocol::{acceptance_from, canonical_logical_error, detection_row, run_trial, run_trials, ProtocolConfig, Rate};
use crate::rmcode::RMCodeSpec;
use crate::rng::{point_seed, stream, Stage};

/// One unit of work: a grid coordinate plus, for protocol experiments, a
/// prover strategy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub index: u64,
    pub p: Option<f64>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<u32>,
    pub m: Option<usize>,
    pub p0: Option<f64>,
    #[serde(skip)]
    pub strategy: Option<StrategySpec>,
}

impl Point {
    fn new(p: Option<f64>, d: Option<usize>, k: Option<usize>, l: Option<u32>, m: Option<usize>) -> Self {
        Point {
            index: 0,
            p,
            d,
            k,
            l,
            m,
            p0: None,
            strategy: None,
        }
    }

    pub fn seed(&self, master: u64) -> u64 {
        point_seed(master, self.index)
    }
}

/// Grid points of an experiment in their canonical order. A point's index
/// keys its random streams.
pub fn enumerate_points(cfg: &ExperimentConfig) -> Result<Vec<Point>> {
    let singular = cfg.layout == Layout::Fig2Pair;
    let (ls, ms) = if singular { (cfg.ls(), cfg.ms()) } else { (vec![0], vec![1]) };
    let lm = |l: u32, m: usize| if singular { (Some(l), Some(m)) } else { (None, None) };
    let mut points = Vec::new();
    match cfg.experiment {
        ExperimentKind::ProtocolSingle => {
            let g = &cfg.grid;
            if [g.p.len(), g.d.len(), g.k.len(), g.l.len(), g.m.len()].iter().any(|&n| n > 1) || cfg.strategies.len() > 1 {
                return Err(Error::Config("protocol_single takes one value per grid axis and at most one strategy".into()));
            }
            let (l, m) = lm(ls[0], ms[0]);
            let mut pt = Point::new(Some(cfg.ps()[0]), Some(cfg.ds()[0]), Some(cfg.ks()[0]), l, m);
            pt.strategy = Some(cfg.strategies.first().cloned().unwrap_or(StrategySpec::Honest { name: None, p: None }));
            if let Some(StrategySpec::Honest { p: Some(sp), .. }) = &pt.strategy {
                pt.p = Some(*sp);
            } else if !matches!(pt.strategy, Some(StrategySpec::Honest { .. })) {
                pt.p = None;
            }
            points.push(pt);
        }
        ExperimentKind::AcceptanceSweep => {
            for d in cfg.ds() {
                for k in cfg.ks() {
                    for &l in &ls {
                        for &m in &ms {
                            for p in cfg.ps() {
                                let (l, m) = lm(l, m);
                                let mut pt = Point::new(Some(p), Some(d), Some(k), l, m);
                                pt.strategy = Some(StrategySpec::Honest { name: None, p: None });
                                points.push(pt);
                            }
                        }
                    }
                }
            }
        }
        ExperimentKind::DetectionSuite => {
            for d in cfg.ds() {
                for k in cfg.ks() {
                    for &l in &ls {
                        for &m in &ms {
                            for s in &cfg.strategies {
                                let (l, m) = lm(l, m);
                                let ps: Vec<Option<f64>> = match s {
                                    StrategySpec::Honest { p: Some(p), .. } => vec![Some(*p)],
                                    StrategySpec::Honest { p: None, .. } => cfg.ps().into_iter().map(Some).collect(),
                                    _ => vec![None],
                                };
                                for p in ps {
                                    let mut pt = Point::new(p, Some(d), Some(k), l, m);
                                    pt.strategy = Some(s.clone());
                                    points.push(pt);
                                }
                            }
                        }
                    }
                }
            }
        }
        ExperimentKind::DecoderValidation => {
            for d in cfg.ds() {
                for p in cfg.ps() {
                    points.push(Point::new(Some(p), Some(d), None, None, None));
                }
            }
        }
        ExperimentKind::BoundsTable => {
            let g = &cfg.grid;
            for &p0 in &g.p0 {
                for l in cfg.ls() {
                    let mut pt = Point::new(None, None, None, Some(l), None);
                    pt.p0 = Some(p0);
                    points.push(pt.clone());
                    for &m in &g.m {
                        pt.m = Some(m);
                        points.push(pt.clone());
                    }
                }
            }
            for &p in &g.p {
                for d in cfg.ds() {
                    points.push(Point::new(Some(p), Some(d), None, None, None));
                }
            }
            for &k in &g.k {
                points.push(Point::new(None, None, Some(k), None, None));
            }
        }
    }
    for (i, pt) in points.iter_mut().enumerate() {
        pt.index = i as u64;
    }
    Ok(points)
}

/// Lattices shared by every point with the same geometry.
#[derive(Default)]
pub struct LatticeCache {
    built: HashMap<(Layout, usize, usize), Arc<ClusterLattice>>,
}

impl LatticeCache {
    pub fn get(&mut self, layout: Layout, d: usize, sites: usize) -> Result<Arc<ClusterLattice>> {
        if let Some(l) = self.built.get(&(layout, d, sites)) {
            return Ok(l.clone());
        }
        let spec = match layout {
            Layout::EmptyVacuum => LatticeSpec::empty_vacuum(d),
            Layout::Fig2Pair => LatticeSpec::fig2_pair(d, sites),
        };
        let lat = Arc::new(ClusterLattice::build(&spec)?);
        self.built.insert((layout, d, sites), lat.clone());
        Ok(lat)
    }
}

pub fn noise_model(spec: &NoiseSpec, p: f64) -> Result<NoiseModel> {
    let model = match spec {
        NoiseSpec::IidZ {} => NoiseModel::IidZ { p },
        NoiseSpec::IidDepolarizingXz {} => NoiseModel::IidDepolarizingXz { p },
        NoiseSpec::Table { path } => NoiseModel::table_from_csv(path)?,
    };
    model.validate()?;
    Ok(model)
}

fn strategy_for(cfg: &ExperimentConfig, pt: &Point, lat: &ClusterLattice, blocks: usize) -> Result<AdversaryStrategy> {
    let spec = pt.strategy.as_ref().expect("protocol point has a strategy");
    let n = lat.n();
    let clean = || NoiseModel::IidZ { p: 0.0 };
    let bad_table = |positions: &[usize]| -> Result<AdversaryStrategy> {
        let err = canonical_logical_error(lat)?;
        let rows: Vec<[f64; 4]> = (0..n)
            .map(|q| match (err.xpart.get(q), err.zpart.get(q)) {
                (false, false) => [1.0, 0.0, 0.0, 0.0],
                (true, false) => [0.0, 1.0, 0.0, 0.0],
                (false, true) => [0.0, 0.0, 1.0, 0.0],
                (true, true) => [0.0, 0.0, 0.0, 1.0],
            })
            .collect();
        let bad = NoiseModel::PerQubitTable { table: rows };
        let mut blocks_v = vec![clean(); blocks];
        for &b in positions {
            let slot = blocks_v
                .get_mut(b)
                .ok_or_else(|| Error::Config(format!("bad block position {b} outside 0..{blocks}")))?;
            *slot = bad.clone();
        }
        Ok(AdversaryStrategy::BlockTable { blocks: blocks_v })
    };
    match spec {
        StrategySpec::Honest { .. } => Ok(AdversaryStrategy::Honest {
            noise: noise_model(&cfg.noise, pt.p.unwrap_or(0.0))?,
        }),
        StrategySpec::SingleBadBlock { position, .. } => Ok(AdversaryStrategy::SingleBadBlock {
            bad_error: canonical_logical_error(lat)?,
            position: *position,
        }),
        StrategySpec::BadBlocks { positions, .. } => bad_table(positions),
        StrategySpec::BlockTable { p, .. } => Ok(AdversaryStrategy::BlockTable {
            blocks: p.iter().map(|&p| noise_model(&cfg.noise, p)).collect::<Result<_>>()?,
        }),
    }
}

/// The protocol configuration of one point.
pub fn protocol_config(cfg: &ExperimentConfig, pt: &Point, cache: &mut LatticeCache) -> Result<ProtocolConfig> {
    let (d, k) = (pt.d.expect("d"), pt.k.expect("k"));
    let rm = RMCodeSpec {
        levels: pt.l.unwrap_or(0),
        measurements: pt.m.unwrap_or(1),
    };
    let sites = if cfg.layout == Layout::Fig2Pair { rm.total_leaves() } else { 0 };
    let lattice = cache.get(cfg.layout, d, sites)?;
    let strategy = strategy_for(cfg, pt, &lattice, 2 * k + 1)?;
    let pc = ProtocolConfig {
        k,
        alpha: cfg.alpha_for(k),
        lattice,
        rm,
        strategy,
        ssf: SsfOptions {
            backend: cfg.backend,
            cross_check: cfg.cross_check,
        },
        seed: pt.seed(cfg.seed),
    };
    pc.validate()?;
    Ok(pc)
}

pub struct PointResult {
    pub rows: Vec<ResultRow>,
    pub transcripts: Vec<TranscriptLine>,
}

fn row(cfg: &ExperimentConfig, pt: &Point, alpha: Option<f64>) -> ResultRow {
    ResultRow {
        experiment: cfg.experiment.name().into(),
        layout: cfg.layout.name().into(),
        backend: cfg.backend.name().into(),
        strategy: pt.strategy.as_ref().map(StrategySpec::label).unwrap_or_default(),
        p: pt.p,
        d: pt.d,
        k: pt.k,
        l: pt.l,
        m: pt.m,
        p0: pt.p0,
        alpha,
        metric: String::new(),
        value: 0.0,
        stderr: None,
        trials: None,
    }
}

fn rate_row(base: &ResultRow, metric: &str, r: Rate) -> ResultRow {
    ResultRow {
        metric: metric.into(),
        value: r.value,
        stderr: Some(r.stderr),
        trials: Some(r.total),
        ..base.clone()
    }
}

fn value_row(base: &ResultRow, metric: &str, value: f64) -> ResultRow {
    ResultRow {
        metric: metric.into(),
        value,
        ..base.clone()
    }
}

/// Evaluates one point on the current rayon pool.
pub fn run_point(cfg: &ExperimentConfig, pt: &Point, cache: &mut LatticeCache) -> Result<PointResult> {
    let mut rows = Vec::new();
    let mut transcripts = Vec::new();
    match cfg.experiment {
        ExperimentKind::ProtocolSingle | ExperimentKind::AcceptanceSweep | ExperimentKind::DetectionSuite => {
            let pc = protocol_config(cfg, pt, cache)?;
            let counters = run_trials(&pc, cfg.trials)?;
            let base = row(cfg, pt, Some(pc.alpha));
            if cfg.experiment == ExperimentKind::DetectionSuite {
                let det = detection_row(&base.strategy, counters, pc.alpha, pc.k)?;
                rows.push(rate_row(&base, "accept", det.accept));
                rows.push(rate_row(&base, "membership_given_accept", det.membership_given_accept));
                rows.push(value_row(&base, "theorem1_bound", det.theorem1));
                rows.push(value_row(&base, "violation", if det.violates { 1.0 } else { 0.0 }));
            } else {
                let est = acceptance_from(counters, pc.k);
                rows.push(rate_row(&base, "accept", est.accept));
                rows.push(rate_row(&base, "pass_b", est.pass_b));
                rows.push(rate_row(&base, "pass_w", est.pass_w));
                rows.push(ResultRow {
                    stderr: Some(est.predicted_stderr),
                    trials: Some(counters.trials),
                    ..value_row(&base, "product_form", est.predicted)
                });
                rows.push(rate_row(&base, "compute_in_s", Rate::new(counters.compute_in_s, counters.trials)));
                rows.push(rate_row(
                    &base,
                    "membership_given_accept",
                    Rate::new(counters.accepted_in_s, counters.accepted),
                ));
                rows.push(rate_row(
                    &base,
                    "logical_failure_given_accept",
                    Rate::new(counters.accepted_logical_failure, counters.accepted),
                ));
            }
            for t in 0..cfg.transcripts.min(cfg.trials) {
                transcripts.push(TranscriptLine {
                    point: pt.index,
                    strategy: base.strategy.clone(),
                    transcript: run_trial(&pc, t)?,
                });
            }
        }
        ExperimentKind::DecoderValidation => {
            let (p, d) = (pt.p.expect("p"), pt.d.expect("d"));
            let lat = cache.get(cfg.layout, d, 0)?;
            let counts = decoder_counts(cfg, &lat, p, pt.seed(cfg.seed))?;
            let base = row(cfg, pt, None);
            rows.push(rate_row(&base, "rejection_b", Rate::new(counts.rejected_b, counts.trials)));
            rows.push(rate_row(&base, "rejection_w", Rate::new(counts.rejected_w, counts.trials)));
            rows.push(rate_row(&base, "homology_b", Rate::new(counts.homology_b, counts.trials)));
            rows.push(rate_row(&base, "homology_w", Rate::new(counts.homology_w, counts.trials)));
            let sf = sf_rejection_bound(lat.n_black() as u64, p, d, cfg.nu_max.max(d))?;
            rows.push(value_row(&base, "sf_bound_closed_form", sf.closed_form));
            rows.push(value_row(&base, "sf_bound_explicit", sf.explicit + sf.tail));
        }
        ExperimentKind::BoundsTable => {
            let base = row(cfg, pt, None);
            match (pt.p0, pt.p, pt.k) {
                (Some(p0), _, _) => {
                    let l = pt.l.expect("l");
                    match pt.m {
                        None => {
                            let r = rm_fault_recursion(p0, l)?;
                            rows.push(value_row(&base, "rm_fault", r.value.value));
                        }
                        Some(m) => {
                            let b = rm_acceptance_bound(p0, l, m as u64)?;
                            rows.push(value_row(&base, "rm_acceptance", b.value));
                        }
                    }
                }
                (None, Some(p), _) => {
                    let d = pt.d.expect("d");
                    let lat = cache.get(cfg.layout, d, 0)?;
                    let n = lat.n_black() as u64;
                    let sf = sf_rejection_bound(n, p, d, cfg.nu_max.max(d))?;
                    rows.push(value_row(&base, "sf_bound_closed_form", sf.closed_form));
                    rows.push(value_row(&base, "sf_bound_explicit", sf.explicit));
                    rows.push(value_row(&base, "sf_bound_tail", sf.tail));
                    let table = match &cfg.saw_table {
                        Some(path) => SawTable::from_csv(path)?,
                        None => SawTable::upper_bound_6x5(d, 1.0),
                    };
                    rows.push(value_row(&base, "p0_fault", p0_fault(p, d, &table, n)?));
                }
                (None, None, Some(k)) => {
                    let alpha = cfg.alpha_for(k);
                    let base = ResultRow {
                        alpha: Some(alpha),
                        ..base
                    };
                    rows.push(value_row(&base, "theorem1_bound", theorem1_bound(alpha, k as u64)?));
                    rows.push(value_row(&base, "trace_distance_bound", trace_distance_bound(alpha, k as u64)?));
                }
                _ => unreachable!("bounds point without inputs"),
            }
        }
    }
    Ok(PointResult { rows, transcripts })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct DecoderCounts {
    trials: u64,
    rejected_b: u64,
    rejected_w: u64,
    homology_b: u64,
    homology_w: u64,
}

impl DecoderCounts {
    fn merge(self, o: Self) -> Self {
        DecoderCounts {
            trials: self.trials + o.trials,
            rejected_b: self.rejected_b + o.rejected_b,
            rejected_w: self.rejected_w + o.rejected_w,
            homology_b: self.homology_b + o.homology_b,
            homology_w: self.homology_w + o.homology_w,
        }
    }
}

/// Per-block membership of honest noise in `S^sf` on both sublattices.
fn decoder_counts(cfg: &ExperimentConfig, lat: &ClusterLattice, p: f64, seed: u64) -> Result<DecoderCounts> {
    let model = noise_model(&cfg.noise, p)?;
    let opts = SsfOptions {
        backend: cfg.backend,
        cross_check: cfg.cross_check,
    };
    (0..cfg.trials)
        .into_par_iter()
        .try_fold(DecoderCounts::default, |mut c, t| -> Result<DecoderCounts> {
            let err = sample_block_error(&model, lat.n(), &mut stream(seed, t, 0, Stage::Noise));
            c.trials += 1;
            for (kind, sub) in [(TestKind::Black, Sublattice::Primal), (TestKind::White, Sublattice::Dual)] {
                let dev = deviation(&err, lat.graph(), kind);
                let (v, a) = in_ssf(lat, sub, &dev, opts)?;
                let (rej, hom) = match sub {
                    Sublattice::Primal => (&mut c.rejected_b, &mut c.homology_b),
                    Sublattice::Dual => (&mut c.rejected_w, &mut c.homology_w),
                };
                *rej += !v.is_member() as u64;
                *hom += a.homology_nontrivial as u64;
            }
            Ok(c)
        })
        .try_reduce(DecoderCounts::default, |a, b| Ok(a.merge(b)))
}

/// Rows and transcripts of every point, in point order, with the time spent
/// on each. Stops at the first failing point and returns what finished.
pub fn run_points(
    cfg: &ExperimentConfig,
    points: &[Point],
) -> (Vec<ResultRow>, Vec<TranscriptLine>, Vec<f64>, Option<Error>) {
    let mut cache = LatticeCache::default();
    let (mut rows, mut transcripts, mut times) = (Vec::new(), Vec::new(), Vec::new());
    for pt in points {
        let start = Instant::now();
        match run_point(cfg, pt, &mut cache) {
            Ok(r) => {
                rows.extend(r.rows);
                transcripts.extend(r.transcripts);
                times.push(start.elapsed().as_secs_f64());
            }
            Err(e) => return (rows, transcripts, times, Some(e)),
        }
    }
    (rows, transcripts, times, None)
}
