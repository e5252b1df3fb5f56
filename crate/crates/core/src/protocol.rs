//! The verification protocol: `2k+1` blocks, a uniformly random split into
//! `k` T_B tests, `k` T_W tests and one compute block, and ground truth for
//! the compute block.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::decode::{in_ssf, ResidualAnalysis, SsfOptions, SsfVerdict};
use crate::error::{Error, Result};
use crate::f2core::{deviation, sample_test_outcomes, test_statistic, BitVec, MeasurementRecord, PauliError, TestKind};
use crate::lattice::{Axis, Boundary, ClusterLattice, Sublattice};
use crate::noise::{sample_prover_blocks, AdversaryStrategy};
use crate::rmcode::{in_srm, RMCodeSpec, RmVerdict};
use crate::rng::{stream, Stage};

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub k: usize,
    pub alpha: f64,
    pub lattice: Arc<ClusterLattice>,
    pub rm: RMCodeSpec,
    pub strategy: AdversaryStrategy,
    pub ssf: SsfOptions,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        self.rm.check_assignment(&self.lattice)?;
        self.strategy.validate(self.blocks(), self.lattice.n())
    }

    pub fn blocks(&self) -> usize {
        2 * self.k + 1
    }
}

fn sublattice(kind: TestKind) -> Sublattice {
    match kind {
        TestKind::Black => Sublattice::Primal,
        TestKind::White => Sublattice::Dual,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestOutcome {
    pub block: usize,
    pub test: TestKind,
    pub record: MeasurementRecord,
    pub ssf: SsfVerdict,
    pub rm: RmVerdict,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ComputeTruth {
    pub ssf_b: bool,
    pub ssf_w: bool,
    pub rm_b: bool,
    pub rm_w: bool,
    /// The error lies in `S = S_B × S_W`.
    pub in_s: bool,
    /// A residual flips a logical membrane, or the fault trees built from
    /// both residuals together have a faulty top.
    pub logical_failure: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transcript {
    pub trial: u64,
    pub test_b: Vec<usize>,
    pub test_w: Vec<usize>,
    pub compute: usize,
    pub tests: Vec<TestOutcome>,
    pub accepted: bool,
    pub compute_truth: ComputeTruth,
}

struct ColorVerdict {
    ssf: SsfVerdict,
    rm: RmVerdict,
    analysis: ResidualAnalysis,
}

fn judge(cfg: &ProtocolConfig, error: &PauliError, kind: TestKind) -> Result<ColorVerdict> {
    let lat = &cfg.lattice;
    let dev = deviation(error, lat.graph(), kind);
    let sub = sublattice(kind);
    let (ssf, analysis) = in_ssf(lat, sub, &dev, cfg.ssf)?;
    let (rm, _) = match sub {
        Sublattice::Primal => in_srm(lat, Some(&analysis), None, &cfg.rm),
        Sublattice::Dual => in_srm(lat, None, Some(&analysis), &cfg.rm),
    };
    Ok(ColorVerdict { ssf, rm, analysis })
}

pub fn run_trial(cfg: &ProtocolConfig, trial: u64) -> Result<Transcript> {
    let lat = &cfg.lattice;
    let blocks = cfg.blocks();
    let errors = sample_prover_blocks(&cfg.strategy, blocks, lat.n(), cfg.seed, trial);
    let mut order: Vec<usize> = (0..blocks).collect();
    order.shuffle(&mut stream(cfg.seed, trial, 0, Stage::Permutation));
    let (test_b, rest) = order.split_at(cfg.k);
    let (test_w, compute) = rest.split_at(cfg.k);
    let compute = compute[0];

    let mut tests = Vec::with_capacity(2 * cfg.k);
    for (&block, kind) in test_b
        .iter()
        .map(|b| (b, TestKind::Black))
        .chain(test_w.iter().map(|b| (b, TestKind::White)))
    {
        let err = &errors[block];
        let mut rng = stream(cfg.seed, trial, block as u64, Stage::Measurement);
        let record = sample_test_outcomes(err, lat.graph(), kind, &mut rng);
        let stat = test_statistic(&record, lat.graph(), kind);
        assert_eq!(
            stat,
            deviation(err, lat.graph(), kind),
            "test statistic recomputed from the record differs from the sampled deviation"
        );
        let v = judge(cfg, err, kind)?;
        let passed = v.ssf.is_member() && v.rm.is_member();
        tests.push(TestOutcome {
            block,
            test: kind,
            record,
            ssf: v.ssf,
            rm: v.rm,
            passed,
        });
    }
    let accepted = tests.iter().all(|t| t.passed);

    let err = &errors[compute];
    let b = judge(cfg, err, TestKind::Black)?;
    let w = judge(cfg, err, TestKind::White)?;
    let (joint, _) = in_srm(lat, Some(&b.analysis), Some(&w.analysis), &cfg.rm);
    let truth = ComputeTruth {
        ssf_b: b.ssf.is_member(),
        ssf_w: w.ssf.is_member(),
        rm_b: b.rm.is_member(),
        rm_w: w.rm.is_member(),
        in_s: b.ssf.is_member() && b.rm.is_member() && w.ssf.is_member() && w.rm.is_member(),
        logical_failure: b.analysis.homology_nontrivial || w.analysis.homology_nontrivial || !joint.is_member(),
    };
    Ok(Transcript {
        trial,
        test_b: test_b.to_vec(),
        test_w: test_w.to_vec(),
        compute,
        tests,
        accepted,
        compute_truth: truth,
    })
}

/// Additive tallies over trials; merging is commutative and associative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub trials: u64,
    pub accepted: u64,
    pub tests_b: u64,
    pub passed_b: u64,
    pub tests_w: u64,
    pub passed_w: u64,
    pub compute_in_s: u64,
    pub accepted_in_s: u64,
    pub compute_logical_failure: u64,
    pub accepted_logical_failure: u64,
    /// Compute blocks landing at block index 0; a uniformity witness.
    pub compute_at_zero: u64,
}

impl Counters {
    pub fn record(&mut self, t: &Transcript) {
        self.trials += 1;
        self.accepted += t.accepted as u64;
        for o in &t.tests {
            match o.test {
                TestKind::Black => {
                    self.tests_b += 1;
                    self.passed_b += o.passed as u64;
                }
                TestKind::White => {
                    self.tests_w += 1;
                    self.passed_w += o.passed as u64;
                }
            }
        }
        let truth = t.compute_truth;
        self.compute_in_s += truth.in_s as u64;
        self.accepted_in_s += (t.accepted && truth.in_s) as u64;
        self.compute_logical_failure += truth.logical_failure as u64;
        self.accepted_logical_failure += (t.accepted && truth.logical_failure) as u64;
        self.compute_at_zero += (t.compute == 0) as u64;
    }

    pub fn merge(mut self, o: Counters) -> Counters {
        self.trials += o.trials;
        self.accepted += o.accepted;
        self.tests_b += o.tests_b;
        self.passed_b += o.passed_b;
        self.tests_w += o.tests_w;
        self.passed_w += o.passed_w;
        self.compute_in_s += o.compute_in_s;
        self.accepted_in_s += o.accepted_in_s;
        self.compute_logical_failure += o.compute_logical_failure;
        self.accepted_logical_failure += o.accepted_logical_failure;
        self.compute_at_zero += o.compute_at_zero;
        self
    }
}

/// Runs trials `0..trials` on the current rayon pool and tallies them.
pub fn run_trials(cfg: &ProtocolConfig, trials: u64) -> Result<Counters> {
    cfg.validate()?;
    (0..trials)
        .into_par_iter()
        .try_fold(Counters::default, |mut c, t| {
            c.record(&run_trial(cfg, t)?);
            Ok(c)
        })
        .try_reduce(Counters::default, |a, b| Ok(a.merge(b)))
}

/// Binomial proportion with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
    pub total: u64,
}

impl Rate {
    pub fn new(count: u64, total: u64) -> Rate {
        if total == 0 {
            return Rate {
                value: f64::NAN,
                stderr: f64::NAN,
                count,
                total,
            };
        }
        let p = count as f64 / total as f64;
        Rate {
            value: p,
            stderr: (p * (1.0 - p) / total as f64).sqrt(),
            count,
            total,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AcceptanceEstimate {
    pub accept: Rate,
    pub pass_b: Rate,
    pub pass_w: Rate,
    /// `q_B^k q_W^k` from the measured per-test pass rates.
    pub predicted: f64,
    /// Delta-method standard error of `predicted`.
    pub predicted_stderr: f64,
    pub counters: Counters,
}

pub fn acceptance_from(counters: Counters, k: usize) -> AcceptanceEstimate {
    let accept = Rate::new(counters.accepted, counters.trials);
    let pass_b = Rate::new(counters.passed_b, counters.tests_b);
    let pass_w = Rate::new(counters.passed_w, counters.tests_w);
    let k = k as i32;
    let predicted = pass_b.value.powi(k) * pass_w.value.powi(k);
    let rel = |r: &Rate| if r.value > 0.0 { k as f64 * r.stderr / r.value } else { 0.0 };
    let predicted_stderr = predicted * (rel(&pass_b).powi(2) + rel(&pass_w).powi(2)).sqrt();
    AcceptanceEstimate {
        accept,
        pass_b,
        pass_w,
        predicted,
        predicted_stderr,
        counters,
    }
}

pub fn estimate_acceptance(cfg: &ProtocolConfig, trials: u64) -> Result<AcceptanceEstimate> {
    Ok(acceptance_from(run_trials(cfg, trials)?, cfg.k))
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectionRow {
    pub strategy: String,
    pub accept: Rate,
    /// Fraction of accepted trials whose compute block lies in S.
    pub membership_given_accept: Rate,
    pub theorem1: f64,
    /// Acceptance reaches α while conditional membership falls more than
    /// 3σ below the bound.
    pub violates: bool,
}

pub fn detection_row(name: &str, counters: Counters, alpha: f64, k: usize) -> Result<DetectionRow> {
    let accept = Rate::new(counters.accepted, counters.trials);
    let membership = Rate::new(counters.accepted_in_s, counters.accepted);
    let theorem1 = crate::bounds::theorem1_bound(alpha, k as u64)?;
    let violates = accept.value >= alpha && membership.total > 0 && membership.value < theorem1 - 3.0 * membership.stderr;
    Ok(DetectionRow {
        strategy: name.to_string(),
        accept,
        membership_given_accept: membership,
        theorem1,
        violates,
    })
}

pub fn estimate_detection_operating_point(
    base: &ProtocolConfig,
    suite: &[(String, AdversaryStrategy)],
    trials: u64,
) -> Result<Vec<DetectionRow>> {
    suite
        .iter()
        .map(|(name, strategy)| {
            let cfg = ProtocolConfig {
                strategy: strategy.clone(),
                ..base.clone()
            };
            detection_row(name, run_trials(&cfg, trials)?, cfg.alpha, cfg.k)
        })
        .collect()
}

/// Probability that every test lands on a good block when `bad` of the
/// `2k+1` blocks fail both tests and the rest pass.
pub fn fooling_probability(k: usize, bad: usize) -> f64 {
    match bad {
        0 => 1.0,
        1 => 1.0 / (2 * k + 1) as f64,
        _ => 0.0,
    }
}

/// An error outside S that fails both tests: on the two-tube layout a
/// primal chain joining the tubes plus a dual loop around the first tube;
/// on the torus a winding line on each sublattice.
pub fn canonical_logical_error(lat: &ClusterLattice) -> Result<PauliError> {
    let spec = lat.spec();
    let p = lat.primal();
    let d = lat.dual();
    let find = |sub: &crate::lattice::SubLattice, c: [usize; 3], a: Axis| {
        (0..sub.num_edges())
            .find(|&e| sub.edge_coord(e) == c && sub.edge_axis(e) == a)
            .ok_or_else(|| Error::InvalidSpec(format!("no edge at {c:?} along {a:?}")))
    };
    let mut chain_b = Vec::new();
    let mut chain_w = Vec::new();
    if spec.boundary == Boundary::Periodic && spec.tubes.is_empty() {
        for x in 0..spec.size[0] {
            chain_b.push(find(p, [x, 0, 0], Axis::X)?);
            chain_w.push(find(d, [x, 0, 0], Axis::X)?);
        }
    } else if spec.tubes.len() == 2 {
        let (a, b) = if spec.tubes[0].corner[0] < spec.tubes[1].corner[0] {
            (&spec.tubes[0], &spec.tubes[1])
        } else {
            (&spec.tubes[1], &spec.tubes[0])
        };
        let (y0, w) = (a.corner[1], a.width);
        for x in a.corner[0] + w..b.corner[0] {
            chain_b.push(find(p, [x, y0, 0], Axis::X)?);
        }
        let (x0, z) = (a.corner[0], 0);
        if x0 == 0 || y0 == 0 {
            return Err(Error::InvalidSpec("tube touches the wall; no encircling loop".into()));
        }
        let (xl, xh, yl, yh) = (x0 - 1, x0 + w, y0 - 1, y0 + w);
        let mut ring = Vec::new();
        ring.extend((xl..xh).map(|x| [x, yl, z]));
        ring.extend((yl..yh).map(|y| [xh, y, z]));
        ring.extend((xl + 1..=xh).rev().map(|x| [x, yh, z]));
        ring.extend((yl + 1..=yh).rev().map(|y| [xl, y, z]));
        let cells: Vec<usize> = ring
            .iter()
            .map(|&c| d.find_vertex(c).ok_or_else(|| Error::InvalidSpec(format!("no cell {c:?}"))))
            .collect::<Result<_>>()?;
        for i in 0..cells.len() {
            let (u, v) = (cells[i], cells[(i + 1) % cells.len()]);
            let e = d
                .incident_edges(u)
                .find(|&e| d.edge_ends(e).contains(&v))
                .ok_or_else(|| Error::InvalidSpec("ring cells not adjacent".into()))?;
            chain_w.push(e);
        }
    } else {
        return Err(Error::InvalidSpec("no canonical logical error for this layout".into()));
    }
    let n_b = lat.n_black();
    let z = BitVec::from_indices(lat.n(), chain_b.into_iter().chain(chain_w.into_iter().map(|e| n_b + e)));
    Ok(PauliError::from_z(z))
}
