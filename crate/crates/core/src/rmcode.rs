//! Concatenated 15-qubit Reed-Muller fault labeling.
//!
//! Each of `m` logical (X+Y)/√2 measurements is a tree of depth `l` with
//! fan-out 15. Leaves are singular sites; a node is faulty when two or more
//! of its children are.

use serde::{Deserialize, Serialize};

use crate::decode::ResidualAnalysis;
use crate::error::{Error, Result};
use crate::f2core::BitVec;
use crate::lattice::{ClusterLattice, Sublattice};

pub const FAN_OUT: usize = 15;
pub const MAX_LEVELS: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RMCodeSpec {
    pub levels: u32,
    pub measurements: usize,
}

impl RMCodeSpec {
    pub fn leaves_per_tree(&self) -> usize {
        FAN_OUT.pow(self.levels)
    }

    pub fn total_leaves(&self) -> usize {
        self.leaves_per_tree() * self.measurements
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels > MAX_LEVELS {
            return Err(Error::Config(format!("levels {} exceeds supported maximum {MAX_LEVELS}", self.levels)));
        }
        if self.measurements == 0 {
            return Err(Error::Config("at least one logical measurement is required".into()));
        }
        Ok(())
    }

    /// Checks that leaf `s` can be bound to the `s`-th singular site. A
    /// lattice without singular sites has no logical measurements to
    /// protect and accepts any code.
    pub fn check_assignment(&self, lat: &ClusterLattice) -> Result<()> {
        self.validate()?;
        let sites = lat.singular_sites().len();
        if sites != 0 && sites != self.total_leaves() {
            return Err(Error::InvalidSpec(format!(
                "lattice has {sites} singular sites, code needs {}",
                self.total_leaves()
            )));
        }
        Ok(())
    }
}

/// Fault bits of one tree, `levels[0]` the leaves and the last entry the
/// single top node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FaultTree {
    pub levels: Vec<BitVec>,
}

impl FaultTree {
    pub fn top(&self) -> bool {
        self.levels.last().expect("at least one level").get(0)
    }
}

/// Leaf `s` is faulty when some residual component, on either sublattice,
/// crosses the local membrane of singular site `s` an odd number of times.
pub fn level0_faults(
    lat: &ClusterLattice,
    residual_b: Option<&ResidualAnalysis>,
    residual_w: Option<&ResidualAnalysis>,
    spec: &RMCodeSpec,
) -> BitVec {
    let sites = lat.singular_sites();
    assert_eq!(sites.len(), spec.total_leaves(), "code not bound to this lattice");
    let mut faults = BitVec::zeros(sites.len());
    for analysis in [residual_b, residual_w].into_iter().flatten() {
        if analysis.components.is_empty() {
            continue;
        }
        for (s, site) in sites.iter().enumerate() {
            let patch = match analysis.sub {
                Sublattice::Primal => &site.patch_primal,
                Sublattice::Dual => &site.patch_dual,
            };
            let odd = analysis.components.iter().any(|c| {
                patch.iter().filter(|&&e| analysis.residual.get(e) && c.edges.binary_search(&e).is_ok()).count() % 2 == 1
            });
            if odd {
                faults.set(s, true);
            }
        }
    }
    faults
}

/// Bottom-up two-or-more labeling of a tree with `15^l` leaves.
pub fn label_tree(leaf_faults: &BitVec) -> FaultTree {
    let mut len = leaf_faults.len();
    let mut levels = vec![leaf_faults.clone()];
    while len > 1 {
        assert_eq!(len % FAN_OUT, 0, "leaf count {} is not a power of 15", leaf_faults.len());
        let below = levels.last().expect("level");
        let parents = BitVec::from_bools(
            &(0..len / FAN_OUT)
                .map(|p| (0..FAN_OUT).filter(|&c| below.get(p * FAN_OUT + c)).count() >= 2)
                .collect::<Vec<_>>(),
        );
        len /= FAN_OUT;
        levels.push(parents);
    }
    assert_eq!(len, 1, "empty tree");
    FaultTree { levels }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum RmVerdict {
    Member,
    Rejected { tree: usize },
}

impl RmVerdict {
    pub fn is_member(&self) -> bool {
        *self == RmVerdict::Member
    }
}

/// Correctable iff no tree's top node is faulty. Rejection names the first
/// faulty tree.
pub fn in_srm(
    lat: &ClusterLattice,
    residual_b: Option<&ResidualAnalysis>,
    residual_w: Option<&ResidualAnalysis>,
    spec: &RMCodeSpec,
) -> (RmVerdict, Vec<FaultTree>) {
    if lat.singular_sites().is_empty() {
        return (RmVerdict::Member, Vec::new());
    }
    let leaves = level0_faults(lat, residual_b, residual_w, spec);
    trees_verdict(&leaves, spec)
}

pub fn trees_verdict(leaves: &BitVec, spec: &RMCodeSpec) -> (RmVerdict, Vec<FaultTree>) {
    let per = spec.leaves_per_tree();
    let trees: Vec<FaultTree> = (0..spec.measurements).map(|t| label_tree(&leaves.slice(t * per, per))).collect();
    let verdict = trees
        .iter()
        .position(FaultTree::top)
        .map_or(RmVerdict::Member, |tree| RmVerdict::Rejected { tree });
    (verdict, trees)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn adding_faults_keeps_faulty_tops_faulty(a in proptest::collection::vec(0usize..225, 0..20), b in proptest::collection::vec(0usize..225, 0..20)) {
            let x = BitVec::from_indices(225, a.iter().copied());
            let mut y = x.clone();
            for i in b {
                y.set(i, true);
            }
            if label_tree(&x).top() {
                prop_assert!(label_tree(&y).top());
            }
        }
    }
}
