//! Syndrome extraction, matching decoders and residual analysis on one
//! sublattice, culminating in membership of a deviation in the topological
//! correctable set.

mod blossom;
mod matching;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::f2core::BitVec;
use crate::lattice::{membrane_parity, BfsTree, ClusterLattice, SubLattice, Sublattice, UNREACHABLE};

pub use blossom::max_weight_matching;
pub use matching::EXACT_CAPACITY;
use matching::{Instance, Partner};

static VALIDITY_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of decoded corrections whose boundary has been checked against the
/// syndrome since process start.
pub fn validity_checks() -> u64 {
    VALIDITY_CHECKS.load(Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    #[serde(alias = "exact_subset_dp")]
    Exact,
    Blossom,
    Greedy,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Blossom => "blossom",
            Backend::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_subset_dp" => Ok(Backend::Exact),
            "blossom" => Ok(Backend::Blossom),
            "greedy" => Ok(Backend::Greedy),
            other => Err(crate::Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

/// Flag per vertex of one sublattice; only vacuum vertices can be flagged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Syndrome {
    pub sub: Sublattice,
    pub flags: BitVec,
}

impl Syndrome {
    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter_ones()
    }

    pub fn is_trivial(&self) -> bool {
        self.flags.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correction {
    pub sub: Sublattice,
    pub edges: BitVec,
}

/// Syndrome of a deviation on the edges of one sublattice. Edges that carry
/// no syndrome (defect qubits) are ignored.
pub fn extract_syndrome(lat: &ClusterLattice, sub: Sublattice, deviation: &BitVec) -> Syndrome {
    let s = lat.sub(sub);
    Syndrome {
        sub,
        flags: s.boundary_of(&deviation.and(s.usable_mask())),
    }
}

/// Minimum-weight pairing of flagged vertices with each other or with the
/// nearest terminal (defect or open wall), realized as BFS geodesics.
pub fn decode_mwpm(lat: &ClusterLattice, syn: &Syndrome, backend: Backend) -> Result<Correction> {
    let s = lat.sub(syn.sub);
    let flagged: Vec<usize> = syn.flagged().collect();
    let mut edges = BitVec::zeros(s.num_edges());
    if flagged.is_empty() {
        return Ok(Correction { sub: syn.sub, edges });
    }
    let to_wall: Vec<u32> = flagged.iter().map(|&v| s.distance_to_terminal(v)).collect();
    let all_reach = to_wall.iter().all(|&b| b != UNREACHABLE);
    let max_wall = if all_reach { *to_wall.iter().max().expect("nonempty") } else { 0 };
    let trees: Vec<BfsTree> = flagged
        .iter()
        .zip(&to_wall)
        .map(|(&v, &b)| s.bfs(v, if all_reach { b + max_wall } else { UNREACHABLE }))
        .collect();

    // A pair at least as long as both wall distances combined is never
    // needed: matching both ends to the walls is no worse.
    let m = flagged.len();
    let mut flag_of = vec![usize::MAX; s.num_vertices()];
    for (i, &v) in flagged.iter().enumerate() {
        flag_of[v] = i;
    }
    let mut uf = UnionFind::new(m);
    let mut kept = Vec::new();
    for i in 0..m {
        for (v, d) in trees[i].reached() {
            let j = flag_of[v];
            if j == usize::MAX || j <= i || (all_reach && d >= to_wall[i] + to_wall[j]) {
                continue;
            }
            kept.push((i, j, d));
            uf.union(i, j);
        }
    }
    kept.sort_unstable();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for i in 0..m {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    let mut local = vec![0; m];
    for g in &groups {
        for (a, &i) in g.iter().enumerate() {
            local[i] = a;
        }
    }
    let mut instances: Vec<Instance> = groups
        .iter()
        .map(|g| {
            let mut inst = Instance::new(g.len());
            for (a, &i) in g.iter().enumerate() {
                inst.boundary[a] = to_wall[i];
            }
            inst
        })
        .collect();
    for &(i, j, d) in &kept {
        instances[slot[uf.find(i)]].set_pair(local[i], local[j], d);
    }

    for (g, inst) in groups.iter().zip(&instances) {
        let sol = match backend {
            Backend::Exact => matching::solve_exact(inst)?,
            Backend::Blossom => matching::solve_blossom(inst),
            Backend::Greedy => matching::solve_greedy(inst),
        };
        for (a, p) in sol.into_iter().enumerate() {
            let i = g[a];
            let path = match p {
                Partner::Vertex(b) if a < b => trees[i].path_to(s, flagged[g[b]]),
                Partner::Vertex(_) => continue,
                Partner::Boundary => {
                    let t = nearest_terminal(s, &trees[i]);
                    trees[i].path_to(s, t)
                }
            };
            for e in path {
                edges.flip(e);
            }
        }
    }
    assert_eq!(
        s.boundary_of(&edges),
        syn.flags,
        "decoder produced a correction whose boundary differs from the syndrome"
    );
    VALIDITY_CHECKS.fetch_add(1, Ordering::Relaxed);
    Ok(Correction { sub: syn.sub, edges })
}

fn nearest_terminal(s: &SubLattice, tree: &BfsTree) -> usize {
    tree.visited()
        .find(|&v| s.vertex_kind(v).is_terminal())
        .expect("terminal within search radius")
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub edges: Vec<usize>,
}

impl Component {
    pub fn length(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualAnalysis {
    pub sub: Sublattice,
    pub residual: BitVec,
    /// Edge-connected pieces of the residual, joined through vacuum
    /// vertices, ordered by their lowest edge.
    pub components: Vec<Component>,
    pub membrane_parities: Vec<bool>,
    pub has_long_component: bool,
    pub homology_nontrivial: bool,
}

/// Components and logical parities of `deviation ⊕ correction`.
pub fn analyze_residual(lat: &ClusterLattice, sub: Sublattice, deviation: &BitVec, corr: &Correction) -> ResidualAnalysis {
    assert_eq!(corr.sub, sub, "correction belongs to the other sublattice");
    let s = lat.sub(sub);
    let mut residual = deviation.and(s.usable_mask());
    residual.xor_assign(&corr.edges);
    analyze_chain(lat, sub, residual)
}

fn analyze_chain(lat: &ClusterLattice, sub: Sublattice, residual: BitVec) -> ResidualAnalysis {
    let s = lat.sub(sub);
    let edges: Vec<usize> = residual.iter_ones().collect();
    let mut uf = UnionFind::new(edges.len());
    let mut first_at = vec![usize::MAX; s.num_vertices()];
    for (k, &e) in edges.iter().enumerate() {
        for v in s.edge_ends(e) {
            if !s.is_vacuum(v) {
                continue;
            }
            if first_at[v] == usize::MAX {
                first_at[v] = k;
            } else {
                uf.union(first_at[v], k);
            }
        }
    }
    let mut slot = vec![usize::MAX; edges.len()];
    let mut components: Vec<Component> = Vec::new();
    for (k, &e) in edges.iter().enumerate() {
        let r = uf.find(k);
        if slot[r] == usize::MAX {
            slot[r] = components.len();
            components.push(Component { edges: Vec::new() });
        }
        components[slot[r]].edges.push(e);
    }
    let membrane_parities = membrane_parity(lat, sub, &residual);
    let d = lat.distance();
    ResidualAnalysis {
        sub,
        has_long_component: components.iter().any(|c| c.length() >= d),
        homology_nontrivial: membrane_parities.iter().any(|&p| p),
        residual,
        components,
        membrane_parities,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ComponentLength,
    Homology,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "reason")]
pub enum SsfVerdict {
    Member,
    Rejected(RejectReason),
}

impl SsfVerdict {
    pub fn is_member(self) -> bool {
        self == SsfVerdict::Member
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SsfOptions {
    pub backend: Backend,
    /// Also reject when the residual flips a membrane without having a long
    /// component.
    pub cross_check: bool,
}

/// Decodes `deviation` and decides membership: correctable iff no residual
/// component is as long as the code distance.
pub fn in_ssf(lat: &ClusterLattice, sub: Sublattice, deviation: &BitVec, opts: SsfOptions) -> Result<(SsfVerdict, ResidualAnalysis)> {
    let s = lat.sub(sub);
    assert_eq!(deviation.len(), s.num_edges(), "deviation length mismatch");
    let masked = deviation.and(s.usable_mask());
    let analysis = if masked.is_zero() {
        analyze_chain(lat, sub, masked)
    } else {
        let syn = Syndrome {
            sub,
            flags: s.boundary_of(&masked),
        };
        let corr = decode_mwpm(lat, &syn, opts.backend)?;
        let mut residual = masked;
        residual.xor_assign(&corr.edges);
        analyze_chain(lat, sub, residual)
    };
    let verdict = if analysis.has_long_component {
        SsfVerdict::Rejected(RejectReason::ComponentLength)
    } else if opts.cross_check && analysis.homology_nontrivial {
        SsfVerdict::Rejected(RejectReason::Homology)
    } else {
        SsfVerdict::Member
    };
    Ok((verdict, analysis))
}
