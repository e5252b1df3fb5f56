//! Three-dimensional two-colorable cluster lattice.
//!
//! Black qubits sit on the edges of the primal cubic lattice and white qubits
//! on the edges of the dual lattice (equivalently, the faces of the primal
//! one). A white qubit is graph-adjacent to the four primal edges bounding
//! its face.
//!
//! Boundary conventions:
//!
//! * `Periodic`: a 3-torus of `L_x × L_y × L_z` cells, no defects allowed.
//! * `Open`: a box of cells. The primal lattice keeps every edge of the box
//!   (its outer boundary is closed, so primal chains cannot end on it). The
//!   dual lattice ends on the x and y walls through a single virtual boundary
//!   vertex, while the z walls (time-like boundaries) carry no qubits.
//!
//! Defect tubes are primal: their corner vertices are terminals where primal
//! chains may end, and the dual vertices (cells) inside them are removed, so
//! dual chains must go around.

use std::cell::RefCell;
use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f2core::{BitVec, GraphState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    fn unit(self) -> [i64; 3] {
        let mut u = [0; 3];
        u[self.index()] = 1;
        u
    }

    fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// An axis-aligned column of `width × width` cells running `length` cells
/// along `axis`, starting at cell `corner`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectTube {
    pub axis: Axis,
    pub corner: [usize; 3],
    pub width: usize,
    pub length: usize,
}

impl DefectTube {
    /// Half-open cell ranges per axis.
    fn cells(&self) -> [(usize, usize); 3] {
        let mut r = [(0, 0); 3];
        for a in Axis::ALL {
            let lo = self.corner[a.index()];
            let extent = if a == self.axis { self.length } else { self.width };
            r[a.index()] = (lo, lo + extent);
        }
        r
    }

    /// Closed vertex ranges per axis (the corners of every cell).
    fn vertices(&self) -> [(usize, usize); 3] {
        self.cells().map(|(lo, hi)| (lo, hi))
    }

    fn contains_cell(&self, c: [usize; 3]) -> bool {
        self.cells().iter().zip(c).all(|(&(lo, hi), x)| lo <= x && x < hi)
    }

    fn contains_vertex(&self, v: [usize; 3]) -> bool {
        self.vertices().iter().zip(v).all(|(&(lo, hi), x)| lo <= x && x <= hi)
    }

    /// Length of the shortest dual loop encircling the tube.
    pub fn circumference(&self) -> usize {
        4 * (self.width + 1)
    }
}

/// A primal edge, named by its lower endpoint and direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeSite {
    pub vertex: [usize; 3],
    pub axis: Axis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Cell counts `L_x, L_y, L_z`.
    pub size: [usize; 3],
    /// Code distance `d`.
    pub distance: usize,
    pub boundary: Boundary,
    #[serde(default)]
    pub tubes: Vec<DefectTube>,
    #[serde(default)]
    pub singular_sites: Vec<EdgeSite>,
}

impl LatticeSpec {
    /// Periodic lattice of side `d` with no defects; the shortest
    /// non-contractible cycle has length `d`.
    pub fn empty_vacuum(d: usize) -> Self {
        LatticeSpec {
            size: [d, d, d],
            distance: d,
            boundary: Boundary::Periodic,
            tubes: Vec::new(),
            singular_sites: Vec::new(),
        }
    }

    /// Two parallel primal tubes along z, `d` edges apart, with
    /// `singular_count` singular edges placed in the gap between them.
    ///
    /// The tubes are `w × w` cells with `w` the smallest width whose
    /// encircling dual loop has length at least `d`; every wall is at least
    /// `d` cells from the tubes.
    pub fn fig2_pair(d: usize, singular_count: usize) -> Self {
        let width = d.div_ceil(4).saturating_sub(1).max(1);
        let margin = d;
        let lx = 2 * margin + 2 * width + d;
        let ly = 2 * margin + width;
        let mut lz = d;
        while (ly + 1) * (lz + 1) < singular_count {
            lz += 1;
        }
        let tube = |x0| DefectTube {
            axis: Axis::Z,
            corner: [x0, margin, 0],
            width,
            length: lz,
        };
        let mid_x = margin + width + (d - 1) / 2;
        let mut candidates: Vec<(usize, usize)> = (0..=ly)
            .flat_map(|y| (0..=lz).map(move |z| (y, z)))
            .collect();
        candidates.sort_by_key(|&(y, z)| (z.abs_diff(lz / 2), y.abs_diff(margin), z, y));
        let singular_sites = candidates
            .into_iter()
            .take(singular_count)
            .map(|(y, z)| EdgeSite {
                vertex: [mid_x, y, z],
                axis: Axis::X,
            })
            .collect();
        LatticeSpec {
            size: [lx, ly, lz],
            distance: d,
            boundary: Boundary::Open,
            tubes: vec![tube(margin), tube(margin + width + d)],
            singular_sites,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.distance < 2 {
            return bad(format!("distance {} < 2", self.distance));
        }
        let min_side = match self.boundary {
            Boundary::Periodic => 2,
            Boundary::Open => 1,
        };
        if self.size.iter().any(|&l| l < min_side) {
            return bad(format!("size {:?} below minimum side {min_side}", self.size));
        }
        if self.boundary == Boundary::Periodic && !self.tubes.is_empty() {
            return bad("defect tubes require an open boundary".into());
        }
        for (i, t) in self.tubes.iter().enumerate() {
            if t.width == 0 || t.length == 0 {
                return bad(format!("tube {i} is empty"));
            }
            if t.cells().iter().zip(self.size).any(|(&(_, hi), l)| hi > l) {
                return bad(format!("tube {i} does not fit inside the volume"));
            }
            if t.circumference() < self.distance {
                return bad(format!(
                    "tube {i} circumference {} is below distance {}",
                    t.circumference(),
                    self.distance
                ));
            }
        }
        for (i, a) in self.tubes.iter().enumerate() {
            for (j, b) in self.tubes.iter().enumerate().skip(i + 1) {
                let (va, vb) = (a.vertices(), b.vertices());
                let gaps: Vec<usize> = (0..3)
                    .map(|k| {
                        let (alo, ahi) = va[k];
                        let (blo, bhi) = vb[k];
                        blo.saturating_sub(ahi).max(alo.saturating_sub(bhi))
                    })
                    .collect();
                let overlap = (0..3).all(|k| va[k].0 <= vb[k].1 && vb[k].0 <= va[k].1);
                if overlap {
                    return bad(format!("tubes {i} and {j} overlap"));
                }
                let separation: usize = gaps.iter().sum();
                if separation < self.distance {
                    return bad(format!(
                        "tubes {i} and {j} are {separation} edges apart, below distance {}",
                        self.distance
                    ));
                }
            }
        }
        let mut seen = HashSet::new();
        for s in &self.singular_sites {
            if !seen.insert(*s) {
                return bad(format!("duplicate singular site {s:?}"));
            }
            let a = s.axis.index();
            let in_range = (0..3).all(|k| match self.boundary {
                Boundary::Periodic => s.vertex[k] < self.size[k],
                Boundary::Open => s.vertex[k] <= self.size[k] && (k != a || s.vertex[k] < self.size[k]),
            });
            if !in_range {
                return bad(format!("singular site {s:?} lies outside the lattice"));
            }
            let mut far = s.vertex;
            far[a] += 1;
            if self
                .tubes
                .iter()
                .any(|t| t.contains_vertex(s.vertex) && t.contains_vertex(far))
            {
                return bad(format!("singular site {s:?} lies inside a defect"));
            }
        }
        Ok(())
    }
}

/// Role of a qubit in the computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Z-measured, inside a defect tube.
    Defect,
    /// X-measured, provides syndrome.
    Vacuum,
    /// (X+Y)/√2-measured.
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublattice {
    /// Black qubits, decoded on the primal lattice.
    Primal,
    /// White qubits, decoded on the dual lattice.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Vacuum,
    /// Corner of defect tube `i`; primal chains may end here.
    Defect(usize),
    /// Virtual vertex standing for the open walls.
    Boundary,
    /// Dual vertex inside a defect; absent from the lattice.
    Removed,
}

impl VertexKind {
    pub fn is_terminal(self) -> bool {
        matches!(self, VertexKind::Defect(_) | VertexKind::Boundary)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MembraneKind {
    /// Detects dual loops around a defect tube.
    Wrap,
    /// Detects primal chains joining tube `a` to tube `b`.
    Connect { a: usize, b: usize },
    /// Detects cycles winding around the torus along `axis`.
    Torus { axis: Axis },
}

/// Edge set whose odd overlap with a residual chain signals a logical error.
#[derive(Clone, Debug)]
pub struct LogicalMembrane {
    pub kind: MembraneKind,
    pub edges: BitVec,
}

#[derive(Clone, Copy, Debug)]
struct Link {
    edge: u32,
    to: u32,
}

/// One of the two interleaved cubic lattices, as a graph whose edges are
/// qubits of one color.
#[derive(Clone, Debug)]
pub struct SubLattice {
    kind: Sublattice,
    coords: Vec<[usize; 3]>,
    vertex_kind: Vec<VertexKind>,
    ends: Vec<[u32; 2]>,
    edge_axis: Vec<Axis>,
    edge_coord: Vec<[usize; 3]>,
    usable: Vec<bool>,
    usable_mask: BitVec,
    adj: Vec<Vec<Link>>,
    dist_to_terminal: Vec<u32>,
    has_terminals: bool,
    membranes: Vec<LogicalMembrane>,
}

pub const UNREACHABLE: u32 = u32::MAX;

impl SubLattice {
    pub fn kind(&self) -> Sublattice {
        self.kind
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_kind.len()
    }

    pub fn num_edges(&self) -> usize {
        self.ends.len()
    }

    pub fn vertex_kind(&self, v: usize) -> VertexKind {
        self.vertex_kind[v]
    }

    /// Cell or vertex coordinate; the virtual boundary vertex has none.
    pub fn vertex_coord(&self, v: usize) -> Option<[usize; 3]> {
        (self.vertex_kind[v] != VertexKind::Boundary).then(|| self.coords[v])
    }

    pub fn find_vertex(&self, coord: [usize; 3]) -> Option<usize> {
        (0..self.num_vertices()).find(|&v| self.vertex_kind[v] != VertexKind::Boundary && self.coords[v] == coord)
    }

    pub fn edge_ends(&self, e: usize) -> [usize; 2] {
        self.ends[e].map(|v| v as usize)
    }

    pub fn edge_axis(&self, e: usize) -> Axis {
        self.edge_axis[e]
    }

    /// For a primal edge, its lower endpoint; for a dual edge, the lower
    /// corner of the primal face it crosses.
    pub fn edge_coord(&self, e: usize) -> [usize; 3] {
        self.edge_coord[e]
    }

    /// Edges that carry syndrome information: not defect qubits and not
    /// touching removed vertices.
    pub fn is_usable(&self, e: usize) -> bool {
        self.usable[e]
    }

    /// Indicator of the usable edges.
    pub fn usable_mask(&self) -> &BitVec {
        &self.usable_mask
    }

    pub fn has_terminals(&self) -> bool {
        self.has_terminals
    }

    pub fn membranes(&self) -> &[LogicalMembrane] {
        &self.membranes
    }

    /// Distance from `v` to the nearest defect or open boundary.
    pub fn distance_to_terminal(&self, v: usize) -> u32 {
        self.dist_to_terminal[v]
    }

    pub fn is_vacuum(&self, v: usize) -> bool {
        self.vertex_kind[v] == VertexKind::Vacuum
    }

    pub fn vacuum_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(|&v| self.is_vacuum(v))
    }

    pub fn incident_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|l| l.edge as usize)
    }

    /// Vertex boundary of an edge set, restricted to vacuum vertices.
    pub fn boundary_of(&self, chain: &BitVec) -> BitVec {
        assert_eq!(chain.len(), self.num_edges(), "chain length mismatch");
        let mut out = BitVec::zeros(self.num_vertices());
        for e in chain.iter_ones() {
            for v in self.ends[e] {
                if self.is_vacuum(v as usize) {
                    out.flip(v as usize);
                }
            }
        }
        out
    }

    /// Breadth-first search from `src` through vacuum vertices. Terminals are
    /// reached but not passed through. Neighbors are explored in the fixed
    /// order +x, −x, +y, −y, +z, −z.
    pub fn bfs(&self, src: usize, limit: u32) -> BfsTree {
        BFS_SCRATCH.with(|cell| {
            let mut dist = cell.borrow_mut();
            if dist.len() < self.num_vertices() {
                dist.resize(self.num_vertices(), UNREACHABLE);
            }
            let mut nodes: Vec<BfsNode> = Vec::new();
            dist[src] = 0;
            nodes.push(BfsNode {
                vertex: src as u32,
                dist: 0,
                parent: u32::MAX,
            });
            let mut head = 0;
            while head < nodes.len() {
                let (u, du) = (nodes[head].vertex as usize, nodes[head].dist);
                head += 1;
                if (u != src && self.vertex_kind[u].is_terminal()) || du >= limit {
                    continue;
                }
                for link in &self.adj[u] {
                    let v = link.to as usize;
                    if !self.usable[link.edge as usize] || dist[v] != UNREACHABLE {
                        continue;
                    }
                    if self.vertex_kind[v] == VertexKind::Removed {
                        continue;
                    }
                    dist[v] = du + 1;
                    nodes.push(BfsNode {
                        vertex: v as u32,
                        dist: du + 1,
                        parent: link.edge,
                    });
                }
            }
            for n in &nodes {
                dist[n.vertex as usize] = UNREACHABLE;
            }
            BfsTree { src, nodes }
        })
    }

    fn edge_other(&self, e: usize, v: usize) -> usize {
        let [a, b] = self.ends[e];
        if a as usize == v {
            b as usize
        } else {
            a as usize
        }
    }
}

/// Result of [`SubLattice::bfs`].
pub struct BfsTree {
    src: usize,
    /// Reached vertices in dequeue order.
    nodes: Vec<BfsNode>,
}

#[derive(Clone, Copy, Debug)]
struct BfsNode {
    vertex: u32,
    dist: u32,
    parent: u32,
}

thread_local! {
    static BFS_SCRATCH: RefCell<Vec<u32>> = const { RefCell::new(Vec::new()) };
}

impl BfsTree {
    /// Linear in the number of reached vertices.
    pub fn distance(&self, v: usize) -> u32 {
        self.nodes.iter().find(|n| n.vertex as usize == v).map_or(UNREACHABLE, |n| n.dist)
    }

    /// Reached vertices with their distances, in dequeue order.
    pub fn reached(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.nodes.iter().map(|n| (n.vertex as usize, n.dist))
    }

    /// Vertices in the order they were dequeued.
    pub fn visited(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().map(|n| n.vertex as usize)
    }

    /// Edges of the tree path from the source to `target`.
    pub fn path_to(&self, lat: &SubLattice, target: usize) -> Vec<usize> {
        BFS_SCRATCH.with(|cell| {
            let mut pos = cell.borrow_mut();
            if pos.len() < lat.num_vertices() {
                pos.resize(lat.num_vertices(), UNREACHABLE);
            }
            for (i, n) in self.nodes.iter().enumerate() {
                pos[n.vertex as usize] = i as u32;
            }
            let found = pos[target];
            let mut edges = Vec::new();
            if found != UNREACHABLE {
                let mut v = target;
                while v != self.src {
                    let e = self.nodes[pos[v] as usize].parent as usize;
                    edges.push(e);
                    v = lat.edge_other(e, v);
                }
            }
            for n in &self.nodes {
                pos[n.vertex as usize] = UNREACHABLE;
            }
            assert!(found != UNREACHABLE, "target {target} unreachable");
            edges
        })
    }
}

/// Singular qubit with its local detection patches.
#[derive(Clone, Debug)]
pub struct SingularSite {
    pub site: EdgeSite,
    /// Black-qubit index of the singular edge.
    pub qubit: usize,
    /// Primal edges of the local membrane.
    pub patch_primal: Vec<usize>,
    /// Dual edges of the local membrane.
    pub patch_dual: Vec<usize>,
}

/// The built lattice: both sublattices, qubit roles, the induced graph state
/// and the logical membranes of the layout.
#[derive(Clone, Debug)]
pub struct ClusterLattice {
    spec: LatticeSpec,
    primal: SubLattice,
    dual: SubLattice,
    roles: Vec<Role>,
    graph: GraphState,
    singular: Vec<SingularSite>,
}

struct Dims {
    size: [usize; 3],
    periodic: bool,
}

impl Dims {
    fn vertex_extent(&self) -> [usize; 3] {
        if self.periodic {
            self.size
        } else {
            self.size.map(|l| l + 1)
        }
    }

    fn vertex_index(&self, v: [usize; 3]) -> usize {
        let e = self.vertex_extent();
        (v[0] * e[1] + v[1]) * e[2] + v[2]
    }

    fn cell_index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.size[1] + c[1]) * self.size[2] + c[2]
    }

    /// `v + delta`, wrapped when periodic; `None` when it leaves an open box
    /// of the given extent.
    fn step(&self, v: [usize; 3], delta: [i64; 3], extent: [usize; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for k in 0..3 {
            let x = v[k] as i64 + delta[k];
            if self.periodic {
                out[k] = x.rem_euclid(self.size[k] as i64) as usize;
            } else if x < 0 || x >= extent[k] as i64 {
                return None;
            } else {
                out[k] = x as usize;
            }
        }
        Some(out)
    }

    fn offset(&self, a: usize, b: usize, k: usize) -> usize {
        if self.periodic {
            let l = self.size[k];
            let d = a.abs_diff(b);
            d.min(l - d)
        } else {
            a.abs_diff(b)
        }
    }
}

fn lex_points(extent: [usize; 3]) -> impl Iterator<Item = [usize; 3]> {
    (0..extent[0]).flat_map(move |x| (0..extent[1]).flat_map(move |y| (0..extent[2]).map(move |z| [x, y, z])))
}

impl ClusterLattice {
    pub fn build(spec: &LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let dims = Dims {
            size: spec.size,
            periodic: spec.boundary == Boundary::Periodic,
        };
        let vext = dims.vertex_extent();

        // Primal vertices and edges.
        let pverts: Vec<[usize; 3]> = lex_points(vext).collect();
        let pkind: Vec<VertexKind> = pverts
            .iter()
            .map(|&v| {
                spec.tubes
                    .iter()
                    .position(|t| t.contains_vertex(v))
                    .map_or(VertexKind::Vacuum, VertexKind::Defect)
            })
            .collect();
        let mut pends = Vec::new();
        let mut paxis = Vec::new();
        let mut pcoord = Vec::new();
        let mut edge_at = vec![u32::MAX; pverts.len() * 3];
        for &v in &pverts {
            for a in Axis::ALL {
                if let Some(w) = dims.step(v, a.unit(), vext) {
                    edge_at[dims.vertex_index(v) * 3 + a.index()] = pends.len() as u32;
                    pends.push([dims.vertex_index(v) as u32, dims.vertex_index(w) as u32]);
                    paxis.push(a);
                    pcoord.push(v);
                }
            }
        }
        let singular_set: HashSet<EdgeSite> = spec.singular_sites.iter().copied().collect();
        let proles: Vec<Role> = (0..pends.len())
            .map(|e| {
                let site = EdgeSite {
                    vertex: pcoord[e],
                    axis: paxis[e],
                };
                let [u, w] = pends[e];
                match (pkind[u as usize], pkind[w as usize]) {
                    _ if singular_set.contains(&site) => Role::Singular,
                    (VertexKind::Defect(i), VertexKind::Defect(j)) if i == j => Role::Defect,
                    _ => Role::Vacuum,
                }
            })
            .collect();

        // Dual vertices (cells), plus the virtual wall vertex when open.
        let mut dverts: Vec<[usize; 3]> = lex_points(spec.size).collect();
        let mut dkind: Vec<VertexKind> = dverts
            .iter()
            .map(|&c| {
                if spec.tubes.iter().any(|t| t.contains_cell(c)) {
                    VertexKind::Removed
                } else {
                    VertexKind::Vacuum
                }
            })
            .collect();
        let virtual_vertex = (!dims.periodic).then(|| {
            dverts.push([usize::MAX; 3]);
            dkind.push(VertexKind::Boundary);
            (dverts.len() - 1) as u32
        });

        // Dual edges: one per primal face, named by the face's lower corner
        // and its normal axis.
        let face_ext = if dims.periodic { spec.size } else { vext };
        let mut dends = Vec::new();
        let mut daxis = Vec::new();
        let mut dcoord = Vec::new();
        let mut graph_edges = Vec::new();
        for c in lex_points(face_ext) {
            for a in Axis::ALL {
                let (b, e) = a.others();
                if !dims.periodic && (c[b.index()] >= spec.size[b.index()] || c[e.index()] >= spec.size[e.index()]) {
                    continue;
                }
                let ai = a.index();
                let upper = (dims.periodic || c[ai] < spec.size[ai]).then(|| dims.cell_index(c));
                let lower = dims
                    .step(c, a.unit().map(|x| -x), spec.size)
                    .filter(|_| dims.periodic || c[ai] > 0)
                    .map(|w| dims.cell_index(w));
                let ends = match (lower, upper) {
                    (Some(l), Some(u)) => [l as u32, u as u32],
                    (Some(cell), None) | (None, Some(cell)) => {
                        if a == Axis::Z {
                            continue;
                        }
                        let vv = virtual_vertex.expect("open lattice has a wall vertex");
                        [cell as u32, vv]
                    }
                    (None, None) => unreachable!("face without cells"),
                };
                let w_index = dends.len();
                dends.push(ends);
                daxis.push(a);
                dcoord.push(c);
                let corners = [
                    (c, b),
                    (dims.step(c, e.unit(), vext).expect("face corner"), b),
                    (c, e),
                    (dims.step(c, b.unit(), vext).expect("face corner"), e),
                ];
                for (v, dir) in corners {
                    let id = edge_at[dims.vertex_index(v) * 3 + dir.index()];
                    debug_assert!(id != u32::MAX, "face boundary edge missing");
                    graph_edges.push((id as usize, w_index));
                }
            }
        }
        let droles: Vec<Role> = dends
            .iter()
            .map(|&[u, w]| {
                if dkind[u as usize] == VertexKind::Removed || dkind[w as usize] == VertexKind::Removed {
                    Role::Defect
                } else {
                    Role::Vacuum
                }
            })
            .collect();

        let n_b = pends.len();
        let n_w = dends.len();
        let graph = GraphState::from_edges(n_b, n_w, graph_edges)?;

        let mut primal = SubLattice::assemble(Sublattice::Primal, pverts, pkind, pends, paxis, pcoord, &proles);
        let mut dual = SubLattice::assemble(Sublattice::Dual, dverts, dkind, dends, daxis, dcoord, &droles);
        let (pm, dm) = layout_membranes(spec, &primal, &dual);
        primal.membranes = pm;
        dual.membranes = dm;

        let mut roles = proles;
        roles.extend(droles);

        let mut sites = spec.singular_sites.clone();
        sites.sort();
        let radius = spec.distance.div_ceil(2);
        let singular = sites
            .into_iter()
            .map(|site| {
                let qubit = edge_at[dims.vertex_index(site.vertex) * 3 + site.axis.index()] as usize;
                let normal = site.axis.others().0;
                let near = |coord: [usize; 3], skip: usize| {
                    (0..3).all(|k| k == skip || dims.offset(coord[k], site.vertex[k], k) <= radius)
                };
                let patch_primal = (0..primal.num_edges())
                    .filter(|&e| {
                        let c = primal.edge_coord[e];
                        primal.edge_axis[e] == site.axis
                            && c[site.axis.index()] == site.vertex[site.axis.index()]
                            && near(c, site.axis.index())
                            && primal.usable[e]
                    })
                    .collect();
                let patch_dual = (0..dual.num_edges())
                    .filter(|&e| {
                        let c = dual.edge_coord[e];
                        dual.edge_axis[e] == normal
                            && c[normal.index()] == site.vertex[normal.index()]
                            && near(c, normal.index())
                            && dual.usable[e]
                    })
                    .collect();
                SingularSite {
                    site,
                    qubit,
                    patch_primal,
                    patch_dual,
                }
            })
            .collect();

        Ok(ClusterLattice {
            spec: spec.clone(),
            primal,
            dual,
            roles,
            graph,
            singular,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn distance(&self) -> usize {
        self.spec.distance
    }

    pub fn n(&self) -> usize {
        self.roles.len()
    }

    pub fn n_black(&self) -> usize {
        self.primal.num_edges()
    }

    pub fn n_white(&self) -> usize {
        self.dual.num_edges()
    }

    pub fn role(&self, qubit: usize) -> Role {
        self.roles[qubit]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn graph(&self) -> &GraphState {
        &self.graph
    }

    pub fn primal(&self) -> &SubLattice {
        &self.primal
    }

    pub fn dual(&self) -> &SubLattice {
        &self.dual
    }

    pub fn sub(&self, which: Sublattice) -> &SubLattice {
        match which {
            Sublattice::Primal => &self.primal,
            Sublattice::Dual => &self.dual,
        }
    }

    /// Singular sites in lexicographic order of their coordinates.
    pub fn singular_sites(&self) -> &[SingularSite] {
        &self.singular
    }

    /// Graph-state adjacency as text (`n_B n_W` header then `b w` edges).
    pub fn dump_text(&self) -> String {
        self.graph.to_text()
    }
}

impl SubLattice {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: Sublattice,
        coords: Vec<[usize; 3]>,
        vertex_kind: Vec<VertexKind>,
        ends: Vec<[u32; 2]>,
        edge_axis: Vec<Axis>,
        edge_coord: Vec<[usize; 3]>,
        roles: &[Role],
    ) -> Self {
        let n = coords.len();
        let usable: Vec<bool> = ends
            .iter()
            .zip(roles)
            .map(|(&[u, w], &r)| {
                r != Role::Defect
                    && vertex_kind[u as usize] != VertexKind::Removed
                    && vertex_kind[w as usize] != VertexKind::Removed
            })
            .collect();
        // Direction code 2a for +a, 2a+1 for −a; links sorted by it.
        let mut adj: Vec<Vec<(u8, Link)>> = vec![Vec::new(); n];
        for (e, &[u, w]) in ends.iter().enumerate() {
            let a = edge_axis[e].index() as u8;
            let wall_vertex = vertex_kind[w as usize] == VertexKind::Boundary;
            let up_from_u = if wall_vertex {
                // Wall edge leaves the box upward iff the face is on the upper wall.
                edge_coord[e][a as usize] != 0
            } else {
                true
            };
            let (du, dw) = if up_from_u { (2 * a, 2 * a + 1) } else { (2 * a + 1, 2 * a) };
            adj[u as usize].push((du, Link { edge: e as u32, to: w }));
            adj[w as usize].push((dw, Link { edge: e as u32, to: u }));
        }
        let adj: Vec<Vec<Link>> = adj
            .into_iter()
            .map(|mut l| {
                l.sort_by_key(|&(d, link)| (d, link.edge));
                l.into_iter().map(|(_, link)| link).collect()
            })
            .collect();

        let usable_mask = BitVec::from_bools(&usable);
        let mut sub = SubLattice {
            kind,
            coords,
            vertex_kind,
            ends,
            edge_axis,
            edge_coord,
            usable,
            usable_mask,
            adj,
            dist_to_terminal: Vec::new(),
            has_terminals: false,
            membranes: Vec::new(),
        };
        sub.has_terminals = sub.vertex_kind.iter().any(|k| k.is_terminal());
        sub.dist_to_terminal = sub.terminal_distances();
        sub
    }

    fn terminal_distances(&self) -> Vec<u32> {
        let n = self.num_vertices();
        let mut dist = vec![UNREACHABLE; n];
        let mut queue = VecDeque::new();
        for (v, kind) in self.vertex_kind.iter().enumerate() {
            if kind.is_terminal() {
                dist[v] = 0;
                queue.push_back(v);
            }
        }
        while let Some(u) = queue.pop_front() {
            for link in &self.adj[u] {
                let v = link.to as usize;
                if self.usable[link.edge as usize] && self.is_vacuum(v) && dist[v] == UNREACHABLE {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Membranes for the layouts whose homology is enumerated: the empty torus
/// (three winding classes per sublattice) and the two-tube pair (one
/// connect class on the primal lattice, one wrap class on the dual).
fn layout_membranes(spec: &LatticeSpec, primal: &SubLattice, dual: &SubLattice) -> (Vec<LogicalMembrane>, Vec<LogicalMembrane>) {
    let select = |sub: &SubLattice, pred: &dyn Fn(Axis, [usize; 3]) -> bool| {
        BitVec::from_indices(
            sub.num_edges(),
            (0..sub.num_edges()).filter(|&e| sub.usable[e] && pred(sub.edge_axis[e], sub.edge_coord[e])),
        )
    };
    if spec.boundary == Boundary::Periodic && spec.tubes.is_empty() {
        let mut pm = Vec::new();
        let mut dm = Vec::new();
        for axis in Axis::ALL {
            let pred = move |a: Axis, c: [usize; 3]| a == axis && c[axis.index()] == 0;
            pm.push(LogicalMembrane {
                kind: MembraneKind::Torus { axis },
                edges: select(primal, &pred),
            });
            dm.push(LogicalMembrane {
                kind: MembraneKind::Torus { axis },
                edges: select(dual, &pred),
            });
        }
        return (pm, dm);
    }
    if let Some((a, b)) = tube_pair(spec) {
        let (ta, tb) = (&spec.tubes[a], &spec.tubes[b]);
        let hi_a = ta.vertices()[0].1;
        let lo_b = tb.vertices()[0].0;
        let cut_x = (hi_a + lo_b - 1) / 2;
        let connect = select(primal, &|ax, c| ax == Axis::X && c[0] == cut_x);
        let strip_y = ta.corner[1];
        let wrap = select(dual, &|ax, c| ax == Axis::Y && c[1] == strip_y && c[0] >= hi_a && c[0] < lo_b);
        return (
            vec![LogicalMembrane {
                kind: MembraneKind::Connect { a, b },
                edges: connect,
            }],
            vec![LogicalMembrane {
                kind: MembraneKind::Wrap,
                edges: wrap,
            }],
        );
    }
    (Vec::new(), Vec::new())
}

/// Recognizes two z-tubes spanning the full height, with identical y extent,
/// separated along x. Returns them ordered by x.
fn tube_pair(spec: &LatticeSpec) -> Option<(usize, usize)> {
    if spec.tubes.len() != 2 || spec.boundary != Boundary::Open {
        return None;
    }
    let (t0, t1) = (&spec.tubes[0], &spec.tubes[1]);
    let spans = |t: &DefectTube| t.axis == Axis::Z && t.corner[2] == 0 && t.length == spec.size[2];
    if !spans(t0) || !spans(t1) || t0.corner[1] != t1.corner[1] || t0.width != t1.width {
        return None;
    }
    if t0.corner[0] < t1.corner[0] {
        Some((0, 1))
    } else {
        Some((1, 0))
    }
}

/// Shortest path length between two vertices of one sublattice through the
/// vacuum region, and the distance from `from` to the nearest defect or open
/// wall.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geodesic {
    pub length: Option<u32>,
    pub to_boundary: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VertexId {
    pub sub: Sublattice,
    pub index: usize,
}

pub fn geodesic_distance(lat: &ClusterLattice, from: VertexId, to: VertexId) -> Geodesic {
    assert_eq!(from.sub, to.sub, "vertices on different sublattices");
    let sub = lat.sub(from.sub);
    let tree = sub.bfs(from.index, UNREACHABLE);
    let d = tree.distance(to.index);
    let b = sub.distance_to_terminal(from.index);
    Geodesic {
        length: (d != UNREACHABLE).then_some(d),
        to_boundary: (b != UNREACHABLE).then_some(b),
    }
}

/// Parity of `|chain ∩ membrane|` for each membrane of the sublattice.
pub fn membrane_parity(lat: &ClusterLattice, which: Sublattice, chain: &BitVec) -> Vec<bool> {
    let sub = lat.sub(which);
    assert_eq!(chain.len(), sub.num_edges(), "chain length mismatch");
    sub.membranes.iter().map(|m| m.edges.dot(chain)).collect()
}
