use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BinaryMatrix, BitVec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

/// A two-colorable graph state.
///
/// Qubits are numbered globally with the `n_b` black qubits first, followed
/// by the `n_w` white qubits. The bipartite adjacency `A` is stored
/// white-row × black-column, so the stabilizer relation reads
/// `X_B^{z} Z_W^{A z} |G⟩ = |G⟩`.
#[derive(Clone, Debug)]
pub struct GraphState {
    n_b: usize,
    n_w: usize,
    adjacency: BinaryMatrix,
    edges: Vec<(usize, usize)>,
    black_nbrs: Vec<Vec<u32>>,
    white_nbrs: Vec<Vec<u32>>,
}

impl GraphState {
    /// Builds a graph state from `(black, white)` edges in local indices.
    pub fn from_edges(n_b: usize, n_w: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = BinaryMatrix::zeros(n_w, n_b);
        for &(b, w) in &edges {
            if b >= n_b || w >= n_w {
                return Err(Error::Parse(format!(
                    "edge ({b}, {w}) out of range for n_B = {n_b}, n_W = {n_w}"
                )));
            }
            if !seen.insert((b, w)) {
                return Err(Error::Parse(format!("duplicate edge ({b}, {w})")));
            }
            adjacency.set(w, b, true);
        }
        Ok(Self::from_parts(n_b, n_w, adjacency, edges))
    }

    /// Assembles a graph state without validating that `adjacency` and
    /// `edges` agree; see [`check_stabilizer_identities`].
    pub fn from_parts(n_b: usize, n_w: usize, adjacency: BinaryMatrix, edges: Vec<(usize, usize)>) -> Self {
        let mut black_nbrs = vec![Vec::new(); n_b];
        let mut white_nbrs = vec![Vec::new(); n_w];
        for &(b, w) in &edges {
            if b < n_b && w < n_w {
                black_nbrs[b].push(w as u32);
                white_nbrs[w].push(b as u32);
            }
        }
        GraphState {
            n_b,
            n_w,
            adjacency,
            edges,
            black_nbrs,
            white_nbrs,
        }
    }

    pub fn n_black(&self) -> usize {
        self.n_b
    }

    pub fn n_white(&self) -> usize {
        self.n_w
    }

    pub fn n(&self) -> usize {
        self.n_b + self.n_w
    }

    pub fn color(&self, qubit: usize) -> Color {
        assert!(qubit < self.n(), "qubit {qubit} out of range");
        if qubit < self.n_b {
            Color::Black
        } else {
            Color::White
        }
    }

    pub fn adjacency(&self) -> &BinaryMatrix {
        &self.adjacency
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn black_neighbors(&self, b: usize) -> &[u32] {
        &self.black_nbrs[b]
    }

    pub fn white_neighbors(&self, w: usize) -> &[u32] {
        &self.white_nbrs[w]
    }

    /// `A·x` for `x ∈ F₂^{n_B}`, via the sparse neighbor lists.
    pub fn a_mul(&self, x_b: &BitVec) -> BitVec {
        assert_eq!(x_b.len(), self.n_b, "A·x expects a black-indexed vector");
        let mut out = BitVec::zeros(self.n_w);
        for b in x_b.iter_ones() {
            for &w in &self.black_nbrs[b] {
                out.flip(w as usize);
            }
        }
        out
    }

    /// `Aᵀ·z` for `z ∈ F₂^{n_W}`.
    pub fn a_t_mul(&self, z_w: &BitVec) -> BitVec {
        assert_eq!(z_w.len(), self.n_w, "Aᵀ·z expects a white-indexed vector");
        let mut out = BitVec::zeros(self.n_b);
        for w in z_w.iter_ones() {
            for &b in &self.white_nbrs[w] {
                out.flip(b as usize);
            }
        }
        out
    }

    /// Text form: a header line `n_B n_W`, then one `b w` edge per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n_b, self.n_w);
        for &(b, w) in &self.edges {
            let _ = writeln!(s, "{b} {w}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph description".into()))?;
        let (n_b, n_w) = parse_pair(header)?;
        let edges = lines.map(parse_pair).collect::<Result<Vec<_>>>()?;
        GraphState::from_edges(n_b, n_w, edges)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("expected two integers in `{line}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("`{line}`: {e}")))
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse(format!("trailing tokens in `{line}`")));
    }
    Ok((a, b))
}

/// Checks the shape of `A`, the bijection between `A` and the edge list, and
/// the consistency of the neighbor lists.
pub fn check_stabilizer_identities(g: &GraphState) -> bool {
    if g.adjacency.shape() != (g.n_w, g.n_b) {
        return false;
    }
    if g.black_nbrs.len() != g.n_b || g.white_nbrs.len() != g.n_w {
        return false;
    }
    let mut seen = HashSet::with_capacity(g.edges.len());
    for &(b, w) in &g.edges {
        if b >= g.n_b || w >= g.n_w || !seen.insert((b, w)) || !g.adjacency.get(w, b) {
            return false;
        }
    }
    if g.adjacency.weight() != g.edges.len() {
        return false;
    }
    let listed: usize = g.black_nbrs.iter().map(Vec::len).sum();
    let listed_w: usize = g.white_nbrs.iter().map(Vec::len).sum();
    if listed != g.edges.len() || listed_w != g.edges.len() {
        return false;
    }
    g.black_nbrs
        .iter()
        .enumerate()
        .all(|(b, ws)| ws.iter().all(|&w| g.adjacency.get(w as usize, b)))
}
