//! Minimum-cost perfect matching of flagged vertices, where each vertex may
//! alternatively be matched to the boundary.

use super::blossom::max_weight_matching;
use crate::error::{Error, Result};

pub const EXACT_CAPACITY: usize = 24;
const INF: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partner {
    Vertex(usize),
    Boundary,
}

/// Dense instance: `cost[i*n+j]` is the pair cost (`INF` when not allowed),
/// `boundary[i]` the cost of matching `i` to the boundary.
#[derive(Clone, Debug)]
pub struct Instance {
    pub n: usize,
    pub cost: Vec<u32>,
    pub boundary: Vec<u32>,
}

impl Instance {
    pub fn new(n: usize) -> Self {
        Instance {
            n,
            cost: vec![INF; n * n],
            boundary: vec![INF; n],
        }
    }

    pub fn set_pair(&mut self, i: usize, j: usize, c: u32) {
        self.cost[i * self.n + j] = c;
        self.cost[j * self.n + i] = c;
    }

    pub fn pair(&self, i: usize, j: usize) -> u32 {
        self.cost[i * self.n + j]
    }

    #[cfg(test)]
    pub fn total(&self, sol: &[Partner]) -> u64 {
        sol.iter()
            .enumerate()
            .map(|(i, p)| match *p {
                Partner::Vertex(j) if i < j => self.pair(i, j) as u64,
                Partner::Vertex(_) => 0,
                Partner::Boundary => self.boundary[i] as u64,
            })
            .sum()
    }

    fn restrict(&self, keep: &[usize]) -> Instance {
        let mut sub = Instance::new(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            sub.boundary[a] = self.boundary[i];
            for (b, &j) in keep.iter().enumerate().skip(a + 1) {
                sub.set_pair(a, b, self.pair(i, j));
            }
        }
        sub
    }
}

fn infeasible() -> ! {
    panic!("odd number of flagged vertices on a closed lattice")
}

/// Subset dynamic program. Ties prefer pairing the lowest unresolved vertex
/// with the lowest-indexed partner, the boundary last.
pub fn solve_exact(inst: &Instance) -> Result<Vec<Partner>> {
    let n = inst.n;
    if n > EXACT_CAPACITY {
        return Err(Error::Capacity {
            flagged: n,
            limit: EXACT_CAPACITY,
        });
    }
    let full = (1usize << n) - 1;
    let mut best = vec![u64::MAX; full + 1];
    let mut choice = vec![u8::MAX; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let c = inst.pair(i, j);
            let sub = best[rest & !(1 << j)];
            if c != INF && sub != u64::MAX && sub + (c as u64) < best[mask] {
                best[mask] = sub + c as u64;
                choice[mask] = j as u8;
            }
        }
        let b = inst.boundary[i];
        if b != INF && best[rest] != u64::MAX && best[rest] + (b as u64) < best[mask] {
            best[mask] = best[rest] + b as u64;
            choice[mask] = u8::MAX;
        }
    }
    if best[full] == u64::MAX {
        infeasible();
    }
    let mut sol = vec![Partner::Boundary; n];
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        mask &= !(1 << i);
        match choice_of(&choice, mask | (1 << i)) {
            Some(j) => {
                sol[i] = Partner::Vertex(j);
                sol[j] = Partner::Vertex(i);
                mask &= !(1 << j);
            }
            None => sol[i] = Partner::Boundary,
        }
    }
    Ok(sol)
}

fn choice_of(choice: &[u8], mask: usize) -> Option<usize> {
    (choice[mask] != u8::MAX).then(|| choice[mask] as usize)
}

/// Reduction to maximum-weight maximum-cardinality matching. Each vertex
/// gets a twin reachable at the boundary cost; twins of pairable vertices
/// are joined at zero cost so that unused twins can always pair up.
pub fn solve_blossom(inst: &Instance) -> Vec<Partner> {
    let n = inst.n;
    let with_twins = inst.boundary.iter().any(|&b| b != INF);
    let mut raw = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let c = inst.pair(i, j);
            if c != INF {
                raw.push((i, j, c as i64));
                if with_twins {
                    raw.push((n + i, n + j, 0));
                }
            }
        }
        if with_twins && inst.boundary[i] != INF {
            raw.push((i, n + i, inst.boundary[i] as i64));
        }
    }
    let top = raw.iter().map(|e| e.2).max().unwrap_or(0) + 1;
    let edges: Vec<(usize, usize, i64)> = raw.into_iter().map(|(i, j, c)| (i, j, top - c)).collect();
    let nodes = if with_twins { 2 * n } else { n };
    let mate = max_weight_matching(nodes, &edges, true);
    (0..n)
        .map(|i| match mate[i] {
            Some(j) if j < n => Partner::Vertex(j),
            Some(_) => Partner::Boundary,
            None => infeasible(),
        })
        .collect()
}

/// Repeatedly takes the cheapest remaining option. Vertices left stranded
/// are re-solved exactly; if that is impossible the whole instance is.
pub fn solve_greedy(inst: &Instance) -> Vec<Partner> {
    let n = inst.n;
    let mut options: Vec<(u32, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if inst.pair(i, j) != INF {
                options.push((inst.pair(i, j), i, j));
            }
        }
        if inst.boundary[i] != INF {
            options.push((inst.boundary[i], i, usize::MAX));
        }
    }
    options.sort_unstable();
    let mut sol: Vec<Option<Partner>> = vec![None; n];
    for (_, i, j) in options {
        if sol[i].is_some() {
            continue;
        }
        if j == usize::MAX {
            sol[i] = Some(Partner::Boundary);
        } else if sol[j].is_none() {
            sol[i] = Some(Partner::Vertex(j));
            sol[j] = Some(Partner::Vertex(i));
        }
    }
    let left: Vec<usize> = (0..n).filter(|&i| sol[i].is_none()).collect();
    if left.is_empty() {
        return sol.into_iter().map(Option::unwrap).collect();
    }
    let sub = inst.restrict(&left);
    let feasible = sub.boundary.iter().all(|&b| b != INF) || has_perfect(&sub);
    if !feasible {
        return solve_blossom(inst);
    }
    for (a, p) in solve_blossom(&sub).into_iter().enumerate() {
        sol[left[a]] = Some(match p {
            Partner::Vertex(b) => Partner::Vertex(left[b]),
            Partner::Boundary => Partner::Boundary,
        });
    }
    sol.into_iter().map(Option::unwrap).collect()
}

fn has_perfect(inst: &Instance) -> bool {
    let n = inst.n;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if inst.pair(i, j) != INF {
                edges.push((i, j, 1));
            }
        }
        if inst.boundary[i] != INF {
            edges.push((i, n + i, 1));
            for j in i + 1..n {
                if inst.boundary[j] != INF {
                    edges.push((n + i, n + j, 1));
                }
            }
        }
    }
    let mate = max_weight_matching(2 * n, &edges, true);
    (0..n).all(|i| mate[i].is_some())
}
