//! Closed-form detectability and acceptability bounds.
//!
//! Sums are accumulated term by term in the log domain with compensated
//! summation, so tiny probabilities do not underflow before they are added.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability-valued result, clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounded {
    pub value: f64,
    /// The unclamped value left `[0, 1]`.
    pub saturated: bool,
}

impl Bounded {
    fn clamp(raw: f64) -> Self {
        let value = if raw.is_nan() { 1.0 } else { raw.clamp(0.0, 1.0) };
        Bounded {
            value,
            saturated: raw.is_nan() || value != raw,
        }
    }
}

/// Lower bound `1 − 1/(α(2k+1))` on the compute block's overlap with the
/// correctable subspace after acceptance.
pub fn theorem1_bound(alpha: f64, k: u64) -> Result<f64> {
    let floor = 1.0 / (2 * k + 1) as f64;
    if !(alpha > 0.0 && alpha <= 1.0) || alpha < floor * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "significance level {alpha} must lie in [1/(2k+1), 1] = [{floor}, 1]"
        )));
    }
    Ok((1.0 - 1.0 / (alpha * (2 * k + 1) as f64)).max(0.0))
}

/// Upper bound `1/√(α(2k+1))` on the trace distance to the ideal output.
pub fn trace_distance_bound(alpha: f64, k: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("significance level {alpha} outside (0, 1]")));
    }
    Ok(1.0 / (alpha * (2 * k + 1) as f64).sqrt())
}

/// Neumaier-compensated sum.
#[derive(Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `ln(C(ν,μ) p^μ (1−p)^{n−μ})`, `−∞` when the term vanishes.
fn ln_binomial_term(nu: u64, mu: u64, p: f64, n: u64) -> f64 {
    let ln_p = if mu == 0 { 0.0 } else { p.ln() };
    let rest = n.saturating_sub(mu) as f64;
    let ln_q = if rest == 0.0 { 0.0 } else { rest * (-p).ln_1p() };
    ln_choose(nu, mu) + mu as f64 * ln_p + ln_q
}

/// Chain counts `C_ν`, indexed from `ν = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SawTable {
    pub counts: Vec<f64>,
    pub source: SawSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SawSource {
    UpperBound6x5,
    UserTable,
}

impl SawTable {
    /// `C_ν = sites · (6/5) · 5^ν` for `ν = 1..=nu_max`.
    pub fn upper_bound_6x5(nu_max: usize, sites: f64) -> Self {
        SawTable {
            counts: (1..=nu_max).map(|nu| sites * 1.2 * 5f64.powi(nu as i32)).collect(),
            source: SawSource::UpperBound6x5,
        }
    }

    pub fn user(counts: Vec<f64>) -> Result<Self> {
        if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::Config(format!("chain count {c} is not a nonnegative number")));
        }
        Ok(SawTable {
            counts,
            source: SawSource::UserTable,
        })
    }

    /// Reads rows `nu,count` with `nu` running `1, 2, …` in order.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut counts = Vec::new();
        for (i, rec) in rdr.deserialize::<(usize, f64)>().enumerate() {
            let (nu, c) = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if nu != i + 1 {
                return Err(Error::Config(format!("{}: expected nu = {}, found {nu}", path.display(), i + 1)));
            }
            counts.push(c);
        }
        SawTable::user(counts)
    }

    pub fn get(&self, nu: usize) -> Option<f64> {
        nu.checked_sub(1).and_then(|i| self.counts.get(i)).copied()
    }
}

/// `p₀ = Σ_{ν=1}^{d} Σ_{μ=⌈ν/2⌉}^{ν} C_ν C(ν,μ) p^μ (1−p)^{n−μ}`.
pub fn p0_fault(p: f64, d: usize, table: &SawTable, n: u64) -> Result<f64> {
    check_probability(p)?;
    if table.counts.len() < d {
        return Err(Error::TableCoverage(d));
    }
    let mut sum = Sum::default();
    for nu in 1..=d {
        let c = table.get(nu).expect("covered");
        if c == 0.0 {
            continue;
        }
        for mu in nu.div_ceil(2)..=nu {
            let t = ln_binomial_term(nu as u64, mu as u64, p, n);
            sum.add(c * t.exp());
        }
    }
    Ok(sum.value())
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {p} outside [0, 1]")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SfRejection {
    /// Double sum over `d ≤ ν ≤ ν_max`.
    pub explicit: f64,
    /// Upper estimate of the omitted terms `ν > ν_max`.
    pub tail: f64,
    /// `n (6/5) Σ_{ν≥d} (10√p)^ν`; infinite when divergent.
    pub closed_form: f64,
    /// `10√p ≥ 1`.
    pub diverges: bool,
}

/// Upper bounds on `1 − P(S^sf)` from counting chains of length at least
/// `d` with at least half their edges in error.
pub fn sf_rejection_bound(n: u64, p: f64, d: usize, nu_max: usize) -> Result<SfRejection> {
    check_probability(p)?;
    if d == 0 {
        return Err(Error::Domain("distance must be at least 1".into()));
    }
    let ratio = 10.0 * p.sqrt();
    let diverges = ratio >= 1.0;
    let prefactor = n as f64 * 1.2;
    let mut sum = Sum::default();
    if p > 0.0 {
        for nu in d..=nu_max.max(d.saturating_sub(1)) {
            let ln_chains = (prefactor).ln() + nu as f64 * 5f64.ln();
            for mu in nu.div_ceil(2)..=nu {
                sum.add((ln_chains + ln_binomial_term(nu as u64, mu as u64, p, n)).exp());
            }
        }
    }
    let geometric_from = |start: usize| {
        if p == 0.0 {
            0.0
        } else if diverges {
            f64::INFINITY
        } else {
            prefactor * ratio.powi(start as i32) / (1.0 - ratio)
        }
    };
    Ok(SfRejection {
        explicit: sum.value(),
        tail: geometric_from(nu_max.max(d - 1) + 1),
        closed_form: geometric_from(d),
        diverges,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmRecursion {
    pub value: Bounded,
    /// `p_0, p_1, …, p_l` from `p_{l'} = 105² p_{l'−1}²`.
    pub steps: Vec<f64>,
}

const RM_FACTOR: f64 = 105.0 * 105.0;

/// `p_l = (105² p₀)^{2^l} / 105²`.
pub fn rm_fault_recursion(p0: f64, l: u32) -> Result<RmRecursion> {
    check_probability(p0)?;
    let ln = (1u64 << l) as f64 * (RM_FACTOR * p0).ln() - RM_FACTOR.ln();
    let raw = match (p0, l) {
        (0.0, _) => 0.0,
        (_, 0) => p0,
        _ => ln.exp(),
    };
    let mut steps = vec![p0];
    for _ in 0..l {
        let prev = *steps.last().expect("p0");
        steps.push(RM_FACTOR * prev * prev);
    }
    Ok(RmRecursion {
        value: Bounded::clamp(raw),
        steps,
    })
}

/// `(1 − p_l)^m`.
pub fn rm_acceptance_bound(p0: f64, l: u32, m: u64) -> Result<Bounded> {
    let pl = rm_fault_recursion(p0, l)?.value;
    let raw = (m as f64 * (-pl.value).ln_1p()).exp();
    let mut b = Bounded::clamp(raw);
    b.saturated |= pl.saturated;
    Ok(b)
}

/// `max(0, P_sf + P_rm − 1)`.
pub fn union_bound(p_sf: f64, p_rm: f64) -> Result<Bounded> {
    check_probability(p_sf)?;
    check_probability(p_rm)?;
    Ok(Bounded::clamp(p_sf + p_rm - 1.0))
}

/// Number of self-avoiding walks of each length `1..=nu_max` from the
/// origin of the simple cubic lattice.
pub fn enumerate_saw(nu_max: usize) -> Vec<u64> {
    const DIRS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    let side = 2 * nu_max + 1;
    let idx = |p: [i32; 3]| {
        let o = nu_max as i32;
        (((p[0] + o) as usize * side) + (p[1] + o) as usize) * side + (p[2] + o) as usize
    };
    let mut seen = vec![false; side * side * side];
    let mut counts = vec![0u64; nu_max];
    fn walk(pos: [i32; 3], depth: usize, max: usize, seen: &mut [bool], counts: &mut [u64], idx: &dyn Fn([i32; 3]) -> usize) {
        if depth == max {
            return;
        }
        for d in DIRS {
            let next = [pos[0] + d[0], pos[1] + d[1], pos[2] + d[2]];
            let i = idx(next);
            if seen[i] {
                continue;
            }
            counts[depth] += 1;
            seen[i] = true;
            walk(next, depth + 1, max, seen, counts, idx);
            seen[i] = false;
        }
    }
    seen[idx([0, 0, 0])] = true;
    walk([0, 0, 0], 0, nu_max, &mut seen, &mut counts, &idx);
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn theorem1() {
        assert_eq!(theorem1_bound(1.0, 0).unwrap(), 0.0);
        let a = 1.0 / 81f64.sqrt();
        assert!((theorem1_bound(a, 40).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!((theorem1_bound(0.5, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(theorem1_bound(0.2, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn trace_distance() {
        let a = 1.0 / 81f64.sqrt();
        assert!((trace_distance_bound(a, 40).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(trace_distance_bound(1.0, 0).unwrap(), 1.0);
        let mut prev = f64::INFINITY;
        for k in [1u64, 4, 12, 40, 200] {
            let v = trace_distance_bound(1.0 / ((2 * k + 1) as f64).sqrt(), k).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(trace_distance_bound(0.0, 3).is_err());
    }

    #[test]
    fn sf_bound() {
        let z = sf_rejection_bound(100, 0.0, 3, 20).unwrap();
        assert_eq!((z.explicit, z.closed_form), (0.0, 0.0));
        let b = sf_rejection_bound(1, 1e-4, 5, 30).unwrap();
        let r: f64 = 0.1;
        assert!(rel(b.closed_form, 1.2 * r.powi(5) / (1.0 - r)) < 1e-12);
        assert!(!b.diverges);
        assert!(sf_rejection_bound(10, 0.04, 3, 10).unwrap().diverges);
        assert!(b.explicit <= b.closed_form);
    }

    #[test]
    fn sf_bound_decreases_with_distance() {
        let mut prev = f64::INFINITY;
        for d in 1..12 {
            let b = sf_rejection_bound(1000, 0.001, d, 40).unwrap();
            assert!(b.closed_form < prev);
            prev = b.closed_form;
        }
    }

    #[test]
    fn p0() {
        let t = SawTable::user(vec![3.0]).unwrap();
        assert_eq!(p0_fault(0.0, 1, &t, 10).unwrap(), 0.0);
        let (p, n) = (0.02f64, 50u64);
        let want = 3.0 * p * (1.0 - p).powi(49);
        assert!(rel(p0_fault(p, 1, &t, n).unwrap(), want) < 1e-14);
        assert!(matches!(p0_fault(p, 2, &t, n), Err(Error::TableCoverage(2))));
    }

    #[test]
    fn p0_matches_direct_sum() {
        let t = SawTable::user(vec![1.0, 1.0]).unwrap();
        let (p, n) = (0.01f64, 10i32);
        // ν = 1: μ = 1.  ν = 2: μ = 1, 2.
        let direct = p * (1.0 - p).powi(n - 1) + 2.0 * p * (1.0 - p).powi(n - 1) + p * p * (1.0 - p).powi(n - 2);
        assert!(rel(p0_fault(p, 2, &t, n as u64).unwrap(), direct) < 1e-15);
    }

    #[test]
    fn recursion() {
        assert_eq!(rm_fault_recursion(3e-3, 0).unwrap().value.value, 3e-3);
        let r = rm_fault_recursion(1e-5, 1).unwrap();
        assert!(rel(r.value.value, 1.1025e-6) < 1e-12);
        let r = rm_fault_recursion(1e-5, 2).unwrap();
        assert!(rel(r.value.value, 0.11025f64.powi(4) / 11025.0) < 1e-12);
        assert!((r.value.value - 1.3401e-8).abs() < 5e-13);
        for l in 0..=6 {
            let r = rm_fault_recursion(2e-5, l).unwrap();
            assert!(rel(r.value.value, *r.steps.last().unwrap()) < 1e-12, "l={l}");
        }
        let w = rm_fault_recursion(1e-4, 1).unwrap();
        assert!(w.steps[1] > w.steps[0]);
        let s = rm_fault_recursion(0.5, 3).unwrap();
        assert!(s.value.saturated && s.value.value == 1.0);
    }

    #[test]
    fn recursion_monotone_in_level() {
        for (p0, shrinks) in [(1e-5, true), (5e-5, true), (1e-4, false), (1e-3, false)] {
            let r = rm_fault_recursion(p0, 4).unwrap();
            let dec = r.steps.windows(2).all(|w| w[1] < w[0]);
            assert_eq!(dec, shrinks, "p0={p0}");
        }
    }

    #[test]
    fn acceptance_and_union() {
        assert_eq!(rm_acceptance_bound(0.0, 2, 100).unwrap().value, 1.0);
        let v = rm_acceptance_bound(1e-5, 1, 100).unwrap().value;
        assert!(rel(v, (1.0 - 1.1025e-6f64).powi(100)) < 1e-12);
        assert!((v - (1.0 - 1.1025e-4)).abs() < 1e-8);
        assert_eq!(union_bound(1.0, 1.0).unwrap().value, 1.0);
        assert!((union_bound(0.99, 0.98).unwrap().value - 0.97).abs() < 1e-12);
        let u = union_bound(0.5, 0.4).unwrap();
        assert_eq!(u.value, 0.0);
        assert!(u.saturated);
    }

    #[test]
    fn saw_counts() {
        assert_eq!(enumerate_saw(8), vec![6, 30, 150, 726, 3534, 16926, 81390, 387966]);
        let ub = SawTable::upper_bound_6x5(8, 1.0);
        for (nu, &c) in enumerate_saw(8).iter().enumerate() {
            assert!(c as f64 <= ub.counts[nu] + 1e-9);
        }
    }
}
