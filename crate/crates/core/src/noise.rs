//! Per-block Pauli error models and prover strategies.
//!
//! The depolarizing model draws X, Z and XZ with probability `p/3` each.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f2core::{BitVec, PauliError};
use crate::rng::{stream, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    IidZ { p: f64 },
    IidDepolarizingXz { p: f64 },
    /// Row `q` is the distribution `[pI, pX, pZ, pXZ]` of qubit `q`.
    PerQubitTable { table: Vec<[f64; 4]> },
}

const SUM_TOLERANCE: f64 = 1e-9;

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("probability {p} outside [0, 1]")))
            }
        };
        match self {
            NoiseModel::IidZ { p } | NoiseModel::IidDepolarizingXz { p } => prob(*p),
            NoiseModel::PerQubitTable { table } => {
                for (q, row) in table.iter().enumerate() {
                    row.iter().try_for_each(|&p| prob(p))?;
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > SUM_TOLERANCE {
                        return Err(Error::Config(format!("qubit {q}: distribution sums to {s}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Loads rows `qubit,pI,pX,pZ,pXZ`; qubits must appear as `0..n` in order.
    pub fn table_from_csv(path: &Path) -> Result<NoiseModel> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut table = Vec::new();
        for (row, rec) in rdr.deserialize::<(usize, f64, f64, f64, f64)>().enumerate() {
            let (q, pi, px, pz, pxz) = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if q != row {
                return Err(Error::Config(format!("{}: expected qubit {row}, found {q}", path.display())));
            }
            table.push([pi, px, pz, pxz]);
        }
        let model = NoiseModel::PerQubitTable { table };
        model.validate()?;
        Ok(model)
    }

    fn flip_probability(&self) -> Option<f64> {
        match self {
            NoiseModel::IidZ { p } | NoiseModel::IidDepolarizingXz { p } => Some(*p),
            NoiseModel::PerQubitTable { .. } => None,
        }
    }
}

/// Calls `hit` on each index in `0..n` independently with probability `p`.
/// Small `p` skips ahead geometrically.
fn bernoulli_indices<R: Rng>(n: usize, p: f64, rng: &mut R, mut hit: impl FnMut(usize, &mut R)) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..n).for_each(|i| hit(i, rng));
        return;
    }
    if p > 0.1 {
        for i in 0..n {
            if rng.gen::<f64>() < p {
                hit(i, rng);
            }
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (n - i) as f64 {
            return;
        }
        i += skip as usize;
        hit(i, rng);
        i += 1;
        if i >= n {
            return;
        }
    }
}

pub fn sample_block_error<R: Rng>(model: &NoiseModel, n: usize, rng: &mut R) -> PauliError {
    let mut x = BitVec::zeros(n);
    let mut z = BitVec::zeros(n);
    match model {
        NoiseModel::IidZ { p } => bernoulli_indices(n, *p, rng, |i, _| z.set(i, true)),
        NoiseModel::IidDepolarizingXz { p } => bernoulli_indices(n, *p, rng, |i, r| match r.gen_range(0..3) {
            0 => x.set(i, true),
            1 => z.set(i, true),
            _ => {
                x.set(i, true);
                z.set(i, true);
            }
        }),
        NoiseModel::PerQubitTable { table } => {
            assert_eq!(table.len(), n, "noise table length does not match qubit count");
            for (i, row) in table.iter().enumerate() {
                let k = match row.iter().position(|&p| p == 1.0) {
                    Some(k) => k,
                    None => {
                        let u: f64 = rng.gen();
                        let mut acc = 0.0;
                        row.iter()
                            .position(|&p| {
                                acc += p;
                                u < acc
                            })
                            .unwrap_or(3)
                    }
                };
                x.set(i, k == 1 || k == 3);
                z.set(i, k == 2 || k == 3);
            }
        }
    }
    PauliError::new(x, z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    Honest { noise: NoiseModel },
    /// Every block error-free except block `position`, which carries
    /// `bad_error`.
    SingleBadBlock { bad_error: PauliError, position: usize },
    /// One model per block.
    BlockTable { blocks: Vec<NoiseModel> },
}

impl AdversaryStrategy {
    pub fn validate(&self, blocks: usize, n: usize) -> Result<()> {
        match self {
            AdversaryStrategy::Honest { noise } => noise.validate(),
            AdversaryStrategy::SingleBadBlock { bad_error, position } => {
                if *position >= blocks {
                    return Err(Error::Config(format!("bad block position {position} outside 0..{blocks}")));
                }
                if bad_error.len() != n {
                    return Err(Error::Config(format!("bad error has {} qubits, lattice has {n}", bad_error.len())));
                }
                Ok(())
            }
            AdversaryStrategy::BlockTable { blocks: table } => {
                if table.len() != blocks {
                    return Err(Error::Config(format!("block table has {} entries, expected {blocks}", table.len())));
                }
                table.iter().try_for_each(NoiseModel::validate)
            }
        }
    }

    /// Honest iid noise with a single flip probability, if that is what
    /// this strategy is.
    pub fn honest_rate(&self) -> Option<f64> {
        match self {
            AdversaryStrategy::Honest { noise } => noise.flip_probability(),
            _ => None,
        }
    }
}

/// Errors of all `blocks` blocks of one trial, each drawn from its own
/// counter-keyed stream.
pub fn sample_prover_blocks(strategy: &AdversaryStrategy, blocks: usize, n: usize, seed: u64, trial: u64) -> Vec<PauliError> {
    (0..blocks)
        .map(|b| {
            let mut rng = stream(seed, trial, b as u64, Stage::Noise);
            match strategy {
                AdversaryStrategy::Honest { noise } => sample_block_error(noise, n, &mut rng),
                AdversaryStrategy::SingleBadBlock { bad_error, position } => {
                    if b == *position {
                        bad_error.clone()
                    } else {
                        PauliError::identity(n)
                    }
                }
                AdversaryStrategy::BlockTable { blocks } => sample_block_error(&blocks[b], n, &mut rng),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn extremes() {
        let e = sample_block_error(&NoiseModel::IidZ { p: 0.0 }, 100, &mut rng());
        assert!(e.is_identity());
        let e = sample_block_error(&NoiseModel::IidZ { p: 1.0 }, 100, &mut rng());
        assert_eq!(e.zpart, BitVec::ones(100));
        assert!(e.xpart.is_zero());
    }

    #[test]
    fn binomial_mean() {
        for p in [0.1, 0.01] {
            let n = 10_000;
            let e = sample_block_error(&NoiseModel::IidZ { p }, n, &mut rng());
            let mean = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((e.zpart.weight() as f64 - mean).abs() <= 3.0 * sd, "p={p}: {}", e.zpart.weight());
        }
    }

    #[test]
    fn geometric_skip_is_unbiased() {
        let (n, p, reps) = (200, 0.02, 2000);
        let mut counts = vec![0u32; n];
        let mut r = rng();
        for _ in 0..reps {
            for i in sample_block_error(&NoiseModel::IidZ { p }, n, &mut r).zpart.iter_ones() {
                counts[i] += 1;
            }
        }
        let total: u32 = counts.iter().sum();
        let expect = (n * reps) as f64 * p;
        assert!((total as f64 - expect).abs() < 4.0 * expect.sqrt());
        // First and last quarters see the same rate.
        let q1: u32 = counts[..n / 4].iter().sum();
        let q4: u32 = counts[3 * n / 4..].iter().sum();
        assert!((q1 as f64 - q4 as f64).abs() < 4.0 * (expect / 2.0).sqrt());
    }

    #[test]
    fn depolarizing_components() {
        let n = 30_000;
        let e = sample_block_error(&NoiseModel::IidDepolarizingXz { p: 0.3 }, n, &mut rng());
        let only_x = e.xpart.weight() - e.xpart.and(&e.zpart).weight();
        let both = e.xpart.and(&e.zpart).weight();
        let each = n as f64 * 0.1;
        for c in [only_x, both] {
            assert!((c as f64 - each).abs() < 4.0 * each.sqrt());
        }
    }

    #[test]
    fn table_rows() {
        let table = vec![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let e = sample_block_error(&NoiseModel::PerQubitTable { table }, 4, &mut rng());
        assert_eq!(e.xpart, BitVec::from_indices(4, [1, 3]));
        assert_eq!(e.zpart, BitVec::from_indices(4, [2, 3]));
        let bad = NoiseModel::PerQubitTable {
            table: vec![[0.5, 0.0, 0.0, 0.0]],
        };
        assert!(bad.validate().is_err());
        assert!(NoiseModel::IidZ { p: 1.5 }.validate().is_err());
    }

    #[test]
    fn table_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "qubit,pI,pX,pZ,pXZ\n0,0.9,0.05,0.05,0\n1,1,0,0,0\n").unwrap();
        let m = NoiseModel::table_from_csv(&path).unwrap();
        assert_eq!(
            m,
            NoiseModel::PerQubitTable {
                table: vec![[0.9, 0.05, 0.05, 0.0], [1.0, 0.0, 0.0, 0.0]]
            }
        );
        std::fs::write(&path, "qubit,pI,pX,pZ,pXZ\n1,1,0,0,0\n").unwrap();
        assert!(NoiseModel::table_from_csv(&path).is_err());
    }

    #[test]
    fn prover_blocks() {
        let honest = AdversaryStrategy::Honest {
            noise: NoiseModel::IidZ { p: 0.0 },
        };
        assert!(sample_prover_blocks(&honest, 3, 10, 1, 0).iter().all(PauliError::is_identity));
        let bad = PauliError::from_z(BitVec::from_indices(10, [4]));
        let single = AdversaryStrategy::SingleBadBlock {
            bad_error: bad.clone(),
            position: 2,
        };
        let blocks = sample_prover_blocks(&single, 3, 10, 1, 0);
        assert_eq!(blocks.iter().filter(|b| !b.is_identity()).count(), 1);
        assert_eq!(blocks[2], bad);
        assert!(single.validate(3, 10).is_ok());
        assert!(single.validate(2, 10).is_err());
    }

    #[test]
    fn block_table_rates_and_independence() {
        let (n, trials) = (400, 400);
        let table = AdversaryStrategy::BlockTable {
            blocks: vec![NoiseModel::IidZ { p: 0.01 }, NoiseModel::IidZ { p: 0.1 }, NoiseModel::IidZ { p: 0.3 }],
        };
        let mut sums = [0f64; 3];
        let mut w01 = Vec::new();
        for t in 0..trials {
            let b = sample_prover_blocks(&table, 3, n, 11, t);
            let w: Vec<f64> = b.iter().map(|e| e.zpart.weight() as f64).collect();
            for k in 0..3 {
                sums[k] += w[k];
            }
            w01.push((w[1], w[2]));
        }
        for (k, p) in [0.01, 0.1, 0.3].into_iter().enumerate() {
            let mean = sums[k] / trials as f64;
            let sd = (n as f64 * p * (1.0 - p) / trials as f64).sqrt();
            assert!((mean - n as f64 * p).abs() < 4.0 * sd, "block {k}");
        }
        let m = |f: fn(&(f64, f64)) -> f64| w01.iter().map(f).sum::<f64>() / trials as f64;
        let (ma, mb) = (m(|x| x.0), m(|x| x.1));
        let cov = w01.iter().map(|x| (x.0 - ma) * (x.1 - mb)).sum::<f64>() / trials as f64;
        let va = w01.iter().map(|x| (x.0 - ma).powi(2)).sum::<f64>() / trials as f64;
        let vb = w01.iter().map(|x| (x.1 - mb).powi(2)).sum::<f64>() / trials as f64;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 4.0 / (trials as f64).sqrt(), "correlation {corr}");
    }

    #[test]
    fn restriction_to_a_subset_is_iid() {
        let (n, p) = (20_000, 0.05);
        let e = sample_block_error(&NoiseModel::IidZ { p }, n, &mut rng());
        let sub = e.zpart.slice(5_000, 8_000);
        let mean = 8_000.0 * p;
        assert!((sub.weight() as f64 - mean).abs() < 4.0 * (mean * (1.0 - p)).sqrt());
    }
}
