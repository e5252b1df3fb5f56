use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BitVec, GraphState};

/// Pauli-frame error on one graph-state block: `X^{xpart} Z^{zpart}` up to phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliError {
    pub xpart: BitVec,
    pub zpart: BitVec,
}

impl PauliError {
    pub fn identity(n: usize) -> Self {
        PauliError {
            xpart: BitVec::zeros(n),
            zpart: BitVec::zeros(n),
        }
    }

    pub fn new(xpart: BitVec, zpart: BitVec) -> Self {
        assert_eq!(xpart.len(), zpart.len(), "X and Z parts differ in length");
        PauliError { xpart, zpart }
    }

    pub fn from_z(zpart: BitVec) -> Self {
        PauliError {
            xpart: BitVec::zeros(zpart.len()),
            zpart,
        }
    }

    pub fn len(&self) -> usize {
        self.xpart.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xpart.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.xpart.is_zero() && self.zpart.is_zero()
    }

    /// Number of qubits with a non-identity component.
    pub fn weight(&self) -> usize {
        self.xpart
            .words()
            .iter()
            .zip(self.zpart.words())
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    pub fn compose(&self, other: &PauliError) -> PauliError {
        PauliError {
            xpart: self.xpart.xor(&other.xpart),
            zpart: self.zpart.xor(&other.zpart),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
    /// The (X+Y)/√2 basis used on singular qubits.
    XY,
}

impl Basis {
    fn code(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Z => 'Z',
            Basis::XY => 'Y',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'X' => Some(Basis::X),
            'Z' => Some(Basis::Z),
            'Y' => Some(Basis::XY),
            _ => None,
        }
    }
}

/// Which of the two stabilizer tests a block undergoes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    /// B measured in X, W measured in Z; statistic `X_B ⊕ Aᵀ Z_W`.
    #[serde(rename = "T_B")]
    Black,
    /// W measured in X, B measured in Z; statistic `X_W ⊕ A Z_B`.
    #[serde(rename = "T_W")]
    White,
}

/// Single-qubit measurement bases and outcomes of one block. Every qubit of
/// the block is measured, so `outcome` has one bit per qubit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    #[serde(serialize_with = "ser_basis", deserialize_with = "de_basis")]
    pub basis: Vec<Basis>,
    pub outcome: BitVec,
}

fn ser_basis<S: Serializer>(basis: &[Basis], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&basis.iter().map(|b| b.code()).collect::<String>())
}

fn de_basis<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Basis>, D::Error> {
    let s = String::deserialize(d)?;
    s.chars()
        .map(|c| Basis::from_code(c).ok_or_else(|| serde::de::Error::custom(format!("unknown basis `{c}`"))))
        .collect()
}

impl MeasurementRecord {
    /// Infers which test produced this record from its basis pattern.
    pub fn test_kind(&self, g: &GraphState) -> Option<TestKind> {
        let (b, w) = self.basis.split_at(g.n_black());
        let all = |s: &[Basis], want: Basis| s.iter().all(|&x| x == want);
        if all(b, Basis::X) && all(w, Basis::Z) {
            Some(TestKind::Black)
        } else if all(b, Basis::Z) && all(w, Basis::X) {
            Some(TestKind::White)
        } else {
            None
        }
    }
}

fn check_len(error: &PauliError, g: &GraphState) {
    assert_eq!(
        error.len(),
        g.n(),
        "error length {} does not match graph size {}",
        error.len(),
        g.n()
    );
}

/// `z_B ⊕ Aᵀ x_W`: the outcome flips seen by test T_B.
pub fn deviation_b(error: &PauliError, g: &GraphState) -> BitVec {
    check_len(error, g);
    let n_b = g.n_black();
    let mut dev = error.zpart.slice(0, n_b);
    for q in error.xpart.iter_ones().filter(|&q| q >= n_b) {
        for &b in g.white_neighbors(q - n_b) {
            dev.flip(b as usize);
        }
    }
    dev
}

/// `z_W ⊕ A x_B`: the outcome flips seen by test T_W.
pub fn deviation_w(error: &PauliError, g: &GraphState) -> BitVec {
    check_len(error, g);
    let n_b = g.n_black();
    let mut dev = error.zpart.slice(n_b, g.n_white());
    for b in error.xpart.iter_ones().take_while(|&q| q < n_b) {
        for &w in g.black_neighbors(b) {
            dev.flip(w as usize);
        }
    }
    dev
}

pub fn deviation(error: &PauliError, g: &GraphState, which: TestKind) -> BitVec {
    match which {
        TestKind::Black => deviation_b(error, g),
        TestKind::White => deviation_w(error, g),
    }
}

fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> BitVec {
    let words = (0..len.div_ceil(64)).map(|_| rng.gen::<u64>()).collect();
    BitVec::from_words(len, words)
}

/// Samples the outcomes of test `which` on a block carrying `error`.
///
/// The Z-measured side is uniformly random (flipped by the X part of the
/// error on those qubits); the X-measured side is then fixed by the graph
/// relation so that the test statistic equals the deviation exactly.
pub fn sample_test_outcomes<R: Rng + ?Sized>(
    error: &PauliError,
    g: &GraphState,
    which: TestKind,
    rng: &mut R,
) -> MeasurementRecord {
    check_len(error, g);
    let (n_b, n_w) = (g.n_black(), g.n_white());
    match which {
        TestKind::Black => {
            let mut z_w = random_bits(n_w, rng);
            z_w.xor_assign(&error.xpart.slice(n_b, n_w));
            let mut x_b = g.a_t_mul(&z_w);
            x_b.xor_assign(&deviation_b(error, g));
            let mut basis = vec![Basis::X; n_b];
            basis.resize(n_b + n_w, Basis::Z);
            MeasurementRecord {
                basis,
                outcome: x_b.concat(&z_w),
            }
        }
        TestKind::White => {
            let mut z_b = random_bits(n_b, rng);
            z_b.xor_assign(&error.xpart.slice(0, n_b));
            let mut x_w = g.a_mul(&z_b);
            x_w.xor_assign(&deviation_w(error, g));
            let mut basis = vec![Basis::Z; n_b];
            basis.resize(n_b + n_w, Basis::X);
            MeasurementRecord {
                basis,
                outcome: z_b.concat(&x_w),
            }
        }
    }
}

/// Recomputes the test statistic (`X_B ⊕ AᵀZ_W` or `X_W ⊕ AZ_B`) from a record.
pub fn test_statistic(record: &MeasurementRecord, g: &GraphState, which: TestKind) -> BitVec {
    assert_eq!(record.outcome.len(), g.n(), "record length mismatch");
    let (n_b, n_w) = (g.n_black(), g.n_white());
    let on_b = record.outcome.slice(0, n_b);
    let on_w = record.outcome.slice(n_b, n_w);
    match which {
        TestKind::Black => on_b.xor(&g.a_t_mul(&on_w)),
        TestKind::White => on_w.xor(&g.a_mul(&on_b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair() -> GraphState {
        GraphState::from_edges(1, 1, vec![(0, 0)]).unwrap()
    }

    fn z_on(n: usize, q: usize) -> PauliError {
        PauliError::from_z(BitVec::from_indices(n, [q]))
    }

    fn x_on(n: usize, q: usize) -> PauliError {
        PauliError::new(BitVec::from_indices(n, [q]), BitVec::zeros(n))
    }

    /// Independent route: bit `b` of the T_B deviation is the symplectic
    /// product of the error with the generator `X_b Z_{N(b)}`; likewise for W.
    fn symplectic_deviation(error: &PauliError, g: &GraphState, which: TestKind) -> BitVec {
        let (n_b, n_w) = (g.n_black(), g.n_white());
        let (count, offset) = match which {
            TestKind::Black => (n_b, 0),
            TestKind::White => (n_w, n_b),
        };
        let mut out = BitVec::zeros(count);
        for local in 0..count {
            let q = offset + local;
            let mut gen_x = BitVec::zeros(g.n());
            let mut gen_z = BitVec::zeros(g.n());
            gen_x.set(q, true);
            for &(b, w) in g.edges() {
                match which {
                    TestKind::Black if b == local => gen_z.flip(n_b + w),
                    TestKind::White if w == local => gen_z.flip(b),
                    _ => {}
                }
            }
            let anticommute = error.xpart.dot(&gen_z) ^ error.zpart.dot(&gen_x);
            out.set(local, anticommute);
        }
        out
    }

    #[test]
    fn identity_error_has_zero_deviation() {
        let g = pair();
        assert!(deviation_b(&PauliError::identity(2), &g).is_zero());
        assert!(deviation_w(&PauliError::identity(2), &g).is_zero());
    }

    #[test]
    fn two_qubit_hand_oracle() {
        let g = pair();
        assert_eq!(deviation_b(&z_on(2, 0), &g), BitVec::ones(1));
        assert_eq!(deviation_b(&x_on(2, 1), &g), BitVec::ones(1));
        assert_eq!(deviation_w(&z_on(2, 1), &g), BitVec::ones(1));
        assert_eq!(deviation_w(&z_on(2, 0), &g), BitVec::zeros(1));
    }

    #[test]
    #[should_panic(expected = "does not match graph size")]
    fn length_mismatch_is_a_contract_violation() {
        deviation_b(&PauliError::identity(3), &pair());
    }

    #[test]
    fn noiseless_records_satisfy_stabilizer_relation() {
        let g = pair();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = [false; 2];
        for _ in 0..64 {
            let rec = sample_test_outcomes(&PauliError::identity(2), &g, TestKind::Black, &mut rng);
            assert_eq!(rec.test_kind(&g), Some(TestKind::Black));
            // A = [1] forces X_B = Z_W.
            assert_eq!(rec.outcome.get(0), rec.outcome.get(1));
            seen[usize::from(rec.outcome.get(0))] = true;
        }
        assert_eq!(seen, [true, true], "outcomes should be uniformly random");

        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let ra = sample_test_outcomes(&PauliError::identity(2), &g, TestKind::Black, &mut a);
        let rb = sample_test_outcomes(&PauliError::identity(2), &g, TestKind::Black, &mut b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn z_on_black_violates_exactly_that_bit() {
        let g = GraphState::from_edges(3, 2, vec![(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        let err = z_on(5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..32 {
            let rec = sample_test_outcomes(&err, &g, TestKind::Black, &mut rng);
            let stat = test_statistic(&rec, &g, TestKind::Black);
            assert_eq!(stat.iter_ones().collect::<Vec<_>>(), vec![1]);
        }
    }

    #[test]
    fn record_serializes_compactly() {
        let g = pair();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = sample_test_outcomes(&PauliError::identity(2), &g, TestKind::White, &mut rng);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"basis\":\"ZX\""));
        let back: MeasurementRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    fn arb_graph_and_errors() -> impl Strategy<Value = (GraphState, PauliError, PauliError)> {
        (1usize..12, 1usize..12).prop_flat_map(|(nb, nw)| {
            let n = nb + nw;
            (
                proptest::collection::vec(any::<bool>(), nb * nw),
                proptest::collection::vec(any::<bool>(), 4 * n),
            )
                .prop_map(move |(adj, bits)| {
                    let edges = (0..nb)
                        .flat_map(|b| (0..nw).map(move |w| (b, w)))
                        .zip(adj)
                        .filter_map(|(e, keep)| keep.then_some(e))
                        .collect();
                    let g = GraphState::from_edges(nb, nw, edges).unwrap();
                    let part = |k: usize| BitVec::from_bools(&bits[k * n..(k + 1) * n]);
                    (g, PauliError::new(part(0), part(1)), PauliError::new(part(2), part(3)))
                })
        })
    }

    proptest! {
        #[test]
        fn deviation_is_linear((g, e1, e2) in arb_graph_and_errors()) {
            let both = e1.compose(&e2);
            for which in [TestKind::Black, TestKind::White] {
                prop_assert_eq!(
                    deviation(&both, &g, which),
                    deviation(&e1, &g, which).xor(&deviation(&e2, &g, which))
                );
            }
        }

        #[test]
        fn deviation_matches_symplectic_oracle((g, e1, _e2) in arb_graph_and_errors()) {
            for which in [TestKind::Black, TestKind::White] {
                prop_assert_eq!(deviation(&e1, &g, which), symplectic_deviation(&e1, &g, which));
            }
        }

        #[test]
        fn irrelevant_components_do_not_enter((g, e1, _e2) in arb_graph_and_errors()) {
            let n_b = g.n_black();
            // Z on W and X on B leave deviation_B untouched.
            let z_w = BitVec::from_indices(g.n(), e1.zpart.iter_ones().filter(|&q| q >= n_b));
            let x_b = BitVec::from_indices(g.n(), e1.xpart.iter_ones().filter(|&q| q < n_b));
            prop_assert!(deviation_b(&PauliError::new(x_b.clone(), z_w.clone()), &g).is_zero());
            let z_b = BitVec::from_indices(g.n(), e1.zpart.iter_ones().filter(|&q| q < n_b));
            let x_w = BitVec::from_indices(g.n(), e1.xpart.iter_ones().filter(|&q| q >= n_b));
            prop_assert!(deviation_w(&PauliError::new(x_w, z_b), &g).is_zero());
        }

        #[test]
        fn sampled_records_reproduce_deviation((g, e1, _e2) in arb_graph_and_errors(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for which in [TestKind::Black, TestKind::White] {
                let rec = sample_test_outcomes(&e1, &g, which, &mut rng);
                prop_assert_eq!(rec.test_kind(&g), Some(which));
                prop_assert_eq!(test_statistic(&rec, &g, which), deviation(&e1, &g, which));
            }
        }
    }
}
