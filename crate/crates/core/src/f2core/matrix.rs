use super::BitVec;

/// Dense binary matrix stored as packed rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVec>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix {
            rows,
            cols,
            data: vec![BitVec::zeros(cols); rows],
        }
    }

    pub fn from_rows(cols: usize, rows: Vec<BitVec>) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "row length mismatch");
        BinaryMatrix {
            rows: rows.len(),
            cols,
            data: rows,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &BitVec {
        &self.data[r]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.data[r].set(c, value);
    }

    /// `M·v` over F₂.
    pub fn mul_vec(&self, v: &BitVec) -> BitVec {
        assert_eq!(v.len(), self.cols, "matrix-vector shape mismatch");
        let mut out = BitVec::zeros(self.rows);
        for (r, row) in self.data.iter().enumerate() {
            if row.dot(v) {
                out.set(r, true);
            }
        }
        out
    }

    /// `Mᵀ·v` over F₂, computed as the XOR of the rows selected by `v`.
    pub fn transpose_mul_vec(&self, v: &BitVec) -> BitVec {
        assert_eq!(v.len(), self.rows, "matrix-vector shape mismatch");
        let mut out = BitVec::zeros(self.cols);
        for r in v.iter_ones() {
            out.xor_assign(&self.data[r]);
        }
        out
    }

    pub fn transpose(&self) -> BinaryMatrix {
        let mut t = BinaryMatrix::zeros(self.cols, self.rows);
        for (r, row) in self.data.iter().enumerate() {
            for c in row.iter_ones() {
                t.set(c, r, true);
            }
        }
        t
    }

    /// Number of set entries.
    pub fn weight(&self) -> usize {
        self.data.iter().map(BitVec::weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_matrix() -> impl Strategy<Value = BinaryMatrix> {
        (1usize..40, 1usize..90).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), c), r).prop_map(
                move |rows| BinaryMatrix::from_rows(c, rows.iter().map(|b| BitVec::from_bools(b)).collect()),
            )
        })
    }

    proptest! {
        #[test]
        fn transpose_is_involution(m in arb_matrix()) {
            prop_assert_eq!(m.transpose().transpose(), m);
        }

        #[test]
        fn products_are_linear(m in arb_matrix(), seed in any::<u64>()) {
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); s >> 33 };
            let u = BitVec::from_indices(m.cols(), (0..m.cols()).filter(|_| next() & 1 == 1));
            let v = BitVec::from_indices(m.cols(), (0..m.cols()).filter(|_| next() & 1 == 1));
            prop_assert_eq!(m.mul_vec(&u.xor(&v)), m.mul_vec(&u).xor(&m.mul_vec(&v)));
            let w = BitVec::from_indices(m.rows(), (0..m.rows()).filter(|_| next() & 1 == 1));
            prop_assert_eq!(m.transpose_mul_vec(&w), m.transpose().mul_vec(&w));
        }
    }
}
