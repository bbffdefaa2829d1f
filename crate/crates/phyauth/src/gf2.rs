//! Dense GF(2) matrices packed into 64-bit words.
//!
//! Used for parity-check bookkeeping: rank verification, Gauss-Jordan
//! reduction with a caller-chosen column preference order (the heart of
//! ordered-statistics reprocessing), and reference encodes in tests.

use crate::bits::BitVector;

#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64).max(1);
        Gf2Matrix {
            rows,
            cols,
            words_per_row,
            data: vec![0u64; rows * words_per_row],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Gf2Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.words_per_row + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.words_per_row + c / 64];
        let mask = 1u64 << (c % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// XORs row `src` into row `dst`.
    pub fn row_xor(&mut self, dst: usize, src: usize) {
        debug_assert!(dst != src);
        let wpr = self.words_per_row;
        let (d, s) = (dst * wpr, src * wpr);
        for k in 0..wpr {
            let v = self.data[s + k];
            self.data[d + k] ^= v;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let wpr = self.words_per_row;
        for k in 0..wpr {
            self.data.swap(a * wpr + k, b * wpr + k);
        }
    }

    pub fn row(&self, r: usize) -> BitVector {
        let mut v = BitVector::zeros(self.cols);
        for c in 0..self.cols {
            if self.get(r, c) {
                v.set(c, true);
            }
        }
        v
    }

    pub fn set_row(&mut self, r: usize, v: &BitVector) {
        assert_eq!(v.len(), self.cols);
        for c in 0..self.cols {
            self.set(r, c, v.get(c));
        }
    }

    /// `M * x^T`, producing one bit per row.
    pub fn mul_right_vec(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.len(), self.cols, "dimension mismatch");
        let mut packed = vec![0u64; self.words_per_row];
        for (i, b) in x.iter().enumerate() {
            if b {
                packed[i / 64] |= 1u64 << (i % 64);
            }
        }
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            let base = r * self.words_per_row;
            let mut acc = 0u64;
            for k in 0..self.words_per_row {
                acc ^= self.data[base + k] & packed[k];
            }
            if acc.count_ones() % 2 == 1 {
                out.set(r, true);
            }
        }
        out
    }

    /// `x * M`, producing one bit per column.
    pub fn mul_left_vec(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.len(), self.rows, "dimension mismatch");
        let mut acc = vec![0u64; self.words_per_row];
        for r in 0..self.rows {
            if x.get(r) {
                let base = r * self.words_per_row;
                for k in 0..self.words_per_row {
                    acc[k] ^= self.data[base + k];
                }
            }
        }
        let mut out = BitVector::zeros(self.cols);
        for c in 0..self.cols {
            if (acc[c / 64] >> (c % 64)) & 1 == 1 {
                out.set(c, true);
            }
        }
        out
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Gf2Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let base = r * self.words_per_row;
            let obase = r * out.words_per_row;
            for c in 0..self.cols {
                if (self.data[base + c / 64] >> (c % 64)) & 1 == 1 {
                    let sbase = c * other.words_per_row;
                    for k in 0..other.words_per_row {
                        out.data[obase + k] ^= other.data[sbase + k];
                    }
                }
            }
        }
        out
    }

    pub fn kronecker(&self, other: &Gf2Matrix) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                if self.get(r1, c1) {
                    for r2 in 0..other.rows {
                        for c2 in 0..other.cols {
                            if other.get(r2, c2) {
                                out.set(r1 * other.rows + r2, c1 * other.cols + c2, true);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Gauss-Jordan reduction visiting columns in `column_order`. Pivot `i`
    /// lands on row `i`; returns the pivot columns in selection order. When
    /// `rhs` is given it receives the same row operations, so
    /// `row i of self . x = rhs[i]` stays equivalent to the original system.
    pub fn reduce_with_order(
        &mut self,
        column_order: &[usize],
        mut rhs: Option<&mut BitVector>,
    ) -> Vec<usize> {
        let mut pivots = Vec::new();
        for &col in column_order {
            let next_row = pivots.len();
            if next_row == self.rows {
                break;
            }
            let Some(pivot_row) = (next_row..self.rows).find(|&r| self.get(r, col)) else {
                continue;
            };
            self.swap_rows(next_row, pivot_row);
            if let Some(rhs) = rhs.as_deref_mut() {
                let (a, b) = (rhs.get(next_row), rhs.get(pivot_row));
                rhs.set(next_row, b);
                rhs.set(pivot_row, a);
            }
            for r in 0..self.rows {
                if r != next_row && self.get(r, col) {
                    self.row_xor(r, next_row);
                    if let Some(rhs) = rhs.as_deref_mut() {
                        let v = rhs.get(r) ^ rhs.get(next_row);
                        rhs.set(r, v);
                    }
                }
            }
            pivots.push(col);
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let order: Vec<usize> = (0..self.cols).collect();
        self.clone().reduce_with_order(&order, None).len()
    }
}

impl std::fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(16) {
            for c in 0..self.cols.min(64) {
                write!(f, "{}", self.get(r, c) as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
