use rayon::prelude::*;

use crate::scalar::Scalar;

/// Dense `N × C` accumulator; entry `(i, j)` estimates the objective after
/// relabeling pixel `i` to label `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HMatrix<T> {
    values: Vec<T>,
    n: usize,
    c: usize,
}

/// A single-pixel relabeling and the accumulator value that selected it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move<T> {
    pub pixel: usize,
    pub label: usize,
    pub value: T,
}

impl<T: Scalar> Move<T> {
    /// Strict "better than" under the argmin order: smaller value, then
    /// smaller pixel, then smaller label.
    #[inline]
    pub(crate) fn beats(&self, other: &Self) -> bool {
        self.value < other.value
            || (self.value == other.value && (self.pixel, self.label) < (other.pixel, other.label))
    }

    #[inline]
    pub(crate) fn better(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if y.beats(&x) { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

impl<T: Scalar> HMatrix<T> {
    pub fn zeros(n: usize, c: usize) -> Self {
        Self {
            values: vec![T::zero(); n * c],
            n,
            c,
        }
    }

    /// Wraps row-major values. Panics if the length is not `n · c`.
    pub fn from_vec(values: Vec<T>, n: usize, c: usize) -> Self {
        assert_eq!(values.len(), n * c, "HMatrix shape mismatch");
        Self { values, n, c }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.c + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.c..(i + 1) * self.c]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self ← self + other`, entrywise.
    pub fn add_assign(&mut self, other: &HMatrix<T>) {
        assert_eq!((self.n, self.c), (other.n, other.c));
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * alpha).collect(),
            n: self.n,
            c: self.c,
        }
    }
}

/// Rows per rayon task in the H-matrix passes.
pub(crate) const ROW_CHUNK: usize = 4096;

/// Argmin over all entries; ties go to the smallest pixel, then the smallest
/// label.
pub fn select_move<T: Scalar>(h: &HMatrix<T>) -> Move<T> {
    let c = h.c;
    h.values
        .par_chunks(ROW_CHUNK * c)
        .enumerate()
        .map(|(chunk, rows)| {
            let mut best: Option<Move<T>> = None;
            for (r, row) in rows.chunks(c).enumerate() {
                let pixel = chunk * ROW_CHUNK + r;
                for (label, &value) in row.iter().enumerate() {
                    let m = Move {
                        pixel,
                        label,
                        value,
                    };
                    if best.is_none_or(|b| m.beats(&b)) {
                        best = Some(m);
                    }
                }
            }
            best
        })
        .reduce(|| None, Move::better)
        .expect("HMatrix is non-empty")
}
