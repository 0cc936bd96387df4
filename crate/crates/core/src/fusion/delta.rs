//! Incremental single-pixel move distances.
//!
//! Relabeling pixel `i` from `a` to `b` only touches two cells of the
//! contingency table between an ensemble member `s_k` and the working
//! partition `s`, and two cluster sizes of `s`. With `c = s_k[i]`:
//!
//! ```text
//! θ_s' = θ_s + n_b − (n_a − 1)
//! n11' = n11 + m[c][b] − (m[c][a] − 1)
//! ```
//!
//! so every entry of the `N × C` move matrix is an `O(1)` function of
//! `(c, a, b)`. The kernel tabulates those values once per iteration and the
//! matrix pass becomes a lookup.

use rayon::prelude::*;

use crate::error::Result;
use crate::fusion::hmatrix::{HMatrix, Move, ROW_CHUNK};
use crate::metrics::DistanceModel;
use crate::partition::{choose2, Partition};
use crate::scalar::Scalar;

/// Contingency state of one ensemble member against the working partition.
#[derive(Debug, Clone)]
pub(crate) struct MemberTable {
    /// Alphabet size of the member.
    pub rows: usize,
    /// `rows × c` joint counts `m[member label][working label]`.
    pub counts: Vec<u64>,
    pub theta_member: u64,
    pub n11: u64,
}

impl MemberTable {
    pub fn new(member: &[u32], member_labels: usize, working: &Working) -> Self {
        let c = working.c;
        let mut counts = vec![0u64; member_labels * c];
        let mut sizes = vec![0u64; member_labels];
        for (&k, &s) in member.iter().zip(&working.labels) {
            counts[k as usize * c + s as usize] += 1;
            sizes[k as usize] += 1;
        }
        Self {
            rows: member_labels,
            n11: counts.iter().map(|&m| choose2(m)).sum(),
            theta_member: sizes.iter().map(|&m| choose2(m)).sum(),
            counts,
        }
    }

    #[inline]
    pub fn sdd(&self, working: &Working) -> u64 {
        self.theta_member + working.theta - 2 * self.n11
    }

    /// Applies pixel relabeling `a → b` where the pixel has member label `k`.
    /// Must run before `Working::relabel` updates the sizes.
    #[inline]
    pub fn relabel(&mut self, k: usize, a: usize, b: usize, c: usize) {
        let row = &mut self.counts[k * c..(k + 1) * c];
        self.n11 = self.n11 + row[b] - (row[a] - 1);
        row[a] -= 1;
        row[b] += 1;
    }
}

/// The mutable working partition with its cluster sizes.
#[derive(Debug, Clone)]
pub(crate) struct Working {
    pub labels: Vec<u32>,
    pub sizes: Vec<u64>,
    pub theta: u64,
    pub c: usize,
    pub pairs: u64,
}

impl Working {
    pub fn new(labels: Vec<u32>, c: usize) -> Self {
        let mut sizes = vec![0u64; c];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        Self {
            pairs: choose2(labels.len() as u64),
            theta: sizes.iter().map(|&m| choose2(m)).sum(),
            labels,
            sizes,
            c,
        }
    }

    #[inline]
    pub fn relabel(&mut self, pixel: usize, b: usize) {
        let a = self.labels[pixel] as usize;
        self.theta = self.theta + self.sizes[b] - (self.sizes[a] - 1);
        self.sizes[a] -= 1;
        self.sizes[b] += 1;
        self.labels[pixel] = b as u32;
    }
}

/// Move distances for one member, tabulated over `(member label, current
/// label, candidate label)` when that table is smaller than the matrix itself.
pub(crate) struct MoveKernel<T> {
    c: usize,
    /// `rows × c × c` when tabulated.
    table: Option<Vec<T>>,
    /// Clamped QD evaluations represented by this kernel's matrix.
    pub clamped: u64,
}

impl<T: Scalar> MoveKernel<T> {
    pub fn new(member: &MemberTable, working: &Working, model: &DistanceModel<T>) -> Self {
        let c = working.c;
        let n = working.labels.len();
        if member.rows * c * c > n * c {
            return Self {
                c,
                table: None,
                clamped: 0,
            };
        }
        let mut table = vec![T::zero(); member.rows * c * c];
        let mut clamped = 0u64;
        for k in 0..member.rows {
            for a in 0..c {
                let occupancy = member.counts[k * c + a];
                if occupancy == 0 {
                    continue;
                }
                let cell = &mut table[(k * c + a) * c..(k * c + a + 1) * c];
                for (b, slot) in cell.iter_mut().enumerate() {
                    let e = entry(member, working, model, k, a, b);
                    if e.clamped {
                        clamped += occupancy;
                    }
                    *slot = e.value;
                }
            }
        }
        Self {
            c,
            table: Some(table),
            clamped,
        }
    }

    /// Fills `out` (length `c`) with the move distances of a pixel whose member
    /// label is `k` and current label is `a`. Returns the clamp count.
    #[inline]
    fn row(
        &self,
        member: &MemberTable,
        working: &Working,
        model: &DistanceModel<T>,
        k: usize,
        a: usize,
        out: &mut [T],
    ) -> u64 {
        match &self.table {
            Some(t) => {
                out.copy_from_slice(&t[(k * self.c + a) * self.c..(k * self.c + a + 1) * self.c]);
                0
            }
            None => {
                let mut clamped = 0;
                for (b, slot) in out.iter_mut().enumerate() {
                    let e = entry(member, working, model, k, a, b);
                    clamped += e.clamped as u64;
                    *slot = e.value;
                }
                clamped
            }
        }
    }

    /// One filtered update `H ← β·H + D` fused with the argmin over the
    /// updated matrix. Row chunks run in parallel; the reduction is
    /// order-independent, so the result matches a sequential pass.
    pub fn filter_and_select(
        &mut self,
        h: &mut HMatrix<T>,
        beta: T,
        member_labels: &[u32],
        member: &MemberTable,
        working: &Working,
        model: &DistanceModel<T>,
    ) -> Move<T> {
        let c = self.c;
        let this = &*self;
        let (best, clamped) = h
            .values_mut()
            .par_chunks_mut(ROW_CHUNK * c)
            .enumerate()
            .map(|(chunk, rows)| {
                let mut best: Option<Move<T>> = None;
                let mut clamped = 0u64;
                let mut d = vec![T::zero(); c];
                for (r, hrow) in rows.chunks_mut(c).enumerate() {
                    let pixel = chunk * ROW_CHUNK + r;
                    let k = member_labels[pixel] as usize;
                    let a = working.labels[pixel] as usize;
                    clamped += this.row(member, working, model, k, a, &mut d);
                    for (label, (hv, &dv)) in hrow.iter_mut().zip(&d).enumerate() {
                        *hv = beta * *hv + dv;
                        let m = Move {
                            pixel,
                            label,
                            value: *hv,
                        };
                        if best.is_none_or(|b| m.beats(&b)) {
                            best = Some(m);
                        }
                    }
                }
                (best, clamped)
            })
            .reduce(
                || (None, 0),
                |(a, ca), (b, cb)| (Move::better(a, b), ca + cb),
            );
        self.clamped += clamped;
        best.expect("HMatrix is non-empty")
    }

    /// Writes the plain move-distance matrix into `out` (accumulating).
    pub fn accumulate_into(
        &mut self,
        out: &mut HMatrix<T>,
        member_labels: &[u32],
        member: &MemberTable,
        working: &Working,
        model: &DistanceModel<T>,
    ) {
        let c = self.c;
        let this = &*self;
        let clamped: u64 = out
            .values_mut()
            .par_chunks_mut(ROW_CHUNK * c)
            .enumerate()
            .map(|(chunk, rows)| {
                let mut d = vec![T::zero(); c];
                let mut clamped = 0;
                for (r, orow) in rows.chunks_mut(c).enumerate() {
                    let pixel = chunk * ROW_CHUNK + r;
                    let k = member_labels[pixel] as usize;
                    let a = working.labels[pixel] as usize;
                    clamped += this.row(member, working, model, k, a, &mut d);
                    for (o, &dv) in orow.iter_mut().zip(&d) {
                        *o += dv;
                    }
                }
                clamped
            })
            .sum();
        self.clamped += clamped;
    }
}

/// Distance between the member and the working partition after moving one
/// pixel with member label `k` from `a` to `b`.
#[inline]
fn entry<T: Scalar>(
    member: &MemberTable,
    working: &Working,
    model: &DistanceModel<T>,
    k: usize,
    a: usize,
    b: usize,
) -> crate::metrics::Evaluated<T> {
    let c = working.c;
    let (theta, n11) = if a == b {
        (working.theta, member.n11)
    } else {
        let row = &member.counts[k * c..(k + 1) * c];
        (
            working.theta + working.sizes[b] - (working.sizes[a] - 1),
            member.n11 + row[b] - (row[a] - 1),
        )
    };
    model.evaluate_parts(member.theta_member, theta, n11, working.pairs)
}

/// `N × C` matrix whose `(i, j)` entry is `d(s_k, s')`, `s'` being `s` with
/// pixel `i` relabeled to `j`. Costs `O(N·C)` after an `O(N)` table build.
/// The alphabet `C` is `s.num_labels()`.
pub fn delta_matrix<T: Scalar>(
    s_k: &Partition,
    s: &Partition,
    model: &DistanceModel<T>,
) -> Result<HMatrix<T>> {
    s_k.check_comparable(s)?;
    model.validate()?;
    let working = Working::new(s.labels().to_vec(), s.num_labels());
    let member = MemberTable::new(s_k.labels(), s_k.num_labels(), &working);
    let mut kernel = MoveKernel::new(&member, &working, model);
    let mut out = HMatrix::zeros(s.len(), s.num_labels());
    kernel.accumulate_into(&mut out, s_k.labels(), &member, &working, model);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BaseDistance;
    use proptest::prelude::*;

    /// Relabels one pixel and recomputes the distance from scratch.
    fn recomputed<T: Scalar>(
        s_k: &Partition,
        s: &Partition,
        model: &DistanceModel<T>,
        i: usize,
        j: usize,
    ) -> T {
        let mut labels = s.labels().to_vec();
        labels[i] = j as u32;
        let moved = Partition::new(labels, s.width(), s.height(), Some(s.num_labels())).unwrap();
        model.distance(s_k, &moved).unwrap()
    }

    fn models() -> Vec<DistanceModel<f64>> {
        vec![
            DistanceModel::sdd(),
            DistanceModel::dl(),
            DistanceModel::qd(2.0, 30.0, BaseDistance::Sdd).unwrap(),
            DistanceModel::qd(0.1, 1.4, BaseDistance::Dl).unwrap(),
        ]
    }

    #[test]
    fn null_moves_carry_current_distance() {
        let s_k = Partition::from_labels(vec![0, 1, 1, 2, 2, 0, 1]).unwrap();
        let s = Partition::from_labels(vec![1, 1, 0, 0, 2, 2, 0]).unwrap();
        for m in models() {
            let d = delta_matrix(&s_k, &s, &m).unwrap();
            let current = m.distance(&s_k, &s).unwrap();
            for i in 0..s.len() {
                assert_eq!(d.get(i, s.labels()[i] as usize), current);
            }
        }
    }

    #[test]
    fn identical_partitions_have_minima_on_current_labels() {
        let p = Partition::from_labels(vec![0, 0, 1, 1, 2, 2]).unwrap();
        let d = delta_matrix(&p, &p, &DistanceModel::<f64>::sdd()).unwrap();
        for i in 0..p.len() {
            let row = d.row(i);
            let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
            assert_eq!(row[p.labels()[i] as usize], 0.0);
        }
    }

    #[test]
    fn six_pixels_three_labels_sdd_exact() {
        let s_k = Partition::new(vec![0, 2, 1, 1, 0, 2], 3, 2, Some(3)).unwrap();
        let s = Partition::new(vec![1, 1, 0, 2, 2, 0], 3, 2, Some(3)).unwrap();
        let m = DistanceModel::<f64>::sdd();
        let d = delta_matrix(&s_k, &s, &m).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), recomputed(&s_k, &s, &m, i, j));
            }
        }
    }

    #[test]
    fn untabulated_path_matches_recompute() {
        // member alphabet large enough that the kernel computes entries directly
        let s_k = Partition::from_labels((0..10).collect()).unwrap();
        let s = Partition::new(vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 3], 10, 1, Some(4)).unwrap();
        for m in models() {
            let d = delta_matrix(&s_k, &s, &m).unwrap();
            for i in 0..10 {
                for j in 0..4 {
                    let want = recomputed(&s_k, &s, &m, i, j);
                    assert!((d.get(i, j) - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let a = Partition::from_labels(vec![0, 1, 0]).unwrap();
        let b = Partition::from_labels(vec![0, 1]).unwrap();
        assert!(delta_matrix(&a, &b, &DistanceModel::<f64>::sdd()).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<u32>, Vec<u32>, usize)> {
        (2usize..=12, 1usize..=4, 1u32..=4).prop_flat_map(|(n, c, ck)| {
            (
                prop::collection::vec(0..ck, n),
                prop::collection::vec(0..c as u32, n),
                Just(c),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_full_recomputation((k, s, c) in instance()) {
            let s_k = Partition::from_labels(k).unwrap();
            let s = Partition::new(s.clone(), s.len(), 1, Some(c)).unwrap();
            for m in models() {
                let d = delta_matrix(&s_k, &s, &m).unwrap();
                for i in 0..s.len() {
                    for j in 0..c {
                        let want = recomputed(&s_k, &s, &m, i, j);
                        if m.kind == crate::metrics::DistanceKind::Sdd {
                            prop_assert_eq!(d.get(i, j), want);
                        } else {
                            prop_assert!((d.get(i, j) - want).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }
}
