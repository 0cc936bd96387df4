//! Label-map partitions, contingency tables and pair-counting identities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unordered pairs among `n` items.
#[inline]
pub fn choose2(n: u64) -> u64 {
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

/// A hard segmentation of a `width × height` grid: one dense label per pixel,
/// row-major.
///
/// Labels live in `0..num_labels`. A label may be unused (empty segment); the
/// alphabet size is what the H-matrix and contingency tables index by.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<u32>,
    width: usize,
    height: usize,
    num_labels: usize,
}

impl Partition {
    /// Builds a partition over a grid. `num_labels` defaults to one more than
    /// the largest label present.
    pub fn new(
        labels: Vec<u32>,
        width: usize,
        height: usize,
        num_labels: Option<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        if width.checked_mul(height) != Some(n) {
            return Err(Error::InvalidPartition(format!(
                "{} labels do not fill a {}x{} grid",
                n, width, height
            )));
        }
        if n < 2 {
            return Err(Error::InvalidPartition(format!(
                "need at least 2 pixels, got {}",
                n
            )));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidPartition(format!("{} pixels is too many", n)));
        }
        let used = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let num_labels = match num_labels {
            Some(c) if c < used => {
                return Err(Error::InvalidPartition(format!(
                    "label {} outside alphabet of size {}",
                    used - 1,
                    c
                )))
            }
            Some(c) => c,
            None => used,
        };
        Ok(Self {
            labels,
            width,
            height,
            num_labels,
        })
    }

    /// A partition over a single row of `labels.len()` pixels.
    pub fn from_labels(labels: Vec<u32>) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, n, 1, None)
    }

    /// Remaps arbitrary non-negative label values onto `0..C` (ascending order
    /// of the original values). Returns the partition and the original value
    /// of each dense label.
    pub fn densify(raw: &[u64], width: usize, height: usize) -> Result<(Self, Vec<u64>)> {
        let mut values = raw.to_vec();
        values.sort_unstable();
        values.dedup();
        let labels = raw
            .iter()
            .map(|v| values.binary_search(v).expect("value present") as u32)
            .collect();
        let p = Self::new(labels, width, height, Some(values.len()))?;
        Ok((p, values))
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Same labels, larger alphabet. Fails if `c` is smaller than the current
    /// alphabet would need.
    pub fn with_num_labels(&self, c: usize) -> Result<Self> {
        Self::new(self.labels.clone(), self.width, self.height, Some(c))
    }

    /// Pixel count per label, indexed by label.
    pub fn cluster_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.num_labels];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Number of labels that are actually used by at least one pixel.
    pub fn occupied_labels(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&s| s > 0).count()
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub(crate) fn check_comparable(&self, other: &Partition) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Incomparable {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

/// Joint label counts between two partitions of the same pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<u64>,
    rows: usize,
    cols: usize,
    row_sizes: Vec<u64>,
    col_sizes: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Pixels labelled `a` in the first partition and `b` in the second.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.cols + b]
    }

    /// Row-major `rows × cols` counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_sizes(&self) -> &[u64] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[u64] {
        &self.col_sizes
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// The table as nested rows, mostly for display and tests.
    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.cols).map(<[u64]>::to_vec).collect()
    }
}

/// One pass over the pixels; `O(N)` time and `O(K_p · K_q)` space.
pub fn build_contingency(p: &Partition, q: &Partition) -> Result<ContingencyTable> {
    p.check_comparable(q)?;
    let rows = p.num_labels();
    let cols = q.num_labels();
    let mut counts = vec![0u64; rows * cols];
    let mut row_sizes = vec![0u64; rows];
    let mut col_sizes = vec![0u64; cols];
    for (&a, &b) in p.labels().iter().zip(q.labels()) {
        let (a, b) = (a as usize, b as usize);
        counts[a * cols + b] += 1;
        row_sizes[a] += 1;
        col_sizes[b] += 1;
    }
    Ok(ContingencyTable {
        counts,
        rows,
        cols,
        row_sizes,
        col_sizes,
        n: p.len() as u64,
    })
}

/// Counts of the `N(N−1)/2` unordered pixel pairs by co-membership.
///
/// `n11`: together in both; `n10`: together only in the first; `n01`: together
/// only in the second; `n00`: apart in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub n11: u64,
    pub n00: u64,
    pub n10: u64,
    pub n01: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n00 + self.n10 + self.n01
    }

    /// Pairs on which the two partitions disagree (the symmetric distance).
    pub fn disagreements(&self) -> u64 {
        self.n10 + self.n01
    }

    pub fn swapped(&self) -> Self {
        Self {
            n11: self.n11,
            n00: self.n00,
            n10: self.n01,
            n01: self.n10,
        }
    }
}

/// Pair counts from the contingency table via the choose-2 identities.
pub fn pair_counts(t: &ContingencyTable) -> PairCounts {
    let n11: u64 = t.counts.iter().map(|&m| choose2(m)).sum();
    let theta_rows: u64 = t.row_sizes.iter().map(|&m| choose2(m)).sum();
    let theta_cols: u64 = t.col_sizes.iter().map(|&m| choose2(m)).sum();
    let n10 = theta_rows - n11;
    let n01 = theta_cols - n11;
    PairCounts {
        n11,
        n10,
        n01,
        n00: choose2(t.n) - n11 - n10 - n01,
    }
}

/// Convenience: `pair_counts(build_contingency(p, q))`.
pub fn pair_counts_of(p: &Partition, q: &Partition) -> Result<PairCounts> {
    Ok(pair_counts(&build_contingency(p, q)?))
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::{PairCounts, Partition};

    /// Direct enumeration of all pixel pairs. Test use only.
    pub fn enumerate_pairs(p: &Partition, q: &Partition) -> PairCounts {
        let (a, b) = (p.labels(), q.labels());
        let mut pc = PairCounts::default();
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => pc.n11 += 1,
                    (true, false) => pc.n10 += 1,
                    (false, true) => pc.n01 += 1,
                    (false, false) => pc.n00 += 1,
                }
            }
        }
        pc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn part(v: &[u32]) -> Partition {
        Partition::from_labels(v.to_vec()).unwrap()
    }

    #[test]
    fn contingency_identical() {
        let t = build_contingency(&part(&[0, 0, 1, 1]), &part(&[0, 0, 1, 1])).unwrap();
        assert_eq!(t.to_rows(), vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(t.row_sizes(), &[2, 2]);
    }

    #[test]
    fn contingency_crossed() {
        let t = build_contingency(&part(&[0, 0, 1, 1]), &part(&[0, 1, 0, 1])).unwrap();
        assert_eq!(t.to_rows(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn contingency_single_cluster() {
        let t = build_contingency(&part(&[0, 0, 0]), &part(&[0, 0, 0])).unwrap();
        assert_eq!(t.to_rows(), vec![vec![3]]);
        assert_eq!(t.n(), 3);
    }

    #[test]
    fn contingency_rejects_mismatch() {
        let err = build_contingency(&part(&[0, 1]), &part(&[0, 1, 1])).unwrap_err();
        assert_eq!(err, Error::Incomparable { left: 2, right: 3 });
    }

    #[test]
    fn pair_counts_crossed() {
        let pc = pair_counts_of(&part(&[0, 0, 1, 1]), &part(&[0, 1, 0, 1])).unwrap();
        assert_eq!(
            pc,
            PairCounts {
                n11: 0,
                n10: 2,
                n01: 2,
                n00: 2
            }
        );
    }

    #[test]
    fn pair_counts_identical() {
        let p = part(&[0, 2, 1, 1, 2, 0, 0]);
        let pc = pair_counts_of(&p, &p).unwrap();
        assert_eq!((pc.n10, pc.n01), (0, 0));
    }

    #[test]
    fn pair_counts_lump_vs_singletons() {
        let pc = pair_counts_of(&part(&[0, 0, 0, 0]), &part(&[0, 1, 2, 3])).unwrap();
        assert_eq!(
            pc,
            PairCounts {
                n11: 0,
                n10: 6,
                n01: 0,
                n00: 0
            }
        );
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0, 1, 2], 2, 2, None).is_err());
        assert!(Partition::new(vec![0], 1, 1, None).is_err());
        assert!(Partition::new(vec![0, 3], 2, 1, Some(3)).is_err());
        let p = Partition::new(vec![0, 1], 2, 1, Some(5)).unwrap();
        assert_eq!(p.num_labels(), 5);
        assert_eq!(p.occupied_labels(), 2);
    }

    #[test]
    fn densify_maps_in_value_order() {
        let (p, map) = Partition::densify(&[255, 0, 0, 255], 2, 2).unwrap();
        assert_eq!(p.labels(), &[1, 0, 0, 1]);
        assert_eq!(map, vec![0, 255]);
    }

    #[test]
    fn wide_counts_do_not_overflow() {
        let n: u64 = 1 << 20;
        assert_eq!(choose2(n), n * (n - 1) / 2);
        let lump = Partition::new(vec![0; n as usize], n as usize, 1, None).unwrap();
        let split = Partition::new(
            (0..n).map(|i| (i % 2) as u32).collect(),
            n as usize,
            1,
            None,
        )
        .unwrap();
        let pc = pair_counts_of(&lump, &split).unwrap();
        assert_eq!(pc.total(), choose2(n));
        assert_eq!(pc.n11, 2 * choose2(n / 2));
    }

    fn partition_pair(max_n: usize, max_c: u32) -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        (2..=max_n).prop_flat_map(move |n| {
            (
                prop::collection::vec(0..max_c, n),
                prop::collection::vec(0..max_c, n),
            )
        })
    }

    proptest! {
        #[test]
        fn identities_match_enumeration((a, b) in partition_pair(50, 6)) {
            let (p, q) = (part(&a), part(&b));
            let pc = pair_counts_of(&p, &q).unwrap();
            prop_assert_eq!(pc, oracle::enumerate_pairs(&p, &q));
            prop_assert_eq!(pc.total(), choose2(a.len() as u64));
        }

        #[test]
        fn relabeling_is_invisible((a, b) in partition_pair(30, 5), shift in 1u32..5) {
            // a bijection on 0..5: cyclic shift
            let relabeled: Vec<u32> = a.iter().map(|&l| (l + shift) % 5).collect();
            let q = part(&b);
            let before = pair_counts_of(&part(&a), &q).unwrap();
            let after = pair_counts_of(&Partition::new(relabeled.clone(), relabeled.len(), 1, Some(5)).unwrap(), &q).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn swapping_arguments_swaps_disagreements((a, b) in partition_pair(30, 5)) {
            let (p, q) = (part(&a), part(&b));
            let pq = pair_counts_of(&p, &q).unwrap();
            let qp = pair_counts_of(&q, &p).unwrap();
            prop_assert_eq!(pq.swapped(), qp);
        }
    }
}
