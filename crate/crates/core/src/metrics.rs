//! Pairwise (dis)similarities between partitions and the distance model used
//! by the fusion loop.
//!
//! Everything is computed from exact integer pair counts; real-valued results
//! are formed in double precision with a single final division.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{choose2, pair_counts_of, PairCounts, Partition};
use crate::scalar::Scalar;

/// Symmetric distance: number of pixel pairs on which `p` and `q` disagree
/// about co-membership (`n01 + n10`).
pub fn sdd(p: &Partition, q: &Partition) -> Result<u64> {
    Ok(pair_counts_of(p, q)?.disagreements())
}

/// Normalized sum of symmetric distances from `s` to every ensemble member,
/// `2 Σ d(s_i, s) / (K N (N − 1))`, in `[0, 1]`.
pub fn average_sod(ensemble: &[Partition], s: &Partition) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut total: u128 = 0;
    for member in ensemble {
        total += sdd(member, s)? as u128;
    }
    Ok(normalize_sod(total, ensemble.len(), s.len()))
}

pub(crate) fn normalize_sod(total: u128, k: usize, n: usize) -> f64 {
    total as f64 / (k as f64 * choose2(n as u64) as f64)
}

/// Fraction of pixel pairs on which the partitions agree.
pub fn rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    Ok(rand_index_from_counts(&pair_counts_of(p, q)?))
}

/// `1 − d / C(N,2)`, equal to `(n11 + n00) / C(N,2)`.
pub fn rand_index_from_counts(pc: &PairCounts) -> f64 {
    1.0 - pc.disagreements() as f64 / pc.total() as f64
}

/// Chance-corrected Rand index under the generalized hypergeometric model.
///
/// Errors with [`Error::DegenerateMetric`] when the denominator vanishes, which
/// happens exactly when both partitions are all-singletons or both are a
/// single segment.
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    ari_from_counts(&pair_counts_of(p, q)?)
}

pub fn ari_from_counts(pc: &PairCounts) -> Result<f64> {
    ari_parts(pc.n11 + pc.n10, pc.n11 + pc.n01, pc.n11, pc.total())
}

/// ARI from `θ_p = Σ C(row,2)`, `θ_q = Σ C(col,2)`, `n11 = Σ C(cell,2)` and the
/// pair total.
#[inline]
pub(crate) fn ari_parts(theta_p: u64, theta_q: u64, n11: u64, pairs: u64) -> Result<f64> {
    // ½(θp+θq)·M = θp·θq  ⇔  θp = θq ∈ {0, M}
    if theta_p == theta_q && (theta_p == 0 || theta_p == pairs) {
        return Err(Error::DegenerateMetric);
    }
    let (tp, tq) = (theta_p as f64, theta_q as f64);
    let expected = tp * tq / pairs as f64;
    Ok((n11 as f64 - expected) / (0.5 * (tp + tq) - expected))
}

/// `1 − ARI`. Zero for identical partitions and may exceed 1.
pub fn dl_distance(p: &Partition, q: &Partition) -> Result<f64> {
    Ok(1.0 - adjusted_rand_index(p, q)?)
}

/// Distance between partitions that the fusion objective is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    /// Raw symmetric distance (pair disagreements).
    Sdd,
    /// Distance learning: `1 − ARI`.
    Dl,
    /// Quasi-distance: a base distance min/max-normalized with learned constants.
    Qd,
}

/// Base distance normalized by the quasi-distance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseDistance {
    #[default]
    Sdd,
    Dl,
}

impl BaseDistance {
    /// Raw value of the base distance for a pair-count summary. A degenerate
    /// ARI can only arise from two identical trivial partitions, so DL reports
    /// 0 there.
    #[inline]
    pub fn value(self, pc: &PairCounts) -> f64 {
        match self {
            BaseDistance::Sdd => pc.disagreements() as f64,
            BaseDistance::Dl => dl_total(pc.n11 + pc.n10, pc.n11 + pc.n01, pc.n11, pc.total()),
        }
    }
}

#[inline]
pub(crate) fn dl_total(theta_p: u64, theta_q: u64, n11: u64, pairs: u64) -> f64 {
    ari_parts(theta_p, theta_q, n11, pairs).map_or(0.0, |ari| 1.0 - ari)
}

/// Result of evaluating a distance model on one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated<T> {
    pub value: T,
    /// The QD basis distance fell outside the learned range and was clamped.
    pub clamped: bool,
}

/// Selects and parameterizes the pairwise distance. For `Sdd` and `Dl` the
/// normalization constants are unused and kept at `0` and `1`.
///
/// Serialized as `{"kind": .., "qd_min": .., "qd_max": .., "basis": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DistanceModel<T: Scalar> {
    pub kind: DistanceKind,
    pub qd_min: T,
    pub qd_max: T,
    #[serde(default)]
    pub basis: BaseDistance,
}

impl<T: Scalar> Default for DistanceModel<T> {
    fn default() -> Self {
        Self::sdd()
    }
}

impl<T: Scalar> DistanceModel<T> {
    pub fn sdd() -> Self {
        Self {
            kind: DistanceKind::Sdd,
            qd_min: T::zero(),
            qd_max: T::one(),
            basis: BaseDistance::Sdd,
        }
    }

    pub fn dl() -> Self {
        Self {
            kind: DistanceKind::Dl,
            qd_min: T::zero(),
            qd_max: T::one(),
            basis: BaseDistance::Dl,
        }
    }

    pub fn qd(qd_min: T, qd_max: T, basis: BaseDistance) -> Result<Self> {
        let m = Self {
            kind: DistanceKind::Qd,
            qd_min,
            qd_max,
            basis,
        };
        m.validate()?;
        Ok(m)
    }

    /// Quasi-distance model used when no training pairs are available: the
    /// full attainable range of the basis on `n` pixels (`[0, C(n,2)]` for SDD,
    /// `[0, 2]` for `1 − ARI`).
    pub fn qd_untrained(n: usize, basis: BaseDistance) -> Result<Self> {
        let max = match basis {
            BaseDistance::Sdd => choose2(n as u64) as f64,
            BaseDistance::Dl => 2.0,
        };
        Self::qd(T::zero(), T::of(max), basis)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.qd_min.is_finite() && self.qd_max.is_finite()) {
            return Err(Error::InvalidConfig(
                "distance normalization constants must be finite".into(),
            ));
        }
        if self.kind == DistanceKind::Qd && self.qd_max <= self.qd_min {
            return Err(Error::DegenerateRange {
                min: self.qd_min.to_f64_lossy(),
                max: self.qd_max.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Evaluates the model on pair counts. Total: a degenerate ARI (identical
    /// trivial partitions) counts as distance 0.
    #[inline]
    pub fn evaluate(&self, pc: &PairCounts) -> Evaluated<T> {
        self.evaluate_parts(pc.n11 + pc.n10, pc.n11 + pc.n01, pc.n11, pc.total())
    }

    /// Same as [`evaluate`](Self::evaluate) from `θ_p`, `θ_q`, `n11` and the
    /// pair total. This is the form the incremental delta computation uses.
    #[inline]
    pub(crate) fn evaluate_parts(
        &self,
        theta_p: u64,
        theta_q: u64,
        n11: u64,
        pairs: u64,
    ) -> Evaluated<T> {
        let sdd = || (theta_p + theta_q - 2 * n11) as f64;
        match self.kind {
            DistanceKind::Sdd => Evaluated {
                value: T::of(sdd()),
                clamped: false,
            },
            DistanceKind::Dl => Evaluated {
                value: T::of(dl_total(theta_p, theta_q, n11, pairs)),
                clamped: false,
            },
            DistanceKind::Qd => {
                let raw = match self.basis {
                    BaseDistance::Sdd => sdd(),
                    BaseDistance::Dl => dl_total(theta_p, theta_q, n11, pairs),
                };
                let (lo, hi) = (self.qd_min.to_f64_lossy(), self.qd_max.to_f64_lossy());
                let nd = (raw - lo) / (hi - lo);
                if nd < 0.0 {
                    Evaluated {
                        value: T::zero(),
                        clamped: true,
                    }
                } else if nd > 1.0 {
                    Evaluated {
                        value: T::one(),
                        clamped: true,
                    }
                } else {
                    Evaluated {
                        value: T::of(nd),
                        clamped: false,
                    }
                }
            }
        }
    }

    /// Distance between two partitions under this model.
    pub fn distance(&self, p: &Partition, q: &Partition) -> Result<T> {
        Ok(self.evaluate(&pair_counts_of(p, q)?).value)
    }
}

/// Learns quasi-distance normalization constants as the minimum and maximum
/// basis distance over training pairs.
pub fn fit_qd<T: Scalar>(
    training_pairs: &[(Partition, Partition)],
    basis: BaseDistance,
) -> Result<DistanceModel<T>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, q) in training_pairs {
        let v = basis.value(&pair_counts_of(p, q)?);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if training_pairs.is_empty() {
        return Err(Error::InvalidConfig("no training pairs for QD".into()));
    }
    if hi <= lo {
        return Err(Error::DegenerateRange { min: lo, max: hi });
    }
    DistanceModel::qd(T::of(lo), T::of(hi), basis)
}

/// Normalized quasi-distance `(d − d_min)/(d_max − d_min)`, clamped to `[0, 1]`.
pub fn qd_distance<T: Scalar>(
    model: &DistanceModel<T>,
    p: &Partition,
    q: &Partition,
) -> Result<Evaluated<T>> {
    if model.kind != DistanceKind::Qd {
        return Err(Error::InvalidConfig(format!(
            "qd_distance needs a QD model, got {:?}",
            model.kind
        )));
    }
    model.validate()?;
    Ok(model.evaluate(&pair_counts_of(p, q)?))
}
