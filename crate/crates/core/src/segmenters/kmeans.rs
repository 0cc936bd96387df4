//! Lloyd k-means over pixel feature vectors with seeded k-means++ seeding.

use std::cmp::Ordering;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::scalar::Scalar;
use crate::segmenters::image::MultibandImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansInit {
    #[default]
    KMeansPlusPlus,
    /// `k` distinct points drawn uniformly.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandMode {
    /// One 1-D clustering per band.
    #[default]
    PerBand,
    /// One clustering of the `B`-dimensional pixel vectors.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KMeansConfig<T: Scalar> {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative drop of the within-cluster sum of squares falls
    /// to this value or below.
    pub tol: T,
    pub seed: u64,
    pub init: KMeansInit,
    pub mode: BandMode,
    /// Z-score every band before clustering.
    pub standardize: bool,
}

impl<T: Scalar> Default for KMeansConfig<T> {
    fn default() -> Self {
        Self {
            k: 2,
            max_iters: 100,
            tol: T::of(1e-6),
            seed: 0,
            init: KMeansInit::KMeansPlusPlus,
            mode: BandMode::PerBand,
            standardize: false,
        }
    }
}

impl<T: Scalar> KMeansConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < T::zero() {
            return Err(Error::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// A single k-means run over `n × dim` points.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    /// Canonical labels: clusters ordered by ascending centroid norm.
    pub labels: Vec<u32>,
    /// `k_eff × dim`, in canonical order.
    pub centroids: Vec<T>,
    /// Within-cluster sum of squares after every assignment step.
    pub sse_history: Vec<T>,
    pub iterations: usize,
    /// Number of clusters actually formed (`≤ k`).
    pub effective_k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KMeansWarning {
    /// Band index in per-band mode; `None` in joint mode.
    pub band: Option<usize>,
    pub requested: usize,
    pub effective: usize,
}

impl std::fmt::Display for KMeansWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.band {
            Some(b) => write!(f, "band {}: ", b)?,
            None => write!(f, "joint features: ")?,
        }
        write!(
            f,
            "only {} distinct values for k = {}; formed {} clusters",
            self.effective, self.requested, self.effective
        )
    }
}

/// Partitions produced by [`kmeans_segment`], with any degenerate-input
/// warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub partitions: Vec<Partition>,
    pub warnings: Vec<KMeansWarning>,
}

#[inline]
fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn count_distinct<T: Scalar>(points: &[T], dim: usize) -> usize {
    let mut rows: Vec<&[T]> = points.chunks(dim).collect();
    let cmp = |a: &&[T], b: &&[T]| -> Ordering {
        for (x, y) in a.iter().zip(b.iter()) {
            match x.partial_cmp(y).expect("finite") {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    };
    rows.sort_unstable_by(cmp);
    rows.dedup_by(|a, b| cmp(a, b) == Ordering::Equal);
    rows.len()
}

fn seed_centroids<T: Scalar>(
    points: &[T],
    dim: usize,
    k: usize,
    init: KMeansInit,
    rng: &mut ChaCha8Rng,
) -> Vec<T> {
    let n = points.len() / dim;
    let mut centroids: Vec<T> = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut nearest: Vec<f64> = points
        .chunks(dim)
        .map(|p| sq_dist(p, &centroids[..dim]).to_f64_lossy())
        .collect();
    while centroids.len() < k * dim {
        let pick = match init {
            KMeansInit::KMeansPlusPlus => WeightedIndex::new(&nearest)
                .expect("distinct points remain")
                .sample(rng),
            KMeansInit::Random => {
                let candidates: Vec<usize> = (0..n).filter(|&i| nearest[i] > 0.0).collect();
                candidates[rng.gen_range(0..candidates.len())]
            }
        };
        let c = points[pick * dim..(pick + 1) * dim].to_vec();
        for (d, p) in nearest.iter_mut().zip(points.chunks(dim)) {
            *d = d.min(sq_dist(p, &c).to_f64_lossy());
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Assigns every point to its nearest centroid (ties to the lower index) and
/// returns the resulting sum of squares.
fn assign<T: Scalar>(points: &[T], dim: usize, centroids: &[T], labels: &mut [u32]) -> T {
    labels
        .par_chunks_mut(4096)
        .zip(points.par_chunks(4096 * dim))
        .map(|(ls, ps)| {
            let mut sse = T::zero();
            for (l, p) in ls.iter_mut().zip(ps.chunks(dim)) {
                let (best, d) = centroids
                    .chunks(dim)
                    .map(|c| sq_dist(p, c))
                    .enumerate()
                    .fold(
                        (0, T::infinity()),
                        |(bi, bd), (i, d)| {
                            if d < bd {
                                (i, d)
                            } else {
                                (bi, bd)
                            }
                        },
                    );
                *l = best as u32;
                sse += d;
            }
            sse
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum()
}

/// Recomputes centroids as cluster means. An empty cluster takes the point of
/// the largest cluster that lies farthest from that cluster's centroid.
fn update<T: Scalar>(points: &[T], dim: usize, k: usize, labels: &mut [u32]) -> Vec<T> {
    let mut sums = vec![T::zero(); k * dim];
    let mut counts = vec![0usize; k];
    for (&l, p) in labels.iter().zip(points.chunks(dim)) {
        let l = l as usize;
        counts[l] += 1;
        for (s, &v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mean = |sums: &[T], counts: &[usize], j: usize| -> Vec<T> {
        let c = T::of(counts[j] as f64);
        sums[j * dim..(j + 1) * dim]
            .iter()
            .map(|&s| s / c)
            .collect()
    };
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let largest = (0..k)
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .expect("k >= 1");
        let centre = mean(&sums, &counts, largest);
        let (far, _) = labels
            .iter()
            .zip(points.chunks(dim))
            .enumerate()
            .filter(|(_, (&l, _))| l as usize == largest)
            .map(|(i, (_, p))| (i, sq_dist(p, &centre)))
            .fold((usize::MAX, T::neg_infinity()), |(bi, bd), (i, d)| {
                if d > bd {
                    (i, d)
                } else {
                    (bi, bd)
                }
            });
        let p = &points[far * dim..(far + 1) * dim];
        for (j, &v) in p.iter().enumerate() {
            sums[largest * dim + j] -= v;
            sums[empty * dim + j] += v;
        }
        counts[largest] -= 1;
        counts[empty] += 1;
        labels[far] = empty as u32;
    }
    (0..k).flat_map(|j| mean(&sums, &counts, j)).collect()
}

/// Runs k-means on `points` (`n × dim`, row-major). `k` is capped at the
/// number of distinct points.
pub fn kmeans<T: Scalar>(points: &[T], dim: usize, cfg: &KMeansConfig<T>) -> Result<KMeansFit<T>> {
    cfg.validate()?;
    if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidImage("no points to cluster".into()));
    }
    let n = points.len() / dim;
    let k = cfg.k.min(count_distinct(points, dim));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = seed_centroids(points, dim, k, cfg.init, &mut rng);
    let mut labels = vec![0u32; n];
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    loop {
        let sse = assign(points, dim, &centroids, &mut labels);
        iterations += 1;
        let converged = sse_history
            .last()
            .is_some_and(|&prev: &T| prev - sse <= cfg.tol * prev);
        sse_history.push(sse);
        if converged || iterations >= cfg.max_iters {
            break;
        }
        centroids = update(points, dim, k, &mut labels);
    }

    // canonical order: ascending centroid norm, then lexicographic centroid
    let norm = |j: usize| -> T {
        centroids[j * dim..(j + 1) * dim]
            .iter()
            .map(|&v| v * v)
            .sum()
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        norm(a)
            .partial_cmp(&norm(b))
            .expect("finite")
            .then_with(|| {
                centroids[a * dim..(a + 1) * dim]
                    .iter()
                    .zip(&centroids[b * dim..(b + 1) * dim])
                    .map(|(x, y)| x.partial_cmp(y).expect("finite"))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
            .then(a.cmp(&b))
    });
    let mut rank = vec![0u32; k];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r as u32;
    }
    for l in labels.iter_mut() {
        *l = rank[*l as usize];
    }
    let centroids = order
        .iter()
        .flat_map(|&j| centroids[j * dim..(j + 1) * dim].to_vec())
        .collect();
    Ok(KMeansFit {
        labels,
        centroids,
        sse_history,
        iterations,
        effective_k: k,
    })
}

fn standardized<T: Scalar>(band: &[T]) -> Vec<T> {
    let n = T::of(band.len() as f64);
    let mean = band.iter().copied().sum::<T>() / n;
    let var = band.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let sd = var.sqrt();
    band.iter()
        .map(|&v| {
            if sd > T::zero() {
                (v - mean) / sd
            } else {
                v - mean
            }
        })
        .collect()
}

/// Clusters image pixels into label maps: one partition per band in per-band
/// mode, a single partition of the joint feature vectors in joint mode.
/// Per-band runs use seed `cfg.seed ^ band`.
pub fn kmeans_segment<T: Scalar>(
    img: &MultibandImage<T>,
    cfg: &KMeansConfig<T>,
) -> Result<Segmentation> {
    cfg.validate()?;
    let (w, h) = (img.width(), img.height());
    let prepare = |band: &[T]| -> Vec<T> {
        if cfg.standardize {
            standardized(band)
        } else {
            band.to_vec()
        }
    };
    let to_partition = |fit: KMeansFit<T>| Partition::new(fit.labels, w, h, Some(fit.effective_k));
    match cfg.mode {
        BandMode::PerBand => {
            let fits: Vec<Result<KMeansFit<T>>> = (0..img.num_bands())
                .into_par_iter()
                .map(|b| {
                    let band_cfg = KMeansConfig {
                        seed: cfg.seed ^ b as u64,
                        ..cfg.clone()
                    };
                    kmeans(&prepare(img.band(b)), 1, &band_cfg)
                })
                .collect();
            let mut partitions = Vec::with_capacity(fits.len());
            let mut warnings = Vec::new();
            for (b, fit) in fits.into_iter().enumerate() {
                let fit = fit?;
                if fit.effective_k < cfg.k {
                    warnings.push(KMeansWarning {
                        band: Some(b),
                        requested: cfg.k,
                        effective: fit.effective_k,
                    });
                }
                partitions.push(to_partition(fit)?);
            }
            for w in &warnings {
                log::warn!("{}", w);
            }
            Ok(Segmentation {
                partitions,
                warnings,
            })
        }
        BandMode::Joint => {
            let features = if cfg.standardize {
                let bands: Vec<Vec<T>> = img.bands().iter().map(|b| standardized(b)).collect();
                MultibandImage::new(w, h, bands)?.interleaved()
            } else {
                img.interleaved()
            };
            let fit = kmeans(&features, img.num_bands(), cfg)?;
            let mut warnings = Vec::new();
            if fit.effective_k < cfg.k {
                let w = KMeansWarning {
                    band: None,
                    requested: cfg.k,
                    effective: fit.effective_k,
                };
                log::warn!("{}", w);
                warnings.push(w);
            }
            Ok(Segmentation {
                partitions: vec![to_partition(fit)?],
                warnings,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::adjusted_rand_index;

    /// Irwin–Hall approximation of a standard normal.
    fn normalish<R: Rng>(rng: &mut R) -> f64 {
        (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
    }

    fn two_regions() -> MultibandImage<f64> {
        let band: Vec<f64> = (0..20).map(|i| if i < 8 { 0.0 } else { 10.0 }).collect();
        MultibandImage::new(5, 4, vec![band]).unwrap()
    }

    #[test]
    fn separable_regions() {
        let cfg = KMeansConfig::<f64> {
            k: 2,
            ..Default::default()
        };
        let seg = kmeans_segment(&two_regions(), &cfg).unwrap();
        assert!(seg.warnings.is_empty());
        let want: Vec<u32> = (0..20).map(|i| if i < 8 { 0 } else { 1 }).collect();
        assert_eq!(seg.partitions[0].labels(), &want[..]);
    }

    #[test]
    fn constant_image_degrades_to_one_cluster() {
        let img = MultibandImage::new(3, 3, vec![vec![4.0f64; 9]]).unwrap();
        let cfg = KMeansConfig::<f64> {
            k: 2,
            ..Default::default()
        };
        let seg = kmeans_segment(&img, &cfg).unwrap();
        assert_eq!(seg.partitions[0].labels(), &[0; 9]);
        assert_eq!(seg.partitions[0].num_labels(), 1);
        assert_eq!(
            seg.warnings,
            vec![KMeansWarning {
                band: Some(0),
                requested: 2,
                effective: 1
            }]
        );
    }

    fn blobs(seed: u64, bands: &[[f64; 3]]) -> (MultibandImage<f64>, Partition) {
        let (w, h) = (30, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<u32> = (0..w * h).map(|i| ((i % w) / 10) as u32).collect();
        let data = bands
            .iter()
            .map(|means| {
                truth
                    .iter()
                    .map(|&t| means[t as usize] + normalish(&mut rng))
                    .collect()
            })
            .collect();
        (
            MultibandImage::new(w, h, data).unwrap(),
            Partition::new(truth, w, h, None).unwrap(),
        )
    }

    #[test]
    fn joint_blobs_are_recovered() {
        let (img, truth) = blobs(3, &[[0.0, 50.0, 100.0], [100.0, 0.0, 50.0]]);
        let cfg = KMeansConfig::<f64> {
            k: 3,
            mode: BandMode::Joint,
            seed: 11,
            ..Default::default()
        };
        let seg = kmeans_segment(&img, &cfg).unwrap();
        assert_eq!(seg.partitions.len(), 1);
        assert_eq!(
            adjusted_rand_index(&seg.partitions[0], &truth).unwrap(),
            1.0
        );
    }

    #[test]
    fn per_band_returns_one_partition_per_band() {
        let (img, _) = blobs(
            5,
            &[[0.0, 50.0, 100.0], [100.0, 0.0, 50.0], [0.0, 9.0, 100.0]],
        );
        let cfg = KMeansConfig::<f64> {
            k: 4,
            ..Default::default()
        };
        let seg = kmeans_segment(&img, &cfg).unwrap();
        assert_eq!(seg.partitions.len(), 3);
        assert!(seg.partitions.iter().all(|p| p.num_labels() <= 4));
    }

    #[test]
    fn sse_never_increases() {
        for seed in 0..10 {
            let (img, _) = blobs(seed, &[[0.0, 3.0, 6.0], [1.0, 4.0, 2.0]]);
            for init in [KMeansInit::KMeansPlusPlus, KMeansInit::Random] {
                let cfg = KMeansConfig::<f64> {
                    k: 5,
                    seed,
                    init,
                    tol: 0.0,
                    ..Default::default()
                };
                let fit = kmeans(&img.interleaved(), 2, &cfg).unwrap();
                for w in fit.sse_history.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", fit.sse_history);
                }
            }
        }
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // two distinct points far apart plus a tight pair: a bad seed can
        // leave a cluster empty; every requested label must still be used.
        let points = vec![0.0f64, 0.0, 0.0, 0.1, 0.1, 100.0, 100.0, 100.0];
        let mut labels = vec![0u32, 0, 0, 0, 0, 0, 0, 0];
        let centroids = update(&points, 1, 3, &mut labels);
        assert_eq!(centroids.len(), 3);
        let mut used = labels.clone();
        used.sort();
        used.dedup();
        assert_eq!(used, vec![0, 1, 2]);
    }

    #[test]
    fn canonical_labels_ignore_band_order() {
        // integer-valued data: coordinate sums are exact in any order
        let (w, h) = (12, 2);
        let a: Vec<f64> = (0..24)
            .map(|i| ((i % 12) / 4 * 20 + i % 3) as f64)
            .collect();
        let b: Vec<f64> = (0..24)
            .map(|i| (((i % 12) / 4 * 7) % 3 * 15 + i % 2) as f64)
            .collect();
        let cfg = KMeansConfig::<f64> {
            k: 3,
            mode: BandMode::Joint,
            seed: 4,
            ..Default::default()
        };
        let ab = MultibandImage::new(w, h, vec![a.clone(), b.clone()]).unwrap();
        let ba = MultibandImage::new(w, h, vec![b, a]).unwrap();
        let pa = &kmeans_segment(&ab, &cfg).unwrap().partitions[0];
        let pb = &kmeans_segment(&ba, &cfg).unwrap().partitions[0];
        assert_eq!(pa, pb);
    }

    #[test]
    fn deterministic_given_seed() {
        let (img, _) = blobs(9, &[[0.0, 2.0, 4.0]]);
        let cfg = KMeansConfig::<f64> {
            k: 4,
            seed: 77,
            ..Default::default()
        };
        assert_eq!(
            kmeans_segment(&img, &cfg).unwrap(),
            kmeans_segment(&img, &cfg).unwrap()
        );
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = KMeansConfig::<f64> {
            k: 1,
            ..Default::default()
        };
        assert!(kmeans_segment(&two_regions(), &cfg).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let band: Vec<f32> = (0..20).map(|i| if i < 8 { 1.0 } else { 9.0 }).collect();
        let img = MultibandImage::new(5, 4, vec![band]).unwrap();
        let cfg = KMeansConfig::<f32> {
            k: 2,
            ..Default::default()
        };
        let seg = kmeans_segment(&img, &cfg).unwrap();
        assert_eq!(seg.partitions[0].occupied_labels(), 2);
    }
}
