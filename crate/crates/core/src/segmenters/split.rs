use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::scalar::Scalar;
use crate::segmenters::image::MultibandImage;

/// Axis-aligned pixel rectangle, 0-based, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    /// Training pixels are `train`; test pixels are `test`, or every pixel
    /// outside `train` when `test` is absent.
    Rectangle { train: Rect, test: Option<Rect> },
    /// A seeded uniform subset of `round(fraction · N)` training pixels; the
    /// rest are test pixels.
    Random { fraction: f64, seed: u64 },
}

/// An image together with its ground-truth labels over the same pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage<T: Scalar> {
    pub image: MultibandImage<T>,
    pub ground_truth: Partition,
}

/// Keeps pixels in row-major order. A set that fills a rectangle keeps its
/// grid shape; any other subset becomes a single row.
fn subset<T: Scalar>(
    img: &MultibandImage<T>,
    truth: &Partition,
    pixels: &[usize],
    shape: Option<(usize, usize)>,
    which: &'static str,
) -> Result<LabeledImage<T>> {
    if pixels.len() < 2 {
        return Err(Error::EmptySplit(which));
    }
    let (w, h) = shape.unwrap_or((pixels.len(), 1));
    let labels: Vec<u64> = pixels.iter().map(|&i| truth.labels()[i] as u64).collect();
    let (ground_truth, _) = Partition::densify(&labels, w, h)?;
    Ok(LabeledImage {
        image: img.select(pixels, w, h)?,
        ground_truth,
    })
}

/// Complement of a rectangle, with its grid shape when it is itself a
/// full-width row band or full-height column band.
fn complement_shape(r: &Rect, w: usize, h: usize) -> Option<(usize, usize)> {
    let full_rows = r.x == 0 && r.width == w && (r.y == 0 || r.y + r.height == h);
    let full_cols = r.y == 0 && r.height == h && (r.x == 0 || r.x + r.width == w);
    if full_rows {
        Some((w, h - r.height))
    } else if full_cols {
        Some((w - r.width, h))
    } else {
        None
    }
}

/// Splits an image and its ground truth identically into training and test
/// sets.
pub fn split_train_test<T: Scalar>(
    img: &MultibandImage<T>,
    ground_truth: &Partition,
    spec: &SplitSpec,
) -> Result<(LabeledImage<T>, LabeledImage<T>)> {
    let (w, h) = (img.width(), img.height());
    if ground_truth.len() != img.num_pixels() {
        return Err(Error::Incomparable {
            left: img.num_pixels(),
            right: ground_truth.len(),
        });
    }
    match spec {
        SplitSpec::Rectangle { train, test } => {
            for r in std::iter::once(train).chain(test.iter()) {
                if r.x + r.width > w || r.y + r.height > h {
                    return Err(Error::InvalidConfig(format!(
                        "rectangle {:?} exceeds the {}x{} image",
                        r, w, h
                    )));
                }
            }
            let inside = |r: &Rect| -> Vec<usize> {
                (0..w * h).filter(|&i| r.contains(i % w, i / w)).collect()
            };
            let train_px = inside(train);
            let (test_px, test_shape) = match test {
                Some(t) => (inside(t), Some((t.width, t.height))),
                None => (
                    (0..w * h)
                        .filter(|&i| !train.contains(i % w, i / w))
                        .collect(),
                    complement_shape(train, w, h),
                ),
            };
            Ok((
                subset(
                    img,
                    ground_truth,
                    &train_px,
                    Some((train.width, train.height)),
                    "training",
                )?,
                subset(img, ground_truth, &test_px, test_shape, "test")?,
            ))
        }
        SplitSpec::Random { fraction, seed } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidConfig(format!(
                    "split fraction must lie in [0, 1], got {}",
                    fraction
                )));
            }
            let n = w * h;
            let take = (fraction * n as f64).round() as usize;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let mut in_train = vec![false; n];
            for &i in &idx[..take] {
                in_train[i] = true;
            }
            let train_px: Vec<usize> = (0..n).filter(|&i| in_train[i]).collect();
            let test_px: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
            Ok((
                subset(img, ground_truth, &train_px, None, "training")?,
                subset(img, ground_truth, &test_px, None, "test")?,
            ))
        }
    }
}
