//! Grid selection of the cluster count (segmentation index) and of the
//! forgetting factor (beta index), both built from pairwise ARI sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionConfig};
use crate::metrics::adjusted_rand_index;
use crate::partition::Partition;
use crate::scalar::Scalar;
use crate::segmenters::{BaseSegmenter, MultibandImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Highest agreement wins.
    #[default]
    Maximize,
    /// Literal argmin of the index.
    Minimize,
}

impl Direction {
    fn note(self) -> &'static str {
        match self {
            Direction::Maximize => {
                "maximize: picks the candidate with the strongest ARI agreement; \
                 the literal argmin selection is available as direction=minimize"
            }
            Direction::Minimize => "minimize: literal argmin of the ARI-sum index",
        }
    }
}

/// An ARI sum with the number of pairs left out because ARI was undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexScore {
    pub value: f64,
    pub skipped_pairs: usize,
    pub scored_pairs: usize,
}

/// Segmentation index: sum of ARI over all unordered pairs of the ensemble.
pub fn segmentation_index(ensemble_at_c: &[Partition]) -> Result<IndexScore> {
    if ensemble_at_c.len() < 2 {
        return Err(Error::TooFewPartitions {
            needed: 2,
            got: ensemble_at_c.len(),
        });
    }
    let mut score = IndexScore {
        value: 0.0,
        skipped_pairs: 0,
        scored_pairs: 0,
    };
    for (i, a) in ensemble_at_c.iter().enumerate() {
        for b in &ensemble_at_c[i + 1..] {
            accumulate(&mut score, adjusted_rand_index(a, b))?;
        }
    }
    Ok(score)
}

/// Beta index: sum of ARI between each ensemble member and the fused output.
pub fn beta_index(ensemble: &[Partition], consensus: &Partition) -> Result<IndexScore> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut score = IndexScore {
        value: 0.0,
        skipped_pairs: 0,
        scored_pairs: 0,
    };
    for s in ensemble {
        accumulate(&mut score, adjusted_rand_index(s, consensus))?;
    }
    Ok(score)
}

fn accumulate(score: &mut IndexScore, ari: Result<f64>) -> Result<()> {
    match ari {
        Ok(v) => {
            score.value += v;
            score.scored_pairs += 1;
        }
        Err(Error::DegenerateMetric) => score.skipped_pairs += 1,
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Outcome of a grid search. `scores[i]` is `None` when candidate `i` failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "V: Serialize", deserialize = "V: Deserialize<'de>"))]
pub struct GridResult<V> {
    pub grid: Vec<V>,
    pub scores: Vec<Option<f64>>,
    pub chosen: V,
    pub direction: Direction,
    /// Degenerate-ARI pairs excluded, summed over the grid.
    pub skipped_pairs: usize,
    /// Ensemble size behind each candidate's score (0 for failed candidates).
    pub ensemble_sizes: Vec<usize>,
    /// Failure message per candidate.
    pub errors: Vec<Option<String>>,
    pub note: String,
}

impl<V: Copy + std::fmt::Display> GridResult<V> {
    /// `candidate,score,valid` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("candidate,score,valid\n");
        for (v, s) in self.grid.iter().zip(&self.scores) {
            match s {
                Some(s) => out.push_str(&format!("{},{},true\n", v, s)),
                None => out.push_str(&format!("{},,false\n", v)),
            }
        }
        out
    }
}

struct Candidate {
    score: Result<IndexScore>,
    size: usize,
}

fn choose<V: Copy + PartialOrd>(
    grid: &[V],
    candidates: Vec<Candidate>,
    direction: Direction,
) -> Result<GridResult<V>> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Ok(s) = &c.score else { continue };
        let better = match best {
            None => true,
            Some((bi, bv)) => {
                let strictly = match direction {
                    Direction::Maximize => s.value > bv,
                    Direction::Minimize => s.value < bv,
                };
                strictly || (s.value == bv && grid[i] < grid[bi])
            }
        };
        if better {
            best = Some((i, s.value));
        }
    }
    let (chosen, _) = best.ok_or(Error::AllCandidatesInvalid)?;
    let sizes: Vec<usize> = candidates.iter().map(|c| c.size).collect();
    let mut valid_sizes: Vec<usize> = candidates
        .iter()
        .filter(|c| c.score.is_ok())
        .map(|c| c.size)
        .collect();
    valid_sizes.dedup();
    let mut note = direction.note().to_string();
    if valid_sizes.len() > 1 {
        log::warn!("ensemble size differs across grid candidates: {:?}", sizes);
        note.push_str("; ensemble size differs across candidates, sums are not comparable");
    }
    Ok(GridResult {
        grid: grid.to_vec(),
        scores: candidates
            .iter()
            .map(|c| c.score.as_ref().ok().map(|s| s.value))
            .collect(),
        chosen: grid[chosen],
        direction,
        skipped_pairs: candidates
            .iter()
            .filter_map(|c| c.score.as_ref().ok())
            .map(|s| s.skipped_pairs)
            .sum(),
        ensemble_sizes: sizes,
        errors: candidates
            .iter()
            .map(|c| c.score.as_ref().err().map(ToString::to_string))
            .collect(),
        note,
    })
}

/// Scores every candidate label count by the segmentation index of the
/// ensemble the base segmenter produces at that count. Candidate `i` runs with
/// seed `seed ^ i`; candidates evaluate in parallel.
pub fn estimate_c<T: Scalar, S: BaseSegmenter<T>>(
    image: &MultibandImage<T>,
    segmenter: &S,
    c_grid: &[usize],
    seed: u64,
    direction: Direction,
) -> Result<GridResult<usize>> {
    if c_grid.is_empty() {
        return Err(Error::InvalidConfig("empty c grid".into()));
    }
    if let Some(c) = c_grid.iter().find(|&&c| c < 2) {
        return Err(Error::InvalidConfig(format!("grid value {} is below 2", c)));
    }
    let candidates: Vec<Candidate> = c_grid
        .par_iter()
        .enumerate()
        .map(
            |(i, &c)| match segmenter.segment(image, c, seed ^ i as u64) {
                Ok(ensemble) => Candidate {
                    size: ensemble.len(),
                    score: segmentation_index(&ensemble).and_then(nonvacuous),
                },
                Err(e) => Candidate {
                    score: Err(e),
                    size: 0,
                },
            },
        )
        .collect();
    choose(c_grid, candidates, direction)
}

fn nonvacuous(s: IndexScore) -> Result<IndexScore> {
    if s.scored_pairs == 0 {
        Err(Error::DegenerateMetric)
    } else {
        Ok(s)
    }
}

/// Runs one fusion per β and scores each output by the beta index. Candidate
/// `i` fuses with seed `cfg_template.seed ^ i`.
pub fn estimate_beta<T: Scalar>(
    ensemble: &[Partition],
    cfg_template: &FusionConfig<T>,
    beta_grid: &[T],
    direction: Direction,
) -> Result<GridResult<T>> {
    if beta_grid.is_empty() {
        return Err(Error::InvalidConfig("empty beta grid".into()));
    }
    if let Some(b) = beta_grid
        .iter()
        .find(|&&b| !(b >= T::zero() && b <= T::one()))
    {
        return Err(Error::InvalidConfig(format!("beta {} outside [0, 1]", b)));
    }
    let candidates: Vec<Candidate> = beta_grid
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            let cfg = FusionConfig {
                beta,
                seed: cfg_template.seed ^ i as u64,
                ..cfg_template.clone()
            };
            Candidate {
                size: ensemble.len(),
                score: fuse(ensemble, &cfg)
                    .and_then(|r| beta_index(ensemble, &r.consensus))
                    .and_then(nonvacuous),
            }
        })
        .collect();
    choose(beta_grid, candidates, direction)
}
