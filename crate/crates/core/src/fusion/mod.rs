//! Consensus optimizer: Best-of-K initialization, the filtered H-matrix and
//! the stochastic best-one-element-move loop.

mod delta;
mod hmatrix;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{normalize_sod, DistanceModel};
use crate::partition::Partition;
use crate::scalar::Scalar;

pub use delta::delta_matrix;
use delta::{MemberTable, MoveKernel, Working};
pub use hmatrix::{select_move, HMatrix, Move};

/// How the working consensus is seeded.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Ensemble member with the smallest total distance to the others.
    #[default]
    Bok,
    Given(Partition),
}

/// Initial accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HInit {
    #[default]
    Zeros,
    /// `Σ_k delta_matrix(s_k, s)`: the exact objective for every single move.
    FullObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStop {
    /// Run all `t_max` iterations.
    #[default]
    Off,
    /// Stop after this many consecutive complete epochs without a
    /// label-changing move.
    Patience(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FusionConfig<T: Scalar> {
    /// Forgetting factor in `[0, 1]`; 0 is memoryless stochastic BOEM.
    pub beta: T,
    /// Iteration cap `T`; iterations run for `t = 2..=T`.
    pub t_max: usize,
    pub seed: u64,
    pub distance: DistanceModel<T>,
    pub init: Init,
    pub early_stop: EarlyStop,
    pub h_init: HInit,
    /// Label alphabet of the consensus. Defaults to the largest alphabet in the
    /// ensemble.
    pub num_labels: Option<usize>,
    /// Return the visited partition with the lowest objective instead of the
    /// last one.
    #[serde(default = "default_keep_best")]
    pub keep_best: bool,
}

fn default_keep_best() -> bool {
    true
}

impl<T: Scalar> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            beta: T::of(0.9),
            t_max: 1000,
            seed: 0,
            distance: DistanceModel::sdd(),
            init: Init::Bok,
            early_stop: EarlyStop::Off,
            h_init: HInit::Zeros,
            num_labels: None,
            keep_best: true,
        }
    }
}

impl<T: Scalar> FusionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.t_max < 1 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        if self.early_stop == EarlyStop::Patience(0) {
            return Err(Error::InvalidConfig(
                "early-stop patience must be >= 1".into(),
            ));
        }
        if self.num_labels == Some(0) {
            return Err(Error::InvalidConfig("num_labels must be >= 1".into()));
        }
        self.distance.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub average_sod: f64,
}

/// Serializes everything except the consensus, which is written as a label
/// map of its own.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct FusionReport<T: Scalar> {
    #[serde(skip_serializing)]
    pub consensus: Partition,
    /// Average SOD of the working consensus at `t = 1`, after every complete
    /// epoch and at the last iteration.
    pub objective_trace: Vec<TracePoint>,
    /// Filter/move steps performed (at most `t_max − 1`).
    pub iterations_run: usize,
    /// Steps whose selected move changed a label.
    pub moves_applied: usize,
    /// QD evaluations clamped to `[0, 1]` across all move matrices.
    pub clamp_count: u64,
    /// `Σ_k d(s_k, consensus)` under the configured distance, for the returned
    /// consensus.
    pub objective: T,
    pub initial_objective: T,
    pub average_sod: f64,
    pub initial_average_sod: f64,
    pub stopped_early: bool,
    /// Iteration at which the returned consensus was reached (1 = the
    /// initial partition).
    pub best_iteration: usize,
    /// Not serialized, so reports stay byte-reproducible.
    #[serde(skip_serializing)]
    pub wall_time: Duration,
}

/// `Σ_i d(s_i, s)` under `d`.
pub fn objective<T: Scalar>(
    ensemble: &[Partition],
    s: &Partition,
    d: &DistanceModel<T>,
) -> Result<T> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    ensemble.iter().map(|m| d.distance(m, s)).sum()
}

/// Index of the ensemble member minimizing the total distance to all members;
/// ties go to the lowest index.
pub fn best_of_k_index<T: Scalar>(ensemble: &[Partition], d: &DistanceModel<T>) -> Result<usize> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut best: Option<(usize, T)> = None;
    for (idx, candidate) in ensemble.iter().enumerate() {
        let total = objective(ensemble, candidate, d)?;
        if best.is_none_or(|(_, b)| total < b) {
            best = Some((idx, total));
        }
    }
    Ok(best.expect("non-empty").0)
}

pub fn best_of_k<T: Scalar>(ensemble: &[Partition], d: &DistanceModel<T>) -> Result<Partition> {
    Ok(ensemble[best_of_k_index(ensemble, d)?].clone())
}

/// Drives the filtered stochastic best-one-element-move loop over an
/// ensemble. Holds all incremental state; exposed so callers can observe
/// individual steps.
pub struct Fusion<'a, T: Scalar> {
    ensemble: &'a [Partition],
    cfg: FusionConfig<T>,
    working: Working,
    members: Vec<MemberTable>,
    h: HMatrix<T>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    clamp_count: u64,
    initial_labels: Vec<u32>,
    width: usize,
    height: usize,
}

/// One filter/move step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub member: usize,
    pub selected: Move<T>,
    /// Label of the selected pixel before the step.
    pub previous_label: usize,
    /// Whether the step changed a label.
    pub applied: bool,
    /// Whether this step completed a pass over the ensemble.
    pub epoch_end: bool,
}

impl<'a, T: Scalar> Fusion<'a, T> {
    pub fn new(ensemble: &'a [Partition], cfg: FusionConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
        for m in ensemble {
            first.check_comparable(m)?;
        }
        let c = cfg.num_labels.unwrap_or_else(|| {
            ensemble
                .iter()
                .map(Partition::num_labels)
                .max()
                .unwrap_or(1)
        });
        let init = match &cfg.init {
            Init::Bok => best_of_k(ensemble, &cfg.distance)?,
            Init::Given(p) => {
                first.check_comparable(p)?;
                p.clone()
            }
        };
        let used = init.labels().iter().max().map_or(0, |&l| l as usize + 1);
        if used > c {
            return Err(Error::InvalidConfig(format!(
                "initial partition uses {} labels but the consensus alphabet is {}",
                used, c
            )));
        }
        let working = Working::new(init.labels().to_vec(), c);
        let members: Vec<MemberTable> = ensemble
            .iter()
            .map(|m| MemberTable::new(m.labels(), m.num_labels(), &working))
            .collect();
        let n = first.len();
        let mut h = HMatrix::zeros(n, c);
        let mut clamp_count = 0;
        if cfg.h_init == HInit::FullObjective {
            for (m, table) in ensemble.iter().zip(&members) {
                let mut kernel = MoveKernel::new(table, &working, &cfg.distance);
                kernel.accumulate_into(&mut h, m.labels(), table, &working, &cfg.distance);
                clamp_count += kernel.clamped;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..ensemble.len()).collect();
        order.shuffle(&mut rng);
        Ok(Self {
            ensemble,
            working,
            members,
            h,
            rng,
            order,
            cursor: 0,
            clamp_count,
            initial_labels: init.labels().to_vec(),
            width: init.width(),
            height: init.height(),
            cfg,
        })
    }

    /// Next ensemble index: a fresh pseudo-random permutation of `0..K` is
    /// drawn each time the previous one is exhausted (Fisher–Yates shuffle
    /// driven by ChaCha8 seeded with `cfg.seed`).
    fn next_member(&mut self) -> (usize, bool) {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let k = self.order[self.cursor];
        self.cursor += 1;
        (k, self.cursor == self.order.len())
    }

    /// One iteration: pick `s_k`, update `H ← β·H + D(s_k, s)`, apply the
    /// argmin move.
    pub fn step(&mut self) -> Step<T> {
        let (k, epoch_end) = self.next_member();
        let member_labels = self.ensemble[k].labels();
        let table = &self.members[k];
        let mut kernel = MoveKernel::new(table, &self.working, &self.cfg.distance);
        let selected = kernel.filter_and_select(
            &mut self.h,
            self.cfg.beta,
            member_labels,
            table,
            &self.working,
            &self.cfg.distance,
        );
        self.clamp_count += kernel.clamped;
        let previous_label = self.working.labels[selected.pixel] as usize;
        let applied = selected.label != previous_label;
        if applied {
            self.relabel(selected.pixel, selected.label);
        }
        Step {
            member: k,
            selected,
            previous_label,
            applied,
            epoch_end,
        }
    }

    /// Moves the working partition to `target` pixel by pixel, keeping every
    /// table consistent.
    fn restore(&mut self, target: &[u32]) {
        for (i, &l) in target.iter().enumerate() {
            if self.working.labels[i] != l {
                self.relabel(i, l as usize);
            }
        }
    }

    fn relabel(&mut self, pixel: usize, b: usize) {
        let a = self.working.labels[pixel] as usize;
        let c = self.working.c;
        for (m, table) in self.ensemble.iter().zip(self.members.iter_mut()) {
            table.relabel(m.labels()[pixel] as usize, a, b, c);
        }
        self.working.relabel(pixel, b);
    }

    /// `Σ_k d(s_k, s)` for the working partition, in `O(K)`.
    pub fn objective(&self) -> T {
        self.members
            .iter()
            .map(|m| {
                self.cfg
                    .distance
                    .evaluate_parts(
                        m.theta_member,
                        self.working.theta,
                        m.n11,
                        self.working.pairs,
                    )
                    .value
            })
            .sum()
    }

    /// Average SOD (symmetric distance) of the working partition, in `O(K)`.
    pub fn average_sod(&self) -> f64 {
        let total: u128 = self
            .members
            .iter()
            .map(|m| m.sdd(&self.working) as u128)
            .sum();
        normalize_sod(total, self.members.len(), self.working.labels.len())
    }

    pub fn h(&self) -> &HMatrix<T> {
        &self.h
    }

    pub fn labels(&self) -> &[u32] {
        &self.working.labels
    }

    pub fn consensus(&self) -> Partition {
        Partition::new(
            self.working.labels.clone(),
            self.width,
            self.height,
            Some(self.working.c),
        )
        .expect("working labels stay inside the alphabet")
    }

    /// Runs to `t_max` (or early stop) and reports.
    pub fn run(mut self) -> FusionReport<T> {
        let started = Instant::now();
        let initial_objective = self.objective();
        let initial_average_sod = self.average_sod();
        let mut trace = vec![TracePoint {
            iteration: 1,
            average_sod: initial_average_sod,
        }];
        let mut iterations_run = 0;
        let mut moves_applied = 0;
        let mut quiet_epochs = 0u32;
        let mut moved_this_epoch = false;
        let mut stopped_early = false;
        let mut best: Option<(usize, Vec<u32>)> = None;
        let mut best_objective = initial_objective;
        for t in 2..=self.cfg.t_max {
            let step = self.step();
            iterations_run += 1;
            if step.applied {
                moves_applied += 1;
                moved_this_epoch = true;
                if self.cfg.keep_best {
                    let obj = self.objective();
                    if obj < best_objective {
                        best_objective = obj;
                        best = Some((t, self.working.labels.clone()));
                    }
                }
            }
            if step.epoch_end {
                trace.push(TracePoint {
                    iteration: t,
                    average_sod: self.average_sod(),
                });
                quiet_epochs = if moved_this_epoch {
                    0
                } else {
                    quiet_epochs + 1
                };
                moved_this_epoch = false;
                if let EarlyStop::Patience(p) = self.cfg.early_stop {
                    if quiet_epochs >= p {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
        let last = iterations_run + 1;
        if trace.last().map(|p| p.iteration) != Some(last) {
            trace.push(TracePoint {
                iteration: last,
                average_sod: self.average_sod(),
            });
        }
        let best_iteration = if self.cfg.keep_best && self.objective() > best_objective {
            let (t, labels) = best.unwrap_or_else(|| (1, self.initial_labels.clone()));
            self.restore(&labels);
            t
        } else {
            last
        };
        FusionReport {
            objective: self.objective(),
            average_sod: self.average_sod(),
            consensus: self.consensus(),
            best_iteration,
            objective_trace: trace,
            iterations_run,
            moves_applied,
            clamp_count: self.clamp_count,
            initial_objective,
            initial_average_sod,
            stopped_early,
            wall_time: started.elapsed(),
        }
    }
}

/// Fuses an ensemble into a consensus partition. Deterministic given
/// `cfg.seed`.
pub fn fuse<T: Scalar>(ensemble: &[Partition], cfg: &FusionConfig<T>) -> Result<FusionReport<T>> {
    Ok(Fusion::new(ensemble, cfg.clone())?.run())
}
