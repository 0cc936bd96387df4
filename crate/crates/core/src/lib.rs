//! Consensus fusion of image segmentations.
//!
//! Candidate label maps of one image are combined into a single consensus
//! partition by a filtered stochastic best-one-element-move search over the
//! median-partition objective. Distances between partitions are pair-counting
//! based (symmetric distance, `1 − ARI`, or a min/max-normalized quasi
//! distance), and the cluster count and forgetting factor can be chosen from
//! grids by ARI agreement indices.
//!
//! Real-valued state is generic over [`Scalar`] (`f32` or `f64`); pair counts
//! and symmetric distances are exact integers. The `*F64` / `*F32` aliases
//! below name the common instantiations.

pub mod error;
pub mod fusion;
pub mod metrics;
pub mod model_selection;
pub mod partition;
pub mod scalar;
pub mod segmenters;

pub use error::{Error, Result};
pub use fusion::{
    best_of_k, delta_matrix, fuse, objective, select_move, EarlyStop, Fusion, FusionConfig,
    FusionReport, HInit, HMatrix, Init, Move,
};
pub use metrics::{
    adjusted_rand_index, average_sod, dl_distance, fit_qd, qd_distance, rand_index, sdd,
    BaseDistance, DistanceKind, DistanceModel,
};
pub use model_selection::{
    beta_index, estimate_beta, estimate_c, segmentation_index, Direction, GridResult,
};
pub use partition::{build_contingency, pair_counts, ContingencyTable, PairCounts, Partition};
pub use scalar::Scalar;
pub use segmenters::{
    kmeans_segment, split_train_test, BandMode, BaseSegmenter, KMeansConfig, KMeansSegmenter,
    MultibandImage,
};

pub type DistanceModelF64 = DistanceModel<f64>;
pub type DistanceModelF32 = DistanceModel<f32>;
pub type FusionConfigF64 = FusionConfig<f64>;
pub type FusionConfigF32 = FusionConfig<f32>;
pub type FusionReportF64 = FusionReport<f64>;
pub type FusionReportF32 = FusionReport<f32>;
pub type HMatrixF64 = HMatrix<f64>;
pub type HMatrixF32 = HMatrix<f32>;
pub type MultibandImageF64 = MultibandImage<f64>;
pub type MultibandImageF32 = MultibandImage<f32>;
pub type KMeansConfigF64 = KMeansConfig<f64>;
pub type KMeansConfigF32 = KMeansConfig<f32>;
