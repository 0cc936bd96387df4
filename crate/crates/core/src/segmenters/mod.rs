//! Built-in base segmentation (k-means over pixel features) and image
//! handling. External segmenters enter as label-map files instead.

mod image;
mod kmeans;
mod split;

pub use image::MultibandImage;
pub use kmeans::{
    kmeans, kmeans_segment, BandMode, KMeansConfig, KMeansFit, KMeansInit, KMeansWarning,
    Segmentation,
};
pub use split::{split_train_test, LabeledImage, Rect, SplitSpec};

use crate::error::Result;
use crate::partition::Partition;
use crate::scalar::Scalar;

/// A base segmentation algorithm that turns an image into an ensemble of
/// partitions with a target label count.
pub trait BaseSegmenter<T: Scalar>: Sync {
    fn segment(&self, image: &MultibandImage<T>, c: usize, seed: u64) -> Result<Vec<Partition>>;
}

/// k-means with every setting but `k` and `seed` taken from a template.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansSegmenter<T: Scalar> {
    pub template: KMeansConfig<T>,
}

impl<T: Scalar> BaseSegmenter<T> for KMeansSegmenter<T> {
    fn segment(&self, image: &MultibandImage<T>, c: usize, seed: u64) -> Result<Vec<Partition>> {
        let cfg = KMeansConfig {
            k: c,
            seed,
            ..self.template.clone()
        };
        Ok(kmeans_segment(image, &cfg)?.partitions)
    }
}
