use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Band-sequential multispectral raster: `B` planes of `width × height`
/// row-major intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MultibandImage<T: Scalar> {
    width: usize,
    height: usize,
    bands: Vec<Vec<T>>,
    band_names: Option<Vec<String>>,
}

impl<T: Scalar> MultibandImage<T> {
    pub fn new(width: usize, height: usize, bands: Vec<Vec<T>>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidImage("image has no bands".into()));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidImage("grid size overflows".into()))?;
        for (b, band) in bands.iter().enumerate() {
            if band.len() != n {
                return Err(Error::InvalidImage(format!(
                    "band {} has {} samples, expected {}x{} = {}",
                    b,
                    band.len(),
                    width,
                    height,
                    n
                )));
            }
            if let Some(i) = band.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidImage(format!(
                    "band {} has a non-finite sample at pixel {}",
                    b, i
                )));
            }
        }
        Ok(Self {
            width,
            height,
            bands,
            band_names: None,
        })
    }

    pub fn with_band_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.bands.len() {
            return Err(Error::InvalidImage(format!(
                "{} band names for {} bands",
                names.len(),
                self.bands.len()
            )));
        }
        self.band_names = Some(names);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, b: usize) -> &[T] {
        &self.bands[b]
    }

    pub fn bands(&self) -> &[Vec<T>] {
        &self.bands
    }

    pub fn band_names(&self) -> Option<&[String]> {
        self.band_names.as_deref()
    }

    /// Pixel-interleaved copy: `num_pixels × num_bands`.
    pub fn interleaved(&self) -> Vec<T> {
        let b = self.bands.len();
        let mut out = vec![T::zero(); self.num_pixels() * b];
        for (j, band) in self.bands.iter().enumerate() {
            for (i, &v) in band.iter().enumerate() {
                out[i * b + j] = v;
            }
        }
        out
    }

    /// Keeps the listed pixel indices (in the given order) as a new image of
    /// the given shape.
    pub(crate) fn select(&self, pixels: &[usize], width: usize, height: usize) -> Result<Self> {
        let bands = self
            .bands
            .iter()
            .map(|band| pixels.iter().map(|&i| band[i]).collect())
            .collect();
        let mut img = Self::new(width, height, bands)?;
        img.band_names = self.band_names.clone();
        Ok(img)
    }
}
