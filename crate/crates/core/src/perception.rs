//! Rim segmentation, mask I/O and depth deprojection.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{PointCloud, PointLabel};
use crate::scene::{CameraModel, RgbdImage};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("mask i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mask image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("invalid colour band: min exceeds max on channel {0}")]
    InvalidBand(usize),
}

/// Binary mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl SegMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![true; width as usize * height as usize] }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, value: bool) {
        let w = self.width as usize;
        self.data[v as usize * w + u as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    /// Writes 255 for set pixels and 0 otherwise as 8-bit grayscale.
    pub fn save_png(&self, path: &Path) -> Result<(), PerceptionError> {
        let buf: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(self.width, self.height, buf).expect("buffer sized to mask");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Inclusive per-channel RGB range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorBand {
    pub min: [u8; 3],
    pub max: [u8; 3],
}

impl ColorBand {
    pub fn new(min: [u8; 3], max: [u8; 3]) -> Result<Self, PerceptionError> {
        match (0..3).find(|&c| min[c] > max[c]) {
            Some(c) => Err(PerceptionError::InvalidBand(c)),
            None => Ok(Self { min, max }),
        }
    }

    /// `color +/- tolerance` on every channel, saturating.
    pub fn around(color: [u8; 3], tolerance: u8) -> Self {
        Self {
            min: color.map(|c| c.saturating_sub(tolerance)),
            max: color.map(|c| c.saturating_add(tolerance)),
        }
    }

    pub fn contains(&self, c: [u8; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= c[i] && c[i] <= self.max[i])
    }
}

pub fn segment_threshold(img: &RgbdImage, band: &ColorBand) -> SegMask {
    SegMask { width: img.width, height: img.height, data: img.color.iter().map(|c| band.contains(*c)).collect() }
}

/// Loads a grayscale PNG; pixels brighter than 127 are set.
pub fn load_mask(path: &Path, expected: Option<(u32, u32)>) -> Result<SegMask, PerceptionError> {
    let img = image::open(path)?.into_luma8();
    let found = img.dimensions();
    if let Some(e) = expected {
        if e != found {
            return Err(PerceptionError::DimensionMismatch { expected: e, found });
        }
    }
    Ok(SegMask { width: found.0, height: found.1, data: img.pixels().map(|p| p.0[0] > 127).collect() })
}

/// Intersection over union; 1.0 when both masks are empty.
pub fn iou(a: &SegMask, b: &SegMask) -> Result<f64, PerceptionError> {
    if a.dims() != b.dims() {
        return Err(PerceptionError::DimensionMismatch { expected: a.dims(), found: b.dims() });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// World-frame points for every set pixel with a depth return.
pub fn deproject(mask: &SegMask, img: &RgbdImage, cam: &CameraModel) -> Result<PointCloud, PerceptionError> {
    let (w, h) = (cam.width, cam.height);
    for found in [mask.dims(), (img.width, img.height)] {
        if found != (w, h) {
            return Err(PerceptionError::DimensionMismatch { expected: (w, h), found });
        }
    }
    let mut cloud = PointCloud::new();
    for v in 0..h {
        for u in 0..w {
            let i = v as usize * w as usize + u as usize;
            let d = img.depth[i];
            if mask.data[i] && d > 0.0 {
                cloud.push(cam.deproject_pixel(f64::from(u), f64::from(v), d), PointLabel::Rim);
            }
        }
    }
    Ok(cloud)
}
