//! Row-major image grids for depth and confidence.

use std::ops::Deref;

use crate::error::{invalid, Result};

/// Depths below this are treated as missing (sky, holes).
pub const MIN_VALID_DEPTH: f32 = 1e-6;

/// A row-major `height x width` grid of `f32` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(invalid(format!(
                "raster data has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel depth in meters (or relative units before scale alignment).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(Raster);

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if let Some(bad) = data.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(invalid(format!(
                "depth value {bad} is not a finite non-negative number"
            )));
        }
        Raster::new(width, height, data).map(Self)
    }

    pub fn filled(width: usize, height: usize, depth: f32) -> Self {
        Self(Raster::filled(width, height, depth.max(0.0)))
    }

    pub fn is_valid_at(&self, u: usize, v: usize) -> bool {
        self.get(u, v) >= MIN_VALID_DEPTH
    }

    pub fn valid_count(&self) -> usize {
        self.values()
            .iter()
            .filter(|d| **d >= MIN_VALID_DEPTH)
            .count()
    }

    /// Multiplies every valid sample by `s`; invalid samples are copied untouched.
    pub(crate) fn scaled(&self, s: f64) -> Self {
        let data = self
            .values()
            .iter()
            .map(|&d| {
                if d >= MIN_VALID_DEPTH {
                    (d as f64 * s) as f32
                } else {
                    d
                }
            })
            .collect();
        Self(Raster {
            width: self.width(),
            height: self.height(),
            data,
        })
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }
}

impl Deref for DepthMap {
    type Target = Raster;
    fn deref(&self) -> &Raster {
        &self.0
    }
}

/// Per-pixel confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap(Raster);

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if let Some(bad) = data.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(invalid(format!("confidence {bad} outside [0, 1]")));
        }
        Raster::new(width, height, data).map(Self)
    }

    pub fn filled(width: usize, height: usize, confidence: f32) -> Self {
        Self(Raster::filled(width, height, confidence.clamp(0.0, 1.0)))
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }
}

impl Deref for ConfidenceMap {
    type Target = Raster;
    fn deref(&self) -> &Raster {
        &self.0
    }
}
