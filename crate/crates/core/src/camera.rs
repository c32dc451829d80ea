//! Pinhole intrinsics and the square raster grids (depth, grayscale) the
//! simulator and matcher exchange.
//!
//! Camera frame: x right, y down, z forward. Pixel `(row, col)` covers
//! `[col, col + 1) x [row, row + 1)` in image coordinates.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    /// 64x64 image with a roughly 60 degree field of view.
    fn default() -> Self {
        Self {
            fx: 56.0,
            fy: 56.0,
            cx: 32.0,
            cy: 32.0,
            width: 64,
            height: 64,
        }
    }
}

impl Intrinsics {
    /// Rescales to a `side x side` raster covering the same field of view.
    pub fn scaled_to(&self, side: usize) -> Intrinsics {
        let sx = side as f64 / self.width as f64;
        let sy = side as f64 / self.height as f64;
        Intrinsics {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width: side as u32,
            height: side as u32,
        }
    }

    /// Image coordinates `(u, v)` of a camera-frame point, or `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Pixel index `(row, col)` containing image coordinates `(u, v)`.
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let (col, row) = (u.floor() as usize, v.floor() as usize);
        (col < self.width as usize && row < self.height as usize).then_some((row, col))
    }

    /// Camera-frame point at the center of pixel `(row, col)` with z-depth `depth`.
    pub fn backproject(&self, row: usize, col: usize, depth: f64) -> Vector3<f64> {
        let u = col as f64 + 0.5;
        let v = row as f64 + 0.5;
        Vector3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        )
    }
}

/// Square z-depth raster in meters. Non-positive entries are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    side: usize,
    data: Vec<f64>,
}

impl DepthGrid {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        if side == 0 || data.len() != side * side {
            return Err(Error::shape(format!(
                "depth grid of side {side} needs {} values, got {}",
                side * side,
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    pub fn invalid(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    /// Depth at `(row, col)` if valid.
    pub fn valid(&self, row: usize, col: usize) -> Option<f64> {
        let d = self.get(row, col);
        (d > 0.0 && d.is_finite()).then_some(d)
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, depth: f64) {
        self.data[row * self.side + col] = depth;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }
}

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} image needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}
