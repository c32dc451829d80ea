//! Correlation layers between two feature maps.
//!
//! An extensive layer scores every feature of the first map against every
//! feature of the second (`side^4` dot products). A guided layer only searches a
//! `d x d` window of the second map, placed around the match found by a coarser
//! extensive layer, with `d = upscale * (1 + 2 * border)`.
//!
//! All tensors are stored row-major as `(y, x, channel)`.

mod counts;
mod layers;
mod loss;

pub use counts::{pixel_match_counts, MatchLayout, PixelMatchCounts};
pub use layers::{
    extensive_correlation, extensive_correlation_counted, guided_correlation,
    guided_correlation_counted, match_map, soft_match_map, DotCounter, GuidedWindow, MatchMap,
    SoftMatchMap,
};
pub use loss::{auxiliary_loss, total_auxiliary_loss};

use crate::error::{Error, Result};

/// Square feature grid of `side x side` vectors with `channels` entries each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    side: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(side: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if side == 0 || channels == 0 {
            return Err(Error::shape("feature map needs side >= 1 and channels >= 1"));
        }
        if data.len() != side * side * channels {
            return Err(Error::shape(format!(
                "feature map {side}x{side}x{channels} needs {} values, got {}",
                side * side * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "feature map contains non-finite values".into(),
            ));
        }
        Ok(Self {
            side,
            channels,
            data,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Feature vector at `(y, x)`.
    pub fn at(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.side + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Average-pools `factor x factor` blocks into one feature.
    pub fn avg_pool(&self, factor: usize) -> Result<FeatureMap> {
        if factor == 0 || !self.side.is_multiple_of(factor) {
            return Err(Error::shape(format!(
                "cannot pool side {} by {factor}",
                self.side
            )));
        }
        let side = self.side / factor;
        let mut data = vec![0.0; side * side * self.channels];
        let norm = 1.0 / (factor * factor) as f64;
        for y in 0..self.side {
            for x in 0..self.side {
                let dst = ((y / factor) * side + x / factor) * self.channels;
                for (d, v) in data[dst..dst + self.channels].iter_mut().zip(self.at(y, x)) {
                    *d += v * norm;
                }
            }
        }
        FeatureMap::new(side, self.channels, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationKind {
    Extensive,
    Guided(GuidedWindow),
}

/// Match scores `C(y, x, w)`, `side x side x match_channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    side: usize,
    match_channels: usize,
    data: Vec<f64>,
    kind: CorrelationKind,
}

impl CorrelationMap {
    pub fn from_parts(
        side: usize,
        kind: CorrelationKind,
        data: Vec<f64>,
    ) -> Result<CorrelationMap> {
        let match_channels = match kind {
            CorrelationKind::Extensive => side * side,
            CorrelationKind::Guided(w) => w.window * w.window,
        };
        if side == 0 || data.len() != side * side * match_channels {
            return Err(Error::shape(format!(
                "correlation map of side {side} with {match_channels} channels needs {} values, got {}",
                side * side * match_channels,
                data.len()
            )));
        }
        Ok(Self {
            side,
            match_channels,
            data,
            kind,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn match_channels(&self) -> usize {
        self.match_channels
    }

    pub fn kind(&self) -> CorrelationKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Scores of all candidate matches for feature `(y, x)`.
    pub fn scores(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.side + x) * self.match_channels;
        &self.data[start..start + self.match_channels]
    }

    pub fn get(&self, y: usize, x: usize, w: usize) -> f64 {
        self.scores(y, x)[w]
    }
}
