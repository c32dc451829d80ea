use super::layers::{GuidedWindow, MatchMap};
use crate::camera::{DepthGrid, Intrinsics};
use crate::error::{Error, Result};
use crate::parallel;
use crate::pose::Pose;

/// Relative depth tolerance for the occlusion test.
pub const OCCLUSION_TOLERANCE: f64 = 0.05;

/// Channel layout that pixel matches are binned into.
#[derive(Debug, Clone, Copy)]
pub enum MatchLayout<'a> {
    Extensive {
        side: usize,
    },
    /// Window-local channels; matches outside the window are dropped.
    Guided {
        side: usize,
        guide: &'a MatchMap,
        window: GuidedWindow,
    },
}

impl MatchLayout<'_> {
    pub fn side(&self) -> usize {
        match self {
            MatchLayout::Extensive { side } | MatchLayout::Guided { side, .. } => *side,
        }
    }

    pub fn match_channels(&self) -> usize {
        match self {
            MatchLayout::Extensive { side } => side * side,
            MatchLayout::Guided { window, .. } => window.match_channels(),
        }
    }

    /// Channel of a match from cell `(y1, x1)` to cell `(y2, x2)`, if representable.
    pub fn channel(&self, y1: usize, x1: usize, y2: usize, x2: usize) -> Option<usize> {
        match self {
            MatchLayout::Extensive { side } => Some(x2 * side + y2),
            MatchLayout::Guided { guide, window, .. } => {
                let (my, mx) = guide.at(y1 / window.upscale, x1 / window.upscale);
                let (row0, col0) = window.anchor(my, mx);
                let ly = y2 as isize - row0;
                let lx = x2 as isize - col0;
                let d = window.window as isize;
                if (0..d).contains(&ly) && (0..d).contains(&lx) {
                    Some(lx as usize * window.window + ly as usize)
                } else {
                    None
                }
            }
        }
    }
}

/// `n(y, x, w)`: number of pixels of cell `(y, x)` in image 1 whose true match
/// in image 2 lies in the cell addressed by channel `w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMatchCounts {
    side: usize,
    match_channels: usize,
    counts: Vec<u32>,
}

impl PixelMatchCounts {
    pub fn from_parts(side: usize, match_channels: usize, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != side * side * match_channels {
            return Err(Error::shape(format!(
                "pixel counts of side {side} with {match_channels} channels need {} values, got {}",
                side * side * match_channels,
                counts.len()
            )));
        }
        Ok(Self {
            side,
            match_channels,
            counts,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn match_channels(&self) -> usize {
        self.match_channels
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn at(&self, y: usize, x: usize) -> &[u32] {
        let start = (y * self.side + x) * self.match_channels;
        &self.counts[start..start + self.match_channels]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| *c as u64).sum()
    }
}

/// Warps every valid pixel of image 1 into image 2 using its depth and bins the
/// surviving matches per feature cell.
///
/// `intrinsics` describe the full image; they are rescaled to the depth grid.
/// A warped pixel survives if it lands inside image 2 in front of the camera
/// and its depth agrees with `depth2` within [`OCCLUSION_TOLERANCE`].
pub fn pixel_match_counts(
    depth1: &DepthGrid,
    depth2: &DepthGrid,
    pose1: &Pose,
    pose2: &Pose,
    intrinsics: &Intrinsics,
    layout: &MatchLayout<'_>,
) -> Result<PixelMatchCounts> {
    let res = depth1.side();
    let side = layout.side();
    if depth2.side() != res {
        return Err(Error::shape("depth grids differ in resolution"));
    }
    if side == 0 || !res.is_multiple_of(side) {
        return Err(Error::shape(format!(
            "depth resolution {res} is not a multiple of layer side {side}"
        )));
    }
    if let MatchLayout::Guided { guide, window, .. } = layout {
        if guide.side() * window.upscale != side {
            return Err(Error::shape("guide does not match layer side"));
        }
    }
    let k = intrinsics.scaled_to(res);
    let cell = res / side;
    let channels = layout.match_channels();
    let rel = *pose2 * pose1.inverse();
    let mut counts = vec![0u32; side * side * channels];
    parallel::chunks_mut_sum(&mut counts, channels, |idx, out| {
        let (y1, x1) = (idx / side, idx % side);
        for row in y1 * cell..(y1 + 1) * cell {
            for col in x1 * cell..(x1 + 1) * cell {
                let Some(z) = depth1.valid(row, col) else {
                    continue;
                };
                let p2 = rel.apply(&k.backproject(row, col, z));
                let Some((u, v)) = k.project(&p2) else {
                    continue;
                };
                let Some((r2, c2)) = k.pixel_of(u, v) else {
                    continue;
                };
                let Some(d2) = depth2.valid(r2, c2) else {
                    continue;
                };
                if (p2.z - d2).abs() > OCCLUSION_TOLERANCE * d2 {
                    continue;
                }
                if let Some(w) = layout.channel(y1, x1, r2 / cell, c2 / cell) {
                    out[w] += 1;
                }
            }
        }
        0
    });
    PixelMatchCounts::from_parts(side, channels, counts)
}
