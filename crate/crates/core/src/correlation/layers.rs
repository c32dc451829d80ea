use std::sync::atomic::{AtomicU64, Ordering};

use super::{CorrelationKind, CorrelationMap, FeatureMap};
use crate::error::{Error, Result};
use crate::parallel;

/// Instrumentation for correlation kernels.
///
/// `dots` counts dot products actually evaluated, `padded` counts window slots
/// that fell outside the second map and were filled with zero.
#[derive(Debug, Default)]
pub struct DotCounter {
    dots: AtomicU64,
    padded: AtomicU64,
}

impl DotCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dots(&self) -> u64 {
        self.dots.load(Ordering::Relaxed)
    }

    pub fn padded(&self) -> u64 {
        self.padded.load(Ordering::Relaxed)
    }

    /// Every scored slot, evaluated or padded.
    pub fn total(&self) -> u64 {
        self.dots() + self.padded()
    }

    pub fn reset(&self) {
        self.dots.store(0, Ordering::Relaxed);
        self.padded.store(0, Ordering::Relaxed);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pair(f1: &FeatureMap, f2: &FeatureMap) -> Result<()> {
    if f1.side() != f2.side() || f1.channels() != f2.channels() {
        return Err(Error::shape(format!(
            "feature maps {}x{}x{} and {}x{}x{} differ",
            f1.side(),
            f1.side(),
            f1.channels(),
            f2.side(),
            f2.side(),
            f2.channels()
        )));
    }
    Ok(())
}

/// All-pairs correlation, `C(y1, x1, x2 * side + y2) = <F1(y1, x1), F2(y2, x2)>`.
pub fn extensive_correlation(f1: &FeatureMap, f2: &FeatureMap) -> Result<CorrelationMap> {
    extensive_correlation_counted(f1, f2, None)
}

pub fn extensive_correlation_counted(
    f1: &FeatureMap,
    f2: &FeatureMap,
    counter: Option<&DotCounter>,
) -> Result<CorrelationMap> {
    check_pair(f1, f2)?;
    let s = f1.side();
    let channels = s * s;
    let mut data = vec![0.0; s * s * channels];
    let dots = parallel::chunks_mut_sum(&mut data, channels, |cell, out| {
        let a = f1.at(cell / s, cell % s);
        let mut n = 0;
        for x2 in 0..s {
            for y2 in 0..s {
                out[x2 * s + y2] = dot(a, f2.at(y2, x2));
                n += 1;
            }
        }
        n
    });
    if let Some(c) = counter {
        c.dots.fetch_add(dots, Ordering::Relaxed);
    }
    CorrelationMap::from_parts(s, CorrelationKind::Extensive, data)
}

/// Geometry of a guided search window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedWindow {
    pub upscale: usize,
    pub border: f64,
    /// `border * upscale`, in fine cells.
    pub offset: usize,
    /// Window side `d = upscale * (1 + 2 * border)`.
    pub window: usize,
}

impl GuidedWindow {
    /// `border` is measured in coarse cells and must map to a whole number of
    /// fine cells.
    pub fn new(upscale: usize, border: f64) -> Result<Self> {
        if upscale == 0 {
            return Err(Error::InvalidArgument("upscale must be >= 1".into()));
        }
        if !(border >= 0.0) || !border.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "border must be >= 0, got {border}"
            )));
        }
        let offset = border * upscale as f64;
        if (offset - offset.round()).abs() > 1e-9 {
            return Err(Error::NonIntegerWindow { upscale, border });
        }
        let offset = offset.round() as usize;
        Ok(Self {
            upscale,
            border,
            offset,
            window: upscale + 2 * offset,
        })
    }

    pub fn match_channels(&self) -> usize {
        self.window * self.window
    }

    /// Top-left fine cell of the window for a coarse match `(my, mx)`.
    pub fn anchor(&self, my: usize, mx: usize) -> (isize, isize) {
        let u = self.upscale as isize;
        let o = self.offset as isize;
        (my as isize * u - o, mx as isize * u - o)
    }
}

/// Window-restricted correlation guided by a coarse match map.
///
/// For feature `(y1, x1)` the window is anchored at
/// `((M_y - b) * u, (M_x - b) * u)` of the coarse match of `(y1 / u, x1 / u)`;
/// channel `w = x2 * d + y2`. Slots outside `f2` score zero.
pub fn guided_correlation(
    f1: &FeatureMap,
    f2: &FeatureMap,
    guide: &MatchMap,
    border: f64,
    upscale: usize,
) -> Result<CorrelationMap> {
    guided_correlation_counted(f1, f2, guide, border, upscale, None)
}

pub fn guided_correlation_counted(
    f1: &FeatureMap,
    f2: &FeatureMap,
    guide: &MatchMap,
    border: f64,
    upscale: usize,
    counter: Option<&DotCounter>,
) -> Result<CorrelationMap> {
    check_pair(f1, f2)?;
    let win = GuidedWindow::new(upscale, border)?;
    let s = f1.side();
    if guide.side() * upscale != s {
        return Err(Error::shape(format!(
            "guide of side {} upscaled by {upscale} does not match feature side {s}",
            guide.side()
        )));
    }
    let d = win.window;
    let channels = d * d;
    let total = (s * s * channels) as u64;
    let mut data = vec![0.0; s * s * channels];
    let dots = parallel::chunks_mut_sum(&mut data, channels, |cell, out| {
        let (y1, x1) = (cell / s, cell % s);
        let (my, mx) = guide.at(y1 / upscale, x1 / upscale);
        let (row0, col0) = win.anchor(my, mx);
        let a = f1.at(y1, x1);
        let mut n = 0;
        for x2 in 0..d {
            let c = col0 + x2 as isize;
            if c < 0 || c >= s as isize {
                continue;
            }
            for y2 in 0..d {
                let r = row0 + y2 as isize;
                if r < 0 || r >= s as isize {
                    continue;
                }
                out[x2 * d + y2] = dot(a, f2.at(r as usize, c as usize));
                n += 1;
            }
        }
        n
    });
    if let Some(c) = counter {
        c.dots.fetch_add(dots, Ordering::Relaxed);
        c.padded.fetch_add(total - dots, Ordering::Relaxed);
    }
    CorrelationMap::from_parts(s, CorrelationKind::Guided(win), data)
}

/// Best match of every feature of an extensive layer, as coordinates in the
/// second map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchMap {
    side: usize,
    my: Vec<usize>,
    mx: Vec<usize>,
}

impl MatchMap {
    pub fn new(side: usize, my: Vec<usize>, mx: Vec<usize>) -> Result<Self> {
        if side == 0 || my.len() != side * side || mx.len() != side * side {
            return Err(Error::shape(format!("match map of side {side}")));
        }
        if my.iter().chain(&mx).any(|v| *v >= side) {
            return Err(Error::InvalidArgument(format!(
                "match coordinates must lie in [0, {side})"
            )));
        }
        Ok(Self { side, my, mx })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `(M_y, M_x)` at `(y, x)`.
    pub fn at(&self, y: usize, x: usize) -> (usize, usize) {
        let i = y * self.side + x;
        (self.my[i], self.mx[i])
    }
}

fn require_extensive(c: &CorrelationMap) -> Result<()> {
    match c.kind() {
        CorrelationKind::Extensive => Ok(()),
        CorrelationKind::Guided(_) => Err(Error::shape(
            "guidance must come from an extensive correlation map",
        )),
    }
}

/// Argmax match map, `M_y = w_max mod s`, `M_x = w_max div s`. Ties go to the
/// smallest `w`.
pub fn match_map(c: &CorrelationMap) -> Result<MatchMap> {
    require_extensive(c)?;
    let s = c.side();
    let best = parallel::map_range(s * s, |cell| {
        let scores = c.scores(cell / s, cell % s);
        let mut w_max = 0;
        for (w, v) in scores.iter().enumerate() {
            if *v > scores[w_max] {
                w_max = w;
            }
        }
        w_max
    });
    MatchMap::new(
        s,
        best.iter().map(|w| w % s).collect(),
        best.iter().map(|w| w / s).collect(),
    )
}

/// Softmax-weighted expected match coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMatchMap {
    pub side: usize,
    pub my: Vec<f64>,
    pub mx: Vec<f64>,
}

impl SoftMatchMap {
    pub fn at(&self, y: usize, x: usize) -> (f64, f64) {
        let i = y * self.side + x;
        (self.my[i], self.mx[i])
    }
}

/// Differentiable relaxation of [`match_map`]: coordinates weighted by
/// `softmax(C / temperature)`.
pub fn soft_match_map(c: &CorrelationMap, temperature: f64) -> Result<SoftMatchMap> {
    require_extensive(c)?;
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let s = c.side();
    let coords = parallel::map_range(s * s, |cell| {
        let scores = c.scores(cell / s, cell % s);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut ey, mut ex) = (0.0, 0.0, 0.0);
        for (w, v) in scores.iter().enumerate() {
            let p = ((v - max) / temperature).exp();
            z += p;
            ey += p * (w % s) as f64;
            ex += p * (w / s) as f64;
        }
        (ey / z, ex / z)
    });
    Ok(SoftMatchMap {
        side: s,
        my: coords.iter().map(|c| c.0).collect(),
        mx: coords.iter().map(|c| c.1).collect(),
    })
}
