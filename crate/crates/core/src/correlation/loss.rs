use super::counts::PixelMatchCounts;
use super::CorrelationMap;
use crate::error::{Error, Result};
use crate::parallel;

const MARGIN: f64 = 1.0;

/// Triplet hinge loss of one correlation layer.
///
/// For every feature combination `(y, x, w)` with `n(y, x, w) > 0` the loss is
/// the mean of `max(0, C(y, x, q) - C(y, x, w) + 1)` over the negatives `q`
/// (`n(y, x, q) = 0`); a positive without negatives contributes zero. The layer
/// loss is the mean over all positives, or zero when there are none.
pub fn auxiliary_loss(c: &CorrelationMap, n: &PixelMatchCounts) -> Result<f64> {
    let (sum, positives) = layer_sums(c, n)?;
    Ok(if positives == 0 {
        0.0
    } else {
        sum / positives as f64
    })
}

/// Mean of [`auxiliary_loss`] over several layers.
pub fn total_auxiliary_loss(layers: &[(&CorrelationMap, &PixelMatchCounts)]) -> Result<f64> {
    if layers.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (c, n) in layers {
        total += auxiliary_loss(c, n)?;
    }
    Ok(total / layers.len() as f64)
}

fn layer_sums(c: &CorrelationMap, n: &PixelMatchCounts) -> Result<(f64, usize)> {
    if c.side() != n.side() || c.match_channels() != n.match_channels() {
        return Err(Error::shape(format!(
            "correlation {0}x{0}x{1} vs counts {2}x{2}x{3}",
            c.side(),
            c.match_channels(),
            n.side(),
            n.match_channels()
        )));
    }
    let s = c.side();
    let per_cell = parallel::map_range(s * s, |cell| {
        let (y, x) = (cell / s, cell % s);
        cell_loss(c.scores(y, x), n.at(y, x))
    });
    Ok(per_cell
        .into_iter()
        .fold((0.0, 0), |(sum, k), (cs, ck)| (sum + cs, k + ck)))
}

/// Sum of per-positive losses in one cell and the number of positives.
fn cell_loss(scores: &[f64], counts: &[u32]) -> (f64, usize) {
    let mut negatives: Vec<f64> = scores
        .iter()
        .zip(counts)
        .filter(|(_, n)| **n == 0)
        .map(|(v, _)| *v)
        .collect();
    let positives = counts.iter().filter(|n| **n > 0).count();
    if positives == 0 || negatives.is_empty() {
        return (0.0, positives);
    }
    negatives.sort_by(f64::total_cmp);
    let inv = 1.0 / negatives.len() as f64;
    let mut sum = 0.0;
    for (v, _) in scores.iter().zip(counts).filter(|(_, n)| **n > 0) {
        // hinge terms are monotone in the negative score, so only a sorted tail is active
        let first = negatives.partition_point(|q| q - v + MARGIN <= 0.0);
        let active: f64 = negatives[first..].iter().map(|q| q - v + MARGIN).sum();
        sum += active * inv;
    }
    (sum, positives)
}
