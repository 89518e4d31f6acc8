//! mIoU, PNM IoU, PNM-weighted loss and error rate by weight interval.

use crate::error::{Error, Result};
use crate::mask::{same_size, LabelMask, PnmConfig, WeightMap};
use crate::pnm::compute_weights;

/// Per-class weighted intersection and union mass.
///
/// Indexed by class id. With unit weights the masses are pixel counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedConfusion {
    pub intersection: Vec<f64>,
    pub union: Vec<f64>,
    /// Pixels that took part (not ignored, not excluded).
    pub pixel_count: u64,
}

impl WeightedConfusion {
    pub fn class_count(&self) -> usize {
        self.union.len()
    }

    /// IoU of class `k`, `None` when its union is empty.
    pub fn class_iou(&self, k: usize) -> Option<f64> {
        let union = *self.union.get(k)?;
        (union > 0.0).then(|| self.intersection[k] / union)
    }
}

/// Pixels that count towards scores: ground truth not ignored and, when a
/// weight map is given, not flagged excluded.
#[inline]
fn participates(gt: &LabelMask, t: u16, weights: Option<&WeightMap>, i: usize) -> bool {
    !gt.is_ignored(t) && !weights.is_some_and(|w| w.is_excluded(i))
}

/// Accumulates the intersection and union sums shared by mIoU and PNM IoU.
///
/// A prediction carrying the prediction mask's ignore label is wrong and adds
/// to no class's union.
pub fn accumulate(
    pred: &LabelMask,
    gt: &LabelMask,
    weights: Option<&WeightMap>,
) -> Result<WeightedConfusion> {
    same_size((pred.width(), pred.height()), (gt.width(), gt.height()))?;
    if let Some(w) = weights {
        same_size((w.width(), w.height()), (gt.width(), gt.height()))?;
    }
    let classes = pred.class_count().max(gt.class_count());
    let mut conf = WeightedConfusion {
        intersection: vec![0.0; classes],
        union: vec![0.0; classes],
        pixel_count: 0,
    };
    for (i, (&y, &t)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        if !participates(gt, t, weights, i) {
            continue;
        }
        let w = weights.map_or(1.0, |w| w.weight(i) as f64);
        conf.pixel_count += 1;
        conf.union[t as usize] += w;
        if y == t {
            conf.intersection[t as usize] += w;
        } else if !pred.is_ignored(y) {
            conf.union[y as usize] += w;
        }
    }
    Ok(conf)
}

/// Mean IoU and its per-class terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub mean: f64,
    /// `None` for classes with an empty union; those are left out of `mean`.
    pub per_class: Vec<Option<f64>>,
}

fn mean_iou(conf: &WeightedConfusion) -> Result<Scores> {
    let per_class: Vec<Option<f64>> = (0..conf.class_count()).map(|k| conf.class_iou(k)).collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::EmptyUnion);
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(Scores { mean, per_class })
}

/// Mean IoU of a confusion accumulated with unit weights.
pub fn miou(conf: &WeightedConfusion) -> Result<Scores> {
    mean_iou(conf)
}

/// PNM IoU of a confusion accumulated with a weight map. It is the same
/// per-class ratio as [`miou`], taken over weighted masses.
pub fn pnm_iou(conf: &WeightedConfusion) -> Result<Scores> {
    mean_iou(conf)
}

/// `(1/N) Σ ρ_i L_i` over non-excluded pixels. `losses` is row-major with the
/// weight map's layout.
pub fn pnm_loss(losses: &[f64], weights: &WeightMap) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            width: weights.width(),
            height: weights.height(),
            expected: weights.len(),
            found: losses.len(),
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (index, &loss) in losses.iter().enumerate() {
        if weights.is_excluded(index) {
            continue;
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index, value: loss });
        }
        sum += weights.weight(index) as f64 * loss;
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoPixels);
    }
    Ok(sum / n as f64)
}

/// One weight interval of a [`BinReport`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightBin {
    /// Inclusive; `-inf` for the underflow bin.
    pub lower: f64,
    /// Exclusive; `+inf` for the open top bin.
    pub upper: f64,
    pub errors: u64,
    pub total: u64,
}

impl WeightBin {
    /// `None` for an empty bin.
    pub fn error_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.errors as f64 / self.total as f64)
    }
}

/// Misclassification counts grouped by pixel weight.
///
/// Edges `e_0 < .. < e_m` give `m + 2` bins: `[-inf, e_0)`, the `m` closed
/// intervals `[e_j, e_j+1)` and the open bin `[e_m, inf)`. Every participating
/// pixel lands in exactly one bin.
#[derive(Clone, Debug, PartialEq)]
pub struct BinReport {
    pub edges: Vec<f64>,
    pub bins: Vec<WeightBin>,
}

impl BinReport {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.total).sum()
    }

    /// Error rates of the non-empty bins, in ascending weight order.
    pub fn defined_rates(&self) -> Vec<f64> {
        self.bins.iter().filter_map(WeightBin::error_rate).collect()
    }
}

/// Sixteen uniform bins on `[1, 5]`, i.e. edges `1, 1.25, .., 5`.
pub fn default_bin_edges() -> Vec<f64> {
    (0..=16).map(|i| 1.0 + 0.25 * i as f64).collect()
}

pub fn validate_edges(edges: &[f64]) -> Result<()> {
    let ascending = edges.windows(2).all(|p| p[0] < p[1]);
    if edges.is_empty() || !ascending || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidBinEdges);
    }
    Ok(())
}

pub fn error_rate_bins(
    pred: &LabelMask,
    gt: &LabelMask,
    weights: &WeightMap,
    edges: &[f64],
) -> Result<BinReport> {
    same_size((pred.width(), pred.height()), (gt.width(), gt.height()))?;
    same_size(
        (weights.width(), weights.height()),
        (gt.width(), gt.height()),
    )?;
    validate_edges(edges)?;

    let mut bins: Vec<WeightBin> = (0..=edges.len())
        .map(|j| WeightBin {
            lower: if j == 0 {
                f64::NEG_INFINITY
            } else {
                edges[j - 1]
            },
            upper: edges.get(j).copied().unwrap_or(f64::INFINITY),
            errors: 0,
            total: 0,
        })
        .collect();
    for (i, (&y, &t)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        if !participates(gt, t, Some(weights), i) {
            continue;
        }
        let w = weights.weight(i) as f64;
        let bin = &mut bins[edges.partition_point(|&e| e <= w)];
        bin.total += 1;
        bin.errors += (y != t) as u64;
    }
    Ok(BinReport {
        edges: edges.to_vec(),
        bins,
    })
}

/// Both scores for one prediction, with weights derived from ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub unit: WeightedConfusion,
    pub weighted: WeightedConfusion,
    pub miou: Scores,
    pub pnm_iou: Scores,
}

/// Computes weights from `gt` (never from `pred`) and scores `pred` with
/// mIoU and PNM IoU.
pub fn evaluate(pred: &LabelMask, gt: &LabelMask, config: &PnmConfig) -> Result<Evaluation> {
    let weights = compute_weights(gt, config)?;
    evaluate_with_weights(pred, gt, &weights)
}

pub fn evaluate_with_weights(
    pred: &LabelMask,
    gt: &LabelMask,
    weights: &WeightMap,
) -> Result<Evaluation> {
    // Unit scores skip the same pixels as the weighted ones.
    let unit_weights = WeightMap::new(
        weights.width(),
        weights.height(),
        vec![1.0; weights.len()],
        weights.excluded().to_vec(),
        weights.config(),
    )?;
    let unit = accumulate(pred, gt, Some(&unit_weights))?;
    let weighted = accumulate(pred, gt, Some(weights))?;
    Ok(Evaluation {
        miou: miou(&unit)?,
        pnm_iou: pnm_iou(&weighted)?,
        unit,
        weighted,
    })
}
