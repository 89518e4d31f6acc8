//! Label masks, PNM probability maps, weight maps and the configuration
//! that ties them together.

use std::fmt;

use crate::error::{Error, Result};

/// Class identifier stored in a [`LabelMask`].
pub type Label = u16;

/// Largest class id accepted by [`validate_mask`] unless told otherwise.
pub const DEFAULT_MAX_LABEL: Label = 255;

/// Void label used by 8-bit dataset masks.
pub const DEFAULT_IGNORE_LABEL: Label = 255;

/// Default locality scale.
pub const DEFAULT_SCALE: u16 = 35;

/// A rectangular, row-major grid of class identifiers.
///
/// Used for both ground truth and predictions. Pixels carrying
/// `ignore_label` take no part in PNM counting, losses or metrics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
    ignore_label: Option<Label>,
}

impl LabelMask {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<Label>,
        ignore_label: Option<Label>,
    ) -> Result<Self> {
        check_dimensions(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
            ignore_label,
        })
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        ignore_label: Option<Label>,
        mut f: impl FnMut(usize, usize) -> Label,
    ) -> Result<Self> {
        check_dimensions(width, height, width * height)?;
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels, ignore_label)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn ignore_label(&self) -> Option<Label> {
        self.ignore_label
    }

    pub fn with_ignore_label(mut self, ignore_label: Option<Label>) -> Self {
        self.ignore_label = ignore_label;
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn is_ignored(&self, label: Label) -> bool {
        self.ignore_label == Some(label)
    }

    /// One past the largest non-ignore label, or 0 when every pixel is ignored.
    pub fn class_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| !self.is_ignored(l))
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn same_size(&self, other_width: usize, other_height: usize) -> Result<()> {
        same_size((self.width, self.height), (other_width, other_height))
    }
}

/// Checks every [`LabelMask`] invariant, treating labels above `max_label`
/// (other than the ignore label) as invalid.
pub fn validate_mask(mask: &LabelMask, max_label: Label) -> Result<()> {
    check_dimensions(mask.width, mask.height, mask.labels.len())?;
    match mask
        .labels
        .iter()
        .position(|&l| l > max_label && !mask.is_ignored(l))
    {
        Some(index) => Err(Error::LabelOutOfRange {
            index,
            label: mask.labels[index],
            max: max_label,
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_dimensions(width: usize, height: usize, found: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyDimensions { width, height });
    }
    let expected = width
        .checked_mul(height)
        .ok_or(Error::EmptyDimensions { width, height })?;
    if expected != found {
        return Err(Error::DimensionMismatch {
            width,
            height,
            expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn same_size(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::SizeMismatch {
            left_width: left.0,
            left_height: left.1,
            right_width: right.0,
            right_height: right.1,
        });
    }
    Ok(())
}

/// Map from PNM probability to pixel weight. All three are strictly
/// decreasing on (0, 1] and send 1 to 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Transform {
    /// `1 - ln p`
    #[default]
    Log,
    /// `2 - p`
    LinearComplement,
    /// `1 / p`
    Reciprocal,
}

impl Transform {
    pub const ALL: [Transform; 3] = [
        Transform::Log,
        Transform::LinearComplement,
        Transform::Reciprocal,
    ];

    #[inline]
    pub fn apply(self, p: f64) -> f64 {
        match self {
            Transform::Log => 1.0 - p.ln(),
            Transform::LinearComplement => 2.0 - p,
            Transform::Reciprocal => 1.0 / p,
        }
    }

    /// Code used by the weight map file header.
    pub fn code(self) -> u8 {
        match self {
            Transform::Log => 1,
            Transform::LinearComplement => 2,
            Transform::Reciprocal => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Transform::Log),
            2 => Ok(Transform::LinearComplement),
            3 => Ok(Transform::Reciprocal),
            other => Err(Error::UnknownTransform(other)),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Log => "log",
            Transform::LinearComplement => "linear",
            Transform::Reciprocal => "reciprocal",
        })
    }
}

/// How the patch behaves where it leaves the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BorderPolicy {
    /// Intersect the patch with the image; normalize by the clipped population.
    #[default]
    ClipNormalized,
    /// Mirror the image at its edges (edge pixel repeated); the patch always
    /// holds d² samples.
    Reflect,
}

impl BorderPolicy {
    pub fn code(self) -> u8 {
        match self {
            BorderPolicy::ClipNormalized => 0,
            BorderPolicy::Reflect => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(BorderPolicy::ClipNormalized),
            1 => Ok(BorderPolicy::Reflect),
            other => Err(Error::UnknownBorder(other)),
        }
    }
}

impl fmt::Display for BorderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BorderPolicy::ClipNormalized => "clip",
            BorderPolicy::Reflect => "reflect",
        })
    }
}

/// Parameters of a PNM computation. The logarithm in [`Transform::Log`] is
/// always the natural one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PnmConfig {
    pub d: u16,
    pub transform: Transform,
    pub border: BorderPolicy,
}

impl Default for PnmConfig {
    fn default() -> Self {
        Self {
            d: DEFAULT_SCALE,
            transform: Transform::Log,
            border: BorderPolicy::ClipNormalized,
        }
    }
}

impl PnmConfig {
    pub fn new(d: u16, transform: Transform, border: BorderPolicy) -> Result<Self> {
        let config = Self {
            d,
            transform,
            border,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_scale(d: u16) -> Result<Self> {
        Self::new(d, Transform::default(), BorderPolicy::default())
    }

    pub fn validate(&self) -> Result<()> {
        validate_scale(self.d as u32)
    }

    /// Half-width of the patch.
    #[inline]
    pub fn radius(&self) -> usize {
        self.d as usize / 2
    }
}

pub fn validate_scale(d: u32) -> Result<()> {
    if d == 0 || d.is_multiple_of(2) {
        return Err(Error::InvalidScale(d));
    }
    Ok(())
}

/// Same-label and population counts of one pixel's patch.
///
/// A zero population marks an excluded (ignore-labeled) pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PnmCount {
    pub same: u32,
    pub total: u32,
}

impl PnmCount {
    pub const EXCLUDED: PnmCount = PnmCount { same: 0, total: 0 };

    #[inline]
    pub fn is_excluded(self) -> bool {
        self.total == 0
    }

    /// The probability `same / total`; 1 for excluded pixels.
    #[inline]
    pub fn probability(self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.same as f64 / self.total as f64
        }
    }
}

/// Per-pixel PNM probabilities kept as exact integer counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PnmMap {
    width: usize,
    height: usize,
    d: u16,
    border: BorderPolicy,
    counts: Vec<PnmCount>,
}

impl PnmMap {
    /// Checks that every non-excluded pixel has `1 <= same <= total`.
    pub fn from_counts(
        width: usize,
        height: usize,
        d: u16,
        border: BorderPolicy,
        counts: Vec<PnmCount>,
    ) -> Result<Self> {
        check_dimensions(width, height, counts.len())?;
        validate_scale(d as u32)?;
        if let Some(index) = counts
            .iter()
            .position(|c| c.total != 0 && (c.same == 0 || c.same > c.total))
        {
            return Err(Error::InvalidCounts {
                index,
                same: counts[index].same,
                total: counts[index].total,
            });
        }
        Ok(Self {
            width,
            height,
            d,
            border,
            counts,
        })
    }

    pub(crate) fn from_counts_unchecked(
        width: usize,
        height: usize,
        d: u16,
        border: BorderPolicy,
        counts: Vec<PnmCount>,
    ) -> Self {
        debug_assert_eq!(counts.len(), width * height);
        Self {
            width,
            height,
            d,
            border,
            counts,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d(&self) -> u16 {
        self.d
    }

    pub fn border(&self) -> BorderPolicy {
        self.border
    }

    pub fn counts(&self) -> &[PnmCount] {
        &self.counts
    }

    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        self.counts[index].probability()
    }

    #[inline]
    pub fn is_excluded(&self, index: usize) -> bool {
        self.counts[index].is_excluded()
    }

    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|c| c.probability()).collect()
    }
}

/// Per-pixel weights with a parallel exclusion flag.
///
/// Excluded pixels hold weight 1 and must be skipped by every consumer.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    weights: Vec<f32>,
    excluded: Vec<bool>,
    config: PnmConfig,
}

impl WeightMap {
    pub fn new(
        width: usize,
        height: usize,
        weights: Vec<f32>,
        excluded: Vec<bool>,
        config: PnmConfig,
    ) -> Result<Self> {
        check_dimensions(width, height, weights.len())?;
        check_dimensions(width, height, excluded.len())?;
        config.validate()?;
        if let Some(index) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeight {
                index,
                value: weights[index],
            });
        }
        Ok(Self {
            width,
            height,
            weights,
            excluded,
            config,
        })
    }

    /// Unit weights everywhere, as produced by `d = 1`.
    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        let n = width * height;
        let config = PnmConfig {
            d: 1,
            ..PnmConfig::default()
        };
        Self::new(width, height, vec![1.0; n], vec![false; n], config)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn config(&self) -> PnmConfig {
        self.config
    }

    #[inline]
    pub fn weight(&self, index: usize) -> f32 {
        self.weights[index]
    }

    #[inline]
    pub fn is_excluded(&self, index: usize) -> bool {
        self.excluded[index]
    }

    /// Smallest and largest weight over non-excluded pixels.
    pub fn range(&self) -> Option<(f32, f32)> {
        self.weights
            .iter()
            .zip(&self.excluded)
            .filter(|(_, &e)| !e)
            .fold(None, |acc, (&w, _)| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            })
    }
}
