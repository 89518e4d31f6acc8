//! Pixel null model kernels.
//!
//! The PNM of pixel `i` at scale `d` is the fraction of pixels in the d×d
//! patch centred on `i` that share its label. Two kernels compute it:
//!
//! - [`compute_pnm_naive`] counts every patch from scratch, O(d²) per pixel.
//!   It is the reference the other kernel is checked against.
//! - [`compute_pnm_fast`] keeps one class histogram per image column over
//!   the current band of `d` rows, and a window histogram that slides along
//!   the row by adding the entering column histogram and subtracting the
//!   leaving one. Moving down a row touches two pixels per column, moving
//!   right touches `2K` counters, so the cost per pixel does not depend on `d`.
//!
//! Both produce exact integer counts, so their outputs compare bit-exactly.
//! Ignore-labeled pixels are left out of every count and get
//! [`PnmCount::EXCLUDED`].

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::{BorderPolicy, LabelMask, PnmConfig, PnmCount, PnmMap, Transform, WeightMap};

/// The patch around one pixel after intersecting it with the image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchWindow {
    pub center: (usize, usize),
    pub d: usize,
    /// Half-open column range.
    pub x: Range<usize>,
    /// Half-open row range.
    pub y: Range<usize>,
}

impl PatchWindow {
    pub fn new(center: (usize, usize), d: usize, width: usize, height: usize) -> Self {
        let r = d / 2;
        let (cx, cy) = center;
        Self {
            center,
            d,
            x: cx.saturating_sub(r)..(cx + r + 1).min(width),
            y: cy.saturating_sub(r)..(cy + r + 1).min(height),
        }
    }

    pub fn area(&self) -> usize {
        self.x.len() * self.y.len()
    }
}

/// Index of `i` in a signal of length `n` extended by mirroring with the
/// edge sample repeated (`.. 1 0 | 0 1 .. n-1 | n-1 n-2 ..`).
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

#[inline]
fn source_index(i: isize, n: usize, border: BorderPolicy) -> Option<usize> {
    match border {
        BorderPolicy::ClipNormalized => (i >= 0 && (i as usize) < n).then_some(i as usize),
        BorderPolicy::Reflect => Some(mirror(i, n)),
    }
}

/// Reference kernel: counts every patch pixel by pixel.
pub fn compute_pnm_naive(mask: &LabelMask, config: &PnmConfig) -> Result<PnmMap> {
    config.validate()?;
    let (w, h) = (mask.width(), mask.height());
    let labels = mask.labels();
    let r = config.radius() as isize;
    let mut counts = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let center = labels[y * w + x];
            if mask.is_ignored(center) {
                counts.push(PnmCount::EXCLUDED);
                continue;
            }
            let mut same = 0u32;
            let mut total = 0u32;
            match config.border {
                BorderPolicy::ClipNormalized => {
                    let patch = PatchWindow::new((x, y), config.d as usize, w, h);
                    for py in patch.y.clone() {
                        for &l in &labels[py * w + patch.x.start..py * w + patch.x.end] {
                            if !mask.is_ignored(l) {
                                total += 1;
                                same += (l == center) as u32;
                            }
                        }
                    }
                }
                BorderPolicy::Reflect => {
                    for dy in -r..=r {
                        let py = mirror(y as isize + dy, h);
                        for dx in -r..=r {
                            let px = mirror(x as isize + dx, w);
                            let l = labels[py * w + px];
                            if !mask.is_ignored(l) {
                                total += 1;
                                same += (l == center) as u32;
                            }
                        }
                    }
                }
            }
            counts.push(PnmCount { same, total });
        }
    }
    Ok(PnmMap::from_counts_unchecked(
        w,
        h,
        config.d,
        config.border,
        counts,
    ))
}

/// Labels remapped to dense class slots; ignore pixels map to `None`.
struct DenseLabels {
    slots: Vec<Option<u16>>,
    classes: usize,
}

impl DenseLabels {
    fn new(mask: &LabelMask) -> Self {
        let mut table = vec![u16::MAX; mask.class_count()];
        let mut classes = 0usize;
        let slots = mask
            .labels()
            .iter()
            .map(|&l| {
                if mask.is_ignored(l) {
                    return None;
                }
                let entry = &mut table[l as usize];
                if *entry == u16::MAX {
                    *entry = classes as u16;
                    classes += 1;
                }
                Some(*entry)
            })
            .collect();
        Self { slots, classes }
    }
}

/// Sliding-histogram kernel. Output is identical to [`compute_pnm_naive`].
pub fn compute_pnm_fast(mask: &LabelMask, config: &PnmConfig) -> Result<PnmMap> {
    config.validate()?;
    let dense = DenseLabels::new(mask);
    let (w, h) = (mask.width(), mask.height());
    let mut counts = vec![PnmCount::EXCLUDED; w * h];
    fill_band(&dense, w, h, config, 0..h, &mut counts);
    Ok(PnmMap::from_counts_unchecked(
        w,
        h,
        config.d,
        config.border,
        counts,
    ))
}

/// [`compute_pnm_fast`] split over horizontal bands processed in parallel.
/// Each band rebuilds its own histograms, so the result does not depend on
/// `bands`.
pub fn compute_pnm_banded(mask: &LabelMask, config: &PnmConfig, bands: usize) -> Result<PnmMap> {
    config.validate()?;
    let dense = DenseLabels::new(mask);
    let (w, h) = (mask.width(), mask.height());
    let rows_per_band = h.div_ceil(bands.max(1));
    let mut counts = vec![PnmCount::EXCLUDED; w * h];
    counts
        .par_chunks_mut(rows_per_band * w)
        .enumerate()
        .for_each(|(band, out)| {
            let start = band * rows_per_band;
            let rows = start..(start + rows_per_band).min(h);
            fill_band(&dense, w, h, config, rows, out);
        });
    Ok(PnmMap::from_counts_unchecked(
        w,
        h,
        config.d,
        config.border,
        counts,
    ))
}

/// Column histograms over the rows currently inside the window.
struct ColumnHistograms {
    classes: usize,
    hist: Vec<u32>,
    totals: Vec<u32>,
}

impl ColumnHistograms {
    fn new(width: usize, classes: usize) -> Self {
        Self {
            classes,
            hist: vec![0; width * classes],
            totals: vec![0; width],
        }
    }

    fn add_row(&mut self, row: &[Option<u16>]) {
        for (x, slot) in row.iter().enumerate() {
            if let Some(c) = *slot {
                self.hist[x * self.classes + c as usize] += 1;
                self.totals[x] += 1;
            }
        }
    }

    fn remove_row(&mut self, row: &[Option<u16>]) {
        for (x, slot) in row.iter().enumerate() {
            if let Some(c) = *slot {
                self.hist[x * self.classes + c as usize] -= 1;
                self.totals[x] -= 1;
            }
        }
    }

    #[inline]
    fn column(&self, x: usize) -> &[u32] {
        &self.hist[x * self.classes..(x + 1) * self.classes]
    }
}

fn fill_band(
    dense: &DenseLabels,
    w: usize,
    h: usize,
    config: &PnmConfig,
    rows: Range<usize>,
    out: &mut [PnmCount],
) {
    if rows.is_empty() {
        return;
    }
    let r = config.radius() as isize;
    let border = config.border;
    let k = dense.classes;
    let row_slots = |y: usize| &dense.slots[y * w..(y + 1) * w];

    let mut columns = ColumnHistograms::new(w, k);
    let top = rows.start as isize;
    for i in top - r..=top + r {
        if let Some(y) = source_index(i, h, border) {
            columns.add_row(row_slots(y));
        }
    }

    let mut window = vec![0u32; k];
    for y in rows.clone() {
        if y > rows.start {
            let yi = y as isize;
            if let Some(old) = source_index(yi - r - 1, h, border) {
                columns.remove_row(row_slots(old));
            }
            if let Some(new) = source_index(yi + r, h, border) {
                columns.add_row(row_slots(new));
            }
        }

        window.fill(0);
        let mut window_total = 0u32;
        for i in -r..=r {
            if let Some(x) = source_index(i, w, border) {
                for (acc, &c) in window.iter_mut().zip(columns.column(x)) {
                    *acc += c;
                }
                window_total += columns.totals[x];
            }
        }

        let out_row = &mut out[(y - rows.start) * w..(y - rows.start + 1) * w];
        let slots = row_slots(y);
        for x in 0..w {
            if x > 0 {
                let xi = x as isize;
                let entering = source_index(xi + r, w, border);
                let leaving = source_index(xi - r - 1, w, border);
                if let Some(e) = entering {
                    for (acc, &c) in window.iter_mut().zip(columns.column(e)) {
                        *acc += c;
                    }
                    window_total += columns.totals[e];
                }
                if let Some(l) = leaving {
                    for (acc, &c) in window.iter_mut().zip(columns.column(l)) {
                        *acc -= c;
                    }
                    window_total -= columns.totals[l];
                }
            }
            out_row[x] = match slots[x] {
                Some(c) => PnmCount {
                    same: window[c as usize],
                    total: window_total,
                },
                None => PnmCount::EXCLUDED,
            };
        }
    }
}

/// Applies `transform` elementwise. Excluded pixels get weight 1 and keep
/// their exclusion flag.
pub fn transform_weights(pnm: &PnmMap, transform: Transform) -> Result<WeightMap> {
    let n = pnm.counts().len();
    let mut weights = Vec::with_capacity(n);
    let mut excluded = Vec::with_capacity(n);
    for (index, count) in pnm.counts().iter().enumerate() {
        if count.is_excluded() {
            weights.push(1.0f32);
            excluded.push(true);
            continue;
        }
        let p = count.probability();
        if p.is_nan() || p <= 0.0 {
            return Err(Error::NonPositiveProbability { index, value: p });
        }
        weights.push(transform.apply(p) as f32);
        excluded.push(false);
    }
    let config = PnmConfig {
        d: pnm.d(),
        transform,
        border: pnm.border(),
    };
    WeightMap::new(pnm.width(), pnm.height(), weights, excluded, config)
}

/// PNM followed by the configured transform.
pub fn compute_weights(mask: &LabelMask, config: &PnmConfig) -> Result<WeightMap> {
    let pnm = compute_pnm_fast(mask, config)?;
    transform_weights(&pnm, config.transform)
}
