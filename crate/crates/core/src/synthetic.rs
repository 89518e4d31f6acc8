//! Synthetic masks: the zigzag series, the trivial left/right segmenter and
//! small geometric fixtures.
//!
//! Rasterization is by pixel centre: pixel `(x, y)` samples the continuous
//! image at `(x + 0.5, y + 0.5)`, with the image spanning `[0, W] × [0, H]`.

use crate::error::{Error, Result};
use crate::mask::{Label, LabelMask, PnmConfig};
use crate::metrics::evaluate;

/// One image of the zigzag series.
///
/// Image `n` joins the top-edge midpoint to the odd points of the
/// `2^(n+1)`-section of the right and left edges in alternation (first on
/// the right, third on the left, ...) and ends at the bottom-edge midpoint.
/// Everything left of that polyline is `class_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZigzagSpec {
    pub n: u32,
    pub width: usize,
    pub height: usize,
    pub class_a: Label,
    pub class_b: Label,
}

/// Largest supported series index; keeps the exact rasterization arithmetic
/// within `i128`.
pub const MAX_ZIGZAG_N: u32 = 30;

impl ZigzagSpec {
    pub fn new(n: u32, width: usize, height: usize) -> Result<Self> {
        let spec = Self {
            n,
            width,
            height,
            class_a: 0,
            class_b: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_classes(mut self, class_a: Label, class_b: Label) -> Self {
        self.class_a = class_a;
        self.class_b = class_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_ZIGZAG_N {
            return Err(Error::InvalidGeometry(format!(
                "zigzag index must be in 1..={MAX_ZIGZAG_N}, got {}",
                self.n
            )));
        }
        let min = 1usize << (self.n + 1);
        if self.width < min || self.height < min {
            return Err(Error::InvalidGeometry(format!(
                "zigzag {} needs at least {min}x{min} pixels, got {}x{}",
                self.n, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Polyline vertices in continuous image coordinates, top to bottom.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        self.scaled_vertices()
            .into_iter()
            .map(|(x, y)| {
                let s = self.scale() as f64;
                (x as f64 / s, y as f64 / s)
            })
            .collect()
    }

    /// Common denominator: every vertex and pixel centre is an integer
    /// multiple of `1 / scale`.
    fn scale(&self) -> i128 {
        1i128 << (self.n + 2)
    }

    fn scaled_vertices(&self) -> Vec<(i128, i128)> {
        let s = self.scale();
        let (w, h) = (self.width as i128, self.height as i128);
        let sections = 1i128 << (self.n + 1);
        let mut v = Vec::with_capacity((1 << self.n) + 2);
        v.push((w * s / 2, 0));
        for k in 1..=(1i128 << self.n) {
            let y = (2 * k - 1) * h * s / sections;
            let x = if k % 2 == 1 { w * s } else { 0 };
            v.push((x, y));
        }
        v.push((w * s / 2, h * s));
        v
    }
}

pub fn zigzag_mask(spec: &ZigzagSpec) -> Result<LabelMask> {
    spec.validate()?;
    let s = spec.scale();
    let vertices = spec.scaled_vertices();
    let mut segment = 0usize;
    let mut labels = Vec::with_capacity(spec.width * spec.height);
    for row in 0..spec.height {
        let py = (2 * row as i128 + 1) * s / 2;
        while vertices[segment + 1].1 < py {
            segment += 1;
        }
        let (x0, y0) = vertices[segment];
        let (x1, y1) = vertices[segment + 1];
        for col in 0..spec.width {
            let px = (2 * col as i128 + 1) * s / 2;
            // px <= boundary x at py, cross-multiplied by (y1 - y0) > 0
            let on_left = (px - x0) * (y1 - y0) <= (py - y0) * (x1 - x0);
            labels.push(if on_left { spec.class_a } else { spec.class_b });
        }
    }
    LabelMask::new(spec.width, spec.height, labels, None)
}

/// Columns left of `width / 2` (rounded down) get `class_a`, the rest `class_b`.
pub fn trivial_split_mask(
    width: usize,
    height: usize,
    class_a: Label,
    class_b: Label,
) -> Result<LabelMask> {
    if width < 2 || height == 0 {
        return Err(Error::InvalidGeometry(format!(
            "trivial split needs width >= 2 and height >= 1, got {width}x{height}"
        )));
    }
    let half = width / 2;
    LabelMask::from_fn(width, height, None, |x, _| {
        if x < half {
            class_a
        } else {
            class_b
        }
    })
}

/// Geometric test patterns. Background is class 0, shapes are class 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fixture {
    /// Filled disk centred on the canvas.
    Disk { radius: f64 },
    /// Two same-class squares, the first centred at a quarter of the width,
    /// the second at three quarters, both vertically centred.
    TwoSquares { small: usize, large: usize },
    /// Full-height vertical stripe centred horizontally.
    Stripe { thickness: usize },
    /// `((x / cell) + (y / cell)) % 2`, so the top-left cell is class 0.
    Checkerboard { cell: usize },
    /// Left half class 0, right half class 1.
    VerticalSplit,
}

fn out_of_canvas(what: &str, width: usize, height: usize) -> Error {
    Error::InvalidGeometry(format!("{what} does not fit a {width}x{height} canvas"))
}

/// Column or row range of a square of side `side` centred on `center`.
fn centred_span(center: usize, side: usize) -> Option<std::ops::Range<usize>> {
    let start = center.checked_sub(side / 2)?;
    Some(start..start + side)
}

pub fn fixture(kind: Fixture, width: usize, height: usize) -> Result<LabelMask> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyDimensions { width, height });
    }
    match kind {
        Fixture::Disk { radius } => {
            let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
            if radius.is_nan() || radius <= 0.0 || radius > cx || radius > cy {
                return Err(out_of_canvas("disk", width, height));
            }
            LabelMask::from_fn(width, height, None, |x, y| {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                (dx * dx + dy * dy <= radius * radius) as Label
            })
        }
        Fixture::TwoSquares { small, large } => {
            let spans = (|| {
                let sx = centred_span(width / 4, small)?;
                let sy = centred_span(height / 2, small)?;
                let lx = centred_span(3 * width / 4, large)?;
                let ly = centred_span(height / 2, large)?;
                let fits = small > 0
                    && large > 0
                    && sx.end < lx.start
                    && lx.end <= width
                    && sy.end <= height
                    && ly.end <= height;
                fits.then_some((sx, sy, lx, ly))
            })();
            let (sx, sy, lx, ly) =
                spans.ok_or_else(|| out_of_canvas("two squares", width, height))?;
            LabelMask::from_fn(width, height, None, |x, y| {
                ((sx.contains(&x) && sy.contains(&y)) || (lx.contains(&x) && ly.contains(&y)))
                    as Label
            })
        }
        Fixture::Stripe { thickness } => {
            if thickness == 0 || thickness >= width {
                return Err(out_of_canvas("stripe", width, height));
            }
            let start = (width - thickness) / 2;
            let stripe = start..start + thickness;
            LabelMask::from_fn(width, height, None, |x, _| stripe.contains(&x) as Label)
        }
        Fixture::Checkerboard { cell } => {
            if cell == 0 {
                return Err(Error::InvalidGeometry(
                    "checkerboard cell must be positive".into(),
                ));
            }
            LabelMask::from_fn(width, height, None, |x, y| {
                ((x / cell + y / cell) % 2) as Label
            })
        }
        Fixture::VerticalSplit => trivial_split_mask(width, height, 0, 1),
    }
}

/// Scores of the trivial segmenter on one zigzag image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow {
    pub n: u32,
    pub miou: f64,
    pub pnm_iou: f64,
}

/// Evaluates the trivial split prediction against zigzag images `ns`.
pub fn evaluate_zigzag_series(
    ns: impl IntoIterator<Item = u32>,
    width: usize,
    height: usize,
    config: &PnmConfig,
) -> Result<Vec<SeriesRow>> {
    let pred = trivial_split_mask(width, height, 0, 1)?;
    ns.into_iter()
        .map(|n| {
            let gt = zigzag_mask(&ZigzagSpec::new(n, width, height)?)?;
            let eval = evaluate(&pred, &gt, config)?;
            Ok(SeriesRow {
                n,
                miou: eval.miou.mean,
                pnm_iou: eval.pnm_iou.mean,
            })
        })
        .collect()
}

/// Pixels with a 4-neighbour of a different label.
pub fn boundary_pixels(mask: &LabelMask) -> Vec<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let l = mask.get(x, y);
            out[y * w + x] = (x > 0 && mask.get(x - 1, y) != l)
                || (x + 1 < w && mask.get(x + 1, y) != l)
                || (y > 0 && mask.get(x, y - 1) != l)
                || (y + 1 < h && mask.get(x, y + 1) != l);
        }
    }
    out
}
