//! Pixel null model (PNM) weight maps and boundary-aware segmentation
//! metrics.
//!
//! The PNM of a pixel is the probability that it keeps its label when the
//! labels of the d×d patch around it are randomly permuted, i.e. the fraction
//! of the patch sharing its label. Pixels near boundaries, inside small
//! objects or in minority classes score low; a decreasing transform turns
//! that into a weight usable for losses ([`metrics::pnm_loss`]) and for
//! evaluation ([`metrics::pnm_iou`]).
//!
//! ```
//! use pnm_core::{compute_weights, LabelMask, PnmConfig};
//!
//! let mask = LabelMask::from_fn(8, 8, None, |x, _| (x >= 4) as u16).unwrap();
//! let weights = compute_weights(&mask, &PnmConfig::with_scale(3).unwrap()).unwrap();
//! assert_eq!(weights.weight(0), 1.0);
//! assert!(weights.weight(3) > 1.0);
//! ```

pub mod error;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod pnm;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use mask::{
    validate_mask, BorderPolicy, Label, LabelMask, PnmConfig, PnmCount, PnmMap, Transform,
    WeightMap, DEFAULT_IGNORE_LABEL, DEFAULT_MAX_LABEL, DEFAULT_SCALE,
};
pub use metrics::{
    accumulate, default_bin_edges, error_rate_bins, evaluate, evaluate_with_weights, miou, pnm_iou,
    pnm_loss, BinReport, Evaluation, Scores, WeightedConfusion,
};
pub use pnm::{
    compute_pnm_banded, compute_pnm_fast, compute_pnm_naive, compute_weights, transform_weights,
    PatchWindow,
};
pub use synthetic::{
    evaluate_zigzag_series, fixture, trivial_split_mask, zigzag_mask, Fixture, SeriesRow,
    ZigzagSpec,
};
