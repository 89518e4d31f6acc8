//! File formats: label mask images, the raw label sidecar, the binary weight
//! map file and CSV reports.
//!
//! # Weight map file
//!
//! All integers little-endian.
//!
//! | offset | size | field                                          |
//! |--------|------|------------------------------------------------|
//! | 0      | 4    | magic `PNMW`                                   |
//! | 4      | 1    | version, `1`                                   |
//! | 5      | 4    | width (u32)                                    |
//! | 9      | 4    | height (u32)                                   |
//! | 13     | 2    | d (u16)                                        |
//! | 15     | 1    | transform: 1 log, 2 linear, 3 reciprocal       |
//! | 16     | 1    | border: 0 clip-normalized, 1 reflect           |
//! | 17     | 4·WH | weights, f32, row-major                        |
//! | ..     | ⌈WH/8⌉ | exclusion bits, row-major, LSB first         |
//!
//! Weights are rounded to f32 (nearest-even) when the map is built, so the
//! file holds exactly the in-memory values.
//!
//! # Raw label file
//!
//! For masks that do not fit an 8-bit image.
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `PNML`                            |
//! | 4      | 1    | version, `1`                            |
//! | 5      | 4    | width (u32)                             |
//! | 9      | 4    | height (u32)                            |
//! | 13     | 1    | bytes per label, 1 or 2                 |
//! | 14     | 1    | 1 if an ignore label is set, else 0     |
//! | 15     | 2    | ignore label (u16), 0 when unset        |
//! | 17     | ..   | labels, row-major                       |
//!
//! # CSV reports
//!
//! Comma separated, period decimal point, values printed with six digits
//! after the point. Empty cells stand for undefined values.
//!
//! - evaluation: `class,intersection,union,iou,pnm_intersection,pnm_union,pnm_iou`,
//!   one row per class with a non-empty union, then `mean,,,<miou>,,,<pnm_iou>`.
//! - bins: `lower,upper,errors,total,error_rate`, one row per bin, bounds
//!   `-inf` and `inf` for the outer bins.
//! - zigzag series: `n,miou,pnm_iou`.

use std::fs::File;
use std::io::{BufWriter, Cursor, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::{
    check_dimensions, BorderPolicy, Label, LabelMask, PnmConfig, Transform, WeightMap,
};
use crate::metrics::{BinReport, Evaluation};
use crate::synthetic::SeriesRow;

pub const WEIGHT_MAGIC: [u8; 4] = *b"PNMW";
pub const LABEL_MAGIC: [u8; 4] = *b"PNML";
pub const FORMAT_VERSION: u8 = 1;
pub const WEIGHT_HEADER_LEN: usize = 17;
pub const LABEL_HEADER_LEN: usize = 17;
const PNG_SIGNATURE: [u8; 8] = [137, 80, 78, 71, 13, 10, 26, 10];

/// Size in bytes of the weight map file for a `width × height` map.
pub fn weight_file_len(width: usize, height: usize) -> usize {
    let n = width * height;
    WEIGHT_HEADER_LEN + 4 * n + n.div_ceil(8)
}

fn u32_dim(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Unrepresentable(format!("{what} {value}")))
}

pub fn write_weight_map<W: Write>(map: &WeightMap, mut sink: W) -> Result<()> {
    let config = map.config();
    let mut buf = Vec::with_capacity(weight_file_len(map.width(), map.height()));
    buf.extend_from_slice(&WEIGHT_MAGIC);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&u32_dim(map.width(), "width")?.to_le_bytes());
    buf.extend_from_slice(&u32_dim(map.height(), "height")?.to_le_bytes());
    buf.extend_from_slice(&config.d.to_le_bytes());
    buf.push(config.transform.code());
    buf.push(config.border.code());
    for w in map.weights() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    let mut bits = vec![0u8; map.len().div_ceil(8)];
    for (i, _) in map.excluded().iter().enumerate().filter(|(_, &e)| e) {
        bits[i / 8] |= 1 << (i % 8);
    }
    buf.extend_from_slice(&bits);
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(())
}

pub fn read_weight_map<R: Read>(mut source: R) -> Result<WeightMap> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_weight_map(&bytes)
}

fn truncated(expected: usize, found: usize) -> Error {
    Error::Truncated { expected, found }
}

fn check_magic(bytes: &[u8], expected: [u8; 4]) -> Result<()> {
    if bytes.len() < 4 {
        return Err(truncated(4, bytes.len()));
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != expected {
        return Err(Error::BadMagic { found, expected });
    }
    Ok(())
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes(b.try_into().unwrap())
}

pub fn decode_weight_map(bytes: &[u8]) -> Result<WeightMap> {
    check_magic(bytes, WEIGHT_MAGIC)?;
    if bytes.len() < WEIGHT_HEADER_LEN {
        return Err(truncated(WEIGHT_HEADER_LEN, bytes.len()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let width = le_u32(&bytes[5..9]) as usize;
    let height = le_u32(&bytes[9..13]) as usize;
    let config = PnmConfig::new(
        le_u16(&bytes[13..15]),
        Transform::from_code(bytes[15])?,
        BorderPolicy::from_code(bytes[16])?,
    )?;
    check_dimensions(width, height, width.saturating_mul(height))?;

    let expected = weight_file_len(width, height);
    if bytes.len() < expected {
        return Err(truncated(expected, bytes.len()));
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let n = width * height;
    let payload = &bytes[WEIGHT_HEADER_LEN..WEIGHT_HEADER_LEN + 4 * n];
    let weights = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let bits = &bytes[WEIGHT_HEADER_LEN + 4 * n..];
    let excluded = (0..n).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
    WeightMap::new(width, height, weights, excluded, config)
}

pub fn save_weight_map(map: &WeightMap, path: impl AsRef<Path>) -> Result<()> {
    write_weight_map(map, BufWriter::new(File::create(path)?))
}

pub fn load_weight_map(path: impl AsRef<Path>) -> Result<WeightMap> {
    decode_weight_map(&std::fs::read(path)?)
}

/// Reads a label mask from an 8-bit (or narrower) grayscale or paletted
/// PNG, or from the raw label format.
///
/// PNG labels are the stored sample values; palettes are not expanded, so a
/// paletted image yields its palette indices. `ignore_label` is applied to
/// PNG input, and to raw input whose header sets none.
pub fn read_label_mask<R: Read>(mut source: R, ignore_label: Option<Label>) -> Result<LabelMask> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_label_mask(&bytes, ignore_label)
}

pub fn decode_label_mask(bytes: &[u8], ignore_label: Option<Label>) -> Result<LabelMask> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png_labels(bytes, ignore_label)
    } else if bytes.starts_with(&LABEL_MAGIC) {
        decode_raw_labels(bytes, ignore_label)
    } else {
        Err(Error::CorruptImage(
            "neither a PNG nor a raw label file".into(),
        ))
    }
}

pub fn load_label_mask(path: impl AsRef<Path>, ignore_label: Option<Label>) -> Result<LabelMask> {
    decode_label_mask(&std::fs::read(path)?, ignore_label)
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) => Error::Io(io),
        other => Error::CorruptImage(other.to_string()),
    }
}

fn decode_png_labels(bytes: &[u8], ignore_label: Option<Label>) -> Result<LabelMask> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    match color {
        png::ColorType::Grayscale | png::ColorType::Indexed => {}
        other => return Err(Error::UnsupportedColorType(format!("{other:?}"))),
    }
    let bits = depth as u8;
    if bits > 8 {
        return Err(Error::UnsupportedBitDepth(bits));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::CorruptImage("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let bits = bits as usize;
    let per_byte = 8 / bits;
    let mask_bits = ((1u16 << bits) - 1) as u8;
    let mut labels = Vec::with_capacity(width * height);
    for row in buf.chunks(frame.line_size).take(height) {
        for x in 0..width {
            let byte = row[x / per_byte];
            let shift = 8 - bits * (x % per_byte + 1);
            labels.push(((byte >> shift) & mask_bits) as Label);
        }
    }
    LabelMask::new(width, height, labels, ignore_label)
}

fn decode_raw_labels(bytes: &[u8], ignore_label: Option<Label>) -> Result<LabelMask> {
    check_magic(bytes, LABEL_MAGIC)?;
    if bytes.len() < LABEL_HEADER_LEN {
        return Err(truncated(LABEL_HEADER_LEN, bytes.len()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let width = le_u32(&bytes[5..9]) as usize;
    let height = le_u32(&bytes[9..13]) as usize;
    let bytes_per_label = bytes[13] as usize;
    if bytes_per_label != 1 && bytes_per_label != 2 {
        return Err(Error::UnsupportedBitDepth(bytes[13].saturating_mul(8)));
    }
    let stored_ignore = match bytes[14] {
        0 => None,
        1 => Some(le_u16(&bytes[15..17])),
        other => {
            return Err(Error::CorruptImage(format!("bad ignore flag {other}")));
        }
    };
    check_dimensions(width, height, width.saturating_mul(height))?;
    let n = width * height;
    let expected = LABEL_HEADER_LEN + n * bytes_per_label;
    if bytes.len() < expected {
        return Err(truncated(expected, bytes.len()));
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let payload = &bytes[LABEL_HEADER_LEN..];
    let labels = if bytes_per_label == 1 {
        payload.iter().map(|&b| b as Label).collect()
    } else {
        payload.chunks_exact(2).map(le_u16).collect()
    };
    LabelMask::new(width, height, labels, stored_ignore.or(ignore_label))
}

/// Writes the raw label format, one byte per label when every label fits.
pub fn write_label_raw<W: Write>(mask: &LabelMask, mut sink: W) -> Result<()> {
    let wide = mask.labels().iter().any(|&l| l > u8::MAX as Label);
    let mut buf = Vec::with_capacity(LABEL_HEADER_LEN + mask.len() * 2);
    buf.extend_from_slice(&LABEL_MAGIC);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&u32_dim(mask.width(), "width")?.to_le_bytes());
    buf.extend_from_slice(&u32_dim(mask.height(), "height")?.to_le_bytes());
    buf.push(if wide { 2 } else { 1 });
    buf.push(mask.ignore_label().is_some() as u8);
    buf.extend_from_slice(&mask.ignore_label().unwrap_or(0).to_le_bytes());
    for &l in mask.labels() {
        if wide {
            buf.extend_from_slice(&l.to_le_bytes());
        } else {
            buf.push(l as u8);
        }
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(())
}

fn encode_gray8<W: Write>(width: usize, height: usize, data: &[u8], sink: W) -> Result<()> {
    let mut encoder = png::Encoder::new(sink, u32_dim(width, "width")?, u32_dim(height, "height")?);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::CorruptImage(other.to_string()),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(data).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

/// Writes an 8-bit grayscale PNG whose samples are the labels.
pub fn write_label_png<W: Write>(mask: &LabelMask, sink: W) -> Result<()> {
    let data = mask
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            u8::try_from(l)
                .map_err(|_| Error::Unrepresentable(format!("label {l} at pixel {i} in 8 bits")))
        })
        .collect::<Result<Vec<u8>>>()?;
    encode_gray8(mask.width(), mask.height(), &data, sink)
}

pub fn save_label_png(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    write_label_png(mask, BufWriter::new(File::create(path)?))
}

/// Min-max normalized 8-bit rendering of a weight map; brighter is heavier.
/// Excluded pixels are black; a constant map renders black.
pub fn preview_bytes(map: &WeightMap) -> Vec<u8> {
    let (lo, hi) = map.range().unwrap_or((1.0, 1.0));
    let span = (hi - lo) as f64;
    map.weights()
        .iter()
        .zip(map.excluded())
        .map(|(&w, &excluded)| {
            if excluded || span <= 0.0 {
                0
            } else {
                ((w - lo) as f64 / span * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

pub fn write_preview_png<W: Write>(map: &WeightMap, sink: W) -> Result<()> {
    encode_gray8(map.width(), map.height(), &preview_bytes(map), sink)
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_value).unwrap_or_default()
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        fmt_value(v)
    }
}

pub fn write_eval_csv<W: Write>(eval: &Evaluation, mut sink: W) -> Result<()> {
    writeln!(
        sink,
        "class,intersection,union,iou,pnm_intersection,pnm_union,pnm_iou"
    )?;
    let classes = eval.unit.class_count().max(eval.weighted.class_count());
    for k in 0..classes {
        let union = eval.unit.union.get(k).copied().unwrap_or(0.0);
        let pnm_union = eval.weighted.union.get(k).copied().unwrap_or(0.0);
        if union <= 0.0 && pnm_union <= 0.0 {
            continue;
        }
        writeln!(
            sink,
            "{k},{},{},{},{},{},{}",
            fmt_value(eval.unit.intersection[k]),
            fmt_value(union),
            fmt_opt(eval.unit.class_iou(k)),
            fmt_value(eval.weighted.intersection[k]),
            fmt_value(pnm_union),
            fmt_opt(eval.weighted.class_iou(k)),
        )?;
    }
    writeln!(
        sink,
        "mean,,,{},,,{}",
        fmt_value(eval.miou.mean),
        fmt_value(eval.pnm_iou.mean)
    )?;
    sink.flush()?;
    Ok(())
}

pub fn write_bins_csv<W: Write>(report: &BinReport, mut sink: W) -> Result<()> {
    writeln!(sink, "lower,upper,errors,total,error_rate")?;
    for bin in &report.bins {
        writeln!(
            sink,
            "{},{},{},{},{}",
            fmt_bound(bin.lower),
            fmt_bound(bin.upper),
            bin.errors,
            bin.total,
            fmt_opt(bin.error_rate())
        )?;
    }
    sink.flush()?;
    Ok(())
}

pub fn write_series_csv<W: Write>(rows: &[SeriesRow], mut sink: W) -> Result<()> {
    writeln!(sink, "n,miou,pnm_iou")?;
    for row in rows {
        writeln!(
            sink,
            "{},{},{}",
            row.n,
            fmt_value(row.miou),
            fmt_value(row.pnm_iou)
        )?;
    }
    sink.flush()?;
    Ok(())
}
