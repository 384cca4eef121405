//! Brushing and linking between the 1D plot and a spatial slice view.
//!
//! A brushed pixel span becomes an inclusive range of Hilbert codes (the first
//! and last cell drawn inside it). Spatial samples are tested against those
//! ranges through the code of the cell that contains them.

use std::fmt;
use std::str::FromStr;

use base64::Engine as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amr::{Dataset, SpatialIndex};
use crate::error::{domain, IvlError, Result};
use crate::hilbert::HilbertCode;
use crate::pipeline::{bin_span, CumulativeMap};
use crate::transfer::TransferFunction;

/// Default brightness factor for pixels outside every ROI.
pub const DEFAULT_DIM_FACTOR: f64 = 0.35;

/// Inclusive range of centroid codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub lo: HilbertCode,
    pub hi: HilbertCode,
}

impl Roi {
    pub fn new(lo: HilbertCode, hi: HilbertCode) -> Result<Self> {
        if lo > hi {
            return Err(domain(format!("ROI lower code {lo} exceeds upper code {hi}")));
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn contains(&self, code: HilbertCode) -> bool {
        (self.lo..=self.hi).contains(&code)
    }
}

/// Cells rasterized into any of the pixel columns `[x0, x1]`, as a code range. `None`
/// when no cell's span reaches into the selection.
pub fn pixels_to_roi(x0: usize, x1: usize, cum: &CumulativeMap, ds: &Dataset) -> Result<Option<Roi>> {
    if x0 > x1 || x1 >= cum.width() {
        return Err(domain(format!(
            "pixel selection [{x0}, {x1}] invalid for width {}",
            cum.width()
        )));
    }
    if cum.len() != ds.len() {
        return Err(domain("cumulative map does not belong to this dataset"));
    }
    let n = ds.len();
    let w = cum.width();
    let bins = |h: usize| {
        let (a, b) = cum.x_span(h);
        bin_span(a, b, w)
    };
    // Both ends of a cell's bin span are nondecreasing in h.
    let first = partition_index(n, |h| bins(h).1 < x0);
    let last = partition_index(n, |h| bins(h).0 <= x1);
    if first >= last {
        return Ok(None);
    }
    let last = last - 1;
    Ok(Some(Roi {
        lo: ds.codes()[first],
        hi: ds.codes()[last],
    }))
}

/// First index in `0..n` where `pred` turns false; `pred` must be monotone.
fn partition_index(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Whether the cell containing `p` has its code inside any ROI.
pub fn point_in_rois(p: [f64; 3], rois: &[Roi], ds: &Dataset, index: &SpatialIndex) -> bool {
    if rois.is_empty() {
        return false;
    }
    index
        .locate(p)
        .is_some_and(|i| cell_in_rois(ds.codes()[i], rois))
}

#[inline]
fn cell_in_rois(code: HilbertCode, rois: &[Roi]) -> bool {
    rois.iter().any(|r| r.contains(code))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane axes `(u, v)`.
    pub fn free_axes(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

impl FromStr for Axis {
    type Err = IvlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(domain(format!("unknown axis '{other}' (expected x, y or z)"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Axis-aligned slice at logical-grid resolution, row-major with `v` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceImage {
    pub axis: Axis,
    pub coord: f64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 4]>,
}

impl SliceImage {
    pub fn pixel(&self, u: usize, v: usize) -> [u8; 4] {
        self.pixels[v * self.width + u]
    }

    pub fn rgba_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn rgba_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.rgba_bytes())
    }

    /// RGB over black; alpha is dropped.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(&p[..3]);
        }
        out
    }
}

/// Colours one field on the plane `axis = coord` through its transfer
/// function. With any ROI present, pixels of cells outside every ROI have
/// their RGB scaled by `dim_factor`. Uncovered pixels are transparent.
#[allow(clippy::too_many_arguments)]
pub fn render_slice(
    ds: &Dataset,
    index: &SpatialIndex,
    tf: &TransferFunction,
    field: &str,
    axis: Axis,
    coord: f64,
    rois: &[Roi],
    dim_factor: f64,
) -> Result<SliceImage> {
    let fi = ds
        .field_index(field)
        .ok_or_else(|| domain(format!("no field named '{field}'")))?;
    let extent = ds.extent();
    let depth = f64::from(extent[axis.index()]);
    if !(coord >= 0.0 && coord < depth) {
        return Err(domain(format!(
            "slice coordinate {coord} outside [0, {depth}) on axis {axis}"
        )));
    }
    if !(0.0..=1.0).contains(&dim_factor) {
        return Err(domain(format!("dim factor {dim_factor} outside [0, 1]")));
    }
    let (ua, va) = axis.free_axes();
    let (width, height) = (extent[ua] as usize, extent[va] as usize);
    let scalar = &ds.fields()[fi];
    let norm = tf.normalizer(scalar);
    let values = scalar.values();
    let dimming = !rois.is_empty();

    let mut pixels = vec![[0u8; 4]; width * height];
    pixels
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(v, row)| {
            for (u, px) in row.iter_mut().enumerate() {
                let mut p = [0.0; 3];
                p[axis.index()] = coord;
                p[ua] = u as f64 + 0.5;
                p[va] = v as f64 + 0.5;
                let Some(i) = index.locate(p) else {
                    continue;
                };
                let mut c = tf.sample(norm.apply(f64::from(values[i])));
                if dimming && !cell_in_rois(ds.codes()[i], rois) {
                    for ch in &mut c[..3] {
                        *ch *= dim_factor;
                    }
                }
                *px = c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        });

    Ok(SliceImage {
        axis,
        coord,
        width,
        height,
        pixels,
    })
}
