use rayon::prelude::*;

use super::ExecMode;
use crate::error::{IvlError, Result};

/// Scan block length. Both execution modes use the same blocking so the
/// prefix values are bitwise identical regardless of mode or thread count.
pub const SCAN_BLOCK: usize = 4096;

/// Inclusive prefix sum of the importance and its mapping onto plot x.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeMap {
    prefix: Vec<f64>,
    total: f64,
    width: usize,
}

impl CumulativeMap {
    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// `F(n - 1)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Plot width the map projects onto.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    /// Maps a prefix value onto `[0, W]`.
    #[inline]
    pub fn project(&self, f: f64) -> f64 {
        let w = self.width as f64;
        if f >= self.total {
            w
        } else {
            (f * w / self.total).min(w)
        }
    }

    /// Sub-pixel extent `(xf1, xf2)` of cell `h`.
    #[inline]
    pub fn x_span(&self, h: usize) -> (f64, f64) {
        let x1 = if h == 0 { 0.0 } else { self.project(self.prefix[h - 1]) };
        (x1, self.project(self.prefix[h]))
    }
}

/// Inclusive bins `[lo, hi]` overlapped by the span `(xf1, xf2)` on a `w`-bin grid.
#[inline]
pub fn bin_span(x1: f64, x2: f64, w: usize) -> (usize, usize) {
    let lo = (x1.floor() as usize).min(w - 1);
    let hi = (x2.ceil() as usize).saturating_sub(1).max(lo).min(w - 1);
    (lo, hi)
}

fn scan_block(block: &[f64], offset: f64, out: &mut [f64]) {
    let mut acc = offset;
    for (o, &v) in out.iter_mut().zip(block) {
        acc += v;
        *o = acc;
    }
}

/// Blocked inclusive scan: block totals, a running offset per block, then a
/// running sum inside every block seeded with its offset.
pub fn inclusive_scan(values: &[f64], mode: ExecMode) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let block_sum = |b: &[f64]| b.iter().fold(0.0, |a, &v| a + v);
    let sums: Vec<f64> = match mode {
        ExecMode::Sequential => values.chunks(SCAN_BLOCK).map(block_sum).collect(),
        ExecMode::Parallel => values.par_chunks(SCAN_BLOCK).map(block_sum).collect(),
    };
    let mut offsets = Vec::with_capacity(sums.len());
    let mut acc = 0.0;
    for s in sums {
        offsets.push(acc);
        acc += s;
    }
    match mode {
        ExecMode::Sequential => {
            for ((b, o), &off) in values
                .chunks(SCAN_BLOCK)
                .zip(out.chunks_mut(SCAN_BLOCK))
                .zip(&offsets)
            {
                scan_block(b, off, o);
            }
        }
        ExecMode::Parallel => {
            values
                .par_chunks(SCAN_BLOCK)
                .zip(out.par_chunks_mut(SCAN_BLOCK))
                .zip(offsets.par_iter())
                .for_each(|((b, o), &off)| scan_block(b, off, o));
        }
    }
    out
}

pub fn cumulative_map(importance: &[f64], width: usize, mode: ExecMode) -> Result<CumulativeMap> {
    if importance.is_empty() {
        return Err(IvlError::Degenerate("no cells to scan".into()));
    }
    let prefix = inclusive_scan(importance, mode);
    let total = *prefix.last().unwrap_or(&0.0);
    if !(total > 0.0 && total.is_finite()) {
        return Err(IvlError::Degenerate(format!(
            "total importance {total} is not positive and finite"
        )));
    }
    Ok(CumulativeMap {
        prefix,
        total,
        width,
    })
}
