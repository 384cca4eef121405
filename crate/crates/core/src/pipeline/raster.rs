use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scan::{bin_span, CumulativeMap};
use super::ExecMode;
use crate::amr::Dataset;
use crate::error::{validation, Result};
use crate::transfer::{self, TransferFunction};

const RASTER_CHUNK: usize = 16 * 1024;

/// Box-basis accumulators for one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBins {
    pub value: Vec<f64>,
    pub count: Vec<u32>,
}

/// One accumulator row per field, `W` bins each.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    pub width: usize,
    pub fields: Vec<FieldBins>,
}

impl BinGrid {
    /// Additions each bin received, summed over fields.
    pub fn adds_per_bin(&self) -> Vec<u64> {
        let mut adds = vec![0u64; self.width];
        for f in &self.fields {
            for (a, &c) in adds.iter_mut().zip(&f.count) {
                *a += u64::from(c);
            }
        }
        adds
    }
}

/// Plot heights and colours for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesField {
    pub name: String,
    pub y: Vec<f64>,
    pub rgb: Vec<[f64; 3]>,
    pub coverage: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub width: usize,
    pub fields: Vec<SeriesField>,
}

struct Partial {
    first_bin: usize,
    value: Vec<f64>,
    count: Vec<u32>,
}

fn rasterize_range(
    cum: &CumulativeMap,
    values: &[f32],
    norm: &transfer::Normalizer,
    cells: std::ops::Range<usize>,
) -> Partial {
    let w = cum.width();
    let (first_bin, _) = {
        let (x1, x2) = cum.x_span(cells.start);
        bin_span(x1, x2, w)
    };
    let (_, last_bin) = {
        let (x1, x2) = cum.x_span(cells.end - 1);
        bin_span(x1, x2, w)
    };
    let len = last_bin + 1 - first_bin;
    let mut value = vec![0.0; len];
    let mut count = vec![0u32; len];
    let mut x1 = cum.x_span(cells.start).0;
    for h in cells {
        let x2 = cum.project(cum.prefix()[h]);
        let (lo, hi) = bin_span(x1, x2, w);
        let v = norm.apply(f64::from(values[h]));
        for x in lo - first_bin..=hi - first_bin {
            value[x] += v;
            count[x] += 1;
        }
        x1 = x2;
    }
    Partial {
        first_bin,
        value,
        count,
    }
}

/// Projects every cell onto the bins its x-span overlaps, adding the cell's
/// normalized value and one count to each. Runs once per field.
pub fn rasterize_cells(
    ds: &Dataset,
    cum: &CumulativeMap,
    tfs: &[TransferFunction],
    mode: ExecMode,
) -> Result<BinGrid> {
    transfer::check_tfs(ds, tfs)?;
    if cum.len() != ds.len() {
        return Err(validation(format!(
            "cumulative map covers {} cells, dataset has {}",
            cum.len(),
            ds.len()
        )));
    }
    let w = cum.width();
    if w < 2 {
        return Err(validation("plot width must be at least 2"));
    }
    let n = ds.len();
    let fields = ds
        .fields()
        .iter()
        .zip(tfs)
        .map(|(field, tf)| {
            let norm = tf.normalizer(field);
            let values = field.values();
            match mode {
                ExecMode::Sequential => {
                    let p = rasterize_range(cum, values, &norm, 0..n);
                    let mut value = vec![0.0; w];
                    let mut count = vec![0u32; w];
                    value[p.first_bin..p.first_bin + p.value.len()].copy_from_slice(&p.value);
                    count[p.first_bin..p.first_bin + p.count.len()].copy_from_slice(&p.count);
                    FieldBins { value, count }
                }
                ExecMode::Parallel => {
                    let chunks = n.div_ceil(RASTER_CHUNK);
                    let partials: Vec<Partial> = (0..chunks)
                        .into_par_iter()
                        .map(|c| {
                            let start = c * RASTER_CHUNK;
                            rasterize_range(cum, values, &norm, start..(start + RASTER_CHUNK).min(n))
                        })
                        .collect();
                    let mut value = vec![0.0; w];
                    let mut count = vec![0u32; w];
                    for p in partials {
                        for (k, (&v, &c)) in p.value.iter().zip(&p.count).enumerate() {
                            value[p.first_bin + k] += v;
                            count[p.first_bin + k] += c;
                        }
                    }
                    FieldBins { value, count }
                }
            }
        })
        .collect();
    Ok(BinGrid { width: w, fields })
}

/// Divides each bin by its count; empty bins stay 0.
pub fn apply_weights(bins: &BinGrid) -> Vec<Vec<f64>> {
    bins.fields
        .iter()
        .map(|f| {
            f.value
                .iter()
                .zip(&f.count)
                .map(|(&v, &c)| if c > 0 { v / f64::from(c) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Samples each field's transfer function at the bin means.
pub fn apply_transfer(
    bins: &BinGrid,
    means: &[Vec<f64>],
    tfs: &[TransferFunction],
) -> PlotSeries {
    let fields = bins
        .fields
        .iter()
        .zip(means)
        .zip(tfs)
        .map(|((fb, mean), tf)| {
            let mut y = Vec::with_capacity(bins.width);
            let mut rgb = Vec::with_capacity(bins.width);
            let mut coverage = Vec::with_capacity(bins.width);
            for (&m, &c) in mean.iter().zip(&fb.count) {
                if c > 0 {
                    let s = tf.sample(m);
                    y.push(s[3]);
                    rgb.push([s[0], s[1], s[2]]);
                    coverage.push(true);
                } else {
                    y.push(0.0);
                    rgb.push([0.0; 3]);
                    coverage.push(false);
                }
            }
            SeriesField {
                name: tf.field().to_owned(),
                y,
                rgb,
                coverage,
            }
        })
        .collect();
    PlotSeries {
        width: bins.width,
        fields,
    }
}

/// Bin means fed through the transfer functions.
pub fn finalize_bins(bins: &BinGrid, tfs: &[TransferFunction]) -> PlotSeries {
    apply_transfer(bins, &apply_weights(bins), tfs)
}
