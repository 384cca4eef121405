use rayon::prelude::*;

use super::{ExecMode, PipelineParams};
use crate::amr::Dataset;
use crate::error::Result;
use crate::transfer::{self, TransferFunction};

/// Per-cell x-axis importance, in Hilbert order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceBuffer {
    pub values: Vec<f64>,
    /// Normalization scalar for the per-cell variation (the table-space estimate).
    pub max_variation: f64,
}

/// `f = (max(V_h / maxV, eps_min) * 2^L)^P`, with `V_h / maxV := 0` when `maxV = 0`.
#[inline]
pub fn importance(variation: f64, max_variation: f64, level: u8, params: &PipelineParams) -> f64 {
    let ratio = if max_variation > 0.0 {
        variation / max_variation
    } else {
        0.0
    };
    let scaled = ratio.max(params.min_importance) * (1u64 << level) as f64;
    if params.exponent == 1.0 {
        scaled
    } else {
        scaled.powf(params.exponent)
    }
}

pub fn assign_importance(
    ds: &Dataset,
    tfs: &[TransferFunction],
    params: &PipelineParams,
    mode: ExecMode,
) -> Result<ImportanceBuffer> {
    let max_variation = transfer::approx_max_variation_for(ds, tfs)?;
    assign_importance_with(ds, tfs, params, max_variation, mode)
}

/// [`assign_importance`] with a caller-supplied normalization scalar.
pub fn assign_importance_with(
    ds: &Dataset,
    tfs: &[TransferFunction],
    params: &PipelineParams,
    max_variation: f64,
    mode: ExecMode,
) -> Result<ImportanceBuffer> {
    transfer::check_tfs(ds, tfs)?;
    let lookups = transfer::alpha_lookups(ds, tfs);
    let fields = ds.fields();
    let cells = ds.cells();
    let one = |h: usize| {
        let v = transfer::cell_variation(h, fields, &lookups);
        importance(v, max_variation, cells[h].level, params)
    };
    let values = match mode {
        ExecMode::Sequential => (0..ds.len()).map(one).collect(),
        ExecMode::Parallel => (0..ds.len()).into_par_iter().map(one).collect(),
    };
    Ok(ImportanceBuffer {
        values,
        max_variation,
    })
}
