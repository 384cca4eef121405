//! The staged volume-line recomputation.
//!
//! Stages run in a fixed order, each data-parallel over cells or bins:
//!
//! 1. `AssignImportance`: per-cell importance from the members' alpha spread,
//!    the cell width and the exponent.
//! 2. `InclusiveScan`: prefix sum of the importance, giving every cell a
//!    sub-pixel span `(xf1, xf2)` on `[0, W]`.
//! 3. `RasterizeCells`: box-basis accumulation of normalized values into `W`
//!    bins, once per field.
//! 4. `ApplyWeights`: bin sums divided by bin counts.
//! 5. `ApplyTransFunc`: bin means looked up in each field's transfer function.
//! 6. `RasterizeLines`: line strips or bars drawn into an RGB raster.
//!
//! The Hilbert ordering of the dataset is fixed; a configuration change reruns
//! all six stages against it. [`ExecMode::Sequential`] is the deterministic
//! reference; [`ExecMode::Parallel`] matches it within floating-point tolerance.

mod importance;
mod plot;
mod raster;
mod scan;

pub use importance::{assign_importance, assign_importance_with, importance, ImportanceBuffer};
pub use plot::{generate_plot, FieldGeometry, Plot, PALETTE};
pub use raster::{
    apply_transfer, apply_weights, finalize_bins, rasterize_cells, BinGrid, FieldBins, PlotSeries,
    SeriesField,
};
pub use scan::{bin_span, cumulative_map, inclusive_scan, CumulativeMap, SCAN_BLOCK};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::amr::Dataset;
use crate::error::{validation, IvlError, Result};
use crate::transfer::{self, TransferFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlotMode {
    #[default]
    Polyline,
    Bars,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    /// Per-bin RGB from the field's transfer function.
    #[default]
    TransferFunction,
    /// One palette colour per field.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[default]
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// Steepness exponent `P`.
    pub exponent: f64,
    /// Lower clamp on the normalized variation.
    pub min_importance: f64,
    /// Plot width `W` in pixels (= bins).
    pub width: usize,
    /// Raster height used by the line stage.
    pub height: usize,
    pub mode: PlotMode,
    pub color: ColorMode,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            exponent: 1.0,
            min_importance: 0.025,
            width: 1024,
            height: 256,
            mode: PlotMode::Polyline,
            color: ColorMode::TransferFunction,
        }
    }
}

/// Upper bound on plot width.
pub const MAX_WIDTH: usize = 1 << 16;

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(validation(format!(
                "exponent P = {} must be finite and >= 0",
                self.exponent
            )));
        }
        if !(0.0..=1.0).contains(&self.min_importance) {
            return Err(validation(format!(
                "minimum importance {} outside [0, 1]",
                self.min_importance
            )));
        }
        if !(2..=MAX_WIDTH).contains(&self.width) {
            return Err(validation(format!(
                "plot width {} outside [2, {MAX_WIDTH}]",
                self.width
            )));
        }
        if !(2..=MAX_WIDTH).contains(&self.height) {
            return Err(validation(format!(
                "plot height {} outside [2, {MAX_WIDTH}]",
                self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    AssignImportance,
    InclusiveScan,
    RasterizeCells,
    ApplyWeights,
    ApplyTransFunc,
    RasterizeLines,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::AssignImportance,
        Stage::InclusiveScan,
        Stage::RasterizeCells,
        Stage::ApplyWeights,
        Stage::ApplyTransFunc,
        Stage::RasterizeLines,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::AssignImportance => "AssignImportance",
            Stage::InclusiveScan => "InclusiveScan",
            Stage::RasterizeCells => "RasterizeCells",
            Stage::ApplyWeights => "ApplyWeights",
            Stage::ApplyTransFunc => "ApplyTransFunc",
            Stage::RasterizeLines => "RasterizeLines",
        }
    }

    fn index(self) -> usize {
        Stage::ALL.iter().position(|&s| s == self).unwrap_or(0)
    }
}

/// Wall time per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings([Duration; 6]);

impl StageTimings {
    pub fn get(&self, stage: Stage) -> Duration {
        self.0[stage.index()]
    }

    pub fn millis(&self, stage: Stage) -> f64 {
        self.get(stage).as_secs_f64() * 1e3
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stage, Duration)> + '_ {
        Stage::ALL.iter().map(|&s| (s, self.get(s)))
    }

    pub fn total(&self) -> Duration {
        self.0.iter().sum()
    }

    fn set(&mut self, stage: Stage, d: Duration) {
        self.0[stage.index()] = d;
    }
}

/// Distribution of bin additions (sum over fields) across the `W` bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddsSummary {
    pub min: u64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: u64,
    pub total: u64,
}

impl AddsSummary {
    pub fn from_counts(adds: &[u64]) -> Self {
        let mut sorted = adds.to_vec();
        sorted.sort_unstable();
        Self {
            min: sorted.first().copied().unwrap_or(0),
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            max: sorted.last().copied().unwrap_or(0),
            total: sorted.iter().sum(),
        }
    }

    pub fn dispersion(&self) -> u64 {
        self.max - self.min
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    let a = sorted[i] as f64;
    match sorted.get(i + 1) {
        Some(&b) => a + (b as f64 - a) * frac,
        None => a,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub timings: StageTimings,
    pub adds: AddsSummary,
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub importance: ImportanceBuffer,
    pub cumulative: CumulativeMap,
    pub bins: BinGrid,
    pub series: PlotSeries,
    pub plot: Plot,
    pub stats: RunStats,
}

pub fn run_pipeline(
    ds: &Dataset,
    tfs: &[TransferFunction],
    params: &PipelineParams,
    mode: ExecMode,
) -> Result<PipelineOutput> {
    run_pipeline_cancellable(ds, tfs, params, mode, &|| false)
}

/// Runs all stages, polling `cancelled` at every stage boundary.
pub fn run_pipeline_cancellable(
    ds: &Dataset,
    tfs: &[TransferFunction],
    params: &PipelineParams,
    mode: ExecMode,
    cancelled: &dyn Fn() -> bool,
) -> Result<PipelineOutput> {
    params.validate()?;
    transfer::check_tfs(ds, tfs)?;
    let mut timings = StageTimings::default();
    let check = || {
        if cancelled() {
            Err(IvlError::Cancelled)
        } else {
            Ok(())
        }
    };

    check()?;
    let t = Instant::now();
    let importance = assign_importance(ds, tfs, params, mode)?;
    timings.set(Stage::AssignImportance, t.elapsed());

    check()?;
    let t = Instant::now();
    let cumulative = cumulative_map(&importance.values, params.width, mode)?;
    timings.set(Stage::InclusiveScan, t.elapsed());

    check()?;
    let t = Instant::now();
    let bins = rasterize_cells(ds, &cumulative, tfs, mode)?;
    timings.set(Stage::RasterizeCells, t.elapsed());

    check()?;
    let t = Instant::now();
    let means = apply_weights(&bins);
    timings.set(Stage::ApplyWeights, t.elapsed());

    check()?;
    let t = Instant::now();
    let series = apply_transfer(&bins, &means, tfs);
    timings.set(Stage::ApplyTransFunc, t.elapsed());

    check()?;
    let t = Instant::now();
    let plot = generate_plot(&series, params.mode, params.color, params.height)?;
    timings.set(Stage::RasterizeLines, t.elapsed());

    let adds = AddsSummary::from_counts(&bins.adds_per_bin());
    Ok(PipelineOutput {
        importance,
        cumulative,
        bins,
        series,
        plot,
        stats: RunStats { timings, adds },
    })
}
