//! Parameter sweeps over the pipeline with per-stage timings and the
//! adds-per-bin distribution, reported as CSV.

use std::io::Write;

use crate::amr::Dataset;
use crate::error::{validation, Result};
use crate::pipeline::{run_pipeline, AddsSummary, ExecMode, PipelineParams, Stage};
use crate::transfer::TransferFunction;

/// Which parameter a row varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Exponent,
    MinImportance,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Exponent => "exponent",
            Sweep::MinImportance => "min_importance",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub exponents: Vec<f64>,
    pub min_importances: Vec<f64>,
    pub repeats: usize,
    /// Held fixed while the other parameter varies.
    pub base: PipelineParams,
    pub mode: ExecMode,
}

/// `lo, lo + step, ..., hi` with the endpoint included despite rounding.
pub fn steps(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(validation(format!("bad sweep range {lo}..={hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect())
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            exponents: steps(0.0, 5.0, 0.5).expect("static range"),
            min_importances: steps(0.0, 0.25, 0.025).expect("static range"),
            repeats: 5,
            base: PipelineParams::default(),
            mode: ExecMode::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub sweep: Sweep,
    pub exponent: f64,
    pub min_importance: f64,
    pub width: usize,
    pub repeats: usize,
    /// Median milliseconds per stage, in [`Stage::ALL`] order.
    pub stage_ms: [f64; 6],
    /// Median of the per-run totals.
    pub total_ms: f64,
    pub adds: AddsSummary,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs the pipeline `repeats` times at `params` and summarizes.
pub fn measure(
    ds: &Dataset,
    tfs: &[TransferFunction],
    params: &PipelineParams,
    mode: ExecMode,
    repeats: usize,
) -> Result<([f64; 6], f64, AddsSummary)> {
    if repeats == 0 {
        return Err(validation("repeats must be at least 1"));
    }
    let mut per_stage: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(repeats)).collect();
    let mut totals = Vec::with_capacity(repeats);
    let mut adds = None;
    for _ in 0..repeats {
        let out = run_pipeline(ds, tfs, params, mode)?;
        for (k, stage) in Stage::ALL.iter().enumerate() {
            per_stage[k].push(out.stats.timings.millis(*stage));
        }
        totals.push(out.stats.timings.total().as_secs_f64() * 1e3);
        adds = Some(out.stats.adds);
    }
    let mut stage_ms = [0.0; 6];
    for (k, v) in per_stage.iter_mut().enumerate() {
        stage_ms[k] = median(v);
    }
    Ok((stage_ms, median(&mut totals), adds.expect("repeats >= 1")))
}

pub fn run_sweep(ds: &Dataset, tfs: &[TransferFunction], cfg: &SweepConfig) -> Result<Vec<BenchRow>> {
    let points = cfg
        .exponents
        .iter()
        .map(|&p| (Sweep::Exponent, PipelineParams { exponent: p, ..cfg.base }))
        .chain(
            cfg.min_importances
                .iter()
                .map(|&e| (Sweep::MinImportance, PipelineParams { min_importance: e, ..cfg.base })),
        );
    let mut rows = Vec::new();
    for (sweep, params) in points {
        let (stage_ms, total_ms, adds) = measure(ds, tfs, &params, cfg.mode, cfg.repeats)?;
        rows.push(BenchRow {
            sweep,
            exponent: params.exponent,
            min_importance: params.min_importance,
            width: params.width,
            repeats: cfg.repeats,
            stage_ms,
            total_ms,
            adds,
        });
    }
    Ok(rows)
}

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["sweep", "exponent", "min_importance", "width", "repeats"]
        .map(String::from)
        .to_vec();
    h.extend(Stage::ALL.iter().map(|s| format!("{}_ms", s.name())));
    h.push("total_ms".into());
    h.extend(
        ["adds_min", "adds_q1", "adds_median", "adds_q3", "adds_max", "adds_total"].map(String::from),
    );
    h
}

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for r in rows {
        let mut rec = vec![
            r.sweep.name().to_owned(),
            r.exponent.to_string(),
            r.min_importance.to_string(),
            r.width.to_string(),
            r.repeats.to_string(),
        ];
        rec.extend(r.stage_ms.iter().map(|ms| format!("{ms:.4}")));
        rec.push(format!("{:.4}", r.total_ms));
        rec.extend([
            r.adds.min.to_string(),
            r.adds.q1.to_string(),
            r.adds.median.to_string(),
            r.adds.q3.to_string(),
            r.adds.max.to_string(),
            r.adds.total.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
