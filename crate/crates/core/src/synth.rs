//! Deterministic synthetic AMR datasets.
//!
//! Every kind starts from a tiling of coarsest-level cells and refines
//! recursively. Values are smooth analytic functions of the cell centre plus
//! hash noise keyed by `(seed, field, cell)`, so output is independent of the
//! thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amr::{Cell, Dataset, ScalarField};
use crate::error::{validation, IvlError, Result};
use crate::hilbert::MAX_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Concentric refinement: coarse outside, finest around the centre.
    NestedLevels,
    /// Random refinement and white-noise fields.
    Noise,
    /// Refinement and values both graded along x.
    Gradient,
}

impl FromStr for SynthKind {
    type Err = IvlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested-levels" | "nested" => Ok(Self::NestedLevels),
            "noise" => Ok(Self::Noise),
            "gradient" => Ok(Self::Gradient),
            other => Err(validation(format!(
                "unknown dataset kind '{other}' (nested-levels, noise, gradient)"
            ))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NestedLevels => "nested-levels",
            Self::Noise => "noise",
            Self::Gradient => "gradient",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Logical grid edge length (cubic grid).
    pub size: u32,
    /// Number of refinement levels; cells get levels `0..levels`.
    pub levels: u8,
    pub fields: usize,
    pub seed: u64,
}

const FIELD_NAMES: [&str; 4] = ["density", "temperature", "pressure", "velocity"];

pub fn field_name(k: usize) -> String {
    FIELD_NAMES
        .get(k)
        .map_or_else(|| format!("field{k}"), |s| (*s).to_owned())
}

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_hash(seed: u64, salt: u64, cell: &Cell) -> u64 {
    let mut h = mix(seed ^ salt.wrapping_mul(0xa076_1d64_78bd_642f));
    for c in cell.lower {
        h = mix(h ^ u64::from(c));
    }
    mix(h ^ u64::from(cell.level))
}

/// Uniform in `[0, 1)`.
#[inline]
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(validation("levels must be at least 1"));
        }
        if self.fields == 0 {
            return Err(validation("need at least one field"));
        }
        let coarse = 1u64 << (self.levels - 1);
        if u32::from(self.levels - 1) > MAX_BITS || self.size == 0 {
            return Err(validation(format!(
                "impossible nesting: {} levels on a grid of size {}",
                self.levels, self.size
            )));
        }
        if u64::from(self.size) % coarse != 0 {
            return Err(validation(format!(
                "impossible nesting: size {} is not a multiple of the coarsest cell width {coarse}",
                self.size
            )));
        }
        if self.size > 1 << MAX_BITS {
            return Err(validation(format!(
                "size {} exceeds the 2^{MAX_BITS} grid limit",
                self.size
            )));
        }
        Ok(())
    }

    fn refine(&self, cell: &Cell) -> bool {
        if cell.level == 0 {
            return false;
        }
        let s = f64::from(self.size);
        let half_w = f64::from(cell.width()) / 2.0;
        let centre = cell.lower.map(|c| (f64::from(c) + half_w) / s);
        let frac = f64::from(cell.level) / f64::from(self.levels);
        match self.kind {
            SynthKind::NestedLevels => {
                let r = centre.iter().map(|c| (c - 0.5).powi(2)).sum::<f64>().sqrt();
                r < 0.5 * frac
            }
            SynthKind::Gradient => centre[0] < frac,
            SynthKind::Noise => unit(cell_hash(self.seed, 0xce11, cell)) < 0.45,
        }
    }

    fn emit(&self, cell: Cell, out: &mut Vec<Cell>) {
        if !self.refine(&cell) {
            out.push(cell);
            return;
        }
        let level = cell.level - 1;
        let w = 1u32 << level;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let lower = [
                        cell.lower[0] + dx * w,
                        cell.lower[1] + dy * w,
                        cell.lower[2] + dz * w,
                    ];
                    self.emit(Cell::new(lower, level), out);
                }
            }
        }
    }

    fn count_from(&self, cell: Cell) -> u64 {
        if !self.refine(&cell) {
            return 1;
        }
        let level = cell.level - 1;
        let w = 1u32 << level;
        let mut n = 0;
        for k in 0..8u32 {
            let lower = [
                cell.lower[0] + (k & 1) * w,
                cell.lower[1] + (k >> 1 & 1) * w,
                cell.lower[2] + (k >> 2) * w,
            ];
            n += self.count_from(Cell::new(lower, level));
        }
        n
    }

    /// Number of cells [`cells`](Self::cells) would produce, without allocating them.
    pub fn count_cells(&self) -> Result<u64> {
        self.validate()?;
        let top = self.levels - 1;
        let w = 1u32 << top;
        let per_axis = self.size / w;
        Ok((0..per_axis)
            .into_par_iter()
            .map(|z| {
                let mut n = 0;
                for y in 0..per_axis {
                    for x in 0..per_axis {
                        n += self.count_from(Cell::new([x * w, y * w, z * w], top));
                    }
                }
                n
            })
            .sum())
    }

    /// The valid size whose cell count is closest to `target`, keeping the
    /// other parameters. Sizes are searched from a cubic estimate.
    pub fn with_cell_target(mut self, target: u64) -> Result<Self> {
        self.validate()?;
        let step = 1u32 << (self.levels - 1);
        let probe = Self { size: step * 16, ..self };
        let density = probe.count_cells()? as f64 / f64::from(probe.size).powi(3);
        let guess = ((target as f64 / density).cbrt() / f64::from(step)).round().max(1.0) as u32;
        let mut best: Option<(u64, u32)> = None;
        for k in guess.saturating_sub(2).max(1)..=guess + 2 {
            let size = k * step;
            if size > 1 << MAX_BITS {
                break;
            }
            let n = Self { size, ..self }.count_cells()?;
            let err = n.abs_diff(target);
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, size));
            }
        }
        self.size = best.map_or(step, |(_, s)| s);
        Ok(self)
    }

    /// Cells only, in generation order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let top = self.levels - 1;
        let w = 1u32 << top;
        let per_axis = self.size / w;
        let slabs: Vec<Vec<Cell>> = (0..per_axis)
            .into_par_iter()
            .map(|z| {
                let mut out = Vec::new();
                for y in 0..per_axis {
                    for x in 0..per_axis {
                        self.emit(Cell::new([x * w, y * w, z * w], top), &mut out);
                    }
                }
                out
            })
            .collect();
        Ok(slabs.concat())
    }

    fn value(&self, k: usize, cell: &Cell) -> f32 {
        let s = f64::from(self.size);
        let half_w = f64::from(cell.width()) / 2.0;
        let u = cell.lower.map(|c| (f64::from(c) + half_w) / s);
        let noise = unit(cell_hash(self.seed, k as u64 + 1, cell));
        let kf = k as f64;
        let tau = std::f64::consts::TAU;
        let v = match self.kind {
            SynthKind::NestedLevels => {
                let r2 = u.iter().map(|c| (c - 0.5).powi(2)).sum::<f64>();
                let sigma = 0.12 + 0.05 * kf;
                let blob = (-r2 / (sigma * sigma)).exp();
                let ripple = (tau * (kf + 2.0) * u[0] + kf).sin() * (tau * (kf + 1.0) * u[1]).sin();
                blob * (1.0 + 0.5 * ripple) + 0.02 * noise
            }
            SynthKind::Noise => noise,
            SynthKind::Gradient => {
                u[0] * (kf + 1.0) + 0.1 * (tau * (kf + 1.0) * u[2]).sin() + 0.01 * noise
            }
        };
        v as f32
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    let cells = spec.cells()?;
    let fields = (0..spec.fields)
        .map(|k| {
            let values = cells.par_iter().map(|c| spec.value(k, c)).collect();
            ScalarField::new(field_name(k), values)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::with_extent([spec.size; 3], cells, fields)
}

/// A dataset whose members are `members` copies of one field of `ds`; the
/// ensemble differs only through the members' transfer functions.
pub fn replicate_field(ds: &Dataset, field: &str, members: usize) -> Result<Dataset> {
    let src = ds
        .field(field)
        .ok_or_else(|| validation(format!("no field named '{field}'")))?;
    let fields = (0..members)
        .map(|m| ScalarField::new(format!("member{m}"), src.values().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Dataset::with_extent(ds.extent(), ds.cells().to_vec(), fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SynthKind, size: u32, levels: u8) -> SynthSpec {
        SynthSpec {
            kind,
            size,
            levels,
            fields: 2,
            seed: 9,
        }
    }

    #[test]
    fn single_level_is_all_finest() {
        for kind in [SynthKind::NestedLevels, SynthKind::Noise, SynthKind::Gradient] {
            let ds = generate(&spec(kind, 8, 1)).unwrap();
            assert_eq!(ds.len(), 512);
            assert_eq!(ds.levels(), vec![0]);
        }
    }

    #[test]
    fn nested_is_coarse_outside_fine_inside() {
        let ds = generate(&spec(SynthKind::NestedLevels, 64, 4)).unwrap();
        assert_eq!(ds.levels(), vec![0, 1, 2, 3]);
        let idx = ds.spatial_index();
        let at = |p: [f64; 3]| ds.cells()[idx.locate(p).unwrap()].level;
        assert_eq!(at([32.0, 32.0, 32.0]), 0);
        assert_eq!(at([0.5, 0.5, 0.5]), 3);
    }

    #[test]
    fn deterministic_by_seed() {
        let a = generate(&spec(SynthKind::Noise, 16, 3)).unwrap();
        let b = generate(&spec(SynthKind::Noise, 16, 3)).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthSpec { seed: 10, ..spec(SynthKind::Noise, 16, 3) }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn impossible_nesting() {
        assert!(generate(&spec(SynthKind::NestedLevels, 12, 4)).is_err());
        assert!(generate(&spec(SynthKind::NestedLevels, 8, 0)).is_err());
        assert!(generate(&SynthSpec { fields: 0, ..spec(SynthKind::Noise, 8, 1) }).is_err());
    }

    #[test]
    fn covers_the_grid_without_gaps() {
        for kind in [SynthKind::NestedLevels, SynthKind::Noise, SynthKind::Gradient] {
            let ds = generate(&spec(kind, 16, 3)).unwrap();
            let volume: u64 = ds.cells().iter().map(|c| u64::from(c.width()).pow(3)).sum();
            assert_eq!(volume, 16 * 16 * 16, "{kind}");
        }
    }

    #[test]
    fn counting_matches_generation_and_hits_targets() {
        for kind in [SynthKind::NestedLevels, SynthKind::Noise, SynthKind::Gradient] {
            let s = spec(kind, 32, 4);
            assert_eq!(s.count_cells().unwrap(), s.cells().unwrap().len() as u64);
        }
        let s = spec(SynthKind::NestedLevels, 8, 4).with_cell_target(200_000).unwrap();
        let n = s.count_cells().unwrap() as f64;
        assert!((n / 200_000.0 - 1.0).abs() < 0.05, "{n}");
    }

    #[test]
    fn replicated_members_share_values() {
        let ds = generate(&spec(SynthKind::Gradient, 8, 2)).unwrap();
        let ens = replicate_field(&ds, "density", 3).unwrap();
        assert_eq!(ens.fields().len(), 3);
        assert!(ens.fields().iter().all(|f| f.values() == ds.fields()[0].values()));
        assert_eq!(ens.codes(), ds.codes());
    }
}
