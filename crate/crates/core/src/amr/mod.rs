//! AMR cells on the logical grid, stored in Hilbert order.
//!
//! A cell is its lower corner on the finest-resolution logical grid plus a
//! refinement level `L` (0 = finest); its width is `2^L`. The hierarchy itself
//! is never stored. The Hilbert quantization grid is the logical grid, so a
//! cell's code is the code of its floored centroid.

mod index;
pub mod io;

pub use index::SpatialIndex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::hilbert::{self, HilbertCode, MAX_BITS};

/// One AMR cell: lower corner in logical-grid units and refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub lower: [u32; 3],
    pub level: u8,
}

impl Cell {
    pub fn new(lower: [u32; 3], level: u8) -> Self {
        Self { lower, level }
    }

    /// Edge length on the logical grid, `2^L`.
    #[inline]
    pub fn width(&self) -> u32 {
        1 << self.level
    }

    /// Exclusive upper corner.
    #[inline]
    pub fn upper(&self) -> [u64; 3] {
        let w = u64::from(self.width());
        self.lower.map(|c| u64::from(c) + w)
    }

    /// Centroid floored onto the logical grid. For `L = 0` this is `lower`.
    #[inline]
    pub fn centroid(&self) -> [u32; 3] {
        let half = self.width() / 2;
        self.lower.map(|c| c + half)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let up = self.upper();
        (0..3).all(|a| p[a] >= f64::from(self.lower[a]) && p[a] < up[a] as f64)
    }
}

/// Hilbert code of a cell's floored centroid.
pub fn centroid_code(cell: &Cell, bits: u32) -> Result<HilbertCode> {
    let c = cell.lower.map(u64::from);
    let half = u64::from(cell.width() / 2);
    let side = 1u64 << bits.min(63);
    if c.iter().any(|&v| v + half >= side) {
        return Err(domain(format!(
            "centroid of cell {:?}/L{} outside the 2^{bits} quantization grid",
            cell.lower, cell.level
        )));
    }
    hilbert::encode3d(cell.centroid(), bits)
}

/// A named scalar field with one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    name: String,
    values: Vec<f32>,
    range: (f32, f32),
}

impl ScalarField {
    pub fn new(name: impl Into<String>, values: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(validation(format!("field '{name}' has no values")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!(
                "field '{name}' has a non-finite value at index {i}"
            )));
        }
        let range = values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(Self {
            name,
            values,
            range,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Raw `(min, max)` of the values.
    pub fn range(&self) -> (f32, f32) {
        self.range
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn permuted(&self, order: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            values: order.iter().map(|&i| self.values[i]).collect(),
            range: self.range,
        }
    }
}

/// Immutable multi-field AMR dataset, co-sorted by ascending centroid code.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    extent: [u32; 3],
    bits: u32,
    cells: Vec<Cell>,
    codes: Vec<HilbertCode>,
    fields: Vec<ScalarField>,
}

/// Smallest order `b >= 1` with `2^b >= extent`.
pub fn bits_for_extent(extent: [u32; 3]) -> Result<u32> {
    let max = extent.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(validation("grid extent must be positive on every axis"));
    }
    let bits = (u32::BITS - (max - 1).leading_zeros()).max(1);
    if bits > MAX_BITS {
        return Err(domain(format!(
            "logical extent {max} exceeds the 2^{MAX_BITS} quantization limit"
        )));
    }
    Ok(bits)
}

impl Dataset {
    /// Builds a dataset whose grid extent is the bounding box of `cells`.
    pub fn new(cells: Vec<Cell>, fields: Vec<ScalarField>) -> Result<Self> {
        let mut extent = [0u32; 3];
        for cell in &cells {
            let up = cell.upper();
            for a in 0..3 {
                let v = u32::try_from(up[a])
                    .map_err(|_| domain("cell extends past the 32-bit logical grid"))?;
                extent[a] = extent[a].max(v);
            }
        }
        Self::with_extent(extent, cells, fields)
    }

    /// Builds a dataset on an explicit logical grid, sorting cells and field
    /// values together by centroid Hilbert code.
    pub fn with_extent(
        extent: [u32; 3],
        cells: Vec<Cell>,
        fields: Vec<ScalarField>,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(validation("dataset needs at least one cell"));
        }
        if fields.is_empty() {
            return Err(validation("dataset needs at least one field"));
        }
        for f in &fields {
            if f.len() != cells.len() {
                return Err(validation(format!(
                    "field '{}' has {} values for {} cells",
                    f.name(),
                    f.len(),
                    cells.len()
                )));
            }
        }
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].iter().any(|g| g.name() == f.name()) {
                return Err(validation(format!("duplicate field name '{}'", f.name())));
            }
        }
        let bits = bits_for_extent(extent)?;

        for (i, cell) in cells.iter().enumerate() {
            if u32::from(cell.level) > bits {
                return Err(validation(format!(
                    "cell {i} level {} is coarser than the {bits}-bit grid",
                    cell.level
                )));
            }
            let w = cell.width();
            if cell.lower.iter().any(|c| c % w != 0) {
                return Err(validation(format!(
                    "cell {i} lower corner {:?} is not aligned to its width {w}",
                    cell.lower
                )));
            }
            let up = cell.upper();
            if (0..3).any(|a| up[a] > u64::from(extent[a])) {
                return Err(validation(format!(
                    "cell {i} at {:?}/L{} lies outside the grid extent {extent:?}",
                    cell.lower, cell.level
                )));
            }
        }

        let raw: Vec<HilbertCode> = cells
            .par_iter()
            .map(|c| hilbert::encode3d_unchecked(c.centroid(), bits))
            .collect();
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.par_sort_unstable_by_key(|&i| (raw[i], cells[i].level));

        let sorted_cells: Vec<Cell> = order.iter().map(|&i| cells[i]).collect();
        let codes: Vec<HilbertCode> = order.iter().map(|&i| raw[i]).collect();

        // Aligned cubes own disjoint or nested code runs; with cells sorted by
        // centroid code any overlap shows up between neighbours.
        for k in 1..codes.len() {
            let (_, prev_end) =
                hilbert::block_range(codes[k - 1], u32::from(sorted_cells[k - 1].level));
            let (next_start, _) =
                hilbert::block_range(codes[k], u32::from(sorted_cells[k].level));
            if prev_end > next_start {
                let (a, b) = (sorted_cells[k - 1], sorted_cells[k]);
                return Err(validation(format!(
                    "cells {:?}/L{} and {:?}/L{} overlap",
                    a.lower, a.level, b.lower, b.level
                )));
            }
        }

        let identity = order.iter().enumerate().all(|(k, &i)| k == i);
        let fields = if identity {
            fields
        } else {
            fields.iter().map(|f| f.permuted(&order)).collect()
        };

        Ok(Self {
            extent,
            bits,
            cells: sorted_cells,
            codes,
            fields,
        })
    }

    /// One level-0 cell per voxel of a structured volume. Each field holds
    /// `nx * ny * nz` values, x varying fastest.
    pub fn import_structured(dims: [u32; 3], fields: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let n = dims.iter().map(|&d| d as usize).product::<usize>();
        if n == 0 {
            return Err(validation("structured dims must be positive"));
        }
        let mut scalar = Vec::with_capacity(fields.len());
        for (name, values) in fields {
            if values.len() != n {
                return Err(validation(format!(
                    "field '{name}' has {} values, expected {n} for dims {dims:?}",
                    values.len()
                )));
            }
            scalar.push(ScalarField::new(name, values)?);
        }
        let mut cells = Vec::with_capacity(n);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    cells.push(Cell::new([x, y, z], 0));
                }
            }
        }
        Self::with_extent(dims, cells, scalar)
    }

    pub fn extent(&self) -> [u32; 3] {
        self.extent
    }

    /// Hilbert order of the quantization grid.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Centroid codes, strictly increasing.
    pub fn codes(&self) -> &[HilbertCode] {
        &self.codes
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        self.fields.iter().find(|f| f.name() == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name() == name)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Distinct refinement levels present, ascending.
    pub fn levels(&self) -> Vec<u8> {
        let mut present = [false; 256];
        for c in &self.cells {
            present[c.level as usize] = true;
        }
        (0..=255u8).filter(|&l| present[l as usize]).collect()
    }

    /// Index of the cell with the given centroid code.
    pub fn position_of(&self, code: HilbertCode) -> Option<usize> {
        self.codes.binary_search(&code).ok()
    }

    pub fn spatial_index(&self) -> SpatialIndex {
        SpatialIndex::build(self)
    }
}
