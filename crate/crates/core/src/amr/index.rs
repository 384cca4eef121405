use super::Dataset;
use crate::hilbert::{self, HilbertCode};

/// Point location over a dataset's cells.
///
/// Each cell owns the run of codes `[start, end)` of its aligned cube. Runs are
/// disjoint and sorted like the cells, so a point is located by encoding its
/// grid position and binary-searching the run starts.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    extent: [u32; 3],
    bits: u32,
    starts: Vec<HilbertCode>,
    ends: Vec<HilbertCode>,
}

impl SpatialIndex {
    pub fn build(ds: &Dataset) -> Self {
        let (starts, ends) = ds
            .codes()
            .iter()
            .zip(ds.cells())
            .map(|(&code, cell)| hilbert::block_range(code, u32::from(cell.level)))
            .unzip();
        Self {
            extent: ds.extent(),
            bits: ds.bits(),
            starts,
            ends,
        }
    }

    /// Index of the cell whose box `[lower, lower + 2^L)` contains `p`, or
    /// `None` when `p` is outside the grid or in a gap.
    pub fn locate(&self, p: [f64; 3]) -> Option<usize> {
        let mut q = [0u32; 3];
        for a in 0..3 {
            let v = p[a];
            if !(v >= 0.0 && v < f64::from(self.extent[a])) {
                return None;
            }
            q[a] = v.floor() as u32;
        }
        let code = hilbert::encode3d_unchecked(q, self.bits);
        let i = self.starts.partition_point(|&s| s <= code);
        (i > 0 && code < self.ends[i - 1]).then(|| i - 1)
    }

    /// Code run owned by cell `i`.
    pub fn run(&self, i: usize) -> (HilbertCode, HilbertCode) {
        (self.starts[i], self.ends[i])
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }
}
