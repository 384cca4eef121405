#![allow(dead_code)]

use ivl_core::pipeline::{CumulativeMap, PipelineParams};
use ivl_core::study::random_tf;
use ivl_core::synth::{generate, SynthKind, SynthSpec};
use ivl_core::{Cell, Dataset, ScalarField, TransferFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub ds: Dataset,
    pub tfs: Vec<TransferFunction>,
    pub params: PipelineParams,
    pub label: String,
}

pub const KINDS: [SynthKind; 3] = [SynthKind::NestedLevels, SynthKind::Noise, SynthKind::Gradient];

/// A random dataset with between `min_cells` and `max_cells` cells, 1-4
/// fields, 1-4 levels, random transfer functions and random parameters.
pub fn random_fixture(seed: u64, min_cells: usize, max_cells: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let kind = KINDS[rng.gen_range(0..KINDS.len())];
        let levels: u8 = rng.gen_range(1..=4);
        let fields = rng.gen_range(1..=4);
        let target = rng.gen_range(min_cells..=max_cells);
        let step = 1u32 << (levels - 1);
        let mut spec = SynthSpec {
            kind,
            size: step,
            levels,
            fields,
            seed: rng.gen(),
        };
        let mut count = spec.cells().unwrap().len();
        while count < target {
            spec.size += step;
            count = spec.cells().unwrap().len();
        }
        if count > max_cells {
            continue;
        }
        let ds = generate(&spec).unwrap();
        let tfs = ds
            .fields()
            .iter()
            .map(|f| {
                let monotone = rng.gen_bool(0.5);
                random_tf(f.name(), 256, &mut rng, monotone)
            })
            .collect::<Result<Vec<_>, _>>()
            .unwrap();
        let params = PipelineParams {
            exponent: rng.gen_range(0.0..3.0),
            min_importance: rng.gen_range(0.01..0.25),
            width: [64, 333, 1000, 1024][rng.gen_range(0..4)],
            ..PipelineParams::default()
        };
        let label = format!(
            "{kind} size={} levels={levels} fields={fields} cells={} P={:.3} eps={:.3} W={}",
            spec.size,
            ds.len(),
            params.exponent,
            params.min_importance,
            params.width
        );
        return Fixture { ds, tfs, params, label };
    }
}

/// 8 level-1 cells filling z in [0, 2), then 56 level-0 cells on the z = 2
/// plane, x in 0..8 and y in 0..7.
pub fn two_level_64(fields: usize) -> Dataset {
    let mut cells = Vec::new();
    for y in (0..4).step_by(2) {
        for x in (0..8).step_by(2) {
            cells.push(Cell::new([x, y, 0], 1));
        }
    }
    for y in 0..7 {
        for x in 0..8 {
            cells.push(Cell::new([x, y, 2], 0));
        }
    }
    let n = cells.len();
    let fields = (0..fields)
        .map(|k| {
            let values = (0..n)
                .map(|i| ((i * (k + 3) + 7 * k) % 17) as f32 / 16.0)
                .collect();
            ScalarField::new(format!("f{k}"), values).unwrap()
        })
        .collect();
    Dataset::new(cells, fields).unwrap()
}

/// Plain left-to-right running sum.
pub fn naive_prefix(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Bins `[lo, hi]` whose unit interval `[b, b + 1)` intersects the span, with
/// a zero-width span owning the bin it sits in.
pub fn overlapped_bins(x1: f64, x2: f64, w: usize) -> (usize, usize) {
    let last = w as i64 - 1;
    let mut lo = x1.floor() as i64;
    let mut hi = if x2 > x1 { x2.ceil() as i64 - 1 } else { lo };
    lo = lo.clamp(0, last);
    hi = hi.clamp(lo, last);
    (lo as usize, hi as usize)
}

/// Cells drawn into any bin of `[x0, x1]`, by linear scan.
pub fn drawn_cells(cum: &CumulativeMap, x0: usize, x1: usize) -> Option<(usize, usize)> {
    let mut found = None::<(usize, usize)>;
    for h in 0..cum.len() {
        let (a, b) = cum.x_span(h);
        let (lo, hi) = overlapped_bins(a, b, cum.width());
        if lo <= x1 && hi >= x0 {
            found = Some(found.map_or((h, h), |(f, _)| (f, h)));
        }
    }
    found
}

/// Dense voxel-to-cell table over the logical grid.
pub struct VoxelOracle {
    extent: [u32; 3],
    owner: Vec<u32>,
}

impl VoxelOracle {
    pub fn new(ds: &Dataset) -> Self {
        let e = ds.extent();
        let mut owner = vec![u32::MAX; e.iter().map(|&v| v as usize).product()];
        for (i, c) in ds.cells().iter().enumerate() {
            let w = c.width();
            for z in c.lower[2]..c.lower[2] + w {
                for y in c.lower[1]..c.lower[1] + w {
                    for x in c.lower[0]..c.lower[0] + w {
                        owner[((z * e[1] + y) * e[0] + x) as usize] = i as u32;
                    }
                }
            }
        }
        Self { extent: e, owner }
    }

    pub fn cell_at(&self, p: [f64; 3]) -> Option<usize> {
        let mut v = [0usize; 3];
        for a in 0..3 {
            if !(p[a] >= 0.0 && p[a] < f64::from(self.extent[a])) {
                return None;
            }
            v[a] = p[a].floor() as usize;
        }
        let e = self.extent.map(|x| x as usize);
        let o = self.owner[(v[2] * e[1] + v[1]) * e[0] + v[0]];
        (o != u32::MAX).then_some(o as usize)
    }
}
