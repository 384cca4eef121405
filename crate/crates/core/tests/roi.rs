mod common;

use common::{drawn_cells, random_fixture, VoxelOracle};
use ivl_core::roi::{pixels_to_roi, point_in_rois, render_slice, Axis, Roi};
use ivl_core::{run_pipeline, ExecMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn brushes_and_points_match_brute_force() {
    for seed in 40..43 {
        let fx = random_fixture(seed, 2_000, 12_000);
        let out = run_pipeline(&fx.ds, &fx.tfs, &fx.params, ExecMode::Parallel).unwrap();
        let cum = &out.cumulative;
        let w = cum.width();
        let voxels = VoxelOracle::new(&fx.ds);
        let index = fx.ds.spatial_index();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let extent = fx.ds.extent().map(f64::from);
        for _ in 0..2_000 {
            let x0 = rng.gen_range(0..w);
            let x1 = rng.gen_range(x0..w.min(x0 + 40));
            let roi = pixels_to_roi(x0, x1, cum, &fx.ds).unwrap();
            let cells = drawn_cells(cum, x0, x1);
            assert_eq!(
                roi,
                cells.map(|(a, b)| Roi { lo: fx.ds.codes()[a], hi: fx.ds.codes()[b] }),
                "{} [{x0}, {x1}]",
                fx.label
            );
            let (a, b) = cells.unwrap();
            let p = [0, 1, 2].map(|k| rng.gen_range(-1.0..extent[k] + 1.0));
            let expect = voxels.cell_at(p).is_some_and(|i| (a..=b).contains(&i));
            assert_eq!(point_in_rois(p, &[roi.unwrap()], &fx.ds, &index), expect, "{} {p:?}", fx.label);
        }
    }
}

#[test]
fn slices_dim_only_outside_the_selection() {
    let fx = random_fixture(8, 2_000, 6_000);
    let out = run_pipeline(&fx.ds, &fx.tfs, &fx.params, ExecMode::Sequential).unwrap();
    let w = out.cumulative.width();
    let roi = pixels_to_roi(w / 4, w / 2, &out.cumulative, &fx.ds).unwrap().unwrap();
    let index = fx.ds.spatial_index();
    let voxels = VoxelOracle::new(&fx.ds);
    let field = fx.ds.fields()[0].name();
    let coord = f64::from(fx.ds.extent()[2]) / 2.0 + 0.25;
    let plain = render_slice(&fx.ds, &index, &fx.tfs[0], field, Axis::Z, coord, &[], 0.35).unwrap();
    let dimmed = render_slice(&fx.ds, &index, &fx.tfs[0], field, Axis::Z, coord, &[roi], 0.35).unwrap();
    for v in 0..plain.height {
        for u in 0..plain.width {
            let i = voxels.cell_at([u as f64 + 0.5, v as f64 + 0.5, coord]).unwrap();
            let (p, d) = (plain.pixel(u, v), dimmed.pixel(u, v));
            assert_eq!(p[3], d[3]);
            if roi.contains(fx.ds.codes()[i]) {
                assert_eq!(p, d);
            } else {
                for c in 0..3 {
                    assert!(d[c] <= p[c]);
                }
            }
        }
    }
    let full = pixels_to_roi(0, w - 1, &out.cumulative, &fx.ds).unwrap().unwrap();
    let all = render_slice(&fx.ds, &index, &fx.tfs[0], field, Axis::Z, coord, &[full], 0.35).unwrap();
    assert_eq!(all, plain);
}
