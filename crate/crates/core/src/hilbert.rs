//! 3D Hilbert curve on a `2^b`-per-axis quantization grid.
//!
//! Uses Skilling's transpose formulation ("Programming the Hilbert curve",
//! AIP Conf. Proc. 707, 2004). The curve starts at the origin, so
//! `decode3d(0, b) == [0, 0, 0]` for every order, and consecutive codes always
//! decode to face-adjacent grid points.
//!
//! The recursive construction also means every aligned sub-cube of side `2^L`
//! occupies one contiguous run of `8^L` codes. The AMR model relies on that to
//! check overlap and to locate cells without a separate spatial structure.

use crate::error::{domain, Result};

/// Largest supported order; `3 * 21 = 63` bits fit a `u64`.
pub const MAX_BITS: u32 = 21;

/// Index along the Hilbert curve.
pub type HilbertCode = u64;

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(domain(format!(
            "Hilbert order {bits} outside [1, {MAX_BITS}]"
        )));
    }
    Ok(())
}

/// Encodes a grid point into its Hilbert index.
pub fn encode3d(p: [u32; 3], bits: u32) -> Result<HilbertCode> {
    check_bits(bits)?;
    let side = 1u64 << bits;
    if let Some(axis) = (0..3).find(|&a| u64::from(p[a]) >= side) {
        return Err(domain(format!(
            "coordinate {} on axis {axis} outside [0, {side})",
            p[axis]
        )));
    }
    Ok(encode3d_unchecked(p, bits))
}

/// Decodes a Hilbert index back into its grid point.
pub fn decode3d(code: HilbertCode, bits: u32) -> Result<[u32; 3]> {
    check_bits(bits)?;
    if code >> (3 * bits) != 0 {
        return Err(domain(format!(
            "code {code} outside [0, 2^{})",
            3 * bits
        )));
    }
    Ok(decode3d_unchecked(code, bits))
}

/// [`encode3d`] without argument checks. Callers guarantee `1 <= bits <= 21`
/// and every coordinate `< 2^bits`.
#[inline]
pub fn encode3d_unchecked(p: [u32; 3], bits: u32) -> HilbertCode {
    debug_assert!((1..=MAX_BITS).contains(&bits));
    let mut x = p;
    let m = 1u32 << (bits - 1);

    // Inverse undo.
    let mut q = m;
    while q > 1 {
        let pm = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= pm;
            } else {
                let t = (x[0] ^ x[i]) & pm;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    // Gray encode.
    x[1] ^= x[0];
    x[2] ^= x[1];
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in &mut x {
        *v ^= t;
    }

    interleave(x, bits)
}

/// [`decode3d`] without argument checks.
#[inline]
pub fn decode3d_unchecked(code: HilbertCode, bits: u32) -> [u32; 3] {
    debug_assert!((1..=MAX_BITS).contains(&bits));
    let mut x = deinterleave(code, bits);
    let n = 2u64 << (bits - 1);

    // Gray decode.
    let t = x[2] >> 1;
    x[2] ^= x[1];
    x[1] ^= x[0];
    x[0] ^= t;

    // Undo excess work.
    let mut q = 2u64;
    while q != n {
        let q32 = q as u32;
        let pm = q32 - 1;
        for i in (0..3).rev() {
            if x[i] & q32 != 0 {
                x[0] ^= pm;
            } else {
                let t = (x[0] ^ x[i]) & pm;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q <<= 1;
    }
    x
}

/// Packs the transposed form: bit `k` of axis `a` lands at code bit `3k + 2 - a`.
#[inline]
fn interleave(x: [u32; 3], bits: u32) -> u64 {
    let mut code = 0u64;
    for k in (0..bits).rev() {
        for v in x {
            code = (code << 1) | u64::from((v >> k) & 1);
        }
    }
    code
}

#[inline]
fn deinterleave(code: u64, bits: u32) -> [u32; 3] {
    let mut x = [0u32; 3];
    for k in 0..bits {
        for (a, v) in x.iter_mut().enumerate() {
            let bit = (code >> (3 * k + 2 - a as u32)) & 1;
            *v |= (bit as u32) << k;
        }
    }
    x
}

/// The run of codes `[start, end)` covered by the aligned cube of side `2^level`
/// that contains the grid point with Hilbert index `code`.
#[inline]
pub fn block_range(code: HilbertCode, level: u32) -> (HilbertCode, HilbertCode) {
    let span = 1u64 << (3 * level);
    let start = code & !(span - 1);
    (start, start + span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn manhattan(a: [u32; 3], b: [u32; 3]) -> u32 {
        (0..3).map(|i| a[i].abs_diff(b[i])).sum()
    }

    #[test]
    fn origin_maps_to_zero_for_every_order() {
        for b in 1..=MAX_BITS {
            assert_eq!(encode3d([0, 0, 0], b).unwrap(), 0);
            assert_eq!(decode3d(0, b).unwrap(), [0, 0, 0]);
        }
    }

    #[test]
    fn order_one_visits_all_corners() {
        let mut seen: Vec<[u32; 3]> = (0..8).map(|h| decode3d(h, 1).unwrap()).collect();
        seen.sort();
        let mut corners = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    corners.push([x, y, z]);
                }
            }
        }
        assert_eq!(seen, corners);
    }

    #[test]
    fn order_two_round_trip_and_adjacency() {
        for h in 0..64 {
            assert_eq!(encode3d(decode3d(h, 2).unwrap(), 2).unwrap(), h);
        }
        for h in 0..63 {
            let a = decode3d(h, 2).unwrap();
            let b = decode3d(h + 1, 2).unwrap();
            assert_eq!(manhattan(a, b), 1, "codes {h} and {}", h + 1);
        }
    }

    #[test]
    fn order_three_exhaustive_round_trip() {
        for x in 0..8 {
            for y in 0..8 {
                for z in 0..8 {
                    let p = [x, y, z];
                    assert_eq!(decode3d(encode3d(p, 3).unwrap(), 3).unwrap(), p);
                }
            }
        }
    }

    #[test]
    fn aligned_blocks_are_contiguous_runs() {
        // Every aligned 2^L cube at order 3 must own exactly one run of 8^L codes.
        for level in 0..=3u32 {
            let side = 1u32 << level;
            for h in 0..512u64 {
                let p = decode3d(h, 3).unwrap();
                let (start, end) = block_range(h, level);
                for g in start..end {
                    let q = decode3d(g, 3).unwrap();
                    for a in 0..3 {
                        assert_eq!(q[a] / side, p[a] / side);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_range_arguments() {
        assert!(encode3d([4, 0, 0], 2).is_err());
        assert!(encode3d([0, 0, 0], 0).is_err());
        assert!(encode3d([0, 0, 0], 22).is_err());
        assert!(decode3d(64, 2).is_err());
        assert!(decode3d(0, 0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_order_20(x in 0u32..(1 << 20), y in 0u32..(1 << 20), z in 0u32..(1 << 20)) {
            let h = encode3d([x, y, z], 20).unwrap();
            prop_assert!(h < 1u64 << 60);
            prop_assert_eq!(decode3d(h, 20).unwrap(), [x, y, z]);
        }

        #[test]
        fn neighbours_adjacent_order_21(h in 0u64..((1u64 << 63) - 1)) {
            let a = decode3d(h, 21).unwrap();
            let b = decode3d(h + 1, 21).unwrap();
            prop_assert_eq!(manhattan(a, b), 1);
        }
    }
}
