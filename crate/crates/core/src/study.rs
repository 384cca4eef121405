//! Randomized comparison of the exact maximum alpha spread against the
//! table-space estimate used to normalize importance.
//!
//! Each trial draws one piecewise-linear transfer function per field. Alpha
//! knots sit at 0, 1 and a random number of uniform interior positions, with
//! uniform alpha and colour values. Monotone trials sort the alpha values so
//! alpha is non-decreasing in the data value.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amr::Dataset;
use crate::error::{validation, IvlError, Result};
use crate::transfer::{approx_max_variation_for, exact_max_variation, Rgba, TransferFunction, DEFAULT_ENTRIES};

pub const DEFAULT_TRIALS: usize = 107;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TfFamily {
    Arbitrary,
    Monotone,
    /// Each trial is monotone or arbitrary with equal probability.
    Mixed,
}

impl FromStr for TfFamily {
    type Err = IvlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arbitrary" => Ok(Self::Arbitrary),
            "monotone" => Ok(Self::Monotone),
            "mixed" => Ok(Self::Mixed),
            other => Err(validation(format!(
                "unknown transfer-function family '{other}' (arbitrary, monotone, mixed)"
            ))),
        }
    }
}

impl fmt::Display for TfFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Arbitrary => "arbitrary",
            Self::Monotone => "monotone",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaTrial {
    pub trial: usize,
    pub exact: f64,
    pub approx: f64,
    /// `approx - exact`; negative means the estimate undershoots.
    pub gap: f64,
    pub monotone: bool,
}

pub fn random_tf(field: &str, n: usize, rng: &mut impl Rng, monotone: bool) -> Result<TransferFunction> {
    let interior = rng.gen_range(0..=4);
    let mut positions = vec![0.0, 1.0];
    positions.extend((0..interior).map(|_| rng.gen::<f64>()));
    positions.sort_by(f64::total_cmp);
    let mut alphas: Vec<f64> = (0..positions.len()).map(|_| rng.gen()).collect();
    if monotone {
        alphas.sort_by(f64::total_cmp);
    }
    let knots: Vec<(f64, Rgba)> = positions
        .iter()
        .zip(&alphas)
        .map(|(&t, &a)| (t, [rng.gen(), rng.gen(), rng.gen(), a]))
        .collect();
    TransferFunction::from_knots(field, n, &knots)
}

/// Runs `trials` random configurations over `ds`, deterministically in `seed`.
pub fn va_compare(ds: &Dataset, trials: usize, seed: u64, family: TfFamily) -> Result<Vec<VaTrial>> {
    if ds.fields().len() < 2 {
        return Err(validation("the comparison needs at least two fields"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|trial| {
            let monotone = match family {
                TfFamily::Arbitrary => false,
                TfFamily::Monotone => true,
                TfFamily::Mixed => rng.gen_bool(0.5),
            };
            let tfs = ds
                .fields()
                .iter()
                .map(|f| random_tf(f.name(), DEFAULT_ENTRIES, &mut rng, monotone))
                .collect::<Result<Vec<_>>>()?;
            compare(ds, &tfs, trial)
        })
        .collect()
}

/// One trial with the given transfer functions.
pub fn compare(ds: &Dataset, tfs: &[TransferFunction], trial: usize) -> Result<VaTrial> {
    let exact = exact_max_variation(ds, tfs)?;
    let approx = approx_max_variation_for(ds, tfs)?;
    Ok(VaTrial {
        trial,
        exact,
        approx,
        gap: approx - exact,
        monotone: tfs.iter().all(TransferFunction::is_monotone_alpha),
    })
}

pub fn write_csv(rows: &[VaTrial], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
