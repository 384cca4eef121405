//! RGBα transfer functions and the maximum-ensemble-variation estimates.
//!
//! A transfer function is a table of `N >= 2` RGBα entries over the normalized
//! scalar domain `[0, 1]`, sampled piecewise-linearly. Its alpha channel drives
//! both the per-cell importance and the plot height, so every consumer samples
//! through [`TransferFunction::sample`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amr::{Dataset, ScalarField};
use crate::error::{domain, validation, IvlError, Result};

pub type Rgba = [f64; 4];

/// Default table size for generated transfer functions.
pub const DEFAULT_ENTRIES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfDoc", into = "TfDoc")]
pub struct TransferFunction {
    field: String,
    entries: Vec<Rgba>,
    domain: Option<(f64, f64)>,
}

/// JSON shape: `{ "field": "...", "entries": [[r, g, b, a], ...], "domain": [lo, hi] }`.
/// `domain` is optional; without it values normalize over the field's raw range.
#[derive(Serialize, Deserialize)]
struct TfDoc {
    field: String,
    entries: Vec<Rgba>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<[f64; 2]>,
}

impl TryFrom<TfDoc> for TransferFunction {
    type Error = IvlError;

    fn try_from(doc: TfDoc) -> Result<Self> {
        let tf = Self::new(doc.field, doc.entries)?;
        match doc.domain {
            Some([lo, hi]) => tf.with_domain(lo, hi),
            None => Ok(tf),
        }
    }
}

impl From<TransferFunction> for TfDoc {
    fn from(tf: TransferFunction) -> Self {
        Self {
            field: tf.field,
            entries: tf.entries,
            domain: tf.domain.map(|(lo, hi)| [lo, hi]),
        }
    }
}

/// Affine map from raw field values onto `[0, 1]`, clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    lo: f64,
    inv_width: f64,
}

impl Normalizer {
    pub fn new(lo: f64, hi: f64) -> Self {
        let width = hi - lo;
        let inv_width = if width > 0.0 { 1.0 / width } else { 0.0 };
        Self { lo, inv_width }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.lo) * self.inv_width).clamp(0.0, 1.0)
    }
}

impl TransferFunction {
    pub fn new(field: impl Into<String>, entries: Vec<Rgba>) -> Result<Self> {
        let field = field.into();
        if entries.len() < 2 {
            return Err(validation(format!(
                "transfer function for '{field}' needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        if let Some(i) = entries
            .iter()
            .position(|e| e.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(validation(format!(
                "transfer function for '{field}': entry {i} has a channel outside [0, 1]"
            )));
        }
        Ok(Self {
            field,
            entries,
            domain: None,
        })
    }

    /// Builds an `n`-entry table by linear interpolation between knots
    /// `(position in [0,1], colour)`. Knots need not be sorted.
    pub fn from_knots(field: impl Into<String>, n: usize, knots: &[(f64, Rgba)]) -> Result<Self> {
        if knots.is_empty() {
            return Err(validation("transfer function needs at least one knot"));
        }
        let mut knots = knots.to_vec();
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        let entries = (0..n)
            .map(|k| {
                let t = k as f64 / (n.max(2) - 1) as f64;
                let after = knots.partition_point(|kn| kn.0 <= t);
                if after == 0 {
                    return knots[0].1;
                }
                if after == knots.len() {
                    return knots[after - 1].1;
                }
                let (t0, c0) = knots[after - 1];
                let (t1, c1) = knots[after];
                let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
                lerp(c0, c1, s)
            })
            .collect();
        Self::new(field, entries)
    }

    /// α rises linearly from 0 to 1; colour follows a perceptual blue-to-yellow ramp.
    pub fn identity(field: impl Into<String>, n: usize) -> Result<Self> {
        let ramp = [
            [0.267, 0.005, 0.329],
            [0.229, 0.322, 0.546],
            [0.128, 0.567, 0.551],
            [0.369, 0.789, 0.383],
            [0.993, 0.906, 0.144],
        ];
        let knots: Vec<(f64, Rgba)> = ramp
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let t = i as f64 / 4.0;
                (t, [c[0], c[1], c[2], t])
            })
            .collect();
        Self::from_knots(field, n, &knots)
    }

    /// `alpha = t^gamma` with a cool-to-warm colour ramp.
    pub fn alpha_ramp(field: impl Into<String>, n: usize, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(validation(format!("ramp exponent {gamma} must be positive")));
        }
        let knots: Vec<(f64, Rgba)> = (0..=16)
            .map(|i| {
                let t = f64::from(i) / 16.0;
                (t, [t, 0.35 + 0.3 * t, 1.0 - t, t.powf(gamma)])
            })
            .collect();
        Self::from_knots(field, n, &knots)
    }

    /// Grey table with a single alpha everywhere.
    pub fn constant_alpha(field: impl Into<String>, n: usize, alpha: f64) -> Result<Self> {
        Self::new(field, vec![[0.5, 0.5, 0.5, alpha]; n])
    }

    /// Normalizes values over `[lo, hi]` instead of the field's raw range.
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(validation(format!("invalid normalization domain [{lo}, {hi}]")));
        }
        self.domain = Some((lo, hi));
        Ok(self)
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn entries(&self) -> &[Rgba] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        self.domain
    }

    /// Normalizer for `field`: the explicit domain if set, else the raw range.
    pub fn normalizer(&self, field: &ScalarField) -> Normalizer {
        let (lo, hi) = self.domain.unwrap_or_else(|| {
            let (lo, hi) = field.range();
            (f64::from(lo), f64::from(hi))
        });
        Normalizer::new(lo, hi)
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.entries.len() - 1;
        let pos = t.clamp(0.0, 1.0) * last as f64;
        let i = (pos.floor() as usize).min(last - 1);
        (i, pos - i as f64)
    }

    /// Piecewise-linear lookup at `t * (N - 1)`; `t` is clamped to `[0, 1]`.
    #[inline]
    pub fn sample(&self, t: f64) -> Rgba {
        let (i, s) = self.locate(t);
        lerp(self.entries[i], self.entries[i + 1], s)
    }

    /// Alpha channel of [`sample`](Self::sample).
    #[inline]
    pub fn alpha(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let (a, b) = (self.entries[i][3], self.entries[i + 1][3]);
        a + (b - a) * s
    }

    /// The same function tabulated at `n` entries.
    pub fn resampled(&self, n: usize) -> Result<Self> {
        if n == self.entries.len() {
            return Ok(self.clone());
        }
        let entries = (0..n)
            .map(|k| self.sample(k as f64 / (n.max(2) - 1) as f64))
            .collect();
        Ok(Self {
            domain: self.domain,
            ..Self::new(self.field.clone(), entries)?
        })
    }

    /// Whether alpha never decreases along the table.
    pub fn is_monotone_alpha(&self) -> bool {
        self.entries.windows(2).all(|w| w[0][3] <= w[1][3])
    }
}

#[inline]
fn lerp(a: Rgba, b: Rgba, s: f64) -> Rgba {
    [
        a[0] + (b[0] - a[0]) * s,
        a[1] + (b[1] - a[1]) * s,
        a[2] + (b[2] - a[2]) * s,
        a[3] + (b[3] - a[3]) * s,
    ]
}

/// Closed range of table indices `[lo, hi]` touched by a field's data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: usize,
    pub hi: usize,
}

/// Table indices a field's values can reach: `floor` of the normalized minimum
/// and `ceil` of the normalized maximum, scaled by `N - 1`.
pub fn data_index_range(field: &ScalarField, tf: &TransferFunction) -> IndexRange {
    let norm = tf.normalizer(field);
    let last = (tf.len() - 1) as f64;
    let (vmin, vmax) = field.range();
    let lo = (norm.apply(f64::from(vmin)) * last).floor() as usize;
    let hi = (norm.apply(f64::from(vmax)) * last).ceil() as usize;
    let last = tf.len() - 1;
    IndexRange {
        lo: lo.min(last),
        hi: hi.clamp(lo.min(last), last),
    }
}

/// Table-space estimate of `max_h V_h`: the largest alpha spread between
/// members over the union of their data index ranges.
pub fn approx_max_variation(tfs: &[TransferFunction], ranges: &[IndexRange]) -> Result<f64> {
    let first = tfs
        .first()
        .ok_or_else(|| domain("approx_max_variation needs at least one member"))?;
    if ranges.len() != tfs.len() {
        return Err(domain(format!(
            "{} index ranges for {} transfer functions",
            ranges.len(),
            tfs.len()
        )));
    }
    let n = first.len();
    if let Some(tf) = tfs.iter().find(|tf| tf.len() != n) {
        return Err(domain(format!(
            "transfer function for '{}' has {} entries, expected {n}; resample first",
            tf.field(),
            tf.len()
        )));
    }
    let lo = ranges.iter().map(|r| r.lo).min().unwrap_or(0);
    let hi = ranges.iter().map(|r| r.hi).max().unwrap_or(0).min(n - 1);
    let mut best = 0.0f64;
    for a in lo..=hi {
        let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
        for tf in tfs {
            let alpha = tf.entries[a][3];
            amin = amin.min(alpha);
            amax = amax.max(alpha);
        }
        best = best.max(amax - amin);
    }
    Ok(best)
}

/// [`approx_max_variation`] for a dataset: resamples to a common table size
/// when members differ, then derives each member's index range.
pub fn approx_max_variation_for(ds: &Dataset, tfs: &[TransferFunction]) -> Result<f64> {
    check_tfs(ds, tfs)?;
    let n = tfs.iter().map(TransferFunction::len).max().unwrap_or(2);
    let common: Vec<TransferFunction> = tfs
        .iter()
        .map(|tf| tf.resampled(n))
        .collect::<Result<_>>()?;
    let ranges: Vec<IndexRange> = ds
        .fields()
        .iter()
        .zip(&common)
        .map(|(f, tf)| data_index_range(f, tf))
        .collect();
    approx_max_variation(&common, &ranges)
}

/// Alpha column of a transfer function bound to one field's normalization.
/// Evaluates exactly like `tf.alpha(norm.apply(v))`.
#[derive(Debug, Clone)]
pub(crate) struct AlphaLookup {
    alpha: Vec<f64>,
    norm: Normalizer,
    last: f64,
}

impl AlphaLookup {
    pub(crate) fn new(tf: &TransferFunction, field: &ScalarField) -> Self {
        Self {
            alpha: tf.entries.iter().map(|e| e[3]).collect(),
            norm: tf.normalizer(field),
            last: (tf.entries.len() - 1) as f64,
        }
    }

    #[inline]
    pub(crate) fn at(&self, v: f32) -> f64 {
        let pos = self.norm.apply(f64::from(v)) * self.last;
        let i = (pos as usize).min(self.alpha.len() - 2);
        let s = pos - i as f64;
        let (a, b) = (self.alpha[i], self.alpha[i + 1]);
        a + (b - a) * s
    }
}

pub(crate) fn alpha_lookups(ds: &Dataset, tfs: &[TransferFunction]) -> Vec<AlphaLookup> {
    ds.fields()
        .iter()
        .zip(tfs)
        .map(|(f, tf)| AlphaLookup::new(tf, f))
        .collect()
}

/// Alpha spread between members at cell `h`.
#[inline]
pub(crate) fn cell_variation(h: usize, fields: &[ScalarField], lookups: &[AlphaLookup]) -> f64 {
    let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (f, lookup) in fields.iter().zip(lookups) {
        let a = lookup.at(f.values()[h]);
        amin = amin.min(a);
        amax = amax.max(a);
    }
    amax - amin
}

/// Exact `max_h V_h` over every cell, reduced in parallel.
pub fn exact_max_variation(ds: &Dataset, tfs: &[TransferFunction]) -> Result<f64> {
    check_tfs(ds, tfs)?;
    let lookups = alpha_lookups(ds, tfs);
    let fields = ds.fields();
    Ok((0..ds.len())
        .into_par_iter()
        .map(|h| cell_variation(h, fields, &lookups))
        .reduce(|| 0.0, f64::max))
}

/// Requires one transfer function per field, in field order.
pub fn check_tfs(ds: &Dataset, tfs: &[TransferFunction]) -> Result<()> {
    if tfs.len() != ds.fields().len() {
        return Err(validation(format!(
            "{} transfer functions for {} fields",
            tfs.len(),
            ds.fields().len()
        )));
    }
    for (f, tf) in ds.fields().iter().zip(tfs) {
        if tf.field() != f.name() {
            return Err(validation(format!(
                "transfer function for '{}' supplied for field '{}'",
                tf.field(),
                f.name()
            )));
        }
    }
    Ok(())
}

/// One [`TransferFunction::alpha_ramp`] per field with exponents 1, 2, 3, ...
/// so members start out distinct.
pub fn default_tfs(ds: &Dataset) -> Vec<TransferFunction> {
    ds.fields()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            TransferFunction::alpha_ramp(f.name(), DEFAULT_ENTRIES, (k + 1) as f64)
                .expect("positive ramp exponent")
        })
        .collect()
}

/// Orders `tfs` to match the dataset's fields by name.
pub fn tfs_in_field_order(ds: &Dataset, tfs: Vec<TransferFunction>) -> Result<Vec<TransferFunction>> {
    let mut slots: Vec<Option<TransferFunction>> = vec![None; ds.fields().len()];
    for tf in tfs {
        let i = ds
            .field_index(tf.field())
            .ok_or_else(|| validation(format!("no field named '{}'", tf.field())))?;
        slots[i] = Some(tf);
    }
    slots
        .into_iter()
        .zip(ds.fields())
        .map(|(s, f)| s.ok_or_else(|| validation(format!("missing transfer function for '{}'", f.name()))))
        .collect()
}
