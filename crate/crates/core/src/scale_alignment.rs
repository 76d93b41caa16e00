//! Cross-window depth scale alignment.
//!
//! A new processing window re-estimates depth for frames that are already in
//! the global store. Comparing the stored (aligned) depth `D_old` against the
//! fresh estimate `D_new` over confidently observed pixels gives a single
//! least-squares scale `s = sum(D_old * D_new) / sum(D_new^2)` that maps the
//! window onto the stored geometry.

use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};
use crate::raster::{ConfidenceMap, DepthMap, MIN_VALID_DEPTH};

pub const DEFAULT_TAU_MIN: f64 = 0.1;
pub const DEFAULT_KEEP_FRACTION: f64 = 0.6;
/// Fewer surviving pairs than this is treated as degenerate.
pub const MIN_CORRESPONDENCES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub tau_min: f64,
    pub keep_fraction: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            tau_min: DEFAULT_TAU_MIN,
            keep_fraction: DEFAULT_KEEP_FRACTION,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau_min) {
            return Err(invalid(format!("tau_min {} outside [0, 1]", self.tau_min)));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(invalid(format!(
                "keep_fraction {} outside (0, 1]",
                self.keep_fraction
            )));
        }
        Ok(())
    }
}

/// Surviving `(old, new)` depth pairs plus how many pixels each stage kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub old: Vec<f64>,
    pub new: Vec<f64>,
    /// Pixel indices (into the stacked input) of the retained pairs.
    pub pixels: Vec<usize>,
    pub stage_counts: StageCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub input: usize,
    pub valid_depth: usize,
    pub above_tau: usize,
    pub percentile: usize,
}

impl CorrespondenceSet {
    pub fn from_pairs(old: Vec<f64>, new: Vec<f64>) -> Result<Self> {
        if old.len() != new.len() {
            return Err(invalid("old and new depth sequences differ in length"));
        }
        let n = old.len();
        Ok(Self {
            pixels: (0..n).collect(),
            old,
            new,
            stage_counts: StageCounts {
                input: n,
                valid_depth: n,
                above_tau: n,
                percentile: n,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old.is_empty()
    }

    /// Appends another frame's correspondences; pixel indices are offset.
    pub fn extend(&mut self, other: CorrespondenceSet) {
        let offset = self.stage_counts.input;
        self.old.extend(other.old);
        self.new.extend(other.new);
        self.pixels
            .extend(other.pixels.into_iter().map(|p| p + offset));
        let (a, b) = (&mut self.stage_counts, other.stage_counts);
        a.input += b.input;
        a.valid_depth += b.valid_depth;
        a.above_tau += b.above_tau;
        a.percentile += b.percentile;
    }
}

/// Sorted-order frame ids present both in the window and in the store.
pub fn detect_overlap(window: &BTreeSet<u32>, global: &BTreeSet<u32>) -> BTreeSet<u32> {
    window.intersection(global).copied().collect()
}

/// Confidence of the `ceil(keep * n)`-th most confident sample: keeping
/// everything at or above it keeps the top `keep` fraction (plus ties).
fn percentile_threshold(values: &mut [f32], keep_fraction: f64) -> f32 {
    debug_assert!(!values.is_empty());
    let m = ((keep_fraction * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values.sort_by(|a, b| b.total_cmp(a));
    values[m - 1]
}

/// Validity, confidence-floor and percentile filtering over stacked maps.
pub fn filter_correspondences(
    d_old: &DepthMap,
    d_new: &DepthMap,
    c_old: &ConfidenceMap,
    c_new: &ConfidenceMap,
    params: &FilterParams,
) -> Result<CorrespondenceSet> {
    params.validate()?;
    if !(d_old.same_shape(d_new) && d_old.same_shape(c_old) && d_old.same_shape(c_new)) {
        return Err(invalid("correspondence maps must share dimensions"));
    }
    let (dov, dnv, cov, cnv) = (
        d_old.values(),
        d_new.values(),
        c_old.values(),
        c_new.values(),
    );
    let mut counts = StageCounts {
        input: dov.len(),
        ..Default::default()
    };

    let valid: Vec<usize> = (0..dov.len())
        .filter(|&i| dov[i] >= MIN_VALID_DEPTH && dnv[i] >= MIN_VALID_DEPTH)
        .collect();
    counts.valid_depth = valid.len();

    let tau = params.tau_min;
    let confident: Vec<usize> = valid
        .into_iter()
        .filter(|&i| cov[i] as f64 >= tau && cnv[i] as f64 >= tau)
        .collect();
    counts.above_tau = confident.len();

    if confident.is_empty() {
        return Ok(CorrespondenceSet {
            stage_counts: counts,
            ..Default::default()
        });
    }
    let mut olds: Vec<f32> = confident.iter().map(|&i| cov[i]).collect();
    let mut news: Vec<f32> = confident.iter().map(|&i| cnv[i]).collect();
    let t_old = percentile_threshold(&mut olds, params.keep_fraction);
    let t_new = percentile_threshold(&mut news, params.keep_fraction);
    let kept: Vec<usize> = confident
        .into_iter()
        .filter(|&i| cov[i] >= t_old && cnv[i] >= t_new)
        .collect();
    counts.percentile = kept.len();

    Ok(CorrespondenceSet {
        old: kept.iter().map(|&i| dov[i] as f64).collect(),
        new: kept.iter().map(|&i| dnv[i] as f64).collect(),
        pixels: kept,
        stage_counts: counts,
    })
}

/// Closed-form least-squares scale with the default minimum pair count.
pub fn estimate_scale(corr: &CorrespondenceSet) -> Result<f64> {
    estimate_scale_with_min(corr, MIN_CORRESPONDENCES)
}

pub fn estimate_scale_with_min(corr: &CorrespondenceSet, min_pairs: usize) -> Result<f64> {
    let degenerate = Error::DegenerateCorrespondences {
        pairs: corr.len(),
        required: min_pairs.max(1),
    };
    if corr.is_empty() || corr.len() < min_pairs {
        return Err(degenerate);
    }
    let (num, den) = corr
        .old
        .iter()
        .zip(&corr.new)
        .fold((0.0, 0.0), |(num, den), (o, n)| (num + o * n, den + n * n));
    if den <= 0.0 || !num.is_finite() || !den.is_finite() {
        return Err(degenerate);
    }
    Ok(num / den)
}

/// Scales every valid depth by `s`; invalid samples stay bit-identical.
pub fn apply_scale(depths: &[DepthMap], s: f64) -> Result<Vec<DepthMap>> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid(format!("scale must be positive, got {s}")));
    }
    Ok(depths.iter().map(|d| d.scaled(s)).collect())
}

/// One overlapping frame: stored and re-estimated depth/confidence.
pub struct OverlapPair<'a> {
    pub d_old: &'a DepthMap,
    pub c_old: &'a ConfidenceMap,
    pub d_new: &'a DepthMap,
    pub c_new: &'a ConfidenceMap,
}

/// Outcome of aligning one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub scale: f64,
    /// True when the estimate was unavailable and `s = 1` was used instead.
    pub fallback: bool,
    pub correspondences: usize,
}

/// Stacks all overlap frames, filters, and estimates `s`, falling back to
/// `s = 1` (with a warning) when the overlap is empty or degenerate.
pub fn align_window(pairs: &[OverlapPair<'_>], params: &FilterParams) -> Result<Alignment> {
    if pairs.is_empty() {
        return Ok(Alignment {
            scale: 1.0,
            fallback: true,
            correspondences: 0,
        });
    }
    fn stack(
        pairs: &[OverlapPair<'_>],
        f: impl for<'p> Fn(&'p OverlapPair<'_>) -> &'p [f32],
    ) -> Vec<f32> {
        pairs.iter().flat_map(|p| f(p).iter().copied()).collect()
    }
    for p in pairs {
        if !(p.d_old.same_shape(p.d_new)
            && p.d_old.same_shape(p.c_old)
            && p.d_old.same_shape(p.c_new))
        {
            return Err(invalid("overlap maps must share dimensions"));
        }
    }
    let n: usize = pairs.iter().map(|p| p.d_old.len()).sum();
    let d_old = DepthMap::new(n, 1, stack(pairs, |p| p.d_old.values()))?;
    let d_new = DepthMap::new(n, 1, stack(pairs, |p| p.d_new.values()))?;
    let c_old = ConfidenceMap::new(n, 1, stack(pairs, |p| p.c_old.values()))?;
    let c_new = ConfidenceMap::new(n, 1, stack(pairs, |p| p.c_new.values()))?;
    let corr = filter_correspondences(&d_old, &d_new, &c_old, &c_new, params)?;
    match estimate_scale(&corr) {
        Ok(scale) => Ok(Alignment {
            scale,
            fallback: false,
            correspondences: corr.len(),
        }),
        Err(Error::DegenerateCorrespondences { pairs, .. }) => {
            log::warn!("scale alignment degenerate with {pairs} correspondences; using s = 1");
            Ok(Alignment {
                scale: 1.0,
                fallback: true,
                correspondences: pairs,
            })
        }
        Err(e) => Err(e),
    }
}
