//! Fixed-design regression `y_i = f(i/n) + σ z_i`, `i = 0..=n`, and the
//! block-sum versions of the localization, stopping and inference steps.
//!
//! When the stopping rule never fires before the finest level the
//! discretization dominates, and the interval for the minimizer and the lower
//! end of the interval for the minimum switch to the slope-scan and
//! supporting-line constructions in [`forced_minimizer_interval`] and
//! [`forced_minimum_lower`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::ConvexFunction;
use crate::noise::{derive_seed, normal_vector, stream};
use crate::stats::{k_alpha, k_tilde_alpha, max_normal_quantile, upper_quantile, Probability};
use crate::whitenoise::PathCopy;
use crate::{IntervalEstimate, Model, ProcedureResult, Trace};

/// Observations on the grid `x_i = i/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSample {
    n: usize,
    sigma: f64,
    y: Vec<f64>,
}

impl RegressionSample {
    pub fn new(n: usize, sigma: f64, y: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("need n >= 2, got {n}")));
        }
        if y.len() != n + 1 {
            return Err(Error::domain(format!(
                "expected {} observations for n = {n}, got {}",
                n + 1,
                y.len()
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("observation {i} is not finite")));
        }
        Ok(RegressionSample { n, sigma, y })
    }

    /// `y_i = f(i/n) + σ z_i` with `z_i` keyed on `(seed, i)`.
    pub fn simulate(function: &ConvexFunction, n: usize, sigma: f64, seed: u64) -> Result<Self> {
        let z = normal_vector(seed, stream::REGRESSION_DATA, n + 1);
        let y = (0..=n)
            .map(|i| function.value(i as f64 / n as f64) + sigma * z[i])
            .collect();
        RegressionSample::new(n, sigma, y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The same design and noise level with every observation shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        RegressionSample {
            n: self.n,
            sigma: self.sigma,
            y: self.y.iter().map(|v| v + c).collect(),
        }
    }
}

/// Block sums of one sequence on every level, built bottom-up so that a
/// parent is exactly the floating-point sum of its two children.
#[derive(Clone, Debug, PartialEq)]
struct BlockSums {
    levels: Vec<Vec<f64>>,
}

impl BlockSums {
    fn new(values: &[f64], finest: u32) -> Self {
        let mut levels = vec![Vec::new(); finest as usize + 1];
        levels[finest as usize] = values.to_vec();
        for j in (0..finest as usize).rev() {
            let child = &levels[j + 1];
            let sums = child.chunks_exact(2).map(|p| p[0] + p[1]).collect();
            levels[j] = sums;
        }
        BlockSums { levels }
    }

    #[inline]
    fn get(&self, level: u32, index: i64) -> f64 {
        let row = &self.levels[level as usize];
        if index < 1 || index as usize > row.len() {
            f64::INFINITY
        } else {
            row[index as usize - 1]
        }
    }

    fn count(&self, level: u32) -> i64 {
        self.levels[level as usize].len() as i64
    }
}

/// Three independent noisy copies of the sample with their block sums.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSample {
    n: usize,
    sigma: f64,
    finest: u32,
    y_l: Vec<f64>,
    y_s: Vec<f64>,
    y_e: Vec<f64>,
    blocks: [BlockSums; 3],
}

/// `J = ⌊log₂(n + 1)⌋`.
pub fn finest_level(n: usize) -> u32 {
    (n + 1).ilog2()
}

impl SplitSample {
    fn from_parts(sample: &RegressionSample, y_l: Vec<f64>, y_s: Vec<f64>, y_e: Vec<f64>) -> Self {
        let finest = finest_level(sample.n);
        let blocks = [
            BlockSums::new(&y_l, finest),
            BlockSums::new(&y_s, finest),
            BlockSums::new(&y_e, finest),
        ];
        SplitSample {
            n: sample.n,
            sigma: sample.sigma,
            finest,
            y_l,
            y_s,
            y_e,
            blocks,
        }
    }

    /// Copies with the auxiliary noise switched off; thresholds keep the
    /// nominal σ.
    pub fn noiseless(sample: &RegressionSample) -> Self {
        let y = sample.y.clone();
        SplitSample::from_parts(sample, y.clone(), y.clone(), y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `J`.
    pub fn finest_level(&self) -> u32 {
        self.finest
    }

    pub fn sequence(&self, copy: PathCopy) -> &[f64] {
        match copy {
            PathCopy::L => &self.y_l,
            PathCopy::S => &self.y_s,
            PathCopy::E => &self.y_e,
        }
    }

    /// `y_{u,i}`, `+∞` outside `0..=n`.
    pub fn y(&self, copy: PathCopy, i: i64) -> f64 {
        let seq = self.sequence(copy);
        if i < 0 || i as usize >= seq.len() {
            f64::INFINITY
        } else {
            seq[i as usize]
        }
    }

    /// `Y_{j,i,u}`; `+∞` for blocks that are out of range or incomplete.
    pub fn block_sum(&self, copy: PathCopy, level: u32, index: i64) -> f64 {
        let slot = match copy {
            PathCopy::L => 0,
            PathCopy::S => 1,
            PathCopy::E => 2,
        };
        self.blocks[slot].get(level, index)
    }

    /// Number of complete blocks at `level`.
    pub fn block_count(&self, level: u32) -> i64 {
        self.blocks[0].count(level)
    }

    /// `2^{J-j}`.
    pub fn block_size(&self, level: u32) -> i64 {
        1_i64 << (self.finest - level)
    }
}

/// Splits the sample into localization, stopping and estimation copies.
pub fn split(sample: &RegressionSample, seed: u64) -> SplitSample {
    let len = sample.n + 1;
    let z1 = normal_vector(seed, stream::SPLIT_Z1, len);
    let z2 = normal_vector(seed, stream::SPLIT_Z2, len);
    let s = sample.sigma;
    let a = std::f64::consts::SQRT_2 / 2.0 * s;
    let b = 6.0_f64.sqrt() / 2.0 * s;
    let c = std::f64::consts::SQRT_2 * s;
    let y = &sample.y;
    let y_l = (0..len).map(|i| y[i] + a * z1[i] + b * z2[i]).collect();
    let y_s = (0..len).map(|i| y[i] + a * z1[i] - b * z2[i]).collect();
    let y_e = (0..len).map(|i| y[i] - c * z1[i]).collect();
    SplitSample::from_parts(sample, y_l, y_s, y_e)
}

/// Localization and stopping record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionTrace {
    /// `î_0, …, î_ĵ`
    pub indices: Vec<i64>,
    /// `T_0, …, T_ĵ` (`+∞` serializes as null)
    pub statistics: Vec<f64>,
    /// `σ̃_j = sqrt(6 · 2^{J-j}) σ`
    pub thresholds: Vec<f64>,
    /// `ǰ`; `None` when the stopping rule never fired.
    pub j_check: Option<u32>,
    pub j_hat: u32,
    pub i_hat: i64,
}

impl RegressionTrace {
    pub fn forced(&self) -> bool {
        self.j_check.is_none()
    }
}

fn stop_difference(split: &SplitSample, level: u32, a: i64, b: i64) -> f64 {
    let ya = split.block_sum(PathCopy::S, level, a);
    if ya == f64::INFINITY {
        return f64::INFINITY;
    }
    ya - split.block_sum(PathCopy::S, level, b)
}

/// Runs localization on `y_l` and the stopping rule on `y_s`.
pub fn localize_and_stop(split: &SplitSample) -> RegressionTrace {
    let finest = split.finest;
    let mut indices = Vec::new();
    let mut statistics = Vec::new();
    let mut thresholds = Vec::new();
    let mut i_hat: i64 = 1;
    for level in 0..=finest {
        if level > 0 {
            let lo = (2 * i_hat - 2).max(1);
            let hi = (2 * i_hat + 1).min(split.block_count(level));
            let mut best = (f64::INFINITY, lo);
            for i in lo..=hi {
                let v = split.block_sum(PathCopy::L, level, i);
                if v < best.0 {
                    best = (v, i);
                }
            }
            i_hat = best.1;
        }
        let sd = (6.0 * split.block_size(level) as f64).sqrt() * split.sigma;
        let t = stop_difference(split, level, i_hat + 6, i_hat + 5)
            .min(stop_difference(split, level, i_hat - 6, i_hat - 5));
        indices.push(i_hat);
        statistics.push(t);
        thresholds.push(sd);
        if t <= 2.0 * sd {
            return RegressionTrace {
                indices,
                statistics,
                thresholds,
                j_check: Some(level),
                j_hat: level,
                i_hat,
            };
        }
    }
    RegressionTrace {
        indices,
        statistics,
        thresholds,
        j_check: None,
        j_hat: finest,
        i_hat,
    }
}

/// `argmin_{î-2 <= i <= î+2} y_{e,i-1}`, smallest index on ties.
fn forced_argmin(split: &SplitSample, i_hat: i64) -> i64 {
    let mut best = (f64::INFINITY, i_hat);
    for i in (i_hat - 2)..=(i_hat + 2) {
        let v = split.y(PathCopy::E, i - 1);
        if v < best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Centre of the selected block, or the best of five neighbouring design
/// points when stopping was forced.
pub fn estimate_minimizer(split: &SplitSample, trace: &RegressionTrace) -> f64 {
    let n = split.n as f64;
    let z = if trace.j_check.is_some() {
        let b = split.block_size(trace.j_hat) as f64;
        -0.5 / n + (b * trace.i_hat as f64 - 0.5 * b) / n
    } else {
        (forced_argmin(split, trace.i_hat) - 1) as f64 / n
    };
    z.clamp(0.0, 1.0)
}

/// Which branch of the forced-stop interval construction produced the result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedBranch {
    /// No non-decreasing step in the window and the window ends at `n`;
    /// curvature test passed.
    RightBoundaryLine,
    /// No non-decreasing step in the window: collapse to `U/n`.
    RightCollapse,
    /// No non-increasing step and the window starts at 0; curvature test passed.
    LeftBoundaryLine,
    /// No non-increasing step: collapse to 0.
    LeftCollapse,
    /// Scan bracket is at least three steps wide or touches the boundary.
    Bracket,
    /// A steep drop next to the bracket: collapse to its midpoint.
    Midpoint,
    /// Line-intersection refinement of both ends.
    LineIntersection,
}

/// Result of the forced-stop interval construction for the minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForcedInterval {
    pub t_lo: f64,
    pub t_hi: f64,
    pub i_l: i64,
    pub i_r: i64,
    pub branch: ForcedBranch,
}

/// Interval for the minimizer when stopping was forced at the finest level.
///
/// `y_e` holds the `n + 1` estimation-copy observations, `z3` fresh standard
/// normals of the same length, `i_hat` the selected block at the finest level.
/// The sums `y_e ± sqrt(3) σ z3` give two independent copies: `+` drives the
/// slope scan and `-` the curvature tests and line intersections.
pub fn forced_minimizer_interval(
    y_e: &[f64],
    z3: &[f64],
    sigma: f64,
    i_hat: i64,
    alpha: f64,
) -> Result<ForcedInterval> {
    if y_e.len() < 3 || z3.len() != y_e.len() {
        return Err(Error::domain("forced interval needs n >= 2 and matching noise"));
    }
    let n = (y_e.len() - 1) as i64;
    let nf = n as f64;
    let reach = 12_i64.saturating_mul(1_i64 << k_alpha(alpha / 2.0)?.min(50));
    let lower = (i_hat.saturating_sub(reach)).max(1) - 1;
    let upper = (i_hat.saturating_add(reach)).min(n + 1) - 1;
    let z_scan = upper_quantile(alpha / 8.0)?;
    let z_line = upper_quantile(alpha / 24.0)?;

    let root3s = 3.0_f64.sqrt() * sigma;
    let scan = |i: i64| y_e[i as usize] + root3s * z3[i as usize];
    let test = |i: i64| y_e[i as usize] - root3s * z3[i as usize];
    let scan_bound = 2.0 * root3s * z_scan;
    let c = 2.0 * 6.0_f64.sqrt() * sigma * z_line;

    let i_l = (lower..upper)
        .find(|&i| scan(i) - scan(i + 1) <= scan_bound)
        .unwrap_or(upper);
    let i_r = (lower..upper)
        .rev()
        .find(|&i| scan(i) - scan(i + 1) >= -scan_bound)
        .unwrap_or(lower - 1);

    let mut t_lo = 0.0;
    let mut t_hi = 1.0;
    let mut branch = ForcedBranch::Bracket;

    if i_l == upper {
        let curvature = if i_l == n {
            test(n - 2) - test(n - 1) + c
        } else {
            f64::NAN
        };
        if i_l == n && curvature > 0.0 {
            t_hi = 1.0;
            let ratio = -(test(n) - test(n - 1) + c) / (nf * curvature);
            t_lo = (ratio + (nf - 1.0) / nf).max((nf - 1.0) / nf).min(1.0);
            branch = ForcedBranch::RightBoundaryLine;
        } else {
            t_lo = upper as f64 / nf;
            t_hi = t_lo;
            branch = ForcedBranch::RightCollapse;
        }
    }
    if i_r == lower - 1 {
        let curvature = test(2) - test(1) + c;
        if i_r == -1 && curvature > 0.0 {
            let ratio = (test(0) - test(1) + c) / (nf * curvature);
            t_hi = (ratio + 1.0 / nf).max(0.0).min(1.0 / nf);
            t_lo = 0.0;
            branch = ForcedBranch::LeftBoundaryLine;
        } else {
            t_lo = 0.0;
            t_hi = 0.0;
            branch = ForcedBranch::LeftCollapse;
        }
    }
    if (i_l - upper) * (i_r - lower + 1) != 0 {
        let i_lo = (i_l - 1).max(lower);
        let i_hi = (i_r + 2).min(upper);
        if i_hi - i_lo >= 3 || (i_hi - n) * i_lo == 0 {
            t_lo = i_lo as f64 / nf;
            t_hi = i_hi as f64 / nf;
            branch = ForcedBranch::Bracket;
        } else if test(i_hi + 1) - test(i_hi) <= -c || test(i_lo - 1) - test(i_lo) <= -c {
            t_lo = (i_hi + i_lo) as f64 / (2.0 * nf);
            t_hi = t_lo;
            branch = ForcedBranch::Midpoint;
        } else {
            let hi_ratio =
                (test(i_hi - 1) - test(i_hi) + c) / (nf * (test(i_hi + 1) - test(i_hi) + c));
            t_hi = (hi_ratio + i_hi as f64 / nf)
                .max((i_hi - 1) as f64 / nf)
                .min(i_hi as f64 / nf);
            let lo_ratio =
                -(test(i_lo + 1) - test(i_lo) + c) / (nf * (test(i_lo - 1) - test(i_lo) + c));
            t_lo = (lo_ratio + i_lo as f64 / nf)
                .max(i_lo as f64 / nf)
                .min((i_lo + 1) as f64 / nf);
            branch = ForcedBranch::LineIntersection;
        }
    }
    Ok(ForcedInterval {
        t_lo,
        t_hi,
        i_l,
        i_r,
        branch,
    })
}

/// Confidence interval for the minimizer.
///
/// `seed` keys the fresh noise used only when stopping was forced.
pub fn ci_minimizer(
    split: &SplitSample,
    trace: &RegressionTrace,
    alpha: Probability,
    seed: u64,
) -> Result<IntervalEstimate> {
    let a = alpha.get();
    let n = split.n as f64;
    let (t_lo, t_hi) = if trace.j_check.is_some() {
        let reach = 12_i64.saturating_mul(1_i64 << k_alpha(a / 2.0)?.min(50));
        let b = split.block_size(trace.j_hat);
        let count = (split.n as i64 + 1 + b - 1) / b;
        let lower = (trace.i_hat.saturating_sub(reach) + 1).max(0);
        let upper = trace.i_hat.saturating_add(reach - 2).min(count);
        let bf = b as f64;
        (
            (bf * lower as f64 / n - 0.5 / n).clamp(0.0, 1.0),
            (bf * upper as f64 / n - 0.5 / n).clamp(0.0, 1.0),
        )
    } else {
        let z3 = normal_vector(seed, stream::ALGORITHM_Z3, split.n + 1);
        let forced = forced_minimizer_interval(&split.y_e, &z3, split.sigma, trace.i_hat, a)?;
        (forced.t_lo, forced.t_hi)
    };
    Ok(IntervalEstimate {
        lo: t_lo.min(t_hi).clamp(0.0, 1.0),
        hi: t_hi.clamp(0.0, 1.0),
        alpha,
    })
}

/// Block average of `y_e` over the selected block, shifted two blocks toward
/// a side whose stopping difference is small; at a forced stop, the smallest
/// of five neighbouring observations.
pub fn estimate_minimum(split: &SplitSample, trace: &RegressionTrace) -> f64 {
    let level = trace.j_hat;
    let i = trace.i_hat;
    let b = split.block_size(level);
    let shifted = if trace.j_check.is_some() {
        let bound = 2.0 * 6.0_f64.sqrt() * split.sigma * (b as f64).sqrt();
        let right = (stop_difference(split, level, i + 6, i + 5) <= bound) as i64;
        let left = (stop_difference(split, level, i - 6, i - 5) <= bound) as i64;
        i + 2 * (right - left)
    } else {
        forced_argmin(split, i)
    };
    let shifted = shifted.clamp(1, split.block_count(level));
    split.block_sum(PathCopy::E, level, shifted) / b as f64
}

/// A line through `(t0, y0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub t0: f64,
    pub y0: f64,
}

impl Line {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.slope * (t - self.t0) + self.y0
    }

    fn min_on(&self, a: f64, b: f64) -> f64 {
        self.at(a).min(self.at(b))
    }
}

/// `min_{t ∈ [a, b]} max{l(t), r(t)}`: the crossing height when the two lines
/// cross inside the interval, otherwise the smaller endpoint value of the
/// upper envelope.
pub fn envelope_min(l: &Line, r: &Line, a: f64, b: f64) -> f64 {
    let upper = |t: f64| l.at(t).max(r.at(t));
    let mut best = upper(a).min(upper(b));
    let ds = l.slope - r.slope;
    if ds != 0.0 {
        let t = (r.y0 - l.y0 + l.slope * l.t0 - r.slope * r.t0) / ds;
        if t > a && t < b {
            best = best.min(upper(t));
        }
    }
    best
}

/// Lower end of the interval for the minimum when the refinement level would
/// pass the finest level, from supporting lines of the convex function
/// widened by `h` on each observation. Blocks at the finest level are single
/// design points, so `i_lo`/`i_hi` index design points as `i - 1`.
pub fn forced_minimum_lower(y_e: &[f64], i_lo: i64, i_hi: i64, h: f64, f_hi: f64) -> f64 {
    let n = (y_e.len() - 1) as i64;
    let nf = n as f64;
    let y = |i: i64| y_e[i as usize];
    let x = |i: i64| i as f64 / nf;
    let mut k_l = i_lo - 1;
    let mut k_r = i_hi - 2;
    let mut lowest = f64::INFINITY;
    if i_lo == 1 {
        let v_r0 = Line {
            slope: (y(2) - y(1) + 2.0 * h) * nf,
            t0: 1.0 / nf,
            y0: y(1) - h,
        };
        lowest = lowest.min(v_r0.min_on(0.0, 1.0 / nf));
        k_l = i_lo;
    }
    if i_hi - 1 == n {
        let v_l = Line {
            slope: (y(n - 1) - y(n - 2) - 2.0 * h) * nf,
            t0: (nf - 1.0) / nf,
            y0: y(n - 1) - h,
        };
        lowest = lowest.min(v_l.min_on((nf - 1.0) / nf, 1.0));
        k_r = i_hi - 3;
    }
    for i in k_l.max(1)..=k_r.min(n - 2) {
        let v_l = Line {
            slope: (y(i) - y(i - 1) - 2.0 * h) * nf,
            t0: x(i),
            y0: y(i) - h,
        };
        let v_r = Line {
            slope: (y(i + 2) - y(i + 1) + 2.0 * h) * nf,
            t0: x(i + 1),
            y0: y(i + 1) - h,
        };
        lowest = lowest.min(envelope_min(&v_l, &v_r, x(i), x(i + 1)));
    }
    lowest.min(f_hi)
}

/// Confidence interval for the minimum.
pub fn ci_minimum(
    split: &SplitSample,
    trace: &RegressionTrace,
    alpha: Probability,
) -> Result<IntervalEstimate> {
    let quarter = alpha.get() / 4.0;
    let k = k_alpha(quarter)?;
    let k_tilde = k_tilde_alpha(quarter)?;
    let finest = split.finest;
    let coarse = trace.j_hat.saturating_sub(k + 1);
    let fine = finest.min(trace.j_hat + k_tilde);
    let anchor = trace.indices[coarse as usize];
    let scale = 1_i64 << (fine - coarse);
    let b = split.block_size(fine);
    let ceil_count = (split.n as i64 + 1 + b - 1) / b;
    let i_lo = (scale * (anchor - 5)).max(1);
    let i_hi = (scale * (anchor + 4) + 1).min(ceil_count).max(i_lo);

    let f1 = (i_lo..=i_hi)
        .map(|i| split.block_sum(PathCopy::E, fine, i))
        .fold(f64::INFINITY, f64::min)
        / b as f64;
    let root3s = 3.0_f64.sqrt() * split.sigma;
    let sd = root3s / (b as f64).sqrt();
    let f_hi = f1 + max_normal_quantile((i_hi - i_lo + 1) as u64, quarter)? * sd;
    let f_lo = if trace.j_hat + k_tilde <= finest {
        f1 - (upper_quantile(quarter)? + 1.0) * sd
    } else {
        let h = max_normal_quantile((i_hi - i_lo + 3) as u64, alpha.get() / 8.0)? * root3s;
        forced_minimum_lower(&split.y_e, i_lo, i_hi, h, f_hi)
    };
    Ok(IntervalEstimate {
        lo: f_lo,
        hi: f_hi,
        alpha,
    })
}

/// Splits the sample with `seed` and runs every procedure.
pub fn run(sample: &RegressionSample, alpha: Probability, seed: u64) -> Result<ProcedureResult> {
    let split = split(sample, seed);
    run_on_split(&split, alpha, derive_seed(seed, stream::SUB_SEED, 0))
}

/// Runs every procedure on an existing split; `ci_seed` keys the fresh noise
/// of the forced-stop interval.
pub fn run_on_split(split: &SplitSample, alpha: Probability, ci_seed: u64) -> Result<ProcedureResult> {
    let trace = localize_and_stop(split);
    let z_hat = estimate_minimizer(split, &trace);
    let ci_z = ci_minimizer(split, &trace, alpha, ci_seed)?;
    let m_hat = estimate_minimum(split, &trace);
    let ci_m = ci_minimum(split, &trace, alpha)?;
    Ok(ProcedureResult {
        model: Model::Regression,
        j_hat: trace.j_hat,
        i_hat: trace.i_hat,
        forced: trace.forced(),
        z_hat,
        ci_z,
        m_hat,
        ci_m,
        trace: Trace::Regression(trace),
    })
}
