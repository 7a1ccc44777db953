//! White-noise model `dY = f dt + eps dW` and the adaptive procedures built on
//! three independent copies of it.
//!
//! The copies are simulated directly as independent processes with noise
//! level `sqrt(3) eps` each. Interval increments are realized lazily on the
//! dyadic tree: the noise of a child interval is half the parent's noise plus
//! or minus an independent Gaussian, so realized values at all levels are
//! mutually consistent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ConvexFunction;
use crate::noise::{keyed_normal, stream};
use crate::stats::{k_alpha, k_tilde_alpha, max_normal_quantile, upper_quantile, Probability};
use crate::{IntervalEstimate, Model, ProcedureResult, Trace};

/// Default depth cap for the dyadic tree.
pub const DEFAULT_J_MAX: u32 = 40;

const ROOT_KEY: u64 = u64::MAX;

/// The three independent copies produced by sample splitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathCopy {
    /// Localization.
    L,
    /// Stopping.
    S,
    /// Estimation and inference for the minimum.
    E,
}

impl PathCopy {
    fn stream(self) -> u64 {
        match self {
            PathCopy::L => stream::WHITE_NOISE_L,
            PathCopy::S => stream::WHITE_NOISE_S,
            PathCopy::E => stream::WHITE_NOISE_E,
        }
    }

    fn slot(self) -> usize {
        match self {
            PathCopy::L => 0,
            PathCopy::S => 1,
            PathCopy::E => 2,
        }
    }
}

/// Interval `[(i-1) 2^-j, i 2^-j]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub level: u32,
    pub index: i64,
}

impl DyadicIndex {
    pub fn new(level: u32, index: i64) -> Self {
        DyadicIndex { level, index }
    }

    pub fn is_valid(&self) -> bool {
        self.index >= 1 && self.index <= 1_i64 << self.level
    }
}

/// `t_{j,i} = i 2^-j`.
#[inline]
pub fn grid_point(level: u32, index: i64) -> f64 {
    index as f64 * (-(level as f64)).exp2()
}

/// Lazily realized increments of the three copies for one replication.
#[derive(Debug)]
pub struct PathStore<'f> {
    function: &'f ConvexFunction,
    eps: f64,
    seed: u64,
    noise_scale: f64,
    j_max: u32,
    noise: [HashMap<(u32, i64), f64>; 3],
}

impl<'f> PathStore<'f> {
    pub fn new(function: &'f ConvexFunction, eps: f64, seed: u64, j_max: u32) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::domain(format!("eps must be positive, got {eps}")));
        }
        if j_max == 0 || j_max > 60 {
            return Err(Error::domain(format!("j_max must lie in 1..=60, got {j_max}")));
        }
        Ok(PathStore {
            function,
            eps,
            seed,
            noise_scale: 1.0,
            j_max,
            noise: Default::default(),
        })
    }

    /// Store whose realized paths carry no noise while every threshold still
    /// uses the nominal `eps`.
    pub fn noiseless(function: &'f ConvexFunction, eps: f64, j_max: u32) -> Result<Self> {
        let mut store = PathStore::new(function, eps, 0, j_max)?;
        store.noise_scale = 0.0;
        Ok(store)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn function(&self) -> &ConvexFunction {
        self.function
    }

    /// Number of realized noise values across all copies.
    pub fn realized(&self) -> usize {
        self.noise.iter().map(HashMap::len).sum()
    }

    fn check_depth(&self, level: u32) -> Result<()> {
        if level > self.j_max {
            Err(Error::DepthCap {
                level,
                cap: self.j_max,
            })
        } else {
            Ok(())
        }
    }

    /// `∫ dY_copy` over the interval; `+∞` outside `1..=2^j`.
    pub fn increment(&mut self, copy: PathCopy, idx: DyadicIndex) -> Result<f64> {
        self.check_depth(idx.level)?;
        if !idx.is_valid() {
            return Ok(f64::INFINITY);
        }
        let a = grid_point(idx.level, idx.index - 1);
        let b = grid_point(idx.level, idx.index);
        let signal = self.function.integral(a, b);
        Ok(signal + self.noise_at(copy, idx.level, idx.index))
    }

    fn split_sd(&self, parent_level: u32) -> f64 {
        // Var = 3 eps^2 m_{j+1} / 2
        self.noise_scale * 3.0_f64.sqrt() * self.eps * (-(parent_level as f64 + 2.0)).exp2().sqrt()
    }

    fn noise_at(&mut self, copy: PathCopy, level: u32, index: i64) -> f64 {
        if let Some(&v) = self.noise[copy.slot()].get(&(level, index)) {
            return v;
        }
        let value = if level == 0 {
            self.noise_scale
                * 3.0_f64.sqrt()
                * self.eps
                * keyed_normal(self.seed, copy.stream(), ROOT_KEY, 0)
        } else {
            let parent_index = (index + 1) / 2;
            let parent = self.noise_at(copy, level - 1, parent_index);
            let g = self.split_sd(level - 1)
                * keyed_normal(self.seed, copy.stream(), (level - 1) as u64, parent_index as u64);
            if index % 2 == 1 {
                0.5 * parent + g
            } else {
                0.5 * parent - g
            }
        };
        self.noise[copy.slot()].insert((level, index), value);
        value
    }

    /// `X_{j,i}`, `X̃_{j,i}` or `X̄_{j,i}` depending on `copy`.
    pub fn x(&mut self, copy: PathCopy, level: u32, index: i64) -> Result<f64> {
        self.increment(copy, DyadicIndex::new(level, index))
    }
}

/// Localization and stopping record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationTrace {
    /// `î_0, …, î_ĵ`
    pub indices: Vec<i64>,
    /// `T_0, …, T_ĵ` (`+∞` serializes as null)
    pub statistics: Vec<f64>,
    /// `σ_j = sqrt(6 m_j) eps`
    pub thresholds: Vec<f64>,
    pub j_hat: u32,
    pub i_hat: i64,
    /// The depth cap was reached without the stopping rule firing.
    pub forced: bool,
}

/// `σ_j = sqrt(6 · 2^-j) · eps`.
pub fn stopping_sd(level: u32, eps: f64) -> f64 {
    (6.0 * (-(level as f64)).exp2()).sqrt() * eps
}

/// `X̃_{j,a} - X̃_{j,b}` under `+∞ - x = +∞`.
fn stop_difference(store: &mut PathStore<'_>, level: u32, a: i64, b: i64) -> Result<f64> {
    let xa = store.x(PathCopy::S, level, a)?;
    if xa == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(xa - store.x(PathCopy::S, level, b)?)
}

fn right_difference(store: &mut PathStore<'_>, level: u32, i: i64) -> Result<f64> {
    stop_difference(store, level, i + 6, i + 5)
}

fn left_difference(store: &mut PathStore<'_>, level: u32, i: i64) -> Result<f64> {
    stop_difference(store, level, i - 6, i - 5)
}

/// Runs localization on copy `l` and the stopping rule on copy `s`.
pub fn localize_and_stop(store: &mut PathStore<'_>, j_max: u32) -> Result<LocalizationTrace> {
    if j_max == 0 {
        return Err(Error::domain("j_max must be at least 1"));
    }
    store.check_depth(j_max)?;
    let eps = store.eps();
    let mut indices = Vec::new();
    let mut statistics = Vec::new();
    let mut thresholds = Vec::new();
    let mut i_hat: i64 = 1;
    for level in 0..=j_max {
        if level > 0 {
            let mut best = (f64::INFINITY, 2 * i_hat - 1);
            for i in (2 * i_hat - 2)..=(2 * i_hat + 1) {
                let x = store.x(PathCopy::L, level, i)?;
                if x < best.0 {
                    best = (x, i);
                }
            }
            i_hat = best.1;
        }
        let sd = stopping_sd(level, eps);
        let t = right_difference(store, level, i_hat)?.min(left_difference(store, level, i_hat)?);
        indices.push(i_hat);
        statistics.push(t);
        thresholds.push(sd);
        if t <= 2.0 * sd {
            return Ok(LocalizationTrace {
                indices,
                statistics,
                thresholds,
                j_hat: level,
                i_hat,
                forced: false,
            });
        }
    }
    Ok(LocalizationTrace {
        indices,
        statistics,
        thresholds,
        j_hat: j_max,
        i_hat,
        forced: true,
    })
}

/// Midpoint of the selected interval.
pub fn estimate_minimizer(trace: &LocalizationTrace) -> f64 {
    let lo = grid_point(trace.j_hat, trace.i_hat - 1);
    let hi = grid_point(trace.j_hat, trace.i_hat);
    0.5 * (lo + hi)
}

/// `[t_{ĵ,L}, t_{ĵ,U}]` with `L = max{0, î - 12·2^K + 1}`, `U = min{2^ĵ, î + 12·2^K - 2}`.
pub fn ci_minimizer(trace: &LocalizationTrace, alpha: Probability) -> Result<IntervalEstimate> {
    let k = k_alpha(alpha.get())?;
    let reach = 12_i64.saturating_mul(1_i64 << k.min(50));
    let count = 1_i64 << trace.j_hat;
    let lower = (trace.i_hat.saturating_sub(reach) + 1).max(0);
    let upper = trace.i_hat.saturating_add(reach - 2).min(count);
    Ok(IntervalEstimate {
        lo: grid_point(trace.j_hat, lower),
        hi: grid_point(trace.j_hat, upper),
        alpha,
    })
}

/// Block average of copy `e` over the selected interval, shifted two blocks
/// toward a side whose stopping difference is small.
pub fn estimate_minimum(store: &mut PathStore<'_>, trace: &LocalizationTrace) -> Result<f64> {
    let level = trace.j_hat;
    let i = trace.i_hat;
    let bound = 2.0 * stopping_sd(level, store.eps());
    let right = (right_difference(store, level, i)? <= bound) as i64;
    let left = (left_difference(store, level, i)? <= bound) as i64;
    let shifted = (i + 2 * (right - left)).clamp(1, 1_i64 << level);
    Ok(store.x(PathCopy::E, level, shifted)? * (level as f64).exp2())
}

/// Refinement level and block window `(i_L, i_R]` used by [`ci_minimum`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MinimumWindow {
    pub coarse: u32,
    pub fine: u32,
    pub i_left: i64,
    pub i_right: i64,
}

/// Window fixed at level `(ĵ - K_{α/4} - 1)_+` from index `î - 5` to `î + 4`
/// (clamped), expressed at level `ĵ + K̃_{α/4}`.
pub fn minimum_window(trace: &LocalizationTrace, alpha: Probability) -> Result<MinimumWindow> {
    let quarter = alpha.get() / 4.0;
    let k = k_alpha(quarter)?;
    let k_tilde = k_tilde_alpha(quarter)?;
    let coarse = trace.j_hat.saturating_sub(k + 1);
    let fine = trace.j_hat + k_tilde;
    let coarse_count = 1_i64 << coarse;
    let anchor = trace.indices[coarse as usize];
    let left = (anchor - 5).clamp(0, coarse_count);
    let right = (anchor + 4).clamp(0, coarse_count);
    let scale = 1_i64 << (fine - coarse).min(62);
    Ok(MinimumWindow {
        coarse,
        fine,
        i_left: left * scale,
        i_right: right * scale,
    })
}

/// Interval for the minimum built from the minimum block average at level
/// `ĵ + K̃_{α/4}` over a window fixed at level `(ĵ - K_{α/4} - 1)_+`.
pub fn ci_minimum(
    store: &mut PathStore<'_>,
    trace: &LocalizationTrace,
    alpha: Probability,
) -> Result<IntervalEstimate> {
    let quarter = alpha.get() / 4.0;
    let window = minimum_window(trace, alpha)?;
    store.check_depth(window.fine)?;
    let (fine, i_left, i_right) = (window.fine, window.i_left, window.i_right);

    let mut min_block = f64::INFINITY;
    for i in (i_left + 1)..=i_right {
        min_block = min_block.min(store.x(PathCopy::E, fine, i)?);
    }
    let inv_m = (fine as f64).exp2();
    let f1 = min_block * inv_m;
    let sd = 3.0_f64.sqrt() * store.eps() * inv_m.sqrt();
    let z = upper_quantile(quarter)?;
    let s = max_normal_quantile((i_right - i_left).max(1) as u64, quarter)?;
    Ok(IntervalEstimate {
        lo: f1 - z * sd - sd,
        hi: f1 + s * sd,
        alpha,
    })
}

/// Simulates the three copies for `f` at noise level `eps` and runs every
/// procedure.
pub fn run(
    function: &ConvexFunction,
    eps: f64,
    alpha: Probability,
    seed: u64,
    j_max: u32,
) -> Result<ProcedureResult> {
    let mut store = PathStore::new(function, eps, seed, j_max)?;
    run_on_store(&mut store, alpha)
}

/// Runs every procedure against an existing store.
pub fn run_on_store(store: &mut PathStore<'_>, alpha: Probability) -> Result<ProcedureResult> {
    let trace = localize_and_stop(store, store.j_max())?;
    let z_hat = estimate_minimizer(&trace);
    let ci_z = ci_minimizer(&trace, alpha)?;
    let m_hat = estimate_minimum(store, &trace)?;
    let ci_m = ci_minimum(store, &trace, alpha)?;
    Ok(ProcedureResult {
        model: Model::Whitenoise,
        j_hat: trace.j_hat,
        i_hat: trace.i_hat,
        forced: trace.forced,
        z_hat,
        ci_z,
        m_hat,
        ci_m,
        trace: Trace::Whitenoise(trace),
    })
}
