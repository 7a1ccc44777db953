//! Water-filling difficulty benchmarks.
//!
//! Water is poured into the epigraph of `f` until the L2 norm of
//! `max{f, u} - f` reaches `eps`. The depth of the water is `rho_m` and the
//! half-width of its surface, measured from the minimizer, is `rho_z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, Piece};

const MAX_BISECTIONS: usize = 200;

/// Benchmark quantities at one noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkValues {
    pub eps: f64,
    pub water_level_u: f64,
    pub rho_m: f64,
    pub rho_z: f64,
    pub rho_z_left: f64,
    pub rho_z_right: f64,
    /// `rho_z * rho_m^2 / eps^2`
    pub product: f64,
}

/// `∫ (h - base_excess - scale * d^k)_+^2` over one piece, where `h` is the
/// water depth above the global minimum.
fn piece_water(piece: &Piece, depth_above_base: f64) -> f64 {
    let h = depth_above_base;
    if h <= 0.0 {
        return 0.0;
    }
    let k = piece.exponent;
    let c = piece.scale;
    let r = (h / c).powf(1.0 / k);
    let reach = piece.reach();
    if r <= reach {
        // c r^k = h collapses the three terms
        h * h * r * 2.0 * k * k / ((k + 1.0) * (2.0 * k + 1.0))
    } else {
        let a = reach;
        h * h * a - 2.0 * h * c * a.powf(k + 1.0) / (k + 1.0)
            + c * c * a.powf(2.0 * k + 1.0) / (2.0 * k + 1.0)
    }
}

/// `‖f - f_u‖²` with the water level given as a depth `h = u - M(f)`.
pub fn residual_sq_at_depth(f: &ConvexFunction, h: f64) -> f64 {
    let m = f.truth().m;
    f.pieces()
        .iter()
        .map(|p| piece_water(p, h - (p.base - m)))
        .sum()
}

/// `‖f - max{f, u}‖₂`; zero when `u <= M(f)`.
pub fn residual_norm(f: &ConvexFunction, u: f64) -> f64 {
    let h = u - f.truth().m;
    if h <= 0.0 {
        0.0
    } else {
        residual_sq_at_depth(f, h).sqrt()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("noise level must be positive and finite, got {eps}")))
    }
}

/// Water depth `rho_m(eps; f)`.
pub fn rho_m(f: &ConvexFunction, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let target = eps * eps;
    let mut hi = 1.0;
    while residual_sq_at_depth(f, hi) <= target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::domain(format!("water level bracket overflow at eps = {eps}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual_sq_at_depth(f, mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn side_width(f: &ConvexFunction, depth: f64, right: bool) -> f64 {
    let truth = f.truth();
    let end = if right { 1.0 } else { 0.0 };
    let full = (end - truth.z).abs();
    if full == 0.0 {
        return 0.0;
    }
    if f.value(end) - truth.m <= depth {
        return full;
    }
    // excess is increasing in the distance from the minimizer on either side
    let (mut inside, mut outside) = (0.0_f64, full);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (inside + outside);
        if mid <= inside || mid >= outside {
            break;
        }
        let t = if right { truth.z + mid } else { truth.z - mid };
        if f.value(t.clamp(0.0, 1.0)) - truth.m <= depth {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// One-sided surface widths `(left, right)` of the water at depth `rho_m(eps; f)`.
pub fn rho_z_sides(f: &ConvexFunction, eps: f64) -> Result<(f64, f64)> {
    let depth = rho_m(f, eps)?;
    Ok((side_width(f, depth, false), side_width(f, depth, true)))
}

/// Surface half-width `rho_z(eps; f)`, the larger of the two sides.
pub fn rho_z(f: &ConvexFunction, eps: f64) -> Result<f64> {
    let (l, r) = rho_z_sides(f, eps)?;
    Ok(l.max(r))
}

/// `rho_z * rho_m^2 / eps^2`.
pub fn uncertainty_product(f: &ConvexFunction, eps: f64) -> Result<f64> {
    Ok(benchmark(f, eps)?.product)
}

/// All benchmark quantities at `eps`.
pub fn benchmark(f: &ConvexFunction, eps: f64) -> Result<BenchmarkValues> {
    let depth = rho_m(f, eps)?;
    let left = side_width(f, depth, false);
    let right = side_width(f, depth, true);
    let rho_z = left.max(right);
    Ok(BenchmarkValues {
        eps,
        water_level_u: f.truth().m + depth,
        rho_m: depth,
        rho_z,
        rho_z_left: left,
        rho_z_right: right,
        product: rho_z * depth * depth / (eps * eps),
    })
}

/// Closed forms for `|t - 1/2|^k`: returns `(rho_m, rho_z)`.
pub fn closed_form_rho_cusp(k: f64, eps: f64) -> Result<(f64, f64)> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(Error::domain(format!("cusp exponent must be >= 1, got {k}")));
    }
    check_eps(eps)?;
    let a = (2.0 * k + 1.0) * (k + 1.0) / (4.0 * k * k);
    let denom = 2.0 * k + 1.0;
    let rho_m = a.powf(k / denom) * eps.powf(2.0 * k / denom);
    let rho_z = (a.powf(1.0 / denom) * eps.powf(2.0 / denom)).min(0.5);
    Ok((rho_m, rho_z))
}

/// `(2k+1)(k+1) / (4k²)`, the product `rho_z rho_m² / eps²` of an unclipped cusp.
pub fn cusp_product_constant(k: f64) -> f64 {
    (2.0 * k + 1.0) * (k + 1.0) / (4.0 * k * k)
}
