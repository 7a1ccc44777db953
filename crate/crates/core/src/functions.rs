//! Convex test functions on `[0, 1]` with closed-form values, integrals and
//! extremum.
//!
//! Every family is stored as a short list of monotone pieces of the form
//! `base + scale * |t - anchor|^exponent`, where the anchor is an endpoint of
//! the piece. Evaluation, integration and the water-filling integrals in
//! [`crate::benchmarks`] all work piece by piece.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Serialized description of a test function: `{"family": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `scale * |t - center|^exponent + offset`
    #[serde(alias = "cusp")]
    PowerCusp {
        center: f64,
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + max{left_slope (t - center), right_slope (t - center)}`
    #[serde(alias = "asymmetric")]
    AsymmetricCusp {
        center: f64,
        left_slope: f64,
        right_slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Linear interpolation of `values` at `knots`, with `knots` running from 0 to 1.
    #[serde(alias = "piecewise")]
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
    /// `curvature (t - center)^2 + offset`
    Quadratic {
        curvature: f64,
        center: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl FunctionSpec {
    /// `|t - 1/2|^k`.
    pub fn centered_cusp(k: f64) -> Self {
        FunctionSpec::PowerCusp {
            center: 0.5,
            exponent: k,
            scale: 1.0,
            offset: 0.0,
        }
    }
}

/// One monotone piece `base + scale * |t - anchor|^exponent` on `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub anchor: f64,
    pub base: f64,
    pub scale: f64,
    pub exponent: f64,
}

impl Piece {
    #[inline]
    fn eval(&self, t: f64) -> f64 {
        let d = (t - self.anchor).abs();
        self.base + self.scale * power(d, self.exponent)
    }

    /// Integral over `[a, b] ⊆ [start, end]`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let da = (a - self.anchor).abs();
        let db = (b - self.anchor).abs();
        let k1 = self.exponent + 1.0;
        let shape = (power(da.max(db), k1) - power(da.min(db), k1)) / k1;
        self.base * (b - a) + self.scale * shape
    }

    /// Distance from the anchor to the far end of the piece.
    #[inline]
    pub fn reach(&self) -> f64 {
        self.end - self.start
    }
}

#[inline]
fn power(d: f64, k: f64) -> f64 {
    if k == 1.0 {
        d
    } else if k == 2.0 {
        d * d
    } else if d == 0.0 {
        0.0
    } else {
        d.powf(k)
    }
}

/// Location and value of the minimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremumTruth {
    pub z: f64,
    pub m: f64,
}

/// A validated convex function on `[0, 1]` with a unique minimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexFunction {
    spec: FunctionSpec,
    pieces: Vec<Piece>,
    truth: ExtremumTruth,
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidFunction(format!("{name} must be finite, got {x}")))
    }
}

fn in_unit(name: &str, x: f64) -> Result<()> {
    finite(name, x)?;
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidFunction(format!("{name} must lie in [0, 1], got {x}")))
    }
}

fn cusp_pieces(center: f64, exponent: f64, left: f64, right: f64, offset: f64) -> Vec<Piece> {
    let mut pieces = Vec::with_capacity(2);
    if center > 0.0 {
        pieces.push(Piece {
            start: 0.0,
            end: center,
            anchor: center,
            base: offset,
            scale: left,
            exponent,
        });
    }
    if center < 1.0 {
        pieces.push(Piece {
            start: center,
            end: 1.0,
            anchor: center,
            base: offset,
            scale: right,
            exponent,
        });
    }
    pieces
}

impl ConvexFunction {
    /// Validates `spec` and builds the function.
    pub fn new(spec: FunctionSpec) -> Result<Self> {
        let (pieces, truth) = match &spec {
            &FunctionSpec::PowerCusp {
                center,
                exponent,
                scale,
                offset,
            } => {
                finite("center", center)?;
                if !(center > 0.0 && center < 1.0) {
                    return Err(Error::InvalidFunction(format!(
                        "power cusp center must lie in (0, 1), got {center}"
                    )));
                }
                finite("exponent", exponent)?;
                if exponent < 1.0 {
                    return Err(Error::InvalidFunction(format!(
                        "exponent must be >= 1, got {exponent}"
                    )));
                }
                finite("scale", scale)?;
                if scale <= 0.0 {
                    return Err(Error::InvalidFunction(format!("scale must be > 0, got {scale}")));
                }
                finite("offset", offset)?;
                (
                    cusp_pieces(center, exponent, scale, scale, offset),
                    ExtremumTruth { z: center, m: offset },
                )
            }
            &FunctionSpec::AsymmetricCusp {
                center,
                left_slope,
                right_slope,
                offset,
            } => {
                in_unit("center", center)?;
                finite("left_slope", left_slope)?;
                finite("right_slope", right_slope)?;
                finite("offset", offset)?;
                if !(left_slope < 0.0 && right_slope > 0.0) {
                    return Err(Error::InvalidFunction(format!(
                        "need left_slope < 0 < right_slope, got {left_slope} and {right_slope}"
                    )));
                }
                (
                    cusp_pieces(center, 1.0, -left_slope, right_slope, offset),
                    ExtremumTruth { z: center, m: offset },
                )
            }
            &FunctionSpec::Quadratic {
                curvature,
                center,
                offset,
            } => {
                in_unit("center", center)?;
                finite("curvature", curvature)?;
                finite("offset", offset)?;
                if curvature <= 0.0 {
                    return Err(Error::InvalidFunction(format!(
                        "curvature must be > 0, got {curvature}"
                    )));
                }
                (
                    cusp_pieces(center, 2.0, curvature, curvature, offset),
                    ExtremumTruth { z: center, m: offset },
                )
            }
            FunctionSpec::PiecewiseLinear { knots, values } => piecewise_linear(knots, values)?,
        };
        Ok(ConvexFunction { spec, pieces, truth })
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Exact minimizer and minimum.
    pub fn truth(&self) -> ExtremumTruth {
        self.truth
    }

    fn piece_index(&self, t: f64) -> usize {
        self.pieces
            .partition_point(|p| p.end < t)
            .min(self.pieces.len() - 1)
    }

    /// Value at `t`, which must lie in `[0, 1]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("evaluation point must lie in [0, 1], got {t}")));
        }
        Ok(self.value(t))
    }

    #[inline]
    pub(crate) fn value(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].eval(t)
    }

    /// `∫_a^b f(t) dt` for `0 <= a <= b <= 1`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::domain(format!(
                "integration limits must lie in [0, 1], got [{a}, {b}]"
            )));
        }
        if a > b {
            return Err(Error::domain(format!("integration limits reversed: {a} > {b}")));
        }
        Ok(self.integral(a, b))
    }

    pub(crate) fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let first = self.piece_index(a);
        let mut total = 0.0;
        for piece in &self.pieces[first..] {
            if piece.start >= b {
                break;
            }
            let lo = a.max(piece.start);
            let hi = b.min(piece.end);
            if hi > lo {
                total += piece.integral(lo, hi);
            }
        }
        total
    }
}

fn piecewise_linear(knots: &[f64], values: &[f64]) -> Result<(Vec<Piece>, ExtremumTruth)> {
    if knots.len() < 2 {
        return Err(Error::InvalidFunction("need at least two knots".into()));
    }
    if knots.len() != values.len() {
        return Err(Error::InvalidFunction(format!(
            "{} knots but {} values",
            knots.len(),
            values.len()
        )));
    }
    if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
        return Err(Error::InvalidFunction("knots must start at 0 and end at 1".into()));
    }
    for (i, (&t, &v)) in knots.iter().zip(values).enumerate() {
        finite(&format!("knots[{i}]"), t)?;
        finite(&format!("values[{i}]"), v)?;
    }
    if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidFunction(format!(
            "knots must be strictly increasing (index {})",
            i + 1
        )));
    }
    let slopes: Vec<f64> = (0..knots.len() - 1)
        .map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]))
        .collect();
    for (i, w) in slopes.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::NonConvex {
                knot: i + 1,
                left: w[0],
                right: w[1],
            });
        }
    }
    if let Some(i) = slopes.iter().position(|&s| s == 0.0) {
        return Err(Error::NonUniqueMinimizer(format!(
            "segment [{}, {}] is flat",
            knots[i],
            knots[i + 1]
        )));
    }
    let pieces = slopes
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (anchor, base) = if s > 0.0 {
                (knots[i], values[i])
            } else {
                (knots[i + 1], values[i + 1])
            };
            Piece {
                start: knots[i],
                end: knots[i + 1],
                anchor,
                base,
                scale: s.abs(),
                exponent: 1.0,
            }
        })
        .collect();
    // convex with no flat segment: the smallest knot value is the unique minimum
    let (zi, &m) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok((pieces, ExtremumTruth { z: knots[zi], m }))
}
