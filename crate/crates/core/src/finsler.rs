//! The Finsler metric on `T²` whose geodesics are the Euler–Lagrange
//! solutions of the suspension Lagrangian.
//!
//! Coordinates on the torus are `(t, x)`; tangent vectors are `(v1, v2)`.
//! For `v1 > 0`, `F = v1 · L(t, x, v2/v1)` where `L` is `L̂` on `|y| <= D`
//! and a convex profile `h±` outside, blending `y²/2 - D±` (up to `D + 1`)
//! into `√(A + By²)` (from `D + 2`). For `v1 <= 0`, `F = F₀ = √(Av1² + Bv2²)`.
//! The two formulas agree on a cone around the `v2` axis, so `F` is smooth
//! across `v1 = 0`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smooth::{bump, integrate, smooth_step};
use crate::suspension::{SuspensionSpec, KICK_NORMALIZATION};

/// Quadrature panels for profile integrals over the unit blend interval.
const PROFILE_PANELS: usize = 4;

/// Grid size for the convexity certificate of a profile.
const PROFILE_CERT_POINTS: usize = 10_000;

/// Value and first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Convex profile `h±`, written in the outward coordinate `z = ±y` as
///
/// ```text
/// P(z) = z²/2 - D±         z <= D + 1
///        √(A + Bz²)         z >= D + 2
/// ```
///
/// with `P''` on the blend `u = z - (D + 1) ∈ [0, 1]` equal to
/// `(1 - S(u)) + S(u)·P''_outer(z) + α₀β(u) + α₁β(u)(u - 1/2)`, `S` the smooth
/// step and `β` the bump. `α` is solved so that `P` and `P'` match the outer
/// piece at `D + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexProfile {
    pub side: Side,
    /// Inner band edge `D`.
    pub d: f64,
    pub a: f64,
    pub b: f64,
    /// `D±`: the inner piece is `z²/2 - D±`.
    pub asymptotic_constant: f64,
    /// Blend corrections `(α₀, α₁)`.
    pub correction: [f64; 2],
}

/// Moments `∫ w(u)·base(u) du` of the uncorrected blend.
fn blend_moments(d: f64, a: f64, b: f64) -> (f64, f64) {
    let base = |u: f64| blend_base(d, a, b, u);
    let i0 = integrate(0.0, 1.0, PROFILE_PANELS, base);
    let i1 = integrate(0.0, 1.0, PROFILE_PANELS, |u| (1.0 - u) * base(u));
    (i0, i1)
}

fn outer_second_derivative(a: f64, b: f64, z: f64) -> f64 {
    let q = a + b * z * z;
    a * b / (q * q.sqrt())
}

fn blend_base(d: f64, a: f64, b: f64, u: f64) -> f64 {
    let s = smooth_step(u).value;
    let outer = if a > 0.0 && b > 0.0 {
        outer_second_derivative(a, b, d + 1.0 + u)
    } else {
        0.0
    };
    (1.0 - s) + s * outer
}

/// Constants `(A, B)` for which the plain blend `(1 - S)·1 + S·P''_outer`
/// already matches value and slope, so the corrections vanish.
///
/// Fails when `-D±` is too small for a convex gluing with `A > 0`.
pub fn derive_norm_constants(d: f64, asymptotic_constant: f64) -> Result<(f64, f64)> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("band edge D must be positive, got {d}")));
    }
    let inner_edge = d + 1.0;
    let outer_edge = d + 2.0;
    let inner_value = 0.5 * inner_edge * inner_edge - asymptotic_constant;
    let (mut a, mut b) = (0.0, 0.0);
    for _ in 0..200 {
        let (i0, i1) = blend_moments(d, a, b);
        let slope = inner_edge + i0;
        let value = inner_value + inner_edge + i1;
        let a_next = value * (value - outer_edge * slope);
        let b_next = slope * value / outer_edge;
        if a_next <= 0.0 {
            return Err(Error::Inadmissible(format!(
                "A = Q(Q - (D+2)s) = {a_next:.6} is not positive (Q = {value:.6}, s = {slope:.6}); \
                 the asymptotic constant D± = {asymptotic_constant} must be more negative"
            )));
        }
        let change = (a_next - a).abs() + (b_next - b).abs();
        a = a_next;
        b = b_next;
        if change <= 1e-14 * (a + b) {
            return Ok((a, b));
        }
    }
    Err(Error::Numerical {
        operation: "derive_norm_constants",
        point: format!("D = {d}, D± = {asymptotic_constant}"),
        residual: f64::NAN,
        tolerance: 1e-14,
    })
}

impl ConvexProfile {
    /// Builds the profile for given `(A, B)`, solving the blend corrections
    /// and certifying `P'' > 0` on a 10⁴-point grid of the blend interval.
    pub fn build(d: f64, a: f64, b: f64, asymptotic_constant: f64, side: Side) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Inadmissible(format!("need A > 0 and B > 0, got A = {a}, B = {b}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("band edge D must be positive, got {d}")));
        }
        let inner_edge = d + 1.0;
        let outer_edge = d + 2.0;
        let q = (a + b * outer_edge * outer_edge).sqrt();
        let outer_slope = b * outer_edge / q;
        if outer_slope <= inner_edge {
            return Err(Error::Inadmissible(format!(
                "outer slope B(D+2)/√(A+B(D+2)²) = {outer_slope:.6} must exceed the inner slope D+1 = {inner_edge}"
            )));
        }
        let inner_value = 0.5 * inner_edge * inner_edge - asymptotic_constant;
        let rise = q - inner_value;
        if !(rise > inner_edge && rise < outer_slope) {
            return Err(Error::Inadmissible(format!(
                "convexity needs D+1 < P(D+2) - P(D+1) < P'(D+2), got {inner_edge} < {rise:.6} < {outer_slope:.6}"
            )));
        }

        let (i0, i1) = blend_moments(d, a, b);
        let beta = |u: f64| bump(u).0;
        let m00 = integrate(0.0, 1.0, PROFILE_PANELS, beta);
        let m01 = integrate(0.0, 1.0, PROFILE_PANELS, |u| beta(u) * (u - 0.5));
        let m10 = integrate(0.0, 1.0, PROFILE_PANELS, |u| (1.0 - u) * beta(u));
        let m11 = integrate(0.0, 1.0, PROFILE_PANELS, |u| (1.0 - u) * beta(u) * (u - 0.5));
        let r0 = outer_slope - inner_edge - i0;
        let r1 = q - inner_value - inner_edge - i1;
        let det = m00 * m11 - m01 * m10;
        let correction = [(r0 * m11 - m01 * r1) / det, (m00 * r1 - m10 * r0) / det];

        let profile = Self {
            side,
            d,
            a,
            b,
            asymptotic_constant,
            correction,
        };
        let min = profile.min_blend_curvature();
        if min <= 0.0 {
            return Err(Error::Inadmissible(format!(
                "blended profile is not strictly convex: min h'' = {min:.6e} (A = {a}, B = {b})"
            )));
        }
        Ok(profile)
    }

    /// Minimum of `h''` on the blend interval grid.
    pub fn min_blend_curvature(&self) -> f64 {
        (0..=PROFILE_CERT_POINTS)
            .map(|k| self.blend_second(k as f64 / PROFILE_CERT_POINTS as f64))
            .fold(f64::INFINITY, f64::min)
    }

    fn blend_second(&self, u: f64) -> f64 {
        let beta = bump(u).0;
        blend_base(self.d, self.a, self.b, u) + beta * (self.correction[0] + self.correction[1] * (u - 0.5))
    }

    /// `P` and its derivatives in the outward coordinate `z`.
    fn outward(&self, z: f64) -> Jet2 {
        let inner_edge = self.d + 1.0;
        if z <= inner_edge {
            return Jet2 {
                value: 0.5 * z * z - self.asymptotic_constant,
                d1: z,
                d2: 1.0,
            };
        }
        if z >= self.d + 2.0 {
            let q = (self.a + self.b * z * z).sqrt();
            return Jet2 {
                value: q,
                d1: self.b * z / q,
                d2: outer_second_derivative(self.a, self.b, z),
            };
        }
        let u = z - inner_edge;
        let slope = inner_edge + integrate(0.0, u, PROFILE_PANELS, |w| self.blend_second(w));
        let value = 0.5 * inner_edge * inner_edge - self.asymptotic_constant
            + inner_edge * u
            + integrate(0.0, u, PROFILE_PANELS, |w| (u - w) * self.blend_second(w));
        Jet2 {
            value,
            d1: slope,
            d2: self.blend_second(u),
        }
    }

    /// `h(y)`, `h'(y)`, `h''(y)`.
    pub fn eval(&self, y: f64) -> Jet2 {
        let sigma = self.side.sign();
        let j = self.outward(sigma * y);
        Jet2 {
            value: j.value,
            d1: sigma * j.d1,
            d2: j.d2,
        }
    }
}

/// `F₀(v) = √(Av1² + Bv2²)`.
pub fn flat_norm(a: f64, b: f64, v1: f64, v2: f64) -> f64 {
    (a * v1 * v1 + b * v2 * v2).sqrt()
}

/// The Finsler metric `F` with all of its construction data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinslerModel {
    pub suspension: SuspensionSpec,
    pub a: f64,
    pub b: f64,
    pub plus: ConvexProfile,
    pub minus: ConvexProfile,
}

impl FinslerModel {
    /// Builds the metric with `(A, B)` derived from the `+` profile.
    pub fn new(suspension: SuspensionSpec) -> Result<Self> {
        suspension.validate()?;
        let (a, b) = derive_norm_constants(suspension.lagrangian_band, suspension.d_plus)?;
        Self::with_norm_constants(suspension, a, b)
    }

    /// Builds the metric with explicitly chosen `(A, B)`.
    pub fn with_norm_constants(suspension: SuspensionSpec, a: f64, b: f64) -> Result<Self> {
        suspension.validate()?;
        let d = suspension.lagrangian_band;
        let plus = ConvexProfile::build(d, a, b, suspension.d_plus, Side::Plus)?;
        let minus = ConvexProfile::build(d, a, b, suspension.d_minus, Side::Minus)?;
        let model = Self {
            suspension,
            a,
            b,
            plus,
            minus,
        };
        model.check_positive()?;
        Ok(model)
    }

    /// `L̂ >= -D± - ε·max b·(1/4π²)` in the band; the profiles are positive
    /// once their inner pieces are.
    fn check_positive(&self) -> Result<()> {
        let s = &self.suspension;
        let floor = -s.d_plus.max(s.d_minus) - s.epsilon * s.time_profile_max() * KICK_NORMALIZATION;
        if floor <= 0.0 {
            return Err(Error::Inadmissible(format!(
                "the Lagrangian must be positive for F to be positive; its lower bound is {floor:.6}"
            )));
        }
        Ok(())
    }

    /// Re-checks a deserialized model against a fresh construction.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::with_norm_constants(self.suspension, self.a, self.b)?;
        let drift = rebuilt
            .plus
            .correction
            .iter()
            .chain(rebuilt.minus.correction.iter())
            .zip(self.plus.correction.iter().chain(self.minus.correction.iter()))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if drift > 1e-9 || rebuilt.plus.side != Side::Plus || rebuilt.minus.side != Side::Minus {
            return Err(Error::InvalidParameter(format!(
                "stored profile coefficients do not match the constants (max deviation {drift:.3e})"
            )));
        }
        Ok(())
    }

    pub fn band(&self) -> f64 {
        self.suspension.lagrangian_band
    }

    /// The `ε = 0` metric `F̄` built on the same constants.
    pub fn flat_reference(&self) -> Self {
        Self {
            suspension: self.suspension.with_epsilon(0.0),
            ..*self
        }
    }

    /// `L(t, x, y)` and its first two `y`-derivatives.
    pub fn lagrangian_jet(&self, t: f64, x: f64, y: f64) -> Result<Jet2> {
        let d = self.band();
        if y > d {
            return Ok(self.plus.eval(y));
        }
        if y < -d {
            return Ok(self.minus.eval(y));
        }
        let lp = self.suspension.legendre_transform(t, x, y)?;
        let hpp = self.suspension.jet(t, x, lp.momentum).partial(0, 0, 2);
        Ok(Jet2 {
            value: lp.lagrangian,
            d1: lp.momentum,
            d2: 1.0 / hpp,
        })
    }

    pub fn lagrangian_full_eval(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.lagrangian_jet(t, x, y)?.value)
    }

    pub fn finsler_eval(&self, t: f64, x: f64, v1: f64, v2: f64) -> Result<f64> {
        if v1 == 0.0 && v2 == 0.0 {
            return Err(Error::ZeroVector("finsler_eval"));
        }
        if v1 > 0.0 {
            Ok(v1 * self.lagrangian_full_eval(t, x, v2 / v1)?)
        } else {
            Ok(flat_norm(self.a, self.b, v1, v2))
        }
    }

    pub fn flat_reference_eval(&self, t: f64, x: f64, v1: f64, v2: f64) -> Result<f64> {
        self.flat_reference().finsler_eval(t, x, v1, v2)
    }

    /// Hessian of `½F²` in `(v1, v2)`.
    pub fn fundamental_tensor(&self, t: f64, x: f64, v1: f64, v2: f64) -> Result<Matrix2<f64>> {
        if v1 == 0.0 && v2 == 0.0 {
            return Err(Error::ZeroVector("fundamental_tensor"));
        }
        if v1 <= 0.0 {
            return Ok(Matrix2::new(self.a, 0.0, 0.0, self.b));
        }
        let y = v2 / v1;
        let l = self.lagrangian_jet(t, x, y)?;
        let f = v1 * l.value;
        let df = [l.value - y * l.d1, l.d1];
        let hess_f = Matrix2::new(y * y, -y, -y, 1.0) * (l.d2 / v1);
        let rank_one = Matrix2::new(df[0] * df[0], df[0] * df[1], df[0] * df[1], df[1] * df[1]);
        Ok(rank_one + hess_f * f)
    }
}

/// Sample region for [`cr_distance`]: a `torus_points²` grid of base points
/// and `directions` unit vectors with `v1 >= min_v1`. Vectors with small or
/// negative `v1` lie in the flat sector where `F = F̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrRegion {
    pub torus_points: usize,
    pub directions: usize,
    pub min_v1: f64,
}

impl Default for CrRegion {
    fn default() -> Self {
        Self {
            torus_points: 8,
            directions: 9,
            min_v1: 0.2,
        }
    }
}

/// Step of the nested central differences, per derivative order.
pub const CR_STEP: f64 = 1e-3;

/// `max |∂^α (F - F̄)|` over the region and all multi-indices in
/// `(t, x, v1, v2)` with `|α| <= r`, by nested central differences.
pub fn cr_distance(model: &FinslerModel, r: usize, region: &CrRegion) -> Result<f64> {
    if r > 4 {
        return Err(Error::InvalidParameter(format!("derivative order must be <= 4, got {r}")));
    }
    if region.torus_points == 0 || region.directions == 0 || !(region.min_v1 > 0.0 && region.min_v1 < 1.0) {
        return Err(Error::InvalidParameter(format!("bad C^r sample region {region:?}")));
    }
    let flat = model.flat_reference();
    let diff = |p: [f64; 4]| -> Result<f64> {
        Ok(model.finsler_eval(p[0], p[1], p[2], p[3])? - flat.finsler_eval(p[0], p[1], p[2], p[3])?)
    };
    let indices = multi_indices(r);
    let max_angle = region.min_v1.acos();
    let mut worst: f64 = 0.0;
    for it in 0..region.torus_points {
        for ix in 0..region.torus_points {
            let t = it as f64 / region.torus_points as f64;
            let x = ix as f64 / region.torus_points as f64;
            for k in 0..region.directions {
                let phi = if region.directions == 1 {
                    0.0
                } else {
                    -max_angle + 2.0 * max_angle * k as f64 / (region.directions - 1) as f64
                };
                let point = [t, x, phi.cos(), phi.sin()];
                for alpha in &indices {
                    worst = worst.max(nested_difference(&diff, point, *alpha)?.abs());
                }
            }
        }
    }
    Ok(worst)
}

fn multi_indices(r: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=r {
        for b in 0..=r - a {
            for c in 0..=r - a - b {
                for d in 0..=r - a - b - c {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

fn nested_difference<F>(f: &F, point: [f64; 4], alpha: [usize; 4]) -> Result<f64>
where
    F: Fn([f64; 4]) -> Result<f64>,
{
    let Some(i) = alpha.iter().position(|&n| n > 0) else {
        return f(point);
    };
    let mut lower = alpha;
    lower[i] -= 1;
    let (mut plus, mut minus) = (point, point);
    plus[i] += CR_STEP;
    minus[i] -= CR_STEP;
    Ok((nested_difference(f, plus, lower)? - nested_difference(f, minus, lower)?) / (2.0 * CR_STEP))
}
