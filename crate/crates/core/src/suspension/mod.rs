//! Time-periodic Hamiltonian suspension of the perturbed twist map.
//!
//! The twist map is *defined* as the time-1 map of
//!
//! ```text
//! H(t, x, y) = y²/2 + D₀ + ε · b(t) · c(y) · cos(2πx) / (4π²)
//! ```
//!
//! where `b` is a unit-mass bump in `t` vanishing to all orders at integer
//! times, `c` is a plateau cutoff (`c = 1` on `|y| <= K - 1`, `c = 0` on
//! `|y| >= K`) and `D₀ = D₊ = D₋` is the asymptotic constant. The `1/(4π²)`
//! normalization makes the momentum kick over one period `(ε/2π)·sin 2πx`, so
//! `ε` plays the role of Chirikov's stochasticity parameter in the plateau.

mod time_one;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smooth::{bump, bump_integral, smooth_step, Jet3};

pub use time_one::{IntegratorConfig, MapOutput, TimeOneMap};

const TAU: f64 = 2.0 * PI;

/// Potential normalization `1/(4π²)`.
pub const KICK_NORMALIZATION: f64 = 1.0 / (4.0 * PI * PI);

/// Lower bound on `∂²H/∂y²` accepted at construction.
pub const MIN_MOMENTUM_HESSIAN: f64 = 0.5;

/// Maximum of `|S'|` for the smooth step, attained at the midpoint.
const STEP_SLOPE_MAX: f64 = 2.0;

const NEWTON_MAX_ITER: usize = 100;

/// Parameters of the Hamiltonian family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionSpec {
    /// Perturbation amplitude `ε >= 0`.
    pub epsilon: f64,
    /// Half-width `K` of the perturbation band; the map is the shear for `|y| >= K`.
    pub band_k: f64,
    /// Half-width `D >= K` of the band in which the Lagrangian is `L̂`.
    pub lagrangian_band: f64,
    /// Asymptotic constant for `y > K`: `H = y²/2 + D₊`.
    pub d_plus: f64,
    /// Asymptotic constant for `y < -K`: `H = y²/2 + D₋`.
    pub d_minus: f64,
}

/// Default asymptotic constant for a Lagrangian band of half-width `d`.
///
/// Gluing `y²/2 - D₊` at `D + 1` to a convex `√(A + By²)` at `D + 2` with
/// `A, B > 0` requires `-D₊ > (D + 1)²/2` (tangent-line intercepts of a convex
/// function decrease); the extra `D + 1` leaves room for the blend.
pub fn default_asymptotic_constant(d: f64) -> f64 {
    -((d + 1.0) * (d + 1.0) / 2.0 + d + 1.0)
}

impl SuspensionSpec {
    /// Family with `K = band_k`, `D = K` and the default asymptotic constant.
    pub fn new(epsilon: f64, band_k: f64) -> Result<Self> {
        let d0 = default_asymptotic_constant(band_k);
        let spec = Self {
            epsilon,
            band_k,
            lagrangian_band: band_k,
            d_plus: d0,
            d_minus: d0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.band_k.is_finite() && self.band_k > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "band_k must exceed 1 (the cutoff ramps over [K-1, K]), got {}",
                self.band_k
            )));
        }
        if !(self.lagrangian_band.is_finite() && self.lagrangian_band >= self.band_k) {
            return Err(Error::InvalidParameter(format!(
                "lagrangian band D = {} must satisfy D >= K = {}",
                self.lagrangian_band, self.band_k
            )));
        }
        if !(self.d_plus.is_finite() && self.d_minus.is_finite()) {
            return Err(Error::InvalidParameter("asymptotic constants must be finite".into()));
        }
        if self.d_plus != self.d_minus {
            // the section identification (h, v2/v1) needs the Legendre map at
            // t = 0 to be the identity, which forces H(0, ·, y) = y²/2 + const
            return Err(Error::InvalidParameter(format!(
                "this family needs D+ = D- (got {} and {})",
                self.d_plus, self.d_minus
            )));
        }
        let min_hessian = self.min_momentum_hessian();
        if min_hessian <= MIN_MOMENTUM_HESSIAN {
            return Err(Error::NotConvex {
                min_hessian,
                required: MIN_MOMENTUM_HESSIAN,
            });
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    /// The asymptotic constant `D₀ = D₊ = D₋`.
    pub fn asymptotic_constant(&self) -> f64 {
        self.d_plus
    }

    /// `b(t)` and `b'(t)`: normalized bump, 1-periodic.
    #[inline]
    pub fn time_profile(&self, t: f64) -> (f64, f64) {
        let (v, d) = bump(t.rem_euclid(1.0));
        let norm = bump_integral();
        (v / norm, d / norm)
    }

    /// Peak value of `b`.
    pub fn time_profile_max(&self) -> f64 {
        1.0 / bump_integral()
    }

    /// Plateau cutoff `c(y)`.
    #[inline]
    pub fn cutoff(&self, y: f64) -> Jet3 {
        let u = y.abs() - (self.band_k - 1.0);
        if u <= 0.0 {
            return Jet3::constant(1.0);
        }
        let s = smooth_step(u);
        let c = Jet3 {
            value: 1.0 - s.value,
            d1: -s.d1,
            d2: -s.d2,
            d3: -s.d3,
        };
        c.reflect(y.signum())
    }

    /// `min ∂²H/∂y²`, worst case over `t` (at the bump peak) and `x` (at
    /// `cos 2πx = ±1`), on a grid of 8001 momenta covering `[-K, K]`.
    pub fn min_momentum_hessian(&self) -> f64 {
        let amp = self.epsilon * self.time_profile_max() * KICK_NORMALIZATION;
        let n = 8000;
        (0..=n)
            .map(|i| {
                let y = -self.band_k + 2.0 * self.band_k * i as f64 / n as f64;
                1.0 - amp * self.cutoff(y).d2.abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Partial derivatives of `H` at a point.
    pub fn jet(&self, t: f64, x: f64, p: f64) -> HamiltonianJet {
        let (b, b1) = self.time_profile(t);
        let (s, c) = (TAU * x).sin_cos();
        let k = KICK_NORMALIZATION;
        HamiltonianJet {
            epsilon: self.epsilon,
            time: [b, b1],
            space: [k * c, -k * TAU * s, -k * TAU * TAU * c, k * TAU * TAU * TAU * s],
            momentum: self.cutoff(p),
            kinetic: Jet3 {
                value: 0.5 * p * p + self.asymptotic_constant(),
                d1: p,
                d2: 1.0,
                d3: 0.0,
            },
        }
    }

    pub fn hamiltonian_eval(&self, t: f64, x: f64, y: f64) -> f64 {
        self.jet(t, x, y).partial(0, 0, 0)
    }

    /// Solves `∂H/∂y(t, x, p) = v` for `p` and returns `(p, L̂(t, x, v))` with
    /// `L̂ = p·v - H(t, x, p)`.
    pub fn legendre_transform(&self, t: f64, x: f64, v: f64) -> Result<LegendrePoint> {
        if v.abs() >= self.band_k || self.epsilon == 0.0 {
            return Ok(LegendrePoint {
                momentum: v,
                lagrangian: 0.5 * v * v - self.asymptotic_constant(),
            });
        }
        let (b, _) = self.time_profile(t);
        let reach = self.epsilon * b * KICK_NORMALIZATION * (TAU * x).cos().abs() * STEP_SLOPE_MAX;
        let (mut lo, mut hi) = (v - reach - 1e-12, v + reach + 1e-12);
        let mut p = v;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let jet = self.jet(t, x, p);
            let g = jet.partial(0, 0, 1) - v;
            residual = g.abs();
            if g == 0.0 {
                break;
            }
            if g > 0.0 {
                hi = hi.min(p);
            } else {
                lo = lo.max(p);
            }
            let mut next = p - g / jet.partial(0, 0, 2);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - p).abs();
            p = next;
            if step <= 4.0 * f64::EPSILON * p.abs().max(1.0) {
                residual = (self.jet(t, x, p).partial(0, 0, 1) - v).abs();
                break;
            }
        }
        let tolerance = 1e-12 * v.abs().max(1.0);
        if residual > tolerance {
            return Err(Error::Numerical {
                operation: "legendre_transform",
                point: format!("(t, x, v) = ({t}, {x}, {v})"),
                residual,
                tolerance,
            });
        }
        let lagrangian = p * v - self.hamiltonian_eval(t, x, p);
        Ok(LegendrePoint {
            momentum: p,
            lagrangian,
        })
    }

    /// `L̂(t, x, v)`.
    pub fn lagrangian_hat_eval(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        Ok(self.legendre_transform(t, x, v)?.lagrangian)
    }

    /// `L̂` together with the partial derivatives needed by the
    /// Euler–Lagrange equation, obtained through convex duality.
    pub fn lagrangian_jet(&self, t: f64, x: f64, v: f64) -> Result<LagrangianJet> {
        let lp = self.legendre_transform(t, x, v)?;
        let h = self.jet(t, x, lp.momentum);
        let hpp = h.partial(0, 0, 2);
        Ok(LagrangianJet {
            value: lp.lagrangian,
            momentum: lp.momentum,
            d_v: lp.momentum,
            d_vv: 1.0 / hpp,
            d_x: -h.partial(0, 1, 0),
            d_t: -h.partial(1, 0, 0),
            d_xv: -h.partial(0, 1, 1) / hpp,
            d_tv: -h.partial(1, 0, 1) / hpp,
            hamiltonian: h,
        })
    }

    /// Time-1 map with the given integrator settings.
    pub fn time_one_map(&self, config: IntegratorConfig) -> Result<TimeOneMap> {
        TimeOneMap::new(*self, config)
    }
}

/// Factors of `H` at a point: `H = T(p) + ε · b(t) · V(x) · c(p)`.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianJet {
    epsilon: f64,
    /// `b, b'`
    time: [f64; 2],
    /// `V, V', V'', V'''`
    space: [f64; 4],
    momentum: Jet3,
    kinetic: Jet3,
}

fn jet_component(j: &Jet3, k: usize) -> f64 {
    match k {
        0 => j.value,
        1 => j.d1,
        2 => j.d2,
        3 => j.d3,
        _ => panic!("derivative order {k} not tracked"),
    }
}

impl HamiltonianJet {
    /// `∂ᵢₜ ∂ʲₓ ∂ᵏ_p H` for `i <= 1`, `j <= 3`, `k <= 3`.
    #[inline]
    pub fn partial(&self, i: usize, j: usize, k: usize) -> f64 {
        let kinetic = if i == 0 && j == 0 {
            jet_component(&self.kinetic, k)
        } else {
            0.0
        };
        kinetic + self.epsilon * self.time[i] * self.space[j] * jet_component(&self.momentum, k)
    }
}

/// Result of the Legendre transform at one velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendrePoint {
    pub momentum: f64,
    pub lagrangian: f64,
}

/// `L̂` and its partials at `(t, x, v)`.
#[derive(Debug, Clone, Copy)]
pub struct LagrangianJet {
    pub value: f64,
    pub momentum: f64,
    pub d_v: f64,
    pub d_vv: f64,
    pub d_x: f64,
    pub d_t: f64,
    pub d_xv: f64,
    pub d_tv: f64,
    /// Hamiltonian partials at the dual point `(t, x, p)`.
    pub hamiltonian: HamiltonianJet,
}
