//! Symplectic time-1 map of the suspension Hamiltonian.
//!
//! `H = T(y) + W(t, x, y)` is split into the free drift `T = y²/2 + D₀` and
//! the perturbation `W = ε b(t) V(x) c(y)`, composed with Yoshida's
//! fourth-order triple jump. The `W`-flow (time frozen) is an explicit kick
//! while the momentum stays on the plateau `|y| <= K - 1`, the identity on
//! `|y| >= K`, and a two-stage Gauss–Legendre step in the cutoff ramp, so
//! every sub-step is exactly symplectic. Tangent vectors are pushed through
//! the same sub-steps, giving the exact derivative of the discrete map.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Matrix4x2};
use serde::{Deserialize, Serialize};

use super::{SuspensionSpec, KICK_NORMALIZATION};
use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;
const GL_MAX_ITER: usize = 60;

/// Settings of the time-1 integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Steps per unit time; the step is `1/steps_per_period`.
    pub steps_per_period: usize,
    /// Bound on the Richardson error estimate.
    pub tolerance: f64,
    /// Re-run at half the step and check the difference against `tolerance`.
    pub richardson: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 1000,
            tolerance: 1e-10,
            richardson: true,
        }
    }
}

impl IntegratorConfig {
    /// Unverified fixed-step configuration for long orbit sweeps.
    pub fn sweep(steps_per_period: usize) -> Self {
        Self {
            steps_per_period,
            tolerance: f64::INFINITY,
            richardson: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period == 0 {
            return Err(Error::InvalidParameter("steps_per_period must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("integrator tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Image of a point under the time-1 map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOutput {
    /// Unreduced image `x`, continuous in the input `x`.
    pub x_lift: f64,
    pub y: f64,
    /// `∂(x', y')/∂(x, y)`.
    pub jacobian: Matrix2<f64>,
}

impl MapOutput {
    fn shear(x: f64, y: f64) -> Self {
        Self {
            x_lift: x + y,
            y,
            jacobian: Matrix2::new(1.0, 1.0, 0.0, 1.0),
        }
    }
}

/// Kick amplitudes `ε b(t)` at the stage times of one step size.
#[derive(Debug, Clone)]
struct Schedule {
    h: f64,
    /// three per step
    amplitudes: Vec<f64>,
}

// Yoshida triple jump
fn yoshida_weights() -> (f64, f64) {
    let cbrt2 = 2f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    (w1, -cbrt2 * w1)
}

impl Schedule {
    fn new(spec: &SuspensionSpec, steps: usize) -> Self {
        let h = 1.0 / steps as f64;
        let (w1, w0) = yoshida_weights();
        let offsets = [0.5 * w1, w1 + 0.5 * w0, 1.0 - 0.5 * w1];
        let amplitudes = (0..steps)
            .flat_map(|k| offsets.map(|c| spec.epsilon * spec.time_profile((k as f64 + c) * h).0))
            .collect();
        Self { h, amplitudes }
    }
}

/// Precomputed time-1 map of a [`SuspensionSpec`].
#[derive(Debug, Clone)]
pub struct TimeOneMap {
    spec: SuspensionSpec,
    config: IntegratorConfig,
    primary: Schedule,
    refined: Option<Schedule>,
}

/// Phase-space point with its accumulated tangent map.
struct State {
    x: f64,
    y: f64,
    j: [f64; 4],
}

impl State {
    #[inline]
    fn drift(&mut self, tau: f64) {
        self.x += self.y * tau;
        self.j[0] += tau * self.j[2];
        self.j[1] += tau * self.j[3];
    }
}

impl TimeOneMap {
    pub fn new(spec: SuspensionSpec, config: IntegratorConfig) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        let primary = Schedule::new(&spec, config.steps_per_period);
        let refined = config
            .richardson
            .then(|| Schedule::new(&spec, 2 * config.steps_per_period));
        Ok(Self {
            spec,
            config,
            primary,
            refined,
        })
    }

    pub fn spec(&self) -> &SuspensionSpec {
        &self.spec
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Whether the map is exactly the shear at momentum `y`.
    #[inline]
    pub fn is_free(&self, y: f64) -> bool {
        self.spec.epsilon == 0.0 || y.abs() >= self.spec.band_k
    }

    /// Advances `(x, y)` by one period. `x` is not reduced.
    pub fn advance(&self, x: f64, y: f64) -> Result<MapOutput> {
        if self.is_free(y) {
            return Ok(MapOutput::shear(x, y));
        }
        let coarse = self.run(&self.primary, x, y, None)?;
        let Some(refined) = &self.refined else {
            return Ok(coarse);
        };
        let fine = self.run(refined, x, y, None)?;
        // fourth-order method: error(h/2) ≈ |Φ_h - Φ_{h/2}| / 15
        let estimate = (fine.x_lift - coarse.x_lift).abs().max((fine.y - coarse.y).abs()) / 15.0;
        if estimate > self.config.tolerance {
            return Err(Error::Numerical {
                operation: "hamiltonian_time1_map",
                point: format!("(x, y) = ({x}, {y})"),
                residual: estimate,
                tolerance: self.config.tolerance,
            });
        }
        Ok(fine)
    }

    /// Samples `(t, x, y)` of the flow at every step boundary of `[0, 1]`.
    pub fn trajectory(&self, x: f64, y: f64) -> Result<Vec<(f64, f64, f64)>> {
        let steps = self.primary.amplitudes.len() / 3;
        if self.is_free(y) {
            return Ok((0..=steps)
                .map(|k| {
                    let t = k as f64 / steps as f64;
                    (t, x + y * t, y)
                })
                .collect());
        }
        let mut samples = Vec::with_capacity(steps + 1);
        self.run(&self.primary, x, y, Some(&mut samples))?;
        Ok(samples)
    }

    fn run(
        &self,
        schedule: &Schedule,
        x: f64,
        y: f64,
        mut record: Option<&mut Vec<(f64, f64, f64)>>,
    ) -> Result<MapOutput> {
        let (w1, w0) = yoshida_weights();
        let h = schedule.h;
        let edge = 0.5 * w1 * h;
        let middle = 0.5 * (w1 + w0) * h;
        let weights = [w1 * h, w0 * h, w1 * h];
        let mut s = State {
            x,
            y,
            j: [1.0, 0.0, 0.0, 1.0],
        };
        if let Some(r) = record.as_deref_mut() {
            r.push((0.0, x, y));
        }
        for (k, amps) in schedule.amplitudes.chunks_exact(3).enumerate() {
            s.drift(edge);
            self.kick(&mut s, amps[0], weights[0])?;
            s.drift(middle);
            self.kick(&mut s, amps[1], weights[1])?;
            s.drift(middle);
            self.kick(&mut s, amps[2], weights[2])?;
            s.drift(edge);
            if let Some(r) = record.as_deref_mut() {
                r.push(((k + 1) as f64 * h, s.x, s.y));
            }
        }
        Ok(MapOutput {
            x_lift: s.x,
            y: s.y,
            jacobian: Matrix2::new(s.j[0], s.j[1], s.j[2], s.j[3]),
        })
    }

    /// Flow of `W` with frozen time for duration `tau`, amplitude `amp = ε b(t)`.
    #[inline]
    fn kick(&self, s: &mut State, amp: f64, tau: f64) -> Result<()> {
        let plateau = self.spec.band_k - 1.0;
        let ay = s.y.abs();
        if amp == 0.0 || ay >= self.spec.band_k {
            return Ok(());
        }
        if ay <= plateau {
            let (sin, cos) = (TAU * s.x).sin_cos();
            let y_new = s.y + tau * amp * sin / TAU;
            if y_new.abs() <= plateau {
                s.y = y_new;
                let k = tau * amp * cos;
                s.j[2] += k * s.j[0];
                s.j[3] += k * s.j[1];
                return Ok(());
            }
        }
        self.ramp_kick(s, amp, tau)
    }

    /// Two-stage Gauss–Legendre step for the `W`-flow inside the cutoff ramp.
    fn ramp_kick(&self, s: &mut State, amp: f64, tau: f64) -> Result<()> {
        let r3 = 3f64.sqrt() / 6.0;
        let a = [[0.25, 0.25 - r3], [0.25 + r3, 0.25]];
        let field = |x: f64, y: f64| -> ([f64; 2], Matrix2<f64>) {
            let (sin, cos) = (TAU * x).sin_cos();
            let v = KICK_NORMALIZATION * cos;
            let v1 = -KICK_NORMALIZATION * TAU * sin;
            let v2 = -cos;
            let c = self.spec.cutoff(y);
            let f = [amp * v * c.d1, -amp * v1 * c.value];
            let df = Matrix2::new(
                amp * v1 * c.d1,
                amp * v * c.d2,
                -amp * v2 * c.value,
                -amp * v1 * c.d1,
            );
            (f, df)
        };
        let z = [s.x, s.y];
        let mut stages = [z, z];
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..GL_MAX_ITER {
            let f = [field(stages[0][0], stages[0][1]).0, field(stages[1][0], stages[1][1]).0];
            change = 0.0;
            for i in 0..2 {
                for d in 0..2 {
                    let next = z[d] + tau * (a[i][0] * f[0][d] + a[i][1] * f[1][d]);
                    change = f64::max(change, (next - stages[i][d]).abs());
                    stages[i][d] = next;
                }
            }
            if change <= 1e-15 * (1.0 + z[0].abs() + z[1].abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical {
                operation: "gauss_legendre_ramp_step",
                point: format!("(x, y) = ({}, {})", s.x, s.y),
                residual: change,
                tolerance: 1e-15,
            });
        }
        let (f1, j1) = field(stages[0][0], stages[0][1]);
        let (f2, j2) = field(stages[1][0], stages[1][1]);
        s.x = z[0] + 0.5 * tau * (f1[0] + f2[0]);
        s.y = z[1] + 0.5 * tau * (f1[1] + f2[1]);

        // d(stages)/dz solves (I - τ A⊗J) X = [I; I]
        let mut m = Matrix4::<f64>::identity();
        let blocks = [j1, j2];
        for i in 0..2 {
            for jdx in 0..2 {
                let blk = blocks[jdx] * (tau * a[i][jdx]);
                for r in 0..2 {
                    for c in 0..2 {
                        m[(2 * i + r, 2 * jdx + c)] -= blk[(r, c)];
                    }
                }
            }
        }
        let rhs = Matrix4x2::new(1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0);
        let x = m.lu().solve(&rhs).ok_or(Error::Numerical {
            operation: "gauss_legendre_ramp_step",
            point: format!("(x, y) = ({}, {})", s.x, s.y),
            residual: f64::NAN,
            tolerance: 0.0,
        })?;
        let d1 = x.fixed_view::<2, 2>(0, 0).into_owned();
        let d2 = x.fixed_view::<2, 2>(2, 0).into_owned();
        let step = Matrix2::identity() + (j1 * d1 + j2 * d2) * (0.5 * tau);
        let acc = step * Matrix2::new(s.j[0], s.j[1], s.j[2], s.j[3]);
        s.j = [acc[(0, 0)], acc[(0, 1)], acc[(1, 0)], acc[(1, 1)]];
        Ok(())
    }
}
