//! Geodesics of the Finsler metric in graph form `γ(t) = (t, θ(t))`, the
//! section `V₀ = {(0, h, v) : v1 > 0}` of the unit tangent bundle, its
//! first-return map and the conjugacy `g(0, h, v) = (h, v2/v1)` to the
//! twist map.
//!
//! A curve `(t, θ(t))` is a reparametrized geodesic exactly when `θ` solves
//! the Euler–Lagrange equation of `L`. In the band `L = L̂` is the Legendre
//! dual of the Hamiltonian, so all partials of `L` come from partials of `H`
//! at the dual momentum; outside the band `L` depends on `θ'` alone and
//! geodesics are straight lines.

use std::cell::Cell;
use std::io::{self, Write};

use nalgebra::{Matrix2, Vector6};
use ode_solvers::{Dopri5, OutputType, System};
use serde::{Deserialize, Serialize};

use crate::cylinder_maps::{reduce_angle, CylinderMap, CylinderPoint, MapStep};
use crate::error::{Error, Result};
use crate::finsler::FinslerModel;
use crate::suspension::HamiltonianJet;

/// Tolerance on `|F - 1|` for points of the unit tangent bundle.
pub const UNIT_SPEED_TOL: f64 = 1e-10;

/// Step budget per integration interval.
const MAX_STEPS: u32 = 200_000;

/// Order of the Dormand–Prince 5(4) method.
pub const METHOD_ORDER: u32 = 5;

/// Step-size control of the graph integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphIntegrator {
    pub rtol: f64,
    pub atol: f64,
    /// Evenly spaced samples recorded by [`integrate_graph`], including both ends.
    pub samples: usize,
}

impl Default for GraphIntegrator {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            samples: 101,
        }
    }
}

impl GraphIntegrator {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.rtol <= 1e-6 && self.atol <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "graph integrator tolerances must lie in (0, 1e-6], got rtol = {}, atol = {}",
                self.rtol, self.atol
            )));
        }
        if self.samples < 2 {
            return Err(Error::InvalidParameter("a trajectory needs at least 2 samples".into()));
        }
        Ok(())
    }
}

/// A point `(0, h, v)` of `V₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionState {
    pub h: f64,
    pub v1: f64,
    pub v2: f64,
}

impl SectionState {
    /// Checks `h ∈ [0, 1)`, `v1 > 0` and `|F(0, h, v) - 1| <= 1e-10`.
    pub fn validate(&self, model: &FinslerModel) -> Result<()> {
        if !(0.0..1.0).contains(&self.h) {
            return Err(Error::Domain {
                operation: "section_state",
                detail: format!("h = {} is not in [0, 1)", self.h),
            });
        }
        if !(self.v1 > 0.0) {
            return Err(Error::Domain {
                operation: "section_state",
                detail: format!("v1 = {} must be positive", self.v1),
            });
        }
        let speed = model.finsler_eval(0.0, self.h, self.v1, self.v2)?;
        if (speed - 1.0).abs() > UNIT_SPEED_TOL {
            return Err(Error::Domain {
                operation: "section_state",
                detail: format!("F = {speed} is not 1"),
            });
        }
        Ok(())
    }

    pub fn slope(&self) -> f64 {
        self.v2 / self.v1
    }
}

/// Samples `(t, θ, θ')` of an Euler–Lagrange solution on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTrajectory {
    pub samples: Vec<[f64; 3]>,
    pub integrator: GraphIntegrator,
    pub method_order: u32,
    /// Accepted steps summed over all sample intervals.
    pub accepted_steps: u32,
}

impl GraphTrajectory {
    pub fn last(&self) -> [f64; 3] {
        *self.samples.last().expect("trajectories are never empty")
    }

    /// Writes `# key: value` metadata lines, the column header and one row
    /// per sample.
    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &[(&str, String)]) -> io::Result<()> {
        for (key, value) in metadata {
            writeln!(out, "# {key}: {value}")?;
        }
        writeln!(out, "# method: dopri5 (order {})", self.method_order)?;
        writeln!(out, "# rtol: {:e}", self.integrator.rtol)?;
        writeln!(out, "# atol: {:e}", self.integrator.atol)?;
        writeln!(out, "t,theta,thetadot")?;
        for [t, theta, thetadot] in &self.samples {
            writeln!(out, "{t},{theta},{thetadot}")?;
        }
        Ok(())
    }
}

/// `θ''` from the Euler–Lagrange equation of `L` at `(t, θ, θ')`.
pub fn el_rhs(model: &FinslerModel, t: f64, theta: f64, thetadot: f64) -> Result<f64> {
    if thetadot.abs() > model.band() {
        return Ok(0.0);
    }
    let (h, _) = dual_jet(model, t, theta, thetadot)?;
    Ok(el_from_jet(&h, thetadot))
}

fn dual_jet(model: &FinslerModel, t: f64, theta: f64, v: f64) -> Result<(HamiltonianJet, f64)> {
    let s = &model.suspension;
    let p = s.legendre_transform(t, theta, v)?.momentum;
    Ok((s.jet(t, theta, p), p))
}

/// `(L_x - L_tv - L_xv·v)/L_vv = H_pt + H_px·v - H_pp·H_x` at the dual point.
fn el_from_jet(h: &HamiltonianJet, v: f64) -> f64 {
    h.partial(1, 0, 1) + h.partial(0, 1, 1) * v - h.partial(0, 0, 2) * h.partial(0, 1, 0)
}

/// `(θ'', ∂θ''/∂θ, ∂θ''/∂θ')`.
fn el_with_gradient(model: &FinslerModel, t: f64, theta: f64, v: f64) -> Result<[f64; 3]> {
    if v.abs() > model.band() {
        return Ok([0.0; 3]);
    }
    let (h, _) = dual_jet(model, t, theta, v)?;
    let hpp = h.partial(0, 0, 2);
    let hx = h.partial(0, 1, 0);
    // derivatives of H_pt + H_px·v - H_pp·H_x at fixed v
    let fx = h.partial(1, 1, 1) + h.partial(0, 2, 1) * v - h.partial(0, 1, 2) * hx - hpp * h.partial(0, 2, 0);
    let fp = h.partial(1, 0, 2) + h.partial(0, 1, 2) * v - h.partial(0, 0, 3) * hx - hpp * h.partial(0, 1, 1);
    // the dual momentum moves with θ and v through H_p(t, θ, p) = v
    let p_theta = -h.partial(0, 1, 1) / hpp;
    let p_v = 1.0 / hpp;
    Ok([el_from_jet(&h, v), fx + fp * p_theta, h.partial(0, 1, 1) + fp * p_v])
}

/// State `(θ, θ', J₁₁, J₁₂, J₂₁, J₂₂)`, `J = ∂(θ, θ')/∂(θ₀, θ'₀)`.
type State = Vector6<f64>;

struct GraphSystem<'a> {
    model: &'a FinslerModel,
    tangent: bool,
    failure: &'a Cell<Option<Error>>,
}

impl GraphSystem<'_> {
    fn fail(&self, err: Error, dy: &mut State) {
        let first = self.failure.take().unwrap_or(err);
        self.failure.set(Some(first));
        dy.fill(f64::NAN);
    }
}

impl System<f64, State> for GraphSystem<'_> {
    fn system(&self, t: f64, y: &State, dy: &mut State) {
        dy[0] = y[1];
        if self.tangent {
            match el_with_gradient(self.model, t, y[0], y[1]) {
                Ok([acc, a_theta, a_v]) => {
                    dy[1] = acc;
                    // J' = [[0, 1], [a_θ, a_v]] J
                    dy[2] = y[4];
                    dy[3] = y[5];
                    dy[4] = a_theta * y[2] + a_v * y[4];
                    dy[5] = a_theta * y[3] + a_v * y[5];
                }
                Err(e) => self.fail(e, dy),
            }
        } else {
            match el_rhs(self.model, t, y[0], y[1]) {
                Ok(acc) => {
                    dy[1] = acc;
                    dy[2] = 0.0;
                    dy[3] = 0.0;
                    dy[4] = 0.0;
                    dy[5] = 0.0;
                }
                Err(e) => self.fail(e, dy),
            }
        }
    }
}

/// Integrates one interval and returns the final state and accepted steps.
fn integrate_span(
    model: &FinslerModel,
    config: &GraphIntegrator,
    tangent: bool,
    (t0, t1): (f64, f64),
    y0: State,
) -> Result<(State, u32)> {
    let failure = Cell::new(None);
    let system = GraphSystem {
        model,
        tangent,
        failure: &failure,
    };
    // the bump in time has large high derivatives near its ends, which the
    // stiffness heuristic misreads; the problem is not stiff
    let mut solver = Dopri5::from_param(
        system,
        t0,
        t1,
        t1 - t0,
        y0,
        config.rtol,
        config.atol,
        0.9,
        0.04,
        0.2,
        10.0,
        t1 - t0,
        0.0,
        MAX_STEPS,
        u32::MAX,
        OutputType::Sparse,
    );
    let outcome = solver.integrate();
    if let Some(err) = failure.take() {
        return Err(err);
    }
    let stats = outcome.map_err(|e| Error::Numerical {
        operation: "integrate_graph",
        point: format!("(t, θ, θ') = ({t0}, {}, {}): {e}", y0[0], y0[1]),
        residual: f64::NAN,
        tolerance: config.rtol,
    })?;
    let last = *solver.y_out().last().expect("the solver records the initial state");
    if !last.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical {
            operation: "integrate_graph",
            point: format!("(t, θ, θ') = ({t0}, {}, {})", y0[0], y0[1]),
            residual: f64::INFINITY,
            tolerance: config.rtol,
        });
    }
    Ok((last, stats.accepted_steps))
}

fn initial_state(h: f64, slope: f64) -> State {
    Vector6::new(h, slope, 1.0, 0.0, 0.0, 1.0)
}

/// Solves the Euler–Lagrange equation on `[0, 1]` with `θ(0) = h`,
/// `θ'(0) = slope0`, recording `config.samples` evenly spaced samples.
pub fn integrate_graph(model: &FinslerModel, h: f64, slope0: f64, config: &GraphIntegrator) -> Result<GraphTrajectory> {
    config.validate()?;
    let n = config.samples - 1;
    let mut state = initial_state(h, slope0);
    let mut samples = Vec::with_capacity(config.samples);
    samples.push([0.0, h, slope0]);
    let mut accepted_steps = 0;
    for k in 0..n {
        let span = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
        let (next, steps) = integrate_span(model, config, false, span, state)?;
        state = next;
        accepted_steps += steps;
        samples.push([span.1, state[0], state[1]]);
    }
    Ok(GraphTrajectory {
        samples,
        integrator: *config,
        method_order: METHOD_ORDER,
        accepted_steps,
    })
}

/// `(θ(1), θ'(1))` for `θ(0) = h`, `θ'(0) = slope0`.
pub fn graph_endpoint(model: &FinslerModel, h: f64, slope0: f64, config: &GraphIntegrator) -> Result<(f64, f64)> {
    let (end, _) = integrate_span(model, config, false, (0.0, 1.0), initial_state(h, slope0))?;
    Ok((end[0], end[1]))
}

/// `(0, x, (1, y)/F(0, x, 1, y))`.
pub fn conjugacy_g_inverse(model: &FinslerModel, p: CylinderPoint) -> Result<SectionState> {
    let speed = model.finsler_eval(0.0, p.x(), 1.0, p.y())?;
    Ok(SectionState {
        h: p.x(),
        v1: 1.0 / speed,
        v2: p.y() / speed,
    })
}

/// `(h, v2/v1)`.
pub fn conjugacy_g(s: &SectionState) -> Result<CylinderPoint> {
    if !(s.v1 > 0.0) {
        return Err(Error::Domain {
            operation: "conjugacy_g",
            detail: format!("v1 = {} must be positive", s.v1),
        });
    }
    Ok(CylinderPoint::new(s.h, s.slope()))
}

/// First return to `V₀` after time 1, renormalized to unit speed.
pub fn return_map(model: &FinslerModel, s: &SectionState, config: &GraphIntegrator) -> Result<SectionState> {
    s.validate(model)?;
    let (theta, slope) = graph_endpoint(model, s.h, s.slope(), config)?;
    conjugacy_g_inverse(model, CylinderPoint::new(theta, slope))
}

/// Derivative of `g∘R∘g⁻¹` at `g(s)`, from the variational equation.
pub fn return_map_jacobian(model: &FinslerModel, s: &SectionState, config: &GraphIntegrator) -> Result<Matrix2<f64>> {
    s.validate(model)?;
    let (end, _) = integrate_span(model, config, true, (0.0, 1.0), initial_state(s.h, s.slope()))?;
    Ok(Matrix2::new(end[2], end[3], end[4], end[5]))
}

/// `g∘R∘g⁻¹` acting on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatedReturnMap {
    model: FinslerModel,
    config: GraphIntegrator,
}

impl ConjugatedReturnMap {
    pub fn new(model: FinslerModel, config: GraphIntegrator) -> Result<Self> {
        config.validate()?;
        Ok(Self { model, config })
    }

    pub fn model(&self) -> &FinslerModel {
        &self.model
    }

    pub fn config(&self) -> &GraphIntegrator {
        &self.config
    }
}

impl CylinderMap for ConjugatedReturnMap {
    fn step(&self, p: CylinderPoint) -> Result<MapStep> {
        let (end, _) = integrate_span(&self.model, &self.config, true, (0.0, 1.0), initial_state(p.x(), p.y()))?;
        Ok(MapStep {
            image: CylinderPoint::new(reduce_angle(end[0]), end[1]),
            displacement: end[0] - p.x(),
            jacobian: Matrix2::new(end[2], end[3], end[4], end[5]),
        })
    }

    fn apply(&self, p: CylinderPoint) -> Result<CylinderPoint> {
        let (theta, slope) = graph_endpoint(&self.model, p.x(), p.y(), &self.config)?;
        Ok(CylinderPoint::new(theta, slope))
    }

    fn is_shear_region(&self, p: CylinderPoint) -> bool {
        self.model.suspension.epsilon == 0.0 || p.y().abs() >= self.model.suspension.band_k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder_maps::{shear_jacobian, TwistMapSpec};
    use crate::suspension::SuspensionSpec;

    fn model(eps: f64) -> FinslerModel {
        FinslerModel::new(SuspensionSpec::new(eps, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn el_rhs_vanishes_where_l_depends_on_slope_only() {
        let flat = model(0.0);
        assert_eq!(el_rhs(&flat, 0.3, 0.1, 0.7).unwrap(), 0.0);
        let m = model(0.3);
        let beyond = m.band() + 2.5;
        assert_eq!(el_rhs(&m, 0.5, 0.25, beyond).unwrap(), 0.0);
        assert_eq!(el_rhs(&m, 0.5, 0.25, -beyond).unwrap(), 0.0);
        assert!(el_rhs(&m, 0.5, 0.1, 0.4).unwrap() != 0.0);
    }

    #[test]
    fn el_gradient_matches_differences() {
        let m = model(0.4);
        let h = 1e-6;
        for &(t, x, v) in &[(0.5, 0.1, 0.4), (0.3, 0.7, -0.9), (0.6, 0.35, 1.3)] {
            let [_, gx, gv] = el_with_gradient(&m, t, x, v).unwrap();
            let fx = (el_rhs(&m, t, x + h, v).unwrap() - el_rhs(&m, t, x - h, v).unwrap()) / (2.0 * h);
            let fv = (el_rhs(&m, t, x, v + h).unwrap() - el_rhs(&m, t, x, v - h).unwrap()) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-7, "∂θ at {t},{x},{v}: {gx} vs {fx}");
            assert!((gv - fv).abs() < 1e-7, "∂θ' at {t},{x},{v}: {gv} vs {fv}");
        }
    }

    #[test]
    fn straight_lines_without_perturbation() {
        let cfg = GraphIntegrator::default();
        let traj = integrate_graph(&model(0.0), 0.2, 0.5, &cfg).unwrap();
        assert_eq!(traj.samples.len(), 101);
        for [t, theta, thetadot] in &traj.samples {
            assert!((theta - (0.2 + 0.5 * t)).abs() < 1e-13);
            assert!((thetadot - 0.5).abs() < 1e-13);
        }
        let m = model(0.3);
        let steep = m.band() + 3.0;
        let [_, theta, _] = integrate_graph(&m, 0.1, steep, &cfg).unwrap().last();
        assert!((theta - (0.1 + steep)).abs() < 1e-12);
    }

    #[test]
    fn section_round_trip() {
        let m = model(0.3);
        let p = CylinderPoint::new(0.2, 0.5);
        let s = conjugacy_g_inverse(&m, p).unwrap();
        s.validate(&m).unwrap();
        let back = conjugacy_g(&s).unwrap();
        assert!((back.x() - 0.2).abs() < 1e-15 && (back.y() - 0.5).abs() < 1e-12);
        let bad = SectionState { v1: -0.1, ..s };
        assert!(conjugacy_g(&bad).is_err());
        assert!(bad.validate(&m).is_err());
        let steep = CylinderPoint::new(0.0, m.band() + 3.0);
        let s = conjugacy_g_inverse(&m, steep).unwrap();
        let norm = (m.a + m.b * steep.y() * steep.y()).sqrt();
        assert!((s.v1 - 1.0 / norm).abs() < 1e-15);
    }

    #[test]
    fn flat_return_map_is_shear() {
        let m = model(0.0);
        let cfg = GraphIntegrator::default();
        let s = conjugacy_g_inverse(&m, CylinderPoint::new(0.2, 0.5)).unwrap();
        let r = return_map(&m, &s, &cfg).unwrap();
        r.validate(&m).unwrap();
        assert!((r.h - 0.7).abs() < 1e-13);
        assert!((r.slope() - 0.5).abs() < 1e-13);
        let j = return_map_jacobian(&m, &s, &cfg).unwrap();
        assert!((j - shear_jacobian()).amax() < 1e-12);
    }

    #[test]
    fn conjugated_return_map_matches_twist() {
        let m = model(0.3);
        let twist = TwistMapSpec::new(0.3, 2.0).unwrap().build().unwrap();
        let map = ConjugatedReturnMap::new(m, GraphIntegrator::default()).unwrap();
        for &(x, y) in &[(0.0, 0.5), (0.3, -0.8), (0.77, 1.4)] {
            let p = CylinderPoint::new(x, y);
            let a = map.step(p).unwrap();
            let b = twist.step(p).unwrap();
            assert!((a.displacement - b.displacement).abs() < 1e-8, "x at {p:?}");
            assert!((a.image.y() - b.image.y()).abs() < 1e-8, "y at {p:?}");
            assert!((a.jacobian - b.jacobian).amax() < 1e-6, "jacobian at {p:?}");
            assert!((a.jacobian.determinant() - 1.0).abs() < 1e-8);
        }
    }
}
