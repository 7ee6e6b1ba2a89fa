//! Reference values checked against independent computations done here,
//! then frozen.

use std::f64::consts::PI;

use finsler_twist::chaos_analysis::ftle;
use finsler_twist::geodesics::{el_rhs, integrate_graph};
use finsler_twist::*;
use ode_solvers::{Dopri5, OutputType, System, Vector2};

/// Unit-mass bump on `[0, 1]`, normalized with composite Simpson.
struct Bump {
    norm: f64,
}

impl Bump {
    fn raw(t: f64) -> f64 {
        let s = 2.0 * t - 1.0;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    fn new() -> Self {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut sum = Self::raw(0.0) + Self::raw(1.0);
        for k in 1..n {
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * Self::raw(k as f64 * h);
        }
        Self { norm: sum * h / 3.0 }
    }

    fn eval(&self, t: f64) -> f64 {
        Self::raw(t) / self.norm
    }
}

/// Hamilton's equations on the plateau, where the cutoff is 1:
/// `x' = p`, `p' = ε b(t) sin(2πx) / (2π)`.
struct PlateauFlow {
    epsilon: f64,
    bump: Bump,
}

impl System<f64, Vector2<f64>> for PlateauFlow {
    fn system(&self, t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = y[1];
        dy[1] = self.epsilon * self.bump.eval(t) * (2.0 * PI * y[0]).sin() / (2.0 * PI);
    }
}

fn plateau_flow(epsilon: f64, x: f64, p: f64, t_end: f64) -> (f64, f64) {
    let flow = PlateauFlow {
        epsilon,
        bump: Bump::new(),
    };
    let mut solver = Dopri5::new(flow, 0.0, t_end, t_end, Vector2::new(x, p), 1e-13, 1e-13);
    solver.set_output(OutputType::Sparse);
    solver.integrate().unwrap();
    let end = solver.y_out().last().unwrap();
    (end[0], end[1])
}

const TWIST_FIXTURE: (f64, f64) = (5.19382931168392958e-1, 5.38399850265046775e-1);

#[test]
fn twist_fixture_matches_reference_flow() {
    let (x, y) = plateau_flow(0.3, 0.0, 0.5, 1.0);
    assert!((x - TWIST_FIXTURE.0).abs() < 1e-10, "{x}");
    assert!((y - TWIST_FIXTURE.1).abs() < 1e-10, "{y}");
    let map = TwistMapSpec::new(0.3, 2.0).unwrap().build().unwrap();
    let s = map.step(CylinderPoint::new(0.0, 0.5)).unwrap();
    assert!((s.displacement - TWIST_FIXTURE.0).abs() < 1e-10);
    assert!((s.image.y() - TWIST_FIXTURE.1).abs() < 1e-10);
}

#[test]
fn graph_fixture_matches_reference_flow() {
    let model = FinslerModel::new(SuspensionSpec::new(0.3, 2.0).unwrap()).unwrap();
    let traj = integrate_graph(&model, 0.0, 0.5, &GraphIntegrator::default()).unwrap();
    let [t, theta, thetadot] = traj.last();
    assert_eq!(t, 1.0);
    assert!((theta - TWIST_FIXTURE.0).abs() < 1e-9);
    assert!((thetadot - TWIST_FIXTURE.1).abs() < 1e-9);
    // intermediate samples: on the plateau θ' equals the momentum
    for &[t, theta, thetadot] in traj.samples.iter().step_by(25).skip(1) {
        let (x, p) = plateau_flow(0.3, 0.0, 0.5, t);
        assert!((theta - x).abs() < 1e-9 && (thetadot - p).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn el_fixture_matches_hamiltonian_acceleration() {
    let model = FinslerModel::new(SuspensionSpec::new(0.3, 2.0).unwrap()).unwrap();
    let acc = el_rhs(&model, 0.5, 0.25, 0.4).unwrap();
    assert!((acc - 7.91224959342510942e-2).abs() < 1e-14);
    // d/dt ∂H/∂y along the flow through (t, x, p) = (0.5, 0.25, 0.4): on the
    // plateau ∂H/∂y = p, so this is ṗ = ε b(1/2) / (2π)
    let bump = Bump::new();
    let reference = 0.3 * bump.eval(0.5) / (2.0 * PI);
    assert!((acc - reference).abs() < 1e-8, "{acc} vs {reference}");
}

/// Largest exponent from two orbits started `d0` apart, the separation
/// renormalized after every iterate. The reference orbit is advanced exactly
/// as `ftle` advances it, so both measure the same finite orbit.
fn divergence_exponent<M: CylinderMap>(map: &M, p: CylinderPoint, n: usize) -> f64 {
    let d0 = 1e-9;
    let mut a = p;
    let mut offset = (0.6 * d0, 0.8 * d0);
    let mut sum = 0.0;
    for _ in 0..n {
        let fa = map.step(a).unwrap();
        let fb = map.step(CylinderPoint::new(a.x() + offset.0, a.y() + offset.1)).unwrap();
        // displacements commute with integer shifts of x
        let dx = offset.0 + fb.displacement - fa.displacement;
        let dy = fb.image.y() - fa.image.y();
        let d = dx.hypot(dy);
        sum += (d / d0).ln();
        a = fa.image;
        offset = (dx * d0 / d, dy * d0 / d);
    }
    sum / n as f64
}

#[test]
fn ftle_agrees_with_orbit_divergence_in_the_chaotic_sea() {
    let map = TwistMapSpec::new(1.2, 2.0)
        .unwrap()
        .with_integrator(IntegratorConfig::sweep(25))
        .build()
        .unwrap();
    let n = 1000;
    let mut checked = 0;
    let mut k = 0;
    while checked < 20 {
        // a deterministic scatter of starting points
        let x = (0.1 + 0.6180339887498949 * k as f64).fract();
        let y = -0.45 + 0.9 * (0.3 + 0.7548776662466927 * k as f64).fract();
        k += 1;
        let p = CylinderPoint::new(x, y);
        let jac = ftle(&map, p, n).unwrap();
        if jac <= 0.1 {
            continue;
        }
        let orbit = divergence_exponent(&map, p, n);
        assert!((jac - orbit).abs() <= 0.1 * jac, "({x}, {y}): {jac} vs {orbit}");
        checked += 1;
    }
    assert!(k < 200, "too few chaotic samples");
}
