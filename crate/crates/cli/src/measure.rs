//! Measurements shared by the experiments and the acceptance suite.

use anyhow::{ensure, Result};
use finsler_twist::geodesics::integrate_graph;
use finsler_twist::{
    CylinderMap, CylinderPoint, FinslerModel, GraphIntegrator, GridSpec, IntegratorConfig, SuspensionSpec,
};
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Step of the fourth-order central differences for the fundamental tensor.
pub const TENSOR_FD_STEP: f64 = 2e-4;

/// `|v1|` of the near-vertical samples straddling the two formulas for `F`.
pub const NEAR_VERTICAL_V1: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cell centres of an `n × n` grid on `[0, 1] × [y_min, y_max]`.
pub fn grid_points(n: usize, y_min: f64, y_max: f64) -> Result<Vec<CylinderPoint>> {
    let grid = GridSpec::new((0.0, 1.0), (y_min, y_max), n, n)?;
    Ok(grid.centers().map(|(x, y)| CylinderPoint::new(x, y)).collect())
}

/// Largest differences between two maps over `points`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MapDifference {
    /// Of the `x`-lift displacement and of `y`.
    pub position: f64,
    pub jacobian: f64,
}

pub fn map_difference<A, B>(a: &A, b: &B, points: &[CylinderPoint]) -> Result<MapDifference>
where
    A: CylinderMap + ?Sized,
    B: CylinderMap + ?Sized,
{
    let diffs = points
        .par_iter()
        .map(|&p| {
            let (sa, sb) = (a.step(p)?, b.step(p)?);
            let position = (sa.displacement - sb.displacement)
                .abs()
                .max((sa.image.y() - sb.image.y()).abs());
            Ok(MapDifference {
                position,
                jacobian: (sa.jacobian - sb.jacobian).amax(),
            })
        })
        .collect::<finsler_twist::Result<Vec<_>>>()?;
    Ok(diffs.iter().fold(MapDifference::default(), |acc, d| MapDifference {
        position: acc.position.max(d.position),
        jacobian: acc.jacobian.max(d.jacobian),
    }))
}

/// `max |det Df - 1|` over `points`.
pub fn determinant_defect<M: CylinderMap + ?Sized>(map: &M, points: &[CylinderPoint]) -> Result<f64> {
    let dets = points
        .par_iter()
        .map(|&p| Ok((map.step(p)?.jacobian.determinant() - 1.0).abs()))
        .collect::<finsler_twist::Result<Vec<_>>>()?;
    Ok(dets.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorStats {
    pub samples: usize,
    pub near_vertical: usize,
    pub min_eigenvalue: f64,
    /// `max |g - Hess(½F²)|` with the Hessian by central differences.
    pub max_fd_error: f64,
}

fn half_energy(model: &FinslerModel, t: f64, x: f64, v1: f64, v2: f64) -> finsler_twist::Result<f64> {
    Ok(0.5 * model.finsler_eval(t, x, v1, v2)?.powi(2))
}

/// Five-point weights of `h·f'(0)` on the offsets `-2..=2`, over 12.
const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Five-point weights of `h²·f''(0)`, over 12.
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

/// Hessian of `½F²` in `v` by fourth-order central differences.
fn fd_hessian(model: &FinslerModel, t: f64, x: f64, v1: f64, v2: f64) -> finsler_twist::Result<Matrix2<f64>> {
    let h = TENSOR_FD_STEP;
    let mut values = [[0.0; 5]; 5];
    for (i, row) in values.iter_mut().enumerate() {
        for (j, value) in row.iter_mut().enumerate() {
            let (a, b) = (i as f64 - 2.0, j as f64 - 2.0);
            *value = half_energy(model, t, x, v1 + a * h, v2 + b * h)?;
        }
    }
    let scale = 12.0 * h * h;
    let g11 = (0..5).map(|i| D2[i] * values[i][2]).sum::<f64>() / scale;
    let g22 = (0..5).map(|j| D2[j] * values[2][j]).sum::<f64>() / scale;
    let g12 = (0..5)
        .flat_map(|i| (0..5).map(move |j| (i, j)))
        .map(|(i, j)| D1[i] * D1[j] * values[i][j])
        .sum::<f64>()
        / (12.0 * scale);
    Ok(Matrix2::new(g11, g12, g12, g22))
}

/// Unit directions with random base points; every tenth sample has
/// `v1 = ±1e-3`.
pub fn fundamental_tensor_check(model: &FinslerModel, samples: usize, seed: u64) -> Result<TensorStats> {
    let mut rng = rng(seed);
    let points: Vec<[f64; 4]> = (0..samples)
        .map(|k| {
            let (t, x) = (rng.gen::<f64>(), rng.gen::<f64>());
            if k % 10 == 0 {
                let v1 = if k % 20 == 0 { NEAR_VERTICAL_V1 } else { -NEAR_VERTICAL_V1 };
                let v2 = (1.0 - v1 * v1).sqrt() * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                [t, x, v1, v2]
            } else {
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                [t, x, angle.cos(), angle.sin()]
            }
        })
        .collect();
    let per_point = points
        .par_iter()
        .map(|&[t, x, v1, v2]| {
            let g = model.fundamental_tensor(t, x, v1, v2)?;
            let eig = g.symmetric_eigenvalues().min();
            let fd = fd_hessian(model, t, x, v1, v2)?;
            Ok((eig, (g - fd).amax()))
        })
        .collect::<finsler_twist::Result<Vec<_>>>()?;
    Ok(TensorStats {
        samples,
        near_vertical: points.iter().filter(|p| p[2].abs() == NEAR_VERTICAL_V1).count(),
        min_eigenvalue: per_point.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        max_fd_error: per_point.iter().map(|p| p.1).fold(0.0, f64::max),
    })
}

/// `max |F(λv) - λF(v)| / (λF(v))` over random unit `v` and the given factors.
pub fn homogeneity_error(model: &FinslerModel, samples: usize, factors: &[f64], seed: u64) -> Result<f64> {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (t, x) = (rng.gen::<f64>(), rng.gen::<f64>());
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let (v1, v2) = (angle.cos(), angle.sin());
        let f = model.finsler_eval(t, x, v1, v2)?;
        for &lambda in factors {
            let scaled = model.finsler_eval(t, x, lambda * v1, lambda * v2)?;
            worst = worst.max((scaled - lambda * f).abs() / (lambda * f));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreStats {
    /// `max |p - p'|` for `p → v = ∂H/∂y(p) → p'`.
    pub round_trip: f64,
    /// `max |L̂(v) + H(p) - p·v|`.
    pub duality: f64,
}

pub fn legendre_check(spec: &SuspensionSpec, samples: usize, seed: u64) -> Result<LegendreStats> {
    let mut rng = rng(seed);
    let reach = spec.band_k + 0.5;
    let mut stats = LegendreStats {
        round_trip: 0.0,
        duality: 0.0,
    };
    for _ in 0..samples {
        let (t, x) = (rng.gen::<f64>(), rng.gen::<f64>());
        let p = rng.gen_range(-reach..reach);
        let v = spec.jet(t, x, p).partial(0, 0, 1);
        let back = spec.legendre_transform(t, x, v)?;
        let l = spec.lagrangian_hat_eval(t, x, v)?;
        stats.round_trip = stats.round_trip.max((back.momentum - p).abs());
        stats.duality = stats.duality.max((l + spec.hamiltonian_eval(t, x, p) - p * v).abs());
    }
    Ok(stats)
}

/// Largest difference between graph geodesics `(θ, θ')` and the Hamiltonian
/// flow `(x, ∂H/∂y)` at the graph samples, for random starts with
/// `|y| <= K + 1/2`.
pub fn el_hamiltonian_defect(
    model: &FinslerModel,
    graph: &GraphIntegrator,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let spec = model.suspension;
    let flow = spec.time_one_map(IntegratorConfig {
        richardson: false,
        ..IntegratorConfig::default()
    })?;
    let steps = flow.config().steps_per_period;
    let intervals = graph.samples - 1;
    ensure!(steps % intervals == 0, "graph samples must divide the Hamiltonian steps");
    let stride = steps / intervals;
    let mut rng = rng(seed);
    let reach = spec.band_k + 0.5;
    let starts: Vec<(f64, f64)> = (0..samples)
        .map(|_| (rng.gen::<f64>(), rng.gen_range(-reach..reach)))
        .collect();
    let defects = starts
        .par_iter()
        .map(|&(x0, y0)| -> Result<f64> {
            // at t = 0 the momentum equals the slope
            let traj = integrate_graph(model, x0, y0, graph)?;
            let ham = flow.trajectory(x0, y0)?;
            let mut worst: f64 = 0.0;
            for (k, &[t, theta, thetadot]) in traj.samples.iter().enumerate() {
                let (th, x, p) = ham[k * stride];
                ensure!((th - t).abs() < 1e-12, "sample times disagree: {th} vs {t}");
                let velocity = spec.jet(t, x, p).partial(0, 0, 1);
                worst = worst.max((theta - x).abs()).max((thetadot - velocity).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}
