//! Maps of the cylinder `Z = S¹ × ℝ`: the shear `(x, y) ↦ (x + y, y)` and
//! the perturbed twist map `f̂`, defined as the time-1 map of the
//! suspension Hamiltonian, plus twist, flux and rotation diagnostics.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::suspension::{IntegratorConfig, MapOutput, SuspensionSpec, TimeOneMap};

/// Default half-width of the perturbation band.
pub const DEFAULT_BAND_K: f64 = 2.0;

/// A point `(x mod 1, y)` of the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderPoint {
    x: f64,
    y: f64,
}

/// Reduces an angle into `[0, 1)`.
#[inline]
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl CylinderPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: reduce_angle(x),
            y,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Componentwise distance, measuring `x` along the circle.
    pub fn distance(&self, other: &CylinderPoint) -> f64 {
        let dx = (self.x - other.x).abs();
        dx.min(1.0 - dx).max((self.y - other.y).abs())
    }
}

/// The shear `f₁(x, y) = (x + y mod 1, y)`.
pub fn shear_apply(p: CylinderPoint) -> CylinderPoint {
    CylinderPoint::new(p.x + p.y, p.y)
}

pub fn shear_jacobian() -> Matrix2<f64> {
    Matrix2::new(1.0, 1.0, 0.0, 1.0)
}

/// An area-preserving map of the cylinder with its derivative.
///
/// `step` returns the image, the unreduced displacement of `x` (for
/// rotation numbers) and the Jacobian.
pub trait CylinderMap: Sync {
    fn step(&self, p: CylinderPoint) -> Result<MapStep>;

    /// Whether every forward iterate of `p` is an exact shear step. Orbit
    /// sweeps use this to finish the orbit in closed form.
    fn is_shear_region(&self, _p: CylinderPoint) -> bool {
        false
    }

    fn apply(&self, p: CylinderPoint) -> Result<CylinderPoint> {
        Ok(self.step(p)?.image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapStep {
    pub image: CylinderPoint,
    /// `x'_lift - x`
    pub displacement: f64,
    pub jacobian: Matrix2<f64>,
}

impl MapStep {
    fn from_output(p: CylinderPoint, out: MapOutput) -> Self {
        Self {
            image: CylinderPoint::new(out.x_lift, out.y),
            displacement: out.x_lift - p.x,
            jacobian: out.jacobian,
        }
    }
}

/// The unperturbed shear as a [`CylinderMap`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Shear;

impl CylinderMap for Shear {
    fn step(&self, p: CylinderPoint) -> Result<MapStep> {
        Ok(MapStep {
            image: shear_apply(p),
            displacement: p.y,
            jacobian: shear_jacobian(),
        })
    }

    fn is_shear_region(&self, _p: CylinderPoint) -> bool {
        true
    }
}

/// Parameters of the perturbed twist map `f̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistMapSpec {
    pub suspension: SuspensionSpec,
    pub integrator: IntegratorConfig,
}

impl TwistMapSpec {
    pub fn new(epsilon: f64, band_k: f64) -> Result<Self> {
        Ok(Self {
            suspension: SuspensionSpec::new(epsilon, band_k)?,
            integrator: IntegratorConfig::default(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.suspension.epsilon
    }

    pub fn band_k(&self) -> f64 {
        self.suspension.band_k
    }

    pub fn integrator_tol(&self) -> f64 {
        self.integrator.tolerance
    }

    pub fn with_integrator(self, integrator: IntegratorConfig) -> Self {
        Self { integrator, ..self }
    }

    pub fn build(&self) -> Result<TwistMap> {
        TwistMap::new(*self)
    }
}

/// The perturbed twist map, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct TwistMap {
    spec: TwistMapSpec,
    flow: TimeOneMap,
}

impl TwistMap {
    pub fn new(spec: TwistMapSpec) -> Result<Self> {
        let flow = spec.suspension.time_one_map(spec.integrator)?;
        Ok(Self { spec, flow })
    }

    pub fn spec(&self) -> &TwistMapSpec {
        &self.spec
    }

    pub fn time_one(&self) -> &TimeOneMap {
        &self.flow
    }
}

impl CylinderMap for TwistMap {
    fn step(&self, p: CylinderPoint) -> Result<MapStep> {
        Ok(MapStep::from_output(p, self.flow.advance(p.x, p.y)?))
    }

    fn is_shear_region(&self, p: CylinderPoint) -> bool {
        self.flow.is_free(p.y)
    }
}

/// `f̂(p)`: the time-1 map of the suspension Hamiltonian.
pub fn twist_apply(map: &TwistMap, p: CylinderPoint) -> Result<CylinderPoint> {
    map.apply(p)
}

/// `Df̂(p)`.
pub fn twist_jacobian(map: &TwistMap, p: CylinderPoint) -> Result<Matrix2<f64>> {
    Ok(map.step(p)?.jacobian)
}

/// Mean displacement of the `x`-lift over `n_iter` iterations.
pub fn rotation_number<M: CylinderMap + ?Sized>(map: &M, p: CylinderPoint, n_iter: usize) -> Result<f64> {
    if n_iter < 100 {
        return Err(Error::InvalidParameter(format!(
            "rotation_number needs n_iter >= 100, got {n_iter}"
        )));
    }
    let mut lift = 0.0;
    let mut q = p;
    for done in 0..n_iter {
        if map.is_shear_region(q) {
            lift += q.y * (n_iter - done) as f64;
            break;
        }
        let s = map.step(q)?;
        lift += s.displacement;
        q = s.image;
    }
    Ok(lift / n_iter as f64)
}

/// Signed area between the circle `{y = y0}` and its image,
/// `∮ (y'(s) - y0) dx'(s)`, by the periodic trapezoid rule on `n_samples`
/// points.
pub fn flux_at<M: CylinderMap + ?Sized>(map: &M, y0: f64, n_samples: usize) -> Result<f64> {
    if n_samples < 64 {
        return Err(Error::InvalidParameter(format!(
            "flux needs n_samples >= 64, got {n_samples}"
        )));
    }
    let mut sum = 0.0;
    for k in 0..n_samples {
        let s = map.step(CylinderPoint::new(k as f64 / n_samples as f64, y0))?;
        // dx'/ds along the image curve
        sum += (s.image.y - y0) * s.jacobian[(0, 0)];
    }
    Ok(sum / n_samples as f64)
}

/// Flux averaged over nine circles evenly spaced across `[-K, K]`.
pub fn flux<M: CylinderMap + ?Sized>(map: &M, band_k: f64, n_samples: usize) -> Result<f64> {
    let circles = 9;
    let mut total = 0.0;
    for i in 0..circles {
        let y0 = -band_k + 2.0 * band_k * i as f64 / (circles - 1) as f64;
        total += flux_at(map, y0, n_samples)?;
    }
    Ok(total / circles as f64)
}

/// Regular grid of cell centres on a rectangle of the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let grid = Self {
            x_min: x_range.0,
            x_max: x_range.1,
            y_min: y_range.0,
            y_max: y_range.1,
            nx,
            ny,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidParameter(format!("degenerate grid ranges {self:?}")));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid resolutions must be >= 2, got {}x{}",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width() * self.cell_height()
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of cell `(i, j)`; `i` indexes `x`, `j` indexes `y`. The
    /// returned `x` is not reduced.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (i as f64 + 0.5) * self.cell_width(),
            self.y_min + (j as f64 + 0.5) * self.cell_height(),
        )
    }

    /// Cell centres in row-major order (rows of constant `y`).
    pub fn centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.center(i, j)))
    }
}

/// Minimum of `∂x'/∂y` over the grid.
pub fn twist_lower_bound<M: CylinderMap + ?Sized>(map: &M, grid: &GridSpec) -> Result<f64> {
    let mut min = f64::INFINITY;
    for (x, y) in grid.centers() {
        min = min.min(map.step(CylinderPoint::new(x, y))?.jacobian[(0, 1)]);
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twist(eps: f64) -> TwistMap {
        TwistMapSpec::new(eps, DEFAULT_BAND_K).unwrap().build().unwrap()
    }

    fn close(a: CylinderPoint, b: CylinderPoint, tol: f64) -> bool {
        a.distance(&b) <= tol
    }

    #[test]
    fn cylinder_point_reduces_x() {
        assert_eq!(CylinderPoint::new(1.25, 0.0).x(), 0.25);
        assert_eq!(CylinderPoint::new(-0.25, 0.0).x(), 0.75);
        assert_eq!(CylinderPoint::new(-1e-18, 0.0).x(), 0.0);
    }

    #[test]
    fn shear_examples() {
        assert_eq!(shear_apply(CylinderPoint::new(0.0, 0.0)), CylinderPoint::new(0.0, 0.0));
        assert_eq!(shear_apply(CylinderPoint::new(0.25, 0.5)), CylinderPoint::new(0.75, 0.5));
        assert_eq!(shear_apply(CylinderPoint::new(0.5, 1.0)), CylinderPoint::new(0.5, 1.0));
    }

    #[test]
    fn twist_unperturbed_is_shear() {
        let m = twist(0.0);
        for &(x, y) in &[(0.1, 0.3), (0.9, -1.7), (0.5, 2.2)] {
            let p = CylinderPoint::new(x, y);
            assert!(close(twist_apply(&m, p).unwrap(), shear_apply(p), 1e-12));
            assert_eq!(twist_jacobian(&m, p).unwrap(), shear_jacobian());
        }
    }

    #[test]
    fn twist_outside_band_is_shear() {
        let m = twist(0.5);
        let k = m.spec().band_k();
        let p = CylinderPoint::new(0.3, k + 1.0);
        let image = twist_apply(&m, p).unwrap();
        assert!(close(image, CylinderPoint::new(0.3 + k + 1.0, k + 1.0), 1e-12));
        assert_eq!(twist_jacobian(&m, p).unwrap(), shear_jacobian());
    }

    #[test]
    fn twist_jacobian_matches_finite_differences() {
        let m = twist(0.3);
        let p = CylinderPoint::new(0.0, 0.5);
        let jac = twist_jacobian(&m, p).unwrap();
        assert!((jac.determinant() - 1.0).abs() < 1e-8);
        let h = 1e-6;
        let lift = |x: f64, y: f64| {
            let s = m.step(CylinderPoint::new(x, y)).unwrap();
            (x + s.displacement, s.image.y())
        };
        let (xp, yp) = lift(h, 0.5);
        let (xm, ym) = lift(-h, 0.5);
        let (xq, yq) = lift(0.0, 0.5 + h);
        let (xr, yr) = lift(0.0, 0.5 - h);
        let fd = Matrix2::new(
            (xp - xm) / (2.0 * h),
            (xq - xr) / (2.0 * h),
            (yp - ym) / (2.0 * h),
            (yq - yr) / (2.0 * h),
        );
        assert!((fd - jac).amax() < 1e-5);
    }

    #[test]
    fn rotation_number_of_shear() {
        let m = twist(0.0);
        let r = rotation_number(&m, CylinderPoint::new(0.0, 0.5), 1000).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        let r = rotation_number(&Shear, CylinderPoint::new(0.0, 0.318), 100).unwrap();
        assert!((r - 0.318).abs() < 1e-15);
        assert!(rotation_number(&Shear, CylinderPoint::new(0.0, 0.3), 99).is_err());
    }

    #[test]
    fn flux_vanishes() {
        let flat = twist(0.0);
        assert_eq!(flux(&flat, 2.0, 64).unwrap(), 0.0);
        let m = TwistMapSpec::new(0.5, 2.0)
            .unwrap()
            .with_integrator(IntegratorConfig::sweep(200))
            .build()
            .unwrap();
        assert!(flux_at(&m, 0.0, 64).unwrap().abs() < 1e-8);
        assert!(flux_at(&m, 1.5, 64).unwrap().abs() < 1e-8);
        assert!(flux_at(&m, 3.0, 64).unwrap().abs() < 1e-10);
    }

    #[test]
    fn twist_bound_of_shear_is_one() {
        let grid = GridSpec::new((0.0, 1.0), (-3.0, 3.0), 8, 8).unwrap();
        assert_eq!(twist_lower_bound(&twist(0.0), &grid).unwrap(), 1.0);
        let outside = GridSpec::new((0.0, 1.0), (2.1, 3.0), 4, 4).unwrap();
        assert!((twist_lower_bound(&twist(0.5), &outside).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn grid_rejects_degenerate_specs() {
        assert!(GridSpec::new((0.0, 1.0), (0.0, 1.0), 1, 4).is_err());
        assert!(GridSpec::new((1.0, 0.0), (0.0, 1.0), 4, 4).is_err());
        let g = GridSpec::new((0.0, 1.0), (-0.5, 0.5), 4, 2).unwrap();
        assert_eq!(g.center(0, 0), (0.125, -0.25));
        assert_eq!(g.centers().count(), 8);
        assert!((g.cell_area() * g.len() as f64 - g.area()).abs() < 1e-15);
    }
}
