//! Finite-time Lyapunov exponents, stochastic-island area, a metric-entropy
//! estimate and a scan for invariant essential circles, for any
//! [`CylinderMap`].

use std::io::{self, Read, Write};

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder_maps::{reduce_angle, CylinderMap, CylinderPoint, GridSpec};
use crate::error::{Error, Result};

/// Default island-membership cutoff `λ*`.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Oscillation and angular-gap bound for a circle-like orbit.
pub const CIRCLE_TOLERANCE: f64 = 0.05;

const BINARY_MAGIC: &[u8; 4] = b"FTLE";
const BINARY_VERSION: u32 = 1;

/// `(1/n) log ‖Df^n(p)‖₂`, with the Jacobian product rescaled after every
/// step. Once the orbit enters the shear region the rest of the product is
/// `[[1, m], [0, 1]]` and is applied in closed form.
pub fn ftle<M: CylinderMap + ?Sized>(map: &M, p: CylinderPoint, n_iter: usize) -> Result<f64> {
    if n_iter == 0 {
        return Err(Error::InvalidParameter("ftle needs n_iter >= 1".into()));
    }
    let mut product = Matrix2::identity();
    let mut log_scale = 0.0;
    let mut q = p;
    for done in 0..n_iter {
        if map.is_shear_region(q) {
            let m = (n_iter - done) as f64;
            product = Matrix2::new(1.0, m, 0.0, 1.0) * product;
            break;
        }
        let s = map.step(q)?;
        product = s.jacobian * product;
        let scale = product.amax();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Numerical {
                operation: "ftle",
                point: format!("orbit of ({}, {}) at iterate {done}", p.x(), p.y()),
                residual: scale,
                tolerance: f64::MAX,
            });
        }
        product /= scale;
        log_scale += scale.ln();
        q = s.image;
    }
    let top = product.singular_values().max();
    Ok((log_scale + top.ln()) / n_iter as f64)
}

/// Finite-time exponents at the cell centres of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtleField {
    pub grid: GridSpec,
    pub n_iter: usize,
    pub threshold: f64,
    /// Row-major: `values[j * nx + i]` belongs to cell `(i, j)`.
    pub values: Vec<f64>,
}

/// [`ftle`] at every cell centre. Cells are computed in parallel and
/// assembled by index, so the field does not depend on scheduling.
pub fn ftle_field<M: CylinderMap + ?Sized>(map: &M, grid: &GridSpec, n_iter: usize, threshold: f64) -> Result<FtleField> {
    grid.validate()?;
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter(format!("threshold must be finite, got {threshold}")));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.center(k % grid.nx, k / grid.nx);
            ftle(map, CylinderPoint::new(x, y), n_iter)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FtleField {
        grid: *grid,
        n_iter,
        threshold,
        values,
    })
}

impl FtleField {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.values.len() != self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for a {}x{} grid",
                self.values.len(),
                self.grid.nx,
                self.grid.ny
            )));
        }
        if let Some(bad) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("field value {bad} is not finite")));
        }
        Ok(())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Fraction of cells above `threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        self.values.iter().filter(|&&v| v > threshold).count() as f64 / self.values.len() as f64
    }

    /// Rows `x,y,ftle` under a header line.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "x,y,ftle")?;
        for (k, (x, y)) in self.grid.centers().enumerate() {
            writeln!(out, "{x},{y},{}", self.values[k])?;
        }
        Ok(())
    }

    /// Little-endian binary layout:
    ///
    /// ```text
    /// b"FTLE", version: u32,
    /// x_min, x_max, y_min, y_max: f64,
    /// nx, ny, n_iter: u64,
    /// threshold: f64,
    /// nx·ny values: f64, row-major
    /// ```
    pub fn write_binary<W: Write>(&self, out: &mut W) -> io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        for v in [self.grid.x_min, self.grid.x_max, self.grid.y_min, self.grid.y_max] {
            out.write_all(&v.to_le_bytes())?;
        }
        for n in [self.grid.nx, self.grid.ny, self.n_iter] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        out.write_all(&self.threshold.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(input, &mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::InvalidParameter("not an FTLE field file".into()));
        }
        let version = u32::from_le_bytes(read_array(input)?);
        if version != BINARY_VERSION {
            return Err(Error::InvalidParameter(format!("unsupported FTLE field version {version}")));
        }
        let mut ranges = [0.0; 4];
        for r in &mut ranges {
            *r = f64::from_le_bytes(read_array(input)?);
        }
        let mut counts = [0usize; 3];
        for c in &mut counts {
            *c = usize::try_from(u64::from_le_bytes(read_array(input)?))
                .map_err(|_| Error::InvalidParameter("FTLE field dimension overflows".into()))?;
        }
        let threshold = f64::from_le_bytes(read_array(input)?);
        let grid = GridSpec::new((ranges[0], ranges[1]), (ranges[2], ranges[3]), counts[0], counts[1])?;
        let values = (0..grid.len())
            .map(|_| read_array(input).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let field = Self {
            grid,
            n_iter: counts[2],
            threshold,
            values,
        };
        field.validate()?;
        Ok(field)
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| Error::InvalidParameter(format!("truncated FTLE field: {e}")))
}

fn read_array<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf)?;
    Ok(buf)
}

/// Area of `{FTLE > field.threshold}`.
pub fn island_area(field: &FtleField) -> f64 {
    island_area_at(field, field.threshold)
}

/// Area of `{FTLE > threshold}` in cell units.
pub fn island_area_at(field: &FtleField, threshold: f64) -> f64 {
    field.values.iter().filter(|&&v| v > threshold).count() as f64 * field.grid.cell_area()
}

/// Riemann sum of the positive part of the field.
pub fn metric_entropy_estimate(field: &FtleField) -> f64 {
    field.values.iter().map(|v| v.max(0.0)).sum::<f64>() * field.grid.cell_area()
}

/// One orbit of a circle scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KamSample {
    pub y0: f64,
    /// `max |y_n - y0|`
    pub oscillation: f64,
    /// Largest gap between the orbit's angles on the circle.
    pub max_gap: f64,
    pub circle_like: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KamReport {
    pub samples: Vec<KamSample>,
    pub fraction: f64,
}

/// Iterates `(0, y0)` for `n_samples` values of `y0` drawn uniformly from
/// `y_band` with a seeded generator. Random heights avoid the low-order
/// rational rotation numbers that an evenly spaced scan hits exactly.
pub fn kam_circles<M: CylinderMap + ?Sized>(
    map: &M,
    y_band: (f64, f64),
    n_samples: usize,
    n_iter: usize,
    seed: u64,
) -> Result<KamReport> {
    if n_iter < 1000 {
        return Err(Error::InvalidParameter(format!("kam_circles needs n_iter >= 1000, got {n_iter}")));
    }
    if n_samples == 0 || !(y_band.0 < y_band.1) {
        return Err(Error::InvalidParameter(format!(
            "need samples in a nonempty band, got {n_samples} in {y_band:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heights: Vec<f64> = (0..n_samples).map(|_| rng.gen_range(y_band.0..y_band.1)).collect();
    let samples = heights
        .par_iter()
        .map(|&y0| scan_orbit(map, y0, n_iter))
        .collect::<Result<Vec<_>>>()?;
    let fraction = samples.iter().filter(|s| s.circle_like).count() as f64 / n_samples as f64;
    Ok(KamReport { samples, fraction })
}

fn scan_orbit<M: CylinderMap + ?Sized>(map: &M, y0: f64, n_iter: usize) -> Result<KamSample> {
    let mut q = CylinderPoint::new(0.0, y0);
    let mut angles = Vec::with_capacity(n_iter + 1);
    angles.push(0.0);
    let mut oscillation: f64 = 0.0;
    for _ in 0..n_iter {
        q = map.apply(q)?;
        oscillation = oscillation.max((q.y() - y0).abs());
        angles.push(reduce_angle(q.x()));
    }
    let max_gap = circular_gap(&mut angles);
    // in the shear region every circle is invariant, whatever the rotation
    let invariant = map.is_shear_region(CylinderPoint::new(0.0, y0));
    Ok(KamSample {
        y0,
        oscillation,
        max_gap,
        circle_like: invariant || (oscillation < CIRCLE_TOLERANCE && max_gap < CIRCLE_TOLERANCE),
    })
}

fn circular_gap(angles: &mut [f64]) -> f64 {
    angles.sort_by(f64::total_cmp);
    let wrap = 1.0 - angles[angles.len() - 1] + angles[0];
    angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder_maps::{Shear, TwistMapSpec};
    use crate::suspension::IntegratorConfig;

    fn sweep_map(eps: f64) -> crate::cylinder_maps::TwistMap {
        TwistMapSpec::new(eps, 2.0)
            .unwrap()
            .with_integrator(IntegratorConfig::sweep(25))
            .build()
            .unwrap()
    }

    #[test]
    fn shear_exponent_matches_closed_form() {
        let n = 1000;
        let value = ftle(&Shear, CylinderPoint::new(0.3, 0.2), n).unwrap();
        let exact = Matrix2::new(1.0, n as f64, 0.0, 1.0).singular_values().max().ln() / n as f64;
        assert!((value - exact).abs() < 1e-14);
        assert!(value <= (1.0 + n as f64).ln() / n as f64);
        assert!(ftle(&Shear, CylinderPoint::new(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn outside_the_band_the_exponent_is_the_shear_one() {
        let map = sweep_map(0.5);
        let v = ftle(&map, CylinderPoint::new(0.4, 2.5), 1000).unwrap();
        assert!(v <= 0.01);
    }

    #[test]
    fn hyperbolic_and_elliptic_fixed_points() {
        let map = sweep_map(1.2);
        // (0, 0) is hyperbolic, (1/2, 0) elliptic; the exponent of a fixed
        // point is the log of its unstable eigenvalue
        let trace = map.step(CylinderPoint::new(0.0, 0.0)).unwrap().jacobian.trace();
        assert!(trace > 2.0);
        let expected = (0.5 * (trace + (trace * trace - 4.0).sqrt())).ln();
        let v = ftle(&map, CylinderPoint::new(0.0, 0.0), 1000).unwrap();
        assert!((v - expected).abs() < 1e-3, "{v} vs {expected}");
        assert!(ftle(&map, CylinderPoint::new(0.5, 0.0), 1000).unwrap() < 0.01);
    }

    #[test]
    fn field_statistics() {
        let grid = GridSpec::new((0.0, 1.0), (-3.0, 3.0), 4, 6).unwrap();
        let flat = ftle_field(&Shear, &grid, 1000, DEFAULT_THRESHOLD).unwrap();
        assert!(flat.values.iter().all(|&v| v <= 0.01));
        assert_eq!(island_area(&flat), 0.0);
        assert!(metric_entropy_estimate(&flat) <= 0.01 * grid.area());

        let field = ftle_field(&sweep_map(1.2), &grid, 1000, DEFAULT_THRESHOLD).unwrap();
        // the two outer rows lie beyond K
        for i in 0..grid.nx {
            assert!(field.value(i, 0) <= 0.01 && field.value(i, grid.ny - 1) <= 0.01);
        }
        assert_eq!(island_area_at(&field, field.max() + 1.0), 0.0);
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let lambda = 0.02 * k as f64;
            let area = island_area_at(&field, lambda);
            assert!(area <= last);
            assert!(metric_entropy_estimate(&field) >= lambda * area);
            last = area;
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let grid = GridSpec::new((0.0, 1.0), (-0.5, 0.5), 3, 2).unwrap();
        let field = FtleField {
            grid,
            n_iter: 10,
            threshold: 0.05,
            values: vec![0.1, -0.2, 0.3, 0.4, 0.5, 1e-300],
        };
        let mut bytes = Vec::new();
        field.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 32 + 24 + 8 + 6 * 8);
        assert_eq!(FtleField::read_binary(&mut bytes.as_slice()).unwrap(), field);
        assert!(FtleField::read_binary(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut csv = Vec::new();
        field.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,ftle");
        assert_eq!(lines.len(), 7);
        let row: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.5, -0.25, -0.2]);
    }

    #[test]
    fn circles_of_the_shear() {
        let report = kam_circles(&Shear, (-1.0, 1.0), 8, 1000, 7).unwrap();
        assert_eq!(report.fraction, 1.0);
        assert!(report.samples.iter().all(|s| s.oscillation == 0.0));
        assert!(kam_circles(&Shear, (-1.0, 1.0), 8, 999, 7).is_err());
    }

    #[test]
    fn gap_wraps_around() {
        let mut a = [0.1, 0.5, 0.9];
        assert!((circular_gap(&mut a) - 0.4).abs() < 1e-15);
        let mut b = [0.0, 0.05, 0.3];
        assert!((circular_gap(&mut b) - 0.7).abs() < 1e-15);
    }
}
