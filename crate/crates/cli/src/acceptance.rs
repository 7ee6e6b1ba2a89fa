//! The acceptance suite run by `verify`: eleven criteria, each reduced to
//! named checks plus an optional wall-clock limit.

use std::time::Instant;

use anyhow::{Context, Result};
use finsler_twist::chaos_analysis::{ftle_field, kam_circles, metric_entropy_estimate};
use finsler_twist::finsler::cr_distance;
use finsler_twist::{ConjugatedReturnMap, CrRegion, CylinderPoint, GridSpec, Shear};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::measure::{
    determinant_defect, el_hamiltonian_defect, fundamental_tensor_check, grid_points, homogeneity_error,
    legendre_check, map_difference, rng,
};
use crate::report::{Check, Relation};

/// Regression values of the chaos criterion, from its first computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosFixture {
    pub fraction_above: f64,
    pub entropy_estimate: f64,
}

const CHAOS_FIXTURE: &str = include_str!("../tests/fixtures/chaos.json");

/// Allowed drift of the chaos fixture: absolute on the fraction, relative on
/// the entropy.
pub const FIXTURE_FRACTION_TOL: f64 = 0.01;
pub const FIXTURE_ENTROPY_TOL: f64 = 0.05;

pub fn chaos_fixture() -> Result<ChaosFixture> {
    serde_json::from_str(CHAOS_FIXTURE).context("parsing the chaos fixture")
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub checks: Vec<(String, Check)>,
    pub seconds: f64,
    pub time_limit: Option<f64>,
    pub error: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.checks.iter().all(|(_, c)| c.pass)
            && self.time_limit.is_none_or(|limit| self.seconds < limit)
    }

    pub fn line(&self) -> String {
        let mut parts: Vec<String> = self
            .checks
            .iter()
            .map(|(label, c)| format!("{label} {:.6e} {} {:e}", c.value, c.relation.symbol(), c.bound))
            .collect();
        match self.time_limit {
            Some(limit) => parts.push(format!("time {:.1} s < {limit} s", self.seconds)),
            None => parts.push(format!("time {:.1} s", self.seconds)),
        }
        if let Some(e) = &self.error {
            parts.push(format!("error: {e}"));
        }
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        format!("[{tag}] {:>2} {}: {}", self.id, self.name, parts.join("; "))
    }
}

type Measure = fn() -> Result<Vec<(String, Check)>>;

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub time_limit: Option<f64>,
    measure: Measure,
}

impl Criterion {
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let result = (self.measure)();
        let seconds = start.elapsed().as_secs_f64();
        let (checks, error) = match result {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(format!("{e:#}"))),
        };
        Outcome {
            id: self.id,
            name: self.name,
            checks,
            seconds,
            time_limit: self.time_limit,
            error,
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    let c = |id, name, time_limit, measure| Criterion {
        id,
        name,
        time_limit,
        measure,
    };
    vec![
        c(1, "flat-limit", Some(10.0), flat_limit as Measure),
        c(2, "conjugacy", Some(300.0), conjugacy),
        c(3, "shear-region", None, shear_region),
        c(4, "finsler-certification", None, finsler_certification),
        c(5, "homogeneity", None, homogeneity),
        c(6, "area-preservation", None, area_preservation),
        c(7, "chaos", Some(600.0), chaos),
        c(8, "near-integrability", None, near_integrability),
        c(9, "legendre", None, legendre),
        c(10, "euler-lagrange", None, euler_lagrange),
        c(11, "cr-trend", None, cr_trend),
    ]
}

/// Runs every criterion, calling `report` after each one.
pub fn run_all(mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    criteria()
        .iter()
        .map(|c| {
            let o = c.run();
            report(&o);
            o
        })
        .collect()
}

fn check(label: &str, value: f64, relation: Relation, bound: f64) -> (String, Check) {
    (label.to_string(), Check::new(value, relation, bound))
}

fn conjugated(epsilon: f64) -> Result<ConjugatedReturnMap> {
    let config = ExperimentConfig::default().with_epsilon(epsilon);
    Ok(ConjugatedReturnMap::new(config.model()?, config.graph)?)
}

fn band() -> f64 {
    ExperimentConfig::default().band_k
}

fn flat_limit() -> Result<Vec<(String, Check)>> {
    let reach = band() + 2.0;
    let mut rng = rng(11);
    let points: Vec<_> = (0..100)
        .map(|_| CylinderPoint::new(rng.gen(), rng.gen_range(-reach..reach)))
        .collect();
    let d = map_difference(&conjugated(0.0)?, &Shear, &points)?;
    Ok(vec![check("residual", d.position, Relation::AtMost, 1e-8)])
}

fn conjugacy() -> Result<Vec<(String, Check)>> {
    let points = grid_points(32, -band(), band())?;
    let mut out = Vec::new();
    for epsilon in [0.1, 0.3, 0.5] {
        let twist = ExperimentConfig::default().with_epsilon(epsilon).twist_spec()?.build()?;
        let d = map_difference(&conjugated(epsilon)?, &twist, &points)?;
        out.push(check(&format!("eps={epsilon}"), d.position, Relation::AtMost, 1e-6));
    }
    Ok(out)
}

fn shear_region() -> Result<Vec<(String, Check)>> {
    let k = band();
    let mut rng = rng(13);
    let points: Vec<_> = (0..100)
        .map(|_| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            // open interval (K, K + 2)
            let y = k + 2.0 * (1.0 - rng.gen::<f64>());
            CylinderPoint::new(rng.gen(), sign * y.min(k + 2.0 - 1e-12))
        })
        .collect();
    let d = map_difference(&conjugated(0.3)?, &Shear, &points)?;
    Ok(vec![check("residual", d.position, Relation::AtMost, 1e-8)])
}

fn finsler_certification() -> Result<Vec<(String, Check)>> {
    let model = ExperimentConfig::default().model()?;
    let stats = fundamental_tensor_check(&model, 10_000, 17)?;
    Ok(vec![
        check("min_eigenvalue", stats.min_eigenvalue, Relation::Above, 0.0),
        check("fd_hessian_error", stats.max_fd_error, Relation::AtMost, 1e-5),
    ])
}

fn homogeneity() -> Result<Vec<(String, Check)>> {
    let model = ExperimentConfig::default().model()?;
    let e = homogeneity_error(&model, 1000, &[0.5, 2.0, 10.0], 19)?;
    Ok(vec![check("relative_error", e, Relation::AtMost, 1e-12)])
}

fn area_preservation() -> Result<Vec<(String, Check)>> {
    let points = grid_points(16, -band(), band())?;
    let d = determinant_defect(&conjugated(0.3)?, &points)?;
    Ok(vec![check("det_defect", d, Relation::AtMost, 1e-6)])
}

fn chaos() -> Result<Vec<(String, Check)>> {
    let config = ExperimentConfig::default().with_epsilon(1.2);
    let grid = GridSpec::new((0.0, 1.0), (-0.5, 0.5), 256, 256)?;
    let map = config.sweep_spec()?.build()?;
    let field = ftle_field(&map, &grid, 1000, config.threshold)?;
    let fraction = field.fraction_above(config.threshold);
    let entropy = metric_entropy_estimate(&field);
    let fixture = chaos_fixture()?;
    Ok(vec![
        check("fraction_above", fraction, Relation::AtLeast, 0.05),
        check("entropy_estimate", entropy, Relation::Above, 0.0),
        check(
            "fixture_fraction_drift",
            (fraction - fixture.fraction_above).abs(),
            Relation::AtMost,
            FIXTURE_FRACTION_TOL,
        ),
        check(
            "fixture_entropy_drift",
            (entropy / fixture.entropy_estimate - 1.0).abs(),
            Relation::AtMost,
            FIXTURE_ENTROPY_TOL,
        ),
    ])
}

fn near_integrability() -> Result<Vec<(String, Check)>> {
    let scan = kam_circles(&conjugated(0.05)?, (-1.0, 1.0), 50, 1000, 23)?;
    Ok(vec![check("circle_fraction", scan.fraction, Relation::AtLeast, 0.9)])
}

fn legendre() -> Result<Vec<(String, Check)>> {
    let stats = legendre_check(&ExperimentConfig::default().suspension()?, 1000, 29)?;
    Ok(vec![
        check("round_trip", stats.round_trip, Relation::AtMost, 1e-10),
        check("duality", stats.duality, Relation::AtMost, 1e-12),
    ])
}

fn euler_lagrange() -> Result<Vec<(String, Check)>> {
    let config = ExperimentConfig::default();
    let d = el_hamiltonian_defect(&config.model()?, &config.graph, 100, 31)?;
    Ok(vec![check("max_defect", d, Relation::AtMost, 1e-8)])
}

fn cr_trend() -> Result<Vec<(String, Check)>> {
    let region = CrRegion::default();
    let base = ExperimentConfig::default();
    let coarse = cr_distance(&base.with_epsilon(0.1).model()?, 1, &region)?;
    let fine = cr_distance(&base.with_epsilon(0.05).model()?, 1, &region)?;
    Ok(vec![check("ratio", fine / coarse, Relation::AtMost, 0.6)])
}
