//! Named experiment pipelines. Each writes `report.json` plus its data
//! files into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use finsler_twist::chaos_analysis::{ftle_field, island_area, kam_circles, metric_entropy_estimate};
use finsler_twist::finsler::cr_distance;
use finsler_twist::geodesics::integrate_graph;
use finsler_twist::{ConjugatedReturnMap, CylinderMap, CylinderPoint, FtleField, Shear};

use crate::config::ExperimentConfig;
use crate::measure::{determinant_defect, map_difference};
use crate::report::{Relation, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    FlatCheck,
    Conjugacy,
    FtleField,
    IslandArea,
    KamScan,
    Portrait,
    CrDistance,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::FlatCheck => "flat-check",
            Experiment::Conjugacy => "conjugacy",
            Experiment::FtleField => "ftle-field",
            Experiment::IslandArea => "island-area",
            Experiment::KamScan => "kam-scan",
            Experiment::Portrait => "portrait",
            Experiment::CrDistance => "cr-distance",
        }
    }
}

/// Runs `experiment`, writing the report and artifacts into `out`.
pub fn run(experiment: Experiment, config: &ExperimentConfig, out: &Path) -> Result<Report> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = Report::new(experiment.name(), config);
    match experiment {
        Experiment::FlatCheck => flat_check(config, &mut report)?,
        Experiment::Conjugacy => conjugacy(config, out, &mut report)?,
        Experiment::FtleField => {
            field_experiment(config, out, &mut report)?;
        }
        Experiment::IslandArea => {
            let field = field_experiment(config, out, &mut report)?;
            let area = island_area(&field);
            report.check(
                "island_area",
                area,
                Relation::AtLeast,
                config.tolerances.island_fraction * field.grid.area(),
            );
            report.check("entropy_estimate", metric_entropy_estimate(&field), Relation::Above, 0.0);
        }
        Experiment::KamScan => kam_scan(config, &mut report)?,
        Experiment::Portrait => portrait(config, out, &mut report)?,
        Experiment::CrDistance => cr(config, &mut report)?,
    }
    report.write(out)?;
    Ok(report)
}

fn conjugated_map(config: &ExperimentConfig) -> Result<ConjugatedReturnMap> {
    Ok(ConjugatedReturnMap::new(config.model()?, config.graph)?)
}

/// Twist map and conjugated return map against the shear on the grid.
fn flat_check(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = config.grid.spec()?;
    let points: Vec<_> = grid.centers().map(|(x, y)| CylinderPoint::new(x, y)).collect();
    let twist = config.twist_spec()?.build()?;
    let geodesic = conjugated_map(config)?;
    let a = map_difference(&twist, &Shear, &points)?;
    let b = map_difference(&geodesic, &Shear, &points)?;
    report.metric("points", points.len() as f64);
    report.metric("twist_jacobian_residual", a.jacobian);
    report.metric("return_map_jacobian_residual", b.jacobian);
    report.check("twist_residual", a.position, Relation::AtMost, config.tolerances.flat);
    report.check("return_map_residual", b.position, Relation::AtMost, config.tolerances.flat);
    Ok(())
}

/// `g∘R∘g⁻¹` against the twist map on the grid, plus sample geodesics.
fn conjugacy(config: &ExperimentConfig, out: &Path, report: &mut Report) -> Result<()> {
    let grid = config.grid.spec()?;
    let points: Vec<_> = grid.centers().map(|(x, y)| CylinderPoint::new(x, y)).collect();
    let twist = config.twist_spec()?.build()?;
    let geodesic = conjugated_map(config)?;
    let diff = map_difference(&geodesic, &twist, &points)?;
    report.metric("points", points.len() as f64);
    report.check("conjugacy_residual", diff.position, Relation::AtMost, config.tolerances.conjugacy);
    report.check("jacobian_residual", diff.jacobian, Relation::AtMost, config.tolerances.conjugacy);
    report.check(
        "determinant_defect",
        determinant_defect(&geodesic, &points)?,
        Relation::AtMost,
        config.tolerances.determinant,
    );

    let model = geodesic.model();
    let mut file = BufWriter::new(File::create(out.join("trajectories.csv"))?);
    writeln!(file, "# experiment: conjugacy")?;
    writeln!(file, "# epsilon: {}", config.epsilon)?;
    let picks = 5.min(grid.ny);
    for k in 0..picks {
        let (x, y) = grid.center(k * grid.nx / picks, k * grid.ny / picks);
        let traj = integrate_graph(model, x, y, &config.graph)?;
        let meta = [("trajectory", k.to_string()), ("h", x.to_string()), ("slope0", y.to_string())];
        if k == 0 {
            traj.write_csv(&mut file, &meta)?;
        } else {
            for (key, value) in &meta {
                writeln!(file, "# {key}: {value}")?;
            }
            for [t, theta, thetadot] in &traj.samples {
                writeln!(file, "{t},{theta},{thetadot}")?;
            }
        }
    }
    file.flush()?;
    report.artifact("trajectories.csv");
    Ok(())
}

/// FTLE field of the twist map with the fixed-step sweep integrator.
fn field_experiment(config: &ExperimentConfig, out: &Path, report: &mut Report) -> Result<FtleField> {
    let grid = config.grid.spec()?;
    let map = config.sweep_spec()?.build()?;
    let field = ftle_field(&map, &grid, config.n_iter, config.threshold)?;
    let mut csv = BufWriter::new(File::create(out.join("field.csv"))?);
    field.write_csv(&mut csv)?;
    csv.flush()?;
    let mut bin = BufWriter::new(File::create(out.join("field.bin"))?);
    field.write_binary(&mut bin)?;
    bin.flush()?;
    report.artifact("field.csv");
    report.artifact("field.bin");
    report.metric("cells", field.values.len() as f64);
    report.metric("max_ftle", field.max());
    report.metric("fraction_above_threshold", field.fraction_above(field.threshold));
    report.metric("island_area", island_area(&field));
    report.metric("entropy_estimate", metric_entropy_estimate(&field));
    report.check(
        "finite_values",
        field.values.iter().filter(|v| !v.is_finite()).count() as f64,
        Relation::AtMost,
        0.0,
    );
    Ok(field)
}

/// Circle scan on the conjugated return map.
fn kam_scan(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let map = conjugated_map(config)?;
    let kam = &config.kam;
    let scan = kam_circles(&map, (kam.y_min, kam.y_max), kam.samples, config.n_iter, config.seed)?;
    let worst = scan.samples.iter().map(|s| s.oscillation).fold(0.0, f64::max);
    report.metric("max_oscillation", worst);
    for (k, s) in scan.samples.iter().enumerate() {
        report.metric(&format!("sample_{k:03}_y0"), s.y0);
        report.metric(&format!("sample_{k:03}_oscillation"), s.oscillation);
        report.metric(&format!("sample_{k:03}_max_gap"), s.max_gap);
    }
    report.check("circle_fraction", scan.fraction, Relation::AtLeast, kam.min_fraction);
    Ok(())
}

/// Orbit scatter of the conjugated return map from seeds on `x = x0`.
fn portrait(config: &ExperimentConfig, out: &Path, report: &mut Report) -> Result<()> {
    let map = conjugated_map(config)?;
    let p = &config.portrait;
    let g = &config.grid;
    let mut file = BufWriter::new(File::create(out.join("orbits.csv"))?);
    writeln!(file, "seed,iterate,x,y")?;
    let mut escaped = 0.0;
    for s in 0..p.seeds {
        let y0 = g.y_min + (g.y_max - g.y_min) * (s as f64 + 0.5) / p.seeds as f64;
        let mut q = CylinderPoint::new(p.x0, y0);
        writeln!(file, "{s},0,{},{}", q.x(), q.y())?;
        for n in 1..=p.iterations {
            q = map.apply(q)?;
            writeln!(file, "{s},{n},{},{}", q.x(), q.y())?;
        }
        if q.y() < g.y_min || q.y() > g.y_max {
            escaped += 1.0;
        }
    }
    file.flush()?;
    report.artifact("orbits.csv");
    report.metric("seeds_ending_outside_grid", escaped);
    Ok(())
}

/// `C^r` distance to the flat metric at `ε` and `ε/2`.
fn cr(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let region = config.cr.region();
    let full = cr_distance(&config.model()?, config.cr.order, &region)?;
    let half = cr_distance(&config.with_epsilon(0.5 * config.epsilon).model()?, config.cr.order, &region)?;
    report.metric("distance", full);
    report.metric("distance_half_epsilon", half);
    report.check("ratio", half / full, Relation::AtMost, config.cr.max_ratio);
    Ok(())
}
