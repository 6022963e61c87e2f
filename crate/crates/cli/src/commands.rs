//! The five batch commands. Each writes its artifacts into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use normspec::assembly::AssemblyOptions;
use normspec::geometry::{write_cloud_csv, PointCloud};
use normspec::problems::generate_clouds;
use normspec::solver::{
    attach_coefficients, build_system, eigenfunction, multiplicity_ratios, newton_search, parallel_map,
    scan_parallel, solve_at, write_scan_csv, NewtonResult,
};

use crate::config::RunConfig;
use crate::plot::{read_columns, svg_log_plot};
use crate::CliError;

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

fn write_comments(out: &mut impl Write, comments: &[String]) -> Result<(), CliError> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    Ok(())
}

fn assembly_options(cfg: &RunConfig) -> AssemblyOptions {
    AssemblyOptions {
        threads: cfg.workers,
        ..Default::default()
    }
}

pub fn scan(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (_, system) = build_system(&cfg.problem, &assembly_options(cfg))?;
    let s = &cfg.scan;
    let points = scan_parallel(&system, s.lambda_min, s.lambda_max, s.steps, cfg.workers)?;
    let (csv_path, mut out) = create(dir, "scan.csv")?;
    write_scan_csv(&points, &cfg.header("scan")?, &mut out)?;
    out.flush()?;
    drop(out);
    let csv = fs::read_to_string(&csv_path)?;
    let pts = read_columns(&csv, "lambda", "norm_sq").map_err(CliError::Config)?;
    let (svg_path, mut svg) = create(dir, "scan.svg")?;
    svg.write_all(svg_log_plot(&pts, "lambda", "N(lambda)").as_bytes())?;
    svg.flush()?;
    Ok(vec![csv_path, svg_path])
}

pub fn newton(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (_, system) = build_system(&cfg.problem, &assembly_options(cfg))?;
    let starts = cfg.newton.start_values();
    let opts = cfg.newton.options();
    let results = parallel_map(&starts, cfg.workers, |&l0| {
        newton_search(&system, l0, &opts).map_err(|e| CliError::numeric(e, Some(l0)))
    });
    let results: Vec<NewtonResult> = results.into_iter().collect::<Result<_, _>>()?;
    let (path, mut out) = create(dir, "newton.csv")?;
    write_comments(&mut out, &cfg.header("newton")?)?;
    writeln!(out, "lambda0,lambda_star,norm_sq,iterations,converged,stagnated,is_minimum")?;
    for r in &results {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.lambda0, r.lambda_star, r.norm_sq, r.iterations, r.converged, r.stagnated, r.is_minimum
        )?;
    }
    out.flush()?;
    Ok(vec![path])
}

pub fn multiplicity(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let m = &cfg.multiplicity;
    let reports = multiplicity_ratios(
        &cfg.problem,
        m.lambda,
        &m.anchors,
        m.n1,
        m.n2(),
        cfg.problem.seed,
        m.cutoff,
        &assembly_options(cfg),
    )
    .map_err(|e| CliError::numeric(e, Some(m.lambda)))?;
    let (path, mut out) = create(dir, "multiplicity.csv")?;
    write_comments(&mut out, &cfg.header("multiplicity")?)?;
    writeln!(out, "lambda,n_anchors,n1,n2,norm_sq1,norm_sq2,ratio,verdict")?;
    for r in &reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:?}",
            r.lambda, r.n_anchors, r.n1, r.n2, r.norm_sq1, r.norm_sq2, r.ratio, r.verdict
        )?;
    }
    out.flush()?;
    Ok(vec![path])
}

pub fn eigenfunction_cmd(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (clouds, system) = build_system(&cfg.problem, &assembly_options(cfg))?;
    let e = &cfg.eigenfunction;
    let mut lambda = e.lambda;
    let mut comments = cfg.header("eigenfunction")?;
    if e.refine {
        let r = newton_search(&system, lambda, &cfg.newton.options()).map_err(|err| CliError::numeric(err, Some(lambda)))?;
        comments.push(format!("newton from {lambda}: converged = {}, is_minimum = {}", r.converged, r.is_minimum));
        lambda = r.lambda_star;
    }
    let mut solve = solve_at(&system, lambda).map_err(|err| CliError::numeric(err, Some(lambda)))?;
    attach_coefficients(&system, &mut solve)?;
    comments.push(format!("lambda = {lambda}"));
    comments.push(format!("norm_sq = {}", solve.norm_sq));
    comments.push(format!("max constraint residual = {}", solve.residual.unwrap_or(f64::NAN)));
    let points: Vec<_> = clouds.interior.points.iter().chain(&clouds.boundary.points).copied().collect();
    let values = eigenfunction(&system, &solve, &points)?;
    let (path, mut out) = create(dir, "eigenfunction.csv")?;
    write_comments(&mut out, &comments)?;
    writeln!(out, "x,y,z,re,im")?;
    for (p, u) in points.iter().zip(&values) {
        writeln!(out, "{},{},{},{},{}", p[0], p[1], p[2], u.re, u.im)?;
    }
    out.flush()?;
    Ok(vec![path])
}

pub fn cloud(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let clouds = generate_clouds(&cfg.problem)?;
    let header = cfg.header("cloud")?;
    let anchors = PointCloud {
        points: clouds.anchors.clone(),
        seed: cfg.problem.seed,
        ..Default::default()
    };
    let mut written = Vec::new();
    for (name, c) in [("interior.csv", &clouds.interior), ("boundary.csv", &clouds.boundary), ("anchors.csv", &anchors)] {
        if c.is_empty() {
            continue;
        }
        let (path, mut out) = create(dir, name)?;
        write_cloud_csv(c, &header, &mut out)?;
        out.flush()?;
        written.push(path);
    }
    Ok(written)
}
