//! Norm evaluation `N(λ) = g*Φ(λ)⁻¹g`, its λ-derivatives, Newton search for
//! minima, λ-scans, eigenfunction recovery and the multiplicity test.

use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::{Llt, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, MatRef, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, real_adjoint, rows_at_lambda, AssembledSystem, AssemblyOptions};
use crate::error::{Error, Result};
use crate::problems::{build_rows, generate_clouds, random_anchors, Family, ProblemClouds, ProblemSpec};
use crate::geometry::{generate_boundary_cloud, CloudParams, PointCloud};
use crate::vec3::{dot, Point};

/// Relative diagonal shift for the single factorization retry.
pub const JITTER: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub lambda: f64,
    pub beta: Vec<Complex64>,
    pub norm_sq: f64,
    /// `a = C(λ)ᴴβ`, filled by [`attach_coefficients`].
    pub coeffs: Option<Vec<Complex64>>,
    /// Largest `|(C(λ)a − g)_j|`, filled with the coefficients.
    pub residual: Option<f64>,
    /// Whether the factorization needed the diagonal shift.
    pub jittered: bool,
    factor: Arc<Llt<f64>>,
}

impl SolveResult {
    /// `β` as real columns (real part, then imaginary part if present).
    fn beta_columns(&self) -> Mat<f64> {
        to_columns(&self.beta)
    }

    /// Solves `Φ(λ)x = b` with the retained factorization.
    pub fn apply_inverse(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.factor.solve(b)
    }
}

fn has_imaginary(v: &[Complex64]) -> bool {
    v.iter().any(|z| z.im != 0.0)
}

fn to_columns(v: &[Complex64]) -> Mat<f64> {
    let cols = if has_imaginary(v) { 2 } else { 1 };
    Mat::from_fn(v.len(), cols, |i, j| if j == 0 { v[i].re } else { v[i].im })
}

fn from_columns(m: &Mat<f64>) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|i| Complex64::new(m[(i, 0)], if m.ncols() > 1 { m[(i, 1)] } else { 0.0 }))
        .collect()
}

/// `Σ_cols xᵀ y`.
fn frob_dot(x: &Mat<f64>, y: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            acc += x[(i, j)] * y[(i, j)];
        }
    }
    acc
}

fn factorize(mut phi: Mat<f64>, lambda: f64) -> Result<(Llt<f64>, bool)> {
    match phi.llt(Side::Lower) {
        Ok(f) => Ok((f, false)),
        Err(_) => {
            let r = phi.nrows();
            let trace: f64 = (0..r).map(|i| phi[(i, i)]).sum();
            let shift = JITTER * trace / r as f64;
            for i in 0..r {
                phi[(i, i)] += shift;
            }
            match phi.llt(Side::Lower) {
                Ok(f) => Ok((f, true)),
                Err(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
                    Err(Error::NotPositiveDefinite { lambda, pivot: index })
                }
            }
        }
    }
}

/// Solves `Φ(λ)β = g` by Cholesky factorization.
pub fn solve_at(system: &AssembledSystem, lambda: f64) -> Result<SolveResult> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let (factor, jittered) = factorize(system.phi_at(lambda), lambda)?;
    let g = to_columns(&system.g);
    let beta = factor.solve(&g);
    Ok(SolveResult {
        lambda,
        norm_sq: frob_dot(&g, &beta),
        beta: from_columns(&beta),
        coeffs: None,
        residual: None,
        jittered,
        factor: Arc::new(factor),
    })
}

/// `β*Φ(λ)β`, which equals `N(λ)` for an exact solve.
pub fn quadratic_form(system: &AssembledSystem, solve: &SolveResult) -> f64 {
    let b = solve.beta_columns();
    let phi_b = system.phi_at(solve.lambda) * &b;
    frob_dot(&b, &phi_b)
}

/// `(N′(λ), N″(λ))` from the solve at the same `λ`:
/// `N′ = −β*Mβ`, `N″ = 2(Mβ)*Φ⁻¹(Mβ) − 2β*Φ₂β` with `M = 2λΦ₂ + Φ₁`.
pub fn norm_derivatives(system: &AssembledSystem, solve: &SolveResult) -> (f64, f64) {
    let b = solve.beta_columns();
    let mb = system.dphi_at(solve.lambda) * &b;
    let d1 = -frob_dot(&b, &mb);
    let phi_inv_mb = solve.apply_inverse(mb.as_ref());
    let phi2_b = &system.phi2 * &b;
    let d2 = 2.0 * frob_dot(&mb, &phi_inv_mb) - 2.0 * frob_dot(&b, &phi2_b);
    (d1, d2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            max_halvings: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iter: usize,
    pub lambda: f64,
    pub norm_sq: f64,
    pub d1: f64,
    pub d2: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonResult {
    pub lambda0: f64,
    pub lambda_star: f64,
    pub norm_sq: f64,
    pub iterations: usize,
    pub converged: bool,
    /// No halving of the Newton step was accepted: the iterate sits at the
    /// roundoff floor of `N` and `N′` and counts as converged when `N″ > 0`.
    pub stagnated: bool,
    pub is_minimum: bool,
    pub history: Vec<NewtonStep>,
}

/// Relative step size below which `N` may be flat to roundoff.
const LOCAL_STEP: f64 = 1e-3;

/// Newton iteration on `N′(λ) = 0` with step halving.
///
/// A trial step is accepted when `N` does not increase. If no halving
/// passes, a short full step with `N″ > 0` is accepted when `|N′|` shrinks.
/// Where `N″ ≤ 0` the step `−N′/|N″|` still points downhill; such iterates
/// cannot terminate as converged. The search stops early when no step is
/// accepted.
pub fn newton_search(system: &AssembledSystem, lambda0: f64, opts: &NewtonOptions) -> Result<NewtonResult> {
    let mut lambda = lambda0;
    let mut current = solve_at(system, lambda)?;
    let (mut d1, mut d2) = norm_derivatives(system, &current);
    let mut history = Vec::new();
    let mut converged = false;
    let mut stagnated = false;
    for iter in 0..opts.max_iter {
        let full = if d2 != 0.0 {
            -d1 / d2.abs()
        } else {
            -d1.signum() * 1e-2 * (1.0 + lambda.abs())
        };
        let mut record = NewtonStep {
            iter,
            lambda,
            norm_sq: current.norm_sq,
            d1,
            d2,
            step: full,
        };
        if full.abs() <= opts.tol || d1 == 0.0 {
            history.push(record);
            lambda += full;
            converged = d2 > 0.0;
            break;
        }
        let mut step = full;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            if let Ok(t) = solve_at(system, lambda + step) {
                if t.norm_sq <= current.norm_sq {
                    let (t1, t2) = norm_derivatives(system, &t);
                    accepted = Some((t, t1, t2));
                    break;
                }
            }
            step *= 0.5;
        }
        if accepted.is_none() && d2 > 0.0 && full.abs() <= LOCAL_STEP * (1.0 + lambda.abs()) {
            // `N` is flat to roundoff; fall back on the decrease of `|N′|`.
            step = full;
            if let Ok(t) = solve_at(system, lambda + step) {
                let (t1, t2) = norm_derivatives(system, &t);
                if t1.abs() < d1.abs() {
                    accepted = Some((t, t1, t2));
                }
            }
        }
        let Some((t, t1, t2)) = accepted else {
            record.step = 0.0;
            history.push(record);
            stagnated = true;
            converged = d2 > 0.0;
            break;
        };
        record.step = step;
        history.push(record);
        lambda += step;
        let prev_d2 = d2;
        (current, d1, d2) = (t, t1, t2);
        if step.abs() <= opts.tol && prev_d2 > 0.0 {
            converged = d2 > 0.0;
            break;
        }
    }
    Ok(NewtonResult {
        lambda0,
        lambda_star: lambda,
        norm_sq: current.norm_sq,
        iterations: history.len(),
        converged,
        stagnated,
        is_minimum: d2 > 0.0,
        history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub norm_sq: f64,
    pub dnorm_sq: f64,
    pub factorization_ok: bool,
}

fn scan_point(system: &AssembledSystem, lambda: f64) -> ScanPoint {
    match solve_at(system, lambda) {
        Ok(s) => {
            let (d1, _) = norm_derivatives(system, &s);
            ScanPoint {
                lambda,
                norm_sq: s.norm_sq,
                dnorm_sq: d1,
                factorization_ok: true,
            }
        }
        Err(_) => ScanPoint {
            lambda,
            norm_sq: f64::NAN,
            dnorm_sq: f64::NAN,
            factorization_ok: false,
        },
    }
}

pub fn scan_grid(lambda_min: f64, lambda_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lambda_min < lambda_max) || steps < 2 {
        return Err(Error::InvalidArgument("scan needs lambda_min < lambda_max and at least 2 steps".into()));
    }
    let h = (lambda_max - lambda_min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| lambda_min + i as f64 * h).collect())
}

/// `N` and `N′` on a uniform grid of `steps` points.
pub fn scan(system: &AssembledSystem, lambda_min: f64, lambda_max: f64, steps: usize) -> Result<Vec<ScanPoint>> {
    scan_parallel(system, lambda_min, lambda_max, steps, 1)
}

/// [`scan`] split over `workers` threads; results keep grid order.
pub fn scan_parallel(
    system: &AssembledSystem,
    lambda_min: f64,
    lambda_max: f64,
    steps: usize,
    workers: usize,
) -> Result<Vec<ScanPoint>> {
    let grid = scan_grid(lambda_min, lambda_max, steps)?;
    Ok(parallel_map(&grid, workers, |&l| scan_point(system, l)))
}

/// Order-preserving map over contiguous blocks on scoped threads.
pub fn parallel_map<T: Sync, U: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let block = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(block)
            .map(|chunk| scope.spawn(|| chunk.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Grid points where `N` is below both neighbours.
pub fn scan_minima(points: &[ScanPoint]) -> Vec<f64> {
    points
        .windows(3)
        .filter(|w| w.iter().all(|p| p.factorization_ok) && w[1].norm_sq < w[0].norm_sq && w[1].norm_sq < w[2].norm_sq)
        .map(|w| w[1].lambda)
        .collect()
}

/// Row entries `c_j(n)` of `C(λ)` for every row at basis index `n`.
fn column_entries(system: &AssembledSystem, lambda: f64, n: usize, coeffs: &[(crate::fourier_space::SymbolCoeffs, Option<crate::fourier_space::SymbolCoeffs>)], out: &mut [Complex64]) {
    let omega = system.spec.frequency(n);
    let w = system.weights.inv_sqrt_weight(omega);
    for ((row, (c0, c1)), o) in system.rows.iter().zip(coeffs).zip(out.iter_mut()) {
        let mut p = c0.eval(omega);
        if let Some(c1) = c1 {
            p += c1.eval(omega) * lambda;
        }
        *o = p * Complex64::from_polar(w, dot(omega, row.point));
    }
}

fn row_coefficients(system: &AssembledSystem) -> Result<Vec<(crate::fourier_space::SymbolCoeffs, Option<crate::fourier_space::SymbolCoeffs>)>> {
    if system.rows.len() != system.len() {
        return Err(Error::MissingGeometry("system carries no row metadata"));
    }
    system
        .rows
        .iter()
        .map(|r| Ok((r.sym0.coefficients()?, r.sym1.as_ref().map(|s| s.coefficients()).transpose()?)))
        .collect()
}

/// Basis coefficients `a = C(λ)ᴴβ`.
pub fn coefficients(system: &AssembledSystem, solve: &SolveResult) -> Result<Vec<Complex64>> {
    let coeffs = row_coefficients(system)?;
    let mut col = vec![Complex64::new(0.0, 0.0); system.len()];
    Ok((0..system.spec.len())
        .map(|n| {
            column_entries(system, solve.lambda, n, &coeffs, &mut col);
            col.iter().zip(&solve.beta).map(|(c, b)| c.conj() * b).sum()
        })
        .collect())
}

/// Fills `coeffs` and the constraint residual `max_j |(C(λ)a − g)_j|`.
pub fn attach_coefficients(system: &AssembledSystem, solve: &mut SolveResult) -> Result<()> {
    let a = coefficients(system, solve)?;
    let coeffs = row_coefficients(system)?;
    let mut applied = vec![Complex64::new(0.0, 0.0); system.len()];
    let mut col = vec![Complex64::new(0.0, 0.0); system.len()];
    for (n, an) in a.iter().enumerate() {
        column_entries(system, solve.lambda, n, &coeffs, &mut col);
        for (acc, c) in applied.iter_mut().zip(&col) {
            *acc += c * an;
        }
    }
    let residual = applied
        .iter()
        .zip(&system.g)
        .map(|(u, g)| (u - g).norm())
        .fold(0.0, f64::max);
    solve.coeffs = Some(a);
    solve.residual = Some(residual);
    Ok(())
}

/// `u_λ(x) = Σ_n a_n d_n^{-1/2} e^{iω_n·x}` at each point.
pub fn eigenfunction(system: &AssembledSystem, solve: &SolveResult, points: &[Point]) -> Result<Vec<Complex64>> {
    let owned;
    let a = match &solve.coeffs {
        Some(a) => a,
        None => {
            owned = coefficients(system, solve)?;
            &owned
        }
    };
    Ok(points
        .iter()
        .map(|&x| {
            a.iter()
                .enumerate()
                .map(|(n, an)| {
                    let omega = system.spec.frequency(n);
                    an * Complex64::from_polar(system.weights.inv_sqrt_weight(omega), dot(omega, x))
                })
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AtLeastNa,
    NotNa,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub lambda: f64,
    pub n_anchors: usize,
    pub n1: usize,
    pub n2: usize,
    pub norm_sq1: f64,
    pub norm_sq2: f64,
    pub ratio: f64,
    pub verdict: Verdict,
}

pub const DEFAULT_CUTOFF: f64 = 1.25;

/// Clouds and assembled system for a problem.
pub fn build_system(problem: &ProblemSpec, opts: &AssemblyOptions) -> Result<(ProblemClouds, AssembledSystem)> {
    let clouds = generate_clouds(problem)?;
    let rows = build_rows(problem, &clouds)?;
    let system = assemble(&rows, &problem.basis_spec, &problem.weight_params, opts)?;
    Ok((clouds, system))
}

/// Ratio `‖u^{(n2)}‖ / ‖u^{(n1)}‖` at fixed `λ` with `n_anchors` random
/// anchors, on nested clouds (the `n1` cloud is a prefix of the `n2` cloud).
///
/// A ratio at or below `cutoff` indicates multiplicity at least
/// `n_anchors`; a ratio below one beyond roundoff is reported as
/// inconclusive.
#[allow(clippy::too_many_arguments)]
pub fn multiplicity_ratio(
    problem: &ProblemSpec,
    lambda: f64,
    n_anchors: usize,
    n1: usize,
    n2: usize,
    seed: u64,
    cutoff: f64,
    opts: &AssemblyOptions,
) -> Result<MultiplicityReport> {
    Ok(multiplicity_ratios(problem, lambda, &[n_anchors], n1, n2, seed, cutoff, opts)?.remove(0))
}

/// [`multiplicity_ratio`] for several anchor counts sharing one cloud and
/// one assembly; the anchors for a smaller count are a prefix of the
/// anchors for a larger one.
#[allow(clippy::too_many_arguments)]
pub fn multiplicity_ratios(
    problem: &ProblemSpec,
    lambda: f64,
    anchor_counts: &[usize],
    n1: usize,
    n2: usize,
    seed: u64,
    cutoff: f64,
    opts: &AssemblyOptions,
) -> Result<Vec<MultiplicityReport>> {
    let max_anchors = anchor_counts.iter().copied().max().unwrap_or(0);
    if !(n2 > n1 && n1 >= 1 && anchor_counts.iter().all(|&k| k >= 1) && max_anchors >= 1) {
        return Err(Error::InvalidArgument("multiplicity needs n2 > n1 >= 1 and n_anchors >= 1".into()));
    }
    let Family::LbClosedSurface { use_curvature } = problem.family else {
        return Err(Error::InvalidArgument("multiplicity test is defined for closed surfaces".into()));
    };
    let params = CloudParams::new(n2, seed).with_multiplier(problem.candidate_multiplier);
    let mut cloud = generate_boundary_cloud(&problem.shape, &params)?;
    if use_curvature {
        cloud = cloud.with_curvature(&problem.shape)?;
    }
    let (anchors, values) = random_anchors(&problem.shape, max_anchors, seed ^ ANCHOR_STREAM)?;
    let clouds = ProblemClouds {
        interior: cloud.clone(),
        boundary: PointCloud::default(),
        anchors,
        anchor_values: values,
    };
    let rows = rows_at_lambda(&build_rows(problem, &clouds)?, lambda);
    let adjoint = real_adjoint(&rows, &problem.basis_spec, &problem.weight_params, opts)?;
    let inner = &cloud.points[..n1];
    let first_anchor = rows.len() - max_anchors;
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..first_anchor).partition(|&i| inner.contains(&rows[i].point));
    anchor_counts
        .iter()
        .map(|&k| {
            let order: Vec<usize> = kept
                .iter()
                .copied()
                .chain(first_anchor..first_anchor + k)
                .chain(dropped.iter().copied())
                .collect();
            let g: Vec<f64> = order.iter().map(|&i| rows[i].rhs.re).collect();
            let (norm_sq1, norm_sq2) = nested_norms(&adjoint, &order, &g, kept.len() + k, lambda)?;
            let ratio = (norm_sq2 / norm_sq1).sqrt();
            let verdict = if ratio < 1.0 - 1e-6 {
                Verdict::Inconclusive
            } else if ratio <= cutoff {
                Verdict::AtLeastNa
            } else {
                Verdict::NotNa
            };
            Ok(MultiplicityReport {
                lambda,
                n_anchors: k,
                n1,
                n2,
                norm_sq1,
                norm_sq2,
                ratio,
                verdict,
            })
        })
        .collect()
}

/// `N` for the leading `lead` constraints of `order` and for all of them,
/// from one QR factorization of the reordered columns of `B`: with
/// `B = QR`, `Φ = RᵀR` and every leading principal block of `Φ` is
/// factored by the matching block of `R`.
fn nested_norms(adjoint: &Mat<f64>, order: &[usize], g: &[f64], lead: usize, lambda: f64) -> Result<(f64, f64)> {
    let b = Mat::from_fn(adjoint.nrows(), order.len(), |i, j| adjoint[(i, order[j])]);
    let r = b.qr().thin_R().to_owned();
    if let Some(pivot) = (0..r.nrows()).find(|&i| !(r[(i, i)].abs() > 0.0)) {
        return Err(Error::NotPositiveDefinite { lambda, pivot });
    }
    let norm = |m: usize| {
        let mut y = Mat::from_fn(m, 1, |i, _| g[i]);
        solve_lower_triangular_in_place(r.as_ref().submatrix(0, 0, m, m).transpose(), y.as_mut(), Par::Seq);
        (0..m).map(|i| y[(i, 0)] * y[(i, 0)]).sum::<f64>()
    };
    Ok((norm(lead), norm(order.len())))
}

const ANCHOR_STREAM: u64 = 0x5eed_a11c;

pub fn write_scan_csv<W: Write>(points: &[ScanPoint], comments: &[String], mut out: W) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "lambda,norm_sq,dnorm_sq,factorization_ok")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.lambda, p.norm_sq, p.dnorm_sq, p.factorization_ok)?;
    }
    Ok(())
}

pub fn write_newton_trace_csv<W: Write>(result: &NewtonResult, comments: &[String], mut out: W) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "iter,lambda,norm_sq,d1,d2,step")?;
    for s in &result.history {
        writeln!(out, "{},{},{},{},{},{}", s.iter, s.lambda, s.norm_sq, s.d1, s.d2, s.step)?;
    }
    Ok(())
}
