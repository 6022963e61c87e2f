//! Constraint rows and the Gram blocks `Φ₀, Φ₁, Φ₂`.
//!
//! A row `j` evaluates `c_j(n) = d_n^{-1/2} p_j(ω_n) e^{iω_n·x_j}` for every
//! basis function, split into a λ-free part and a λ-coefficient part so that
//! `C(λ) = C₀ + λC₁`. The Gram matrix `Φ(λ) = C(λ)C(λ)ᴴ` expands into
//! `Φ₀ + λΦ₁ + λ²Φ₂`.
//!
//! Every supported symbol satisfies `p(−ω) = conj p(ω)`, and the basis is
//! closed under `ω → −ω`, so each pair `(ω, −ω)` contributes
//! `2 Re(c_j conj c_k)`. The blocks are therefore exactly real symmetric and
//! are accumulated from the real matrix whose columns are `√2 Re c`,
//! `√2 Im c` over half the lattice plus the zero frequency.

use std::io::Write;

use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier_space::{BasisSpec, OperatorSymbol, SymbolCoeffs, WeightParams};
use crate::vec3::{dot, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowTag {
    Interior,
    Boundary,
    Anchor,
    NormalAux,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub point: Point,
    pub sym0: OperatorSymbol,
    /// Coefficient of `λ`; `None` for λ-free rows.
    pub sym1: Option<OperatorSymbol>,
    pub rhs: Complex64,
    pub tag: RowTag,
}

impl ConstraintRow {
    pub fn homogeneous(point: Point, sym0: OperatorSymbol, sym1: Option<OperatorSymbol>, tag: RowTag) -> Self {
        Self {
            point,
            sym0,
            sym1,
            rhs: Complex64::new(0.0, 0.0),
            tag,
        }
    }

    /// `u(point) = value`.
    pub fn anchor(point: Point, value: f64) -> Self {
        Self {
            point,
            sym0: OperatorSymbol::Identity,
            sym1: None,
            rhs: Complex64::new(value, 0.0),
            tag: RowTag::Anchor,
        }
    }
}

/// `(c0, c1)` for row `row` and basis function `n`.
pub fn row_entry(row: &ConstraintRow, n: usize, spec: &BasisSpec, weights: &WeightParams) -> Result<(Complex64, Complex64)> {
    let omega = spec.frequency(n);
    let scale = weights.inv_sqrt_weight(omega);
    let phase = Complex64::from_polar(1.0, dot(omega, row.point));
    let c0 = row.sym0.coefficients()?.eval(omega) * phase * scale;
    let c1 = match &row.sym1 {
        Some(s) => s.coefficients()?.eval(omega) * phase * scale,
        None => Complex64::new(0.0, 0.0),
    };
    Ok((c0, c1))
}

/// Rows with `sym0 + λ·sym1` folded into `sym0`.
pub fn rows_at_lambda(rows: &[ConstraintRow], lambda: f64) -> Vec<ConstraintRow> {
    rows.iter()
        .map(|r| {
            let sym0 = match &r.sym1 {
                Some(s) => r.sym0.clone().plus_scaled(lambda, s.clone()),
                None => r.sym0.clone(),
            };
            ConstraintRow {
                sym0,
                sym1: None,
                ..r.clone()
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Real basis columns per chunk.
    pub chunk: usize,
    /// Bytes allowed for the per-chunk workspace.
    pub memory_budget: usize,
    /// Threads for the dense products; 1 runs sequentially.
    pub threads: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            chunk: 4096,
            memory_budget: 1 << 30,
            threads: 1,
        }
    }
}

impl AssemblyOptions {
    pub(crate) fn par(&self) -> Par {
        if self.threads > 1 {
            Par::rayon(self.threads)
        } else {
            Par::Seq
        }
    }
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub phi0: Mat<f64>,
    pub phi1: Mat<f64>,
    pub phi2: Mat<f64>,
    pub g: Vec<Complex64>,
    pub rows: Vec<ConstraintRow>,
    pub spec: BasisSpec,
    pub weights: WeightParams,
}

impl AssembledSystem {
    /// System from explicit blocks with no row metadata; the basis fields
    /// are placeholders, so only the solver paths that use `Φ` and `g` apply.
    pub fn from_blocks(phi0: Mat<f64>, phi1: Mat<f64>, phi2: Mat<f64>, g: Vec<Complex64>) -> Self {
        Self {
            phi0,
            phi1,
            phi2,
            g,
            rows: Vec::new(),
            spec: BasisSpec {
                side_lengths: vec![1.0],
                max_index: 0,
            },
            weights: WeightParams { q: 1.0, t: 1.0 },
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// `Φ₀ + λΦ₁ + λ²Φ₂`.
    pub fn phi_at(&self, lambda: f64) -> Mat<f64> {
        let r = self.len();
        Mat::from_fn(r, r, |i, j| {
            self.phi0[(i, j)] + lambda * self.phi1[(i, j)] + lambda * lambda * self.phi2[(i, j)]
        })
    }

    /// `2λΦ₂ + Φ₁`, the λ-derivative of `Φ(λ)`.
    pub fn dphi_at(&self, lambda: f64) -> Mat<f64> {
        let r = self.len();
        Mat::from_fn(r, r, |i, j| 2.0 * lambda * self.phi2[(i, j)] + self.phi1[(i, j)])
    }

    pub fn is_lambda_free(&self) -> bool {
        self.rows.iter().all(|r| r.sym1.is_none())
    }

    /// Little-endian dump: magic `b"NSPHI001"`, `u64` row count `R`, then
    /// `Φ₀`, `Φ₁`, `Φ₂` as row-major `R×R` complex doubles `(re, im)` and
    /// `g` as `R` complex doubles.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let r = self.len();
        out.write_all(b"NSPHI001")?;
        out.write_all(&(r as u64).to_le_bytes())?;
        for m in [&self.phi0, &self.phi1, &self.phi2] {
            for i in 0..r {
                for j in 0..r {
                    out.write_all(&m[(i, j)].to_le_bytes())?;
                    out.write_all(&0f64.to_le_bytes())?;
                }
            }
        }
        for v in &self.g {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Largest `|M − Mᵀ|` relative to the largest `|M|`.
pub fn symmetry_defect(m: MatRef<'_, f64>) -> f64 {
    let (mut defect, mut size) = (0.0f64, 0.0f64);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
            size = size.max(m[(i, j)].abs());
        }
    }
    if size == 0.0 {
        0.0
    } else {
        defect / size
    }
}

pub fn assemble(rows: &[ConstraintRow], spec: &BasisSpec, weights: &WeightParams, opts: &AssemblyOptions) -> Result<AssembledSystem> {
    spec.validate()?;
    weights.validate()?;
    let inv_sqrt: Vec<f64> = (0..spec.len())
        .map(|n| weights.inv_sqrt_weight(spec.frequency(n)))
        .collect();
    assemble_with_scales(rows, spec, weights, &inv_sqrt, opts)
}

/// Assembly with explicit per-basis factors `d_n^{-1/2}`.
pub fn assemble_with_scales(
    rows: &[ConstraintRow],
    spec: &BasisSpec,
    weights: &WeightParams,
    inv_sqrt: &[f64],
    opts: &AssemblyOptions,
) -> Result<AssembledSystem> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no constraint rows".into()));
    }
    if !rows.iter().any(|r| r.tag == RowTag::Anchor) {
        return Err(Error::InvalidArgument("at least one anchor row is required".into()));
    }
    if inv_sqrt.len() != spec.len() {
        return Err(Error::InvalidArgument("one weight per basis function is required".into()));
    }
    if opts.chunk == 0 {
        return Err(Error::InvalidArgument("chunk must be positive".into()));
    }
    let r = rows.len();
    let c0: Vec<SymbolCoeffs> = rows.iter().map(|row| row.sym0.coefficients()).collect::<Result<_>>()?;
    let lam_rows: Vec<usize> = (0..r).filter(|&i| rows[i].sym1.is_some()).collect();
    let c1: Vec<SymbolCoeffs> = lam_rows
        .iter()
        .map(|&i| rows[i].sym1.as_ref().unwrap().coefficients())
        .collect::<Result<_>>()?;
    let l = lam_rows.len();

    let chunk = opts.chunk.min(spec.len());
    let needed = 8 * chunk * (r + l);
    if needed > opts.memory_budget {
        return Err(Error::MemoryBudget {
            needed,
            budget: opts.memory_budget,
        });
    }

    let n_cols = spec.len();
    let par = opts.par();
    let mut phi0 = Mat::<f64>::zeros(r, r);
    let mut phi2 = Mat::<f64>::zeros(l, l);
    let mut cross = Mat::<f64>::zeros(r, l);
    let mut a0 = Mat::<f64>::zeros(r, chunk);
    let mut a1 = Mat::<f64>::zeros(l, chunk);

    let mut start = 0;
    while start < n_cols {
        let width = chunk.min(n_cols - start);
        for c in 0..width {
            let col = RealColumn::new(spec, inv_sqrt, start + c);
            for (i, row) in rows.iter().enumerate() {
                a0[(i, c)] = col.entry(&c0[i], row.point);
            }
            for (k, &i) in lam_rows.iter().enumerate() {
                a1[(k, c)] = col.entry(&c1[k], rows[i].point);
            }
        }
        let b0 = a0.as_ref().subcols(0, width);
        let b1 = a1.as_ref().subcols(0, width);
        syrk_lower(phi0.as_mut(), b0, par);
        if l > 0 {
            syrk_lower(phi2.as_mut(), b1, par);
            matmul(cross.as_mut(), Accum::Add, b0, b1.transpose(), 1.0, par);
        }
        start += width;
    }

    fill_upper(&mut phi0);
    fill_upper(&mut phi2);
    let mut phi1 = Mat::<f64>::zeros(r, r);
    let mut phi2_full = Mat::<f64>::zeros(r, r);
    for (a, &i) in lam_rows.iter().enumerate() {
        for j in 0..r {
            phi1[(j, i)] += cross[(j, a)];
            phi1[(i, j)] += cross[(j, a)];
        }
        for (b, &k) in lam_rows.iter().enumerate() {
            phi2_full[(i, k)] = phi2[(a, b)];
        }
    }

    Ok(AssembledSystem {
        phi0,
        phi1,
        phi2: phi2_full,
        g: rows.iter().map(|row| row.rhs).collect(),
        rows: rows.to_vec(),
        spec: spec.clone(),
        weights: *weights,
    })
}

/// Real basis column `k`: the zero frequency once, then `√2·Re` and `√2·Im`
/// parts for each frequency above it. Mirror frequencies contribute complex
/// conjugates, so these columns reproduce the real `Φ` blocks.
struct RealColumn {
    omega: Point,
    scale: f64,
    imag: bool,
}

impl RealColumn {
    fn new(spec: &BasisSpec, inv_sqrt: &[f64], k: usize) -> Self {
        let zero = spec.zero_index();
        let (n, imag) = if k == 0 { (zero, false) } else { (zero + k.div_ceil(2), k.is_multiple_of(2)) };
        let scale = if n == zero { inv_sqrt[n] } else { std::f64::consts::SQRT_2 * inv_sqrt[n] };
        Self {
            omega: spec.frequency(n),
            scale,
            imag,
        }
    }

    fn entry(&self, coeffs: &SymbolCoeffs, x: Point) -> f64 {
        let (p_re, p_im) = coeffs.eval_parts(self.omega);
        let (sin, cos) = dot(self.omega, x).sin_cos();
        if self.imag {
            self.scale * (p_re * sin + p_im * cos)
        } else {
            self.scale * (p_re * cos - p_im * sin)
        }
    }
}

/// Real `N_b × R` matrix `B` with `Φ = BᵀB` for λ-free rows. Its QR
/// factorization gives `N` without squaring the condition number.
pub fn real_adjoint(rows: &[ConstraintRow], spec: &BasisSpec, weights: &WeightParams, opts: &AssemblyOptions) -> Result<Mat<f64>> {
    if rows.iter().any(|r| r.sym1.is_some()) {
        return Err(Error::InvalidArgument("rows must be λ-free; fold λ in with rows_at_lambda".into()));
    }
    let needed = 8 * spec.len() * rows.len();
    if needed > opts.memory_budget {
        return Err(Error::MemoryBudget {
            needed,
            budget: opts.memory_budget,
        });
    }
    let coeffs: Vec<SymbolCoeffs> = rows.iter().map(|row| row.sym0.coefficients()).collect::<Result<_>>()?;
    let inv_sqrt: Vec<f64> = (0..spec.len())
        .map(|n| weights.inv_sqrt_weight(spec.frequency(n)))
        .collect();
    let mut b = Mat::<f64>::zeros(spec.len(), rows.len());
    for k in 0..spec.len() {
        let col = RealColumn::new(spec, &inv_sqrt, k);
        for (j, (row, c)) in rows.iter().zip(&coeffs).enumerate() {
            b[(k, j)] = col.entry(c, row.point);
        }
    }
    Ok(b)
}

fn syrk_lower(dst: faer::MatMut<'_, f64>, a: MatRef<'_, f64>, par: Par) {
    triangular::matmul(
        dst,
        BlockStructure::TriangularLower,
        Accum::Add,
        a,
        BlockStructure::Rectangular,
        a.transpose(),
        BlockStructure::Rectangular,
        1.0,
        par,
    );
}

fn fill_upper(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            m[(i, j)] = m[(j, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_space::weight;
    use crate::testutil::fd_apply;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_rows() -> Vec<ConstraintRow> {
        vec![
            ConstraintRow::homogeneous(
                [0.3, 0.0, 0.0],
                OperatorSymbol::NegLaplacian,
                Some(OperatorSymbol::Identity.scaled(-1.0)),
                RowTag::Interior,
            ),
            ConstraintRow::homogeneous(
                [-0.7, 0.0, 0.0],
                OperatorSymbol::GradientDir([1.0, 0.0, 0.0]),
                Some(OperatorSymbol::Identity.scaled(-1.0)),
                RowTag::Boundary,
            ),
            ConstraintRow::anchor([0.1, 0.0, 0.0], 1.0),
        ]
    }

    #[test]
    fn real_adjoint_reproduces_phi() {
        let spec = BasisSpec::cube(2, 4.0, 3).unwrap();
        let weights = WeightParams::new(1.0, 1.0).unwrap();
        let rows = rows_at_lambda(&small_rows(), 2.5);
        let system = assemble(&rows, &spec, &weights, &AssemblyOptions::default()).unwrap();
        let b = real_adjoint(&rows, &spec, &weights, &AssemblyOptions::default()).unwrap();
        assert_eq!((b.nrows(), b.ncols()), (spec.len(), rows.len()));
        let gram = b.transpose() * &b;
        let scale = (0..rows.len()).map(|i| system.phi0[(i, i)]).fold(0.0, f64::max);
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                assert!((gram[(i, j)] - system.phi0[(i, j)]).abs() <= 1e-13 * scale);
            }
        }
        assert!(real_adjoint(&small_rows(), &spec, &weights, &AssemblyOptions::default()).is_err());
    }

    fn spec_1d() -> (BasisSpec, WeightParams) {
        (BasisSpec::new(vec![3.0], 2).unwrap(), WeightParams::new(0.5, 2.0).unwrap())
    }

    #[test]
    fn anchor_only_block() {
        let (spec, w) = spec_1d();
        let sys = assemble(&[ConstraintRow::anchor([0.2, 0.0, 0.0], 2.0)], &spec, &w, &AssemblyOptions::default()).unwrap();
        let expect: f64 = (0..spec.len()).map(|n| 1.0 / weight(spec.frequency(n), &w).unwrap()).sum();
        assert!((sys.phi0[(0, 0)] - expect).abs() <= 1e-15 * expect);
        assert_eq!(sys.phi1[(0, 0)], 0.0);
        assert_eq!(sys.phi2[(0, 0)], 0.0);
        assert_eq!(sys.g, vec![Complex64::new(2.0, 0.0)]);
    }

    #[test]
    fn row_entry_examples() {
        let spec = BasisSpec::new(vec![4.0, 4.0, 4.0], 3).unwrap();
        let w = WeightParams::new(4.0, 4.0).unwrap();
        let anchor = ConstraintRow::anchor([0.0; 3], 1.0);
        let z = spec.zero_index();
        let (c0, c1) = row_entry(&anchor, z, &spec, &w).unwrap();
        let d0 = weight([0.0; 3], &w).unwrap();
        assert!((c0 - Complex64::new(d0.powf(-0.5), 0.0)).norm() < 1e-15 * c0.norm());
        assert_eq!(c1, Complex64::new(0.0, 0.0));

        // ω = (2π/4)(k) with ‖ω‖² = 9 needs k with (π/2)²‖k‖² = 9; instead
        // use a box where the lattice lands on (0, 3, 0).
        let spec = BasisSpec::new(vec![2.0 * std::f64::consts::PI; 3], 3).unwrap();
        let n = (0..spec.len()).find(|&n| spec.frequency(n) == [0.0, 3.0, 0.0]).unwrap();
        let row = ConstraintRow::homogeneous(
            [0.0; 3],
            OperatorSymbol::NegLaplacian,
            Some(OperatorSymbol::Identity.scaled(-1.0)),
            RowTag::Interior,
        );
        let (c0, c1) = row_entry(&row, n, &spec, &w).unwrap();
        let s = weight([0.0, 3.0, 0.0], &w).unwrap().powf(-0.5);
        assert!((c0 - Complex64::new(9.0 * s, 0.0)).norm() < 1e-14 * c0.norm());
        assert!((c1 - Complex64::new(-s, 0.0)).norm() < 1e-14 * s);
    }

    #[test]
    fn row_entry_matches_finite_differences() {
        let spec = BasisSpec::new(vec![4.0, 4.0, 4.0], 4).unwrap();
        let w = WeightParams::new(1.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = crate::vec3::normalized([0.3, -0.5, 0.8]).unwrap();
        let sym0 = OperatorSymbol::NegLaplacian
            .plus(OperatorSymbol::NormalHessian(v))
            .plus_scaled(0.7, OperatorSymbol::GradientDir(v));
        let sym1 = OperatorSymbol::Identity.scaled(-1.0);
        for _ in 0..10 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = rng.random_range(0..spec.len());
            let lambda: f64 = rng.random_range(-5.0..5.0);
            let row = ConstraintRow::homogeneous(x, sym0.clone(), Some(sym1.clone()), RowTag::Interior);
            let (c0, c1) = row_entry(&row, n, &spec, &w).unwrap();
            let omega = spec.frequency(n);
            let s = weight(omega, &w).unwrap().powf(-0.5);
            let f = |y: Point| Complex64::from_polar(s, dot(omega, y));
            let combined = sym0.clone().plus_scaled(lambda, sym1.clone());
            let fd = fd_apply(&combined, &f, x, 4e-5);
            let got = c0 + c1 * lambda;
            assert!((got - fd).norm() <= 1e-6 * got.norm().max(s), "{got} vs {fd}");
        }
    }

    /// Direct complex double sum `Σ_n c_j(n) conj c_k(n)`.
    fn brute_force(rows: &[ConstraintRow], spec: &BasisSpec, w: &WeightParams) -> [Vec<Vec<Complex64>>; 3] {
        let r = rows.len();
        let mut out = [vec![vec![Complex64::new(0.0, 0.0); r]; r], vec![vec![Complex64::new(0.0, 0.0); r]; r], vec![vec![Complex64::new(0.0, 0.0); r]; r]];
        for n in 0..spec.len() {
            let omega = spec.frequency(n);
            let s = 1.0 / weight(omega, w).unwrap().sqrt();
            let c = |row: &ConstraintRow, sym: Option<&OperatorSymbol>| match sym {
                Some(sym) => crate::fourier_space::symbol_eval(sym, omega).unwrap()
                    * Complex64::new(0.0, omega[0] * row.point[0]).exp()
                    * s,
                None => Complex64::new(0.0, 0.0),
            };
            for j in 0..r {
                for k in 0..r {
                    let (a0, a1) = (c(&rows[j], Some(&rows[j].sym0)), c(&rows[j], rows[j].sym1.as_ref()));
                    let (b0, b1) = (c(&rows[k], Some(&rows[k].sym0)), c(&rows[k], rows[k].sym1.as_ref()));
                    out[0][j][k] += a0 * b0.conj();
                    out[1][j][k] += a0 * b1.conj() + a1 * b0.conj();
                    out[2][j][k] += a1 * b1.conj();
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_double_sum() {
        let (spec, w) = spec_1d();
        let rows = small_rows();
        let sys = assemble(&rows, &spec, &w, &AssemblyOptions::default()).unwrap();
        let oracle = brute_force(&rows, &spec, &w);
        for (m, o) in [&sys.phi0, &sys.phi1, &sys.phi2].into_iter().zip(&oracle) {
            for j in 0..3 {
                for k in 0..3 {
                    let scale = o[j][j].norm().max(o[k][k].norm()).max(1e-300);
                    assert!((Complex64::new(m[(j, k)], 0.0) - o[j][k]).norm() <= 1e-12 * scale.max(1.0));
                }
            }
        }
    }

    fn max_rel_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
        let mut size = 0.0f64;
        let mut diff = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                size = size.max(a[(i, j)].abs());
                diff = diff.max((a[(i, j)] - b[(i, j)]).abs());
            }
        }
        diff / size.max(f64::MIN_POSITIVE)
    }

    fn random_rows(n: usize, seed: u64) -> Vec<ConstraintRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for i in 0..n {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0];
            let v = crate::vec3::normalized([x[0], x[1], 0.0]).unwrap();
            rows.push(match i % 3 {
                0 => ConstraintRow::homogeneous(x, OperatorSymbol::Laplacian, None, RowTag::Interior),
                1 => ConstraintRow::homogeneous(
                    x,
                    OperatorSymbol::GradientDir(v),
                    Some(OperatorSymbol::Identity.scaled(-1.0)),
                    RowTag::Boundary,
                ),
                _ => ConstraintRow::homogeneous(
                    x,
                    OperatorSymbol::NegLaplacian.plus(OperatorSymbol::NormalHessian(v)),
                    Some(OperatorSymbol::Identity.scaled(-1.0)),
                    RowTag::Interior,
                ),
            });
        }
        rows.push(ConstraintRow::anchor([0.5, 0.5, 0.0], 1.0));
        rows
    }

    #[test]
    fn chunking_does_not_change_blocks() {
        let spec = BasisSpec::new(vec![4.0, 4.0], 6).unwrap();
        let w = WeightParams::new(2.0, 2.0).unwrap();
        let rows = random_rows(14, 3);
        let full = assemble(&rows, &spec, &w, &AssemblyOptions { chunk: spec.len(), ..Default::default() }).unwrap();
        let one = assemble(&rows, &spec, &w, &AssemblyOptions { chunk: 1, ..Default::default() }).unwrap();
        let odd = assemble(&rows, &spec, &w, &AssemblyOptions { chunk: 17, ..Default::default() }).unwrap();
        for (a, b) in [(&full.phi0, &one.phi0), (&full.phi1, &one.phi1), (&full.phi2, &one.phi2), (&full.phi0, &odd.phi0)] {
            assert!(max_rel_diff(a, b) <= 1e-12);
        }
    }

    #[test]
    fn memory_budget_is_enforced() {
        let spec = BasisSpec::new(vec![4.0, 4.0], 6).unwrap();
        let w = WeightParams::new(2.0, 2.0).unwrap();
        let opts = AssemblyOptions { memory_budget: 100, ..Default::default() };
        assert!(matches!(assemble(&random_rows(5, 1), &spec, &w, &opts), Err(Error::MemoryBudget { .. })));
        let no_anchor = random_rows(5, 1)[..5].to_vec();
        assert!(assemble(&no_anchor, &spec, &w, &AssemblyOptions::default()).is_err());
    }

    #[test]
    fn weight_scaling_scales_blocks() {
        let spec = BasisSpec::new(vec![4.0, 4.0], 5).unwrap();
        let w = WeightParams::new(2.0, 2.0).unwrap();
        let rows = random_rows(8, 5);
        let base: Vec<f64> = (0..spec.len()).map(|n| w.inv_sqrt_weight(spec.frequency(n))).collect();
        // d_n → 4 d_n halves every d_n^{-1/2}.
        let scaled: Vec<f64> = base.iter().map(|s| s / 2.0).collect();
        let opts = AssemblyOptions::default();
        let a = assemble_with_scales(&rows, &spec, &w, &base, &opts).unwrap();
        let b = assemble_with_scales(&rows, &spec, &w, &scaled, &opts).unwrap();
        for (x, y) in [(&a.phi0, &b.phi0), (&a.phi1, &b.phi1), (&a.phi2, &b.phi2)] {
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    assert_eq!(x[(i, j)] / 4.0, y[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn phi_at_matches_reassembly() {
        let spec = BasisSpec::new(vec![4.0, 4.0], 6).unwrap();
        let w = WeightParams::new(2.0, 2.0).unwrap();
        let rows = random_rows(10, 8);
        let opts = AssemblyOptions::default();
        let sys = assemble(&rows, &spec, &w, &opts).unwrap();
        assert_eq!(sys.phi_at(0.0), sys.phi0);
        let one = sys.phi_at(1.0);
        for i in 0..sys.len() {
            for j in 0..sys.len() {
                assert_eq!(one[(i, j)], sys.phi0[(i, j)] + sys.phi1[(i, j)] + sys.phi2[(i, j)]);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let lambda = rng.random_range(-20.0..20.0);
            let direct = assemble(&rows_at_lambda(&rows, lambda), &spec, &w, &opts).unwrap();
            let combined = sys.phi_at(lambda);
            assert!(max_rel_diff(&direct.phi0, &combined) <= 1e-10);
            assert!(symmetry_defect(combined.as_ref()) <= 1e-10);
            assert!(combined.llt(faer::Side::Lower).is_ok());
        }
    }

    #[test]
    fn binary_dump_layout() {
        let (spec, w) = spec_1d();
        let sys = assemble(&small_rows(), &spec, &w, &AssemblyOptions::default()).unwrap();
        let mut buf = Vec::new();
        sys.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * (3 * 9 + 3));
        assert_eq!(&buf[..8], b"NSPHI001");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        let first = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        assert_eq!(first, sys.phi0[(0, 0)]);
    }
}
