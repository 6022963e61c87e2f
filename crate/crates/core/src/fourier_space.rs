//! Truncated, weighted Fourier-extension space on a box.
//!
//! The space is spanned by `d_n^{-1/2} e^{i ω_n·x}` for the frequencies of a
//! full cube of lattice indices `|k_i| <= K`, `ω_i = 2π k_i / L_i`. The
//! weights `d_n = exp(2q(√(2π/T) + √‖ω_n‖))` make every element smooth, and
//! only `d_n^{-1/2}` is ever materialized in the assembly path.
//!
//! Differential operators with real coefficients act on a single exponential
//! by multiplication with a symbol `p(ω)`, which is what [`OperatorSymbol`]
//! describes. Every symbol used by the eigenproblem families is a polynomial
//! of degree at most two in `ω`, so it compiles to a [`SymbolCoeffs`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{dot, norm, Point};

/// Largest basis the lattice enumeration accepts.
pub const MAX_BASIS_LEN: usize = u32::MAX as usize;

/// Tolerance on the 2-norm of direction vectors carried by symbols.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Truncated Fourier basis on `Ω = ∏ [-L_i/2, L_i/2]`.
///
/// Basis functions are enumerated lexicographically in `(k_1, …, k_m)` with
/// `k_1` varying slowest and each `k_i` running from `-K` to `K`. With this
/// order the mirror of index `n` (the frequency `-ω_n`) is `N_b - 1 - n` and
/// the zero frequency sits at `(N_b - 1) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub side_lengths: Vec<f64>,
    pub max_index: usize,
}

impl BasisSpec {
    pub fn new(side_lengths: Vec<f64>, max_index: usize) -> Result<Self> {
        let spec = Self {
            side_lengths,
            max_index,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cube `[-L/2, L/2]^dims`.
    pub fn cube(dims: usize, side_length: f64, max_index: usize) -> Result<Self> {
        Self::new(vec![side_length; dims], max_index)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.side_lengths.len();
        if !(1..=3).contains(&dims) {
            return Err(Error::InvalidBasis(format!(
                "box must have 1 to 3 dimensions, got {dims}"
            )));
        }
        if let Some(l) = self
            .side_lengths
            .iter()
            .find(|l| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::InvalidBasis(format!(
                "side lengths must be positive and finite, got {l}"
            )));
        }
        self.checked_len()
            .map(|_| ())
            .ok_or_else(|| Error::InvalidBasis(format!("(2K+1)^{dims} overflows for K = {}", self.max_index)))
    }

    fn checked_len(&self) -> Option<usize> {
        let per_dim = self.max_index.checked_mul(2)?.checked_add(1)?;
        let total = per_dim.checked_pow(self.side_lengths.len() as u32)?;
        (total <= MAX_BASIS_LEN).then_some(total)
    }

    pub fn dims(&self) -> usize {
        self.side_lengths.len()
    }

    /// Number of modes per dimension, `2K + 1`.
    pub fn modes_per_dim(&self) -> usize {
        2 * self.max_index + 1
    }

    /// Number of basis functions `N_b`. Assumes a validated spec.
    pub fn len(&self) -> usize {
        self.modes_per_dim().pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Index of the frequency `-ω_n`.
    pub fn mirror(&self, n: usize) -> usize {
        self.len() - 1 - n
    }

    /// Integer lattice coordinates `(k_1, …, k_m)` of basis function `n`,
    /// padded with zeros to three entries.
    pub fn lattice(&self, n: usize) -> [i64; 3] {
        let m = self.modes_per_dim();
        let k = self.max_index as i64;
        let mut out = [0i64; 3];
        let mut rest = n;
        for d in (0..self.dims()).rev() {
            out[d] = (rest % m) as i64 - k;
            rest /= m;
        }
        out
    }

    /// Angular frequency per unit lattice step in each dimension, `2π / L_i`.
    pub fn fundamental(&self) -> Point {
        let mut out = [0.0; 3];
        for (o, l) in out.iter_mut().zip(&self.side_lengths) {
            *o = 2.0 * std::f64::consts::PI / l;
        }
        out
    }

    pub fn frequency(&self, n: usize) -> Point {
        let k = self.lattice(n);
        let f = self.fundamental();
        [k[0] as f64 * f[0], k[1] as f64 * f[1], k[2] as f64 * f[2]]
    }
}

/// Lists all `N_b` frequency vectors in enumeration order.
pub fn enumerate_frequencies(spec: &BasisSpec) -> Result<Vec<Point>> {
    spec.validate()?;
    Ok((0..spec.len()).map(|n| spec.frequency(n)).collect())
}

/// Smoothness weight parameters: exponent `q` and oscillation width `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub q: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl WeightParams {
    pub fn new(q: f64, t: f64) -> Result<Self> {
        let params = Self { q, t };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q > 0.0 && self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight parameters must be positive, got q = {}, T = {}",
                self.q, self.t
            )));
        }
        Ok(())
    }

    /// `ln d(ω) = 2q(√(2π/T) + √‖ω‖)`.
    pub fn log_weight(&self, omega: Point) -> f64 {
        2.0 * self.q * ((2.0 * std::f64::consts::PI / self.t).sqrt() + norm(omega).sqrt())
    }

    /// `d(ω)^{-1/2}`, always representable.
    pub fn inv_sqrt_weight(&self, omega: Point) -> f64 {
        (-0.5 * self.log_weight(omega)).exp()
    }
}

/// The weight `d(ω)`.
///
/// `d` is finite in double precision while its exponent stays below
/// `ln(f64::MAX) ≈ 709.78`. The largest enumerated frequency has norm
/// `2πK (Σ_i L_i^{-2})^{1/2}` (see [`max_log_weight`]); large `q` combined with
/// large `K` overflows here even though `d^{-1/2}` stays representable.
pub fn weight(omega: Point, params: &WeightParams) -> Result<f64> {
    params.validate()?;
    let exponent = params.log_weight(omega);
    let d = exponent.exp();
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::WeightOverflow { exponent })
    }
}

/// `ln d` at the largest frequency of `spec`, the quantity that must stay below
/// `ln(f64::MAX)` for [`weight`] to succeed on every basis function.
pub fn max_log_weight(spec: &BasisSpec, params: &WeightParams) -> f64 {
    let f = spec.fundamental();
    let k = spec.max_index as f64;
    let corner = [k * f[0], k * f[1], k * f[2]];
    params.log_weight(corner)
}

/// Fourier multiplier of a linear differential operator with real
/// coefficients: applying the operator to `e^{iω·x}` yields `p(ω) e^{iω·x}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSymbol {
    /// `u`
    Identity,
    /// `v·∇u`, `p = i(v·ω)`
    GradientDir(Point),
    /// `Δu`, `p = -‖ω‖²`
    Laplacian,
    /// `-Δu`, `p = ‖ω‖²`
    NegLaplacian,
    /// `n·(D²u)n`, `p = -(n·ω)²`
    NormalHessian(Point),
    /// `c u`
    ScalarMultiple(f64),
    /// `Σ c_k S_k u`
    Sum(Vec<(f64, OperatorSymbol)>),
}

impl OperatorSymbol {
    /// `self + other`, flattening nested sums.
    pub fn plus(self, other: OperatorSymbol) -> OperatorSymbol {
        self.plus_scaled(1.0, other)
    }

    /// `self + c·other`, flattening nested sums.
    pub fn plus_scaled(self, c: f64, other: OperatorSymbol) -> OperatorSymbol {
        let mut terms = match self {
            OperatorSymbol::Sum(terms) => terms,
            s => vec![(1.0, s)],
        };
        match other {
            OperatorSymbol::Sum(more) => terms.extend(more.into_iter().map(|(k, s)| (c * k, s))),
            s => terms.push((c, s)),
        }
        OperatorSymbol::Sum(terms)
    }

    pub fn scaled(self, c: f64) -> OperatorSymbol {
        OperatorSymbol::Sum(vec![(c, self)])
    }

    /// Checks that every direction vector has unit length.
    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSymbol::GradientDir(v) | OperatorSymbol::NormalHessian(v) => {
                let n = norm(*v);
                if (n - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(Error::NonUnitDirection { norm: n });
                }
                Ok(())
            }
            OperatorSymbol::Sum(terms) => terms.iter().try_for_each(|(_, s)| s.validate()),
            _ => Ok(()),
        }
    }

    /// Polynomial coefficients of the symbol.
    pub fn coefficients(&self) -> Result<SymbolCoeffs> {
        self.validate()?;
        let mut out = SymbolCoeffs::default();
        self.accumulate(1.0, &mut out);
        Ok(out)
    }

    fn accumulate(&self, c: f64, out: &mut SymbolCoeffs) {
        match self {
            OperatorSymbol::Identity => out.constant += c,
            OperatorSymbol::ScalarMultiple(s) => out.constant += c * s,
            OperatorSymbol::GradientDir(v) => {
                for i in 0..3 {
                    out.gradient[i] += c * v[i];
                }
            }
            OperatorSymbol::Laplacian => {
                for i in 0..3 {
                    out.hessian[i][i] += c;
                }
            }
            OperatorSymbol::NegLaplacian => {
                for i in 0..3 {
                    out.hessian[i][i] -= c;
                }
            }
            OperatorSymbol::NormalHessian(n) => {
                for i in 0..3 {
                    for j in 0..3 {
                        out.hessian[i][j] += c * n[i] * n[j];
                    }
                }
            }
            OperatorSymbol::Sum(terms) => {
                for (k, s) in terms {
                    s.accumulate(c * k, out);
                }
            }
        }
    }
}

/// Evaluates `p(ω)` directly from the symbol tree.
pub fn symbol_eval(sym: &OperatorSymbol, omega: Point) -> Result<Complex64> {
    sym.validate()?;
    Ok(eval_tree(sym, omega))
}

fn eval_tree(sym: &OperatorSymbol, omega: Point) -> Complex64 {
    match sym {
        OperatorSymbol::Identity => Complex64::new(1.0, 0.0),
        OperatorSymbol::GradientDir(v) => Complex64::new(0.0, dot(*v, omega)),
        OperatorSymbol::Laplacian => Complex64::new(-dot(omega, omega), 0.0),
        OperatorSymbol::NegLaplacian => Complex64::new(dot(omega, omega), 0.0),
        OperatorSymbol::NormalHessian(n) => {
            let s = dot(*n, omega);
            Complex64::new(-s * s, 0.0)
        }
        OperatorSymbol::ScalarMultiple(c) => Complex64::new(*c, 0.0),
        OperatorSymbol::Sum(terms) => terms
            .iter()
            .map(|(c, s)| eval_tree(s, omega) * *c)
            .sum(),
    }
}

/// `p(ω) = constant + i gradient·ω − ωᵀ hessian ω`, the operator
/// `constant·u + gradient·∇u + tr(hessian D²u)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymbolCoeffs {
    pub constant: f64,
    pub gradient: Point,
    pub hessian: [[f64; 3]; 3],
}

impl SymbolCoeffs {
    pub fn is_zero(&self) -> bool {
        self.constant == 0.0
            && self.gradient.iter().all(|g| *g == 0.0)
            && self.hessian.iter().flatten().all(|h| *h == 0.0)
    }

    /// Real and imaginary parts of `p(ω)`.
    #[inline]
    pub fn eval_parts(&self, omega: Point) -> (f64, f64) {
        let h = &self.hessian;
        let mut quad = 0.0;
        for i in 0..3 {
            quad += omega[i] * (h[i][0] * omega[0] + h[i][1] * omega[1] + h[i][2] * omega[2]);
        }
        (self.constant - quad, dot(self.gradient, omega))
    }

    pub fn eval(&self, omega: Point) -> Complex64 {
        let (re, im) = self.eval_parts(omega);
        Complex64::new(re, im)
    }

    /// Coefficients of `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &SymbolCoeffs) -> SymbolCoeffs {
        let mut out = *self;
        out.constant += c * other.constant;
        for i in 0..3 {
            out.gradient[i] += c * other.gradient[i];
            for j in 0..3 {
                out.hessian[i][j] += c * other.hessian[i][j];
            }
        }
        out
    }
}
