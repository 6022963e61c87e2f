//! Finite-difference application of operator symbols, used as an oracle.

use num_complex::Complex64;

use crate::fourier_space::OperatorSymbol;
use crate::vec3::{add, scale, Point};

fn second_difference(f: &dyn Fn(Point) -> Complex64, x: Point, dir: Point, h: f64) -> Complex64 {
    (f(add(x, scale(dir, h))) - f(x) * 2.0 + f(add(x, scale(dir, -h)))) / (h * h)
}

/// Applies the differential operator described by `sym` to `f` at `x` with
/// central differences of step `h`.
pub fn fd_apply(sym: &OperatorSymbol, f: &dyn Fn(Point) -> Complex64, x: Point, h: f64) -> Complex64 {
    const AXES: [Point; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    match sym {
        OperatorSymbol::Identity => f(x),
        OperatorSymbol::ScalarMultiple(c) => f(x) * *c,
        OperatorSymbol::GradientDir(v) => (f(add(x, scale(*v, h))) - f(add(x, scale(*v, -h)))) / (2.0 * h),
        OperatorSymbol::Laplacian => AXES.iter().map(|&e| second_difference(f, x, e, h)).sum(),
        OperatorSymbol::NegLaplacian => -AXES.iter().map(|&e| second_difference(f, x, e, h)).sum::<Complex64>(),
        OperatorSymbol::NormalHessian(n) => second_difference(f, x, *n, h),
        OperatorSymbol::Sum(terms) => terms.iter().map(|(c, s)| fd_apply(s, f, x, h) * *c).sum(),
    }
}
