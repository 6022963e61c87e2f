//! Minimal fixed-size vector helpers. Every position, normal and frequency
//! is stored as `[f64; 3]`; planar problems leave the last component at zero.

pub type Point = [f64; 3];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn dist_sq(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

/// Returns `None` for vectors too short to normalize.
pub fn normalized(a: Point) -> Option<Point> {
    let n = norm(a);
    (n > f64::MIN_POSITIVE && n.is_finite()).then(|| scale(a, 1.0 / n))
}
