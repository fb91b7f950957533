//! One-dimensional Simpson quadrature for the profile constants.

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

pub fn composite_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels > 0);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        acc += simpson(&f, x0, x0 + h);
    }
    acc
}

/// Adaptive Simpson with absolute tolerance, Richardson-corrected.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, m, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, right, 0.5 * tol, depth - 1)
    }
    let whole = simpson(&f, a, b);
    recurse(&f, a, b, whole, tol, 48)
}
