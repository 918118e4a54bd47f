//! Test-only independent integration oracles. Deliberately separate from
//! [`crate::quad`]: adaptive Simpson with manual singularity splitting, so
//! the production Gauss-Kronrod path is cross-checked by a different method.

/// Recursive adaptive Simpson on [a, b].
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson_rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fa = f(a);
        let fm = f(m);
        let fb = f(b);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fa, fm, fb)
    }
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, left, fa, flm, fm, 0.6 * tol, depth - 1)
                + rec(f, m, b, right, fm, frm, fb, 0.6 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (whole, fa, fm, fb) = simpson_rule(f, a, b);
    rec(f, a, b, whole, fa, fm, fb, tol, 22)
}

/// Simpson over [a, inf) via geometric panels until relative convergence.
pub fn simpson_tail<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        let piece = simpson(f, lo, hi, tol / 8.0);
        total += piece;
        if piece.abs() < tol * total.abs().max(1e-300) {
            break;
        }
        lo = hi;
    }
    total
}
