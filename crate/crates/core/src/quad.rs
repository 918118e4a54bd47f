//! One-dimensional quadrature: adaptive Gauss-Kronrod on finite intervals,
//! plus octave-decomposed integrators toward zero and toward infinity for
//! the singular / heavy-tailed radial integrands of Lévy measures.
//!
//! Tail integrals classify convergence from the octave contributions
//! `I_k = int over [a 2^k, a 2^{k+1}]`. Geometric decay finishes early; when
//! the budget is exhausted the sequence is classified by a Raabe-type test
//! on `k (I_k / I_{k+1} - 1)`, which separates summable `1/k^2`-type octave
//! sequences from `1/(k log k)`-type ones that signal a divergent or
//! numerically uncertifiable integral.

use crate::error::{Error, Result};

/// 15-point Kronrod abscissae on [0, 1] side of [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_3,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// 7-point Gauss weights for the odd Kronrod abscissae (indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub err: f64,
}

impl Quad {
    pub const ZERO: Quad = Quad {
        value: 0.0,
        err: 0.0,
    };
}

/// One Gauss-Kronrod 15(7) panel on [a, b]: returns (kronrod, |K - G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptive Gauss-Kronrod on a finite interval with worst-segment splitting.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Quad {
    adaptive_scaled(f, a, b, abs_tol, 0.0, max_segments)
}

/// [`adaptive`] whose effective tolerance is
/// `max(abs_tol, rel_to_self * |initial estimate|)`.
fn adaptive_scaled<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_to_self: f64,
    max_segments: usize,
) -> Quad {
    if a == b {
        return Quad::ZERO;
    }
    let (v, e) = gk15(f, a, b);
    let abs_tol = abs_tol.max(rel_to_self * v.abs());
    let mut segs = vec![(a, b, v, e)];
    let mut total_err: f64 = e;
    while total_err > abs_tol && segs.len() < max_segments {
        // Split the segment with the largest error estimate.
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty segment list");
        let (sa, sb, _, se) = segs.swap_remove(idx);
        let sm = 0.5 * (sa + sb);
        let (v1, e1) = gk15(f, sa, sm);
        let (v2, e2) = gk15(f, sm, sb);
        total_err = total_err - se + e1 + e2;
        segs.push((sa, sm, v1, e1));
        segs.push((sm, sb, v2, e2));
        if sb - sa < 1e-15 * (1.0 + sa.abs()) {
            break; // interval exhausted at machine precision
        }
    }
    let value = segs.iter().map(|s| s.2).sum();
    Quad {
        value,
        err: total_err,
    }
}

/// Adaptive integration with a relative tolerance target.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Quad {
    let (rough, _) = gk15(f, a, b);
    let abs_tol = rel_tol * rough.abs().max(1e-300);
    adaptive(f, a, b, abs_tol, 256)
}

/// [`integrate_tail_with_floor`] without an absolute floor.
pub fn integrate_tail<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    rel_tol: f64,
    careful_until: f64,
) -> Result<Quad> {
    integrate_tail_with_floor(f, a, rel_tol, careful_until, 0.0)
}

const MAX_OCTAVES_UP: usize = 100;
const MAX_OCTAVES_DOWN: usize = 120;
/// Raabe statistic below this value means the octave sums decay too slowly
/// to certify a finite integral.
const RAABE_MIN: f64 = 1.5;
/// Largest acceptable extrapolated remainder relative to the accumulated
/// total when the octave budget is exhausted.
const REMAINDER_FRACTION_MAX: f64 = 0.05;

/// Integral of `f` over `[a, infinity)` by octave decomposition.
///
/// `careful_until` suppresses early termination until the octaves have
/// covered that radius, so profiles with zero stretches or late structure
/// (e.g. tabulated tables) are fully traversed before decay is trusted.
/// `abs_floor` is an absolute contribution scale below which octaves count
/// as negligible even when the accumulated total is itself tiny.
pub fn integrate_tail_with_floor<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    rel_tol: f64,
    careful_until: f64,
    abs_floor: f64,
) -> Result<Quad> {
    if a <= 0.0 {
        return Err(Error::InvalidRegion(format!(
            "tail integral needs a > 0, got {a}"
        )));
    }
    let mut total: f64 = 0.0;
    let mut err = 0.0;
    let mut octaves: Vec<f64> = Vec::with_capacity(MAX_OCTAVES_UP);
    let mut small_run = 0usize;
    for k in 0..MAX_OCTAVES_UP {
        let lo = a * (2f64).powi(k as i32);
        let hi = 2.0 * lo;
        // tolerance keyed to the octave's own scale until the total builds
        let tol_k = rel_tol / 16.0 * total.abs().max(1e-300);
        let panel = adaptive_scaled(f, lo, hi, tol_k, rel_tol / 16.0, 48);
        if !panel.value.is_finite() {
            return Err(Error::DivergentIntegral(format!(
                "non-finite octave contribution on [{lo:.3e}, {hi:.3e}]"
            )));
        }
        total += panel.value;
        err += panel.err;
        octaves.push(panel.value.abs());
        let floor = (rel_tol * total.abs()).max(abs_floor).max(1e-300) / 20.0;
        let small = panel.value.abs() <= floor;
        small_run = if small { small_run + 1 } else { 0 };
        if hi >= careful_until && small_run >= 2 {
            let tail_bound = geometric_remainder(&octaves);
            return Ok(Quad {
                value: total,
                err: err + tail_bound,
            });
        }
    }
    classify_exhausted_tail(total, err, &octaves)
}

/// Geometric bound on the remainder from the last observed octave ratio.
fn geometric_remainder(octaves: &[f64]) -> f64 {
    let n = octaves.len();
    if n < 2 {
        return 0.0;
    }
    let last = octaves[n - 1];
    let prev = octaves[n - 2];
    if prev <= 0.0 || last <= 0.0 {
        return 0.0;
    }
    let ratio = (last / prev).min(0.9);
    last * ratio / (1.0 - ratio)
}

fn classify_exhausted_tail(total: f64, err: f64, octaves: &[f64]) -> Result<Quad> {
    let window = 8.min(octaves.len());
    let start = octaves.len() - window;
    let tail = &octaves[start..];
    if tail.iter().all(|&v| v == 0.0) {
        return Ok(Quad { value: total, err });
    }
    // Rising contributions at the horizon: unambiguous divergence.
    for w in tail.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-9) {
            return Err(Error::DivergentIntegral(
                "octave contributions increase at the integration horizon".into(),
            ));
        }
    }
    // Raabe statistic k (I_k / I_{k+1} - 1) over the trailing window.
    let mut raabe: Vec<f64> = Vec::new();
    for (i, w) in tail.windows(2).enumerate() {
        let k = (start + i) as f64;
        if w[1] > 0.0 {
            raabe.push(k * (w[0] / w[1] - 1.0));
        }
    }
    if raabe.is_empty() {
        return Ok(Quad { value: total, err });
    }
    raabe.sort_by(f64::total_cmp);
    let r_hat = raabe[raabe.len() / 2];
    if r_hat < RAABE_MIN {
        return Err(Error::DivergentIntegral(format!(
            "tail contributions decay sub-polynomially (Raabe statistic {r_hat:.3} < {RAABE_MIN})"
        )));
    }
    let k_last = (octaves.len() - 1) as f64;
    let remainder = octaves[octaves.len() - 1] * k_last / (r_hat - 1.0);
    if remainder > REMAINDER_FRACTION_MAX * total.abs() {
        return Err(Error::DivergentIntegral(format!(
            "tail remainder {remainder:.3e} not certifiable against total {total:.3e}"
        )));
    }
    Ok(Quad {
        value: total + remainder,
        err: err + remainder,
    })
}

/// Integral of `f` over `(0, b]` by downward octave decomposition, for
/// integrands with an integrable singularity at the origin.
pub fn integrate_to_zero<F: Fn(f64) -> f64>(f: &F, b: f64, rel_tol: f64) -> Result<Quad> {
    if b < 0.0 {
        return Err(Error::InvalidRegion(format!(
            "upper limit must be >= 0, got {b}"
        )));
    }
    if b == 0.0 {
        return Ok(Quad::ZERO);
    }
    let mut total: f64 = 0.0;
    let mut err = 0.0;
    let mut last = f64::INFINITY;
    let mut prev_signed = 0.0;
    let mut last_signed = 0.0;
    let mut small_run = 0usize;
    for k in 0..MAX_OCTAVES_DOWN {
        let hi = b * (2f64).powi(-(k as i32));
        let lo = 0.5 * hi;
        let tol_k = rel_tol / 16.0 * total.abs().max(1e-300);
        let panel = adaptive_scaled(f, lo, hi, tol_k, rel_tol / 16.0, 48);
        if !panel.value.is_finite() {
            return Err(Error::DivergentIntegral(format!(
                "non-finite contribution on [{lo:.3e}, {hi:.3e}]"
            )));
        }
        total += panel.value;
        err += panel.err;
        let mag = panel.value.abs();
        let small = mag <= rel_tol * total.abs().max(1e-300) / 20.0;
        // Only trust smallness once mass has been seen; zero-valued leading
        // octaves (profiles vanishing near b) must not stop the descent.
        small_run = if small && total != 0.0 {
            small_run + 1
        } else {
            0
        };
        if small_run >= 2 {
            return Ok(Quad { value: total, err });
        }
        if k > 20 && mag > last * (1.0 + 1e-9) {
            return Err(Error::DivergentIntegral(
                "contributions grow toward the origin".into(),
            ));
        }
        last = mag;
        prev_signed = last_signed;
        last_signed = panel.value;
    }
    // Budget exhausted with slow geometric decay (integrable power close
    // to the non-integrable edge): extrapolate the remainder from the last
    // octave ratio, which is exact for pure power integrands.
    if prev_signed != 0.0 {
        let ratio = last_signed / prev_signed;
        if ratio.abs() < 0.999 {
            let remainder = last_signed * ratio / (1.0 - ratio);
            total += remainder;
            err += remainder.abs() * 1e-3 + f64::EPSILON * total.abs();
        }
    }
    Ok(Quad { value: total, err })
}
