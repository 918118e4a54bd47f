//! Desk-scale Poisson-space checks: finite-intensity configurations on
//! `[0, T] x R^d`, the Mecke identity, the add-one-point Girsanov density,
//! and the Φ-entropy inequality for Poisson functionals
//!
//! ```text
//! E Phi(F(N_T)) - Phi(E F(N_T))
//!   <= E int Psi_Phi(F(N_T + delta_{(s,z)}), F(N_T)) ds nu(dz).
//! ```
//!
//! Only finite intensities are represented: the mark measure is a
//! [`RadialLevyMeasure`] truncated below at a cutoff, so the total mass
//! `m = T nu(|z| > cutoff)` is finite and configurations are finite point
//! lists. All shipped functionals are permutation-invariant.
//!
//! The Girsanov identity `E[R F(N_T + delta)] = E[F(N_T)]` holds exactly
//! only up to the empty-configuration atom `e^{-m}` at finite mass (the
//! σ-finite setting has none); checks report `empty_mass` so callers can
//! keep it below resolution (`m >= 20` makes it ~2e-9).

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::entropy::{psi, PhiSpec};
use crate::error::{Error, Result};
use crate::levy::{JumpSampler, MomentKind, RadialLevyMeasure};
use crate::rng::{poisson_count, uniform_open, Streams};
use crate::stats::mean_and_se;

/// A finite marked point configuration on `[0, T] x R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<(f64, Vec<f64>)>,
    window: f64,
}

impl Configuration {
    pub fn new(points: Vec<(f64, Vec<f64>)>, window: f64) -> Result<Self> {
        if points.iter().any(|(s, _)| *s < 0.0 || *s > window) {
            return Err(Error::InvalidInput("point times must lie in [0, T]".into()));
        }
        Ok(Configuration { points, window })
    }

    pub fn empty(window: f64) -> Self {
        Configuration {
            points: Vec::new(),
            window,
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[(f64, Vec<f64>)] {
        &self.points
    }

    /// `gamma(h) = sum h(s_i, z_i)`.
    pub fn integrate_mark<H: Fn(f64, &[f64]) -> f64>(&self, h: H) -> f64 {
        self.points.iter().map(|(s, z)| h(*s, z)).sum()
    }

    /// The configuration with one extra point.
    pub fn with_point(&self, s: f64, z: &[f64]) -> Configuration {
        let mut points = self.points.clone();
        points.push((s, z.to_vec()));
        Configuration {
            points,
            window: self.window,
        }
    }

    /// The configuration with point `idx` removed.
    pub fn without_index(&self, idx: usize) -> Configuration {
        let mut points = self.points.clone();
        points.swap_remove(idx);
        Configuration {
            points,
            window: self.window,
        }
    }

    /// Deterministic reordering used by permutation-invariance tests.
    pub fn shuffled(&self, seed: u64) -> Configuration {
        let mut points = self.points.clone();
        let streams = Streams::new(seed);
        let mut rng = streams.stream(0);
        for i in (1..points.len()).rev() {
            let j = (rng.random::<u64>() % (i as u64 + 1)) as usize;
            points.swap(i, j);
        }
        Configuration {
            points,
            window: self.window,
        }
    }
}

/// The mark statistic `|z| ^ 1` used by the shipped functional corpus.
pub fn corpus_mark(_s: f64, z: &[f64]) -> f64 {
    crate::linalg::norm(z).min(1.0)
}

/// Named permutation-invariant functionals of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFunctional {
    /// `F = N` (point count).
    Count,
    /// `F = gamma(h) + 1` with `h = |z| ^ 1`.
    Linear,
    /// `F = exp(-gamma(h))`.
    Laplace,
    /// `F = exp(-gamma(h)) + 1`.
    LaplaceShifted,
    /// `F = max_i h(s_i, z_i)` (0 when empty).
    MaxMark,
}

impl CorpusFunctional {
    pub const ALL: [CorpusFunctional; 5] = [
        CorpusFunctional::Count,
        CorpusFunctional::Linear,
        CorpusFunctional::Laplace,
        CorpusFunctional::LaplaceShifted,
        CorpusFunctional::MaxMark,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CorpusFunctional::Count => "count",
            CorpusFunctional::Linear => "linear",
            CorpusFunctional::Laplace => "laplace",
            CorpusFunctional::LaplaceShifted => "laplace-shift",
            CorpusFunctional::MaxMark => "max-mark",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown functional '{name}'")))
    }

    pub fn eval(&self, config: &Configuration) -> f64 {
        match self {
            CorpusFunctional::Count => config.count() as f64,
            CorpusFunctional::Linear => config.integrate_mark(corpus_mark) + 1.0,
            CorpusFunctional::Laplace => (-config.integrate_mark(corpus_mark)).exp(),
            CorpusFunctional::LaplaceShifted => (-config.integrate_mark(corpus_mark)).exp() + 1.0,
            CorpusFunctional::MaxMark => config
                .points()
                .iter()
                .map(|(s, z)| corpus_mark(*s, z))
                .fold(0.0, f64::max),
        }
    }
}

/// Finite intensity `ds x nu|_{|z| > cutoff}` on `[0, T] x R^d`.
#[derive(Debug, Clone)]
pub struct FiniteIntensity {
    measure: RadialLevyMeasure,
    cutoff: f64,
    window: f64,
    mass: f64,
}

impl FiniteIntensity {
    pub fn new(measure: RadialLevyMeasure, cutoff: f64, window: f64) -> Result<Self> {
        if !(window > 0.0) {
            return Err(Error::InvalidInput("window must be positive".into()));
        }
        let mark_mass = measure.moment_integral(MomentKind::TailMass { eps: cutoff })?;
        Ok(FiniteIntensity {
            measure,
            cutoff,
            window,
            mass: window * mark_mass,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn measure(&self) -> &RadialLevyMeasure {
        &self.measure
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    fn mark_sampler(&self) -> Result<JumpSampler<'_>> {
        self.measure.jump_sampler(self.cutoff)
    }

    /// Probability that a configuration is empty; the resolution floor of
    /// the finite-mass Girsanov identity.
    pub fn empty_mass(&self) -> f64 {
        (-self.mass).exp()
    }
}

/// Strictly positive densities `g` with `int g ds dnu = 1`, used by the
/// Girsanov and entropy checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GDensity {
    /// `g = 1/m`.
    Uniform,
    /// `g(s, z) = 2s / (T m)`: tilts the time coordinate.
    TimeLinear,
}

impl GDensity {
    pub fn value(&self, s: f64, _z: &[f64], intensity: &FiniteIntensity) -> f64 {
        match self {
            GDensity::Uniform => 1.0 / intensity.mass(),
            GDensity::TimeLinear => 2.0 * s / (intensity.window() * intensity.mass()),
        }
    }

    /// Draw `(s, z)` from the probability measure `g ds dnu`.
    fn sample<R: Rng + ?Sized>(
        &self,
        intensity: &FiniteIntensity,
        sampler: &JumpSampler<'_>,
        rng: &mut R,
    ) -> Result<(f64, Vec<f64>)> {
        let t = intensity.window();
        let s = match self {
            GDensity::Uniform => t * uniform_open(rng),
            GDensity::TimeLinear => t * uniform_open(rng).sqrt(),
        };
        Ok((s, sampler.sample(rng)?))
    }
}

/// Draw a configuration: `Poisson(m)` points i.i.d. from the normalized
/// intensity.
pub fn sample_configuration<R: Rng + ?Sized>(
    intensity: &FiniteIntensity,
    rng: &mut R,
) -> Result<Configuration> {
    let m = intensity.mass();
    if m == 0.0 {
        return Ok(Configuration::empty(intensity.window()));
    }
    let count = poisson_count(rng, m);
    let sampler = intensity.mark_sampler()?;
    let mut points = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let s = intensity.window() * uniform_open(rng);
        points.push((s, sampler.sample(rng)?));
    }
    Ok(Configuration {
        points,
        window: intensity.window(),
    })
}

/// Two-sided Monte Carlo estimate of the Mecke identity
/// `E sum_{(s,z) in gamma} F(gamma - delta, (s,z)) = E int F(gamma, (s,z)) lambda(ds,dz)`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MeckeCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of the paired difference lhs - rhs.
    pub diff_se: f64,
}

pub fn mecke_check<F>(
    f: F,
    intensity: &FiniteIntensity,
    n_samples: usize,
    seed: u64,
) -> Result<MeckeCheck>
where
    F: Fn(&Configuration, f64, &[f64]) -> f64 + Sync,
{
    const SUBSAMPLES: usize = 4;
    let streams = Streams::new(seed);
    let rows: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i as u64);
            let gamma = sample_configuration(intensity, &mut rng)?;
            let mut lhs = 0.0;
            for j in 0..gamma.count() {
                let (s, z) = gamma.points()[j].clone();
                let reduced = gamma.without_index(j);
                lhs += f(&reduced, s, &z);
            }
            let sampler = intensity.mark_sampler()?;
            let mut rhs_acc = 0.0;
            for _ in 0..SUBSAMPLES {
                let (s, z) = GDensity::Uniform.sample(intensity, &sampler, &mut rng)?;
                rhs_acc += f(&gamma, s, &z);
            }
            let rhs = intensity.mass() * rhs_acc / SUBSAMPLES as f64;
            Ok((lhs, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs_vals: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs_vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let (lhs, lhs_se) = mean_and_se(&lhs_vals);
    let (rhs, rhs_se) = mean_and_se(&rhs_vals);
    let (_, diff_se) = mean_and_se(&diffs);
    Ok(MeckeCheck {
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        diff_se,
    })
}

/// Result of the add-one-point reweighting check.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GirsanovCheck {
    /// `E[R F(N_T + delta_{(tau,xi)})]`.
    pub reweighted: f64,
    pub reweighted_se: f64,
    /// `E[F(N_T)]`.
    pub direct: f64,
    pub direct_se: f64,
    /// `E[R]`; equals 1 up to the empty-configuration atom.
    pub mean_weight: f64,
    pub mean_weight_se: f64,
    /// `e^{-m}`: resolution floor of the identity at finite mass.
    pub empty_mass: f64,
}

/// Check that reweighting by `R = 1/(g(tau,xi) + N_T(g))` makes the
/// configuration with the extra independent point `(tau, xi) ~ g ds dnu`
/// distributed like the original.
pub fn girsanov_density_check<F>(
    g: GDensity,
    f: F,
    intensity: &FiniteIntensity,
    n_samples: usize,
    seed: u64,
) -> Result<GirsanovCheck>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    let streams = Streams::new(seed);
    let rows: Vec<(f64, f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i as u64);
            let gamma = sample_configuration(intensity, &mut rng)?;
            let sampler = intensity.mark_sampler()?;
            let (tau, xi) = g.sample(intensity, &sampler, &mut rng)?;
            let n_g: f64 = gamma
                .points()
                .iter()
                .map(|(s, z)| g.value(*s, z, intensity))
                .sum();
            let denom = g.value(tau, &xi, intensity) + n_g;
            let weight = 1.0 / denom;
            let augmented = gamma.with_point(tau, &xi);
            Ok((weight * f(&augmented), f(&gamma), weight))
        })
        .collect::<Result<Vec<_>>>()?;
    let w_vals: Vec<f64> = rows.iter().map(|r| r.2).collect();
    // Unstable weights mean g is effectively degenerate on the sampled
    // support; report rather than silently averaging.
    let mut sorted = w_vals.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let max = *sorted.last().expect("non-empty");
    if max > 50.0 * median.max(1e-300) {
        return Err(Error::DegenerateDensity(format!(
            "weight spread max/median = {:.3e} (m = {:.3}): g too small on sampled support",
            max / median,
            intensity.mass()
        )));
    }
    let rw: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let direct: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (reweighted, reweighted_se) = mean_and_se(&rw);
    let (direct, direct_se) = mean_and_se(&direct);
    let (mean_weight, mean_weight_se) = mean_and_se(&w_vals);
    Ok(GirsanovCheck {
        reweighted,
        reweighted_se,
        direct,
        direct_se,
        mean_weight,
        mean_weight_se,
        empty_mass: intensity.empty_mass(),
    })
}

/// Result of the Poisson-space Φ-entropy inequality check.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WuCheck {
    pub entropy: f64,
    pub entropy_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `rhs - entropy`; the inequality asserts this is >= 0.
    pub margin: f64,
    /// Standard error of the margin with the lhs/rhs correlation accounted.
    pub margin_se: f64,
    /// `entropy <= rhs + 3 margin_se`.
    pub holds: bool,
}

/// Monte Carlo check of the Poisson Φ-entropy inequality for one
/// functional: the entropy of `F(N_T)` against the add-one-point integral
/// `E int Psi_Phi(F(N_T + delta_{(s,z)}), F(N_T)) ds nu(dz)`, subsampled
/// from `g ds dnu` with importance weights `1/g`.
#[allow(clippy::too_many_arguments)]
pub fn wu_entropy_check<F>(
    phi: PhiSpec,
    f: F,
    intensity: &FiniteIntensity,
    g: GDensity,
    n_samples: usize,
    add_point_subsamples: usize,
    seed: u64,
) -> Result<WuCheck>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    let streams = Streams::new(seed);
    let k = add_point_subsamples.max(1);
    let rows: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i as u64);
            let gamma = sample_configuration(intensity, &mut rng)?;
            let f_gamma = f(&gamma);
            let sampler = intensity.mark_sampler()?;
            let mut acc = 0.0;
            for _ in 0..k {
                let (s, z) = g.sample(intensity, &sampler, &mut rng)?;
                let f_plus = f(&gamma.with_point(s, &z));
                acc += psi(phi, f_plus.max(0.0), f_gamma)? / g.value(s, &z, intensity);
            }
            Ok((f_gamma, acc / k as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let f_vals: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs_vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (entropy, entropy_se) =
        crate::entropy::entropy_estimate(phi, &f_vals, crate::entropy::EntropyEstimator::PlugIn);
    let (rhs, rhs_se) = mean_and_se(&rhs_vals);
    // margin residuals linearized around the mean of F
    let n = f_vals.len() as f64;
    let f_mean = f_vals.iter().sum::<f64>() / n;
    let dphi = phi.dphi(f_mean.max(1e-300));
    let resid: Vec<f64> = rows
        .iter()
        .map(|(fv, rv)| rv - phi.phi(*fv) + dphi * fv)
        .collect();
    let (_, margin_se) = mean_and_se(&resid);
    let margin = rhs - entropy;
    // roundoff floor keeps zero-variance cases (constant F) from failing
    // on accumulated machine error
    let tol_abs = 1e-11 * (1.0 + phi.phi(f_mean.max(1e-300)).abs());
    Ok(WuCheck {
        entropy,
        entropy_se,
        rhs,
        rhs_se,
        margin,
        margin_se,
        holds: entropy <= rhs + 3.0 * margin_se + tol_abs,
    })
}

/// JSON record for a wu-entropy run, as emitted by the CLI.
pub fn wu_record(functional: &str, phi: PhiSpec, check: &WuCheck) -> serde_json::Value {
    serde_json::json!({
        "functional": functional,
        "phi": phi.name(),
        "entropy": check.entropy,
        "rhs": check.rhs,
        "margin": check.margin,
        "stderr": check.margin_se,
        "holds": check.holds,
    })
}

/// Closure form of a corpus functional, for the checks' generic interface.
pub fn corpus_closure(f: CorpusFunctional) -> Arc<dyn Fn(&Configuration) -> f64 + Send + Sync> {
    Arc::new(move |c: &Configuration| f.eval(c))
}
