//! Euler integration of the jump SDEs, trajectory ensembles, synchronous
//! couplings, invariant-measure sampling, and frozen-noise flow Jacobians.
//!
//! The scheme is fixed-step Euler. Per step, drift / Brownian / small-jump
//! increments are evaluated at the step's opening state; jumps above the
//! cutoff arrive as a marked Poisson stream and are applied at the end of
//! their step in arrival order, each one seeing the pre-jump state (the
//! `X_{t-}` convention). In exact-stable mode the whole Lévy increment over
//! the step is drawn exactly instead.
//!
//! Paths are independent work units on stream-indexed generators, so a
//! batch is reproducible and independent of thread count.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{jump_stream, NoiseIncrementPlan, SmallJumpMode, StableSampler};
use crate::levy::TabulatedProfile;
use crate::linalg::{norm, Mat};
use crate::rng::{standard_normal, Streams};
use crate::stats::quantile;

/// Overflow guard doubling as the explosion heuristic.
pub const EXPLOSION_RADIUS: f64 = 1e150;

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A matrix coefficient, either constant (additive noise) or state-dependent.
#[derive(Clone)]
pub enum MatrixField {
    Constant(Mat),
    StateDep(Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>),
}

impl MatrixField {
    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixField::Constant(_))
    }

    pub fn at(&self, x: &[f64]) -> Mat {
        match self {
            MatrixField::Constant(m) => m.clone(),
            MatrixField::StateDep(f) => f(x),
        }
    }

    /// Apply the matrix at `x` to `v` without cloning in the constant case.
    fn apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            MatrixField::Constant(m) => m.matvec(v, out),
            MatrixField::StateDep(f) => f(x).matvec(v, out),
        }
    }
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatrixField::Constant(m) => write!(f, "Constant({m:?})"),
            MatrixField::StateDep(_) => write!(f, "StateDep(..)"),
        }
    }
}

/// Drift and diffusion coefficients of the SDE, with the dissipativity
/// window `lambda1 <= lambda2` when known and a Lipschitz scale for the
/// step-size guard.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    drift: DriftFn,
    sigma_const: Option<Mat>,
    sigma1: Option<MatrixField>,
    sigma2: Option<MatrixField>,
    lambda: Option<(f64, f64)>,
    lipschitz_b: f64,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("sigma_const", &self.sigma_const)
            .field("sigma1", &self.sigma1)
            .field("sigma2", &self.sigma2)
            .field("lambda", &self.lambda)
            .field("lipschitz_b", &self.lipschitz_b)
            .finish_non_exhaustive()
    }
}

impl CoefficientField {
    pub fn custom(dim: usize, drift: DriftFn, lipschitz_b: f64) -> Self {
        assert!(dim >= 1 && lipschitz_b > 0.0);
        CoefficientField {
            dim,
            drift,
            sigma_const: None,
            sigma1: None,
            sigma2: None,
            lambda: None,
            lipschitz_b,
        }
    }

    pub fn with_sigma_const(mut self, sigma: Mat) -> Result<Self> {
        let cond = sigma
            .condition()
            .map_err(|_| Error::InvalidInput("sigma must be invertible".into()))?;
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::InvalidInput(format!(
                "sigma condition number {cond:.3e} too large"
            )));
        }
        self.sigma_const = Some(sigma);
        Ok(self)
    }

    pub fn with_sigma1(mut self, sigma1: MatrixField) -> Self {
        self.sigma1 = Some(sigma1);
        self
    }

    pub fn with_sigma2(mut self, sigma2: MatrixField) -> Self {
        self.sigma2 = Some(sigma2);
        self
    }

    pub fn with_lambda(mut self, lambda1: f64, lambda2: f64) -> Self {
        assert!(lambda1 <= lambda2);
        self.lambda = Some((lambda1, lambda2));
        self
    }

    /// Ornstein-Uhlenbeck drift `b(x) = -x` with constant jump matrix
    /// `sigma I`.
    pub fn ou(dim: usize, sigma: f64) -> Self {
        let drift: DriftFn = Arc::new(|x, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = -xi;
            }
        });
        CoefficientField::custom(dim, drift, 1.0)
            .with_sigma_const(Mat::scalar(dim, sigma))
            .expect("scalar sigma is invertible")
            .with_lambda(-1.0, -1.0)
    }

    /// OU drift with unit Brownian diffusion and the identity jump matrix.
    pub fn ou_brownian(dim: usize) -> Self {
        CoefficientField::ou(dim, 1.0).with_sigma1(MatrixField::Constant(Mat::identity(dim)))
    }

    /// Linear drift `b(x) = A x` with constant noise matrix. The
    /// dissipativity window comes from the symmetric part of
    /// `sigma^{-1} A sigma`.
    pub fn linear(a: Mat, sigma: Mat) -> Result<Self> {
        let dim = a.dim();
        let sig_inv = sigma
            .inverse()
            .map_err(|_| Error::InvalidInput("sigma must be invertible".into()))?;
        let conj = sig_inv.matmul(&a).matmul(&sigma);
        let (l1, l2) = conj.symmetric_part_eig_bounds();
        let lip = a.op_norm().max(1e-12);
        let a_arc = a.clone();
        let drift: DriftFn = Arc::new(move |x, out| a_arc.matvec(x, out));
        Ok(CoefficientField::custom(dim, drift, lip)
            .with_sigma_const(sigma)?
            .with_lambda(l1, l2))
    }

    /// Power drift `b(x) = -x |x|^{theta-1}` with identity jump matrix.
    ///
    /// The global Lipschitz constant is unbounded for theta > 1 and the
    /// dissipativity window degenerates, so `lambda` is left unset; the
    /// recorded Lipschitz scale governs the step guard on the core region.
    pub fn power_drift(dim: usize, theta: f64) -> Self {
        let drift: DriftFn = Arc::new(move |x, out| {
            let r = norm(x);
            let factor = if r < 1e-300 {
                0.0
            } else {
                -r.powf(theta - 1.0)
            };
            for (o, xi) in out.iter_mut().zip(x) {
                *o = factor * xi;
            }
        });
        CoefficientField::custom(dim, drift, theta.max(1.0))
            .with_sigma_const(Mat::identity(dim))
            .expect("identity is invertible")
    }

    /// Radial drift `b(x) = -g(|x|) x/|x|` from a tabulated speed profile.
    pub fn radial_drift_table(dim: usize, table: TabulatedProfile) -> Self {
        // Lipschitz scale from the table's worst finite-difference slope.
        let mut lip: f64 = 1e-6;
        let rows: Vec<(f64, f64)> = table.rows().collect();
        for w in rows.windows(2) {
            lip = lip.max(((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs());
            lip = lip.max((w[0].1 / w[0].0.max(1e-12)).abs());
        }
        let drift: DriftFn = Arc::new(move |x, out| {
            let r = norm(x);
            let factor = if r < 1e-300 { 0.0 } else { -table.value(r) / r };
            for (o, xi) in out.iter_mut().zip(x) {
                *o = factor * xi;
            }
        });
        CoefficientField::custom(dim, drift, lip)
            .with_sigma_const(Mat::identity(dim))
            .expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out);
    }

    pub fn sigma_const(&self) -> Option<&Mat> {
        self.sigma_const.as_ref()
    }

    pub fn sigma1(&self) -> Option<&MatrixField> {
        self.sigma1.as_ref()
    }

    pub fn sigma2(&self) -> Option<&MatrixField> {
        self.sigma2.as_ref()
    }

    pub fn lambda(&self) -> Option<(f64, f64)> {
        self.lambda
    }

    pub fn lambda_required(&self) -> Result<(f64, f64)> {
        self.lambda.ok_or_else(|| {
            Error::InvalidInput(
                "operation requires the dissipativity window (lambda1, lambda2)".into(),
            )
        })
    }

    pub fn lipschitz_b(&self) -> f64 {
        self.lipschitz_b
    }

    /// Matrix multiplying the jump noise: `sigma2` when present, otherwise
    /// the constant `sigma` of the constant-coefficient equation.
    pub fn jump_matrix(&self) -> Option<MatrixField> {
        match (&self.sigma2, &self.sigma_const) {
            (Some(m), _) => Some(m.clone()),
            (None, Some(s)) => Some(MatrixField::Constant(s.clone())),
            (None, None) => None,
        }
    }

    /// True when every active noise coefficient is state-independent.
    pub fn is_additive(&self) -> bool {
        let s1_ok = self.sigma1.as_ref().map_or(true, |m| m.is_constant());
        let s2_ok = self.sigma2.as_ref().map_or(true, |m| m.is_constant());
        s1_ok && s2_ok
    }

    /// Spot-check of the dissipativity window on sampled points and
    /// directions, with the drift Jacobian formed by central differences.
    pub fn validate_dissipativity<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n_points: usize,
    ) -> Result<()> {
        let (l1, l2) = self.lambda_required()?;
        let d = self.dim;
        let sigma = self.sigma_const.clone().unwrap_or_else(|| Mat::identity(d));
        let sigma_inv = sigma.inverse()?;
        let tol = 1e-4 * (1.0 + l1.abs() + l2.abs());
        let h = 1e-5;
        let mut bp = vec![0.0; d];
        let mut bm = vec![0.0; d];
        for _ in 0..n_points {
            let x: Vec<f64> = (0..d).map(|_| 10.0 * standard_normal(rng)).collect();
            // columns of grad b at x
            let mut grad = Mat::zeros(d);
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                self.drift(&xp, &mut bp);
                self.drift(&xm, &mut bm);
                for i in 0..d {
                    grad.set(i, j, (bp[i] - bm[i]) / (2.0 * h));
                }
            }
            let conj = sigma_inv.matmul(&grad).matmul(&sigma);
            let mut v = vec![0.0; d];
            let mut cv = vec![0.0; d];
            for _ in 0..4 {
                crate::rng::unit_sphere(rng, &mut v);
                conj.matvec(&v, &mut cv);
                let q = crate::linalg::dot(&cv, &v);
                if q < l1 - tol || q > l2 + tol {
                    return Err(Error::InvalidInput(format!(
                        "dissipativity window violated: <sigma^-1 grad_b sigma v, v> = {q:.6} \
                         outside [{l1}, {l2}] at |x| = {:.3}",
                        norm(&x)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Step size satisfying both the default resolution and the stability
    /// guard.
    pub fn default_dt(&self) -> f64 {
        (1e-3f64).min(1.0 / (10.0 * self.lipschitz_b))
    }
}

/// Initial condition of a simulation batch.
#[derive(Debug, Clone)]
pub enum InitialState {
    Point(Vec<f64>),
    Ensemble(Vec<Vec<f64>>),
}

impl InitialState {
    pub fn point(x: &[f64]) -> Self {
        InitialState::Point(x.to_vec())
    }

    fn state_for(&self, path: usize) -> &[f64] {
        match self {
            InitialState::Point(x) => x,
            InitialState::Ensemble(v) => &v[path % v.len()],
        }
    }
}

/// Recorded states at fixed times for every path.
#[derive(Debug, Clone)]
pub struct Checkpoints {
    pub times: Vec<f64>,
    /// `states[time_index][path_index]` is a point in R^d.
    pub states: Vec<Vec<Vec<f64>>>,
}

/// A seeded batch of simulated paths.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub dim: usize,
    pub t: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: String,
    pub terminal: Vec<Vec<f64>>,
    pub checkpoints: Option<Checkpoints>,
}

impl TrajectoryEnsemble {
    pub fn n_paths(&self) -> usize {
        self.terminal.len()
    }

    /// Values of a scalar observable over the terminal states.
    pub fn map_terminal<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        self.terminal.iter().map(|x| f(x)).collect()
    }

    /// CSV dump `path_id,time,x_1,...,x_d` of checkpoints (when recorded)
    /// and terminal states.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "path_id,time")?;
        for j in 1..=self.dim {
            write!(w, ",x_{j}")?;
        }
        writeln!(w)?;
        for (pid, term) in self.terminal.iter().enumerate() {
            if let Some(cp) = &self.checkpoints {
                for (ti, t) in cp.times.iter().enumerate() {
                    if (*t - self.t).abs() < 1e-12 {
                        continue; // terminal row written below
                    }
                    write!(w, "{pid},{t}")?;
                    for v in &cp.states[ti][pid] {
                        write!(w, ",{v}")?;
                    }
                    writeln!(w)?;
                }
            }
            write!(w, "{pid},{}", self.t)?;
            for v in term {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Metadata sidecar describing the run.
    pub fn metadata(&self, plan: &NoiseIncrementPlan) -> serde_json::Value {
        let m = plan.measure();
        serde_json::json!({
            "seed": self.seed,
            "dt": self.dt,
            "t": self.t,
            "n_paths": self.n_paths(),
            "scheme": self.scheme,
            "measure": {
                "dim": m.dim(),
                "alpha": m.alpha(),
                "kappa1": m.kappa1(),
                "kappa2": m.kappa2(),
                "profile": format!("{}", m.profile()),
                "cutoff": plan.cutoff(),
            },
        })
    }
}

/// Pre-drawn noise for one path, so that several trajectories can be driven
/// by the identical realization (couplings, flow Jacobians).
#[derive(Debug, Clone)]
struct NoiseTape {
    brownian: Vec<f64>,
    small_gauss: Vec<f64>,
    stable: Vec<f64>,
    /// (step index in 1..=n_steps, mark)
    arrivals: Vec<(usize, Vec<f64>)>,
}

impl NoiseTape {
    fn draw<R: Rng + ?Sized>(
        coeffs: &CoefficientField,
        plan: &NoiseIncrementPlan,
        t0: f64,
        n_steps: usize,
        dt: f64,
        rng: &mut R,
    ) -> Result<NoiseTape> {
        let d = coeffs.dim();
        let mode = plan.small_jump_mode();
        let arrivals = if mode == SmallJumpMode::ExactStable || n_steps == 0 {
            Vec::new()
        } else {
            let t1 = t0 + n_steps as f64 * dt;
            jump_stream(plan, t0, t1, rng)?
                .arrivals
                .into_iter()
                .map(|(t, z)| {
                    let k = (((t - t0) / dt).ceil() as usize).clamp(1, n_steps);
                    (k, z)
                })
                .collect()
        };
        let mut brownian = Vec::new();
        let mut small_gauss = Vec::new();
        let mut stable = Vec::new();
        let measure = plan.measure();
        let sampler = StableSampler::new(measure.alpha(), dt, d, measure.kappa1());
        let mut draw = vec![0.0; d];
        for _ in 0..n_steps {
            if plan.brownian() {
                brownian.extend((0..d).map(|_| standard_normal(rng)));
            }
            match mode {
                SmallJumpMode::GaussianSurrogate => {
                    small_gauss.extend((0..d).map(|_| standard_normal(rng)));
                }
                SmallJumpMode::ExactStable => {
                    sampler.sample_into(rng, &mut draw);
                    stable.extend_from_slice(&draw);
                }
                SmallJumpMode::DropWithCompensation => {}
            }
        }
        Ok(NoiseTape {
            brownian,
            small_gauss,
            stable,
            arrivals,
        })
    }
}

/// Per-step noise feed for the Euler kernel.
trait NoiseSource {
    fn arrivals(&self) -> &[(usize, Vec<f64>)];
    fn step_brownian(&mut self, k: usize, out: &mut [f64]);
    fn step_small_gauss(&mut self, k: usize, out: &mut [f64]);
    fn step_stable(&mut self, k: usize, dt: f64, out: &mut [f64]);
}

struct RngNoise<'a> {
    rng: &'a mut ChaCha8Rng,
    arrivals: Vec<(usize, Vec<f64>)>,
    stable: StableSampler,
}

impl<'a> RngNoise<'a> {
    fn new(
        plan: &NoiseIncrementPlan,
        t0: f64,
        n_steps: usize,
        dt: f64,
        rng: &'a mut ChaCha8Rng,
    ) -> Result<Self> {
        let arrivals = if plan.small_jump_mode() == SmallJumpMode::ExactStable || n_steps == 0 {
            Vec::new()
        } else {
            let t1 = t0 + n_steps as f64 * dt;
            jump_stream(plan, t0, t1, rng)?
                .arrivals
                .into_iter()
                .map(|(t, z)| {
                    let k = (((t - t0) / dt).ceil() as usize).clamp(1, n_steps);
                    (k, z)
                })
                .collect()
        };
        let m = plan.measure();
        let stable = StableSampler::new(m.alpha(), dt, m.dim(), m.kappa1());
        Ok(RngNoise {
            rng,
            arrivals,
            stable,
        })
    }
}

impl NoiseSource for RngNoise<'_> {
    fn arrivals(&self) -> &[(usize, Vec<f64>)] {
        &self.arrivals
    }

    fn step_brownian(&mut self, _k: usize, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = standard_normal(self.rng);
        }
    }

    fn step_small_gauss(&mut self, _k: usize, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = standard_normal(self.rng);
        }
    }

    fn step_stable(&mut self, _k: usize, _dt: f64, out: &mut [f64]) {
        self.stable.sample_into(self.rng, out);
    }
}

struct TapeNoise<'a> {
    tape: &'a NoiseTape,
    dim: usize,
}

impl NoiseSource for TapeNoise<'_> {
    fn arrivals(&self) -> &[(usize, Vec<f64>)] {
        &self.tape.arrivals
    }

    fn step_brownian(&mut self, k: usize, out: &mut [f64]) {
        let off = (k - 1) * self.dim;
        out.copy_from_slice(&self.tape.brownian[off..off + self.dim]);
    }

    fn step_small_gauss(&mut self, k: usize, out: &mut [f64]) {
        let off = (k - 1) * self.dim;
        out.copy_from_slice(&self.tape.small_gauss[off..off + self.dim]);
    }

    fn step_stable(&mut self, k: usize, _dt: f64, out: &mut [f64]) {
        let off = (k - 1) * self.dim;
        out.copy_from_slice(&self.tape.stable[off..off + self.dim]);
    }
}

/// The Euler kernel: one path, optional state records at step indices.
#[allow(clippy::too_many_arguments)]
fn euler_path<N: NoiseSource>(
    coeffs: &CoefficientField,
    plan: &NoiseIncrementPlan,
    x0: &[f64],
    t0: f64,
    n_steps: usize,
    dt: f64,
    noise: &mut N,
    record_steps: &[usize],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = coeffs.dim();
    let mode = plan.small_jump_mode();
    let jump_mat = coeffs.jump_matrix();
    let surrogate_std = plan.surrogate_std(dt);
    let sqrt_dt = dt.sqrt();

    let mut x = x0.to_vec();
    let mut buf = vec![0.0; d];
    let mut noise_buf = vec![0.0; d];
    let mut applied = vec![0.0; d];
    let mut incr = vec![0.0; d];
    let mut records: Vec<Vec<f64>> = Vec::with_capacity(record_steps.len());
    let mut rec_idx = 0usize;
    while rec_idx < record_steps.len() && record_steps[rec_idx] == 0 {
        records.push(x.clone());
        rec_idx += 1;
    }

    let mut arr_idx = 0usize;

    for k in 1..=n_steps {
        // Drift, Brownian and small-jump pieces all see the opening state.
        coeffs.drift(&x, &mut buf);
        for i in 0..d {
            incr[i] = dt * buf[i];
        }
        if plan.brownian() {
            let s1 = coeffs
                .sigma1()
                .ok_or_else(|| Error::InvalidInput("brownian plan requires sigma1".into()))?;
            noise.step_brownian(k, &mut noise_buf);
            for v in noise_buf.iter_mut() {
                *v *= sqrt_dt;
            }
            s1.apply(&x, &noise_buf, &mut applied);
            for i in 0..d {
                incr[i] += applied[i];
            }
        }
        match mode {
            SmallJumpMode::GaussianSurrogate => {
                if surrogate_std > 0.0 {
                    let jm = jump_mat.as_ref().ok_or_else(|| {
                        Error::InvalidInput("jump noise requires sigma2 or constant sigma".into())
                    })?;
                    noise.step_small_gauss(k, &mut noise_buf);
                    for v in noise_buf.iter_mut() {
                        *v *= surrogate_std;
                    }
                    jm.apply(&x, &noise_buf, &mut applied);
                    for i in 0..d {
                        incr[i] += applied[i];
                    }
                }
            }
            SmallJumpMode::ExactStable => {
                let sigma = coeffs.sigma_const().ok_or_else(|| {
                    Error::InvalidInput("exact-stable mode requires the constant sigma".into())
                })?;
                noise.step_stable(k, dt, &mut noise_buf);
                sigma.matvec(&noise_buf, &mut applied);
                for i in 0..d {
                    incr[i] += applied[i];
                }
            }
            SmallJumpMode::DropWithCompensation => {}
        }
        for i in 0..d {
            x[i] += incr[i];
        }
        // Jumps snapped to this step, applied sequentially; sigma2 sees the
        // pre-jump state.
        while arr_idx < noise.arrivals().len() && noise.arrivals()[arr_idx].0 == k {
            let jm = jump_mat.as_ref().ok_or_else(|| {
                Error::InvalidInput("jump noise requires sigma2 or constant sigma".into())
            })?;
            let mark = noise.arrivals()[arr_idx].1.clone();
            jm.apply(&x, &mark, &mut applied);
            for i in 0..d {
                x[i] += applied[i];
            }
            arr_idx += 1;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if !r2.is_finite() || r2 > EXPLOSION_RADIUS * EXPLOSION_RADIUS {
            return Err(Error::ExplosionSuspected {
                time: t0 + k as f64 * dt,
                radius: r2.sqrt(),
            });
        }
        while rec_idx < record_steps.len() && record_steps[rec_idx] == k {
            records.push(x.clone());
            rec_idx += 1;
        }
    }
    Ok((x, records))
}

fn check_step_guard(coeffs: &CoefficientField, dt: f64) -> Result<()> {
    if dt > 1.0 / (2.0 * coeffs.lipschitz_b()) {
        return Err(Error::UnstableStep {
            dt,
            lipschitz: coeffs.lipschitz_b(),
        });
    }
    Ok(())
}

fn validate_plan(coeffs: &CoefficientField, plan: &NoiseIncrementPlan) -> Result<()> {
    if plan.brownian() && coeffs.sigma1().is_none() {
        return Err(Error::InvalidInput(
            "plan has brownian noise but sigma1 is unset".into(),
        ));
    }
    if plan.small_jump_mode() == SmallJumpMode::ExactStable {
        if coeffs.sigma_const().is_none() {
            return Err(Error::InvalidInput(
                "exact-stable mode requires constant sigma".into(),
            ));
        }
        if coeffs.sigma2().is_some() {
            return Err(Error::InvalidInput(
                "exact-stable mode is incompatible with a separate sigma2".into(),
            ));
        }
    } else if (plan.tail_rate() > 0.0 || plan.surrogate_std(1.0) > 0.0)
        && coeffs.jump_matrix().is_none()
    {
        return Err(Error::InvalidInput(
            "jump noise requires sigma2 or constant sigma".into(),
        ));
    }
    Ok(())
}

fn record_steps_for(times: &[f64], dt: f64, n_steps: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = times
        .iter()
        .map(|t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    steps.sort_unstable();
    steps
}

/// Simulate an ensemble of paths to time `t`.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    coeffs: &CoefficientField,
    plan: &NoiseIncrementPlan,
    init: &InitialState,
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    record_at: Option<&[f64]>,
) -> Result<TrajectoryEnsemble> {
    if !(t >= 0.0 && dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need t >= 0 and dt > 0, got t={t}, dt={dt}"
        )));
    }
    check_step_guard(coeffs, dt)?;
    validate_plan(coeffs, plan)?;
    let n_paths = match init {
        InitialState::Point(_) => n_paths,
        InitialState::Ensemble(v) => v.len(),
    };
    let n_steps = (t / dt).round().max(0.0) as usize;
    let dt_eff = if n_steps > 0 { t / n_steps as f64 } else { dt };
    let record_steps = record_at.map(|ts| record_steps_for(ts, dt_eff, n_steps));
    let streams = Streams::new(seed);

    let results: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = streams.stream(p as u64);
            let mut noise = RngNoise::new(plan, 0.0, n_steps, dt_eff, &mut rng)?;
            euler_path(
                coeffs,
                plan,
                init.state_for(p),
                0.0,
                n_steps,
                dt_eff,
                &mut noise,
                record_steps.as_deref().unwrap_or(&[]),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let terminal: Vec<Vec<f64>> = results.iter().map(|r| r.0.clone()).collect();
    let checkpoints = record_steps.map(|steps| {
        let times: Vec<f64> = steps.iter().map(|k| *k as f64 * dt_eff).collect();
        let states: Vec<Vec<Vec<f64>>> = (0..steps.len())
            .map(|ti| results.iter().map(|r| r.1[ti].clone()).collect())
            .collect();
        Checkpoints { times, states }
    });
    Ok(TrajectoryEnsemble {
        dim: coeffs.dim(),
        t,
        dt: dt_eff,
        seed,
        scheme: plan.scheme_id(),
        terminal,
        checkpoints,
    })
}

/// Per-checkpoint distance statistics of two solutions driven by the same
/// noise.
#[derive(Debug, Clone)]
pub struct CouplingStats {
    pub times: Vec<f64>,
    pub max_distance: Vec<f64>,
    pub min_distance: Vec<f64>,
}

/// Synchronous coupling: both trajectories consume the identical noise tape.
/// Requires additive noise, so the difference obeys the deterministic drift
/// ODE.
#[allow(clippy::too_many_arguments)]
pub fn synchronous_coupling(
    coeffs: &CoefficientField,
    plan: &NoiseIncrementPlan,
    x: &[f64],
    y: &[f64],
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    n_checkpoints: usize,
) -> Result<CouplingStats> {
    if !coeffs.is_additive() {
        return Err(Error::NotAdditiveNoise(
            "synchronous coupling requires state-independent noise coefficients".into(),
        ));
    }
    check_step_guard(coeffs, dt)?;
    validate_plan(coeffs, plan)?;
    let n_steps = (t / dt).round().max(1.0) as usize;
    let dt_eff = t / n_steps as f64;
    let times: Vec<f64> = (1..=n_checkpoints)
        .map(|i| t * i as f64 / n_checkpoints as f64)
        .collect();
    let record_steps = record_steps_for(&times, dt_eff, n_steps);
    let streams = Streams::new(seed);

    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = streams.stream(p as u64);
            let tape = NoiseTape::draw(coeffs, plan, 0.0, n_steps, dt_eff, &mut rng)?;
            let dim = coeffs.dim();
            let mut nx = TapeNoise { tape: &tape, dim };
            let (_, rec_x) = euler_path(
                coeffs,
                plan,
                x,
                0.0,
                n_steps,
                dt_eff,
                &mut nx,
                &record_steps,
            )?;
            let mut ny = TapeNoise { tape: &tape, dim };
            let (_, rec_y) = euler_path(
                coeffs,
                plan,
                y,
                0.0,
                n_steps,
                dt_eff,
                &mut ny,
                &record_steps,
            )?;
            Ok(rec_x
                .iter()
                .zip(&rec_y)
                .map(|(a, b)| {
                    let mut s = 0.0;
                    for (ai, bi) in a.iter().zip(b) {
                        s += (ai - bi) * (ai - bi);
                    }
                    s.sqrt()
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let n_cp = record_steps.len();
    let mut max_distance = vec![f64::NEG_INFINITY; n_cp];
    let mut min_distance = vec![f64::INFINITY; n_cp];
    for dists in &per_path {
        for (i, d) in dists.iter().enumerate() {
            max_distance[i] = max_distance[i].max(*d);
            min_distance[i] = min_distance[i].min(*d);
        }
    }
    Ok(CouplingStats {
        times,
        max_distance,
        min_distance,
    })
}

/// Convergence diagnostic attached to an invariant-measure sample set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceDiagnostic {
    /// KS distance between the first and second half of an extended run.
    pub ks_distance: f64,
    pub ks_p_value: f64,
    /// Radius growth between halves (or an explosion) flagged divergence.
    pub diverged: bool,
}

/// Samples approximating the invariant measure, with diagnostics.
#[derive(Debug, Clone)]
pub struct InvariantEnsemble {
    pub samples: Vec<Vec<f64>>,
    pub dim: usize,
    pub burn_in: f64,
    pub diagnostic: ConvergenceDiagnostic,
    /// Set when lambda2 >= 0 or unknown, where convergence is not guaranteed.
    pub warned_nondissipative: bool,
}

impl InvariantEnsemble {
    pub fn map<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.samples.iter().map(|x| f(x)).collect()
    }
}

/// Default burn-in `10/|lambda2|` for dissipative fields, else 10.
pub fn default_burn_in(coeffs: &CoefficientField) -> f64 {
    match coeffs.lambda() {
        Some((_, l2)) if l2 < 0.0 => 10.0 / l2.abs(),
        _ => 10.0,
    }
}

/// Terminal states of independent paths started at the origin and run for
/// `burn_in`, tagged with a stationarity diagnostic from a doubled-horizon
/// run.
pub fn invariant_ensemble(
    coeffs: &CoefficientField,
    plan: &NoiseIncrementPlan,
    burn_in: f64,
    n_samples: usize,
    dt: f64,
    seed: u64,
) -> Result<InvariantEnsemble> {
    let warned = !matches!(coeffs.lambda(), Some((_, l2)) if l2 < 0.0);
    let x0 = vec![0.0; coeffs.dim()];
    let streams = Streams::new(seed);

    // Doubled-horizon diagnostic on a small independent batch: the law at
    // the run's halfway point (first half of the paths) is compared with
    // the law at the full horizon (second half), so the KS samples are
    // independent across paths and the test is valid regardless of the
    // process's mixing time.
    let diag_paths = 512usize;
    let diag_seed = streams.fork("invariant-diagnostic").seed();
    let diag_run = simulate(
        coeffs,
        plan,
        &InitialState::point(&x0),
        2.0 * burn_in,
        dt,
        diag_paths,
        diag_seed,
        Some(&[burn_in, 2.0 * burn_in]),
    );
    let diagnostic = match diag_run {
        Ok(ens) => {
            let cp = ens.checkpoints.expect("recorded checkpoints");
            let half = diag_paths / 2;
            let mut first: Vec<f64> = cp.states[0][..half].iter().map(|s| s[0]).collect();
            let mut second: Vec<f64> = cp.states[1][half..].iter().map(|s| s[0]).collect();
            let ks = crate::stats::ks_two_sample(&mut first, &mut second);
            let mut r1: Vec<f64> = cp.states[0][..half].iter().map(|s| norm(s)).collect();
            let mut r2: Vec<f64> = cp.states[1][half..].iter().map(|s| norm(s)).collect();
            r1.sort_by(f64::total_cmp);
            r2.sort_by(f64::total_cmp);
            let q1 = quantile(&r1, 0.9);
            let q2 = quantile(&r2, 0.9);
            let diverged = q2 > 4.0 * q1.max(1e-9) && q2 > q1 + 1.0;
            ConvergenceDiagnostic {
                ks_distance: ks.statistic,
                ks_p_value: ks.p_value,
                diverged,
            }
        }
        Err(Error::ExplosionSuspected { .. }) => ConvergenceDiagnostic {
            ks_distance: 1.0,
            ks_p_value: 0.0,
            diverged: true,
        },
        Err(e) => return Err(e),
    };

    if diagnostic.diverged {
        return Ok(InvariantEnsemble {
            samples: Vec::new(),
            dim: coeffs.dim(),
            burn_in,
            diagnostic,
            warned_nondissipative: warned,
        });
    }

    let ens = match simulate(
        coeffs,
        plan,
        &InitialState::point(&x0),
        burn_in,
        dt,
        n_samples,
        seed,
        None,
    ) {
        Ok(e) => e,
        Err(Error::ExplosionSuspected { .. }) => {
            return Ok(InvariantEnsemble {
                samples: Vec::new(),
                dim: coeffs.dim(),
                burn_in,
                diagnostic: ConvergenceDiagnostic {
                    ks_distance: 1.0,
                    ks_p_value: 0.0,
                    diverged: true,
                },
                warned_nondissipative: warned,
            })
        }
        Err(e) => return Err(e),
    };
    Ok(InvariantEnsemble {
        samples: ens.terminal,
        dim: coeffs.dim(),
        burn_in,
        diagnostic,
        warned_nondissipative: warned,
    })
}

/// Output of the frozen-noise flow Jacobian check.
#[derive(Debug, Clone)]
pub struct JacobianCheck {
    pub jacobian: Mat,
    pub det: f64,
    pub det_lo: f64,
    pub det_hi: f64,
    pub det_ok: bool,
    pub op_norm: f64,
    pub norm_hi: f64,
    pub norm_ok: bool,
}

/// Central finite-difference Jacobian of `x -> X_T(x)` under frozen noise,
/// checked against the dissipativity bounds
/// `e^{lambda1 (T-s) d} <= det <= e^{lambda2 (T-s) d}` and
/// `|sigma^{-1} J sigma| <= e^{lambda2 (T-s)}`.
#[allow(clippy::too_many_arguments)]
pub fn flow_jacobian_check(
    coeffs: &CoefficientField,
    plan: &NoiseIncrementPlan,
    x: &[f64],
    s: f64,
    t_final: f64,
    dt: f64,
    seed: u64,
    h: f64,
) -> Result<JacobianCheck> {
    if !coeffs.is_additive() {
        return Err(Error::NotAdditiveNoise(
            "flow Jacobians are only checked for additive noise".into(),
        ));
    }
    let (l1, l2) = coeffs.lambda_required()?;
    check_step_guard(coeffs, dt)?;
    validate_plan(coeffs, plan)?;
    let tau = t_final - s;
    if tau < 0.0 {
        return Err(Error::InvalidInput("need s <= T".into()));
    }
    let d = coeffs.dim();
    let jacobian = if tau == 0.0 {
        Mat::identity(d)
    } else {
        let n_steps = (tau / dt).round().max(1.0) as usize;
        let dt_eff = tau / n_steps as f64;
        let streams = Streams::new(seed).fork("flow-jacobian");
        let mut rng = streams.stream(0);
        let tape = NoiseTape::draw(coeffs, plan, 0.0, n_steps, dt_eff, &mut rng)?;
        let run = |x0: &[f64]| -> Result<Vec<f64>> {
            let mut noise = TapeNoise {
                tape: &tape,
                dim: d,
            };
            Ok(euler_path(coeffs, plan, x0, 0.0, n_steps, dt_eff, &mut noise, &[])?.0)
        };
        let mut j = Mat::zeros(d);
        for col in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[col] += h;
            xm[col] -= h;
            let fp = run(&xp)?;
            let fm = run(&xm)?;
            for row in 0..d {
                j.set(row, col, (fp[row] - fm[row]) / (2.0 * h));
            }
        }
        j
    };

    let tolf = 1.0 + 10.0 * dt * coeffs.lipschitz_b() + 10.0 * h;
    let det = jacobian.det();
    let det_lo = (l1 * tau * d as f64).exp();
    let det_hi = (l2 * tau * d as f64).exp();
    let det_ok = det >= det_lo / tolf && det <= det_hi * tolf;
    let conj = match coeffs.sigma_const() {
        Some(sig) => sig.inverse()?.matmul(&jacobian).matmul(sig),
        None => jacobian.clone(),
    };
    let op_norm = conj.op_norm();
    let norm_hi = (l2 * tau).exp();
    let norm_ok = op_norm <= norm_hi * tolf;
    Ok(JacobianCheck {
        jacobian,
        det,
        det_lo,
        det_hi,
        det_ok,
        op_norm,
        norm_hi,
        norm_ok,
    })
}
