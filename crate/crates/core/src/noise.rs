//! Classical phase noise `λ(t)` coupled to `J_z`.
//!
//! For a stationary Gaussian `λ` with mean `λ̄` and correlation function
//! `h(τ)`, averaging the random rotation `e^{-iφ(t)J_z}`, `φ(t) = −∫₀ᵗλ`,
//! multiplies the Fock matrix element `(n, n′)` by the characteristic
//! function `f̃(n′ − n, t) = e^{−a²(t)(n−n′)²/2} e^{iλ̄t(n−n′)}` with
//! `a²(t) = 2∫₀ᵗdτ∫₀^τ du h(u)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_noiseless, QuenchSpec};
use crate::error::{domain, Error, Result};
use crate::hilbert::{binomial_weights, DensityMatrix, FockBasis, PureState, C64};
use crate::quadrature;

/// Relative tolerance of the quadrature behind [`variance_a2`] for custom `h`.
pub const VARIANCE_REL_TOL: f64 = 1e-8;

/// Largest OU step as a fraction of the correlation time.
pub const MAX_OU_STEP_FRACTION: f64 = 1.0 / 20.0;

/// Trajectories drawn from one RNG stream. Fixed so that an ensemble does not
/// depend on the number of worker threads.
pub const TRAJECTORIES_PER_STREAM: usize = 512;

pub type CorrelationFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Exponent added to `ln f̃` beyond second order: receives `(n − n′, t)` and
/// returns `Σ_{p≥3} b_p(t)(n − n′)^p`.
pub type CumulantHook = Arc<dyn Fn(i64, f64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum NoiseKind {
    /// `h(τ) = h0 e^{−|τ|/Tc}`.
    OrnsteinUhlenbeck { h0: f64, tc: f64 },
    /// `h(τ) = 2D δ(τ)`.
    White { d: f64 },
    /// `h(τ) = h0`: each realisation of `λ` is frozen in time, so `a² = h0 t²`.
    Static { h0: f64 },
    /// Arbitrary even correlation function.
    Custom(CorrelationFn),
}

impl fmt::Debug for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::OrnsteinUhlenbeck { h0, tc } => f
                .debug_struct("OrnsteinUhlenbeck")
                .field("h0", h0)
                .field("tc", tc)
                .finish(),
            NoiseKind::White { d } => f.debug_struct("White").field("d", d).finish(),
            NoiseKind::Static { h0 } => f.debug_struct("Static").field("h0", h0).finish(),
            NoiseKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone)]
pub struct NoiseModel {
    lambda_bar: f64,
    kind: NoiseKind,
    cumulants: Option<CumulantHook>,
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseModel")
            .field("lambda_bar", &self.lambda_bar)
            .field("kind", &self.kind)
            .field("cumulants", &self.cumulants.as_ref().map(|_| ".."))
            .finish()
    }
}

impl NoiseModel {
    pub fn ornstein_uhlenbeck(lambda_bar: f64, h0: f64, tc: f64) -> Result<Self> {
        if !(h0.is_finite() && h0 >= 0.0) {
            return domain(format!("h0 must be finite and ≥ 0, got {h0}"));
        }
        if !(tc.is_finite() && tc > 0.0) {
            return domain(format!("Tc must be positive, got {tc}"));
        }
        Self::with_kind(lambda_bar, NoiseKind::OrnsteinUhlenbeck { h0, tc })
    }

    pub fn white(lambda_bar: f64, d: f64) -> Result<Self> {
        if !(d.is_finite() && d >= 0.0) {
            return domain(format!("D must be finite and ≥ 0, got {d}"));
        }
        Self::with_kind(lambda_bar, NoiseKind::White { d })
    }

    pub fn quasi_static(lambda_bar: f64, h0: f64) -> Result<Self> {
        if !(h0.is_finite() && h0 >= 0.0) {
            return domain(format!("h0 must be finite and ≥ 0, got {h0}"));
        }
        Self::with_kind(lambda_bar, NoiseKind::Static { h0 })
    }

    /// Custom correlation function, sanity-checked on `[0, horizon]`:
    /// `h(0) ≥ 0`, `h` even, and `a²` nondecreasing on a 32-point grid.
    pub fn custom<F>(lambda_bar: f64, h: F, horizon: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain("validation horizon must be positive");
        }
        let h0 = h(0.0);
        if !(h0.is_finite() && h0 >= 0.0) {
            return domain(format!("h(0) = {h0} must be finite and ≥ 0"));
        }
        for k in 1..=32 {
            let tau = horizon * k as f64 / 32.0;
            let (a, b) = (h(tau), h(-tau));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(h0) {
                return domain(format!("h is not even: h({tau}) = {a}, h(-{tau}) = {b}"));
            }
        }
        let model = Self::with_kind(lambda_bar, NoiseKind::Custom(Arc::new(h)))?;
        let mut last = 0.0;
        for k in 1..=32 {
            let a2 = variance_a2(&model, horizon * k as f64 / 32.0)?;
            if a2 < last * (1.0 - 1e-9) {
                return domain("a²(t) decreases; h is not a valid correlation function");
            }
            last = a2;
        }
        Ok(model)
    }

    fn with_kind(lambda_bar: f64, kind: NoiseKind) -> Result<Self> {
        if !lambda_bar.is_finite() {
            return domain("λ̄ must be finite");
        }
        Ok(Self {
            lambda_bar,
            kind,
            cumulants: None,
        })
    }

    /// Attach non-Gaussian cumulant factors `e^{Σ b_p(t)(n−n′)^p}`.
    pub fn with_cumulant_hook(mut self, hook: CumulantHook) -> Self {
        self.cumulants = Some(hook);
        self
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn is_gaussian(&self) -> bool {
        self.cumulants.is_none()
    }

    /// Same fluctuations, zero mean.
    pub fn centered(&self) -> Self {
        Self {
            lambda_bar: 0.0,
            ..self.clone()
        }
    }

    /// Correlation function `h(τ)`; `None` for white noise.
    pub fn correlation(&self, tau: f64) -> Option<f64> {
        match &self.kind {
            NoiseKind::OrnsteinUhlenbeck { h0, tc } => Some(h0 * (-tau.abs() / tc).exp()),
            NoiseKind::White { .. } => None,
            NoiseKind::Static { h0 } => Some(*h0),
            NoiseKind::Custom(h) => Some(h(tau)),
        }
    }

    /// `∫₀^∞ h(τ) dτ`, the intensity that sets the Markov-regime slope of `a²`;
    /// `None` when it diverges or is not known in closed form.
    pub fn markov_intensity(&self) -> Option<f64> {
        match &self.kind {
            NoiseKind::OrnsteinUhlenbeck { h0, tc } => Some(h0 * tc),
            NoiseKind::White { d } => Some(*d),
            NoiseKind::Static { .. } | NoiseKind::Custom(_) => None,
        }
    }
}

/// Accumulated phase variance `a²(t) = 2∫₀ᵗ (t − u) h(u) du`.
pub fn variance_a2(model: &NoiseModel, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return domain(format!("time must be ≥ 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    match &model.kind {
        NoiseKind::OrnsteinUhlenbeck { h0, tc } => Ok(2.0 * h0 * tc * tc * ou_excess(t / tc)),
        NoiseKind::White { d } => Ok(2.0 * d * t),
        NoiseKind::Static { h0 } => Ok(h0 * t * t),
        NoiseKind::Custom(h) => {
            let inner = quadrature::integrate(|u| (t - u) * h(u), 0.0, t, VARIANCE_REL_TOL, 0.0)?;
            Ok(2.0 * inner)
        }
    }
}

/// `x − (1 − e^{−x})`, by its Taylor series where the difference cancels.
fn ou_excess(x: f64) -> f64 {
    if x < 0.05 {
        // x²/2 − x³/6 + x⁴/24 − …
        let mut term = x * x / 2.0;
        let mut sum = 0.0f64;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            sum += term;
            k += 1.0;
            term *= -x / k;
        }
        sum
    } else {
        x + (-x).exp_m1()
    }
}

/// `f̃(m, t) = e^{−a²(t)m²/2} e^{−iλ̄tm}`, times the cumulant hook when present.
pub fn dephasing_kernel(model: &NoiseModel, m: i64, t: f64) -> Result<C64> {
    let a2 = variance_a2(model, t)?;
    Ok(kernel_value(model, a2, m, t))
}

fn kernel_value(model: &NoiseModel, a2: f64, m: i64, t: f64) -> C64 {
    let mf = m as f64;
    let mut exponent = C64::new(-0.5 * a2 * mf * mf, -model.lambda_bar * t * mf);
    if let Some(hook) = &model.cumulants {
        exponent += hook(-m, t);
    }
    exponent.exp()
}

/// Multiply entry `(i, j)` by `factor(j − i)`.
fn apply_kernel<F: Fn(i64) -> C64>(m: &DMatrix<C64>, factor: F) -> Result<DMatrix<C64>> {
    if m.nrows() != m.ncols() {
        return domain("dephasing needs a square matrix");
    }
    let d = m.nrows() as i64;
    let table: Vec<C64> = (-(d - 1)..d).map(&factor).collect();
    let offset = (d - 1) as usize;
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i == j {
            m[(i, j)]
        } else {
            m[(i, j)] * table[(offset as i64 + j as i64 - i as i64) as usize]
        }
    }))
}

/// Eq.-(9)-style filter: `(n, n′) ↦ f̃(n′ − n, t)·(n, n′)`. Works on full
/// density matrices and on their diagonal/off-diagonal parts alike.
pub fn apply_dephasing(m: &DMatrix<C64>, model: &NoiseModel, t: f64) -> Result<DMatrix<C64>> {
    let a2 = variance_a2(model, t)?;
    apply_kernel(m, |k| kernel_value(model, a2, k, t))
}

/// Zero-mean Gaussian filter with a prescribed phase variance `a²`.
pub fn apply_gaussian_dephasing(m: &DMatrix<C64>, a2: f64) -> Result<DMatrix<C64>> {
    if !(a2.is_finite() && a2 >= 0.0) {
        return domain(format!("a² must be ≥ 0, got {a2}"));
    }
    apply_kernel(m, |k| C64::new((-0.5 * a2 * (k * k) as f64).exp(), 0.0))
}

impl DensityMatrix {
    /// [`apply_dephasing`] on a full state. A Gaussian kernel is a positive
    /// semidefinite Schur multiplier with unit diagonal, so the result is
    /// again a density matrix.
    pub fn dephased(&self, model: &NoiseModel, t: f64) -> Result<DensityMatrix> {
        let out = apply_dephasing(self.elements(), model, t)?;
        if model.is_gaussian() {
            Ok(DensityMatrix::from_parts(self.basis(), out))
        } else {
            DensityMatrix::new(self.basis(), out)
        }
    }

    pub fn gaussian_dephased(&self, a2: f64) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_parts(
            self.basis(),
            apply_gaussian_dephasing(self.elements(), a2)?,
        ))
    }
}

/// Noise-averaged state `ρ(t)`: noiseless `χJ_z²` evolution followed by the
/// dephasing filter, which carries the mean drift `λ̄` of the model.
pub fn noisy_density_matrix(
    initial: &PureState,
    spec: &QuenchSpec,
    model: &NoiseModel,
    t: f64,
) -> Result<DensityMatrix> {
    check_drift(spec.lambda_bar(), model.lambda_bar)?;
    let rho0 = evolve_noiseless(initial, &spec.without_drift(), t)?.density();
    rho0.dephased(model, t)
}

fn check_drift(spec: f64, noise: f64) -> Result<()> {
    if (spec - noise).abs() > 1e-12 * spec.abs().max(noise.abs()).max(1.0) {
        return Err(Error::Config(format!(
            "quench λ̄ = {spec} differs from the noise mean λ̄ = {noise}"
        )));
    }
    Ok(())
}

/// Long-time limit: the binomial mixture of Fock states.
pub fn steady_state(atoms: usize) -> Result<DensityMatrix> {
    let basis = FockBasis::new(atoms)?;
    DensityMatrix::diagonal(basis, &binomial_weights(atoms))
}

/// Rescale an accumulated amplitude `a_q` formed at `t_q` to the amplitude at
/// `t_{q′}` under the same Markov intensity: `a² ∝ t_q ∝ 1/q`.
pub fn markov_matched_amplitude(a: f64, q_from: usize, q_to: usize) -> f64 {
    a * (q_from as f64 / q_to as f64).sqrt()
}

/// Sampled accumulated phases `φ(t) = −∫₀ᵗ λ` on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub lambda_bar: f64,
    trajectories: usize,
    steps: usize,
    /// Row-major `trajectories × (steps + 1)`.
    phases: Vec<f64>,
}

impl TrajectoryEnsemble {
    /// Wrap externally produced phases, one row per trajectory.
    pub fn from_phases(dt: f64, lambda_bar: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let trajectories = rows.len();
        if trajectories == 0 {
            return domain("ensemble needs at least one trajectory");
        }
        let width = rows[0].len();
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return domain("trajectories must share a non-empty time grid");
        }
        if rows.iter().any(|r| r[0] != 0.0) {
            return domain("φ(0) must vanish for every trajectory");
        }
        Ok(Self {
            dt,
            t_max: dt * (width - 1) as f64,
            seed: 0,
            lambda_bar,
            trajectories,
            steps: width - 1,
            phases: rows.into_iter().flatten().collect(),
        })
    }

    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn trajectory(&self, k: usize) -> &[f64] {
        let w = self.steps + 1;
        &self.phases[k * w..(k + 1) * w]
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    /// Grid index of `t`; off-grid times are rejected.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let k = x.round();
        if !(x.is_finite()
            && k >= 0.0
            && k <= self.steps as f64
            && (x - k).abs() <= 1e-9 * x.max(1.0))
        {
            return domain(format!(
                "t = {t} is not on the ensemble grid (dt = {}, {} steps)",
                self.dt, self.steps
            ));
        }
        Ok(k as usize)
    }

    pub fn phases_at(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        let w = self.steps + 1;
        (0..self.trajectories).map(move |k| self.phases[k * w + index])
    }

    pub fn mean(&self, index: usize) -> f64 {
        self.phases_at(index).sum::<f64>() / self.trajectories as f64
    }

    /// Unbiased sample variance of `φ` at a grid index.
    pub fn variance(&self, index: usize) -> f64 {
        let mean = self.mean(index);
        let ss: f64 = self.phases_at(index).map(|p| (p - mean) * (p - mean)).sum();
        ss / (self.trajectories.max(2) - 1) as f64
    }

    /// Empirical `f̃(m) = ⟨e^{imφ}⟩` for `m = 0..=max_m`.
    pub fn characteristic(&self, index: usize, max_m: usize) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); max_m + 1];
        for phi in self.phases_at(index) {
            let step = C64::from_polar(1.0, phi);
            let mut z = C64::new(1.0, 0.0);
            for slot in acc.iter_mut() {
                *slot += z;
                z *= step;
            }
        }
        let inv = 1.0 / self.trajectories as f64;
        acc.into_iter().map(|c| c * inv).collect()
    }
}

/// Sample `trajectories` noise paths of `φ(t)` on `[0, t_max]`.
///
/// OU: exact AR(1) update of `λ` with a stationary start, `φ` by the
/// trapezoid rule. White: Gaussian increments of mean `−λ̄dt` and variance
/// `2D dt`. Static: one Gaussian `λ` per trajectory, `φ = −λt`. Trajectories are grouped into fixed-size streams seeded from
/// `(seed, stream)` and sampled in parallel.
pub fn sample_trajectories(
    model: &NoiseModel,
    t_max: f64,
    dt: f64,
    trajectories: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if trajectories == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    if !(dt.is_finite() && dt > 0.0 && t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::Config(format!(
            "invalid grid: t_max = {t_max}, dt = {dt}"
        )));
    }
    let steps_f = (t_max / dt).round();
    if (steps_f * dt - t_max).abs() > 1e-9 * t_max.max(dt) {
        return Err(Error::Config(format!(
            "t_max = {t_max} is not a multiple of dt = {dt}"
        )));
    }
    let steps = steps_f as usize;
    let lambda_bar = model.lambda_bar;

    enum Step {
        Ou { sigma: f64, decay: f64, kick: f64 },
        White { scale: f64 },
        Static { sigma: f64 },
    }
    let step = match &model.kind {
        NoiseKind::OrnsteinUhlenbeck { h0, tc } => {
            if dt > tc * MAX_OU_STEP_FRACTION {
                return Err(Error::Config(format!(
                    "dt = {dt} too coarse for Tc = {tc}; need dt ≤ Tc/20"
                )));
            }
            let decay = (-dt / tc).exp();
            Step::Ou {
                sigma: h0.sqrt(),
                decay,
                kick: h0.sqrt() * (-(-2.0 * dt / tc).exp_m1()).sqrt(),
            }
        }
        NoiseKind::White { d } => Step::White {
            scale: (2.0 * d * dt).sqrt(),
        },
        NoiseKind::Static { h0 } => Step::Static { sigma: h0.sqrt() },
        NoiseKind::Custom(_) => {
            return Err(Error::Config(
                "trajectory sampling supports OU, white and static noise only".into(),
            ))
        }
    };
    if !model.is_gaussian() {
        return Err(Error::Config(
            "cannot sample a model with a cumulant hook".into(),
        ));
    }

    let width = steps + 1;
    let mut phases = vec![0.0; trajectories * width];
    phases
        .par_chunks_mut(TRAJECTORIES_PER_STREAM * width)
        .enumerate()
        .for_each(|(stream, block)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream as u64);
            for row in block.chunks_mut(width) {
                let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
                row[0] = 0.0;
                match step {
                    Step::Ou { sigma, decay, kick } => {
                        let mut lambda = lambda_bar + sigma * normal();
                        for k in 0..steps {
                            let next = lambda_bar + (lambda - lambda_bar) * decay + kick * normal();
                            row[k + 1] = row[k] - 0.5 * dt * (lambda + next);
                            lambda = next;
                        }
                    }
                    Step::White { scale } => {
                        for k in 0..steps {
                            row[k + 1] = row[k] - lambda_bar * dt + scale * normal();
                        }
                    }
                    Step::Static { sigma } => {
                        let lambda = lambda_bar + sigma * normal();
                        for (k, phi) in row.iter_mut().enumerate().skip(1) {
                            *phi = -lambda * dt * k as f64;
                        }
                    }
                }
            }
        });

    Ok(TrajectoryEnsemble {
        dt,
        t_max: steps as f64 * dt,
        seed,
        lambda_bar,
        trajectories,
        steps,
        phases,
    })
}

/// Monte-Carlo average of `e^{−iφJ_z}ρ⁽⁰⁾(t)e^{iφJ_z}` over the ensemble,
/// evaluated through the empirical characteristic function in place of
/// `f̃(n′ − n, t)`. The drift is carried by the sampled phases, so `spec`
/// must agree with the ensemble's `λ̄`.
pub fn mc_density_matrix(
    initial: &PureState,
    spec: &QuenchSpec,
    ensemble: &TrajectoryEnsemble,
    t: f64,
) -> Result<DensityMatrix> {
    check_drift(spec.lambda_bar(), ensemble.lambda_bar)?;
    let index = ensemble.time_index(t)?;
    let t_grid = ensemble.time(index);
    let rho0 = evolve_noiseless(initial, &spec.without_drift(), t_grid)?.density();
    let chars = ensemble.characteristic(index, spec.atoms());
    let out = apply_kernel(rho0.elements(), |m| {
        let c = chars[m.unsigned_abs() as usize];
        if m >= 0 {
            c
        } else {
            c.conj()
        }
    })?;
    Ok(DensityMatrix::from_parts(rho0.basis(), out))
}
