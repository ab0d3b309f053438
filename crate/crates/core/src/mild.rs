//! Mild formulation and its Picard iteration.
//!
//! The solution is the fixed point of `x = gamma + L(x) + B(x, x)` with
//!
//! ```text
//! gamma   = e^{t Lap} u0
//! B(u, w) = int_0^t e^{(t-s) Lap} div(beta u grad S(alpha w, 0, 0))(s) ds
//! L(u)    = int_0^t e^{(t-s) Lap} div(beta u grad S(0, V0, V1))(s) ds
//! ```
//!
//! using the coefficients of the first species. Operator norms are not
//! computable, so [`estimate_constants`] bounds them from below by random
//! probing and the contraction verdict treats those bounds as exact.

use std::fmt;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{apply_derivative, Grid, ScalarField, SpaceTimeField};
use crate::heat::duhamel_spectral;
use crate::lp::{
    homogeneous_norm_coeffs, inhomogeneous_norm_coeffs, random_band_limited, DyadicFilterBank,
    TimeExponent,
};
use crate::scalar::{lit, to_f64, Real};
use crate::sim::SolverConfig;
use crate::wave::wave_solve_spectral;

type Coeffs<T> = Vec<Complex<T>>;

/// Space-time norm used for the iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpec {
    /// `L^2_T(H^1)`, inhomogeneous, trapezoid in time.
    L2H1,
    /// Chemin-Lerner `L~^p_T(H^s)`, homogeneous, block form.
    CheminLerner { p: TimeExponent, s: f64 },
}

impl NormSpec {
    /// `L^2_T(H^1)` in one dimension, `L~^1_T(H^{dim/2 - 1})` otherwise.
    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            Self::L2H1
        } else {
            Self::CheminLerner {
                p: TimeExponent::One,
                s: dim as f64 / 2.0 - 1.0,
            }
        }
    }

    /// Regularity index of the data space paired with this norm.
    fn data_index(&self, dim: usize) -> f64 {
        match self {
            Self::L2H1 => dim as f64 / 2.0 - 1.0,
            Self::CheminLerner { s, .. } => *s,
        }
    }
}

/// A [`NormSpec`] bound to a grid.
#[derive(Clone, Debug)]
pub struct SpaceTimeNorm<T: Real> {
    spec: NormSpec,
    bank: Option<DyadicFilterBank<T>>,
}

impl<T: Real> SpaceTimeNorm<T> {
    pub fn new(spec: NormSpec, grid: &Grid<T>) -> Result<Self> {
        let bank = match spec {
            NormSpec::L2H1 => None,
            NormSpec::CheminLerner { .. } => Some(DyadicFilterBank::new(grid)?),
        };
        Ok(Self { spec, bank })
    }

    pub fn spec(&self) -> NormSpec {
        self.spec
    }

    pub fn eval(&self, u: &SpaceTimeField<T>) -> T {
        let hats: Vec<Coeffs<T>> = u
            .frames()
            .iter()
            .map(|f| f.to_spectral().coeffs().to_vec())
            .collect();
        self.eval_spectral(u.grid(), &hats, u.dt())
    }

    fn eval_spectral(&self, grid: &Grid<T>, hats: &[Coeffs<T>], dt: T) -> T {
        match (self.spec, &self.bank) {
            (NormSpec::CheminLerner { p, s }, Some(bank)) => {
                let history: Vec<Vec<T>> = hats.iter().map(|h| bank.block_norms(h)).collect();
                bank.reduce_history(&history, dt, p, lit(s)).norm()
            }
            _ => {
                let sq: Vec<T> = hats
                    .iter()
                    .map(|h| inhomogeneous_norm_coeffs(grid, h, T::one()))
                    .collect();
                TimeExponent::Two.reduce(&sq, dt)
            }
        }
    }
}

/// Data of one mild problem.
#[derive(Clone, Debug)]
pub struct MildProblem<T: Real> {
    pub config: SolverConfig<T>,
    pub u0: ScalarField<T>,
    pub v0: ScalarField<T>,
    pub v1: ScalarField<T>,
}

impl<T: Real> MildProblem<T> {
    pub fn new(config: SolverConfig<T>, u0: ScalarField<T>, v0: ScalarField<T>, v1: ScalarField<T>) -> Result<Self> {
        for f in [&u0, &v0, &v1] {
            config.grid().ensure_same(f.grid(), "mild problem data")?;
        }
        Ok(Self { config, u0, v0, v1 })
    }

    fn is_zero(&self) -> bool {
        [&self.u0, &self.v0, &self.v1]
            .iter()
            .all(|f| f.max_abs() == T::zero())
    }
}

/// Stopping and probing parameters of [`picard_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct IterationConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub norm: NormSpec,
    /// Random probes used for the contraction report.
    pub trials: usize,
    pub seed: u64,
}

impl IterationConfig {
    pub fn new(max_iters: usize, rel_tol: f64, norm: NormSpec) -> Result<Self> {
        if max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        Ok(Self {
            max_iters,
            rel_tol,
            norm,
            trials: 16,
            seed: 0,
        })
    }

    pub fn with_probes(mut self, trials: usize, seed: u64) -> Self {
        self.trials = trials;
        self.seed = seed;
        self
    }
}

/// Empirical constants of the contraction argument.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport<T: Real> {
    pub norm_l: T,
    pub norm_b: T,
    pub c0: T,
    pub c1: T,
    pub c2: T,
    pub alpha: T,
    pub data_norm: T,
    pub guaranteed: bool,
    /// `||u0||_{H^{s-2}} + ||grad V0||_{H^s} + ||V1||_{H^s}`.
    pub eta_used: T,
    /// `||u0||_{H^{s-2}}` (global smallness).
    pub u0_norm_global: T,
    /// `||u0||_{H^s}` (local smallness).
    pub u0_norm_local: T,
    /// `||grad V0||_{H^s} + ||V1||_{H^s}`.
    pub wave_data_norm: T,
}

pub const REPORT_KEYS: [&str; 9] = [
    "norm_L", "norm_B", "C0", "C1", "C2", "alpha", "data_norm", "guaranteed", "eta_used",
];

impl<T: Real> fmt::Display for ContractionReport<T> {
    /// Flat `key=value` block, one entry per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |x: T| format!("{:.16e}", to_f64(x));
        let values = [
            num(self.norm_l),
            num(self.norm_b),
            num(self.c0),
            num(self.c1),
            num(self.c2),
            num(self.alpha),
            num(self.data_norm),
            self.guaranteed.to_string(),
            num(self.eta_used),
        ];
        for (k, v) in REPORT_KEYS.iter().zip(values) {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl<T: Real> ContractionReport<T> {
    /// Parses the block written by `Display`; the extra fields are not
    /// serialized and come back as zero.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vals: [Option<String>; 9] = Default::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key=value", i + 1)))?;
            let slot = REPORT_KEYS
                .iter()
                .position(|&name| name == k.trim())
                .ok_or_else(|| Error::Format(format!("line {}: unknown key `{k}`", i + 1)))?;
            vals[slot] = Some(v.trim().to_string());
        }
        let get = |i: usize| -> Result<&str> {
            vals[i]
                .as_deref()
                .ok_or_else(|| Error::Format(format!("missing key `{}`", REPORT_KEYS[i])))
        };
        let num = |i: usize| -> Result<T> {
            get(i)?
                .parse::<f64>()
                .map(lit)
                .map_err(|_| Error::Format(format!("bad value for `{}`", REPORT_KEYS[i])))
        };
        Ok(Self {
            norm_l: num(0)?,
            norm_b: num(1)?,
            c0: num(2)?,
            c1: num(3)?,
            c2: num(4)?,
            alpha: num(5)?,
            data_norm: num(6)?,
            guaranteed: get(7)?
                .parse()
                .map_err(|_| Error::Format("bad value for `guaranteed`".into()))?,
            eta_used: num(8)?,
            u0_norm_global: T::zero(),
            u0_norm_local: T::zero(),
            wave_data_norm: T::zero(),
        })
    }
}

/// Precomputed pieces shared by the operators of one problem.
struct Operators<'a, T: Real> {
    grid: &'a Grid<T>,
    dt: T,
    alpha: T,
    beta: T,
    len: usize,
}

impl<'a, T: Real> Operators<'a, T> {
    fn new(config: &'a SolverConfig<T>) -> Self {
        let sp = config.species()[0];
        Self {
            grid: config.grid(),
            dt: config.dt(),
            alpha: sp.alpha,
            beta: sp.beta,
            len: config.steps() + 1,
        }
    }

    fn zeros(&self) -> Coeffs<T> {
        vec![Complex::new(T::zero(), T::zero()); self.grid.len()]
    }

    /// Physical `grad S(alpha w, V0, V1)` at every level, `[level][axis]`.
    fn wave_gradient(&self, w: Option<&[Coeffs<T>]>, v0: Coeffs<T>, v1: Coeffs<T>) -> Vec<Vec<Vec<T>>> {
        let source: Vec<Coeffs<T>> = match w {
            Some(w) => w
                .iter()
                .map(|c| c.iter().map(|&z| z * self.alpha).collect())
                .collect(),
            None => vec![self.zeros(); self.len],
        };
        wave_solve_spectral(self.grid, &source, self.dt, v0, v1)
            .into_iter()
            .map(|(v, _)| {
                (0..self.grid.dim())
                    .map(|axis| {
                        let mut c = v.clone();
                        apply_derivative(self.grid, axis, &mut c);
                        self.grid.ifft_real(c)
                    })
                    .collect()
            })
            .collect()
    }

    /// `e^{t Lap} u0 + int e^{(t-s) Lap} div(beta u grad S)` in coefficients.
    fn heat_of_drift(&self, u0: Coeffs<T>, u: &[Coeffs<T>], grad_s: &[Vec<Vec<T>>]) -> Vec<Coeffs<T>> {
        let source: Vec<Coeffs<T>> = u
            .iter()
            .zip(grad_s)
            .map(|(uk, gk)| {
                let mut out = self.zeros();
                if self.beta == T::zero() {
                    return out;
                }
                let phys = self.grid.ifft_real(uk.clone());
                for (axis, ga) in gk.iter().enumerate() {
                    let flux: Vec<T> = phys.iter().zip(ga).map(|(&a, &b)| self.beta * a * b).collect();
                    let mut c = self.grid.fft_real(&flux);
                    apply_derivative(self.grid, axis, &mut c);
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o + ci;
                    }
                }
                out
            })
            .collect();
        duhamel_spectral(self.grid, u0, &source, self.dt)
    }

    fn to_field(&self, hats: Vec<Coeffs<T>>, times: &[T]) -> SpaceTimeField<T> {
        let frames = hats
            .into_iter()
            .map(|c| ScalarField::from_raw(self.grid, self.grid.ifft_real(c)))
            .collect();
        SpaceTimeField::from_parts(self.grid, times.to_vec(), frames)
    }
}

fn hats_of<T: Real>(u: &SpaceTimeField<T>) -> Vec<Coeffs<T>> {
    u.frames()
        .iter()
        .map(|f| f.to_spectral().coeffs().to_vec())
        .collect()
}

fn check_trajectory<T: Real>(u: &SpaceTimeField<T>, config: &SolverConfig<T>) -> Result<()> {
    config.grid().ensure_same(u.grid(), "mild operator input")?;
    if u.len() != config.steps() + 1 || (to_f64(u.dt()) - to_f64(config.dt())).abs() > 1e-12 * to_f64(config.dt()) {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} levels with dt = {}, configuration expects {} with dt = {}",
            u.len(),
            u.dt(),
            config.steps() + 1,
            config.dt()
        )));
    }
    Ok(())
}

/// `B(u, w)`: wave gradient of `alpha w`, product with `beta u`,
/// divergence, then Duhamel from zero.
pub fn bilinear_b<T: Real>(
    u: &SpaceTimeField<T>,
    w: &SpaceTimeField<T>,
    config: &SolverConfig<T>,
) -> Result<SpaceTimeField<T>> {
    check_trajectory(u, config)?;
    check_trajectory(w, config)?;
    let ops = Operators::new(config);
    let uh = hats_of(u);
    let grad = ops.wave_gradient(Some(&hats_of(w)), ops.zeros(), ops.zeros());
    Ok(ops.to_field(ops.heat_of_drift(ops.zeros(), &uh, &grad), u.times()))
}

/// `L(u)`: as [`bilinear_b`] with the free wave `grad S(0, V0, V1)`.
pub fn linear_l<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
    config: &SolverConfig<T>,
) -> Result<SpaceTimeField<T>> {
    check_trajectory(u, config)?;
    for f in [v0, v1] {
        config.grid().ensure_same(f.grid(), "wave data")?;
    }
    let ops = Operators::new(config);
    let grad = ops.wave_gradient(
        None,
        v0.to_spectral().coeffs().to_vec(),
        v1.to_spectral().coeffs().to_vec(),
    );
    Ok(ops.to_field(ops.heat_of_drift(ops.zeros(), &hats_of(u), &grad), u.times()))
}

/// `gamma = e^{t Lap} u0` on the time levels of `config`.
pub fn free_heat<T: Real>(u0: &ScalarField<T>, config: &SolverConfig<T>) -> Result<SpaceTimeField<T>> {
    config.grid().ensure_same(u0.grid(), "initial datum")?;
    let ops = Operators::new(config);
    let zero = vec![ops.zeros(); ops.len];
    let hats = duhamel_spectral(ops.grid, u0.to_spectral().coeffs().to_vec(), &zero, ops.dt);
    Ok(ops.to_field(hats, &config.times()))
}

/// Random space-time probe `a (1 - t/T) + b t/T`, zero mean, band `|k| <= n/8`.
fn random_probe<T: Real>(grid: &Grid<T>, len: usize, rng: &mut ChaCha8Rng) -> Vec<Coeffs<T>> {
    let kmax = (grid.n() / 8) as i64;
    let a = random_band_limited(grid, kmax, rng).to_spectral().coeffs().to_vec();
    let b = random_band_limited(grid, kmax, rng).to_spectral().coeffs().to_vec();
    let last = T::from_usize(len - 1).unwrap();
    (0..len)
        .map(|k| {
            let th = T::from_usize(k).unwrap() / last;
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| x * (T::one() - th) + y * th)
                .collect()
        })
        .collect()
}

fn scale_hats<T: Real>(h: &[Coeffs<T>], a: T) -> Vec<Coeffs<T>> {
    h.iter().map(|c| c.iter().map(|&z| z * a).collect()).collect()
}

struct TrialRatios<T> {
    b: T,
    l: T,
    heat: T,
}

/// Probe ratios of one trial; `None` when a probe is degenerate.
fn trial<T: Real>(
    problem: &MildProblem<T>,
    norm: &SpaceTimeNorm<T>,
    free_grad: &[Vec<Vec<T>>],
    data_index: T,
    scale: T,
    rng: &mut ChaCha8Rng,
) -> Option<TrialRatios<T>> {
    let config = &problem.config;
    let ops = Operators::new(config);
    let g = ops.grid;
    let u = scale_hats(&random_probe(g, ops.len, rng), scale);
    let w = scale_hats(&random_probe(g, ops.len, rng), scale);
    let kmax = (g.n() / 8) as i64;
    let u0 = random_band_limited(g, kmax, rng).scaled(scale);
    let nu = norm.eval_spectral(g, &u, ops.dt);
    let nw = norm.eval_spectral(g, &w, ops.dt);
    let u0c = u0.to_spectral().coeffs().to_vec();
    let n0 = data_norm_of(g, &u0c, norm.spec(), data_index);
    if !(nu > T::zero() && nw > T::zero() && n0 > T::zero()) {
        return None;
    }
    let grad_w = ops.wave_gradient(Some(&w), ops.zeros(), ops.zeros());
    let b = ops.heat_of_drift(ops.zeros(), &u, &grad_w);
    let l = ops.heat_of_drift(ops.zeros(), &u, free_grad);
    let zero = vec![ops.zeros(); ops.len];
    let h = duhamel_spectral(g, u0c, &zero, ops.dt);
    Some(TrialRatios {
        b: norm.eval_spectral(g, &b, ops.dt) / (nu * nw),
        l: norm.eval_spectral(g, &l, ops.dt) / nu,
        heat: norm.eval_spectral(g, &h, ops.dt) / n0,
    })
}

/// Norm of an initial datum paired with the iteration norm: `L^2` for
/// `L^2_T(H^1)`, `H^{s-2}` for `L~^1_T(H^s)`.
fn data_norm_of<T: Real>(g: &Grid<T>, c: &[Complex<T>], spec: NormSpec, s: T) -> T {
    match spec {
        NormSpec::L2H1 => inhomogeneous_norm_coeffs(g, c, T::zero()),
        NormSpec::CheminLerner { .. } => homogeneous_norm_coeffs(g, c, s - lit(2.0)),
    }
}

/// Randomized lower bounds for the operator constants, with the resulting
/// contraction verdict for `problem`.
///
/// Trials are independent and may run in parallel; each uses its own
/// ChaCha stream and the maxima are reduced in trial order, so the result
/// depends only on `seed`.
pub fn estimate_constants<T: Real>(
    problem: &MildProblem<T>,
    spec: NormSpec,
    trials: usize,
    seed: u64,
) -> Result<ContractionReport<T>> {
    estimate_constants_scaled(problem, spec, trials, seed, T::one())
}

pub(crate) fn estimate_constants_scaled<T: Real>(
    problem: &MildProblem<T>,
    spec: NormSpec,
    trials: usize,
    seed: u64,
    scale: T,
) -> Result<ContractionReport<T>> {
    if trials < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 trials, got {trials}")));
    }
    let config = &problem.config;
    let g = config.grid();
    let norm = SpaceTimeNorm::new(spec, g)?;
    let s: T = lit(spec.data_index(g.dim()));
    let ops = Operators::new(config);
    let free_grad = ops.wave_gradient(
        None,
        problem.v0.to_spectral().coeffs().to_vec(),
        problem.v1.to_spectral().coeffs().to_vec(),
    );
    let v0c = problem.v0.to_spectral().coeffs().to_vec();
    let v1c = problem.v1.to_spectral().coeffs().to_vec();
    let wave_data = homogeneous_norm_coeffs(g, &v0c, s + T::one()) + homogeneous_norm_coeffs(g, &v1c, s);

    let cap = 10 * trials;
    let results: Vec<Result<TrialRatios<T>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            // degenerate probes are redrawn from the same stream
            for _ in 0..cap / trials {
                if let Some(r) = trial(problem, &norm, &free_grad, s, scale, &mut rng) {
                    return Ok(r);
                }
            }
            Err(Error::Degenerate(format!("trial {i} kept drawing zero probes")))
        })
        .collect();
    let (mut c0, mut norm_l, mut c2) = (T::zero(), T::zero(), T::zero());
    for r in results {
        let r = r?;
        c0 = c0.max(r.b);
        norm_l = norm_l.max(r.l);
        c2 = c2.max(r.heat);
    }
    let c1 = if wave_data > T::zero() {
        norm_l / wave_data
    } else {
        T::zero()
    };
    if wave_data == T::zero() {
        norm_l = T::zero();
    }
    let norm_b = c0;
    let alpha = if norm_l < T::one() {
        (T::one() - norm_l).powi(2) / (lit::<T>(4.0) * norm_b)
    } else {
        T::zero()
    };
    let gamma = free_heat(&problem.u0, config)?;
    let data_norm = norm.eval(&gamma);
    let u0c = problem.u0.to_spectral().coeffs().to_vec();
    let u0_norm_global = homogeneous_norm_coeffs(g, &u0c, s - lit(2.0));
    let u0_norm_local = homogeneous_norm_coeffs(g, &u0c, s);
    Ok(ContractionReport {
        norm_l,
        norm_b,
        c0,
        c1,
        c2,
        alpha,
        data_norm,
        guaranteed: norm_l < T::one() && data_norm <= alpha,
        eta_used: u0_norm_global + wave_data,
        u0_norm_global,
        u0_norm_local,
        wave_data_norm: wave_data,
    })
}

/// Record of a finished iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointTrace<T: Real> {
    /// `||x_{k+1} - x_k|| / ||x_{k+1}||` per iteration.
    pub residuals: Vec<T>,
    /// `||x_{k+1} - x_k||` per iteration.
    pub increments: Vec<T>,
    pub iterations: usize,
}

/// Generic Picard loop `x <- phi(x)` from `x0`, stopping once the relative
/// increment drops below `rel_tol`. With `ball = Some(r)` every iterate
/// must satisfy `||x|| <= r`.
pub fn fixed_point<X, T: Real>(
    x0: X,
    mut phi: impl FnMut(&X) -> Result<X>,
    mut norm: impl FnMut(&X) -> T,
    mut dist: impl FnMut(&X, &X) -> T,
    max_iters: usize,
    rel_tol: T,
    ball: Option<T>,
) -> Result<(X, FixedPointTrace<T>)> {
    let mut x = x0;
    let mut residuals = Vec::new();
    let mut increments = Vec::new();
    for k in 1..=max_iters {
        let next = phi(&x)?;
        let size = norm(&next);
        let inc = dist(&next, &x);
        if !size.is_finite() || !inc.is_finite() {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        if let Some(r) = ball {
            if size > r * (T::one() + lit(1e-9)) {
                return Err(Error::BallEscape {
                    iter: k,
                    norm: to_f64(size),
                    radius: to_f64(r),
                });
            }
        }
        let rel = if size > T::zero() { inc / size } else { inc };
        residuals.push(rel);
        increments.push(inc);
        x = next;
        if rel <= rel_tol {
            return Ok((
                x,
                FixedPointTrace {
                    residuals,
                    increments,
                    iterations: k,
                },
            ));
        }
    }
    Err(Error::NotConverged {
        iters: max_iters,
        last: residuals.last().map(|&r| to_f64(r)).unwrap_or(f64::NAN),
        history: residuals.iter().map(|&r| to_f64(r)).collect(),
    })
}

/// Result of [`picard_solve`].
#[derive(Clone, Debug)]
pub struct PicardOutput<T: Real> {
    pub solution: SpaceTimeField<T>,
    pub report: ContractionReport<T>,
    pub trace: FixedPointTrace<T>,
}

/// Solves `x = gamma + L(x) + B(x, x)` by Picard iteration from `gamma`.
pub fn picard_solve<T: Real>(problem: &MildProblem<T>, iter: &IterationConfig) -> Result<PicardOutput<T>> {
    picard_solve_from(problem, iter, None)
}

/// [`picard_solve`] with an optional starting iterate in place of `gamma`.
pub fn picard_solve_from<T: Real>(
    problem: &MildProblem<T>,
    iter: &IterationConfig,
    start: Option<&SpaceTimeField<T>>,
) -> Result<PicardOutput<T>> {
    let config = &problem.config;
    let report = estimate_constants(problem, iter.norm, iter.trials, iter.seed)?;
    let times = config.times();
    if problem.is_zero() && start.is_none() {
        return Ok(PicardOutput {
            solution: SpaceTimeField::zeros(config.grid(), &times),
            report,
            trace: FixedPointTrace {
                residuals: vec![T::zero()],
                increments: vec![T::zero()],
                iterations: 1,
            },
        });
    }
    let g = config.grid();
    let norm = SpaceTimeNorm::new(iter.norm, g)?;
    let ops = Operators::new(config);
    let u0c = problem.u0.to_spectral().coeffs().to_vec();
    let v0c = problem.v0.to_spectral().coeffs().to_vec();
    let v1c = problem.v1.to_spectral().coeffs().to_vec();
    let x0 = match start {
        Some(s) => {
            check_trajectory(s, config)?;
            hats_of(s)
        }
        None => {
            let zero = vec![ops.zeros(); ops.len];
            duhamel_spectral(g, u0c.clone(), &zero, ops.dt)
        }
    };
    let ball = report.guaranteed.then(|| lit::<T>(2.0) * report.alpha);
    let (x, trace) = fixed_point(
        x0,
        |x: &Vec<Coeffs<T>>| {
            // gamma + L(x) + B(x, x) in one Duhamel pass
            let grad = ops.wave_gradient(Some(x), v0c.clone(), v1c.clone());
            Ok(ops.heat_of_drift(u0c.clone(), x, &grad))
        },
        |x| norm.eval_spectral(g, x, ops.dt),
        |a, b| {
            let d: Vec<Coeffs<T>> = a
                .iter()
                .zip(b)
                .map(|(p, q)| p.iter().zip(q).map(|(&y, &z)| y - z).collect())
                .collect();
            norm.eval_spectral(g, &d, ops.dt)
        },
        iter.max_iters,
        lit(iter.rel_tol),
        ball,
    )?;
    Ok(PicardOutput {
        solution: ops.to_field(x, &times),
        report,
        trace,
    })
}
