//! Time stepper for the coupled drift-diffusion / wave system
//!
//! ```text
//! d_t u_j - Lap u_j = div(beta_j u_j grad V)      (j = 1..m)
//! d_tt V  - Lap V   = sum_k alpha_k u_k
//! ```
//!
//! on the periodic box, with per-frame diagnostics and the energy and
//! Gronwall audits built on them.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{apply_derivative, step_count, time_levels, Grid, ScalarField, SpaceTimeField};
use crate::heat::HeatStep;
use crate::lp::{homogeneous_norm_coeffs, inhomogeneous_norm_coeffs};
use crate::scalar::{lit, to_f64, Real};
use crate::wave::{support_width, wraps_around, WaveState, WaveStep, SUPPORT_THRESHOLD};

/// Coupling coefficients of one species.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Species<T: Real> {
    /// Weight of the species in the wave source.
    pub alpha: T,
    /// Strength of the drift along `grad V`.
    pub beta: T,
}

impl<T: Real> Species<T> {
    pub fn new(alpha: T, beta: T) -> Self {
        Self { alpha, beta }
    }
}

/// What to do once a wave launched from the initial data can reach around
/// the periodic box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum WrapPolicy {
    #[default]
    Warn,
    Error,
}

impl FromStr for WrapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warn" => Ok(Self::Warn),
            "error" => Ok(Self::Error),
            _ => Err(Error::InvalidArgument(format!(
                "wrap policy must be `warn` or `error`, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for WrapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Warn => "warn",
            Self::Error => "error",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T: Real> {
    grid: Grid<T>,
    t_final: T,
    dt: T,
    steps: usize,
    species: Vec<Species<T>>,
    wrap_policy: WrapPolicy,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(
        grid: Grid<T>,
        t_final: T,
        dt: T,
        species: Vec<Species<T>>,
        wrap_policy: WrapPolicy,
    ) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::InvalidArgument("at least one species is required".into()));
        }
        if species
            .iter()
            .any(|s| !s.alpha.is_finite() || !s.beta.is_finite())
        {
            return Err(Error::InvalidArgument("coupling coefficients must be finite".into()));
        }
        let steps = step_count(t_final, dt)?;
        Ok(Self {
            grid,
            t_final,
            dt,
            steps,
            species,
            wrap_policy,
        })
    }

    /// One species with `alpha = beta = 1`.
    pub fn single(grid: Grid<T>, t_final: T, dt: T) -> Result<Self> {
        Self::new(grid, t_final, dt, vec![Species::new(T::one(), T::one())], WrapPolicy::Warn)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn t_final(&self) -> T {
        self.t_final
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn times(&self) -> Vec<T> {
        time_levels(self.dt, self.steps)
    }

    pub fn species(&self) -> &[Species<T>] {
        &self.species
    }

    pub fn wrap_policy(&self) -> WrapPolicy {
        self.wrap_policy
    }

    pub fn with_horizon(&self, t_final: T) -> Result<Self> {
        Self::new(self.grid.clone(), t_final, self.dt, self.species.clone(), self.wrap_policy)
    }

    pub fn with_dt(&self, dt: T) -> Result<Self> {
        Self::new(self.grid.clone(), self.t_final, dt, self.species.clone(), self.wrap_policy)
    }

    pub fn with_grid(&self, grid: Grid<T>) -> Result<Self> {
        Self::new(grid, self.t_final, self.dt, self.species.clone(), self.wrap_policy)
    }

    pub fn with_species(&self, species: Vec<Species<T>>) -> Result<Self> {
        Self::new(self.grid.clone(), self.t_final, self.dt, species, self.wrap_policy)
    }

    pub fn with_wrap_policy(mut self, policy: WrapPolicy) -> Self {
        self.wrap_policy = policy;
        self
    }
}

/// Densities of all species plus the wave state at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState<T: Real> {
    pub u: Vec<ScalarField<T>>,
    pub wave: WaveState<T>,
}

type Coeffs<T> = Vec<Complex<T>>;

struct Stepper<'a, T: Real> {
    config: &'a SolverConfig<T>,
    heat: HeatStep<T>,
    wave: WaveStep<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(config: &'a SolverConfig<T>) -> Self {
        Self {
            config,
            heat: HeatStep::new(&config.grid, config.dt),
            wave: WaveStep::new(&config.grid, config.dt),
        }
    }

    fn grad(&self, v: &[Complex<T>]) -> Vec<Vec<T>> {
        let g = &self.config.grid;
        (0..g.dim())
            .map(|axis| {
                let mut c = v.to_vec();
                apply_derivative(g, axis, &mut c);
                g.ifft_real(c)
            })
            .collect()
    }

    /// Coefficients of `div(beta u grad V)`.
    fn drift(&self, u: &[Complex<T>], grad_v: &[Vec<T>], beta: T) -> Coeffs<T> {
        let g = &self.config.grid;
        let mut out = vec![Complex::new(T::zero(), T::zero()); u.len()];
        if beta == T::zero() {
            return out;
        }
        let phys = g.ifft_real(u.to_vec());
        for (axis, gv) in grad_v.iter().enumerate() {
            let flux: Vec<T> = phys.iter().zip(gv).map(|(&a, &b)| beta * a * b).collect();
            let mut c = g.fft_real(&flux);
            apply_derivative(g, axis, &mut c);
            for (o, ci) in out.iter_mut().zip(c) {
                *o = *o + ci;
            }
        }
        out
    }

    fn charge(&self, u: &[Coeffs<T>]) -> Coeffs<T> {
        let mut rho = vec![Complex::new(T::zero(), T::zero()); u[0].len()];
        for (uj, sp) in u.iter().zip(&self.config.species) {
            for (r, &c) in rho.iter_mut().zip(uj) {
                *r = *r + c * sp.alpha;
            }
        }
        rho
    }

    /// Predictor-corrector step: exponential Euler for the densities, exact
    /// wave propagation with the charge linear between the start and the
    /// predicted end, then the trapezoid-type Duhamel correction.
    fn advance(&self, u: &mut [Coeffs<T>], v: &mut Coeffs<T>, vt: &mut Coeffs<T>) {
        let grad0 = self.grad(v);
        let f0: Vec<Coeffs<T>> = u
            .iter()
            .zip(&self.config.species)
            .map(|(uj, sp)| self.drift(uj, &grad0, sp.beta))
            .collect();
        let pred: Vec<Coeffs<T>> = u.iter().zip(&f0).map(|(uj, fj)| self.heat.euler(uj, fj)).collect();
        let rho0 = self.charge(u);
        let rho1 = self.charge(&pred);
        self.wave.advance(v, vt, &rho0, &rho1);
        let grad1 = self.grad(v);
        for ((uj, (pj, f0j)), sp) in u.iter_mut().zip(pred.iter().zip(&f0)).zip(&self.config.species) {
            let f1j = self.drift(pj, &grad1, sp.beta);
            self.heat.advance(uj, f0j, &f1j);
        }
    }
}

fn finite<T: Real>(c: &[Complex<T>]) -> bool {
    c.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_state<T: Real>(config: &SolverConfig<T>, u: &[ScalarField<T>], v0: &ScalarField<T>, v1: &ScalarField<T>) -> Result<()> {
    if u.len() != config.species.len() {
        return Err(Error::InvalidArgument(format!(
            "{} initial densities for {} species",
            u.len(),
            config.species.len()
        )));
    }
    for f in u.iter().chain([v0, v1]) {
        config.grid.ensure_same(f.grid(), "simulation state")?;
    }
    Ok(())
}

/// Advances `state` by one step of `config.dt()`.
pub fn step<T: Real>(state: &SimState<T>, config: &SolverConfig<T>) -> Result<SimState<T>> {
    check_state(config, &state.u, &state.wave.v, &state.wave.vt)?;
    let t_next = state.wave.t + config.dt;
    if to_f64(t_next) > to_f64(config.t_final) + 1e-12 {
        return Err(Error::InvalidTimeGrid(format!(
            "step to t = {t_next} passes the final time {}",
            config.t_final
        )));
    }
    let g = &config.grid;
    let mut u: Vec<Coeffs<T>> = state.u.iter().map(|f| f.to_spectral().coeffs().to_vec()).collect();
    let mut v = state.wave.v.to_spectral().coeffs().to_vec();
    let mut vt = state.wave.vt.to_spectral().coeffs().to_vec();
    Stepper::new(config).advance(&mut u, &mut v, &mut vt);
    if !u.iter().chain([&v, &vt]).all(|c| finite(c)) {
        return Err(Error::NonFinite { t: to_f64(t_next) });
    }
    Ok(SimState {
        u: u.into_iter().map(|c| ScalarField::from_raw(g, g.ifft_real(c))).collect(),
        wave: WaveState {
            v: ScalarField::from_raw(g, g.ifft_real(v)),
            vt: ScalarField::from_raw(g, g.ifft_real(vt)),
            t: t_next,
        },
    })
}

/// One row of per-frame diagnostics for a single species.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow<T: Real> {
    pub t: T,
    pub mass: T,
    pub l1: T,
    pub l2: T,
    pub h1: T,
    pub min_u: T,
    /// `1/2 d/dt ||u||^2 + ||grad u||^2`, time derivative by finite differences.
    pub energy_lhs: T,
    /// `|int beta u grad u . grad V|`.
    pub energy_rhs: T,
    /// `||u||_4^4 / (||u||_1^2 ||grad u||_2^2)`.
    pub gn_ratio: T,
    pub wrapped: bool,
}

pub const DIAGNOSTICS_HEADER: &str = "t,mass,l1,l2,h1,min_u,energy_lhs,energy_rhs,gn_ratio,wrapped";

impl<T: Real> DiagnosticsRow<T> {
    /// `||grad u||_2^2` recovered from the `h1` and `l2` columns.
    pub fn grad_sq(&self) -> T {
        (self.h1 * self.h1 - self.l2 * self.l2).max(T::zero())
    }

    pub fn to_csv_line(&self) -> String {
        let v = [
            self.t,
            self.mass,
            self.l1,
            self.l2,
            self.h1,
            self.min_u,
            self.energy_lhs,
            self.energy_rhs,
            self.gn_ratio,
        ];
        let mut s: Vec<String> = v.iter().map(|x| format!("{:.16e}", to_f64(*x))).collect();
        s.push(u8::from(self.wrapped).to_string());
        s.join(",")
    }
}

pub fn diagnostics_to_csv<T: Real>(rows: &[DiagnosticsRow<T>]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn diagnostics_from_csv<T: Real>(text: &str) -> Result<Vec<DiagnosticsRow<T>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DIAGNOSTICS_HEADER) {
        return Err(Error::Format("missing diagnostics header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 10 {
                return Err(Error::Format(format!("row {}: expected 10 columns", i + 1)));
            }
            let mut v = [T::zero(); 9];
            for (slot, c) in v.iter_mut().zip(&cells) {
                let x: f64 = c
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: bad number `{c}`", i + 1)))?;
                *slot = lit(x);
            }
            let wrapped = match cells[9] {
                "0" | "false" => false,
                "1" | "true" => true,
                c => return Err(Error::Format(format!("row {}: bad flag `{c}`", i + 1))),
            };
            Ok(DiagnosticsRow {
                t: v[0],
                mass: v[1],
                l1: v[2],
                l2: v[3],
                h1: v[4],
                min_u: v[5],
                energy_lhs: v[6],
                energy_rhs: v[7],
                gn_ratio: v[8],
                wrapped,
            })
        })
        .collect()
}

/// Output of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput<T: Real> {
    pub u: Vec<SpaceTimeField<T>>,
    pub v: SpaceTimeField<T>,
    /// Time derivative of the potential at the final time.
    pub vt_final: ScalarField<T>,
    /// One table per species.
    pub diagnostics: Vec<Vec<DiagnosticsRow<T>>>,
}

/// Integrates from `t = 0` to `config.t_final()` and records every frame.
pub fn run<T: Real>(
    u0: &[ScalarField<T>],
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
    config: &SolverConfig<T>,
) -> Result<RunOutput<T>> {
    check_state(config, u0, v0, v1)?;
    for f in u0.iter().chain([v0, v1]) {
        if !f.is_finite() {
            return Err(Error::NonFinite { t: 0.0 });
        }
    }
    let g = &config.grid;
    let times = config.times();
    let mut refs: Vec<&ScalarField<T>> = u0.iter().collect();
    refs.push(v0);
    refs.push(v1);
    let width = support_width(&refs, lit(SUPPORT_THRESHOLD));
    let wrapped: Vec<bool> = times
        .iter()
        .map(|&t| wraps_around(width, t, g.length()))
        .collect();
    if config.wrap_policy == WrapPolicy::Error {
        if let Some(k) = wrapped.iter().position(|&w| w) {
            return Err(Error::WrapAround {
                t: to_f64(times[k]),
                width: to_f64(width),
                length: to_f64(g.length()),
            });
        }
    }

    let stepper = Stepper::new(config);
    let mut u: Vec<Coeffs<T>> = u0.iter().map(|f| f.to_spectral().coeffs().to_vec()).collect();
    let mut v = v0.to_spectral().coeffs().to_vec();
    let mut vt = v1.to_spectral().coeffs().to_vec();
    let mut u_frames: Vec<Vec<ScalarField<T>>> = u0.iter().map(|f| vec![f.clone()]).collect();
    let mut v_frames = vec![v0.clone()];
    for &t in &times[1..] {
        stepper.advance(&mut u, &mut v, &mut vt);
        if !u.iter().chain([&v, &vt]).all(|c| finite(c)) {
            return Err(Error::NonFinite { t: to_f64(t) });
        }
        for (frames, c) in u_frames.iter_mut().zip(&u) {
            frames.push(ScalarField::from_raw(g, g.ifft_real(c.clone())));
        }
        v_frames.push(ScalarField::from_raw(g, g.ifft_real(v.clone())));
    }
    let vt_final = ScalarField::from_raw(g, g.ifft_real(vt));
    let v_traj = SpaceTimeField::from_parts(g, times.clone(), v_frames);
    let u_traj: Vec<SpaceTimeField<T>> = u_frames
        .into_iter()
        .map(|f| SpaceTimeField::from_parts(g, times.clone(), f))
        .collect();
    let diagnostics = u_traj
        .iter()
        .zip(&config.species)
        .map(|(uj, sp)| diagnostics(uj, &v_traj, sp.beta, &wrapped))
        .collect();
    Ok(RunOutput {
        u: u_traj,
        v: v_traj,
        vt_final,
        diagnostics,
    })
}

/// `d/dt` of a sampled series: centered inside, second-order one-sided at
/// the ends.
fn time_derivative<T: Real>(y: &[T], dt: T) -> Vec<T> {
    let n = y.len();
    let two = lit::<T>(2.0);
    match n {
        0 => vec![],
        1 => vec![T::zero()],
        2 => vec![(y[1] - y[0]) / dt; 2],
        _ => (0..n)
            .map(|k| {
                if k == 0 {
                    (-lit::<T>(3.0) * y[0] + lit::<T>(4.0) * y[1] - y[2]) / (two * dt)
                } else if k == n - 1 {
                    (lit::<T>(3.0) * y[n - 1] - lit::<T>(4.0) * y[n - 2] + y[n - 3]) / (two * dt)
                } else {
                    (y[k + 1] - y[k - 1]) / (two * dt)
                }
            })
            .collect(),
    }
}

struct EnergyTerms<T> {
    l2_sq: Vec<T>,
    grad_sq: Vec<T>,
    rhs: Vec<T>,
    lhs: Vec<T>,
}

fn energy_terms<T: Real>(u: &SpaceTimeField<T>, v: &SpaceTimeField<T>, beta: T) -> EnergyTerms<T> {
    let g = u.grid();
    let mut l2_sq = Vec::with_capacity(u.len());
    let mut grad_sq = Vec::with_capacity(u.len());
    let mut rhs = Vec::with_capacity(u.len());
    for (uf, vf) in u.frames().iter().zip(v.frames()) {
        let uc = uf.to_spectral().coeffs().to_vec();
        let vc = vf.to_spectral().coeffs().to_vec();
        let l2 = uf.l2_norm();
        l2_sq.push(l2 * l2);
        let gs = homogeneous_norm_coeffs(g, &uc, T::one());
        grad_sq.push(gs * gs);
        let mut integrand = vec![T::zero(); g.len()];
        for axis in 0..g.dim() {
            let mut du = uc.clone();
            apply_derivative(g, axis, &mut du);
            let mut dv = vc.clone();
            apply_derivative(g, axis, &mut dv);
            let du = g.ifft_real(du);
            let dv = g.ifft_real(dv);
            for (i, slot) in integrand.iter_mut().enumerate() {
                *slot = *slot + uf.samples()[i] * du[i] * dv[i];
            }
        }
        let total = integrand.iter().fold(T::zero(), |a, &x| a + x) * g.cell_volume();
        rhs.push((beta * total).abs());
    }
    let lhs = time_derivative(&l2_sq, u.dt())
        .into_iter()
        .zip(&grad_sq)
        .map(|(d, &gs)| d / lit(2.0) + gs)
        .collect();
    EnergyTerms {
        l2_sq,
        grad_sq,
        rhs,
        lhs,
    }
}

fn diagnostics<T: Real>(
    u: &SpaceTimeField<T>,
    v: &SpaceTimeField<T>,
    beta: T,
    wrapped: &[bool],
) -> Vec<DiagnosticsRow<T>> {
    let g = u.grid();
    let e = energy_terms(u, v, beta);
    u.frames()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let l1 = f.l1_norm();
            let l4 = f.lp_norm(lit(4.0));
            let num = l4.powi(4);
            let den = l1 * l1 * e.grad_sq[k];
            let gn_ratio = if num == T::zero() {
                T::zero()
            } else {
                num / den
            };
            DiagnosticsRow {
                t: u.times()[k],
                mass: f.integral(),
                l1,
                l2: e.l2_sq[k].sqrt(),
                h1: inhomogeneous_norm_coeffs(g, f.to_spectral().coeffs(), T::one()),
                min_u: f.min(),
                energy_lhs: e.lhs[k],
                energy_rhs: e.rhs[k],
                gn_ratio,
                wrapped: wrapped[k],
            }
        })
        .collect()
}

/// One row of [`energy_audit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyAuditRow<T: Real> {
    pub t: T,
    pub lhs: T,
    pub rhs: T,
    /// `rhs - lhs`; nonnegative for the exact solution.
    pub slack: T,
}

/// Discrete form of `1/2 d/dt ||u||^2 + ||grad u||^2 <= |int beta u grad u . grad V|`
/// for the first species.
pub fn energy_audit<T: Real>(
    u: &SpaceTimeField<T>,
    v: &SpaceTimeField<T>,
    config: &SolverConfig<T>,
) -> Result<Vec<EnergyAuditRow<T>>> {
    u.ensure_compatible(v)?;
    let e = energy_terms(u, v, config.species[0].beta);
    Ok(u
        .times()
        .iter()
        .zip(e.lhs.iter().zip(&e.rhs))
        .map(|(&t, (&lhs, &rhs))| EnergyAuditRow {
            t,
            lhs,
            rhs,
            slack: rhs - lhs,
        })
        .collect())
}

/// Value of `C_eta` in the Gronwall envelope, fitted once with
/// [`calibrate_c_eta`] on the reference Gaussian run and kept fixed. The fit
/// is zero there: `z` never exceeds `z(0)`, so the envelope reduces to
/// `z(t) <= z(0)`.
pub const GRONWALL_C_ETA: f64 = 0.0;

/// `z(t) = ||u(t)||^2 + int_0^t ||grad u||^2`, trapezoid in time.
pub fn gronwall_z<T: Real>(diag: &[DiagnosticsRow<T>]) -> Vec<T> {
    let mut acc = T::zero();
    let half = lit::<T>(0.5);
    diag.iter()
        .enumerate()
        .map(|(k, r)| {
            if k > 0 {
                let p = &diag[k - 1];
                acc = acc + (r.t - p.t) * half * (p.grad_sq() + r.grad_sq());
            }
            r.l2 * r.l2 + acc
        })
        .collect()
}

/// Envelope `(z0 + 2 C D t) exp(C ||u0||_1^2 t^4 / 2)` with
/// `D = ||V0||_{H^2}^4 + ||V1||_{H^1}^4`.
pub fn gronwall_envelope<T: Real>(
    diag: &[DiagnosticsRow<T>],
    c_eta: T,
    u0_l1: T,
    v0_h2: T,
    v1_h1: T,
) -> Vec<T> {
    let z0 = diag.first().map(|r| r.l2 * r.l2).unwrap_or_else(T::zero);
    let d = v0_h2.powi(4) + v1_h1.powi(4);
    let two = lit::<T>(2.0);
    diag.iter()
        .map(|r| {
            let t = r.t;
            (z0 + two * c_eta * d * t) * (c_eta * u0_l1 * u0_l1 * t.powi(4) / two).exp()
        })
        .collect()
}

/// Checks `z(t) <= B(t)` on every frame with a relative tolerance of 1e-8.
pub fn gronwall_audit_with<T: Real>(
    diag: &[DiagnosticsRow<T>],
    c_eta: T,
    u0_l1: T,
    v0_h2: T,
    v1_h1: T,
) -> Result<(Vec<T>, bool)> {
    if diag.is_empty() {
        return Err(Error::InvalidArgument("empty diagnostics history".into()));
    }
    let env = gronwall_envelope(diag, c_eta, u0_l1, v0_h2, v1_h1);
    let z = gronwall_z(diag);
    let ok = z
        .iter()
        .zip(&env)
        .all(|(&zk, &bk)| zk <= bk * (T::one() + lit(1e-8)));
    Ok((env, ok))
}

/// [`gronwall_audit_with`] at the frozen constant [`GRONWALL_C_ETA`].
pub fn gronwall_audit<T: Real>(
    diag: &[DiagnosticsRow<T>],
    _config: &SolverConfig<T>,
    u0_l1: T,
    v0_h2: T,
    v1_h1: T,
) -> Result<(Vec<T>, bool)> {
    gronwall_audit_with(diag, lit(GRONWALL_C_ETA), u0_l1, v0_h2, v1_h1)
}

/// Smallest `C_eta` (to relative precision 1e-6) for which the envelope
/// holds on `diag`.
pub fn calibrate_c_eta<T: Real>(diag: &[DiagnosticsRow<T>], u0_l1: T, v0_h2: T, v1_h1: T) -> Result<T> {
    let holds = |c: T| gronwall_audit_with(diag, c, u0_l1, v0_h2, v1_h1).map(|r| r.1);
    if holds(T::zero())? {
        return Ok(T::zero());
    }
    let mut hi = lit::<T>(1e-6);
    while !holds(hi)? {
        hi = hi * lit(4.0);
        if hi > lit(1e12) {
            return Err(Error::Degenerate("no finite constant closes the envelope".into()));
        }
    }
    let mut lo = T::zero();
    while hi - lo > hi * lit(1e-6) {
        let mid = (lo + hi) / lit(2.0);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::heat_propagate;
    use std::f64::consts::PI;

    fn gauss(g: &Grid<f64>, amp: f64, c: f64, w: f64) -> ScalarField<f64> {
        ScalarField::from_fn(g, |x| amp * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
    }

    #[test]
    fn config_validation() {
        let g = Grid::<f64>::new(1, 64, 16.0).unwrap();
        assert!(SolverConfig::single(g.clone(), 1.0, 0.3).is_err());
        assert!(SolverConfig::new(g.clone(), 1.0, 0.1, vec![], WrapPolicy::Warn).is_err());
        let c = SolverConfig::single(g, 1.0, 0.1).unwrap();
        assert_eq!(c.steps(), 10);
        assert_eq!("error".parse::<WrapPolicy>().unwrap(), WrapPolicy::Error);
        assert!("stop".parse::<WrapPolicy>().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::<f64>::new(1, 64, 16.0).unwrap();
        let c = SolverConfig::single(g.clone(), 0.5, 0.05).unwrap();
        let z = ScalarField::zeros(&g);
        let out = run(&[z.clone()], &z, &z, &c).unwrap();
        assert_eq!(out.u[0].max_abs(), 0.0);
        assert_eq!(out.v.max_abs(), 0.0);
        for r in &out.diagnostics[0] {
            assert_eq!((r.energy_lhs, r.energy_rhs, r.gn_ratio), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn decoupled_species_follow_heat_flow() {
        let g = Grid::<f64>::new(1, 64, 2.0 * PI).unwrap();
        let c = SolverConfig::new(g.clone(), 1.0, 0.01, vec![Species::new(1.0, 0.0)], WrapPolicy::Warn).unwrap();
        let u0 = ScalarField::from_fn(&g, |x| (3.0 * x[0]).cos());
        let v0 = gauss(&g, 1.0, PI, 0.5);
        let out = run(&[u0.clone()], &v0, &ScalarField::zeros(&g), &c).unwrap();
        for (t, f) in out.u[0].times().iter().zip(out.u[0].frames()) {
            let e = u0.scaled((-9.0 * t).exp());
            assert!(f.max_diff(&e).unwrap() < 1e-10);
        }
    }

    #[test]
    fn opposite_charges_cancel() {
        let g = Grid::<f64>::new(1, 128, 32.0).unwrap();
        let sp = vec![Species::new(1.0, 1.0), Species::new(-1.0, 1.0)];
        let c = SolverConfig::new(g.clone(), 1.0, 0.01, sp, WrapPolicy::Warn).unwrap();
        let u0 = gauss(&g, 0.5, 16.0, 2.0);
        let z = ScalarField::zeros(&g);
        let out = run(&[u0.clone(), u0.clone()], &z, &z, &c).unwrap();
        assert_eq!(out.v.max_abs(), 0.0);
        for k in 0..out.u[0].len() {
            let e = heat_propagate(&u0, out.u[0].times()[k]).unwrap();
            assert!(out.u[0].frame(k).max_diff(&e).unwrap() < 1e-10);
            assert_eq!(out.u[0].frame(k), out.u[1].frame(k));
        }
    }

    #[test]
    fn single_step_matches_run() {
        let g = Grid::<f64>::new(1, 64, 16.0).unwrap();
        let c = SolverConfig::single(g.clone(), 0.02, 0.01).unwrap();
        let u0 = gauss(&g, 0.5, 8.0, 1.5);
        let v0 = gauss(&g, 0.2, 7.0, 1.0);
        let z = ScalarField::zeros(&g);
        let out = run(&[u0.clone()], &v0, &z, &c).unwrap();
        let s0 = SimState {
            u: vec![u0],
            wave: WaveState::new(v0, z, 0.0).unwrap(),
        };
        let s1 = step(&s0, &c).unwrap();
        let s2 = step(&s1, &c).unwrap();
        assert!(s2.u[0].max_diff(out.u[0].last()).unwrap() < 1e-15);
        assert!(s2.wave.v.max_diff(out.v.last()).unwrap() < 1e-15);
        assert!(s2.wave.vt.max_diff(&out.vt_final).unwrap() < 1e-15);
        assert!(step(&s2, &c).is_err());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = Grid::<f64>::new(1, 16, 1.0).unwrap();
        let c = SolverConfig::single(g.clone(), 1.0, 0.5).unwrap();
        let z = ScalarField::zeros(&g);
        let mut bad = ScalarField::zeros(&g);
        let s = SimState {
            u: vec![ScalarField::constant(&g, 1.0)],
            wave: WaveState::new(z.clone(), z.clone(), 0.0).unwrap(),
        };
        assert!(step(&s, &c).is_ok());
        // construct a blow-up: huge drift strength with huge potential
        bad = bad.map(|_| 1e300);
        let c2 = SolverConfig::new(g.clone(), 1.0, 0.5, vec![Species::new(1e300, 1e300)], WrapPolicy::Warn).unwrap();
        let r = run(&[ScalarField::from_fn(&g, |x| 1e300 * (2.0 * PI * x[0]).cos())], &bad, &z, &c2);
        assert!(matches!(r, Err(Error::NonFinite { .. })), "{r:?}");
    }

    #[test]
    fn wrap_policy_error_stops_before_stepping() {
        let g = Grid::<f64>::new(1, 128, 16.0).unwrap();
        let c = SolverConfig::single(g.clone(), 5.0, 0.5).unwrap().with_wrap_policy(WrapPolicy::Error);
        let u0 = gauss(&g, 1.0, 8.0, 1.0);
        let z = ScalarField::zeros(&g);
        match run(&[u0.clone()], &z, &z, &c) {
            Err(Error::WrapAround { t, .. }) => assert!(t > 0.0 && t < 5.0),
            other => panic!("{other:?}"),
        }
        let warn = run(&[u0], &z, &z, &c.with_wrap_policy(WrapPolicy::Warn)).unwrap();
        assert!(!warn.diagnostics[0][0].wrapped);
        assert!(warn.diagnostics[0].last().unwrap().wrapped);
    }

    #[test]
    fn diagnostics_csv_round_trip() {
        let g = Grid::<f64>::new(1, 64, 16.0).unwrap();
        let c = SolverConfig::single(g.clone(), 0.1, 0.01).unwrap();
        let out = run(&[gauss(&g, 0.5, 8.0, 1.5)], &gauss(&g, 0.1, 8.0, 1.0), &ScalarField::zeros(&g), &c).unwrap();
        let text = diagnostics_to_csv(&out.diagnostics[0]);
        assert_eq!(text.lines().count(), 12);
        let back: Vec<DiagnosticsRow<f64>> = diagnostics_from_csv(&text).unwrap();
        assert_eq!(back, out.diagnostics[0]);
        assert!(diagnostics_from_csv::<f64>("t,mass\n").is_err());
    }

    #[test]
    fn time_derivative_is_exact_on_quadratics() {
        let y: Vec<f64> = (0..6).map(|k| (0.1 * k as f64).powi(2)).collect();
        let d = time_derivative(&y, 0.1);
        for (k, v) in d.iter().enumerate() {
            assert!((v - 0.2 * k as f64).abs() < 1e-12);
        }
    }

    fn pure_heat(dt: f64) -> (SolverConfig<f64>, ScalarField<f64>, RunOutput<f64>) {
        let g = Grid::<f64>::new(1, 128, 32.0).unwrap();
        let c = SolverConfig::new(g.clone(), 1.0, dt, vec![Species::new(1.0, 0.0)], WrapPolicy::Warn).unwrap();
        let u0 = gauss(&g, 0.5, 16.0, 1.0);
        let out = run(&[u0.clone()], &gauss(&g, 0.1, 16.0, 2.0), &ScalarField::zeros(&g), &c).unwrap();
        (c, u0, out)
    }

    #[test]
    fn pure_heat_energy_and_gronwall() {
        let (c, u0, out) = pure_heat(0.005);
        let audit = energy_audit(&out.u[0], &out.v, &c).unwrap();
        for r in &audit {
            assert_eq!(r.rhs, 0.0);
        }
        let excess = |a: &[EnergyAuditRow<f64>]| a.iter().map(|r| r.lhs.max(0.0)).fold(0.0, f64::max);
        let (c2, _, out2) = pure_heat(0.0025);
        let audit2 = energy_audit(&out2.u[0], &out2.v, &c2).unwrap();
        let ratio = excess(&audit) / excess(&audit2);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");

        let diag = &out.diagnostics[0];
        let z = gronwall_z(diag);
        for w in z.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let n0 = u0.l2_norm().powi(2);
        let last = diag.last().unwrap();
        assert!(z.last().unwrap() - last.l2 * last.l2 <= n0 * (1.0 + 1e-8));
        let (_, ok) = gronwall_audit(diag, &c, u0.l1_norm(), 0.0, 0.0).unwrap();
        assert!(ok);
        assert_eq!(calibrate_c_eta(diag, u0.l1_norm(), 0.0, 0.0).unwrap(), 0.0);
        assert!(gronwall_audit(&[], &c, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn runs_in_single_precision() {
        let g = Grid::<f32>::new(1, 64, 16.0).unwrap();
        let c = SolverConfig::single(g.clone(), 0.1, 0.01).unwrap();
        let u0 = ScalarField::from_fn(&g, |x| 0.5 * (-(x[0] - 8.0).powi(2) / 2.0).exp());
        let z = ScalarField::zeros(&g);
        let out = run(&[u0.clone()], &u0.scaled(0.2), &z, &c).unwrap();
        let m0 = out.diagnostics[0][0].mass;
        let m1 = out.diagnostics[0].last().unwrap().mass;
        assert!((m0 - m1).abs() < 1e-5 * m0);
    }
}
