//! Solution map `S(u, V0, V1)` of `V_tt - Lap V = u`, `V(0) = V0`,
//! `V_t(0) = V1`, by exact per-frequency propagation.
//!
//! Over one step of length `h` the source is linear in time and the
//! variation-of-constants integral against `sin(|xi|(h - s)) / |xi|` is taken
//! in closed form. The zero mode uses the analytic limits of the weights.
//! In 1D the result is cross-checked against the d'Alembert characteristic
//! formula in [`characteristic_solve_1d`] and [`characteristic_gradient_1d`].

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{apply_derivative, Grid, ScalarField, SpaceTimeField};
use crate::lp::{DyadicFilterBank, TimeExponent};
use crate::scalar::{lit, to_f64, Real};

/// Potential and its time derivative at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState<T: Real> {
    pub v: ScalarField<T>,
    pub vt: ScalarField<T>,
    pub t: T,
}

impl<T: Real> WaveState<T> {
    pub fn new(v: ScalarField<T>, vt: ScalarField<T>, t: T) -> Result<Self> {
        v.grid().ensure_same(vt.grid(), "wave state")?;
        Ok(Self { v, vt, t })
    }

    /// `1/2 int (V_t^2 + |grad V|^2) dx`, evaluated spectrally.
    pub fn energy(&self) -> T {
        let g = self.v.grid();
        let v = self.v.to_spectral();
        let vt = self.vt.to_spectral();
        spectral_energy(g, v.coeffs(), vt.coeffs())
    }
}

pub(crate) fn spectral_energy<T: Real>(g: &Grid<T>, v: &[Complex<T>], vt: &[Complex<T>]) -> T {
    let sum = g
        .xi_sq()
        .iter()
        .zip(v.iter().zip(vt))
        .fold(T::zero(), |a, (&k2, (p, q))| a + q.norm_sqr() + k2 * p.norm_sqr());
    sum * g.volume() / lit(2.0)
}

/// Power series `sum_k (-1)^k x^{2k} c_k` for the small-argument weights.
fn even_series<T: Real>(x: T, coeff: impl Fn(usize) -> T) -> T {
    let x2 = x * x;
    let mut pow = T::one();
    let mut sum = T::zero();
    for k in 0..12 {
        let term = pow * coeff(k);
        sum = if k % 2 == 0 { sum + term } else { sum - term };
        pow = pow * x2;
    }
    sum
}

fn inv_factorial<T: Real>(m: usize) -> T {
    (1..=m).fold(T::one(), |a, i| a / T::from_usize(i).unwrap())
}

/// Per-frequency coefficients of one step of length `h`.
#[derive(Clone, Debug)]
pub(crate) struct WaveStep<T: Real> {
    cos: Vec<T>,
    sinc: Vec<T>,
    neg_w_sin: Vec<T>,
    v_start: Vec<T>,
    v_end: Vec<T>,
    vt_start: Vec<T>,
    vt_end: Vec<T>,
}

impl<T: Real> WaveStep<T> {
    pub fn new(grid: &Grid<T>, h: T) -> Self {
        let n = grid.len();
        let mut s = Self {
            cos: Vec::with_capacity(n),
            sinc: Vec::with_capacity(n),
            neg_w_sin: Vec::with_capacity(n),
            v_start: Vec::with_capacity(n),
            v_end: Vec::with_capacity(n),
            vt_start: Vec::with_capacity(n),
            vt_end: Vec::with_capacity(n),
        };
        let h2 = h * h;
        for &k2 in grid.xi_sq() {
            let w = k2.sqrt();
            let x = w * h;
            let (c, sn) = (x.cos(), x.sin());
            // a0 = int_0^h sin(w s)/w ds, a1 = int_0^h sin(w s)/w (s/h) ds
            // b0 = int_0^h cos(w s) ds,   b1 = int_0^h cos(w s) (s/h) ds
            let (a0, a1, b0, b1, sinc) = if x < lit(0.5) {
                (
                    h2 * even_series(x, |k| inv_factorial::<T>(2 * k + 2)),
                    h2 * even_series(x, |k| {
                        T::from_usize(2 * k + 2).unwrap() * inv_factorial::<T>(2 * k + 3)
                    }),
                    h * even_series(x, |k| inv_factorial::<T>(2 * k + 1)),
                    h * even_series(x, |k| {
                        T::from_usize(2 * k + 1).unwrap() * inv_factorial::<T>(2 * k + 2)
                    }),
                    h * even_series(x, |k| inv_factorial::<T>(2 * k + 1)),
                )
            } else {
                (
                    (T::one() - c) / k2,
                    (sn - x * c) / (k2 * w * h),
                    sn / w,
                    (x * sn + c - T::one()) / (k2 * h),
                    sn / w,
                )
            };
            s.cos.push(c);
            s.sinc.push(sinc);
            s.neg_w_sin.push(-w * sn);
            s.v_start.push(a1);
            s.v_end.push(a0 - a1);
            s.vt_start.push(b1);
            s.vt_end.push(b0 - b1);
        }
        s
    }

    /// Advances `(v, vt)` over one step with a source linear from `f0` to `f1`.
    pub fn advance(
        &self,
        v: &mut [Complex<T>],
        vt: &mut [Complex<T>],
        f0: &[Complex<T>],
        f1: &[Complex<T>],
    ) {
        for i in 0..v.len() {
            let (p, q) = (v[i], vt[i]);
            v[i] = p * self.cos[i] + q * self.sinc[i] + f0[i] * self.v_start[i] + f1[i] * self.v_end[i];
            vt[i] = p * self.neg_w_sin[i]
                + q * self.cos[i]
                + f0[i] * self.vt_start[i]
                + f1[i] * self.vt_end[i];
        }
    }
}

fn check_inputs<T: Real>(u: &SpaceTimeField<T>, v0: &ScalarField<T>, v1: &ScalarField<T>) -> Result<()> {
    u.grid().ensure_same(v0.grid(), "wave datum V0")?;
    u.grid().ensure_same(v1.grid(), "wave datum V1")?;
    if u.is_empty() {
        return Err(Error::InvalidTimeGrid("empty time grid".into()));
    }
    Ok(())
}

/// Spectral trajectory `(V_hat, V_t_hat)` at every level of `source`.
pub(crate) fn wave_solve_spectral<T: Real>(
    grid: &Grid<T>,
    source: &[Vec<Complex<T>>],
    dt: T,
    v0: Vec<Complex<T>>,
    v1: Vec<Complex<T>>,
) -> Vec<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let mut out = Vec::with_capacity(source.len());
    out.push((v0, v1));
    if source.len() > 1 {
        let step = WaveStep::new(grid, dt);
        for k in 0..source.len() - 1 {
            let (mut v, mut vt) = out[k].clone();
            step.advance(&mut v, &mut vt, &source[k], &source[k + 1]);
            out.push((v, vt));
        }
    }
    out
}

fn spectral_frames<T: Real>(u: &SpaceTimeField<T>) -> Vec<Vec<Complex<T>>> {
    u.frames()
        .iter()
        .map(|f| f.to_spectral().coeffs().to_vec())
        .collect()
}

/// `S(u, V0, V1)` sampled at the time levels of `u`.
pub fn wave_solve<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
) -> Result<SpaceTimeField<T>> {
    Ok(wave_states(u, v0, v1)?
        .into_iter()
        .map(|s| s.v)
        .collect::<Vec<_>>())
    .map(|frames| SpaceTimeField::from_parts(u.grid(), u.times().to_vec(), frames))
}

/// Full wave states `(V, V_t)` at the time levels of `u`.
pub fn wave_states<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
) -> Result<Vec<WaveState<T>>> {
    check_inputs(u, v0, v1)?;
    let g = u.grid();
    let traj = wave_solve_spectral(
        g,
        &spectral_frames(u),
        u.dt(),
        v0.to_spectral().coeffs().to_vec(),
        v1.to_spectral().coeffs().to_vec(),
    );
    Ok(traj
        .into_iter()
        .zip(u.times())
        .map(|((v, vt), &t)| WaveState {
            v: ScalarField::from_raw(g, g.ifft_real(v)),
            vt: ScalarField::from_raw(g, g.ifft_real(vt)),
            t,
        })
        .collect())
}

/// `grad S(u, V0, V1)`, one space-time field per axis.
pub fn wave_gradient<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
) -> Result<Vec<SpaceTimeField<T>>> {
    check_inputs(u, v0, v1)?;
    let g = u.grid();
    let traj = wave_solve_spectral(
        g,
        &spectral_frames(u),
        u.dt(),
        v0.to_spectral().coeffs().to_vec(),
        v1.to_spectral().coeffs().to_vec(),
    );
    Ok((0..g.dim())
        .map(|axis| {
            let frames = traj
                .iter()
                .map(|(v, _)| {
                    let mut c = v.clone();
                    apply_derivative(g, axis, &mut c);
                    ScalarField::from_raw(g, g.ifft_real(c))
                })
                .collect();
            SpaceTimeField::from_parts(g, u.times().to_vec(), frames)
        })
        .collect())
}

/// Spectral window kernel: multiplies by `2 sin(xi a) / xi`, i.e. maps `f`
/// to `x -> int_{x-a}^{x+a} f`. Nyquist dropped.
fn window_integral<T: Real>(g: &Grid<T>, c: &[Complex<T>], a: T) -> Vec<Complex<T>> {
    c.iter()
        .enumerate()
        .map(|(p, &ci)| {
            let xi = g.xi_deriv(0)[p];
            let k = g.k_axis(0, p);
            if k == (g.n() / 2) as i64 {
                Complex::new(T::zero(), T::zero())
            } else if xi == T::zero() {
                ci * (lit::<T>(2.0) * a)
            } else {
                ci * (lit::<T>(2.0) * (xi * a).sin() / xi)
            }
        })
        .collect()
}

/// Spectral shift difference: maps `f` to `x -> f(x + a) - f(x - a)`,
/// multiplier `2 i sin(xi a)`. Nyquist dropped.
fn shift_difference<T: Real>(g: &Grid<T>, c: &[Complex<T>], a: T) -> Vec<Complex<T>> {
    c.iter()
        .enumerate()
        .map(|(p, &ci)| {
            let xi = g.xi_deriv(0)[p];
            let m = lit::<T>(2.0) * (xi * a).sin();
            Complex::new(-ci.im * m, ci.re * m)
        })
        .collect()
}

/// Spectral shift sum: `x -> f(x + a) + f(x - a)`, multiplier `2 cos(xi a)`.
fn shift_sum<T: Real>(g: &Grid<T>, c: &[Complex<T>], a: T) -> Vec<Complex<T>> {
    c.iter()
        .enumerate()
        .map(|(p, &ci)| {
            if g.k_axis(0, p) == (g.n() / 2) as i64 {
                return Complex::new(T::zero(), T::zero());
            }
            ci * (lit::<T>(2.0) * (g.xi_deriv(0)[p] * a).cos())
        })
        .collect()
}

/// Composite Simpson over `[0, t_m]` of `kernel(t_m - s, u(s))`, with `u`
/// linear in time between levels and `substeps` (even) panels per level.
fn characteristic_time_integral<T: Real>(
    hats: &[Vec<Complex<T>>],
    dt: T,
    m: usize,
    substeps: usize,
    kernel: &impl Fn(T, &[Complex<T>]) -> Vec<Complex<T>>,
) -> Vec<Complex<T>> {
    let n = hats[0].len();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
    let t_m = T::from_usize(m).unwrap() * dt;
    let h = dt / T::from_usize(substeps).unwrap();
    for k in 0..m {
        for q in 0..=substeps {
            let w = if q == 0 || q == substeps {
                T::one()
            } else if q % 2 == 1 {
                lit(4.0)
            } else {
                lit(2.0)
            };
            let theta = T::from_usize(q).unwrap() / T::from_usize(substeps).unwrap();
            let s = T::from_usize(k).unwrap() * dt + theta * dt;
            let interp: Vec<Complex<T>> = hats[k]
                .iter()
                .zip(&hats[k + 1])
                .map(|(&a, &b)| a * (T::one() - theta) + b * theta)
                .collect();
            let val = kernel(t_m - s, &interp);
            let scale = w * h / lit(3.0);
            for (a, v) in acc.iter_mut().zip(val) {
                *a = *a + v * scale;
            }
        }
    }
    acc
}

fn ensure_1d<T: Real>(g: &Grid<T>) -> Result<()> {
    if g.dim() != 1 {
        return Err(Error::InvalidArgument(
            "characteristic formulas are one-dimensional".into(),
        ));
    }
    Ok(())
}

/// d'Alembert form of `S`: `1/2 int_0^t int_{x-(t-s)}^{x+(t-s)} u ds dy
/// + 1/2 (V0(x+t) + V0(x-t) + int_{x-t}^{x+t} V1)`, with shifts and windows
/// taken spectrally and the time integral by Simpson's rule.
pub fn characteristic_solve_1d<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
    substeps: usize,
) -> Result<SpaceTimeField<T>> {
    check_inputs(u, v0, v1)?;
    let g = u.grid();
    ensure_1d(g)?;
    let substeps = substeps.max(2) + substeps % 2;
    let hats = spectral_frames(u);
    let c0 = v0.to_spectral().coeffs().to_vec();
    let c1 = v1.to_spectral().coeffs().to_vec();
    let half = lit::<T>(0.5);
    let frames = u
        .times()
        .iter()
        .enumerate()
        .map(|(m, &t)| {
            let data: Vec<Complex<T>> = shift_sum(g, &c0, t)
                .into_iter()
                .zip(window_integral(g, &c1, t))
                .map(|(a, b)| (a + b) * half)
                .collect();
            let src = characteristic_time_integral(&hats, u.dt(), m, substeps, &|a, f| {
                window_integral(g, f, a)
            });
            let total = data
                .into_iter()
                .zip(src)
                .map(|(a, b)| a + b * half)
                .collect();
            ScalarField::from_raw(g, g.ifft_real(total))
        })
        .collect();
    Ok(SpaceTimeField::from_parts(g, u.times().to_vec(), frames))
}

/// d'Alembert form of `dS/dx`: `1/2 int_0^t (u(s, x+(t-s)) - u(s, x-(t-s))) ds
/// + 1/2 (V0'(x+t) + V0'(x-t) + V1(x+t) - V1(x-t))`.
pub fn characteristic_gradient_1d<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
    substeps: usize,
) -> Result<SpaceTimeField<T>> {
    check_inputs(u, v0, v1)?;
    let g = u.grid();
    ensure_1d(g)?;
    let substeps = substeps.max(2) + substeps % 2;
    let hats = spectral_frames(u);
    let mut d0 = v0.to_spectral().coeffs().to_vec();
    apply_derivative(g, 0, &mut d0);
    let c1 = v1.to_spectral().coeffs().to_vec();
    let half = lit::<T>(0.5);
    let frames = u
        .times()
        .iter()
        .enumerate()
        .map(|(m, &t)| {
            let data: Vec<Complex<T>> = shift_sum(g, &d0, t)
                .into_iter()
                .zip(shift_difference(g, &c1, t))
                .map(|(a, b)| (a + b) * half)
                .collect();
            let src = characteristic_time_integral(&hats, u.dt(), m, substeps, &|a, f| {
                shift_difference(g, f, a)
            });
            let total = data
                .into_iter()
                .zip(src)
                .map(|(a, b)| a + b * half)
                .collect();
            ScalarField::from_raw(g, g.ifft_real(total))
        })
        .collect();
    Ok(SpaceTimeField::from_parts(g, u.times().to_vec(), frames))
}

/// Width of the smallest periodic interval (per axis, maximum over axes)
/// outside which every field is below `rel_threshold` times its own max.
pub fn support_width<T: Real>(fields: &[&ScalarField<T>], rel_threshold: T) -> T {
    let Some(first) = fields.first() else {
        return T::zero();
    };
    let g = first.grid();
    let n = g.n();
    let mut width = T::zero();
    for axis in 0..g.dim() {
        let mut occupied = vec![false; n];
        for f in fields {
            let thr = f.max_abs() * rel_threshold;
            if f.max_abs() == T::zero() {
                continue;
            }
            for (flat, &v) in f.samples().iter().enumerate() {
                if v.abs() > thr {
                    let i = if g.dim() == 1 {
                        flat
                    } else if axis == 0 {
                        flat / n
                    } else {
                        flat % n
                    };
                    occupied[i] = true;
                }
            }
        }
        if !occupied.iter().any(|&o| o) {
            continue;
        }
        // longest circular run of empty cells
        let mut best = 0usize;
        let mut run = 0usize;
        for i in 0..2 * n {
            if occupied[i % n] {
                run = 0;
            } else {
                run += 1;
                best = best.max(run.min(n));
            }
        }
        width = width.max(T::from_usize(n - best).unwrap() * g.dx());
    }
    width
}

/// Relative threshold used to measure the effective support of data.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// `true` when waves launched from data of the given width reach around the
/// torus by time `t`, i.e. `width + 2t >= L`.
pub fn wraps_around<T: Real>(width: T, t: T, length: T) -> bool {
    width + lit::<T>(2.0) * t >= length
}

/// Ratio `||grad S||_{L~^inf_T(H^s)} / (||grad V0||_{H^s} + ||V1||_{H^s} +
/// ||u||_{L~^1_T(H^s)})`, all norms in Littlewood-Paley block form.
pub fn strichartz_energy_probe<T: Real>(
    u: &SpaceTimeField<T>,
    v0: &ScalarField<T>,
    v1: &ScalarField<T>,
    s: T,
    bank: &DyadicFilterBank<T>,
) -> Result<T> {
    check_inputs(u, v0, v1)?;
    let g = u.grid();
    bank.grid().ensure_same(g, "Strichartz probe")?;
    let hats = spectral_frames(u);
    let c0 = v0.to_spectral().coeffs().to_vec();
    let c1 = v1.to_spectral().coeffs().to_vec();
    let rhs = bank.weight(bank.gradient_block_norms(&c0), s).norm()
        + bank.weight(bank.block_norms(&c1), s).norm()
        + bank
            .reduce_history(
                &hats.iter().map(|h| bank.block_norms(h)).collect::<Vec<_>>(),
                u.dt(),
                TimeExponent::One,
                s,
            )
            .norm();
    if !(rhs > T::zero()) {
        return Err(Error::Degenerate(
            "right-hand side of the wave estimate vanishes".into(),
        ));
    }
    let traj = wave_solve_spectral(g, &hats, u.dt(), c0, c1);
    let history: Vec<Vec<T>> = traj.iter().map(|(v, _)| bank.gradient_block_norms(v)).collect();
    let lhs = bank
        .reduce_history(&history, u.dt(), TimeExponent::Infinity, s)
        .norm();
    let r = lhs / rhs;
    if !r.is_finite() {
        return Err(Error::NonFinite { t: to_f64(u.final_time()) });
    }
    Ok(r)
}
