//! Exact heat propagator `e^{t Lap}` and Duhamel integrals.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, SpaceTimeField};
use crate::lp::{sobolev_norm, DyadicFilterBank, TimeExponent};
use crate::scalar::{lit, Real};

/// Values `exp(-|xi|^2 t)` on a grid's frequencies.
#[derive(Clone, Debug)]
pub struct HeatMultiplier<T: Real> {
    grid: Grid<T>,
    t: T,
    values: Vec<T>,
}

impl<T: Real> HeatMultiplier<T> {
    pub fn new(grid: &Grid<T>, t: T) -> Result<Self> {
        if !(t >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "heat propagation time must be >= 0, got {t}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            t,
            values: grid.xi_sq().iter().map(|&k2| (-k2 * t).exp()).collect(),
        })
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Product of two multipliers on the same grid (time `t1 + t2`).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "heat multiplier")?;
        Ok(Self {
            grid: self.grid.clone(),
            t: self.t + other.t,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a * *b)
                .collect(),
        })
    }

    pub fn apply(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.grid.ensure_same(f.grid(), "heat multiplier")?;
        let mut c = f.to_spectral().coeffs().to_vec();
        for (ci, &m) in c.iter_mut().zip(&self.values) {
            *ci = *ci * m;
        }
        Ok(ScalarField::from_raw(&self.grid, self.grid.ifft_real(c)))
    }
}

/// `e^{t Lap} u0`.
pub fn heat_propagate<T: Real>(u0: &ScalarField<T>, t: T) -> Result<ScalarField<T>> {
    HeatMultiplier::new(u0.grid(), t)?.apply(u0)
}

/// `(1 - e^{-z}) / z`, continuous at 0.
pub(crate) fn phi1<T: Real>(z: T) -> T {
    if z < lit(0.5) {
        // sum_k (-z)^k / (k+1)!
        let mut term = T::one();
        let mut sum = T::one();
        for k in 1..20 {
            term = term * (-z) / T::from_usize(k + 1).unwrap();
            sum = sum + term;
        }
        sum
    } else {
        (T::one() - (-z).exp()) / z
    }
}

/// `(1 - e^{-z} - z e^{-z}) / z^2`, continuous at 0.
pub(crate) fn phi2<T: Real>(z: T) -> T {
    if z < lit(0.5) {
        // sum_k (-z)^k (k+1) / (k+2)!
        let mut pow_over_fact = lit::<T>(0.5); // (-z)^k / (k+2)!
        let mut sum = pow_over_fact;
        for k in 1..20 {
            pow_over_fact = pow_over_fact * (-z) / T::from_usize(k + 2).unwrap();
            sum = sum + pow_over_fact * T::from_usize(k + 1).unwrap();
        }
        sum
    } else {
        let e = (-z).exp();
        (T::one() - e - z * e) / (z * z)
    }
}

/// Per-frequency weights of one exponential-integrator step of size `h`:
/// `u(t+h) = decay * u(t) + w_start * f(t) + w_end * f(t+h)` for a source
/// linear in time over the step.
#[derive(Clone, Debug)]
pub(crate) struct HeatStep<T: Real> {
    pub decay: Vec<T>,
    /// `h * phi1`, the exponential-Euler weight.
    pub w_euler: Vec<T>,
    pub w_start: Vec<T>,
    pub w_end: Vec<T>,
}

impl<T: Real> HeatStep<T> {
    pub fn new(grid: &Grid<T>, h: T) -> Self {
        let n = grid.len();
        let mut s = Self {
            decay: Vec::with_capacity(n),
            w_euler: Vec::with_capacity(n),
            w_start: Vec::with_capacity(n),
            w_end: Vec::with_capacity(n),
        };
        for &k2 in grid.xi_sq() {
            let z = k2 * h;
            let p1 = phi1(z);
            let p2 = phi2(z);
            s.decay.push((-z).exp());
            s.w_euler.push(h * p1);
            s.w_start.push(h * p2);
            s.w_end.push(h * (p1 - p2));
        }
        s
    }

    /// Advances `u` in place with a source linear between `f0` and `f1`.
    pub fn advance(&self, u: &mut [Complex<T>], f0: &[Complex<T>], f1: &[Complex<T>]) {
        for i in 0..u.len() {
            u[i] = u[i] * self.decay[i] + f0[i] * self.w_start[i] + f1[i] * self.w_end[i];
        }
    }

    /// Exponential-Euler step with source frozen at `f0`.
    pub fn euler(&self, u: &[Complex<T>], f0: &[Complex<T>]) -> Vec<Complex<T>> {
        u.iter()
            .zip(f0)
            .enumerate()
            .map(|(i, (&ui, &fi))| ui * self.decay[i] + fi * self.w_euler[i])
            .collect()
    }
}

/// Spectral Duhamel integration over equispaced levels; `u0` and every
/// source frame are coefficient vectors. Returns coefficients per level.
pub(crate) fn duhamel_spectral<T: Real>(
    grid: &Grid<T>,
    u0: Vec<Complex<T>>,
    source: &[Vec<Complex<T>>],
    dt: T,
) -> Vec<Vec<Complex<T>>> {
    let mut out = Vec::with_capacity(source.len());
    out.push(u0);
    if source.len() > 1 {
        let step = HeatStep::new(grid, dt);
        for k in 0..source.len() - 1 {
            let mut next = out[k].clone();
            step.advance(&mut next, &source[k], &source[k + 1]);
            out.push(next);
        }
    }
    out
}

/// `u(t_k) = e^{t_k Lap} u0 + int_0^{t_k} e^{(t_k - s) Lap} f(s) ds` on the
/// time levels of `source`, with `f` piecewise linear between levels and
/// integrated exactly against the heat kernel in each step.
pub fn duhamel<T: Real>(u0: &ScalarField<T>, source: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    let grid = source.grid();
    grid.ensure_same(u0.grid(), "Duhamel initial datum")?;
    let hats: Vec<_> = source
        .frames()
        .iter()
        .map(|f| f.to_spectral().coeffs().to_vec())
        .collect();
    let u0_hat = u0.to_spectral().coeffs().to_vec();
    let out = duhamel_spectral(grid, u0_hat, &hats, source.dt());
    let frames = out
        .into_iter()
        .map(|c| ScalarField::from_raw(grid, grid.ifft_real(c)))
        .collect();
    Ok(SpaceTimeField::from_parts(grid, source.times().to_vec(), frames))
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_48),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_27),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_361_96),
    (0.183_434_642_495_649_8, 0.362_683_783_378_361_96),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_27),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_48),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `int_0^T g(t) dt` for a smooth function decaying on scale `tau`, with
/// 8-point Gauss-Legendre on geometrically graded panels.
fn graded_integral<T: Real>(t_final: T, tau: T, g: impl Fn(T) -> T) -> T {
    let first = (tau * lit(1e-3)).min(t_final);
    let mut edges = vec![T::zero(), first];
    while *edges.last().unwrap() < t_final {
        let next = (*edges.last().unwrap() * lit(2.0)).min(t_final);
        edges.push(next);
    }
    let half = lit::<T>(0.5);
    edges.windows(2).fold(T::zero(), |acc, w| {
        let (a, b) = (w[0], w[1]);
        let mid = (a + b) * half;
        let rad = (b - a) * half;
        acc + GAUSS8
            .iter()
            .fold(T::zero(), |s, &(x, wt)| s + lit::<T>(wt) * g(mid + rad * lit(x)))
            * rad
    })
}

/// Ratio `||e^{t Lap} u0||_{L~^q_T(H^{sigma + 2/q})} / ||u0||_{H^sigma}`
/// for the free heat flow. Time integrals are evaluated in closed form
/// (`q = 2`, `q = inf`) or by graded Gauss quadrature (`q = 1`).
pub fn smoothing_probe<T: Real>(
    u0: &ScalarField<T>,
    sigma: T,
    t_final: T,
    q: TimeExponent,
    bank: &DyadicFilterBank<T>,
) -> Result<T> {
    let grid = bank.grid();
    grid.ensure_same(u0.grid(), "smoothing probe")?;
    if !(t_final > T::zero()) {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    let den = sobolev_norm(u0, sigma)?;
    if !(den > T::zero()) {
        return Err(Error::Degenerate("||u0|| must be positive".into()));
    }
    let c = u0.to_spectral();
    let vol = grid.volume();
    let (reg, per_shell): (T, Vec<T>) = match q {
        TimeExponent::Infinity => (sigma, bank.block_norms(c.coeffs())),
        TimeExponent::Two => {
            let norms = bank
                .shells()
                .map(|j| {
                    let psi = bank.psi_values(j).unwrap();
                    let sum = grid.xi_sq().iter().zip(c.coeffs()).zip(psi).fold(
                        T::zero(),
                        |a, ((&k2, ci), &m)| {
                            let z = lit::<T>(2.0) * k2 * t_final;
                            // int_0^T e^{-2 k2 t} dt = T * phi1(2 k2 T)
                            a + m * m * ci.norm_sqr() * t_final * phi1(z)
                        },
                    );
                    (sum * vol).sqrt()
                })
                .collect();
            (sigma + T::one(), norms)
        }
        TimeExponent::One => {
            let norms = bank
                .shells()
                .map(|j| {
                    let psi = bank.psi_values(j).unwrap();
                    let weights: Vec<(T, T)> = grid
                        .xi_sq()
                        .iter()
                        .zip(c.coeffs())
                        .zip(psi)
                        .filter(|(_, &m)| m > T::zero())
                        .map(|((&k2, ci), &m)| (k2, m * m * ci.norm_sqr()))
                        .collect();
                    let k2_max = weights.iter().fold(T::zero(), |a, w| a.max(w.0));
                    if weights.is_empty() || k2_max == T::zero() {
                        return T::zero();
                    }
                    let g = |t: T| {
                        (weights
                            .iter()
                            .fold(T::zero(), |a, &(k2, w)| a + w * (-lit::<T>(2.0) * k2 * t).exp())
                            * vol)
                            .sqrt()
                    };
                    graded_integral(t_final, T::one() / k2_max, g)
                })
                .collect();
            (sigma + lit(2.0), norms)
        }
    };
    Ok(bank.weight(per_shell, reg).norm() / den)
}
