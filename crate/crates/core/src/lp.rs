//! Littlewood-Paley blocks and the Sobolev and Chemin-Lerner norms built
//! from them.
//!
//! The dyadic multiplier is `psi(xi) = chi(xi/2) - chi(xi)`, where `chi` is a
//! radial C-infinity cutoff equal to 1 on `|xi| <= 3/4` and 0 on
//! `|xi| >= 4/3`. The transition is the closed-form smooth step
//! `e(x) / (e(x) + e(1 - x))` with `e(x) = exp(-1/x)`, so `psi` is supported
//! in `3/4 <= |xi| <= 8/3` and `sum_j psi(2^-j xi)` telescopes to 1.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, SpaceTimeField, SpectralField};
use crate::scalar::{lit, Real};

fn smooth_step<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let a = (-T::one() / x).exp();
    let b = (-T::one() / (T::one() - x)).exp();
    a / (a + b)
}

/// Low-frequency cutoff: 1 for `r <= 3/4`, 0 for `r >= 4/3`.
pub fn chi<T: Real>(r: T) -> T {
    let lo = lit::<T>(0.75);
    let hi = lit::<T>(4.0 / 3.0);
    T::one() - smooth_step((r - lo) / (hi - lo))
}

/// Dyadic annulus multiplier at radius `r = |xi|`.
pub fn psi<T: Real>(r: T) -> T {
    chi(r / lit(2.0)) - chi(r)
}

fn dyadic_weight<T: Real>(j: i32, s: T) -> T {
    lit::<T>(2.0).powf(T::from_i32(j).unwrap() * s)
}

/// Time exponent of a Chemin-Lerner norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeExponent {
    One,
    Two,
    Infinity,
}

impl TryFrom<f64> for TimeExponent {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Self::One)
        } else if p == 2.0 {
            Ok(Self::Two)
        } else if p == f64::INFINITY {
            Ok(Self::Infinity)
        } else {
            Err(Error::InvalidArgument(format!(
                "unsupported time exponent p = {p}; expected 1, 2 or inf"
            )))
        }
    }
}

impl TimeExponent {
    /// `L^p` norm in time of equispaced samples with step `dt`; composite
    /// trapezoid for finite `p`.
    pub fn reduce<T: Real>(self, values: &[T], dt: T) -> T {
        let trapezoid = |it: &mut dyn Iterator<Item = T>| -> T {
            let v: Vec<T> = it.collect();
            if v.len() < 2 {
                return T::zero();
            }
            let inner = v.iter().fold(T::zero(), |a, &b| a + b);
            (inner - (v[0] + v[v.len() - 1]) / lit(2.0)) * dt
        };
        match self {
            Self::One => trapezoid(&mut values.iter().map(|v| v.abs())),
            Self::Two => trapezoid(&mut values.iter().map(|&v| v * v)).sqrt(),
            Self::Infinity => values.iter().fold(T::zero(), |a, &b| a.max(b.abs())),
        }
    }
}

/// Per-shell weighted block norms `2^{js} ||Delta_j f||`.
#[derive(Clone, Debug, PartialEq)]
pub struct BesovProfile<T: Real> {
    pub s: T,
    pub entries: Vec<(i32, T)>,
}

impl<T: Real> BesovProfile<T> {
    /// l2 aggregate over shells.
    pub fn norm(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |a, &(_, v)| a + v * v)
            .sqrt()
    }

    /// CSV with header `j,weighted_block_norm` and a trailing `TOTAL` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,weighted_block_norm\n");
        for (j, v) in &self.entries {
            out.push_str(&format!("{j},{:.17e}\n", crate::scalar::to_f64(*v)));
        }
        out.push_str(&format!("TOTAL,{:.17e}\n", crate::scalar::to_f64(self.norm())));
        out
    }

    /// Parses the output of [`BesovProfile::to_csv`]; returns the profile and
    /// the recorded total.
    pub fn from_csv(s: T, text: &str) -> Result<(Self, T)> {
        let mut lines = text.lines();
        if lines.next() != Some("j,weighted_block_norm") {
            return Err(Error::Format("missing BesovProfile header".into()));
        }
        let mut entries = Vec::new();
        let mut total = None;
        for line in lines {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad row {line:?}")))?;
            let v: f64 = b
                .parse()
                .map_err(|_| Error::Format(format!("bad value in {line:?}")))?;
            if a == "TOTAL" {
                total = Some(lit(v));
            } else {
                let j: i32 = a
                    .parse()
                    .map_err(|_| Error::Format(format!("bad shell index in {line:?}")))?;
                entries.push((j, lit(v)));
            }
        }
        let total = total.ok_or_else(|| Error::Format("missing TOTAL row".into()))?;
        Ok((Self { s, entries }, total))
    }
}

/// Littlewood-Paley multipliers on the frequencies of one grid.
#[derive(Clone, Debug)]
pub struct DyadicFilterBank<T: Real> {
    grid: Grid<T>,
    j_min: i32,
    j_max: i32,
    /// psi(2^-j |xi|) per shell, per flat spectral index.
    psi: Vec<Vec<T>>,
}

impl<T: Real> DyadicFilterBank<T> {
    /// Builds the bank so that every nonzero grid frequency, up to and
    /// including Nyquist (diagonal in 2D), is covered by whole shells.
    pub fn new(grid: &Grid<T>) -> Result<Self> {
        let xi_min = crate::scalar::to_f64(grid.xi_min());
        let xi_top = crate::scalar::to_f64(grid.xi_nyquist()) * (grid.dim() as f64).sqrt();
        // need 2^{j_min} * 4/3 <= xi_min and 2^{j_max + 1} * 3/4 >= xi_top
        let j_min = (xi_min * 0.75).log2().floor() as i32;
        let j_max = ((xi_top * 4.0 / 3.0).log2().ceil() as i32) - 1;
        if j_max - j_min + 1 < 3 {
            return Err(Error::InvalidGrid(format!(
                "grid hosts only {} dyadic shells, need at least 3",
                j_max - j_min + 1
            )));
        }
        let radii: Vec<T> = grid.xi_sq().iter().map(|k2| k2.sqrt()).collect();
        let psi = (j_min..=j_max)
            .map(|j| {
                let scale = lit::<T>(2.0).powi(-j);
                radii
                    .iter()
                    .map(|&r| if r == T::zero() { T::zero() } else { psi(r * scale) })
                    .collect()
            })
            .collect();
        Ok(Self { grid: grid.clone(), j_min, j_max, psi })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn shells(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    pub fn shell_count(&self) -> usize {
        self.psi.len()
    }

    fn shell_index(&self, j: i32) -> Result<usize> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::InvalidArgument(format!(
                "shell {j} outside [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        Ok((j - self.j_min) as usize)
    }

    /// Multiplier values of shell `j` on the grid's spectral indices.
    pub fn psi_values(&self, j: i32) -> Result<&[T]> {
        Ok(&self.psi[self.shell_index(j)?])
    }

    /// `sum_j psi(2^-j xi)` at one flat spectral index.
    pub fn partition_sum(&self, flat: usize) -> T {
        self.psi.iter().fold(T::zero(), |a, p| a + p[flat])
    }

    /// `Delta_j f`.
    pub fn dyadic_block(&self, f: &ScalarField<T>, j: i32) -> Result<ScalarField<T>> {
        self.grid.ensure_same(f.grid(), "dyadic block")?;
        let w = self.psi_values(j)?;
        let mut s = f.to_spectral();
        for (c, &m) in s.coeffs_mut().iter_mut().zip(w) {
            *c = *c * m;
        }
        // a real even multiplier keeps Hermitian symmetry
        Ok(ScalarField::from_raw(&self.grid, self.grid.ifft_real(s.coeffs().to_vec())))
    }

    /// `||Delta_j f||_{L^2}` for every shell, from spectral coefficients.
    pub fn block_norms(&self, coeffs: &[Complex<T>]) -> Vec<T> {
        let vol = self.grid.volume();
        self.psi
            .iter()
            .map(|p| {
                (p.iter()
                    .zip(coeffs)
                    .fold(T::zero(), |a, (&m, c)| a + m * m * c.norm_sqr())
                    * vol)
                    .sqrt()
            })
            .collect()
    }

    /// `||Delta_j grad f||_{L^2}` for every shell.
    pub fn gradient_block_norms(&self, coeffs: &[Complex<T>]) -> Vec<T> {
        let g = &self.grid;
        let weighted: Vec<Complex<T>> = coeffs
            .iter()
            .enumerate()
            .map(|(p, c)| {
                let w2 = (0..g.dim()).fold(T::zero(), |a, ax| {
                    let x = g.xi_deriv(ax)[p];
                    a + x * x
                });
                *c * w2.sqrt()
            })
            .collect();
        self.block_norms(&weighted)
    }

    /// Weighted profile of a single field in `H^s` block form.
    pub fn profile(&self, f: &ScalarField<T>, s: T) -> Result<BesovProfile<T>> {
        self.grid.ensure_same(f.grid(), "profile")?;
        let norms = self.block_norms(f.to_spectral().coeffs());
        Ok(self.weight(norms, s))
    }

    pub(crate) fn weight(&self, norms: Vec<T>, s: T) -> BesovProfile<T> {
        BesovProfile {
            s,
            entries: self
                .shells()
                .zip(norms)
                .map(|(j, v)| (j, dyadic_weight(j, s) * v))
                .collect(),
        }
    }

    /// Reduces a `[frame][shell]` history of block norms in time.
    pub(crate) fn reduce_history(
        &self,
        history: &[Vec<T>],
        dt: T,
        p: TimeExponent,
        s: T,
    ) -> BesovProfile<T> {
        let per_shell = (0..self.shell_count())
            .map(|q| {
                let series: Vec<T> = history.iter().map(|h| h[q]).collect();
                p.reduce(&series, dt)
            })
            .collect();
        self.weight(per_shell, s)
    }

    pub(crate) fn history(&self, u: &SpaceTimeField<T>) -> Vec<Vec<T>> {
        u.frames()
            .iter()
            .map(|f| self.block_norms(f.to_spectral().coeffs()))
            .collect()
    }
}

/// Homogeneous `H^s` norm from coefficients, zero mode excluded, no
/// restriction on `s`.
pub(crate) fn homogeneous_norm_coeffs<T: Real>(grid: &Grid<T>, coeffs: &[Complex<T>], s: T) -> T {
    let sum = grid
        .xi_sq()
        .iter()
        .zip(coeffs)
        .filter(|(&k2, _)| k2 > T::zero())
        .fold(T::zero(), |a, (&k2, c)| a + k2.powf(s) * c.norm_sqr());
    (sum * grid.volume()).sqrt()
}

/// Homogeneous Sobolev norm `(L^dim sum_{xi != 0} |xi|^{2s} |f(xi)|^2)^{1/2}`.
pub fn sobolev_norm<T: Real>(f: &ScalarField<T>, s: T) -> Result<T> {
    let d = lit::<T>(f.grid().dim() as f64);
    if s <= -d / lit(2.0) {
        return Err(Error::InvalidArgument(format!(
            "homogeneous H^s norm needs s > -dim/2 = {}, got s = {s}",
            -d / lit(2.0)
        )));
    }
    Ok(homogeneous_norm_coeffs(f.grid(), f.to_spectral().coeffs(), s))
}

/// Inhomogeneous norm with weight `(1 + |xi|^2)^{s/2}`, zero mode included.
pub fn inhomogeneous_norm<T: Real>(f: &ScalarField<T>, s: T) -> T {
    inhomogeneous_norm_coeffs(f.grid(), f.to_spectral().coeffs(), s)
}

pub(crate) fn inhomogeneous_norm_coeffs<T: Real>(
    grid: &Grid<T>,
    coeffs: &[Complex<T>],
    s: T,
) -> T {
    let sum = grid
        .xi_sq()
        .iter()
        .zip(coeffs)
        .fold(T::zero(), |a, (&k2, c)| a + (T::one() + k2).powf(s) * c.norm_sqr());
    (sum * grid.volume()).sqrt()
}

/// `||u||_{L~^p_T(H^s)}` as a per-shell profile.
pub fn chemin_lerner_norm<T: Real>(
    u: &SpaceTimeField<T>,
    p: TimeExponent,
    s: T,
    bank: &DyadicFilterBank<T>,
) -> Result<BesovProfile<T>> {
    bank.grid().ensure_same(u.grid(), "Chemin-Lerner norm")?;
    Ok(bank.reduce_history(&bank.history(u), u.dt(), p, s))
}

/// Returns `(||u||_{L~^1_T(H^s)}, ||u||_{L^1_T(H^s)})`, both in block form.
/// The first never exceeds the second.
pub fn minkowski_check<T: Real>(
    u: &SpaceTimeField<T>,
    s: T,
    bank: &DyadicFilterBank<T>,
) -> Result<(T, T)> {
    bank.grid().ensure_same(u.grid(), "Minkowski check")?;
    let history = bank.history(u);
    let tilde = bank
        .reduce_history(&history, u.dt(), TimeExponent::One, s)
        .norm();
    let per_time: Vec<T> = history
        .into_iter()
        .map(|h| bank.weight(h, s).norm())
        .collect();
    let plain = TimeExponent::One.reduce(&per_time, u.dt());
    Ok((tilde, plain))
}

/// `||fg||_{H^{2s - dim/2}} / (||f||_{H^s} ||g||_{H^s})` with homogeneous
/// norms (zero modes excluded).
pub fn product_ratio<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>, s: T) -> Result<T> {
    let grid = f.grid();
    let fg = f.mul(g)?;
    let target = lit::<T>(2.0) * s - lit::<T>(grid.dim() as f64) / lit(2.0);
    let num = homogeneous_norm_coeffs(grid, fg.to_spectral().coeffs(), target);
    let den = homogeneous_norm_coeffs(grid, f.to_spectral().coeffs(), s)
        * homogeneous_norm_coeffs(grid, g.to_spectral().coeffs(), s);
    if !(den > T::zero()) {
        return Err(Error::Degenerate("zero input to product ratio".into()));
    }
    Ok(num / den)
}

/// Random zero-mean real field with modes `|k_a| <= kmax` on every axis.
pub fn random_band_limited<T: Real>(grid: &Grid<T>, kmax: i64, rng: &mut ChaCha8Rng) -> ScalarField<T> {
    let mut s = SpectralField::zeros(grid);
    for p in 0..grid.len() {
        let m = grid.neg_flat(p);
        let inside = (0..grid.dim()).all(|a| grid.k_axis(a, p).abs() <= kmax);
        if !inside || m < p || p == 0 {
            continue;
        }
        let c = Complex::new(
            lit::<T>(rng.gen_range(-1.0..1.0)),
            lit::<T>(rng.gen_range(-1.0..1.0)),
        );
        if m == p {
            s.coeffs_mut()[p] = Complex::new(c.re, T::zero());
        } else {
            s.coeffs_mut()[p] = c;
            s.coeffs_mut()[m] = c.conj();
        }
    }
    s.to_physical().expect("constructed Hermitian")
}

/// Largest product ratio over random band-limited pairs. The band is
/// `|k| <= n/8` per axis so the product is resolved without aliasing.
pub fn product_estimate_probe<T: Real>(
    bank: &DyadicFilterBank<T>,
    s: T,
    trials: usize,
    seed: u64,
) -> Result<T> {
    let grid = bank.grid();
    let half_dim = lit::<T>(grid.dim() as f64) / lit(2.0);
    if !(s > -half_dim && s < half_dim) {
        return Err(Error::InvalidArgument(format!(
            "product probe needs -dim/2 < s < dim/2, got {s}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let kmax = (grid.n() / 8) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = T::zero();
    for _ in 0..trials {
        let f = random_band_limited(grid, kmax, &mut rng);
        let g = random_band_limited(grid, kmax, &mut rng);
        best = best.max(product_ratio(&f, &g, s)?);
    }
    Ok(best)
}

/// Equivalence constants `(c, C)` between the block-form and the direct
/// multiplier form of the `H^s` norm:
/// `c ||f||_direct <= ||f||_blocks <= C ||f||_direct`.
///
/// Computed from the mother multiplier on one octave, which is enough since
/// the ratio is invariant under `xi -> 2 xi`.
pub fn block_equivalence_bounds(s: f64) -> (f64, f64) {
    let samples = 1 << 14;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..=samples {
        let r = 1.0 + i as f64 / samples as f64;
        let mut acc = 0.0;
        for j in -3..=3 {
            let w = psi(r * 2f64.powi(-j));
            acc += 2f64.powf(2.0 * j as f64 * s) * w * w;
        }
        let rho = acc / r.powf(2.0 * s);
        lo = lo.min(rho);
        hi = hi.max(rho);
    }
    (lo.sqrt(), hi.sqrt())
}
