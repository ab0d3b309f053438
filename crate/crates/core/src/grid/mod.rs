//! Uniform periodic grids and the fields sampled on them.
//!
//! The torus has `n` samples per axis and period `length`. Sample `i` along an
//! axis sits at `x = i * dx`. Two-dimensional fields are stored row-major: the
//! flat index is `i0 * n + i1`, with axis 1 contiguous.
//!
//! Spectral coefficients use the normalization
//! `c(k) = n^-dim * sum_x f(x) exp(-2 pi i k.x / L)`, so a constant field `c`
//! has `c(0) = c` and `cos(2 pi x / L)` has `c(+-1) = 1/2`.

mod fft;
pub mod snapshot;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use fft::Plans;

struct GridTables<T: Real> {
    dim: usize,
    n: usize,
    length: T,
    dx: T,
    plans: Plans<T>,
    /// |xi|^2 per flat index, Nyquist included.
    xi_sq: Vec<T>,
    /// xi along each axis per flat index, Nyquist zeroed (derivative multiplier).
    xi_deriv: Vec<Vec<T>>,
    /// signed integer wavenumber along each axis per flat index.
    k_axis: Vec<Vec<i64>>,
}

/// A validated uniform periodic grid. Cheap to clone.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridTables<T>>,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.length() == other.length())
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("length", &self.length())
            .field("dx", &self.dx())
            .finish()
    }
}

/// Signed wavenumber of index `i` on an axis of `n` points. The Nyquist index
/// `n/2` maps to `+n/2`.
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, n: usize, length: T) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two >= 16, got {n}"
            )));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        let dx = length / T::from_usize(n).unwrap();
        let two_pi_over_l = lit::<T>(2.0) * T::PI() / length;
        let total = n.pow(dim as u32);
        let mut xi_sq = vec![T::zero(); total];
        let mut xi_deriv = vec![vec![T::zero(); total]; dim];
        let mut k_axis = vec![vec![0i64; total]; dim];
        for flat in 0..total {
            let idx = unflatten(flat, n, dim);
            let mut s = T::zero();
            for a in 0..dim {
                let k = wavenumber(idx[a], n);
                k_axis[a][flat] = k;
                let xi = T::from_i64(k).unwrap() * two_pi_over_l;
                s = s + xi * xi;
                xi_deriv[a][flat] = if idx[a] == n / 2 { T::zero() } else { xi };
            }
            xi_sq[flat] = s;
        }
        Ok(Self {
            inner: Arc::new(GridTables {
                dim,
                n,
                length,
                dx,
                plans: Plans::new(n),
                xi_sq,
                xi_deriv,
                k_axis,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Samples per axis.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> T {
        self.inner.length
    }

    pub fn dx(&self) -> T {
        self.inner.dx
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.inner.xi_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `dx^dim`.
    pub fn cell_volume(&self) -> T {
        self.dx().powi(self.dim() as i32)
    }

    /// Torus volume `L^dim`.
    pub fn volume(&self) -> T {
        self.length().powi(self.dim() as i32)
    }

    /// Smallest nonzero frequency `2 pi / L`.
    pub fn xi_min(&self) -> T {
        lit::<T>(2.0) * T::PI() / self.length()
    }

    /// Nyquist frequency `pi n / L`.
    pub fn xi_nyquist(&self) -> T {
        T::PI() * T::from_usize(self.n()).unwrap() / self.length()
    }

    /// `|xi|^2` for every flat spectral index.
    pub fn xi_sq(&self) -> &[T] {
        &self.inner.xi_sq
    }

    /// Derivative multiplier `xi_axis` per flat index (Nyquist zeroed).
    pub fn xi_deriv(&self, axis: usize) -> &[T] {
        &self.inner.xi_deriv[axis]
    }

    /// Signed integer wavenumber along `axis` for a flat spectral index.
    pub fn k_axis(&self, axis: usize, flat: usize) -> i64 {
        self.inner.k_axis[axis][flat]
    }

    /// Flat index of the wavenumber vector `k` (each component reduced mod n).
    pub fn flat_of_k(&self, k: &[i64]) -> usize {
        let n = self.n() as i64;
        k.iter()
            .take(self.dim())
            .fold(0usize, |acc, &ka| acc * self.n() + ka.rem_euclid(n) as usize)
    }

    /// Flat index of `-k` for the flat index of `k`.
    pub fn neg_flat(&self, flat: usize) -> usize {
        let n = self.n();
        let idx = unflatten(flat, n, self.dim());
        idx.iter()
            .take(self.dim())
            .fold(0usize, |acc, &i| acc * n + (n - i) % n)
    }

    /// Physical coordinates of a flat sample index; unused axes are zero.
    pub fn coords(&self, flat: usize) -> [T; 2] {
        let idx = unflatten(flat, self.n(), self.dim());
        let mut x = [T::zero(); 2];
        for a in 0..self.dim() {
            x[a] = T::from_usize(idx[a]).unwrap() * self.dx();
        }
        x
    }

    pub(crate) fn forward(&self, data: &mut [Complex<T>]) {
        self.inner.plans.forward(self.dim(), data)
    }

    pub(crate) fn inverse(&self, data: &mut [Complex<T>]) {
        self.inner.plans.inverse(self.dim(), data)
    }

    /// Forward transform of real samples.
    pub(crate) fn fft_real(&self, samples: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> =
            samples.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub(crate) fn ifft_real(&self, mut coeffs: Vec<Complex<T>>) -> Vec<T> {
        self.inverse(&mut coeffs);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid<T>, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

fn unflatten(flat: usize, n: usize, dim: usize) -> [usize; 2] {
    if dim == 1 {
        [flat, 0]
    } else {
        [flat / n, flat % n]
    }
}

/// Real samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    samples: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: &Grid<T>, samples: Vec<T>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self { grid: grid.clone(), samples })
    }

    /// Builds a field without the finiteness scan. Callers that can produce
    /// NaN must check with [`ScalarField::is_finite`].
    pub(crate) fn from_raw(grid: &Grid<T>, samples: Vec<T>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid: grid.clone(), samples }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_raw(grid, vec![T::zero(); grid.len()])
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f(x)` at every grid point; `x[1]` is zero in 1D.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut([T; 2]) -> T) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::from_raw(grid, samples)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn to_spectral(&self) -> SpectralField<T> {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.grid.fft_real(&self.samples),
        }
    }

    /// Spectral partial derivative along `axis`. The Nyquist mode is dropped.
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for dim {}",
                self.grid.dim()
            )));
        }
        let mut c = self.grid.fft_real(&self.samples);
        apply_derivative(&self.grid, axis, &mut c);
        Ok(Self::from_raw(&self.grid, self.grid.ifft_real(c)))
    }

    /// Spectral Laplacian, multiplier `-|xi|^2`.
    pub fn laplacian(&self) -> Self {
        let mut c = self.grid.fft_real(&self.samples);
        for (ci, &k2) in c.iter_mut().zip(self.grid.xi_sq()) {
            *ci = *ci * (-k2);
        }
        Self::from_raw(&self.grid, self.grid.ifft_real(c))
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.samples.len()).unwrap()
    }

    fn sum(&self) -> T {
        self.samples.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// `dx^dim * sum f`, the trapezoid rule on a periodic grid.
    pub fn integral(&self) -> T {
        self.sum() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> T {
        self.samples.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn min(&self) -> T {
        self.samples.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn max(&self) -> T {
        self.samples.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    /// Discrete `L^p` norm by the trapezoid rule, `p >= 1` finite.
    pub fn lp_norm(&self, p: T) -> T {
        let s = self
            .samples
            .iter()
            .fold(T::zero(), |a, &b| a + b.abs().powf(p));
        (s * self.grid.cell_volume()).powf(T::one() / p)
    }

    pub fn l1_norm(&self) -> T {
        self.samples.iter().fold(T::zero(), |a, &b| a + b.abs()) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> T {
        (self.samples.iter().fold(T::zero(), |a, &b| a + b * b) * self.grid.cell_volume()).sqrt()
    }

    pub fn scaled(&self, a: T) -> Self {
        self.map(|v| v * a)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(&self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "pointwise operation")?;
        Ok(Self::from_raw(
            &self.grid,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Max-norm distance to `other`.
    pub fn max_diff(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Fourier shift: returns `x -> f(x + offset)` along `axis`, exact for
    /// band-limited data.
    pub fn shifted(&self, axis: usize, offset: T) -> Self {
        let mut c = self.grid.fft_real(&self.samples);
        let g = &self.grid;
        let two_pi_over_l = lit::<T>(2.0) * T::PI() / g.length();
        let half = (g.n() / 2) as i64;
        for (flat, ci) in c.iter_mut().enumerate() {
            let k = g.k_axis(axis, flat);
            if k == half {
                // Nyquist: keep the real (cos) part so the result stays real
                let phase = T::from_i64(k).unwrap() * two_pi_over_l * offset;
                *ci = *ci * phase.cos();
                continue;
            }
            let phase = T::from_i64(k).unwrap() * two_pi_over_l * offset;
            *ci = *ci * Complex::new(phase.cos(), phase.sin());
        }
        Self::from_raw(&self.grid, self.grid.ifft_real(c))
    }
}

pub(crate) fn apply_derivative<T: Real>(grid: &Grid<T>, axis: usize, c: &mut [Complex<T>]) {
    for (ci, &xi) in c.iter_mut().zip(grid.xi_deriv(axis)) {
        // multiply by i*xi
        *ci = Complex::new(-ci.im * xi, ci.re * xi);
    }
}

/// Discrete Fourier coefficients of a field on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: Grid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(grid: &Grid<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    /// Field with a single real mode: coefficient `amplitude/2` at `+-k`, so
    /// that the physical field is `amplitude * cos(k.x 2 pi / L)`.
    pub fn single_mode(grid: &Grid<T>, k: &[i64], amplitude: T) -> Self {
        let mut f = Self::zeros(grid);
        let p = grid.flat_of_k(k);
        let m = grid.neg_flat(p);
        if p == m {
            f.coeffs[p] = Complex::new(amplitude, T::zero());
        } else {
            let half = amplitude / lit(2.0);
            f.coeffs[p] = Complex::new(half, T::zero());
            f.coeffs[m] = Complex::new(half, T::zero());
        }
        f
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient at wavenumber vector `k`.
    pub fn coefficient(&self, k: &[i64]) -> Complex<T> {
        self.coeffs[self.grid.flat_of_k(k)]
    }

    /// Largest `|c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> T {
        (0..self.coeffs.len()).fold(T::zero(), |acc, p| {
            let m = self.grid.neg_flat(p);
            acc.max((self.coeffs[m] - self.coeffs[p].conj()).norm())
        })
    }

    /// Inverse transform to real samples; rejects non-Hermitian input.
    pub fn to_physical(&self) -> Result<ScalarField<T>> {
        let scale = self.coeffs.iter().fold(T::zero(), |a, c| a.max(c.norm()));
        let defect = self.hermitian_defect();
        let tol = lit::<T>(1e4 * T::eps_f64()) * scale.max(T::min_positive_value());
        if defect > tol {
            return Err(Error::NotHermitian(to_f64(defect)));
        }
        Ok(ScalarField::from_raw(
            &self.grid,
            self.grid.ifft_real(self.coeffs.clone()),
        ))
    }
}

/// Equispaced time levels `0, dt, ..., steps*dt`.
pub fn time_levels<T: Real>(dt: T, steps: usize) -> Vec<T> {
    (0..=steps).map(|k| T::from_usize(k).unwrap() * dt).collect()
}

/// Number of steps of size `dt` in `[0, t_final]`; errors unless
/// `t_final / dt` is an integer to within 1e-9 (relative), or a few ulps
/// of `T` when that is coarser.
pub fn step_count<T: Real>(t_final: T, dt: T) -> Result<usize> {
    if !(t_final > T::zero()) || !(dt > T::zero()) {
        return Err(Error::InvalidTimeGrid(format!(
            "T and dt must be positive (T = {t_final}, dt = {dt})"
        )));
    }
    let r = to_f64(t_final) / to_f64(dt);
    let steps = r.round();
    let tol = 1e-9_f64.max(8.0 * T::eps_f64());
    if (r - steps).abs() > tol * r.max(1.0) || steps < 1.0 {
        return Err(Error::InvalidTimeGrid(format!(
            "T/dt = {r} is not an integer"
        )));
    }
    Ok(steps as usize)
}

/// A uniformly sampled trajectory of fields, `times[0] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField<T: Real> {
    grid: Grid<T>,
    times: Vec<T>,
    frames: Vec<ScalarField<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn new(grid: &Grid<T>, times: Vec<T>, frames: Vec<ScalarField<T>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidTimeGrid("empty time grid".into()));
        }
        if times.len() != frames.len() {
            return Err(Error::InvalidTimeGrid(format!(
                "{} times but {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times[0] != T::zero() {
            return Err(Error::InvalidTimeGrid(format!(
                "first time must be 0, got {}",
                times[0]
            )));
        }
        if times.len() > 1 {
            let dt = times[1] - times[0];
            if !(dt > T::zero()) {
                return Err(Error::InvalidTimeGrid("times must increase".into()));
            }
            let tol = dt * lit(1e-12f64.max(64.0 * T::eps_f64()));
            for w in times.windows(2) {
                if ((w[1] - w[0]) - dt).abs() > tol {
                    return Err(Error::InvalidTimeGrid(
                        "time levels are not uniformly spaced".into(),
                    ));
                }
            }
        }
        for f in &frames {
            grid.ensure_same(f.grid(), "space-time frame")?;
        }
        Ok(Self { grid: grid.clone(), times, frames })
    }

    pub(crate) fn from_parts(grid: &Grid<T>, times: Vec<T>, frames: Vec<ScalarField<T>>) -> Self {
        debug_assert_eq!(times.len(), frames.len());
        Self { grid: grid.clone(), times, frames }
    }

    /// Samples `f(t, x)` on the time levels `0, dt, ..., steps*dt`.
    pub fn from_fn(
        grid: &Grid<T>,
        dt: T,
        steps: usize,
        mut f: impl FnMut(T, [T; 2]) -> T,
    ) -> Self {
        let times = time_levels(dt, steps);
        let frames = times
            .iter()
            .map(|&t| ScalarField::from_fn(grid, |x| f(t, x)))
            .collect();
        Self::from_parts(grid, times, frames)
    }

    /// The same field at every time level.
    pub fn constant_in_time(field: &ScalarField<T>, dt: T, steps: usize) -> Self {
        let times = time_levels(dt, steps);
        let frames = vec![field.clone(); times.len()];
        Self::from_parts(field.grid(), times, frames)
    }

    pub fn zeros(grid: &Grid<T>, times: &[T]) -> Self {
        Self::from_parts(
            grid,
            times.to_vec(),
            vec![ScalarField::zeros(grid); times.len()],
        )
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn frames(&self) -> &[ScalarField<T>] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &ScalarField<T> {
        &self.frames[k]
    }

    pub fn last(&self) -> &ScalarField<T> {
        self.frames.last().expect("non-empty")
    }

    /// Number of time levels.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Step between time levels; zero for a single level.
    pub fn dt(&self) -> T {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            T::zero()
        }
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("non-empty")
    }

    pub fn map_frames(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self::from_parts(
            &self.grid,
            self.times.clone(),
            self.frames.iter().map(f).collect(),
        )
    }

    pub fn scaled(&self, a: T) -> Self {
        self.map_frames(|f| f.scaled(a))
    }

    pub fn zip_frames(
        &self,
        other: &Self,
        f: impl Fn(&ScalarField<T>, &ScalarField<T>) -> Result<ScalarField<T>>,
    ) -> Result<Self> {
        self.ensure_compatible(other)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(&self.grid, self.times.clone(), frames))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_frames(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_frames(other, |a, b| a.sub(b))
    }

    /// Max-norm over all frames.
    pub fn max_abs(&self) -> T {
        self.frames.iter().fold(T::zero(), |a, f| a.max(f.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(|f| f.is_finite())
    }

    pub(crate) fn ensure_compatible(&self, other: &Self) -> Result<()> {
        self.grid.ensure_same(&other.grid, "space-time fields")?;
        if self.times.len() != other.times.len() {
            return Err(Error::GridMismatch(format!(
                "time grids differ in length ({} vs {})",
                self.times.len(),
                other.times.len()
            )));
        }
        let tol = self.dt().abs() * lit(1e-9);
        if self
            .times
            .iter()
            .zip(&other.times)
            .any(|(a, b)| (*a - *b).abs() > tol)
        {
            return Err(Error::GridMismatch("time levels differ".into()));
        }
        Ok(())
    }
}
