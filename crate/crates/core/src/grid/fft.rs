use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Planned forward/inverse transforms for one axis length.
///
/// The plans are immutable; sharing them between threads is fine since
/// `process_with_scratch` only needs `&self`.
pub(crate) struct Plans<T: Real> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Plans<T> {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Forward transform with the 1/n^dim normalization applied.
    pub(crate) fn forward(&self, dim: usize, data: &mut [Complex<T>]) {
        self.run(dim, data, &self.fwd);
        let scale = T::one() / T::from_usize(data.len()).unwrap();
        for c in data.iter_mut() {
            *c = *c * scale;
        }
    }

    /// Unnormalized inverse: exact inverse of [`Plans::forward`].
    pub(crate) fn inverse(&self, dim: usize, data: &mut [Complex<T>]) {
        self.run(dim, data, &self.inv);
    }

    fn run(&self, dim: usize, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let n = self.n;
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        // rows (axis 1, contiguous); processes every length-n chunk
        fft.process_with_scratch(data, &mut scratch);
        if dim == 2 {
            transpose_square(data, n);
            fft.process_with_scratch(data, &mut scratch);
            transpose_square(data, n);
        }
    }
}

fn transpose_square<C: Copy>(data: &mut [C], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
