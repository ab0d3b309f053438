#![allow(dead_code)]

use std::f64::consts::PI;

use debye_core::grid::{Grid, ScalarField, SpaceTimeField};
use debye_core::io::InitialDataSpec;
use debye_core::sim::{run, RunOutput, SolverConfig, Species, WrapPolicy};
use std::path::Path;

pub const REF_LENGTH: f64 = 64.0;

pub fn reference_config(n: usize, dt: f64) -> SolverConfig<f64> {
    let g = Grid::new(1, n, REF_LENGTH).unwrap();
    SolverConfig::single(g, 1.0, dt).unwrap()
}

pub fn gaussian(g: &Grid<f64>, amp: f64, width: f64) -> ScalarField<f64> {
    InitialDataSpec::gaussian(amp, width).realize(g, Path::new(".")).unwrap()
}

pub fn dgaussian(g: &Grid<f64>, amp: f64, width: f64) -> ScalarField<f64> {
    InitialDataSpec::dgaussian(amp, width).realize(g, Path::new(".")).unwrap()
}

/// Gaussian density (amplitude 0.5, width 2) in a Gaussian potential
/// (amplitude 0.1, width 2), both centered, `V1 = 0`.
pub fn reference_run(n: usize, dt: f64, u0: impl Fn(&Grid<f64>) -> ScalarField<f64>) -> (ScalarField<f64>, RunOutput<f64>) {
    let c = reference_config(n, dt);
    let g = c.grid().clone();
    let u = u0(&g);
    let out = run(&[u.clone()], &gaussian(&g, 0.1, 2.0), &ScalarField::zeros(&g), &c).unwrap();
    (u, out)
}

pub fn two_species_config(g: &Grid<f64>, t: f64, dt: f64) -> SolverConfig<f64> {
    SolverConfig::new(
        g.clone(),
        t,
        dt,
        vec![Species::new(1.0, 1.0), Species::new(-1.0, 1.0)],
        WrapPolicy::Warn,
    )
    .unwrap()
}

/// Dense-quadrature reimplementation of the mild operators on a 1D grid,
/// with a naive DFT and composite Simpson at `dt / sub` in time.
pub mod oracle {
    use super::*;

    #[derive(Clone, Copy, Debug)]
    pub struct C {
        pub re: f64,
        pub im: f64,
    }

    impl C {
        fn add(self, o: C) -> C {
            C { re: self.re + o.re, im: self.im + o.im }
        }
        fn scale(self, a: f64) -> C {
            C { re: self.re * a, im: self.im * a }
        }
        fn times_i(self, a: f64) -> C {
            C { re: -self.im * a, im: self.re * a }
        }
    }

    fn k_of(p: usize, n: usize) -> i64 {
        if p <= n / 2 {
            p as i64
        } else {
            p as i64 - n as i64
        }
    }

    pub fn dft(x: &[f64]) -> Vec<C> {
        let n = x.len();
        (0..n)
            .map(|p| {
                let mut acc = C { re: 0.0, im: 0.0 };
                for (j, &v) in x.iter().enumerate() {
                    let th = -2.0 * PI * (p * j) as f64 / n as f64;
                    acc = acc.add(C { re: v * th.cos(), im: v * th.sin() });
                }
                acc.scale(1.0 / n as f64)
            })
            .collect()
    }

    pub fn idft(c: &[C]) -> Vec<f64> {
        let n = c.len();
        (0..n)
            .map(|j| {
                c.iter().enumerate().fold(0.0, |a, (p, z)| {
                    let th = 2.0 * PI * (p * j) as f64 / n as f64;
                    a + z.re * th.cos() - z.im * th.sin()
                })
            })
            .collect()
    }

    /// `d/dx` with the Nyquist coefficient dropped.
    fn deriv(c: &[C], length: f64) -> Vec<C> {
        let n = c.len();
        c.iter()
            .enumerate()
            .map(|(p, &z)| {
                let k = k_of(p, n);
                if k == (n / 2) as i64 {
                    C { re: 0.0, im: 0.0 }
                } else {
                    z.times_i(2.0 * PI * k as f64 / length)
                }
            })
            .collect()
    }

    fn interp(frames: &[Vec<C>], dt: f64, tau: f64) -> Vec<C> {
        let k = ((tau / dt).floor() as usize).min(frames.len() - 2);
        let th = (tau - k as f64 * dt) / dt;
        frames[k]
            .iter()
            .zip(&frames[k + 1])
            .map(|(&a, &b)| a.scale(1.0 - th).add(b.scale(th)))
            .collect()
    }

    /// `int_0^{t_m} kernel(p, t_m - tau) f_p(tau) d tau` per mode, `f`
    /// linear between frames, Simpson with `sub` panels per frame.
    fn convolve(frames: &[Vec<C>], dt: f64, sub: usize, kernel: impl Fn(usize, f64) -> f64) -> Vec<Vec<C>> {
        let n = frames[0].len();
        (0..frames.len())
            .map(|m| {
                let t = m as f64 * dt;
                let mut acc = vec![C { re: 0.0, im: 0.0 }; n];
                let panels = m * sub;
                if panels == 0 {
                    return acc;
                }
                let h = t / panels as f64;
                for q in 0..=panels {
                    let w = if q == 0 || q == panels {
                        1.0
                    } else if q % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    let tau = q as f64 * h;
                    let f = interp(frames, dt, tau);
                    for p in 0..n {
                        acc[p] = acc[p].add(f[p].scale(w * h / 3.0 * kernel(p, t - tau)));
                    }
                }
                acc
            })
            .collect()
    }

    fn omega(p: usize, n: usize, length: f64) -> f64 {
        (2.0 * PI * k_of(p, n) as f64 / length).abs()
    }

    /// `grad S(w, V0, V1)` at the frames, physical space.
    fn wave_gradient(w: &[Vec<C>], v0: &[C], v1: &[C], dt: f64, length: f64, sub: usize) -> Vec<Vec<f64>> {
        let n = v0.len();
        let sources = convolve(w, dt, sub, |p, s| {
            let om = omega(p, n, length);
            if om == 0.0 {
                s
            } else {
                (om * s).sin() / om
            }
        });
        sources
            .into_iter()
            .enumerate()
            .map(|(m, src)| {
                let t = m as f64 * dt;
                let total: Vec<C> = (0..n)
                    .map(|p| {
                        let om = omega(p, n, length);
                        let sinc = if om == 0.0 { t } else { (om * t).sin() / om };
                        src[p].add(v0[p].scale((om * t).cos())).add(v1[p].scale(sinc))
                    })
                    .collect();
                idft(&deriv(&total, length))
            })
            .collect()
    }

    /// `int_0^t e^{(t-s) Lap} d_x(u grad S)` with `S = S(w, V0, V1)`.
    pub fn mild_operator(
        u: &SpaceTimeField<f64>,
        w: Option<&SpaceTimeField<f64>>,
        v0: &ScalarField<f64>,
        v1: &ScalarField<f64>,
        sub: usize,
    ) -> Vec<Vec<f64>> {
        let g = u.grid();
        let (n, length, dt) = (g.n(), g.length(), u.dt());
        let w_hat: Vec<Vec<C>> = match w {
            Some(w) => w.frames().iter().map(|f| dft(f.samples())).collect(),
            None => vec![vec![C { re: 0.0, im: 0.0 }; n]; u.len()],
        };
        let grad = wave_gradient(&w_hat, &dft(v0.samples()), &dft(v1.samples()), dt, length, sub);
        let source: Vec<Vec<C>> = u
            .frames()
            .iter()
            .zip(&grad)
            .map(|(f, gs)| {
                let prod: Vec<f64> = f.samples().iter().zip(gs).map(|(a, b)| a * b).collect();
                deriv(&dft(&prod), length)
            })
            .collect();
        convolve(&source, dt, sub, |p, s| {
            let om = omega(p, n, length);
            (-om * om * s).exp()
        })
        .iter()
        .map(|c| idft(c))
        .collect()
    }
}
