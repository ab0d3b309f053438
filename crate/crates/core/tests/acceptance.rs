//! Acceptance suite. Run with `cargo test --test acceptance`; prints one
//! line per criterion and a summary. With `DEBYE_ACCEPTANCE_STRICT=1` any
//! failing criterion makes the process exit non-zero.

mod common;

use std::time::Instant;

use common::*;
use debye_core::grid::{Grid, ScalarField, SpaceTimeField, SpectralField};
use debye_core::heat::{duhamel, heat_propagate};
use debye_core::lp::{random_band_limited, DyadicFilterBank};
use debye_core::mild::{
    bilinear_b, estimate_constants, free_heat, linear_l, picard_solve, picard_solve_from, IterationConfig,
    MildProblem, NormSpec, SpaceTimeNorm,
};
use debye_core::sim::{run, SolverConfig};
use debye_core::wave::{strichartz_energy_probe, wave_solve, wave_states};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn mass_conservation() -> Outcome {
    let t0 = Instant::now();
    let (_, out) = reference_run(512, 1e-3, |g| gaussian(g, 0.5, 2.0));
    let elapsed = secs(t0);
    let d = &out.diagnostics[0];
    let m0 = d[0].mass;
    let drift = d.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max);
    (
        drift <= 1e-8 && elapsed < 10.0,
        format!("relative drift {drift:.3e}, runtime {elapsed:.2} s"),
    )
}

/// Largest negative excursion over the run, relative to `max(u0)`.
fn violation(n: usize, dt: f64) -> f64 {
    let (u0, out) = reference_run(n, dt, |g| gaussian(g, 0.5, 2.0));
    let worst = out.diagnostics[0].iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min);
    (-worst).max(0.0) / u0.max()
}

/// Excursions below `eps * n` are rounding in the transforms and carry no
/// discretization trend.
fn roundoff_floor(n: usize) -> f64 {
    f64::EPSILON * n as f64
}

fn positivity() -> Outcome {
    let coarse = violation(512, 1e-3);
    let fine = violation(1024, 5e-4);
    let bounded = coarse <= 1e-8 && fine <= 1e-8;
    let at_roundoff = coarse <= roundoff_floor(512) && fine <= roundoff_floor(1024);
    let shrinks = at_roundoff || fine * 4.0 <= coarse;
    (
        bounded && shrinks,
        format!(
            "relative violation {coarse:.3e} -> {fine:.3e}{}",
            if at_roundoff { ", both at rounding level" } else { "" }
        ),
    )
}

fn l1_contraction() -> Outcome {
    let dt = 1e-3;
    let (_, out) = reference_run(512, dt, |g| dgaussian(g, 0.5, 2.0));
    let d = &out.diagnostics[0];
    let worst = d.windows(2).map(|w| (w[1].l1 - w[0].l1) / dt).fold(f64::NEG_INFINITY, f64::max);
    (
        worst <= 1e-7,
        format!("largest growth rate {worst:.3e}, l1 {:.6} -> {:.6}", d[0].l1, d.last().unwrap().l1),
    )
}

fn heat_exactness() -> Outcome {
    let t0 = Instant::now();
    let g = Grid::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
    let mut decay_err: f64 = 0.0;
    for k in [1i64, 3, 7, 20] {
        let u0 = SpectralField::single_mode(&g, &[k], 1.0).to_physical().unwrap();
        for t in [0.01, 0.1, 0.5] {
            let u = heat_propagate(&u0, t).unwrap();
            let expect = u0.scaled((-((k * k) as f64) * t).exp());
            decay_err = decay_err.max(u.max_diff(&expect).unwrap());
        }
    }

    // f(t, x) = sin(3t) cos(2x) + t^2 cos(x), compared at T = 1 across dt.
    let u0 = ScalarField::from_fn(&g, |x| (x[0]).sin());
    let solve = |steps: usize| {
        let dt = 1.0 / steps as f64;
        let f = SpaceTimeField::from_fn(&g, dt, steps, |t, x| (3.0 * t).sin() * (2.0 * x[0]).cos() + t * t * x[0].cos());
        duhamel(&u0, &f).unwrap().last().clone()
    };
    let (a, b, c) = (solve(20), solve(40), solve(80));
    let ratio = a.max_diff(&b).unwrap() / b.max_diff(&c).unwrap();
    let elapsed = secs(t0);
    (
        decay_err <= 1e-12 && (3.5..=4.5).contains(&ratio) && elapsed < 1.0,
        format!("decay error {decay_err:.3e}, Duhamel ratio {ratio:.3}, runtime {elapsed:.3} s"),
    )
}

fn dalembert() -> Outcome {
    let t0 = Instant::now();
    let (n, length) = (512, 64.0);
    let g = Grid::new(1, n, length).unwrap();
    let w = 2.0;
    let bump = |x: f64| (-(x - 32.0) * (x - 32.0) / (2.0 * w * w)).exp();
    let v0 = ScalarField::from_fn(&g, |x| bump(x[0]));
    let zero = ScalarField::zeros(&g);

    // Pre-wrap: both pulses stay 8 widths away from the seam.
    let (dt, steps) = (0.05, 200);
    let u = SpaceTimeField::zeros(&g, &debye_core::time_levels(dt, steps));
    let s = wave_solve(&u, &v0, &zero).unwrap();
    let mut split_err: f64 = 0.0;
    for (k, frame) in s.frames().iter().enumerate() {
        let t = k as f64 * dt;
        let expect = ScalarField::from_fn(&g, |x| 0.5 * (bump(x[0] + t) + bump(x[0] - t)));
        split_err = split_err.max(frame.max_diff(&expect).unwrap());
    }

    let one = SpaceTimeField::constant_in_time(&ScalarField::constant(&g, 1.0), 0.1, 30);
    let s = wave_solve(&one, &zero, &zero).unwrap();
    let const_err = s
        .frames()
        .iter()
        .zip(s.times())
        .map(|(f, &t)| f.max_diff(&ScalarField::constant(&g, 0.5 * t * t)).unwrap())
        .fold(0.0, f64::max);

    // S_tt - S_xx - u by centered differences at t = 1.
    let gm = Grid::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
    let residual = |dt: f64| {
        let steps = (1.5 / dt).round() as usize;
        let src = SpaceTimeField::from_fn(&gm, dt, steps, |t, x| (2.0 * t).cos() * x[0].cos() + t);
        let v0 = ScalarField::from_fn(&gm, |x| (2.0 * x[0]).sin());
        let v1 = ScalarField::from_fn(&gm, |x| x[0].cos());
        let s = wave_solve(&src, &v0, &v1).unwrap();
        let m = (1.0 / dt).round() as usize;
        let stt = s.frame(m + 1).add(s.frame(m - 1)).unwrap().sub(&s.frame(m).scaled(2.0)).unwrap().scaled(1.0 / (dt * dt));
        stt.sub(&s.frame(m).laplacian()).unwrap().sub(src.frame(m)).unwrap().max_abs()
    };
    let (r1, r2) = (residual(0.02), residual(0.01));
    let order = r1 / r2;
    let elapsed = secs(t0);
    (
        split_err <= 1e-8 && const_err <= 1e-8 && (3.5..=4.5).contains(&order) && elapsed < 5.0,
        format!(
            "split error {split_err:.3e}, t^2/2 error {const_err:.3e}, residual {r1:.2e} -> {r2:.2e} (ratio {order:.3}), runtime {elapsed:.2} s"
        ),
    )
}

fn wave_energy() -> Outcome {
    let g = Grid::new(1, 256, 32.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let v0 = random_band_limited(&g, 32, &mut rng);
    let v1 = random_band_limited(&g, 32, &mut rng);
    let u = SpaceTimeField::zeros(&g, &debye_core::time_levels(0.01, 200));
    let states = wave_states(&u, &v0, &v1).unwrap();
    let e0: f64 = states[0].energy();
    let drift = states.iter().map(|s| ((s.energy() - e0) / e0).abs()).fold(0.0, f64::max);
    (drift <= 1e-10, format!("relative drift {drift:.3e} over T = 2"))
}

/// Small-data problem on `n = 256`, `T = 0.5`, `dt = 2e-3` with data at
/// 10% of the empirical radius.
fn small_data_problem() -> (MildProblem<f64>, IterationConfig) {
    let g = Grid::new(1, 256, REF_LENGTH).unwrap();
    let config = SolverConfig::single(g.clone(), 0.5, 2e-3).unwrap();
    let iter = IterationConfig::new(25, 1e-10, NormSpec::default_for(1)).unwrap().with_probes(16, 7);
    let zero = ScalarField::zeros(&g);
    let base = MildProblem::new(config.clone(), gaussian(&g, 0.5, 2.0), zero.clone(), zero.clone()).unwrap();
    let report = estimate_constants(&base, iter.norm, iter.trials, iter.seed).unwrap();
    let scale = 0.1 * report.alpha / report.data_norm;
    let problem = MildProblem::new(config, base.u0.scaled(scale), zero.clone(), zero).unwrap();
    (problem, iter)
}

fn fixed_point(problem: &MildProblem<f64>, iter: &IterationConfig) -> Outcome {
    let t0 = Instant::now();
    let out = match picard_solve(problem, iter) {
        Ok(o) => o,
        Err(e) => return (false, format!("picard_solve failed: {e}")),
    };
    let res = &out.trace.residuals;
    let monotone = res.windows(2).skip(1).all(|w| w[1] <= w[0]);

    let config = &problem.config;
    let x = &out.solution;
    let gamma = free_heat(&problem.u0, config).unwrap();
    let phi = gamma
        .add(&linear_l(x, &problem.v0, &problem.v1, config).unwrap())
        .unwrap()
        .add(&bilinear_b(x, x, config).unwrap())
        .unwrap();
    let norm = SpaceTimeNorm::new(iter.norm, config.grid()).unwrap();
    let fp_res = norm.eval(&phi.sub(x).unwrap()) / norm.eval(x);

    let other = picard_solve_from(problem, iter, Some(&gamma.scaled(1.5))).unwrap();
    let spread = norm.eval(&other.solution.sub(x).unwrap()) / norm.eval(x);
    let elapsed = secs(t0);
    (
        out.report.guaranteed
            && out.trace.iterations <= 25
            && monotone
            && fp_res <= 2.0 * iter.rel_tol
            && spread <= 10.0 * iter.rel_tol
            && elapsed < 60.0,
        format!(
            "{} iterations, monotone {monotone}, fixed-point residual {fp_res:.2e}, start spread {spread:.2e}, guaranteed {}, runtime {elapsed:.1} s",
            out.trace.iterations, out.report.guaranteed
        ),
    )
}

fn operator_oracles() -> Outcome {
    let g = Grid::new(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let config = SolverConfig::single(g.clone(), 0.5, 0.05).unwrap();
    let steps = config.steps();
    let u = SpaceTimeField::from_fn(&g, 0.05, steps, |t, x| (1.0 + t) * x[0].cos());
    let w = SpaceTimeField::from_fn(&g, 0.05, steps, |t, x| (1.0 - 0.5 * t) * (2.0 * x[0]).sin());
    let v0 = ScalarField::from_fn(&g, |x| (3.0 * x[0]).cos());
    let v1 = ScalarField::from_fn(&g, |x| 0.5 * x[0].sin());
    let zero = ScalarField::zeros(&g);

    let diff = |code: &SpaceTimeField<f64>, brute: &[Vec<f64>]| {
        code.frames()
            .iter()
            .zip(brute)
            .flat_map(|(f, b)| f.samples().iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    };
    let b_err = diff(&bilinear_b(&u, &w, &config).unwrap(), &oracle::mild_operator(&u, Some(&w), &zero, &zero, 16));
    let l_err = diff(&linear_l(&u, &v0, &v1, &config).unwrap(), &oracle::mild_operator(&u, None, &v0, &v1, 16));
    (
        b_err <= 1e-6 && l_err <= 1e-6,
        format!("B error {b_err:.3e}, L error {l_err:.3e}"),
    )
}

fn t_independence() -> Outcome {
    let t0 = Instant::now();
    let g = Grid::new(2, 128, 32.0).unwrap();
    let u0 = gaussian(&g, 0.1, 2.0);
    let v0 = gaussian(&g, 0.05, 2.0);
    let zero = ScalarField::zeros(&g);
    let mut c0 = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let config = SolverConfig::single(g.clone(), t, 0.025).unwrap();
        let problem = MildProblem::new(config, u0.clone(), v0.clone(), zero.clone()).unwrap();
        c0.push(estimate_constants(&problem, NormSpec::default_for(2), 16, 11).unwrap().c0);
    }
    let hi = c0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = c0.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = hi / lo - 1.0;
    let elapsed = secs(t0);
    (
        spread < 0.25 && elapsed < 120.0,
        format!("C0 {:.3e} / {:.3e} / {:.3e}, spread {spread:.3}, runtime {elapsed:.1} s", c0[0], c0[1], c0[2]),
    )
}

fn strichartz() -> Outcome {
    let g: Grid<f64> = Grid::new(1, 256, 32.0).unwrap();
    let bank = DyadicFilterBank::new(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut scale_err: f64 = 0.0;
    for _ in 0..50 {
        let v0 = random_band_limited(&g, 32, &mut rng);
        let v1 = random_band_limited(&g, 32, &mut rng);
        let a = random_band_limited(&g, 32, &mut rng);
        let b = random_band_limited(&g, 32, &mut rng);
        for t in [0.5, 1.0, 2.0] {
            let steps = (t / 0.01_f64).round() as usize;
            let u = SpaceTimeField::from_fn(&g, 0.01, steps, |s, x| {
                let i = (x[0] / g.dx()).round() as usize % g.n();
                a.samples()[i] * (1.0 - s / t) + b.samples()[i] * s / t
            });
            let r = strichartz_energy_probe(&u, &v0, &v1, 0.0, &bank).unwrap();
            let r2 = strichartz_energy_probe(&u.scaled(37.5), &v0.scaled(37.5), &v1.scaled(37.5), 0.0, &bank).unwrap();
            worst = worst.max(r);
            scale_err = scale_err.max((r2 - r).abs() / r);
        }
    }
    (
        worst <= 1.0 + 1e-9 && scale_err <= 1e-12,
        format!("largest ratio {worst:.6}, scale defect {scale_err:.2e}"),
    )
}

fn gagliardo_nirenberg() -> Outcome {
    let max_gn = |n: usize, dt: f64| {
        let (_, out) = reference_run(n, dt, |g| gaussian(g, 0.5, 2.0));
        let d = &out.diagnostics[0];
        let finite = d.iter().all(|r| r.gn_ratio.is_finite());
        (finite, d.iter().map(|r| r.gn_ratio).fold(0.0, f64::max))
    };
    let (f1, m1) = max_gn(512, 1e-3);
    let (f2, m2) = max_gn(1024, 5e-4);
    let q = m1.max(m2) / m1.min(m2);
    (
        f1 && f2 && q <= 2.0,
        format!("max ratio {m1:.6} -> {m2:.6}, all finite {}", f1 && f2),
    )
}

fn picard_vs_stepper(problem: &MildProblem<f64>, iter: &IterationConfig) -> Outcome {
    let mild = picard_solve(problem, iter).unwrap();
    let out = run(&[problem.u0.clone()], &problem.v0, &problem.v1, &problem.config).unwrap();
    let gap = mild.solution.last().max_diff(out.u[0].last()).unwrap();
    (gap <= 1e-5, format!("terminal max difference {gap:.3e}"))
}

fn species_cancellation() -> Outcome {
    let g = Grid::new(1, 512, REF_LENGTH).unwrap();
    let config = two_species_config(&g, 1.0, 1e-3);
    let u0 = gaussian(&g, 0.5, 2.0);
    let zero = ScalarField::zeros(&g);
    let out = run(&[u0.clone(), u0.clone()], &zero, &zero, &config).unwrap();
    let mut err: f64 = 0.0;
    for field in &out.u {
        for (f, &t) in field.frames().iter().zip(field.times()) {
            err = err.max(f.max_diff(&heat_propagate(&u0, t).unwrap()).unwrap());
        }
    }
    (err <= 1e-10, format!("max deviation from heat flow {err:.3e}"))
}

fn main() {
    let (problem, iter) = small_data_problem();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("mass conservation", Box::new(mass_conservation)),
        ("positivity", Box::new(positivity)),
        ("L1 contraction", Box::new(l1_contraction)),
        ("heat propagator exactness", Box::new(heat_exactness)),
        ("d'Alembert closed forms", Box::new(dalembert)),
        ("wave energy conservation", Box::new(wave_energy)),
        ("Picard fixed point", Box::new(|| fixed_point(&problem, &iter))),
        ("operator oracles", Box::new(operator_oracles)),
        ("T-independence of C0", Box::new(t_independence)),
        ("Strichartz-type probe", Box::new(strichartz)),
        ("Gagliardo-Nirenberg diagnostic", Box::new(gagliardo_nirenberg)),
        ("Picard vs time stepper", Box::new(|| picard_vs_stepper(&problem, &iter))),
        ("multi-species cancellation", Box::new(species_cancellation)),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let (mut ran, mut failed) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) {
                continue;
            }
        }
        let (ok, detail) = check();
        ran += 1;
        if !ok {
            failed += 1;
        }
        println!("criterion {:02} {name}: {} ({detail})", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", ran - failed, ran);
    let strict = std::env::var("DEBYE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
