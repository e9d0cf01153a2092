//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use boussinesq::asymptotics::{amplitude_a2, k2, soliton_asymptote, DeltaTable, SolitonAsymptote};
use boussinesq::integrator::{
    reconstruct, rk4_step, simulate, simulate_with, uniform_points, Rk4Workspace, Trajectory,
};
use boussinesq::scattering::{
    find_k0, norming_constant, omega, PotentialSampler, RootSearch, ScatteringOptions,
    NORMING_SPREAD_TOLERANCE,
};
use boussinesq::scheme::{DampedSystem, SchemeConfig, SpectralState};
use boussinesq::spectral::{
    dealiased_product, forward_dft, inverse_dft, truncated_convolution, PeriodicGrid,
    PhysicalField, SpectralField,
};
use boussinesq::waves::{
    fitted_slope, linf_error, track_peak, InitialProfile, PeakWindow, SolitonDescriptor,
    ERROR_SAMPLES,
};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn soliton(amplitude: f64) -> (InitialProfile, SolitonDescriptor) {
    let p = InitialProfile::Soliton { amplitude, x0: 0.0 };
    let s = p.exact_soliton().unwrap();
    (p, s)
}

/// `(t, e(t))` against the exact soliton, with `e` over `samples` points of `[-L, L)`.
fn soliton_errors(
    config: &SchemeConfig,
    amplitude: f64,
    times: &[f64],
    samples: usize,
) -> Vec<(f64, f64)> {
    let (profile, exact) = soliton(amplitude);
    let grid = config.grid().unwrap();
    let l = grid.half_period();
    let initial = profile.initial_state(grid, config.antiderivative).unwrap();
    let mut out = Vec::new();
    simulate_with(config, &initial, times, |s| {
        let t = s.t;
        out.push((
            t,
            linf_error(s, grid, |x| exact.value(x, t), (-l, l), samples),
        ));
        Ok(())
    })
    .unwrap();
    out
}

fn error_at(curve: &[(f64, f64)], t: f64) -> f64 {
    curve.iter().find(|p| (p.0 - t).abs() < 1e-9).unwrap().1
}

fn every(step: f64, t_final: f64) -> Vec<f64> {
    let n = (t_final / step).round() as usize;
    (0..=n).map(|m| m as f64 * step).collect()
}

fn criterion_1() -> Outcome {
    let targets = [(36.0, 0.00839), (50.0, 0.00734), (72.0, 0.00880)];
    let times: Vec<f64> = targets.iter().map(|t| t.0).collect();
    let base = SchemeConfig::new(200.0, 72.0).unwrap().with_damping(false);
    let coarse = soliton_errors(&base, 0.369, &times, ERROR_SAMPLES);
    let fine = soliton_errors(&base.clone().with_dt(0.05), 0.369, &times, ERROR_SAMPLES);
    let mut pass = true;
    let mut parts = Vec::new();
    for &(t, target) in &targets {
        let (a, b) = (error_at(&coarse, t), error_at(&fine, t));
        let ok = within(a, target, 0.25) && within(b, target, 0.25) && (a - b).abs() <= 0.05 * b;
        pass &= ok;
        parts.push(format!("e({t}) = {a:.5} (dt/2: {b:.5}, target {target})"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let targets = [(36.0, 0.212e-4), (72.0, 0.204e-4)];
    let times: Vec<f64> = targets.iter().map(|t| t.0).collect();
    let config = SchemeConfig::new(200.0, 72.0).unwrap();
    let curve = soliton_errors(&config, 0.1, &times, ERROR_SAMPLES);
    let mut pass = true;
    let mut parts = Vec::new();
    for &(t, target) in &targets {
        let e = error_at(&curve, t);
        pass &= within(e, target, 0.25);
        parts.push(format!("e({t}) = {e:.4e} (target {target:.3e})"));
    }
    outcome(pass, parts.join("; "))
}

/// Damped `A = 0.05, L = 200` error curve on `t = 0, 0.5, ..., 50`; reused by criterion 4.
fn damped_small_soliton() -> Vec<(f64, f64)> {
    let config = SchemeConfig::new(200.0, 50.0).unwrap();
    soliton_errors(&config, 0.05, &every(0.5, 50.0), ERROR_SAMPLES)
}

fn criterion_3(damped: &[(f64, f64)]) -> Outcome {
    let config = SchemeConfig::new(200.0, 50.0).unwrap().with_damping(false);
    let undamped = soliton_errors(&config, 0.05, &[50.0], ERROR_SAMPLES);
    let e_undamped = error_at(&undamped, 50.0);
    let (t_max, e_max) = damped
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let e_end = error_at(damped, 50.0);
    let ratio = e_undamped / e_max;
    let peak_ok = (t_max - 2.5).abs() <= 1.0 && e_end < e_max;
    outcome(
        ratio >= 10.0 && peak_ok,
        format!(
            "max damped e = {e_max:.3e} at t = {t_max}, damped e(50) = {e_end:.3e}, \
             undamped e(50) = {e_undamped:.3e}, ratio {ratio:.2} (need >= 10, peak near 2.5)"
        ),
    )
}

fn criterion_4(damped: &[(f64, f64)]) -> Outcome {
    let plateau = damped
        .iter()
        .filter(|p| p.0 >= 25.0)
        .map(|p| p.1)
        .sum::<f64>()
        / damped.iter().filter(|p| p.0 >= 25.0).count() as f64;
    let config = SchemeConfig::new(1200.0, 1000.0).unwrap();
    let curve = soliton_errors(&config, 0.05, &every(50.0, 1000.0), ERROR_SAMPLES);
    let finite = curve.len() == 21 && curve.iter().all(|p| p.1.is_finite());
    let e_max = curve.iter().fold(0.0f64, |m, p| m.max(p.1));
    let e_late = curve
        .iter()
        .filter(|p| p.0 >= 500.0)
        .fold(0.0f64, |m, p| m.max(p.1));
    let same_order = e_max <= 10.0 * plateau && e_late >= 0.1 * plateau;
    outcome(
        finite && same_order,
        format!(
            "completed to t = 1000: {finite}; max e = {e_max:.3e}, max e on [500, 1000] = {e_late:.3e}, \
             L = 200 plateau {plateau:.3e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let p = PotentialSampler::from_profile(&InitialProfile::PerturbedSoliton { amplitude: 0.05 });
    match find_k0(&p, (1.01, 3.0), 0.05) {
        Ok(RootSearch::Zeros { zeros }) => {
            let k0 = zeros[0];
            let a0 = boussinesq::asymptotics::soliton_amplitude(k0);
            let c0 = boussinesq::asymptotics::soliton_speed(k0);
            let pass = (k0 - 1.1755).abs() <= 1e-3
                && (a0 - 0.03955).abs() <= 5e-5
                && (c0 - 1.0131).abs() <= 5e-5;
            outcome(pass, format!("k0 = {k0:.7}, A0 = {a0:.6}, c0 = {c0:.6}"))
        }
        other => outcome(false, format!("root search: {other:?}")),
    }
}

/// The perturbed soliton on `L = 1200` to `t = 1000`, snapshots every 10.
fn perturbed_run() -> Trajectory {
    let config = SchemeConfig::new(1200.0, 1000.0).unwrap();
    let grid = config.grid().unwrap();
    let profile = InitialProfile::PerturbedSoliton { amplitude: 0.05 };
    let initial = profile.initial_state(grid, config.antiderivative).unwrap();
    simulate(&config, &initial, &every(10.0, 1000.0)).unwrap()
}

fn criterion_6(run: &Trajectory) -> Outcome {
    let window = PeakWindow::Similarity {
        zeta_lo: 0.95,
        zeta_hi: 1.1,
    };
    let track = track_peak(run, window, (500.0, 1000.0), 0.05, 0.5);
    let amp = track.mean_amplitude();
    let pass = track.times.len() == 51
        && within(amp, 0.0396, 0.10)
        && (track.speed - 1.0131).abs() <= 0.005;
    outcome(
        pass,
        format!(
            "mean amplitude {amp:.5} (target 0.0396 +- 10%), speed {:.5} (target 1.0131 +- 0.005), {} snapshots, {} warnings",
            track.speed,
            track.times.len(),
            track.warnings.len()
        ),
    )
}

fn u_sol() -> Result<SolitonAsymptote, String> {
    let p = PotentialSampler::from_profile(&InitialProfile::PerturbedSoliton { amplitude: 0.05 });
    let k0 = match find_k0(&p, (1.01, 3.0), 0.05).map_err(|e| e.to_string())? {
        RootSearch::Zeros { zeros } => zeros[0],
        RootSearch::Solitonless => return Err("no zero".into()),
    };
    let c = norming_constant(k0, &p, 0.05, NORMING_SPREAD_TOLERANCE).map_err(|e| e.to_string())?;
    let delta = DeltaTable::build(
        &p,
        C::from_polar(1.0, 1.885),
        128,
        &ScatteringOptions::fast_two(),
    )
    .map_err(|e| e.to_string())?;
    soliton_asymptote(k0, c.value, &delta).map_err(|e| e.to_string())
}

fn criterion_8(run: &Trajectory) -> Outcome {
    let sol = match u_sol() {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("u_sol unavailable: {e}")),
    };
    let l = run.grid.half_period();
    let mut ts = Vec::new();
    let mut scaled = Vec::new();
    for state in &run.states {
        let t = state.t;
        if !(200.0..=1000.0).contains(&t) || (t % 50.0).abs() > 1e-9 {
            continue;
        }
        let (lo, hi) = (1.001 * t, (2.0 * t).min(l));
        let n = ((hi - lo) / 0.05).ceil() as usize;
        let xs = uniform_points(lo, hi, n);
        let us = reconstruct(state, run.grid, &xs);
        let sup = xs
            .iter()
            .zip(&us)
            .fold(0.0f64, |m, (&x, &u)| m.max((u - sol.value(x, t)).abs()));
        ts.push(t);
        scaled.push(t.sqrt() * sup);
    }
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let drift = fitted_slope(&ts, &scaled) * (ts.last().unwrap() - ts[0]);
    let pass = scaled.iter().all(|v| v.is_finite()) && drift.abs() < 0.5 * mean;
    outcome(
        pass,
        format!(
            "sqrt(t) sup|U - u_sol| on [1.001t, min(2t, L)]: mean {mean:.3e}, trend change over [200, 1000] {drift:.3e}, \
             range [{:.3e}, {:.3e}], ln f = {:.5}",
            scaled.iter().copied().fold(f64::INFINITY, f64::min),
            scaled.iter().copied().fold(0.0, f64::max),
            sol.ln_f
        ),
    )
}

fn random_field(g: PeriodicGrid, rng: &mut ChaCha8Rng) -> SpectralField {
    let coeffs = (0..g.len())
        .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut f = SpectralField::from_coeffs(g, coeffs).unwrap();
    f.enforce_reality();
    f
}

fn grid(modes: usize) -> PeriodicGrid {
    PeriodicGrid::new(modes as f64 * PI + 1.0, modes).unwrap()
}

fn sup(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

/// Each check returns `(name, passed, detail)`.
fn criterion_7(damped_curve_ok: bool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checks: Vec<(&str, bool, String)> = Vec::new();

    // DFT round trip and Parseval.
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=256);
        let g = grid(n);
        let values: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = forward_dft(&PhysicalField::new(g, values.clone()).unwrap());
        let back = inverse_dft(&spec);
        let trip = sup(back.values.iter().zip(&values).map(|(a, b)| (a - b).abs()));
        let phys = values.iter().map(|v| v * v).sum::<f64>() / (2 * n) as f64;
        let spectral: f64 = spec.coeffs.iter().map(|c| c.norm_sqr()).sum();
        worst = worst.max(trip).max((phys - spectral).abs() / phys);
    }
    checks.push(("dft", worst <= 1e-12, format!("{worst:.1e}")));

    // Truncated convolution against the double sum.
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8usize);
        let g = grid(n);
        let (a, b) = (random_field(g, &mut rng), random_field(g, &mut rng));
        let got = truncated_convolution(&a, &b);
        let ni = n as i64;
        for j in -ni..ni {
            let mut want = C::new(0.0, 0.0);
            for l in -ni..ni {
                let m = j - l;
                if (-ni..ni).contains(&m) {
                    want += a.get(l) * b.get(m);
                }
            }
            worst = worst.max((got.get(j) - want).norm());
        }
    }
    checks.push(("convolution", worst <= 1e-13, format!("{worst:.1e}")));

    // Dealiased product against the truncated convolution.
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=64usize);
        let g = grid(n);
        let (a, b) = (random_field(g, &mut rng), random_field(g, &mut rng));
        let (x, y) = (truncated_convolution(&a, &b), dealiased_product(&a, &b));
        worst = worst.max(sup(x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(p, q)| (p - q).norm())));
    }
    checks.push(("dealiased", worst <= 1e-11, format!("{worst:.1e}")));

    // Mass and Hermitian symmetry over a full damped run of the three-Gaussian data.
    let config = SchemeConfig::new(200.0, 1000.0).unwrap();
    let g = config.grid().unwrap();
    let mut state = InitialProfile::reference_three_gaussians()
        .initial_state(g, config.antiderivative)
        .unwrap();
    let mass = state.mass_mode();
    let mut sys = DampedSystem::from_config(&config).unwrap();
    let mut ws = Rk4Workspace::default();
    let (mut drift, mut defect): (f64, f64) = (0.0, 0.0);
    for _ in 0..10_000 {
        state = rk4_step(
            &state,
            config.dt,
            |a, b, c, d| sys.eval(a, b, c, d),
            &mut ws,
        )
        .unwrap();
        drift = drift.max((state.mass_mode() - mass).norm());
        let u = SpectralField {
            grid: g,
            coeffs: state.u_hat.clone(),
        };
        let v = SpectralField {
            grid: g,
            coeffs: state.v_hat.clone(),
        };
        defect = defect.max(u.hermitian_defect()).max(v.hermitian_defect());
    }
    checks.push(("mass", drift <= 1e-12, format!("{drift:.1e}")));
    checks.push(("hermitian", defect <= 1e-10, format!("{defect:.1e}")));

    // RK4 self-convergence.
    let order = {
        let (profile, _) = soliton(0.1);
        let finals: Vec<SpectralState> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&dt| {
                let c = SchemeConfig::new(200.0, 20.0)
                    .unwrap()
                    .with_damping(false)
                    .with_dt(dt);
                let g = c.grid().unwrap();
                let init = profile.initial_state(g, c.antiderivative).unwrap();
                simulate(&c, &init, &[]).unwrap().states.pop().unwrap()
            })
            .collect();
        let diff = |a: &SpectralState, b: &SpectralState| {
            sup(a.u_hat.iter().zip(&b.u_hat).map(|(p, q)| (p - q).norm()))
        };
        (diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2])).log2()
    };
    checks.push(("rk4 order", order >= 3.5, format!("{order:.2}")));

    // Soliton PDE residual by sixth-order differences.
    let residual = {
        let s = SolitonDescriptor::new(0.3, 1.0).unwrap();
        let h = 0.02;
        let d2 = |f: &dyn Fn(f64) -> f64, x: f64| {
            (2.0 * f(x - 3.0 * h) - 27.0 * f(x - 2.0 * h) + 270.0 * f(x - h) - 490.0 * f(x)
                + 270.0 * f(x + h)
                - 27.0 * f(x + 2.0 * h)
                + 2.0 * f(x + 3.0 * h))
                / (180.0 * h * h)
        };
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let (x, t) = (-8.0 + 0.83 * i as f64, 0.37 * i as f64);
            let u = |x: f64, t: f64| s.value(x, t);
            let r = d2(&|tt| u(x, tt), t)
                - d2(&|xx| u(xx, t), x)
                - d2(&|xx| u(xx, t).powi(2), x)
                - d2(&|xx| d2(&|y| u(y, t), xx), x);
            worst = worst.max(r.abs());
        }
        worst
    };
    checks.push((
        "soliton residual",
        residual < 1e-6,
        format!("{residual:.1e}"),
    ));

    // Norming constant: spread and the sign of i w^2 (k0^2 - w^2) c.
    let p = PotentialSampler::from_profile(&InitialProfile::PerturbedSoliton { amplitude: 0.05 });
    match find_k0(&p, (1.01, 3.0), 0.05) {
        Ok(RootSearch::Zeros { zeros }) => {
            let k0 = zeros[0];
            match norming_constant(k0, &p, 0.05, 1.0) {
                Ok(c) => {
                    checks.push(("c spread", c.spread < 1e-4, format!("{:.1e}", c.spread)));
                    let w = omega();
                    let q = C::new(0.0, 1.0) * w * w * (k0 * k0 - w * w) * c.value;
                    let ok = q.re >= 0.0 && q.im.abs() <= 1e-6 * q.norm();
                    checks.push(("c sign", ok, format!("{:.3e}{:+.1e}i", q.re, q.im)));
                }
                Err(e) => checks.push(("c spread", false, e.to_string())),
            }
        }
        other => checks.push(("c spread", false, format!("{other:?}"))),
    }

    // nu_hat on zeta sweeps.
    let mut worst = f64::INFINITY;
    let mut failure = None;
    for data in [
        InitialProfile::reference_gaussian(),
        InitialProfile::PerturbedSoliton { amplitude: 0.05 },
    ] {
        let p = PotentialSampler::from_profile(&data);
        for m in 1..20 {
            match amplitude_a2(0.05 * m as f64, &p, &ScatteringOptions::default()) {
                Ok(a) => worst = worst.min(a.nu_hat),
                Err(e) => failure = Some(e.to_string()),
            }
        }
    }
    checks.push((
        "nu_hat",
        failure.is_none() && worst >= -1e-10,
        failure.unwrap_or_else(|| format!("min {worst:.1e}")),
    ));

    let k2_dev = sup((0..1000).map(|m| (k2(m as f64 / 1000.0).norm() - 1.0).abs()));
    checks.push(("|k2|", k2_dev <= 1e-10, format!("{k2_dev:.1e}")));
    checks.push(("damped curve", damped_curve_ok, String::new()));

    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(n, ok, d)| format!("{n} {} {d}", if *ok { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn report(id: u32, start: Instant, o: &Outcome, failed: &mut Vec<u32>) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {id}: {tag} ({:.1} s) {}",
        start.elapsed().as_secs_f64(),
        o.detail
    );
    if !o.pass {
        failed.push(id);
    }
}

fn main() {
    let mut failed = Vec::new();

    let t = Instant::now();
    report(1, t, &criterion_1(), &mut failed);
    let t = Instant::now();
    report(2, t, &criterion_2(), &mut failed);

    let t = Instant::now();
    let damped = damped_small_soliton();
    report(3, t, &criterion_3(&damped), &mut failed);
    let t = Instant::now();
    report(4, t, &criterion_4(&damped), &mut failed);
    let t = Instant::now();
    report(5, t, &criterion_5(), &mut failed);

    let t = Instant::now();
    let run = perturbed_run();
    report(6, t, &criterion_6(&run), &mut failed);
    let t = Instant::now();
    let curve_ok = damped.iter().all(|p| p.1.is_finite());
    report(7, t, &criterion_7(curve_ok), &mut failed);
    let t = Instant::now();
    report(8, t, &criterion_8(&run), &mut failed);

    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
