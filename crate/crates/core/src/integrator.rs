//! Fixed-step classical Runge-Kutta marching and trajectory recording.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scheme::{DampedSystem, SchemeConfig, SpectralState};
use crate::spectral::{eval_coeffs, PeriodicGrid};

/// Coefficient magnitude treated as blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

type Field = Vec<Complex64>;

/// Reusable stage buffers for [`rk4_step`].
#[derive(Debug, Clone, Default)]
pub struct Rk4Workspace {
    k: [(Field, Field); 4],
    tmp: (Field, Field),
}

impl Rk4Workspace {
    fn resize(&mut self, len: usize) {
        let zero = Complex64::new(0.0, 0.0);
        for (a, b) in self.k.iter_mut().chain(std::iter::once(&mut self.tmp)) {
            a.resize(len, zero);
            b.resize(len, zero);
        }
    }
}

/// One classical RK4 step of `(U, V)' = f(U, V)`.
///
/// `f(u, v, du, dv)` writes the derivative. Fails with [`Error::BlowUp`] if the
/// result is non-finite or any `|U(j)|` exceeds [`BLOW_UP_THRESHOLD`].
pub fn rk4_step<F>(
    state: &SpectralState,
    dt: f64,
    mut f: F,
    ws: &mut Rk4Workspace,
) -> Result<SpectralState>
where
    F: FnMut(&[Complex64], &[Complex64], &mut [Complex64], &mut [Complex64]),
{
    assert!(dt > 0.0, "time step must be positive");
    let n = state.u_hat.len();
    ws.resize(n);
    let Rk4Workspace { k, tmp } = ws;
    let (k1, rest) = k.split_at_mut(1);
    let (k2, rest) = rest.split_at_mut(1);
    let (k3, k4) = rest.split_at_mut(1);
    let (k1, k2, k3, k4) = (&mut k1[0], &mut k2[0], &mut k3[0], &mut k4[0]);

    let axpy = |out: &mut Field, x: &[Complex64], a: f64, y: &[Complex64]| {
        for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
            *o = xi + a * yi;
        }
    };

    f(&state.u_hat, &state.v_hat, &mut k1.0, &mut k1.1);
    axpy(&mut tmp.0, &state.u_hat, 0.5 * dt, &k1.0);
    axpy(&mut tmp.1, &state.v_hat, 0.5 * dt, &k1.1);
    f(&tmp.0, &tmp.1, &mut k2.0, &mut k2.1);
    axpy(&mut tmp.0, &state.u_hat, 0.5 * dt, &k2.0);
    axpy(&mut tmp.1, &state.v_hat, 0.5 * dt, &k2.1);
    f(&tmp.0, &tmp.1, &mut k3.0, &mut k3.1);
    axpy(&mut tmp.0, &state.u_hat, dt, &k3.0);
    axpy(&mut tmp.1, &state.v_hat, dt, &k3.1);
    f(&tmp.0, &tmp.1, &mut k4.0, &mut k4.1);

    let w = dt / 6.0;
    let combine =
        |y: &[Complex64], a: &[Complex64], b: &[Complex64], c: &[Complex64], d: &[Complex64]| {
            (0..n)
                .map(|s| y[s] + w * (a[s] + 2.0 * b[s] + 2.0 * c[s] + d[s]))
                .collect::<Vec<_>>()
        };
    let next = SpectralState {
        t: state.t + dt,
        u_hat: combine(&state.u_hat, &k1.0, &k2.0, &k3.0, &k4.0),
        v_hat: combine(&state.v_hat, &k1.1, &k2.1, &k3.1, &k4.1),
    };
    if !next.is_finite() || next.max_abs_u() > BLOW_UP_THRESHOLD {
        return Err(Error::BlowUp {
            time: next.t,
            last_finite: Box::new(state.clone()),
        });
    }
    Ok(next)
}

/// Recorded snapshots of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SchemeConfig,
    pub grid: PeriodicGrid,
    pub states: Vec<SpectralState>,
}

impl Trajectory {
    pub fn snapshot_times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Snapshot whose time is closest to `t`.
    pub fn at(&self, t: f64) -> Option<&SpectralState> {
        self.states
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Sorted, deduplicated snapshot list clipped to `[0, t_final]`, always ending at `t_final`.
pub fn normalize_snapshots(times: &[f64], t_final: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len() + 1);
    for &t in times {
        if !t.is_finite() || t < 0.0 || t > t_final {
            return Err(Error::config(
                "snapshot_times",
                format!("{t} lies outside [0, t_final = {t_final}]"),
            ));
        }
        out.push(t);
    }
    out.push(t_final);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_final.max(1.0));
    Ok(out)
}

/// March `initial` to each snapshot time, calling `observe` on every snapshot.
///
/// Steps sit on the global lattice `m * dt`; a step is shortened only when a
/// snapshot falls strictly between lattice points.
pub fn simulate_with<F>(
    config: &SchemeConfig,
    initial: &SpectralState,
    snapshot_times: &[f64],
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&SpectralState) -> Result<()>,
{
    let mut system = DampedSystem::from_config(config)?;
    if initial.u_hat.len() != system.grid().len() || initial.v_hat.len() != system.grid().len() {
        return Err(Error::config(
            "initial",
            "state size does not match the mode count",
        ));
    }
    let times = normalize_snapshots(snapshot_times, config.t_final)?;
    let dt = config.dt;
    let mut ws = Rk4Workspace::default();
    let mut state = initial.clone();
    let eps = 1e-9 * dt;
    for &target in &times {
        while target - state.t > eps {
            let lattice = ((state.t + eps) / dt).floor() + 1.0;
            let next = lattice * dt;
            let (h, land) = if next >= target - eps {
                (target - state.t, true)
            } else {
                (next - state.t, false)
            };
            state = rk4_step(&state, h, |u, v, du, dv| system.eval(u, v, du, dv), &mut ws)?;
            state.t = if land { target } else { next };
        }
        observe(&state)?;
    }
    Ok(())
}

/// Run the scheme and keep every snapshot.
pub fn simulate(
    config: &SchemeConfig,
    initial: &SpectralState,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let grid = config.grid()?;
    let mut states = Vec::new();
    simulate_with(config, initial, snapshot_times, |s| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        config: config.clone(),
        grid,
        states,
    })
}

/// Evaluate `U(x, t)` at arbitrary points.
pub fn reconstruct(state: &SpectralState, grid: PeriodicGrid, points: &[f64]) -> Vec<f64> {
    points
        .par_iter()
        .map(|&x| eval_coeffs(&state.u_hat, grid, x))
        .collect()
}

/// `n` equally spaced points `lo + m (hi - lo) / n`, `m = 0..n`.
pub fn uniform_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|m| lo + m as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{prepare_initial_state, Antiderivative};
    use crate::spectral::{forward_dft, PhysicalField};
    use approx::assert_relative_eq;

    #[test]
    fn zero_state_stays_zero() {
        let grid = PeriodicGrid::new(20.0, 6).unwrap();
        let s = SpectralState::zeros(grid);
        let mut ws = Rk4Workspace::default();
        let mut sys = DampedSystem::new(
            grid,
            &crate::scheme::DampingProfile::new(6, 10.0, 1).unwrap(),
            Default::default(),
        );
        let next = rk4_step(&s, 0.1, |u, v, du, dv| sys.eval(u, v, du, dv), &mut ws).unwrap();
        assert_eq!(next.t, 0.1);
        assert!(next.u_hat.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn linear_oscillator_matches_exponential_to_fifth_order() {
        let omega = 0.7;
        let mut errs = Vec::new();
        for dt in [0.2, 0.1] {
            let s = SpectralState {
                t: 0.0,
                u_hat: vec![Complex64::new(1.0, 0.0)],
                v_hat: vec![Complex64::new(0.0, 0.0)],
            };
            let mut ws = Rk4Workspace::default();
            let next = rk4_step(
                &s,
                dt,
                |u, _v, du, dv| {
                    du[0] = Complex64::new(0.0, omega) * u[0];
                    dv[0] = Complex64::new(0.0, 0.0);
                },
                &mut ws,
            )
            .unwrap();
            let exact = Complex64::from_polar(1.0, omega * dt);
            errs.push((next.u_hat[0] - exact).norm());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.7, "local order {order}");
    }

    #[test]
    fn blow_up_is_reported() {
        let s = SpectralState {
            t: 3.0,
            u_hat: vec![Complex64::new(1e11, 0.0)],
            v_hat: vec![Complex64::new(0.0, 0.0)],
        };
        let mut ws = Rk4Workspace::default();
        let err = rk4_step(
            &s,
            1.0,
            |u, _v, du, dv| {
                du[0] = 10.0 * u[0];
                dv[0] = Complex64::new(0.0, 0.0);
            },
            &mut ws,
        )
        .unwrap_err();
        match err {
            Error::BlowUp { time, last_finite } => {
                assert_eq!(time, 4.0);
                assert_eq!(last_finite.t, 3.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_final_time_returns_initial() {
        let cfg = SchemeConfig::new(20.0, 0.0).unwrap();
        let grid = cfg.grid().unwrap();
        let u0 = grid.sample(|x| (-x * x / 8.0).exp());
        let init =
            prepare_initial_state(&u0, &PhysicalField::zeros(grid), Antiderivative::Spectral)
                .unwrap();
        let traj = simulate(&cfg, &init, &[]).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0], init);
    }

    #[test]
    fn snapshots_land_exactly() {
        let cfg = SchemeConfig::new(20.0, 1.0).unwrap();
        let grid = cfg.grid().unwrap();
        let init = SpectralState {
            t: 0.0,
            u_hat: forward_dft(&grid.sample(|x| 0.01 * (-x * x / 8.0).exp())).coeffs,
            v_hat: vec![Complex64::new(0.0, 0.0); grid.len()],
        };
        let traj = simulate(&cfg, &init, &[0.25, 0.5, 0.33]).unwrap();
        assert_eq!(traj.snapshot_times(), vec![0.25, 0.33, 0.5, 1.0]);
        assert!(simulate(&cfg, &init, &[2.0]).is_err());
    }

    #[test]
    fn reconstruct_on_grid_matches_samples() {
        let grid = PeriodicGrid::new(10.0, 8).unwrap();
        let f = grid.sample(|x| (0.3 * x).sin().powi(2) * (-x * x / 20.0).exp());
        let mut hat = forward_dft(&f);
        hat.enforce_reality();
        let state = SpectralState {
            t: 0.0,
            u_hat: hat.coeffs,
            v_hat: vec![Complex64::new(0.0, 0.0); grid.len()],
        };
        let back = crate::spectral::inverse_dft(
            &SpectralField::from_coeffs(grid, state.u_hat.clone()).unwrap(),
        );
        let vals = reconstruct(&state, grid, &grid.points());
        for (a, b) in vals.iter().zip(&back.values) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    use crate::spectral::SpectralField;
}
