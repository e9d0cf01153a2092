//! Exact solitons, the initial-data catalog, error metrics, peak tracking and
//! water-wave unit conversions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{reconstruct, uniform_points, Trajectory};
use crate::scheme::{prepare_initial_state, state_from_potential, Antiderivative, SpectralState};
use crate::spectral::{eval_coeffs, PeriodicGrid, PhysicalField};

/// Default number of sample points for [`linf_error`].
pub const ERROR_SAMPLES: usize = 100_000;

/// Gravitational acceleration in m/s^2 used by [`PhysicalUnits`].
pub const GRAVITY: f64 = 9.8;

/// `c = sqrt(1 + 2A/3)`.
pub fn soliton_speed(amplitude: f64) -> f64 {
    (1.0 + 2.0 * amplitude / 3.0).sqrt()
}

fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    1.0 / (c * c)
}

/// Right-moving one-soliton `A sech^2(sqrt(A/6) (x - x0 - c t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonDescriptor {
    pub amplitude: f64,
    pub x0: f64,
    pub speed: f64,
}

impl SolitonDescriptor {
    pub fn new(amplitude: f64, x0: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::config(
                "amplitude",
                format!("must be positive, got {amplitude}"),
            ));
        }
        if !x0.is_finite() {
            return Err(Error::config("x0", "must be finite"));
        }
        Ok(Self {
            amplitude,
            x0,
            speed: soliton_speed(amplitude),
        })
    }

    /// Inverse width `sqrt(A/6)`.
    pub fn kappa(&self) -> f64 {
        (self.amplitude / 6.0).sqrt()
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.amplitude * sech2(self.kappa() * (x - self.x0 - self.speed * t))
    }

    /// `u_x(x, t)`.
    pub fn slope(&self, x: f64, t: f64) -> f64 {
        let z = self.kappa() * (x - self.x0 - self.speed * t);
        -2.0 * self.amplitude * self.kappa() * z.tanh() * sech2(z)
    }
}

/// One term `a exp(-c (x - b)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussianTerm {
    fn value(&self, x: f64) -> f64 {
        self.a * (-self.c * (x - self.b).powi(2)).exp()
    }

    fn slope(&self, x: f64) -> f64 {
        -2.0 * self.c * (x - self.b) * self.value(x)
    }
}

/// Initial data with closed-form `u0`, `u0_x`, `u_t(x,0)` and `v0 = int_{-inf}^x u_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialProfile {
    /// Exact soliton at `t = 0`, launched with `u_t = -c u_x`.
    Soliton {
        amplitude: f64,
        x0: f64,
    },
    /// Sum of Gaussians at rest.
    Gaussian {
        terms: Vec<GaussianTerm>,
    },
    /// `-3a e^{-c(x-b)^2} - 2a e^{-c x^2} - a e^{-c(x+b)^2}` at rest.
    ThreeGaussians {
        a: f64,
        b: f64,
        c: f64,
    },
    /// `A sech^2(sqrt(A/6) x) - (A/3) e^{-A x^2}` with `u_t = -c u_x`.
    PerturbedSoliton {
        amplitude: f64,
    },
    Zero,
}

impl InitialProfile {
    /// `-0.05 e^{-0.02 x^2}`.
    pub fn reference_gaussian() -> Self {
        InitialProfile::Gaussian {
            terms: vec![GaussianTerm {
                a: -0.05,
                b: 0.0,
                c: 0.02,
            }],
        }
    }

    /// Three humps with `a = 0.01`, `b = 20`, `c = 0.02`.
    pub fn reference_three_gaussians() -> Self {
        InitialProfile::ThreeGaussians {
            a: 0.01,
            b: 20.0,
            c: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, "must be finite"))
            }
        };
        match self {
            InitialProfile::Soliton { amplitude, x0 } => {
                SolitonDescriptor::new(*amplitude, *x0).map(|_| ())
            }
            InitialProfile::PerturbedSoliton { amplitude } => {
                SolitonDescriptor::new(*amplitude, 0.0).map(|_| ())
            }
            InitialProfile::Gaussian { terms } => terms.iter().try_for_each(|g| {
                finite("a", g.a)?;
                finite("b", g.b)?;
                finite("c", g.c)?;
                if g.c > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("c", "Gaussian rate must be positive"))
                }
            }),
            InitialProfile::ThreeGaussians { a, b, c } => {
                finite("a", *a)?;
                finite("b", *b)?;
                if c.is_finite() && *c > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("c", "Gaussian rate must be positive"))
                }
            }
            InitialProfile::Zero => Ok(()),
        }
    }

    fn gaussian_terms(&self) -> Vec<GaussianTerm> {
        match self {
            InitialProfile::Gaussian { terms } => terms.clone(),
            InitialProfile::ThreeGaussians { a, b, c } => vec![
                GaussianTerm {
                    a: -3.0 * a,
                    b: *b,
                    c: *c,
                },
                GaussianTerm {
                    a: -2.0 * a,
                    b: 0.0,
                    c: *c,
                },
                GaussianTerm {
                    a: -a,
                    b: -b,
                    c: *c,
                },
            ],
            InitialProfile::PerturbedSoliton { amplitude } => vec![GaussianTerm {
                a: -amplitude / 3.0,
                b: 0.0,
                c: *amplitude,
            }],
            _ => Vec::new(),
        }
    }

    fn soliton_part(&self) -> Option<SolitonDescriptor> {
        match *self {
            InitialProfile::Soliton { amplitude, x0 } => SolitonDescriptor::new(amplitude, x0).ok(),
            InitialProfile::PerturbedSoliton { amplitude } => {
                SolitonDescriptor::new(amplitude, 0.0).ok()
            }
            _ => None,
        }
    }

    /// The exact solution, when the data is a pure soliton.
    pub fn exact_soliton(&self) -> Option<SolitonDescriptor> {
        match self {
            InitialProfile::Soliton { .. } => self.soliton_part(),
            _ => None,
        }
    }

    /// Speed `c` in `u_t = -c u_x`, zero for data at rest.
    pub fn launch_speed(&self) -> f64 {
        self.soliton_part().map_or(0.0, |s| s.speed)
    }

    pub fn u0(&self, x: f64) -> f64 {
        let s = self.soliton_part().map_or(0.0, |s| s.value(x, 0.0));
        s + self
            .gaussian_terms()
            .iter()
            .map(|g| g.value(x))
            .sum::<f64>()
    }

    pub fn u0_x(&self, x: f64) -> f64 {
        let s = self.soliton_part().map_or(0.0, |s| s.slope(x, 0.0));
        s + self
            .gaussian_terms()
            .iter()
            .map(|g| g.slope(x))
            .sum::<f64>()
    }

    pub fn u1(&self, x: f64) -> f64 {
        -self.launch_speed() * self.u0_x(x)
    }

    /// `v0(x) = int_{-inf}^x u1`.
    pub fn v0(&self, x: f64) -> f64 {
        let c = self.launch_speed();
        if c == 0.0 {
            0.0
        } else {
            -c * self.u0(x)
        }
    }

    /// Samples of `(u0, u1)` on the grid.
    pub fn sample(&self, grid: PeriodicGrid) -> (PhysicalField, PhysicalField) {
        (grid.sample(|x| self.u0(x)), grid.sample(|x| self.u1(x)))
    }

    pub fn initial_state(
        &self,
        grid: PeriodicGrid,
        method: Antiderivative,
    ) -> Result<SpectralState> {
        self.validate()?;
        if method == Antiderivative::Exact {
            return state_from_potential(
                &grid.sample(|x| self.u0(x)),
                &grid.sample(|x| self.v0(x)),
            );
        }
        let (u0, u1) = self.sample(grid);
        prepare_initial_state(&u0, &u1, method)
    }
}

/// `max |U(x, t) - reference(x)|` over `n` points `lo + m (hi - lo)/n`.
pub fn linf_error<F>(
    state: &SpectralState,
    grid: PeriodicGrid,
    reference: F,
    interval: (f64, f64),
    n: usize,
) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    uniform_points(interval.0, interval.1, n)
        .par_iter()
        .map(|&x| (eval_coeffs(&state.u_hat, grid, x) - reference(x)).abs())
        .reduce(|| 0.0, f64::max)
}

/// `max_i |a_i - b_i|`.
pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "sample sets differ in length");
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Region searched for the hump at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PeakWindow {
    Fixed {
        lo: f64,
        hi: f64,
    },
    /// `[zeta_lo t, zeta_hi t]`.
    Similarity {
        zeta_lo: f64,
        zeta_hi: f64,
    },
}

impl PeakWindow {
    pub fn bounds(&self, t: f64, grid: PeriodicGrid) -> (f64, f64) {
        let (lo, hi) = match *self {
            PeakWindow::Fixed { lo, hi } => (lo, hi),
            PeakWindow::Similarity { zeta_lo, zeta_hi } => (zeta_lo * t, zeta_hi * t),
        };
        let l = grid.half_period();
        (lo.max(-l), hi.min(l))
    }
}

/// Tracked hump: per-snapshot amplitude and position, and the fitted speed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakTrack {
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub positions: Vec<f64>,
    pub speed: f64,
    pub warnings: Vec<String>,
}

impl PeakTrack {
    pub fn mean_amplitude(&self) -> f64 {
        self.amplitudes.iter().sum::<f64>() / self.amplitudes.len().max(1) as f64
    }
}

/// Vertex of the parabola through `(-1, a), (0, b), (1, c)`.
fn parabola_vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return (0.0, b);
    }
    let s = 0.5 * (a - c) / denom;
    (s, b - 0.25 * (a - c) * s)
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Locate the dominant hump of one snapshot inside `[lo, hi]`.
///
/// Returns `(position, amplitude, secondary_ratio)` where the last entry is
/// the height of the next distinct local maximum relative to the main one.
pub fn locate_peak(
    state: &SpectralState,
    grid: PeriodicGrid,
    lo: f64,
    hi: f64,
    resolution: f64,
) -> Option<(f64, f64, f64)> {
    if !(hi > lo) {
        return None;
    }
    let n = ((hi - lo) / resolution).ceil().max(3.0) as usize;
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|m| lo + m as f64 * h).collect();
    let ys = reconstruct(state, grid, &xs);
    let (imax, &ymax) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let (pos, amp) = if imax == 0 || imax == n {
        (xs[imax], ymax)
    } else {
        let (s, v) = parabola_vertex(ys[imax - 1], ys[imax], ys[imax + 1]);
        (xs[imax] + s * h, v)
    };
    let mut secondary: f64 = 0.0;
    for i in 1..n {
        let is_max = ys[i] > ys[i - 1] && ys[i] >= ys[i + 1];
        if is_max && i != imax && ys[i] > 0.0 && (xs[i] - pos).abs() > 4.0 * h {
            secondary = secondary.max(ys[i] / amp);
        }
    }
    Some((pos, amp, secondary))
}

/// Follow the largest hump in `window` across every snapshot with `t` in `fit_range`.
///
/// Sampling step is `resolution`; a secondary local maximum above `multimodal`
/// times the main peak, or an empty window, adds a warning.
pub fn track_peak(
    trajectory: &Trajectory,
    window: PeakWindow,
    fit_range: (f64, f64),
    resolution: f64,
    multimodal: f64,
) -> PeakTrack {
    let mut track = PeakTrack {
        times: Vec::new(),
        amplitudes: Vec::new(),
        positions: Vec::new(),
        speed: 0.0,
        warnings: Vec::new(),
    };
    for state in &trajectory.states {
        if state.t < fit_range.0 || state.t > fit_range.1 {
            continue;
        }
        let (lo, hi) = window.bounds(state.t, trajectory.grid);
        match locate_peak(state, trajectory.grid, lo, hi, resolution) {
            None => track
                .warnings
                .push(format!("t = {}: empty window [{lo}, {hi}]", state.t)),
            Some((pos, amp, secondary)) => {
                if secondary > multimodal {
                    track.warnings.push(format!(
                        "t = {}: secondary maximum at {:.1}% of the peak",
                        state.t,
                        100.0 * secondary
                    ));
                }
                track.times.push(state.t);
                track.positions.push(pos);
                track.amplitudes.push(amp);
            }
        }
    }
    track.speed = fitted_slope(&track.times, &track.positions);
    track
}

/// Amplitude and shallowness parameters of a wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeParameters {
    pub epsilon: f64,
    pub delta: f64,
    /// Set when either parameter reaches 0.1.
    pub outside_regime: bool,
}

/// `epsilon = 2A/3`, `delta = sqrt(3)/wavelength`.
pub fn regime_check(amplitude: f64, wavelength: f64) -> Result<RegimeParameters> {
    if !(amplitude > 0.0 && wavelength > 0.0) {
        return Err(Error::Domain(format!(
            "amplitude and wavelength must be positive, got {amplitude}, {wavelength}"
        )));
    }
    let epsilon = 2.0 * amplitude / 3.0;
    let delta = 3f64.sqrt() / wavelength;
    let limit = 0.1 * (1.0 - 1e-12);
    Ok(RegimeParameters {
        epsilon,
        delta,
        outside_regime: epsilon >= limit || delta >= limit,
    })
}

/// Dimensional conversion for mean depth `h` metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalUnits {
    pub depth: f64,
    /// `eta = (2h/3) u`.
    pub elevation_scale: f64,
    /// `xi = x h / sqrt(3)`.
    pub length_scale: f64,
    /// `tau = t sqrt(h / (3g))`.
    pub time_scale: f64,
}

impl PhysicalUnits {
    pub fn new(depth: f64) -> Result<Self> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(Error::Domain(format!(
                "depth must be positive, got {depth}"
            )));
        }
        Ok(Self {
            depth,
            elevation_scale: 2.0 * depth / 3.0,
            length_scale: depth / 3f64.sqrt(),
            time_scale: (depth / (3.0 * GRAVITY)).sqrt(),
        })
    }

    pub fn elevation(&self, u: f64) -> f64 {
        self.elevation_scale * u
    }

    pub fn distance(&self, x: f64) -> f64 {
        self.length_scale * x
    }

    pub fn seconds(&self, t: f64) -> f64 {
        self.time_scale * t
    }
}
