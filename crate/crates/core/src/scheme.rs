//! Cutoff selection, the damping ramp, initial-state preparation and the
//! damped Fourier-space right-hand side.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    cumulative_integral, enforce_reality, forward_dft, spectral_antiderivative,
    truncated_convolution, DealiasedProduct, PeriodicGrid, PhysicalField, ProductMethod,
    SpectralField,
};

/// Largest `dt * d0` accepted for the explicit RK4 march.
pub const STABILITY_LIMIT: f64 = 2.7;

/// Relative tolerance on the zero-mean condition for `u1`.
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-8;

/// `floor(L / pi)`: the largest mode count whose modes all satisfy `(pi j / L)^2 <= 1`.
pub fn default_mode_count(half_period: f64) -> Result<usize> {
    if !(half_period.is_finite() && half_period > PI) {
        return Err(Error::config(
            "L",
            format!("must exceed pi for at least one stable mode, got {half_period}"),
        ));
    }
    Ok((half_period / PI).floor() as usize)
}

/// C^1 step: 0 below 0, `x^4 (x-2)^4` on `[0, 1]`, 1 above 1.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = x * (x - 2.0);
        a * a * a * a
    }
}

/// Per-mode damping rates `d(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingProfile {
    pub d0: f64,
    pub ramp_width: usize,
    pub values: Vec<f64>,
}

impl DampingProfile {
    /// Ramps of width `ramp_width` up to `d0` at both ends of the mode window.
    pub fn new(modes: usize, d0: f64, ramp_width: usize) -> Result<Self> {
        if ramp_width == 0 || ramp_width >= modes {
            return Err(Error::config(
                "Nd",
                format!("ramp width must satisfy 0 < Nd < N = {modes}, got {ramp_width}"),
            ));
        }
        if !(d0.is_finite() && d0 >= 0.0) {
            return Err(Error::config(
                "d0",
                format!("must be nonnegative, got {d0}"),
            ));
        }
        let n = modes as i64;
        let nd = ramp_width as i64;
        let width = ramp_width as f64;
        let values = (-n..n)
            .map(|j| {
                if j <= -n + nd {
                    d0 * (1.0 - smooth_step((j + n) as f64 / width))
                } else if j >= n - 1 - nd {
                    d0 * smooth_step((j - n + nd + 1) as f64 / width)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            d0,
            ramp_width,
            values,
        })
    }

    /// All rates zero.
    pub fn disabled(modes: usize) -> Self {
        Self {
            d0: 0.0,
            ramp_width: 0,
            values: vec![0.0; 2 * modes],
        }
    }

    pub fn modes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn at(&self, j: i64) -> f64 {
        self.values[(j + self.modes() as i64) as usize]
    }
}

/// How `v(x, 0)` is built from `u_t(x, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Antiderivative {
    /// Divide each nonzero mode by `i pi j / L`.
    Spectral,
    /// Running trapezoid integral on the grid.
    Trapezoid,
    /// Sample a closed-form `v0`; only catalog profiles have one.
    #[default]
    Exact,
}

/// Everything that defines a damped spectral run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub half_period: f64,
    pub modes: usize,
    pub d0: f64,
    pub ramp_width: usize,
    pub damping: bool,
    pub dt: f64,
    pub t_final: f64,
    pub product: ProductMethod,
    pub antiderivative: Antiderivative,
}

impl SchemeConfig {
    /// Defaults: `N = floor(L/pi)`, `d0 = 10`, `Nd = floor(N/8)`, `dt = 0.1`, damping on.
    pub fn new(half_period: f64, t_final: f64) -> Result<Self> {
        let modes = default_mode_count(half_period)?;
        Ok(Self {
            half_period,
            modes,
            d0: 10.0,
            ramp_width: (modes / 8).max(1),
            damping: true,
            dt: 0.1,
            t_final,
            product: ProductMethod::default(),
            antiderivative: Antiderivative::default(),
        })
    }

    pub fn with_damping(mut self, on: bool) -> Self {
        self.damping = on;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Override `N`; the ramp width is reset to its default for the new `N`.
    pub fn with_modes(mut self, modes: usize) -> Self {
        self.modes = modes;
        self.ramp_width = (modes / 8).max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        PeriodicGrid::new(self.half_period, self.modes)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(
                "dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::config(
                "t_final",
                format!("must be nonnegative, got {}", self.t_final),
            ));
        }
        if self.damping {
            DampingProfile::new(self.modes, self.d0, self.ramp_width)?;
            if self.dt * self.d0 >= STABILITY_LIMIT {
                return Err(Error::config(
                    "dt",
                    format!(
                        "dt * d0 = {} must stay below {STABILITY_LIMIT} for RK4 stability",
                        self.dt * self.d0
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.half_period, self.modes)
    }

    pub fn profile(&self) -> Result<DampingProfile> {
        if self.damping {
            DampingProfile::new(self.modes, self.d0, self.ramp_width)
        } else {
            Ok(DampingProfile::disabled(self.modes))
        }
    }
}

/// Time plus the Fourier coefficients of `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
}

impl SpectralState {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            t: 0.0,
            u_hat: vec![Complex64::new(0.0, 0.0); grid.len()],
            v_hat: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn modes(&self) -> usize {
        self.u_hat.len() / 2
    }

    /// The mean mode `U^(0, t)`.
    pub fn mass_mode(&self) -> Complex64 {
        self.u_hat[self.modes()]
    }

    pub fn u_field(&self, grid: PeriodicGrid) -> SpectralField {
        SpectralField {
            grid,
            coeffs: self.u_hat.clone(),
        }
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u_hat.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.u_hat
            .iter()
            .chain(&self.v_hat)
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Transform `u(x,0)` and `v(x,0) = int_{-L}^x u_t` into the initial state.
///
/// Rejects `u1` whose periodic integral exceeds `1e-8 L max|u1|`.
pub fn prepare_initial_state(
    u0: &PhysicalField,
    u1: &PhysicalField,
    method: Antiderivative,
) -> Result<SpectralState> {
    if u0.grid != u1.grid {
        return Err(Error::config(
            "initial data",
            "u0 and u1 live on different grids",
        ));
    }
    let grid = u0.grid;
    let integral = u1.integral();
    let tolerance = ZERO_MEAN_TOLERANCE * grid.half_period() * u1.max_abs();
    if integral.abs() > tolerance {
        return Err(Error::NonZeroMean {
            integral,
            tolerance,
        });
    }
    let mut u_hat = forward_dft(u0);
    u_hat.enforce_reality();
    let mut v_hat = match method {
        Antiderivative::Spectral => {
            let mut u1_hat = forward_dft(u1);
            u1_hat.set(0, Complex64::new(0.0, 0.0));
            spectral_antiderivative(&u1_hat)
        }
        Antiderivative::Trapezoid => forward_dft(&cumulative_integral(u1)),
        Antiderivative::Exact => {
            return Err(Error::config(
                "antiderivative",
                "exact needs a closed-form v0; use spectral or trapezoid for sampled data",
            ))
        }
    };
    v_hat.enforce_reality();
    Ok(SpectralState {
        t: 0.0,
        u_hat: u_hat.coeffs,
        v_hat: v_hat.coeffs,
    })
}

/// Transform samples of `u(x,0)` and `v(x,0)` directly.
pub fn state_from_potential(u0: &PhysicalField, v0: &PhysicalField) -> Result<SpectralState> {
    if u0.grid != v0.grid {
        return Err(Error::config(
            "initial data",
            "u0 and v0 live on different grids",
        ));
    }
    let mut u_hat = forward_dft(u0);
    u_hat.enforce_reality();
    let mut v_hat = forward_dft(v0);
    v_hat.enforce_reality();
    Ok(SpectralState {
        t: 0.0,
        u_hat: u_hat.coeffs,
        v_hat: v_hat.coeffs,
    })
}

/// The damped 4N-dimensional ODE system with its scratch buffers.
#[derive(Debug)]
pub struct DampedSystem {
    grid: PeriodicGrid,
    ik: Vec<Complex64>,
    damping: Vec<f64>,
    method: ProductMethod,
    kernel: DealiasedProduct,
    ux: Vec<Complex64>,
    prod: Vec<Complex64>,
}

impl DampedSystem {
    pub fn new(grid: PeriodicGrid, profile: &DampingProfile, method: ProductMethod) -> Self {
        assert_eq!(
            profile.values.len(),
            grid.len(),
            "profile does not match grid"
        );
        let ik = (0..grid.len())
            .map(|s| Complex64::new(0.0, grid.wavenumber(grid.mode(s))))
            .collect();
        Self {
            grid,
            ik,
            damping: profile.values.clone(),
            method,
            kernel: DealiasedProduct::new(grid),
            ux: vec![Complex64::new(0.0, 0.0); grid.len()],
            prod: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_config(config: &SchemeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::new(
            config.grid()?,
            &config.profile()?,
            config.product,
        ))
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Write `(U^_t, V^_t)` for the coefficients `(u, v)`.
    pub fn eval(
        &mut self,
        u: &[Complex64],
        v: &[Complex64],
        du: &mut [Complex64],
        dv: &mut [Complex64],
    ) {
        for ((x, &k), &c) in self.ux.iter_mut().zip(&self.ik).zip(u) {
            *x = k * c;
        }
        match self.method {
            ProductMethod::Dealiased => self.kernel.apply(&self.ux, u, &mut self.prod),
            ProductMethod::Direct => {
                let a = SpectralField {
                    grid: self.grid,
                    coeffs: self.ux.clone(),
                };
                let b = SpectralField {
                    grid: self.grid,
                    coeffs: u.to_vec(),
                };
                self.prod
                    .copy_from_slice(&truncated_convolution(&a, &b).coeffs);
            }
        }
        enforce_reality(&mut self.prod, self.grid.modes());
        for s in 0..u.len() {
            let k = self.ik[s];
            du[s] = k * v[s] - self.damping[s] * u[s];
            dv[s] = k * u[s] + 2.0 * self.prod[s] + k * k * k * u[s];
        }
        // d(j) != d(-j) on the ramps; a real field sees the pair average.
        enforce_reality(du, self.grid.modes());
        enforce_reality(dv, self.grid.modes());
    }
}

/// Time derivative of a state, as a standalone call.
pub fn rhs(state: &SpectralState, profile: &DampingProfile, grid: PeriodicGrid) -> SpectralState {
    let mut system = DampedSystem::new(grid, profile, ProductMethod::Direct);
    let mut out = SpectralState::zeros(grid);
    system.eval(&state.u_hat, &state.v_hat, &mut out.u_hat, &mut out.v_hat);
    out.t = 1.0;
    out
}
