//! Direct scattering for the Lax pair of the bad Boussinesq equation:
//! the eigenfunctions `X`, `Y`, `X^A`, the spectral matrix `s(k)`,
//! the reflection coefficient `r1 = s12/s11`, zeros of `s11` and the
//! norming constant at a zero.
//!
//! The matrix ODE `X' = [L, X] + U X` decouples by columns: column `j`
//! obeys `y' = (L - l_j) y + U y`. Each column is marched on its own, so a
//! column whose exponentials decay in the marching direction can be
//! computed even when its neighbours overflow.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheme::SpectralState;
use crate::spectral::{
    eval_coeffs, spectral_antiderivative, spectral_derivative, PeriodicGrid, SpectralField,
};
use crate::waves::InitialProfile;

type C = Complex64;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `omega = exp(2 pi i / 3)`.
pub fn omega() -> C {
    C::from_polar(1.0, 2.0 * PI / 3.0)
}

/// `l_j(k)` and `z_j(k)` for `j = 1, 2, 3` (stored at index `j - 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxExponents {
    pub k: C,
    pub l: [C; 3],
    pub z: [C; 3],
}

impl LaxExponents {
    /// `theta_21 = (l2 - l1) x + (z2 - z1) t`.
    pub fn theta21(&self, x: f64, t: f64) -> C {
        (self.l[1] - self.l[0]) * x + (self.z[1] - self.z[0]) * t
    }

    /// Smallest pairwise distance between the `l_j`.
    pub fn separation(&self) -> f64 {
        let l = &self.l;
        (l[0] - l[1])
            .norm()
            .min((l[1] - l[2]).norm())
            .min((l[0] - l[2]).norm())
    }
}

pub fn lax_exponents(k: C) -> Result<LaxExponents> {
    if k.norm() == 0.0 || !k.is_finite() {
        return Err(Error::Domain(format!(
            "Lax exponents need finite k != 0, got {k}"
        )));
    }
    let i = C::new(0.0, 1.0);
    let mut l = [C::new(0.0, 0.0); 3];
    let mut z = [C::new(0.0, 0.0); 3];
    let mut w = C::new(1.0, 0.0);
    for j in 0..3 {
        w *= omega();
        let q = w * k;
        l[j] = i * (q + q.inv()) / (2.0 * SQRT3);
        z[j] = i * (q * q + (q * q).inv()) / (4.0 * SQRT3);
    }
    Ok(LaxExponents { k, l, z })
}

/// `(u0, u0_x, v0)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PotentialSample {
    pub u0: f64,
    pub u0_x: f64,
    pub v0: f64,
}

impl PotentialSample {
    fn magnitude(&self) -> f64 {
        self.u0.abs().max(self.u0_x.abs()).max(self.v0.abs())
    }

    /// `(a, b)` with `M` bottom row `(a, b, 0)`.
    fn bottom_row(&self) -> (C, C) {
        (
            C::new(-self.u0_x / 4.0, -self.v0 / (4.0 * SQRT3)),
            C::new(-self.u0 / 2.0, 0.0),
        )
    }
}

type Profile = Arc<dyn Fn(f64) -> PotentialSample + Send + Sync>;

/// Initial data as seen by the scattering solver, cut off outside `[-R, R]`.
#[derive(Clone)]
pub struct PotentialSampler {
    profile: Profile,
    radius: f64,
}

impl std::fmt::Debug for PotentialSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialSampler")
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

/// Tail level below which the potential counts as zero.
pub const TAIL_TOLERANCE: f64 = 1e-14;

/// Largest automatic truncation radius.
pub const MAX_RADIUS: f64 = 400.0;

/// Smallest integer `R` such that `max(|u0|, |u0_x|, |v0|) < tol` on `[R, cap]` and `[-cap, -R]`.
pub fn truncation_radius(f: &dyn Fn(f64) -> PotentialSample, tol: f64, cap: f64) -> f64 {
    let step = 0.25;
    let n = (cap / step).ceil() as usize;
    let mut outer: f64 = 0.0;
    for m in (0..=n).rev() {
        let x = m as f64 * step;
        if f(x).magnitude() >= tol || f(-x).magnitude() >= tol {
            outer = x;
            break;
        }
    }
    (outer + 1.0).ceil().clamp(1.0, cap)
}

impl PotentialSampler {
    pub fn new(
        f: impl Fn(f64) -> PotentialSample + Send + Sync + 'static,
        radius: f64,
    ) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::config(
                "radius",
                format!("must be positive, got {radius}"),
            ));
        }
        Ok(Self {
            profile: Arc::new(f),
            radius,
        })
    }

    /// Choose the radius automatically.
    pub fn auto(f: impl Fn(f64) -> PotentialSample + Send + Sync + 'static) -> Self {
        let radius = truncation_radius(&f, TAIL_TOLERANCE, MAX_RADIUS);
        Self {
            profile: Arc::new(f),
            radius,
        }
    }

    pub fn zero() -> Self {
        Self {
            profile: Arc::new(|_| PotentialSample::default()),
            radius: 1.0,
        }
    }

    /// Closed-form data from the catalog.
    pub fn from_profile(profile: &InitialProfile) -> Self {
        let p = profile.clone();
        Self::auto(move |x| PotentialSample {
            u0: p.u0(x),
            u0_x: p.u0_x(x),
            v0: p.v0(x),
        })
    }

    /// Trigonometric interpolants of a spectral state, zero outside `[-L, L)`.
    pub fn from_state(state: &SpectralState, grid: PeriodicGrid) -> Result<Self> {
        let u = SpectralField::from_coeffs(grid, state.u_hat.clone())?;
        let ux = spectral_derivative(&u, 1);
        let v = SpectralField::from_coeffs(grid, state.v_hat.clone())?;
        let l = grid.half_period();
        let f = move |x: f64| {
            if x < -l || x >= l {
                PotentialSample::default()
            } else {
                PotentialSample {
                    u0: eval_coeffs(&u.coeffs, grid, x),
                    u0_x: eval_coeffs(&ux.coeffs, grid, x),
                    v0: eval_coeffs(&v.coeffs, grid, x),
                }
            }
        };
        let radius = truncation_radius(&f, TAIL_TOLERANCE, l.min(MAX_RADIUS));
        Self::new(f, radius)
    }

    /// Build `v0` from `u1` by spectral integration, then as [`Self::from_state`].
    pub fn from_u1_coefficients(u_hat: SpectralField, u1_hat: &SpectralField) -> Result<Self> {
        let mut u1 = u1_hat.clone();
        u1.set(0, C::new(0.0, 0.0));
        let v = spectral_antiderivative(&u1);
        let grid = u_hat.grid;
        Self::from_state(
            &SpectralState {
                t: 0.0,
                u_hat: u_hat.coeffs,
                v_hat: v.coeffs,
            },
            grid,
        )
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::config(
                "radius",
                format!("must be positive, got {radius}"),
            ));
        }
        self.radius = radius;
        Ok(self)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sample(&self, x: f64) -> PotentialSample {
        if x.abs() > self.radius {
            PotentialSample::default()
        } else {
            (self.profile)(x)
        }
    }
}

fn check_separation(ex: &LaxExponents) -> Result<()> {
    let scale = ex.l.iter().map(|l| l.norm()).fold(1.0, f64::max);
    if ex.separation() < 1e-10 * scale {
        return Err(Error::Domain(format!(
            "P(k) is singular at k = {}: the l_j coincide",
            ex.k
        )));
    }
    Ok(())
}

/// `P(k)` with columns `(1, l_j, l_j^2)`.
pub fn vandermonde(ex: &LaxExponents) -> Matrix3<C> {
    let one = C::new(1.0, 0.0);
    let l = ex.l;
    Matrix3::new(
        one,
        one,
        one,
        l[0],
        l[1],
        l[2],
        l[0] * l[0],
        l[1] * l[1],
        l[2] * l[2],
    )
}

/// `U(x, k) = P^{-1} M(x) P`.
pub fn potential_matrix(x: f64, k: C, p: &PotentialSampler) -> Result<Matrix3<C>> {
    let ex = lax_exponents(k)?;
    check_separation(&ex)?;
    let pm = vandermonde(&ex);
    let inv = pm
        .try_inverse()
        .ok_or_else(|| Error::Domain(format!("P(k) is singular at k = {k}")))?;
    let (a, b) = p.sample(x).bottom_row();
    let zero = C::new(0.0, 0.0);
    let m = Matrix3::new(zero, zero, zero, zero, zero, zero, a, b, zero);
    Ok(inv * m * pm)
}

/// Rank-one form `U_ij = q_i (a + b l_j)` with `q = P^{-1} e_3`.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    l: [C; 3],
    q: [C; 3],
}

impl Kernel {
    fn new(ex: &LaxExponents) -> Result<Self> {
        check_separation(ex)?;
        let l = ex.l;
        let q = [
            ((l[0] - l[1]) * (l[0] - l[2])).inv(),
            ((l[1] - l[0]) * (l[1] - l[2])).inv(),
            ((l[2] - l[0]) * (l[2] - l[1])).inv(),
        ];
        Ok(Self { l, q })
    }

    /// `U y`.
    fn apply(&self, s: &PotentialSample, y: &Vector3<C>) -> Vector3<C> {
        let (a, b) = s.bottom_row();
        let w =
            a * (y[0] + y[1] + y[2]) + b * (self.l[0] * y[0] + self.l[1] * y[1] + self.l[2] * y[2]);
        Vector3::new(self.q[0] * w, self.q[1] * w, self.q[2] * w)
    }

    /// `U^T y`.
    fn apply_transpose(&self, s: &PotentialSample, y: &Vector3<C>) -> Vector3<C> {
        let (a, b) = s.bottom_row();
        let w = self.q[0] * y[0] + self.q[1] * y[1] + self.q[2] * y[2];
        Vector3::new(
            (a + b * self.l[0]) * w,
            (a + b * self.l[1]) * w,
            (a + b * self.l[2]) * w,
        )
    }
}

/// Which eigenfunction a column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Eigenfunction {
    /// Normalized at `+inf`: `X' = [L, X] + U X`.
    X,
    /// Normalized at `-inf`: `Y' = [L, Y] + U Y`.
    Y,
    /// Normalized at `+inf`: `X^A' = -[L, X^A] - U^T X^A`.
    Adjoint,
}

/// Potential samples at every half step of `[-R, R]`.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    radius: f64,
    step: f64,
    samples: Vec<PotentialSample>,
}

impl PotentialTable {
    /// `R` is rounded up to a multiple of `step`.
    pub fn new(p: &PotentialSampler, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::config(
                "step",
                format!("must be positive, got {step}"),
            ));
        }
        let intervals = (2.0 * p.radius() / step).ceil() as usize;
        let intervals = intervals + intervals % 2;
        let radius = 0.5 * intervals as f64 * step;
        let samples = (0..=2 * intervals)
            .into_par_iter()
            .map(|m| p.sample(-radius + 0.5 * step * m as f64))
            .collect();
        Ok(Self {
            radius,
            step,
            samples,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of RK4 steps across `[-R, R]` (always even).
    pub fn intervals(&self) -> usize {
        (self.samples.len() - 1) / 2
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.radius + self.step * i as f64
    }

    fn at_half(&self, m: usize) -> &PotentialSample {
        &self.samples[m]
    }

    /// Index of the node at `x`, if `x` is one.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let r = (x + self.radius) / self.step;
        let i = r.round();
        if (r - i).abs() < 1e-6 && i >= 0.0 && i as usize <= self.intervals() {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// One eigenfunction column on the nodes `-R + i h`.
#[derive(Debug, Clone)]
pub struct ColumnSolution {
    pub kind: Eigenfunction,
    pub column: usize,
    pub exponents: LaxExponents,
    pub radius: f64,
    pub step: f64,
    /// Values in increasing-`x` order.
    pub values: Vec<Vector3<C>>,
    /// `max_x |y(x)|_inf`.
    pub growth: f64,
}

impl ColumnSolution {
    pub fn node(&self, i: usize) -> f64 {
        -self.radius + self.step * i as f64
    }

    pub fn at(&self, x: f64) -> Option<Vector3<C>> {
        let r = (x + self.radius) / self.step;
        let i = r.round();
        if (r - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < self.values.len() {
            Some(self.values[i as usize])
        } else {
            None
        }
    }
}

/// Default growth beyond which a column is declared ill-conditioned.
pub const GROWTH_LIMIT: f64 = 1e8;

/// March one column of `kind` across the table.
pub fn solve_column(
    kind: Eigenfunction,
    column: usize,
    k: C,
    table: &PotentialTable,
    growth_limit: f64,
) -> Result<ColumnSolution> {
    assert!(column < 3, "column index is 0-based and below 3");
    let ex = lax_exponents(k)?;
    let kernel = Kernel::new(&ex)?;
    let lj = ex.l[column];
    let shift = [ex.l[0] - lj, ex.l[1] - lj, ex.l[2] - lj];
    let f = |s: &PotentialSample, y: &Vector3<C>| -> Vector3<C> {
        match kind {
            Eigenfunction::X | Eigenfunction::Y => {
                let u = kernel.apply(s, y);
                Vector3::new(
                    shift[0] * y[0] + u[0],
                    shift[1] * y[1] + u[1],
                    shift[2] * y[2] + u[2],
                )
            }
            Eigenfunction::Adjoint => {
                let u = kernel.apply_transpose(s, y);
                Vector3::new(
                    -shift[0] * y[0] - u[0],
                    -shift[1] * y[1] - u[1],
                    -shift[2] * y[2] - u[2],
                )
            }
        }
    };
    let n = table.intervals();
    let mut values = vec![Vector3::zeros(); n + 1];
    let mut y = Vector3::zeros();
    y[column] = C::new(1.0, 0.0);
    let mut growth: f64 = 1.0;
    let backward = kind != Eigenfunction::Y;
    let h = if backward { -table.step } else { table.step };
    let start = if backward { n } else { 0 };
    values[start] = y;
    for s in 0..n {
        let i = if backward { n - s } else { s };
        let (m0, m1, m2) = if backward {
            (2 * i, 2 * i - 1, 2 * i - 2)
        } else {
            (2 * i, 2 * i + 1, 2 * i + 2)
        };
        let (p0, p1, p2) = (table.at_half(m0), table.at_half(m1), table.at_half(m2));
        let k1 = f(p0, &y);
        let k2 = f(p1, &(y + k1 * C::new(0.5 * h, 0.0)));
        let k3 = f(p1, &(y + k2 * C::new(0.5 * h, 0.0)));
        let k4 = f(p2, &(y + k3 * C::new(h, 0.0)));
        y += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(h / 6.0, 0.0);
        let norm = y.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if !norm.is_finite() || norm > growth_limit {
            return Err(Error::Conditioning {
                k,
                column: column + 1,
                growth: if norm.is_finite() {
                    norm
                } else {
                    f64::INFINITY
                },
            });
        }
        growth = growth.max(norm);
        values[if backward { i - 1 } else { i + 1 }] = y;
    }
    Ok(ColumnSolution {
        kind,
        column,
        exponents: ex,
        radius: table.radius,
        step: table.step,
        values,
        growth,
    })
}

/// Composite Simpson weights for an even number of intervals.
fn simpson_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n {
        h / 3.0
    } else if i % 2 == 1 {
        4.0 * h / 3.0
    } else {
        2.0 * h / 3.0
    }
}

/// Column `j` of `s` (or `s^A` for adjoint columns) by quadrature over the nodes.
/// Relative size of the integrand at `|x| = R` above which an entry of `s` is
/// considered not converged.
pub const TAIL_INTEGRAND_TOLERANCE: f64 = 1e-10;

/// One column of `s`; an entry whose integrand has not decayed at the
/// truncation radius is NaN.
fn spectral_column(sol: &ColumnSolution, table: &PotentialTable) -> Vector3<C> {
    let ex = &sol.exponents;
    let kernel = Kernel::new(ex).expect("separation was checked by the solve");
    let j = sol.column;
    let n = sol.values.len() - 1;
    let mut acc = Vector3::zeros();
    let mut peak = [0.0f64; 3];
    let mut tail = [0.0f64; 3];
    for (i, y) in sol.values.iter().enumerate() {
        let x = sol.node(i);
        let s = table.at_half(2 * i);
        let w = simpson_weight(i, n, sol.step);
        let (u, sign) = match sol.kind {
            Eigenfunction::X | Eigenfunction::Y => (kernel.apply(s, y), -1.0),
            Eigenfunction::Adjoint => (kernel.apply_transpose(s, y), 1.0),
        };
        for r in 0..3 {
            let f = (sign * (ex.l[r] - ex.l[j]) * x).exp() * u[r];
            acc[r] += w * f;
            peak[r] = peak[r].max(f.norm());
            if i == 0 || i == n {
                tail[r] = tail[r].max(f.norm());
            }
        }
    }
    let mut out = match sol.kind {
        Eigenfunction::Adjoint => acc,
        _ => -acc,
    };
    out[j] += C::new(1.0, 0.0);
    for r in 0..3 {
        if !(tail[r] <= TAIL_INTEGRAND_TOLERANCE * peak[r]) {
            out[r] = C::new(f64::NAN, f64::NAN);
        }
    }
    out
}

/// Max deviation of an `X` column from its Volterra integral equation at ~10 nodes.
pub fn integral_residual(sol: &ColumnSolution, table: &PotentialTable) -> f64 {
    assert_eq!(
        sol.kind,
        Eigenfunction::X,
        "residual is defined for X columns"
    );
    let ex = &sol.exponents;
    let kernel = Kernel::new(ex).expect("separation was checked by the solve");
    let j = sol.column;
    let n = sol.values.len() - 1;
    let uy: Vec<Vector3<C>> = sol
        .values
        .iter()
        .enumerate()
        .map(|(i, y)| kernel.apply(table.at_half(2 * i), y))
        .collect();
    let mut worst: f64 = 0.0;
    for q in 1..=10 {
        // an even number of intervals between the sample and x = R
        let i0 = n - 2 * ((q * n) / 22);
        let x = sol.node(i0);
        let m = n - i0;
        let mut acc: Vector3<C> = Vector3::zeros();
        for (off, i) in (i0..=n).enumerate() {
            let w = simpson_weight(off, m, sol.step);
            let xp = sol.node(i);
            for r in 0..3 {
                acc[r] += w * ((ex.l[r] - ex.l[j]) * (x - xp)).exp() * uy[i][r];
            }
        }
        for r in 0..3 {
            let delta = if r == j { 1.0 } else { 0.0 };
            let resid = sol.values[i0][r] - (C::new(delta, 0.0) - acc[r]);
            worst = worst.max(resid.norm());
        }
    }
    worst
}

/// Solver controls for [`scattering_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringOptions {
    /// Initial x-step.
    pub step: f64,
    /// Halve the step until `s` moves by less than this; `None` keeps the first step.
    pub refine_tolerance: Option<f64>,
    pub max_refinements: usize,
    pub growth_limit: f64,
    /// Columns of `s` to compute.
    pub columns: [bool; 3],
    /// Check the integral equation after the solve.
    pub check_residual: bool,
}

impl Default for ScatteringOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            refine_tolerance: Some(1e-8),
            max_refinements: 3,
            growth_limit: GROWTH_LIMIT,
            columns: [true; 3],
            check_residual: true,
        }
    }
}

impl ScatteringOptions {
    /// Like [`fast`](Self::fast) but skipping the third column.
    pub fn fast_two() -> Self {
        Self {
            columns: [true, true, false],
            ..Self::fast()
        }
    }

    /// Only the first column at a fixed step: enough for `s11`.
    pub fn fast() -> Self {
        Self {
            refine_tolerance: None,
            columns: [true, false, false],
            check_residual: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringDiagnostics {
    pub radius: f64,
    pub step: f64,
    /// Max entry change in the last step halving, if any.
    pub refinement_change: Option<f64>,
    /// Max Volterra residual over the computed columns.
    pub residual: Option<f64>,
    pub growth: [Option<f64>; 3],
    /// Columns that could not be computed and why.
    pub failures: Vec<String>,
}

/// `s(k)` with `r1(k)`; entries of uncomputed columns are NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringResult {
    #[serde(serialize_with = "ser_c")]
    pub k: C,
    #[serde(serialize_with = "ser_matrix")]
    pub s: Matrix3<C>,
    pub valid_columns: [bool; 3],
    /// `s12/s11`; `None` when column 2 is missing or `|s11| < 1e-12`.
    #[serde(serialize_with = "ser_opt_c")]
    pub r1: Option<C>,
    pub diagnostics: ScatteringDiagnostics,
}

fn ser_c<S: serde::Serializer>(c: &C, s: S) -> std::result::Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

fn ser_opt_c<S: serde::Serializer>(c: &Option<C>, s: S) -> std::result::Result<S::Ok, S::Error> {
    c.map(|c| [c.re, c.im]).serialize(s)
}

fn ser_matrix<S: serde::Serializer>(m: &Matrix3<C>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..3)
        .map(|i| (0..3).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    rows.serialize(s)
}

impl ScatteringResult {
    pub fn s11(&self) -> C {
        self.s[(0, 0)]
    }
}

/// Threshold on `|s11|` below which `r1` is not formed.
pub const S11_FLOOR: f64 = 1e-12;

fn compute_columns(
    k: C,
    table: &PotentialTable,
    opts: &ScatteringOptions,
) -> ([Option<ColumnSolution>; 3], Vec<String>) {
    let mut failures = Vec::new();
    let mut out: [Option<ColumnSolution>; 3] = [None, None, None];
    for (j, slot) in out.iter_mut().enumerate() {
        if !opts.columns[j] {
            continue;
        }
        match solve_column(Eigenfunction::X, j, k, table, opts.growth_limit) {
            Ok(sol) => *slot = Some(sol),
            Err(e) => failures.push(e.to_string()),
        }
    }
    (out, failures)
}

fn assemble(cols: &[Option<ColumnSolution>; 3], table: &PotentialTable) -> (Matrix3<C>, [bool; 3]) {
    let nan = C::new(f64::NAN, f64::NAN);
    let mut s = Matrix3::from_element(nan);
    let mut valid = [false; 3];
    for (j, sol) in cols.iter().enumerate() {
        if let Some(sol) = sol {
            let col = spectral_column(sol, table);
            for r in 0..3 {
                s[(r, j)] = col[r];
            }
            valid[j] = true;
        }
    }
    (s, valid)
}

fn divergent_entries(s: &Matrix3<C>, valid: &[bool; 3]) -> Vec<String> {
    let mut out = Vec::new();
    for j in 0..3 {
        for r in 0..3 {
            if valid[j] && !s[(r, j)].re.is_finite() {
                out.push(format!(
                    "s{}{}: integrand has not decayed at the truncation radius",
                    r + 1,
                    j + 1
                ));
            }
        }
    }
    out
}

fn max_change(a: &Matrix3<C>, b: &Matrix3<C>, valid: &[bool; 3]) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..3 {
        if valid[j] {
            for r in 0..3 {
                m = m.max((a[(r, j)] - b[(r, j)]).norm());
            }
        }
    }
    m
}

/// `s(k) = I - int e^{-xL} U X e^{xL} dx` by Simpson's rule over the solver nodes.
///
/// Columns whose solve overflows are reported in the diagnostics and left as
/// NaN; if none of the requested columns can be computed the conditioning
/// error of the first one is returned.
pub fn scattering_matrix(
    k: C,
    p: &PotentialSampler,
    opts: &ScatteringOptions,
) -> Result<ScatteringResult> {
    let ex = lax_exponents(k)?;
    check_separation(&ex)?;
    let mut step = opts.step;
    let mut table = PotentialTable::new(p, step)?;
    let (mut cols, mut failures) = compute_columns(k, &table, opts);
    let (mut s, mut valid) = assemble(&cols, &table);
    if !valid.iter().any(|&v| v) {
        let j = opts.columns.iter().position(|&c| c).unwrap_or(0);
        return Err(solve_column(Eigenfunction::X, j, k, &table, opts.growth_limit).unwrap_err());
    }
    let mut refinement_change = None;
    if let Some(tol) = opts.refine_tolerance {
        for _ in 0..opts.max_refinements {
            step *= 0.5;
            let finer = PotentialTable::new(p, step)?;
            let (c2, f2) = compute_columns(k, &finer, opts);
            let (s2, v2) = assemble(&c2, &finer);
            let both = [valid[0] && v2[0], valid[1] && v2[1], valid[2] && v2[2]];
            let change = max_change(&s, &s2, &both);
            refinement_change = Some(change);
            table = finer;
            cols = c2;
            failures = f2;
            s = s2;
            valid = v2;
            if change < tol {
                break;
            }
        }
    }
    let residual = if opts.check_residual {
        cols.iter()
            .flatten()
            .map(|sol| integral_residual(sol, &table))
            .reduce(f64::max)
    } else {
        None
    };
    let growth = [0, 1, 2].map(|j| cols[j].as_ref().map(|c| c.growth));
    failures.extend(divergent_entries(&s, &valid));
    let r1 = if valid[0] && valid[1] && s[(0, 0)].norm() >= S11_FLOOR && s[(0, 1)].re.is_finite() {
        Some(s[(0, 1)] / s[(0, 0)])
    } else {
        None
    };
    Ok(ScatteringResult {
        k,
        s,
        valid_columns: valid,
        r1,
        diagnostics: ScatteringDiagnostics {
            radius: table.radius(),
            step,
            refinement_change,
            residual,
            growth,
            failures,
        },
    })
}

/// `s11(k)` from the first column alone at the given step.
pub fn s11(k: C, table: &PotentialTable) -> Result<C> {
    let sol = solve_column(Eigenfunction::X, 0, k, table, GROWTH_LIMIT)?;
    Ok(spectral_column(&sol, table)[0])
}

/// `s^A_22(k) = 1 + int (U^T X^A)_22 dx`.
pub fn adjoint_s22(k: C, table: &PotentialTable) -> Result<C> {
    let sol = solve_column(Eigenfunction::Adjoint, 1, k, table, GROWTH_LIMIT)?;
    Ok(spectral_column(&sol, table)[1])
}

/// Outcome of a zero search on a real interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RootSearch {
    /// All sign changes found, in increasing order.
    Zeros { zeros: Vec<f64> },
    /// No sign change on the interval.
    Solitonless,
}

impl RootSearch {
    pub fn first(&self) -> Option<f64> {
        match self {
            RootSearch::Zeros { zeros } => zeros.first().copied(),
            RootSearch::Solitonless => None,
        }
    }
}

/// Bracket sign changes of `g` on `samples` points of `[a, b]` and refine each to `tol`.
///
/// Refinement is bisection safeguarded secant (Illinois false position).
pub fn find_sign_changes<G>(
    mut g: G,
    a: f64,
    b: f64,
    samples: usize,
    tol: f64,
) -> Result<RootSearch>
where
    G: FnMut(f64) -> Result<f64>,
{
    if !(b > a) || samples < 2 {
        return Err(Error::config(
            "interval",
            format!("need a < b and >= 2 samples, got [{a}, {b}]"),
        ));
    }
    let xs: Vec<f64> = (0..samples)
        .map(|i| a + (b - a) * i as f64 / (samples - 1) as f64)
        .collect();
    let mut gs = Vec::with_capacity(samples);
    for &x in &xs {
        gs.push(g(x)?);
    }
    let mut zeros = Vec::new();
    for i in 0..samples - 1 {
        let (mut lo, mut hi) = (xs[i], xs[i + 1]);
        let (mut flo, mut fhi) = (gs[i], gs[i + 1]);
        if flo == 0.0 {
            zeros.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo < tol {
                break;
            }
            let mut x = (lo * fhi - hi * flo) / (fhi - flo);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            let fx = g(x)?;
            if fx == 0.0 {
                lo = x;
                hi = x;
                break;
            }
            if fx.signum() == flo.signum() {
                lo = x;
                flo = fx;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = x;
                fhi = fx;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
        }
        zeros.push(0.5 * (lo + hi));
    }
    Ok(if zeros.is_empty() {
        RootSearch::Solitonless
    } else {
        RootSearch::Zeros { zeros }
    })
}

/// Zeros of `s11` on a real interval inside `(1, inf)` or `(-1, 0)`.
///
/// `s11` carries a nearly constant phase along the real axis, so the search
/// runs on `Re(s11(k) e^{-i phi})` with `phi = arg s11(a)`. Found zeros are
/// accepted only where `|s11|` is small relative to its interval maximum.
pub fn find_k0(p: &PotentialSampler, interval: (f64, f64), step: f64) -> Result<RootSearch> {
    let (a, b) = interval;
    if !(a < b && ((a > 1.0) || (a > -1.0 && b < 0.0))) {
        return Err(Error::config(
            "interval",
            format!("must lie in (1, inf) or (-1, 0), got [{a}, {b}]"),
        ));
    }
    let table = PotentialTable::new(p, step)?;
    let ref_val = s11(C::new(a, 0.0), &table)?;
    let phase = if ref_val.norm() > 0.0 {
        ref_val / ref_val.norm()
    } else {
        C::new(1.0, 0.0)
    };
    let samples = (((b - a) / 0.01).ceil() as usize).clamp(8, 400);
    let search = find_sign_changes(
        |k| Ok((s11(C::new(k, 0.0), &table)? * phase.conj()).re),
        a,
        b,
        samples,
        1e-10,
    )?;
    if let RootSearch::Zeros { zeros } = &search {
        let scale = s11(C::new(a, 0.0), &table)?
            .norm()
            .max(s11(C::new(b, 0.0), &table)?.norm());
        for &z in zeros {
            let v = s11(C::new(z, 0.0), &table)?;
            if v.norm() > 1e-6 * scale.max(1.0) {
                return Err(Error::DataInconsistency(format!(
                    "projected s11 vanishes at k = {z} but |s11| = {:.3e}",
                    v.norm()
                )));
            }
        }
    }
    Ok(search)
}

/// Norming constant at a zero `k0`, with its internal consistency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormingConstant {
    #[serde(serialize_with = "ser_c")]
    pub value: C,
    /// Max relative deviation of the bulk estimates from their mean.
    pub spread: f64,
    /// `d s^A_22 / dk` at `k0`.
    #[serde(serialize_with = "ser_c")]
    pub adjoint_derivative: C,
    /// Bulk `(x, component, estimate)` triples.
    #[serde(skip)]
    pub estimates: Vec<(f64, usize, C)>,
}

/// Default tolerance on the norming-constant spread.
pub const NORMING_SPREAD_TOLERANCE: f64 = 1e-4;

/// `c_{k0} = e^{-(l1 - l2) x} [Y]_{i2} / (s^A_22'(k0) [X]_{i1})`, averaged over
/// `x` in `{-5, 0, 5}` and components with `|[X]_{i1}| >= 0.1 max_i |[X]_{i1}|`.
pub fn norming_constant(
    k0: f64,
    p: &PotentialSampler,
    step: f64,
    tolerance: f64,
) -> Result<NormingConstant> {
    let table = PotentialTable::new(p, step)?;
    let k = C::new(k0, 0.0);
    let ex = lax_exponents(k)?;
    let x_sol = solve_column(Eigenfunction::X, 0, k, &table, GROWTH_LIMIT)?;
    let y_sol = solve_column(Eigenfunction::Y, 1, k, &table, GROWTH_LIMIT)?;

    let h = 1e-6 * k0.abs();
    let diff = |h: f64| -> Result<C> {
        let plus = adjoint_s22(C::new(k0 + h, 0.0), &table)?;
        let minus = adjoint_s22(C::new(k0 - h, 0.0), &table)?;
        Ok((plus - minus) / (2.0 * h))
    };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    let deriv = (4.0 * d2 - d1) / 3.0;
    if deriv.norm() == 0.0 {
        return Err(Error::DataInconsistency(format!(
            "s^A_22 has a vanishing derivative at k0 = {k0}"
        )));
    }

    let mut estimates = Vec::new();
    for x in [-5.0, 0.0, 5.0] {
        let (Some(xv), Some(yv)) = (x_sol.at(x), y_sol.at(x)) else {
            return Err(Error::config(
                "step",
                format!("x = {x} is not a solver node"),
            ));
        };
        let big = xv.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let factor = (-(ex.l[0] - ex.l[1]) * x).exp();
        for i in 0..3 {
            if xv[i].norm() >= 0.1 * big && big > 0.0 {
                estimates.push((x, i + 1, factor * yv[i] / (deriv * xv[i])));
            }
        }
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.2).sum::<C>() / n;
    let spread = estimates
        .iter()
        .map(|e| (e.2 - mean).norm() / mean.norm())
        .fold(0.0, f64::max);
    if !(spread <= tolerance) {
        return Err(Error::NormingSpread { spread, tolerance });
    }

    // The bulk estimates carry an oscillating admixture that decays away from
    // the support, so the reported value comes from the tails, where column
    // one is dominated by its first component (x > 0) and its second (x < 0).
    let tail = ((0.25 * table.radius()).min(40.0) / table.step()).floor() * table.step();
    let mut tails = Vec::with_capacity(2);
    for (x, i) in [(tail, 0usize), (-tail, 1usize)] {
        let (Some(xv), Some(yv)) = (x_sol.at(x), y_sol.at(x)) else {
            return Err(Error::config(
                "step",
                format!("x = {x} is not a solver node"),
            ));
        };
        let factor = (-(ex.l[0] - ex.l[1]) * x).exp();
        tails.push(factor * yv[i] / (deriv * xv[i]));
    }
    let value = 0.5 * (tails[0] + tails[1]);
    Ok(NormingConstant {
        value,
        spread,
        adjoint_derivative: deriv,
        estimates,
    })
}
