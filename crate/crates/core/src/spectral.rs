//! Periodic grid, discrete Fourier transform pair and the spectral kernels.
//!
//! Coefficients are indexed by the mode number `j = -N..N-1` and stored in a
//! flat array at slot `j + N`. The window is deliberately asymmetric: there
//! is a `-N` mode but no `+N` mode.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// The collocation grid `x_j = jL/N`, `j = -N..N-1`, on the period `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    half_period: f64,
    modes: usize,
}

impl PeriodicGrid {
    pub fn new(half_period: f64, modes: usize) -> Result<Self> {
        if !(half_period.is_finite() && half_period > 0.0) {
            return Err(Error::config(
                "L",
                format!("must be positive, got {half_period}"),
            ));
        }
        if modes == 0 {
            return Err(Error::config("N", "must be at least 1"));
        }
        Ok(Self { half_period, modes })
    }

    /// Half-period `L`.
    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    /// Mode cutoff `N`.
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of collocation points, `2N`.
    pub fn len(&self) -> usize {
        2 * self.modes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.half_period / self.modes as f64
    }

    /// Mode number stored at array slot `slot`.
    pub fn mode(&self, slot: usize) -> i64 {
        slot as i64 - self.modes as i64
    }

    /// Array slot holding mode `j`.
    pub fn slot(&self, j: i64) -> usize {
        debug_assert!(self.contains_mode(j), "mode {j} outside window");
        (j + self.modes as i64) as usize
    }

    pub fn contains_mode(&self, j: i64) -> bool {
        let n = self.modes as i64;
        (-n..n).contains(&j)
    }

    /// Collocation point `x_j`.
    pub fn point(&self, j: i64) -> f64 {
        j as f64 * self.half_period / self.modes as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|s| self.point(self.mode(s))).collect()
    }

    /// Wavenumber `pi j / L` of mode `j`.
    pub fn wavenumber(&self, j: i64) -> f64 {
        PI * j as f64 / self.half_period
    }

    /// Sample a function at the collocation points.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> PhysicalField {
        PhysicalField {
            grid: *self,
            values: self.points().into_iter().map(f).collect(),
        }
    }
}

/// Samples `f(x_j)` on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

impl PhysicalField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(
                "samples",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                "samples",
                format!("non-finite value at index {bad}"),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic trapezoid rule for the integral over one period.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }
}

/// Fourier coefficients `f^(j)`, `j = -N..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: PeriodicGrid,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::config(
                "coeffs",
                format!("expected {} coefficients, got {}", grid.len(), coeffs.len()),
            ));
        }
        Ok(Self { grid, coeffs })
    }

    /// Coefficient of mode `j`.
    pub fn get(&self, j: i64) -> Complex64 {
        self.coeffs[self.grid.slot(j)]
    }

    pub fn set(&mut self, j: i64, value: Complex64) {
        let s = self.grid.slot(j);
        self.coeffs[s] = value;
    }

    /// Zero the unpaired `-N` mode and make the spectrum exactly Hermitian.
    pub fn enforce_reality(&mut self) {
        enforce_reality(&mut self.coeffs, self.grid.modes());
    }

    /// Largest deviation from Hermitian symmetry over the paired modes.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.coeffs, self.grid.modes())
    }
}

/// Zero slot `-N` and symmetrize `c(-j) = conj(c(j))`, `c(0)` real.
pub fn enforce_reality(coeffs: &mut [Complex64], modes: usize) {
    let n = modes;
    coeffs[0] = Complex64::new(0.0, 0.0);
    coeffs[n].im = 0.0;
    for j in 1..n {
        let avg = 0.5 * (coeffs[n + j] + coeffs[n - j].conj());
        coeffs[n + j] = avg;
        coeffs[n - j] = avg.conj();
    }
}

pub fn hermitian_defect(coeffs: &[Complex64], modes: usize) -> f64 {
    let n = modes;
    let mut defect = coeffs[n].im.abs();
    for j in 1..n {
        defect = defect.max((coeffs[n + j] - coeffs[n - j].conj()).norm());
    }
    defect
}

fn fft_pair(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
}

/// `f^(j) = (1/2N) sum_l f(x_l) exp(-i pi j x_l / L)`.
pub fn forward_dft(f: &PhysicalField) -> SpectralField {
    let grid = f.grid;
    let m = grid.len();
    let n = grid.modes();
    let (fwd, _) = fft_pair(m);
    // slot s holds sample x_{s-N}; shifting the summation index by N
    // multiplies mode j by (-1)^j.
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let scale = 1.0 / m as f64;
    let coeffs = (0..m)
        .map(|s| {
            let j = s as i64 - n as i64;
            let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            buf[j.rem_euclid(m as i64) as usize] * (sign * scale)
        })
        .collect();
    SpectralField { grid, coeffs }
}

/// Samples of the complex interpolant `sum_j F(j) exp(i pi j x_l / L)` at the grid points.
pub fn inverse_dft_complex(field: &SpectralField) -> Vec<Complex64> {
    let grid = field.grid;
    let m = grid.len();
    let n = grid.modes() as i64;
    let (_, inv) = fft_pair(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (s, c) in field.coeffs.iter().enumerate() {
        let j = s as i64 - n;
        let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        buf[j.rem_euclid(m as i64) as usize] = c * sign;
    }
    inv.process(&mut buf);
    buf
}

/// Real part of the inverse transform at the grid points.
pub fn inverse_dft(field: &SpectralField) -> PhysicalField {
    PhysicalField {
        grid: field.grid,
        values: inverse_dft_complex(field)
            .into_iter()
            .map(|z| z.re)
            .collect(),
    }
}

/// Evaluate the trigonometric interpolant `Re sum_j F(j) exp(i pi j x / L)`.
pub fn eval_at(field: &SpectralField, x: f64) -> f64 {
    eval_coeffs(&field.coeffs, field.grid, x)
}

/// Horner evaluation in `z = exp(i pi x / L)`.
pub(crate) fn eval_coeffs(coeffs: &[Complex64], grid: PeriodicGrid, x: f64) -> f64 {
    let theta = PI * x / grid.half_period();
    let z = Complex64::from_polar(1.0, theta);
    let mut acc = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    let lead = Complex64::from_polar(1.0, -theta * grid.modes() as f64);
    (acc * lead).re
}

/// Multiply mode `j` by `(i pi j / L)^order`.
pub fn spectral_derivative(field: &SpectralField, order: u32) -> SpectralField {
    let grid = field.grid;
    let coeffs = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(s, c)| c * Complex64::new(0.0, grid.wavenumber(grid.mode(s))).powu(order))
        .collect();
    SpectralField { grid, coeffs }
}

/// Inverse of the first derivative on the nonzero modes.
///
/// Requires a zero-mean input. The `-N` mode is dropped and the constant mode
/// is fixed so that the interpolant vanishes at `x = -L`.
pub fn spectral_antiderivative(field: &SpectralField) -> SpectralField {
    let grid = field.grid;
    let n = grid.modes() as i64;
    let mut out = SpectralField::zeros(grid);
    let mut at_left = Complex64::new(0.0, 0.0);
    for j in (1 - n)..n {
        if j == 0 {
            continue;
        }
        let c = field.get(j) / Complex64::new(0.0, grid.wavenumber(j));
        out.set(j, c);
        // exp(i pi j (-L) / L) = (-1)^j
        at_left += if j.rem_euclid(2) == 0 { c } else { -c };
    }
    out.set(0, -at_left);
    out
}

/// The windowed convolution used by the Fourier-space nonlinearity.
///
/// For `j < 0` the sum runs over `l = -N..=N+j` of `a(l) b(j-l)`; for
/// `j >= 0` over `l = j+1-N..=N-1` of `a(j-l) b(l)`. Both index sets are
/// exactly the pairs whose factors lie inside `[-N, N-1]`.
pub fn truncated_convolution(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let grid = a.grid;
    let n = grid.modes() as i64;
    let mut out = SpectralField::zeros(grid);
    for j in -n..n {
        let mut acc = Complex64::new(0.0, 0.0);
        if j < 0 {
            for l in -n..=(n + j) {
                acc += a.get(l) * b.get(j - l);
            }
        } else {
            for l in (j + 1 - n)..n {
                acc += a.get(j - l) * b.get(l);
            }
        }
        out.set(j, acc);
    }
    out
}

/// How the Fourier-space product is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductMethod {
    /// Zero-padded FFT product.
    #[default]
    Dealiased,
    /// Direct O(N^2) windowed sum.
    Direct,
}

/// Reusable FFT plans and buffers for the padded product.
pub struct DealiasedProduct {
    grid: PeriodicGrid,
    padded: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf_a: Vec<Complex64>,
    buf_b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for DealiasedProduct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DealiasedProduct")
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .finish()
    }
}

impl DealiasedProduct {
    pub fn new(grid: PeriodicGrid) -> Self {
        let padded = (4 * grid.modes()).next_power_of_two();
        let (fwd, inv) = fft_pair(padded);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            grid,
            padded,
            fwd,
            inv,
            buf_a: vec![Complex64::new(0.0, 0.0); padded],
            buf_b: vec![Complex64::new(0.0, 0.0); padded],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// Padded transform length.
    pub fn padded_len(&self) -> usize {
        self.padded
    }

    /// Windowed convolution of two coefficient slices, written into `out`.
    pub fn apply(&mut self, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
        let m = self.grid.len();
        let n = self.grid.modes() as i64;
        let p = self.padded as i64;
        let zero = Complex64::new(0.0, 0.0);
        self.buf_a.fill(zero);
        self.buf_b.fill(zero);
        for s in 0..m {
            let idx = (s as i64 - n).rem_euclid(p) as usize;
            self.buf_a[idx] = a[s];
            self.buf_b[idx] = b[s];
        }
        self.inv
            .process_with_scratch(&mut self.buf_a, &mut self.scratch);
        self.inv
            .process_with_scratch(&mut self.buf_b, &mut self.scratch);
        for (x, y) in self.buf_a.iter_mut().zip(&self.buf_b) {
            *x *= y;
        }
        self.fwd
            .process_with_scratch(&mut self.buf_a, &mut self.scratch);
        let scale = 1.0 / self.padded as f64;
        for (s, o) in out.iter_mut().enumerate() {
            let idx = (s as i64 - n).rem_euclid(p) as usize;
            *o = self.buf_a[idx] * scale;
        }
    }
}

/// Same result as [`truncated_convolution`], computed through a zero-padded FFT.
pub fn dealiased_product(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let mut kernel = DealiasedProduct::new(a.grid);
    let mut out = SpectralField::zeros(a.grid);
    kernel.apply(&a.coeffs, &b.coeffs, &mut out.coeffs);
    out
}

/// Running trapezoid integral from `x_{-N} = -L`; the first sample is zero.
pub fn cumulative_integral(f: &PhysicalField) -> PhysicalField {
    let h = f.grid.spacing();
    let mut values = Vec::with_capacity(f.values.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in f.values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        values.push(acc);
    }
    PhysicalField {
        grid: f.grid,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(l: f64, n: usize) -> PeriodicGrid {
        PeriodicGrid::new(l, n).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = grid(10.0, 4);
        let pts = g.points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], -10.0);
        assert_relative_eq!(pts[7], 10.0 - 2.5);
        for w in pts.windows(2) {
            assert_relative_eq!(w[1] - w[0], 2.5, epsilon = 1e-14);
        }
        assert!(PeriodicGrid::new(0.0, 4).is_err());
        assert!(PeriodicGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let g = grid(7.0, 6);
        let f = forward_dft(&g.sample(|_| 1.0));
        assert_relative_eq!(f.get(0).re, 1.0, epsilon = 1e-15);
        for j in -6..6 {
            if j != 0 {
                assert!(f.get(j).norm() < 1e-15);
            }
        }
        assert_relative_eq!(eval_at(&f, 2.345), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn single_harmonic() {
        let l = 3.0;
        let g = grid(l, 8);
        let f = forward_dft(&g.sample(|x| (PI * x / l).cos()));
        assert_relative_eq!(f.get(1).re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(f.get(-1).re, 0.5, epsilon = 1e-14);
        for j in -8i64..8 {
            if j.abs() != 1 {
                assert!(f.get(j).norm() < 1e-14);
            }
        }
        assert!(eval_at(&f, l / 2.0).abs() < 1e-12);
    }

    #[test]
    fn unit_mass_inverts_to_constant() {
        let g = grid(5.0, 5);
        let mut f = SpectralField::zeros(g);
        f.set(0, Complex64::new(1.0, 0.0));
        for v in inverse_dft(&f).values {
            assert_relative_eq!(v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let l = 4.0;
        let g = grid(l, 32);
        let f = forward_dft(&g.sample(|x| (PI * x / l).sin()));
        let d = spectral_derivative(&f, 1);
        for x in [-3.9, -1.0, 0.0, 0.37, 2.5] {
            assert_relative_eq!(eval_at(&d, x), PI / l * (PI * x / l).cos(), epsilon = 1e-12);
        }
        assert_eq!(spectral_derivative(&f, 0), f);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let l = 6.0;
        let g = grid(l, 32);
        let u = g.sample(|x| (-(x * x)).exp() * x);
        let uh = forward_dft(&u);
        let v = spectral_antiderivative(&uh);
        let back = spectral_derivative(&v, 1);
        for j in -31..32 {
            if j != 0 {
                assert!((back.get(j) - uh.get(j)).norm() < 1e-15);
            }
        }
        // integral of x exp(-x^2) from -L is -(exp(-x^2) - exp(-L^2))/2
        assert!(eval_at(&v, -l).abs() < 1e-14);
        assert_relative_eq!(eval_at(&v, 0.0), -0.5, epsilon = 1e-10);
    }

    #[test]
    fn reality_enforcement_zeroes_unpaired_mode() {
        let g = grid(2.0, 4);
        let mut f = forward_dft(&g.sample(|x| x.sin() + 0.3 * x.cos()));
        f.set(-4, Complex64::new(0.2, 0.1));
        f.set(2, f.get(2) + Complex64::new(0.0, 1e-3));
        f.enforce_reality();
        assert_eq!(f.get(-4), Complex64::new(0.0, 0.0));
        assert!(f.hermitian_defect() < 1e-16);
    }

    #[test]
    fn convolution_with_delta_is_identity() {
        let g = grid(1.0, 5);
        let a = SpectralField::from_coeffs(
            g,
            (0..10)
                .map(|s| Complex64::new(s as f64, -(s as f64) * 0.5))
                .collect(),
        )
        .unwrap();
        let mut delta = SpectralField::zeros(g);
        delta.set(0, Complex64::new(1.0, 0.0));
        assert_eq!(truncated_convolution(&a, &delta), a);
        let fast = dealiased_product(&a, &delta);
        for (x, y) in fast.coeffs.iter().zip(&a.coeffs) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn cumulative_integral_basics() {
        let l = 2.0;
        let g = grid(l, 64);
        assert!(cumulative_integral(&PhysicalField::zeros(g))
            .values
            .iter()
            .all(|&v| v == 0.0));
        let f = g.sample(|x| (PI * x / l).cos());
        let big_f = cumulative_integral(&f);
        let h = g.spacing();
        for (x, v) in g.points().into_iter().zip(big_f.values) {
            let exact = l / PI * ((PI * x / l).sin() - (-PI).sin());
            assert!((v - exact).abs() < h * h);
        }
    }

    #[test]
    fn padded_length_is_power_of_two_at_least_4n() {
        let k = DealiasedProduct::new(grid(1200.0, 381));
        assert_eq!(k.padded_len(), 2048);
        let k = DealiasedProduct::new(grid(1.0, 16));
        assert_eq!(k.padded_len(), 64);
    }
}
