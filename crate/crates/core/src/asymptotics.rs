//! Long-time asymptotic ingredients: the critical points `k2`, `k4` and
//! `z2*`, the dispersive amplitude `A2(zeta)`, soliton phase shifts, the
//! arc integral `delta(zeta, k)` and the soliton asymptote `u_sol`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scattering::{omega, scattering_matrix, PotentialSampler, ScatteringOptions};

type C = Complex64;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Critical points at one value of `zeta = x/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorPoint {
    pub zeta: f64,
    pub k2: C,
    /// On the unit circle for `zeta < 1`, real for `zeta >= 1`.
    pub k4: C,
    /// Branch with `-i omega^2 k2 z2*` real and positive.
    pub z2_star: C,
}

/// `k2(zeta)`, defined for `0 <= zeta < 1`.
pub fn k2(zeta: f64) -> C {
    let r = (8.0 + zeta * zeta).sqrt();
    let inner = C::new(4.0 - zeta * zeta + zeta * r, 0.0).sqrt();
    0.25 * (C::new(zeta - r, 0.0) - C::new(0.0, 2f64.sqrt()) * inner)
}

/// `k4(zeta)` with the principal square root.
pub fn k4(zeta: f64) -> C {
    let r = (8.0 + zeta * zeta).sqrt();
    let inner = C::new(-4.0 + zeta * zeta + zeta * r, 0.0).sqrt();
    0.25 * (C::new(zeta + r, 0.0) - 2f64.sqrt() * inner)
}

pub fn sector_point(zeta: f64) -> Result<SectorPoint> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::Domain(format!(
            "k2 is defined for 0 <= zeta < 1, got {zeta}"
        )));
    }
    let w2 = omega() * omega();
    let k2 = k2(zeta);
    let arg = -w2 * (4.0 - 3.0 * k2 * zeta - k2.powi(3) * zeta) / (4.0 * k2.powi(4));
    let mut z = 2f64.sqrt() * C::from_polar(1.0, PI / 4.0) * arg.sqrt();
    let mut q = C::new(0.0, -1.0) * w2 * k2 * z;
    if q.re < 0.0 {
        z = -z;
        q = -q;
    }
    if !(q.re > 0.0 && q.im.abs() <= 1e-8 * q.norm()) {
        return Err(Error::Branch { zeta });
    }
    Ok(SectorPoint {
        zeta,
        k2,
        k4: k4(zeta),
        z2_star: z,
    })
}

/// `(omega^2 - k^2) / (1 - omega^2 k^2)`.
pub fn rtilde(k: C) -> Result<C> {
    let w2 = omega() * omega();
    let den = C::new(1.0, 0.0) - w2 * k * k;
    if den.norm() < 1e-14 {
        return Err(Error::Domain(format!("r~ has a pole at k = {k}")));
    }
    Ok((w2 - k * k) / den)
}

/// `A2(zeta)` and the quantities it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeA2 {
    pub zeta: f64,
    pub nu_hat: f64,
    pub a2: f64,
    /// `nu_hat` was slightly negative and clipped to zero.
    pub clipped: bool,
}

/// Tolerance below which a negative `nu_hat` is treated as zero.
pub const NU_TOLERANCE: f64 = 1e-10;

/// `A2(zeta)` from `s(omega^2 k2)` and `s(omega k2)`.
pub fn amplitude_a2(
    zeta: f64,
    p: &PotentialSampler,
    opts: &ScatteringOptions,
) -> Result<AmplitudeA2> {
    let sp = sector_point(zeta)?;
    let w = omega();
    let k2 = sp.k2;
    let at_w2 = scattering_matrix(
        w * w * k2,
        p,
        &ScatteringOptions {
            columns: [true, true, false],
            ..*opts
        },
    )?;
    let at_w = scattering_matrix(
        w * k2,
        p,
        &ScatteringOptions {
            columns: [true, false, false],
            ..*opts
        },
    )?;
    let r1 = at_w2.r1.ok_or_else(|| {
        Error::DataInconsistency(format!("r1 unavailable at omega^2 k2 for zeta = {zeta}"))
    })?;
    let s11a = at_w2.s11();
    let s11b = at_w.s11();
    if s11b.norm() < crate::scattering::S11_FLOOR {
        return Err(Error::DataInconsistency(format!(
            "s11(omega k2) vanishes at zeta = {zeta}"
        )));
    }
    let ratio = (C::new(1.0, 0.0) + rtilde(w * w * k2)? * r1.norm_sqr()) * s11a.norm_sqr()
        / s11b.norm_sqr();
    if ratio.re <= 0.0 {
        return Err(Error::DataInconsistency(format!(
            "log argument {ratio} in nu_hat is not positive at zeta = {zeta}"
        )));
    }
    let mut nu = -ratio.re.ln() / (2.0 * PI);
    let mut clipped = false;
    if nu < 0.0 {
        if nu < -NU_TOLERANCE {
            return Err(Error::DataInconsistency(format!(
                "nu_hat = {nu:.3e} < 0 at zeta = {zeta}"
            )));
        }
        nu = 0.0;
        clipped = true;
    }
    let q = (C::new(0.0, -1.0) * w * w * k2 * sp.z2_star).re;
    let a2 = -4.0 * SQRT3 * nu.sqrt() * rtilde(k2.inv())?.norm().sqrt() * k2.im / q
        * (w * w * k2).arg().sin();
    Ok(AmplitudeA2 {
        zeta,
        nu_hat: nu,
        a2,
        clipped,
    })
}

/// `P(k) = (k - w^2 k0)(k - w/k0) / ((k - w k0)(k - w^2/k0))`.
pub fn phase_factor(k: C, k0: f64) -> Result<C> {
    let w = omega();
    let poles = [w * k0, w * w / k0];
    if poles.iter().any(|p| (k - p).norm() < 1e-10) {
        return Err(Error::Domain(format!("k = {k} is at a pole of P")));
    }
    Ok((k - w * w * k0) * (k - w / k0) / ((k - w * k0) * (k - w * w / k0)))
}

/// `arg P(a) / P(b)` in `(-pi, pi]`; zero without a soliton.
pub fn phase_shift(a: C, b: C, k0: Option<f64>) -> Result<f64> {
    match k0 {
        None => Ok(0.0),
        Some(k0) => Ok((phase_factor(a, k0)? / phase_factor(b, k0)?).arg()),
    }
}

/// Phase shift in the `A2` cosine: `arg P(w^2 k2) / P(w k2)`.
pub fn phase_shift_k2(zeta: f64, k0: Option<f64>) -> Result<f64> {
    let sp = sector_point(zeta)?;
    let w = omega();
    phase_shift(w * w * sp.k2, w * sp.k2, k0)
}

/// Phase shift in the `A1` cosine: `arg P(w k4) / P(w^2 k4)`.
pub fn phase_shift_k4(zeta: f64, k0: Option<f64>) -> Result<f64> {
    let sp = sector_point(zeta)?;
    let w = omega();
    phase_shift(w * sp.k4, w * w * sp.k4, k0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature of `ln(1 + r~ |r1|^2)` along the unit circle from `i` to `k1`.
#[derive(Debug, Clone)]
pub struct DeltaTable {
    pub k1: C,
    pub nodes_per_quarter: usize,
    /// `(s_m, w_m ds/dtheta, ln(1 + r~ |r1|^2))`.
    points: Vec<(C, C, C)>,
    theta_end: f64,
}

impl DeltaTable {
    /// `delta = 1` everywhere.
    pub fn trivial() -> Self {
        Self {
            k1: C::new(0.0, 1.0),
            nodes_per_quarter: 0,
            points: Vec::new(),
            theta_end: PI / 2.0,
        }
    }

    /// Angle of `k1` measured counterclockwise from `i`, in `[pi/2, 5pi/2)`.
    fn end_angle(k1: C) -> Result<f64> {
        if (k1.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "k1 = {k1} is not on the unit circle"
            )));
        }
        let mut th = k1.arg();
        while th < PI / 2.0 - 1e-14 {
            th += 2.0 * PI;
        }
        Ok(th)
    }

    /// Tabulate with `n` Gauss-Legendre nodes per quarter arc.
    pub fn build(p: &PotentialSampler, k1: C, n: usize, opts: &ScatteringOptions) -> Result<Self> {
        let theta_end = Self::end_angle(k1)?;
        let span = theta_end - PI / 2.0;
        if span < 1e-14 {
            return Ok(Self {
                k1,
                nodes_per_quarter: n,
                points: Vec::new(),
                theta_end,
            });
        }
        let panels = (span / (PI / 2.0)).ceil().max(1.0) as usize;
        let (gx, gw) = gauss_legendre(n);
        let width = span / panels as f64;
        let mut nodes = Vec::with_capacity(panels * n);
        for q in 0..panels {
            let a = PI / 2.0 + q as f64 * width;
            for (x, w) in gx.iter().zip(&gw) {
                let th = a + 0.5 * width * (x + 1.0);
                let s = C::from_polar(1.0, th);
                nodes.push((s, C::new(0.0, 0.5 * width * w) * s));
            }
        }
        let opts = ScatteringOptions {
            columns: [true, true, false],
            check_residual: false,
            ..*opts
        };
        let points = nodes
            .into_par_iter()
            .map(|(s, ds)| -> Result<(C, C, C)> {
                let res = scattering_matrix(s, p, &opts)?;
                let r1 = res.r1.ok_or_else(|| {
                    Error::DataInconsistency(format!("r1 unavailable on the arc at s = {s}"))
                })?;
                let arg = C::new(1.0, 0.0) + rtilde(s)? * r1.norm_sqr();
                if arg.re <= 0.0 {
                    return Err(Error::DataInconsistency(format!(
                        "1 + r~|r1|^2 = {arg} is not positive at s = {s}"
                    )));
                }
                Ok((s, ds, arg.ln()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k1,
            nodes_per_quarter: n,
            points,
            theta_end,
        })
    }

    /// Start at 64 nodes per quarter and double until `delta` at every probe
    /// point moves by less than `tol`.
    pub fn converged(
        p: &PotentialSampler,
        k1: C,
        probes: &[C],
        tol: f64,
        max_nodes: usize,
        opts: &ScatteringOptions,
    ) -> Result<Self> {
        let mut n = 64;
        let mut table = Self::build(p, k1, n, opts)?;
        loop {
            if n * 2 > max_nodes {
                return Ok(table);
            }
            n *= 2;
            let finer = Self::build(p, k1, n, opts)?;
            let mut change: f64 = 0.0;
            for &k in probes {
                change = change.max((finer.delta(k)? - table.delta(k)?).norm());
            }
            table = finer;
            if change < tol {
                return Ok(table);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest `|ln(1 + r~|r1|^2)|` on the arc.
    pub fn max_log(&self) -> f64 {
        self.points.iter().map(|p| p.2.norm()).fold(0.0, f64::max)
    }

    /// `delta(zeta, k)` for `k` off the arc.
    pub fn delta(&self, k: C) -> Result<C> {
        if (k.norm() - 1.0).abs() < 1e-10 {
            let mut th = k.arg();
            while th < PI / 2.0 {
                th += 2.0 * PI;
            }
            if th <= self.theta_end + 1e-10 && !self.points.is_empty() {
                return Err(Error::Domain(format!(
                    "k = {k} lies on the integration arc"
                )));
            }
        }
        let sum: C = self.points.iter().map(|(s, ds, g)| g * ds / (s - k)).sum();
        Ok((-sum / C::new(0.0, 2.0 * PI)).exp())
    }

    /// `Delta33(k) = delta(w k)/delta(w^2 k) * delta(1/(w^2 k))/delta(1/(w k))`.
    pub fn delta33(&self, k: C) -> Result<C> {
        let w = omega();
        Ok(
            self.delta(w * k)? / self.delta(w * w * k)? * self.delta((w * w * k).inv())?
                / self.delta((w * k).inv())?,
        )
    }
}

/// Leading soliton in the sector `x/t > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolitonAsymptote {
    pub k0: f64,
    pub a0: f64,
    pub c0: f64,
    pub f_squared_re: f64,
    pub f_squared_im: f64,
    pub ln_f: f64,
}

/// `A0 = (3/8)(k0 - 1/k0)^2`.
pub fn soliton_amplitude(k0: f64) -> f64 {
    0.375 * (k0 - k0.recip()).powi(2)
}

/// `c0 = (k0 + 1/k0)/2`.
pub fn soliton_speed(k0: f64) -> f64 {
    0.5 * (k0 + k0.recip())
}

/// Tolerance on `Im f^2 / |f^2|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

/// Assemble `A0`, `c0` and `ln f_{k0}` from the zero, its norming constant and the `delta` table.
pub fn soliton_asymptote(k0: f64, c_k0: C, delta: &DeltaTable) -> Result<SolitonAsymptote> {
    if !(k0 > 1.0) {
        return Err(Error::Domain(format!("k0 must exceed 1, got {k0}")));
    }
    let w = omega();
    let pref = C::new(0.0, 1.0) * w * w * (k0 * k0 - w * w) * c_k0 / (SQRT3 * k0 * (k0 * k0 - 1.0));
    let f2 = pref * delta.delta33(w * w * k0)? / delta.delta33(w * k0)?;
    let rel = f2.im.abs() / f2.norm();
    if !(f2.re > 0.0 && rel <= SYMMETRY_TOLERANCE) {
        return Err(Error::SymmetryViolation {
            value: f2,
            relative_imag: rel,
        });
    }
    Ok(SolitonAsymptote {
        k0,
        a0: soliton_amplitude(k0),
        c0: soliton_speed(k0),
        f_squared_re: f2.re,
        f_squared_im: f2.im,
        ln_f: 0.5 * f2.re.ln(),
    })
}

impl SolitonAsymptote {
    /// `A0 sech^2(sqrt(A0/6)(x - c0 t) - ln f)`.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let z = (self.a0 / 6.0).sqrt() * (x - self.c0 * t) - self.ln_f;
        let c = z.cosh();
        self.a0 / (c * c)
    }

    /// Position offset `x0 = sqrt(6/A0) ln f`.
    pub fn x0(&self) -> f64 {
        (6.0 / self.a0).sqrt() * self.ln_f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn k2_at_zero() {
        let s = sector_point(0.0).unwrap();
        let expect = -(2f64.sqrt() / 2.0) * C::new(1.0, 1.0);
        assert!((s.k2 - expect).norm() < 1e-15);
        assert!((s.k2.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn k2_on_unit_circle() {
        for i in 0..100 {
            let z = 0.0099 * i as f64;
            assert!((k2(z).norm() - 1.0).abs() < 1e-12, "zeta {z}");
        }
        assert!((k2(0.5).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k2_is_critical_point() {
        // y = k + 1/k solves y^2 - zeta y - 2 = 0
        for z in [0.1, 0.4, 0.8] {
            let k = k2(z);
            let y = k + k.inv();
            assert!((y * y - z * y - 2.0).norm() < 1e-12);
            let k = k4(z);
            let y = k + k.inv();
            assert!((y * y - z * y - 2.0).norm() < 1e-12);
        }
        assert!(k4(1.5).im == 0.0);
        assert!((k4(0.7).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z2_branch() {
        for i in 0..20 {
            let z = 0.05 + 0.045 * i as f64;
            let s = sector_point(z).unwrap();
            let q = C::new(0.0, -1.0) * omega() * omega() * s.k2 * s.z2_star;
            assert!(q.re > 0.0 && q.im.abs() < 1e-10 * q.re, "zeta {z}: {q}");
        }
        assert!(sector_point(1.0).is_err());
    }

    #[test]
    fn rtilde_values() {
        let w = omega();
        assert!(rtilde(w).unwrap().norm() < 1e-15);
        assert!((rtilde(C::new(0.0, 0.0)).unwrap() - w * w).norm() < 1e-15);
        // unimodular on the real axis, real on the unit circle
        for x in [-3.0, -0.4, 0.2, 1.7] {
            assert_relative_eq!(rtilde(C::new(x, 0.0)).unwrap().norm(), 1.0, epsilon = 1e-14);
        }
        for th in [0.3, 1.1, 2.5, 4.0] {
            let r = rtilde(C::from_polar(1.0, th)).unwrap();
            assert!(r.im.abs() < 1e-14 * r.norm());
        }
        assert!(rtilde(w.inv()).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-14);
        let i12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(i12, 2.0 / 13.0, epsilon = 1e-14);
        let (x, w) = gauss_legendre(64);
        let e: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert_relative_eq!(e, 1f64.exp() - (-1f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn no_soliton_no_shift() {
        assert_eq!(phase_shift_k2(0.5, None).unwrap(), 0.0);
        let s = phase_shift_k2(0.5, Some(1.1755)).unwrap();
        assert!(s.is_finite() && s > -PI && s <= PI);
        let s4 = phase_shift_k4(0.7, Some(1.1755)).unwrap();
        assert!(s4.is_finite());
    }

    #[test]
    fn phase_factor_conjugation() {
        // P(conj k) = 1 / conj(P(k)), so arg P(conj k) = arg P(k)
        let k0 = 1.1755;
        for k in [C::new(0.3, 0.8), C::new(-1.2, 0.4), C::new(2.0, -0.1)] {
            let a = phase_factor(k, k0).unwrap();
            let b = phase_factor(k.conj(), k0).unwrap();
            assert!((b - a.conj().inv()).norm() < 1e-12);
        }
    }

    #[test]
    fn trivial_delta() {
        let t = DeltaTable::trivial();
        assert_eq!(t.delta(C::new(2.0, 1.0)).unwrap(), C::new(1.0, 0.0));
        let z = DeltaTable::build(
            &PotentialSampler::zero(),
            C::new(-1.0, 0.0),
            16,
            &ScatteringOptions::fast(),
        )
        .unwrap();
        assert!((z.delta(C::new(0.2, 0.3)).unwrap() - 1.0).norm() < 1e-15);
        let empty = DeltaTable::build(
            &PotentialSampler::zero(),
            C::new(0.0, 1.0),
            16,
            &ScatteringOptions::fast(),
        )
        .unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn soliton_constants() {
        let a0 = soliton_amplitude(1.1755);
        let c0 = soliton_speed(1.1755);
        assert!((a0 - 0.03955).abs() < 5e-5);
        assert!((c0 - 1.0131).abs() < 5e-5);
        assert_relative_eq!(c0, (1.0 + 2.0 * a0 / 3.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn asymptote_peak_and_shape() {
        let s = soliton_asymptote(1.2, C::new(0.0, 0.0), &DeltaTable::trivial());
        assert!(matches!(s, Err(Error::SymmetryViolation { .. })));
        let w = omega();
        // choose c so that the prefactor is exactly 2
        let k0 = 1.2;
        let c = 2.0 * SQRT3 * k0 * (k0 * k0 - 1.0) / (C::new(0.0, 1.0) * w * w * (k0 * k0 - w * w));
        let s = soliton_asymptote(k0, c, &DeltaTable::trivial()).unwrap();
        assert_relative_eq!(s.ln_f, 0.5 * 2f64.ln(), epsilon = 1e-14);
        let t = 1e4;
        let x = s.c0 * t + s.x0();
        assert_relative_eq!(s.value(x, t), s.a0, epsilon = 1e-15);
    }
}
