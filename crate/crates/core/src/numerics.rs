//! Complex Gamma function, uniform grids and trapezoidal quadrature.

use std::f64::consts::PI;

pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const POLE_TOLERANCE: f64 = 1e-14;

fn check_pole(z: Complex64) -> Result<()> {
    if z.re <= POLE_TOLERANCE {
        let k = z.re.round();
        if k <= 0.0 && (z - c(k, 0.0)).norm() < POLE_TOLERANCE {
            return Err(Error::GammaPole { z });
        }
    }
    Ok(())
}

fn ln_gamma_lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = c(LANCZOS_COEF[0], 0.0);
    for (i, &p) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `e^w - 1` without cancellation for small `|w|`.
fn exp_m1(w: Complex64) -> Complex64 {
    let (s, co) = w.im.sin_cos();
    let half = (0.5 * w.im).sin();
    c(w.re.exp_m1() * co - 2.0 * half * half, w.re.exp() * s)
}

/// `ln sin(pi z)` modulo `2 pi i`, stable for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return ln_sin_pi(z.conj()).conj();
    }
    // sin(pi z) = e^{-i pi z} (1 - e^{2 i pi z}) i/2
    -I * PI * z + c(0.0, 0.5).ln() + (-exp_m1(2.0 * I * PI * z)).ln()
}

/// Principal-sheet `ln Gamma(z)` up to a multiple of `2 pi i`.
pub fn complex_ln_gamma(z: Complex64) -> Result<Complex64> {
    if !is_finite(z) {
        return Err(Error::InvalidParameter(format!("non-finite Gamma argument {z}")));
    }
    check_pole(z)?;
    Ok(ln_gamma_unchecked(z))
}

fn ln_gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re >= 0.5 {
        ln_gamma_lanczos(z)
    } else if z.re >= -0.5 {
        ln_gamma_lanczos(z + 1.0) - z.ln()
    } else {
        PI.ln() - ln_sin_pi(z) - ln_gamma_unchecked(1.0 - z)
    }
}

pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    complex_ln_gamma(z).map(|l| l.exp())
}

/// `sin(pi z)` with the integer part removed first, so it is exactly zero at integers.
fn sin_pi(z: Complex64) -> Complex64 {
    let k = z.re.round();
    let s = (PI * (z - k)).sin();
    if k.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

/// `1/Gamma(z)`, an entire function: exactly zero at the poles of Gamma.
pub fn complex_recip_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 && z.im.abs() < 10.0 && z.re > -150.0 {
        if z.re >= -0.5 {
            return z * (-ln_gamma_lanczos(z + 1.0)).exp();
        }
        // 1/Gamma(z) = sin(pi z) Gamma(1 - z) / pi
        return sin_pi(z) * ln_gamma_lanczos(1.0 - z).exp() / PI;
    }
    if check_pole(z).is_err() {
        return c(0.0, 0.0);
    }
    (-ln_gamma_unchecked(z)).exp()
}

/// `prod Gamma(num) / prod Gamma(den)`, evaluated in log space where safe.
/// Denominator arguments at or near a pole contribute their (small)
/// reciprocal directly, so the ratio vanishes there instead of failing.
pub fn gamma_ratio(num: &[Complex64], den: &[Complex64]) -> Result<Complex64> {
    let mut log = c(0.0, 0.0);
    let mut factor = c(1.0, 0.0);
    for &z in num {
        log += complex_ln_gamma(z)?;
    }
    for &z in den {
        if !is_finite(z) {
            return Err(Error::InvalidParameter(format!("non-finite Gamma argument {z}")));
        }
        let k = z.re.round();
        if z.re < 0.5 && k <= 0.0 && (z - c(k, 0.0)).norm() < 0.25 {
            factor *= complex_recip_gamma(z);
        } else {
            log -= ln_gamma_unchecked(z);
        }
    }
    Ok(factor * log.exp())
}

/// Uniform grid `min, min + h, ..., max` with `n_points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    min: f64,
    max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(min: f64, max: f64, n_points: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min >= max {
            return Err(Error::InvalidGrid(format!("need min < max, got [{min}, {max}]")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Ok(Self { min, max, n_points })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }
}

/// Trapezoidal rule for complex samples on `grid`.
pub fn quad_weighted_sum(f: &[Complex64], grid: &Grid1D) -> Result<Complex64> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), got: f.len() });
    }
    let inner: Complex64 = f[1..f.len() - 1].iter().sum();
    Ok(grid.spacing() * (inner + 0.5 * (f[0] + f[f.len() - 1])))
}

/// Trapezoidal rule for real samples on `grid`.
pub fn trapezoid(f: &[f64], grid: &Grid1D) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), got: f.len() });
    }
    let inner: f64 = f[1..f.len() - 1].iter().sum();
    Ok(grid.spacing() * (inner + 0.5 * (f[0] + f[f.len() - 1])))
}

/// Integral of the piecewise-linear interpolant of `f` over `[a, b]`,
/// clipped to the grid. Additive over adjacent intervals.
pub fn integrate_interval(f: &[f64], grid: &Grid1D, a: f64, b: f64) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), got: f.len() });
    }
    let lo = a.max(grid.min());
    let hi = b.min(grid.max());
    if lo >= hi {
        return Ok(0.0);
    }
    let h = grid.spacing();
    let interp = |x: f64| {
        let s = ((x - grid.min()) / h).clamp(0.0, (grid.len() - 1) as f64);
        let i = (s.floor() as usize).min(grid.len() - 2);
        let w = s - i as f64;
        f[i] * (1.0 - w) + f[i + 1] * w
    };
    // nodes strictly inside (lo, hi)
    let first = ((lo - grid.min()) / h).floor() as usize + 1;
    let last = (((hi - grid.min()) / h).ceil() as usize).min(grid.len()).saturating_sub(1);
    let mut sum = 0.0;
    let mut x_prev = lo;
    let mut f_prev = interp(lo);
    for i in first..=last.min(grid.len() - 1) {
        let x = grid.point(i);
        if x <= lo || x >= hi {
            continue;
        }
        sum += 0.5 * (f_prev + f[i]) * (x - x_prev);
        x_prev = x;
        f_prev = f[i];
    }
    sum += 0.5 * (f_prev + interp(hi)) * (hi - x_prev);
    Ok(sum)
}

/// Integral over `[a, b]` using only nodes strictly inside, with the
/// integrand extrapolated linearly from inside to each end. Second order
/// for integrands that jump at `a` or `b`.
pub fn integrate_one_sided(f: &[f64], grid: &Grid1D, a: f64, b: f64) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), got: f.len() });
    }
    let lo = a.max(grid.min());
    let hi = b.min(grid.max());
    if lo >= hi {
        return Ok(0.0);
    }
    let h = grid.spacing();
    let tol = 1e-9 * h;
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let x = grid.point(i);
            (x > lo + tol || (a <= grid.min() && i == 0)) && (x < hi - tol || (b >= grid.max() && i + 1 == grid.len()))
        })
        .collect();
    let (Some(&i0), Some(&i1)) = (inside.first(), inside.last()) else {
        return integrate_interval(f, grid, lo, hi);
    };
    let mut sum: f64 = inside.windows(2).map(|w| 0.5 * (f[w[0]] + f[w[1]]) * h).sum();
    let edge = |i: usize, j: usize, x: f64| {
        let (xi, xj) = (grid.point(i), grid.point(j));
        f[i] + (f[j] - f[i]) * (x - xi) / (xj - xi)
    };
    let x0 = grid.point(i0);
    if x0 > lo {
        let fe = if inside.len() >= 2 { edge(i0, inside[1], lo) } else { f[i0] };
        sum += 0.5 * (fe + f[i0]) * (x0 - lo);
    }
    let x1 = grid.point(i1);
    if x1 < hi {
        let fe = if inside.len() >= 2 { edge(i1, inside[inside.len() - 2], hi) } else { f[i1] };
        sum += 0.5 * (fe + f[i1]) * (hi - x1);
    }
    Ok(sum)
}
