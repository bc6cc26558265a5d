//! Multiple-reflections expansions.
//!
//! With `u = b_pp a_plus` and `v = b_pm a_minus` the transmission amplitude
//! `1/(u + v)` expands in two geometric series:
//!
//! ```text
//! convergent: s_n = (1/u) (-v/u)^n
//! divergent:  s_n = (1/v) (-u/v)^n
//! ```
//!
//! For a sharp barrier the divergent series is the convergent one with
//! `q -> -q`. Its terms blow up at `p = q` unless `p - q` is shifted to
//! `p - q + i delta`.

use crate::amplitudes::MatchingCoefficients;
use crate::error::{Error, Result};
use crate::numerics::{is_finite, Complex64, I};
use crate::potentials::{barrier_momentum, momentum_slope, BarrierSpec, DispersionRegime};

const CONVERGENT_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MreBranch {
    Convergent,
    Divergent,
}

impl MreBranch {
    /// `+1` for the convergent branch, `-1` for its `q -> -q` partner.
    pub fn sigma(self) -> f64 {
        match self {
            MreBranch::Convergent => 1.0,
            MreBranch::Divergent => -1.0,
        }
    }
}

/// One term of an expansion. `weight` and `shift` are the stationary-phase
/// packet weight and displacement; they are present only for packet terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MreTerm {
    pub n: usize,
    pub branch: MreBranch,
    pub t_n: Complex64,
    pub weight: Option<Complex64>,
    pub shift: Option<f64>,
}

/// Series ratio and leading term for the chosen branch.
pub fn series_parts(m: &MatchingCoefficients, branch: MreBranch, p: f64) -> Result<(Complex64, Complex64)> {
    let (lead, other) = match branch {
        MreBranch::Convergent => (m.u(), m.v()),
        MreBranch::Divergent => (m.v(), m.u()),
    };
    if lead.norm() < 1e-300 || !is_finite(lead) {
        return Err(match branch {
            MreBranch::Divergent => Error::PoleOnAxis { p },
            MreBranch::Convergent => Error::DegenerateDenominator { p },
        });
    }
    Ok((1.0 / lead, -other / lead))
}

/// `s_0 .. s_{n_max}` of the geometric series. The convergent branch stops
/// early once a term drops below `1e-14` of the running sum.
pub fn series_terms(m: &MatchingCoefficients, branch: MreBranch, p: f64, n_max: usize) -> Result<Vec<Complex64>> {
    let (first, ratio) = series_parts(m, branch, p)?;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut term = first;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..=n_max {
        if n > 0 {
            term *= ratio;
        }
        sum += term;
        out.push(term);
        if branch == MreBranch::Convergent && term.norm() < CONVERGENT_CUTOFF * sum.norm() {
            break;
        }
    }
    Ok(out)
}

fn check_pole(p: f64, q: Complex64, branch: MreBranch, delta: f64) -> Result<()> {
    if branch == MreBranch::Divergent && delta == 0.0 && (p - q).norm() < 1e-12 {
        return Err(Error::PoleOnAxis { p });
    }
    if delta < 0.0 {
        return Err(Error::InvalidParameter(format!("pole shift must be non-negative, got {delta}")));
    }
    Ok(())
}

fn rect_coefficients(p: f64, q: Complex64, branch: MreBranch, delta: f64) -> Result<MatchingCoefficients> {
    check_pole(p, q, branch, delta)?;
    let delta = if branch == MreBranch::Divergent { delta } else { 0.0 };
    Ok(MatchingCoefficients::rectangular(p, q, delta))
}

fn bare_terms(values: Vec<Complex64>, branch: MreBranch) -> Vec<MreTerm> {
    values.into_iter().enumerate().map(|(n, t_n)| MreTerm { n, branch, t_n, weight: None, shift: None }).collect()
}

/// Transmission terms `T_n = s_n` for a sharp barrier.
pub fn mre_transmission_terms(
    p: f64,
    q: Complex64,
    branch: MreBranch,
    n_max: usize,
    delta: f64,
) -> Result<Vec<MreTerm>> {
    let m = rect_coefficients(p, q, branch, delta)?;
    Ok(bare_terms(series_terms(&m, branch, p, n_max)?, branch))
}

/// Reflection terms grouped by phase: term `m` collects the pieces that
/// leave the left edge after `m` round trips inside the barrier.
pub fn reflection_series(m: &MatchingCoefficients, branch: MreBranch, p: f64, n_max: usize) -> Result<Vec<Complex64>> {
    let s = series_terms(m, branch, p, n_max)?;
    let fwd = m.b_mp * m.a_plus;
    let bwd = m.b_mm * m.a_minus;
    let (lead, lag) = match branch {
        MreBranch::Convergent => (fwd, bwd),
        MreBranch::Divergent => (bwd, fwd),
    };
    let mut out = Vec::with_capacity(s.len() + 1);
    for k in 0..=s.len() {
        let here = s.get(k).map_or(Complex64::new(0.0, 0.0), |&x| lead * x);
        let prev = if k > 0 { lag * s[k - 1] } else { Complex64::new(0.0, 0.0) };
        out.push(here + prev);
    }
    // the last entry is the lagging half of the truncated tail
    Ok(out)
}

pub fn mre_reflection_terms(p: f64, q: Complex64, branch: MreBranch, n_max: usize, delta: f64) -> Result<Vec<MreTerm>> {
    let m = rect_coefficients(p, q, branch, delta)?;
    let mut r = reflection_series(&m, branch, p, n_max)?;
    r.truncate(n_max + 1);
    Ok(bare_terms(r, branch))
}

/// Stationary-phase packet terms around the central momentum `p0`.
///
/// Term `n` of the transmitted wave is approximated by `X_n psi_0(x - x_n, t)`
/// with `x_n = 1 - sigma (2n + 1) dQ/dP` and `X_n = T_n(p0) e^{i p0 x_n}`.
pub fn packet_weights_and_shifts(
    p0: f64,
    spec: &BarrierSpec,
    regime: &DispersionRegime,
    branch: MreBranch,
    n_max: usize,
    delta: f64,
) -> Result<Vec<MreTerm>> {
    let q0 = barrier_momentum(p0, spec, regime);
    if q0.im != 0.0 || q0.re <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "stationary-phase shifts need a propagating interior momentum, got Q0 = {q0}"
        )));
    }
    let slope = momentum_slope(p0, spec, regime).re;
    let delta = match (spec.steepness(), branch) {
        (None, MreBranch::Divergent) => delta,
        _ => 0.0,
    };
    if spec.steepness().is_none() {
        check_pole(p0, q0, branch, delta)?;
    }
    let m = MatchingCoefficients::for_barrier(p0, q0, spec, regime, delta)?;
    let s = series_terms(&m, branch, p0, n_max)?;
    Ok(s.into_iter()
        .enumerate()
        .map(|(n, t_n)| {
            let x_n = transmitted_shift(n, slope, branch);
            MreTerm { n, branch, t_n, weight: Some(t_n * (I * p0 * x_n).exp()), shift: Some(x_n) }
        })
        .collect())
}

/// `x_n = 1 - sigma (2n + 1) s` with `s = dQ/dP` at the central momentum.
pub fn transmitted_shift(n: usize, slope: f64, branch: MreBranch) -> f64 {
    1.0 - branch.sigma() * (2 * n + 1) as f64 * slope
}

/// Shift `y_m = -2 m sigma s` of the `m`-th reflected packet, which is
/// `psi_0(-x - y_m, t)`.
pub fn reflected_shift(m: usize, slope: f64, branch: MreBranch) -> f64 {
    -2.0 * m as f64 * branch.sigma() * slope
}

/// Time at which a free packet launched at `x0` and displaced by `shift`
/// puts its centre at `at`.
pub fn crossing_time(x0: f64, shift: f64, velocity: f64, at: f64) -> f64 {
    (at - x0 - shift) / velocity
}
