//! Barrier shapes and dispersion relations in barrier-width units.
//!
//! Lengths are measured in units of the barrier width `d` (so `d = 1` and a
//! rectangular barrier occupies `[0, 1]`), times in `d/c`, momenta in
//! `hbar/d`, energies and potentials in `hbar c/d`. With these units the
//! mass enters only through `M = m d c / hbar`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Schrodinger,
    KleinGordon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRegime {
    pub regime: Regime,
    pub mass: f64,
}

impl DispersionRegime {
    pub fn klein_gordon(mass: f64) -> Result<Self> {
        Self::new(Regime::KleinGordon, mass)
    }

    pub fn schrodinger(mass: f64) -> Result<Self> {
        Self::new(Regime::Schrodinger, mass)
    }

    pub fn new(regime: Regime, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { regime, mass })
    }

    /// `sqrt(P^2 + M^2)` or the kinetic `P^2 / 2M`.
    pub fn energy(&self, p: f64) -> f64 {
        match self.regime {
            Regime::KleinGordon => p.hypot(self.mass),
            Regime::Schrodinger => p * p / (2.0 * self.mass),
        }
    }

    pub fn group_velocity(&self, p: f64) -> f64 {
        match self.regime {
            Regime::KleinGordon => p / self.energy(p),
            Regime::Schrodinger => p / self.mass,
        }
    }

    /// `d^2E/dP^2`, used for packet-spreading estimates.
    pub fn dispersion_curvature(&self, p: f64) -> f64 {
        match self.regime {
            Regime::KleinGordon => self.mass * self.mass / self.energy(p).powi(3),
            Regime::Schrodinger => 1.0 / self.mass,
        }
    }

    /// Positive momentum with the given energy, if any.
    pub fn momentum_for_energy(&self, e: f64) -> Result<f64> {
        let p2 = match self.regime {
            Regime::KleinGordon => e * e - self.mass * self.mass,
            Regime::Schrodinger => 2.0 * self.mass * e,
        };
        if !(p2 > 0.0) {
            return Err(Error::InvalidParameter(format!("energy {e} is below the propagation threshold")));
        }
        Ok(p2.sqrt())
    }

    /// Charge density carried by a plane wave of unit amplitude at energy `e`
    /// in a region of constant potential `w`.
    pub fn plane_wave_density(&self, e: f64, w: f64) -> f64 {
        match self.regime {
            Regime::KleinGordon => (e - w) / self.mass,
            Regime::Schrodinger => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BarrierShape {
    Rectangular,
    SmoothTanh { steepness: f64 },
}

/// Barrier of height `height` (negative for a well) on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub shape: BarrierShape,
    pub height: f64,
}

impl BarrierSpec {
    pub fn rectangular(height: f64) -> Result<Self> {
        let spec = Self { shape: BarrierShape::Rectangular, height };
        spec.validate()?;
        Ok(spec)
    }

    pub fn smooth(height: f64, steepness: f64) -> Result<Self> {
        let spec = Self { shape: BarrierShape::SmoothTanh { steepness }, height };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.height.is_finite() {
            return Err(Error::InvalidParameter("barrier height must be finite".into()));
        }
        if let BarrierShape::SmoothTanh { steepness } = self.shape {
            if !(steepness.is_finite() && steepness > 0.0) {
                return Err(Error::InvalidParameter(format!("steepness must be positive, got {steepness}")));
            }
        }
        Ok(())
    }

    pub fn steepness(&self) -> Option<f64> {
        match self.shape {
            BarrierShape::SmoothTanh { steepness } => Some(steepness),
            BarrierShape::Rectangular => None,
        }
    }

    /// Pole shift `W^2 / 2b` of a smooth barrier.
    pub fn pole_shift(&self) -> Option<f64> {
        self.steepness().map(|b| self.height * self.height / (2.0 * b))
    }

    /// Half-width of the zones around `X = 0, 1` where the asymptotic
    /// matching solutions do not hold.
    pub fn edge_zone(&self) -> f64 {
        self.steepness().map_or(0.0, |b| 5.0 / b)
    }
}

/// Converts the smoothing parameter quoted as `bM/d` into the steepness `b`
/// (in units of `1/d`): the edge width `1/b` is `1/(bM/d)` Compton wavelengths.
pub fn steepness_from_compton_ratio(b_m_over_d: f64, mass: f64) -> f64 {
    b_m_over_d * mass
}

pub fn energy(p: f64, regime: &DispersionRegime) -> f64 {
    regime.energy(p)
}

/// Momentum inside the barrier plateau. Propagating: non-negative real root;
/// evanescent: `+i sqrt(|radicand|)`.
pub fn barrier_momentum(p: f64, spec: &BarrierSpec, regime: &DispersionRegime) -> Complex64 {
    let r = interior_radicand(p, spec.height, regime);
    if r >= 0.0 {
        c(r.sqrt(), 0.0)
    } else {
        c(0.0, (-r).sqrt())
    }
}

fn interior_radicand(p: f64, w: f64, regime: &DispersionRegime) -> f64 {
    let m = regime.mass;
    match regime.regime {
        Regime::Schrodinger => p * p - 2.0 * m * w,
        Regime::KleinGordon => {
            let e = regime.energy(p);
            // (E - W)^2 - M^2 factored to limit cancellation
            (e - w - m) * (e - w + m)
        }
    }
}

/// `dQ/dP` along the interior dispersion branch.
pub fn momentum_slope(p: f64, spec: &BarrierSpec, regime: &DispersionRegime) -> Complex64 {
    let q = barrier_momentum(p, spec, regime);
    match regime.regime {
        Regime::Schrodinger => p / q,
        Regime::KleinGordon => {
            let e = regime.energy(p);
            (e - spec.height) * p / (e * q)
        }
    }
}

/// True when the interior supports propagating antiparticles (`E - W < -M`).
pub fn is_supercritical(p: f64, spec: &BarrierSpec, regime: &DispersionRegime) -> bool {
    regime.regime == Regime::KleinGordon && regime.energy(p) - spec.height < -regime.mass
}

pub fn potential_profile(x: f64, spec: &BarrierSpec) -> f64 {
    match spec.shape {
        BarrierShape::Rectangular => {
            if (0.0..=1.0).contains(&x) {
                spec.height
            } else {
                0.0
            }
        }
        BarrierShape::SmoothTanh { steepness: b } => 0.5 * spec.height * ((b * x).tanh() - (b * (x - 1.0)).tanh()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_examples() {
        let kg = DispersionRegime::klein_gordon(2000.0).unwrap();
        assert_eq!(kg.energy(0.0), 2000.0);
        // sqrt(4_000_400) to 12 digits
        assert!((kg.energy(20.0) - 2000.099_997_500_312).abs() < 1e-9);
        let sch = DispersionRegime::schrodinger(2000.0).unwrap();
        assert!((sch.energy(20.0) - 0.1).abs() < 1e-15);
        assert!(DispersionRegime::klein_gordon(0.0).is_err());
    }

    #[test]
    fn barrier_momentum_examples() {
        let kg = DispersionRegime::klein_gordon(2000.0).unwrap();
        let free = BarrierSpec::rectangular(0.0).unwrap();
        assert!((barrier_momentum(20.0, &free, &kg) - c(20.0, 0.0)).norm() < 1e-9);

        let sk = BarrierSpec::rectangular(2.0 * kg.energy(20.0)).unwrap();
        assert!((barrier_momentum(20.0, &sk, &kg) - c(20.0, 0.0)).norm() < 1e-9);

        let m = 2.0e4;
        let kg = DispersionRegime::klein_gordon(m).unwrap();
        let spec = BarrierSpec::rectangular(2.0 * 2f64.sqrt() * m).unwrap();
        let p = kg.momentum_for_energy(spec.height / 2.0).unwrap();
        assert!((p - m).abs() < 1e-8 * m);
        assert!((barrier_momentum(p, &spec, &kg).re - m).abs() < 1e-6 * m);

        // evanescent branch decays to the right
        let sub = BarrierSpec::rectangular(1.0).unwrap();
        let kg = DispersionRegime::klein_gordon(2000.0).unwrap();
        let q = barrier_momentum(20.0, &sub, &kg);
        assert!(q.re == 0.0 && q.im > 59.0 && q.im < 61.0);
    }

    #[test]
    fn profile_examples() {
        let rect = BarrierSpec::rectangular(3.0).unwrap();
        assert_eq!(potential_profile(0.5, &rect), 3.0);
        assert_eq!(potential_profile(-0.1, &rect), 0.0);
        assert_eq!(potential_profile(1.1, &rect), 0.0);

        let b = 40.0;
        let smooth = BarrierSpec::smooth(3.0, b).unwrap();
        assert!((potential_profile(0.5, &smooth) - 3.0).abs() <= 3.0 * (-b).exp());
        let at_edge = potential_profile(0.0, &smooth);
        assert!((at_edge - 1.5 * b.tanh()).abs() < 1e-14);
        assert!((at_edge - 1.5).abs() < 1e-12);
        assert!(BarrierSpec::smooth(1.0, 0.0).is_err());
    }

    #[test]
    fn supercritical_detection() {
        let kg = DispersionRegime::klein_gordon(10.0).unwrap();
        let p = 5.0;
        let e = kg.energy(p);
        assert!(is_supercritical(p, &BarrierSpec::rectangular(2.0 * e).unwrap(), &kg));
        assert!(!is_supercritical(p, &BarrierSpec::rectangular(e).unwrap(), &kg));
        let slope = momentum_slope(p, &BarrierSpec::rectangular(2.0 * e).unwrap(), &kg);
        assert!((slope - c(-1.0, 0.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn super_klein_identity(p in 0.1f64..5000.0, m in 0.5f64..30000.0) {
            let kg = DispersionRegime::klein_gordon(m).unwrap();
            let spec = BarrierSpec::rectangular(2.0 * kg.energy(p)).unwrap();
            let q = barrier_momentum(p, &spec, &kg);
            prop_assert!((q - p).norm() < 1e-10 * p.max(1.0) * (1.0 + m / p).min(1e4));
        }

        #[test]
        fn momentum_modulus_continuous(w in 1.0f64..50.0, m in 1.0f64..20.0) {
            let kg = DispersionRegime::klein_gordon(m).unwrap();
            let spec = BarrierSpec::rectangular(w).unwrap();
            let mut prev = barrier_momentum(0.01, &spec, &kg).norm();
            let mut p = 0.01;
            while p < 60.0 {
                p += 0.001;
                let cur = barrier_momentum(p, &spec, &kg).norm();
                // |Q|^2 is continuous with bounded slope, so |Q| has no jumps
                prop_assert!((cur - prev).abs() < 0.5, "jump at p={}", p);
                prev = cur;
            }
        }

        #[test]
        fn smooth_profile_converges_to_rectangle(x in -2.0f64..3.0) {
            prop_assume!(x.abs() > 0.02 && (x - 1.0).abs() > 0.02);
            let rect = BarrierSpec::rectangular(2.0).unwrap();
            let smooth = BarrierSpec::smooth(2.0, 2000.0).unwrap();
            prop_assert!((potential_profile(x, &smooth) - potential_profile(x, &rect)).abs() < 1e-12);
        }
    }
}
