//! Charge density, regional charges, packet tracking and time estimators.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{integrate_interval, integrate_one_sided, Complex64, Grid1D};
use crate::potentials::{DispersionRegime, Regime};
use crate::wavepacket::FieldSnapshot;

/// Klein-Gordon charge density `(1/M) [-Im(psi* psi_T) - W |psi|^2]`;
/// `|psi|^2` for the Schrodinger regime.
///
/// For fields stored in a frame rotating at `E_ref`, pass `W - E_ref` as the
/// potential and the frame time derivative.
pub fn charge_density(
    psi: &[Complex64],
    psi_t: &[Complex64],
    potential: &[f64],
    regime: &DispersionRegime,
) -> Result<Vec<f64>> {
    if psi_t.len() != psi.len() {
        return Err(Error::GridMismatch { expected: psi.len(), got: psi_t.len() });
    }
    if potential.len() != psi.len() {
        return Err(Error::GridMismatch { expected: psi.len(), got: potential.len() });
    }
    Ok(match regime.regime {
        Regime::Schrodinger => psi.iter().map(|z| z.norm_sqr()).collect(),
        Regime::KleinGordon => psi
            .iter()
            .zip(psi_t)
            .zip(potential)
            .map(|((f, ft), w)| (-(f.conj() * ft).im - w * f.norm_sqr()) / regime.mass)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeReport {
    pub total: f64,
    pub interior: f64,
    pub exterior_left: f64,
    pub exterior_right: f64,
    /// Density at the grid ends exceeds `1e-6` of its peak.
    pub truncated: bool,
}

/// Integrals of `rho` over `X < 0`, `[0, 1]`, `X > 1` and the whole grid.
pub fn total_charge(rho: &[f64], grid: &Grid1D) -> Result<ChargeReport> {
    // one-sided sums: rho jumps at the edges of a rectangular barrier
    let left = integrate_one_sided(rho, grid, f64::NEG_INFINITY, 0.0)?;
    let interior = integrate_one_sided(rho, grid, 0.0, 1.0)?;
    let right = integrate_one_sided(rho, grid, 1.0, f64::INFINITY)?;
    let peak = rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let edge = rho[0].abs().max(rho[rho.len() - 1].abs());
    let truncated = peak > 0.0 && edge > 1e-6 * peak;
    if truncated {
        warn!("charge density at the grid boundary is {:.2e} of its peak", edge / peak);
    }
    Ok(ChargeReport { total: left + interior + right, interior, exterior_left: left, exterior_right: right, truncated })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSelector {
    All,
    Left,
    Interior,
    Right,
    Range(f64, f64),
}

impl RegionSelector {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            RegionSelector::All => (f64::NEG_INFINITY, f64::INFINITY),
            RegionSelector::Left => (f64::NEG_INFINITY, 0.0),
            RegionSelector::Interior => (0.0, 1.0),
            RegionSelector::Right => (1.0, f64::INFINITY),
            RegionSelector::Range(a, b) => (a, b),
        }
    }
}

/// `int X |rho| / int |rho|` over the region.
pub fn center_of_mass(rho: &[f64], grid: &Grid1D, region: RegionSelector) -> Result<f64> {
    let (a, b) = region.bounds();
    let abs: Vec<f64> = rho.iter().map(|r| r.abs()).collect();
    let weighted: Vec<f64> = abs.iter().enumerate().map(|(i, r)| grid.point(i) * r).collect();
    let mass = integrate_interval(&abs, grid, a, b)?;
    if !(mass >= 1e-12) {
        return Err(Error::EmptyRegion { charge: mass });
    }
    Ok(integrate_interval(&weighted, grid, a, b)? / mass)
}

/// Position of the largest `|rho|` in the region, refined by a parabola
/// through the maximum and its neighbours.
pub fn peak_position(rho: &[f64], grid: &Grid1D, region: RegionSelector) -> Option<f64> {
    let (a, b) = region.bounds();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rho.iter().enumerate() {
        let x = grid.point(i);
        if x < a || x > b {
            continue;
        }
        if best.is_none_or(|(_, m)| r.abs() > m) {
            best = Some((i, r.abs()));
        }
    }
    let (i, _) = best?;
    let x = grid.point(i);
    if i == 0 || i + 1 >= rho.len() {
        return Some(x);
    }
    let (l, m, r) = (rho[i - 1].abs(), rho[i].abs(), rho[i + 1].abs());
    let den = l - 2.0 * m + r;
    if den == 0.0 {
        return Some(x);
    }
    Some(x + 0.5 * (l - r) / den * grid.spacing())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackReport {
    pub times: Vec<f64>,
    pub com: Vec<f64>,
    pub peak: Vec<f64>,
    pub reference_com: Vec<f64>,
    /// Fraction of `|rho|` at `X <= 1`.
    pub barrier_fraction: Vec<f64>,
}

impl TrackReport {
    /// Linear interpolation of the centre of mass at `t`.
    pub fn com_at(&self, t: f64) -> Result<f64> {
        interpolate(&self.times, &self.com, t)
    }

    /// First time the centre of mass crosses `level` upwards.
    pub fn crossing(&self, level: f64) -> Result<f64> {
        for k in 1..self.times.len() {
            let (a, b) = (self.com[k - 1] - level, self.com[k] - level);
            if a <= 0.0 && b > 0.0 {
                let f = a / (a - b);
                return Ok(self.times[k - 1] + f * (self.times[k] - self.times[k - 1]));
            }
        }
        Err(Error::EventNotFound(format!(
            "centre of mass does not cross X = {level} between T = {} and T = {}",
            self.times.first().copied().unwrap_or(f64::NAN),
            self.times.last().copied().unwrap_or(f64::NAN)
        )))
    }

    /// Time the centre of mass reaches `level`. When it already lies beyond
    /// `level` at the first sample the motion is extrapolated backwards
    /// from the first two samples, so the result may precede the track.
    pub fn emergence(&self, level: f64) -> Result<f64> {
        if self.com.len() >= 2 && self.com[0] > level {
            let v = (self.com[1] - self.com[0]) / (self.times[1] - self.times[0]);
            if v > 0.0 {
                return Ok(self.times[0] - (self.com[0] - level) / v);
            }
        }
        self.crossing(level)
    }
}

fn interpolate(ts: &[f64], ys: &[f64], t: f64) -> Result<f64> {
    let outside = || Error::InvalidParameter(format!("T = {t} is outside the tracked interval"));
    let k = ts.iter().position(|&s| s >= t).ok_or_else(outside)?;
    if ts[k] == t {
        return Ok(ys[k]);
    }
    if k == 0 {
        return Err(outside());
    }
    let f = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    Ok(ys[k - 1] + f * (ys[k] - ys[k - 1]))
}

pub fn track(
    snapshots: &[FieldSnapshot],
    region: RegionSelector,
    reference: Option<&[FieldSnapshot]>,
) -> Result<TrackReport> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidParameter("tracking needs at least two snapshots".into()));
    }
    if snapshots.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(Error::InvalidParameter("snapshot times must increase strictly".into()));
    }
    let mut out = TrackReport::default();
    for s in snapshots {
        out.times.push(s.time);
        out.com.push(center_of_mass(&s.rho, &s.grid, region)?);
        out.peak.push(peak_position(&s.rho, &s.grid, region).unwrap_or(f64::NAN));
        let abs: Vec<f64> = s.rho.iter().map(|r| r.abs()).collect();
        let all = integrate_interval(&abs, &s.grid, f64::NEG_INFINITY, f64::INFINITY)?;
        let inside = integrate_interval(&abs, &s.grid, f64::NEG_INFINITY, 1.0)?;
        out.barrier_fraction.push(if all > 0.0 { inside / all } else { 0.0 });
    }
    if let Some(refs) = reference {
        if refs.len() != snapshots.len() {
            return Err(Error::GridMismatch { expected: snapshots.len(), got: refs.len() });
        }
        for (s, r) in snapshots.iter().zip(refs) {
            if s.time != r.time {
                return Err(Error::InvalidParameter("reference run sampled at different times".into()));
            }
            out.reference_com.push(center_of_mass(&r.rho, &r.grid, RegionSelector::All)?);
        }
    }
    Ok(out)
}

/// `COM(transmitted) - COM(reference)` at `t_final`.
pub fn advancement(transmitted: &TrackReport, reference: &TrackReport, t_final: f64) -> Result<f64> {
    if transmitted.times != reference.times {
        return Err(Error::InvalidParameter("tracks sampled at different times".into()));
    }
    let fraction = interpolate(&transmitted.times, &transmitted.barrier_fraction, t_final)?;
    if fraction > 0.01 {
        return Err(Error::NotClear { fraction });
    }
    Ok(transmitted.com_at(t_final)? - reference.com_at(t_final)?)
}

/// `T_exit - T_entry`: the transmitted packet's centre crosses `X = 1`, the
/// incident packet's centre crosses `X = 0`.
pub fn dwell_time(incident: &TrackReport, transmitted: &TrackReport) -> Result<f64> {
    let entry = incident.crossing(0.0)?;
    let exit = transmitted.crossing(1.0)?;
    Ok(exit - entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, trapezoid, I};
    use crate::potentials::BarrierSpec;
    use crate::wavepacket::{synthesize, PacketSpec, SolutionKind, SynthesisOptions, Synthesizer};
    use proptest::prelude::*;

    fn kg(m: f64) -> DispersionRegime {
        DispersionRegime::klein_gordon(m).unwrap()
    }

    fn snap(grid: Grid1D, t: f64, rho: Vec<f64>) -> FieldSnapshot {
        let n = grid.len();
        FieldSnapshot {
            grid,
            time: t,
            psi: vec![c(0.0, 0.0); n],
            rho,
            reference_energy: 0.0,
            interpolated: vec![false; n],
        }
    }

    #[test]
    fn plane_wave_densities() {
        let regime = kg(3.0);
        let (p, x, t) = (4.0, 0.3, 0.7);
        let e = regime.energy(p);
        let psi = (I * (p * x - e * t)).exp();
        let rho = charge_density(&[psi], &[-I * e * psi], &[0.0], &regime).unwrap();
        assert!((rho[0] - e / 3.0).abs() < 1e-14);
        // antiparticle mode inside a barrier: rho = (E - W)/M < 0
        let w = 2.0 * e;
        let rho = charge_density(&[psi], &[-I * e * psi], &[w], &regime).unwrap();
        assert!((rho[0] - (e - w) / 3.0).abs() < 1e-14 && rho[0] < 0.0);
        assert!(charge_density(&[psi], &[], &[0.0], &regime).is_err());
    }

    #[test]
    fn zero_field_charges() {
        let grid = Grid1D::new(-2.0, 3.0, 51).unwrap();
        let r = total_charge(&vec![0.0; 51], &grid).unwrap();
        assert_eq!((r.total, r.interior, r.exterior_left, r.exterior_right), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(center_of_mass(&vec![0.0; 51], &grid, RegionSelector::All), Err(Error::EmptyRegion { .. })));
    }

    #[test]
    fn free_track_slope_and_peak() {
        let regime = kg(2000.0);
        let spec = PacketSpec::new(20.0, 4.0, -2.5, regime).unwrap();
        let barrier = BarrierSpec::rectangular(0.0).unwrap();
        let opts = SynthesisOptions::default();
        let grid = Grid1D::new(-6.0, 4.0, 1001).unwrap();
        let syn = Synthesizer::new(SolutionKind::Free, &spec, &barrier, &opts, 300.0).unwrap();
        let snaps: Vec<_> = (0..4).map(|k| syn.snapshot(&grid, 100.0 * k as f64).unwrap()).collect();
        let tr = track(&snaps, RegionSelector::All, None).unwrap();
        let slope = (tr.com[3] - tr.com[0]) / 300.0;
        let v = 20.0 / regime.energy(20.0);
        assert!((slope / v - 1.0).abs() < 0.01);
        for (c, p) in tr.com.iter().zip(&tr.peak) {
            assert!((c - p).abs() < grid.spacing());
        }
        let adv = advancement(&tr, &tr, 300.0).unwrap_err();
        assert!(matches!(adv, Error::NotClear { .. }));
        let clear = track(&snaps, RegionSelector::All, None).unwrap();
        assert!(dwell_time(&clear, &clear).is_err());
    }

    #[test]
    fn emergence_extrapolates_backwards() {
        let tr = TrackReport { times: vec![1.0, 2.0, 3.0], com: vec![3.0, 4.0, 5.0], ..Default::default() };
        assert!((tr.emergence(1.0).unwrap() + 1.0).abs() < 1e-12);
        assert!((tr.emergence(4.5).unwrap() - 2.5).abs() < 1e-12);
        assert!(tr.emergence(9.0).is_err());
    }

    #[test]
    fn free_vs_free_advancement_is_zero() {
        let grid = Grid1D::new(0.0, 10.0, 101).unwrap();
        let bump = |c0: f64| -> Vec<f64> { grid.points().iter().map(|x| (-(x - c0).powi(2)).exp()).collect() };
        let snaps = vec![snap(grid, 0.0, bump(4.0)), snap(grid, 1.0, bump(5.0))];
        let tr = track(&snaps, RegionSelector::All, Some(&snaps)).unwrap();
        assert!(advancement(&tr, &tr, 1.0).unwrap().abs() < 1e-12);
        assert!((tr.reference_com[1] - 5.0).abs() < 1e-6);
        let stationary = vec![snap(grid, 0.0, bump(4.0)), snap(grid, 2.0, bump(4.0))];
        let st = track(&stationary, RegionSelector::All, None).unwrap();
        assert_eq!(st.com[0], st.com[1]);
        assert!(track(&snaps[..1], RegionSelector::All, None).is_err());
    }

    #[test]
    fn dwell_time_free_crossing() {
        // a packet moving at v: exit at X = 1 minus entry at X = 0 is 1/v
        let grid = Grid1D::new(-10.0, 10.0, 401).unwrap();
        let v = 0.25;
        let snaps: Vec<_> = (0..40)
            .map(|k| {
                let t = k as f64;
                let c0 = -4.0 + v * t;
                snap(grid, t, grid.points().iter().map(|x| (-(x - c0).powi(2)).exp()).collect())
            })
            .collect();
        let tr = track(&snaps, RegionSelector::All, None).unwrap();
        assert!((dwell_time(&tr, &tr).unwrap() - 1.0 / v).abs() < 1e-6);
    }

    #[test]
    fn normalized_free_packet_has_unit_charge() {
        let spec = PacketSpec::new(20.0, 4.0, -2.5, kg(2000.0)).unwrap();
        let grid = Grid1D::new(-7.0, 2.0, 1801).unwrap();
        let barrier = BarrierSpec::rectangular(0.0).unwrap();
        let s = synthesize(SolutionKind::Free, &spec, &barrier, &grid, 0.0, &SynthesisOptions::default()).unwrap();
        let r = total_charge(&s.rho, &grid).unwrap();
        assert!((r.total - 1.0).abs() < 1e-6);
        assert!(!r.truncated);
    }

    proptest! {
        #[test]
        fn partition_is_additive(vals in proptest::collection::vec(-5.0f64..5.0, 61), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let grid = Grid1D::new(-1.5, 2.5, 61).unwrap();
            let r = total_charge(&vals, &grid).unwrap();
            prop_assert_eq!(r.exterior_left + r.interior + r.exterior_right, r.total);
            // across the edges the one-sided sums agree with the plain trapezoid for linear data
            let line: Vec<f64> = grid.points().iter().map(|&x| a + b * x).collect();
            let r = total_charge(&line, &grid).unwrap();
            let direct = trapezoid(&line, &grid).unwrap();
            prop_assert!((r.total - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn density_is_real_and_linear_in_potential(re in -3.0f64..3.0, im in -3.0f64..3.0, w in -5.0f64..5.0) {
            let regime = kg(1.5);
            let psi = c(re, im);
            let dt = c(0.4, -1.1) * psi;
            let a = charge_density(&[psi], &[dt], &[w], &regime).unwrap()[0];
            let b = charge_density(&[psi], &[dt], &[0.0], &regime).unwrap()[0];
            prop_assert!(a.is_finite());
            prop_assert!((a - b + w * psi.norm_sqr() / 1.5).abs() < 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn advancement_shift_invariant(shift in -3.0f64..3.0) {
            let grid = Grid1D::new(-20.0, 20.0, 801).unwrap();
            let bump = |c0: f64| -> Vec<f64> { grid.points().iter().map(|x| (-(x - c0).powi(2)).exp()).collect() };
            let mk = |c0: f64, d: f64| vec![snap(grid, 0.0, bump(c0)), snap(grid, 1.0, bump(c0 + d))];
            let base = advancement(
                &track(&mk(5.0, 2.0), RegionSelector::All, None).unwrap(),
                &track(&mk(4.0, 2.0), RegionSelector::All, None).unwrap(), 1.0).unwrap();
            let moved = advancement(
                &track(&mk(5.0 + shift, 2.0), RegionSelector::All, None).unwrap(),
                &track(&mk(4.0 + shift, 2.0), RegionSelector::All, None).unwrap(), 1.0).unwrap();
            prop_assert!((base - moved).abs() < 1e-9);
        }
    }
}
