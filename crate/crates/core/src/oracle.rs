//! Finite-difference Klein-Gordon evolution, independent of the spectral code.
//!
//! The field is evolved in the gauge `chi = e^{i E_ref T} phi`, in which the
//! equation reads `chi_TT = -2i W' chi_T + chi_XX - (M^2 - W'^2) chi` with
//! `W' = W - E_ref`. The leapfrog update with the first-derivative term
//! centred in time,
//!
//! ```text
//! chi+ (1 + i W' dt) = 2 chi - chi- (1 - i W' dt) + dt^2 (D2 chi - (M^2 - W'^2) chi),
//! ```
//!
//! conserves the discrete charge
//! `Q = (dx/M) sum [-Im(chi-* chi)/dt - W' Re(chi-* chi)]` exactly on a closed grid.

use log::warn;

use crate::error::{Error, Result};
use crate::exec::{fill_indexed, Execution};
use crate::numerics::{Complex64, Grid1D, I};
use crate::potentials::{barrier_momentum, potential_profile, BarrierSpec, Regime};
use crate::wavepacket::{FieldSnapshot, PacketSpec, SolutionKind, SynthesisOptions, Synthesizer};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Zero field beyond the grid plus a damping layer over `fraction` of
    /// the grid at each end.
    Absorbing { fraction: f64 },
    /// Zero field beyond the grid.
    Dirichlet,
    /// Point `n - 1` neighbours point `0`; the period is `n dx`.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// `dt = dt_factor * dx`; must not exceed 0.5.
    pub dt_factor: f64,
    pub boundary: Boundary,
    /// Largest tolerated `max|chi| / initial max|chi|`.
    pub growth_allowance: f64,
    pub exec: Execution,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            dt_factor: 0.5,
            boundary: Boundary::Absorbing { fraction: 0.1 },
            growth_allowance: 1e6,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolverState {
    grid: Grid1D,
    time: f64,
    dt: f64,
    mass: f64,
    e_ref: f64,
    /// `W - E_ref` at each node.
    shifted: Vec<f64>,
    mask: Vec<f64>,
    chi: Vec<Complex64>,
    chi_prev: Vec<Complex64>,
    boundary: Boundary,
    exec: Execution,
    initial_peak: f64,
    allowance: f64,
    steps: u64,
}

fn peak(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

fn sponge(grid: &Grid1D, boundary: Boundary, dt: f64) -> Vec<f64> {
    let n = grid.len();
    let Boundary::Absorbing { fraction } = boundary else {
        return vec![1.0; n];
    };
    let width = fraction * (grid.max() - grid.min());
    if width <= 0.0 {
        return vec![1.0; n];
    }
    // quadratic ramp; strong enough to absorb a packet crossing at light speed
    let gamma_max = 30.0 / width;
    (0..n)
        .map(|i| {
            let x = grid.point(i);
            let depth = ((grid.min() + width - x).max(x - (grid.max() - width))).max(0.0) / width;
            (-gamma_max * depth * depth * dt).exp()
        })
        .collect()
}

impl EvolverState {
    /// State from two consecutive gauge fields `chi(t - dt)`, `chi(t)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fields(
        grid: Grid1D,
        mass: f64,
        e_ref: f64,
        potential: &[f64],
        chi_prev: Vec<Complex64>,
        chi: Vec<Complex64>,
        dt: f64,
        time: f64,
        opts: &OracleOptions,
    ) -> Result<Self> {
        let n = grid.len();
        for len in [potential.len(), chi.len(), chi_prev.len()] {
            if len != n {
                return Err(Error::GridMismatch { expected: n, got: len });
            }
        }
        if !(dt > 0.0 && dt <= 0.5 * grid.spacing() * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} violates dt <= 0.5 dx = {}",
                0.5 * grid.spacing()
            )));
        }
        let initial_peak = peak(&chi).max(peak(&chi_prev));
        Ok(Self {
            grid,
            time,
            dt,
            mass,
            e_ref,
            shifted: potential.iter().map(|w| w - e_ref).collect(),
            mask: sponge(&grid, opts.boundary, dt),
            chi,
            chi_prev,
            boundary: opts.boundary,
            exec: opts.exec,
            initial_peak,
            allowance: opts.growth_allowance,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn field(&self) -> &[Complex64] {
        &self.chi
    }
    pub fn reference_energy(&self) -> f64 {
        self.e_ref
    }

    fn neighbour(&self, v: &[Complex64], i: usize, right: bool) -> Complex64 {
        let n = v.len();
        match (right, i, self.boundary) {
            (false, 0, Boundary::Periodic) => v[n - 1],
            (false, 0, _) => ZERO,
            (false, _, _) => v[i - 1],
            (true, _, Boundary::Periodic) if i + 1 == n => v[0],
            (true, _, _) if i + 1 == n => ZERO,
            (true, _, _) => v[i + 1],
        }
    }

    fn advance(&self) -> Vec<Complex64> {
        let n = self.chi.len();
        let dt = self.dt;
        let dx2 = self.grid.spacing().powi(2);
        let m2 = self.mass * self.mass;
        let mut next = vec![ZERO; n];
        fill_indexed(&mut next, self.exec, |i| {
            let w = self.shifted[i];
            let c = self.chi[i];
            let lap = (self.neighbour(&self.chi, i, false) - 2.0 * c + self.neighbour(&self.chi, i, true)) / dx2;
            let rhs = 2.0 * c - self.chi_prev[i] * (1.0 - I * w * dt) + dt * dt * (lap - (m2 - w * w) * c);
            rhs / (1.0 + I * w * dt)
        });
        next
    }

    pub fn step(&mut self) -> Result<()> {
        let mut next = self.advance();
        for ((a, b), m) in next.iter_mut().zip(self.chi.iter_mut()).zip(&self.mask) {
            *a *= m;
            *b *= m;
        }
        self.chi_prev = std::mem::replace(&mut self.chi, next);
        self.time += self.dt;
        self.steps += 1;
        if self.steps % 32 == 0 {
            self.check_growth()?;
        }
        Ok(())
    }

    fn check_growth(&self) -> Result<()> {
        let growth = peak(&self.chi) / self.initial_peak.max(f64::MIN_POSITIVE);
        if !growth.is_finite() || growth > self.allowance {
            return Err(Error::Instability { time: self.time, growth });
        }
        Ok(())
    }

    /// Charge between the previous and the current time level.
    pub fn charge(&self) -> f64 {
        let dx = self.grid.spacing();
        let sum: f64 = self
            .chi_prev
            .iter()
            .zip(&self.chi)
            .zip(&self.shifted)
            .map(|((a, b), w)| {
                let z = a.conj() * b;
                -z.im / self.dt - w * z.re
            })
            .sum();
        sum * dx / self.mass
    }

    /// Field and centred-difference density at the current time level.
    pub fn snapshot(&self) -> FieldSnapshot {
        let next = self.advance();
        let dt = self.dt;
        let rho = self
            .chi
            .iter()
            .zip(&next)
            .zip(&self.chi_prev)
            .zip(&self.shifted)
            .map(|(((c, up), down), w)| {
                let d = c.conj() * (up - down);
                let s = c.conj() * (up + down);
                (-d.im / (2.0 * dt) - w * s.re / 2.0) / self.mass
            })
            .collect();
        FieldSnapshot {
            grid: self.grid,
            time: self.time,
            psi: self.chi.clone(),
            rho,
            reference_energy: self.e_ref,
            interpolated: vec![false; self.grid.len()],
        }
    }

    /// Advances to each requested time (rounded to the nearest step) and
    /// records a snapshot there.
    pub fn run_and_snapshot(&mut self, times: &[f64]) -> Result<Vec<FieldSnapshot>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("snapshot times must be increasing".into()));
        }
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let steps = ((t - self.time) / self.dt).round();
            if steps < 0.0 {
                return Err(Error::InvalidParameter(format!("time {t} lies before the current state")));
            }
            for _ in 0..steps as u64 {
                self.step()?;
            }
            self.check_growth()?;
            out.push(self.snapshot());
        }
        Ok(out)
    }

    /// Largest `|chi|` beyond `x_limit`, relative to the overall peak.
    pub fn leakage_beyond(&self, x_limit: f64) -> f64 {
        let total = peak(&self.chi);
        let outside = self
            .chi
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.point(*i) > x_limit)
            .fold(0.0f64, |m, (_, z)| m.max(z.norm()));
        if total > 0.0 {
            outside / total
        } else {
            0.0
        }
    }
}

/// Largest grid spacing giving 16 points per shortest wavelength.
pub fn resolution_limit(packet: &PacketSpec, barrier: &BarrierSpec) -> f64 {
    let regime = packet.regime();
    let p_hi = packet.p0() + 3.0 * packet.dp();
    let q = barrier_momentum(p_hi, barrier, regime).norm();
    let k = p_hi.max(regime.mass).max(q);
    2.0 * std::f64::consts::PI / (16.0 * k)
}

/// Starts from the free packet at `t = -dt` and `t = 0`, so no antiparticle
/// component is present initially.
pub fn init_from_packet(
    packet: &PacketSpec,
    barrier: &BarrierSpec,
    grid: &Grid1D,
    opts: &OracleOptions,
) -> Result<EvolverState> {
    if packet.regime().regime != Regime::KleinGordon {
        return Err(Error::InvalidParameter("the finite-difference oracle is Klein-Gordon only".into()));
    }
    let limit = resolution_limit(packet, barrier);
    if grid.spacing() > limit {
        return Err(Error::Resolution(format!(
            "dx = {:.3e} exceeds {limit:.3e} (16 points per shortest wavelength)",
            grid.spacing()
        )));
    }
    if !(opts.dt_factor > 0.0 && opts.dt_factor <= 0.5) {
        return Err(Error::InvalidParameter(format!("dt factor {} must lie in (0, 0.5]", opts.dt_factor)));
    }
    let overlap = packet.x0() + 3.0 / packet.dp() + barrier.edge_zone();
    if overlap > 0.0 {
        warn!("initial packet overlaps the barrier (X0 + 3/dP = {overlap:.3} > 0)");
    }
    let dt = opts.dt_factor * grid.spacing();
    let syn_opts = SynthesisOptions { exec: opts.exec, ..Default::default() };
    let free = Synthesizer::new(SolutionKind::Free, packet, barrier, &syn_opts, 0.0)?;
    let now = free.snapshot(grid, 0.0)?;
    let before = free.snapshot(grid, -dt)?;
    let potential: Vec<f64> = grid.points().iter().map(|&x| potential_profile(x, barrier)).collect();
    EvolverState::from_fields(
        *grid,
        packet.regime().mass,
        free.reference_energy(),
        &potential,
        before.psi,
        now.psi,
        dt,
        0.0,
        opts,
    )
}
