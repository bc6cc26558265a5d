//! Momentum-space synthesis of time-dependent solutions.
//!
//! Every field is a superposition `psi(x, t) = sum_j w_j A(p_j) phi(x, p_j) e^{-iE_j t}`
//! over a uniform momentum grid (trapezoid weights `w_j`). Fields are
//! stored in a frame rotating with `E_ref = E(P0)`, i.e. the stored value is
//! `psi e^{i E_ref t}`; the charge density does not depend on the frame.
//!
//! The expansion-based solutions keep only the terms that have been created
//! by time `t` (causal ordering) or a fixed number of terms (acausal ordering
//! of a divergent series). Entry times come from the stationary phase at `P0`.

use std::f64::consts::PI;

use log::warn;

use crate::amplitudes::MatchingCoefficients;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::mre::{reflection_series, series_terms, MreBranch};
use crate::numerics::{c, is_finite, trapezoid, Complex64, Grid1D, I};
use crate::observables::charge_density;
use crate::potentials::{
    barrier_momentum, is_supercritical, momentum_slope, potential_profile, BarrierSpec, DispersionRegime, Regime,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const DEFAULT_MOMENTUM_POINTS: usize = 2001;
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormConvention {
    #[default]
    UnitCharge,
    UnitPeak,
}

/// Gaussian packet `A(P) = N exp[-(P - P0)^2 / dP^2] e^{-i P X0}`, centred at `X0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    p0: f64,
    dp: f64,
    x0: f64,
    regime: DispersionRegime,
    norm: NormConvention,
    scale: Complex64,
    norm_constant: f64,
}

impl PacketSpec {
    pub fn new(p0: f64, dp: f64, x0: f64, regime: DispersionRegime) -> Result<Self> {
        Self::with_norm(p0, dp, x0, regime, NormConvention::UnitCharge)
    }

    pub fn with_norm(p0: f64, dp: f64, x0: f64, regime: DispersionRegime, norm: NormConvention) -> Result<Self> {
        if !(dp > 0.0 && dp.is_finite()) {
            return Err(Error::InvalidParameter(format!("momentum width must be positive, got {dp}")));
        }
        if !(p0.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidParameter("packet centre must be finite".into()));
        }
        let ratio = p0 / dp;
        if ratio < 3.0 {
            return Err(Error::InvalidParameter(format!("P0/dP = {ratio} < 3 puts weight on negative momenta")));
        }
        if ratio < 5.0 {
            warn!("P0/dP = {ratio:.2} < 5: the packet has a noticeable low-momentum tail");
        }
        let mut spec = Self { p0, dp, x0, regime, norm, scale: c(1.0, 0.0), norm_constant: 1.0 };
        spec.norm_constant = match norm {
            NormConvention::UnitPeak => 1.0,
            NormConvention::UnitCharge => {
                let grid = spec.momentum_grid(DEFAULT_MOMENTUM_POINTS)?;
                let dens: Vec<f64> =
                    grid.points().iter().map(|&p| spec.gaussian(p).powi(2) * spec.charge_weight(p)).collect();
                1.0 / (2.0 * PI * trapezoid(&dens, &grid)?).sqrt()
            }
        };
        Ok(spec)
    }

    /// Same packet with every amplitude multiplied by `alpha`.
    pub fn scaled(mut self, alpha: Complex64) -> Self {
        self.scale *= alpha;
        self
    }

    /// Same packet launched from `x0`.
    pub fn launched_at(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }
    pub fn dp(&self) -> f64 {
        self.dp
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn regime(&self) -> &DispersionRegime {
        &self.regime
    }
    pub fn norm_convention(&self) -> NormConvention {
        self.norm
    }

    /// Charge carried per unit `|A|^2` by the plane wave at `p`, over `2 pi`.
    fn charge_weight(&self, p: f64) -> f64 {
        match self.regime.regime {
            Regime::KleinGordon => self.regime.energy(p) / self.regime.mass,
            Regime::Schrodinger => 1.0,
        }
    }

    fn gaussian(&self, p: f64) -> f64 {
        (-((p - self.p0) / self.dp).powi(2)).exp()
    }

    /// Uniform grid over `P0 +- 5 dP` (clipped to positive momenta).
    pub fn momentum_grid(&self, n_points: usize) -> Result<Grid1D> {
        let lo = (self.p0 - 5.0 * self.dp).max(1e-3 * self.dp);
        let grid = Grid1D::new(lo, self.p0 + 5.0 * self.dp, n_points)?;
        let limit = self.dp / 20.0;
        if grid.spacing() > limit {
            return Err(Error::GridTooCoarse { spacing: grid.spacing(), limit });
        }
        Ok(grid)
    }

    /// Position spread of `|psi|^2` at time `t` (free propagation).
    pub fn width_at(&self, t: f64) -> f64 {
        let s0 = 1.0 / self.dp;
        let sv = self.regime.dispersion_curvature(self.p0) * self.dp / 2.0;
        s0.hypot(sv * t)
    }

    pub fn velocity(&self) -> f64 {
        self.regime.group_velocity(self.p0)
    }

    pub fn reference_energy(&self) -> f64 {
        self.regime.energy(self.p0)
    }
}

pub fn momentum_amplitude(p: f64, spec: &PacketSpec) -> Complex64 {
    spec.scale * spec.norm_constant * spec.gaussian(p) * (-I * p * spec.x0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Free,
    FullScattering,
    AcausalMre,
    CausalMre,
    TwoPacketQuench,
}

impl SolutionKind {
    /// Expansion branch used for a packet centred at `p0`. In the supercritical
    /// regime the convergent series is the acausal solution; otherwise it is
    /// the causal one.
    pub fn branch(self, p0: f64, barrier: &BarrierSpec, regime: &DispersionRegime) -> Option<MreBranch> {
        let sup = is_supercritical(p0, barrier, regime);
        match self {
            SolutionKind::Free | SolutionKind::FullScattering => None,
            SolutionKind::AcausalMre if sup => Some(MreBranch::Convergent),
            SolutionKind::AcausalMre => Some(MreBranch::Divergent),
            SolutionKind::CausalMre | SolutionKind::TwoPacketQuench if sup => Some(MreBranch::Divergent),
            SolutionKind::CausalMre | SolutionKind::TwoPacketQuench => Some(MreBranch::Convergent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub momentum_points: usize,
    /// Pole shift for sharp barriers on the divergent branch.
    pub delta: f64,
    /// Term cap for a divergent series whose terms run ahead of the packet.
    pub acausal_terms: usize,
    /// Terms are switched on this many packet widths before their entry time.
    pub margin_widths: f64,
    pub n_cycles: usize,
    pub exec: Execution,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            momentum_points: DEFAULT_MOMENTUM_POINTS,
            delta: 0.0,
            acausal_terms: 40,
            margin_widths: 8.0,
            n_cycles: 1,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub grid: Grid1D,
    pub time: f64,
    /// `psi e^{i E_ref t}`.
    pub psi: Vec<Complex64>,
    pub rho: Vec<f64>,
    pub reference_energy: f64,
    /// Points filled by interpolation across a smooth edge.
    pub interpolated: Vec<bool>,
}

impl FieldSnapshot {
    pub fn interpolated_count(&self) -> usize {
        self.interpolated.iter().filter(|&&b| b).count()
    }
}

/// Second packet of the two-packet initial state. Its interior terms cancel
/// those of the first packet from cycle `n_cycles` on:
/// `A1(p) = C1(p, q) a_plus(p) s_{n-1}(p) A0(p) = -(-u/v)^n A0(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPacket {
    pub first: PacketSpec,
    pub n_cycles: usize,
    /// Centre of the second packet at `t = 0`.
    pub second_x0: f64,
}

impl TwoPacket {
    pub fn amplitude1(&self, p: f64, m: &MatchingCoefficients) -> Result<Complex64> {
        if self.n_cycles == 0 {
            return Ok(ZERO);
        }
        let s = series_terms(m, MreBranch::Divergent, p, self.n_cycles - 1)?;
        Ok(m.b_pp * m.a_plus * s[self.n_cycles - 1] * momentum_amplitude(p, &self.first))
    }
}

pub fn two_packet_initial(packet: &PacketSpec, barrier: &BarrierSpec, n_cycles: usize) -> Result<TwoPacket> {
    let regime = packet.regime;
    if n_cycles == 0 {
        return Err(Error::InvalidParameter("n_cycles must be at least 1".into()));
    }
    if !is_supercritical(packet.p0, barrier, &regime) {
        return Err(Error::InvalidParameter("a two-packet quench needs a supercritical barrier at P0".into()));
    }
    let s0 = momentum_slope(packet.p0, barrier, &regime).re;
    // the second packet trails by n full round trips of the interior
    let separation = 2.0 * n_cycles as f64 * s0.abs();
    let required = 6.0 / packet.dp;
    if separation < required {
        return Err(Error::SeparationViolated { separation, required });
    }
    Ok(TwoPacket { first: *packet, n_cycles, second_x0: packet.x0 - separation })
}

/// Numbers of expansion terms present at time `t` for each wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TermCounts {
    transmitted: usize,
    plus: usize,
    minus: usize,
    reflected: usize,
}

impl TermCounts {
    const ALL: TermCounts =
        TermCounts { transmitted: usize::MAX, plus: usize::MAX, minus: usize::MAX, reflected: usize::MAX };

    fn lagged(self, n: usize) -> Self {
        let f = |k: usize| if k == usize::MAX { k } else { k.saturating_sub(n) };
        TermCounts {
            transmitted: f(self.transmitted),
            plus: f(self.plus),
            minus: f(self.minus),
            reflected: f(self.reflected),
        }
    }

    fn max(self) -> usize {
        self.transmitted.max(self.plus).max(self.minus).max(self.reflected)
    }
}

#[derive(Debug, Clone, Copy)]
enum Ordering {
    /// All computed terms (convergent or closed form).
    Complete,
    /// Divergent series whose terms appear one by one after the packet arrives.
    Causal { x0: f64, v0: f64, sigma_s: f64 },
    /// Divergent series with terms running ahead of the packet: fixed cap.
    Capped(usize),
}

/// Entry time of transmitted term `n`: its centre reaches `x = 1`.
fn transmitted_entry(n: usize, x0: f64, v0: f64, sigma_s: f64) -> f64 {
    ((2 * n + 1) as f64 * sigma_s - x0) / v0
}

fn causal_counts(t: f64, margin: f64, x0: f64, v0: f64, sigma_s: f64) -> TermCounts {
    let tau = sigma_s / v0;
    let horizon = t + margin;
    let count = |start: &dyn Fn(usize) -> f64| {
        let mut k = 0;
        while start(k) <= horizon {
            k += 1;
            if k > 100_000 {
                break;
            }
        }
        k
    };
    let tn = |n: usize| transmitted_entry(n, x0, v0, sigma_s);
    TermCounts {
        transmitted: count(&|n| tn(n)),
        plus: count(&|n| tn(n)),
        minus: count(&|n| tn(n) - tau),
        reflected: count(&|m| if m == 0 { -x0 / v0 } else { tn(m - 1) + tau }),
    }
}

/// Per-momentum data shared by all snapshot times.
struct ModeRow {
    p: f64,
    q: Complex64,
    detuning: f64,
    amp0: Complex64,
    amp1: Complex64,
    m: Option<MatchingCoefficients>,
    /// `s_prefix[k] = sum_{n < k} s_n`
    s_prefix: Vec<Complex64>,
    r_prefix: Vec<Complex64>,
}

fn prefix(values: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = ZERO;
    out.push(acc);
    for &v in values {
        acc += v;
        out.push(acc);
    }
    out
}

fn take(prefix: &[Complex64], k: usize) -> Complex64 {
    prefix[k.min(prefix.len() - 1)]
}

/// One family of waves `sum_j c_j e^{i k_j (x - x_ref)}`.
#[derive(Debug, Clone, Default)]
struct WaveSet {
    k: Vec<Complex64>,
    c: Vec<Complex64>,
    ct: Vec<Complex64>,
    x_ref: f64,
}

impl WaveSet {
    fn with_capacity(n: usize, x_ref: f64) -> Self {
        Self { k: Vec::with_capacity(n), c: Vec::with_capacity(n), ct: Vec::with_capacity(n), x_ref }
    }

    fn push(&mut self, k: Complex64, coef: Complex64, rate: Complex64) {
        self.k.push(k);
        self.c.push(coef);
        self.ct.push(coef * rate);
    }

    /// Adds the sums at `x_start + i h`, `i < psi.len()`, using a phase recurrence.
    fn accumulate(&self, x_start: f64, h: f64, psi: &mut [Complex64], dt: &mut [Complex64]) {
        for j in 0..self.k.len() {
            let k = self.k[j];
            let mut phase = (I * k * (x_start - self.x_ref)).exp();
            let step = (I * k * h).exp();
            let (cj, ctj) = (self.c[j], self.ct[j]);
            for (a, b) in psi.iter_mut().zip(dt.iter_mut()) {
                *a += cj * phase;
                *b += ctj * phase;
                phase *= step;
            }
        }
    }

    fn at(&self, x: f64) -> (Complex64, Complex64) {
        let mut a = [ZERO];
        let mut b = [ZERO];
        self.accumulate(x, 0.0, &mut a, &mut b);
        (a[0], b[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Left,
    Interior,
    Right,
    Zone(usize),
}

struct Layout {
    left: Vec<WaveSet>,
    interior: Vec<WaveSet>,
    right: Vec<WaveSet>,
    zone: f64,
}

impl Layout {
    fn region(&self, x: f64) -> Region {
        let z = self.zone;
        if z > 0.0 && (x + 0.0).abs() <= z {
            Region::Zone(0)
        } else if z > 0.0 && (x - 1.0).abs() <= z {
            Region::Zone(1)
        } else if x < 0.0 {
            Region::Left
        } else if x <= 1.0 {
            Region::Interior
        } else {
            Region::Right
        }
    }

    fn sets(&self, r: Region) -> &[WaveSet] {
        match r {
            Region::Left => &self.left,
            Region::Interior => &self.interior,
            Region::Right => &self.right,
            Region::Zone(_) => &[],
        }
    }

    fn eval(&self, r: Region, x: f64) -> (Complex64, Complex64) {
        self.sets(r).iter().fold((ZERO, ZERO), |acc, s| {
            let v = s.at(x);
            (acc.0 + v.0, acc.1 + v.1)
        })
    }

    fn evaluate(&self, grid: &Grid1D, exec: Execution) -> (Vec<Complex64>, Vec<Complex64>, Vec<bool>) {
        let n = grid.len();
        let h = grid.spacing();
        let z = self.zone;
        // values on both sides of each smoothing zone
        let edges = [
            (self.eval(Region::Left, -z), self.eval(Region::Interior, z)),
            (self.eval(Region::Interior, 1.0 - z), self.eval(Region::Right, 1.0 + z)),
        ];
        let n_chunks = n.div_ceil(CHUNK);
        let chunks = map_indexed(n_chunks, exec, |ci| {
            let start = ci * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut psi = vec![ZERO; end - start];
            let mut dt = vec![ZERO; end - start];
            let mut flags = vec![false; end - start];
            let mut i = start;
            while i < end {
                let r = self.region(grid.point(i));
                let mut j = i + 1;
                while j < end && self.region(grid.point(j)) == r {
                    j += 1;
                }
                match r {
                    Region::Zone(e) => {
                        let ((l, lt), (rr, rt)) = edges[e];
                        let centre = e as f64;
                        for k in i..j {
                            let f = (grid.point(k) - (centre - z)) / (2.0 * z);
                            psi[k - start] = l + (rr - l) * f;
                            dt[k - start] = lt + (rt - lt) * f;
                            flags[k - start] = true;
                        }
                    }
                    _ => {
                        let x_start = grid.point(i);
                        for set in self.sets(r) {
                            set.accumulate(x_start, h, &mut psi[i - start..j - start], &mut dt[i - start..j - start]);
                        }
                    }
                }
                i = j;
            }
            (psi, dt, flags)
        });
        let mut psi = Vec::with_capacity(n);
        let mut dt = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for (a, b, f) in chunks {
            psi.extend(a);
            dt.extend(b);
            flags.extend(f);
        }
        (psi, dt, flags)
    }
}

/// Which part of a solution to synthesize as a free packet over the whole line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// The incident packet(s), `e^{ipx}`.
    Incident,
    /// Everything transmitted by time `t`, `e^{ipx}`.
    Transmitted,
    /// Transmitted term `n` of the expansion.
    TransmittedTerm(usize),
    /// Everything reflected by time `t`, `e^{-ipx}`.
    Reflected,
    /// Free packet with the transmitted spectrum's magnitude,
    /// `A(p) |T(p)|`; the reference for advancement.
    Matched,
}

/// Precomputed synthesis of one solution; snapshots at any time up to the
/// horizon given at construction.
pub struct Synthesizer {
    kind: SolutionKind,
    packet: PacketSpec,
    barrier: BarrierSpec,
    opts: SynthesisOptions,
    rows: Vec<ModeRow>,
    weights: Vec<f64>,
    ordering: Ordering,
    lag: usize,
    e_ref: f64,
}

impl Synthesizer {
    pub fn new(
        kind: SolutionKind,
        packet: &PacketSpec,
        barrier: &BarrierSpec,
        opts: &SynthesisOptions,
        horizon: f64,
    ) -> Result<Self> {
        barrier.validate()?;
        let regime = packet.regime;
        let p0 = packet.p0;
        if let Some(b) = barrier.steepness() {
            if 5.0 / b >= 0.25 {
                return Err(Error::InvalidParameter(format!(
                    "steepness {b} too small: the smoothing zones cover the barrier"
                )));
            }
        }
        let needed = 3.0 / packet.dp + barrier.edge_zone();
        if -packet.x0 < needed {
            warn!("packet centre X0 = {} is within {needed:.3} of the barrier", packet.x0);
        }
        let pgrid = packet.momentum_grid(opts.momentum_points)?;
        let mut weights = vec![pgrid.spacing(); pgrid.len()];
        weights[0] *= 0.5;
        *weights.last_mut().unwrap() *= 0.5;

        let branch = kind.branch(p0, barrier, &regime);
        let two = if kind == SolutionKind::TwoPacketQuench {
            Some(two_packet_initial(packet, barrier, opts.n_cycles)?)
        } else {
            None
        };
        let ordering = match branch {
            Some(MreBranch::Divergent) => {
                let s0 = momentum_slope(p0, barrier, &regime);
                let sigma_s = -s0.re;
                if s0.im == 0.0 && sigma_s > 0.0 {
                    Ordering::Causal { x0: packet.x0, v0: packet.velocity(), sigma_s }
                } else {
                    Ordering::Capped(opts.acausal_terms)
                }
            }
            _ => Ordering::Complete,
        };
        let margin_at = |t: f64| opts.margin_widths * packet.width_at(t) / packet.velocity();
        let n_terms = match ordering {
            Ordering::Complete => 2000,
            Ordering::Capped(n) => n,
            Ordering::Causal { x0, v0, sigma_s } => {
                causal_counts(horizon.max(0.0), margin_at(horizon.max(0.0)), x0, v0, sigma_s).max() + 1
            }
        };
        let delta = opts.delta;
        let rect_pole = barrier.steepness().is_none() && branch == Some(MreBranch::Divergent);
        let sup0 = is_supercritical(p0, barrier, &regime);

        let rows: Vec<Result<ModeRow>> = map_indexed(pgrid.len(), opts.exec, |j| {
            let p = pgrid.point(j);
            let q = barrier_momentum(p, barrier, &regime);
            let amp0 = momentum_amplitude(p, packet);
            let detuning = regime.energy(p) - packet.reference_energy();
            let mut row =
                ModeRow { p, q, detuning, amp0, amp1: ZERO, m: None, s_prefix: Vec::new(), r_prefix: Vec::new() };
            if kind == SolutionKind::Free {
                return Ok(row);
            }
            if rect_pole && delta == 0.0 && (p - q).norm() < 1e-12 {
                return Err(Error::PoleOnAxis { p });
            }
            let d = if rect_pole { delta } else { 0.0 };
            let m = MatchingCoefficients::for_barrier(p, q, barrier, &regime, d)?;
            // outside the Klein zone the causal expansion is the convergent one;
            // the divergent series would grow like e^{2 kappa n} there
            let klein = is_supercritical(p, barrier, &regime);
            let row_branch = match branch {
                Some(MreBranch::Divergent) if sup0 && !klein => Some(MreBranch::Convergent),
                other => other,
            };
            if let Some(br) = row_branch {
                let s = series_terms(&m, br, p, n_terms)?;
                let r = reflection_series(&m, br, p, n_terms)?;
                if !s.iter().chain(&r).all(|z| is_finite(*z)) {
                    return Err(Error::DegenerateDenominator { p });
                }
                row.s_prefix = prefix(&s);
                row.r_prefix = prefix(&r);
            }
            if let (Some(tp), true) = (&two, klein) {
                row.amp1 = tp.amplitude1(p, &m)?;
            }
            row.m = Some(m);
            Ok(row)
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            packet: *packet,
            barrier: *barrier,
            opts: *opts,
            rows,
            weights,
            ordering,
            lag: two.map_or(0, |t| t.n_cycles),
            e_ref: packet.reference_energy(),
        })
    }

    pub fn reference_energy(&self) -> f64 {
        self.e_ref
    }

    fn counts(&self, t: f64) -> TermCounts {
        match self.ordering {
            Ordering::Complete => TermCounts::ALL,
            Ordering::Capped(n) => TermCounts { transmitted: n + 1, plus: n + 1, minus: n + 1, reflected: n + 1 },
            Ordering::Causal { x0, v0, sigma_s } => {
                let margin = self.opts.margin_widths * self.packet.width_at(t.max(0.0)) / v0;
                causal_counts(t, margin, x0, v0, sigma_s)
            }
        }
    }

    /// Coefficients `(incident, reflected, plus, minus, transmitted)` at `t`,
    /// already multiplied by the packet amplitude(s).
    fn coefficients(&self, row: &ModeRow, t: f64) -> [Complex64; 5] {
        let inc = row.amp0 + row.amp1;
        let Some(m) = row.m.as_ref() else {
            return [inc, ZERO, ZERO, ZERO, inc];
        };
        if self.kind == SolutionKind::FullScattering {
            let den = m.u() + m.v();
            let tt = 1.0 / den;
            let r = (m.b_mp * m.a_plus + m.b_mm * m.a_minus) * tt;
            return [inc, inc * r, inc * m.a_plus * tt, inc * m.a_minus * tt, inc * tt];
        }
        let k0 = self.counts(t);
        let k1 = k0.lagged(self.lag);
        let pick = |k: TermCounts, amp: Complex64| -> [Complex64; 4] {
            [
                amp * take(&row.r_prefix, k.reflected),
                amp * m.a_plus * take(&row.s_prefix, k.plus),
                amp * m.a_minus * take(&row.s_prefix, k.minus),
                amp * take(&row.s_prefix, k.transmitted),
            ]
        };
        let a = pick(k0, row.amp0);
        let b = if row.amp1 == ZERO { [ZERO; 4] } else { pick(k1, row.amp1) };
        [inc, a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
    }

    fn layout(&self, t: f64) -> Layout {
        let n = self.rows.len();
        let mut inc = WaveSet::with_capacity(n, 0.0);
        let mut refl = WaveSet::with_capacity(n, 0.0);
        let mut plus = WaveSet::with_capacity(n, 0.0);
        let mut minus = WaveSet::with_capacity(n, 1.0);
        let mut trans = WaveSet::with_capacity(n, 1.0);
        for (row, &w) in self.rows.iter().zip(&self.weights) {
            let rate = -I * row.detuning;
            let phase = w * (rate * t).exp();
            let [ci, cr, cp, cm, ct] = self.coefficients(row, t);
            let p = c(row.p, 0.0);
            inc.push(p, ci * phase, rate);
            if self.kind == SolutionKind::Free {
                continue;
            }
            refl.push(-p, cr * phase, rate);
            plus.push(row.q, cp * phase, rate);
            // e^{-iqx} referenced to x = 1 keeps evanescent factors bounded
            minus.push(-row.q, cm * (-I * row.q).exp() * phase, rate);
            trans.push(p, ct * (I * p).exp() * phase, rate);
        }
        if self.kind == SolutionKind::Free {
            return Layout { left: vec![inc.clone()], interior: vec![inc.clone()], right: vec![inc], zone: 0.0 };
        }
        Layout {
            left: vec![inc, refl],
            interior: vec![plus, minus],
            right: vec![trans],
            zone: self.barrier.edge_zone(),
        }
    }

    pub fn snapshot(&self, grid: &Grid1D, t: f64) -> Result<FieldSnapshot> {
        let layout = self.layout(t);
        let (psi, dt, interpolated) = layout.evaluate(grid, self.opts.exec);
        let shifted: Vec<f64> = if self.kind == SolutionKind::Free {
            vec![-self.e_ref; grid.len()]
        } else {
            grid.points().iter().map(|&x| potential_profile(x, &self.barrier) - self.e_ref).collect()
        };
        let rho = charge_density(&psi, &dt, &shifted, &self.packet.regime)?;
        Ok(FieldSnapshot { grid: *grid, time: t, psi, rho, reference_energy: self.e_ref, interpolated })
    }

    /// A part of the solution continued over the whole line as a free packet.
    pub fn component(&self, which: Component, grid: &Grid1D, t: f64) -> Result<FieldSnapshot> {
        let n = self.rows.len();
        let mut set = WaveSet::with_capacity(n, 0.0);
        for (row, &w) in self.rows.iter().zip(&self.weights) {
            let rate = -I * row.detuning;
            let phase = w * (rate * t).exp();
            let [ci, cr, _, _, ct] = self.coefficients(row, t);
            let (k, coef) = match which {
                Component::Incident => (row.p, ci),
                Component::Transmitted => (row.p, ct),
                Component::Reflected => (-row.p, cr),
                Component::Matched if ci == ZERO => (row.p, ZERO),
                Component::Matched => (row.p, ci * (ct.norm() / ci.norm())),
                Component::TransmittedTerm(k) => {
                    let s = if row.s_prefix.len() > k + 1 {
                        row.s_prefix[k + 1] - row.s_prefix[k]
                    } else if row.m.is_none() && k == 0 {
                        c(1.0, 0.0)
                    } else {
                        ZERO
                    };
                    (row.p, row.amp0 * s)
                }
            };
            set.push(c(k, 0.0), coef * phase, rate);
        }
        let layout = Layout { left: vec![set.clone()], interior: vec![set.clone()], right: vec![set], zone: 0.0 };
        let (psi, dt, interpolated) = layout.evaluate(grid, self.opts.exec);
        let shifted = vec![-self.e_ref; grid.len()];
        let rho = charge_density(&psi, &dt, &shifted, &self.packet.regime)?;
        Ok(FieldSnapshot { grid: *grid, time: t, psi, rho, reference_energy: self.e_ref, interpolated })
    }

    pub fn kind(&self) -> SolutionKind {
        self.kind
    }

    pub fn packet(&self) -> &PacketSpec {
        &self.packet
    }
}

pub fn synthesize(
    kind: SolutionKind,
    packet: &PacketSpec,
    barrier: &BarrierSpec,
    grid: &Grid1D,
    time: f64,
    opts: &SynthesisOptions,
) -> Result<FieldSnapshot> {
    Synthesizer::new(kind, packet, barrier, opts, time)?.snapshot(grid, time)
}

/// Sum of shifted free packets `sum_n X_n psi_0(x - x_n, t)` to the right of
/// the barrier and `psi_0(x, t) + sum_m Y_m psi_0(-x - y_m, t)` to the left.
/// The interior is not approximated and is left at zero.
pub fn stationary_phase_approx(
    kind: SolutionKind,
    packet: &PacketSpec,
    barrier: &BarrierSpec,
    grid: &Grid1D,
    time: f64,
    n_max: usize,
    opts: &SynthesisOptions,
) -> Result<FieldSnapshot> {
    let regime = packet.regime;
    let p0 = packet.p0;
    if packet.dp / p0 > 0.25 {
        warn!("dP/P0 = {:.3} > 0.25: the stationary-phase approximation is rough", packet.dp / p0);
    }
    let q0 = barrier_momentum(p0, barrier, &regime);
    let slope = momentum_slope(p0, barrier, &regime);
    if q0.im != 0.0 {
        return Err(Error::InvalidParameter("stationary phase needs a propagating interior".into()));
    }
    let branch = kind.branch(p0, barrier, &regime).unwrap_or(MreBranch::Convergent);
    let d = if barrier.steepness().is_none() && branch == MreBranch::Divergent { opts.delta } else { 0.0 };
    let m = MatchingCoefficients::for_barrier(p0, q0, barrier, &regime, d)?;
    let s = series_terms(&m, branch, p0, n_max)?;
    let r = reflection_series(&m, branch, p0, n_max)?;
    let sigma = branch.sigma();
    let free = Synthesizer::new(SolutionKind::Free, packet, barrier, opts, time)?;

    let n = grid.len();
    let mut psi = vec![ZERO; n];
    let mut dt = vec![ZERO; n];
    // adds weight * psi_0(x - shift) (or psi_0(-x - shift) when mirrored) where keep(x)
    let mut add = |weight: Complex64, shift: f64, mirror: bool, keep: &dyn Fn(f64) -> bool| -> Result<()> {
        let (lo, hi) =
            if mirror { (-grid.max() - shift, -grid.min() - shift) } else { (grid.min() - shift, grid.max() - shift) };
        let g = Grid1D::new(lo, hi, n)?;
        let (fp, ft, _) = free.layout(time).evaluate(&g, opts.exec);
        for i in 0..n {
            if keep(grid.point(i)) {
                let idx = if mirror { n - 1 - i } else { i };
                psi[i] += weight * fp[idx];
                dt[i] += weight * ft[idx];
            }
        }
        Ok(())
    };
    for (k, sn) in s.iter().enumerate() {
        let x_n = 1.0 - sigma * (2 * k + 1) as f64 * slope.re;
        add(*sn * (I * p0 * x_n).exp(), x_n, false, &|x| x > 1.0)?;
    }
    add(c(1.0, 0.0), 0.0, false, &|x| x < 0.0)?;
    for (k, rm) in r.iter().enumerate().take(n_max + 1) {
        let y_m = -2.0 * k as f64 * sigma * slope.re;
        add(*rm * (I * p0 * y_m).exp(), y_m, true, &|x| x < 0.0)?;
    }
    let shifted: Vec<f64> =
        grid.points().iter().map(|&x| potential_profile(x, barrier) - packet.reference_energy()).collect();
    let rho = charge_density(&psi, &dt, &shifted, &regime)?;
    Ok(FieldSnapshot {
        grid: *grid,
        time,
        psi,
        rho,
        reference_energy: packet.reference_energy(),
        interpolated: vec![false; n],
    })
}
