//! Named experiments and the runner that turns a configuration into
//! snapshots, charges, tracks and summary metrics.

use log::{info, warn};

use crate::amplitudes::MatchingCoefficients;
use crate::config::{Method, RunConfig, Shape, TimeUnit};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mre::MreBranch;
use crate::numerics::Grid1D;
use crate::observables::{advancement, total_charge, track, ChargeReport, RegionSelector, TrackReport};
use crate::oracle::{init_from_packet, Boundary, OracleOptions};
use crate::potentials::{
    barrier_momentum, momentum_slope, steepness_from_compton_ratio, BarrierSpec, DispersionRegime, Regime,
};
use crate::wavepacket::{Component, FieldSnapshot, PacketSpec, SolutionKind, SynthesisOptions, Synthesizer};

pub const BUILTINS: &[&str] = &[
    "fig1c_free",
    "fig1c_subcritical",
    "fig1c_supercritical",
    "fig1c_supercritical_literal",
    "fig4a_causal",
    "fig4b_acausal",
    "fig5_two_packet",
    "fig4a_reduced",
    "subcritical_narrow",
];

/// Largest number of transmitted sub-packets tracked individually.
const TRACKED_TERMS: usize = 4;
/// Points of the grid used for component tracks.
const TRACK_POINTS: usize = 4001;

#[allow(clippy::too_many_arguments)]
fn base(
    name: &str,
    shape: Shape,
    m: f64,
    w_over_m: f64,
    b_m_over_d: Option<f64>,
    dp: f64,
    x0: f64,
    t_final: f64,
    kind: SolutionKind,
    (x_min, x_max, n_x): (f64, f64, usize),
) -> RunConfig {
    RunConfig {
        name: name.to_string(),
        shape,
        regime: Regime::KleinGordon,
        m,
        w_over_m,
        b_m_over_d,
        p0: None,
        e_over_w: Some(0.5),
        dp,
        x0,
        t_final,
        time_unit: TimeUnit::Dimensionless,
        kind,
        method: Method::Spectral,
        x_min,
        x_max,
        n_x,
        n_p: 2001,
        n_snapshots: 21,
        delta: 0.0,
        n_cycles: 1,
        dt_factor: 0.5,
    }
}

fn fig1c(name: &str, w_over_m: f64, kind: SolutionKind) -> RunConfig {
    let mut cfg = base(name, Shape::Rectangular, 2000.0, w_over_m, None, 4.0, -2.5, 5.0, kind, (-20.0, 20.0, 8001));
    cfg.p0 = Some(20.0);
    cfg.e_over_w = None;
    cfg.time_unit = TimeUnit::Transit;
    cfg
}

/// Configuration of a built-in scenario.
pub fn builtin_config(name: &str) -> Result<RunConfig> {
    let sqrt8 = 2.0 * 2f64.sqrt();
    Ok(match name {
        "fig1c_free" => fig1c(name, 0.0, SolutionKind::Free),
        "fig1c_subcritical" => fig1c(name, 5e-4, SolutionKind::FullScattering),
        "fig1c_supercritical" => {
            // super-Klein tuning W = 2 E(P0)
            let mut cfg = fig1c(name, 0.0, SolutionKind::AcausalMre);
            cfg.w_over_m = 2.0 * 2000f64.hypot(20.0) / 2000.0;
            cfg
        }
        "fig1c_supercritical_literal" => fig1c(name, 2.0, SolutionKind::FullScattering),
        "fig4a_causal" => base(
            name,
            Shape::SmoothTanh,
            5e3,
            2.2361,
            Some(100.0),
            25.0 / 3.0,
            -2.0,
            20.0,
            SolutionKind::CausalMre,
            (-10.0, 10.0, 64001),
        ),
        "fig4b_acausal" => {
            let mut cfg = base(
                name,
                Shape::SmoothTanh,
                2e4,
                sqrt8,
                Some(2.0),
                100.0 / 3.0,
                -0.5,
                4.0,
                SolutionKind::AcausalMre,
                (-8.0, 10.0, 225001),
            );
            cfg.n_p = 1001;
            cfg
        }
        "fig5_two_packet" => {
            let mut cfg = base(
                name,
                Shape::SmoothTanh,
                2e4,
                sqrt8,
                Some(2.0),
                100.0 / 3.0,
                -0.5,
                8.0,
                SolutionKind::TwoPacketQuench,
                (-8.0, 8.0, 200001),
            );
            cfg.n_p = 1001;
            cfg.n_cycles = 1;
            cfg
        }
        // fig4a's barrier and tuning at a mass the finite-difference oracle can resolve
        "fig4a_reduced" => {
            let mut cfg = base(
                name,
                Shape::SmoothTanh,
                40.0,
                2.2361,
                Some(2.5),
                4.0,
                -2.5,
                10.0,
                SolutionKind::CausalMre,
                (-16.0, 14.0, 8192),
            );
            cfg.method = Method::Both;
            cfg
        }
        "subcritical_narrow" => {
            let mut cfg = base(
                name,
                Shape::Rectangular,
                10.0,
                0.1,
                None,
                0.5,
                -14.0,
                40.0,
                SolutionKind::FullScattering,
                (-36.0, 24.0, 8192),
            );
            cfg.p0 = Some(5.0);
            cfg.e_over_w = None;
            cfg.method = Method::Both;
            cfg
        }
        _ => return Err(Error::UnknownScenario(name.to_string())),
    })
}

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::from_config(&builtin_config(name)?)
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub source: RunConfig,
    pub regime: DispersionRegime,
    pub barrier: BarrierSpec,
    pub packet: PacketSpec,
    pub kind: SolutionKind,
    pub times: Vec<f64>,
    pub x_grid: Grid1D,
    pub method: Method,
    pub synthesis: SynthesisOptions,
    pub oracle: OracleOptions,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) | Error::InvalidGrid(m) => Error::Config(m),
        other => other,
    }
}

impl ScenarioConfig {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Self::build(cfg).map_err(config_err)
    }

    fn build(cfg: &RunConfig) -> Result<Self> {
        let regime = DispersionRegime::new(cfg.regime, cfg.m)?;
        let w = cfg.w_over_m * cfg.m;
        let barrier = match (cfg.shape, cfg.b_m_over_d) {
            (Shape::Rectangular, None) => BarrierSpec::rectangular(w)?,
            (Shape::Rectangular, Some(_)) => {
                return Err(Error::Config("b_M_over_d applies to smooth_tanh barriers only".into()))
            }
            (Shape::SmoothTanh, Some(bmd)) => BarrierSpec::smooth(w, steepness_from_compton_ratio(bmd, cfg.m))?,
            (Shape::SmoothTanh, None) => return Err(Error::Config("smooth_tanh needs b_M_over_d".into())),
        };
        let p0 = match (cfg.p0, cfg.e_over_w) {
            (Some(p), None) => p,
            (None, Some(r)) => regime.momentum_for_energy(r * w)?,
            (Some(_), Some(_)) => return Err(Error::Config("give either P0 or E_over_W, not both".into())),
            (None, None) => return Err(Error::Config("one of P0 or E_over_W is required".into())),
        };
        let packet = PacketSpec::new(p0, cfg.dp, cfg.x0, regime)?;
        if !(cfg.t_final > 0.0) || !cfg.t_final.is_finite() {
            return Err(Error::Config(format!("T_final must be positive, got {}", cfg.t_final)));
        }
        if cfg.n_snapshots < 2 {
            return Err(Error::Config("n_snapshots must be at least 2".into()));
        }
        let t_end = match cfg.time_unit {
            TimeUnit::Dimensionless => cfg.t_final,
            TimeUnit::Transit => cfg.t_final / packet.velocity(),
        };
        let last = (cfg.n_snapshots - 1) as f64;
        let times = (0..cfg.n_snapshots).map(|k| t_end * k as f64 / last).collect();
        let x_grid = Grid1D::new(cfg.x_min, cfg.x_max, cfg.n_x)?;
        packet.momentum_grid(cfg.n_p)?;
        if cfg.kind == SolutionKind::TwoPacketQuench && cfg.n_cycles == 0 {
            return Err(Error::Config("n_cycles must be at least 1".into()));
        }
        if cfg.method != Method::Spectral && cfg.regime != Regime::KleinGordon {
            return Err(Error::Config("the finite-difference oracle is Klein-Gordon only".into()));
        }
        let synthesis = SynthesisOptions {
            momentum_points: cfg.n_p,
            delta: cfg.delta,
            n_cycles: cfg.n_cycles,
            ..Default::default()
        };
        let oracle = OracleOptions {
            dt_factor: cfg.dt_factor,
            boundary: Boundary::Absorbing { fraction: 0.1 },
            ..Default::default()
        };
        Ok(Self {
            source: cfg.clone(),
            regime,
            barrier,
            packet,
            kind: cfg.kind,
            times,
            x_grid,
            method: cfg.method,
            synthesis,
            oracle,
        })
    }

    pub fn name(&self) -> &str {
        &self.source.name
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.synthesis.exec = exec;
        self.oracle.exec = exec;
        self
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("at least two snapshot times")
    }

    /// Quantities implied by the configuration, for the run manifest.
    pub fn derived(&self) -> Vec<(String, f64)> {
        let p0 = self.packet.p0();
        let e0 = self.regime.energy(p0);
        let q0 = barrier_momentum(p0, &self.barrier, &self.regime);
        let k_max = p0 + 3.0 * self.packet.dp();
        let mut out = vec![
            ("P0".to_string(), p0),
            ("E0".to_string(), e0),
            ("W".to_string(), self.barrier.height),
            ("Q0_re".to_string(), q0.re),
            ("Q0_im".to_string(), q0.im),
            ("v0".to_string(), self.packet.velocity()),
            ("T_end".to_string(), self.t_end()),
            ("dx".to_string(), self.x_grid.spacing()),
            ("points_per_wavelength".to_string(), 2.0 * std::f64::consts::PI / (k_max * self.x_grid.spacing())),
        ];
        if let Some(b) = self.barrier.steepness() {
            out.push(("b".to_string(), b));
        }
        if let Some(d) = self.barrier.pole_shift() {
            out.push(("delta_pole".to_string(), d));
        }
        out
    }

    /// Largest amplitude growth the causal expansion predicts by the end of
    /// the run; the oracle tolerates ten times this.
    pub fn predicted_growth(&self) -> f64 {
        let p0 = self.packet.p0();
        if self.kind.branch(p0, &self.barrier, &self.regime) != Some(MreBranch::Divergent) {
            return 1.0;
        }
        let q0 = barrier_momentum(p0, &self.barrier, &self.regime);
        let Ok(m) = MatchingCoefficients::for_barrier(p0, q0, &self.barrier, &self.regime, self.synthesis.delta) else {
            return 1.0;
        };
        let ratio = (m.u() / m.v()).norm();
        let s0 = momentum_slope(p0, &self.barrier, &self.regime).re.abs().max(1e-12);
        let cycles =
            ((self.t_end() * self.packet.velocity() - self.packet.x0().abs()) / (2.0 * s0)).max(0.0).ceil() + 1.0;
        ratio.max(1.0).powf(cycles)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tracks {
    pub incident: Option<TrackReport>,
    pub transmitted: Option<TrackReport>,
    pub terms: Vec<TrackReport>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    /// Spectral snapshots, or oracle snapshots for an oracle-only run.
    pub snapshots: Vec<FieldSnapshot>,
    /// Oracle snapshots when both methods ran.
    pub oracle: Option<Vec<FieldSnapshot>>,
    pub charges: Vec<ChargeReport>,
    /// Half-step oracle charge at each snapshot.
    pub oracle_charges: Vec<f64>,
    pub tracks: Tracks,
    pub summary: Vec<(String, f64)>,
}

impl ScenarioRun {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

fn component_track(
    syn: &Synthesizer,
    which: Component,
    grid: &Grid1D,
    times: &[f64],
    reference: Option<Component>,
) -> Result<TrackReport> {
    // tunnelled components can be far below the absolute empty-region floor
    let normalized = |w: Component, t: f64| {
        syn.component(w, grid, t).map(|mut s| {
            let peak = s.rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            if peak > 0.0 {
                s.rho.iter_mut().for_each(|r| *r /= peak);
            }
            s
        })
    };
    let snaps = times.iter().map(|&t| normalized(which, t)).collect::<Result<Vec<_>>>()?;
    let refs = match reference {
        Some(r) => Some(times.iter().map(|&t| normalized(r, t)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    track(&snaps, RegionSelector::All, refs.as_deref())
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let den: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    num / den
}

/// Relative L2 distance over `X > x_from`.
pub fn l2_beyond(a: &FieldSnapshot, b: &FieldSnapshot, x_from: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..a.grid.len() {
        if a.grid.point(i) > x_from {
            num += (a.psi[i] - b.psi[i]).norm_sqr();
            den += b.psi[i].norm_sqr();
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        f64::NAN
    }
}

struct OracleResult {
    snapshots: Vec<FieldSnapshot>,
    charges: Vec<f64>,
    leakage: f64,
}

fn run_oracle(cfg: &ScenarioConfig) -> Result<OracleResult> {
    let opts = OracleOptions { growth_allowance: (10.0 * cfg.predicted_growth()).max(1e6), ..cfg.oracle };
    let mut state = init_from_packet(&cfg.packet, &cfg.barrier, &cfg.x_grid, &opts)?;
    // initial support edge: the packet envelope is below 1e-16 of its peak beyond this
    let edge = cfg.packet.x0() + 2.0 * (1e16f64).ln().sqrt() / cfg.packet.dp();
    let mut snapshots = Vec::with_capacity(cfg.times.len());
    let mut charges = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        snapshots.extend(state.run_and_snapshot(&[t])?);
        charges.push(state.charge());
    }
    let leakage = state.leakage_beyond(edge + state.time() + 0.5);
    Ok(OracleResult { snapshots, charges, leakage })
}

pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    info!("running scenario {}", cfg.name());
    let mut summary: Vec<(String, f64)> = Vec::new();
    let mut push = |k: &str, v: f64| summary.push((k.to_string(), v));
    let t_end = cfg.t_end();

    let oracle = if cfg.method == Method::Spectral { None } else { Some(run_oracle(cfg)?) };
    let mut tracks = Tracks::default();
    let spectral = if cfg.method == Method::Oracle {
        None
    } else {
        let syn = Synthesizer::new(cfg.kind, &cfg.packet, &cfg.barrier, &cfg.synthesis, t_end)?;
        let snaps = cfg.times.iter().map(|&t| syn.snapshot(&cfg.x_grid, t)).collect::<Result<Vec<_>>>()?;
        let coarse = Grid1D::new(cfg.x_grid.min(), cfg.x_grid.max(), cfg.x_grid.len().min(TRACK_POINTS))?;
        let incident = component_track(&syn, Component::Incident, &coarse, &cfg.times, None)?;
        push("group_velocity", cfg.packet.velocity());
        push("com_velocity", slope(&incident.times, &incident.com));
        if cfg.kind != SolutionKind::Free {
            let transmitted =
                component_track(&syn, Component::Transmitted, &coarse, &cfg.times, Some(Component::Matched));
            match transmitted {
                Ok(tr) => {
                    let reference =
                        TrackReport { times: tr.times.clone(), com: tr.reference_com.clone(), ..Default::default() };
                    match advancement(&tr, &reference, t_end) {
                        Ok(a) => push("advancement", a),
                        Err(e) => warn!("no advancement: {e}"),
                    }
                    // the dominant sub-packet alone, ignoring weaker echoes
                    let k = tr.times.len() - 1;
                    let matched_peak = component_track(&syn, Component::Matched, &coarse, &cfg.times[k - 1..], None)
                        .ok()
                        .and_then(|r| r.peak.last().copied());
                    if let Some(mp) = matched_peak {
                        push("advancement_peak", tr.peak[k] - mp);
                    }
                    match (incident.crossing(0.0), tr.emergence(1.0)) {
                        (Ok(entry), Ok(exit)) => {
                            push("arrival_time", entry);
                            push("emergence_time", exit);
                            push("dwell_time", exit - entry);
                        }
                        (Err(e), _) | (_, Err(e)) => warn!("no dwell time: {e}"),
                    }
                    tracks.transmitted = Some(tr);
                }
                Err(e) => warn!("transmitted packet not tracked: {e}"),
            }
        }
        // sub-packets are distinct events only on the causal (divergent) branch
        if cfg.kind.branch(cfg.packet.p0(), &cfg.barrier, &cfg.regime) == Some(MreBranch::Divergent) {
            for n in 0..TRACKED_TERMS {
                let Ok(tr) = component_track(&syn, Component::TransmittedTerm(n), &coarse, &cfg.times, None) else {
                    break;
                };
                if let Ok(t) = tr.emergence(1.0) {
                    push(&format!("emergence_term_{n}"), t);
                }
                tracks.terms.push(tr);
            }
        }
        tracks.incident = Some(incident);
        Some(snaps)
    };

    let (snapshots, oracle_snaps, oracle_charges) = match (spectral, oracle) {
        (Some(s), None) => (s, None, Vec::new()),
        (None, Some(o)) => {
            push("oracle_causality_leakage", o.leakage);
            (o.snapshots, None, o.charges)
        }
        (Some(s), Some(o)) => {
            push("oracle_causality_leakage", o.leakage);
            let zone = cfg.barrier.edge_zone();
            let last = s.len() - 1;
            push("oracle_l2_transmitted", l2_beyond(&o.snapshots[last], &s[last], 1.0 + zone));
            (s, Some(o.snapshots), o.charges)
        }
        (None, None) => unreachable!("a method always runs"),
    };
    if let Some(&q0) = oracle_charges.first() {
        let drift = oracle_charges.iter().map(|q| ((q - q0) / q0).abs()).fold(0.0, f64::max);
        push("oracle_charge_drift", drift);
    }

    let charges = snapshots.iter().map(|s| total_charge(&s.rho, &s.grid)).collect::<Result<Vec<_>>>()?;
    let last = charges.last().expect("snapshots");
    push("charge_total", last.total);
    push("charge_left", last.exterior_left);
    push("charge_interior", last.interior);
    push("charge_right", last.exterior_right);
    let peak = charges.iter().map(|c| c.interior.abs()).fold(0.0, f64::max);
    push("interior_peak", peak);
    if peak > 0.0 {
        push("interior_final_ratio", last.interior.abs() / peak);
    }
    Ok(ScenarioRun { config: cfg.clone(), snapshots, oracle: oracle_snaps, charges, oracle_charges, tracks, summary })
}
