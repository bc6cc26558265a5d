use klein_core::numerics::{integrate_one_sided, Complex64, Grid1D};
use klein_core::potentials::barrier_momentum;
use klein_core::scenarios::builtin;
use klein_core::wavepacket::Synthesizer;

// Causal smooth barrier: every reflection inside the barrier multiplies the
// antiparticle charge by |(P0+Q0)/(P0-Q0+i delta)|^2.
#[test]
fn interior_charge_grows_by_edge_factor_per_traversal() {
    let mut cfg = builtin("fig4a_causal").unwrap();
    let p0 = cfg.packet.p0();
    let q0 = barrier_momentum(p0, &cfg.barrier, &cfg.regime);
    let delta = cfg.barrier.pole_shift().unwrap();
    let edge = (Complex64::new(p0, 0.0) + q0) / (Complex64::new(p0, delta) - q0);
    let predicted = 2.0 * edge.norm().ln();

    let traversal = 1.0 / cfg.packet.velocity();
    let times: Vec<f64> = (0..6).map(|k| 8.0 + k as f64 * traversal).collect();
    cfg.times = times.clone();
    let grid = Grid1D::new(-0.5, 1.5, 6401).unwrap();
    let syn = Synthesizer::new(cfg.kind, &cfg.packet, &cfg.barrier, &cfg.synthesis, cfg.t_end()).unwrap();
    let logs: Vec<f64> = times
        .iter()
        .map(|&t| {
            let s = syn.snapshot(&grid, t).unwrap();
            integrate_one_sided(&s.rho, &grid, 0.0, 1.0).unwrap().abs().ln()
        })
        .collect();
    let steps: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = steps.iter().sum::<f64>() / steps.len() as f64;
    assert!(((mean - predicted) / predicted).abs() < 0.15, "growth per traversal {mean} vs {predicted} ({steps:?})");
}
