//! Transport checked against closed-form solutions and a molar balance.

use alp_core::config::{reference_config, ReferenceRun};
use alp_core::recipe::{Action, RecipeLine};
use alp_core::transport::Reactor;
use alp_core::ReactorConfig;

fn inert(sections: usize, diffusion: f64) -> ReactorConfig {
    let mut cfg = reference_config(ReferenceRun::Run2);
    cfg.reactions.clear();
    cfg.geometry.sections = sections;
    for c in &mut cfg.chemicals {
        c.diffusion_coefficient = diffusion;
    }
    cfg
}

/// Relative L² distance between the simulated profile after `t` seconds and
/// the heat kernel for a unit pulse released at the centre.
fn diffusion_error(sections: usize, d: f64, t: f64) -> f64 {
    let mut cfg = inert(sections, d);
    cfg.initial_conditions.mfc_flow = 0.0;
    let reactor = Reactor::new(cfg);
    let mut state = reactor.initial_state();
    state.controls.mfc_flow = 0.0;
    let g = reactor.config().geometry.clone();
    let dx = g.section_width();
    let mid = sections / 2;
    state.concentrations[0][mid] = 1.0 / dx;
    let x0 = g.section_center(mid);

    let dt = reactor.stable_dt(&state).unwrap();
    let steps = (t / dt).ceil() as usize;
    let dt = t / steps as f64;
    for _ in 0..steps {
        reactor.step(&mut state, dt).unwrap();
    }
    let var = 2.0 * d * t;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, c) in state.concentrations[0].iter().enumerate() {
        let x = g.section_center(i);
        let exact = (-(x - x0).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        num += (c - exact).powi(2);
        den += exact * exact;
    }
    (num / den).sqrt()
}

/// Distance (in sections) between the half-height point of an advected
/// front and `v·t`, once the exact front has reached mid-tube.
fn advection_front_error(sections: usize) -> f64 {
    let reactor = Reactor::new(inert(sections, 1e-12));
    let mut state = reactor.initial_state();
    state
        .controls
        .apply(&RecipeLine::new(Action::Valve, 3, 1.0, 0.0));
    let inlet = reactor.apply_boundary(&state).unwrap().inlet[2];
    let flow = reactor.flow(&state.controls).unwrap();
    let g = reactor.config().geometry.clone();
    let t = 0.5 * g.length / flow.axial_velocity;
    let dt = reactor.stable_dt(&state).unwrap();
    let steps = (t / dt).ceil() as usize;
    let dt = t / steps as f64;
    for _ in 0..steps {
        reactor.step(&mut state, dt).unwrap();
    }
    let c = &state.concentrations[2];
    let half = 0.5 * inlet;
    let k = c.iter().position(|&v| v < half).expect("front inside the tube");
    // linear interpolation between the bracketing section centres
    let (x0, x1) = (g.section_center(k - 1), g.section_center(k));
    let front = x0 + (c[k - 1] - half) / (c[k - 1] - c[k]) * (x1 - x0);
    ((front - 0.5 * g.length) / g.section_width()).abs()
}

#[test]
fn diffusion_matches_heat_kernel() {
    let start = std::time::Instant::now();
    let err = diffusion_error(200, 1e-3, 10.0);
    assert!(err < 0.02, "L2 error {err}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn diffusion_error_shrinks_with_refinement() {
    let coarse = diffusion_error(50, 1e-3, 5.0);
    let fine = diffusion_error(200, 1e-3, 5.0);
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn advection_front_position() {
    let start = std::time::Instant::now();
    let err = advection_front_error(200);
    assert!(err < 2.0, "front off by {err} sections");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn inert_gas_moles_balance_boundary_fluxes() {
    let reactor = Reactor::new(inert(80, 0.008));
    let mut state = reactor.initial_state();
    state
        .controls
        .apply(&RecipeLine::new(Action::Valve, 2, 1.0, 0.0));
    let dx = reactor.config().geometry.section_width();
    let dt = reactor.stable_dt(&state).unwrap();
    let (mut net, mut delivered) = (0.0, 0.0);
    for n in 0..600 {
        if n == 300 {
            state
                .controls
                .apply(&RecipeLine::new(Action::Valve, 2, 0.0, 0.0));
        }
        let f = reactor.step(&mut state, dt).unwrap();
        net += dt * (f.inflow[1] - f.outflow[1]);
        delivered += dt * f.inflow[1].max(0.0);
    }
    let held: f64 = state.concentrations[1].iter().sum::<f64>() * dx;
    assert!(held > 1e-3 * delivered, "{held} of {delivered}");
    assert!((held - net).abs() <= 1e-10 * delivered, "{held} vs {net}");
}

#[test]
fn reactive_moles_balance_including_surface() {
    // C + sB -> sC + E on the reference network: every C molecule that
    // leaves the gas converts one site.
    let reactor = Reactor::new(reference_config(ReferenceRun::Run2));
    let mut state = reactor.initial_state();
    state
        .controls
        .apply(&RecipeLine::new(Action::Valve, 3, 1.0, 0.0));
    let cfg = reactor.config().clone();
    let dx = cfg.geometry.section_width();
    let wall = 4.0 / cfg.geometry.diameter;
    let sigma = cfg.surfaces[cfg.surface_index("sC").unwrap()].site_density;
    let sc = cfg.surface_index("sC").unwrap();
    let dt = reactor.stable_dt(&state).unwrap();
    let mut net = 0.0;
    for _ in 0..1500 {
        let f = reactor.step(&mut state, dt).unwrap();
        net += dt * (f.inflow[2] - f.outflow[2]);
    }
    let gas: f64 = state.concentrations[2].iter().sum::<f64>() * dx;
    let sites: f64 = state.coverages[sc].iter().sum::<f64>() * dx * sigma * wall;
    assert!(sites > 0.0 && gas > 0.0);
    let e: f64 = state.concentrations[4].iter().sum::<f64>() * dx;
    assert!(e > 0.0);
    assert!(((gas + sites) - net).abs() <= 1e-8 * net, "{} vs {net}", gas + sites);
}

#[test]
fn concentrations_stay_nonnegative() {
    let reactor = Reactor::new(reference_config(ReferenceRun::Run2));
    let mut state = reactor.initial_state();
    state
        .controls
        .apply(&RecipeLine::new(Action::Valve, 1, 1.0, 0.0));
    let dt = reactor.stable_dt(&state).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..3000 {
        if n == 500 {
            state
                .controls
                .apply(&RecipeLine::new(Action::Valve, 1, 0.0, 0.0));
        }
        worst = worst.min(reactor.step(&mut state, dt).unwrap().min_raw);
    }
    assert!(worst >= -1e-12, "{worst}");
}
