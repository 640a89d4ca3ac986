//! Charge-switched resistor chain: ten 0.3 Ohm resistors are shorted one by
//! one as charge accumulates. The result is an ideal memristor whose flux is
//! a function of charge alone.
//!
//! cargo run --release --example switched_memristor

use memlab::analyze::DEFAULT_PHI_Q_TOL;
use memlab::oneport::EventKind;
use memlab::{
    phi_q_classify, pinch_test, simulate_steady, Drive, SimControls, SourceKind, SwitchedNetwork,
    R1,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
    let net = SwitchedNetwork {
        r1: R1::Constant { ohms: 1.0 },
        r_branch: 0.3,
        n_switches: 10,
        q0: SwitchedNetwork::q0_for(1.0, 0.1, 10),
    };
    let controls = SimControls::for_drive(&drive);
    let traj = simulate_steady(&net, &drive, &controls)?;
    let cycle = traj.cycle(0).unwrap();

    println!("q0 = {:.6} C", net.q0);
    for e in &cycle.events {
        match e.kind {
            EventKind::Closing { level } => println!(
                "t = {:8.4} s  switch {level:2} closes",
                e.t - cycle.samples[0].t
            ),
            EventKind::Opening { level } => println!(
                "t = {:8.4} s  switch {level:2} opens",
                e.t - cycle.samples[0].t
            ),
            EventKind::Breakpoint => {}
        }
    }
    let pinch = pinch_test(&traj, 1e-6 * traj.max_abs_i(), 1e-6 * traj.max_abs_v())?;
    let class = phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?;
    println!(
        "pinched: {}, phi-q: {:?} (spread {:.1e} Wb)",
        pinch.pinched, class.kind, class.max_phi_spread_at_equal_q
    );
    Ok(())
}
