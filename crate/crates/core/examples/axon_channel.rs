//! Potassium channel driven by a 5 V, 50 mHz sinusoid.
//!
//! The loop is pinched and the gating variable stays periodic, yet the
//! charge gains the same amount every cycle, so the phi-q curve never closes.
//!
//! cargo run --release --example axon_channel

use memlab::analyze::DEFAULT_PHI_Q_TOL;
use memlab::{phi_q_classify, pinch_test, simulate_steady, Axon, Drive, SimControls, SourceKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let axon = Axon::default();
    let drive = Drive::sinusoid(SourceKind::VoltageSource, 5.0, 0.05);
    let controls = SimControls {
        transient_cycles: 5,
        record_cycles: 5,
        ..SimControls::for_drive(&drive)
    };
    let traj = simulate_steady(&axon, &drive, &controls)?;
    let pinch = pinch_test(&traj, 1e-6 * traj.max_abs_i(), 1e-6 * traj.max_abs_v())?;
    let class = phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?;
    println!(
        "pinched: {} (worst |v| at i = 0: {:.1e} V)",
        pinch.pinched, pinch.worst_v_at_zero_i
    );
    println!("phi-q: {:?}", class.kind);
    for (k, dq) in class.cycle_dq.iter().enumerate() {
        println!("  charge step between cycles {k} and {}: {dq:.6} C", k + 1);
    }
    let x1 = traj.samples.iter().map(|r| r.state[0]);
    let (lo, hi) = x1.fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
    println!("gate x1 in [{lo:.4}, {hi:.4}]");
    Ok(())
}
