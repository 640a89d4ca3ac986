//! A 0.1 F capacitor across R1 stores energy, so the voltage no longer
//! vanishes with the current and the device briefly acts as a source.
//!
//! cargo run --release --example capacitor_circuit

use memlab::{
    pinch_test, simulate_steady, CapacitorCircuit, Drive, SimControls, SourceKind, SwitchedNetwork,
    R1,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circuit = CapacitorCircuit {
        base: SwitchedNetwork {
            r1: R1::Constant { ohms: 3.0 },
            r_branch: 0.3,
            n_switches: 10,
            q0: SwitchedNetwork::q0_for(1.0, 0.1, 10),
        },
        cap: 0.1,
    };
    let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
    let controls = SimControls {
        transient_cycles: 10,
        ..SimControls::for_drive(&drive)
    };
    let traj = simulate_steady(&circuit, &drive, &controls)?;
    let pinch = pinch_test(&traj, 1e-6 * traj.max_abs_i(), 1e-6 * traj.max_abs_v())?;
    println!(
        "pinched: {} (|v| at i = 0 is {:.1}% of max |v|)",
        pinch.pinched,
        100.0 * pinch.worst_v_at_zero_i / traj.max_abs_v()
    );
    let returned: f64 = traj
        .cycle(0)
        .unwrap()
        .samples
        .windows(2)
        .map(|w| 0.5 * (w[0].v * w[0].i + w[1].v * w[1].i) * traj.dt)
        .filter(|e| *e < 0.0)
        .sum();
    println!(
        "energy returned to the source per cycle: {:.4} J",
        -returned
    );
    Ok(())
}
