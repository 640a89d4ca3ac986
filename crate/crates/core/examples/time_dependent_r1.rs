//! The switched chain with R1 alternating between 3 Ohm and 1 Ohm every half
//! period. The loop is still pinched, but the flux gains a fixed amount each
//! cycle. At 10 Hz no switch closes and each half period is a straight line
//! whose slopes differ by the 2 Ohm step of R1.
//!
//! cargo run --release --example time_dependent_r1

use memlab::analyze::{half_period_fits, DEFAULT_PHI_Q_TOL};
use memlab::{
    phi_q_classify, simulate_steady, Drive, SimControls, SourceKind, SwitchedNetwork, R1,
};

fn network(period: f64) -> SwitchedNetwork {
    SwitchedNetwork {
        r1: R1::Piecewise {
            high: 3.0,
            low: 1.0,
            period,
        },
        r_branch: 0.3,
        n_switches: 10,
        q0: SwitchedNetwork::q0_for(1.0, 0.1, 10),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let slow = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
    let controls = SimControls {
        record_cycles: 3,
        ..SimControls::for_drive(&slow)
    };
    let traj = simulate_steady(&network(10.0), &slow, &controls)?;
    let class = phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?;
    println!(
        "0.1 Hz: phi-q {:?}, flux gain per cycle {:?} Wb",
        class.kind, class.cycle_dphi
    );

    let fast = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 10.0);
    let traj = simulate_steady(&network(0.1), &fast, &SimControls::for_drive(&fast))?;
    let [high, low] = half_period_fits(&traj)?;
    println!(
        "10 Hz: slopes {:.4} Ohm and {:.4} Ohm, difference {:.4} Ohm",
        high.slope,
        low.slope,
        high.slope - low.slope
    );
    Ok(())
}
