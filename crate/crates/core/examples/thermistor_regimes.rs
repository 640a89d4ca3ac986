//! Thermistor under a 0.5 mA sinusoid at three frequencies.
//!
//! Slow drives let the temperature follow the power and the v-i curve is a
//! single line; near the thermal time constant the loop opens; fast drives
//! freeze the temperature and the loop collapses onto a line again.
//!
//! cargo run --release --example thermistor_regimes

use memlab::analyze::DEFAULT_PHI_Q_TOL;
use memlab::{
    loop_area, phi_q_classify, simulate_steady, Drive, SimControls, SourceKind, Thermistor,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let th = Thermistor::default();
    println!(
        "{:>10}  {:>12}  {:>18}  {:>10}",
        "f [Hz]", "norm. area", "phi-q", "T range [K]"
    );
    for (f, dt, transient) in [(1e-6, 10.0, 1), (1e-2, 0.05, 20), (10.0, 5e-5, 300)] {
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 0.5e-3, f);
        let controls = SimControls {
            dt,
            transient_cycles: transient,
            event_tolerance: dt * 1e-9,
            ..SimControls::for_drive(&drive)
        };
        let traj = simulate_steady(&th, &drive, &controls)?;
        let area = loop_area(&traj.cycle(0).unwrap())?;
        let class = phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?;
        let temps = traj.samples.iter().map(|r| r.state[0]);
        let (lo, hi) = temps.fold((f64::MAX, f64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
        println!(
            "{f:>10.0e}  {:>12.3e}  {:>18?}  {:>10.4}",
            area.normalized,
            class.kind,
            hi - lo
        );
    }
    Ok(())
}
