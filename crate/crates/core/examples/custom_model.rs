//! Any type implementing `OnePort` can be simulated and analysed. Here a
//! charge-controlled memristor with a cubic flux-charge law,
//! phi(q) = a q + b q^3, so M(q) = a + 3 b q^2.
//!
//! cargo run --release --example custom_model

use memlab::analyze::DEFAULT_PHI_Q_TOL;
use memlab::oneport::{Regime, StateVec};
use memlab::{
    loop_area, phi_q_classify, pinch_test, simulate_steady, Drive, InputKind, OnePort, SimControls,
    SourceKind,
};
use smallvec::smallvec;

struct CubicMemristor {
    a: f64,
    b: f64,
}

impl OnePort for CubicMemristor {
    fn name(&self) -> &'static str {
        "cubic"
    }

    fn input_kind(&self) -> InputKind {
        InputKind::CurrentControlled
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> StateVec {
        smallvec![0.0]
    }

    fn derivative(&self, _x: &[f64], u: f64, _t: f64, _regime: Regime, dxdt: &mut [f64]) {
        dxdt[0] = u;
    }

    fn output(&self, x: &[f64], u: f64, _t: f64, _regime: Regime) -> f64 {
        (self.a + 3.0 * self.b * x[0] * x[0]) * u
    }

    fn output_factor(&self, x: &[f64], _u: f64, _t: f64, _regime: Regime) -> Option<f64> {
        Some(self.a + 3.0 * self.b * x[0] * x[0])
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = CubicMemristor { a: 1.0, b: 2.0 };
    let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.5);
    let traj = simulate_steady(&m, &drive, &SimControls::for_drive(&drive))?;
    let pinch = pinch_test(&traj, 1e-6 * traj.max_abs_i(), 1e-6 * traj.max_abs_v())?;
    let area = loop_area(&traj.cycle(0).unwrap())?;
    let class = phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?;
    println!(
        "pinched {}, normalized area {:.4}, phi-q {:?}",
        pinch.pinched, area.normalized, class.kind
    );
    let worst = traj
        .samples
        .iter()
        .map(|r| (r.phi - (m.a * r.q + m.b * r.q.powi(3))).abs())
        .fold(0.0, f64::max);
    println!("largest deviation from phi = a q + b q^3: {worst:.2e} Wb");
    Ok(())
}
