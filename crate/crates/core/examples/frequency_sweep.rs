//! Loop area of the switched chain versus frequency with q0 held at its
//! 0.1 Hz value. Faster drives move less charge, fewer switches close and
//! the loop shrinks.
//!
//! cargo run --release --example frequency_sweep

use memlab::analyze::area_monotonicity;
use memlab::{frequency_sweep, Drive, SimControls, SourceKind, SwitchedNetwork, R1};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
    let net = SwitchedNetwork {
        r1: R1::Constant { ohms: 1.0 },
        r_branch: 0.3,
        n_switches: 10,
        q0: SwitchedNetwork::q0_for(1.0, 0.1, 10),
    };
    let freqs = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6];
    let rows = frequency_sweep(&net, &drive, &freqs, &SimControls::for_drive(&drive))?;
    for r in &rows {
        println!(
            "{:5.2} Hz  area {:.4}  {:?}",
            r.frequency, r.normalized_area, r.classification.kind
        );
    }
    println!("{:?}", area_monotonicity(&rows));
    Ok(())
}
