//! Produce the same CSV trajectory and JSON report as `memlab run`, in
//! memory, and print the first rows.
//!
//! cargo run --release --example cli_outputs

use memlab::cli::{run_experiment, trajectory_csv};
use memlab::expdsl::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = preset("fig9_10_axon").unwrap();
    let (traj, report) = run_experiment(&config, Vec::new())?;
    let csv = String::from_utf8(trajectory_csv(&traj)?)?;
    for line in csv.lines().take(5) {
        println!("{line}");
    }
    println!("... {} rows", traj.len());
    let json = serde_json::to_string_pretty(&report)?;
    println!("{}", &json[..json.len().min(600)]);
    Ok(())
}
