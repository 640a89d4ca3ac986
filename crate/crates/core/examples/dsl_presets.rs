//! Parse an experiment written in the text format, run it, and show how the
//! built-in presets look after a serialize round trip.
//!
//! cargo run --release --example dsl_presets

use memlab::cli::run_experiment;
use memlab::expdsl::{to_dsl, PRESETS};
use memlab::parse_experiment;

const TEXT: &str = r#"
# a slower thermistor with a heavier body
experiment heavy
model thermistor { c=5mJ/K }
drive current sinusoid { amplitude=0.5mA frequency=2mHz }
sim { dt=0.25s transient_cycles=10 record_cycles=2 }
analyze { pinch loop_area phi_q }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parsed = parse_experiment(TEXT)?;
    for w in &parsed.warnings {
        println!("warning: {w}");
    }
    let (_, report) = run_experiment(&parsed.config, parsed.warnings.clone())?;
    println!("{}", serde_json::to_string_pretty(&report.phi_q)?);

    for (name, description, _) in PRESETS {
        println!("{name:18} {description}");
    }
    let fig4_5 = memlab::expdsl::preset("fig4_5").unwrap();
    print!("\n{}", to_dsl(&fig4_5));

    if let Err(e) = parse_experiment("experiment x\nmodel thermistor { delta=0.1mW }\n") {
        println!("\nrejected: {e}");
    }
    Ok(())
}
