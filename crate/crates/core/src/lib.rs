//! Simulation and analysis of memristive one-ports.
//!
//! A model is a [`OnePort`]: a state equation driven by a current or voltage
//! and an output equation. [`integrate`] runs it under a periodic [`Drive`]
//! with classical RK4, splitting steps at resistance jumps; [`analyze`] then
//! classifies the resulting trajectory (pinching at the origin, hysteresis
//! loop area, flux-linkage vs charge behaviour). Experiments can be written
//! in a small text format ([`expdsl`]) and run from the `memlab` binary
//! ([`cli`]).

pub mod analyze;
pub mod cli;
pub mod expdsl;
pub mod integrate;
pub mod models;
pub mod oneport;

pub use analyze::{
    frequency_sweep, linearity_fit, loop_area, phi_q_classify, pinch_test, LinearFit, LoopArea,
    PhiQClassification, PhiQKind, PinchReport, SweepRow,
};

pub use expdsl::{builtin_presets, parse_experiment, ExperimentConfig};
pub use integrate::{detect_steady_state, simulate, simulate_steady, SimControls, SimError};
pub use models::{Axon, CapacitorCircuit, Model, SwitchedNetwork, Thermistor, R1};
pub use oneport::{
    accumulate_integrals, evaluate_output, Drive, InputKind, OnePort, Record, SourceKind,
    Trajectory, Waveform,
};
