//! Generators shared by the integration tests.

#![allow(dead_code)]

use memlab::expdsl::{Analyses, ExperimentConfig, Outputs};
use memlab::{
    Axon, CapacitorCircuit, Drive, Model, SimControls, SourceKind, SwitchedNetwork, Thermistor,
    Waveform, R1,
};
use proptest::prelude::*;

/// Positive values spread over many decades, with full-width mantissas.
pub fn magnitude() -> impl Strategy<Value = f64> {
    (1.0f64..10.0, -9i32..9).prop_map(|(m, e)| m * 10f64.powi(e))
}

fn r1() -> impl Strategy<Value = R1> {
    prop_oneof![
        magnitude().prop_map(|ohms| R1::Constant { ohms }),
        (magnitude(), magnitude(), magnitude()).prop_map(|(high, low, period)| R1::Piecewise {
            high,
            low,
            period
        }),
    ]
}

fn network() -> impl Strategy<Value = SwitchedNetwork> {
    (r1(), magnitude(), 1u32..40, magnitude()).prop_map(|(r1, r_branch, n_switches, q0)| {
        SwitchedNetwork {
            r1,
            r_branch,
            n_switches,
            q0,
        }
    })
}

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![
        (
            magnitude(),
            magnitude(),
            magnitude(),
            magnitude(),
            magnitude()
        )
            .prop_map(|(delta, r0, t0, beta, c)| Model::Thermistor(Thermistor {
                delta,
                r0,
                t0,
                beta,
                c
            })),
        (
            magnitude(),
            magnitude(),
            magnitude(),
            magnitude(),
            magnitude(),
            any::<bool>()
        )
            .prop_map(|(g_k, e_k, gamma, v_hat, tau, hh_form)| Model::Axon(Axon {
                g_k,
                e_k,
                gamma,
                v_hat,
                tau,
                hh_form
            })),
        network().prop_map(Model::Switched),
        (network(), magnitude())
            .prop_map(|(base, cap)| Model::Capacitor(CapacitorCircuit { base, cap })),
    ]
}

fn waveform() -> impl Strategy<Value = Waveform> {
    prop_oneof![
        (magnitude(), magnitude(), -10.0f64..10.0).prop_map(|(amplitude, frequency, phase)| {
            Waveform::Sinusoid {
                amplitude,
                frequency,
                phase,
            }
        }),
        (magnitude(), magnitude(), 0.01f64..=1.0).prop_map(|(amplitude, frequency, duty)| {
            Waveform::SquareWave {
                amplitude,
                frequency,
                duty,
            }
        }),
    ]
}

fn analyses() -> impl Strategy<Value = Analyses> {
    let sweep = prop::option::of(
        (magnitude(), prop::collection::vec(1.01f64..10.0, 0..5)).prop_map(|(first, growth)| {
            let mut f = first;
            let mut freqs = vec![f];
            freqs.extend(growth.into_iter().map(|g| {
                f *= g;
                f
            }));
            freqs
        }),
    );
    (any::<[bool; 4]>(), sweep).prop_map(|([pinch, loop_area, phi_q, linearity], sweep)| Analyses {
        pinch,
        loop_area,
        phi_q,
        linearity,
        sweep,
    })
}

fn outputs() -> impl Strategy<Value = Outputs> {
    let path = || prop::option::of("[A-Za-z0-9_./ -]{1,24}");
    (path(), path()).prop_map(|(csv, json)| Outputs { csv, json })
}

/// Valid experiment configurations: the drive kind matches the model and
/// the step respects the period.
pub fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        "[A-Za-z_][A-Za-z0-9_]{0,15}",
        model(),
        waveform(),
        (0u32..500, 0u32..50, 1u32..10, 1e-6f64..0.99, magnitude()),
        analyses(),
        outputs(),
    )
        .prop_map(
            |(
                name,
                model,
                waveform,
                (extra_steps, transient, record, tol_frac, ss_tol),
                analyses,
                outputs,
            )| {
                let kind = match model {
                    Model::Axon(_) => SourceKind::VoltageSource,
                    _ => SourceKind::CurrentSource,
                };
                let drive = Drive { kind, waveform };
                let dt = drive.period() / (200 + extra_steps) as f64;
                let controls = SimControls {
                    dt,
                    transient_cycles: transient,
                    record_cycles: record,
                    event_tolerance: dt * tol_frac,
                    steady_state_rel_tol: ss_tol,
                };
                ExperimentConfig {
                    name,
                    model,
                    drive,
                    controls,
                    analyses,
                    outputs,
                }
            },
        )
}
