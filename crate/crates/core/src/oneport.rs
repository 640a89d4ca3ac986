//! One-port abstraction shared by every model: a state equation
//! `dx/dt = f(x, u, t)`, an output equation `y = g(x, u, t) u`, the periodic
//! sources that drive them, and the sampled trajectories they produce.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// State vector storage. Every shipped model has at most two state variables.
pub type StateVec = SmallVec<[f64; 2]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    /// Input is a current (A), output a voltage (V).
    CurrentControlled,
    /// Input is a voltage (V), output a current (A).
    VoltageControlled,
}

/// Discrete configuration that is held fixed while an integration sub-step
/// is evaluated.
///
/// `level` is the threshold band of the model's switch-control variable
/// (the number of closed switches for the charge-switched networks) and
/// `branch` indexes the piece of an explicitly time-periodic parameter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Regime {
    pub level: u32,
    pub branch: u8,
}

/// Describes a state variable whose crossings of evenly spaced thresholds
/// switch the model between resistance levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchControl {
    /// Index of the controlling variable in the state vector.
    pub state_index: usize,
    /// Threshold spacing; the `k`th threshold sits at `k * unit`.
    pub unit: f64,
    /// Number of thresholds (`1..=max_level`).
    pub max_level: u32,
}

impl SwitchControl {
    /// `clamp(floor(value / unit), 0, max_level)`.
    pub fn level_of(&self, value: f64) -> u32 {
        let raw = (value / self.unit).floor();
        if raw <= 0.0 || raw.is_nan() {
            0
        } else if raw >= self.max_level as f64 {
            self.max_level
        } else {
            raw as u32
        }
    }

    pub fn threshold(&self, k: u32) -> f64 {
        k as f64 * self.unit
    }
}

/// A driven one-port with internal state.
///
/// Implementations must be pure: identical arguments always give identical
/// results. Piecewise-constant parts of a model (switch levels, periodic
/// resistor values) are selected through [`Regime`] so that an integrator can
/// hold them fixed across a sub-step and only change them at located events.
pub trait OnePort: Send + Sync {
    fn name(&self) -> &'static str;

    fn input_kind(&self) -> InputKind;

    fn state_dim(&self) -> usize;

    /// Default initial condition used by the presets.
    fn initial_state(&self) -> StateVec;

    /// Writes `dx/dt` into `dxdt` for a fixed regime.
    fn derivative(&self, x: &[f64], u: f64, t: f64, regime: Regime, dxdt: &mut [f64]);

    /// Output quantity `y` (a voltage for current-controlled ports).
    fn output(&self, x: &[f64], u: f64, t: f64, regime: Regime) -> f64;

    /// Output factor `g(x, u, t)` for models of the multiplicative
    /// memristive form `y = g u`. `None` for ports whose output is not
    /// proportional to the input.
    fn output_factor(&self, _x: &[f64], _u: f64, _t: f64, _regime: Regime) -> Option<f64> {
        None
    }

    fn switch_control(&self) -> Option<SwitchControl> {
        None
    }

    /// Branch of the explicitly time-dependent parameters, evaluated at a
    /// time strictly inside a breakpoint-free interval.
    fn branch_within(&self, _t: f64) -> u8 {
        0
    }

    /// Branch at an exact instant, following the model's own convention at
    /// breakpoints.
    fn branch_at(&self, t: f64) -> u8 {
        self.branch_within(t)
    }

    /// Smallest time-breakpoint strictly greater than `t`, if any.
    fn next_breakpoint(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Regime at an exact instant.
    fn regime_at(&self, x: &[f64], t: f64) -> Regime {
        Regime {
            level: self
                .switch_control()
                .map_or(0, |sc| sc.level_of(x[sc.state_index])),
            branch: self.branch_at(t),
        }
    }
}

impl<M: OnePort + ?Sized> OnePort for &M {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn input_kind(&self) -> InputKind {
        (**self).input_kind()
    }
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn initial_state(&self) -> StateVec {
        (**self).initial_state()
    }
    fn derivative(&self, x: &[f64], u: f64, t: f64, regime: Regime, dxdt: &mut [f64]) {
        (**self).derivative(x, u, t, regime, dxdt)
    }
    fn output(&self, x: &[f64], u: f64, t: f64, regime: Regime) -> f64 {
        (**self).output(x, u, t, regime)
    }
    fn output_factor(&self, x: &[f64], u: f64, t: f64, regime: Regime) -> Option<f64> {
        (**self).output_factor(x, u, t, regime)
    }
    fn switch_control(&self) -> Option<SwitchControl> {
        (**self).switch_control()
    }
    fn branch_within(&self, t: f64) -> u8 {
        (**self).branch_within(t)
    }
    fn branch_at(&self, t: f64) -> u8 {
        (**self).branch_at(t)
    }
    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        (**self).next_breakpoint(t)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OnePortError {
    #[error("non-finite output at x={x:?}, u={u}, t={t}")]
    NonFiniteOutput { x: Vec<f64>, u: f64, t: f64 },
    #[error("state has length {got}, model expects {expected}")]
    StateLength { expected: usize, got: usize },
}

/// Evaluates the output equation at an exact instant.
///
/// Returns exactly `0.0` for `u == 0` when the model has the multiplicative
/// form.
pub fn evaluate_output<M: OnePort + ?Sized>(
    model: &M,
    x: &[f64],
    u: f64,
    t: f64,
) -> Result<f64, OnePortError> {
    if x.len() != model.state_dim() {
        return Err(OnePortError::StateLength {
            expected: model.state_dim(),
            got: x.len(),
        });
    }
    let regime = model.regime_at(x, t);
    let y = match model.output_factor(x, u, t, regime) {
        Some(g) if !g.is_finite() => f64::NAN,
        Some(_) if u == 0.0 => 0.0,
        Some(g) => g * u,
        None => model.output(x, u, t, regime),
    };
    if y.is_finite() {
        Ok(y)
    } else {
        Err(OnePortError::NonFiniteOutput {
            x: x.to_vec(),
            u,
            t,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    CurrentSource,
    VoltageSource,
}

impl SourceKind {
    pub fn drives(self, kind: InputKind) -> bool {
        matches!(
            (self, kind),
            (SourceKind::CurrentSource, InputKind::CurrentControlled)
                | (SourceKind::VoltageSource, InputKind::VoltageControlled)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Waveform {
    /// `amplitude * sin(2 pi frequency t + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `+amplitude` for the first `duty` fraction of each period, `-amplitude`
    /// for the rest. `duty = 1` is a constant level.
    SquareWave {
        amplitude: f64,
        frequency: f64,
        duty: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriveError {
    #[error("drive amplitude must be finite and > 0, got {0}")]
    Amplitude(f64),
    #[error("drive frequency must be finite and > 0, got {0}")]
    Frequency(f64),
    #[error("square-wave duty must lie in (0, 1], got {0}")]
    Duty(f64),
    #[error("drive phase must be finite, got {0}")]
    Phase(f64),
}

/// Periodic independent source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub kind: SourceKind,
    pub waveform: Waveform,
}

impl Drive {
    pub fn sinusoid(kind: SourceKind, amplitude: f64, frequency: f64) -> Self {
        Drive {
            kind,
            waveform: Waveform::Sinusoid {
                amplitude,
                frequency,
                phase: 0.0,
            },
        }
    }

    pub fn square(kind: SourceKind, amplitude: f64, frequency: f64, duty: f64) -> Self {
        Drive {
            kind,
            waveform: Waveform::SquareWave {
                amplitude,
                frequency,
                duty,
            },
        }
    }

    pub fn validate(&self) -> Result<(), DriveError> {
        let (a, f) = (self.amplitude(), self.frequency());
        if !(a.is_finite() && a > 0.0) {
            return Err(DriveError::Amplitude(a));
        }
        if !(f.is_finite() && f > 0.0) {
            return Err(DriveError::Frequency(f));
        }
        match self.waveform {
            Waveform::Sinusoid { phase, .. } if !phase.is_finite() => Err(DriveError::Phase(phase)),
            Waveform::SquareWave { duty, .. } if !(duty > 0.0 && duty <= 1.0) => {
                Err(DriveError::Duty(duty))
            }
            _ => Ok(()),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self.waveform {
            Waveform::Sinusoid { amplitude, .. } | Waveform::SquareWave { amplitude, .. } => {
                amplitude
            }
        }
    }

    pub fn frequency(&self) -> f64 {
        match self.waveform {
            Waveform::Sinusoid { frequency, .. } | Waveform::SquareWave { frequency, .. } => {
                frequency
            }
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency()
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency()
    }

    /// Same waveform at a different frequency.
    pub fn with_frequency(&self, frequency: f64) -> Self {
        let mut d = *self;
        match &mut d.waveform {
            Waveform::Sinusoid { frequency: f, .. } | Waveform::SquareWave { frequency: f, .. } => {
                *f = frequency
            }
        }
        d
    }

    /// Source value at an exact instant (square waves are right-continuous).
    pub fn value(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * t + phase).sin(),
            Waveform::SquareWave { .. } => self.square_level(t),
        }
    }

    /// Source value on a breakpoint-free interval containing `t_mid`.
    /// Square waves ignore `t` and return the level that holds over the whole
    /// interval; smooth waveforms are evaluated at `t`.
    pub fn value_within(&self, t: f64, t_mid: f64) -> f64 {
        match self.waveform {
            Waveform::Sinusoid { .. } => self.value(t),
            Waveform::SquareWave { .. } => self.square_level(t_mid),
        }
    }

    fn square_level(&self, t: f64) -> f64 {
        let Waveform::SquareWave {
            amplitude,
            frequency,
            duty,
        } = self.waveform
        else {
            unreachable!()
        };
        let phase = (t * frequency).rem_euclid(1.0);
        if phase < duty {
            amplitude
        } else {
            -amplitude
        }
    }

    /// Smallest discontinuity of the source strictly after `t`.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        let Waveform::SquareWave {
            frequency, duty, ..
        } = self.waveform
        else {
            return None;
        };
        if duty >= 1.0 {
            return None;
        }
        let period = 1.0 / frequency;
        let k = (t * frequency).floor();
        [k + duty, k + 1.0, k + 1.0 + duty]
            .into_iter()
            .map(|c| c * period)
            .find(|&tb| tb > t)
    }
}

/// One sample of a simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    /// Input quantity.
    pub u: f64,
    /// Output quantity.
    pub y: f64,
    /// Device terminal voltage.
    pub v: f64,
    /// Device current.
    pub i: f64,
    /// Running integral of `v`.
    pub phi: f64,
    /// Running integral of `i`.
    pub q: f64,
    pub state: StateVec,
}

impl Record {
    /// Builds a sample with `phi = q = 0`; integrals are filled in by
    /// [`accumulate_integrals`].
    pub fn new(kind: InputKind, t: f64, u: f64, y: f64, state: StateVec) -> Self {
        let (v, i) = match kind {
            InputKind::CurrentControlled => (y, u),
            InputKind::VoltageControlled => (u, y),
        };
        Record {
            t,
            u,
            y,
            v,
            i,
            phi: 0.0,
            q: 0.0,
            state,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Switch-control variable rose through a threshold.
    Closing { level: u32 },
    /// Switch-control variable fell through a threshold.
    Opening { level: u32 },
    /// A time breakpoint of the model or the source.
    Breakpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory has no samples")]
    Empty,
    #[error("sample {index} at t={t} breaks the uniform spacing dt={dt}")]
    NonUniform { index: usize, t: f64, dt: f64 },
}

/// Uniformly sampled record of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Drive period the samples were aligned to.
    pub period: f64,
    /// Number of intervals per drive period (`period = samples_per_cycle * dt`).
    pub samples_per_cycle: usize,
    pub samples: Vec<Record>,
    /// Switch and breakpoint events inside the recorded window.
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of complete drive periods covered.
    pub fn cycles(&self) -> usize {
        if self.samples_per_cycle == 0 || self.samples.is_empty() {
            0
        } else {
            (self.samples.len() - 1) / self.samples_per_cycle
        }
    }

    /// The `k`th recorded cycle as its own trajectory, including both
    /// endpoints, with integrals re-zeroed at its first sample.
    pub fn cycle(&self, k: usize) -> Option<Trajectory> {
        if k >= self.cycles() {
            return None;
        }
        let n = self.samples_per_cycle;
        self.window(k * n, (k + 1) * n + 1)
    }

    /// Samples `start..end` with integrals re-zeroed at `start`; events are
    /// filtered to the window.
    pub fn window(&self, start: usize, end: usize) -> Option<Trajectory> {
        if start >= end || end > self.samples.len() {
            return None;
        }
        let mut samples = self.samples[start..end].to_vec();
        let (phi0, q0) = (samples[0].phi, samples[0].q);
        for r in &mut samples {
            r.phi -= phi0;
            r.q -= q0;
        }
        let (t0, t1) = (samples[0].t, samples[samples.len() - 1].t);
        let events = self
            .events
            .iter()
            .filter(|e| e.t >= t0 && e.t <= t1)
            .copied()
            .collect();
        Some(Trajectory {
            dt: self.dt,
            period: self.period,
            samples_per_cycle: self.samples_per_cycle,
            samples,
            events,
        })
    }

    /// Copy with the sample order reversed in time (timestamps are kept as
    /// a uniform ascending grid).
    pub fn reversed(&self) -> Trajectory {
        let mut samples: Vec<Record> = self.samples.iter().rev().cloned().collect();
        for (r, src) in samples.iter_mut().zip(self.samples.iter()) {
            r.t = src.t;
        }
        Trajectory {
            samples,
            events: Vec::new(),
            ..self.clone()
        }
    }

    pub fn max_abs_v(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, r| m.max(r.v.abs()))
    }

    pub fn max_abs_i(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, r| m.max(r.i.abs()))
    }
}

/// Fills `phi` and `q` with the running trapezoid integrals of `v` and `i`,
/// starting from zero at the first sample.
pub fn accumulate_integrals(mut traj: Trajectory) -> Result<Trajectory, TrajectoryError> {
    let dt = traj.dt;
    let first = traj.samples.first().ok_or(TrajectoryError::Empty)?;
    let t0 = first.t;
    let tol = 1e-6 * dt;
    for (index, r) in traj.samples.iter().enumerate() {
        let expected = t0 + index as f64 * dt;
        if (r.t - expected).abs() > tol.max(expected.abs() * 1e-12) {
            return Err(TrajectoryError::NonUniform { index, t: r.t, dt });
        }
    }
    let mut phi = 0.0;
    let mut q = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for r in &mut traj.samples {
        if let Some((v0, i0)) = prev {
            phi += 0.5 * (v0 + r.v) * dt;
            q += 0.5 * (i0 + r.i) * dt;
        }
        prev = Some((r.v, r.i));
        r.phi = phi;
        r.q = q;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use smallvec::smallvec;

    fn raw(dt: f64, n: usize, f: impl Fn(f64) -> (f64, f64)) -> Trajectory {
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let (v, i) = f(t);
                Record::new(InputKind::CurrentControlled, t, i, v, smallvec![0.0])
            })
            .collect();
        Trajectory {
            dt,
            period: n as f64 * dt,
            samples_per_cycle: n,
            samples,
            events: vec![],
        }
    }

    #[test]
    fn constant_voltage_integrates_exactly() {
        let traj = accumulate_integrals(raw(0.1, 20, |_| (1.0, 0.0))).unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.phi - 2.0).abs() < 1e-12);
        assert_eq!(traj.samples[0].phi, 0.0);
        assert_eq!(traj.samples[0].q, 0.0);
    }

    #[test]
    fn sinusoid_charge_matches_antiderivative() {
        let w = 2.0 * PI * 0.1;
        let n = 2000;
        let dt = 10.0 / n as f64;
        let traj = accumulate_integrals(raw(dt, n, |t| (0.0, (w * t).sin()))).unwrap();
        let mut worst: f64 = 0.0;
        let mut qmax: f64 = 0.0;
        for r in &traj.samples {
            worst = worst.max((r.q - (1.0 - (w * r.t).cos()) / w).abs());
            qmax = qmax.max(r.q);
        }
        // trapezoid error bound dt^2 T max|i''| / 12
        assert!(worst < dt * dt * 10.0 * w * w / 12.0 + 1e-12, "{worst}");
        assert!((qmax - 2.0 / w).abs() < 1e-4);
        assert!((2.0 / w - 3.1831).abs() < 1e-4);
    }

    #[test]
    fn zero_mean_voltage_over_one_period() {
        let w = 2.0 * PI;
        let traj = accumulate_integrals(raw(1e-3, 1000, |t| ((w * t).sin(), 0.0))).unwrap();
        assert!(traj.samples.last().unwrap().phi.abs() < 1e-9);
    }

    #[test]
    fn trapezoid_is_second_order() {
        let w = 2.0 * PI * 0.1;
        let err = |n: usize| {
            let dt = 10.0 / n as f64;
            let traj = accumulate_integrals(raw(dt, n, |t| (0.0, (w * t).sin()))).unwrap();
            traj.samples
                .iter()
                .map(|r| (r.q - (1.0 - (w * r.t).cos()) / w).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(400) / err(800);
        assert!(ratio >= 3.9, "ratio {ratio}");
    }

    #[test]
    fn non_uniform_timestamps_rejected() {
        let mut traj = raw(0.1, 10, |_| (1.0, 1.0));
        traj.samples[5].t += 0.03;
        assert!(matches!(
            accumulate_integrals(traj),
            Err(TrajectoryError::NonUniform { index: 5, .. })
        ));
    }

    #[test]
    fn square_wave_levels_and_breakpoints() {
        let d = Drive::square(SourceKind::CurrentSource, 2.0, 0.5, 0.25);
        assert_eq!(d.value(0.0), 2.0);
        assert_eq!(d.value(0.49), 2.0);
        assert_eq!(d.value(0.5), -2.0);
        assert_eq!(d.next_breakpoint(0.0), Some(0.5));
        assert_eq!(d.next_breakpoint(0.5), Some(2.0));
        assert_eq!(d.value_within(0.5, 0.25), 2.0);
        let dc = Drive::square(SourceKind::CurrentSource, 1e-3, 0.01, 1.0);
        assert_eq!(dc.next_breakpoint(3.0), None);
        assert_eq!(dc.value(99.0), 1e-3);
    }

    #[test]
    fn drive_validation() {
        assert!(Drive::sinusoid(SourceKind::CurrentSource, 0.0, 1.0)
            .validate()
            .is_err());
        assert!(Drive::sinusoid(SourceKind::CurrentSource, 1.0, -1.0)
            .validate()
            .is_err());
        assert!(Drive::square(SourceKind::CurrentSource, 1.0, 1.0, 0.0)
            .validate()
            .is_err());
        assert!(Drive::sinusoid(SourceKind::VoltageSource, 5.0, 0.05)
            .validate()
            .is_ok());
    }

    #[test]
    fn level_of_clamps() {
        let sc = SwitchControl {
            state_index: 0,
            unit: 0.5,
            max_level: 10,
        };
        assert_eq!(sc.level_of(-1e-16), 0);
        assert_eq!(sc.level_of(0.5), 1);
        assert_eq!(sc.level_of(0.4999), 0);
        assert_eq!(sc.level_of(100.0), 10);
    }
}
