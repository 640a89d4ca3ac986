//! Fixed-step classical RK4 for driven one-ports.
//!
//! Resistance jumps are never integrated across: a step is split at every
//! time breakpoint (known analytically) and at every switch-threshold crossing
//! (located by bisection on the sub-step length), and each sub-step is
//! evaluated with the regime of its own side of the jump. The output grid
//! stays uniform and aligned with the drive period.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::oneport::{
    accumulate_integrals, evaluate_output, Drive, DriveError, Event, EventKind, OnePort,
    OnePortError, Record, Regime, StateVec, Trajectory, TrajectoryError,
};

/// Default number of steps per drive period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2000;
/// Coarsest allowed step, as a fraction of the drive period.
pub const MIN_STEPS_PER_PERIOD: usize = 200;
/// Bisection budget for one crossing.
pub const MAX_BISECTIONS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimControls {
    /// Requested step, s. Adjusted downward so it divides the drive period.
    pub dt: f64,
    pub transient_cycles: u32,
    pub record_cycles: u32,
    /// Width of the time bracket a crossing is located within, s.
    pub event_tolerance: f64,
    pub steady_state_rel_tol: f64,
}

impl SimControls {
    /// Defaults for a drive: `dt = period / 2000`, 3 transient cycles,
    /// 2 recorded cycles.
    pub fn for_drive(drive: &Drive) -> Self {
        let dt = drive.period() / DEFAULT_STEPS_PER_PERIOD as f64;
        SimControls {
            dt,
            transient_cycles: 3,
            record_cycles: 2,
            event_tolerance: dt * 1e-9,
            steady_state_rel_tol: 1e-9,
        }
    }

    pub fn validate(&self, period: f64) -> Result<(), SimError> {
        let bad = |c: &'static str| Err(SimError::Controls(c));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt > 0");
        }
        if self.dt > period / MIN_STEPS_PER_PERIOD as f64 * (1.0 + 1e-12) {
            return bad("dt <= period/200");
        }
        if !(self.event_tolerance > 0.0 && self.event_tolerance < self.dt) {
            return bad("0 < event_tolerance < dt");
        }
        if self.record_cycles < 1 {
            return bad("record_cycles >= 1");
        }
        if !(self.steady_state_rel_tol.is_finite() && self.steady_state_rel_tol > 0.0) {
            return bad("steady_state_rel_tol > 0");
        }
        Ok(())
    }

    /// Step that divides `period` exactly, and the number of steps per period.
    pub fn aligned_step(&self, period: f64) -> (f64, usize) {
        let n = ((period / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (period / n as f64, n)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation controls violate constraint `{0}`")]
    Controls(&'static str),
    #[error("model `{model}` is not driven by a {drive:?}")]
    KindMismatch {
        model: &'static str,
        drive: crate::oneport::SourceKind,
    },
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error("state became non-finite at t={t}")]
    NonFinite { t: f64 },
    #[error("event bisection exceeded {MAX_BISECTIONS} iterations at t={t}")]
    Bisection { t: f64 },
    #[error("no periodic steady state after {cycles} cycles (last residual {residual:e})")]
    NoSteadyState { cycles: usize, residual: f64 },
    #[error(transparent)]
    Output(#[from] OnePortError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// An excitation that can be evaluated inside breakpoint-free intervals.
pub trait Source {
    fn value(&self, t: f64) -> f64;

    /// Value at `t` on the breakpoint-free interval containing `t_mid`.
    fn value_within(&self, t: f64, _t_mid: f64) -> f64 {
        self.value(t)
    }

    fn next_breakpoint(&self, _t: f64) -> Option<f64> {
        None
    }
}

impl Source for Drive {
    fn value(&self, t: f64) -> f64 {
        Drive::value(self, t)
    }
    fn value_within(&self, t: f64, t_mid: f64) -> f64 {
        Drive::value_within(self, t, t_mid)
    }
    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        Drive::next_breakpoint(self, t)
    }
}

impl<F: Fn(f64) -> f64> Source for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// One piece of a split step, integrated with a single regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubStep {
    pub t: f64,
    pub h: f64,
    pub regime: Regime,
}

/// RK4 stepper with event localization.
pub struct Stepper<'a, M: OnePort + ?Sized, S: Source + ?Sized> {
    model: &'a M,
    source: &'a S,
    event_tolerance: f64,
    k: [StateVec; 4],
    scratch: StateVec,
    trial: StateVec,
}

impl<'a, M: OnePort + ?Sized, S: Source + ?Sized> Stepper<'a, M, S> {
    pub fn new(model: &'a M, source: &'a S, event_tolerance: f64) -> Self {
        let zero: StateVec = SmallVec::from_elem(0.0, model.state_dim());
        Stepper {
            model,
            source,
            event_tolerance,
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            scratch: zero.clone(),
            trial: zero,
        }
    }

    fn level(&self, x: &[f64]) -> u32 {
        self.model
            .switch_control()
            .map_or(0, |sc| sc.level_of(x[sc.state_index]))
    }

    /// One classical RK4 step of length `h` with `regime` held fixed.
    #[allow(clippy::needless_range_loop)]
    fn rk4(&mut self, x: &[f64], t: f64, h: f64, regime: Regime, out: &mut StateVec) {
        let n = x.len();
        let mid = t + 0.5 * h;
        let src = self.source;
        let m = self.model;
        let u0 = src.value_within(t, mid);
        let uh = src.value_within(mid, mid);
        let u1 = src.value_within(t + h, mid);

        m.derivative(x, u0, t, regime, &mut self.k[0]);
        for j in 0..n {
            self.scratch[j] = x[j] + 0.5 * h * self.k[0][j];
        }
        m.derivative(&self.scratch, uh, mid, regime, &mut self.k[1]);
        for j in 0..n {
            self.scratch[j] = x[j] + 0.5 * h * self.k[1][j];
        }
        m.derivative(&self.scratch, uh, mid, regime, &mut self.k[2]);
        for j in 0..n {
            self.scratch[j] = x[j] + h * self.k[2][j];
        }
        m.derivative(&self.scratch, u1, t + h, regime, &mut self.k[3]);
        out.clear();
        for j in 0..n {
            let k = &self.k;
            out.push(x[j] + h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]));
        }
    }

    /// Advances `x` from `t` to `t + h`, splitting the step at breakpoints
    /// and threshold crossings. Returns the sub-steps taken; events are
    /// appended to `events`.
    pub fn locate_events(
        &mut self,
        x: &mut StateVec,
        t: f64,
        h: f64,
        events: &mut Vec<Event>,
    ) -> Result<Vec<SubStep>, SimError> {
        let end = t + h;
        let snap = 1e-9 * h;
        let mut now = t;
        let mut subs = Vec::with_capacity(1);
        let control = self.model.switch_control();
        let mut trial = std::mem::take(&mut self.trial);

        while end - now > snap {
            let mut stop = end;
            let mut at_breakpoint = false;
            let candidates = [
                self.model.next_breakpoint(now + snap),
                self.source.next_breakpoint(now + snap),
            ];
            for tb in candidates.into_iter().flatten() {
                if tb < stop - snap {
                    stop = tb;
                    at_breakpoint = true;
                }
            }
            let h_sub = stop - now;
            let regime = Regime {
                level: self.level(x),
                branch: self.model.branch_within(now + 0.5 * h_sub),
            };
            self.rk4(x, now, h_sub, regime, &mut trial);
            if trial.iter().any(|v| !v.is_finite()) {
                self.trial = trial;
                return Err(SimError::NonFinite { t: stop });
            }

            let new_level = self.level(&trial);
            if control.is_some() && new_level != regime.level {
                let (mut lo, mut hi) = (0.0, h_sub);
                let mut iterations = 0;
                let mut probe = SmallVec::new();
                while hi - lo > self.event_tolerance {
                    iterations += 1;
                    if iterations > MAX_BISECTIONS {
                        self.trial = trial;
                        return Err(SimError::Bisection { t: now });
                    }
                    let mid = 0.5 * (lo + hi);
                    self.rk4(x, now, mid, regime, &mut probe);
                    if self.level(&probe) != regime.level {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if hi < h_sub {
                    self.rk4(x, now, hi, regime, &mut trial);
                }
                let crossed = self.level(&trial);
                let t_event = now + hi;
                push_switch_events(events, t_event, regime.level, crossed);
                subs.push(SubStep {
                    t: now,
                    h: hi,
                    regime,
                });
                x.clone_from(&trial);
                now = t_event;
                continue;
            }

            subs.push(SubStep {
                t: now,
                h: h_sub,
                regime,
            });
            x.clone_from(&trial);
            now = stop;
            if at_breakpoint {
                events.push(Event {
                    t: stop,
                    kind: EventKind::Breakpoint,
                });
            }
        }
        self.trial = trial;
        Ok(subs)
    }
}

fn push_switch_events(events: &mut Vec<Event>, t: f64, from: u32, to: u32) {
    if to > from {
        for level in from + 1..=to {
            events.push(Event {
                t,
                kind: EventKind::Closing { level },
            });
        }
    } else {
        for level in (to + 1..=from).rev() {
            events.push(Event {
                t,
                kind: EventKind::Opening { level },
            });
        }
    }
}

/// States at `t0 + k dt` for `k = 0..=steps` driven by an arbitrary source.
pub fn integrate_span<M: OnePort + ?Sized, S: Source + ?Sized>(
    model: &M,
    source: &S,
    x0: &[f64],
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Vec<StateVec>, SimError> {
    let mut stepper = Stepper::new(model, source, dt * 1e-9);
    let mut x: StateVec = x0.iter().copied().collect();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    let mut events = Vec::new();
    for k in 0..steps {
        stepper.locate_events(&mut x, t0 + k as f64 * dt, dt, &mut events)?;
        out.push(x.clone());
    }
    Ok(out)
}

struct CycleRunner<'a, M: OnePort + ?Sized> {
    model: &'a M,
    drive: &'a Drive,
    stepper: Stepper<'a, M, Drive>,
    dt: f64,
    n: usize,
    period: f64,
}

impl<'a, M: OnePort + ?Sized> CycleRunner<'a, M> {
    fn new(model: &'a M, drive: &'a Drive, controls: &SimControls) -> Result<Self, SimError> {
        drive.validate()?;
        if !drive.kind.drives(model.input_kind()) {
            return Err(SimError::KindMismatch {
                model: model.name(),
                drive: drive.kind,
            });
        }
        let period = drive.period();
        controls.validate(period)?;
        let (dt, n) = controls.aligned_step(period);
        Ok(CycleRunner {
            model,
            drive,
            stepper: Stepper::new(model, drive, controls.event_tolerance.min(0.5 * dt)),
            dt,
            n,
            period,
        })
    }

    fn time(&self, cycle: usize, j: usize) -> f64 {
        (cycle * self.n + j) as f64 * self.dt
    }

    fn record(&self, x: &StateVec, t: f64) -> Result<Record, SimError> {
        let u = self.drive.value(t);
        let y = evaluate_output(self.model, x, u, t)?;
        Ok(Record::new(self.model.input_kind(), t, u, y, x.clone()))
    }

    /// Integrates one full period starting at `x`. With `samples`, records
    /// the `n` samples at the start of each step (the cycle's end point is
    /// left to the caller). Always returns the states at each step start.
    fn run_cycle(
        &mut self,
        x: &mut StateVec,
        cycle: usize,
        mut samples: Option<&mut Vec<Record>>,
        events: &mut Vec<Event>,
        states: &mut Vec<f64>,
    ) -> Result<(), SimError> {
        states.clear();
        for j in 0..self.n {
            let t = self.time(cycle, j);
            states.extend_from_slice(x);
            if let Some(s) = samples.as_deref_mut() {
                s.push(self.record(x, t)?);
            }
            self.stepper.locate_events(x, t, self.dt, events)?;
        }
        Ok(())
    }

    fn trajectory(
        &mut self,
        x: &mut StateVec,
        first_cycle: usize,
        cycles: usize,
    ) -> Result<Trajectory, SimError> {
        let mut samples = Vec::with_capacity(cycles * self.n + 1);
        let mut events = Vec::new();
        let mut states = Vec::new();
        for c in first_cycle..first_cycle + cycles {
            self.run_cycle(x, c, Some(&mut samples), &mut events, &mut states)?;
        }
        samples.push(self.record(x, self.time(first_cycle + cycles, 0))?);
        let traj = Trajectory {
            dt: self.dt,
            period: self.period,
            samples_per_cycle: self.n,
            samples,
            events,
        };
        Ok(accumulate_integrals(traj)?)
    }
}

/// Integrates `transient_cycles + record_cycles` periods from the model's
/// default initial state and returns the recorded cycles, with flux linkage
/// and charge accumulated from the first retained sample.
pub fn simulate<M: OnePort + ?Sized>(
    model: &M,
    drive: &Drive,
    controls: &SimControls,
) -> Result<Trajectory, SimError> {
    simulate_from(model, drive, controls, &model.initial_state())
}

pub fn simulate_from<M: OnePort + ?Sized>(
    model: &M,
    drive: &Drive,
    controls: &SimControls,
    x0: &[f64],
) -> Result<Trajectory, SimError> {
    let mut runner = CycleRunner::new(model, drive, controls)?;
    let mut x: StateVec = x0.iter().copied().collect();
    let mut scratch_events = Vec::new();
    let mut states = Vec::new();
    let transient = controls.transient_cycles as usize;
    for c in 0..transient {
        runner.run_cycle(&mut x, c, None, &mut scratch_events, &mut states)?;
        scratch_events.clear();
    }
    runner.trajectory(&mut x, transient, controls.record_cycles as usize)
}

/// Result of a cycle-by-cycle steady-state search.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// The first steady cycle (both endpoints included).
    pub cycle: Trajectory,
    /// Zero-based index of that cycle since the start of the run.
    pub cycle_index: usize,
    /// Residual between the returned cycle and the one after it.
    pub residual: f64,
    /// Residual history, one entry per compared cycle pair.
    pub residuals: Vec<f64>,
    /// State at the start of the returned cycle.
    pub start_state: StateVec,
}

/// Largest over state components of `max |a - b| / max |b|` across matching
/// samples.
fn cycle_residual(prev: &[f64], cur: &[f64], dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..dim {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in prev
            .iter()
            .skip(c)
            .step_by(dim)
            .zip(cur.iter().skip(c).step_by(dim))
        {
            diff = diff.max((a - b).abs());
            scale = scale.max(a.abs());
        }
        if diff > 0.0 {
            worst = worst.max(diff / scale.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Simulates cycle by cycle until two consecutive cycles agree in every state
/// variable to `steady_state_rel_tol`; gives up after
/// `max(10 * transient_cycles, 2)` cycles.
pub fn detect_steady_state<M: OnePort + ?Sized>(
    model: &M,
    drive: &Drive,
    controls: &SimControls,
) -> Result<SteadyState, SimError> {
    detect_steady_state_from(model, drive, controls, &model.initial_state())
}

pub fn detect_steady_state_from<M: OnePort + ?Sized>(
    model: &M,
    drive: &Drive,
    controls: &SimControls,
    x0: &[f64],
) -> Result<SteadyState, SimError> {
    let mut runner = CycleRunner::new(model, drive, controls)?;
    let dim = model.state_dim();
    let max_cycles = (10 * controls.transient_cycles as usize).max(2);
    let mut x: StateVec = x0.iter().copied().collect();
    let mut prev_start = x.clone();
    let mut prev_states = Vec::new();
    let mut states = Vec::new();
    let mut events = Vec::new();
    let mut residuals = Vec::new();
    runner.run_cycle(&mut x, 0, None, &mut events, &mut prev_states)?;
    for c in 1..max_cycles {
        let start = x.clone();
        events.clear();
        runner.run_cycle(&mut x, c, None, &mut events, &mut states)?;
        let r = cycle_residual(&prev_states, &states, dim);
        residuals.push(r);
        if r < controls.steady_state_rel_tol {
            let mut y = prev_start.clone();
            let cycle = runner.trajectory(&mut y, c - 1, 1)?;
            return Ok(SteadyState {
                cycle,
                cycle_index: c - 1,
                residual: r,
                residuals,
                start_state: prev_start,
            });
        }
        prev_start = start;
        std::mem::swap(&mut prev_states, &mut states);
    }
    Err(SimError::NoSteadyState {
        cycles: max_cycles,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Finds the first steady cycle and records `record_cycles` periods from its
/// start.
pub fn simulate_steady<M: OnePort + ?Sized>(
    model: &M,
    drive: &Drive,
    controls: &SimControls,
) -> Result<Trajectory, SimError> {
    let steady = detect_steady_state(model, drive, controls)?;
    let mut runner = CycleRunner::new(model, drive, controls)?;
    let mut x = steady.start_state.clone();
    runner.trajectory(&mut x, steady.cycle_index, controls.record_cycles as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Axon, SwitchedNetwork, Thermistor, R1};
    use crate::oneport::SourceKind;
    use smallvec::smallvec;

    fn network(r1: R1) -> SwitchedNetwork {
        SwitchedNetwork {
            r1,
            r_branch: 0.3,
            n_switches: 10,
            q0: SwitchedNetwork::q0_for(1.0, 0.1, 10),
        }
    }

    #[test]
    fn controls_validation_names_constraint() {
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 10.0);
        let mut c = SimControls::for_drive(&drive);
        c.dt = 1e-1;
        assert_eq!(c.validate(0.1), Err(SimError::Controls("dt <= period/200")));
        c.dt = 1e-4;
        c.event_tolerance = 1e-3;
        assert!(matches!(c.validate(0.1), Err(SimError::Controls(_))));
    }

    #[test]
    fn aligned_step_divides_period() {
        let c = SimControls {
            dt: 0.003,
            ..SimControls::for_drive(&Drive::sinusoid(SourceKind::CurrentSource, 1.0, 1.0))
        };
        let (dt, n) = c.aligned_step(1.0);
        assert_eq!(n, 334);
        assert!(dt <= 0.003);
        let (dt2, n2) = c.aligned_step(0.6);
        assert!((n2 as f64 * dt2 - 0.6).abs() < 1e-15);
        assert_eq!(n2, 200);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let ax = Axon::default();
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.05);
        let c = SimControls::for_drive(&drive);
        assert!(matches!(
            simulate(&ax, &drive, &c),
            Err(SimError::KindMismatch { .. })
        ));
    }

    #[test]
    fn single_crossing_is_split_at_threshold() {
        let net = network(R1::Constant { ohms: 1.0 });
        let src = |_t: f64| 1.0;
        let tol = 1e-12;
        let mut st = Stepper::new(&net, &src, tol);
        let q0 = net.q0;
        let mut x: StateVec = smallvec![0.9 * q0];
        let h = 0.2 * q0;
        let mut events = Vec::new();
        let subs = st.locate_events(&mut x, 0.0, h, &mut events).unwrap();
        assert_eq!(subs.len(), 2);
        assert!((subs[0].h - 0.1 * q0).abs() <= tol);
        assert_eq!(subs[0].regime.level, 0);
        assert_eq!(subs[1].regime.level, 1);
        assert_eq!(events.len(), 1);
        assert!(matches!(events[0].kind, EventKind::Closing { level: 1 }));
        assert!((events[0].t - 0.1 * q0).abs() <= tol);
        assert!((x[0] - 1.1 * q0).abs() < 1e-14);
    }

    #[test]
    fn time_breakpoint_split_exactly() {
        let net = network(R1::Piecewise {
            high: 3.0,
            low: 1.0,
            period: 10.0,
        });
        let src = |_t: f64| 0.0;
        let mut st = Stepper::new(&net, &src, 1e-12);
        let mut x: StateVec = smallvec![0.0];
        let mut events = Vec::new();
        let subs = st.locate_events(&mut x, 4.9, 0.2, &mut events).unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].t + subs[0].h, 5.0);
        assert_eq!(subs[1].t, 5.0);
        assert_eq!((subs[0].regime.branch, subs[1].regime.branch), (0, 1));
        assert_eq!(
            events,
            vec![Event {
                t: 5.0,
                kind: EventKind::Breakpoint
            }]
        );
    }

    #[test]
    fn no_threshold_no_split() {
        let net = network(R1::Constant { ohms: 1.0 });
        let src = |_t: f64| 1.0;
        let mut st = Stepper::new(&net, &src, 1e-12);
        let mut x: StateVec = smallvec![0.1 * net.q0];
        let mut events = Vec::new();
        let subs = st
            .locate_events(&mut x, 0.0, 0.1 * net.q0, &mut events)
            .unwrap();
        assert_eq!(subs.len(), 1);
        assert!(events.is_empty());
    }

    #[test]
    fn pathological_tolerance_errors() {
        let net = network(R1::Constant { ohms: 1.0 });
        let src = |_t: f64| 1.0;
        let mut st = Stepper::new(&net, &src, 1e-40);
        let mut x: StateVec = smallvec![0.9 * net.q0];
        let mut events = Vec::new();
        assert!(matches!(
            st.locate_events(&mut x, 0.0, 0.2 * net.q0, &mut events),
            Err(SimError::Bisection { .. })
        ));
    }

    #[test]
    fn thermistor_cooling_matches_exponential() {
        let th = Thermistor::default();
        let tau = th.c / th.delta;
        let steps = 1000;
        let dt = tau / steps as f64;
        let zero = |_t: f64| 0.0;
        let xs = integrate_span(&th, &zero, &[th.t0 + 10.0], 0.0, dt, steps).unwrap();
        let exact = th.t0 + 10.0 * (-1.0f64).exp();
        let got = xs.last().unwrap()[0];
        assert!(((got - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let th = Thermistor::default();
        let zero = |_t: f64| 0.0;
        let err = |steps: usize| {
            let dt = 20.0 / steps as f64;
            let xs = integrate_span(&th, &zero, &[th.t0 + 10.0], 0.0, dt, steps).unwrap();
            xs.iter()
                .enumerate()
                .map(|(k, x)| {
                    let t = k as f64 * dt;
                    (x[0] - (th.t0 + 10.0 * (-t * th.delta / th.c).exp())).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(10), err(20), err(40));
        assert!(e1 / e2 >= 15.0, "{}", e1 / e2);
        assert!(e2 / e3 >= 15.0, "{}", e2 / e3);
    }

    #[test]
    fn constant_current_settles_at_equilibrium() {
        let th = Thermistor::default();
        let drive = Drive::square(SourceKind::CurrentSource, 1e-3, 0.01, 1.0);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 5;
        c.record_cycles = 1;
        let traj = simulate(&th, &drive, &c).unwrap();
        let settled = traj.samples.last().unwrap().state[0];
        let oracle = th.equilibrium_temperature(1e-3).unwrap();
        assert!((settled - oracle).abs() < 1e-6, "{settled} vs {oracle}");
    }

    #[test]
    fn switched_network_one_period() {
        let net = network(R1::Constant { ohms: 1.0 });
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 0;
        c.record_cycles = 1;
        let traj = simulate(&net, &drive, &c).unwrap();
        let last = traj.samples.last().unwrap();
        assert!(last.q.abs() < 1e-9);
        assert!(last.state[0].abs() < 1e-9);
        let closings = traj
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Closing { .. }))
            .count();
        let openings = traj
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Opening { .. }))
            .count();
        assert_eq!((closings, openings), (10, 10));
        // samples land on period boundaries
        assert_eq!(traj.samples.len(), 2001);
        assert!((last.t - 10.0).abs() < 1e-12);
    }

    #[test]
    fn halving_dt_keeps_switched_samples() {
        let net = network(R1::Constant { ohms: 1.0 });
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 1;
        let coarse = simulate(&net, &drive, &c).unwrap();
        c.dt *= 0.5;
        c.event_tolerance *= 0.5;
        let fine = simulate(&net, &drive, &c).unwrap();
        let vmax = coarse.max_abs_v();
        for (k, r) in coarse.samples.iter().enumerate() {
            let f = &fine.samples[2 * k];
            assert!((r.t - f.t).abs() < 1e-9);
            assert!(
                (r.v - f.v).abs() < 1e-6 * vmax,
                "sample {k}: {} vs {}",
                r.v,
                f.v
            );
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let ax = Axon::default();
        let drive = Drive::sinusoid(SourceKind::VoltageSource, 5.0, 0.05);
        let c = SimControls::for_drive(&drive);
        assert_eq!(
            simulate(&ax, &drive, &c).unwrap(),
            simulate(&ax, &drive, &c).unwrap()
        );
    }

    #[test]
    fn steady_state_on_orbit_returns_first_cycle() {
        let net = network(R1::Constant { ohms: 1.0 });
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 1.0, 0.1);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 0;
        let ss = detect_steady_state(&net, &drive, &c).unwrap();
        assert_eq!(ss.cycle_index, 0);
        assert_eq!(ss.cycle.len(), 2001);
    }

    #[test]
    fn thermistor_reaches_periodic_state() {
        let th = Thermistor::default();
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 0.5e-3, 0.01);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 20;
        let ss = detect_steady_state(&th, &drive, &c).unwrap();
        assert!(ss.residual < 1e-9);
        assert!(ss.residuals.windows(2).take(3).all(|w| w[1] < w[0]));
    }

    #[test]
    fn axon_converges_on_gating_variable() {
        let ax = Axon::default();
        let drive = Drive::sinusoid(SourceKind::VoltageSource, 5.0, 0.05);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 5;
        let ss = detect_steady_state(&ax, &drive, &c).unwrap();
        let last = ss.cycle.samples.last().unwrap();
        assert!(last.q.abs() > 1e-3, "charge drifts per cycle");
    }

    #[test]
    fn non_convergence_reports_residual() {
        let th = Thermistor::default();
        let drive = Drive::sinusoid(SourceKind::CurrentSource, 0.5e-3, 10.0);
        let mut c = SimControls::for_drive(&drive);
        c.transient_cycles = 1;
        let err = detect_steady_state(&th, &drive, &c).unwrap_err();
        assert!(matches!(err, SimError::NoSteadyState { cycles: 10, .. }));
    }
}
