//! Concrete memristive one-ports.
//!
//! * [`Thermistor`]: NTC thermistor with lumped self-heating.
//! * [`Axon`]: potassium-channel conductance with a single gating variable.
//! * [`SwitchedNetwork`]: a resistor chain whose elements are shorted one by
//!   one as charge accumulates, optionally with a time-periodic first resistor.
//! * [`CapacitorCircuit`]: the switched network with a capacitor across R1.
//!
//! All quantities are SI.

use serde::{Deserialize, Serialize};
use smallvec::smallvec;
use thiserror::Error;

use crate::oneport::{InputKind, OnePort, Regime, StateVec, SwitchControl};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("temperature must be > 0 K, got {0}")]
    Temperature(f64),
    #[error("parameter `{name}` must be finite and > 0, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("no equilibrium bracket in [{lo}, {hi}] K for i_dc = {i_dc} A")]
    NoBracket { lo: f64, hi: f64, i_dc: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

// ---------------------------------------------------------------------------
// Thermistor

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thermistor {
    /// Dissipation constant, W/K.
    pub delta: f64,
    /// Resistance at ambient temperature, Ohm.
    pub r0: f64,
    /// Ambient temperature, K.
    pub t0: f64,
    /// Material constant, K.
    pub beta: f64,
    /// Heat capacity, J/K.
    pub c: f64,
}

impl Default for Thermistor {
    fn default() -> Self {
        Thermistor {
            delta: 1e-4,
            r0: 8000.0,
            t0: 298.0,
            beta: 3460.0,
            c: 1e-3,
        }
    }
}

impl Thermistor {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("delta", self.delta)?;
        positive("r0", self.r0)?;
        positive("t0", self.t0)?;
        positive("beta", self.beta)?;
        positive("c", self.c)
    }

    /// `R0 exp(beta (1/T - 1/T0))`.
    pub fn resistance(&self, temperature: f64) -> Result<f64, ModelError> {
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(ModelError::Temperature(temperature));
        }
        Ok(self.resistance_unchecked(temperature))
    }

    fn resistance_unchecked(&self, temperature: f64) -> f64 {
        self.r0 * (self.beta * (1.0 / temperature - 1.0 / self.t0)).exp()
    }

    /// `dT/dt = -(delta/C)(T - T0) + R(T) i^2 / C`.
    pub fn temperature_rate(&self, temperature: f64, current: f64) -> Result<f64, ModelError> {
        let r = self.resistance(temperature)?;
        Ok(self.rate_with(temperature, r, current))
    }

    fn rate_with(&self, temperature: f64, r: f64, current: f64) -> f64 {
        -(self.delta / self.c) * (temperature - self.t0) + r * current * current / self.c
    }

    /// Steady temperature under a constant current: the root of
    /// `delta (T - T0) = R(T) i^2` above ambient, by bisection.
    pub fn equilibrium_temperature(&self, i_dc: f64) -> Result<f64, ModelError> {
        let p = i_dc * i_dc;
        let balance = |t: f64| self.delta * (t - self.t0) - self.resistance_unchecked(t) * p;
        let (mut lo, mut hi) = (self.t0, self.t0 + 500.0);
        if balance(lo) == 0.0 {
            return Ok(lo);
        }
        if balance(hi) < 0.0 || !i_dc.is_finite() {
            return Err(ModelError::NoBracket { lo, hi, i_dc });
        }
        loop {
            let mid = 0.5 * (lo + hi);
            let r = balance(mid);
            if r.abs() < 1e-12 || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
}

impl OnePort for Thermistor {
    fn name(&self) -> &'static str {
        "thermistor"
    }
    fn input_kind(&self) -> InputKind {
        InputKind::CurrentControlled
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> StateVec {
        smallvec![self.t0]
    }
    fn derivative(&self, x: &[f64], u: f64, _t: f64, _regime: Regime, dxdt: &mut [f64]) {
        let r = self.resistance_unchecked(x[0]);
        dxdt[0] = self.rate_with(x[0], r, u);
    }
    fn output(&self, x: &[f64], u: f64, _t: f64, _regime: Regime) -> f64 {
        self.resistance_unchecked(x[0]) * u
    }
    fn output_factor(&self, x: &[f64], _u: f64, _t: f64, _regime: Regime) -> Option<f64> {
        if x[0] > 0.0 {
            Some(self.resistance_unchecked(x[0]))
        } else {
            Some(f64::NAN)
        }
    }
}

// ---------------------------------------------------------------------------
// Axon potassium channel

/// Voltage-controlled potassium channel with gating variable `x1`.
///
/// The opening rate is `gamma s / exp(s / v_hat - 1)` with `s = v_K + E_K`.
/// Setting `hh_form` switches it to the classical `gamma s / (exp(s / v_hat) - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axon {
    /// Maximal conductance, S.
    pub g_k: f64,
    /// Reversal offset, V.
    pub e_k: f64,
    /// Opening-rate scale, 1/(V s).
    pub gamma: f64,
    /// Voltage scale, V.
    pub v_hat: f64,
    /// Closing time constant, s.
    pub tau: f64,
    pub hh_form: bool,
}

impl Default for Axon {
    fn default() -> Self {
        Axon {
            g_k: 36.0,
            e_k: 10.0,
            gamma: 0.01,
            v_hat: 10.0,
            tau: 8.0,
            hh_form: false,
        }
    }
}

impl Axon {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("g_k", self.g_k)?;
        positive("e_k", self.e_k)?;
        positive("gamma", self.gamma)?;
        positive("v_hat", self.v_hat)?;
        positive("tau", self.tau)
    }

    /// `G_K = g_K x1^4`.
    pub fn conductance(&self, x1: f64) -> f64 {
        self.g_k * x1.powi(4)
    }

    /// Opening and closing rates `(a, b)` at membrane voltage `v_k`.
    pub fn rates(&self, v_k: f64) -> (f64, f64) {
        let s = v_k + self.e_k;
        let a = if self.hh_form {
            let z = s / self.v_hat;
            if z.abs() < 1e-8 {
                self.gamma * self.v_hat * (1.0 - 0.5 * z)
            } else {
                self.gamma * s / z.exp_m1()
            }
        } else {
            self.gamma * s / (s / self.v_hat - 1.0).exp()
        };
        let b = (s / (8.0 * self.v_hat)).exp() / self.tau;
        (a, b)
    }

    /// `dx1/dt = a (1 - x1) - b x1`.
    pub fn gating_rate(&self, x1: f64, v_k: f64) -> f64 {
        let (a, b) = self.rates(v_k);
        a * (1.0 - x1) - b * x1
    }

    /// Gating value where `dx1/dt = 0` for a constant voltage.
    pub fn fixed_point(&self, v_k: f64) -> f64 {
        let (a, b) = self.rates(v_k);
        a / (a + b)
    }
}

impl OnePort for Axon {
    fn name(&self) -> &'static str {
        "axon"
    }
    fn input_kind(&self) -> InputKind {
        InputKind::VoltageControlled
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> StateVec {
        smallvec![self.fixed_point(0.0)]
    }
    fn derivative(&self, x: &[f64], u: f64, _t: f64, _regime: Regime, dxdt: &mut [f64]) {
        dxdt[0] = self.gating_rate(x[0], u);
    }
    fn output(&self, x: &[f64], u: f64, _t: f64, _regime: Regime) -> f64 {
        self.conductance(x[0]) * u
    }
    fn output_factor(&self, x: &[f64], _u: f64, _t: f64, _regime: Regime) -> Option<f64> {
        Some(self.conductance(x[0]))
    }
}

// ---------------------------------------------------------------------------
// Charge-switched resistor network

/// First resistor of the switched chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum R1 {
    Constant {
        ohms: f64,
    },
    /// `high` on `(0, period/2]` of each period, `low` on `(period/2, period]`.
    Piecewise {
        high: f64,
        low: f64,
        period: f64,
    },
}

impl R1 {
    pub fn value(&self, branch: u8) -> f64 {
        match *self {
            R1::Constant { ohms } => ohms,
            R1::Piecewise { high, low, .. } => {
                if branch == 0 {
                    high
                } else {
                    low
                }
            }
        }
    }

    /// Branch at an exact time: 0 (high) for `t mod T` in `(0, T/2]` and at
    /// `t = 0`, 1 (low) otherwise.
    pub fn branch_at(&self, t: f64) -> u8 {
        match *self {
            R1::Constant { .. } => 0,
            R1::Piecewise { period, .. } => {
                if t == 0.0 {
                    return 0;
                }
                let phase = t.rem_euclid(period);
                if phase > 0.0 && phase <= 0.5 * period {
                    0
                } else {
                    1
                }
            }
        }
    }

    /// Branch on an open interval containing `t`.
    pub fn branch_within(&self, t: f64) -> u8 {
        match *self {
            R1::Constant { .. } => 0,
            R1::Piecewise { period, .. } => {
                if t.rem_euclid(period) < 0.5 * period {
                    0
                } else {
                    1
                }
            }
        }
    }

    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        match *self {
            R1::Constant { .. } => None,
            R1::Piecewise { period, .. } => {
                let half = 0.5 * period;
                let k = (t / half).floor();
                [k, k + 1.0, k + 2.0]
                    .into_iter()
                    .map(|j| j * half)
                    .find(|&tb| tb > t)
            }
        }
    }
}

/// R1 in series with `n_switches` equal resistors, each bridged by a switch.
/// Switch `k` is closed (its resistor shorted) while the charge through R1 is
/// at least `k q0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchedNetwork {
    pub r1: R1,
    /// Common value of the switched resistors, Ohm.
    pub r_branch: f64,
    pub n_switches: u32,
    /// Charge threshold unit, C.
    pub q0: f64,
}

impl SwitchedNetwork {
    /// Threshold unit `2A / ((n + 1) w_ref)`: with a sinusoid of amplitude `A`
    /// at `f_ref` the peak charge reaches exactly `(n + 1) q0`.
    pub fn q0_for(amplitude: f64, f_ref: f64, n_switches: u32) -> f64 {
        2.0 * amplitude / ((n_switches as f64 + 1.0) * 2.0 * std::f64::consts::PI * f_ref)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.r1 {
            R1::Constant { ohms } => positive("r1", ohms)?,
            R1::Piecewise { high, low, period } => {
                positive("r1_high", high)?;
                positive("r1_low", low)?;
                positive("r1_period", period)?;
            }
        }
        positive("r_branch", self.r_branch)?;
        positive("q0", self.q0)?;
        if self.n_switches == 0 {
            return Err(ModelError::NonPositive {
                name: "n_switches",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn r1_of_t(&self, t: f64) -> f64 {
        self.r1.value(self.r1.branch_at(t))
    }

    pub fn closed_switches(&self, q: f64) -> u32 {
        self.control(0).level_of(q)
    }

    /// Total resistance `R1(t) + (n - k) r_branch` with `k = clamp(floor(q/q0))`.
    pub fn switched_resistance(&self, q: f64, t: f64) -> f64 {
        self.resistance_in(Regime {
            level: self.closed_switches(q),
            branch: self.r1.branch_at(t),
        })
    }

    fn chain_resistance(&self, level: u32) -> f64 {
        (self.n_switches - level.min(self.n_switches)) as f64 * self.r_branch
    }

    fn resistance_in(&self, regime: Regime) -> f64 {
        self.r1.value(regime.branch) + self.chain_resistance(regime.level)
    }

    fn control(&self, state_index: usize) -> SwitchControl {
        SwitchControl {
            state_index,
            unit: self.q0,
            max_level: self.n_switches,
        }
    }
}

impl OnePort for SwitchedNetwork {
    fn name(&self) -> &'static str {
        "switched"
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
    fn output(&self, _x: &[f64], u: f64, _t: f64, regime: Regime) -> f64 {
        self.resistance_in(regime) * u
    }
    fn output_factor(&self, _x: &[f64], _u: f64, _t: f64, regime: Regime) -> Option<f64> {
        Some(self.resistance_in(regime))
    }
    fn switch_control(&self) -> Option<SwitchControl> {
        Some(self.control(0))
    }
    fn branch_within(&self, t: f64) -> u8 {
        self.r1.branch_within(t)
    }
    fn branch_at(&self, t: f64) -> u8 {
        self.r1.branch_at(t)
    }
    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.r1.next_breakpoint(t)
    }
}

// ---------------------------------------------------------------------------
// Switched network with a capacitor across R1

/// State is `[v_c, q_r1]`: capacitor voltage and the charge that has flowed
/// through R1, which controls the switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitorCircuit {
    pub base: SwitchedNetwork,
    /// Capacitance across R1, F.
    pub cap: f64,
}

/// Derivatives of [`CapacitorCircuit`] plus the device voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitorRates {
    pub dv_c: f64,
    pub dq_r1: f64,
    pub v: f64,
}

impl CapacitorCircuit {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.base.validate()?;
        positive("cap", self.cap)
    }

    /// Rates at an exact instant.
    pub fn rates(&self, v_c: f64, q_r1: f64, i_s: f64, t: f64) -> CapacitorRates {
        let regime = Regime {
            level: self.base.closed_switches(q_r1),
            branch: self.base.r1.branch_at(t),
        };
        self.rates_in(v_c, i_s, regime)
    }

    fn rates_in(&self, v_c: f64, i_s: f64, regime: Regime) -> CapacitorRates {
        let i_r1 = v_c / self.base.r1.value(regime.branch);
        CapacitorRates {
            dv_c: (i_s - i_r1) / self.cap,
            dq_r1: i_r1,
            v: v_c + self.base.chain_resistance(regime.level) * i_s,
        }
    }
}

impl OnePort for CapacitorCircuit {
    fn name(&self) -> &'static str {
        "capacitor"
    }
    fn input_kind(&self) -> InputKind {
        InputKind::CurrentControlled
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn initial_state(&self) -> StateVec {
        smallvec![0.0, 0.0]
    }
    fn derivative(&self, x: &[f64], u: f64, _t: f64, regime: Regime, dxdt: &mut [f64]) {
        let r = self.rates_in(x[0], u, regime);
        dxdt[0] = r.dv_c;
        dxdt[1] = r.dq_r1;
    }
    fn output(&self, x: &[f64], u: f64, _t: f64, regime: Regime) -> f64 {
        self.rates_in(x[0], u, regime).v
    }
    fn switch_control(&self) -> Option<SwitchControl> {
        Some(self.base.control(1))
    }
    fn branch_within(&self, t: f64) -> u8 {
        self.base.r1.branch_within(t)
    }
    fn branch_at(&self, t: f64) -> u8 {
        self.base.r1.branch_at(t)
    }
    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.base.r1.next_breakpoint(t)
    }
}

// ---------------------------------------------------------------------------

/// Any shipped model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Thermistor(Thermistor),
    Axon(Axon),
    Switched(SwitchedNetwork),
    Capacitor(CapacitorCircuit),
}

impl Model {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Model::Thermistor(m) => m.validate(),
            Model::Axon(m) => m.validate(),
            Model::Switched(m) => m.validate(),
            Model::Capacitor(m) => m.validate(),
        }
    }

    fn inner(&self) -> &dyn OnePort {
        match self {
            Model::Thermistor(m) => m,
            Model::Axon(m) => m,
            Model::Switched(m) => m,
            Model::Capacitor(m) => m,
        }
    }
}

impl OnePort for Model {
    fn name(&self) -> &'static str {
        self.inner().name()
    }
    fn input_kind(&self) -> InputKind {
        self.inner().input_kind()
    }
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn initial_state(&self) -> StateVec {
        self.inner().initial_state()
    }
    fn derivative(&self, x: &[f64], u: f64, t: f64, regime: Regime, dxdt: &mut [f64]) {
        self.inner().derivative(x, u, t, regime, dxdt)
    }
    fn output(&self, x: &[f64], u: f64, t: f64, regime: Regime) -> f64 {
        self.inner().output(x, u, t, regime)
    }
    fn output_factor(&self, x: &[f64], u: f64, t: f64, regime: Regime) -> Option<f64> {
        self.inner().output_factor(x, u, t, regime)
    }
    fn switch_control(&self) -> Option<SwitchControl> {
        self.inner().switch_control()
    }
    fn branch_within(&self, t: f64) -> u8 {
        self.inner().branch_within(t)
    }
    fn branch_at(&self, t: f64) -> u8 {
        self.inner().branch_at(t)
    }
    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.inner().next_breakpoint(t)
    }
}
