//! Trajectory analytics: pinch test, hysteresis loop area, flux-linkage vs
//! charge classification, linear fits and frequency sweeps.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::integrate::{simulate_steady, SimControls, SimError};
use crate::oneport::{Drive, OnePort, Record, Trajectory};

/// Number of charge probes used for the single-valuedness test.
pub const PHI_Q_BINS: usize = 200;
/// Default relative tolerance for [`phi_q_classify`].
pub const DEFAULT_PHI_Q_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("current changes sign {0} time(s); at least 2 crossings are needed")]
    NotBipolar(usize),
    #[error("loop needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("need at least 2 recorded cycles, got {0}")]
    TooFewCycles(usize),
    #[error("current is identically zero")]
    ZeroCurrent,
    #[error("frequencies must be strictly increasing and > 0")]
    Frequencies,
    #[error("sweep failed at f = {frequency} Hz: {source}")]
    Sweep {
        frequency: f64,
        #[source]
        source: Box<AnalysisError>,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchReport {
    pub pinched: bool,
    pub worst_v_at_zero_i: f64,
    pub worst_i_at_zero_v: f64,
    /// Number of current zero crossings found.
    pub crossing_count: usize,
    pub eps_i: f64,
    pub eps_v: f64,
}

/// Values of `other` at each sign change of `key`, by linear interpolation.
fn values_at_zeros(
    samples: &[Record],
    key: impl Fn(&Record) -> f64,
    other: impl Fn(&Record) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for (j, r) in samples.iter().enumerate() {
        let a = key(r);
        if a == 0.0 {
            out.push(other(r));
            continue;
        }
        if let Some(next) = samples.get(j + 1) {
            let b = key(next);
            if a * b < 0.0 {
                let s = a / (a - b);
                out.push(other(r) + s * (other(next) - other(r)));
            }
        }
    }
    out
}

/// Checks that `v` vanishes wherever `i` does, and vice versa.
pub fn pinch_test(traj: &Trajectory, eps_i: f64, eps_v: f64) -> Result<PinchReport, AnalysisError> {
    let v_at_i0 = values_at_zeros(&traj.samples, |r| r.i, |r| r.v);
    if v_at_i0.len() < 2 {
        return Err(AnalysisError::NotBipolar(v_at_i0.len()));
    }
    let i_at_v0 = values_at_zeros(&traj.samples, |r| r.v, |r| r.i);
    let worst = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let worst_v_at_zero_i = worst(&v_at_i0);
    let worst_i_at_zero_v = worst(&i_at_v0);
    Ok(PinchReport {
        pinched: worst_v_at_zero_i <= eps_v && worst_i_at_zero_v <= eps_i,
        worst_v_at_zero_i,
        worst_i_at_zero_v,
        crossing_count: v_at_i0.len(),
        eps_i,
        eps_v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopArea {
    /// Shoelace area of the whole `(i, v)` orbit; symmetric figure-eights
    /// cancel to about zero.
    pub signed: f64,
    /// Sum of the absolute lobe areas after splitting at current zeros.
    pub lobe_sum: f64,
    /// `lobe_sum / (v_range * i_range)`, zero for a degenerate box.
    pub normalized: f64,
    pub lobes: usize,
}

fn shoelace(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..n {
        let (x0, y0) = points[k];
        let (x1, y1) = points[(k + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

fn range(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Hysteresis loop area of one steady cycle in the `(i, v)` plane.
pub fn loop_area(traj: &Trajectory) -> Result<LoopArea, AnalysisError> {
    let s = &traj.samples;
    if s.len() < 100 {
        return Err(AnalysisError::TooFewSamples {
            needed: 100,
            got: s.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = s.iter().map(|r| (r.i, r.v)).collect();
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let scale = range(pts.iter().map(|p| p.0)).max(range(pts.iter().map(|p| p.1)));
    if (last.0 - first.0).abs() <= 1e-9 * scale && (last.1 - first.1).abs() <= 1e-9 * scale {
        pts.pop();
    }
    let signed = shoelace(&pts);

    // Vertex ring with current-zero split points inserted.
    let m = pts.len();
    let mut ring: Vec<((f64, f64), bool)> = Vec::with_capacity(m + 8);
    for k in 0..m {
        let a = pts[k];
        let b = pts[(k + 1) % m];
        ring.push((a, a.0 == 0.0));
        if a.0 * b.0 < 0.0 {
            let t = a.0 / (a.0 - b.0);
            ring.push(((0.0, a.1 + t * (b.1 - a.1)), true));
        }
    }
    let splits: Vec<usize> = ring
        .iter()
        .enumerate()
        .filter_map(|(k, (_, split))| split.then_some(k))
        .collect();

    let (lobe_sum, lobes) = if splits.len() < 2 {
        (signed.abs(), 1)
    } else {
        let mut sum = 0.0;
        for (j, &start) in splits.iter().enumerate() {
            let end = splits[(j + 1) % splits.len()];
            let mut lobe = Vec::new();
            let mut k = start;
            loop {
                lobe.push(ring[k].0);
                if k == end && lobe.len() > 1 {
                    break;
                }
                k = (k + 1) % ring.len();
            }
            sum += shoelace(&lobe).abs();
        }
        (sum, splits.len())
    };

    let box_area = range(s.iter().map(|r| r.v)) * range(s.iter().map(|r| r.i));
    let normalized = if box_area > 0.0 {
        lobe_sum / box_area
    } else {
        0.0
    };
    Ok(LoopArea {
        signed,
        lobe_sum,
        normalized,
        lobes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhiQKind {
    SingleValued,
    ClosedMultivalued,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiQClassification {
    pub kind: PhiQKind,
    /// Mean per-cycle change of charge over all consecutive cycle pairs.
    pub dq_per_cycle: f64,
    /// Mean per-cycle change of flux linkage.
    pub dphi_per_cycle: f64,
    /// Largest flux-linkage difference between branches of the first cycle
    /// at equal charge.
    pub max_phi_spread_at_equal_q: f64,
    /// Per-pair values behind `dq_per_cycle` (pair `k` is cycles `k`, `k+1`).
    pub cycle_dq: Vec<f64>,
    pub cycle_dphi: Vec<f64>,
    pub q_range: f64,
    pub phi_range: f64,
    pub tol_rel: f64,
}

/// Flux-linkage spread between the monotone-charge branches of `samples`,
/// probed at the centres of `bins` equal charge bins.
pub fn phi_spread_at_equal_q(samples: &[Record], bins: usize) -> f64 {
    let q: Vec<f64> = samples.iter().map(|r| r.q).collect();
    let phi: Vec<f64> = samples.iter().map(|r| r.phi).collect();
    let (qmin, qmax) = q
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if qmax.is_nan() || qmin.is_nan() || qmax <= qmin || bins == 0 {
        return 0.0;
    }

    // Monotone runs of q, sharing their turning samples.
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    let mut start = 0;
    let mut dir = 0.0;
    for k in 1..q.len() {
        let d = (q[k] - q[k - 1]).signum();
        if q[k] == q[k - 1] {
            continue;
        }
        if dir == 0.0 {
            dir = d;
        } else if d != dir {
            runs.push((start, k - 1, dir));
            start = k - 1;
            dir = d;
        }
    }
    if dir != 0.0 {
        runs.push((start, q.len() - 1, dir));
    }

    let interp = |&(s, e, dir): &(usize, usize, f64), qc: f64| -> Option<f64> {
        let (lo, hi) = if dir > 0.0 {
            (q[s], q[e])
        } else {
            (q[e], q[s])
        };
        if qc < lo || qc > hi {
            return None;
        }
        let run = &q[s..=e];
        // first index whose charge is at or past qc in the run direction
        let k = run.partition_point(|&x| if dir > 0.0 { x < qc } else { x > qc });
        if k == 0 {
            return Some(phi[s]);
        }
        let (a, b) = (s + k - 1, (s + k).min(e));
        if q[b] == q[a] {
            return Some(phi[a]);
        }
        let w = (qc - q[a]) / (q[b] - q[a]);
        Some(phi[a] + w * (phi[b] - phi[a]))
    };

    let width = (qmax - qmin) / bins as f64;
    let mut worst: f64 = 0.0;
    for b in 0..bins {
        let qc = qmin + (b as f64 + 0.5) * width;
        let (lo, hi) = runs
            .iter()
            .filter_map(|run| interp(run, qc))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p), hi.max(p))
            });
        if hi > lo {
            worst = worst.max(hi - lo);
        }
    }
    worst
}

/// Classifies the flux-linkage vs charge curve of a multi-cycle trajectory.
pub fn phi_q_classify(
    traj: &Trajectory,
    tol_rel: f64,
) -> Result<PhiQClassification, AnalysisError> {
    let cycles = traj.cycles();
    if cycles < 2 {
        return Err(AnalysisError::TooFewCycles(cycles));
    }
    let n = traj.samples_per_cycle;
    let s = &traj.samples;
    let mut cycle_dq = Vec::with_capacity(cycles - 1);
    let mut cycle_dphi = Vec::with_capacity(cycles - 1);
    for c in 0..cycles - 1 {
        let (mut dq, mut dphi) = (0.0, 0.0);
        for j in 0..n {
            let (a, b) = (&s[c * n + j], &s[(c + 1) * n + j]);
            dq += b.q - a.q;
            dphi += b.phi - a.phi;
        }
        cycle_dq.push(dq / n as f64);
        cycle_dphi.push(dphi / n as f64);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let dq_per_cycle = mean(&cycle_dq);
    let dphi_per_cycle = mean(&cycle_dphi);

    let first = &s[..=n];
    let q_range = range(first.iter().map(|r| r.q));
    let phi_range = range(first.iter().map(|r| r.phi));
    let spread = phi_spread_at_equal_q(first, PHI_Q_BINS);

    let open = dq_per_cycle.abs() > tol_rel * q_range || dphi_per_cycle.abs() > tol_rel * phi_range;
    let kind = if open {
        PhiQKind::Open
    } else if spread <= tol_rel * phi_range {
        PhiQKind::SingleValued
    } else {
        PhiQKind::ClosedMultivalued
    };
    Ok(PhiQClassification {
        kind,
        dq_per_cycle,
        dphi_per_cycle,
        max_phi_spread_at_equal_q: spread,
        cycle_dq,
        cycle_dphi,
        q_range,
        phi_range,
        tol_rel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    /// Least-squares `v = slope * i` through the origin, Ohm.
    pub slope: f64,
    /// RMS residual divided by RMS voltage.
    pub relative_rms_residual: f64,
}

pub fn linearity_fit_records(samples: &[Record]) -> Result<LinearFit, AnalysisError> {
    let sii: f64 = samples.iter().map(|r| r.i * r.i).sum();
    if sii == 0.0 {
        return Err(AnalysisError::ZeroCurrent);
    }
    let svi: f64 = samples.iter().map(|r| r.v * r.i).sum();
    let slope = svi / sii;
    let svv: f64 = samples.iter().map(|r| r.v * r.v).sum();
    let sres: f64 = samples.iter().map(|r| (r.v - slope * r.i).powi(2)).sum();
    let relative_rms_residual = if svv > 0.0 { (sres / svv).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        relative_rms_residual,
    })
}

pub fn linearity_fit(traj: &Trajectory) -> Result<LinearFit, AnalysisError> {
    linearity_fit_records(&traj.samples)
}

/// Separate fits over the first `(0, T/2]` and second `(T/2, T]` half of
/// each drive period.
pub fn half_period_fits(traj: &Trajectory) -> Result<[LinearFit; 2], AnalysisError> {
    let period = traj.period;
    let (first, second): (Vec<Record>, Vec<Record>) = traj.samples.iter().cloned().partition(|r| {
        let phase = r.t.rem_euclid(period);
        phase > 0.0 && phase <= 0.5 * period
    });
    Ok([
        linearity_fit_records(&first)?,
        linearity_fit_records(&second)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub frequency: f64,
    pub normalized_area: f64,
    pub lobe_area: f64,
    pub classification: PhiQClassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Monotonicity {
    #[serde(rename = "trivially true")]
    TriviallyTrue,
    #[serde(rename = "strictly decreasing")]
    StrictlyDecreasing,
    #[serde(rename = "not strictly decreasing")]
    NotStrictlyDecreasing,
}

pub fn area_monotonicity(rows: &[SweepRow]) -> Monotonicity {
    if rows.len() < 2 {
        Monotonicity::TriviallyTrue
    } else if rows
        .windows(2)
        .all(|w| w[1].normalized_area < w[0].normalized_area)
    {
        Monotonicity::StrictlyDecreasing
    } else {
        Monotonicity::NotStrictlyDecreasing
    }
}

pub fn validate_frequencies(freqs: &[f64]) -> Result<(), AnalysisError> {
    let ok = !freqs.is_empty()
        && freqs.iter().all(|f| f.is_finite() && *f > 0.0)
        && freqs.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(AnalysisError::Frequencies)
    }
}

fn sweep_point<M: OnePort + ?Sized>(
    model: &M,
    template: &Drive,
    controls: &SimControls,
    frequency: f64,
) -> Result<SweepRow, AnalysisError> {
    let drive = template.with_frequency(frequency);
    let scale = template.frequency() / frequency;
    let controls = SimControls {
        dt: controls.dt * scale,
        event_tolerance: controls.event_tolerance * scale,
        record_cycles: controls.record_cycles.max(2),
        ..*controls
    };
    let traj = simulate_steady(model, &drive, &controls)?;
    let cycle = traj.cycle(0).expect("at least two cycles recorded");
    let area = loop_area(&cycle)?;
    let classification = phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?;
    Ok(SweepRow {
        frequency,
        normalized_area: area.normalized,
        lobe_area: area.lobe_sum,
        classification,
    })
}

/// Steady-state loop area and classification at each frequency, with every
/// model parameter held fixed. The step is scaled with the period so each
/// point keeps the template's samples per cycle. Frequencies are evaluated
/// in parallel; the table is ordered by frequency.
pub fn frequency_sweep<M: OnePort + ?Sized>(
    model: &M,
    template: &Drive,
    freqs: &[f64],
    controls: &SimControls,
) -> Result<Vec<SweepRow>, AnalysisError> {
    validate_frequencies(freqs)?;
    freqs
        .par_iter()
        .map(|&f| {
            sweep_point(model, template, controls, f).map_err(|e| AnalysisError::Sweep {
                frequency: f,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oneport::{accumulate_integrals, InputKind};
    use smallvec::smallvec;
    use std::f64::consts::PI;

    fn cycles_of(traj: Trajectory, n: usize) -> Trajectory {
        Trajectory {
            period: n as f64,
            samples_per_cycle: n,
            ..traj
        }
    }

    fn traj_from(n: usize, f: impl Fn(usize) -> (f64, f64)) -> Trajectory {
        let samples = (0..=n)
            .map(|k| {
                let (i, v) = f(k);
                Record::new(InputKind::CurrentControlled, k as f64, i, v, smallvec![0.0])
            })
            .collect();
        accumulate_integrals(Trajectory {
            dt: 1.0,
            period: n as f64,
            samples_per_cycle: n,
            samples,
            events: vec![],
        })
        .unwrap()
    }

    #[test]
    fn circle_area_is_pi() {
        let n = 1000;
        let traj = traj_from(n, |k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            (th.cos(), th.sin())
        });
        let a = loop_area(&traj).unwrap();
        assert!((a.lobe_sum - PI).abs() < 1e-4, "{}", a.lobe_sum);
        assert!((a.signed - PI).abs() < 1e-4);
        let rev = loop_area(&traj.reversed()).unwrap();
        assert!((rev.signed + a.signed).abs() < 1e-12);
    }

    #[test]
    fn line_has_no_area() {
        let traj = traj_from(400, |k| {
            let i = (2.0 * PI * k as f64 / 400.0).sin();
            (i, 3.0 * i)
        });
        let a = loop_area(&traj).unwrap();
        assert!(a.lobe_sum.abs() < 1e-12);
        assert!(a.normalized.abs() < 1e-12);
    }

    #[test]
    fn figure_eight_lobes_do_not_cancel() {
        // v = i (1 + 0.5 cos th): lobes of opposite orientation
        let n = 2000;
        let traj = traj_from(n, |k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            let i = th.sin();
            (i, i * (1.0 + 0.5 * th.cos()))
        });
        let a = loop_area(&traj).unwrap();
        assert!(a.signed.abs() < 1e-9);
        assert!(a.lobe_sum > 0.1);
        assert_eq!(a.lobes, 2);
    }

    #[test]
    fn short_loop_rejected() {
        let traj = traj_from(50, |k| (k as f64, 1.0));
        assert!(matches!(
            loop_area(&traj),
            Err(AnalysisError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn resistor_is_pinched() {
        let traj = traj_from(1000, |k| {
            let i = (2.0 * PI * k as f64 / 1000.0).sin();
            (i, 2.0 * i)
        });
        let p = pinch_test(&traj, 1e-12, 1e-12).unwrap();
        assert!(p.pinched);
        assert!(p.worst_v_at_zero_i < 1e-12);
        assert!(p.worst_i_at_zero_v < 1e-12);
    }

    #[test]
    fn monopolar_drive_rejected() {
        let traj = traj_from(1000, |k| (1.0 + k as f64, 2.0));
        assert!(matches!(
            pinch_test(&traj, 1e-6, 1e-6),
            Err(AnalysisError::NotBipolar(0))
        ));
    }

    #[test]
    fn phase_shifted_loop_is_not_pinched() {
        let traj = traj_from(1000, |k| {
            let th = 2.0 * PI * k as f64 / 1000.0;
            (th.sin(), (th + 0.3).sin())
        });
        let p = pinch_test(&traj, 1e-3, 1e-3).unwrap();
        assert!(!p.pinched);
        assert!((p.worst_v_at_zero_i - 0.3f64.sin()).abs() < 1e-5);
    }

    #[test]
    fn linear_fit_exact_line() {
        let traj = traj_from(100, |k| {
            let i = (k as f64 * 0.1).sin();
            (i, 2.0 * i)
        });
        let fit = linearity_fit(&traj).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!(fit.relative_rms_residual < 1e-14);
        let zero = traj_from(10, |_| (0.0, 1.0));
        assert_eq!(linearity_fit(&zero), Err(AnalysisError::ZeroCurrent));
    }

    #[test]
    fn half_period_fits_split_by_phase() {
        let n = 1000;
        let traj = traj_from(2 * n, |k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            let i = th.sin();
            let r = if (k % n) as f64 <= n as f64 / 2.0 && k % n != 0 {
                6.0
            } else {
                4.0
            };
            (i, r * i)
        });
        let traj = cycles_of(traj, n);
        let [a, b] = half_period_fits(&traj).unwrap();
        assert!((a.slope - 6.0).abs() < 1e-12);
        assert!((b.slope - 4.0).abs() < 1e-12);
    }

    #[test]
    fn phi_spread_detects_hysteresis() {
        // linear resistor: single-valued phi(q)
        let n = 1000;
        let lin = cycles_of(
            traj_from(2 * n, |k| {
                let i = (2.0 * PI * k as f64 / n as f64).sin();
                (i, 2.0 * i)
            }),
            n,
        );
        let c = phi_q_classify(&lin, 1e-3).unwrap();
        assert_eq!(c.kind, PhiQKind::SingleValued);
        assert!(c.max_phi_spread_at_equal_q < 1e-9 * c.phi_range);
        // quadrature component: closed ellipse in phi-q
        let ell = cycles_of(
            traj_from(2 * n, |k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                (th.sin(), th.cos())
            }),
            n,
        );
        let c = phi_q_classify(&ell, 1e-3).unwrap();
        assert_eq!(c.kind, PhiQKind::ClosedMultivalued);
        // net voltage offset: flux drifts
        let drift = cycles_of(
            traj_from(2 * n, |k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                (th.sin(), 2.0 * th.sin() + 0.5)
            }),
            n,
        );
        let c = phi_q_classify(&drift, 1e-3).unwrap();
        assert_eq!(c.kind, PhiQKind::Open);
        assert!((c.dphi_per_cycle - 0.5 * n as f64).abs() < 1e-6);
        assert!(matches!(
            phi_q_classify(&traj_from(n, |_| (1.0, 1.0)), 1e-3),
            Err(AnalysisError::TooFewCycles(1))
        ));
    }

    #[test]
    fn frequency_validation() {
        assert!(validate_frequencies(&[0.1, 0.2]).is_ok());
        assert!(validate_frequencies(&[0.8, 0.1]).is_err());
        assert!(validate_frequencies(&[0.1, 0.1]).is_err());
        assert!(validate_frequencies(&[]).is_err());
        assert!(validate_frequencies(&[-1.0]).is_err());
    }

    #[test]
    fn monotonicity_verdicts() {
        let row = |a: f64| SweepRow {
            frequency: 1.0,
            normalized_area: a,
            lobe_area: a,
            classification: PhiQClassification {
                kind: PhiQKind::SingleValued,
                dq_per_cycle: 0.0,
                dphi_per_cycle: 0.0,
                max_phi_spread_at_equal_q: 0.0,
                cycle_dq: vec![],
                cycle_dphi: vec![],
                q_range: 1.0,
                phi_range: 1.0,
                tol_rel: 1e-3,
            },
        };
        assert_eq!(area_monotonicity(&[row(1.0)]), Monotonicity::TriviallyTrue);
        assert_eq!(
            area_monotonicity(&[row(2.0), row(1.0)]),
            Monotonicity::StrictlyDecreasing
        );
        assert_eq!(
            area_monotonicity(&[row(1.0), row(1.0)]),
            Monotonicity::NotStrictlyDecreasing
        );
    }
}
