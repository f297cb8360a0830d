//! Stochastic measurement records on a fixed time grid.
//!
//! Ideal detection records are drawn from the exact binned emission
//! process; realistic avalanche records are produced by running the
//! detector automaton (ready → avalanching → resetting → ready) on a thinned
//! copy of the same emission stream, so both analyses see the same
//! underlying photons.

use alloc::vec::Vec;

use rand::Rng;

use crate::dynamics::{AtomState, SystemParams};
use crate::linalg::Matrix;
use crate::seed;
use crate::supersystem::{ideal_bin_maps, DetectorParams, StepScheme};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    /// Photon emitted by the atom and seen by an ideal detector (or absorbed
    /// by the diode, after thinning).
    Detection,
    /// Avalanche triggered by an absorbed photon.
    Avalanche,
    /// Avalanche triggered by a dark count.
    DarkAvalanche,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Detection => "detection",
            EventKind::Avalanche => "avalanche",
            EventKind::DarkAvalanche => "dark_avalanche",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "detection" => Some(EventKind::Detection),
            "avalanche" => Some(EventKind::Avalanche),
            "dark_avalanche" => Some(EventKind::DarkAvalanche),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
}

/// Time-stamped events on the grid `[k·dt, (k+1)·dt)`, `k < n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    dt: f64,
    n_steps: u64,
    events: Vec<Event>,
}

impl MeasurementRecord {
    pub fn new(dt: f64, n_steps: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::NonPositiveStep(dt));
        }
        Ok(Self { dt, n_steps, events: Vec::new() })
    }

    /// Grid covering `duration` (rounded to the nearest whole step).
    pub fn with_duration(dt: f64, duration: f64) -> Result<Self> {
        if duration.is_nan() || duration < 0.0 {
            return Err(Error::InvalidParameter { name: "duration", reason: "must be >= 0" });
        }
        Self::new(dt, steps_for(duration, dt))
    }

    pub fn from_events(dt: f64, n_steps: u64, events: Vec<Event>) -> Result<Self> {
        let mut r = Self::new(dt, n_steps)?;
        for e in events {
            r.push(e)?;
        }
        Ok(r)
    }

    pub fn push(&mut self, e: Event) -> Result<()> {
        if e.step >= self.n_steps {
            return Err(Error::InvalidRecord("event beyond the end of the record"));
        }
        if self.events.last().is_some_and(|l| l.step >= e.step) {
            return Err(Error::InvalidRecord("step indices must be strictly increasing"));
        }
        self.events.push(e);
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Dense `dN` increments for every step of the record.
    pub fn increments(&self) -> Vec<bool> {
        let mut out = alloc::vec![false; self.n_steps as usize];
        for e in &self.events {
            out[e.step as usize] = true;
        }
        out
    }

    /// Gaps between consecutive events, in time units.
    pub fn waiting_times(&self) -> Vec<f64> {
        self.events.windows(2).map(|w| (w[1].step - w[0].step) as f64 * self.dt).collect()
    }

    /// Same grid, first `n_steps` steps only.
    pub fn truncated(&self, n_steps: u64) -> Self {
        let n = n_steps.min(self.n_steps);
        Self { dt: self.dt, n_steps: n, events: self.events.iter().copied().take_while(|e| e.step < n).collect() }
    }
}

pub fn steps_for(duration: f64, dt: f64) -> u64 {
    libm::round(duration / dt) as u64
}

/// Exact sampler of the binned emission process of a normalized atom.
///
/// Per bin, the probability of at least one emission is `Tr[E1 ρ]` with
/// `E1 = exp(dt·L) − exp(dt·(L − ΓJ))`; the conditional state is then
/// `E1 ρ / Tr[E1 ρ]` (ground state up to O(Ω dt)), otherwise
/// `E0 ρ / Tr[E0 ρ]`.
#[derive(Debug, Clone)]
pub struct EmissionSampler {
    emit: Matrix<4>,
    quiet: Matrix<4>,
    state: [f64; 4],
}

impl EmissionSampler {
    pub fn new(params: &SystemParams, dt: f64, initial: AtomState) -> Result<Self> {
        let maps = ideal_bin_maps(params, 1.0, dt, StepScheme::Exact)?;
        Ok(Self { emit: maps.event, quiet: maps.no_event, state: initial.normalized().to_array() })
    }

    pub fn state(&self) -> AtomState {
        AtomState::from_array(self.state)
    }

    /// Advances one bin; returns whether an emission occurred.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let row = &self.emit.0[0];
        let p: f64 = row.iter().zip(self.state.iter()).map(|(a, b)| a * b).sum();
        let u: f64 = rng.gen();
        let emitted = u < p;
        let (m, norm) = if emitted { (&self.emit, p) } else { (&self.quiet, 1.0 - p) };
        let mut v = m.apply(&self.state);
        let scale = 1.0 / norm;
        for x in v.iter_mut() {
            *x *= scale;
        }
        // renormalize exactly to keep n = 1 over long runs
        let n = v[0];
        if n > 0.0 {
            for x in v.iter_mut() {
                *x /= n;
            }
        }
        self.state = v;
        emitted
    }
}

/// Ideal direct-detection record of an atom starting in the ground state.
///
/// Returns the record and the final normalized conditional state.
pub fn simulate_ideal_record(params: &SystemParams, duration: f64, dt: f64, seed: u64) -> Result<(MeasurementRecord, AtomState)> {
    let mut record = MeasurementRecord::with_duration(dt, duration)?;
    let mut sampler = EmissionSampler::new(params, dt, AtomState::ground())?;
    let mut rng = seed::rng(seed);
    for k in 0..record.n_steps {
        if sampler.step(&mut rng) {
            record.events.push(Event { step: k, kind: EventKind::Detection });
        }
    }
    Ok((record, sampler.state()))
}

/// Keeps each detection independently with probability `eta`.
pub fn thin_absorptions(record: &MeasurementRecord, eta: f64, seed: u64) -> Result<MeasurementRecord> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter { name: "eta", reason: "must lie in [0, 1]" });
    }
    let mut rng = seed::rng(seed);
    let events =
        record.events.iter().filter(|e| e.kind == EventKind::Detection).filter(|_| rng.gen::<f64>() < eta).copied().collect();
    Ok(MeasurementRecord { dt: record.dt, n_steps: record.n_steps, events })
}

/// Detector microstate: 0 ready, 1 avalanching, 2 resetting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Microstate {
    Ready = 0,
    Avalanching = 1,
    Resetting = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorAutomatonState {
    pub micro: Microstate,
    pub time_entered: f64,
}

fn exp_sample<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // 1 - u lies in (0, 1]
    -libm::log(1.0 - rng.gen::<f64>()) / rate
}

/// Avalanche record produced by the detector automaton from an absorption
/// record on the same grid. See [`simulate_avalanche_record_traced`].
pub fn simulate_avalanche_record(absorptions: &MeasurementRecord, det: &DetectorParams, seed: u64) -> Result<MeasurementRecord> {
    simulate_avalanche_record_traced(absorptions, det, seed).map(|(r, _)| r)
}

/// Runs the detector automaton and also returns its transition history.
///
/// * ready: the first absorption (placed uniformly inside its bin) or dark
///   count (Poisson, rate γ_dk) moves the detector to avalanching;
/// * avalanching: after an Exponential(γ_r) delay the avalanche registers in
///   the bin containing it, and the detector starts resetting;
/// * resetting: for `d = round(τ_dd/dt)` further whole bins; the detector is
///   ready again at the start of bin `j + d + 1` for an avalanche in bin `j`.
///
/// Absorptions arriving while avalanching or resetting are discarded.
pub fn simulate_avalanche_record_traced(
    absorptions: &MeasurementRecord,
    det: &DetectorParams,
    seed: u64,
) -> Result<(MeasurementRecord, Vec<DetectorAutomatonState>)> {
    let dt = absorptions.dt;
    let n = absorptions.n_steps;
    let end = absorptions.duration();
    let dead = det.dead_steps(dt) as u64;
    let mut rng = seed::rng(seed);
    let mut out = MeasurementRecord::new(dt, n)?;
    let mut trace = alloc::vec![DetectorAutomatonState { micro: Microstate::Ready, time_entered: 0.0 }];
    let abs: Vec<u64> = absorptions.events.iter().filter(|e| e.kind == EventKind::Detection).map(|e| e.step).collect();
    let mut next_abs = 0usize;
    let mut ready_step = 0u64;
    while ready_step < n {
        let ready_time = ready_step as f64 * dt;
        while next_abs < abs.len() && abs[next_abs] < ready_step {
            next_abs += 1;
        }
        let absorption = abs.get(next_abs).map(|&s| (s as f64 + rng.gen::<f64>()) * dt);
        let dark = if det.gamma_dk > 0.0 { Some(ready_time + exp_sample(&mut rng, det.gamma_dk)) } else { None };
        let (trigger, kind) = match (absorption, dark) {
            (Some(a), Some(d)) if d < a => (d, EventKind::DarkAvalanche),
            (Some(a), _) => (a, EventKind::Avalanche),
            (None, Some(d)) => (d, EventKind::DarkAvalanche),
            (None, None) => break,
        };
        if trigger >= end {
            break;
        }
        trace.push(DetectorAutomatonState { micro: Microstate::Avalanching, time_entered: trigger });
        let t_aval = trigger + exp_sample(&mut rng, det.gamma_r);
        let step = libm::floor(t_aval / dt) as u64;
        if step >= n {
            break;
        }
        out.events.push(Event { step, kind });
        trace.push(DetectorAutomatonState { micro: Microstate::Resetting, time_entered: t_aval });
        ready_step = step + dead + 1;
        trace.push(DetectorAutomatonState { micro: Microstate::Ready, time_entered: ready_step as f64 * dt });
    }
    Ok((out, trace))
}
