//! Bayesian estimation of the Rabi frequency from a detection record.
//!
//! A [`TrajectoryBank`] runs one linear trajectory per candidate Ω on an
//! [`OmegaGrid`]. The unnormalized trace of each trajectory is proportional
//! to the record likelihood, so the posterior is the prior weight times the
//! trace, renormalized. Traces are rescaled every
//! [`RENORMALIZE_EVERY`] steps and the scale factors kept in log space.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use rand::Rng;

use crate::dynamics::{AtomState, SystemParams};
use crate::record::{simulate_avalanche_record, thin_absorptions, EmissionSampler, Event, EventKind, MeasurementRecord};
use crate::seed::{self, Role};
use crate::supersystem::{
    ideal_bin_maps, ostensible_rate_or_floor, realistic_bin_maps, reset_detector, BinMaps, DetectorParams, OstensibleRate,
    StepScheme, SupersystemState,
};
use crate::{Error, Result};

pub const RENORMALIZE_EVERY: u64 = 1000;

/// Default grid size.
pub const DEFAULT_NODES: usize = 100;

/// Quadrature of the arcsine prior `1/(π√(Ω_max² − Ω²))`.
///
/// `build_grid` places nodes at `Ω_max sin θ_j` with `θ_j` the midpoints of
/// `n` equal cells of `(−π/2, π/2)`; every node then carries weight `1/n`
/// and represents a cell of width `dΩ_j = Ω_max cos θ_j · π/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    widths: Vec<f64>,
}

pub fn build_grid(omega_max: f64, n_nodes: usize) -> Result<OmegaGrid> {
    if n_nodes < 2 || n_nodes % 2 == 1 {
        return Err(Error::OddNodeCount(n_nodes));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Error::InvalidParameter { name: "omega_max", reason: "must be finite and > 0" });
    }
    let n = n_nodes;
    let dtheta = PI / n as f64;
    let mut nodes = alloc::vec![0.0; n];
    let mut widths = alloc::vec![0.0; n];
    // build the positive half and mirror it, so the grid is exactly symmetric
    for j in n / 2..n {
        let theta = (j as f64 + 0.5 - 0.5 * n as f64) * dtheta;
        nodes[j] = omega_max * libm::sin(theta);
        widths[j] = omega_max * libm::cos(theta) * dtheta;
        nodes[n - 1 - j] = -nodes[j];
        widths[n - 1 - j] = widths[j];
    }
    Ok(OmegaGrid { nodes, weights: alloc::vec![1.0 / n as f64; n], widths })
}

impl OmegaGrid {
    /// Arbitrary nodes with given prior weights (normalized here) and unit
    /// cell widths. Used for known-|Ω| banks.
    pub fn from_nodes(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() || weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
            return Err(Error::InvalidParameter { name: "weights", reason: "need one positive weight per node" });
        }
        let total: f64 = weights.iter().sum();
        let n = nodes.len();
        Ok(Self { nodes, weights: weights.iter().map(|w| w / total).collect(), widths: alloc::vec![1.0; n] })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differential entropy (bits) of a distribution given by node masses,
    /// treating each mass as spread evenly over its cell.
    pub fn differential_entropy_bits(&self, probabilities: &[f64]) -> f64 {
        -probabilities.iter().zip(&self.widths).filter(|(p, _)| **p > 0.0).map(|(p, w)| p * libm::log2(p / w)).sum::<f64>()
    }

    pub fn prior_entropy_bits(&self) -> f64 {
        self.differential_entropy_bits(&self.weights)
    }

    /// Information gain `h(prior) − h(posterior)` in bits, both entropies on
    /// this grid's quadrature.
    pub fn info_gain_bits(&self, probabilities: &[f64]) -> f64 {
        self.prior_entropy_bits() - self.differential_entropy_bits(probabilities)
    }
}

/// Closed-form differential entropy of the arcsine prior on
/// `[−Ω_max, Ω_max]`: `log₂(π Ω_max / 2)` bits.
pub fn prior_entropy_bits_analytic(omega_max: f64) -> f64 {
    libm::log2(PI * omega_max / 2.0)
}

/// Inverse-CDF draw from the arcsine prior.
pub fn sample_prior(omega_max: f64, u: f64) -> f64 {
    omega_max * libm::sin(PI * (u - 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorModel {
    /// Photon counting with efficiency `eta` and no other imperfection.
    Ideal { eta: f64 },
    /// Avalanche photodiode.
    Realistic(DetectorParams),
}

impl DetectorModel {
    pub fn eta(&self) -> f64 {
        match self {
            DetectorModel::Ideal { eta } => *eta,
            DetectorModel::Realistic(d) => d.eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankConfig {
    pub gamma: f64,
    pub model: DetectorModel,
    pub eps: OstensibleRate,
    pub dt: f64,
    pub scheme: StepScheme,
    /// Known initial atom state (detector ready).
    pub initial: AtomState,
}

impl BankConfig {
    pub fn new(model: DetectorModel, eps: OstensibleRate, dt: f64) -> Self {
        Self { gamma: 1.0, model, eps, dt, scheme: StepScheme::Exact, initial: AtomState::ground() }
    }
}

#[derive(Debug, Clone)]
struct Node<const N: usize> {
    maps: BinMaps<N>,
    state: [f64; N],
}

#[derive(Debug, Clone)]
enum Nodes {
    Ideal(Vec<Node<4>>),
    Realistic { nodes: Vec<Node<12>>, pending: VecDeque<bool>, dead_steps: usize },
}

/// One linear trajectory per grid node, all driven by the same record.
#[derive(Debug, Clone)]
pub struct TrajectoryBank {
    grid: OmegaGrid,
    config: BankConfig,
    nodes: Nodes,
    log_scale: Vec<f64>,
    steps: u64,
}

fn trace_of<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().step_by(4).sum()
}

impl TrajectoryBank {
    pub fn new(grid: OmegaGrid, config: BankConfig) -> Result<Self> {
        let params = |w: f64| SystemParams::new(w, config.gamma);
        let nodes = match config.model {
            DetectorModel::Ideal { eta } => Nodes::Ideal(
                grid.nodes()
                    .iter()
                    .map(|&w| {
                        let maps =
                            ideal_bin_maps(&params(w)?, eta, config.dt, config.scheme)?.with_ostensible(config.eps, config.dt)?;
                        Ok(Node { maps, state: config.initial.to_array() })
                    })
                    .collect::<Result<_>>()?,
            ),
            DetectorModel::Realistic(det) => Nodes::Realistic {
                nodes: grid
                    .nodes()
                    .iter()
                    .map(|&w| {
                        let maps = realistic_bin_maps(&params(w)?, &det, config.dt, config.scheme)?
                            .with_ostensible(config.eps, config.dt)?;
                        Ok(Node { maps, state: SupersystemState::ready(config.initial).to_array() })
                    })
                    .collect::<Result<_>>()?,
                pending: VecDeque::new(),
                dead_steps: det.dead_steps(config.dt),
            },
        };
        let n = grid.len();
        Ok(Self { grid, config, nodes, log_scale: alloc::vec![0.0; n], steps: 0 })
    }

    pub fn grid(&self) -> &OmegaGrid {
        &self.grid
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn elapsed(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    /// Advances every node through one record bin.
    pub fn step(&mut self, event: bool) {
        match &mut self.nodes {
            Nodes::Ideal(nodes) => {
                for node in nodes.iter_mut() {
                    node.state = node.maps.apply(&node.state, event);
                }
            }
            Nodes::Realistic { nodes, pending, dead_steps } => {
                pending.push_back(event);
                let reset = if pending.len() > *dead_steps { pending.pop_front().unwrap_or(false) } else { false };
                for node in nodes.iter_mut() {
                    node.state = node.maps.apply(&node.state, event);
                    if reset {
                        reset_detector(&mut node.state);
                    }
                }
            }
        }
        self.steps += 1;
        if self.steps.is_multiple_of(RENORMALIZE_EVERY) {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        fn go<const N: usize>(nodes: &mut [Node<N>], log_scale: &mut [f64]) {
            for (node, ls) in nodes.iter_mut().zip(log_scale.iter_mut()) {
                let t = trace_of(&node.state);
                if t > 0.0 && t.is_finite() {
                    let inv = 1.0 / t;
                    node.state.iter_mut().for_each(|x| *x *= inv);
                    *ls += libm::log(t);
                } else if t <= 0.0 {
                    node.state = [0.0; N];
                    *ls = f64::NEG_INFINITY;
                }
            }
        }
        match &mut self.nodes {
            Nodes::Ideal(n) => go(n, &mut self.log_scale),
            Nodes::Realistic { nodes, .. } => go(nodes, &mut self.log_scale),
        }
    }

    /// Steps `range` of `record`; the range must start where the bank
    /// currently is.
    pub fn advance(&mut self, record: &MeasurementRecord, range: Range<u64>) -> Result<()> {
        if range.start != self.steps || range.end > record.n_steps() || range.start > range.end {
            return Err(Error::InvalidRecord("step range does not continue the bank"));
        }
        if (record.dt() - self.config.dt).abs() > 1e-12 * self.config.dt {
            return Err(Error::InvalidRecord("record grid differs from the bank's dt"));
        }
        let events = record.events();
        let mut next = events.partition_point(|e| e.step < range.start);
        for k in range {
            let hit = next < events.len() && events[next].step == k;
            if hit {
                next += 1;
            }
            self.step(hit);
        }
        Ok(())
    }

    /// Per-node log of `Σ_s Tr ρ̄_s` (relative likelihood up to Λ).
    pub fn log_likelihoods(&self) -> Vec<f64> {
        fn go<const N: usize>(nodes: &[Node<N>], log_scale: &[f64]) -> Vec<f64> {
            nodes
                .iter()
                .zip(log_scale)
                .map(|(n, ls)| {
                    let t = trace_of(&n.state);
                    if t > 0.0 {
                        ls + libm::log(t)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        }
        match &self.nodes {
            Nodes::Ideal(n) => go(n, &self.log_scale),
            Nodes::Realistic { nodes, .. } => go(nodes, &self.log_scale),
        }
    }

    /// Unnormalized posterior factors `w_j exp(ℓ_j − max ℓ)`.
    fn relative_weights(&self) -> Result<Vec<f64>> {
        let ll = self.log_likelihoods();
        let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::ImpossibleRecord);
        }
        Ok(ll.iter().zip(self.grid.weights()).map(|(l, w)| w * libm::exp(l - max)).collect())
    }

    pub fn posterior(&self) -> Result<PosteriorSnapshot> {
        if self.steps == 0 {
            let probabilities = self.grid.weights().to_vec();
            return Ok(PosteriorSnapshot { time: 0.0, probabilities, info_gain_bits: 0.0 });
        }
        let rel = self.relative_weights()?;
        let total: f64 = rel.iter().sum();
        let probabilities: Vec<f64> = rel.iter().map(|r| r / total).collect();
        let info_gain_bits = self.grid.info_gain_bits(&probabilities);
        Ok(PosteriorSnapshot { time: self.elapsed(), probabilities, info_gain_bits })
    }

    /// Conditional atom state of node `j`, summed over detector microstates
    /// and normalized.
    pub fn node_state(&self, j: usize) -> AtomState {
        self.node_total(j).normalized()
    }

    /// Unnormalized atom state of node `j` (detector microstates summed),
    /// including the factored-out scale. Over long records this can
    /// underflow; prefer [`log_likelihoods`](Self::log_likelihoods).
    pub fn unnormalized_state(&self, j: usize) -> AtomState {
        self.node_total(j).scaled(libm::exp(self.log_scale[j]))
    }

    fn node_total(&self, j: usize) -> AtomState {
        match &self.nodes {
            Nodes::Ideal(n) => AtomState::from_array(n[j].state),
            Nodes::Realistic { nodes, .. } => crate::supersystem::total_state(&SupersystemState::from_array(&nodes[j].state)),
        }
    }

    /// Prior-weighted mixture of the node states, normalized by the summed
    /// traces: the observer's best estimate of the atom state.
    pub fn best_state(&self) -> Result<AtomState> {
        let ll = self.log_likelihoods();
        let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::ImpossibleRecord);
        }
        let mut acc = AtomState::ZERO;
        for (j, (l, w)) in ll.iter().zip(self.grid.weights()).enumerate() {
            if l.is_finite() {
                let t = self.node_total(j);
                // node totals are stored relative to exp(log_scale)
                let scale = w * libm::exp(self.log_scale[j] - max);
                acc = acc.add(&t.scaled(scale));
            }
        }
        Ok(acc.normalized())
    }
}

/// Posterior over the grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSnapshot {
    pub time: f64,
    pub probabilities: Vec<f64>,
    pub info_gain_bits: f64,
}

impl PosteriorSnapshot {
    /// Total mass on nodes with `lo ≤ |Ω| ≤ hi`.
    pub fn mass_in_abs_range(&self, grid: &OmegaGrid, lo: f64, hi: f64) -> f64 {
        grid.nodes().iter().zip(&self.probabilities).filter(|(w, _)| (lo..=hi).contains(&libm::fabs(**w))).map(|(_, p)| p).sum()
    }

    /// Posterior mean of |Ω|.
    pub fn mean_abs_omega(&self, grid: &OmegaGrid) -> f64 {
        grid.nodes().iter().zip(&self.probabilities).map(|(w, p)| libm::fabs(*w) * p).sum()
    }

    /// Largest `|P(Ω_j) − P(−Ω_j)|` over mirrored node pairs of a symmetric
    /// grid.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.probabilities;
        let n = p.len();
        (0..n / 2).map(|j| libm::fabs(p[j] - p[n - 1 - j])).fold(0.0, f64::max)
    }
}

/// Records of one ensemble member, all derived from the same emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedRecords {
    pub omega_true: f64,
    /// Every photon emitted by the atom.
    pub emissions: MeasurementRecord,
    /// Photons absorbed by the detector (emissions thinned by η).
    pub absorptions: MeasurementRecord,
    /// Avalanches produced by the detector automaton (if a realistic
    /// detector was given).
    pub avalanches: Option<MeasurementRecord>,
}

/// Simulates member `index` of an ensemble with a fixed Ω_true (`params.omega`).
pub fn simulate_shared_records(
    params: &SystemParams,
    eta: f64,
    detector: Option<&DetectorParams>,
    duration: f64,
    dt: f64,
    master_seed: u64,
    index: u64,
) -> Result<SharedRecords> {
    let mut emissions = MeasurementRecord::with_duration(dt, duration)?;
    let mut sampler = EmissionSampler::new(params, dt, AtomState::ground())?;
    let mut rng = seed::rng(seed::derive(master_seed, Role::Emissions, index));
    for k in 0..emissions.n_steps() {
        if sampler.step(&mut rng) {
            emissions.push(Event { step: k, kind: EventKind::Detection })?;
        }
    }
    let absorptions = thin_absorptions(&emissions, eta, seed::derive(master_seed, Role::Thinning, index))?;
    let avalanches = detector
        .map(|d| simulate_avalanche_record(&absorptions, d, seed::derive(master_seed, Role::Detector, index)))
        .transpose()?;
    Ok(SharedRecords { omega_true: params.omega, emissions, absorptions, avalanches })
}

/// Ω_true for ensemble member `index`, drawn from the arcsine prior.
pub fn draw_omega_true(omega_max: f64, master_seed: u64, index: u64) -> f64 {
    let mut rng = seed::rng(seed::derive(master_seed, Role::OmegaDraw, index));
    sample_prior(omega_max, rng.gen::<f64>())
}

/// Runs `bank` through `record`, calling `on_snapshot` at step 0 and every
/// `every` steps (and at the end if it is not a multiple of `every`).
pub fn run_with_snapshots(
    bank: &mut TrajectoryBank,
    record: &MeasurementRecord,
    every: u64,
    mut on_snapshot: impl FnMut(&TrajectoryBank) -> Result<()>,
) -> Result<()> {
    let every = every.max(1);
    on_snapshot(bank)?;
    while bank.steps() < record.n_steps() {
        let end = (bank.steps() + every).min(record.n_steps());
        bank.advance(record, bank.steps()..end)?;
        on_snapshot(bank)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoGainConfig {
    pub omega_max: f64,
    pub n_nodes: usize,
    pub gamma: f64,
    pub dt: f64,
    pub duration: f64,
    pub snapshot_every: f64,
    pub model: DetectorModel,
    pub scheme: StepScheme,
    pub ensemble_size: usize,
    pub master_seed: u64,
}

impl InfoGainConfig {
    pub fn snapshot_steps(&self) -> u64 {
        crate::record::steps_for(self.snapshot_every, self.dt).max(1)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = crate::record::steps_for(self.duration, self.dt);
        let every = self.snapshot_steps();
        let mut t: Vec<f64> = (0..=n / every).map(|k| (k * every) as f64 * self.dt).collect();
        if !n.is_multiple_of(every) {
            t.push(n as f64 * self.dt);
        }
        t
    }
}

/// ΔI(t) of one ensemble member at [`InfoGainConfig::snapshot_times`].
pub fn info_gain_member(cfg: &InfoGainConfig, index: u64) -> Result<Vec<f64>> {
    let omega_true = draw_omega_true(cfg.omega_max, cfg.master_seed, index);
    let eta = cfg.model.eta();
    let det = match cfg.model {
        DetectorModel::Realistic(d) => Some(d),
        DetectorModel::Ideal { .. } => None,
    };
    let recs = simulate_shared_records(
        &SystemParams::new(omega_true, cfg.gamma)?,
        eta,
        det.as_ref(),
        cfg.duration,
        cfg.dt,
        cfg.master_seed,
        index,
    )?;
    let record = recs.avalanches.as_ref().unwrap_or(&recs.absorptions);
    let eps = ostensible_rate_or_floor(omega_true, cfg.gamma, eta)?;
    let grid = build_grid(cfg.omega_max, cfg.n_nodes)?;
    let mut bank_cfg = BankConfig::new(cfg.model, eps, cfg.dt);
    bank_cfg.gamma = cfg.gamma;
    bank_cfg.scheme = cfg.scheme;
    let mut bank = TrajectoryBank::new(grid, bank_cfg)?;
    let mut gains = Vec::new();
    run_with_snapshots(&mut bank, record, cfg.snapshot_steps(), |b| {
        gains.push(b.posterior()?.info_gain_bits);
        Ok(())
    })?;
    Ok(gains)
}

/// Pointwise mean and standard error over ensemble members.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoGainCurve {
    pub time: Vec<f64>,
    pub mean_bits: Vec<f64>,
    pub stderr_bits: Vec<f64>,
}

pub fn aggregate_info_gain(time: Vec<f64>, members: &[Vec<f64>]) -> InfoGainCurve {
    let m = members.len() as f64;
    let mut mean_bits = Vec::with_capacity(time.len());
    let mut stderr_bits = Vec::with_capacity(time.len());
    for k in 0..time.len() {
        let mean = members.iter().map(|v| v[k]).sum::<f64>() / m;
        let var =
            if members.len() > 1 { members.iter().map(|v| (v[k] - mean) * (v[k] - mean)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        mean_bits.push(mean);
        stderr_bits.push(libm::sqrt(var / m));
    }
    InfoGainCurve { time, mean_bits, stderr_bits }
}

/// Sequential ensemble; the `rabi` crate runs members in parallel.
pub fn info_gain_ensemble(cfg: &InfoGainConfig) -> Result<InfoGainCurve> {
    if cfg.ensemble_size < 2 {
        return Err(Error::InvalidParameter { name: "ensemble_size", reason: "must be >= 2" });
    }
    let members = (0..cfg.ensemble_size as u64).map(|i| info_gain_member(cfg, i)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate_info_gain(cfg.snapshot_times(), &members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supersystem::ostensible_rate;
    use approx::assert_abs_diff_eq;

    fn ideal_bank(grid: OmegaGrid, eps: f64, dt: f64) -> TrajectoryBank {
        let cfg = BankConfig::new(DetectorModel::Ideal { eta: 1.0 }, OstensibleRate::new(eps).unwrap(), dt);
        TrajectoryBank::new(grid, cfg).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = build_grid(3.0, 2).unwrap();
        let s = 3.0 * libm::sin(PI / 4.0);
        assert_abs_diff_eq!(g.nodes()[1], s, epsilon = 1e-15);
        assert_eq!(g.nodes()[0], -g.nodes()[1]);
        assert_eq!(g.weights(), &[0.5, 0.5]);
        for n in [2usize, 10, 100, 1000] {
            let g = build_grid(7.0, n).unwrap();
            assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for j in 0..n {
                assert_eq!(g.nodes()[j], -g.nodes()[n - 1 - j]);
            }
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
        assert_eq!(build_grid(1.0, 7), Err(Error::OddNodeCount(7)));
        assert_eq!(build_grid(1.0, 0), Err(Error::OddNodeCount(0)));
    }

    #[test]
    fn grid_cdf_matches_prior_samples() {
        let n = 100;
        let g = build_grid(10.0, n).unwrap();
        let mut rng = seed::rng(5);
        let mut samples: Vec<f64> = (0..1_000_000).map(|_| sample_prior(10.0, rng.gen::<f64>())).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // KS distance between the empirical CDF and the grid's step CDF
        let mut ks: f64 = 0.0;
        let mut cum = 0.0;
        let mut i = 0usize;
        for (node, w) in g.nodes().iter().zip(g.weights()) {
            while i < samples.len() && samples[i] < *node {
                i += 1;
            }
            let emp = i as f64 / samples.len() as f64;
            ks = ks.max((emp - cum).abs());
            cum += w;
            ks = ks.max((emp - cum).abs());
        }
        assert!(ks <= 2.0 / n as f64, "{ks}");
    }

    #[test]
    fn prior_entropy_scaling_and_zero_gain() {
        let a = build_grid(5.0, 100).unwrap();
        let b = build_grid(10.0, 100).unwrap();
        assert_abs_diff_eq!(b.prior_entropy_bits() - a.prior_entropy_bits(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prior_entropy_bits_analytic(10.0) - prior_entropy_bits_analytic(5.0), 1.0, epsilon = 1e-14);
        assert_eq!(a.info_gain_bits(a.weights()), 0.0);
        // grid entropy converges to the closed form
        let fine = build_grid(5.0, 20_000).unwrap();
        assert_abs_diff_eq!(fine.prior_entropy_bits(), prior_entropy_bits_analytic(5.0), epsilon = 1e-3);
    }

    #[test]
    fn empty_range_and_time_zero() {
        let grid = build_grid(10.0, 20).unwrap();
        let mut bank = ideal_bank(grid.clone(), 0.4, 1e-3);
        let rec = MeasurementRecord::new(1e-3, 100).unwrap();
        bank.advance(&rec, 0..0).unwrap();
        let p = bank.posterior().unwrap();
        assert_eq!(p.time, 0.0);
        assert_eq!(p.info_gain_bits, 0.0);
        for (a, b) in p.probabilities.iter().zip(grid.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert!(bank.advance(&rec, 5..10).is_err());
    }

    #[test]
    fn single_node_posterior_is_delta() {
        let grid = OmegaGrid::from_nodes(alloc::vec![3.0], alloc::vec![1.0]).unwrap();
        let mut bank = ideal_bank(grid, 0.4, 1e-3);
        let (rec, _) = crate::record::simulate_ideal_record(&SystemParams::with_omega(3.0), 20.0, 1e-3, 2).unwrap();
        bank.advance(&rec, 0..rec.n_steps()).unwrap();
        assert_eq!(bank.posterior().unwrap().probabilities, alloc::vec![1.0]);
    }

    #[test]
    fn impossible_record_is_reported() {
        // the undriven atom never emits, so a detection is impossible
        let grid = OmegaGrid::from_nodes(alloc::vec![0.0], alloc::vec![1.0]).unwrap();
        let cfg = BankConfig {
            scheme: StepScheme::Euler,
            ..BankConfig::new(DetectorModel::Ideal { eta: 1.0 }, OstensibleRate::new(0.5).unwrap(), 1e-3)
        };
        let mut bank = TrajectoryBank::new(grid, cfg).unwrap();
        bank.step(true);
        assert_eq!(bank.posterior(), Err(Error::ImpossibleRecord));
        assert_eq!(bank.best_state(), Err(Error::ImpossibleRecord));
    }

    #[test]
    fn symmetric_posterior_and_gain_under_relabeling() {
        let grid = build_grid(10.0, 40).unwrap();
        let (rec, _) = crate::record::simulate_ideal_record(&SystemParams::with_omega(4.0), 15.0, 1e-3, 31).unwrap();
        let mut bank = ideal_bank(grid.clone(), 16.0 / 33.0, 1e-3);
        bank.advance(&rec, 0..rec.n_steps()).unwrap();
        let p = bank.posterior().unwrap();
        assert_eq!(p.asymmetry(), 0.0);
        let mut flipped = p.probabilities.clone();
        flipped.reverse();
        assert_eq!(grid.info_gain_bits(&flipped), p.info_gain_bits);
        let ll = bank.log_likelihoods();
        for j in 0..20 {
            assert_eq!(ll[j], ll[39 - j]);
        }
    }

    #[test]
    fn epsilon_invariance_of_posterior() {
        let grid = build_grid(10.0, 30).unwrap();
        let det = DetectorParams::new(1.0, 7.0, 0.0, 0.0).unwrap();
        let recs = simulate_shared_records(&SystemParams::with_omega(4.0), 1.0, Some(&det), 10.0, 1e-3, 17, 0).unwrap();
        let aval = recs.avalanches.unwrap();
        let eps = ostensible_rate(4.0, 1.0, 1.0).unwrap().get();
        let run = |e: f64| {
            let cfg = BankConfig::new(DetectorModel::Realistic(det), OstensibleRate::new(e).unwrap(), 1e-3);
            let mut b = TrajectoryBank::new(grid.clone(), cfg).unwrap();
            b.advance(&aval, 0..aval.n_steps()).unwrap();
            b.posterior().unwrap()
        };
        let (a, b) = (run(eps), run(2.0 * eps));
        for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn two_node_posterior_matches_brute_force_likelihoods() {
        // independent route: likelihood of each candidate from the true
        // (unnormalized) binned probabilities, multiplied step by step
        let dt = 0.01;
        let (w1, w2) = (2.0, 5.0);
        let rec = MeasurementRecord::from_events(
            dt,
            400,
            [37u64, 102, 230, 260, 391].iter().map(|&s| Event { step: s, kind: EventKind::Detection }).collect(),
        )
        .unwrap();
        let lik = |w: f64| {
            let maps = ideal_bin_maps(&SystemParams::with_omega(w), 1.0, dt, StepScheme::Exact).unwrap();
            let mut v = AtomState::ground().to_array();
            let mut log_l = 0.0;
            for e in rec.increments() {
                v = maps.apply(&v, e);
                let t = v[0];
                log_l += libm::log(t);
                v.iter_mut().for_each(|x| *x /= t);
            }
            log_l
        };
        let (l1, l2) = (lik(w1), lik(w2));
        let want = 1.0 / (1.0 + libm::exp(l2 - l1));
        let grid = OmegaGrid::from_nodes(alloc::vec![w1, w2], alloc::vec![1.0, 1.0]).unwrap();
        let mut bank = ideal_bank(grid, 0.3, dt);
        bank.advance(&rec, 0..400).unwrap();
        let p = bank.posterior().unwrap();
        assert_abs_diff_eq!(p.probabilities[0], want, epsilon = 1e-12);
    }

    #[test]
    fn best_state_is_a_z_only_mixture() {
        let grid = build_grid(10.0, 40).unwrap();
        let (rec, _) = crate::record::simulate_ideal_record(&SystemParams::with_omega(4.0), 8.0, 1e-3, 3).unwrap();
        let mut bank = ideal_bank(grid, 0.5, 1e-3);
        run_with_snapshots(&mut bank, &rec, 500, |b| {
            let s = b.best_state()?;
            assert_eq!(s.x, 0.0);
            assert!(s.y.abs() < 1e-12, "{s:?}");
            assert_abs_diff_eq!(s.n, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.purity(), 0.5 * (1.0 + s.z * s.z), epsilon = 1e-12);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn known_magnitude_bank_is_equal_mixture() {
        let w = 4.0;
        let grid = OmegaGrid::from_nodes(alloc::vec![-w, w], alloc::vec![1.0, 1.0]).unwrap();
        let (rec, _) = crate::record::simulate_ideal_record(&SystemParams::with_omega(w), 6.0, 1e-3, 8).unwrap();
        let mut bank = ideal_bank(grid, 0.5, 1e-3);
        bank.advance(&rec, 0..rec.n_steps()).unwrap();
        let (a, b) = (bank.node_state(0), bank.node_state(1));
        assert_eq!(a.z, b.z);
        assert_eq!(a.y, -b.y);
        let mix = a.add(&b).scaled(0.5);
        assert!(bank.best_state().unwrap().max_abs_diff(&mix) < 1e-12);
    }

    #[test]
    fn realistic_bank_renormalizes_and_stays_symmetric() {
        let grid = build_grid(10.0, 20).unwrap();
        let det = DetectorParams::new(1.0, 7.0, 0.0, 0.0).unwrap();
        let recs = simulate_shared_records(&SystemParams::with_omega(4.0), 1.0, Some(&det), 30.0, 1e-3, 3, 1).unwrap();
        let aval = recs.avalanches.unwrap();
        assert!(aval.len() > 5);
        let cfg = BankConfig::new(DetectorModel::Realistic(det), ostensible_rate(4.0, 1.0, 1.0).unwrap(), 1e-3);
        let mut bank = TrajectoryBank::new(grid, cfg).unwrap();
        bank.advance(&aval, 0..aval.n_steps()).unwrap();
        let p = bank.posterior().unwrap();
        assert_eq!(p.asymmetry(), 0.0);
        assert_abs_diff_eq!(p.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let s = bank.best_state().unwrap();
        assert!(s.is_positive());
    }

    #[test]
    fn dead_time_bank_rejects_avalanche_during_reset() {
        let det = DetectorParams::new(1.0, 7.0, 0.0, 0.05).unwrap();
        let grid = build_grid(6.0, 4).unwrap();
        let cfg = BankConfig::new(DetectorModel::Realistic(det), OstensibleRate::new(0.4).unwrap(), 1e-3);
        let mut bank = TrajectoryBank::new(grid, cfg).unwrap();
        let rec = MeasurementRecord::from_events(
            1e-3,
            3000,
            [1500u64, 1520].iter().map(|&s| Event { step: s, kind: EventKind::Avalanche }).collect(),
        )
        .unwrap();
        bank.advance(&rec, 0..3000).unwrap();
        assert_eq!(bank.posterior(), Err(Error::ImpossibleRecord));
    }

    #[test]
    fn ensemble_starts_at_zero_gain() {
        let cfg = InfoGainConfig {
            omega_max: 5.0,
            n_nodes: 10,
            gamma: 1.0,
            dt: 1e-3,
            duration: 2.0,
            snapshot_every: 0.5,
            model: DetectorModel::Ideal { eta: 1.0 },
            scheme: StepScheme::Exact,
            ensemble_size: 3,
            master_seed: 9,
        };
        let curve = info_gain_ensemble(&cfg).unwrap();
        assert_eq!(curve.time, alloc::vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(curve.mean_bits[0], 0.0);
        assert_eq!(curve.stderr_bits[0], 0.0);
        assert!(info_gain_ensemble(&InfoGainConfig { ensemble_size: 1, ..cfg }).is_err());
    }
}
