//! Linear quantum trajectories for ideal photon counting and for the
//! atom ⊗ avalanche-photodiode supersystem.
//!
//! The detector microstate is `s = 0` (ready), `1` (avalanching) or `2`
//! (resetting). Each record bin carries an increment `dN ∈ {0, 1}` with
//! ostensible probabilities `Λ(1) = ε·dt`, `Λ(0) = 1 − ε·dt`; the state is
//! divided by `Λ(dN)` after every bin so that
//! `P(record | Ω) = Λ(record) · Σ_s Tr[ρ̄_s]`.

use crate::dynamics::{apply_jump, generator_matrix, jump_matrix, lindblad_rhs, AtomState, SystemParams};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Ostensible rate used when the steady-state flux would vanish, in units
/// of Γ.
pub const EPSILON_FLOOR: f64 = 0.05;

/// Quantum efficiency η, bandwidth γ_r, dark-count rate γ_dk, dead time τ_dd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub eta: f64,
    pub gamma_r: f64,
    pub gamma_dk: f64,
    pub tau_dd: f64,
}

impl DetectorParams {
    pub fn new(eta: f64, gamma_r: f64, gamma_dk: f64, tau_dd: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter { name: "eta", reason: "must lie in [0, 1]" });
        }
        if !(gamma_r.is_finite() && gamma_r > 0.0) {
            return Err(Error::InvalidParameter { name: "gamma_r", reason: "must be finite and > 0" });
        }
        if !(gamma_dk.is_finite() && gamma_dk >= 0.0) {
            return Err(Error::InvalidParameter { name: "gamma_dk", reason: "must be finite and >= 0" });
        }
        if !(tau_dd.is_finite() && tau_dd >= 0.0) {
            return Err(Error::InvalidParameter { name: "tau_dd", reason: "must be finite and >= 0" });
        }
        Ok(Self { eta, gamma_r, gamma_dk, tau_dd })
    }

    /// Dead time in whole record steps.
    pub fn dead_steps(&self, dt: f64) -> usize {
        libm::round(self.tau_dd / dt) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OstensibleRate(f64);

impl OstensibleRate {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::ZeroOstensibleRate);
        }
        Ok(Self(epsilon))
    }

    pub fn floor(gamma: f64) -> Self {
        Self(EPSILON_FLOOR * gamma)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    fn check(self, dt: f64) -> Result<()> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::NonPositiveStep(dt));
        }
        let p = self.0 * dt;
        if p >= 1.0 {
            return Err(Error::OstensibleTooLarge(p));
        }
        Ok(())
    }

    /// `Λ(dN)` for one bin.
    pub fn lambda(self, event: bool, dt: f64) -> f64 {
        if event {
            self.0 * dt
        } else {
            1.0 - self.0 * dt
        }
    }
}

/// Steady-state detection rate `η·ΓΩ²/(2Ω² + Γ²)` used as ε.
pub fn ostensible_rate(omega_true: f64, gamma: f64, eta: f64) -> Result<OstensibleRate> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidParameter { name: "gamma", reason: "must be > 0" });
    }
    let w2 = omega_true * omega_true;
    OstensibleRate::new(eta * gamma * w2 / (2.0 * w2 + gamma * gamma))
}

/// Like [`ostensible_rate`] but substitutes [`OstensibleRate::floor`] when
/// the rate vanishes.
pub fn ostensible_rate_or_floor(omega_true: f64, gamma: f64, eta: f64) -> Result<OstensibleRate> {
    match ostensible_rate(omega_true, gamma, eta) {
        Err(Error::ZeroOstensibleRate) => Ok(OstensibleRate::floor(gamma)),
        r => r,
    }
}

/// Atom states conditioned on the detector microstate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupersystemState {
    pub rho0: AtomState,
    pub rho1: AtomState,
    pub rho2: AtomState,
}

impl SupersystemState {
    /// Atom in `rho`, detector ready.
    pub fn ready(rho: AtomState) -> Self {
        Self { rho0: rho, ..Self::default() }
    }

    pub fn to_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0..4].copy_from_slice(&self.rho0.to_array());
        out[4..8].copy_from_slice(&self.rho1.to_array());
        out[8..12].copy_from_slice(&self.rho2.to_array());
        out
    }

    pub fn from_array(a: &[f64; 12]) -> Self {
        Self {
            rho0: AtomState::new(a[0], a[1], a[2], a[3]),
            rho1: AtomState::new(a[4], a[5], a[6], a[7]),
            rho2: AtomState::new(a[8], a[9], a[10], a[11]),
        }
    }

    pub fn total_trace(&self) -> f64 {
        self.rho0.n + self.rho1.n + self.rho2.n
    }
}

/// Atom state summed over detector microstates.
pub fn total_state(s: &SupersystemState) -> AtomState {
    s.rho0.add(&s.rho1).add(&s.rho2)
}

/// One Itô–Euler step of the ideal (possibly inefficient) linear trajectory.
///
/// No detection: `ρ̄ ← [ρ̄ + dt(L − ηΓJ)ρ̄] / (1 − ε dt)`.
/// Detection: `ρ̄ ← ηΓ J[σ]ρ̄ / ε`.
pub fn linear_step_ideal(
    rho: &AtomState,
    params: &SystemParams,
    eta: f64,
    eps: OstensibleRate,
    detection: bool,
    dt: f64,
) -> Result<AtomState> {
    eps.check(dt)?;
    let k = eta * params.gamma;
    if detection {
        return Ok(apply_jump(rho).scaled(k / eps.get()));
    }
    let d = lindblad_rhs(rho, params).add(&apply_jump(rho).scaled(-k));
    Ok(rho.add(&d.scaled(dt)).scaled(1.0 / eps.lambda(false, dt)))
}

/// One Itô–Euler step of the supersystem.
///
/// `avalanche` is the record increment of this bin and `reset` the
/// increment `d` steps earlier (the end of the dead time). On an avalanche
/// the ready and avalanching components are discarded and the resetting
/// component becomes `γ_r ρ̄₁ / ε`; on a reset the resetting component
/// returns to ready.
pub fn linear_step_realistic(
    s: &SupersystemState,
    params: &SystemParams,
    det: &DetectorParams,
    eps: OstensibleRate,
    avalanche: bool,
    reset: bool,
    dt: f64,
) -> Result<SupersystemState> {
    eps.check(dt)?;
    let k = det.eta * params.gamma;
    let mut out = if avalanche {
        SupersystemState { rho0: AtomState::ZERO, rho1: AtomState::ZERO, rho2: s.rho1.scaled(det.gamma_r / eps.get()) }
    } else {
        let norm = 1.0 / eps.lambda(false, dt);
        let feed = apply_jump(&s.rho0).scaled(k).add(&s.rho0.scaled(det.gamma_dk));
        let d0 = lindblad_rhs(&s.rho0, params).add(&s.rho0.scaled(-det.gamma_dk)).add(&apply_jump(&s.rho0).scaled(-k));
        let d1 = lindblad_rhs(&s.rho1, params).add(&s.rho1.scaled(-det.gamma_r)).add(&feed);
        let d2 = lindblad_rhs(&s.rho2, params);
        SupersystemState {
            rho0: s.rho0.add(&d0.scaled(dt)).scaled(norm),
            rho1: s.rho1.add(&d1.scaled(dt)).scaled(norm),
            rho2: s.rho2.add(&d2.scaled(dt)).scaled(norm),
        }
    };
    if reset {
        out.rho0 = out.rho0.add(&out.rho2);
        out.rho2 = AtomState::ZERO;
    }
    Ok(out)
}

/// How the per-bin maps are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepScheme {
    /// Exact propagators of the binned record: `E0 = exp(dt·G0)` (no event
    /// in the bin) and `E1 = exp(dt·G) − E0` (at least one event).
    #[default]
    Exact,
    /// First-order Itô–Euler increments (`I + dt·G0`, `dt·(G − G0)`).
    Euler,
}

/// Maps applied to the state for a bin without / with a record event.
///
/// As built by [`ideal_bin_maps`] and [`realistic_bin_maps`] they carry true
/// probabilities (`Tr[E0 ρ] + Tr[E1 ρ] = Tr ρ`); [`BinMaps::with_ostensible`]
/// divides them by `Λ(0)` and `Λ(1)` for linear trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinMaps<const N: usize> {
    pub no_event: Matrix<N>,
    pub event: Matrix<N>,
}

impl<const N: usize> BinMaps<N> {
    pub fn with_ostensible(&self, eps: OstensibleRate, dt: f64) -> Result<Self> {
        eps.check(dt)?;
        Ok(Self {
            no_event: self.no_event.scale(1.0 / eps.lambda(false, dt)),
            event: self.event.scale(1.0 / eps.lambda(true, dt)),
        })
    }

    #[inline]
    pub fn apply(&self, v: &[f64; N], event: bool) -> [f64; N] {
        if event {
            self.event.apply(v)
        } else {
            self.no_event.apply(v)
        }
    }
}

/// `(exp(dt·full) − exp(dt·quiet), exp(dt·quiet))` via the block identity
/// `exp([[F, J], [0, Q]]) = [[e^F, ∫e^{(1−s)F} J e^{sQ} ds], [0, e^Q]]`
/// with `J = F − Q`. `M` must equal `2N`.
fn split_exponential<const N: usize, const M: usize>(full: &Matrix<N>, quiet: &Matrix<N>, dt: f64) -> (Matrix<N>, Matrix<N>) {
    assert_eq!(M, 2 * N);
    let jump = *full - *quiet;
    let mut block = Matrix::<M>::zero();
    for i in 0..N {
        for j in 0..N {
            block.0[i][j] = dt * full.0[i][j];
            block.0[i][N + j] = dt * jump.0[i][j];
            block.0[N + i][N + j] = dt * quiet.0[i][j];
        }
    }
    let e = block.expm();
    let mut event = Matrix::<N>::zero();
    let mut no_event = Matrix::<N>::zero();
    for i in 0..N {
        for j in 0..N {
            event.0[i][j] = e.0[i][N + j];
            no_event.0[i][j] = e.0[N + i][N + j];
        }
    }
    (event, no_event)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    Ok(())
}

/// Bin maps for an ideal detector of efficiency `eta` on `(n, x, y, z)`.
pub fn ideal_bin_maps(params: &SystemParams, eta: f64, dt: f64, scheme: StepScheme) -> Result<BinMaps<4>> {
    check_dt(dt)?;
    let full = generator_matrix(params);
    let detect = jump_matrix().scale(eta * params.gamma);
    let quiet = full - detect;
    let (event, no_event) = match scheme {
        StepScheme::Exact => split_exponential::<4, 8>(&full, &quiet, dt),
        StepScheme::Euler => (detect.scale(dt), Matrix::identity() + quiet.scale(dt)),
    };
    Ok(BinMaps { no_event, event })
}

/// Generators of the supersystem on `(ρ̄₀, ρ̄₁, ρ̄₂)` stacked as a 12-vector:
/// `(full, quiet)` where `quiet` has no avalanche and `full` adds the
/// avalanche transfer `γ_r ρ̄₁ → ρ̄₂`.
pub fn supersystem_generators(params: &SystemParams, det: &DetectorParams) -> (Matrix<12>, Matrix<12>) {
    let l = generator_matrix(params);
    let j = jump_matrix().scale(det.eta * params.gamma);
    let id = Matrix::<4>::identity();
    let b00 = l - id.scale(det.gamma_dk) - j;
    let b10 = j + id.scale(det.gamma_dk);
    let b11 = l - id.scale(det.gamma_r);
    let mut quiet = Matrix::<12>::zero();
    let put = |m: &mut Matrix<12>, bi: usize, bj: usize, b: &Matrix<4>| {
        for i in 0..4 {
            for k in 0..4 {
                m.0[4 * bi + i][4 * bj + k] = b.0[i][k];
            }
        }
    };
    put(&mut quiet, 0, 0, &b00);
    put(&mut quiet, 1, 0, &b10);
    put(&mut quiet, 1, 1, &b11);
    put(&mut quiet, 2, 2, &l);
    let mut full = quiet;
    put(&mut full, 2, 1, &id.scale(det.gamma_r));
    (full, quiet)
}

/// Bin maps for the realistic detector supersystem.
pub fn realistic_bin_maps(params: &SystemParams, det: &DetectorParams, dt: f64, scheme: StepScheme) -> Result<BinMaps<12>> {
    check_dt(dt)?;
    let (full, quiet) = supersystem_generators(params, det);
    let (event, no_event) = match scheme {
        StepScheme::Exact => split_exponential::<12, 24>(&full, &quiet, dt),
        StepScheme::Euler => ((full - quiet).scale(dt), Matrix::identity() + quiet.scale(dt)),
    };
    Ok(BinMaps { no_event, event })
}

/// End of dead time: the resetting component returns to ready.
#[inline]
pub fn reset_detector(v: &mut [f64; 12]) {
    for i in 0..4 {
        v[i] += v[8 + i];
        v[8 + i] = 0.0;
    }
}
