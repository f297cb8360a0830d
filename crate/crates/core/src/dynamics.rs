//! Two-level atom state and the resonant-drive master equation
//! `dρ/dt = -(iΩ/2)[σx, ρ] + Γ D[σ]ρ`.

use alloc::vec::Vec;

use crate::linalg::{rk4_step, Matrix};
use crate::{Error, Result};

/// Default integration step, in units of 1/Γ.
pub const DEFAULT_DT: f64 = 1e-4;

/// Relative tolerance on `|r| ≤ n` before a state is declared unphysical.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// A (possibly unnormalized) 2×2 density operator `(n·I + x·σx + y·σy + z·σz)/2`.
///
/// `n` is the trace. The excited population is `(n + z)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtomState {
    pub n: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AtomState {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(n: f64, x: f64, y: f64, z: f64) -> Self {
        Self { n, x, y, z }
    }

    pub const fn ground() -> Self {
        Self::new(1.0, 0.0, 0.0, -1.0)
    }

    pub const fn excited() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.n, self.x, self.y, self.z]
    }

    pub fn trace(&self) -> f64 {
        self.n
    }

    pub fn excited_population(&self) -> f64 {
        0.5 * (self.n + self.z)
    }

    pub fn bloch_norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// Amount by which the Bloch vector exceeds the trace (positive means
    /// unphysical).
    pub fn positivity_excess(&self) -> f64 {
        libm::sqrt(self.bloch_norm_sq()) - self.n
    }

    pub fn is_positive(&self) -> bool {
        self.n >= 0.0 && self.positivity_excess() <= POSITIVITY_TOL * self.n.max(f64::MIN_POSITIVE)
    }

    /// Divides by the trace. A zero operator stays zero.
    pub fn normalized(&self) -> Self {
        if self.n == 0.0 {
            return *self;
        }
        self.scaled(1.0 / self.n)
    }

    /// Purity `Tr[ρ²] = (1 + |r|²)/2` of the normalized state.
    pub fn purity(&self) -> f64 {
        let s = self.normalized();
        0.5 * (1.0 + s.bloch_norm_sq())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.n * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.n + o.n, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let a = self.to_array();
        let b = o.to_array();
        a.iter().zip(b.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }
}

/// Rabi frequency Ω (may be negative) and spontaneous emission rate Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega: f64,
    pub gamma: f64,
}

impl SystemParams {
    pub fn new(omega: f64, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter { name: "gamma", reason: "must be finite and > 0" });
        }
        if !omega.is_finite() {
            return Err(Error::InvalidParameter { name: "omega", reason: "must be finite" });
        }
        Ok(Self { omega, gamma })
    }

    /// Γ = 1 units.
    pub fn with_omega(omega: f64) -> Self {
        Self { omega, gamma: 1.0 }
    }

    /// Mean steady-state photon flux `ΓΩ²/(2Ω² + Γ²)`.
    pub fn steady_state_flux(&self) -> f64 {
        let (w2, g) = (self.omega * self.omega, self.gamma);
        g * w2 / (2.0 * w2 + g * g)
    }
}

/// Time derivative of the Bloch components under the master equation.
pub fn lindblad_rhs(s: &AtomState, p: &SystemParams) -> AtomState {
    let (w, g) = (p.omega, p.gamma);
    AtomState { n: 0.0, x: -0.5 * g * s.x, y: -0.5 * g * s.y - w * s.z, z: w * s.y - g * (s.n + s.z) }
}

/// `J[σ]ρ = σρσ†`: the excited population collapsed onto the ground state.
pub fn apply_jump(s: &AtomState) -> AtomState {
    let pe = s.excited_population();
    AtomState::new(pe, 0.0, 0.0, -pe)
}

/// Matrix of the master-equation generator on `(n, x, y, z)`.
pub fn generator_matrix(p: &SystemParams) -> Matrix<4> {
    let (w, g) = (p.omega, p.gamma);
    Matrix([[0.0, 0.0, 0.0, 0.0], [0.0, -0.5 * g, 0.0, 0.0], [0.0, 0.0, -0.5 * g, -w], [-g, 0.0, w, -g]])
}

/// Matrix of the jump superoperator `J[σ]` on `(n, x, y, z)`.
pub fn jump_matrix() -> Matrix<4> {
    Matrix([[0.5, 0.0, 0.0, 0.5], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [-0.5, 0.0, 0.0, -0.5]])
}

fn check_step(dt_step: f64) -> Result<()> {
    if !(dt_step.is_finite() && dt_step > 0.0) {
        return Err(Error::NonPositiveStep(dt_step));
    }
    Ok(())
}

fn check_positive(s: &AtomState, t: f64) -> Result<()> {
    let excess = s.positivity_excess();
    if s.n < 0.0 || excess > POSITIVITY_TOL * s.n.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::PositivityViolation { time: t, excess });
    }
    Ok(())
}

/// Fixed-step RK4 integration of the master equation.
///
/// Returns the states at `t = 0, dt, 2dt, …` and finally at `duration`
/// (the last step is shortened when `duration` is not a multiple of
/// `dt_step`).
pub fn evolve_me(state: AtomState, params: &SystemParams, dt_step: f64, duration: f64) -> Result<Vec<AtomState>> {
    check_step(dt_step)?;
    if duration.is_nan() || duration < 0.0 {
        return Err(Error::InvalidParameter { name: "duration", reason: "must be >= 0" });
    }
    let full = libm::floor(duration / dt_step + 1e-9) as usize;
    let rest = duration - full as f64 * dt_step;
    let mut out = Vec::with_capacity(full + 2);
    let mut v = state.to_array();
    let f = |v: &[f64; 4]| lindblad_rhs(&AtomState::from_array(*v), params).to_array();
    out.push(state);
    for k in 0..full {
        v = rk4_step(&v, dt_step, f);
        let s = AtomState::from_array(v);
        check_positive(&s, (k + 1) as f64 * dt_step)?;
        out.push(s);
    }
    if rest > 1e-12 * dt_step {
        v = rk4_step(&v, rest, f);
        let s = AtomState::from_array(v);
        check_positive(&s, duration)?;
        out.push(s);
    }
    Ok(out)
}

/// Final state only; see [`evolve_me`].
pub fn evolve_me_final(state: AtomState, params: &SystemParams, dt_step: f64, duration: f64) -> Result<AtomState> {
    evolve_me(state, params, dt_step, duration).map(|v| *v.last().expect("non-empty"))
}

/// Normalized fixed point of the master equation.
pub fn steady_state(p: &SystemParams) -> AtomState {
    let (w, g) = (p.omega, p.gamma);
    let d = 2.0 * w * w + g * g;
    AtomState::new(1.0, 0.0, 2.0 * w * g / d, -g * g / d)
}
