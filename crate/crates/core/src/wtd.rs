//! Waiting-time distributions between detections (ideal, inefficient) and
//! between avalanches (finite-bandwidth photodiode).

use alloc::vec::Vec;

use crate::dynamics::{evolve_me_final, AtomState, SystemParams, DEFAULT_DT};
use crate::linalg::{rk4_step, Matrix};
use crate::supersystem::DetectorParams;
use crate::{Error, Result};

/// Densities below this are clipped to zero and flagged.
pub const NEGATIVE_TOL: f64 = 1e-12;

/// Tail weight at which the renewal series is truncated.
pub const SERIES_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeCurve {
    pub tau: Vec<f64>,
    pub density: Vec<f64>,
    /// Set when some density fell below `-NEGATIVE_TOL` and was clipped.
    pub clipped: bool,
}

impl WaitingTimeCurve {
    fn from_raw(tau: Vec<f64>, mut density: Vec<f64>) -> Self {
        let mut clipped = false;
        for d in density.iter_mut() {
            if *d < -NEGATIVE_TOL {
                clipped = true;
            }
            if *d < 0.0 {
                *d = 0.0;
            }
        }
        Self { tau, density, clipped }
    }

    /// Trapezoid integral over the sampled window.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.tau, &self.density)
    }

    pub fn peak(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    /// `(first peak − following trough) / first peak`, or `None` if the
    /// curve has no interior local maximum followed by a minimum.
    pub fn first_contrast(&self) -> Option<f64> {
        let d = &self.density;
        let peak = (1..d.len().saturating_sub(1)).find(|&i| d[i] >= d[i - 1] && d[i] > d[i + 1])?;
        let trough = (peak + 1..d.len() - 1).find(|&i| d[i] <= d[i - 1] && d[i] < d[i + 1])?;
        Some((d[peak] - d[trough]) / d[peak])
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Whether the ideal waiting time oscillates (`Ω > Γ/2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Oscillatory,
    Critical,
    Overdamped,
}

pub fn wtd_regime(omega: f64, gamma: f64) -> Regime {
    let d = omega * omega - 0.25 * gamma * gamma;
    if d > 0.0 {
        Regime::Oscillatory
    } else if d == 0.0 {
        Regime::Critical
    } else {
        Regime::Overdamped
    }
}

/// Ideal-detector waiting-time density
/// `w(τ) = Γ · Ω²/(Ω² − Γ²/4) · e^{−Γτ/2} · sin²(½√(Ω² − Γ²/4) τ)`.
///
/// For `|Ω| ≤ Γ/2` the analytic continuation (`sin → sinh`, or the
/// `Ω²τ²/4` limit at the critical point) is returned; see [`wtd_regime`].
pub fn ideal_wtd(omega: f64, gamma: f64, tau: f64) -> f64 {
    let w2 = omega * omega;
    let d = w2 - 0.25 * gamma * gamma;
    let decay = libm::exp(-0.5 * gamma * tau);
    match wtd_regime(omega, gamma) {
        Regime::Oscillatory => {
            let s = libm::sin(0.5 * libm::sqrt(d) * tau);
            gamma * w2 / d * decay * s * s
        }
        Regime::Critical => gamma * w2 * 0.25 * tau * tau * decay,
        Regime::Overdamped => {
            let k = libm::sqrt(-d);
            let s = libm::sinh(0.5 * k * tau);
            gamma * w2 / (k * k) * decay * s * s
        }
    }
}

pub fn ideal_wtd_curve(omega: f64, gamma: f64, tau_grid: &[f64]) -> WaitingTimeCurve {
    WaitingTimeCurve::from_raw(tau_grid.to_vec(), tau_grid.iter().map(|&t| ideal_wtd(omega, gamma, t)).collect())
}

/// Atom state averaged over an Exponential(γ_r) avalanche maturation time,
/// starting from the ground state: `(y, z)` with `x = 0`, Γ = 1.
///
/// For general Γ pass `Ω/Γ` and `γ_r/Γ`.
pub fn avalanche_initial_state(omega: f64, gamma_r: f64) -> (f64, f64) {
    let g = gamma_r;
    let d = 1.0 + 3.0 * g + 2.0 * g * g + 2.0 * omega * omega;
    (2.0 * omega * (1.0 + g) / d, -(2.0 * g + 1.0) * (1.0 + g) / d)
}

/// Detector-resolved atom components and occupations during the
/// no-avalanche evolution: `ρ̃₀ = (P₀ I + y₀σy + z₀σz)/2`, likewise for
/// `ρ̃₁`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[allow(non_snake_case)]
pub struct SixVector {
    pub y0: f64,
    pub z0: f64,
    pub P0: f64,
    pub y1: f64,
    pub z1: f64,
    pub P1: f64,
}

impl SixVector {
    /// Component order used by [`avalanche_matrix`]: `(y0, y1, z0, z1, P0, P1)`.
    pub fn to_matrix_basis(&self) -> [f64; 6] {
        [self.y0, self.y1, self.z0, self.z1, self.P0, self.P1]
    }

    pub fn from_matrix_basis(v: &[f64; 6]) -> Self {
        Self { y0: v[0], y1: v[1], z0: v[2], z1: v[3], P0: v[4], P1: v[5] }
    }
}

/// The 6×6 no-avalanche generator (Γ = 1, γ_dk = 0), entries as published.
///
/// The published rows only reproduce the supersystem equations when the
/// vector is ordered `(y0, y1, z0, z1, P0, P1)`; see
/// [`SixVector::to_matrix_basis`].
pub fn avalanche_matrix(omega: f64, gamma_r: f64, eta: f64) -> Matrix<6> {
    let (w, g, h) = (omega, gamma_r, 0.5 * eta);
    Matrix([
        [-0.5, 0.0, -w, 0.0, 0.0, 0.0],
        [0.0, -0.5 - g, 0.0, -w, 0.0, 0.0],
        [w, 0.0, -1.0 + h, 0.0, -1.0 + h, 0.0],
        [0.0, w, -h, -1.0 - g, -h, -1.0],
        [0.0, 0.0, -h, 0.0, -h, 0.0],
        [0.0, 0.0, h, 0.0, h, -g],
    ])
}

fn check_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.iter().any(|t| t.is_nan() || *t < 0.0) || tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "tau_grid", reason: "must be increasing and >= 0" });
    }
    Ok(())
}

/// Integrates `dv/dτ = M v` with RK4 (step ≤ `max_step`) and samples
/// `read(v)` on the grid, starting from `v` at `tau0`; grid points before
/// `tau0` read 0.
fn sample_linear<const N: usize>(
    m: &Matrix<N>,
    mut v: [f64; N],
    tau0: f64,
    tau_grid: &[f64],
    max_step: f64,
    read: impl Fn(&[f64; N]) -> f64,
) -> Vec<f64> {
    let mut t = tau0;
    tau_grid
        .iter()
        .map(|&target| {
            if target < tau0 {
                return 0.0;
            }
            let span = target - t;
            if span > 0.0 {
                let steps = libm::ceil(span / max_step - 1e-9).max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    v = rk4_step(&v, h, |x| m.apply(x));
                }
                t = target;
            }
            read(&v)
        })
        .collect()
}

/// Avalanche-to-avalanche waiting time `γ_r P̃₁(τ)` from the 6-variable
/// no-avalanche evolution (Γ = 1).
///
/// The post-avalanche atom state is [`avalanche_initial_state`], evolved
/// under the master equation through the dead time before the detector is
/// ready; the density is zero for `τ < τ_dd`.
pub fn realistic_wtd(omega: f64, det: &DetectorParams, tau_grid: &[f64]) -> Result<WaitingTimeCurve> {
    if det.gamma_dk != 0.0 {
        return Err(Error::DarkCountsUnsupported);
    }
    check_grid(tau_grid)?;
    let (y, z) = avalanche_initial_state(omega, det.gamma_r);
    let mut start = AtomState::new(1.0, 0.0, y, z);
    if det.tau_dd > 0.0 {
        start = evolve_me_final(start, &SystemParams::with_omega(omega), DEFAULT_DT, det.tau_dd)?;
    }
    let init = SixVector { y0: start.y, z0: start.z, P0: start.n, ..Default::default() };
    let a = avalanche_matrix(omega, det.gamma_r, det.eta);
    let g = det.gamma_r;
    let density = sample_linear(&a, init.to_matrix_basis(), det.tau_dd, tau_grid, DEFAULT_DT, |v| g * v[5]);
    Ok(WaitingTimeCurve::from_raw(tau_grid.to_vec(), density))
}

/// Window `max(10/Γ, 20/η · mean wait)` beyond which the inefficient
/// waiting time carries less than ~1e-4 of its mass.
pub fn inefficient_wtd_window(omega: f64, gamma: f64, eta: f64) -> f64 {
    let flux = SystemParams { omega, gamma }.steady_state_flux();
    let mean_wait = if flux > 0.0 { 1.0 / flux } else { f64::INFINITY };
    (10.0 / gamma).max(20.0 / eta * mean_wait)
}

/// Waiting time between detections for efficiency `eta`, from the renewal
/// series `Σ_{n≥0} η(1−η)ⁿ w^{*(n+1)}` over the ideal density.
///
/// Every emission, detected or not, leaves the atom in the ground state, so
/// emissions form a renewal process and a detection wait is a geometric sum
/// of ideal waits. Convolutions use the trapezoid rule on an internal
/// uniform grid (step at most `0.01/Γ` and 1/100 of an oscillation period),
/// then the result is linearly interpolated onto `tau_grid`.
pub fn inefficient_wtd(omega: f64, gamma: f64, eta: f64, tau_grid: &[f64]) -> Result<WaitingTimeCurve> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter { name: "eta", reason: "must lie in (0, 1]" });
    }
    check_grid(tau_grid)?;
    if eta == 1.0 {
        return Ok(ideal_wtd_curve(omega, gamma, tau_grid));
    }
    let t_max = tau_grid.last().copied().unwrap_or(0.0);
    let d = libm::fabs(omega * omega - 0.25 * gamma * gamma);
    let mut h = 0.01 / gamma;
    if d > 0.0 {
        h = h.min(2.0 * core::f64::consts::PI / libm::sqrt(d) / 100.0);
    }
    let m = libm::ceil(t_max / h) as usize + 1;
    let h = if m > 1 { t_max / (m - 1) as f64 } else { h };
    let base: Vec<f64> = (0..m).map(|k| ideal_wtd(omega, gamma, k as f64 * h)).collect();

    let mut total: Vec<f64> = base.iter().map(|w| eta * w).collect();
    let mut power = base.clone();
    let mut weight = eta;
    let mut tail = 1.0 - eta;
    while tail >= SERIES_TAIL {
        power = convolve(&power, &base, h);
        weight *= 1.0 - eta;
        tail *= 1.0 - eta;
        for (t, p) in total.iter_mut().zip(power.iter()) {
            *t += weight * p;
        }
    }
    let density = tau_grid.iter().map(|&t| interpolate(&total, h, t)).collect();
    Ok(WaitingTimeCurve::from_raw(tau_grid.to_vec(), density))
}

fn convolve(f: &[f64], g: &[f64], h: f64) -> Vec<f64> {
    (0..f.len())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let mut s = 0.5 * (f[0] * g[k] + f[k] * g[0]);
            for j in 1..k {
                s += f[j] * g[k - j];
            }
            s * h
        })
        .collect()
}

fn interpolate(v: &[f64], h: f64, t: f64) -> f64 {
    if v.len() == 1 {
        return v[0];
    }
    let x = t / h;
    let i = (libm::floor(x) as usize).min(v.len() - 2);
    let f = x - i as f64;
    v[i] * (1.0 - f) + v[i + 1] * f
}

/// Uniform grid `0, step, …` up to and including `t_max`.
pub fn uniform_grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = libm::round(t_max / step) as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}
