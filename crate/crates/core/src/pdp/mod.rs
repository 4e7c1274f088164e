//! Piecewise deterministic jump processes in the single and doubled spaces.

mod rng;
mod walker;

pub use rng::RngStream;
pub(crate) use walker::Walker;
pub use walker::{locate_jump_time, JumpEvent, JUMP_TIME_RTOL};

use crate::linalg::{norm_sqr, CVector};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Default integration timestep in units of `1/γ`.
pub const DEFAULT_DT: f64 = 1e-3;

/// Recorded single-space realization: normalized states on the output grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub jump_log: Vec<JumpEvent>,
    /// Jumps located with zero total rate (roundoff), skipped.
    pub underflows: usize,
}

/// A doubled-space point `θ = (φ, ψ)/√c`, stored jointly normalized together
/// with the weight `c` carried by the estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedState {
    pub phi: CVector,
    pub psi: CVector,
    pub weight_c: f64,
}

impl PairedState {
    pub fn new(phi: &CVector, psi: &CVector) -> Result<Self> {
        if phi.dim() != psi.dim() {
            return Err(Error::Dimension {
                op: "paired state",
                expected: phi.dim(),
                found: psi.dim(),
            });
        }
        let c = phi.norm_sqr() + psi.norm_sqr();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("paired state", "both components vanish"));
        }
        let s = 1.0 / c.sqrt();
        Ok(Self {
            phi: phi.scale(s.into()),
            psi: psi.scale(s.into()),
            weight_c: c,
        })
    }

    /// The unnormalized matrix element `c·<φ|X|ψ>` this pair represents.
    pub fn matrix_element(&self, x: &crate::linalg::CMatrix) -> crate::C64 {
        x.sandwich(&self.phi, &self.psi) * self.weight_c
    }
}

/// Recorded doubled-space realization.
#[derive(Clone, Debug)]
pub struct PairTrajectory {
    pub times: Vec<f64>,
    pub pairs: Vec<PairedState>,
    pub jump_log: Vec<JumpEvent>,
    pub underflows: usize,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("time grid", "must not be empty"));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("time grid", "must be finite and nondecreasing"));
    }
    Ok(())
}

/// Samples one single-space trajectory starting at `grid[0]` and records the
/// normalized state at every grid time.
pub fn evolve_single(
    model: &ModelSpec,
    psi0: &CVector,
    grid: &[f64],
    rng: &mut RngStream,
    dt: f64,
) -> Result<Trajectory> {
    check_grid(grid)?;
    let mut w = Walker::single(model, psi0.as_slice(), grid[0], dt, rng)?;
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        w.advance_to(t, rng)?;
        states.push(CVector::from_vec_unchecked(w.snapshot()));
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        jump_log: w.jumps().to_vec(),
        underflows: w.underflows(),
    })
}

/// Samples one doubled-space trajectory. Every block follows the same
/// effective Hamiltonian and the same jump operator; jump times and channels
/// are drawn from the joint norm of the pair.
pub fn evolve_doubled(
    model: &ModelSpec,
    theta0: &PairedState,
    grid: &[f64],
    rng: &mut RngStream,
    dt: f64,
) -> Result<PairTrajectory> {
    check_grid(grid)?;
    let mut w = Walker::pair(model, theta0.phi.as_slice(), theta0.psi.as_slice(), grid[0], dt, rng)?;
    let d = model.dim();
    let mut pairs = Vec::with_capacity(grid.len());
    for &t in grid {
        w.advance_to(t, rng)?;
        let s = w.snapshot();
        pairs.push(PairedState {
            phi: CVector::from_vec_unchecked(s[..d].to_vec()),
            psi: CVector::from_vec_unchecked(s[d..].to_vec()),
            weight_c: theta0.weight_c,
        });
    }
    Ok(PairTrajectory {
        times: grid.to_vec(),
        pairs,
        jump_log: w.jumps().to_vec(),
        underflows: w.underflows(),
    })
}

/// Time of the first jump of a fresh walker, or `None` if none occurs
/// before `t_max`.
pub fn first_jump_time(
    model: &ModelSpec,
    psi0: &CVector,
    t_max: f64,
    rng: &mut RngStream,
    dt: f64,
) -> Result<Option<f64>> {
    let mut w = Walker::single(model, psi0.as_slice(), 0.0, dt, rng)?;
    // Advance in chunks so the walk stops soon after the first jump.
    let chunk = (64.0 * dt).max(dt);
    let mut t = 0.0;
    while t < t_max {
        t = (t + chunk).min(t_max);
        w.advance_to(t, rng)?;
        if let Some(j) = w.jumps().first() {
            return Ok(Some(j.time));
        }
    }
    Ok(None)
}

/// Squared norm of the state `ψ` after linear flow for `t`, computed with the
/// same integrator as the sampler. Used to cross-check waiting times.
pub fn survival_norm(model: &ModelSpec, psi0: &CVector, t: f64, dt: f64) -> f64 {
    let n = (t / dt).ceil().max(1.0) as usize;
    let p = crate::linalg::rk4_propagator(model.h_eff(), t / n as f64);
    let mut v = psi0.as_slice().to_vec();
    let mut buf = v.clone();
    for _ in 0..n {
        p.matvec_into(&v, &mut buf);
        std::mem::swap(&mut v, &mut buf);
    }
    norm_sqr(&v)
}
