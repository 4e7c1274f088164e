//! Trajectory estimators for Heisenberg matrix elements and time-ordered
//! multitime correlation functions.
//!
//! Symmetric correlations (mirrored operator strings) are sampled in the
//! single space with multiplicative weights `‖Xψ‖²`. General correlations
//! lift to the doubled space at the first insertion and read out
//! `c·<φ|Y|ψ>`. The polarization identity offers a second route to general
//! two-time functions through symmetric runs only.

mod plan;
mod polarization;

pub use plan::{CorrelationPlan, Initial, InitialSampler, InsertionEvent, COINCIDENCE_TOL};
pub use polarization::{polarization_decompose, polarization_sandwich};

use rayon::prelude::*;

use crate::analysis::Accumulator;
use crate::linalg::{inner, CMatrix, CVector};
use crate::model::ModelSpec;
use crate::pdp::{PairedState, RngStream, Walker, DEFAULT_DT};
use crate::{Error, Result, C64};

/// Default number of terms in the polarization identity.
pub const DEFAULT_POLARIZATION_ORDER: usize = 4;

/// Trajectories per work unit. Fixed so that results do not depend on the
/// number of worker threads.
const CHUNK: u64 = 128;

/// Absolute difference treated as roundoff when scoring estimates.
pub const ZERO_TOL: f64 = 1e-12;

/// Monte Carlo settings shared by all estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            n_traj: 10_000,
            seed: 0,
            dt: DEFAULT_DT,
        }
    }
}

impl Sampling {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        Self {
            n_traj,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 2 {
            return Err(Error::invalid("n_traj", "need at least 2 trajectories"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", "timestep must be positive"));
        }
        Ok(())
    }
}

/// Ensemble mean of a complex estimator on a grid, with componentwise
/// standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorResult {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
    pub n_samples: usize,
}

impl EstimatorResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Standard error of the complex mean, `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> Vec<f64> {
        self.stderr_re
            .iter()
            .zip(&self.stderr_im)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }

    /// Largest componentwise |z| against reference values, per point.
    pub fn z_scores(&self, reference: &[C64]) -> Vec<f64> {
        let z = |d: f64, se: f64| zscore(d, se);
        self.values
            .iter()
            .zip(reference)
            .enumerate()
            .map(|(k, (v, r))| {
                let d = v - r;
                z(d.re, self.stderr_re[k]).max(z(d.im, self.stderr_im[k]))
            })
            .collect()
    }

    /// Per-point |z| of the difference of two independent estimates.
    pub fn z_scores_against(&self, other: &EstimatorResult) -> Vec<f64> {
        let z = |d: f64, a: f64, b: f64| zscore(d, a.hypot(b));
        (0..self.len().min(other.len()))
            .map(|k| {
                let d = self.values[k] - other.values[k];
                z(d.re, self.stderr_re[k], other.stderr_re[k]).max(z(d.im, self.stderr_im[k], other.stderr_im[k]))
            })
            .collect()
    }
}

/// Differences below `ZERO_TOL` count as exact agreement, whatever the
/// standard error; otherwise a zero standard error gives an infinite score.
fn zscore(d: f64, se: f64) -> f64 {
    if d.abs() <= ZERO_TOL {
        0.0
    } else if se > 0.0 {
        d.abs() / se
    } else {
        f64::INFINITY
    }
}

/// Runs `n_traj` independent realizations, trajectory `i` drawing from
/// stream `(seed, i)`, and accumulates their sample vectors of length `len`.
pub(crate) fn run_ensemble<F>(sampling: &Sampling, len: usize, per_traj: F) -> Result<Accumulator>
where
    F: Fn(&mut RngStream) -> Result<Vec<C64>> + Sync,
{
    sampling.validate()?;
    let n = sampling.n_traj as u64;
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new(len);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = RngStream::new(sampling.seed, i);
                acc.push(&per_traj(&mut rng)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Accumulator::new(len);
    for p in &partial {
        total.merge(p);
    }
    Ok(total)
}

fn read_out(
    w: &mut Walker<'_>,
    weight: f64,
    origin: f64,
    tau_grid: &[f64],
    y: &CMatrix,
    rng: &mut RngStream,
) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        w.advance_to(origin + tau, rng)?;
        out.push(w.measure(y) * weight);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Symmetric,
    Doubled,
}

fn sample_plan(
    model: &ModelSpec,
    sampler: &dyn InitialSampler,
    plan: &CorrelationPlan,
    mode: Mode,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<C64>> {
    let psi0 = sampler.sample(rng, model.dim())?;
    let mut w = Walker::single(model, psi0.as_slice(), plan.t0(), dt, rng)?;
    let mut weight = 1.0;
    for ev in plan.events() {
        w.advance_to(ev.time, rng)?;
        weight *= match mode {
            Mode::Symmetric => w.insert(ev.right.as_ref(), rng)?,
            Mode::Doubled if w.blocks() == 1 => w.lift(ev.left.as_ref(), ev.right.as_ref(), rng)?,
            Mode::Doubled => w.insert_pair(ev.left.as_ref(), ev.right.as_ref(), rng)?,
        };
    }
    read_out(
        &mut w,
        weight,
        plan.readout_origin(),
        plan.tau_grid(),
        plan.final_op(),
        rng,
    )
}

fn check_model_dim(model: &ModelSpec, plan: &CorrelationPlan) -> Result<()> {
    if plan.dim() != model.dim() {
        return Err(Error::Dimension {
            op: "correlation plan",
            expected: model.dim(),
            found: plan.dim(),
        });
    }
    Ok(())
}

fn run_plan(
    model: &ModelSpec,
    sampler: &dyn InitialSampler,
    plan: &CorrelationPlan,
    mode: Mode,
    sampling: &Sampling,
) -> Result<EstimatorResult> {
    check_model_dim(model, plan)?;
    let acc = run_ensemble(sampling, plan.tau_grid().len(), |rng| {
        sample_plan(model, sampler, plan, mode, sampling.dt, rng)
    })?;
    acc.finish(plan.tau_grid().to_vec())
}

/// Estimates `<φ0|X(τ)|ψ0>` as the mean of `c0·<φ(τ)|X|ψ(τ)>` over
/// doubled-space trajectories started from `(φ0, ψ0)/√c0`.
pub fn heisenberg_matrix_element(
    model: &ModelSpec,
    phi0: &CVector,
    psi0: &CVector,
    x: &CMatrix,
    tau_grid: &[f64],
    sampling: &Sampling,
) -> Result<EstimatorResult> {
    if phi0.norm_sqr() == 0.0 || psi0.norm_sqr() == 0.0 {
        return Err(Error::invalid("matrix element states", "must be nonzero"));
    }
    let theta = PairedState::new(phi0, psi0)?;
    let plan = CorrelationPlan::new(Initial::UniformSphere, 0.0, vec![], x.clone(), tau_grid.to_vec())?;
    check_model_dim(model, &plan)?;
    let acc = run_ensemble(sampling, tau_grid.len(), |rng| {
        let mut w = Walker::pair(model, theta.phi.as_slice(), theta.psi.as_slice(), 0.0, sampling.dt, rng)?;
        read_out(&mut w, theta.weight_c, 0.0, tau_grid, x, rng)
    })?;
    acc.finish(tau_grid.to_vec())
}

/// Symmetric time-ordered correlation sampled in the single space. Every
/// event must insert the same operator on both sides.
pub fn symmetric_correlation(
    model: &ModelSpec,
    plan: &CorrelationPlan,
    sampling: &Sampling,
) -> Result<EstimatorResult> {
    if !plan.is_symmetric() {
        return Err(Error::invalid(
            "correlation plan",
            "symmetric estimator needs equal left and right insertions",
        ));
    }
    run_plan(model, plan.initial(), plan, Mode::Symmetric, sampling)
}

/// General time-ordered correlation through the doubled space. Without
/// events this is the one-time expectation of the final operator.
pub fn general_correlation(model: &ModelSpec, plan: &CorrelationPlan, sampling: &Sampling) -> Result<EstimatorResult> {
    run_plan(model, plan.initial(), plan, Mode::Doubled, sampling)
}

/// Plan estimate with initial states drawn from `sampler`; symmetric plans
/// use the single space, others the doubled space.
pub fn mixed_initial_correlation(
    model: &ModelSpec,
    sampler: &dyn InitialSampler,
    plan: &CorrelationPlan,
    sampling: &Sampling,
) -> Result<EstimatorResult> {
    let mode = if plan.is_symmetric() {
        Mode::Symmetric
    } else {
        Mode::Doubled
    };
    run_plan(model, sampler, plan, mode, sampling)
}

/// Plan for `<X†(t+τ)·Y(t)>` starting from `initial` at time 0.
pub fn two_time_plan(
    initial: Initial,
    t: f64,
    x: &CMatrix,
    y: &CMatrix,
    tau_grid: Vec<f64>,
) -> Result<CorrelationPlan> {
    CorrelationPlan::new(
        initial,
        0.0,
        vec![InsertionEvent::right(t, y.clone())],
        x.adjoint(),
        tau_grid,
    )
}

/// `<X†(t+τ)·Y(t)>` through the polarization identity: `order` symmetric
/// runs with insertions `1 + e^{iθ_k}·Y`, weighted by `e^{−iθ_k}/order`.
///
/// All branches of one realization share the path up to `t` and reuse the
/// same random numbers afterwards; the sample recorded per realization is
/// the weighted sum over branches.
#[allow(clippy::too_many_arguments)]
pub fn method1_correlation(
    model: &ModelSpec,
    sampler: &dyn InitialSampler,
    x: &CMatrix,
    y: &CMatrix,
    t: f64,
    tau_grid: &[f64],
    sampling: &Sampling,
    order: usize,
) -> Result<EstimatorResult> {
    let terms = polarization_decompose(&CMatrix::identity(model.dim()), y, order)?;
    let plan = two_time_plan(Initial::UniformSphere, t, x, y, tau_grid.to_vec())?;
    check_model_dim(model, &plan)?;
    let xd = plan.final_op();
    let acc = run_ensemble(sampling, tau_grid.len(), |rng| {
        let psi0 = sampler.sample(rng, model.dim())?;
        let mut w = Walker::single(model, psi0.as_slice(), 0.0, sampling.dt, rng)?;
        w.advance_to(t, rng)?;
        let mut total = vec![C64::new(0.0, 0.0); tau_grid.len()];
        for (coef, z) in &terms {
            let mut branch = w.clone();
            let mut branch_rng = rng.clone();
            let g = branch.insert(Some(z), &mut branch_rng)?;
            let vals = read_out(&mut branch, g, t, tau_grid, xd, &mut branch_rng)?;
            for (acc, v) in total.iter_mut().zip(vals) {
                *acc += coef * v;
            }
        }
        Ok(total)
    })?;
    acc.finish(tau_grid.to_vec())
}

/// Propagates `φ0` and `ψ0` as two independent single-space trajectories and
/// averages `‖φ0‖‖ψ0‖·<φ(τ)|X|ψ(τ)>`. This does not estimate the Heisenberg
/// matrix element; it is kept to demonstrate the bias.
pub fn naive_matrix_element(
    model: &ModelSpec,
    phi0: &CVector,
    psi0: &CVector,
    x: &CMatrix,
    tau_grid: &[f64],
    sampling: &Sampling,
) -> Result<EstimatorResult> {
    let (phi, psi) = match (phi0.normalized(), psi0.normalized()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("matrix element states", "must be nonzero")),
    };
    let scale = phi0.norm() * psi0.norm();
    let d = model.dim();
    let acc = run_ensemble(sampling, tau_grid.len(), |rng| {
        let mut wa = Walker::single(model, phi.as_slice(), 0.0, sampling.dt, rng)?;
        let mut wb = Walker::single(model, psi.as_slice(), 0.0, sampling.dt, rng)?;
        let mut out = Vec::with_capacity(tau_grid.len());
        let mut buf = vec![C64::new(0.0, 0.0); d];
        for &tau in tau_grid {
            wa.advance_to(tau, rng)?;
            wb.advance_to(tau, rng)?;
            let (a, b) = (wa.snapshot(), wb.snapshot());
            x.matvec_into(&b, &mut buf);
            out.push(inner(&a, &buf) * scale);
        }
        Ok(out)
    })?;
    acc.finish(tau_grid.to_vec())
}
