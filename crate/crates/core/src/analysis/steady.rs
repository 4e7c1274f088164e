use crate::correlators::{InitialSampler, Sampling};
use crate::linalg::{CMatrix, CVector};
use crate::model::ModelSpec;
use crate::oracle::{self, trace_distance_2x2, DensityMatrix};
use crate::pdp::{RngStream, Walker};
use crate::{Error, Result, C64};

/// Default relaxation horizon in units of `1/γ`.
pub const DEFAULT_STEADY_HORIZON: f64 = 30.0;

fn require_damping(model: &ModelSpec) -> Result<()> {
    if !(model.gamma() > 0.0) {
        return Err(Error::invalid("gamma", "a steady state needs gamma > 0"));
    }
    Ok(())
}

/// One sample of the stationary ensemble: a uniformly drawn state propagated
/// along a single trajectory for `horizon/γ`.
pub fn prepare_steady_state(model: &ModelSpec, dt: f64, horizon: f64, rng: &mut RngStream) -> Result<CVector> {
    require_damping(model)?;
    let psi0 = rng.uniform_state(model.dim());
    let mut w = Walker::single(model, psi0.as_slice(), 0.0, dt, rng)?;
    w.advance_to(horizon / model.gamma(), rng)?;
    Ok(CVector::from_vec_unchecked(w.snapshot()))
}

/// Oracle counterpart of [`prepare_steady_state`]: the maximally mixed state
/// propagated for the same horizon.
pub fn steady_state_oracle(model: &ModelSpec, dt: f64, horizon: f64) -> Result<DensityMatrix> {
    require_damping(model)?;
    oracle::steady_state(
        model,
        &DensityMatrix::maximally_mixed(model.dim()),
        horizon / model.gamma(),
        dt,
    )
}

/// Initial-state sampler that relaxes each draw to the stationary ensemble.
#[derive(Clone, Copy, Debug)]
pub struct SteadyStateSampler<'m> {
    pub model: &'m ModelSpec,
    pub dt: f64,
    pub horizon: f64,
}

impl InitialSampler for SteadyStateSampler<'_> {
    fn sample(&self, rng: &mut RngStream, dim: usize) -> Result<CVector> {
        if dim != self.model.dim() {
            return Err(Error::Dimension {
                op: "steady-state sampler",
                expected: self.model.dim(),
                found: dim,
            });
        }
        prepare_steady_state(self.model, self.dt, self.horizon, rng)
    }
}

/// Ensemble estimate of `E|ψ><ψ|` on a time grid.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub times: Vec<f64>,
    pub mean: Vec<CMatrix>,
    pub stderr_re: Vec<Vec<f64>>,
    pub stderr_im: Vec<Vec<f64>>,
    pub n_samples: usize,
}

/// Covariance matrix of the sampled states at every grid time, for
/// trajectories started from `sampler` at `grid[0]`.
pub fn ensemble_covariance(
    model: &ModelSpec,
    sampler: &dyn InitialSampler,
    grid: &[f64],
    sampling: &Sampling,
) -> Result<CovarianceEstimate> {
    if grid.is_empty() {
        return Err(Error::invalid("time grid", "must not be empty"));
    }
    let d = model.dim();
    let acc = crate::correlators::run_ensemble(sampling, grid.len() * d * d, |rng| {
        let psi0 = sampler.sample(rng, d)?;
        let mut w = Walker::single(model, psi0.as_slice(), grid[0], sampling.dt, rng)?;
        let mut out = Vec::with_capacity(grid.len() * d * d);
        for &t in grid {
            w.advance_to(t, rng)?;
            let s = w.snapshot();
            for i in 0..d {
                for j in 0..d {
                    out.push(s[i] * s[j].conj());
                }
            }
        }
        Ok(out)
    })?;
    let flat = acc.finish(vec![0.0; grid.len() * d * d])?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut stderr_re = Vec::with_capacity(grid.len());
    let mut stderr_im = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let r = k * d * d..(k + 1) * d * d;
        mean.push(CMatrix::new(d, d, flat.values[r.clone()].to_vec())?);
        stderr_re.push(flat.stderr_re[r.clone()].to_vec());
        stderr_im.push(flat.stderr_im[r].to_vec());
    }
    Ok(CovarianceEstimate {
        times: grid.to_vec(),
        mean,
        stderr_re,
        stderr_im,
        n_samples: flat.n_samples,
    })
}

/// Trace distance between an estimated two-level covariance and a reference
/// density matrix, with its delta-method standard error.
///
/// Both matrices have unit trace, so the difference is
/// `[[p, b], [b*, −p]]` with distance `D = sqrt(p² + |b|²)`.
pub fn trace_distance_with_stderr(est: &CovarianceEstimate, k: usize, reference: &CMatrix) -> Result<(f64, f64)> {
    let m = &est.mean[k];
    let dist = trace_distance_2x2(m, reference)?;
    let diff = m - reference;
    let p = 0.5 * (diff[(1, 1)].re - diff[(0, 0)].re);
    let b: C64 = diff[(0, 1)];
    let (sr, si) = (&est.stderr_re[k], &est.stderr_im[k]);
    // Sampled states have unit trace, so the two diagonal entries are
    // perfectly anticorrelated and share one standard error.
    let se_p = 0.5 * (sr[0] + sr[3]);
    let var = (p * se_p).powi(2) + (b.re * sr[1]).powi(2) + (b.im * si[1]).powi(2);
    let se = if dist > 0.0 {
        var.sqrt() / dist
    } else {
        se_p.hypot(sr[1]).hypot(si[1])
    };
    Ok((dist, se))
}
