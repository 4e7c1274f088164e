//! The sampling kernel shared by every estimator.
//!
//! A [`Walker`] carries one realization of the process: an unnormalized state
//! of one block (single space) or two blocks (doubled space), the current time
//! and the random threshold `u` of the pending jump. Between jumps the state
//! follows the linear flow `dθ/dt = −i·H_eff·θ` blockwise; a jump fires when
//! the squared norm reaches `u`.

use num_complex::Complex64 as C64;

use super::rng::RngStream;
use crate::linalg::{inner, norm_sqr, rk4_propagator, CMatrix};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Relative tolerance on the jump-time bracket, in units of `dt`.
pub const JUMP_TIME_RTOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: usize,
}

/// Finds the time in `[t_lo, t_hi]` at which the squared norm drops to `u`.
///
/// `norm_at` evaluates the squared norm of the deterministically propagated
/// state and must be nonincreasing on the bracket. Returns `Ok(None)` if the
/// norm is still above `u` at `t_hi`. The returned time is the upper end of
/// the final bisection bracket, so the norm there is at most `u`.
pub fn locate_jump_time<F>(mut norm_at: F, t_lo: f64, t_hi: f64, u: f64, tol: f64) -> Result<Option<f64>>
where
    F: FnMut(f64) -> f64,
{
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("jump threshold", "must lie in the open interval (0, 1)"));
    }
    if !(t_hi >= t_lo) || !(tol > 0.0) {
        return Err(Error::invalid("jump bracket", "need t_hi >= t_lo and tol > 0"));
    }
    if norm_at(t_hi) > u {
        return Ok(None);
    }
    if norm_at(t_lo) <= u {
        return Err(Error::Internal(format!(
            "jump bracket [{t_lo}, {t_hi}] already below threshold {u} at its start"
        )));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

/// One realization of the piecewise deterministic process.
#[derive(Clone, Debug)]
pub(crate) struct Walker<'m> {
    model: &'m ModelSpec,
    dt: f64,
    dim: usize,
    blocks: usize,
    state: Vec<C64>,
    scratch: Vec<C64>,
    t: f64,
    threshold: f64,
    step: Option<(f64, CMatrix)>,
    jumps: Vec<JumpEvent>,
    underflows: usize,
}

impl<'m> Walker<'m> {
    /// Starts in the single space from a normalized state.
    pub fn single(model: &'m ModelSpec, psi: &[C64], t0: f64, dt: f64, rng: &mut RngStream) -> Result<Self> {
        Self::start(model, psi.to_vec(), 1, t0, dt, rng)
    }

    /// Starts in the doubled space from a pair normalized jointly.
    pub fn pair(model: &'m ModelSpec, phi: &[C64], psi: &[C64], t0: f64, dt: f64, rng: &mut RngStream) -> Result<Self> {
        let mut state = phi.to_vec();
        state.extend_from_slice(psi);
        Self::start(model, state, 2, t0, dt, rng)
    }

    fn start(
        model: &'m ModelSpec,
        state: Vec<C64>,
        blocks: usize,
        t0: f64,
        dt: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", "timestep must be positive"));
        }
        let dim = model.dim();
        if state.len() != dim * blocks {
            return Err(Error::Dimension {
                op: "initial state",
                expected: dim * blocks,
                found: state.len(),
            });
        }
        if (norm_sqr(&state) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("initial state", "must be normalized"));
        }
        Ok(Self {
            model,
            dt,
            dim,
            blocks,
            scratch: vec![C64::new(0.0, 0.0); state.len()],
            state,
            t: t0,
            threshold: rng.uniform_open(),
            step: None,
            jumps: Vec::new(),
            underflows: 0,
        })
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    pub fn underflows(&self) -> usize {
        self.underflows
    }

    /// Squared norm of the running (unnormalized) state.
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.state)
    }

    /// Normalized copy of the current state (all blocks).
    pub fn snapshot(&self) -> Vec<C64> {
        let n = self.norm_sqr().sqrt();
        self.state.iter().map(|z| z / n).collect()
    }

    fn apply_blocks(m: &CMatrix, dim: usize, src: &[C64], dst: &mut [C64]) {
        for (s, d) in src.chunks_exact(dim).zip(dst.chunks_exact_mut(dim)) {
            m.matvec_into(s, d);
        }
    }

    fn propagator(&mut self, h: f64) -> &CMatrix {
        let stale = match &self.step {
            Some((cached, _)) => (cached - h).abs() > 1e-13 * h,
            None => true,
        };
        if stale {
            self.step = Some((h, rk4_propagator(self.model.h_eff(), h)));
        }
        &self.step.as_ref().unwrap().1
    }

    /// Propagates to `t_end`, performing every jump on the way.
    pub fn advance_to(&mut self, t_end: f64, rng: &mut RngStream) -> Result<()> {
        let eps = 1e-12 * t_end.abs().max(1.0);
        if t_end < self.t - eps {
            return Err(Error::invalid(
                "time",
                format!("cannot propagate backwards from {} to {}", self.t, t_end),
            ));
        }
        'segment: loop {
            let remaining = t_end - self.t;
            if remaining <= eps {
                self.t = t_end;
                return Ok(());
            }
            let n = ((remaining / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = remaining / n as f64;
            let t_start = self.t;
            let dim = self.dim;
            let prop = self.propagator(h).clone();
            for k in 0..n {
                Self::apply_blocks(&prop, dim, &self.state, &mut self.scratch);
                let norm = norm_sqr(&self.scratch);
                if !norm.is_finite() {
                    return Err(Error::Propagation {
                        t: t_start + (k + 1) as f64 * h,
                    });
                }
                if norm <= self.threshold {
                    let t_here = t_start + k as f64 * h;
                    let s = self.locate(h)?;
                    let sub = rk4_propagator(self.model.h_eff(), s);
                    Self::apply_blocks(&sub, dim, &self.state, &mut self.scratch);
                    std::mem::swap(&mut self.state, &mut self.scratch);
                    self.t = (t_here + s).min(t_end);
                    self.jump(rng)?;
                    continue 'segment;
                }
                std::mem::swap(&mut self.state, &mut self.scratch);
                self.t = if k + 1 == n {
                    t_end
                } else {
                    t_start + (k + 1) as f64 * h
                };
            }
            return Ok(());
        }
    }

    fn locate(&self, h: f64) -> Result<f64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.state.len()];
        let h_eff = self.model.h_eff();
        let norm_at = |s: f64| {
            if s == 0.0 {
                return norm_sqr(&self.state);
            }
            let p = rk4_propagator(h_eff, s);
            Self::apply_blocks(&p, self.dim, &self.state, &mut buf);
            norm_sqr(&buf)
        };
        // The bracket end was found below threshold by the cached step; a
        // knife-edge disagreement in the last bit means the jump is at `h`.
        Ok(locate_jump_time(norm_at, 0.0, h, self.threshold, JUMP_TIME_RTOL * self.dt)?.unwrap_or(h))
    }

    fn apply_op_blocks(&self, op: &CMatrix) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.state.len()];
        Self::apply_blocks(op, self.dim, &self.state, &mut out);
        out
    }

    fn jump(&mut self, rng: &mut RngStream) -> Result<()> {
        let gamma = self.model.gamma();
        let mut candidates = Vec::with_capacity(self.model.channels().len());
        let mut total = 0.0;
        for (i, ch) in self.model.channels().iter().enumerate() {
            let rate = gamma * ch.lambda;
            if rate == 0.0 {
                continue;
            }
            let amp = self.apply_op_blocks(&ch.op);
            let w = rate * norm_sqr(&amp);
            if w > 0.0 {
                total += w;
                candidates.push((i, w, amp));
            }
        }
        if !(total > 0.0) || !total.is_finite() {
            // Only roundoff can bring the norm to the threshold with zero
            // total rate; restart the waiting time from the current state.
            self.underflows += 1;
            self.renormalize();
            self.threshold = rng.uniform_open();
            return Ok(());
        }
        let mut r = rng.uniform_open() * total;
        let last = candidates.len() - 1;
        let mut chosen = last;
        for (k, (_, w, _)) in candidates.iter().enumerate() {
            if r < *w {
                chosen = k;
                break;
            }
            r -= w;
        }
        let (channel, _, amp) = candidates.swap_remove(chosen);
        let n = norm_sqr(&amp).sqrt();
        self.state = amp.into_iter().map(|z| z / n).collect();
        self.jumps.push(JumpEvent { time: self.t, channel });
        self.threshold = rng.uniform_open();
        Ok(())
    }

    fn renormalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for z in &mut self.state {
                *z /= n;
            }
        }
    }

    /// Single-space insertion `ψ → Xψ/‖Xψ‖`; returns the weight `‖Xψ‖²` of
    /// the normalized state. A zero weight leaves the state normalized but
    /// otherwise unchanged.
    pub fn insert(&mut self, op: Option<&CMatrix>, rng: &mut RngStream) -> Result<f64> {
        if self.blocks != 1 {
            return Err(Error::Internal("single-space insertion on a pair".into()));
        }
        self.renormalize();
        let w = match op {
            None => 1.0,
            Some(op) => {
                let v = self.apply_op_blocks(op);
                let w = norm_sqr(&v);
                if w > 0.0 {
                    let n = w.sqrt();
                    self.state = v.into_iter().map(|z| z / n).collect();
                }
                w
            }
        };
        self.threshold = rng.uniform_open();
        Ok(w)
    }

    /// Lifts the single-space state to the pair `(Lψ, Rψ)/√c` and returns
    /// `c = ‖Lψ‖² + ‖Rψ‖²` for normalized ψ.
    pub fn lift(&mut self, left: Option<&CMatrix>, right: Option<&CMatrix>, rng: &mut RngStream) -> Result<f64> {
        if self.blocks != 1 {
            return Err(Error::Internal("lift of a state that is already a pair".into()));
        }
        self.renormalize();
        let psi = self.state.clone();
        self.state.extend_from_slice(&psi);
        self.blocks = 2;
        self.scratch.resize(self.state.len(), C64::new(0.0, 0.0));
        self.insert_blocks(left, right, rng)
    }

    /// Doubled-space insertion `(φ, ψ) → (Lφ, Rψ)/√c`, returning `c` for the
    /// normalized pair.
    pub fn insert_pair(&mut self, left: Option<&CMatrix>, right: Option<&CMatrix>, rng: &mut RngStream) -> Result<f64> {
        if self.blocks != 2 {
            return Err(Error::Internal("pair insertion on a single-space state".into()));
        }
        self.renormalize();
        self.insert_blocks(left, right, rng)
    }

    fn insert_blocks(&mut self, left: Option<&CMatrix>, right: Option<&CMatrix>, rng: &mut RngStream) -> Result<f64> {
        let d = self.dim;
        let mut next = self.state.clone();
        if let Some(l) = left {
            l.matvec_into(&self.state[..d], &mut next[..d]);
        }
        if let Some(r) = right {
            r.matvec_into(&self.state[d..], &mut next[d..]);
        }
        let c = norm_sqr(&next);
        if c > 0.0 {
            let n = c.sqrt();
            self.state = next.into_iter().map(|z| z / n).collect();
        }
        self.threshold = rng.uniform_open();
        Ok(c)
    }

    /// `<ψ|Y|ψ>/‖ψ‖²` in the single space, `<φ|Y|ψ>/(‖φ‖²+‖ψ‖²)` for a pair.
    pub fn measure(&self, y: &CMatrix) -> C64 {
        let d = self.dim;
        let mut buf = vec![C64::new(0.0, 0.0); d];
        let norm = self.norm_sqr();
        match self.blocks {
            1 => {
                y.matvec_into(&self.state, &mut buf);
                inner(&self.state, &buf) / norm
            }
            _ => {
                y.matvec_into(&self.state[d..], &mut buf);
                inner(&self.state[..d], &buf) / norm
            }
        }
    }
}
