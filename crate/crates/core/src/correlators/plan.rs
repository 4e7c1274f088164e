use crate::linalg::{CMatrix, CVector};
use crate::pdp::RngStream;
use crate::{Error, Result};

/// Events closer than this are merged into one insertion.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Operator insertion at one time point. The pair density `σ = |ψ><φ|`
/// becomes `R·σ·L†`; `None` stands for the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertionEvent {
    pub time: f64,
    pub left: Option<CMatrix>,
    pub right: Option<CMatrix>,
}

impl InsertionEvent {
    pub fn new(time: f64, left: Option<CMatrix>, right: Option<CMatrix>) -> Self {
        Self { time, left, right }
    }

    /// `σ → X·σ·X†`.
    pub fn symmetric(time: f64, x: CMatrix) -> Self {
        Self::new(time, Some(x.clone()), Some(x))
    }

    /// `σ → X·σ`.
    pub fn right(time: f64, x: CMatrix) -> Self {
        Self::new(time, None, Some(x))
    }

    /// `σ → σ·X†`.
    pub fn left(time: f64, x: CMatrix) -> Self {
        Self::new(time, Some(x), None)
    }

    pub fn is_symmetric(&self) -> bool {
        self.left == self.right
    }

    fn compose(first: Option<CMatrix>, then: Option<CMatrix>) -> Option<CMatrix> {
        match (first, then) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(&b * &a),
        }
    }
}

/// Distribution of initial states.
#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Pure(CVector),
    /// Unitarily invariant measure on the unit sphere; its covariance is `I/d`.
    UniformSphere,
}

/// Source of normalized initial states for the outer Monte Carlo average.
pub trait InitialSampler: Sync {
    fn sample(&self, rng: &mut RngStream, dim: usize) -> Result<CVector>;
}

impl InitialSampler for Initial {
    fn sample(&self, rng: &mut RngStream, dim: usize) -> Result<CVector> {
        match self {
            Initial::Pure(psi) => psi.sample(rng, dim),
            Initial::UniformSphere => Ok(rng.uniform_state(dim)),
        }
    }
}

impl InitialSampler for CVector {
    fn sample(&self, _rng: &mut RngStream, dim: usize) -> Result<CVector> {
        if self.dim() != dim {
            return Err(Error::Dimension {
                op: "initial state",
                expected: dim,
                found: self.dim(),
            });
        }
        self.normalized()
            .ok_or_else(|| Error::invalid("initial state", "must be nonzero"))
    }
}

impl<F> InitialSampler for F
where
    F: Fn(&mut RngStream) -> CVector + Sync,
{
    fn sample(&self, rng: &mut RngStream, dim: usize) -> Result<CVector> {
        self(rng).sample(rng, dim)
    }
}

/// A time-ordered correlation function: start from `initial` at `t0`, apply
/// the insertion events, then read out `final_op` at offsets `tau_grid`
/// after the last event.
#[derive(Clone, Debug)]
pub struct CorrelationPlan {
    initial: Initial,
    t0: f64,
    events: Vec<InsertionEvent>,
    final_op: CMatrix,
    tau_grid: Vec<f64>,
}

impl CorrelationPlan {
    pub fn new(
        initial: Initial,
        t0: f64,
        mut events: Vec<InsertionEvent>,
        final_op: CMatrix,
        tau_grid: Vec<f64>,
    ) -> Result<Self> {
        let dim = final_op.rows();
        if !final_op.is_square() {
            return Err(Error::invalid("final operator", "must be square"));
        }
        if let Initial::Pure(psi) = &initial {
            if psi.dim() != dim {
                return Err(Error::Dimension {
                    op: "plan initial state",
                    expected: dim,
                    found: psi.dim(),
                });
            }
        }
        if !t0.is_finite() {
            return Err(Error::invalid("t0", "must be finite"));
        }
        for ev in &events {
            if !ev.time.is_finite() || ev.time < t0 {
                return Err(Error::invalid("event time", "must be finite and not before t0"));
            }
            for op in [&ev.left, &ev.right].into_iter().flatten() {
                if op.rows() != dim || op.cols() != dim {
                    return Err(Error::Dimension {
                        op: "insertion operator",
                        expected: dim,
                        found: op.rows().max(op.cols()),
                    });
                }
            }
        }
        if tau_grid.is_empty()
            || tau_grid.iter().any(|t| !t.is_finite() || *t < 0.0)
            || tau_grid.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::invalid(
                "tau grid",
                "must be nonempty, nonnegative and nondecreasing",
            ));
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut merged: Vec<InsertionEvent> = Vec::with_capacity(events.len());
        for ev in events {
            match merged.last_mut() {
                Some(prev) if (ev.time - prev.time).abs() <= COINCIDENCE_TOL => {
                    prev.left = InsertionEvent::compose(prev.left.take(), ev.left);
                    prev.right = InsertionEvent::compose(prev.right.take(), ev.right);
                }
                _ => merged.push(ev),
            }
        }
        Ok(Self {
            initial,
            t0,
            events: merged,
            final_op,
            tau_grid,
        })
    }

    pub fn initial(&self) -> &Initial {
        &self.initial
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn events(&self) -> &[InsertionEvent] {
        &self.events
    }

    pub fn final_op(&self) -> &CMatrix {
        &self.final_op
    }

    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }

    pub fn dim(&self) -> usize {
        self.final_op.rows()
    }

    /// Time from which the τ offsets are measured.
    pub fn readout_origin(&self) -> f64 {
        self.events.last().map_or(self.t0, |e| e.time)
    }

    pub fn is_symmetric(&self) -> bool {
        self.events.iter().all(InsertionEvent::is_symmetric)
    }

    pub fn with_initial(mut self, initial: Initial) -> Result<Self> {
        if let Initial::Pure(psi) = &initial {
            if psi.dim() != self.dim() {
                return Err(Error::Dimension {
                    op: "plan initial state",
                    expected: self.dim(),
                    found: psi.dim(),
                });
            }
        }
        self.initial = initial;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::two_level::*;

    #[test]
    fn coinciding_events_compose_in_order() {
        let plan = CorrelationPlan::new(
            Initial::Pure(ground()),
            0.0,
            vec![
                InsertionEvent::right(1.0, sigma_plus()),
                InsertionEvent::right(1.0, sigma_minus()),
                InsertionEvent::symmetric(0.5, sigma_x()),
            ],
            CMatrix::identity(2),
            vec![0.0],
        )
        .unwrap();
        assert_eq!(plan.events().len(), 2);
        assert_eq!(plan.events()[0].time, 0.5);
        let r = plan.events()[1].right.as_ref().unwrap();
        assert_eq!(r, &(&sigma_minus() * &sigma_plus()));
        assert!(plan.events()[1].left.is_none());
        assert!(!plan.is_symmetric());
        assert_eq!(plan.readout_origin(), 1.0);
    }

    #[test]
    fn rejects_bad_plans() {
        let id = CMatrix::identity(2);
        assert!(CorrelationPlan::new(Initial::UniformSphere, 0.0, vec![], id.clone(), vec![]).is_err());
        assert!(CorrelationPlan::new(Initial::UniformSphere, 0.0, vec![], id.clone(), vec![1.0, 0.5]).is_err());
        assert!(CorrelationPlan::new(
            Initial::UniformSphere,
            1.0,
            vec![InsertionEvent::symmetric(0.5, id.clone())],
            id.clone(),
            vec![0.0]
        )
        .is_err());
        assert!(CorrelationPlan::new(
            Initial::UniformSphere,
            0.0,
            vec![InsertionEvent::symmetric(0.5, CMatrix::identity(3))],
            id.clone(),
            vec![0.0]
        )
        .is_err());
        assert!(CorrelationPlan::new(Initial::Pure(CVector::basis(3, 0)), 0.0, vec![], id, vec![0.0]).is_err());
    }

    #[test]
    fn pure_sampler_returns_its_state() {
        let mut rng = RngStream::new(0, 0);
        let s = Initial::Pure(excited()).sample(&mut rng, 2).unwrap();
        assert_eq!(s, excited());
        assert!(excited().sample(&mut rng, 3).is_err());
    }
}
