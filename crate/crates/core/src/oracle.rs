//! Dense master-equation integration and quantum-regression correlations.
//!
//! Everything here works on full `d×d` matrices and serves as the reference
//! for the stochastic estimators.

use crate::correlators::{CorrelationPlan, Initial};
use crate::linalg::{eig_herm2, is_positive_semidefinite, CMatrix, CVector, Herm2};
use crate::model::ModelSpec;
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used to validate Hermiticity, trace and positivity.
pub const DENSITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("density matrix", "must be square"));
        }
        if !m.is_hermitian(DENSITY_TOL) {
            return Err(Error::invalid("density matrix", "must be Hermitian"));
        }
        if (m.trace().re - 1.0).abs() > DENSITY_TOL {
            return Err(Error::invalid("density matrix", "trace must be 1"));
        }
        if !is_positive_semidefinite(&m, DENSITY_TOL) {
            return Err(Error::invalid("density matrix", "must be positive semidefinite"));
        }
        Ok(Self { m })
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let psi = psi
            .normalized()
            .ok_or_else(|| Error::invalid("state", "must be nonzero"))?;
        Self::new(psi.outer(&psi))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// The density matrix matching an initial-state distribution.
    pub fn of_initial(initial: &Initial, dim: usize) -> Result<Self> {
        match initial {
            Initial::Pure(psi) => Self::pure(psi),
            Initial::UniformSphere => Ok(Self::maximally_mixed(dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn expect(&self, op: &CMatrix) -> C64 {
        (op * &self.m).trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }
}

/// Trace distance `½‖A − B‖₁` between two 2×2 Hermitian matrices.
pub fn trace_distance_2x2(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows() != 2 || a.cols() != 2 || b.rows() != 2 || b.cols() != 2 {
        return Err(Error::invalid("trace distance", "implemented for 2×2 matrices only"));
    }
    let d = a - b;
    let h = Herm2::new(d[(0, 0)].re, d[(1, 1)].re, d[(0, 1)]);
    let e = eig_herm2(&h);
    Ok(0.5 * (e.values[0].abs() + e.values[1].abs()))
}

/// Lindblad generator `−i[H, ρ] + γ·Σ λ_i (J_i ρ J_i† − ½{J_i†J_i, ρ})`.
///
/// Applied to any matrix, not only to valid states, so it also drives the
/// regression of operator-sandwiched matrices.
pub fn lindblad_rhs(model: &ModelSpec, rho: &CMatrix) -> CMatrix {
    let h = model.h_eff();
    let mut out = (&(h * rho) - &(rho * &h.adjoint())).scale(-I);
    let gamma = model.gamma();
    for ch in model.channels() {
        let rate = gamma * ch.lambda;
        if rate != 0.0 {
            out += &(&(&ch.op * rho) * &ch.op.adjoint()).scale_real(rate);
        }
    }
    out
}

fn rk4_matrix_step(model: &ModelSpec, m: &CMatrix, h: f64) -> CMatrix {
    let k1 = lindblad_rhs(model, m);
    let k2 = lindblad_rhs(model, &(m + &k1.scale_real(0.5 * h)));
    let k3 = lindblad_rhs(model, &(m + &k2.scale_real(0.5 * h)));
    let k4 = lindblad_rhs(model, &(m + &k3.scale_real(h)));
    let mut incr = &k1 + &k4;
    incr += &(&k2 + &k3).scale_real(2.0);
    m + &incr.scale_real(h / 6.0)
}

/// Propagates an arbitrary matrix by the master-equation flow for
/// `duration`, with `ceil(duration/dt)` equal RK4 substeps.
pub fn propagate_operator(model: &ModelSpec, m0: &CMatrix, duration: f64, dt: f64) -> Result<CMatrix> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", "timestep must be positive"));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::invalid("duration", "must be finite and nonnegative"));
    }
    if m0.rows() != model.dim() || m0.cols() != model.dim() {
        return Err(Error::Dimension {
            op: "propagate_operator",
            expected: model.dim(),
            found: m0.rows(),
        });
    }
    if duration == 0.0 {
        return Ok(m0.clone());
    }
    let n = ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = duration / n as f64;
    let mut m = m0.clone();
    for k in 0..n {
        m = rk4_matrix_step(model, &m, h);
        if !m.is_finite() {
            return Err(Error::Propagation { t: (k + 1) as f64 * h });
        }
    }
    Ok(m)
}

pub fn propagate_rho(model: &ModelSpec, rho0: &DensityMatrix, t0: f64, t1: f64, dt: f64) -> Result<DensityMatrix> {
    if t1 < t0 {
        return Err(Error::invalid("time", "t1 must not precede t0"));
    }
    let m = propagate_operator(model, rho0.matrix(), t1 - t0, dt)?;
    DensityMatrix::new(m.hermitian_part())
}

/// Density matrices at every time of a nondecreasing grid starting at `t0`.
pub fn propagate_rho_on_grid(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    t0: f64,
    grid: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut t = t0;
    let mut m = rho0.matrix().clone();
    for &g in grid {
        if g < t {
            return Err(Error::invalid("time grid", "must be nondecreasing and not before t0"));
        }
        m = propagate_operator(model, &m, g - t, dt)?;
        t = g;
        out.push(DensityMatrix::new(m.hermitian_part())?);
    }
    Ok(out)
}

/// Long-time state reached from `rho0` after `horizon`.
pub fn steady_state(model: &ModelSpec, rho0: &DensityMatrix, horizon: f64, dt: f64) -> Result<DensityMatrix> {
    propagate_rho(model, rho0, 0.0, horizon, dt)
}

fn trace_on_tau_grid(model: &ModelSpec, sigma: CMatrix, y: &CMatrix, tau_grid: &[f64], dt: f64) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(tau_grid.len());
    let mut sigma = sigma;
    let mut tau = 0.0;
    for &t in tau_grid {
        if t < tau {
            return Err(Error::invalid("tau grid", "must be nonnegative and nondecreasing"));
        }
        sigma = propagate_operator(model, &sigma, t - tau, dt)?;
        tau = t;
        out.push((y * &sigma).trace());
    }
    Ok(out)
}

/// `Tr{Y·V(τ)[ρ(t1)·X†]}` on `tau_grid`, where `ρ(t1)` is `rho0` propagated
/// from time 0.
pub fn regression_correlation(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    x: &CMatrix,
    y: &CMatrix,
    t1: f64,
    tau_grid: &[f64],
    dt: f64,
) -> Result<Vec<C64>> {
    let rho1 = propagate_rho(model, rho0, 0.0, t1, dt)?;
    let sigma = rho1.matrix() * &x.adjoint();
    trace_on_tau_grid(model, sigma, y, tau_grid, dt)
}

/// Nested regression for a correlation plan: propagate, apply `σ → R·σ·L†`
/// at each event, and trace with the final operator on the τ grid.
pub fn regression_multitime(model: &ModelSpec, plan: &CorrelationPlan, dt: f64) -> Result<Vec<C64>> {
    let rho0 = DensityMatrix::of_initial(plan.initial(), model.dim())?;
    let mut sigma = rho0.into_matrix();
    let mut t = plan.t0();
    for ev in plan.events() {
        sigma = propagate_operator(model, &sigma, ev.time - t, dt)?;
        t = ev.time;
        if let Some(r) = &ev.right {
            sigma = r * &sigma;
        }
        if let Some(l) = &ev.left {
            sigma = &sigma * &l.adjoint();
        }
    }
    trace_on_tau_grid(model, sigma, plan.final_op(), plan.tau_grid(), dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::InsertionEvent;
    use crate::linalg::two_level::*;
    use crate::model::{scenario_thermal, scenario_vacuum_drive, DriveParams, EnvironmentParams};

    const DT: f64 = 1e-3;

    fn excited_rho() -> DensityMatrix {
        DensityMatrix::pure(&excited()).unwrap()
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(2)).is_err());
        assert!(DensityMatrix::new(CMatrix::from_real_rows(&[&[1.5, 0.0], &[0.0, -0.5]]).unwrap()).is_err());
        let nonherm = CMatrix::from_rows(&[
            vec![C64::new(0.5, 0.0), C64::new(0.1, 0.0)],
            vec![C64::new(0.2, 0.0), C64::new(0.5, 0.0)],
        ])
        .unwrap();
        assert!(DensityMatrix::new(nonherm).is_err());
        assert!((DensityMatrix::maximally_mixed(2).purity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_is_traceless() {
        let m = scenario_thermal(1.0, 0.7, DriveParams::resonant(3.0)).unwrap();
        let rho = CMatrix::from_rows(&[
            vec![C64::new(0.3, 0.0), C64::new(0.1, -0.2)],
            vec![C64::new(0.1, 0.2), C64::new(0.7, 0.0)],
        ])
        .unwrap();
        assert!(lindblad_rhs(&m, &rho).trace().norm() < 1e-12);
    }

    #[test]
    fn vacuum_decay_is_exponential() {
        let m = scenario_vacuum_drive(1.0, 0.0, 0.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let rhos = propagate_rho_on_grid(&m, &excited_rho(), 0.0, &grid, DT).unwrap();
        for (t, r) in grid.iter().zip(&rhos) {
            let pe = r.expect(&excited_projector()).re;
            assert!((pe - (-t).exp()).abs() < 1e-12, "t={t}: {pe}");
        }
    }

    #[test]
    fn thermal_steady_state_obeys_detailed_balance() {
        for n in [0.2, 1.0, 2.5] {
            let m = scenario_thermal(1.0, n, DriveParams::none()).unwrap();
            let rho = steady_state(&m, &DensityMatrix::pure(&ground()).unwrap(), 30.0 / (2.0 * n + 1.0), DT).unwrap();
            let pe = rho.expect(&excited_projector()).re;
            assert!((pe - n / (2.0 * n + 1.0)).abs() < 1e-10, "N={n}: {pe}");
            assert!((pe / (1.0 - pe) - n / (n + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn unitary_limit_conserves_purity() {
        let env = EnvironmentParams::vacuum(0.0);
        let m = ModelSpec::new(sigma_x(), sigma_minus(), env, DriveParams::none()).unwrap();
        let psi = CVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let r = propagate_rho(&m, &DensityMatrix::pure(&psi).unwrap(), 0.0, 3.0, DT).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_duration_is_identity() {
        let m = scenario_vacuum_drive(1.0, 10.0, 0.0).unwrap();
        let r0 = DensityMatrix::maximally_mixed(2);
        assert_eq!(propagate_rho(&m, &r0, 2.0, 2.0, DT).unwrap(), r0);
        assert!(propagate_rho(&m, &r0, 2.0, 1.0, DT).is_err());
    }

    #[test]
    fn driven_steady_state_is_reached_and_matches_closed_form() {
        let omega: f64 = 10.0;
        let m = scenario_vacuum_drive(1.0, omega, 0.0).unwrap();
        let rho = steady_state(&m, &DensityMatrix::pure(&ground()).unwrap(), 30.0, DT).unwrap();
        let later = propagate_rho(&m, &rho, 0.0, 5.0, DT).unwrap();
        assert!(trace_distance_2x2(rho.matrix(), later.matrix()).unwrap() < 1e-6);
        // Resonant optical Bloch equations: ρ_ee = s/(2(1+s)), s = 2Ω²/γ².
        let s = 2.0 * omega * omega;
        let pe = rho.expect(&excited_projector()).re;
        assert!((pe - s / (2.0 * (1.0 + s))).abs() < 1e-10);
        assert!(rho.purity() <= 1.0 + 1e-12);
    }

    #[test]
    fn propagated_states_stay_positive() {
        let m = scenario_thermal(1.0, 0.5, DriveParams::resonant(7.0)).unwrap();
        let grid: Vec<f64> = (0..=30).map(|k| k as f64).collect();
        let rhos = propagate_rho_on_grid(&m, &DensityMatrix::pure(&ground()).unwrap(), 0.0, &grid, DT).unwrap();
        for r in &rhos {
            assert!(is_positive_semidefinite(r.matrix(), 1e-8));
            assert!((r.matrix().trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn regression_at_zero_delay_is_definitional() {
        let m = scenario_vacuum_drive(1.0, 4.0, 0.0).unwrap();
        let r0 = DensityMatrix::pure(&ground()).unwrap();
        let v = regression_correlation(&m, &r0, &sigma_minus(), &sigma_plus(), 1.3, &[0.0], DT).unwrap();
        let rho1 = propagate_rho(&m, &r0, 0.0, 1.3, DT).unwrap();
        let expect = (&sigma_plus() * &(rho1.matrix() * &sigma_plus())).trace();
        assert!((v[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn undriven_dipole_correlation_decays_at_half_rate() {
        let m = scenario_vacuum_drive(1.0, 0.0, 0.0).unwrap();
        let taus: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
        let v = regression_correlation(&m, &excited_rho(), &sigma_minus(), &sigma_minus(), 0.7, &taus, DT).unwrap();
        let pe = (-0.7f64).exp();
        for (t, z) in taus.iter().zip(&v) {
            assert!((z.norm() - pe * (-t / 2.0).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn regression_factorizes_at_long_delay() {
        let m = scenario_vacuum_drive(1.0, 10.0, 0.0).unwrap();
        let r0 = DensityMatrix::pure(&ground()).unwrap();
        let v = regression_correlation(&m, &r0, &sigma_minus(), &sigma_minus(), 30.0, &[40.0], DT).unwrap();
        let ss = steady_state(&m, &r0, 30.0, DT).unwrap();
        let prod = ss.expect(&sigma_minus()) * ss.expect(&sigma_plus());
        assert!((v[0] - prod).norm() < 1e-6);
    }

    #[test]
    fn multitime_agrees_with_single_event_regression() {
        let m = scenario_vacuum_drive(1.0, 6.0, 0.0).unwrap();
        let taus: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let x = sigma_plus();
        let plan = CorrelationPlan::new(
            Initial::Pure(ground()),
            0.0,
            vec![InsertionEvent::left(2.0, x.clone())],
            sigma_minus(),
            taus.clone(),
        )
        .unwrap();
        let a = regression_multitime(&m, &plan, DT).unwrap();
        let b = regression_correlation(
            &m,
            &DensityMatrix::pure(&ground()).unwrap(),
            &x,
            &sigma_minus(),
            2.0,
            &taus,
            DT,
        )
        .unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn identity_plan_gives_unit_trace() {
        let m = scenario_vacuum_drive(1.0, 6.0, 0.0).unwrap();
        let id = CMatrix::identity(2);
        let plan = CorrelationPlan::new(
            Initial::UniformSphere,
            0.0,
            vec![
                InsertionEvent::symmetric(1.0, id.clone()),
                InsertionEvent::new(2.0, None, None),
            ],
            id,
            vec![0.0, 1.0, 3.0],
        )
        .unwrap();
        for v in regression_multitime(&m, &plan, DT).unwrap() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn intensity_correlation_vanishes_at_zero_delay() {
        let m = scenario_vacuum_drive(1.0, 10.0, 0.0).unwrap();
        let plan = CorrelationPlan::new(
            Initial::UniformSphere,
            0.0,
            vec![InsertionEvent::symmetric(30.0, sigma_minus())],
            excited_projector(),
            vec![0.0, 0.1, 30.0],
        )
        .unwrap();
        let g = regression_multitime(&m, &plan, DT).unwrap();
        assert_eq!(g[0], C64::new(0.0, 0.0));
        assert!(g[1].re > 0.0);
        let ss = steady_state(&m, &DensityMatrix::maximally_mixed(2), 30.0, DT).unwrap();
        let pe = ss.expect(&excited_projector()).re;
        assert!((g[2].re - pe * pe).abs() < 1e-6);
    }

    #[test]
    fn trace_distance_of_pure_states() {
        let a = DensityMatrix::pure(&ground()).unwrap();
        let b = DensityMatrix::pure(&excited()).unwrap();
        assert!((trace_distance_2x2(a.matrix(), b.matrix()).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_distance_2x2(&CMatrix::identity(3), &CMatrix::identity(3)).is_err());
    }
}
