use std::time::Instant;

use super::config::{parse_operator, parse_state, RunConfig, Task};
use super::table::ResultTable;
use crate::analysis::{spectrum_from_correlation, SpectrumOptions, SpectrumResult};
use crate::correlators::{
    general_correlation, heisenberg_matrix_element, method1_correlation, symmetric_correlation, two_time_plan,
    CorrelationPlan, EstimatorResult, Initial, InsertionEvent, Sampling,
};
use crate::linalg::CMatrix;
use crate::model::ModelSpec;
use crate::oracle::{propagate_operator, regression_multitime};
use crate::{Result, C64};

/// Version string written into every output table.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// |z| above which a validation run fails.
pub const VALIDATION_Z_MAX: f64 = 5.0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub table: ResultTable,
    pub exit_code: i32,
    /// Human-readable notes, including anything not reproducible such as
    /// wall-clock timings.
    pub summary: Vec<String>,
}

const EST_COLUMNS: [&str; 5] = ["tau", "mean_re", "mean_im", "stderr_re", "stderr_im"];
const ORACLE_COLUMNS: [&str; 2] = ["oracle_re", "oracle_im"];

fn grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn estimate_table(first: &str, est: &EstimatorResult, oracle: Option<&[C64]>) -> Result<ResultTable> {
    let mut cols: Vec<&str> = EST_COLUMNS.to_vec();
    cols[0] = first;
    if oracle.is_some() {
        cols.extend(ORACLE_COLUMNS);
    }
    let mut t = ResultTable::new(&cols);
    for k in 0..est.len() {
        let mut row = vec![
            est.times[k],
            est.values[k].re,
            est.values[k].im,
            est.stderr_re[k],
            est.stderr_im[k],
        ];
        if let Some(o) = oracle {
            row.extend([o[k].re, o[k].im]);
        }
        t.push_row(row)?;
    }
    Ok(t)
}

fn max_z(est: &EstimatorResult, oracle: &[C64]) -> f64 {
    est.z_scores(oracle).into_iter().fold(0.0, f64::max)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    model: ModelSpec,
    sampling: Sampling,
}

impl Ctx<'_> {
    fn horizon(&self) -> f64 {
        self.cfg.numerics.steady_horizon / self.model.gamma()
    }

    fn tau_grid(&self) -> Vec<f64> {
        grid(self.cfg.numerics.tau_max, self.cfg.numerics.dtau)
    }

    fn observable(&self) -> Result<CMatrix> {
        parse_operator(&self.cfg.task.observable, &self.model)
    }

    /// One-time plan for the configured initial state.
    fn expect_plan(&self) -> Result<CorrelationPlan> {
        let times = grid(self.cfg.task.t_max, self.cfg.task.dt_out);
        let obs = self.observable()?;
        match self.cfg.task.initial.as_str() {
            "steady" => CorrelationPlan::new(
                Initial::UniformSphere,
                0.0,
                vec![InsertionEvent::new(self.horizon(), None, None)],
                obs,
                times,
            ),
            "uniform" => CorrelationPlan::new(Initial::UniformSphere, 0.0, vec![], obs, times),
            s => CorrelationPlan::new(
                Initial::Pure(parse_state(s, self.model.dim())?),
                0.0,
                vec![],
                obs,
                times,
            ),
        }
    }

    fn dipole_plan(&self) -> Result<CorrelationPlan> {
        let a = self.model.a_op();
        two_time_plan(Initial::UniformSphere, self.horizon(), a, a, self.tau_grid())
    }

    fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            subtract_coherent: self.cfg.task.subtract_coherent,
            hann: self.cfg.task.hann,
            min_len: self.cfg.task.pad_to,
        }
    }
}

/// Executes the configured task.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        model: cfg.model.build()?,
        sampling: Sampling {
            n_traj: cfg.numerics.n_traj,
            seed: cfg.numerics.seed,
            dt: cfg.numerics.dt,
        },
    };
    let mut summary = Vec::new();
    let mut exit_code = EXIT_OK;
    let mut table = match cfg.task.task {
        Task::Expect | Task::Validate => {
            let plan = ctx.expect_plan()?;
            let est = symmetric_correlation(&ctx.model, &plan, &ctx.sampling)?;
            if cfg.task.task == Task::Validate {
                let oracle = regression_multitime(&ctx.model, &plan, cfg.numerics.dt)?;
                let z = max_z(&est, &oracle);
                summary.push(format!("max |z| = {z:.3}"));
                if z > VALIDATION_Z_MAX {
                    exit_code = EXIT_VALIDATION;
                    summary.push(format!("validation failed: max |z| exceeds {VALIDATION_Z_MAX}"));
                }
                let mut t = estimate_table("t", &est, Some(&oracle))?;
                t.meta("max_abs_z", z);
                t
            } else {
                estimate_table("t", &est, None)?
            }
        }
        Task::G2 => {
            let a = ctx.model.a_op().clone();
            let plan = CorrelationPlan::new(
                Initial::UniformSphere,
                0.0,
                vec![InsertionEvent::symmetric(ctx.horizon(), a.clone())],
                &a.adjoint() * &a,
                ctx.tau_grid(),
            )?;
            let est = symmetric_correlation(&ctx.model, &plan, &ctx.sampling)?;
            let oracle = regression_multitime(&ctx.model, &plan, cfg.numerics.dt)?;
            let z = est.z_scores(&oracle);
            let within = z.iter().filter(|z| **z <= 3.0).count() as f64 / z.len() as f64;
            summary.push(format!("fraction of points with |z| <= 3: {within:.4}"));
            let mut t = estimate_table("tau", &est, Some(&oracle))?;
            t.meta("fraction_within_3_stderr", within);
            t
        }
        Task::Spectrum => {
            let plan = ctx.dipole_plan()?;
            let est = general_correlation(&ctx.model, &plan, &ctx.sampling)?;
            let oracle = regression_multitime(&ctx.model, &plan, cfg.numerics.dt)?;
            let opts = ctx.spectrum_options();
            let spec = spectrum_from_correlation(&est, &opts)?;
            let oracle_est = EstimatorResult {
                values: oracle,
                stderr_re: vec![0.0; est.len()],
                stderr_im: vec![0.0; est.len()],
                ..est.clone()
            };
            let oracle_spec = spectrum_from_correlation(&oracle_est, &opts)?;
            spectrum_table(&spec, &oracle_spec, &mut summary)?
        }
        Task::Matelem => {
            let d = ctx.model.dim();
            let phi0 = parse_state(&cfg.task.phi0, d)?;
            let psi0 = parse_state(&cfg.task.psi0, d)?;
            let x = ctx.observable()?;
            let times = grid(cfg.task.t_max, cfg.task.dt_out);
            let est = heisenberg_matrix_element(&ctx.model, &phi0, &psi0, &x, &times, &ctx.sampling)?;
            let mut sigma = psi0.outer(&phi0);
            let mut oracle = Vec::with_capacity(times.len());
            let mut prev = 0.0;
            for &t in &times {
                sigma = propagate_operator(&ctx.model, &sigma, t - prev, cfg.numerics.dt)?;
                prev = t;
                oracle.push((&x * &sigma).trace());
            }
            estimate_table("tau", &est, Some(&oracle))?
        }
        Task::Bench => bench(&ctx, &mut summary)?,
    };
    table.meta("version", VERSION);
    table.meta("seed", cfg.numerics.seed);
    for (k, v) in cfg.echo() {
        table.meta(format!("config.{k}"), v);
    }
    Ok(RunOutcome {
        table,
        exit_code,
        summary,
    })
}

fn spectrum_table(spec: &SpectrumResult, oracle: &SpectrumResult, summary: &mut Vec<String>) -> Result<ResultTable> {
    let mut t = ResultTable::new(&[
        "omega",
        "mean_re",
        "mean_im",
        "stderr_re",
        "stderr_im",
        "oracle_re",
        "oracle_im",
    ]);
    for k in 0..spec.len() {
        t.push_row(vec![
            spec.frequencies[k],
            spec.intensities[k],
            0.0,
            spec.stderr[k],
            0.0,
            oracle.intensities[k],
            0.0,
        ])?;
    }
    let m = &spec.metadata;
    t.meta("n_traj", m.n_traj);
    t.meta("tau_max", m.tau_max);
    t.meta("dtau", m.dtau);
    t.meta("subtracted_re", m.subtracted.re);
    t.meta("subtracted_im", m.subtracted.im);
    t.meta("hann", m.hann);
    if let Some(p) = spec.peak_near(0.0, spec.resolution()) {
        if let Some(w) = spec.fwhm(p) {
            t.meta("central_fwhm", w);
            summary.push(format!("central peak FWHM = {w:.4}"));
        }
    }
    if let Some(p) = oracle.peak_near(0.0, oracle.resolution()) {
        if let Some(w) = oracle.fwhm(p) {
            t.meta("oracle_central_fwhm", w);
        }
    }
    Ok(t)
}

/// Method II at the configured trajectory count sets the target standard
/// error; a Method I pilot run sizes the Method I ensemble that matches it.
fn bench(ctx: &Ctx<'_>, summary: &mut Vec<String>) -> Result<ResultTable> {
    let cfg = ctx.cfg;
    let plan = ctx.dipole_plan()?;
    let a = ctx.model.a_op();
    let taus = plan.tau_grid().to_vec();
    let sampler = Initial::UniformSphere;
    let run_method1 = |sampling: &Sampling| {
        method1_correlation(
            &ctx.model,
            &sampler,
            a,
            a,
            ctx.horizon(),
            &taus,
            sampling,
            cfg.task.polarization_order,
        )
    };
    let mean_se = |e: &EstimatorResult| e.stderr().iter().sum::<f64>() / e.len() as f64;

    let t0 = Instant::now();
    let m2 = general_correlation(&ctx.model, &plan, &ctx.sampling)?;
    let time2 = t0.elapsed().as_secs_f64();
    let target = mean_se(&m2);

    let n_pilot = (cfg.numerics.n_traj / 10).max(100);
    let pilot_sampling = Sampling {
        n_traj: n_pilot,
        seed: cfg.numerics.seed.wrapping_add(1),
        ..ctx.sampling
    };
    let t1 = Instant::now();
    let pilot = run_method1(&pilot_sampling)?;
    let time_pilot = t1.elapsed().as_secs_f64();
    let n1 = ((n_pilot as f64) * (mean_se(&pilot) / target).powi(2)).ceil().max(2.0) as usize;
    let s1 = Sampling {
        n_traj: n1,
        seed: cfg.numerics.seed.wrapping_add(2),
        ..ctx.sampling
    };
    let t2 = Instant::now();
    let m1 = run_method1(&s1)?;
    let time1 = t2.elapsed().as_secs_f64();

    let z = m1.z_scores_against(&m2);
    let within = z.iter().filter(|z| **z <= 3.0).count() as f64 / z.len() as f64;
    let cost2 = time2 * target * target;
    let se1 = mean_se(&m1);
    let cost1 = time1 * se1 * se1;
    summary.push(format!(
        "method II: {} trajectories, {time2:.3} s, mean stderr {target:.3e}",
        m2.n_samples
    ));
    summary.push(format!(
        "method I: pilot {n_pilot} in {time_pilot:.3} s; {n1} trajectories, {time1:.3} s, mean stderr {se1:.3e}"
    ));
    summary.push(format!("wall-time ratio I/II at matched stderr: {:.3}", time1 / time2));
    summary.push(format!(
        "per-realization cost ratio I/II: {:.3}",
        (time1 / n1 as f64) / (time2 / m2.n_samples as f64)
    ));
    summary.push(format!("cost per target variance ratio II/I: {:.3}", cost2 / cost1));
    summary.push(format!("fraction of points agreeing within 3 stderr: {within:.4}"));

    let mut t = ResultTable::new(&[
        "tau",
        "mean_re",
        "mean_im",
        "stderr_re",
        "stderr_im",
        "method1_re",
        "method1_im",
        "method1_stderr_re",
        "method1_stderr_im",
    ]);
    for k in 0..m2.len() {
        t.push_row(vec![
            m2.times[k],
            m2.values[k].re,
            m2.values[k].im,
            m2.stderr_re[k],
            m2.stderr_im[k],
            m1.values[k].re,
            m1.values[k].im,
            m1.stderr_re[k],
            m1.stderr_im[k],
        ])?;
    }
    t.meta("method2_n_traj", m2.n_samples);
    t.meta("method1_pilot_n_traj", n_pilot);
    t.meta("method1_n_traj", n1);
    t.meta("method2_mean_stderr", target);
    t.meta("method1_mean_stderr", se1);
    t.meta("fraction_within_3_stderr", within);
    Ok(t)
}
