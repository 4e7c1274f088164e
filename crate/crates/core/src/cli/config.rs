use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::analysis::{DEFAULT_DTAU, DEFAULT_STEADY_HORIZON, DEFAULT_TAU_MAX};
use crate::correlators::DEFAULT_POLARIZATION_ORDER;
use crate::linalg::{two_level, CMatrix, CVector};
use crate::model::{DriveParams, EnvironmentParams, ModelSpec};
use crate::pdp::DEFAULT_DT;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    VacuumDrive,
    Squeezed,
    Thermal,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Expect,
    G2,
    Spectrum,
    Matelem,
    Validate,
    Bench,
}

impl Task {
    pub fn parse(s: &str) -> Option<Task> {
        Some(match s {
            "expect" => Task::Expect,
            "g2" => Task::G2,
            "spectrum" => Task::Spectrum,
            "matelem" => Task::Matelem,
            "validate" => Task::Validate,
            "bench" => Task::Bench,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Expect => "expect",
            Task::G2 => "g2",
            Task::Spectrum => "spectrum",
            Task::Matelem => "matelem",
            Task::Validate => "validate",
            Task::Bench => "bench",
        }
    }

    /// Tasks that start from the stationary ensemble.
    pub fn needs_steady_state(self) -> bool {
        matches!(self, Task::G2 | Task::Spectrum | Task::Bench)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::VacuumDrive => "vacuum_drive",
            Scenario::Squeezed => "squeezed",
            Scenario::Thermal => "thermal",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub scenario: Scenario,
    pub gamma: f64,
    pub rabi: f64,
    /// Explicit drive amplitude 𝓔; overrides `rabi` when set.
    pub field: Option<C64>,
    pub drive_phase: f64,
    pub detuning: f64,
    pub n_photon: f64,
    pub epsilon: f64,
    /// Relative squeezing phase `2(φ_s − φ_L)`.
    pub phi: f64,
    /// Explicit squeezing parameter; derived from `(N, ε, φ)` when unset.
    pub m: Option<C64>,
    pub lamb_shift: f64,
    pub stark_shift: f64,
    pub h_sys: Option<CMatrix>,
    pub a_op: Option<CMatrix>,
}

impl ModelConfig {
    /// Squeezing parameter used for the model.
    pub fn squeezing(&self) -> C64 {
        match (self.scenario, self.m) {
            (_, Some(m)) => m,
            (Scenario::Squeezed, None) => C64::from_polar(
                (self.n_photon * (self.n_photon + self.epsilon)).sqrt(),
                -(self.phi + 2.0 * self.drive_phase),
            ),
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let n_photon = match self.scenario {
            Scenario::VacuumDrive => 0.0,
            _ => self.n_photon,
        };
        let env = EnvironmentParams {
            gamma: self.gamma,
            n_photon,
            m: self.squeezing(),
            epsilon: self.epsilon,
            lamb_shift: self.lamb_shift,
            stark_shift: self.stark_shift,
        };
        let drive = DriveParams {
            amplitude: self.field.unwrap_or(C64::new(self.rabi / 2.0, 0.0)),
            detuning: self.detuning,
            phase: self.drive_phase,
        };
        let (h_sys, a_op) = match self.scenario {
            Scenario::Custom => (
                self.h_sys
                    .clone()
                    .ok_or_else(|| Error::invalid("h_sys", "required for the custom scenario"))?,
                self.a_op
                    .clone()
                    .ok_or_else(|| Error::invalid("a_op", "required for the custom scenario"))?,
            ),
            _ => (CMatrix::zeros(2, 2), two_level::sigma_minus()),
        };
        ModelSpec::new(h_sys, a_op, env, drive)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskConfig {
    pub task: Task,
    /// Operator name (`a`, `ad`, `n`, `id`, `sx`, `sy`, `sz`) or matrix literal.
    pub observable: String,
    /// `ground`, `excited`, `uniform`, `steady` or a state literal.
    pub initial: String,
    pub phi0: String,
    pub psi0: String,
    pub t_max: f64,
    pub dt_out: f64,
    pub polarization_order: usize,
    pub subtract_coherent: bool,
    pub hann: bool,
    pub pad_to: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Numerics {
    pub dt: f64,
    pub tau_max: f64,
    pub dtau: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub steady_horizon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub task: TaskConfig,
    pub numerics: Numerics,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                scenario: Scenario::VacuumDrive,
                gamma: 1.0,
                rabi: 0.0,
                field: None,
                drive_phase: 0.0,
                detuning: 0.0,
                n_photon: 0.0,
                epsilon: 1.0,
                phi: 0.0,
                m: None,
                lamb_shift: 0.0,
                stark_shift: 0.0,
                h_sys: None,
                a_op: None,
            },
            task: TaskConfig {
                task: Task::Expect,
                observable: "n".into(),
                initial: "ground".into(),
                phi0: "excited".into(),
                psi0: "excited".into(),
                t_max: 10.0,
                dt_out: 0.1,
                polarization_order: DEFAULT_POLARIZATION_ORDER,
                subtract_coherent: true,
                hann: false,
                pad_to: 0,
            },
            numerics: Numerics {
                dt: DEFAULT_DT,
                tau_max: DEFAULT_TAU_MAX,
                dtau: DEFAULT_DTAU,
                n_traj: 10_000,
                seed: 0,
                steady_horizon: DEFAULT_STEADY_HORIZON,
            },
            out: None,
        }
    }
}

const MODEL_KEYS: &[&str] = &[
    "scenario",
    "gamma",
    "rabi",
    "field_re",
    "field_im",
    "drive_phase",
    "detuning",
    "n_photon",
    "epsilon",
    "phi",
    "m_re",
    "m_im",
    "lamb_shift",
    "stark_shift",
    "h_sys",
    "a_op",
];
const TASK_KEYS: &[&str] = &[
    "task",
    "observable",
    "initial",
    "phi0",
    "psi0",
    "t_max",
    "dt_out",
    "polarization_order",
    "subtract_coherent",
    "hann",
    "pad_to",
    "out",
];
const NUMERICS_KEYS: &[&str] = &["dt", "tau_max", "dtau", "n_traj", "seed", "steady_horizon"];

struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<(String, String), Entry>;

fn config_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

fn tokenize(text: &str) -> Result<Sections> {
    let mut out = Sections::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        // `#` starts a comment anywhere; `;` only at the start of a line,
        // since it also separates matrix rows.
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.starts_with(';') {
            continue;
        }
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, "unterminated section header"))?
                .trim();
            if !matches!(name, "model" | "task" | "numerics") {
                return Err(config_err(line, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected key = value, got '{content}'")))?;
        let key = key.trim().to_string();
        let value = value.trim().trim_matches('"').to_string();
        let sec = section
            .clone()
            .ok_or_else(|| config_err(line, format!("key '{key}' appears before any section")))?;
        let allowed = match sec.as_str() {
            "model" => MODEL_KEYS,
            "task" => TASK_KEYS,
            _ => NUMERICS_KEYS,
        };
        if !allowed.contains(&key.as_str()) {
            return Err(config_err(line, format!("unknown key '{key}' in [{sec}]")));
        }
        if out.contains_key(&(sec.clone(), key.clone())) {
            return Err(config_err(line, format!("duplicate key '{key}'")));
        }
        out.insert((sec, key), Entry { value, line });
    }
    Ok(out)
}

struct Reader {
    entries: Sections,
}

impl Reader {
    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn f64(&self, sec: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| config_err(e.line, format!("'{key}' must be a finite number, got '{}'", e.value))),
        }
    }

    fn opt_f64(&self, sec: &str, key: &str) -> Result<Option<f64>> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(_) => self.f64(sec, key, 0.0).map(Some),
        }
    }

    fn count(&self, sec: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(e) => {
                let bad = || {
                    config_err(
                        e.line,
                        format!("'{key}' must be a nonnegative integer, got '{}'", e.value),
                    )
                };
                if let Ok(v) = e.value.parse::<u64>() {
                    return Ok(v);
                }
                let x: f64 = e.value.parse().map_err(|_| bad())?;
                if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
                    Ok(x as u64)
                } else {
                    Err(bad())
                }
            }
        }
    }

    fn bool(&self, sec: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(config_err(
                    e.line,
                    format!("'{key}' must be true or false, got '{other}'"),
                )),
            },
        }
    }

    fn string(&self, sec: &str, key: &str, default: &str) -> String {
        self.get(sec, key)
            .map_or_else(|| default.to_string(), |e| e.value.clone())
    }

    fn matrix(&self, sec: &str, key: &str) -> Result<Option<CMatrix>> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(e) => parse_matrix(&e.value)
                .map(Some)
                .map_err(|reason| config_err(e.line, format!("'{key}': {reason}"))),
        }
    }
}

fn parse_complex(tok: &str) -> std::result::Result<C64, String> {
    let bad = || format!("cannot parse complex number '{tok}'");
    let (re, im) = match tok.split_once(':') {
        Some((a, b)) => (
            a.parse::<f64>().map_err(|_| bad())?,
            b.parse::<f64>().map_err(|_| bad())?,
        ),
        None => (tok.parse::<f64>().map_err(|_| bad())?, 0.0),
    };
    let z = C64::new(re, im);
    if z.is_finite() {
        Ok(z)
    } else {
        Err(bad())
    }
}

/// Parses rows separated by `;`, entries by whitespace or `,`; each entry is
/// `re` or `re:im`.
pub fn parse_matrix(text: &str) -> std::result::Result<CMatrix, String> {
    let rows: Vec<Vec<C64>> = text
        .split(';')
        .map(|row| {
            row.split([' ', ',', '\t'])
                .filter(|t| !t.is_empty())
                .map(parse_complex)
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<_, _>>()?;
    CMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

/// Parses a state: `ground`, `excited`, or a list of amplitudes.
pub fn parse_state(text: &str, dim: usize) -> Result<CVector> {
    let v = match text {
        "ground" | "g" => CVector::basis(dim, 0),
        "excited" | "e" => CVector::basis(dim, dim - 1),
        _ => {
            let m = parse_matrix(text).map_err(|r| Error::invalid("state", r))?;
            CVector::new(m.as_slice().to_vec())?
        }
    };
    if v.dim() != dim {
        return Err(Error::Dimension {
            op: "state literal",
            expected: dim,
            found: v.dim(),
        });
    }
    Ok(v)
}

/// Resolves an operator name or matrix literal against the model.
pub fn parse_operator(text: &str, model: &ModelSpec) -> Result<CMatrix> {
    let a = model.a_op();
    let two = model.dim() == 2;
    let m = match text {
        "a" => a.clone(),
        "ad" => a.adjoint(),
        "n" => &a.adjoint() * a,
        "id" => CMatrix::identity(model.dim()),
        "sx" if two => two_level::sigma_x(),
        "sy" if two => two_level::sigma_y(),
        "sz" if two => two_level::sigma_z(),
        _ => parse_matrix(text).map_err(|r| Error::invalid("observable", r))?,
    };
    if m.rows() != model.dim() || m.cols() != model.dim() {
        return Err(Error::Dimension {
            op: "observable",
            expected: model.dim(),
            found: m.rows(),
        });
    }
    Ok(m)
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let r = Reader {
        entries: tokenize(text)?,
    };
    let d = RunConfig::default();

    let scenario = match r.get("model", "scenario") {
        None => d.model.scenario,
        Some(e) => match e.value.as_str() {
            "vacuum_drive" => Scenario::VacuumDrive,
            "squeezed" => Scenario::Squeezed,
            "thermal" => Scenario::Thermal,
            "custom" => Scenario::Custom,
            other => return Err(config_err(e.line, format!("unknown scenario '{other}'"))),
        },
    };
    let complex_pair = |re: &str, im: &str| -> Result<Option<C64>> {
        let (a, b) = (r.opt_f64("model", re)?, r.opt_f64("model", im)?);
        Ok(match (a, b) {
            (None, None) => None,
            (a, b) => Some(C64::new(a.unwrap_or(0.0), b.unwrap_or(0.0))),
        })
    };
    let model = ModelConfig {
        scenario,
        gamma: r.f64("model", "gamma", d.model.gamma)?,
        rabi: r.f64("model", "rabi", d.model.rabi)?,
        field: complex_pair("field_re", "field_im")?,
        drive_phase: r.f64("model", "drive_phase", d.model.drive_phase)?,
        detuning: r.f64("model", "detuning", d.model.detuning)?,
        n_photon: r.f64("model", "n_photon", d.model.n_photon)?,
        epsilon: r.f64("model", "epsilon", d.model.epsilon)?,
        phi: r.f64("model", "phi", d.model.phi)?,
        m: complex_pair("m_re", "m_im")?,
        lamb_shift: r.f64("model", "lamb_shift", d.model.lamb_shift)?,
        stark_shift: r.f64("model", "stark_shift", d.model.stark_shift)?,
        h_sys: r.matrix("model", "h_sys")?,
        a_op: r.matrix("model", "a_op")?,
    };

    let task = match r.get("task", "task") {
        None => d.task.task,
        Some(e) => Task::parse(&e.value).ok_or_else(|| config_err(e.line, format!("unknown task '{}'", e.value)))?,
    };
    let task = TaskConfig {
        task,
        observable: r.string("task", "observable", &d.task.observable),
        initial: r.string("task", "initial", &d.task.initial),
        phi0: r.string("task", "phi0", &d.task.phi0),
        psi0: r.string("task", "psi0", &d.task.psi0),
        t_max: r.f64("task", "t_max", d.task.t_max)?,
        dt_out: r.f64("task", "dt_out", d.task.dt_out)?,
        polarization_order: r.count("task", "polarization_order", d.task.polarization_order as u64)? as usize,
        subtract_coherent: r.bool("task", "subtract_coherent", d.task.subtract_coherent)?,
        hann: r.bool("task", "hann", d.task.hann)?,
        pad_to: r.count("task", "pad_to", d.task.pad_to as u64)? as usize,
    };
    let numerics = Numerics {
        dt: r.f64("numerics", "dt", d.numerics.dt)?,
        tau_max: r.f64("numerics", "tau_max", d.numerics.tau_max)?,
        dtau: r.f64("numerics", "dtau", d.numerics.dtau)?,
        n_traj: r.count("numerics", "n_traj", d.numerics.n_traj as u64)? as usize,
        seed: r.count("numerics", "seed", d.numerics.seed)?,
        steady_horizon: r.f64("numerics", "steady_horizon", d.numerics.steady_horizon)?,
    };
    let out = r.get("task", "out").map(|e| PathBuf::from(&e.value));
    let cfg = RunConfig {
        model,
        task,
        numerics,
        out,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks every invariant; errors name the offending parameter.
    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive"))
            }
        };
        positive("dt", n.dt)?;
        positive("tau_max", n.tau_max)?;
        positive("dtau", n.dtau)?;
        positive("steady_horizon", n.steady_horizon)?;
        positive("dt_out", self.task.dt_out)?;
        if n.dtau > n.tau_max {
            return Err(Error::invalid("dtau", "must not exceed tau_max"));
        }
        if !(self.task.t_max >= 0.0) {
            return Err(Error::invalid("t_max", "must be nonnegative"));
        }
        if n.n_traj < 2 {
            return Err(Error::invalid("n_traj", "need at least 2 trajectories"));
        }
        if self.task.polarization_order < 3 {
            return Err(Error::invalid("polarization_order", "must be at least 3"));
        }
        let model = self.model.build()?;
        parse_operator(&self.task.observable, &model)?;
        let steady = self.task.task.needs_steady_state() || self.task.initial == "steady";
        if steady && !(model.gamma() > 0.0) {
            return Err(Error::invalid("gamma", "the stationary ensemble needs gamma > 0"));
        }
        if !matches!(self.task.initial.as_str(), "uniform" | "steady") {
            parse_state(&self.task.initial, model.dim())?;
        }
        if self.task.task == Task::Matelem {
            for s in [&self.task.phi0, &self.task.psi0] {
                if parse_state(s, model.dim())?.norm_sqr() == 0.0 {
                    return Err(Error::invalid("matrix element states", "must be nonzero"));
                }
            }
        }
        Ok(())
    }

    /// Canonical `key = value` listing of the resolved configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let m = &self.model;
        let t = &self.task;
        let n = &self.numerics;
        let mut out: Vec<(String, String)> = vec![
            ("scenario".into(), m.scenario.name().into()),
            ("gamma".into(), m.gamma.to_string()),
            ("rabi".into(), m.rabi.to_string()),
        ];
        if let Some(f) = m.field {
            out.push(("field".into(), format!("{}:{}", f.re, f.im)));
        }
        let m_val = m.squeezing();
        out.extend([
            ("drive_phase".into(), m.drive_phase.to_string()),
            ("detuning".into(), m.detuning.to_string()),
            ("n_photon".into(), m.n_photon.to_string()),
            ("epsilon".into(), m.epsilon.to_string()),
            ("phi".into(), m.phi.to_string()),
            ("m".into(), format!("{}:{}", m_val.re + 0.0, m_val.im + 0.0)),
            ("lamb_shift".into(), m.lamb_shift.to_string()),
            ("stark_shift".into(), m.stark_shift.to_string()),
        ]);
        for (name, op) in [("h_sys", &m.h_sys), ("a_op", &m.a_op)] {
            if let Some(op) = op {
                out.push((name.into(), format_matrix(op)));
            }
        }
        out.extend([
            ("task".into(), t.task.name().into()),
            ("observable".into(), t.observable.clone()),
            ("initial".into(), t.initial.clone()),
            ("phi0".into(), t.phi0.clone()),
            ("psi0".into(), t.psi0.clone()),
            ("t_max".into(), t.t_max.to_string()),
            ("dt_out".into(), t.dt_out.to_string()),
            ("polarization_order".into(), t.polarization_order.to_string()),
            ("subtract_coherent".into(), t.subtract_coherent.to_string()),
            ("hann".into(), t.hann.to_string()),
            ("pad_to".into(), t.pad_to.to_string()),
            ("dt".into(), n.dt.to_string()),
            ("tau_max".into(), n.tau_max.to_string()),
            ("dtau".into(), n.dtau.to_string()),
            ("n_traj".into(), n.n_traj.to_string()),
            ("seed".into(), n.seed.to_string()),
            ("steady_horizon".into(), n.steady_horizon.to_string()),
        ]);
        out
    }
}

fn format_matrix(m: &CMatrix) -> String {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| format!("{}:{}", m[(i, j)].re, m[(i, j)].im))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}
