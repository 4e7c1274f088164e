//! Physical model: environment correlation matrix, jump channels and the
//! effective (non-Hermitian) Hamiltonian.
//!
//! All operators are expressed in the frame rotating at the drive frequency,
//! so the channels and `H_eff` are time independent. The single coupling
//! operator `A` enters the environment correlation matrix through the pair
//! `(A₁, A₂) = (A, A†)`.

use num_complex::Complex64 as C64;

use crate::linalg::{eig_herm2, two_level, CMatrix, Herm2};
use crate::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// Slack allowed in the positivity constraint `|M|² ≤ N(N+ε)`.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Markovian bath constants.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentParams {
    /// Decay rate γ. Zero describes a closed system.
    pub gamma: f64,
    /// Mean photon number N.
    pub n_photon: f64,
    /// Squeezing parameter M.
    pub m: C64,
    /// Fraction of the solid angle that is squeezed.
    pub epsilon: f64,
    /// Lamb shift S₀.
    pub lamb_shift: f64,
    /// Stark shift S₁.
    pub stark_shift: f64,
}

impl EnvironmentParams {
    pub fn vacuum(gamma: f64) -> Self {
        Self {
            gamma,
            n_photon: 0.0,
            m: C64::new(0.0, 0.0),
            epsilon: 1.0,
            lamb_shift: 0.0,
            stark_shift: 0.0,
        }
    }

    pub fn thermal(gamma: f64, n_photon: f64) -> Self {
        Self {
            n_photon,
            ..Self::vacuum(gamma)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma,
            self.n_photon,
            self.epsilon,
            self.lamb_shift,
            self.stark_shift,
        ]
        .iter()
        .all(|x| x.is_finite())
            && self.m.is_finite();
        if !finite {
            return Err(Error::invalid("environment", "parameters must be finite"));
        }
        if self.gamma < 0.0 {
            return Err(Error::invalid("gamma", "decay rate must be non-negative"));
        }
        if self.n_photon < 0.0 {
            return Err(Error::invalid("n_photon", "mean photon number must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
        }
        let bound = self.n_photon * (self.n_photon + self.epsilon);
        if self.m.norm_sqr() > bound + POSITIVITY_TOL {
            return Err(Error::invalid(
                "squeezing M",
                format!(
                    "positivity constraint |M|^2 <= N(N+epsilon) violated: {} > {}",
                    self.m.norm_sqr(),
                    bound
                ),
            ));
        }
        Ok(())
    }
}

/// Coherent drive in the rotating frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveParams {
    /// Field amplitude 𝓔; the effective field is `amplitude·e^{i·phase}`.
    pub amplitude: C64,
    /// ω_s − ω_L.
    pub detuning: f64,
    /// φ_L.
    pub phase: f64,
}

impl DriveParams {
    pub fn none() -> Self {
        Self {
            amplitude: C64::new(0.0, 0.0),
            detuning: 0.0,
            phase: 0.0,
        }
    }

    /// Resonant drive with Rabi frequency Ω, i.e. |𝓔| = Ω/2.
    pub fn resonant(rabi_frequency: f64) -> Self {
        Self {
            amplitude: C64::new(rabi_frequency / 2.0, 0.0),
            ..Self::none()
        }
    }

    pub fn field(&self) -> C64 {
        self.amplitude * C64::from_polar(1.0, self.phase)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.detuning.is_finite() && self.phase.is_finite()) {
            return Err(Error::invalid("drive", "parameters must be finite"));
        }
        Ok(())
    }
}

/// Frame in which operators are expressed: rotation frequency relative to
/// the bare system frequency. `h_sys − rotation_frequency·A†A` is the
/// frame Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub rotation_frequency: f64,
}

impl Frame {
    /// Frame co-rotating with the drive: ω_L − ω_s = −detuning.
    pub fn of_drive(drive: &DriveParams) -> Self {
        Self {
            rotation_frequency: -drive.detuning,
        }
    }
}

/// A jump channel with rate `γ·lambda` and jump operator `op`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpChannel {
    pub lambda: f64,
    pub op: CMatrix,
}

/// Fully assembled model.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    dim: usize,
    h_sys: CMatrix,
    a_op: CMatrix,
    env: EnvironmentParams,
    drive: DriveParams,
    frame: Frame,
    channels: Vec<JumpChannel>,
    h_coherent: CMatrix,
    h_eff: CMatrix,
}

impl ModelSpec {
    /// Assembles the model. `h_sys` is the system Hamiltonian relative to the
    /// bare transition frequency (zero for a two-level atom); the drive
    /// detuning is added through the rotating frame.
    pub fn new(h_sys: CMatrix, a_op: CMatrix, env: EnvironmentParams, drive: DriveParams) -> Result<Self> {
        env.validate()?;
        drive.validate()?;
        let dim = h_sys.rows();
        if !h_sys.is_square() {
            return Err(Error::invalid("h_sys", "must be square"));
        }
        if !h_sys.is_hermitian(1e-12 * h_sys.max_abs().max(1.0)) {
            return Err(Error::invalid("h_sys", "must be Hermitian"));
        }
        if a_op.rows() != dim || a_op.cols() != dim {
            return Err(Error::Dimension {
                op: "coupling operator",
                expected: dim,
                found: a_op.rows(),
            });
        }
        if env.m != C64::new(0.0, 0.0) && drive.detuning != 0.0 {
            return Err(Error::invalid(
                "detuning",
                "detuned drive is only supported for M = 0 (squeezing phase would rotate)",
            ));
        }

        let frame = Frame::of_drive(&drive);
        let gamma_matrix = build_gamma(&env, 0.0)?;
        let channels = build_channels(&gamma_matrix, &a_op);
        let ad = a_op.adjoint();
        let n_op = &ad * &a_op;
        let h_frame = &h_sys - &n_op.scale_real(frame.rotation_frequency);
        let h_coherent = &(&h_frame + &drive_hamiltonian(&a_op, drive.field()))
            + &lamb_stark_hamiltonian(&a_op, env.lamb_shift, env.stark_shift);
        let h_eff = &h_coherent + &damping_hamiltonian(env.gamma, &channels);

        Ok(Self {
            dim,
            h_sys,
            a_op,
            env,
            drive,
            frame,
            channels,
            h_coherent,
            h_eff,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_sys(&self) -> &CMatrix {
        &self.h_sys
    }

    pub fn a_op(&self) -> &CMatrix {
        &self.a_op
    }

    pub fn env(&self) -> &EnvironmentParams {
        &self.env
    }

    pub fn gamma(&self) -> f64 {
        self.env.gamma
    }

    pub fn drive(&self) -> &DriveParams {
        &self.drive
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    /// Hermitian part of the generator: frame Hamiltonian, drive and shifts.
    pub fn h_coherent(&self) -> &CMatrix {
        &self.h_coherent
    }

    pub fn h_eff(&self) -> &CMatrix {
        &self.h_eff
    }

    /// `γ·λ_i` for every channel.
    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.channels.iter().map(|c| self.env.gamma * c.lambda)
    }
}

/// Environment correlation matrix divided by `γτ`:
/// `[[N+1, −M·e^{iφ}], [−M*·e^{−iφ}, N]]`.
///
/// `phase` carries the explicit `2ω_s t₀` rotation outside the rotating frame
/// and is zero for every model built here.
pub fn build_gamma(env: &EnvironmentParams, phase: f64) -> Result<Herm2> {
    env.validate()?;
    Ok(Herm2::new(
        env.n_photon + 1.0,
        env.n_photon,
        -env.m * C64::from_polar(1.0, phase),
    ))
}

/// Diagonalizes the correlation matrix and forms `J_i = Σ_k μ*_{ki} A_k`
/// with `(A₁, A₂) = (A, A†)`, sorted by descending rate.
pub fn build_channels(g: &Herm2, a_op: &CMatrix) -> Vec<JumpChannel> {
    let eig = eig_herm2(g);
    let ad = a_op.adjoint();
    (0..2)
        .map(|i| {
            let mu = &eig.vectors[i];
            let op = &a_op.scale(mu[0].conj()) + &ad.scale(mu[1].conj());
            JumpChannel {
                // Roundoff can push a zero eigenvalue slightly negative.
                lambda: eig.values[i].max(0.0),
                op,
            }
        })
        .collect()
}

/// `H_Dr = i𝓔A† − i𝓔*A`.
pub fn drive_hamiltonian(a_op: &CMatrix, field: C64) -> CMatrix {
    &a_op.adjoint().scale(I * field) - &a_op.scale(I * field.conj())
}

/// `H_LS = −(S₀+S₁)A†A + S₁AA†`.
pub fn lamb_stark_hamiltonian(a_op: &CMatrix, lamb: f64, stark: f64) -> CMatrix {
    let ad = a_op.adjoint();
    &(&ad * a_op).scale_real(-(lamb + stark)) + &(a_op * &ad).scale_real(stark)
}

/// `H_D = −(iγ/2) Σ λ_i J_i†J_i`.
pub fn damping_hamiltonian(gamma: f64, channels: &[JumpChannel]) -> CMatrix {
    let dim = channels.first().map_or(1, |c| c.op.rows());
    let mut sum = CMatrix::zeros(dim, dim);
    for ch in channels {
        sum += &(&ch.op.adjoint() * &ch.op).scale_real(ch.lambda);
    }
    sum.scale(C64::new(0.0, -gamma / 2.0))
}

/// `h_eff = h_frame + H_Dr + H_LS + H_D` from already built channels.
pub fn build_h_eff(
    h_frame: &CMatrix,
    a_op: &CMatrix,
    env: &EnvironmentParams,
    field: C64,
    channels: &[JumpChannel],
) -> CMatrix {
    let coherent =
        &(h_frame + &drive_hamiltonian(a_op, field)) + &lamb_stark_hamiltonian(a_op, env.lamb_shift, env.stark_shift);
    &coherent + &damping_hamiltonian(env.gamma, channels)
}

/// Two-level atom in the vacuum, driven with Rabi frequency Ω.
pub fn scenario_vacuum_drive(gamma: f64, rabi_frequency: f64, detuning: f64) -> Result<ModelSpec> {
    let drive = DriveParams {
        detuning,
        ..DriveParams::resonant(rabi_frequency)
    };
    two_level_model(EnvironmentParams::vacuum(gamma), drive)
}

/// Two-level atom in a squeezed vacuum with `N` photons, efficiency `ε` and
/// relative phase `φ = 2(φ_s − φ_L)`, driven on resonance.
///
/// The drive phase is fixed to zero so that `φ_s = φ/2` and
/// `M = √(N(N+ε))·e^{−iφ}`.
pub fn scenario_squeezed(
    gamma: f64,
    n_photon: f64,
    epsilon: f64,
    phi_rel: f64,
    rabi_frequency: f64,
) -> Result<ModelSpec> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
    }
    if !(n_photon >= 0.0) {
        return Err(Error::invalid("n_photon", "mean photon number must be non-negative"));
    }
    let m = C64::from_polar((n_photon * (n_photon + epsilon)).sqrt(), -phi_rel);
    let env = EnvironmentParams {
        m,
        epsilon,
        ..EnvironmentParams::thermal(gamma, n_photon)
    };
    two_level_model(env, DriveParams::resonant(rabi_frequency))
}

/// Two-level atom coupled to a thermal bath with `N` photons.
pub fn scenario_thermal(gamma: f64, n_photon: f64, drive: DriveParams) -> Result<ModelSpec> {
    two_level_model(EnvironmentParams::thermal(gamma, n_photon), drive)
}

fn two_level_model(env: EnvironmentParams, drive: DriveParams) -> Result<ModelSpec> {
    ModelSpec::new(CMatrix::zeros(2, 2), two_level::sigma_minus(), env, drive)
}
