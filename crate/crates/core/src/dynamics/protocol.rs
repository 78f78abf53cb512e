use serde::{Deserialize, Serialize};

use super::bath::BathParams;
use super::integrator::{evolve, StepPolicy};
use super::state::DensityMatrix;
use super::trajectory::Trajectory;
use crate::control::{RampKind, RampSchedule, TransitionSet};
use crate::error::{Error, Result};
use crate::spectral::{build_basis, BasisPolicy, EigenSystem, PotentialParams, ScaledBasis};
use crate::units::UnitSystem;

/// ζ of the bare harmonic trap, where the protocol starts.
pub const ZETA_HARMONIC: f64 = -1.0;

/// How the softening stage (−1 → ζ_c) is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Mode {
    /// Integrate the master equation along the ramp.
    Dynamic,
    /// Ideal adiabatic transport: level populations carry over unchanged.
    Adiabatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub zeta_c: f64,
    pub zeta_f: f64,
    /// Stage-2 duration, 1/ω.
    pub dt1: f64,
    /// Stage-3 duration, 1/ω.
    pub dt2: f64,
    pub stage2_ramp: RampKind,
    pub stage3_ramp: RampKind,
    pub stage2_mode: Stage2Mode,
    pub transitions: TransitionSet,
    pub initial_occupation: f64,
    /// `None` runs the closed (unitary) system.
    pub bath: Option<BathParams>,
    pub xi: f64,
    pub unit: UnitSystem,
    pub basis: BasisPolicy,
    pub stepping: StepPolicy,
    pub stage2_refresh_stride: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            zeta_c: -2.5e-4,
            zeta_f: 3e-4,
            dt1: 200.0,
            dt2: 110.0,
            stage2_ramp: RampKind::GapAdapted,
            stage3_ramp: RampKind::Sine,
            stage2_mode: Stage2Mode::Dynamic,
            transitions: TransitionSet::up_to(4),
            initial_occupation: 0.0,
            bath: Some(BathParams::default()),
            xi: 0.0,
            unit: UnitSystem::default(),
            basis: BasisPolicy::default(),
            stepping: StepPolicy::default(),
            stage2_refresh_stride: 10,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta_c < 0.0 && self.zeta_c > ZETA_HARMONIC) {
            return Err(Error::invalid(
                "zeta_c",
                format!("must lie in (-1, 0), got {}", self.zeta_c),
            ));
        }
        if !(self.zeta_f > 0.0 && self.zeta_f.is_finite()) {
            return Err(Error::invalid("zeta_f", format!("must be positive, got {}", self.zeta_f)));
        }
        for (name, v) in [("dt1", self.dt1), ("dt2", self.dt2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.initial_occupation >= 0.0 && self.initial_occupation.is_finite()) {
            return Err(Error::invalid(
                "initial_occupation",
                format!("must be non-negative, got {}", self.initial_occupation),
            ));
        }
        if self.stage2_refresh_stride == 0 {
            return Err(Error::invalid("stage2_refresh_stride", "must be positive"));
        }
        if let Some(b) = &self.bath {
            b.validate()?;
        }
        self.basis.validate()?;
        self.stepping.validate()?;
        self.potential(ZETA_HARMONIC).validate()
    }

    pub fn gamma(&self) -> f64 {
        self.unit.gamma()
    }

    pub fn potential(&self, zeta: f64) -> PotentialParams {
        PotentialParams {
            zeta,
            gamma: self.gamma(),
            xi: self.xi,
        }
    }

    /// Bath with this config's unit system.
    fn bath(&self) -> Option<BathParams> {
        self.bath.map(|b| BathParams { unit: self.unit, ..b })
    }

    pub fn stage2_schedule(&self) -> Result<RampSchedule> {
        RampSchedule::new(self.stage2_ramp, ZETA_HARMONIC, self.zeta_c, self.dt1, 0.0)
    }

    pub fn stage3_schedule(&self) -> Result<RampSchedule> {
        RampSchedule::new(self.stage3_ramp, self.zeta_c, self.zeta_f, self.dt2, self.dt1)
    }

    pub fn eigensystem(&self, zeta: f64) -> Result<EigenSystem> {
        let basis = build_basis(zeta, &self.basis)?;
        EigenSystem::solve(&self.potential(zeta), &basis)
    }
}

/// Gibbs state of the levels of `eig` with harmonic mean occupation N̄₀.
///
/// The inverse temperature is ln(1 + 1/N̄₀) per unit of ħω of level spacing,
/// so at ζ = −1 the ground population is 1/(1 + N̄₀).
pub fn initial_thermal_state(eig: &EigenSystem, occupation: f64) -> Result<DensityMatrix> {
    if !(occupation >= 0.0 && occupation.is_finite()) {
        return Err(Error::invalid(
            "occupation",
            format!("must be non-negative, got {occupation}"),
        ));
    }
    let dim = eig.dim();
    let mut pops = vec![0.0; dim];
    if occupation == 0.0 {
        pops[0] = 1.0;
    } else {
        let beta = (1.0 + 1.0 / occupation).ln();
        let e0 = eig.energies[0];
        for (n, p) in pops.iter_mut().enumerate() {
            *p = (-beta * (eig.energies[n] - e0)).exp();
        }
        let z: f64 = pops.iter().sum();
        pops.iter_mut().for_each(|p| *p /= z);
    }
    DensityMatrix::from_populations(eig, &pops)
}

/// State at the end of the softening stage.
#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub state: DensityMatrix,
    pub basis: ScaledBasis,
    /// `None` for adiabatic transport.
    pub trajectory: Option<Trajectory>,
}

pub fn run_stage2(config: &ProtocolConfig) -> Result<Stage2Output> {
    config.validate()?;
    let start = config.eigensystem(ZETA_HARMONIC)?;
    let rho1 = initial_thermal_state(&start, config.initial_occupation)?;
    match config.stage2_mode {
        Stage2Mode::Adiabatic => {
            let end = config.eigensystem(config.zeta_c)?;
            let pops = crate::analysis::populations(&rho1, &start)?;
            Ok(Stage2Output {
                state: DensityMatrix::from_populations(&end, &pops)?,
                basis: end.basis,
                trajectory: None,
            })
        }
        Stage2Mode::Dynamic => {
            let stepping = StepPolicy {
                refresh_stride: config.stage2_refresh_stride,
                ..config.stepping
            };
            let traj = evolve(
                &rho1,
                &config.stage2_schedule()?,
                &TransitionSet::empty(),
                config.bath().as_ref(),
                &config.potential(ZETA_HARMONIC),
                &config.basis,
                &stepping,
            )?;
            Ok(Stage2Output {
                state: traj.final_state.clone(),
                basis: traj.final_basis,
                trajectory: Some(traj),
            })
        }
    }
}

/// Ramp into the double well with counterdiabatic driving, from `stage2`.
pub fn run_stage3(config: &ProtocolConfig, stage2: &Stage2Output) -> Result<Trajectory> {
    config.validate()?;
    let expected = build_basis(config.zeta_c, &config.basis)?;
    if !stage2.basis.same_frame(&expected) {
        return Err(Error::BasisMismatch {
            basis_zeta: stage2.basis.zeta_ref,
            zeta: config.zeta_c,
        });
    }
    evolve(
        &stage2.state,
        &config.stage3_schedule()?,
        &config.transitions,
        config.bath().as_ref(),
        &config.potential(config.zeta_c),
        &config.basis,
        &config.stepping,
    )
}

/// Result of the full preparation.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub trajectory: Trajectory,
    /// Fidelity to the ground state at ζ_c after stage 2.
    pub stage2_fidelity: f64,
    /// Fidelity to the ground state at ζ_f.
    pub final_fidelity: f64,
}

/// Thermal start, then the softening ramp, then the double-well ramp.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolOutcome> {
    let stage2 = run_stage2(config)?;
    let stage2_fidelity = match &stage2.trajectory {
        Some(t) => t.final_fidelity(),
        None => {
            let eig = config.eigensystem(config.zeta_c)?;
            stage2.state.expectation_real(&eig.state(0).into_owned()).max(0.0).sqrt()
        }
    };
    let stage3 = run_stage3(config, &stage2)?;
    let final_fidelity = stage3.final_fidelity();
    let trajectory = match stage2.trajectory {
        Some(mut t) => {
            t.extend(stage3);
            t
        }
        None => stage3,
    };
    Ok(ProtocolOutcome {
        trajectory,
        stage2_fidelity,
        final_fidelity,
    })
}

/// Final fidelities at the configured step and at half of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub fidelity: f64,
    pub fidelity_half_step: f64,
    pub difference: f64,
}

/// Re-runs stage 3 from `stage2` with the step halved.
pub fn convergence_check(config: &ProtocolConfig, stage2: &Stage2Output) -> Result<ConvergenceReport> {
    let coarse = run_stage3(config, stage2)?.final_fidelity();
    let fine_config = ProtocolConfig {
        stepping: config.stepping.halved(),
        ..config.clone()
    };
    let fine = run_stage3(&fine_config, stage2)?.final_fidelity();
    Ok(ConvergenceReport {
        fidelity: coarse,
        fidelity_half_step: fine,
        difference: (coarse - fine).abs(),
    })
}
