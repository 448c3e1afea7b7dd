//! One-stop assembly of spectrum, pulses, active basis, Hamiltonian and
//! jump channels from a flat parameter set.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::drive::{solve_carriers, BundleTarget, PulseTrain};
use crate::dynamics::{
    build_channels, ActiveSpace, DecayRates, DensityMatrix, DressedBasis, InteractionHamiltonian, JumpChannel,
    DEFAULT_BARE_MARGIN,
};
use crate::effective::LambdaSystem;
use crate::error::{Error, Result};
use crate::hilbert::{ModelParams, SpaceConfig};
use crate::rabi::{diagonalize, RabiSpectrum};

/// Photon numbers kept above the target in the Fock truncation check.
pub const FOCK_MARGIN: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub model: ModelParams,
    pub n_fock: usize,
    pub target: BundleTarget,
    /// Peak pump amplitude `Ω_1`.
    pub pump_amplitude: f64,
    /// `Ω_2 / Ω_1`.
    pub amplitude_ratio: f64,
    pub pump_center: f64,
    pub stokes_center: f64,
    pub width: f64,
    pub period: f64,
    pub n_cycles: usize,
    pub kappa: DecayRates,
    /// Overrides the default number of retained Rabi eigenstates.
    pub rabi_states: Option<usize>,
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.kappa.validate()?;
        self.target.validate(self.n_fock, FOCK_MARGIN)?;
        if !(self.pump_amplitude >= 0.0) || !(self.amplitude_ratio >= 0.0) {
            return Err(Error::InvalidParams("pulse amplitudes must be >= 0".into()));
        }
        if self.n_cycles == 0 {
            return Err(Error::InvalidParams("at least one pulse cycle is required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub params: ExperimentParams,
    pub space: SpaceConfig,
    pub spectrum: RabiSpectrum,
    pub pulses: PulseTrain,
    pub basis: DressedBasis,
    pub hamiltonian: InteractionHamiltonian,
    pub channels: Vec<JumpChannel>,
}

impl Experiment {
    pub fn build(params: &ExperimentParams) -> Result<Self> {
        params.validate()?;
        let space = SpaceConfig::new(params.n_fock)?;
        let spectrum = diagonalize(&params.model, &space)?;
        let (w1, w2) = solve_carriers(&spectrum, &params.model, &params.target)?;
        let pulses = PulseTrain {
            amp_peak: [params.pump_amplitude, params.pump_amplitude * params.amplitude_ratio],
            center_first: [params.pump_center, params.stokes_center],
            width: params.width,
            period: params.period,
            n_cycles: params.n_cycles,
            carriers: [w1, w2],
        };
        pulses.validate()?;
        let active = match params.rabi_states {
            Some(k) => ActiveSpace::with_rabi_states(&spectrum, k, DEFAULT_BARE_MARGIN),
            None => ActiveSpace::default_for(&spectrum, &params.target),
        };
        if active.rabi_states <= params.target.state || active.bare_states <= params.target.final_photons() {
            return Err(Error::InvalidParams(format!("active space {active:?} misses the addressed states")));
        }
        let basis = DressedBasis::new(&spectrum, &params.model, &space, active)?;
        let hamiltonian = InteractionHamiltonian::new(&basis, &pulses);
        let channels = build_channels(&basis, &params.kappa);
        Ok(Self { params: params.clone(), space, spectrum, pulses, basis, hamiltonian, channels })
    }

    pub fn target(&self) -> &BundleTarget {
        &self.params.target
    }

    pub fn labels(&self) -> Vec<String> {
        self.basis.labels()
    }

    /// Active-space index of `|b,n⟩`.
    pub fn bare(&self, n: usize) -> usize {
        self.basis.bare(n).expect("bare state outside the active space")
    }

    /// Active-space index of `|ε_n⟩`.
    pub fn rabi(&self, n: usize) -> usize {
        self.basis.rabi(n).expect("Rabi state outside the active space")
    }

    pub fn initial_index(&self) -> usize {
        self.bare(self.target().start_photons)
    }

    pub fn final_index(&self) -> usize {
        self.bare(self.target().final_photons())
    }

    pub fn intermediate_index(&self) -> usize {
        self.rabi(self.target().state)
    }

    /// `|b,2m+M+2⟩`, the first state beyond the target, if retained.
    pub fn next_manifold_index(&self) -> Option<usize> {
        self.basis.bare(self.target().final_photons() + 2)
    }

    pub fn initial_state(&self) -> Vec<C64> {
        self.basis.basis_vector(self.initial_index())
    }

    pub fn initial_density(&self) -> DensityMatrix {
        DensityMatrix::basis_state(self.basis.dim(), self.initial_index(), 0.0)
    }

    pub fn lambda_system(&self) -> Result<LambdaSystem> {
        LambdaSystem::new(&self.spectrum, &self.pulses, self.target())
    }

    /// End of the pulse pair of cycle `k`: both envelopes have fallen by
    /// `e^{-16}` from their peaks.
    pub fn pulse_pair_end(&self, cycle: usize) -> f64 {
        let last = self.pulses.center_first[0].max(self.pulses.center_first[1]);
        last + 4.0 * self.pulses.width + cycle as f64 * self.pulses.period
    }

    /// Same experiment with the truncation scaled by `factor` and the
    /// active space enlarged accordingly.
    pub fn scaled_params(&self, factor: f64) -> ExperimentParams {
        let mut p = self.params.clone();
        p.n_fock = (self.params.n_fock as f64 * factor).ceil() as usize;
        p.rabi_states = Some((self.basis.active.rabi_states as f64 * factor).ceil() as usize);
        p
    }
}
