//! Eigenbasis of the undriven Hamiltonian: bare `|b,n⟩` states plus the Rabi
//! eigenstates `|ε_n⟩`, and the active subset used for propagation.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::drive::BundleTarget;
use crate::error::{Error, Result};
use crate::hilbert::{
    build_atomic_projector, build_create, build_destroy, Level, ModelParams, OperatorMatrix, SpaceConfig,
};
use crate::rabi::RabiSpectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DressedState {
    /// `|b,n⟩`
    Bare(usize),
    /// `|ε_n⟩`
    Rabi(usize),
}

impl DressedState {
    pub fn label(&self) -> String {
        match self {
            DressedState::Bare(n) => format!("b{n}"),
            DressedState::Rabi(n) => format!("eps{n}"),
        }
    }
}

/// Extra Rabi states kept beyond `2(2m+M)`.
pub const DEFAULT_EXTRA_STATES: usize = 8;
/// Bare states are kept up to this far above the highest kept Rabi energy.
pub const DEFAULT_BARE_MARGIN: f64 = 2.0;

/// Which eigenstates enter the propagation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSpace {
    /// The lowest `rabi_states` eigenstates `|ε_0⟩ … |ε_{K−1}⟩`.
    pub rabi_states: usize,
    /// `|b,0⟩ … |b,B−1⟩`.
    pub bare_states: usize,
}

impl ActiveSpace {
    /// Lowest `2(2m+M)+8` Rabi states, plus every bare state up to
    /// [`DEFAULT_BARE_MARGIN`] above the highest of them. Both sets are
    /// closed under energy lowering, so the zero-temperature channels never
    /// leave the space.
    pub fn default_for(spec: &RabiSpectrum, target: &BundleTarget) -> Self {
        let k = (2 * target.final_photons() + DEFAULT_EXTRA_STATES).min(spec.dim());
        Self::with_rabi_states(spec, k, DEFAULT_BARE_MARGIN)
    }

    pub fn with_rabi_states(spec: &RabiSpectrum, rabi_states: usize, margin: f64) -> Self {
        let rabi_states = rabi_states.min(spec.dim());
        let e_max = spec.energy(rabi_states - 1) + margin * spec.params.omega_c;
        let p = &spec.params;
        let bare = ((e_max - p.omega_b) / p.omega_c).floor() as i64 + 1;
        Self { rabi_states, bare_states: (bare.max(1) as usize).min(spec.n_fock) }
    }

    /// Every state of the truncated space.
    pub fn full(spec: &RabiSpectrum) -> Self {
        Self { rabi_states: spec.dim(), bare_states: spec.n_fock }
    }

    pub fn dim(&self) -> usize {
        self.rabi_states + self.bare_states
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DressedBasis {
    /// `|b,0⟩ … |b,B−1⟩` followed by `|ε_0⟩ … |ε_{K−1}⟩`.
    pub states: Vec<DressedState>,
    pub energies: Vec<f64>,
    /// Columns are the states in the product basis of [`SpaceConfig`].
    pub transform: DMatrix<f64>,
    pub space: SpaceConfig,
    pub active: ActiveSpace,
}

impl DressedBasis {
    pub fn new(spec: &RabiSpectrum, p: &ModelParams, cfg: &SpaceConfig, active: ActiveSpace) -> Result<Self> {
        if cfg.n_fock != spec.n_fock {
            return Err(Error::InvalidParams(format!(
                "spectrum truncation {} does not match space truncation {}",
                spec.n_fock, cfg.n_fock
            )));
        }
        if active.rabi_states > spec.dim() || active.bare_states > cfg.n_fock || active.rabi_states == 0 {
            return Err(Error::InvalidParams(format!("active space {active:?} exceeds the truncated space")));
        }
        let dim = active.dim();
        let mut states = Vec::with_capacity(dim);
        let mut energies = Vec::with_capacity(dim);
        let mut transform = DMatrix::zeros(cfg.dim(), dim);
        for n in 0..active.bare_states {
            transform[(cfg.index(Level::B, n), states.len())] = 1.0;
            states.push(DressedState::Bare(n));
            energies.push(p.omega_b + n as f64 * p.omega_c);
        }
        for k in 0..active.rabi_states {
            let col = states.len();
            for m in 0..cfg.n_fock {
                transform[(cfg.index(Level::G, m), col)] = spec.c(k, m);
                transform[(cfg.index(Level::E, m), col)] = spec.d(k, m);
            }
            states.push(DressedState::Rabi(k));
            energies.push(spec.energy(k));
        }
        Ok(Self { states, energies, transform, space: *cfg, active })
    }

    /// Every eigenstate of the truncated space.
    pub fn full(spec: &RabiSpectrum, p: &ModelParams, cfg: &SpaceConfig) -> Result<Self> {
        Self::new(spec, p, cfg, ActiveSpace::full(spec))
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: DressedState) -> Option<usize> {
        self.states.iter().position(|s| *s == state)
    }

    pub fn bare(&self, n: usize) -> Option<usize> {
        self.index_of(DressedState::Bare(n))
    }

    pub fn rabi(&self, n: usize) -> Option<usize> {
        self.index_of(DressedState::Rabi(n))
    }

    pub fn labels(&self) -> Vec<String> {
        self.states.iter().map(DressedState::label).collect()
    }

    /// `⟨ψ_i|O|ψ_j⟩` for a real-valued product-basis operator.
    pub fn matrix_elements(&self, op: &OperatorMatrix) -> DMatrix<f64> {
        let dense = op.to_dense().map(|z| z.re);
        self.transform.transpose() * dense * &self.transform
    }

    /// Product-basis vector → dressed amplitudes.
    pub fn to_dressed(&self, product: &[C64]) -> Vec<C64> {
        (0..self.dim())
            .map(|j| self.transform.column(j).iter().zip(product).map(|(c, v)| v * *c).sum())
            .collect()
    }

    /// Dressed amplitudes → product-basis vector.
    pub fn to_product(&self, dressed: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.space.dim()];
        for (j, a) in dressed.iter().enumerate() {
            for (i, c) in self.transform.column(j).iter().enumerate() {
                out[i] += a * *c;
            }
        }
        out
    }

    pub fn basis_vector(&self, index: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[index] = C64::new(1.0, 0.0);
        v
    }
}

/// The three dissipation channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Cavity, system operator `a + a†`.
    A,
    /// Atomic `|g⟩⟨e| + |e⟩⟨g|`.
    Ge,
    /// Atomic `|b⟩⟨g| + |g⟩⟨b|`.
    Bg,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [ChannelKind::A, ChannelKind::Ge, ChannelKind::Bg];

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::A => "a",
            ChannelKind::Ge => "ge",
            ChannelKind::Bg => "bg",
        }
    }

    pub fn system_operator(self, cfg: &SpaceConfig) -> OperatorMatrix {
        match self {
            ChannelKind::A => build_destroy(cfg).add(&build_create(cfg)),
            ChannelKind::Ge => {
                build_atomic_projector(Level::E, Level::G, cfg).add(&build_atomic_projector(Level::G, Level::E, cfg))
            }
            ChannelKind::Bg => {
                build_atomic_projector(Level::G, Level::B, cfg).add(&build_atomic_projector(Level::B, Level::G, cfg))
            }
        }
    }
}

/// Decay rates `κ_u` per channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub a: f64,
    pub ge: f64,
    pub bg: f64,
}

impl DecayRates {
    pub fn uniform(kappa: f64) -> Self {
        Self { a: kappa, ge: kappa, bg: kappa }
    }

    pub fn get(&self, kind: ChannelKind) -> f64 {
        match kind {
            ChannelKind::A => self.a,
            ChannelKind::Ge => self.ge,
            ChannelKind::Bg => self.bg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in ChannelKind::ALL {
            let k = self.get(kind);
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::InvalidParams(format!("decay rate kappa_{} must be >= 0 (got {k})", kind.name())));
            }
        }
        Ok(())
    }
}

/// Jump `|ψ_to⟩⟨ψ_from|` with rate `Γ = κ_u |⟨ψ_to|O_u|ψ_from⟩|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpChannel {
    pub kind: ChannelKind,
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    /// Phase multiplying the jump operator; it drops out of every dissipator.
    pub phase: f64,
}

/// Below this rate a channel is dropped.
pub const MIN_RATE: f64 = 1e-18;

/// All energy-lowering channels between active states.
pub fn build_channels(basis: &DressedBasis, kappa: &DecayRates) -> Vec<JumpChannel> {
    let mut out = Vec::new();
    for kind in ChannelKind::ALL {
        let k = kappa.get(kind);
        if k == 0.0 {
            continue;
        }
        let elements = basis.matrix_elements(&kind.system_operator(&basis.space));
        for from in 0..basis.dim() {
            for to in 0..basis.dim() {
                if basis.energies[from] <= basis.energies[to] {
                    continue;
                }
                let rate = k * elements[(to, from)].powi(2);
                if rate > MIN_RATE {
                    out.push(JumpChannel { kind, from, to, rate, phase: 0.0 });
                }
            }
        }
    }
    out
}
