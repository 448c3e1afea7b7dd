//! Drive Hamiltonian in the interaction picture of the undriven system.

use num_complex::Complex64 as C64;

use super::basis::{DressedBasis, DressedState};
use crate::drive::PulseTrain;
use crate::effective::LambdaSystem;
use crate::hilbert::{build_drive_coupling, OperatorMatrix};

/// Couplings smaller than this are treated as exact (parity) zeros.
pub const COUPLING_FLOOR: f64 = 1e-14;

/// Anything that can apply a Hamiltonian `H(t)` to a state vector.
pub trait HamiltonianSource: Sync {
    fn dim(&self) -> usize;
    /// `out = H(t) ψ`
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);
}

/// `H_I(t) = d(t) Σ ⟨ε_n|V|b,m⟩ e^{i(ε_n − E_{b,m})t} |ε_n⟩⟨b,m| + h.c.` with
/// `d(t) = Σ_l Ω_l(t) cos(ω_l t)`; no rotating-wave approximation.
#[derive(Clone, Debug)]
pub struct InteractionHamiltonian {
    pub pulses: PulseTrain,
    pub energies: Vec<f64>,
    /// `(row ε_n, column b_m, ⟨ε_n|V|b,m⟩)` in active-space indices.
    pub couplings: Vec<(usize, usize, f64)>,
}

impl InteractionHamiltonian {
    pub fn new(basis: &DressedBasis, pulses: &PulseTrain) -> Self {
        let v = basis.matrix_elements(&build_drive_coupling(&basis.space));
        let mut couplings = Vec::new();
        for (r, sr) in basis.states.iter().enumerate() {
            if !matches!(sr, DressedState::Rabi(_)) {
                continue;
            }
            for (b, sb) in basis.states.iter().enumerate() {
                if matches!(sb, DressedState::Bare(_)) && v[(r, b)].abs() > COUPLING_FLOOR {
                    couplings.push((r, b, v[(r, b)]));
                }
            }
        }
        Self { pulses: pulses.clone(), energies: basis.energies.clone(), couplings }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Upper-triangle entries `H_{ε,b}(t)`, one per coupling; empty when the
    /// drive vanishes.
    pub fn entries(&self, t: f64, out: &mut Vec<C64>) {
        out.clear();
        let d = self.pulses.field_value(t);
        if d == 0.0 {
            return;
        }
        // one e^{iE t} per state instead of one per coupling
        PHASES.with(|p| {
            let mut phases = p.borrow_mut();
            phases.clear();
            phases.extend(self.energies.iter().map(|e| C64::from_polar(1.0, e * t)));
            out.extend(self.couplings.iter().map(|&(r, b, c)| phases[r] * phases[b].conj() * (d * c)));
        });
    }

    pub fn matrix(&self, t: f64) -> OperatorMatrix {
        let mut entries = Vec::new();
        self.entries(t, &mut entries);
        let mut triplets = Vec::with_capacity(2 * entries.len());
        for (&(r, b, _), h) in self.couplings.iter().zip(&entries) {
            triplets.push((r, b, *h));
            triplets.push((b, r, h.conj()));
        }
        OperatorMatrix::from_triplets(self.dim(), &triplets)
    }
}

/// `H_I(t)` as an explicit matrix on the active space.
pub fn build_interaction_hamiltonian(basis: &DressedBasis, pulses: &PulseTrain, t: f64) -> OperatorMatrix {
    InteractionHamiltonian::new(basis, pulses).matrix(t)
}

thread_local! {
    static PHASES: std::cell::RefCell<Vec<C64>> = const { std::cell::RefCell::new(Vec::new()) };
    static SCRATCH: std::cell::RefCell<Vec<C64>> = const { std::cell::RefCell::new(Vec::new()) };
}

impl HamiltonianSource for InteractionHamiltonian {
    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        SCRATCH.with(|s| {
            let mut h = s.borrow_mut();
            self.entries(t, &mut h);
            for (&(r, b, _), hk) in self.couplings.iter().zip(h.iter()) {
                out[r] += hk * psi[b];
                out[b] += hk.conj() * psi[r];
            }
        });
    }
}

impl HamiltonianSource for LambdaSystem {
    fn dim(&self) -> usize {
        3
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let h = self.hamiltonian_at(t);
        for i in 0..3 {
            out[i] = (0..3).map(|j| psi[j] * h[(i, j)]).sum();
        }
    }
}

/// Dense Hamiltonian on any basis, for small reference problems in tests
/// and the lab-frame comparison.
pub struct DenseHamiltonian<F: Fn(f64) -> OperatorMatrix + Sync> {
    pub dim: usize,
    pub at: F,
}

impl<F: Fn(f64) -> OperatorMatrix + Sync> HamiltonianSource for DenseHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.copy_from_slice(&(self.at)(t).apply(psi));
    }
}
