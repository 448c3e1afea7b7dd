//! Truncated three-level atom ⊗ cavity Fock space and the operators acting on it.
//!
//! Product states are stored atom-major: `|b,0⟩ … |b,N−1⟩, |g,0⟩ … |g,N−1⟩,
//! |e,0⟩ … |e,N−1⟩`, so the bare `|b⟩` sector is a contiguous block. All
//! frequencies are in units of the cavity frequency.

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operators below this dimension are kept dense.
pub const DENSE_THRESHOLD: usize = 256;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    B,
    G,
    E,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::B, Level::G, Level::E];

    pub fn offset(self) -> usize {
        match self {
            Level::B => 0,
            Level::G => 1,
            Level::E => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub n_fock: usize,
}

impl SpaceConfig {
    pub fn new(n_fock: usize) -> Result<Self> {
        if n_fock < 2 {
            return Err(Error::InvalidParams(format!("n_fock must be at least 2, got {n_fock}")));
        }
        Ok(Self { n_fock })
    }

    pub fn dim(&self) -> usize {
        3 * self.n_fock
    }

    pub fn index(&self, level: Level, photons: usize) -> usize {
        debug_assert!(photons < self.n_fock);
        level.offset() * self.n_fock + photons
    }

    /// Inverse of [`SpaceConfig::index`].
    pub fn label(&self, index: usize) -> (Level, usize) {
        (Level::ALL[index / self.n_fock], index % self.n_fock)
    }

    /// Fock truncation scaled by `factor`, rounded up.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { n_fock: ((self.n_fock as f64) * factor).ceil() as usize }
    }

    pub fn basis_vector(&self, level: Level, photons: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[self.index(level, photons)] = C64::new(1.0, 0.0);
        v
    }
}

/// Physical constants of the driven Ξ-atom/cavity model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_c: f64,
    pub omega_e: f64,
    pub omega_g: f64,
    pub omega_b: f64,
    pub lambda: f64,
}

impl ModelParams {
    /// Resonant configuration `ω_e − ω_g = ω_c` with `ω_g = 0`.
    pub fn resonant(lambda: f64, omega_b: f64) -> Self {
        Self { omega_c: 1.0, omega_e: 1.0, omega_g: 0.0, omega_b, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_c, self.omega_e, self.omega_g, self.omega_b, self.lambda]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("model parameters must be finite".into()));
        }
        if (self.omega_c - 1.0).abs() > 1e-15 {
            return Err(Error::InvalidParams(format!(
                "frequencies are in units of omega_c, so omega_c must be 1 (got {})",
                self.omega_c
            )));
        }
        if !(self.omega_b < self.omega_g && self.omega_g < self.omega_e) {
            return Err(Error::InvalidParams(format!(
                "level ordering requires omega_b < omega_g < omega_e (got {}, {}, {})",
                self.omega_b, self.omega_g, self.omega_e
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParams(format!("lambda must be >= 0 (got {})", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix<C64>),
}

/// Complex operator on the composite space. Small operators are stored dense,
/// large ones in CSR form; the public API is identical.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    dim: usize,
    storage: Storage,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Builds an operator from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, C64)]) -> Self {
        let storage = if dim < DENSE_THRESHOLD {
            let mut m = DMatrix::zeros(dim, dim);
            for &(i, j, v) in entries {
                m[(i, j)] += v;
            }
            Storage::Dense(m)
        } else {
            let mut coo = CooMatrix::new(dim, dim);
            for &(i, j, v) in entries {
                coo.push(i, j, v);
            }
            Storage::Sparse(CsrMatrix::from(&coo))
        };
        let mut op = Self { dim, storage, hermitian: false };
        op.hermitian = op.max_hermitian_deviation() < HERMITIAN_TOL;
        op
    }

    pub fn from_dense(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        let dim = m.nrows();
        let entries: Vec<_> = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = m[(i, j)];
                (v != C64::new(0.0, 0.0)).then_some((i, j, v))
            })
            .collect();
        Self::from_triplets(dim, &entries)
    }

    pub fn identity(dim: usize) -> Self {
        let one = C64::new(1.0, 0.0);
        let entries: Vec<_> = (0..dim).map(|i| (i, i, one)).collect();
        Self::from_triplets(dim, &entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(row, col)],
            Storage::Sparse(m) => m
                .get_entry(row, col)
                .map(|e| e.into_value())
                .unwrap_or_else(|| C64::new(0.0, 0.0)),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        match &self.storage {
            Storage::Dense(m) => (0..self.dim)
                .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let v = m[(i, j)];
                    (v != C64::new(0.0, 0.0)).then_some((i, j, v))
                })
                .collect(),
            Storage::Sparse(m) => m.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => {
                let mut d = DMatrix::zeros(self.dim, self.dim);
                for (i, j, v) in m.triplet_iter() {
                    d[(i, j)] = *v;
                }
                d
            }
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        match &self.storage {
            Storage::Dense(m) => {
                for j in 0..self.dim {
                    let vj = v[j];
                    if vj == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for i in 0..self.dim {
                        out[i] += m[(i, j)] * vj;
                    }
                }
            }
            Storage::Sparse(m) => {
                for (i, j, a) in m.triplet_iter() {
                    out[i] += a * v[j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let entries: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.dim, &entries)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        match (&self.storage, &rhs.storage) {
            (Storage::Sparse(a), Storage::Sparse(b)) => {
                let prod = a * b;
                let entries: Vec<_> = prod.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
                Self::from_triplets(self.dim, &entries)
            }
            _ => Self::from_dense(self.to_dense() * rhs.to_dense()),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut entries = self.triplets();
        entries.extend(rhs.triplets());
        Self::from_triplets(self.dim, &entries)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let entries: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, v * factor)).collect();
        Self::from_triplets(self.dim, &entries)
    }

    /// `A·B − B·A`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs).add(&rhs.matmul(self).scale(C64::new(-1.0, 0.0)))
    }

    /// `max |A − A†|` over all entries.
    pub fn max_hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst
    }
}

/// Cavity annihilation operator `a` on the composite space (identity on the atom).
pub fn build_destroy(cfg: &SpaceConfig) -> OperatorMatrix {
    let mut entries = Vec::with_capacity(3 * cfg.n_fock);
    for level in Level::ALL {
        for n in 1..cfg.n_fock {
            entries.push((cfg.index(level, n - 1), cfg.index(level, n), C64::new((n as f64).sqrt(), 0.0)));
        }
    }
    OperatorMatrix::from_triplets(cfg.dim(), &entries)
}

pub fn build_create(cfg: &SpaceConfig) -> OperatorMatrix {
    build_destroy(cfg).adjoint()
}

/// Photon number `a†a` on the composite space.
pub fn build_number(cfg: &SpaceConfig) -> OperatorMatrix {
    let entries: Vec<_> = (0..cfg.dim())
        .map(|i| (i, i, C64::new(cfg.label(i).1 as f64, 0.0)))
        .collect();
    OperatorMatrix::from_triplets(cfg.dim(), &entries)
}

/// `|to⟩⟨from| ⊗ 1_Fock`.
pub fn build_atomic_projector(from: Level, to: Level, cfg: &SpaceConfig) -> OperatorMatrix {
    let entries: Vec<_> = (0..cfg.n_fock)
        .map(|n| (cfg.index(to, n), cfg.index(from, n), C64::new(1.0, 0.0)))
        .collect();
    OperatorMatrix::from_triplets(cfg.dim(), &entries)
}

/// Quantum Rabi Hamiltonian on the `{g, e}` sectors; acts as zero on `|b⟩`.
pub fn build_rabi_hamiltonian(p: &ModelParams, cfg: &SpaceConfig) -> OperatorMatrix {
    let mut entries = Vec::new();
    for n in 0..cfg.n_fock {
        let photons = n as f64 * p.omega_c;
        entries.push((cfg.index(Level::G, n), cfg.index(Level::G, n), C64::new(p.omega_g + photons, 0.0)));
        entries.push((cfg.index(Level::E, n), cfg.index(Level::E, n), C64::new(p.omega_e + photons, 0.0)));
    }
    // λ (a + a†)(|e⟩⟨g| + |g⟩⟨e|): ⟨s', n−1| ... |s, n⟩ = λ√n for s ≠ s' in {g, e}
    for n in 1..cfg.n_fock {
        let v = C64::new(p.lambda * (n as f64).sqrt(), 0.0);
        for (s, t) in [(Level::G, Level::E), (Level::E, Level::G)] {
            let lo = cfg.index(t, n - 1);
            let hi = cfg.index(s, n);
            entries.push((lo, hi, v));
            entries.push((hi, lo, v));
        }
    }
    OperatorMatrix::from_triplets(cfg.dim(), &entries)
}

/// Bare-atom and free-cavity energy of the `|b⟩` sector: `ω_b + n ω_c` on `|b,n⟩`.
pub fn build_bare_b_hamiltonian(p: &ModelParams, cfg: &SpaceConfig) -> OperatorMatrix {
    let entries: Vec<_> = (0..cfg.n_fock)
        .map(|n| {
            let i = cfg.index(Level::B, n);
            (i, i, C64::new(p.omega_b + n as f64 * p.omega_c, 0.0))
        })
        .collect();
    OperatorMatrix::from_triplets(cfg.dim(), &entries)
}

/// `|b⟩⟨g| + |g⟩⟨b|`, the operator the external drive couples to.
pub fn build_drive_coupling(cfg: &SpaceConfig) -> OperatorMatrix {
    build_atomic_projector(Level::G, Level::B, cfg).add(&build_atomic_projector(Level::B, Level::G, cfg))
}
