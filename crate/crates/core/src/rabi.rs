//! Numerical spectrum of the quantum Rabi Hamiltonian on the `{g, e}` ⊗ Fock block.
//!
//! The Hamiltonian conserves parity, and each parity sector ordered by photon
//! number is a tridiagonal chain (`g0, e1, g2, …` and `e0, g1, e2, …`). Each
//! chain is diagonalized separately, so coefficients forbidden by parity are
//! exactly zero.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Level, ModelParams, SpaceConfig};
use crate::series::TimeSeries;

/// Eigenvalue shift tolerated when the truncation is increased by 50%.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Number of low-lying eigenvalues compared in the convergence check.
pub const CONVERGENCE_LEVELS: usize = 10;
/// Smallest coefficient accepted as the denominator of a pulse ratio.
pub const COEFFICIENT_FLOOR: f64 = 1e-12;
/// Relative threshold used when reading parity off the zero pattern.
pub const PARITY_ZERO_TOL: f64 = 1e-9;
/// Minimum overlap between consecutive sweep points.
pub const TRACKING_MIN_OVERLAP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of a product state `|s, m⟩`, counting `|e⟩` as one excitation.
    pub fn of(level: Level, photons: usize) -> Option<Parity> {
        let excitations = match level {
            Level::G => photons,
            Level::E => photons + 1,
            Level::B => return None,
        };
        Some(if excitations % 2 == 0 { Parity::Even } else { Parity::Odd })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RabiSpectrum {
    pub params: ModelParams,
    pub n_fock: usize,
    /// Ascending eigenvalues `ε_n`.
    pub eigenvalues: Vec<f64>,
    /// `C[(n, m)] = ⟨ε_n|g,m⟩`.
    pub coeff_g: DMatrix<f64>,
    /// `D[(n, m)] = ⟨ε_n|e,m⟩`.
    pub coeff_e: DMatrix<f64>,
    pub parity: Vec<Parity>,
}

fn chain_members(parity: Parity, n_fock: usize) -> Vec<(Level, usize)> {
    (0..n_fock)
        .map(|m| {
            let g_first = matches!(parity, Parity::Even);
            let level = if (m % 2 == 0) == g_first { Level::G } else { Level::E };
            (level, m)
        })
        .collect()
}

fn chain_hamiltonian(p: &ModelParams, members: &[(Level, usize)]) -> DMatrix<f64> {
    let n = members.len();
    let mut h = DMatrix::zeros(n, n);
    for (k, &(level, m)) in members.iter().enumerate() {
        let atom = if level == Level::G { p.omega_g } else { p.omega_e };
        h[(k, k)] = atom + m as f64 * p.omega_c;
        if k + 1 < n {
            let v = p.lambda * ((m + 1) as f64).sqrt();
            h[(k, k + 1)] = v;
            h[(k + 1, k)] = v;
        }
    }
    h
}

impl RabiSpectrum {
    /// Diagonalizes at the given truncation without a convergence check.
    pub fn compute(p: &ModelParams, cfg: &SpaceConfig) -> Result<Self> {
        p.validate()?;
        let n_fock = cfg.n_fock;
        let mut states: Vec<(f64, Parity, Vec<(Level, usize, f64)>)> = Vec::with_capacity(2 * n_fock);
        for parity in [Parity::Even, Parity::Odd] {
            let members = chain_members(parity, n_fock);
            let eig = SymmetricEigen::new(chain_hamiltonian(p, &members));
            for (k, &energy) in eig.eigenvalues.iter().enumerate() {
                let col = eig.eigenvectors.column(k);
                let amps = members.iter().zip(col.iter()).map(|(&(l, m), &v)| (l, m, v)).collect();
                states.push((energy, parity, amps));
            }
        }
        states.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| (a.1 == Parity::Odd).cmp(&(b.1 == Parity::Odd)))
        });

        let dim = 2 * n_fock;
        let mut coeff_g = DMatrix::zeros(dim, n_fock);
        let mut coeff_e = DMatrix::zeros(dim, n_fock);
        let mut eigenvalues = Vec::with_capacity(dim);
        let mut parity = Vec::with_capacity(dim);
        for (n, (energy, par, amps)) in states.into_iter().enumerate() {
            for (level, m, v) in amps {
                match level {
                    Level::G => coeff_g[(n, m)] = v,
                    _ => coeff_e[(n, m)] = v,
                }
            }
            eigenvalues.push(energy);
            parity.push(par);
        }
        let mut spec = Self { params: *p, n_fock, eigenvalues, coeff_g, coeff_e, parity };
        spec.fix_signs();
        Ok(spec)
    }

    /// Makes the first nonzero coefficient of every eigenvector (g block
    /// before e block) positive.
    fn fix_signs(&mut self) {
        for n in 0..self.dim() {
            let first = self
                .coeff_g
                .row(n)
                .iter()
                .chain(self.coeff_e.row(n).iter())
                .copied()
                .find(|v| v.abs() > 1e-10);
            if matches!(first, Some(v) if v < 0.0) {
                self.coeff_g.row_mut(n).neg_mut();
                self.coeff_e.row_mut(n).neg_mut();
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.eigenvalues[n]
    }

    /// `C_{n,m}`; zero beyond the truncation.
    pub fn c(&self, n: usize, m: usize) -> f64 {
        if m < self.n_fock {
            self.coeff_g[(n, m)]
        } else {
            0.0
        }
    }

    /// `D_{n,m}`; zero beyond the truncation.
    pub fn d(&self, n: usize, m: usize) -> f64 {
        if m < self.n_fock {
            self.coeff_e[(n, m)]
        } else {
            0.0
        }
    }

    /// Eigenvector `n` as amplitudes on `|g,0⟩ … |g,N−1⟩, |e,0⟩ … |e,N−1⟩`.
    pub fn vector(&self, n: usize) -> Vec<f64> {
        self.coeff_g.row(n).iter().chain(self.coeff_e.row(n).iter()).copied().collect()
    }

    /// Parity read off the exact zero pattern of the coefficients.
    pub fn classify_parity(&self, n: usize) -> Option<Parity> {
        let scale = self.vector(n).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let tol = PARITY_ZERO_TOL * scale;
        let vanishes = |parity: Parity| {
            (0..self.n_fock).all(|m| {
                let g_ok = Parity::of(Level::G, m) == Some(parity) || self.c(n, m).abs() <= tol;
                let e_ok = Parity::of(Level::E, m) == Some(parity) || self.d(n, m).abs() <= tol;
                g_ok && e_ok
            })
        };
        match (vanishes(Parity::Even), vanishes(Parity::Odd)) {
            (true, false) => Some(Parity::Even),
            (false, true) => Some(Parity::Odd),
            _ => None,
        }
    }

    /// Index of the `rank`-th lowest eigenstate of the given parity.
    pub fn index_of(&self, parity: Parity, rank: usize) -> Option<usize> {
        self.parity
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == parity)
            .nth(rank)
            .map(|(i, _)| i)
    }

    pub fn overlap(&self, n: usize, other: &RabiSpectrum, k: usize) -> f64 {
        self.vector(n).iter().zip(other.vector(k)).map(|(a, b)| a * b).sum()
    }
}

/// Diagonalizes and verifies that the lowest eigenvalues are stable when the
/// truncation grows by 50%.
pub fn diagonalize(p: &ModelParams, cfg: &SpaceConfig) -> Result<RabiSpectrum> {
    let spec = RabiSpectrum::compute(p, cfg)?;
    let larger = RabiSpectrum::compute(p, &cfg.scaled(1.5))?;
    let levels = CONVERGENCE_LEVELS.min(cfg.n_fock);
    for i in 0..levels {
        let shift = (spec.eigenvalues[i] - larger.eigenvalues[i]).abs();
        if shift > CONVERGENCE_TOL {
            return Err(Error::TruncationNotConverged { n_fock: cfg.n_fock, index: i, shift });
        }
    }
    Ok(spec)
}

/// `η = |C_{n,M} / C_{n,2m+M}|`, the pump/Stokes peak ratio giving equal
/// effective couplings.
pub fn eta(spec: &RabiSpectrum, n: usize, start_photons: usize, pairs: usize) -> Result<f64> {
    let target = 2 * pairs + start_photons;
    let denom = spec.c(n, target);
    if denom.abs() < COEFFICIENT_FLOOR {
        return Err(Error::DegenerateCoefficient { state: n, photons: target, value: denom });
    }
    Ok((spec.c(n, start_photons) / denom).abs())
}

/// Which eigenstate a sweep follows at its first grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StateSelector {
    /// Ascending-energy index.
    Index(usize),
    /// `rank`-th lowest state of a parity sector.
    Parity(Parity, usize),
}

impl StateSelector {
    pub fn resolve(&self, spec: &RabiSpectrum) -> Option<usize> {
        match *self {
            StateSelector::Index(n) => (n < spec.dim()).then_some(n),
            StateSelector::Parity(p, rank) => spec.index_of(p, rank),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StateSelector::Index(n) => format!("{n}"),
            StateSelector::Parity(Parity::Even, r) => format!("even{r}"),
            StateSelector::Parity(Parity::Odd, r) => format!("odd{r}"),
        }
    }
}

/// Signed coefficients `C_{n,m}(λ)` along a coupling sweep. The eigenstate is
/// followed by maximum overlap between neighbouring grid points and its sign
/// is kept continuous.
pub fn coefficient_sweep(
    p: &ModelParams,
    cfg: &SpaceConfig,
    lambda_grid: &[f64],
    state: StateSelector,
    photons: &[usize],
) -> Result<TimeSeries> {
    if let Some(bad) = lambda_grid.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidParams(format!("lambda grid values must be >= 0 (got {bad})")));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(lambda_grid.len()); photons.len()];
    let mut energies = Vec::with_capacity(lambda_grid.len());
    let mut indices = Vec::with_capacity(lambda_grid.len());
    let mut previous: Option<Vec<f64>> = None;

    for &lambda in lambda_grid {
        let params = ModelParams { lambda, ..*p };
        let spec = RabiSpectrum::compute(&params, cfg)?;
        let (index, sign) = match &previous {
            None => {
                let n = state.resolve(&spec).ok_or_else(|| {
                    Error::InvalidParams(format!("state {} not in spectrum", state.label()))
                })?;
                (n, 1.0)
            }
            Some(prev) => {
                let (best, overlap) = (0..spec.dim())
                    .map(|k| (k, spec.vector(k).iter().zip(prev).map(|(a, b)| a * b).sum::<f64>()))
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .expect("nonempty spectrum");
                if overlap.abs() < TRACKING_MIN_OVERLAP {
                    return Err(Error::EigenstateTrackingLost { lambda, overlap: overlap.abs() });
                }
                (best, overlap.signum())
            }
        };
        let vector: Vec<f64> = spec.vector(index).iter().map(|v| v * sign).collect();
        for (col, &m) in columns.iter_mut().zip(photons) {
            col.push(sign * spec.c(index, m));
        }
        energies.push(spec.energy(index));
        indices.push(index as f64);
        previous = Some(vector);
    }

    let mut table = TimeSeries::new("lambda", lambda_grid.to_vec());
    let label = state.label();
    for (col, &m) in columns.into_iter().zip(photons) {
        table.push_column(format!("C_{label}_{m}"), col);
    }
    table.push_column(format!("energy_{label}"), energies);
    table.push_column(format!("index_{label}"), indices);
    table.set_meta("n_fock", cfg.n_fock);
    table.set_meta("state", label);
    Ok(table)
}
