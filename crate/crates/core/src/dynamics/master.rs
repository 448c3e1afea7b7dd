//! Lindblad master equation with the dressed-state dissipator.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::basis::JumpChannel;
use super::hamiltonian::InteractionHamiltonian;
use super::integrator::{Dopri5, Generator, Tolerances};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Eigenvalues below this fail the positivity check.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

/// Row-major density matrix in the interaction picture at `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub dim: usize,
    pub data: Vec<C64>,
    pub time: f64,
}

impl DensityMatrix {
    pub fn from_pure(psi: &[C64], time: f64) -> Self {
        let dim = psi.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        Self { dim, data, time }
    }

    pub fn basis_state(dim: usize, index: usize, time: f64) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        data[index * dim + index] = C64::new(1.0, 0.0);
        Self { dim, data, time }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn population(&self, i: usize) -> f64 {
        self.get(i, i).re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.population(i)).collect()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The same state in the frame of the undriven Hamiltonian:
    /// `ρ_ij e^{−i(E_i − E_j)t}`.
    pub fn lab_frame(&self, energies: &[f64]) -> DMatrix<C64> {
        let phases = phases(energies, -self.time);
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j) * phases[i] * phases[j].conj())
    }

    /// Inverse of [`DensityMatrix::lab_frame`].
    pub fn from_lab_frame(m: &DMatrix<C64>, energies: &[f64], time: f64) -> Self {
        let dim = m.nrows();
        let phases = phases(energies, time);
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(m[(i, j)] * phases[i] * phases[j].conj());
            }
        }
        Self { dim, data, time }
    }

    /// `Tr[A ρ]` for an operator given in the undriven frame.
    pub fn expectation(&self, op: &DMatrix<C64>, energies: &[f64]) -> C64 {
        let phases = phases(energies, -self.time);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = op[(j, i)];
                if a != C64::new(0.0, 0.0) {
                    acc += a * self.get(i, j) * phases[i] * phases[j].conj();
                }
            }
        }
        acc
    }
}

fn phases(energies: &[f64], t: f64) -> Vec<C64> {
    energies.iter().map(|e| C64::from_polar(1.0, e * t)).collect()
}

/// `Σ D[|ψ_to⟩⟨ψ_from|]` collapsed onto per-state loss rates and population
/// feeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Dissipator {
    /// Total outgoing rate `γ_i`.
    pub loss: Vec<f64>,
    /// `(from, to, rate)`, channels with equal endpoints merged.
    pub feeds: Vec<(usize, usize, f64)>,
}

impl Dissipator {
    pub fn new(dim: usize, channels: &[JumpChannel]) -> Self {
        let mut loss = vec![0.0; dim];
        let mut feeds: Vec<(usize, usize, f64)> = Vec::new();
        for c in channels {
            // |e^{iφ}|² = 1 exactly up to rounding
            let rate = c.rate * C64::from_polar(1.0, c.phase).norm_sqr();
            loss[c.from] += rate;
            match feeds.iter_mut().find(|f| f.0 == c.from && f.1 == c.to) {
                Some(f) => f.2 += rate,
                None => feeds.push((c.from, c.to, rate)),
            }
        }
        Self { loss, feeds }
    }

    /// Adds `D(ρ)` to `out`.
    pub fn apply_add(&self, rho: &[C64], out: &mut [C64]) {
        let dim = self.loss.len();
        for i in 0..dim {
            for j in 0..dim {
                let g = 0.5 * (self.loss[i] + self.loss[j]);
                if g != 0.0 {
                    out[i * dim + j] -= rho[i * dim + j] * g;
                }
            }
        }
        for &(from, to, rate) in &self.feeds {
            out[to * dim + to] += rho[from * dim + from] * rate;
        }
    }
}

/// `dρ/dt = −i[H_I(t), ρ] + Σ D[…]ρ` on a flattened row-major `ρ`.
pub struct MasterGenerator<'a> {
    pub hamiltonian: &'a InteractionHamiltonian,
    pub dissipator: Dissipator,
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<C64>> = const { std::cell::RefCell::new(Vec::new()) };
}

impl<'a> MasterGenerator<'a> {
    pub fn new(hamiltonian: &'a InteractionHamiltonian, channels: &[JumpChannel]) -> Self {
        Self { hamiltonian, dissipator: Dissipator::new(hamiltonian.dim(), channels) }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

impl Generator for MasterGenerator<'_> {
    fn len(&self) -> usize {
        self.dim() * self.dim()
    }

    fn eval(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        self.dissipator.apply_add(rho, out);
        SCRATCH.with(|s| {
            let mut h = s.borrow_mut();
            self.hamiltonian.entries(t, &mut h);
            let minus_i = C64::new(0.0, -1.0);
            for (&(r, b, _), hk) in self.hamiltonian.couplings.iter().zip(h.iter()) {
                let a = minus_i * hk; // −i H_rb
                let ac = minus_i * hk.conj(); // −i H_br
                let (row_r, row_b) = (r * dim, b * dim);
                for k in 0..dim {
                    // −i H ρ
                    out[row_r + k] += a * rho[row_b + k];
                    out[row_b + k] += ac * rho[row_r + k];
                    // +i ρ H
                    let kd = k * dim;
                    out[kd + b] -= rho[kd + r] * a;
                    out[kd + r] -= rho[kd + b] * ac;
                }
            }
        });
    }
}

/// Lindblad right-hand side built from explicit dense jump operators
/// `L = √Γ e^{iφ} |to⟩⟨from|`. Slow; a reference for [`MasterGenerator`].
pub struct DenseLindblad<'a> {
    h: &'a InteractionHamiltonian,
    ops: Vec<DMatrix<C64>>,
    /// `½ Σ L†L`
    loss: DMatrix<C64>,
}

impl<'a> DenseLindblad<'a> {
    pub fn new(h: &'a InteractionHamiltonian, channels: &[JumpChannel]) -> Self {
        let n = h.dim();
        let ops: Vec<DMatrix<C64>> = channels
            .iter()
            .map(|c| {
                let mut m = DMatrix::zeros(n, n);
                m[(c.to, c.from)] = C64::from_polar(c.rate.sqrt(), c.phase);
                m
            })
            .collect();
        let loss = ops.iter().fold(DMatrix::zeros(n, n), |acc, l| acc + l.adjoint() * l) * C64::new(0.5, 0.0);
        Self { h, ops, loss }
    }
}

impl Generator for DenseLindblad<'_> {
    fn len(&self) -> usize {
        self.h.dim() * self.h.dim()
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.h.dim();
        let rho = DMatrix::from_row_slice(n, n, y);
        let h = self.h.matrix(t).to_dense();
        let i = C64::new(0.0, 1.0);
        let mut out = (&h * &rho - &rho * &h) * (-i) - &self.loss * &rho - &rho * &self.loss;
        for l in &self.ops {
            out += l * &rho * l.adjoint();
        }
        for r in 0..n {
            for c in 0..n {
                dy[r * n + c] = out[(r, c)];
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterOptions {
    pub tol: Tolerances,
    /// Diagonalize every recorded snapshot and fail below [`POSITIVITY_FLOOR`].
    pub check_positivity: bool,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self { tol: Tolerances::open(), check_positivity: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MasterDiagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Propagates `ρ0` (whose `time` must equal `grid[0]`) and hands every grid
/// snapshot to `observe`. Returns the final state.
pub fn propagate_master<F>(
    hamiltonian: &InteractionHamiltonian,
    channels: &[JumpChannel],
    rho0: &DensityMatrix,
    grid: &[f64],
    options: &MasterOptions,
    mut observe: F,
) -> Result<(DensityMatrix, MasterDiagnostics)>
where
    F: FnMut(&DensityMatrix) -> Result<()>,
{
    let generator = MasterGenerator::new(hamiltonian, channels);
    if rho0.dim != generator.dim() {
        return Err(Error::InvalidParams(format!("density matrix dim {} != {}", rho0.dim, generator.dim())));
    }
    let trace0 = rho0.trace().re;
    let mut diag = MasterDiagnostics { min_eigenvalue: f64::INFINITY, ..Default::default() };
    let mut state = rho0.clone();
    let mut stepper = Dopri5::new(generator.len(), options.tol);
    for &tg in grid {
        if tg < state.time {
            return Err(Error::InvalidParams(format!("grid point {tg} precedes the state time {}", state.time)));
        }
        let mut t = state.time;
        stepper.advance(&generator, &mut t, &mut state.data, tg)?;
        state.time = tg;
        diag.max_trace_drift = diag.max_trace_drift.max((state.trace().re - trace0).abs());
        diag.max_hermiticity_deviation = diag.max_hermiticity_deviation.max(state.hermiticity_deviation());
        if options.check_positivity {
            let ev = state.min_eigenvalue();
            diag.min_eigenvalue = diag.min_eigenvalue.min(ev);
            if ev < POSITIVITY_FLOOR * trace0.abs().max(1e-300) {
                return Err(Error::PositivityViolation { t: tg, min_eigenvalue: ev });
            }
        }
        observe(&state)?;
    }
    diag.accepted_steps = stepper.accepted;
    diag.rejected_steps = stepper.rejected;
    Ok((state, diag))
}

/// Population of every active state on `grid`, plus the trace.
pub fn master_populations(
    hamiltonian: &InteractionHamiltonian,
    channels: &[JumpChannel],
    rho0: &DensityMatrix,
    grid: &[f64],
    options: &MasterOptions,
    labels: &[String],
) -> Result<(TimeSeries, MasterDiagnostics)> {
    let mut pops: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); labels.len()];
    let mut trace = Vec::with_capacity(grid.len());
    let (_, diag) = propagate_master(hamiltonian, channels, rho0, grid, options, |rho| {
        for (i, col) in pops.iter_mut().enumerate() {
            col.push(rho.population(i));
        }
        trace.push(rho.trace().re);
        Ok(())
    })?;
    let mut ts = TimeSeries::new("t", grid.to_vec());
    for (label, col) in labels.iter().zip(pops) {
        ts.push_column(format!("P_{label}"), col);
    }
    ts.push_column("trace", trace);
    Ok((ts, diag))
}
