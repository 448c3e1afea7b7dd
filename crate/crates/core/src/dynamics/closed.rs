//! Schrödinger-equation propagation.

use num_complex::Complex64 as C64;

use super::hamiltonian::HamiltonianSource;
use super::integrator::{integrate, Generator, Tolerances};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// `dψ/dt = −i H(t) ψ`
pub struct Schrodinger<'a, H: HamiltonianSource>(pub &'a H);

impl<H: HamiltonianSource> Generator for Schrodinger<'_, H> {
    fn len(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.0.apply(t, y, dy);
        for v in dy.iter_mut() {
            *v = C64::new(v.im, -v.re);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClosedRun {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
}

impl ClosedRun {
    pub fn norm(&self, k: usize) -> f64 {
        self.states[k].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_norm_drift(&self) -> f64 {
        (0..self.times.len()).map(|k| (self.norm(k) - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn population(&self, k: usize, index: usize) -> f64 {
        self.states[k][index].norm_sqr()
    }

    pub fn final_state(&self) -> &[C64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// One column `P_<label>` per basis state.
    pub fn populations(&self, labels: &[String]) -> TimeSeries {
        let mut ts = TimeSeries::new("t", self.times.clone());
        for (i, label) in labels.iter().enumerate() {
            ts.push_column(format!("P_{label}"), (0..self.times.len()).map(|k| self.population(k, i)).collect());
        }
        ts
    }
}

pub fn check_normalized(psi: &[C64]) -> Result<()> {
    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParams(format!("initial state not normalized (|psi|^2 = {norm})")));
    }
    Ok(())
}

/// Propagates `ψ0` over `grid` (starting at `grid[0]`) and records the state
/// at every grid point.
pub fn propagate_closed<H: HamiltonianSource>(h: &H, psi0: &[C64], grid: &[f64], tol: Tolerances) -> Result<ClosedRun> {
    check_normalized(psi0)?;
    if psi0.len() != h.dim() {
        return Err(Error::InvalidParams(format!("state length {} != dimension {}", psi0.len(), h.dim())));
    }
    let mut run = ClosedRun { times: Vec::with_capacity(grid.len()), states: Vec::with_capacity(grid.len()) };
    integrate(&Schrodinger(h), tol, psi0, grid, |t, y| {
        run.times.push(t);
        run.states.push(y.to_vec());
        Ok(())
    })?;
    Ok(run)
}
