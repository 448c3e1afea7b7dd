//! Two-time correlators by the quantum regression theorem.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::basis::JumpChannel;
use super::hamiltonian::InteractionHamiltonian;
use super::master::{propagate_master, DensityMatrix, MasterOptions};
use crate::error::{Error, Result};
use crate::observables::{BundleOperator, DENOMINATOR_FLOOR};
use crate::series::TimeSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSeries {
    pub order: usize,
    /// Anchor time `t`.
    pub t: f64,
    pub tau: Vec<f64>,
    /// `⟨X†ᴺ(t) X†ᴺ(t+τ) Xᴺ(t+τ) Xᴺ(t)⟩`
    pub numerator: Vec<f64>,
    /// `⟨X†ᴺXᴺ⟩(t)`
    pub intensity_t: f64,
    /// `⟨X†ᴺXᴺ⟩(t+τ)`
    pub intensity_tau: Vec<f64>,
    pub g2: Vec<f64>,
}

impl CorrelatorSeries {
    pub fn to_series(&self) -> TimeSeries {
        let mut ts = TimeSeries::new("tau", self.tau.clone());
        let n = self.order;
        ts.push_column(format!("g2_{n}"), self.g2.clone());
        ts.push_column("numerator", self.numerator.clone());
        ts.push_column("intensity_t_plus_tau", self.intensity_tau.clone());
        ts.set_meta("order", n);
        ts.set_meta("anchor_t", self.t);
        ts.set_meta("intensity_t", self.intensity_t);
        ts.set_meta("denominator_floor", DENOMINATOR_FLOOR);
        ts
    }
}

/// `g_N^(2)(t, t+τ)` starting from a state already at time `t`.
pub fn correlate_from(
    hamiltonian: &InteractionHamiltonian,
    channels: &[JumpChannel],
    rho_t: &DensityMatrix,
    bundle: &BundleOperator,
    tau_grid: &[f64],
    options: &MasterOptions,
) -> Result<CorrelatorSeries> {
    let energies = &hamiltonian.energies;
    let t = rho_t.time;
    let intensity_t = rho_t.expectation(&bundle.intensity, energies).re;
    if !(intensity_t >= DENOMINATOR_FLOOR) {
        return Err(Error::ZeroDenominator { which: "<X†ᴺXᴺ>(t)", value: intensity_t });
    }
    let lab = rho_t.lab_frame(energies);
    let conditioned = &bundle.x_pow * lab * bundle.x_pow.adjoint();
    // propagate the unit-trace version; the generator is linear
    let weight = conditioned.trace().re;
    if !(weight >= DENOMINATOR_FLOOR) {
        return Err(Error::ZeroDenominator { which: "tr[XᴺρX†ᴺ](t)", value: weight });
    }
    let sigma0 = DensityMatrix::from_lab_frame(&(conditioned / C64::new(weight, 0.0)), energies, t);
    let grid: Vec<f64> = tau_grid.iter().map(|tau| t + tau).collect();

    let mut numerator = Vec::with_capacity(grid.len());
    propagate_master(hamiltonian, channels, &sigma0, &grid, options, |s| {
        numerator.push(weight * s.expectation(&bundle.intensity, energies).re);
        Ok(())
    })?;
    let mut intensity_tau = Vec::with_capacity(grid.len());
    propagate_master(hamiltonian, channels, rho_t, &grid, options, |r| {
        intensity_tau.push(r.expectation(&bundle.intensity, energies).re);
        Ok(())
    })?;
    if let Some(&bad) = intensity_tau.iter().find(|v| !(**v >= DENOMINATOR_FLOOR)) {
        return Err(Error::ZeroDenominator { which: "<X†ᴺXᴺ>(t+τ)", value: bad });
    }
    let g2 = numerator.iter().zip(&intensity_tau).map(|(num, den)| num / (intensity_t * den)).collect();
    Ok(CorrelatorSeries {
        order: bundle.order,
        t,
        tau: tau_grid.to_vec(),
        numerator,
        intensity_t,
        intensity_tau,
        g2,
    })
}

/// Propagates `ρ0` to `t` and evaluates `g_N^(2)(t, t+τ)` on `tau_grid`.
pub fn two_time_correlator(
    hamiltonian: &InteractionHamiltonian,
    channels: &[JumpChannel],
    rho0: &DensityMatrix,
    bundle: &BundleOperator,
    t: f64,
    tau_grid: &[f64],
    options: &MasterOptions,
) -> Result<CorrelatorSeries> {
    let (rho_t, _) = propagate_master(hamiltonian, channels, rho0, &[t], options, |_| Ok(()))?;
    correlate_from(hamiltonian, channels, &rho_t, bundle, tau_grid, options)
}
