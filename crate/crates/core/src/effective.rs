//! Reduced Λ-type model on `{|b,M⟩, |ε_n⟩, |b,2m+M⟩}`: time-dependent
//! Hamiltonian, instantaneous eigenstructure and the analytic equal-time
//! correlation estimate.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::drive::{BundleTarget, Field, PulseTrain};
use crate::error::{Error, Result};
use crate::rabi::RabiSpectrum;

/// Below this bright-state coupling the eigensystem is treated as degenerate.
pub const DEGENERATE_COUPLING: f64 = 1e-14;

/// Index of each level in the 3-vector representation.
pub const INITIAL: usize = 0;
pub const INTERMEDIATE: usize = 1;
pub const FINAL: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSystem {
    pub target: BundleTarget,
    /// `C_{n,M}`, sign included.
    pub c_initial: f64,
    /// `C_{n,2m+M}`, sign included.
    pub c_final: f64,
    pub pulses: PulseTrain,
}

impl LambdaSystem {
    pub fn new(spec: &RabiSpectrum, pulses: &PulseTrain, target: &BundleTarget) -> Result<Self> {
        let c_initial = spec.c(target.state, target.start_photons);
        let c_final = spec.c(target.state, target.final_photons());
        for (photons, value) in [(target.start_photons, c_initial), (target.final_photons(), c_final)] {
            if value.abs() < crate::rabi::COEFFICIENT_FLOOR {
                return Err(Error::DegenerateCoefficient { state: target.state, photons, value });
            }
        }
        Ok(Self { target: *target, c_initial, c_final, pulses: pulses.clone() })
    }

    pub fn labels(&self) -> [String; 3] {
        [
            format!("b,{}", self.target.start_photons),
            format!("eps_{}", self.target.state),
            format!("b,{}", self.target.final_photons()),
        ]
    }

    pub fn eta(&self) -> f64 {
        (self.c_initial / self.c_final).abs()
    }

    /// Effective couplings `(Ω_{1,n,M}(t), Ω_{2,n,2m+M}(t))`.
    pub fn couplings(&self, t: f64) -> (f64, f64) {
        (
            0.5 * self.c_initial * self.pulses.envelope(Field::Pump, t),
            0.5 * self.c_final * self.pulses.envelope(Field::Stokes, t),
        )
    }

    pub fn hamiltonian_at(&self, t: f64) -> Matrix3<f64> {
        let (w1, w2) = self.couplings(t);
        let mut h = Matrix3::zeros();
        h[(INTERMEDIATE, INTERMEDIATE)] = self.target.detuning;
        h[(INTERMEDIATE, INITIAL)] = w1;
        h[(INITIAL, INTERMEDIATE)] = w1;
        h[(INTERMEDIATE, FINAL)] = w2;
        h[(FINAL, INTERMEDIATE)] = w2;
        h
    }

    pub fn instantaneous_eigensystem(&self, t: f64) -> Result<Eigensystem> {
        let pump = self.pulses.envelope(Field::Pump, t);
        let stokes = self.pulses.envelope(Field::Stokes, t);
        let eta = self.eta();
        let omega_tilde = 0.5 * self.c_final.abs() * (eta * eta * pump * pump + stokes * stokes).sqrt();
        if omega_tilde < DEGENERATE_COUPLING {
            return Err(Error::DegeneratePoint { t });
        }
        let theta = (eta * pump).atan2(stokes);
        let half = self.target.detuning / 2.0;
        let root = (half * half + omega_tilde * omega_tilde).sqrt();
        let phi = omega_tilde.atan2(half + root);

        // relative sign of the two couplings; +1 reproduces the textbook form
        let s = (self.c_initial * self.c_final).signum();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let dark = Vector3::new(ct, 0.0, -s * st);
        // oriented so that ⟨ε_n|H|bright⟩ = +Ω̃
        let orient = self.c_initial.signum();
        let bright = Vector3::new(orient * st, 0.0, orient * s * ct);
        let eps = Vector3::new(0.0, 1.0, 0.0);
        Ok(Eigensystem {
            theta,
            phi,
            omega_tilde,
            values: [0.0, omega_tilde / phi.tan(), -omega_tilde * phi.tan()],
            vectors: [dark, bright * sp + eps * cp, bright * cp - eps * sp],
        })
    }
}

/// Eigenpairs ordered `(dark, +, −)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigensystem {
    pub theta: f64,
    pub phi: f64,
    pub omega_tilde: f64,
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

impl Eigensystem {
    pub fn dark(&self) -> &Vector3<f64> {
        &self.vectors[0]
    }
}

/// `1 / (2 sin θ_2)`, the adiabatic estimate of the single-photon equal-time
/// correlation during emission.
pub fn analytic_g2_equal_time(theta: f64) -> Result<f64> {
    let s = theta.sin();
    if s <= 1e-12 {
        return Err(Error::UndefinedAtZeroAngle(theta));
    }
    Ok(0.5 / s)
}
