//! Gaussian pulse trains, carrier frequencies from the multi-photon resonance
//! condition, effective couplings and the validity diagnostics of the
//! three-level reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::ModelParams;
use crate::rabi::{eta, RabiSpectrum};

/// Default threshold standing in for "≪ 1" in the validity diagnostics.
pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 0.1;

/// The two driving fields. The pump (`l = 1`) couples `|b,M⟩` to `|ε_n⟩`,
/// the Stokes field (`l = 2`) couples `|b,2m+M⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    Pump,
    Stokes,
}

impl Field {
    pub const BOTH: [Field; 2] = [Field::Pump, Field::Stokes];

    pub fn index(self) -> usize {
        match self {
            Field::Pump => 0,
            Field::Stokes => 1,
        }
    }

    /// 1-based label used in output column names.
    pub fn number(self) -> usize {
        self.index() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    /// Peak amplitudes `Ω_l`.
    pub amp_peak: [f64; 2],
    /// Centre of the first Gaussian of each train, `t_l`.
    pub center_first: [f64; 2],
    /// Gaussian width `T`.
    pub width: f64,
    /// Spacing `T_1` between consecutive Gaussians of a train.
    pub period: f64,
    pub n_cycles: usize,
    /// Carrier frequencies `ω_l`.
    pub carriers: [f64; 2],
}

impl PulseTrain {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !(self.period > 0.0) {
            return Err(Error::InvalidParams(format!(
                "pulse width and period must be positive (got {}, {})",
                self.width, self.period
            )));
        }
        if self.amp_peak.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParams("pulse amplitudes must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Same train with both amplitudes set to zero.
    pub fn switched_off(&self) -> Self {
        Self { amp_peak: [0.0; 2], ..self.clone() }
    }

    /// `Ω_l Σ_k exp[−(t − t_l − k T_1)² / T²]` over `k = 0 … n_cycles−1`.
    pub fn envelope(&self, field: Field, t: f64) -> f64 {
        let l = field.index();
        let amp = self.amp_peak[l];
        if amp == 0.0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for k in 0..self.n_cycles {
            let x = (t - self.center_first[l] - k as f64 * self.period) / self.width;
            sum += (-x * x).exp();
        }
        amp * sum
    }

    /// Real drive field `Σ_l Ω_l(t) cos(ω_l t)` multiplying `|b⟩⟨g| + |g⟩⟨b|`.
    pub fn field_value(&self, t: f64) -> f64 {
        Field::BOTH
            .iter()
            .map(|&f| {
                let env = self.envelope(f, t);
                if env == 0.0 {
                    0.0
                } else {
                    env * (self.carriers[f.index()] * t).cos()
                }
            })
            .sum()
    }

    /// Upper bound on the neglected `k ≥ n_cycles` and `k < 0` Gaussians
    /// inside the simulated span, relative to the peak: `exp[−(T_1/2T)²]`.
    pub fn tail_error(&self) -> f64 {
        let r = self.period / (2.0 * self.width);
        (-r * r).exp()
    }

    /// Total simulated span `n_cycles · T_1`.
    pub fn span(&self) -> f64 {
        self.n_cycles as f64 * self.period
    }

    /// Interval of cycle `k` where both envelopes exceed `fraction` of their
    /// peak, or `None` if the pulses never overlap at that level.
    pub fn overlap_window(&self, cycle: usize, fraction: f64) -> Option<(f64, f64)> {
        let half = self.width * (1.0 / fraction).ln().sqrt();
        let shift = cycle as f64 * self.period;
        let lo = (self.center_first[0] - half).max(self.center_first[1] - half) + shift;
        let hi = (self.center_first[0] + half).min(self.center_first[1] + half) + shift;
        (lo < hi).then_some((lo, hi))
    }
}

/// The Λ-system addressed by the pulses: initial `|b,M⟩`, intermediate
/// `|ε_n⟩` and final `|b,2m+M⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleTarget {
    /// Rabi eigenstate index `n`.
    pub state: usize,
    /// `M = n mod 2`.
    pub start_photons: usize,
    /// `m ≥ 1`; the bundle carries `2m` photons on top of `M`.
    pub pairs: usize,
    pub detuning: f64,
}

impl BundleTarget {
    pub fn new(state: usize, pairs: usize, detuning: f64) -> Self {
        Self { state, start_photons: state % 2, pairs, detuning }
    }

    pub fn final_photons(&self) -> usize {
        2 * self.pairs + self.start_photons
    }

    pub fn validate(&self, n_fock: usize, margin: usize) -> Result<()> {
        if self.start_photons != self.state % 2 {
            return Err(Error::InvalidParams(format!(
                "start photon number M={} must equal n mod 2 for n={}",
                self.start_photons, self.state
            )));
        }
        if self.pairs == 0 {
            return Err(Error::InvalidParams("photon pairs m must be positive".into()));
        }
        if self.final_photons() + margin > n_fock {
            return Err(Error::InvalidParams(format!(
                "target photon number {} plus margin {margin} exceeds n_fock={n_fock}",
                self.final_photons()
            )));
        }
        Ok(())
    }
}

/// `Δ_{n,m,p,l} = ε_n − ω_b − m ω_c + p ω_l`.
pub fn detuning(spec: &RabiSpectrum, n: usize, photons: usize, sign: i32, carrier: f64) -> f64 {
    let p = &spec.params;
    spec.energy(n) - p.omega_b - photons as f64 * p.omega_c + sign as f64 * carrier
}

/// Carrier frequencies `(ω_1, ω_2)` with `Δ_{n,M,−1,1} = Δ_{n,2m+M,−1,2} = Δ`,
/// hence `ω_1 − ω_2 = 2m ω_c`.
pub fn solve_carriers(spec: &RabiSpectrum, p: &ModelParams, tgt: &BundleTarget) -> Result<(f64, f64)> {
    let base = spec.energy(tgt.state) - p.omega_b - tgt.detuning;
    let w1 = base - tgt.start_photons as f64 * p.omega_c;
    let w2 = base - tgt.final_photons() as f64 * p.omega_c;
    for (field, w) in [(1, w1), (2, w2)] {
        if !(w > 0.0) {
            return Err(Error::NegativeCarrier { field, omega: w });
        }
    }
    Ok((w1, w2))
}

/// `Ω_{l,n,m}(t) = C_{n,m} Ω_l(t) / 2`.
pub fn effective_coupling(spec: &RabiSpectrum, pt: &PulseTrain, field: Field, n: usize, m: usize, t: f64) -> f64 {
    spec.c(n, m) * pt.envelope(field, t) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: f64,
    /// Bright-state coupling `Ω̃`.
    pub omega_tilde: f64,
}

pub fn mixing_angles(spec: &RabiSpectrum, pt: &PulseTrain, tgt: &BundleTarget, t: f64) -> Result<MixingAngles> {
    let ratio = eta(spec, tgt.state, tgt.start_photons, tgt.pairs)?;
    let pump = pt.envelope(Field::Pump, t);
    let stokes = pt.envelope(Field::Stokes, t);
    Ok(angles_from(ratio, spec.c(tgt.state, tgt.final_photons()).abs(), pump, stokes, tgt.detuning))
}

fn angles_from(eta: f64, c_final: f64, pump: f64, stokes: f64, detuning: f64) -> MixingAngles {
    let theta = (eta * pump).atan2(stokes);
    let omega_tilde = 0.5 * c_final * (eta * eta * pump * pump + stokes * stokes).sqrt();
    let half = detuning / 2.0;
    let phi = omega_tilde.atan2(half + (half * half + omega_tilde * omega_tilde).sqrt());
    MixingAngles { theta, phi, omega_tilde }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub threshold: f64,
    pub max_ratio: f64,
    pub time_of_max: f64,
    pub flagged: bool,
    /// Grid times where the ratio exceeds the threshold.
    pub offending_times: Vec<f64>,
}

/// Ratio `|θ̇| / min_± |Δ/2 ± √(Δ²/4 + Ω̃²)|` on `t_grid`, with `θ̇` from
/// finite differences (central inside, one-sided at the ends).
pub fn adiabaticity_report(
    spec: &RabiSpectrum,
    pt: &PulseTrain,
    tgt: &BundleTarget,
    t_grid: &[f64],
    threshold: f64,
) -> Result<AdiabaticityReport> {
    let angles: Vec<MixingAngles> = t_grid
        .iter()
        .map(|&t| mixing_angles(spec, pt, tgt, t))
        .collect::<Result<_>>()?;
    let half = tgt.detuning / 2.0;
    let mut report = AdiabaticityReport {
        threshold,
        max_ratio: 0.0,
        time_of_max: t_grid.first().copied().unwrap_or(0.0),
        flagged: false,
        offending_times: Vec::new(),
    };
    let n = t_grid.len();
    if n < 2 {
        return Ok(report);
    }
    for i in 0..n {
        let (a, b) = match i {
            0 => (0, 1),
            _ if i == n - 1 => (n - 2, n - 1),
            _ => (i - 1, i + 1),
        };
        let rate = ((angles[b].theta - angles[a].theta) / (t_grid[b] - t_grid[a])).abs();
        let root = (half * half + angles[i].omega_tilde.powi(2)).sqrt();
        let gap = (half + root).abs().min((half - root).abs());
        let ratio = if rate == 0.0 { 0.0 } else { rate / gap };
        if ratio > report.max_ratio || ratio.is_nan() {
            report.max_ratio = ratio;
            report.time_of_max = t_grid[i];
        }
        if !(ratio <= threshold) {
            report.offending_times.push(t_grid[i]);
        }
    }
    report.flagged = !report.offending_times.is_empty();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwaViolation {
    pub field: usize,
    pub state: usize,
    pub photons: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwaReport {
    pub threshold: f64,
    /// `max |Ω_{l,n,m} / Δ_{n,m,+1,l}|` for the addressed eigenstate.
    pub max_counter_rotating: f64,
    /// `max |Ω_{l,n',m} / Δ_{n',m,−1,l}|` over the other retained eigenstates.
    pub max_spectator: f64,
    pub flagged: bool,
    pub offenders: Vec<RwaViolation>,
}

/// Checks the two families of neglected terms at the peak of each envelope,
/// over eigenstates `0..retained_states` and the photon numbers `M ..= 2m+M`
/// that the transfer and the subsequent cascade populate.
pub fn rwa_validity_report(
    spec: &RabiSpectrum,
    pt: &PulseTrain,
    tgt: &BundleTarget,
    retained_states: usize,
    threshold: f64,
) -> RwaReport {
    let mut report = RwaReport {
        threshold,
        max_counter_rotating: 0.0,
        max_spectator: 0.0,
        flagged: false,
        offenders: Vec::new(),
    };
    let retained_states = retained_states.min(spec.dim());
    let photons = tgt.start_photons..=tgt.final_photons().min(spec.n_fock - 1);
    for field in Field::BOTH {
        let l = field.index();
        // envelope maximum, including overlap of neighbouring Gaussians
        let peak = (0..pt.n_cycles.max(1))
            .map(|k| pt.envelope(field, pt.center_first[l] + k as f64 * pt.period))
            .fold(0.0_f64, f64::max);
        let w = pt.carriers[l];
        for n in 0..retained_states {
            for m in photons.clone() {
                let coupling = (spec.c(n, m) * peak / 2.0).abs();
                if coupling == 0.0 {
                    continue;
                }
                let (ratio, is_target) = if n == tgt.state {
                    (coupling / detuning(spec, n, m, 1, w).abs(), true)
                } else {
                    (coupling / detuning(spec, n, m, -1, w).abs(), false)
                };
                if is_target {
                    report.max_counter_rotating = report.max_counter_rotating.max(ratio);
                } else {
                    report.max_spectator = report.max_spectator.max(ratio);
                }
                if !(ratio <= threshold) {
                    report.offenders.push(RwaViolation { field: field.number(), state: n, photons: m, ratio });
                }
            }
        }
    }
    report.flagged = !report.offenders.is_empty();
    report
}
