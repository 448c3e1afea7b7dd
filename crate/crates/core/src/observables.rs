//! Bundle operator, equal-time and delayed `g_N^(2)`, and extremum location.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    two_time_correlator, ChannelKind, CorrelatorSeries, DensityMatrix, DressedBasis, InteractionHamiltonian,
    JumpChannel, MasterOptions,
};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Equal-time points with `⟨X†ᴺXᴺ⟩²` below this are masked; delayed
/// correlators reject either intensity below it.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;
/// Negative values above `−CLIP_TOL` are round-off and clipped to zero.
pub const CLIP_TOL: f64 = 1e-10;

/// `X = Σ_{E_m > E_n} ⟨ψ_n|(a + a†)|ψ_m⟩ |ψ_n⟩⟨ψ_m|` and its `N`-th power,
/// in the frame of the undriven Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleOperator {
    pub order: usize,
    pub x: DMatrix<C64>,
    pub x_pow: DMatrix<C64>,
    /// `X†ᴺ Xᴺ`
    pub intensity: DMatrix<C64>,
    /// `X†ᴺ X†ᴺ Xᴺ Xᴺ`
    pub pair: DMatrix<C64>,
}

pub fn build_x(basis: &DressedBasis) -> DMatrix<C64> {
    let elements = basis.matrix_elements(&ChannelKind::A.system_operator(&basis.space));
    DMatrix::from_fn(basis.dim(), basis.dim(), |n, m| {
        if basis.energies[m] > basis.energies[n] {
            C64::new(elements[(n, m)], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

impl BundleOperator {
    pub fn new(basis: &DressedBasis, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParams("bundle order must be positive".into()));
        }
        let x = build_x(basis);
        let mut x_pow = x.clone();
        for _ in 1..order {
            x_pow = &x_pow * &x;
        }
        let intensity = x_pow.adjoint() * &x_pow;
        let pair = x_pow.adjoint() * &intensity * &x_pow;
        Ok(Self { order, x, x_pow, intensity, pair })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Sample {
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the denominator is below [`DENOMINATOR_FLOOR`] or the
    /// numerator is negative beyond round-off.
    pub value: Option<f64>,
    /// A negative round-off value was clipped to zero.
    pub clipped: bool,
}

impl G2Sample {
    /// Denominator resolved but the numerator came out negative beyond
    /// [`CLIP_TOL`], i.e. integration noise rather than round-off.
    pub fn is_negative(&self) -> bool {
        self.denominator > DENOMINATOR_FLOOR && self.numerator < 0.0
    }
}

fn clip(x: f64) -> (f64, bool) {
    if x < 0.0 && x > -CLIP_TOL {
        (0.0, true)
    } else {
        (x, false)
    }
}

/// `⟨X†ᴺX†ᴺXᴺXᴺ⟩ / ⟨X†ᴺXᴺ⟩²` for one snapshot.
pub fn g2_sample(rho: &DensityMatrix, bundle: &BundleOperator, energies: &[f64]) -> G2Sample {
    let (numerator, c1) = clip(rho.expectation(&bundle.pair, energies).re);
    let (intensity, c2) = clip(rho.expectation(&bundle.intensity, energies).re);
    let denominator = intensity * intensity;
    let value = (denominator > DENOMINATOR_FLOOR && numerator >= 0.0).then(|| numerator / denominator);
    G2Sample { numerator, denominator, value, clipped: c1 || c2 }
}

/// Equal-time `g_N^(2)(t,t)` over a sequence of snapshots. Masked points
/// are left empty; clipped and negative counts are stored in the metadata.
pub fn g2_equal_time(snapshots: &[DensityMatrix], bundle: &BundleOperator, energies: &[f64]) -> TimeSeries {
    let samples: Vec<G2Sample> = snapshots.iter().map(|r| g2_sample(r, bundle, energies)).collect();
    g2_series(snapshots.iter().map(|r| r.time).collect(), &samples, bundle.order)
}

/// Same table from samples collected elsewhere, e.g. during propagation.
pub fn g2_series(times: Vec<f64>, samples: &[G2Sample], order: usize) -> TimeSeries {
    let mut ts = TimeSeries::new("t", times);
    ts.push_masked_column(format!("g2_{order}"), samples.iter().map(|s| s.value).collect());
    ts.set_meta("order", order);
    ts.set_meta("denominator_floor", DENOMINATOR_FLOOR);
    ts.set_meta("clipped", samples.iter().filter(|s| s.clipped).count());
    ts.set_meta("negative_masked", samples.iter().filter(|s| s.is_negative()).count());
    ts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extremum {
    Max,
    Min,
}

/// Grid argmax/argmin of `column` inside `[lo, hi]`, refined by a parabola
/// through the neighbouring samples. Ties resolve to the earliest time.
pub fn find_extremum(series: &TimeSeries, column: &str, kind: Extremum, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    let values = series.values(column).ok_or_else(|| Error::InvalidParams(format!("no column {column}")))?;
    let better = |a: f64, b: f64| match kind {
        Extremum::Max => a > b,
        Extremum::Min => a < b,
    };
    let mut best: Option<usize> = None;
    for (i, (&t, &v)) in series.axis.iter().zip(&values).enumerate() {
        if t < lo || t > hi || !v.is_finite() {
            continue;
        }
        if best.map_or(true, |b| better(v, values[b])) {
            best = Some(i);
        }
    }
    let i = best.ok_or(Error::EmptyWindow { lo, hi })?;
    let (t, v) = (series.axis[i], values[i]);
    if i == 0 || i + 1 >= values.len() {
        return Ok((t, v));
    }
    let (t0, t2) = (series.axis[i - 1], series.axis[i + 1]);
    let (v0, v2) = (values[i - 1], values[i + 1]);
    if !v0.is_finite() || !v2.is_finite() || t0 < lo || t2 > hi {
        return Ok((t, v));
    }
    // vertex of the interpolating parabola
    let d0 = (v - v0) / (t - t0);
    let d1 = (v2 - v) / (t2 - t);
    let curvature = (d1 - d0) / (t2 - t0);
    if curvature == 0.0 || (kind == Extremum::Max) != (curvature < 0.0) {
        return Ok((t, v));
    }
    let slope_mid = d0 + curvature * (t - t0); // derivative at t
    let shift = -slope_mid / (2.0 * curvature);
    let shift = shift.clamp(t0 - t, t2 - t);
    let t_star = t + shift;
    let v_star = v + slope_mid * shift + curvature * shift * shift;
    Ok((t_star, v_star))
}

/// `g_N^(2)(t_N, t_N + τ)` anchored at a previously located extremum.
#[allow(clippy::too_many_arguments)]
pub fn g2_delayed(
    hamiltonian: &InteractionHamiltonian,
    channels: &[JumpChannel],
    rho0: &DensityMatrix,
    bundle: &BundleOperator,
    anchor: f64,
    tau_grid: &[f64],
    options: &MasterOptions,
) -> Result<CorrelatorSeries> {
    two_time_correlator(hamiltonian, channels, rho0, bundle, anchor, tau_grid, options)
}
