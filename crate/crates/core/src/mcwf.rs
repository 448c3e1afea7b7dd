//! Quantum-jump (Monte Carlo wavefunction) unravelling of the master
//! equation.
//!
//! Each trajectory evolves under `H_I(t) − (i/2) Σ Γ |ψ_m⟩⟨ψ_m|` until the
//! squared norm drops below a uniform random threshold, at which point the
//! jump time is bisected and a channel `m → n` is drawn with probability
//! `∝ Γ |⟨ψ_m|ψ⟩|²`. Randomness comes from ChaCha8 seeded with `seed`; the
//! ensemble assigns trajectory `i` to stream `i` of the same seed.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_normalized, ChannelKind, Dopri5, Generator, HamiltonianSource, JumpChannel, Tolerances};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Norm below which a trajectory without a detected jump is an error.
pub const NORM_FLOOR: f64 = 1e-12;
/// Trajectories reduced together before chunks are combined in order.
pub const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: ChannelKind,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub jump_events: Vec<JumpEvent>,
    pub populations: TimeSeries,
}

impl TrajectoryRecord {
    pub fn jumps(&self, kind: ChannelKind) -> impl Iterator<Item = &JumpEvent> {
        self.jump_events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub tol: Tolerances,
    /// Width of the bracket at which jump-time bisection stops.
    pub time_tol: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { tol: Tolerances::open(), time_tol: 1e-3 }
    }
}

struct NonHermitian<'a, H: HamiltonianSource> {
    h: &'a H,
    half_loss: Vec<f64>,
}

impl<H: HamiltonianSource> Generator for NonHermitian<'_, H> {
    fn len(&self) -> usize {
        self.h.dim()
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.h.apply(t, y, dy);
        for ((d, v), g) in dy.iter_mut().zip(y).zip(&self.half_loss) {
            *d = C64::new(d.im, -d.re) - v * *g;
        }
    }
}

fn norm_sqr(y: &[C64]) -> f64 {
    y.iter().map(|a| a.norm_sqr()).sum()
}

fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1]: a zero threshold would never fire
    1.0 - rng.gen::<f64>()
}

/// Core loop; `observe(k, ψ)` receives the unnormalized state at grid point `k`.
fn simulate<H, F>(
    h: &H,
    channels: &[JumpChannel],
    psi0: &[C64],
    grid: &[f64],
    rng: &mut ChaCha8Rng,
    options: &TrajectoryOptions,
    mut observe: F,
) -> Result<Vec<JumpEvent>>
where
    H: HamiltonianSource,
    F: FnMut(usize, &[C64]),
{
    check_normalized(psi0)?;
    let dim = h.dim();
    let mut half_loss = vec![0.0; dim];
    for c in channels {
        half_loss[c.from] += 0.5 * c.rate;
    }
    let gen = NonHermitian { h, half_loss };
    let mut stepper = Dopri5::new(dim, options.tol);
    let mut events = Vec::new();
    let mut psi = psi0.to_vec();
    let Some(&t0) = grid.first() else {
        return Ok(events);
    };
    let mut t = t0;
    let mut threshold = draw_threshold(rng);
    let (mut psi_prev, mut trial) = (psi.clone(), psi.clone());

    for (k, &tg) in grid.iter().enumerate() {
        while t < tg {
            let t_prev = t;
            psi_prev.copy_from_slice(&psi);
            stepper.step(&gen, &mut t, &mut psi, tg)?;
            let norm = norm_sqr(&psi);
            if norm >= threshold {
                if norm < NORM_FLOOR {
                    return Err(Error::NormUnderflow { t });
                }
                continue;
            }
            // bracket [lo, hi] with norm(lo) ≥ threshold > norm(hi)
            let (lo_t, mut lo, mut hi) = (t_prev, 0.0, t - t_prev);
            while hi - lo > options.time_tol {
                let mid = 0.5 * (lo + hi);
                stepper.fixed_step(&gen, lo_t, &psi_prev, mid, &mut trial);
                if norm_sqr(&trial) >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if hi < t - t_prev {
                stepper.fixed_step(&gen, lo_t, &psi_prev, hi, &mut psi);
                t = lo_t + hi;
            }
            let event = collapse(channels, &mut psi, t, rng);
            events.push(event);
            stepper.reset();
            threshold = draw_threshold(rng);
        }
        observe(k, &psi);
    }
    Ok(events)
}

fn collapse(channels: &[JumpChannel], psi: &mut [C64], t: f64, rng: &mut ChaCha8Rng) -> JumpEvent {
    let weights: Vec<f64> = channels.iter().map(|c| c.rate * psi[c.from].norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut chosen = channels.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if pick < *w {
            chosen = i;
            break;
        }
        pick -= w;
    }
    let c = channels[chosen];
    // keep the phase of the decaying amplitude
    let amp = psi[c.from];
    psi.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    psi[c.to] = if amp.norm() > 0.0 { amp / amp.norm() } else { C64::new(1.0, 0.0) };
    JumpEvent { time: t, kind: c.kind, from: c.from, to: c.to }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Single trajectory on stream 0 of `seed`.
pub fn run_trajectory<H: HamiltonianSource>(
    h: &H,
    channels: &[JumpChannel],
    psi0: &[C64],
    grid: &[f64],
    seed: u64,
    labels: &[String],
    options: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    run_stream(h, channels, psi0, grid, seed, 0, labels, options)
}

#[allow(clippy::too_many_arguments)]
pub fn run_stream<H: HamiltonianSource>(
    h: &H,
    channels: &[JumpChannel],
    psi0: &[C64],
    grid: &[f64],
    seed: u64,
    stream: u64,
    labels: &[String],
    options: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let mut rng = rng_for(seed, stream);
    let mut pops = vec![vec![0.0; grid.len()]; h.dim()];
    let events = simulate(h, channels, psi0, grid, &mut rng, options, |k, psi| {
        let n = norm_sqr(psi);
        for (i, col) in pops.iter_mut().enumerate() {
            col[k] = psi[i].norm_sqr() / n;
        }
    })?;
    let mut ts = TimeSeries::new("t", grid.to_vec());
    for (label, col) in labels.iter().zip(pops) {
        ts.push_column(format!("P_{label}"), col);
    }
    ts.set_meta("seed", seed);
    ts.set_meta("stream", stream);
    Ok(TrajectoryRecord { seed, stream, jump_events: events, populations: ts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// `P_<label>` means and `se_P_<label>` standard errors.
    pub populations: TimeSeries,
    pub n_traj: usize,
    pub seed: u64,
    /// Jump log of every trajectory, indexed by stream.
    pub events: Vec<Vec<JumpEvent>>,
}

impl EnsembleResult {
    pub fn mean(&self, label: &str) -> Option<Vec<f64>> {
        self.populations.values(&format!("P_{label}"))
    }

    pub fn standard_error(&self, label: &str) -> Option<Vec<f64>> {
        self.populations.values(&format!("se_P_{label}"))
    }
}

struct Partial {
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    events: Vec<Vec<JumpEvent>>,
}

/// Mean populations over `n_traj` trajectories with per-point standard
/// errors. Trajectory `i` uses stream `i` of `seed`; the reduction order is
/// fixed, so results do not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_average<H: HamiltonianSource>(
    h: &H,
    channels: &[JumpChannel],
    psi0: &[C64],
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    labels: &[String],
    options: &TrajectoryOptions,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::InvalidParams("ensemble needs at least one trajectory".into()));
    }
    let dim = h.dim();
    let streams: Vec<u64> = (0..n_traj as u64).collect();
    let partials: Vec<Partial> = streams
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut part = Partial {
                sum: vec![vec![0.0; grid.len()]; dim],
                sum_sq: vec![vec![0.0; grid.len()]; dim],
                events: Vec::with_capacity(chunk.len()),
            };
            for &stream in chunk {
                let mut rng = rng_for(seed, stream);
                let events = simulate(h, channels, psi0, grid, &mut rng, options, |k, psi| {
                    let n = norm_sqr(psi);
                    for i in 0..dim {
                        let p = psi[i].norm_sqr() / n;
                        part.sum[i][k] += p;
                        part.sum_sq[i][k] += p * p;
                    }
                })?;
                part.events.push(events);
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let mut sum = vec![vec![0.0; grid.len()]; dim];
    let mut sum_sq = vec![vec![0.0; grid.len()]; dim];
    let mut events = Vec::with_capacity(n_traj);
    for part in partials {
        for i in 0..dim {
            for k in 0..grid.len() {
                sum[i][k] += part.sum[i][k];
                sum_sq[i][k] += part.sum_sq[i][k];
            }
        }
        events.extend(part.events);
    }
    let n = n_traj as f64;
    let mut ts = TimeSeries::new("t", grid.to_vec());
    for (i, label) in labels.iter().enumerate().take(dim) {
        let mean: Vec<f64> = sum[i].iter().map(|s| s / n).collect();
        let se: Vec<f64> = if n_traj < 2 {
            vec![0.0; grid.len()]
        } else {
            sum_sq[i]
                .iter()
                .zip(&mean)
                .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
                .collect()
        };
        ts.push_column(format!("P_{label}"), mean);
        ts.push_column(format!("se_P_{label}"), se);
    }
    ts.set_meta("seed", seed);
    ts.set_meta("n_traj", n_traj);
    Ok(EnsembleResult { populations: ts, n_traj, seed, events })
}

/// Number of `kind` jumps inside each cycle `[k T_1, (k+1) T_1)` measured
/// from `start`.
pub fn jumps_per_cycle(events: &[JumpEvent], kind: ChannelKind, start: f64, period: f64, n_cycles: usize) -> Vec<usize> {
    let mut counts = vec![0; n_cycles];
    for e in events.iter().filter(|e| e.kind == kind) {
        let k = ((e.time - start) / period).floor();
        if k >= 0.0 && (k as usize) < n_cycles {
            counts[k as usize] += 1;
        }
    }
    counts
}

/// `histogram[j]` = number of (trajectory, cycle) pairs with exactly `j` jumps.
pub fn jump_histogram(per_cycle: &[Vec<usize>]) -> Vec<usize> {
    let max = per_cycle.iter().flatten().copied().max().unwrap_or(0);
    let mut hist = vec![0; max + 1];
    for c in per_cycle.iter().flatten() {
        hist[*c] += 1;
    }
    hist
}
