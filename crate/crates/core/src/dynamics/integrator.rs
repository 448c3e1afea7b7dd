//! Dormand–Prince 5(4) with adaptive step control on complex state vectors.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)` of a linear (or any) ODE system.
pub trait Generator {
    fn len(&self) -> usize;
    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on a single step.
    pub h_max: f64,
    /// Steps below this are reported as an underflow.
    pub h_min: f64,
}

impl Tolerances {
    pub fn closed() -> Self {
        Self { rtol: 1e-8, atol: 1e-12, h_max: 500.0, h_min: 1e-9 }
    }

    pub fn open() -> Self {
        Self { rtol: 1e-7, atol: 1e-9, h_max: 500.0, h_min: 1e-9 }
    }

    pub fn with_h_max(self, h_max: f64) -> Self {
        Self { h_max, ..self }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Stateful stepper. Holds stage buffers and the current step-size proposal;
/// the caller owns `(t, y)`.
pub struct Dopri5 {
    pub tol: Tolerances,
    h: Option<f64>,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
    /// First stage at the current point is valid (FSAL).
    fsal: bool,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(n: usize, tol: Tolerances) -> Self {
        let z = || vec![C64::new(0.0, 0.0); n];
        Self {
            tol,
            h: None,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
            fsal: false,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Forget cached derivative; required whenever `y` is modified externally.
    pub fn reset(&mut self) {
        self.fsal = false;
    }

    fn initial_step<G: Generator>(&mut self, g: &G, t: f64, y: &[C64]) -> f64 {
        // Hairer–Wanner starting step heuristic
        g.eval(t, y, &mut self.k[0]);
        self.fsal = true;
        let (mut d0, mut d1) = (0.0, 0.0);
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sc = self.tol.atol + self.tol.rtol * yi.norm();
            d0 += (yi.norm() / sc).powi(2);
            d1 += (fi.norm() / sc).powi(2);
        }
        let n = y.len().max(1) as f64;
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.tol.h_max);
        for (i, yi) in y.iter().enumerate() {
            self.tmp[i] = yi + self.k[0][i] * h0;
        }
        g.eval(t + h0, &self.tmp, &mut self.k[1]);
        let mut d2 = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let sc = self.tol.atol + self.tol.rtol * yi.norm();
            d2 += ((self.k[1][i] - self.k[0][i]).norm() / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(self.tol.h_max)
    }

    /// One Runge–Kutta step of size `h` from `(t, y)` into `self.y_new`;
    /// returns the scaled error norm.
    fn attempt<G: Generator>(&mut self, g: &G, t: f64, y: &[C64], h: f64) -> f64 {
        if !self.fsal {
            g.eval(t, y, &mut self.k[0]);
            self.fsal = true;
        }
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, $( ($a:expr, $j:expr) ),+ ) => {{
                for i in 0..n {
                    let mut acc = y[i];
                    $( acc += self.k[$j][i] * ($a * h); )+
                    self.tmp[i] = acc;
                }
                let (tmp, k) = (&self.tmp, &mut self.k);
                g.eval(t + $c * h, tmp, &mut k[$dst]);
            }};
        }
        stage!(1, C2, (A21, 0));
        stage!(2, C3, (A31, 0), (A32, 1));
        stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
        stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
        stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
        for i in 0..n {
            self.y_new[i] = y[i]
                + (self.k[0][i] * A71
                    + self.k[2][i] * A73
                    + self.k[3][i] * A74
                    + self.k[4][i] * A75
                    + self.k[5][i] * A76)
                    * h;
        }
        g.eval(t + h, &self.y_new, &mut self.k[6]);
        let mut err = 0.0;
        for i in 0..n {
            let e = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(self.y_new[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        (err / n.max(1) as f64).sqrt()
    }

    /// Takes one accepted step from `t` towards `t_limit` (never past it),
    /// updating `t` and `y` in place. Returns the step size used.
    pub fn step<G: Generator>(&mut self, g: &G, t: &mut f64, y: &mut [C64], t_limit: f64) -> Result<f64> {
        let remaining = t_limit - *t;
        if remaining <= 0.0 {
            return Ok(0.0);
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(g, *t, y),
        };
        loop {
            h = h.min(self.tol.h_max);
            // land exactly on t_limit, and avoid leaving a sliver behind
            let clamped = remaining <= h * 1.01;
            let h_try = if clamped { remaining } else { h };
            let err = self.attempt(g, *t, y, h_try);
            if err.is_finite() && err <= 1.0 {
                let factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
                // a clamped step says nothing about how large h may grow
                let proposal = if clamped { h.max(h_try * factor) } else { h_try * factor };
                self.h = Some(proposal.min(self.tol.h_max));
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                *t = if clamped { t_limit } else { *t + h_try };
                self.accepted += 1;
                return Ok(h_try);
            }
            self.rejected += 1;
            self.fsal = true; // k[0] is still the derivative at t
            let factor = if err.is_finite() { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0) } else { MIN_FACTOR };
            h = h_try * factor;
            if h < self.tol.h_min {
                return Err(Error::StepSizeUnderflow { t: *t, h });
            }
        }
    }

    /// Advances `(t, y)` to exactly `t_end`.
    pub fn advance<G: Generator>(&mut self, g: &G, t: &mut f64, y: &mut [C64], t_end: f64) -> Result<()> {
        while *t < t_end {
            self.step(g, t, y, t_end)?;
        }
        Ok(())
    }

    /// Single unchecked step of size `h` (used to re-evaluate inside an
    /// already accepted step, where the error is known to be small).
    pub fn fixed_step<G: Generator>(&mut self, g: &G, t: f64, y: &[C64], h: f64, out: &mut [C64]) {
        self.fsal = false;
        self.attempt(g, t, y, h);
        out.copy_from_slice(&self.y_new);
        self.fsal = false;
    }
}

/// Integrates over `grid` (ascending, starting at the initial time), calling
/// `observe(t, y)` at every grid point including the first.
pub fn integrate<G, F>(g: &G, tol: Tolerances, y0: &[C64], grid: &[f64], mut observe: F) -> Result<Vec<C64>>
where
    G: Generator,
    F: FnMut(f64, &[C64]) -> Result<()>,
{
    let mut y = y0.to_vec();
    let Some(&t0) = grid.first() else {
        return Ok(y);
    };
    let mut t = t0;
    let mut stepper = Dopri5::new(y.len(), tol);
    for &tg in grid {
        stepper.advance(g, &mut t, &mut y, tg)?;
        observe(t, &y)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotor(f64);

    impl Generator for Rotor {
        fn len(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(0.0, -self.0) * y[0];
        }
    }

    struct Chirp;

    impl Generator for Chirp {
        fn len(&self) -> usize {
            1
        }
        // y' = -i t y  →  y = exp(-i t²/2)
        fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(0.0, -t) * y[0];
        }
    }

    #[test]
    fn phase_rotation_is_accurate() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.5).collect();
        let mut max_err: f64 = 0.0;
        integrate(&Rotor(1.3), Tolerances::closed(), &[C64::new(1.0, 0.0)], &grid, |t, y| {
            max_err = max_err.max((y[0] - C64::from_polar(1.0, -1.3 * t)).norm());
            Ok(())
        })
        .unwrap();
        assert!(max_err < 5e-7, "{max_err}");
    }

    #[test]
    fn time_dependent_generator() {
        let grid = [0.0, 1.0, 3.0, 6.0];
        let y = integrate(&Chirp, Tolerances::closed(), &[C64::new(1.0, 0.0)], &grid, |_, _| Ok(())).unwrap();
        assert!((y[0] - C64::from_polar(1.0, -18.0)).norm() < 1e-7);
    }

    #[test]
    fn lands_on_every_grid_point() {
        let grid = [0.0, 1e-3, 0.5, 0.5 + 1e-9, 700.0];
        let mut seen = Vec::new();
        integrate(&Rotor(0.0), Tolerances::closed(), &[C64::new(1.0, 0.0)], &grid, |t, _| {
            seen.push(t);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, grid);
    }

    #[test]
    fn stiff_problem_reports_underflow() {
        let tol = Tolerances { h_min: 1e-3, ..Tolerances::closed() };
        let mut stepper = Dopri5::new(1, tol);
        let mut t = 0.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        let r = stepper.advance(&Rotor(1e9), &mut t, &mut y, 1.0);
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })));
    }
}
