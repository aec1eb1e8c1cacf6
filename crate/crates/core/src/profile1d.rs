//! The one-dimensional heteroclinic `g`, solving `g″ = W′(g)`, `g(0) = 0`,
//! obtained by inverting `H(s) = ∫_0^s dz / √(2W(z))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{DoubleWellPotential, Well};
use crate::quad::integrate;
use crate::speed::{EndMode, Level, PhaseValue, ProfileTable, SpeedFunction};

/// Default distance from ±1 at which sampling stops.
pub const DEFAULT_CLIP: f64 = 1e-8;

/// Finite-difference step used by the residual checks.
pub const FD_STEP: f64 = 1e-3;

// The profile's middle piece; the tails are integrated in log-distance.
const HALF_WIDTH: f64 = 0.5;

impl SpeedFunction for DoubleWellPotential {
    fn lower_offset(&self) -> f64 {
        0.0
    }

    fn half_width(&self) -> f64 {
        HALF_WIDTH
    }

    fn lower_m(&self, d: f64) -> f64 {
        self.offset_quotient(Well::Minus, d, 0.0)
    }

    fn mid_h(&self, s: f64) -> f64 {
        self.w(s)
    }

    fn upper_m(&self, d: f64) -> f64 {
        self.offset_quotient(Well::Plus, d, 0.0)
    }
}

/// `H(s)` by adaptive quadrature, for `|s| ≤ 1 − DEFAULT_CLIP`.
pub fn compute_h(w: &DoubleWellPotential, s: f64) -> Result<f64> {
    compute_h_clipped(w, s, DEFAULT_CLIP)
}

pub fn compute_h_clipped(w: &DoubleWellPotential, s: f64, clip: f64) -> Result<f64> {
    if !(s.abs() <= 1.0 - clip) {
        return Err(Error::Domain(format!(
            "H({s}) requested but the integrand is nonintegrable at ±1; |s| must be ≤ {}",
            1.0 - clip
        )));
    }
    let inner = |z: f64| 1.0 / (2.0 * w.w(z)).sqrt();
    if s.abs() <= HALF_WIDTH {
        return Ok(integrate(&inner, 0.0, s, 1e-12).0);
    }
    // z = ∓1 ± e^σ near the wells.
    let (well, sign) = if s > 0.0 { (Well::Plus, 1.0) } else { (Well::Minus, -1.0) };
    let core = integrate(&inner, 0.0, sign * HALF_WIDTH, 1e-12).0;
    let tail_fn = |sigma: f64| {
        let d = sigma.exp();
        d / (2.0 * w.near(well, d).0).sqrt()
    };
    let tail = integrate(&tail_fn, (1.0 - s.abs()).ln(), HALF_WIDTH.ln(), 1e-12).0;
    Ok(core + sign * tail)
}

/// The sampled, invertible 1D profile.
#[derive(Debug, Clone)]
pub struct Profile1D {
    potential: DoubleWellPotential,
    clip: f64,
    table: ProfileTable,
}

impl Profile1D {
    pub fn new(w: &DoubleWellPotential) -> Result<Self> {
        Self::with_clip(w, DEFAULT_CLIP)
    }

    pub fn with_clip(w: &DoubleWellPotential, clip: f64) -> Result<Self> {
        if !(clip > 0.0 && clip < 0.1) {
            return Err(Error::Parameter(format!("clip must lie in (0, 0.1), got {clip}")));
        }
        let table = ProfileTable::build(w, EndMode::Clip(clip), EndMode::Clip(clip))?;
        Ok(Self {
            potential: w.clone(),
            clip,
            table,
        })
    }

    pub fn potential(&self) -> &DoubleWellPotential {
        &self.potential
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    /// `[H(−1 + clip), H(1 − clip)]`.
    pub fn range(&self) -> (f64, f64) {
        (self.table.t_lo, self.table.t_hi)
    }

    /// `g(t)` inside the sampled range.
    pub fn g_at(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::Range { value: t, lo, hi });
        }
        Ok(self.table.value(self.table.level_at(&self.potential, t)))
    }

    /// `g` on all of ℝ. Outside the sampled range the linearized tails
    /// `±1 ∓ A± e^{∓√W″(±1) t}` are used, with `A±` matched at the range ends.
    pub fn level(&self, t: f64) -> Level {
        let (lo, hi) = self.range();
        if t < lo {
            Level::Lower(self.clip * (self.potential.k_minus().sqrt() * (t - lo)).exp())
        } else if t > hi {
            Level::Upper(self.clip * (-self.potential.k_plus().sqrt() * (t - hi)).exp())
        } else {
            self.table.level_at(&self.potential, t)
        }
    }

    pub fn g(&self, t: f64) -> f64 {
        self.table.value(self.level(t))
    }

    pub fn phase(&self, t: f64) -> PhaseValue {
        self.table.phase_value(self.level(t))
    }

    /// `g′(t) = √(2W(g(t)))`.
    pub fn dg(&self, t: f64) -> f64 {
        (2.0 * ProfileTable::h_at(&self.potential, self.level(t))).sqrt()
    }

    /// `W′(g(t))`, evaluated in offset form near the wells.
    pub fn dw_of_g(&self, t: f64) -> f64 {
        dw_at_level(&self.potential, 0.0, self.level(t))
    }

    /// `H(s)` read from the table; `s` must lie in the sampled value range.
    pub fn t_of(&self, s: f64) -> Result<f64> {
        if !(s.abs() <= 1.0 - self.clip) {
            return Err(Error::Domain(format!("value {s} outside the sampled range")));
        }
        Ok(self.table.t_at(&self.potential, self.table.level_of_value(s)))
    }

    /// Sup of `|g″ − W′(g)|` over `[−6, 6]` (step 0.01) with centered second
    /// differences at spacing `FD_STEP`, plus the equipartition gap
    /// `|½g′² − W(g)|` with `g′` from fourth-order centered differences.
    pub fn verify_ode(&self) -> Result<OdeReport> {
        if self.clip > 1e-4 {
            return Err(Error::Precondition(format!(
                "ODE verification needs clip ≤ 1e-4, profile built with {}",
                self.clip
            )));
        }
        let h = FD_STEP;
        let mut report = OdeReport {
            sup_residual: 0.0,
            at_t: 0.0,
            sup_equipartition_gap: 0.0,
            gap_at_t: 0.0,
        };
        for i in 0..=1200 {
            let t = -6.0 + 0.01 * i as f64;
            let gm2 = self.g(t - 2.0 * h);
            let gm = self.g(t - h);
            let g0 = self.g(t);
            let gp = self.g(t + h);
            let gp2 = self.g(t + 2.0 * h);
            let g2 = (gp - 2.0 * g0 + gm) / (h * h);
            let res = (g2 - self.dw_of_g(t)).abs();
            if res > report.sup_residual {
                report.sup_residual = res;
                report.at_t = t;
            }
            let g1 = (8.0 * (gp - gm) - (gp2 - gm2)) / (12.0 * h);
            let gap = (0.5 * g1 * g1 - self.potential.w(g0)).abs();
            if gap > report.sup_equipartition_gap {
                report.sup_equipartition_gap = gap;
                report.gap_at_t = t;
            }
        }
        Ok(report)
    }

    /// Rows `(t, g, g′, residual)` on `[t0, t1]` with `steps` intervals.
    pub fn sample_rows(&self, t0: f64, t1: f64, steps: usize) -> Vec<[f64; 4]> {
        let h = FD_STEP;
        (0..=steps)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / steps.max(1) as f64;
                let g2 = (self.g(t + h) - 2.0 * self.g(t) + self.g(t - h)) / (h * h);
                [t, self.g(t), self.dg(t), g2 - self.dw_of_g(t)]
            })
            .collect()
    }

    /// Corrupts the stored times by `amplitude·sin(t)`.
    pub fn perturb_times(&mut self, amplitude: f64) {
        self.table.perturb_times(|t| amplitude * t.sin());
    }
}

/// `W′` at a level whose lower offset is `x_e`.
pub(crate) fn dw_at_level(w: &DoubleWellPotential, x_e: f64, level: Level) -> f64 {
    match level {
        Level::Lower(d) => w.near(Well::Minus, x_e + d).1,
        Level::Mid(s) => w.dw(s),
        Level::Upper(d) => w.near(Well::Plus, d).1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeReport {
    pub sup_residual: f64,
    pub at_t: f64,
    pub sup_equipartition_gap: f64,
    pub gap_at_t: f64,
}
