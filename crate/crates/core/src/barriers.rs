//! Cutoff approximations of the 1D profile built from modified speed
//! functions, and the checks that make them barriers.
//!
//! A barrier profile `b` with `b′ = √(2h(b))` satisfies
//! `b″ + (2(n−1)/R)·b′ ≤ W′(b) + (C/R)·χ` exactly when the speed function obeys
//! `h′ + (2^{3/2}(n−1)/R)·√h ≤ W′(s) + (C/R)·χ_[−c,c]`.
//! Two families are provided:
//!
//! * [`Variant::G`] lives on `[s_R − 1, 1]` with `s_R = C₁/R` and reaches its
//!   ends within `O(log R)`;
//! * [`Variant::Rho`] lives on `[p_R − 1, 1]` with `p_R = e^{−c₁R}` and stays
//!   within `R/2` of the origin.
//!
//! Near the wells `h` is handled as `d·m(d)` with `d` the distance to the
//! interval end, see [`crate::speed`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{DoubleWellPotential, Well};
use crate::profile1d::{compute_h, dw_at_level, Profile1D, FD_STEP};
use crate::speed::{EndMode, Level, PhaseValue, ProfileTable, SpeedFunction};

/// Smallest scale at which the "R large" statements are exercised.
pub const R_MIN: f64 = 50.0;

/// Confirmation failures tolerated before giving up on a potential.
pub const MAX_DOUBLINGS: u32 = 8;

/// Allowed excess of LHS over W′ outside the glue interval.
pub const OUTSIDE_TOL: f64 = 1e-10;

const GLUE_CANDIDATES: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// Logarithmic-width cutoff.
    G,
    /// Cutoff at distance `R/2`.
    Rho,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G" => Ok(Variant::G),
            "RHO" => Ok(Variant::Rho),
            other => Err(Error::Format(format!("unknown barrier variant {other:?} (G or RHO)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::G => "G",
            Variant::Rho => "RHO",
        })
    }
}

/// The constants `C₁, C₂, c, c₁` of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierConstants {
    /// `C₁`: the lower offset of variant G is `C₁/R`.
    pub offset_scale: f64,
    /// `C₂`: size of the `1/R` correction added to W.
    pub drift_margin: f64,
    /// `c`: half-width of the glue interval.
    pub glue_half_width: f64,
    /// `c₁`: the lower offset of variant RHO is `e^{−c₁R}`.
    pub cutoff_rate: f64,
    /// How many times `C₂` was doubled during confirmation.
    pub doublings: u32,
}

impl BarrierConstants {
    fn with_margin(w: &DoubleWellPotential, c2: f64, c: f64, doublings: u32) -> Self {
        Self {
            offset_scale: 2.0 * c2 / w.k_minus(),
            drift_margin: c2,
            glue_half_width: c,
            cutoff_rate: w.k_plus().sqrt() / 4.0,
            doublings,
        }
    }
}

/// Closed-form constants, confirmed at `R_MIN` by the inequality check and
/// the breakpoint bounds; `C₂` is doubled (and `C₁` recomputed) on failure.
pub fn choose_constants(w: &DoubleWellPotential, n: usize, variant: Variant) -> Result<BarrierConstants> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if !(w.k_minus() > 0.0 && w.k_plus() > 0.0) {
        return Err(Error::Construction("potential has degenerate wells".into()));
    }
    let mut c = None;
    for &cand in &GLUE_CANDIDATES {
        if compute_h(w, cand)?.abs() <= 1.0 && compute_h(w, -cand)?.abs() <= 1.0 {
            c = Some(cand);
            break;
        }
    }
    let c = c.ok_or_else(|| {
        Error::Construction("no glue half-width c with |H(±c)| ≤ 1 among 1/2 … 1/16".into())
    })?;
    let mut c2 = 2f64.powf(1.5) * (n as f64 - 1.0) * (w.max_on_interval() + 1.0).sqrt() + 1.0;
    let mut last = String::new();
    for doublings in 0..=MAX_DOUBLINGS {
        let consts = BarrierConstants::with_margin(w, c2, c, doublings);
        match BarrierProfile::with_constants(w, R_MIN, n, variant, consts) {
            Ok(_) => return Ok(consts),
            Err(e) => last = e.to_string(),
        }
        c2 *= 2.0;
    }
    Err(Error::Construction(format!(
        "constants not confirmed after {MAX_DOUBLINGS} doublings of C2 (potential too degenerate for R = {R_MIN}): {last}"
    )))
}

/// Two cubic Hermite pieces on `[−c, 0]` and `[0, c]`, pinned at `(0, 0)`,
/// matching value and slope of the outer pieces at `±c` and C² at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Glue {
    pub half_width: f64,
    pub left_value: f64,
    pub left_slope: f64,
    pub center_slope: f64,
    pub right_value: f64,
    pub right_slope: f64,
}

impl Glue {
    fn new(c: f64, left_value: f64, left_slope: f64, right_value: f64, right_slope: f64) -> Self {
        // Equal second derivatives at 0 fix the free slope.
        let center_slope = (3.0 * (right_value - left_value) / c - (left_slope + right_slope)) / 4.0;
        Self {
            half_width: c,
            left_value,
            left_slope,
            center_slope,
            right_value,
            right_slope,
        }
    }

    fn piece(&self, s: f64) -> ([f64; 4], f64) {
        let c = self.half_width;
        let (y0, m0, y1, m1, u) = if s < 0.0 {
            (self.left_value, self.left_slope, 0.0, self.center_slope, s + c)
        } else {
            (0.0, self.center_slope, self.right_value, self.right_slope, s)
        };
        let d = (y1 - y0) / c;
        ([y0, m0, (3.0 * d - 2.0 * m0 - m1) / c, (m0 + m1 - 2.0 * d) / (c * c)], u)
    }

    /// `(φ, φ′)`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let (p, u) = self.piece(s);
        (
            p[0] + u * (p[1] + u * (p[2] + u * p[3])),
            p[1] + u * (2.0 * p[2] + 3.0 * u * p[3]),
        )
    }
}

/// The modified speed function `h` (or `h̄`) of one barrier.
#[derive(Debug, Clone)]
pub struct BarrierSpeed {
    w: DoubleWellPotential,
    r: f64,
    n: usize,
    variant: Variant,
    consts: BarrierConstants,
    /// Distance of the lower endpoint from −1 (`s_R` or `p_R`).
    lower_offset: f64,
    glue: Glue,
}

impl BarrierSpeed {
    /// Assembles `h` and checks `h > 0` in the interior.
    pub fn build(
        w: &DoubleWellPotential,
        r: f64,
        n: usize,
        variant: Variant,
        consts: BarrierConstants,
    ) -> Result<Self> {
        if !(r >= R_MIN) {
            return Err(Error::Parameter(format!("R must be at least {R_MIN}, got {r}")));
        }
        if n == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        let c = consts.glue_half_width;
        let q = consts.drift_margin / r;
        let x_e = match variant {
            Variant::G => consts.offset_scale / r,
            Variant::Rho => (-consts.cutoff_rate * r).exp(),
        };
        if !(x_e < 1.0 - c) {
            return Err(Error::Construction(format!(
                "lower offset {x_e} swallows the lower piece [−1 + offset, −c]"
            )));
        }
        let w_end = w.near(Well::Minus, x_e).0;
        let span = 1.0 - c;
        // h − W and its s-derivative at ∓c, read from the outer pieces.
        let (lower_corr, lower_slope, upper_corr, upper_slope) = match variant {
            Variant::G => (-w_end - q * (span - x_e), -q, q * span, -q),
            Variant::Rho => {
                let p = x_e;
                (
                    -w_end - q * (span * span - p * p),
                    -2.0 * q * span,
                    q * span * span + p * span,
                    -2.0 * q * span - p,
                )
            }
        };
        let glue = Glue::new(c, lower_corr / q, lower_slope / q, upper_corr / q, upper_slope / q);
        let speed = Self {
            w: w.clone(),
            r,
            n,
            variant,
            consts,
            lower_offset: x_e,
            glue,
        };
        speed.check_glue_signs()?;
        Ok(speed)
    }

    fn check_glue_signs(&self) -> Result<()> {
        let c = self.glue.half_width;
        for i in 1..=200 {
            let s = c * i as f64 / 200.0;
            let (right, _) = self.glue.eval(s);
            let (left, _) = self.glue.eval(-s);
            if !(right > 0.0 && left < 0.0) {
                return Err(Error::Construction(format!(
                    "glue sign pattern violated near s = ±{s}"
                )));
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> &DoubleWellPotential {
        &self.w
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn constants(&self) -> BarrierConstants {
        self.consts
    }

    pub fn glue(&self) -> Glue {
        self.glue
    }

    /// `s_R` (variant G) or `p_R` (variant RHO).
    pub fn lower_offset(&self) -> f64 {
        self.lower_offset
    }

    fn q(&self) -> f64 {
        self.consts.drift_margin / self.r
    }

    /// `2^{3/2}(n−1)/R`.
    pub fn drift(&self) -> f64 {
        2f64.powf(1.5) * (self.n as f64 - 1.0) / self.r
    }

    pub fn h(&self, level: Level) -> f64 {
        ProfileTable::h_at(self, level)
    }

    /// `h′ − W′` at a level.
    pub fn correction_slope(&self, level: Level) -> f64 {
        let q = self.q();
        match (self.variant, level) {
            (Variant::G, Level::Lower(_)) | (Variant::G, Level::Upper(_)) => -q,
            (Variant::Rho, Level::Lower(d)) => -2.0 * q * (self.lower_offset + d),
            (Variant::Rho, Level::Upper(d)) => -2.0 * q * d - self.lower_offset,
            (_, Level::Mid(s)) => q * self.glue.eval(s).1,
        }
    }

    /// `h′(s)`, which is the profile's second derivative at that level.
    pub fn dh(&self, level: Level) -> f64 {
        dw_at_level(&self.w, self.lower_offset, level) + self.correction_slope(level)
    }

    /// `h′ + (2^{3/2}(n−1)/R)√h − W′` at a level.
    pub fn inequality_excess(&self, level: Level) -> f64 {
        self.correction_slope(level) + self.drift() * self.h(level).max(0.0).sqrt()
    }

    fn value_of(&self, level: Level) -> f64 {
        match level {
            Level::Lower(d) => -1.0 + (self.lower_offset + d),
            Level::Mid(s) => s,
            Level::Upper(d) => 1.0 - d,
        }
    }

    /// Evaluation grid: 4000 uniform points over the whole interval and 3000
    /// log-spaced points in each tail.
    pub fn check_grid(&self) -> Vec<Level> {
        let x_e = self.lower_offset;
        let c = self.consts.glue_half_width;
        let span_lo = 1.0 - c - x_e;
        let span_up = 1.0 - c;
        let total = 2.0 - x_e;
        let mut grid = Vec::with_capacity(10_000);
        for i in 0..4000 {
            let delta = total * i as f64 / 3999.0;
            let level = if delta < span_lo {
                Level::Lower(delta)
            } else {
                let s = -1.0 + x_e + delta;
                if s <= c {
                    Level::Mid(s.max(-c))
                } else {
                    Level::Upper((total - delta).max(0.0))
                }
            };
            grid.push(level);
        }
        let lo_min = (x_e * 1e-12).max(1e-300).min(span_lo * 1e-12);
        let up_scale = match self.variant {
            Variant::G => self.q(),
            Variant::Rho => x_e,
        };
        let up_min = (up_scale.min(1e-3) * 1e-12).max(1e-300);
        for i in 0..3000 {
            let f = i as f64 / 2999.0;
            grid.push(Level::Lower((lo_min.ln() + f * (span_lo.ln() - lo_min.ln())).exp()));
            grid.push(Level::Upper((up_min.ln() + f * (span_up.ln() - up_min.ln())).exp()));
        }
        grid
    }

    /// Evaluates the first-order inequality on [`Self::check_grid`].
    pub fn check_ode_inequality(&self) -> InequalityReport {
        let mut report = InequalityReport {
            outside_sup: f64::NEG_INFINITY,
            outside_at: f64::NAN,
            c_star: 0.0,
            c_star_at: f64::NAN,
            min_interior_h: f64::INFINITY,
            points: 0,
        };
        let glue_max = self.consts.glue_half_width;
        for level in self.check_grid() {
            report.points += 1;
            let excess = self.inequality_excess(level);
            let s = self.value_of(level);
            let interior = match level {
                Level::Lower(d) | Level::Upper(d) => d > 0.0,
                Level::Mid(_) => true,
            };
            if interior {
                report.min_interior_h = report.min_interior_h.min(self.h(level));
            }
            match level {
                Level::Mid(m) if m.abs() <= glue_max => {
                    let scaled = self.r * excess.max(0.0);
                    if scaled > report.c_star || report.c_star_at.is_nan() {
                        report.c_star = report.c_star.max(scaled);
                        report.c_star_at = m;
                    }
                }
                _ => {
                    if excess > report.outside_sup {
                        report.outside_sup = excess;
                        report.outside_at = s;
                    }
                }
            }
        }
        report
    }

    /// Rows `(s, h, W, LHS − W′, LHS − RHS)` with `RHS = W′ + (C*/R)·χ_[−c,c]`.
    pub fn inequality_rows(&self) -> Vec<[f64; 5]> {
        let c_star = self.check_ode_inequality().c_star;
        let c = self.consts.glue_half_width;
        let mut rows: Vec<[f64; 5]> = self
            .check_grid()
            .into_iter()
            .map(|level| {
                let s = self.value_of(level);
                let w = match level {
                    Level::Lower(d) => self.w.near(Well::Minus, self.lower_offset + d).0,
                    Level::Mid(m) => self.w.w(m),
                    Level::Upper(d) => self.w.near(Well::Plus, d).0,
                };
                let excess = self.inequality_excess(level);
                let chi = matches!(level, Level::Mid(m) if m.abs() <= c);
                let rhs_extra = if chi { c_star / self.r } else { 0.0 };
                [s, self.h(level), w, excess, excess - rhs_extra]
            })
            .collect();
        rows.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        rows
    }
}

impl SpeedFunction for BarrierSpeed {
    fn lower_offset(&self) -> f64 {
        self.lower_offset
    }

    fn half_width(&self) -> f64 {
        self.consts.glue_half_width
    }

    fn lower_m(&self, d: f64) -> f64 {
        let x_e = self.lower_offset;
        let x = x_e + d;
        let quotient = self.w.offset_quotient(Well::Minus, x, x_e);
        match self.variant {
            Variant::G => quotient - self.q(),
            Variant::Rho => quotient - self.q() * (x + x_e),
        }
    }

    fn mid_h(&self, s: f64) -> f64 {
        self.w.w(s) + self.q() * self.glue.eval(s).0
    }

    fn upper_m(&self, d: f64) -> f64 {
        let quotient = self.w.offset_quotient(Well::Plus, d, 0.0);
        match self.variant {
            Variant::G => quotient + self.q(),
            Variant::Rho => quotient + self.q() * d + self.lower_offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    /// Largest `LHS − W′` outside `[−c, c]`; must not exceed [`OUTSIDE_TOL`].
    pub outside_sup: f64,
    pub outside_at: f64,
    /// `R · sup_[−c,c] max(LHS − W′, 0)`: the smallest admissible `C`.
    pub c_star: f64,
    pub c_star_at: f64,
    pub min_interior_h: f64,
    pub points: usize,
}

impl InequalityReport {
    pub fn outside_ok(&self) -> bool {
        self.outside_sup <= OUTSIDE_TOL
    }
}

/// Factor `C` in the bound `|t±| ≤ C log R` for variant G.
pub fn log_width_factor(w: &DoubleWellPotential) -> f64 {
    2.0 / w.k_minus().min(w.k_plus()).sqrt()
}

/// A built barrier: speed function plus the inverted profile.
#[derive(Debug, Clone)]
pub struct BarrierProfile {
    speed: BarrierSpeed,
    table: ProfileTable,
    inequality: InequalityReport,
}

impl BarrierProfile {
    /// Chooses constants, then builds at scale `r`.
    pub fn build(w: &DoubleWellPotential, r: f64, n: usize, variant: Variant) -> Result<Self> {
        let consts = choose_constants(w, n, variant)?;
        Self::with_constants(w, r, n, variant, consts)
    }

    pub fn with_constants(
        w: &DoubleWellPotential,
        r: f64,
        n: usize,
        variant: Variant,
        consts: BarrierConstants,
    ) -> Result<Self> {
        let speed = BarrierSpeed::build(w, r, n, variant, consts)?;
        Self::from_speed(speed)
    }

    /// Inverts `H_R(s) = ∫_0^s dz/√(2h(z))` and checks the breakpoint bounds.
    pub fn from_speed(speed: BarrierSpeed) -> Result<Self> {
        let inequality = speed.check_ode_inequality();
        if !inequality.outside_ok() {
            return Err(Error::Construction(format!(
                "first-order inequality violated by {:e} at s = {} (tolerance {OUTSIDE_TOL:e})",
                inequality.outside_sup, inequality.outside_at
            )));
        }
        if !(inequality.min_interior_h > 0.0) {
            return Err(Error::Construction(format!(
                "speed function not positive in the interior (min {:e})",
                inequality.min_interior_h
            )));
        }
        let table = ProfileTable::build(&speed, EndMode::Reach, EndMode::Reach)?;
        let profile = Self {
            speed,
            table,
            inequality,
        };
        profile.check_breakpoints()?;
        Ok(profile)
    }

    fn check_breakpoints(&self) -> Result<()> {
        let (lo, hi) = self.breakpoints();
        let r = self.speed.r;
        match self.speed.variant {
            Variant::G => {
                let bound = log_width_factor(&self.speed.w) * r.ln();
                if lo.abs() > bound || hi.abs() > bound {
                    return Err(Error::Construction(format!(
                        "breakpoints ({lo}, {hi}) exceed C·log R = {bound}"
                    )));
                }
            }
            Variant::Rho => {
                if lo.abs() > r / 2.0 || hi.abs() > r / 2.0 {
                    return Err(Error::Construction(format!(
                        "breakpoints ({lo}, {hi}) exceed R/2 = {}",
                        r / 2.0
                    )));
                }
            }
        }
        let c = self.speed.consts.glue_half_width;
        let (tc_lo, tc_hi) = (self.t_of_value(-c), self.t_of_value(c));
        if tc_lo < -1.0 || tc_hi > 1.0 {
            return Err(Error::Construction(format!(
                "{{|profile| ≤ c}} = [{tc_lo}, {tc_hi}] is not inside [−1, 1]"
            )));
        }
        Ok(())
    }

    pub fn speed(&self) -> &BarrierSpeed {
        &self.speed
    }

    pub fn variant(&self) -> Variant {
        self.speed.variant
    }

    pub fn r(&self) -> f64 {
        self.speed.r
    }

    pub fn n(&self) -> usize {
        self.speed.n
    }

    pub fn constants(&self) -> BarrierConstants {
        self.speed.consts
    }

    pub fn inequality(&self) -> InequalityReport {
        self.inequality
    }

    /// `(t⁻, t⁺)` (or `(q⁻, q⁺)`): the profile is constant outside.
    pub fn breakpoints(&self) -> (f64, f64) {
        (self.table.t_lo, self.table.t_hi)
    }

    /// `max(|t⁻|, |t⁺|) / log R`: the fitted constant of the logarithmic
    /// width bound.
    pub fn log_width_ratio(&self) -> f64 {
        let (lo, hi) = self.breakpoints();
        lo.abs().max(hi.abs()) / self.speed.r.ln()
    }

    /// The profile's time at value `s` (inside its value range).
    pub fn t_of_value(&self, s: f64) -> f64 {
        self.table.t_at(&self.speed, self.table.level_of_value(s))
    }

    pub fn level(&self, t: f64) -> Level {
        self.table.level_at(&self.speed, t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.table.value(self.level(t))
    }

    pub fn phase(&self, t: f64) -> PhaseValue {
        self.table.phase_value(self.level(t))
    }

    /// `√(2h)` at time `t` (zero on the constant parts).
    pub fn derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.breakpoints();
        if t <= lo || t >= hi {
            return 0.0;
        }
        (2.0 * self.speed.h(self.level(t))).sqrt()
    }

    /// `W′(profile(t))` in offset form.
    pub fn dw_of_value(&self, t: f64) -> f64 {
        dw_at_level(&self.speed.w, self.speed.lower_offset, self.level(t))
    }

    /// Compares with the 1D profile: sup of `|b − g|` on `[−4, 4]`, that sup
    /// times `R`, and (variant G) `min(b − g)` over a grid covering both
    /// breakpoints with 5 units of margin.
    pub fn compare_to_g(&self, g: &Profile1D) -> Result<ComparisonReport> {
        if g.potential() != &self.speed.w {
            return Err(Error::Precondition("barrier and profile use different potentials".into()));
        }
        let mut sup = 0.0f64;
        let mut sup_at = 0.0;
        for i in 0..=8000 {
            let t = -4.0 + 1e-3 * i as f64;
            let diff = self.phase(t).minus(&g.phase(t)).abs();
            if diff > sup {
                sup = diff;
                sup_at = t;
            }
        }
        let min_diff = match self.speed.variant {
            Variant::G => {
                let (lo, hi) = self.breakpoints();
                let (a, b) = (lo - 5.0, hi + 5.0);
                let steps = ((b - a) / 1e-2).ceil() as usize;
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..=steps {
                    let t = a + (b - a) * i as f64 / steps as f64;
                    let diff = self.phase(t).minus(&g.phase(t));
                    if diff < best.0 {
                        best = (diff, t);
                    }
                }
                Some(best)
            }
            Variant::Rho => None,
        };
        Ok(ComparisonReport {
            r: self.speed.r,
            sup_on_window: sup,
            sup_at,
            scaled_sup: self.speed.r * sup,
            min_difference: min_diff.map(|m| m.0),
            min_at: min_diff.map(|m| m.1),
            gap_at_zero: self.phase(0.0).minus(&g.phase(0.0)),
        })
    }

    /// Radial residual `b″(r−R) + ((n−1)/r)·b′(r−R) − W′(b(r−R))` by finite
    /// differences at spacing `FD_STEP`, one-sided next to the breakpoints.
    pub fn radial_residual(&self, r_grid: &[f64]) -> Result<RadialReport> {
        let big_r = self.speed.r;
        if let Some(bad) = r_grid.iter().find(|&&r| !(r >= big_r / 2.0 && r <= 2.0 * big_r)) {
            return Err(Error::Precondition(format!(
                "radius {bad} outside [R/2, 2R] = [{}, {}]",
                big_r / 2.0,
                2.0 * big_r
            )));
        }
        let h = FD_STEP;
        let (lo, hi) = self.breakpoints();
        let n1 = self.speed.n as f64 - 1.0;
        let mut report = RadialReport {
            r: big_r,
            n: self.speed.n,
            annulus_sup: f64::NEG_INFINITY,
            annulus_at: f64::NAN,
            outside_sup: f64::NEG_INFINITY,
            outside_at: f64::NAN,
            c_star_bound: self.inequality.c_star / big_r,
            points: r_grid.len(),
        };
        for &r in r_grid {
            let t = r - big_r;
            let straddles = |b: f64| t - h < b && b < t + h;
            // Offsets of the stencil nodes and the matching weights.
            let (nodes, w2, w1): (&[f64], &[f64], &[f64]) =
                if (straddles(lo) && t >= lo) || (straddles(hi) && t > hi) {
                    (&[0.0, 1.0, 2.0, 3.0], &[2.0, -5.0, 4.0, -1.0], &[-1.5, 2.0, -0.5, 0.0])
                } else if (straddles(lo) && t < lo) || (straddles(hi) && t <= hi) {
                    (&[0.0, -1.0, -2.0, -3.0], &[2.0, -5.0, 4.0, -1.0], &[1.5, -2.0, 0.5, 0.0])
                } else {
                    (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0], &[-0.5, 0.0, 0.5])
                };
            let center = self.phase(t);
            let mut d2 = 0.0;
            let mut d1 = 0.0;
            for (k, &off) in nodes.iter().enumerate() {
                let diff = self.phase(t + off * h).minus(&center);
                d2 += w2[k] * diff;
                d1 += w1[k] * diff;
            }
            let residual = d2 / (h * h) + n1 / r * (d1 / h) - self.dw_of_value(t);
            if (r - big_r).abs() <= 1.0 {
                if residual > report.annulus_sup {
                    report.annulus_sup = residual;
                    report.annulus_at = r;
                }
            } else if residual > report.outside_sup {
                report.outside_sup = residual;
                report.outside_at = r;
            }
        }
        Ok(report)
    }

    /// Rows `(t, profile(t), profile′(t))` on `[t0, t1]`.
    pub fn profile_rows(&self, t0: f64, t1: f64, steps: usize) -> Vec<[f64; 3]> {
        (0..=steps)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / steps.max(1) as f64;
                [t, self.value(t), self.derivative(t)]
            })
            .collect()
    }
}

/// Checks `ρ_R(t) ≤ g_Q(t + R^{−1/5}) + 1e−12` on a grid of step 0.005
/// covering `[q⁻, q⁺]`.
pub fn check_rho_ordering(rho: &BarrierProfile, gq: &BarrierProfile) -> Result<OrderingReport> {
    if rho.variant() != Variant::Rho || gq.variant() != Variant::G {
        return Err(Error::Precondition(
            "ordering check needs a RHO barrier and a G barrier".into(),
        ));
    }
    if rho.speed.w != gq.speed.w {
        return Err(Error::Precondition("barriers use different potentials".into()));
    }
    let r = rho.r();
    let q = gq.r();
    let q_max = (4.0 * r).powf(2.5);
    if q > q_max * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("Q = {q} exceeds (4R)^(5/2) = {q_max}")));
    }
    let shift = r.powf(-0.2);
    let (lo, hi) = rho.breakpoints();
    let (a, b) = (lo - 1.0, hi + 1.0);
    let steps = ((b - a) / 5e-3).ceil() as usize;
    let mut worst = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let t = a + (b - a) * i as f64 / steps as f64;
        let margin = gq.phase(t + shift).minus(&rho.phase(t));
        if margin < worst.0 {
            worst = (margin, t);
        }
    }
    Ok(OrderingReport {
        r,
        q,
        shift,
        worst_margin: worst.0,
        worst_at: worst.1,
        holds: worst.0 >= -1e-12,
        points: steps + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub r: f64,
    pub sup_on_window: f64,
    pub sup_at: f64,
    /// `R · sup_[−4,4] |b − g|`.
    pub scaled_sup: f64,
    /// `min (b − g)`; reported for variant G only.
    pub min_difference: Option<f64>,
    pub min_at: Option<f64>,
    pub gap_at_zero: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingReport {
    pub r: f64,
    pub q: f64,
    pub shift: f64,
    /// `min (g_Q(t + shift) − ρ_R(t))`.
    pub worst_margin: f64,
    pub worst_at: f64,
    pub holds: bool,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialReport {
    pub r: f64,
    pub n: usize,
    /// Sup over `|r − R| ≤ 1`.
    pub annulus_sup: f64,
    pub annulus_at: f64,
    pub outside_sup: f64,
    pub outside_at: f64,
    /// `C*/R` from the first-order inequality.
    pub c_star_bound: f64,
    pub points: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> DoubleWellPotential {
        DoubleWellPotential::quartic()
    }

    #[test]
    fn constants_for_quartic() {
        let w = quartic();
        let k = choose_constants(&w, 2, Variant::G).unwrap();
        let expected = 2f64.powf(1.5) * 1.25f64.sqrt() + 1.0;
        assert!((k.drift_margin - expected).abs() < 1e-12);
        assert!((k.drift_margin - 4.162).abs() < 1e-3);
        assert!((k.offset_scale - expected).abs() < 1e-12);
        assert_eq!(k.glue_half_width, 0.5);
        assert_eq!(k.doublings, 0);

        let k1 = choose_constants(&w, 1, Variant::G).unwrap();
        assert_eq!(k1.drift_margin, 1.0);

        let kr = choose_constants(&w, 2, Variant::Rho).unwrap();
        assert!((kr.cutoff_rate - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((kr.cutoff_rate - 0.3536).abs() < 1e-4);
    }

    #[test]
    fn degenerate_wells_rejected() {
        let w = DoubleWellPotential::even_polynomial(vec![1.0, -4.0, 6.0, -4.0, 1.0]).unwrap();
        assert!(matches!(choose_constants(&w, 2, Variant::G), Err(Error::Construction(_))));
    }

    #[test]
    fn speed_function_values() {
        let w = quartic();
        let k = choose_constants(&w, 2, Variant::G).unwrap();
        let sp = BarrierSpeed::build(&w, 100.0, 2, Variant::G, k).unwrap();
        assert_eq!(sp.h(Level::Upper(0.0)), 0.0);
        assert_eq!(sp.h(Level::Lower(0.0)), 0.0);
        let c = k.glue_half_width;
        let jump = sp.h(Level::Upper(1.0 - c)) - w.w(c);
        assert!((jump - k.drift_margin / 100.0 * (1.0 - c)).abs() < 1e-15);
    }

    #[test]
    fn glue_is_c1_at_the_junctions() {
        let w = quartic();
        for variant in [Variant::G, Variant::Rho] {
            let k = choose_constants(&w, 3, variant).unwrap();
            let sp = BarrierSpeed::build(&w, 100.0, 3, variant, k).unwrap();
            let c = k.glue_half_width;
            let span = 1.0 - c - sp.lower_offset();
            let pairs = [
                (Level::Lower(span), Level::Mid(-c)),
                (Level::Upper(1.0 - c), Level::Mid(c)),
            ];
            for (outer, inner) in pairs {
                assert!((sp.h(outer) - sp.h(inner)).abs() < 1e-10, "{variant}");
                assert!((sp.dh(outer) - sp.dh(inner)).abs() < 1e-10, "{variant}");
            }
        }
    }

    #[test]
    fn inequality_examples() {
        let w = quartic();
        let g100 = BarrierProfile::build(&w, 100.0, 2, Variant::G).unwrap();
        assert!(g100.inequality().outside_sup <= 1e-10);
        let g200 = BarrierProfile::build(&w, 200.0, 2, Variant::G).unwrap();
        let ratio = g100.inequality().c_star / g200.inequality().c_star;
        assert!((0.5..=2.0).contains(&ratio), "{ratio}");

        // n = 1: LHS − W′ is exactly −C₂/R outside the glue.
        let one = BarrierProfile::build(&w, 100.0, 1, Variant::G).unwrap();
        let sp = one.speed();
        for level in sp.check_grid() {
            if !matches!(level, Level::Mid(s) if s.abs() <= 0.5) {
                assert_eq!(sp.inequality_excess(level), -0.01);
            }
        }
    }

    #[test]
    fn profile_examples() {
        let w = quartic();
        let g = BarrierProfile::build(&w, 100.0, 2, Variant::G).unwrap();
        let (lo, hi) = g.breakpoints();
        let bound = log_width_factor(&w) * 100f64.ln();
        assert!(lo.abs() <= bound && hi.abs() <= bound);
        assert_eq!(g.value(0.0), 0.0);
        assert_eq!(g.value(hi + 0.1), 1.0);
        let k = g.constants();
        assert!((g.value(lo - 0.1) - (-1.0 + k.offset_scale / 100.0)).abs() < 1e-15);

        let rho = BarrierProfile::build(&w, 100.0, 2, Variant::Rho).unwrap();
        let (qlo, qhi) = rho.breakpoints();
        assert!(qhi <= 50.0 && qlo >= -50.0, "{qlo} {qhi}");
        assert_eq!(rho.value(0.0), 0.0);
    }

    #[test]
    fn barrier_is_monotone_and_constant_outside() {
        let w = quartic();
        for variant in [Variant::G, Variant::Rho] {
            let b = BarrierProfile::build(&w, 50.0, 3, variant).unwrap();
            let (lo, hi) = b.breakpoints();
            let mut prev = b.phase(lo - 2.0);
            let steps = 4000;
            for i in 1..=steps {
                let t = lo - 2.0 + (hi - lo + 4.0) * i as f64 / steps as f64;
                let cur = b.phase(t);
                assert!(cur.minus(&prev) >= 0.0, "{variant} t={t}");
                prev = cur;
            }
            assert_eq!(b.phase(hi + 1.0).from_plus, 0.0);
            assert_eq!(b.phase(lo - 1.0).from_minus, b.speed().lower_offset());
        }
    }

    #[test]
    fn radial_precondition() {
        let w = quartic();
        let b = BarrierProfile::build(&w, 50.0, 2, Variant::G).unwrap();
        assert!(matches!(b.radial_residual(&[20.0]), Err(Error::Precondition(_))));
        // Past t⁺ the profile sits at the well: residual is exactly 0.
        let (_, hi) = b.breakpoints();
        let rep = b.radial_residual(&[50.0 + hi + 1.0]).unwrap();
        assert_eq!(rep.outside_sup, 0.0);
    }

    #[test]
    fn ordering_precondition() {
        let w = quartic();
        let rho = BarrierProfile::build(&w, 50.0, 2, Variant::Rho).unwrap();
        let g = BarrierProfile::build(&w, 50.0, 2, Variant::G).unwrap();
        assert!(matches!(check_rho_ordering(&g, &g), Err(Error::Precondition(_))));
        let too_big = BarrierProfile::build(&w, 200f64.powf(2.5) * 1.01, 2, Variant::G).unwrap();
        assert!(matches!(check_rho_ordering(&rho, &too_big), Err(Error::Precondition(_))));
    }
}
