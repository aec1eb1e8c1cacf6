//! Monotone profiles recovered from a speed function.
//!
//! A profile `p` with `p′ = √(2h(p))` is the inverse of
//! `T(s) = ∫_0^s dz / √(2h(z))`. The interval `[lo, 1]` is split into a lower
//! tail `[lo, −c]`, a middle piece `[−c, c]` and an upper tail `[c, 1]`. In the
//! tails `h = d·m(d)` with `d` the distance to the nearest endpoint, and the
//! integral is taken in `σ = ln d`, which resolves both the logarithmic
//! (`m(0) = 0`) and square-root (`m(0) > 0`) endpoint behaviors.

use crate::error::{Error, Result};
use crate::quad::gk15;

/// The three-piece description of `h`.
pub(crate) trait SpeedFunction {
    /// Distance of the lower endpoint from −1.
    fn lower_offset(&self) -> f64;
    /// Half-width `c` of the middle piece.
    fn half_width(&self) -> f64;
    /// `h / d` at `s = −1 + lower_offset + d`.
    fn lower_m(&self, d: f64) -> f64;
    fn mid_h(&self, s: f64) -> f64;
    /// `h / d` at `s = 1 − d`.
    fn upper_m(&self, d: f64) -> f64;
}

/// A position on the profile's value axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// `s = −1 + offset + d`, with `offset` the lower endpoint's distance to −1.
    Lower(f64),
    Mid(f64),
    /// `s = 1 − d`.
    Upper(f64),
}

/// A phase value kept as its distances to both wells, so that differences
/// of values close to ±1 stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseValue {
    /// `1 + s`
    pub from_minus: f64,
    /// `1 − s`
    pub from_plus: f64,
}

impl PhaseValue {
    pub fn from_value(s: f64) -> Self {
        Self { from_minus: 1.0 + s, from_plus: 1.0 - s }
    }

    pub fn value(&self) -> f64 {
        if self.from_minus < self.from_plus {
            self.from_minus - 1.0
        } else {
            1.0 - self.from_plus
        }
    }

    /// `self − other`, taken in whichever well's offset is smaller.
    pub fn minus(&self, other: &PhaseValue) -> f64 {
        if self.from_minus.min(other.from_minus) < self.from_plus.min(other.from_plus) {
            self.from_minus - other.from_minus
        } else {
            other.from_plus - self.from_plus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    Lower,
    Mid,
    Upper,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    seg: Seg,
    // Local coordinate (σ in the tails, s in the middle) at the low-t and
    // high-t ends.
    u_a: f64,
    u_b: f64,
    t_a: f64,
    t_b: f64,
}

/// How the table treats an endpoint where `h` vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum EndMode {
    /// Integrable endpoint: the profile reaches it at a finite breakpoint.
    Reach,
    /// Nonintegrable endpoint: stop at distance `clip`.
    Clip(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct ProfileTable {
    x_e: f64,
    c: f64,
    intervals: Vec<Interval>,
    /// T at the lower end of the range (breakpoint or clipped end).
    pub t_lo: f64,
    pub t_hi: f64,
    /// Smallest tail distances covered by the table.
    d_lo_min: f64,
    d_up_min: f64,
    // Tail remainders below d_*_min (zero when clipped).
    m0_lo: f64,
    m0_up: f64,
}

const PANEL_TOL: f64 = 1e-13;
const TAIL_STEP: f64 = 0.25;
const MID_PANELS: usize = 64;

fn lower_f<S: SpeedFunction + ?Sized>(sp: &S, sigma: f64) -> f64 {
    let d = sigma.exp();
    (d / (2.0 * sp.lower_m(d))).sqrt()
}

fn upper_f<S: SpeedFunction + ?Sized>(sp: &S, sigma: f64) -> f64 {
    let d = sigma.exp();
    (d / (2.0 * sp.upper_m(d))).sqrt()
}

fn mid_f<S: SpeedFunction + ?Sized>(sp: &S, s: f64) -> f64 {
    1.0 / (2.0 * sp.mid_h(s)).sqrt()
}

/// Splits `[a, b]` (either orientation) into panels whose K15 error estimate is
/// below tolerance; returns panel endpoints and values.
fn panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, out: &mut Vec<(f64, f64, f64)>) {
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        if e <= PANEL_TOL * (1.0 + v.abs()) || depth > 40 {
            out.push((lo, hi, v));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
}

/// Smallest distance at which `m` has settled to `m(0)` to 1e−12 relative.
fn settle_distance<F: Fn(f64) -> f64>(m: F, start: f64) -> Result<f64> {
    let m0 = m(0.0);
    if !(m0 > 0.0) {
        return Err(Error::Construction(format!(
            "speed function has nonpositive endpoint slope {m0:e}"
        )));
    }
    let mut d = start;
    for _ in 0..400 {
        if ((m(d) - m0) / m0).abs() <= 1e-12 {
            return Ok(d);
        }
        d *= 0.1;
        if d < 1e-300 {
            break;
        }
    }
    Err(Error::Construction("endpoint behavior of speed function does not settle".into()))
}

impl ProfileTable {
    pub fn build<S: SpeedFunction + ?Sized>(sp: &S, lo_end: EndMode, hi_end: EndMode) -> Result<Self> {
        let x_e = sp.lower_offset();
        let c = sp.half_width();
        let span_lo = (1.0 - c) - x_e;
        let span_up = 1.0 - c;
        if !(span_lo > 0.0 && c > 0.0) {
            return Err(Error::Construction("degenerate profile interval".into()));
        }

        // Middle piece, accumulated outward from T(0) = 0.
        let mid_fn = |s: f64| mid_f(sp, s);
        let mut right = Vec::new();
        let mut left = Vec::new();
        let half = MID_PANELS / 2;
        for k in 0..half {
            let a = c * k as f64 / half as f64;
            let b = c * (k + 1) as f64 / half as f64;
            panels(&mid_fn, a, b, &mut right);
            panels(&mid_fn, -a, -b, &mut left);
        }
        let mut mid_iv = Vec::new();
        let mut t = 0.0;
        for &(a, b, v) in &right {
            mid_iv.push(Interval { seg: Seg::Mid, u_a: a, u_b: b, t_a: t, t_b: t + v });
            t += v;
        }
        let t_c_plus = t;
        let mut t = 0.0;
        let mut left_iv = Vec::new();
        for &(a, b, v) in &left {
            // v = ∫_a^b with b < a, i.e. negative.
            left_iv.push(Interval { seg: Seg::Mid, u_a: b, u_b: a, t_a: t + v, t_b: t });
            t += v;
        }
        let t_c_minus = t;

        // Lower tail, from σ = ln(span_lo) downwards.
        let sig_lo_max = span_lo.ln();
        let (d_lo_min, m0_lo) = match lo_end {
            EndMode::Clip(d) => (d, 0.0),
            EndMode::Reach => {
                let d = settle_distance(|d| sp.lower_m(d), span_lo.min(x_e.max(1e-300)) * 1e-3)?;
                (d, sp.lower_m(0.0))
            }
        };
        if !(d_lo_min < span_lo) {
            return Err(Error::Construction("lower clip exceeds the tail".into()));
        }
        let lo_fn = |sg: f64| lower_f(sp, sg);
        let mut lo_iv = Vec::new();
        let mut t = t_c_minus;
        let mut sg = sig_lo_max;
        let sig_lo_min = d_lo_min.ln();
        while sg > sig_lo_min {
            let next = (sg - TAIL_STEP).max(sig_lo_min);
            let mut pieces = Vec::new();
            panels(&lo_fn, next, sg, &mut pieces);
            for &(a, b, v) in pieces.iter().rev() {
                lo_iv.push(Interval { seg: Seg::Lower, u_a: a, u_b: b, t_a: t - v, t_b: t });
                t -= v;
            }
            sg = next;
        }
        let t_lo = t - if m0_lo > 0.0 { (2.0 * d_lo_min / m0_lo).sqrt() } else { 0.0 };

        // Upper tail, from σ = ln(span_up) downwards (t increasing).
        let sig_up_max = span_up.ln();
        let (d_up_min, m0_up) = match hi_end {
            EndMode::Clip(d) => (d, 0.0),
            EndMode::Reach => {
                let d = settle_distance(|d| sp.upper_m(d), span_up * 1e-3)?;
                (d, sp.upper_m(0.0))
            }
        };
        let up_fn = |sg: f64| upper_f(sp, sg);
        let mut up_iv = Vec::new();
        let mut t = t_c_plus;
        let mut sg = sig_up_max;
        let sig_up_min = d_up_min.ln();
        while sg > sig_up_min {
            let next = (sg - TAIL_STEP).max(sig_up_min);
            let mut pieces = Vec::new();
            panels(&up_fn, next, sg, &mut pieces);
            for &(a, b, v) in pieces.iter().rev() {
                up_iv.push(Interval { seg: Seg::Upper, u_a: b, u_b: a, t_a: t, t_b: t + v });
                t += v;
            }
            sg = next;
        }
        let t_hi = t + if m0_up > 0.0 { (2.0 * d_up_min / m0_up).sqrt() } else { 0.0 };

        let mut intervals = Vec::with_capacity(lo_iv.len() + left_iv.len() + mid_iv.len() + up_iv.len());
        intervals.extend(lo_iv.into_iter().rev());
        intervals.extend(left_iv.into_iter().rev());
        intervals.extend(mid_iv);
        intervals.extend(up_iv);
        if intervals.iter().any(|iv| !(iv.t_b > iv.t_a) || !iv.t_a.is_finite()) {
            return Err(Error::Construction(
                "profile table is not strictly increasing (speed function not positive)".into(),
            ));
        }
        Ok(Self {
            x_e,
            c,
            intervals,
            t_lo,
            t_hi,
            d_lo_min,
            d_up_min,
            m0_lo,
            m0_up,
        })
    }

    fn integrand<S: SpeedFunction + ?Sized>(sp: &S, seg: Seg, u: f64) -> f64 {
        match seg {
            Seg::Lower => lower_f(sp, u),
            Seg::Mid => mid_f(sp, u),
            Seg::Upper => upper_f(sp, u),
        }
    }

    fn sign(seg: Seg) -> f64 {
        match seg {
            Seg::Upper => -1.0,
            _ => 1.0,
        }
    }

    fn partial<S: SpeedFunction + ?Sized>(sp: &S, iv: &Interval, u: f64) -> f64 {
        let f = |x: f64| Self::integrand(sp, iv.seg, x);
        iv.t_a + Self::sign(iv.seg) * gk15(&f, iv.u_a, u).0
    }

    /// Level reached at time `t`; `t` is clamped to `[t_lo, t_hi]`.
    pub fn level_at<S: SpeedFunction + ?Sized>(&self, sp: &S, t: f64) -> Level {
        if t <= self.t_lo {
            return if self.m0_lo > 0.0 { Level::Lower(0.0) } else { Level::Lower(self.d_lo_min) };
        }
        if t >= self.t_hi {
            return if self.m0_up > 0.0 { Level::Upper(0.0) } else { Level::Upper(self.d_up_min) };
        }
        let first = &self.intervals[0];
        if t < first.t_a {
            // Inside the analytic remainder: ∫_0^d dd/√(2 d m0) = √(2d/m0).
            let tau = t - self.t_lo;
            return Level::Lower(0.5 * self.m0_lo * tau * tau);
        }
        let last = self.intervals.last().unwrap();
        if t > last.t_b {
            let tau = self.t_hi - t;
            return Level::Upper(0.5 * self.m0_up * tau * tau);
        }
        let idx = self.intervals.partition_point(|iv| iv.t_b < t).min(self.intervals.len() - 1);
        let iv = self.intervals[idx];
        let u = self.solve_in(sp, &iv, t);
        match iv.seg {
            Seg::Lower => Level::Lower(u.exp()),
            Seg::Mid => Level::Mid(u),
            Seg::Upper => Level::Upper(u.exp()),
        }
    }

    fn solve_in<S: SpeedFunction + ?Sized>(&self, sp: &S, iv: &Interval, t: f64) -> f64 {
        let (mut lo, mut hi) = if iv.u_a < iv.u_b { (iv.u_a, iv.u_b) } else { (iv.u_b, iv.u_a) };
        let sgn = Self::sign(iv.seg);
        let frac = (t - iv.t_a) / (iv.t_b - iv.t_a);
        let mut u = iv.u_a + frac * (iv.u_b - iv.u_a);
        for _ in 0..100 {
            let r = Self::partial(sp, iv, u) - t;
            // T increases with u when sgn > 0.
            if (r > 0.0) == (sgn > 0.0) {
                hi = u;
            } else {
                lo = u;
            }
            if r == 0.0 {
                return u;
            }
            let slope = sgn * Self::integrand(sp, iv.seg, u);
            let mut next = u - r / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let scale = if iv.seg == Seg::Mid { u.abs().max(1e-6) } else { u.abs() };
            let tol = 2.0 * f64::EPSILON * scale;
            if (next - u).abs() <= tol || hi - lo <= tol {
                return next;
            }
            u = next;
        }
        u
    }

    /// T at a level (for levels inside the table's coverage).
    pub fn t_at<S: SpeedFunction + ?Sized>(&self, sp: &S, level: Level) -> f64 {
        let (seg, u) = match level {
            Level::Lower(d) => {
                if d < self.d_lo_min {
                    if self.m0_lo > 0.0 {
                        return self.t_lo + (2.0 * d / self.m0_lo).sqrt();
                    }
                    return f64::NEG_INFINITY;
                }
                (Seg::Lower, d.ln())
            }
            Level::Mid(s) => (Seg::Mid, s),
            Level::Upper(d) => {
                if d < self.d_up_min {
                    if self.m0_up > 0.0 {
                        return self.t_hi - (2.0 * d / self.m0_up).sqrt();
                    }
                    return f64::INFINITY;
                }
                (Seg::Upper, d.ln())
            }
        };
        let iv = self
            .intervals
            .iter()
            .find(|iv| {
                iv.seg == seg && {
                    let (a, b) = if iv.u_a < iv.u_b { (iv.u_a, iv.u_b) } else { (iv.u_b, iv.u_a) };
                    u >= a && u <= b
                }
            })
            .copied();
        match iv {
            Some(iv) => Self::partial(sp, &iv, u),
            None => f64::NAN,
        }
    }

    /// Canonical level for a value `s` in `[lo, 1]`.
    pub fn level_of_value(&self, s: f64) -> Level {
        if s < -self.c {
            Level::Lower(((1.0 + s) - self.x_e).max(0.0))
        } else if s > self.c {
            Level::Upper((1.0 - s).max(0.0))
        } else {
            Level::Mid(s)
        }
    }

    /// Value `s` of a level.
    pub fn value(&self, level: Level) -> f64 {
        match level {
            Level::Lower(d) => -1.0 + (self.x_e + d),
            Level::Mid(s) => s,
            Level::Upper(d) => 1.0 - d,
        }
    }

    /// Shifts every stored time by `f(t)`. Only used to corrupt a table on
    /// purpose when exercising the residual checks.
    pub fn perturb_times<F: Fn(f64) -> f64>(&mut self, f: F) {
        for iv in &mut self.intervals {
            iv.t_a += f(iv.t_a);
            iv.t_b += f(iv.t_b);
        }
        self.t_lo += f(self.t_lo);
        self.t_hi += f(self.t_hi);
    }

    /// Accurate `(1 + s, 1 − s)` for a level.
    pub fn phase_value(&self, level: Level) -> PhaseValue {
        match level {
            Level::Lower(d) => {
                let x = self.x_e + d;
                PhaseValue { from_minus: x, from_plus: 2.0 - x }
            }
            Level::Mid(s) => PhaseValue { from_minus: 1.0 + s, from_plus: 1.0 - s },
            Level::Upper(d) => PhaseValue { from_minus: 2.0 - d, from_plus: d },
        }
    }

    /// `h` at a level, in the cancellation-free form.
    pub fn h_at<S: SpeedFunction + ?Sized>(sp: &S, level: Level) -> f64 {
        match level {
            Level::Lower(d) => d * sp.lower_m(d),
            Level::Mid(s) => sp.mid_h(s),
            Level::Upper(d) => d * sp.upper_m(d),
        }
    }
}
