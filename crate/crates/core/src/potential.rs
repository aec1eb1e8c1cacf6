//! Double-well potentials W on [−1, 1] with nondegenerate wells at ±1.
//!
//! Besides plain evaluation, every potential can be evaluated in offset
//! coordinates near each well (`s = −1 + d` or `s = 1 − d`). Barrier
//! constructions work with offsets far below the f64 resolution of `s` itself,
//! so these paths never form `s`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::integrate;

/// Which well an offset is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Well {
    /// `s = −1 + d`
    Minus,
    /// `s = 1 − d`
    Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `(1 − s²)² / 4`
    Quartic,
    /// Coefficients of `s⁰, s², s⁴, …`.
    EvenPolynomial(Vec<f64>),
    Tabulated(Tabulated),
}

/// Monotone piecewise-cubic (Fritsch–Butland) interpolant of samples on
/// [−1, 1], clamped to zero slope at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    knots: Vec<f64>,
    values: Vec<f64>,
    // Power-basis cubic per segment, in the offset from the left knot.
    segments: Vec<[f64; 4]>,
    // Last segment re-expanded in y = 1 − s.
    last_reversed: [f64; 4],
}

impl Tabulated {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 3 {
            return Err(Error::Parameter(
                "tabulated potential needs at least 3 (s, W) samples".into(),
            ));
        }
        if knots[0] != -1.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::Parameter("tabulated samples must span exactly [-1, 1]".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "tabulated knots must be strictly increasing with finite values".into(),
            ));
        }
        let m = knots.len() - 1;
        let widths: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let secants: Vec<f64> = (0..m).map(|k| (values[k + 1] - values[k]) / widths[k]).collect();
        let mut slopes = vec![0.0; m + 1];
        for k in 1..m {
            let (d0, d1) = (secants[k - 1], secants[k]);
            if d0 * d1 > 0.0 {
                let w1 = 2.0 * widths[k] + widths[k - 1];
                let w2 = widths[k] + 2.0 * widths[k - 1];
                slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        let segments: Vec<[f64; 4]> = (0..m)
            .map(|k| {
                let h = widths[k];
                let (m0, m1, d) = (slopes[k], slopes[k + 1], secants[k]);
                [
                    values[k],
                    m0,
                    (3.0 * d - 2.0 * m0 - m1) / h,
                    (m0 + m1 - 2.0 * d) / (h * h),
                ]
            })
            .collect();
        let last = segments[m - 1];
        let reversed = taylor_shift(&last, widths[m - 1], -1.0);
        let last_reversed = [reversed[0], reversed[1], reversed[2], reversed[3]];
        Ok(Self {
            knots,
            values,
            segments,
            last_reversed,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment_of(&self, s: f64) -> usize {
        let m = self.segments.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(m - 1),
            Err(i) => i.saturating_sub(1).min(m - 1),
        }
    }

    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let k = self.segment_of(s);
        poly_eval(&self.segments[k], s - self.knots[k])
    }
}

/// A validated-or-not double-well potential. Construction never fails on
/// mathematical grounds; [`DoubleWellPotential::validate`] reports violations.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellPotential {
    kind: PotentialKind,
    scale: f64,
    // Full power-basis coefficients for the polynomial kinds.
    coeffs: Vec<f64>,
    at_minus: Vec<f64>,
    at_plus: Vec<f64>,
    max_w: f64,
    k_minus: f64,
    k_plus: f64,
}

impl DoubleWellPotential {
    pub fn quartic() -> Self {
        Self::assemble(PotentialKind::Quartic, vec![0.25, 0.0, -0.5, 0.0, 0.25], 1.0)
    }

    pub fn even_polynomial(even_coeffs: Vec<f64>) -> Result<Self> {
        if even_coeffs.is_empty() || even_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter(
                "polynomial potential needs at least one finite coefficient".into(),
            ));
        }
        let mut full = vec![0.0; 2 * even_coeffs.len() - 1];
        for (k, c) in even_coeffs.iter().enumerate() {
            full[2 * k] = *c;
        }
        Ok(Self::assemble(PotentialKind::EvenPolynomial(even_coeffs), full, 1.0))
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = Tabulated::new(knots, values)?;
        Ok(Self::assemble(PotentialKind::Tabulated(table), Vec::new(), 1.0))
    }

    /// Samples `source` at `samples` equally spaced points of [−1, 1] and
    /// interpolates them.
    pub fn tabulate(source: &DoubleWellPotential, samples: usize) -> Result<Self> {
        if samples < 3 {
            return Err(Error::Parameter("need at least 3 samples".into()));
        }
        let knots: Vec<f64> = (0..samples)
            .map(|i| -1.0 + 2.0 * i as f64 / (samples - 1) as f64)
            .collect();
        let values = knots.iter().map(|&s| source.w(s)).collect();
        Self::tabulated(knots, values)
    }

    /// Parses `quartic` or `poly: c0,c2,c4,...`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("quartic") {
            return Ok(Self::quartic());
        }
        if let Some(rest) = spec.strip_prefix("poly:") {
            let coeffs = rest
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad coefficient {c:?} in potential spec")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::even_polynomial(coeffs);
        }
        Err(Error::Format(format!(
            "unknown potential {spec:?}; expected `quartic` or `poly: c0,c2,...`"
        )))
    }

    /// The same potential multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!("scale factor must be positive, got {factor}")));
        }
        Ok(Self::assemble(self.kind.clone(), self.coeffs.clone(), self.scale * factor))
    }

    fn assemble(kind: PotentialKind, coeffs: Vec<f64>, scale: f64) -> Self {
        let (at_minus, at_plus) = match &kind {
            PotentialKind::Tabulated(_) => (Vec::new(), Vec::new()),
            _ => (taylor_shift(&coeffs, -1.0, 1.0), taylor_shift(&coeffs, 1.0, -1.0)),
        };
        let mut pot = Self {
            kind,
            scale,
            coeffs,
            at_minus,
            at_plus,
            max_w: 0.0,
            k_minus: 0.0,
            k_plus: 0.0,
        };
        pot.k_minus = pot.near(Well::Minus, 0.0).2;
        pot.k_plus = pot.near(Well::Plus, 0.0).2;
        pot.max_w = pot.compute_max();
        pot
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// A short textual form, round-trippable through [`Self::from_spec`] for
    /// the polynomial kinds.
    pub fn spec_string(&self) -> String {
        let base = match &self.kind {
            PotentialKind::Quartic => "quartic".to_string(),
            PotentialKind::EvenPolynomial(c) => format!(
                "poly: {}",
                c.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
            ),
            PotentialKind::Tabulated(t) => format!("tabulated({} samples)", t.knots.len()),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{} x {base}", self.scale)
        }
    }

    /// `(W(s), W′(s), W″(s))`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64, f64)> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("potential evaluated at s = {s} outside [-1, 1]")));
        }
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> (f64, f64, f64) {
        let (w, dw, d2w) = match &self.kind {
            PotentialKind::Quartic => {
                let q = (1.0 - s) * (1.0 + s);
                (0.25 * q * q, s * s * s - s, 3.0 * s * s - 1.0)
            }
            PotentialKind::EvenPolynomial(_) => poly_eval(&self.coeffs, s),
            PotentialKind::Tabulated(t) => t.eval(s),
        };
        (self.scale * w, self.scale * dw, self.scale * d2w)
    }

    pub fn w(&self, s: f64) -> f64 {
        self.eval_unchecked(s).0
    }

    pub fn dw(&self, s: f64) -> f64 {
        self.eval_unchecked(s).1
    }

    pub fn d2w(&self, s: f64) -> f64 {
        self.eval_unchecked(s).2
    }

    /// `(W, W′, W″)` at `s = −1 + d` (Minus) or `s = 1 − d` (Plus), with the
    /// derivatives taken with respect to `s`. Accurate for arbitrarily small `d`.
    pub fn near(&self, well: Well, d: f64) -> (f64, f64, f64) {
        let (w, dp, d2p) = match (&self.kind, well) {
            (PotentialKind::Tabulated(t), Well::Minus) => {
                if d <= t.knots[1] - t.knots[0] {
                    poly_eval(&t.segments[0], d)
                } else {
                    t.eval(-1.0 + d)
                }
            }
            (PotentialKind::Tabulated(t), Well::Plus) => {
                let n = t.knots.len();
                if d <= t.knots[n - 1] - t.knots[n - 2] {
                    let (v, dv, d2v) = poly_eval(&t.last_reversed, d);
                    (v, -dv, d2v)
                } else {
                    t.eval(1.0 - d)
                }
            }
            (_, Well::Minus) => poly_eval(&self.at_minus, d),
            (_, Well::Plus) => {
                let (v, dv, d2v) = poly_eval(&self.at_plus, d);
                (v, -dv, d2v)
            }
        };
        (self.scale * w, self.scale * dp, self.scale * d2p)
    }

    /// `(W(at d) − W(at d0)) / (d − d0)` in offset coordinates of `well`,
    /// free of cancellation when `d` and `d0` are close.
    pub fn offset_quotient(&self, well: Well, d: f64, d0: f64) -> f64 {
        if d == d0 {
            let dw = self.near(well, d).1;
            return match well {
                Well::Minus => dw,
                Well::Plus => -dw,
            };
        }
        let local: Option<&[f64]> = match (&self.kind, well) {
            (PotentialKind::Tabulated(t), Well::Minus) => {
                let w0 = t.knots[1] - t.knots[0];
                (d <= w0 && d0 <= w0).then_some(&t.segments[0][..])
            }
            (PotentialKind::Tabulated(t), Well::Plus) => {
                let n = t.knots.len();
                let w0 = t.knots[n - 1] - t.knots[n - 2];
                (d <= w0 && d0 <= w0).then_some(&t.last_reversed[..])
            }
            (_, Well::Minus) => Some(&self.at_minus[..]),
            (_, Well::Plus) => Some(&self.at_plus[..]),
        };
        match local {
            Some(c) => self.scale * poly_quotient(c, d, d0),
            None => (self.near(well, d).0 - self.near(well, d0).0) / (d - d0),
        }
    }

    /// `W″(−1)`.
    pub fn k_minus(&self) -> f64 {
        self.k_minus
    }

    /// `W″(1)`.
    pub fn k_plus(&self) -> f64 {
        self.k_plus
    }

    /// max of W over [−1, 1] (cached at construction).
    pub fn max_on_interval(&self) -> f64 {
        self.max_w
    }

    /// `Φ(s) = ∫_0^s √(2W(z)) dz`.
    pub fn modica_primitive(&self, s: f64) -> f64 {
        let s = s.clamp(-1.0, 1.0);
        integrate(&|z: f64| (2.0 * self.w(z).max(0.0)).sqrt(), 0.0, s, 1e-14).0
    }

    /// `σ_W = ∫_{−1}^{1} √(2W)`: the cost per unit area of a flat interface.
    pub fn modica_constant(&self) -> f64 {
        self.modica_primitive(1.0) - self.modica_primitive(-1.0)
    }

    /// max of |W″| over a dense grid of [−1, 1].
    pub fn max_abs_d2(&self) -> f64 {
        (0..=4000)
            .map(|i| self.d2w(-1.0 + i as f64 / 2000.0).abs())
            .fold(0.0, f64::max)
    }

    fn compute_max(&self) -> f64 {
        const N: usize = 10_000;
        let step = 2.0 / N as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..=N {
            let v = self.w(-1.0 + i as f64 * step);
            if v > best.1 {
                best = (i, v);
            }
        }
        // Golden-section refinement on the bracketing cells.
        let center = -1.0 + best.0 as f64 * step;
        let (mut a, mut b) = ((center - step).max(-1.0), (center + step).min(1.0));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        for _ in 0..80 {
            if self.w(c) > self.w(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - phi * (b - a);
            d = a + phi * (b - a);
        }
        best.1.max(self.w(0.5 * (a + b)))
    }

    /// Checks the double-well hypotheses on a 10⁴-point grid.
    pub fn validate(&self) -> ValidationReport {
        let (wm, dwm, kwm) = self.near(Well::Minus, 0.0);
        let (wp, dwp, kwp) = self.near(Well::Plus, 0.0);
        let mut checks = Vec::new();

        let worst = wm.abs().max(wp.abs());
        checks.push(CheckResult::new("W(±1)=0", worst <= 1e-12, worst));

        let worst = dwm.abs().max(dwp.abs());
        checks.push(CheckResult::new("W'(±1)=0", worst <= 1e-12, worst));

        let worst = kwm.min(kwp);
        checks.push(CheckResult::new("W''(±1)>0", worst > 0.0, worst));

        const N: usize = 10_000;
        let mut min_w = f64::INFINITY;
        for i in 0..N {
            let s = -0.999 + 1.998 * (i as f64 + 0.5) / N as f64;
            min_w = min_w.min(self.w(s));
        }
        checks.push(CheckResult::new("W>0 on (-0.999,0.999)", min_w > 0.0, min_w));

        ValidationReport { checks }
    }
}

impl FromStr for DoubleWellPotential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_spec(s)
    }
}

impl fmt::Display for DoubleWellPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The extreme value the check was decided on.
    pub worst: f64,
}

impl CheckResult {
    fn new(name: &str, passed: bool, worst: f64) -> Self {
        Self {
            name: name.to_string(),
            passed,
            worst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Value, first and second derivative of `Σ c_j x^j`.
fn poly_eval(c: &[f64], x: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut d2p = 0.0;
    for &a in c.iter().rev() {
        d2p = d2p * x + 2.0 * dp;
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp, d2p)
}

/// `(p(x) − p(x0)) / (x − x0)` via `e_j = (x^j − x0^j)/(x − x0)`.
fn poly_quotient(c: &[f64], x: f64, x0: f64) -> f64 {
    let mut e = 0.0;
    let mut x0_pow = 1.0;
    let mut acc = 0.0;
    for &a in c.iter().skip(1) {
        e = x * e + x0_pow;
        x0_pow *= x0;
        acc += a * e;
    }
    acc
}

/// Coefficients of `t ↦ p(x0 + sign·t)`.
fn taylor_shift(c: &[f64], x0: f64, sign: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    for (i, &ci) in c.iter().enumerate() {
        let mut binom = 1.0;
        for (j, o) in out.iter_mut().enumerate().take(i + 1) {
            *o += ci * binom * x0.powi((i - j) as i32) * sign.powi(j as i32);
            binom = binom * (i - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modica_constant_quartic() {
        let w = DoubleWellPotential::quartic();
        assert!((w.modica_constant() - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-12);
        let s = 0.3f64;
        let closed = (s - s * s * s / 3.0) / 2f64.sqrt();
        assert!((w.modica_primitive(s) - closed).abs() < 1e-14);
    }

    #[test]
    fn quartic_values() {
        let w = DoubleWellPotential::quartic();
        assert_eq!(w.eval(0.0).unwrap(), (0.25, 0.0, -1.0));
        assert_eq!(w.eval(1.0).unwrap(), (0.0, 0.0, 2.0));
        assert_eq!(w.eval(0.5).unwrap(), (0.140625, -0.375, -0.25));
        assert!(matches!(w.eval(1.0 + 1e-12), Err(Error::Domain(_))));
        assert!(matches!(w.eval(-2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn validation_cases() {
        assert!(DoubleWellPotential::quartic().validate().passed());

        let shifted = DoubleWellPotential::even_polynomial(vec![0.24, -0.5, 0.25]).unwrap();
        let report = shifted.validate();
        assert!(!report.check("W(±1)=0").unwrap().passed);

        let degenerate = DoubleWellPotential::even_polynomial(vec![1.0, -4.0, 6.0, -4.0, 1.0]).unwrap();
        let report = degenerate.validate();
        assert!(!report.check("W''(±1)>0").unwrap().passed);
        assert!(report.check("W(±1)=0").unwrap().passed);
    }

    #[test]
    fn maximum() {
        let w = DoubleWellPotential::quartic();
        assert!((w.max_on_interval() - 0.25).abs() < 1e-15);
        assert!((w.scaled(3.0).unwrap().max_on_interval() - 0.75).abs() < 1e-15);
        let tab = DoubleWellPotential::tabulate(&w, 401).unwrap();
        assert!((tab.max_on_interval() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn spec_parsing() {
        let q = DoubleWellPotential::from_spec("quartic").unwrap();
        let p: DoubleWellPotential = "poly: 0.25, -0.5, 0.25".parse().unwrap();
        for i in 0..=20 {
            let s = -1.0 + 0.1 * i as f64;
            let (a, b) = (q.eval(s).unwrap(), p.eval(s).unwrap());
            assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15 && (a.2 - b.2).abs() < 1e-14);
        }
        assert!(DoubleWellPotential::from_spec("sextic").is_err());
        assert!(DoubleWellPotential::from_spec("poly: 1, x").is_err());
        assert_eq!(
            DoubleWellPotential::from_spec(&p.spec_string()).unwrap(),
            p
        );
    }

    #[test]
    fn near_well_offsets_are_exact() {
        let w = DoubleWellPotential::quartic();
        for &d in &[1e-300, 1e-62, 1e-20, 1e-8, 0.3] {
            let exact = d * d * (2.0 - d) * (2.0 - d) / 4.0;
            let (v, dv, _) = w.near(Well::Minus, d);
            assert!((v - exact).abs() <= 1e-15 * exact, "d={d}");
            assert!((dv - (d - 1.0) * (d - 2.0) * d).abs() <= 1e-15 * d);
            let (v, dv, _) = w.near(Well::Plus, d);
            assert!((v - exact).abs() <= 1e-15 * exact);
            assert!((dv + d * (1.0 - d) * (2.0 - d)).abs() <= 1e-15 * d);
        }
        assert_eq!(w.k_minus(), 2.0);
        assert_eq!(w.k_plus(), 2.0);
    }

    #[test]
    fn offset_quotient_is_cancellation_free() {
        let w = DoubleWellPotential::quartic();
        // d/dx of x² − x³ + x⁴/4 at x = 1e-40 is 2e-40 to leading order.
        let q = w.offset_quotient(Well::Minus, 1e-40 * (1.0 + 1e-9), 1e-40);
        assert!((q / 2e-40 - 1.0).abs() < 1e-8);
        let q = w.offset_quotient(Well::Plus, 0.3, 0.1);
        let f = |d: f64| d * d * (2.0 - d) * (2.0 - d) / 4.0;
        assert!((q - (f(0.3) - f(0.1)) / 0.2).abs() < 1e-15);
    }

    #[test]
    fn tabulated_interpolant() {
        let w = DoubleWellPotential::quartic();
        let tab = DoubleWellPotential::tabulate(&w, 2001).unwrap();
        assert!(tab.validate().passed(), "{:?}", tab.validate());
        for i in 0..50 {
            let s = -0.98 + 0.04 * i as f64;
            assert!((tab.w(s) - w.w(s)).abs() < 1e-6);
        }
        // The monotone interpolant resolves the well's curvature only to O(1).
        assert!(tab.k_minus() > 1.0 && tab.k_minus() < 4.0, "{}", tab.k_minus());
        // Clamped endpoint slopes.
        assert_eq!(tab.near(Well::Minus, 0.0).1, 0.0);
        assert!(tab.near(Well::Plus, 0.0).1.abs() < 1e-15);
        // Offset path agrees with the plain path away from the ends.
        let (a, b) = (tab.near(Well::Plus, 1e-4), tab.eval(1.0 - 1e-4).unwrap());
        assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_order() {
        let w = DoubleWellPotential::even_polynomial(vec![0.5, -1.2, 0.9, -0.2]).unwrap();
        for &s in &[-0.7, -0.2, 0.3, 0.8] {
            let err = |h: f64| {
                let fd1 = (w.w(s + h) - w.w(s - h)) / (2.0 * h);
                (fd1 - w.dw(s)).abs()
            };
            let ratio = err(1e-3) / err(5e-4);
            assert!((3.5..=4.5).contains(&ratio), "s={s} ratio={ratio}");
        }
    }
}
