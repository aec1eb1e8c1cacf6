//! Sliding paraboloids under (or over) discrete graphs over the unit ball.
//!
//! A surface is a height per node of the square grid on `[-1, 1]ⁿ`
//! (`n ∈ {1, 2}`, odd node count per axis so the origin is a node); only
//! nodes of the closed unit ball take part. Every slide is an exhaustive
//! minimization of `w(x) + (a/2)|x − y|²` over those nodes, evaluated in
//! index units so that whole-cell translations are exact.

use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::acf1::Acf1;
use crate::error::{Error, Result};

/// Contacts measured against `(Λ+1)^{-n}` lose at most this many `h`.
pub const ABP_SLACK: f64 = 5.0;
/// Fraction of excluded (boundary) contacts above which an ABP check is
/// inconclusive.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.1;
/// Complements at or below this many cells count as the grid floor.
pub const FLOOR_CELLS: f64 = 8.0;
/// Radius of the ball whose complement drives the covering iteration.
pub const COVERING_RADIUS: f64 = 0.625;
/// Contact points farther out than this are not counted in `D_a`.
pub const CONTACT_WINDOW: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Below,
    Above,
}

impl FromStr for Sense {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "below" => Ok(Sense::Below),
            "above" => Ok(Sense::Above),
            _ => Err(Error::Parameter(format!("unknown sense {s:?} (below|above)"))),
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Below => "below",
            Sense::Above => "above",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyP {
    pub lambda: f64,
    pub opening_lo: f64,
    pub opening_hi: f64,
}

impl PropertyP {
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.opening_lo <= lo * (1.0 + 1e-12) && hi <= self.opening_hi * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSurface {
    n: usize,
    m: usize,
    h: f64,
    heights: Vec<f64>,
    in_ball: Vec<bool>,
    property_p: Option<PropertyP>,
    nonnegative: bool,
    lo: f64,
    hi: f64,
}

impl DiscreteSurface {
    pub fn new(n: usize, m: usize, heights: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::Parameter(format!("surface base dimension {n} not in {{1, 2}}")));
        }
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::Parameter(format!("nodes per axis must be odd and ≥ 3, got {m}")));
        }
        if m > 4097 {
            return Err(Error::Parameter(format!("{m} nodes per axis exceeds 4097")));
        }
        let len = m.pow(n as u32);
        if heights.len() != len {
            return Err(Error::Format(format!("{} heights for {len} nodes", heights.len())));
        }
        if let Some(v) = heights.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("height {v} is not finite")));
        }
        let c = (m / 2) as i64;
        let in_ball: Vec<bool> = (0..len)
            .map(|i| {
                let r2: i64 = multi(n, m, i).iter().map(|&k| (k as i64 - c).pow(2)).sum();
                r2 <= c * c
            })
            .collect();
        let (lo, hi) = heights
            .iter()
            .zip(&in_ball)
            .filter(|(_, b)| **b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v)));
        Ok(Self {
            n,
            m,
            h: 2.0 / (m - 1) as f64,
            heights,
            in_ball,
            property_p: None,
            nonnegative: false,
            lo,
            hi,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(n: usize, m: usize, f: F) -> Result<Self> {
        if !(1..=2).contains(&n) || !(3..=4097).contains(&m) {
            return Self::new(n, m, Vec::new());
        }
        let h = 2.0 / (m - 1) as f64;
        let heights = (0..m.pow(n as u32))
            .into_par_iter()
            .map(|i| {
                let x: Vec<f64> = multi(n, m, i).iter().map(|&k| -1.0 + k as f64 * h).collect();
                f(&x)
            })
            .collect();
        Self::new(n, m, heights)
    }

    pub fn flat(n: usize, m: usize, value: f64) -> Result<Self> {
        Self::from_fn(n, m, |_| value)
    }

    /// `offset + (b/2)|x|²`.
    pub fn paraboloid(n: usize, m: usize, b: f64, offset: f64) -> Result<Self> {
        Self::from_fn(n, m, |x| offset + 0.5 * b * norm2(x))
    }

    /// Sum of `count` Gaussian bumps, scaled so that the analytic Hessian
    /// bound `Σ|b_k|/s_k²` equals `hessian_bound`.
    pub fn bumps(n: usize, m: usize, count: usize, hessian_bound: f64, seed: u64) -> Result<Self> {
        if count == 0 || !(hessian_bound > 0.0) {
            return Err(Error::Parameter("bumps need count ≥ 1 and a positive Hessian bound".into()));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let mut bumps: Vec<(Vec<f64>, f64, f64)> = (0..count)
            .map(|_| {
                let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s = rng.random_range(0.15..0.35);
                let b = rng.random_range(-1.0..1.0);
                (c, s, b)
            })
            .collect();
        let raw: f64 = bumps.iter().map(|(_, s, b)| b.abs() / (s * s)).sum();
        for bump in &mut bumps {
            bump.2 *= hessian_bound / raw;
        }
        Self::from_fn(n, m, |x| {
            bumps
                .iter()
                .map(|(c, s, b)| {
                    let r2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
                    b * (-r2 / (2.0 * s * s)).exp()
                })
                .sum()
        })
    }

    /// `A|x|² + B·softplus(ρ − √(|x−p|²+ε²))`: a bowl with a rounded conical
    /// peak of slope `B` and base radius `ρ` at `p`. Below-contacts avoid a
    /// disc of radius about `B/a` around `p`.
    pub fn peaked(n: usize, m: usize, bowl: f64, peak: PeakSpec) -> Result<Self> {
        if peak.centre.len() != n {
            return Err(Error::Parameter(format!("peak centre has {} coordinates, n = {n}", peak.centre.len())));
        }
        let PeakSpec { centre, slope, radius, tip, rim } = peak;
        Self::from_fn(n, m, |x| {
            let r2: f64 = x.iter().zip(&centre).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
            let t = radius - (r2 + tip * tip).sqrt();
            bowl * norm2(x) + slope * softplus(t, rim)
        })
    }

    /// Adds a constant so the smallest height over the ball equals `min`.
    pub fn lifted_to(mut self, min: f64) -> Self {
        let shift = min - self.lo;
        for v in &mut self.heights {
            *v += shift;
        }
        self.lo += shift;
        self.hi += shift;
        self
    }

    /// Attaches property-(P) metadata after checking the finite-difference
    /// Hessian at every interior node against `Λ·sup I`.
    pub fn with_property_p(mut self, p: PropertyP) -> Result<Self> {
        if !(p.lambda > 0.0) || !(p.opening_lo > 0.0) || !(p.opening_hi >= p.opening_lo) {
            return Err(Error::Parameter(format!("bad property-(P) metadata {p:?}")));
        }
        let worst = self.max_hessian_norm();
        let bound = p.lambda * p.opening_hi;
        if worst > bound * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "finite-difference Hessian norm {worst:e} exceeds Λ·sup I = {bound:e}"
            )));
        }
        self.property_p = Some(p);
        Ok(self)
    }

    pub fn assert_nonnegative(mut self) -> Result<Self> {
        if self.lo < 0.0 {
            return Err(Error::Precondition(format!("surface dips to {} < 0", self.lo)));
        }
        self.nonnegative = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn property_p(&self) -> Option<PropertyP> {
        self.property_p
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    /// Smallest and largest height over the ball.
    pub fn height_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn in_ball(&self, node: usize) -> bool {
        self.in_ball[node]
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let v = multi(self.n, self.m, node);
        [v[0], if self.n == 2 { v[1] } else { 0 }]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        multi(self.n, self.m, node).iter().map(|&k| -1.0 + k as f64 * self.h).collect()
    }

    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    /// Ball nodes with `|x| ≤ r`, ascending.
    pub fn ball_nodes(&self, r: f64) -> Vec<usize> {
        let c = (self.m / 2) as f64;
        let rr = r / self.h;
        (0..self.len())
            .filter(|&i| {
                self.in_ball[i]
                    && multi(self.n, self.m, i).iter().map(|&k| (k as f64 - c).powi(2)).sum::<f64>()
                        <= rr * rr * (1.0 + 1e-12)
            })
            .collect()
    }

    pub fn ball_centers(&self, r: f64) -> Vec<Vec<f64>> {
        self.ball_nodes(r).into_iter().map(|i| self.coords(i)).collect()
    }

    fn neighbours_in_ball(&self, k: [usize; 2]) -> bool {
        let m = self.m;
        let range = |v: usize| if v == 0 || v + 1 >= m { None } else { Some((v - 1, v + 1)) };
        let Some((a0, b0)) = range(k[0]) else { return false };
        if self.n == 1 {
            return self.in_ball[a0] && self.in_ball[b0];
        }
        let Some((a1, b1)) = range(k[1]) else { return false };
        (a0..=b0).all(|i| (a1..=b1).all(|j| self.in_ball[i * m + j]))
    }

    /// Central-difference Hessian (row-major `n×n`); `None` on boundary nodes.
    pub fn hessian(&self, node: usize) -> Option<Vec<f64>> {
        let k = self.multi_index(node);
        if !self.in_ball[node] || !self.neighbours_in_ball(k) {
            return None;
        }
        let w = &self.heights;
        let ih2 = 1.0 / (self.h * self.h);
        if self.n == 1 {
            return Some(vec![(w[node + 1] - 2.0 * w[node] + w[node - 1]) * ih2]);
        }
        let m = self.m;
        let at = |di: isize, dj: isize| w[(node as isize + di * m as isize + dj) as usize];
        let xx = (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)) * ih2;
        let yy = (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) * ih2;
        let xy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) * 0.25 * ih2;
        Some(vec![xx, xy, xy, yy])
    }

    /// Largest spectral norm of the finite-difference Hessian over interior
    /// ball nodes.
    pub fn max_hessian_norm(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .filter_map(|i| self.hessian(i))
            .map(|h| spectral_norm(&h))
            .reduce(|| 0.0, f64::max)
    }

    pub fn to_acf1(&self) -> Acf1 {
        Acf1 {
            dims: vec![self.m; self.n],
            h: self.h,
            origin: vec![-1.0; self.n],
            values: self.heights.clone(),
        }
    }

    pub fn from_acf1(a: Acf1) -> Result<Self> {
        let n = a.n();
        let m = *a.dims.first().ok_or_else(|| Error::Format("no dims".into()))?;
        if a.dims.iter().any(|&d| d != m) {
            return Err(Error::Format(format!("surface grid must be square, dims {:?}", a.dims)));
        }
        if m >= 2 && (a.h - 2.0 / (m - 1) as f64).abs() > 1e-12 {
            return Err(Error::Format(format!("h = {} does not tile [-1, 1] with {m} nodes", a.h)));
        }
        if a.origin.iter().any(|&o| (o + 1.0).abs() > 1e-12) {
            return Err(Error::Format(format!("surface origin must be -1, got {:?}", a.origin)));
        }
        Self::new(n, m, a.values)
    }
}

fn softplus(t: f64, width: f64) -> f64 {
    if t > 30.0 * width {
        t
    } else {
        width * (t / width).exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSpec {
    pub centre: Vec<f64>,
    pub slope: f64,
    pub radius: f64,
    /// Rounding length at the apex.
    pub tip: f64,
    /// Rounding length at the base.
    pub rim: f64,
}

fn multi(n: usize, m: usize, i: usize) -> Vec<usize> {
    if n == 1 {
        vec![i]
    } else {
        vec![i / m, i % m]
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn spectral_norm(h: &[f64]) -> f64 {
    if h.len() == 1 {
        return h[0].abs();
    }
    let (a, b, d) = (h[0], h[1], h[3]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean + rad).abs().max((mean - rad).abs())
}

/// `det(I + H/a)` for a row-major Hessian.
pub fn vertex_jacobian(h: &[f64], a: f64) -> f64 {
    if h.len() == 1 {
        1.0 + h[0] / a
    } else {
        (1.0 + h[0] / a) * (1.0 + h[3] / a) - (h[1] / a) * (h[2] / a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactRecord {
    pub center: Vec<f64>,
    pub opening: f64,
    pub sense: Sense,
    pub z: Vec<f64>,
    pub node: usize,
    pub vertex_height: f64,
    pub contact_height: f64,
    pub hessian: Option<Vec<f64>>,
    /// The contact node has a neighbour outside the ball.
    pub on_boundary: bool,
}

impl ContactRecord {
    /// Paraboloid height at `x`.
    pub fn paraboloid(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        match self.sense {
            Sense::Below => self.vertex_height - 0.5 * self.opening * d2,
            Sense::Above => self.vertex_height + 0.5 * self.opening * d2,
        }
    }
}

/// Arg-min of `±w(i) + half·|i − η|²` over ball nodes, scanning only the
/// index box outside of which no node can tie the value at the node nearest
/// `η`. Returns `(node, value)`.
fn slide_index(s: &DiscreteSurface, half: f64, eta: [f64; 2], sgn: f64) -> (usize, f64) {
    let m = s.m;
    let w = &s.heights;
    let (stride, top1) = if s.n == 2 { (m, m - 1) } else { (1, 0) };
    let objective = |i0: usize, i1: usize| {
        let d0 = i0 as f64 - eta[0];
        let d1 = i1 as f64 - eta[1];
        sgn * w[i0 * stride + i1] + half * (d0 * d0 + d1 * d1)
    };
    let floor = if sgn > 0.0 { s.lo } else { -s.hi };
    let near = |e: f64, top: usize| e.round().clamp(0.0, top as f64) as usize;
    let (n0, n1) = (near(eta[0], m - 1), near(eta[1], top1));
    let mut box0 = (0, m - 1);
    let mut box1 = (0, top1);
    if s.in_ball[n0 * stride + n1] {
        let reach = ((objective(n0, n1) - floor) / half).sqrt() + 1.0;
        if reach.is_finite() {
            let span = |e: f64, top: usize| {
                let lo = (e - reach).ceil().max(0.0) as usize;
                let hi = ((e + reach).floor().max(0.0) as usize).min(top);
                (lo, hi)
            };
            box0 = span(eta[0], m - 1);
            box1 = span(eta[1], top1);
        }
    }
    let mut best = (usize::MAX, f64::INFINITY);
    for i0 in box0.0..=box0.1 {
        for i1 in box1.0..=box1.1 {
            let node = i0 * stride + i1;
            if !s.in_ball[node] {
                continue;
            }
            let v = objective(i0, i1);
            if v < best.1 {
                best = (node, v);
            }
        }
    }
    best
}

/// Slides the paraboloid of opening `a` centred over `y` until it touches
/// the surface. Ties go to the lexicographically smallest node.
pub fn slide_paraboloid(s: &DiscreteSurface, a: f64, y: &[f64], sense: Sense) -> Result<ContactRecord> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Parameter(format!("opening must be positive, got {a}")));
    }
    if y.len() != s.n || y.iter().any(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Parameter(format!("centre {y:?} outside [-1, 1]^{}", s.n)));
    }
    let eta = [
        (y[0] + 1.0) / s.h,
        if s.n == 2 { (y[1] + 1.0) / s.h } else { 0.0 },
    ];
    let half = 0.5 * a * s.h * s.h;
    let sgn = match sense {
        Sense::Below => 1.0,
        Sense::Above => -1.0,
    };
    let (node, value) = slide_index(s, half, eta, sgn);
    let hessian = s.hessian(node);
    Ok(ContactRecord {
        center: y.to_vec(),
        opening: a,
        sense,
        z: s.coords(node),
        node,
        vertex_height: sgn * value,
        contact_height: s.heights[node],
        on_boundary: hessian.is_none(),
        hessian,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContactSetReport {
    pub opening: f64,
    pub sense: Sense,
    pub n: usize,
    pub h: f64,
    pub centers: usize,
    pub center_measure: f64,
    /// Distinct contact nodes in the window, ascending.
    #[serde(skip)]
    pub nodes: Vec<usize>,
    pub contact_count: usize,
    pub measure: f64,
    pub boundary_excluded: usize,
    /// Interior contacts with `|z| > 3/4`.
    pub outside_window: usize,
    /// Largest `|z|` over interior contacts.
    pub max_contact_radius: f64,
    #[serde(skip)]
    pub records: Vec<ContactRecord>,
}

impl ContactSetReport {
    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// `|B_r ∖ D_a|` in cell counts times `hⁿ`.
    pub fn complement_in_ball(&self, s: &DiscreteSurface, r: f64) -> f64 {
        let missing = s.ball_nodes(r).into_iter().filter(|&i| !self.contains(i)).count();
        missing as f64 * s.cell_measure()
    }
}

pub fn contact_set(s: &DiscreteSurface, a: f64, centers: &[Vec<f64>], sense: Sense) -> Result<ContactSetReport> {
    let records = centers
        .par_iter()
        .map(|y| slide_paraboloid(s, a, y, sense))
        .collect::<Result<Vec<_>>>()?;
    let interior = || records.iter().filter(|r| !r.on_boundary);
    let window = CONTACT_WINDOW * (1.0 + 1e-12);
    let mut nodes: Vec<usize> = interior().filter(|r| norm2(&r.z).sqrt() <= window).map(|r| r.node).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let boundary_excluded = records.len() - interior().count();
    let outside_window = interior().filter(|r| norm2(&r.z).sqrt() > window).count();
    let max_contact_radius = interior().map(|r| norm2(&r.z).sqrt()).fold(0.0, f64::max);
    Ok(ContactSetReport {
        opening: a,
        sense,
        n: s.n,
        h: s.h,
        centers: centers.len(),
        center_measure: centers.len() as f64 * s.cell_measure(),
        contact_count: nodes.len(),
        measure: nodes.len() as f64 * s.cell_measure(),
        nodes,
        boundary_excluded,
        outside_window,
        max_contact_radius,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AbpReport {
    pub opening: f64,
    pub lambda: f64,
    pub n: usize,
    pub h: f64,
    pub f_measure: f64,
    pub e_measure: f64,
    pub ratio: f64,
    /// `(Λ+1)^{-n}`.
    pub bound: f64,
    pub grid_slack: f64,
    pub max_jacobian: f64,
    /// `(Λ+1)ⁿ`.
    pub jacobian_bound: f64,
    pub excluded: usize,
    pub exclusion_fraction: f64,
    pub inconclusive: bool,
    pub holds: bool,
}

/// Measures `|E|/|F|` for below-contacts with centres `F`.
pub fn abp_check(s: &DiscreteSurface, a: f64, centers: &[Vec<f64>]) -> Result<AbpReport> {
    let p = s
        .property_p
        .ok_or_else(|| Error::Precondition("surface carries no property-(P) metadata".into()))?;
    if !p.covers(a, a) {
        return Err(Error::Precondition(format!(
            "opening {a} outside the admissible interval [{}, {}]",
            p.opening_lo, p.opening_hi
        )));
    }
    if centers.is_empty() {
        return Err(Error::Parameter("empty centre set".into()));
    }
    let rep = contact_set(s, a, centers, Sense::Below)?;
    let max_jacobian = rep
        .records
        .iter()
        .filter_map(|r| r.hessian.as_deref())
        .map(|h| vertex_jacobian(h, a))
        .fold(f64::NEG_INFINITY, f64::max);
    let n = s.n as i32;
    let bound = (p.lambda + 1.0).powi(-n);
    let grid_slack = ABP_SLACK * s.h;
    let ratio = rep.measure / rep.center_measure;
    let exclusion_fraction = rep.boundary_excluded as f64 / rep.centers as f64;
    Ok(AbpReport {
        opening: a,
        lambda: p.lambda,
        n: s.n,
        h: s.h,
        f_measure: rep.center_measure,
        e_measure: rep.measure,
        ratio,
        bound,
        grid_slack,
        max_jacobian,
        jacobian_bound: (p.lambda + 1.0).powi(n),
        excluded: rep.boundary_excluded,
        exclusion_fraction,
        inconclusive: exclusion_fraction > MAX_EXCLUDED_FRACTION,
        holds: ratio >= bound - grid_slack,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringLevel {
    pub k: usize,
    pub opening: f64,
    /// `|B_{5/8} ∖ D|`.
    pub complement: f64,
    /// `|B_{1/2} ∖ D|`.
    pub complement_half: f64,
    pub boundary_excluded: usize,
    pub max_contact_height: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub floor: f64,
    /// First level at or below the floor.
    pub floor_k: Option<usize>,
    /// Strict decrease up to and including the first floor level.
    pub strictly_decreasing: bool,
    /// Fitted complement ratio per level over the pre-floor range.
    pub rate: Option<f64>,
    pub r_squared: Option<f64>,
    pub fit_points: usize,
}

impl DecayFit {
    pub fn from_series(values: &[f64], floor: f64) -> Self {
        let floor_k = values.iter().position(|&v| v <= floor);
        let upto = floor_k.map_or(values.len(), |k| k + 1);
        let strictly_decreasing = values[..upto].windows(2).all(|w| w[1] < w[0]);
        let pts: Vec<(f64, f64)> = values[..floor_k.unwrap_or(values.len())]
            .iter()
            .enumerate()
            .map(|(k, v)| (k as f64, v.ln()))
            .collect();
        let (rate, r_squared) = match log_linear_fit(&pts) {
            Some((slope, r2)) => (Some(slope.exp()), Some(r2)),
            None => (None, None),
        };
        Self {
            floor,
            floor_k,
            strictly_decreasing,
            rate,
            r_squared,
            fit_points: pts.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringReport {
    pub levels: Vec<CoveringLevel>,
    pub ball_measure: f64,
    pub half_ball_measure: f64,
    pub decay: DecayFit,
    pub decay_half: DecayFit,
    /// The sweep stopped at the edge of the admissible opening interval.
    pub truncated: bool,
}

/// Complement of `D_{C^k a₀}` in `B̄_{5/8}` and `B_{1/2}`, centres over the
/// whole ball.
pub fn covering_iteration(s: &DiscreteSurface, a0: f64, c_open: f64, k_max: usize) -> Result<CoveringReport> {
    if !s.nonnegative {
        return Err(Error::Precondition("covering iteration needs a nonnegative surface".into()));
    }
    let p = s
        .property_p
        .ok_or_else(|| Error::Precondition("surface carries no property-(P) metadata".into()))?;
    if !(a0 > 0.0) || !(c_open > 1.0) {
        return Err(Error::Parameter(format!("need a0 > 0 and C > 1, got {a0}, {c_open}")));
    }
    if !p.covers(a0, a0) {
        return Err(Error::Precondition(format!("a0 = {a0} below the admissible interval")));
    }
    let centers = s.ball_centers(1.0);
    let outer = s.ball_nodes(COVERING_RADIUS);
    let inner = s.ball_nodes(0.5);
    let cell = s.cell_measure();
    let mut levels = Vec::new();
    let mut truncated = false;
    for k in 0..=k_max {
        let a = a0 * c_open.powi(k as i32);
        if !p.covers(a, a) {
            truncated = true;
            break;
        }
        let rep = contact_set(s, a, &centers, Sense::Below)?;
        let missing = |set: &[usize]| set.iter().filter(|&&i| !rep.contains(i)).count() as f64 * cell;
        levels.push(CoveringLevel {
            k,
            opening: a,
            complement: missing(&outer),
            complement_half: missing(&inner),
            boundary_excluded: rep.boundary_excluded,
            max_contact_height: rep.records.iter().map(|r| r.contact_height).fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let floor = FLOOR_CELLS * cell;
    let series = |f: fn(&CoveringLevel) -> f64| levels.iter().map(f).collect::<Vec<_>>();
    Ok(CoveringReport {
        ball_measure: outer.len() as f64 * cell,
        half_ball_measure: inner.len() as f64 * cell,
        decay: DecayFit::from_series(&series(|l| l.complement), floor),
        decay_half: DecayFit::from_series(&series(|l| l.complement_half), floor),
        levels,
        truncated,
    })
}

/// Least-squares slope and R²; needs three points.
fn log_linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, r2))
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakHarnackReport {
    pub theta: f64,
    pub m: f64,
    pub mu: f64,
    pub opening: f64,
    pub hypothesis_met: bool,
    /// `[θ, Mθ]` lies in the surface's admissible interval.
    pub interval_ok: bool,
    pub complement_fraction: Option<f64>,
    pub max_contact_height: Option<f64>,
    pub height_bound: f64,
    pub height_violations: usize,
    pub boundary_excluded: usize,
    pub holds: bool,
}

pub fn weak_harnack(s: &DiscreteSurface, theta: f64, m: f64, mu: f64) -> Result<WeakHarnackReport> {
    if !s.nonnegative {
        return Err(Error::Precondition("weak Harnack needs a nonnegative surface".into()));
    }
    if !(theta > 0.0) || !(m >= 1.0) || !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Parameter(format!("need θ > 0, M ≥ 1, 0 < μ < 1; got {theta}, {m}, {mu}")));
    }
    let opening = m * theta;
    let height_bound = 8.0 * m * theta;
    let half = s.ball_nodes(0.5);
    let hypothesis_met = half.iter().any(|&i| s.heights[i] <= theta);
    let interval_ok = s.property_p.is_some_and(|p| p.covers(theta, opening));
    let mut report = WeakHarnackReport {
        theta,
        m,
        mu,
        opening,
        hypothesis_met,
        interval_ok,
        complement_fraction: None,
        max_contact_height: None,
        height_bound,
        height_violations: 0,
        boundary_excluded: 0,
        holds: false,
    };
    if !hypothesis_met {
        return Ok(report);
    }
    let rep = contact_set(s, opening, &s.ball_centers(1.0), Sense::Below)?;
    let missing = half.iter().filter(|&&i| !rep.contains(i)).count();
    let fraction = missing as f64 / half.len() as f64;
    let max_h = rep.records.iter().map(|r| r.contact_height).fold(f64::NEG_INFINITY, f64::max);
    report.height_violations = rep.records.iter().filter(|r| r.contact_height > height_bound).count();
    report.complement_fraction = Some(fraction);
    report.max_contact_height = Some(max_h);
    report.boundary_excluded = rep.boundary_excluded;
    report.holds = fraction <= mu && report.height_violations == 0;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OppositeSideReport {
    pub theta: f64,
    pub opening: f64,
    pub centers: usize,
    pub measure: f64,
    /// `measure / |B_{1/2}|`.
    pub half_ball_fraction: f64,
    pub escaped: usize,
    pub max_contact_radius: f64,
    pub max_contact_height: f64,
    pub holds: bool,
}

/// Openings `8θ` from below with centres in `B_{1/16}`.
pub fn opposite_side_measure(s: &DiscreteSurface, theta: f64) -> Result<OppositeSideReport> {
    if !s.nonnegative || s.lo < 0.0 {
        return Err(Error::Precondition("opposite-side measure needs a nonnegative surface".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::Parameter(format!("θ must be positive, got {theta}")));
    }
    let near_origin = s.ball_nodes(s.h * (1.0 + 1e-9));
    if !near_origin.iter().any(|&i| s.heights[i] <= theta) {
        return Err(Error::Precondition(format!("no node within h of 0 has height ≤ θ = {theta}")));
    }
    let centers = s.ball_centers(1.0 / 16.0);
    let opening = 8.0 * theta;
    let rep = contact_set(s, opening, &centers, Sense::Below)?;
    let top = 1.5 * theta;
    let escaped = rep
        .records
        .iter()
        .filter(|r| !(norm2(&r.z).sqrt() < 0.5 && r.contact_height >= 0.0 && r.contact_height <= top))
        .count();
    let max_contact_height = rep.records.iter().map(|r| r.contact_height).fold(0.0, f64::max);
    let max_contact_radius = rep.records.iter().map(|r| norm2(&r.z).sqrt()).fold(0.0, f64::max);
    let half = s.ball_nodes(0.5).len() as f64 * s.cell_measure();
    Ok(OppositeSideReport {
        theta,
        opening,
        centers: centers.len(),
        measure: rep.measure,
        half_ball_fraction: rep.measure / half,
        escaped,
        max_contact_radius,
        max_contact_height,
        holds: escaped == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(s: &DiscreteSurface, a: f64, y: &[f64], sense: Sense) -> (usize, f64) {
        let sgn = if sense == Sense::Below { 1.0 } else { -1.0 };
        let half = 0.5 * a * s.h() * s.h();
        let eta: Vec<f64> = y.iter().map(|v| (v + 1.0) / s.h()).collect();
        let mut best = (usize::MAX, f64::INFINITY);
        for i in (0..s.len()).rev() {
            if !s.in_ball(i) {
                continue;
            }
            let k = s.multi_index(i);
            let mut d2 = 0.0;
            for (j, e) in eta.iter().enumerate() {
                let d = k[j] as f64 - e;
                d2 += d * d;
            }
            let v = sgn * s.heights()[i] + half * d2;
            if v <= best.1 {
                best = (i, v);
            }
        }
        best
    }

    #[test]
    fn flat_surface_touches_below_the_centre() {
        let s = DiscreteSurface::flat(1, 201, 0.0).unwrap();
        let r = slide_paraboloid(&s, 1.0, &[0.3], Sense::Below).unwrap();
        assert!((r.z[0] - 0.3).abs() <= 0.5 * s.h() + 1e-15);
        assert!(r.vertex_height.abs() < 1e-4);
        let s = DiscreteSurface::flat(2, 41, 0.25).unwrap();
        let r = slide_paraboloid(&s, 3.0, &[0.1, -0.2], Sense::Above).unwrap();
        assert!((r.z[0] - 0.1).abs() < 1e-12 && (r.z[1] + 0.2).abs() < 1e-12, "{:?}", r.z);
        assert!((r.vertex_height - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parabola_contact_point() {
        let b = 2.0;
        let s = DiscreteSurface::paraboloid(1, 2001, b, 0.0).unwrap();
        for &(a, y) in &[(1.0, 0.6), (4.0, -0.9), (0.5, 0.25)] {
            let r = slide_paraboloid(&s, a, &[y], Sense::Below).unwrap();
            assert!((r.z[0] - a * y / (a + b)).abs() <= s.h(), "{a} {y} {:?}", r.z);
        }
    }

    #[test]
    fn pruned_scan_matches_exhaustive_scan() {
        let s = DiscreteSurface::bumps(2, 65, 6, 3.0, 9).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        for q in 0..200 {
            let y = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            let a = rng.random_range(0.1..10.0);
            let sense = if q % 2 == 0 { Sense::Below } else { Sense::Above };
            let r = slide_paraboloid(&s, a, &y, sense).unwrap();
            let (node, v) = brute(&s, a, &y, sense);
            assert_eq!(r.node, node);
            let sgn = if sense == Sense::Below { 1.0 } else { -1.0 };
            assert_eq!((sgn * r.vertex_height).to_bits(), v.to_bits());
        }
    }

    #[test]
    fn paraboloid_stays_on_one_side() {
        let s = DiscreteSurface::bumps(2, 41, 5, 2.0, 3).unwrap();
        for sense in [Sense::Below, Sense::Above] {
            let r = slide_paraboloid(&s, 1.5, &[0.2, 0.1], sense).unwrap();
            for i in (0..s.len()).filter(|&i| s.in_ball(i)) {
                let gap = s.heights()[i] - r.paraboloid(&s.coords(i));
                let gap = if sense == Sense::Below { gap } else { -gap };
                assert!(gap >= -1e-12);
            }
            assert!((s.heights()[r.node] - r.paraboloid(&r.z)).abs() <= 1e-12);
        }
    }

    #[test]
    fn moreau_envelope_is_monotone_in_the_opening() {
        let s = DiscreteSurface::bumps(2, 41, 7, 5.0, 11).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let y = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
            let a = rng.random_range(0.1..5.0);
            let lo = slide_paraboloid(&s, a, &y, Sense::Below).unwrap();
            let hi = slide_paraboloid(&s, a * 1.7, &y, Sense::Below).unwrap();
            assert!(hi.vertex_height >= lo.vertex_height);
        }
    }

    #[test]
    fn whole_cell_shifts_are_exact() {
        let m = 129;
        let base = DiscreteSurface::bumps(2, m, 5, 40.0, 2).unwrap();
        let big = 1e6;
        let mask = |x: &[f64]| norm2(x) <= 0.09;
        let inside = |s: &DiscreteSurface, i: usize, shift: [usize; 2]| {
            let k = s.multi_index(i);
            if k[0] < shift[0] || k[1] < shift[1] {
                return None;
            }
            Some((k[0] - shift[0]) * m + (k[1] - shift[1]))
        };
        let w0: Vec<f64> = (0..base.len())
            .map(|i| if mask(&base.coords(i)) { base.heights()[i] } else { big })
            .collect();
        let s0 = DiscreteSurface::new(2, m, w0.clone()).unwrap();
        let shift = [7usize, 3usize];
        let w1: Vec<f64> = (0..base.len())
            .map(|i| inside(&s0, i, shift).map_or(big, |j| w0[j]))
            .collect();
        let s1 = DiscreteSurface::new(2, m, w1).unwrap();
        let h = s0.h();
        for (y0, y1) in [(0.03125, -0.0625), (-0.1, 0.12), (0.0, 0.0)] {
            let a = 3.0;
            let r0 = slide_paraboloid(&s0, a, &[y0, y1], Sense::Below).unwrap();
            let ys = [y0 + shift[0] as f64 * h, y1 + shift[1] as f64 * h];
            let r1 = slide_paraboloid(&s1, a, &ys, Sense::Below).unwrap();
            let k0 = s0.multi_index(r0.node);
            let k1 = s1.multi_index(r1.node);
            assert_eq!([k0[0] + shift[0], k0[1] + shift[1]], k1);
            assert_eq!(r0.vertex_height.to_bits(), r1.vertex_height.to_bits());
        }
    }

    #[test]
    fn contact_set_of_parabola_is_its_linear_image() {
        let (a, b) = (1.0, 1.0);
        let s = DiscreteSurface::paraboloid(1, 401, b, 0.0).unwrap();
        let centers = s.ball_centers(1.0);
        let rep = contact_set(&s, a, &centers, Sense::Below).unwrap();
        let expect = a / (a + b) * rep.center_measure;
        assert!((rep.measure - expect).abs() <= 3.0 * s.h(), "{} vs {expect}", rep.measure);
        let flat = DiscreteSurface::flat(2, 33, 0.0).unwrap();
        let c = flat.ball_centers(1.0);
        let rep = contact_set(&flat, 2.0, &c, Sense::Below).unwrap();
        assert_eq!(rep.contact_count + rep.boundary_excluded + rep.outside_window, c.len());
    }

    #[test]
    fn abp_on_flat_and_bumpy_surfaces() {
        let p = PropertyP { lambda: 1.0, opening_lo: 1.0, opening_hi: 1.0 };
        let flat = DiscreteSurface::flat(1, 129, 0.0).unwrap().with_property_p(p).unwrap();
        let r = abp_check(&flat, 1.0, &flat.ball_centers(0.5)).unwrap();
        assert_eq!(r.ratio, 1.0);
        let s = DiscreteSurface::bumps(1, 513, 8, 1.0, 5).unwrap().with_property_p(p).unwrap();
        let r = abp_check(&s, 1.0, &s.ball_centers(0.5)).unwrap();
        assert!(r.holds && !r.inconclusive, "{r:?}");
        assert!(r.max_jacobian <= r.jacobian_bound + 0.1);
        assert!(abp_check(&DiscreteSurface::flat(1, 9, 0.0).unwrap(), 1.0, &flat.ball_centers(0.5)).is_err());
    }

    #[test]
    fn property_p_metadata_is_checked() {
        let s = DiscreteSurface::paraboloid(2, 33, 3.0, 0.0).unwrap();
        let p = PropertyP { lambda: 1.0, opening_lo: 1.0, opening_hi: 2.0 };
        assert!(s.clone().with_property_p(p).is_err());
        let p = PropertyP { lambda: 1.0, opening_lo: 1.0, opening_hi: 3.0 };
        assert!(s.with_property_p(p).is_ok());
    }

    #[test]
    fn weak_harnack_and_opposite_side_on_simple_surfaces() {
        let theta = 0.01;
        let p = PropertyP { lambda: 1.0, opening_lo: theta, opening_hi: 32.0 * theta };
        let zero = DiscreteSurface::flat(2, 33, 0.0).unwrap().with_property_p(p).unwrap().assert_nonnegative().unwrap();
        let r = weak_harnack(&zero, theta, 32.0, 0.5).unwrap();
        assert_eq!(r.complement_fraction, Some(0.0));
        assert_eq!(r.height_violations, 0);
        let lifted = DiscreteSurface::flat(2, 33, 1.0).unwrap().assert_nonnegative().unwrap();
        assert!(!weak_harnack(&lifted, theta, 32.0, 0.5).unwrap().hypothesis_met);

        let bowl = DiscreteSurface::paraboloid(2, 65, 2.0 * theta, theta).unwrap().assert_nonnegative().unwrap();
        let r = opposite_side_measure(&bowl, theta).unwrap();
        assert!(r.holds, "{r:?}");
        let level = DiscreteSurface::flat(2, 65, theta).unwrap().assert_nonnegative().unwrap();
        let r = opposite_side_measure(&level, theta).unwrap();
        assert_eq!(r.measure, r.centers as f64 * level.cell_measure());
        let neg = DiscreteSurface::flat(2, 33, -0.1).unwrap();
        assert!(neg.assert_nonnegative().is_err());
        assert!(opposite_side_measure(&DiscreteSurface::flat(2, 33, 0.0).unwrap(), theta).is_err());
    }

    #[test]
    fn covering_on_flat_surface_is_immediately_full() {
        let p = PropertyP { lambda: 1.0, opening_lo: 0.2, opening_hi: 1.0 };
        let s = DiscreteSurface::flat(2, 33, 0.0).unwrap().with_property_p(p).unwrap().assert_nonnegative().unwrap();
        let r = covering_iteration(&s, 0.2, 2.0, 5).unwrap();
        assert_eq!(r.levels[0].complement, 0.0);
        assert!(r.truncated);
        assert_eq!(r.levels.len(), 3);
    }

    #[test]
    fn acf1_round_trip() {
        let s = DiscreteSurface::bumps(2, 17, 3, 1.0, 0).unwrap();
        let bytes = s.to_acf1().encode();
        let t = DiscreteSurface::from_acf1(Acf1::decode(&bytes).unwrap()).unwrap();
        assert_eq!(t.heights(), s.heights());
        assert!(DiscreteSurface::new(3, 5, vec![0.0; 125]).is_err());
        assert!(DiscreteSurface::new(2, 4, vec![0.0; 16]).is_err());
    }
}
