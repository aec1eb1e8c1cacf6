//! Zero level sets of grid fields and the flatness quantities measured on
//! them: trapping widths, Harnack contraction, flatness cascades, deviation
//! from model profiles and curvature of touching quadratics.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::ScalarField;
use crate::error::{Error, Result};
use crate::profile1d::Profile1D;

/// A sign change between node `cell` and `cell + 1` of a column, at
/// fractional position `frac ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub cell: usize,
    pub frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroColumn {
    /// Node coordinates of the column with the axis coordinate set to 0.
    pub base: Vec<f64>,
    pub crossings: Vec<Crossing>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSet {
    pub axis: usize,
    pub n: usize,
    pub h: f64,
    pub axis_origin: f64,
    pub columns: Vec<ZeroColumn>,
    /// Set when the field has a single sign and the set is empty.
    pub single_signed: bool,
}

/// Per-column scan along `axis` with linear interpolation. Zero counts as
/// positive.
pub fn extract(field: &ScalarField, axis: usize) -> Result<ZeroSet> {
    let grid = field.grid();
    let n = grid.n();
    if axis >= n {
        return Err(Error::Parameter(format!("axis {axis} out of range for an {n}-dimensional grid")));
    }
    let dims = grid.dims();
    let strides = grid.strides();
    let u = field.values();
    let starts: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.multi_index(i)[axis] == 0)
        .collect();
    let columns: Vec<ZeroColumn> = starts
        .par_iter()
        .map(|&start| {
            let mut base = grid.coords(start)[..n].to_vec();
            base[axis] = 0.0;
            let mut crossings = Vec::new();
            for c in 0..dims[axis] - 1 {
                let a = u[start + c * strides[axis]];
                let b = u[start + (c + 1) * strides[axis]];
                if (a < 0.0) != (b < 0.0) {
                    crossings.push(Crossing { cell: c, frac: a / (a - b) });
                }
            }
            ZeroColumn { base, crossings }
        })
        .collect();
    let single_signed = columns.iter().all(|c| c.crossings.is_empty());
    Ok(ZeroSet {
        axis,
        n,
        h: grid.h(),
        axis_origin: grid.origin()[axis],
        columns,
        single_signed,
    })
}

impl ZeroSet {
    pub fn height(&self, c: &Crossing) -> f64 {
        self.axis_origin + (c.cell as f64 + c.frac) * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(|c| c.crossings.is_empty())
    }

    fn point(&self, col: &ZeroColumn, c: &Crossing) -> Vec<f64> {
        let mut p = col.base.clone();
        p[self.axis] = self.height(c);
        p
    }

    /// Every crossing as a point.
    pub fn all_points(&self) -> Vec<Vec<f64>> {
        self.columns
            .iter()
            .flat_map(|col| col.crossings.iter().map(move |c| self.point(col, c)))
            .collect()
    }

    /// One point per nonempty column: the crossing closest to the plane
    /// `x_axis = reference`.
    pub fn primary_points(&self, reference: f64) -> Vec<Vec<f64>> {
        self.columns
            .iter()
            .filter_map(|col| {
                col.crossings
                    .iter()
                    .min_by(|a, b| {
                        let da = (self.height(a) - reference).abs();
                        let db = (self.height(b) - reference).abs();
                        da.partial_cmp(&db).expect("finite heights")
                    })
                    .map(|c| self.point(col, c))
            })
            .collect()
    }

    /// Transverse distance of a column from the axis through the origin.
    fn transverse_radius(&self, col: &ZeroColumn) -> f64 {
        col.base.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub xi: Vec<f64>,
    /// Least-squares offset of the plane `x·ξ = offset`.
    pub offset: f64,
    /// `sup |x·ξ − offset|` over the points.
    pub theta: f64,
    /// Largest distance of a point from the line `ℝξ`.
    pub radius: f64,
    pub points: usize,
    /// Number of eigenvalues of the scatter matrix tied with the smallest
    /// (1 for a well-posed plane fit).
    pub fit_multiplicity: usize,
}

/// Width of a point cloud around its best plane: with `xi` given only the
/// offset is fitted, otherwise the total-least-squares plane.
pub fn fit_plane(points: &[Vec<f64>], xi: Option<&[f64]>) -> Result<FlatnessReport> {
    let m = points.len();
    if m == 0 {
        return Err(Error::Precondition("empty point set".into()));
    }
    let n = points[0].len();
    let mut centroid = vec![0.0; n];
    for p in points {
        for k in 0..n {
            centroid[k] += p[k] / m as f64;
        }
    }
    let (xi, multiplicity) = match xi {
        Some(v) => {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if v.len() != n || !(norm > 0.0) {
                return Err(Error::Parameter("direction must be a nonzero vector of the ambient dimension".into()));
            }
            (v.iter().map(|x| x / norm).collect::<Vec<_>>(), 1)
        }
        None => {
            let scatter = DMatrix::from_fn(n, n, |i, j| {
                points
                    .iter()
                    .map(|p| (p[i] - centroid[i]) * (p[j] - centroid[j]))
                    .sum::<f64>()
            });
            let eig = SymmetricEigen::new(scatter);
            let (imin, &lmin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite eigenvalues"))
                .expect("nonempty spectrum");
            let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
            let multiplicity = eig
                .eigenvalues
                .iter()
                .filter(|&&l| (l - lmin).abs() <= 1e-10 * scale)
                .count();
            let mut v: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            // Orient along the last axis.
            if v[n - 1] < 0.0 || (v[n - 1] == 0.0 && v.iter().rev().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)) {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (v, multiplicity)
        }
    };
    let dot = |p: &[f64]| p.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>();
    let offset = dot(&centroid);
    let mut theta = 0.0f64;
    let mut radius = 0.0f64;
    for p in points {
        let s = dot(p);
        theta = theta.max((s - offset).abs());
        let r2: f64 = p.iter().zip(&xi).map(|(a, b)| (a - s * b).powi(2)).sum();
        radius = radius.max(r2.sqrt());
    }
    Ok(FlatnessReport {
        xi,
        offset,
        theta,
        radius,
        points: m,
        fit_multiplicity: multiplicity,
    })
}

/// [`fit_plane`] on the primary points of a zero set (closest crossing to
/// the plane through the origin).
pub fn flatness(zs: &ZeroSet, xi: Option<&[f64]>) -> Result<FlatnessReport> {
    if zs.is_empty() {
        return Err(Error::Precondition("zero set is empty".into()));
    }
    fit_plane(&zs.primary_points(0.0), xi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub l: f64,
    /// `sup |x_n|` over the zero set in `{|x′| < l}`.
    pub theta: f64,
    /// The same over `{|x′| < l/2}`.
    pub theta_half: f64,
    /// `1 − θ½/θ`; `None` when `θ` is below the noise floor.
    pub delta: Option<f64>,
    pub noise_floor: f64,
    pub hypothesis_met: bool,
    pub failure: Option<String>,
}

/// Measures the contraction `{u=0} ∩ {|x′|<l/2} ⊂ {|x_n| < (1−δ̂)θ}`.
/// Hypothesis failures are reported, not raised.
pub fn harnack_check(field: &ScalarField, l: f64) -> Result<HarnackReport> {
    let grid = field.grid();
    let n = grid.n();
    let zs = extract(field, n - 1)?;
    let h = grid.h();
    let noise_floor = 10.0 * h * h;
    let (zlo, zhi) = grid.extent(n - 1);
    let mut report = HarnackReport {
        l,
        theta: 0.0,
        theta_half: 0.0,
        delta: None,
        noise_floor,
        hypothesis_met: true,
        failure: None,
    };
    let fail = |msg: String, rep: &mut HarnackReport| {
        if rep.failure.is_none() {
            rep.failure = Some(msg);
        }
        rep.hypothesis_met = false;
    };
    let mut origin_height = None;
    for col in &zs.columns {
        let r = zs.transverse_radius(col);
        if r >= l {
            continue;
        }
        if col.crossings.is_empty() {
            fail(format!("column at {:?} has no zero crossing", col.base), &mut report);
            continue;
        }
        for c in &col.crossings {
            let z = zs.height(c);
            report.theta = report.theta.max(z.abs());
            if r < l / 2.0 {
                report.theta_half = report.theta_half.max(z.abs());
            }
        }
        if r < 0.5 * h {
            origin_height = col
                .crossings
                .iter()
                .map(|c| zs.height(c).abs())
                .fold(None, |a: Option<f64>, z| Some(a.map_or(z, |a| a.min(z))));
        }
    }
    match origin_height {
        None => fail("no grid column through the origin".into(), &mut report),
        Some(z) if z > noise_floor.max(h) => {
            fail(format!("origin not on the zero set (nearest crossing at height {z})"), &mut report)
        }
        _ => {}
    }
    if report.theta >= (zhi.min(-zlo)) {
        fail(format!("zero set not trapped: θ = {} reaches the box", report.theta), &mut report);
    }
    if report.theta > noise_floor {
        report.delta = Some(1.0 - report.theta_half / report.theta);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeLevel {
    pub l: f64,
    pub theta: f64,
    pub xi: Vec<f64>,
    /// `θ_k / θ_{k−1}` (empirical η₁).
    pub eta1: Option<f64>,
    /// `l_k / l_{k−1}` (empirical η₂).
    pub eta2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub levels: Vec<CascadeLevel>,
    /// Set when the cascade stopped before the requested number of levels.
    pub partial: Option<String>,
    pub noise_floor: f64,
    /// `θ_k/l_k` nonincreasing within `10h²/l_k`.
    pub ratios_nonincreasing: bool,
    pub hypothesis_met: bool,
}

/// Halves the observation cylinder `levels − 1` times starting from `l0`,
/// refitting `ξ` inside the previous cylinder each time.
pub fn flatness_cascade(field: &ScalarField, l0: f64, levels: usize) -> Result<CascadeReport> {
    let grid = field.grid();
    let n = grid.n();
    let h = grid.h();
    let zs = extract(field, n - 1)?;
    let noise_floor = 10.0 * h * h;
    let mut xi: Vec<f64> = (0..n).map(|k| if k == n - 1 { 1.0 } else { 0.0 }).collect();
    let mut out = CascadeReport {
        levels: Vec::new(),
        partial: None,
        noise_floor,
        ratios_nonincreasing: true,
        hypothesis_met: true,
    };
    let all = zs.all_points();
    let mut l = l0;
    for k in 0..levels {
        if l < 4.0 * h {
            out.partial = Some(format!("level {k}: l = {l} below grid resolution"));
            break;
        }
        let dot = |p: &[f64], v: &[f64]| p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let inside: Vec<Vec<f64>> = all
            .iter()
            .filter(|p| {
                let s = dot(p, &xi);
                let r2: f64 = p.iter().zip(&xi).map(|(a, b)| (a - s * b).powi(2)).sum();
                r2.sqrt() < l
            })
            .cloned()
            .collect();
        if inside.len() < n {
            out.partial = Some(format!("level {k}: too few zero-set points in the cylinder"));
            break;
        }
        let fit = fit_plane(&inside, None)?;
        if fit.theta >= l || inside.iter().any(|p| dot(p, &fit.xi).abs() >= l) {
            out.partial = Some(format!("level {k}: zero set exits the observation cylinder"));
            break;
        }
        let prev = out.levels.last();
        let level = CascadeLevel {
            l,
            theta: fit.theta,
            xi: fit.xi.clone(),
            eta1: prev.filter(|p| p.theta > 0.0).map(|p| fit.theta / p.theta),
            eta2: prev.map(|p| l / p.l),
        };
        if let Some(p) = prev {
            if level.theta / l > p.theta / p.l + noise_floor / l {
                out.ratios_nonincreasing = false;
            }
        } else if fit.theta / l > 0.05 {
            out.hypothesis_met = false;
        }
        out.levels.push(level);
        xi = fit.xi;
        l *= 0.5;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Interface {
    /// `x·normal = offset`, `u > 0` on the side the normal points to.
    Plane { normal: Vec<f64>, offset: f64 },
    /// `|x − center| = radius`, `u > 0` outside.
    Sphere { center: Vec<f64>, radius: f64 },
}

impl Interface {
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Interface::Plane { normal, offset } => {
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() / norm - offset
            }
            Interface::Sphere { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() - radius
            }
        }
    }
}

/// `sup |u − g(d)|` over the grid nodes in the ball `window`, with `d` the
/// signed distance to the interface.
pub fn profile_deviation(
    field: &ScalarField,
    g: &Profile1D,
    interface: &Interface,
    window_center: &[f64],
    window_radius: f64,
) -> Result<f64> {
    let grid = field.grid();
    let n = grid.n();
    if window_center.len() != n {
        return Err(Error::Parameter("window centre has the wrong dimension".into()));
    }
    for (k, &c) in window_center.iter().enumerate() {
        let (lo, hi) = grid.extent(k);
        if c - window_radius < lo - 1e-9 || c + window_radius > hi + 1e-9 {
            return Err(Error::Precondition("window not inside the grid".into()));
        }
    }
    let u = field.values();
    Ok((0..grid.len())
        .into_par_iter()
        .filter_map(|i| {
            let x = &grid.coords(i)[..n];
            let r2: f64 = x.iter().zip(window_center).map(|(a, b)| (a - b).powi(2)).sum();
            (r2 <= window_radius * window_radius).then(|| (u[i] - g.g(interface.signed_distance(x))).abs())
        })
        .reduce(|| 0.0, f64::max))
}

/// `x_n = Σ (a_i/2) x_i² + b′·x′`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentQuadratic {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TangentQuadratic {
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.a)
            .zip(&self.b)
            .map(|((x, a), b)| 0.5 * a * x * x + b * x)
            .sum()
    }
}

/// Returns `R·Σa_i` for a quadratic touching the zero set from below at the
/// origin within the window `|x′| ≤ ε·l`: no crossing lies more than `h²`
/// below it, and some crossing with `|x′| ≤ 2h` lies within `h²` of it.
pub fn curvature_test(zs: &ZeroSet, quad: &TangentQuadratic, r: f64, eps: f64, l: f64) -> Result<f64> {
    let m = zs.n - 1;
    if zs.axis != zs.n - 1 {
        return Err(Error::Parameter("zero set must be extracted along the last axis".into()));
    }
    if quad.a.len() != m || quad.b.len() != m {
        return Err(Error::Parameter(format!("quadratic needs {m} curvatures and slopes")));
    }
    let mut violated = Vec::new();
    let bnorm = quad.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm > eps {
        violated.push(format!("|b'| = {bnorm} > ε = {eps}"));
    }
    let a_cap = 1.0 / (eps * eps * r);
    if let Some(a) = quad.a.iter().find(|a| a.abs() > a_cap) {
        violated.push(format!("|a_i| = {} > ε^-2 R^-1 = {a_cap}", a.abs()));
    }
    if eps < r.powf(-0.2) {
        violated.push(format!("ε = {eps} < R^(-1/5) = {}", r.powf(-0.2)));
    }
    if !violated.is_empty() {
        return Err(Error::Precondition(violated.join("; ")));
    }
    let h = zs.h;
    let window = eps * l;
    let mut min_gap: Option<f64> = None;
    let mut near_gap: Option<f64> = None;
    for col in &zs.columns {
        let xp = &col.base[..m];
        let rad = xp.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rad > window {
            continue;
        }
        let q = quad.eval(xp);
        for c in &col.crossings {
            let gap = zs.height(c) - q;
            min_gap = Some(min_gap.map_or(gap, |g| g.min(gap)));
            if rad <= 2.0 * h {
                near_gap = Some(near_gap.map_or(gap, |g: f64| if gap.abs() < g.abs() { gap } else { g }));
            }
        }
    }
    let min_gap = min_gap.ok_or_else(|| Error::Precondition("no zero-set points in the window".into()))?;
    let near_gap = near_gap.ok_or_else(|| Error::Precondition("no zero-set points near the origin".into()))?;
    if min_gap < -h * h || near_gap.abs() > h * h {
        return Err(Error::Precondition(format!(
            "quadratic does not touch from below at the origin (min gap {min_gap:e}, gap at origin {near_gap:e})"
        )));
    }
    Ok(r * quad.a.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::Grid;
    use crate::DoubleWellPotential;

    fn tanh_profile(t: f64) -> f64 {
        (t / 2f64.sqrt()).tanh()
    }

    fn field2(f: impl Fn(&[f64]) -> f64 + Sync) -> ScalarField {
        ScalarField::from_fn(Grid::centered_box(&[2.0, 2.0], 0.1).unwrap(), f).unwrap()
    }

    #[test]
    fn extract_examples() {
        let zs = extract(&field2(|x| tanh_profile(x[1])), 1).unwrap();
        assert!(!zs.single_signed);
        for p in zs.all_points() {
            assert!(p[1].abs() <= 0.01, "{p:?}");
        }
        let shifted = extract(&field2(|x| tanh_profile(x[1] - 0.3)), 1).unwrap();
        for p in shifted.all_points() {
            assert!((p[1] - 0.3).abs() <= 0.01);
        }
        let one = extract(&field2(|_| 1.0), 1).unwrap();
        assert!(one.single_signed && one.is_empty());
        assert!(matches!(flatness(&one, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn extract_is_shift_equivariant() {
        let a = field2(|x| tanh_profile(x[1] - 0.37 + 0.2 * x[0].sin()));
        let grid = a.grid().clone();
        let d = grid.dims()[1];
        // Translate the node values by 3 cells along x_n.
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let m = grid.multi_index(i);
                a.value(&[m[0], m[1].saturating_sub(3)])
            })
            .collect();
        let b = ScalarField::new(grid, values).unwrap();
        let (za, zb) = (extract(&a, 1).unwrap(), extract(&b, 1).unwrap());
        for (ca, cb) in za.columns.iter().zip(&zb.columns) {
            let moved: Vec<Crossing> = ca
                .crossings
                .iter()
                .filter(|c| c.cell + 3 < d - 1)
                .map(|c| Crossing { cell: c.cell + 3, frac: c.frac })
                .collect();
            assert_eq!(moved, cb.crossings);
        }
    }

    #[test]
    fn plane_fit_examples() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = i as f64 * 0.1 - 2.5;
                vec![x, 0.3 * x + 1.0]
            })
            .collect();
        let rep = fit_plane(&pts, None).unwrap();
        assert!(rep.theta <= 1e-12);
        assert_eq!(rep.fit_multiplicity, 1);
        let xi = [0.0, 1.0];
        let parab: Vec<Vec<f64>> = (-20..=20).map(|i| {
            let x = i as f64 * 0.1;
            vec![x, 0.05 * x * x]
        }).collect();
        let rep = fit_plane(&parab, Some(&xi)).unwrap();
        // Least-squares offset is the mean height.
        let mean = parab.iter().map(|p| p[1]).sum::<f64>() / parab.len() as f64;
        assert!((rep.theta - (0.2 - mean).max(mean)).abs() < 1e-12);
        let collinear: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 0.5]).collect();
        assert_eq!(fit_plane(&collinear, None).unwrap().fit_multiplicity, 2);
    }

    #[test]
    fn plane_fit_rigid_invariance() {
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let a = i as f64 * 0.37;
                let b = i as f64 * 0.11;
                vec![a.sin() * 3.0, b.cos() * 2.0, 0.02 * (a + b).sin()]
            })
            .collect();
        let base = fit_plane(&pts, None).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![c * p[0] - s * p[2] + 1.0, p[1] - 2.0, s * p[0] + c * p[2] + 0.5])
            .collect();
        let rep = fit_plane(&moved, None).unwrap();
        assert!((rep.theta - base.theta).abs() < 1e-9);
    }

    #[test]
    fn harnack_flat_case_degenerates() {
        let rep = harnack_check(&field2(|x| tanh_profile(x[1])), 2.0).unwrap();
        assert!(rep.hypothesis_met);
        assert!(rep.delta.is_none());
        let off = harnack_check(&field2(|x| tanh_profile(x[1] - 0.5)), 2.0).unwrap();
        assert!(!off.hypothesis_met);
    }

    #[test]
    fn cascade_on_a_line_stays_flat() {
        let rep = flatness_cascade(&field2(|x| tanh_profile(x[1] - 0.1 * x[0])), 1.6, 3).unwrap();
        assert_eq!(rep.levels.len(), 3);
        assert!(rep.ratios_nonincreasing && rep.hypothesis_met);
        for lv in &rep.levels {
            assert!(lv.theta < rep.noise_floor);
        }
        let tiny = flatness_cascade(&field2(|x| tanh_profile(x[1])), 1.6, 6).unwrap();
        assert!(tiny.partial.is_some());
    }

    #[test]
    fn deviation_examples() {
        let w = DoubleWellPotential::quartic();
        let g = Profile1D::new(&w).unwrap();
        let f = field2(|x| g.g(x[1]));
        let plane = Interface::Plane { normal: vec![0.0, 1.0], offset: 0.0 };
        assert_eq!(profile_deviation(&f, &g, &plane, &[0.0, 0.0], 1.5).unwrap(), 0.0);
        let off = Interface::Plane { normal: vec![0.0, 1.0], offset: 0.5 };
        let dev = profile_deviation(&f, &g, &off, &[0.0, 0.0], 1.5).unwrap();
        assert!(dev > 0.3, "{dev}");
        assert!(matches!(
            profile_deviation(&f, &g, &plane, &[1.5, 0.0], 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn curvature_examples() {
        let r = 32.0;
        let eps = 0.5;
        let fine = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| {
            let grid = Grid::centered_box(&[2.0, 1.0], 0.05).unwrap();
            extract(&ScalarField::from_fn(grid, |x| f(x)).unwrap(), 1).unwrap()
        };
        let flat = fine(&|x| tanh_profile(x[1]));
        let q0 = TangentQuadratic { a: vec![0.0], b: vec![0.0] };
        assert_eq!(curvature_test(&flat, &q0, r, eps, 4.0).unwrap(), 0.0);

        let circle = fine(&|x| tanh_profile((x[0] * x[0] + (x[1] + r).powi(2)).sqrt() - r));
        let qc = TangentQuadratic { a: vec![-1.0 / r], b: vec![0.0] };
        assert!((curvature_test(&circle, &qc, r, eps, 4.0).unwrap() + 1.0).abs() < 1e-12);

        let rt = 4.0;
        let bowl = fine(&|x| tanh_profile(x[1] - x[0] * x[0] / (2.0 * rt)));
        let qb = TangentQuadratic { a: vec![1.0 / rt], b: vec![0.0] };
        assert!(matches!(curvature_test(&bowl, &qb, r, eps, 4.0), Err(Error::Precondition(_))));
        let qb = TangentQuadratic { a: vec![0.05], b: vec![0.0] };
        let v = curvature_test(&fine(&|x| tanh_profile(x[1] - 0.025 * x[0] * x[0])), &qb, r, eps, 4.0).unwrap();
        assert!((v - 1.6).abs() < 1e-12);

        let steep = TangentQuadratic { a: vec![0.0], b: vec![0.9] };
        assert!(matches!(curvature_test(&flat, &steep, r, eps, 4.0), Err(Error::Precondition(_))));
        let off = TangentQuadratic { a: vec![0.0], b: vec![0.0] };
        let lifted = fine(&|x| tanh_profile(x[1] - 0.3));
        assert!(matches!(curvature_test(&lifted, &off, r, eps, 4.0), Err(Error::Precondition(_))));
    }
}
