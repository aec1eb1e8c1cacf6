//! Finite-difference minimization of `J(u) = ∫ ½|∇u|² + W(u)` on boxes in
//! two and three dimensions with Dirichlet data.
//!
//! The solver is an explicit Jacobi gradient flow
//! `u ← u + τ(Δ_h u − W′(u))`. The discrete energy [`energy`] weights each
//! grid edge and node with trapezoid factors; the interior weights are all 1,
//! so one sweep is exactly a step of size `τ` along `−∇J_h / hⁿ` and the energy
//! cannot increase for admissible `τ`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::acf1::Acf1;
use crate::error::{Error, Result};
use crate::potential::DoubleWellPotential;
use crate::profile1d::Profile1D;
use crate::quad::gk15;

pub const DEFAULT_NODE_CAP: usize = 20_000_000;

/// Uniform node grid; the last axis is `x_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dims: Vec<usize>,
    h: f64,
    origin: Vec<f64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, h: f64, origin: Vec<f64>) -> Result<Self> {
        Self::with_cap(dims, h, origin, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, h: f64, origin: Vec<f64>, cap: usize) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) {
            return Err(Error::Parameter(format!("grid dimension must be 2 or 3, got {}", dims.len())));
        }
        if origin.len() != dims.len() {
            return Err(Error::Parameter("origin and dims disagree in length".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parameter(format!("spacing must be positive, got {h}")));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 9) {
            return Err(Error::Parameter(format!("need at least 8 cells per axis, got {}", d.saturating_sub(1))));
        }
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        match count {
            Some(c) if c <= cap => Ok(Self { dims, h, origin }),
            _ => Err(Error::Parameter(format!("grid {dims:?} exceeds the node cap {cap}"))),
        }
    }

    /// The box `Π [−a_k, a_k]` with spacing `h`.
    pub fn centered_box(half_widths: &[f64], h: f64) -> Result<Self> {
        let dims: Vec<usize> = half_widths.iter().map(|&a| (2.0 * a / h).round() as usize + 1).collect();
        let origin = dims.iter().map(|&d| -0.5 * (d - 1) as f64 * h).collect();
        Self::new(dims, h, origin)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(lo, hi)` coordinates along an axis.
    pub fn extent(&self, axis: usize) -> (f64, f64) {
        let lo = self.origin[axis];
        (lo, lo + (self.dims[axis] - 1) as f64 * self.h)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.n()];
        for k in (0..self.n() - 1).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for k in (0..self.n()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        out
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for k in 0..self.n() {
            x[k] = self.origin[k] + m[k] as f64 * self.h;
        }
        x
    }

    pub fn on_face(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.n()).any(|k| m[k] == 0 || m[k] == self.dims[k] - 1)
    }

    /// Same nodes with coordinates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.dims.clone(),
            self.h * factor,
            self.origin.iter().map(|o| o * factor).collect(),
        )
    }
}

/// Dirichlet data built from the 1D profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundaryData {
    Constant(f64),
    /// `g(x_n − shift)`.
    Flat { shift: f64 },
    /// `g(x·ξ)` with `ξ` rotated from `e_n` towards `e_1` by `degrees`.
    Tilted { degrees: f64 },
    /// `g(x_n − A·sin(π x_1 / (2l)))`.
    Sine { amplitude: f64, half_width: f64 },
    /// `g(|x| − radius)`, positive outside.
    Sphere { radius: f64 },
}

impl BoundaryData {
    pub fn eval(&self, g: &Profile1D, x: &[f64]) -> f64 {
        let n = x.len();
        match *self {
            BoundaryData::Constant(v) => v,
            BoundaryData::Flat { shift } => g.g(x[n - 1] - shift),
            BoundaryData::Tilted { degrees } => {
                let a = degrees.to_radians();
                g.g(x[0] * a.sin() + x[n - 1] * a.cos())
            }
            BoundaryData::Sine { amplitude, half_width } => {
                let bump = amplitude * (std::f64::consts::PI * x[0] / (2.0 * half_width)).sin();
                g.g(x[n - 1] - bump)
            }
            BoundaryData::Sphere { radius } => g.g(x.iter().map(|v| v * v).sum::<f64>().sqrt() - radius),
        }
    }
}

/// Nodal phase values on a grid with a frozen (Dirichlet) mask that always
/// contains the outer faces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    frozen: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::Domain(format!("field value {v} outside [-1, 1]")));
        }
        let frozen = (0..grid.len()).map(|i| grid.on_face(i)).collect();
        Ok(Self { grid, values, frozen })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(grid: Grid, f: F) -> Result<Self> {
        let n = grid.n();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.coords(i)[..n]))
            .collect();
        Self::new(grid, values)
    }

    /// Boundary values and initial guess both taken from `data`.
    pub fn from_data(grid: Grid, data: BoundaryData, g: &Profile1D) -> Result<Self> {
        Self::from_fn(grid, |x| data.eval(g, x))
    }

    /// Boundary from `data`, interior from `init`.
    pub fn with_init<F: Fn(&[f64]) -> f64 + Sync>(
        grid: Grid,
        data: BoundaryData,
        g: &Profile1D,
        init: F,
    ) -> Result<Self> {
        Self::from_fn(grid.clone(), |x| {
            let idx = index_of(&grid, x);
            if grid.on_face(idx) {
                data.eval(g, x)
            } else {
                init(x)
            }
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn value(&self, multi: &[usize]) -> f64 {
        self.values[self.grid.index(multi)]
    }

    /// Freezes extra nodes (outer faces stay frozen).
    pub fn freeze_where<F: Fn(&[f64]) -> bool>(&mut self, pred: F) {
        let n = self.grid.n();
        for i in 0..self.grid.len() {
            if pred(&self.grid.coords(i)[..n]) {
                self.frozen[i] = true;
            }
        }
    }

    /// Same values on the grid scaled by `factor`: `u(·/factor)`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Ok(Self {
            grid: self.grid.scaled(factor)?,
            values: self.values.clone(),
            frozen: self.frozen.clone(),
        })
    }

    /// `max |u − f|` over all nodes.
    pub fn sup_distance<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> f64 {
        let n = self.grid.n();
        self.values
            .par_iter()
            .enumerate()
            .map(|(i, v)| (v - f(&self.grid.coords(i)[..n])).abs())
            .reduce(|| 0.0, f64::max)
    }

    pub fn write_acf1(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_acf1_bytes())?;
        Ok(())
    }

    pub fn to_acf1_bytes(&self) -> Vec<u8> {
        Acf1 {
            dims: self.grid.dims.clone(),
            h: self.grid.h,
            origin: self.grid.origin.clone(),
            values: self.values.clone(),
        }
        .encode()
    }

    pub fn read_acf1(path: &Path) -> Result<Self> {
        Self::from_acf1_bytes(&fs::read(path)?)
    }

    pub fn from_acf1_bytes(bytes: &[u8]) -> Result<Self> {
        let a = Acf1::decode(bytes)?;
        ScalarField::new(Grid::new(a.dims, a.h, a.origin)?, a.values)
    }
}

fn index_of(grid: &Grid, x: &[f64]) -> usize {
    let multi: Vec<usize> = x
        .iter()
        .zip(grid.origin())
        .map(|(xi, o)| ((xi - o) / grid.h()).round() as usize)
        .collect();
    grid.index(&multi)
}

/// Centred `(2n+1)`-point Laplacian; 0 on frozen nodes.
pub fn laplacian(field: &ScalarField) -> Vec<f64> {
    let grid = &field.grid;
    let strides = grid.strides();
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let u = &field.values;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if field.frozen[i] {
                return 0.0;
            }
            let mut s = 0.0;
            for &st in &strides {
                s += u[i + st] + u[i - st];
            }
            (s - 2.0 * strides.len() as f64 * u[i]) * inv_h2
        })
        .collect()
}

/// `max |Δ_h u − W′(u)|` over the free nodes.
pub fn residual(field: &ScalarField, w: &DoubleWellPotential) -> f64 {
    laplacian(field)
        .par_iter()
        .zip(field.values.par_iter())
        .zip(field.frozen.par_iter())
        .map(|((l, &u), &f)| if f { 0.0 } else { (l - w.dw(u)).abs() })
        .reduce(|| 0.0, f64::max)
}

/// Largest admissible step: `0.9 / (2n/h² + max|W″|)`.
pub fn stable_tau(grid: &Grid, w: &DoubleWellPotential) -> f64 {
    0.9 / (2.0 * grid.n() as f64 / (grid.h * grid.h) + w.max_abs_d2())
}

fn check_tau(grid: &Grid, w: &DoubleWellPotential, tau: f64) -> Result<()> {
    let bound = stable_tau(grid, w);
    if !(tau > 0.0 && tau <= bound * (1.0 + 1e-12)) {
        return Err(Error::Parameter(format!("step τ = {tau} violates 0 < τ ≤ {bound}")));
    }
    Ok(())
}

/// One Jacobi sweep from `field` into `out`. Returns the residual of the
/// input state and the number of clamp activations.
fn sweep(field: &ScalarField, w: &DoubleWellPotential, tau: f64, out: &mut [f64]) -> (f64, usize) {
    match field.grid.n() {
        2 => sweep_n::<2>(field, w, tau, out),
        _ => sweep_n::<3>(field, w, tau, out),
    }
}

fn sweep_n<const N: usize>(field: &ScalarField, w: &DoubleWellPotential, tau: f64, out: &mut [f64]) -> (f64, usize) {
    let grid = &field.grid;
    let mut strides = [0usize; N];
    strides.copy_from_slice(&grid.strides());
    let slab = strides[0];
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let two_n = 2.0 * N as f64;
    let u = &field.values;
    let frozen = &field.frozen;
    let parts: Vec<(f64, usize)> = out
        .par_chunks_mut(slab)
        .enumerate()
        .map(|(row, chunk)| {
            let base = row * slab;
            let mut res = 0.0f64;
            let mut clamps = 0;
            for (j, o) in chunk.iter_mut().enumerate() {
                let i = base + j;
                let ui = u[i];
                if frozen[i] {
                    *o = ui;
                    continue;
                }
                let mut s = 0.0;
                for st in strides {
                    s += u[i + st] + u[i - st];
                }
                let r = (s - two_n * ui) * inv_h2 - w.dw(ui);
                res = res.max(r.abs());
                let next = ui + tau * r;
                *o = if next > 1.0 {
                    clamps += 1;
                    1.0
                } else if next < -1.0 {
                    clamps += 1;
                    -1.0
                } else {
                    next
                };
            }
            (res, clamps)
        })
        .collect();
    parts
        .into_iter()
        .fold((0.0, 0), |(r, c), (pr, pc)| (r.max(pr), c + pc))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxReport {
    /// Residual of the state entering each sweep.
    pub residuals: Vec<f64>,
    pub clamp_activations: usize,
    pub late_clamp_activations: usize,
}

/// `sweeps` explicit steps; boundary nodes are untouched.
pub fn relax(field: &mut ScalarField, w: &DoubleWellPotential, tau: f64, sweeps: usize) -> Result<RelaxReport> {
    check_tau(&field.grid, w, tau)?;
    let mut buf = field.values.clone();
    let mut report = RelaxReport {
        residuals: Vec::with_capacity(sweeps),
        clamp_activations: 0,
        late_clamp_activations: 0,
    };
    for k in 0..sweeps {
        let (res, clamps) = sweep(field, w, tau, &mut buf);
        std::mem::swap(&mut field.values, &mut buf);
        report.residuals.push(res);
        report.clamp_activations += clamps;
        if k >= 10 {
            report.late_clamp_activations += clamps;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to [`stable_tau`].
    pub tau: Option<f64>,
    pub max_sweeps: usize,
    pub record_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            tau: None,
            max_sweeps: 1_000_000,
            record_every: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimization {
    pub field: ScalarField,
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
    pub tau: f64,
    /// `(sweep, J_h)` every `record_every` sweeps, starting at 0.
    pub energy_history: Vec<(usize, f64)>,
    pub residual_history: Vec<f64>,
    pub clamp_activations: usize,
    pub late_clamp_activations: usize,
}

impl Minimization {
    pub fn energy_nonincreasing(&self) -> bool {
        self.energy_history.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-12)
    }
}

/// Relaxes `field` (which carries boundary data and initial guess) until the
/// residual drops to `tol`.
pub fn minimize(mut field: ScalarField, w: &DoubleWellPotential, opts: &SolverOptions) -> Result<Minimization> {
    let tau = opts.tau.unwrap_or_else(|| stable_tau(&field.grid, w));
    check_tau(&field.grid, w, tau)?;
    if !(opts.tol > 0.0) || opts.record_every == 0 {
        return Err(Error::Parameter("tolerance and recording interval must be positive".into()));
    }
    let mut buf = field.values.clone();
    let mut energy_history = vec![(0, discrete_energy(&field, w))];
    let mut residual_history = Vec::new();
    let (mut clamps, mut late) = (0, 0);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let (res, c) = sweep(&field, w, tau, &mut buf);
        residual_history.push(res);
        if res <= opts.tol {
            converged = true;
            break;
        }
        std::mem::swap(&mut field.values, &mut buf);
        sweeps += 1;
        clamps += c;
        if sweeps > 10 {
            late += c;
        }
        if sweeps % opts.record_every == 0 {
            let e = discrete_energy(&field, w);
            let prev = energy_history.last().expect("initial energy").1;
            if e > prev + 1e-12 {
                return Err(Error::Invariant(format!(
                    "energy increased from {prev} to {e} at sweep {sweeps}"
                )));
            }
            energy_history.push((sweeps, e));
        }
    }
    let final_res = if converged {
        *residual_history.last().expect("at least one sweep")
    } else {
        residual(&field, w)
    };
    if !converged && final_res > 10.0 * opts.tol {
        return Err(Error::NonConvergence {
            sweeps,
            residual: final_res,
            tol: opts.tol,
        });
    }
    Ok(Minimization {
        field,
        sweeps,
        residual: final_res,
        converged: converged || final_res <= opts.tol,
        tau,
        energy_history,
        residual_history,
        clamp_activations: clamps,
        late_clamp_activations: late,
    })
}

/// Axis-aligned box `Π [lo_k, hi_k]` in grid coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub total: f64,
    pub gradient: f64,
    pub potential: f64,
    pub epsilon: f64,
}

/// Discrete `J_h` over the whole grid (`ε = 1`).
pub fn discrete_energy(field: &ScalarField, w: &DoubleWellPotential) -> f64 {
    energy(field, w, None, 1.0).expect("whole grid is a valid region").total
}

/// `J_ε = ∫_A (ε/2)|∇u|² + W(u)/ε` with forward differences per edge and
/// trapezoid weights relative to the region `A` (the whole grid if `None`).
pub fn energy(field: &ScalarField, w: &DoubleWellPotential, region: Option<&Region>, eps: f64) -> Result<EnergyReport> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("ε must be positive, got {eps}")));
    }
    let grid = &field.grid;
    let n = grid.n();
    let mut lo_idx = vec![0usize; n];
    let mut hi_idx: Vec<usize> = grid.dims.iter().map(|d| d - 1).collect();
    if let Some(r) = region {
        if r.lo.len() != n || r.hi.len() != n {
            return Err(Error::Domain("region dimension does not match grid".into()));
        }
        for k in 0..n {
            let (glo, ghi) = grid.extent(k);
            let slack = 1e-9 * grid.h;
            if r.lo[k] < glo - slack || r.hi[k] > ghi + slack || r.lo[k] >= r.hi[k] {
                return Err(Error::Domain(format!(
                    "region [{}, {}] on axis {k} not inside grid [{glo}, {ghi}]",
                    r.lo[k], r.hi[k]
                )));
            }
            lo_idx[k] = ((r.lo[k] - grid.origin[k]) / grid.h - 1e-9).ceil().max(0.0) as usize;
            hi_idx[k] = (((r.hi[k] - grid.origin[k]) / grid.h + 1e-9).floor() as usize).min(grid.dims[k] - 1);
            if hi_idx[k] <= lo_idx[k] {
                return Err(Error::Domain(format!("region has no cells along axis {k}")));
            }
        }
    }
    let strides = grid.strides();
    let h = grid.h;
    let cell = h.powi(n as i32);
    let u = &field.values;
    let weight = |k: usize, i: usize| if i == lo_idx[k] || i == hi_idx[k] { 0.5 } else { 1.0 };
    let parts: Vec<(f64, f64)> = (lo_idx[0]..=hi_idx[0])
        .into_par_iter()
        .map(|i0| {
            let mut grad = 0.0;
            let mut pot = 0.0;
            let mut m = [i0, lo_idx[1], if n == 3 { lo_idx[2] } else { 0 }];
            loop {
                let idx = grid.index(&m[..n]);
                let mut wts = [1.0; 3];
                for k in 0..n {
                    wts[k] = weight(k, m[k]);
                }
                let node_w = wts[0] * wts[1] * wts[2];
                pot += node_w * w.w(u[idx]);
                for k in 0..n {
                    if m[k] < hi_idx[k] {
                        let edge_w = node_w / wts[k];
                        let d = (u[idx + strides[k]] - u[idx]) / h;
                        grad += 0.5 * edge_w * d * d;
                    }
                }
                // Advance over axes 1..n.
                let mut k = n - 1;
                loop {
                    if k == 0 {
                        return (grad, pot);
                    }
                    if m[k] < hi_idx[k] {
                        m[k] += 1;
                        break;
                    }
                    m[k] = lo_idx[k];
                    k -= 1;
                }
            }
        })
        .collect();
    let (grad, pot) = parts.into_iter().fold((0.0, 0.0), |(a, b), (g, p)| (a + g, b + p));
    let gradient = eps * grad * cell;
    let potential = pot * cell / eps;
    Ok(EnergyReport {
        total: gradient + potential,
        gradient,
        potential,
        epsilon: eps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnReport {
    pub min_slack: f64,
    /// Transverse index of the worst column.
    pub min_column: Vec<usize>,
    /// One slack per column, row-major over the transverse axes.
    pub slacks: Vec<f64>,
}

/// For each column along `x_n`, `∫ ½(∂_n u)² + W(u) dx_n − |Φ(u_top) − Φ(u_bottom)|`
/// with the integral taken exactly over the piecewise-linear interpolant.
pub fn column_bound_check(field: &ScalarField, w: &DoubleWellPotential) -> ColumnReport {
    let grid = &field.grid;
    let n = grid.n();
    let len_n = grid.dims[n - 1];
    let h = grid.h;
    let columns = grid.len() / len_n;
    let slacks: Vec<f64> = (0..columns)
        .into_par_iter()
        .map(|c| {
            let col = &field.values[c * len_n..(c + 1) * len_n];
            let mut total = 0.0;
            for e in col.windows(2) {
                let (a, b) = (e[0], e[1]);
                let d = b - a;
                total += 0.5 * d * d / h;
                total += h * gk15(&|th: f64| w.w(a + th * d), 0.0, 1.0).0;
            }
            let bound = (w.modica_primitive(col[len_n - 1]) - w.modica_primitive(col[0])).abs();
            total - bound
        })
        .collect();
    let (ci, &min_slack) = slacks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite slack"))
        .expect("at least one column");
    let transverse = &grid.dims[..n - 1];
    let mut rem = ci;
    let mut min_column = vec![0; n - 1];
    for k in (0..n - 1).rev() {
        min_column[k] = rem % transverse[k];
        rem /= transverse[k];
    }
    ColumnReport {
        min_slack,
        min_column,
        slacks,
    }
}

/// `J_ε(field, whole grid) − σ_W · area`, with `field` given in the
/// coordinates where its transition layer has width `ε`.
pub fn modica_gap(field: &ScalarField, w: &DoubleWellPotential, eps: f64, interface_area: f64) -> Result<f64> {
    Ok(energy(field, w, None, eps)?.total - w.modica_constant() * interface_area)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> DoubleWellPotential {
        DoubleWellPotential::quartic()
    }

    fn tanh_profile(t: f64) -> f64 {
        (t / 2f64.sqrt()).tanh()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![9, 9], 0.1, vec![0.0, 0.0]).is_ok());
        assert!(matches!(Grid::new(vec![8, 9], 0.1, vec![0.0, 0.0]), Err(Error::Parameter(_))));
        assert!(matches!(Grid::new(vec![9, 9, 9, 9], 0.1, vec![0.0; 4]), Err(Error::Parameter(_))));
        assert!(matches!(Grid::new(vec![9, 9], 0.0, vec![0.0, 0.0]), Err(Error::Parameter(_))));
        assert!(matches!(Grid::with_cap(vec![100, 100], 0.1, vec![0.0, 0.0], 5000), Err(Error::Parameter(_))));
        let g = Grid::centered_box(&[1.0, 2.0], 0.1).unwrap();
        assert_eq!(g.dims(), &[21, 41]);
        assert_eq!(g.extent(1), (-2.0, 2.0));
        let i = g.index(&[3, 7]);
        assert_eq!(&g.multi_index(i)[..2], &[3, 7]);
    }

    #[test]
    fn laplacian_examples() {
        let grid = Grid::centered_box(&[1.0, 1.0], 0.1).unwrap();
        let c = ScalarField::from_fn(grid.clone(), |_| 0.3).unwrap();
        assert!(laplacian(&c).iter().all(|&v| v == 0.0));
        let q = ScalarField::from_fn(grid, |x| x[0] * x[0]).unwrap();
        let lap = laplacian(&q);
        for (i, v) in lap.iter().enumerate() {
            if q.frozen()[i] {
                assert_eq!(*v, 0.0);
            } else {
                assert!((v - 2.0).abs() < 1e-9, "{v}");
            }
        }
    }

    #[test]
    fn residual_is_second_order() {
        let w = quartic();
        let res = |h: f64| {
            let grid = Grid::centered_box(&[1.0, 4.0], h).unwrap();
            let f = ScalarField::from_fn(grid, |x| tanh_profile(x[1])).unwrap();
            residual(&f, &w)
        };
        let ratio = res(0.1) / res(0.05);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn tau_precondition() {
        let w = quartic();
        let grid = Grid::centered_box(&[1.0, 1.0], 0.1).unwrap();
        let mut f = ScalarField::from_fn(grid.clone(), |_| 0.0).unwrap();
        let bound = stable_tau(&grid, &w);
        assert!((bound - 0.9 / 402.0).abs() < 1e-15);
        assert!(matches!(relax(&mut f, &w, 1.1 * bound, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn wells_are_fixed_points() {
        let w = quartic();
        let g = Profile1D::new(&w).unwrap();
        let grid = Grid::centered_box(&[1.0, 1.0], 0.1).unwrap();
        let f = ScalarField::from_data(grid, BoundaryData::Constant(1.0), &g).unwrap();
        let m = minimize(f, &w, &SolverOptions::default()).unwrap();
        assert!(m.field.values().iter().all(|&v| v == 1.0));
        assert_eq!(m.sweeps, 0);
        assert_eq!(energy(&m.field, &w, None, 1.0).unwrap().total, 0.0);
    }

    #[test]
    fn sweep_is_gradient_step() {
        // J_h(u − τ∇) decreases and the directional derivative matches.
        let w = quartic();
        let grid = Grid::centered_box(&[0.5, 0.5, 0.5], 0.1).unwrap();
        let f = ScalarField::from_fn(grid.clone(), |x| 0.5 * (3.0 * x[0] + x[1] * x[2]).sin()).unwrap();
        let lap = laplacian(&f);
        let dir: Vec<f64> = (0..grid.len())
            .map(|i| if f.frozen()[i] { 0.0 } else { lap[i] - w.dw(f.values()[i]) })
            .collect();
        let eps = 1e-6;
        let shifted = |s: f64| {
            let v: Vec<f64> = f.values().iter().zip(&dir).map(|(u, d)| u + s * d).collect();
            discrete_energy(&ScalarField::new(grid.clone(), v).unwrap(), &w)
        };
        let numeric = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let exact: f64 = -dir.iter().map(|d| d * d).sum::<f64>() * grid.h().powi(3);
        assert!((numeric - exact).abs() < 1e-6 * exact.abs(), "{numeric} {exact}");
    }

    #[test]
    fn comparison_preserved_small() {
        let w = quartic();
        let grid = Grid::centered_box(&[1.6, 1.6], 0.1).unwrap();
        let lo = ScalarField::from_fn(grid.clone(), |x| 0.8 * (x[0] * 2.0 + x[1]).sin() - 0.1).unwrap();
        let hi = ScalarField::from_fn(grid.clone(), |x| (0.8 * (x[0] * 2.0 + x[1]).sin() + 0.05 + 0.1 * x[1].cos()).min(1.0)).unwrap();
        let (mut a, mut b) = (lo, hi);
        let tau = stable_tau(&grid, &w);
        relax(&mut a, &w, tau, 200).unwrap();
        relax(&mut b, &w, tau, 200).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x <= y));
    }

    #[test]
    fn energy_rescaling_identity() {
        let w = quartic();
        let grid = Grid::centered_box(&[2.0, 2.0], 0.1).unwrap();
        let f = ScalarField::from_fn(grid, |x| tanh_profile(x[1] + 0.2 * x[0])).unwrap();
        let eps = 0.25;
        let scaled = f.rescaled(eps).unwrap();
        let a = energy(&scaled, &w, Some(&Region { lo: vec![-0.25, -0.25], hi: vec![0.25, 0.5] }), eps).unwrap();
        let b = energy(&f, &w, Some(&Region { lo: vec![-1.0, -1.0], hi: vec![1.0, 2.0] }), 1.0).unwrap();
        assert!((a.total - eps * b.total).abs() < 1e-12 * b.total);
        assert!(matches!(
            energy(&f, &w, Some(&Region { lo: vec![-3.0, 0.0], hi: vec![0.0, 1.0] }), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn column_slack_examples() {
        let w = quartic();
        let grid = Grid::centered_box(&[0.5, 6.0], 0.05).unwrap();
        let zero = ScalarField::from_fn(grid.clone(), |_| 0.0).unwrap();
        let rep = column_bound_check(&zero, &w);
        assert!((rep.min_slack - 12.0 * 0.25).abs() < 1e-12);
        let prof = ScalarField::from_fn(grid, |x| tanh_profile(x[1])).unwrap();
        let rep = column_bound_check(&prof, &w);
        assert!(rep.min_slack >= 0.0 && rep.min_slack < 1e-3, "{}", rep.min_slack);
    }

    #[test]
    fn acf1_roundtrip_and_errors() {
        let grid = Grid::new(vec![9, 10], 0.125, vec![-0.5, 1.0]).unwrap();
        let f = ScalarField::from_fn(grid, |x| (x[0] * x[1]).tanh()).unwrap();
        let bytes = f.to_acf1_bytes();
        assert!(bytes.starts_with(b"ACF1 n=2 dims=9,10 h=0.125 origin=-0.5,1\n"));
        assert_eq!(ScalarField::from_acf1_bytes(&bytes).unwrap(), f);
        assert!(matches!(ScalarField::from_acf1_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        assert!(matches!(ScalarField::from_acf1_bytes(b"ACF2 n=2\n"), Err(Error::Format(_))));
    }
}
