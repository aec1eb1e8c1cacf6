use acflat::barriers::{check_rho_ordering, BarrierProfile, Variant, OUTSIDE_TOL};
use acflat::elliptic::{self, BoundaryData, Grid, Region, ScalarField, SolverOptions};
use acflat::levelset::{self, Interface};
use acflat::{DoubleWellPotential, Profile1D};

use crate::summary::{CheckKind, Run};
use crate::CliError;

/// Sup ODE residual accepted for the profile.
const ODE_TOL: f64 = 1e-5;
/// Column-bound slack accepted on converged fields.
const COLUMN_TOL: f64 = -1e-8;

fn potential(run: &mut Run) -> Result<DoubleWellPotential, CliError> {
    let spec = run.cfg().text("potential")?;
    let w = DoubleWellPotential::from_spec(&spec)?;
    let report = w.validate();
    run.check("potential_hypotheses", CheckKind::Hypothesis, report.passed());
    run.detail("potential_validation", &report);
    if !report.passed() {
        return Err(CliError::Hypothesis(format!(
            "potential fails {}",
            report.failures().join(", ")
        )));
    }
    Ok(w)
}

pub fn profile(run: &mut Run) -> Result<(), CliError> {
    let w = potential(run)?;
    let (t0, t1) = (run.cfg().f64("profile.t_min")?, run.cfg().f64("profile.t_max")?);
    let steps = run.cfg().usize("profile.steps")?;
    if t0 >= t1 {
        return Err(CliError::config("out_of_range", "profile.t_min must be below profile.t_max"));
    }
    let g = Profile1D::new(&w)?;
    let ode = g.verify_ode()?;
    run.measure("sup_ode_residual", ode.sup_residual);
    run.measure("equipartition_gap", ode.sup_equipartition_gap);
    run.measure("modica_constant", w.modica_constant());
    run.measure("max_w", w.max_on_interval());
    run.measure("k_minus", w.k_minus());
    run.measure("k_plus", w.k_plus());
    run.check("ode_residual", CheckKind::Invariant, ode.sup_residual <= ODE_TOL);
    run.detail("ode", &ode);
    let rows = g.sample_rows(t0, t1, steps);
    run.write_csv(".csv", &["t", "g", "dg", "residual"], &rows)
}

fn variant(s: &str) -> Result<Variant, CliError> {
    Ok(s.parse::<Variant>()?)
}

pub fn barrier(run: &mut Run) -> Result<(), CliError> {
    let w = potential(run)?;
    let cfg = run.cfg().clone();
    let r = cfg.f64("barrier.R")?;
    let n = cfg.usize("barrier.n")?;
    let v = variant(&cfg.text("barrier.variant")?)?;
    let (t0, t1) = (cfg.f64("barrier.t_min")?, cfg.f64("barrier.t_max")?);
    if t0 >= t1 {
        return Err(CliError::config("out_of_range", "barrier.t_min must be below barrier.t_max"));
    }
    let b = BarrierProfile::build(&w, r, n, v)?;
    let iq = b.inequality();
    let (lo, hi) = b.breakpoints();
    run.measure("C_star", iq.c_star);
    run.measure("outside_sup", iq.outside_sup);
    run.measure("breakpoint_lo", lo);
    run.measure("breakpoint_hi", hi);
    run.check("inequality_outside_glue", CheckKind::Invariant, iq.outside_ok());
    if v == Variant::G {
        let g = Profile1D::new(&w)?;
        let cmp = b.compare_to_g(&g)?;
        run.measure("scaled_sup", cmp.scaled_sup);
        run.measure_opt("min_difference", cmp.min_difference);
        run.check(
            "ordering_above_g",
            CheckKind::Invariant,
            cmp.min_difference.is_none_or(|m| m >= -1e-12),
        );
        run.detail("comparison", &cmp);
    }
    run.detail("constants", &b.constants());
    run.detail("inequality", &iq);
    let steps = cfg.usize("barrier.steps")?;
    run.write_csv(
        "_inequality.csv",
        &["s", "h", "W", "lhs_minus_dW", "lhs_minus_rhs"],
        &b.speed().inequality_rows(),
    )?;
    run.write_csv("_profile.csv", &["t", "value", "derivative"], &b.profile_rows(t0, t1, steps))
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        hi / lo
    } else if hi <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

pub fn verify_barrier(run: &mut Run) -> Result<(), CliError> {
    let w = potential(run)?;
    let cfg = run.cfg().clone();
    let radii = cfg.f64_list("barrier.R")?;
    let dims = cfg.usize_list("barrier.n")?;
    let variants = cfg
        .text_list("barrier.variant")?
        .iter()
        .map(|s| variant(s))
        .collect::<Result<Vec<_>, _>>()?;
    let g = Profile1D::new(&w)?;
    let mut rows = Vec::new();
    let mut outside_ok = true;
    let mut ordering_ok = true;
    let mut worst_c_ratio: f64 = 1.0;
    let mut worst_scaled_ratio: f64 = 1.0;
    for &v in &variants {
        for &n in &dims {
            let mut c_stars = Vec::new();
            let mut scaled = Vec::new();
            for &r in &radii {
                let b = BarrierProfile::build(&w, r, n, v)?;
                let iq = b.inequality();
                outside_ok &= iq.outside_sup <= OUTSIDE_TOL;
                c_stars.push(iq.c_star);
                let (mut sc, mut md) = (f64::NAN, f64::NAN);
                if v == Variant::G {
                    let cmp = b.compare_to_g(&g)?;
                    sc = cmp.scaled_sup;
                    md = cmp.min_difference.unwrap_or(f64::NAN);
                    ordering_ok &= cmp.min_difference.is_none_or(|m| m >= -1e-12);
                    scaled.push(sc);
                }
                let (lo, hi) = b.breakpoints();
                rows.push(vec![
                    v.to_string(),
                    n.to_string(),
                    fmt(r),
                    fmt(iq.outside_sup),
                    fmt(iq.c_star),
                    fmt(sc),
                    fmt(md),
                    fmt(lo),
                    fmt(hi),
                ]);
            }
            let cr = spread(&c_stars);
            run.measure(format!("C_star_max.{v}.n{n}"), c_stars.iter().cloned().fold(0.0, f64::max));
            run.measure(format!("C_star_ratio.{v}.n{n}"), cr);
            worst_c_ratio = worst_c_ratio.max(cr);
            if !scaled.is_empty() {
                let sr = spread(&scaled);
                run.measure(format!("scaled_sup_ratio.{v}.n{n}"), sr);
                worst_scaled_ratio = worst_scaled_ratio.max(sr);
            }
        }
    }
    run.measure("C_star_ratio_worst", worst_c_ratio);
    run.measure("scaled_sup_ratio_worst", worst_scaled_ratio);
    run.check("inequality_outside_glue", CheckKind::Invariant, outside_ok);
    run.check("C_star_uniform_in_R", CheckKind::Invariant, worst_c_ratio <= 2.0);
    run.check("ordering_above_g", CheckKind::Invariant, ordering_ok);
    run.check("scaled_sup_uniform_in_R", CheckKind::Invariant, worst_scaled_ratio <= 2.0);

    let mut rho_ok = true;
    let mut orderings = Vec::new();
    for &on in &cfg.usize_list("ordering.n")? {
        for &r in &radii {
            let rho = BarrierProfile::build(&w, r, on, Variant::Rho)?;
            for q in [r, (4.0 * r).powf(2.5)] {
                let gq = BarrierProfile::build(&w, q, on, Variant::G)?;
                let o = check_rho_ordering(&rho, &gq)?;
                rho_ok &= o.holds;
                orderings.push(serde_json::json!({ "n": on, "report": o }));
            }
        }
    }
    let worst_margin = orderings
        .iter()
        .filter_map(|o| o["report"]["worst_margin"].as_f64())
        .fold(f64::INFINITY, f64::min);
    run.measure("rho_ordering_worst_margin", worst_margin);
    run.check("rho_below_shifted_g", CheckKind::Invariant, rho_ok);
    run.detail("rho_ordering", &orderings);

    let step = cfg.f64("radial.step")?;
    let mut radial = Vec::new();
    let mut radial_ok = true;
    for &n in &cfg.usize_list("radial.dimensions")? {
        for &r in &cfg.f64_list("radial.radii")? {
            let b = BarrierProfile::build(&w, r, n, Variant::G)?;
            let count = (1.5 * r / step).round() as usize;
            let grid: Vec<f64> = (0..=count).map(|i| 0.5 * r + step * i as f64).collect();
            let rep = b.radial_residual(&grid)?;
            radial_ok &= rep.annulus_sup <= rep.c_star_bound + 1e-6 && rep.outside_sup <= 1e-8;
            run.measure(format!("radial_annulus_sup.n{n}.R{r}"), rep.annulus_sup);
            radial.push(rep);
        }
    }
    run.check("radial_supersolution", CheckKind::Invariant, radial_ok);
    run.detail("radial", &radial);
    run.write_text_csv(
        ".csv",
        &["variant", "n", "R", "outside_sup", "C_star", "scaled_sup", "min_difference", "breakpoint_lo", "breakpoint_hi"],
        &rows,
    )
}

fn fmt(v: f64) -> String {
    crate::summary::fmt_num(v)
}

fn boundary(run: &Run, half: &[f64]) -> Result<(BoundaryData, Option<Interface>), CliError> {
    let cfg = run.cfg();
    let n = half.len();
    let unit = |k: usize| (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    Ok(match cfg.text("boundary.kind")?.as_str() {
        "flat" => {
            let shift = cfg.f64("boundary.shift")?;
            (
                BoundaryData::Flat { shift },
                Some(Interface::Plane { normal: unit(n - 1), offset: shift }),
            )
        }
        "tilt" => {
            let degrees = cfg.f64("boundary.degrees")?;
            let a = degrees.to_radians();
            let mut normal = unit(n - 1);
            normal[n - 1] = a.cos();
            normal[0] = a.sin();
            (BoundaryData::Tilted { degrees }, Some(Interface::Plane { normal, offset: 0.0 }))
        }
        "sine" => (
            BoundaryData::Sine {
                amplitude: cfg.f64("boundary.amplitude")?,
                half_width: half[0],
            },
            None,
        ),
        "sphere" => {
            let radius = cfg.f64("boundary.radius")?;
            (
                BoundaryData::Sphere { radius },
                Some(Interface::Sphere { center: vec![0.0; n], radius }),
            )
        }
        _ => (BoundaryData::Constant(cfg.f64("boundary.value")?), None),
    })
}

pub fn minimize(run: &mut Run) -> Result<(), CliError> {
    let w = potential(run)?;
    let cfg = run.cfg().clone();
    let n = cfg.usize("grid.n")?;
    let mut half = cfg.f64_list("grid.half_width")?;
    if half.len() == 1 {
        half = vec![half[0]; n];
    }
    if half.len() != n {
        return Err(CliError::config("out_of_range", format!("grid.half_width needs 1 or {n} entries")));
    }
    let h = cfg.f64("grid.h")?;
    let cap = cfg.usize("grid.max_nodes")?;
    let dims: Vec<usize> = half.iter().map(|l| (2.0 * l / h).round() as usize + 1).collect();
    let origin: Vec<f64> = half.iter().map(|l| -l).collect();
    let grid = Grid::with_cap(dims, h, origin, cap)?;
    let (data, interface) = boundary(run, &half)?;
    let g = Profile1D::new(&w)?;
    let field = ScalarField::from_data(grid, data, &g)?;
    let opts = SolverOptions {
        tol: cfg.f64("solver.tol")?,
        tau: cfg.opt_f64("solver.tau"),
        max_sweeps: cfg.usize("solver.max_sweeps")?,
        record_every: cfg.usize("solver.record_every")?,
    };
    let m = match elliptic::minimize(field, &w, &opts) {
        Ok(m) => m,
        Err(acflat::Error::NonConvergence { sweeps, residual, .. }) => {
            run.measure("sweeps", sweeps as f64);
            run.measure("residual", residual);
            run.check("converged", CheckKind::Convergence, false);
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    run.measure("sweeps", m.sweeps as f64);
    run.measure("residual", m.residual);
    run.measure("tau", m.tau);
    run.measure("clamp_activations", m.clamp_activations as f64);
    run.measure("late_clamp_activations", m.late_clamp_activations as f64);
    run.check("converged", CheckKind::Convergence, m.converged);
    run.check("energy_nonincreasing", CheckKind::Invariant, m.energy_nonincreasing());
    run.check("no_late_clamps", CheckKind::Invariant, m.late_clamp_activations == 0);
    let e = elliptic::energy(&m.field, &w, None, 1.0)?;
    run.measure("energy", e.total);
    run.detail("energy", &e);
    if m.converged {
        let col = elliptic::column_bound_check(&m.field, &w);
        run.measure("column_min_slack", col.min_slack);
        run.check("column_bound", CheckKind::Invariant, col.min_slack >= COLUMN_TOL);
    }
    if let Some(iface) = interface {
        let min_half = half.iter().cloned().fold(f64::INFINITY, f64::min);
        let window = cfg.opt_f64("check.window").unwrap_or(0.5 * min_half);
        let dev = levelset::profile_deviation(&m.field, &g, &iface, &vec![0.0; n], window)?;
        run.measure("profile_deviation", dev);
    }
    run.write_bytes(".acf1", &m.field.to_acf1_bytes())?;
    let rows: Vec<[f64; 2]> = m.energy_history.iter().map(|&(s, e)| [s as f64, e]).collect();
    run.write_csv("_energy.csv", &["sweep", "energy"], &rows)
}

fn read_field(run: &mut Run) -> Result<ScalarField, CliError> {
    let bytes = run.read_input("input.field")?;
    Ok(ScalarField::from_acf1_bytes(&bytes)?)
}

pub fn flatness(run: &mut Run) -> Result<(), CliError> {
    let field = read_field(run)?;
    let n = field.grid().n();
    let zs = levelset::extract(&field, n - 1)?;
    let xi = run.cfg().opt_f64_list("flatness.xi");
    if xi.as_ref().is_some_and(|x| x.len() != n) {
        return Err(CliError::config("out_of_range", format!("flatness.xi needs {n} entries")));
    }
    let rep = levelset::flatness(&zs, xi.as_deref())?;
    run.measure("theta", rep.theta);
    run.measure("radius", rep.radius);
    run.detail("flatness", &rep);
    if let Some(l) = run.cfg().opt_f64("harnack.l") {
        let hr = levelset::harnack_check(&field, l)?;
        let min_delta = run.cfg().f64("harnack.min_delta")?;
        run.check("harnack_hypothesis", CheckKind::Hypothesis, hr.hypothesis_met);
        run.measure("harnack_theta", hr.theta);
        run.measure("harnack_theta_half", hr.theta_half);
        run.measure_opt("delta_hat", hr.delta);
        if hr.hypothesis_met {
            run.check("delta_hat", CheckKind::Invariant, hr.delta.is_some_and(|d| d >= min_delta));
        }
        run.detail("harnack", &hr);
    }
    let points = zs.primary_points(0.0);
    let header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write_csv("_points.csv", &header, &points)
}

pub fn cascade(run: &mut Run) -> Result<(), CliError> {
    let field = read_field(run)?;
    let l0 = run.cfg().f64("cascade.l0")?;
    let levels = run.cfg().usize("cascade.levels")?;
    let rep = levelset::flatness_cascade(&field, l0, levels)?;
    run.check("cascade_hypothesis", CheckKind::Hypothesis, rep.hypothesis_met);
    if rep.hypothesis_met {
        run.check("ratios_nonincreasing", CheckKind::Invariant, rep.ratios_nonincreasing);
    }
    run.measure("levels", rep.levels.len() as f64);
    run.measure("noise_floor", rep.noise_floor);
    if let Some(last) = rep.levels.last() {
        run.measure("theta_last", last.theta);
    }
    let eta1: Vec<f64> = rep.levels.iter().filter_map(|l| l.eta1).collect();
    if !eta1.is_empty() {
        run.measure("eta1_max", eta1.iter().cloned().fold(0.0, f64::max));
    }
    let rows: Vec<[f64; 6]> = rep
        .levels
        .iter()
        .enumerate()
        .map(|(k, l)| [k as f64, l.l, l.theta, l.theta / l.l, l.eta1.unwrap_or(f64::NAN), l.eta2.unwrap_or(f64::NAN)])
        .collect();
    run.detail("cascade", &rep);
    run.write_csv(".csv", &["k", "l", "theta", "theta_over_l", "eta1", "eta2"], &rows)
}

pub fn energy(run: &mut Run) -> Result<(), CliError> {
    let w = potential(run)?;
    let field = read_field(run)?;
    let cfg = run.cfg().clone();
    let eps = cfg.f64("energy.eps")?;
    let region = match (cfg.opt_f64_list("energy.lo"), cfg.opt_f64_list("energy.hi")) {
        (Some(lo), Some(hi)) => Some(Region { lo, hi }),
        (None, None) => None,
        _ => return Err(CliError::config("missing_key", "energy.lo and energy.hi go together")),
    };
    let rep = elliptic::energy(&field, &w, region.as_ref(), eps)?;
    run.measure("energy", rep.total);
    run.measure("gradient_part", rep.gradient);
    run.measure("potential_part", rep.potential);
    run.detail("energy", &rep);
    if let Some(area) = cfg.opt_f64("energy.area") {
        let sigma = w.modica_constant();
        run.measure("modica_constant", sigma);
        run.measure("modica_gap", rep.total - sigma * area);
        run.measure("modica_relative_gap", (rep.total - sigma * area) / (sigma * area));
    }
    // Not a check: the input need not be a minimizer.
    let col = elliptic::column_bound_check(&field, &w);
    run.measure("column_min_slack", col.min_slack);
    Ok(())
}
