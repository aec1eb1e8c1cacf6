//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use acflat::barriers::{check_rho_ordering, BarrierProfile, Variant, OUTSIDE_TOL};
use acflat::contact::{
    abp_check, covering_iteration, opposite_side_measure, slide_paraboloid, weak_harnack, DiscreteSurface, PeakSpec,
    PropertyP, Sense,
};
use acflat::elliptic::{
    column_bound_check, minimize, modica_gap, relax, stable_tau, BoundaryData, Grid, Minimization, ScalarField,
    SolverOptions,
};
use acflat::levelset::{flatness_cascade, harnack_check};
use acflat::{DoubleWellPotential, Profile1D};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

const RADII: [f64; 4] = [50.0, 100.0, 200.0, 400.0];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi / lo
}

fn profile_oracle(w: &DoubleWellPotential) -> Outcome {
    let t0 = Instant::now();
    let g = Profile1D::new(w).unwrap();
    let sup = (0..=16_000)
        .map(|i| -8.0 + i as f64 * 1e-3)
        .map(|t| (g.g(t) - (t / 2f64.sqrt()).tanh()).abs())
        .fold(0.0, f64::max);
    let dt = t0.elapsed();
    outcome(sup <= 1e-6 && dt < Duration::from_secs(1), format!("sup|g - tanh(t/sqrt2)| = {sup:.2e}, {dt:.2?}"))
}

fn barrier_inequality(w: &DoubleWellPotential) -> Outcome {
    let mut worst_out: f64 = 0.0;
    let mut worst_ratio: f64 = 1.0;
    for v in [Variant::G, Variant::Rho] {
        for n in 1..=3 {
            let mut c = Vec::new();
            for r in RADII {
                let iq = BarrierProfile::build(w, r, n, v).unwrap().inequality();
                worst_out = worst_out.max(iq.outside_sup);
                c.push(iq.c_star);
            }
            worst_ratio = worst_ratio.max(spread(&c));
        }
    }
    outcome(
        worst_out <= OUTSIDE_TOL && worst_ratio <= 2.0,
        format!("outside violation {worst_out:.2e}, C* spread over R {worst_ratio:.3}"),
    )
}

fn ordering(w: &DoubleWellPotential, g: &Profile1D) -> Outcome {
    let mut min_diff = f64::INFINITY;
    let mut worst_ratio: f64 = 1.0;
    for n in 1..=3 {
        let mut scaled = Vec::new();
        for r in RADII {
            let cmp = BarrierProfile::build(w, r, n, Variant::G).unwrap().compare_to_g(g).unwrap();
            min_diff = min_diff.min(cmp.min_difference.unwrap());
            scaled.push(cmp.scaled_sup);
        }
        worst_ratio = worst_ratio.max(spread(&scaled));
    }
    let mut margin = f64::INFINITY;
    let mut broken = Vec::new();
    for n in 1..=3 {
        for r in RADII {
            let rho = BarrierProfile::build(w, r, n, Variant::Rho).unwrap();
            for q in [r, (4.0 * r).powf(2.5)] {
                let gq = BarrierProfile::build(w, q, n, Variant::G).unwrap();
                let o = check_rho_ordering(&rho, &gq).unwrap();
                margin = margin.min(o.worst_margin);
                if o.worst_margin < -1e-12 {
                    broken.push(format!("n={n} R={r} Q={q:.3e} at t={:.2}", o.worst_at));
                }
            }
        }
    }
    let mut detail = format!("min(g_R - g) {min_diff:.2e}, R*sup spread {worst_ratio:.3}, rho margin {margin:.2e}");
    if !broken.is_empty() {
        detail.push_str(&format!(" (rho above shifted g_Q: {})", broken.join("; ")));
    }
    outcome(min_diff >= -1e-12 && worst_ratio <= 2.0 && broken.is_empty(), detail)
}

fn radial(w: &DoubleWellPotential) -> Outcome {
    let t0 = Instant::now();
    let mut ok = true;
    let (mut ann, mut out): (f64, f64) = (0.0, 0.0);
    for n in [2, 3] {
        for r in [50.0, 100.0] {
            let b = BarrierProfile::build(w, r, n, Variant::G).unwrap();
            let grid: Vec<f64> = (0..=(150.0 * r) as usize).map(|i| 0.5 * r + 0.01 * i as f64).collect();
            let rep = b.radial_residual(&grid).unwrap();
            ok &= rep.annulus_sup <= rep.c_star_bound + 1e-6 && rep.outside_sup <= 1e-8;
            ann = ann.max(rep.annulus_sup * r);
            out = out.max(rep.outside_sup);
        }
    }
    let dt = t0.elapsed();
    outcome(
        ok && dt < Duration::from_secs(10),
        format!("max R*annulus residual {ann:.3}, outside {out:.2e}, {dt:.2?}"),
    )
}

fn comparison_pairs(w: &DoubleWellPotential) -> (bool, usize) {
    let grid = Grid::centered_box(&[1.6, 1.6], 0.1).unwrap();
    assert_eq!(grid.dims(), &[33, 33]);
    let tau = stable_tau(&grid, w);
    let mut rng = StdRng::seed_from_u64(5);
    let mut late = 0;
    let mut ordered = true;
    for _ in 0..20 {
        let lo: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|v| (v + rng.random_range(0.0..=0.5)).min(1.0)).collect();
        let mut a = ScalarField::new(grid.clone(), lo).unwrap();
        let mut b = ScalarField::new(grid.clone(), hi).unwrap();
        late += relax(&mut a, w, tau, 300).unwrap().late_clamp_activations;
        late += relax(&mut b, w, tau, 300).unwrap().late_clamp_activations;
        ordered &= a.values().iter().zip(b.values()).all(|(x, y)| x <= y);
    }
    (ordered, late)
}

fn solver(w: &DoubleWellPotential, g: &Profile1D, flat: &Minimization) -> Outcome {
    let dev = flat.field.sup_distance(|x| g.g(x[1]));
    let (ordered, late) = comparison_pairs(w);
    outcome(
        flat.converged && dev <= 5e-3 && flat.energy_nonincreasing() && flat.late_clamp_activations == 0 && ordered && late == 0,
        format!(
            "sup|u - g(x_n)| {dev:.2e} after {} sweeps, energy monotone {}, 20 ordered pairs {}, late clamps {}",
            flat.sweeps,
            flat.energy_nonincreasing(),
            if ordered { "stay ordered" } else { "CROSS" },
            late + flat.late_clamp_activations
        ),
    )
}

fn gamma(w: &DoubleWellPotential, fields: &[(f64, Minimization)]) -> Outcome {
    let sigma = w.modica_constant();
    let exact = 2.0 * 2f64.sqrt() / 3.0;
    let rel: Vec<f64> = fields
        .iter()
        .map(|(eps, m)| modica_gap(&m.field.rescaled(*eps).unwrap(), w, *eps, 1.0).unwrap().abs() / sigma)
        .collect();
    outcome(
        (sigma - exact).abs() <= 1e-9 && rel[0] <= 0.1 && rel[1] < rel[0],
        format!(
            "|sigma - 2sqrt2/3| {:.1e}, relative gap {:.2e} (eps 0.1), {:.2e} (eps 0.05)",
            (sigma - exact).abs(),
            rel[0],
            rel[1]
        ),
    )
}

fn columns(w: &DoubleWellPotential, fields: &[&Minimization]) -> Outcome {
    let all_converged = fields.iter().all(|m| m.converged);
    let min = fields.iter().map(|m| column_bound_check(&m.field, w).min_slack).fold(f64::INFINITY, f64::min);
    outcome(
        all_converged && min >= -1e-8,
        format!("min column slack {min:.2e} over {} converged fields", fields.len()),
    )
}

fn harnack(sine: &Minimization, l: f64, elapsed: Duration) -> Outcome {
    let hr = harnack_check(&sine.field, l).unwrap();
    let cas = flatness_cascade(&sine.field, l, 3).unwrap();
    let delta = hr.delta.unwrap_or(f64::NAN);
    let halvings = cas.levels.len().saturating_sub(1);
    let ratios: Vec<String> = cas.levels.iter().map(|v| format!("{:.2e}", v.theta / v.l)).collect();
    outcome(
        hr.hypothesis_met
            && delta >= 0.05
            && halvings >= 2
            && cas.ratios_nonincreasing
            && elapsed < Duration::from_secs(300),
        format!("delta_hat {delta:.3}, theta_k/l_k [{}], {elapsed:.2?}", ratios.join(", ")),
    )
}

/// Exhaustive scan over the ball nodes in ascending order, first strict
/// minimum kept.
fn scan_oracle(s: &DiscreteSurface, a: f64, y: &[f64], sense: Sense) -> (usize, f64) {
    let m = s.nodes_per_axis();
    let h = 2.0 / (m - 1) as f64;
    let sign = if sense == Sense::Below { 1.0 } else { -1.0 };
    let (ex, ey) = ((y[0] + 1.0) / h, (y[1] + 1.0) / h);
    let r = (m - 1) as i64;
    let mut best = (usize::MAX, f64::INFINITY);
    for j in 0..m {
        for i in 0..m {
            let (di, dj) = (2 * i as i64 - r, 2 * j as i64 - r);
            if di * di + dj * dj > r * r {
                continue;
            }
            let node = i * m + j;
            let (p, q) = (i as f64 - ex, j as f64 - ey);
            let v = sign * s.heights()[node] + 0.5 * a * h * h * (p * p + q * q);
            if v < best.1 || (v == best.1 && node < best.0) {
                best = (node, v);
            }
        }
    }
    best
}

fn contact_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let seed = rng.random_range(0..1_000_000u64);
        let a = rng.random_range(0.05..50.0);
        let y = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        let sense = if rng.random_range(0..2) == 0 { Sense::Below } else { Sense::Above };
        let s = DiscreteSurface::bumps(2, 257, 8, 1.0, seed).unwrap();
        let rec = slide_paraboloid(&s, a, &y, sense).unwrap();
        let (node, value) = scan_oracle(&s, a, &y, sense);
        let sign = if sense == Sense::Below { 1.0 } else { -1.0 };
        if rec.node != node || rec.vertex_height != sign * value {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in 100 queries on 257^2 grids"))
}

fn abp() -> Outcome {
    let lambda = 1.0;
    let p = PropertyP { lambda, opening_lo: 1.0, opening_hi: 1.0 };
    let mut ok = true;
    let (mut worst_margin, mut worst_jac) = (f64::INFINITY, 0.0f64);
    for (n, m) in [(1usize, 1025usize), (2, 129)] {
        for seed in 0..3u64 {
            let s = DiscreteSurface::bumps(n, m, 8, lambda, seed).unwrap().with_property_p(p).unwrap();
            let r = abp_check(&s, 1.0, &s.ball_centers(0.5)).unwrap();
            let bound = (lambda + 1.0).powi(-(n as i32)) - 5.0 * s.h();
            let jac_bound = (lambda + 1.0).powi(n as i32) + 0.1;
            ok &= !r.inconclusive && r.ratio >= bound && r.max_jacobian <= jac_bound;
            worst_margin = worst_margin.min(r.ratio - bound);
            worst_jac = worst_jac.max(r.max_jacobian / jac_bound);
        }
    }
    outcome(
        ok,
        format!("min |E|/|F| - bound {worst_margin:.3}, max jacobian/bound {worst_jac:.3} (n = 1, 2; 3 seeds)"),
    )
}

fn covering_and_weak_harnack() -> Outcome {
    let theta = 0.01;
    let a0 = 20.0 * theta;
    let peak = PeakSpec { centre: vec![0.3, 0.0], slope: 0.04, radius: 0.25, tip: 0.02, rim: 0.02 };
    let s = DiscreteSurface::peaked(2, 129, theta, peak)
        .unwrap()
        .lifted_to(0.0)
        .with_property_p(PropertyP { lambda: 1.0, opening_lo: theta, opening_hi: a0 * 256.0 })
        .unwrap()
        .assert_nonnegative()
        .unwrap();
    let cov = covering_iteration(&s, a0, 2.0, 8).unwrap();
    let fit = &cov.decay_half;
    let r2 = fit.r_squared.unwrap_or(f64::NAN);
    let mut violations = 0;
    let mut heights_ok = true;
    for m in [4.0, 32.0] {
        let wh = weak_harnack(&s, theta, m, 0.5).unwrap();
        violations += wh.height_violations;
        heights_ok &= wh.hypothesis_met;
    }
    let opp = opposite_side_measure(&s, theta).unwrap();
    let inside = opp.escaped == 0 && opp.max_contact_radius <= 0.5 && opp.max_contact_height <= 1.5 * theta;
    outcome(
        fit.strictly_decreasing && r2 >= 0.9 && heights_ok && violations == 0 && inside,
        format!(
            "complement decreasing {} to floor at k = {:?}, R^2 {r2:.4}, height violations {violations}, opposite-side contacts inside cylinder {}",
            fit.strictly_decreasing, fit.floor_k, inside
        ),
    )
}

fn solve(w: &DoubleWellPotential, g: &Profile1D, half: f64, h: f64, data: BoundaryData) -> Minimization {
    let grid = Grid::centered_box(&[half, half], h).unwrap();
    let field = ScalarField::from_data(grid, data, g).unwrap();
    minimize(field, w, &SolverOptions { tol: 1e-6, ..Default::default() }).unwrap()
}

fn main() {
    let w = DoubleWellPotential::quartic();
    let g = Profile1D::new(&w).unwrap();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |k: usize, o: Outcome| {
        println!("criterion {k:2} {} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, o));
    };

    report(1, profile_oracle(&w));
    report(2, barrier_inequality(&w));
    report(3, ordering(&w, &g));
    report(4, radial(&w));

    let flat = solve(&w, &g, 20.0, 0.1, BoundaryData::Flat { shift: 0.0 });
    report(5, solver(&w, &g, &flat));

    let gamma_fields: Vec<(f64, Minimization)> = [0.1, 0.05]
        .into_iter()
        .map(|eps| (eps, solve(&w, &g, 0.5 / eps, eps, BoundaryData::Flat { shift: 0.0 })))
        .collect();
    report(6, gamma(&w, &gamma_fields));

    let l = 10.0;
    let t0 = Instant::now();
    let sine = solve(&w, &g, l, 0.1, BoundaryData::Sine { amplitude: 0.05 * l, half_width: l });
    let sine_time = t0.elapsed();
    report(7, columns(&w, &[&flat, &gamma_fields[0].1, &gamma_fields[1].1, &sine]));
    report(8, harnack(&sine, l, t0.elapsed().max(sine_time)));

    report(9, contact_oracle());
    report(10, abp());
    report(11, covering_and_weak_harnack());

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.passed).map(|(k, _)| *k).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
