use acflat::acf1::Acf1;
use acflat::contact::{
    abp_check, contact_set, covering_iteration, opposite_side_measure, weak_harnack, ContactRecord, DiscreteSurface,
    PeakSpec, PropertyP, Sense,
};

use crate::summary::{CheckKind, Run};
use crate::CliError;

const R2_MIN: f64 = 0.9;

fn surface(run: &mut Run) -> Result<(DiscreteSurface, bool), CliError> {
    let cfg = run.cfg().clone();
    let kind = cfg.text("surface.kind")?;
    let n = cfg.usize("surface.n")?;
    let m = cfg.usize("surface.m")?;
    let s = match kind.as_str() {
        "file" => {
            let bytes = run.read_input("input.surface")?;
            return Ok((DiscreteSurface::from_acf1(Acf1::decode(&bytes)?)?, false));
        }
        "flat" => DiscreteSurface::flat(n, m, cfg.f64("surface.value")?)?,
        "paraboloid" => DiscreteSurface::paraboloid(n, m, cfg.f64("surface.b")?, cfg.f64("surface.offset")?)?,
        "bumps" => {
            let seed = cfg
                .u64("surface.seed")
                .map_err(|_| CliError::config("missing_seed", "surface.seed is required for bumps"))?;
            let bound = match cfg.opt_f64("surface.hessian") {
                Some(b) => b,
                None => {
                    let lambda = cfg.f64("contact.lambda")?;
                    let lo = opening_interval(run)?.map(|i| i.0).ok_or_else(|| {
                        CliError::config("missing_key", "bumps need surface.hessian or contact.lambda with openings")
                    })?;
                    lambda * lo
                }
            };
            DiscreteSurface::bumps(n, m, cfg.usize("surface.count")?, bound, seed)?
        }
        _ => DiscreteSurface::peaked(
            n,
            m,
            cfg.f64("surface.bowl")?,
            PeakSpec {
                centre: cfg.f64_list("peak.centre")?,
                slope: cfg.f64("peak.slope")?,
                radius: cfg.f64("peak.radius")?,
                tip: cfg.f64("peak.tip")?,
                rim: cfg.f64("peak.rim")?,
            },
        )?,
    };
    let s = match kind.as_str() {
        "peaked" => s.lifted_to(cfg.opt_f64("surface.lift").unwrap_or(0.0)),
        _ => match cfg.opt_f64("surface.lift") {
            Some(v) => s.lifted_to(v),
            None => s,
        },
    };
    Ok((s, true))
}

/// Admissible openings: `contact.I`, or the range the mode sweeps.
fn opening_interval(run: &Run) -> Result<Option<(f64, f64)>, CliError> {
    let cfg = run.cfg();
    if let Some(i) = cfg.opt_f64_list("contact.I") {
        return match i.as_slice() {
            [lo, hi] if lo <= hi && *lo > 0.0 => Ok(Some((*lo, *hi))),
            _ => Err(CliError::config("out_of_range", "contact.I must be lo,hi with 0 < lo ≤ hi")),
        };
    }
    Ok(match cfg.text("contact.mode")?.as_str() {
        "abp" | "set" => cfg.opt_f64("contact.a").map(|a| (a, a)),
        "covering" => {
            let a0 = covering_a0(run)?;
            let top = a0 * cfg.f64("contact.c_open")?.powi(cfg.usize("contact.k_max")? as i32);
            Some((a0, top))
        }
        "weak-harnack" => match (cfg.opt_f64("contact.theta"), cfg.opt_f64("contact.M")) {
            (Some(t), Some(m)) => Some((t, m * t)),
            _ => None,
        },
        _ => cfg.opt_f64("contact.theta").map(|t| (8.0 * t, 8.0 * t)),
    })
}

fn covering_a0(run: &Run) -> Result<f64, CliError> {
    let cfg = run.cfg();
    match cfg.opt_f64("contact.a") {
        Some(a) => Ok(a),
        None => Ok(20.0 * cfg.f64("contact.theta")?),
    }
}

fn record_rows(records: &[ContactRecord]) -> Vec<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            let mut row = r.center.clone();
            row.extend(&r.z);
            row.push(r.vertex_height);
            row.push(r.contact_height);
            row.push(if r.on_boundary { 1.0 } else { 0.0 });
            row
        })
        .collect()
}

fn record_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|k| format!("y{k}")).collect();
    h.extend((1..=n).map(|k| format!("z{k}")));
    h.extend(["vertex_height", "contact_height", "on_boundary"].map(String::from));
    h
}

pub fn contact(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg().clone();
    let mode = cfg.text("contact.mode")?;
    let (mut s, generated) = surface(run)?;
    if generated {
        run.write_bytes("_surface.acf1", &s.to_acf1().encode())?;
    }
    if let Some(lambda) = cfg.opt_f64("contact.lambda") {
        let (lo, hi) = opening_interval(run)?
            .ok_or_else(|| CliError::config("missing_key", "contact.lambda needs an opening interval (contact.I)"))?;
        s = s.with_property_p(PropertyP { lambda, opening_lo: lo, opening_hi: hi })?;
    }
    if cfg.bool("contact.nonnegative")? || matches!(mode.as_str(), "covering" | "weak-harnack" | "opposite") {
        s = s.assert_nonnegative()?;
    }
    let n = s.n();
    run.measure("h", s.h());
    let header = record_header(n);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    match mode.as_str() {
        "set" => {
            let a = cfg.f64("contact.a")?;
            let sense: Sense = cfg.text("contact.sense")?.parse()?;
            let radius = cfg.opt_f64("contact.centers").unwrap_or(1.0);
            let rep = contact_set(&s, a, &s.ball_centers(radius), sense)?;
            run.measure("measure", rep.measure);
            run.measure("center_measure", rep.center_measure);
            run.measure("boundary_excluded", rep.boundary_excluded as f64);
            run.measure("outside_window", rep.outside_window as f64);
            run.measure("max_contact_radius", rep.max_contact_radius);
            run.detail("contact_set", &rep);
            run.write_csv(".csv", &header, &record_rows(&rep.records))
        }
        "abp" => {
            let a = cfg.f64("contact.a")?;
            cfg.f64("contact.lambda")?;
            let radius = cfg.opt_f64("contact.centers").unwrap_or(0.5);
            let centers = s.ball_centers(radius);
            let rep = abp_check(&s, a, &centers)?;
            run.measure("abp_ratio", rep.ratio);
            run.measure("abp_bound", rep.bound);
            run.measure("grid_slack", rep.grid_slack);
            run.measure("max_jacobian", rep.max_jacobian);
            run.measure("exclusion_fraction", rep.exclusion_fraction);
            run.check("abp_conclusive", CheckKind::Hypothesis, !rep.inconclusive);
            run.check("abp_ratio", CheckKind::Invariant, rep.holds);
            run.check("jacobian_bound", CheckKind::Invariant, rep.max_jacobian <= rep.jacobian_bound + 0.1);
            run.detail("abp", &rep);
            let set = contact_set(&s, a, &centers, Sense::Below)?;
            run.write_csv(".csv", &header, &record_rows(&set.records))
        }
        "covering" => {
            cfg.f64("contact.lambda")?;
            let a0 = covering_a0(run)?;
            let rep = covering_iteration(&s, a0, cfg.f64("contact.c_open")?, cfg.usize("contact.k_max")?)?;
            for (tag, fit) in [("", &rep.decay), ("_half", &rep.decay_half)] {
                run.measure_opt(format!("decay_rate{tag}"), fit.rate);
                run.measure_opt(format!("decay_r_squared{tag}"), fit.r_squared);
                run.check(format!("complement_decreasing{tag}"), CheckKind::Invariant, fit.strictly_decreasing);
                run.check(
                    format!("decay_fit{tag}"),
                    CheckKind::Invariant,
                    fit.r_squared.is_none_or(|r2| r2 >= R2_MIN),
                );
            }
            run.measure("truncated", if rep.truncated { 1.0 } else { 0.0 });
            if let Some(i) = cfg.opt_f64_list("contact.I") {
                let top = rep.levels.last().map_or(a0, |l| l.opening);
                run.measure("sweep_exceeds_interval", if top > i[1] { 1.0 } else { 0.0 });
            }
            run.detail("covering", &rep);
            let rows: Vec<[f64; 6]> = rep
                .levels
                .iter()
                .map(|l| {
                    [
                        l.k as f64,
                        l.opening,
                        l.complement,
                        l.complement_half,
                        l.boundary_excluded as f64,
                        l.max_contact_height,
                    ]
                })
                .collect();
            run.write_csv(
                ".csv",
                &["k", "opening", "complement", "complement_half", "boundary_excluded", "max_contact_height"],
                &rows,
            )
        }
        "weak-harnack" => {
            let theta = cfg.f64("contact.theta")?;
            let rep = weak_harnack(&s, theta, cfg.f64("contact.M")?, cfg.f64("contact.mu")?)?;
            run.check("weak_harnack_hypothesis", CheckKind::Hypothesis, rep.hypothesis_met);
            if rep.hypothesis_met {
                run.measure_opt("complement_fraction", rep.complement_fraction);
                run.measure_opt("max_contact_height", rep.max_contact_height);
                run.measure("height_bound", rep.height_bound);
                run.check(
                    "complement_at_most_mu",
                    CheckKind::Invariant,
                    rep.complement_fraction.is_some_and(|f| f <= rep.mu),
                );
                run.check("height_bound", CheckKind::Invariant, rep.height_violations == 0);
            }
            run.detail("weak_harnack", &rep);
            Ok(())
        }
        _ => {
            let theta = cfg.f64("contact.theta")?;
            let rep = opposite_side_measure(&s, theta)?;
            run.measure("projected_measure", rep.measure);
            run.measure("half_ball_fraction", rep.half_ball_fraction);
            run.measure("max_contact_height", rep.max_contact_height);
            run.measure("max_contact_radius", rep.max_contact_radius);
            run.check("contacts_in_cylinder", CheckKind::Hypothesis, rep.holds);
            run.detail("opposite_side", &rep);
            Ok(())
        }
    }
}
