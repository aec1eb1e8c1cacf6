use acflat::acf1::Acf1;
use acflat::barriers::{BarrierProfile, Variant};
use acflat::contact::{contact_set, DiscreteSurface, PropertyP, Sense};
use acflat::elliptic::{
    column_bound_check, discrete_energy, minimize, BoundaryData, Grid, ScalarField, SolverOptions,
};
use acflat::levelset::{extract, flatness, harnack_check};
use acflat::{DoubleWellPotential, Error, Profile1D};

fn quartic() -> (DoubleWellPotential, Profile1D) {
    let w = DoubleWellPotential::quartic();
    let g = Profile1D::new(&w).unwrap();
    (w, g)
}

#[test]
fn tilted_minimizer_has_a_flat_tilted_zero_set() {
    let (w, g) = quartic();
    let grid = Grid::centered_box(&[5.0, 5.0], 0.125).unwrap();
    let field = ScalarField::from_data(grid, BoundaryData::Tilted { degrees: 20.0 }, &g).unwrap();
    let m = minimize(field, &w, &SolverOptions::default()).unwrap();
    assert!(m.converged && m.energy_nonincreasing());
    let fit = flatness(&extract(&m.field, 1).unwrap(), None).unwrap();
    let angle = fit.xi[0].atan2(fit.xi[1]).to_degrees().abs();
    assert!((angle - 20.0).abs() < 0.5, "angle {angle}");
    assert!(fit.theta < 0.05, "theta {}", fit.theta);
    assert!(column_bound_check(&m.field, &w).min_slack > -1e-8);
}

#[test]
fn minimizer_survives_acf1_round_trip() {
    let (w, g) = quartic();
    let grid = Grid::centered_box(&[3.0, 3.0], 0.25).unwrap();
    let field = ScalarField::from_data(grid, BoundaryData::Flat { shift: 0.5 }, &g).unwrap();
    let m = minimize(field, &w, &SolverOptions::default()).unwrap();
    let bytes = m.field.to_acf1_bytes();
    let back = ScalarField::from_acf1_bytes(&bytes).unwrap();
    assert_eq!(back.values(), m.field.values());
    assert_eq!(discrete_energy(&back, &w), discrete_energy(&m.field, &w));
    // A stored field is a valid contact surface of the same shape.
    let acf = Acf1::decode(&bytes).unwrap();
    assert_eq!(acf.dims, vec![25, 25]);
}

#[test]
fn harnack_on_a_plane_is_below_noise() {
    let (w, g) = quartic();
    let grid = Grid::centered_box(&[4.0, 4.0], 0.125).unwrap();
    let field = ScalarField::from_data(grid, BoundaryData::Flat { shift: 0.0 }, &g).unwrap();
    let m = minimize(field, &w, &SolverOptions::default()).unwrap();
    let hr = harnack_check(&m.field, 4.0).unwrap();
    assert!(hr.delta.is_none());
}

#[test]
fn barrier_profiles_bracket_g() {
    let (w, g) = quartic();
    let b = BarrierProfile::build(&w, 100.0, 2, Variant::G).unwrap();
    for i in -40..=40 {
        let t = i as f64 * 0.1;
        assert!(b.value(t) >= g.g(t) - 1e-12);
    }
    let rho = BarrierProfile::build(&w, 100.0, 2, Variant::Rho).unwrap();
    let (lo, hi) = rho.breakpoints();
    assert!(-lo <= 50.0 && hi <= 50.0);
}

#[test]
fn surface_round_trip_keeps_contacts() {
    let s = DiscreteSurface::bumps(2, 65, 6, 1.0, 3).unwrap();
    let back = DiscreteSurface::from_acf1(Acf1::decode(&s.to_acf1().encode()).unwrap()).unwrap();
    assert_eq!(back.heights(), s.heights());
    let centers = s.ball_centers(0.5);
    let a = contact_set(&s, 2.0, &centers, Sense::Below).unwrap();
    let b = contact_set(&back, 2.0, &centers, Sense::Below).unwrap();
    assert_eq!(a.nodes, b.nodes);
}

#[test]
fn steep_surface_fails_property_p() {
    let s = DiscreteSurface::paraboloid(2, 65, 40.0, 0.0).unwrap();
    let err = s.with_property_p(PropertyP { lambda: 1.0, opening_lo: 1.0, opening_hi: 1.0 }).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err:?}");
}
