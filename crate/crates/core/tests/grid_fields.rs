use std::f64::consts::{PI, SQRT_2};

use activeop::{inner_product, l2_norm_sq, Domain, Error, FieldFunction, Grid, Layout, Measure};
use proptest::prelude::*;
use statrs::function::erf::erf;

#[test]
fn torus_nodes_and_weights() {
    let g = Grid::new(1, 4, Domain::Torus01, Measure::Lebesgue).unwrap();
    let xs: Vec<f64> = g.nodes().map(|x| x[0]).collect();
    assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75]);
    assert!(g.weights().iter().all(|&w| w == 0.25));
}

#[test]
fn unit_square_mass() {
    let g = Grid::new(2, 64, Domain::Box01, Measure::Lebesgue).unwrap();
    assert_eq!(g.len(), 4096);
    assert!((g.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn gaussian_mass_on_interval() {
    let g = Grid::new(1, 256, Domain::INTERVAL_PM1, Measure::Gaussian { variance: 0.01 }).unwrap();
    let exact = erf(1.0 / (0.1 * SQRT_2));
    assert!((g.total_mass() - exact).abs() < 1e-6, "{}", g.total_mass());
}

#[test]
fn interval_mass_is_two_to_the_d() {
    for layout in [Layout::Lattice, Layout::Midpoint] {
        let g = Grid::with_layout(2, 33, Domain::INTERVAL_PM1, Measure::Lebesgue, layout).unwrap();
        assert!((g.total_mass() - 4.0).abs() < 1e-12);
    }
}

#[test]
fn trig_inner_products() {
    let g = Grid::new(1, 256, Domain::Torus01, Measure::Lebesgue).unwrap();
    let s = FieldFunction::from_fn(g.clone(), |x| SQRT_2 * (2.0 * PI * x[0]).sin()).unwrap();
    let c = FieldFunction::from_fn(g.clone(), |x| SQRT_2 * (2.0 * PI * x[0]).cos()).unwrap();
    assert!((inner_product(&s, &s).unwrap() - 1.0).abs() < 1e-10);
    assert!(inner_product(&s, &c).unwrap().abs() < 1e-10);
    assert_eq!(inner_product(&s, &FieldFunction::zeros(g)).unwrap(), 0.0);
}

#[test]
fn box_norms() {
    let g = Grid::new(2, 64, Domain::Box01, Measure::Lebesgue).unwrap();
    assert_eq!(l2_norm_sq(&FieldFunction::zeros(g.clone())), 0.0);
    let one = FieldFunction::from_fn(g.clone(), |_| 1.0).unwrap();
    assert!((l2_norm_sq(&one) - 1.0).abs() < 1e-12);
    let ss = FieldFunction::from_fn(g, |x| (PI * x[0]).sin() * (PI * x[1]).sin()).unwrap();
    assert!((l2_norm_sq(&ss) - 0.25).abs() < 1e-3);
}

#[test]
fn rejects_bad_grids_and_fields() {
    assert!(Grid::new(3, 8, Domain::Box01, Measure::Lebesgue).is_err());
    assert!(Grid::new(1, 1, Domain::Box01, Measure::Lebesgue).is_err());
    assert!(Grid::new(1, 0, Domain::Box01, Measure::Lebesgue).is_err());
    let g = Grid::new(1, 8, Domain::Box01, Measure::Lebesgue).unwrap();
    assert!(FieldFunction::new(g.clone(), vec![0.0; 7]).is_err());
    let mut v = vec![0.0; 8];
    v[3] = f64::NAN;
    assert!(FieldFunction::new(g.clone(), v).is_err());
    let h = Grid::new(1, 9, Domain::Box01, Measure::Lebesgue).unwrap();
    let err = inner_product(&FieldFunction::zeros(g), &FieldFunction::zeros(h)).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_)));
}

#[test]
fn trig_polynomials_integrate_exactly() {
    let n = 64;
    let g = Grid::new(2, n, Domain::Torus01, Measure::Lebesgue).unwrap();
    // cos(2 pi (3x + 5y))^2 integrates to 1/2
    let f = FieldFunction::from_fn(g, |x| (2.0 * PI * (3.0 * x[0] + 5.0 * x[1])).cos()).unwrap();
    assert!((l2_norm_sq(&f) - 0.5).abs() < 1e-10);
}

fn any_grid() -> impl Strategy<Value = std::sync::Arc<Grid>> {
    (1usize..=2, 2usize..24, 0usize..4, any::<bool>()).prop_map(|(dim, n, dom, midpoint)| {
        let (domain, measure) = match dom {
            0 => (Domain::Torus01, Measure::Lebesgue),
            1 => (Domain::Box01, Measure::Lebesgue),
            2 => (Domain::INTERVAL_PM1, Measure::Lebesgue),
            _ => (Domain::Interval { half_width: 2.0 }, Measure::Gaussian { variance: 0.5 }),
        };
        let layout = if midpoint { Layout::Midpoint } else { Layout::Lattice };
        Grid::with_layout(dim, n, domain, measure, layout).unwrap()
    })
}

proptest! {
    #[test]
    fn weights_are_positive_and_conserve_mass(g in any_grid()) {
        prop_assert_eq!(g.len(), g.points_per_dim().pow(g.dim() as u32));
        prop_assert!(g.weights().iter().all(|&w| w > 0.0));
        if g.measure() == Measure::Lebesgue {
            let want = g.domain().axis_length().powi(g.dim() as i32);
            prop_assert!((g.total_mass() - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn cauchy_schwarz(g in any_grid(), seed in any::<u64>()) {
        let len = g.len();
        let mut s = seed | 1;
        let mut next = move || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s % 2000) as f64 / 1000.0 - 1.0 };
        let f = FieldFunction::new(g.clone(), (0..len).map(|_| next()).collect()).unwrap();
        let h = FieldFunction::new(g.clone(), (0..len).map(|_| next()).collect()).unwrap();
        let ip = inner_product(&f, &h).unwrap();
        prop_assert!(ip * ip <= l2_norm_sq(&f) * l2_norm_sq(&h) * (1.0 + 1e-12) + 1e-300);
        prop_assert!((ip - inner_product(&h, &f).unwrap()).abs() <= 1e-12 * ip.abs().max(1.0));
    }
}
