use std::sync::Arc;

use activeop::random_fields::{draw_coefficients, kl_project_with};
use activeop::{
    brownian_eigensystem, dirichlet_box_eigensystem, kl_project, l2_norm_sq, make_hard_instance, op_norm_estimate,
    sample_kl, torus_eigensystem, BasisTable, CoefficientLaw, Domain, FieldFunction, Grid, KlSampler, Measure, Oracle,
};
use proptest::prelude::*;

fn box1d(n: usize) -> Arc<Grid> {
    Grid::new(1, n, Domain::Box01, Measure::Lebesgue).unwrap()
}

#[test]
fn zero_truncation_gives_zero_field() {
    let sys = brownian_eigensystem(10).unwrap();
    let s = sample_kl(&sys, 0, &box1d(33), CoefficientLaw::StandardGaussian, 1).unwrap();
    assert!(s.coefficients.is_empty());
    assert_eq!(s.field.max_abs(), 0.0);
}

#[test]
fn rejects_oversized_truncation_and_bad_grids() {
    let sys = brownian_eigensystem(10).unwrap();
    assert!(sample_kl(&sys, 11, &box1d(33), CoefficientLaw::StandardGaussian, 1).is_err());
    let torus = Grid::new(1, 33, Domain::Torus01, Measure::Lebesgue).unwrap();
    assert!(sample_kl(&sys, 5, &torus, CoefficientLaw::StandardGaussian, 1).is_err());
    assert!(KlSampler::new(&sys, 5, &box1d(33), CoefficientLaw::ThreePoint { p: 0.0 }, 1).is_err());
    assert!(KlSampler::new(&sys, 5, &box1d(33), CoefficientLaw::ThreePoint { p: 1.5 }, 1).is_err());
}

#[test]
fn field_matches_expansion_at_nodes() {
    let sys = brownian_eigensystem(40).unwrap();
    let grid = box1d(65);
    let s = sample_kl(&sys, 40, &grid, CoefficientLaw::StandardGaussian, 9).unwrap();
    for (i, x) in grid.nodes().enumerate() {
        let direct: f64 =
            (0..40).map(|j| sys.eigenvalue(j).sqrt() * s.coefficients[j] * sys.eval(j, x)).sum();
        assert!((s.field.values()[i] - direct).abs() < 1e-10);
    }
}

#[test]
fn brownian_variance_at_one() {
    let sys = brownian_eigensystem(200).unwrap();
    let grid = box1d(257);
    let sampler = KlSampler::new(&sys, 200, &grid, CoefficientLaw::StandardGaussian, 4).unwrap();
    let last = grid.len() - 1;
    let s = 5000;
    let var = (0..s).map(|i| sampler.sample(i).field.values()[last].powi(2)).sum::<f64>() / s as f64;
    assert!((var - 1.0).abs() < 0.1, "{var}");
}

#[test]
fn three_point_moments() {
    let law = CoefficientLaw::ThreePoint { p: 0.5 };
    let s = 10_000;
    let xs: Vec<f64> = (0..s).flat_map(|i| draw_coefficients(law, 1, 77, i)).collect();
    let r2 = 2f64.sqrt();
    assert!(xs.iter().all(|&x| x == 0.0 || (x.abs() - r2).abs() < 1e-15));
    let mean = xs.iter().sum::<f64>() / s as f64;
    let second = xs.iter().map(|x| x * x).sum::<f64>() / s as f64;
    assert!(mean.abs() < 3.0 / (s as f64).sqrt(), "{mean}");
    assert!((second - 1.0).abs() < 0.1, "{second}");
}

#[test]
fn three_point_zero_fraction() {
    for p in [0.5, 0.1, 0.0125] {
        let law = CoefficientLaw::ThreePoint { p };
        let xs: Vec<f64> = (0..2000).flat_map(|i| draw_coefficients(law, 10, 5, i)).collect();
        let frac = xs.iter().filter(|&&x| x == 0.0).count() as f64 / xs.len() as f64;
        let se = (p * (1.0 - p) / xs.len() as f64).sqrt();
        assert!((frac - (1.0 - p)).abs() < 3.0 * se, "p={p} frac={frac}");
    }
}

#[test]
fn mean_zero_and_covariance_recovery() {
    let sys = brownian_eigensystem(100).unwrap();
    let grid = box1d(129);
    let probes = [16usize, 32, 48, 64, 80, 96, 112, 128];
    let s = 4000u64;
    for law in [CoefficientLaw::StandardGaussian, CoefficientLaw::ThreePoint { p: 0.2 }] {
        let sampler = KlSampler::new(&sys, 100, &grid, law, 21).unwrap();
        let vals: Vec<Vec<f64>> = (0..s)
            .map(|i| {
                let f = sampler.sample(i).field;
                probes.iter().map(|&k| f.values()[k]).collect()
            })
            .collect();
        for (a, &ka) in probes.iter().enumerate() {
            let x = grid.node(ka);
            let kxx = sys.kernel_partial_sum(x, x, 100).unwrap();
            let mean = vals.iter().map(|v| v[a]).sum::<f64>() / s as f64;
            assert!(mean.abs() <= 4.0 * (kxx / s as f64).sqrt(), "{law:?} mean {mean} at {x:?}");
            for (b, &kb) in probes.iter().enumerate().skip(a) {
                let y = grid.node(kb);
                let want = sys.kernel_partial_sum(x, y, 100).unwrap();
                if want <= 0.05 * kxx {
                    continue;
                }
                let got = vals.iter().map(|v| v[a] * v[b]).sum::<f64>() / s as f64;
                assert!((got - want).abs() < 0.1 * want, "{law:?} cov({x:?},{y:?}) {got} vs {want}");
            }
        }
    }
}

#[test]
fn projection_of_eigenfunction_and_zero() {
    let sys = dirichlet_box_eigensystem(1.0, 1.0, 1.0, 1, 8).unwrap();
    let grid = box1d(64);
    let table = BasisTable::new(&sys, &grid, 8).unwrap();
    let p = kl_project_with(&table.field(0), &sys, &table);
    assert!((p.coefficients[0] - 1.0 / sys.eigenvalue(0).sqrt()).abs() < 1e-10);
    assert!(p.coefficients[1..].iter().all(|c| c.abs() < 1e-10));
    let z = kl_project(&FieldFunction::zeros(grid), &sys, 8).unwrap();
    assert!(z.coefficients.iter().all(|&c| c == 0.0));
    assert_eq!(z.reconstruction.max_abs(), 0.0);
    assert!(kl_project(&table.field(0), &sys, 9).is_err());
}

#[test]
fn torus_round_trip_recovers_coefficients() {
    let sys = torus_eigensystem(1.0, 1.0, 1.5, 2, 60).unwrap();
    let grid = Grid::new(2, 32, Domain::Torus01, Measure::Lebesgue).unwrap();
    let s = sample_kl(&sys, 60, &grid, CoefficientLaw::StandardGaussian, 3).unwrap();
    let p = kl_project(&s.field, &sys, 60).unwrap();
    for (a, b) in p.coefficients.iter().zip(&s.coefficients) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn sampler_is_index_addressed() {
    let sys = brownian_eigensystem(30).unwrap();
    let grid = box1d(33);
    let a = KlSampler::new(&sys, 30, &grid, CoefficientLaw::StandardGaussian, 8).unwrap();
    let b = KlSampler::new(&sys, 30, &grid, CoefficientLaw::StandardGaussian, 8).unwrap();
    let late = b.sample(17);
    let _ = b.sample(3);
    assert_eq!(a.sample(17).field.values(), late.field.values());
    assert_ne!(a.sample(17).coefficients, a.sample(18).coefficients);
    // A shorter truncation draws a prefix of the same stream.
    let short = KlSampler::new(&sys, 10, &grid, CoefficientLaw::StandardGaussian, 8).unwrap();
    assert_eq!(short.coefficients(5)[..], a.coefficients(5)[..10]);
}

#[test]
fn hard_instance_examples() {
    let sys = Arc::new(brownian_eigensystem(50).unwrap());
    let inst = make_hard_instance(sys.clone(), 1, 1, 2.0, 0).unwrap();
    assert_eq!(inst.sparsity, 0.5);
    assert_eq!(inst.op_norm(), 2.0);
    assert!(inst.signs.iter().all(|s| s.abs() == 1.0));
    assert!(make_hard_instance(sys.clone(), 0, 1, 1.0, 0).is_err());
    assert!(make_hard_instance(sys.clone(), 1, 1, 0.0, 0).is_err());

    let inst = make_hard_instance(sys.clone(), 10, 20, 1.5, 11).unwrap();
    assert!((inst.sparsity - 1.0 / 400.0).abs() < 1e-18);
    let grid = box1d(257);
    let oracle = inst.oracle(&grid).unwrap();
    let table = oracle.table().clone();
    for k in [0usize, 3, 49] {
        let phi = table.field(k);
        let out = oracle.apply(&phi).unwrap();
        let want = phi.scaled(1.5 * inst.signs[k]);
        assert!(out.sub(&want).unwrap().max_abs() < 1e-9);
    }
    let est = op_norm_estimate(&oracle, &table, 50).unwrap();
    assert!((est.value - 1.5).abs() < 1e-9, "{}", est.value);
    let lb = inst.lower_bound().unwrap();
    assert!((lb - 0.5 * 2.25 * sys.head_sum(10).unwrap()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn truncation_error_is_monotone_and_bounded(seed in any::<u64>(), big in 4usize..40) {
        let sys = dirichlet_box_eigensystem(1.0, 1.0, 1.0, 1, 40).unwrap();
        let grid = box1d(64);
        let s = sample_kl(&sys, big, &grid, CoefficientLaw::StandardGaussian, seed).unwrap();
        let xi_max = s.coefficients.iter().map(|x| x * x).fold(0.0, f64::max);
        let mut prev = f64::INFINITY;
        for m in 0..=big {
            let p = kl_project(&s.field, &sys, m).unwrap();
            let err = l2_norm_sq(&s.field.sub(&p.reconstruction).unwrap());
            prop_assert!(err <= prev + 1e-12);
            prop_assert!(err <= sys.tail_sum(m).unwrap() * xi_max + 1e-12);
            prev = err;
        }
    }

    #[test]
    fn three_point_values_in_support(p in 0.001f64..=1.0, seed in any::<u64>()) {
        let a = (1.0 / p).sqrt();
        for x in draw_coefficients(CoefficientLaw::ThreePoint { p }, 50, seed, 0) {
            prop_assert!(x == 0.0 || x == a || x == -a);
        }
    }
}
