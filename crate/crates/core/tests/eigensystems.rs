use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use activeop::eigen::SystemKind;
use activeop::{
    brownian_eigensystem, dirichlet_box_eigensystem, inner_product, kernels, nystrom_eigensystem, rbf_eigensystem_1d,
    rbf_eigensystem_nd, torus_eigensystem, BasisTable, Domain, EigenSystem, Error, Grid, Measure, RbfEigParams,
};
use proptest::prelude::*;

/// Largest deviation of the tabulated Gram matrix from the identity.
fn gram_defect(sys: &EigenSystem, grid: &Arc<Grid>, m: usize) -> f64 {
    let table = BasisTable::new(sys, grid, m).unwrap();
    let fields: Vec<_> = (0..m).map(|j| table.field(j)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in i..m {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner_product(&fields[i], &fields[j]).unwrap() - want).abs());
        }
    }
    worst
}

#[test]
fn torus_orthonormality() {
    let sys = torus_eigensystem(1.0, 1.0, 2.0, 1, 50).unwrap();
    let g = Grid::new(1, 128, Domain::Torus01, Measure::Lebesgue).unwrap();
    assert!(gram_defect(&sys, &g, 50) < 1e-8);
    let sys = torus_eigensystem(1.0, 1.0, 2.0, 2, 50).unwrap();
    let g = Grid::new(2, 32, Domain::Torus01, Measure::Lebesgue).unwrap();
    assert!(gram_defect(&sys, &g, 50) < 1e-8);
}

#[test]
fn box_and_brownian_orthonormality() {
    let sys = dirichlet_box_eigensystem(1.0, 1.0, 2.0, 2, 50).unwrap();
    let g = Grid::new(2, 32, Domain::Box01, Measure::Lebesgue).unwrap();
    assert!(gram_defect(&sys, &g, 50) < 1e-8);
    let sys = brownian_eigensystem(50).unwrap();
    let g = Grid::new(1, 128, Domain::Box01, Measure::Lebesgue).unwrap();
    assert!(gram_defect(&sys, &g, 50) < 1e-8);
}

#[test]
fn rbf_orthonormality_under_gaussian_measure() {
    let sys = rbf_eigensystem_1d(1.0, 1.0, 30).unwrap();
    let g = Grid::new(1, 1601, Domain::Interval { half_width: 12.0 }, Measure::Gaussian { variance: 1.0 }).unwrap();
    assert!(gram_defect(&sys, &g, 30) < 1e-8);
    let sys = rbf_eigensystem_nd(0.5, 0.2, 2, 20).unwrap();
    let g = Grid::new(2, 241, Domain::Interval { half_width: 4.0 }, Measure::Gaussian { variance: 0.2 }).unwrap();
    assert!(gram_defect(&sys, &g, 20) < 1e-8);
}

#[test]
fn rbf_needs_matching_measure() {
    let sys = rbf_eigensystem_1d(1.0, 1.0, 3).unwrap();
    let g = Grid::new(1, 64, Domain::INTERVAL_PM1, Measure::Gaussian { variance: 0.5 }).unwrap();
    assert!(matches!(BasisTable::new(&sys, &g, 3), Err(Error::IncompatibleGrid(_))));
}

/// `∫ K(y, x) phi_j(x) dx` by quadrature against `lambda_j phi_j(y)`, relative L2 residual.
fn fredholm_residual(sys: &EigenSystem, grid: &Arc<Grid>, kernel: impl Fn(f64, f64) -> f64, j: usize) -> f64 {
    let x: Vec<f64> = grid.nodes().map(|p| p[0]).collect();
    let w = grid.weights();
    let phi: Vec<f64> = x.iter().map(|&xi| sys.eval(j, &[xi])).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, &ya) in x.iter().enumerate() {
        let k_phi: f64 = x.iter().zip(w).zip(&phi).map(|((&xi, &wi), &p)| kernel(ya, xi) * wi * p).sum();
        let want = sys.eigenvalue(j) * phi[a];
        num += w[a] * (k_phi - want).powi(2);
        den += w[a] * want.powi(2);
    }
    (num / den).sqrt()
}

#[test]
fn fredholm_residuals() {
    let g = Grid::new(1, 256, Domain::Box01, Measure::Lebesgue).unwrap();
    let br = brownian_eigensystem(10).unwrap();
    for j in 0..10 {
        let r = fredholm_residual(&br, &g, |s, t| s.min(t), j);
        assert!(r <= 1e-2, "brownian j={j}: {r}");
    }

    let (alpha, beta, gamma) = (1.0, 1.0, 1.0);
    let torus = torus_eigensystem(alpha, beta, gamma, 1, 10).unwrap();
    // Lattice sum for the kernel; the omitted tail is below 1e-7.
    let kernel = |s: f64, t: f64| {
        alpha / beta.powf(gamma)
            + (1..20_000)
                .map(|k| {
                    let kf = k as f64;
                    2.0 * alpha * (beta + 4.0 * PI * PI * kf * kf).powf(-gamma) * (2.0 * PI * kf * (s - t)).cos()
                })
                .sum::<f64>()
    };
    let gt = Grid::new(1, 256, Domain::Torus01, Measure::Lebesgue).unwrap();
    // Tabulate the translation-invariant kernel once by offset.
    let offsets: Vec<f64> = (0..256).map(|i| kernel(i as f64 / 256.0, 0.0)).collect();
    let kt = |s: f64, t: f64| {
        let d = (((s - t) * 256.0).round() as i64).rem_euclid(256) as usize;
        offsets[d]
    };
    for j in 0..10 {
        let r = fredholm_residual(&torus, &gt, kt, j);
        assert!(r <= 1e-2, "torus j={j}: {r}");
    }
}

#[test]
fn torus_examples() {
    let sys = torus_eigensystem(625.0, 25.0, 2.0, 1, 3).unwrap();
    assert!((sys.eigenvalue(0) - 1.0).abs() < 1e-12);
    assert!((sys.eigenvalue(1) - 0.150336).abs() < 5e-6);
    assert_eq!(sys.eigenvalue(1), sys.eigenvalue(2));
    assert!(matches!(torus_eigensystem(1.0, 1.0, 1.0, 2, 1), Err(Error::TraceCondition { .. })));
    assert!(torus_eigensystem(1.0, 1.0, 2.0, 1, 0).is_err());
}

#[test]
fn torus_multiplicities() {
    let sys = torus_eigensystem(1.0, 1.0, 2.0, 2, 200).unwrap();
    let mut by_norm: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut by_tuple: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for (j, l) in sys.labels().iter().enumerate() {
        let freq: Vec<usize> = l.factors.iter().map(|&f| (f + 1) / 2).collect();
        let n2 = freq.iter().map(|&k| (k * k) as i64).sum();
        by_norm.entry(n2).or_default().push(sys.eigenvalue(j));
        *by_tuple.entry(freq).or_default() += 1;
    }
    // The last level set may be cut off by the stored count.
    let last = *by_norm.keys().last().unwrap();
    for (n2, lams) in &by_norm {
        assert!(lams.iter().all(|&l| l == lams[0]), "eigenvalue depends only on |k|^2");
        if *n2 < last {
            let lattice_points =
                (-20i64..=20).flat_map(|a| (-20i64..=20).map(move |b| a * a + b * b)).filter(|v| v == n2).count();
            assert_eq!(lams.len(), lattice_points, "|k|^2 = {n2}");
        }
    }
    let last_tuple_norm = |t: &Vec<usize>| t.iter().map(|&k| (k * k) as i64).sum::<i64>();
    for (tuple, count) in &by_tuple {
        if last_tuple_norm(tuple) < last {
            let nonzero = tuple.iter().filter(|&&k| k > 0).count();
            assert_eq!(*count, 1 << nonzero, "{tuple:?}");
            assert!(*count <= 4);
        }
    }
}

#[test]
fn box_examples() {
    let sys = dirichlet_box_eigensystem(2500.0, 1.0, 2.0, 2, 1).unwrap();
    assert!((sys.eigenvalue(0) - 5.8125).abs() < 1e-4);
    let x = [0.3, 0.6];
    let want = 2.0 * (PI * 0.3).sin() * (PI * 0.6).sin();
    assert!((sys.eval(0, &x) - want).abs() < 1e-14);

    let sys = dirichlet_box_eigensystem(1.0, 1.0, 1.5, 2, 3).unwrap();
    assert!((sys.eigenvalue(0) - (1.0 + 2.0 * PI * PI).powf(-1.5)).abs() < 1e-15);
    let second = (1.0 + 5.0 * PI * PI).powf(-1.5);
    assert!((sys.eigenvalue(1) - second).abs() < 1e-15);
    assert!((sys.eigenvalue(2) - second).abs() < 1e-15);
    assert!(dirichlet_box_eigensystem(1.0, 1.0, 0.5, 1, 1).is_err());
}

#[test]
fn brownian_examples() {
    let sys = brownian_eigensystem(2).unwrap();
    assert!((sys.eigenvalue(0) - 0.405285).abs() < 1e-6);
    assert!((sys.eigenvalue(1) - 0.0450316).abs() < 1e-7);
    let full = brownian_eigensystem(100_000).unwrap();
    let stored: f64 = full.eigenvalues().iter().sum();
    assert!((stored - 0.5).abs() < 1e-3);
    assert!((full.tail_sum(0).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn rbf_examples() {
    let sys = rbf_eigensystem_1d(1.0, 1.0, 2).unwrap();
    assert!((sys.eigenvalue(0) - 0.618034).abs() < 1e-6);
    assert!((sys.eigenvalue(1) - 0.236068).abs() < 1e-6);
    let nd = rbf_eigensystem_nd(1.0, 1.0, 2, 3).unwrap();
    assert!((nd.eigenvalue(0) - 0.618034f64.powi(2)).abs() < 1e-6);
    assert!((nd.eigenvalue(1) - 0.145898).abs() < 1e-6);
    assert_eq!(nd.eigenvalue(1), nd.eigenvalue(2));
    assert!(rbf_eigensystem_1d(-1.0, 1.0, 2).is_err());
    assert!(rbf_eigensystem_1d(1.0, 0.0, 2).is_err());
}

#[test]
fn mercer_partial_sums() {
    let sys = brownian_eigensystem(1000).unwrap();
    assert_eq!(sys.kernel_partial_sum(&[0.5], &[0.5], 0).unwrap(), 0.0);
    assert!((sys.kernel_partial_sum(&[0.5], &[0.5], 1000).unwrap() - 0.5).abs() < 1e-3);
    assert!((sys.kernel_partial_sum(&[0.25], &[0.75], 1000).unwrap() - 0.25).abs() < 1e-3);
    assert!(matches!(
        sys.kernel_partial_sum(&[0.5], &[0.5], 1001),
        Err(Error::SpectrumExhausted { .. })
    ));
    let mut prev = 0.0;
    for m in [1, 2, 5, 10, 100, 1000] {
        let s = sys.kernel_partial_sum(&[0.7], &[0.7], m).unwrap();
        assert!(s >= prev);
        prev = s;
    }
}

#[test]
fn tail_sums() {
    let sys = brownian_eigensystem(10).unwrap();
    assert!((sys.tail_sum(0).unwrap() - 0.5).abs() < 1e-3);
    assert!((sys.tail_sum(1).unwrap() - 0.0947153).abs() < 1e-3);
    let mut prev = f64::INFINITY;
    for n in [0, 1, 10, 100, 1000, 100_000] {
        let t = sys.tail_sum(n).unwrap();
        assert!(t < prev && t >= 0.0);
        prev = t;
    }
    assert!(prev < 1e-5);
}

#[test]
fn nystrom_examples() {
    let rbf = nystrom_eigensystem(
        kernels::rbf(1.0),
        Measure::Gaussian { variance: 1.0 },
        Domain::Interval { half_width: 1e3 },
        1,
        2000,
        1,
        1,
    )
    .unwrap();
    assert!((rbf.eigenvalue(0) / 0.618034 - 1.0).abs() < 0.05);
    let br = nystrom_eigensystem(kernels::brownian(), Measure::Lebesgue, Domain::Box01, 1, 2000, 1, 1).unwrap();
    assert!((br.eigenvalue(0) / (4.0 / (PI * PI)) - 1.0).abs() < 0.05);
    let zero = nystrom_eigensystem(kernels::zero(), Measure::Lebesgue, Domain::Box01, 1, 20, 2, 1).unwrap();
    assert!(zero.eigenvalues().iter().all(|&l| l == 0.0));
    assert!(nystrom_eigensystem(kernels::brownian(), Measure::Lebesgue, Domain::Box01, 1, 3, 4, 1).is_err());
}

#[test]
fn nystrom_orthonormal_on_its_samples() {
    let sys = nystrom_eigensystem(kernels::brownian(), Measure::Lebesgue, Domain::Box01, 1, 1000, 8, 5).unwrap();
    let SystemKind::Nystrom(ny) = sys.kind() else { panic!("expected a Nystrom system") };
    let n = ny.sample_count() as f64;
    let values: Vec<Vec<f64>> = (0..8).map(|j| ny.sample_values(j)).collect();
    for i in 0..8 {
        for j in 0..8 {
            let ip: f64 = values[i].iter().zip(&values[j]).map(|(a, b)| a * b).sum::<f64>() * ny.mass() / n;
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-3, "({i},{j}): {ip}");
        }
    }
    // Off the sample the extension is orthonormal only up to sampling error.
    let g = Grid::new(1, 1001, Domain::Box01, Measure::Lebesgue).unwrap();
    assert!(gram_defect(&sys, &g, 5) < 0.15);
}

#[test]
fn nystrom_indefinite_kernel() {
    let k: activeop::kernels::KernelFn = Arc::new(|x: &[f64], y: &[f64]| (x[0] - y[0]).powi(2) - 0.3);
    let err = nystrom_eigensystem(k, Measure::Lebesgue, Domain::Box01, 1, 100, 2, 1).unwrap_err();
    assert!(matches!(err, Error::IndefiniteKernel { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rbf_geometric_bound(l in 0.05f64..5.0, s2 in 0.01f64..10.0) {
        let p = RbfEigParams::new(l, s2).unwrap();
        let sys = rbf_eigensystem_1d(l, s2, 40).unwrap();
        for (j, &lam) in sys.eigenvalues().iter().enumerate() {
            prop_assert!(lam <= p.ratio().powi(j as i32) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn analytic_spectra_sorted(gamma in 1.01f64..4.0, beta in 0.1f64..10.0, dim in 1usize..=2) {
        for sys in [
            torus_eigensystem(1.0, beta, gamma, dim, 60).unwrap(),
            dirichlet_box_eigensystem(1.0, beta, gamma, dim, 60).unwrap(),
        ] {
            prop_assert!(sys.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(sys.eigenvalues().iter().all(|&l| l > 0.0));
            let t0 = sys.tail_sum(0).unwrap();
            let t1 = sys.tail_sum(30).unwrap();
            prop_assert!(t1 < t0 && t1 >= 0.0);
        }
    }
}
