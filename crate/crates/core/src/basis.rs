//! Eigenfunction values tabulated on a grid.
//!
//! Two-dimensional tensor families are stored as one factor table per axis, so
//! synthesis and projection cost `O(F N^2)` instead of `O(m N^2)` and the table
//! never materializes `m` full fields.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::eigen::{EigenSystem, SystemKind};
use crate::error::{Error, Result};
use crate::grid::{dot_weighted, Domain, FieldFunction, Grid, Layout, Measure};

#[derive(Debug, Clone)]
enum Repr {
    /// Row `j` holds `phi_j` at every node.
    Dense(Vec<Vec<f64>>),
    /// `factors[(f, i)]` is the 1d factor `f` at axis node `i`; `labels[j]` is `(f1, f2)`.
    Separable { factors: DMatrix<f64>, labels: Vec<(usize, usize)> },
}

/// The first `m` eigenfunctions of a system evaluated on a grid.
#[derive(Debug, Clone)]
pub struct BasisTable {
    grid: Arc<Grid>,
    repr: Repr,
    len: usize,
}

/// Checks that `sys` can be evaluated faithfully on `grid` with `m` functions.
pub fn check_compatible(sys: &EigenSystem, grid: &Grid, m: usize) -> Result<()> {
    if m > sys.len() {
        return Err(Error::SpectrumExhausted { requested: m, available: sys.len() });
    }
    if grid.dim() != sys.dim() {
        return Err(Error::IncompatibleGrid(format!(
            "{}d system on a {}d grid",
            sys.dim(),
            grid.dim()
        )));
    }
    let ok_domain = match sys.kind() {
        SystemKind::Torus { .. } => grid.domain() == Domain::Torus01,
        SystemKind::DirichletBox { .. } | SystemKind::Brownian => grid.domain() == Domain::Box01,
        SystemKind::Rbf(p) => {
            matches!(grid.domain(), Domain::Interval { .. })
                && matches!(grid.measure(), Measure::Gaussian { variance } if (variance - p.variance).abs() <= 1e-12 * p.variance)
        }
        SystemKind::Nystrom(_) => grid.domain().same_kind(&sys.domain()),
    };
    if !ok_domain {
        return Err(Error::IncompatibleGrid(format!(
            "{} system does not live on {:?} with {:?}",
            sys.kind().name(),
            grid.domain(),
            grid.measure()
        )));
    }
    if m == 0 {
        return Ok(());
    }
    if let Some(freq) = sys.max_frequency(m) {
        let n = grid.points_per_dim();
        let limit = match (sys.kind(), grid.layout()) {
            (SystemKind::Torus { .. }, _) => (n - 1) / 2,
            (_, Layout::Lattice) => n.saturating_sub(2),
            (_, Layout::Midpoint) => n - 1,
        };
        if freq > limit {
            return Err(Error::IncompatibleGrid(format!(
                "frequency {freq} exceeds the resolvable limit {limit} of a {n}-point grid"
            )));
        }
    }
    Ok(())
}

impl BasisTable {
    pub fn new(sys: &EigenSystem, grid: &Arc<Grid>, m: usize) -> Result<Self> {
        check_compatible(sys, grid, m)?;
        let repr = if sys.is_tensor() && sys.dim() == 2 && m > 0 {
            let labels: Vec<(usize, usize)> =
                sys.labels()[..m].iter().map(|l| (l.factors[0], l.factors[1])).collect();
            let fmax = labels.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
            let axis = grid.axis();
            let mut factors = DMatrix::<f64>::zeros(fmax + 1, axis.len());
            for (i, &x) in axis.iter().enumerate() {
                for (f, v) in sys.kind().factor_column(fmax, x).into_iter().enumerate() {
                    factors[(f, i)] = v;
                }
            }
            Repr::Separable { factors, labels }
        } else if sys.is_tensor() && m > 0 {
            let labels = &sys.labels()[..m];
            let fmax = labels.iter().map(|l| l.factors[0]).max().unwrap_or(0);
            let columns: Vec<Vec<f64>> = grid.axis().iter().map(|&x| sys.kind().factor_column(fmax, x)).collect();
            let rows = labels.iter().map(|l| columns.iter().map(|c| c[l.factors[0]]).collect()).collect();
            Repr::Dense(rows)
        } else {
            let rows = (0..m).map(|j| grid.nodes().map(|x| sys.eval(j, x)).collect()).collect();
            Repr::Dense(rows)
        };
        Ok(BasisTable { grid: grid.clone(), repr, len: m })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Node values of `phi_j`.
    pub fn values(&self, j: usize) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(rows) => rows[j].clone(),
            Repr::Separable { factors, labels } => {
                let (a, b) = labels[j];
                let n = factors.ncols();
                let mut out = Vec::with_capacity(n * n);
                for ix in 0..n {
                    let fx = factors[(a, ix)];
                    for iy in 0..n {
                        out.push(fx * factors[(b, iy)]);
                    }
                }
                out
            }
        }
    }

    pub fn field(&self, j: usize) -> FieldFunction {
        FieldFunction::from_parts(self.grid.clone(), self.values(j))
    }

    /// `sum_j coeffs[j] phi_j` for `coeffs.len() <= len()`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert!(coeffs.len() <= self.len, "more coefficients than basis functions");
        match &self.repr {
            Repr::Dense(rows) => {
                let mut out = vec![0.0; self.grid.len()];
                for (c, row) in coeffs.iter().zip(rows) {
                    if *c != 0.0 {
                        for (o, r) in out.iter_mut().zip(row) {
                            *o += c * r;
                        }
                    }
                }
                out
            }
            Repr::Separable { factors, labels } => {
                let f = factors.nrows();
                let mut cm = DMatrix::<f64>::zeros(f, f);
                for (c, &(a, b)) in coeffs.iter().zip(labels) {
                    cm[(a, b)] += c;
                }
                // V[ix, iy] = sum_{a,b} A[a, ix] C[a, b] A[b, iy]
                let v = factors.transpose() * cm * factors;
                row_major(&v)
            }
        }
    }

    /// Quadrature inner products `<v, phi_j>` for `j < m`.
    pub fn project(&self, values: &[f64], m: usize) -> Vec<f64> {
        assert!(m <= self.len);
        assert_eq!(values.len(), self.grid.len());
        match &self.repr {
            Repr::Dense(rows) => rows[..m].iter().map(|r| dot_weighted(values, r, self.grid.weights())).collect(),
            Repr::Separable { factors, labels } => {
                let n = factors.ncols();
                let w = self.grid.axis_weights();
                let mut aw = factors.clone();
                for i in 0..n {
                    aw.column_mut(i).scale_mut(w[i]);
                }
                let v = DMatrix::from_row_slice(n, n, values);
                let p = &aw * v * aw.transpose();
                labels[..m].iter().map(|&(a, b)| p[(a, b)]).collect()
            }
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
