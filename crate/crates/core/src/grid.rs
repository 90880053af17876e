//! Uniform tensor grids on the unit torus, the unit box, and centered
//! intervals, together with grid-valued functions and the quadrature used for
//! every inner product in the crate.
//!
//! Nodes are stored in row-major order with the first coordinate varying
//! slowest: node `ix * N + iy` sits at `(axis[ix], axis[iy])`. Quadrature
//! weights are tensor products of per-axis weights, which lets callers that
//! work with separable bases use the per-axis weights directly.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Periodic `[0,1]^d`.
    Torus01,
    /// Closed `[0,1]^d`.
    Box01,
    /// `[-half_width, half_width]^d`.
    Interval { half_width: f64 },
}

impl Domain {
    pub const INTERVAL_PM1: Domain = Domain::Interval { half_width: 1.0 };

    /// Lebesgue length of the domain along one axis.
    pub fn axis_length(&self) -> f64 {
        match self {
            Domain::Torus01 | Domain::Box01 => 1.0,
            Domain::Interval { half_width } => 2.0 * half_width,
        }
    }

    pub fn axis_bounds(&self) -> (f64, f64) {
        match self {
            Domain::Torus01 | Domain::Box01 => (0.0, 1.0),
            Domain::Interval { half_width } => (-half_width, *half_width),
        }
    }

    pub fn same_kind(&self, other: &Domain) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

/// Base measure, given as a density against Lebesgue measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Lebesgue,
    /// Centered Gaussian density with the given per-axis variance.
    Gaussian { variance: f64 },
}

impl Measure {
    /// Density of one axis at coordinate `x`.
    pub fn axis_density(&self, x: f64) -> f64 {
        match self {
            Measure::Lebesgue => 1.0,
            Measure::Gaussian { variance } => {
                (-x * x / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
        }
    }
}

/// Node placement for non-periodic domains. Periodic grids always use `k/N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Finite-difference lattice including both endpoints, trapezoid weights.
    #[default]
    Lattice,
    /// Cell midpoints, rectangle weights.
    Midpoint,
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    points_per_dim: usize,
    domain: Domain,
    measure: Measure,
    layout: Layout,
    axis: Vec<f64>,
    axis_weights: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points_per_dim == other.points_per_dim
            && self.domain == other.domain
            && self.measure == other.measure
            && self.layout == other.layout
    }
}

impl Grid {
    /// Builds a grid with the default [`Layout::Lattice`] placement.
    pub fn new(dim: usize, points_per_dim: usize, domain: Domain, measure: Measure) -> Result<Arc<Grid>> {
        Self::with_layout(dim, points_per_dim, domain, measure, Layout::Lattice)
    }

    pub fn with_layout(
        dim: usize,
        points_per_dim: usize,
        domain: Domain,
        measure: Measure,
        layout: Layout,
    ) -> Result<Arc<Grid>> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!("unsupported grid dimension {dim}")));
        }
        if points_per_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "points_per_dim must be at least 2, got {points_per_dim}"
            )));
        }
        if let Domain::Interval { half_width } = domain {
            if !(half_width > 0.0 && half_width.is_finite()) {
                return Err(Error::InvalidArgument(format!("interval half width must be positive, got {half_width}")));
            }
        }
        if let Measure::Gaussian { variance } = measure {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(Error::InvalidArgument(format!("gaussian variance must be positive, got {variance}")));
            }
        }

        let n = points_per_dim;
        let (lo, hi) = domain.axis_bounds();
        let len = hi - lo;
        let (axis, cell): (Vec<f64>, Vec<f64>) = match (domain, layout) {
            (Domain::Torus01, _) => ((0..n).map(|k| k as f64 / n as f64).collect(), vec![1.0 / n as f64; n]),
            (_, Layout::Lattice) => {
                let h = len / (n - 1) as f64;
                let axis = (0..n).map(|k| lo + k as f64 * h).collect();
                let mut w = vec![h; n];
                w[0] = 0.5 * h;
                w[n - 1] = 0.5 * h;
                (axis, w)
            }
            (_, Layout::Midpoint) => {
                let h = len / n as f64;
                ((0..n).map(|k| lo + (k as f64 + 0.5) * h).collect(), vec![h; n])
            }
        };
        let axis_weights: Vec<f64> = axis.iter().zip(&cell).map(|(&x, &w)| w * measure.axis_density(x)).collect();

        let total = n.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        if dim == 1 {
            nodes.extend_from_slice(&axis);
            weights.extend_from_slice(&axis_weights);
        } else {
            for ix in 0..n {
                for iy in 0..n {
                    nodes.push(axis[ix]);
                    nodes.push(axis[iy]);
                    weights.push(axis_weights[ix] * axis_weights[iy]);
                }
            }
        }

        Ok(Arc::new(Grid {
            dim,
            points_per_dim,
            domain,
            measure,
            layout,
            axis,
            axis_weights,
            nodes,
            weights,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One-dimensional node coordinates shared by every axis.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// One-dimensional weights (cell measure times density) shared by every axis.
    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    /// Lattice spacing along each axis.
    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    /// Whether node `i` lies on the boundary of a closed box or interval.
    pub fn is_boundary(&self, i: usize) -> bool {
        if self.domain == Domain::Torus01 || self.layout == Layout::Midpoint {
            return false;
        }
        let n = self.points_per_dim;
        let on_edge = |k: usize| k == 0 || k == n - 1;
        match self.dim {
            1 => on_edge(i),
            _ => on_edge(i / n) || on_edge(i % n),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}d/{} points/{:?} vs {}d/{} points/{:?}",
                self.dim, self.points_per_dim, self.domain, other.dim, other.points_per_dim, other.domain
            )))
        }
    }
}

/// A real function stored by its values at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct FieldFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl FieldFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite field value at node {i}")));
        }
        Ok(FieldFunction { grid, values })
    }

    /// Wraps values the caller has already validated.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        FieldFunction { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        FieldFunction { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, a: f64) -> FieldFunction {
        FieldFunction::from_parts(self.grid.clone(), self.values.iter().map(|v| a * v).collect())
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &FieldFunction) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn sub(&self, other: &FieldFunction) -> Result<FieldFunction> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &FieldFunction) -> Result<FieldFunction> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `x[,y],value` rows in node order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.grid.dim == 1 {
            w.write_record(["x", "value"])?;
        } else {
            w.write_record(["x", "y", "value"])?;
        }
        for (node, v) in self.grid.nodes().zip(&self.values) {
            let mut rec: Vec<String> = node.iter().map(|c| c.to_string()).collect();
            rec.push(v.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads values written by [`FieldFunction::write_csv`] onto `grid`. Node
    /// coordinates must match the grid to 1e-9.
    pub fn read_csv<R: Read>(grid: Arc<Grid>, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let dim = grid.dim;
        let headers = r.headers()?.clone();
        if headers.len() != dim + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} columns for a {dim}d field, found {}",
                dim + 1,
                headers.len()
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if i >= grid.len() {
                return Err(Error::InvalidArgument("more rows than grid nodes".into()));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("row {i}: {e}")))
            };
            for (c, expected) in grid.node(i).iter().enumerate() {
                let got = parse(&rec[c])?;
                if (got - expected).abs() > 1e-9 {
                    return Err(Error::GridMismatch(format!(
                        "row {i} coordinate {c} is {got}, grid node is {expected}"
                    )));
                }
            }
            values.push(parse(&rec[dim])?);
        }
        Self::new(grid, values)
    }
}

/// Quadrature inner product `sum f g w` over the shared grid.
pub fn inner_product(f: &FieldFunction, g: &FieldFunction) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    Ok(dot_weighted(&f.values, &g.values, &f.grid.weights))
}

pub fn l2_norm_sq(f: &FieldFunction) -> f64 {
    dot_weighted(&f.values, &f.values, &f.grid.weights)
}

pub fn l2_norm(f: &FieldFunction) -> f64 {
    l2_norm_sq(f).sqrt()
}

pub(crate) fn dot_weighted(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Arc<Grid> {
        Grid::new(1, n, Domain::Torus01, Measure::Lebesgue).unwrap()
    }

    #[test]
    fn torus_nodes_and_weights() {
        let g = torus(4);
        assert_eq!(g.axis(), &[0.0, 0.25, 0.5, 0.75]);
        assert!(g.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn box_grid_mass_and_count() {
        let g = Grid::new(2, 64, Domain::Box01, Measure::Lebesgue).unwrap();
        assert_eq!(g.len(), 4096);
        assert!((g.total_mass() - 1.0).abs() < 1e-13);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        let mid = Grid::with_layout(2, 10, Domain::Box01, Measure::Lebesgue, Layout::Midpoint).unwrap();
        assert!((mid.total_mass() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn interval_mass_is_two_to_the_dim() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 33, Domain::INTERVAL_PM1, Measure::Lebesgue).unwrap();
            assert!((g.total_mass() - 2f64.powi(dim as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(3, 8, Domain::Box01, Measure::Lebesgue).is_err());
        assert!(Grid::new(1, 1, Domain::Box01, Measure::Lebesgue).is_err());
        assert!(Grid::new(1, 0, Domain::Box01, Measure::Lebesgue).is_err());
        assert!(Grid::new(1, 8, Domain::Interval { half_width: -1.0 }, Measure::Lebesgue).is_err());
    }

    #[test]
    fn trig_orthonormality_on_torus() {
        let g = torus(256);
        let s = FieldFunction::from_fn(g.clone(), |x| 2f64.sqrt() * (2.0 * PI * x[0]).sin()).unwrap();
        let c = FieldFunction::from_fn(g.clone(), |x| 2f64.sqrt() * (2.0 * PI * x[0]).cos()).unwrap();
        assert!((inner_product(&s, &s).unwrap() - 1.0).abs() < 1e-10);
        assert!(inner_product(&s, &c).unwrap().abs() < 1e-10);
        assert_eq!(inner_product(&s, &FieldFunction::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn box_norms() {
        let g = Grid::new(2, 64, Domain::Box01, Measure::Lebesgue).unwrap();
        let one = FieldFunction::from_fn(g.clone(), |_| 1.0).unwrap();
        assert!((l2_norm_sq(&one) - 1.0).abs() < 1e-12);
        let ss = FieldFunction::from_fn(g.clone(), |x| (PI * x[0]).sin() * (PI * x[1]).sin()).unwrap();
        assert!((l2_norm_sq(&ss) - 0.25).abs() < 1e-3);
        assert_eq!(l2_norm_sq(&FieldFunction::zeros(g)), 0.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = FieldFunction::zeros(torus(8));
        let b = FieldFunction::zeros(torus(16));
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = torus(4);
        assert!(FieldFunction::new(g.clone(), vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(FieldFunction::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn boundary_detection() {
        let g = Grid::new(2, 4, Domain::Box01, Measure::Lebesgue).unwrap();
        let interior: Vec<usize> = (0..g.len()).filter(|&i| !g.is_boundary(i)).collect();
        assert_eq!(interior, vec![5, 6, 9, 10]);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(2, 5, Domain::Box01, Measure::Lebesgue).unwrap();
        let f = FieldFunction::from_fn(g.clone(), |x| x[0] * 3.0 - x[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,value\n"));
        let back = FieldFunction::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
    }
}
