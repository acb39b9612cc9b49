//! Periodic collocated grids and the scalar / tensor grid functions living on them.
//!
//! Nodes are stored in row-major order with axis order (x, y, z): the last
//! axis varies fastest. Tensor fields store only their independent entries;
//! the full `d x d` matrix at a node is reconstructed on demand.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Full matrix view of a tensor at one node. Only the leading `d x d` block is used.
pub type Mat = [[f64; 3]; 3];

/// Uniform periodic grid on `[0, L)^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    nodes: usize,
    length: f64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, nodes: usize, length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param("dim", format!("must be 2 or 3, got {dim}")));
        }
        if nodes < 2 {
            return Err(Error::param("nodes", format!("need at least 2 nodes per axis, got {nodes}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::param("length", format!("must be positive and finite, got {length}")));
        }
        Ok(Self { dim, nodes, length })
    }

    /// `[0, 2π)^d` with `nodes` points per axis.
    pub fn periodic_box(dim: usize, nodes: usize) -> Result<Self> {
        Self::new(dim, nodes, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.nodes as f64
    }

    /// Total number of nodes, `J^d`.
    pub fn len(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d` of the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Stride of `axis` in the flat node array.
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes.pow((self.dim - 1 - axis) as u32)
    }

    /// Integer coordinate of node `idx` along `axis`.
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.nodes
    }

    /// Flat index of the node at integer coordinates `ijk`, wrapping every axis.
    pub fn index(&self, ijk: &[isize]) -> usize {
        let j = self.nodes as isize;
        ijk.iter()
            .take(self.dim)
            .fold(0usize, |acc, &i| acc * self.nodes + i.rem_euclid(j) as usize)
    }

    /// Flat index of the node `offset` steps away from `idx` along `axis` (periodic).
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let i = (idx / stride) % self.nodes;
        let shifted = (i as isize + offset).rem_euclid(self.nodes as isize) as usize;
        idx + shifted * stride - i * stride
    }

    /// Physical position of node `idx` (unused trailing entries are zero).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [0.0; 3];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.coord(idx, axis) as f64 * h;
        }
        x
    }

    pub(crate) fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Common surface of grid functions: a list of scalar component fields plus the
/// metric that turns component products into the full Frobenius contraction.
pub trait GridFunction: Clone + Send + Sync {
    fn grid(&self) -> &PeriodicGrid;
    fn components(&self) -> &[ScalarField];
    fn components_mut(&mut self) -> &mut [ScalarField];

    /// Nonzero entries `(a, b, w)` of the symmetric component metric, so that the
    /// pointwise contraction `Σ_ij X^ij Y^ij` equals `Σ w X_a Y_b`.
    fn metric(&self) -> &'static [(usize, usize, f64)];

    /// A new field of the same kind built from transformed components.
    fn map_components(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self;

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        let mut out = self.clone();
        for (c, o) in out.components_mut().iter_mut().zip(other.components()) {
            for (x, y) in c.data.iter_mut().zip(&o.data) {
                *x = f(*x, *y);
            }
        }
        out
    }

    fn scaled(&self, alpha: f64) -> Self {
        self.map_components(|c| c.map(|x| alpha * x))
    }

    /// `self + alpha * other`.
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self.zip_with(other, move |x, y| x + alpha * y)
    }

    fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x - y)
    }

    /// Pointwise contraction `Σ_ij X^ij Y^ij` at node `idx`.
    fn contract_at(&self, other: &Self, idx: usize) -> f64 {
        let (x, y) = (self.components(), other.components());
        self.metric()
            .iter()
            .map(|&(a, b, w)| w * x[a].data[idx] * y[b].data[idx])
            .sum()
    }

    /// Largest absolute value over all stored entries.
    fn max_abs_entry(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.data.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.data.iter().all(|x| x.is_finite()))
    }
}

/// One real value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_vec(grid: PeriodicGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::param(
                "data",
                format!("expected {} values, got {}", grid.len(), data.len()),
            ));
        }
        Ok(Self { grid, data })
    }

    /// Sample `f` at every node position.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Cyclic shift by a lattice vector: `out[i] = self[i - shift]`.
    pub fn shifted(&self, shift: &[isize]) -> Self {
        let g = self.grid;
        let mut out = Self::zeros(g);
        for idx in 0..g.len() {
            let mut src = idx;
            for (axis, &s) in shift.iter().enumerate().take(g.dim) {
                src = g.neighbor(src, axis, -s);
            }
            out.data[idx] = self.data[src];
        }
        out
    }
}

impl GridFunction for ScalarField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn components(&self) -> &[ScalarField] {
        std::slice::from_ref(self)
    }

    fn components_mut(&mut self) -> &mut [ScalarField] {
        std::slice::from_mut(self)
    }

    fn metric(&self) -> &'static [(usize, usize, f64)] {
        &[(0, 0, 1.0)]
    }

    fn map_components(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        f(self)
    }
}

// Metrics for the independent-entry layouts below.
const Q2_METRIC: &[(usize, usize, f64)] = &[(0, 0, 2.0), (1, 1, 2.0)];
// (Q11, Q12, Q13, Q22, Q23) with Q33 = -Q11 - Q22.
const Q3_METRIC: &[(usize, usize, f64)] = &[
    (0, 0, 2.0),
    (3, 3, 2.0),
    (0, 3, 1.0),
    (3, 0, 1.0),
    (1, 1, 2.0),
    (2, 2, 2.0),
    (4, 4, 2.0),
];
// (T11, T12, T22)
const S2_METRIC: &[(usize, usize, f64)] = &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 1.0)];
// (T11, T12, T13, T22, T23, T33)
const S3_METRIC: &[(usize, usize, f64)] = &[
    (0, 0, 1.0),
    (1, 1, 2.0),
    (2, 2, 2.0),
    (3, 3, 1.0),
    (4, 4, 2.0),
    (5, 5, 1.0),
];

/// Index of entry `(i, j)` in the packed upper-triangular symmetric layout.
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row offsets: 2D [0, 2], 3D [0, 3, 5]
    let row = match (dim, i) {
        (_, 0) => 0,
        (2, 1) => 2,
        (3, 1) => 3,
        (3, 2) => 5,
        _ => unreachable!("sym_index out of range"),
    };
    row + (j - i)
}

/// Symmetric traceless tensor per node: `(Q11, Q12)` in 2D,
/// `(Q11, Q12, Q13, Q22, Q23)` in 3D.
#[derive(Clone, Debug, PartialEq)]
pub struct QTensorField {
    grid: PeriodicGrid,
    comps: Vec<ScalarField>,
}

impl QTensorField {
    pub fn component_count(dim: usize) -> usize {
        if dim == 2 {
            2
        } else {
            5
        }
    }

    pub fn component_names(dim: usize) -> &'static [&'static str] {
        if dim == 2 {
            &["Q11", "Q12"]
        } else {
            &["Q11", "Q12", "Q13", "Q22", "Q23"]
        }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        let n = Self::component_count(grid.dim());
        Self { grid, comps: vec![ScalarField::zeros(grid); n] }
    }

    pub fn from_components(grid: PeriodicGrid, comps: Vec<ScalarField>) -> Result<Self> {
        if comps.len() != Self::component_count(grid.dim()) {
            return Err(Error::param(
                "components",
                format!("expected {} tensor components, got {}", Self::component_count(grid.dim()), comps.len()),
            ));
        }
        for c in &comps {
            grid.check_same(c.grid())?;
        }
        Ok(Self { grid, comps })
    }

    /// Build from a pointwise full-matrix function; only the independent
    /// entries are read, so the result is symmetric and traceless by construction.
    pub fn from_matrix_fn(grid: PeriodicGrid, f: impl Fn(usize) -> Mat) -> Self {
        let mut q = Self::zeros(grid);
        for idx in 0..grid.len() {
            q.set_matrix(idx, &f(idx));
        }
        q
    }

    /// Reconstructed full matrix at node `idx`.
    pub fn matrix(&self, idx: usize) -> Mat {
        let c = |k: usize| self.comps[k].data[idx];
        let mut m = [[0.0; 3]; 3];
        if self.grid.dim() == 2 {
            m[0][0] = c(0);
            m[1][1] = -c(0);
            m[0][1] = c(1);
            m[1][0] = c(1);
        } else {
            m[0][0] = c(0);
            m[0][1] = c(1);
            m[0][2] = c(2);
            m[1][1] = c(3);
            m[1][2] = c(4);
            m[2][2] = -c(0) - c(3);
            m[1][0] = m[0][1];
            m[2][0] = m[0][2];
            m[2][1] = m[1][2];
        }
        m
    }

    /// Store the independent entries of `m` (assumed symmetric and traceless).
    pub fn set_matrix(&mut self, idx: usize, m: &Mat) {
        let slots: &[(usize, usize)] = if self.grid.dim() == 2 {
            &[(0, 0), (0, 1)]
        } else {
            &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)]
        };
        for (k, &(i, j)) in slots.iter().enumerate() {
            self.comps[k].data[idx] = m[i][j];
        }
    }
}

impl GridFunction for QTensorField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    fn metric(&self) -> &'static [(usize, usize, f64)] {
        if self.grid.dim() == 2 {
            Q2_METRIC
        } else {
            Q3_METRIC
        }
    }

    fn map_components(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        Self { grid: self.grid, comps: self.comps.iter().map(f).collect() }
    }
}

/// Symmetric (not necessarily traceless) tensor per node, packed upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    grid: PeriodicGrid,
    comps: Vec<ScalarField>,
}

impl SymTensorField {
    pub fn component_count(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        let n = Self::component_count(grid.dim());
        Self { grid, comps: vec![ScalarField::zeros(grid); n] }
    }

    pub fn from_components(grid: PeriodicGrid, comps: Vec<ScalarField>) -> Result<Self> {
        if comps.len() != Self::component_count(grid.dim()) {
            return Err(Error::param("components", "wrong symmetric tensor component count"));
        }
        for c in &comps {
            grid.check_same(c.grid())?;
        }
        Ok(Self { grid, comps })
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[sym_index(self.grid.dim(), i, j)]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        let k = sym_index(self.grid.dim(), i, j);
        &mut self.comps[k]
    }

    pub fn matrix(&self, idx: usize) -> Mat {
        let d = self.grid.dim();
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.comps[sym_index(d, i, j)].data[idx];
            }
        }
        m
    }

    pub fn trace(&self) -> ScalarField {
        let d = self.grid.dim();
        let mut t = ScalarField::zeros(self.grid);
        for k in 0..d {
            for (x, y) in t.data.iter_mut().zip(&self.entry(k, k).data) {
                *x += y;
            }
        }
        t
    }
}

impl GridFunction for SymTensorField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    fn metric(&self) -> &'static [(usize, usize, f64)] {
        if self.grid.dim() == 2 {
            S2_METRIC
        } else {
            S3_METRIC
        }
    }

    fn map_components(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        Self { grid: self.grid, comps: self.comps.iter().map(f).collect() }
    }
}

const UNIT_TOL: f64 = 1e-12;

/// `Q = n nᵀ - I/d` from a unit director field given as `d` scalar components.
pub fn q_from_director(grid: PeriodicGrid, director: &[ScalarField]) -> Result<QTensorField> {
    let d = grid.dim();
    if director.len() != d {
        return Err(Error::param("director", format!("need {d} components, got {}", director.len())));
    }
    for c in director {
        grid.check_same(c.grid())?;
    }
    let mut q = QTensorField::zeros(grid);
    for idx in 0..grid.len() {
        let mut n = [0.0; 3];
        for (k, nk) in n.iter_mut().enumerate().take(d) {
            *nk = director[k].data[idx];
        }
        let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NonUnitDirector { node: idx, norm });
        }
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = n[i] * n[j] - if i == j { 1.0 / d as f64 } else { 0.0 };
            }
        }
        q.set_matrix(idx, &m);
    }
    Ok(q)
}

/// Pointwise Frobenius norm of the reconstructed full matrix.
pub fn frobenius_pointwise<F: GridFunction>(t: &F) -> ScalarField {
    let mut out = ScalarField::zeros(*t.grid());
    for (idx, v) in out.data.iter_mut().enumerate() {
        *v = t.contract_at(t, idx).max(0.0).sqrt();
    }
    out
}

/// `T - (tr T / d) I` per node.
pub fn deviatoric(t: &SymTensorField) -> QTensorField {
    let grid = *t.grid();
    let d = grid.dim();
    let tr = t.trace();
    let mut q = QTensorField::zeros(grid);
    for idx in 0..grid.len() {
        let mut m = t.matrix(idx);
        let shift = tr.data[idx] / d as f64;
        for (i, row) in m.iter_mut().enumerate().take(d) {
            row[i] -= shift;
        }
        q.set_matrix(idx, &m);
    }
    q
}

/// Lift a traceless field into the symmetric layout.
pub fn q_as_sym(q: &QTensorField) -> SymTensorField {
    let grid = *q.grid();
    let d = grid.dim();
    let mut t = SymTensorField::zeros(grid);
    for idx in 0..grid.len() {
        let m = q.matrix(idx);
        for i in 0..d {
            for j in i..d {
                t.entry_mut(i, j).data[idx] = m[i][j];
            }
        }
    }
    t
}

/// `M = Q / s₊ + I / d` per node.
pub fn m_tensor(q: &QTensorField, s_plus: f64) -> Result<SymTensorField> {
    if !(s_plus > 0.0 && s_plus.is_finite()) {
        return Err(Error::param("s_plus", format!("must be positive, got {s_plus}")));
    }
    let d = q.grid().dim();
    let mut m = q_as_sym(q).scaled(1.0 / s_plus);
    for k in 0..d {
        for x in m.entry_mut(k, k).data.iter_mut() {
            *x += 1.0 / d as f64;
        }
    }
    Ok(m)
}

/// Trace of a reconstructed tensor at `idx`.
pub fn trace_at(m: &Mat, dim: usize) -> f64 {
    (0..dim).map(|i| m[i][i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid2(n: usize) -> PeriodicGrid {
        PeriodicGrid::periodic_box(2, n).unwrap()
    }

    #[test]
    fn grid_spacing_and_wrap() {
        let g = PeriodicGrid::new(3, 8, 2.0 * PI).unwrap();
        assert!((g.spacing() * 8.0 - 2.0 * PI).abs() <= f64::EPSILON * 8.0);
        assert_eq!(g.len(), 512);
        assert_eq!(g.index(&[-1, 0, 8]), g.index(&[7, 0, 0]));
        let idx = g.index(&[7, 3, 5]);
        assert_eq!(g.neighbor(idx, 0, 1), g.index(&[0, 3, 5]));
        assert_eq!(g.neighbor(idx, 2, -6), g.index(&[7, 3, 7]));
        assert!(PeriodicGrid::new(1, 8, 1.0).is_err());
        assert!(PeriodicGrid::new(2, 8, 0.0).is_err());
    }

    #[test]
    fn director_wave_matches_closed_form() {
        let g = grid2(16);
        let n1 = ScalarField::from_fn(g, |x| (x[0] + x[1]).cos());
        let n2 = ScalarField::from_fn(g, |x| (x[0] + x[1]).sin());
        let q = q_from_director(g, &[n1, n2]).unwrap();
        for idx in 0..g.len() {
            let x = g.position(idx);
            let (c, s) = ((x[0] + x[1]).cos(), (x[0] + x[1]).sin());
            let m = q.matrix(idx);
            assert_abs_diff_eq!(m[0][0], c * c - 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m[0][1], c * s, epsilon = 1e-15);
            assert_abs_diff_eq!(m[1][1], s * s - 0.5, epsilon = 1e-15);
        }
        let f = frobenius_pointwise(&q);
        for v in &f.data {
            assert_abs_diff_eq!(*v, 0.5f64.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn axis_aligned_directors() {
        let g = grid2(4);
        let q = q_from_director(g, &[ScalarField::constant(g, 1.0), ScalarField::zeros(g)]).unwrap();
        let m = q.matrix(3);
        assert_eq!((m[0][0], m[1][1], m[0][1]), (0.5, -0.5, 0.0));

        let g3 = PeriodicGrid::periodic_box(3, 4).unwrap();
        let z = ScalarField::zeros(g3);
        let q3 = q_from_director(g3, &[z.clone(), z, ScalarField::constant(g3, 1.0)]).unwrap();
        let m = q3.matrix(7);
        assert_abs_diff_eq!(m[0][0], -1.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(m[1][1], -1.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(m[2][2], 2.0 / 3.0, epsilon = 1e-16);
        for v in &frobenius_pointwise(&q3).data {
            assert_abs_diff_eq!(*v, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn non_unit_director_rejected() {
        let g = grid2(4);
        let err = q_from_director(g, &[ScalarField::constant(g, 1.1), ScalarField::zeros(g)]).unwrap_err();
        assert!(matches!(err, Error::NonUnitDirector { node: 0, .. }));
    }

    #[test]
    fn frobenius_examples() {
        let g = grid2(2);
        let q = QTensorField::from_components(g, vec![ScalarField::constant(g, 0.5), ScalarField::zeros(g)]).unwrap();
        assert_abs_diff_eq!(frobenius_pointwise(&q).data[0], 0.5f64.sqrt(), epsilon = 1e-16);
        assert_eq!(frobenius_pointwise(&QTensorField::zeros(g)).data[1], 0.0);
        let q = QTensorField::from_components(g, vec![ScalarField::zeros(g), ScalarField::constant(g, 1.0)]).unwrap();
        assert_abs_diff_eq!(frobenius_pointwise(&q).data[0], 2f64.sqrt(), epsilon = 1e-16);
    }

    fn sym_const(g: PeriodicGrid, m: Mat) -> SymTensorField {
        let mut t = SymTensorField::zeros(g);
        let d = g.dim();
        for i in 0..d {
            for j in i..d {
                *t.entry_mut(i, j) = ScalarField::constant(g, m[i][j]);
            }
        }
        t
    }

    #[test]
    fn deviatoric_examples() {
        let g = grid2(2);
        let id = sym_const(g, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
        assert_eq!(deviatoric(&id).max_abs_entry(), 0.0);
        let t = sym_const(g, [[2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0; 3]]);
        let m = deviatoric(&t).matrix(0);
        assert_eq!((m[0][0], m[1][1]), (1.0, -1.0));

        let g3 = PeriodicGrid::periodic_box(3, 2).unwrap();
        let t = sym_const(g3, [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]);
        let m = deviatoric(&t).matrix(5);
        assert_eq!((m[0][0], m[1][1], m[2][2]), (-1.0, 0.0, 1.0));
    }

    #[test]
    fn m_tensor_examples() {
        let g = grid2(2);
        let m = m_tensor(&QTensorField::zeros(g), 1.0).unwrap();
        assert_eq!(m.matrix(0)[0][0], 0.5);
        assert_abs_diff_eq!(m.contract_at(&m, 0), 0.5, epsilon = 1e-16);

        let sp = 0.8;
        let q = QTensorField::from_components(g, vec![ScalarField::constant(g, sp / 2.0), ScalarField::zeros(g)]).unwrap();
        let m = m_tensor(&q, sp).unwrap().matrix(1);
        assert_abs_diff_eq!(m[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1][1], 0.0, epsilon = 1e-15);

        let q = QTensorField::from_components(g, vec![ScalarField::zeros(g), ScalarField::constant(g, sp)]).unwrap();
        assert_abs_diff_eq!(m_tensor(&q, sp).unwrap().matrix(2)[0][1], 1.0, epsilon = 1e-15);
        assert!(m_tensor(&q, 0.0).is_err());
        assert!(m_tensor(&q, -1.0).is_err());
    }

    #[test]
    fn m_tensor_has_unit_trace() {
        let g3 = PeriodicGrid::periodic_box(3, 3).unwrap();
        let q = QTensorField::from_matrix_fn(g3, |i| {
            let a = i as f64 * 0.1;
            [[a, 0.3, -0.2], [0.3, -2.0 * a, 0.1], [-0.2, 0.1, a]]
        });
        let m = m_tensor(&q, 0.7).unwrap();
        for v in &m.trace().data {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn shifted_roundtrip() {
        let g = grid2(5);
        let f = ScalarField::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let back = f.shifted(&[2, -3]).shifted(&[-2, 3]);
        assert_eq!(f, back);
    }
}
