//! Weighted networks, graph Laplacians and the ambient symmetric-matrix space.
//!
//! A graph Laplacian `L = D - A` of an undirected, loop-free network with
//! nonnegative weights is symmetric, has nonpositive off-diagonal entries and
//! zero row sums. The set of such matrices is a closed convex cone, so
//! nonnegative combinations of Laplacians are Laplacians again.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance used when validating matrices built inside this crate.
pub const INTERNAL_TOL: f64 = 1e-12;
/// Tolerance used when validating matrices read from files.
pub const FILE_TOL: f64 = 1e-9;

/// An undirected, loop-free network with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    labels: Vec<String>,
    weights: DMatrix<f64>,
}

impl WeightedNetwork {
    pub fn new(labels: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        let m = labels.len();
        if weights.nrows() != m || weights.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: weights.nrows().max(weights.ncols()),
            });
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate node label {a:?}"
                )));
            }
        }
        for i in 0..m {
            for j in 0..m {
                let w = weights[(i, j)];
                let invalid = |reason: &str| Error::InvalidNetwork {
                    i,
                    j,
                    reason: reason.to_string(),
                };
                if !w.is_finite() {
                    return Err(invalid("non-finite weight"));
                }
                if i == j && w != 0.0 {
                    return Err(invalid("nonzero diagonal (self-loop)"));
                }
                if w < 0.0 {
                    return Err(invalid("negative weight"));
                }
                if w != weights[(j, i)] {
                    return Err(invalid("asymmetric weights"));
                }
            }
        }
        Ok(Self { labels, weights })
    }

    /// Builds a network from `(i, j, w)` triples; each unordered pair may appear once.
    pub fn from_edges(labels: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let m = labels.len();
        let mut weights = DMatrix::zeros(m, m);
        let mut seen = DMatrix::from_element(m, m, false);
        for &(i, j, w) in edges {
            if i >= m || j >= m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: i.max(j) + 1,
                });
            }
            if i == j {
                return Err(Error::InvalidNetwork {
                    i,
                    j,
                    reason: "self-loop".into(),
                });
            }
            if seen[(i, j)] {
                return Err(Error::InvalidNetwork {
                    i,
                    j,
                    reason: "duplicate edge".into(),
                });
            }
            seen[(i, j)] = true;
            seen[(j, i)] = true;
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Self::new(labels, weights)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Edges with positive weight, `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let m = self.node_count();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

/// A dense symmetric matrix; symmetry is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in i + 1..n {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        gap: (matrix[(i, j)] - matrix[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(Self(matrix))
    }

    /// Replaces the matrix by `(M + Mᵀ) / 2`.
    pub fn symmetrize(mut matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        assert!(matrix.is_square(), "symmetrize needs a square matrix");
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        Self(matrix)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

impl From<GraphLaplacian> for SymmetricMatrix {
    fn from(l: GraphLaplacian) -> Self {
        SymmetricMatrix(l.matrix)
    }
}

/// A graph Laplacian: symmetric, nonpositive off-diagonal, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    matrix: DMatrix<f64>,
}

impl GraphLaplacian {
    /// Validates `matrix` against the Laplacian constraints at tolerance `tol`.
    pub fn from_matrix(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let report = validate_laplacian(&matrix, tol);
        if !report.is_valid() {
            return Err(Error::InvalidLaplacian(report.to_string()));
        }
        Ok(Self::from_matrix_unchecked(matrix))
    }

    /// Wraps `matrix`, forcing exact symmetry from its upper triangle.
    pub(crate) fn from_matrix_unchecked(mut matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        for i in 0..n {
            for j in i + 1..n {
                matrix[(j, i)] = matrix[(i, j)];
            }
        }
        Self { matrix }
    }

    /// Builds `L(a)` from upper-triangle edge weights `a_ij ≥ 0` listed in
    /// row-major `(i < j)` order.
    pub(crate) fn from_upper_weights(m: usize, weights: &[f64]) -> Self {
        debug_assert_eq!(weights.len(), m * (m - 1) / 2);
        let mut matrix = DMatrix::zeros(m, m);
        let mut e = 0;
        for i in 0..m {
            for j in i + 1..m {
                let w = weights[e];
                matrix[(i, j)] = -w;
                matrix[(j, i)] = -w;
                e += 1;
            }
        }
        for i in 0..m {
            let mut d = 0.0;
            for j in 0..m {
                if j != i {
                    d -= matrix[(i, j)];
                }
            }
            matrix[(i, i)] = d;
        }
        Self { matrix }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(m, m),
        }
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `Σ cᵢ·Lᵢ` for nonnegative coefficients; the result stays in the cone.
    pub fn combine(coefficients: &[f64], laplacians: &[&GraphLaplacian]) -> Result<Self> {
        assert_eq!(coefficients.len(), laplacians.len());
        let first = laplacians
            .first()
            .ok_or_else(|| Error::InsufficientData("empty combination".into()))?;
        let m = first.node_count();
        if let Some(&c) = coefficients
            .iter()
            .find(|c| !(**c >= 0.0) || !c.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "cone combination needs nonnegative finite coefficients, got {c}"
            )));
        }
        let mut out = DMatrix::zeros(m, m);
        for (&c, l) in coefficients.iter().zip(laplacians) {
            if l.node_count() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: l.node_count(),
                });
            }
            if c != 0.0 {
                out += &l.matrix * c;
            }
        }
        Ok(Self::from_matrix_unchecked(out))
    }

    /// Edge weights `w_ij = -l_ij` for `i < j` in row-major order.
    pub fn upper_weights(&self) -> Vec<f64> {
        let m = self.node_count();
        let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                out.push(-self.matrix[(i, j)]);
            }
        }
        out
    }
}

/// `L = D - A`.
pub fn laplacian_from_network(net: &WeightedNetwork) -> GraphLaplacian {
    let w = net.weights();
    let m = net.node_count();
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut degree = 0.0;
        for j in 0..m {
            if i != j {
                matrix[(i, j)] = -w[(i, j)];
                degree += w[(i, j)];
            }
        }
        matrix[(i, i)] = degree;
    }
    GraphLaplacian { matrix }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Square,
    Finite,
    Symmetry,
    OffDiagonalSign,
    RowSum,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintKind::Square => "square",
            ConstraintKind::Finite => "finite",
            ConstraintKind::Symmetry => "symmetry",
            ConstraintKind::OffDiagonalSign => "off-diagonal sign",
            ConstraintKind::RowSum => "row sum",
        };
        f.write_str(s)
    }
}

/// One violated constraint and its worst offender.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ConstraintKind,
    /// Row and column of the worst entry (column equals row for row sums).
    pub at: (usize, usize),
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ConstraintKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(
                f,
                "{} violated at ({}, {}): {:e}",
                v.kind, v.at.0, v.at.1, v.value
            )?;
        }
        Ok(())
    }
}

/// Checks the Laplacian constraints. `tol` is relative to `max(1, ‖mat‖_F)`.
pub fn validate_laplacian(mat: &DMatrix<f64>, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !mat.is_square() {
        report.violations.push(Violation {
            kind: ConstraintKind::Square,
            at: (mat.nrows(), mat.ncols()),
            value: f64::NAN,
        });
        return report;
    }
    if let Some(k) = mat.iter().position(|x| !x.is_finite()) {
        let n = mat.nrows();
        report.violations.push(Violation {
            kind: ConstraintKind::Finite,
            at: (k % n, k / n),
            value: mat[k],
        });
        return report;
    }
    let n = mat.nrows();
    let bound = tol * mat.norm().max(1.0);

    let mut worst_sym = (0.0, (0, 0));
    let mut worst_sign = (0.0, (0, 0));
    let mut worst_row = (0.0f64, (0, 0));
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let x = mat[(i, j)];
            row += x;
            if j > i {
                let gap = (x - mat[(j, i)]).abs();
                if gap > worst_sym.0 {
                    worst_sym = (gap, (i, j));
                }
            }
            if j != i && x > worst_sign.0 {
                worst_sign = (x, (i, j));
            }
        }
        if row.abs() > worst_row.0.abs() {
            worst_row = (row, (i, i));
        }
    }
    if worst_sym.0 > bound {
        report.violations.push(Violation {
            kind: ConstraintKind::Symmetry,
            at: worst_sym.1,
            value: worst_sym.0,
        });
    }
    if worst_sign.0 > bound {
        report.violations.push(Violation {
            kind: ConstraintKind::OffDiagonalSign,
            at: worst_sign.1,
            value: worst_sign.0,
        });
    }
    if worst_row.0.abs() > bound {
        report.violations.push(Violation {
            kind: ConstraintKind::RowSum,
            at: worst_row.1,
            value: worst_row.0,
        });
    }
    report
}

/// Divides `L` by its trace.
pub fn trace_normalize(l: &GraphLaplacian) -> Result<GraphLaplacian> {
    let t = l.trace();
    if !(t > 0.0) {
        return Err(Error::ZeroTrace);
    }
    Ok(GraphLaplacian::from_matrix_unchecked(&l.matrix / t))
}

/// Frobenius distance `‖L1 - L2‖`.
pub fn euclidean_distance(l1: &GraphLaplacian, l2: &GraphLaplacian) -> Result<f64> {
    frobenius_distance(l1.matrix(), l2.matrix())
}

pub(crate) fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("n{i}")).collect()
    }

    fn triangle() -> GraphLaplacian {
        let net = WeightedNetwork::from_edges(labels(3), &[(0, 1, 1.0), (0, 2, 2.0)]).unwrap();
        laplacian_from_network(&net)
    }

    #[test]
    fn laplacian_of_small_network() {
        let l = triangle();
        let expected = DMatrix::from_row_slice(3, 3, &[3., -1., -2., -1., 1., 0., -2., 0., 2.]);
        assert_eq!(l.matrix(), &expected);
    }

    #[test]
    fn empty_network_gives_zero_matrix() {
        let net = WeightedNetwork::from_edges(labels(2), &[]).unwrap();
        assert_eq!(laplacian_from_network(&net).matrix(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn d_minus_a_on_four_nodes() {
        let edges = [
            (0, 1, 0.3),
            (0, 3, 1.7),
            (1, 2, 2.5),
            (2, 3, 0.25),
            (1, 3, 4.0),
        ];
        let net = WeightedNetwork::from_edges(labels(4), &edges).unwrap();
        let l = laplacian_from_network(&net);
        let mut a = DMatrix::<f64>::zeros(4, 4);
        let mut d = DMatrix::<f64>::zeros(4, 4);
        for &(i, j, w) in &edges {
            a[(i, j)] += w;
            a[(j, i)] += w;
            d[(i, i)] += w;
            d[(j, j)] += w;
        }
        assert!((l.matrix() - (d - a)).abs().max() < 1e-15);
        for i in 0..4 {
            assert!(l.matrix().row(i).sum().abs() < 1e-12);
        }
        assert!(validate_laplacian(l.matrix(), INTERNAL_TOL).is_valid());
    }

    #[test]
    fn construction_errors_name_the_entry() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 2.0;
        match WeightedNetwork::new(labels(3), w) {
            Err(Error::InvalidNetwork { i: 0, j: 1, reason }) => {
                assert!(reason.contains("asymmetric"))
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = -1.0;
        w[(1, 0)] = -1.0;
        assert!(matches!(
            WeightedNetwork::new(labels(2), w),
            Err(Error::InvalidNetwork { i: 0, j: 1, .. })
        ));
        let mut w = DMatrix::zeros(2, 2);
        w[(1, 1)] = 1.0;
        assert!(matches!(
            WeightedNetwork::new(labels(2), w),
            Err(Error::InvalidNetwork { i: 1, j: 1, .. })
        ));
    }

    #[test]
    fn validation_diagnostics() {
        let pos = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let r = validate_laplacian(&pos, 1e-12);
        assert!(!r.is_valid());
        assert!(r.has(ConstraintKind::OffDiagonalSign));
        assert!(r.to_string().contains("off-diagonal sign"));

        let row = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 0.9]);
        let r = validate_laplacian(&row, 1e-12);
        assert!(r.has(ConstraintKind::RowSum));
        assert!(!r.has(ConstraintKind::OffDiagonalSign));
        assert!(r.to_string().contains("row sum"));
        assert!((r.violations[0].value + 0.1).abs() < 1e-12);

        let asym = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -0.5, 0.5]);
        assert!(validate_laplacian(&asym, 1e-12).has(ConstraintKind::Symmetry));

        assert!(validate_laplacian(triangle().matrix(), 1e-12).is_valid());
        assert!(validate_laplacian(&DMatrix::zeros(2, 3), 1e-12).has(ConstraintKind::Square));
    }

    #[test]
    fn trace_normalization() {
        let n = trace_normalize(&triangle()).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.5,
                -1. / 6.,
                -1. / 3.,
                -1. / 6.,
                1. / 6.,
                0.,
                -1. / 3.,
                0.,
                1. / 3.,
            ],
        );
        assert!((n.matrix() - expected).abs().max() < 1e-15);
        assert!((n.trace() - 1.0).abs() < 1e-12);
        let again = trace_normalize(&n).unwrap();
        assert!((again.matrix() - n.matrix()).abs().max() < 1e-15);
        assert!(matches!(
            trace_normalize(&GraphLaplacian::zeros(3)),
            Err(Error::ZeroTrace)
        ));
    }

    #[test]
    fn distance_examples() {
        let l = triangle();
        assert_eq!(euclidean_distance(&l, &l).unwrap(), 0.0);
        let single = laplacian_from_network(
            &WeightedNetwork::from_edges(labels(3), &[(0, 1, 1.0)]).unwrap(),
        );
        let d = euclidean_distance(&single, &GraphLaplacian::zeros(3)).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
        assert!(euclidean_distance(&single, &GraphLaplacian::zeros(4)).is_err());
    }

    #[test]
    fn cone_combination_is_laplacian() {
        let a = triangle();
        let b = laplacian_from_network(
            &WeightedNetwork::from_edges(labels(3), &[(1, 2, 5.0)]).unwrap(),
        );
        let c = GraphLaplacian::combine(&[0.3, 2.0], &[&a, &b]).unwrap();
        assert!(validate_laplacian(c.matrix(), INTERNAL_TOL).is_valid());
        assert!(GraphLaplacian::combine(&[-1.0, 1.0], &[&a, &b]).is_err());
    }

    #[test]
    fn upper_weight_round_trip() {
        let l = triangle();
        let w = l.upper_weights();
        assert_eq!(w, vec![1.0, 2.0, 0.0]);
        assert_eq!(GraphLaplacian::from_upper_weights(3, &w), l);
    }
}
