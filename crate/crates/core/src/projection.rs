//! Euclidean projection of a symmetric matrix onto the cone of graph Laplacians.
//!
//! Candidates are parameterized by edge weights `a_ij ≥ 0` (`i < j`), with
//! `L(a) = Σ a_ij (e_i − e_j)(e_i − e_j)ᵀ`. The objective
//! `‖S − L(a)‖²_F = ‖S‖² − 2 aᵀc + aᵀGa` has
//!
//! * `c_ij = S_ii + S_jj − 2 S_ij`
//! * `G = 2I + NᵀN`, `N` the unsigned node-edge incidence matrix,
//!
//! so `G ⪰ 2I` and the minimizer is unique. The nonnegative least-squares
//! problem is solved by block principal pivoting (an active-set method that
//! exchanges whole blocks of infeasible variables, with a single-variable
//! fallback that guarantees termination). On a free set `F` the normal
//! equations `(2I + N_FᵀN_F) a_F = c_F` are solved through the Woodbury
//! identity, which only needs a Cholesky factorization of the `m×m` matrix
//! `2I + N_F N_Fᵀ`, so the cost per pivot is `O(m³ + m²)` rather than cubic in
//! the number of edges.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::laplacian::{GraphLaplacian, SymmetricMatrix};
use crate::spectral::{reduced_inverse_power, PowerConfig};
use crate::tangent::{reduced_from_tangent, HelmertBasis, TangentVector};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Inputs asymmetric by at most this (relative to the largest entry) are symmetrized.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Consecutive non-improving block exchanges allowed before single pivots.
const BACKUP_EXCHANGES: usize = 3;

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub laplacian: GraphLaplacian,
    /// Squared Frobenius distance between the (symmetrized) input and `laplacian`.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub tol: f64,
    /// `None` means `50·m²`.
    pub max_iter: Option<usize>,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl ProjectionOptions {
    fn max_iter_for(&self, m: usize) -> usize {
        self.max_iter.unwrap_or(50 * m * m).max(1)
    }
}

struct EdgeProblem {
    m: usize,
    edges: Vec<(usize, usize)>,
    c: Vec<f64>,
}

impl EdgeProblem {
    fn new(s: &DMatrix<f64>) -> Self {
        let m = s.nrows();
        let mut edges = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        let mut c = Vec::with_capacity(edges.capacity());
        for i in 0..m {
            for j in i + 1..m {
                edges.push((i, j));
                c.push(s[(i, i)] + s[(j, j)] - 2.0 * s[(i, j)]);
            }
        }
        Self { m, edges, c }
    }

    /// Unconstrained minimizer over the free edges, zero elsewhere.
    fn solve_free(&self, free: &[bool]) -> Vec<f64> {
        let m = self.m;
        let mut a = vec![0.0; self.edges.len()];
        if !free.iter().any(|&f| f) {
            return a;
        }
        let mut gram = DMatrix::<f64>::identity(m, m) * 2.0;
        let mut rhs = DVector::<f64>::zeros(m);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            if free[e] {
                gram[(i, i)] += 1.0;
                gram[(j, j)] += 1.0;
                gram[(i, j)] += 1.0;
                gram[(j, i)] += 1.0;
                rhs[i] += self.c[e];
                rhs[j] += self.c[e];
            }
        }
        let z = Cholesky::new(gram)
            .expect("2I + N Nᵀ is positive definite")
            .solve(&rhs);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            if free[e] {
                a[e] = 0.5 * (self.c[e] - z[i] - z[j]);
            }
        }
        a
    }

    /// `∂/∂a ‖S − L(a)‖² = 2(Ga − c)`.
    fn gradient(&self, a: &[f64]) -> Vec<f64> {
        let mut degree = vec![0.0; self.m];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            degree[i] += a[e];
            degree[j] += a[e];
        }
        self.edges
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| 2.0 * (2.0 * a[e] + degree[i] + degree[j] - self.c[e]))
            .collect()
    }
}

fn kkt_residual(a: &[f64], grad: &[f64]) -> f64 {
    a.iter()
        .zip(grad)
        .map(|(&x, &g)| if x > 0.0 { g.abs() } else { (-g).max(0.0) })
        .fold(0.0, f64::max)
}

fn finish(
    s: &DMatrix<f64>,
    problem: &EdgeProblem,
    mut a: Vec<f64>,
    iterations: usize,
) -> ProjectionResult {
    for x in a.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let grad = problem.gradient(&a);
    let laplacian = GraphLaplacian::from_upper_weights(problem.m, &a);
    let objective = s
        .iter()
        .zip(laplacian.matrix().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    ProjectionResult {
        laplacian,
        objective,
        iterations,
        kkt_residual: kkt_residual(&a, &grad),
    }
}

/// Edge weights `-s_ij` when `s` already has nonpositive off-diagonals.
fn exact_weights(s: &DMatrix<f64>) -> Option<Vec<f64>> {
    let m = s.nrows();
    let mut a = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            if s[(i, j)] > 0.0 {
                return None;
            }
            a.push(-s[(i, j)]);
        }
    }
    Some(a)
}

fn prepare(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            expected: s.nrows(),
            found: s.ncols(),
        });
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = s.nrows();
    let scale = s.amax().max(1.0);
    let mut exact = true;
    for i in 0..n {
        for j in i + 1..n {
            let gap = (s[(i, j)] - s[(j, i)]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(Error::Asymmetric { i, j, gap });
            }
            exact &= gap == 0.0;
        }
    }
    Ok(if exact {
        s.clone()
    } else {
        SymmetricMatrix::symmetrize(s.clone()).into_matrix()
    })
}

/// Nearest graph Laplacian to `s` in Frobenius norm.
///
/// `tol` bounds the KKT residual, measured relative to `max(1, ‖S‖_F)`.
pub fn project_to_laplacian(
    s: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<ProjectionResult> {
    project_with(
        s,
        &ProjectionOptions {
            tol,
            max_iter: Some(max_iter),
        },
    )
}

pub fn project_with(s: &DMatrix<f64>, opts: &ProjectionOptions) -> Result<ProjectionResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "projection tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let s = prepare(s)?;
    let m = s.nrows();
    let problem = EdgeProblem::new(&s);
    let k = problem.edges.len();
    let max_iter = opts.max_iter_for(m);
    let tol = opts.tol * s.norm().max(1.0);

    // Pivoting thresholds sit at roundoff level so the support is exact.
    let cscale = problem.c.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let eps = 16.0 * (m.max(2) as f64) * f64::EPSILON * cscale;

    if let Some(a) = exact_weights(&s) {
        let result = finish(&s, &problem, a, 0);
        if result.objective == 0.0 && result.kkt_residual <= tol {
            return Ok(result);
        }
    }

    // Warm start on the edges `s` already carries.
    let mut free: Vec<bool> = problem
        .edges
        .iter()
        .map(|&(i, j)| s[(i, j)] < 0.0)
        .collect();
    let mut best_infeasible = k + 1;
    let mut backups = BACKUP_EXCHANGES;
    let mut a = vec![0.0; k];

    for iteration in 1..=max_iter {
        a = problem.solve_free(&free);
        let grad = problem.gradient(&a);
        let infeasible: Vec<usize> = (0..k)
            .filter(|&e| {
                if free[e] {
                    a[e] < -eps
                } else {
                    grad[e] < -2.0 * eps
                }
            })
            .collect();
        if infeasible.is_empty() {
            let result = finish(&s, &problem, a, iteration);
            if result.kkt_residual > tol {
                return Err(Error::ProjectionNotConverged {
                    iterations: iteration,
                    residual: result.kkt_residual,
                    best: Box::new(result),
                });
            }
            return Ok(result);
        }
        if infeasible.len() < best_infeasible {
            best_infeasible = infeasible.len();
            backups = BACKUP_EXCHANGES;
            for &e in &infeasible {
                free[e] = !free[e];
            }
        } else if backups > 0 {
            backups -= 1;
            for &e in &infeasible {
                free[e] = !free[e];
            }
        } else {
            let e = *infeasible.last().expect("nonempty");
            free[e] = !free[e];
        }
    }

    let best = finish(&s, &problem, a, max_iter);
    Err(Error::ProjectionNotConverged {
        iterations: max_iter,
        residual: best.kkt_residual,
        best: Box::new(best),
    })
}

/// `P_L ∘ G_α ∘ π`: tangent coordinates back to a graph Laplacian.
pub fn pipeline_to_laplacian(v: &TangentVector) -> Result<GraphLaplacian> {
    let cfg = PowerConfig::new(v.alpha)?;
    pipeline_to_laplacian_with(v, &cfg, &ProjectionOptions::default()).map(|r| r.laplacian)
}

pub fn pipeline_to_laplacian_with(
    v: &TangentVector,
    cfg: &PowerConfig,
    opts: &ProjectionOptions,
) -> Result<ProjectionResult> {
    let reduced = reduced_from_tangent(v)?;
    // G_α commutes with the Helmert expansion (H has orthonormal rows and
    // Hᵀ B H annihilates 𝟙), so the inverse power is taken in the reduced space.
    let powered = reduced_inverse_power(&reduced, cfg)?;
    let helmert = HelmertBasis::new(v.m)?;
    let embedded = SymmetricMatrix::symmetrize(helmert.expand(&powered));
    project_with(embedded.as_matrix(), opts)
}
