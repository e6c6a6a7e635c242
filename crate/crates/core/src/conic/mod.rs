//! Dense complex semidefinite programming.
//!
//! Problems are posed over a block-diagonal Hermitian variable
//! `X = diag(X_1, ..., X_B)` with every block positive semidefinite:
//!
//! ```text
//! maximize    Tr(C X)
//! subject to  Tr(A_i X)  = b_i
//!             Tr(B_k X) <= c_k
//!             X >= 0
//! ```
//!
//! A 1x1 block is a nonnegative scalar, which is how penalty slacks enter.
//! The solver is an infeasible-start primal-dual interior-point method
//! (HKM direction with a Mehrotra predictor-corrector) working natively on
//! Hermitian matrices; see [`solve_sdp`].

mod ipm;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{c64, fro_norm, hermitize, outer, trace_product_re, CMatrix, CVector};

pub use ipm::solve_sdp;

/// Feasibility tolerance used when callers do not pick one.
pub const DEFAULT_EPS_FEAS: f64 = 1e-7;
/// PSD tolerance used when callers do not pick one.
pub const DEFAULT_EPS_PSD: f64 = 1e-7;
/// Iteration budget used when callers do not pick one.
pub const DEFAULT_MAX_ITERS: usize = 20_000;

/// A complex Hermitian matrix. The stored entries are exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates that `m` is square and Hermitian up to round-off, then
    /// stores its exact Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = fro_norm(&m).max(1.0);
        let asym = fro_norm(&(&m - m.adjoint()));
        if asym > 1e-9 * scale {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (|M - M^H| = {asym:e})"
            )));
        }
        Ok(Self { m: hermitize(&m) })
    }

    /// Takes the Hermitian part of an arbitrary square matrix.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        Self { m: hermitize(m) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = c64(*d, 0.0);
        }
        Self { m }
    }

    /// `e_i e_i^T`, the selector of diagonal entry `i`.
    pub fn diagonal_selector(dim: usize, i: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(i, i)] = c64(1.0, 0.0);
        Self { m }
    }

    /// `v v^H`.
    pub fn outer(v: &CVector) -> Self {
        Self::from_hermitian_part(&outer(v))
    }

    /// Real 2x2 (or larger) matrix from row-major entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(CMatrix::from_fn(dim, dim, |i, j| c64(entries[i * dim + j], 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// `Tr(self * other)`, real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        trace_product_re(&self.m, &other.m)
    }

    /// `v^H self v`.
    pub fn quadratic_form(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.m * v)[(0, 0)].re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: &self.m * c64(s, 0.0) }
    }

    pub fn frobenius_norm(&self) -> f64 {
        fro_norm(&self.m)
    }

    /// Largest absolute deviation from exact Hermitian symmetry.
    pub fn asymmetry(&self) -> f64 {
        let d = &self.m - self.m.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

/// Largest eigenvalue and a unit eigenvector. On exact ties the eigenvector
/// with the lowest index in the solver's output is returned.
pub fn max_eigpair(x: &HermitianMatrix) -> (f64, CVector) {
    let eig = SymmetricEigen::new(x.m.clone());
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut v: CVector = eig.eigenvectors.column(best).into_owned();
    let norm = v.norm();
    if norm > 0.0 {
        v.unscale_mut(norm);
    }
    (eig.eigenvalues[best], v)
}

/// One block's contribution to a linear functional of the block variable.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerm {
    pub block: usize,
    pub matrix: HermitianMatrix,
}

/// `sum_b Tr(A_b X_b)` over a sparse set of blocks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearForm {
    terms: Vec<BlockTerm>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(block: usize, matrix: HermitianMatrix) -> Self {
        Self { terms: vec![BlockTerm { block, matrix }] }
    }

    /// Adds a term; terms on the same block accumulate.
    pub fn with(mut self, block: usize, matrix: HermitianMatrix) -> Self {
        self.push(block, matrix);
        self
    }

    pub fn push(&mut self, block: usize, matrix: HermitianMatrix) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.block == block) {
            t.matrix = &t.matrix + &matrix;
        } else {
            self.terms.push(BlockTerm { block, matrix });
        }
    }

    pub fn terms(&self) -> &[BlockTerm] {
        &self.terms
    }

    pub fn eval(&self, x: &[HermitianMatrix]) -> f64 {
        self.terms.iter().map(|t| t.matrix.inner(&x[t.block])).sum()
    }

    pub fn norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.matrix.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A block-diagonal SDP in maximization form.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    objective: LinearForm,
    eq: Vec<(LinearForm, f64)>,
    ineq: Vec<(LinearForm, f64)>,
}

impl SdpProblem {
    /// Single dense block of size `dim`.
    pub fn new(dim: usize) -> Self {
        Self::with_blocks(vec![dim])
    }

    pub fn with_blocks(block_dims: Vec<usize>) -> Self {
        Self {
            block_dims,
            objective: LinearForm::new(),
            eq: Vec::new(),
            ineq: Vec::new(),
        }
    }

    /// Appends a block and returns its index.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.block_dims.push(dim);
        self.block_dims.len() - 1
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Total matrix dimension.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn set_objective(&mut self, objective: LinearForm) {
        self.objective = objective;
    }

    pub fn objective(&self) -> &LinearForm {
        &self.objective
    }

    /// `Tr(A X) = rhs`.
    pub fn add_eq(&mut self, form: LinearForm, rhs: f64) {
        self.eq.push((form, rhs));
    }

    /// `Tr(B X) <= rhs`.
    pub fn add_le(&mut self, form: LinearForm, rhs: f64) {
        self.ineq.push((form, rhs));
    }

    /// `Tr(B X) >= rhs`, stored as `Tr(-B X) <= -rhs`.
    pub fn add_ge(&mut self, form: LinearForm, rhs: f64) {
        let neg = LinearForm {
            terms: form
                .terms
                .into_iter()
                .map(|t| BlockTerm { block: t.block, matrix: t.matrix.scaled(-1.0) })
                .collect(),
        };
        self.ineq.push((neg, -rhs));
    }

    pub fn eq_constraints(&self) -> &[(LinearForm, f64)] {
        &self.eq
    }

    pub fn ineq_constraints(&self) -> &[(LinearForm, f64)] {
        &self.ineq
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() || self.block_dims.contains(&0) {
            return Err(Error::Dimension("every block needs a positive size".into()));
        }
        let check = |form: &LinearForm, what: &str| -> Result<()> {
            for t in form.terms() {
                let dim = self.block_dims.get(t.block).ok_or_else(|| {
                    Error::Dimension(format!("{what} references missing block {}", t.block))
                })?;
                if t.matrix.dim() != *dim {
                    return Err(Error::Dimension(format!(
                        "{what}: block {} has size {dim}, matrix is {}",
                        t.block,
                        t.matrix.dim()
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (f, b) in &self.eq {
            check(f, "equality")?;
            if !b.is_finite() {
                return Err(Error::InvalidArgument("non-finite equality rhs".into()));
            }
        }
        for (f, c) in &self.ineq {
            check(f, "inequality")?;
            if !c.is_finite() {
                return Err(Error::InvalidArgument("non-finite inequality rhs".into()));
            }
        }
        Ok(())
    }

    /// Largest absolute constraint violation at `x`.
    pub fn primal_residual(&self, x: &[HermitianMatrix]) -> f64 {
        let eq = self.eq.iter().map(|(f, b)| (f.eval(x) - b).abs());
        let ineq = self.ineq.iter().map(|(f, c)| (f.eval(x) - c).max(0.0));
        eq.chain(ineq).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[HermitianMatrix]) -> f64 {
        self.objective.eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// One matrix per problem block.
    pub blocks: Vec<HermitianMatrix>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

impl SdpSolution {
    /// First (for single-block problems, the only) block.
    pub fn x(&self) -> &HermitianMatrix {
        &self.blocks[0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_unit_problem(c: [f64; 4]) -> SdpProblem {
        let mut p = SdpProblem::new(2);
        p.set_objective(LinearForm::on(0, HermitianMatrix::from_real_rows(2, &c).unwrap()));
        p.add_eq(LinearForm::on(0, HermitianMatrix::diagonal_selector(2, 0)), 1.0);
        p.add_eq(LinearForm::on(0, HermitianMatrix::diagonal_selector(2, 1)), 1.0);
        p
    }

    #[test]
    fn off_diagonal_objective_saturates_correlation() {
        let sol = solve_sdp(&diag_unit_problem([0.0, 1.0, 1.0, 0.0]), 1e-7, 500).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective_value, 2.0, epsilon = 1e-6);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_relative_eq!(sol.x().as_matrix()[(i, j)].re, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn negative_correlation_objective() {
        let sol = solve_sdp(&diag_unit_problem([0.0, -1.0, -1.0, 0.0]), 1e-7, 500).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective_value, 2.0, epsilon = 1e-6);
        assert_relative_eq!(sol.x().as_matrix()[(0, 1)].re, -1.0, epsilon = 1e-5);
    }

    #[test]
    fn identity_objective_is_fixed_by_trace() {
        let sol = solve_sdp(&diag_unit_problem([1.0, 0.0, 0.0, 1.0]), 1e-7, 500).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective_value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn reported_objective_matches_recomputation() {
        let p = diag_unit_problem([0.3, 0.7, 0.7, -0.2]);
        let sol = solve_sdp(&p, 1e-7, 500).unwrap();
        let recomputed = p.objective_value(&sol.blocks);
        assert!((sol.objective_value - recomputed).abs() <= 1e-12);
        assert!(sol.x().asymmetry() <= 1e-12);
        assert!(sol.primal_residual <= 1e-7);
        assert!(sol.psd_residual <= 1e-7);
    }

    #[test]
    fn detects_infeasible_trace_constraints() {
        let mut p = SdpProblem::new(2);
        p.set_objective(LinearForm::on(0, HermitianMatrix::identity(2)));
        // Tr(X) = 1 but X_11 + X_22 >= 3 cannot both hold.
        p.add_eq(LinearForm::on(0, HermitianMatrix::identity(2)), 1.0);
        p.add_ge(LinearForm::on(0, HermitianMatrix::identity(2)), 3.0);
        let sol = solve_sdp(&p, 1e-7, 500).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn negative_diagonal_rhs_is_infeasible() {
        let mut p = SdpProblem::new(1);
        p.set_objective(LinearForm::on(0, HermitianMatrix::identity(1)));
        p.add_eq(LinearForm::on(0, HermitianMatrix::identity(1)), -1.0);
        let sol = solve_sdp(&p, 1e-7, 500).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn max_iters_reported_when_budget_exhausted() {
        let sol = solve_sdp(&diag_unit_problem([0.0, 1.0, 1.0, 0.0]), 1e-7, 2).unwrap();
        assert_eq!(sol.status, SdpStatus::MaxIters);
    }

    #[test]
    fn rejects_mismatched_block_sizes() {
        let mut p = SdpProblem::new(3);
        p.add_eq(LinearForm::on(0, HermitianMatrix::identity(2)), 1.0);
        assert!(matches!(solve_sdp(&p, 1e-7, 10), Err(Error::Dimension(_))));
        let mut q = SdpProblem::new(2);
        q.add_eq(LinearForm::on(4, HermitianMatrix::identity(2)), 1.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn complex_objective_is_solved_natively() {
        // maximize Re(e^{-j pi/3} X_12) * 2 with unit diagonal: value 2 at
        // X_12 = e^{j pi/3}.
        let t = std::f64::consts::FRAC_PI_3;
        let mut c = CMatrix::zeros(2, 2);
        c[(1, 0)] = nalgebra::Complex::from_polar(1.0, -t);
        c[(0, 1)] = nalgebra::Complex::from_polar(1.0, t);
        let mut p = SdpProblem::new(2);
        p.set_objective(LinearForm::on(0, HermitianMatrix::new(c).unwrap()));
        p.add_eq(LinearForm::on(0, HermitianMatrix::diagonal_selector(2, 0)), 1.0);
        p.add_eq(LinearForm::on(0, HermitianMatrix::diagonal_selector(2, 1)), 1.0);
        let sol = solve_sdp(&p, 1e-8, 500).unwrap();
        assert_relative_eq!(sol.objective_value, 2.0, epsilon = 1e-6);
        let x12 = sol.x().as_matrix()[(0, 1)];
        assert_relative_eq!(x12.arg(), t, epsilon = 1e-4);
    }

    #[test]
    fn scalar_blocks_act_as_nonnegative_variables() {
        // maximize x - 2 y with x + y = 1, x, y >= 0  ->  x = 1.
        let mut p = SdpProblem::with_blocks(vec![1, 1]);
        p.set_objective(
            LinearForm::on(0, HermitianMatrix::identity(1))
                .with(1, HermitianMatrix::from_diagonal(&[-2.0])),
        );
        p.add_eq(
            LinearForm::on(0, HermitianMatrix::identity(1)).with(1, HermitianMatrix::identity(1)),
            1.0,
        );
        let sol = solve_sdp(&p, 1e-9, 500).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.objective_value, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn max_eigpair_examples() {
        let (l, _) = max_eigpair(&HermitianMatrix::identity(3));
        assert_relative_eq!(l, 1.0, epsilon = 1e-14);

        let (l, v) = max_eigpair(&HermitianMatrix::from_diagonal(&[2.0, 1.0]));
        assert_relative_eq!(l, 2.0, epsilon = 1e-14);
        assert_relative_eq!(v[0].norm(), 1.0, epsilon = 1e-14);
        assert!(v[1].norm() < 1e-14);

        let ones = HermitianMatrix::from_real_rows(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let (l, v) = max_eigpair(&ones);
        assert_relative_eq!(l, 2.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(v[0].norm(), s, epsilon = 1e-12);
        assert_relative_eq!(v[1].norm(), s, epsilon = 1e-12);
        assert_relative_eq!((v[0] * v[1].conj()).re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetric() {
        let m = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert!(HermitianMatrix::new(m).is_err());
        let rect = CMatrix::zeros(2, 3);
        assert!(HermitianMatrix::new(rect).is_err());
    }
}
