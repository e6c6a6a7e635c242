//! Infeasible-start primal-dual interior-point method for block-diagonal
//! complex SDPs.
//!
//! Internally the problem is held in minimization standard form
//! `min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0` where inequalities have been
//! given their own 1x1 slack blocks and every constraint row has been
//! normalized to unit Frobenius norm. Search directions use the HKM scaling
//! with a Mehrotra predictor-corrector step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{HermitianMatrix, SdpProblem, SdpSolution, SdpStatus};
use crate::error::{Error, Result};
use crate::linalg::{c64, fro_norm, hermitize, trace_product_re, CMatrix};

const STEP_FRACTION: f64 = 0.98;
const STALL_WINDOW: usize = 30;
const STALL_INFEASIBLE: f64 = 1e-4;

struct Row {
    terms: Vec<(usize, CMatrix)>,
    rhs: f64,
}

struct StandardForm {
    dims: Vec<usize>,
    rows: Vec<Row>,
    cost: Vec<CMatrix>,
}

impl StandardForm {
    fn from_problem(problem: &SdpProblem) -> std::result::Result<Self, ()> {
        let mut dims = problem.block_dims().to_vec();
        let mut rows = Vec::new();
        for (form, rhs) in problem.eq_constraints() {
            rows.push(Row {
                terms: form
                    .terms()
                    .iter()
                    .map(|t| (t.block, t.matrix.as_matrix().clone()))
                    .collect(),
                rhs: *rhs,
            });
        }
        for (form, rhs) in problem.ineq_constraints() {
            let slack = dims.len();
            dims.push(1);
            let mut terms: Vec<(usize, CMatrix)> = form
                .terms()
                .iter()
                .map(|t| (t.block, t.matrix.as_matrix().clone()))
                .collect();
            terms.push((slack, CMatrix::from_element(1, 1, c64(1.0, 0.0))));
            rows.push(Row { terms, rhs: *rhs });
        }

        let mut kept = Vec::with_capacity(rows.len());
        for mut row in rows {
            let norm = row
                .terms
                .iter()
                .map(|(_, a)| fro_norm(a).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                if row.rhs != 0.0 {
                    return Err(());
                }
                continue;
            }
            for (_, a) in row.terms.iter_mut() {
                a.unscale_mut(norm);
            }
            row.rhs /= norm;
            kept.push(row);
        }

        let mut cost: Vec<CMatrix> = dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for t in problem.objective().terms() {
            cost[t.block] -= t.matrix.as_matrix();
        }
        Ok(Self { dims, rows: kept, cost })
    }

    fn apply(&self, x: &[CMatrix]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| {
                r.terms.iter().map(|(b, a)| trace_product_re(a, &x[*b])).sum::<f64>()
            }),
        )
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (i, r) in self.rows.iter().enumerate() {
            let yi = c64(y[i], 0.0);
            for (b, a) in &r.terms {
                out[*b] += a * yi;
            }
        }
        out
    }
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| trace_product_re(x, y)).sum()
}

fn norm(a: &[CMatrix]) -> f64 {
    a.iter().map(|m| fro_norm(m).powi(2)).sum::<f64>().sqrt()
}

/// Largest `alpha` with `x + alpha * dx` positive semidefinite, for `x > 0`.
fn max_step(x: &[CMatrix], dx: &[CMatrix]) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        if xb.nrows() == 1 {
            let (v, d) = (xb[(0, 0)].re, db[(0, 0)].re);
            if d < 0.0 {
                alpha = alpha.min(-v / d);
            }
            continue;
        }
        let chol = xb.clone().cholesky()?;
        let l = chol.l();
        let t = l.solve_lower_triangular(db)?;
        let s = l.solve_lower_triangular(&t.adjoint())?;
        let lmin = SymmetricEigen::new(hermitize(&s))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    Some(alpha)
}

fn invert_pd(z: &CMatrix) -> Option<CMatrix> {
    if z.nrows() == 1 {
        let v = z[(0, 0)].re;
        return (v > 0.0).then(|| CMatrix::from_element(1, 1, c64(1.0 / v, 0.0)));
    }
    Some(hermitize(&z.clone().cholesky()?.inverse()))
}

fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = m.clone();
    for i in 0..m.nrows() {
        reg[(i, i)] += 1e-13 * scale;
    }
    if let Some(ch) = reg.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    reg.lu().solve(rhs)
}

struct Direction {
    dx: Vec<CMatrix>,
    dy: DVector<f64>,
    dz: Vec<CMatrix>,
}

/// Solves `problem` to relative accuracy `tol` (primal feasibility, dual
/// feasibility and duality gap), spending at most `max_iters` iterations.
///
/// The returned blocks are exactly Hermitian. A solution is reported as
/// [`SdpStatus::Optimal`] only when its absolute constraint violation in the
/// caller's units is at most `tol` as well. [`SdpStatus::Infeasible`] is
/// reported when a Farkas-type certificate appears in the dual iterates or
/// when primal infeasibility stops decreasing.
pub fn solve_sdp(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    problem.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n_user = problem.block_dims().len();

    let sf = match StandardForm::from_problem(problem) {
        Ok(sf) => sf,
        Err(()) => {
            let blocks: Vec<HermitianMatrix> =
                problem.block_dims().iter().map(|&d| HermitianMatrix::identity(d)).collect();
            return Ok(finish(problem, blocks, SdpStatus::Infeasible, 0));
        }
    };

    let n_tot: f64 = sf.dims.iter().sum::<usize>() as f64;
    let b = DVector::from_iterator(sf.rows.len(), sf.rows.iter().map(|r| r.rhs));
    let norm_b = b.norm();
    let norm_c = norm(&sf.cost);

    let xi = sf
        .rows
        .iter()
        .map(|r| n_tot.sqrt() * (1.0 + r.rhs.abs()) / 2.0)
        .fold(10f64.max(n_tot.sqrt()), f64::max);
    let zeta = 10f64.max(n_tot.sqrt()).max((1.0 + norm_c) / n_tot.sqrt());

    let mut x: Vec<CMatrix> = sf.dims.iter().map(|&d| CMatrix::identity(d, d) * c64(xi, 0.0)).collect();
    let mut z: Vec<CMatrix> = sf.dims.iter().map(|&d| CMatrix::identity(d, d) * c64(zeta, 0.0)).collect();
    let mut y = DVector::<f64>::zeros(sf.rows.len());

    // Rows grouped by block for assembling the Schur complement.
    let mut by_block: Vec<Vec<(usize, usize)>> = vec![Vec::new(); sf.dims.len()];
    for (i, r) in sf.rows.iter().enumerate() {
        for (k, (blk, _)) in r.terms.iter().enumerate() {
            by_block[*blk].push((i, k));
        }
    }

    let user_residual = |x: &[CMatrix]| {
        let user: Vec<HermitianMatrix> = x[..n_user].iter().map(HermitianMatrix::from_hermitian_part).collect();
        problem.primal_residual(&user)
    };
    let mut best: Option<(f64, Vec<CMatrix>)> = None;
    let mut relp_history: Vec<f64> = Vec::new();
    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0;

    for iter in 0..max_iters {
        iterations = iter;
        let rp = &b - sf.apply(&x);
        let aty = sf.apply_adjoint(&y);
        let rd: Vec<CMatrix> = (0..sf.dims.len()).map(|k| &sf.cost[k] - &z[k] - &aty[k]).collect();
        let pobj = inner(&sf.cost, &x);
        let dobj = b.dot(&y);
        let xz = inner(&x, &z);
        let mu = xz / n_tot;

        let relp = rp.norm() / (1.0 + norm_b);
        let reld = norm(&rd) / (1.0 + norm_c);
        let relgap = xz.abs() / (1.0 + pobj.abs() + dobj.abs());

        if !(mu > 0.0) {
            // Round-off pushed an iterate off the cone.
            break;
        }
        let merit = relp.max(reld).max(relgap);
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, x[..n_user].to_vec()));
        }
        if merit <= tol && user_residual(&x) <= tol {
            status = SdpStatus::Optimal;
            break;
        }

        // A^T y + Z = C - Rd stays bounded while b^T y diverges when the
        // primal is infeasible.
        if dobj > 0.0 {
            let lhs: Vec<CMatrix> = (0..sf.dims.len()).map(|k| &aty[k] + &z[k]).collect();
            if dobj > 1e6 * (1.0 + norm_c) && norm(&lhs) / dobj < tol && relp > tol {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        relp_history.push(relp);
        if iter >= 2 * STALL_WINDOW && relp > tol {
            let past = relp_history[iter - STALL_WINDOW];
            if relp > 0.9 * past {
                // Stagnation far from feasibility indicates an empty feasible
                // set; close to it, it is only lost accuracy.
                if relp > STALL_INFEASIBLE.max(1e3 * tol) {
                    status = SdpStatus::Infeasible;
                }
                break;
            }
        }

        let Some(zinv) = z.iter().map(invert_pd).collect::<Option<Vec<_>>>() else {
            break;
        };

        // Schur complement M_ij = <A_i, X A_j Z^-1>.
        let m = sf.rows.len();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (blk, entries) in by_block.iter().enumerate() {
            if entries.is_empty() {
                continue;
            }
            let g: Vec<CMatrix> = entries
                .iter()
                .map(|&(j, kj)| &x[blk] * &sf.rows[j].terms[kj].1 * &zinv[blk])
                .collect();
            for (a, &(i, ki)) in entries.iter().enumerate() {
                let ai = &sf.rows[i].terms[ki].1;
                for (bidx, &(j, _)) in entries.iter().enumerate().skip(a) {
                    let v = trace_product_re(ai, &g[bidx]);
                    schur[(i, j)] += v;
                    if i != j || a != bidx {
                        schur[(j, i)] += v;
                    }
                }
            }
        }

        let direction = |sigma_mu: f64, corr: Option<&[CMatrix]>| -> Option<Direction> {
            let kmat: Vec<CMatrix> = (0..sf.dims.len())
                .map(|k| {
                    let mut km = &zinv[k] * c64(sigma_mu, 0.0) - &x[k] - &x[k] * &rd[k] * &zinv[k];
                    if let Some(c) = corr {
                        km -= &c[k];
                    }
                    km
                })
                .collect();
            let rhs = &rp - sf.apply(&kmat);
            let dy = solve_schur(&schur, &rhs)?;
            let atdy = sf.apply_adjoint(&dy);
            let dz: Vec<CMatrix> = (0..sf.dims.len()).map(|k| hermitize(&(&rd[k] - &atdy[k]))).collect();
            let dx: Vec<CMatrix> = (0..sf.dims.len())
                .map(|k| hermitize(&(&kmat[k] + &x[k] * &atdy[k] * &zinv[k])))
                .collect();
            Some(Direction { dx, dy, dz })
        };

        let Some(pred) = direction(0.0, None) else { break };
        let (Some(ap), Some(ad)) = (max_step(&x, &pred.dx), max_step(&z, &pred.dz)) else {
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff: Vec<CMatrix> = x.iter().zip(&pred.dx).map(|(a, d)| a + d * c64(ap, 0.0)).collect();
        let z_aff: Vec<CMatrix> = z.iter().zip(&pred.dz).map(|(a, d)| a + d * c64(ad, 0.0)).collect();
        let mu_aff = inner(&x_aff, &z_aff) / n_tot;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        let corr: Vec<CMatrix> = (0..sf.dims.len())
            .map(|k| &pred.dx[k] * &pred.dz[k] * &zinv[k])
            .collect();
        let Some(step) = direction(sigma * mu, Some(&corr)) else { break };
        let (Some(ap), Some(ad)) = (max_step(&x, &step.dx), max_step(&z, &step.dz)) else {
            break;
        };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);

        for k in 0..sf.dims.len() {
            x[k] = hermitize(&(&x[k] + &step.dx[k] * c64(ap, 0.0)));
            z[k] = hermitize(&(&z[k] + &step.dz[k] * c64(ad, 0.0)));
        }
        y += &step.dy * ad;
        iterations = iter + 1;
    }

    let mut result = x[..n_user].to_vec();
    if status != SdpStatus::Optimal {
        if let Some((merit, xb)) = best {
            if status != SdpStatus::Infeasible {
                if merit <= tol && user_residual(&xb) <= tol {
                    status = SdpStatus::Optimal;
                }
                result = xb;
            }
        }
    }
    let blocks: Vec<HermitianMatrix> = result.iter().map(HermitianMatrix::from_hermitian_part).collect();
    Ok(finish(problem, blocks, status, iterations))
}

fn finish(
    problem: &SdpProblem,
    blocks: Vec<HermitianMatrix>,
    status: SdpStatus,
    iterations: usize,
) -> SdpSolution {
    let objective_value = problem.objective_value(&blocks);
    let primal_residual = problem.primal_residual(&blocks);
    let psd_residual = blocks
        .iter()
        .map(|b| (-b.min_eigenvalue()).max(0.0))
        .fold(0.0, f64::max);
    SdpSolution {
        blocks,
        objective_value,
        primal_residual,
        psd_residual,
        status,
        iterations,
    }
}
