use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SylvesterProblem;
use crate::dynamics::NetworkState;
use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::penalty::{soft_threshold, L1Norm, Regularizer};

/// Singular values below `RANK_CUTOFF · σ_max` count as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

pub const ISTA_MAX_ITERATIONS: usize = 1_000_000;
/// Stop once the gradient-mapping norm `L·‖x⁺ − x‖` falls below this
/// (scaled by `1 + ‖Mᵀc‖`).
const ISTA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    #[serde(skip)]
    pub x: DenseMatrix,
    /// `‖AX + XB − C‖_F`
    pub residual: f64,
    /// `½ residual²`, plus `α_eff·g(X)` for the regularized oracle.
    pub objective: f64,
    pub minimal_residual: bool,
    pub unique: bool,
    pub iterations: usize,
}

impl Default for OracleSolution {
    fn default() -> Self {
        Self {
            x: DenseMatrix::zeros(0, 0),
            residual: 0.0,
            objective: 0.0,
            minimal_residual: false,
            unique: false,
            iterations: 0,
        }
    }
}

/// Minimum-norm least-squares solution of `(I_r ⊗ A + Bᵀ ⊗ I_m) vec(X) = vec(C)`
/// through a truncated SVD pseudo-inverse.
pub fn oracle_least_squares(prob: &SylvesterProblem) -> Result<OracleSolution> {
    let (m, r) = (prob.m(), prob.r());
    let op = prob.sylvester_operator().to_nalgebra();
    let rhs = DVector::from_column_slice(prob.c().vec().as_slice());
    let svd = op.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = RANK_CUTOFF * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut sol = DVector::zeros(m * r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let coef = u.column(k).dot(&rhs) / s;
            sol += v_t.row(k).transpose() * coef;
        }
    }
    let x = DenseMatrix::unvec(sol.as_slice(), m, r)?;
    let residual = prob.residual(&x)?;
    Ok(OracleSolution {
        x,
        residual,
        objective: 0.5 * residual * residual,
        minimal_residual: true,
        unique: rank == m * r,
        iterations: 0,
    })
}

/// Minimizes `½‖AX + XB − C‖_F² + α_eff·|X|_1` by proximal gradient with
/// step `1/σ_max(M)²`.
pub fn oracle_regularized(prob: &SylvesterProblem, alpha_eff: f64) -> Result<OracleSolution> {
    if !(alpha_eff >= 0.0 && alpha_eff.is_finite()) {
        return Err(Error::Validation(format!("regularization weight must be nonnegative, got {alpha_eff}")));
    }
    let (m, r) = (prob.m(), prob.r());
    let op: DMatrix<f64> = prob.sylvester_operator().to_nalgebra();
    let c = DVector::from_column_slice(prob.c().vec().as_slice());
    let gram = op.transpose() * &op;
    let rhs = op.transpose() * &c;
    let lipschitz = op.singular_values().max().powi(2);

    let mut x = DVector::zeros(m * r);
    let mut iterations = 0;
    if lipschitz > 0.0 {
        let step = 1.0 / lipschitz;
        let tol = ISTA_TOLERANCE * (1.0 + rhs.norm());
        let mut mapping = f64::INFINITY;
        while iterations < ISTA_MAX_ITERATIONS {
            iterations += 1;
            let grad = &gram * &x - &rhs;
            let next = (&x - grad * step).map(|v| soft_threshold(v, alpha_eff * step));
            mapping = (&next - &x).norm() * lipschitz;
            x = next;
            if mapping <= tol {
                break;
            }
        }
        if mapping > tol {
            return Err(Error::OracleNonconvergence {
                iterations,
                gap: mapping,
            });
        }
    }
    let x = DenseMatrix::unvec(x.as_slice(), m, r)?;
    let residual = prob.residual(&x)?;
    Ok(OracleSolution {
        objective: 0.5 * residual * residual + alpha_eff * x.l1_norm(),
        residual,
        unique: false,
        minimal_residual: false,
        iterations,
        x,
    })
}

/// `dist(0, ∇½‖AX + XB − C‖² + α_eff·∂|X|_1)`, with the gradient taken as
/// `AᵀR + RBᵀ` on the residual `R` rather than through the Kronecker form.
pub fn lasso_stationarity(prob: &SylvesterProblem, x: &DenseMatrix, alpha_eff: f64) -> Result<f64> {
    let res = prob.residual_matrix(x)?;
    let mut grad = prob.a().transpose().matmul(&res)?;
    grad.axpy(1.0, &res.matmul(&prob.b().transpose())?)?;
    Ok(L1Norm.min_norm_residual(&grad.scale(-1.0), x, alpha_eff).frobenius_norm())
}

/// `½ Σ_i ‖X_i B_i − C_i + Z_i‖² + α Σ_i g(X_i)` with the per-agent weight `alpha`.
pub fn distributed_objective_reg(prob: &SylvesterProblem, state: &NetworkState, alpha: f64) -> Result<f64> {
    let g = prob
        .penalty()
        .regularizer()
        .ok_or_else(|| Error::Validation("problem has no penalty".into()))?;
    let mut total = 0.0;
    for (ag, st) in prob.agents().iter().zip(state.agents()) {
        let mut fit = st.x.matmul(&ag.b)?;
        fit.axpy(-1.0, &ag.c)?;
        fit.axpy(1.0, &st.z)?;
        total += 0.5 * fit.norm_squared() + alpha * g.value(&st.x);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::BlockPartition;
    use crate::network::Network;
    use crate::penalty::PenaltySpec;
    use crate::problem::gen_exact_instance;

    fn diag_problem(a: &[f64], b: &[f64], c: &[&[f64]]) -> SylvesterProblem {
        let am = DenseMatrix::from_fn(a.len(), a.len(), |i, j| if i == j { a[i] } else { 0.0 });
        let bm = DenseMatrix::from_fn(b.len(), b.len(), |i, j| if i == j { b[i] } else { 0.0 });
        SylvesterProblem::new(
            am,
            bm,
            DenseMatrix::from_rows(c).unwrap(),
            BlockPartition::new(vec![a.len()], vec![b.len()]).unwrap(),
            Network::new(1, &[]).unwrap(),
            PenaltySpec::l1(1.0).unwrap(),
        )
        .unwrap()
    }

    /// Independent route: dense normal equations `MᵀM v = Mᵀc` solved by LU.
    fn normal_equations(prob: &SylvesterProblem) -> DenseMatrix {
        let op = prob.sylvester_operator().to_nalgebra();
        let c = DVector::from_column_slice(prob.c().vec().as_slice());
        let v = (op.transpose() * &op).lu().solve(&(op.transpose() * c)).unwrap();
        DenseMatrix::unvec(v.as_slice(), prob.m(), prob.r()).unwrap()
    }

    #[test]
    fn exact_instance_recovers_solution() {
        let p = BlockPartition::equal(4, 3, 1).unwrap();
        let (prob, x_star) = gen_exact_instance(p, Network::new(1, &[]).unwrap(), 3).unwrap();
        let sol = oracle_least_squares(&prob).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.unique);
        assert!(sol.minimal_residual);
        assert!(sol.x.sub(&x_star).unwrap().frobenius_norm() < 1e-9);
    }

    #[test]
    fn zero_operator_gives_min_norm_zero() {
        let prob = diag_problem(&[1.0], &[-1.0], &[&[1.0]]);
        let sol = oracle_least_squares(&prob).unwrap();
        assert_eq!(sol.x.as_slice(), &[0.0]);
        assert!((sol.residual - 1.0).abs() < 1e-15);
        assert!(!sol.unique);
    }

    #[test]
    fn agrees_with_normal_equations() {
        for seed in 0..5 {
            let p = BlockPartition::equal(3, 3, 1).unwrap();
            let (mut prob, _) = gen_exact_instance(p, Network::new(1, &[]).unwrap(), 100 + seed).unwrap();
            // push C off the consistent manifold so the test is a genuine least-squares check
            let noisy = prob.c().add(&DenseMatrix::from_fn(3, 3, |i, j| 0.1 * ((i * 3 + j) as f64).sin())).unwrap();
            prob = SylvesterProblem::new(
                prob.a().clone(),
                prob.b().clone(),
                noisy,
                prob.partition().clone(),
                prob.network().clone(),
                PenaltySpec::None,
            )
            .unwrap();
            let svd_x = oracle_least_squares(&prob).unwrap().x;
            let ne_x = normal_equations(&prob);
            assert!(svd_x.sub(&ne_x).unwrap().frobenius_norm() <= 1e-8);
        }
    }

    #[test]
    fn normal_equation_residual_vanishes() {
        let p = BlockPartition::equal(3, 2, 1).unwrap();
        let (prob, _) = gen_exact_instance(p, Network::new(1, &[]).unwrap(), 8).unwrap();
        let sol = oracle_least_squares(&prob).unwrap();
        let op = prob.sylvester_operator();
        let r = op.matmul(&sol.x.vec()).unwrap().sub(&prob.c().vec()).unwrap();
        let ne = op.transpose().matmul(&r).unwrap().frobenius_norm();
        assert!(ne <= 1e-8 * (1.0 + prob.c().frobenius_norm()));
    }

    #[test]
    fn scalar_lasso_by_hand() {
        // minimize ½(2x − 4)² + |x|: 2(2x − 4) + 1 = 0 → x = 1.75
        let prob = diag_problem(&[1.0], &[1.0], &[&[4.0]]);
        let sol = oracle_regularized(&prob, 1.0).unwrap();
        assert!((sol.x[(0, 0)] - 1.75).abs() < 1e-9, "{}", sol.x[(0, 0)]);
        let expect = 0.5 * (2.0f64 * 1.75 - 4.0).powi(2) + 1.75;
        assert!((sol.objective - expect).abs() < 1e-9);
        assert!(lasso_stationarity(&prob, &sol.x, 1.0).unwrap() < 1e-8);
    }

    #[test]
    fn identity_design_is_soft_threshold() {
        // A = I, B = 0 → M = I and the lasso solution is shrink(c, α)
        let c: &[&[f64]] = &[&[3.0, -0.2], &[-1.5, 0.9]];
        let prob = diag_problem(&[1.0, 1.0], &[0.0, 0.0], c);
        let sol = oracle_regularized(&prob, 1.0).unwrap();
        for (i, row) in c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expect = soft_threshold(v, 1.0);
                assert!((sol.x[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_penalty_approaches_least_squares() {
        let p = BlockPartition::equal(3, 3, 1).unwrap();
        let (prob, _) = gen_exact_instance(p, Network::new(1, &[]).unwrap(), 21).unwrap();
        let ls = oracle_least_squares(&prob).unwrap();
        let reg = oracle_regularized(&prob, 1e-6).unwrap();
        assert!((reg.objective - ls.objective).abs() < 1e-4);
    }

    #[test]
    fn rejects_negative_weight() {
        let prob = diag_problem(&[1.0], &[1.0], &[&[4.0]]);
        assert!(oracle_regularized(&prob, -1.0).is_err());
    }
}
