//! KKT residuals of the three distributed reformulations, and direct
//! construction of KKT points by solving the (affine) KKT system.

use super::SylvesterProblem;
use crate::dynamics::{Algorithm, NetworkState};
use crate::error::{Error, Result};
use crate::matcore::{col_band_selector, embed_col_block, embed_row_block, row_band_selector, DenseMatrix};
use crate::penalty::{L1Norm, Regularizer};

/// Named residual blocks, `blocks[k][i]` being block `k` of agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktBlocks {
    pub names: Vec<&'static str>,
    pub blocks: Vec<Vec<DenseMatrix>>,
}

impl KktBlocks {
    /// Largest stacked Frobenius norm over the blocks.
    pub fn residual(&self) -> f64 {
        self.block_norms().into_iter().fold(0.0, f64::max)
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|per_agent| per_agent.iter().map(DenseMatrix::norm_squared).sum::<f64>().sqrt())
            .collect()
    }

    fn flat(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flatten()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }
}

struct Pieces {
    lap_x: DenseMatrix,
    lap_theta: DenseMatrix,
    /// `X_i B_i − C_i + Z_i`
    cfit: DenseMatrix,
    /// `A_i X_i − Y_i`
    rfit: DenseMatrix,
    /// `[Y_i]_R − [Z_i]_C − Σ a_ij (W_i − W_j)`
    coupling: DenseMatrix,
    /// `[I_{m_i}]_C Θ_i`
    theta_rows: DenseMatrix,
    /// `Θ_i [I_{r_i}]_R`
    theta_cols: DenseMatrix,
}

/// `Σ_j a_ij (V_i − V_j)` read off the full weight matrix.
fn dense_laplacian(net: &crate::network::Network, i: usize, v: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let mut acc = DenseMatrix::zeros(v[i].rows(), v[i].cols());
    for (j, vj) in v.iter().enumerate() {
        let a = net.weight(i, j);
        if a != 0.0 {
            acc.axpy(a, &v[i].sub(vj)?)?;
        }
    }
    Ok(acc)
}

fn pieces(prob: &SylvesterProblem, s: &NetworkState, i: usize) -> Result<Pieces> {
    let net = prob.network();
    let p = prob.partition();
    let (a_i, b_i, c_i) = prob.agent_data(i)?;
    let st = s.agent(i);
    let pick = |f: fn(&crate::dynamics::AgentState) -> &DenseMatrix| -> Vec<&DenseMatrix> {
        s.agents().iter().map(f).collect()
    };
    let lap_x = dense_laplacian(net, i, &pick(|a| &a.x))?;
    let lap_w = dense_laplacian(net, i, &pick(|a| &a.w))?;
    let lap_theta = dense_laplacian(net, i, &pick(|a| &a.theta))?;
    let cfit = st.x.matmul(b_i)?.sub(c_i)?.add(&st.z)?;
    let rfit = a_i.matmul(&st.x)?.sub(&st.y)?;
    let coupling = embed_row_block(&st.y, i, p)?
        .sub(&embed_col_block(&st.z, i, p)?)?
        .sub(&lap_w)?;
    Ok(Pieces {
        theta_rows: row_band_selector(i, p)?.matmul(&st.theta)?,
        theta_cols: st.theta.matmul(&col_band_selector(i, p)?)?,
        lap_x,
        lap_theta,
        cfit,
        rfit,
        coupling,
    })
}

fn check_state(prob: &SylvesterProblem, s: &NetworkState, multipliers: bool) -> Result<()> {
    if s.n() != prob.n() {
        return Err(Error::Validation(format!("state has {} agents, problem has {}", s.n(), prob.n())));
    }
    if s.has_multipliers() != multipliers {
        return Err(Error::Validation("state layout does not match this KKT system".into()));
    }
    Ok(())
}

fn transpose_mul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.transpose().matmul(b)
}

fn assemble(names: &[&'static str], rows: Vec<Vec<DenseMatrix>>) -> KktBlocks {
    let k = names.len();
    let mut blocks = vec![Vec::with_capacity(rows.len()); k];
    for agent_blocks in rows {
        for (slot, b) in blocks.iter_mut().zip(agent_blocks) {
            slot.push(b);
        }
    }
    KktBlocks {
        names: names.to_vec(),
        blocks,
    }
}

/// Per-block residuals of the least-squares KKT system.
pub fn kkt_blocks_ls(prob: &SylvesterProblem, s: &NetworkState) -> Result<KktBlocks> {
    check_state(prob, s, true)?;
    let rows = (0..prob.n())
        .map(|i| {
            let p = pieces(prob, s, i)?;
            let (a_i, b_i, _) = prob.agent_data(i)?;
            let st = s.agent(i);
            let lap_lambda = {
                let mut acc = DenseMatrix::zeros(prob.m(), prob.r());
                for &(j, a) in prob.network().neighbors(i) {
                    acc.axpy(a, &st.lambda()?.sub(s.agent(j).lambda()?)?)?;
                }
                acc
            };
            let stationarity = p
                .cfit
                .matmul(&b_i.transpose())?
                .scale(-1.0)
                .sub(&lap_lambda)?
                .sub(&transpose_mul(a_i, st.upsilon()?)?)?;
            Ok(vec![
                p.lap_x,
                p.rfit,
                p.coupling,
                stationarity,
                st.upsilon()?.sub(&p.theta_rows)?,
                p.theta_cols.sub(&p.cfit)?,
                p.lap_theta,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        &["consensus", "row_fit", "coupling", "x_stationarity", "y_stationarity", "z_stationarity", "theta_consensus"],
        rows,
    ))
}

/// Per-block residuals of the exact-solution KKT system.
///
/// The `X` line is the stationarity of the penalized objective, i.e. the
/// `Ẋ` line of the exact-solution flow: it contains the `A_iᵀ(A_i X_i − Y_i)`
/// and consensus terms and no `Λ` term.
pub fn kkt_blocks_exact(prob: &SylvesterProblem, s: &NetworkState) -> Result<KktBlocks> {
    check_state(prob, s, false)?;
    let rows = (0..prob.n())
        .map(|i| {
            let p = pieces(prob, s, i)?;
            let (a_i, b_i, _) = prob.agent_data(i)?;
            let stationarity = p
                .cfit
                .matmul(&b_i.transpose())?
                .scale(-1.0)
                .sub(&transpose_mul(a_i, &p.rfit)?)?
                .sub(&p.lap_x)?;
            Ok(vec![
                p.coupling,
                stationarity,
                p.rfit.sub(&p.theta_rows)?,
                p.theta_cols.sub(&p.cfit)?,
                p.lap_theta,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        &["coupling", "x_stationarity", "y_stationarity", "z_stationarity", "theta_consensus"],
        rows,
    ))
}

/// `−(X_i B_i − C_i + Z_i) B_iᵀ − Σ a_ij (Λ_i − Λ_j) − A_iᵀ Υ_i`
fn reg_smooth_stationarity(prob: &SylvesterProblem, s: &NetworkState, i: usize, p: &Pieces) -> Result<DenseMatrix> {
    let (a_i, b_i, _) = prob.agent_data(i)?;
    let st = s.agent(i);
    let mut lap_lambda = DenseMatrix::zeros(prob.m(), prob.r());
    for &(j, a) in prob.network().neighbors(i) {
        lap_lambda.axpy(a, &st.lambda()?.sub(s.agent(j).lambda()?)?)?;
    }
    p.cfit
        .matmul(&b_i.transpose())?
        .scale(-1.0)
        .sub(&lap_lambda)?
        .sub(&transpose_mul(a_i, st.upsilon()?)?)
}

/// Per-block residuals of the regularized KKT system with per-agent weight
/// `alpha`; the stationarity block is the distance from zero to the
/// set-valued line, computed entrywise for the L1 penalty.
pub fn kkt_blocks_reg(prob: &SylvesterProblem, s: &NetworkState, alpha: f64) -> Result<KktBlocks> {
    check_state(prob, s, true)?;
    let g = prob
        .penalty()
        .regularizer()
        .ok_or_else(|| Error::Validation("regularized KKT needs a penalty".into()))?;
    let rows = (0..prob.n())
        .map(|i| {
            let p = pieces(prob, s, i)?;
            let st = s.agent(i);
            let smooth = reg_smooth_stationarity(prob, s, i, &p)?;
            Ok(vec![
                p.lap_x.clone(),
                p.rfit.clone(),
                p.coupling.clone(),
                g.min_norm_residual(&smooth, &st.x, alpha),
                st.upsilon()?.sub(&p.theta_rows)?.add(&p.rfit)?,
                p.theta_cols.sub(&p.cfit)?,
                p.lap_theta,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        &["consensus", "row_fit", "coupling", "x_inclusion", "y_stationarity", "z_stationarity", "theta_consensus"],
        rows,
    ))
}

pub fn kkt_residual_ls(prob: &SylvesterProblem, s: &NetworkState) -> Result<f64> {
    Ok(kkt_blocks_ls(prob, s)?.residual())
}

pub fn kkt_residual_exact(prob: &SylvesterProblem, s: &NetworkState) -> Result<f64> {
    Ok(kkt_blocks_exact(prob, s)?.residual())
}

pub fn kkt_residual_reg(prob: &SylvesterProblem, s: &NetworkState, alpha: f64) -> Result<f64> {
    Ok(kkt_blocks_reg(prob, s, alpha)?.residual())
}

/// Minimum-norm solution of `F(P) = 0` for an affine `F`, over the entries
/// of `template` listed in `free` (others stay at their template values).
fn solve_affine(
    template: &NetworkState,
    free: &[usize],
    f: impl Fn(&NetworkState) -> Result<Vec<f64>>,
) -> Result<NetworkState> {
    let base_flat = template.to_flat();
    let f0 = f(template)?;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(f0.len(), free.len());
    let mut probe = template.clone();
    for (col, &k) in free.iter().enumerate() {
        let mut flat = base_flat.clone();
        flat[k] += 1.0;
        probe.set_flat(&flat)?;
        let fk = f(&probe)?;
        for (row, (a, b)) in fk.iter().zip(&f0).enumerate() {
            jac[(row, col)] = a - b;
        }
    }
    let rhs = nalgebra::DVector::from_iterator(f0.len(), f0.iter().map(|v| -v));
    let svd = jac.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max();
    let step = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Validation(format!("KKT solve failed: {e}")))?;
    let mut flat = base_flat;
    for (&k, v) in free.iter().zip(step.iter()) {
        flat[k] += v;
    }
    let mut out = template.clone();
    out.set_flat(&flat)?;
    Ok(out)
}

fn kkt_point_smooth(prob: &SylvesterProblem, algorithm: Algorithm) -> Result<NetworkState> {
    let template = NetworkState::zeros(prob, algorithm);
    let free: Vec<usize> = (0..template.dim()).collect();
    let blocks = |s: &NetworkState| match algorithm {
        Algorithm::Exact => kkt_blocks_exact(prob, s),
        _ => kkt_blocks_ls(prob, s),
    };
    let point = solve_affine(&template, &free, |s| Ok(blocks(s)?.flat()))?;
    let residual = blocks(&point)?.residual();
    if residual > 1e-9 {
        return Err(Error::NotEquilibrium {
            residual,
            tolerance: 1e-9,
        });
    }
    Ok(point)
}

/// A primal-dual point satisfying the least-squares KKT system, found by a
/// direct dense solve (no simulation involved).
pub fn kkt_point_ls(prob: &SylvesterProblem) -> Result<NetworkState> {
    kkt_point_smooth(prob, Algorithm::LeastSquares)
}

/// A point satisfying the exact-solution KKT system, by direct dense solve.
pub fn kkt_point_exact(prob: &SylvesterProblem) -> Result<NetworkState> {
    kkt_point_smooth(prob, Algorithm::Exact)
}

/// A point satisfying the regularized KKT system with per-agent weight
/// `alpha`, given a good estimate `x_hint` of the consensual minimizer.
///
/// The sign pattern of `x_hint` fixes the subgradient on its support; the
/// remaining conditions are affine and solved directly. Returns the point and
/// the subgradients `h_i*` that certify the inclusion.
pub fn kkt_point_reg(
    prob: &SylvesterProblem,
    alpha: f64,
    x_hint: &DenseMatrix,
    support_tol: f64,
) -> Result<(NetworkState, Vec<DenseMatrix>)> {
    prob.penalty()
        .regularizer()
        .ok_or_else(|| Error::Validation("regularized KKT needs a penalty".into()))?;
    let (m, r) = (prob.m(), prob.r());
    if x_hint.shape() != (m, r) {
        return Err(Error::dim("kkt_point_reg", x_hint.shape(), (m, r)));
    }
    let signs = x_hint.map(|v| if v.abs() > support_tol { v.signum() } else { 0.0 });
    let template = NetworkState::zeros(prob, Algorithm::Regularized);

    // X_i occupies the first m·r entries of each agent's slice of the flat vector
    let mut free = Vec::new();
    let mut offset = 0;
    for st in template.agents() {
        for (k, &sg) in signs.as_slice().iter().enumerate() {
            if sg != 0.0 {
                free.push(offset + k);
            }
        }
        let len: usize = st.blocks().map(|b| b.as_slice().len()).sum();
        free.extend(offset + m * r..offset + len);
        offset += len;
    }

    // On the support the subgradient is the sign; off it, every agent is
    // asked to carry the same stationarity value so that each stays inside
    // its interval whenever the consensual one does.
    let residual_fn = |s: &NetworkState| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut first_off: Option<Vec<f64>> = None;
        for i in 0..prob.n() {
            let p = pieces(prob, s, i)?;
            let st = s.agent(i);
            let mut v = reg_smooth_stationarity(prob, s, i, &p)?;
            v.axpy(-alpha, &signs)?;
            let mut off = Vec::new();
            for (&vk, &sg) in v.as_slice().iter().zip(signs.as_slice()) {
                if sg != 0.0 {
                    out.push(vk);
                } else {
                    off.push(vk);
                }
            }
            match &first_off {
                None => first_off = Some(off),
                Some(base) => out.extend(off.iter().zip(base).map(|(a, b)| a - b)),
            }
            for b in [
                &p.lap_x,
                &p.rfit,
                &p.coupling,
                &st.upsilon()?.sub(&p.theta_rows)?.add(&p.rfit)?,
                &p.theta_cols.sub(&p.cfit)?,
                &p.lap_theta,
            ] {
                out.extend_from_slice(b.as_slice());
            }
        }
        Ok(out)
    };
    let point = solve_affine(&template, &free, residual_fn)?;
    let residual = kkt_residual_reg(prob, &point, alpha)?;
    if residual > 1e-9 {
        return Err(Error::NotEquilibrium {
            residual,
            tolerance: 1e-9,
        });
    }
    let h_star = (0..prob.n())
        .map(|i| {
            let p = pieces(prob, &point, i)?;
            let raw = reg_smooth_stationarity(prob, &point, i, &p)?.scale(1.0 / alpha);
            Ok(L1Norm.project_subdifferential(&raw, &point.agent(i).x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((point, h_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::BlockPartition;
    use crate::network::Network;
    use crate::penalty::PenaltySpec;
    use crate::problem::{gen_exact_instance, oracle_regularized};

    fn small() -> SylvesterProblem {
        let p = BlockPartition::equal(3, 3, 3).unwrap();
        gen_exact_instance(p, Network::path(3).unwrap(), 12).unwrap().0
    }

    #[test]
    fn zero_problem_is_kkt() {
        let p = BlockPartition::equal(2, 2, 2).unwrap();
        let z = DenseMatrix::zeros(2, 2);
        let prob = SylvesterProblem::new(z.clone(), z.clone(), z, p, Network::path(2).unwrap(), PenaltySpec::l1(0.5).unwrap())
            .unwrap();
        assert_eq!(kkt_residual_ls(&prob, &NetworkState::zeros(&prob, Algorithm::LeastSquares)).unwrap(), 0.0);
        assert_eq!(kkt_residual_exact(&prob, &NetworkState::zeros(&prob, Algorithm::Exact)).unwrap(), 0.0);
        assert_eq!(
            kkt_residual_reg(&prob, &NetworkState::zeros(&prob, Algorithm::Regularized), 0.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn direct_kkt_points() {
        let prob = small();
        let ls = kkt_point_ls(&prob).unwrap();
        assert!(kkt_residual_ls(&prob, &ls).unwrap() <= 1e-9);
        let ex = kkt_point_exact(&prob).unwrap();
        assert!(kkt_residual_exact(&prob, &ex).unwrap() <= 1e-9);
    }

    #[test]
    fn perturbing_x_raises_residual() {
        let prob = small();
        let mut s = kkt_point_ls(&prob).unwrap();
        let base = kkt_residual_ls(&prob, &s).unwrap();
        s.agents_mut()[0].x[(0, 0)] += 1e-3;
        assert!(kkt_residual_ls(&prob, &s).unwrap() > base + 1e-4);
    }

    #[test]
    fn l1_interval_block() {
        // 1×1, single agent, B = 0: stationarity is −(0 − C + Z)·0 − Υ·A = −A Υ
        let one = DenseMatrix::column(&[1.0]);
        let prob = SylvesterProblem::new(
            one.clone(),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::zeros(1, 1),
            BlockPartition::new(vec![1], vec![1]).unwrap(),
            Network::new(1, &[]).unwrap(),
            PenaltySpec::l1(0.5).unwrap(),
        )
        .unwrap();
        let mut s = NetworkState::zeros(&prob, Algorithm::Regularized);
        // make the x_inclusion block see gradient g = 2 at X = 0, Υ = −2 => −AΥ = 2
        s.agents_mut()[0].upsilon = Some(DenseMatrix::column(&[-2.0]));
        s.agents_mut()[0].theta = DenseMatrix::column(&[-2.0]);
        let blocks = kkt_blocks_reg(&prob, &s, 0.5).unwrap();
        let k = blocks.names.iter().position(|&n| n == "x_inclusion").unwrap();
        assert!((blocks.block_norms()[k] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn regularized_kkt_point_from_oracle() {
        let p = BlockPartition::equal(3, 3, 3).unwrap();
        let (prob, _) = gen_exact_instance(p, Network::complete(3).unwrap(), 5).unwrap();
        let prob = prob.with_penalty(PenaltySpec::l1(0.1).unwrap());
        let oracle = oracle_regularized(&prob, 0.3).unwrap();
        let (point, h) = kkt_point_reg(&prob, 0.1, &oracle.x, 1e-7).unwrap();
        assert!(kkt_residual_reg(&prob, &point, 0.1).unwrap() <= 1e-9);
        assert!(point.agent(0).x.sub(&oracle.x).unwrap().frobenius_norm() < 1e-5);
        assert!(h.iter().all(|hi| hi.max_abs() <= 1.0));
    }
}
