//! Convex penalties `g(X)` for the regularized problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

/// A convex, possibly nonsmooth matrix penalty.
pub trait Regularizer: Send + Sync {
    fn value(&self, x: &DenseMatrix) -> f64;

    /// A fixed single-valued selection from `∂g(x)`.
    fn subgradient(&self, x: &DenseMatrix) -> DenseMatrix;

    /// `argmin_u  t·g(u) + ½‖u − x‖²`
    fn prox(&self, x: &DenseMatrix, t: f64) -> DenseMatrix;

    /// The element of `v − t·∂g(x)` with least Frobenius norm.
    fn min_norm_residual(&self, v: &DenseMatrix, x: &DenseMatrix, t: f64) -> DenseMatrix;

    /// Euclidean projection of `h` onto `∂g(x)`.
    fn project_subdifferential(&self, h: &DenseMatrix, x: &DenseMatrix) -> DenseMatrix;
}

/// Entrywise absolute sum `|X|_1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct L1Norm;

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip_map(a: &DenseMatrix, b: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    assert_eq!(a.shape(), b.shape(), "penalty operands must share a shape");
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(&p, &q)| f(p, q)).collect();
    DenseMatrix::new(a.rows(), a.cols(), data).expect("shape preserved")
}

impl Regularizer for L1Norm {
    fn value(&self, x: &DenseMatrix) -> f64 {
        x.l1_norm()
    }

    /// `sign(x)` entrywise with `sign(0) = 0`.
    fn subgradient(&self, x: &DenseMatrix) -> DenseMatrix {
        x.map(sign0)
    }

    fn prox(&self, x: &DenseMatrix, t: f64) -> DenseMatrix {
        x.map(|v| soft_threshold(v, t))
    }

    fn min_norm_residual(&self, v: &DenseMatrix, x: &DenseMatrix, t: f64) -> DenseMatrix {
        zip_map(v, x, |vi, xi| if xi != 0.0 { vi - t * sign0(xi) } else { soft_threshold(vi, t) })
    }

    fn project_subdifferential(&self, h: &DenseMatrix, x: &DenseMatrix) -> DenseMatrix {
        zip_map(h, x, |hi, xi| if xi != 0.0 { sign0(xi) } else { hi.clamp(-1.0, 1.0) })
    }
}

/// Penalty attached to a problem bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PenaltySpec {
    None,
    L1 { alpha: f64 },
}

impl PenaltySpec {
    pub fn l1(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Validation(format!("L1 weight must be positive, got {alpha}")));
        }
        Ok(PenaltySpec::L1 { alpha })
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            PenaltySpec::None => None,
            PenaltySpec::L1 { alpha } => Some(alpha),
        }
    }

    pub fn regularizer(&self) -> Option<&'static dyn Regularizer> {
        match self {
            PenaltySpec::None => None,
            PenaltySpec::L1 { .. } => Some(&L1Norm),
        }
    }

    /// `none` or `l1 <alpha>`.
    pub fn to_line(&self) -> String {
        match self {
            PenaltySpec::None => "none".to_string(),
            PenaltySpec::L1 { alpha } => format!("l1 {alpha:.16e}"),
        }
    }

    pub fn parse_line(line: &str, source_name: &str) -> Result<Self> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[..] {
            ["none"] => Ok(PenaltySpec::None),
            ["l1", a] => {
                let alpha: f64 = a
                    .parse()
                    .map_err(|e| Error::parse(source_name, format!("bad alpha {a:?}: {e}")))?;
                Self::l1(alpha)
            }
            _ => Err(Error::parse(source_name, format!("penalty must be `none` or `l1 <alpha>`, got {line:?}"))),
        }
    }
}

/// How the bundle's `alpha` is shared out among agents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    /// Every agent carries the full `alpha`; the consensual objective then
    /// weighs the penalty by `n·alpha`.
    #[default]
    AsWritten,
    /// Every agent carries `alpha / n`, so the consensual objective weighs
    /// the penalty by exactly `alpha`.
    Centralized,
}

impl AlphaMode {
    pub fn agent_alpha(self, alpha: f64, n: usize) -> f64 {
        match self {
            AlphaMode::AsWritten => alpha,
            AlphaMode::Centralized => alpha / n as f64,
        }
    }

    /// Weight of `g(X)` in the centralized objective reached at consensus.
    pub fn effective_alpha(self, alpha: f64, n: usize) -> f64 {
        n as f64 * self.agent_alpha(alpha, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn sign_selection() {
        let h = L1Norm.subgradient(&m(&[&[2.0, 0.0], &[-3.0, 1.0]]));
        assert_eq!(h, m(&[&[1.0, 0.0], &[-1.0, 1.0]]));
        assert_eq!(L1Norm.subgradient(&DenseMatrix::zeros(2, 2)), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn prox_is_soft_threshold() {
        let p = L1Norm.prox(&m(&[&[3.0, -0.5, -2.0]]), 1.0);
        assert_eq!(p, m(&[&[2.0, 0.0, -1.0]]));
    }

    #[test]
    fn min_norm_residual_interval_logic() {
        // at x = 0 the entry contributes max(0, |v| - t) in magnitude
        let v = m(&[&[0.3, -2.0, 5.0]]);
        let x = m(&[&[0.0, 0.0, 1.0]]);
        let r = L1Norm.min_norm_residual(&v, &x, 1.0);
        assert_eq!(r, m(&[&[0.0, -1.0, 4.0]]));
    }

    #[test]
    fn projection_onto_subdifferential() {
        let h = m(&[&[0.3, -2.0, 0.9]]);
        let x = m(&[&[0.0, 0.0, -1.0]]);
        assert_eq!(L1Norm.project_subdifferential(&h, &x), m(&[&[0.3, -1.0, -1.0]]));
    }

    #[test]
    fn penalty_lines() {
        assert_eq!(PenaltySpec::parse_line("none", "t").unwrap(), PenaltySpec::None);
        let p = PenaltySpec::parse_line("l1 0.1", "t").unwrap();
        assert_eq!(p.alpha(), Some(0.1));
        assert_eq!(PenaltySpec::parse_line(&p.to_line(), "t").unwrap(), p);
        assert!(PenaltySpec::parse_line("l1 -1", "t").is_err());
        assert!(PenaltySpec::parse_line("l2 1", "t").is_err());
    }

    #[test]
    fn alpha_modes() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(AlphaMode::AsWritten.effective_alpha(0.1, 3), 0.3));
        assert_eq!(AlphaMode::AsWritten.agent_alpha(0.1, 3), 0.1);
        assert!(close(AlphaMode::Centralized.effective_alpha(0.3, 3), 0.3));
        assert!(close(AlphaMode::Centralized.agent_alpha(0.3, 3), 0.1));
    }
}
