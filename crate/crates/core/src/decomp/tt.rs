use super::DecompositionResult;
use crate::error::{Result, TensorError};
use crate::forms::{rel_error_values, EfficientForm, TensorTT};
use crate::linalg::svd;
use crate::ops::{norm, to_row_major};
use crate::tensor::Tensor;
use crate::Matrix;

/// How TT-SVD chooses its bond dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum TtTarget {
    /// Relative error budget; each of the N-1 truncations may discard at most
    /// `eps / sqrt(N-1) * ||x||` of Frobenius norm.
    Eps(f64),
    /// Explicit inner bond dimensions `r_1 .. r_{N-1}`.
    Ranks(Vec<usize>),
}

/// Sequential truncated-SVD tensor-train decomposition.
pub fn tt_svd(x: &Tensor, target: &TtTarget) -> Result<DecompositionResult> {
    let shape = x.shape();
    let order = shape.len();
    let steps = order - 1;
    match target {
        TtTarget::Eps(eps) => {
            if !(*eps > 0.0) || !eps.is_finite() {
                return Err(TensorError::Argument(format!("eps must be > 0, got {eps}")));
            }
        }
        TtTarget::Ranks(r) => {
            if r.len() != steps {
                return Err(TensorError::Argument(format!(
                    "{} bond ranks given, an order-{order} tensor needs {steps}",
                    r.len()
                )));
            }
        }
    }
    let delta = match target {
        TtTarget::Eps(eps) if steps > 0 => eps / (steps as f64).sqrt() * norm(x.values()),
        _ => 0.0,
    };

    let mut cores = Vec::with_capacity(order);
    let mut rest = x.values().to_vec();
    let mut bond = 1usize;
    for k in 0..steps {
        let rows = bond * shape[k];
        let cols = rest.len() / rows;
        let m = Matrix::from_row_slice(rows, cols, &rest);
        let d = svd(&m)?;
        let available = d.rank();
        let r = match target {
            TtTarget::Ranks(ranks) => {
                let r = ranks[k];
                if r < 1 || r > available {
                    return Err(TensorError::Argument(format!(
                        "bond rank {r} at position {} outside 1..={available}",
                        k + 1
                    )));
                }
                r
            }
            TtTarget::Eps(_) => {
                // smallest r with discarded tail energy <= delta^2
                let budget = delta * delta;
                let mut tail = 0.0;
                let mut r = available;
                while r > 1 {
                    let s = d.s[r - 1];
                    if tail + s * s > budget {
                        break;
                    }
                    tail += s * s;
                    r -= 1;
                }
                r
            }
        };
        let d = d.truncate(r);
        cores.push(Tensor::new(vec![bond, shape[k], r], to_row_major(&d.u))?);
        let mut sv = d.vt;
        for (i, s) in d.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(*s);
        }
        rest = to_row_major(&sv);
        bond = r;
    }
    cores.push(Tensor::new(vec![bond, shape[order - 1], 1], rest)?);

    let tt = TensorTT::new(cores, Some(x.modes().to_vec()))?;
    let err = rel_error_values(x.values(), tt.reconstruct()?.values());
    Ok(DecompositionResult {
        form: tt.into(),
        iterations: 1,
        error_trace: vec![err],
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_is_single_core() {
        let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let res = tt_svd(&x, &TtTarget::Eps(0.1)).unwrap();
        assert_eq!(res.form.as_tt().unwrap().ranks(), vec![1, 1]);
        assert_eq!(res.rel_error(), 0.0);
    }

    #[test]
    fn bad_targets() {
        let x = Tensor::zeros(vec![2, 3, 4]).unwrap();
        assert!(tt_svd(&x, &TtTarget::Eps(0.0)).is_err());
        assert!(tt_svd(&x, &TtTarget::Ranks(vec![1])).is_err());
        assert!(tt_svd(&x, &TtTarget::Ranks(vec![3, 1])).is_err());
        assert!(tt_svd(&x, &TtTarget::Ranks(vec![2, 0])).is_err());
    }

    #[test]
    fn explicit_full_ranks_are_exact() {
        let vals: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x = Tensor::new(vec![2, 3, 4], vals).unwrap();
        let res = tt_svd(&x, &TtTarget::Ranks(vec![2, 4])).unwrap();
        assert!(res.rel_error() < 1e-12);
    }
}
