use crate::nn::{Graph, Matrix, NnError, NodeId, Real};

/// Loss nodes. `entropy` is the mean policy entropy (the bonus before scaling).
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: NodeId,
    pub policy: NodeId,
    pub value: NodeId,
    pub entropy: NodeId,
}

fn column<T: Real>(v: &[f64]) -> Matrix<T> {
    Matrix::from_vec(v.len(), 1, v.iter().map(|&x| T::from_f64(x)).collect())
}

/// Actor-critic losses over `R` rows.
///
/// `advantages` and `returns` are constants. With `ppo = Some((old_log_probs, clip))`
/// the policy term is the clipped surrogate, otherwise the plain
/// advantage-weighted log-likelihood.
#[allow(clippy::too_many_arguments)]
pub fn pg_losses<T: Real>(
    g: &mut Graph<'_, T>,
    logits: NodeId,
    actions: &[usize],
    advantages: &[f64],
    values: NodeId,
    returns: &[f64],
    ppo: Option<(&[f64], f64)>,
    entropy_coef: f64,
) -> Result<LossParts, NnError> {
    let rows = g.shape(logits).0;
    if actions.len() != rows || advantages.len() != rows || returns.len() != rows || g.shape(values) != (rows, 1) {
        return Err(NnError::ShapeMismatch {
            op: "pg loss",
            left: (rows, 1),
            right: (actions.len(), advantages.len()),
        });
    }
    let logp = g.log_softmax(logits);
    let lp = g.gather(logp, actions.to_vec())?;
    let adv = column::<T>(advantages);
    let surrogate = match ppo {
        None => g.mul_const(lp, adv)?,
        Some((old, clip)) => {
            let old = g.input(column(old));
            let diff = g.sub(lp, old)?;
            let ratio = g.exp(diff);
            let s1 = g.mul_const(ratio, adv.clone())?;
            let clipped = g.clamp(ratio, 1.0 - clip, 1.0 + clip);
            let s2 = g.mul_const(clipped, adv)?;
            g.min(s1, s2)?
        }
    };
    let mean_surrogate = g.mean(surrogate);
    let policy = g.scale(mean_surrogate, -1.0);

    let ret = g.input(column(returns));
    let err = g.sub(ret, values)?;
    let sq = g.square(err);
    let value = g.mean(sq);

    let p = g.exp(logp);
    let plogp = g.mul(p, logp)?;
    let row_sum = g.sum_cols(plogp);
    let mean_neg_entropy = g.mean(row_sum);
    let entropy = g.scale(mean_neg_entropy, -1.0);

    let pv = g.add(policy, value)?;
    let bonus = g.scale(entropy, -entropy_coef);
    let total = g.add(pv, bonus)?;
    Ok(LossParts {
        total,
        policy,
        value,
        entropy,
    })
}
