//! SAC loss values and their analytic gradients, generic over the scalar
//! type so the same code can be checked in `f64` against finite differences.

use super::policy::{squash_batch, SquashedBatch, SQUASH_EPS};
use super::replay::Batch;
use crate::nn::{backward, concat_cols, forward, input_gradient, ParamSet, Scalar, Tensor};
use crate::{Error, Result};

/// How the policy output becomes the executed action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Composition<T> {
    /// The actor sees `s` and its output is the action.
    Plain,
    /// The actor sees `[s ‖ a_pre]` and the executed action is
    /// `clip(a_pre + scale * a_policy, -1, 1)`.
    Residual { scale: T },
}

impl<T: Scalar> Composition<T> {
    pub fn actor_input(&self, obs: &[T], a_pre: &[T], rows: usize, obs_dim: usize, d: usize) -> Result<Tensor<T>> {
        match self {
            Composition::Plain => Tensor::matrix(rows, obs_dim, obs.to_vec()),
            Composition::Residual { .. } => {
                Tensor::matrix(rows, obs_dim + d, concat_cols(obs, obs_dim, a_pre, d))
            }
        }
    }

    /// Executed action and its elementwise derivative with respect to the
    /// policy action.
    pub fn compose(&self, a_pre: &[T], a_policy: &[T]) -> (Vec<T>, Vec<T>) {
        match *self {
            Composition::Plain => (a_policy.to_vec(), vec![T::one(); a_policy.len()]),
            Composition::Residual { scale } => {
                let one = T::one();
                a_pre
                    .iter()
                    .zip(a_policy)
                    .map(|(&p, &a)| {
                        let s = p + scale * a;
                        if s > one {
                            (one, T::zero())
                        } else if s < -one {
                            (-one, T::zero())
                        } else {
                            (s, scale)
                        }
                    })
                    .unzip()
            }
        }
    }
}

fn critic_input<T: Scalar>(obs: &[T], actions: &[T], rows: usize, obs_dim: usize, d: usize) -> Result<Tensor<T>> {
    Tensor::matrix(rows, obs_dim + d, concat_cols(obs, obs_dim, actions, d))
}

fn check_noise<T>(noise: &[T], batch: &Batch<T>) -> Result<()> {
    if noise.len() != batch.rows * batch.action_dim {
        return Err(Error::dim(format!(
            "noise has {} values for a {}x{} batch",
            noise.len(),
            batch.rows,
            batch.action_dim
        )));
    }
    Ok(())
}

/// Soft Bellman targets
/// `y = r + γ (1 - done) (min(Q̄1, Q̄2)(s', a') - α log π(a'|s'))`,
/// with `a'` drawn from the current actor at `s'` using `next_noise`.
#[allow(clippy::too_many_arguments)]
pub fn critic_targets<T: Scalar>(
    actor: &ParamSet<T>,
    target1: &ParamSet<T>,
    target2: &ParamSet<T>,
    alpha: T,
    gamma: T,
    batch: &Batch<T>,
    next_noise: &[T],
    comp: Composition<T>,
) -> Result<Vec<T>> {
    if batch.rows == 0 {
        return Err(Error::State("empty batch".into()));
    }
    check_noise(next_noise, batch)?;
    let (rows, od, d) = (batch.rows, batch.obs_dim, batch.action_dim);
    let actor_in = comp.actor_input(&batch.next_obs, &batch.a_pre_next, rows, od, d)?;
    let head = forward(actor, &actor_in)?.into_output();
    let sq = squash_batch(&head, next_noise, d)?;
    let (a_next, _) = comp.compose(&batch.a_pre_next, &sq.action);
    let q_in = critic_input(&batch.next_obs, &a_next, rows, od, d)?;
    let q1 = forward(target1, &q_in)?.into_output();
    let q2 = forward(target2, &q_in)?.into_output();
    let one = T::one();
    let y: Vec<T> = (0..rows)
        .map(|r| {
            let q = q1.data()[r].min(q2.data()[r]);
            batch.rewards[r] + gamma * (one - batch.done[r]) * (q - alpha * sq.log_prob[r])
        })
        .collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("critic targets".into()));
    }
    Ok(y)
}

/// Mean squared error of `critic(s, a)` against `targets`, and its gradient.
pub fn critic_loss_grad<T: Scalar>(
    critic: &ParamSet<T>,
    batch: &Batch<T>,
    targets: &[T],
) -> Result<(T, ParamSet<T>)> {
    let (rows, od, d) = (batch.rows, batch.obs_dim, batch.action_dim);
    let pass = forward(critic, &critic_input(&batch.obs, &batch.actions, rows, od, d)?)?;
    let n = T::from_usize(rows).unwrap();
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut up = Vec::with_capacity(rows);
    for (q, &y) in pass.output().data().iter().zip(targets) {
        let diff = *q - y;
        loss = loss + diff * diff;
        up.push(two * diff / n);
    }
    let loss = loss / n;
    let grads = backward(critic, &pass, &Tensor::matrix(rows, 1, up)?)?.grads;
    Ok((loss, grads))
}

pub fn critic_loss<T: Scalar>(critic: &ParamSet<T>, batch: &Batch<T>, targets: &[T]) -> Result<T> {
    let (rows, od, d) = (batch.rows, batch.obs_dim, batch.action_dim);
    let q = forward(critic, &critic_input(&batch.obs, &batch.actions, rows, od, d)?)?.into_output();
    let n = T::from_usize(rows).unwrap();
    let s = q
        .data()
        .iter()
        .zip(targets)
        .fold(T::zero(), |acc, (&q, &y)| acc + (q - y) * (q - y));
    Ok(s / n)
}

/// Result of an actor loss evaluation.
#[derive(Clone, Debug)]
pub struct ActorLoss<T> {
    pub loss: T,
    pub grads: Option<ParamSet<T>>,
    /// Log-probability of each sampled policy action (pre-composition).
    pub log_probs: Vec<T>,
}

/// `mean(α log π(a|s) - min(Q1, Q2)(s, compose(a)))` with reparameterized
/// actions `a = tanh(mean + std * noise)`.
#[allow(clippy::too_many_arguments)]
pub fn actor_loss<T: Scalar>(
    actor: &ParamSet<T>,
    critic1: &ParamSet<T>,
    critic2: &ParamSet<T>,
    alpha: T,
    batch: &Batch<T>,
    noise: &[T],
    comp: Composition<T>,
    with_grad: bool,
) -> Result<ActorLoss<T>> {
    if batch.rows == 0 {
        return Err(Error::State("empty batch".into()));
    }
    check_noise(noise, batch)?;
    let (rows, od, d) = (batch.rows, batch.obs_dim, batch.action_dim);
    let actor_in = comp.actor_input(&batch.obs, &batch.a_pre, rows, od, d)?;
    let pass = forward(actor, &actor_in)?;
    let sq: SquashedBatch<T> = squash_batch(pass.output(), noise, d)?;
    let (a_total, da_total) = comp.compose(&batch.a_pre, &sq.action);
    let q_in = critic_input(&batch.obs, &a_total, rows, od, d)?;
    let p1 = forward(critic1, &q_in)?;
    let p2 = forward(critic2, &q_in)?;

    let n = T::from_usize(rows).unwrap();
    let mut loss = T::zero();
    let mut pick_first = Vec::with_capacity(rows);
    for r in 0..rows {
        let (q1, q2) = (p1.output().data()[r], p2.output().data()[r]);
        let first = q1 <= q2;
        pick_first.push(first);
        loss = loss + alpha * sq.log_prob[r] - if first { q1 } else { q2 };
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::Numeric("actor loss".into()));
    }
    if !with_grad {
        return Ok(ActorLoss {
            loss,
            grads: None,
            log_probs: sq.log_prob,
        });
    }

    // dL/dQ_min = -1/n, routed to whichever critic attained the minimum.
    let neg = -T::one() / n;
    let up1: Vec<T> = pick_first.iter().map(|&f| if f { neg } else { T::zero() }).collect();
    let up2: Vec<T> = pick_first.iter().map(|&f| if f { T::zero() } else { neg }).collect();
    let cols = od..od + d;
    let g1 = input_gradient(critic1, &p1, &Tensor::matrix(rows, 1, up1)?, cols.clone())?;
    let g2 = input_gradient(critic2, &p2, &Tensor::matrix(rows, 1, up2)?, cols)?;

    let one = T::one();
    let two = T::lit(2.0);
    let eps = T::lit(SQUASH_EPS);
    let a_over_n = alpha / n;
    let mut head_grad = vec![T::zero(); rows * 2 * d];
    for r in 0..rows {
        for i in 0..d {
            let k = r * d + i;
            let a = sq.action[k];
            let dq = g1.data()[k] + g2.data()[k];
            // log π contains -ln(1 - a² + eps); its derivative wrt a:
            let d_logp_da = two * a / (one - a * a + eps);
            let d_a = a_over_n * d_logp_da + dq * da_total[k];
            let d_u = d_a * (one - a * a);
            head_grad[r * 2 * d + i] = d_u;
            if sq.log_std_free[k] {
                // log π also contains -log_std directly.
                head_grad[r * 2 * d + d + i] = -a_over_n + d_u * sq.std[k] * sq.noise[k];
            }
        }
    }
    let grads = backward(actor, &pass, &Tensor::matrix(rows, 2 * d, head_grad)?)?.grads;
    Ok(ActorLoss {
        loss,
        grads: Some(grads),
        log_probs: sq.log_prob,
    })
}

/// Entropy-coefficient loss `-mean(log_alpha * (log π + target_entropy))`
/// and its derivative with respect to `log_alpha`.
pub fn alpha_loss_grad<T: Scalar>(log_alpha: T, log_probs: &[T], target_entropy: T) -> (T, T) {
    let n = T::from_usize(log_probs.len().max(1)).unwrap();
    let mean = log_probs
        .iter()
        .fold(T::zero(), |acc, &lp| acc + (lp + target_entropy))
        / n;
    (-log_alpha * mean, -mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_composition_clips_and_masks() {
        let c = Composition::Residual { scale: 1.0f32 };
        let (a, da) = c.compose(&[0.8, 0.3, 0.2], &[0.5, -0.1, 0.0]);
        assert_eq!(a[0], 1.0);
        assert!((a[1] - 0.2).abs() < 1e-7);
        assert_eq!(a[2], 0.2);
        assert_eq!(da, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn alpha_gradient_sign() {
        // log π above -target (entropy too low) => negative gradient => α grows
        let (_, g) = alpha_loss_grad(0.0f64, &[10.0, 12.0], -7.0);
        assert!(g < 0.0);
        let (_, g) = alpha_loss_grad(0.0f64, &[7.0, 7.0], -7.0);
        assert_eq!(g, 0.0);
    }
}
