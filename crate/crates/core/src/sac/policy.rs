//! Squashed-Gaussian policy head: `a = tanh(mean + exp(log_std) * noise)`.

use crate::nn::{forward, ParamSet, Scalar, Tensor};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside the tanh log-det correction.
pub const SQUASH_EPS: f64 = 1e-6;

/// Per-row quantities of a reparameterized squashed-Gaussian sample, kept
/// for the backward pass.
#[derive(Clone, Debug)]
pub struct SquashedBatch<T> {
    pub dim: usize,
    /// `[rows, dim]` clamped log standard deviations.
    pub log_std: Vec<T>,
    /// Whether the raw log_std was inside the clamp range (gradient passes).
    pub log_std_free: Vec<bool>,
    pub std: Vec<T>,
    pub noise: Vec<T>,
    /// `[rows, dim]` squashed actions.
    pub action: Vec<T>,
    /// One log-density per row.
    pub log_prob: Vec<T>,
}

/// Splits an actor head output `[rows, 2*dim]` into mean / log_std halves
/// and draws the squashed sample for the given standard-normal noise.
pub fn squash_batch<T: Scalar>(head: &Tensor<T>, noise: &[T], dim: usize) -> Result<SquashedBatch<T>> {
    if head.last_dim() != 2 * dim {
        return Err(Error::dim(format!(
            "actor head has {} outputs, expected {}",
            head.last_dim(),
            2 * dim
        )));
    }
    let rows = head.rows();
    if noise.len() != rows * dim {
        return Err(Error::dim(format!(
            "noise has {} values, expected {}",
            noise.len(),
            rows * dim
        )));
    }
    let lo = T::lit(LOG_STD_MIN);
    let hi = T::lit(LOG_STD_MAX);
    let eps = T::lit(SQUASH_EPS);
    let half = T::lit(0.5);
    let half_log_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    let one = T::one();
    // tanh rounds to ±1 in f32 beyond |u| ≈ 9; keep actions strictly inside.
    let lim = one - T::epsilon();

    let mut out = SquashedBatch {
        dim,
        log_std: Vec::with_capacity(rows * dim),
        log_std_free: Vec::with_capacity(rows * dim),
        std: Vec::with_capacity(rows * dim),
        noise: noise.to_vec(),
        action: Vec::with_capacity(rows * dim),
        log_prob: Vec::with_capacity(rows),
    };
    for r in 0..rows {
        let row = head.row(r);
        let mut lp = T::zero();
        for i in 0..dim {
            let raw = row[dim + i];
            let ls = raw.max(lo).min(hi);
            let sd = ls.exp();
            let e = noise[r * dim + i];
            let a = (row[i] + sd * e).tanh().max(-lim).min(lim);
            lp = lp - half * e * e - ls - half_log_2pi - (one - a * a + eps).ln();
            out.log_std.push(ls);
            out.log_std_free.push(raw >= lo && raw <= hi);
            out.std.push(sd);
            out.action.push(a);
        }
        if !lp.is_finite() {
            return Err(Error::Numeric("policy log-probability".into()));
        }
        out.log_prob.push(lp);
    }
    Ok(out)
}

/// Single-sample squashed Gaussian: returns the action and its log-density
/// (Gaussian log-density of the pre-squash sample minus the tanh
/// log-Jacobian). `log_std` is clamped to `[-20, 2]`.
pub fn squashed_gaussian_sample<T: Scalar>(
    mean: &[T],
    log_std: &[T],
    noise: &[T],
) -> Result<(Vec<T>, T)> {
    let d = mean.len();
    if log_std.len() != d || noise.len() != d {
        return Err(Error::dim(format!(
            "mean {d}, log_std {}, noise {}",
            log_std.len(),
            noise.len()
        )));
    }
    if mean.iter().chain(log_std).chain(noise).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("squashed gaussian input".into()));
    }
    let mut head = mean.to_vec();
    head.extend_from_slice(log_std);
    let head = Tensor::new(vec![1, 2 * d], head)?;
    let s = squash_batch(&head, noise, d)?;
    Ok((s.action, s.log_prob[0]))
}

/// Evaluation-time action `tanh(mean)` of an actor for one observation.
pub fn deterministic_action(actor: &ParamSet, obs: &[f32]) -> Result<Vec<f32>> {
    let d = actor.arch().output / 2;
    let out = forward(actor, &Tensor::vector(obs)?)?.into_output();
    let lim = 1.0 - f32::EPSILON;
    Ok(out.data()[..d].iter().map(|m| m.tanh().clamp(-lim, lim)).collect())
}

/// Stochastic action for one observation with the given noise; returns the
/// action and its log-probability.
pub fn sample_action(actor: &ParamSet, obs: &[f32], noise: &[f32]) -> Result<(Vec<f32>, f32)> {
    let d = actor.arch().output / 2;
    let out = forward(actor, &Tensor::matrix(1, obs.len(), obs.to_vec())?)?.into_output();
    let s = squash_batch(&out, noise, d)?;
    Ok((s.action, s.log_prob[0]))
}
