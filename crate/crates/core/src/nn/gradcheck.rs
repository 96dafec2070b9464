//! Central-difference gradient checking.

use super::mlp::{backward, forward};
use super::params::ParamSet;
use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// Numerical gradient of `loss` with respect to every parameter:
/// `(L(p + h) - L(p - h)) / 2h`.
pub fn central_differences<T: Scalar>(
    params: &ParamSet<T>,
    h: T,
    mut loss: impl FnMut(&ParamSet<T>) -> Result<T>,
) -> Result<ParamSet<T>> {
    let mut probe = params.clone();
    let mut numeric = ParamSet::zeros(params.arch());
    let two_h = h + h;
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let n = params.get(name).unwrap().len();
        for i in 0..n {
            let orig = params.get(name).unwrap().data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = orig + h;
            let plus = loss(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[i] = orig - h;
            let minus = loss(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[i] = orig;
            numeric.get_mut(name).unwrap().data_mut()[i] = (plus - minus) / two_h;
        }
    }
    Ok(numeric)
}

/// `max |analytic - numeric| / (|numeric| + 1e-8)` over all entries.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> T {
    let floor = T::lit(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / (n.abs() + floor))
        .fold(T::zero(), T::max)
}

/// Compares backprop gradients of `loss_fn(mlp(input))` against central
/// differences. `loss_fn` returns the loss and its gradient with respect to
/// the network output.
pub fn finite_diff_check<T: Scalar>(
    params: &ParamSet<T>,
    input: &Tensor<T>,
    loss_fn: impl Fn(&Tensor<T>) -> (T, Tensor<T>),
    h: T,
) -> Result<T> {
    if h <= T::zero() {
        return Err(Error::InvalidArgument("finite difference step must be > 0".into()));
    }
    let pass = forward(params, input)?;
    let (_, upstream) = loss_fn(pass.output());
    let analytic = backward(params, &pass, &upstream)?.grads;
    let numeric = central_differences(params, h, |p| {
        let out = forward(p, input)?;
        Ok(loss_fn(out.output()).0)
    })?;
    Ok(max_relative_error(&analytic.flatten(), &numeric.flatten()))
}
