use std::ops::Range;

use super::params::{MlpArch, ParamSet};
use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// Activations recorded by [`forward`], consumed by [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardPass<T = f32> {
    arch: MlpArch,
    rows: usize,
    input: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
    output: Tensor<T>,
}

impl<T: Scalar> ForwardPass<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    pub fn into_output(self) -> Tensor<T> {
        self.output
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Parameter gradients plus the gradient with respect to the input.
#[derive(Clone, Debug)]
pub struct Backward<T = f32> {
    pub grads: ParamSet<T>,
    pub input_grad: Tensor<T>,
}

fn out_dims(input: &Tensor<impl Scalar>, out: usize) -> Vec<usize> {
    let mut d = input.dims().to_vec();
    *d.last_mut().unwrap() = out;
    d
}

/// `C (m×n) ← A B + β C` where `A` is `m×k` and `B` is `k×n`, both given
/// by element strides into row-major slices.
#[allow(clippy::too_many_arguments)]
fn matmul<T: Scalar>(
    (m, k, n): (usize, usize, usize),
    a: &[T],
    (rsa, csa): (usize, usize),
    b: &[T],
    (rsb, csb): (usize, usize),
    beta: T,
    c: &mut [T],
) {
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        c[..m * n].iter_mut().for_each(|x| *x = beta * *x);
        return;
    }
    assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len());
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` is a distinct mutable borrow.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// `out[r] = b + x[r] · W` for every row, `W` stored `[in, out]`.
fn affine<T: Scalar>(x: &[T], n_in: usize, w: &[T], b: &[T], out: &mut [T]) {
    let n_out = b.len();
    let rows = x.len() / n_in;
    for or in out.chunks_exact_mut(n_out) {
        or.copy_from_slice(b);
    }
    matmul((rows, n_in, n_out), x, (n_in, 1), w, (n_out, 1), T::one(), out);
}

fn relu<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Accumulates `dW += xᵀ δ` and `db += Σ δ`.
fn affine_param_grads<T: Scalar>(x: &[T], n_in: usize, delta: &[T], dw: &mut [T], db: &mut [T]) {
    let n_out = db.len();
    let rows = x.len() / n_in;
    for dr in delta.chunks_exact(n_out) {
        for (b, &d) in db.iter_mut().zip(dr) {
            *b = *b + d;
        }
    }
    matmul((n_in, rows, n_out), x, (1, n_in), delta, (n_out, 1), T::one(), dw);
}

/// `dx[r, i] = Σ_j W[i, j] δ[r, j]` for `i` in `cols`; `dx` has `cols.len()`
/// columns.
fn affine_input_grad<T: Scalar>(
    w: &[T],
    n_out: usize,
    delta: &[T],
    cols: Range<usize>,
    dx: &mut [T],
) {
    let rows = delta.len() / n_out;
    let w = &w[cols.start * n_out..cols.end * n_out];
    matmul((rows, n_out, cols.len()), delta, (n_out, 1), w, (1, n_out), T::zero(), dx);
}

/// Multiplies `delta` by the ReLU derivative, read off the post-activation.
fn relu_backward<T: Scalar>(delta: &mut [T], post: &[T]) {
    for (d, &h) in delta.iter_mut().zip(post) {
        if h <= T::zero() {
            *d = T::zero();
        }
    }
}

/// Two ReLU hidden layers and a linear head. `input` is `[in]` or `[rows, in]`.
pub fn forward<T: Scalar>(params: &ParamSet<T>, input: &Tensor<T>) -> Result<ForwardPass<T>> {
    let arch = params.arch();
    if input.last_dim() != arch.input {
        return Err(Error::dim(format!(
            "input last dim {} but {} expects {}",
            input.last_dim(),
            arch.tag(),
            arch.input
        )));
    }
    let rows = input.rows();
    let x = input.data();

    let mut h1 = vec![T::zero(); rows * arch.hidden];
    let (w, b) = params.layer(0);
    affine(x, arch.input, w, b, &mut h1);
    relu(&mut h1);

    let mut h2 = vec![T::zero(); rows * arch.hidden];
    let (w, b) = params.layer(1);
    affine(&h1, arch.hidden, w, b, &mut h2);
    relu(&mut h2);

    let mut out = vec![T::zero(); rows * arch.output];
    let (w, b) = params.layer(2);
    affine(&h2, arch.hidden, w, b, &mut out);

    let output = Tensor::new(out_dims(input, arch.output), out)?;
    output.ensure_finite("mlp output")?;
    Ok(ForwardPass {
        arch,
        rows,
        input: x.to_vec(),
        h1,
        h2,
        output,
    })
}

fn check_pass<T: Scalar>(params: &ParamSet<T>, pass: &ForwardPass<T>, upstream: &Tensor<T>) -> Result<()> {
    if pass.arch != params.arch() {
        return Err(Error::State(format!(
            "forward pass recorded for {} but backward called with {}",
            pass.arch.tag(),
            params.arch_tag()
        )));
    }
    if upstream.dims() != pass.output.dims() {
        return Err(Error::dim(format!(
            "upstream grad {:?} vs output {:?}",
            upstream.dims(),
            pass.output.dims()
        )));
    }
    Ok(())
}

/// Backpropagates through the two hidden layers, returning δ at the first
/// hidden layer's pre-activation and filling the head/fc2 gradients when
/// `grads` is given.
fn backprop_to_fc1<T: Scalar>(
    params: &ParamSet<T>,
    pass: &ForwardPass<T>,
    upstream: &[T],
    mut grads: Option<&mut ParamSet<T>>,
) -> Vec<T> {
    let arch = pass.arch;
    let rows = pass.rows;

    if let Some(g) = grads.as_deref_mut() {
        let (dw, db) = g.layer_mut(2);
        affine_param_grads(&pass.h2, arch.hidden, upstream, dw, db);
    }
    let mut d2 = vec![T::zero(); rows * arch.hidden];
    affine_input_grad(params.layer(2).0, arch.output, upstream, 0..arch.hidden, &mut d2);
    relu_backward(&mut d2, &pass.h2);

    if let Some(g) = grads.as_deref_mut() {
        let (dw, db) = g.layer_mut(1);
        affine_param_grads(&pass.h1, arch.hidden, &d2, dw, db);
    }
    let mut d1 = vec![T::zero(); rows * arch.hidden];
    affine_input_grad(params.layer(1).0, arch.hidden, &d2, 0..arch.hidden, &mut d1);
    relu_backward(&mut d1, &pass.h1);
    d1
}

/// Gradients of `Σ upstream ⊙ output` with respect to every parameter and
/// to the input.
pub fn backward<T: Scalar>(
    params: &ParamSet<T>,
    pass: &ForwardPass<T>,
    upstream: &Tensor<T>,
) -> Result<Backward<T>> {
    check_pass(params, pass, upstream)?;
    let arch = pass.arch;
    let mut grads = ParamSet::zeros(arch);
    let d1 = backprop_to_fc1(params, pass, upstream.data(), Some(&mut grads));
    {
        let (dw, db) = grads.layer_mut(0);
        affine_param_grads(&pass.input, arch.input, &d1, dw, db);
    }
    let mut dx = vec![T::zero(); pass.rows * arch.input];
    affine_input_grad(params.layer(0).0, arch.hidden, &d1, 0..arch.input, &mut dx);
    Ok(Backward {
        grads,
        input_grad: Tensor::new(pass.input_dims(), dx)?,
    })
}

/// Gradient with respect to input columns `cols` only; skips parameter
/// gradients. Result is `[rows, cols.len()]`.
pub fn input_gradient<T: Scalar>(
    params: &ParamSet<T>,
    pass: &ForwardPass<T>,
    upstream: &Tensor<T>,
    cols: Range<usize>,
) -> Result<Tensor<T>> {
    check_pass(params, pass, upstream)?;
    if cols.end > pass.arch.input || cols.is_empty() {
        return Err(Error::dim(format!(
            "input columns {cols:?} out of range for {}",
            pass.arch.tag()
        )));
    }
    let d1 = backprop_to_fc1(params, pass, upstream.data(), None);
    let mut dx = vec![T::zero(); pass.rows * cols.len()];
    let width = cols.len();
    affine_input_grad(params.layer(0).0, pass.arch.hidden, &d1, cols, &mut dx);
    Tensor::matrix(pass.rows, width, dx)
}

impl<T: Scalar> ForwardPass<T> {
    fn input_dims(&self) -> Vec<usize> {
        let mut d = self.output.dims().to_vec();
        *d.last_mut().unwrap() = self.arch.input;
        d
    }
}

/// A parameter set together with the activations of its latest forward
/// call, for callers that prefer a stateful forward/backward pair.
#[derive(Clone, Debug)]
pub struct Mlp<T = f32> {
    pub params: ParamSet<T>,
    last: Option<ForwardPass<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(params: ParamSet<T>) -> Self {
        Mlp { params, last: None }
    }

    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let pass = forward(&self.params, input)?;
        let out = pass.output().clone();
        self.last = Some(pass);
        Ok(out)
    }

    pub fn backward(&self, upstream: &Tensor<T>) -> Result<Backward<T>> {
        let pass = self
            .last
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        backward(&self.params, pass, upstream)
    }
}
