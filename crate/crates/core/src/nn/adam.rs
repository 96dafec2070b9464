use super::params::ParamSet;
use super::tensor::Scalar;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a list of parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments for blocks of the given lengths.
    pub fn for_blocks(lengths: &[usize], config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_params(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let lengths: Vec<usize> = params.iter().map(|(_, t)| t.len()).collect();
        Self::for_blocks(&lengths, config)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    /// Resets moments and the step counter.
    pub fn reset(&mut self) {
        self.step = 0;
        for b in self.m.iter_mut().chain(self.v.iter_mut()) {
            b.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// One bias-corrected Adam step over parallel parameter/gradient blocks.
    pub fn step_blocks<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut [T]>,
        grads: impl IntoIterator<Item = &'a [T]>,
    ) -> Result<()> {
        let params: Vec<&mut [T]> = params.into_iter().collect();
        let grads: Vec<&[T]> = grads.into_iter().collect();
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dim(format!(
                "adam tracks {} blocks, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(&grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::dim(format!(
                    "adam block of {} values, got param {} grad {}",
                    m.len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::lit(c.beta1);
        let b2 = T::lit(c.beta2);
        let one = T::one();
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);

        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Applies one step to a parameter set.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        params.ensure_same_arch(grads)?;
        self.step_blocks(
            params.tensors_mut().map(|t| t.data_mut()),
            grads.iter().map(|(_, t)| t.data()),
        )
    }
}
