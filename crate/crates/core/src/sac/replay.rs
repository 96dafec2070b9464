use rand::Rng;

use crate::nn::{Scalar, Tensor};
use crate::{Error, Result};

/// One environment step. `action` is the action actually executed; for
/// residual agents `a_pre`/`a_pre_next` hold the frozen base policy's action
/// at `obs`/`next_obs` (zeros otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    pub a_pre: Vec<f32>,
    pub a_pre_next: Vec<f32>,
    /// Genuine terminal state; no bootstrapping.
    pub done: bool,
    /// Time limit reached; bootstraps like a non-terminal step.
    pub truncated: bool,
}

impl Transition {
    pub fn validate(&self, obs_dim: usize, action_dim: usize) -> Result<()> {
        if self.obs.len() != obs_dim || self.next_obs.len() != obs_dim {
            return Err(Error::dim(format!(
                "transition obs {} / {}, expected {obs_dim}",
                self.obs.len(),
                self.next_obs.len()
            )));
        }
        for (name, v) in [
            ("action", &self.action),
            ("a_pre", &self.a_pre),
            ("a_pre_next", &self.a_pre_next),
        ] {
            if v.len() != action_dim {
                return Err(Error::dim(format!(
                    "transition {name} has {} values, expected {action_dim}",
                    v.len()
                )));
            }
        }
        if self.action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("transition action outside [-1, 1]".into()));
        }
        if self.done && self.truncated {
            return Err(Error::InvalidArgument("transition both done and truncated".into()));
        }
        Ok(())
    }
}

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::new(),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform indices with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        if n > self.items.len() {
            return Err(Error::State(format!(
                "requested {n} samples from a buffer holding {}",
                self.items.len()
            )));
        }
        Ok((0..n).map(|_| rng.gen_range(0..self.items.len())).collect())
    }

    pub fn get(&self, idx: usize) -> Option<&Transition> {
        self.items.get(idx)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch<f32>> {
        let idx = self.sample_indices(n, rng)?;
        Batch::from_transitions(idx.iter().map(|&i| &self.items[i]))
    }
}

/// Column-major view of a minibatch: each field is `[rows, width]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T = f32> {
    pub rows: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub obs: Vec<T>,
    pub actions: Vec<T>,
    pub rewards: Vec<T>,
    pub next_obs: Vec<T>,
    pub a_pre: Vec<T>,
    pub a_pre_next: Vec<T>,
    /// 1 for genuine terminals, 0 otherwise (including truncation).
    pub done: Vec<T>,
}

impl Batch<f32> {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Result<Self> {
        let items: Vec<&Transition> = items.into_iter().collect();
        let first = items
            .first()
            .ok_or_else(|| Error::State("empty batch".into()))?;
        let (od, ad) = (first.obs.len(), first.action.len());
        let mut b = Batch {
            rows: items.len(),
            obs_dim: od,
            action_dim: ad,
            obs: Vec::with_capacity(items.len() * od),
            actions: Vec::with_capacity(items.len() * ad),
            rewards: Vec::with_capacity(items.len()),
            next_obs: Vec::with_capacity(items.len() * od),
            a_pre: Vec::with_capacity(items.len() * ad),
            a_pre_next: Vec::with_capacity(items.len() * ad),
            done: Vec::with_capacity(items.len()),
        };
        for t in items {
            t.validate(od, ad)?;
            b.obs.extend_from_slice(&t.obs);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
            b.next_obs.extend_from_slice(&t.next_obs);
            b.a_pre.extend_from_slice(&t.a_pre);
            b.a_pre_next.extend_from_slice(&t.a_pre_next);
            b.done.push(if t.done { 1.0 } else { 0.0 });
        }
        Ok(b)
    }
}

impl<T: Scalar> Batch<T> {
    pub fn cast<U: Scalar>(&self) -> Batch<U> {
        let c = |v: &Vec<T>| v.iter().map(|&x| U::from(x).unwrap()).collect::<Vec<U>>();
        Batch {
            rows: self.rows,
            obs_dim: self.obs_dim,
            action_dim: self.action_dim,
            obs: c(&self.obs),
            actions: c(&self.actions),
            rewards: c(&self.rewards),
            next_obs: c(&self.next_obs),
            a_pre: c(&self.a_pre),
            a_pre_next: c(&self.a_pre_next),
            done: c(&self.done),
        }
    }

    pub fn obs_tensor(&self) -> Result<Tensor<T>> {
        Tensor::matrix(self.rows, self.obs_dim, self.obs.clone())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    pub(crate) fn tagged(seq: u32) -> Transition {
        Transition {
            obs: vec![seq as f32, 0.5],
            action: vec![0.25],
            reward: seq as f32,
            next_obs: vec![seq as f32 + 1.0, -0.5],
            a_pre: vec![0.0],
            a_pre_next: vec![0.0],
            done: seq % 2 == 0,
            truncated: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for s in 1..=4 {
            b.push(tagged(s));
        }
        assert_eq!(b.len(), 3);
        let seqs: Vec<f32> = b.iter_fifo().map(|t| t.reward).collect();
        assert_eq!(seqs, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_sample_is_state_error() {
        let b = ReplayBuffer::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample(1, &mut rng), Err(Error::State(_))));
    }

    #[test]
    fn sample_preserves_fields() {
        let mut b = ReplayBuffer::new(8).unwrap();
        let t = Transition {
            obs: vec![0.1, f32::MIN_POSITIVE],
            action: vec![-1.0],
            reward: 1e-7,
            next_obs: vec![3.0e5, -0.0],
            a_pre: vec![0.3],
            a_pre_next: vec![-0.3],
            done: false,
            truncated: true,
        };
        b.push(t.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx = b.sample_indices(1, &mut rng).unwrap();
        assert_eq!(b.get(idx[0]).unwrap(), &t);
        let batch = b.sample(1, &mut rng).unwrap();
        assert_eq!(batch.obs, t.obs);
        assert_eq!(batch.next_obs[1].to_bits(), (-0.0f32).to_bits());
        assert_eq!(batch.done, vec![0.0]);
    }

    #[test]
    fn rejects_out_of_range_actions() {
        let mut t = tagged(1);
        t.action = vec![1.5];
        assert!(Batch::from_transitions([&t]).is_err());
    }
}
