use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// Layer sizes of a two-hidden-layer MLP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MlpArch {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

pub(crate) const LAYER_NAMES: [&str; 3] = ["fc1", "fc2", "head"];

impl MlpArch {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        MlpArch {
            input,
            hidden,
            output,
        }
    }

    /// `mlp2-relu:IxHxHxO`; fully determines every tensor shape.
    pub fn tag(&self) -> String {
        format!(
            "mlp2-relu:{}x{}x{}x{}",
            self.input, self.hidden, self.hidden, self.output
        )
    }

    pub fn parse_tag(tag: &str) -> Result<Self> {
        let bad = || Error::MalformedCheckpoint(format!("bad arch tag `{tag}`"));
        let body = tag.strip_prefix("mlp2-relu:").ok_or_else(bad)?;
        let sizes: Vec<usize> = body
            .split('x')
            .map(|s| s.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match sizes.as_slice() {
            [i, h1, h2, o] if h1 == h2 && *i > 0 && *h1 > 0 && *o > 0 => {
                Ok(MlpArch::new(*i, *h1, *o))
            }
            _ => Err(bad()),
        }
    }

    /// `(fan_in, fan_out)` for each of the three affine layers.
    pub fn layer_dims(&self) -> [(usize, usize); 3] {
        [
            (self.input, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.output),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// How the output layer is initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadInit {
    /// Same uniform fan-in scaling as the hidden layers.
    FanIn,
    /// All-zero weights and biases: the network outputs exactly zero.
    Zero,
}

/// Named weight/bias tensors of one MLP, in a fixed order:
/// `fc1.weight, fc1.bias, fc2.weight, fc2.bias, head.weight, head.bias`.
/// Weights are stored `[fan_in, fan_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T = f32> {
    arch: MlpArch,
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros(arch: MlpArch) -> Self {
        let mut entries = Vec::with_capacity(6);
        for (name, (i, o)) in LAYER_NAMES.iter().zip(arch.layer_dims()) {
            entries.push((format!("{name}.weight"), Tensor::zeros(&[i, o])));
            entries.push((format!("{name}.bias"), Tensor::zeros(&[o])));
        }
        ParamSet { arch, entries }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(arch: MlpArch, head: HeadInit, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        for (layer, (fan_in, _)) in arch.layer_dims().into_iter().enumerate() {
            if layer == 2 && head == HeadInit::Zero {
                continue;
            }
            let bound = 1.0 / (fan_in as f32).sqrt();
            for k in [2 * layer, 2 * layer + 1] {
                for v in p.entries[k].1.data_mut() {
                    *v = T::of_f32(rng.gen_range(-bound..bound));
                }
            }
        }
        p
    }

    /// Rebuilds a parameter set from named tensors, validating every shape
    /// against `arch`.
    pub fn from_entries(arch: MlpArch, entries: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let expected = Self::zeros(arch);
        if entries.len() != expected.entries.len() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "expected {} tensors for {}, got {}",
                expected.entries.len(),
                arch.tag(),
                entries.len()
            )));
        }
        for ((en, et), (gn, gt)) in expected.entries.iter().zip(&entries) {
            if en != gn || et.dims() != gt.dims() {
                return Err(Error::IncompatibleCheckpoint(format!(
                    "tensor `{gn}` {:?} does not match `{en}` {:?} of {}",
                    gt.dims(),
                    et.dims(),
                    arch.tag()
                )));
            }
        }
        Ok(ParamSet { arch, entries })
    }

    pub fn arch(&self) -> MlpArch {
        self.arch
    }

    pub fn arch_tag(&self) -> String {
        self.arch.tag()
    }

    pub fn entries(&self) -> &[(String, Tensor<T>)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    /// Weight and bias slices of layer `l` (0, 1 = hidden, 2 = head).
    pub(crate) fn layer(&self, l: usize) -> (&[T], &[T]) {
        (self.entries[2 * l].1.data(), self.entries[2 * l + 1].1.data())
    }

    pub(crate) fn layer_mut(&mut self, l: usize) -> (&mut [T], &mut [T]) {
        let (w, b) = self.entries[2 * l..2 * l + 2].split_at_mut(1);
        (w[0].1.data_mut(), b[0].1.data_mut())
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_finite())
    }

    pub fn ensure_same_arch(&self, other: &ParamSet<T>) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::dim(format!(
                "arch {} vs {}",
                self.arch.tag(),
                other.arch.tag()
            )));
        }
        Ok(())
    }

    /// All values, concatenated in entry order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, t) in &self.entries {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// `self[i] = f(self[i], other[i])` elementwise.
    pub fn zip_apply(&mut self, other: &ParamSet<T>, mut f: impl FnMut(T, T) -> T) -> Result<()> {
        self.ensure_same_arch(other)?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = f(*x, y);
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            arch: self.arch,
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn tag_round_trip() {
        let a = MlpArch::new(43, 64, 14);
        assert_eq!(a.tag(), "mlp2-relu:43x64x64x14");
        assert_eq!(MlpArch::parse_tag(&a.tag()).unwrap(), a);
        assert!(MlpArch::parse_tag("mlp2-relu:4x5x6x1").is_err());
        assert!(MlpArch::parse_tag("conv:1").is_err());
    }

    #[test]
    fn init_respects_fan_in_bound_and_zero_head() {
        let arch = MlpArch::new(16, 32, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p: ParamSet = ParamSet::init(arch, HeadInit::Zero, &mut rng);
        let w1 = p.get("fc1.weight").unwrap();
        assert_eq!(w1.dims(), &[16, 32]);
        assert!(w1.data().iter().all(|v| v.abs() <= 0.25));
        assert!(p.get("fc2.bias").unwrap().data().iter().any(|&v| v != 0.0));
        assert!(p.get("head.weight").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(p.get("head.bias").unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(p.num_params(), arch.num_params());
    }

    #[test]
    fn entry_order_is_fixed() {
        let p: ParamSet = ParamSet::zeros(MlpArch::new(2, 3, 1));
        let names: Vec<&str> = p.iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            [
                "fc1.weight",
                "fc1.bias",
                "fc2.weight",
                "fc2.bias",
                "head.weight",
                "head.bias"
            ]
        );
    }

    #[test]
    fn from_entries_rejects_wrong_shapes() {
        let a = MlpArch::new(2, 3, 1);
        let b = MlpArch::new(2, 4, 1);
        let p: ParamSet = ParamSet::zeros(b);
        assert!(ParamSet::from_entries(a, p.entries().to_vec()).is_err());
        let q: ParamSet = ParamSet::zeros(a);
        assert!(ParamSet::from_entries(a, q.entries().to_vec()).is_ok());
    }
}
