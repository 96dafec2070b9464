//! Binary checkpoint format.
//!
//! Layout, all integers 32-bit little-endian:
//!
//! ```text
//! "RSPRECT1"            8-byte magic
//! version               u32
//! metadata length, text UTF-8 `key=value` lines
//! tensor count          u32
//! per tensor:
//!   name length, name   UTF-8
//!   rank, dims[rank]
//!   data                f32 little-endian, product(dims) values
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::nn::{AdamConfig, MlpArch, ParamSet, Tensor};
use crate::residual::{PretrainedPolicy, ResidualAgent};
use crate::sac::{AgentBundle, BundleSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSPRECT1";
pub const VERSION: u32 = 1;

/// Metadata plus ordered named tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(Error::Truncated(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let n = self.u32(what)? as usize;
        String::from_utf8(self.take(n, what)?.to_vec())
            .map_err(|_| Error::MalformedCheckpoint(format!("{what} is not UTF-8")))
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::MalformedCheckpoint(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint {
            metadata: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::MalformedCheckpoint(format!("missing metadata `{key}`")))
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::IncompatibleCheckpoint(format!("missing tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::MalformedCheckpoint(format!("metadata entry {k:?} not encodable")));
            }
            meta.push_str(&format!("{k}={v}\n"));
        }
        put_u32(&mut out, meta.len())?;
        out.extend_from_slice(meta.as_bytes());
        put_u32(&mut out, self.tensors.len())?;
        for (name, t) in &self.tensors {
            put_u32(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.dims().len())?;
            for &d in t.dims() {
                put_u32(&mut out, d)?;
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if buf.len() < MAGIC.len() {
            return Err(Error::Truncated("magic"));
        }
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let mut metadata = BTreeMap::new();
        for line in r.string("metadata")?.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedCheckpoint(format!("metadata line {line:?}")))?;
            metadata.insert(k.to_string(), v.to_string());
        }
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = r.string("tensor name")?;
            let rank = r.u32("tensor rank")? as usize;
            let mut dims = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                dims.push(r.u32("tensor dims")? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::MalformedCheckpoint(format!("tensor `{name}` too large")))?;
            let raw = r.take(n, "tensor data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = Tensor::new(dims, data).map_err(|e| Error::MalformedCheckpoint(format!("tensor `{name}`: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != buf.len() {
            return Err(Error::MalformedCheckpoint(format!(
                "{} trailing bytes",
                buf.len() - r.pos
            )));
        }
        Ok(Checkpoint { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    pub fn push_params(&mut self, prefix: &str, p: &ParamSet) {
        self.set_meta(&format!("{prefix}.arch"), p.arch_tag());
        for (name, t) in p.iter() {
            self.tensors.push((format!("{prefix}/{name}"), t.clone()));
        }
    }

    /// Rebuilds the parameter set stored under `prefix`, checking the
    /// recorded architecture tag against the tensors.
    pub fn params(&self, prefix: &str) -> Result<ParamSet> {
        let arch = MlpArch::parse_tag(self.meta(&format!("{prefix}.arch"))?)
            .map_err(|e| Error::IncompatibleCheckpoint(format!("{prefix}: {e}")))?;
        let entries = ParamSet::<f32>::zeros(arch)
            .iter()
            .map(|(name, _)| Ok((name.to_string(), self.tensor(&format!("{prefix}/{name}"))?.clone())))
            .collect::<Result<Vec<_>>>()?;
        ParamSet::from_entries(arch, entries)
    }

    /// Actor, critics, targets and `log_alpha` of a bundle. Optimizer state
    /// is not stored.
    pub fn from_bundle(b: &AgentBundle) -> Self {
        let mut c = Checkpoint::new();
        c.set_meta("kind", "bundle");
        c.set_meta("obs_dim", b.obs_dim());
        c.set_meta("action_dim", b.action_dim());
        c.set_meta("target_entropy", b.target_entropy);
        for (prefix, p) in [
            ("actor", &b.actor),
            ("critic1", &b.critic1),
            ("critic2", &b.critic2),
            ("target1", &b.target1),
            ("target2", &b.target2),
        ] {
            c.push_params(prefix, p);
        }
        c.tensors.push(("log_alpha".into(), Tensor::filled(&[1], b.log_alpha)));
        c
    }

    /// A residual agent: its own networks plus the frozen base under
    /// `base/`.
    pub fn from_residual(agent: &ResidualAgent) -> Self {
        let mut c = Self::from_bundle(&agent.inner);
        c.set_meta("kind", "residual");
        c.set_meta("residual_scale", agent.residual_scale());
        let base = agent.base();
        c.push_params("base/actor", base.actor());
        c.push_params("base/critic1", base.critic1());
        c.push_params("base/critic2", base.critic2());
        c
    }

    /// The frozen base policy view of a bundle checkpoint (actor and the two
    /// online critics).
    pub fn pretrained_policy(&self) -> Result<PretrainedPolicy> {
        PretrainedPolicy::new(self.params("actor")?, self.params("critic1")?, self.params("critic2")?)
    }

    pub fn residual_base(&self) -> Result<PretrainedPolicy> {
        PretrainedPolicy::new(
            self.params("base/actor")?,
            self.params("base/critic1")?,
            self.params("base/critic2")?,
        )
    }

    fn usize_meta(&self, key: &str) -> Result<usize> {
        self.meta(key)?
            .parse()
            .map_err(|_| Error::MalformedCheckpoint(format!("metadata `{key}` is not an integer")))
    }

    /// Restores a trainable bundle with fresh optimizer state.
    pub fn agent_bundle(&self, adam: AdamConfig) -> Result<AgentBundle> {
        let actor = self.params("actor")?;
        let critic1 = self.params("critic1")?;
        let critic2 = self.params("critic2")?;
        let obs_dim = self.usize_meta("obs_dim")?;
        let action_dim = self.usize_meta("action_dim")?;
        let la = self.tensor("log_alpha")?;
        if la.len() != 1 {
            return Err(Error::MalformedCheckpoint("log_alpha must hold one value".into()));
        }
        let target_entropy = self
            .meta("target_entropy")?
            .parse()
            .map_err(|_| Error::MalformedCheckpoint("target_entropy".into()))?;
        let residual_actor = actor.arch().input == obs_dim + action_dim;
        let spec = BundleSpec {
            obs_dim,
            action_dim,
            hidden: critic1.arch().hidden,
            residual_actor,
            actor_head: crate::nn::HeadInit::FanIn,
            init_alpha: la.data()[0].exp(),
            target_entropy,
            adam,
        };
        if actor.arch() != spec.actor_arch() || critic1.arch() != spec.critic_arch() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "networks {} / {} do not match obs {obs_dim}, action {action_dim}",
                actor.arch_tag(),
                critic1.arch_tag()
            )));
        }
        let mut b = AgentBundle::from_parts(&spec, actor, critic1, critic2, la.data()[0]);
        b.target1 = self.params("target1")?;
        b.target2 = self.params("target2")?;
        b.critic1.ensure_same_arch(&b.target1)?;
        b.critic2.ensure_same_arch(&b.target2)?;
        Ok(b)
    }
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self::new()
    }
}
