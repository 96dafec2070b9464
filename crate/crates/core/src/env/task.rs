//! Object/task specifications: the pretraining family and the held-out set.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::geometry::ShapeFamily;
use crate::{Error, Result};

/// Object-agnostic grasp pose generator used to place the pre-grasp pose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraspGenerator {
    /// Close to the estimated centroid at mid height.
    Centroid,
    /// Wider lateral, yaw and height perturbations.
    Perturbed,
}

impl fmt::Display for GraspGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraspGenerator::Centroid => "centroid",
            GraspGenerator::Perturbed => "perturbed",
        })
    }
}

impl FromStr for GraspGenerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(GraspGenerator::Centroid),
            "perturbed" => Ok(GraspGenerator::Perturbed),
            other => Err(Error::InvalidTask(format!("unknown grasp generator {other:?}"))),
        }
    }
}

/// Everything that defines an environment instance apart from the episode
/// seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub family: ShapeFamily,
    /// Radius (cylinder) or half-width (box).
    pub size: f32,
    pub height: f32,
    /// Objects heavier than [`HEAVY_MASS`] need every finger in contact to
    /// be carried.
    pub mass: f32,
    pub pose_seed: u64,
    pub generator: GraspGenerator,
}

pub const HEAVY_MASS: f32 = 1.0;

/// Sampling ranges of the pretraining family.
pub const PRETRAIN_SIZE: (f32, f32) = (0.8, 1.6);
pub const PRETRAIN_HEIGHT: (f32, f32) = (1.5, 4.0);
pub const PRETRAIN_MASS: (f32, f32) = (0.2, 1.0);

/// Held-out objects: each lies outside the pretraining ranges in at least
/// one coordinate.
pub const HELDOUT: &[(&str, ShapeFamily, f32, f32, f32)] = &[
    ("heavy_can", ShapeFamily::Cylinder, 1.2, 3.0, 1.8),
    ("small_jar", ShapeFamily::Cylinder, 0.35, 1.2, 0.4),
    ("wide_box", ShapeFamily::Box, 1.9, 2.0, 0.8),
    ("flat_box", ShapeFamily::Box, 1.1, 0.9, 0.5),
    ("tall_can", ShapeFamily::Cylinder, 1.0, 5.5, 0.9),
    ("marker", ShapeFamily::Cylinder, 0.3, 3.0, 0.2),
    ("dice", ShapeFamily::Box, 0.35, 1.0, 0.3),
];

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidTask(format!("{}: {what}", self.name)));
        if !(self.size.is_finite() && self.size > 0.05 && self.size <= 2.0) {
            return bad("size must lie in (0.05, 2.0]");
        }
        if !(self.height.is_finite() && self.height > 0.1 && self.height <= 7.5) {
            return bad("height must lie in (0.1, 7.5]");
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad("mass must be positive");
        }
        Ok(())
    }

    pub fn is_heavy(&self) -> bool {
        self.mass > HEAVY_MASS
    }

    pub fn heldout(name: &str) -> Result<TaskSpec> {
        HELDOUT
            .iter()
            .find(|h| h.0 == name)
            .map(|&(name, family, size, height, mass)| TaskSpec {
                name: name.to_string(),
                family,
                size,
                height,
                mass,
                pose_seed: 0,
                generator: GraspGenerator::Perturbed,
            })
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))
    }

    /// `key = value` lines in the run configuration syntax.
    pub fn to_config(&self) -> String {
        format!(
            "task.name = {}\ntask.family = {}\ntask.size = {}\ntask.height = {}\ntask.mass = {}\ntask.pose_seed = {}\ntask.generator = {}\n",
            self.name, self.family, self.size, self.height, self.mass, self.pose_seed, self.generator
        )
    }

    /// Inverse of [`TaskSpec::to_config`].
    pub fn from_config(text: &str) -> Result<TaskSpec> {
        let mut fields = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidTask(format!("malformed line {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            fields
                .get(&format!("task.{k}"))
                .cloned()
                .ok_or_else(|| Error::InvalidTask(format!("missing task.{k}")))
        };
        let num = |k: &str| -> Result<f32> {
            get(k)?.parse().map_err(|_| Error::InvalidTask(format!("task.{k} is not a number")))
        };
        let spec = TaskSpec {
            name: get("name")?,
            family: get("family")?.parse()?,
            size: num("size")?,
            height: num("height")?,
            mass: num("mass")?,
            pose_seed: get("pose_seed")?
                .parse()
                .map_err(|_| Error::InvalidTask("task.pose_seed is not an integer".into()))?,
            generator: get("generator")?.parse()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws a task from `family`: `"pretrain"` samples the broad training
/// ranges, any held-out name returns its constant spec.
pub fn object_sampler<R: Rng + ?Sized>(family: &str, rng: &mut R) -> Result<TaskSpec> {
    if family != "pretrain" {
        return TaskSpec::heldout(family);
    }
    let shape = if rng.gen_bool(0.5) {
        ShapeFamily::Cylinder
    } else {
        ShapeFamily::Box
    };
    Ok(TaskSpec {
        name: "pretrain".into(),
        family: shape,
        size: rng.gen_range(PRETRAIN_SIZE.0..=PRETRAIN_SIZE.1),
        height: rng.gen_range(PRETRAIN_HEIGHT.0..=PRETRAIN_HEIGHT.1),
        mass: rng.gen_range(PRETRAIN_MASS.0..=PRETRAIN_MASS.1),
        pose_seed: rng.gen(),
        generator: if rng.gen_bool(0.5) {
            GraspGenerator::Centroid
        } else {
            GraspGenerator::Perturbed
        },
    })
}

/// Which tasks a run's episodes are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskDistribution {
    Fixed(TaskSpec),
    /// A fresh pretraining-family object every episode.
    Pretrain,
}

impl TaskDistribution {
    /// `"pretrain"` or a held-out object name.
    pub fn named(name: &str) -> Result<Self> {
        if name == "pretrain" {
            Ok(TaskDistribution::Pretrain)
        } else {
            Ok(TaskDistribution::Fixed(TaskSpec::heldout(name)?))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TaskSpec> {
        match self {
            TaskDistribution::Fixed(t) => Ok(t.clone()),
            TaskDistribution::Pretrain => object_sampler("pretrain", rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn in_range(x: f32, r: (f32, f32)) -> bool {
        x >= r.0 && x <= r.1
    }

    #[test]
    fn pretrain_samples_within_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t = object_sampler("pretrain", &mut rng).unwrap();
            assert!(in_range(t.size, PRETRAIN_SIZE));
            assert!(in_range(t.height, PRETRAIN_HEIGHT));
            assert!(in_range(t.mass, PRETRAIN_MASS));
            t.validate().unwrap();
        }
    }

    #[test]
    fn heldout_are_constant_and_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for h in HELDOUT {
            let a = object_sampler(h.0, &mut rng).unwrap();
            let b = object_sampler(h.0, &mut rng).unwrap();
            assert_eq!(a, b);
            a.validate().unwrap();
            let inside = in_range(a.size, PRETRAIN_SIZE)
                && in_range(a.height, PRETRAIN_HEIGHT)
                && in_range(a.mass, PRETRAIN_MASS);
            assert!(!inside, "{} overlaps the pretraining ranges", h.0);
        }
    }

    #[test]
    fn unknown_family_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(object_sampler("teapot", &mut rng), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn config_round_trip() {
        let t = TaskSpec::heldout("wide_box").unwrap();
        assert_eq!(TaskSpec::from_config(&t.to_config()).unwrap(), t);
    }
}
