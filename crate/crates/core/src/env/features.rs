//! Per-step feature frames and the temporal difference stacker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::world::GraspWorld;
use crate::{Error, Result};

/// Length of one feature frame for `fingers` fingers.
pub fn frame_len(fingers: usize) -> usize {
    5 + fingers
}

/// `[f_t ‖ f_t - f_{t-1} ‖ f_{t-1} - f_{t-2}]`.
pub fn flare_stack(f_t: &[f32], f_tm1: &[f32], f_tm2: &[f32]) -> Result<Vec<f32>> {
    if f_tm1.len() != f_t.len() || f_tm2.len() != f_t.len() {
        return Err(Error::dim(format!(
            "flare frames of lengths {}, {}, {}",
            f_t.len(),
            f_tm1.len(),
            f_tm2.len()
        )));
    }
    let mut out = Vec::with_capacity(3 * f_t.len());
    out.extend_from_slice(f_t);
    out.extend(f_t.iter().zip(f_tm1).map(|(a, b)| a - b));
    out.extend(f_tm1.iter().zip(f_tm2).map(|(a, b)| a - b));
    Ok(out)
}

/// Noiseless descriptor: object-minus-palm offsets (x, y, z to the object's
/// mid height), object size and height, then each fingertip's clearance.
pub fn geometric_frame(world: &GraspWorld) -> Vec<f32> {
    let o = &world.object;
    let c = o.footprint.center;
    let mut f = Vec::with_capacity(frame_len(world.fingers()));
    f.push(c[0] - world.pose.x);
    f.push(c[1] - world.pose.y);
    f.push(o.lift + 0.5 * o.height - world.pose.z);
    f.push(o.footprint.size);
    f.push(o.height);
    f.extend((0..world.fingers()).map(|i| world.gap(i)));
    f
}

/// [`geometric_frame`] plus Gaussian noise of scale `sigma`, keyed by
/// `(noise_key, world.step)` so the same world always yields the same frame.
pub fn feature_frame(world: &GraspWorld, sigma: f32, noise_key: u64) -> Vec<f32> {
    let mut f = geometric_frame(world);
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_key);
        rng.set_stream(u64::from(world.step));
        for v in &mut f {
            *v += sigma * rng.sample::<f32, _>(StandardNormal);
        }
    }
    f
}

/// The last three frames, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameHistory {
    frames: [Vec<f32>; 3],
}

impl FrameHistory {
    /// History holding three copies of `f`, so both difference blocks start
    /// at zero.
    pub fn primed(f: Vec<f32>) -> Self {
        FrameHistory {
            frames: [f.clone(), f.clone(), f],
        }
    }

    pub fn push(&mut self, f: Vec<f32>) {
        self.frames.rotate_right(1);
        self.frames[0] = f;
    }

    pub fn stacked(&self) -> Vec<f32> {
        flare_stack(&self.frames[0], &self.frames[1], &self.frames[2]).expect("equal frame lengths")
    }
}
