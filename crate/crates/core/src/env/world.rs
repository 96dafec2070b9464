//! Kinematic state of the hand and the object, and the contact model.

use std::f32::consts::PI;

use super::geometry::{dot, rotate, Footprint};
use super::EnvConfig;

/// Fingertip distance from the palm axis with the finger fully open.
pub const OPEN_RADIUS: f32 = 3.5;
/// Fingertip distance from the palm axis with the finger fully closed.
pub const CLOSED_RADIUS: f32 = 0.2;
pub const TIP_RADIUS: f32 = 0.25;
/// Gap below which a fingertip counts as touching.
pub const CONTACT_TOL: f32 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub theta: f32,
}

impl Pose {
    pub fn to_array(self) -> [f32; 4] {
        [self.x, self.y, self.z, self.theta]
    }
}

/// Axis-aligned bounds on the commanded pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Workspace {
    pub x: (f32, f32),
    pub y: (f32, f32),
    pub z: (f32, f32),
    pub theta: (f32, f32),
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            x: (-8.0, 8.0),
            y: (-8.0, 8.0),
            z: (0.0, 18.0),
            theta: (-PI, PI),
        }
    }
}

impl Workspace {
    pub fn contains(&self, p: &Pose) -> bool {
        let inside = |v: f32, (lo, hi): (f32, f32)| v >= lo && v <= hi;
        inside(p.x, self.x) && inside(p.y, self.y) && inside(p.z, self.z) && inside(p.theta, self.theta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Approach,
    Closing,
    Lifting,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectState {
    pub footprint: Footprint,
    pub height: f32,
    pub heavy: bool,
    pub start: [f32; 2],
    /// Height of the object's base above the table.
    pub lift: f32,
}

impl ObjectState {
    pub fn displacement(&self) -> f32 {
        let c = self.footprint.center;
        (c[0] - self.start[0]).hypot(c[1] - self.start[1])
    }
}

/// Object pose relative to the palm while grasped.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Hold {
    offset: [f32; 2],
    yaw: f32,
    z_grasp: f32,
}

/// Result of applying one action to the world.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Motion {
    Applied,
    /// The commanded pose left the workspace and nothing moved.
    OutOfWorkspace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraspWorld {
    pub pose: Pose,
    pub joints: Vec<f32>,
    pub object: ObjectState,
    pub phase: Phase,
    pub step: u32,
    /// Point the reach reward measures against: estimated object position at
    /// grasp height.
    pub target: [f32; 3],
    /// Distance to `target` at reset.
    pub d0: f32,
    hold: Option<Hold>,
    contacts: Vec<bool>,
}

fn finger_radius(q: f32) -> f32 {
    OPEN_RADIUS + (CLOSED_RADIUS - OPEN_RADIUS) * q
}

impl GraspWorld {
    pub fn new(pose: Pose, fingers: usize, object: ObjectState, target: [f32; 3]) -> Self {
        let d0 = distance3([pose.x, pose.y, pose.z], target);
        GraspWorld {
            pose,
            joints: vec![0.0; fingers],
            object,
            phase: Phase::Approach,
            step: 0,
            target,
            d0,
            hold: None,
            contacts: vec![false; fingers],
        }
    }

    pub fn fingers(&self) -> usize {
        self.joints.len()
    }

    fn tip_at(&self, i: usize, q: f32) -> [f32; 2] {
        let angle = self.pose.theta + 2.0 * PI * i as f32 / self.fingers() as f32;
        let (s, c) = angle.sin_cos();
        let r = finger_radius(q);
        [self.pose.x + r * c, self.pose.y + r * s]
    }

    pub fn fingertip(&self, i: usize) -> [f32; 2] {
        self.tip_at(i, self.joints[i])
    }

    /// Planar clearance between fingertip `i` and the object surface,
    /// negative when penetrating.
    pub fn gap(&self, i: usize) -> f32 {
        self.object.footprint.sdf(self.fingertip(i)) - TIP_RADIUS
    }

    /// Whether the palm height lies within the object's vertical extent.
    pub fn level_with_object(&self) -> bool {
        let rel = self.pose.z - self.object.lift;
        rel >= 0.0 && rel <= self.object.height
    }

    /// The geometric contact predicate for finger `i`.
    pub fn touching(&self, i: usize) -> bool {
        self.level_with_object() && self.gap(i) <= CONTACT_TOL
    }

    pub fn contacts(&self) -> &[bool] {
        &self.contacts
    }

    pub fn contact_count(&self) -> usize {
        self.contacts.iter().filter(|&&c| c).count()
    }

    pub fn is_grasped(&self) -> bool {
        self.hold.is_some()
    }

    /// Contacts needed to carry the object off the table.
    pub fn required_contacts(&self) -> usize {
        if self.object.heavy {
            self.fingers().max(2)
        } else {
            2
        }
    }

    /// Grasped with enough contacts that raising the hand raises the object.
    pub fn is_carried(&self) -> bool {
        self.is_grasped() && self.contact_count() >= self.required_contacts()
    }

    /// At least two of `fingers` press on the object from opposing sides.
    fn has_closure(&self, fingers: &[usize]) -> bool {
        let normals: Vec<[f32; 2]> = fingers
            .iter()
            .map(|&i| self.object.footprint.normal(self.fingertip(i)))
            .collect();
        normals
            .iter()
            .enumerate()
            .any(|(k, a)| normals[k + 1..].iter().any(|b| dot(*a, *b) < 0.0))
    }

    /// Opens finger `i` just enough to stop penetrating the object.
    fn clamp_finger(&mut self, i: usize) {
        let sdf = |w: &Self, q: f32| w.object.footprint.sdf(w.tip_at(i, q)) - TIP_RADIUS;
        if sdf(self, 0.0) < 0.0 {
            self.joints[i] = 0.0;
            return;
        }
        let (mut lo, mut hi) = (0.0f32, self.joints[i]);
        for _ in 0..32 {
            let mid = 0.5 * (lo + hi);
            if sdf(self, mid) < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.joints[i] = lo;
    }

    fn planar_touching(&self) -> Vec<usize> {
        (0..self.fingers()).filter(|&i| self.gap(i) <= CONTACT_TOL).collect()
    }

    fn grasp(&mut self) {
        for i in 0..self.fingers() {
            if self.gap(i) < 0.0 {
                self.clamp_finger(i);
            }
        }
        let c = self.object.footprint.center;
        self.hold = Some(Hold {
            offset: rotate([c[0] - self.pose.x, c[1] - self.pose.y], -self.pose.theta),
            yaw: self.object.footprint.yaw - self.pose.theta,
            z_grasp: self.pose.z - self.object.lift,
        });
    }

    /// Free object: fingers that penetrate push it until two opposing
    /// contacts close a grasp.
    fn resolve_free(&mut self) {
        if !self.level_with_object() {
            return;
        }
        for _ in 0..=2 * self.fingers() {
            if self.has_closure(&self.planar_touching()) {
                self.grasp();
                return;
            }
            let deepest = (0..self.fingers())
                .map(|i| (i, self.gap(i)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .filter(|&(_, g)| g < 0.0);
            let Some((i, g)) = deepest else {
                return;
            };
            let n = self.object.footprint.normal(self.fingertip(i));
            let c = &mut self.object.footprint.center;
            c[0] += g * n[0];
            c[1] += g * n[1];
        }
    }

    /// Held object: follows the palm rigidly in the plane and rises with it
    /// only when carried; losing closure drops it.
    fn resolve_held(&mut self, hold: Hold) {
        let o = rotate(hold.offset, self.pose.theta);
        self.object.footprint.center = [self.pose.x + o[0], self.pose.y + o[1]];
        self.object.footprint.yaw = self.pose.theta + hold.yaw;
        for i in 0..self.fingers() {
            if self.gap(i) < 0.0 {
                self.clamp_finger(i);
            }
        }
        let touching = self.planar_touching();
        let carried = touching.len() >= self.required_contacts() && self.has_closure(&touching);
        self.object.lift = if carried {
            (self.pose.z - hold.z_grasp).max(0.0)
        } else {
            0.0
        };
        if !(self.level_with_object() && self.has_closure(&touching)) {
            self.hold = None;
            self.object.lift = 0.0;
        }
    }

    /// Applies scaled offsets `action` (pose deltas then joint deltas).
    pub fn advance(&mut self, action: &[f32], cfg: &EnvConfig) -> Motion {
        let next = Pose {
            x: self.pose.x + cfg.max_translation * action[0],
            y: self.pose.y + cfg.max_translation * action[1],
            z: self.pose.z + cfg.max_translation * action[2],
            theta: self.pose.theta + cfg.max_rotation * action[3],
        };
        if !cfg.workspace.contains(&next) {
            return Motion::OutOfWorkspace;
        }
        self.pose = next;
        for (q, a) in self.joints.iter_mut().zip(&action[4..]) {
            *q = (*q + cfg.max_joint * a).clamp(0.0, 1.0);
        }
        if !cfg.reach_only {
            match self.hold {
                Some(h) => self.resolve_held(h),
                None => self.resolve_free(),
            }
        }
        self.refresh_contacts(cfg.reach_only);
        Motion::Applied
    }

    pub(crate) fn refresh_contacts(&mut self, reach_only: bool) {
        for i in 0..self.fingers() {
            self.contacts[i] = !reach_only && self.touching(i);
        }
        self.phase = if self.is_grasped() {
            Phase::Lifting
        } else if self.contacts.iter().any(|&c| c) || self.joints.iter().any(|&q| q > 0.0) {
            Phase::Closing
        } else {
            Phase::Approach
        };
    }

    pub fn distance_to_target(&self) -> f32 {
        distance3([self.pose.x, self.pose.y, self.pose.z], self.target)
    }
}

pub fn distance3(a: [f32; 3], b: [f32; 3]) -> f32 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}
