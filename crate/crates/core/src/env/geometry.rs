//! Planar object footprints as signed distance functions.

use std::fmt;
use std::str::FromStr;

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeFamily {
    /// Circular footprint; `size` is the radius.
    Cylinder,
    /// Square footprint; `size` is the half-width.
    Box,
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeFamily::Cylinder => "cylinder",
            ShapeFamily::Box => "box",
        })
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "cylinder" => Ok(ShapeFamily::Cylinder),
            "box" => Ok(ShapeFamily::Box),
            other => Err(Error::InvalidTask(format!("unknown shape family {other:?}"))),
        }
    }
}

pub fn rotate(v: [f32; 2], angle: f32) -> [f32; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

pub fn norm(v: [f32; 2]) -> f32 {
    v[0].hypot(v[1])
}

pub fn dot(a: [f32; 2], b: [f32; 2]) -> f32 {
    a[0] * b[0] + a[1] * b[1]
}

fn sign(x: f32) -> f32 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// A footprint placed at `center` and rotated by `yaw`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Footprint {
    pub family: ShapeFamily,
    pub size: f32,
    pub center: [f32; 2],
    pub yaw: f32,
}

impl Footprint {
    fn to_local(&self, p: [f32; 2]) -> [f32; 2] {
        rotate([p[0] - self.center[0], p[1] - self.center[1]], -self.yaw)
    }

    /// Signed distance from `p` to the boundary, negative inside.
    pub fn sdf(&self, p: [f32; 2]) -> f32 {
        let l = self.to_local(p);
        match self.family {
            ShapeFamily::Cylinder => norm(l) - self.size,
            ShapeFamily::Box => {
                let qx = l[0].abs() - self.size;
                let qy = l[1].abs() - self.size;
                let outside = norm([qx.max(0.0), qy.max(0.0)]);
                outside + qx.max(qy).min(0.0)
            }
        }
    }

    /// Unit outward normal of the nearest boundary point.
    pub fn normal(&self, p: [f32; 2]) -> [f32; 2] {
        let l = self.to_local(p);
        let n = match self.family {
            ShapeFamily::Cylinder => {
                let r = norm(l);
                if r > 0.0 {
                    [l[0] / r, l[1] / r]
                } else {
                    [1.0, 0.0]
                }
            }
            ShapeFamily::Box => {
                let qx = l[0].abs() - self.size;
                let qy = l[1].abs() - self.size;
                if qx > 0.0 || qy > 0.0 {
                    let g = [qx.max(0.0) * sign(l[0]), qy.max(0.0) * sign(l[1])];
                    let r = norm(g);
                    [g[0] / r, g[1] / r]
                } else if qx >= qy {
                    [sign(l[0]), 0.0]
                } else {
                    [0.0, sign(l[1])]
                }
            }
        };
        rotate(n, self.yaw)
    }

    /// Largest distance from the center to the boundary.
    pub fn circumradius(&self) -> f32 {
        match self.family {
            ShapeFamily::Cylinder => self.size,
            ShapeFamily::Box => self.size * std::f32::consts::SQRT_2,
        }
    }
}
