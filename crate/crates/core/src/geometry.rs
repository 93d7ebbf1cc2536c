//! Minimal 3-D vector math and axis-aligned boxes used by the scene and the tracer.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    /// Horizontal (ground-plane) distance.
    pub fn ground_distance(self, other: Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        self + (other - self) * t
    }

    pub fn component(self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// Builds a rectangle from two corners in any order.
    pub fn new(xa: f64, ya: f64, xb: f64, yb: f64) -> Self {
        Self {
            x0: xa.min(xb),
            y0: ya.min(yb),
            x1: xa.max(xb),
            y1: ya.max(yb),
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn depth(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// True when the interiors overlap after growing `self` by `margin` on every side.
    pub fn overlaps(&self, other: &Rect, margin: f64) -> bool {
        self.x0 - margin < other.x1
            && other.x0 < self.x1 + margin
            && self.y0 - margin < other.y1
            && other.y0 < self.y1 + margin
    }

    pub fn inside(&self, outer: &Rect) -> bool {
        self.x0 >= outer.x0 && self.x1 <= outer.x1 && self.y0 >= outer.y0 && self.y1 <= outer.y1
    }
}

/// Box standing on the ground: footprint extruded from z = 0 to `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prism {
    pub footprint: Rect,
    pub height: f64,
}

impl Prism {
    pub fn contains(&self, p: Vec3) -> bool {
        self.footprint.contains(p.x, p.y) && p.z >= 0.0 && p.z <= self.height
    }

    /// Parametric interval `[t_in, t_out]` of the segment `a + t (b - a)`, `t in [0, 1]`,
    /// that lies inside the box. `None` when the segment misses it.
    pub fn clip_segment(&self, a: Vec3, b: Vec3) -> Option<(f64, f64)> {
        let lo = [self.footprint.x0, self.footprint.y0, 0.0];
        let hi = [self.footprint.x1, self.footprint.y1, self.height];
        slab_clip(&[a.x, a.y, a.z], &[b.x, b.y, b.z], &lo, &hi)
    }

    /// Like [`Prism::clip_segment`] but only in the ground plane (ignores height).
    pub fn clip_ground_projection(&self, a: Vec3, b: Vec3) -> Option<(f64, f64)> {
        let lo = [self.footprint.x0, self.footprint.y0];
        let hi = [self.footprint.x1, self.footprint.y1];
        slab_clip(&[a.x, a.y], &[b.x, b.y], &lo, &hi)
    }

    /// Length of the part of segment `a..b` inside the box.
    pub fn chord_length(&self, a: Vec3, b: Vec3) -> f64 {
        match self.clip_segment(a, b) {
            Some((t0, t1)) => (t1 - t0) * a.distance(b),
            None => 0.0,
        }
    }
}

fn slab_clip(a: &[f64], b: &[f64], lo: &[f64], hi: &[f64]) -> Option<(f64, f64)> {
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for i in 0..a.len() {
        let d = b[i] - a[i];
        if d == 0.0 {
            if a[i] < lo[i] || a[i] > hi[i] {
                return None;
            }
            continue;
        }
        let mut ta = (lo[i] - a[i]) / d;
        let mut tb = (hi[i] - a[i]) / d;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}
