use crate::error::{Error, Result};
use crate::tensor::wrap_angle;

/// Planar pose; `theta` is kept in `(-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    /// Expresses a world point in this pose's frame (x forward, y left).
    pub fn to_local(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (px - self.x, py - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn to_world(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * lx - s * ly, self.y + s * lx + c * ly)
    }

    /// `other` expressed in this pose's frame.
    pub fn relative(&self, other: &Pose) -> Pose {
        let (x, y) = self.to_local(other.x, other.y);
        Pose::new(x, y, other.theta - self.theta)
    }

    /// Inverse of [`Pose::relative`].
    pub fn compose(&self, local: &Pose) -> Pose {
        let (x, y) = self.to_world(local.x, local.y);
        Pose::new(x, y, self.theta + local.theta)
    }
}

/// Centerline polyline with arc-length parameterisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    points: Vec<(f64, f64)>,
    cum: Vec<f64>,
}

/// Result of projecting a point onto a [`Route`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub s: f64,
    /// Signed offset, positive to the left of the direction of travel.
    pub lateral: f64,
}

impl Route {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("route needs at least two points".into()));
        }
        let mut cum = Vec::with_capacity(points.len());
        cum.push(0.0);
        for w in points.windows(2) {
            let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            if d <= 0.0 {
                return Err(Error::Invalid("route arc length must strictly increase".into()));
            }
            cum.push(cum.last().unwrap() + d);
        }
        Ok(Self { points, cum })
    }

    /// Builds a route from a start pose and piecewise-constant curvature
    /// sections `(length, curvature)`, sampled every `step` metres.
    pub fn from_sections(start: Pose, sections: &[(f64, f64)], step: f64) -> Result<Self> {
        let mut pts = vec![(start.x, start.y)];
        let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
        for &(len, kappa) in sections {
            let n = (len / step).ceil().max(1.0) as usize;
            let ds = len / n as f64;
            for _ in 0..n {
                let dth = kappa * ds;
                let chord = if dth.abs() < 1e-12 { ds } else { 2.0 * (dth / 2.0).sin() / kappa };
                x += chord * (th + dth / 2.0).cos();
                y += chord * (th + dth / 2.0).sin();
                th += dth;
                pts.push((x, y));
            }
        }
        Self::new(pts)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn segment_for(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    fn seg_heading(&self, i: usize) -> f64 {
        let (a, b) = (self.points[i], self.points[i + 1]);
        (b.1 - a.1).atan2(b.0 - a.0)
    }

    /// Point and heading at arc length `s`; extrapolates linearly past either end.
    pub fn pose_at(&self, s: f64) -> Pose {
        let i = self.segment_for(s);
        let a = self.points[i];
        let h = self.seg_heading(i);
        let t = s - self.cum[i];
        Pose::new(a.0 + t * h.cos(), a.1 + t * h.sin(), h)
    }

    /// Pose at arc length `s` shifted `lateral` metres to the left.
    pub fn frenet_to_world(&self, s: f64, lateral: f64) -> Pose {
        let p = self.pose_at(s);
        let (x, y) = p.to_world(0.0, lateral);
        Pose::new(x, y, p.theta)
    }

    /// Unsigned curvature near `s`, from the heading change over ±`half` metres.
    pub fn curvature_at(&self, s: f64, half: f64) -> f64 {
        let a = self.pose_at(s - half).theta;
        let b = self.pose_at(s + half).theta;
        wrap_angle(b - a).abs() / (2.0 * half)
    }

    /// Nearest-point projection over the whole route.
    pub fn project(&self, x: f64, y: f64) -> Projection {
        self.project_range(x, y, 0, self.points.len() - 1)
    }

    /// Projection restricted to segments whose arc length lies within
    /// `window` of `s_hint`.
    pub fn project_near(&self, x: f64, y: f64, s_hint: f64, window: f64) -> Projection {
        let lo = self.segment_for(s_hint - window);
        let hi = (self.segment_for(s_hint + window) + 1).min(self.points.len() - 1);
        self.project_range(x, y, lo, hi)
    }

    fn project_range(&self, x: f64, y: f64, lo: usize, hi: usize) -> Projection {
        let last = self.points.len() - 2;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in lo..hi.max(lo + 1) {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let mut t = ((x - a.0) * dx + (y - a.1) * dy) / len2;
            // the end segments extend indefinitely so points past the ends
            // still get a meaningful lateral offset
            if i > 0 {
                t = t.max(0.0);
            }
            if i < last {
                t = t.min(1.0);
            }
            let (px, py) = (a.0 + t * dx, a.1 + t * dy);
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            if d2 < best.0 {
                let len = len2.sqrt();
                let cross = dx * (y - a.1) - dy * (x - a.0);
                best = (d2, self.cum[i] + t * len, cross / len);
            }
        }
        Projection { s: best.1, lateral: best.2 }
    }
}

/// Oriented rectangle given by centre, heading and half extents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub pose: Pose,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(pose: Pose, length: f64, width: f64) -> Self {
        Self { pose, half_length: length / 2.0, half_width: width / 2.0 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lx, ly) = self.pose.to_local(x, y);
        lx.abs() <= self.half_length && ly.abs() <= self.half_width
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (l, w) = (self.half_length, self.half_width);
        [(l, w), (l, -w), (-l, -w), (-l, w)].map(|(a, b)| self.pose.to_world(a, b))
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.pose.theta.sin_cos();
        [(c, s), (-s, c)]
    }

    /// Separating-axis overlap test (touching counts as overlap).
    pub fn overlaps(&self, other: &Obb) -> bool {
        let (ca, cb) = (self.corners(), other.corners());
        for (ax, ay) in self.axes().into_iter().chain(other.axes()) {
            let proj = |cs: &[(f64, f64); 4]| {
                cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
                    let p = x * ax + y * ay;
                    (lo.min(p), hi.max(p))
                })
            };
            let (a0, a1) = proj(&ca);
            let (b0, b1) = proj(&cb);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    #[test]
    fn relative_and_compose_are_inverse() {
        let a = Pose::new(3.0, -2.0, 0.7);
        let b = Pose::new(-1.0, 4.0, -2.9);
        let r = a.relative(&b);
        let back = a.compose(&r);
        assert!((back.x - b.x).abs() < 1e-12 && (back.y - b.y).abs() < 1e-12);
        assert!((wrap_angle(back.theta - b.theta)).abs() < 1e-12);
    }

    #[test]
    fn route_rejects_degenerate_input() {
        assert!(Route::new(vec![(0.0, 0.0)]).is_err());
        assert!(Route::new(vec![(0.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn straight_route_projection() {
        let r = Route::from_sections(Pose::new(0.0, 0.0, 0.0), &[(100.0, 0.0)], 0.5).unwrap();
        assert!((r.length() - 100.0).abs() < 1e-9);
        let p = r.project(40.0, 2.5);
        assert!((p.s - 40.0).abs() < 1e-9 && (p.lateral - 2.5).abs() < 1e-9);
        let p = r.project(-5.0, -1.0);
        assert!((p.s + 5.0).abs() < 1e-9 && (p.lateral + 1.0).abs() < 1e-9);
        let near = r.project_near(40.0, 2.5, 42.0, 10.0);
        assert_eq!(near, r.project(40.0, 2.5));
    }

    #[test]
    fn quarter_turn_ends_perpendicular() {
        let radius = 10.0;
        let r = Route::from_sections(Pose::new(0.0, 0.0, 0.0), &[(10.0, 0.0), (FRAC_PI_2 * radius, 1.0 / radius), (10.0, 0.0)], 0.25)
            .unwrap();
        let end = r.pose_at(r.length());
        assert!((end.theta - FRAC_PI_2).abs() < 1e-6);
        assert!((end.x - 20.0).abs() < 1e-6 && (end.y - 20.0).abs() < 1e-6);
        assert!((r.curvature_at(10.0 + 0.5 * FRAC_PI_2 * radius, 1.0) - 0.1).abs() < 1e-3);
    }

    #[test]
    fn obb_overlap_cases() {
        let a = Obb::new(Pose::new(0.0, 0.0, 0.0), 4.0, 2.0);
        assert!(a.overlaps(&Obb::new(Pose::new(3.9, 0.0, 0.0), 4.0, 2.0)));
        assert!(!a.overlaps(&Obb::new(Pose::new(4.1, 0.0, 0.0), 4.0, 2.0)));
        // rotated 45°: corner reaches sqrt(2) from its centre
        let b = Obb::new(Pose::new(3.3, 0.0, PI / 4.0), 2.0, 2.0);
        assert!(a.overlaps(&b));
        let c = Obb::new(Pose::new(3.5, 0.0, PI / 4.0), 2.0, 2.0);
        assert!(!a.overlaps(&c));
        assert!(a.contains(1.9, 0.9) && !a.contains(2.1, 0.0));
    }
}
