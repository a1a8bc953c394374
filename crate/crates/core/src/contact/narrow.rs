use std::cmp::Ordering;

use nalgebra::Vector3;

use super::Shape;
use crate::pose::Pose;

/// Signed penetration between two shapes. `depth > 0` means overlap;
/// a negative depth is a separation estimate (exact for rounded shapes,
/// a lower bound on the gap for box pairs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penetration {
    pub depth: f64,
    /// Unit normal pointing from shape `a` toward shape `b`.
    pub normal: Vector3<f64>,
    pub point: Vector3<f64>,
}

impl Penetration {
    fn flipped(self) -> Self {
        Self {
            normal: -self.normal,
            ..self
        }
    }
}

/// Penetration depth and contact frame for any supported primitive pair.
///
/// Pairs are put in a canonical order before evaluation so that swapping
/// the arguments yields bit-identical depths.
pub fn penetration(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Penetration {
    if canonical_order(a, pa, b, pb) == Ordering::Greater {
        return dispatch(b, pb, a, pa).flipped();
    }
    dispatch(a, pa, b, pb)
}

fn shape_key(s: &Shape, p: &Pose) -> (u8, [u64; 7], [u64; 3]) {
    let dims = match *s {
        Shape::Sphere { radius } => [radius, 0.0, 0.0],
        Shape::Capsule {
            radius,
            half_length,
        } => [radius, half_length, 0.0],
        Shape::Box { half_extents } => [half_extents.x, half_extents.y, half_extents.z],
    };
    (
        s.kind_rank(),
        p.to_array().map(f64::to_bits),
        dims.map(f64::to_bits),
    )
}

fn canonical_order(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Ordering {
    shape_key(a, pa).cmp(&shape_key(b, pb))
}

/// Core of a rounded shape: the point or segment swept by its radius.
#[derive(Debug, Clone, Copy)]
enum Core {
    Point(Vector3<f64>),
    Segment(Vector3<f64>, Vector3<f64>),
}

fn rounded(shape: &Shape, pose: &Pose) -> Option<(Core, f64)> {
    match *shape {
        Shape::Sphere { radius } => Some((Core::Point(pose.position), radius)),
        Shape::Capsule {
            radius,
            half_length,
        } => {
            let axis = pose.axis(2) * half_length;
            Some((
                Core::Segment(pose.position - axis, pose.position + axis),
                radius,
            ))
        }
        Shape::Box { .. } => None,
    }
}

fn dispatch(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Penetration {
    match (rounded(a, pa), rounded(b, pb)) {
        (Some((ca, ra)), Some((cb, rb))) => rounded_rounded(ca, ra, cb, rb),
        (Some((ca, ra)), None) => rounded_box(ca, ra, b, pb).flipped(),
        (None, Some((cb, rb))) => rounded_box(cb, rb, a, pa),
        (None, None) => box_box(a, pa, b, pb),
    }
}

fn fallback_normal(hint: Vector3<f64>) -> Vector3<f64> {
    hint.try_normalize(1e-12).unwrap_or_else(Vector3::z)
}

fn rounded_rounded(ca: Core, ra: f64, cb: Core, rb: f64) -> Penetration {
    let (pa, pb) = closest_between(ca, cb);
    let delta = pb - pa;
    let dist = delta.norm();
    let normal = if dist > 1e-12 {
        delta / dist
    } else {
        fallback_normal(core_center(cb) - core_center(ca))
    };
    let depth = ra + rb - dist;
    Penetration {
        depth,
        normal,
        point: pa + normal * (ra - depth * 0.5),
    }
}

fn core_center(c: Core) -> Vector3<f64> {
    match c {
        Core::Point(p) => p,
        Core::Segment(p, q) => (p + q) * 0.5,
    }
}

fn closest_between(a: Core, b: Core) -> (Vector3<f64>, Vector3<f64>) {
    match (a, b) {
        (Core::Point(p), Core::Point(q)) => (p, q),
        (Core::Point(p), Core::Segment(q0, q1)) => (p, closest_on_segment(&p, &q0, &q1)),
        (Core::Segment(p0, p1), Core::Point(q)) => (closest_on_segment(&q, &p0, &p1), q),
        (Core::Segment(p0, p1), Core::Segment(q0, q1)) => segment_segment(&p0, &p1, &q0, &q1),
    }
}

pub(crate) fn closest_on_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest points between segments `p0p1` and `q0q1`.
fn segment_segment(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    q0: &Vector3<f64>,
    q1: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-15;
    let (s, t) = if a <= eps && e <= eps {
        (0.0, 0.0)
    } else if a <= eps {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    (p0 + d1 * s, q0 + d2 * t)
}

/// Signed distance from a point (in box-local coordinates) to the box
/// surface, with the matching outward direction in local coordinates.
fn point_box_local(p: &Vector3<f64>, h: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let q = p.abs() - h;
    if q.x <= 0.0 && q.y <= 0.0 && q.z <= 0.0 {
        let axis = q.imax();
        let mut n = Vector3::zeros();
        n[axis] = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
        (q[axis], n)
    } else {
        let outside = q.map(|v| v.max(0.0));
        let dist = outside.norm();
        let dir = Vector3::new(
            outside.x * p.x.signum(),
            outside.y * p.y.signum(),
            outside.z * p.z.signum(),
        ) / dist;
        (dist, dir)
    }
}

fn box_half_extents(s: &Shape) -> Vector3<f64> {
    match *s {
        Shape::Box { half_extents } => half_extents,
        _ => unreachable!("box expected"),
    }
}

/// Rounded core vs box; normal points from the box toward the rounded shape.
fn rounded_box(core: Core, radius: f64, bshape: &Shape, bpose: &Pose) -> Penetration {
    let h = box_half_extents(bshape);
    let to_local = |p: &Vector3<f64>| bpose.inverse_transform_point(p);
    match core {
        Core::Point(p) => {
            let pl = to_local(&p);
            let (sd, dir) = point_box_local(&pl, &h);
            let normal = bpose.transform_vector(&dir);
            let depth = radius - sd;
            Penetration {
                depth,
                normal,
                point: p - normal * (radius - depth * 0.5),
            }
        }
        Core::Segment(p0, p1) => {
            let (l0, l1) = (to_local(&p0), to_local(&p1));
            if let Some((overlap, axis)) = segment_box_overlap(&l0, &l1, &h) {
                // Core pierces the box: translate out along the best axis.
                let normal = bpose.transform_vector(&axis);
                let depth = radius + overlap;
                Penetration {
                    depth,
                    normal,
                    point: bpose.transform_point(&((l0 + l1) * 0.5)),
                }
            } else {
                let t = golden_section(|t| point_box_local(&l0.lerp(&l1, t), &h).0);
                let pl = l0.lerp(&l1, t);
                let (sd, dir) = point_box_local(&pl, &h);
                let normal = bpose.transform_vector(&dir);
                let depth = radius - sd;
                let p = bpose.transform_point(&pl);
                Penetration {
                    depth,
                    normal,
                    point: p - normal * (radius - depth * 0.5),
                }
            }
        }
    }
}

/// Minimiser of a convex function on `[0, 1]`.
fn golden_section(f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    [0.0, mid, 1.0]
        .into_iter()
        .map(|t| (f(t), t))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, t)| t)
        .unwrap_or(mid)
}

/// Minimum overlap of a segment and an axis-aligned box over all
/// separating-axis candidates, or `None` if some axis separates them.
/// The returned axis points from the box centre toward the segment.
fn segment_box_overlap(
    l0: &Vector3<f64>,
    l1: &Vector3<f64>,
    h: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let d = l1 - l0;
    let mid = (l0 + l1) * 0.5;
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut consider = |axis: Vector3<f64>| -> bool {
        let Some(n) = axis.try_normalize(1e-9) else {
            return true;
        };
        let (s0, s1) = (l0.dot(&n), l1.dot(&n));
        let (smin, smax) = (s0.min(s1), s0.max(s1));
        let r = h.x * n.x.abs() + h.y * n.y.abs() + h.z * n.z.abs();
        let overlap = (smax + r).min(r - smin);
        if overlap <= 0.0 {
            return false;
        }
        let oriented = if mid.dot(&n) >= 0.0 { n } else { -n };
        if best.is_none_or(|(o, _)| overlap < o) {
            best = Some((overlap, oriented));
        }
        true
    };
    for i in 0..3 {
        if !consider(Vector3::ith(i, 1.0)) {
            return None;
        }
    }
    for i in 0..3 {
        if !consider(d.cross(&Vector3::ith(i, 1.0))) {
            return None;
        }
    }
    best
}

fn box_box(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Penetration {
    let (ha, hb) = (box_half_extents(a), box_half_extents(b));
    let axes_a = [pa.axis(0), pa.axis(1), pa.axis(2)];
    let axes_b = [pb.axis(0), pb.axis(1), pb.axis(2)];
    let d = pb.position - pa.position;
    let radius = |h: &Vector3<f64>, axes: &[Vector3<f64>; 3], n: &Vector3<f64>| {
        h.x * axes[0].dot(n).abs() + h.y * axes[1].dot(n).abs() + h.z * axes[2].dot(n).abs()
    };
    let mut best_depth = f64::INFINITY;
    let mut best_normal = Vector3::z();
    let mut candidates: Vec<Vector3<f64>> = Vec::with_capacity(15);
    candidates.extend_from_slice(&axes_a);
    candidates.extend_from_slice(&axes_b);
    for ea in &axes_a {
        for eb in &axes_b {
            if let Some(n) = ea.cross(eb).try_normalize(1e-9) {
                candidates.push(n);
            }
        }
    }
    for n in candidates {
        let sep = d.dot(&n);
        let overlap = radius(&ha, &axes_a, &n) + radius(&hb, &axes_b, &n) - sep.abs();
        if overlap < best_depth {
            best_depth = overlap;
            best_normal = if sep >= 0.0 { n } else { -n };
        }
    }
    let support = |c: &Vector3<f64>, h: &Vector3<f64>, axes: &[Vector3<f64>; 3], n: &Vector3<f64>| {
        let mut p = *c;
        for i in 0..3 {
            p += axes[i] * (h[i] * axes[i].dot(n).signum());
        }
        p
    };
    let sa = support(&pa.position, &ha, &axes_a, &best_normal);
    let sb = support(&pb.position, &hb, &axes_b, &(-best_normal));
    Penetration {
        depth: best_depth,
        normal: best_normal,
        point: (sa + sb) * 0.5,
    }
}
