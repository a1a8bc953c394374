//! Narrow-phase contact queries between primitive shapes and contact
//! classification by body tag.

mod narrow;

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::pose::Pose;

pub use narrow::{penetration, Penetration};

/// Default detection margin (m) added to the exact penetration depth.
pub const DEFAULT_MARGIN: f64 = 0.001;

/// Primitive collision geometry. Capsules are aligned with their local z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Capsule { radius: f64, half_length: f64 },
    Box { half_extents: Vector3<f64> },
}

impl Shape {
    pub fn sphere(radius: f64) -> Result<Self> {
        Shape::Sphere { radius }.validated()
    }

    pub fn capsule(radius: f64, half_length: f64) -> Result<Self> {
        Shape::Capsule {
            radius,
            half_length,
        }
        .validated()
    }

    pub fn cuboid(hx: f64, hy: f64, hz: f64) -> Result<Self> {
        Shape::Box {
            half_extents: Vector3::new(hx, hy, hz),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Capsule {
                radius,
                half_length,
            } => radius > 0.0 && half_length > 0.0,
            Shape::Box { half_extents } => half_extents.iter().all(|h| *h > 0.0),
        };
        let finite = match self {
            Shape::Sphere { radius } => radius.is_finite(),
            Shape::Capsule {
                radius,
                half_length,
            } => radius.is_finite() && half_length.is_finite(),
            Shape::Box { half_extents } => half_extents.iter().all(|h| h.is_finite()),
        };
        if ok && finite {
            Ok(self)
        } else {
            Err(Error::Domain(format!("shape dimensions must be positive: {self:?}")))
        }
    }

    /// Radius of a sphere centred on the shape origin that encloses it.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Capsule {
                radius,
                half_length,
            } => radius + half_length,
            Shape::Box { half_extents } => half_extents.norm(),
        }
    }

    /// Half of the shape's extent along a world direction when placed at `pose`.
    pub fn support_extent(&self, pose: &Pose, dir: &Vector3<f64>) -> f64 {
        let local = pose.orientation.inverse() * dir;
        match *self {
            Shape::Sphere { radius } => radius * dir.norm(),
            Shape::Capsule {
                radius,
                half_length,
            } => half_length * local.z.abs() + radius * dir.norm(),
            Shape::Box { half_extents } => {
                half_extents.x * local.x.abs()
                    + half_extents.y * local.y.abs()
                    + half_extents.z * local.z.abs()
            }
        }
    }

    pub(crate) fn kind_rank(&self) -> u8 {
        match self {
            Shape::Sphere { .. } => 0,
            Shape::Capsule { .. } => 1,
            Shape::Box { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Identity of a collidable body, used to classify contacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyTag {
    /// Arm links; index 0 is the base, 8 the gripper housing.
    ArmLink(u8),
    FingerGripSurface(Side),
    FingerOther(Side),
    Hand,
    TargetObject,
    Distractor(u8),
    Table,
}

/// Coarse classes of [`BodyTag`] used for class-level exemptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TagKind {
    Robot,
    Hand,
    TargetObject,
    Distractor,
    Table,
}

impl BodyTag {
    pub fn kind(&self) -> TagKind {
        match self {
            BodyTag::ArmLink(_) | BodyTag::FingerGripSurface(_) | BodyTag::FingerOther(_) => {
                TagKind::Robot
            }
            BodyTag::Hand => TagKind::Hand,
            BodyTag::TargetObject => TagKind::TargetObject,
            BodyTag::Distractor(_) => TagKind::Distractor,
            BodyTag::Table => TagKind::Table,
        }
    }

    pub fn is_robot(&self) -> bool {
        self.kind() == TagKind::Robot
    }

    pub fn is_grip_surface(&self) -> bool {
        matches!(self, BodyTag::FingerGripSurface(_))
    }

    /// Any part of the finger on `side`, gripping surface included.
    pub fn is_finger(&self, side: Side) -> bool {
        matches!(self, BodyTag::FingerGripSurface(s) | BodyTag::FingerOther(s) if *s == side)
    }
}

impl fmt::Display for BodyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &Side| match s {
            Side::Left => "left",
            Side::Right => "right",
        };
        match self {
            BodyTag::ArmLink(i) => write!(f, "arm:{i}"),
            BodyTag::FingerGripSurface(s) => write!(f, "grip:{}", side(s)),
            BodyTag::FingerOther(s) => write!(f, "finger:{}", side(s)),
            BodyTag::Hand => f.write_str("hand"),
            BodyTag::TargetObject => f.write_str("object"),
            BodyTag::Distractor(i) => write!(f, "distractor:{i}"),
            BodyTag::Table => f.write_str("table"),
        }
    }
}

impl std::str::FromStr for BodyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("unknown body tag `{s}`"));
        let side = |v: &str| match v {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(bad()),
        };
        let (head, tail) = s.split_once(':').map_or((s, None), |(h, t)| (h, Some(t)));
        match (head, tail) {
            ("arm", Some(i)) => i.parse().map(BodyTag::ArmLink).map_err(|_| bad()),
            ("grip", Some(v)) => side(v).map(BodyTag::FingerGripSurface),
            ("finger", Some(v)) => side(v).map(BodyTag::FingerOther),
            ("hand", None) => Ok(BodyTag::Hand),
            ("object", None) => Ok(BodyTag::TargetObject),
            ("distractor", Some(i)) => i.parse().map(BodyTag::Distractor).map_err(|_| bad()),
            ("table", None) => Ok(BodyTag::Table),
            _ => Err(bad()),
        }
    }
}

/// A detected interpenetration. `normal` points from body `a` toward body `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub tag_a: BodyTag,
    pub tag_b: BodyTag,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub depth: f64,
}

impl Contact {
    pub fn involves(&self, tag: BodyTag) -> bool {
        self.tag_a == tag || self.tag_b == tag
    }

    /// The other body of the pair, if `tag` is one of them.
    pub fn other(&self, tag: BodyTag) -> Option<BodyTag> {
        if self.tag_a == tag {
            Some(self.tag_b)
        } else if self.tag_b == tag {
            Some(self.tag_a)
        } else {
            None
        }
    }
}

/// Exact query: a contact iff the shapes strictly interpenetrate.
pub fn query_pair(shape_a: &Shape, pose_a: &Pose, shape_b: &Shape, pose_b: &Pose) -> Option<Penetration> {
    query_pair_with_margin(shape_a, pose_a, shape_b, pose_b, 0.0)
}

/// As [`query_pair`] but the reported depth includes `margin`, so shapes
/// closer than `margin` already count as touching.
pub fn query_pair_with_margin(
    shape_a: &Shape,
    pose_a: &Pose,
    shape_b: &Shape,
    pose_b: &Pose,
    margin: f64,
) -> Option<Penetration> {
    let reach = shape_a.bounding_radius() + shape_b.bounding_radius() + margin;
    if (pose_b.position - pose_a.position).norm_squared() > reach * reach {
        return None;
    }
    let mut p = penetration(shape_a, pose_a, shape_b, pose_b);
    p.depth += margin;
    (p.depth > 0.0).then_some(p)
}

/// A shape placed in the world and carrying its body tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldShape {
    pub shape: Shape,
    pub pose: Pose,
    pub tag: BodyTag,
}

impl WorldShape {
    pub fn new(shape: Shape, pose: Pose, tag: BodyTag) -> Self {
        Self { shape, pose, tag }
    }
}

/// Tag pairs for which contacts are never reported.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exemptions {
    pairs: BTreeSet<(BodyTag, BodyTag)>,
    kinds: BTreeSet<(TagKind, TagKind)>,
}

impl Exemptions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_pair(mut self, a: BodyTag, b: BodyTag) -> Self {
        self.pairs.insert(ordered(a, b));
        self
    }

    pub fn with_kinds(mut self, a: TagKind, b: TagKind) -> Self {
        self.kinds.insert(ordered(a, b));
        self
    }

    pub fn is_exempt(&self, a: BodyTag, b: BodyTag) -> bool {
        self.pairs.contains(&ordered(a, b)) || self.kinds.contains(&ordered(a.kind(), b.kind()))
    }
}

fn ordered<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All contacts of one step, sorted by tag pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    contacts: Vec<Contact>,
}

impl ContactSet {
    pub fn from_contacts(mut contacts: Vec<Contact>) -> Self {
        for c in &mut contacts {
            if c.tag_b < c.tag_a {
                std::mem::swap(&mut c.tag_a, &mut c.tag_b);
                c.normal = -c.normal;
            }
        }
        contacts.sort_by_key(|c| (c.tag_a, c.tag_b));
        Self { contacts }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contact> {
        self.contacts.iter()
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn has(&self, a: BodyTag, b: BodyTag) -> bool {
        self.contacts
            .iter()
            .any(|c| (c.tag_a == a && c.tag_b == b) || (c.tag_a == b && c.tag_b == a))
    }

    /// True if any contact pairs `tag` with a body satisfying `pred`.
    pub fn touches(&self, tag: BodyTag, pred: impl Fn(&BodyTag) -> bool) -> bool {
        self.contacts
            .iter()
            .filter_map(|c| c.other(tag))
            .any(|o| pred(&o))
    }

    pub fn grip_contact(&self, side: Side) -> bool {
        self.has(BodyTag::FingerGripSurface(side), BodyTag::TargetObject)
    }

    pub fn both_grip_contacts(&self) -> bool {
        self.grip_contact(Side::Left) && self.grip_contact(Side::Right)
    }

    pub fn any_grip_contact(&self) -> bool {
        self.grip_contact(Side::Left) || self.grip_contact(Side::Right)
    }

    /// Object touches some robot part other than a gripping surface.
    pub fn object_touches_robot_non_grip(&self) -> bool {
        self.touches(BodyTag::TargetObject, |t| t.is_robot() && !t.is_grip_surface())
    }

    pub fn finger_contact(&self, side: Side) -> bool {
        self.touches(BodyTag::TargetObject, |t| t.is_finger(side))
    }

    pub fn robot_touches_hand(&self) -> bool {
        self.touches(BodyTag::Hand, |t| t.is_robot())
    }
}

impl<'a> IntoIterator for &'a ContactSet {
    type Item = &'a Contact;
    type IntoIter = std::slice::Iter<'a, Contact>;

    fn into_iter(self) -> Self::IntoIter {
        self.contacts.iter()
    }
}

/// All-pairs contact detection over `world`, skipping exempt tag pairs.
pub fn collide_world(world: &[WorldShape], exemptions: &Exemptions, margin: f64) -> ContactSet {
    let mut contacts = Vec::new();
    for (i, a) in world.iter().enumerate() {
        for b in &world[i + 1..] {
            if exemptions.is_exempt(a.tag, b.tag) {
                continue;
            }
            if let Some(p) = query_pair_with_margin(&a.shape, &a.pose, &b.shape, &b.pose, margin) {
                contacts.push(Contact {
                    tag_a: a.tag,
                    tag_b: b.tag,
                    point: p.point,
                    normal: p.normal,
                    depth: p.depth,
                });
            }
        }
    }
    ContactSet::from_contacts(contacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_translation(x, y, z)
    }

    #[test]
    fn unit_spheres_overlap_by_half() {
        let s = Shape::sphere(1.0).unwrap();
        let c = query_pair(&s, &at(0.0, 0.0, 0.0), &s, &at(1.5, 0.0, 0.0)).unwrap();
        assert!((c.depth - 0.5).abs() < 1e-12);
        assert!((c.normal - Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn unit_spheres_apart_do_not_touch() {
        let s = Shape::sphere(1.0).unwrap();
        assert!(query_pair(&s, &at(0.0, 0.0, 0.0), &s, &at(2.5, 0.0, 0.0)).is_none());
    }

    #[test]
    fn margin_extends_detection() {
        let s = Shape::sphere(1.0).unwrap();
        let a = at(0.0, 0.0, 0.0);
        let b = at(2.0005, 0.0, 0.0);
        assert!(query_pair(&s, &a, &s, &b).is_none());
        let c = query_pair_with_margin(&s, &a, &s, &b, 0.001).unwrap();
        assert!((c.depth - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Shape::sphere(0.0).is_err());
        assert!(Shape::capsule(0.1, -1.0).is_err());
        assert!(Shape::cuboid(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hand_object_exemption_suppresses_contact() {
        let world = vec![
            WorldShape::new(Shape::capsule(0.02, 0.04).unwrap(), at(0.0, 0.0, 0.0), BodyTag::Hand),
            WorldShape::new(
                Shape::cuboid(0.03, 0.03, 0.03).unwrap(),
                at(0.01, 0.0, 0.0),
                BodyTag::TargetObject,
            ),
        ];
        let ex = Exemptions::new().with_pair(BodyTag::Hand, BodyTag::TargetObject);
        assert!(collide_world(&world, &ex, DEFAULT_MARGIN).is_empty());
        assert_eq!(collide_world(&world, &Exemptions::new(), DEFAULT_MARGIN).len(), 1);
    }

    #[test]
    fn grip_contact_keeps_its_tag() {
        let world = vec![
            WorldShape::new(
                Shape::cuboid(0.03, 0.03, 0.03).unwrap(),
                at(0.0, 0.0, 0.0),
                BodyTag::TargetObject,
            ),
            WorldShape::new(
                Shape::cuboid(0.01, 0.002, 0.016).unwrap(),
                at(0.0, 0.031, 0.0),
                BodyTag::FingerGripSurface(Side::Left),
            ),
        ];
        let set = collide_world(&world, &Exemptions::new(), DEFAULT_MARGIN);
        assert_eq!(set.len(), 1);
        let c = set.iter().next().unwrap();
        assert_eq!((c.tag_a, c.tag_b), (BodyTag::FingerGripSurface(Side::Left), BodyTag::TargetObject));
        assert!(set.grip_contact(Side::Left));
        assert!(!set.both_grip_contacts());
    }

    #[test]
    fn empty_world_has_no_contacts() {
        assert!(collide_world(&[], &Exemptions::new(), DEFAULT_MARGIN).is_empty());
    }

    #[test]
    fn contact_set_order_is_by_tag_pair() {
        let s = Shape::sphere(0.1).unwrap();
        let world = vec![
            WorldShape::new(s, at(0.0, 0.0, 0.0), BodyTag::Table),
            WorldShape::new(s, at(0.05, 0.0, 0.0), BodyTag::TargetObject),
            WorldShape::new(s, at(0.1, 0.0, 0.0), BodyTag::ArmLink(3)),
        ];
        let set = collide_world(&world, &Exemptions::new(), 0.0);
        let pairs: Vec<_> = set.iter().map(|c| (c.tag_a, c.tag_b)).collect();
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(pairs, sorted);
        assert!(pairs.iter().all(|(a, b)| a <= b));
    }

    #[test]
    fn kind_exemption_covers_all_indices() {
        let ex = Exemptions::new().with_kinds(TagKind::Distractor, TagKind::Table);
        assert!(ex.is_exempt(BodyTag::Table, BodyTag::Distractor(3)));
        assert!(!ex.is_exempt(BodyTag::Table, BodyTag::TargetObject));
    }

    #[test]
    fn tags_round_trip_through_text() {
        for t in [
            BodyTag::ArmLink(4),
            BodyTag::FingerGripSurface(Side::Right),
            BodyTag::FingerOther(Side::Left),
            BodyTag::Hand,
            BodyTag::TargetObject,
            BodyTag::Distractor(2),
            BodyTag::Table,
        ] {
            assert_eq!(t.to_string().parse::<BodyTag>().unwrap(), t);
        }
    }

    #[test]
    fn support_extent_of_rotated_box() {
        let b = Shape::cuboid(0.1, 0.2, 0.3).unwrap();
        let pose = Pose::from_rotation(UnitQuaternion::from_axis_angle(
            &Vector3::z_axis(),
            std::f64::consts::FRAC_PI_2,
        ));
        assert!((b.support_extent(&pose, &Vector3::x()) - 0.2).abs() < 1e-12);
    }
}
