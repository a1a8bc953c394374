//! Built-in primitive geometry for the 20 catalog objects.

use nalgebra::Vector3;

use crate::contact::Shape;

/// Objects removed from evaluation because the gripper cannot hold them.
pub const EXCLUDED_OBJECTS: [&str; 2] = ["002_master_chef_can", "036_wood_block"];

/// Catalog entry: identifier plus upright primitive geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub id: &'static str,
    pub shape: Shape,
}

impl ObjectSpec {
    /// Distance from the object origin to its lowest point when upright.
    pub fn half_height(&self) -> f64 {
        match self.shape {
            Shape::Sphere { radius } => radius,
            Shape::Capsule {
                radius,
                half_length,
            } => radius + half_length,
            Shape::Box { half_extents } => half_extents.z,
        }
    }

    /// Half extents of the axis-aligned bounding box in the object frame.
    pub fn half_extents(&self) -> Vector3<f64> {
        match self.shape {
            Shape::Sphere { radius } => Vector3::repeat(radius),
            Shape::Capsule {
                radius,
                half_length,
            } => Vector3::new(radius, radius, radius + half_length),
            Shape::Box { half_extents } => half_extents,
        }
    }

    /// Radius of the object's footprint on the table.
    pub fn footprint_radius(&self) -> f64 {
        let h = self.half_extents();
        h.x.hypot(h.y)
    }

    pub fn is_excluded(&self) -> bool {
        EXCLUDED_OBJECTS.contains(&self.id)
    }
}

const fn cuboid(hx: f64, hy: f64, hz: f64) -> Shape {
    Shape::Box {
        half_extents: Vector3::new(hx, hy, hz),
    }
}

const fn cylinder(radius: f64, half_length: f64) -> Shape {
    Shape::Capsule {
        radius,
        half_length,
    }
}

/// The 20 objects, in catalog order.
pub const OBJECTS: [ObjectSpec; 20] = [
    ObjectSpec { id: "002_master_chef_can", shape: cylinder(0.051, 0.019) },
    ObjectSpec { id: "003_cracker_box", shape: cuboid(0.08, 0.03, 0.1) },
    ObjectSpec { id: "004_sugar_box", shape: cuboid(0.045, 0.019, 0.088) },
    ObjectSpec { id: "005_tomato_soup_can", shape: cylinder(0.033, 0.018) },
    ObjectSpec { id: "006_mustard_bottle", shape: cuboid(0.048, 0.029, 0.09) },
    ObjectSpec { id: "007_tuna_fish_can", shape: cuboid(0.034, 0.034, 0.017) },
    ObjectSpec { id: "008_pudding_box", shape: cuboid(0.055, 0.032, 0.019) },
    ObjectSpec { id: "009_gelatin_box", shape: cuboid(0.044, 0.03, 0.014) },
    ObjectSpec { id: "010_potted_meat_can", shape: cuboid(0.05, 0.026, 0.042) },
    ObjectSpec { id: "011_banana", shape: cuboid(0.09, 0.018, 0.018) },
    ObjectSpec { id: "019_pitcher_base", shape: cuboid(0.06, 0.03, 0.1) },
    ObjectSpec { id: "021_bleach_cleanser", shape: cuboid(0.05, 0.032, 0.12) },
    ObjectSpec { id: "024_bowl", shape: cuboid(0.075, 0.075, 0.027) },
    ObjectSpec { id: "025_mug", shape: cylinder(0.034, 0.012) },
    ObjectSpec { id: "035_power_drill", shape: cuboid(0.09, 0.025, 0.09) },
    ObjectSpec { id: "036_wood_block", shape: cuboid(0.045, 0.045, 0.1) },
    ObjectSpec { id: "037_scissors", shape: cuboid(0.1, 0.03, 0.008) },
    ObjectSpec { id: "040_large_marker", shape: cylinder(0.009, 0.05) },
    ObjectSpec { id: "052_extra_large_clamp", shape: cuboid(0.08, 0.033, 0.018) },
    ObjectSpec { id: "061_foam_brick", shape: cuboid(0.025, 0.034, 0.025) },
];

pub fn object_spec(id: &str) -> Option<&'static ObjectSpec> {
    OBJECTS.iter().find(|o| o.id == id)
}

pub fn object_index(id: &str) -> Option<usize> {
    OBJECTS.iter().position(|o| o.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_consistent() {
        assert_eq!(OBJECTS.len(), 20);
        for o in &OBJECTS {
            o.shape.validated().unwrap();
        }
        for id in EXCLUDED_OBJECTS {
            assert!(object_spec(id).is_some());
        }
        let mut ids: Vec<_> = OBJECTS.iter().map(|o| o.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn graspable_objects_fit_the_gripper() {
        for o in OBJECTS.iter().filter(|o| !o.is_excluded()) {
            let h = o.half_extents();
            assert!(h.min() * 2.0 < 0.075, "{} too wide", o.id);
        }
    }
}
