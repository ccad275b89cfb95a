//! The bundled 16-DoF four-finger hand.
//!
//! An approximation of a three-finger-plus-thumb research hand: palm in the
//! local xy plane with its grasping side facing +z, index/middle/ring fingers
//! extending along +y from the palm's top edge and an opposed thumb leaving
//! the bottom edge along −y. Each finger has a lateral (spread) joint then
//! three flexion joints; the thumb has spread, roll and two flexion joints.
//! Positive flexion always curls toward +z. Contact candidates cover the
//! palmar side of the palm and every finger link; fingertip links tag theirs
//! `tip` for the precision-grasp variant. Dimensions are plausible, not
//! measured from any real hand.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

use super::{CollisionSphere, ContactCandidate, ContactTag, HandModel, Joint, JointRole, Link};

const FINGER_RADIUS: f64 = 0.0095;
const PALM_RADIUS: f64 = 0.013;
const KNUCKLE_RADIUS: f64 = 0.01;

struct Builder {
    links: Vec<Link>,
    contacts: Vec<ContactCandidate>,
    spheres: Vec<CollisionSphere>,
    exempt: Vec<(usize, usize)>,
}

impl Builder {
    fn link(
        &mut self,
        name: &str,
        parent: Option<usize>,
        origin: Isometry3<f64>,
        joint: Option<Joint>,
    ) -> usize {
        self.links.push(Link {
            name: name.to_string(),
            parent,
            origin,
            joint,
        });
        let id = self.links.len() - 1;
        if let Some(p) = parent {
            self.exempt.push((p, id));
        }
        id
    }

    fn sphere(&mut self, link: usize, center: Point3<f64>, radius: f64) {
        self.spheres.push(CollisionSphere {
            link,
            center,
            radius,
        });
    }

    fn contact(&mut self, link: usize, local: Point3<f64>, tag: ContactTag) {
        self.contacts.push(ContactCandidate { link, local, tag });
    }

    /// Spheres spaced along +y with a palmar (+z) contact on each.
    fn segment(&mut self, link: usize, length: f64, count: usize, tag: ContactTag) {
        for k in 0..count {
            let y = length * (k as f64 + 0.5) / count as f64;
            self.sphere(link, Point3::new(0.0, y, 0.0), FINGER_RADIUS);
            self.contact(link, Point3::new(0.0, y, FINGER_RADIUS), tag);
        }
    }
}

fn joint(role: JointRole, axis: Vector3<f64>, lower: f64, upper: f64, init: f64) -> Option<Joint> {
    Some(Joint {
        role,
        axis: nalgebra::Unit::new_normalize(axis),
        lower,
        upper,
        init,
    })
}

fn at(x: f64, y: f64, z: f64) -> Isometry3<f64> {
    Isometry3::translation(x, y, z)
}

pub fn bundled_hand() -> HandModel {
    let mut b = Builder {
        links: Vec::new(),
        contacts: Vec::new(),
        spheres: Vec::new(),
        exempt: Vec::new(),
    };
    let palm = b.link("palm", None, Isometry3::identity(), None);
    for x in [-0.03, 0.0, 0.03] {
        for y in [-0.036, -0.012, 0.012, 0.036] {
            b.sphere(palm, Point3::new(x, y, 0.0), PALM_RADIUS);
        }
    }
    for x in [-0.025, 0.0, 0.025] {
        for y in [-0.03, 0.0, 0.03] {
            b.contact(palm, Point3::new(x, y, PALM_RADIUS), ContactTag::Palm);
        }
    }

    let x_axis = Vector3::x();
    for (name, x) in [("index", 0.03), ("middle", 0.0), ("ring", -0.03)] {
        let knuckle = b.link(
            &format!("{name}_knuckle"),
            Some(palm),
            at(x, 0.05, 0.0),
            joint(JointRole::Lateral, Vector3::z(), -0.35, 0.35, 0.0),
        );
        b.sphere(knuckle, Point3::origin(), KNUCKLE_RADIUS);
        b.contact(
            knuckle,
            Point3::new(0.0, 0.0, KNUCKLE_RADIUS),
            ContactTag::Inner,
        );

        let proximal = b.link(
            &format!("{name}_proximal"),
            Some(knuckle),
            Isometry3::identity(),
            joint(JointRole::Flexion, x_axis, -0.3, 1.6, 0.25),
        );
        b.segment(proximal, 0.045, 3, ContactTag::Inner);
        let middle = b.link(
            &format!("{name}_middle"),
            Some(proximal),
            at(0.0, 0.045, 0.0),
            joint(JointRole::Flexion, x_axis, -0.1, 1.8, 0.2),
        );
        b.segment(middle, 0.032, 2, ContactTag::Inner);
        let distal = b.link(
            &format!("{name}_distal"),
            Some(middle),
            at(0.0, 0.032, 0.0),
            joint(JointRole::Flexion, x_axis, -0.1, 1.6, 0.15),
        );
        b.segment(distal, 0.03, 2, ContactTag::Tip);
        b.exempt.push((palm, proximal));
    }

    // Thumb frame: local +y points along world −y so the thumb hooks around
    // the same axis as the fingers from the opposite palm edge.
    let thumb_frame = Isometry3::from_parts(
        Translation3::new(-0.015, -0.05, 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI),
    );
    let base = b.link(
        "thumb_base",
        Some(palm),
        thumb_frame,
        joint(JointRole::Lateral, Vector3::z(), -0.5, 0.5, 0.0),
    );
    b.sphere(base, Point3::origin(), KNUCKLE_RADIUS);
    b.contact(
        base,
        Point3::new(0.0, 0.0, KNUCKLE_RADIUS),
        ContactTag::Inner,
    );
    let roll = b.link(
        "thumb_roll",
        Some(base),
        Isometry3::identity(),
        joint(JointRole::Lateral, Vector3::y(), -0.6, 0.6, 0.0),
    );
    b.segment(roll, 0.02, 1, ContactTag::Inner);
    let proximal = b.link(
        "thumb_proximal",
        Some(roll),
        at(0.0, 0.02, 0.0),
        joint(JointRole::Flexion, x_axis, -0.2, 1.6, 0.2),
    );
    b.segment(proximal, 0.04, 3, ContactTag::Inner);
    let distal = b.link(
        "thumb_distal",
        Some(proximal),
        at(0.0, 0.04, 0.0),
        joint(JointRole::Flexion, x_axis, -0.2, 1.7, 0.2),
    );
    b.segment(distal, 0.035, 2, ContactTag::Tip);
    b.exempt.push((palm, roll));

    HandModel::new("four_finger16", b.links, b.contacts, b.spheres, &b.exempt)
        .expect("bundled hand is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::{forward_kinematics, self_penetration, GraspPose, HAND_DOF};

    #[test]
    fn topology() {
        let hand = bundled_hand();
        assert_eq!(hand.dof(), HAND_DOF);
        assert!(hand.dof_warning().is_none());
        let fingers = ["index", "middle", "ring", "thumb"];
        for f in fingers {
            let n = hand
                .contacts()
                .iter()
                .filter(|c| hand.links()[c.link].name.starts_with(f))
                .count();
            assert!(n >= 3, "{f} has {n} contact candidates");
        }
        assert_eq!(
            hand.links().iter().filter(|l| l.parent.is_none()).count(),
            1
        );
    }

    #[test]
    fn reference_and_seed_postures_are_collision_free() {
        let hand = bundled_hand();
        let zero = GraspPose::identity(hand.dof());
        assert_eq!(
            self_penetration(&hand, &forward_kinematics(&hand, &zero)),
            0.0
        );
        let mut seed = zero.clone();
        seed.joints = hand.init_posture();
        assert_eq!(
            self_penetration(&hand, &forward_kinematics(&hand, &seed)),
            0.0
        );
    }

    #[test]
    fn flexion_curls_toward_palm_normal() {
        let hand = bundled_hand();
        let mut g = GraspPose::identity(hand.dof());
        let straight = forward_kinematics(&hand, &g);
        for j in 0..hand.dof() {
            if hand.joint(j).role == JointRole::Flexion {
                g.joints[j] = 0.8;
            }
        }
        let curled = forward_kinematics(&hand, &g);
        let tips: Vec<usize> = (0..hand.contacts().len())
            .filter(|&i| hand.contacts()[i].tag == ContactTag::Tip)
            .collect();
        for i in tips {
            assert!(curled.contact_points[i].z > straight.contact_points[i].z + 0.01);
        }
    }
}
