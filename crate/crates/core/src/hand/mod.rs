//! Kinematic hand model: a tree of revolute links rooted at the palm, with
//! contact candidates on the palmar surfaces and collision spheres.

mod bundled;
mod format;

use std::collections::HashSet;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundled::bundled_hand;
pub use format::{load_hand, parse_hand, write_hand};

/// Actuated joint count of the target hand topology.
pub const HAND_DOF: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointRole {
    /// Curls the finger toward the palm; advanced by finger closing.
    Flexion,
    /// Side-to-side or axial motion; left alone by finger closing.
    Lateral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub role: JointRole,
    pub axis: Unit<Vector3<f64>>,
    pub lower: f64,
    pub upper: f64,
    /// Posture used when seeding grasps.
    pub init: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    /// Fixed transform from the parent frame to this link's joint frame.
    pub origin: Isometry3<f64>,
    pub joint: Option<Joint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactTag {
    Palm,
    Inner,
    Tip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactCandidate {
    pub link: usize,
    pub local: Point3<f64>,
    pub tag: ContactTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionSphere {
    pub link: usize,
    pub center: Point3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub name: String,
    links: Vec<Link>,
    /// Link index of each actuated joint, in joint-vector order.
    joint_links: Vec<usize>,
    /// Links sorted parents-first.
    order: Vec<usize>,
    contacts: Vec<ContactCandidate>,
    spheres: Vec<CollisionSphere>,
    exempt_links: HashSet<(usize, usize)>,
    /// Non-exempt sphere pairs, `a < b`.
    sphere_pairs: Vec<(usize, usize)>,
    /// For each joint, whether it moves each link.
    moves_link: Vec<Vec<bool>>,
}

/// Wrist pose plus joint angles.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspPose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub joints: Vec<f64>,
}

impl GraspPose {
    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>, joints: Vec<f64>) -> Self {
        GraspPose {
            translation,
            rotation,
            joints,
        }
    }

    pub fn identity(dof: usize) -> Self {
        GraspPose::new(Vector3::zeros(), UnitQuaternion::identity(), vec![0.0; dof])
    }

    pub fn wrist(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    /// Applies a rigid motion to the wrist.
    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        let w = motion * self.wrist();
        GraspPose::new(w.translation.vector, w.rotation, self.joints.clone())
    }
}

/// World-frame hand geometry for one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct HandStateWorld {
    pub link_poses: Vec<Isometry3<f64>>,
    pub contact_points: Vec<Point3<f64>>,
    pub sphere_centers: Vec<Point3<f64>>,
}

impl HandModel {
    /// Validates and assembles a model. Links may appear in any order; the
    /// joint vector follows the order in which jointed links appear.
    pub fn new(
        name: impl Into<String>,
        links: Vec<Link>,
        contacts: Vec<ContactCandidate>,
        spheres: Vec<CollisionSphere>,
        exemptions: &[(usize, usize)],
    ) -> Result<Self> {
        let n = links.len();
        if n == 0 {
            return Err(Error::invalid("hand has no links"));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| links[i].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::invalid(format!(
                "hand must have exactly one root link, found {}",
                roots.len()
            )));
        }
        for (i, l) in links.iter().enumerate() {
            if let Some(p) = l.parent {
                if p >= n {
                    return Err(Error::invalid(format!(
                        "link {} has an unknown parent",
                        l.name
                    )));
                }
            }
            if let Some(j) = &l.joint {
                if !(j.lower <= j.upper) {
                    return Err(Error::invalid(format!(
                        "link {} has joint limits lo > hi",
                        l.name
                    )));
                }
            }
            // Walk to the root; more than n steps means a cycle.
            let mut cur = i;
            for step in 0..=n {
                match links[cur].parent {
                    None => break,
                    Some(p) => cur = p,
                }
                if step == n {
                    return Err(Error::invalid(format!(
                        "link parenting cycle through {}",
                        l.name
                    )));
                }
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while order.len() < n {
            for i in 0..n {
                if !placed[i] && links[i].parent.is_none_or(|p| placed[p]) {
                    placed[i] = true;
                    order.push(i);
                }
            }
        }
        for c in &contacts {
            if c.link >= n {
                return Err(Error::invalid("contact candidate on unknown link"));
            }
        }
        for s in &spheres {
            if s.link >= n || !(s.radius > 0.0) {
                return Err(Error::invalid(
                    "collision sphere on unknown link or with nonpositive radius",
                ));
            }
        }
        for l in links.iter().enumerate().filter(|(_, l)| l.joint.is_some()) {
            if !contacts.iter().any(|c| c.link == l.0) {
                return Err(Error::invalid(format!(
                    "jointed link {} has no contact candidate",
                    l.1.name
                )));
            }
        }

        let joint_links: Vec<usize> = (0..n).filter(|&i| links[i].joint.is_some()).collect();
        let mut exempt_links = HashSet::new();
        for &(a, b) in exemptions {
            if a >= n || b >= n {
                return Err(Error::invalid("exemption references an unknown link"));
            }
            exempt_links.insert((a.min(b), a.max(b)));
        }
        let mut sphere_pairs = Vec::new();
        for a in 0..spheres.len() {
            for b in a + 1..spheres.len() {
                let (la, lb) = (spheres[a].link, spheres[b].link);
                if la != lb && !exempt_links.contains(&(la.min(lb), la.max(lb))) {
                    sphere_pairs.push((a, b));
                }
            }
        }
        let moves_link = joint_links
            .iter()
            .map(|&jl| {
                (0..n)
                    .map(|l| {
                        let mut cur = Some(l);
                        while let Some(c) = cur {
                            if c == jl {
                                return true;
                            }
                            cur = links[c].parent;
                        }
                        false
                    })
                    .collect()
            })
            .collect();

        Ok(HandModel {
            name: name.into(),
            links,
            joint_links,
            order,
            contacts,
            spheres,
            exempt_links,
            sphere_pairs,
            moves_link,
        })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contacts(&self) -> &[ContactCandidate] {
        &self.contacts
    }

    pub fn spheres(&self) -> &[CollisionSphere] {
        &self.spheres
    }

    pub fn exempt_link_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut v: Vec<_> = self.exempt_links.iter().copied().collect();
        v.sort_unstable();
        v.into_iter()
    }

    /// Number of actuated joints.
    pub fn dof(&self) -> usize {
        self.joint_links.len()
    }

    pub fn joint(&self, j: usize) -> &Joint {
        self.links[self.joint_links[j]]
            .joint
            .as_ref()
            .expect("jointed link")
    }

    pub fn joint_link(&self, j: usize) -> usize {
        self.joint_links[j]
    }

    pub fn joint_moves_link(&self, j: usize, link: usize) -> bool {
        self.moves_link[j][link]
    }

    /// Warning text when the hand does not have the expected 16 actuated joints.
    pub fn dof_warning(&self) -> Option<String> {
        (self.dof() != HAND_DOF).then(|| {
            format!(
                "hand {} has {} actuated joints, expected {HAND_DOF}",
                self.name,
                self.dof()
            )
        })
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        (0..self.dof()).map(|j| self.joint(j).lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        (0..self.dof()).map(|j| self.joint(j).upper).collect()
    }

    pub fn init_posture(&self) -> Vec<f64> {
        (0..self.dof()).map(|j| self.joint(j).init).collect()
    }

    pub fn clamp_joints(&self, theta: &mut [f64]) {
        for (j, t) in theta.iter_mut().enumerate() {
            let jt = self.joint(j);
            *t = t.clamp(jt.lower, jt.upper);
        }
    }

    /// Sphere pairs counted by [`self_penetration`].
    pub fn colliding_pairs(&self) -> &[(usize, usize)] {
        &self.sphere_pairs
    }

    /// Keeps only fingertip contact candidates (precision-grasp variant).
    pub fn precision_variant(&self) -> Result<Self> {
        let tips: Vec<ContactCandidate> = self
            .contacts
            .iter()
            .filter(|c| c.tag == ContactTag::Tip)
            .cloned()
            .collect();
        if tips.is_empty() {
            return Err(Error::invalid("hand has no fingertip contact candidates"));
        }
        let mut out = self.clone();
        out.contacts = tips;
        Ok(out)
    }

    pub fn check_pose(&self, grasp: &GraspPose) -> Result<()> {
        if grasp.joints.len() != self.dof() {
            return Err(Error::invalid(format!(
                "grasp has {} joint angles, hand has {}",
                grasp.joints.len(),
                self.dof()
            )));
        }
        if grasp.joints.iter().any(|x| !x.is_finite())
            || !grasp.translation.iter().all(|x| x.is_finite())
        {
            return Err(Error::invalid("grasp has non-finite entries"));
        }
        Ok(())
    }

    /// World transform of every link.
    pub fn link_poses(&self, grasp: &GraspPose) -> Vec<Isometry3<f64>> {
        debug_assert_eq!(grasp.joints.len(), self.dof());
        let wrist = grasp.wrist();
        let mut poses = vec![Isometry3::identity(); self.links.len()];
        let mut joint_of_link = vec![usize::MAX; self.links.len()];
        for (j, &l) in self.joint_links.iter().enumerate() {
            joint_of_link[l] = j;
        }
        for &l in &self.order {
            let link = &self.links[l];
            let base = match link.parent {
                Some(p) => poses[p] * link.origin,
                None => wrist * link.origin,
            };
            poses[l] = match &link.joint {
                Some(j) => {
                    base * UnitQuaternion::from_axis_angle(&j.axis, grasp.joints[joint_of_link[l]])
                }
                None => base,
            };
        }
        poses
    }
}

pub fn forward_kinematics(hand: &HandModel, grasp: &GraspPose) -> HandStateWorld {
    let link_poses = hand.link_poses(grasp);
    let contact_points = hand
        .contacts
        .iter()
        .map(|c| link_poses[c.link] * c.local)
        .collect();
    let sphere_centers = hand
        .spheres
        .iter()
        .map(|s| link_poses[s.link] * s.center)
        .collect();
    HandStateWorld {
        link_poses,
        contact_points,
        sphere_centers,
    }
}

/// Total distance by which joint angles leave their limit box.
pub fn joint_violation(hand: &HandModel, theta: &[f64]) -> Result<f64> {
    if theta.len() != hand.dof() {
        return Err(Error::invalid(format!(
            "joint vector has {} entries, hand has {}",
            theta.len(),
            hand.dof()
        )));
    }
    Ok(theta
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let jt = hand.joint(j);
            (t - jt.upper).max(0.0) + (jt.lower - t).max(0.0)
        })
        .sum())
}

/// Summed overlap depth over non-exempt sphere pairs.
pub fn self_penetration(hand: &HandModel, state: &HandStateWorld) -> f64 {
    hand.sphere_pairs
        .iter()
        .map(|&(a, b)| {
            let ra = hand.spheres[a].radius;
            let rb = hand.spheres[b].radius;
            let d = (state.sphere_centers[a] - state.sphere_centers[b]).norm();
            (ra + rb - d).max(0.0)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn single_joint_hand() -> HandModel {
        let links = vec![
            Link {
                name: "palm".into(),
                parent: None,
                origin: Isometry3::identity(),
                joint: None,
            },
            Link {
                name: "finger".into(),
                parent: Some(0),
                origin: Isometry3::identity(),
                joint: Some(Joint {
                    role: JointRole::Flexion,
                    axis: Vector3::z_axis(),
                    lower: -3.0,
                    upper: 3.0,
                    init: 0.0,
                }),
            },
        ];
        let contacts = vec![ContactCandidate {
            link: 1,
            local: Point3::new(1.0, 0.0, 0.0),
            tag: ContactTag::Tip,
        }];
        let spheres = vec![
            CollisionSphere {
                link: 0,
                center: Point3::origin(),
                radius: 0.01,
            },
            CollisionSphere {
                link: 1,
                center: Point3::new(1.0, 0.0, 0.0),
                radius: 0.01,
            },
        ];
        HandModel::new("test", links, contacts, spheres, &[]).unwrap()
    }

    #[test]
    fn quarter_turn() {
        let hand = single_joint_hand();
        let g = GraspPose::new(
            Vector3::zeros(),
            UnitQuaternion::identity(),
            vec![FRAC_PI_2],
        );
        let s = forward_kinematics(&hand, &g);
        assert!((s.contact_points[0] - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn joint_violation_sums() {
        let hand = bundled_hand();
        let mut theta = hand.init_posture();
        assert_eq!(joint_violation(&hand, &theta).unwrap(), 0.0);
        theta[1] = hand.joint(1).upper + 0.1;
        assert!((joint_violation(&hand, &theta).unwrap() - 0.1).abs() < 1e-12);
        let mut theta = hand.init_posture();
        theta[2] = hand.joint(2).lower - 0.05;
        theta[5] = hand.joint(5).lower - 0.05;
        assert!((joint_violation(&hand, &theta).unwrap() - 0.10).abs() < 1e-12);
        assert!(joint_violation(&hand, &theta[..3]).is_err());
    }

    #[test]
    fn self_penetration_formula_and_exemption() {
        let hand = single_joint_hand();
        let state = HandStateWorld {
            link_poses: vec![],
            contact_points: vec![],
            sphere_centers: vec![Point3::origin(), Point3::new(0.015, 0.0, 0.0)],
        };
        assert!((self_penetration(&hand, &state) - 0.005).abs() < 1e-12);

        let exempt = HandModel::new(
            "test",
            hand.links().to_vec(),
            hand.contacts().to_vec(),
            hand.spheres().to_vec(),
            &[(0, 1)],
        )
        .unwrap();
        assert_eq!(self_penetration(&exempt, &state), 0.0);
    }

    #[test]
    fn rejects_cycles_and_bad_limits() {
        let hand = single_joint_hand();
        let mut links = hand.links().to_vec();
        links[0].parent = Some(1);
        links[1].parent = Some(0);
        assert!(HandModel::new("c", links, hand.contacts().to_vec(), vec![], &[]).is_err());
        let mut links = hand.links().to_vec();
        links[1].joint.as_mut().unwrap().lower = 4.0;
        assert!(HandModel::new("l", links, hand.contacts().to_vec(), vec![], &[]).is_err());
    }
}
