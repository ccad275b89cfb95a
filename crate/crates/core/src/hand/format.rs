//! Hand description text format.
//!
//! ```text
//! # semgrasp-hand v1
//! hand <name>
//! link <name>
//!   parent <link name | ->
//!   origin <x y z>              # translation from the parent frame
//!   rotation <w x y z>          # unit quaternion, parent frame
//!   joint <flexion | lateral>   # omit for a rigid link
//!   axis <x y z>
//!   limits <lo hi>              # radians
//!   init <angle>                # seeding posture, radians
//!   sphere <x y z radius>       # repeated; link frame, meters
//!   contact <palm | inner | tip> <x y z>   # repeated
//! exempt <link> <link>          # sphere pairs across these links never collide
//! ```
//!
//! Indentation is cosmetic; keys after a `link` line belong to that link.
//! Spheres on the same link never collide with each other.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};

use super::{CollisionSphere, ContactCandidate, ContactTag, HandModel, Joint, JointRole, Link};
use crate::error::{Error, Result};

pub const HEADER: &str = "# semgrasp-hand v1";

#[derive(Default)]
struct LinkDraft {
    name: String,
    line: usize,
    parent: Option<String>,
    origin: Vector3<f64>,
    rotation: Option<[f64; 4]>,
    role: Option<JointRole>,
    axis: Option<Vector3<f64>>,
    limits: Option<(f64, f64)>,
    init: f64,
    spheres: Vec<(Point3<f64>, f64)>,
    contacts: Vec<(ContactTag, Point3<f64>)>,
}

fn floats<const N: usize>(args: &[&str], path: &Path, line: usize) -> Result<[f64; N]> {
    if args.len() != N {
        return Err(Error::parse(
            path,
            line,
            format!("expected {N} numbers, got {}", args.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, a) in out.iter_mut().zip(args) {
        *o = a
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::parse(path, line, format!("bad number {a:?}")))?;
    }
    Ok(out)
}

pub fn load_hand(path: impl AsRef<Path>) -> Result<HandModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let hand = parse_hand(&text, path)?;
    if let Some(w) = hand.dof_warning() {
        log::warn!("{}: {w}", path.display());
    }
    Ok(hand)
}

pub fn parse_hand(text: &str, path: &Path) -> Result<HandModel> {
    let mut name = String::from("hand");
    let mut drafts: Vec<LinkDraft> = Vec::new();
    let mut exempt: Vec<(String, String, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some((&key, args)) = tokens.split_first() else {
            continue;
        };
        let need_link = |drafts: &mut Vec<LinkDraft>| -> Result<usize> {
            if drafts.is_empty() {
                Err(Error::parse(
                    path,
                    ln,
                    format!("{key:?} outside of a link block"),
                ))
            } else {
                Ok(drafts.len() - 1)
            }
        };
        match key {
            "hand" => {
                name = args.join(" ");
            }
            "link" => {
                if args.len() != 1 {
                    return Err(Error::parse(path, ln, "link needs a single name"));
                }
                if drafts.iter().any(|d| d.name == args[0]) {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("duplicate link {:?}", args[0]),
                    ));
                }
                drafts.push(LinkDraft {
                    name: args[0].to_string(),
                    line: ln,
                    ..Default::default()
                });
            }
            "parent" => {
                let l = need_link(&mut drafts)?;
                if args.len() != 1 {
                    return Err(Error::parse(path, ln, "parent needs a single name"));
                }
                drafts[l].parent = (args[0] != "-").then(|| args[0].to_string());
            }
            "origin" => {
                let l = need_link(&mut drafts)?;
                drafts[l].origin = Vector3::from(floats::<3>(args, path, ln)?);
            }
            "rotation" => {
                let l = need_link(&mut drafts)?;
                drafts[l].rotation = Some(floats::<4>(args, path, ln)?);
            }
            "joint" => {
                let l = need_link(&mut drafts)?;
                drafts[l].role = Some(match args {
                    ["flexion"] => JointRole::Flexion,
                    ["lateral"] => JointRole::Lateral,
                    _ => {
                        return Err(Error::parse(
                            path,
                            ln,
                            "joint role must be flexion or lateral",
                        ))
                    }
                });
            }
            "axis" => {
                let l = need_link(&mut drafts)?;
                let a = Vector3::from(floats::<3>(args, path, ln)?);
                if a.norm() < 1e-12 {
                    return Err(Error::parse(path, ln, "zero joint axis"));
                }
                drafts[l].axis = Some(a);
            }
            "limits" => {
                let l = need_link(&mut drafts)?;
                let [lo, hi] = floats::<2>(args, path, ln)?;
                if lo > hi {
                    return Err(Error::parse(path, ln, "lower limit above upper limit"));
                }
                drafts[l].limits = Some((lo, hi));
            }
            "init" => {
                let l = need_link(&mut drafts)?;
                drafts[l].init = floats::<1>(args, path, ln)?[0];
            }
            "sphere" => {
                let l = need_link(&mut drafts)?;
                let [x, y, z, r] = floats::<4>(args, path, ln)?;
                if r <= 0.0 {
                    return Err(Error::parse(path, ln, "sphere radius must be positive"));
                }
                drafts[l].spheres.push((Point3::new(x, y, z), r));
            }
            "contact" => {
                let l = need_link(&mut drafts)?;
                let Some((tag, rest)) = args.split_first() else {
                    return Err(Error::parse(path, ln, "contact needs a tag and a point"));
                };
                let tag = match *tag {
                    "palm" => ContactTag::Palm,
                    "inner" => ContactTag::Inner,
                    "tip" => ContactTag::Tip,
                    other => {
                        return Err(Error::parse(
                            path,
                            ln,
                            format!("unknown contact tag {other:?}"),
                        ))
                    }
                };
                drafts[l]
                    .contacts
                    .push((tag, Point3::from(floats::<3>(rest, path, ln)?)));
            }
            "exempt" => {
                if args.len() != 2 {
                    return Err(Error::parse(path, ln, "exempt needs two link names"));
                }
                exempt.push((args[0].to_string(), args[1].to_string(), ln));
            }
            other => return Err(Error::parse(path, ln, format!("unknown key {other:?}"))),
        }
    }

    let index: HashMap<&str, usize> = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| (d.name.as_str(), i))
        .collect();
    let mut links = Vec::with_capacity(drafts.len());
    let mut contacts = Vec::new();
    let mut spheres = Vec::new();
    for (li, d) in drafts.iter().enumerate() {
        let parent = match &d.parent {
            None => None,
            Some(p) => Some(
                *index
                    .get(p.as_str())
                    .ok_or_else(|| Error::parse(path, d.line, format!("unknown parent {p:?}")))?,
            ),
        };
        let rotation = match d.rotation {
            None => UnitQuaternion::identity(),
            Some([w, x, y, z]) => {
                let q = Quaternion::new(w, x, y, z);
                if (q.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::parse(
                        path,
                        d.line,
                        "link rotation is not a unit quaternion",
                    ));
                }
                if (q.norm() - 1.0).abs() < 1e-12 {
                    UnitQuaternion::new_unchecked(q)
                } else {
                    UnitQuaternion::from_quaternion(q)
                }
            }
        };
        let joint = match d.role {
            None => None,
            Some(role) => {
                let axis = d
                    .axis
                    .ok_or_else(|| Error::parse(path, d.line, "joint without an axis"))?;
                let (lower, upper) = d
                    .limits
                    .ok_or_else(|| Error::parse(path, d.line, "joint without limits"))?;
                Some(Joint {
                    role,
                    axis: if (axis.norm() - 1.0).abs() < 1e-12 {
                        Unit::new_unchecked(axis)
                    } else {
                        Unit::new_normalize(axis)
                    },
                    lower,
                    upper,
                    init: d.init,
                })
            }
        };
        links.push(Link {
            name: d.name.clone(),
            parent,
            origin: Isometry3::from_parts(Translation3::from(d.origin), rotation),
            joint,
        });
        spheres.extend(d.spheres.iter().map(|&(center, radius)| CollisionSphere {
            link: li,
            center,
            radius,
        }));
        contacts.extend(d.contacts.iter().map(|&(tag, local)| ContactCandidate {
            link: li,
            local,
            tag,
        }));
    }
    let mut pairs = Vec::with_capacity(exempt.len());
    for (a, b, ln) in &exempt {
        let ia = index
            .get(a.as_str())
            .ok_or_else(|| Error::parse(path, *ln, format!("unknown link {a:?}")))?;
        let ib = index
            .get(b.as_str())
            .ok_or_else(|| Error::parse(path, *ln, format!("unknown link {b:?}")))?;
        pairs.push((*ia, *ib));
    }
    HandModel::new(name, links, contacts, spheres, &pairs).map_err(|e| match e {
        Error::Invalid(m) => Error::parse(path, 0, m),
        other => other,
    })
}

pub fn write_hand(hand: &HandModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "hand {}", hand.name);
    for (li, link) in hand.links().iter().enumerate() {
        let _ = writeln!(s, "link {}", link.name);
        let parent = link
            .parent
            .map_or("-".to_string(), |p| hand.links()[p].name.clone());
        let _ = writeln!(s, "  parent {parent}");
        let t = link.origin.translation.vector;
        let _ = writeln!(s, "  origin {} {} {}", t.x, t.y, t.z);
        let q = link.origin.rotation.quaternion();
        if link.origin.rotation != UnitQuaternion::identity() {
            let _ = writeln!(s, "  rotation {} {} {} {}", q.w, q.i, q.j, q.k);
        }
        if let Some(j) = &link.joint {
            let role = match j.role {
                JointRole::Flexion => "flexion",
                JointRole::Lateral => "lateral",
            };
            let _ = writeln!(s, "  joint {role}");
            let _ = writeln!(s, "  axis {} {} {}", j.axis.x, j.axis.y, j.axis.z);
            let _ = writeln!(s, "  limits {} {}", j.lower, j.upper);
            let _ = writeln!(s, "  init {}", j.init);
        }
        for sp in hand.spheres().iter().filter(|sp| sp.link == li) {
            let _ = writeln!(
                s,
                "  sphere {} {} {} {}",
                sp.center.x, sp.center.y, sp.center.z, sp.radius
            );
        }
        for c in hand.contacts().iter().filter(|c| c.link == li) {
            let tag = match c.tag {
                ContactTag::Palm => "palm",
                ContactTag::Inner => "inner",
                ContactTag::Tip => "tip",
            };
            let _ = writeln!(
                s,
                "  contact {tag} {} {} {}",
                c.local.x, c.local.y, c.local.z
            );
        }
    }
    for (a, b) in hand.exempt_link_pairs() {
        let _ = writeln!(
            s,
            "exempt {} {}",
            hand.links()[a].name,
            hand.links()[b].name
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::bundled_hand;

    #[test]
    fn bundled_round_trips() {
        let hand = bundled_hand();
        let text = write_hand(&hand);
        let back = parse_hand(&text, Path::new("bundled.hand")).unwrap();
        assert_eq!(back, hand);
    }

    #[test]
    fn cycle_is_an_error() {
        let text = "link a\n parent b\n joint flexion\n axis 0 0 1\n limits 0 1\n contact tip 0 0 0\n\
                    link b\n parent a\n joint flexion\n axis 0 0 1\n limits 0 1\n contact tip 0 0 0\n\
                    link root\n parent -\n";
        assert!(parse_hand(text, Path::new("cycle.hand")).is_err());
    }

    #[test]
    fn two_joint_hand_loads_with_warning() {
        let text = "hand planar\nlink palm\n parent -\n sphere 0 0 0 0.01\n\
                    link a\n parent palm\n joint flexion\n axis 0 0 1\n limits 0 1.5\n contact inner 0.05 0 0\n\
                    link b\n parent a\n origin 0.1 0 0\n joint flexion\n axis 0 0 1\n limits 0 1.5\n contact tip 0.05 0 0\n";
        let hand = parse_hand(text, Path::new("planar.hand")).unwrap();
        assert_eq!(hand.dof(), 2);
        assert!(hand.dof_warning().is_some());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_hand("link a\n parent -\n sphere 0 0 x 1\n", Path::new("h")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(matches!(
            parse_hand("bogus 1\n", Path::new("h")),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
