//! Convex hulls (incremental quickhull) and hull inflation.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

struct HullFace {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl HullFace {
    fn new(points: &[Point3<f64>], v: [usize; 3]) -> Self {
        let normal = (points[v[1]] - points[v[0]])
            .cross(&(points[v[2]] - points[v[0]]))
            .normalize();
        HullFace {
            v,
            normal,
            offset: normal.dot(&points[v[0]].coords),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Convex hull of `points` as a closed, outward-oriented triangle mesh whose
/// vertices are exactly the extreme input points (points lying on a hull face
/// but not at a corner are excluded).
pub fn convex_hull(points: &[Point3<f64>]) -> Result<TriangleMesh> {
    if points.len() < 4 {
        return Err(Error::degenerate(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let scale = (hi - lo).norm();
    let eps = 1e-10 * scale.max(f64::MIN_POSITIVE);

    let simplex = initial_simplex(points, eps)?;
    let interior = Point3::from(
        simplex
            .iter()
            .map(|&i| points[i].coords)
            .sum::<Vector3<f64>>()
            / 4.0,
    );

    let mut faces: Vec<HullFace> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let tris = [
        [simplex[0], simplex[1], simplex[2]],
        [simplex[0], simplex[1], simplex[3]],
        [simplex[0], simplex[2], simplex[3]],
        [simplex[1], simplex[2], simplex[3]],
    ];
    for mut t in tris {
        let f = HullFace::new(points, t);
        if f.distance(&interior) > 0.0 {
            t.swap(1, 2);
        }
        add_face(&mut faces, &mut edges, HullFace::new(points, t));
    }

    let live: Vec<usize> = (0..4).collect();
    let rest = (0..points.len()).filter(|i| !simplex.contains(i));
    assign_outside(points, &mut faces, &live, rest, eps);

    while let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                let (da, db) = (
                    faces[fi].distance(&points[a]),
                    faces[fi].distance(&points[b]),
                );
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("nonempty");
        let p = points[apex];

        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| faces[i].alive && faces[i].distance(&p) > eps)
            .collect();
        let mut horizon = Vec::new();
        for &vi in &visible {
            let v = faces[vi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let across = edges[&(b, a)];
                if faces[across].distance(&p) <= eps {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &vi in &visible {
            orphans.append(&mut faces[vi].outside);
            faces[vi].alive = false;
            let v = faces[vi].v;
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        let mut created = Vec::with_capacity(horizon.len());
        for (a, b) in horizon {
            created.push(add_face(
                &mut faces,
                &mut edges,
                HullFace::new(points, [a, b, apex]),
            ));
        }
        orphans.retain(|&o| o != apex);
        orphans.sort_unstable();
        assign_outside(points, &mut faces, &created, orphans.into_iter(), eps);
    }

    let live_faces: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut used: Vec<usize> = live_faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    let vertices = used.iter().map(|&i| points[i]).collect();
    let tri = live_faces
        .iter()
        .map(|f| [remap[&f[0]], remap[&f[1]], remap[&f[2]]])
        .collect();
    TriangleMesh::new(vertices, tri)
}

fn add_face(
    faces: &mut Vec<HullFace>,
    edges: &mut HashMap<(usize, usize), usize>,
    f: HullFace,
) -> usize {
    let id = faces.len();
    for k in 0..3 {
        edges.insert((f.v[k], f.v[(k + 1) % 3]), id);
    }
    faces.push(f);
    id
}

fn assign_outside(
    points: &[Point3<f64>],
    faces: &mut [HullFace],
    candidates: &[usize],
    pts: impl Iterator<Item = usize>,
    eps: f64,
) {
    for p in pts {
        let mut best: Option<(usize, f64)> = None;
        for &fi in candidates {
            let d = faces[fi].distance(&points[p]);
            if d > eps && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((fi, d));
            }
        }
        if let Some((fi, _)) = best {
            faces[fi].outside.push(p);
        }
    }
}

fn initial_simplex(points: &[Point3<f64>], eps: f64) -> Result<[usize; 4]> {
    let argmax = |f: &dyn Fn(&Point3<f64>) -> f64| {
        let mut best = 0;
        let mut bv = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let v = f(p);
            if v > bv {
                bv = v;
                best = i;
            }
        }
        (best, bv)
    };
    let (i0, _) = argmax(&|p| -p.x);
    let a = points[i0];
    let (i1, d1) = argmax(&|p| (p - a).norm());
    if d1 <= eps {
        return Err(Error::degenerate("all hull points coincide"));
    }
    let b = points[i1];
    let axis = (b - a) / d1;
    let (i2, d2) = argmax(&|p| {
        let w = p - a;
        (w - axis * w.dot(&axis)).norm()
    });
    if d2 <= eps {
        return Err(Error::degenerate("hull points are collinear"));
    }
    let n = (b - a).cross(&(points[i2] - a)).normalize();
    let (i3, d3) = argmax(&|p| n.dot(&(p - a)).abs());
    if d3 <= eps {
        return Err(Error::degenerate("hull points are coplanar"));
    }
    Ok([i0, i1, i2, i3])
}

/// Angle-weighted vertex normals. Vertices not referenced by any face get a
/// zero vector.
pub fn vertex_normals(mesh: &TriangleMesh) -> Vec<Vector3<f64>> {
    let verts = mesh.vertices();
    let mut acc = vec![Vector3::zeros(); verts.len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal(fi);
        for k in 0..3 {
            let p = verts[f[k]];
            let e1 = (verts[f[(k + 1) % 3]] - p).normalize();
            let e2 = (verts[f[(k + 2) % 3]] - p).normalize();
            let angle = e1.dot(&e2).clamp(-1.0, 1.0).acos();
            acc[f[k]] += n * angle;
        }
    }
    for n in &mut acc {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    acc
}

/// Pushes every vertex `delta` along its angle-weighted normal.
pub fn inflate_hull(hull: &TriangleMesh, delta: f64) -> Result<TriangleMesh> {
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!(
            "inflation distance must be nonnegative, got {delta}"
        )));
    }
    let normals = vertex_normals(hull);
    let vertices = hull
        .vertices()
        .iter()
        .zip(&normals)
        .map(|(v, n)| v + n * delta)
        .collect();
    TriangleMesh::new(vertices, hull.faces().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use rand::Rng;

    fn cube_corners() -> Vec<Point3<f64>> {
        shapes::cube(1.0).vertices().to_vec()
    }

    #[test]
    fn cube_hull_has_twelve_faces() {
        let h = convex_hull(&cube_corners()).unwrap();
        assert_eq!(h.face_count(), 12);
        assert_eq!(h.vertices().len(), 8);
        assert!(h.is_watertight());
    }

    #[test]
    fn interior_point_excluded() {
        let mut pts = cube_corners();
        pts.push(Point3::origin());
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.face_count(), 12);
        assert_eq!(h.vertices().len(), 8);
        assert!(h.vertices().iter().all(|v| v.coords.norm() > 0.1));
    }

    #[test]
    fn degeneracies_rejected() {
        let flat: Vec<_> = (0..10)
            .map(|i| Point3::new(i as f64, (i * i) as f64, 0.0))
            .collect();
        assert!(matches!(convex_hull(&flat), Err(Error::Degenerate(_))));
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(convex_hull(&line), Err(Error::Degenerate(_))));
        assert!(convex_hull(&line[..3]).is_err());
    }

    #[test]
    fn random_ball_points_are_contained() {
        let mut rng = crate::rng::seeded(11);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let h = convex_hull(&pts).unwrap();
        assert!(h.is_watertight());
        for p in &pts {
            assert!(h.signed_distance(p).signed_distance <= 1e-9);
        }
    }

    #[test]
    fn inflation() {
        let cube = convex_hull(&cube_corners()).unwrap();
        let same = inflate_hull(&cube, 0.0).unwrap();
        assert_eq!(same.vertices(), cube.vertices());
        let inflated = inflate_hull(&cube, 0.1).unwrap();
        for (a, b) in cube.vertices().iter().zip(inflated.vertices()) {
            let expected = a.coords.map(|c| c.signum()) / 3f64.sqrt() * 0.1;
            assert!(((b - a) - expected).norm() < 1e-12);
        }
        let sphere = shapes::icosphere(2, 1.0);
        let big = inflate_hull(&sphere, 0.1).unwrap();
        for v in big.vertices() {
            assert!((v.coords.norm() - 1.1).abs() < 1e-3);
        }
        assert!(inflate_hull(&cube, -0.1).is_err());
    }
}
