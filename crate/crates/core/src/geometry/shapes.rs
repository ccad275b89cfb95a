//! Procedural closed meshes used as fixtures and test objects.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use super::mesh::TriangleMesh;

/// Orients every face of a star-shaped (about `center`) mesh outward.
fn orient_outward(vertices: &[Point3<f64>], faces: &mut [[usize; 3]], center: &Point3<f64>) {
    for f in faces.iter_mut() {
        let [a, b, c] = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
        let n = (b - a).cross(&(c - a));
        let mid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
        if n.dot(&(mid - center)) < 0.0 {
            f.swap(1, 2);
        }
    }
}

fn finish(vertices: Vec<Point3<f64>>, mut faces: Vec<[usize; 3]>) -> TriangleMesh {
    orient_outward(&vertices, &mut faces, &Point3::origin());
    TriangleMesh::new(vertices, faces).expect("procedural mesh is valid")
}

/// Axis-aligned box centered at the origin.
pub fn box_mesh(half: Vector3<f64>) -> TriangleMesh {
    let vertices: Vec<Point3<f64>> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            )
        })
        .collect();
    let quads = [
        [0, 2, 6, 4],
        [1, 5, 7, 3],
        [0, 4, 5, 1],
        [2, 3, 7, 6],
        [0, 1, 3, 2],
        [4, 6, 7, 5],
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    finish(vertices, faces)
}

/// Cube of edge length `size` centered at the origin (8 vertices, 12 faces).
pub fn cube(size: f64) -> TriangleMesh {
    box_mesh(Vector3::repeat(size / 2.0))
}

/// Subdivided icosahedron; `subdivisions = 2` gives 320 faces.
pub fn icosphere(subdivisions: usize, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.extend([[f[0], ab, ca], [f[1], bc, ab], [f[2], ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.iter().map(|v| Point3::from(v * radius)).collect();
    finish(vertices, faces)
}

/// Latitude/longitude sphere with `2·slices·(stacks−1)` faces.
pub fn uv_sphere(slices: usize, stacks: usize, radius: f64) -> TriangleMesh {
    assert!(slices >= 3 && stacks >= 2);
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let polar = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let az = 2.0 * PI * j as f64 / slices as f64;
            vertices.push(Point3::new(
                radius * polar.sin() * az.cos(),
                radius * polar.sin() * az.sin(),
                radius * polar.cos(),
            ));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..slices {
        faces.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    finish(vertices, faces)
}

/// Capped cylinder along z, centered at the origin, with `rings` bands along
/// its height.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> TriangleMesh {
    assert!(segments >= 3 && rings >= 1);
    let mut vertices = Vec::new();
    for i in 0..=rings {
        let z = -height / 2.0 + height * i as f64 / rings as f64;
        for j in 0..segments {
            let az = 2.0 * PI * j as f64 / segments as f64;
            vertices.push(Point3::new(radius * az.cos(), radius * az.sin(), z));
        }
    }
    let idx = |i: usize, j: usize| i * segments + (j % segments);
    let mut faces = Vec::new();
    for i in 0..rings {
        for j in 0..segments {
            faces.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
        }
    }
    let bottom = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, -height / 2.0));
    let top = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, height / 2.0));
    for j in 0..segments {
        faces.push([bottom, idx(0, j + 1), idx(0, j)]);
        faces.push([top, idx(rings, j), idx(rings, j + 1)]);
    }
    finish(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_counts_and_closure() {
        assert_eq!(cube(1.0).face_count(), 12);
        assert_eq!(icosphere(2, 1.0).face_count(), 320);
        assert_eq!(uv_sphere(50, 21, 1.0).face_count(), 2000);
        assert_eq!(cylinder(0.04, 0.2, 24, 8).face_count(), 2 * 24 * 8 + 2 * 24);
        for m in [
            cube(1.0),
            icosphere(2, 1.0),
            uv_sphere(12, 7, 1.0),
            cylinder(1.0, 2.0, 16, 3),
        ] {
            assert!(m.is_watertight());
            for f in 0..m.face_count() {
                let c = m.face_centroid(f);
                assert!(m.face_normal(f).dot(&c.coords) > 0.0);
            }
        }
    }

    #[test]
    fn icosphere_vertices_on_sphere() {
        let s = icosphere(2, 1.0);
        let worst = s
            .vertices()
            .iter()
            .map(|v| (v.coords.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6);
    }
}
