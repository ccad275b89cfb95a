//! Bounding-volume hierarchy over mesh triangles.
//!
//! Built once per mesh by median splits on triangle centroids; read-only
//! afterwards, so a mesh can be shared across worker threads freely.

use nalgebra::{Point3, Vector3};

use super::triangle::{self, TriangleHit};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.grow(&other.min);
        self.grow(&other.max);
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn distance2(&self, p: &Point3<f64>) -> f64 {
        (0..3)
            .map(|k| {
                let d = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
                d * d
            })
            .sum()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// Slab test. Returns the entry distance when the ray meets the box
    /// (padded by `pad`) at some t in `[0, t_max]`.
    fn ray_entry(
        &self,
        origin: &Point3<f64>,
        inv_dir: &Vector3<f64>,
        t_max: f64,
        pad: f64,
    ) -> Option<f64> {
        let mut lo = 0.0f64;
        let mut hi = t_max;
        for k in 0..3 {
            let a = (self.min[k] - pad - origin[k]) * inv_dir[k];
            let b = (self.max[k] + pad - origin[k]) * inv_dir[k];
            // NaN (origin on a slab plane with a zero direction component)
            // falls through min/max and leaves the interval unchanged.
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
            if lo > hi {
                return None;
            }
        }
        Some(lo)
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// A triangle as stored in the hierarchy, tagged with its mesh face index.
#[derive(Debug, Clone)]
struct Tri {
    face: usize,
    v: [Point3<f64>; 3],
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
    pad: f64,
}

/// Result of a nearest-surface query.
#[derive(Debug, Clone, Copy)]
pub struct Closest {
    pub face: usize,
    pub point: Point3<f64>,
    pub distance2: f64,
}

/// Outcome of counting surface crossings along a ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossings {
    Count(usize),
    /// Some hit landed on an edge or vertex, or too close to the origin;
    /// the count is unreliable.
    Grazing,
}

impl Bvh {
    pub fn build(vertices: &[Point3<f64>], faces: &[[usize; 3]]) -> Self {
        let mut tris: Vec<Tri> = faces
            .iter()
            .enumerate()
            .map(|(face, f)| Tri {
                face,
                v: [vertices[f[0]], vertices[f[1]], vertices[f[2]]],
            })
            .collect();
        let mut all = Aabb::empty();
        for t in &tris {
            for p in &t.v {
                all.grow(p);
            }
        }
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        let n = tris.len();
        build_node(&mut nodes, &mut tris, 0, n);
        Bvh {
            nodes,
            tris,
            pad: 1e-9 * all.diagonal().max(1.0),
        }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Nearest point on the surface; ties in distance go to the lowest face index.
    pub fn closest(&self, q: &Point3<f64>) -> Closest {
        let mut best = Closest {
            face: usize::MAX,
            point: *q,
            distance2: f64::INFINITY,
        };
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.distance2(q) > best.distance2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for tri in &self.tris[start..start + count] {
                        let p = triangle::closest_point(q, &tri.v[0], &tri.v[1], &tri.v[2]);
                        let d2 = (p - q).norm_squared();
                        if d2 < best.distance2 || (d2 == best.distance2 && tri.face < best.face) {
                            best = Closest {
                                face: tri.face,
                                point: p,
                                distance2: d2,
                            };
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance2(q);
                    let dr = self.nodes[right].bounds.distance2(q);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    /// All hits with `t > t_min` within `slack` of the nearest one, as
    /// `(face, hit)` pairs.
    pub fn nearest_hits(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
        slack: f64,
    ) -> Vec<(usize, TriangleHit)> {
        let inv = dir.map(|d| 1.0 / d);
        let mut best_t = f64::INFINITY;
        let mut hits: Vec<(usize, TriangleHit)> = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node
                .bounds
                .ray_entry(origin, &inv, best_t + slack, self.pad)
                .is_none()
            {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for tri in &self.tris[start..start + count] {
                        if let Some(h) =
                            triangle::intersect_ray(origin, dir, &tri.v[0], &tri.v[1], &tri.v[2])
                        {
                            if h.t > t_min && h.t <= best_t + slack {
                                best_t = best_t.min(h.t);
                                hits.push((tri.face, h));
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        hits.retain(|(_, h)| h.t <= best_t + slack);
        hits
    }

    /// Counts crossings of the ray `origin + t·dir, t > 0` with the surface.
    pub fn crossings(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Crossings {
        const EDGE_EPS: f64 = 1e-9;
        let inv = dir.map(|d| 1.0 / d);
        let mut count = 0usize;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node
                .bounds
                .ray_entry(origin, &inv, f64::INFINITY, self.pad)
                .is_none()
            {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count: n } => {
                    for tri in &self.tris[start..start + n] {
                        if let Some(h) =
                            triangle::intersect_ray(origin, dir, &tri.v[0], &tri.v[1], &tri.v[2])
                        {
                            if h.t.abs() <= self.pad {
                                return Crossings::Grazing;
                            }
                            if h.t > 0.0 {
                                if h.edge_margin() < EDGE_EPS {
                                    return Crossings::Grazing;
                                }
                                count += 1;
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        Crossings::Count(count)
    }
}

fn build_node(nodes: &mut Vec<Node>, tris: &mut [Tri], start: usize, end: usize) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for t in &tris[start..end] {
        for p in &t.v {
            bounds.grow(p);
        }
        cbounds.grow(&centroid(t));
    }
    let id = nodes.len();
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf {
            start,
            count: end - start,
        },
    });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let ext = cbounds.max - cbounds.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    tris[start..end].select_nth_unstable_by(mid - start, |a, b| {
        centroid(a)[axis]
            .total_cmp(&centroid(b)[axis])
            .then(a.face.cmp(&b.face))
    });
    let left = build_node(nodes, tris, start, mid);
    let right = build_node(nodes, tris, mid, end);
    nodes[id].kind = NodeKind::Inner { left, right };
    id
}

fn centroid(t: &Tri) -> Point3<f64> {
    Point3::from((t.v[0].coords + t.v[1].coords + t.v[2].coords) / 3.0)
}
