use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Isometry3, Point3, Unit, Vector3};
use rand::Rng;

use super::bvh::{Aabb, Bvh, Closest, Crossings};
use super::triangle;
use crate::error::{Error, Result};

/// Faces with less area than this are dropped on construction.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Rays closer than this to their origin are ignored by [`TriangleMesh::raycast`].
pub const RAY_T_MIN: f64 = 1e-9;

/// Hits within this distance of the nearest one count as ties.
const RAY_TIE_SLACK: f64 = 1e-12;

// Fixed, mutually skew directions for inside/outside parity; later entries
// are only tried when an earlier ray grazes an edge or vertex.
const PARITY_DIRS: [[f64; 3]; 6] = [
    [0.577_215_664_9, 0.618_033_988_7, 0.533_917_249_1],
    [-0.412_310_562_5, 0.732_050_807_6, 0.541_381_265_1],
    [0.302_775_637_7, -0.459_023_065_5, 0.835_286_651_3],
    [-0.684_171_936_2, -0.310_927_549_3, 0.654_212_968_1],
    [0.141_421_356_2, 0.223_606_797_7, -0.964_365_076_1],
    [0.866_025_403_8, -0.447_213_595_5, -0.223_606_797_7],
];

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Unit<Vector3<f64>>>,
    areas: Vec<f64>,
    dropped: usize,
    watertight: bool,
    bvh: Bvh,
}

/// Nearest-surface query with inside/outside sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceQueryResult {
    /// Negative inside the closed surface.
    pub signed_distance: f64,
    pub closest_point: Point3<f64>,
    /// Outward normal of the face holding the closest point.
    pub normal: Vector3<f64>,
    pub face_index: usize,
    /// False when the mesh is open and the distance is unsigned.
    pub signed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub face_index: usize,
    pub point: Point3<f64>,
    pub t: f64,
}

impl TriangleMesh {
    /// Builds a mesh, dropping faces with area below [`MIN_FACE_AREA`].
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= nv)) {
            return Err(Error::invalid(format!(
                "face {f:?} references a vertex beyond the {nv} available"
            )));
        }
        let total = faces.len();
        let mut kept = Vec::with_capacity(total);
        let mut normals = Vec::with_capacity(total);
        let mut areas = Vec::with_capacity(total);
        for f in faces {
            let cross = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
            let area = 0.5 * cross.norm();
            if !(area > MIN_FACE_AREA) {
                continue;
            }
            kept.push(f);
            normals.push(Unit::new_normalize(cross));
            areas.push(area);
        }
        if kept.is_empty() {
            return Err(Error::degenerate("mesh has no faces with nonzero area"));
        }
        let dropped = total - kept.len();
        let watertight = is_closed(&kept);
        let bvh = Bvh::build(&vertices, &kept);
        Ok(TriangleMesh {
            vertices,
            faces: kept,
            normals,
            areas,
            dropped,
            watertight,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        self.normals[face].into_inner()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        self.areas[face]
    }

    pub fn face_vertices(&self, face: usize) -> [Point3<f64>; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0]],
            self.vertices[f[1]],
            self.vertices[f[2]],
        ]
    }

    pub fn face_centroid(&self, face: usize) -> Point3<f64> {
        let [a, b, c] = self.face_vertices(face);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Number of degenerate faces discarded during construction.
    pub fn dropped_faces(&self) -> usize {
        self.dropped
    }

    /// Every undirected edge is shared by exactly two faces with opposite
    /// orientation.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn bounds(&self) -> Aabb {
        self.bvh.bounds()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Area-weighted surface centroid.
    pub fn centroid(&self) -> Point3<f64> {
        let total = self.total_area();
        let sum = (0..self.faces.len()).fold(Vector3::zeros(), |acc, f| {
            acc + self.face_centroid(f).coords * self.areas[f]
        });
        Point3::from(sum / total)
    }

    /// Sphere around the bounding-box center holding every referenced vertex.
    pub fn bounding_sphere(&self) -> (Point3<f64>, f64) {
        let center = self.bounds().center();
        let radius = self
            .faces
            .iter()
            .flatten()
            .map(|&i| (self.vertices[i] - center).norm())
            .fold(0.0, f64::max);
        (center, radius)
    }

    /// Applies `x ↦ pose · (scale · x)` to every vertex.
    pub fn transformed(&self, pose: &Isometry3<f64>, scale: f64) -> Result<Self> {
        let vertices = self
            .vertices
            .iter()
            .map(|v| pose * Point3::from(v.coords * scale))
            .collect();
        TriangleMesh::new(vertices, self.faces.clone())
    }

    /// Nearest point on the surface, without the inside/outside test.
    pub fn closest(&self, q: &Point3<f64>) -> Closest {
        self.bvh.closest(q)
    }

    /// Unsigned distance to the surface.
    pub fn distance(&self, q: &Point3<f64>) -> f64 {
        self.closest(q).distance2.sqrt()
    }

    /// Ray-crossing parity test. Always false for open meshes.
    pub fn contains(&self, q: &Point3<f64>) -> bool {
        if !self.watertight || !self.bounds().contains(q) {
            return false;
        }
        let mut last = 0;
        for d in PARITY_DIRS {
            let dir = Vector3::new(d[0], d[1], d[2]).normalize();
            match self.bvh.crossings(q, &dir) {
                Crossings::Count(n) => return n % 2 == 1,
                Crossings::Grazing => last += 1,
            }
        }
        log::debug!("all {last} parity rays grazed at {q:?}; treating as outside");
        false
    }

    pub fn signed_distance(&self, q: &Point3<f64>) -> SurfaceQueryResult {
        let c = self.closest(q);
        let d = c.distance2.sqrt();
        let sign = if d > 0.0 && self.contains(q) {
            -1.0
        } else {
            1.0
        };
        SurfaceQueryResult {
            signed_distance: sign * d,
            closest_point: c.point,
            normal: self.face_normal(c.face),
            face_index: c.face,
            signed: self.watertight,
        }
    }

    /// Nearest intersection with `t > RAY_T_MIN`. Hits tied within 1e-12 go
    /// to the lowest face index. `direction` must be unit length.
    pub fn raycast(
        &self,
        origin: &Point3<f64>,
        direction: &Vector3<f64>,
    ) -> Result<Option<RayHit>> {
        let n = direction.norm();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(Error::invalid(format!(
                "ray direction has norm {n}, expected 1"
            )));
        }
        let hits = self
            .bvh
            .nearest_hits(origin, direction, RAY_T_MIN, RAY_TIE_SLACK);
        Ok(resolve_ray_hits(
            origin,
            direction,
            hits.iter().map(|(f, h)| (*f, h.t)),
        ))
    }

    /// Face pairs sharing an undirected edge.
    pub fn edge_neighbors(&self) -> Vec<Vec<usize>> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let mut out = vec![Vec::new(); self.faces.len()];
        for fs in by_edge.values() {
            for &a in fs {
                for &b in fs {
                    if a != b && !out[a].contains(&b) {
                        out[a].push(b);
                    }
                }
            }
        }
        for n in &mut out {
            n.sort_unstable();
        }
        out
    }

    /// Area-weighted uniform samples on the surface.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Point3<f64>> {
        let mut cdf = Vec::with_capacity(self.areas.len());
        let mut acc = 0.0;
        for a in &self.areas {
            acc += a;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let x = rng.gen::<f64>() * acc;
                let f = cdf.partition_point(|&c| c < x).min(cdf.len() - 1);
                let [a, b, c] = self.face_vertices(f);
                let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
                if r1 + r2 > 1.0 {
                    r1 = 1.0 - r1;
                    r2 = 1.0 - r2;
                }
                a + (b - a) * r1 + (c - a) * r2
            })
            .collect()
    }

    /// Serializes to the ASCII `v`/`f` format read by [`load_mesh`].
    pub fn to_obj_string(&self) -> String {
        let mut s = String::from("# semgrasp-mesh v1\n");
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }
}

/// Picks the nearest hit; hits within the tie slack of it go to the lowest
/// face index. Shared by the accelerated and brute-force paths.
pub fn resolve_ray_hits(
    origin: &Point3<f64>,
    direction: &Vector3<f64>,
    hits: impl Iterator<Item = (usize, f64)> + Clone,
) -> Option<RayHit> {
    let t_min = hits.clone().map(|(_, t)| t).fold(f64::INFINITY, f64::min);
    if !t_min.is_finite() {
        return None;
    }
    let (face, t) = hits
        .filter(|&(_, t)| t <= t_min + RAY_TIE_SLACK)
        .min_by_key(|&(f, _)| f)?;
    Some(RayHit {
        face_index: face,
        point: origin + direction * t,
        t,
    })
}

/// Brute-force raycast over every face; reference for tests and benches.
pub fn raycast_brute_force(
    mesh: &TriangleMesh,
    origin: &Point3<f64>,
    direction: &Vector3<f64>,
) -> Option<RayHit> {
    let hits: Vec<(usize, f64)> = (0..mesh.face_count())
        .filter_map(|f| {
            let [a, b, c] = mesh.face_vertices(f);
            triangle::intersect_ray(origin, direction, &a, &b, &c)
                .filter(|h| h.t > RAY_T_MIN)
                .map(|h| (f, h.t))
        })
        .collect();
    resolve_ray_hits(origin, direction, hits.iter().copied())
}

/// Brute-force closest face with the same tie rule as the hierarchy.
pub fn closest_brute_force(mesh: &TriangleMesh, q: &Point3<f64>) -> Closest {
    let mut best = Closest {
        face: usize::MAX,
        point: *q,
        distance2: f64::INFINITY,
    };
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.face_vertices(f);
        let p = triangle::closest_point(q, &a, &b, &c);
        let d2 = (p - q).norm_squared();
        if d2 < best.distance2 {
            best = Closest {
                face: f,
                point: p,
                distance2: d2,
            };
        }
    }
    best
}

fn is_closed(faces: &[[usize; 3]]) -> bool {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    directed
        .iter()
        .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

/// Reads the ASCII triangle-mesh format: `v x y z` and `f i j k` lines with
/// 1-based indices, `#` comments. Common OBJ attribute lines (`vn`, `vt`,
/// `o`, `g`, `s`, `usemtl`, `mtllib`) are skipped.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mesh = parse_mesh(&text, path)?;
    if mesh.dropped_faces() > 0 {
        log::warn!(
            "{}: dropped {} degenerate faces",
            path.display(),
            mesh.dropped_faces()
        );
    }
    Ok(mesh)
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let rest: Vec<&str> = tok.collect();
        match kind {
            "v" => {
                if rest.len() != 3 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "vertex needs exactly 3 coordinates",
                    ));
                }
                let mut c = [0.0; 3];
                for (k, s) in rest.iter().enumerate() {
                    c[k] = s
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| {
                            Error::parse(path, line_no, format!("bad coordinate {s:?}"))
                        })?;
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!(
                            "face has {} indices; only triangles are supported",
                            rest.len()
                        ),
                    ));
                }
                let mut f = [0usize; 3];
                for (k, s) in rest.iter().enumerate() {
                    let idx: usize = s.parse().map_err(|_| {
                        Error::parse(path, line_no, format!("bad face index {s:?}"))
                    })?;
                    if idx == 0 {
                        return Err(Error::parse(path, line_no, "face indices are 1-based"));
                    }
                    f[k] = idx - 1;
                }
                if f.iter().any(|&x| x >= vertices.len()) {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "face references an undefined vertex",
                    ));
                }
                faces.push(f);
            }
            "vn" | "vt" | "o" | "g" | "s" | "usemtl" | "mtllib" => {}
            other => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("unknown record {other:?}"),
                ));
            }
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        Error::Degenerate(m) => Error::degenerate(format!("{}: {m}", path.display())),
        other => other,
    })
}
