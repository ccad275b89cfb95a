use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::{par, rng};

/// Pinhole intrinsics: square pixels, principal point at the image center,
/// no distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal_px: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Focal length that makes a sphere of `object_radius` seen from
    /// `distance` span 80% of the image height.
    pub fn framing(width: usize, height: usize, object_radius: f64, distance: f64) -> Self {
        let half_angle = (object_radius / distance).clamp(1e-9, 1.0 - 1e-9).asin();
        Intrinsics {
            focal_px: 0.4 * height as f64 / half_angle.tan(),
            width,
            height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub camera_position: Point3<f64>,
    pub look_at: Point3<f64>,
    pub up: Vector3<f64>,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraSurface {
    Sphere,
    /// Upper hemisphere only (elevation ≥ 0 relative to the center).
    Dome,
}

impl Viewpoint {
    pub fn new(
        camera_position: Point3<f64>,
        look_at: Point3<f64>,
        up: Vector3<f64>,
        intrinsics: Intrinsics,
    ) -> Result<Self> {
        let axis = look_at - camera_position;
        if axis.norm() < 1e-12 {
            return Err(Error::invalid(
                "camera position coincides with its look-at point",
            ));
        }
        if up.norm() < 1e-12 || axis.normalize().cross(&up.normalize()).norm() < 1e-9 {
            return Err(Error::invalid(
                "camera up vector is parallel to the view axis",
            ));
        }
        if intrinsics.width == 0 || intrinsics.height == 0 || !(intrinsics.focal_px > 0.0) {
            return Err(Error::invalid("camera intrinsics must be positive"));
        }
        Ok(Viewpoint {
            camera_position,
            look_at,
            up: up.normalize(),
            intrinsics,
        })
    }

    /// Unit ray through the center of pixel (`col`, `row`); row 0 is the top.
    pub fn pixel_ray(&self, col: usize, row: usize) -> Vector3<f64> {
        let forward = (self.look_at - self.camera_position).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        let k = &self.intrinsics;
        let x = col as f64 + 0.5 - k.width as f64 / 2.0;
        let y = row as f64 + 0.5 - k.height as f64 / 2.0;
        (forward * k.focal_px + right * x - up * y).normalize()
    }
}

/// Cameras on a Fibonacci lattice over a sphere (or its upper half) around
/// `center`, all looking at the center. The seed rotates the lattice about
/// the vertical axis.
///
/// The end rows are pulled in from the poles by an offset that grows with
/// `n`, which widens the closest pair compared to the plain half-step
/// lattice.
pub fn sample_viewpoints(
    n: usize,
    surface: CameraSurface,
    radius: f64,
    center: Point3<f64>,
    intrinsics: Intrinsics,
    seed: u64,
) -> Result<Vec<Viewpoint>> {
    if n == 0 {
        return Err(Error::invalid("need at least one viewpoint"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("camera radius must be positive"));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let offset = rng::seeded(seed).gen::<f64>() * 2.0 * PI;
    let eps = pole_offset(n);
    (0..n)
        .map(|i| {
            let t = if n == 1 {
                0.5
            } else {
                (i as f64 + eps) / (n as f64 - 1.0 + 2.0 * eps)
            };
            let z = match surface {
                CameraSurface::Sphere => 1.0 - 2.0 * t,
                CameraSurface::Dome => 1.0 - t,
            };
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64 + offset;
            let dir = Vector3::new(rho * phi.cos(), rho * phi.sin(), z);
            let up = if dir.z.abs() > 0.999 {
                Vector3::y()
            } else {
                Vector3::z()
            };
            Viewpoint::new(center + dir * radius, center, up, intrinsics)
        })
        .collect()
}

fn pole_offset(n: usize) -> f64 {
    match n {
        0..=23 => 0.33,
        24..=176 => 1.33,
        177..=889 => 3.33,
        890..=10_999 => 10.0,
        _ => 27.0,
    }
}

/// Per-pixel index of the nearest visible face, `None` for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceImage {
    pub width: usize,
    pub height: usize,
    pub faces: Vec<Option<u32>>,
}

impl FaceImage {
    pub fn get(&self, col: usize, row: usize) -> Option<u32> {
        self.faces[row * self.width + col]
    }

    pub fn foreground(&self) -> usize {
        self.faces.iter().filter(|f| f.is_some()).count()
    }
}

pub fn render_visible_faces(mesh: &TriangleMesh, view: &Viewpoint) -> FaceImage {
    let (w, h) = (view.intrinsics.width, view.intrinsics.height);
    let rows = par::map_range(h, |row| {
        (0..w)
            .map(|col| {
                let dir = view.pixel_ray(col, row);
                mesh.raycast(&view.camera_position, &dir)
                    .expect("pixel rays are unit length")
                    .map(|hit| hit.face_index as u32)
            })
            .collect::<Vec<_>>()
    });
    FaceImage {
        width: w,
        height: h,
        faces: rows.into_iter().flatten().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn k(n: usize) -> Intrinsics {
        Intrinsics {
            focal_px: 100.0,
            width: n,
            height: n,
        }
    }

    #[test]
    fn single_view_on_sphere() {
        let v =
            sample_viewpoints(1, CameraSurface::Sphere, 2.0, Point3::origin(), k(8), 3).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].camera_position.coords.norm() - 2.0).abs() < 1e-12);
        assert_eq!(v[0].look_at, Point3::origin());
        assert!(
            sample_viewpoints(0, CameraSurface::Sphere, 2.0, Point3::origin(), k(8), 3).is_err()
        );
    }

    #[test]
    fn dome_stays_above_center() {
        let c = Point3::new(0.0, 0.0, 0.3);
        let v = sample_viewpoints(20, CameraSurface::Dome, 1.0, c, k(8), 9).unwrap();
        assert_eq!(v.len(), 20);
        assert!(v.iter().all(|v| v.camera_position.z >= c.z));
    }

    #[test]
    fn invalid_viewpoints_rejected() {
        let p = Point3::new(1.0, 0.0, 0.0);
        assert!(Viewpoint::new(p, p, Vector3::z(), k(4)).is_err());
        assert!(Viewpoint::new(p, Point3::origin(), Vector3::x(), k(4)).is_err());
    }

    #[test]
    fn frontal_cube_shows_front_face_only() {
        let cube = shapes::cube(1.0);
        // 0.5 m half-width at 1.5 m from the face fills a 64 px frame at f = 200.
        let view = Viewpoint::new(
            Point3::new(2.0, 0.0, 0.0),
            Point3::origin(),
            Vector3::z(),
            Intrinsics {
                focal_px: 190.0,
                width: 64,
                height: 64,
            },
        )
        .unwrap();
        let img = render_visible_faces(&cube, &view);
        let mut seen: Vec<u32> = img.faces.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 2);
        for f in seen {
            assert!((cube.face_normal(f as usize) - Vector3::x()).norm() < 1e-12);
        }
        assert_eq!(img.foreground(), 64 * 64);
    }

    #[test]
    fn empty_scene_is_background() {
        let cube = shapes::cube(1.0);
        let view = Viewpoint::new(
            Point3::new(5.0, 0.0, 0.0),
            Point3::new(6.0, 0.0, 0.0),
            Vector3::z(),
            k(16),
        )
        .unwrap();
        assert_eq!(render_visible_faces(&cube, &view).foreground(), 0);
    }
}
