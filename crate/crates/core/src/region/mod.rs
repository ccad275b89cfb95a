//! Useful-region proposal: part masks from several views are deprojected onto
//! the target mesh, voted per face and reduced to the most-voted faces.

mod camera;
pub mod io;
mod vote;

use std::collections::HashSet;

use nalgebra::Point3;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use camera::{
    render_visible_faces, sample_viewpoints, CameraSurface, FaceImage, Intrinsics, Viewpoint,
};
pub use vote::{filter_two_means, select_useful_region, tally_faces, two_means_keep};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::{par, rng};

/// Default fraction of mesh faces kept as the useful region.
pub const DEFAULT_FRACTION: f64 = 0.6;

/// One view's binary part mask, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskObservation {
    pub view_index: usize,
    pub label: String,
    pub width: usize,
    pub height: usize,
    mask: Vec<bool>,
    pixel_count: usize,
}

impl MaskObservation {
    pub fn new(
        view_index: usize,
        label: &str,
        width: usize,
        height: usize,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::invalid(format!(
                "mask has {} pixels, expected {width}x{height}",
                mask.len()
            )));
        }
        let pixel_count = mask.iter().filter(|&&m| m).count();
        Ok(MaskObservation {
            view_index,
            label: label.to_string(),
            width,
            height,
            mask,
            pixel_count,
        })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceTally {
    pub counts: Vec<usize>,
}

impl FaceTally {
    pub fn zeros(faces: usize) -> Self {
        FaceTally {
            counts: vec![0; faces],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Elementwise sum; associative and commutative.
    pub fn merge(mut self, other: &FaceTally) -> Result<FaceTally> {
        if self.counts.len() != other.counts.len() {
            return Err(Error::invalid("cannot merge tallies of different meshes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsefulRegion {
    pub label: String,
    pub face_indices: Vec<usize>,
    pub tally: FaceTally,
}

impl UsefulRegion {
    /// A region given directly by its faces, with a unit vote on each.
    pub fn from_faces(label: &str, mesh: &TriangleMesh, faces: &[usize]) -> Result<Self> {
        let mut tally = FaceTally::zeros(mesh.face_count());
        for &f in faces {
            if f >= mesh.face_count() {
                return Err(Error::invalid(format!(
                    "face {f} out of range for a mesh with {} faces",
                    mesh.face_count()
                )));
            }
            tally.counts[f] = 1;
        }
        let mut face_indices: Vec<usize> = faces.to_vec();
        face_indices.sort_unstable();
        face_indices.dedup();
        Ok(UsefulRegion {
            label: label.to_string(),
            face_indices,
            tally,
        })
    }

    pub fn contains(&self, face: usize) -> bool {
        self.face_indices.binary_search(&face).is_ok()
    }
}

/// Whether each view of the oracle emits a corrupted mask.
///
/// View `i` draws one `f64` from `rng::stream(seed, &[i])`; the view is
/// corrupted when that draw is below `noise`. The blob parameters come from
/// the same stream afterwards.
pub fn oracle_corruption(views: usize, noise: f64, seed: u64) -> Vec<bool> {
    (0..views)
        .map(|i| rng::stream(seed, &[i as u64]).gen::<f64>() < noise)
        .collect()
}

/// Stand-in for a segmentation model: marks the pixels whose visible face
/// belongs to `region_faces`. With probability `noise` a view instead gets
/// a small disc at a random spot (see [`oracle_corruption`]).
pub fn synthetic_oracle_masks(
    mesh: &TriangleMesh,
    region_faces: &[usize],
    views: &[Viewpoint],
    noise: f64,
    seed: u64,
    label: &str,
) -> Result<Vec<MaskObservation>> {
    if let Some(&bad) = region_faces.iter().find(|&&f| f >= mesh.face_count()) {
        return Err(Error::invalid(format!("region face {bad} out of range")));
    }
    let region: HashSet<u32> = region_faces.iter().map(|&f| f as u32).collect();
    par::map_range(views.len(), |i| {
        let view = &views[i];
        let (w, h) = (view.intrinsics.width, view.intrinsics.height);
        let mut stream = rng::stream(seed, &[i as u64]);
        let mask = if stream.gen::<f64>() < noise {
            let cx = stream.gen_range(0.0..w as f64);
            let cy = stream.gen_range(0.0..h as f64);
            let r = stream.gen_range(1.5..4.0);
            (0..w * h)
                .map(|p| {
                    let dx = (p % w) as f64 + 0.5 - cx;
                    let dy = (p / w) as f64 + 0.5 - cy;
                    dx * dx + dy * dy <= r * r
                })
                .collect()
        } else {
            render_visible_faces(mesh, view)
                .faces
                .iter()
                .map(|f| f.is_some_and(|f| region.contains(&f)))
                .collect()
        };
        MaskObservation::new(i, label, w, h, mask)
    })
    .into_iter()
    .collect()
}

/// One surface point per set pixel whose ray hits the mesh.
pub fn deproject_mask(
    mesh: &TriangleMesh,
    view: &Viewpoint,
    mask: &MaskObservation,
) -> Result<Vec<Point3<f64>>> {
    if mask.width != view.intrinsics.width || mask.height != view.intrinsics.height {
        return Err(Error::invalid(format!(
            "mask is {}x{} but view {} expects {}x{}",
            mask.width, mask.height, mask.view_index, view.intrinsics.width, view.intrinsics.height
        )));
    }
    let mut points = Vec::new();
    for row in 0..mask.height {
        for col in 0..mask.width {
            if mask.get(col, row) {
                if let Some(hit) = mesh.raycast(&view.camera_position, &view.pixel_ray(col, row))? {
                    points.push(hit.point);
                }
            }
        }
    }
    Ok(points)
}

/// Filter, deproject and vote a set of same-label observations, then select.
/// `views[o.view_index]` must be the camera of observation `o`.
pub fn propose_region(
    mesh: &TriangleMesh,
    views: &[Viewpoint],
    observations: &[MaskObservation],
    fraction: f64,
) -> Result<UsefulRegion> {
    let label = match observations.first() {
        Some(o) => o.label.clone(),
        None => return Err(Error::empty("no mask observations")),
    };
    if let Some(o) = observations.iter().find(|o| o.label != label) {
        return Err(Error::invalid(format!(
            "mixed labels {:?} and {:?}",
            label, o.label
        )));
    }
    if let Some(o) = observations.iter().find(|o| o.view_index >= views.len()) {
        return Err(Error::invalid(format!(
            "observation refers to missing view {}",
            o.view_index
        )));
    }
    let kept = filter_two_means(observations);
    log::info!(
        "{label}: kept {} of {} views",
        kept.len(),
        observations.len()
    );
    let partial: Vec<Result<FaceTally>> = par::map(&kept, |_, o| {
        let points = deproject_mask(mesh, &views[o.view_index], o)?;
        Ok(tally_faces(mesh, &points))
    });
    let mut tally = FaceTally::zeros(mesh.face_count());
    for t in partial {
        tally = tally.merge(&t?)?;
    }
    select_useful_region(&label, &tally, fraction)
}

/// |A ∩ B| / |A ∪ B| over face index sets.
pub fn face_iou(a: &[usize], b: &[usize]) -> f64 {
    let a: HashSet<usize> = a.iter().copied().collect();
    let b: HashSet<usize> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}
