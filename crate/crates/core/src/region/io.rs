//! Mask and region files.
//!
//! A mask is a binary PGM (`P5`, maxval 255; pixels ≥ 128 are set) next to a
//! sidecar with the same stem and a `.view` extension:
//!
//! ```text
//! # semgrasp-mask v1
//! view_index 3
//! label handle
//! image_width 128
//! image_height 128
//! camera_position 0.0 -0.6 0.2
//! look_at 0 0 0
//! up 0 0 1
//! focal_px 185.2
//! ```
//!
//! A region file is a header line, the label, then one face index per line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};

use super::{Intrinsics, MaskObservation, UsefulRegion, Viewpoint};
use crate::error::{Error, Result};

pub const MASK_HEADER: &str = "# semgrasp-mask v1";
pub const REGION_HEADER: &str = "# semgrasp-region v1";

/// Reads a P5 PGM with maxval 255 as `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, 1, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::parse(
            path,
            1,
            format!("expected P5, found {:?}", fields[0]),
        ));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(path, 1, format!("bad PGM header field {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::parse(
            path,
            1,
            format!("only maxval 255 is supported, found {maxval}"),
        ));
    }
    let data = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| Error::parse(path, 1, format!("raster shorter than {w}x{h}")))?;
    Ok((w, h, data.to_vec()))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A mask plus the camera it was taken from.
#[derive(Debug, Clone)]
pub struct MaskFile {
    pub view: Viewpoint,
    pub observation: MaskObservation,
}

fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("view")
}

pub fn write_mask(pgm: &Path, view: &Viewpoint, obs: &MaskObservation) -> Result<()> {
    let pixels: Vec<u8> = obs
        .mask()
        .iter()
        .map(|&m| if m { 255 } else { 0 })
        .collect();
    write_pgm(pgm, obs.width, obs.height, &pixels)?;
    let v3 = |v: &Vector3<f64>| format!("{} {} {}", v.x, v.y, v.z);
    let mut s = String::new();
    let _ = writeln!(s, "{MASK_HEADER}");
    let _ = writeln!(s, "view_index {}", obs.view_index);
    let _ = writeln!(s, "label {}", obs.label);
    let _ = writeln!(s, "image_width {}", obs.width);
    let _ = writeln!(s, "image_height {}", obs.height);
    let _ = writeln!(s, "camera_position {}", v3(&view.camera_position.coords));
    let _ = writeln!(s, "look_at {}", v3(&view.look_at.coords));
    let _ = writeln!(s, "up {}", v3(&view.up));
    let _ = writeln!(s, "focal_px {}", view.intrinsics.focal_px);
    let side = sidecar_path(pgm);
    std::fs::write(&side, s).map_err(|e| Error::io(&side, e))
}

pub fn read_mask(pgm: &Path) -> Result<MaskFile> {
    let side = sidecar_path(pgm);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut view_index = None;
    let mut label = None;
    let mut width = None;
    let mut height = None;
    let mut position = None;
    let mut look_at = None;
    let mut up = None;
    let mut focal = None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let int = || {
            rest.parse::<usize>()
                .map_err(|_| Error::parse(&side, ln, format!("bad integer {rest:?}")))
        };
        let float = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(&side, ln, format!("bad number {s:?}")))
        };
        let vec3 = || -> Result<Vector3<f64>> {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::parse(&side, ln, "expected 3 numbers"));
            }
            Ok(Vector3::new(
                float(parts[0])?,
                float(parts[1])?,
                float(parts[2])?,
            ))
        };
        match key {
            "view_index" => view_index = Some(int()?),
            "label" if !rest.is_empty() => label = Some(rest.to_string()),
            "image_width" => width = Some(int()?),
            "image_height" => height = Some(int()?),
            "camera_position" => position = Some(Point3::from(vec3()?)),
            "look_at" => look_at = Some(Point3::from(vec3()?)),
            "up" => up = Some(vec3()?),
            "focal_px" => focal = Some(float(rest)?),
            _ => return Err(Error::parse(&side, ln, format!("unexpected {line:?}"))),
        }
    }
    let missing = |k: &str| Error::parse(&side, 0, format!("missing key {k}"));
    let (w, h, pixels) = read_pgm(pgm)?;
    let width = width.ok_or_else(|| missing("image_width"))?;
    let height = height.ok_or_else(|| missing("image_height"))?;
    if (w, h) != (width, height) {
        return Err(Error::invalid(format!(
            "{}: image is {w}x{h} but sidecar says {width}x{height}",
            pgm.display()
        )));
    }
    let view = Viewpoint::new(
        position.ok_or_else(|| missing("camera_position"))?,
        look_at.ok_or_else(|| missing("look_at"))?,
        up.ok_or_else(|| missing("up"))?,
        Intrinsics {
            focal_px: focal.ok_or_else(|| missing("focal_px"))?,
            width,
            height,
        },
    )?;
    let observation = MaskObservation::new(
        view_index.ok_or_else(|| missing("view_index"))?,
        &label.ok_or_else(|| missing("label"))?,
        width,
        height,
        pixels.iter().map(|&p| p >= 128).collect(),
    )?;
    Ok(MaskFile { view, observation })
}

/// Every `*.pgm` in `dir`, ordered by label then view index.
pub fn read_mask_dir(dir: &Path) -> Result<Vec<MaskFile>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "pgm") {
            out.push(read_mask(&path)?);
        }
    }
    out.sort_by(|a, b| {
        (&a.observation.label, a.observation.view_index)
            .cmp(&(&b.observation.label, b.observation.view_index))
    });
    Ok(out)
}

pub fn region_to_string(region: &UsefulRegion) -> String {
    let mut s = format!("{REGION_HEADER}\n{}\n", region.label);
    for f in &region.face_indices {
        let _ = writeln!(s, "{f}");
    }
    s
}

/// Parses a region file into `(label, sorted face indices)`.
pub fn parse_region(text: &str, path: &Path) -> Result<(String, Vec<usize>)> {
    let mut label = None;
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if label.is_none() {
            label = Some(line.to_string());
            continue;
        }
        faces.push(
            line.parse::<usize>()
                .map_err(|_| Error::parse(path, i + 1, format!("bad face index {line:?}")))?,
        );
    }
    let label = label.ok_or_else(|| Error::parse(path, 0, "missing label line"))?;
    faces.sort_unstable();
    faces.dedup();
    Ok((label, faces))
}

pub fn read_region(path: &Path) -> Result<(String, Vec<usize>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_region(&text, path)
}
