//! Native raw volumes (`.f32` + JSON sidecar) and PNG slice stacks.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{IntensityMapping, Volume};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;
pub const RAW_KIND: &str = "medsr-raw-volume";
pub const PNG_KIND: &str = "medsr-png-stack";
pub const VOXEL_ORDER: &str = "y,x,z";
/// Sidecar file name inside a PNG stack directory.
pub const STACK_SIDECAR: &str = "volume.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormat {
    Raw,
    Png8,
    Png16,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub format_version: u32,
    pub kind: String,
    /// `[width, height, depth]`.
    pub extents: [usize; 3],
    /// `[x, y, z]` voxel size.
    pub spacing_mm: [f64; 3],
    pub voxel_order: String,
    pub dtype: String,
    /// Data file name, relative to the sidecar.
    pub data_file: String,
    pub intensity: Option<IntensityMapping>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackSidecar {
    pub format_version: u32,
    pub kind: String,
    pub extents: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub bit_depth: u8,
    pub slices: usize,
    pub intensity: Option<IntensityMapping>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, format!("malformed header: {e}")))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// `foo.json` / `foo.f32` -> (`foo.json`, `foo.f32`).
fn raw_pair(path: &Path) -> Result<(PathBuf, PathBuf)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f32") => Ok((path.with_extension("json"), path.with_extension("f32"))),
        _ => Err(Error::format(path, "raw volumes are addressed by their .json sidecar or .f32 data file")),
    }
}

pub fn save_raw(volume: &Volume, path: &Path) -> Result<()> {
    let (header_path, data_path) = raw_pair(path)?;
    if let Some(dir) = header_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let sidecar = RawSidecar {
        format_version: FORMAT_VERSION,
        kind: RAW_KIND.into(),
        extents: volume.extents(),
        spacing_mm: volume.spacing_mm,
        voxel_order: VOXEL_ORDER.into(),
        dtype: "f32le".into(),
        data_file: data_path.file_name().unwrap().to_string_lossy().into_owned(),
        intensity: volume.intensity,
    };
    let bytes: Vec<u8> = volume.voxels().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_atomic(&data_path, &bytes)?;
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_atomic(&header_path, json.as_bytes())
}

pub fn load_raw(path: &Path) -> Result<Volume> {
    let (header_path, _) = raw_pair(path)?;
    let sc: RawSidecar = read_json(&header_path)?;
    let bad = |m: String| Error::format(&header_path, m);
    if sc.kind != RAW_KIND || sc.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported kind/version {}/{}", sc.kind, sc.format_version)));
    }
    if sc.voxel_order != VOXEL_ORDER || sc.dtype != "f32le" {
        return Err(bad(format!("unsupported layout {} / {}", sc.voxel_order, sc.dtype)));
    }
    let data_path = header_path.with_file_name(&sc.data_file);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let [w, h, d] = sc.extents;
    let expected = w.checked_mul(h).and_then(|n| n.checked_mul(d)).and_then(|n| n.checked_mul(4));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            &data_path,
            format!("{} bytes do not hold {w}x{h}x{d} f32 voxels", bytes.len()),
        ));
    }
    let voxels = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let mut v = Volume::new(w, h, d, voxels, sc.spacing_mm).map_err(|e| bad(e.to_string()))?;
    v.intensity = sc.intensity;
    Ok(v)
}

fn slice_name(z: usize) -> String {
    format!("slice_{z:04}.png")
}

/// Writes one 2D image in `[0, 1]` as an 8- or 16-bit grayscale PNG.
pub fn save_slice_png(slice: &Tensor<f32>, path: &Path, bit_depth: u8) -> Result<()> {
    let (h, w) = slice.plane_dims();
    let level = |x: u32, y: u32, max: f64| (slice.at2(y as usize, x as usize).clamp(0.0, 1.0) as f64 * max).round();
    let res = match bit_depth {
        8 => ImageBuffer::<Luma<u8>, _>::from_fn(w as u32, h as u32, |x, y| Luma([level(x, y, 255.0) as u8])).save(path),
        16 => ImageBuffer::<Luma<u16>, _>::from_fn(w as u32, h as u32, |x, y| Luma([level(x, y, 65535.0) as u16])).save(path),
        other => return Err(Error::format(path, format!("unsupported bit depth {other} (use 8 or 16)"))),
    };
    res.map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_png_stack(volume: &Volume, dir: &Path, bit_depth: u8) -> Result<()> {
    if bit_depth != 8 && bit_depth != 16 {
        return Err(Error::format(dir, format!("unsupported bit depth {bit_depth} (use 8 or 16)")));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [w, h, d] = volume.extents();
    for z in 0..d {
        save_slice_png(&volume.axial_slice::<f32>(z), &dir.join(slice_name(z)), bit_depth)?;
    }
    let sidecar = StackSidecar {
        format_version: FORMAT_VERSION,
        kind: PNG_KIND.into(),
        extents: [w, h, d],
        spacing_mm: volume.spacing_mm,
        bit_depth,
        slices: d,
        intensity: volume.intensity,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_atomic(&dir.join(STACK_SIDECAR), json.as_bytes())
}

/// Loads `slice_NNNN.png` files in ascending order. Without a sidecar the
/// spacing defaults to 1 mm.
pub fn load_png_stack(dir: &Path) -> Result<Volume> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("slice_") && n.ends_with(".png"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no slice_NNNN.png files"));
    }
    let sidecar_path = dir.join(STACK_SIDECAR);
    let sidecar: Option<StackSidecar> = if sidecar_path.exists() { Some(read_json(&sidecar_path)?) } else { None };
    if let Some(sc) = &sidecar {
        if sc.kind != PNG_KIND || sc.format_version != FORMAT_VERSION {
            return Err(Error::format(&sidecar_path, format!("unsupported kind/version {}/{}", sc.kind, sc.format_version)));
        }
        if sc.slices != files.len() || sc.extents[2] != files.len() {
            return Err(Error::format(
                &sidecar_path,
                format!("sidecar declares {} slices, directory holds {}", sc.slices, files.len()),
            ));
        }
    }
    let mut slices = Vec::with_capacity(files.len());
    let mut dims = None;
    for path in &files {
        let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        if *dims.get_or_insert((w, h)) != (w, h) {
            let (w0, h0) = dims.unwrap();
            return Err(Error::format(path, format!("slice is {w}x{h}, expected {w0}x{h0}")));
        }
        let values: Vec<f32> = match img {
            image::DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
            image::DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| (v as f64 / 65535.0) as f32).collect(),
            other => {
                return Err(Error::format(path, format!("unsupported pixel format {:?}; expected 8- or 16-bit grayscale", other.color())))
            }
        };
        slices.push(crate::tensor::Tensor::new(&[h, w], values)?);
    }
    let (w, h) = dims.unwrap();
    if let Some(sc) = &sidecar {
        if sc.extents[0] != w || sc.extents[1] != h {
            return Err(Error::format(&sidecar_path, format!("sidecar extents {:?} disagree with {w}x{h} slices", sc.extents)));
        }
    }
    let spacing = sidecar.as_ref().map_or([1.0; 3], |s| s.spacing_mm);
    let mut v = Volume::from_axial_slices(&slices, spacing)?;
    v.intensity = sidecar.and_then(|s| s.intensity);
    Ok(v)
}

/// Directory -> PNG stack; `.json`/`.f32` -> raw.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    if path.is_dir() {
        load_png_stack(path)
    } else {
        load_raw(path)
    }
}

pub fn save_volume(volume: &Volume, path: impl AsRef<Path>, format: VolumeFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        VolumeFormat::Raw => save_raw(volume, path),
        VolumeFormat::Png8 => save_png_stack(volume, path, 8),
        VolumeFormat::Png16 => save_png_stack(volume, path, 16),
    }
}
