//! Voxel volumes, the VVOL container format and overlapping subvolume cropping.
//!
//! Voxels are stored x-fastest: the linear index of `(x, y, z)` is
//! `x + nx * (y + ny * z)`. Pore voxels are `1`, solid voxels are `0`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Voxel edge length of the reference sandstone scan, in micrometers.
pub const DEFAULT_VOXEL_SIZE_UM: f64 = 2.25;

const VVOL_MAGIC: &[u8] = b"VVOL1\n";

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("payload is {actual} bytes, header requires {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("unsupported dtype `{0}`")]
    UnsupportedDtype(String),
    #[error("invalid voxel value at index {index}: {value}")]
    InvalidVoxelValue { index: usize, value: f64 },
    #[error("invalid volume: {0}")]
    Invalid(String),
    #[error("subvolume size {size} exceeds volume dimension {dim}")]
    SpecTooLarge { size: usize, dim: usize },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = VolumeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseEncoding {
    Binary,
    Continuous,
}

/// Dense voxel payload. Binary volumes hold phase labels, continuous volumes
/// hold values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    Binary(Vec<u8>),
    Continuous(Vec<f32>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::Binary(v) => v.len(),
            VoxelData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated 3D voxel grid with a physical voxel size.
///
/// Volumes are immutable once built; every constructor checks the
/// length, voxel size and value-range invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    dims: [usize; 3],
    voxel_size_um: f64,
    data: VoxelData,
}

impl VoxelVolume {
    pub fn new(dims: [usize; 3], voxel_size_um: f64, data: VoxelData) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::Invalid(format!("zero dimension in {dims:?}")));
        }
        if !(voxel_size_um.is_finite() && voxel_size_um > 0.0) {
            return Err(VolumeError::Invalid(format!(
                "voxel size must be positive, got {voxel_size_um}"
            )));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(VolumeError::SizeMismatch {
                expected,
                actual: data.len(),
            });
        }
        match &data {
            VoxelData::Binary(v) => {
                if let Some(index) = v.iter().position(|&b| b > 1) {
                    return Err(VolumeError::InvalidVoxelValue {
                        index,
                        value: v[index] as f64,
                    });
                }
            }
            VoxelData::Continuous(v) => {
                if let Some(index) = v
                    .iter()
                    .position(|x| !x.is_finite() || *x < -1.0 || *x > 1.0)
                {
                    return Err(VolumeError::InvalidVoxelValue {
                        index,
                        value: v[index] as f64,
                    });
                }
            }
        }
        Ok(Self {
            dims,
            voxel_size_um,
            data,
        })
    }

    pub fn binary(dims: [usize; 3], voxel_size_um: f64, data: Vec<u8>) -> Result<Self> {
        Self::new(dims, voxel_size_um, VoxelData::Binary(data))
    }

    pub fn continuous(dims: [usize; 3], voxel_size_um: f64, data: Vec<f32>) -> Result<Self> {
        Self::new(dims, voxel_size_um, VoxelData::Continuous(data))
    }

    /// Binary volume whose pore set is given by a predicate over voxel coordinates.
    pub fn from_fn(
        dims: [usize; 3],
        voxel_size_um: f64,
        mut is_pore: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(is_pore(x, y, z) as u8);
                }
            }
        }
        Self::binary(dims, voxel_size_um, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size_um(&self) -> f64 {
        self.voxel_size_um
    }

    /// Voxel edge length in meters.
    pub fn voxel_size_m(&self) -> f64 {
        self.voxel_size_um * 1e-6
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn encoding(&self) -> PhaseEncoding {
        match self.data {
            VoxelData::Binary(_) => PhaseEncoding::Binary,
            VoxelData::Continuous(_) => PhaseEncoding::Continuous,
        }
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn into_data(self) -> VoxelData {
        self.data
    }

    /// Phase labels, if this is a binary volume.
    pub fn as_binary(&self) -> Option<&[u8]> {
        match &self.data {
            VoxelData::Binary(v) => Some(v),
            VoxelData::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&[f32]> {
        match &self.data {
            VoxelData::Continuous(v) => Some(v),
            VoxelData::Binary(_) => None,
        }
    }

    /// Values as `f32` regardless of encoding.
    pub fn values_f32(&self) -> Vec<f32> {
        match &self.data {
            VoxelData::Binary(v) => v.iter().map(|&b| b as f32).collect(),
            VoxelData::Continuous(v) => v.clone(),
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn pore_count(&self) -> Option<usize> {
        self.as_binary()
            .map(|v| v.iter().map(|&b| b as usize).sum())
    }

    /// Bulk volume in cubic meters.
    pub fn bulk_volume_m3(&self) -> f64 {
        self.len() as f64 * self.voxel_size_m().powi(3)
    }

    /// Copy of the axis-aligned block starting at `origin` with edge lengths `size`.
    pub fn extract_block(&self, origin: [usize; 3], size: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if origin[a] + size[a] > self.dims[a] {
                return Err(VolumeError::SpecTooLarge {
                    size: origin[a] + size[a],
                    dim: self.dims[a],
                });
            }
        }
        let data = match &self.data {
            VoxelData::Binary(v) => VoxelData::Binary(copy_block(v, self.dims, origin, size)),
            VoxelData::Continuous(v) => {
                VoxelData::Continuous(copy_block(v, self.dims, origin, size))
            }
        };
        Self::new(size, self.voxel_size_um, data)
    }
}

fn copy_block<T: Copy>(src: &[T], dims: [usize; 3], origin: [usize; 3], size: [usize; 3]) -> Vec<T> {
    let mut out = Vec::with_capacity(size[0] * size[1] * size[2]);
    for z in origin[2]..origin[2] + size[2] {
        for y in origin[1]..origin[1] + size[1] {
            let start = origin[0] + dims[0] * (y + dims[1] * z);
            out.extend_from_slice(&src[start..start + size[0]]);
        }
    }
    out
}

/// Unbounded real-valued field on a voxel grid (distance maps, smoothed maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub dims: [usize; 3],
    pub voxel_size_um: f64,
    pub values: Vec<f64>,
}

impl ScalarField {
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index(x, y, z)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Explicit ingest format. Raw files carry no header, so dims and voxel size
/// must be supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormatHint {
    Vvol,
    RawU8 { dims: [usize; 3], voxel_size_um: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VvolHeader {
    dims: [usize; 3],
    voxel_size_um: f64,
    dtype: String,
    encoding: String,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> VolumeError + '_ {
    move |source| VolumeError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Load a volume from disk. Without a hint the file must be a VVOL container.
pub fn load_volume(path: impl AsRef<Path>, hint: Option<FormatHint>) -> Result<VoxelVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    match hint.unwrap_or(FormatHint::Vvol) {
        FormatHint::Vvol => decode_vvol(&bytes),
        FormatHint::RawU8 {
            dims,
            voxel_size_um,
        } => {
            let expected = dims[0] * dims[1] * dims[2];
            if bytes.len() != expected {
                return Err(VolumeError::SizeMismatch {
                    expected,
                    actual: bytes.len(),
                });
            }
            VoxelVolume::binary(dims, voxel_size_um, normalize_u8(bytes)?)
        }
    }
}

fn normalize_u8(mut bytes: Vec<u8>) -> Result<Vec<u8>> {
    for (index, b) in bytes.iter_mut().enumerate() {
        *b = match *b {
            0 => 0,
            1 | 255 => 1,
            other => {
                return Err(VolumeError::InvalidVoxelValue {
                    index,
                    value: other as f64,
                })
            }
        };
    }
    Ok(bytes)
}

/// Decode an in-memory VVOL container.
pub fn decode_vvol(bytes: &[u8]) -> Result<VoxelVolume> {
    let rest = bytes
        .strip_prefix(VVOL_MAGIC)
        .ok_or_else(|| VolumeError::MalformedHeader("missing VVOL1 magic".into()))?;
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| VolumeError::MalformedHeader("unterminated header line".into()))?;
    let header: VvolHeader = serde_json::from_slice(&rest[..newline])
        .map_err(|e| VolumeError::MalformedHeader(e.to_string()))?;
    if header.encoding != "raw" {
        return Err(VolumeError::MalformedHeader(format!(
            "unknown encoding `{}`",
            header.encoding
        )));
    }
    let payload = &rest[newline + 1..];
    let count = header.dims.iter().product::<usize>();
    let width = match header.dtype.as_str() {
        "u8" => 1,
        "f32" => 4,
        other => return Err(VolumeError::UnsupportedDtype(other.to_string())),
    };
    if payload.len() != count * width {
        return Err(VolumeError::SizeMismatch {
            expected: count * width,
            actual: payload.len(),
        });
    }
    let data = if width == 1 {
        VoxelData::Binary(normalize_u8(payload.to_vec())?)
    } else {
        VoxelData::Continuous(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    };
    VoxelVolume::new(header.dims, header.voxel_size_um, data)
}

/// Encode a volume as a VVOL container.
pub fn encode_vvol(vol: &VoxelVolume) -> Vec<u8> {
    let dtype = match vol.encoding() {
        PhaseEncoding::Binary => "u8",
        PhaseEncoding::Continuous => "f32",
    };
    let header = VvolHeader {
        dims: vol.dims,
        voxel_size_um: vol.voxel_size_um,
        dtype: dtype.into(),
        encoding: "raw".into(),
    };
    let mut out = VVOL_MAGIC.to_vec();
    serde_json::to_writer(&mut out, &header).expect("header serializes");
    out.push(b'\n');
    match &vol.data {
        VoxelData::Binary(v) => out.extend_from_slice(v),
        VoxelData::Continuous(v) => {
            out.reserve(v.len() * 4);
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

pub fn save_volume(vol: &VoxelVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&encode_vvol(vol)).map_err(io_err(path))?;
    Ok(())
}

/// Cube edge length and origin shift for overlapping subvolume extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubvolumeSpec {
    pub size: usize,
    pub stride: usize,
}

impl SubvolumeSpec {
    /// Number of origins along an axis of length `dim`.
    pub fn count_along(&self, dim: usize) -> usize {
        if self.size > dim {
            0
        } else {
            (dim - self.size) / self.stride + 1
        }
    }

    /// Origins in lexicographic (x, y, z) order, x slowest.
    pub fn origins(&self, dims: [usize; 3]) -> Vec<[usize; 3]> {
        let counts = dims.map(|d| self.count_along(d));
        let mut out = Vec::with_capacity(counts.iter().product());
        for ix in 0..counts[0] {
            for iy in 0..counts[1] {
                for iz in 0..counts[2] {
                    out.push([ix * self.stride, iy * self.stride, iz * self.stride]);
                }
            }
        }
        out
    }
}

pub fn crop_subvolumes(vol: &VoxelVolume, spec: SubvolumeSpec) -> Result<Vec<VoxelVolume>> {
    if spec.size == 0 || spec.stride == 0 {
        return Err(VolumeError::Invalid(
            "subvolume size and stride must be at least 1".into(),
        ));
    }
    if let Some(&dim) = vol.dims.iter().find(|&&d| spec.size > d) {
        return Err(VolumeError::SpecTooLarge {
            size: spec.size,
            dim,
        });
    }
    spec.origins(vol.dims)
        .into_iter()
        .map(|o| vol.extract_block(o, [spec.size; 3]))
        .collect()
}
