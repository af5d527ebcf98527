//! C ABI over the poromorph toolkit.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`PmStatus`]; on failure a message is available from
//! [`pm_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use poromorph::conditioner::{condition, ConditionerConfig, ConditionerError, PropertyKind, PropertyTarget};
use poromorph::generators::{GeneratorError, GrfGenerator, GrfGeneratorConfig, LatentVector};
use poromorph::morphometrics::{minkowski_report, porosity};
use poromorph::network::{
    extract_network, network_stats, simulate_permeability, Domain, ExtractionParams, FlowAxis, FlowConfig,
    NetworkError, PoreNetwork,
};
use poromorph::volume::{load_volume, save_volume, VolumeError};
use poromorph::VoxelVolume;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimMismatch = 5,
    EmptyPorePhase = 6,
    NoPercolatingPath = 7,
    SolverFailed = 8,
    Internal = 9,
}

/// Binary voxel volume.
pub struct PmVolume(VoxelVolume);

/// Extracted pore network.
pub struct PmNetwork(PoreNetwork);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PmMorphometry {
    pub porosity: f64,
    /// 1/m
    pub specific_area: f64,
    pub euler_chi: i64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PmNetworkStats {
    /// m
    pub mean_pore_diameter: f64,
    /// m; NaN when the network has no throats.
    pub mean_throat_diameter: f64,
    pub pore_count: usize,
    pub throat_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmGrfConfig {
    pub size: usize,
    pub correlation_length: f64,
    pub threshold: f64,
    pub mode_count: usize,
    pub seed_spectrum: u64,
    pub voxel_size_um: f64,
}

impl From<PmGrfConfig> for GrfGeneratorConfig {
    fn from(c: PmGrfConfig) -> Self {
        Self {
            size: c.size,
            correlation_length: c.correlation_length,
            threshold: c.threshold,
            mode_count: c.mode_count,
            seed_spectrum: c.seed_spectrum,
            voxel_size_um: c.voxel_size_um,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PmConditionOutcome {
    pub achieved: f64,
    pub final_error: f64,
    pub outer_iterations: usize,
    pub simulator_calls: usize,
    /// 1 when the target was met within tolerance.
    pub converged: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(PmStatus, String);

impl Failure {
    fn new(status: PmStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

impl From<VolumeError> for Failure {
    fn from(e: VolumeError) -> Self {
        let status = match e {
            VolumeError::IoFailure { .. } => PmStatus::Io,
            VolumeError::Invalid(_) | VolumeError::SpecTooLarge { .. } => PmStatus::InvalidArgument,
            _ => PmStatus::Format,
        };
        Self::new(status, e)
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        let status = match e {
            NetworkError::EmptyPorePhase | NetworkError::NoPoresFound | NetworkError::EmptyNetwork => {
                PmStatus::EmptyPorePhase
            }
            NetworkError::NoPercolatingPath => PmStatus::NoPercolatingPath,
            NetworkError::SingularSystem | NetworkError::SolverDiverged { .. } => PmStatus::SolverFailed,
            _ => PmStatus::InvalidArgument,
        };
        Self::new(status, e)
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        let status = match e {
            GeneratorError::DimMismatch { .. } => PmStatus::DimMismatch,
            _ => PmStatus::InvalidArgument,
        };
        Self::new(status, e)
    }
}

impl From<ConditionerError> for Failure {
    fn from(e: ConditionerError) -> Self {
        match e {
            ConditionerError::Generator(g) => g.into(),
            ConditionerError::DimMismatch { .. } => Self::new(PmStatus::DimMismatch, e),
            _ => Self::new(PmStatus::InvalidArgument, e),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PmStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(PmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(PmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::new(PmStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::new(PmStatus::InvalidArgument, "path is not UTF-8"))
}

fn axis_arg(axis: u32) -> Result<FlowAxis, Failure> {
    match axis {
        0 => Ok(FlowAxis::X),
        1 => Ok(FlowAxis::Y),
        2 => Ok(FlowAxis::Z),
        _ => Err(Failure::new(PmStatus::InvalidArgument, format!("axis {axis} is not 0, 1 or 2"))),
    }
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn pm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a VVOL file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pm_volume_load(path: *const c_char, out: *mut *mut PmVolume) -> PmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let vol = load_volume(path_arg(path)?, None)?;
        *out = Box::into_raw(Box::new(PmVolume(vol)));
        Ok(())
    })
}

/// Builds a binary volume from `nx*ny*nz` bytes (x fastest; 0 solid, nonzero pore).
///
/// # Safety
/// `data` must point to `nx*ny*nz` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_volume_from_binary(
    data: *const u8,
    nx: usize,
    ny: usize,
    nz: usize,
    voxel_size_um: f64,
    out: *mut *mut PmVolume,
) -> PmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if data.is_null() {
            return Err(Failure::new(PmStatus::NullPointer, "data is null"));
        }
        let n = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Failure::new(PmStatus::InvalidArgument, "dimensions overflow"))?;
        let bytes = std::slice::from_raw_parts(data, n);
        let phase = bytes.iter().map(|&b| (b != 0) as u8).collect();
        let vol = VoxelVolume::binary([nx, ny, nz], voxel_size_um, phase)?;
        *out = Box::into_raw(Box::new(PmVolume(vol)));
        Ok(())
    })
}

/// # Safety
/// `vol` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pm_volume_save(vol: *const PmVolume, path: *const c_char) -> PmStatus {
    guard(|| {
        let vol = deref(vol, "volume")?;
        save_volume(&vol.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `vol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pm_volume_free(vol: *mut PmVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Writes `[nx, ny, nz]` to `out_dims`.
///
/// # Safety
/// `vol` must be live and `out_dims` must point to three writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn pm_volume_dims(vol: *const PmVolume, out_dims: *mut usize) -> PmStatus {
    guard(|| {
        let vol = deref(vol, "volume")?;
        if out_dims.is_null() {
            return Err(Failure::new(PmStatus::NullPointer, "out_dims is null"));
        }
        ptr::copy_nonoverlapping(vol.0.dims().as_ptr(), out_dims, 3);
        Ok(())
    })
}

/// # Safety
/// `vol` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_porosity(vol: *const PmVolume, out: *mut f64) -> PmStatus {
    guard(|| {
        let vol = deref(vol, "volume")?;
        let out = out_ref(out, "out")?;
        *out = porosity(&vol.0).map_err(|e| Failure::new(PmStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// # Safety
/// `vol` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_minkowski(vol: *const PmVolume, out: *mut PmMorphometry) -> PmStatus {
    guard(|| {
        let vol = deref(vol, "volume")?;
        let out = out_ref(out, "out")?;
        let r = minkowski_report(&vol.0).map_err(|e| Failure::new(PmStatus::InvalidArgument, e))?;
        *out = PmMorphometry {
            porosity: r.phi,
            specific_area: r.specific_area_per_m,
            euler_chi: r.euler_chi,
        };
        Ok(())
    })
}

/// Extracts a pore network with default parameters; `axis` is 0, 1 or 2.
///
/// # Safety
/// `vol` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_network_extract(vol: *const PmVolume, axis: u32, out: *mut *mut PmNetwork) -> PmStatus {
    guard(|| {
        let vol = deref(vol, "volume")?;
        let out = out_ref(out, "out")?;
        let params = ExtractionParams {
            axis: axis_arg(axis)?,
            ..ExtractionParams::default()
        };
        let net = extract_network(&vol.0, &params)?;
        *out = Box::into_raw(Box::new(PmNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pm_network_free(net: *mut PmNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_network_stats(net: *const PmNetwork, out: *mut PmNetworkStats) -> PmStatus {
    guard(|| {
        let net = deref(net, "network")?;
        let out = out_ref(out, "out")?;
        let s = network_stats(&net.0)?;
        *out = PmNetworkStats {
            mean_pore_diameter: s.mean_pore_diameter,
            mean_throat_diameter: s.mean_throat_diameter.unwrap_or(f64::NAN),
            pore_count: s.pore_count,
            throat_count: s.throat_count,
        };
        Ok(())
    })
}

/// Permeability in mD of `net` along the axis it was extracted for; the
/// sample size comes from `vol`.
///
/// # Safety
/// `net` and `vol` must be live and `out_k_md` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_permeability(
    net: *const PmNetwork,
    vol: *const PmVolume,
    viscosity: f64,
    delta_p: f64,
    out_k_md: *mut f64,
) -> PmStatus {
    guard(|| {
        let net = deref(net, "network")?;
        let vol = deref(vol, "volume")?;
        let out = out_ref(out_k_md, "out_k_md")?;
        let axis = net.0.axis;
        let flow = FlowConfig {
            axis,
            viscosity,
            delta_p,
        };
        *out = simulate_permeability(&net.0, &flow, Domain::from_volume(&vol.0, axis))?.k_md;
        Ok(())
    })
}

/// Default GRF generator settings.
#[no_mangle]
pub extern "C" fn pm_grf_config_default() -> PmGrfConfig {
    let c = GrfGeneratorConfig::default();
    PmGrfConfig {
        size: c.size,
        correlation_length: c.correlation_length,
        threshold: c.threshold,
        mode_count: c.mode_count,
        seed_spectrum: c.seed_spectrum,
        voxel_size_um: c.voxel_size_um,
    }
}

/// Generates a GRF volume from `dim` latent values.
///
/// # Safety
/// `config` must be readable, `z` must point to `dim` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_grf_generate(
    config: *const PmGrfConfig,
    z: *const f64,
    dim: usize,
    out: *mut *mut PmVolume,
) -> PmStatus {
    guard(|| {
        let config = *deref(config, "config")?;
        let out = out_ref(out, "out")?;
        if z.is_null() {
            return Err(Failure::new(PmStatus::NullPointer, "z is null"));
        }
        let z = LatentVector::new(std::slice::from_raw_parts(z, dim).to_vec())?;
        let vol = GrfGenerator::new(config.into())?.generate(&z)?;
        *out = Box::into_raw(Box::new(PmVolume(vol)));
        Ok(())
    })
}

/// Conditions a GRF generator on one property.
///
/// `kind`: 0 porosity, 1 permeability (mD), 2 mean pore size (m), 3 mean
/// throat size (m). A `tolerance` of 0 selects the default for the kind.
/// The final latent is written to `out_z` (length `mode_count`) and the
/// final volume to `out_volume` when that pointer is non-null.
///
/// # Safety
/// `config` and `out` must be valid; `out_z` must hold `mode_count` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_condition_grf(
    config: *const PmGrfConfig,
    kind: u32,
    value: f64,
    tolerance: f64,
    max_outer_iters: usize,
    seed: u64,
    out_z: *mut f64,
    out_volume: *mut *mut PmVolume,
    out: *mut PmConditionOutcome,
) -> PmStatus {
    guard(|| {
        let config = *deref(config, "config")?;
        let out = out_ref(out, "out")?;
        if out_z.is_null() {
            return Err(Failure::new(PmStatus::NullPointer, "out_z is null"));
        }
        let kind = *PropertyKind::ALL
            .get(kind as usize)
            .ok_or_else(|| Failure::new(PmStatus::InvalidArgument, format!("unknown property kind {kind}")))?;
        let tol = if tolerance == 0.0 { kind.default_tolerance() } else { tolerance };
        let target = PropertyTarget::with_tolerance(kind, value, tol)?;
        let cfg = ConditionerConfig {
            max_outer_iters,
            rng_seed: seed,
            ..ConditionerConfig::default()
        };
        let generator = GrfGenerator::new(config.into())?;
        let r = condition(&generator, &target, &cfg, None)?;
        ptr::copy_nonoverlapping(r.z_final.values().as_ptr(), out_z, r.z_final.dim());
        *out = PmConditionOutcome {
            achieved: r.achieved.unwrap_or(f64::NAN),
            final_error: r.final_error(),
            outer_iterations: r.outer_iterations,
            simulator_calls: r.total_simulator_calls,
            converged: r.converged as i32,
        };
        if !out_volume.is_null() {
            *out_volume = Box::into_raw(Box::new(PmVolume(r.volume)));
        }
        Ok(())
    })
}
