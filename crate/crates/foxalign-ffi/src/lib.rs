//! C ABI for the foxalign toolkit: opaque tensor handles, status codes, and
//! JSON string results for structured output.
//!
//! Every function returns a `FoxStatus`; on failure a thread-local message
//! is retrievable via `fox_last_error`. Strings returned through out
//! parameters are owned by the library and must be released with
//! `fox_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use foxalign::meanshift::ClusterConfig;
use foxalign::nms::NmsConfig;
use foxalign::pipeline;
use foxalign::tensor::{EmbeddingMap, Heatmap, Tensor};
use foxalign::types::LossConfig;
use foxalign::Error;

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoxStatus {
    Ok = 0,
    InvalidArgument = 1,
    IoError = 2,
    FormatError = 3,
    NumericError = 4,
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(msg).ok();
    });
}

fn status_of(err: &Error) -> FoxStatus {
    match err {
        Error::Io { .. } => FoxStatus::IoError,
        Error::BadMagic { .. } | Error::Truncated { .. } | Error::Json { .. } => {
            FoxStatus::FormatError
        }
        Error::InvalidArgument(_) | Error::InvalidAnnotation { .. } | Error::Placement { .. } => {
            FoxStatus::InvalidArgument
        }
        Error::NonFinite { .. }
        | Error::ZeroNorm { .. }
        | Error::DegenerateCluster { .. }
        | Error::EmptyInput { .. }
        | Error::ShapeMismatch(_) => FoxStatus::NumericError,
    }
}

fn fail(err: Error) -> FoxStatus {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

/// Opaque tensor handle.
pub struct FoxTensor {
    inner: Tensor,
}

/// Message describing the most recent failure on this thread, or NULL.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fox_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null(), |msg| msg.as_ptr())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fox_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, FoxStatus> {
    if path.is_null() {
        set_error("path is NULL".into());
        return Err(FoxStatus::InvalidArgument);
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            Err(FoxStatus::InvalidArgument)
        }
    }
}

/// Reads an FXT1 tensor file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer; the
/// returned handle must be released with `fox_tensor_free`.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_read(
    path: *const c_char,
    out: *mut *mut FoxTensor,
) -> FoxStatus {
    if out.is_null() {
        set_error("out pointer is NULL".into());
        return FoxStatus::InvalidArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match Tensor::read_file(&path) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(FoxTensor { inner: t }));
            FoxStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Writes a tensor handle to an FXT1 file.
///
/// # Safety
/// `tensor` must be a live handle from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_write(
    tensor: *const FoxTensor,
    path: *const c_char,
) -> FoxStatus {
    if tensor.is_null() {
        set_error("tensor handle is NULL".into());
        return FoxStatus::InvalidArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match (*tensor).inner.write_file(&path) {
        Ok(()) => FoxStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Builds a tensor from caller-provided dims and data (copied).
///
/// # Safety
/// `dims` must point to `ndim` values and `data` to their product.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_create(
    dims: *const usize,
    ndim: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut FoxTensor,
) -> FoxStatus {
    if dims.is_null() || data.is_null() || out.is_null() {
        set_error("NULL pointer argument".into());
        return FoxStatus::InvalidArgument;
    }
    let dims = std::slice::from_raw_parts(dims, ndim).to_vec();
    let data = std::slice::from_raw_parts(data, len).to_vec();
    match Tensor::new(dims, data) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(FoxTensor { inner: t }));
            FoxStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of dimensions of a tensor handle.
///
/// # Safety
/// `tensor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_ndim(tensor: *const FoxTensor) -> usize {
    if tensor.is_null() {
        return 0;
    }
    (*tensor).inner.dims().len()
}

/// Size of dimension `axis`, or 0 when out of range.
///
/// # Safety
/// `tensor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_dim(tensor: *const FoxTensor, axis: usize) -> usize {
    if tensor.is_null() {
        return 0;
    }
    (*tensor).inner.dims().get(axis).copied().unwrap_or(0)
}

/// Borrowed pointer to the row-major f32 data; valid while the handle lives.
///
/// # Safety
/// `tensor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_data(tensor: *const FoxTensor) -> *const f32 {
    if tensor.is_null() {
        return ptr::null();
    }
    (*tensor).inner.data().as_ptr()
}

/// Releases a tensor handle. NULL is a no-op.
///
/// # Safety
/// `tensor` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn fox_tensor_free(tensor: *mut FoxTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Releases a string returned through an out parameter. NULL is a no-op.
///
/// # Safety
/// `s` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn fox_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn json_out(value: &impl serde::Serialize, out: *mut *mut c_char) -> FoxStatus {
    let text = match serde_json::to_string(value) {
        Ok(t) => t,
        Err(e) => {
            set_error(format!("serialization failed: {e}"));
            return FoxStatus::InternalError;
        }
    };
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            FoxStatus::Ok
        }
        Err(_) => {
            set_error("result contained an interior NUL".into());
            FoxStatus::InternalError
        }
    }
}

/// Runs NMS + embedding gather + spherical mean shift on a heatmap tensor
/// ([H, W], values in [0, 1]) and an embedding tensor ([D, H, W]); writes
/// the resulting face groups as a JSON string.
///
/// # Safety
/// `heatmap` and `embeddings` must be live handles; `out_json` valid. Free
/// the string with `fox_string_free`.
#[no_mangle]
pub unsafe extern "C" fn fox_parse_faces(
    heatmap: *const FoxTensor,
    embeddings: *const FoxTensor,
    threshold: f32,
    nms_radius: usize,
    bandwidth: f64,
    out_json: *mut *mut c_char,
) -> FoxStatus {
    if heatmap.is_null() || embeddings.is_null() || out_json.is_null() {
        set_error("NULL pointer argument".into());
        return FoxStatus::InvalidArgument;
    }
    let h = match Heatmap::new((*heatmap).inner.clone()) {
        Ok(h) => h,
        Err(e) => return fail(e),
    };
    let f = match EmbeddingMap::new((*embeddings).inner.clone()) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let nms_cfg = NmsConfig {
        threshold,
        radius: nms_radius,
    };
    let cluster_cfg = ClusterConfig {
        bandwidth,
        merge_tolerance: bandwidth / 2.0,
        ..ClusterConfig::default()
    };
    match pipeline::parse_faces(&h, &f, &nms_cfg, &cluster_cfg) {
        Ok(groups) => json_out(&groups, out_json),
        Err(e) => fail(e),
    }
}

/// Weighted cosine discriminative loss of labeled embedding points.
/// `points` is row-major [n, dim]; `labels` holds n cluster ids. The four
/// loss terms are written to `out_terms` (l_var, l_dist, l_reg, l_fox).
///
/// # Safety
/// `points` must point to n*dim values, `labels` to n values, and
/// `out_terms` to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fox_loss_eval(
    points: *const f64,
    n: usize,
    dim: usize,
    labels: *const usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta_v: f64,
    delta_d: f64,
    radius: f64,
    out_terms: *mut f64,
) -> FoxStatus {
    if points.is_null() || labels.is_null() || out_terms.is_null() {
        set_error("NULL pointer argument".into());
        return FoxStatus::InvalidArgument;
    }
    if dim < 2 {
        set_error("dim must be >= 2".into());
        return FoxStatus::InvalidArgument;
    }
    let flat = std::slice::from_raw_parts(points, n * dim);
    let labels = std::slice::from_raw_parts(labels, n).to_vec();
    let pts: Vec<Vec<f64>> = flat.chunks_exact(dim).map(<[f64]>::to_vec).collect();
    let cfg = LossConfig {
        alpha,
        beta,
        gamma,
        delta_v,
        delta_d,
        radius,
        embed_dim: dim,
    };
    if let Err(e) = cfg.validate() {
        return fail(e);
    }
    let e = match foxalign::loss::LabeledEmbeddings::new(pts, labels) {
        Ok(e) => e,
        Err(e) => return fail(e),
    };
    match foxalign::loss::fox_loss(&e, &cfg) {
        Ok(b) => {
            let out = std::slice::from_raw_parts_mut(out_terms, 4);
            out[0] = b.l_var;
            out[1] = b.l_dist;
            out[2] = b.l_reg;
            out[3] = b.l_fox;
            FoxStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Generates a synthetic scene and writes heatmap.fxt1, mask.fxt1 and
/// annotation.json into `out_dir`.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fox_generate_scene(
    n_faces: usize,
    landmarks_per_face: usize,
    height: usize,
    width: usize,
    seed: u64,
    out_dir: *const c_char,
) -> FoxStatus {
    let dir = match path_arg(out_dir) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let scene = match pipeline::generate_scene(n_faces, landmarks_per_face, height, width, seed) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if let Err(e) = std::fs::create_dir_all(&dir) {
        set_error(format!("cannot create {}: {e}", dir.display()));
        return FoxStatus::IoError;
    }
    let result = scene
        .heatmap
        .values()
        .write_file(dir.join("heatmap.fxt1"))
        .and_then(|()| scene.face_mask.to_tensor().write_file(dir.join("mask.fxt1")))
        .and_then(|()| scene.annotation.write_file(dir.join("annotation.json")));
    match result {
        Ok(()) => FoxStatus::Ok,
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    #[test]
    fn tensor_roundtrip_through_ffi() {
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.fxt1").to_str().unwrap()).unwrap();

        let dims = [2usize, 2];
        let data = [1.0f32, 2.0, 3.0, 4.0];
        let mut handle: *mut FoxTensor = ptr::null_mut();
        unsafe {
            assert_eq!(
                fox_tensor_create(dims.as_ptr(), 2, data.as_ptr(), 4, &mut handle),
                FoxStatus::Ok
            );
            assert_eq!(fox_tensor_write(handle, path.as_ptr()), FoxStatus::Ok);

            let mut back: *mut FoxTensor = ptr::null_mut();
            assert_eq!(fox_tensor_read(path.as_ptr(), &mut back), FoxStatus::Ok);
            assert_eq!(fox_tensor_ndim(back), 2);
            assert_eq!(fox_tensor_dim(back, 0), 2);
            assert_eq!(fox_tensor_dim(back, 7), 0);
            let slice = std::slice::from_raw_parts(fox_tensor_data(back), 4);
            assert_eq!(slice, &data);
            fox_tensor_free(handle);
            fox_tensor_free(back);
        }
    }

    #[test]
    fn read_missing_file_sets_error() {
        let path = CString::new("/nonexistent/nope.fxt1").unwrap();
        let mut handle: *mut FoxTensor = ptr::null_mut();
        unsafe {
            assert_eq!(fox_tensor_read(path.as_ptr(), &mut handle), FoxStatus::IoError);
            let msg = fox_last_error();
            assert!(!msg.is_null());
            assert!(CStr::from_ptr(msg).to_str().unwrap().contains("nope.fxt1"));
        }
    }

    #[test]
    fn loss_eval_matches_library() {
        // Two antipodal tight clusters: zero loss.
        let points = [1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0];
        let labels = [0usize, 0, 1, 1];
        let mut terms = [f64::NAN; 4];
        unsafe {
            assert_eq!(
                fox_loss_eval(
                    points.as_ptr(),
                    4,
                    2,
                    labels.as_ptr(),
                    1.0,
                    1.0,
                    0.001,
                    1.0,
                    1.0,
                    1.0,
                    terms.as_mut_ptr(),
                ),
                FoxStatus::Ok
            );
        }
        assert!(terms[3] < 1e-10);
    }

    #[test]
    fn parse_faces_over_ffi() {
        // Scene -> toy training in Rust, parse via the C surface.
        let scene = pipeline::generate_scene(2, 5, 64, 64, 3).unwrap();
        // Rate and margin that actually collapse each face's pixels; the
        // defaults leave the embedding clusters too diffuse to group.
        let train = foxalign::pipeline::ToyTrainConfig {
            learning_rate: 5.0,
            loss: foxalign::types::LossConfig {
                delta_v: 0.05,
                ..foxalign::types::LossConfig::default()
            },
            ..foxalign::pipeline::ToyTrainConfig::default()
        };
        let trained = pipeline::train_toy_embeddings(&scene, &train).unwrap();
        let h = FoxTensor {
            inner: scene.heatmap.values().clone(),
        };
        let f = FoxTensor {
            inner: trained.map.values().clone(),
        };
        let mut out: *mut c_char = ptr::null_mut();
        unsafe {
            assert_eq!(
                fox_parse_faces(&h, &f, 0.5, 1, 0.5, &mut out),
                FoxStatus::Ok
            );
            let json = CStr::from_ptr(out).to_str().unwrap();
            let groups: Vec<foxalign::types::FaceGroup> = serde_json::from_str(json).unwrap();
            assert_eq!(groups.len(), 2);
            fox_string_free(out);
        }
    }

    #[test]
    fn version_is_nul_terminated_static() {
        unsafe {
            let v = CStr::from_ptr(fox_version());
            assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
        }
    }
}
