//! C ABI over the driftfield library: opaque handles, integer status codes,
//! and a thread-local last-error message. The matching header is generated
//! into `include/driftfield.h` when this crate builds.
//!
//! Conventions:
//! - Every fallible entry point returns [`DfStatus`] and writes results
//!   through out pointers, which are touched only on `DF_STATUS_OK`.
//! - Buffers are caller-allocated; lengths count elements, not bytes.
//! - [`df_last_error_message`] describes the calling thread's most recent
//!   failure; the pointer stays valid until that thread's next failing call.
//! - Enum parameters must hold a declared variant; passing anything else is
//!   undefined behavior, as usual for C enums.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use driftfield::cooccur::{CooccurrenceGraph, TermMatrix};
use driftfield::driftlog::{detect_events, drift_rate, DriftKind};
use driftfield::error::Error;
use driftfield::esom::{
    best_matching_units, find_bmu, pca_initialize, random_initialize, read_codebook, train,
    umatrix, write_codebook, BmuMap, Codebook, GridCoord, GridSpec, Neighborhood, Topology,
    TrainingSchedule,
};
use driftfield::mechanics::{
    force_field, potential_surface, softened_force, softened_potential, MassTable,
    PotentialSurface,
};
use driftfield::termgraph::pagerank;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    /// The call succeeded and all out parameters are filled in.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument failed validation; see `df_last_error_message`.
    InvalidArgument = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A file exists but does not parse as the expected format.
    Format = 4,
    /// An iterative solver exhausted its budget before converging.
    Convergence = 5,
    /// An internal invariant failed; state may be inconsistent.
    Panic = 6,
}

/// Grid wrap-around behavior.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfTopology {
    /// Both axes wrap; every node has eight neighbors.
    Toroid = 0,
    /// Hard edges; border nodes have fewer neighbors.
    Planar = 1,
}

/// Codebook seeding strategy for training.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfInit {
    /// Spread nodes over the data's top-2 principal plane.
    Pca = 0,
    /// Draw each node uniformly inside the data's bounding box.
    Random = 1,
}

/// One grid position: column, then row, both zero-based.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DfGridCoord {
    pub col: usize,
    pub row: usize,
}

/// Linear training schedule: radius interpolates `radius_start ->
/// radius_end` and learning rate `rate_start -> rate_end` across `epochs`
/// full passes. The neighborhood kernel is Gaussian, truncated at three
/// sigma. Constraints: `radius_start >= radius_end >= 1` and
/// `rate_start >= rate_end >= 0`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfSchedule {
    pub epochs: usize,
    pub radius_start: f64,
    pub radius_end: f64,
    pub rate_start: f64,
    pub rate_end: f64,
}

/// A trained self-organizing map: grid layout plus one weight vector per
/// node. Opaque; create with `df_codebook_train` or `df_codebook_load` and
/// release with `df_codebook_free`.
pub struct DfCodebook(Codebook);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: DfStatus, message: impl AsRef<str>) -> DfStatus {
    let clean = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).expect("nul bytes replaced above");
    });
    status
}

fn fail_with(e: &Error) -> DfStatus {
    let status = match e {
        Error::Io { .. } | Error::MissingArtifact(_) => DfStatus::Io,
        Error::Format(_) => DfStatus::Format,
        Error::Config(_) | Error::Input(_) | Error::Init(_) => DfStatus::InvalidArgument,
        Error::Convergence { .. } => DfStatus::Convergence,
    };
    fail(status, e.to_string())
}

/// Extern bodies never unwind across the boundary.
fn guarded(f: impl FnOnce() -> DfStatus) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(DfStatus::Panic, "internal panic"),
    }
}

/// Fixed-width names make lexicographic order match index order, which the
/// core's term lookup relies on.
fn indexed_names(n: usize) -> Vec<String> {
    let width = if n <= 1 { 1 } else { (n - 1).to_string().len() };
    (0..n).map(|i| format!("v{i:0width$}")).collect()
}

fn grid(width: usize, height: usize, topology: DfTopology) -> Result<GridSpec, DfStatus> {
    let t = match topology {
        DfTopology::Toroid => Topology::Toroid,
        DfTopology::Planar => Topology::Planar,
    };
    GridSpec::new(width, height, t).map_err(|e| fail_with(&e))
}

unsafe fn in_slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], DfStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(DfStatus::NullArgument, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, name: &str) -> Result<&'a mut [T], DfStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(fail(DfStatus::NullArgument, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, DfStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(DfStatus::NullArgument, format!("{name} is null")))
}

unsafe fn handle<'a>(cb: *const DfCodebook) -> Result<&'a Codebook, DfStatus> {
    match cb.as_ref() {
        Some(h) => Ok(&h.0),
        None => Err(fail(DfStatus::NullArgument, "codebook handle is null")),
    }
}

unsafe fn path_arg(ptr: *const c_char, name: &str) -> Result<String, DfStatus> {
    if ptr.is_null() {
        return Err(fail(DfStatus::NullArgument, format!("{name} is null")));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s.to_string()),
        Err(_) => Err(fail(DfStatus::InvalidArgument, format!("{name} is not valid UTF-8"))),
    }
}

fn matrix_from(data: &[f64], rows: usize, dim: usize) -> Result<TermMatrix, DfStatus> {
    let expect = rows
        .checked_mul(dim)
        .ok_or_else(|| fail(DfStatus::InvalidArgument, "rows * dim overflows"))?;
    if data.len() != expect {
        return Err(fail(
            DfStatus::InvalidArgument,
            format!("data holds {} values, expected rows * dim = {expect}", data.len()),
        ));
    }
    TermMatrix::new(indexed_names(rows), data.to_vec(), dim).map_err(|e| fail_with(&e))
}

fn bmu_map_from(coords: &[DfGridCoord], spec: &GridSpec, what: &str) -> Result<BmuMap, DfStatus> {
    let mapped: Vec<GridCoord> =
        coords.iter().map(|c| GridCoord::new(c.col, c.row)).collect();
    if let Some(bad) = mapped.iter().find(|c| !spec.contains(**c)) {
        return Err(fail(
            DfStatus::InvalidArgument,
            format!(
                "{what} contains ({}, {}), outside the {}x{} grid",
                bad.col, bad.row, spec.width, spec.height
            ),
        ));
    }
    Ok(BmuMap { terms: indexed_names(coords.len()), coords: mapped, quantization_error: 0.0 })
}

/// Library version as a static, nul-terminated string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the calling thread's most recent failure, or an empty string
/// when nothing failed yet. Valid until this thread's next failing call.
#[no_mangle]
pub extern "C" fn df_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Trains a fresh map on row-major `rows x dim` data and writes a handle to
/// `out`. The same arguments and seed always produce the same map,
/// regardless of thread count.
///
/// # Safety
/// `data` must point to `rows * dim` doubles; `schedule` and `out` must be
/// valid for reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_train(
    width: usize,
    height: usize,
    topology: DfTopology,
    data: *const f64,
    rows: usize,
    dim: usize,
    schedule: *const DfSchedule,
    init: DfInit,
    seed: u64,
    out: *mut *mut DfCodebook,
) -> DfStatus {
    guarded(|| {
        let out = match out_ref(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let schedule = match schedule.as_ref() {
            Some(s) => s,
            None => return fail(DfStatus::NullArgument, "schedule is null"),
        };
        let total = match rows.checked_mul(dim) {
            Some(t) => t,
            None => return fail(DfStatus::InvalidArgument, "rows * dim overflows"),
        };
        let data = match in_slice(data, total, "data") {
            Ok(d) => d,
            Err(s) => return s,
        };
        let spec = match grid(width, height, topology) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let matrix = match matrix_from(data, rows, dim) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let full = TrainingSchedule {
            epochs: schedule.epochs,
            radius_start: schedule.radius_start,
            radius_end: schedule.radius_end,
            rate_start: schedule.rate_start,
            rate_end: schedule.rate_end,
            neighborhood: Neighborhood::Gaussian,
            seed,
        };
        let seeded = match init {
            DfInit::Pca => pca_initialize(&matrix, &spec, seed),
            DfInit::Random => random_initialize(&matrix, &spec, seed),
        };
        let initial = match seeded {
            Ok(c) => c,
            Err(e) => return fail_with(&e),
        };
        match train(&initial, &matrix, &full) {
            Ok(trained) => {
                *out = Box::into_raw(Box::new(DfCodebook(trained)));
                DfStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a handle returned by this library. Null is a no-op.
///
/// # Safety
/// `cb` must be a pointer previously returned through a `DfCodebook**` out
/// parameter, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_free(cb: *mut DfCodebook) {
    if !cb.is_null() {
        drop(Box::from_raw(cb));
    }
}

/// Grid width in nodes; 0 if the handle is null.
///
/// # Safety
/// `cb` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_width(cb: *const DfCodebook) -> usize {
    cb.as_ref().map_or(0, |h| h.0.spec().width)
}

/// Grid height in nodes; 0 if the handle is null.
///
/// # Safety
/// `cb` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_height(cb: *const DfCodebook) -> usize {
    cb.as_ref().map_or(0, |h| h.0.spec().height)
}

/// Weight-vector dimensionality; 0 if the handle is null.
///
/// # Safety
/// `cb` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_dim(cb: *const DfCodebook) -> usize {
    cb.as_ref().map_or(0, |h| h.0.dim())
}

/// Copies every node weight into `out`, ordered node by node (row-major
/// grid order), `dim` values each. `len` must equal width * height * dim.
///
/// # Safety
/// `cb` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_weights(
    cb: *const DfCodebook,
    out: *mut f64,
    len: usize,
) -> DfStatus {
    guarded(|| {
        let codebook = match handle(cb) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let want = codebook.n_nodes() * codebook.dim();
        if len != want {
            return fail(DfStatus::InvalidArgument, format!("len is {len}, expected {want}"));
        }
        let out = match out_slice(out, len, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        out.copy_from_slice(codebook.weights());
        DfStatus::Ok
    })
}

/// Writes the codebook to `path` in the library's binary format.
///
/// # Safety
/// `cb` must be a live handle; `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_save(
    cb: *const DfCodebook,
    path: *const c_char,
) -> DfStatus {
    guarded(|| {
        let codebook = match handle(cb) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match File::create(&path) {
            Ok(f) => f,
            Err(e) => return fail(DfStatus::Io, format!("creating {path}: {e}")),
        };
        match write_codebook(codebook, BufWriter::new(file)) {
            Ok(()) => DfStatus::Ok,
            Err(e) => fail_with(&e),
        }
    })
}

/// Loads a codebook previously written by `df_codebook_save`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_load(
    path: *const c_char,
    out: *mut *mut DfCodebook,
) -> DfStatus {
    guarded(|| {
        let out = match out_ref(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return fail(DfStatus::Io, format!("opening {path}: {e}")),
        };
        match read_codebook(BufReader::new(file)) {
            Ok(codebook) => {
                *out = Box::into_raw(Box::new(DfCodebook(codebook)));
                DfStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Best-matching unit of one vector: the node with minimal Euclidean
/// distance, exact ties going to the smallest (row, col).
///
/// # Safety
/// `cb` must be a live handle; `vector` must point to `dim` doubles;
/// `out_col` and `out_row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_bmu(
    cb: *const DfCodebook,
    vector: *const f64,
    dim: usize,
    out_col: *mut usize,
    out_row: *mut usize,
) -> DfStatus {
    guarded(|| {
        let codebook = match handle(cb) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let vector = match in_slice(vector, dim, "vector") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let (out_col, out_row) = match (out_ref(out_col, "out_col"), out_ref(out_row, "out_row"))
        {
            (Ok(c), Ok(r)) => (c, r),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match find_bmu(codebook, vector) {
            Ok(coord) => {
                *out_col = coord.col;
                *out_row = coord.row;
                DfStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Mean distance from each node's weights to its grid neighbors, row-major.
/// `len` must equal width * height.
///
/// # Safety
/// `cb` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_umatrix(
    cb: *const DfCodebook,
    out: *mut f64,
    len: usize,
) -> DfStatus {
    guarded(|| {
        let codebook = match handle(cb) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let want = codebook.n_nodes();
        if len != want {
            return fail(DfStatus::InvalidArgument, format!("len is {len}, expected {want}"));
        }
        let out = match out_slice(out, len, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        out.copy_from_slice(&umatrix(codebook).heights);
        DfStatus::Ok
    })
}

/// Mean distance from each of the `rows` vectors to its best-matching node.
///
/// # Safety
/// `cb` must be a live handle; `data` must point to `rows * dim` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_codebook_quantization_error(
    cb: *const DfCodebook,
    data: *const f64,
    rows: usize,
    dim: usize,
    out: *mut f64,
) -> DfStatus {
    guarded(|| {
        let codebook = match handle(cb) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let total = match rows.checked_mul(dim) {
            Some(t) => t,
            None => return fail(DfStatus::InvalidArgument, "rows * dim overflows"),
        };
        let data = match in_slice(data, total, "data") {
            Ok(d) => d,
            Err(s) => return s,
        };
        let out = match out_ref(out, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let matrix = match matrix_from(data, rows, dim) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match best_matching_units(codebook, &matrix) {
            Ok(map) => {
                *out = map.quantization_error;
                DfStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// PageRank over a symmetric, non-negative `n x n` co-occurrence matrix
/// (row-major; the diagonal is ignored). Writes `n` scores summing to one.
///
/// # Safety
/// `weights` must point to `n * n` doubles; `out_scores` to `n`.
#[no_mangle]
pub unsafe extern "C" fn df_pagerank(
    weights: *const f64,
    n: usize,
    damping: f64,
    tolerance: f64,
    max_iter: usize,
    out_scores: *mut f64,
) -> DfStatus {
    guarded(|| {
        let total = match n.checked_mul(n) {
            Some(t) => t,
            None => return fail(DfStatus::InvalidArgument, "n * n overflows"),
        };
        let weights = match in_slice(weights, total, "weights") {
            Ok(w) => w,
            Err(s) => return s,
        };
        let out = match out_slice(out_scores, n, "out_scores") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let graph = match CooccurrenceGraph::new(indexed_names(n), weights.to_vec()) {
            Ok(g) => g,
            Err(e) => return fail_with(&e),
        };
        match pagerank(&graph, damping, tolerance, max_iter) {
            Ok(scores) => {
                out.copy_from_slice(&scores.scores);
                DfStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Split and merge counts between two aligned BMU assignments (`before[i]`
/// and `after[i]` locate the same item), plus the percentage of items
/// participating in either kind of event.
///
/// # Safety
/// `before` and `after` must each point to `n` coordinates; the three out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_drift_counts(
    before: *const DfGridCoord,
    after: *const DfGridCoord,
    n: usize,
    width: usize,
    height: usize,
    topology: DfTopology,
    out_splits: *mut usize,
    out_merges: *mut usize,
    out_rate_percent: *mut f64,
) -> DfStatus {
    guarded(|| {
        let before = match in_slice(before, n, "before") {
            Ok(b) => b,
            Err(s) => return s,
        };
        let after = match in_slice(after, n, "after") {
            Ok(a) => a,
            Err(s) => return s,
        };
        let spec = match grid(width, height, topology) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let (out_splits, out_merges, out_rate) = match (
            out_ref(out_splits, "out_splits"),
            out_ref(out_merges, "out_merges"),
            out_ref(out_rate_percent, "out_rate_percent"),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let map_before = match bmu_map_from(before, &spec, "before") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let map_after = match bmu_map_from(after, &spec, "after") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let terms = map_before.terms.clone();
        let events = match detect_events(&map_before, &map_after, &terms, &spec, (0, 1)) {
            Ok(e) => e,
            Err(e) => return fail_with(&e),
        };
        let rate = match drift_rate(&events, &terms) {
            Ok(r) => r,
            Err(e) => return fail_with(&e),
        };
        *out_splits = events.iter().filter(|e| e.kind == DriftKind::Split).count();
        *out_merges = events.iter().filter(|e| e.kind == DriftKind::Merge).count();
        *out_rate = rate;
        DfStatus::Ok
    })
}

/// Attractive potential at every grid node from point masses sitting at
/// `coords`: sum of -mass / (d + epsilon) with grid distance d normalized
/// by the grid diagonal. Writes width * height values, row-major; `len`
/// must match.
///
/// # Safety
/// `coords` and `masses` must each point to `n` elements; `out_values` to
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn df_potential_surface(
    coords: *const DfGridCoord,
    masses: *const f64,
    n: usize,
    width: usize,
    height: usize,
    topology: DfTopology,
    epsilon: f64,
    out_values: *mut f64,
    len: usize,
) -> DfStatus {
    guarded(|| {
        let coords = match in_slice(coords, n, "coords") {
            Ok(c) => c,
            Err(s) => return s,
        };
        let masses = match in_slice(masses, n, "masses") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let spec = match grid(width, height, topology) {
            Ok(s) => s,
            Err(s) => return s,
        };
        if len != spec.n_nodes() {
            return fail(
                DfStatus::InvalidArgument,
                format!("len is {len}, expected width * height = {}", spec.n_nodes()),
            );
        }
        let out = match out_slice(out_values, len, "out_values") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let bmus = match bmu_map_from(coords, &spec, "coords") {
            Ok(b) => b,
            Err(s) => return s,
        };
        let table = match MassTable::new(bmus.terms.clone(), masses.to_vec()) {
            Ok(t) => t,
            Err(e) => return fail_with(&e),
        };
        match potential_surface(&bmus, &table, &spec, epsilon, 0) {
            Ok(surface) => {
                out.copy_from_slice(&surface.values);
                DfStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Negative finite-difference gradient of a potential surface, as
/// interleaved (column, row) components per node: `out_vectors` holds
/// `2 * width * height` doubles and `len` must match. Central differences,
/// wrapping on toroids, one-sided at planar edges.
///
/// # Safety
/// `values` must point to `width * height` doubles; `out_vectors` to `len`.
#[no_mangle]
pub unsafe extern "C" fn df_force_field(
    values: *const f64,
    width: usize,
    height: usize,
    topology: DfTopology,
    out_vectors: *mut f64,
    len: usize,
) -> DfStatus {
    guarded(|| {
        let spec = match grid(width, height, topology) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let values = match in_slice(values, spec.n_nodes(), "values") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if values.iter().any(|v| !v.is_finite()) {
            return fail(DfStatus::InvalidArgument, "surface values must be finite");
        }
        if len != 2 * spec.n_nodes() {
            return fail(
                DfStatus::InvalidArgument,
                format!("len is {len}, expected 2 * width * height = {}", 2 * spec.n_nodes()),
            );
        }
        let out = match out_slice(out_vectors, len, "out_vectors") {
            Ok(o) => o,
            Err(s) => return s,
        };
        // Epsilon is carried for provenance only; the gradient ignores it.
        let surface =
            PotentialSurface { spec, values: values.to_vec(), epoch_index: 0, epsilon: 1.0 };
        let field = force_field(&surface);
        for (i, (dc, dr)) in field.vectors.iter().enumerate() {
            out[2 * i] = *dc;
            out[2 * i + 1] = *dr;
        }
        DfStatus::Ok
    })
}

/// Softened attraction m1 * m2 / (r + epsilon)^2.
#[no_mangle]
pub extern "C" fn df_softened_force(m1: f64, m2: f64, r: f64, epsilon: f64) -> f64 {
    softened_force(m1, m2, r, epsilon)
}

/// Softened potential -m1 * m2 / (r + epsilon).
#[no_mangle]
pub extern "C" fn df_softened_potential(m1: f64, m2: f64, r: f64, epsilon: f64) -> f64 {
    softened_potential(m1, m2, r, epsilon)
}
