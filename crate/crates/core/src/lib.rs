//! Self-contained training engine for physics-informed neural networks.
//!
//! The crate couples a nested automatic-differentiation engine (forward
//! Taylor jets for input derivatives, reverse mode for parameter gradients)
//! with the adaptive training machinery PINNs need in practice: causal
//! temporal weighting, gradient-norm/NTK loss balancing, Fourier features,
//! random weight factorization, modified MLPs, exact periodic boundary
//! embeddings, and curriculum drivers. Pseudo-spectral reference solvers and
//! NTK diagnostics are built in so benchmark results are reproducible without
//! external data.

pub mod autodiff;
pub mod diag;
pub mod error;
pub mod jet;
pub mod nets;
pub mod oracle;
pub mod problems;
pub mod tensor;
pub mod train;
pub mod weighting;

pub use error::{Error, Result};

/// Tune glibc malloc for the training loop's allocation pattern: tapes
/// allocate and free tens of megabytes per iteration, and the default trim
/// and mmap thresholds make the allocator return those pages to the kernel
/// each time, which costs more than the arithmetic. Process-global;
/// idempotent; no-op on non-glibc targets.
pub fn tune_allocator() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        #[cfg(target_os = "linux")]
        unsafe {
            libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
            libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
        }
    });
}
