//! Filesystem and command-line layer over `hsifusion-core`: the cube file
//! format, PSF/SRF tables, experiment configs, checkpoints, training
//! histories, metrics reports and the `hsifusion` commands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod cube_io;
pub mod error;
pub mod history;
pub mod manifest;
pub mod report;

pub use config::{parse_config, ExperimentConfig, RunMode};
pub use cube_io::{export_band_image, load_cube, save_cube};
pub use csv_io::{load_psf_csv, load_srf_csv};
pub use error::{Error, Result};

/// Keeps freed heap memory inside the process (glibc only). Training frees
/// and reallocates the same multi-megabyte buffers every iteration; with the
/// default thresholds they are unmapped and faulted back in each time.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator tuning parameters.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}
