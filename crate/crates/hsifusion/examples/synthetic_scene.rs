//! Writes a smooth Gaussian-blob ground-truth cube and a Gaussian SRF table
//! for trying the toolkit without real data.
//!
//! ```text
//! cargo run --release -p hsifusion --example synthetic_scene -- runs/desk_scene
//! ```

use std::path::PathBuf;

use hsifusion::csv_io::save_srf_csv;
use hsifusion::save_cube;
use hsifusion_core::synthetic::{gaussian_blob_scene, gaussian_srf};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/desk_scene".into()));
    std::fs::create_dir_all(&dir)?;
    let scene = gaussian_blob_scene(16, 64, 64, 24, 1)?.with_name("scene");
    save_cube(&scene, &dir.join("scene"))?;
    save_srf_csv(&gaussian_srf(4, 16)?, &dir.join("srf.csv"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
