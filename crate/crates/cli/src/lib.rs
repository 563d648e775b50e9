//! Experiment driver: dataset generation, network training, the HoG
//! baseline and the ROC comparison, all governed by one config file.

pub mod commands;
pub mod config;
pub mod record;

use anyhow::{Context, Result};

/// Sizes the global rayon pool from `PCW_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PCW_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("PCW_THREADS=`{v}` is not a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
