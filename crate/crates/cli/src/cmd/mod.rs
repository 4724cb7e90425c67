pub mod augment;
pub mod ensemble;
pub mod evaluate;
pub mod gazetteer;
pub mod kfold;
pub mod matching;
pub mod predict;
pub mod synth;
pub mod train;

use std::path::Path;

use anyhow::Result;
use scdag_core::scdag::TrainConfig;

use crate::io::{read_text, usage};

/// Load a JSON or TOML config file into a [`TrainConfig`].
pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = read_text(path)?;
    let value: serde_json::Value = if path.extension().is_some_and(|e| e == "toml") {
        let t: toml::Value = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t)?
    } else {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    Ok(TrainConfig::from_json(value)?)
}

pub fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}
