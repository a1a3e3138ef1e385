use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunHistory;
use crate::autodiff::{ParamIndexEntry, ParamStore};
use crate::error::{Error, Result};
use crate::model::{AecModel, ModelConfig};

pub const PARAMS_FILE: &str = "params.bin";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.json";

/// Contents of `model.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub config: ModelConfig,
    pub params: Vec<ParamIndexEntry>,
    /// SHA-256 of `params.bin`.
    pub digest: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Writes `params.bin`, `model.json` and, when given, `history.json`.
pub fn save_checkpoint(
    dir: impl AsRef<Path>,
    model: &AecModel,
    history: Option<&RunHistory>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    model.params.save_bin(dir.join(PARAMS_FILE))?;
    let file = ModelFile {
        config: model.config.clone(),
        params: model.params.index(),
        digest: model.params.digest(),
    };
    write_json(&dir.join(MODEL_FILE), &file)?;
    if let Some(h) = history {
        write_json(&dir.join(HISTORY_FILE), h)?;
    }
    Ok(())
}

/// Rebuilds a model from a checkpoint directory, checking the digest and
/// the parameter layout against the stored fusion kind.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<AecModel> {
    let dir = dir.as_ref();
    let file: ModelFile = read_json(&dir.join(MODEL_FILE))?;
    let params = ParamStore::load_bin(dir.join(PARAMS_FILE), &file.params)?;
    if params.digest() != file.digest {
        return Err(Error::Config(format!(
            "{} does not match its digest",
            dir.join(PARAMS_FILE).display()
        )));
    }
    AecModel::from_parts(file.config, params)
}

pub fn load_history(dir: impl AsRef<Path>) -> Result<RunHistory> {
    read_json(&dir.as_ref().join(HISTORY_FILE))
}
