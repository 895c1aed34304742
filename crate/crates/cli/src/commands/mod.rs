pub mod eval;
pub mod fuse;
pub mod pose_bench;
pub mod recover;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt::{Debug, Display};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Frame ids in `dir` whose file names end with `suffix`, sorted.
pub fn list_frames(dir: &Path, suffix: &str) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(suffix) {
            if !id.is_empty() {
                out.insert(id.to_string(), entry.path());
            }
        }
    }
    Ok(out)
}

/// Error name (the variant) followed by its message.
pub fn describe<E: Debug + Display>(e: &E) -> (String, String) {
    let dbg = format!("{e:?}");
    let code = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
    (code, e.to_string())
}

pub fn data_err<E: Debug + Display>(e: E) -> CliError {
    let (code, msg) = describe(&e);
    CliError::data(format!("{code}: {msg}"))
}

pub fn ensure_distinct(inputs: &[&Path], output: &Path) -> Result<()> {
    if inputs.iter().any(|p| *p == output) {
        return Err(CliError::Usage(format!("output {} would overwrite an input", output.display())));
    }
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
