//! Model files: an 8-byte magic, a little-endian format version, then the
//! serialized artifact.

use std::fs;
use std::path::Path;

use crate::error::{Result, TabularError};
use crate::learn::ModelArtifact;

const MAGIC: &[u8; 8] = b"TPMODEL\0";
const VERSION: u32 = 1;

pub fn model_to_bytes(model: &ModelArtifact) -> Result<Vec<u8>> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    serde_json::to_writer(&mut out, model).map_err(|e| TabularError::Io(e.to_string()))?;
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelArtifact> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(TabularError::InvalidArgument("not a model file (bad magic header)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(TabularError::InvalidArgument(format!("unsupported model file version {version}")));
    }
    serde_json::from_slice(&bytes[12..]).map_err(|e| TabularError::InvalidArgument(format!("corrupt model file: {e}")))
}

pub fn save_model(model: &ModelArtifact, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| TabularError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, model_to_bytes(model)?).map_err(|e| TabularError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TabularError::FileNotFound(path.display().to_string()),
        _ => TabularError::Io(format!("{}: {e}", path.display())),
    })?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_foreign_bytes() {
        assert!(model_from_bytes(b"hello world, not a model").is_err());
        let mut bad = MAGIC.to_vec();
        bad.extend_from_slice(&9u32.to_le_bytes());
        assert!(model_from_bytes(&bad).unwrap_err().to_string().contains("version 9"));
    }
}
