//! Line-delimited JSON reading and writing with line-numbered errors.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses one value per non-blank line. Errors carry the 1-based line number
/// and the field path inside the offending line.
pub fn parse<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(line);
        let value = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse {
                source_name: source_name.to_string(),
                line: i + 1,
                field: (path != ".").then_some(path),
                message: e.into_inner().to_string(),
            }
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

/// One compact JSON document per line, each terminated by `\n`.
pub fn to_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    std::fs::write(path, to_string(items))?;
    Ok(())
}
