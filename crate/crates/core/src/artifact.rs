//! Versioned artifact files.
//!
//! JSON artifacts carry a top-level `format_version` field. CSV artifacts
//! start with a comment header of the form
//! `# geosom format_version=1.0 key=value ...`. Loaders reject any artifact
//! whose major version differs from [`FORMAT_VERSION`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::ErrorClass;

pub const FORMAT_VERSION: &str = "1.0";

const CSV_MAGIC: &str = "# geosom";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: missing format_version header")]
    MissingVersion { path: PathBuf },
    #[error("{path}: format version {found} is incompatible with {expected}")]
    VersionMismatch {
        path: PathBuf,
        found: String,
        expected: &'static str,
    },
}

impl ArtifactError {
    pub fn class(&self) -> ErrorClass {
        ErrorClass::Data
    }
}

fn major(version: &str) -> &str {
    version.split('.').next().unwrap_or(version)
}

/// Accepts any version sharing the major component of [`FORMAT_VERSION`].
pub fn check_version(path: &Path, found: &str) -> Result<(), ArtifactError> {
    if major(found) == major(FORMAT_VERSION) && !found.is_empty() {
        Ok(())
    } else {
        Err(ArtifactError::VersionMismatch {
            path: path.to_path_buf(),
            found: found.to_string(),
            expected: FORMAT_VERSION,
        })
    }
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_to_string(path: &Path) -> Result<String, ArtifactError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Header line for a CSV artifact with extra `key=value` attributes.
pub fn csv_header(attrs: &[(&str, &str)]) -> String {
    let mut line = format!("{CSV_MAGIC} format_version={FORMAT_VERSION}");
    for (k, v) in attrs {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
    line.push('\n');
    line
}

/// Splits a CSV artifact into its header attributes and the CSV body.
pub fn split_csv_artifact<'a>(
    path: &Path,
    text: &'a str,
) -> Result<(BTreeMap<String, String>, &'a str), ArtifactError> {
    let missing = || ArtifactError::MissingVersion {
        path: path.to_path_buf(),
    };
    let (first, body) = text.split_once('\n').ok_or_else(missing)?;
    let rest = first.trim_end().strip_prefix(CSV_MAGIC).ok_or_else(missing)?;
    let attrs: BTreeMap<String, String> = rest
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let version = attrs.get("format_version").ok_or_else(missing)?;
    check_version(path, version)?;
    Ok((attrs, body))
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    format_version: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty-printed JSON with a leading `format_version` field.
pub fn to_versioned_json<T: Serialize>(value: &T) -> String {
    let wrapped = Versioned {
        format_version: FORMAT_VERSION,
        body: value,
    };
    let mut s = serde_json::to_string_pretty(&wrapped).expect("artifact serialization");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    write_bytes(path, to_versioned_json(value).as_bytes())
}

pub fn from_versioned_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, ArtifactError> {
    let json_err = |source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ArtifactError::MissingVersion {
            path: path.to_path_buf(),
        })?;
    check_version(path, version)?;
    serde_json::from_value(value).map_err(json_err)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = read_to_string(path)?;
    from_versioned_json(path, &text)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, ArtifactError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}
