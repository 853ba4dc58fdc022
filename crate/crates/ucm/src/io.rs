//! On-disk artifacts. Everything is JSON except the diagnostics time
//! series, which is CSV (see `diagnostics`). Files carry a format version
//! so stale artifacts are rejected instead of misread.

use crate::initial_data::{InitialData, ProfileSpec};
use crate::model::Parameters;
use crate::scalar::Real;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: format version {found}, expected {expected}")]
    FormatVersion { path: String, found: u32, expected: u32 },
}

/// Initial data together with everything needed to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialDataFile<S> {
    pub format_version: u32,
    pub parameters: Parameters<S>,
    pub profile: ProfileSpec<S>,
    pub data: InitialData<S>,
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_initial_data<S: Real>(
    path: &Path,
    data: &InitialData<S>,
    params: &Parameters<S>,
    profile: &ProfileSpec<S>,
) -> Result<(), IoError> {
    save_json(
        path,
        &InitialDataFile {
            format_version: FORMAT_VERSION,
            parameters: *params,
            profile: *profile,
            data: data.clone(),
        },
    )
}

pub fn load_initial_data<S: Real>(path: &Path) -> Result<InitialDataFile<S>, IoError> {
    let file: InitialDataFile<S> = load_json(path)?;
    if file.format_version != FORMAT_VERSION {
        return Err(IoError::FormatVersion {
            path: path.display().to_string(),
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::initial_data::build_initial_state;

    #[test]
    fn initial_data_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ic.json");
        let params = Parameters::new(1.0, 1.4, 1.0, 1.0).unwrap();
        let profile = ProfileSpec {
            l: 2.0,
            r_support: 8.0,
            mollifier_width: 0.125,
            rho0_amplitude: 0.1,
            delta_a: 0.1,
        };
        let grid = RadialGrid::new(1024, 10.0 / 1024.0);
        let data = build_initial_state(&profile, &params, &grid).unwrap();
        save_initial_data(&path, &data, &params, &profile).unwrap();
        let back: InitialDataFile<f64> = load_initial_data(&path).unwrap();
        assert_eq!(back.data.u0, data.u0);
        assert_eq!(back.data.rho0, data.rho0);
        assert_eq!(back.data.w0, data.w0);
        assert_eq!(back.parameters, params);
    }

    #[test]
    fn wrong_format_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ic.json");
        std::fs::write(
            &path,
            r#"{"format_version": 99, "parameters": null, "profile": null, "data": null}"#,
        )
        .unwrap();
        assert!(load_initial_data::<f64>(&path).is_err());
    }
}
