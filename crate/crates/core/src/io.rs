//! On-disk JSON schemas: channels, states and dilations as UTF-8 JSON with
//! row-major matrices. Only the blocked coordinate convention is accepted;
//! numbers round-trip bit-exactly (shortest round-trippable decimals).

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::dilation::DilationSpec;
use crate::numerics::ToleranceConfig;
use crate::states::GaussianState;
use crate::symplectic::SymplecticForm;

/// Channel file: `{"d", "X", "Y", "w", "convention"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelFile {
    pub d: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub convention: String,
}

/// State file: `{"d", "mean", "cov"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateFile {
    pub d: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// Dilation file: `{"d_in", "d_env", "G", "u"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DilationFile {
    pub d_in: usize,
    pub d_env: usize,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(String),
    #[error("{0}")]
    Invalid(#[from] crate::error::Error),
}

fn check_matrix(name: &str, m: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, SchemaError> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(SchemaError::Shape(format!(
            "{name} must be {n}x{n} row-major"
        )));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SchemaError::Shape(format!(
            "{name} contains non-finite entries"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| m[i][j]))
}

fn check_vector(name: &str, v: &[f64], n: usize) -> Result<DVector<f64>, SchemaError> {
    if v.len() != n {
        return Err(SchemaError::Shape(format!("{name} must have length {n}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SchemaError::Shape(format!(
            "{name} contains non-finite entries"
        )));
    }
    Ok(DVector::from_column_slice(v))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ChannelFile {
    pub fn from_params(ch: &ChannelParams) -> Self {
        Self {
            d: ch.form().modes(),
            x: matrix_rows(ch.x()),
            y: matrix_rows(ch.y()),
            w: ch.w().iter().cloned().collect(),
            convention: "blocked".into(),
        }
    }

    pub fn to_params(&self, cfg: &ToleranceConfig) -> Result<ChannelParams, SchemaError> {
        if self.convention != "blocked" {
            return Err(SchemaError::Shape(format!(
                "unsupported convention {:?}; only \"blocked\" is accepted",
                self.convention
            )));
        }
        if self.d == 0 {
            return Err(SchemaError::Shape("d must be >= 1".into()));
        }
        let n = 2 * self.d;
        let x = check_matrix("X", &self.x, n)?;
        let y = check_matrix("Y", &self.y, n)?;
        let w = check_vector("w", &self.w, n)?;
        let form = SymplecticForm::single(self.d)?;
        Ok(ChannelParams::new(x, y, w, form, cfg)?)
    }
}

impl StateFile {
    pub fn from_state(st: &GaussianState) -> Self {
        Self {
            d: st.form().modes(),
            mean: st.mean().iter().cloned().collect(),
            cov: matrix_rows(st.cov()),
        }
    }

    pub fn to_state(&self, cfg: &ToleranceConfig) -> Result<GaussianState, SchemaError> {
        if self.d == 0 {
            return Err(SchemaError::Shape("d must be >= 1".into()));
        }
        let n = 2 * self.d;
        let mean = check_vector("mean", &self.mean, n)?;
        let cov = check_matrix("cov", &self.cov, n)?;
        let form = SymplecticForm::single(self.d)?;
        Ok(GaussianState::new(mean, cov, form, cfg)?)
    }
}

impl DilationFile {
    pub fn from_spec(dil: &DilationSpec) -> Self {
        Self {
            d_in: dil.d_in(),
            d_env: dil.d_env(),
            g: matrix_rows(dil.g()),
            u: dil.u().iter().cloned().collect(),
        }
    }

    /// Structural conversion only: deviation measurement must accept
    /// dilations that fail the symplectic certificate.
    pub fn to_spec(&self) -> Result<DilationSpec, SchemaError> {
        if self.d_in == 0 || self.d_env == 0 {
            return Err(SchemaError::Shape("d_in and d_env must be >= 1".into()));
        }
        let n = 2 * (self.d_in + self.d_env);
        let g = check_matrix("G", &self.g, n)?;
        let u = check_vector("u", &self.u, n)?;
        Ok(DilationSpec::from_parts_unchecked(
            g, u, self.d_in, self.d_env,
        )?)
    }
}

/// Serialize a schema value the way the CLI stores it on disk.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, SchemaError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T, SchemaError> {
    Ok(serde_json::from_str(s)?)
}

/// Store-load-store: the two serializations must agree byte for byte
/// (shortest round-trippable decimals are injective on bit patterns).
pub fn json_round_trip_bytes<T: Serialize + DeserializeOwned>(
    value: &T,
) -> Result<(String, String), SchemaError> {
    let first = to_json_string(value)?;
    let back: T = from_json_str(&first)?;
    let second = to_json_string(&back)?;
    Ok((first, second))
}
