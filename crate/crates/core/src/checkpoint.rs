//! Named-array container used for parameter checkpoints.
//!
//! A checkpoint is a JSON document:
//!
//! ```json
//! {
//!   "format": "betavqe-made",
//!   "version": 1,
//!   "header": { "n_sites": 9, "hidden": 500 },
//!   "arrays": [ { "name": "W1", "shape": [500, 9], "data": [ ... ] }, ... ]
//! }
//! ```
//!
//! `data` is row-major. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces parameters exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: &str, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        NamedArray { name: name.to_string(), shape, data }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayFile {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub header: BTreeMap<String, f64>,
    pub arrays: Vec<NamedArray>,
}

impl ArrayFile {
    pub fn new(format: &str, version: u32) -> Self {
        ArrayFile { format: format.to_string(), version, header: BTreeMap::new(), arrays: Vec::new() }
    }

    pub fn push(&mut self, array: NamedArray) {
        self.arrays.push(array);
    }

    pub fn expect_format(&self, format: &str, version: u32) -> Result<()> {
        if self.format != format {
            return Err(Error::Checkpoint(format!("expected format {format:?}, found {:?}", self.format)));
        }
        if self.version != version {
            return Err(Error::Checkpoint(format!(
                "{format} version {} is not supported (expected {version})",
                self.version
            )));
        }
        Ok(())
    }

    pub fn header_usize(&self, key: &str) -> Result<usize> {
        let v = *self.header.get(key).ok_or_else(|| Error::Checkpoint(format!("missing header field {key:?}")))?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::Checkpoint(format!("header field {key:?} is not a count: {v}")));
        }
        Ok(v as usize)
    }

    /// The array called `name`, checked against `shape`.
    pub fn array(&self, name: &str, shape: &[usize]) -> Result<&NamedArray> {
        let a = self
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name:?}")))?;
        if a.shape != shape || a.data.len() != shape.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!(
                "array {name:?} has shape {:?} with {} values, expected {shape:?}",
                a.shape,
                a.data.len()
            )));
        }
        Ok(a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

const THETA_FORMAT: &str = "betavqe-theta";
const THETA_VERSION: u32 = 1;

/// Checkpoint container for a circuit parameter vector.
pub fn theta_to_checkpoint(theta: &[f64]) -> ArrayFile {
    let mut file = ArrayFile::new(THETA_FORMAT, THETA_VERSION);
    file.header.insert("n_params".into(), theta.len() as f64);
    file.push(NamedArray::new("theta", vec![theta.len()], theta.to_vec()));
    file
}

pub fn theta_from_checkpoint(file: &ArrayFile) -> Result<Vec<f64>> {
    file.expect_format(THETA_FORMAT, THETA_VERSION)?;
    let n = file.header_usize("n_params")?;
    Ok(file.array("theta", &[n])?.data.clone())
}
