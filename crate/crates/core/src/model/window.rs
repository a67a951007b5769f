use serde::{Deserialize, Serialize};

use super::ModelError;

pub const DEFAULT_WINDOW: usize = 15;

/// Stride-1 context window of odd width centred on the target epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub width: usize,
}

impl Default for ContextWindow {
    fn default() -> Self {
        ContextWindow {
            width: DEFAULT_WINDOW,
        }
    }
}

impl ContextWindow {
    pub fn new(width: usize) -> Result<Self, ModelError> {
        if width == 0 || width % 2 == 0 {
            return Err(ModelError::InvalidWindow(width));
        }
        Ok(ContextWindow { width })
    }

    pub fn half(&self) -> usize {
        (self.width - 1) / 2
    }

    /// Source epoch for slot `k` of the window centred on `i`. Positions
    /// past either end replicate the nearest real epoch.
    pub fn source(&self, i: usize, k: usize, n: usize) -> usize {
        (i + k).saturating_sub(self.half()).min(n - 1)
    }
}

/// Row-major window inputs, one row of `dim = n_features * width` per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Windows {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(ModelError::Shape("ragged rows".into()));
        }
        Ok(Windows {
            dim,
            data: rows.concat(),
        })
    }
}

pub fn build_windows<R: AsRef<[f64]>>(features: &[R], window: ContextWindow) -> Result<Windows, ModelError> {
    let n = features.len();
    if n == 0 {
        return Err(ModelError::Shape("no epochs".into()));
    }
    let d = features[0].as_ref().len();
    if features.iter().any(|f| f.as_ref().len() != d) {
        return Err(ModelError::Shape("feature rows differ in length".into()));
    }
    let mut data = Vec::with_capacity(n * d * window.width);
    for i in 0..n {
        for k in 0..window.width {
            data.extend_from_slice(features[window.source(i, k, n)].as_ref());
        }
    }
    Ok(Windows {
        dim: d * window.width,
        data,
    })
}
