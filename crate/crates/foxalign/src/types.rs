//! Shared domain types: landmark candidates, face groups, loss
//! configuration, and ground-truth scene annotations.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A heatmap peak: pixel location, confidence, and (once gathered) the
/// unit-norm embedding at that pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkCandidate {
    pub x: usize,
    pub y: usize,
    pub score: f32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub embedding: Option<Vec<f64>>,
}

/// One clustered face: a non-empty set of candidates plus the converged
/// mean-shift mode they were assigned to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceGroup {
    pub cluster_id: usize,
    pub mode: Vec<f64>,
    pub landmarks: Vec<LandmarkCandidate>,
}

/// All symbols of the cosine discriminative loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta_v: f64,
    pub delta_d: f64,
    /// Target hypersphere radius for the regularization term.
    pub radius: f64,
    pub embed_dim: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.001,
            delta_v: 1.0,
            delta_d: 1.0,
            radius: 1.0,
            embed_dim: 8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidArgument(
                "loss weights must be non-negative".into(),
            ));
        }
        if self.delta_v < 0.0 || self.delta_d < 0.0 {
            return Err(Error::InvalidArgument("margins must be non-negative".into()));
        }
        if self.radius <= 0.0 {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        if self.embed_dim < 2 {
            return Err(Error::InvalidArgument("embed_dim must be >= 2".into()));
        }
        Ok(())
    }
}

/// Per-pixel face labels: `None` is background, `Some(id)` a face pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMask {
    pub height: usize,
    pub width: usize,
    labels: Vec<Option<usize>>,
}

impl FaceMask {
    pub fn background(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            labels: vec![None; height * width],
        }
    }

    pub fn from_labels(height: usize, width: usize, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask labels length {} vs {height}x{width}",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn label(&self, y: usize, x: usize) -> Option<usize> {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, face: usize) {
        self.labels[y * self.width + x] = Some(face);
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Encodes the mask as an [H, W] tensor: face id as f32, background -1.
    pub fn to_tensor(&self) -> crate::tensor::Tensor {
        let data: Vec<f32> = self
            .labels
            .iter()
            .map(|l| l.map_or(-1.0, |id| id as f32))
            .collect();
        crate::tensor::Tensor::new(vec![self.height, self.width], data)
            .expect("mask tensor is always well-formed")
    }

    pub fn from_tensor(t: &crate::tensor::Tensor) -> Result<Self> {
        if t.dims().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "mask tensor expects [H, W], got {:?}",
                t.dims()
            )));
        }
        let labels = t
            .data()
            .iter()
            .map(|&v| if v < 0.0 { None } else { Some(v as usize) })
            .collect();
        Self::from_labels(t.dims()[0], t.dims()[1], labels)
    }
}

/// Ground-truth faces of one scene; every face has the same landmark count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub height: usize,
    pub width: usize,
    /// Per face, the (x, y) pixel coordinates of its landmarks.
    pub faces: Vec<Vec<(usize, usize)>>,
}

impl SceneAnnotation {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let k = self.faces.first().map(|f| f.len());
        for (i, face) in self.faces.iter().enumerate() {
            if Some(face.len()) != k {
                return Err(format!(
                    "face {i} has {} landmarks, expected {}",
                    face.len(),
                    k.unwrap()
                ));
            }
            for &(x, y) in face {
                if x >= self.width || y >= self.height {
                    return Err(format!(
                        "face {i} landmark ({x}, {y}) outside {}x{} image",
                        self.width, self.height
                    ));
                }
            }
        }
        Ok(())
    }

    /// Landmark count per face (0 when there are no faces).
    pub fn landmarks_per_face(&self) -> usize {
        self.faces.first().map_or(0, |f| f.len())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.validate().map_err(|reason| Error::InvalidAnnotation {
            path: path.to_path_buf(),
            reason,
        })?;
        let f = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::to_writer_pretty(BufWriter::new(f), self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let ann: SceneAnnotation =
            serde_json::from_reader(BufReader::new(f)).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
        ann.validate().map_err(|reason| Error::InvalidAnnotation {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(ann)
    }
}
