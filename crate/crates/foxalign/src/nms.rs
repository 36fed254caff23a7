//! Keypoint non-maximum suppression on heatmaps, and attaching unit-norm
//! embeddings to the surviving candidates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{EmbeddingMap, Heatmap};
use crate::types::LandmarkCandidate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    /// Score threshold in [0, 1].
    pub threshold: f32,
    /// Window half-size in pixels; 1 means a 3x3 window.
    pub radius: usize,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            radius: 1,
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "NMS threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.radius < 1 {
            return Err(Error::InvalidArgument("NMS radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// A pixel survives when its score clears the threshold, dominates every
/// in-bounds neighbor in the (2r+1)^2 window, and no earlier (row-major)
/// survivor of equal score sits in its window. Output is sorted by
/// descending score, ties row-major.
pub fn extract_candidates(h: &Heatmap, cfg: &NmsConfig) -> Result<Vec<LandmarkCandidate>> {
    cfg.validate()?;
    let (height, width) = (h.height(), h.width());
    let r = cfg.radius as isize;
    let mut kept: Vec<LandmarkCandidate> = Vec::new();

    for y in 0..height {
        for x in 0..width {
            let score = h.at(y, x);
            if score < cfg.threshold {
                continue;
            }
            let mut is_max = true;
            'window: for dy in -r..=r {
                for dx in -r..=r {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    if yy < 0 || yy >= height as isize || xx < 0 || xx >= width as isize {
                        continue;
                    }
                    if h.at(yy as usize, xx as usize) > score {
                        is_max = false;
                        break 'window;
                    }
                }
            }
            if !is_max {
                continue;
            }
            // Equal-score plateau: the earliest row-major pixel wins.
            let tied = kept.iter().any(|c| {
                c.score == score
                    && (c.y as isize - y as isize).abs() <= r
                    && (c.x as isize - x as isize).abs() <= r
            });
            if tied {
                continue;
            }
            kept.push(LandmarkCandidate {
                x,
                y,
                score,
                embedding: None,
            });
        }
    }

    kept.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
    });
    Ok(kept)
}

/// Attaches to each candidate the unit-normalized embedding column at its
/// pixel. A zero-norm column signals an untrained or degenerate feature map.
pub fn gather_embeddings(
    cands: &[LandmarkCandidate],
    f: &EmbeddingMap,
) -> Result<Vec<LandmarkCandidate>> {
    let mut out = Vec::with_capacity(cands.len());
    for c in cands {
        if c.y >= f.height() || c.x >= f.width() {
            return Err(Error::ShapeMismatch(format!(
                "candidate ({}, {}) outside {}x{} embedding map",
                c.x,
                c.y,
                f.width(),
                f.height()
            )));
        }
        let col: Vec<f64> = f.column(c.y, c.x).iter().map(|&v| f64::from(v)).collect();
        let n = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm {
                context: format!("embedding column at ({}, {})", c.x, c.y),
            });
        }
        out.push(LandmarkCandidate {
            embedding: Some(col.into_iter().map(|v| v / n).collect()),
            ..c.clone()
        });
    }
    Ok(out)
}
