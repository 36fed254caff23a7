//! End-to-end flows: synthetic scene generation, toy training of free
//! per-pixel embeddings under the cosine discriminative loss, and the
//! inference chain NMS -> gather -> mean shift -> face groups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{self, LossBreakdown};
use crate::meanshift::{self, ClusterConfig};
use crate::nms::{self, NmsConfig};
use crate::tensor::{EmbeddingMap, Heatmap, Tensor};
use crate::types::{FaceGroup, FaceMask, LossConfig, SceneAnnotation};

/// Gaussian width of the synthetic heatmap peaks, in pixels.
pub const PEAK_SIGMA: f64 = 1.5;
/// Face pixels are disks of this radius around each landmark.
pub const DISK_RADIUS: isize = 2;
/// Minimum distance between landmarks of the same face.
const MIN_INTRA_SEP: f64 = 5.0;
/// Minimum distance between landmarks of different faces; keeps mask disks
/// and NMS windows from colliding.
const MIN_INTER_SEP: f64 = 12.0;
/// Landmarks sampled in a box of this half-size around the face center.
const FACE_RADIUS: usize = 8;

/// A generated scene: ground-truth heatmap, per-pixel face labels, and the
/// annotation they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub heatmap: Heatmap,
    pub face_mask: FaceMask,
    pub annotation: SceneAnnotation,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.1,
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

/// Embedding map after toy training, with the per-step loss trace.
#[derive(Debug, Clone)]
pub struct ToyTrainResult {
    pub map: EmbeddingMap,
    pub loss_trace: Vec<LossBreakdown>,
}

fn dist2(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    dx * dx + dy * dy
}

/// Rejection-samples `n_faces` faces of `k` landmarks each into an HxW image;
/// deterministic given the seed.
pub fn generate_scene(
    n_faces: usize,
    k: usize,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<SyntheticScene> {
    if n_faces > 0 && k == 0 {
        return Err(Error::InvalidArgument(
            "faces need at least one landmark".into(),
        ));
    }
    let margin = DISK_RADIUS as usize + 1;
    if n_faces > 0 && (height <= 2 * (FACE_RADIUS + margin) || width <= 2 * (FACE_RADIUS + margin))
    {
        return Err(Error::Placement {
            n_faces,
            height,
            width,
            attempts: 0,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let max_attempts = 1000 * n_faces.max(1);
    let mut attempts = 0usize;
    let mut faces: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n_faces);

    'faces: while faces.len() < n_faces {
        if attempts >= max_attempts {
            return Err(Error::Placement {
                n_faces,
                height,
                width,
                attempts,
            });
        }
        attempts += 1;
        let lo = FACE_RADIUS + margin;
        let cx = rng.gen_range(lo..width - lo);
        let cy = rng.gen_range(lo..height - lo);
        let mut landmarks: Vec<(usize, usize)> = Vec::with_capacity(k);
        for _ in 0..k {
            let mut placed = false;
            for _ in 0..100 {
                let x = rng.gen_range(cx - FACE_RADIUS..=cx + FACE_RADIUS);
                let y = rng.gen_range(cy - FACE_RADIUS..=cy + FACE_RADIUS);
                let ok_intra = landmarks
                    .iter()
                    .all(|&p| dist2(p, (x, y)) >= MIN_INTRA_SEP * MIN_INTRA_SEP);
                let ok_inter = faces
                    .iter()
                    .flatten()
                    .all(|&p| dist2(p, (x, y)) >= MIN_INTER_SEP * MIN_INTER_SEP);
                if ok_intra && ok_inter {
                    landmarks.push((x, y));
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'faces;
            }
        }
        faces.push(landmarks);
    }

    let annotation = SceneAnnotation {
        height,
        width,
        faces,
    };

    // Heatmap: max over per-landmark Gaussians, peak exactly 1 at the pixel.
    let mut values = vec![0.0f32; height * width];
    let cutoff = (PEAK_SIGMA * 5.0).ceil() as isize;
    let mut mask = FaceMask::background(height, width);
    for (face_id, face) in annotation.faces.iter().enumerate() {
        for &(lx, ly) in face {
            for dy in -cutoff..=cutoff {
                for dx in -cutoff..=cutoff {
                    let (x, y) = (lx as isize + dx, ly as isize + dy);
                    if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
                        continue;
                    }
                    let d2 = (dx * dx + dy * dy) as f64;
                    let g = (-d2 / (2.0 * PEAK_SIGMA * PEAK_SIGMA)).exp() as f32;
                    let cell = &mut values[y as usize * width + x as usize];
                    *cell = cell.max(g);
                    if dx * dx + dy * dy <= DISK_RADIUS * DISK_RADIUS {
                        mask.set(y as usize, x as usize, face_id);
                    }
                }
            }
        }
    }

    Ok(SyntheticScene {
        heatmap: Heatmap::new(Tensor::new(vec![height, width], values)?)?,
        face_mask: mask,
        annotation,
        seed,
    })
}

/// Gradient descent on free per-pixel embeddings of the face pixels; a
/// full convnet backbone is replaced by directly optimizable parameters so the
/// loss's clustering behavior can be exercised at desk scale. Background
/// pixels hold the zero vector.
pub fn train_toy_embeddings(scene: &SyntheticScene, cfg: &ToyTrainConfig) -> Result<ToyTrainResult> {
    train_mask_embeddings(&scene.face_mask, cfg)
}

/// Mask-only entry point; the heatmap plays no role in training.
pub fn train_mask_embeddings(mask: &FaceMask, cfg: &ToyTrainConfig) -> Result<ToyTrainResult> {
    cfg.loss.validate()?;
    let d = cfg.loss.embed_dim;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    // Face pixels in row-major order, labels contiguous by construction.
    let mut coords: Vec<(usize, usize)> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            if let Some(face) = mask.label(y, x) {
                coords.push((y, x));
                labels.push(face);
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyInput {
            context: "scene has no face pixels to train".into(),
        });
    }
    let mut points: Vec<Vec<f64>> = coords
        .iter()
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let e = loss::LabeledEmbeddings::new(points.clone(), labels.clone()).map_err(|err| {
            match err {
                Error::DegenerateCluster { cluster, .. } => Error::DegenerateCluster {
                    cluster,
                    context: format!("at training step {step}"),
                },
                other => other,
            }
        })?;
        trace.push(loss::fox_loss(&e, &cfg.loss)?);
        let grad = loss::fox_loss_grad(&e, &cfg.loss).map_err(|err| match err {
            Error::DegenerateCluster { cluster, .. } => Error::DegenerateCluster {
                cluster,
                context: format!("at training step {step}"),
            },
            other => other,
        })?;
        for (p, g) in points.iter_mut().zip(&grad) {
            for (v, gv) in p.iter_mut().zip(g) {
                *v -= cfg.learning_rate * gv;
            }
        }
    }

    let mut data = vec![0.0f32; d * mask.height * mask.width];
    for ((y, x), p) in coords.iter().zip(&points) {
        for (ch, &v) in p.iter().enumerate() {
            data[(ch * mask.height + y) * mask.width + x] = v as f32;
        }
    }
    Ok(ToyTrainResult {
        map: EmbeddingMap::new(Tensor::new(vec![d, mask.height, mask.width], data)?)?,
        loss_trace: trace,
    })
}

/// Fig.-3 style inference: NMS peaks, embedding gather, spherical mean
/// shift, one group per cluster. Landmarks sorted by descending score;
/// groups by cluster id.
pub fn parse_faces(
    h: &Heatmap,
    f: &EmbeddingMap,
    nms_cfg: &NmsConfig,
    cluster_cfg: &ClusterConfig,
) -> Result<Vec<FaceGroup>> {
    if h.height() != f.height() || h.width() != f.width() {
        return Err(Error::ShapeMismatch(format!(
            "heatmap {}x{} vs embedding map {}x{}",
            h.height(),
            h.width(),
            f.height(),
            f.width()
        )));
    }
    let cands = nms::extract_candidates(h, nms_cfg)?;
    if cands.is_empty() {
        return Ok(Vec::new());
    }
    let cands = nms::gather_embeddings(&cands, f)?;
    let points: Vec<Vec<f64>> = cands
        .iter()
        .map(|c| c.embedding.clone().expect("gathered"))
        .collect();
    let clusters = meanshift::mean_shift(&points, cluster_cfg)?;

    let n_groups = clusters.modes.len();
    let mut groups: Vec<FaceGroup> = (0..n_groups)
        .map(|id| FaceGroup {
            cluster_id: id,
            mode: clusters.modes[id].clone(),
            landmarks: Vec::new(),
        })
        .collect();
    for (cand, &label) in cands.iter().zip(&clusters.labels) {
        groups[label].landmarks.push(cand.clone());
    }
    for g in &mut groups {
        g.landmarks.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
        });
    }
    Ok(groups)
}
