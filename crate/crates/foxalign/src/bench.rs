//! Runtime-scaling harness: times the forward pass, NMS, and clustering
//! stages as the face count grows, and fits total time against face count.
//!
//! Absolute milliseconds are hardware-bound; only the scaling shape is
//! meaningful. Published reference figures are carried along for context,
//! never asserted.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foxblock::{network_forward, FoxBlockWeights, HeadWeights};
use crate::meanshift::ClusterConfig;
use crate::nms::{self, NmsConfig};
use crate::pipeline::{self, ToyTrainConfig};
use crate::tensor::Tensor;
use crate::types::LossConfig;

/// Reference figures from the original GPU evaluation (GTX-1080ti, full
/// network at 640x640): printed for context next to measured numbers.
pub const REFERENCE_SLOPE_MS_PER_FACE: f64 = 2.06;
pub const REFERENCE_PARSE_MS_9_FACES: f64 = 5.54;
pub const REFERENCE_SINGLE_FACE_MS: f64 = 51.50;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub face_counts: Vec<usize>,
    pub repeats: usize,
    pub height: usize,
    pub width: usize,
    pub landmarks_per_face: usize,
    pub seed: u64,
    pub train: ToyTrainConfig,
    pub nms: NmsConfig,
    pub cluster: ClusterConfig,
    /// Channel count of the synthetic forward workload.
    pub forward_channels: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            face_counts: vec![1, 2, 4, 8, 16],
            repeats: 9,
            height: 256,
            width: 256,
            landmarks_per_face: 5,
            seed: 0,
            // Rate, margin, and step count chosen so training actually
            // separates the faces and drains the slow-escaping stragglers
            // near the antipodal saddle; the cluster stage then measures
            // grouping of tight clusters, the regime the pipeline targets.
            train: ToyTrainConfig {
                steps: 3000,
                learning_rate: 5.0,
                loss: LossConfig {
                    delta_v: 0.005,
                    ..LossConfig::default()
                },
                ..ToyTrainConfig::default()
            },
            nms: NmsConfig::default(),
            cluster: ClusterConfig::with_bandwidth(0.4),
            forward_channels: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_faces: usize,
    pub forward_ms: f64,
    pub nms_ms: f64,
    pub cluster_ms: f64,
    pub total_ms: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of total_ms over n_faces; None with one point.
    pub slope_ms_per_face: Option<f64>,
    pub intercept_ms: f64,
    pub reference_slope_ms_per_face: f64,
    pub reference_parse_ms_9_faces: f64,
    pub reference_single_face_ms: f64,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn time_ms(f: impl FnOnce()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e3
}

/// Per-call time averaged over a batch; the microsecond-scale stages need
/// this to keep clock granularity out of the medians.
fn time_ms_over(iters: usize, mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    for _ in 0..iters {
        f();
    }
    start.elapsed().as_secs_f64() * 1e3 / iters as f64
}

/// Ordinary least squares y = a + b x.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return (mean_y, None);
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    (mean_y - slope * mean_x, Some(slope))
}

/// Generates one scene per face count, toy-trains it once, then times each
/// inference stage over `repeats` runs (one warm-up discarded, medians
/// reported) on a monotonic clock.
pub fn run_scaling(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repeats < 3 {
        return Err(Error::InvalidArgument(format!(
            "repeats must be >= 3, got {}",
            cfg.repeats
        )));
    }
    if cfg.face_counts.is_empty() {
        return Err(Error::EmptyInput {
            context: "no face counts to benchmark".into(),
        });
    }

    // Fixed-size forward workload shared by every row: cost must not depend
    // on the face count.
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let c = cfg.forward_channels;
    let input = Tensor::new(
        vec![c, cfg.height, cfg.width],
        (0..c * cfg.height * cfg.width)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )?;
    let block = FoxBlockWeights::new(
        c,
        (0..c * 4 * c).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    )?;
    let heads = HeadWeights {
        seg_weights: (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        seg_bias: 0.0,
        feat_weights: (0..cfg.train.loss.embed_dim * c)
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect(),
        feat_bias: vec![0.0; cfg.train.loss.embed_dim],
        channels: c,
        embed_dim: cfg.train.loss.embed_dim,
    };

    // Global warm-up so the first row does not pay for cold caches.
    for _ in 0..2 {
        let _ = network_forward(&input, std::slice::from_ref(&block), &heads)?;
    }

    // Generate and train every row before any timing, so the training
    // workload cannot perturb the measurements of the row after it.
    let mut prepared = Vec::with_capacity(cfg.face_counts.len());
    for &n_faces in &cfg.face_counts {
        let scene = pipeline::generate_scene(
            n_faces,
            cfg.landmarks_per_face,
            cfg.height,
            cfg.width,
            cfg.seed.wrapping_add(n_faces as u64),
        )?;
        let trained = if n_faces > 0 {
            // Per-point gradients shrink as 1/n_faces through the loss
            // normalizers; scale the step so embedding tightness, and with
            // it the cluster stage's input, is comparable across counts.
            let train = ToyTrainConfig {
                learning_rate: cfg.train.learning_rate * n_faces as f64,
                ..cfg.train.clone()
            };
            Some(pipeline::train_toy_embeddings(&scene, &train)?)
        } else {
            None
        };
        prepared.push((n_faces, scene, trained));
    }

    let mut rows = Vec::with_capacity(cfg.face_counts.len());
    for (n_faces, scene, trained) in &prepared {
        let n_faces = *n_faces;
        let mut forward = Vec::with_capacity(cfg.repeats);
        let mut nms_t = Vec::with_capacity(cfg.repeats);
        let mut cluster = Vec::with_capacity(cfg.repeats);
        for rep in 0..=cfg.repeats {
            let f = time_ms(|| {
                let _ = network_forward(&input, std::slice::from_ref(&block), &heads).unwrap();
            });
            let cands = nms::extract_candidates(&scene.heatmap, &cfg.nms)?;
            let n = time_ms_over(20, || {
                let _ = nms::extract_candidates(&scene.heatmap, &cfg.nms).unwrap();
            });
            let cl = match trained {
                Some(t) if !cands.is_empty() => time_ms_over(20, || {
                    let gathered = nms::gather_embeddings(&cands, &t.map).unwrap();
                    let points: Vec<Vec<f64>> = gathered
                        .into_iter()
                        .map(|c| c.embedding.unwrap())
                        .collect();
                    let _ = crate::meanshift::mean_shift(&points, &cfg.cluster).unwrap();
                }),
                _ => 0.0,
            };
            if rep > 0 {
                // Warm-up run discarded.
                forward.push(f);
                nms_t.push(n);
                cluster.push(cl);
            }
        }
        let forward_ms = median(&mut forward);
        let nms_ms = median(&mut nms_t);
        let cluster_ms = median(&mut cluster);
        rows.push(BenchRow {
            n_faces,
            forward_ms,
            nms_ms,
            cluster_ms,
            total_ms: forward_ms + nms_ms + cluster_ms,
            repeats: cfg.repeats,
        });
    }

    let xs: Vec<f64> = rows.iter().map(|r| r.n_faces as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.total_ms).collect();
    let (intercept, slope) = least_squares(&xs, &ys);
    Ok(BenchReport {
        rows,
        slope_ms_per_face: slope,
        intercept_ms: intercept,
        reference_slope_ms_per_face: REFERENCE_SLOPE_MS_PER_FACE,
        reference_parse_ms_9_faces: REFERENCE_PARSE_MS_9_FACES,
        reference_single_face_ms: REFERENCE_SINGLE_FACE_MS,
    })
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_faces,forward_ms,nms_ms,cluster_ms,total_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4}\n",
                r.n_faces, r.forward_ms, r.nms_ms, r.cluster_ms, r.total_ms
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(face_counts: Vec<usize>) -> BenchConfig {
        BenchConfig {
            face_counts,
            repeats: 3,
            height: 96,
            width: 96,
            train: ToyTrainConfig {
                steps: 30,
                ..ToyTrainConfig::default()
            },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn rejects_too_few_repeats() {
        let cfg = BenchConfig {
            repeats: 2,
            ..small_cfg(vec![1])
        };
        assert!(run_scaling(&cfg).is_err());
    }

    #[test]
    fn single_point_has_no_slope() {
        let report = run_scaling(&small_cfg(vec![1])).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.slope_ms_per_face.is_none());
        assert!((report.intercept_ms - report.rows[0].total_ms).abs() < 1e-12);
    }

    #[test]
    fn stage_times_non_negative_and_total_consistent() {
        let report = run_scaling(&small_cfg(vec![1, 2])).unwrap();
        for r in &report.rows {
            assert!(r.forward_ms >= 0.0 && r.nms_ms >= 0.0 && r.cluster_ms >= 0.0);
            let sum = r.forward_ms + r.nms_ms + r.cluster_ms;
            assert!((r.total_ms - sum).abs() < 1e-9);
        }
    }

    #[test]
    fn least_squares_on_line() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x).collect();
        let (a, b) = least_squares(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_workload_slope_near_zero() {
        // Same scene at every "face count" with clustering skipped: the fit
        // over per-repeat noise must be statistically indistinguishable from
        // zero relative to the intercept.
        let mut cfg = small_cfg(vec![2, 2, 2, 2]);
        cfg.train.steps = 0;
        let scene = pipeline::generate_scene(2, 5, 96, 96, 1).unwrap();
        let mut totals = Vec::new();
        for _ in 0..4 {
            let mut reps = Vec::new();
            for _ in 0..cfg.repeats {
                reps.push(time_ms(|| {
                    let _ = nms::extract_candidates(&scene.heatmap, &cfg.nms).unwrap();
                }));
            }
            totals.push(median(&mut reps));
        }
        let xs = [1.0, 2.0, 4.0, 8.0];
        let (intercept, slope) = least_squares(&xs, &totals);
        assert!(slope.unwrap().abs() <= 0.5 * intercept.abs().max(0.01));
    }

    #[test]
    fn csv_header_and_rows() {
        let report = run_scaling(&small_cfg(vec![1, 2])).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n_faces,forward_ms,nms_ms,cluster_ms,total_ms"
        );
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn cluster_time_non_decreasing_trend() {
        let report = run_scaling(&small_cfg(vec![1, 4])).unwrap();
        // Loose: more faces never make clustering an order of magnitude
        // cheaper.
        assert!(report.rows[1].cluster_ms >= report.rows[0].cluster_ms * 0.2);
    }
}
