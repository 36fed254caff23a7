//! Evaluation: greedy face matching, normalized mean error (NME) for
//! landmarks, and detection F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FaceGroup, SceneAnnotation};

/// Matched (pred, gt) index pairs plus the leftovers on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// JSON evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub nme_percent: f64,
    pub f1: f64,
    pub pairs: Vec<(usize, usize)>,
}

fn bbox_diagonal(face: &[(usize, usize)]) -> f64 {
    let (mut min_x, mut max_x) = (usize::MAX, 0usize);
    let (mut min_y, mut max_y) = (usize::MAX, 0usize);
    for &(x, y) in face {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let dx = (max_x - min_x) as f64;
    let dy = (max_y - min_y) as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Mean distance from each gt landmark to its nearest predicted landmark.
fn pair_cost(pred: &FaceGroup, gt: &[(usize, usize)]) -> f64 {
    let mut total = 0.0;
    for &(gx, gy) in gt {
        let nearest = pred
            .landmarks
            .iter()
            .map(|lm| {
                let dx = lm.x as f64 - gx as f64;
                let dy = lm.y as f64 - gy as f64;
                (dx * dx + dy * dy).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        total += nearest;
    }
    total / gt.len() as f64
}

/// Greedy matching over globally sorted candidate pairs; a pair is accepted
/// when its mean landmark distance stays below `accept_frac` times the gt
/// face's bounding-box diagonal. Each side is used at most once.
pub fn match_faces(pred: &[FaceGroup], gt: &SceneAnnotation, accept_frac: f64) -> MatchResult {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in pred.iter().enumerate() {
        for (gi, g) in gt.faces.iter().enumerate() {
            if g.is_empty() || p.landmarks.is_empty() {
                continue;
            }
            let cost = pair_cost(p, g);
            if cost <= accept_frac * bbox_diagonal(g).max(1.0) {
                candidates.push((cost, pi, gi));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut used_pred = vec![false; pred.len()];
    let mut used_gt = vec![false; gt.faces.len()];
    let mut pairs = Vec::new();
    for (_, pi, gi) in candidates {
        if !used_pred[pi] && !used_gt[gi] {
            used_pred[pi] = true;
            used_gt[gi] = true;
            pairs.push((pi, gi));
        }
    }
    MatchResult {
        pairs,
        unmatched_pred: (0..pred.len()).filter(|&i| !used_pred[i]).collect(),
        unmatched_gt: (0..gt.faces.len()).filter(|&i| !used_gt[i]).collect(),
    }
}

/// 100 * mean_k |p_k - g_k| / normalizer, over paired landmarks.
pub fn nme(
    pred_landmarks: &[(f64, f64)],
    gt_landmarks: &[(f64, f64)],
    normalizer: f64,
) -> Result<f64> {
    if pred_landmarks.len() != gt_landmarks.len() || pred_landmarks.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "landmark counts differ or empty: {} vs {}",
            pred_landmarks.len(),
            gt_landmarks.len()
        )));
    }
    if normalizer <= 0.0 {
        return Err(Error::InvalidArgument(
            "NME normalizer must be positive".into(),
        ));
    }
    let sum: f64 = pred_landmarks
        .iter()
        .zip(gt_landmarks)
        .map(|(p, g)| ((p.0 - g.0).powi(2) + (p.1 - g.1).powi(2)).sqrt())
        .sum();
    Ok(100.0 * sum / (pred_landmarks.len() as f64 * normalizer))
}

/// F1 = 2 TP / (2 TP + FP + FN); empty-vs-empty is a perfect 1.0.
pub fn f1_detection(m: &MatchResult) -> f64 {
    let tp = m.pairs.len();
    let denom = 2 * tp + m.unmatched_pred.len() + m.unmatched_gt.len();
    if denom == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / denom as f64
}

/// Full scene evaluation: match faces, then NME per matched pair with the
/// gt bounding-box diagonal as the default normalizer, averaged over pairs.
pub fn evaluate(pred: &[FaceGroup], gt: &SceneAnnotation, accept_frac: f64) -> Result<EvalReport> {
    let m = match_faces(pred, gt, accept_frac);
    let mut nme_sum = 0.0;
    for &(pi, gi) in &m.pairs {
        let gt_face = &gt.faces[gi];
        // Nearest-point correspondence from gt to predictions.
        let paired: Vec<(f64, f64)> = gt_face
            .iter()
            .map(|&(gx, gy)| {
                pred[pi]
                    .landmarks
                    .iter()
                    .map(|lm| (lm.x as f64, lm.y as f64))
                    .min_by(|a, b| {
                        let da = (a.0 - gx as f64).powi(2) + (a.1 - gy as f64).powi(2);
                        let db = (b.0 - gx as f64).powi(2) + (b.1 - gy as f64).powi(2);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap()
            })
            .collect();
        let gt_pts: Vec<(f64, f64)> = gt_face.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        nme_sum += nme(&paired, &gt_pts, bbox_diagonal(gt_face).max(1.0))?;
    }
    let nme_percent = if m.pairs.is_empty() {
        0.0
    } else {
        nme_sum / m.pairs.len() as f64
    };
    Ok(EvalReport {
        nme_percent,
        f1: f1_detection(&m),
        pairs: m.pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LandmarkCandidate;

    fn group(id: usize, pts: &[(usize, usize)]) -> FaceGroup {
        FaceGroup {
            cluster_id: id,
            mode: vec![1.0, 0.0],
            landmarks: pts
                .iter()
                .map(|&(x, y)| LandmarkCandidate {
                    x,
                    y,
                    score: 1.0,
                    embedding: None,
                })
                .collect(),
        }
    }

    fn ann(faces: Vec<Vec<(usize, usize)>>) -> SceneAnnotation {
        SceneAnnotation {
            height: 64,
            width: 64,
            faces,
        }
    }

    #[test]
    fn exact_prediction_fully_matched() {
        let gt = ann(vec![
            vec![(10, 10), (20, 10), (15, 20)],
            vec![(40, 40), (50, 40), (45, 50)],
        ]);
        let pred = vec![group(0, &gt.faces[0]), group(1, &gt.faces[1])];
        let m = match_faces(&pred, &gt, 0.5);
        assert_eq!(m.pairs.len(), 2);
        assert!(m.unmatched_pred.is_empty() && m.unmatched_gt.is_empty());

        let report = evaluate(&pred, &gt, 0.5).unwrap();
        assert_eq!(report.nme_percent, 0.0);
        assert_eq!(report.f1, 1.0);
    }

    #[test]
    fn empty_pred_all_gt_unmatched() {
        let gt = ann(vec![vec![(10, 10), (20, 20)]]);
        let m = match_faces(&[], &gt, 0.5);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_gt, vec![0]);
        assert_eq!(f1_detection(&m), 0.0);
    }

    #[test]
    fn two_preds_near_one_gt_takes_closer() {
        let gt = ann(vec![vec![(10, 10), (20, 10), (15, 20)]]);
        let close = group(0, &[(10, 10), (20, 10), (15, 20)]);
        let off = group(1, &[(12, 12), (22, 12), (17, 22)]);
        let pred = vec![off.clone(), close.clone()];
        let m = match_faces(&pred, &gt, 0.5);
        // Exhaustive check: the exact group (index 1) must win.
        assert_eq!(m.pairs, vec![(1, 0)]);
        assert_eq!(m.unmatched_pred, vec![0]);
    }

    #[test]
    fn nme_cases() {
        let gt = [(0.0, 0.0), (10.0, 0.0)];
        assert_eq!(nme(&gt, &gt, 5.0).unwrap(), 0.0);

        // Every landmark off by exactly the normalizer -> 100.
        let pred = [(0.0, 5.0), (10.0, 5.0)];
        assert_eq!(nme(&pred, &gt, 5.0).unwrap(), 100.0);

        // Errors {3, 4} px, normalizer 10 -> 35.0.
        let pred = [(3.0, 0.0), (10.0, 4.0)];
        assert_eq!(nme(&pred, &gt, 10.0).unwrap(), 35.0);

        assert!(nme(&pred, &gt[..1].to_vec(), 10.0).is_err());
        assert!(nme(&pred, &gt, 0.0).is_err());
    }

    #[test]
    fn f1_cases() {
        let m = MatchResult {
            pairs: vec![(0, 0), (1, 1)],
            unmatched_pred: vec![2],
            unmatched_gt: vec![2],
        };
        assert!((f1_detection(&m) - 4.0 / 6.0).abs() < 1e-12);

        let none = MatchResult {
            pairs: vec![],
            unmatched_pred: vec![],
            unmatched_gt: vec![0, 1, 2],
        };
        assert_eq!(f1_detection(&none), 0.0);

        let empty = MatchResult {
            pairs: vec![],
            unmatched_pred: vec![],
            unmatched_gt: vec![],
        };
        assert_eq!(f1_detection(&empty), 1.0);
    }

    #[test]
    fn accept_frac_monotone() {
        let gt = ann(vec![vec![(10, 10), (30, 10), (20, 28)]]);
        let pred = vec![group(0, &[(14, 13), (33, 12), (23, 30)])];
        for lo in [0.05, 0.1, 0.3, 0.6] {
            let tight = match_faces(&pred, &gt, lo).pairs.len();
            let loose = match_faces(&pred, &gt, lo * 2.0).pairs.len();
            assert!(loose >= tight);
        }
    }

    #[test]
    fn nme_translation_invariant() {
        let gt = [(5.0, 5.0), (9.0, 7.0)];
        let pred = [(6.0, 5.0), (8.0, 8.0)];
        let base = nme(&pred, &gt, 4.0).unwrap();
        let shift = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
            pts.iter().map(|&(x, y)| (x + 13.0, y - 2.0)).collect()
        };
        assert!((nme(&shift(&pred), &shift(&gt), 4.0).unwrap() - base).abs() < 1e-12);
        // Inverse scaling with the normalizer.
        assert!((nme(&pred, &gt, 8.0).unwrap() - base / 2.0).abs() < 1e-12);
    }
}
