//! Cosine discriminative loss: variance (pull), distance (push) and
//! regularization (radius anchoring) terms, their analytic gradients, and a
//! central finite-difference oracle used to verify them.
//!
//! All loss math runs in f64 even though tensors store f32; the gradient
//! tolerance (1e-5 relative) is not meaningful in single precision.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::tensor::EmbeddingMap;
use crate::types::LossConfig;

/// N embedding vectors with cluster labels in [0, C); every cluster occupied.
#[derive(Debug, Clone)]
pub struct LabeledEmbeddings {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_clusters: usize,
}

impl LabeledEmbeddings {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput {
                context: "labeled embeddings need at least one point".into(),
            });
        }
        if points.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points vs {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "point {i} has dim {}, expected {dim}",
                    p.len()
                )));
            }
            if norm(p) == 0.0 {
                return Err(Error::ZeroNorm {
                    context: format!("embedding point {i}"),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("embedding point {i}"),
                });
            }
        }
        let n_clusters = labels.iter().max().copied().unwrap_or(0) + 1;
        let mut seen = vec![false; n_clusters];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::DegenerateCluster {
                cluster: missing,
                context: "cluster id range [0, C) has a hole".into(),
            });
        }
        Ok(Self {
            points,
            labels,
            n_clusters,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// The individual loss terms plus their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_var: f64,
    pub l_dist: f64,
    pub l_reg: f64,
    pub l_fox: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// d(a, b) = 1 - a.b / (|a||b|), in [0, 2]; scale-invariant.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm {
            context: "cosine distance of a zero vector".into(),
        });
    }
    Ok(1.0 - dot(a, b) / (na * nb))
}

/// Arithmetic mean embedding per cluster; rejects zero-vector means.
pub fn cluster_means(e: &LabeledEmbeddings) -> Result<Vec<Vec<f64>>> {
    let d = e.dim();
    let mut sums = vec![vec![0.0; d]; e.n_clusters()];
    let mut counts = vec![0usize; e.n_clusters()];
    for (p, &l) in e.points().iter().zip(e.labels()) {
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
        counts[l] += 1;
    }
    for (c, (sum, &n)) in sums.iter_mut().zip(&counts).enumerate() {
        for s in sum.iter_mut() {
            *s /= n as f64;
        }
        if norm(sum) == 0.0 {
            return Err(Error::DegenerateCluster {
                cluster: c,
                context: "mean embedding is the zero vector".into(),
            });
        }
    }
    Ok(sums)
}

fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

/// Intra-cluster pull: (1/C) sum_c (1/N_c) sum_i [d(mu_c, x_i) - delta_v]+^2.
pub fn variance_term(e: &LabeledEmbeddings, means: &[Vec<f64>], delta_v: f64) -> Result<f64> {
    let c = e.n_clusters();
    let mut counts = vec![0usize; c];
    for &l in e.labels() {
        counts[l] += 1;
    }
    let mut per_cluster = vec![0.0; c];
    for (p, &l) in e.points().iter().zip(e.labels()) {
        let d = cosine_distance(&means[l], p)?;
        per_cluster[l] += hinge(d - delta_v).powi(2);
    }
    Ok(per_cluster
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s / n as f64)
        .sum::<f64>()
        / c as f64)
}

/// Inter-cluster push: (1/(C(C-1))) sum_{a != b} [2 delta_d - d(mu_a, mu_b)]+^2.
/// Defined as 0 for a single cluster.
pub fn distance_term(means: &[Vec<f64>], delta_d: f64) -> Result<f64> {
    let c = means.len();
    if c < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for a in 0..c {
        for b in 0..c {
            if a == b {
                continue;
            }
            let d = cosine_distance(&means[a], &means[b])?;
            sum += hinge(2.0 * delta_d - d).powi(2);
        }
    }
    Ok(sum / (c * (c - 1)) as f64)
}

/// Radius anchoring: (1/C) sum_c (|mu_c| - R)^2.
pub fn regularization_term(means: &[Vec<f64>], radius: f64) -> f64 {
    let c = means.len();
    means.iter().map(|m| (norm(m) - radius).powi(2)).sum::<f64>() / c as f64
}

/// Full loss: alpha * L_var + beta * L_dist + gamma * L_reg.
pub fn fox_loss(e: &LabeledEmbeddings, cfg: &LossConfig) -> Result<LossBreakdown> {
    let means = cluster_means(e)?;
    let l_var = variance_term(e, &means, cfg.delta_v)?;
    let l_dist = distance_term(&means, cfg.delta_d)?;
    let l_reg = regularization_term(&means, cfg.radius);
    Ok(LossBreakdown {
        l_var,
        l_dist,
        l_reg,
        l_fox: cfg.alpha * l_var + cfg.beta * l_dist + cfg.gamma * l_reg,
    })
}

// d(a, b) = 1 - a.b/(|a||b|); with s the cosine similarity,
// dd/da = s * a / |a|^2 - b / (|a||b|).
fn cos_dist_grad_first(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (na, nb) = (norm(a), norm(b));
    let s = dot(a, b) / (na * nb);
    a.iter()
        .zip(b)
        .map(|(&ai, &bi)| s * ai / (na * na) - bi / (na * nb))
        .collect()
}

/// Gradient of `fox_loss` with respect to every embedding, including the
/// chain through the cluster means. The squared hinge is C^1, so no special
/// casing is needed at the margin boundary; the active-side derivative (zero)
/// is what falls out.
pub fn fox_loss_grad(e: &LabeledEmbeddings, cfg: &LossConfig) -> Result<Vec<Vec<f64>>> {
    let d = e.dim();
    let c = e.n_clusters();
    let means = cluster_means(e)?;
    let mut counts = vec![0usize; c];
    for &l in e.labels() {
        counts[l] += 1;
    }

    let mut grad_x = vec![vec![0.0; d]; e.len()];
    // Weighted gradient with respect to each cluster mean, distributed to the
    // members at the end (d mu_c / d x_i = I / N_c).
    let mut grad_mu = vec![vec![0.0; d]; c];

    // Variance term.
    if cfg.alpha != 0.0 {
        for (i, (p, &l)) in e.points().iter().zip(e.labels()).enumerate() {
            let dist = cosine_distance(&means[l], p)?;
            let h = dist - cfg.delta_v;
            if h <= 0.0 {
                continue;
            }
            let coef = cfg.alpha * 2.0 * h / (c as f64 * counts[l] as f64);
            let g_point = cos_dist_grad_first(p, &means[l]);
            let g_mean = cos_dist_grad_first(&means[l], p);
            for k in 0..d {
                grad_x[i][k] += coef * g_point[k];
                grad_mu[l][k] += coef * g_mean[k];
            }
        }
    }

    // Distance term.
    if cfg.beta != 0.0 && c >= 2 {
        let denom = (c * (c - 1)) as f64;
        for a in 0..c {
            for b in 0..c {
                if a == b {
                    continue;
                }
                let dist = cosine_distance(&means[a], &means[b])?;
                let g = 2.0 * cfg.delta_d - dist;
                if g <= 0.0 {
                    continue;
                }
                // d/d mu of [g]+^2 = -2 g * dd/d mu
                let coef = -cfg.beta * 2.0 * g / denom;
                let ga = cos_dist_grad_first(&means[a], &means[b]);
                let gb = cos_dist_grad_first(&means[b], &means[a]);
                for k in 0..d {
                    grad_mu[a][k] += coef * ga[k];
                    grad_mu[b][k] += coef * gb[k];
                }
            }
        }
    }

    // Regularization term.
    if cfg.gamma != 0.0 {
        for (m, gm) in means.iter().zip(grad_mu.iter_mut()) {
            let nm = norm(m);
            let coef = cfg.gamma * 2.0 * (nm - cfg.radius) / (c as f64 * nm);
            for k in 0..d {
                gm[k] += coef * m[k];
            }
        }
    }

    for (i, &l) in e.labels().iter().enumerate() {
        let scale = 1.0 / counts[l] as f64;
        for k in 0..d {
            grad_x[i][k] += scale * grad_mu[l][k];
        }
    }
    Ok(grad_x)
}

/// Central finite differences of `fox_loss` over every coordinate; the
/// independent oracle for `fox_loss_grad`.
pub fn finite_difference_grad(
    e: &LabeledEmbeddings,
    cfg: &LossConfig,
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut points = e.points().to_vec();
    let labels = e.labels().to_vec();
    let d = e.dim();
    let mut grad = vec![vec![0.0; d]; points.len()];
    for i in 0..points.len() {
        for k in 0..d {
            let orig = points[i][k];
            points[i][k] = orig + step;
            let plus = fox_loss(&LabeledEmbeddings::new(points.clone(), labels.clone())?, cfg)?;
            points[i][k] = orig - step;
            let minus = fox_loss(&LabeledEmbeddings::new(points.clone(), labels.clone())?, cfg)?;
            points[i][k] = orig;
            grad[i][k] = (plus.l_fox - minus.l_fox) / (2.0 * step);
        }
    }
    Ok(grad)
}

/// Worst-case relative disagreement between two gradients. Differences below
/// the finite-difference noise floor (1e-9 absolute) count as zero.
pub fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (&x, &y) in ra.iter().zip(rb) {
            let diff = (x - y).abs();
            if diff < 1e-9 {
                continue;
            }
            worst = worst.max(diff / x.abs().max(y.abs()));
        }
    }
    worst
}

/// Mask-level objective: gather the embeddings of all face pixels (mask
/// label present), relabel faces contiguously by first appearance, and apply
/// the loss. Background pixels never participate.
pub fn pixel_objective(
    map: &EmbeddingMap,
    mask: &crate::types::FaceMask,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let e = gather_masked(map, mask)?;
    fox_loss(&e, cfg)
}

/// The gather behind `pixel_objective`, exposed so training can reuse it.
pub fn gather_masked(map: &EmbeddingMap, mask: &crate::types::FaceMask) -> Result<LabeledEmbeddings> {
    if map.height() != mask.height || map.width() != mask.width {
        return Err(Error::ShapeMismatch(format!(
            "embedding map {}x{} vs mask {}x{}",
            map.height(),
            map.width(),
            mask.height,
            mask.width
        )));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut remap: Vec<Option<usize>> = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            let Some(face) = mask.label(y, x) else {
                continue;
            };
            if remap.len() <= face {
                remap.resize(face + 1, None);
            }
            let next = remap.iter().flatten().count();
            let id = *remap[face].get_or_insert(next);
            points.push(map.column(y, x).iter().map(|&v| f64::from(v)).collect());
            labels.push(id);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput {
            context: "mask selects no face pixels".into(),
        });
    }
    LabeledEmbeddings::new(points, labels)
}

/// Seeded random instance for gradient checking: points are unit Gaussians
/// scaled by a random factor in [0.5, 2] so mean norms vary.
pub fn random_instance(n: usize, d: usize, c: usize, rng: &mut ChaCha20Rng) -> LabeledEmbeddings {
    use rand_distr::StandardNormal;
    assert!(n >= c && c >= 1);
    loop {
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let scale: f64 = rng.gen_range(0.5..2.0);
            let v: Vec<f64> = (0..d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            points.push(v);
            // First C points pin one member per cluster; the rest are random.
            labels.push(if i < c { i } else { rng.gen_range(0..c) });
        }
        if let Ok(e) = LabeledEmbeddings::new(points, labels) {
            return e;
        }
    }
}

/// True when no hinge argument is within `margin` of its kink, so finite
/// differences are trustworthy.
pub fn away_from_kinks(e: &LabeledEmbeddings, cfg: &LossConfig, margin: f64) -> Result<bool> {
    let means = cluster_means(e)?;
    for (p, &l) in e.points().iter().zip(e.labels()) {
        let d = cosine_distance(&means[l], p)?;
        if (d - cfg.delta_v).abs() < margin {
            return Ok(false);
        }
    }
    for a in 0..means.len() {
        for b in (a + 1)..means.len() {
            let d = cosine_distance(&means[a], &means[b])?;
            if (2.0 * cfg.delta_d - d).abs() < margin {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use crate::types::FaceMask;
    use rand::SeedableRng;

    fn emb(points: Vec<Vec<f64>>, labels: Vec<usize>) -> LabeledEmbeddings {
        LabeledEmbeddings::new(points, labels).unwrap()
    }

    #[test]
    fn cosine_distance_basics() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn cosine_distance_scale_invariant_and_symmetric() {
        let a = [0.3, -1.2, 0.7];
        let b = [1.1, 0.4, -0.2];
        let d = cosine_distance(&a, &b).unwrap();
        let a5: Vec<f64> = a.iter().map(|v| v * 5.0).collect();
        let b03: Vec<f64> = b.iter().map(|v| v * 0.3).collect();
        assert!((cosine_distance(&a5, &b03).unwrap() - d).abs() < 1e-14);
        assert!((cosine_distance(&b, &a).unwrap() - d).abs() < 1e-14);
    }

    #[test]
    fn cluster_means_cases() {
        let e = emb(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 0]);
        assert_eq!(cluster_means(&e).unwrap(), vec![vec![0.5, 0.5]]);

        let e = emb(vec![vec![3.0, 4.0]], vec![0]);
        assert_eq!(cluster_means(&e).unwrap(), vec![vec![3.0, 4.0]]);

        // Antipodal pair: mean is the zero vector.
        let e = emb(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0, 0]);
        assert!(matches!(
            cluster_means(&e),
            Err(Error::DegenerateCluster { .. })
        ));
    }

    #[test]
    fn variance_term_cases() {
        // Points aligned with their mean direction: d = 0, fully hinged.
        let e = emb(vec![vec![2.0, 0.0], vec![1.0, 0.0]], vec![0, 0]);
        let means = cluster_means(&e).unwrap();
        assert_eq!(variance_term(&e, &means, 1.0).unwrap(), 0.0);

        // Orthogonal point at the margin boundary (d = 1 = delta_v).
        let e = emb(vec![vec![0.0, 1.0]], vec![0]);
        assert_eq!(
            variance_term(&e, &[vec![1.0, 0.0]], 1.0).unwrap(),
            0.0
        );

        // One cluster of two points, explicit mean (1,0): distances 1 and 0,
        // delta_v = 0.5 -> 0.5 * ((0.5)^2 + 0) = 0.125.
        let e = emb(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0, 0]);
        let got = variance_term(&e, &[vec![1.0, 0.0]], 0.5).unwrap();
        // Independent scalar evaluation of the same sum.
        let expect = {
            let dists = [1.0f64, 0.0];
            dists.iter().map(|d| (d - 0.5).max(0.0).powi(2)).sum::<f64>() / 2.0
        };
        assert!((got - 0.125).abs() < 1e-15);
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn distance_term_cases() {
        // Antipodal means at delta_d = 1: 2*delta_d - d = 0, hinged.
        let means = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        assert_eq!(distance_term(&means, 1.0).unwrap(), 0.0);

        // Single cluster.
        assert_eq!(distance_term(&[vec![1.0, 0.0]], 1.0).unwrap(), 0.0);

        // Identical means: [2 - 0]^2 = 4 on both ordered pairs, averaged -> 4.
        let means = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        assert_eq!(distance_term(&means, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn regularization_term_cases() {
        let on_sphere = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        assert_eq!(regularization_term(&on_sphere, 1.0), 0.0);

        assert_eq!(regularization_term(&[vec![2.0, 0.0]], 1.0), 1.0);

        // Norms {1, 3}, R = 1 -> (0 + 4) / 2 = 2.
        let means = vec![vec![0.0, 1.0], vec![3.0, 0.0]];
        assert_eq!(regularization_term(&means, 1.0), 2.0);
    }

    #[test]
    fn fox_loss_zero_at_separation() {
        // Two tight antipodal clusters of unit vectors, means on the unit
        // sphere, default hyperparameters: every term closed.
        let cfg = LossConfig::default();
        let e = emb(
            vec![
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![-1.0, 0.0],
            ],
            vec![0, 0, 1, 1],
        );
        let b = fox_loss(&e, &cfg).unwrap();
        assert!(b.l_fox < 1e-10, "l_fox = {}", b.l_fox);
    }

    #[test]
    fn fox_loss_combination_and_breakdown_identity() {
        let cfg = LossConfig {
            delta_v: 0.5,
            delta_d: 0.9,
            ..LossConfig::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let e = random_instance(12, 5, 3, &mut rng);
        let b = fox_loss(&e, &cfg).unwrap();
        let combo = cfg.alpha * b.l_var + cfg.beta * b.l_dist + cfg.gamma * b.l_reg;
        assert!((b.l_fox - combo).abs() <= 1e-12 * combo.abs().max(1.0));
        assert!(b.l_var >= 0.0 && b.l_dist >= 0.0 && b.l_reg >= 0.0);

        // gamma = 0 drops the regularizer exactly.
        let cfg0 = LossConfig { gamma: 0.0, ..cfg };
        let b0 = fox_loss(&e, &cfg0).unwrap();
        assert_eq!(b0.l_fox, b0.l_var + b0.l_dist);
    }

    #[test]
    fn grad_zero_in_flat_region() {
        let cfg = LossConfig::default();
        let e = emb(
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![0, 0, 1],
        );
        let g = fox_loss_grad(&e, &cfg).unwrap();
        for row in g {
            for v in row {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn grad_tangent_to_global_scaling_without_reg() {
        // With gamma = 0 the loss is invariant under x -> s x, so the
        // directional derivative along the scaling direction vanishes:
        // sum_i x_i . g_i = 0.
        let cfg = LossConfig {
            gamma: 0.0,
            delta_v: 0.4,
            delta_d: 0.8,
            ..LossConfig::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let e = random_instance(15, 6, 3, &mut rng);
            let g = fox_loss_grad(&e, &cfg).unwrap();
            let proj: f64 = e.points().iter().zip(&g).map(|(x, gi)| dot(x, gi)).sum();
            assert!(proj.abs() < 1e-10, "scaling projection {proj}");
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let cfg = LossConfig {
            delta_v: 0.5,
            delta_d: 0.9,
            ..LossConfig::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 25 {
            let e = random_instance(20, 8, 3, &mut rng);
            if !away_from_kinks(&e, &cfg, 1e-3).unwrap() {
                continue;
            }
            let analytic = fox_loss_grad(&e, &cfg).unwrap();
            let numeric = finite_difference_grad(&e, &cfg, 1e-6).unwrap();
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-5, "instance {checked}: rel err {err}");
            checked += 1;
        }
    }

    #[test]
    fn scale_and_permutation_invariance() {
        let cfg = LossConfig {
            delta_v: 0.5,
            delta_d: 0.9,
            ..LossConfig::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let e = random_instance(10, 4, 2, &mut rng);
        let b = fox_loss(&e, &cfg).unwrap();

        // Global scaling leaves var and dist untouched.
        let scaled: Vec<Vec<f64>> = e
            .points()
            .iter()
            .map(|p| p.iter().map(|v| v * 3.7).collect())
            .collect();
        let es = LabeledEmbeddings::new(scaled, e.labels().to_vec()).unwrap();
        let bs = fox_loss(&es, &cfg).unwrap();
        assert!((bs.l_var - b.l_var).abs() <= 1e-12 * b.l_var.max(1.0));
        assert!((bs.l_dist - b.l_dist).abs() <= 1e-12 * b.l_dist.max(1.0));

        // Reversing the point order changes nothing.
        let rev_pts: Vec<_> = e.points().iter().rev().cloned().collect();
        let rev_lbl: Vec<_> = e.labels().iter().rev().copied().collect();
        let er = LabeledEmbeddings::new(rev_pts, rev_lbl).unwrap();
        let br = fox_loss(&er, &cfg).unwrap();
        assert!((br.l_fox - b.l_fox).abs() < 1e-12);
    }

    #[test]
    fn hinge_monotonicity_in_margins() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..30 {
            let e = random_instance(12, 5, 3, &mut rng);
            let means = cluster_means(&e).unwrap();
            let v_small = variance_term(&e, &means, 0.2).unwrap();
            let v_large = variance_term(&e, &means, 0.6).unwrap();
            assert!(v_large <= v_small + 1e-15);
            let d_small = distance_term(&means, 0.5).unwrap();
            let d_large = distance_term(&means, 0.9).unwrap();
            assert!(d_large >= d_small - 1e-15);
        }
    }

    #[test]
    fn pixel_objective_empty_mask_errors() {
        let map = EmbeddingMap::new(Tensor::zeros(vec![2, 4, 4]).unwrap()).unwrap();
        let mask = FaceMask::background(4, 4);
        assert!(matches!(
            pixel_objective(&map, &mask, &LossConfig::default()),
            Err(Error::EmptyInput { .. })
        ));
    }

    // Writing a labeled instance into map cells selected by the mask must
    // reproduce fox_loss on the instance exactly (values chosen representable
    // in 32-bit floats).
    #[test]
    fn pixel_objective_matches_fox_loss_on_gathered_points() {
        let points = vec![
            vec![1.0, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
            vec![-1.0, 0.25, 0.0],
            vec![0.0, -0.5, 1.0],
            vec![0.25, 1.0, 0.75],
            vec![-0.5, 0.0, -0.25],
        ];
        let labels = vec![0, 0, 0, 1, 1, 1];
        let e = emb(points.clone(), labels.clone());
        let cfg = LossConfig {
            embed_dim: 3,
            ..LossConfig::default()
        };

        // 2 faces of 3 pixels each on an 8x8 map, scattered out of label order.
        let cells = [(0, 1, 0), (2, 5, 0), (7, 7, 0), (1, 1, 1), (4, 0, 1), (6, 3, 1)];
        let mut data = vec![0.0f32; 3 * 8 * 8];
        let mut mask = FaceMask::background(8, 8);
        for ((y, x, face), p) in cells.iter().zip(&points) {
            mask.set(*y, *x, *face);
            for (ch, &v) in p.iter().enumerate() {
                data[(ch * 8 + y) * 8 + x] = v as f32;
            }
        }
        let map = EmbeddingMap::new(Tensor::new(vec![3, 8, 8], data).unwrap()).unwrap();

        let from_mask = pixel_objective(&map, &mask, &cfg).unwrap();
        let direct = fox_loss(&e, &cfg).unwrap();
        assert_eq!(from_mask, direct);
    }

    // Face ids need not be contiguous in the mask; gather relabels by first
    // appearance in row-major order.
    #[test]
    fn gather_masked_relabels_sparse_face_ids() {
        let mut data = vec![0.0f32; 2 * 4 * 4];
        let mut mask = FaceMask::background(4, 4);
        for (i, (y, x, face)) in [(0, 0, 5), (1, 2, 2), (3, 3, 5)].iter().enumerate() {
            mask.set(*y, *x, *face);
            data[(0 * 4 + y) * 4 + x] = 1.0 + i as f32;
            data[(1 * 4 + y) * 4 + x] = 1.0;
        }
        let map = EmbeddingMap::new(Tensor::new(vec![2, 4, 4], data).unwrap()).unwrap();
        let e = gather_masked(&map, &mask).unwrap();
        assert_eq!(e.labels(), &[0, 1, 0]);
    }

    #[test]
    fn labeled_embeddings_validation() {
        // Hole in the id range.
        assert!(LabeledEmbeddings::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0, 2]
        )
        .is_err());
        // Zero point.
        assert!(LabeledEmbeddings::new(vec![vec![0.0, 0.0]], vec![0]).is_err());
    }
}
