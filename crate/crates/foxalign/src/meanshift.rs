//! Spherical mean shift with a flat kernel over cosine distance, plus an
//! O(n^2) connected-components oracle used to verify it.
//!
//! The shifted mean is renormalized onto the sphere each step; the loss
//! geometry is angular, so a Euclidean mean would drift off it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{cosine_distance, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Flat-kernel bandwidth in cosine-distance units.
    pub bandwidth: f64,
    pub max_iterations: usize,
    pub convergence: f64,
    /// Modes closer than this are merged.
    pub merge_tolerance: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            bandwidth: 1.0,
            max_iterations: 100,
            convergence: 1e-6,
            merge_tolerance: 0.5,
        }
    }
}

impl ClusterConfig {
    pub fn with_bandwidth(h: f64) -> Self {
        Self {
            bandwidth: h,
            merge_tolerance: h / 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must lie in (0, 2], got {}",
                self.bandwidth
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if self.convergence <= 0.0 {
            return Err(Error::InvalidArgument("convergence must be positive".into()));
        }
        if !(self.merge_tolerance > 0.0 && self.merge_tolerance <= self.bandwidth) {
            return Err(Error::InvalidArgument(format!(
                "merge tolerance must lie in (0, bandwidth], got {}",
                self.merge_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// One cluster id per input point, contiguous in [0, K), ids assigned by
    /// order of first appearance over the input sequence.
    pub labels: Vec<usize>,
    /// One unit vector per cluster.
    pub modes: Vec<Vec<f64>>,
}

fn check_unit_points(points: &[Vec<f64>]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::EmptyInput {
            context: "mean shift needs at least one point".into(),
        });
    }
    let d = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "point {i} has dim {}, expected {d}",
                p.len()
            )));
        }
        if (norm(p) - 1.0).abs() > 1e-5 {
            return Err(Error::InvalidArgument(format!(
                "point {i} is not unit-norm ({})",
                norm(p)
            )));
        }
    }
    Ok(d)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the earliest index as the representative.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Assigns each point to its nearest mode and renames clusters by order of
/// first appearance over the input sequence, dropping modes that win nothing.
/// `flat` holds unit vectors of width `d`, so nearest-by-cosine is largest
/// dot product.
fn assign_and_relabel(flat: &[f64], d: usize, modes: &[Vec<f64>]) -> Result<ClusterResult> {
    let mut raw = Vec::with_capacity(flat.len() / d);
    for p in flat.chunks_exact(d) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (m, mode) in modes.iter().enumerate() {
            let dot: f64 = p.iter().zip(mode).map(|(a, b)| a * b).sum();
            if dot > best.1 {
                best = (m, dot);
            }
        }
        raw.push(best.0);
    }
    let mut rename: Vec<Option<usize>> = vec![None; modes.len()];
    let mut out_modes = Vec::new();
    let mut labels = Vec::with_capacity(raw.len());
    for &r in &raw {
        let id = *rename[r].get_or_insert_with(|| {
            out_modes.push(modes[r].clone());
            out_modes.len() - 1
        });
        labels.push(id);
    }
    Ok(ClusterResult {
        labels,
        modes: out_modes,
    })
}

const ALL_OUT: u8 = 0;
const ALL_IN: u8 = 1;
const UNDECIDED: u8 = 2;
const BOUNDARY_EPS: f64 = 1e-9;

/// One flat-kernel window scan: collects the sum and indices of all points
/// within the bandwidth of `y`, pruned by the ball cover where possible.
struct WindowScan<'a> {
    flat: &'a [f64],
    d: usize,
    min_sim: f64,
    use_balls: bool,
    ball_centers: &'a [f64],
    ball_members: &'a [Vec<u32>],
    ball_sum: &'a [Vec<f64>],
    ball_cos_r: &'a [f64],
    ball_sin_r: &'a [f64],
}

impl WindowScan<'_> {
    fn scan(&self, y: &[f64], mean: &mut [f64], neighbors: &mut Vec<u32>) {
        mean.fill(0.0);
        neighbors.clear();
        if self.use_balls {
            for b in 0..self.ball_members.len() {
                let cp = &self.ball_centers[b * self.d..(b + 1) * self.d];
                let cdot: f64 = y
                    .iter()
                    .zip(cp)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .clamp(-1.0, 1.0);
                let sin_ang = (1.0 - cdot * cdot).max(0.0).sqrt();
                let (cos_r, sin_r) = (self.ball_cos_r[b], self.ball_sin_r[b]);
                // cos(ang - r) and cos(ang + r) by angle addition; cos is
                // even, so the first form also covers ang < r.
                let cos_ang_minus_r = cdot * cos_r + sin_ang * sin_r;
                let cos_ang_plus_r = cdot * cos_r - sin_ang * sin_r;
                // cdot < cos_r keeps ang > r, where ang - r lower-bounds
                // every member's angle to y.
                if cdot < cos_r && cos_ang_minus_r < self.min_sim - BOUNDARY_EPS {
                    // Entire ball beyond the window: ang - r > theta_h.
                    continue;
                }
                // cdot >= -cos_r keeps ang + r <= pi, where the cosine
                // comparison is equivalent to the angle comparison.
                if cdot >= -cos_r && cos_ang_plus_r > self.min_sim + BOUNDARY_EPS {
                    for (m, v) in mean.iter_mut().zip(&self.ball_sum[b]) {
                        *m += v;
                    }
                    neighbors.extend_from_slice(&self.ball_members[b]);
                } else {
                    for &i in &self.ball_members[b] {
                        let p = &self.flat[i as usize * self.d..(i as usize + 1) * self.d];
                        let dot: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
                        if dot >= self.min_sim {
                            for (m, v) in mean.iter_mut().zip(p) {
                                *m += v;
                            }
                            neighbors.push(i);
                        }
                    }
                }
            }
        } else {
            for (i, p) in self.flat.chunks_exact(self.d).enumerate() {
                let dot: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
                if dot >= self.min_sim {
                    for (m, v) in mean.iter_mut().zip(p) {
                        *m += v;
                    }
                    neighbors.push(i as u32);
                }
            }
        }
    }
}

enum Start<'a> {
    /// Begin at a point; the first scan runs inside the loop.
    Seed(&'a [f64]),
    /// Begin from a precomputed first neighbor set in `neighbors`/`mean`.
    Set,
}

/// Runs one trajectory to its mode, reusing and extending the memo of
/// neighbor-set fates; returns the mode id.
fn settle(
    ws: &WindowScan<'_>,
    start: Start<'_>,
    mean: &mut Vec<f64>,
    neighbors: &mut Vec<u32>,
    memo: &mut std::collections::HashMap<Vec<u32>, u32>,
    unique_modes: &mut Vec<Vec<f64>>,
    cfg: &ClusterConfig,
) -> Result<u32> {
    let mut trail: Vec<Vec<u32>> = Vec::new();
    let mut hit: Option<u32> = None;
    let (mut y, mut need_scan, mut have_prev, mut remaining) = match start {
        Start::Seed(seed) => (seed.to_vec(), true, true, cfg.max_iterations),
        // The precomputed set counts as the first iteration; y is filled by
        // the first normalization, so no shift is measurable yet.
        Start::Set => (vec![0.0; ws.d], false, false, cfg.max_iterations - 1),
    };
    loop {
        if need_scan {
            if remaining == 0 {
                break;
            }
            remaining -= 1;
            ws.scan(&y, mean, neighbors);
        }
        debug_assert!(!neighbors.is_empty(), "a seed is always its own neighbor");
        if let Some(&id) = memo.get(neighbors.as_slice()) {
            hit = Some(id);
            break;
        }
        trail.push(neighbors.clone());
        let nm = norm(mean);
        if nm == 0.0 {
            return Err(Error::ZeroNorm {
                context: "neighborhood mean collapsed to zero (antipodal neighbors)".into(),
            });
        }
        let mut dot = 0.0;
        for (v, yv) in mean.iter_mut().zip(&y) {
            *v /= nm;
            dot += *v * *yv;
        }
        std::mem::swap(mean, &mut y);
        // Unit vectors on both sides, so the shift is 1 - dot.
        if have_prev && 1.0 - dot < cfg.convergence {
            break;
        }
        have_prev = true;
        need_scan = true;
    }
    let id = hit.unwrap_or_else(|| {
        unique_modes.push(y);
        (unique_modes.len() - 1) as u32
    });
    for set in trail {
        memo.insert(set, id);
    }
    Ok(id)
}

/// Seeds a trajectory at every point, shifts each to its density mode with a
/// flat kernel of bandwidth h, merges modes within the merge tolerance
/// (earliest seed wins), and labels each point by its nearest surviving mode.

pub fn mean_shift(points: &[Vec<f64>], cfg: &ClusterConfig) -> Result<ClusterResult> {
    cfg.validate()?;
    let d = check_unit_points(points)?;
    let n = points.len();

    // With a flat kernel the shifted position is a pure function of the
    // neighbor set, so trajectories that reach the same set share one fate.
    // Memoizing set -> converged mode makes repeated seeds of a tight
    // cluster cost one neighbor scan instead of a full trajectory.
    // Renormalized copies in one contiguous buffer so the hot loop is a
    // strided dot-product scan: for unit vectors, cosine distance is 1 - a.b.
    let mut flat: Vec<f64> = Vec::with_capacity(n * d);
    for p in points {
        let nm = norm(p);
        flat.extend(p.iter().map(|v| v / nm));
    }
    let min_sim = 1.0 - cfg.bandwidth;

    // Ball cover for exact window pruning. Leader clustering groups points
    // into balls of bounded angular radius; each scan then tests whole balls
    // with the spherical triangle inequality, accepting or rejecting all
    // members at once and falling back to per-point dots only when a ball
    // straddles the window boundary. The tests run in the cosine domain via
    // the angle-addition identity, and the epsilon cushion routes
    // near-boundary balls to the fallback, so membership is always decided
    // by the same dot comparison a plain scan would use.
    let theta_h = min_sim.clamp(-1.0, 1.0).acos();
    let lead_cos = (theta_h * 0.4).cos();
    let mut ball_center: Vec<usize> = Vec::new();
    let mut ball_members: Vec<Vec<u32>> = Vec::new();
    for i in 0..n {
        let p = &flat[i * d..(i + 1) * d];
        let mut found = None;
        for (b, &c) in ball_center.iter().enumerate() {
            let cp = &flat[c * d..(c + 1) * d];
            let dot: f64 = p.iter().zip(cp).map(|(a, b)| a * b).sum();
            if dot >= lead_cos {
                found = Some(b);
                break;
            }
        }
        match found {
            Some(b) => ball_members[b].push(i as u32),
            None => {
                ball_center.push(i);
                ball_members.push(vec![i as u32]);
            }
        }
    }
    let k_balls = ball_center.len();
    let mut ball_sum: Vec<Vec<f64>> = vec![vec![0.0; d]; k_balls];
    for (b, members) in ball_members.iter().enumerate() {
        for &m in members {
            let mp = &flat[m as usize * d..(m as usize + 1) * d];
            for (s, v) in ball_sum[b].iter_mut().zip(mp) {
                *s += v;
            }
        }
    }
    // Recenter each ball on its normalized centroid: an edge leader can
    // double the radius, and the prune tests only need some center that
    // bounds every member. Degenerate sums keep the leader point.
    let mut ball_center_vec: Vec<f64> = Vec::with_capacity(k_balls * d);
    for (b, sum) in ball_sum.iter().enumerate() {
        let nm = norm(sum);
        if nm > 0.0 {
            ball_center_vec.extend(sum.iter().map(|v| v / nm));
        } else {
            let c = ball_center[b];
            ball_center_vec.extend_from_slice(&flat[c * d..(c + 1) * d]);
        }
    }
    // cos/sin of each ball's angular radius (min member dot to the center).
    let mut ball_cos_r: Vec<f64> = vec![1.0; k_balls];
    for (b, members) in ball_members.iter().enumerate() {
        let cp = &ball_center_vec[b * d..(b + 1) * d];
        for &m in members {
            let mp = &flat[m as usize * d..(m as usize + 1) * d];
            let dot: f64 = cp.iter().zip(mp).map(|(a, b)| a * b).sum();
            ball_cos_r[b] = ball_cos_r[b].min(dot.clamp(-1.0, 1.0));
        }
    }
    let ball_sin_r: Vec<f64> = ball_cos_r
        .iter()
        .map(|c| (1.0 - c * c).max(0.0).sqrt())
        .collect();
    // A cover of mostly-singleton balls costs more than it prunes.
    let use_balls = k_balls * 2 <= n;

    // Ball-pair verdicts for the first scan of any seed in ball a: widening
    // the window test by both radii decides whole ball pairs at once. When a
    // row is fully decided, every seed in that ball gets the same first
    // neighbor set, so the entire ball shares one trajectory.
    let mut pair_verdict: Vec<u8> = vec![UNDECIDED; k_balls * k_balls];
    if use_balls {
        for a in 0..k_balls {
            let ap = &ball_center_vec[a * d..(a + 1) * d];
            for b in 0..k_balls {
                let bp = &ball_center_vec[b * d..(b + 1) * d];
                let cdot: f64 = ap
                    .iter()
                    .zip(bp)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    .clamp(-1.0, 1.0);
                let sin_ang = (1.0 - cdot * cdot).max(0.0).sqrt();
                // Combined radius m = r_a + r_b by angle addition.
                let cos_m = ball_cos_r[a] * ball_cos_r[b] - ball_sin_r[a] * ball_sin_r[b];
                let sin_m = ball_sin_r[a] * ball_cos_r[b] + ball_cos_r[a] * ball_sin_r[b];
                let cos_ang_minus_m = cdot * cos_m + sin_ang * sin_m;
                let cos_ang_plus_m = cdot * cos_m - sin_ang * sin_m;
                pair_verdict[a * k_balls + b] =
                    if cdot < cos_m && cos_ang_minus_m < min_sim - BOUNDARY_EPS {
                        ALL_OUT
                    } else if cdot >= -cos_m && cos_ang_plus_m > min_sim + BOUNDARY_EPS {
                        ALL_IN
                    } else {
                        UNDECIDED
                    };
            }
        }
    }

    let ws = WindowScan {
        flat: &flat,
        d,
        min_sim,
        use_balls,
        ball_centers: &ball_center_vec,
        ball_members: &ball_members,
        ball_sum: &ball_sum,
        ball_cos_r: &ball_cos_r,
        ball_sin_r: &ball_sin_r,
    };
    let mut memo: std::collections::HashMap<Vec<u32>, u32> = std::collections::HashMap::new();
    let mut unique_modes: Vec<Vec<f64>> = Vec::new();
    let mut mode_of: Vec<u32> = vec![0; n];
    let mut mean = vec![0.0f64; d];
    let mut neighbors: Vec<u32> = Vec::with_capacity(n);
    if use_balls {
        for a in 0..k_balls {
            let row = &pair_verdict[a * k_balls..(a + 1) * k_balls];
            if row.iter().all(|&v| v != UNDECIDED) {
                mean.fill(0.0);
                neighbors.clear();
                for (b, &v) in row.iter().enumerate() {
                    if v == ALL_IN {
                        for (m, s) in mean.iter_mut().zip(&ball_sum[b]) {
                            *m += s;
                        }
                        neighbors.extend_from_slice(&ball_members[b]);
                    }
                }
                let id = settle(
                    &ws,
                    Start::Set,
                    &mut mean,
                    &mut neighbors,
                    &mut memo,
                    &mut unique_modes,
                    cfg,
                )?;
                for &m in &ball_members[a] {
                    mode_of[m as usize] = id;
                }
            } else {
                for &m in &ball_members[a] {
                    let seed = &flat[m as usize * d..(m as usize + 1) * d];
                    let id = settle(
                        &ws,
                        Start::Seed(seed),
                        &mut mean,
                        &mut neighbors,
                        &mut memo,
                        &mut unique_modes,
                        cfg,
                    )?;
                    mode_of[m as usize] = id;
                }
            }
        }
    } else {
        for i in 0..n {
            let seed = &flat[i * d..(i + 1) * d];
            let id = settle(
                &ws,
                Start::Seed(seed),
                &mut mean,
                &mut neighbors,
                &mut memo,
                &mut unique_modes,
                cfg,
            )?;
            mode_of[i] = id;
        }
    }

    // Merge nearby modes; the earliest seed's mode represents the group.
    let k = unique_modes.len();
    let mut uf = UnionFind::new(k);
    for i in 0..k {
        for j in (i + 1)..k {
            if cosine_distance(&unique_modes[i], &unique_modes[j])? <= cfg.merge_tolerance {
                uf.union(i, j);
            }
        }
    }
    let mut surviving: Vec<Vec<f64>> = Vec::new();
    let mut root_seen: Vec<bool> = vec![false; k];
    for &id in &mode_of {
        let root = uf.find(id as usize);
        if !root_seen[root] {
            root_seen[root] = true;
            surviving.push(unique_modes[root].clone());
        }
    }

    assign_and_relabel(&flat, d, &surviving)
}

/// Independent oracle: connected components of the graph with an edge
/// between points at cosine distance <= h; modes are normalized component
/// means.
pub fn oracle_cluster(points: &[Vec<f64>], h: f64) -> Result<ClusterResult> {
    let d = check_unit_points(points)?;
    let n = points.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if cosine_distance(&points[i], &points[j])? <= h {
                uf.union(i, j);
            }
        }
    }
    let mut rename: Vec<Option<usize>> = vec![None; n];
    let mut labels = Vec::with_capacity(n);
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        let id = *rename[r].get_or_insert_with(|| {
            sums.push(vec![0.0; d]);
            sums.len() - 1
        });
        labels.push(id);
        for (s, v) in sums[id].iter_mut().zip(&points[i]) {
            *s += v;
        }
    }
    let mut modes = Vec::with_capacity(sums.len());
    for (c, sum) in sums.iter().enumerate() {
        let nm = norm(sum);
        if nm == 0.0 {
            return Err(Error::DegenerateCluster {
                cluster: c,
                context: "component mean is the zero vector".into(),
            });
        }
        modes.push(sum.iter().map(|v| v / nm).collect());
    }
    Ok(ClusterResult { labels, modes })
}

/// True when two labelings are identical up to renaming the cluster ids.
pub fn labels_equivalent(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: Vec<Option<usize>> = Vec::new();
    let mut bwd: Vec<Option<usize>> = Vec::new();
    for (&x, &y) in a.iter().zip(b) {
        if fwd.len() <= x {
            fwd.resize(x + 1, None);
        }
        if bwd.len() <= y {
            bwd.resize(y + 1, None);
        }
        match (fwd[x], bwd[y]) {
            (None, None) => {
                fwd[x] = Some(y);
                bwd[y] = Some(x);
            }
            (Some(fy), Some(bx)) if fy == y && bx == x => {}
            _ => return false,
        }
    }
    true
}
