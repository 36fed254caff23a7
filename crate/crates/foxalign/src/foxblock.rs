//! Fox Block forward pass: four stride-1 average poolings (kernels 1, 3, 5,
//! 7) concatenated along channels, then a point-wise convolution back to the
//! input channel count. Plus the two-headed stage composition producing a
//! heatmap and an embedding map.

use crate::error::{Error, Result};
use crate::tensor::{EmbeddingMap, Heatmap, Tensor};

pub const POOL_KERNELS: [usize; 4] = [1, 3, 5, 7];

/// Point-wise mixing weights of one Fox Block: [C_out = C, C_in = 4C].
#[derive(Debug, Clone, PartialEq)]
pub struct FoxBlockWeights {
    pub weights: Vec<f32>, // row-major [C, 4C]
    pub bias: Vec<f32>,    // [C]
    pub channels: usize,
}

impl FoxBlockWeights {
    pub fn new(channels: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weights.len() != channels * 4 * channels || bias.len() != channels {
            return Err(Error::ShapeMismatch(format!(
                "fox block weights expect [{channels}, {}] + bias [{channels}], got {} + {}",
                4 * channels,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            channels,
        })
    }

    /// Weights that copy the k=1 branch through unchanged.
    pub fn identity(channels: usize) -> Self {
        let mut weights = vec![0.0; channels * 4 * channels];
        for c in 0..channels {
            weights[c * 4 * channels + c] = 1.0; // k=1 branch occupies channels [0, C)
        }
        Self {
            weights,
            bias: vec![0.0; channels],
            channels,
        }
    }
}

/// The two point-wise heads: segmentation [1, C] and feature [D, C].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub seg_weights: Vec<f32>,
    pub seg_bias: f32,
    pub feat_weights: Vec<f32>, // row-major [D, C]
    pub feat_bias: Vec<f32>,    // [D]
    pub channels: usize,
    pub embed_dim: usize,
}

fn check_chw(t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.dims() {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::ShapeMismatch(format!(
            "expected [C, H, W], got {other:?}"
        ))),
    }
}

/// Same-size average pooling with odd kernel k; border windows divide by the
/// in-bounds cell count, so constants propagate exactly.
pub fn avg_pool_same(feature: &Tensor, k: usize) -> Result<Tensor> {
    if k % 2 == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "pooling kernel must be odd and positive, got {k}"
        )));
    }
    let (c, h, w) = check_chw(feature)?;
    if k == 1 {
        return Ok(feature.clone());
    }
    let r = k / 2;
    let mut out = vec![0.0f32; c * h * w];
    let src = feature.data();
    // Summed-area table per channel, in f64 to keep cancellation in check.
    let mut sat = vec![0.0f64; (h + 1) * (w + 1)];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                sat[(y + 1) * (w + 1) + (x + 1)] = f64::from(plane[y * w + x])
                    + sat[y * (w + 1) + (x + 1)]
                    + sat[(y + 1) * (w + 1) + x]
                    - sat[y * (w + 1) + x];
            }
        }
        for y in 0..h {
            let y0 = y.saturating_sub(r);
            let y1 = (y + r).min(h - 1);
            for x in 0..w {
                let x0 = x.saturating_sub(r);
                let x1 = (x + r).min(w - 1);
                let sum = sat[(y1 + 1) * (w + 1) + (x1 + 1)]
                    - sat[y0 * (w + 1) + (x1 + 1)]
                    - sat[(y1 + 1) * (w + 1) + x0]
                    + sat[y0 * (w + 1) + x0];
                let count = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
                out[(ch * h + y) * w + x] = (sum / count) as f32;
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// out[o, y, x] = bias[o] + sum_i weights[o, i] * input[i, y, x].
pub fn pointwise_conv(
    input: &Tensor,
    weights: &[f32],
    bias: &[f32],
    c_out: usize,
) -> Result<Tensor> {
    let (c_in, h, w) = check_chw(input)?;
    if weights.len() != c_out * c_in || bias.len() != c_out {
        return Err(Error::ShapeMismatch(format!(
            "pointwise conv expects weights [{c_out}, {c_in}] + bias [{c_out}], got {} + {}",
            weights.len(),
            bias.len()
        )));
    }
    let src = input.data();
    let mut out = vec![0.0f32; c_out * h * w];
    for o in 0..c_out {
        let row = &weights[o * c_in..(o + 1) * c_in];
        let plane = &mut out[o * h * w..(o + 1) * h * w];
        plane.fill(bias[o]);
        for (i, &wgt) in row.iter().enumerate() {
            if wgt == 0.0 {
                continue;
            }
            let in_plane = &src[i * h * w..(i + 1) * h * w];
            for (dst, &v) in plane.iter_mut().zip(in_plane) {
                *dst += wgt * v;
            }
        }
    }
    Tensor::new(vec![c_out, h, w], out)
}

/// One Fox Block: pool at kernels 1/3/5/7, concatenate to 4C channels,
/// point-wise mix back down to C.
pub fn fox_block_forward(feature: &Tensor, w: &FoxBlockWeights) -> Result<Tensor> {
    let (c, h, wd) = check_chw(feature)?;
    if c != w.channels {
        return Err(Error::ShapeMismatch(format!(
            "fox block built for {} channels, input has {c}",
            w.channels
        )));
    }
    let mut concat = Vec::with_capacity(4 * c * h * wd);
    for k in POOL_KERNELS {
        concat.extend_from_slice(avg_pool_same(feature, k)?.data());
    }
    let stacked = Tensor::new(vec![4 * c, h, wd], concat)?;
    pointwise_conv(&stacked, &w.weights, &w.bias, c)
}

fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

/// Applies the block stack, then both heads. The segmentation head output is
/// squashed through a logistic so the heatmap lands in [0, 1]; the feature
/// head is raw.
pub fn network_forward(
    features: &Tensor,
    blocks: &[FoxBlockWeights],
    heads: &HeadWeights,
) -> Result<(Heatmap, EmbeddingMap)> {
    let (c, _, _) = check_chw(features)?;
    if c != heads.channels {
        return Err(Error::ShapeMismatch(format!(
            "heads built for {} channels, input has {c}",
            heads.channels
        )));
    }
    let mut stage = features.clone();
    for (i, block) in blocks.iter().enumerate() {
        stage = fox_block_forward(&stage, block)
            .map_err(|e| Error::ShapeMismatch(format!("stage {i}: {e}")))?;
    }
    let seg = pointwise_conv(&stage, &heads.seg_weights, &[heads.seg_bias], 1)?;
    let (_, h, w) = check_chw(&seg)?;
    let squashed: Vec<f32> = seg.data().iter().map(|&z| sigmoid(z)).collect();
    let heatmap = Heatmap::new(Tensor::new(vec![h, w], squashed)?)?;
    let feat = pointwise_conv(&stage, &heads.feat_weights, &heads.feat_bias, heads.embed_dim)?;
    let embedding = EmbeddingMap::new(feat)?;
    Ok((heatmap, embedding))
}
