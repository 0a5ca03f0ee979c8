//! Post-norm transformer encoder over the frame sequence.
//!
//! Token layout per sample: `[CLS, OCC?, frame_0 .. frame_{T-1}]`. The OCC
//! token is a projection of the occupancy embedding and is present only for
//! feature sets with a map. The CLS output feeds the heads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, ModelInput};
use crate::models::common::{dropout, Linear, N_LOGITS};
use crate::models::conv::{OccEncoder, OCC_EMBEDDING};
use crate::nn::{Graph, ParamId, ParamSet, Tensor, Var};
use crate::observation::WINDOW_FRAMES;

pub const MODEL_DIM: usize = 16;
pub const HEADS: usize = 4;
pub const FF_DIM: usize = 32;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayer {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub set: FeatureSet,
    pub dim: usize,
    pub heads: usize,
    pub in_width: usize,
    pub frames: usize,
    pub embed: Linear,
    pub pos: ParamId,
    pub cls: ParamId,
    pub occ: Option<(OccEncoder, Linear)>,
    pub layers: Vec<EncoderLayer>,
    pub head: Linear,
    pub dropout: f64,
}

/// Softmax attention of `q` over `k`/`v` (each `tokens x d_head`). Returns
/// the attended values and the attention weights.
pub fn scaled_dot_attention(g: &mut Graph, q: Var, k: Var, v: Var) -> (Var, Var) {
    let d = g.value(q).cols();
    let kt = g.transpose(k);
    let s = g.matmul(q, kt);
    let s = g.scale(s, 1.0 / (d as f64).sqrt());
    let w = g.softmax_rows(s);
    (g.matmul(w, v), w)
}

impl Transformer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamSet,
        set: FeatureSet,
        crop_cells: usize,
        dim: usize,
        heads: usize,
        ff: usize,
        layers: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::Config(format!("model width {dim} is not divisible by {heads} heads")));
        }
        let in_width = set.dense_channels().len();
        let embed = Linear::new(ps, "tf.embed", in_width, dim, rng);
        let pos = ps.add_normal("tf.pos", WINDOW_FRAMES, dim, 0.02, rng);
        let cls = ps.add_normal("tf.cls", 1, dim, 0.02, rng);
        let occ = set.uses_occupancy().then(|| {
            let enc = OccEncoder::new(ps, crop_cells, rng);
            let proj = Linear::new(ps, "tf.occ_token", OCC_EMBEDDING, dim, rng);
            (enc, proj)
        });
        let layers = (0..layers)
            .map(|l| {
                let n = |s: &str| format!("tf.l{l}.{s}");
                EncoderLayer {
                    q: Linear::new(ps, &n("q"), dim, dim, rng),
                    k: Linear::new(ps, &n("k"), dim, dim, rng),
                    v: Linear::new(ps, &n("v"), dim, dim, rng),
                    o: Linear::new(ps, &n("o"), dim, dim, rng),
                    ln1_g: ps.add_ones(&n("ln1.g"), 1, dim),
                    ln1_b: ps.add_zeros(&n("ln1.b"), 1, dim),
                    ff1: Linear::new(ps, &n("ff1"), dim, ff, rng),
                    ff2: Linear::new(ps, &n("ff2"), ff, dim, rng),
                    ln2_g: ps.add_ones(&n("ln2.g"), 1, dim),
                    ln2_b: ps.add_zeros(&n("ln2.b"), 1, dim),
                }
            })
            .collect();
        let head = Linear::new(ps, "tf.head", dim, N_LOGITS, rng);
        Ok(Transformer { set, dim, heads, in_width, frames: WINDOW_FRAMES, embed, pos, cls, occ, layers, head, dropout })
    }

    pub fn tokens(&self) -> usize {
        1 + usize::from(self.occ.is_some()) + self.frames
    }

    /// Encoder output for all tokens, `(batch * tokens) x dim`, plus the
    /// attention weights of every layer and head (`tokens x tokens`, per
    /// sample) when `keep_attention` is set.
    pub fn encode(
        &self,
        g: &mut Graph,
        inputs: &[&ModelInput],
        mut rng: Option<&mut ChaCha8Rng>,
        keep_attention: bool,
    ) -> Result<(Var, Vec<Var>)> {
        let b = inputs.len();
        let mut data = Vec::with_capacity(b * self.frames * self.in_width);
        for x in inputs {
            if x.set != self.set || x.frames != self.frames || x.width != self.in_width {
                return Err(Error::LengthMismatch {
                    what: "transformer input",
                    expected: self.frames * self.in_width,
                    actual: x.frames * x.width,
                });
            }
            data.extend_from_slice(&x.seq);
        }
        let x = g.input(Tensor::from_vec(b * self.frames, self.in_width, data));
        let e = self.embed.forward(g, x);
        let pos = g.param(self.pos);
        let pos = g.tile_rows(pos, b);
        let frames = g.add(e, pos);
        let cls = g.param(self.cls);
        let occ_tokens = match &self.occ {
            Some((enc, proj)) => {
                let crops: Vec<&[f64]> = inputs.iter().map(|x| x.crop.as_deref().expect("occupancy crop")).collect();
                let o = enc.forward(g, &crops);
                Some(proj.forward(g, o))
            }
            None => None,
        };
        let mut parts = Vec::with_capacity(b * 3);
        for i in 0..b {
            parts.push(cls);
            if let Some(o) = occ_tokens {
                parts.push(g.slice_rows(o, i, 1));
            }
            parts.push(g.slice_rows(frames, i * self.frames, self.frames));
        }
        let mut h = g.concat_rows(&parts);

        let t = self.tokens();
        let dh = self.dim / self.heads;
        let mut attention = Vec::new();
        for layer in &self.layers {
            let q = layer.q.forward(g, h);
            let k = layer.k.forward(g, h);
            let v = layer.v.forward(g, h);
            let mut per_sample = Vec::with_capacity(b);
            for i in 0..b {
                let (qs, ks, vs) = (g.slice_rows(q, i * t, t), g.slice_rows(k, i * t, t), g.slice_rows(v, i * t, t));
                let mut heads = Vec::with_capacity(self.heads);
                for hd in 0..self.heads {
                    let qh = g.slice_cols(qs, hd * dh, dh);
                    let kh = g.slice_cols(ks, hd * dh, dh);
                    let vh = g.slice_cols(vs, hd * dh, dh);
                    let (out, w) = scaled_dot_attention(g, qh, kh, vh);
                    if keep_attention {
                        attention.push(w);
                    }
                    heads.push(out);
                }
                per_sample.push(g.concat_cols(&heads));
            }
            let att = g.concat_rows(&per_sample);
            let att = layer.o.forward(g, att);
            let att = dropout(g, att, self.dropout, rng.as_deref_mut());
            let r = g.add(h, att);
            let (g1, b1) = (g.param(layer.ln1_g), g.param(layer.ln1_b));
            h = g.layer_norm(r, g1, b1, LN_EPS);

            let f = layer.ff1.forward(g, h);
            let f = g.relu(f);
            let f = layer.ff2.forward(g, f);
            let f = dropout(g, f, self.dropout, rng.as_deref_mut());
            let r = g.add(h, f);
            let (g2, b2) = (g.param(layer.ln2_g), g.param(layer.ln2_b));
            h = g.layer_norm(r, g2, b2, LN_EPS);
        }
        Ok((h, attention))
    }

    pub fn forward(&self, g: &mut Graph, inputs: &[&ModelInput], mut rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let (h, _) = self.encode(g, inputs, rng.as_deref_mut(), false)?;
        let t = self.tokens();
        let rows: Vec<Var> = (0..inputs.len()).map(|i| g.slice_rows(h, i * t, 1)).collect();
        let cls = g.concat_rows(&rows);
        let cls = dropout(g, cls, self.dropout, rng);
        Ok(self.head.forward(g, cls))
    }
}
