//! Pre-LN transformer encoder with tied input/output embeddings and a hand
//! written backward pass.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::{
    add_at_b, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, matmul, matmul_bt,
    softmax_in_place,
};
use crate::corpus::PAD;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    pub layers: usize,
    pub max_len: usize,
}

impl Dims {
    /// Two layers, hidden and intermediate size 64, two heads.
    pub fn small(vocab: usize, max_len: usize) -> Self {
        Dims {
            vocab,
            hidden: 64,
            heads: 2,
            ffn: 64,
            layers: 2,
            max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.hidden == 0 || self.heads == 0 || self.ffn == 0 {
            return Err(Error::Config(format!("degenerate model dims {self:?}")));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config("hidden size must be divisible by heads".into()));
        }
        if self.layers == 0 || self.max_len == 0 {
            return Err(Error::Config("layers and max_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Vec<f64>,
    pub ln1_b: Vec<f64>,
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
    pub ln2_g: Vec<f64>,
    pub ln2_b: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Every trainable tensor. Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `vocab × hidden`; also the output projection.
    pub tok_emb: Vec<f64>,
    pub pos_emb: Vec<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Vec<f64>,
    pub lnf_b: Vec<f64>,
    pub out_bias: Vec<f64>,
}

impl Params {
    pub fn zeros(d: &Dims) -> Self {
        let z = |n| vec![0.0; n];
        let h = d.hidden;
        Params {
            tok_emb: z(d.vocab * h),
            pos_emb: z(d.max_len * h),
            layers: (0..d.layers)
                .map(|_| LayerParams {
                    ln1_g: z(h),
                    ln1_b: z(h),
                    wq: z(h * h),
                    wk: z(h * h),
                    wv: z(h * h),
                    wo: z(h * h),
                    ln2_g: z(h),
                    ln2_b: z(h),
                    w1: z(h * d.ffn),
                    b1: z(d.ffn),
                    w2: z(d.ffn * h),
                    b2: z(h),
                })
                .collect(),
            lnf_g: z(h),
            lnf_b: z(h),
            out_bias: z(d.vocab),
        }
    }

    /// Tensors in their declared (checkpoint) order.
    pub fn named(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = vec![
            ("tok_emb".to_string(), &self.tok_emb),
            ("pos_emb".to_string(), &self.pos_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, t) in [
                ("ln1_g", &l.ln1_g),
                ("ln1_b", &l.ln1_b),
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("ln2_g", &l.ln2_g),
                ("ln2_b", &l.ln2_b),
                ("w1", &l.w1),
                ("b1", &l.b1),
                ("w2", &l.w2),
                ("b2", &l.b2),
            ] {
                out.push((format!("layer{i}.{n}"), t));
            }
        }
        out.push(("lnf_g".into(), &self.lnf_g));
        out.push(("lnf_b".into(), &self.lnf_b));
        out.push(("out_bias".into(), &self.out_bias));
        out
    }

    /// Same order as [`Params::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.tok_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            out.extend([
                &mut l.ln1_g,
                &mut l.ln1_b,
                &mut l.wq,
                &mut l.wk,
                &mut l.wv,
                &mut l.wo,
                &mut l.ln2_g,
                &mut l.ln2_b,
                &mut l.w1,
                &mut l.b1,
                &mut l.w2,
                &mut l.b2,
            ]);
        }
        out.extend([&mut self.lnf_g, &mut self.lnf_b, &mut self.out_bias]);
        out
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.named()) {
            for (x, y) in a.iter_mut().zip(b.1) {
                *x += scale * y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyMlm {
    pub dims: Dims,
    pub params: Params,
}

/// Linear map from the `[CLS]` position's final hidden state to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub n_classes: usize,
    pub hidden: usize,
    /// `hidden × n_classes`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl ClassifierHead {
    pub fn new(hidden: usize, n_classes: usize, seed: u64) -> Self {
        let mut r = rng::split(seed, 0xC1A5);
        let n = Normal::new(0.0, 0.02).unwrap();
        ClassifierHead {
            n_classes,
            hidden,
            w: (0..hidden * n_classes).map(|_| n.sample(&mut r)).collect(),
            b: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        for (c, zc) in z.iter_mut().enumerate() {
            for (k, hk) in h.iter().enumerate() {
                *zc += hk * self.w[k * self.n_classes + c];
            }
        }
        z
    }
}

struct LayerTrace {
    xhat1: Vec<f64>,
    rstd1: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `heads × len × len`
    probs: Vec<f64>,
    ctx: Vec<f64>,
    xhat2: Vec<f64>,
    rstd2: Vec<f64>,
    m: Vec<f64>,
    u: Vec<f64>,
    act: Vec<f64>,
}

/// Activations of one forward pass, kept for the backward pass.
pub struct Trace {
    ids: Vec<usize>,
    layers: Vec<LayerTrace>,
    xhatf: Vec<f64>,
    rstdf: Vec<f64>,
    /// final hidden states, `len × hidden`
    pub hidden: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, t: usize, d: usize) -> &[f64] {
        &self.hidden[t * d..(t + 1) * d]
    }
}

impl TinyMlm {
    /// Random init: embeddings `N(0, 0.02²)`, projections scaled by fan-in,
    /// unit layer-norm gains, zero biases.
    pub fn new(dims: Dims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut p = Params::zeros(&dims);
        let mut r = rng::split(seed, 0x004D_4C4D);
        let mut fill = |t: &mut Vec<f64>, std: f64| {
            let n = Normal::new(0.0, std).unwrap();
            t.iter_mut().for_each(|x| *x = n.sample(&mut r));
        };
        let h = dims.hidden as f64;
        let resid = (2.0 * dims.layers as f64).sqrt();
        fill(&mut p.tok_emb, 0.02);
        fill(&mut p.pos_emb, 0.02);
        for l in &mut p.layers {
            fill(&mut l.wq, 1.0 / h.sqrt());
            fill(&mut l.wk, 1.0 / h.sqrt());
            fill(&mut l.wv, 1.0 / h.sqrt());
            fill(&mut l.wo, 1.0 / h.sqrt() / resid);
            fill(&mut l.w1, 1.0 / h.sqrt());
            fill(&mut l.w2, 1.0 / (dims.ffn as f64).sqrt() / resid);
            l.ln1_g.iter_mut().for_each(|x| *x = 1.0);
            l.ln2_g.iter_mut().for_each(|x| *x = 1.0);
        }
        p.lnf_g.iter_mut().for_each(|x| *x = 1.0);
        Ok(TinyMlm { dims, params: p })
    }

    pub fn check_input(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptySentence);
        }
        if ids.len() > self.dims.max_len {
            return Err(Error::TooLong {
                len: ids.len(),
                max_len: self.dims.max_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.dims.vocab) {
            return Err(Error::OutOfRange {
                pos: bad,
                len: self.dims.vocab,
            });
        }
        if ids.iter().all(|&i| i == PAD) {
            return Err(Error::EmptySentence);
        }
        Ok(())
    }

    /// Runs the encoder. `[PAD]` positions are excluded as attention keys.
    pub fn encode(&self, ids: &[usize]) -> Result<Trace> {
        self.check_input(ids)?;
        let Dims {
            hidden: d,
            heads,
            ffn,
            ..
        } = self.dims;
        let n = ids.len();
        let p = &self.params;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut x = vec![0.0; n * d];
        for (t, &id) in ids.iter().enumerate() {
            for c in 0..d {
                x[t * d + c] = p.tok_emb[id * d + c] + p.pos_emb[t * d + c];
            }
        }

        let mut layers = Vec::with_capacity(p.layers.len());
        for lp in &p.layers {
            let mut xhat1 = vec![0.0; n * d];
            let mut a = vec![0.0; n * d];
            let rstd1 = layer_norm(&x, &lp.ln1_g, &lp.ln1_b, d, &mut xhat1, &mut a);
            let mut q = vec![0.0; n * d];
            let mut k = vec![0.0; n * d];
            let mut v = vec![0.0; n * d];
            matmul(&a, &lp.wq, n, d, d, &mut q);
            matmul(&a, &lp.wk, n, d, d, &mut k);
            matmul(&a, &lp.wv, n, d, d, &mut v);

            let mut probs = vec![0.0; heads * n * n];
            let mut ctx = vec![0.0; n * d];
            for h in 0..heads {
                let hs = h * dh..(h + 1) * dh;
                for t in 0..n {
                    let row = &mut probs[(h * n + t) * n..(h * n + t + 1) * n];
                    let qt = &q[t * d..(t + 1) * d][hs.clone()];
                    for s in 0..n {
                        row[s] = if ids[s] == PAD {
                            f64::NEG_INFINITY
                        } else {
                            dot(qt, &k[s * d..(s + 1) * d][hs.clone()]) * scale
                        };
                    }
                    softmax_in_place(row);
                    let out = &mut ctx[t * d + h * dh..t * d + (h + 1) * dh];
                    for s in 0..n {
                        let w = row[s];
                        if w == 0.0 {
                            continue;
                        }
                        for (o, vv) in out.iter_mut().zip(&v[s * d + h * dh..s * d + (h + 1) * dh])
                        {
                            *o += w * vv;
                        }
                    }
                }
            }
            let mut o = vec![0.0; n * d];
            matmul(&ctx, &lp.wo, n, d, d, &mut o);
            for (xi, oi) in x.iter_mut().zip(&o) {
                *xi += oi;
            }

            let mut xhat2 = vec![0.0; n * d];
            let mut m = vec![0.0; n * d];
            let rstd2 = layer_norm(&x, &lp.ln2_g, &lp.ln2_b, d, &mut xhat2, &mut m);
            let mut u = vec![0.0; n * ffn];
            matmul(&m, &lp.w1, n, d, ffn, &mut u);
            for t in 0..n {
                for (uj, bj) in u[t * ffn..(t + 1) * ffn].iter_mut().zip(&lp.b1) {
                    *uj += bj;
                }
            }
            let act: Vec<f64> = u.iter().map(|&z| gelu(z)).collect();
            let mut y = vec![0.0; n * d];
            matmul(&act, &lp.w2, n, ffn, d, &mut y);
            for t in 0..n {
                for c in 0..d {
                    x[t * d + c] += y[t * d + c] + lp.b2[c];
                }
            }
            layers.push(LayerTrace {
                xhat1,
                rstd1,
                a,
                q,
                k,
                v,
                probs,
                ctx,
                xhat2,
                rstd2,
                m,
                u,
                act,
            });
        }
        let mut xhatf = vec![0.0; n * d];
        let mut hidden = vec![0.0; n * d];
        let rstdf = layer_norm(&x, &p.lnf_g, &p.lnf_b, d, &mut xhatf, &mut hidden);
        Ok(Trace {
            ids: ids.to_vec(),
            layers,
            xhatf,
            rstdf,
            hidden,
        })
    }

    /// Vocabulary logits from a final hidden row.
    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        let d = self.dims.hidden;
        (0..self.dims.vocab)
            .map(|w| dot(h, &self.params.tok_emb[w * d..(w + 1) * d]) + self.params.out_bias[w])
            .collect()
    }

    pub fn probs_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let mut z = self.logits(h);
        softmax_in_place(&mut z);
        z
    }

    /// Output distribution at every position.
    pub fn forward_mlm(&self, ids: &[usize]) -> Result<Vec<Vec<f64>>> {
        let tr = self.encode(ids)?;
        let d = self.dims.hidden;
        Ok((0..ids.len())
            .map(|t| self.probs_from_hidden(tr.row(t, d)))
            .collect())
    }

    /// Output distribution at one position.
    pub fn probs_at(&self, ids: &[usize], pos: usize) -> Result<Vec<f64>> {
        if pos >= ids.len() {
            return Err(Error::OutOfRange {
                pos,
                len: ids.len(),
            });
        }
        let tr = self.encode(ids)?;
        Ok(self.probs_from_hidden(tr.row(pos, self.dims.hidden)))
    }

    /// Backpropagates `d_logits` at selected positions through the tied
    /// output projection. Adds into `grads` and returns the gradient with
    /// respect to the final hidden states.
    pub fn output_backward(
        &self,
        trace: &Trace,
        d_logits: &[(usize, Vec<f64>)],
        grads: &mut Params,
    ) -> Vec<f64> {
        let d = self.dims.hidden;
        let mut dhidden = vec![0.0; trace.len() * d];
        for (t, dz) in d_logits {
            let h = trace.row(*t, d);
            for (w, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads.out_bias[w] += g;
                let e = &self.params.tok_emb[w * d..(w + 1) * d];
                let de = &mut grads.tok_emb[w * d..(w + 1) * d];
                let dh = &mut dhidden[t * d..(t + 1) * d];
                for c in 0..d {
                    de[c] += g * h[c];
                    dh[c] += g * e[c];
                }
            }
        }
        dhidden
    }

    /// Backward pass from the gradient of the final hidden states.
    pub fn backward(&self, trace: &Trace, dhidden: &[f64], grads: &mut Params) {
        let Dims {
            hidden: d,
            heads,
            ffn,
            ..
        } = self.dims;
        let n = trace.len();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let p = &self.params;

        let mut dx = vec![0.0; n * d];
        layer_norm_backward(
            dhidden,
            &trace.xhatf,
            &trace.rstdf,
            &p.lnf_g,
            d,
            &mut grads.lnf_g,
            &mut grads.lnf_b,
            &mut dx,
        );

        for (li, (lp, lt)) in p.layers.iter().zip(&trace.layers).enumerate().rev() {
            let g = &mut grads.layers[li];
            // feed-forward block: x_out = x_mid + W2·gelu(W1·LN2(x_mid) + b1) + b2
            for t in 0..n {
                for c in 0..d {
                    g.b2[c] += dx[t * d + c];
                }
            }
            add_at_b(&lt.act, &dx, n, ffn, d, &mut g.w2);
            let mut dact = vec![0.0; n * ffn];
            matmul_bt(&dx, &lp.w2, n, ffn, d, &mut dact);
            let du: Vec<f64> = dact
                .iter()
                .zip(&lt.u)
                .map(|(da, &u)| da * gelu_grad(u))
                .collect();
            for t in 0..n {
                for j in 0..ffn {
                    g.b1[j] += du[t * ffn + j];
                }
            }
            add_at_b(&lt.m, &du, n, d, ffn, &mut g.w1);
            let mut dm = vec![0.0; n * d];
            matmul_bt(&du, &lp.w1, n, d, ffn, &mut dm);
            // dx now holds d(x_mid) via the residual; add the LN2 path
            layer_norm_backward(
                &dm,
                &lt.xhat2,
                &lt.rstd2,
                &lp.ln2_g,
                d,
                &mut g.ln2_g,
                &mut g.ln2_b,
                &mut dx,
            );

            // attention block: x_mid = x_in + Wo·attn(LN1(x_in))
            add_at_b(&lt.ctx, &dx, n, d, d, &mut g.wo);
            let mut dctx = vec![0.0; n * d];
            matmul_bt(&dx, &lp.wo, n, d, d, &mut dctx);
            let mut dq = vec![0.0; n * d];
            let mut dk = vec![0.0; n * d];
            let mut dv = vec![0.0; n * d];
            let mut dp = vec![0.0; n];
            for h in 0..heads {
                let hs = h * dh..(h + 1) * dh;
                for t in 0..n {
                    let row = &lt.probs[(h * n + t) * n..(h * n + t + 1) * n];
                    let dct = &dctx[t * d..(t + 1) * d][hs.clone()];
                    let mut acc = 0.0;
                    for s in 0..n {
                        if row[s] == 0.0 {
                            dp[s] = 0.0;
                            continue;
                        }
                        dp[s] = dot(dct, &lt.v[s * d..(s + 1) * d][hs.clone()]);
                        acc += row[s] * dp[s];
                        for (dvv, &c) in dv[s * d + h * dh..s * d + (h + 1) * dh]
                            .iter_mut()
                            .zip(dct)
                        {
                            *dvv += row[s] * c;
                        }
                    }
                    for s in 0..n {
                        let ds = row[s] * (dp[s] - acc) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for c in hs.clone() {
                            dq[t * d + c] += ds * lt.k[s * d + c];
                            dk[s * d + c] += ds * lt.q[t * d + c];
                        }
                    }
                }
            }
            add_at_b(&lt.a, &dq, n, d, d, &mut g.wq);
            add_at_b(&lt.a, &dk, n, d, d, &mut g.wk);
            add_at_b(&lt.a, &dv, n, d, d, &mut g.wv);
            let mut da = vec![0.0; n * d];
            let mut tmp = vec![0.0; n * d];
            for (dmat, w) in [(&dq, &lp.wq), (&dk, &lp.wk), (&dv, &lp.wv)] {
                matmul_bt(dmat, w, n, d, d, &mut tmp);
                for (a, t) in da.iter_mut().zip(&tmp) {
                    *a += t;
                }
            }
            layer_norm_backward(
                &da,
                &lt.xhat1,
                &lt.rstd1,
                &lp.ln1_g,
                d,
                &mut g.ln1_g,
                &mut g.ln1_b,
                &mut dx,
            );
        }

        for (t, &id) in trace.ids.iter().enumerate() {
            for c in 0..d {
                grads.tok_emb[id * d + c] += dx[t * d + c];
                grads.pos_emb[t * d + c] += dx[t * d + c];
            }
        }
    }
}

impl TinyMlm {
    /// Output distribution at `pos` without keeping activations. The last
    /// layer is evaluated only at `pos`.
    pub fn predict_position(&self, ids: &[usize], pos: usize) -> Result<Vec<f64>> {
        self.check_input(ids)?;
        if pos >= ids.len() {
            return Err(Error::OutOfRange {
                pos,
                len: ids.len(),
            });
        }
        let Dims {
            hidden: d,
            heads,
            ffn,
            ..
        } = self.dims;
        let n = ids.len();
        let p = &self.params;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut x = vec![0.0; n * d];
        for (t, &id) in ids.iter().enumerate() {
            for c in 0..d {
                x[t * d + c] = p.tok_emb[id * d + c] + p.pos_emb[t * d + c];
            }
        }
        let mut xhat = vec![0.0; n * d];
        let mut a = vec![0.0; n * d];
        let mut q = vec![0.0; n * d];
        let mut k = vec![0.0; n * d];
        let mut v = vec![0.0; n * d];
        let mut ctx = vec![0.0; n * d];
        let mut o = vec![0.0; n * d];
        let mut m = vec![0.0; n * d];
        let mut u = vec![0.0; n * ffn];
        let mut y = vec![0.0; n * d];
        let mut row = vec![0.0; n];
        let last = p.layers.len() - 1;
        for (li, lp) in p.layers.iter().enumerate() {
            // rows whose outputs are still needed downstream
            let (r0, r1) = if li == last { (pos, pos + 1) } else { (0, n) };
            let rows = r1 - r0;
            layer_norm(&x, &lp.ln1_g, &lp.ln1_b, d, &mut xhat, &mut a);
            matmul(&a[r0 * d..r1 * d], &lp.wq, rows, d, d, &mut q[r0 * d..r1 * d]);
            matmul(&a, &lp.wk, n, d, d, &mut k);
            matmul(&a, &lp.wv, n, d, d, &mut v);
            ctx[r0 * d..r1 * d].iter_mut().for_each(|c| *c = 0.0);
            for h in 0..heads {
                for t in r0..r1 {
                    let qt = &q[t * d + h * dh..t * d + (h + 1) * dh];
                    for s in 0..n {
                        row[s] = if ids[s] == PAD {
                            f64::NEG_INFINITY
                        } else {
                            dot(qt, &k[s * d + h * dh..s * d + (h + 1) * dh]) * scale
                        };
                    }
                    softmax_in_place(&mut row);
                    for s in 0..n {
                        if row[s] == 0.0 {
                            continue;
                        }
                        for c in 0..dh {
                            ctx[t * d + h * dh + c] += row[s] * v[s * d + h * dh + c];
                        }
                    }
                }
            }
            matmul(&ctx[r0 * d..r1 * d], &lp.wo, rows, d, d, &mut o[r0 * d..r1 * d]);
            for i in r0 * d..r1 * d {
                x[i] += o[i];
            }
            layer_norm(
                &x[r0 * d..r1 * d],
                &lp.ln2_g,
                &lp.ln2_b,
                d,
                &mut xhat[r0 * d..r1 * d],
                &mut m[r0 * d..r1 * d],
            );
            matmul(&m[r0 * d..r1 * d], &lp.w1, rows, d, ffn, &mut u[r0 * ffn..r1 * ffn]);
            for t in r0..r1 {
                for j in 0..ffn {
                    u[t * ffn + j] = gelu(u[t * ffn + j] + lp.b1[j]);
                }
            }
            matmul(&u[r0 * ffn..r1 * ffn], &lp.w2, rows, ffn, d, &mut y[r0 * d..r1 * d]);
            for t in r0..r1 {
                for c in 0..d {
                    x[t * d + c] += y[t * d + c] + lp.b2[c];
                }
            }
        }
        let mut h = vec![0.0; d];
        let mut hh = vec![0.0; d];
        layer_norm(&x[pos * d..(pos + 1) * d], &p.lnf_g, &p.lnf_b, d, &mut hh, &mut h);
        Ok(self.probs_from_hidden(&h))
    }
}
