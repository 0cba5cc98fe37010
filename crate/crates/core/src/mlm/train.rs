//! MLM pretraining, classification finetuning and the Adam optimizer.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{ClassifierHead, Params, TinyMlm};
use super::ops::{log_softmax, softmax_in_place};
use crate::corpus::{Sentence, CLS, MASK};
use crate::error::{Error, Result};
use crate::masking::{apply_mask, MaskStrategy};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Epochs without dev improvement before finetuning stops.
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            early_stop_patience: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Pretraining defaults: Adam at 1e-3.
    pub fn pretrain() -> Self {
        TrainConfig::default()
    }

    /// Finetuning defaults: 10 epochs, Adam at 1e-4, early stopping.
    pub fn finetune() -> Self {
        TrainConfig {
            lr: 1e-4,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "train config needs lr > 0, epochs >= 1 and batch_size >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub struct Adam {
    m: Params,
    v: Params,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(like: &Params, cfg: &TrainConfig) -> Self {
        let mut m = like.clone();
        m.fill(0.0);
        Adam {
            v: m.clone(),
            m,
            t: 0,
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let grads = grads.named();
        for (((p, m), v), (_, g)) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grads)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
        }
    }
}

/// Adam over a plain parameter vector (the classifier head).
struct VecAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl VecAdam {
    fn new(n: usize) -> Self {
        VecAdam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            p[i] -= cfg.lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + cfg.eps);
        }
    }
}

/// A masked input and the original ids at its masked positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlmExample {
    pub input: Vec<usize>,
    pub targets: Vec<(usize, usize)>,
}

impl MlmExample {
    pub fn from_mask(sentence: &Sentence, positions: &[usize]) -> Result<Self> {
        let masked = apply_mask(sentence, positions)?;
        Ok(MlmExample {
            input: masked.ids,
            targets: positions.iter().map(|&p| (p, sentence.ids[p])).collect(),
        })
    }

    fn check(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Target("example has no masked position".into()));
        }
        for &(p, _) in &self.targets {
            if self.input.get(p) != Some(&MASK) {
                return Err(Error::Target(format!("target at unmasked position {p}")));
            }
        }
        Ok(())
    }
}

/// Mean negative log-likelihood over every masked position of the batch.
pub fn mlm_loss(model: &TinyMlm, batch: &[MlmExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in batch {
        ex.check()?;
        let tr = model.encode(&ex.input)?;
        for &(p, target) in &ex.targets {
            let lp = log_softmax(&model.logits(tr.row(p, model.dims.hidden)));
            total -= lp[target];
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Loss as in [`mlm_loss`] together with its gradient for every tensor.
pub fn mlm_loss_and_grad(model: &TinyMlm, batch: &[MlmExample]) -> Result<(f64, Params)> {
    let count: usize = batch.iter().map(|e| e.targets.len()).sum();
    let mut grads = Params::zeros(&model.dims);
    let mut total = 0.0;
    for ex in batch {
        ex.check()?;
        let tr = model.encode(&ex.input)?;
        let mut dlogits = Vec::with_capacity(ex.targets.len());
        for &(p, target) in &ex.targets {
            let mut probs = model.logits(tr.row(p, model.dims.hidden));
            let lp = log_softmax(&probs);
            total -= lp[target];
            softmax_in_place(&mut probs);
            probs[target] -= 1.0;
            probs.iter_mut().for_each(|g| *g /= count as f64);
            dlogits.push((p, probs));
        }
        let dh = model.output_backward(&tr, &dlogits, &mut grads);
        model.backward(&tr, &dh, &mut grads);
    }
    Ok((total / count as f64, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean masked-token loss per epoch.
    pub loss_curve: Vec<f64>,
    /// Mask draws that fell back to a uniform position.
    pub mask_fallbacks: usize,
}

/// Pretrains with masks drawn fresh every epoch from `strategy`.
pub fn train_mlm(
    model: &mut TinyMlm,
    corpus: &[Sentence],
    strategy: &MaskStrategy,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut adam = Adam::new(&model.params, cfg);
    let mut rng = rng::split(cfg.seed, 0x7EA1);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut report = TrainReport {
        loss_curve: Vec::with_capacity(cfg.epochs),
        mask_fallbacks: 0,
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let draw = strategy.sample_mask(&corpus[i], &mut rng)?;
                report.mask_fallbacks += draw.fallback as usize;
                batch.push(MlmExample::from_mask(&corpus[i], &draw.positions)?);
            }
            let (loss, grads) = mlm_loss_and_grad(model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam.step(&mut model.params, &grads);
            let n: usize = batch.iter().map(|e| e.targets.len()).sum();
            epoch_loss += loss * n as f64;
            epoch_count += n;
        }
        report.loss_curve.push(epoch_loss / epoch_count as f64);
    }
    Ok(report)
}

fn with_cls(s: &Sentence) -> Vec<usize> {
    if s.ids.first() == Some(&CLS) {
        s.ids.clone()
    } else {
        std::iter::once(CLS).chain(s.ids.iter().copied()).collect()
    }
}

/// Class probabilities for one sentence (`[CLS]` is prepended if missing).
pub fn classify(model: &TinyMlm, head: &ClassifierHead, s: &Sentence) -> Result<Vec<f64>> {
    let tr = model.encode(&with_cls(s))?;
    let mut z = head.logits(tr.row(0, model.dims.hidden));
    softmax_in_place(&mut z);
    Ok(z)
}

pub fn accuracy(model: &TinyMlm, head: &ClassifierHead, data: &[(Sentence, usize)]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (s, y) in data {
        let p = classify(model, head, s)?;
        let pred = p
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
            .0;
        hits += (pred == *y) as usize;
    }
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    pub head: ClassifierHead,
    pub dev_accuracy: f64,
    pub best_epoch: usize,
    pub dev_curve: Vec<f64>,
}

/// Cross-entropy finetuning of encoder and head. With `freeze_encoder` only
/// the head is trained. On return `model` holds the encoder weights of the
/// best dev epoch.
pub fn finetune(
    model: &mut TinyMlm,
    train: &[(Sentence, usize)],
    dev: &[(Sentence, usize)],
    n_classes: usize,
    cfg: &TrainConfig,
    freeze_encoder: bool,
) -> Result<FinetuneResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some((_, y)) = train.iter().chain(dev).find(|(_, y)| *y >= n_classes) {
        return Err(Error::Config(format!("label {y} outside 0..{n_classes}")));
    }
    let first = train[0].1;
    if train.iter().all(|(_, y)| *y == first) {
        return Err(Error::SingleClass);
    }
    let d = model.dims.hidden;
    let mut head = ClassifierHead::new(d, n_classes, cfg.seed);
    let mut adam = Adam::new(&model.params, cfg);
    let mut head_adam = (VecAdam::new(head.w.len()), VecAdam::new(head.b.len()));
    let mut rng = rng::split(cfg.seed, 0xF1E7);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let inputs: Vec<Vec<usize>> = train.iter().map(|(s, _)| with_cls(s)).collect();

    let eval = |m: &TinyMlm, h: &ClassifierHead| accuracy(m, h, if dev.is_empty() { train } else { dev });
    let mut best = (eval(model, &head)?, model.params.clone(), head.clone(), 0usize);
    let mut dev_curve = Vec::with_capacity(cfg.epochs);
    let mut stale = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = Params::zeros(&model.dims);
            let mut gw = vec![0.0; head.w.len()];
            let mut gb = vec![0.0; head.b.len()];
            let mut loss = 0.0;
            for &i in chunk {
                let tr = model.encode(&inputs[i])?;
                let h0 = tr.row(0, d).to_vec();
                let z = head.logits(&h0);
                let lp = log_softmax(&z);
                loss -= lp[train[i].1];
                let mut dz: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                dz[train[i].1] -= 1.0;
                dz.iter_mut().for_each(|g| *g /= chunk.len() as f64);
                let mut dh = vec![0.0; tr.len() * d];
                for k in 0..d {
                    for c in 0..n_classes {
                        gw[k * n_classes + c] += h0[k] * dz[c];
                        dh[k] += head.w[k * n_classes + c] * dz[c];
                    }
                }
                for c in 0..n_classes {
                    gb[c] += dz[c];
                }
                if !freeze_encoder {
                    model.backward(&tr, &dh, &mut grads);
                }
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            if !freeze_encoder {
                adam.step(&mut model.params, &grads);
            }
            head_adam.0.step(&mut head.w, &gw, cfg);
            head_adam.1.step(&mut head.b, &gb, cfg);
        }
        let acc = eval(model, &head)?;
        dev_curve.push(acc);
        if acc > best.0 {
            best = (acc, model.params.clone(), head.clone(), epoch + 1);
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.early_stop_patience {
                break;
            }
        }
    }
    let (dev_accuracy, params, head, best_epoch) = best;
    model.params = params;
    Ok(FinetuneResult {
        head,
        dev_accuracy,
        best_epoch,
        dev_curve,
    })
}
