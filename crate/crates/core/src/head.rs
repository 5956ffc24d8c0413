//! Inference-only pre-norm transformer encoder and linear softmax classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alert::Snapshot;
use crate::archive::{Tensor, WeightArchive};
use crate::error::{Error, Result};

const LN_EPS: f32 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadConfig {
    pub layers: usize,
    pub heads: usize,
    pub token_width: usize,
    pub mlp_ratio: usize,
    pub num_classes: usize,
    pub use_class_token: bool,
    pub final_norm: bool,
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.token_width == 0 || self.mlp_ratio == 0 {
            return Err(Error::Config(format!("invalid head shape {self:?}")));
        }
        if !self.token_width.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "token width {} not divisible by {} heads",
                self.token_width, self.heads
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("head needs at least 2 classes".into()));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.token_width * self.mlp_ratio
    }
}

/// Dense `out x in` layer, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn random(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f32).sqrt();
        let mut l = Linear::zeros(inputs, outputs);
        l.weight.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        l.bias.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        l
    }

    pub fn apply(&self, x: &[f32], out: &mut [f32]) {
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            *y = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f32>();
        }
    }

    fn write_to(&self, a: &mut WeightArchive, name: &str) -> Result<()> {
        a.insert(format!("{name}.weight"), Tensor::matrix(self.outputs, self.inputs, self.weight.clone())?);
        a.insert(format!("{name}.bias"), Tensor::vector(self.bias.clone()));
        Ok(())
    }

    fn read_from(a: &WeightArchive, name: &str, inputs: usize, outputs: usize) -> Result<Self> {
        Ok(Linear {
            inputs,
            outputs,
            weight: a.expect(&format!("{name}.weight"), &[outputs, inputs])?.data.clone(),
            bias: a.expect(&format!("{name}.bias"), &[outputs])?.data.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LayerNorm {
    pub fn identity(width: usize) -> Self {
        LayerNorm {
            weight: vec![1.0; width],
            bias: vec![0.0; width],
        }
    }

    pub fn apply(&self, x: &[f32], out: &mut [f32]) {
        let n = x.len() as f32;
        let mean = x.iter().sum::<f32>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for (i, y) in out.iter_mut().enumerate() {
            *y = (x[i] - mean) * inv * self.weight[i] + self.bias[i];
        }
    }

    fn write_to(&self, a: &mut WeightArchive, name: &str) {
        a.insert(format!("{name}.weight"), Tensor::vector(self.weight.clone()));
        a.insert(format!("{name}.bias"), Tensor::vector(self.bias.clone()));
    }

    fn read_from(a: &WeightArchive, name: &str, width: usize) -> Result<Self> {
        Ok(LayerNorm {
            weight: a.expect(&format!("{name}.weight"), &[width])?.data.clone(),
            bias: a.expect(&format!("{name}.bias"), &[width])?.data.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    /// Rows `0..c` project queries, `c..2c` keys, `2c..3c` values.
    pub qkv: Linear,
    pub attn_out: Linear,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub layers: Vec<EncoderLayer>,
    pub cls_token: Option<Vec<f32>>,
    pub final_norm: Option<LayerNorm>,
    pub classifier: Linear,
}

impl HeadWeights {
    pub fn zeros(cfg: &HeadConfig) -> Self {
        let c = cfg.token_width;
        let h = cfg.hidden();
        HeadWeights {
            layers: (0..cfg.layers)
                .map(|_| EncoderLayer {
                    ln1: LayerNorm::identity(c),
                    qkv: Linear::zeros(c, 3 * c),
                    attn_out: Linear::zeros(c, c),
                    ln2: LayerNorm::identity(c),
                    ff1: Linear::zeros(c, h),
                    ff2: Linear::zeros(h, c),
                })
                .collect(),
            cls_token: cfg.use_class_token.then(|| vec![0.0; c]),
            final_norm: cfg.final_norm.then(|| LayerNorm::identity(c)),
            classifier: Linear::zeros(c, cfg.num_classes),
        }
    }

    pub fn random(cfg: &HeadConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cfg.token_width;
        let h = cfg.hidden();
        let layers = (0..cfg.layers)
            .map(|_| EncoderLayer {
                ln1: LayerNorm::identity(c),
                qkv: Linear::random(c, 3 * c, &mut rng),
                attn_out: Linear::random(c, c, &mut rng),
                ln2: LayerNorm::identity(c),
                ff1: Linear::random(c, h, &mut rng),
                ff2: Linear::random(h, c, &mut rng),
            })
            .collect();
        let cls_token = cfg
            .use_class_token
            .then(|| (0..c).map(|_| rng.random_range(-0.02f32..0.02)).collect());
        HeadWeights {
            layers,
            cls_token,
            final_norm: cfg.final_norm.then(|| LayerNorm::identity(c)),
            classifier: Linear::random(c, cfg.num_classes, &mut rng),
        }
    }

    pub fn write_to(&self, a: &mut WeightArchive) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            let p = format!("head.layer{i}");
            l.ln1.write_to(a, &format!("{p}.ln1"));
            l.qkv.write_to(a, &format!("{p}.qkv"))?;
            l.attn_out.write_to(a, &format!("{p}.attn_out"))?;
            l.ln2.write_to(a, &format!("{p}.ln2"));
            l.ff1.write_to(a, &format!("{p}.ff1"))?;
            l.ff2.write_to(a, &format!("{p}.ff2"))?;
        }
        if let Some(cls) = &self.cls_token {
            a.insert("head.cls_token", Tensor::vector(cls.clone()));
        }
        if let Some(n) = &self.final_norm {
            n.write_to(a, "head.final_norm");
        }
        self.classifier.write_to(a, "head.classifier")
    }

    pub fn read_from(cfg: &HeadConfig, a: &WeightArchive) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.token_width;
        let h = cfg.hidden();
        let layers = (0..cfg.layers)
            .map(|i| {
                let p = format!("head.layer{i}");
                Ok(EncoderLayer {
                    ln1: LayerNorm::read_from(a, &format!("{p}.ln1"), c)?,
                    qkv: Linear::read_from(a, &format!("{p}.qkv"), c, 3 * c)?,
                    attn_out: Linear::read_from(a, &format!("{p}.attn_out"), c, c)?,
                    ln2: LayerNorm::read_from(a, &format!("{p}.ln2"), c)?,
                    ff1: Linear::read_from(a, &format!("{p}.ff1"), c, h)?,
                    ff2: Linear::read_from(a, &format!("{p}.ff2"), h, c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cls_token = if cfg.use_class_token {
            Some(a.expect("head.cls_token", &[c])?.data.clone())
        } else {
            None
        };
        let final_norm = if cfg.final_norm {
            Some(LayerNorm::read_from(a, "head.final_norm", c)?)
        } else {
            None
        };
        Ok(HeadWeights {
            layers,
            cls_token,
            final_norm,
            classifier: Linear::read_from(a, "head.classifier", c, cfg.num_classes)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub class: usize,
    pub step: u64,
    /// Set when the snapshot had no tokens and a uniform guess was emitted.
    pub degenerate: bool,
}

/// Tanh approximation of GELU.
fn gelu(x: f32) -> f32 {
    const K: f32 = 0.797_884_6; // sqrt(2 / pi)
    0.5 * x * (1.0 + (K * (x + 0.044_715 * x * x * x)).tanh())
}

/// Max-subtracted softmax, accumulated in f64.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| (l as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerHead {
    pub config: HeadConfig,
    pub weights: HeadWeights,
}

impl TransformerHead {
    pub fn new(config: HeadConfig, weights: HeadWeights) -> Result<Self> {
        config.validate()?;
        if weights.layers.len() != config.layers || weights.classifier.outputs != config.num_classes {
            return Err(Error::Config("head weights do not match config".into()));
        }
        if weights.cls_token.is_some() != config.use_class_token || weights.final_norm.is_some() != config.final_norm {
            return Err(Error::Config("head weights disagree with class-token/final-norm flags".into()));
        }
        Ok(TransformerHead { config, weights })
    }

    fn attention(&self, layer: &EncoderLayer, normed: &[Vec<f32>]) -> Vec<Vec<f32>> {
        let c = self.config.token_width;
        let heads = self.config.heads;
        let dh = c / heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let qkv: Vec<Vec<f32>> = normed
            .iter()
            .map(|x| {
                let mut o = vec![0.0; 3 * c];
                layer.qkv.apply(x, &mut o);
                o
            })
            .collect();
        let n = normed.len();
        let mut mixed = vec![vec![0.0f32; c]; n];
        let mut scores = vec![0.0f32; n];
        for h in 0..heads {
            let (qo, ko, vo) = (h * dh, c + h * dh, 2 * c + h * dh);
            for i in 0..n {
                let q = &qkv[i][qo..qo + dh];
                for (s, row) in scores.iter_mut().zip(&qkv) {
                    *s = q.iter().zip(&row[ko..ko + dh]).map(|(a, b)| a * b).sum::<f32>() * scale;
                }
                let max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut denom = 0.0f32;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    denom += *s;
                }
                let out = &mut mixed[i][qo..qo + dh];
                for (s, row) in scores.iter().zip(&qkv) {
                    let w = s / denom;
                    for (o, v) in out.iter_mut().zip(&row[vo..vo + dh]) {
                        *o += w * v;
                    }
                }
            }
        }
        mixed
            .iter()
            .map(|m| {
                let mut o = vec![0.0; c];
                layer.attn_out.apply(m, &mut o);
                o
            })
            .collect()
    }

    /// Runs the encoder stack; the class token, when configured, is
    /// prepended and comes back as row 0.
    pub fn encode(&self, tokens: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        if tokens.is_empty() {
            return Err(Error::Precondition("encoder needs at least one token".into()));
        }
        let c = self.config.token_width;
        if let Some(bad) = tokens.iter().position(|t| t.len() != c) {
            return Err(Error::Config(format!("token {bad} has width {}, expected {c}", tokens[bad].len())));
        }
        let mut x: Vec<Vec<f32>> = Vec::with_capacity(tokens.len() + 1);
        if let Some(cls) = &self.weights.cls_token {
            x.push(cls.clone());
        }
        x.extend(tokens.iter().cloned());
        let hidden = self.config.hidden();
        let mut normed = vec![vec![0.0f32; c]; x.len()];
        let mut h = vec![0.0f32; hidden];
        let mut ff = vec![0.0f32; c];
        for layer in &self.weights.layers {
            for (n, xi) in normed.iter_mut().zip(&x) {
                layer.ln1.apply(xi, n);
            }
            let attn = self.attention(layer, &normed);
            for (xi, a) in x.iter_mut().zip(&attn) {
                xi.iter_mut().zip(a).for_each(|(v, d)| *v += d);
            }
            for xi in x.iter_mut() {
                let mut n = vec![0.0f32; c];
                layer.ln2.apply(xi, &mut n);
                layer.ff1.apply(&n, &mut h);
                h.iter_mut().for_each(|v| *v = gelu(*v));
                layer.ff2.apply(&h, &mut ff);
                xi.iter_mut().zip(&ff).for_each(|(v, d)| *v += d);
            }
        }
        Ok(x)
    }

    pub fn logits(&self, tokens: &[Vec<f32>]) -> Result<Vec<f32>> {
        let encoded = self.encode(tokens)?;
        let c = self.config.token_width;
        let mut pooled = if self.config.use_class_token {
            encoded[0].clone()
        } else {
            let n = encoded.len() as f32;
            let mut m = vec![0.0f32; c];
            for t in &encoded {
                m.iter_mut().zip(t).for_each(|(a, v)| *a += v);
            }
            m.iter_mut().for_each(|a| *a /= n);
            m
        };
        if let Some(norm) = &self.weights.final_norm {
            let src = pooled.clone();
            norm.apply(&src, &mut pooled);
        }
        let mut logits = vec![0.0f32; self.config.num_classes];
        self.weights.classifier.apply(&pooled, &mut logits);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        Ok(logits)
    }

    /// Empty snapshots yield a uniform prediction flagged as degenerate.
    pub fn classify(&self, snapshot: &Snapshot) -> Result<Prediction> {
        let k = self.config.num_classes;
        if snapshot.tokens.is_empty() {
            return Ok(Prediction {
                probs: vec![1.0 / k as f64; k],
                class: 0,
                step: snapshot.step,
                degenerate: true,
            });
        }
        let tokens: Vec<Vec<f32>> = snapshot.tokens.iter().map(|t| t.values.clone()).collect();
        let probs = softmax(&self.logits(&tokens)?);
        Ok(Prediction {
            class: argmax(&probs),
            probs,
            step: snapshot.step,
            degenerate: false,
        })
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::PatchToken;
    use crate::grid::PatchId;

    fn cfg(classes: usize, cls: bool) -> HeadConfig {
        HeadConfig {
            layers: 2,
            heads: 2,
            token_width: 8,
            mlp_ratio: 2,
            num_classes: classes,
            use_class_token: cls,
            final_norm: true,
        }
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300 && p[1] >= 0.0);
        let k = 5;
        let mut logits = vec![0.0f32; k];
        logits[0] = 2.0;
        let p = softmax(&logits);
        let e2 = 2f64.exp();
        assert!((p[0] - e2 / (e2 + (k as f64 - 1.0))).abs() < 1e-12);
    }

    #[test]
    fn zero_classifier_is_uniform() {
        let c = cfg(4, true);
        let mut w = HeadWeights::random(&c, 1);
        w.classifier = Linear::zeros(8, 4);
        let head = TransformerHead::new(c, w).unwrap();
        let snap = Snapshot {
            step: 3,
            time_us: None,
            tokens: vec![PatchToken {
                patch: PatchId::new(0, 0),
                values: vec![0.3; 8],
            }],
        };
        let p = head.classify(&snap).unwrap();
        assert!(p.probs.iter().all(|&x| (x - 0.25).abs() < 1e-12));
        assert!(!p.degenerate);
        assert_eq!(p.step, 3);
    }

    #[test]
    fn empty_snapshot_is_degenerate_uniform() {
        let c = cfg(11, false);
        let head = TransformerHead::new(c, HeadWeights::random(&c, 2)).unwrap();
        let p = head
            .classify(&Snapshot {
                step: 0,
                time_us: None,
                tokens: vec![],
            })
            .unwrap();
        assert!(p.degenerate);
        assert!(p.probs.iter().all(|&x| (x - 1.0 / 11.0).abs() < 1e-15));
        assert!(matches!(head.encode(&[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(2, false);
        c.heads = 3;
        assert!(c.validate().is_err());
        let mut c = cfg(1, false);
        c.num_classes = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn archive_round_trip() {
        for cls in [true, false] {
            let c = cfg(3, cls);
            let w = HeadWeights::random(&c, 4);
            let mut a = WeightArchive::new();
            w.write_to(&mut a).unwrap();
            assert_eq!(HeadWeights::read_from(&c, &a).unwrap(), w);
        }
    }
}
