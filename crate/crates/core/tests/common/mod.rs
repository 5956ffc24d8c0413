//! Independent reference implementations shared by integration tests.
#![allow(dead_code)]

use alert_core::head::{HeadWeights, LayerNorm, Linear};

pub type Mat = Vec<Vec<f64>>;

/// `rows x cols` block of a row-major linear layer as f64.
fn block(l: &Linear, row0: usize, rows: usize) -> (Mat, Vec<f64>) {
    let w = (row0..row0 + rows)
        .map(|r| (0..l.inputs).map(|c| l.weight[r * l.inputs + c] as f64).collect())
        .collect();
    let b = (row0..row0 + rows).map(|r| l.bias[r] as f64).collect();
    (w, b)
}

fn matvec(w: &Mat, b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bi)| bi + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

fn layer_norm(n: &LayerNorm, x: &[f64]) -> Vec<f64> {
    let len = x.len() as f64;
    let mean = x.iter().sum::<f64>() / len;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - mean) / (var + 1e-6).sqrt() * n.weight[i] as f64 + n.bias[i] as f64)
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

/// Encoder forward pass in f64 with separate per-head projections.
pub fn encode_oracle(w: &HeadWeights, heads: usize, tokens: &[Vec<f32>]) -> Mat {
    let mut x: Mat = Vec::new();
    if let Some(cls) = &w.cls_token {
        x.push(cls.iter().map(|&v| v as f64).collect());
    }
    x.extend(tokens.iter().map(|t| t.iter().map(|&v| v as f64).collect::<Vec<_>>()));
    let n = x.len();
    let c = x[0].len();
    let dh = c / heads;
    for layer in &w.layers {
        let normed: Mat = x.iter().map(|t| layer_norm(&layer.ln1, t)).collect();
        let mut concat = vec![vec![0.0; c]; n];
        for h in 0..heads {
            let (wq, bq) = block(&layer.qkv, h * dh, dh);
            let (wk, bk) = block(&layer.qkv, c + h * dh, dh);
            let (wv, bv) = block(&layer.qkv, 2 * c + h * dh, dh);
            let q: Mat = normed.iter().map(|t| matvec(&wq, &bq, t)).collect();
            let k: Mat = normed.iter().map(|t| matvec(&wk, &bk, t)).collect();
            let v: Mat = normed.iter().map(|t| matvec(&wv, &bv, t)).collect();
            for i in 0..n {
                let logits: Vec<f64> = (0..n)
                    .map(|j| q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for d in 0..dh {
                    concat[i][h * dh + d] = (0..n).map(|j| e[j] / z * v[j][d]).sum();
                }
            }
        }
        let (wo, bo) = block(&layer.attn_out, 0, c);
        for i in 0..n {
            let a = matvec(&wo, &bo, &concat[i]);
            x[i].iter_mut().zip(&a).for_each(|(xv, av)| *xv += av);
        }
        let (w1, b1) = block(&layer.ff1, 0, layer.ff1.outputs);
        let (w2, b2) = block(&layer.ff2, 0, c);
        for xi in x.iter_mut() {
            let hdn: Vec<f64> = matvec(&w1, &b1, &layer_norm(&layer.ln2, xi)).into_iter().map(gelu).collect();
            let f = matvec(&w2, &b2, &hdn);
            xi.iter_mut().zip(&f).for_each(|(xv, fv)| *xv += fv);
        }
    }
    x
}
