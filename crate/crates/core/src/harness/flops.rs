//! Analytic FLOP counts. One multiply-accumulate is two FLOPs; biases,
//! folded norms and rectifiers are counted per output element, and
//! transcendental functions count as one FLOP each.

use crate::embedder::MlpConfig;
use crate::head::HeadConfig;

/// Per-token layer norm: mean (c), centred squares (2c), scale and shift (2c).
const LAYER_NORM_PER_ELEM: u64 = 5;
/// Tanh-approximated GELU per element.
const GELU_PER_ELEM: u64 = 8;
/// Softmax per element: subtract max, exp, accumulate, divide.
const SOFTMAX_PER_ELEM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleStats {
    pub events: u64,
    /// Events falling in active patches; only these reach the feature generator.
    pub active_events: u64,
    pub active_patches: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub flops_per_event: u64,
    pub macs_per_event: u64,
    pub embedder_flops_per_sample: u64,
    pub head_flops_per_sample: u64,
    pub flops_per_sample: u64,
    /// Per-event entries (`te`, `fg.layer{i}`, `pool`) then per-sample head entries.
    pub breakdown: Vec<(String, u64)>,
}

/// FLOPs of one feature-generator layer and its MAC count.
pub fn mlp_layer_flops(inputs: usize, outputs: usize, rectified: bool) -> (u64, u64) {
    let (i, o) = (inputs as u64, outputs as u64);
    let macs = i * o;
    let relu = if rectified { o } else { 0 };
    (2 * macs + o + 2 * o + relu, macs)
}

/// Head cost over a sequence of `tokens` patch tokens.
pub fn head_flops(cfg: &HeadConfig, tokens: u64) -> Vec<(String, u64)> {
    let c = cfg.token_width as u64;
    let h = cfg.hidden() as u64;
    let heads = cfg.heads as u64;
    let k = cfg.num_classes as u64;
    let n = tokens + u64::from(cfg.use_class_token);
    let mut out = vec![("head.pos".to_string(), tokens * c)];
    for l in 0..cfg.layers {
        let attn = n * LAYER_NORM_PER_ELEM * c
            + n * (2 * c * 3 * c + 3 * c)
            + 2 * n * n * c
            + n * n * heads
            + SOFTMAX_PER_ELEM * n * n * heads
            + 2 * n * n * c
            + n * (2 * c * c + c)
            + n * c;
        let ff = n * LAYER_NORM_PER_ELEM * c + n * (2 * c * h + h) + n * h * GELU_PER_ELEM + n * (2 * h * c + c) + n * c;
        out.push((format!("head.layer{l}.attn"), attn));
        out.push((format!("head.layer{l}.ff"), ff));
    }
    let pool = if cfg.use_class_token { 0 } else { n * c };
    let norm = if cfg.final_norm { LAYER_NORM_PER_ELEM * c } else { 0 };
    out.push(("head.readout".to_string(), pool + norm + 2 * c * k + k + SOFTMAX_PER_ELEM * k));
    out
}

pub fn count_flops(mlp: &MlpConfig, time_encoding_flops: u64, head: &HeadConfig, stats: SampleStats) -> FlopReport {
    let widths = mlp.widths();
    let mut breakdown = vec![("te".to_string(), time_encoding_flops)];
    let mut per_event = time_encoding_flops;
    let mut macs = 0;
    for (i, w) in widths.windows(2).enumerate() {
        let rectified = i + 2 < widths.len() || mlp.final_relu;
        let (f, m) = mlp_layer_flops(w[0], w[1], rectified);
        breakdown.push((format!("fg.layer{i}"), f));
        per_event += f;
        macs += m;
    }
    let pool = mlp.out_channels as u64;
    breakdown.push(("pool".to_string(), pool));
    per_event += pool;

    let embedder = per_event * stats.active_events;
    let head_parts = if stats.active_patches == 0 {
        Vec::new()
    } else {
        head_flops(head, stats.active_patches)
    };
    let head_total = head_parts.iter().map(|(_, f)| f).sum();
    breakdown.extend(head_parts);
    FlopReport {
        flops_per_event: per_event,
        macs_per_event: macs,
        embedder_flops_per_sample: embedder,
        head_flops_per_sample: head_total,
        flops_per_sample: embedder + head_total,
        breakdown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head() -> HeadConfig {
        HeadConfig {
            layers: 1,
            heads: 2,
            token_width: 8,
            mlp_ratio: 2,
            num_classes: 3,
            use_class_token: true,
            final_norm: true,
        }
    }

    #[test]
    fn one_layer_hand_count() {
        let mlp = MlpConfig {
            depth: 1,
            base_channels: 8,
            expansion: 1.0,
            out_channels: 8,
            input_dim: 4,
            final_relu: true,
        };
        let r = count_flops(&mlp, 0, &head(), SampleStats::default());
        assert_eq!(r.breakdown[1], ("fg.layer0".to_string(), 2 * 4 * 8 + 8 + 16 + 8));
        assert_eq!(r.macs_per_event, 32);
        // plus channel-wise max over 8 channels
        assert_eq!(r.flops_per_event, 96 + 8);
    }

    #[test]
    fn embedder_linear_in_events_head_fixed() {
        let mlp = MlpConfig {
            depth: 2,
            base_channels: 16,
            expansion: 2.0,
            out_channels: 8,
            input_dim: 5,
            final_relu: false,
        };
        let s = SampleStats {
            events: 1000,
            active_events: 900,
            active_patches: 12,
        };
        let a = count_flops(&mlp, 6, &head(), s);
        let b = count_flops(&mlp, 6, &head(), SampleStats { active_events: 1800, ..s });
        assert_eq!(b.embedder_flops_per_sample, 2 * a.embedder_flops_per_sample);
        assert_eq!(b.head_flops_per_sample, a.head_flops_per_sample);
        assert!(a.flops_per_sample >= a.flops_per_event * s.active_events);
    }

    #[test]
    fn head_grows_quadratically_in_attention() {
        let h = head();
        let attn = |n| head_flops(&h, n)[1].1;
        let (a1, a2, a4) = (attn(10), attn(20), attn(40));
        assert!(a4 - a2 > 2 * (a2 - a1));
    }
}
