//! Shared per-event feature generator: a stack of pointwise layers
//! (affine, folded batch norm, rectifier).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archive::{Tensor, WeightArchive};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub depth: usize,
    pub base_channels: usize,
    /// Width multiplier between consecutive hidden layers.
    pub expansion: f64,
    pub out_channels: usize,
    pub input_dim: usize,
    /// Rectify the output layer as well as the hidden ones.
    pub final_relu: bool,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.base_channels == 0 || self.out_channels == 0 || self.input_dim == 0 {
            return Err(Error::Config(format!("invalid MLP shape {self:?}")));
        }
        if !(self.expansion >= 1.0) {
            return Err(Error::Config(format!("MLP expansion must be >= 1, got {}", self.expansion)));
        }
        Ok(())
    }

    /// Layer widths from input to output; `depth + 1` entries.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.depth + 1);
        w.push(self.input_dim);
        let mut hidden = self.base_channels as f64;
        for _ in 1..self.depth {
            w.push(hidden.round() as usize);
            hidden *= self.expansion;
        }
        w.push(self.out_channels);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
}

impl MlpLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        MlpLayer {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            scale: vec![1.0; outputs],
            shift: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f32], out: &mut Vec<f32>, relu: bool) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            let y = acc * self.scale[o] + self.shift[o];
            out.push(if relu && !(y > 0.0) { 0.0 } else { y });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub layers: Vec<MlpLayer>,
}

impl Mlp {
    pub fn from_layers(config: MlpConfig, layers: Vec<MlpLayer>) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        if layers.len() != config.depth {
            return Err(Error::Config(format!("expected {} layers, got {}", config.depth, layers.len())));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != widths[i]
                || l.outputs != widths[i + 1]
                || l.weight.len() != l.inputs * l.outputs
                || l.bias.len() != l.outputs
                || l.scale.len() != l.outputs
                || l.shift.len() != l.outputs
            {
                return Err(Error::Config(format!(
                    "layer {i} does not chain: expected {}x{}",
                    widths[i + 1],
                    widths[i]
                )));
            }
            let finite = [&l.weight, &l.bias, &l.scale, &l.shift]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()));
            if !finite {
                return Err(Error::Numeric(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Mlp { config, layers })
    }

    /// Uniform `+-1/sqrt(fan_in)` weights and biases, identity folded norm.
    pub fn random(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let bound = 1.0 / (i as f32).sqrt();
                let mut l = MlpLayer::zeros(i, o);
                l.weight.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
                l.bias.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
                l
            })
            .collect();
        Mlp::from_layers(config, layers)
    }

    pub fn out_channels(&self) -> usize {
        self.config.out_channels
    }

    pub fn forward(&self, input: &[f32]) -> Result<Vec<f32>> {
        if input.len() != self.config.input_dim {
            return Err(Error::Config(format!(
                "MLP expects {} inputs, got {}",
                self.config.input_dim,
                input.len()
            )));
        }
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next, i < last || self.config.final_relu);
            std::mem::swap(&mut cur, &mut next);
        }
        if let Some(bad) = cur.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite feature at channel {bad}")));
        }
        Ok(cur)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + 3 * l.outputs).sum()
    }

    pub fn write_to(&self, archive: &mut WeightArchive) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            archive.insert(format!("fg.layer{i}.weight"), Tensor::matrix(l.outputs, l.inputs, l.weight.clone())?);
            archive.insert(format!("fg.layer{i}.bias"), Tensor::vector(l.bias.clone()));
            archive.insert(format!("fg.layer{i}.scale"), Tensor::vector(l.scale.clone()));
            archive.insert(format!("fg.layer{i}.shift"), Tensor::vector(l.shift.clone()));
        }
        Ok(())
    }

    pub fn read_from(config: MlpConfig, archive: &WeightArchive) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        let mut layers = Vec::with_capacity(config.depth);
        for i in 0..config.depth {
            let (inp, out) = (widths[i], widths[i + 1]);
            layers.push(MlpLayer {
                inputs: inp,
                outputs: out,
                weight: archive.expect(&format!("fg.layer{i}.weight"), &[out, inp])?.data.clone(),
                bias: archive.expect(&format!("fg.layer{i}.bias"), &[out])?.data.clone(),
                scale: archive.expect(&format!("fg.layer{i}.scale"), &[out])?.data.clone(),
                shift: archive.expect(&format!("fg.layer{i}.shift"), &[out])?.data.clone(),
            });
        }
        Mlp::from_layers(config, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(depth: usize, input: usize, out: usize) -> MlpConfig {
        MlpConfig {
            depth,
            base_channels: 16,
            expansion: 2.0,
            out_channels: out,
            input_dim: input,
            final_relu: false,
        }
    }

    #[test]
    fn width_schedule() {
        let c = MlpConfig {
            depth: 5,
            base_channels: 80,
            ..cfg(5, 4, 512)
        };
        assert_eq!(c.widths(), vec![4, 80, 160, 320, 640, 512]);
        assert_eq!(cfg(1, 4, 8).widths(), vec![4, 8]);
    }

    #[test]
    fn identity_layer() {
        let mut l = MlpLayer::zeros(4, 6);
        for i in 0..4 {
            l.weight[i * 4 + i] = 1.0;
        }
        let mlp = Mlp::from_layers(cfg(1, 4, 6), vec![l]).unwrap();
        let out = mlp.forward(&[0.5, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.5, -1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_net_is_rectified_bias() {
        let mut l = MlpLayer::zeros(4, 4);
        l.bias = vec![1.5, -2.0, 0.0, 3.0];
        let c = MlpConfig {
            final_relu: true,
            ..cfg(1, 4, 4)
        };
        let mlp = Mlp::from_layers(c, vec![l]).unwrap();
        assert_eq!(mlp.forward(&[9.0, 9.0, 9.0, 9.0]).unwrap(), vec![1.5, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn shape_errors() {
        let mlp = Mlp::random(cfg(2, 4, 8), 1).unwrap();
        assert!(matches!(mlp.forward(&[0.0; 5]), Err(Error::Config(_))));
        assert!(Mlp::from_layers(cfg(2, 4, 8), vec![MlpLayer::zeros(4, 8)]).is_err());
        let mut l = MlpLayer::zeros(4, 8);
        l.bias[0] = f32::NAN;
        assert!(matches!(Mlp::from_layers(cfg(1, 4, 8), vec![l]), Err(Error::Numeric(_))));
    }

    #[test]
    fn non_finite_output_is_numeric_error() {
        let mut l = MlpLayer::zeros(4, 2);
        l.weight[0] = f32::MAX;
        let mlp = Mlp::from_layers(cfg(1, 4, 2), vec![l]).unwrap();
        assert!(matches!(mlp.forward(&[f32::MAX, 0.0, 0.0, 0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn archive_round_trip() {
        let mlp = Mlp::random(cfg(3, 5, 32), 9).unwrap();
        let mut a = WeightArchive::new();
        mlp.write_to(&mut a).unwrap();
        assert!(a.get("fg.layer2.shift").is_some());
        assert_eq!(Mlp::read_from(mlp.config, &a).unwrap(), mlp);
    }
}
