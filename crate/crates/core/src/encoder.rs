//! Fully-convolutional guidance-map encoder.
//!
//! A small U-Net: `depth` levels of two 3×3 convolutions followed by 2×2 max
//! pooling, two bottleneck convolutions, then `depth` levels of nearest-neighbour
//! upsampling, skip concatenation, and two 3×3 convolutions. A 1×1 head and a
//! sigmoid give `Φ ∈ (0, 1)`; with a learned output scale the sigmoid is
//! multiplied by `exp(log_scale)`.
//!
//! Input channels are the map (`X` or RGB) followed by the single mask `V_s + V_g`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::grid::{MapKind, ProblemInstance, ScalarField};
use crate::math;

const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// 2 for binary maps (`X`, `V_s + V_g`), 4 for images (RGB, `V_s + V_g`).
    pub in_channels: usize,
    pub base_channels: usize,
    pub depth: usize,
    pub learn_output_scale: bool,
    pub output_scale_init: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::binary()
    }
}

impl EncoderConfig {
    pub fn binary() -> Self {
        Self { in_channels: 2, base_channels: 16, depth: 3, learn_output_scale: false, output_scale_init: 10.0 }
    }

    /// Raw-image input with a trainable output scale.
    pub fn image() -> Self {
        Self { in_channels: 4, learn_output_scale: true, ..Self::binary() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_channels == 0 {
            return Err(Error::invalid("encoder channel counts must be positive"));
        }
        if self.depth == 0 {
            return Err(Error::invalid("encoder depth must be at least 1"));
        }
        if self.learn_output_scale && !(self.output_scale_init > 0.0) {
            return Err(Error::invalid("output scale must be positive"));
        }
        Ok(())
    }

    fn width_at(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Name, shape pairs in lexicographic name order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut shapes = BTreeMap::new();
        let mut conv = |name: String, cin: usize, cout: usize, k: usize| {
            shapes.insert(format!("{name}.weight"), vec![cout, cin, k, k]);
            shapes.insert(format!("{name}.bias"), vec![cout]);
        };
        for l in 0..self.depth {
            let cin = if l == 0 { self.in_channels } else { self.width_at(l - 1) };
            conv(format!("down{l}.conv1"), cin, self.width_at(l), 3);
            conv(format!("down{l}.conv2"), self.width_at(l), self.width_at(l), 3);
        }
        let mid = self.width_at(self.depth);
        conv("mid.conv1".to_string(), self.width_at(self.depth - 1), mid, 3);
        conv("mid.conv2".to_string(), mid, mid, 3);
        for l in 0..self.depth {
            let below = self.width_at(l + 1);
            conv(format!("up{l}.conv1"), below + self.width_at(l), self.width_at(l), 3);
            conv(format!("up{l}.conv2"), self.width_at(l), self.width_at(l), 3);
        }
        conv("head".to_string(), self.base_channels, 1, 1);
        if self.learn_output_scale {
            shapes.insert("log_scale".to_string(), vec![1]);
        }
        shapes.into_iter().collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Encoder parameters. Values are kept representable as `f32` so the weight
/// file round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    config: EncoderConfig,
    params: BTreeMap<String, Param>,
}

/// Parameters registered as leaves on one tape, in parameter-list order.
#[derive(Debug, Clone)]
pub struct BoundEncoder {
    vars: Vec<Var>,
    names: Vec<String>,
}

impl BoundEncoder {
    fn get(&self, name: &str) -> Var {
        let i = self.names.binary_search_by(|n| n.as_str().cmp(name)).expect("known parameter");
        self.vars[i]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[inline]
pub(crate) fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

impl EncoderWeights {
    /// He-uniform weights (`±sqrt(6 / fan_in)`), zero biases, `log_scale = ln(init)`.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for (name, shape) in config.parameter_shapes() {
            let n: usize = shape.iter().product();
            let values = if name == "log_scale" {
                vec![round_f32(math::ln(config.output_scale_init))]
            } else if name.ends_with(".bias") {
                vec![0.0; n]
            } else {
                let bound = he_uniform_bound(shape[1] * shape[2] * shape[3]);
                (0..n).map(|_| round_f32(rng.gen_range(-bound..=bound))).collect()
            };
            params.insert(name, Param { shape, values });
        }
        Ok(Self { config, params })
    }

    /// Rebuilds weights from named tensors, checking names and shapes against the config.
    pub fn from_parameters(config: EncoderConfig, tensors: Vec<(String, Param)>) -> Result<Self> {
        config.validate()?;
        let expected = config.parameter_shapes();
        if tensors.len() != expected.len() {
            return Err(Error::shape(format!("expected {} tensors, got {}", expected.len(), tensors.len())));
        }
        let mut params = BTreeMap::new();
        for (name, p) in tensors {
            let Some((_, shape)) = expected.iter().find(|(n, _)| *n == name) else {
                return Err(Error::invalid(format!("unknown parameter `{name}`")));
            };
            if *shape != p.shape || p.values.len() != shape.iter().product::<usize>() {
                return Err(Error::shape(format!("parameter `{name}` has shape {:?}, expected {shape:?}", p.shape)));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("parameter `{name}` is not finite")));
            }
            if params.insert(name.clone(), p).is_some() {
                return Err(Error::invalid(format!("duplicate parameter `{name}`")));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Parameters sorted by name.
    pub fn parameter_list(&self) -> Vec<(&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v)).collect()
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.params.values_mut().map(|p| &mut p.values)
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<BoundEncoder> {
        let mut vars = Vec::with_capacity(self.params.len());
        let mut names = Vec::with_capacity(self.params.len());
        for (name, p) in &self.params {
            vars.push(tape.leaf(&p.shape, p.values.clone(), trainable)?);
            names.push(name.clone());
        }
        Ok(BoundEncoder { vars, names })
    }

    /// Gradients for each parameter, in parameter-list order.
    pub fn collect_gradients(&self, bound: &BoundEncoder, grads: &mut Gradients) -> Result<Vec<Vec<f64>>> {
        bound
            .vars
            .iter()
            .zip(&bound.names)
            .map(|(&v, name)| grads.take(v).ok_or_else(|| Error::MissingGradient(name.clone())))
            .collect()
    }

    /// Records the encoder on `tape` and returns `Φ` with shape `H×W`.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundEncoder, inst: &ProblemInstance) -> Result<Var> {
        let (h, w) = (inst.height(), inst.width());
        let input = self.input_tensor(inst)?;
        let mut x = tape.constant(&[self.config.in_channels, h, w], input)?;
        let mut skips = Vec::with_capacity(self.config.depth);
        for l in 0..self.config.depth {
            x = self.conv_act(tape, bound, &format!("down{l}.conv1"), x)?;
            x = self.conv_act(tape, bound, &format!("down{l}.conv2"), x)?;
            skips.push(x);
            x = tape.max_pool2(x)?;
        }
        x = self.conv_act(tape, bound, "mid.conv1", x)?;
        x = self.conv_act(tape, bound, "mid.conv2", x)?;
        for l in (0..self.config.depth).rev() {
            let up = tape.upsample2(x)?;
            x = tape.concat_channels(&[up, skips[l]])?;
            x = self.conv_act(tape, bound, &format!("up{l}.conv1"), x)?;
            x = self.conv_act(tape, bound, &format!("up{l}.conv2"), x)?;
        }
        let logits = tape.conv2d(x, bound.get("head.weight"), bound.get("head.bias"))?;
        let mut phi = tape.sigmoid(logits);
        if self.config.learn_output_scale {
            let scale = tape.exp(bound.get("log_scale"));
            phi = tape.mul(phi, scale)?;
        }
        tape.reshape(phi, &[h, w])
    }

    fn conv_act(&self, tape: &mut Tape, bound: &BoundEncoder, name: &str, x: Var) -> Result<Var> {
        let y = tape.conv2d(x, bound.get(&format!("{name}.weight")), bound.get(&format!("{name}.bias")))?;
        Ok(tape.leaky_relu(y, LEAKY_SLOPE))
    }

    /// Forward pass without gradients.
    pub fn guidance(&self, inst: &ProblemInstance) -> Result<ScalarField> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        let phi = self.forward(&mut tape, &bound, inst)?;
        ScalarField::new(inst.height(), inst.width(), tape.value(phi).to_vec())
    }

    /// Concatenation of the map channels and `V_s + V_g`.
    pub fn input_tensor(&self, inst: &ProblemInstance) -> Result<Vec<f64>> {
        let (h, w) = (inst.height(), inst.width());
        let cells = 1usize << self.config.depth;
        if h % cells != 0 || w % cells != 0 {
            return Err(Error::shape(format!("map {h}x{w} is not divisible by {cells}")));
        }
        let mut input = match (inst.map.kind(), self.config.in_channels) {
            (MapKind::Binary, 2) => inst.map.passability(),
            (MapKind::Image, 4) => inst.map.image_planes().expect("image map").to_vec(),
            (kind, c) => {
                return Err(Error::shape(format!("{kind:?} map cannot feed an encoder with {c} input channels")))
            }
        };
        input.extend(inst.start_goal_mask());
        Ok(input)
    }
}

pub fn he_uniform_bound(fan_in: usize) -> f64 {
    math::sqrt(6.0 / fan_in as f64)
}
