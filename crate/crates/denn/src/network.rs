//! Feed-forward delay networks over frame sequences.
//!
//! A network is an ordered stack of layers fed one frame at a time. The
//! configured regime also gates the *input* stage: each incoming frame
//! passes through the temporal ReLU before the first layer, so in the
//! fast regime the slower half of the input cells goes silent exactly
//! like any hidden layer. The final layer always runs in the slow regime
//! (its standardized times feed the posterior directly and canceling a
//! class would zero its evidence).
//!
//! Layers carrying long-term memory couple consecutive frames; the
//! backward pass therefore walks the whole frame sequence in reverse and
//! routes gradients both through the current frame's stack and into the
//! history entries earlier frames produced.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::delay::DelayParameters;
use crate::error::{DennError, Result};
use crate::kernel::KernelSpec;
use crate::layers::{
    self, relu_backward, standardize_backward, ConvGeometry, ConvLayer, CoreGrad, DelayCore,
    DenseLayer, Layer, LayerCache, LayerTape, Ltm,
};
use crate::standardize::{temp_relu, RegimeConfig, StandardizedTimes};

/// Shape of the data entering the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputShape {
    Flat(usize),
    Map(usize, usize, usize),
}

impl InputShape {
    pub fn len(&self) -> usize {
        match *self {
            InputShape::Flat(n) => n,
            InputShape::Map(c, h, w) => c * h * w,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One entry of an architecture description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerDesc {
    Dense {
        out: usize,
    },
    Conv {
        filters: usize,
        k: usize,
        stride: usize,
        padding: usize,
    },
    MinPool,
}

/// Architecture plus the knobs shared by every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerDesc>,
    pub kernel: KernelSpec,
    pub regime: RegimeConfig,
    /// Memory length ν; when positive, every hidden delay layer carries
    /// an LTM block (the output layer does not).
    pub nu: usize,
}

/// Parse a compact architecture string: `8c5s2` is 8 filters of size 5
/// with stride 2 (an optional `p1` suffix adds padding), `p2s2` is a 2×2
/// min-pool with stride 2, and a bare integer is a dense layer.
pub fn parse_architecture(s: &str) -> Result<Vec<LayerDesc>> {
    let mut out = Vec::new();
    for token in s.split('-') {
        let token = token.trim();
        if token.is_empty() {
            return Err(DennError::Config("empty architecture token".into()));
        }
        if let Ok(n) = token.parse::<usize>() {
            out.push(LayerDesc::Dense { out: n });
        } else if let Some(rest) = token.strip_prefix('p') {
            // pool token: p2s2
            let parts: Vec<&str> = rest.split('s').collect();
            if parts.len() != 2 || parts[0] != "2" || parts[1] != "2" {
                return Err(DennError::Config(format!(
                    "unsupported pool token '{token}' (only p2s2)"
                )));
            }
            out.push(LayerDesc::MinPool);
        } else if let Some(cpos) = token.find('c') {
            let filters: usize = token[..cpos]
                .parse()
                .map_err(|_| DennError::Config(format!("bad conv token '{token}'")))?;
            let rest = &token[cpos + 1..];
            let spos = rest
                .find('s')
                .ok_or_else(|| DennError::Config(format!("conv token '{token}' missing stride")))?;
            let k: usize = rest[..spos]
                .parse()
                .map_err(|_| DennError::Config(format!("bad kernel in '{token}'")))?;
            let tail = &rest[spos + 1..];
            let (stride_str, padding) = match tail.find('p') {
                Some(ppos) => (
                    &tail[..ppos],
                    tail[ppos + 1..]
                        .parse()
                        .map_err(|_| DennError::Config(format!("bad padding in '{token}'")))?,
                ),
                None => (tail, 0),
            };
            let stride: usize = stride_str
                .parse()
                .map_err(|_| DennError::Config(format!("bad stride in '{token}'")))?;
            out.push(LayerDesc::Conv {
                filters,
                k,
                stride,
                padding,
            });
        } else {
            return Err(DennError::Config(format!(
                "unrecognized architecture token '{token}'"
            )));
        }
    }
    if out.is_empty() {
        return Err(DennError::Config("empty architecture".into()));
    }
    Ok(out)
}

/// A built network with concrete parameter tensors.
#[derive(Debug, Clone)]
pub struct Network {
    pub input_regime: RegimeConfig,
    pub layers: Vec<Layer>,
}

/// Batch-level caches, one per layer.
pub struct NetCache {
    pub layers: Vec<LayerCache>,
}

/// Forward record of one frame through the whole stack.
#[derive(Debug, Clone)]
pub struct FrameTape {
    /// Input after the input-stage temporal ReLU (what layer 0 consumed).
    pub input: StandardizedTimes,
    pub layers: Vec<LayerTape>,
}

impl FrameTape {
    pub fn output(&self) -> Vec<f64> {
        match self.layers.last().expect("network has layers") {
            LayerTape::Delay(t) => t.output(),
            LayerTape::MinPool(_) => unreachable!("networks end in a delay layer"),
        }
    }
}

/// Forward record of one sample (all frames).
#[derive(Debug, Clone)]
pub struct SampleTape {
    pub frames: Vec<FrameTape>,
}

/// Gradients for every parameter tensor of the network, aligned with its
/// layer list.
#[derive(Debug, Clone)]
pub struct NetGradients {
    pub layers: Vec<Option<DelayGrad>>,
}

#[derive(Debug, Clone)]
pub struct DelayGrad {
    pub core: CoreGrad,
    pub alpha: Option<Array2<f64>>,
}

impl NetGradients {
    pub fn zeros_like(net: &Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                l.core().map(|core| DelayGrad {
                    core: CoreGrad::zeros_like(core),
                    alpha: l.ltm().map(|m| Array2::zeros(m.alpha_raw.dim())),
                })
            })
            .collect();
        NetGradients { layers }
    }

    pub fn add_assign(&mut self, other: &NetGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                a.core.signed += &b.core.signed;
                a.core.sigma += &b.core.sigma;
                if let (Some(aa), Some(ba)) = (a.alpha.as_mut(), b.alpha.as_ref()) {
                    *aa += ba;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.layers.iter_mut().flatten() {
            g.core.signed *= factor;
            g.core.sigma *= factor;
            if let Some(a) = g.alpha.as_mut() {
                *a *= factor;
            }
        }
    }
}

/// Kind of a parameter tensor; the optimizer clamps widths after update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Signed,
    Sigma,
    Alpha,
}

impl Network {
    /// Build a network from its spec with fresh random parameters.
    ///
    /// The output layer runs in the slow regime and never carries memory;
    /// every other delay layer takes the spec's regime and, when ν > 0,
    /// an inert LTM block.
    pub fn build<R: Rng>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut shape = spec.input;
        let last = spec.layers.len() - 1;
        for (idx, desc) in spec.layers.iter().enumerate() {
            let is_output = idx == last;
            let regime = if is_output {
                RegimeConfig::SLOW
            } else {
                spec.regime
            };
            match *desc {
                LayerDesc::Dense { out } => {
                    let n_in = shape.len();
                    let core = DelayCore {
                        params: DelayParameters::init(n_in, out, rng),
                        kernel: spec.kernel,
                    };
                    let ltm = (!is_output && spec.nu > 0).then(|| Ltm::new(out, spec.nu));
                    // a final layer too small to standardize passes raw sums
                    let standardize = !is_output || out >= 3;
                    layers.push(Layer::Dense(DenseLayer {
                        core,
                        regime,
                        ltm,
                        standardize,
                    }));
                    shape = InputShape::Flat(out);
                }
                LayerDesc::Conv {
                    filters,
                    k,
                    stride,
                    padding,
                } => {
                    let map = match shape {
                        InputShape::Map(c, h, w) => (c, h, w),
                        InputShape::Flat(_) => {
                            return Err(DennError::ShapeMismatch(
                                "conv layer needs a spatial input".into(),
                            ))
                        }
                    };
                    let geom = ConvGeometry::new(map, filters, k, stride, padding)?;
                    let core = DelayCore {
                        params: DelayParameters::init(geom.taps(), filters, rng),
                        kernel: spec.kernel,
                    };
                    let ltm =
                        (!is_output && spec.nu > 0).then(|| Ltm::new(geom.out_len(), spec.nu));
                    let out_shape = geom.out_shape();
                    let standardize = !is_output || geom.out_len() >= 3;
                    layers.push(Layer::Conv(ConvLayer {
                        core,
                        geom,
                        regime,
                        ltm,
                        standardize,
                    }));
                    shape = InputShape::Map(out_shape.0, out_shape.1, out_shape.2);
                }
                LayerDesc::MinPool => {
                    let map = match shape {
                        InputShape::Map(c, h, w) => (c, h, w),
                        InputShape::Flat(_) => {
                            return Err(DennError::ShapeMismatch(
                                "min-pool needs a spatial input".into(),
                            ))
                        }
                    };
                    let out = layers::minpool::out_shape(map);
                    if out.1 == 0 || out.2 == 0 {
                        return Err(DennError::ShapeMismatch(format!(
                            "min-pool input {map:?} too small"
                        )));
                    }
                    layers.push(Layer::MinPool { in_shape: map });
                    shape = InputShape::Map(out.0, out.1, out.2);
                }
            }
        }
        match layers.last() {
            Some(Layer::Dense(_)) | Some(Layer::Conv(_)) => {}
            _ => {
                return Err(DennError::Config(
                    "network must end in a delay layer".into(),
                ))
            }
        }
        Ok(Network {
            input_regime: spec.regime,
            layers,
        })
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map(|l| l.in_len()).unwrap_or(0)
    }

    pub fn out_classes(&self) -> usize {
        self.layers.last().map(|l| l.out_len()).unwrap_or(0)
    }

    pub fn build_cache(&self) -> NetCache {
        NetCache {
            layers: self.layers.iter().map(|l| l.cache()).collect(),
        }
    }

    /// Number of learnable scalars (delays, widths and memory
    /// coefficients).
    pub fn n_params(&self) -> usize {
        self.param_tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    /// Signed-delay count alone, the figure architecture tables quote.
    pub fn n_delays(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.core())
            .map(|c| c.params.signed.len())
            .sum()
    }

    /// Run one sample (a sequence of frames) through the network.
    ///
    /// Returns the per-frame output times of the last layer and the tape
    /// the backward pass consumes.
    pub fn forward(
        &self,
        frames: &[StandardizedTimes],
        cache: &NetCache,
    ) -> Result<(Vec<Vec<f64>>, SampleTape)> {
        if frames.is_empty() {
            return Err(DennError::Config("sample has no frames".into()));
        }
        // rolling history of corrected outputs per LTM layer, newest first
        let mut histories: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut frame_tapes = Vec::with_capacity(frames.len());
        let mut outputs = Vec::with_capacity(frames.len());
        for frame in frames {
            if frame.len() != self.input_len() {
                return Err(DennError::ShapeMismatch(format!(
                    "frame has {} cells, network expects {}",
                    frame.len(),
                    self.input_len()
                )));
            }
            let (input, _) = temp_relu(frame, self.input_regime);
            let mut layer_tapes = Vec::with_capacity(self.layers.len());
            let mut z = input.clone();
            for (l, layer) in self.layers.iter().enumerate() {
                let tape = match (layer, &cache.layers[l]) {
                    (Layer::Dense(dense), LayerCache::Delay(c)) => {
                        let hist: Vec<&[f64]> = histories[l].iter().map(|v| v.as_slice()).collect();
                        let tape = dense.forward(c, &z, &hist)?;
                        z = StandardizedTimes::new(tape.output());
                        LayerTape::Delay(tape)
                    }
                    (Layer::Conv(conv), LayerCache::Delay(c)) => {
                        let hist: Vec<&[f64]> = histories[l].iter().map(|v| v.as_slice()).collect();
                        let tape = conv.forward(c, &z, &hist)?;
                        z = StandardizedTimes::new(tape.output());
                        LayerTape::Delay(tape)
                    }
                    (Layer::MinPool { in_shape }, _) => {
                        let (out, tape) = layers::minpool::forward(&z.values, *in_shape);
                        z = StandardizedTimes::new(out);
                        LayerTape::MinPool(tape)
                    }
                    _ => unreachable!("cache misaligned with layers"),
                };
                if let (Some(ltm), LayerTape::Delay(t)) = (self.layers[l].ltm(), &tape) {
                    let post = t.ltm.as_ref().expect("ltm tape present").z_post.clone();
                    histories[l].insert(0, post);
                    histories[l].truncate(ltm.nu);
                }
                layer_tapes.push(tape);
            }
            outputs.push(z.values.clone());
            frame_tapes.push(FrameTape {
                input,
                layers: layer_tapes,
            });
        }
        Ok((
            outputs,
            SampleTape {
                frames: frame_tapes,
            },
        ))
    }

    /// Exact reverse-mode gradients for one sample.
    ///
    /// `out_grads[s]` is the loss gradient of the frame-`s` output times.
    /// Always pair with the tape of a matching forward call.
    pub fn backward(
        &self,
        tape: &SampleTape,
        out_grads: &[Vec<f64>],
        cache: &NetCache,
    ) -> Result<NetGradients> {
        if out_grads.len() != tape.frames.len() {
            return Err(DennError::ShapeMismatch(format!(
                "{} output gradients for {} frames",
                out_grads.len(),
                tape.frames.len()
            )));
        }
        let n_frames = tape.frames.len();
        let mut grads = NetGradients::zeros_like(self);
        // gradients flowing into earlier frames' corrected outputs,
        // indexed [layer][frame]; empty = zero
        let mut pending: Vec<Vec<Vec<f64>>> = self
            .layers
            .iter()
            .map(|l| {
                if l.ltm().is_some() {
                    vec![Vec::new(); n_frames]
                } else {
                    Vec::new()
                }
            })
            .collect();

        for s in (0..n_frames).rev() {
            let frame = &tape.frames[s];
            let mut g = out_grads[s].clone();
            for l in (0..self.layers.len()).rev() {
                match (&self.layers[l], &frame.layers[l]) {
                    (layer, LayerTape::Delay(t)) => {
                        let grad_slot = grads.layers[l].as_mut().expect("delay layer has grads");
                        if let Some(ltm) = layer.ltm() {
                            if !pending[l][s].is_empty() {
                                for (gi, p) in g.iter_mut().zip(&pending[l][s]) {
                                    *gi += p;
                                }
                            }
                            let avail = ltm.nu.min(s);
                            let hist: Vec<&[f64]> = (1..=avail)
                                .map(|h| match &tape.frames[s - h].layers[l] {
                                    LayerTape::Delay(past) => {
                                        past.ltm.as_ref().expect("ltm tape").z_post.as_slice()
                                    }
                                    _ => unreachable!(),
                                })
                                .collect();
                            let ltm_tape = t.ltm.as_ref().expect("ltm tape");
                            let alpha_grad =
                                grad_slot.alpha.as_mut().expect("alpha grads allocated");
                            let (g_pre, g_hist) =
                                layers::ltm::backward(ltm, ltm_tape, &hist, &g, alpha_grad);
                            for (h, gh) in g_hist.into_iter().enumerate() {
                                let target = &mut pending[l][s - 1 - h];
                                if target.is_empty() {
                                    *target = gh;
                                } else {
                                    for (t, v) in target.iter_mut().zip(&gh) {
                                        *t += v;
                                    }
                                }
                            }
                            g = g_pre;
                        }
                        let g_relu = relu_backward(&t.survive, &g);
                        let standardized = match layer {
                            Layer::Dense(d) => d.standardize,
                            Layer::Conv(c) => c.standardize,
                            Layer::MinPool { .. } => unreachable!(),
                        };
                        let g_raw = if standardized {
                            standardize_backward(&t.z_std, t.std, &g_relu)
                        } else {
                            g_relu
                        };
                        let c = match &cache.layers[l] {
                            LayerCache::Delay(c) => c,
                            LayerCache::None => unreachable!(),
                        };
                        g = match layer {
                            Layer::Dense(d) => d.backward_raw(c, t, &g_raw, &mut grad_slot.core),
                            Layer::Conv(cv) => cv.backward_raw(c, t, &g_raw, &mut grad_slot.core),
                            Layer::MinPool { .. } => unreachable!(),
                        };
                    }
                    (Layer::MinPool { .. }, LayerTape::MinPool(t)) => {
                        g = layers::minpool::backward(t, &g);
                    }
                    _ => {
                        return Err(DennError::ShapeMismatch(
                            "tape does not match network layers".into(),
                        ))
                    }
                }
            }
        }
        Ok(grads)
    }

    /// Every learnable tensor as `(name, kind, flat values)`, in a fixed
    /// order shared with [`NetGradients`] and the optimizer state.
    pub fn param_tensors(&self) -> Vec<(String, ParamKind, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if let Some(core) = layer.core() {
                out.push((
                    format!("layer{l}.signed"),
                    ParamKind::Signed,
                    core.params.signed.as_slice().expect("contiguous"),
                ));
                out.push((
                    format!("layer{l}.sigma"),
                    ParamKind::Sigma,
                    core.params.sigma.as_slice().expect("contiguous"),
                ));
            }
            if let Some(ltm) = layer.ltm() {
                out.push((
                    format!("layer{l}.alpha"),
                    ParamKind::Alpha,
                    ltm.alpha_raw.as_slice().expect("contiguous"),
                ));
            }
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<(String, ParamKind, &mut [f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Dense(DenseLayer { core, ltm, .. })
                | Layer::Conv(ConvLayer { core, ltm, .. }) => {
                    out.push((
                        format!("layer{l}.signed"),
                        ParamKind::Signed,
                        core.params.signed.as_slice_mut().expect("contiguous"),
                    ));
                    out.push((
                        format!("layer{l}.sigma"),
                        ParamKind::Sigma,
                        core.params.sigma.as_slice_mut().expect("contiguous"),
                    ));
                    if let Some(m) = ltm {
                        out.push((
                            format!("layer{l}.alpha"),
                            ParamKind::Alpha,
                            m.alpha_raw.as_slice_mut().expect("contiguous"),
                        ));
                    }
                }
                Layer::MinPool { .. } => {}
            }
        }
        out
    }

    /// Gradient tensors aligned with [`Network::param_tensors`].
    pub fn grad_tensors<'a>(&self, grads: &'a NetGradients) -> Vec<&'a [f64]> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.core().is_some() {
                let g = grads.layers[l].as_ref().expect("aligned grads");
                out.push(g.core.signed.as_slice().expect("contiguous"));
                out.push(g.core.sigma.as_slice().expect("contiguous"));
                if layer.ltm().is_some() {
                    out.push(
                        g.alpha
                            .as_ref()
                            .expect("alpha grads")
                            .as_slice()
                            .expect("contiguous"),
                    );
                }
            }
        }
        out
    }

    /// Switch the survival quantile everywhere it applies: the input
    /// stage and every hidden layer. The output layer stays slow. Lets
    /// one set of trained parameters be audited under either regime.
    pub fn set_regime(&mut self, regime: RegimeConfig) {
        self.input_regime = regime;
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if i == last {
                continue;
            }
            match layer {
                Layer::Dense(d) => d.regime = regime,
                Layer::Conv(c) => c.regime = regime,
                Layer::MinPool { .. } => {}
            }
        }
    }

    /// Clamp every width to the σ floor. Call after any parameter update.
    pub fn clamp_sigma(&mut self) {
        use crate::delay::SIGMA_FLOOR;
        for layer in &mut self.layers {
            if let Some(core) = layer.core_mut() {
                core.params.sigma.mapv_inplace(|s| s.max(SIGMA_FLOOR));
            }
        }
    }
}

/// Convenience: single forward with a throwaway cache.
pub fn forward_once(
    net: &Network,
    frames: &[StandardizedTimes],
) -> Result<(Vec<Vec<f64>>, SampleTape)> {
    net.forward(frames, &net.build_cache())
}

pub use crate::layers::DelayTape;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec_dense(sizes: &[usize], q: f64, nu: usize) -> NetworkSpec {
        NetworkSpec {
            input: InputShape::Flat(sizes[0]),
            layers: sizes[1..]
                .iter()
                .map(|&out| LayerDesc::Dense { out })
                .collect(),
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig { q },
            nu,
        }
    }

    #[test]
    fn parse_architecture_tokens() {
        let arch = parse_architecture("8c5s2-16c3s1-p2s2-32c3s1-32c3s1-p2s2-10").unwrap();
        assert_eq!(arch.len(), 7);
        assert_eq!(
            arch[0],
            LayerDesc::Conv {
                filters: 8,
                k: 5,
                stride: 2,
                padding: 0
            }
        );
        assert_eq!(arch[2], LayerDesc::MinPool);
        assert_eq!(arch[6], LayerDesc::Dense { out: 10 });
        let arch = parse_architecture("64c3s1p1-10").unwrap();
        assert_eq!(
            arch[0],
            LayerDesc::Conv {
                filters: 64,
                k: 3,
                stride: 1,
                padding: 1
            }
        );
        assert!(parse_architecture("5x5").is_err());
        assert!(parse_architecture("").is_err());
    }

    #[test]
    fn preset_conv_stacks_have_expected_delay_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // event-camera digit stack on 34×34×2 input
        let spec = NetworkSpec {
            input: InputShape::Map(2, 34, 34),
            layers: parse_architecture("8c5s2-16c3s1-p2s2-32c3s1-32c3s1-p2s2-10").unwrap(),
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig::FAST,
            nu: 0,
        };
        let net = Network::build(&spec, &mut rng).unwrap();
        assert_eq!(net.n_delays(), 15_696);

        // gesture stack on 128×128×2 input
        let spec = NetworkSpec {
            input: InputShape::Map(2, 128, 128),
            layers: parse_architecture("8c7s3-16c5s2-p2s2-32c3s1-32c3s1-p2s2-11").unwrap(),
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig::FAST,
            nu: 0,
        };
        let net = Network::build(&spec, &mut rng).unwrap();
        assert_eq!(net.n_delays(), 19_216);

        // digit classifier 784-100-10
        let net = Network::build(&spec_dense(&[784, 100, 10], 1.0, 0), &mut rng).unwrap();
        assert_eq!(net.n_delays(), 79_400);
    }

    #[test]
    fn incompatible_shapes_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // conv on a flat input
        let spec = NetworkSpec {
            input: InputShape::Flat(64),
            layers: vec![
                LayerDesc::Conv {
                    filters: 4,
                    k: 3,
                    stride: 1,
                    padding: 0,
                },
                LayerDesc::Dense { out: 3 },
            ],
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig::SLOW,
            nu: 0,
        };
        assert!(Network::build(&spec, &mut rng).is_err());
        // pool directly after a dense layer
        let spec = NetworkSpec {
            input: InputShape::Flat(64),
            layers: vec![
                LayerDesc::Dense { out: 8 },
                LayerDesc::MinPool,
                LayerDesc::Dense { out: 3 },
            ],
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig::SLOW,
            nu: 0,
        };
        assert!(Network::build(&spec, &mut rng).is_err());
        // a network must end in a delay layer
        let spec = NetworkSpec {
            input: InputShape::Map(1, 8, 8),
            layers: vec![
                LayerDesc::Conv {
                    filters: 2,
                    k: 3,
                    stride: 1,
                    padding: 0,
                },
                LayerDesc::MinPool,
            ],
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig::SLOW,
            nu: 0,
        };
        assert!(Network::build(&spec, &mut rng).is_err());
    }

    #[test]
    fn output_layer_is_slow_and_memoryless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::build(&spec_dense(&[6, 8, 4], 0.5, 2), &mut rng).unwrap();
        match (&net.layers[0], &net.layers[1]) {
            (Layer::Dense(hidden), Layer::Dense(out)) => {
                assert_eq!(hidden.regime, RegimeConfig::FAST);
                assert!(hidden.ltm.is_some());
                assert_eq!(out.regime, RegimeConfig::SLOW);
                assert!(out.ltm.is_none());
            }
            _ => panic!("expected dense layers"),
        }
    }

    #[test]
    fn single_frame_forward_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::build(&spec_dense(&[5, 7, 3], 1.0, 0), &mut rng).unwrap();
        let frame = StandardizedTimes::new(
            crate::standardize::standardize(&[0.1, 0.9, -0.4, 0.3, -1.2])
                .unwrap()
                .times
                .values,
        );
        let (out, tape) = forward_once(&net, &[frame]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 3);
        assert!(out[0].iter().all(|v| v.is_finite()));
        assert_eq!(tape.frames.len(), 1);
    }

    #[test]
    fn inert_memory_equals_no_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let with_ltm = Network::build(&spec_dense(&[5, 6, 3], 1.0, 3), &mut rng).unwrap();
        let mut without = with_ltm.clone();
        for layer in &mut without.layers {
            match layer {
                Layer::Dense(d) => d.ltm = None,
                Layer::Conv(c) => c.ltm = None,
                Layer::MinPool { .. } => {}
            }
        }
        let frames: Vec<StandardizedTimes> = (0..4)
            .map(|s| {
                let t: Vec<f64> = (0..5).map(|i| ((i + s * 3) as f64 * 0.7).sin()).collect();
                StandardizedTimes::new(crate::standardize::standardize(&t).unwrap().times.values)
            })
            .collect();
        let (a, _) = forward_once(&with_ltm, &frames).unwrap();
        let (b, _) = forward_once(&without, &frames).unwrap();
        // α_raw = 0 ⇒ bit-identical outputs
        assert_eq!(a, b);
    }

    #[test]
    fn per_sample_batch_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::build(&spec_dense(&[6, 9, 4], 0.5, 2), &mut rng).unwrap();
        let cache = net.build_cache();
        let mk = |seed: usize| {
            let t: Vec<f64> = (0..6)
                .map(|i| ((i * 7 + seed * 13) as f64 * 0.31).sin())
                .collect();
            StandardizedTimes::new(crate::standardize::standardize(&t).unwrap().times.values)
        };
        let s1 = vec![mk(1), mk(2)];
        let s2 = vec![mk(3), mk(4)];
        let (o1, _) = net.forward(&s1, &cache).unwrap();
        let (o2, _) = net.forward(&s2, &cache).unwrap();
        // evaluating in the other order must be bit-identical
        let (o2b, _) = net.forward(&s2, &cache).unwrap();
        let (o1b, _) = net.forward(&s1, &cache).unwrap();
        assert_eq!(o1, o1b);
        assert_eq!(o2, o2b);
    }
}
