//! Ten-layer super-resolution network: a low-resolution conv block, a
//! sub-pixel shuffle, and a high-resolution refinement block.
//!
//! Layer indices below are zero-based (`conv[0]` is the first layer).
//! Block 1 is `conv[0..6]`, block 2 is `conv[6..10]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shuffle::{pixel_shuffle_1d, pixel_shuffle_2d, pixel_unshuffle_1d, pixel_unshuffle_2d, ShuffleAxis};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    add_assign, conv2d_backward, conv2d_backward_params, conv2d_forward, l1_loss, relu, relu_backward, ConvGrads,
    ConvLayer, Tensor,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    /// Upscale height and width by `r` (`r^2` maps before the shuffle).
    TwoAxes,
    /// Upscale a single axis by `r` (`r` maps before the shuffle).
    OneAxis(ShuffleAxis),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrNetConfig {
    pub scale: usize,
    pub axis_mode: AxisMode,
    pub base_filters: usize,
    pub enable_second_block: bool,
    pub enable_intermediate_loss: bool,
    pub enable_short_skips: bool,
    pub enable_long_skip: bool,
    pub lambda: f64,
    /// ReLU on the maps fed to the shuffle. Off by default so the
    /// intermediate image is not forced non-negative.
    pub relu_before_shuffle: bool,
    /// ReLU on the network output. Off by default.
    pub relu_on_output: bool,
}

pub const SUPPORTED_SCALES: [usize; 3] = [1, 2, 4];

impl SrNetConfig {
    pub fn two_axes(scale: usize) -> Self {
        Self {
            scale,
            axis_mode: AxisMode::TwoAxes,
            base_filters: 32,
            enable_second_block: true,
            enable_intermediate_loss: true,
            enable_short_skips: true,
            enable_long_skip: true,
            lambda: 1.0,
            relu_before_shuffle: false,
            relu_on_output: false,
        }
    }

    pub fn one_axis(scale: usize, axis: ShuffleAxis) -> Self {
        Self {
            axis_mode: AxisMode::OneAxis(axis),
            ..Self::two_axes(scale)
        }
    }

    pub fn with_filters(mut self, filters: usize) -> Self {
        self.base_filters = filters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_SCALES.contains(&self.scale) {
            return Err(Error::invalid(format!("scale factor {} not in {SUPPORTED_SCALES:?}", self.scale)));
        }
        if self.base_filters == 0 {
            return Err(Error::invalid("base_filters must be at least 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Channels produced by the layer feeding the shuffle.
    pub fn shuffle_channels(&self) -> usize {
        match self.axis_mode {
            AxisMode::TwoAxes => self.scale * self.scale,
            AxisMode::OneAxis(_) => self.scale,
        }
    }

    pub fn layer_count(&self) -> usize {
        if self.enable_second_block {
            10
        } else {
            6
        }
    }

    /// `(out, in)` channels of every conv layer, in order.
    pub fn topology(&self) -> Vec<(usize, usize)> {
        let f = self.base_filters;
        let mut t = vec![(f, 1), (f, f), (f, f), (f, f), (f, f), (self.shuffle_channels(), f)];
        if self.enable_second_block {
            t.extend([(f, 1), (f, f), (f, f), (1, f)]);
        }
        t
    }

    /// Weight of the intermediate term actually used in training. Without
    /// the second block the intermediate and final images coincide, so the
    /// term is dropped rather than double-counted.
    pub fn effective_lambda(&self) -> f64 {
        if self.enable_intermediate_loss && self.enable_second_block {
            self.lambda
        } else {
            0.0
        }
    }

    /// Output extent for an `h x w` input.
    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let r = self.scale;
        match self.axis_mode {
            AxisMode::TwoAxes => (h * r, w * r),
            AxisMode::OneAxis(ShuffleAxis::Rows) => (h * r, w),
            AxisMode::OneAxis(ShuffleAxis::Cols) => (h, w * r),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrNet<T> {
    pub config: SrNetConfig,
    pub layers: Vec<ConvLayer<T>>,
    generation: u64,
}

/// Activations cached by [`SrNet::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub input: Tensor<T>,
    /// Output of each conv layer after its activation (if any), skip additions included.
    pub activations: Vec<Tensor<T>>,
    pub intermediate_hr: Tensor<T>,
    pub final_hr: Tensor<T>,
    generation: u64,
}

impl<T> ForwardTrace<T> {
    pub fn generation(&self) -> u64 {
        self.generation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<ConvGrads<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|g| g.weights.is_finite() && g.bias.is_finite())
    }
}

const SHORT_SKIP_TARGETS: [(usize, usize); 2] = [(2, 0), (8, 6)];
const LONG_SKIP_TARGET: (usize, usize) = (4, 0);

/// Builds a network with He-normal weights drawn from `seed`.
pub fn build_network<T: Scalar>(config: SrNetConfig, seed: u64) -> Result<SrNet<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = config
        .topology()
        .into_iter()
        .map(|(o, i)| ConvLayer::he_normal(o, i, &mut rng))
        .collect();
    Ok(SrNet {
        config,
        layers,
        generation: 0,
    })
}

impl<T: Scalar> SrNet<T> {
    pub fn from_layers(config: SrNetConfig, layers: Vec<ConvLayer<T>>) -> Result<Self> {
        config.validate()?;
        let topo = config.topology();
        if layers.len() != topo.len() {
            return Err(Error::invalid(format!("expected {} layers, got {}", topo.len(), layers.len())));
        }
        for (idx, (layer, (o, i))) in layers.iter().zip(topo).enumerate() {
            if layer.out_channels() != o || layer.in_channels() != i {
                return Err(Error::invalid(format!(
                    "layer {} has shape {:?}, topology needs {o}x{i}x3x3",
                    idx + 1,
                    layer.weights.shape()
                )));
            }
        }
        Ok(Self {
            config,
            layers,
            generation: 0,
        })
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Marks parameters as changed; traces from earlier generations become stale.
    pub fn bump_generation(&mut self) {
        self.generation += 1;
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::parameter_count).sum()
    }

    pub fn cast<U: Scalar>(&self) -> SrNet<U> {
        SrNet {
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayer {
                    weights: l.weights.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            generation: 0,
        }
    }

    fn has_relu(&self, idx: usize) -> bool {
        match idx {
            5 => self.config.relu_before_shuffle,
            9 => self.config.relu_on_output,
            _ => true,
        }
    }

    fn skip_source(&self, idx: usize) -> Option<usize> {
        if self.config.enable_short_skips {
            if let Some(&(_, src)) = SHORT_SKIP_TARGETS.iter().find(|(t, _)| *t == idx) {
                return Some(src);
            }
        }
        if self.config.enable_long_skip && idx == LONG_SKIP_TARGET.0 {
            return Some(LONG_SKIP_TARGET.1);
        }
        None
    }

    fn shuffle(&self, maps: &Tensor<T>) -> Result<Tensor<T>> {
        match self.config.axis_mode {
            AxisMode::TwoAxes => pixel_shuffle_2d(maps, self.config.scale),
            AxisMode::OneAxis(axis) => pixel_shuffle_1d(maps, self.config.scale, axis),
        }
    }

    fn unshuffle(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        match self.config.axis_mode {
            AxisMode::TwoAxes => pixel_unshuffle_2d(image, self.config.scale),
            AxisMode::OneAxis(axis) => pixel_unshuffle_1d(image, self.config.scale, axis),
        }
    }

    fn layer_forward(&self, idx: usize, input: &Tensor<T>, acts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let mut z = conv2d_forward(input, &self.layers[idx])?;
        if let Some(src) = self.skip_source(idx) {
            add_assign(&mut z, &acts[src])?;
        }
        Ok(if self.has_relu(idx) { relu(&z) } else { z })
    }

    /// Runs the network on an `h x w` image or an `N x 1 x h x w` batch.
    /// Outputs have the same rank as the input.
    pub fn forward(&self, input: &Tensor<T>) -> Result<ForwardTrace<T>> {
        let batch = match *input.shape() {
            [h, w] => input.clone().reshape(&[1, 1, h, w])?,
            [_, 1, _, _] => input.clone(),
            _ => {
                return Err(Error::invalid(format!(
                    "network input must be h x w or N x 1 x h x w, got {:?}",
                    input.shape()
                )))
            }
        };
        if !batch.is_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut acts: Vec<Tensor<T>> = Vec::with_capacity(self.layers.len());
        for idx in 0..6 {
            let src = if idx == 0 { &batch } else { &acts[idx - 1] };
            let a = self.layer_forward(idx, src, &acts)?;
            acts.push(a);
        }
        let intermediate = self.shuffle(&acts[5])?;
        let final_hr = if self.config.enable_second_block {
            for idx in 6..10 {
                let src = if idx == 6 { &intermediate } else { &acts[idx - 1] };
                let a = self.layer_forward(idx, src, &acts)?;
                acts.push(a);
            }
            acts[9].clone()
        } else {
            intermediate.clone()
        };
        let (intermediate_hr, final_hr) = if input.rank() == 2 {
            let (h, w) = final_hr.plane_dims();
            (intermediate.reshape(&[h, w])?, final_hr.reshape(&[h, w])?)
        } else {
            (intermediate, final_hr)
        };
        Ok(ForwardTrace {
            input: batch,
            activations: acts,
            intermediate_hr,
            final_hr,
            generation: self.generation,
        })
    }

    /// Gradients of `L1(final, target) + lambda * L1(intermediate, target)`.
    ///
    /// Block-1 parameters collect both terms; block-2 parameters only the first.
    pub fn backward(&self, trace: &ForwardTrace<T>, target: &Tensor<T>, lambda: f64) -> Result<Gradients<T>> {
        if trace.generation != self.generation {
            return Err(Error::StaleTrace {
                trace: trace.generation,
                current: self.generation,
            });
        }
        if trace.activations.len() != self.layers.len() {
            return Err(Error::invalid("trace does not belong to this network"));
        }
        let batch_shape = batch_shape_of(&trace.final_hr);
        let target = target.clone().reshape(&batch_shape).map_err(|_| {
            Error::shape("loss target", target.shape(), trace.final_hr.shape())
        })?;
        let final_hr = trace.final_hr.clone().reshape(&batch_shape)?;
        let inter_hr = trace.intermediate_hr.clone().reshape(&batch_shape)?;
        let (_, g_final) = l1_loss(&final_hr, &target)?;
        let (_, g_inter) = l1_loss(&inter_hr, &target)?;
        let lam = T::from_f64_lossy(lambda);

        let acts = &trace.activations;
        let n_layers = self.layers.len();
        let mut grads: Vec<Option<ConvGrads<T>>> = vec![None; n_layers];
        // Gradient with respect to each activation, accumulated from consumers and skips.
        let mut g_act: Vec<Option<Tensor<T>>> = vec![None; n_layers];
        let accumulate = |slot: &mut Option<Tensor<T>>, g: Tensor<T>| -> Result<()> {
            match slot {
                Some(acc) => add_assign(acc, &g),
                None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        };

        let mut g_shuffled = if self.config.enable_second_block {
            accumulate(&mut g_act[9], g_final)?;
            let g_s = self.backprop_range(6..10, &inter_hr, acts, &mut g_act, &mut grads, true)?;
            g_s.expect("input gradient requested")
        } else {
            g_final
        };
        add_assign(&mut g_shuffled, &g_inter.scale(lam))?;
        accumulate(&mut g_act[5], self.unshuffle(&g_shuffled)?)?;
        self.backprop_range(0..6, &trace.input, acts, &mut g_act, &mut grads, false)?;

        Ok(Gradients {
            layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
        })
    }

    /// Walks `range` in reverse, turning activation gradients into parameter
    /// gradients. Returns the gradient at the block input when requested.
    fn backprop_range(
        &self,
        range: std::ops::Range<usize>,
        block_input: &Tensor<T>,
        acts: &[Tensor<T>],
        g_act: &mut [Option<Tensor<T>>],
        grads: &mut [Option<ConvGrads<T>>],
        want_input: bool,
    ) -> Result<Option<Tensor<T>>> {
        let first = range.start;
        let mut g_block_input = None;
        for idx in range.rev() {
            let g_out = g_act[idx].take().expect("downstream gradient present");
            let g_z = if self.has_relu(idx) {
                relu_backward(&acts[idx], &g_out)?
            } else {
                g_out
            };
            if let Some(src) = self.skip_source(idx) {
                match &mut g_act[src] {
                    Some(acc) => add_assign(acc, &g_z)?,
                    slot => *slot = Some(g_z.clone()),
                }
            }
            let input = if idx == first { block_input } else { &acts[idx - 1] };
            if idx == first && !want_input {
                grads[idx] = Some(conv2d_backward_params(input, &self.layers[idx], &g_z)?);
            } else {
                let (g_in, g) = conv2d_backward(input, &self.layers[idx], &g_z)?;
                grads[idx] = Some(g);
                if idx == first {
                    g_block_input = Some(g_in);
                } else {
                    match &mut g_act[idx - 1] {
                        Some(acc) => add_assign(acc, &g_in)?,
                        slot => *slot = Some(g_in),
                    }
                }
            }
        }
        Ok(g_block_input)
    }
}

fn batch_shape_of<T: Scalar>(t: &Tensor<T>) -> Vec<usize> {
    match *t.shape() {
        [h, w] => vec![1, 1, h, w],
        ref s => s.to_vec(),
    }
}

/// `L1(final, target) + lambda * L1(intermediate, target)`, both as means.
pub fn loss_full<T: Scalar>(trace: &ForwardTrace<T>, target: &Tensor<T>, lambda: f64) -> Result<T> {
    let (standard, _) = l1_loss(&trace.final_hr, target)?;
    let (intermediate, _) = l1_loss(&trace.intermediate_hr, target)?;
    Ok(standard + T::from_f64_lossy(lambda) * intermediate)
}

/// Loss of the final output alone.
pub fn loss_standard<T: Scalar>(trace: &ForwardTrace<T>, target: &Tensor<T>) -> Result<T> {
    Ok(l1_loss(&trace.final_hr, target)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_channel_counts() {
        let net: SrNet<f32> = build_network(SrNetConfig::two_axes(2), 0).unwrap();
        assert_eq!(net.layers[5].out_channels(), 4);
        let net: SrNet<f32> = build_network(SrNetConfig::one_axis(2, ShuffleAxis::Rows), 0).unwrap();
        assert_eq!(net.layers[5].out_channels(), 2);
        let net: SrNet<f32> = build_network(SrNetConfig::two_axes(4), 0).unwrap();
        assert_eq!(net.layers[5].out_channels(), 16);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(build_network::<f32>(SrNetConfig::two_axes(3), 0).is_err());
        assert!(build_network::<f32>(SrNetConfig::two_axes(2).with_filters(0), 0).is_err());
        let mut c = SrNetConfig::two_axes(2);
        c.lambda = -1.0;
        assert!(build_network::<f32>(c, 0).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a: SrNet<f32> = build_network(SrNetConfig::two_axes(2), 17).unwrap();
        let b: SrNet<f32> = build_network(SrNetConfig::two_axes(2), 17).unwrap();
        let c: SrNet<f32> = build_network(SrNetConfig::two_axes(2), 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn output_shapes() {
        let net: SrNet<f32> = build_network(SrNetConfig::two_axes(2).with_filters(4), 1).unwrap();
        let tr = net.forward(&Tensor::full(&[7, 7], 0.5)).unwrap();
        assert_eq!(tr.final_hr.shape(), &[14, 14]);
        assert_eq!(tr.intermediate_hr.shape(), &[14, 14]);
        let net: SrNet<f32> = build_network(SrNetConfig::one_axis(2, ShuffleAxis::Rows).with_filters(4), 1).unwrap();
        let tr = net.forward(&Tensor::full(&[7, 7], 0.5)).unwrap();
        assert_eq!(tr.final_hr.shape(), &[14, 7]);
        let tr = net.forward(&Tensor::full(&[3, 1, 5, 6], 0.5)).unwrap();
        assert_eq!(tr.final_hr.shape(), &[3, 1, 10, 6]);
    }

    #[test]
    fn without_second_block_outputs_coincide() {
        let mut cfg = SrNetConfig::two_axes(2).with_filters(3);
        cfg.enable_second_block = false;
        let net: SrNet<f64> = build_network(cfg, 4).unwrap();
        assert_eq!(net.layers.len(), 6);
        let tr = net.forward(&Tensor::full(&[4, 5], 0.3)).unwrap();
        assert_eq!(tr.final_hr, tr.intermediate_hr);
    }

    #[test]
    fn loss_composition() {
        let net: SrNet<f64> = build_network(SrNetConfig::two_axes(2).with_filters(2), 3).unwrap();
        let tr = net.forward(&Tensor::full(&[3, 3], 0.4)).unwrap();
        let target = Tensor::full(&[6, 6], 0.5);
        let a = loss_standard(&tr, &target).unwrap();
        let b = l1_loss(&tr.intermediate_hr, &target).unwrap().0;
        assert_eq!(loss_full(&tr, &target, 0.0).unwrap(), a);
        assert!((loss_full(&tr, &target, 1.0).unwrap() - (a + b)).abs() < 1e-15);
        assert!(loss_full(&tr, &Tensor::full(&[5, 6], 0.5), 1.0).is_err());
    }

    #[test]
    fn stale_trace_rejected() {
        let mut net: SrNet<f64> = build_network(SrNetConfig::two_axes(2).with_filters(2), 3).unwrap();
        let tr = net.forward(&Tensor::full(&[3, 3], 0.4)).unwrap();
        net.bump_generation();
        let err = net.backward(&tr, &Tensor::full(&[6, 6], 0.5), 1.0).unwrap_err();
        assert!(matches!(err, Error::StaleTrace { .. }));
    }

    #[test]
    fn paper_parameter_budget() {
        // 32 filters over 32 channels of 3x3 plus bias.
        let net: SrNet<f32> = build_network(SrNetConfig::two_axes(2), 0).unwrap();
        assert_eq!(net.layers[1].parameter_count() / 32, 289);
    }
}
