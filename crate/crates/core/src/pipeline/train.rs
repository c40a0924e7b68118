//! Mini-batch Adam training on the full (standard + intermediate) L1 objective.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::patches::{augment, PatchPair};
use crate::error::{Error, Result};
use crate::net::{loss_full, SrNet};
use crate::scalar::Scalar;
use crate::tensor::{adam_step, AdamState, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// One-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub net: SrNet<T>,
    pub history: Vec<EpochStats>,
}

/// splitmix64 finalizer; derives independent stream seeds from the master seed.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stack<T: Scalar>(tensors: &[Tensor<T>]) -> Result<Tensor<T>> {
    let (h, w) = tensors[0].plane_dims();
    let mut data = Vec::with_capacity(tensors.len() * h * w);
    for t in tensors {
        if t.shape() != [h, w] {
            return Err(Error::shape("patch batch", t.shape(), &[h, w]));
        }
        data.extend_from_slice(t.data());
    }
    Tensor::new(&[tensors.len(), 1, h, w], data)
}

/// Optimizer state for every parameter tensor of a network.
pub struct NetOptimizer<T> {
    states: Vec<(AdamState<T>, AdamState<T>)>,
}

impl<T: Scalar> NetOptimizer<T> {
    pub fn new(net: &SrNet<T>, learning_rate: f64) -> Self {
        let states = net
            .layers
            .iter()
            .map(|l| {
                (
                    AdamState::new(l.weights.shape(), learning_rate),
                    AdamState::new(l.bias.shape(), learning_rate),
                )
            })
            .collect();
        Self { states }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        for (w, b) in &mut self.states {
            w.learning_rate = lr;
            b.learning_rate = lr;
        }
    }

    /// One forward/backward/update on a batch. Returns the batch loss.
    pub fn step(&mut self, net: &mut SrNet<T>, lr_batch: &Tensor<T>, hr_batch: &Tensor<T>, lambda: f64) -> Result<f64> {
        let trace = net.forward(lr_batch)?;
        let loss = loss_full(&trace, hr_batch, lambda)?.to_f64_lossy();
        if !loss.is_finite() {
            return Err(Error::NonFinite("batch loss".into()));
        }
        let grads = net.backward(&trace, hr_batch, lambda)?;
        for ((layer, g), (sw, sb)) in net.layers.iter_mut().zip(&grads.layers).zip(&mut self.states) {
            adam_step(&mut layer.weights, &g.weights, sw)?;
            adam_step(&mut layer.bias, &g.bias, sb)?;
        }
        net.bump_generation();
        Ok(loss)
    }
}

/// Trains `net` on `pairs` for `cfg.epochs` epochs.
///
/// Each epoch visits every pair once in a seed-derived order. Blur
/// augmentation draws come from a per-(epoch, position) stream so results do
/// not depend on how batches are produced. `on_epoch` runs after each epoch
/// (checkpointing, logging) and may abort training by returning an error.
pub fn train_stage<T: Scalar>(
    pairs: &[PatchPair<T>],
    mut net: SrNet<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats, &SrNet<T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let first = pairs.first().ok_or_else(|| Error::invalid("no training pairs"))?;
    let (lh, lw) = first.lr.plane_dims();
    let want = net.config.output_dims(lh, lw);
    if first.hr.plane_dims() != want {
        return Err(Error::invalid(format!(
            "pair shapes {:?} -> {:?} do not match the network's {:?} upscaling",
            first.lr.shape(),
            first.hr.shape(),
            net.config.axis_mode
        )));
    }
    net.config.lambda = cfg.lambda;
    let lambda = net.config.effective_lambda();
    let mut opt = NetOptimizer::new(&net, cfg.lr_initial);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        opt.set_learning_rate(lr);
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64, u64::MAX)));

        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut lr_patches = Vec::with_capacity(chunk.len());
            let mut hr_patches = Vec::with_capacity(chunk.len());
            for (offset, &i) in chunk.iter().enumerate() {
                let position = (batch_idx * cfg.batch_size + offset) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64, position));
                lr_patches.push(augment(&pairs[i].lr, cfg, &mut rng)?);
                hr_patches.push(pairs[i].hr.clone());
            }
            let loss = opt
                .step(&mut net, &stack(&lr_patches)?, &stack(&hr_patches)?, lambda)
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch: epoch + 1, batch: batch_idx },
                    other => other,
                })?;
            loss_sum += loss * chunk.len() as f64;
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss: loss_sum / pairs.len() as f64,
            learning_rate: lr,
        };
        log::debug!("epoch {:>3}  loss {:.6}  lr {:.1e}", stats.epoch, stats.mean_loss, lr);
        on_epoch(&stats, &net)?;
        history.push(stats);
    }
    Ok(TrainOutcome { net, history })
}

/// Loss history as `epoch,mean_loss,learning_rate` CSV with a header row.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,mean_loss,learning_rate\n");
    for h in history {
        s.push_str(&format!("{},{:.9},{:e}\n", h.epoch, h.mean_loss, h.learning_rate));
    }
    s
}
