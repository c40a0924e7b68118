//! Test-only oracles shared by the integration suites. Nothing here calls
//! into the backward passes it is used to check.
#![allow(dead_code)]

use medsr_core::net::{loss_full, ForwardTrace, SrNet};
use medsr_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero entries from
/// dominating on rounding noise alone.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.data_mut()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Which side of every ReLU and L1 kink the forward pass landed on.
pub fn kink_pattern(trace: &ForwardTrace<f64>, target: &Tensor<f64>) -> Vec<i8> {
    let sign = |v: f64| (v > 0.0) as i8 - (v < 0.0) as i8;
    let mut p: Vec<i8> = trace
        .activations
        .iter()
        .flat_map(|a| a.data().iter().map(|&v| sign(v)))
        .collect();
    p.extend(trace.final_hr.data().iter().zip(target.data()).map(|(a, b)| sign(a - b)));
    p.extend(trace.intermediate_hr.data().iter().zip(target.data()).map(|(a, b)| sign(a - b)));
    p
}

pub struct ParamCheck {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
}

/// Compares `analytic` (flattened per layer as weights then bias) against central
/// differences of `loss_full`, skipping parameters whose perturbation crosses a kink.
pub fn check_network_grads(
    net: &SrNet<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    lambda: f64,
    analytic: &[(Vec<f64>, Vec<f64>)],
) -> ParamCheck {
    let base = kink_pattern(&net.forward(input).unwrap(), target);
    let mut probe = net.clone();
    let mut out = ParamCheck {
        checked: 0,
        skipped: 0,
        max_rel: 0.0,
    };
    for (li, (gw, gb)) in analytic.iter().enumerate() {
        for (which, grads) in [(0usize, gw), (1, gb)] {
            for (i, &g) in grads.iter().enumerate() {
                let mut eval = |delta: f64| {
                    let t = if which == 0 {
                        &mut probe.layers[li].weights
                    } else {
                        &mut probe.layers[li].bias
                    };
                    let orig = t.data()[i];
                    t.data_mut()[i] = orig + delta;
                    let tr = probe.forward(input).unwrap();
                    let loss = loss_full(&tr, target, lambda).unwrap();
                    let pattern = kink_pattern(&tr, target);
                    let t = if which == 0 {
                        &mut probe.layers[li].weights
                    } else {
                        &mut probe.layers[li].bias
                    };
                    t.data_mut()[i] = orig;
                    (loss, pattern)
                };
                let (up, pu) = eval(FD_STEP);
                let (down, pd) = eval(-FD_STEP);
                if pu != base || pd != base {
                    out.skipped += 1;
                    continue;
                }
                let fd = (up - down) / (2.0 * FD_STEP);
                out.max_rel = out.max_rel.max(rel_err(g, fd));
                out.checked += 1;
            }
        }
    }
    out
}

pub fn flatten_grads(g: &medsr_core::net::Gradients<f64>) -> Vec<(Vec<f64>, Vec<f64>)> {
    g.layers
        .iter()
        .map(|l| (l.weights.data().to_vec(), l.bias.data().to_vec()))
        .collect()
}

/// Direct-sum 3x3 zero-padded convolution of one `C x H x W` sample.
pub fn direct_conv(x: &[f64], c: usize, h: usize, w: usize, weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let o = bias.len();
    let mut out = vec![0.0; o * h * w];
    for oc in 0..o {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = bias[oc];
                for ch in 0..c {
                    for dy in 0..3 {
                        for dx in 0..3 {
                            let sy = y as isize + dy as isize - 1;
                            let sx = xx as isize + dx as isize - 1;
                            if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                acc += x[(ch * h + sy as usize) * w + sx as usize]
                                    * weights[((oc * c + ch) * 3 + dy) * 3 + dx];
                            }
                        }
                    }
                }
                out[(oc * h + y) * w + xx] = acc;
            }
        }
    }
    out
}
