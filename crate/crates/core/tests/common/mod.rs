//! Oracles shared by the integration tests.
#![allow(dead_code)]

use growdepth::net::{loss, Activation, Dense, NetShape, ResidualNet};
use growdepth::{GateMask, RngState};
use ndarray::Array2;

const STEP: f64 = 1e-5;

pub fn random_net(shape: NetShape, activation: Activation, rng: &mut RngState) -> ResidualNet<f64> {
    let mut net = ResidualNet::init(shape, rng)
        .unwrap()
        .with_activation(activation);
    net.params.head = Dense::gaussian(shape.width, shape.classes, 1.0 / shape.width as f64, rng);
    for d in net.params.dense_maps_mut() {
        d.b.mapv_inplace(|_| 0.1 * rng.normal());
    }
    net
}

pub fn random_batch(
    rows: usize,
    cols: usize,
    classes: usize,
    rng: &mut RngState,
) -> (Array2<f64>, Vec<usize>) {
    let x = Array2::from_shape_simple_fn((rows, cols), || rng.normal());
    let y = (0..rows)
        .map(|_| (rng.next_u64() % classes as u64) as usize)
        .collect();
    (x, y)
}

pub fn random_mask(blocks: usize, rng: &mut RngState) -> GateMask {
    GateMask::new((0..blocks).map(|_| rng.uniform() < 0.6).collect())
}

/// Max over all parameters of `|analytic - numeric| / max(|analytic|, |numeric|, 1e-4)`.
/// The floor keeps entries whose true gradient is at roundoff level from
/// dominating; 1e-4 is well above the ~1e-11 roundoff of the difference.
pub fn max_rel_error(net: &ResidualNet<f64>, x: &Array2<f64>, y: &[usize], mask: &GateMask) -> f64 {
    let cache = net.forward_train(x.view(), mask).unwrap();
    let grads = net.backward(&cache, y).unwrap();
    let analytic: Vec<f64> = grads
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut flat = 0;
    let tensors = probe
        .params
        .slices()
        .iter()
        .map(|s| s.len())
        .collect::<Vec<_>>();
    for (t, len) in tensors.into_iter().enumerate() {
        for i in 0..len {
            let orig = probe.params.slices()[t][i];
            probe.params.slices_mut()[t][i] = orig + STEP;
            let up = loss(&probe.forward_masked(x.view(), mask).unwrap(), y).unwrap();
            probe.params.slices_mut()[t][i] = orig - STEP;
            let down = loss(&probe.forward_masked(x.view(), mask).unwrap(), y).unwrap();
            probe.params.slices_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[flat];
            let denom = a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((a - numeric).abs() / denom);
            flat += 1;
        }
    }
    worst
}

/// `E_mask[forward_train]` by summing over all `2^L` masks weighted by their
/// probability.
pub fn enumerated_expectation(
    net: &ResidualNet<f64>,
    x: &Array2<f64>,
    probs: &[f64],
) -> Array2<f64> {
    let blocks = probs.len();
    let mut acc = Array2::<f64>::zeros((x.nrows(), net.shape().classes));
    for bits in 0..(1u64 << blocks) {
        let mask = GateMask::from_bits(bits, blocks);
        let weight: f64 = probs
            .iter()
            .zip(mask.alive())
            .map(|(&p, &a)| if a { p } else { 1.0 - p })
            .product();
        let logits = net.forward_masked(x.view(), &mask).unwrap();
        acc.scaled_add(weight, &logits);
    }
    acc
}
