mod support;

use nastar_core::autodiff::Tape;
use nastar_core::encoder::{EncoderConfig, EncoderWeights, Param};
use nastar_core::{GridMap, NodeIndex, ProblemInstance};
use support::{rel_err, Rng};

fn weights_with(cfg: EncoderConfig, base: &EncoderWeights, flat: &[f64]) -> EncoderWeights {
    let mut at = 0;
    let tensors = base
        .parameter_list()
        .into_iter()
        .map(|(name, p)| {
            let n = p.values.len();
            let values = flat[at..at + n].to_vec();
            at += n;
            (name.to_string(), Param { shape: p.shape.clone(), values })
        })
        .collect();
    EncoderWeights::from_parameters(cfg, tensors).unwrap()
}

fn loss_and_grad(w: &EncoderWeights, inst: &ProblemInstance, grad: bool) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let bound = w.bind(&mut tape, grad).unwrap();
    let phi = w.forward(&mut tape, &bound, inst).unwrap();
    let n = inst.height() * inst.width();
    let r = tape.constant(&[inst.height(), inst.width()], (0..n).map(|i| (0.37 * i as f64).cos()).collect()).unwrap();
    let loss = tape.inner(phi, r).unwrap();
    let value = tape.value(loss)[0];
    if !grad {
        return (value, Vec::new());
    }
    let mut grads = tape.backward(loss).unwrap();
    (value, w.collect_gradients(&bound, &mut grads).unwrap().concat())
}

fn check(cfg: EncoderConfig, inst: &ProblemInstance, seed: u64) {
    let base = EncoderWeights::init(cfg, seed).unwrap();
    let mut rng = Rng::new(seed);
    // Random biases keep pre-activations off the leaky-ReLU kink.
    let flat: Vec<f64> = base
        .parameter_list()
        .into_iter()
        .flat_map(|(name, p)| {
            let bias = name.ends_with(".bias");
            p.values.iter().map(|&v| if bias { 0.2 * (rng.unit() - 0.5) } else { v }).collect::<Vec<_>>()
        })
        .collect();
    let w = weights_with(cfg, &base, &flat);
    let (_, analytic) = loss_and_grad(&w, inst, true);
    let mut numeric = vec![0.0; flat.len()];
    for k in 0..flat.len() {
        let h = 1e-6 * flat[k].abs().max(1.0);
        let mut p = flat.clone();
        p[k] += h;
        let (lp, _) = loss_and_grad(&weights_with(cfg, &base, &p), inst, false);
        p[k] -= 2.0 * h;
        let (lm, _) = loss_and_grad(&weights_with(cfg, &base, &p), inst, false);
        numeric[k] = (lp - lm) / (2.0 * h);
    }
    let err = rel_err(&analytic, &numeric);
    assert!(err < 1e-4, "encoder gradient rel err {err}");
}

#[test]
fn binary_encoder_gradient_matches_finite_differences() {
    let map = GridMap::from_ascii(&[
        "........", "..##....", "..##..#.", "......#.", ".####...", "........", "...#....", "........",
    ])
    .unwrap();
    let inst = ProblemInstance::new(map, NodeIndex::new(0, 0), NodeIndex::new(7, 7)).unwrap();
    let cfg = EncoderConfig { base_channels: 4, depth: 1, ..EncoderConfig::binary() };
    check(cfg, &inst, 11);
}

#[test]
fn image_encoder_gradient_matches_finite_differences() {
    let mut rng = Rng::new(5);
    let planes = (0..3 * 64).map(|_| rng.unit()).collect();
    let map = GridMap::image(8, 8, planes).unwrap();
    let inst = ProblemInstance::new(map, NodeIndex::new(1, 2), NodeIndex::new(6, 5)).unwrap();
    let cfg = EncoderConfig { base_channels: 3, depth: 1, ..EncoderConfig::image() };
    check(cfg, &inst, 12);
}
