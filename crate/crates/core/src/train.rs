//! Closed-list L1 loss, RMSProp, and the training loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::slice;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::diff_astar::{self, DiffAstarConfig, ExpansionMode, SearchVariant};
use crate::encoder::{round_f32, EncoderConfig, EncoderWeights};
use crate::error::{Error, Result};
use crate::grid::{for_each_neighbor, NodeMask, ProblemInstance};
use crate::math;
use crate::metrics::{self, map_scores, score_instance};
use crate::planner::NeuralPlanner;

/// Maps at least this wide train against a dilated expert path.
pub const DILATE_MIN_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    pub gt_dilate: bool,
    pub seed: u64,
    pub variant: SearchVariant,
    pub mode: ExpansionMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 100,
            learning_rate: 0.001,
            rms_decay: 0.99,
            rms_eps: 1e-8,
            gt_dilate: false,
            seed: 0,
            variant: SearchVariant::NeuralAstar,
            mode: ExpansionMode::BinaryMasked,
        }
    }
}

impl TrainConfig {
    /// Defaults with dilation switched on for maps at least 64 wide.
    pub fn for_width(width: usize) -> Self {
        Self { gt_dilate: width >= DILATE_MIN_WIDTH, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.rms_eps > 0.0) {
            return Err(Error::invalid("learning rate and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return Err(Error::invalid("rms_decay must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Mean L1 distance between the closed list and the expert path mask.
pub fn l1_loss(tape: &mut Tape, closed: Var, gt: &NodeMask) -> Result<Var> {
    if tape.shape(closed) != [gt.height(), gt.width()] {
        return Err(Error::shape(format!(
            "closed list {:?} against a {}x{} path mask",
            tape.shape(closed),
            gt.height(),
            gt.width()
        )));
    }
    let target = tape.constant(&[gt.height(), gt.width()], gt.to_f64())?;
    let diff = tape.sub(closed, target)?;
    let abs = tape.abs(diff);
    let total = tape.reduce_sum(abs);
    Ok(tape.scale(total, 1.0 / (gt.height() * gt.width()) as f64))
}

/// Dilation with a full 3×3 structuring element; outside the map counts as empty.
pub fn dilate_gt(gt: &NodeMask) -> NodeMask {
    let (h, w) = (gt.height(), gt.width());
    let src = gt.values();
    let mut out = src.to_vec();
    for i in 0..h * w {
        if src[i] == 1 {
            for_each_neighbor(h, w, i, |j| out[j] = 1);
        }
    }
    NodeMask::from_values(h, w, out).expect("same shape")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Running mean of squared gradients, one buffer per parameter.
    pub acc: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(weights: &EncoderWeights) -> Self {
        Self { acc: weights.parameter_list().iter().map(|(_, p)| vec![0.0; p.values.len()]).collect(), step: 0 }
    }
}

/// `acc ← d·acc + (1-d)·g²`, `p ← p - lr·g / (sqrt(acc) + eps)`.
pub fn rmsprop_update(p: &mut [f64], g: &[f64], acc: &mut [f64], lr: f64, decay: f64, eps: f64) {
    for ((p, &g), a) in p.iter_mut().zip(g).zip(acc.iter_mut()) {
        *a = decay * *a + (1.0 - decay) * g * g;
        *p -= lr * g / (math::sqrt(*a) + eps);
    }
}

/// One optimizer step over every parameter. Parameters are rounded to `f32`
/// afterwards so saved weights reload exactly.
pub fn rmsprop_step(
    weights: &mut EncoderWeights,
    grads: &[Vec<f64>],
    state: &mut OptimizerState,
    lr: f64,
    decay: f64,
    eps: f64,
) -> Result<()> {
    let names: Vec<_> =
        weights.parameter_list().iter().map(|(n, p)| (alloc::string::String::from(*n), p.values.len())).collect();
    if state.acc.len() != names.len() {
        return Err(Error::shape("optimizer state does not match the parameters"));
    }
    for (i, (name, len)) in names.iter().enumerate() {
        match grads.get(i) {
            Some(g) if g.len() == *len => {}
            _ => return Err(Error::MissingGradient(name.clone())),
        }
        if state.acc[i].len() != *len {
            return Err(Error::shape(format!("optimizer state for `{name}` has the wrong size")));
        }
    }
    for (i, p) in weights.values_mut().enumerate() {
        rmsprop_update(p, &grads[i], &mut state.acc[i], lr, decay, eps);
        p.iter_mut().for_each(|v| *v = round_f32(*v));
    }
    state.step += 1;
    Ok(())
}

/// Loss and parameter gradients for one instance on a fresh tape.
pub fn instance_gradients(
    weights: &EncoderWeights,
    inst: &ProblemInstance,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let gt = inst.gt_path.as_ref().ok_or_else(|| Error::invalid("training instances need an expert path"))?;
    let target = if cfg.gt_dilate { dilate_gt(gt) } else { gt.clone() };
    let dcfg = DiffAstarConfig::for_map(inst.height(), inst.width(), cfg.mode, cfg.variant);
    let mut tape = Tape::new();
    let bound = weights.bind(&mut tape, true)?;
    let phi = weights.forward(&mut tape, &bound, inst)?;
    let out = diff_astar::run(&mut tape, slice::from_ref(inst), &[phi], &dcfg)?;
    let loss = l1_loss(&mut tape, out[0].closed, &target)?;
    let value = tape.value(loss)[0];
    let mut grads = tape.backward(loss)?;
    Ok((value, weights.collect_gradients(&bound, &mut grads)?))
}

/// Validation instances with their vanilla-A* expansion counts and optimal
/// lengths precomputed.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    items: Vec<(u64, ProblemInstance, usize, usize)>,
}

impl ValidationSet {
    pub fn new(items: impl IntoIterator<Item = (u64, ProblemInstance)>) -> Result<Self> {
        let items = items
            .into_iter()
            .enumerate()
            .map(|(i, (map_id, inst))| {
                let e_star = metrics::baseline_expansions(&inst).map_err(|e| e.at_instance(i))?;
                let opt_len = metrics::optimal_length(&inst).map_err(|e| e.at_instance(i))?;
                Ok((map_id, inst, e_star, opt_len))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Mean per-map Opt, Exp, and Hmean of the planner.
    pub fn score(&self, planner: &NeuralPlanner) -> Result<ValScores> {
        let mut scores = Vec::with_capacity(self.items.len());
        for (i, (map_id, inst, e_star, opt_len)) in self.items.iter().enumerate() {
            let r = planner.plan(inst).map_err(|e| e.at_instance(i))?;
            scores.push(score_instance(inst, *map_id, Some(&r.path), Some(r.explored_count), *e_star, *opt_len));
        }
        let maps = map_scores(&scores);
        let n = maps.len().max(1) as f64;
        Ok(ValScores {
            opt: maps.iter().map(|m| m.opt).sum::<f64>() / n,
            exp: maps.iter().map(|m| m.exp).sum::<f64>() / n,
            hmean: maps.iter().map(|m| m.hmean).sum::<f64>() / n,
        })
    }
}

use crate::planner::Planner as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValScores {
    pub opt: f64,
    pub exp: f64,
    pub hmean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_opt: f64,
    pub val_exp: f64,
    pub val_hmean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub weights: EncoderWeights,
    pub epoch: usize,
    pub val_hmean: f64,
}

/// Training state that survives between epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub weights: EncoderWeights,
    pub optimizer: OptimizerState,
    pub cfg: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub best: Option<Checkpoint>,
}

impl Trainer {
    pub fn new(weights: EncoderWeights, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let optimizer = OptimizerState::new(&weights);
        Ok(Self { weights, optimizer, cfg, epoch: 0, best: None })
    }

    /// Fresh encoder initialized from the training seed.
    pub fn from_config(enc: EncoderConfig, cfg: TrainConfig) -> Result<Self> {
        Self::new(EncoderWeights::init(enc, cfg.seed)?, cfg)
    }

    pub fn planner(&self) -> NeuralPlanner {
        NeuralPlanner::new(self.weights.clone(), self.cfg.variant, self.cfg.mode)
    }

    /// One optimizer step on the mean loss of `batch`. Returns that mean loss.
    pub fn train_step(&mut self, batch: &[&ProblemInstance]) -> Result<f64> {
        self.train_step_indexed(batch.iter().copied().enumerate())
    }

    fn train_step_indexed<'a>(&mut self, batch: impl Iterator<Item = (usize, &'a ProblemInstance)>) -> Result<f64> {
        let mut total: Option<Vec<Vec<f64>>> = None;
        let mut loss_sum = 0.0;
        let mut n = 0usize;
        for (index, inst) in batch {
            let (loss, grads) = instance_gradients(&self.weights, inst, &self.cfg).map_err(|e| e.at_instance(index))?;
            loss_sum += loss;
            n += 1;
            match &mut total {
                None => total = Some(grads),
                Some(t) => t.iter_mut().zip(&grads).for_each(|(a, g)| math::axpy(a, 1.0, g)),
            }
        }
        let Some(mut grads) = total else {
            return Err(Error::Empty);
        };
        let inv = 1.0 / n as f64;
        grads.iter_mut().flatten().for_each(|g| *g *= inv);
        let c = self.cfg;
        rmsprop_step(&mut self.weights, &grads, &mut self.optimizer, c.learning_rate, c.rms_decay, c.rms_eps)?;
        Ok(loss_sum * inv)
    }

    /// Shuffles and trains over `train_set` once; returns the mean batch loss.
    /// Errors name the position of the failing instance in `train_set`.
    pub fn train_epoch(&mut self, train_set: &[ProblemInstance]) -> Result<f64> {
        if train_set.is_empty() {
            return Err(Error::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(self.epoch as u64);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let mut losses = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.cfg.batch_size) {
            losses += self.train_step_indexed(chunk.iter().map(|&i| (i, &train_set[i])))?;
            batches += 1;
        }
        self.epoch += 1;
        Ok(losses / batches as f64)
    }

    /// Trains one epoch, validates, and keeps the checkpoint with the best
    /// validation Hmean (earliest on ties).
    pub fn run_epoch(&mut self, train_set: &[ProblemInstance], val: &ValidationSet) -> Result<EpochLog> {
        let mean_loss = self.train_epoch(train_set)?;
        let v = val.score(&self.planner())?;
        Ok(self.record_validation(mean_loss, v))
    }

    /// Updates the best checkpoint with the current weights' validation scores.
    pub fn record_validation(&mut self, mean_loss: f64, v: ValScores) -> EpochLog {
        if self.best.as_ref().is_none_or(|b| v.hmean > b.val_hmean) {
            self.best = Some(Checkpoint { weights: self.weights.clone(), epoch: self.epoch, val_hmean: v.hmean });
        }
        EpochLog { epoch: self.epoch, mean_loss, val_opt: v.opt, val_exp: v.exp, val_hmean: v.hmean }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: EncoderWeights,
    pub log: Vec<EpochLog>,
    /// Validation scores of the initial weights.
    pub initial: ValScores,
}

/// Full training run from freshly initialized weights.
pub fn train(
    train_set: &[ProblemInstance],
    val_set: &ValidationSet,
    enc: EncoderConfig,
    cfg: TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Empty);
    }
    let mut trainer = Trainer::from_config(enc, cfg)?;
    let initial = val_set.score(&trainer.planner())?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let entry = trainer.run_epoch(train_set, val_set)?;
        on_epoch(&entry);
        log.push(entry);
    }
    let best = trainer.best.clone().unwrap_or(Checkpoint {
        weights: trainer.weights.clone(),
        epoch: 0,
        val_hmean: initial.hmean,
    });
    Ok(TrainOutcome { best, last: trainer.weights, log, initial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridMap, NodeIndex};

    #[test]
    fn loss_examples() {
        let gt = NodeMask::from_values(4, 4, vec![1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]).unwrap();
        let mut t = Tape::new();
        let c = t.param(&[4, 4], gt.to_f64()).unwrap();
        let l = l1_loss(&mut t, c, &gt).unwrap();
        assert_eq!(t.value(l), &[0.0]);

        let mut t = Tape::new();
        let mut vals = gt.to_f64();
        vals[2] = 1.0;
        vals[3] = 1.0;
        vals[0] = 0.0;
        let c = t.param(&[4, 4], vals).unwrap();
        let l = l1_loss(&mut t, c, &gt).unwrap();
        assert_eq!(t.value(l), &[3.0 / 16.0]);
        let g = t.backward(l).unwrap();
        let gc = g.get(c).unwrap();
        assert_eq!(gc[2], 1.0 / 16.0);
        assert_eq!(gc[0], -1.0 / 16.0);
        assert_eq!(gc[1], 0.0);
    }

    #[test]
    fn loss_shape_mismatch() {
        let mut t = Tape::new();
        let c = t.param(&[2, 2], vec![0.0; 4]).unwrap();
        assert!(matches!(l1_loss(&mut t, c, &NodeMask::zeros(3, 3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn dilation_examples() {
        let mut m = NodeMask::zeros(5, 5);
        m.set(NodeIndex::new(2, 2), true);
        assert_eq!(dilate_gt(&m).count(), 9);
        let mut corner = NodeMask::zeros(5, 5);
        corner.set(NodeIndex::new(0, 0), true);
        assert_eq!(dilate_gt(&corner).count(), 4);
        assert_eq!(dilate_gt(&NodeMask::zeros(4, 4)).count(), 0);
    }

    #[test]
    fn l_shape_dilation_matches_brute_force() {
        let cells = [(1, 1), (2, 1), (3, 1), (3, 2), (3, 3)];
        let nodes: Vec<NodeIndex> = cells.iter().map(|&(r, c)| NodeIndex::new(r, c)).collect();
        let m = NodeMask::from_nodes(8, 8, &nodes).unwrap();
        let d = dilate_gt(&m);
        let mut brute = 0;
        for r in 0..8i64 {
            for c in 0..8i64 {
                if cells.iter().any(|&(pr, pc)| (pr as i64 - r).abs() <= 1 && (pc as i64 - c).abs() <= 1) {
                    brute += 1;
                }
            }
        }
        assert_eq!(d.count(), brute);
        assert_eq!(d.count(), 21);
    }

    #[test]
    fn rmsprop_examples() {
        let mut p = vec![0.5];
        let mut acc = vec![0.0];
        rmsprop_update(&mut p, &[0.0], &mut acc, 0.001, 0.99, 1e-8);
        assert_eq!(p, vec![0.5]);

        let mut p = vec![0.0];
        let mut acc = vec![0.0];
        rmsprop_update(&mut p, &[1.0], &mut acc, 0.001, 0.99, 1e-8);
        let d1 = p[0];
        assert!((d1 - (-0.001 / (0.1 + 1e-8))).abs() < 1e-12);
        rmsprop_update(&mut p, &[1.0], &mut acc, 0.001, 0.99, 1e-8);
        let d2 = p[0] - d1;
        assert!(d2.abs() < d1.abs());
    }

    #[test]
    fn rmsprop_missing_gradient() {
        let cfg = EncoderConfig { base_channels: 2, depth: 1, ..EncoderConfig::binary() };
        let mut w = EncoderWeights::init(cfg, 0).unwrap();
        let mut st = OptimizerState::new(&w);
        assert!(matches!(rmsprop_step(&mut w, &[], &mut st, 0.001, 0.99, 1e-8), Err(Error::MissingGradient(_))));
    }

    fn corridor() -> ProblemInstance {
        let map = GridMap::from_ascii(&["####", "....", "####", "####"]).unwrap();
        let inst = ProblemInstance::new(map, NodeIndex::new(1, 0), NodeIndex::new(1, 3)).unwrap();
        let gt = NodeMask::from_nodes(4, 4, &[0, 1, 2, 3].map(|c| NodeIndex::new(1, c))).unwrap();
        inst.with_gt_path(gt).unwrap()
    }

    #[test]
    fn smoke_one_epoch() {
        let enc = EncoderConfig { base_channels: 2, depth: 1, ..EncoderConfig::binary() };
        let cfg = TrainConfig { batch_size: 1, epochs: 1, ..TrainConfig::default() };
        let val = ValidationSet::new([(0, corridor())]).unwrap();
        let out = train(&[corridor()], &val, enc, cfg, |_| {}).unwrap();
        assert_eq!(out.log.len(), 1);
        assert!(out.log[0].mean_loss.is_finite());
        assert!((0.0..=1.0).contains(&out.log[0].mean_loss));
    }

    #[test]
    fn deterministic_trajectory() {
        let enc = EncoderConfig { base_channels: 2, depth: 1, ..EncoderConfig::binary() };
        let cfg = TrainConfig { batch_size: 1, epochs: 3, seed: 4, ..TrainConfig::default() };
        let val = ValidationSet::new([(0, corridor())]).unwrap();
        let a = train(&[corridor(), corridor()], &val, enc, cfg, |_| {}).unwrap();
        let b = train(&[corridor(), corridor()], &val, enc, cfg, |_| {}).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.last, b.last);
    }

    #[test]
    fn missing_expert_path_is_reported() {
        let enc = EncoderConfig { base_channels: 2, depth: 1, ..EncoderConfig::binary() };
        let mut t = Trainer::from_config(enc, TrainConfig::default()).unwrap();
        let mut inst = corridor();
        inst.gt_path = None;
        let err = t.train_epoch(&[corridor(), inst]).unwrap_err();
        assert!(matches!(err, Error::Instance { index: 1, .. }));
    }
}
