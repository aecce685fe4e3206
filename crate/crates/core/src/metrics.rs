//! Evaluation metrics.
//!
//! Opt and Exp are computed per map, Hmean per map from those two, and the
//! per-map values are then summarized with a bootstrap across maps.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff_astar::{run_inference, DiffAstarConfig, ExpansionMode, SearchVariant};
use crate::error::{Error, Result};
use crate::grid::{astar_classical, dijkstra_field, MapKind, NodeIndex, ProblemInstance, ScalarField, UNREACHABLE};
use crate::math;
use crate::planner::Planner;

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub map_id: u64,
    pub optimal: bool,
    pub exp_ratio: f64,
    pub path_len: usize,
    pub opt_len: usize,
    pub success: bool,
    pub chamfer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapScore {
    pub map_id: u64,
    pub opt: f64,
    pub exp: f64,
    pub hmean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Percentage reduction in expansions relative to vanilla A*, clamped at 0.
pub fn exp_ratio(e_star: usize, e: usize) -> f64 {
    if e_star == 0 {
        return 0.0;
    }
    let r = 100.0 * (e_star as f64 - e as f64) / e_star as f64;
    r.max(0.0)
}

/// Harmonic mean of two percentages, 0 when both are 0.
pub fn map_hmean(opt: f64, exp: f64) -> f64 {
    if opt + exp <= 0.0 {
        0.0
    } else {
        2.0 * opt * exp / (opt + exp)
    }
}

/// `100 · opt_len / path_len`.
pub fn path_length_ratio(opt_len: usize, path_len: usize) -> f64 {
    if path_len == 0 {
        return 0.0;
    }
    100.0 * opt_len as f64 / path_len as f64
}

fn dist(a: NodeIndex, b: NodeIndex) -> f64 {
    let dr = a.row as f64 - b.row as f64;
    let dc = a.col as f64 - b.col as f64;
    math::sqrt(dr * dr + dc * dc)
}

fn directed_mean(a: &[NodeIndex], b: &[NodeIndex]) -> f64 {
    let total: f64 = a.iter().map(|&p| b.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min)).sum();
    total / a.len() as f64
}

/// Symmetric chamfer distance: the average of the two directed mean
/// nearest-neighbour distances.
pub fn chamfer(a: &[NodeIndex], b: &[NodeIndex]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPath);
    }
    Ok(0.5 * (directed_mean(a, b) + directed_mean(b, a)))
}

/// Bootstrap mean with 2.5 / 97.5 percentile bounds of the resample means.
pub fn bootstrap(values: &[f64], resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    if resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64).collect();
    let mean = means.iter().sum::<f64>() / resamples as f64;
    means.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        mean,
        lo95: math::percentile_sorted(&means, 2.5),
        hi95: math::percentile_sorted(&means, 97.5),
        resamples,
        seed,
    })
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of unsorted data.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(math::percentile_sorted(&sorted, q.clamp(0.0, 100.0)))
}

/// Endpoints match, every step is an eight-neighbour move, and on binary maps
/// every node is passable.
pub fn is_valid_path(inst: &ProblemInstance, path: &[NodeIndex]) -> bool {
    let (Some(&first), Some(&last)) = (path.first(), path.last()) else {
        return false;
    };
    let ends_ok = (first == inst.start && last == inst.goal) || (first == inst.goal && last == inst.start);
    ends_ok
        && path.iter().all(|&v| inst.map.contains(v) && inst.map.is_passable(v))
        && path.windows(2).all(|w| w[0].is_adjacent(w[1]))
}

/// Expansions of unit-cost vanilla A*. Image maps have no obstacles to mask,
/// so the baseline searches the open grid.
pub fn baseline_expansions(inst: &ProblemInstance) -> Result<usize> {
    let unit = ScalarField::filled(inst.height(), inst.width(), 1.0);
    let r = match inst.map.kind() {
        MapKind::Binary => astar_classical(inst, &unit, 0.5)?,
        MapKind::Image => {
            let cfg = DiffAstarConfig::for_map(
                inst.height(),
                inst.width(),
                ExpansionMode::ImageUnmasked,
                SearchVariant::NeuralAstar,
            );
            run_inference(inst, &unit, &cfg)?
        }
    };
    Ok(r.explored_count)
}

/// Optimal number of moves: from the Dijkstra field on binary maps, from the
/// stored expert path otherwise.
pub fn optimal_length(inst: &ProblemInstance) -> Result<usize> {
    match inst.map.kind() {
        MapKind::Binary => {
            let d = dijkstra_field(&inst.map, inst.goal).get(inst.start);
            if d == UNREACHABLE {
                Err(Error::Unreachable)
            } else {
                Ok(d as usize)
            }
        }
        MapKind::Image => {
            let gt = inst.gt_path.as_ref().ok_or_else(|| Error::invalid("image instances need an expert path"))?;
            Ok(gt.count() - 1)
        }
    }
}

/// Scores one prediction. `path` is `None` when the planner failed.
pub fn score_instance(
    inst: &ProblemInstance,
    map_id: u64,
    path: Option<&[NodeIndex]>,
    explored: Option<usize>,
    e_star: usize,
    opt_len: usize,
) -> InstanceScore {
    let success = path.is_some_and(|p| is_valid_path(inst, p));
    let path_len = path.map_or(0, |p| p.len().saturating_sub(1));
    let chamfer = match (inst.map.kind(), path, &inst.gt_path) {
        (MapKind::Image, Some(p), Some(gt)) if !p.is_empty() => chamfer(p, &gt.nodes()).ok(),
        _ => None,
    };
    InstanceScore {
        map_id,
        optimal: success && path_len == opt_len,
        exp_ratio: explored.map_or(0.0, |e| exp_ratio(e_star, e)),
        path_len,
        opt_len,
        success,
        chamfer,
    }
}

/// Per-map Opt, mean Exp, and their harmonic mean, ordered by map id.
pub fn map_scores(scores: &[InstanceScore]) -> Vec<MapScore> {
    let mut groups: BTreeMap<u64, Vec<&InstanceScore>> = BTreeMap::new();
    for s in scores {
        groups.entry(s.map_id).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|(map_id, g)| {
            let n = g.len() as f64;
            let opt = 100.0 * g.iter().filter(|s| s.optimal).count() as f64 / n;
            let exp = g.iter().map(|s| s.exp_ratio).sum::<f64>() / n;
            MapScore { map_id, opt, exp, hmean: map_hmean(opt, exp) }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { resamples: DEFAULT_RESAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub instances: Vec<InstanceScore>,
    pub maps: Vec<MapScore>,
    pub opt: BootstrapSummary,
    pub exp: BootstrapSummary,
    pub hmean: BootstrapSummary,
    /// Success percentage over instances.
    pub success: f64,
    /// Path-length ratio over successful instances.
    pub path_ratio: Option<BootstrapSummary>,
    /// Chamfer distance over instances with an image map.
    pub chamfer: Option<BootstrapSummary>,
}

/// Runs `planner` on each `(map_id, instance)` pair and aggregates.
///
/// Failures of a complete planner are returned as errors with the instance
/// position; an incomplete planner's failures count as unsuccessful.
pub fn evaluate<'a, P: Planner + ?Sized>(
    planner: &P,
    items: impl IntoIterator<Item = (u64, &'a ProblemInstance)>,
    cfg: &EvalConfig,
) -> Result<Evaluation> {
    let mut scores = Vec::new();
    for (i, (map_id, inst)) in items.into_iter().enumerate() {
        let e_star = baseline_expansions(inst).map_err(|e| e.at_instance(i))?;
        let opt_len = optimal_length(inst).map_err(|e| e.at_instance(i))?;
        let score = match planner.plan(inst) {
            Ok(r) => score_instance(inst, map_id, Some(&r.path), Some(r.explored_count), e_star, opt_len),
            Err(e) if !planner.is_complete() && matches!(e, Error::Unreachable | Error::StepLimitExceeded(_)) => {
                score_instance(inst, map_id, None, None, e_star, opt_len)
            }
            Err(e) => return Err(e.at_instance(i)),
        };
        scores.push(score);
    }
    summarize(scores, cfg)
}

/// Aggregates instance scores into per-map scores and bootstrap summaries.
pub fn summarize(instances: Vec<InstanceScore>, cfg: &EvalConfig) -> Result<Evaluation> {
    if instances.is_empty() {
        return Err(Error::Empty);
    }
    let maps = map_scores(&instances);
    let col = |f: fn(&MapScore) -> f64| maps.iter().map(f).collect::<Vec<_>>();
    let opt = bootstrap(&col(|m| m.opt), cfg.resamples, cfg.seed)?;
    let exp = bootstrap(&col(|m| m.exp), cfg.resamples, cfg.seed)?;
    let hmean = bootstrap(&col(|m| m.hmean), cfg.resamples, cfg.seed)?;
    let success = 100.0 * instances.iter().filter(|s| s.success).count() as f64 / instances.len() as f64;
    let ratios: Vec<f64> =
        instances.iter().filter(|s| s.success).map(|s| path_length_ratio(s.opt_len, s.path_len)).collect();
    let path_ratio = if ratios.is_empty() { None } else { Some(bootstrap(&ratios, cfg.resamples, cfg.seed)?) };
    let chamfers: Vec<f64> = instances.iter().filter_map(|s| s.chamfer).collect();
    let chamfer = if chamfers.is_empty() { None } else { Some(bootstrap(&chamfers, cfg.resamples, cfg.seed)?) };
    Ok(Evaluation { instances, maps, opt, exp, hmean, success, path_ratio, chamfer })
}
