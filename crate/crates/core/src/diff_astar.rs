//! Differentiable A* search.
//!
//! The open list `O`, closed list `C`, and cost-so-far `G` are dense matrices
//! over the map. Each iteration selects one node with a straight-through
//! argmax of `exp(-(G + H)/τ) ⊙ O / ⟨exp(-(G + H)/τ), O⟩`, expands its
//! neighbours with a fixed 3×3 convolution, and partially updates `G`. The
//! closed list stays on the tape so a loss on `C` reaches the guidance map `Φ`.
//!
//! Gradient-stopping rules: `O` inside the selection, both neighbour masks,
//! and `G` inside `G' = ⟨G, V*⟩ + Φ` are detached.
//!
//! [`run_inference`] reproduces the same selections with a priority queue and
//! no tape.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{correlate3, Tape, Var};
use crate::error::{Error, Result};
use crate::grid::{
    self, heuristic_field_with, GridMap, NodeIndex, NodeMask, ProblemInstance, ScalarField, SearchResult,
    DEFAULT_TIE_BREAK,
};
use crate::math;

/// Neighbourhood kernel `K`: the eight cells around the centre.
pub const NEIGHBOR_KERNEL: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionMode {
    /// Neighbours are masked by the binary map `X`.
    BinaryMasked,
    /// Raw-image inputs: every in-bounds neighbour may be opened.
    ImageUnmasked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchVariant {
    /// Accumulates guidance cost along paths.
    NeuralAstar,
    /// Ablation that always scores nodes by `Φ + H`.
    NeuralBF,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffAstarConfig {
    pub tau: f64,
    pub mode: ExpansionMode,
    pub variant: SearchVariant,
    pub max_steps: usize,
    pub tie_break_euclid_coef: f64,
}

impl DiffAstarConfig {
    /// `τ = sqrt(width)` and a step budget of one per node.
    pub fn for_map(height: usize, width: usize, mode: ExpansionMode, variant: SearchVariant) -> Self {
        Self {
            tau: math::sqrt(width as f64),
            mode,
            variant,
            max_steps: height * width,
            tie_break_euclid_coef: DEFAULT_TIE_BREAK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Per-instance search state. `open` and the neighbour masks are constants on
/// the tape; `closed` and `g` carry gradient.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub open: Var,
    pub closed: Var,
    pub g: Var,
    pub parents: Vec<Option<NodeIndex>>,
    /// Goal-verification flag: `true` while the goal has not been selected.
    pub eta: bool,
    pub steps: usize,
    pub selections: Vec<NodeIndex>,
    heuristic: Var,
    passable: Vec<f64>,
    open_values: Vec<f64>,
    height: usize,
    width: usize,
    start: NodeIndex,
    goal: NodeIndex,
}

impl SearchState {
    /// `O = V_s`, `C = 0`, `G = 0`.
    pub fn new(tape: &mut Tape, inst: &ProblemInstance, cfg: &DiffAstarConfig) -> Result<Self> {
        let (h, w) = (inst.height(), inst.width());
        let n = h * w;
        let mut open_values = vec![0.0; n];
        open_values[inst.start.linear(w)] = 1.0;
        let heur = heuristic_field_with(h, w, inst.goal, cfg.tie_break_euclid_coef);
        Ok(Self {
            open: tape.constant(&[h, w], open_values.clone())?,
            closed: tape.constant(&[h, w], vec![0.0; n])?,
            g: tape.constant(&[h, w], vec![0.0; n])?,
            parents: vec![None; n],
            eta: true,
            steps: 0,
            selections: Vec::new(),
            heuristic: tape.constant(&[h, w], heur.into_values())?,
            passable: match cfg.mode {
                ExpansionMode::BinaryMasked => inst.map.passability(),
                ExpansionMode::ImageUnmasked => vec![1.0; n],
            },
            open_values,
            height: h,
            width: w,
            start: inst.start,
            goal: inst.goal,
        })
    }

    pub fn open_values(&self) -> &[f64] {
        &self.open_values
    }

    pub fn heuristic(&self) -> Var {
        self.heuristic
    }
}

/// Output of one search in a batch.
#[derive(Debug, Clone)]
pub struct DiffSearchOutput {
    /// Closed list on the tape.
    pub closed: Var,
    pub path_mask: NodeMask,
    pub path: Vec<NodeIndex>,
    pub explored_count: usize,
    pub selections: Vec<NodeIndex>,
}

/// Index of the open node with the smallest `g + h`, ties to the lowest index.
fn argmin_open(g: &[f64], h: &[f64], open: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..open.len() {
        if open[i] > 0.0 {
            let f = g[i] + h[i];
            if best.is_none_or(|(_, b)| f < b) {
                best = Some((i, f));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Straight-through selection of the next node.
///
/// The exponent is shifted by the best open score before `exp`; the shift is
/// constant, so both the normalized ratio and its gradient are unchanged. The
/// forward one-hot is placed at the exact argmin of `G + H` over open nodes,
/// which is the argmax of the ratio without rounding ties.
pub fn select_node(tape: &mut Tape, g: Var, h: Var, open: Var, tau: f64) -> Result<(Var, usize)> {
    let best = argmin_open(tape.value(g), tape.value(h), tape.value(open)).ok_or(Error::EmptyOpenList)?;
    let fbest = tape.value(g)[best] + tape.value(h)[best];
    let f = tape.add(g, h)?;
    let z = tape.scale(f, -1.0 / tau);
    let shift = tape.scalar(fbest / tau);
    let z = tape.add(z, shift)?;
    let e = tape.exp(z);
    let num = tape.mul(e, open)?;
    let den = tape.inner(e, open)?;
    let ratio = tape.div(num, den)?;
    Ok((tape.st_onehot(ratio, best), best))
}

/// `V_nbr` and `V̄_nbr` on plain arrays.
pub fn expansion_masks(
    vstar: &[f64],
    passable: Option<&[f64]>,
    open: &[f64],
    closed: &[f64],
    height: usize,
    width: usize,
) -> (Vec<f64>, Vec<f64>) {
    let ring = correlate3(vstar, height, width, &NEIGHBOR_KERNEL);
    let n = height * width;
    let mut fresh = vec![0.0; n];
    let mut reopened = vec![0.0; n];
    for i in 0..n {
        let x = passable.map_or(1.0, |p| p[i]);
        let base = ring[i] * x * (1.0 - closed[i]);
        fresh[i] = base * (1.0 - open[i]);
        reopened[i] = base * open[i];
    }
    (fresh, reopened)
}

/// Neighbour expansion. Both masks come back detached.
pub fn expand_nodes(
    tape: &mut Tape,
    vstar: Var,
    map: &GridMap,
    open: Var,
    closed: Var,
    mode: ExpansionMode,
) -> Result<(Var, Var)> {
    let (h, w) = (map.height(), map.width());
    let x = match mode {
        ExpansionMode::BinaryMasked => Some(map.passability()),
        ExpansionMode::ImageUnmasked => None,
    };
    let (fresh, reopened) =
        expansion_masks(tape.value(vstar), x.as_deref(), tape.value(open), tape.value(closed), h, w);
    Ok((tape.constant(&[h, w], fresh)?, tape.constant(&[h, w], reopened)?))
}

/// `G ← G'⊙V_nbr + min(G', G)⊙V̄_nbr + G⊙(1 − V_nbr − V̄_nbr)` with
/// `G' = ⟨detach(G), V*⟩·1 + Φ`.
pub fn update_g(tape: &mut Tape, g: Var, vstar: Var, phi: Var, fresh: Var, reopened: Var) -> Result<Var> {
    let rest: Vec<f64> = tape.value(fresh).iter().zip(tape.value(reopened)).map(|(a, b)| 1.0 - a - b).collect();
    let shape = tape.shape(g).to_vec();
    let rest = tape.constant(&shape, rest)?;
    let g_detached = tape.detach(g);
    let g_star = tape.inner(g_detached, vstar)?;
    let g_new = tape.add(g_star, phi)?;
    let opened = tape.mul(g_new, fresh)?;
    let lower = tape.min2(g_new, g)?;
    let improved = tape.mul(lower, reopened)?;
    let kept = tape.mul(g, rest)?;
    let sum = tape.add(opened, improved)?;
    tape.add(sum, kept)
}

fn step_one(tape: &mut Tape, state: &mut SearchState, phi: Var, cfg: &DiffAstarConfig) -> Result<()> {
    if !state.eta {
        return Ok(());
    }
    if state.steps >= cfg.max_steps {
        return Err(Error::StepLimitExceeded(state.steps));
    }
    let (h, w) = (state.height, state.width);
    let scored = match cfg.variant {
        SearchVariant::NeuralAstar => state.g,
        SearchVariant::NeuralBF => phi,
    };
    let (vstar, sel) = select_node(tape, scored, state.heuristic, state.open, cfg.tau)?;
    state.steps += 1;
    let sel_node = NodeIndex::from_linear(sel, w);
    state.selections.push(sel_node);
    // η = 1 - ⟨V_g, V*⟩; selecting the goal freezes O and C.
    if sel_node == state.goal {
        state.eta = false;
        return Ok(());
    }
    state.open_values[sel] = 0.0;
    state.closed = tape.add(state.closed, vstar)?;

    let (fresh, reopened) =
        expansion_masks(tape.value(vstar), Some(&state.passable), &state.open_values, tape.value(state.closed), h, w);
    for (o, f) in state.open_values.iter_mut().zip(&fresh) {
        *o += f;
    }
    state.open = tape.constant(&[h, w], state.open_values.clone())?;

    match cfg.variant {
        SearchVariant::NeuralAstar => {
            let old_g = tape.value(state.g).to_vec();
            let fresh_v = tape.constant(&[h, w], fresh.clone())?;
            let reopened_v = tape.constant(&[h, w], reopened.clone())?;
            state.g = update_g(tape, state.g, vstar, phi, fresh_v, reopened_v)?;
            let new_g = tape.value(state.g);
            for i in 0..h * w {
                if fresh[i] > 0.0 || (reopened[i] > 0.0 && new_g[i] < old_g[i]) {
                    state.parents[i] = Some(sel_node);
                }
            }
        }
        SearchVariant::NeuralBF => {
            // G stays Φ, so already-open neighbours never improve.
            for i in 0..h * w {
                if fresh[i] > 0.0 {
                    state.parents[i] = Some(sel_node);
                }
            }
        }
    }
    Ok(())
}

/// Advances every unfinished state by one iteration. Finished states are untouched.
pub fn step_batch(tape: &mut Tape, states: &mut [SearchState], phis: &[Var], cfg: &DiffAstarConfig) -> Result<()> {
    if states.len() != phis.len() {
        return Err(Error::shape("one guidance map per search state"));
    }
    if !states.iter().any(|s| s.eta) {
        return Err(Error::invalid("step_batch needs at least one unfinished state"));
    }
    for (i, (state, &phi)) in states.iter_mut().zip(phis).enumerate() {
        step_one(tape, state, phi, cfg).map_err(|e| e.at_instance(i))?;
    }
    Ok(())
}

fn check_phi(tape: &Tape, phi: Var, inst: &ProblemInstance) -> Result<()> {
    let shape = tape.shape(phi);
    if shape != [inst.height(), inst.width()] {
        return Err(Error::shape(format!("guidance map {shape:?} for a {}x{} map", inst.height(), inst.width())));
    }
    if tape.value(phi).iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("guidance map must be finite and non-negative"));
    }
    Ok(())
}

/// Runs a batch of searches to completion on one tape.
///
/// Errors carry the failing instance index; an exhausted open list surfaces
/// as [`Error::Unreachable`].
pub fn run(
    tape: &mut Tape,
    insts: &[ProblemInstance],
    phis: &[Var],
    cfg: &DiffAstarConfig,
) -> Result<Vec<DiffSearchOutput>> {
    cfg.validate()?;
    if insts.len() != phis.len() {
        return Err(Error::shape("one guidance map per instance"));
    }
    let mut states = Vec::with_capacity(insts.len());
    for (i, (inst, &phi)) in insts.iter().zip(phis).enumerate() {
        check_phi(tape, phi, inst).map_err(|e| e.at_instance(i))?;
        states.push(SearchState::new(tape, inst, cfg)?);
    }
    while states.iter().any(|s| s.eta) {
        step_batch(tape, &mut states, phis, cfg).map_err(|e| match e {
            Error::Instance { index, source } if *source == Error::EmptyOpenList => {
                Error::Unreachable.at_instance(index)
            }
            other => other,
        })?;
    }
    states
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let path = grid::backtrack(&s.parents, s.width, s.start, s.goal).map_err(|e| e.at_instance(i))?;
            let path_mask = NodeMask::from_nodes(s.height, s.width, &path)?;
            let explored_count = tape.value(s.closed).iter().filter(|&&c| c > 0.5).count();
            Ok(DiffSearchOutput { closed: s.closed, path_mask, path, explored_count, selections: s.selections })
        })
        .collect()
}

/// Forward-only search with a priority queue. Same selections, path, and
/// explored count as [`run`].
pub fn run_inference(inst: &ProblemInstance, phi: &ScalarField, cfg: &DiffAstarConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let (h, w) = (inst.height(), inst.width());
    if phi.height() != h || phi.width() != w {
        return Err(Error::shape("guidance map does not match the map"));
    }
    let heur = heuristic_field_with(h, w, inst.goal, cfg.tie_break_euclid_coef);
    let hv = heur.values();
    let pv = phi.values();
    let map = &inst.map;
    let masked = cfg.mode == ExpansionMode::BinaryMasked;
    let passable = |i: usize| !masked || map.passable_at(i);
    match cfg.variant {
        SearchVariant::NeuralAstar => grid::priority_search(
            (h, w),
            passable,
            inst.start,
            inst.goal,
            |g, i| g + hv[i],
            |g, i| g + pv[i],
            Some(cfg.max_steps),
        ),
        SearchVariant::NeuralBF => grid::priority_search(
            (h, w),
            passable,
            inst.start,
            inst.goal,
            |_, i| pv[i] + hv[i],
            |_, i| pv[i],
            Some(cfg.max_steps),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{astar_classical, ScalarField};

    fn cfg(h: usize, w: usize) -> DiffAstarConfig {
        DiffAstarConfig::for_map(h, w, ExpansionMode::BinaryMasked, SearchVariant::NeuralAstar)
    }

    fn inst(rows: &[&str], s: (usize, usize), g: (usize, usize)) -> ProblemInstance {
        let map = GridMap::from_ascii(rows).unwrap();
        ProblemInstance::new(map, NodeIndex::new(s.0, s.1), NodeIndex::new(g.0, g.1)).unwrap()
    }

    #[test]
    fn select_single_and_best() {
        let mut t = Tape::new();
        let g = t.constant(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let h = t.constant(&[1, 3], vec![0.0, 0.0, 2.0]).unwrap();
        let o = t.constant(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let (v, i) = select_node(&mut t, g, h, o, 1.0).unwrap();
        assert_eq!(i, 1);
        assert_eq!(t.value(v), &[0.0, 1.0, 0.0]);
        let o2 = t.constant(&[1, 3], vec![0.0, 1.0, 1.0]).unwrap();
        for tau in [0.01, 1.0, 100.0] {
            let (_, i) = select_node(&mut t, g, h, o2, tau).unwrap();
            assert_eq!(i, 1);
        }
        let none = t.constant(&[1, 3], vec![0.0; 3]).unwrap();
        assert_eq!(select_node(&mut t, g, h, none, 1.0).unwrap_err(), Error::EmptyOpenList);
    }

    #[test]
    fn expansion_examples() {
        let mut vstar = vec![0.0; 9];
        vstar[4] = 1.0;
        let zeros = vec![0.0; 9];
        let (fresh, reopened) = expansion_masks(&vstar, None, &zeros, &zeros, 3, 3);
        assert_eq!(fresh, vec![1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(reopened, zeros);

        let mut open = zeros.clone();
        open[5] = 1.0;
        let (fresh, reopened) = expansion_masks(&vstar, None, &open, &zeros, 3, 3);
        assert_eq!(fresh[5], 0.0);
        assert_eq!(reopened[5], 1.0);
        assert_eq!(reopened.iter().sum::<f64>(), 1.0);

        // Obstacle north of the centre.
        let x = vec![1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let mut open = zeros.clone();
        open[1] = 1.0;
        let (fresh, reopened) = expansion_masks(&vstar, Some(&x), &open, &zeros, 3, 3);
        assert_eq!((fresh[1], reopened[1]), (0.0, 0.0));
        assert_eq!(fresh.iter().sum::<f64>(), 7.0);
    }

    #[test]
    fn expand_nodes_on_tape_is_detached() {
        let mut t = Tape::new();
        let map = GridMap::open(3, 3).unwrap();
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let vstar = t.param(&[3, 3], v).unwrap();
        let z = t.constant(&[3, 3], vec![0.0; 9]).unwrap();
        let (a, b) = expand_nodes(&mut t, vstar, &map, z, z, ExpansionMode::BinaryMasked).unwrap();
        assert!(!t.requires_grad(a) && !t.requires_grad(b));
        assert_eq!(t.value(a).iter().sum::<f64>(), 8.0);
    }

    #[test]
    fn update_g_first_ring_and_min() {
        let mut t = Tape::new();
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let vstar = t.constant(&[3, 3], v.clone()).unwrap();
        let g = t.constant(&[3, 3], vec![0.0; 9]).unwrap();
        let phi = t.param(&[3, 3], vec![1.0; 9]).unwrap();
        let zeros = vec![0.0; 9];
        let (fresh, reopened) = expansion_masks(&v, None, &zeros, &zeros, 3, 3);
        let fv = t.constant(&[3, 3], fresh.clone()).unwrap();
        let rv = t.constant(&[3, 3], reopened).unwrap();
        let gn = update_g(&mut t, g, vstar, phi, fv, rv).unwrap();
        let expect: Vec<f64> = fresh.iter().map(|&f| f).collect();
        assert_eq!(t.value(gn), expect.as_slice());

        // Reopened neighbour: old 5, new 3 → 3.
        let mut t = Tape::new();
        let mut gvals = vec![0.0; 3];
        gvals[0] = 2.0;
        gvals[1] = 5.0;
        let g = t.constant(&[1, 3], gvals).unwrap();
        let vstar = t.constant(&[1, 3], vec![1.0, 0.0, 0.0]).unwrap();
        let phi = t.constant(&[1, 3], vec![1.0; 3]).unwrap();
        let fv = t.constant(&[1, 3], vec![0.0; 3]).unwrap();
        let rv = t.constant(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let gn = update_g(&mut t, g, vstar, phi, fv, rv).unwrap();
        assert_eq!(t.value(gn)[1], 3.0);
    }

    #[test]
    fn update_g_gradient_single_step() {
        let mut t = Tape::new();
        let mut v = vec![0.0; 9];
        v[0] = 1.0;
        let vstar = t.constant(&[3, 3], v.clone()).unwrap();
        let g = t.constant(&[3, 3], vec![0.0; 9]).unwrap();
        let phi = t.param(&[3, 3], vec![0.5; 9]).unwrap();
        let zeros = vec![0.0; 9];
        let (fresh, reopened) = expansion_masks(&v, None, &zeros, &zeros, 3, 3);
        let fv = t.constant(&[3, 3], fresh.clone()).unwrap();
        let rv = t.constant(&[3, 3], reopened).unwrap();
        let gn = update_g(&mut t, g, vstar, phi, fv, rv).unwrap();
        let s = t.reduce_sum(gn);
        let grads = t.backward(s).unwrap();
        assert_eq!(grads.get(phi).unwrap(), fresh.as_slice());
    }

    #[test]
    fn corridor_run() {
        let i = inst(&["..."], (0, 0), (0, 2));
        let c = cfg(1, 3);
        let mut t = Tape::new();
        let phi = t.param(&[1, 3], vec![1.0; 3]).unwrap();
        let out = run(&mut t, core::slice::from_ref(&i), &[phi], &c).unwrap();
        assert_eq!(out[0].path, vec![NodeIndex::new(0, 0), NodeIndex::new(0, 1), NodeIndex::new(0, 2)]);
        assert_eq!(out[0].explored_count, 2);
        // The goal never enters C.
        assert_eq!(t.value(out[0].closed), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn walled_goal_unreachable() {
        let i = inst(&["....", "..##", "..#."], (0, 0), (2, 3));
        let c = cfg(3, 4);
        let mut t = Tape::new();
        let phi = t.constant(&[3, 4], vec![1.0; 12]).unwrap();
        let err = run(&mut t, &[i], &[phi], &c).unwrap_err();
        assert_eq!(err.root(), &Error::Unreachable);
    }

    #[test]
    fn batch_freezes_finished_instance() {
        let a = inst(&["...."], (0, 0), (0, 1));
        let b = inst(&["...."], (0, 0), (0, 3));
        let c = cfg(1, 4);
        let mut t = Tape::new();
        let pa = t.constant(&[1, 4], vec![1.0; 4]).unwrap();
        let pb = t.constant(&[1, 4], vec![1.0; 4]).unwrap();
        let mut states = vec![SearchState::new(&mut t, &a, &c).unwrap(), SearchState::new(&mut t, &b, &c).unwrap()];
        let phis = [pa, pb];
        step_batch(&mut t, &mut states, &phis, &c).unwrap();
        step_batch(&mut t, &mut states, &phis, &c).unwrap();
        assert!(!states[0].eta);
        assert!(states[1].eta);
        let frozen = (states[0].closed, states[0].open, states[0].steps);
        step_batch(&mut t, &mut states, &phis, &c).unwrap();
        assert_eq!((states[0].closed, states[0].open, states[0].steps), frozen);
        assert_eq!(states[1].steps, 3);
        // The goal selection left C without the goal cell.
        assert_eq!(t.value(states[0].closed), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn neural_bf_scores_by_phi_plus_h() {
        let i = inst(&["...", "...", "..."], (0, 0), (2, 2));
        let mut c = cfg(3, 3);
        c.variant = SearchVariant::NeuralBF;
        // Phi makes (0,1) and (1,0) cheap; BF ignores accumulated cost.
        let phi_v = vec![0.0, 0.0, 5.0, 0.0, 5.0, 5.0, 5.0, 5.0, 0.0];
        let mut t = Tape::new();
        let phi = t.constant(&[3, 3], phi_v.clone()).unwrap();
        let out = run(&mut t, core::slice::from_ref(&i), &[phi], &c).unwrap();
        let fast = run_inference(&i, &ScalarField::new(3, 3, phi_v).unwrap(), &c).unwrap();
        assert_eq!(out[0].selections, fast.selections);
        assert_eq!(out[0].path, fast.path);
    }

    #[test]
    fn uniform_phi_matches_classical_on_empty_map() {
        let map = GridMap::open(5, 5).unwrap();
        let i = ProblemInstance::new(map.clone(), NodeIndex::new(0, 0), NodeIndex::new(4, 4)).unwrap();
        let c = cfg(5, 5);
        let ones = ScalarField::filled(5, 5, 1.0);
        let classical = astar_classical(&i, &ones, 0.5).unwrap();
        let fast = run_inference(&i, &ones, &c).unwrap();
        assert_eq!(fast, classical);
        let mut t = Tape::new();
        let phi = t.constant(&[5, 5], vec![1.0; 25]).unwrap();
        let out = run(&mut t, core::slice::from_ref(&i), &[phi], &c).unwrap();
        assert_eq!(out[0].selections, classical.selections);
        assert_eq!(out[0].explored_count, classical.explored_count);
    }

    #[test]
    fn step_limit_raises() {
        let i = inst(&["....."], (0, 0), (0, 4));
        let mut c = cfg(1, 5);
        c.max_steps = 2;
        let mut t = Tape::new();
        let phi = t.constant(&[1, 5], vec![1.0; 5]).unwrap();
        let err = run(&mut t, core::slice::from_ref(&i), &[phi], &c).unwrap_err();
        assert!(matches!(err.root(), Error::StepLimitExceeded(_)));
        let err = run_inference(&i, &ScalarField::filled(1, 5, 1.0), &c).unwrap_err();
        assert!(matches!(err, Error::StepLimitExceeded(_)));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(4, 16);
        assert_eq!(c.tau, 4.0);
        assert_eq!(c.max_steps, 64);
        c.tau = 0.0;
        assert!(c.validate().is_err());
    }
}
