//! Common interface over the classical baselines and the neural planners.

use alloc::format;
use alloc::string::String;

use crate::diff_astar::{run_inference, DiffAstarConfig, ExpansionMode, SearchVariant};
use crate::encoder::EncoderWeights;
use crate::error::Result;
use crate::grid::{astar_classical, dijkstra_shortest_path, ProblemInstance, ScalarField, SearchResult};

pub trait Planner {
    fn name(&self) -> String;

    fn plan(&self, inst: &ProblemInstance) -> Result<SearchResult>;

    /// Complete planners always find a path when one exists, so their
    /// failures are errors rather than unsuccessful predictions.
    fn is_complete(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicalPlanner {
    /// Unit-cost A*.
    Astar,
    /// Weighted A* with heuristic weight `w` in `[0, 1]`.
    WeightedAstar(f64),
    /// Greedy best-first (`f = h`).
    BestFirst,
    Dijkstra,
}

impl Planner for ClassicalPlanner {
    fn name(&self) -> String {
        match self {
            ClassicalPlanner::Astar => "astar".into(),
            ClassicalPlanner::WeightedAstar(w) => format!("wastar(w={w})"),
            ClassicalPlanner::BestFirst => "bf".into(),
            ClassicalPlanner::Dijkstra => "dijkstra".into(),
        }
    }

    fn plan(&self, inst: &ProblemInstance) -> Result<SearchResult> {
        let unit = ScalarField::filled(inst.height(), inst.width(), 1.0);
        match *self {
            ClassicalPlanner::Astar => astar_classical(inst, &unit, 0.5),
            ClassicalPlanner::WeightedAstar(w) => astar_classical(inst, &unit, w),
            ClassicalPlanner::BestFirst => astar_classical(inst, &unit, 1.0),
            ClassicalPlanner::Dijkstra => dijkstra_shortest_path(inst),
        }
    }
}

/// Encoder plus search. Planning runs the encoder once and then the
/// priority-queue search over the guidance map.
#[derive(Debug, Clone)]
pub struct NeuralPlanner {
    pub weights: EncoderWeights,
    pub variant: SearchVariant,
    pub mode: ExpansionMode,
}

impl NeuralPlanner {
    pub fn new(weights: EncoderWeights, variant: SearchVariant, mode: ExpansionMode) -> Self {
        Self { weights, variant, mode }
    }

    pub fn guidance(&self, inst: &ProblemInstance) -> Result<ScalarField> {
        self.weights.guidance(inst)
    }

    pub fn search(&self, inst: &ProblemInstance, phi: &ScalarField) -> Result<SearchResult> {
        let cfg = DiffAstarConfig::for_map(inst.height(), inst.width(), self.mode, self.variant);
        run_inference(inst, phi, &cfg)
    }
}

impl Planner for NeuralPlanner {
    fn name(&self) -> String {
        match self.variant {
            SearchVariant::NeuralAstar => "neural-astar".into(),
            SearchVariant::NeuralBF => "neural-bf".into(),
        }
    }

    fn plan(&self, inst: &ProblemInstance) -> Result<SearchResult> {
        let phi = self.guidance(inst)?;
        self.search(inst, &phi)
    }
}
