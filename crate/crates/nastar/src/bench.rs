//! Per-instance runtime measurement.

use std::collections::BTreeMap;
use std::time::Instant;

use nastar_core::planner::{ClassicalPlanner, NeuralPlanner, Planner};
use nastar_core::{ProblemInstance, Result};

pub enum BenchPlanner<'a> {
    Classical(ClassicalPlanner),
    Neural(&'a NeuralPlanner),
}

impl BenchPlanner<'_> {
    pub fn name(&self) -> String {
        match self {
            BenchPlanner::Classical(p) => p.name(),
            BenchPlanner::Neural(p) => p.name(),
        }
    }
}

/// Mean wall-clock times per instance for one map size, in milliseconds.
/// `search_ms` excludes the encoder, which is reported in `encoder_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub planner: String,
    pub height: usize,
    pub width: usize,
    pub instances: usize,
    pub repeat: usize,
    pub search_ms: f64,
    pub encoder_ms: f64,
}

impl BenchRow {
    pub fn total_ms(&self) -> f64 {
        self.search_ms + self.encoder_ms
    }
}

pub const CSV_HEADER: &str = "planner,height,width,instances,repeat,mean_search_ms,mean_encoder_ms,mean_total_ms";

pub fn csv_row(r: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{:.6},{:.6},{:.6}",
        r.planner,
        r.height,
        r.width,
        r.instances,
        r.repeat,
        r.search_ms,
        r.encoder_ms,
        r.total_ms()
    )
}

/// Times `repeat` runs per instance after one untimed warm-up run.
pub fn bench(planner: &BenchPlanner, instances: &[&ProblemInstance], repeat: usize) -> Result<Vec<BenchRow>> {
    let repeat = repeat.max(1);
    let mut sums: BTreeMap<(usize, usize), (usize, f64, f64)> = BTreeMap::new();
    for inst in instances {
        let (search, encoder) = match planner {
            BenchPlanner::Classical(p) => {
                p.plan(inst)?;
                let t = Instant::now();
                for _ in 0..repeat {
                    std::hint::black_box(p.plan(inst)?);
                }
                (t.elapsed().as_secs_f64() / repeat as f64, 0.0)
            }
            BenchPlanner::Neural(p) => {
                let phi = p.guidance(inst)?;
                p.search(inst, &phi)?;
                let t = Instant::now();
                for _ in 0..repeat {
                    std::hint::black_box(p.guidance(inst)?);
                }
                let enc = t.elapsed().as_secs_f64() / repeat as f64;
                let t = Instant::now();
                for _ in 0..repeat {
                    std::hint::black_box(p.search(inst, &phi)?);
                }
                (t.elapsed().as_secs_f64() / repeat as f64, enc)
            }
        };
        let e = sums.entry((inst.height(), inst.width())).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += search;
        e.2 += encoder;
    }
    Ok(sums
        .into_iter()
        .map(|((height, width), (n, s, e))| BenchRow {
            planner: planner.name(),
            height,
            width,
            instances: n,
            repeat,
            search_ms: 1e3 * s / n as f64,
            encoder_ms: 1e3 * e / n as f64,
        })
        .collect())
}
