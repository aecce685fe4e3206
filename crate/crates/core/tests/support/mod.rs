//! Shared helpers for the integration tests: a small seeded generator, random
//! instances, and a forward-mode reference for the search gradient.

#![allow(dead_code)]

use nastar_core::diff_astar::SearchVariant;
use nastar_core::grid::{dijkstra_field, heuristic_field, UNREACHABLE};
use nastar_core::{GridMap, NodeIndex, ProblemInstance};

/// SplitMix64.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

pub fn random_map(rng: &mut Rng, h: usize, w: usize, density: f64) -> GridMap {
    let cells = (0..h * w).map(|_| u8::from(rng.unit() >= density)).collect();
    GridMap::binary(h, w, cells).unwrap()
}

pub fn is_solvable(inst: &ProblemInstance) -> bool {
    dijkstra_field(&inst.map, inst.goal).get(inst.start) != UNREACHABLE
}

/// Random instance with passable, distinct endpoints. Solvability is not checked.
pub fn random_instance(rng: &mut Rng, h: usize, w: usize, density: f64) -> ProblemInstance {
    loop {
        let map = random_map(rng, h, w, density);
        let free: Vec<usize> = (0..h * w).filter(|&i| map.passable_at(i)).collect();
        if free.len() < 2 {
            continue;
        }
        let s = free[rng.below(free.len())];
        let g = free[rng.below(free.len())];
        if s == g {
            continue;
        }
        return ProblemInstance::new(map, NodeIndex::from_linear(s, w), NodeIndex::from_linear(g, w)).unwrap();
    }
}

pub fn solvable_instance(rng: &mut Rng, h: usize, w: usize, density: f64) -> ProblemInstance {
    loop {
        let inst = random_instance(rng, h, w, density);
        if is_solvable(&inst) {
            return inst;
        }
    }
}

pub fn random_phi(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 0.05 + 0.95 * rng.unit()).collect()
}

/// A value with its derivative with respect to every entry of `Φ`.
#[derive(Debug, Clone)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

impl Dual {
    fn constant(v: f64, n: usize) -> Self {
        Self { v, d: vec![0.0; n] }
    }

    fn axpy(&mut self, a: f64, x: &Dual) {
        self.v += a * x.v;
        for (d, xd) in self.d.iter_mut().zip(&x.d) {
            *d += a * xd;
        }
    }
}

/// Straight-through selection and the `G` update written out by hand in
/// forward mode. Returns the L1 loss between the closed list and `gt` and its
/// derivative with respect to `Φ`.
///
/// Derivative rules: the selection one-hot passes the derivative of the
/// softmax ratio `r_i = o_i e_i / Σ_j o_j e_j` with `e_i = exp(-f_i/τ)`;
/// open list and neighbour masks are constants; `G` inside `⟨G, V*⟩` is held
/// constant; `min` passes the derivative of the first operand on ties.
pub fn reference_gradient(
    inst: &ProblemInstance,
    phi: &[f64],
    gt: &[f64],
    variant: SearchVariant,
    tau: f64,
) -> (f64, Vec<f64>) {
    let (h, w) = (inst.height(), inst.width());
    let n = h * w;
    let heur = heuristic_field(&inst.map, inst.goal);
    let hv = heur.values();
    let phi_d: Vec<Dual> = (0..n)
        .map(|i| {
            let mut d = Dual::constant(phi[i], n);
            d.d[i] = 1.0;
            d
        })
        .collect();
    let mut open = vec![0.0; n];
    open[inst.start.linear(w)] = 1.0;
    let mut closed: Vec<Dual> = (0..n).map(|_| Dual::constant(0.0, n)).collect();
    let mut g: Vec<Dual> = (0..n).map(|_| Dual::constant(0.0, n)).collect();
    let goal = inst.goal.linear(w);

    for _ in 0..n {
        let score: Vec<Dual> = match variant {
            SearchVariant::NeuralAstar => g.clone(),
            SearchVariant::NeuralBF => phi_d.clone(),
        };
        let f: Vec<f64> = (0..n).map(|i| score[i].v + hv[i]).collect();
        let sel = (0..n)
            .filter(|&i| open[i] > 0.0)
            .fold(None, |b: Option<usize>, i| match b {
                Some(j) if f[j] <= f[i] => Some(j),
                _ => Some(i),
            })
            .expect("solvable instance");
        // Softmax ratio derivative; the forward value is the one-hot at `sel`.
        let e: Vec<f64> = (0..n).map(|i| (-(f[i] - f[sel]) / tau).exp()).collect();
        let s: f64 = (0..n).map(|i| open[i] * e[i]).sum();
        let de = |i: usize| -> Vec<f64> { score[i].d.iter().map(|x| -e[i] * x / tau).collect() };
        let mut ds = vec![0.0; n];
        for j in 0..n {
            if open[j] > 0.0 {
                for (a, b) in ds.iter_mut().zip(de(j)) {
                    *a += open[j] * b;
                }
            }
        }
        let vstar: Vec<Dual> = (0..n)
            .map(|i| {
                let dei = de(i);
                let d = (0..n).map(|k| open[i] * (dei[k] * s - e[i] * ds[k]) / (s * s)).collect();
                Dual { v: if i == sel { 1.0 } else { 0.0 }, d }
            })
            .collect();
        if sel == goal {
            break;
        }
        open[sel] = 0.0;
        for i in 0..n {
            closed[i].axpy(1.0, &vstar[i]);
        }
        let mut fresh = vec![0.0; n];
        let mut reopened = vec![0.0; n];
        let (sr, sc) = ((sel / w) as isize, (sel % w) as isize);
        for i in 0..n {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            let ring = i != sel && (r - sr).abs() <= 1 && (c - sc).abs() <= 1;
            if ring && inst.map.passable_at(i) && closed[i].v == 0.0 {
                if open[i] > 0.0 {
                    reopened[i] = 1.0;
                } else {
                    fresh[i] = 1.0;
                }
            }
        }
        for i in 0..n {
            open[i] += fresh[i];
        }
        if variant == SearchVariant::NeuralAstar {
            let mut gstar = Dual::constant(0.0, n);
            for j in 0..n {
                gstar.v += g[j].v * vstar[j].v;
                for k in 0..n {
                    gstar.d[k] += g[j].v * vstar[j].d[k];
                }
            }
            for i in 0..n {
                let mut cand = gstar.clone();
                cand.axpy(1.0, &phi_d[i]);
                if fresh[i] == 1.0 || (reopened[i] == 1.0 && cand.v <= g[i].v) {
                    g[i] = cand;
                }
            }
        }
    }
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let diff = closed[i].v - gt[i];
        loss += diff.abs() * scale;
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        for k in 0..n {
            grad[k] += sign * closed[i].d[k] * scale;
        }
    }
    (loss, grad)
}

/// `‖a − b‖ / ‖b‖`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if diff == 0.0 {
        0.0
    } else {
        diff / norm.max(f64::MIN_POSITIVE)
    }
}
