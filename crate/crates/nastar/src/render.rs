//! Search and guidance-map renderings.

use nastar_core::{MapKind, ProblemInstance, ScalarField, SearchResult};

pub const OBSTACLE: [u8; 3] = [0, 0, 0];
pub const FREE: [u8; 3] = [255, 255, 255];
pub const EXPLORED: [u8; 3] = [0, 200, 0];
pub const PATH: [u8; 3] = [255, 0, 0];
pub const ENDPOINT: [u8; 3] = [0, 0, 255];

/// Interleaved RGB: the map (or the image itself), explored nodes, the path,
/// and start/goal, each drawn over the previous layer.
pub fn render_search(inst: &ProblemInstance, result: &SearchResult) -> Vec<u8> {
    let map = &inst.map;
    let (n, w) = (map.len(), map.width());
    let mut rgb = Vec::with_capacity(3 * n);
    for i in 0..n {
        let px = match map.kind() {
            MapKind::Binary => {
                if map.passable_at(i) {
                    FREE
                } else {
                    OBSTACLE
                }
            }
            MapKind::Image => {
                let p = map.image_planes().expect("image");
                [0, 1, 2].map(|ch| (p[ch * n + i] * 255.0).round() as u8)
            }
        };
        rgb.extend_from_slice(&px);
    }
    let mut paint = |i: usize, c: [u8; 3]| rgb[3 * i..3 * i + 3].copy_from_slice(&c);
    for v in result.closed.nodes() {
        paint(v.linear(w), EXPLORED);
    }
    for v in &result.path {
        paint(v.linear(w), PATH);
    }
    paint(inst.start.linear(w), ENDPOINT);
    paint(inst.goal.linear(w), ENDPOINT);
    rgb
}

/// Grayscale with the lowest cost white and the highest black.
pub fn render_guidance(phi: &ScalarField) -> Vec<u8> {
    let v = phi.values();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut rgb = Vec::with_capacity(3 * v.len());
    for &x in v {
        let t = if span > 0.0 { (x - lo) / span } else { 0.0 };
        let g = (255.0 * (1.0 - t)).round() as u8;
        rgb.extend_from_slice(&[g, g, g]);
    }
    rgb
}
