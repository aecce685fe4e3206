//! Float helpers that work without `std`.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes
/// while staying deterministic.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

const MR: usize = 4;
const NR: usize = 8;
const NC: usize = 256;

/// `c += a · b` for row-major `a: m×k`, `b: k×n`, `c: m×n`.
///
/// A 4×8 register tile accumulates over the full `k` before touching `c`;
/// columns are processed in panels of 256 so the `b` panel stays in cache.
pub(crate) fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    for n0 in (0..n).step_by(NC) {
        let n1 = (n0 + NC).min(n);
        let mut i = 0;
        while i < m {
            let mr = MR.min(m - i);
            let mut p = n0;
            while p < n1 {
                let nr = NR.min(n1 - p);
                if mr == MR && nr == NR {
                    let mut acc = [[0.0f64; NR]; MR];
                    let rows: [&[f64]; MR] = core::array::from_fn(|r| &a[(i + r) * k..(i + r + 1) * k]);
                    for kk in 0..k {
                        let brow: &[f64; NR] = b[kk * n + p..kk * n + p + NR].try_into().expect("tile");
                        for r in 0..MR {
                            let av = rows[r][kk];
                            for x in 0..NR {
                                acc[r][x] += av * brow[x];
                            }
                        }
                    }
                    for r in 0..MR {
                        let dst = &mut c[(i + r) * n + p..(i + r) * n + p + NR];
                        for x in 0..NR {
                            dst[x] += acc[r][x];
                        }
                    }
                } else {
                    for r in 0..mr {
                        for x in 0..nr {
                            let mut sum = 0.0;
                            for kk in 0..k {
                                sum += a[(i + r) * k + kk] * b[kk * n + p + x];
                            }
                            c[(i + r) * n + p + x] += sum;
                        }
                    }
                }
                p += nr;
            }
            i += mr;
        }
    }
}

/// Transpose of a row-major `rows×cols` matrix.
pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 100]`.
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
