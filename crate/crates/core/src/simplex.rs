//! Small helpers for finite probability vectors.

/// Tolerance for simplex membership of model inputs.
pub const SIMPLEX_TOL: f64 = 1e-12;

pub fn is_distribution(p: &[f64], tol: f64) -> bool {
    p.iter().all(|&x| x >= 0.0 && x.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= tol
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * l1_distance(a, b)
}

/// Divides by the sum. No-op on a zero vector.
pub fn normalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
}

pub fn dirac(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Inverse-CDF draw from `p` using a uniform `u` in [0, 1).
///
/// Zero-probability entries are never returned; rounding slack at the top
/// end falls to the last index with positive mass.
pub fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
