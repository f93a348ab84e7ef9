//! Synthetic test-signal generation shared by the evaluation harness and
//! the test suites.

use ndarray::Array1;

use crate::keys::BitStream;

/// K distinct indices in [0, n) via a partial shuffle.
pub fn random_support(stream: &mut BitStream, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + stream.uniform_index(n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Exactly K-sparse vector with unit +/-1 spikes.
pub fn sparse_spikes(stream: &mut BitStream, n: usize, k: usize) -> Array1<f64> {
    let mut s = Array1::zeros(n);
    for pos in random_support(stream, n, k) {
        s[pos] = if stream.bit() { 1.0 } else { -1.0 };
    }
    s
}

/// Exactly K-sparse vector with Gaussian amplitudes scaled by `scale`.
pub fn sparse_gaussian(stream: &mut BitStream, n: usize, k: usize, scale: f64) -> Array1<f64> {
    let mut s = Array1::zeros(n);
    for pos in random_support(stream, n, k) {
        s[pos] = scale * stream.standard_normal();
    }
    s
}

/// Indices of entries with magnitude above the threshold.
pub fn support_of(v: &Array1<f64>, threshold: f64) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > threshold)
        .map(|(i, _)| i)
        .collect()
}

pub fn l2_norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

pub fn relative_l2_error(estimate: &Array1<f64>, truth: &Array1<f64>) -> f64 {
    let denom = l2_norm(truth);
    if denom == 0.0 {
        return l2_norm(estimate);
    }
    l2_norm(&(estimate - truth)) / denom
}
