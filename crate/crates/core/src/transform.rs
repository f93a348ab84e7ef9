//! Basis application and mutual-coherence computation.
//!
//! `sparsify` maps a signal into the keyed transform domain (this is the
//! substitution half of the cipher); `desparsify` maps coefficients back.

use ndarray::{Array1, Array2};

use crate::error::{CsError, Result};
use crate::keymat::KeyedBasis;

/// s = psi_k^-1 x via the closed-form inverse.
pub fn sparsify(signal: &Array1<f64>, keyed_basis: &KeyedBasis) -> Result<Array1<f64>> {
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(CsError::NonFinite("signal".into()));
    }
    keyed_basis.analyze(signal)
}

/// x = psi_k s
pub fn desparsify(coeffs: &Array1<f64>, keyed_basis: &KeyedBasis) -> Result<Array1<f64>> {
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(CsError::NonFinite("coefficient vector".into()));
    }
    keyed_basis.synthesize(coeffs)
}

/// Mutual coherence: the largest normalized inner product between distinct
/// columns. Computed by the exhaustive pairwise loop over normalized
/// columns; quadratic, but predictable at the sizes used here.
pub fn coherence(u: &Array2<f64>) -> Result<f64> {
    let cols = u.ncols();
    if cols < 2 {
        return Err(CsError::InvalidDimension(format!(
            "coherence needs at least 2 columns, got {cols}"
        )));
    }

    let norms: Vec<f64> = (0..cols)
        .map(|j| u.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(CsError::DegenerateInput(format!("column {j} is zero")));
    }

    let mut mu = 0.0f64;
    for i in 0..cols {
        let ci = u.column(i);
        for j in i + 1..cols {
            let dot: f64 = ci.iter().zip(u.column(j)).map(|(a, b)| a * b).sum();
            mu = mu.max(dot.abs() / (norms[i] * norms[j]));
        }
    }
    Ok(mu)
}
