//! Cloud-side access control and user-side integrity verification plus
//! plaintext recovery.

use std::sync::Arc;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::encoder::{gen_access_password, gen_mac, ApPolicy, MacCode};
use crate::error::{CsError, Result};
use crate::keymat::{build_keyed_basis, MacMatrix, UnitaryBasis};
use crate::keys::Key;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessReason {
    Match,
    Mismatch,
    Malformed,
}

/// Outcome of an access check. `granted` holds exactly when the reason is
/// `match`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessDecision {
    pub granted: bool,
    pub reason: AccessReason,
}

impl AccessDecision {
    fn of(reason: AccessReason) -> Self {
        AccessDecision {
            granted: reason == AccessReason::Match,
            reason,
        }
    }

    /// Single-line JSON record for the pipeline log.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("decision serializes")
    }
}

/// Regenerates the password from k3 (identical to the sensor path) and
/// compares bit-exact. Any deviation rejects; a submission that does not
/// even parse is `malformed` and never granted.
pub fn check_access(
    submitted_hex: &str,
    k3: &Key,
    dim: usize,
    ap_len: usize,
    policy: ApPolicy,
) -> Result<AccessDecision> {
    let expected = gen_access_password(k3, dim, ap_len, policy)?;
    let submitted = match crate::container::bits_from_hex(submitted_hex.trim(), ap_len) {
        Ok(bits) => bits,
        Err(_) => return Ok(AccessDecision::of(AccessReason::Malformed)),
    };
    if submitted == expected.bits() {
        Ok(AccessDecision::of(AccessReason::Match))
    } else {
        Ok(AccessDecision::of(AccessReason::Mismatch))
    }
}

/// Same check against already-parsed bits.
pub fn check_access_bits(
    submitted: &[u8],
    k3: &Key,
    dim: usize,
    ap_len: usize,
    policy: ApPolicy,
) -> Result<AccessDecision> {
    let expected = gen_access_password(k3, dim, ap_len, policy)?;
    if submitted.len() != ap_len || submitted.iter().any(|&b| b > 1) {
        return Ok(AccessDecision::of(AccessReason::Malformed));
    }
    if submitted == expected.bits() {
        Ok(AccessDecision::of(AccessReason::Match))
    } else {
        Ok(AccessDecision::of(AccessReason::Mismatch))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Tampered,
}

/// Bit-error-rate verdict on a reconstructed coefficient vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub ber: f64,
    pub verdict: Verdict,
    pub tau: f64,
}

impl IntegrityReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Fraction of differing bits between two equal-length codes.
pub fn bit_error_rate(received: &MacCode, recomputed: &MacCode) -> Result<f64> {
    if received.len() != recomputed.len() {
        return Err(CsError::DimensionMismatch(format!(
            "MAC lengths differ: {} vs {}",
            received.len(),
            recomputed.len()
        )));
    }
    if received.is_empty() {
        return Err(CsError::InvalidParameter("empty MAC".into()));
    }
    let differing = received
        .bits()
        .iter()
        .zip(recomputed.bits())
        .filter(|(a, b)| a != b)
        .count();
    Ok(differing as f64 / received.len() as f64)
}

/// Recomputes the tag from the reconstructed coefficients and compares
/// against the received one. Accepted iff BER <= tau.
pub fn verify_integrity(
    s_prime: &Array1<f64>,
    received_mac: &MacCode,
    mac_matrix: &MacMatrix,
    tau: f64,
) -> Result<IntegrityReport> {
    if received_mac.len() != mac_matrix.rows() {
        return Err(CsError::DimensionMismatch(format!(
            "MAC has {} bits, matrix produces {}",
            received_mac.len(),
            mac_matrix.rows()
        )));
    }
    let recomputed = gen_mac(&mac_matrix.project(s_prime)?)?;
    let ber = bit_error_rate(received_mac, &recomputed)?;
    let verdict = if ber <= tau {
        Verdict::Accepted
    } else {
        Verdict::Tampered
    };
    Ok(IntegrityReport { ber, verdict, tau })
}

/// Rebuilds psi_k from (k1, k2) and maps verified coefficients back to the
/// signal domain: x' = psi_k s'. Verification is the caller's business.
pub fn recover(
    s_prime: &Array1<f64>,
    k1: &Key,
    k2: &Key,
    basis: Arc<UnitaryBasis>,
    scale_levels: usize,
) -> Result<Array1<f64>> {
    let keyed_basis = build_keyed_basis(k1, k2, basis, scale_levels)?;
    keyed_basis.synthesize(s_prime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{Encoder, EncoderConfig};
    use crate::keymat::build_mac_matrix;
    use crate::keys::{BitStream, SecretKeys};
    use crate::solver::{omp, SsrTask};
    use crate::transform::sparsify;

    fn key(tag: u8) -> Key {
        let mut b = [0u8; 16];
        b[0] = tag;
        Key::new(b)
    }

    fn keys() -> SecretKeys {
        SecretKeys::new(key(1), key(2), key(3))
    }

    #[test]
    fn correct_password_is_granted() {
        let ap = gen_access_password(&key(3), 256, 128, ApPolicy::Production).unwrap();
        let decision =
            check_access(&ap.hex().unwrap(), &key(3), 256, 128, ApPolicy::Production).unwrap();
        assert!(decision.granted);
        assert_eq!(decision.reason, AccessReason::Match);
    }

    #[test]
    fn one_flipped_bit_is_rejected() {
        let ap = gen_access_password(&key(3), 256, 128, ApPolicy::Production).unwrap();
        let mut bits = ap.bits().to_vec();
        bits[17] ^= 1;
        let decision = check_access_bits(&bits, &key(3), 256, 128, ApPolicy::Production).unwrap();
        assert!(!decision.granted);
        assert_eq!(decision.reason, AccessReason::Mismatch);
    }

    #[test]
    fn malformed_submissions_never_grant() {
        for bad in ["", "zz", "0G", "ABC"] {
            let decision = check_access(bad, &key(3), 256, 128, ApPolicy::Production).unwrap();
            assert!(!decision.granted);
            assert_eq!(decision.reason, AccessReason::Malformed);
        }
    }

    #[test]
    fn exhaustive_search_at_reduced_length_finds_one_match() {
        // n = 8: enumerate all 256 candidates; exactly one is accepted.
        let dim = 32;
        let mut accepted = Vec::new();
        for candidate in 0u16..256 {
            let bits: Vec<u8> = (0..8).map(|i| ((candidate >> (7 - i)) & 1) as u8).collect();
            let decision = check_access_bits(&bits, &key(3), dim, 8, ApPolicy::Test).unwrap();
            if decision.granted {
                accepted.push(candidate);
            }
        }
        assert_eq!(accepted.len(), 1);
        let expected = gen_access_password(&key(3), dim, 8, ApPolicy::Test).unwrap();
        let expected_val = expected
            .bits()
            .iter()
            .fold(0u16, |acc, &b| (acc << 1) | b as u16);
        assert_eq!(accepted[0], expected_val);
    }

    #[test]
    fn access_check_is_pure() {
        let ap = gen_access_password(&key(7), 256, 128, ApPolicy::Production).unwrap();
        let hex = ap.hex().unwrap();
        let a = check_access(&hex, &key(7), 256, 128, ApPolicy::Production).unwrap();
        let b = check_access(&hex, &key(7), 256, 128, ApPolicy::Production).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_coefficients_yield_zero_ber() {
        let basis = UnitaryBasis::dct(64).unwrap();
        let enc = Encoder::new(
            &keys(),
            EncoderConfig {
                dim: 64,
                block_len: 2,
                mac_rows: 8,
                scale_levels: 8,
            },
            basis,
        )
        .unwrap();
        let mut stream = BitStream::public(5, b"decoder-test");
        let x = Array1::from_shape_fn(64, |_| stream.standard_normal());
        let (_, y_mac) = enc.acquire(&x).unwrap();
        let mac = gen_mac(&y_mac).unwrap();
        let s = sparsify(&x, enc.keyed_basis()).unwrap();
        let report = verify_integrity(&s, &mac, enc.mac_matrix(), 0.125).unwrap();
        assert_eq!(report.ber, 0.0);
        assert_eq!(report.verdict, Verdict::Accepted);
    }

    #[test]
    fn complemented_mac_is_fully_tampered() {
        let basis = UnitaryBasis::dct(64).unwrap();
        let mac_matrix = build_mac_matrix(&basis, 8, 32, crate::keymat::DEFAULT_MAC_SEED).unwrap();
        let mut stream = BitStream::public(6, b"decoder-test");
        let s = Array1::from_shape_fn(64, |_| stream.standard_normal());
        let honest = gen_mac(&mac_matrix.project(&s).unwrap()).unwrap();
        let complemented =
            MacCode::from_bits(honest.bits().iter().map(|b| b ^ 1).collect()).unwrap();
        let report = verify_integrity(&s, &complemented, &mac_matrix, 0.125).unwrap();
        assert_eq!(report.ber, 1.0);
        assert_eq!(report.verdict, Verdict::Tampered);
    }

    #[test]
    fn verify_rejects_inconsistent_dimensions() {
        let basis = UnitaryBasis::dct(64).unwrap();
        let mac_matrix = build_mac_matrix(&basis, 8, 32, crate::keymat::DEFAULT_MAC_SEED).unwrap();
        let s = Array1::zeros(64);
        let short_mac = MacCode::from_bits(vec![1, 0, 1]).unwrap();
        assert!(verify_integrity(&s, &short_mac, &mac_matrix, 0.125).is_err());

        let ok_mac = MacCode::from_bits(vec![1; 8]).unwrap();
        let wrong_s = Array1::zeros(32);
        assert!(verify_integrity(&wrong_s, &ok_mac, &mac_matrix, 0.125).is_err());
    }

    #[test]
    fn threshold_boundaries() {
        // 3/25 = 0.12 accepted at tau = 0.125; 4/25 = 0.16 tampered.
        let a = MacCode::from_bits(vec![0; 25]).unwrap();
        let mut three = vec![0u8; 25];
        three[0] = 1;
        three[10] = 1;
        three[24] = 1;
        let b = MacCode::from_bits(three).unwrap();
        let ber = bit_error_rate(&a, &b).unwrap();
        assert!((ber - 0.12).abs() < 1e-12);
        assert!(ber <= 0.125);

        let mut four = vec![0u8; 25];
        for i in [1usize, 5, 9, 13] {
            four[i] = 1;
        }
        let c = MacCode::from_bits(four).unwrap();
        let ber = bit_error_rate(&a, &c).unwrap();
        assert!((ber - 0.16).abs() < 1e-12);
        assert!(ber > 0.125);
    }

    #[test]
    fn recover_inverts_sparsify() {
        let basis = UnitaryBasis::dct(64).unwrap();
        let enc = Encoder::new(
            &keys(),
            EncoderConfig {
                dim: 64,
                block_len: 2,
                mac_rows: 8,
                scale_levels: 8,
            },
            basis.clone(),
        )
        .unwrap();
        let mut stream = BitStream::public(7, b"decoder-test");
        let x = Array1::from_shape_fn(64, |_| stream.standard_normal());
        let s = sparsify(&x, enc.keyed_basis()).unwrap();
        let back = recover(&s, &key(1), &key(2), basis.clone(), 8).unwrap();
        let rel = (&back - &x).iter().map(|v| v * v).sum::<f64>().sqrt()
            / x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel < 1e-8);

        let zero = recover(&Array1::zeros(64), &key(1), &key(2), basis, 8).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_pipeline_round_trip() {
        let basis = UnitaryBasis::dct(256).unwrap();
        let enc = Encoder::new(
            &keys(),
            EncoderConfig {
                dim: 256,
                block_len: 2,
                mac_rows: 64,
                scale_levels: 16,
            },
            basis.clone(),
        )
        .unwrap();

        // Signal with 8 spikes in the public basis.
        let mut stream = BitStream::public(8, b"decoder-test");
        let mut coeffs = Array1::zeros(256);
        let mut idx: Vec<usize> = (0..256).collect();
        for i in 0..8 {
            let j = i + stream.uniform_index(256 - i);
            idx.swap(i, j);
        }
        for &pos in &idx[..8] {
            coeffs[pos] = if stream.bit() { 1.0 } else { -1.0 };
        }
        let x = basis.synthesize(&coeffs);

        let (package, y_mac) = enc.acquire(&x).unwrap();
        let mac = gen_mac(&y_mac).unwrap();

        let task = SsrTask::new(enc.sensing().matrix().clone(), package.y.clone()).unwrap();
        let result = omp(&task, 8, None).unwrap();

        let report = verify_integrity(&result.s_hat, &mac, enc.mac_matrix(), 0.125).unwrap();
        assert_eq!(report.verdict, Verdict::Accepted);

        let x_prime = recover(&result.s_hat, &key(1), &key(2), basis, 16).unwrap();
        let rel = (&x_prime - &x).iter().map(|v| v * v).sum::<f64>().sqrt()
            / x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel < 1e-5, "pipeline error {rel:.3e}");
    }

    #[test]
    fn tamper_response_is_monotone_in_pollution_fraction() {
        let basis = UnitaryBasis::dct(128).unwrap();
        let fractions = [0.0, 0.05, 0.2, 0.5];
        let mut means = Vec::new();
        for (fi, frac) in fractions.iter().enumerate() {
            let mut total = 0.0;
            let trials = 40;
            for t in 0..trials {
                let all = SecretKeys::from_stream(&mut BitStream::public(
                    (fi * 1000 + t) as u64,
                    b"decoder-tamper",
                ));
                let enc = Encoder::new(
                    &all,
                    EncoderConfig {
                        dim: 128,
                        block_len: 2,
                        mac_rows: 32,
                        scale_levels: 16,
                    },
                    basis.clone(),
                )
                .unwrap();
                let mut stream =
                    BitStream::public((fi * 1000 + t + 500_000) as u64, b"decoder-tamper");
                let mut coeffs = Array1::zeros(128);
                for _ in 0..6 {
                    let pos = stream.uniform_index(128);
                    coeffs[pos] = if stream.bit() { 1.0 } else { -1.0 };
                }
                let x = basis.synthesize(&coeffs);
                let (package, y_mac) = enc.acquire(&x).unwrap();
                let mac = gen_mac(&y_mac).unwrap();

                let mut y = package.y.clone();
                let m = y.len();
                let scale = y.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
                let replace = ((frac * m as f64).round() as usize).min(m);
                for _ in 0..replace {
                    let pos = stream.uniform_index(m);
                    y[pos] = (stream.unit_f64() * 2.0 - 1.0) * scale;
                }

                let task = SsrTask::new(enc.sensing().matrix().clone(), y).unwrap();
                let result = omp(&task, 6, Some(0.04)).unwrap();
                let report =
                    verify_integrity(&result.s_hat, &mac, enc.mac_matrix(), 0.125).unwrap();
                total += report.ber;
            }
            means.push(total / trials as f64);
        }
        for w in means.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "mean BER not monotone: {means:?}");
        }
        assert_eq!(means[0], 0.0);
    }

    #[test]
    fn reports_serialize_to_single_json_lines() {
        let report = IntegrityReport {
            ber: 0.25,
            verdict: Verdict::Tampered,
            tau: 0.125,
        };
        let line = report.to_json_line();
        assert!(!line.contains('\n'));
        assert!(line.contains("tampered"));

        let decision = AccessDecision {
            granted: false,
            reason: AccessReason::Mismatch,
        };
        let line = decision.to_json_line();
        assert!(!line.contains('\n'));
        assert!(line.contains("mismatch"));
    }
}
