//! Key material and the keyed deterministic bit stream that backs every
//! pseudorandom object in the crate.
//!
//! Streams are ChaCha20 keystreams whose 256-bit seed is derived by hashing
//! a domain tag together with the input material (key bytes, public seed,
//! extra parameters). Two streams with different domains or different keys
//! are independent; the same inputs always reproduce the same stream, on
//! any host.

use std::fmt;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::error::{CsError, Result};

pub const KEY_BYTES: usize = 16;

/// A 128-bit secret key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Key([u8; KEY_BYTES]);

impl Key {
    pub fn new(bytes: [u8; KEY_BYTES]) -> Self {
        Key(bytes)
    }

    /// Parses exactly 32 hex characters.
    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 2 * KEY_BYTES {
            return Err(CsError::KeyFormat(format!(
                "expected {} hex characters, got {}",
                2 * KEY_BYTES,
                s.len()
            )));
        }
        let mut bytes = [0u8; KEY_BYTES];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = hex_nibble(chunk[0])?;
            let lo = hex_nibble(chunk[1])?;
            bytes[i] = (hi << 4) | lo;
        }
        Ok(Key(bytes))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02X}")).collect()
    }

    pub fn as_bytes(&self) -> &[u8; KEY_BYTES] {
        &self.0
    }

    /// The key with the low bit of its last byte flipped. Used by the
    /// key-sensitivity experiments as the canonical "k xor 1".
    pub fn with_flipped_lsb(&self) -> Key {
        let mut bytes = self.0;
        bytes[KEY_BYTES - 1] ^= 1;
        Key(bytes)
    }

    pub fn from_stream(stream: &mut BitStream) -> Key {
        let mut bytes = [0u8; KEY_BYTES];
        stream.fill_bytes(&mut bytes);
        Key(bytes)
    }
}

// Key bytes never reach logs or panic messages.
impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key(<redacted>)")
    }
}

fn hex_nibble(c: u8) -> Result<u8> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        b'A'..=b'F' => Ok(c - b'A' + 10),
        _ => Err(CsError::KeyFormat(format!(
            "invalid hex character {:?}",
            c as char
        ))),
    }
}

/// The key triple driving permutation, scale-diagonal, and sign-diagonal
/// generation. k1 and k2 stay on the sensor/user side; k3 is shared with
/// the cloud.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SecretKeys {
    pub k1: Key,
    pub k2: Key,
    pub k3: Key,
}

impl SecretKeys {
    pub fn new(k1: Key, k2: Key, k3: Key) -> Self {
        SecretKeys { k1, k2, k3 }
    }

    pub fn from_stream(stream: &mut BitStream) -> Self {
        SecretKeys {
            k1: Key::from_stream(stream),
            k2: Key::from_stream(stream),
            k3: Key::from_stream(stream),
        }
    }
}

impl fmt::Debug for SecretKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKeys(<redacted>)")
    }
}

/// Domain-separation tags. One tag per derived object class.
pub mod domain {
    pub const PERMUTATION: &[u8] = b"permutation";
    pub const SCALE_DIAG: &[u8] = b"scale-diag";
    pub const SIGN_DIAG: &[u8] = b"sign-diag";
    pub const MAC_MATRIX: &[u8] = b"mac-matrix";
    pub const POWER_ITER: &[u8] = b"power-iter";
    pub const AP_DIFFUSE: &[u8] = b"ap-diffuse";
    pub const RIP_TRIAL: &[u8] = b"rip-trial";
    pub const EVAL: &[u8] = b"eval";
}

fn derive_seed(dom: &[u8], material: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"csguard.v1");
    hasher.update([dom.len() as u8]);
    hasher.update(dom);
    for part in material {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// Deterministic bit generator: a ChaCha20 keystream plus small samplers.
///
/// The samplers are implemented here rather than taken from `rand`
/// distributions so that outputs are pinned by this crate alone and cannot
/// drift with a dependency's internals.
pub struct BitStream {
    rng: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl BitStream {
    /// Stream keyed by a secret key, a domain tag, and one parameter word.
    pub fn keyed(key: &Key, dom: &[u8], param: u64) -> Self {
        Self::from_material(dom, &[key.as_bytes(), &param.to_le_bytes()])
    }

    /// Stream derived from a public seed word, for objects that must be
    /// identical on every host.
    pub fn public(seed: u64, dom: &[u8]) -> Self {
        Self::from_material(dom, &[&seed.to_le_bytes()])
    }

    pub fn from_material(dom: &[u8], material: &[&[u8]]) -> Self {
        BitStream {
            rng: ChaCha20Rng::from_seed(derive_seed(dom, material)),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest);
    }

    pub fn bit(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    /// Uniform index in [0, bound) by rejection sampling (no modulo bias).
    pub fn uniform_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "uniform_index bound must be positive");
        let bound = bound as u64;
        // 2^64 mod bound; values below this would bias the low residues.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return (r % bound) as usize;
            }
        }
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal via Box-Muller; pairs are cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let u2 = self.unit_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(radius * sin);
        radius * cos
    }
}
