//! Sensor-side operations: the joint sample-compress-encrypt-hash
//! projection, sign-quantized message authentication codes, and the
//! access-password generator.

use std::sync::Arc;

use ndarray::Array1;
use sha2::{Digest, Sha256};

use crate::error::{CsError, Result};
use crate::keymat::{
    build_keyed_basis, build_mac_matrix, build_sensing_matrix, derive_sign_diag, KeyedBasis,
    MacMatrix, SensingMatrix, SignDiag, UnitaryBasis, DEFAULT_MAC_SEED,
};
use crate::keys::{Key, SecretKeys};
use crate::transform::sparsify;

/// Dimensions the sensor needs: signal length N, block length L (so the
/// measurement count is M = N/L), MAC tag length m, and the scale level
/// count f.
#[derive(Clone, Copy, Debug)]
pub struct EncoderConfig {
    pub dim: usize,
    pub block_len: usize,
    pub mac_rows: usize,
    pub scale_levels: usize,
}

/// Ciphertext measurements plus public dimensions. Carries no key material
/// and no MAC measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPackage {
    pub y: Array1<f64>,
    pub dim: usize,
    pub block_len: usize,
    pub mac_rows: usize,
    pub package_id: u64,
}

/// Sign bits of the MAC measurements after NRZ-L line coding (identity on
/// logical bits).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacCode {
    bits: Vec<u8>,
}

impl MacCode {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(CsError::InvalidParameter("MAC bits must be 0 or 1".into()));
        }
        Ok(MacCode { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// The n-bit access credential.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessPassword {
    bits: Vec<u8>,
}

impl AccessPassword {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(CsError::InvalidParameter("AP bits must be 0 or 1".into()));
        }
        Ok(AccessPassword { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Uppercase hex, one character per 4 bits. Requires the length to be a
    /// multiple of 4.
    pub fn hex(&self) -> Result<String> {
        crate::container::bits_to_hex(&self.bits)
    }
}

/// MAC and access password travel together over the trusted side channel,
/// never inside the measurement package.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthBundle {
    pub ap: AccessPassword,
    pub mac: MacCode,
    pub package_id: u64,
}

/// Whether short passwords are permitted. Production enforces the 128-bit
/// floor; test mode exists so the chain arithmetic stays hand-checkable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApPolicy {
    Production,
    Test,
}

pub const AP_MIN_BITS: usize = 128;

/// The sensor context: all derived matrices for one key triple.
pub struct Encoder {
    keyed_basis: KeyedBasis,
    sensing: SensingMatrix,
    mac: MacMatrix,
    config: EncoderConfig,
}

impl Encoder {
    pub fn new(keys: &SecretKeys, config: EncoderConfig, basis: Arc<UnitaryBasis>) -> Result<Self> {
        Self::with_mac_seed(keys, config, basis, DEFAULT_MAC_SEED)
    }

    pub fn with_mac_seed(
        keys: &SecretKeys,
        config: EncoderConfig,
        basis: Arc<UnitaryBasis>,
        mac_seed: u64,
    ) -> Result<Self> {
        if basis.dim() != config.dim {
            return Err(CsError::DimensionMismatch(format!(
                "basis dimension {} does not match configured {}",
                basis.dim(),
                config.dim
            )));
        }
        let keyed_basis =
            build_keyed_basis(&keys.k1, &keys.k2, basis.clone(), config.scale_levels)?;
        let sensing = build_sensing_matrix(&keys.k3, &basis, config.block_len)?;
        let mac = build_mac_matrix(&basis, config.mac_rows, sensing.rows(), mac_seed)?;
        Ok(Encoder {
            keyed_basis,
            sensing,
            mac,
            config,
        })
    }

    /// Builds the context from explicit matrix parts; unit tests use this to
    /// collapse the projection with identity keys.
    pub fn from_parts(
        keyed_basis: KeyedBasis,
        sensing: SensingMatrix,
        mac: MacMatrix,
    ) -> Result<Self> {
        let dim = keyed_basis.dim();
        if sensing.dim() != dim || mac.dim() != dim {
            return Err(CsError::DimensionMismatch(
                "encoder parts disagree on dimension".into(),
            ));
        }
        let config = EncoderConfig {
            dim,
            block_len: sensing.block_len(),
            mac_rows: mac.rows(),
            scale_levels: keyed_basis.scale().levels(),
        };
        Ok(Encoder {
            keyed_basis,
            sensing,
            mac,
            config,
        })
    }

    pub fn config(&self) -> EncoderConfig {
        self.config
    }

    pub fn keyed_basis(&self) -> &KeyedBasis {
        &self.keyed_basis
    }

    pub fn sensing(&self) -> &SensingMatrix {
        &self.sensing
    }

    pub fn mac_matrix(&self) -> &MacMatrix {
        &self.mac
    }

    /// The joint acquisition: one pass computes s = psi_k^-1 x, then the
    /// stacked projection yields the ciphertext y = A_k s and the tag
    /// measurements y_MAC = A_MAC s. The tag measurements are returned
    /// separately and never enter the package.
    pub fn acquire(&self, signal: &Array1<f64>) -> Result<(MeasurementPackage, Array1<f64>)> {
        if signal.len() != self.config.dim {
            return Err(CsError::DimensionMismatch(format!(
                "signal has {} samples, encoder expects {}",
                signal.len(),
                self.config.dim
            )));
        }
        let coeffs = sparsify(signal, &self.keyed_basis)?;
        let y = self.sensing.project(&coeffs)?;
        let y_mac = self.mac.project(&coeffs)?;
        let package_id = derive_package_id(&y, 0);
        Ok((
            MeasurementPackage {
                y,
                dim: self.config.dim,
                block_len: self.config.block_len,
                mac_rows: self.config.mac_rows,
                package_id,
            },
            y_mac,
        ))
    }

    /// As `acquire`, but mixes a record index into the package id so that
    /// identical columns of one capture get distinct ids.
    pub fn acquire_indexed(
        &self,
        signal: &Array1<f64>,
        index: u64,
    ) -> Result<(MeasurementPackage, Array1<f64>)> {
        let (mut package, y_mac) = self.acquire(signal)?;
        package.package_id = derive_package_id(&package.y, index);
        Ok((package, y_mac))
    }
}

/// Content-derived 64-bit package id, stable across runs.
fn derive_package_id(y: &Array1<f64>, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"csguard.pkg-id");
    hasher.update(index.to_le_bytes());
    for v in y {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Sign quantization of the MAC measurements. Zero maps to bit 1 so the
/// code stays deterministic at the boundary.
pub fn gen_mac(mac_measurements: &Array1<f64>) -> Result<MacCode> {
    if mac_measurements.iter().any(|v| !v.is_finite()) {
        return Err(CsError::NonFinite("MAC measurements".into()));
    }
    let bits = mac_measurements
        .iter()
        .map(|&v| if v >= 0.0 { 1u8 } else { 0u8 })
        .collect();
    Ok(MacCode { bits })
}

/// Every intermediate of the access-password pipeline, exposed so tests can
/// pin each stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApStages {
    /// w = (r + 1)/2 over the sign diagonal, as 0/1 bits of length N.
    pub w: Vec<u8>,
    /// Forward chain over length-L' blocks of w.
    pub p: Vec<u8>,
    /// Backward chain over the same blocks.
    pub q: Vec<u8>,
    /// p xor q, the raw chained password.
    pub chained: Vec<u8>,
    /// Final password after the keyed diffusion pass.
    pub bits: Vec<u8>,
}

/// w = (r + 1) / 2: maps the Rademacher diagonal to bits.
pub fn w_from_sign_diag(signs: &SignDiag) -> Vec<u8> {
    signs
        .entries()
        .iter()
        .map(|&r| ((r + 1) / 2) as u8)
        .collect()
}

fn validate_ap_params(dim: usize, ap_len: usize, policy: ApPolicy) -> Result<()> {
    if ap_len == 0 || dim == 0 || !dim.is_multiple_of(ap_len) {
        return Err(CsError::InvalidDimension(format!(
            "password length {ap_len} must divide dimension {dim}"
        )));
    }
    if policy == ApPolicy::Production && ap_len < AP_MIN_BITS {
        return Err(CsError::InvalidParameter(format!(
            "password length {ap_len} below the {AP_MIN_BITS}-bit production floor"
        )));
    }
    Ok(())
}

/// XOR of each length-L' block of w; the chains run over these.
fn block_xors(w: &[u8], ap_len: usize) -> Vec<u8> {
    let block = w.len() / ap_len;
    (0..ap_len)
        .map(|i| {
            w[i * block..(i + 1) * block]
                .iter()
                .fold(0u8, |acc, &b| acc ^ b)
        })
        .collect()
}

/// Chains the password stages from an explicit w vector. The diffusion pass
/// is keyed by k3 so any change to the chained vector re-randomizes every
/// output bit; without it a single w flip only disturbs a contiguous run of
/// chain bits, which is observable structure a credential must not leak.
pub fn ap_stages_from_w(w: &[u8], k3: &Key, ap_len: usize, policy: ApPolicy) -> Result<ApStages> {
    validate_ap_params(w.len(), ap_len, policy)?;
    if w.iter().any(|&b| b > 1) {
        return Err(CsError::InvalidParameter("w entries must be bits".into()));
    }

    let blocks = block_xors(w, ap_len);
    let n = ap_len;

    // Forward chain: p_i accumulates blocks 0..=i.
    let mut p = vec![0u8; n];
    let mut acc = 0u8;
    for i in 0..n {
        acc ^= blocks[i];
        p[i] = acc;
    }

    // Backward chain: q_i accumulates blocks n-1 down to n-1-i.
    let mut q = vec![0u8; n];
    acc = 0;
    for i in 0..n {
        acc ^= blocks[n - 1 - i];
        q[i] = acc;
    }

    let chained: Vec<u8> = p.iter().zip(&q).map(|(a, b)| a ^ b).collect();
    let bits = diffuse(k3, &chained);

    Ok(ApStages {
        w: w.to_vec(),
        p,
        q,
        chained,
        bits,
    })
}

/// Keyed diffusion: hashes k3 and the chained bits into a stream seed and
/// squeezes the final password bits.
fn diffuse(k3: &Key, chained: &[u8]) -> Vec<u8> {
    let packed = crate::container::pack_bits(chained);
    let n = chained.len();
    let mut stream = crate::keys::BitStream::from_material(
        crate::keys::domain::AP_DIFFUSE,
        &[k3.as_bytes(), &(n as u64).to_le_bytes(), &packed],
    );
    let mut bytes = vec![0u8; n.div_ceil(8)];
    stream.fill_bytes(&mut bytes);
    crate::container::unpack_bits(&bytes, n)
}

/// Derives the access password from k3: the sign diagonal gives w, the
/// forward/backward chains compress it to n bits, and the keyed diffusion
/// pass finalizes the credential. Deterministic in (k3, N, n).
pub fn gen_access_password(
    k3: &Key,
    dim: usize,
    ap_len: usize,
    policy: ApPolicy,
) -> Result<AccessPassword> {
    let stages = access_password_stages(k3, dim, ap_len, policy)?;
    Ok(AccessPassword { bits: stages.bits })
}

/// Full pipeline with intermediates.
pub fn access_password_stages(
    k3: &Key,
    dim: usize,
    ap_len: usize,
    policy: ApPolicy,
) -> Result<ApStages> {
    validate_ap_params(dim, ap_len, policy)?;
    let signs = derive_sign_diag(k3, dim)?;
    ap_stages_from_w(&w_from_sign_diag(&signs), k3, ap_len, policy)
}
