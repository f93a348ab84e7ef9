//! Binary container formats and the bit/hex helpers they share.
//!
//! Four record types, all little-endian, each self-delimiting so files may
//! hold a stream of records back to back:
//!
//! ```text
//! CSVM matrix:       magic "CSVM" | u16 version | u8 role | u32 rows |
//!                    u32 cols | rows*cols f64 row-major
//! CSMP package:      magic "CSMP" | u16 version | u64 package id |
//!                    u32 N | u32 L | u32 m | u32 y_len | y_len f64
//! CSAB auth bundle:  magic "CSAB" | u16 version | u32 n | u32 m |
//!                    AP bits packed | MAC bits packed | u64 package id
//! CSCF coefficients: magic "CSCF" | u16 version | u64 package id |
//!                    u32 N | u32 ap_len | u8 solver | u8 converged |
//!                    u32 iterations | f64 residual norm |
//!                    cloud AP bits packed | N f64 coefficients
//! ```
//!
//! Bit sequences pack MSB-first within each byte. Derived-matrix containers
//! carry no key material by construction.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::encoder::{AccessPassword, AuthBundle, MacCode, MeasurementPackage};
use crate::error::{CsError, Result};

pub const FORMAT_VERSION: u16 = 1;

pub const MAGIC_MATRIX: &[u8; 4] = b"CSVM";
pub const MAGIC_PACKAGE: &[u8; 4] = b"CSMP";
pub const MAGIC_AUTH: &[u8; 4] = b"CSAB";
pub const MAGIC_COEFFS: &[u8; 4] = b"CSCF";

/// What a serialized matrix is. Informational only; the payload layout is
/// identical for every role.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MatrixRole {
    Generic = 0,
    Sensing = 1,
    Mac = 2,
    Basis = 3,
    KeyedBasis = 4,
}

impl MatrixRole {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => MatrixRole::Generic,
            1 => MatrixRole::Sensing,
            2 => MatrixRole::Mac,
            3 => MatrixRole::Basis,
            4 => MatrixRole::KeyedBasis,
            other => {
                return Err(CsError::Container(format!("unknown matrix role {other}")));
            }
        })
    }
}

// ---------------------------------------------------------------------------
// bit helpers

/// Packs a 0/1 slice MSB-first; the final byte is zero-padded.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            bytes[i / 8] |= 1 << (7 - (i % 8));
        }
    }
    bytes
}

/// Unpacks `count` bits from MSB-first bytes.
pub fn unpack_bits(bytes: &[u8], count: usize) -> Vec<u8> {
    (0..count)
        .map(|i| (bytes[i / 8] >> (7 - (i % 8))) & 1)
        .collect()
}

/// Uppercase hex rendering, one character per 4 bits.
pub fn bits_to_hex(bits: &[u8]) -> Result<String> {
    if !bits.len().is_multiple_of(4) {
        return Err(CsError::InvalidParameter(format!(
            "bit length {} is not a multiple of 4",
            bits.len()
        )));
    }
    Ok(bits
        .chunks(4)
        .map(|chunk| {
            let nibble = chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b);
            char::from_digit(nibble as u32, 16)
                .expect("nibble fits")
                .to_ascii_uppercase()
        })
        .collect())
}

/// Parses an uppercase-or-lowercase hex string into exactly `expected_bits`
/// bits.
pub fn bits_from_hex(s: &str, expected_bits: usize) -> Result<Vec<u8>> {
    if !expected_bits.is_multiple_of(4) || s.len() * 4 != expected_bits {
        return Err(CsError::Container(format!(
            "expected {} hex characters, got {}",
            expected_bits / 4,
            s.len()
        )));
    }
    let mut bits = Vec::with_capacity(expected_bits);
    for c in s.chars() {
        let nibble = c
            .to_digit(16)
            .ok_or_else(|| CsError::Container(format!("invalid hex character {c:?}")))?
            as u8;
        for shift in (0..4).rev() {
            bits.push((nibble >> shift) & 1);
        }
    }
    Ok(bits)
}

// ---------------------------------------------------------------------------
// low-level field IO

fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| CsError::Container(format!("truncated while reading {what}: {e}")))
}

/// Reads and checks magic + version. Returns Ok(None) on clean EOF so
/// callers can iterate record streams.
fn read_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<Option<()>> {
    let mut got = [0u8; 4];
    match r.read(&mut got)? {
        0 => return Ok(None),
        4 => {}
        n => {
            // Partial magic: try to finish it so truncation is reported
            // precisely.
            read_exact(r, &mut got[n..], "magic")?;
        }
    }
    if &got != magic {
        return Err(CsError::Container(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut v = [0u8; 2];
    read_exact(r, &mut v, "version")?;
    let version = u16::from_le_bytes(v);
    if version != FORMAT_VERSION {
        return Err(CsError::Container(format!("unsupported version {version}")));
    }
    Ok(Some(()))
}

fn read_u8(r: &mut impl Read, what: &str) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b, what)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64_vec(r: &mut impl Read, len: usize, what: &str) -> Result<Array1<f64>> {
    let mut buf = vec![0u8; len * 8];
    read_exact(r, &mut buf, what)?;
    Ok(Array1::from_iter(buf.chunks_exact(8).map(|c| {
        f64::from_le_bytes(c.try_into().expect("8-byte chunk"))
    })))
}

const MAX_DIM: u32 = 1 << 24; // sanity bound against garbage headers

fn checked_dim(v: u32, what: &str) -> Result<usize> {
    if v == 0 || v > MAX_DIM {
        return Err(CsError::Container(format!("implausible {what}: {v}")));
    }
    Ok(v as usize)
}

// ---------------------------------------------------------------------------
// CSVM matrices

pub fn write_matrix(w: &mut impl Write, role: MatrixRole, mat: &Array2<f64>) -> Result<()> {
    write_magic(w, MAGIC_MATRIX)?;
    w.write_all(&[role as u8])?;
    w.write_all(&(mat.nrows() as u32).to_le_bytes())?;
    w.write_all(&(mat.ncols() as u32).to_le_bytes())?;
    for v in mat.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix(r: &mut impl Read) -> Result<Option<(MatrixRole, Array2<f64>)>> {
    if read_magic(r, MAGIC_MATRIX)?.is_none() {
        return Ok(None);
    }
    let role = MatrixRole::from_u8(read_u8(r, "role")?)?;
    let rows = checked_dim(read_u32(r, "rows")?, "row count")?;
    let cols = checked_dim(read_u32(r, "cols")?, "column count")?;
    let flat = read_f64_vec(r, rows * cols, "matrix payload")?;
    let mat = Array2::from_shape_vec((rows, cols), flat.to_vec())
        .map_err(|e| CsError::Container(format!("shape error: {e}")))?;
    Ok(Some((role, mat)))
}

// ---------------------------------------------------------------------------
// CSMP measurement packages

pub fn write_package(w: &mut impl Write, package: &MeasurementPackage) -> Result<()> {
    write_magic(w, MAGIC_PACKAGE)?;
    w.write_all(&package.package_id.to_le_bytes())?;
    w.write_all(&(package.dim as u32).to_le_bytes())?;
    w.write_all(&(package.block_len as u32).to_le_bytes())?;
    w.write_all(&(package.mac_rows as u32).to_le_bytes())?;
    w.write_all(&(package.y.len() as u32).to_le_bytes())?;
    for v in package.y.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_package(r: &mut impl Read) -> Result<Option<MeasurementPackage>> {
    if read_magic(r, MAGIC_PACKAGE)?.is_none() {
        return Ok(None);
    }
    let package_id = read_u64(r, "package id")?;
    let dim = checked_dim(read_u32(r, "N")?, "N")?;
    let block_len = checked_dim(read_u32(r, "L")?, "L")?;
    let mac_rows = checked_dim(read_u32(r, "m")?, "m")?;
    let y_len = checked_dim(read_u32(r, "y length")?, "y length")?;
    if block_len > dim || dim % block_len != 0 || y_len != dim / block_len {
        return Err(CsError::Container(format!(
            "inconsistent package dims: N={dim} L={block_len} y_len={y_len}"
        )));
    }
    let y = read_f64_vec(r, y_len, "measurements")?;
    Ok(Some(MeasurementPackage {
        y,
        dim,
        block_len,
        mac_rows,
        package_id,
    }))
}

pub fn read_all_packages(r: &mut impl Read) -> Result<Vec<MeasurementPackage>> {
    let mut out = Vec::new();
    while let Some(p) = read_package(r)? {
        out.push(p);
    }
    if out.is_empty() {
        return Err(CsError::Container("no packages in stream".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSAB auth bundles

pub fn write_auth_bundle(w: &mut impl Write, bundle: &AuthBundle) -> Result<()> {
    write_magic(w, MAGIC_AUTH)?;
    w.write_all(&(bundle.ap.len() as u32).to_le_bytes())?;
    w.write_all(&(bundle.mac.len() as u32).to_le_bytes())?;
    w.write_all(&pack_bits(bundle.ap.bits()))?;
    w.write_all(&pack_bits(bundle.mac.bits()))?;
    w.write_all(&bundle.package_id.to_le_bytes())?;
    Ok(())
}

pub fn read_auth_bundle(r: &mut impl Read) -> Result<Option<AuthBundle>> {
    if read_magic(r, MAGIC_AUTH)?.is_none() {
        return Ok(None);
    }
    let ap_len = checked_dim(read_u32(r, "AP length")?, "AP length")?;
    let mac_len = checked_dim(read_u32(r, "MAC length")?, "MAC length")?;
    let mut ap_bytes = vec![0u8; ap_len.div_ceil(8)];
    read_exact(r, &mut ap_bytes, "AP bits")?;
    let mut mac_bytes = vec![0u8; mac_len.div_ceil(8)];
    read_exact(r, &mut mac_bytes, "MAC bits")?;
    let package_id = read_u64(r, "package id")?;
    Ok(Some(AuthBundle {
        ap: AccessPassword::from_bits(unpack_bits(&ap_bytes, ap_len))?,
        mac: MacCode::from_bits(unpack_bits(&mac_bytes, mac_len))?,
        package_id,
    }))
}

pub fn read_all_auth_bundles(r: &mut impl Read) -> Result<Vec<AuthBundle>> {
    let mut out = Vec::new();
    while let Some(b) = read_auth_bundle(r)? {
        out.push(b);
    }
    if out.is_empty() {
        return Err(CsError::Container("no auth bundles in stream".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSCF coefficient records

/// Cloud output for one package: the reconstructed coefficients, solver
/// diagnostics, and the cloud-side regenerated access password that gates
/// release.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffRecord {
    pub package_id: u64,
    pub dim: usize,
    pub cloud_ap: AccessPassword,
    pub solver_mode: u8,
    pub converged: bool,
    pub iterations: u32,
    pub residual_norm: f64,
    pub s_hat: Array1<f64>,
}

pub fn write_coeff_record(w: &mut impl Write, rec: &CoeffRecord) -> Result<()> {
    if rec.s_hat.len() != rec.dim {
        return Err(CsError::DimensionMismatch(format!(
            "coefficient record dim {} does not match payload {}",
            rec.dim,
            rec.s_hat.len()
        )));
    }
    write_magic(w, MAGIC_COEFFS)?;
    w.write_all(&rec.package_id.to_le_bytes())?;
    w.write_all(&(rec.dim as u32).to_le_bytes())?;
    w.write_all(&(rec.cloud_ap.len() as u32).to_le_bytes())?;
    w.write_all(&[rec.solver_mode, rec.converged as u8])?;
    w.write_all(&rec.iterations.to_le_bytes())?;
    w.write_all(&rec.residual_norm.to_le_bytes())?;
    w.write_all(&pack_bits(rec.cloud_ap.bits()))?;
    for v in rec.s_hat.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_coeff_record(r: &mut impl Read) -> Result<Option<CoeffRecord>> {
    if read_magic(r, MAGIC_COEFFS)?.is_none() {
        return Ok(None);
    }
    let package_id = read_u64(r, "package id")?;
    let dim = checked_dim(read_u32(r, "N")?, "N")?;
    let ap_len = checked_dim(read_u32(r, "AP length")?, "AP length")?;
    let solver_mode = read_u8(r, "solver mode")?;
    let converged = read_u8(r, "converged flag")? != 0;
    let iterations = read_u32(r, "iterations")?;
    let residual_norm = read_f64(r, "residual norm")?;
    let mut ap_bytes = vec![0u8; ap_len.div_ceil(8)];
    read_exact(r, &mut ap_bytes, "cloud AP bits")?;
    let s_hat = read_f64_vec(r, dim, "coefficients")?;
    Ok(Some(CoeffRecord {
        package_id,
        dim,
        cloud_ap: AccessPassword::from_bits(unpack_bits(&ap_bytes, ap_len))?,
        solver_mode,
        converged,
        iterations,
        residual_norm,
        s_hat,
    }))
}

pub fn read_all_coeff_records(r: &mut impl Read) -> Result<Vec<CoeffRecord>> {
    let mut out = Vec::new();
    while let Some(rec) = read_coeff_record(r)? {
        out.push(rec);
    }
    if out.is_empty() {
        return Err(CsError::Container(
            "no coefficient records in stream".into(),
        ));
    }
    Ok(out)
}
