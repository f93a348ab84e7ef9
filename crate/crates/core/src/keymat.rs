//! Deterministic derivation of every key-controlled and public matrix from
//! the key triple and the problem dimensions.
//!
//! The objects built here:
//!
//! * `UnitaryBasis` - the public orthonormal basis (DCT-II by default).
//! * `Permutation` (from k1) and `ScaleDiag` (from k2) - together with the
//!   basis they form the keyed basis `psi_k = Psi P D`.
//! * `SignDiag` (from k3) and `BlockIdentity` - together with the basis they
//!   form the sensing matrix `A_k = S R Psi`.
//! * `MacMatrix` - the public wide random projection used for integrity
//!   tags; deliberately built with too few rows to act as an isometry.
//!
//! All of these are immutable after construction and safe to share across
//! threads.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{CsError, Result};
use crate::keys::{domain, BitStream, Key};

/// Default public seed for the MAC projection. Every party derives the same
/// matrix from it.
pub const DEFAULT_MAC_SEED: u64 = 0x4353_4d41_432d_3031;

/// Scale-diagonal magnitudes live in this band; f levels are log-spaced
/// across it.
pub const SCALE_MIN: f64 = 0.5;
pub const SCALE_MAX: f64 = 2.0;

/// An N x N real matrix with orthonormal columns.
#[derive(Clone, Debug)]
pub struct UnitaryBasis {
    mat: Array2<f64>,
}

impl UnitaryBasis {
    /// Orthonormal DCT-II synthesis basis: column k is the k-th cosine atom.
    pub fn dct(n: usize) -> Result<Arc<Self>> {
        if n < 2 {
            return Err(CsError::InvalidDimension(format!(
                "basis dimension must be >= 2, got {n}"
            )));
        }
        let norm0 = (1.0 / n as f64).sqrt();
        let norm = (2.0 / n as f64).sqrt();
        let mat = Array2::from_shape_fn((n, n), |(j, k)| {
            let scale = if k == 0 { norm0 } else { norm };
            scale * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64).cos()
        });
        Self::from_matrix(mat)
    }

    /// Identity basis. Handy in unit tests where the collapse of the
    /// projection formulas is easiest to see.
    pub fn identity(n: usize) -> Result<Arc<Self>> {
        Self::from_matrix(Array2::eye(n))
    }

    /// Wraps an arbitrary matrix after checking unitarity.
    pub fn from_matrix(mat: Array2<f64>) -> Result<Arc<Self>> {
        let n = mat.nrows();
        if n != mat.ncols() || n < 1 {
            return Err(CsError::InvalidDimension(format!(
                "basis must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let gram = mat.dot(&mat.t());
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).abs());
            }
        }
        if worst >= 1e-10 {
            return Err(CsError::DegenerateInput(format!(
                "basis is not unitary (max |Psi Psi^T - I| = {worst:.3e})"
            )));
        }
        Ok(Arc::new(UnitaryBasis { mat }))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.mat
    }

    /// x = Psi s
    pub fn synthesize(&self, coeffs: &Array1<f64>) -> Array1<f64> {
        self.mat.dot(coeffs)
    }

    /// s = Psi^T x
    pub fn analyze(&self, signal: &Array1<f64>) -> Array1<f64> {
        self.mat.t().dot(signal)
    }
}

/// A bijection on [0, N). Column j of the matrix form has its 1 in row
/// `map[j]`, i.e. P e_j = e_{map[j]}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// Wraps an explicit mapping, verifying it is a bijection.
    pub fn from_mapping(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(CsError::InvalidParameter(
                    "mapping is not a bijection".into(),
                ));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0usize; self.map.len()];
        for (j, &i) in self.map.iter().enumerate() {
            inv[i] = j;
        }
        Permutation { map: inv }
    }
}

/// Derives the keyed permutation: a Fisher-Yates shuffle driven by the
/// k1 stream.
pub fn derive_permutation(k1: &Key, n: usize) -> Result<Permutation> {
    if n < 2 {
        return Err(CsError::InvalidDimension(format!(
            "permutation dimension must be >= 2, got {n}"
        )));
    }
    let mut stream = BitStream::keyed(k1, domain::PERMUTATION, n as u64);
    let mut map: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = stream.uniform_index(i + 1);
        map.swap(i, j);
    }
    Ok(Permutation { map })
}

/// Diagonal with nonzero entries whose magnitudes take one of f discrete
/// levels; signs are equiprobable.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleDiag {
    entries: Vec<f64>,
    levels: usize,
}

impl ScaleDiag {
    pub fn identity(n: usize) -> Self {
        ScaleDiag {
            entries: vec![1.0; n],
            levels: 1,
        }
    }

    pub fn from_entries(entries: Vec<f64>, levels: usize) -> Result<Self> {
        if entries.iter().any(|&e| e == 0.0 || !e.is_finite()) {
            return Err(CsError::InvalidParameter(
                "scale diagonal entries must be finite and nonzero".into(),
            ));
        }
        Ok(ScaleDiag { entries, levels })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn levels(&self) -> usize {
        self.levels
    }
}

/// The f admissible magnitudes: log-spaced across [SCALE_MIN, SCALE_MAX].
pub fn scale_levels(f: usize) -> Vec<f64> {
    let ratio = SCALE_MAX / SCALE_MIN;
    (0..f)
        .map(|i| {
            if f == 1 {
                1.0
            } else {
                SCALE_MIN * ratio.powf(i as f64 / (f - 1) as f64)
            }
        })
        .collect()
}

pub fn derive_scale_diag(k2: &Key, n: usize, f: usize) -> Result<ScaleDiag> {
    if n < 2 {
        return Err(CsError::InvalidDimension(format!(
            "scale diagonal dimension must be >= 2, got {n}"
        )));
    }
    if f < 2 {
        return Err(CsError::InvalidParameter(format!(
            "level count must be >= 2, got {f}"
        )));
    }
    let levels = scale_levels(f);
    let mut stream = BitStream::keyed(k2, domain::SCALE_DIAG, n as u64 ^ ((f as u64) << 32));
    let entries = (0..n)
        .map(|_| {
            let magnitude = levels[stream.uniform_index(f)];
            let sign = if stream.bit() { 1.0 } else { -1.0 };
            sign * magnitude
        })
        .collect();
    Ok(ScaleDiag { entries, levels: f })
}

/// Diagonal of Rademacher signs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignDiag {
    entries: Vec<i8>,
}

impl SignDiag {
    pub fn from_entries(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&e| e != 1 && e != -1) {
            return Err(CsError::InvalidParameter(
                "sign diagonal entries must be +1 or -1".into(),
            ));
        }
        Ok(SignDiag { entries })
    }

    pub fn all_plus(n: usize) -> Self {
        SignDiag {
            entries: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }
}

pub fn derive_sign_diag(k3: &Key, n: usize) -> Result<SignDiag> {
    if n < 2 {
        return Err(CsError::InvalidDimension(format!(
            "sign diagonal dimension must be >= 2, got {n}"
        )));
    }
    let mut stream = BitStream::keyed(k3, domain::SIGN_DIAG, n as u64);
    let entries = (0..n)
        .map(|_| if stream.bit() { 1i8 } else { -1i8 })
        .collect();
    Ok(SignDiag { entries })
}

/// M x N block identity: row i holds L adjacent ones starting at column i*L.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockIdentity {
    rows: usize,
    cols: usize,
    block: usize,
}

impl BlockIdentity {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_len(&self) -> usize {
        self.block
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut mat = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            for j in i * self.block..(i + 1) * self.block {
                mat[[i, j]] = 1.0;
            }
        }
        mat
    }

    /// S v: sums each length-L block of v.
    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.cols);
        Array1::from_shape_fn(self.rows, |i| {
            (i * self.block..(i + 1) * self.block).map(|j| v[j]).sum()
        })
    }
}

pub fn build_block_identity(n: usize, l: usize) -> Result<BlockIdentity> {
    if l == 0 || n == 0 || !n.is_multiple_of(l) {
        return Err(CsError::InvalidDimension(format!(
            "block length {l} must divide dimension {n}"
        )));
    }
    Ok(BlockIdentity {
        rows: n / l,
        cols: n,
        block: l,
    })
}

/// Dense M x N sensing matrix A_k = S R Psi, with M = N / L.
#[derive(Clone, Debug)]
pub struct SensingMatrix {
    mat: Array2<f64>,
    dim: usize,
    block_len: usize,
}

impl SensingMatrix {
    /// Assembles S R Psi from explicit parts. Row i of the product is the
    /// sign-weighted sum of basis rows in block i.
    pub fn from_parts(signs: &SignDiag, basis: &UnitaryBasis, l: usize) -> Result<Self> {
        let n = basis.dim();
        if signs.len() != n {
            return Err(CsError::DimensionMismatch(format!(
                "sign diagonal has {} entries, basis dimension is {n}",
                signs.len()
            )));
        }
        let s = build_block_identity(n, l)?;
        let m = s.rows();
        let psi = basis.matrix();
        let mut mat = Array2::zeros((m, n));
        for i in 0..m {
            for j in i * l..(i + 1) * l {
                let r = signs.entries()[j] as f64;
                for c in 0..n {
                    mat[[i, c]] += r * psi[[j, c]];
                }
            }
        }
        Ok(SensingMatrix {
            mat,
            dim: n,
            block_len: l,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.mat
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// y = A_k s
    pub fn project(&self, coeffs: &Array1<f64>) -> Result<Array1<f64>> {
        if coeffs.len() != self.dim {
            return Err(CsError::DimensionMismatch(format!(
                "coefficient vector has {} entries, sensing matrix expects {}",
                coeffs.len(),
                self.dim
            )));
        }
        Ok(self.mat.dot(coeffs))
    }
}

pub fn build_sensing_matrix(k3: &Key, basis: &UnitaryBasis, l: usize) -> Result<SensingMatrix> {
    let signs = derive_sign_diag(k3, basis.dim())?;
    SensingMatrix::from_parts(&signs, basis, l)
}

/// The keyed basis psi_k = Psi P D together with its closed-form inverse
/// D^-1 P^T Psi^T. Both directions are applied staged (transform, permute,
/// scale) rather than through a materialized inverse.
#[derive(Clone, Debug)]
pub struct KeyedBasis {
    basis: Arc<UnitaryBasis>,
    perm: Permutation,
    scale: ScaleDiag,
}

impl KeyedBasis {
    pub fn from_parts(
        basis: Arc<UnitaryBasis>,
        perm: Permutation,
        scale: ScaleDiag,
    ) -> Result<Self> {
        let n = basis.dim();
        if perm.len() != n || scale.len() != n {
            return Err(CsError::DimensionMismatch(format!(
                "keyed basis parts disagree: basis {n}, permutation {}, scale {}",
                perm.len(),
                scale.len()
            )));
        }
        Ok(KeyedBasis { basis, perm, scale })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Arc<UnitaryBasis> {
        &self.basis
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn scale(&self) -> &ScaleDiag {
        &self.scale
    }

    /// s = psi_k^-1 x = D^-1 P^T Psi^T x
    pub fn analyze(&self, signal: &Array1<f64>) -> Result<Array1<f64>> {
        if signal.len() != self.dim() {
            return Err(CsError::DimensionMismatch(format!(
                "signal has {} samples, keyed basis expects {}",
                signal.len(),
                self.dim()
            )));
        }
        let t = self.basis.analyze(signal);
        let map = self.perm.mapping();
        let d = self.scale.entries();
        Ok(Array1::from_shape_fn(self.dim(), |j| t[map[j]] / d[j]))
    }

    /// x = psi_k s = Psi P D s
    pub fn synthesize(&self, coeffs: &Array1<f64>) -> Result<Array1<f64>> {
        if coeffs.len() != self.dim() {
            return Err(CsError::DimensionMismatch(format!(
                "coefficient vector has {} entries, keyed basis expects {}",
                coeffs.len(),
                self.dim()
            )));
        }
        let map = self.perm.mapping();
        let d = self.scale.entries();
        let mut mixed = Array1::zeros(self.dim());
        for j in 0..self.dim() {
            mixed[map[j]] = d[j] * coeffs[j];
        }
        Ok(self.basis.synthesize(&mixed))
    }

    /// Materializes psi_k. Column j is d_j times basis column map[j].
    pub fn dense(&self) -> Array2<f64> {
        let n = self.dim();
        let psi = self.basis.matrix();
        let map = self.perm.mapping();
        let d = self.scale.entries();
        Array2::from_shape_fn((n, n), |(r, j)| d[j] * psi[[r, map[j]]])
    }

    /// Materializes psi_k^-1 = D^-1 P^T Psi^T. Row j is basis column map[j]
    /// transposed, divided by d_j.
    pub fn inverse_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let psi = self.basis.matrix();
        let map = self.perm.mapping();
        let d = self.scale.entries();
        Array2::from_shape_fn((n, n), |(j, c)| psi[[c, map[j]]] / d[j])
    }
}

pub fn build_keyed_basis(
    k1: &Key,
    k2: &Key,
    basis: Arc<UnitaryBasis>,
    f: usize,
) -> Result<KeyedBasis> {
    let n = basis.dim();
    let perm = derive_permutation(k1, n)?;
    let scale = derive_scale_diag(k2, n, f)?;
    KeyedBasis::from_parts(basis, perm, scale)
}

/// Public m x N MAC projection A_MAC = Phi_MAC Psi with i.i.d. standard
/// normal Phi_MAC drawn from a fixed public seed.
#[derive(Clone, Debug)]
pub struct MacMatrix {
    mat: Array2<f64>,
    seed: u64,
}

impl MacMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.mat
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mat.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// y_MAC = A_MAC s
    pub fn project(&self, coeffs: &Array1<f64>) -> Result<Array1<f64>> {
        if coeffs.len() != self.dim() {
            return Err(CsError::DimensionMismatch(format!(
                "coefficient vector has {} entries, MAC matrix expects {}",
                coeffs.len(),
                self.dim()
            )));
        }
        Ok(self.mat.dot(coeffs))
    }
}

/// Builds the MAC projection. `sensing_rows` is M = N/L; the MAC matrix must
/// stay strictly shorter than that so the tag projection cannot act as a
/// second reconstruction channel.
pub fn build_mac_matrix(
    basis: &UnitaryBasis,
    m: usize,
    sensing_rows: usize,
    public_seed: u64,
) -> Result<MacMatrix> {
    let n = basis.dim();
    if m == 0 {
        return Err(CsError::InvalidParameter(
            "MAC row count must be >= 1".into(),
        ));
    }
    if m >= sensing_rows {
        return Err(CsError::InvalidParameter(format!(
            "MAC row count {m} must be strictly less than the sensing row count {sensing_rows}"
        )));
    }
    let mut stream = BitStream::public(public_seed, domain::MAC_MATRIX);
    // Draw row-major so the layout is part of the format.
    let phi = Array2::from_shape_fn((m, n), |_| stream.standard_normal());
    let mat = phi.dot(basis.matrix());
    Ok(MacMatrix {
        mat,
        seed: public_seed,
    })
}

/// Raw Phi_MAC moments are easier to check on the pre-basis matrix; exposed
/// for the generator tests.
pub fn mac_raw_matrix(n: usize, m: usize, public_seed: u64) -> Array2<f64> {
    let mut stream = BitStream::public(public_seed, domain::MAC_MATRIX);
    Array2::from_shape_fn((m, n), |_| stream.standard_normal())
}
