//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use csguard_core::keys::BitStream;
use csguard_core::{Encoder, EncoderConfig, SecretKeys, UnitaryBasis};

pub fn bench_basis(n: usize) -> Arc<UnitaryBasis> {
    UnitaryBasis::dct(n).expect("basis")
}

pub fn bench_keys(seed: u64) -> SecretKeys {
    let mut stream = BitStream::public(seed, b"bench");
    SecretKeys::from_stream(&mut stream)
}

pub fn bench_encoder(n: usize, l: usize, m: usize) -> Encoder {
    Encoder::new(
        &bench_keys(1),
        EncoderConfig {
            dim: n,
            block_len: l,
            mac_rows: m,
            scale_levels: 16,
        },
        bench_basis(n),
    )
    .expect("encoder")
}
