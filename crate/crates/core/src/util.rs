//! Small shared helpers: stable hashing and named seed substreams.

/// 64-bit FNV-1a. Used wherever a hash must stay stable across releases
/// and platforms (request fingerprints, split assignment, seed derivation),
/// which rules out `std::hash::DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hex rendering of a stable hash, used as an identifier in record files.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

/// Derives an independent seed substream from a base seed and a stream name,
/// so one top-level seed drives generation, orchestrator sampling, etc.
/// without the streams interfering.
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + stream.len());
    buf.extend_from_slice(&base.to_le_bytes());
    buf.extend_from_slice(stream.as_bytes());
    fnv1a64(&buf)
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
