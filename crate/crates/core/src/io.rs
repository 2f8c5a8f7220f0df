//! Deterministic text output helpers.

use sha2::{Digest, Sha256};

/// Shortest decimal that round-trips to the same `f64`.
pub fn format_f64(v: f64, buf: &mut ryu::Buffer) -> &str {
    buf.format(v)
}

pub fn fmt_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_string()
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First 8 bytes of SHA-256 as a little-endian integer.
pub fn sha256_u64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

/// Child seed `hash(master, parts...)`; used wherever independent streams
/// are derived from one master seed.
pub fn derive_seed(master: u64, parts: &[u64], role: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 * (parts.len() + 1) + role.len());
    bytes.extend_from_slice(&master.to_le_bytes());
    for p in parts {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    bytes.extend_from_slice(role.as_bytes());
    sha256_u64(&bytes)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}
