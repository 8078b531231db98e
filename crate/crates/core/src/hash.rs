use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Short 12-character identifier, in the spirit of an abbreviated commit hash.
pub fn short_hash(bytes: &[u8]) -> String {
    hex_digest(bytes)[..12].to_string()
}

pub fn digest_u64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}
