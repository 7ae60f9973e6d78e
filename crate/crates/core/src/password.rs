//! Salted password verifiers stored in `users.password`.
//!
//! Format: `sha256$<salt hex>$<digest hex>` where the digest is
//! SHA-256(salt || password).

use rand::RngCore;
use sha2::{Digest, Sha256};

const SCHEME: &str = "sha256";
pub const MIN_LENGTH: usize = 8;

pub fn hash(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    hash_with_salt(password, &salt)
}

pub fn hash_with_salt(password: &str, salt: &[u8]) -> String {
    format!("{SCHEME}${}${}", hex::encode(salt), hex::encode(digest(salt, password)))
}

/// Deterministic salt for rows written by schema initialization.
pub(crate) fn seed_salt(user_code: &str) -> [u8; 16] {
    let d = Sha256::digest(format!("uuis-seed:{user_code}").as_bytes());
    let mut salt = [0u8; 16];
    salt.copy_from_slice(&d[..16]);
    salt
}

pub fn verify(password: &str, stored: &str) -> bool {
    let mut parts = stored.splitn(3, '$');
    let (Some(SCHEME), Some(salt), Some(expected)) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    let (Ok(salt), Ok(expected)) = (hex::decode(salt), hex::decode(expected)) else {
        return false;
    };
    let actual = digest(&salt, password);
    // constant-time compare
    actual.len() == expected.len() && actual.iter().zip(&expected).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

/// Returns a human-readable reason when the password is rejected.
pub fn policy_violation(password: &str) -> Option<String> {
    (password.chars().count() < MIN_LENGTH)
        .then(|| format!("must be at least {MIN_LENGTH} characters"))
}

/// Random password handed out for imported users without one.
pub fn generate() -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz23456789";
    let mut rng = rand::rng();
    (0..12)
        .map(|_| ALPHABET[(rng.next_u32() as usize) % ALPHABET.len()] as char)
        .collect()
}

fn digest(salt: &[u8], password: &str) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    h.finalize().to_vec()
}
