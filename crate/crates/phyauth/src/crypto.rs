//! Symmetric primitives: hashing, authenticated encryption, MACs and key
//! splitting.
//!
//! Callers never pick algorithms; the choices live here so they can be
//! swapped in one place. Hashing and key expansion are SHA-256 based, AEAD
//! is AES-128-GCM with per-message random nonces, and tags are truncated
//! HMAC-SHA256. All randomness comes in through caller-supplied generators,
//! so any flow is replayable from a seed.

use crate::bits::BitVector;
use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes128Gcm, KeyInit, Nonce as GcmNonce};
use hmac::{Hmac, Mac};
use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const KEY_BITS: usize = 256;
pub const KEY_HALF_BITS: usize = 128;
pub const NONCE_BITS: usize = 128;
pub const MAC_TAG_BYTES: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("ciphertext failed authentication")]
    DecryptFailed,
    #[error("message tag failed verification")]
    BadTag,
}

/// 256-bit symmetric key.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SymmetricKey(BitVector);

impl SymmetricKey {
    pub fn from_bits(bits: BitVector) -> Self {
        assert_eq!(bits.len(), KEY_BITS, "symmetric keys are 256 bits");
        SymmetricKey(bits)
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    /// Splits into the encryption half (first 128 bits) and the MAC half
    /// (last 128 bits). The halves partition the key exactly.
    pub fn split(&self) -> (KeyHalf, KeyHalf) {
        let (enc, mac) = self.0.split_at(KEY_HALF_BITS);
        (KeyHalf(enc), KeyHalf(mac))
    }
}

/// 128-bit key half; the unit actually fed to the cipher or MAC.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct KeyHalf(BitVector);

impl KeyHalf {
    pub fn from_bits(bits: BitVector) -> Self {
        assert_eq!(bits.len(), KEY_HALF_BITS, "key halves are 128 bits");
        KeyHalf(bits)
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    fn key_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out.copy_from_slice(self.0.as_bytes());
        out
    }
}

/// 128-bit message nonce.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MessageNonce(BitVector);

impl MessageNonce {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        MessageNonce(BitVector::random(rng, NONCE_BITS))
    }

    pub fn from_bits(bits: BitVector) -> Self {
        assert_eq!(bits.len(), NONCE_BITS, "nonces are 128 bits");
        MessageNonce(bits)
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }
}

/// AEAD output: the random nonce plus the GCM ciphertext (tag included).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CipherText {
    pub nonce: [u8; 12],
    pub body: Vec<u8>,
}

impl CipherText {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.body.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < 12 {
            return None;
        }
        let mut nonce = [0u8; 12];
        nonce.copy_from_slice(&bytes[..12]);
        Some(CipherText {
            nonce,
            body: bytes[12..].to_vec(),
        })
    }
}

/// 128-bit MAC tag.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AuthTag(pub [u8; MAC_TAG_BYTES]);

/// SHA-256 of the bit string, framed with its length so sequences of
/// different lengths can never collide. Returns 256 bits.
pub fn hash(data: &BitVector) -> BitVector {
    let mut hasher = Sha256::new();
    hasher.update((data.len() as u64).to_le_bytes());
    hasher.update(data.as_bytes());
    BitVector::from_bytes(&hasher.finalize(), KEY_BITS)
}

/// Counter-mode SHA-256 expansion of `(label, parts)` to `out_bits` bits.
/// Each part is length-framed; distinct inputs give independent streams.
pub fn expand(label: &str, parts: &[&BitVector], out_bits: usize) -> BitVector {
    let mut seed = Sha256::new();
    seed.update((label.len() as u64).to_le_bytes());
    seed.update(label.as_bytes());
    for part in parts {
        seed.update((part.len() as u64).to_le_bytes());
        seed.update(part.as_bytes());
    }
    let seed = seed.finalize();

    let mut bytes = Vec::with_capacity(out_bits.div_ceil(8));
    let mut counter = 0u64;
    while bytes.len() * 8 < out_bits {
        let mut block = Sha256::new();
        block.update(seed);
        block.update(counter.to_le_bytes());
        bytes.extend_from_slice(&block.finalize());
        counter += 1;
    }
    bytes.truncate(out_bits.div_ceil(8));
    BitVector::from_bytes(&bytes, out_bits)
}

/// Encrypts with AES-128-GCM. The nonce is drawn fresh from `rng`, so
/// encrypting the same message twice yields distinct ciphertexts. `context`
/// is bound as associated data and must match at decryption.
pub fn aead_encrypt<R: Rng + ?Sized>(
    key: &KeyHalf,
    plaintext: &[u8],
    context: &[u8],
    rng: &mut R,
) -> CipherText {
    let cipher = Aes128Gcm::new(&key.key_bytes().into());
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let body = cipher
        .encrypt(
            GcmNonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: context,
            },
        )
        .expect("AES-GCM encryption cannot fail");
    CipherText { nonce, body }
}

pub fn aead_decrypt(
    key: &KeyHalf,
    ciphertext: &CipherText,
    context: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes128Gcm::new(&key.key_bytes().into());
    cipher
        .decrypt(
            GcmNonce::from_slice(&ciphertext.nonce),
            Payload {
                msg: &ciphertext.body,
                aad: context,
            },
        )
        .map_err(|_| CryptoError::DecryptFailed)
}

/// HMAC-SHA256 truncated to 128 bits.
pub fn mac_sign(key: &KeyHalf, message: &[u8]) -> AuthTag {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&key.key_bytes()).expect("any key length works");
    mac.update(message);
    let full = mac.finalize().into_bytes();
    let mut tag = [0u8; MAC_TAG_BYTES];
    tag.copy_from_slice(&full[..MAC_TAG_BYTES]);
    AuthTag(tag)
}

pub fn mac_verify(key: &KeyHalf, message: &[u8], tag: &AuthTag) -> bool {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&key.key_bytes()).expect("any key length works");
    mac.update(message);
    mac.verify_truncated_left(&tag.0).is_ok()
}
