//! Wire format for protocol messages.
//!
//! A message is a one-byte type tag followed by its fields in figure
//! order, each length-prefixed: bit strings carry a little-endian u32 bit
//! count and then the packed bytes; byte strings (ciphertexts, tags) carry
//! a little-endian u32 byte count. Parsing is strict: wrong field counts,
//! inconsistent lengths, or trailing bytes all fail.

use crate::bits::BitVector;
use crate::crypto::{AuthTag, CipherText, MAC_TAG_BYTES};

/// Associated data binding each ciphertext to its place in the flow.
pub const CONTEXT_SERVER_CHALLENGE: &[u8] = b"phyauth v1 server challenge";
pub const CONTEXT_NODE_PROOF: &[u8] = b"phyauth v1 node proof";
pub const CONTEXT_SESSION_CONFIRM: &[u8] = b"phyauth v1 session confirm";
pub const CONTEXT_RESUME_EARLY: &[u8] = b"phyauth v1 resume early data";
pub const CONTEXT_RESUME_CONFIRM: &[u8] = b"phyauth v1 resume confirm";

/// The six on-wire messages, fields ordered as in the protocol figures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolMessage {
    /// `(A_ID || N_1)` - opens mutual authentication.
    AuthRequest { alias: BitVector, nonce: BitVector },
    /// `(C_B || T_B)` - server's encrypted challenge delivery.
    ServerChallenge { ciphertext: CipherText, tag: AuthTag },
    /// `(C_A || T_A || H_R)` - node's proof with fresh helper data.
    NodeProof {
        ciphertext: CipherText,
        tag: AuthTag,
        helper: BitVector,
    },
    /// Key confirmation carrying the look-up identifier.
    SessionConfirm { ciphertext: CipherText, tag: AuthTag },
    /// `(S* || A_ID || N_1 || C || T)` - 0-RTT resumption flight.
    ResumeRequest {
        syndrome: BitVector,
        alias: BitVector,
        nonce: BitVector,
        ciphertext: CipherText,
        tag: AuthTag,
    },
    /// Fresh look-up identifier under the resumed key.
    ResumeConfirm { ciphertext: CipherText, tag: AuthTag },
}

const TAG_AUTH_REQUEST: u8 = 1;
const TAG_SERVER_CHALLENGE: u8 = 2;
const TAG_NODE_PROOF: u8 = 3;
const TAG_SESSION_CONFIRM: u8 = 4;
const TAG_RESUME_REQUEST: u8 = 5;
const TAG_RESUME_CONFIRM: u8 = 6;

impl ProtocolMessage {
    pub fn phase(&self) -> &'static str {
        match self {
            ProtocolMessage::AuthRequest { .. } => "auth-request",
            ProtocolMessage::ServerChallenge { .. } => "server-challenge",
            ProtocolMessage::NodeProof { .. } => "node-proof",
            ProtocolMessage::SessionConfirm { .. } => "session-confirm",
            ProtocolMessage::ResumeRequest { .. } => "resume-request",
            ProtocolMessage::ResumeConfirm { .. } => "resume-confirm",
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            ProtocolMessage::AuthRequest { alias, nonce } => {
                out.push(TAG_AUTH_REQUEST);
                put_bits(&mut out, alias);
                put_bits(&mut out, nonce);
            }
            ProtocolMessage::ServerChallenge { ciphertext, tag } => {
                out.push(TAG_SERVER_CHALLENGE);
                put_bytes(&mut out, &ciphertext.to_bytes());
                put_bytes(&mut out, &tag.0);
            }
            ProtocolMessage::NodeProof {
                ciphertext,
                tag,
                helper,
            } => {
                out.push(TAG_NODE_PROOF);
                put_bytes(&mut out, &ciphertext.to_bytes());
                put_bytes(&mut out, &tag.0);
                put_bits(&mut out, helper);
            }
            ProtocolMessage::SessionConfirm { ciphertext, tag } => {
                out.push(TAG_SESSION_CONFIRM);
                put_bytes(&mut out, &ciphertext.to_bytes());
                put_bytes(&mut out, &tag.0);
            }
            ProtocolMessage::ResumeRequest {
                syndrome,
                alias,
                nonce,
                ciphertext,
                tag,
            } => {
                out.push(TAG_RESUME_REQUEST);
                put_bits(&mut out, syndrome);
                put_bits(&mut out, alias);
                put_bits(&mut out, nonce);
                put_bytes(&mut out, &ciphertext.to_bytes());
                put_bytes(&mut out, &tag.0);
            }
            ProtocolMessage::ResumeConfirm { ciphertext, tag } => {
                out.push(TAG_RESUME_CONFIRM);
                put_bytes(&mut out, &ciphertext.to_bytes());
                put_bytes(&mut out, &tag.0);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let (&tag_byte, rest) = bytes.split_first()?;
        let mut reader = Reader(rest);
        let message = match tag_byte {
            TAG_AUTH_REQUEST => ProtocolMessage::AuthRequest {
                alias: reader.bits()?,
                nonce: reader.bits()?,
            },
            TAG_SERVER_CHALLENGE => ProtocolMessage::ServerChallenge {
                ciphertext: reader.ciphertext()?,
                tag: reader.tag()?,
            },
            TAG_NODE_PROOF => ProtocolMessage::NodeProof {
                ciphertext: reader.ciphertext()?,
                tag: reader.tag()?,
                helper: reader.bits()?,
            },
            TAG_SESSION_CONFIRM => ProtocolMessage::SessionConfirm {
                ciphertext: reader.ciphertext()?,
                tag: reader.tag()?,
            },
            TAG_RESUME_REQUEST => ProtocolMessage::ResumeRequest {
                syndrome: reader.bits()?,
                alias: reader.bits()?,
                nonce: reader.bits()?,
                ciphertext: reader.ciphertext()?,
                tag: reader.tag()?,
            },
            TAG_RESUME_CONFIRM => ProtocolMessage::ResumeConfirm {
                ciphertext: reader.ciphertext()?,
                tag: reader.tag()?,
            },
            _ => return None,
        };
        reader.finished().then_some(message)
    }
}

fn put_bits(out: &mut Vec<u8>, bits: &BitVector) {
    out.extend_from_slice(&(bits.len() as u32).to_le_bytes());
    out.extend_from_slice(bits.as_bytes());
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn length(&mut self) -> Option<usize> {
        let (head, rest) = self.0.split_first_chunk::<4>()?;
        self.0 = rest;
        Some(u32::from_le_bytes(*head) as usize)
    }

    fn take(&mut self, count: usize) -> Option<&[u8]> {
        if self.0.len() < count {
            return None;
        }
        let (head, rest) = self.0.split_at(count);
        self.0 = rest;
        Some(head)
    }

    fn bits(&mut self) -> Option<BitVector> {
        let bit_len = self.length()?;
        let payload = self.take(bit_len.div_ceil(8))?;
        let bits = BitVector::from_bytes(payload, bit_len);
        // Padding bits in the last byte must be zero, otherwise two
        // different byte strings would decode to the same message.
        (bits.as_bytes() == payload).then_some(bits)
    }

    fn ciphertext(&mut self) -> Option<CipherText> {
        let len = self.length()?;
        CipherText::from_bytes(self.take(len)?)
    }

    fn tag(&mut self) -> Option<AuthTag> {
        let len = self.length()?;
        if len != MAC_TAG_BYTES {
            return None;
        }
        let mut tag = [0u8; MAC_TAG_BYTES];
        tag.copy_from_slice(self.take(len)?);
        Some(AuthTag(tag))
    }

    fn finished(&self) -> bool {
        self.0.is_empty()
    }
}

/// Packs a tuple of bit strings into AEAD plaintext bytes.
pub fn pack_fields(parts: &[&BitVector]) -> Vec<u8> {
    BitVector::concat(parts).as_bytes().to_vec()
}

/// Splits AEAD plaintext back into fields of the given bit lengths.
pub fn unpack_fields(bytes: &[u8], lens: &[usize]) -> Option<Vec<BitVector>> {
    let total: usize = lens.iter().sum();
    if bytes.len() != total.div_ceil(8) {
        return None;
    }
    let joined = BitVector::from_bytes(bytes, total);
    if joined.as_bytes() != bytes {
        return None;
    }
    let mut fields = Vec::with_capacity(lens.len());
    let mut start = 0;
    for &len in lens {
        fields.push(joined.slice(start, start + len));
        start += len;
    }
    Some(fields)
}
