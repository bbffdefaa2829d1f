//! Syndrome-based Slepian-Wolf reconciliation codes.
//!
//! One side observes `y_a`, the other a noisy copy `y_b` (independent bit
//! flips with probability `p`). The first side publishes the syndrome of
//! `y_a`; the second runs a decoder against that syndrome to recover `y_a`
//! exactly or report failure. Three families are implemented:
//!
//! * [`ldpc`]: regular sparse parity checks, belief propagation with
//!   ordered-statistics reprocessing on soft outputs.
//! * [`polar`]: CRC-aided successive cancellation list decoding where the
//!   published bits act as known (frozen) values.
//! * [`bch`]: algebraic bounded-distance decoding, optionally wrapped in a
//!   bit-flip list.
//!
//! Code instances are also exposed as versioned fixture files so experiment
//! results stay reproducible; see [`fixture`].

pub mod bch;
pub mod fixture;
pub mod ldpc;
pub mod polar;

use crate::bits::BitVector;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("decoder found no syndrome-consistent candidate")]
    DecodeFailure,
    #[error("input length {got} does not match code length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("syndrome length {got} does not match code ({expected})")]
    SyndromeMismatch { expected: usize, got: usize },
    #[error("invalid decoder parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CodeFamily {
    Ldpc,
    Polar,
    Bch,
}

impl CodeFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodeFamily::Ldpc => "ldpc",
            CodeFamily::Polar => "polar",
            CodeFamily::Bch => "bch",
        }
    }
}

/// Decoder configuration, one variant per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderParams {
    /// Successive cancellation list with `list_size` paths.
    PolarList { list_size: usize },
    /// Belief propagation for up to `max_iter` iterations; on failure,
    /// ordered-statistics reprocessing of the given order (`None` = plain
    /// belief propagation only).
    LdpcBp { max_iter: usize, osd_order: Option<u8> },
    /// Bounded-distance decoding after flipping up to `flip_order` bits.
    BchList { flip_order: u8 },
}

impl DecoderParams {
    /// Short label used in CSV output ("L8", "bp", "osd1", "t0", ...).
    pub fn label(&self) -> String {
        match self {
            DecoderParams::PolarList { list_size } => format!("L{list_size}"),
            DecoderParams::LdpcBp { osd_order: None, .. } => "bp".to_string(),
            DecoderParams::LdpcBp {
                osd_order: Some(t), ..
            } => format!("osd{t}"),
            DecoderParams::BchList { flip_order } => format!("t{flip_order}"),
        }
    }

    /// Parses a label produced by [`Self::label`]. Belief propagation
    /// variants get `max_iter` iterations.
    pub fn from_label(label: &str, max_iter: usize) -> Option<Self> {
        if label == "bp" {
            return Some(DecoderParams::LdpcBp {
                max_iter,
                osd_order: None,
            });
        }
        if let Some(rest) = label.strip_prefix('L') {
            return rest.parse().ok().map(|list_size| DecoderParams::PolarList { list_size });
        }
        if let Some(rest) = label.strip_prefix("osd") {
            return rest.parse().ok().map(|t| DecoderParams::LdpcBp {
                max_iter,
                osd_order: Some(t),
            });
        }
        if let Some(rest) = label.strip_prefix('t') {
            // The bounded-distance list decoder flips at most one bit per
            // attempt; higher orders are not implemented.
            return rest
                .parse()
                .ok()
                .filter(|&flip_order| flip_order <= 1)
                .map(|flip_order| DecoderParams::BchList { flip_order });
        }
        None
    }

    /// The family this parameter set drives.
    pub fn family(&self) -> CodeFamily {
        match self {
            DecoderParams::PolarList { .. } => CodeFamily::Polar,
            DecoderParams::LdpcBp { .. } => CodeFamily::Ldpc,
            DecoderParams::BchList { .. } => CodeFamily::Bch,
        }
    }
}

/// Outcome of a syndrome decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub estimate: BitVector,
    /// Whether the decoder's own verification passed (CRC selection for
    /// polar, syndrome consistency elsewhere). Unverified estimates must
    /// not be trusted by callers.
    pub verified: bool,
}

/// A code instance usable for syndrome reconciliation.
#[derive(Clone)]
pub enum SlepianWolfCode {
    Ldpc(ldpc::LdpcCode),
    Polar(polar::PolarCode),
    Bch(bch::BchCode),
}

impl std::fmt::Debug for SlepianWolfCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SlepianWolfCode")
            .field("family", &self.family())
            .field("n", &self.n())
            .field("syndrome_len", &self.syndrome_len())
            .finish_non_exhaustive()
    }
}

impl SlepianWolfCode {
    pub fn family(&self) -> CodeFamily {
        match self {
            SlepianWolfCode::Ldpc(_) => CodeFamily::Ldpc,
            SlepianWolfCode::Polar(_) => CodeFamily::Polar,
            SlepianWolfCode::Bch(_) => CodeFamily::Bch,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SlepianWolfCode::Ldpc(c) => c.n(),
            SlepianWolfCode::Polar(c) => c.n(),
            SlepianWolfCode::Bch(c) => c.n(),
        }
    }

    /// Number of published syndrome bits (always `n - k`).
    pub fn syndrome_len(&self) -> usize {
        match self {
            SlepianWolfCode::Ldpc(c) => c.syndrome_len(),
            SlepianWolfCode::Polar(c) => c.syndrome_len(),
            SlepianWolfCode::Bch(c) => c.syndrome_len(),
        }
    }

    /// Effective compression rate: fraction of positions not published.
    /// For the polar family this counts the CRC as part of the payload,
    /// `(k + l) / n`; elsewhere it is `k / n`.
    pub fn effective_rate(&self) -> f64 {
        match self {
            SlepianWolfCode::Ldpc(c) => c.k() as f64 / c.n() as f64,
            SlepianWolfCode::Polar(c) => c.effective_rate(),
            SlepianWolfCode::Bch(c) => c.k() as f64 / c.n() as f64,
        }
    }

    pub fn syndrome(&self, y: &BitVector) -> BitVector {
        match self {
            SlepianWolfCode::Ldpc(c) => c.syndrome(y),
            SlepianWolfCode::Polar(c) => c.syndrome(y),
            SlepianWolfCode::Bch(c) => c.syndrome(y),
        }
    }

    /// Recovers the sequence that produced `syndrome` from the correlated
    /// observation `y_b` over a flip channel with crossover `p`.
    pub fn decode(
        &self,
        y_b: &BitVector,
        syndrome: &BitVector,
        p: f64,
        params: &DecoderParams,
    ) -> Result<DecodeResult, CodingError> {
        match (self, params) {
            (SlepianWolfCode::Ldpc(c), DecoderParams::LdpcBp { max_iter, osd_order }) => {
                c.decode(y_b, syndrome, p, *max_iter, *osd_order)
            }
            (SlepianWolfCode::Polar(c), DecoderParams::PolarList { list_size }) => {
                c.decode(y_b, syndrome, p, *list_size)
            }
            (SlepianWolfCode::Bch(c), DecoderParams::BchList { flip_order }) => {
                c.decode(y_b, syndrome, *flip_order)
            }
            _ => Err(CodingError::BadParams(format!(
                "decoder params {params:?} do not match code family {}",
                self.family().as_str()
            ))),
        }
    }

    /// Bits-per-symbol side information rate, `syndrome_len / n`.
    pub fn syndrome_rate(&self) -> f64 {
        self.syndrome_len() as f64 / self.n() as f64
    }
}

/// Per-bit log-likelihood ratios for the flip channel: positive favors 0.
/// `llr[i] = (1 - 2 y_b[i]) * ln((1-p)/p)`, saturated to +-`LLR_CLAMP`.
pub fn channel_llrs(y_b: &BitVector, p: f64) -> Vec<f64> {
    let mag = ((1.0 - p) / p).ln().clamp(-LLR_CLAMP, LLR_CLAMP);
    y_b.iter()
        .map(|b| if b { -mag } else { mag })
        .collect()
}

/// Saturation bound for log-likelihood ratios.
pub const LLR_CLAMP: f64 = 30.0;
