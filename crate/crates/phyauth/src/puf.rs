//! Simulated physical unclonable function and the code-offset fuzzy
//! extractor that turns its noisy responses into stable keys.
//!
//! A device's challenge-response map is a keyed hash of a hidden
//! fingerprint, re-measured responses flip each bit independently with a
//! small intra-device probability. Gen masks a response with a codeword and
//! publishes the mask; Rep strips helper data from a later noisy response
//! and corrects the residue back to that codeword, recovering the same key
//! whenever the two measurements are within the code's correction radius.

use crate::bits::BitVector;
use crate::coding::bch::{bch_15_7_2, bch_511_259_30, bch_511_t45, BchCode};
use crate::crypto::{self, SymmetricKey};
use crate::rng::derive_rng;
use rand::Rng;
use thiserror::Error;

/// Challenges are hash-sized.
pub const CHALLENGE_BITS: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PufError {
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("response drifted beyond the correction radius")]
    CorrectionFailure,
}

/// One enrolled challenge and the response measured for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeResponsePair {
    pub challenge: BitVector,
    pub response: BitVector,
}

/// A simulated device with a hidden fingerprint defining its
/// challenge-response map.
#[derive(Debug, Clone)]
pub struct PufDevice {
    id: String,
    fingerprint: BitVector,
    p_intra: f64,
    response_length: usize,
}

impl PufDevice {
    pub fn new(id: &str, fingerprint_seed: u64, p_intra: f64, response_length: usize) -> Self {
        assert!((0.0..0.5).contains(&p_intra), "intra noise out of range");
        assert!(response_length > 0);
        let mut rng = derive_rng(fingerprint_seed, "puf-fingerprint", &[]);
        PufDevice {
            id: id.to_string(),
            fingerprint: BitVector::random(&mut rng, 256),
            p_intra,
            response_length,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn response_length(&self) -> usize {
        self.response_length
    }

    pub fn p_intra(&self) -> f64 {
        self.p_intra
    }

    /// The noise-free response: a keyed hash of (fingerprint, challenge).
    pub fn respond(&self, challenge: &BitVector) -> BitVector {
        assert_eq!(challenge.len(), CHALLENGE_BITS, "challenge must be hash-sized");
        crypto::expand(
            "puf-response",
            &[&self.fingerprint, challenge],
            self.response_length,
        )
    }

    /// A fresh measurement: the clean response with each bit flipped
    /// independently with probability `p_intra`.
    pub fn respond_noisy<R: Rng + ?Sized>(&self, challenge: &BitVector, rng: &mut R) -> BitVector {
        let mut response = self.respond(challenge);
        for i in 0..response.len() {
            if rng.gen_bool(self.p_intra) {
                response.flip(i);
            }
        }
        response
    }

    /// The same device after physical tampering: invasive probing disturbs
    /// the microstructure, so the fingerprint shifts and every response
    /// decorrelates from its enrolled references.
    pub fn perturbed(&self, seed: u64) -> PufDevice {
        let mut rng = derive_rng(seed, "puf-tamper", &[]);
        let mut fingerprint = self.fingerprint.clone();
        for i in 0..fingerprint.len() {
            if rng.gen_bool(0.5) {
                fingerprint.flip(i);
            }
        }
        PufDevice {
            id: self.id.clone(),
            fingerprint,
            p_intra: self.p_intra,
            response_length: self.response_length,
        }
    }
}

/// Helper data and key produced by one Gen run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzyPair {
    pub helper: BitVector,
    pub key: SymmetricKey,
}

/// Code-offset fuzzy extractor over one of the builtin BCH instances.
#[derive(Debug, Clone, Copy)]
pub struct FuzzyExtractor {
    code: &'static BchCode,
}

impl FuzzyExtractor {
    pub fn new(code: &'static BchCode) -> Self {
        FuzzyExtractor { code }
    }

    /// Exhaustively testable scale: n = 15, corrects 2 flips.
    pub fn toy() -> Self {
        Self::new(bch_15_7_2())
    }

    /// The n = 511, t = 30 instance.
    pub fn narrow() -> Self {
        Self::new(bch_511_259_30())
    }

    /// The n = 511, t = 45 instance the protocol deploys. At an intra
    /// device flip rate of 0.05 the expected drift is 25.6 bits and the
    /// probability of exceeding 30 is about 16 percent, which would make
    /// re-authentication flaky; exceeding 45 has probability about 2.6e-5.
    pub fn deployed() -> Self {
        Self::new(bch_511_t45())
    }

    pub fn n(&self) -> usize {
        self.code.n()
    }

    pub fn correction_radius(&self) -> usize {
        self.code.t()
    }

    /// Derives helper data and a key from a response. The masking codeword
    /// is drawn from a stream keyed by the response itself, making Gen a
    /// pure function: re-running it on the same measurement reproduces the
    /// same pair exactly.
    pub fn gen(&self, response: &BitVector) -> Result<FuzzyPair, PufError> {
        if response.len() != self.code.n() {
            return Err(PufError::LengthMismatch {
                expected: self.code.n(),
                got: response.len(),
            });
        }
        let message = crypto::expand("fe-gen-codeword", &[response], self.code.k());
        let codeword = self.code.encode(&message);
        let helper = response.xor(&codeword);
        let key = SymmetricKey::from_bits(crypto::hash(&codeword));
        Ok(FuzzyPair { helper, key })
    }

    /// Recovers the key from a noisy re-measurement and the public helper.
    pub fn rep(&self, noisy_response: &BitVector, helper: &BitVector) -> Result<SymmetricKey, PufError> {
        if noisy_response.len() != self.code.n() || helper.len() != self.code.n() {
            return Err(PufError::LengthMismatch {
                expected: self.code.n(),
                got: noisy_response.len().max(helper.len()),
            });
        }
        let shifted = noisy_response.xor(helper);
        let codeword = self
            .code
            .correct_to_codeword(&shifted)
            .map_err(|_| PufError::CorrectionFailure)?;
        Ok(SymmetricKey::from_bits(crypto::hash(&codeword)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::index::sample;
    use std::collections::HashSet;

    fn challenge(tag: u64) -> BitVector {
        BitVector::random(&mut derive_rng(tag, "test-challenge", &[]), CHALLENGE_BITS)
    }

    #[test]
    fn clean_responses_are_deterministic_and_challenge_sensitive() {
        let device = PufDevice::new("alice", 1, 0.05, 511);
        let ch = challenge(0);
        assert_eq!(device.respond(&ch), device.respond(&ch));
        assert_ne!(device.respond(&ch), device.respond(&challenge(1)));
        assert_eq!(device.respond(&ch).len(), 511);
    }

    #[test]
    fn intra_device_noise_has_binomial_drift() {
        let device = PufDevice::new("alice", 2, 0.05, 511);
        let ch = challenge(2);
        let clean = device.respond(&ch);
        let mut rng = derive_rng(3, "noise", &[]);
        let mut total = 0usize;
        for _ in 0..1000 {
            total += device.respond_noisy(&ch, &mut rng).hamming_distance(&clean);
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - 25.6).abs() < 1.5, "mean drift {mean}");
    }

    #[test]
    fn distinct_devices_are_uncorrelated() {
        let a = PufDevice::new("alice", 4, 0.05, 511);
        let b = PufDevice::new("mallory", 5, 0.05, 511);
        let mut total = 0usize;
        for tag in 0..1000 {
            let ch = challenge(100 + tag);
            total += a.respond(&ch).hamming_distance(&b.respond(&ch));
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - 255.5).abs() < 5.0, "mean inter-device distance {mean}");
    }

    #[test]
    fn gen_rep_round_trip_and_construction_identity() {
        for fe in [FuzzyExtractor::toy(), FuzzyExtractor::narrow(), FuzzyExtractor::deployed()] {
            let device = PufDevice::new("alice", 6, 0.05, fe.n());
            let response = device.respond(&challenge(6));
            let pair = fe.gen(&response).unwrap();
            assert_eq!(fe.rep(&response, &pair.helper).unwrap(), pair.key);
            // helper xor response is the masking codeword.
            let cw = pair.helper.xor(&response);
            assert_eq!(crypto::hash(&cw), *pair.key.bits());

            assert!(fe.gen(&BitVector::zeros(fe.n() + 1)).is_err());
        }
    }

    #[test]
    fn gen_is_a_pure_function_of_the_response() {
        let fe = FuzzyExtractor::deployed();
        let response = BitVector::random(&mut derive_rng(7, "resp", &[]), fe.n());
        assert_eq!(fe.gen(&response).unwrap(), fe.gen(&response).unwrap());
    }

    #[test]
    fn recovery_within_radius_and_failure_far_beyond() {
        let mut rng = derive_rng(8, "radius", &[]);
        for fe in [FuzzyExtractor::narrow(), FuzzyExtractor::deployed()] {
            let t = fe.correction_radius();
            let mut recovered = 0;
            for _ in 0..200 {
                let response = BitVector::random(&mut rng, fe.n());
                let pair = fe.gen(&response).unwrap();
                let mut noisy = response.clone();
                let weight = rng.gen_range(1..=t);
                for i in sample(&mut rng, fe.n(), weight).iter() {
                    noisy.flip(i);
                }
                recovered += (fe.rep(&noisy, &pair.helper).unwrap() == pair.key) as usize;
            }
            assert_eq!(recovered, 200, "within-radius recovery must be total");

            let mut beyond_ok = 0;
            for _ in 0..1000 {
                let response = BitVector::random(&mut rng, fe.n());
                let pair = fe.gen(&response).unwrap();
                let mut noisy = response.clone();
                for i in sample(&mut rng, fe.n(), t + 10).iter() {
                    noisy.flip(i);
                }
                if fe.rep(&noisy, &pair.helper).map(|k| k == pair.key).unwrap_or(false) {
                    beyond_ok += 1;
                }
            }
            assert!(
                (beyond_ok as f64) < 0.05 * 1000.0,
                "recovered {beyond_ok}/1000 at radius + 10"
            );
        }
    }

    #[test]
    fn toy_radius_is_exactly_characterized() {
        let fe = FuzzyExtractor::toy();
        let response = BitVector::random(&mut derive_rng(9, "toy", &[]), 15);
        let pair = fe.gen(&response).unwrap();

        // All 2^7 codewords, for the weight-3 sphere oracle.
        let code = bch_15_7_2();
        let mut codewords = Vec::new();
        for msg in 0u64..128 {
            let mut m = BitVector::zeros(7);
            for b in 0..7 {
                m.set(b, (msg >> b) & 1 == 1);
            }
            codewords.push(code.encode(&m));
        }

        // Every pattern of weight <= 2 recovers the key.
        let mut patterns: Vec<Vec<usize>> = vec![vec![]];
        for i in 0..15 {
            patterns.push(vec![i]);
            for j in i + 1..15 {
                patterns.push(vec![i, j]);
            }
        }
        for pat in &patterns {
            let mut noisy = response.clone();
            for &i in pat {
                noisy.flip(i);
            }
            assert_eq!(fe.rep(&noisy, &pair.helper).unwrap(), pair.key, "{pat:?}");
        }

        // Weight-3 patterns recover some key only when they land inside
        // another codeword's sphere, and then never the enrolled key.
        let mut in_sphere = 0;
        for a in 0..15 {
            for b in a + 1..15 {
                for c in b + 1..15 {
                    let mut err = BitVector::zeros(15);
                    for i in [a, b, c] {
                        err.flip(i);
                    }
                    let nearest = codewords
                        .iter()
                        .map(|cw| cw.hamming_distance(&err))
                        .min()
                        .unwrap();
                    let mut noisy = response.clone();
                    for i in [a, b, c] {
                        noisy.flip(i);
                    }
                    match fe.rep(&noisy, &pair.helper) {
                        Ok(key) => {
                            assert!(nearest <= 2, "accepted outside every sphere");
                            assert_ne!(key, pair.key, "weight 3 cannot return the enrolled key");
                            in_sphere += 1;
                        }
                        Err(PufError::CorrectionFailure) => assert!(nearest > 2),
                        Err(e) => panic!("unexpected error {e}"),
                    }
                }
            }
        }
        assert!(in_sphere > 0, "some weight-3 patterns must land in spheres");
    }

    #[test]
    fn helper_data_is_balanced_and_uncorrelated_with_the_key() {
        let fe = FuzzyExtractor::deployed();
        let n = fe.n();
        let trials = 10_000;
        let mut rng = derive_rng(10, "balance", &[]);
        let mut helper_ones = vec![0usize; n];
        let mut agree = [[0usize; 4]; 4];
        for _ in 0..trials {
            let response = BitVector::random(&mut rng, n);
            let pair = fe.gen(&response).unwrap();
            for (i, count) in helper_ones.iter_mut().enumerate() {
                *count += pair.helper.get(i) as usize;
            }
            for hi in 0..4 {
                for ki in 0..4 {
                    agree[hi][ki] +=
                        (pair.helper.get(hi * 100) == pair.key.bits().get(ki * 50)) as usize;
                }
            }
        }
        for (i, &count) in helper_ones.iter().enumerate() {
            let freq = count as f64 / trials as f64;
            assert!((freq - 0.5).abs() < 0.02, "helper bit {i} frequency {freq}");
        }
        for row in &agree {
            for &count in row {
                let freq = count as f64 / trials as f64;
                assert!((freq - 0.5).abs() < 0.025, "helper-key agreement {freq}");
            }
        }
    }

    #[test]
    fn keys_from_distinct_challenges_never_collide() {
        let fe = FuzzyExtractor::deployed();
        let device = PufDevice::new("alice", 11, 0.05, fe.n());
        let mut seen = HashSet::new();
        for tag in 0..10_000u64 {
            let pair = fe.gen(&device.respond(&challenge(10_000 + tag))).unwrap();
            assert!(seen.insert(pair.key.bits().to_hex()), "collision at {tag}");
        }
    }
}
