//! Binary BCH codes over GF(2^w) with bounded-distance and flip-list
//! syndrome decoding.
//!
//! The published syndrome of a word `y` is its remainder modulo the
//! generator polynomial, `n - k` bits. Decoding turns the remainder
//! difference into spectral syndromes, runs Berlekamp-Massey for the error
//! locator, and locates roots by Chien search. The list decoder additionally
//! flips up to `flip_order` bits of the observation before each attempt and
//! keeps the candidate closest to the observation (ties: lexicographically
//! smallest estimate).

use super::{CodingError, DecodeResult};
use crate::bits::BitVector;
use std::sync::OnceLock;

/// x^9 + x^4 + 1, primitive over GF(2).
pub const PRIMITIVE_POLY_W9: u32 = 0x211;
/// x^4 + x + 1, primitive over GF(2).
pub const PRIMITIVE_POLY_W4: u32 = 0x13;

/// Log/antilog tables for GF(2^w) generated by `alpha`, a root of the
/// primitive polynomial.
#[derive(Clone)]
struct GfTables {
    order: usize, // multiplicative order, 2^w - 1
    log: Vec<u16>,
    exp: Vec<u16>, // doubled so products avoid a modulo
}

impl GfTables {
    fn new(w: u32, prim_poly: u32) -> Self {
        let order = (1usize << w) - 1;
        let mut log = vec![0u16; order + 1];
        let mut exp = vec![0u16; 2 * order];
        let mut x = 1u32;
        for i in 0..order {
            exp[i] = x as u16;
            exp[i + order] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << w) != 0 {
                x ^= prim_poly;
            }
        }
        debug_assert_eq!(x, 1, "polynomial is not primitive");
        GfTables { order, log, exp }
    }

    #[inline]
    fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    fn inv(&self, a: u16) -> u16 {
        debug_assert_ne!(a, 0);
        self.exp[self.order - self.log[a as usize] as usize]
    }

    #[inline]
    fn alpha_pow(&self, e: usize) -> u16 {
        self.exp[e % self.order]
    }
}

/// A binary BCH code of length `n = 2^w - 1` correcting `t` errors.
#[derive(Clone)]
pub struct BchCode {
    w: u32,
    n: usize,
    k: usize,
    t: usize,
    generator: BitVector, // coefficient i = x^i, degree n - k
    field: GfTables,
}

impl std::fmt::Debug for BchCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BchCode")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("t", &self.t)
            .finish()
    }
}

impl BchCode {
    pub fn new(w: u32, prim_poly: u32, t: usize) -> Self {
        let field = GfTables::new(w, prim_poly);
        let n = field.order;
        assert!(2 * t < n, "designed distance exceeds code length");

        // Union of cyclotomic cosets of 1..=2t gives the generator's roots.
        let mut covered = vec![false; n];
        let mut generator = poly_one();
        for i in 1..=2 * t {
            if covered[i] {
                continue;
            }
            let mut coset = Vec::new();
            let mut e = i;
            loop {
                covered[e] = true;
                coset.push(e);
                e = (e * 2) % n;
                if e == i {
                    break;
                }
            }
            let minimal = minimal_poly(&field, &coset);
            generator = poly_mul(&field, &generator, &minimal);
        }

        let degree = generator.len() - 1;
        let mut gen_bits = BitVector::zeros(degree + 1);
        for (i, &c) in generator.iter().enumerate() {
            assert!(c <= 1, "generator polynomial must be binary");
            if c == 1 {
                gen_bits.set(i, true);
            }
        }
        BchCode {
            w,
            n,
            k: n - degree,
            t,
            generator: gen_bits,
            field,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn field_width(&self) -> u32 {
        self.w
    }

    pub fn syndrome_len(&self) -> usize {
        self.n - self.k
    }

    pub fn generator_bits(&self) -> &BitVector {
        &self.generator
    }

    /// Systematic encode: message bits occupy degrees `n-k ..= n-1`, parity
    /// (the remainder) fills the low degrees.
    pub fn encode(&self, message: &BitVector) -> BitVector {
        assert_eq!(message.len(), self.k, "message length mismatch");
        let parity_len = self.n - self.k;
        let mut shifted = BitVector::zeros(self.n);
        for i in 0..self.k {
            if message.get(i) {
                shifted.set(parity_len + i, true);
            }
        }
        let rem = self.remainder(&shifted);
        let mut codeword = shifted;
        for i in 0..parity_len {
            if rem.get(i) {
                codeword.set(i, true);
            }
        }
        codeword
    }

    pub fn is_codeword(&self, word: &BitVector) -> bool {
        self.remainder(word).count_ones() == 0
    }

    /// `y(x) mod g(x)`, the published syndrome form (`n - k` bits).
    pub fn syndrome(&self, y: &BitVector) -> BitVector {
        self.remainder(y)
    }

    fn remainder(&self, y: &BitVector) -> BitVector {
        assert_eq!(y.len(), self.n, "word length mismatch");
        let deg_g = self.n - self.k;
        let mut work = y.clone();
        for i in (deg_g..self.n).rev() {
            if work.get(i) {
                let shift = i - deg_g;
                for j in 0..=deg_g {
                    if self.generator.get(j) {
                        work.flip(shift + j);
                    }
                }
            }
        }
        work.truncate(deg_g)
    }

    /// Evaluates a polynomial given by bit coefficients at `alpha^e` for
    /// `e = 1..=2t`.
    fn spectral(&self, poly: &BitVector) -> Vec<u16> {
        let mut spec = vec![0u16; 2 * self.t];
        for i in 0..poly.len() {
            if poly.get(i) {
                for (j, s) in spec.iter_mut().enumerate() {
                    *s ^= self.field.alpha_pow((j + 1) * i);
                }
            }
        }
        spec
    }

    /// Berlekamp-Massey followed by Chien search. Returns error positions,
    /// or a failure when the pattern is outside the decoding radius.
    fn locate_errors(&self, spectral: &[u16]) -> Result<Vec<usize>, CodingError> {
        if spectral.iter().all(|&s| s == 0) {
            return Ok(Vec::new());
        }
        let gf = &self.field;

        // Berlekamp-Massey over GF(2^w).
        let mut lambda = vec![0u16; 2 * self.t + 1];
        let mut prev = vec![0u16; 2 * self.t + 1];
        lambda[0] = 1;
        prev[0] = 1;
        let mut len = 0usize; // current LFSR length
        let mut gap = 1usize; // iterations since last length change
        let mut prev_disc = 1u16;
        for r in 0..2 * self.t {
            let mut disc = spectral[r];
            for i in 1..=len {
                if lambda[i] != 0 && r >= i {
                    disc ^= gf.mul(lambda[i], spectral[r - i]);
                }
            }
            if disc == 0 {
                gap += 1;
            } else {
                let scale = gf.mul(disc, gf.inv(prev_disc));
                if 2 * len <= r {
                    let snapshot = lambda.clone();
                    for i in 0..=2 * self.t - gap {
                        if prev[i] != 0 {
                            lambda[i + gap] ^= gf.mul(scale, prev[i]);
                        }
                    }
                    prev = snapshot;
                    prev_disc = disc;
                    len = r + 1 - len;
                    gap = 1;
                } else {
                    for i in 0..=2 * self.t - gap {
                        if prev[i] != 0 {
                            lambda[i + gap] ^= gf.mul(scale, prev[i]);
                        }
                    }
                    gap += 1;
                }
            }
        }

        let degree = (0..lambda.len()).rev().find(|&i| lambda[i] != 0).unwrap();
        if degree != len || degree > self.t {
            return Err(CodingError::DecodeFailure);
        }

        // Chien search: position i is in error when alpha^{-i} is a root.
        let mut positions = Vec::with_capacity(degree);
        for j in 0..self.n {
            let mut acc = 0u16;
            for (i, &c) in lambda.iter().enumerate().take(degree + 1) {
                if c != 0 {
                    acc ^= gf.mul(c, gf.alpha_pow(i * j));
                }
            }
            if acc == 0 {
                positions.push((self.n - j) % self.n);
                if positions.len() == degree {
                    break;
                }
            }
        }
        if positions.len() != degree {
            return Err(CodingError::DecodeFailure);
        }
        // Guard against miscorrection: the located pattern must reproduce
        // every spectral syndrome, which is equivalent to coset membership.
        for (j, &s) in spectral.iter().enumerate() {
            let mut acc = 0u16;
            for &p in &positions {
                acc ^= gf.alpha_pow((j + 1) * p);
            }
            if acc != s {
                return Err(CodingError::DecodeFailure);
            }
        }
        positions.sort_unstable();
        Ok(positions)
    }

    /// Bounded-distance recovery of the word behind `syndrome` from the
    /// correlated observation, flipping up to `flip_order` bits first.
    pub fn decode(
        &self,
        y_b: &BitVector,
        syndrome: &BitVector,
        flip_order: u8,
    ) -> Result<DecodeResult, CodingError> {
        if y_b.len() != self.n {
            return Err(CodingError::LengthMismatch {
                expected: self.n,
                got: y_b.len(),
            });
        }
        if syndrome.len() != self.syndrome_len() {
            return Err(CodingError::SyndromeMismatch {
                expected: self.syndrome_len(),
                got: syndrome.len(),
            });
        }
        if flip_order > 1 {
            return Err(CodingError::BadParams(format!(
                "flip order {flip_order} not supported (0 or 1)"
            )));
        }

        let base_diff = self.remainder(y_b).xor(syndrome);
        let base_spec = self.spectral(&base_diff);

        let mut best: Option<(usize, BitVector)> = None;
        let mut consider = |estimate: BitVector, distance: usize| {
            let better = match &best {
                None => true,
                Some((d, e)) => distance < *d || (distance == *d && estimate < *e),
            };
            if better {
                best = Some((distance, estimate));
            }
        };

        if let Ok(positions) = self.locate_errors(&base_spec) {
            let mut estimate = y_b.clone();
            for &p in &positions {
                estimate.flip(p);
            }
            consider(estimate, positions.len());
        }
        if flip_order >= 1 {
            for b in 0..self.n {
                let mut spec = base_spec.clone();
                for (j, s) in spec.iter_mut().enumerate() {
                    *s ^= self.field.alpha_pow((j + 1) * b);
                }
                if let Ok(positions) = self.locate_errors(&spec) {
                    let mut estimate = y_b.clone();
                    estimate.flip(b);
                    for &p in &positions {
                        estimate.flip(p);
                    }
                    let distance = estimate.hamming_distance(y_b);
                    consider(estimate, distance);
                }
            }
        }

        match best {
            Some((_, estimate)) => {
                debug_assert_eq!(self.syndrome(&estimate), *syndrome);
                Ok(DecodeResult {
                    estimate,
                    verified: true,
                })
            }
            None => Err(CodingError::DecodeFailure),
        }
    }

    /// Corrects `word` to the nearest codeword within the decoding radius.
    pub fn correct_to_codeword(&self, word: &BitVector) -> Result<BitVector, CodingError> {
        assert_eq!(word.len(), self.n, "word length mismatch");
        let rem = self.remainder(word);
        let positions = self.locate_errors(&self.spectral(&rem))?;
        let mut codeword = word.clone();
        for &p in &positions {
            codeword.flip(p);
        }
        if !self.is_codeword(&codeword) {
            return Err(CodingError::DecodeFailure);
        }
        Ok(codeword)
    }
}

fn poly_one() -> Vec<u16> {
    vec![1]
}

fn poly_mul(gf: &GfTables, a: &[u16], b: &[u16]) -> Vec<u16> {
    let mut out = vec![0u16; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0 {
                out[i + j] ^= gf.mul(ai, bj);
            }
        }
    }
    out
}

/// Minimal polynomial of alpha^e over GF(2): product of (x + alpha^c) over
/// the cyclotomic coset.
fn minimal_poly(gf: &GfTables, coset: &[usize]) -> Vec<u16> {
    let mut poly = poly_one();
    for &e in coset {
        let root = gf.alpha_pow(e);
        // poly *= (x + root)
        let mut next = vec![0u16; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            if c != 0 {
                next[i + 1] ^= c;
                next[i] ^= gf.mul(c, root);
            }
        }
        poly = next;
    }
    poly
}

/// The (15, 7) code correcting 2 errors; small enough for exhaustive tests.
pub fn bch_15_7_2() -> &'static BchCode {
    static CODE: OnceLock<BchCode> = OnceLock::new();
    CODE.get_or_init(|| BchCode::new(4, PRIMITIVE_POLY_W4, 2))
}

/// The (511, 259) code correcting 30 errors.
pub fn bch_511_259_30() -> &'static BchCode {
    static CODE: OnceLock<BchCode> = OnceLock::new();
    CODE.get_or_init(|| BchCode::new(9, PRIMITIVE_POLY_W9, 30))
}

/// A length-511 instance correcting 45 errors; wide enough margin for
/// noisy-measurement recovery (see the fuzzy extractor).
pub fn bch_511_t45() -> &'static BchCode {
    static CODE: OnceLock<BchCode> = OnceLock::new();
    CODE.get_or_init(|| BchCode::new(9, PRIMITIVE_POLY_W9, 45))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::seq::index::sample;
    use rand::Rng;

    #[test]
    fn field_tables_are_consistent() {
        let gf = GfTables::new(4, PRIMITIVE_POLY_W4);
        assert_eq!(gf.alpha_pow(15), 1, "alpha^order must be 1");
        for a in 1u16..16 {
            assert_eq!(gf.mul(a, gf.inv(a)), 1, "a * a^-1 for {a}");
            for b in 1u16..16 {
                // Logarithm consistency: log(ab) = log a + log b (mod order).
                let ab = gf.mul(a, b);
                let expected =
                    (gf.log[a as usize] as usize + gf.log[b as usize] as usize) % gf.order;
                assert_eq!(gf.log[ab as usize] as usize, expected);
            }
        }
    }

    #[test]
    fn toy_code_dimensions_and_distance() {
        let code = bch_15_7_2();
        assert_eq!((code.n(), code.k(), code.t()), (15, 7, 2));
        assert_eq!(code.generator_bits().len(), 9); // degree 8
        // Exhaustive minimum-distance check over all nonzero codewords.
        let mut min_weight = usize::MAX;
        for m in 1u64..(1 << 7) {
            let cw = code.encode(&BitVector::from_u64(m, 7));
            assert!(code.is_codeword(&cw));
            min_weight = min_weight.min(cw.count_ones());
        }
        assert!(min_weight >= 5, "designed distance violated: {min_weight}");
    }

    #[test]
    fn full_code_dimensions() {
        let code = bch_511_259_30();
        assert_eq!((code.n(), code.k(), code.t()), (511, 259, 30));
        assert_eq!(code.syndrome_len(), 252);
        let mut rng = derive_rng(2, "bch-encode", &[]);
        for _ in 0..5 {
            let cw = code.encode(&BitVector::random(&mut rng, 259));
            assert!(code.is_codeword(&cw));
        }
    }

    #[test]
    fn recovery_instance_dimensions() {
        // Standard tables give k = 184 for the length-511 binary BCH code
        // with designed correction radius 45.
        let code = bch_511_t45();
        assert_eq!((code.n(), code.k(), code.t()), (511, 184, 45));
    }

    #[test]
    fn syndrome_is_linear() {
        let code = bch_15_7_2();
        let mut rng = derive_rng(3, "bch-linear", &[]);
        for _ in 0..100 {
            let a = BitVector::random(&mut rng, 15);
            let b = BitVector::random(&mut rng, 15);
            assert_eq!(
                code.syndrome(&a.xor(&b)),
                code.syndrome(&a).xor(&code.syndrome(&b))
            );
        }
    }

    /// Exhaustive members of the coset with the given syndrome.
    fn coset_members(code: &BchCode, syndrome: &BitVector) -> Vec<BitVector> {
        // Any particular solution: message zero, parity = syndrome.
        let mut base = BitVector::zeros(code.n());
        for i in 0..syndrome.len() {
            if syndrome.get(i) {
                base.set(i, true);
            }
        }
        assert_eq!(&code.syndrome(&base), syndrome);
        (0..(1u64 << code.k()))
            .map(|m| base.xor(&code.encode(&BitVector::from_u64(m, code.k()))))
            .collect()
    }

    #[test]
    fn toy_exhaustive_bounded_distance_behavior() {
        let code = bch_15_7_2();
        let mut rng = derive_rng(4, "bch-toy-bd", &[]);
        for round in 0..4u64 {
            let y_a = BitVector::random(&mut rng, 15);
            let s = code.syndrome(&y_a);
            let members = coset_members(code, &s);

            // Every pattern of weight <= t must come back exactly.
            let mut patterns: Vec<Vec<usize>> = vec![vec![]];
            patterns.extend((0..15).map(|i| vec![i]));
            for i in 0..15 {
                for j in i + 1..15 {
                    patterns.push(vec![i, j]);
                }
            }
            for pat in &patterns {
                let mut y_b = y_a.clone();
                for &i in pat {
                    y_b.flip(i);
                }
                let out = code.decode(&y_b, &s, 0).expect("within radius");
                assert_eq!(out.estimate, y_a, "round {round} pattern {pat:?}");
            }

            // Weight-3 patterns: success exactly when some coset member lies
            // within distance t of the observation, and then the decoder must
            // return that member.
            for a in 0..15 {
                for b in a + 1..15 {
                    for c in b + 1..15 {
                        let mut y_b = y_a.clone();
                        y_b.flip(a);
                        y_b.flip(b);
                        y_b.flip(c);
                        let inside: Vec<_> = members
                            .iter()
                            .filter(|m| m.hamming_distance(&y_b) <= 2)
                            .collect();
                        match code.decode(&y_b, &s, 0) {
                            Ok(out) => {
                                assert_eq!(inside.len(), 1, "unique by distance");
                                assert_eq!(&out.estimate, inside[0]);
                            }
                            Err(_) => assert!(inside.is_empty(), "missed decodable pattern"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn toy_list_decode_matches_exhaustive_oracle() {
        let code = bch_15_7_2();
        let mut rng = derive_rng(5, "bch-toy-list", &[]);
        for _ in 0..3 {
            let y_a = BitVector::random(&mut rng, 15);
            let s = code.syndrome(&y_a);
            let members = coset_members(code, &s);
            for a in 0..15 {
                for b in a + 1..15 {
                    for c in b + 1..15 {
                        let mut y_b = y_a.clone();
                        y_b.flip(a);
                        y_b.flip(b);
                        y_b.flip(c);
                        // Flip-one list decoding reaches exactly the coset
                        // members within distance t + 1; the winner is the
                        // closest (ties: lexicographically smallest).
                        let oracle = members
                            .iter()
                            .map(|m| (m.hamming_distance(&y_b), m.clone()))
                            .filter(|(d, _)| *d <= 3)
                            .min_by(|x, y| x.0.cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
                        match code.decode(&y_b, &s, 1) {
                            Ok(out) => {
                                let (_, expected) = oracle.expect("oracle must agree");
                                assert_eq!(out.estimate, expected);
                            }
                            Err(_) => assert!(oracle.is_none()),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn full_code_corrects_exactly_t_flips() {
        let code = bch_511_259_30();
        let mut rng = derive_rng(6, "bch-511", &[]);
        for trial in 0..30u64 {
            let y_a = BitVector::random(&mut rng, 511);
            let s = code.syndrome(&y_a);
            let mut y_b = y_a.clone();
            for i in sample(&mut rng, 511, 30).iter() {
                y_b.flip(i);
            }
            let out = code.decode(&y_b, &s, 0).expect("30 flips are in radius");
            assert_eq!(out.estimate, y_a, "trial {trial}");
        }
    }

    #[test]
    fn full_code_mostly_fails_beyond_radius() {
        let code = bch_511_259_30();
        let mut rng = derive_rng(7, "bch-511-over", &[]);
        let mut recovered = 0;
        let trials = 50;
        for _ in 0..trials {
            let y_a = BitVector::random(&mut rng, 511);
            let s = code.syndrome(&y_a);
            let mut y_b = y_a.clone();
            let extra = 40 + rng.gen_range(0..10);
            for i in sample(&mut rng, 511, extra).iter() {
                y_b.flip(i);
            }
            if let Ok(out) = code.decode(&y_b, &s, 0) {
                if out.estimate == y_a {
                    recovered += 1;
                }
            }
        }
        assert!(recovered <= 2, "beyond-radius recovery {recovered}/{trials}");
    }

    #[test]
    fn codeword_correction_for_offset_construction() {
        let code = bch_15_7_2();
        let mut rng = derive_rng(8, "bch-offset", &[]);
        for _ in 0..50 {
            let cw = code.encode(&BitVector::random(&mut rng, 7));
            let mut noisy = cw.clone();
            for i in sample(&mut rng, 15, 2).iter() {
                noisy.flip(i);
            }
            assert_eq!(code.correct_to_codeword(&noisy).unwrap(), cw);
        }
    }
}
