//! Polar codes with CRC-aided successive cancellation list decoding.
//!
//! The source word `y` is transformed as `U = y * F^(x)m` where `F` is the
//! 2x2 kernel [[1,0],[1,1]]. The published syndrome reveals the transform
//! values at the least reliable positions (chosen by density evolution under
//! a Gaussian approximation at a fixed design crossover) followed by an
//! 11-bit CRC of `y`. The decoder runs successive cancellation keeping up to
//! `list_size` paths, treats revealed positions as known values, and returns
//! the most likely CRC-consistent path; if no path passes the CRC the most
//! likely path is returned flagged unverified.

use super::{channel_llrs, CodingError, DecodeResult};
use crate::bits::BitVector;

/// Low coefficients of the CRC polynomial
/// x^11 + x^10 + x^9 + x^7 + x^4 + x + 1.
const CRC_POLY_LOW: u16 = 0x693;
/// Degree of the CRC polynomial.
pub const CRC_BITS: usize = 11;
/// Crossover probability the reliability ordering is designed for.
pub const DESIGN_CROSSOVER: f64 = 0.05;

/// Multiplies by `F^(x)m` in place of the bit order (an involution).
pub fn transform(y: &BitVector) -> BitVector {
    let n = y.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut bits = y.to_bits();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for j in block..block + h {
                bits[j] ^= bits[j + h];
            }
        }
        h *= 2;
    }
    BitVector::from_bits(&bits)
}

/// Remainder of `y(x) * x^11` modulo the CRC polynomial, coefficients of `x`
/// are processed from the highest degree down.
pub fn crc11(y: &BitVector) -> BitVector {
    let mut reg: u16 = 0;
    let mut feed = |bit: bool| {
        let top = (reg >> 10) & 1 == 1;
        reg = ((reg << 1) | bit as u16) & 0x7FF;
        if top {
            reg ^= CRC_POLY_LOW;
        }
    };
    for i in (0..y.len()).rev() {
        feed(y.get(i));
    }
    for _ in 0..CRC_BITS {
        feed(false);
    }
    let mut out = BitVector::zeros(CRC_BITS);
    for j in 0..CRC_BITS {
        out.set(j, (reg >> j) & 1 == 1);
    }
    out
}

fn bit_reverse(x: usize, m: u32) -> usize {
    x.reverse_bits() >> (usize::BITS - m)
}

// Reliability construction: density evolution with the consistent-Gaussian
// approximation. Means evolve through the check operation
// phi^-1(phi(m) * (2 - phi(m))) and the variable operation 2m; the starting
// mean models a hard-decision channel with the design crossover.

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn q_func_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 0.5);
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_func(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const MEAN_CAP: f64 = 250.0;

fn phi(x: f64) -> f64 {
    if x < 1e-12 {
        1.0
    } else if x < 10.0 {
        (-0.4527 * x.powf(0.86) + 0.0218).exp()
    } else {
        (std::f64::consts::PI / x).sqrt() * (-x / 4.0).exp() * (1.0 - 10.0 / (7.0 * x))
    }
}

fn phi_inv(y: f64) -> f64 {
    if y >= 1.0 {
        return 0.0;
    }
    if y <= phi(MEAN_CAP) {
        return MEAN_CAP;
    }
    let (mut lo, mut hi) = (0.0f64, MEAN_CAP);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean log-likelihood ratio of each synthetic channel, indexed by decoding
/// phase, for a length `2^m` transform.
fn phase_means(m: u32, p_design: f64) -> Vec<f64> {
    let m0 = 2.0 * q_func_inv(p_design).powi(2);
    let mut means = vec![m0];
    for _ in 0..m {
        let mut next = Vec::with_capacity(2 * means.len());
        for &mean in &means {
            let pm = phi(mean);
            next.push(phi_inv((pm * (2.0 - pm)).clamp(0.0, 1.0)));
            next.push((2.0 * mean).min(MEAN_CAP));
        }
        means = next;
    }
    means
}

/// A polar code instance for syndrome reconciliation.
#[derive(Clone, Debug)]
pub struct PolarCode {
    m: u32,
    n: usize,
    k: usize,
    crc_len: usize,
    /// Revealed transform positions in natural index order; the first part
    /// of the syndrome lists their values in this order.
    revealed_naturals: Vec<usize>,
    /// Per decoding phase: position within the revealed part of the
    /// syndrome, or `None` for freely decoded phases.
    slot_by_phase: Vec<Option<u32>>,
    /// Natural transform index decoded at each phase.
    natural_of_phase: Vec<usize>,
}

impl PolarCode {
    /// Builds the code of length `2^m` with `k` payload bits and `crc_len`
    /// CRC bits; `n - k - crc_len` positions are revealed. The reliability
    /// ordering is computed for `p_design`.
    pub fn construct(m: u32, k: usize, crc_len: usize, p_design: f64) -> Self {
        assert!(crc_len == 0 || crc_len == CRC_BITS);
        let n = 1usize << m;
        let free = k + crc_len;
        assert!(free > 0 && free < n, "payload must leave revealed positions");

        let means = phase_means(m, p_design);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        let revealed_count = n - free;

        let mut revealed_naturals: Vec<usize> = order[..revealed_count]
            .iter()
            .map(|&phase| bit_reverse(phase, m))
            .collect();
        revealed_naturals.sort_unstable();
        Self::from_revealed(m, crc_len, revealed_naturals)
    }

    /// Builds an instance directly from its revealed position set (natural
    /// transform indices, strictly ascending). This is how shipped fixtures
    /// are loaded, keeping instances identical across platforms regardless
    /// of floating-point library differences in the reliability ordering.
    pub fn from_revealed(m: u32, crc_len: usize, revealed_naturals: Vec<usize>) -> Self {
        assert!(crc_len == 0 || crc_len == CRC_BITS);
        let n = 1usize << m;
        assert!(revealed_naturals.windows(2).all(|w| w[0] < w[1]));
        assert!(revealed_naturals.iter().all(|&i| i < n));
        assert!(!revealed_naturals.is_empty());
        let k = n - crc_len - revealed_naturals.len();

        let mut slot_by_phase = vec![None; n];
        for (slot, &nat) in revealed_naturals.iter().enumerate() {
            slot_by_phase[bit_reverse(nat, m)] = Some(slot as u32);
        }
        let natural_of_phase = (0..n).map(|phase| bit_reverse(phase, m)).collect();

        PolarCode {
            m,
            n,
            k,
            crc_len,
            revealed_naturals,
            slot_by_phase,
            natural_of_phase,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn crc_len(&self) -> usize {
        self.crc_len
    }

    pub fn syndrome_len(&self) -> usize {
        self.n - self.k
    }

    /// Rate counting the CRC as payload, `(k + l) / n`.
    pub fn effective_rate(&self) -> f64 {
        (self.k + self.crc_len) as f64 / self.n as f64
    }

    pub fn revealed_naturals(&self) -> &[usize] {
        &self.revealed_naturals
    }

    /// Revealed transform values (natural index order) followed by the CRC.
    pub fn syndrome(&self, y: &BitVector) -> BitVector {
        assert_eq!(y.len(), self.n, "word length mismatch");
        let u = transform(y);
        let mut bits = BitVector::zeros(self.syndrome_len());
        for (slot, &nat) in self.revealed_naturals.iter().enumerate() {
            bits.set(slot, u.get(nat));
        }
        if self.crc_len > 0 {
            let crc = crc11(y);
            let base = self.revealed_naturals.len();
            for j in 0..self.crc_len {
                bits.set(base + j, crc.get(j));
            }
        }
        bits
    }

    pub fn decode(
        &self,
        y_b: &BitVector,
        syndrome: &BitVector,
        p: f64,
        list_size: usize,
    ) -> Result<DecodeResult, CodingError> {
        let paths = self.decode_list(y_b, syndrome, p, list_size)?;
        let best = paths
            .into_iter()
            .min_by(|a, b| {
                (!a.crc_ok)
                    .cmp(&!b.crc_ok)
                    .then_with(|| a.metric.total_cmp(&b.metric))
                    .then_with(|| a.estimate.cmp(&b.estimate))
            })
            .expect("list is never empty");
        debug_assert!(!best.crc_ok || self.syndrome(&best.estimate) == *syndrome);
        Ok(DecodeResult {
            estimate: best.estimate,
            verified: best.crc_ok,
        })
    }

    /// Full final list, exposed for exhaustive cross-checks.
    pub(crate) fn decode_list(
        &self,
        y_b: &BitVector,
        syndrome: &BitVector,
        p: f64,
        list_size: usize,
    ) -> Result<Vec<PathOutcome>, CodingError> {
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
        if list_size == 0 {
            return Err(CodingError::BadParams("list size must be positive".into()));
        }

        let llrs = channel_llrs(y_b, p);
        let mut scl = SclState::new(self, &llrs, list_size);
        for phase in 0..self.n {
            scl.compute_phase_llrs(phase);
            match self.slot_by_phase[phase] {
                Some(slot) => scl.force_bit(phase, syndrome.get(slot as usize)),
                None => scl.fork(phase),
            }
            scl.propagate_partial_sums(phase);
        }

        let crc_base = self.revealed_naturals.len();
        let outcomes = scl
            .finished_paths()
            .map(|(u_natural, metric)| {
                let estimate = transform(&u_natural);
                let crc_ok = if self.crc_len == 0 {
                    true
                } else {
                    (0..self.crc_len).all(|j| crc11(&estimate).get(j) == syndrome.get(crc_base + j))
                };
                PathOutcome {
                    estimate,
                    metric,
                    crc_ok,
                }
            })
            .collect();
        Ok(outcomes)
    }
}

pub(crate) struct PathOutcome {
    pub estimate: BitVector,
    pub metric: f64,
    pub crc_ok: bool,
}

/// ln(1 + e^-x), stable over the whole range.
#[inline]
fn softplus_neg(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Penalty added to a path metric for deciding `bit` against LLR `llr`.
#[inline]
fn metric_penalty(llr: f64, bit: bool) -> f64 {
    softplus_neg(if bit { -llr } else { llr })
}

/// Exact check-node combination of two LLRs.
#[inline]
fn boxplus(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let mag = a.abs().min(b.abs());
    sign * mag + softplus_neg((a + b).abs()) - softplus_neg((a - b).abs())
}

/// One layer of the successive cancellation recursion: a pool of value
/// arrays shared between paths with copy-on-write semantics.
struct Layer {
    len: usize,
    p: Vec<f64>,  // per array: len LLR entries
    c: Vec<u8>,   // per array: len pairs of partial-sum slots
    refs: Vec<u32>,
    free: Vec<u32>,
}

impl Layer {
    fn new(len: usize, arrays: usize) -> Self {
        Layer {
            len,
            p: vec![0.0; arrays * len],
            c: vec![0; arrays * 2 * len],
            refs: vec![0; arrays],
            free: (0..arrays as u32).rev().collect(),
        }
    }

    fn alloc(&mut self) -> u32 {
        let a = self.free.pop().expect("layer pool exhausted");
        self.refs[a as usize] = 1;
        a
    }

    fn retain(&mut self, a: u32) {
        self.refs[a as usize] += 1;
    }

    fn release(&mut self, a: u32) {
        let r = &mut self.refs[a as usize];
        *r -= 1;
        if *r == 0 {
            self.free.push(a);
        }
    }

    /// Returns an array holding the same values that the caller may write:
    /// the original when exclusively owned, otherwise a fresh copy.
    fn make_exclusive(&mut self, a: u32) -> u32 {
        if self.refs[a as usize] == 1 {
            return a;
        }
        let b = self.alloc();
        let (ap, bp) = (a as usize * self.len, b as usize * self.len);
        self.p.copy_within(ap..ap + self.len, bp);
        let (ac, bc) = (a as usize * 2 * self.len, b as usize * 2 * self.len);
        self.c.copy_within(ac..ac + 2 * self.len, bc);
        self.refs[a as usize] -= 1;
        b
    }
}

struct SclState {
    m: usize,
    cap: usize,
    words: usize, // u64 words per decision vector
    n: usize,
    layers: Vec<Layer>,       // indexed by depth 0 (channel) ..= m (leaf)
    array_of: Vec<Vec<u32>>,  // [depth][path]
    active: Vec<bool>,
    free_paths: Vec<u32>,
    metric: Vec<f64>,
    leaf_llr: Vec<f64>,
    decisions: Vec<u64>,      // [path * words ..], bits by natural index
    natural_of_phase: Vec<usize>,
}

impl SclState {
    fn new(code: &PolarCode, llrs: &[f64], cap: usize) -> Self {
        let m = code.m as usize;
        let n = code.n;
        let words = n.div_ceil(64);
        let mut layers: Vec<Layer> = (0..=m)
            .map(|d| {
                let len = 1usize << (m - d);
                // The channel layer is read-only and shared by every path.
                let arrays = if d == 0 { 1 } else { cap + 1 };
                Layer::new(len, arrays)
            })
            .collect();
        let mut array_of = vec![vec![0u32; cap]; m + 1];
        for (d, layer) in layers.iter_mut().enumerate() {
            array_of[d][0] = layer.alloc();
        }
        layers[0].p[..n].copy_from_slice(llrs);

        let mut active = vec![false; cap];
        active[0] = true;
        SclState {
            m,
            cap,
            words,
            n,
            layers,
            array_of,
            active,
            free_paths: (1..cap as u32).rev().collect(),
            metric: vec![0.0; cap],
            leaf_llr: vec![0.0; cap],
            decisions: vec![0; cap * words],
            natural_of_phase: code.natural_of_phase.clone(),
        }
    }

    fn claim(&mut self, depth: usize, path: usize) -> u32 {
        let a = self.array_of[depth][path];
        let b = self.layers[depth].make_exclusive(a);
        self.array_of[depth][path] = b;
        b
    }

    /// Recomputes the LLRs the current phase depends on and stores each
    /// path's decision LLR.
    fn compute_phase_llrs(&mut self, phase: usize) {
        let m = self.m;
        let start = if phase == 0 {
            1
        } else {
            m - phase.trailing_zeros() as usize
        };
        for path in 0..self.cap {
            if !self.active[path] {
                continue;
            }
            for depth in start..=m {
                let dst = self.claim(depth, path) as usize;
                let src = self.array_of[depth - 1][path] as usize;
                let (below, above) = self.layers.split_at_mut(depth);
                let lower = &below[depth - 1];
                let layer = &mut above[0];
                let len = layer.len;
                let child = &lower.p[src * lower.len..(src + 1) * lower.len];
                let phase_here = phase >> (m - depth);
                if phase_here & 1 == 0 {
                    for beta in 0..len {
                        layer.p[dst * len + beta] =
                            boxplus(child[2 * beta], child[2 * beta + 1]);
                    }
                } else {
                    for beta in 0..len {
                        let u = layer.c[dst * 2 * len + 2 * beta];
                        let (a, b) = (child[2 * beta], child[2 * beta + 1]);
                        layer.p[dst * len + beta] = if u == 0 { b + a } else { b - a };
                    }
                }
            }
            let top = self.array_of[m][path] as usize;
            self.leaf_llr[path] = self.layers[m].p[top];
        }
    }

    fn write_leaf(&mut self, path: usize, phase: usize, bit: bool) {
        let a = self.claim(self.m, path) as usize;
        self.layers[self.m].c[a * 2 + (phase & 1)] = bit as u8;
        if bit {
            let nat = self.natural_of_phase[phase];
            self.decisions[path * self.words + (nat >> 6)] |= 1u64 << (nat & 63);
        }
    }

    /// Known value at this phase: every path takes it, paying the metric.
    fn force_bit(&mut self, phase: usize, bit: bool) {
        for path in 0..self.cap {
            if !self.active[path] {
                continue;
            }
            self.metric[path] += metric_penalty(self.leaf_llr[path], bit);
            self.write_leaf(path, phase, bit);
        }
    }

    /// Free phase: each path splits in two; the best `cap` candidates by
    /// metric survive (ties broken by path index then bit value).
    fn fork(&mut self, phase: usize) {
        let parents: Vec<usize> = (0..self.cap).filter(|&p| self.active[p]).collect();
        let mut candidates: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * parents.len());
        for &path in &parents {
            let llr = self.leaf_llr[path];
            candidates.push((self.metric[path] + metric_penalty(llr, false), path, false));
            candidates.push((self.metric[path] + metric_penalty(llr, true), path, true));
        }
        if candidates.len() > self.cap {
            candidates.sort_unstable_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then_with(|| a.1.cmp(&b.1))
                    .then_with(|| a.2.cmp(&b.2))
            });
            candidates.truncate(self.cap);
        }

        let mut keep = vec![[None::<f64>; 2]; self.cap];
        for &(pm, path, bit) in &candidates {
            keep[path][bit as usize] = Some(pm);
        }
        for &path in &parents {
            if keep[path][0].is_none() && keep[path][1].is_none() {
                self.kill_path(path);
            }
        }
        for &path in &parents {
            match keep[path] {
                [Some(pm0), Some(pm1)] => {
                    let child = self.clone_path(path);
                    self.metric[path] = pm0;
                    self.write_leaf(path, phase, false);
                    self.metric[child] = pm1;
                    self.write_leaf(child, phase, true);
                }
                [Some(pm0), None] => {
                    self.metric[path] = pm0;
                    self.write_leaf(path, phase, false);
                }
                [None, Some(pm1)] => {
                    self.metric[path] = pm1;
                    self.write_leaf(path, phase, true);
                }
                [None, None] => {}
            }
        }
    }

    fn clone_path(&mut self, parent: usize) -> usize {
        let child = self.free_paths.pop().expect("path pool exhausted") as usize;
        self.active[child] = true;
        self.metric[child] = self.metric[parent];
        self.decisions
            .copy_within(parent * self.words..(parent + 1) * self.words, child * self.words);
        for depth in 0..=self.m {
            let a = self.array_of[depth][parent];
            self.array_of[depth][child] = a;
            self.layers[depth].retain(a);
        }
        child
    }

    fn kill_path(&mut self, path: usize) {
        for depth in 0..=self.m {
            let a = self.array_of[depth][path];
            self.layers[depth].release(a);
        }
        self.active[path] = false;
        let words = self.words;
        self.decisions[path * words..(path + 1) * words].fill(0);
        self.free_paths.push(path as u32);
    }

    /// Pushes the partial sums of a completed odd phase toward the channel.
    fn propagate_partial_sums(&mut self, phase: usize) {
        if phase & 1 == 0 {
            return;
        }
        for path in 0..self.cap {
            if !self.active[path] {
                continue;
            }
            let mut depth = self.m;
            let mut ph = phase;
            while ph & 1 == 1 && depth >= 2 {
                let src = self.array_of[depth][path] as usize;
                let dst = self.claim(depth - 1, path) as usize;
                let (below, above) = self.layers.split_at_mut(depth);
                let upper = &above[0];
                let lower = &mut below[depth - 1];
                let len = upper.len;
                let slot = (ph >> 1) & 1;
                let s = src * 2 * len;
                let d = dst * 2 * lower.len;
                for beta in 0..len {
                    let c0 = upper.c[s + 2 * beta];
                    let c1 = upper.c[s + 2 * beta + 1];
                    lower.c[d + 4 * beta + slot] = c0 ^ c1;
                    lower.c[d + 4 * beta + 2 + slot] = c1;
                }
                depth -= 1;
                ph >>= 1;
            }
        }
    }

    fn finished_paths(&self) -> impl Iterator<Item = (BitVector, f64)> + '_ {
        (0..self.cap).filter(|&p| self.active[p]).map(move |path| {
            let mut u = BitVector::zeros(self.n);
            for nat in 0..self.n {
                if self.decisions[path * self.words + (nat >> 6)] >> (nat & 63) & 1 == 1 {
                    u.set(nat, true);
                }
            }
            (u, self.metric[path])
        })
    }
}
