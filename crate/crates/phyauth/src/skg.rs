//! Secret key generation from correlated binary observations.
//!
//! Two parties observe bit strings that disagree independently per position
//! with probability `p`. One publishes a syndrome of its observation; the
//! other decodes it against its own observation, and both hash the (now
//! shared) string into a key. The frame error rate of that reconciliation
//! step, swept over channel qualities and decoder settings, is the main
//! experiment this module drives.

use crate::bits::BitVector;
use crate::coding::{DecoderParams, SlepianWolfCode};
use crate::crypto;
use crate::rng::derive_rng;
use rand::Rng;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkgError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("bad experiment config: {0}")]
    BadConfig(String),
}

/// One sampled pair of correlated observations.
#[derive(Debug, Clone)]
pub struct CorrelatedSourcePair {
    pub y_a: BitVector,
    pub y_b: BitVector,
    pub p: f64,
    pub seed: u64,
}

/// Draws `y_a` uniformly and `y_b` by flipping each bit of `y_a`
/// independently with probability `p`.
pub fn sample_pair(n: usize, p: f64, seed: u64) -> Result<CorrelatedSourcePair, SkgError> {
    if !(0.0..=0.5).contains(&p) {
        return Err(SkgError::OutOfRange(format!("crossover {p} not in [0, 0.5]")));
    }
    let mut rng = derive_rng(seed, "correlated-source", &[]);
    let y_a = BitVector::random(&mut rng, n);
    let mut y_b = y_a.clone();
    for i in 0..n {
        if rng.gen_bool(p) {
            y_b.flip(i);
        }
    }
    Ok(CorrelatedSourcePair { y_a, y_b, p, seed })
}

/// Binary entropy in bits, `h(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64, SkgError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SkgError::OutOfRange(format!("probability {p} not in [0, 1]")));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Inverse of [`binary_entropy`] on `[0, 0.5]`, by bisection to 1e-10.
pub fn entropy_to_p(h: f64) -> Result<f64, SkgError> {
    if !(0.0..=1.0).contains(&h) {
        return Err(SkgError::OutOfRange(format!("entropy {h} not in [0, 1]")));
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-10 {
        let mid = (lo + hi) / 2.0;
        if binary_entropy(mid).unwrap() < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// Result of one reconciliation: both derived keys and whether they agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconcileOutcome {
    pub success: bool,
    pub key_a: BitVector,
    pub key_b: BitVector,
}

/// Full pipeline for one pair: publish the syndrome of `y_a`, decode it
/// from `y_b`, hash both strings into 256-bit keys.
pub fn reconcile(
    pair: &CorrelatedSourcePair,
    code: &SlepianWolfCode,
    params: &DecoderParams,
) -> ReconcileOutcome {
    let syndrome = code.syndrome(&pair.y_a);
    reconcile_against(pair, code, params, &syndrome)
}

/// Same as [`reconcile`] but with a caller-supplied published syndrome,
/// which may have been corrupted in transit.
pub fn reconcile_against(
    pair: &CorrelatedSourcePair,
    code: &SlepianWolfCode,
    params: &DecoderParams,
    published: &BitVector,
) -> ReconcileOutcome {
    let estimate = match code.decode(&pair.y_b, published, pair.p, params) {
        Ok(result) => result.estimate,
        // A failed decode leaves the decoder with nothing better than its
        // own observation; key comparison then catches the mismatch.
        Err(_) => pair.y_b.clone(),
    };
    let key_a = crypto::hash(&pair.y_a);
    let key_b = crypto::hash(&estimate);
    ReconcileOutcome {
        success: estimate == pair.y_a,
        key_a,
        key_b,
    }
}

/// A frame error rate sweep: one code, one decoder setting, a grid of
/// crossover probabilities.
#[derive(Clone)]
pub struct FerExperiment {
    pub code: SlepianWolfCode,
    pub params: DecoderParams,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
}

/// Per-grid-point outcome. The confidence interval is the 95% normal
/// approximation with a continuity guard of `1/(2 trials)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FerPoint {
    pub p: f64,
    pub trials: usize,
    pub failures: usize,
    pub fer: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn trial_fails(exp: &FerExperiment, point: usize, trial: usize) -> bool {
    let p = exp.p_grid[point];
    let seed = derive_rng(exp.master_seed, "fer-trial", &[point as u64, trial as u64]).gen();
    let pair = sample_pair(exp.code.n(), p, seed).expect("validated grid");
    let syndrome = exp.code.syndrome(&pair.y_a);
    match exp.code.decode(&pair.y_b, &syndrome, p, &exp.params) {
        Ok(result) => result.estimate != pair.y_a,
        Err(_) => true,
    }
}

fn count_failures_sequential(exp: &FerExperiment, point: usize) -> usize {
    (0..exp.trials)
        .filter(|&trial| trial_fails(exp, point, trial))
        .count()
}

#[cfg(feature = "parallel")]
fn count_failures(exp: &FerExperiment, point: usize) -> usize {
    use rayon::prelude::*;
    (0..exp.trials)
        .into_par_iter()
        .filter(|&trial| trial_fails(exp, point, trial))
        .count()
}

#[cfg(not(feature = "parallel"))]
fn count_failures(exp: &FerExperiment, point: usize) -> usize {
    count_failures_sequential(exp, point)
}

fn run_sweep_with(
    exp: &FerExperiment,
    count: impl Fn(&FerExperiment, usize) -> usize,
) -> Result<Vec<FerPoint>, SkgError> {
    if exp.params.family() != exp.code.family() {
        return Err(SkgError::BadConfig(format!(
            "decoder {} does not drive a {} code",
            exp.params.label(),
            exp.code.family().as_str()
        )));
    }
    if exp.trials == 0 {
        return Err(SkgError::BadConfig("trials must be positive".into()));
    }
    for &p in &exp.p_grid {
        if !(0.0..=0.5).contains(&p) {
            return Err(SkgError::OutOfRange(format!("crossover {p} not in [0, 0.5]")));
        }
    }
    let mut points = Vec::with_capacity(exp.p_grid.len());
    for (idx, &p) in exp.p_grid.iter().enumerate() {
        let failures = count(exp, idx);
        let fer = failures as f64 / exp.trials as f64;
        let half = 1.96 * (fer * (1.0 - fer) / exp.trials as f64).sqrt()
            + 1.0 / (2.0 * exp.trials as f64);
        points.push(FerPoint {
            p,
            trials: exp.trials,
            failures,
            fer,
            ci_lo: (fer - half).max(0.0),
            ci_hi: (fer + half).min(1.0),
        });
    }
    Ok(points)
}

/// Runs the sweep, fanning trials across threads when the `parallel`
/// feature is active. Each trial derives its RNG from
/// `(master_seed, point, trial)` alone, so parallel and sequential builds
/// produce identical results.
pub fn run_fer_sweep(exp: &FerExperiment) -> Result<Vec<FerPoint>, SkgError> {
    run_sweep_with(exp, count_failures)
}

/// Runs the sweep one trial at a time regardless of features. Exists as
/// the comparison baseline for the parallel path; results are identical.
pub fn run_fer_sweep_sequential(exp: &FerExperiment) -> Result<Vec<FerPoint>, SkgError> {
    run_sweep_with(exp, count_failures_sequential)
}

/// Column header shared by every FER CSV.
pub const SWEEP_CSV_HEADER: &str = "family,n,L_or_t,p,H_p,trials,failures,fer,ci_lo,ci_hi";

/// Renders sweep results as CSV with a fixed header and fixed float
/// formatting, so identical experiments yield byte-identical output.
pub fn sweep_csv(exp: &FerExperiment, points: &[FerPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    out.push_str(&sweep_rows(exp, points));
    out
}

/// The data rows of [`sweep_csv`] without the header, so several curves
/// can share one file.
pub fn sweep_rows(exp: &FerExperiment, points: &[FerPoint]) -> String {
    let mut out = String::new();
    for pt in points {
        let h_p = binary_entropy(pt.p).expect("validated grid");
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{:.6e},{:.6e},{:.6e}",
            exp.code.family().as_str(),
            exp.code.n(),
            exp.params.label(),
            pt.p,
            h_p,
            pt.trials,
            pt.failures,
            pt.fer,
            pt.ci_lo,
            pt.ci_hi,
        )
        .unwrap();
    }
    out
}

/// Parses the key-value experiment configuration:
///
/// ```text
/// code = polar-512-267
/// decoder = L128
/// p_grid = 0.02 0.04 0.06 0.08
/// trials = 1000
/// seed = 7
/// max_iter = 50        # optional, belief propagation only
/// ```
///
/// Lines starting with `#` and blank lines are ignored. Exactly one
/// decoder label; see [`parse_fer_config_curves`] for families of curves.
pub fn parse_fer_config(text: &str) -> Result<FerExperiment, SkgError> {
    let mut curves = parse_fer_config_curves(text)?;
    if curves.len() != 1 {
        return Err(SkgError::BadConfig(format!(
            "expected a single decoder label, found {}",
            curves.len()
        )));
    }
    Ok(curves.remove(0))
}

/// Like [`parse_fer_config`], but `decoder` may list several
/// whitespace-separated labels (`decoder = L1 L8 L32 L128`), yielding one
/// experiment per label. All curves share code, grid, trial count, and
/// seed, so every decoder sees identical noise realizations and the curves
/// are directly comparable.
pub fn parse_fer_config_curves(text: &str) -> Result<Vec<FerExperiment>, SkgError> {
    let mut code = None;
    let mut decoder: Option<Vec<String>> = None;
    let mut p_grid = None;
    let mut trials = None;
    let mut seed = None;
    let mut max_iter = 50usize;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SkgError::BadConfig(format!("not a key=value line: {line}")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "code" => {
                code = Some(crate::coding::fixture::by_name(value).ok_or_else(|| {
                    SkgError::BadConfig(format!("unknown code fixture {value}"))
                })?);
            }
            "decoder" => {
                decoder = Some(value.split_whitespace().map(str::to_string).collect())
            }
            "p_grid" => {
                let grid: Result<Vec<f64>, _> =
                    value.split_whitespace().map(str::parse).collect();
                p_grid = Some(grid.map_err(|_| {
                    SkgError::BadConfig(format!("bad p_grid value in: {value}"))
                })?);
            }
            "trials" => {
                trials = Some(value.parse().map_err(|_| {
                    SkgError::BadConfig(format!("bad trials value: {value}"))
                })?);
            }
            "seed" => {
                seed = Some(value.parse().map_err(|_| {
                    SkgError::BadConfig(format!("bad seed value: {value}"))
                })?);
            }
            "max_iter" => {
                max_iter = value.parse().map_err(|_| {
                    SkgError::BadConfig(format!("bad max_iter value: {value}"))
                })?;
            }
            _ => return Err(SkgError::BadConfig(format!("unknown key {key}"))),
        }
    }

    let code: SlepianWolfCode =
        code.ok_or_else(|| SkgError::BadConfig("missing key `code`".into()))?;
    let labels = decoder.ok_or_else(|| SkgError::BadConfig("missing key `decoder`".into()))?;
    if labels.is_empty() {
        return Err(SkgError::BadConfig("empty decoder list".into()));
    }
    let p_grid: Vec<f64> =
        p_grid.ok_or_else(|| SkgError::BadConfig("missing key `p_grid`".into()))?;
    let trials = trials.ok_or_else(|| SkgError::BadConfig("missing key `trials`".into()))?;
    let master_seed = seed.ok_or_else(|| SkgError::BadConfig("missing key `seed`".into()))?;

    labels
        .iter()
        .map(|label| {
            let params = DecoderParams::from_label(label, max_iter)
                .ok_or_else(|| SkgError::BadConfig(format!("unknown decoder label {label}")))?;
            if params.family() != code.family() {
                return Err(SkgError::BadConfig(format!(
                    "decoder {} does not drive a {} code",
                    params.label(),
                    code.family().as_str()
                )));
            }
            Ok(FerExperiment {
                code: code.clone(),
                params,
                p_grid: p_grid.clone(),
                trials,
                master_seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::fixture::by_name;

    fn toy_bch() -> SlepianWolfCode {
        by_name("bch-15-7-2").unwrap()
    }

    #[test]
    fn sampled_pairs_have_uniform_marginals_and_correct_mismatch() {
        let zero = sample_pair(64, 0.0, 1).unwrap();
        assert_eq!(zero.y_a, zero.y_b);

        let half = sample_pair(100_000, 0.5, 2).unwrap();
        let mismatch = half.y_a.hamming_distance(&half.y_b) as f64 / 100_000.0;
        assert!((mismatch - 0.5).abs() < 0.01, "mismatch {mismatch}");
        let ones = half.y_a.count_ones() as f64 / 100_000.0;
        assert!((ones - 0.5).abs() < 0.01, "marginal {ones}");

        let mut total = 0usize;
        for trial in 0..1000 {
            let pair = sample_pair(512, 0.05, 100 + trial).unwrap();
            total += pair.y_a.hamming_distance(&pair.y_b);
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - 25.6).abs() < 1.0, "mean flips {mean}");

        assert!(sample_pair(8, 0.6, 0).is_err());
        assert!(sample_pair(8, -0.1, 0).is_err());
    }

    #[test]
    fn entropy_endpoints_and_quoted_operating_point() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(binary_entropy(-0.01).is_err());

        let p = entropy_to_p(0.2864).unwrap();
        assert!((p - 0.0500).abs() < 0.0005, "inverse gave {p}");
        assert!(entropy_to_p(1.01).is_err());

        // The curve is flat at p = 0.5 and vertical at p = 0, so roundtrip
        // accuracy at the endpoints is limited by conditioning; interior
        // points must come back at full bisection precision.
        for &x in &[0.0, 0.01, 0.1, 0.25, 0.4, 0.5] {
            let back = entropy_to_p(binary_entropy(x).unwrap()).unwrap();
            assert!((back - x).abs() < 1e-6, "roundtrip {x} -> {back}");
        }
        for &x in &[0.01, 0.1, 0.25, 0.4] {
            let back = entropy_to_p(binary_entropy(x).unwrap()).unwrap();
            assert!((back - x).abs() < 1e-9, "roundtrip {x} -> {back}");
        }
    }

    #[test]
    fn perfect_channel_reconciles_and_keys_are_full_length() {
        let code = by_name("polar-512-267").unwrap();
        let pair = sample_pair(512, 0.0, 3).unwrap();
        let out = reconcile(&pair, &code, &DecoderParams::PolarList { list_size: 1 });
        assert!(out.success);
        assert_eq!(out.key_a, out.key_b);
        assert_eq!(out.key_a.len(), 256);
    }

    #[test]
    fn corrupted_syndrome_is_caught_by_key_comparison() {
        let code = toy_bch();
        let pair = sample_pair(15, 0.05, 4).unwrap();
        let mut syndrome = code.syndrome(&pair.y_a);
        syndrome.flip(0);
        let out = reconcile_against(&pair, &code, &DecoderParams::BchList { flip_order: 1 }, &syndrome);
        assert!(!out.success);
        assert_ne!(out.key_a, out.key_b);
    }

    #[test]
    fn key_agreement_iff_sequence_agreement() {
        let code = toy_bch();
        let params = DecoderParams::BchList { flip_order: 1 };
        let (mut successes, mut failures) = (0usize, 0usize);
        for seed in 0..10_000u64 {
            let pair = sample_pair(15, 0.12, 1_000_000 + seed).unwrap();
            let out = reconcile(&pair, &code, &params);
            assert_eq!(out.success, out.key_a == out.key_b, "seed {seed}");
            if out.success {
                successes += 1;
            } else {
                failures += 1;
            }
        }
        assert!(successes > 0 && failures > 0, "want a mixed population");
    }

    #[test]
    fn successful_keys_are_bit_balanced() {
        let code = toy_bch();
        let params = DecoderParams::BchList { flip_order: 1 };
        let mut ones = vec![0usize; 256];
        let mut kept = 0usize;
        let mut seed = 0u64;
        while kept < 10_000 {
            let pair = sample_pair(15, 0.02, 2_000_000 + seed).unwrap();
            seed += 1;
            let out = reconcile(&pair, &code, &params);
            if !out.success {
                continue;
            }
            kept += 1;
            for (i, count) in ones.iter_mut().enumerate() {
                *count += out.key_a.get(i) as usize;
            }
        }
        for (i, &count) in ones.iter().enumerate() {
            let freq = count as f64 / kept as f64;
            assert!((freq - 0.5).abs() < 0.02, "bit {i} frequency {freq}");
        }
    }

    #[test]
    fn sweep_is_deterministic_and_matches_a_hand_rolled_loop() {
        let exp = FerExperiment {
            code: toy_bch(),
            params: DecoderParams::BchList { flip_order: 1 },
            p_grid: vec![0.02, 0.1],
            trials: 200,
            master_seed: 9,
        };
        let a = run_fer_sweep(&exp).unwrap();
        let b = run_fer_sweep(&exp).unwrap();
        assert_eq!(sweep_csv(&exp, &a), sweep_csv(&exp, &b));

        // Plain sequential reference using only the documented derivation.
        for (idx, point) in a.iter().enumerate() {
            let mut failures = 0usize;
            for trial in 0..exp.trials {
                let seed: u64 = derive_rng(exp.master_seed, "fer-trial", &[idx as u64, trial as u64]).gen();
                let pair = sample_pair(15, exp.p_grid[idx], seed).unwrap();
                let syndrome = exp.code.syndrome(&pair.y_a);
                let failed = match exp.code.decode(&pair.y_b, &syndrome, exp.p_grid[idx], &exp.params) {
                    Ok(result) => result.estimate != pair.y_a,
                    Err(_) => true,
                };
                failures += failed as usize;
            }
            assert_eq!(point.failures, failures, "point {idx}");
        }

        let csv = sweep_csv(&exp, &a);
        assert!(csv.starts_with("family,n,L_or_t,p,H_p,trials,failures,fer,ci_lo,ci_hi\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("bch,15,t1,0.02,0.141441,200,"));
    }

    #[test]
    fn decoder_lists_expand_into_comparable_curves() {
        let text = "code = polar-512-267\ndecoder = L1 L8 L32 L128\np_grid = 0.05\ntrials = 10\nseed = 4\n";
        let curves = parse_fer_config_curves(text).unwrap();
        assert_eq!(curves.len(), 4);
        let labels: Vec<String> = curves.iter().map(|c| c.params.label()).collect();
        assert_eq!(labels, ["L1", "L8", "L32", "L128"]);
        for curve in &curves {
            assert_eq!(curve.master_seed, 4);
            assert_eq!(curve.p_grid, vec![0.05]);
        }
        assert!(matches!(parse_fer_config(text), Err(SkgError::BadConfig(_))));

        let single = parse_fer_config("code = bch-15-7-2\ndecoder = t1\np_grid = 0.1\ntrials = 5\nseed = 1\n");
        assert!(single.is_ok());
    }

    #[test]
    fn sequential_sweep_matches_the_default_path() {
        let exp = FerExperiment {
            code: toy_bch(),
            params: DecoderParams::BchList { flip_order: 0 },
            p_grid: vec![0.05, 0.2],
            trials: 300,
            master_seed: 21,
        };
        let default_path = run_fer_sweep(&exp).unwrap();
        let sequential = run_fer_sweep_sequential(&exp).unwrap();
        assert_eq!(sweep_csv(&exp, &default_path), sweep_csv(&exp, &sequential));
    }

    #[test]
    fn zero_noise_sweep_has_zero_fer() {
        let exp = FerExperiment {
            code: by_name("ldpc-3-6-512").unwrap(),
            params: DecoderParams::LdpcBp { max_iter: 50, osd_order: None },
            p_grid: vec![0.0],
            trials: 100,
            master_seed: 10,
        };
        let points = run_fer_sweep(&exp).unwrap();
        assert_eq!(points[0].failures, 0);
        assert_eq!(points[0].fer, 0.0);
        assert_eq!(points[0].ci_lo, 0.0);
    }

    #[test]
    fn toy_fer_agrees_with_exhaustive_decoder() {
        let code = toy_bch();
        let trials = 3000usize;
        let exp = FerExperiment {
            code: code.clone(),
            params: DecoderParams::BchList { flip_order: 1 },
            p_grid: vec![0.05],
            trials,
            master_seed: 11,
        };
        let fer = run_fer_sweep(&exp).unwrap()[0].fer;

        // Exhaustive reference: enumerate the whole coset and take the
        // closest member (ties broken low), on independently drawn pairs.
        let (n, k) = (code.n(), 7usize);
        let mut oracle_failures = 0usize;
        for trial in 0..trials {
            let seed: u64 = derive_rng(11, "fer-oracle", &[trial as u64]).gen();
            let pair = sample_pair(n, 0.05, seed).unwrap();
            let syndrome = code.syndrome(&pair.y_a);
            let mut best: Option<BitVector> = None;
            for msg in 0..(1u64 << k) {
                let mut cand = BitVector::zeros(n);
                for (slot, bit) in (0..n).filter(|&i| i >= n - k).enumerate() {
                    cand.set(bit, (msg >> slot) & 1 == 1);
                }
                // Complete the candidate to the right coset by solving the
                // parity positions from the syndrome difference.
                let cand = complete_to_coset(&code, cand, &syndrome);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (dc, db) = (cand.hamming_distance(&pair.y_b), b.hamming_distance(&pair.y_b));
                        dc < db || (dc == db && cand < *b)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
            oracle_failures += (best.unwrap() != pair.y_a) as usize;
        }
        let oracle_fer = oracle_failures as f64 / trials as f64;
        let sigma = (2.0 * oracle_fer.max(fer) * (1.0 - oracle_fer.min(fer)) / trials as f64).sqrt();
        assert!(
            (fer - oracle_fer).abs() <= 2.0 * sigma.max(0.003),
            "decoder fer {fer} vs exhaustive {oracle_fer}"
        );
    }

    /// Builds the unique coset member whose low (parity) positions are the
    /// base pattern for `syndrome` shifted by the candidate's own parity.
    fn complete_to_coset(
        code: &SlepianWolfCode,
        high_bits: BitVector,
        syndrome: &BitVector,
    ) -> BitVector {
        let diff = code.syndrome(&high_bits).xor(syndrome);
        let mut full = high_bits;
        for i in 0..diff.len() {
            if diff.get(i) {
                full.flip(i);
            }
        }
        debug_assert_eq!(&code.syndrome(&full), syndrome);
        full
    }

    #[test]
    fn config_parser_round_trips_and_rejects_mismatches() {
        let text = "# sweep\ncode = polar-512-267\ndecoder = L8\np_grid = 0.02 0.05\ntrials = 10\nseed = 3\n";
        let exp = parse_fer_config(text).unwrap();
        assert_eq!(exp.params, DecoderParams::PolarList { list_size: 8 });
        assert_eq!(exp.p_grid, vec![0.02, 0.05]);
        assert_eq!((exp.trials, exp.master_seed), (10, 3));

        let bad = "code = polar-512-267\ndecoder = bp\np_grid = 0.02\ntrials = 5\nseed = 1\n";
        assert!(matches!(parse_fer_config(bad), Err(SkgError::BadConfig(_))));
        let unknown = "code = nosuch\ndecoder = bp\np_grid = 0.02\ntrials = 5\nseed = 1\n";
        assert!(matches!(parse_fer_config(unknown), Err(SkgError::BadConfig(_))));
    }
}
