//! Mobility-based proximity verification from RSSI measurements.
//!
//! A mobile node takes bursts of RSSI samples of a static transmitter from
//! several self-chosen locations, smooths each burst with a scalar Kalman
//! filter, translates the 20th filter output into a distance, and checks
//! the resulting region (immediate / near / far) against what it expects
//! at that location. An impersonator can fake one apparent distance by
//! boosting transmit power, but not several geometrically distinct ones.

use crate::rng::derive_rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProximityError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// Log-distance path loss model with log-normal shadowing, in dBm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    /// Reference power at `d0`, dBm.
    pub p0: f64,
    /// Reference distance, meters.
    pub d0: f64,
    /// Attenuation exponent.
    pub n_exp: f64,
    /// Shadowing standard deviation, dB.
    pub sigma_x: f64,
}

impl PathLossParams {
    /// Small-auditorium channel fit.
    pub fn auditorium() -> Self {
        PathLossParams {
            p0: -60.12,
            d0: 1.0,
            n_exp: 1.7,
            sigma_x: 6.49,
        }
    }

    /// Library channel fit.
    pub fn library() -> Self {
        PathLossParams {
            p0: -61.91,
            d0: 1.0,
            n_exp: 1.85,
            sigma_x: 6.30,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "auditorium" => Some(Self::auditorium()),
            "library" => Some(Self::library()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), ProximityError> {
        if self.d0 <= 0.0 || self.n_exp <= 0.0 || self.sigma_x < 0.0 {
            return Err(ProximityError::BadParams(format!("{self:?}")));
        }
        Ok(())
    }
}

/// The three reference distances and their classification regions. Region
/// boundaries sit at the log-distance midpoints between the references:
/// sqrt(1*3) and sqrt(3*6) meters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Immediate,
    Near,
    Far,
}

pub const REFERENCE_DISTANCES: [f64; 3] = [1.0, 3.0, 6.0];

impl Region {
    pub fn classify(distance: f64) -> Region {
        if distance < 3.0f64.sqrt() {
            Region::Immediate
        } else if distance < 18.0f64.sqrt() {
            Region::Near
        } else {
            Region::Far
        }
    }

    /// The region an honest node at `true_distance` should land in.
    pub fn expected_at(true_distance: f64) -> Region {
        Region::classify(true_distance)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Immediate => "immediate",
            Region::Near => "near",
            Region::Far => "far",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Region::Immediate => 0,
            Region::Near => 1,
            Region::Far => 2,
        }
    }
}

/// Draws `count` RSSI samples at `true_distance`: deterministic path loss
/// plus independent zero-mean Gaussian shadowing.
pub fn synthesize_rssi(
    params: &PathLossParams,
    true_distance: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>, ProximityError> {
    params.validate()?;
    if true_distance <= 0.0 {
        return Err(ProximityError::BadParams(format!(
            "distance {true_distance} must be positive"
        )));
    }
    if count == 0 {
        return Err(ProximityError::BadParams("count must be positive".into()));
    }
    let mean = params.p0 - 10.0 * params.n_exp * (true_distance / params.d0).log10();
    let noise = Normal::new(0.0, params.sigma_x)
        .map_err(|e| ProximityError::BadParams(e.to_string()))?;
    let mut rng = derive_rng(seed, "rssi-synthesis", &[]);
    Ok((0..count).map(|_| mean + noise.sample(&mut rng)).collect())
}

/// Scalar Kalman model coefficients. The target is static, so the state
/// transition and observation coefficients are 1 and no control is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    /// Process variance.
    pub q: f64,
    /// Measurement noise variance.
    pub r: f64,
    /// Control input.
    pub u: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            a: 1.0,
            b: 0.0,
            h: 1.0,
            q: 1e-6,
            r: 0.1,
            u: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x_hat: f64,
    pub p_cov: f64,
}

/// One predict-update cycle with measurement `z`.
pub fn kalman_step(state: KalmanState, config: &KalmanConfig, z: f64) -> KalmanState {
    let x_pred = config.a * state.x_hat + config.b * config.u;
    let p_pred = config.a * config.a * state.p_cov + config.q;
    let gain = p_pred * config.h / (config.h * config.h * p_pred + config.r);
    KalmanState {
        x_hat: x_pred + gain * (z - config.h * x_pred),
        p_cov: (1.0 - gain * config.h) * p_pred,
    }
}

/// Number of filter updates feeding one proximity decision.
pub const DECISION_STEPS: usize = 20;

/// Runs `DECISION_STEPS` updates over the first samples; the prior is the
/// first sample with unit covariance.
pub fn kalman_decision_output(samples: &[f64], config: &KalmanConfig) -> Result<f64, ProximityError> {
    if samples.len() < DECISION_STEPS {
        return Err(ProximityError::InsufficientSamples {
            needed: DECISION_STEPS,
            got: samples.len(),
        });
    }
    let mut state = KalmanState {
        x_hat: samples[0],
        p_cov: 1.0,
    };
    for &z in &samples[..DECISION_STEPS] {
        state = kalman_step(state, config, z);
    }
    Ok(state.x_hat)
}

fn distance_from_rssi(rssi: f64, params: &PathLossParams, sigma: f64) -> f64 {
    let spread = sigma * 10f64.ln() / (10.0 * params.n_exp);
    params.d0 * 10f64.powf((params.p0 - rssi) / (10.0 * params.n_exp)) * (-0.5 * spread * spread).exp()
}

/// Median-unbiased distance estimate from a single (or raw-averaged) RSSI
/// reading, correcting for the full shadowing spread.
pub fn estimate_distance(rssi: f64, params: &PathLossParams) -> f64 {
    distance_from_rssi(rssi, params, params.sigma_x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityDecision {
    pub smoothed_rssi: f64,
    pub estimated_distance: f64,
    pub region: Region,
    pub accepted: bool,
}

/// Smooths one 20-sample burst and classifies the result. The distance
/// correction uses the shadowing spread left after smoothing,
/// `sigma_x / sqrt(DECISION_STEPS)`; correcting with the raw spread would
/// systematically shrink far distances into the near region.
pub fn decide_proximity(
    params: &PathLossParams,
    samples: &[f64],
    expected: Region,
) -> Result<ProximityDecision, ProximityError> {
    params.validate()?;
    let smoothed = kalman_decision_output(samples, &KalmanConfig::default())?;
    let sigma = params.sigma_x / (DECISION_STEPS as f64).sqrt();
    let estimated_distance = distance_from_rssi(smoothed, params, sigma);
    let region = Region::classify(estimated_distance);
    Ok(ProximityDecision {
        smoothed_rssi: smoothed,
        estimated_distance,
        region,
        accepted: region == expected,
    })
}

/// Unanimous verification over several location bursts; an empty burst
/// list or an undersized burst rejects.
pub fn multi_location_verify(params: &PathLossParams, bursts: &[(Vec<f64>, Region)]) -> bool {
    if bursts.is_empty() {
        return false;
    }
    bursts.iter().all(|(samples, expected)| {
        decide_proximity(params, samples, *expected).map_or(false, |d| d.accepted)
    })
}

/// One row of the classification confusion experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionRow {
    pub reference_index: usize,
    pub trials: usize,
    /// Trials classified as immediate / near / far.
    pub counts: [usize; 3],
}

impl ConfusionRow {
    pub fn diagonal_rate(&self) -> f64 {
        self.counts[self.reference_index] as f64 / self.trials as f64
    }
}

/// Classifies `trials` synthetic bursts at each reference distance.
pub fn confusion_experiment(
    params: &PathLossParams,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<ConfusionRow>, ProximityError> {
    let mut rows = Vec::with_capacity(REFERENCE_DISTANCES.len());
    for (row, &dist) in REFERENCE_DISTANCES.iter().enumerate() {
        let mut counts = [0usize; 3];
        for trial in 0..trials {
            let seed = derive_rng(master_seed, "confusion", &[row as u64, trial as u64]).gen();
            let samples = synthesize_rssi(params, dist, DECISION_STEPS, seed)?;
            let decision = decide_proximity(params, &samples, Region::expected_at(dist))?;
            counts[decision.region.index()] += 1;
        }
        rows.push(ConfusionRow {
            reference_index: row,
            trials,
            counts,
        });
    }
    Ok(rows)
}

/// One trial row of the CLI proximity experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityTrialRow {
    pub scenario: &'static str,
    pub true_distance: f64,
    pub trial: usize,
    pub rssi_raw_mean: f64,
    pub rssi_kalman_20: f64,
    pub d_hat: f64,
    pub region: Region,
    pub accepted: bool,
}

/// Synthesizes and classifies `trials` bursts per reference distance,
/// recording raw and smoothed statistics for each.
pub fn run_proximity_trials(
    scenario: &'static str,
    params: &PathLossParams,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<ProximityTrialRow>, ProximityError> {
    let mut rows = Vec::new();
    for (row, &dist) in REFERENCE_DISTANCES.iter().enumerate() {
        for trial in 0..trials {
            let seed = derive_rng(master_seed, "proximity-trial", &[row as u64, trial as u64]).gen();
            let samples = synthesize_rssi(params, dist, DECISION_STEPS, seed)?;
            let decision = decide_proximity(params, &samples, Region::expected_at(dist))?;
            let raw_mean = samples.iter().sum::<f64>() / samples.len() as f64;
            rows.push(ProximityTrialRow {
                scenario,
                true_distance: dist,
                trial,
                rssi_raw_mean: raw_mean,
                rssi_kalman_20: decision.smoothed_rssi,
                d_hat: decision.estimated_distance,
                region: decision.region,
                accepted: decision.accepted,
            });
        }
    }
    Ok(rows)
}

/// Fixed-format CSV of trial rows; identical inputs render byte-identically.
pub fn proximity_csv(rows: &[ProximityTrialRow]) -> String {
    let mut out = String::from(
        "scenario,true_distance_m,trial,rssi_raw_mean,rssi_kalman_20,d_hat_m,region,accepted\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{},{}",
            r.scenario,
            r.true_distance,
            r.trial,
            r.rssi_raw_mean,
            r.rssi_kalman_20,
            r.d_hat,
            r.region.as_str(),
            r.accepted,
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(params: &PathLossParams) -> PathLossParams {
        PathLossParams {
            sigma_x: 0.0,
            ..*params
        }
    }

    #[test]
    fn synthesis_matches_the_path_loss_formula() {
        let quiet = noiseless(&PathLossParams::auditorium());
        let at_ref = synthesize_rssi(&quiet, 1.0, 5, 1).unwrap();
        assert!(at_ref.iter().all(|&s| s == quiet.p0));

        let at_three = synthesize_rssi(&quiet, 3.0, 1, 1).unwrap()[0];
        let expected = -60.12 - 17.0 * 3.0f64.log10();
        assert!((at_three - expected).abs() < 1e-12);
        assert!((at_three + 68.23).abs() < 2e-3, "got {at_three}");

        let noisy = PathLossParams::auditorium();
        let samples = synthesize_rssi(&noisy, 3.0, 100_000, 2).unwrap();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 6.49).abs() / 6.49 < 0.02, "std {std}");
        assert!((mean - expected).abs() < 0.1, "mean {mean}");

        assert!(synthesize_rssi(&noisy, 0.0, 5, 1).is_err());
        assert!(synthesize_rssi(&noisy, 1.0, 0, 1).is_err());
    }

    #[test]
    fn kalman_limits_and_convergence() {
        // Perfect measurement: the estimate jumps to z in one step.
        let sharp = KalmanConfig {
            q: 0.0,
            r: 1e-15,
            ..KalmanConfig::default()
        };
        let state = kalman_step(KalmanState { x_hat: 0.0, p_cov: 1.0 }, &sharp, -50.0);
        assert!((state.x_hat + 50.0).abs() < 1e-9);

        // Constant measurements pull a wrong prior within 5% in 20 steps.
        let config = KalmanConfig::default();
        let z = -63.0;
        let mut state = KalmanState { x_hat: z + 10.0, p_cov: 1.0 };
        let initial_err = (state.x_hat - z).abs();
        for _ in 0..20 {
            state = kalman_step(state, &config, z);
        }
        assert!((state.x_hat - z).abs() < 0.05 * initial_err);

        // Diffuse prior with unit noise: first update lands on z.
        let avg = KalmanConfig {
            q: 0.0,
            r: 1.0,
            ..KalmanConfig::default()
        };
        let mut state = KalmanState { x_hat: 99.0, p_cov: 1e12 };
        for _ in 0..5 {
            state = kalman_step(state, &avg, z);
        }
        assert!((state.x_hat - z).abs() < 1e-6);

        // Covariance contraction under q = 0.
        let mut state = KalmanState { x_hat: 0.0, p_cov: 2.0 };
        let contract = KalmanConfig {
            q: 0.0,
            ..KalmanConfig::default()
        };
        for i in 0..50 {
            let next = kalman_step(state, &contract, (i as f64).sin());
            assert!(next.p_cov <= state.p_cov);
            assert!(next.p_cov > 0.0);
            state = next;
        }
    }

    #[test]
    fn distance_estimation_point_values() {
        let params = PathLossParams::auditorium();
        // At the reference power the full-spread correction gives 0.680 m.
        let d = estimate_distance(params.p0, &params);
        assert!((d - 0.680).abs() < 1e-3, "got {d}");

        let quiet = noiseless(&params);
        assert_eq!(estimate_distance(quiet.p0, &quiet), quiet.d0);

        // Noiseless synthesis inverts exactly once the correction is gone.
        for &dist in &[0.5, 1.0, 3.0, 6.0, 11.0] {
            let rssi = synthesize_rssi(&quiet, dist, 1, 3).unwrap()[0];
            let back = estimate_distance(rssi, &quiet);
            assert!((back - dist).abs() / dist < 1e-9, "{dist} -> {back}");
        }

        // Strictly decreasing in received power.
        let mut last = f64::INFINITY;
        for i in 0..200 {
            let p = -90.0 + i as f64 * 0.25;
            let d = estimate_distance(p, &params);
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn noiseless_bursts_classify_exactly() {
        let quiet = noiseless(&PathLossParams::library());
        for (dist, region) in [
            (1.0, Region::Immediate),
            (3.0, Region::Near),
            (6.0, Region::Far),
        ] {
            let samples = synthesize_rssi(&quiet, dist, DECISION_STEPS, 4).unwrap();
            let decision = decide_proximity(&quiet, &samples, region).unwrap();
            assert_eq!(decision.region, region);
            assert!(decision.accepted);
        }
        let short = vec![-60.0; 10];
        assert_eq!(
            decide_proximity(&quiet, &short, Region::Immediate).unwrap_err(),
            ProximityError::InsufficientSamples { needed: 20, got: 10 }
        );
    }

    #[test]
    fn near_region_detection_rate_at_three_meters() {
        let params = PathLossParams::auditorium();
        let mut hits = 0;
        for trial in 0..500u64 {
            let samples = synthesize_rssi(&params, 3.0, DECISION_STEPS, 1000 + trial).unwrap();
            let decision = decide_proximity(&params, &samples, Region::Near).unwrap();
            hits += decision.accepted as usize;
        }
        assert!(hits >= 450, "only {hits}/500 recognized near");
    }

    #[test]
    fn distance_mismatch_is_flagged() {
        let params = PathLossParams::auditorium();
        let mut flagged = 0;
        for trial in 0..500u64 {
            let samples = synthesize_rssi(&params, 6.0, DECISION_STEPS, 2000 + trial).unwrap();
            let decision = decide_proximity(&params, &samples, Region::Immediate).unwrap();
            flagged += (!decision.accepted) as usize;
        }
        assert!(flagged >= 495, "only {flagged}/500 flagged");
    }

    #[test]
    fn confusion_matrix_meets_targets() {
        let rows = confusion_experiment(&PathLossParams::auditorium(), 500, 7).unwrap();
        let rates: Vec<f64> = rows.iter().map(ConfusionRow::diagonal_rate).collect();
        assert!(rates[0] >= 0.85, "immediate diagonal {}", rates[0]);
        assert!(rates[1] >= 0.85, "near diagonal {}", rates[1]);
        assert!(rates[2] >= 0.75, "far diagonal {}", rates[2]);
    }

    #[test]
    fn multi_location_catches_power_boosting_impersonator() {
        let params = PathLossParams::auditorium();
        // Honest mover: all bursts match expectations.
        let mut honest_ok = 0;
        for trial in 0..200u64 {
            let bursts = vec![
                (
                    synthesize_rssi(&params, 1.0, DECISION_STEPS, 3000 + trial).unwrap(),
                    Region::Immediate,
                ),
                (
                    synthesize_rssi(&params, 6.0, DECISION_STEPS, 4000 + trial).unwrap(),
                    Region::Far,
                ),
            ];
            honest_ok += multi_location_verify(&params, &bursts) as usize;
        }
        assert!(honest_ok >= 150, "honest acceptance {honest_ok}/200");

        // Impersonator 6 m away boosts +10 dB: apparent distance shrinks by
        // 10^(10/17) everywhere, so it cannot look immediate at one stop
        // and far at the next.
        let boosted = PathLossParams {
            p0: params.p0 + 10.0,
            ..params
        };
        let mut fooled = 0;
        for trial in 0..200u64 {
            let bursts = vec![
                (
                    synthesize_rssi(&boosted, 6.0, DECISION_STEPS, 5000 + trial).unwrap(),
                    Region::Immediate,
                ),
                (
                    synthesize_rssi(&boosted, 6.5, DECISION_STEPS, 6000 + trial).unwrap(),
                    Region::Far,
                ),
            ];
            fooled += multi_location_verify(&params, &bursts) as usize;
        }
        assert!(fooled <= 2, "impersonator passed {fooled}/200");

        assert!(!multi_location_verify(&params, &[]));
    }

    #[test]
    fn trial_csv_is_deterministic() {
        let params = PathLossParams::library();
        let a = run_proximity_trials("library", &params, 5, 11).unwrap();
        let b = run_proximity_trials("library", &params, 5, 11).unwrap();
        assert_eq!(proximity_csv(&a), proximity_csv(&b));
        let csv = proximity_csv(&a);
        assert!(csv.starts_with(
            "scenario,true_distance_m,trial,rssi_raw_mean,rssi_kalman_20,d_hat_m,region,accepted\n"
        ));
        assert_eq!(csv.lines().count(), 1 + 3 * 5);
        assert!(csv.contains("library,1,0,"));
    }
}
