//! Pulse-count ledger for incremental growth of a linear cluster, in closed
//! form and by Monte Carlo.
//!
//! The stochastic model is a hierarchy of Bernoulli processes. An EME pair
//! needs two successful excitation rounds; a three-qubit cluster attempt
//! consumes three pairs and succeeds with probability 1/32; a four-qubit
//! cluster attempt fuses two three-qubit clusters; each bonding attempt
//! fuses one four-qubit cluster onto the main cluster, adding two qubits on
//! success and removing the end qubit on failure.
//!
//! The main cluster size is tracked relative to an initial seed, so by
//! default the walk is unbounded below and its drift is exactly 1/2 per
//! attempt. [`Boundary::Floor`] instead stops the walk at zero, which makes
//! early failures free and lowers the mean cost at `N = 50` by about 2.5%.
//!
//! Sums of geometric waiting times are drawn in aggregate as negative
//! binomials, so a trial costs a handful of draws per bonding attempt
//! regardless of `p`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_unit_interval, Error, Result};
use crate::protocols::eme_round_probability;
use crate::verify::gate_factor;

/// Success probability of the GHZ-type three-qubit cluster step.
pub const THREE_CLUSTER_SUCCESS: f64 = 1.0 / 32.0;
/// Success probability of an ideal destructive CZ.
pub const FUSION_SUCCESS: f64 = 0.5;

/// Expected elementary laser pulses per resource, with per-round EME
/// success probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostLedger {
    pub p: f64,
    pub eme_cost: f64,
    pub three_cluster_cost: f64,
    pub four_cluster_cost: f64,
    /// Per qubit of the final linear cluster.
    pub per_qubit_cost: f64,
}

impl CostLedger {
    pub fn total_for(&self, n: u32) -> f64 {
        self.per_qubit_cost * n as f64
    }
}

fn check_open(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(Error::OutOfRange { name, value, range: "(0, 1]" })
    }
}

pub fn expected_costs(p: f64) -> Result<CostLedger> {
    let p = check_open("p", p)?;
    let eme_cost = 2.0 / p;
    let three_cluster_cost = 3.0 * (1.0 / THREE_CLUSTER_SUCCESS) * eme_cost;
    let four_cluster_cost = 2.0 * (1.0 / FUSION_SUCCESS) * three_cluster_cost;
    let per_qubit_cost = 2.0 * four_cluster_cost;
    Ok(CostLedger {
        p,
        eme_cost,
        three_cluster_cost,
        four_cluster_cost,
        per_qubit_cost,
    })
}

/// Per-pulse success probability of one EME round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmeRate {
    /// Exactly `p`, the rate behind the `2/p` ledger entry.
    Idealized,
    /// The herald probability of a round computed from the excitation
    /// distribution at efficiency `eta`.
    Protocol { eta: f64, n_max: u8 },
}

/// Lower boundary of the bonding walk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Size measured from the seed; failures always cost one qubit.
    #[default]
    Free,
    /// Size floored at zero.
    Floor,
}

/// Success probabilities of every stage of the growth model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthModel {
    pub p: f64,
    pub eta: f64,
    pub boundary: Boundary,
    pub round_success: f64,
    pub three_cluster_success: f64,
    /// Used both for four-qubit cluster formation and for bonding.
    pub fusion_success: f64,
}

impl GrowthModel {
    pub fn ideal(p: f64, rate: EmeRate) -> Result<Self> {
        Self::lossy(p, 1.0, rate)
    }

    /// Fusions succeed with probability `½ g²`, `g = η/(2−η)`: both link
    /// photons of independently degraded clusters must survive their own
    /// loss and the readout of the fusion.
    pub fn lossy(p: f64, eta: f64, rate: EmeRate) -> Result<Self> {
        let p = check_open("p", p)?;
        let eta = check_open("eta", eta)?;
        let round_success = match rate {
            EmeRate::Idealized => p,
            EmeRate::Protocol { eta, n_max } => eme_round_probability(p, check_unit_interval("eta", eta)?, n_max)?,
        };
        let g = gate_factor(eta)?;
        Ok(GrowthModel {
            p,
            eta,
            boundary: Boundary::Free,
            round_success,
            three_cluster_success: THREE_CLUSTER_SUCCESS,
            fusion_success: FUSION_SUCCESS * g * g,
        })
    }

    pub fn with_boundary(self, boundary: Boundary) -> Self {
        GrowthModel { boundary, ..self }
    }
}

/// Failures before `k` successes of independent Bernoulli(`q`) trials:
/// a Poisson variate with Gamma-distributed mean.
fn negative_binomial<R: Rng + ?Sized>(k: u64, q: f64, rng: &mut R) -> u64 {
    if k == 0 || q >= 1.0 {
        return 0;
    }
    let scale = (1.0 - q) / q;
    let lambda = Gamma::new(k as f64, scale).expect("positive shape and scale").sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive mean").sample(rng) as u64
}

/// Trials needed for `k` successes.
fn attempts_for<R: Rng + ?Sized>(k: u64, q: f64, rng: &mut R) -> u64 {
    k + negative_binomial(k, q, rng)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub pulses: u64,
    pub emes: u64,
    pub three_clusters: u64,
    pub four_clusters: u64,
}

impl GrowthModel {
    fn pulses_for_emes<R: Rng + ?Sized>(&self, emes: u64, rng: &mut R) -> u64 {
        attempts_for(2 * emes, self.round_success, rng)
    }

    /// Cost of producing `count` three-qubit clusters.
    fn three_clusters<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> StageCounts {
        let emes = 3 * attempts_for(count, self.three_cluster_success, rng);
        StageCounts {
            pulses: self.pulses_for_emes(emes, rng),
            emes,
            three_clusters: count,
            four_clusters: 0,
        }
    }

    /// Cost of producing `count` four-qubit clusters.
    fn four_clusters<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> StageCounts {
        let threes = 2 * attempts_for(count, self.fusion_success, rng);
        StageCounts {
            four_clusters: count,
            ..self.three_clusters(threes, rng)
        }
    }

    pub fn sample_eme<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.pulses_for_emes(1, rng)
    }

    pub fn sample_three_cluster<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.three_clusters(1, rng).pulses
    }

    pub fn sample_four_cluster<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.four_clusters(1, rng).pulses
    }
}

/// One run of the growth walk to a cluster of at least `target` qubits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthTrialRecord {
    pub target: u32,
    pub pulses: u64,
    pub attempts: u64,
    pub counts: StageCounts,
    /// Net qubits added after each bonding attempt, starting from 0.
    pub trajectory: Vec<i64>,
}

/// Runs the bonding walk until `target` qubits have been added. Each
/// attempt consumes one four-qubit cluster; success adds two qubits,
/// failure removes one.
pub fn growth_trial<R: Rng + ?Sized>(model: &GrowthModel, target: u32, rng: &mut R) -> GrowthTrialRecord {
    let mut size = 0i64;
    let mut trajectory = vec![0];
    while size < target as i64 {
        if rng.random::<f64>() < model.fusion_success {
            size += 2;
        } else {
            size -= 1;
            if model.boundary == Boundary::Floor {
                size = size.max(0);
            }
        }
        trajectory.push(size);
    }
    let attempts = (trajectory.len() - 1) as u64;
    let counts = model.four_clusters(attempts, rng);
    GrowthTrialRecord {
        target,
        pulses: counts.pulses,
        attempts,
        counts,
        trajectory,
    }
}

/// Independent generator for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let (mut n, mut sum, mut sq) = (0.0, 0.0, 0.0);
        for x in samples {
            n += 1.0;
            sum += x;
            sq += x * x;
        }
        let mean = sum / n;
        let var = if n > 1.0 { (sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    /// Ratio of means `Σy / Σx` with its delta-method standard error.
    pub fn ratio<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Self {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        let n = pairs.len() as f64;
        let (sy, sx) = pairs.iter().fold((0.0, 0.0), |(a, b), &(y, x)| (a + y, b + x));
        let r = sy / sx;
        let residuals = Estimate::from_samples(pairs.iter().map(|&(y, x)| y - r * x));
        Estimate {
            mean: r,
            stderr: residuals.stderr / (sx / n),
        }
    }

    /// `|mean − expected| / expected`.
    pub fn relative_error(&self, expected: f64) -> f64 {
        (self.mean - expected).abs() / expected
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthStats {
    pub n: u32,
    pub p: f64,
    pub eta: f64,
    pub trials: u64,
    pub seed: u64,
    pub model: GrowthModel,
    pub pulses: Estimate,
    pub attempts: Estimate,
    /// Net size change per bonding attempt, pooled over all trials.
    pub drift: Estimate,
    pub mean_emes: f64,
    pub mean_three_clusters: f64,
    pub mean_four_clusters: f64,
}

impl GrowthStats {
    pub fn pulses_per_qubit(&self) -> f64 {
        self.pulses.mean / self.n as f64
    }

    pub fn attempts_per_qubit(&self) -> f64 {
        self.attempts.mean / self.n as f64
    }
}

fn check_run(n: u32, trials: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::OutOfRange { name: "N", value: 0.0, range: "≥ 1" });
    }
    if trials == 0 {
        return Err(Error::OutOfRange { name: "trials", value: 0.0, range: "≥ 1" });
    }
    Ok(())
}

/// Parallel over trials; results are merged in trial order, so the output
/// depends only on the arguments.
pub fn simulate_model(model: GrowthModel, n: u32, trials: u64, seed: u64) -> Result<GrowthStats> {
    check_run(n, trials)?;
    let records: Vec<(u64, u64, i64, StageCounts)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let r = growth_trial(&model, n, &mut trial_rng(seed, t));
            (r.pulses, r.attempts, *r.trajectory.last().expect("non-empty"), r.counts)
        })
        .collect();
    let mean = |f: &dyn Fn(&StageCounts) -> u64| records.iter().map(|r| f(&r.3) as f64).sum::<f64>() / trials as f64;
    Ok(GrowthStats {
        n,
        p: model.p,
        eta: model.eta,
        trials,
        seed,
        model,
        pulses: Estimate::from_samples(records.iter().map(|r| r.0 as f64)),
        attempts: Estimate::from_samples(records.iter().map(|r| r.1 as f64)),
        drift: Estimate::ratio(records.iter().map(|r| (r.2 as f64, r.1 as f64))),
        mean_emes: mean(&|c| c.emes),
        mean_three_clusters: mean(&|c| c.three_clusters),
        mean_four_clusters: mean(&|c| c.four_clusters),
    })
}

pub fn simulate_growth(n: u32, p: f64, trials: u64, seed: u64) -> Result<GrowthStats> {
    simulate_model(GrowthModel::ideal(p, EmeRate::Idealized)?, n, trials, seed)
}

pub fn simulate_growth_lossy(n: u32, p: f64, eta: f64, trials: u64, seed: u64) -> Result<GrowthStats> {
    simulate_model(GrowthModel::lossy(p, eta, EmeRate::Idealized)?, n, trials, seed)
}

/// Monte Carlo estimates of each ledger entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerEstimate {
    pub eme: Estimate,
    pub three_cluster: Estimate,
    pub four_cluster: Estimate,
    pub per_qubit: Estimate,
}

/// Samples single EMEs, three- and four-qubit clusters and full growth runs
/// to `n` qubits, `trials` of each.
pub fn estimate_ledger(model: GrowthModel, n: u32, trials: u64, seed: u64) -> Result<LedgerEstimate> {
    check_run(n, trials)?;
    let samples: Vec<[f64; 4]> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let eme = model.sample_eme(&mut rng) as f64;
            let three = model.sample_three_cluster(&mut rng) as f64;
            let four = model.sample_four_cluster(&mut rng) as f64;
            let grow = growth_trial(&model, n, &mut rng).pulses as f64 / n as f64;
            [eme, three, four, grow]
        })
        .collect();
    let col = |k: usize| Estimate::from_samples(samples.iter().map(|s| s[k]));
    Ok(LedgerEstimate {
        eme: col(0),
        three_cluster: col(1),
        four_cluster: col(2),
        per_qubit: col(3),
    })
}

pub const GROWTH_CSV_HEADER: [&str; 7] = ["N", "p", "eta", "trials", "mean_pulses", "stderr", "mean_attempts"];

pub fn write_growth_csv<W: Write>(out: W, rows: &[GrowthStats]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GROWTH_CSV_HEADER)?;
    for s in rows {
        w.write_record([
            s.n.to_string(),
            format!("{:.6}", s.p),
            format!("{:.6}", s.eta),
            s.trials.to_string(),
            format!("{:.6}", s.pulses.mean),
            format!("{:.6}", s.pulses.stderr),
            format!("{:.6}", s.attempts.mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_ratios() {
        let c = expected_costs(0.01).unwrap();
        assert!((c.per_qubit_cost - 153600.0).abs() < 1e-6);
        assert!((c.three_cluster_cost / c.eme_cost - 96.0).abs() < 1e-12);
        assert!((c.four_cluster_cost / c.eme_cost - 384.0).abs() < 1e-12);
        assert!((expected_costs(1.0).unwrap().per_qubit_cost - 1536.0).abs() < 1e-9);
        assert!(expected_costs(0.0).is_err());
    }

    #[test]
    fn negative_binomial_mean() {
        let mut rng = trial_rng(3, 0);
        let n = 20000;
        let mean = (0..n).map(|_| negative_binomial(5, 0.2, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 20.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn trajectory_stays_non_negative_and_stops_at_target() {
        let model = GrowthModel::ideal(0.1, EmeRate::Idealized).unwrap();
        let r = growth_trial(&model, 10, &mut trial_rng(1, 0));
        assert!(*r.trajectory.last().unwrap() >= 10);
        assert!(r.trajectory[..r.trajectory.len() - 1].iter().all(|&s| s < 10));
        assert_eq!(r.counts.four_clusters, r.attempts);
        let floored = model.with_boundary(Boundary::Floor);
        for t in 0..50 {
            let r = growth_trial(&floored, 10, &mut trial_rng(2, t));
            assert!(r.trajectory.iter().all(|&s| s >= 0));
        }
    }

    #[test]
    fn deterministic() {
        let a = simulate_growth(5, 0.1, 50, 9).unwrap();
        let b = simulate_growth(5, 0.1, 50, 9).unwrap();
        assert_eq!(a, b);
    }
}
