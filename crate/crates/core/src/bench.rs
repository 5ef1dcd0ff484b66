//! Desk-scale benchmark harness: seeded sample sweeps over a cluster corpus,
//! classic vs simulated bit-split matching, profiling fractions and the
//! Amdahl bound they imply.
//!
//! Only the online path is timed. Engines and the peptide map are built once
//! per corpus, and samples are drawn and digested before the clock starts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::synth::{synthesize, SynthConfig};
use crate::corpus::{make_sample, ClusterSet, CorpusError, SampleSpec};
use crate::digest::{digest_record, CleavageRuleSet, DigestError, Peptide};
use crate::engine::{Engine, EngineError, EngineKind, EngineOptions};
use crate::infer::{
    infer_sample, InferError, InferenceOutcome, PeptideProteinMap, Theta, TimingBreakdown,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("hardware fraction {0} must lie in [0, 1)")]
    Fraction(f64),
    #[error("timing breakdown has zero total")]
    ZeroTotal,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("sample size {size} exceeds the {clusters} clusters in the corpus")]
    SampleSize { size: usize, clusters: usize },
    #[error("classic and bit-split engines disagree on sample size {size}, trial {trial}")]
    EngineDisagreement { size: usize, trial: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Digest(#[from] DigestError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Infer(#[from] InferError),
}

/// Theoretical speedup when fraction `p` of the work takes no time.
pub fn amdahl_speedup(p: f64) -> Result<f64, BenchError> {
    if !(0.0..1.0).contains(&p) {
        return Err(BenchError::Fraction(p));
    }
    Ok(1.0 / (1.0 - p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileFractions {
    pub input_setting: f64,
    pub search_and_mapping: f64,
    pub probability: f64,
}

pub fn profile_fractions(t: &TimingBreakdown) -> Result<ProfileFractions, BenchError> {
    let parts = [t.input_setting, t.search_and_mapping, t.probability].map(|d| d.as_secs_f64());
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return Err(BenchError::ZeroTotal);
    }
    Ok(ProfileFractions {
        input_setting: parts[0] / total,
        search_and_mapping: parts[1] / total,
        probability: parts[2] / total,
    })
}

/// Reference-platform figures (Nios II software vs Cyclone II co-design,
/// averages of 30 samples): proteins in sample, software µs, co-designed µs,
/// observed speedup, theoretical speedup. Reprinted for comparison only.
pub const REFERENCE_PLATFORM_ROWS: [(usize, f64, f64, f64, f64); 6] = [
    (2, 7959.06, 1300.83, 6.12, 23.64),
    (4, 16557.3, 2656.7, 6.23, 25.48),
    (6, 25863.23, 4015.5, 6.44, 24.21),
    (8, 32528.53, 11797.53, 2.76, 28.08),
    (10, 54390.93, 9462.8, 5.75, 35.71),
    (12, 86538.3, 8713.67, 9.93, 30.75),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub rng_seed: u64,
    pub theta: Theta,
    /// Run trials one after another for low-variance timings.
    pub sequential: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sample_sizes: vec![2, 4, 6, 8, 10, 12],
            trials: 30,
            rng_seed: 2014,
            theta: Theta::default(),
            sequential: true,
        }
    }
}

/// Offline products for one corpus.
#[derive(Clone, Debug)]
pub struct BenchCorpus {
    pub clusters: ClusterSet,
    pub rules: CleavageRuleSet,
    pub map: PeptideProteinMap,
    pub classic: Engine,
    pub bitsplit: Engine,
}

impl BenchCorpus {
    pub fn prepare(
        clusters: ClusterSet,
        rules: CleavageRuleSet,
        options: EngineOptions,
    ) -> Result<BenchCorpus, BenchError> {
        let map = PeptideProteinMap::from_clusters(&clusters, &rules)?;
        let patterns = map.patterns();
        Ok(BenchCorpus {
            classic: Engine::build(EngineKind::Classic, &patterns, options)?,
            bitsplit: Engine::build(EngineKind::BitSplit, &patterns, options)?,
            clusters,
            rules,
            map,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub sample_size: usize,
    pub trials: usize,
    pub mean_time_classic_us: f64,
    pub mean_time_bitsplit_sim_us: f64,
    pub sum_time_classic_us: f64,
    pub sum_time_bitsplit_sim_us: f64,
    /// Mean simulated cycles per trial (one residue per cycle, tiles in parallel).
    pub simulated_cycles: f64,
    pub total_simulated_cycles: u64,
    pub correct_inference_rate: f64,
    pub lambda_mean: f64,
    /// Mean over trials of the mean `pi` of the sampled clusters.
    pub mean_pi: f64,
    /// Profile of the classic engine's online stages, summed over trials.
    pub classic_profile: ProfileFractions,
    /// Amdahl bound if search and mapping took no time.
    pub expected_speedup: f64,
}

impl BenchRow {
    /// Copy with every wall-clock-derived field zeroed.
    pub fn without_timing(&self) -> BenchRow {
        BenchRow {
            mean_time_classic_us: 0.0,
            mean_time_bitsplit_sim_us: 0.0,
            sum_time_classic_us: 0.0,
            sum_time_bitsplit_sim_us: 0.0,
            classic_profile: ProfileFractions {
                input_setting: 0.0,
                search_and_mapping: 0.0,
                probability: 0.0,
            },
            expected_speedup: 0.0,
            ..self.clone()
        }
    }
}

/// One prepared trial: a seeded sample, already digested.
#[derive(Clone, Debug)]
pub struct Trial {
    pub peptides: Vec<Peptide>,
    pub truth: BTreeSet<String>,
}

/// Per-size seed streams: trial `t` of size `n` uses the `t`-th draw of the
/// ChaCha8 stream `n` seeded from `base`.
pub fn trial_seeds(base: u64, size: usize, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(size as u64);
    (0..trials).map(|_| rng.random()).collect()
}

pub fn prepare_trial(
    clusters: &ClusterSet,
    rules: &CleavageRuleSet,
    size: usize,
    seed: u64,
) -> Result<Trial, BenchError> {
    let sample = make_sample(
        clusters,
        &SampleSpec {
            cluster_count: size,
            rng_seed: seed,
            pick_members: true,
        },
    )?;
    let mut peptides = Vec::new();
    for r in &sample {
        peptides.extend(digest_record(r, rules)?);
    }
    Ok(Trial {
        peptides,
        truth: sample.into_iter().map(|r| r.cluster_id).collect(),
    })
}

struct TrialResult {
    classic_time: Duration,
    bitsplit_time: Duration,
    classic_profile: TimingBreakdown,
    cycles: u64,
    correct_rate: f64,
    lambda: f64,
    mean_pi: f64,
}

fn mean_truth_pi(outcome: &InferenceOutcome, truth: &BTreeSet<String>) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    outcome
        .scores
        .iter()
        .filter(|s| truth.contains(&s.cluster_id))
        .map(|s| s.pi)
        .sum::<f64>()
        / truth.len() as f64
}

fn correct_rate(outcome: &InferenceOutcome, truth: &BTreeSet<String>) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    outcome.inferred.intersection(truth).count() as f64 / truth.len() as f64
}

fn run_trial(
    corpus: &BenchCorpus,
    config: &BenchConfig,
    size: usize,
    index: usize,
    seed: u64,
) -> Result<TrialResult, BenchError> {
    let trial = prepare_trial(&corpus.clusters, &corpus.rules, size, seed)?;

    let t0 = Instant::now();
    let classic = infer_sample(
        &trial.peptides,
        &corpus.classic,
        &corpus.map,
        config.theta,
        Some(&trial.truth),
    )?;
    let t1 = Instant::now();
    let bitsplit = infer_sample(
        &trial.peptides,
        &corpus.bitsplit,
        &corpus.map,
        config.theta,
        Some(&trial.truth),
    )?;
    let t2 = Instant::now();

    if classic.scores != bitsplit.scores || classic.inferred != bitsplit.inferred {
        return Err(BenchError::EngineDisagreement { size, trial: index });
    }
    let fdr = classic.validation.as_ref().expect("truth supplied");
    Ok(TrialResult {
        classic_time: t1 - t0,
        bitsplit_time: t2 - t1,
        classic_profile: classic.timing,
        cycles: bitsplit.cycles,
        correct_rate: correct_rate(&classic, &trial.truth),
        lambda: fdr.lambda,
        mean_pi: mean_truth_pi(&classic, &trial.truth),
    })
}

/// Runs `config.trials` seeded samples for every sample size.
pub fn run_bench(corpus: &BenchCorpus, config: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    if config.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let mut rows = Vec::with_capacity(config.sample_sizes.len());
    for &size in &config.sample_sizes {
        if size > corpus.clusters.len() {
            return Err(BenchError::SampleSize {
                size,
                clusters: corpus.clusters.len(),
            });
        }
        let seeds = trial_seeds(config.rng_seed, size, config.trials);
        let results: Vec<TrialResult> = if config.sequential {
            seeds
                .iter()
                .enumerate()
                .map(|(i, &s)| run_trial(corpus, config, size, i, s))
                .collect::<Result<_, _>>()?
        } else {
            seeds
                .par_iter()
                .enumerate()
                .map(|(i, &s)| run_trial(corpus, config, size, i, s))
                .collect::<Result<_, _>>()?
        };

        let n = results.len() as f64;
        let us = |d: Duration| d.as_secs_f64() * 1e6;
        let sum_classic: f64 = results.iter().map(|r| us(r.classic_time)).sum();
        let sum_bitsplit: f64 = results.iter().map(|r| us(r.bitsplit_time)).sum();
        let total_cycles: u64 = results.iter().map(|r| r.cycles).sum();
        let mut profile = TimingBreakdown::default();
        for r in &results {
            profile += r.classic_profile;
        }
        let classic_profile = profile_fractions(&profile).unwrap_or(ProfileFractions {
            input_setting: 0.0,
            search_and_mapping: 0.0,
            probability: 0.0,
        });
        rows.push(BenchRow {
            sample_size: size,
            trials: results.len(),
            mean_time_classic_us: sum_classic / n,
            mean_time_bitsplit_sim_us: sum_bitsplit / n,
            sum_time_classic_us: sum_classic,
            sum_time_bitsplit_sim_us: sum_bitsplit,
            simulated_cycles: total_cycles as f64 / n,
            total_simulated_cycles: total_cycles,
            correct_inference_rate: results.iter().map(|r| r.correct_rate).sum::<f64>() / n,
            lambda_mean: results.iter().map(|r| r.lambda).sum::<f64>() / n,
            mean_pi: results.iter().map(|r| r.mean_pi).sum::<f64>() / n,
            expected_speedup: amdahl_speedup(classic_profile.search_and_mapping.min(1.0 - 1e-12))?,
            classic_profile,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mutation_rates: Vec<f64>,
    pub trials: usize,
    pub sample_size: usize,
    pub rng_seed: u64,
    pub theta: Theta,
    pub corpus_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            mutation_rates: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
            trials: 30,
            sample_size: 12,
            rng_seed: 2014,
            theta: Theta::default(),
            corpus_seed: SynthConfig::default().seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mutation_rate: f64,
    pub trials: usize,
    pub mean_pi: f64,
    pub correct_inference_rate: f64,
    pub lambda_mean: f64,
}

/// Correctness as members drift from their references.
///
/// Every rate uses the same references, the same coupled mutation draws and
/// the same sample seeds, so rates differ only in how many substitutions the
/// sampled members carry.
pub fn run_mutation_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, BenchError> {
    if config.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let rules = CleavageRuleSet::default();
    let seeds = trial_seeds(config.rng_seed, config.sample_size, config.trials);
    config
        .mutation_rates
        .iter()
        .map(|&rate| {
            let synth = synthesize(&SynthConfig {
                mutation_rate: rate,
                seed: config.corpus_seed,
                ..SynthConfig::default()
            });
            if config.sample_size > synth.clusters.len() {
                return Err(BenchError::SampleSize {
                    size: config.sample_size,
                    clusters: synth.clusters.len(),
                });
            }
            let map = PeptideProteinMap::from_clusters(&synth.clusters, &rules)?;
            let engine = Engine::build(
                EngineKind::Classic,
                &map.patterns(),
                EngineOptions::default(),
            )?;
            let mut pi = 0.0;
            let mut correct = 0.0;
            let mut lambda = 0.0;
            for &seed in &seeds {
                let trial = prepare_trial(&synth.clusters, &rules, config.sample_size, seed)?;
                let out = infer_sample(
                    &trial.peptides,
                    &engine,
                    &map,
                    config.theta,
                    Some(&trial.truth),
                )?;
                pi += mean_truth_pi(&out, &trial.truth);
                correct += correct_rate(&out, &trial.truth);
                lambda += out.validation.as_ref().map_or(0.0, |v| v.lambda);
            }
            let n = seeds.len() as f64;
            Ok(SweepRow {
                mutation_rate: rate,
                trials: seeds.len(),
                mean_pi: pi / n,
                correct_inference_rate: correct / n,
                lambda_mean: lambda / n,
            })
        })
        .collect()
}

/// Tab-delimited report: measured rows, the mutation sweep and the reference
/// platform figures.
pub fn render_tsv(rows: &[BenchRow], sweep: &[SweepRow], with_timing: bool) -> String {
    let mut out = String::new();
    out.push_str("# online inference, mean of trials per sample size\n");
    out.push_str(
        "proteins_in_sample\ttrials\tclassic_us\tbitsplit_sim_us\tobserved_speedup\t\
         simulated_cycles\tcorrect_inference_rate\tlambda_mean\tmean_pi\tsearch_mapping_fraction\texpected_speedup\n",
    );
    for r in rows {
        let r = if with_timing {
            r.clone()
        } else {
            r.without_timing()
        };
        let speedup = if r.mean_time_bitsplit_sim_us > 0.0 {
            r.mean_time_classic_us / r.mean_time_bitsplit_sim_us
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.2}",
            r.sample_size,
            r.trials,
            r.mean_time_classic_us,
            r.mean_time_bitsplit_sim_us,
            speedup,
            r.simulated_cycles,
            r.correct_inference_rate,
            r.lambda_mean,
            r.mean_pi,
            r.classic_profile.search_and_mapping,
            r.expected_speedup
        );
    }
    if !sweep.is_empty() {
        out.push_str("\n# member mutation sweep\n");
        out.push_str("mutation_rate\ttrials\tmean_pi\tcorrect_inference_rate\tlambda_mean\n");
        for s in sweep {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
                s.mutation_rate, s.trials, s.mean_pi, s.correct_inference_rate, s.lambda_mean
            );
        }
    }
    out.push_str(
        "\n# reference platform (Nios II software vs Cyclone II co-design), not reproduced here\n",
    );
    out.push_str(
        "proteins_in_sample\tsw_only_us\tco_designed_us\tobserved_speedup\texpected_speedup\n",
    );
    for (n, sw, hw, obs, exp) in REFERENCE_PLATFORM_ROWS {
        let _ = writeln!(out, "{n}\t{sw}\t{hw}\t{obs}\t{exp}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amdahl_anchors() {
        assert!((amdahl_speedup(0.972).unwrap() - 35.71).abs() <= 0.01);
        assert_eq!(amdahl_speedup(0.0).unwrap(), 1.0);
        assert_eq!(amdahl_speedup(0.5).unwrap(), 2.0);
        assert!(amdahl_speedup(1.0).is_err());
        assert!(amdahl_speedup(-0.1).is_err());
    }

    #[test]
    fn amdahl_monotone() {
        let mut last = 0.0;
        for i in 0..=99 {
            let s = amdahl_speedup(i as f64 / 100.0).unwrap();
            assert!(s > last);
            last = s;
        }
    }

    #[test]
    fn fractions_normalise() {
        let t = TimingBreakdown {
            input_setting: Duration::from_nanos(1),
            search_and_mapping: Duration::from_nanos(97),
            probability: Duration::from_nanos(2),
        };
        let f = profile_fractions(&t).unwrap();
        assert!((f.input_setting - 0.01).abs() < 1e-12);
        assert!((f.search_and_mapping - 0.97).abs() < 1e-12);
        assert!((f.probability - 0.02).abs() < 1e-12);
        assert!((f.input_setting + f.search_and_mapping + f.probability - 1.0).abs() < 1e-9);

        let single = TimingBreakdown {
            probability: Duration::from_micros(5),
            ..TimingBreakdown::default()
        };
        assert_eq!(profile_fractions(&single).unwrap().probability, 1.0);
        assert!(matches!(
            profile_fractions(&TimingBreakdown::default()),
            Err(BenchError::ZeroTotal)
        ));
    }

    #[test]
    fn seeds_are_stable_per_size() {
        assert_eq!(trial_seeds(1, 4, 5), trial_seeds(1, 4, 5));
        assert_ne!(trial_seeds(1, 4, 5), trial_seeds(1, 6, 5));
        assert_eq!(trial_seeds(1, 4, 3), trial_seeds(1, 4, 5)[..3]);
    }
}
