//! Seeded Monte Carlo harnesses: superset/exact/subset recovery frequency,
//! exact population generalization gap, and MAP decoding error against the
//! Fano bound.
//!
//! Trials run in parallel but every trial's randomness derives only from
//! `(master seed, m index, trial index)` through [`trial_seed`], and results
//! are reduced in trial order, so tables are independent of worker count.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::estimator::{
    enumerate_psne_sets, fit_mle, population_mle, CandidateFamily, EnumerationLimits, FitResult,
    GridSpec,
};
use crate::hard_instances::{fano_psne, hypotheses, map_decoder};
use crate::mixture::{MixtureInterval, MixtureModel};
use crate::psne_set::PsneSet;
use crate::space::ActionSpace;
use crate::theory::{
    beta, binomial, fano_error_lower_bound_with_q, mixture_kl, sufficient_samples,
};

/// Hypothesis sets larger than this are sampled rather than enumerated.
pub const MAX_ENUMERATED_HYPOTHESES: u128 = 10_000;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `splitmix64(splitmix64(splitmix64(master) ^ m_index) ^ trial)`.
pub fn trial_seed(master: u64, m_index: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ m_index) ^ trial)
}

const TRUTH_STREAM: u64 = 0x0074_7275_7468; // "truth"

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub m: u64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub config: ExperimentConfig,
    pub version: String,
    pub seed: u64,
    /// Derived quantities (family size, truth, beta, ...).
    pub derived: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: TableMetadata,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    fn new(config: &ExperimentConfig) -> Self {
        ResultTable {
            metadata: TableMetadata {
                config: config.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: config.seed,
                derived: BTreeMap::new(),
            },
            rows: Vec::new(),
        }
    }

    fn push(&mut self, m: u64, metric: &str, value: f64, stderr: f64, trials: usize) {
        self.rows.push(ResultRow {
            m,
            metric: metric.to_string(),
            value,
            stderr,
            trials,
        });
    }

    fn push_frequency(&mut self, m: u64, metric: &str, hits: usize, trials: usize) {
        let f = hits as f64 / trials as f64;
        self.push(m, metric, f, frequency_stderr(f, trials), trials);
    }

    pub fn row(&self, m: u64, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.m == m && r.metric == metric)
    }

    fn derive(&mut self, key: &str, value: impl Serialize) {
        self.metadata.derived.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable"),
        );
    }
}

/// `sqrt(f (1 - f) / trials)`.
pub fn frequency_stderr(f: f64, trials: usize) -> f64 {
    (f * (1.0 - f) / trials as f64).sqrt()
}

/// Candidate family and truth for the recovery and gap harnesses.
#[derive(Debug, Clone)]
pub struct RecoverySetup {
    pub family: CandidateFamily,
    pub truth: MixtureModel,
}

impl RecoverySetup {
    /// Builds the grid family and selects the truth: by index, by game
    /// file, or drawn with the config seed among candidates with at least
    /// two equilibria whose interval admits `q_star`.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let spec = GridSpec::new(
            config.n,
            config.k,
            config.actions.clone(),
            config.grid.clone(),
        )?;
        let family = enumerate_psne_sets(&spec, EnumerationLimits::default())?;
        let truth_set = if let Some(idx) = config.truth_index {
            family.candidates().get(idx).cloned().ok_or_else(|| {
                Error::Config(vec![format!(
                    "truth_index {idx} out of range for a family of {}",
                    family.len()
                )])
            })?
        } else if let Some(path) = &config.truth {
            crate::io::read_game(path)?.enumerate_psne()?
        } else {
            let space = family.space();
            let eligible: Vec<&PsneSet> = family
                .candidates()
                .iter()
                .filter(|c| {
                    c.len() >= 2
                        && MixtureInterval::new(c.len() as u64, space.joint_size())
                            .is_ok_and(|i| i.contains(config.q_star))
                })
                .collect();
            if eligible.is_empty() {
                return Err(Error::Config(vec![
                    "no candidate with |NE| >= 2 admits q_star".into(),
                ]));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ TRUTH_STREAM));
            eligible[rng.random_range(0..eligible.len())].clone()
        };
        Self::new(family, truth_set, config.q_star)
    }

    pub fn new(family: CandidateFamily, truth_set: PsneSet, q_star: f64) -> Result<Self> {
        if !family.contains(&truth_set) {
            return Err(Error::Config(vec![format!(
                "truth PSNE set {:?} is not in the candidate family",
                truth_set.indices()
            )]));
        }
        let truth =
            MixtureModel::new(family.space().clone(), truth_set, q_star).map_err(|e| match e {
                Error::Domain(m) => Error::Config(vec![m]),
                other => other,
            })?;
        Ok(RecoverySetup { family, truth })
    }

    fn describe(&self, table: &mut ResultTable, delta: f64) {
        let space = self.truth.space();
        table.derive("family_size", self.family.len());
        table.derive("joint_size", space.joint_size());
        table.derive("truth_psne", self.truth.psne().indices());
        table.derive("q_star", self.truth.q());
        if let Ok(b) = beta(
            self.truth.psne().len() as u64,
            self.truth.q(),
            space.joint_size(),
        ) {
            table.derive("beta", b);
            table.derive("epsilon", b / 2.0);
            if let Ok(m) = sufficient_samples(b / 2.0, delta, self.family.len() as u64) {
                table.derive("m_sufficient", m);
            }
        }
    }

    fn fit_trial(&self, m: u64, seed: u64) -> Result<FitResult> {
        let data = self.truth.sample_dataset(m as usize, seed);
        fit_mle(&self.family, &data)
    }
}

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.kind {
        ExperimentKind::Recovery => run_recovery(config, &RecoverySetup::from_config(config)?),
        ExperimentKind::Gap => run_generalization_gap(config, &RecoverySetup::from_config(config)?),
        ExperimentKind::Fano => run_fano(config),
    }
}

/// Recovery frequencies per m: "superset" (NE* ⊆ NE-hat), "exact", and
/// "subset" (NE-hat ⊆ NE*).
pub fn run_recovery(config: &ExperimentConfig, setup: &RecoverySetup) -> Result<ResultTable> {
    let mut table = ResultTable::new(config);
    setup.describe(&mut table, config.delta);
    let truth = setup.truth.psne();
    for (mi, &m) in config.m_schedule.iter().enumerate() {
        let outcomes: Vec<(bool, bool, bool)> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let fit = setup.fit_trial(m, trial_seed(config.seed, mi as u64, t as u64))?;
                Ok((
                    truth.is_subset(&fit.psne),
                    &fit.psne == truth,
                    fit.psne.is_subset(truth),
                ))
            })
            .collect::<Result<_>>()?;
        let count = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count();
        table.push_frequency(m, "superset", count(|o| o.0), config.trials);
        table.push_frequency(m, "exact", count(|o| o.1), config.trials);
        table.push_frequency(m, "subset", count(|o| o.2), config.trials);
    }
    Ok(table)
}

/// Nearest-rank empirical quantile of an ascending slice.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    let rank = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Exact population gap `E[L_fit] - E[L_pop]` per trial, with the
/// population optimum from [`population_mle`]. Rows: "gap_mean",
/// "gap_quantile" (level 1 - delta), "gap_min", "gap_max".
pub fn run_generalization_gap(
    config: &ExperimentConfig,
    setup: &RecoverySetup,
) -> Result<ResultTable> {
    let mut table = ResultTable::new(config);
    setup.describe(&mut table, config.delta);
    let space = setup.truth.space();
    let scale = space.nll_scale();
    let best = population_mle(&setup.family, &setup.truth)?.model(space)?;
    let floor = mixture_kl(&setup.truth, &best)?;
    table.derive("population_psne", best.psne().indices());
    table.derive("population_q", best.q());
    for (mi, &m) in config.m_schedule.iter().enumerate() {
        let mut gaps: Vec<f64> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let fit = setup.fit_trial(m, trial_seed(config.seed, mi as u64, t as u64))?;
                let model = fit.model(space)?;
                Ok((mixture_kl(&setup.truth, &model)? - floor) / scale)
            })
            .collect::<Result<_>>()?;
        let trials = gaps.len();
        let mean = gaps.iter().sum::<f64>() / trials as f64;
        let var = if trials > 1 {
            gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
        } else {
            0.0
        };
        gaps.sort_by(f64::total_cmp);
        table.push(m, "gap_mean", mean, (var / trials as f64).sqrt(), trials);
        table.push(
            m,
            "gap_quantile",
            quantile(&gaps, 1.0 - config.delta),
            0.0,
            trials,
        );
        table.push(m, "gap_min", gaps[0], 0.0, trials);
        table.push(m, "gap_max", gaps[trials - 1], 0.0, trials);
    }
    Ok(table)
}

/// MAP decoding error over the influential-players family. Rows: "error"
/// (frequency of π-hat ≠ π) and "fano_bound".
pub fn run_fano(config: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(config);
    let space = ActionSpace::new(config.actions.clone())?;
    let (n, k) = (config.n, config.k);
    let q = config.q_star;
    let count = binomial(n as u64, k as u64);
    let enumerated = (count <= MAX_ENUMERATED_HYPOTHESES).then(|| hypotheses(n, k));
    table.derive("joint_size", space.joint_size());
    table.derive("hypotheses", count.to_string());
    table.derive("hypotheses_enumerated", enumerated.is_some());
    for (mi, &m) in config.m_schedule.iter().enumerate() {
        let errors: Vec<bool> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(config.seed, mi as u64, t as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pi = match &enumerated {
                    Some(all) => all[rng.random_range(0..all.len())].clone(),
                    None => {
                        let mut v: Vec<usize> = sample_indices(&mut rng, n, k)
                            .into_iter()
                            .map(|i| i + 1)
                            .collect();
                        v.sort_unstable();
                        v
                    }
                };
                let x = space.encode(&fano_psne(&pi, n)?)?;
                let model = MixtureModel::new(space.clone(), PsneSet::new(vec![x]), q)?;
                let data = model.sample_dataset(m as usize, splitmix64(seed));
                Ok(map_decoder(&data, n, k, q)? != pi)
            })
            .collect::<Result<_>>()?;
        let wrong = errors.iter().filter(|&&e| e).count();
        table.push_frequency(m, "error", wrong, config.trials);
        let bound = fano_error_lower_bound_with_q(m, n as u64, k as u64, space.joint_size(), q)?;
        table.push(m, "fano_bound", bound, 0.0, config.trials);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(Some(text), &[]).unwrap()
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(1, 2, 3), trial_seed(1, 2, 3));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(1, 3, 2));
        assert_ne!(trial_seed(0, 0, 0), trial_seed(0, 0, 1));
        // Reference value of the SplitMix64 finalizer.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn quantile_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(quantile(&v, 0.9), 9.0);
        assert_eq!(quantile(&v, 0.95), 10.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
    }

    #[test]
    fn recovery_small_instance() {
        let c = cfg("kind = recovery\nn = 3\nk = 2\nm = 1,2000\ntrials = 30\nseed = 5\nq = 0.7\n");
        let setup = RecoverySetup::from_config(&c).unwrap();
        assert!(setup.truth.psne().len() >= 2);
        let t = run_recovery(&c, &setup).unwrap();
        assert_eq!(t.rows.len(), 6);
        let lo = t.row(1, "superset").unwrap().value;
        let hi = t.row(2000, "superset").unwrap().value;
        assert!(lo < hi, "{lo} vs {hi}");
        assert_eq!(hi, 1.0);
        assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r.value)));
        assert_eq!(t, run_recovery(&c, &setup).unwrap());
    }

    #[test]
    fn truth_must_be_in_family_and_admit_q() {
        let space = ActionSpace::binary(2).unwrap();
        let family = CandidateFamily::explicit(
            space,
            vec![PsneSet::new(vec![1]), PsneSet::new(vec![0, 1, 2])],
        )
        .unwrap();
        assert!(matches!(
            RecoverySetup::new(family.clone(), PsneSet::new(vec![0, 1, 2]), 0.5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RecoverySetup::new(family.clone(), PsneSet::new(vec![2]), 0.5),
            Err(Error::Config(_))
        ));
        assert!(RecoverySetup::new(family, PsneSet::new(vec![1]), 0.5).is_ok());
        let bad = cfg("kind = recovery\nn = 2\nk = 1\ntruth_index = 100000\n");
        assert!(matches!(
            RecoverySetup::from_config(&bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gap_is_nonnegative_and_shrinks() {
        let c = cfg("kind = gap\nn = 3\nk = 2\nm = 5,50,5000\ntrials = 40\nseed = 2\n");
        let t = run(&c).unwrap();
        for m in [5, 50, 5000] {
            assert!(t.row(m, "gap_min").unwrap().value >= 0.0);
        }
        let early = t.row(5, "gap_mean").unwrap();
        let late = t.row(5000, "gap_mean").unwrap();
        assert!(late.value <= early.value + 3.0 * early.stderr);
    }

    #[test]
    fn fano_blind_decoder_error() {
        let c = cfg("kind = fano\nn = 4\nk = 2\nm = 0,40\ntrials = 3000\nseed = 9\n");
        let t = run(&c).unwrap();
        let e0 = t.row(0, "error").unwrap();
        // Blind guess against uniform π over C(4,2) = 6 hypotheses.
        assert!((e0.value - 5.0 / 6.0).abs() <= 4.0 * e0.stderr);
        for m in [0, 40] {
            let e = t.row(m, "error").unwrap();
            let b = t.row(m, "fano_bound").unwrap();
            assert!(e.value >= b.value - 3.0 * e.stderr);
        }
    }

    #[test]
    fn fano_sampled_hypotheses() {
        let c = cfg("kind = fano\nn = 16\nk = 8\nm = 0,20\ntrials = 50\nseed = 1\n");
        let t = run_fano(&c).unwrap();
        assert_eq!(
            t.metadata.derived["hypotheses_enumerated"],
            serde_json::json!(false)
        );
        assert_eq!(t.row(0, "error").unwrap().value, 1.0);
    }
}
