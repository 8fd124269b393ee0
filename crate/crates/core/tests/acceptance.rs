//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and fails on
//! `FAIL`. Run with `--nocapture` to see the lines.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use psne_learn::config::parse_config;
use psne_learn::estimator::{
    enumerate_grid_games, enumerate_psne_sets, population_mle, CandidateFamily, EnumerationLimits,
    GridSpec,
};
use psne_learn::experiments::{
    frequency_stderr, run_fano, run_generalization_gap, run_recovery, RecoverySetup,
};
use psne_learn::theory::{
    beta, fano_error_lower_bound, fano_kl, mixture_kl, nll_scale, sufficient_samples,
};
use psne_learn::{ActionSpace, JointAction, LinearPsneForm, MixtureModel, PsneSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(
    id: u32,
    name: &str,
    ok: bool,
    detail: &str,
    elapsed: Duration,
    budget: Option<Duration>,
) {
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    let budget = budget.map_or(String::new(), |b| format!(" / {:.0?}", b));
    println!("criterion {id:>2} {verdict}: {name}: {detail} [{elapsed:.2?}{budget}]");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
    assert!(in_time, "criterion {id} ({name}) exceeded its time budget");
}

fn random_subset<R: Rng>(rng: &mut R, joint: u64, size: u64) -> PsneSet {
    let mut all: Vec<u64> = (0..joint).collect();
    for i in 0..size as usize {
        let j = rng.random_range(i..joint as usize);
        all.swap(i, j);
    }
    PsneSet::new(all[..size as usize].to_vec())
}

fn random_space<R: Rng>(rng: &mut R, max_joint: u64) -> ActionSpace {
    loop {
        let n = rng.random_range(1..=6);
        let counts: Vec<usize> = (0..n).map(|_| rng.random_range(2..=6)).collect();
        if joint_size(&counts) <= max_joint {
            return ActionSpace::new(counts).unwrap();
        }
    }
}

/// q drawn uniformly from the admissible interval, kept off its open end.
fn random_q<R: Rng>(rng: &mut R, r: u64, joint: u64) -> f64 {
    let lower = r as f64 / joint as f64;
    let upper = 1.0 - 1.0 / (2.0 * joint as f64);
    lower + (upper - lower) * rng.random_range(0.01..=1.0)
}

#[test]
fn criterion_01_pmf_normalization() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_sum, mut nll_ok) = (0.0f64, true);
    for _ in 0..200 {
        let space = random_space(&mut rng, 4096);
        let joint = space.joint_size();
        let r = rng.random_range(1..joint);
        let psne = random_subset(&mut rng, joint, r);
        let q = random_q(&mut rng, r, joint);
        let model = MixtureModel::new(space, psne, q).unwrap();
        let total = neumaier((0..joint).map(|x| model.pmf_index(x)));
        worst_sum = worst_sum.max((total - 1.0).abs());
        nll_ok &= (0..joint).all(|x| (0.0..=1.0).contains(&model.scaled_nll_index(x)));
    }
    report(
        1,
        "pmf normalization and NLL range",
        worst_sum <= 1e-12 && nll_ok,
        &format!("max |sum - 1| = {worst_sum:.2e}, scaled NLL in [0,1]: {nll_ok}"),
        start.elapsed(),
        Some(Duration::from_secs(10)),
    );
}

#[test]
fn criterion_02_psne_oracles_agree() {
    let start = Instant::now();
    let (mut pairs, mut mismatches) = (0u64, 0u64);
    let mut check = |game: &psne_learn::PolymatrixGame| {
        let linear = LinearPsneForm::from_game(game);
        let counts = game.space().counts().to_vec();
        for x in 0..joint_size(&counts) {
            let ja = JointAction::new(decode(&counts, x));
            let brute = brute_force_is_psne(game, ja.actions());
            pairs += 1;
            if game.is_psne(&ja).unwrap() != brute || linear.is_psne_linear(&ja).unwrap() != brute {
                mismatches += 1;
            }
        }
    };
    let spec = GridSpec::new(2, 1, vec![2, 2], vec![-1.0, 0.0, 1.0]).unwrap();
    let mut exhaustive = 0;
    for game in enumerate_grid_games(&spec, u128::MAX).unwrap() {
        check(&game);
        exhaustive += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in 0..3000 {
        let actions = if t % 2 == 0 {
            vec![2, 2, 2]
        } else {
            vec![3, 2, 3]
        };
        check(&random_grid_game(&mut rng, &actions, 2, &[-1.0, 0.0, 1.0]));
    }
    report(
        2,
        "PSNE oracle equivalence",
        mismatches == 0,
        &format!("{exhaustive} exhaustive n=2 games + 3000 sampled n=3 games, {pairs} pairs, {mismatches} mismatches"),
        start.elapsed(),
        Some(Duration::from_secs(60)),
    );
}

#[test]
fn criterion_03_beta_kl_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for joint in [16u64, 64, 256] {
        let space = ActionSpace::new(vec![joint as usize]).unwrap();
        for r in 2..=8u64 {
            for _ in 0..10 {
                let q = random_q(&mut rng, r, joint);
                let full = random_subset(&mut rng, joint, r);
                let reduced = PsneSet::new(full.indices()[..r as usize - 1].to_vec());
                let p = MixtureModel::new(space.clone(), full, q).unwrap();
                let s = MixtureModel::new(space.clone(), reduced, q).unwrap();
                let lhs = nll_scale(joint) * beta(r, q, joint).unwrap();
                worst = worst.max((lhs - mixture_kl(&p, &s).unwrap()).abs());
            }
        }
    }
    let spot = beta(2, 0.75, 4).unwrap();
    let numerator = spot * nll_scale(4);
    let identity_ok = worst <= 1e-10;
    let numerator_ok = (numerator - 1.5f64.ln()).abs() <= 1e-12;
    let spot_ok = (spot - 0.117002).abs() <= 1e-6;
    report(
        3,
        "beta-KL identity",
        identity_ok && numerator_ok && spot_ok,
        &format!(
            "max |c beta - KL| = {worst:.2e}; numerator - ln 1.5 = {:.2e}; beta(2, 0.75, 4) = {spot:.7} vs 0.117002 +- 1e-6",
            numerator - 1.5f64.ln()
        ),
        start.elapsed(),
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_04_fano_kl_cross_check() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for joint in 4u64..=64 {
        let space = ActionSpace::new(vec![joint as usize]).unwrap();
        for _ in 0..5 {
            let lower = 1.0 / joint as f64;
            let upper = 1.0 - 1.0 / (2.0 * joint as f64);
            let q = lower + (upper - lower) * rng.random_range(0.01..=1.0);
            let a = rng.random_range(0..joint);
            let b = (a + rng.random_range(1..joint)) % joint;
            let p = MixtureModel::new(space.clone(), PsneSet::new(vec![a]), q).unwrap();
            let s = MixtureModel::new(space.clone(), PsneSet::new(vec![b]), q).unwrap();
            worst = worst.max((fano_kl(q, joint).unwrap() - mixture_kl(&p, &s).unwrap()).abs());
        }
    }
    let s1 = fano_kl(0.5, 4).unwrap();
    let s2 = fano_kl(1.0 / 32.0, 64).unwrap();
    let ok =
        worst <= 1e-12 && (s1 - 3f64.ln() / 3.0).abs() <= 1e-12 && (s2 - 0.011256).abs() <= 1e-6;
    report(
        4,
        "Fano KL cross-check",
        ok,
        &format!("max diff = {worst:.2e}; kl(0.5, 4) = {s1:.12} (ln3/3 = {:.12}); kl(1/32, 64) = {s2:.7}", 3f64.ln() / 3.0),
        start.elapsed(),
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_05_population_mle_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact = 0;
    for _ in 0..50 {
        let space = random_space(&mut rng, 256);
        let joint = space.joint_size();
        let r = rng.random_range(1..joint);
        let truth_set = random_subset(&mut rng, joint, r);
        let q = random_q(&mut rng, r, joint);
        let mut candidates = vec![truth_set.clone()];
        for _ in 0..40 {
            let size = rng.random_range(1..joint);
            candidates.push(random_subset(&mut rng, joint, size));
        }
        // Near misses: one equilibrium dropped, one extra added.
        if r > 1 {
            candidates.push(PsneSet::new(truth_set.indices()[1..].to_vec()));
        }
        if r + 1 < joint {
            let extra = (0..joint).find(|x| !truth_set.contains(*x)).unwrap();
            candidates.push(truth_set.iter().chain([extra]).collect());
        }
        let family = CandidateFamily::explicit(space.clone(), candidates).unwrap();
        let truth = MixtureModel::new(space, truth_set.clone(), q).unwrap();
        let fit = population_mle(&family, &truth).unwrap();
        if fit.psne == truth_set && fit.q_hat == q {
            exact += 1;
        }
    }
    report(
        5,
        "population MLE identity",
        exact == 50,
        &format!("{exact}/50 truths recovered exactly with q-hat == q*"),
        start.elapsed(),
        Some(Duration::from_secs(30)),
    );
}

/// The recovery instance: n = 4 binary, k = 3, grid {-1,0,1}, q* = 0.7,
/// |NE*| >= 2, m = sufficient_samples(beta/2, 0.1, |family|).
fn recovery_instance(kind: &str) -> (psne_learn::config::ExperimentConfig, RecoverySetup, f64) {
    let base = parse_config(
        Some(&format!(
            "kind = {kind}\nn = 4\nk = 3\nq = 0.7\ntrials = 50\ndelta = 0.1\nm = 1\n"
        )),
        &[],
    )
    .unwrap();
    let setup = RecoverySetup::from_config(&base).unwrap();
    let joint = setup.family.space().joint_size();
    assert!(setup.truth.psne().len() >= 2);
    let eps = beta(setup.truth.psne().len() as u64, 0.7, joint).unwrap() / 2.0;
    let m = sufficient_samples(eps, 0.1, setup.family.len() as u64).unwrap();
    let mut config = base;
    config.m_schedule = vec![m];
    (config, setup, eps)
}

#[test]
fn criterion_06_superset_recovery() {
    let start = Instant::now();
    let (config, setup, eps) = recovery_instance("recovery");
    let m = config.m_schedule[0];
    let table = run_recovery(&config, &setup).unwrap();
    let f = table.row(m, "superset").unwrap().value;
    let se = frequency_stderr(f, 50);
    let threshold = 1.0 - 0.1 - 3.0 * se;
    report(
        6,
        "superset recovery",
        f >= threshold,
        &format!(
            "|family| = {}, |NE*| = {}, eps = {eps:.3e}, m = {m}, superset frequency = {f} >= {threshold:.4}",
            setup.family.len(),
            setup.truth.psne().len()
        ),
        start.elapsed(),
        Some(Duration::from_secs(300)),
    );
}

#[test]
fn criterion_07_generalization_gap() {
    let start = Instant::now();
    let (config, setup, eps) = recovery_instance("gap");
    let m = config.m_schedule[0];
    let table = run_generalization_gap(&config, &setup).unwrap();
    let q90 = table.row(m, "gap_quantile").unwrap().value;
    let min = table.row(m, "gap_min").unwrap().value;
    report(
        7,
        "generalization gap",
        q90 <= eps && min >= 0.0,
        &format!(
            "m = {m}, 0.9-quantile gap = {q90:.3e} <= eps = {eps:.3e}, min gap = {min:.3e} >= 0"
        ),
        start.elapsed(),
        Some(Duration::from_secs(300)),
    );
}

#[test]
fn criterion_08_fano_minimax() {
    let start = Instant::now();
    let config = parse_config(
        Some("kind = fano\nn = 6\nk = 1\ntrials = 500\nm = 0,6,12,18,30\n"),
        &[],
    )
    .unwrap();
    assert_eq!(config.q_star, 2.0 / 64.0);
    let table = run_fano(&config).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [0u64, 6, 12, 18, 30] {
        let err = table.row(m, "error").unwrap().value;
        let bound = fano_error_lower_bound(m, 6, 1, 64).unwrap();
        let floor = bound - 3.0 * frequency_stderr(err, 500);
        ok &= err >= floor;
        parts.push(format!("m={m}: {err:.3} >= {floor:.3}"));
    }
    let b18 = fano_error_lower_bound(18, 6, 1, 64).unwrap();
    ok &= (b18 - 0.5).abs() < 5e-4;
    report(
        8,
        "Fano minimax",
        ok,
        &format!("{}; bound(18) = {b18:.5}", parts.join(", ")),
        start.elapsed(),
        Some(Duration::from_secs(120)),
    );
}

fn cli(dir: &Path, threads: usize, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_psne-learn"))
        .args(args)
        .current_dir(dir)
        .env("PSNE_LEARN_THREADS", threads.to_string())
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed with {status}");
}

#[test]
fn criterion_09_thread_count_determinism() {
    let start = Instant::now();
    let outputs = [
        "family.json",
        "data.csv",
        "fit.json",
        "recovery.csv",
        "recovery.csv.meta.json",
        "gap.json",
        "gap.json.meta.json",
        "fano.csv",
        "fano.csv.meta.json",
    ];
    let mut runs = Vec::new();
    for threads in [1, 4, 16] {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        cli(
            d,
            threads,
            &["enumerate", "--n", "3", "--k", "2", "--out", "family.json"],
        );
        cli(
            d,
            threads,
            &[
                "sample",
                "--family",
                "family.json",
                "--psne",
                "3",
                "--q",
                "0.8",
                "--m",
                "5000",
                "--seed",
                "9",
                "--out",
                "data.csv",
            ],
        );
        cli(
            d,
            threads,
            &[
                "fit",
                "--family",
                "family.json",
                "--data",
                "data.csv",
                "--out",
                "fit.json",
            ],
        );
        cli(
            d,
            threads,
            &[
                "experiment",
                "--kind",
                "recovery",
                "--m",
                "50,500",
                "--trials",
                "40",
                "--seed",
                "3",
                "--out",
                "recovery.csv",
            ],
        );
        cli(
            d,
            threads,
            &[
                "experiment",
                "--kind",
                "gap",
                "--m",
                "100",
                "--trials",
                "40",
                "--seed",
                "3",
                "--format",
                "json",
                "--out",
                "gap.json",
            ],
        );
        cli(
            d,
            threads,
            &[
                "experiment",
                "--kind",
                "fano",
                "--trials",
                "200",
                "--seed",
                "3",
                "--out",
                "fano.csv",
            ],
        );
        let bytes: Vec<Vec<u8>> = outputs
            .iter()
            .map(|f| std::fs::read(d.join(f)).unwrap())
            .collect();
        runs.push(bytes);
    }
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    report(
        9,
        "determinism across 1/4/16 threads",
        same,
        &format!("{} output files compared byte for byte", outputs.len()),
        start.elapsed(),
        None,
    );
}

#[test]
fn criterion_10_two_player_count_oracle() {
    let start = Instant::now();
    let grid = [-1.0, 0.0, 1.0];
    let spec = GridSpec::new(2, 1, vec![2, 2], grid.to_vec()).unwrap();
    let family = enumerate_psne_sets(&spec, EnumerationLimits::default()).unwrap();
    let oracle = bimatrix_psne_sets(&grid);
    let ours: std::collections::BTreeSet<Vec<u64>> = family
        .candidates()
        .iter()
        .map(|c| c.indices().to_vec())
        .collect();
    report(
        10,
        "d(H) two-player oracle",
        family.len() == oracle.len() && ours == oracle,
        &format!(
            "polymatrix family {} sets, bimatrix brute force {} sets",
            family.len(),
            oracle.len()
        ),
        start.elapsed(),
        Some(Duration::from_secs(120)),
    );
}
