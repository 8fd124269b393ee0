use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use psne_learn::config::{parse_config, OutputFormat};
use psne_learn::estimator::{
    enumerate_psne_sets, fit_mle, CandidateFamily, EnumerationLimits, GridSpec,
    DEFAULT_GAME_CEILING,
};
use psne_learn::game::DEFAULT_JOINT_CEILING;
use psne_learn::{experiments, io, theory, ActionSpace, Error, MixtureModel, Result};

/// Learn polymatrix graphical games from observed joint actions.
///
/// PSNE_LEARN_THREADS caps the worker count; it never changes output bytes.
#[derive(Parser, Debug)]
#[command(name = "psne-learn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Enumerate the candidate PSNE sets of grid games (or all small subsets).
    Enumerate(EnumerateArgs),
    /// Sample a dataset from a mixture model.
    Sample(SampleArgs),
    /// Exact MLE of a dataset over a candidate family.
    Fit(FitArgs),
    /// Print closed-form bound quantities as JSON.
    Theory(TheoryArgs),
    /// Run a seeded Monte Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long)]
    n: usize,
    /// Maximum parents per player.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Comma-separated action counts; defaults to 2 per player.
    #[arg(long, value_delimiter = ',')]
    actions: Option<Vec<usize>>,
    /// Comma-separated potential grid.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-1,0,1"
    )]
    grid: Vec<f64>,
    /// Use every subset of size 1..=MAX instead of grid games.
    #[arg(long, value_name = "MAX")]
    all_subsets: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_JOINT_CEILING)]
    joint_ceiling: u64,
    #[arg(long, default_value_t = DEFAULT_GAME_CEILING)]
    game_ceiling: u128,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Candidate family file; pick the PSNE set with --psne.
    #[arg(long, conflicts_with = "game", required_unless_present = "game")]
    family: Option<PathBuf>,
    /// Index into the family's candidates.
    #[arg(long, requires = "family")]
    psne: Option<usize>,
    /// Game file; its PSNE set is enumerated.
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    family: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write the fit here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    /// beta(r, q, |A|); needs --r, --q, --joint.
    #[arg(long)]
    beta: bool,
    /// Single-equilibrium KL; needs --q, --joint.
    #[arg(long)]
    kl: bool,
    /// Sufficient samples; needs --eps, --delta, --dh.
    #[arg(long)]
    m_sufficient: bool,
    /// Fano error lower bound; needs --m, --n, --k, --joint (q = 2/|A|).
    #[arg(long)]
    fano: bool,
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    joint: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    dh: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    actions: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    truth_index: Option<String>,
    #[arg(long)]
    truth: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PSNE_LEARN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Error::Config(vec![format!(
            "PSNE_LEARN_THREADS = {raw:?} is not a positive integer"
        )])
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Internal(e.to_string()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Enumerate(a) => enumerate(a),
        Command::Sample(a) => sample(a),
        Command::Fit(a) => fit(a),
        Command::Theory(a) => theory_cmd(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn enumerate(a: EnumerateArgs) -> Result<()> {
    let actions = a.actions.unwrap_or_else(|| vec![2; a.n]);
    eprintln!(
        "enumerate: n = {}, k = {}, actions = {:?}, grid = {:?}, all_subsets = {:?}",
        a.n, a.k, actions, a.grid, a.all_subsets
    );
    let family = match a.all_subsets {
        Some(max) => {
            if actions.len() != a.n {
                return Err(Error::Input(format!(
                    "{} action counts for n = {}",
                    actions.len(),
                    a.n
                )));
            }
            let space = ActionSpace::new(actions)?;
            if space.joint_size() > a.joint_ceiling {
                return Err(Error::Capacity {
                    what: "joint action space".into(),
                    estimate: space.joint_size() as u128,
                    ceiling: a.joint_ceiling as u128,
                });
            }
            CandidateFamily::all_subsets(space, max, a.game_ceiling)?
        }
        None => {
            let spec = GridSpec::new(a.n, a.k, actions, a.grid)?;
            let limits = EnumerationLimits {
                joint: a.joint_ceiling,
                games: a.game_ceiling,
                ..EnumerationLimits::default()
            };
            enumerate_psne_sets(&spec, limits)?
        }
    };
    eprintln!("{} candidate PSNE sets", family.len());
    io::write_family(&a.out, &family)
}

fn sample(a: SampleArgs) -> Result<()> {
    eprintln!(
        "sample: family = {:?}, psne = {:?}, game = {:?}, q = {}, m = {}, seed = {}",
        a.family, a.psne, a.game, a.q, a.m, a.seed
    );
    let (space, psne) = match (&a.family, &a.game) {
        (Some(path), _) => {
            let family = io::read_family(path)?;
            let idx = a
                .psne
                .ok_or_else(|| Error::Input("--family needs --psne".into()))?;
            let set = family.candidates().get(idx).cloned().ok_or_else(|| {
                Error::Input(format!(
                    "--psne {idx} out of range for {} candidates",
                    family.len()
                ))
            })?;
            (family.space().clone(), set)
        }
        (None, Some(path)) => {
            let game = io::read_game(path)?;
            (game.space().clone(), game.enumerate_psne()?)
        }
        (None, None) => return Err(Error::Input("need --family or --game".into())),
    };
    let model = MixtureModel::new(space, psne, a.q)?;
    io::write_dataset(&a.out, &model.sample_dataset(a.m, a.seed))
}

fn fit(a: FitArgs) -> Result<()> {
    eprintln!(
        "fit: family = {:?}, data = {:?}, out = {:?}",
        a.family, a.data, a.out
    );
    let family = io::read_family(&a.family)?;
    let data = io::read_dataset(&a.data, family.space())?;
    let result = fit_mle(&family, &data)?;
    match a.out {
        Some(path) => io::write_fit(&path, &result),
        None => {
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
    }
}

fn need<T>(v: Option<T>, flag: &str, what: &str, missing: &mut Vec<String>) -> Option<T> {
    if v.is_none() {
        missing.push(format!("--{what} requires --{flag}"));
    }
    v
}

fn theory_cmd(a: TheoryArgs) -> Result<()> {
    eprintln!("theory: {a:?}");
    if !(a.beta || a.kl || a.m_sufficient || a.fano) {
        return Err(Error::Config(vec![
            "request at least one of --beta, --kl, --m-sufficient, --fano".into(),
        ]));
    }
    let mut missing = Vec::new();
    let mut out = BTreeMap::new();
    if a.beta {
        let r = need(a.r, "r", "beta", &mut missing);
        let q = need(a.q, "q", "beta", &mut missing);
        let j = need(a.joint, "joint", "beta", &mut missing);
        if let (Some(r), Some(q), Some(j)) = (r, q, j) {
            out.insert("beta", json!(theory::beta(r, q, j)?));
        }
    }
    if a.kl {
        let q = need(a.q, "q", "kl", &mut missing);
        let j = need(a.joint, "joint", "kl", &mut missing);
        if let (Some(q), Some(j)) = (q, j) {
            out.insert("kl", json!(theory::fano_kl(q, j)?));
        }
    }
    if a.m_sufficient {
        let e = need(a.eps, "eps", "m-sufficient", &mut missing);
        let d = need(a.delta, "delta", "m-sufficient", &mut missing);
        let h = need(a.dh, "dh", "m-sufficient", &mut missing);
        if let (Some(e), Some(d), Some(h)) = (e, d, h) {
            out.insert("m_sufficient", json!(theory::sufficient_samples(e, d, h)?));
        }
    }
    if a.fano {
        let m = need(a.m, "m", "fano", &mut missing);
        let n = need(a.n, "n", "fano", &mut missing);
        let k = need(a.k, "k", "fano", &mut missing);
        let j = need(a.joint, "joint", "fano", &mut missing);
        if let (Some(m), Some(n), Some(k), Some(j)) = (m, n, k, j) {
            out.insert(
                "fano_bound",
                json!(theory::fano_error_lower_bound(m, n, k, j)?),
            );
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(missing));
    }
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let text = a.config.as_ref().map(std::fs::read_to_string).transpose()?;
    let flags = [
        ("kind", a.kind),
        ("n", a.n),
        ("k", a.k),
        ("actions", a.actions),
        ("grid", a.grid),
        ("q_star", a.q),
        ("m_schedule", a.m),
        ("trials", a.trials),
        ("seed", a.seed),
        ("delta", a.delta),
        ("truth_index", a.truth_index),
        ("truth", a.truth),
        ("format", a.format),
        ("out", a.out),
    ];
    let overrides: Vec<(String, String)> = flags
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect();
    let config = parse_config(text.as_deref(), &overrides)?;
    eprint!("{}", config.to_text());
    let table = experiments::run(&config)?;
    match &config.out {
        Some(path) => io::write_results(path, &table, config.format),
        None => {
            let bytes = match config.format {
                OutputFormat::Csv => io::results_to_csv(&table)?,
                OutputFormat::Json => io::results_to_json(&table)?,
            };
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}
