//! Experiment configuration: flat `key = value` text, overridable by flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::DEFAULT_GRID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Recovery,
    Gap,
    Fano,
}

impl ExperimentKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "recovery" => Some(ExperimentKind::Recovery),
            "gap" => Some(ExperimentKind::Gap),
            "fano" => Some(ExperimentKind::Fano),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Recovery => "recovery",
            ExperimentKind::Gap => "gap",
            ExperimentKind::Fano => "fano",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub k: usize,
    pub actions: Vec<usize>,
    pub grid: Vec<f64>,
    /// Signal level of the truth. For `fano` this is the q known to the
    /// decoder, 2/|A| unless overridden.
    pub q_star: f64,
    pub m_schedule: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
    /// Index of the truth in the candidate family (recovery/gap).
    pub truth_index: Option<usize>,
    /// Game file whose PSNE set is the truth (recovery/gap).
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

const KEYS: &[&str] = &[
    "kind",
    "n",
    "k",
    "actions",
    "grid",
    "q_star",
    "m_schedule",
    "trials",
    "seed",
    "delta",
    "truth_index",
    "truth",
    "out",
    "format",
];

/// Parses `key = value` lines (`#` starts a comment) into a raw map.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: no as u64 + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        map.insert(normalize_key(key), value.trim().to_string());
    }
    Ok(map)
}

fn normalize_key(key: &str) -> String {
    let key = key.trim().replace('-', "_");
    match key.as_str() {
        "q" => "q_star".into(),
        "m" => "m_schedule".into(),
        _ => key,
    }
}

fn list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect()
}

/// Resolves a config from file text and flag overrides (flags win).
/// Every violation is reported in one [`Error::Config`].
pub fn parse_config(
    text: Option<&str>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let mut raw = match text {
        Some(t) => parse_pairs(t)?,
        None => BTreeMap::new(),
    };
    for (k, v) in overrides {
        raw.insert(normalize_key(k), v.clone());
    }
    let mut errs = Vec::new();
    for key in raw.keys() {
        if !KEYS.contains(&key.as_str()) {
            errs.push(format!("unknown key {key:?}"));
        }
    }

    let kind = match raw.get("kind") {
        None => {
            errs.push("missing required key \"kind\" (recovery, gap or fano)".into());
            ExperimentKind::Recovery
        }
        Some(s) => ExperimentKind::parse(s).unwrap_or_else(|| {
            errs.push(format!("kind {s:?} is not one of recovery, gap, fano"));
            ExperimentKind::Recovery
        }),
    };
    let fano = kind == ExperimentKind::Fano;

    let get = |key: &str, default: &str| -> String {
        raw.get(key).cloned().unwrap_or_else(|| default.to_string())
    };
    let n_s = get("n", if fano { "6" } else { "4" });
    let k_s = get("k", if fano { "1" } else { "3" });
    let actions_s = get("actions", "");
    let grid_s = get("grid", "");
    let q_s = get("q_star", "");
    let m_s = get(
        "m_schedule",
        if fano { "0,6,12,18,30" } else { "10,100,1000" },
    );
    let trials_s = get("trials", if fano { "500" } else { "50" });
    let seed_s = get("seed", "0");
    let delta_s = get("delta", "0.1");
    let truth_index_s = get("truth_index", "");
    let truth_s = get("truth", "");
    let out_s = get("out", "");
    let format_s = get("format", "csv");

    let mut scalar = |key: &str, s: &str| -> Option<u64> {
        s.parse()
            .map_err(|_| errs.push(format!("{key} = {s:?} is not a nonnegative integer")))
            .ok()
    };
    let n = scalar("n", &n_s).unwrap_or(2) as usize;
    let k = scalar("k", &k_s).unwrap_or(0) as usize;
    let trials = scalar("trials", &trials_s).unwrap_or(1) as usize;
    let seed = scalar("seed", &seed_s).unwrap_or(0);
    let truth_index = if truth_index_s.is_empty() {
        None
    } else {
        scalar("truth_index", &truth_index_s).map(|v| v as usize)
    };

    let actions = if actions_s.is_empty() {
        vec![2; n]
    } else {
        list(&actions_s).unwrap_or_else(|| {
            errs.push(format!("actions = {actions_s:?} is not a list of integers"));
            vec![2; n]
        })
    };
    let grid = if grid_s.is_empty() {
        DEFAULT_GRID.to_vec()
    } else {
        list(&grid_s).unwrap_or_else(|| {
            errs.push(format!("grid = {grid_s:?} is not a list of numbers"));
            DEFAULT_GRID.to_vec()
        })
    };
    let m_schedule: Vec<u64> = list(&m_s).unwrap_or_else(|| {
        errs.push(format!("m_schedule = {m_s:?} is not a list of integers"));
        vec![1]
    });
    let delta: f64 = delta_s.parse().unwrap_or_else(|_| {
        errs.push(format!("delta = {delta_s:?} is not a number"));
        0.1
    });
    let format = match format_s.as_str() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => {
            errs.push(format!("format {other:?} is not csv or json"));
            OutputFormat::Csv
        }
    };

    let joint: f64 = actions.iter().map(|&a| a as f64).product();
    let q_star = if q_s.is_empty() {
        if fano {
            2.0 / joint
        } else {
            0.7
        }
    } else {
        q_s.parse().unwrap_or_else(|_| {
            errs.push(format!("q_star = {q_s:?} is not a number"));
            0.5
        })
    };

    if n < 2 {
        errs.push(format!("n = {n} must be at least 2"));
    }
    if actions.len() != n {
        errs.push(format!(
            "actions lists {} players but n = {n}",
            actions.len()
        ));
    }
    if actions.iter().any(|&a| a < 2) {
        errs.push("every player needs at least 2 actions".into());
    }
    if fano {
        if k == 0 || k >= n {
            errs.push(format!("fano needs 1 <= k <= n - 1, got k = {k}"));
        }
        if !(q_star > 1.0 / joint && q_star <= 1.0 - 1.0 / (2.0 * joint)) {
            errs.push(format!("q_star = {q_star} outside (1/|A|, 1 - 1/(2|A|)]"));
        }
    } else {
        if n >= 1 && k > n - 1 {
            errs.push(format!("k = {k} exceeds n - 1"));
        }
        if !(q_star > 0.0 && q_star < 1.0) {
            errs.push(format!("q_star = {q_star} outside (0, 1)"));
        }
        if m_schedule.first() == Some(&0) {
            errs.push("recovery and gap need every m >= 1".into());
        }
        if truth_index.is_some() && !truth_s.is_empty() {
            errs.push("truth_index and truth are mutually exclusive".into());
        }
    }
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        errs.push("grid must be a nonempty list of finite numbers".into());
    }
    if m_schedule.is_empty() {
        errs.push("m_schedule is empty".into());
    }
    if m_schedule.windows(2).any(|w| w[0] >= w[1]) {
        errs.push("m_schedule must be strictly increasing".into());
    }
    if trials == 0 {
        errs.push("trials must be at least 1".into());
    }
    if !(delta > 0.0 && delta < 1.0) {
        errs.push(format!("delta = {delta} outside (0, 1)"));
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let path = |s: String| (!s.is_empty()).then(|| PathBuf::from(s));
    Ok(ExperimentConfig {
        kind,
        n,
        k,
        actions,
        grid,
        q_star,
        m_schedule,
        trials,
        seed,
        delta,
        truth_index,
        truth: path(truth_s),
        out: path(out_s),
        format,
    })
}

impl ExperimentConfig {
    /// Canonical `key = value` echo; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let mut lines = vec![
            format!("kind = {}", self.kind.as_str()),
            format!("n = {}", self.n),
            format!("k = {}", self.k),
            format!(
                "actions = {}",
                join(
                    &self
                        .actions
                        .iter()
                        .map(|a| a.to_string())
                        .collect::<Vec<_>>()
                )
            ),
            format!(
                "grid = {}",
                join(&self.grid.iter().map(|g| g.to_string()).collect::<Vec<_>>())
            ),
            format!("q_star = {}", self.q_star),
            format!(
                "m_schedule = {}",
                join(
                    &self
                        .m_schedule
                        .iter()
                        .map(|m| m.to_string())
                        .collect::<Vec<_>>()
                )
            ),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!("delta = {}", self.delta),
            format!(
                "format = {}",
                match self.format {
                    OutputFormat::Csv => "csv",
                    OutputFormat::Json => "json",
                }
            ),
        ];
        if let Some(t) = self.truth_index {
            lines.push(format!("truth_index = {t}"));
        }
        if let Some(p) = &self.truth {
            lines.push(format!("truth = {}", p.display()));
        }
        if let Some(p) = &self.out {
            lines.push(format!("out = {}", p.display()));
        }
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn defaults_from_flags_only() {
        let c = parse_config(None, &flags(&[("kind", "recovery")])).unwrap();
        assert_eq!((c.n, c.k), (4, 3));
        assert_eq!(c.actions, vec![2; 4]);
        assert_eq!(c.grid, DEFAULT_GRID.to_vec());
        assert_eq!(c.q_star, 0.7);
        assert_eq!(c.trials, 50);
        let f = parse_config(None, &flags(&[("kind", "fano")])).unwrap();
        assert_eq!(f.q_star, 2.0 / 64.0);
        assert_eq!(f.m_schedule, vec![0, 6, 12, 18, 30]);
    }

    #[test]
    fn flags_override_file() {
        let text = "kind = gap\nn = 3 # players\ntrials = 7\n";
        let c = parse_config(Some(text), &flags(&[("trials", "9"), ("k", "1")])).unwrap();
        assert_eq!((c.kind, c.n, c.k, c.trials), (ExperimentKind::Gap, 3, 1, 9));
        assert_eq!(c.actions, vec![2; 3]);
    }

    #[test]
    fn all_violations_reported() {
        let text = "kind = recovery\nbogus = 1\nm_schedule = 5,5\ntrials = 0\nq_star = 1.5\n";
        match parse_config(Some(text), &[]) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config(Some("n = 3"), &[]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config(None, &flags(&[("kind", "fano"), ("q", "0.01")])),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config(Some("kind recovery"), &[]),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config(
            Some("kind = fano\nn = 5\nk = 2\nm = 0,3\nseed = 11\nout = r.csv\n"),
            &[],
        )
        .unwrap();
        let again = parse_config(Some(&c.to_text()), &[]).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
    }
}
