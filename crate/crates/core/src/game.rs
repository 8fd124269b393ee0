//! Polymatrix graphical games: payoffs, best responses and exact PSNE
//! enumeration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psne_set::PsneSet;
use crate::space::{ActionSpace, JointAction};

/// Default ceiling on the joint space size for exhaustive enumeration.
pub const DEFAULT_JOINT_CEILING: u64 = 1 << 24;

const CHUNK: u64 = 1 << 12;

/// A polymatrix game: player i's payoff is `u_ii(x_i) + Σ_{j∈N(i)} u_ij(x_i, x_j)`.
///
/// Players are 1-based. `pairwise[i][t]` is the row-major `|A_i| × |A_j|`
/// table for parent `j = neighbors[i][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymatrixGame {
    space: ActionSpace,
    neighbors: Vec<Vec<usize>>,
    unary: Vec<Vec<f64>>,
    pairwise: Vec<Vec<Vec<f64>>>,
}

impl PolymatrixGame {
    /// The all-zero game with no edges.
    pub fn zeros(space: ActionSpace) -> Self {
        let n = space.n_players();
        let unary = space.counts().iter().map(|&c| vec![0.0; c]).collect();
        PolymatrixGame {
            space,
            neighbors: vec![Vec::new(); n],
            unary,
            pairwise: vec![Vec::new(); n],
        }
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn n_players(&self) -> usize {
        self.space.n_players()
    }

    /// Parent set N(i), sorted.
    pub fn neighbors(&self, player: usize) -> &[usize] {
        &self.neighbors[player - 1]
    }

    pub fn unary(&self, player: usize) -> &[f64] {
        &self.unary[player - 1]
    }

    /// Row-major table u_ij, or `None` when `j ∉ N(i)`.
    pub fn pairwise(&self, i: usize, j: usize) -> Option<&[f64]> {
        let t = self.neighbors[i - 1].binary_search(&j).ok()?;
        Some(&self.pairwise[i - 1][t])
    }

    /// Largest parent-set size.
    pub fn max_in_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn set_unary(&mut self, player: usize, values: Vec<f64>) -> Result<()> {
        self.space.check_player(player)?;
        check_table(&values, self.space.count(player), "unary")?;
        self.unary[player - 1] = values;
        Ok(())
    }

    /// Sets u_ij, adding j to N(i) if needed.
    pub fn set_pairwise(&mut self, i: usize, j: usize, table: Vec<f64>) -> Result<()> {
        self.space.check_player(i)?;
        self.space.check_player(j)?;
        if i == j {
            return Err(Error::input(format!("player {i} cannot be its own parent")));
        }
        check_table(
            &table,
            self.space.count(i) * self.space.count(j),
            "pairwise",
        )?;
        let parents = &mut self.neighbors[i - 1];
        match parents.binary_search(&j) {
            Ok(t) => self.pairwise[i - 1][t] = table,
            Err(t) => {
                parents.insert(t, j);
                self.pairwise[i - 1].insert(t, table);
            }
        }
        Ok(())
    }

    /// Payoff of player i at joint action x.
    pub fn payoff(&self, player: usize, x: &JointAction) -> Result<f64> {
        self.space.check_player(player)?;
        self.space.check(x)?;
        Ok(self.local_payoff(player, x.get(player), x.actions()))
    }

    /// u_i(a, x_{N(i)}); `actions` are 1-based and assumed valid.
    pub(crate) fn local_payoff(&self, player: usize, a: usize, actions: &[usize]) -> f64 {
        let p = player - 1;
        let mut u = self.unary[p][a - 1];
        for (&j, table) in self.neighbors[p].iter().zip(&self.pairwise[p]) {
            let cols = self.space.count(j);
            u += table[(a - 1) * cols + actions[j - 1] - 1];
        }
        u
    }

    /// argmax over A_i of u_i(a, x_{N(i)}), ties included.
    pub fn best_responses(&self, player: usize, x: &JointAction) -> Result<Vec<usize>> {
        self.space.check_player(player)?;
        self.space.check(x)?;
        let payoffs: Vec<f64> = (1..=self.space.count(player))
            .map(|a| self.local_payoff(player, a, x.actions()))
            .collect();
        let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(payoffs
            .iter()
            .enumerate()
            .filter(|(_, &u)| u >= best)
            .map(|(a, _)| a + 1)
            .collect())
    }

    pub fn is_psne(&self, x: &JointAction) -> Result<bool> {
        self.space.check(x)?;
        Ok(self.is_psne_unchecked(x.actions()))
    }

    pub(crate) fn is_psne_unchecked(&self, actions: &[usize]) -> bool {
        (1..=self.n_players()).all(|i| self.is_best_response(i, actions))
    }

    pub(crate) fn is_best_response(&self, player: usize, actions: &[usize]) -> bool {
        let current = self.local_payoff(player, actions[player - 1], actions);
        (1..=self.space.count(player)).all(|a| self.local_payoff(player, a, actions) <= current)
    }

    /// Exact PSNE set using the default joint-space ceiling.
    pub fn enumerate_psne(&self) -> Result<PsneSet> {
        self.enumerate_psne_with_ceiling(DEFAULT_JOINT_CEILING)
    }

    /// Exact PSNE set. The index range is split into fixed chunks scanned in
    /// parallel; the result is independent of the worker count.
    pub fn enumerate_psne_with_ceiling(&self, ceiling: u64) -> Result<PsneSet> {
        let total = self.space.joint_size();
        if total > ceiling {
            return Err(Error::Capacity {
                what: "joint action space".into(),
                estimate: total as u128,
                ceiling: ceiling as u128,
            });
        }
        let chunks = total.div_ceil(CHUNK);
        let found: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(total);
                let mut actions = vec![0; self.n_players()];
                self.space.decode_into(start, &mut actions);
                let mut hits = Vec::new();
                for idx in start..end {
                    if self.is_psne_unchecked(&actions) {
                        hits.push(idx);
                    }
                    self.space.step(&mut actions);
                }
                hits
            })
            .collect();
        Ok(PsneSet::new(found.into_iter().flatten().collect()))
    }

    /// Serializable form; `metadata` is carried through verbatim.
    pub fn to_file(&self, metadata: Option<serde_json::Value>) -> GameFile {
        let key = |i: usize| i.to_string();
        let mut neighbors = BTreeMap::new();
        let mut unary = BTreeMap::new();
        let mut pairwise = BTreeMap::new();
        for i in 1..=self.n_players() {
            neighbors.insert(key(i), self.neighbors[i - 1].clone());
            unary.insert(key(i), self.unary[i - 1].clone());
            for (&j, table) in self.neighbors[i - 1].iter().zip(&self.pairwise[i - 1]) {
                pairwise.insert(format!("{i},{j}"), table.clone());
            }
        }
        GameFile {
            n: self.n_players(),
            actions: self.space.counts().to_vec(),
            neighbors,
            unary,
            pairwise,
            metadata,
        }
    }

    pub fn from_file(file: &GameFile) -> Result<Self> {
        if file.actions.len() != file.n {
            return Err(Error::input(format!(
                "\"n\" is {} but \"actions\" lists {} players",
                file.n,
                file.actions.len()
            )));
        }
        let space = ActionSpace::new(file.actions.clone())?;
        let mut game = PolymatrixGame::zeros(space);
        let player = |key: &str| -> Result<usize> {
            let i: usize = key
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad player key {key:?}")))?;
            game.space.check_player(i)?;
            Ok(i)
        };
        let mut unary = Vec::new();
        for (k, v) in &file.unary {
            unary.push((player(k)?, v.clone()));
        }
        let mut edges = Vec::new();
        for (k, v) in &file.pairwise {
            let (a, b) = k
                .split_once(',')
                .ok_or_else(|| Error::input(format!("bad pairwise key {k:?}")))?;
            edges.push((player(a)?, player(b)?, v.clone()));
        }
        for (k, parents) in &file.neighbors {
            let i = player(k)?;
            for &j in parents {
                if !file.pairwise.contains_key(&format!("{i},{j}")) {
                    return Err(Error::input(format!(
                        "neighbor {j} of player {i} has no pairwise table"
                    )));
                }
            }
        }
        for (i, v) in unary {
            game.set_unary(i, v)?;
        }
        for (i, j, t) in edges {
            let listed = file
                .neighbors
                .get(&i.to_string())
                .is_some_and(|p| p.contains(&j));
            if !listed {
                return Err(Error::input(format!(
                    "pairwise table {i},{j} present but {j} not in N({i})"
                )));
            }
            game.set_pairwise(i, j, t)?;
        }
        Ok(game)
    }
}

fn check_table(values: &[f64], expected: usize, what: &str) -> Result<()> {
    if values.len() != expected {
        return Err(Error::input(format!(
            "{what} table has {} entries, expected {expected}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::input(format!("{what} potential {v} is not finite")));
    }
    Ok(())
}

/// JSON layout of a game file. Player keys are 1-based; pairwise keys are
/// `"i,j"` with a row-major `|A_i| × |A_j|` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub n: usize,
    pub actions: Vec<usize>,
    #[serde(default)]
    pub neighbors: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub unary: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub pairwise: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// Embeds a binary weight-matrix game (`u_ii = w_ii x_i`, `u_ij = w_ij x_i x_j`,
/// spins in {-1,+1}) as a 2-action polymatrix game. Action 1 stands for -1 and
/// action 2 for +1. Only nonzero off-diagonal weights become edges.
pub fn embed_binary_weight_game(weights: &[Vec<f64>]) -> Result<PolymatrixGame> {
    let n = weights.len();
    if n == 0 || weights.iter().any(|row| row.len() != n) {
        return Err(Error::input("weight matrix must be square and nonempty"));
    }
    let mut game = PolymatrixGame::zeros(ActionSpace::binary(n)?);
    const SPIN: [f64; 2] = [-1.0, 1.0];
    for i in 1..=n {
        let row = &weights[i - 1];
        game.set_unary(i, SPIN.iter().map(|s| row[i - 1] * s).collect())?;
        for j in (1..=n).filter(|&j| j != i && row[j - 1] != 0.0) {
            let w = row[j - 1];
            let table = SPIN
                .iter()
                .flat_map(|si| SPIN.iter().map(move |sj| w * si * sj))
                .collect();
            game.set_pairwise(i, j, table)?;
        }
    }
    Ok(game)
}
