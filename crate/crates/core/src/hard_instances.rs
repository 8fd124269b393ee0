//! The "influential players" family used for the minimax lower bound, and
//! the exact MAP decoder over it.
//!
//! For a set π of k players, players in π have no parents and payoff
//! `[x_i = 1]`; every other player has parents π and payoff
//! `Σ_{j∈π} [x_i = 2, x_j = 1]`. The unique PSNE plays 1 on π and 2
//! elsewhere.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimator::combinations;
use crate::game::PolymatrixGame;
use crate::mixture::Dataset;
use crate::psne_set::PsneSet;
use crate::space::{ActionSpace, JointAction};

#[derive(Debug, Clone)]
pub struct InfluenceInstance {
    pub n: usize,
    pub k: usize,
    /// Sorted 1-based influential players.
    pub pi: Vec<usize>,
    pub game: PolymatrixGame,
    pub psne_action: JointAction,
}

impl InfluenceInstance {
    pub fn psne(&self) -> Result<PsneSet> {
        Ok(PsneSet::new(vec![self
            .game
            .space()
            .encode(&self.psne_action)?]))
    }

    /// JSON metadata recording π, for the game file.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({ "pi": self.pi, "k": self.k })
    }
}

fn check_pi(pi: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut sorted = pi.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != pi.len() || sorted.iter().any(|&i| i == 0 || i > n) {
        return Err(Error::input(format!(
            "{pi:?} is not a set of players in 1..={n}"
        )));
    }
    Ok(sorted)
}

/// The joint action with 1 on π and 2 elsewhere.
pub fn fano_psne(pi: &[usize], n: usize) -> Result<JointAction> {
    let pi = check_pi(pi, n)?;
    Ok(JointAction::new(
        (1..=n)
            .map(|i| if pi.binary_search(&i).is_ok() { 1 } else { 2 })
            .collect(),
    ))
}

/// Builds the game for π and verifies its single PSNE by enumeration.
/// Actions beyond 2 get zero potential.
pub fn fano_game(n: usize, k: usize, pi: &[usize], actions: &[usize]) -> Result<InfluenceInstance> {
    if k == 0 || k >= n {
        return Err(Error::input(format!(
            "need 1 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    if pi.len() != k {
        return Err(Error::input(format!("|pi| = {} but k = {k}", pi.len())));
    }
    if actions.len() != n {
        return Err(Error::input("one action count per player required"));
    }
    let pi = check_pi(pi, n)?;
    let space = ActionSpace::new(actions.to_vec())?;
    let mut game = PolymatrixGame::zeros(space.clone());
    for i in 1..=n {
        let ai = space.count(i);
        if pi.binary_search(&i).is_ok() {
            let mut unary = vec![0.0; ai];
            unary[0] = 1.0;
            game.set_unary(i, unary)?;
        } else {
            for &j in &pi {
                let aj = space.count(j);
                let mut table = vec![0.0; ai * aj];
                table[aj] = 1.0; // (x_i = 2, x_j = 1)
                game.set_pairwise(i, j, table)?;
            }
        }
    }
    let psne_action = fano_psne(&pi, n)?;
    let found = game.enumerate_psne()?;
    if found.indices() != [space.encode(&psne_action)?] {
        return Err(Error::Internal(format!(
            "influence game for pi = {pi:?} has PSNE set {:?}",
            found.indices()
        )));
    }
    Ok(InfluenceInstance {
        n,
        k,
        pi,
        game,
        psne_action,
    })
}

/// All k-subsets of 1..=n in lexicographic order.
pub fn hypotheses(n: usize, k: usize) -> Vec<Vec<usize>> {
    let players: Vec<usize> = (1..=n).collect();
    combinations(&players, k)
}

/// If `x` has exactly k coordinates equal to 1 and the rest equal to 2,
/// returns the π it encodes.
fn decode_pi(x: &[usize], k: usize) -> Option<Vec<usize>> {
    let mut pi = Vec::with_capacity(k);
    for (t, &a) in x.iter().enumerate() {
        match a {
            1 => pi.push(t + 1),
            2 => {}
            _ => return None,
        }
    }
    (pi.len() == k).then_some(pi)
}

/// MAP estimate of π under the known q.
///
/// With q > 1/|A| the likelihood of π is increasing in the number of
/// samples equal to x^π, so the decoder returns the π whose equilibrium is
/// observed most often; ties go to the lexicographically smallest π.
pub fn map_decoder(data: &Dataset, n: usize, k: usize, q: f64) -> Result<Vec<usize>> {
    let space = data.space();
    if space.n_players() != n {
        return Err(Error::input("dataset player count differs from n"));
    }
    if k == 0 || k >= n {
        return Err(Error::input(format!("need 1 <= k <= n - 1, got k = {k}")));
    }
    let a = space.joint_size() as f64;
    if !(q > 1.0 / a && q <= 1.0 - 1.0 / (2.0 * a)) {
        return Err(Error::domain(format!(
            "q = {q} outside (1/|A|, 1 - 1/(2|A|)]"
        )));
    }
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for &x in data.indices() {
        *counts.entry(x).or_insert(0) += 1;
    }
    let mut best: Option<(u64, Vec<usize>)> = None;
    for (&x, &c) in &counts {
        let Some(pi) = decode_pi(space.decode(x)?.actions(), k) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bc, bpi)) => c > *bc || (c == *bc && pi < *bpi),
        };
        if better {
            best = Some((c, pi));
        }
    }
    Ok(best.map(|(_, pi)| pi).unwrap_or_else(|| (1..=k).collect()))
}
