//! Exact maximum-likelihood estimation over candidate PSNE sets.
//!
//! The scaled NLL depends on a game only through its PSNE set, so the
//! estimator searches over sets. Which sets are realizable by sparse
//! polymatrix games is determined by enumerating games whose potentials
//! come from a finite grid.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PolymatrixGame, DEFAULT_JOINT_CEILING};
use crate::mixture::{Dataset, MixtureInterval, MixtureModel};
use crate::psne_set::PsneSet;
use crate::space::ActionSpace;

/// Offset above the open lower endpoint of the q interval used when the
/// unconstrained optimum falls at or below it.
pub const LOWER_CLAMP_OFFSET: f64 = 1e-9;

/// Default ceiling on the number of games a grid enumeration may visit.
pub const DEFAULT_GAME_CEILING: u128 = 1_000_000_000;

/// Default grid of potential values.
pub const DEFAULT_GRID: [f64; 3] = [-1.0, 0.0, 1.0];

/// Limits for grid-game based family construction.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationLimits {
    /// Joint action space ceiling.
    pub joint: u64,
    /// Ceiling on total games for the streaming enumeration, and on local
    /// configurations per player for the factorized one.
    pub games: u128,
    /// Ceiling on distinct partial intersections kept at any stage.
    pub candidates: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            joint: DEFAULT_JOINT_CEILING,
            games: DEFAULT_GAME_CEILING,
            candidates: 10_000_000,
        }
    }
}

/// Grid-game parameters: n players, at most k parents each, potentials from
/// `grid` after fixing `u_ii(1) = 0` and `u_ij(1, ·) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k: usize,
    pub actions: Vec<usize>,
    pub grid: Vec<f64>,
}

impl GridSpec {
    pub fn new(n: usize, k: usize, actions: Vec<usize>, grid: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::input("grid games need n >= 2"));
        }
        if actions.len() != n {
            return Err(Error::input(format!(
                "{} action counts given for n = {n}",
                actions.len()
            )));
        }
        if k > n - 1 {
            return Err(Error::input(format!("k = {k} exceeds n - 1 = {}", n - 1)));
        }
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("grid must be a nonempty set of finite values"));
        }
        ActionSpace::new(actions.clone())?;
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(GridSpec { k, actions, grid })
    }

    pub fn n(&self) -> usize {
        self.actions.len()
    }

    pub fn space(&self) -> ActionSpace {
        ActionSpace::new(self.actions.clone()).expect("validated")
    }

    fn local_spaces(&self) -> Vec<LocalSpace> {
        (1..=self.n()).map(|i| LocalSpace::new(self, i)).collect()
    }

    /// Number of games the stream yields (saturating).
    pub fn game_count(&self) -> u128 {
        self.local_spaces()
            .iter()
            .fold(1u128, |acc, l| acc.saturating_mul(l.total))
    }
}

/// One player's choices: parent set and normalized potentials.
#[derive(Debug, Clone)]
struct LocalSpace {
    player: usize,
    /// (parent set, number of potential assignments for it)
    parent_sets: Vec<(Vec<usize>, u128)>,
    total: u128,
}

impl LocalSpace {
    fn new(spec: &GridSpec, player: usize) -> Self {
        let others: Vec<usize> = (1..=spec.n()).filter(|&j| j != player).collect();
        let rows = spec.actions[player - 1] - 1;
        let g = spec.grid.len() as u128;
        let mut parent_sets = Vec::new();
        for size in 0..=spec.k {
            for set in combinations(&others, size) {
                let free = rows * (1 + set.iter().map(|&j| spec.actions[j - 1]).sum::<usize>());
                let count = (0..free).fold(1u128, |acc, _| acc.saturating_mul(g));
                parent_sets.push((set, count));
            }
        }
        let total = parent_sets
            .iter()
            .fold(0u128, |acc, (_, c)| acc.saturating_add(*c));
        LocalSpace {
            player,
            parent_sets,
            total,
        }
    }

    /// Writes local configuration `index` for this player into `game`.
    fn apply(&self, spec: &GridSpec, mut index: u128, game: &mut PolymatrixGame) {
        let mut chosen = None;
        for (set, count) in &self.parent_sets {
            if index < *count {
                chosen = Some(set);
                break;
            }
            index -= count;
        }
        let parents = chosen.expect("local index in range");
        let g = spec.grid.len() as u128;
        let mut next = || {
            let v = spec.grid[(index % g) as usize];
            index /= g;
            v
        };
        let i = self.player;
        let ai = spec.actions[i - 1];
        let mut unary = vec![0.0; ai];
        for u in unary.iter_mut().skip(1) {
            *u = next();
        }
        game.set_unary(i, unary).expect("shape");
        for &j in parents {
            let aj = spec.actions[j - 1];
            let mut table = vec![0.0; ai * aj];
            for t in table.iter_mut().skip(aj) {
                *t = next();
            }
            game.set_pairwise(i, j, table).expect("shape");
        }
    }

    fn game(&self, spec: &GridSpec, index: u128) -> PolymatrixGame {
        let mut game = PolymatrixGame::zeros(spec.space());
        self.apply(spec, index, &mut game);
        game
    }
}

/// All size-`k` subsets of `items`, in lexicographic order.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for t in start..items.len() {
            if items.len() - t < k - cur.len() {
                break;
            }
            cur.push(items[t]);
            rec(items, k, t + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Stream of every normalized grid game, in odometer order over players'
/// local configurations (player n varies fastest).
pub struct GridGames {
    spec: GridSpec,
    locals: Vec<LocalSpace>,
    odometer: Vec<u128>,
    done: bool,
}

impl Iterator for GridGames {
    type Item = PolymatrixGame;

    fn next(&mut self) -> Option<PolymatrixGame> {
        if self.done {
            return None;
        }
        let mut game = PolymatrixGame::zeros(self.spec.space());
        for (local, &idx) in self.locals.iter().zip(&self.odometer) {
            local.apply(&self.spec, idx, &mut game);
        }
        self.done = true;
        for (slot, local) in self.odometer.iter_mut().zip(&self.locals).rev() {
            *slot += 1;
            if *slot < local.total {
                self.done = false;
                break;
            }
            *slot = 0;
        }
        Some(game)
    }
}

pub fn enumerate_grid_games(spec: &GridSpec, ceiling: u128) -> Result<GridGames> {
    let estimate = spec.game_count();
    if estimate > ceiling {
        return Err(Error::Capacity {
            what: "grid-game enumeration".into(),
            estimate,
            ceiling,
        });
    }
    let locals = spec.local_spaces();
    Ok(GridGames {
        spec: spec.clone(),
        odometer: vec![0; locals.len()],
        locals,
        done: false,
    })
}

/// Where a candidate family came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    GridGames { n: usize, k: usize, grid: Vec<f64> },
    AllSubsets { max_size: usize },
    Explicit,
}

/// A deduplicated list of admissible PSNE sets over one action space.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFamily {
    space: ActionSpace,
    candidates: Vec<PsneSet>,
    provenance: Provenance,
}

impl CandidateFamily {
    /// Validates every candidate and drops repeats, keeping first occurrences.
    pub fn new(
        space: ActionSpace,
        candidates: Vec<PsneSet>,
        provenance: Provenance,
    ) -> Result<Self> {
        let joint = space.joint_size();
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(candidates.len());
        for c in candidates {
            if c.is_empty() || c.len() as u64 >= joint {
                return Err(Error::input(format!(
                    "candidate of size {} violates 1 <= |NE| <= {}",
                    c.len(),
                    joint - 1
                )));
            }
            if c.indices().last().is_some_and(|&x| x >= joint) {
                return Err(Error::input("candidate index outside the joint space"));
            }
            if seen.insert(c.clone()) {
                kept.push(c);
            }
        }
        Ok(CandidateFamily {
            space,
            candidates: kept,
            provenance,
        })
    }

    pub fn explicit(space: ActionSpace, candidates: Vec<PsneSet>) -> Result<Self> {
        Self::new(space, candidates, Provenance::Explicit)
    }

    /// Every subset of the joint space with `1 <= size <= max_size` (capped at |A| - 1).
    pub fn all_subsets(space: ActionSpace, max_size: usize, ceiling: u128) -> Result<Self> {
        let joint = space.joint_size();
        let top = (max_size as u64).min(joint - 1) as usize;
        let mut estimate = 0u128;
        let mut binom = 1u128;
        for s in 1..=top {
            binom = binom.saturating_mul((joint - s as u64 + 1) as u128) / s as u128;
            estimate = estimate.saturating_add(binom);
        }
        if estimate > ceiling {
            return Err(Error::Capacity {
                what: "all-subsets family".into(),
                estimate,
                ceiling,
            });
        }
        let items: Vec<usize> = (0..joint as usize).collect();
        let candidates = (1..=top)
            .flat_map(|s| combinations(&items, s))
            .map(|c| PsneSet::new(c.into_iter().map(|x| x as u64).collect()))
            .collect();
        Self::new(space, candidates, Provenance::AllSubsets { max_size })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn candidates(&self) -> &[PsneSet] {
        &self.candidates
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, set: &PsneSet) -> bool {
        self.candidates.contains(set)
    }

    pub fn position(&self, set: &PsneSet) -> Option<usize> {
        self.candidates.iter().position(|c| c == set)
    }
}

/// Distinct admissible PSNE sets of all normalized grid games, in canonical
/// order. `candidates.len()` is the empirical d(H) for the grid.
///
/// Computed player by player: a PSNE set is the intersection of the
/// players' best-response sets, and each player's potentials are chosen
/// independently, so the distinct sets are the distinct intersections of
/// per-player distinct best-response sets. The output equals that of
/// [`enumerate_psne_sets_by_games`].
pub fn enumerate_psne_sets(spec: &GridSpec, limits: EnumerationLimits) -> Result<CandidateFamily> {
    let space = spec.space();
    let joint = space.joint_size();
    if joint > limits.joint {
        return Err(Error::Capacity {
            what: "joint action space".into(),
            estimate: joint as u128,
            ceiling: limits.joint as u128,
        });
    }
    let locals = spec.local_spaces();
    if let Some(l) = locals.iter().find(|l| l.total > limits.games) {
        return Err(Error::Capacity {
            what: format!("local configurations of player {}", l.player),
            estimate: l.total,
            ceiling: limits.games,
        });
    }
    let mut partial: Vec<FixedBitSet> = {
        let mut full = FixedBitSet::with_capacity(joint as usize);
        full.insert_range(..);
        vec![full]
    };
    for local in &locals {
        let responses = best_response_sets(spec, local);
        partial = partial
            .par_iter()
            .fold(HashSet::new, |mut acc, cur| {
                for br in &responses {
                    let mut x = cur.clone();
                    x.intersect_with(br);
                    if !x.is_clear() {
                        acc.insert(x);
                    }
                }
                acc
            })
            .reduce(HashSet::new, |mut a, b| {
                a.extend(b);
                a
            })
            .into_iter()
            .collect();
        if partial.len() > limits.candidates {
            return Err(Error::Capacity {
                what: "distinct partial PSNE sets".into(),
                estimate: partial.len() as u128,
                ceiling: limits.candidates as u128,
            });
        }
    }
    let mut candidates: Vec<PsneSet> = partial
        .into_iter()
        .filter(|s| (s.count_ones(..) as u64) < joint)
        .map(|s| s.ones().map(|x| x as u64).collect())
        .collect();
    candidates.sort();
    CandidateFamily::new(space, candidates, grid_provenance(spec))
}

/// Distinct best-response sets `{x : x_i ∈ BR_i(x)}` over one player's
/// local configurations.
fn best_response_sets(spec: &GridSpec, local: &LocalSpace) -> Vec<FixedBitSet> {
    let space = spec.space();
    let joint = space.joint_size() as usize;
    let set: HashSet<FixedBitSet> = (0..local.total)
        .into_par_iter()
        .map(|idx| {
            let game = local.game(spec, idx);
            let mut bits = FixedBitSet::with_capacity(joint);
            let mut actions = vec![1; space.n_players()];
            for x in 0..joint {
                if game.is_best_response(local.player, &actions) {
                    bits.insert(x);
                }
                space.step(&mut actions);
            }
            bits
        })
        .collect();
    let mut out: Vec<FixedBitSet> = set.into_iter().collect();
    out.sort();
    out
}

fn grid_provenance(spec: &GridSpec) -> Provenance {
    Provenance::GridGames {
        n: spec.n(),
        k: spec.k,
        grid: spec.grid.clone(),
    }
}

/// Reference route: stream every grid game, enumerate its PSNE set, and
/// deduplicate. Exponentially slower than [`enumerate_psne_sets`].
pub fn enumerate_psne_sets_by_games(
    spec: &GridSpec,
    limits: EnumerationLimits,
) -> Result<CandidateFamily> {
    let space = spec.space();
    let joint = space.joint_size();
    let mut seen = HashSet::new();
    for game in enumerate_grid_games(spec, limits.games)? {
        let ne = game.enumerate_psne_with_ceiling(limits.joint)?;
        if !ne.is_empty() && (ne.len() as u64) < joint {
            seen.insert(ne);
        }
    }
    let mut candidates: Vec<PsneSet> = seen.into_iter().collect();
    candidates.sort();
    CandidateFamily::new(space, candidates, grid_provenance(spec))
}

/// Clamped minimizer of the NLL in q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QFit {
    pub q: f64,
    pub clamped: bool,
}

/// Projects the unconstrained optimum `target` onto
/// `[lower + LOWER_CLAMP_OFFSET, upper]`.
pub fn clamp_q(target: f64, interval: MixtureInterval) -> QFit {
    let lo = interval.lower + LOWER_CLAMP_OFFSET;
    if target <= interval.lower {
        QFit {
            q: lo,
            clamped: true,
        }
    } else if target > interval.upper {
        QFit {
            q: interval.upper,
            clamped: true,
        }
    } else {
        QFit {
            q: target,
            clamped: false,
        }
    }
}

/// The empirical NLL is convex in q with stationary point s/m.
pub fn optimal_q(psne: &PsneSet, data: &Dataset) -> Result<QFit> {
    if data.is_empty() {
        return Err(Error::domain("optimal q of an empty dataset"));
    }
    let interval = MixtureInterval::new(psne.len() as u64, data.space().joint_size())?;
    Ok(clamp_q(
        data.in_set_count(psne) as f64 / data.len() as f64,
        interval,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub psne: PsneSet,
    pub q_hat: f64,
    pub objective: f64,
    pub clamped: bool,
}

impl FitResult {
    pub fn model(&self, space: &ActionSpace) -> Result<MixtureModel> {
        MixtureModel::new(space.clone(), self.psne.clone(), self.q_hat)
    }
}

/// Per-joint-action sample counts.
enum Counts {
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

impl Counts {
    fn new(data: &Dataset) -> Self {
        let joint = data.space().joint_size();
        if joint <= 1 << 22 {
            let mut v = vec![0; joint as usize];
            for &x in data.indices() {
                v[x as usize] += 1;
            }
            Counts::Dense(v)
        } else {
            let mut h = HashMap::new();
            for &x in data.indices() {
                *h.entry(x).or_insert(0) += 1;
            }
            Counts::Sparse(h)
        }
    }

    fn in_set(&self, set: &PsneSet) -> u64 {
        match self {
            Counts::Dense(v) => set.iter().map(|x| v[x as usize]).sum(),
            Counts::Sparse(h) => set.iter().filter_map(|x| h.get(&x)).sum(),
        }
    }
}

fn better(a: &FitResult, b: &FitResult) -> std::cmp::Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| a.psne.canonical_cmp(&b.psne))
}

fn check_family(family: &CandidateFamily, space: &ActionSpace) -> Result<()> {
    if family.is_empty() {
        return Err(Error::domain("candidate family is empty"));
    }
    if family.space() != space {
        return Err(Error::input(
            "family and data are over different action spaces",
        ));
    }
    Ok(())
}

/// Empirical MLE over the family. Ties go to the smaller set, then the
/// lexicographically smaller index sequence.
pub fn fit_mle(family: &CandidateFamily, data: &Dataset) -> Result<FitResult> {
    check_family(family, data.space())?;
    if data.is_empty() {
        return Err(Error::domain("cannot fit an empty dataset"));
    }
    let counts = Counts::new(data);
    let m = data.len() as u64;
    let joint = data.space().joint_size();
    family
        .candidates()
        .par_iter()
        .map(|set| {
            let s = counts.in_set(set);
            let interval = MixtureInterval::new(set.len() as u64, joint)?;
            let fit = clamp_q(s as f64 / m as f64, interval);
            let model = MixtureModel::new(data.space().clone(), set.clone(), fit.q)?;
            Ok(FitResult {
                psne: set.clone(),
                q_hat: fit.q,
                objective: model.nll_from_count(s, m),
                clamped: fit.clamped,
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(better)
        .ok_or_else(|| Error::domain("candidate family is empty"))
}

/// Population MLE against a known truth: the in-set mass under the truth
/// plays the role of s/m.
pub fn population_mle(family: &CandidateFamily, truth: &MixtureModel) -> Result<FitResult> {
    check_family(family, truth.space())?;
    let space = truth.space();
    let joint = space.joint_size();
    let truth_ne = truth.psne();
    let r = truth_ne.len() as f64;
    let outside = (joint - truth_ne.len() as u64) as f64;
    let q_star = truth.q();
    family
        .candidates()
        .par_iter()
        .map(|set| {
            let both = set.intersection_len(truth_ne);
            let extra = set.len() - both;
            let mut mass = q_star * (both as f64 / r);
            if extra > 0 {
                mass += (1.0 - q_star) * (extra as f64 / outside);
            }
            let fit = clamp_q(mass, MixtureInterval::new(set.len() as u64, joint)?);
            let model = MixtureModel::new(space.clone(), set.clone(), fit.q)?;
            Ok(FitResult {
                psne: set.clone(),
                q_hat: fit.q,
                objective: model.expected_nll(truth)?,
                clamped: fit.clamped,
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(better)
        .ok_or_else(|| Error::domain("candidate family is empty"))
}
