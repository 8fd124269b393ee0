//! Action spaces and the mixed-radix encoding of joint actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-player action counts. Player `i` (1-based) has actions `1..=counts[i-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ActionSpace {
    counts: Vec<usize>,
    joint_size: u64,
}

impl ActionSpace {
    /// Joint spaces larger than `u64::MAX` are rejected outright; the
    /// enumeration ceilings elsewhere are far smaller.
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::input("action space needs at least one player"));
        }
        let mut joint: u64 = 1;
        for (i, &c) in counts.iter().enumerate() {
            if c < 2 {
                return Err(Error::input(format!(
                    "player {} has {c} actions; at least 2 are required",
                    i + 1
                )));
            }
            joint = joint
                .checked_mul(c as u64)
                .ok_or_else(|| Error::input("joint action space overflows u64"))?;
        }
        Ok(ActionSpace {
            counts,
            joint_size: joint,
        })
    }

    pub fn binary(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn n_players(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// |A_i| for a 1-based player index.
    pub fn count(&self, player: usize) -> usize {
        self.counts[player - 1]
    }

    pub fn joint_size(&self) -> u64 {
        self.joint_size
    }

    /// ln |A|, summed per player so it never overflows.
    pub fn ln_joint_size(&self) -> f64 {
        self.counts.iter().map(|&c| (c as f64).ln()).sum()
    }

    /// The NLL scale factor c = ln(2|A|^2).
    pub fn nll_scale(&self) -> f64 {
        std::f64::consts::LN_2 + 2.0 * self.ln_joint_size()
    }

    pub fn check_player(&self, player: usize) -> Result<()> {
        if player == 0 || player > self.n_players() {
            return Err(Error::input(format!(
                "player {player} out of range 1..={}",
                self.n_players()
            )));
        }
        Ok(())
    }

    pub fn check(&self, x: &JointAction) -> Result<()> {
        if x.0.len() != self.n_players() {
            return Err(Error::input(format!(
                "joint action has {} components, space has {} players",
                x.0.len(),
                self.n_players()
            )));
        }
        for (i, (&a, &c)) in x.0.iter().zip(&self.counts).enumerate() {
            if a == 0 || a > c {
                return Err(Error::input(format!(
                    "action {a} of player {} out of range 1..={c}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Mixed-radix index with player 1 most significant.
    pub fn encode(&self, x: &JointAction) -> Result<u64> {
        self.check(x)?;
        Ok(self.encode_unchecked(x.actions()))
    }

    pub(crate) fn encode_unchecked(&self, actions: &[usize]) -> u64 {
        actions
            .iter()
            .zip(&self.counts)
            .fold(0u64, |acc, (&a, &c)| acc * c as u64 + (a - 1) as u64)
    }

    pub fn decode(&self, index: u64) -> Result<JointAction> {
        if index >= self.joint_size {
            return Err(Error::input(format!(
                "joint index {index} out of range 0..{}",
                self.joint_size
            )));
        }
        let mut actions = vec![0; self.n_players()];
        self.decode_into(index, &mut actions);
        Ok(JointAction(actions))
    }

    pub(crate) fn decode_into(&self, mut index: u64, out: &mut [usize]) {
        for (slot, &c) in out.iter_mut().zip(&self.counts).rev() {
            *slot = (index % c as u64) as usize + 1;
            index /= c as u64;
        }
    }

    /// Advances `actions` to the next joint action in index order.
    /// Returns `false` after wrapping past the last one.
    pub(crate) fn step(&self, actions: &mut [usize]) -> bool {
        for (slot, &c) in actions.iter_mut().zip(&self.counts).rev() {
            if *slot < c {
                *slot += 1;
                return true;
            }
            *slot = 1;
        }
        false
    }
}

impl TryFrom<Vec<usize>> for ActionSpace {
    type Error = Error;
    fn try_from(counts: Vec<usize>) -> Result<Self> {
        ActionSpace::new(counts)
    }
}

impl From<ActionSpace> for Vec<usize> {
    fn from(space: ActionSpace) -> Self {
        space.counts
    }
}

/// A joint action with 1-based per-player actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAction(Vec<usize>);

impl JointAction {
    pub fn new(actions: Vec<usize>) -> Self {
        JointAction(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// Action of a 1-based player.
    pub fn get(&self, player: usize) -> usize {
        self.0[player - 1]
    }

    /// Copy with player `i` switched to action `a`.
    pub fn with(&self, player: usize, action: usize) -> Self {
        let mut v = self.0.clone();
        v[player - 1] = action;
        JointAction(v)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for JointAction {
    fn from(v: Vec<usize>) -> Self {
        JointAction(v)
    }
}
