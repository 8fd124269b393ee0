//! The PSNE/non-PSNE mixture distribution over joint actions and its
//! scaled negative log-likelihood.
//!
//! With probability q a joint action is drawn uniformly from the PSNE set,
//! otherwise uniformly from its complement. Everything here is computed from
//! set cardinalities in log space; nothing sums over the joint space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::psne_set::PsneSet;
use crate::space::{ActionSpace, JointAction};

/// The admissible signal levels `(|NE|/|A|, 1 - 1/(2|A|)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureInterval {
    /// Open endpoint.
    pub lower: f64,
    /// Closed endpoint.
    pub upper: f64,
}

impl MixtureInterval {
    pub fn new(psne_size: u64, joint_size: u64) -> Result<Self> {
        if psne_size == 0 || psne_size >= joint_size {
            return Err(Error::domain(format!(
                "PSNE set size {psne_size} must lie in 1..={}",
                joint_size.saturating_sub(1)
            )));
        }
        let a = joint_size as f64;
        Ok(MixtureInterval {
            lower: psne_size as f64 / a,
            upper: 1.0 - 1.0 / (2.0 * a),
        })
    }

    pub fn contains(&self, q: f64) -> bool {
        self.lower < q && q <= self.upper
    }
}

/// Convenience wrapper matching the interval constructor.
pub fn mixture_interval(psne_size: u64, joint_size: u64) -> Result<MixtureInterval> {
    MixtureInterval::new(psne_size, joint_size)
}

/// The distribution `P_{G,q}`, identified by the game's PSNE set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    space: ActionSpace,
    psne: PsneSet,
    q: f64,
}

impl MixtureModel {
    pub fn new(space: ActionSpace, psne: PsneSet, q: f64) -> Result<Self> {
        if let Some(&last) = psne.indices().last() {
            if last >= space.joint_size() {
                return Err(Error::input(format!(
                    "PSNE index {last} outside joint space of size {}",
                    space.joint_size()
                )));
            }
        }
        let interval = MixtureInterval::new(psne.len() as u64, space.joint_size())?;
        if !interval.contains(q) {
            return Err(Error::domain(format!(
                "q = {q} outside ({}, {}]",
                interval.lower, interval.upper
            )));
        }
        Ok(MixtureModel { space, psne, q })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn psne(&self) -> &PsneSet {
        &self.psne
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn interval(&self) -> MixtureInterval {
        MixtureInterval::new(self.psne.len() as u64, self.space.joint_size())
            .expect("validated at construction")
    }

    fn ne(&self) -> f64 {
        self.psne.len() as f64
    }

    fn complement(&self) -> f64 {
        (self.space.joint_size() - self.psne.len() as u64) as f64
    }

    /// ln p(x) for x inside the PSNE set.
    pub fn ln_pmf_in(&self) -> f64 {
        self.q.ln() - self.ne().ln()
    }

    /// ln p(x) for x outside the PSNE set.
    pub fn ln_pmf_out(&self) -> f64 {
        (1.0 - self.q).ln() - self.complement().ln()
    }

    pub fn pmf_index(&self, index: u64) -> f64 {
        if self.psne.contains(index) {
            self.q / self.ne()
        } else {
            (1.0 - self.q) / self.complement()
        }
    }

    pub fn pmf(&self, x: &JointAction) -> Result<f64> {
        Ok(self.pmf_index(self.space.encode(x)?))
    }

    /// Per-sample scaled NLL inside / outside the PSNE set.
    pub fn nll_in(&self) -> f64 {
        -self.ln_pmf_in() / self.space.nll_scale()
    }

    pub fn nll_out(&self) -> f64 {
        -self.ln_pmf_out() / self.space.nll_scale()
    }

    pub fn scaled_nll_index(&self, index: u64) -> f64 {
        if self.psne.contains(index) {
            self.nll_in()
        } else {
            self.nll_out()
        }
    }

    /// `-ln p(x) / ln(2|A|^2)`, always in [0, 1].
    pub fn scaled_nll(&self, x: &JointAction) -> Result<f64> {
        Ok(self.scaled_nll_index(self.space.encode(x)?))
    }

    /// Average scaled NLL from the in-set count `s` of `m` samples.
    pub fn nll_from_count(&self, s: u64, m: u64) -> f64 {
        let s_f = s as f64;
        let m_f = m as f64;
        (s_f * self.nll_in() + (m_f - s_f) * self.nll_out()) / m_f
    }

    pub fn empirical_nll(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::domain("empirical NLL of an empty dataset"));
        }
        self.check_space(data.space())?;
        Ok(self.nll_from_count(data.in_set_count(&self.psne), data.len() as u64))
    }

    /// `-(1/c) E_truth[ln p_self]`, from the four intersection cardinalities.
    pub fn expected_nll(&self, truth: &MixtureModel) -> Result<f64> {
        Ok(cross_entropy(truth, self)? / self.space.nll_scale())
    }

    /// Draws `m` i.i.d. joint-action indices, deterministically in `seed`.
    ///
    /// Each draw uses one uniform to pick the branch and one to pick within
    /// it. The complement is sampled by rejection when the PSNE set covers at
    /// most half the space, and by rank otherwise.
    pub fn sample_dataset(&self, m: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let joint = self.space.joint_size();
        let ne = self.psne.indices();
        let reject = 2 * ne.len() as u64 <= joint;
        let outside = joint - ne.len() as u64;
        let samples = (0..m)
            .map(|_| {
                if rng.random::<f64>() < self.q {
                    ne[rng.random_range(0..ne.len())]
                } else if reject {
                    loop {
                        let x = rng.random_range(0..joint);
                        if !self.psne.contains(x) {
                            break x;
                        }
                    }
                } else {
                    nth_outside(ne, rng.random_range(0..outside))
                }
            })
            .collect();
        Dataset {
            space: self.space.clone(),
            samples,
        }
    }

    fn check_space(&self, other: &ActionSpace) -> Result<()> {
        if other != &self.space {
            return Err(Error::input(
                "models/datasets are over different action spaces",
            ));
        }
        Ok(())
    }
}

/// The `rank`-th (0-based) index not in the sorted list `ne`.
fn nth_outside(ne: &[u64], rank: u64) -> u64 {
    let mut x = rank;
    for &e in ne {
        if e <= x {
            x += 1;
        } else {
            break;
        }
    }
    x
}

/// Cross-entropy `-E_truth[ln p_model]` in nats.
pub(crate) fn cross_entropy(truth: &MixtureModel, model: &MixtureModel) -> Result<f64> {
    model.check_space(truth.space())?;
    let a = truth.space.joint_size();
    let ne = truth.psne.len() as u64;
    let ne_m = model.psne.len() as u64;
    let both = truth.psne.intersection_len(&model.psne) as u64;
    let truth_only = ne - both;
    let model_only = ne_m - both;
    let neither = a - (ne + ne_m - both);
    let (q, in_m, out_m) = (truth.q, model.ln_pmf_in(), model.ln_pmf_out());
    let terms = [
        (both, ne, q, in_m),
        (truth_only, ne, q, out_m),
        (model_only, a - ne, 1.0 - q, in_m),
        (neither, a - ne, 1.0 - q, out_m),
    ];
    Ok(-terms
        .iter()
        .filter(|(count, ..)| *count > 0)
        .map(|&(count, of, mass, ln_p)| count as f64 / of as f64 * mass * ln_p)
        .sum::<f64>())
}

/// An ordered multiset of observed joint actions, stored as joint indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    space: ActionSpace,
    samples: Vec<u64>,
}

impl Dataset {
    pub fn new(space: ActionSpace, samples: Vec<u64>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|&&x| x >= space.joint_size()) {
            return Err(Error::input(format!("sample index {bad} out of range")));
        }
        Ok(Dataset { space, samples })
    }

    pub fn from_actions(space: ActionSpace, actions: &[JointAction]) -> Result<Self> {
        let samples = actions
            .iter()
            .map(|x| space.encode(x))
            .collect::<Result<_>>()?;
        Ok(Dataset { space, samples })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn indices(&self) -> &[u64] {
        &self.samples
    }

    pub fn joint_actions(&self) -> impl Iterator<Item = JointAction> + '_ {
        self.samples
            .iter()
            .map(|&i| self.space.decode(i).expect("validated index"))
    }

    /// Number of samples inside `set`.
    pub fn in_set_count(&self, set: &PsneSet) -> u64 {
        self.samples.iter().filter(|&&x| set.contains(x)).count() as u64
    }
}
