//! PSNE membership as a conjunction of linear inequalities.
//!
//! For player i and alternative action a, `dot(phi[i][a], y_i(x))` equals
//! `u_i(x_i, x_{N(i)}) - u_i(a, x_{N(i)})`, so x is a PSNE iff every one of
//! the `Σ_i |A_i|` dot products is nonnegative. The feature vector has
//! `D(i) = (1 + |A_i|)(1 + Σ_{j≠i} |A_j|)` binary-valued entries laid out as
//! own-action indicators, own×other indicators, a constant, and negated
//! other-action indicators.

use crate::error::{Error, Result};
use crate::game::PolymatrixGame;
use crate::space::{ActionSpace, JointAction};

#[derive(Debug, Clone)]
pub struct LinearPsneForm {
    space: ActionSpace,
    /// `coefficients[i-1][a-1]`.
    coefficients: Vec<Vec<Vec<f64>>>,
}

impl LinearPsneForm {
    pub fn from_game(game: &PolymatrixGame) -> Self {
        let space = game.space().clone();
        let coefficients = (1..=space.n_players())
            .map(|i| {
                (1..=space.count(i))
                    .map(|a| coefficient_vector(game, i, a))
                    .collect()
            })
            .collect();
        LinearPsneForm {
            space,
            coefficients,
        }
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    /// D(i) for a 1-based player.
    pub fn dimension(&self, player: usize) -> usize {
        dimension(&self.space, player)
    }

    pub fn coefficients(&self, player: usize, action: usize) -> &[f64] {
        &self.coefficients[player - 1][action - 1]
    }

    /// The 0/±1 feature vector y for player i at x. It does not depend on
    /// the alternative action; that enters only through the coefficients.
    pub fn features(&self, player: usize, x: &JointAction) -> Result<Vec<f64>> {
        self.space.check_player(player)?;
        self.check_dimensions(x)?;
        let space = &self.space;
        let others: Vec<usize> = (1..=space.n_players()).filter(|&j| j != player).collect();
        let xi = x.get(player);
        let mut y = Vec::with_capacity(self.dimension(player));
        for b in 1..=space.count(player) {
            y.push(indicator(xi == b));
        }
        for &j in &others {
            for b in 1..=space.count(player) {
                for c in 1..=space.count(j) {
                    y.push(indicator(xi == b && x.get(j) == c));
                }
            }
        }
        y.push(-1.0);
        for &j in &others {
            for c in 1..=space.count(j) {
                y.push(-indicator(x.get(j) == c));
            }
        }
        Ok(y)
    }

    /// True iff all `Σ_i |A_i|` inequalities `dot(phi, y) >= 0` hold.
    pub fn is_psne_linear(&self, x: &JointAction) -> Result<bool> {
        self.check_dimensions(x)?;
        for i in 1..=self.space.n_players() {
            let y = self.features(i, x)?;
            for phi in &self.coefficients[i - 1] {
                if dot(phi, &y) < 0.0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn check_dimensions(&self, x: &JointAction) -> Result<()> {
        self.space.check(x).map_err(|e| match e {
            Error::Input(m) => Error::input(format!("dimension mismatch: {m}")),
            other => other,
        })
    }
}

fn dimension(space: &ActionSpace, player: usize) -> usize {
    let others: usize = (1..=space.n_players())
        .filter(|&j| j != player)
        .map(|j| space.count(j))
        .sum();
    (1 + space.count(player)) * (1 + others)
}

fn coefficient_vector(game: &PolymatrixGame, i: usize, a: usize) -> Vec<f64> {
    let space = game.space();
    let ai = space.count(i);
    let others: Vec<usize> = (1..=space.n_players()).filter(|&j| j != i).collect();
    let mut phi = Vec::with_capacity(dimension(space, i));
    phi.extend_from_slice(game.unary(i));
    for &j in &others {
        match game.pairwise(i, j) {
            Some(table) => phi.extend_from_slice(table),
            None => phi.extend(std::iter::repeat_n(0.0, ai * space.count(j))),
        }
    }
    phi.push(game.unary(i)[a - 1]);
    for &j in &others {
        let aj = space.count(j);
        match game.pairwise(i, j) {
            Some(table) => phi.extend_from_slice(&table[(a - 1) * aj..a * aj]),
            None => phi.extend(std::iter::repeat_n(0.0, aj)),
        }
    }
    phi
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coordination() -> PolymatrixGame {
        let mut g = PolymatrixGame::zeros(ActionSpace::binary(2).unwrap());
        let eq = vec![1.0, 0.0, 0.0, 1.0];
        g.set_pairwise(1, 2, eq.clone()).unwrap();
        g.set_pairwise(2, 1, eq).unwrap();
        g
    }

    #[test]
    fn coordination_inequalities() {
        let form = LinearPsneForm::from_game(&coordination());
        assert_eq!(form.dimension(1), 9);
        assert!(form.is_psne_linear(&vec![1, 1].into()).unwrap());
        assert!(!form.is_psne_linear(&vec![1, 2].into()).unwrap());
        // At (1,2) player 1 deviating to 2 gains 1: margin is 0 - 1 = -1.
        let y = form.features(1, &vec![1, 2].into()).unwrap();
        assert_eq!(dot(form.coefficients(1, 2), &y), -1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let form = LinearPsneForm::from_game(&coordination());
        assert!(matches!(
            form.is_psne_linear(&vec![1, 1, 1].into()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn margins_equal_payoff_differences() {
        let mut g = PolymatrixGame::zeros(ActionSpace::new(vec![3, 2, 2]).unwrap());
        g.set_unary(1, vec![0.0, 2.0, -1.0]).unwrap();
        g.set_pairwise(1, 3, vec![1.0, -1.0, 0.0, 3.0, 2.0, 0.0])
            .unwrap();
        g.set_pairwise(2, 1, vec![1.0, 0.0, -2.0, 0.0, 1.0, 1.0])
            .unwrap();
        let form = LinearPsneForm::from_game(&g);
        let s = g.space().clone();
        for idx in 0..s.joint_size() {
            let x = s.decode(idx).unwrap();
            for i in 1..=3 {
                let y = form.features(i, &x).unwrap();
                assert_eq!(y.len(), form.dimension(i));
                for a in 1..=s.count(i) {
                    let expected = g.payoff(i, &x).unwrap() - g.payoff(i, &x.with(i, a)).unwrap();
                    assert_eq!(dot(form.coefficients(i, a), &y), expected);
                }
            }
        }
    }
}
