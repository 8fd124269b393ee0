//! Independent oracles shared by the integration targets. Nothing here calls
//! the library's own PSNE, likelihood or enumeration routines.
#![allow(dead_code)]

use std::collections::BTreeSet;

use psne_learn::{ActionSpace, PolymatrixGame};
use rand::Rng;

/// Mixed-radix decode, player 1 most significant.
pub fn decode(counts: &[usize], mut index: u64) -> Vec<usize> {
    let mut out = vec![0; counts.len()];
    for (slot, &c) in out.iter_mut().zip(counts).rev() {
        *slot = (index % c as u64) as usize + 1;
        index /= c as u64;
    }
    out
}

pub fn joint_size(counts: &[usize]) -> u64 {
    counts.iter().map(|&c| c as u64).product()
}

/// Player i's payoff at `x`, read straight from the potential tables.
pub fn raw_payoff(game: &PolymatrixGame, i: usize, x: &[usize]) -> f64 {
    let counts = game.space().counts();
    let mut u = game.unary(i)[x[i - 1] - 1];
    for &j in game.neighbors(i) {
        let table = game.pairwise(i, j).expect("edge table");
        u += table[(x[i - 1] - 1) * counts[j - 1] + x[j - 1] - 1];
    }
    u
}

/// True iff no player has a strictly profitable unilateral deviation.
pub fn brute_force_is_psne(game: &PolymatrixGame, x: &[usize]) -> bool {
    let counts = game.space().counts();
    (1..=counts.len()).all(|i| {
        let here = raw_payoff(game, i, x);
        (1..=counts[i - 1]).all(|a| {
            let mut y = x.to_vec();
            y[i - 1] = a;
            raw_payoff(game, i, &y) <= here
        })
    })
}

pub fn brute_force_psne(game: &PolymatrixGame) -> Vec<u64> {
    let counts = game.space().counts().to_vec();
    (0..joint_size(&counts))
        .filter(|&x| brute_force_is_psne(game, &decode(&counts, x)))
        .collect()
}

/// A random polymatrix game whose potentials are drawn from `grid`, with at
/// most `k` random parents per player.
pub fn random_grid_game<R: Rng>(
    rng: &mut R,
    actions: &[usize],
    k: usize,
    grid: &[f64],
) -> PolymatrixGame {
    let n = actions.len();
    let mut game = PolymatrixGame::zeros(ActionSpace::new(actions.to_vec()).unwrap());
    let pick = |rng: &mut R, len: usize| {
        (0..len)
            .map(|_| grid[rng.random_range(0..grid.len())])
            .collect::<Vec<_>>()
    };
    for i in 1..=n {
        game.set_unary(i, pick(rng, actions[i - 1])).unwrap();
        let degree = rng.random_range(0..=k);
        let mut others: Vec<usize> = (1..=n).filter(|&j| j != i).collect();
        for _ in 0..degree {
            let j = others.swap_remove(rng.random_range(0..others.len()));
            game.set_pairwise(i, j, pick(rng, actions[i - 1] * actions[j - 1]))
                .unwrap();
        }
    }
    game
}

/// Distinct PSNE sets with 1 <= |NE| <= 3 over all 2x2 bimatrix games whose
/// eight payoff entries range over `grid`. No polymatrix structure involved.
pub fn bimatrix_psne_sets(grid: &[f64]) -> BTreeSet<Vec<u64>> {
    let g = grid.len();
    let mut seen = BTreeSet::new();
    for code in 0..g.pow(8) {
        let mut c = code;
        let mut u = [0.0; 8];
        for slot in &mut u {
            *slot = grid[c % g];
            c /= g;
        }
        // u[0..4] row player, u[4..8] column player, entry (a, b) at 2a + b.
        let mut ne = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                let row_ok = u[2 * a + b] >= u[2 * (1 - a) + b];
                let col_ok = u[4 + 2 * a + b] >= u[4 + 2 * a + (1 - b)];
                if row_ok && col_ok {
                    ne.push((2 * a + b) as u64);
                }
            }
        }
        if !ne.is_empty() && ne.len() < 4 {
            seen.insert(ne);
        }
    }
    seen
}

/// Compensated sum.
pub fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Direct mixture log-likelihood of one joint action.
pub fn ln_pmf(joint: u64, ne: &[u64], q: f64, x: u64) -> f64 {
    if ne.contains(&x) {
        (q / ne.len() as f64).ln()
    } else {
        ((1.0 - q) / (joint - ne.len() as u64) as f64).ln()
    }
}
