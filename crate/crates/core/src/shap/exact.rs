use rayon::prelude::*;

use super::{Coalition, Estimator, Explanation, ShapError, ValueFunction};

pub const DEFAULT_EXACT_CAP: usize = 12;

/// `s! (n − s − 1)! / n!` = `1 / (n · C(n − 1, s))`.
pub fn shapley_weight(n: usize, s: usize) -> f64 {
    let mut binom = 1.0;
    for j in 0..s {
        binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
    }
    1.0 / (n as f64 * binom)
}

/// Full enumeration over all 2ⁿ coalitions, each evaluated once.
pub fn exact_shapley(game: &dyn ValueFunction, cap: usize) -> Result<Explanation, ShapError> {
    let n = game.n_players();
    if n > cap {
        return Err(ShapError::TooManyPlayers { n, cap });
    }
    if n > 63 {
        return Err(ShapError::PlayerLimit(n));
    }
    if n > DEFAULT_EXACT_CAP {
        log::warn!("exact attribution over {n} features evaluates {} coalitions", 1u64 << n);
    }
    let table: Vec<f64> = (0..1u64 << n)
        .into_par_iter()
        .map(|bits| {
            let v = game.value(Coalition(bits))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ShapError::NonFinite(bits))
            }
        })
        .collect::<Result<_, _>>()?;
    let weights: Vec<f64> = (0..n).map(|s| shapley_weight(n, s)).collect();
    let mut phis = vec![0.0; n];
    for (i, phi) in phis.iter_mut().enumerate() {
        let bit = 1u64 << i;
        for bits in 0..1u64 << n {
            if bits & bit == 0 {
                let s = bits.count_ones() as usize;
                *phi += weights[s] * (table[(bits | bit) as usize] - table[bits as usize]);
            }
        }
    }
    Ok(Explanation {
        phi0: table[0],
        phis,
        fx: table[(1usize << n) - 1],
        estimator: Estimator::Exact,
    })
}
