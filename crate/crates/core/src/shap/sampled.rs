use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Coalition, Estimator, Explanation, ShapError, ValueFunction};

/// Permutation Monte Carlo: the mean marginal contribution of each feature
/// over `m` seeded uniform orderings, with standard error `sd / √m`
/// (sample standard deviation).
pub fn sampled_shapley(game: &dyn ValueFunction, m: usize, seed: u64) -> Result<Explanation, ShapError> {
    if m < 2 {
        return Err(ShapError::TooFewPermutations(m));
    }
    let n = game.n_players();
    if n > 63 {
        return Err(ShapError::PlayerLimit(n));
    }
    let checked = |c: Coalition| -> Result<f64, ShapError> {
        let v = game.value(c)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ShapError::NonFinite(c.0))
        }
    };
    let phi0 = checked(Coalition::EMPTY)?;
    let fx = checked(Coalition::full(n))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base: Vec<usize> = (0..n).collect();
    let orders: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            base.shuffle(&mut rng);
            base.clone()
        })
        .collect();

    // marginals[p][i]: contribution of feature i in permutation p.
    let marginals: Vec<Vec<f64>> = orders
        .par_iter()
        .map(|order| {
            let mut out = vec![0.0; n];
            let mut prefix = Coalition::EMPTY;
            let mut prev = phi0;
            for (step, &i) in order.iter().enumerate() {
                prefix = prefix.with(i);
                let v = if step + 1 == n { fx } else { checked(prefix)? };
                out[i] = v - prev;
                prev = v;
            }
            Ok(out)
        })
        .collect::<Result<_, ShapError>>()?;

    let mf = m as f64;
    let mut phis = vec![0.0; n];
    for row in &marginals {
        for (p, v) in phis.iter_mut().zip(row) {
            *p += v;
        }
    }
    phis.iter_mut().for_each(|p| *p /= mf);
    let mut var = vec![0.0; n];
    for row in &marginals {
        for i in 0..n {
            var[i] += (row[i] - phis[i]).powi(2);
        }
    }
    let std_errors = var.iter().map(|v| (v / (mf - 1.0)).sqrt() / mf.sqrt()).collect();
    Ok(Explanation {
        phi0,
        phis,
        fx,
        estimator: Estimator::Sampled {
            permutations: m,
            seed,
            std_errors,
        },
    })
}
