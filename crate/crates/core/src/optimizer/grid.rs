//! Exhaustive grid feasibility search over `F` with a descending γ sweep.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{gram_min_eigenvalue, stabilizes, OptimizationResult, SearchConfig, SearchMode, PD_TOL};
use crate::error::Result;
use crate::lti::StateSpaceModel;

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + i as f64 * step).collect()
}

/// Candidate gains in grid order (last entry varies fastest), or uniform
/// random samples when `m·n` exceeds `exhaustive_max_entries`.
fn candidates(config: &SearchConfig) -> Box<dyn Fn(usize) -> DMatrix<f64> + Sync + '_> {
    let (m, n) = config.f_min.shape();
    if m * n > config.exhaustive_max_entries {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let samples: Vec<DMatrix<f64>> = (0..config.random_candidates)
            .map(|_| {
                DMatrix::from_fn(m, n, |i, j| {
                    rng.random_range(config.f_min[(i, j)]..=config.f_max[(i, j)])
                })
            })
            .collect();
        return Box::new(move |idx| samples[idx].clone());
    }
    // row-major entry order
    let axes: Vec<Vec<f64>> = (0..m * n)
        .map(|e| {
            let (i, j) = (e / n, e % n);
            axis(config.f_min[(i, j)], config.f_max[(i, j)], config.df)
        })
        .collect();
    Box::new(move |mut idx| {
        let mut f = DMatrix::zeros(m, n);
        for e in (0..m * n).rev() {
            let len = axes[e].len();
            f[(e / n, e % n)] = axes[e][idx % len];
            idx /= len;
        }
        f
    })
}

fn candidate_count(config: &SearchConfig) -> usize {
    let (m, n) = config.f_min.shape();
    if m * n > config.exhaustive_max_entries {
        return config.random_candidates;
    }
    (0..m * n)
        .map(|e| axis(config.f_min[(e / n, e % n)], config.f_max[(e / n, e % n)], config.df).len())
        .product()
}

/// Feasibility search: for γ from `gamma_max` down to `gamma_min`, return the
/// first stabilizing grid gain with `[Y −X][Y −X]ᵀ − γ² I ≻ 0`.
///
/// The test matrix is the row Gram matrix of the wide stacked operator, whose
/// smallest eigenvalue is the squared H₋ index. It is computed once per
/// candidate, so the γ sweep costs no further factorizations; the answer is
/// the same as re-testing every candidate for every γ.
pub fn grid_feasibility_search(
    plant: &StateSpaceModel,
    l: &DMatrix<f64>,
    config: &SearchConfig,
) -> Result<OptimizationResult> {
    config.validate(plant)?;
    let count = candidate_count(config);
    let make = candidates(config);
    let gram: Vec<Option<f64>> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let f = make(idx);
            if !stabilizes(plant, &f) {
                return Ok(None);
            }
            gram_min_eigenvalue(plant, l, &f, config.s).map(Some)
        })
        .collect::<Result<_>>()?;
    let best = gram.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Ok(OptimizationResult::infeasible(SearchMode::GridFeasibility, count));
    }
    for gamma in config.gamma_grid() {
        let g2 = gamma * gamma;
        if best - g2 <= PD_TOL {
            continue;
        }
        let idx = gram
            .iter()
            .position(|v| v.is_some_and(|e| e - g2 > PD_TOL))
            .expect("best candidate passes");
        return Ok(OptimizationResult {
            f_star: Some(make(idx)),
            gamma_star: gamma,
            evaluations: count,
            mode: SearchMode::GridFeasibility,
            feasible: true,
            history: Vec::new(),
        });
    }
    Ok(OptimizationResult::infeasible(SearchMode::GridFeasibility, count))
}
