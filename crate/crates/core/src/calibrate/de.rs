//! Self-adaptive differential evolution (rand/1/bin) over the calibration
//! box. Each member carries its own mutation factor and crossover rate;
//! with probability 0.1 per generation a member redraws them, and the
//! redraw survives only if the trial it produced wins. J and gamma are
//! mutated and crossed in log space, where multiplicative parameters
//! behave additively. Everything is driven by one seeded ChaCha stream,
//! so runs are reproducible bit for bit.

use super::{CalibrationResult, ParamBounds, Theta};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability of redrawing a member's mutation factor per generation.
const TAU_FACTOR: f64 = 0.1;
/// Probability of redrawing a member's crossover rate per generation.
const TAU_CROSSOVER: f64 = 0.1;
/// Mutation factors are drawn uniformly from [0.1, 1.0].
const FACTOR_LO: f64 = 0.1;
const FACTOR_SPAN: f64 = 0.9;

/// Reflects a proposal back into [lo, hi]. Proposals land at most one box
/// width outside, so this terminates in at most a couple of folds.
fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    while v < lo || v > hi {
        v = if v < lo { 2.0 * lo - v } else { 2.0 * hi - v };
    }
    v
}

/// Three distinct population indices, all different from `skip`.
fn pick_distinct(rng: &mut ChaCha8Rng, pop_size: usize, skip: usize) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut chosen = 0;
    while chosen < 3 {
        let c = rng.gen_range(0..pop_size);
        if c != skip && !out[..chosen].contains(&c) {
            out[chosen] = c;
            chosen += 1;
        }
    }
    out
}

/// Minimizes `objective` over the box. Deterministic given `seed`; the
/// best member after `n_steps` generations is returned together with the
/// number of objective evaluations spent. Fully collapsed bounds shortcut
/// to a single evaluation of the only admissible point.
pub fn differential_evolution<O: FnMut(&Theta) -> Result<f64>>(
    mut objective: O,
    bounds: &ParamBounds,
    pop_size: usize,
    n_steps: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    bounds.validate()?;
    if pop_size < 8 {
        return Err(Error::InvalidArgument(format!(
            "population size must be at least 8, got {pop_size}"
        )));
    }
    if n_steps < 1 {
        return Err(Error::InvalidArgument(
            "need at least one optimization step".to_string(),
        ));
    }
    // search coordinates: F linear, J and gamma logarithmic
    let boxes: [[f64; 2]; 3] = [
        bounds.f,
        [bounds.j[0].ln(), bounds.j[1].ln()],
        [bounds.gamma[0].ln(), bounds.gamma[1].ln()],
    ];
    // zero-width dimensions report the bound itself, dodging exp(ln x) dust
    let theta_of = |x: &[f64; 3]| Theta {
        f: x[0],
        j: if bounds.j[0] == bounds.j[1] {
            bounds.j[0]
        } else {
            x[1].exp()
        },
        gamma: if bounds.gamma[0] == bounds.gamma[1] {
            bounds.gamma[0]
        } else {
            x[2].exp()
        },
    };
    let mut evaluations: u64 = 0;

    if boxes.iter().all(|b| b[0] == b[1]) {
        let theta = theta_of(&[boxes[0][0], boxes[1][0], boxes[2][0]]);
        let nll = objective(&theta)?;
        return Ok(CalibrationResult {
            theta_star: theta,
            nll,
            evaluations: 1,
            seed,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop: Vec<[f64; 3]> = Vec::with_capacity(pop_size);
    let mut costs: Vec<f64> = Vec::with_capacity(pop_size);
    let mut factors: Vec<f64> = Vec::with_capacity(pop_size);
    let mut crossovers: Vec<f64> = Vec::with_capacity(pop_size);
    for _ in 0..pop_size {
        let mut x = [0.0; 3];
        for (d, b) in boxes.iter().enumerate() {
            x[d] = b[0] + rng.gen::<f64>() * (b[1] - b[0]);
        }
        factors.push(FACTOR_LO + FACTOR_SPAN * rng.gen::<f64>());
        crossovers.push(rng.gen::<f64>());
        costs.push(objective(&theta_of(&x))?);
        evaluations += 1;
        pop.push(x);
    }

    for _ in 0..n_steps {
        for i in 0..pop_size {
            let factor = if rng.gen::<f64>() < TAU_FACTOR {
                FACTOR_LO + FACTOR_SPAN * rng.gen::<f64>()
            } else {
                factors[i]
            };
            let crossover = if rng.gen::<f64>() < TAU_CROSSOVER {
                rng.gen::<f64>()
            } else {
                crossovers[i]
            };
            let [r1, r2, r3] = pick_distinct(&mut rng, pop_size, i);
            let forced = rng.gen_range(0..3); // at least one mutated coordinate
            let mut trial = pop[i];
            for d in 0..3 {
                if d == forced || rng.gen::<f64>() < crossover {
                    let v = pop[r1][d] + factor * (pop[r2][d] - pop[r3][d]);
                    trial[d] = reflect(v, boxes[d][0], boxes[d][1]);
                }
            }
            let cost = objective(&theta_of(&trial))?;
            evaluations += 1;
            // greedy selection; <= lets equal-cost trials refresh the
            // member and keeps the adapted factor/crossover that produced them
            if cost <= costs[i] {
                pop[i] = trial;
                costs[i] = cost;
                factors[i] = factor;
                crossovers[i] = crossover;
            }
        }
    }

    let mut best = 0;
    for i in 1..pop_size {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    Ok(CalibrationResult {
        theta_star: theta_of(&pop[best]),
        nll: costs[best],
        evaluations,
        seed,
    })
}
