//! Shared oracles for the integration suites. Everything here is
//! deliberately independent of the library's production algorithms:
//! dense matrix exponentials by scaling-and-squaring, direct linear
//! solves, closed forms, and plain Monte Carlo. When a library result and
//! an oracle agree, they agree across genuinely different routes.

#![allow(dead_code)] // each test target uses its own subset

use bdm_core::model::RateTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense master operator: column n holds the outflows of state n, so
/// d/dt P = A P with every column summing to zero.
pub fn dense_master_matrix(rates: &RateTable) -> Vec<Vec<f64>> {
    let dim = rates.n_states();
    let mut a = vec![vec![0.0; dim]; dim];
    for n in 0..dim {
        a[n][n] = -(rates.birth(n) + rates.death(n));
        if n + 1 < dim {
            a[n + 1][n] = rates.birth(n);
            a[n][n + 1] = rates.death(n + 1);
        }
    }
    a
}

fn mat_mul(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let xik = x[i][k];
            if xik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += xik * y[k][j];
            }
        }
    }
    out
}

/// e^{A t} by scaling-and-squaring with a Taylor core: scale so the
/// one-norm of the scaled matrix is at most 1/2, sum the series to far
/// below machine precision, then square back up.
pub fn matrix_exponential(a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = a.len();
    let one_norm = (0..n)
        .map(|j| (0..n).map(|i| (a[i][j] * t).abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if one_norm <= 0.5 {
        0
    } else {
        (one_norm / 0.5).log2().ceil() as u32
    };
    let scale = t / f64::powi(2.0, squarings as i32);
    let b: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().map(|&x| x * scale).collect())
        .collect();

    let mut result = vec![vec![0.0; n]; n];
    let mut term = vec![vec![0.0; n]; n];
    for i in 0..n {
        result[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for j in 1..=40u32 {
        term = mat_mul(&term, &b);
        let inv = 1.0 / j as f64;
        let mut largest = 0.0f64;
        for (ri, ti) in result.iter_mut().zip(term.iter_mut()) {
            for (r, v) in ri.iter_mut().zip(ti.iter_mut()) {
                *v *= inv;
                *r += *v;
                largest = largest.max(v.abs());
            }
        }
        if largest < 1e-300 {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

/// One column of e^{A t}: the distribution at time t from a delta at n0.
pub fn expm_column(rates: &RateTable, n0: usize, t: f64) -> Vec<f64> {
    let e = matrix_exponential(&dense_master_matrix(rates), t);
    (0..rates.n_states()).map(|n| e[n][n0]).collect()
}

/// Solves A p = 0 with sum(p) = 1 by Gaussian elimination with partial
/// pivoting (the normalization replaces the last, redundant row).
// indexed loops: row `row` is updated in place while row `col` is read
#[allow(clippy::needless_range_loop)]
pub fn dense_null_steady(rates: &RateTable) -> Vec<f64> {
    let dim = rates.n_states();
    let mut m = dense_master_matrix(rates);
    let mut rhs = vec![0.0; dim];
    m[dim - 1] = vec![1.0; dim];
    rhs[dim - 1] = 1.0;
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 0.0, "singular system beyond the known null space");
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = m[row][col] / p;
            if factor == 0.0 {
                continue;
            }
            for k in col..dim {
                let v = m[col][k];
                m[row][k] -= factor * v;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    (0..dim).map(|i| rhs[i] / m[i][i]).collect()
}

/// Mean first-passage times to `n_u` by a direct tridiagonal (Thomas)
/// solve of the backward equations
///   birth[n] (tau[n+1] - tau[n]) + death[n] (tau[n-1] - tau[n]) = -1,
/// with the row at n_u replaced by tau[n_u] = 0.
pub fn thomas_mfpt(rates: &RateTable, n_u: usize) -> Vec<f64> {
    let dim = rates.n_states();
    assert!(n_u > 0 && n_u < dim - 1, "barrier must be interior");
    // sub[i] tau[i-1] + diag[i] tau[i] + sup[i] tau[i+1] = rhs[i]
    let mut sub = vec![0.0; dim];
    let mut diag = vec![0.0; dim];
    let mut sup = vec![0.0; dim];
    let mut rhs = vec![-1.0; dim];
    for i in 0..dim {
        sub[i] = rates.death(i);
        diag[i] = -(rates.birth(i) + rates.death(i));
        sup[i] = rates.birth(i);
    }
    sub[n_u] = 0.0;
    diag[n_u] = 1.0;
    sup[n_u] = 0.0;
    rhs[n_u] = 0.0;
    // forward elimination
    for i in 1..dim {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    // back substitution
    let mut tau = vec![0.0; dim];
    tau[dim - 1] = rhs[dim - 1] / diag[dim - 1];
    for i in (0..dim - 1).rev() {
        tau[i] = (rhs[i] - sup[i] * tau[i + 1]) / diag[i];
    }
    tau
}

/// Half the L1 distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Binomial(n, p) probability mass function by the stable multiplicative
/// recurrence.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    pmf[0] = (1.0 - p).powi(n as i32);
    for k in 0..n {
        pmf[k + 1] = pmf[k] * ((n - k) as f64 / (k + 1) as f64) * (p / (1.0 - p));
    }
    pmf
}

/// Closed-form transition row for fully irrational agents (beta = 0):
/// every agent flips independently at rate gamma/2 in both directions, so
/// each initially-up agent is still up with probability (1 + e^{-gamma t})/2,
/// each initially-down agent has flipped up with probability
/// (1 - e^{-gamma t})/2, and the count is the convolution of two binomials.
pub fn telegraph_row(n_agents: usize, n0: usize, gamma: f64, t: f64) -> Vec<f64> {
    let decay = (-gamma * t).exp();
    let stay_up = 0.5 * (1.0 + decay);
    let flip_up = 0.5 * (1.0 - decay);
    let from_up = binomial_pmf(n0, stay_up);
    let from_down = binomial_pmf(n_agents - n0, flip_up);
    let mut row = vec![0.0; n_agents + 1];
    for (i, &a) in from_up.iter().enumerate() {
        for (j, &b) in from_down.iter().enumerate() {
            row[i + j] += a * b;
        }
    }
    row
}

/// Kolmogorov-Smirnov statistic of sorted samples against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    d
}

/// Minimal independent jump-chain simulator: runs from `n0` until the
/// state hits `target`, returning the elapsed time. Not the library SSA --
/// a bare loop written against the rate table directly.
fn jump_until(rates: &RateTable, n0: usize, target: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut n = n0;
    let mut t = 0.0;
    while n != target {
        let total = rates.birth(n) + rates.death(n);
        assert!(total > 0.0, "walker froze before reaching the target");
        t += -(1.0 - rng.gen::<f64>()).ln() / total;
        if rng.gen::<f64>() * total < rates.birth(n) {
            n += 1;
        } else {
            n -= 1;
        }
    }
    t
}

/// Monte Carlo mean first-passage time to `target` with the start drawn
/// from `start_weights` (restricted, unnormalized). Returns (mean,
/// standard error).
pub fn mc_mean_escape_time(
    rates: &RateTable,
    start_weights: &[(usize, f64)],
    target: usize,
    runs: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_w: f64 = start_weights.iter().map(|&(_, w)| w).sum();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..runs {
        let mut pick = rng.gen::<f64>() * total_w;
        let mut n0 = start_weights[0].0;
        for &(n, w) in start_weights {
            n0 = n;
            pick -= w;
            if pick <= 0.0 {
                break;
            }
        }
        let t = jump_until(rates, n0, target, &mut rng);
        sum += t;
        sumsq += t * t;
    }
    let mean = sum / runs as f64;
    let var = (sumsq / runs as f64 - mean * mean).max(0.0);
    (mean, (var / runs as f64).sqrt())
}

/// Monte Carlo absorption frequency: fraction of walkers from `start`
/// hitting `n_hi` before `n_lo`. Returns (frequency, binomial standard
/// error).
pub fn mc_absorption_frequency(
    rates: &RateTable,
    n_lo: usize,
    n_hi: usize,
    start: usize,
    runs: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..runs {
        let mut n = start;
        while n != n_lo && n != n_hi {
            let total = rates.birth(n) + rates.death(n);
            assert!(total > 0.0, "walker froze between the absorbing ends");
            if rng.gen::<f64>() * total < rates.birth(n) {
                n += 1;
            } else {
                n -= 1;
            }
        }
        if n == n_hi {
            hits += 1;
        }
    }
    let freq = hits as f64 / runs as f64;
    let se = (freq * (1.0 - freq) / runs as f64).sqrt();
    (freq, se)
}
