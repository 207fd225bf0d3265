//! Lock-in analysis for bistable chains: locating the two steady-state
//! modes and the barrier between them, exact mean first-passage times to
//! the barrier, fixation probabilities between the modes, the resulting
//! two-state estimate of the slow relaxation rate, and the continuum
//! (Fokker-Planck) escape-time asymptotics.
//!
//! First-passage sums and rate-ratio products grow like e^{cN}, so every
//! cumulative product here is carried in log space and only exponentiated
//! at the end.

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateTable};
use crate::spectral::DistributionVector;
use crate::util::{adaptive_simpson, logaddexp, KahanSum};
use serde::{Deserialize, Serialize};

/// Steady-state landmarks of a bistable chain: the two modal counts and
/// the interior minimum (the barrier top) between them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriaIndices {
    pub n_minus: usize,
    pub n_u: usize,
    pub n_plus: usize,
}

/// Everything the two-state picture of a bistable chain produces: the
/// barrier first-passage profile, mode-averaged escape times, the fixation
/// probability of the right mode, and the relaxation-rate estimate built
/// from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageResult {
    pub equilibria: EquilibriaIndices,
    /// Mean first-passage time to n_u from every count (zero at n_u).
    pub tau: Vec<f64>,
    pub tau_lr: f64,
    pub tau_rl: f64,
    #[serde(rename = "phi_R")]
    pub phi_r: f64,
    pub lambda2_approx: f64,
}

/// Locates the steady-state extrema by neighbor comparison. Plateaus
/// (runs of exactly equal probability) count once, at their leftmost
/// index. Exactly two maxima with one interior minimum between them are
/// required; anything else means the chain is not bistable.
pub fn find_equilibria(steady: &DistributionVector) -> Result<EquilibriaIndices> {
    let p = steady.probs();
    // compress into plateau runs of (start index, value)
    let mut runs: Vec<(usize, f64)> = Vec::new();
    for (n, &v) in p.iter().enumerate() {
        match runs.last() {
            Some(&(_, last)) if last == v => {}
            _ => runs.push((n, v)),
        }
    }
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for (i, &(start, v)) in runs.iter().enumerate() {
        let above_left = i == 0 || runs[i - 1].1 < v;
        let above_right = i + 1 == runs.len() || runs[i + 1].1 < v;
        if above_left && above_right {
            maxima.push(start);
        }
        // boundary runs cannot be the interior barrier
        if i > 0 && i + 1 < runs.len() && runs[i - 1].1 > v && runs[i + 1].1 > v {
            minima.push(start);
        }
    }
    if maxima.len() != 2 {
        return Err(Error::NoMetastability(format!(
            "steady state has {} local maxima, need exactly 2 (the chain is \
             monomodal or multi-modal at these parameters)",
            maxima.len()
        )));
    }
    let (n_minus, n_plus) = (maxima[0], maxima[1]);
    let between: Vec<usize> = minima
        .into_iter()
        .filter(|&n| n_minus < n && n < n_plus)
        .collect();
    if between.len() != 1 {
        return Err(Error::NoMetastability(format!(
            "expected one interior minimum between the modes at {n_minus} and \
             {n_plus}, found {}",
            between.len()
        )));
    }
    Ok(EquilibriaIndices {
        n_minus,
        n_u: between[0],
        n_plus,
    })
}

/// Log of the first-passage partial sums S_k for a chain that must travel
/// rightward to reach `target` from below, with a reflecting wall at 0:
///
///   S_0 = 1/birth[0],   S_k = (death[k] S_{k-1} + 1) / birth[k],
///
/// so that tau_n = sum_{k=n}^{target-1} S_k. All terms are positive, which
/// keeps the whole recursion in log space.
fn left_side_tau(rates: &RateTable, target: usize) -> Result<Vec<f64>> {
    let mut ln_s = Vec::with_capacity(target);
    for k in 0..target {
        let b = rates.birth(k);
        if b <= 0.0 {
            return Err(Error::ReducibleChain(format!(
                "state {k} has zero birth rate; the barrier at {target} is \
                 unreachable from below"
            )));
        }
        let ln_b = b.ln();
        let s = if k == 0 {
            -ln_b
        } else {
            // death[k] = 0 contributes -inf, which logaddexp absorbs
            logaddexp(ln_s[k - 1] + rates.death(k).ln() - ln_b, -ln_b)
        };
        ln_s.push(s);
    }
    let mut tau = vec![0.0; target];
    let mut acc = f64::NEG_INFINITY;
    for k in (0..target).rev() {
        acc = logaddexp(acc, ln_s[k]);
        tau[k] = acc.exp();
    }
    Ok(tau)
}

/// Exact mean first-passage time to the barrier count `n_u` from every
/// starting count. States below n_u use the rightward recursion directly;
/// states above reuse it on the mirrored chain. tau[n_u] = 0.
pub fn mfpt_to_unstable(rates: &RateTable, n_u: usize) -> Result<Vec<f64>> {
    let n_max = rates.n_max();
    if n_u == 0 || n_u >= n_max {
        return Err(Error::InvalidArgument(format!(
            "barrier index must be interior (0 < n_u < {n_max}), got {n_u}"
        )));
    }
    let mut tau = vec![0.0; n_max + 1];
    let left = left_side_tau(rates, n_u)?;
    tau[..n_u].copy_from_slice(&left);
    let right = left_side_tau(&rates.mirrored(), n_max - n_u)?;
    for (k, t) in right.into_iter().enumerate() {
        tau[n_max - k] = t;
    }
    Ok(tau)
}

/// Mode-averaged escape times: tau_lr weights tau over the steady-state
/// distribution restricted to counts left of the barrier (the
/// quasi-stationary occupation of the left well), tau_rl likewise on the
/// right.
pub fn mode_escape_times(
    steady: &DistributionVector,
    tau: &[f64],
    n_u: usize,
) -> Result<(f64, f64)> {
    let p = steady.probs();
    if tau.len() != p.len() {
        return Err(Error::InvalidArgument(format!(
            "first-passage vector has {} entries for {} states",
            tau.len(),
            p.len()
        )));
    }
    if n_u == 0 || n_u + 1 >= p.len() {
        return Err(Error::InvalidArgument(format!(
            "barrier index must be interior, got {n_u}"
        )));
    }
    let side = |range: std::ops::Range<usize>| -> Result<f64> {
        let mut mass = KahanSum::default();
        let mut weighted = KahanSum::default();
        for n in range.clone() {
            mass.add(p[n]);
            weighted.add(p[n] * tau[n]);
        }
        if mass.value() <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "no steady-state mass on counts {range:?}; cannot average an \
                 escape time there"
            )));
        }
        Ok(weighted.value() / mass.value())
    };
    Ok((side(0..n_u)?, side(n_u + 1..p.len())?))
}

/// Fixation probabilities phi_i of absorbing at n_plus before n_minus for
/// every start i in [n_minus, n_plus], with both ends made absorbing.
/// phi is a normalized cumulative sum of the rate-ratio products
///
///   R_k = prod_{m=n_minus+1}^{k-1} death[m]/birth[m],
///
/// accumulated in log space; the endpoints come out exactly 0 and 1.
pub fn fixation_curve(rates: &RateTable, n_minus: usize, n_plus: usize) -> Result<Vec<f64>> {
    if n_minus >= n_plus || n_plus > rates.n_max() {
        return Err(Error::InvalidArgument(format!(
            "absorbing pair must satisfy n_minus < n_plus <= {}, got ({n_minus}, {n_plus})",
            rates.n_max()
        )));
    }
    // prefix[j] = ln sum_{k <= n_minus+j} R_k; the last prefix is the
    // denominator, so the final ratio is exp(0) = 1 exactly
    let mut prefix = Vec::with_capacity(n_plus - n_minus + 1);
    prefix.push(f64::NEG_INFINITY); // empty sum at i = n_minus
    let mut ln_r = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for k in n_minus + 1..=n_plus {
        if k > n_minus + 1 {
            let m = k - 1;
            if rates.birth(m) <= 0.0 {
                return Err(Error::ReducibleChain(format!(
                    "state {m} has zero birth rate; the right boundary is \
                     unreachable from below"
                )));
            }
            // death[m] = 0 sends ln_r to -inf: R collapses, phi jumps to 1
            ln_r += rates.death(m).ln() - rates.birth(m).ln();
        }
        acc = logaddexp(acc, ln_r);
        prefix.push(acc);
    }
    let den = acc;
    Ok(prefix
        .into_iter()
        .map(|num| {
            if num == f64::NEG_INFINITY {
                0.0
            } else {
                (num - den).exp()
            }
        })
        .collect())
}

/// Probability of absorbing at n_plus before n_minus when starting from
/// count i, with both ends absorbing. phi_R, the weight of the right mode
/// in the two-state picture, is this evaluated at i = n_u.
pub fn fixation_probability(
    rates: &RateTable,
    n_minus: usize,
    n_plus: usize,
    i: usize,
) -> Result<f64> {
    if i < n_minus || i > n_plus {
        return Err(Error::InvalidArgument(format!(
            "start {i} lies outside the absorbing interval [{n_minus}, {n_plus}]"
        )));
    }
    Ok(fixation_curve(rates, n_minus, n_plus)?[i - n_minus])
}

/// Two-state estimate of the slow relaxation rate: escapes from the two
/// wells are treated as independent Poisson channels weighted by where the
/// process ends up, lambda2 ~ phi_R/tau_lr + (1 - phi_R)/tau_rl.
// `!(x > 0.0)` rather than `x <= 0.0`: the negated form also rejects NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn relaxation_rate(tau_lr: f64, tau_rl: f64, phi_r: f64) -> Result<f64> {
    if !(tau_lr > 0.0) || !(tau_rl > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "escape times must be positive, got tau_lr = {tau_lr}, tau_rl = {tau_rl}"
        )));
    }
    if !(0.0..=1.0).contains(&phi_r) {
        return Err(Error::InvalidArgument(format!(
            "fixation probability must lie in [0, 1], got {phi_r}"
        )));
    }
    Ok(phi_r / tau_lr + (1.0 - phi_r) / tau_rl)
}

/// Runs the whole lock-in pipeline on one chain: equilibria from the
/// steady state, the first-passage profile, mode-averaged escape times,
/// the right-mode fixation probability, and the relaxation-rate estimate.
pub fn first_passage_analysis(
    rates: &RateTable,
    steady: &DistributionVector,
) -> Result<FirstPassageResult> {
    let equilibria = find_equilibria(steady)?;
    let tau = mfpt_to_unstable(rates, equilibria.n_u)?;
    let (tau_lr, tau_rl) = mode_escape_times(steady, &tau, equilibria.n_u)?;
    let phi_r = fixation_probability(rates, equilibria.n_minus, equilibria.n_plus, equilibria.n_u)?;
    let lambda2_approx = relaxation_rate(tau_lr, tau_rl, phi_r)?;
    Ok(FirstPassageResult {
        equilibria,
        tau,
        tau_lr,
        tau_rl,
        phi_r,
        lambda2_approx,
    })
}

/// Drift coefficient a1(phi) of the continuum (Fokker-Planck) limit in the
/// up-fraction phi = n/N. Written through u = sigma(beta f) instead of the
/// equivalent (1 - phi) - sigma(-beta f): near the boundaries both of
/// those terms approach 1 and their difference cancels catastrophically,
/// while u - phi stays exact.
pub fn continuum_drift(params: &ModelParams, phi: f64) -> f64 {
    let u = crate::model::sigma(params.beta * continuum_field(params, phi));
    params.gamma * (u - phi)
}

/// Diffusion coefficient a2(phi) of the continuum limit (the noise term
/// carries an extra 1/N not included here). Same rewriting as
/// [`continuum_drift`].
pub fn continuum_diffusion(params: &ModelParams, phi: f64) -> f64 {
    let u = crate::model::sigma(params.beta * continuum_field(params, phi));
    params.gamma * (u + phi - 2.0 * phi * u)
}

/// a1/a2 with the two boundary limits patched in: when beta is so large
/// that sigma rounds all the way to 0 or 1, both coefficients evaluate to
/// exactly zero at a corner, yet the true ratio tends to +1 at phi = 0 and
/// -1 at phi = 1.
fn drift_diffusion_ratio(params: &ModelParams, phi: f64) -> f64 {
    let num = continuum_drift(params, phi);
    let den = continuum_diffusion(params, phi);
    if den == 0.0 {
        return if phi <= 0.0 { 1.0 } else { -1.0 };
    }
    num / den
}

/// Effective field f(phi) = 2(F + J(1+alpha)(2 phi - 1)) felt by one agent
/// when a fraction phi of the population is up.
fn continuum_field(params: &ModelParams, phi: f64) -> f64 {
    2.0 * (params.f + params.j * (params.alpha + 1.0) * (2.0 * phi - 1.0))
}

/// The continuum double-well potential Phi(y) = -2N int_0^y a1/a2, by
/// adaptive quadrature. Wells sit near (not exactly at) phi = 0 and 1 for
/// finite beta; the interior maximum is the continuum barrier.
pub fn continuum_potential(params: &ModelParams, y: f64) -> Result<f64> {
    params.validate()?;
    if !y.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "potential argument must be finite, got {y}"
        )));
    }
    let ratio = |x: f64| drift_diffusion_ratio(params, x);
    Ok(-2.0 * params.n_agents as f64 * adaptive_simpson(&ratio, 0.0, y, 1e-10))
}

fn require_bistable(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let beta_c = params.critical_rationality().map_err(|_| {
        Error::SingleEquilibrium("no phase transition without positive coupling J".to_string())
    })?;
    if params.beta <= beta_c {
        return Err(Error::SingleEquilibrium(format!(
            "beta = {} does not exceed the critical value {beta_c}; the \
             continuum potential has a single well",
            params.beta
        )));
    }
    let f_max = params.j * (1.0 + params.alpha);
    if params.f.abs() >= f_max {
        return Err(Error::SingleEquilibrium(format!(
            "|F| = {} reaches the coupling scale J(1+alpha) = {f_max}; the \
             field tilts the potential into a single well",
            params.f.abs()
        )));
    }
    Ok(beta_c)
}

/// Locates the interior maximum of the continuum potential: the ascending
/// zero of the drift, since Phi'(y) = -2N a1/a2 with a2 > 0 on (0, 1).
fn continuum_barrier(params: &ModelParams) -> Result<f64> {
    const GRID: usize = 4096;
    let a1 = |y: f64| continuum_drift(params, y);
    let mut bracket = None;
    for k in 0..GRID {
        let lo = k as f64 / GRID as f64;
        let hi = (k + 1) as f64 / GRID as f64;
        if a1(lo) < 0.0 && a1(hi) >= 0.0 {
            bracket = Some((lo, hi));
            break;
        }
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::SingleEquilibrium(
            "the continuum drift has no ascending interior zero; the \
             potential has no barrier at these parameters"
                .to_string(),
        )
    })?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if a1(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Second derivative of the continuum potential by central differences of
/// Phi' = -2N a1/a2. Taken in absolute value: at finite beta the wells sit
/// slightly inside the boundaries, so the curvature sampled exactly at 0
/// or 1 can otherwise pick up a stray sign.
fn potential_curvature(params: &ModelParams, y: f64) -> f64 {
    const H: f64 = 1e-5;
    let slope = |x: f64| -2.0 * params.n_agents as f64 * drift_diffusion_ratio(params, x);
    ((slope(y + H) - slope(y - H)) / (2.0 * H)).abs()
}

/// Saddle-point (Kramers) escape-time estimates from the continuum
/// potential: prefactor 2 pi / sqrt(Phi''(well) |Phi''(barrier)|) with the
/// curvatures evaluated at finite beta, exponent from the highly-rational
/// triangular limit, exp(N(1 -+ F/(J(1+alpha)))). Returns (left-to-right,
/// right-to-left).
pub fn asymptotic_escape_times(params: &ModelParams) -> Result<(f64, f64)> {
    require_bistable(params)?;
    let phi_u = continuum_barrier(params)?;
    let curvature_barrier = potential_curvature(params, phi_u);
    let (exp_lr, exp_rl) = escape_exponents(params)?;
    let tau = |well: f64, exponent: f64| {
        let curvature_well = potential_curvature(params, well);
        2.0 * std::f64::consts::PI / (curvature_well * curvature_barrier).sqrt() * exponent.exp()
    };
    Ok((tau(0.0, exp_lr), tau(1.0, exp_rl)))
}

/// Just the exponents of the escape-time estimates, N(1 -+ F/(J(1+alpha))),
/// for callers that only need the growth rate in N.
pub fn escape_exponents(params: &ModelParams) -> Result<(f64, f64)> {
    require_bistable(params)?;
    let tilt = params.f / (params.j * (1.0 + params.alpha));
    let n = params.n_agents as f64;
    Ok((n * (1.0 - tilt), n * (1.0 + tilt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, RateFamily, RateTable};
    use crate::spectral::steady_state;

    fn bistable_params(n: usize) -> ModelParams {
        ModelParams::new(0.025, 1.5, 0.0, 1.0, 1.0, n).unwrap()
    }

    #[test]
    fn symmetric_chain_puts_barrier_at_midpoint() {
        let p = ModelParams::new(0.0, 1.5, 0.0, 1.0, 1.0, 50).unwrap();
        let rates = RateTable::build(&p, &RateFamily::Logit).unwrap();
        let eq = find_equilibria(&steady_state(&rates).unwrap()).unwrap();
        assert_eq!(eq.n_u, 25, "zero field must put the barrier at N/2");
        assert_eq!(
            eq.n_minus + eq.n_plus,
            50,
            "modes must mirror each other around N/2"
        );
        assert!(eq.n_minus < eq.n_u && eq.n_u < eq.n_plus);
    }

    #[test]
    fn monomodal_steady_state_is_rejected() {
        // beta = 0 gives a binomial steady state with a single mode
        let p = ModelParams::new(0.0, 1.5, 0.0, 0.0, 1.0, 40).unwrap();
        let rates = RateTable::build(&p, &RateFamily::Logit).unwrap();
        let err = find_equilibria(&steady_state(&rates).unwrap());
        assert!(matches!(err, Err(Error::NoMetastability(_))));
    }

    #[test]
    fn plateau_counts_once_at_leftmost_index() {
        let flat_top = DistributionVector::from_raw(
            vec![1.0, 2.0, 2.0, 1.0, 0.5, 1.0, 3.0, 1.0],
            f64::INFINITY,
        )
        .unwrap();
        let eq = find_equilibria(&flat_top).unwrap();
        assert_eq!((eq.n_minus, eq.n_u, eq.n_plus), (1, 4, 6));
    }

    #[test]
    fn mfpt_vanishes_at_barrier_and_rejects_boundary() {
        let rates = RateTable::build(&bistable_params(20), &RateFamily::Logit).unwrap();
        let tau = mfpt_to_unstable(&rates, 9).unwrap();
        assert_eq!(tau[9], 0.0);
        assert!(tau.iter().all(|&t| t >= 0.0));
        assert!(mfpt_to_unstable(&rates, 0).is_err());
        assert!(mfpt_to_unstable(&rates, 20).is_err());
    }

    #[test]
    fn mfpt_matches_hand_solved_three_state_chain() {
        // birth 0->1 rate 2, 1->2 rate 3; death 1->0 rate 5, 2->1 rate 7
        let rates = RateTable::from_rates(vec![2.0, 3.0, 0.0], vec![0.0, 5.0, 7.0]).unwrap();
        let tau = mfpt_to_unstable(&rates, 1).unwrap();
        // from 0 the only move is 0 -> 1, so tau_0 = 1/2
        assert!((tau[0] - 0.5).abs() < 1e-15);
        // from 2 the only move is 2 -> 1, so tau_2 = 1/7
        assert!((tau[2] - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(tau[1], 0.0);
    }

    #[test]
    fn mfpt_first_step_identity_holds() {
        // tau_0 - tau_1 = 1/birth[0] for any chain (the first-step relation)
        let rates = RateTable::build(&bistable_params(30), &RateFamily::Logit).unwrap();
        let tau = mfpt_to_unstable(&rates, 14).unwrap();
        let expected = 1.0 / rates.birth(0);
        let got = tau[0] - tau[1];
        assert!(
            (got - expected).abs() <= 1e-9 * expected.abs(),
            "tau_0 - tau_1 = {got}, expected {expected}"
        );
    }

    #[test]
    fn mfpt_decreases_toward_the_barrier() {
        let rates = RateTable::build(&bistable_params(50), &RateFamily::Logit).unwrap();
        let tau = mfpt_to_unstable(&rates, 24).unwrap();
        for n in 0..24 {
            assert!(tau[n] > tau[n + 1], "left side must decrease at {n}");
        }
        for n in 25..50 {
            assert!(tau[n] < tau[n + 1], "right side must increase at {n}");
        }
    }

    #[test]
    fn escape_times_average_the_correct_sides() {
        let rates = RateTable::build(&bistable_params(50), &RateFamily::Logit).unwrap();
        let steady = steady_state(&rates).unwrap();
        let eq = find_equilibria(&steady).unwrap();
        let tau = mfpt_to_unstable(&rates, eq.n_u).unwrap();
        let (tau_lr, tau_rl) = mode_escape_times(&steady, &tau, eq.n_u).unwrap();
        assert!(tau_lr > 0.0 && tau_rl > 0.0);
        // F > 0 makes the right mode optimal and stickier
        assert!(
            tau_rl > tau_lr,
            "positive field must make right-to-left escapes slower: {tau_rl} vs {tau_lr}"
        );
    }

    #[test]
    fn symmetric_field_gives_equal_escape_times() {
        let p = ModelParams::new(0.0, 1.5, 0.0, 1.0, 1.0, 50).unwrap();
        let rates = RateTable::build(&p, &RateFamily::Logit).unwrap();
        let steady = steady_state(&rates).unwrap();
        let eq = find_equilibria(&steady).unwrap();
        let tau = mfpt_to_unstable(&rates, eq.n_u).unwrap();
        let (tau_lr, tau_rl) = mode_escape_times(&steady, &tau, eq.n_u).unwrap();
        assert!(
            (tau_lr - tau_rl).abs() <= 1e-8 * tau_lr,
            "zero field must balance the escape times: {tau_lr} vs {tau_rl}"
        );
    }

    #[test]
    fn escape_average_needs_mass_on_both_sides() {
        let steady = DistributionVector::delta(10, 10, f64::INFINITY).unwrap();
        let tau = vec![1.0; 11];
        assert!(matches!(
            mode_escape_times(&steady, &tau, 5),
            Err(Error::InvalidDistribution(_))
        ));
    }

    #[test]
    fn fixation_endpoints_are_exact() {
        let rates = RateTable::build(&bistable_params(50), &RateFamily::Logit).unwrap();
        let phi = fixation_curve(&rates, 3, 47).unwrap();
        assert_eq!(phi[0], 0.0, "left absorbing end must be exactly 0");
        assert_eq!(phi[44], 1.0, "right absorbing end must be exactly 1");
        for w in phi.windows(2) {
            assert!(w[1] >= w[0], "fixation curve must be non-decreasing");
        }
    }

    #[test]
    fn fixation_matches_gamblers_ruin_on_three_states() {
        let rates = RateTable::from_rates(vec![2.0, 3.0, 0.0], vec![0.0, 5.0, 7.0]).unwrap();
        // from state 1, absorb at 2 before 0 with probability b1/(b1 + d1)
        let phi = fixation_probability(&rates, 0, 2, 1).unwrap();
        assert!((phi - 3.0 / 8.0).abs() < 1e-15, "got {phi}");
    }

    #[test]
    fn symmetric_chain_fixes_evenly_from_the_middle() {
        let p = ModelParams::new(0.0, 1.5, 0.0, 1.0, 1.0, 50).unwrap();
        let rates = RateTable::build(&p, &RateFamily::Logit).unwrap();
        let phi = fixation_probability(&rates, 0, 50, 25).unwrap();
        assert!(
            (phi - 0.5).abs() < 1e-10,
            "mirror symmetry forces phi = 1/2, got {phi}"
        );
    }

    #[test]
    fn fixation_validates_its_interval() {
        let rates = RateTable::build(&bistable_params(20), &RateFamily::Logit).unwrap();
        assert!(fixation_probability(&rates, 5, 15, 3).is_err());
        assert!(fixation_probability(&rates, 15, 5, 10).is_err());
        assert!(fixation_curve(&rates, 5, 21).is_err());
    }

    #[test]
    fn relaxation_rate_collapses_when_symmetric() {
        let rate = relaxation_rate(100.0, 100.0, 0.5).unwrap();
        assert!((rate - 0.01).abs() < 1e-15);
        assert!(relaxation_rate(0.0, 1.0, 0.5).is_err());
        assert!(relaxation_rate(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn full_analysis_assembles_consistently() {
        let rates = RateTable::build(&bistable_params(50), &RateFamily::Logit).unwrap();
        let steady = steady_state(&rates).unwrap();
        let result = first_passage_analysis(&rates, &steady).unwrap();
        assert_eq!(result.tau[result.equilibria.n_u], 0.0);
        assert!(result.phi_r > 0.0 && result.phi_r < 1.0);
        let expected = relaxation_rate(result.tau_lr, result.tau_rl, result.phi_r).unwrap();
        assert_eq!(result.lambda2_approx, expected);
        let json = serde_json::to_string(&result).unwrap();
        assert!(json.contains("\"phi_R\""), "JSON field must be phi_R");
        let back: FirstPassageResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn continuum_drift_ratio_is_exact_at_the_boundaries() {
        let p = bistable_params(50);
        let ratio = |y: f64| drift_diffusion_ratio(&p, y);
        assert_eq!(ratio(0.0), 1.0, "a1/a2 must equal +1 exactly at phi = 0");
        assert_eq!(ratio(1.0), -1.0, "a1/a2 must equal -1 exactly at phi = 1");
        // extreme rationality underflows sigma entirely; the patched limits
        // must still hold
        let frozen = ModelParams::new(0.2, 2.0, 0.0, 500.0, 1.0, 10).unwrap();
        assert_eq!(drift_diffusion_ratio(&frozen, 0.0), 1.0);
        assert_eq!(drift_diffusion_ratio(&frozen, 1.0), -1.0);
    }

    #[test]
    fn potential_peaks_at_an_interior_barrier() {
        let p = bistable_params(50);
        let phi_u = continuum_barrier(&p).unwrap();
        assert!(phi_u > 0.0 && phi_u < 1.0);
        // the zero-field barrier sits at 1/2; positive F pushes it left
        assert!(phi_u < 0.5, "positive field must shift the barrier left");
        let at_top = continuum_potential(&p, phi_u).unwrap();
        assert!(at_top > continuum_potential(&p, phi_u - 0.1).unwrap());
        assert!(at_top > continuum_potential(&p, phi_u + 0.1).unwrap());
        assert_eq!(continuum_potential(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn highly_rational_potential_is_triangular() {
        // at large beta, Phi ~ 2Ny below the barrier and 2N(2 phi_u - y) above
        let p = ModelParams::new(0.2, 2.0, 0.0, 50.0, 1.0, 10).unwrap();
        let phi_u = continuum_barrier(&p).unwrap();
        let expected_barrier = 0.5 * (1.0 - 0.2 / 2.0);
        assert!(
            (phi_u - expected_barrier).abs() < 1e-2,
            "barrier {phi_u} should approach {expected_barrier}"
        );
        let n = p.n_agents as f64;
        let y = 0.5 * phi_u;
        let got = continuum_potential(&p, y).unwrap();
        assert!(
            (got - 2.0 * n * y).abs() < 0.05 * (2.0 * n * y),
            "below the barrier the potential should climb like 2Ny: {got}"
        );
    }

    #[test]
    fn zero_field_balances_asymptotic_escape_times() {
        let p = ModelParams::new(0.0, 1.5, 0.0, 1.0, 1.0, 50).unwrap();
        let (lr, rl) = asymptotic_escape_times(&p).unwrap();
        assert!(
            (lr - rl).abs() <= 1e-9 * lr,
            "zero field must balance the estimates: {lr} vs {rl}"
        );
        assert!(lr > 0.0 && lr.is_finite());
    }

    #[test]
    fn escape_exponents_follow_the_closed_form() {
        let p = ModelParams::new(0.2, 2.0, 0.0, 5.0, 1.0, 50).unwrap();
        let (lr, rl) = escape_exponents(&p).unwrap();
        assert!((lr - 45.0).abs() < 1e-12, "N(1 - F/J) = 45, got {lr}");
        assert!((rl - 55.0).abs() < 1e-12, "N(1 + F/J) = 55, got {rl}");
    }

    #[test]
    fn asymptotics_reject_single_well_regimes() {
        // subcritical rationality
        let p = ModelParams::new(0.0, 1.5, 0.0, 0.5, 1.0, 50).unwrap();
        assert!(matches!(
            asymptotic_escape_times(&p),
            Err(Error::SingleEquilibrium(_))
        ));
        // field strong enough to erase the second well
        let p = ModelParams::new(2.0, 1.5, 0.0, 1.0, 1.0, 50).unwrap();
        assert!(matches!(
            escape_exponents(&p),
            Err(Error::SingleEquilibrium(_))
        ));
        // no coupling at all
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.0, 1.0, 50).unwrap();
        assert!(matches!(
            asymptotic_escape_times(&p),
            Err(Error::SingleEquilibrium(_))
        ));
    }
}
