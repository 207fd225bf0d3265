//! Exact distributional dynamics of the population chain: the tridiagonal
//! master operator, its stationary distribution, its (real) spectrum via
//! detailed-balance symmetrization, the finite-time transition kernel, and
//! the slow-mode approximation built from the second eigenvector.

mod distribution;
pub mod eigen;
mod kernel;

pub use distribution::DistributionVector;
pub use kernel::{evolve, transition_probability, Propagator};

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateFamily, RateTable};
use crate::spectral::eigen::sym_tridiag_eigen;
use crate::util::log_sum_exp;
use serde::{Deserialize, Serialize};

/// The generator of the master equation dP/dt = A P in its tridiagonal
/// storage: `sub[n] = A[n+1, n] = birth[n]` (probability flowing up out of
/// column n), `sup[n] = A[n, n+1] = death[n+1]`, and
/// `diag[n] = -(birth[n] + death[n])`. Columns sum to zero exactly because
/// the diagonal is assembled as the negated sum of the other two entries.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterOperator {
    diag: Vec<f64>,
    sub: Vec<f64>,
    sup: Vec<f64>,
}

/// Assembles the master operator of a rate table.
pub fn build_master_operator(rates: &RateTable) -> MasterOperator {
    let n_max = rates.n_max();
    let diag: Vec<f64> = (0..=n_max).map(|n| -rates.exit(n)).collect();
    let sub: Vec<f64> = (0..n_max).map(|n| rates.birth(n)).collect();
    let sup: Vec<f64> = (0..n_max).map(|n| rates.death(n + 1)).collect();
    MasterOperator { diag, sub, sup }
}

impl MasterOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Sub-diagonal entries A[n+1, n].
    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    /// Super-diagonal entries A[n, n+1].
    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// Column sums; each is exactly 0.0 for a well-formed generator.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let mut s = self.diag[j];
                if j < self.sub.len() {
                    s += self.sub[j];
                }
                if j > 0 {
                    s += self.sup[j - 1];
                }
                s
            })
            .collect()
    }

    /// Matrix-vector product A v (used for residual checks).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "dimension mismatch in operator apply");
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.sub[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Dense copy, for small-N oracle comparisons.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
            if i + 1 < n {
                a[i + 1][i] = self.sub[i];
                a[i][i + 1] = self.sup[i];
            }
        }
        a
    }
}

/// Log-weights of the stationary distribution via the spanning-tree
/// (detailed-balance) product: ln w_n = sum_{k<n} ln birth[k] +
/// sum_{k>n} ln death[k], normalized with log-sum-exp. Requires every
/// interior rate to be positive; a reducible chain has no unique
/// stationary law.
pub(crate) fn steady_log_weights(rates: &RateTable) -> Result<Vec<f64>> {
    if !rates.is_irreducible() {
        return Err(Error::ReducibleChain(
            "an interior transition rate is zero, so the stationary distribution is not unique"
                .to_string(),
        ));
    }
    let n_max = rates.n_max();
    let mut log_w = vec![0.0; n_max + 1];
    // forward pass: sum of ln birth below n
    let mut acc = 0.0;
    for (n, w) in log_w.iter_mut().enumerate().skip(1) {
        acc += rates.birth(n - 1).ln();
        *w = acc;
    }
    // backward pass: sum of ln death above n
    acc = 0.0;
    for (n, w) in log_w.iter_mut().enumerate().take(n_max).rev() {
        acc += rates.death(n + 1).ln();
        *w += acc;
    }
    let norm = log_sum_exp(&log_w);
    for w in log_w.iter_mut() {
        *w -= norm;
    }
    Ok(log_w)
}

/// Stationary distribution of the chain (timestamp tagged infinity).
pub fn steady_state(rates: &RateTable) -> Result<DistributionVector> {
    let log_w = steady_log_weights(rates)?;
    DistributionVector::from_raw(log_w.iter().map(|w| w.exp()).collect(), f64::INFINITY)
}

/// Eigenvalues of the master operator, all real and <= 0, sorted in
/// descending order with the stationary eigenvalue snapped to exactly 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    raw_lambda1: f64,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// The leading eigenvalue as the solver produced it, before snapping.
    pub fn raw_lambda1(&self) -> f64 {
        self.raw_lambda1
    }

    /// Second-largest eigenvalue (the slow relaxation mode).
    pub fn lambda2(&self) -> Option<f64> {
        self.eigenvalues.get(1).copied()
    }

    pub fn lambda3(&self) -> Option<f64> {
        self.eigenvalues.get(2).copied()
    }

    /// Slowest relaxation timescale -1/lambda_2, when it is resolvable.
    pub fn relaxation_time(&self) -> Option<f64> {
        match self.lambda2() {
            Some(l2) if l2 < 0.0 => Some(-1.0 / l2),
            _ => None,
        }
    }

    /// lambda_1 - lambda_{N+1} >= 0.
    pub fn spread(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(first), Some(last)) => first - last,
            _ => 0.0,
        }
    }

    /// Smallest gap between consecutive (sorted) eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// True when an eigenvalue pair is closer than 1e-12 of the spectral
    /// spread; residue denominators are then meaningless and the kernel
    /// switches to the eigenbasis route.
    pub fn is_near_degenerate(&self) -> bool {
        let spread = self.spread();
        spread > 0.0 && self.min_gap() < 1e-12 * spread
    }
}

/// Shared snapping rule for generator spectra: the top eigenvalue must
/// vanish within 1e-8 of the spectral scale (it is snapped to exactly 0);
/// any other positive eigenvalue within the same tolerance is roundoff of
/// a vanishing mode and is clamped to 0. Larger violations mean the
/// symmetrization or the input was inconsistent. Returns the raw top
/// eigenvalue for diagnostics.
pub(crate) fn snap_generator_eigenvalues(values: &mut [f64]) -> Result<f64> {
    let scale = values.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return Ok(0.0); // zero generator: nothing moves
    }
    let tol = 1e-8 * scale;
    let raw1 = values[0];
    if raw1.abs() > tol {
        return Err(Error::SpectrumInconsistent { lambda1: raw1, tol });
    }
    values[0] = 0.0;
    for v in values[1..].iter_mut() {
        if *v > 0.0 {
            if *v > tol {
                return Err(Error::SpectrumInconsistent { lambda1: *v, tol });
            }
            *v = 0.0;
        }
    }
    Ok(raw1)
}

/// Computes the full (real) spectrum of the master operator by the
/// detailed-balance similarity transform: scaling rows and columns by
/// sqrt(P_s) turns A into a symmetric tridiagonal matrix with the same
/// diagonal and off-diagonals sqrt(birth[n] death[n+1]). This kills the
/// wild pseudospectrum a direct nonsymmetric solve would trip over and
/// guarantees real eigenvalues. `steady` is the stationary distribution of
/// the same chain; it must be strictly positive for the transform to exist.
pub fn compute_spectrum(op: &MasterOperator, steady: &DistributionVector) -> Result<Spectrum> {
    if steady.n_states() != op.dim() {
        return Err(Error::InvalidArgument(format!(
            "steady state has {} states, operator has {}",
            steady.n_states(),
            op.dim()
        )));
    }
    if steady.probs().iter().any(|&p| p <= 0.0) {
        return Err(Error::ReducibleChain(
            "stationary distribution has zero entries; the symmetrizing transform does not exist"
                .to_string(),
        ));
    }
    let offdiag: Vec<f64> = op
        .sub
        .iter()
        .zip(op.sup.iter())
        .map(|(b, d)| (b * d).sqrt())
        .collect();
    let eig = sym_tridiag_eigen(&op.diag, &offdiag, false)?;
    let mut values = eig.values;
    let raw_lambda1 = snap_generator_eigenvalues(&mut values)?;
    Ok(Spectrum {
        eigenvalues: values,
        raw_lambda1,
    })
}

/// Piecewise-constant external-field schedule: `values[j]` holds on the
/// interval [breakpoints[j-1], breakpoints[j]), starting from time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeitgeistSchedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl ZeitgeistSchedule {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidSchedule(format!(
                "need equally many breakpoints and values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::InvalidSchedule(
                "breakpoints must be finite and > 0".to_string(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule(
                "breakpoints must be strictly increasing".to_string(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSchedule(
                "field values must be finite".to_string(),
            ));
        }
        Ok(ZeitgeistSchedule {
            breakpoints,
            values,
        })
    }

    /// Single-interval schedule holding `f` until `t_end`.
    pub fn constant(f: f64, t_end: f64) -> Result<Self> {
        Self::new(vec![t_end], vec![f])
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints.last().expect("schedule is never empty")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Field value at time t in [0, end_time].
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.end_time() {
            return Err(Error::ScheduleExceeded {
                t,
                t_end: self.end_time(),
            });
        }
        for (j, &b) in self.breakpoints.iter().enumerate() {
            if t < b {
                return Ok(self.values[j]);
            }
        }
        Ok(*self.values.last().expect("schedule is never empty"))
    }

    /// (start, end, field) triples covering [0, end_time].
    pub fn intervals(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut start = 0.0;
        for (&end, &v) in self.breakpoints.iter().zip(self.values.iter()) {
            out.push((start, end, v));
            start = end;
        }
        out
    }
}

/// Evolves q0 under a piecewise-constant field: on each interval the rate
/// table, spectrum, and kernel are rebuilt with that interval's field and
/// the distribution is pushed to the interval end (or to t). The `f` field
/// of `params` is ignored; the schedule supplies it.
pub fn evolve_piecewise(
    schedule: &ZeitgeistSchedule,
    params: &ModelParams,
    family: &RateFamily,
    q0: &DistributionVector,
    t: f64,
) -> Result<DistributionVector> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    if t > schedule.end_time() {
        return Err(Error::ScheduleExceeded {
            t,
            t_end: schedule.end_time(),
        });
    }
    if q0.n_states() != params.n_agents + 1 {
        return Err(Error::InvalidArgument(format!(
            "initial distribution has {} states, model has {}",
            q0.n_states(),
            params.n_agents + 1
        )));
    }
    let mut q = q0.clone();
    for (start, end, field) in schedule.intervals() {
        if t <= start {
            break;
        }
        let seg_end = end.min(t);
        if seg_end > start {
            let seg_params = ModelParams {
                f: field,
                ..*params
            };
            let rates = RateTable::build(&seg_params, family)?;
            let op = build_master_operator(&rates);
            let steady = steady_state(&rates)?;
            let spectrum = compute_spectrum(&op, &steady)?;
            let prop = Propagator::new(&rates, &spectrum)?;
            q = prop.evolve(&q, seg_end - start)?.at_time(seg_end);
        }
        if t <= end {
            break;
        }
    }
    Ok(q.at_time(t))
}

/// Two-term slow-mode approximation P(., t) ~ P_s + e^{-rate t} phi2.
/// `decay_rate` must be positive (it is |lambda_2|) and `phi2` must sum to
/// zero, so that the result stays normalized at every t and converges to
/// the stationary law as t grows.
pub fn metastable_approximation(
    steady: &DistributionVector,
    decay_rate: f64,
    phi2: &[f64],
    t: f64,
) -> Result<DistributionVector> {
    if !decay_rate.is_finite() || decay_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "decay rate must be finite and > 0, got {decay_rate}"
        )));
    }
    if phi2.len() != steady.n_states() {
        return Err(Error::InvalidArgument(format!(
            "phi2 has {} entries, steady state has {} states",
            phi2.len(),
            steady.n_states()
        )));
    }
    let sum: f64 = phi2.iter().sum();
    if sum.abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "phi2 must sum to zero (got {sum:e}), or the approximation leaks probability"
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    let damp = (-decay_rate * t).exp();
    let raw: Vec<f64> = steady
        .probs()
        .iter()
        .zip(phi2.iter())
        .map(|(p, c)| p + damp * c)
        .collect();
    DistributionVector::from_raw(raw, t)
}

/// Extracts the slow mode for [`metastable_approximation`]: the decay rate
/// |lambda_2| and the second-eigenvector correction phi2, with phi2's
/// overall scale fixed by least-squares against the exact kernel solution
/// from `q0` at the reference time t* = 5/|lambda_3| (by then every faster
/// mode has decayed to under a percent, so the residual P(t*) - P_s is the
/// slow mode up to that accuracy).
pub fn metastable_mode(
    rates: &RateTable,
    spectrum: &Spectrum,
    steady: &DistributionVector,
    q0: &DistributionVector,
) -> Result<(f64, Vec<f64>)> {
    if spectrum.len() < 3 {
        return Err(Error::NoMetastability(
            "a slow mode needs at least three states".to_string(),
        ));
    }
    let l2 = spectrum.lambda2().expect("len checked above");
    let l3 = spectrum.lambda3().expect("len checked above");
    if l2 >= 0.0 {
        return Err(Error::NoMetastability(
            "second eigenvalue is not resolvably negative; relaxation timescale diverges"
                .to_string(),
        ));
    }
    let decay_rate = -l2;
    let t_star = 5.0 / (-l3);

    // second eigenvector of the symmetrized operator, mapped back through
    // the sqrt(P_s) scaling to a signed correction over states
    let log_w = steady_log_weights(rates)?;
    let n_max = rates.n_max();
    let diag: Vec<f64> = (0..=n_max).map(|n| -rates.exit(n)).collect();
    let offdiag: Vec<f64> = (0..n_max)
        .map(|n| (rates.birth(n) * rates.death(n + 1)).sqrt())
        .collect();
    let eig = sym_tridiag_eigen(&diag, &offdiag, true)?;
    let v2 = &eig.vectors.expect("vectors were requested")[1];
    let mut u2: Vec<f64> = log_w
        .iter()
        .zip(v2.iter())
        .map(|(lw, v)| (0.5 * lw).exp() * v)
        .collect();
    // project out the stationary direction so the correction sums to zero
    let leak: f64 = u2.iter().sum();
    for (u, p) in u2.iter_mut().zip(steady.probs().iter()) {
        *u -= leak * p;
    }

    let prop = Propagator::new(rates, spectrum)?;
    let exact = prop.evolve(q0, t_star)?;
    let dot_ru: f64 = exact
        .probs()
        .iter()
        .zip(steady.probs().iter())
        .zip(u2.iter())
        .map(|((e, s), u)| (e - s) * u)
        .sum();
    let dot_uu: f64 = u2.iter().map(|u| u * u).sum();
    if dot_uu == 0.0 {
        return Err(Error::NoMetastability(
            "second eigenvector vanished after projection".to_string(),
        ));
    }
    let scale = dot_ru / dot_uu * (decay_rate * t_star).exp();
    for u in u2.iter_mut() {
        *u *= scale;
    }
    Ok((decay_rate, u2))
}
