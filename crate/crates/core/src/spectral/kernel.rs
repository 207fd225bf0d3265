//! Time-dependent transition kernel P(n, t | n0) of the birth-death chain.
//!
//! The generator A is tridiagonal, so each entry of its resolvent
//! (yI - A)^{-1} factors into three pieces: the leading principal minor of
//! size min(n, n0), the trailing principal minor below max(n, n0), and the
//! product of the one-step rates joining n0 to n, all over the
//! characteristic polynomial. Summing the residues of e^{yt} (yI - A)^{-1}
//! over the eigenvalues (all real; simple away from degeneracies) turns the
//! resolvent into the finite-time kernel:
//!
//!   P(n, t | n0) = pref(n, n0) * sum_i e^{lambda_i t}
//!                  theta_lo(lambda_i) phi_{hi+1}(lambda_i) / prod_{j != i}
//!                  (lambda_i - lambda_j),
//!
//! with lo = min(n, n0), hi = max(n, n0), pref the product of the births
//! (upward) or deaths (downward) along the path. theta_m is the
//! characteristic polynomial of the top-left m x m block and phi_s that of
//! the block covering states s..N; both satisfy three-term recursions in
//! the rates. Every product here overflows f64 around N ~ 30-50, so all of
//! them are carried as sign + log-magnitude.
//!
//! Deep in the bimodal regime the slow eigenvalue collides with 0 at
//! machine precision and the residue denominators above are meaningless.
//! The kernel is then evaluated through the orthonormal eigenbasis of the
//! detailed-balance symmetrization of A instead -- the same e^{tA}, just
//! organized differently. The same reroute is applied per-row when the
//! resolvent sum cannot vouch for itself: more than 1e-6 of normalization
//! defect or clipped negative mass, or a rounding bound on the residue
//! cancellation above 1e-8 (the sum knows every term's magnitude, so it
//! carries that bound along). The eigenbasis route in turn zeroes any
//! entry below its own summation noise floor, since the detailed-balance
//! rescaling would otherwise amplify that noise into visible mass far
//! from a boundary start.
//!
//! Deep in the consensus-locked regime even that is not enough: the
//! rescaling factors d_n/d_n0 span hundreds of orders of magnitude and no
//! spectral representation of the row survives in f64. When the eigenbasis
//! row also fails the normalization witness, the row is evaluated a third
//! way, through the uniformized jump chain: e^{tA} expanded over
//! Poisson-many applications of the stochastic matrix I + A/Lambda. Every
//! quantity in that expansion is nonnegative, so nothing can cancel; the
//! only error is the truncated Poisson tail. It costs O(Lambda t) sparse
//! products (with matrix squaring above a step budget), which is why it is
//! the last resort and not the default. The route actually taken is
//! reported on the propagator so no accuracy loss goes unnoticed.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::model::RateTable;
use crate::spectral::distribution::DistributionVector;
use crate::spectral::eigen::sym_tridiag_eigen;
use crate::spectral::{steady_log_weights, Spectrum};
use crate::util::{KahanSum, SignedLog};

/// How far a raw kernel row may sit from exact normalization (in either
/// missing mass or clipped negative mass) before it is recomputed through
/// the eigenbasis route.
const ROW_DEFECT_LIMIT: f64 = 1e-6;

/// Largest acceptable certified rounding bound (summed |error| over the
/// row) for the residue sums. Normalization alone is a weak witness: near
/// a boundary at small t the cancellation errors can alternate in sign
/// and still sum to zero, so the row must also certify that it did not
/// lose more than this to cancellation.
const RESOLVENT_ERR_LIMIT: f64 = 1e-8;

/// Poisson mass the uniformized route may leave on the table. The blends
/// are renormalized afterwards, so this only bounds the shape distortion.
const POISSON_TAIL: f64 = 1e-12;

/// Above this many expected jumps a single-row uniformization is slower
/// than building the full kernel at a halved horizon and squaring it back
/// up, so the route switches to the matrix path (and caches it per t).
const UNIFORM_ROW_STEPS: f64 = 1e5;

/// Reusable evaluator of P(n, t | n0) for one rate table and spectrum.
/// Construction precomputes the minor tables (resolvent route) once; rows
/// for any (n0, t) are then O(N^2).
pub struct Propagator {
    rates: RateTable,
    eigenvalues: Vec<f64>,
    resolvent: Option<ResolventTables>,
    basis: OnceLock<EigenBasis>,
    /// Full uniformized kernels by t (bit pattern), kept for the matrix
    /// path of the jump-chain rescue so evolving a whole distribution does
    /// not re-square per row.
    uniform_cache: Mutex<HashMap<u64, Arc<Vec<Vec<f64>>>>>,
    uniformized: AtomicBool,
}

struct ResolventTables {
    /// theta[i][m]: leading m x m minor of (lambda_i I - A), m = 0..=N.
    theta: Vec<Vec<SignedLog>>,
    /// phi[i][s]: trailing minor over states s..=N, s = 1..=N+1 (index 0 unused).
    phi: Vec<Vec<SignedLog>>,
    /// denom[i] = prod_{j != i} (lambda_i - lambda_j).
    denom: Vec<SignedLog>,
    /// ln_birth_prefix[k] = sum_{j < k} ln birth[j].
    ln_birth_prefix: Vec<f64>,
    /// ln_death_prefix[k] = sum_{1 <= j <= k} ln death[j].
    ln_death_prefix: Vec<f64>,
}

struct EigenBasis {
    values: Vec<f64>,
    /// vectors[i][n]: orthonormal eigenvectors of the symmetrized generator.
    vectors: Vec<Vec<f64>>,
    /// 0.5 * unnormalized log steady weights; only differences are used.
    log_d: Vec<f64>,
}

impl Propagator {
    /// Builds the evaluator. `spectrum` must have been computed from
    /// `rates`; a near-degenerate spectrum selects the eigenbasis route
    /// immediately.
    pub fn new(rates: &RateTable, spectrum: &Spectrum) -> Result<Self> {
        if spectrum.len() != rates.n_states() {
            return Err(Error::InvalidArgument(format!(
                "spectrum has {} eigenvalues but the chain has {} states",
                spectrum.len(),
                rates.n_states()
            )));
        }
        let eigenvalues = spectrum.eigenvalues().to_vec();
        let resolvent = if spectrum.is_near_degenerate() {
            None
        } else {
            Some(ResolventTables::build(rates, &eigenvalues))
        };
        Ok(Propagator {
            rates: rates.clone(),
            eigenvalues,
            resolvent,
            basis: OnceLock::new(),
            uniform_cache: Mutex::new(HashMap::new()),
            uniformized: AtomicBool::new(false),
        })
    }

    pub fn n_states(&self) -> usize {
        self.rates.n_states()
    }

    /// True when construction found the spectrum too degenerate for the
    /// resolvent route and selected the eigenbasis evaluation up front.
    pub fn degenerate_spectrum(&self) -> bool {
        self.resolvent.is_none()
    }

    /// True if any evaluation so far has gone through the eigenbasis route
    /// (either a degenerate spectrum or a per-row accuracy reroute).
    pub fn used_eigenbasis(&self) -> bool {
        self.basis.get().is_some()
    }

    /// True if any evaluation so far has fallen all the way through to the
    /// uniformized jump chain (consensus-locked chains only).
    pub fn used_uniformized(&self) -> bool {
        self.uniformized.load(Ordering::Relaxed)
    }

    fn basis(&self) -> Result<&EigenBasis> {
        if self.basis.get().is_none() {
            let built = EigenBasis::build(&self.rates)?;
            let _ = self.basis.set(built);
        }
        Ok(self.basis.get().expect("basis was just initialized"))
    }

    /// Raw (unnormalized, unclipped) kernel row P(., t | n0).
    pub fn row_raw(&self, n0: usize, t: f64) -> Result<Vec<f64>> {
        let n_max = self.rates.n_max();
        if n0 > n_max {
            return Err(Error::StateOutOfRange { n: n0, n_max });
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        // e^{0 A} = I exactly; also covers the all-rates-zero chain
        if t == 0.0 || self.eigenvalues.iter().all(|&l| l == 0.0) {
            let mut row = vec![0.0; n_max + 1];
            row[n0] = 1.0;
            return Ok(row);
        }
        if let Some(tables) = &self.resolvent {
            let (row, err_bound) = tables.row(&self.eigenvalues, n0, t);
            let sum: f64 = row.iter().sum();
            let clipped: f64 = row.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
            if (sum - 1.0).abs() <= ROW_DEFECT_LIMIT
                && clipped <= ROW_DEFECT_LIMIT
                && err_bound <= RESOLVENT_ERR_LIMIT
            {
                return Ok(row);
            }
            // fall through: residue sum lost too much accuracy here
        }
        let basis = self.basis()?;
        let row = basis.row(n0, t);
        let sum: f64 = row.iter().sum();
        let clipped: f64 = row.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
        if (sum - 1.0).abs() <= ROW_DEFECT_LIMIT && clipped <= ROW_DEFECT_LIMIT {
            return Ok(row);
        }
        // Consensus-locked chain: the d_n rescaling spans more orders than
        // f64 carries and both spectral routes have given up. Pay for the
        // jump-chain evaluation, which cannot cancel.
        Ok(self.uniformized_row(n0, t))
    }

    /// Kernel row through the uniformized jump chain. Exact up to the
    /// truncated Poisson tail; every intermediate is nonnegative.
    fn uniformized_row(&self, n0: usize, t: f64) -> Vec<f64> {
        self.uniformized.store(true, Ordering::Relaxed);
        let n_states = self.n_states();
        let lambda = (0..n_states)
            .map(|n| self.rates.exit(n))
            .fold(0.0, f64::max);
        let chain = JumpChain::build(&self.rates, lambda);
        let mu = lambda * t;
        if mu <= UNIFORM_ROW_STEPS {
            let mut col = vec![0.0; n_states];
            col[n0] = 1.0;
            return chain
                .poisson_blend(vec![col], mu)
                .pop()
                .expect("one column in");
        }

        // Long horizon: halve t until the expected jump count is small,
        // build the full kernel there once, square back up, and keep it
        // for the other rows at this t.
        let key = t.to_bits();
        if let Some(m) = self.uniform_cache.lock().expect("cache lock").get(&key) {
            return m[n0].clone();
        }
        // squaring costs one dense pass, stepping costs a sparse one, so
        // the break-even base horizon is a few jumps per state
        let per_level = (2.0 * n_states as f64 / 3.0).max(64.0);
        let mut halvings = 0i32;
        let mut mu_base = mu;
        while mu_base > per_level {
            mu_base *= 0.5;
            halvings += 1;
        }
        let columns: Vec<Vec<f64>> = (0..n_states)
            .map(|i| {
                let mut c = vec![0.0; n_states];
                c[i] = 1.0;
                c
            })
            .collect();
        let mut kernel = chain.poisson_blend(columns, mu_base);
        for _ in 0..halvings {
            kernel = square_columns(&kernel);
        }
        let row = kernel[n0].clone();
        let mut cache = self.uniform_cache.lock().expect("cache lock");
        if cache.len() >= 64 {
            cache.clear();
        }
        cache.insert(key, Arc::new(kernel));
        row
    }

    /// Kernel row as a normalized distribution tagged with time t.
    pub fn distribution(&self, n0: usize, t: f64) -> Result<DistributionVector> {
        DistributionVector::from_raw(self.row_raw(n0, t)?, t)
    }

    /// Propagates a full initial distribution: sum_{n0} q0(n0) P(., t | n0).
    pub fn evolve(&self, q0: &DistributionVector, t: f64) -> Result<DistributionVector> {
        if q0.n_states() != self.n_states() {
            return Err(Error::InvalidArgument(format!(
                "initial distribution has {} states, chain has {}",
                q0.n_states(),
                self.n_states()
            )));
        }
        let mut acc = vec![0.0; self.n_states()];
        for (n0, &w) in q0.probs().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = self.row_raw(n0, t)?;
            for (a, r) in acc.iter_mut().zip(row.iter()) {
                *a += w * r;
            }
        }
        DistributionVector::from_raw(acc, t)
    }
}

impl ResolventTables {
    fn build(rates: &RateTable, eigenvalues: &[f64]) -> Self {
        let n_max = rates.n_max();
        let m_states = rates.n_states();

        let mut theta = Vec::with_capacity(m_states);
        let mut phi = Vec::with_capacity(m_states);
        for &lambda in eigenvalues {
            // leading minors: th[m+1] = (y - A[m,m]) th[m] - birth[m-1] death[m] th[m-1]
            let mut th = vec![SignedLog::ZERO; n_max + 1];
            th[0] = SignedLog::ONE;
            if n_max >= 1 {
                th[1] = SignedLog::new(lambda + rates.birth(0));
            }
            for s in 1..n_max {
                let main = SignedLog::new(lambda + rates.exit(s)).mul(th[s]);
                let corr = SignedLog::new(rates.birth(s - 1))
                    .mul(SignedLog::new(rates.death(s)))
                    .mul(th[s - 1]);
                th[s + 1] = main.add(corr.neg());
            }
            theta.push(th);

            // trailing minors over states s..N, stored at index s (1..=N+1)
            let mut ph = vec![SignedLog::ZERO; n_max + 2];
            ph[n_max + 1] = SignedLog::ONE;
            ph[n_max] = SignedLog::new(lambda + rates.death(n_max));
            for s in (1..n_max).rev() {
                let main = SignedLog::new(lambda + rates.exit(s)).mul(ph[s + 1]);
                let corr = SignedLog::new(rates.birth(s))
                    .mul(SignedLog::new(rates.death(s + 1)))
                    .mul(ph[s + 2]);
                ph[s] = main.add(corr.neg());
            }
            phi.push(ph);
        }

        let denom: Vec<SignedLog> = (0..eigenvalues.len())
            .map(|i| {
                let mut acc = SignedLog::ONE;
                for (j, &lj) in eigenvalues.iter().enumerate() {
                    if j != i {
                        acc = acc.mul(SignedLog::new(eigenvalues[i] - lj));
                    }
                }
                acc
            })
            .collect();

        let mut ln_birth_prefix = vec![0.0; m_states];
        for k in 1..m_states {
            ln_birth_prefix[k] = ln_birth_prefix[k - 1] + rates.birth(k - 1).ln();
        }
        let mut ln_death_prefix = vec![0.0; m_states];
        for k in 1..m_states {
            ln_death_prefix[k] = ln_death_prefix[k - 1] + rates.death(k).ln();
        }

        ResolventTables {
            theta,
            phi,
            denom,
            ln_birth_prefix,
            ln_death_prefix,
        }
    }

    /// Evaluates one kernel row, returning it together with a running
    /// bound on the |rounding error| summed over entries: each entry is a
    /// Kahan sum of terms aligned at the largest exponent, so roughly
    /// 2 eps times the sum of |term| bounds what cancellation can cost.
    fn row(&self, eigenvalues: &[f64], n0: usize, t: f64) -> (Vec<f64>, f64) {
        let n_states = self.ln_birth_prefix.len();
        let mut err_bound = 0.0f64;
        let mut row = vec![0.0; n_states];
        for (n, out) in row.iter_mut().enumerate() {
            let (lo, hi) = (n.min(n0), n.max(n0));
            let pref_ln = if n > n0 {
                self.ln_birth_prefix[n] - self.ln_birth_prefix[n0]
            } else if n < n0 {
                self.ln_death_prefix[n0] - self.ln_death_prefix[n]
            } else {
                0.0
            };
            if pref_ln == f64::NEG_INFINITY {
                continue; // a zero rate on the path: unreachable state
            }

            // residue sum with exponents aligned at the largest term
            let mut ln_terms = Vec::with_capacity(eigenvalues.len());
            let mut signs = Vec::with_capacity(eigenvalues.len());
            let mut ln_max = f64::NEG_INFINITY;
            for (i, &lambda) in eigenvalues.iter().enumerate() {
                let th = self.theta[i][lo];
                let ph = self.phi[i][hi + 1];
                let de = self.denom[i];
                let sign = th.sign * ph.sign * de.sign;
                if sign == 0 {
                    continue;
                }
                let decay = if lambda == 0.0 { 0.0 } else { lambda * t };
                let ln_term = decay + th.ln_abs + ph.ln_abs - de.ln_abs + pref_ln;
                if ln_term == f64::NEG_INFINITY {
                    continue;
                }
                ln_terms.push(ln_term);
                signs.push(f64::from(sign));
                ln_max = ln_max.max(ln_term);
            }
            if ln_terms.is_empty() || ln_max == f64::NEG_INFINITY {
                continue;
            }
            let mut acc = KahanSum::default();
            let mut abs_acc = 0.0f64;
            for (ln_term, sign) in ln_terms.iter().zip(signs.iter()) {
                let aligned = (ln_term - ln_max).exp();
                acc.add(sign * aligned);
                abs_acc += aligned;
            }
            err_bound += 2.0 * f64::EPSILON * abs_acc * ln_max.exp();
            let total = acc.value();
            if total != 0.0 {
                *out = total.signum() * (ln_max + total.abs().ln()).exp();
            }
        }
        (row, err_bound)
    }
}

impl EigenBasis {
    fn build(rates: &RateTable) -> Result<Self> {
        let log_w = steady_log_weights(rates)?;
        let n_max = rates.n_max();
        let diag: Vec<f64> = (0..=n_max).map(|n| -rates.exit(n)).collect();
        let offdiag: Vec<f64> = (0..n_max)
            .map(|n| (rates.birth(n) * rates.death(n + 1)).sqrt())
            .collect();
        let eig = sym_tridiag_eigen(&diag, &offdiag, true)?;
        let vectors = eig.vectors.expect("vectors were requested");
        // same snapping rule as the public spectrum computation, so the two
        // kernel routes see identical eigenvalues
        let mut values = eig.values;
        crate::spectral::snap_generator_eigenvalues(&mut values)?;
        Ok(EigenBasis {
            values,
            vectors,
            log_d: log_w.iter().map(|w| 0.5 * w).collect(),
        })
    }

    fn row(&self, n0: usize, t: f64) -> Vec<f64> {
        let n_states = self.log_d.len();
        let mut row = vec![0.0; n_states];
        for (n, out) in row.iter_mut().enumerate() {
            let mut acc = KahanSum::default();
            let mut abs_acc = 0.0f64;
            let mut vec_acc = 0.0f64;
            for (i, &lambda) in self.values.iter().enumerate() {
                let decay = if lambda == 0.0 {
                    1.0
                } else {
                    (lambda * t).exp()
                };
                let term = decay * self.vectors[i][n] * self.vectors[i][n0];
                acc.add(term);
                abs_acc += term.abs();
                // error model for the term: each eigenvector entry carries
                // an absolute eps-scale error (cross-basin components are
                // cancellation-built, so their smallness is not relative),
                // which enters the product scaled by the partner factor
                vec_acc += decay * (self.vectors[i][n].abs() + self.vectors[i][n0].abs());
            }
            let s = acc.value();
            // For a boundary n0 the d_n/d_n0 rescaling below reaches ~1e11
            // and would amplify the sum's rounding noise into visible mass
            // at states whose true probability is negligible. A value
            // below the sum's own noise floor carries no signal: drop it.
            let noise = n_states as f64 * f64::EPSILON * (abs_acc + vec_acc);
            if s.abs() > noise {
                *out = s.signum() * (self.log_d[n] - self.log_d[n0] + s.abs().ln()).exp();
            }
        }
        row
    }
}

/// The jump chain of the uniformization: I + A/Lambda with Lambda the
/// largest exit rate, a column-stochastic tridiagonal matrix.
struct JumpChain {
    stay: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

impl JumpChain {
    fn build(rates: &RateTable, lambda: f64) -> Self {
        let n_states = rates.n_states();
        JumpChain {
            // exact zero at the argmax state; never negative since
            // lambda >= exit everywhere
            stay: (0..n_states)
                .map(|n| (lambda - rates.exit(n)) / lambda)
                .collect(),
            up: (0..n_states).map(|n| rates.birth(n) / lambda).collect(),
            down: (0..n_states).map(|n| rates.death(n) / lambda).collect(),
        }
    }

    /// out = (I + A/Lambda) v.
    fn step(&self, v: &[f64], out: &mut [f64]) {
        let n_states = v.len();
        for (n, o) in out.iter_mut().enumerate() {
            let mut x = self.stay[n] * v[n];
            if n > 0 {
                x += self.up[n - 1] * v[n - 1];
            }
            if n + 1 < n_states {
                x += self.down[n + 1] * v[n + 1];
            }
            *o = x;
        }
    }

    /// sum_k Poisson(k; mu) J^k applied to each column, truncated once the
    /// accumulated Poisson mass is within POISSON_TAIL of one, then
    /// renormalized: the squaring path doubles any mass deficit per level,
    /// so the base kernel must preserve mass exactly.
    fn poisson_blend(&self, mut cols: Vec<Vec<f64>>, mu: f64) -> Vec<Vec<f64>> {
        if mu == 0.0 {
            return cols;
        }
        let mut out: Vec<Vec<f64>> = cols.iter().map(|c| vec![0.0; c.len()]).collect();
        let mut scratch: Vec<f64> = vec![0.0; cols.first().map_or(0, Vec::len)];
        let ln_mu = mu.ln();
        let mut ln_fact = 0.0;
        let mut cum = 0.0;
        let cap = (mu + 10.0 * (mu + 1.0).sqrt() + 100.0) as usize;
        for k in 0..=cap {
            if k > 0 {
                ln_fact += (k as f64).ln();
                for c in cols.iter_mut() {
                    self.step(c, &mut scratch);
                    std::mem::swap(c, &mut scratch);
                }
            }
            // weight in log form: the recurrence w *= mu/k underflows at
            // k = 0 for mu beyond ~745 even though the peak weights are fine
            let ln_w = -mu + (k as f64) * ln_mu - ln_fact;
            if ln_w > -745.0 {
                let w = ln_w.exp();
                cum += w;
                for (o, c) in out.iter_mut().zip(cols.iter()) {
                    for (a, b) in o.iter_mut().zip(c.iter()) {
                        *a += w * b;
                    }
                }
                if 1.0 - cum <= POISSON_TAIL {
                    break;
                }
            }
        }
        for o in out.iter_mut() {
            for a in o.iter_mut() {
                *a /= cum;
            }
        }
        out
    }
}

/// C = M * M for a column-stored square matrix: column j of C is M applied
/// to column j of M. Nonnegative inputs only, so no cancellation.
fn square_columns(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_states = m.len();
    let mut out = vec![vec![0.0; n_states]; n_states];
    for (j, col) in m.iter().enumerate() {
        let target = &mut out[j];
        for (mid, &weight) in col.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            for (t, &v) in target.iter_mut().zip(m[mid].iter()) {
                *t += weight * v;
            }
        }
    }
    out
}

/// One kernel row P(., t | n0) as a distribution. Convenience wrapper that
/// builds a [`Propagator`] for a single evaluation; batch callers should
/// hold a `Propagator` themselves.
pub fn transition_probability(
    rates: &RateTable,
    spectrum: &Spectrum,
    n0: usize,
    t: f64,
) -> Result<DistributionVector> {
    Propagator::new(rates, spectrum)?.distribution(n0, t)
}

/// Propagates an initial distribution to time t under constant rates.
pub fn evolve(
    rates: &RateTable,
    spectrum: &Spectrum,
    q0: &DistributionVector,
    t: f64,
) -> Result<DistributionVector> {
    Propagator::new(rates, spectrum)?.evolve(q0, t)
}
