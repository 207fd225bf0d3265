//! Model definition: N agents each hold a binary decision s = -1 or +1.
//! The population state is the count n of agents deciding +1, summarised by
//! the order parameter m = (2n - N)/N. Agents flip one at a time, driven by
//! an external field F (the "zeitgeist"), an imitation coupling J (already
//! rescaled by N), an altruism weight alpha, a rationality beta, and an
//! attempt-rate scale gamma.
//!
//! This module owns everything that does not involve time: per-agent flip
//! rates, the aggregate birth-death rate table, the energy function whose
//! differences the flip gains reproduce, and the mean-field self-consistency
//! equation m = tanh(beta (F + J (1 + alpha) m)).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Static model parameters. `j` is the per-capita coupling: the interaction
/// term in the gain is `j * m(n)`, not `j * n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// External field F; F > 0 biases decisions toward +1.
    pub f: f64,
    /// Imitation coupling J >= 0 (rescaled by population size).
    pub j: f64,
    /// Altruism weight alpha in [0, 1].
    pub alpha: f64,
    /// Rationality (inverse temperature) beta >= 0.
    pub beta: f64,
    /// Overall attempt-rate scale gamma > 0.
    pub gamma: f64,
    /// Population size N >= 1.
    pub n_agents: usize,
}

impl ModelParams {
    pub fn new(f: f64, j: f64, alpha: f64, beta: f64, gamma: f64, n_agents: usize) -> Result<Self> {
        let p = ModelParams {
            f,
            j,
            alpha,
            beta,
            gamma,
            n_agents,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !self.f.is_finite() {
            return bad(format!("F must be finite, got {}", self.f));
        }
        if !self.j.is_finite() || self.j < 0.0 {
            return bad(format!("J must be finite and >= 0, got {}", self.j));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return bad(format!("gamma must be finite and > 0, got {}", self.gamma));
        }
        if self.n_agents == 0 {
            return bad("N must be >= 1".to_string());
        }
        Ok(())
    }

    /// Order parameter m(n) = (2n - N)/N in [-1, 1].
    pub fn order_parameter(&self, n: usize) -> Result<f64> {
        self.check_state(n)?;
        Ok(order_parameter(n, self.n_agents))
    }

    fn check_state(&self, n: usize) -> Result<()> {
        if n > self.n_agents {
            Err(Error::StateOutOfRange {
                n,
                n_max: self.n_agents,
            })
        } else {
            Ok(())
        }
    }

    /// Gain for an agent currently deciding `s` to flip, in population state
    /// n: -2 s (F + J m(n) (1 + alpha)) + 2 (1 + alpha) J / N. The second
    /// term is the agent's own contribution to the imitation field; it is
    /// kept (not dropped as a 1/N correction) so that the gain is exactly
    /// the difference of [`ModelParams::hamiltonian`] under the flip.
    ///
    /// Errors if no agent with decision `s` exists in state n (s = +1 needs
    /// n >= 1, s = -1 needs n <= N - 1).
    pub fn gain(&self, s: i8, n: usize) -> Result<f64> {
        self.check_state(n)?;
        if s != 1 && s != -1 {
            return Err(Error::InvalidArgument(format!(
                "decision must be +1 or -1, got {s}"
            )));
        }
        if (s == 1 && n == 0) || (s == -1 && n == self.n_agents) {
            return Err(Error::InconsistentFlip {
                s,
                n,
                n_max: self.n_agents,
            });
        }
        Ok(self.gain_unchecked(s, n))
    }

    /// The gain formula without the flip-consistency check. The rate-table
    /// builder evaluates it at the boundary states, where the multiplying
    /// agent count (N - n) or n is zero anyway.
    fn gain_unchecked(&self, s: i8, n: usize) -> f64 {
        let m = order_parameter(n, self.n_agents);
        let s = f64::from(s);
        -2.0 * s * (self.f + self.j * m * (1.0 + self.alpha))
            + 2.0 * (1.0 + self.alpha) * self.j / self.n_agents as f64
    }

    /// Energy function over population states whose flip differences equal
    /// the gain: H(n) = N m(n) (F + (alpha + 1)/2 J m(n)). The birth-death
    /// chain under the Logit family is in detailed balance with respect to
    /// exp(beta H(n)) weighted by the binomial state degeneracy.
    pub fn hamiltonian(&self, n: usize) -> Result<f64> {
        self.check_state(n)?;
        let m = order_parameter(n, self.n_agents);
        Ok(self.n_agents as f64 * m * (self.f + 0.5 * (self.alpha + 1.0) * self.j * m))
    }

    /// The rationality beta_c = 1 / (J (1 + alpha)) above which the F = 0
    /// self-consistency equation develops two symmetric stable roots.
    pub fn critical_rationality(&self) -> Result<f64> {
        if self.j <= 0.0 {
            return Err(Error::NoPhaseTransition);
        }
        Ok(1.0 / (self.j * (1.0 + self.alpha)))
    }

    /// All roots of m = tanh(beta (F + J (1 + alpha) m)) on [-1, 1], found
    /// by sign-change bracketing on a uniform 10^4-interval grid refined by
    /// bisection to 1e-12, with stability read off the slope of
    /// g(m) = tanh(...) - m at the root.
    pub fn mean_field_equilibria(&self) -> Result<EquilibriumSet> {
        self.validate()?;
        let g = |m: f64| (self.beta * (self.f + self.j * (1.0 + self.alpha) * m)).tanh() - m;
        let g_prime = |m: f64| {
            let c = (self.beta * (self.f + self.j * (1.0 + self.alpha) * m)).cosh();
            self.beta * self.j * (1.0 + self.alpha) / (c * c) - 1.0
        };

        const INTERVALS: usize = 10_000;
        let mut roots: Vec<f64> = Vec::new();
        let push_root = |m: f64, roots: &mut Vec<f64>| {
            if !roots.iter().any(|&r| (r - m).abs() < 1e-9) {
                roots.push(m);
            }
        };

        let grid = |i: usize| -1.0 + 2.0 * i as f64 / INTERVALS as f64;
        let mut prev_m = grid(0);
        let mut prev_g = g(prev_m);
        if prev_g == 0.0 {
            push_root(prev_m, &mut roots);
        }
        for i in 1..=INTERVALS {
            let m = grid(i);
            let gm = g(m);
            if gm == 0.0 {
                push_root(m, &mut roots);
            } else if prev_g != 0.0 && prev_g.signum() != gm.signum() {
                // bisect [prev_m, m] down to an interval of width 1e-12
                let (mut lo, mut hi) = (prev_m, m);
                let (mut glo, _) = (prev_g, gm);
                while hi - lo > 1e-12 {
                    let mid = 0.5 * (lo + hi);
                    let gmid = g(mid);
                    if gmid == 0.0 {
                        lo = mid;
                        hi = mid;
                    } else if gmid.signum() == glo.signum() {
                        lo = mid;
                        glo = gmid;
                    } else {
                        hi = mid;
                    }
                }
                push_root(0.5 * (lo + hi), &mut roots);
            }
            prev_m = m;
            prev_g = gm;
        }

        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let equilibria: Vec<Equilibrium> = roots
            .into_iter()
            .map(|m| Equilibrium {
                m,
                stable: g_prime(m) <= 0.0,
            })
            .collect();

        if equilibria.len() == 3 {
            assert!(
                equilibria[0].stable && !equilibria[1].stable && equilibria[2].stable,
                "three roots must come as stable / unstable / stable, got {equilibria:?}"
            );
        }
        Ok(EquilibriumSet { roots: equilibria })
    }
}

/// m(n) = (2n - N)/N without range checking.
pub fn order_parameter(n: usize, n_agents: usize) -> f64 {
    (2.0 * n as f64 - n_agents as f64) / n_agents as f64
}

/// Inverse of [`order_parameter`]: the state count n = N (m + 1)/2, which
/// must land on an integer to within `tol`.
pub fn state_from_order_parameter(m: f64, n_agents: usize, tol: f64) -> Result<usize> {
    let exact = n_agents as f64 * (m + 1.0) / 2.0;
    let rounded = exact.round();
    if (exact - rounded).abs() > tol || rounded < 0.0 || rounded > n_agents as f64 {
        return Err(Error::InvalidArgument(format!(
            "order parameter {m} does not map to an integer state for N = {n_agents}"
        )));
    }
    Ok(rounded as usize)
}

/// The three flip-rate prescriptions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RateFamily {
    /// r(n) = gamma * sigma(beta * gain(s=-1, n)), l(n) likewise with
    /// s = +1, where sigma is the logistic function. Bounded by gamma, in
    /// detailed balance with exp(beta H).
    Logit,
    /// r(n) = gamma * exp(beta * U_after) with U_after the flipping agent's
    /// post-flip utility -s (F + J m(n - s)); unbounded in beta, provided
    /// for exploration. The altruism weight does not enter this family.
    Arrhenius,
    /// Pure noise-plus-imitation: r(n) = epsilon + mu n/(N-1),
    /// l(n) = epsilon + mu (N-n)/(N-1). Ignores F, J, alpha, beta; needs
    /// N >= 2.
    Kirman { epsilon: f64, mu: f64 },
}

impl RateFamily {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        match self {
            RateFamily::Logit | RateFamily::Arrhenius => Ok(()),
            RateFamily::Kirman { epsilon, mu } => {
                if params.n_agents < 2 {
                    return Err(Error::InvalidParams(
                        "the Kirman family needs N >= 2".to_string(),
                    ));
                }
                if !epsilon.is_finite() || *epsilon <= 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "Kirman epsilon must be > 0, got {epsilon}"
                    )));
                }
                if !mu.is_finite() || *mu < 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "Kirman mu must be >= 0, got {mu}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Per-agent flip rates (r, l) in state n: r is the rate at which one
    /// -1 agent flips to +1, l the reverse. Both are defined for all
    /// n in 0..=N; at the boundary states the inapplicable direction is
    /// multiplied by zero agents in the rate table anyway.
    pub fn per_agent_rates(&self, params: &ModelParams, n: usize) -> Result<(f64, f64)> {
        if n > params.n_agents {
            return Err(Error::StateOutOfRange {
                n,
                n_max: params.n_agents,
            });
        }
        self.validate(params)?;
        match self {
            RateFamily::Logit => {
                let r = params.gamma * sigma(params.beta * params.gain_unchecked(-1, n));
                let l = params.gamma * sigma(params.beta * params.gain_unchecked(1, n));
                Ok((r, l))
            }
            RateFamily::Arrhenius => {
                // Post-flip utility of the flipping agent; the field is
                // evaluated at the post-flip count. For the boundary states
                // the formula is extended linearly in m past +-1 (the value
                // never enters the dynamics there).
                let nf = params.n_agents as f64;
                let influence = |count: f64| params.f + params.j * (2.0 * count - nf) / nf;
                let r = params.gamma * (params.beta * influence(n as f64 + 1.0)).exp();
                let l = params.gamma * (-params.beta * influence(n as f64 - 1.0)).exp();
                Ok((r, l))
            }
            RateFamily::Kirman { epsilon, mu } => {
                let nf = params.n_agents as f64;
                let r = epsilon + mu * n as f64 / (nf - 1.0);
                let l = epsilon + mu * (nf - n as f64) / (nf - 1.0);
                Ok((r, l))
            }
        }
    }
}

/// Numerically stable logistic function 1 / (1 + e^-x).
pub(crate) fn sigma(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Aggregate transition rates of the population birth-death chain over
/// n = 0..=N. `birth[n]` is the total rate n -> n+1 (zero at n = N) and
/// `death[n]` the total rate n -> n-1 (zero at n = 0).
#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl RateTable {
    /// Builds the table from per-agent rates: birth[n] = (N - n) r(n),
    /// death[n] = n l(n).
    pub fn build(params: &ModelParams, family: &RateFamily) -> Result<Self> {
        params.validate()?;
        family.validate(params)?;
        let n_states = params.n_agents + 1;
        let mut birth = vec![0.0; n_states];
        let mut death = vec![0.0; n_states];
        for n in 0..n_states {
            let (r, l) = family.per_agent_rates(params, n)?;
            birth[n] = (params.n_agents - n) as f64 * r;
            death[n] = n as f64 * l;
        }
        RateTable::from_rates(birth, death)
    }

    /// Wraps explicit rate vectors (used by tests and toy chains). Both
    /// vectors must have length N + 1 with birth[N] = 0 and death[0] = 0.
    pub fn from_rates(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        if birth.len() != death.len() || birth.is_empty() {
            return Err(Error::InvalidParams(
                "birth and death vectors must have equal nonzero length".to_string(),
            ));
        }
        let n = birth.len() - 1;
        if birth[n] != 0.0 || death[0] != 0.0 {
            return Err(Error::InvalidParams(
                "boundary rates must vanish: birth[N] = 0 and death[0] = 0".to_string(),
            ));
        }
        for (k, v) in birth.iter().chain(death.iter()).enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "rates must be finite and >= 0, entry {k} is {v}"
                )));
            }
        }
        Ok(RateTable { birth, death })
    }

    /// Largest state index N.
    pub fn n_max(&self) -> usize {
        self.birth.len() - 1
    }

    /// Number of states N + 1.
    pub fn n_states(&self) -> usize {
        self.birth.len()
    }

    /// Total rate n -> n+1.
    pub fn birth(&self, n: usize) -> f64 {
        self.birth[n]
    }

    /// Total rate n -> n-1.
    pub fn death(&self, n: usize) -> f64 {
        self.death[n]
    }

    /// Total exit rate from state n.
    pub fn exit(&self, n: usize) -> f64 {
        self.birth[n] + self.death[n]
    }

    pub fn births(&self) -> &[f64] {
        &self.birth
    }

    pub fn deaths(&self) -> &[f64] {
        &self.death
    }

    /// True when every interior transition rate is strictly positive, i.e.
    /// the chain can reach every state from every other.
    pub fn is_irreducible(&self) -> bool {
        let n = self.n_max();
        self.birth[..n].iter().all(|&x| x > 0.0) && self.death[1..].iter().all(|&x| x > 0.0)
    }

    /// The n -> N - n reflection of the chain (births and deaths swap).
    /// Escape-time calculations on the right half of a chain reuse the
    /// left-half recursion through this mirror.
    pub fn mirrored(&self) -> RateTable {
        let n = self.n_max();
        let mut birth = vec![0.0; n + 1];
        let mut death = vec![0.0; n + 1];
        for k in 0..=n {
            birth[k] = self.death[n - k];
            death[k] = self.birth[n - k];
        }
        RateTable { birth, death }
    }
}

/// One root of the mean-field self-consistency equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub m: f64,
    pub stable: bool,
}

/// Roots of m = tanh(beta (F + J (1 + alpha) m)), sorted by m. Away from
/// tangencies the count is 1 (monostable) or 3 (bistable, with the unstable
/// root between the stable pair).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub roots: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn is_bistable(&self) -> bool {
        self.roots.len() == 3
    }

    pub fn stable(&self) -> Vec<&Equilibrium> {
        self.roots.iter().filter(|e| e.stable).collect()
    }

    pub fn unstable_root(&self) -> Option<f64> {
        self.roots.iter().find(|e| !e.stable).map(|e| e.m)
    }
}
