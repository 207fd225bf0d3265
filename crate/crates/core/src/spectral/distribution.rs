//! Probability vectors over the population states n = 0..=N, tagged with
//! the time they refer to and carrying the numerical diagnostics of their
//! construction (pre-normalization defect and clipped negative mass).

use crate::error::{Error, Result};
use crate::model::order_parameter;

/// A normalized distribution over n = 0..=N at one instant. Construction
/// clips negative numerical dust to zero and renormalizes; how much was
/// clipped and how far the raw sum was from 1 stay available as
/// diagnostics, so solver accuracy is never silently discarded.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionVector {
    probs: Vec<f64>,
    timestamp: f64,
    renorm_defect: f64,
    clipped_mass: f64,
}

impl DistributionVector {
    /// Wraps a raw solver output: entries must be finite, the sum positive.
    /// Negative entries are clipped to zero (total recorded), then the
    /// vector is rescaled to sum exactly to 1 (deviation recorded).
    pub fn from_raw(raw: Vec<f64>, timestamp: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidDistribution(
                "distribution must cover at least one state".to_string(),
            ));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDistribution(
                "distribution entries must be finite".to_string(),
            ));
        }
        let mut clipped = 0.0;
        let mut probs = raw;
        for p in probs.iter_mut() {
            if *p < 0.0 {
                clipped += -*p;
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution(
                "distribution has no positive mass".to_string(),
            ));
        }
        let defect = (sum - 1.0).abs();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(DistributionVector {
            probs,
            timestamp,
            renorm_defect: defect,
            clipped_mass: clipped,
        })
    }

    /// Point mass at n0.
    pub fn delta(n_max: usize, n0: usize, timestamp: f64) -> Result<Self> {
        if n0 > n_max {
            return Err(Error::StateOutOfRange { n: n0, n_max });
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n0] = 1.0;
        Ok(DistributionVector {
            probs,
            timestamp,
            renorm_defect: 0.0,
            clipped_mass: 0.0,
        })
    }

    /// Binomial(N, p0) over the states: each agent independently decides +1
    /// with probability p0. Evaluated through log-gamma for large N.
    pub fn binomial(n_max: usize, p0: f64, timestamp: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidArgument(format!(
                "binomial weight p0 must lie in [0, 1], got {p0}"
            )));
        }
        if p0 == 0.0 {
            return Self::delta(n_max, 0, timestamp);
        }
        if p0 == 1.0 {
            return Self::delta(n_max, n_max, timestamp);
        }
        let nf = n_max as f64;
        let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
        let raw: Vec<f64> = (0..=n_max)
            .map(|k| {
                let kf = k as f64;
                (ln_choose(nf, kf) + kf * lp + (nf - kf) * lq).exp()
            })
            .collect();
        Self::from_raw(raw, timestamp)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs[n]
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    /// |raw sum - 1| before the final rescale.
    pub fn renorm_defect(&self) -> f64 {
        self.renorm_defect
    }

    /// Total negative mass removed during construction.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Returns a copy carrying a different timestamp (used when a vector is
    /// reinterpreted as the initial condition of a later segment).
    pub fn at_time(&self, timestamp: f64) -> Self {
        let mut out = self.clone();
        out.timestamp = timestamp;
        out
    }

    /// Total variation distance (half the L1 distance).
    pub fn total_variation(&self, other: &DistributionVector) -> Result<f64> {
        if self.probs.len() != other.probs.len() {
            return Err(Error::InvalidArgument(format!(
                "state-space mismatch: {} vs {} states",
                self.probs.len(),
                other.probs.len()
            )));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(other.probs.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Mean of the count n.
    pub fn mean_count(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Variance of the count n.
    pub fn variance_count(&self) -> f64 {
        let mean = self.mean_count();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum()
    }

    /// Mean of the order parameter m.
    pub fn mean_order_parameter(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| order_parameter(n, self.n_max()) * p)
            .sum()
    }
}

/// ln C(n, k) through ln-gamma (Stirling series), exact enough for
/// probability work at any N this library sees.
pub(crate) fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Lanczos approximation of ln Gamma(x) for x > 0.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    // g = 7, n = 9 Lanczos coefficients, kept at published precision
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
