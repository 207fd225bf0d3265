//! Maximum-likelihood calibration of (F, J, gamma) from observed
//! order-parameter trajectories.
//!
//! The likelihood is the Markov transition product: each observation is
//! conditioned on its predecessor through the analytic transition
//! probability P(n_i, t_i | n_{i-1}, t_{i-1}), with the first point of
//! every trajectory treated as given. beta and alpha are pinned to 1 and 0:
//! beta rescales F and J inside the gain and alpha rescales J, so neither
//! is separately identifiable from trajectory data.
//!
//! Optimization is a seeded self-adaptive differential evolution over
//! [`ParamBounds`], with J and gamma searched in log space.

mod de;

pub use de::differential_evolution;

use crate::error::{Error, Result};
use crate::model::{order_parameter, ModelParams, RateFamily, RateTable};
use crate::simulate::Trajectory;
use crate::spectral::{build_master_operator, compute_spectrum, steady_state, Propagator};
use crate::util::KahanSum;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Transition probabilities are clipped from below at this value before
/// taking logs, so a single numerically-zero transition cannot blow up the
/// objective while rankings are preserved.
pub const PROB_FLOOR: f64 = 1e-300;

/// A candidate parameter point. beta and alpha are not part of the search
/// space (see the module docs).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub gamma: f64,
}

/// Box constraints for the search. J and gamma are positive and explored
/// in log space; F is explored linearly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    #[serde(rename = "F")]
    pub f: [f64; 2],
    #[serde(rename = "J")]
    pub j: [f64; 2],
    pub gamma: [f64; 2],
}

impl Default for ParamBounds {
    /// The default search box: F in [-2, 2], J in [e^-2, e^2], gamma in
    /// [e^-1, e].
    fn default() -> Self {
        ParamBounds {
            f: [-2.0, 2.0],
            j: [(-2.0f64).exp(), 2.0f64.exp()],
            gamma: [(-1.0f64).exp(), 1.0f64.exp()],
        }
    }
}

impl ParamBounds {
    /// Bounds must be finite with lo <= hi; J and gamma strictly positive.
    /// Collapsed (zero-width) dimensions are allowed and stay fixed.
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, b: [f64; 2]| -> Result<()> {
            if !b[0].is_finite() || !b[1].is_finite() || b[0] > b[1] {
                return Err(Error::InvalidArgument(format!(
                    "{name} bounds must be finite with lo <= hi, got [{}, {}]",
                    b[0], b[1]
                )));
            }
            Ok(())
        };
        ordered("F", self.f)?;
        ordered("J", self.j)?;
        ordered("gamma", self.gamma)?;
        if self.j[0] <= 0.0 || self.gamma[0] <= 0.0 {
            return Err(Error::InvalidArgument(
                "J and gamma bounds must be strictly positive (searched in log space)".to_string(),
            ));
        }
        Ok(())
    }
}

/// Knobs for [`calibrate`]: population size and generation count for the
/// evolution, and the RNG seed that makes the whole run reproducible.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub pop_size: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            pop_size: 50,
            n_steps: 200,
            seed: 0,
        }
    }
}

/// Outcome of a calibration run: the best parameter point found, its
/// objective value, and enough bookkeeping to reproduce the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub theta_star: Theta,
    pub nll: f64,
    pub evaluations: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
struct DataTrajectory {
    times: Vec<f64>,
    counts: Vec<usize>,
}

/// Observed trajectories of the order parameter, already mapped to integer
/// counts, sharing one system size N.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    trajectories: Vec<DataTrajectory>,
    n_agents: usize,
}

/// Sidecar metadata stored next to a dataset CSV. beta and alpha are
/// recorded for honesty but must hold their pinned values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    #[serde(rename = "N")]
    pub n_agents: usize,
    pub beta: f64,
    pub alpha: f64,
}

impl DatasetMeta {
    pub fn new(n_agents: usize) -> Self {
        DatasetMeta {
            n_agents,
            beta: 1.0,
            alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::DatasetInvalid(
                "metadata must declare N >= 1".to_string(),
            ));
        }
        if self.beta != 1.0 || self.alpha != 0.0 {
            return Err(Error::DatasetInvalid(format!(
                "calibration pins beta = 1 and alpha = 0; metadata declares \
                 beta = {}, alpha = {}",
                self.beta, self.alpha
            )));
        }
        Ok(())
    }
}

/// Maps an order-parameter reading to its integer count, enforcing the
/// rounding tolerance on the count scale.
fn count_from_order_parameter(m: f64, n_agents: usize) -> Result<usize> {
    if !m.is_finite() {
        return Err(Error::DatasetInvalid(format!(
            "order parameter must be finite, got {m}"
        )));
    }
    let x = (m + 1.0) / 2.0 * n_agents as f64;
    let n = x.round();
    if (x - n).abs() > 1e-9 {
        return Err(Error::DatasetInvalid(format!(
            "m = {m} maps to count {x}, which is {:.3e} away from an integer",
            (x - n).abs()
        )));
    }
    if n < 0.0 || n > n_agents as f64 {
        return Err(Error::DatasetInvalid(format!(
            "m = {m} maps to count {n}, outside 0..={n_agents}"
        )));
    }
    Ok(n as usize)
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::DatasetInvalid(format!(
            "a trajectory needs at least 2 points to contain a transition, got {}",
            times.len()
        )));
    }
    for (i, w) in times.windows(2).enumerate() {
        if !w[0].is_finite() || !w[1].is_finite() || w[1] < w[0] {
            return Err(Error::DatasetInvalid(format!(
                "times must be finite and non-decreasing; points {i} and {} \
                 read {} then {}",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    if !times[0].is_finite() || times[0] < 0.0 {
        return Err(Error::DatasetInvalid(format!(
            "times must start at a finite value >= 0, got {}",
            times[0]
        )));
    }
    Ok(())
}

impl Dataset {
    /// Builds a dataset from (times, order-parameter readings) pairs.
    pub fn from_order_parameters(
        series: Vec<(Vec<f64>, Vec<f64>)>,
        n_agents: usize,
    ) -> Result<Self> {
        let counts_series = series
            .into_iter()
            .map(|(times, ms)| {
                let counts = ms
                    .iter()
                    .map(|&m| count_from_order_parameter(m, n_agents))
                    .collect::<Result<Vec<usize>>>()?;
                Ok((times, counts))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(counts_series, n_agents)
    }

    /// Builds a dataset from (times, integer counts) pairs.
    pub fn from_counts(series: Vec<(Vec<f64>, Vec<usize>)>, n_agents: usize) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::DatasetInvalid("N must be >= 1".to_string()));
        }
        if series.is_empty() {
            return Err(Error::DatasetInvalid(
                "dataset needs at least one trajectory".to_string(),
            ));
        }
        let trajectories = series
            .into_iter()
            .map(|(times, counts)| {
                if times.len() != counts.len() {
                    return Err(Error::DatasetInvalid(format!(
                        "{} times for {} values",
                        times.len(),
                        counts.len()
                    )));
                }
                validate_times(&times)?;
                if let Some(&bad) = counts.iter().find(|&&n| n > n_agents) {
                    return Err(Error::StateOutOfRange {
                        n: bad,
                        n_max: n_agents,
                    });
                }
                Ok(DataTrajectory { times, counts })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            trajectories,
            n_agents,
        })
    }

    /// Converts simulated trajectories into a dataset (grid times, no
    /// thinning).
    pub fn from_simulated(trajectories: &[Trajectory], n_agents: usize) -> Result<Self> {
        Self::from_counts(
            trajectories
                .iter()
                .map(|t| (t.times().to_vec(), t.states().to_vec()))
                .collect(),
            n_agents,
        )
    }

    /// Parses the `traj_id,t,m` CSV interchange format. Rows are grouped
    /// by trajectory id in order of first appearance; times within each
    /// trajectory must be non-decreasing. Errors carry 1-based line
    /// numbers.
    pub fn from_csv(text: &str, n_agents: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "traj_id,t,m" => {}
            other => {
                return Err(Error::DatasetRow {
                    line: 1,
                    msg: format!(
                        "expected header 'traj_id,t,m', got '{}'",
                        other.map(|(_, h)| h).unwrap_or("")
                    ),
                })
            }
        }
        let mut order: Vec<u64> = Vec::new();
        let mut by_id: HashMap<u64, (Vec<f64>, Vec<usize>)> = HashMap::new();
        for (idx, raw) in lines {
            let line = idx + 1; // enumerate is 0-based over all lines
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::DatasetRow {
                    line,
                    msg: format!("expected 3 comma-separated fields, got {}", fields.len()),
                });
            }
            let id: u64 = fields[0].trim().parse().map_err(|_| Error::DatasetRow {
                line,
                msg: format!("traj_id '{}' is not an unsigned integer", fields[0]),
            })?;
            let t: f64 = fields[1].trim().parse().map_err(|_| Error::DatasetRow {
                line,
                msg: format!("t '{}' is not a number", fields[1]),
            })?;
            let m: f64 = fields[2].trim().parse().map_err(|_| Error::DatasetRow {
                line,
                msg: format!("m '{}' is not a number", fields[2]),
            })?;
            let n = count_from_order_parameter(m, n_agents).map_err(|e| Error::DatasetRow {
                line,
                msg: e.to_string(),
            })?;
            let entry = by_id.entry(id).or_insert_with(|| {
                order.push(id);
                (Vec::new(), Vec::new())
            });
            if let Some(&last) = entry.0.last() {
                if t < last {
                    return Err(Error::DatasetRow {
                        line,
                        msg: format!("time {t} decreases below {last} within trajectory {id}"),
                    });
                }
            }
            entry.0.push(t);
            entry.1.push(n);
        }
        if order.is_empty() {
            return Err(Error::DatasetInvalid(
                "CSV contains a header but no data rows".to_string(),
            ));
        }
        let series = order
            .into_iter()
            .map(|id| by_id.remove(&id).expect("id recorded on insertion"))
            .collect();
        Self::from_counts(series, n_agents)
    }

    /// Serializes to the `traj_id,t,m` CSV format. Floats use the shortest
    /// representation that round-trips, so write/parse cycles are lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("traj_id,t,m\n");
        for (id, traj) in self.trajectories.iter().enumerate() {
            for (t, &n) in traj.times.iter().zip(&traj.counts) {
                out.push_str(&format!(
                    "{id},{t},{m}\n",
                    m = order_parameter(n, self.n_agents)
                ));
            }
        }
        out
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    /// Total number of transitions (likelihood terms) in the dataset.
    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(|t| t.times.len() - 1).sum()
    }

    /// The (times, counts) slices of trajectory k.
    pub fn trajectory(&self, k: usize) -> (&[f64], &[usize]) {
        (&self.trajectories[k].times, &self.trajectories[k].counts)
    }

    /// Merges several datasets over the same N into one.
    pub fn concat(parts: Vec<Dataset>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let mut first = iter
            .next()
            .ok_or_else(|| Error::DatasetInvalid("nothing to concatenate".to_string()))?;
        for part in iter {
            if part.n_agents != first.n_agents {
                return Err(Error::DatasetInvalid(format!(
                    "cannot concatenate datasets with N = {} and N = {}",
                    first.n_agents, part.n_agents
                )));
            }
            first.trajectories.extend(part.trajectories);
        }
        Ok(first)
    }
}

/// Builds the solver stack for one candidate point (rates, spectrum,
/// propagator) with beta = 1 and alpha = 0 pinned.
fn propagator_for(theta: &Theta, n_agents: usize) -> Result<Propagator> {
    let params = ModelParams::new(theta.f, theta.j, 0.0, 1.0, theta.gamma, n_agents)?;
    let rates = RateTable::build(&params, &RateFamily::Logit)?;
    let op = build_master_operator(&rates);
    let steady = steady_state(&rates)?;
    let spectrum = compute_spectrum(&op, &steady)?;
    Propagator::new(&rates, &spectrum)
}

/// Negative log-likelihood of the dataset under the transition-product
/// convention. The spectrum and resolvent tables are computed once per
/// candidate and every distinct (previous count, time gap) row only once;
/// repeated gaps (uniform sampling grids) make this the dominant saving.
pub fn neg_log_likelihood(theta: &Theta, data: &Dataset) -> Result<f64> {
    let prop = propagator_for(theta, data.n_agents)?;
    let mut rows: HashMap<(usize, u64), Vec<f64>> = HashMap::new();
    let mut nll = KahanSum::default();
    for traj in &data.trajectories {
        for i in 1..traj.times.len() {
            let dt = traj.times[i] - traj.times[i - 1];
            let n_prev = traj.counts[i - 1];
            let key = (n_prev, dt.to_bits());
            let row = match rows.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(prop.distribution(n_prev, dt)?.probs().to_vec())
                }
            };
            nll.add(-row[traj.counts[i]].max(PROB_FLOOR).ln());
        }
    }
    Ok(nll.value())
}

/// Calibrates (F, J, gamma) against the dataset by minimizing
/// [`neg_log_likelihood`] with [`differential_evolution`]. The result is
/// the best point found under the budget -- a good local minimum, not a
/// certified global one.
pub fn calibrate(
    data: &Dataset,
    bounds: &ParamBounds,
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    differential_evolution(
        |theta| neg_log_likelihood(theta, data),
        bounds,
        config.pop_size,
        config.n_steps,
        config.seed,
    )
}

/// The two recovery metrics: E_tot sums the absolute relative errors of
/// F, J, gamma; f is the absolute relative error of the ratio F/J, which
/// controls where the equilibria sit.
pub fn error_metrics(theta_true: &Theta, theta_star: &Theta) -> Result<(f64, f64)> {
    let rel = |true_v: f64, got: f64, name: &str| -> Result<f64> {
        if true_v == 0.0 {
            return Err(Error::UndefinedMetric(format!(
                "relative error of {name} is undefined: true value is 0"
            )));
        }
        Ok(((true_v - got) / true_v).abs())
    };
    let e_tot = rel(theta_true.f, theta_star.f, "F")?
        + rel(theta_true.j, theta_star.j, "J")?
        + rel(theta_true.gamma, theta_star.gamma, "gamma")?;
    if theta_true.j == 0.0 || theta_star.j == 0.0 {
        return Err(Error::UndefinedMetric(
            "field-to-coupling ratio is undefined: J is 0".to_string(),
        ));
    }
    let ratio_true = theta_true.f / theta_true.j;
    let ratio_star = theta_star.f / theta_star.j;
    if ratio_true == 0.0 {
        return Err(Error::UndefinedMetric(
            "relative error of F/J is undefined: true ratio is 0".to_string(),
        ));
    }
    let f_err = ((ratio_true - ratio_star) / ratio_true).abs();
    Ok((e_tot, f_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, RateFamily, RateTable};
    use crate::simulate::{simulate_ensemble, InitialCondition};

    fn theta_true() -> Theta {
        Theta {
            f: 0.025,
            j: 1.5,
            gamma: 1.0,
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let data = Dataset::from_counts(
            vec![
                (vec![0.0, 0.5, 1.25], vec![3, 4, 2]),
                (vec![0.0, 10.0 / 3.0], vec![0, 7]),
            ],
            7,
        )
        .unwrap();
        let text = data.to_csv();
        let back = Dataset::from_csv(&text, 7).unwrap();
        assert_eq!(back, data, "CSV write/parse must round-trip exactly");
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        assert!(matches!(
            Dataset::from_csv("t,m\n0,0\n", 10),
            Err(Error::DatasetRow { line: 1, .. })
        ));
        let bad_value = "traj_id,t,m\n0,0.0,0.0\n0,1.0,oops\n";
        assert!(matches!(
            Dataset::from_csv(bad_value, 10),
            Err(Error::DatasetRow { line: 3, .. })
        ));
        let decreasing = "traj_id,t,m\n0,1.0,0.0\n0,0.5,0.0\n";
        assert!(matches!(
            Dataset::from_csv(decreasing, 10),
            Err(Error::DatasetRow { line: 3, .. })
        ));
        let off_grid = "traj_id,t,m\n0,0.0,0.3001\n";
        assert!(matches!(
            Dataset::from_csv(off_grid, 10),
            Err(Error::DatasetRow { line: 2, .. })
        ));
    }

    #[test]
    fn order_parameter_mapping_enforces_tolerance() {
        // N = 10: m = 0.4 maps to n = 7 exactly
        assert_eq!(count_from_order_parameter(0.4, 10).unwrap(), 7);
        // an ulp-scale wobble is fine
        assert_eq!(count_from_order_parameter(0.4 + 1e-12, 10).unwrap(), 7);
        // a visible offset is not
        assert!(count_from_order_parameter(0.4 + 1e-6, 10).is_err());
        assert!(count_from_order_parameter(1.2, 10).is_err());
    }

    #[test]
    fn lone_points_are_rejected() {
        let err = Dataset::from_counts(vec![(vec![0.0], vec![1])], 5);
        assert!(matches!(err, Err(Error::DatasetInvalid(_))));
    }

    #[test]
    fn zero_gap_transitions_cost_nothing_or_everything() {
        let same = Dataset::from_counts(vec![(vec![2.0, 2.0], vec![5, 5])], 10).unwrap();
        let nll = neg_log_likelihood(&theta_true(), &same).unwrap();
        assert_eq!(nll, 0.0, "a repeated reading has probability 1");
        let moved = Dataset::from_counts(vec![(vec![2.0, 2.0], vec![5, 6])], 10).unwrap();
        let nll = neg_log_likelihood(&theta_true(), &moved).unwrap();
        assert!(
            (nll + PROB_FLOOR.ln()).abs() < 1e-9,
            "an instantaneous jump costs the floor: {nll}"
        );
    }

    #[test]
    fn likelihood_is_additive_over_trajectories() {
        let a = Dataset::from_counts(vec![(vec![0.0, 1.0, 2.0], vec![2, 3, 4])], 10).unwrap();
        let b = Dataset::from_counts(vec![(vec![0.0, 0.7], vec![8, 6])], 10).unwrap();
        let joint = Dataset::concat(vec![a.clone(), b.clone()]).unwrap();
        let sum = neg_log_likelihood(&theta_true(), &a).unwrap()
            + neg_log_likelihood(&theta_true(), &b).unwrap();
        let whole = neg_log_likelihood(&theta_true(), &joint).unwrap();
        assert!(
            (whole - sum).abs() <= 1e-12 * whole.abs().max(1.0),
            "additivity: {whole} vs {sum}"
        );
    }

    #[test]
    fn truth_beats_wrong_rate_on_simulated_data() {
        let params = ModelParams::new(0.025, 1.5, 0.0, 1.0, 1.0, 50).unwrap();
        let rates = RateTable::build(&params, &RateFamily::Logit).unwrap();
        let ens = simulate_ensemble(
            &rates,
            &InitialCondition::FixedCount(25),
            1000.0,
            10.0,
            2024,
            1,
        )
        .unwrap();
        let data = Dataset::from_simulated(ens.trajectories(), 50).unwrap();
        assert_eq!(data.n_transitions(), 100);
        let at_truth = neg_log_likelihood(&theta_true(), &data).unwrap();
        let wrong = Theta {
            gamma: 2.0,
            ..theta_true()
        };
        let at_wrong = neg_log_likelihood(&wrong, &data).unwrap();
        assert!(
            at_truth < at_wrong,
            "truth must score better: {at_truth} vs {at_wrong}"
        );
    }

    #[test]
    fn error_metrics_match_hand_arithmetic() {
        let truth = theta_true();
        let (e_tot, f_err) = error_metrics(&truth, &truth).unwrap();
        assert_eq!((e_tot, f_err), (0.0, 0.0));
        // doubling F: E_tot = |0.025-0.05|/0.025 = 1, f = |1/60 - 1/30|/(1/60) = 1
        let doubled_f = Theta {
            f: 0.05,
            ..theta_true()
        };
        let (e_tot, f_err) = error_metrics(&truth, &doubled_f).unwrap();
        assert!((e_tot - 1.0).abs() < 1e-12, "E_tot = {e_tot}");
        assert!((f_err - 1.0).abs() < 1e-12, "f = {f_err}");
    }

    #[test]
    fn error_metrics_reject_zero_denominators() {
        let zero_f = Theta {
            f: 0.0,
            ..theta_true()
        };
        assert!(matches!(
            error_metrics(&zero_f, &theta_true()),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn metadata_round_trips_and_validates() {
        let meta = DatasetMeta::new(50);
        let json = serde_json::to_string(&meta).unwrap();
        assert!(json.contains("\"N\":50"));
        let back: DatasetMeta = serde_json::from_str(&json).unwrap();
        assert_eq!(back, meta);
        back.validate().unwrap();
        let tampered: std::result::Result<DatasetMeta, _> =
            serde_json::from_str("{\"N\":50,\"beta\":1.0,\"alpha\":0.0,\"extra\":1}");
        assert!(tampered.is_err(), "unknown keys must be rejected");
        let wrong_beta = DatasetMeta {
            beta: 2.0,
            ..DatasetMeta::new(50)
        };
        assert!(wrong_beta.validate().is_err());
    }

    #[test]
    fn small_calibration_run_is_deterministic() {
        let params = ModelParams::new(0.1, 1.0, 0.0, 1.0, 1.0, 10).unwrap();
        let rates = RateTable::build(&params, &RateFamily::Logit).unwrap();
        let ens = simulate_ensemble(
            &rates,
            &InitialCondition::BinomialRandom(0.5),
            20.0,
            1.0,
            7,
            5,
        )
        .unwrap();
        let data = Dataset::from_simulated(ens.trajectories(), 10).unwrap();
        let config = CalibrationConfig {
            pop_size: 8,
            n_steps: 3,
            seed: 99,
        };
        let bounds = ParamBounds::default();
        let a = calibrate(&data, &bounds, &config).unwrap();
        let b = calibrate(&data, &bounds, &config).unwrap();
        assert_eq!(a, b, "same seed and data must reproduce the result");
        assert_eq!(a.evaluations, 8 + 8 * 3);
        assert!(a.theta_star.f >= bounds.f[0] && a.theta_star.f <= bounds.f[1]);
        assert!(a.theta_star.j >= bounds.j[0] && a.theta_star.j <= bounds.j[1]);
        assert!(a.theta_star.gamma >= bounds.gamma[0] && a.theta_star.gamma <= bounds.gamma[1]);
        assert!(a.nll.is_finite());
    }
}
