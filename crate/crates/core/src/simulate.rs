//! Exact stochastic simulation of the population chain by the Gillespie
//! direct method. In state n the total event rate is
//! f_n = birth[n] + death[n]; the waiting time is Exponential(f_n), drawn
//! as u = ln(1/r1)/f_n with r1 uniform on (0, 1], and the event is a birth
//! iff birth[n] > r2 f_n. Trajectories are recorded on a uniform time grid:
//! the value stored at grid time tau is the state whose holding interval
//! [previous jump, next jump) contains tau.
//!
//! Ensembles are seeded from one master seed with one RNG stream per
//! trajectory index, so any member can be reproduced in isolation and the
//! ensemble is invariant to evaluation order.

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateFamily, RateTable};
use crate::spectral::{DistributionVector, ZeitgeistSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Hard cap on grid points per trajectory, to catch dt/t_max typos before
/// they allocate the machine away.
const MAX_GRID_POINTS: usize = 10_000_000;

/// How a trajectory chooses its starting state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    /// Start exactly at count n0.
    FixedCount(usize),
    /// Draw n0 from Binomial(N, p0): each agent independently starts at +1
    /// with probability p0.
    BinomialRandom(f64),
}

impl InitialCondition {
    fn draw(&self, n_max: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        match *self {
            InitialCondition::FixedCount(n0) => {
                if n0 > n_max {
                    return Err(Error::StateOutOfRange { n: n0, n_max });
                }
                Ok(n0)
            }
            InitialCondition::BinomialRandom(p0) => {
                if !(0.0..=1.0).contains(&p0) {
                    return Err(Error::InvalidArgument(format!(
                        "binomial weight p0 must lie in [0, 1], got {p0}"
                    )));
                }
                let dist = Binomial::new(n_max as u64, p0).map_err(|e| {
                    Error::InvalidArgument(format!("binomial initial condition: {e}"))
                })?;
                Ok(dist.sample(rng) as usize)
            }
        }
    }
}

/// One simulated path sampled on the uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<usize>,
    seed: u64,
    stream: u64,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Master seed the trajectory was drawn under.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// RNG stream index (the trajectory's position in its ensemble).
    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// A seeded collection of trajectories over a common grid, with the
/// empirical statistics the distribution-level solver is compared against.
#[derive(Clone, Debug)]
pub struct Ensemble {
    trajectories: Vec<Trajectory>,
    n_states: usize,
    master_seed: u64,
}

impl Ensemble {
    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn times(&self) -> &[f64] {
        self.trajectories[0].times()
    }

    /// Ensemble mean of the count at each grid time.
    pub fn mean_counts(&self) -> Vec<f64> {
        let grid = self.times().len();
        let mut mean = vec![0.0; grid];
        for traj in &self.trajectories {
            for (k, &n) in traj.states().iter().enumerate() {
                mean[k] += n as f64;
            }
        }
        let e = self.trajectories.len() as f64;
        mean.iter_mut().for_each(|x| *x /= e);
        mean
    }

    /// Ensemble variance (population convention, <n^2> - <n>^2).
    pub fn variance_counts(&self) -> Vec<f64> {
        let grid = self.times().len();
        let mut sum = vec![0.0; grid];
        let mut sumsq = vec![0.0; grid];
        for traj in &self.trajectories {
            for (k, &n) in traj.states().iter().enumerate() {
                sum[k] += n as f64;
                sumsq[k] += (n as f64) * (n as f64);
            }
        }
        let e = self.trajectories.len() as f64;
        (0..grid)
            .map(|k| {
                let m = sum[k] / e;
                (sumsq[k] / e - m * m).max(0.0)
            })
            .collect()
    }

    /// Empirical state distribution at grid index k.
    pub fn empirical_distribution(&self, k: usize) -> Result<DistributionVector> {
        let grid = self.times().len();
        if k >= grid {
            return Err(Error::InvalidArgument(format!(
                "grid index {k} out of range for {grid} grid points"
            )));
        }
        let mut counts = vec![0.0; self.n_states];
        for traj in &self.trajectories {
            counts[traj.states()[k]] += 1.0;
        }
        DistributionVector::from_raw(counts, self.times()[k])
    }
}

fn make_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "grid spacing dt must be finite and > 0, got {dt}"
        )));
    }
    if !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "horizon t_max must be finite and >= 0, got {t_max}"
        )));
    }
    // allow t_max/dt to miss an integer by float dust
    let steps = (t_max / dt + 1e-9).floor() as usize;
    if steps + 1 > MAX_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "grid of {} points exceeds the {MAX_GRID_POINTS}-point cap",
            steps + 1
        )));
    }
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

fn rng_for(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Advances one path until every grid time in [t, seg_end) is recorded and
/// the clock reaches seg_end. A jump that would land past seg_end is
/// discarded (the exponential clock is memoryless, so redrawing it at the
/// boundary leaves the law of the process unchanged -- this is what makes
/// piecewise-constant schedules exact). Returns the state at seg_end.
#[allow(clippy::too_many_arguments)]
fn advance_segment(
    rates: &RateTable,
    rng: &mut ChaCha8Rng,
    grid: &[f64],
    next_grid: &mut usize,
    mut t: f64,
    seg_end: f64,
    mut n: usize,
    states: &mut Vec<usize>,
) -> usize {
    while t < seg_end {
        let f = rates.exit(n);
        if f == 0.0 {
            break; // frozen until the segment ends (rates may change after)
        }
        let r1 = 1.0 - rng.gen::<f64>(); // uniform on (0, 1], guards ln(0)
        let wait = (1.0 / r1).ln() / f;
        let t_next = t + wait;
        if t_next >= seg_end {
            break; // discard the crossing event; memorylessness makes this exact
        }
        while *next_grid < grid.len() && grid[*next_grid] < t_next {
            states.push(n);
            *next_grid += 1;
        }
        let r2 = rng.gen::<f64>();
        if rates.birth(n) > r2 * f {
            n += 1;
        } else {
            n -= 1;
        }
        t = t_next;
    }
    // grid times in [t, seg_end) while frozen or waiting past the boundary
    while *next_grid < grid.len() && grid[*next_grid] < seg_end {
        states.push(n);
        *next_grid += 1;
    }
    n
}

fn run_single(
    rates: &RateTable,
    init: &InitialCondition,
    grid: Vec<f64>,
    master_seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    let mut rng = rng_for(master_seed, stream);
    let n0 = init.draw(rates.n_max(), &mut rng)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(n0);
    let mut next_grid = 1;
    let t_end = *grid.last().expect("grid has at least the origin");
    let n_final = advance_segment(
        rates,
        &mut rng,
        &grid,
        &mut next_grid,
        0.0,
        t_end,
        n0,
        &mut states,
    );
    // the final grid point coincides with the segment end
    while next_grid < grid.len() {
        states.push(n_final);
        next_grid += 1;
    }
    Ok(Trajectory {
        times: grid,
        states,
        seed: master_seed,
        stream,
    })
}

/// Simulates one trajectory under constant rates on the grid
/// 0, dt, ..., covering t_max.
pub fn simulate(
    rates: &RateTable,
    init: &InitialCondition,
    t_max: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    run_single(rates, init, make_grid(t_max, dt)?, seed, 0)
}

/// Simulates `n_traj` trajectories; member i uses RNG stream i of the
/// master seed, so `simulate` with the same seed reproduces member 0.
pub fn simulate_ensemble(
    rates: &RateTable,
    init: &InitialCondition,
    t_max: f64,
    dt: f64,
    master_seed: u64,
    n_traj: usize,
) -> Result<Ensemble> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one trajectory".to_string(),
        ));
    }
    let grid = make_grid(t_max, dt)?;
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .map(|i| run_single(rates, init, grid.clone(), master_seed, i as u64))
        .collect::<Result<_>>()?;
    Ok(Ensemble {
        trajectories,
        n_states: rates.n_states(),
        master_seed,
    })
}

/// Simulates one trajectory under a piecewise-constant field schedule. The
/// `f` field of `params` is ignored; each interval's value comes from the
/// schedule. The exponential clock is redrawn at every breakpoint, which
/// is exact for Markov jump processes. `t_max` must not exceed the
/// schedule horizon.
pub fn simulate_piecewise(
    schedule: &ZeitgeistSchedule,
    params: &ModelParams,
    family: &RateFamily,
    init: &InitialCondition,
    t_max: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    run_piecewise(schedule, params, family, init, t_max, dt, seed, 0)
}

/// Ensemble version of [`simulate_piecewise`], seeded like
/// [`simulate_ensemble`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_piecewise_ensemble(
    schedule: &ZeitgeistSchedule,
    params: &ModelParams,
    family: &RateFamily,
    init: &InitialCondition,
    t_max: f64,
    dt: f64,
    master_seed: u64,
    n_traj: usize,
) -> Result<Ensemble> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one trajectory".to_string(),
        ));
    }
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .map(|i| {
            run_piecewise(
                schedule,
                params,
                family,
                init,
                t_max,
                dt,
                master_seed,
                i as u64,
            )
        })
        .collect::<Result<_>>()?;
    Ok(Ensemble {
        trajectories,
        n_states: params.n_agents + 1,
        master_seed,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_piecewise(
    schedule: &ZeitgeistSchedule,
    params: &ModelParams,
    family: &RateFamily,
    init: &InitialCondition,
    t_max: f64,
    dt: f64,
    master_seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    if t_max > schedule.end_time() {
        return Err(Error::ScheduleExceeded {
            t: t_max,
            t_end: schedule.end_time(),
        });
    }
    let grid = make_grid(t_max, dt)?;
    let mut rng = rng_for(master_seed, stream);
    let mut n = init.draw(params.n_agents, &mut rng)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(n);
    let mut next_grid = 1;
    for (start, end, field) in schedule.intervals() {
        if t_max <= start {
            break;
        }
        let seg_params = ModelParams {
            f: field,
            ..*params
        };
        let rates = RateTable::build(&seg_params, family)?;
        let seg_end = end.min(t_max);
        n = advance_segment(
            &rates,
            &mut rng,
            &grid,
            &mut next_grid,
            start,
            seg_end,
            n,
            &mut states,
        );
        if t_max <= end {
            break;
        }
    }
    while next_grid < grid.len() {
        states.push(n);
        next_grid += 1;
    }
    Ok(Trajectory {
        times: grid,
        states,
        seed: master_seed,
        stream,
    })
}

/// Raw jump log (time, state-after-jump) pairs, starting with (0, n0),
/// until t_max. Used by statistical tests on holding times; grid-level
/// callers want [`simulate`].
pub fn simulate_events(
    rates: &RateTable,
    n0: usize,
    t_max: f64,
    seed: u64,
) -> Result<Vec<(f64, usize)>> {
    if n0 > rates.n_max() {
        return Err(Error::StateOutOfRange {
            n: n0,
            n_max: rates.n_max(),
        });
    }
    if !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "horizon t_max must be finite and >= 0, got {t_max}"
        )));
    }
    let mut rng = rng_for(seed, 0);
    let mut log = vec![(0.0, n0)];
    let (mut t, mut n) = (0.0, n0);
    loop {
        let f = rates.exit(n);
        if f == 0.0 {
            break;
        }
        let r1 = 1.0 - rng.gen::<f64>();
        t += (1.0 / r1).ln() / f;
        if t > t_max {
            break;
        }
        let r2 = rng.gen::<f64>();
        if rates.birth(n) > r2 * f {
            n += 1;
        } else {
            n -= 1;
        }
        log.push((t, n));
    }
    Ok(log)
}
