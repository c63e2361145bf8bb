//! Decision-cycle timing against the number of robots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crowdsim_core::engine::{threads_from_env, EngineError, Simulation};
use crowdsim_core::geometry::Vec2;
use crowdsim_core::presets::fits;
use crowdsim_core::scenario::{AgentSpec, ScenarioSpec};

pub const CSV_HEADER: &str = "robots,pedestrians,cycles,mean_ms,std_ms";

/// Random poses tried per requested robot before giving up.
const ATTEMPTS_PER_ROBOT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("placed {placed} of {requested} robots without overlap")]
pub struct PlacementFailure {
    pub requested: usize,
    pub placed: usize,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cycles must be at least 1")]
    NoCycles,
    #[error(transparent)]
    Placement(#[from] PlacementFailure),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub robots: usize,
    pub pedestrians: usize,
    pub cycles: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Hardware threads visible to the process.
    pub cores: usize,
    /// Worker threads the engine used.
    pub threads: usize,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.robots, r.pedestrians, r.cycles, r.mean_ms, r.std_ms).unwrap();
        }
        out
    }

    pub fn environment_note(&self) -> String {
        format!("{} cores visible, {} engine threads", self.cores, self.threads)
    }

    /// Least-squares line of mean cycle time against robot count.
    pub fn fit(&self) -> LinearFit {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.robots as f64).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.mean_ms).collect();
        linear_fit(&xs, &ys)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) },
    }
}

/// Copy of `spec` with `count` extra robots at random free poses. The poses
/// depend only on the scenario seed, and a smaller count gets a prefix of the
/// robots a larger one would.
pub fn place_robots(spec: &ScenarioSpec, count: usize) -> Result<ScenarioSpec, PlacementFailure> {
    let mut out = spec.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.config.seed ^ 0x0b07_5eed);
    let first_id = spec.agents.iter().map(|a| a.id + 1).max().unwrap_or(0);
    let b = spec.world_bounds;
    for k in 0..count {
        let mut placed = false;
        for _ in 0..ATTEMPTS_PER_ROBOT {
            let p = Vec2::new(rng.gen_range(b.min.x..b.max.x), rng.gen_range(b.min.y..b.max.y));
            let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let robot = AgentSpec::robot(first_id + k as u64, p, heading);
            if b.expanded(-robot.radius).contains(p) && fits(&robot, &out.agents, &out.obstacles) {
                out.agents.push(robot);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(PlacementFailure {
                requested: count,
                placed: k,
            });
        }
    }
    out.name = format!("{}+{}robots", spec.name, count);
    Ok(out)
}

/// Times `cycles` steps of `spec` for each robot count. Robots stand still
/// and every robot is scanned on every tick.
///
/// The configurations advance in turn, one cycle each, so a burst of load
/// from elsewhere on the machine is spread over all rows instead of landing
/// on whichever one happened to be running.
pub fn run_bench(spec: &ScenarioSpec, robot_counts: &[usize], cycles: usize) -> Result<BenchReport, BenchError> {
    if cycles == 0 {
        return Err(BenchError::NoCycles);
    }
    let threads = threads_from_env();
    let mut sims = Vec::with_capacity(robot_counts.len());
    for &count in robot_counts {
        let mut s = place_robots(spec, count)?;
        s.config.laser.rate_divisor = 1;
        sims.push((Simulation::with_threads(&s, threads)?, s.pedestrian_count()));
    }
    let idle = BTreeMap::new();
    let mut samples = vec![Vec::with_capacity(cycles); sims.len()];
    for _ in 0..cycles {
        for ((sim, _), out) in sims.iter_mut().zip(&mut samples) {
            let t = Instant::now();
            sim.step(&idle)?;
            out.push(t.elapsed().as_secs_f64() * 1e3);
        }
    }
    let rows = robot_counts
        .iter()
        .zip(&sims)
        .zip(&samples)
        .map(|((&robots, &(_, pedestrians)), samples)| {
            let mean = samples.iter().sum::<f64>() / cycles as f64;
            let var = if cycles > 1 {
                samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (cycles - 1) as f64
            } else {
                0.0
            };
            BenchRow {
                robots,
                pedestrians,
                cycles,
                mean_ms: mean,
                std_ms: var.sqrt(),
            }
        })
        .collect();
    Ok(BenchReport {
        rows,
        cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
        threads: sims.first().map_or(0, |(sim, _)| sim.thread_count()),
    })
}
