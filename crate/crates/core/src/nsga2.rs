//! NSGA-II over the LQR weights and fractional orders.
//!
//! [`optimize`] is a generic minimizer for any `Fn(&[f64]) -> Vec<f64>`;
//! [`run_nsga2`] wires it to the closed-loop `(ITSE, ISDCO)` objectives.
//! Population evaluation runs on the rayon pool; every random draw comes from a
//! ChaCha stream keyed by the seed and generation, so results do not depend on
//! the thread count.

use std::cmp::Ordering;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lqr_fopid::{
    design_from_vars, DelayMethod, FopidController, LqrDesignVars, NioptdPlant,
};
use crate::simkit::{evaluate_design_objectives, Scenario, PENALTY};

#[derive(Debug, Clone, PartialEq)]
pub struct MooConfig {
    pub population: usize,
    pub generations: usize,
    /// Share of the population front 0 may occupy after survival.
    pub pareto_fraction: f64,
    pub bounds: Vec<(f64, f64)>,
    /// Probability that a child comes from crossover rather than mutation.
    pub crossover_fraction: f64,
    /// Mutation step, as a fraction of each variable's range.
    pub mutation_scale: f64,
    pub seed: u64,
    /// Stop once the Pareto spread settles (see [`SPREAD_WINDOW`]).
    pub early_stop: bool,
}

/// Generations over which the spread change is averaged for early stopping.
pub const SPREAD_WINDOW: usize = 10;
/// Mean absolute spread change below which the run stops early.
pub const SPREAD_TOLERANCE: f64 = 1e-4;

impl Default for MooConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 100,
            pareto_fraction: 0.7,
            bounds: LqrDesignVars::BOUNDS.to_vec(),
            crossover_fraction: 0.8,
            mutation_scale: 0.1,
            seed: 1,
            early_stop: false,
        }
    }
}

impl MooConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::invalid("population must be at least 4"));
        }
        if self.generations == 0 {
            return Err(Error::invalid("generations must be at least 1"));
        }
        if !(self.pareto_fraction > 0.0 && self.pareto_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "Pareto fraction must lie in (0, 1], got {}",
                self.pareto_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::invalid("crossover fraction must lie in [0, 1]"));
        }
        if !(self.mutation_scale >= 0.0 && self.mutation_scale.is_finite()) {
            return Err(Error::invalid("mutation scale must be non-negative"));
        }
        if self.bounds.is_empty() {
            return Err(Error::invalid("at least one decision variable is required"));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!(
                    "bad bounds for variable {i}: ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// `u` strictly better than `v` in every objective.
pub fn dominates(u: &[f64], v: &[f64]) -> Result<bool> {
    check_dims(u, v)?;
    Ok(u.iter().zip(v).all(|(a, b)| a < b))
}

/// Pareto dominance: no worse anywhere and better somewhere.
pub fn pareto_dominates(u: &[f64], v: &[f64]) -> Result<bool> {
    check_dims(u, v)?;
    Ok(weakly_better(u, v))
}

fn weakly_better(u: &[f64], v: &[f64]) -> bool {
    let mut strictly = false;
    for (a, b) in u.iter().zip(v) {
        if a > b {
            return false;
        }
        if a < b {
            strictly = true;
        }
    }
    strictly
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} objectives", u.len()),
            actual: v.len().to_string(),
        });
    }
    Ok(())
}

/// Fronts of increasing rank under Pareto dominance; indices ascending
/// within each front.
pub fn fast_nondominated_sort(objectives: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if weakly_better(&objectives[i], &objectives[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if weakly_better(&objectives[j], &objectives[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front (same order as input).
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| front[a][obj].total_cmp(&front[b][obj]).then(a.cmp(&b)));
        let lo = front[order[0]][obj];
        let hi = front[order[n - 1]][obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if !(range > 0.0) || !range.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][obj] - front[order[w - 1]][obj];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// `w·p1 + (1 − w)·p2` coordinate by coordinate.
pub fn intermediate_crossover(p1: &[f64], p2: &[f64], weights: &[f64]) -> Vec<f64> {
    p1.iter()
        .zip(p2)
        .zip(weights)
        .map(|((a, b), w)| w * a + (1.0 - w) * b)
        .collect()
}

fn clamp_to(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// `count` children from a tournament-selected pool.
pub fn make_offspring(
    pool: &[Vec<f64>],
    count: usize,
    config: &MooConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let dim = config.bounds.len();
    (0..count)
        .map(|_| {
            let p1 = &pool[rng.random_range(0..pool.len())];
            let mut child = if rng.random::<f64>() < config.crossover_fraction {
                let p2 = &pool[rng.random_range(0..pool.len())];
                let w: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                intermediate_crossover(p1, p2, &w)
            } else {
                let mut c = p1.clone();
                let i = rng.random_range(0..dim);
                let (lo, hi) = config.bounds[i];
                c[i] += rng.random_range(-1.0..=1.0) * config.mutation_scale * (hi - lo);
                c
            };
            clamp_to(&mut child, &config.bounds);
            child
        })
        .collect()
}

/// One evaluated decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Per-objective minimum over the population.
    pub best: Vec<f64>,
    pub front_size: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MooOutcome {
    pub population: Vec<Individual>,
    /// Rank-0 members of the final population, duplicates removed.
    pub front: Vec<Individual>,
    pub history: Vec<GenerationStats>,
}

fn evaluate<F>(objective: &F, xs: Vec<Vec<f64>>) -> Vec<Individual>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    xs.into_par_iter()
        .map(|x| {
            let objectives = objective(&x)
                .into_iter()
                .map(|v| if v.is_nan() { f64::INFINITY } else { v })
                .collect();
            Individual { x, objectives }
        })
        .collect()
}

fn generation_rng(seed: u64, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation as u64);
    rng
}

/// Rank and crowding of every member.
fn rank_and_crowd(pop: &[Individual]) -> (Vec<usize>, Vec<f64>, Vec<Vec<usize>>) {
    let objs: Vec<Vec<f64>> = pop.iter().map(|p| p.objectives.clone()).collect();
    let fronts = fast_nondominated_sort(&objs);
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in fronts.iter().enumerate() {
        let members: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd, fronts)
}

fn better(i: usize, j: usize, rank: &[usize], crowd: &[f64]) -> bool {
    match rank[i].cmp(&rank[j]) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => crowd[i] >= crowd[j],
    }
}

fn by_crowding_desc(members: &mut [usize], crowd: &[f64]) {
    members.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(a.cmp(&b)));
}

/// (μ+λ) survival with front 0 capped at the Pareto fraction.
fn survive(combined: Vec<Individual>, size: usize, pareto_fraction: f64) -> Vec<Individual> {
    let (_, crowd, fronts) = rank_and_crowd(&combined);
    let cap = ((pareto_fraction * size as f64).ceil() as usize).clamp(1, size);
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    let mut first = fronts[0].clone();
    by_crowding_desc(&mut first, &crowd);
    let take = first.len().min(cap);
    chosen.extend_from_slice(&first[..take]);
    let leftover = first[take..].to_vec();
    for front in fronts.iter().skip(1) {
        if chosen.len() == size {
            break;
        }
        let room = size - chosen.len();
        if front.len() <= room {
            chosen.extend_from_slice(front);
        } else {
            let mut f = front.clone();
            by_crowding_desc(&mut f, &crowd);
            chosen.extend_from_slice(&f[..room]);
        }
    }
    for i in leftover {
        if chosen.len() == size {
            break;
        }
        chosen.push(i);
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    chosen
        .into_iter()
        .map(|i| slots[i].take().expect("each index chosen once"))
        .collect()
}

/// Spread of a 2-D front: mean absolute deviation of neighbour gaps over
/// their mean (0 for evenly spaced points).
fn spread(front: &[&Individual]) -> f64 {
    if front.len() < 3 || front[0].objectives.len() != 2 {
        return 0.0;
    }
    let mut pts: Vec<&Vec<f64>> = front.iter().map(|p| &p.objectives).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let gaps: Vec<f64> = pts
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return 0.0;
    }
    gaps.iter().map(|g| (g - mean).abs()).sum::<f64>() / (gaps.len() as f64 * mean)
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    let m = pop[0].objectives.len();
    let best = (0..m)
        .map(|j| {
            pop.iter()
                .map(|p| p.objectives[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (rank, _, _) = rank_and_crowd(pop);
    let front: Vec<&Individual> = pop
        .iter()
        .zip(&rank)
        .filter(|(_, &r)| r == 0)
        .map(|(p, _)| p)
        .collect();
    GenerationStats {
        generation,
        best,
        front_size: front.len(),
        spread: spread(&front),
    }
}

/// Minimizes a vector objective with NSGA-II.
pub fn optimize<F>(objective: F, config: &MooConfig) -> Result<MooOutcome>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    config.validate()?;
    let n = config.population;
    let mut rng = generation_rng(config.seed, 0);
    let initial: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| {
                    if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    }
                })
                .collect()
        })
        .collect();
    let mut pop = evaluate(&objective, initial);
    let mut history = vec![stats(0, &pop)];

    for generation in 1..=config.generations {
        let mut rng = generation_rng(config.seed, generation);
        let (rank, crowd, _) = rank_and_crowd(&pop);
        let pool: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                let w = if better(a, b, &rank, &crowd) { a } else { b };
                pop[w].x.clone()
            })
            .collect();
        let children = evaluate(&objective, make_offspring(&pool, n, config, &mut rng));
        let mut combined = pop;
        combined.extend(children);
        pop = survive(combined, n, config.pareto_fraction);
        history.push(stats(generation, &pop));

        if config.early_stop && history.len() > SPREAD_WINDOW {
            let recent = &history[history.len() - SPREAD_WINDOW - 1..];
            let change = recent
                .windows(2)
                .map(|w| (w[1].spread - w[0].spread).abs())
                .sum::<f64>()
                / SPREAD_WINDOW as f64;
            if change < SPREAD_TOLERANCE {
                break;
            }
        }
    }

    let (rank, _, _) = rank_and_crowd(&pop);
    let mut front: Vec<Individual> = Vec::new();
    for (p, &r) in pop.iter().zip(&rank) {
        if r == 0 && !front.iter().any(|q| q.x == p.x) {
            front.push(p.clone());
        }
    }
    front.sort_by(|a, b| {
        a.objectives
            .iter()
            .zip(&b.objectives)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    Ok(MooOutcome {
        population: pop,
        front,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontEntry {
    pub vars: LqrDesignVars,
    /// `(ITSE, ISDCO)`.
    pub objectives: [f64; 2],
    pub controller: FopidController,
}

/// Non-dominated designs for one plant and delay method, ascending in ITSE.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub method: DelayMethod,
    pub plant: NioptdPlant,
    pub entries: Vec<FrontEntry>,
}

impl ParetoFront {
    /// Keeps the Pareto-optimal, finite, non-penalty entries, sorted by ITSE.
    pub fn from_entries(method: DelayMethod, plant: NioptdPlant, entries: Vec<FrontEntry>) -> Self {
        let mut kept: Vec<FrontEntry> = Vec::new();
        for e in entries {
            if !e.objectives.iter().all(|v| v.is_finite() && *v < PENALTY) {
                continue;
            }
            if kept.iter().any(|k| k.vars == e.vars) {
                continue;
            }
            kept.push(e);
        }
        let objs: Vec<Vec<f64>> = kept.iter().map(|e| e.objectives.to_vec()).collect();
        let keep: Vec<usize> = fast_nondominated_sort(&objs)
            .into_iter()
            .next()
            .unwrap_or_default();
        let mut entries: Vec<FrontEntry> = keep.into_iter().map(|i| kept[i].clone()).collect();
        entries.sort_by(|a, b| {
            a.objectives[0]
                .total_cmp(&b.objectives[0])
                .then(a.objectives[1].total_cmp(&b.objectives[1]))
        });
        Self {
            method,
            plant,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<[f64; 2]> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    /// Non-dominated union with another front of the same method.
    pub fn merge(&self, other: &ParetoFront) -> ParetoFront {
        let all = self.entries.iter().chain(&other.entries).cloned().collect();
        ParetoFront::from_entries(self.method, self.plant, all)
    }

    /// True when no entry Pareto-dominates another.
    pub fn is_mutually_nondominated(&self) -> bool {
        self.entries.iter().all(|a| {
            self.entries
                .iter()
                .all(|b| !weakly_better(&a.objectives, &b.objectives))
        })
    }

    /// Writes `J1_itse,J2_isdco,Q1,Q2,Q3,R,lambda,mu,Kp,Ki,Kd,method`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "J1_itse,J2_isdco,Q1,Q2,Q3,R,lambda,mu,Kp,Ki,Kd,method")?;
        for e in &self.entries {
            let v = e.vars;
            let c = e.controller;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                e.objectives[0],
                e.objectives[1],
                v.q1,
                v.q2,
                v.q3,
                v.r,
                v.lambda,
                v.mu,
                c.kp,
                c.ki,
                c.kd,
                self.method
            )?;
        }
        Ok(())
    }
}

/// Pareto front of `(ITSE, ISDCO)` over the LQR weights and orders.
pub fn run_nsga2(
    plant: &NioptdPlant,
    method: DelayMethod,
    config: &MooConfig,
    scenario: &Scenario,
) -> Result<ParetoFront> {
    Ok(run_nsga2_with_history(plant, method, config, scenario)?.0)
}

/// As [`run_nsga2`], also returning per-generation statistics.
pub fn run_nsga2_with_history(
    plant: &NioptdPlant,
    method: DelayMethod,
    config: &MooConfig,
    scenario: &Scenario,
) -> Result<(ParetoFront, Vec<GenerationStats>)> {
    if config.bounds.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: "6 bounds (Q1, Q2, Q3, R, λ, μ)".into(),
            actual: config.bounds.len().to_string(),
        });
    }
    scenario.validate()?;
    let objective = |x: &[f64]| match LqrDesignVars::from_slice(x) {
        Ok(vars) => evaluate_design_objectives(plant, &vars, method, scenario).to_vec(),
        Err(_) => vec![PENALTY, PENALTY],
    };
    let outcome = optimize(objective, config)?;
    let entries = outcome
        .front
        .iter()
        .filter_map(|ind| {
            let vars = LqrDesignVars::from_slice(&ind.x).ok()?;
            let controller = design_from_vars(plant, &vars, method).ok()?;
            Some(FrontEntry {
                vars,
                objectives: [ind.objectives[0], ind.objectives[1]],
                controller,
            })
        })
        .collect();
    Ok((
        ParetoFront::from_entries(method, *plant, entries),
        outcome.history,
    ))
}

/// Lower median by ITSE, index `⌊(n − 1)/2⌋`.
pub fn median_solution(front: &ParetoFront) -> Result<&FrontEntry> {
    if front.entries.is_empty() {
        return Err(Error::EmptyFront);
    }
    Ok(&front.entries[(front.entries.len() - 1) / 2])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontVerdict {
    /// Every entry of the second front is dominated by the first.
    First,
    Second,
    /// The fronts cross.
    Weak,
}

/// Coverage comparison with strict dominance.
pub fn compare_fronts(first: &[[f64; 2]], second: &[[f64; 2]]) -> FrontVerdict {
    let covers = |a: &[[f64; 2]], b: &[[f64; 2]]| {
        !b.is_empty()
            && b.iter()
                .all(|v| a.iter().any(|u| u[0] < v[0] && u[1] < v[1]))
    };
    match (covers(first, second), covers(second, first)) {
        (true, false) => FrontVerdict::First,
        (false, true) => FrontVerdict::Second,
        _ => FrontVerdict::Weak,
    }
}
