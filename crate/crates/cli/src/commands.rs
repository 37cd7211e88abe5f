use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fopid_core::lqr_fopid::{design_from_vars, gains_for};
use fopid_core::nsga2::{compare_fronts, median_solution, run_nsga2, FrontVerdict};
use fopid_core::rules::eval_tuning_rule;
use fopid_core::simkit::{
    bode, robustness_sweep, simulate_closed_loop, simulate_open_loop_step, write_bode_csv,
    write_sweep_csv,
};
use fopid_core::{
    DelayMethod, Error, FopidController, LqrDesignVars, MooConfig, NioptdPlant, ParetoFront, Result,
};

use crate::{
    Cli, Command, ControllerArgs, DesignArgs, GainsArgs, RuleArgs, SimulateArgs, StepArgs,
    SweepArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Step(a) => step(a, &cli.out_dir),
        Command::Simulate(a) => simulate(a, &cli.out_dir),
        Command::Design(a) => design(a, &cli.out_dir),
        Command::Rule(a) => rule(a),
        Command::Sweep(a) => sweep(a, &cli.out_dir),
        Command::Gains(a) => gains(a),
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn invalid(msg: &str) -> Error {
    Error::InvalidArgument(msg.to_string())
}

fn controller(plant: &NioptdPlant, a: &ControllerArgs) -> Result<FopidController> {
    match (a.kp, a.ki, a.kd) {
        (Some(kp), Some(ki), Some(kd)) => FopidController::new(kp, ki, kd, a.lambda, a.mu),
        (None, None, None) => match (a.q1, a.q2, a.q3, a.r) {
            (Some(q1), Some(q2), Some(q3), Some(r)) => {
                let vars = LqrDesignVars::new(q1, q2, q3, r, a.lambda, a.mu)?;
                design_from_vars(plant, &vars, a.method)
            }
            _ => Err(invalid("give either --Kp --Ki --Kd or --Q1 --Q2 --Q3 --R")),
        },
        _ => Err(invalid("--Kp, --Ki and --Kd must be given together")),
    }
}

fn step(a: &StepArgs, out: &Path) -> Result<()> {
    let plant = a.plant.plant()?;
    let scenario = a.scenario.scenario()?;
    let resp = simulate_open_loop_step(
        &plant,
        scenario.horizon,
        scenario.step,
        scenario.realization,
    )?;
    if resp.diverged {
        eprintln!("warning: open-loop response left the divergence bound");
    }
    let (path, mut w) = create(out, "step.csv")?;
    resp.write_csv(&mut w)?;
    w.flush()?;
    println!("{}", path.display());
    if a.bode {
        let points = bode(&plant, a.omega_min, a.omega_max, a.bode_points)?;
        let (path, mut w) = create(out, "bode.csv")?;
        write_bode_csv(&points, &mut w)?;
        w.flush()?;
        println!("{}", path.display());
    }
    Ok(())
}

fn simulate(a: &SimulateArgs, out: &Path) -> Result<()> {
    let plant = a.plant.plant()?;
    let scenario = a.scenario.scenario()?;
    let c = controller(&plant, &a.controller)?;
    let res = simulate_closed_loop(&plant, &c, &scenario)?;
    if res.diverged {
        eprintln!("warning: closed loop diverged; indices are the penalty value");
    }
    let (path, mut w) = create(out, "simulate.csv")?;
    res.write_csv(&mut w)?;
    w.flush()?;
    println!("{}", path.display());
    println!("Kp,Ki,Kd,lambda,mu,itse,isdco");
    println!(
        "{},{},{},{},{},{},{}",
        c.kp, c.ki, c.kd, c.lambda, c.mu, res.itse, res.isdco
    );
    Ok(())
}

fn verdict_name(v: FrontVerdict, first: DelayMethod, second: DelayMethod) -> String {
    match v {
        FrontVerdict::First => first.to_string(),
        FrontVerdict::Second => second.to_string(),
        FrontVerdict::Weak => "weak".to_string(),
    }
}

fn design(a: &DesignArgs, out: &Path) -> Result<()> {
    let plant = a.plant.plant()?;
    let scenario = a.scenario.scenario()?;
    if a.restarts == 0 {
        return Err(invalid("--restarts must be at least 1"));
    }
    let mut methods = a.methods.clone();
    methods.dedup();
    let base = MooConfig {
        population: a.population,
        generations: a.generations,
        pareto_fraction: a.pareto_fraction,
        crossover_fraction: a.crossover_fraction,
        mutation_scale: a.mutation_scale,
        seed: a.seed,
        early_stop: a.early_stop,
        ..MooConfig::default()
    };
    base.validate()?;

    let mut fronts: Vec<ParetoFront> = Vec::new();
    println!("method,front_size,J1_itse,J2_isdco,Kp,Ki,Kd,lambda,mu");
    for &method in &methods {
        let mut front: Option<ParetoFront> = None;
        for r in 0..a.restarts {
            let cfg = MooConfig {
                seed: a.seed.wrapping_add(r as u64),
                ..base.clone()
            };
            let f = run_nsga2(&plant, method, &cfg, &scenario)?;
            front = Some(match front {
                Some(prev) => prev.merge(&f),
                None => f,
            });
        }
        let front = front.expect("at least one restart");
        let (path, mut w) = create(out, &format!("front_{method}.csv"))?;
        front.write_csv(&mut w)?;
        w.flush()?;
        eprintln!("{}", path.display());

        let med = median_solution(&front)?.clone();
        let single = ParetoFront::from_entries(method, plant, vec![med.clone()]);
        let (_, mut w) = create(out, &format!("median_{method}.csv"))?;
        single.write_csv(&mut w)?;
        w.flush()?;
        let c = med.controller;
        println!(
            "{method},{},{},{},{},{},{},{},{}",
            front.len(),
            med.objectives[0],
            med.objectives[1],
            c.kp,
            c.ki,
            c.kd,
            c.lambda,
            c.mu
        );
        fronts.push(front);
    }
    for i in 0..fronts.len() {
        for j in (i + 1)..fronts.len() {
            let v = compare_fronts(&fronts[i].objectives(), &fronts[j].objectives());
            println!(
                "verdict,{}_vs_{},{}",
                fronts[i].method,
                fronts[j].method,
                verdict_name(v, fronts[i].method, fronts[j].method)
            );
        }
    }
    Ok(())
}

fn rule(a: &RuleArgs) -> Result<()> {
    let e = eval_tuning_rule(a.l_over_t, a.alpha, a.gain)?;
    if e.extrapolated {
        eprintln!("warning: (L/T, alpha) lies outside the fitted domain [0.25, 4] x [0.2, 1.8]");
    }
    let c = e.controller;
    println!("Kp,Ki,Kd,lambda,mu");
    println!("{},{},{},{},{}", c.kp, c.ki, c.kd, c.lambda, c.mu);
    Ok(())
}

fn scaled(nominal: f64) -> Vec<f64> {
    [0.8, 0.9, 1.0, 1.1, 1.2]
        .iter()
        .map(|f| f * nominal)
        .collect()
}

fn sweep(a: &SweepArgs, out: &Path) -> Result<()> {
    let plant = a.plant.plant()?;
    let scenario = a.scenario.scenario()?;
    let c = controller(&plant, &a.controller)?;
    let delays = a.delays.clone().unwrap_or_else(|| scaled(plant.delay()));
    let lags = a
        .time_constants
        .clone()
        .unwrap_or_else(|| scaled(plant.time_constant()));
    if delays.is_empty() || lags.is_empty() {
        return Err(invalid("sweep grid is empty"));
    }
    let cells = robustness_sweep(&plant, &c, &delays, &lags, &scenario)?;
    let unstable = cells.iter().filter(|c| c.diverged).count();
    if unstable > 0 {
        eprintln!(
            "warning: {unstable} of {} grid points diverged",
            cells.len()
        );
    }
    let (path, mut w) = create(out, "sweep.csv")?;
    write_sweep_csv(&cells, &mut w)?;
    w.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn gains(a: &GainsArgs) -> Result<()> {
    let plant = a.plant.plant()?;
    if !(a.r > 0.0) {
        return Err(invalid("R must be positive"));
    }
    let design = gains_for(&plant, [a.q1, a.q2, a.q3], a.r, a.method)?;
    let c = design.gains.with_orders(a.lambda, a.mu)?;
    println!("Kp,Ki,Kd,lambda,mu");
    println!("{},{},{},{},{}", c.kp, c.ki, c.kd, c.lambda, c.mu);
    Ok(())
}
