//! Command-line interface: experiment execution, parameter sweeps,
//! convergence-bound trajectories, one-shot SAP solving, and the
//! non-stationary comparison scenarios. All experiment commands write
//! `metrics.csv` (or `bounds.csv`), `summary.txt` and `config.echo` into
//! the output directory; identical config and seed give byte-identical
//! CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::analysis::{expected_q_bound, simulate_expected_q, BoundSide, ConvergenceSpec};
use crate::assignment::{brute_force_sap, solve_bb, solve_iterative_hungarian, SapInstance};
use crate::config::{PolicyKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::sim::metrics::MetricsSeries;
use crate::sim::nonstat::{bernoulli_scenario, markov_scenario, run_bandit_comparison};
use crate::sim::{run_experiment, ExperimentResult};

#[derive(Parser)]
#[command(
    name = "crsense",
    about = "Collaborative multi-band spectrum sensing simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and write metric series.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run one experiment per value of a swept config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Config key to sweep, e.g. `epsilon`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `0.1,0.3,1.0`.
        #[arg(long)]
        values: String,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulated expected Q-value trajectories with their binomial
    /// mixture bounds.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve one sensing-assignment instance with all three solvers.
    SolveSap {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Non-stationary band-selection comparison (proposed vs baselines).
    Nonstat {
        /// `markov` or `bernoulli`.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        /// Number of random statistics permutations over the horizon.
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Entry point used by the binary; returns the process exit code
/// (0 ok, 1 runtime failure, 2 configuration error).
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with success.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            runs,
            seed,
            out,
        } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            apply_overrides(&mut cfg, runs, seed)?;
            cmd_run(&cfg, &out)
        }
        Command::Sweep {
            config,
            param,
            values,
            runs,
            seed,
            out,
        } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            apply_overrides(&mut cfg, runs, seed)?;
            cmd_sweep(&cfg, &param, &values, &out)
        }
        Command::Bounds { config, out } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            cmd_bounds(&cfg, &out)
        }
        Command::SolveSap { instance } => cmd_solve_sap(&instance),
        Command::Nonstat {
            scenario,
            runs,
            seed,
            horizon,
            permutations,
            out,
        } => {
            let mut cfg = match scenario.as_str() {
                "markov" => markov_scenario(),
                "bernoulli" => bernoulli_scenario(),
                other => {
                    return Err(Error::config(
                        "scenario",
                        format!("unknown scenario `{other}` (markov|bernoulli)"),
                    ))
                }
            };
            apply_overrides(&mut cfg, runs, seed)?;
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(p) = permutations {
                cfg.nonstat_permutations = p;
            }
            cfg.validate()?;
            cmd_nonstat(&cfg, &scenario, &out)
        }
    }
}

fn apply_overrides(cfg: &mut ScenarioConfig, runs: Option<usize>, seed: Option<u64>) -> Result<()> {
    if let Some(r) = runs {
        cfg.runs = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()
}

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_value).unwrap_or_default()
}

/// Append one series to a metrics CSV body under a curve-name prefix.
fn push_series(csv: &mut String, prefix: &str, series: &MetricsSeries) {
    let curve = |name: &str| {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}/{name}")
        }
    };
    for (i, &slot) in series.slots.iter().enumerate() {
        let mut row = |name: &str, value: String| {
            let _ = writeln!(csv, "{slot},{},{value}", curve(name));
        };
        row("rel_throughput", fmt_value(series.relative_throughput[i]));
        row("miss_rate", fmt_opt(series.miss_rate[i]));
        if !series.miss_rate_windowed.is_empty() {
            row("miss_rate_windowed", fmt_opt(series.miss_rate_windowed[i]));
        }
        row("sensing_ratio", fmt_value(series.sensing_ratio[i]));
        row("cum_su_throughput", fmt_value(series.cum_su_throughput[i]));
        row(
            "cum_genie_throughput",
            fmt_value(series.cum_genie_throughput[i]),
        );
    }
}

fn experiment_summary(cfg: &ScenarioConfig, res: &ExperimentResult, elapsed_s: f64) -> String {
    let mut s = String::new();
    let series = &res.series;
    let last = series.slots.len() - 1;
    let _ = writeln!(s, "horizon: {}  runs: {}  seed: {}", cfg.horizon, cfg.runs, cfg.seed);
    let _ = writeln!(
        s,
        "final relative throughput: {:.4}",
        series.relative_throughput[last]
    );
    let _ = writeln!(
        s,
        "final miss rate: {}",
        series.miss_rate[last]
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|| "undefined".into())
    );
    let _ = writeln!(s, "final sensing ratio: {:.4}", series.sensing_ratio[last]);
    if let Some(times) = &res.solver_time {
        let named: Vec<String> = times
            .iter()
            .map(|(k, t)| format!("{k:?}: {:.3}s", t.as_secs_f64()))
            .collect();
        let _ = writeln!(
            s,
            "solver wall time over {} shared instances: {}",
            res.exploit_instances,
            named.join(", ")
        );
        if times.len() >= 2 {
            let t0 = times[0].1.as_secs_f64();
            let t1 = times[1].1.as_secs_f64();
            if t1 > 0.0 {
                let _ = writeln!(s, "wall-time ratio {:?}/{:?}: {:.2}", times[0].0, times[1].0, t0 / t1);
            }
        }
    }
    let _ = writeln!(s, "elapsed: {elapsed_s:.2}s");
    let _ = writeln!(s, "per-run finals (seed, rel_tp, miss, sense_ratio):");
    for r in &res.per_run {
        let _ = writeln!(
            s,
            "  {} {:.4} {} {:.4}",
            r.seed,
            r.final_relative_throughput,
            r.final_miss_rate
                .map(|m| format!("{m:.4}"))
                .unwrap_or_else(|| "-".into()),
            r.final_sensing_ratio
        );
    }
    s
}

fn cmd_run(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let t0 = Instant::now();
    let res = run_experiment(cfg)?;
    let mut csv = String::from("slot,curve,value\n");
    push_series(&mut csv, "", &res.series);
    std::fs::write(out.join("metrics.csv"), csv)?;
    std::fs::write(
        out.join("summary.txt"),
        experiment_summary(cfg, &res, t0.elapsed().as_secs_f64()),
    )?;
    std::fs::write(out.join("config.echo"), cfg.echo())?;
    println!(
        "wrote {} (final rel_tp {:.4})",
        out.join("metrics.csv").display(),
        res.series.relative_throughput.last().unwrap()
    );
    Ok(())
}

fn cmd_sweep(base: &ScenarioConfig, param: &str, values: &str, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let t0 = Instant::now();
    let mut csv = String::from("slot,curve,value\n");
    let mut summary = String::new();
    for value in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut cfg = base.clone();
        cfg.apply(param, value)?;
        cfg.validate()?;
        let res = run_experiment(&cfg)?;
        let prefix = format!("{param}={value}");
        push_series(&mut csv, &prefix, &res.series);
        let last = res.series.slots.len() - 1;
        let _ = writeln!(
            summary,
            "{prefix}: rel_tp {:.4}  miss {}  sensing {:.4}",
            res.series.relative_throughput[last],
            res.series.miss_rate[last]
                .map(|m| format!("{m:.4}"))
                .unwrap_or_else(|| "-".into()),
            res.series.sensing_ratio[last]
        );
    }
    let _ = writeln!(summary, "elapsed: {:.2}s", t0.elapsed().as_secs_f64());
    std::fs::write(out.join("metrics.csv"), csv)?;
    std::fs::write(out.join("summary.txt"), summary)?;
    std::fs::write(out.join("config.echo"), base.echo())?;
    println!("wrote {}", out.join("metrics.csv").display());
    Ok(())
}

fn cmd_bounds(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let spec = ConvergenceSpec {
        alpha: cfg.alpha1,
        epsilon: cfg.epsilon,
        l: cfg.l,
        n_bands: cfg.n_bands,
        mu: cfg.mu.clone(),
        horizon: cfg.horizon as usize,
        gate_prob: cfg.bernoulli_gate,
    };
    spec.validate()?;
    let traj = simulate_expected_q(&spec, cfg.runs, cfg.seed);
    let ks = crate::sim::metrics::log_spaced_slots(cfg.horizon, cfg.sample_points);
    let mut csv = String::from("k,band,mean_q,lower,upper\n");
    for &k in &ks {
        let lower = expected_q_bound(&spec, k, BoundSide::Lower);
        let upper = expected_q_bound(&spec, k, BoundSide::Upper);
        for b in 0..spec.n_bands {
            let _ = writeln!(
                csv,
                "{k},{b},{},{},{}",
                fmt_value(traj[b][k as usize]),
                fmt_value(lower[b]),
                fmt_value(upper[b])
            );
        }
    }
    std::fs::write(out.join("bounds.csv"), csv)?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "bands: {}  horizon: {}  runs: {}  alpha: {}  epsilon: {}  gate: {}",
        spec.n_bands, spec.horizon, cfg.runs, spec.alpha, spec.epsilon, spec.gate_prob
    );
    for b in 0..spec.n_bands {
        let _ = writeln!(
            summary,
            "band {b}: mean reward {:.4}, final mean_q {:.4}",
            spec.mean_reward(b),
            traj[b][spec.horizon]
        );
    }
    std::fs::write(out.join("summary.txt"), summary)?;
    std::fs::write(out.join("config.echo"), cfg.echo())?;
    println!("wrote {}", out.join("bounds.csv").display());
    Ok(())
}

fn cmd_solve_sap(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config("instance", format!("cannot read {}: {e}", path.display()))
    })?;
    let inst = SapInstance::from_text(&text)?;
    println!(
        "instance: {} SUs x {} bands, targets {:?}, margin {}",
        inst.n_sus(),
        inst.n_bands(),
        inst.miss_targets,
        inst.safety_margin
    );
    let solvers: [(&str, fn(&SapInstance) -> Result<crate::assignment::AssignmentMatrix>); 3] = [
        ("branch-and-bound", solve_bb),
        ("iterative-hungarian", solve_iterative_hungarian),
        ("brute-force", brute_force_sap),
    ];
    for (name, solve) in solvers {
        let t0 = Instant::now();
        let outcome = solve(&inst);
        let wall = t0.elapsed();
        match outcome {
            Ok(x) => {
                let picks: Vec<String> = (0..inst.n_bands())
                    .map(|b| {
                        let sus: Vec<String> = x
                            .sus_for_band(b)
                            .iter()
                            .map(|s| format!("SU {}", s + 1))
                            .collect();
                        format!("band {}: {}", b + 1, sus.join(" + "))
                    })
                    .collect();
                println!(
                    "{name}: feasible, cost {}, {} ({:.1} us)",
                    x.cost(&inst),
                    picks.join("; "),
                    wall.as_secs_f64() * 1e6
                );
            }
            Err(Error::Infeasible) => {
                println!("{name}: infeasible ({:.1} us)", wall.as_secs_f64() * 1e6);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn cmd_nonstat(cfg: &ScenarioConfig, scenario: &str, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let t0 = Instant::now();
    let policies: Vec<PolicyKind> = match scenario {
        "markov" => vec![PolicyKind::Proposed, PolicyKind::Ducb, PolicyKind::Myopic],
        _ => vec![PolicyKind::Proposed, PolicyKind::Ducb],
    };
    let res = run_bandit_comparison(cfg, &policies)?;
    let mut csv = String::from("slot,curve,value\n");
    for (i, &slot) in res.slots.iter().enumerate() {
        for (p, kind) in res.policies.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{slot},{}/slot_throughput,{}",
                kind.name(),
                fmt_value(res.mean_slot_reward[p][i])
            );
            let _ = writeln!(
                csv,
                "{slot},{}/cum_throughput,{}",
                kind.name(),
                fmt_value(res.mean_cum_reward[p][i])
            );
        }
    }
    std::fs::write(out.join("metrics.csv"), csv)?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "scenario: {scenario}  horizon: {}  runs: {}  permutations: {}",
        cfg.horizon, cfg.runs, cfg.nonstat_permutations
    );
    for (p, kind) in res.policies.iter().enumerate() {
        let _ = writeln!(summary, "{}: total throughput {:.1}", kind.name(), res.totals[p]);
    }
    let _ = writeln!(summary, "genie reference: {:.1}", res.genie_total);
    let _ = writeln!(summary, "elapsed: {:.2}s", t0.elapsed().as_secs_f64());
    std::fs::write(out.join("summary.txt"), &summary)?;
    std::fs::write(out.join("config.echo"), cfg.echo())?;
    print!("{summary}");
    Ok(())
}
