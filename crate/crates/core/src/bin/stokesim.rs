//! Batch front end: run configured simulations, benchmark the solvers, and
//! post-process trajectory records.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use stokesim::sim::{analyze, config::SimulationConfig, driver};

const USAGE: &str = "\
stokesim - rigid-sphere Stokes suspension simulator

USAGE:
    stokesim run --config <file> [--output <dir>]
    stokesim bench --suite <solvers|backends>
    stokesim analyze --records <dir> --kind <veldist|lifetime|bbpgd>
    stokesim analyze --kind rotlet-disk [--samples <k>] [--out <file>]

`run` executes the scenario described by the flat key-value config file and
writes trajectory.csv, constraints.csv, solver_stats.csv, and manifest.txt.
`bench` prints comparison tables as CSV on stdout.
`analyze` reads a records directory produced by `run` and emits derived
tables (velocity distribution, constraint lifetimes, solver cost), or the
closed-form rotlet-disk profile with its fitted edge law.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn flag_value<'a>(args: &'a [String], name: &str) -> Option<&'a str> {
    args.iter()
        .position(|a| a == name)
        .and_then(|i| args.get(i + 1))
        .map(|s| s.as_str())
}

fn dispatch(args: &[String]) -> Result<(), String> {
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(args),
        Some("bench") => cmd_bench(args),
        Some("analyze") => cmd_analyze(args),
        Some("--help") | Some("-h") | None => {
            print!("{USAGE}");
            Ok(())
        }
        Some(other) => Err(format!("unknown command '{other}'\n{USAGE}")),
    }
}

fn cmd_run(args: &[String]) -> Result<(), String> {
    let config_path = flag_value(args, "--config").ok_or("run needs --config <file>")?;
    let cfg = SimulationConfig::from_file(Path::new(config_path)).map_err(|e| e.to_string())?;
    let out_dir: PathBuf = flag_value(args, "--output")
        .map(PathBuf::from)
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = driver::run_simulation(&cfg).map_err(|e| e.to_string())?;
    outcome
        .write_outputs(&out_dir, &cfg)
        .map_err(|e| e.to_string())?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let steps = outcome.solver.len();
    let avg_gd =
        outcome.solver.iter().map(|s| s.gd_steps).sum::<usize>() as f64 / steps.max(1) as f64;
    println!(
        "completed {} steps of '{}' with backend '{}' (avg gradient-descent steps {:.1}); outputs in {}",
        steps,
        cfg.scenario,
        cfg.backend,
        avg_gd,
        out_dir.display()
    );
    Ok(())
}

fn cmd_bench(args: &[String]) -> Result<(), String> {
    let suite = flag_value(args, "--suite").ok_or("bench needs --suite <name>")?;
    match suite {
        "solvers" => bench_solvers(),
        "backends" => bench_backends(),
        other => Err(format!(
            "unknown suite '{other}' (expected solvers or backends)"
        )),
    }
}

/// Per-step gradient-descent and operator-application counts of the two CQP
/// solvers on the roll-over pair; the operator count is the real cost because
/// every application hides a mobility solve.
fn bench_solvers() -> Result<(), String> {
    let base = SimulationConfig {
        scenario: "pair_rollover".into(),
        backend: "rpy".into(),
        dt: 0.1,
        steps: 220,
        seed: 7,
        record_every: 1000,
        ..Default::default()
    };
    let run = |solver| {
        let cfg = SimulationConfig {
            solver,
            ..base.clone()
        };
        driver::run_simulation(&cfg).map_err(|e| e.to_string())
    };
    let bb = run(stokesim::sim::SolverKind::Bbpgd)?;
    let ap = run(stokesim::sim::SolverKind::Apgd)?;
    println!("step,n_constraints,bbpgd_steps,bbpgd_mvops,apgd_steps,apgd_mvops");
    for (b, a) in bb.solver.iter().zip(ap.solver.iter()) {
        println!(
            "{},{},{},{},{},{}",
            b.step, b.n_constraints, b.gd_steps, b.mvops, a.gd_steps, a.mvops
        );
    }
    let total = |o: &stokesim::sim::SimulationOutcome| -> (usize, usize) {
        (
            o.solver.iter().map(|s| s.gd_steps).sum(),
            o.solver.iter().map(|s| s.mvops).sum(),
        )
    };
    let (bs, bm) = total(&bb);
    let (as_, am) = total(&ap);
    eprintln!("totals: bbpgd {bs} steps / {bm} mvops, apgd {as_} steps / {am} mvops");
    Ok(())
}

/// Wall time of one simulation step per backend on a small cluster.
fn bench_backends() -> Result<(), String> {
    use std::time::Instant;
    println!("backend,n,seconds_per_step");
    for backend in ["local", "rpy", "bi"] {
        let cfg = SimulationConfig {
            scenario: "sediment_cluster".into(),
            n_particles: 32,
            backend: backend.into(),
            steps: 2,
            bi_order: 6,
            record_every: 1000,
            ..Default::default()
        };
        let t0 = Instant::now();
        driver::run_simulation(&cfg).map_err(|e| e.to_string())?;
        let dt = t0.elapsed().as_secs_f64() / 2.0;
        println!("{backend},32,{dt:.4}");
    }
    Ok(())
}

fn cmd_analyze(args: &[String]) -> Result<(), String> {
    let kind = flag_value(args, "--kind").ok_or("analyze needs --kind <name>")?;
    if kind == "rotlet-disk" {
        return analyze_rotlet_disk(args);
    }
    let records = flag_value(args, "--records").ok_or("analyze needs --records <dir>")?;
    let dir = Path::new(records);
    match kind {
        "veldist" => {
            let steps = analyze::read_records(dir).map_err(|e| e.to_string())?;
            let samples = analyze::azimuthal_samples(&steps);
            let hist =
                analyze::velocity_distribution(&samples, 40, 40).map_err(|e| e.to_string())?;
            let path = dir.join("veldist.csv");
            std::fs::write(&path, hist.to_csv()).map_err(|e| e.to_string())?;
            let corr = analyze::linear_ridge_correlation(&samples, f64::INFINITY);
            println!(
                "wrote {} ({} samples, linear ridge correlation {:.4})",
                path.display(),
                samples.len(),
                corr
            );
            Ok(())
        }
        "lifetime" => {
            let steps = analyze::read_records(dir).map_err(|e| e.to_string())?;
            let (all, active) = analyze::constraint_lifetimes(&steps);
            let path = dir.join("lifetimes.csv");
            std::fs::write(&path, analyze::lifetimes_csv(&all, &active))
                .map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} candidate runs, {} active runs)",
                path.display(),
                all.len(),
                active.len()
            );
            Ok(())
        }
        "bbpgd" => {
            // echo the solver cost columns with summary lines
            let text =
                std::fs::read_to_string(dir.join("solver_stats.csv")).map_err(|e| e.to_string())?;
            let mut total_steps = 0usize;
            let mut total_mvops = 0usize;
            let mut rows = 0usize;
            for line in text.lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() < 4 {
                    continue;
                }
                total_steps += f[2].parse::<usize>().unwrap_or(0);
                total_mvops += f[3].parse::<usize>().unwrap_or(0);
                rows += 1;
            }
            print!("{text}");
            eprintln!(
                "summary: {} steps, avg gd steps {:.2}, avg mvops {:.2}",
                rows,
                total_steps as f64 / rows.max(1) as f64,
                total_mvops as f64 / rows.max(1) as f64
            );
            Ok(())
        }
        other => Err(format!("unknown analyze kind '{other}'")),
    }
}

/// Sample the continuum rotlet-disk profile near the edge and fit the
/// logarithmic law; emitted as CSV with the fit in the trailing rows.
fn analyze_rotlet_disk(args: &[String]) -> Result<(), String> {
    use stokesim::rotlet;
    let k: usize = flag_value(args, "--samples")
        .map(|s| s.parse().map_err(|_| "bad --samples"))
        .transpose()?
        .unwrap_or(24);
    if k < 3 {
        return Err("--samples must be at least 3".into());
    }
    let model = rotlet::RotletDiskModel::new(1.0, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let mut csv = String::from("s,u_theta\n");
    let mut samples = Vec::new();
    for i in 0..k {
        let s = 0.95 + (0.999 - 0.95) * i as f64 / (k - 1) as f64;
        let u = rotlet::u_theta_pv(&model, s).map_err(|e| e.to_string())?;
        samples.push((s, u));
        csv.push_str(&format!("{s},{u}\n"));
    }
    let (a, b, rms) = rotlet::fit_edge_log(&samples, 1.0).map_err(|e| e.to_string())?;
    csv.push_str(&format!(
        "# fit: u = A log(R - s) + B\n# A,{a}\n# B,{b}\n# rms,{rms}\n"
    ));
    match flag_value(args, "--out") {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| e.to_string())?;
            println!("wrote {path} (A = {a:.5}, B = {b:.5}, rms = {rms:.2e})");
        }
        None => print!("{csv}"),
    }
    Ok(())
}
