use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use moving_source::config::{ExperimentConfig, Profile};
use moving_source::experiment::{analyze, assemble, expand, prepare, run_plan, simulate, validate_plan, RunSpec};
use moving_source::inverse::{solve_pipeline, SvdSystem};
use moving_source::io;
use moving_source::transfer::TransferMatrix;
use moving_source::verify::{run_suite, summary_text, timing_text, SuiteOptions};

#[derive(Parser)]
#[command(name = "moving-source", version, about = "Localize a moving single-frequency source from array recordings")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment configuration, merged over the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the run seed (and the sweep's seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// Output directory.
    #[arg(long, global = true, env = "MOVING_SOURCE_OUT", default_value = "moving-source-out")]
    out: PathBuf,
    /// Worker threads (runs in a sweep, rows during assembly).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write gnuplot matrices of the maps.
    #[arg(long, global = true)]
    plot_data: bool,
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse().map_err(|e: moving_source::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the array recording of the configured run.
    Simulate,
    /// Assemble the transfer matrix of the configured run.
    Transfer {
        /// Where to write the matrix (default: <out>/transfer.htm).
        #[arg(long)]
        save_transfer: Option<PathBuf>,
    },
    /// Solve for the source map with the L-curve λ.
    Invert {
        /// Recording to invert (default: <out>/recording.bin).
        #[arg(long)]
        recording: Option<PathBuf>,
        /// Use a stored transfer matrix instead of assembling one.
        #[arg(long)]
        load_transfer: Option<PathBuf>,
        /// Store the assembled matrix.
        #[arg(long)]
        save_transfer: Option<PathBuf>,
    },
    /// Maps and beamwidths from a stored solution.
    Analyze {
        /// Solution vector (default: <out>/result.bin).
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Run every combination of the configuration's sweep axes.
    Sweep,
    /// Run the acceptance checks.
    Verify {
        /// Only these check ids (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        /// Tighter quadrature tolerances.
        #[arg(long)]
        tight: bool,
        /// Do not reuse transfer matrices between checks.
        #[arg(long)]
        no_cache: bool,
    },
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::from_file(path, g.profile)
            .with_context(|| format!("reading configuration {}", path.display()))?,
        None => ExperimentConfig::from_toml("", g.profile)?,
    };
    if let Some(seed) = g.seed {
        cfg.run.seed = seed;
        if let Some(sweep) = &mut cfg.sweep {
            sweep.seeds = vec![seed];
        }
    }
    Ok(cfg)
}

fn out_dir(g: &Global) -> Result<&Path> {
    std::fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    Ok(&g.out)
}

fn cmd_simulate(g: &Global) -> Result<()> {
    let spec = RunSpec::from_config(&load_config(g)?);
    let prep = prepare(&spec)?;
    let rec = simulate(&prep, &spec.run)?;
    let dir = out_dir(g)?;
    io::write_recording(&dir.join("recording.bin"), &rec)?;
    std::fs::write(dir.join("selection.json"), prep.selection.to_json())?;
    std::fs::write(dir.join("spec.toml"), toml::to_string_pretty(&spec)?)?;
    println!(
        "recording: {} channels × {} samples from {:.4} s -> {}",
        rec.channels.len(),
        rec.n_samples(),
        rec.t_start(),
        dir.join("recording.bin").display()
    );
    Ok(())
}

fn build_transfer(spec: &RunSpec, load: Option<&Path>, save: Option<&Path>) -> Result<TransferMatrix> {
    let prep = prepare(spec)?;
    let h = match load {
        Some(path) => {
            let key = moving_source::experiment::transfer_model(&prep, &spec.run)?.key(&prep.selection);
            io::read_transfer(path, Some(&key)).with_context(|| format!("loading {}", path.display()))?
        }
        None => assemble(&prep, &spec.run, None)?,
    };
    if let Some(path) = save {
        io::write_transfer_atomic(path, &h)?;
    }
    Ok(h)
}

fn cmd_transfer(g: &Global, save: Option<PathBuf>) -> Result<()> {
    let spec = RunSpec::from_config(&load_config(g)?);
    let save = save.unwrap_or_else(|| g.out.join("transfer.htm"));
    out_dir(g)?;
    let h = build_transfer(&spec, None, Some(&save))?;
    let (rows, cols) = h.shape();
    println!("transfer matrix {rows} × {cols}, key {} -> {}", h.key.digest(), save.display());
    println!("{}", SvdSystem::new(&h.entries)?.condition_report());
    Ok(())
}

fn cmd_invert(g: &Global, recording: Option<PathBuf>, load: Option<PathBuf>, save: Option<PathBuf>) -> Result<()> {
    let spec = RunSpec::from_config(&load_config(g)?);
    let dir = out_dir(g)?;
    let rec_path = recording.unwrap_or_else(|| dir.join("recording.bin"));
    let rec = io::read_recording(&rec_path).with_context(|| format!("reading {}", rec_path.display()))?;
    let prep = prepare(&spec)?;
    let h = build_transfer(&spec, load.as_deref(), save.as_deref())?;
    let result = solve_pipeline(&h, &rec, &prep.window, &prep.selection, &spec.run.lcurve)?;
    let meta = serde_json::json!({
        "lambda": result.lambda,
        "residual_norm": result.residual_norm,
        "solution_norm": result.solution_norm,
        "transfer_digest": result.transfer_digest,
        "observation_hash": result.observation_hash,
    });
    io::write_vector(&dir.join("result.bin"), "solution", &result.a, meta.clone())?;
    std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(&meta)?)?;
    std::fs::write(dir.join("lcurve.csv"), result.trace_csv())?;
    println!(
        "λ* = {:.4e}, residual {:.4e}, solution norm {:.4e} -> {}",
        result.lambda,
        result.residual_norm,
        result.solution_norm,
        dir.join("result.bin").display()
    );
    Ok(())
}

fn cmd_analyze(g: &Global, result: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(g)?;
    let dir = out_dir(g)?;
    let path = result.unwrap_or_else(|| dir.join("result.bin"));
    let (_, a) = io::read_vector(&path, "solution").with_context(|| format!("reading {}", path.display()))?;
    let scenario = cfg.scenario().build()?;
    let (map, report, period) = analyze(&a, &scenario, cfg.run.threshold_db)?;
    std::fs::write(dir.join("map.csv"), map.to_csv())?;
    std::fs::write(dir.join("beamwidth.json"), serde_json::to_string_pretty(&report)?)?;
    if g.plot_data {
        std::fs::write(dir.join("map.gnuplot"), map.to_gnuplot_matrix())?;
    }
    match &report {
        Some(r) => println!(
            "peak ({:.3}, {:.3}), displacement {:.3} m, −{} dB beamwidth {:.3} m × {:.3} m{}",
            r.peak_xy.0,
            r.peak_xy.1,
            r.displacement,
            r.threshold_db,
            r.horizontal_bw,
            r.vertical_bw,
            if r.touches_boundary { " (clipped by the grid)" } else { "" }
        ),
        None => println!("no −{} dB contour encloses the true position", cfg.run.threshold_db),
    }
    match period {
        Some(p) => println!("sidelobe period along x: {p:.3} m"),
        None => println!("no periodic sidelobes"),
    }
    Ok(())
}

fn cmd_sweep(g: &Global) -> Result<bool> {
    let cfg = load_config(g)?;
    let runs = expand(&cfg)?;
    println!("{} runs", runs.len());
    validate_plan(&runs)?;
    let jobs = g.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = run_plan(&runs, out_dir(g)?, jobs, g.plot_data)?;
    print!("{}", report.summary);
    println!("summary -> {}", report.summary_path.display());
    if report.n_failed > 0 {
        eprintln!("{} of {} runs failed", report.n_failed, report.n_runs);
    }
    Ok(report.n_failed == 0)
}

fn cmd_verify(g: &Global, only: Vec<u32>, tight: bool, no_cache: bool) -> Result<bool> {
    if let Some(id) = only.iter().find(|id| !(1..=12).contains(*id)) {
        bail!("no check {id}; ids run from 1 to 12");
    }
    let dir = out_dir(g)?.to_path_buf();
    let mut opts = SuiteOptions::new(dir.join("verify-work"));
    if !no_cache {
        opts.cache_dir = Some(dir.join("cache"));
    }
    if tight {
        opts = opts.tightened();
    }
    opts.only = only;
    std::fs::create_dir_all(&opts.work_dir)?;
    let results = run_suite(&opts, |c| println!("{}  ({:.1} s)", c.line(), c.seconds));
    let summary = summary_text(&results);
    std::fs::write(dir.join("verify-summary.txt"), &summary)?;
    std::fs::write(dir.join("verify-timings.txt"), timing_text(&results))?;
    print!("{}", summary.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        // a second initialization only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let g = &cli.global;
    let outcome = match cli.command {
        Command::Simulate => cmd_simulate(g).map(|_| true),
        Command::Transfer { save_transfer } => cmd_transfer(g, save_transfer).map(|_| true),
        Command::Invert {
            recording,
            load_transfer,
            save_transfer,
        } => cmd_invert(g, recording, load_transfer, save_transfer).map(|_| true),
        Command::Analyze { result } => cmd_analyze(g, result).map(|_| true),
        Command::Sweep => cmd_sweep(g),
        Command::Verify { only, tight, no_cache } => cmd_verify(g, only, tight, no_cache),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
