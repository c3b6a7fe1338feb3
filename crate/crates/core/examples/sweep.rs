//! A small parameter sweep written to a directory tree with a summary CSV.

use moving_source::config::ExperimentConfig;
use moving_source::experiment::{expand, run_plan, validate_plan};

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        [grid]
        origin = [1.0, 0.0, 1.0]
        x_extent = 2.0
        z_extent = 2.0
        spacing = 0.1
        centering = "node"
        [array]
        n_mics = 16
        [sweep]
        t_g_ms = [50.0, 250.0]
        m = [1, 5]
        "#,
        None,
    )?;
    let runs = expand(&cfg)?;
    validate_plan(&runs)?;
    let out = std::env::var_os("MOVING_SOURCE_OUT").map_or_else(|| std::env::temp_dir().join("sweep"), Into::into);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_plan(&runs, &out, jobs, false)?;
    print!("{}", report.summary);
    println!("{} runs, {} failed -> {}", report.n_runs, report.n_failed, report.summary_path.display());
    Ok(())
}
