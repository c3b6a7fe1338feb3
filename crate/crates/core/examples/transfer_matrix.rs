//! Assemble a transfer matrix, check it against the windowed DFT of a
//! simulated recording, and round-trip it through the on-disk format.

use num_complex::Complex64;

use moving_source::config::ExperimentConfig;
use moving_source::experiment::{assemble, prepare, simulate, RunSpec};
use moving_source::inverse::{ObservationVector, SvdSystem};

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
        [run]
        t_g_ms = 250.0
        "#,
        None,
    )?;
    let mut spec = RunSpec::from_config(&cfg);
    spec.run.stabilization_snr_db = None;
    let prep = prepare(&spec)?;
    let started = std::time::Instant::now();
    let h = assemble(&prep, &spec.run, None)?;
    let (rows, cols) = h.shape();
    println!("H: {rows} × {cols} in {:.2} s", started.elapsed().as_secs_f64());
    println!("{}", SvdSystem::new(&h.entries)?.condition_report());

    // H times the true source vector reproduces the observed DFT coefficients
    let rec = simulate(&prep, &spec.run)?;
    let p = ObservationVector::from_recording(&rec, &prep.window, &prep.selection)?;
    let col = prep.scenario.grid.nearest(cfg.motion.x0, cfg.motion.z0);
    let worst = (0..rows)
        .map(|r| (h.entries[(r, col)] - p.values[r]).norm() / p.values[r].norm())
        .fold(0.0, f64::max);
    println!("max relative model/DFT mismatch over {rows} rows: {worst:.2e}");

    let path = std::env::temp_dir().join("example-transfer.htm");
    moving_source::io::write_transfer_atomic(&path, &h)?;
    let back = moving_source::io::read_transfer(&path, Some(&h.key))?;
    assert_eq!(back.entries, h.entries);
    let total: Complex64 = back.entries.iter().sum();
    println!("round trip ok ({}), Σh = {total:.4e}", path.display());
    Ok(())
}
