//! Regularly spaced bins repeat the source image every v/Δf metres along
//! the motion; per-microphone random bins break the repetition.

use moving_source::analysis::{find_peak, sidelobe_period, Axis};
use moving_source::config::ExperimentConfig;
use moving_source::experiment::{run_single, RunSpec};
use moving_source::spectral::BinStrategy;
use moving_source::transfer::predicted_period;

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        [grid]
        origin = [0.0, 0.0, 0.0]
        x_extent = 8.0
        z_extent = 4.0
        spacing = 0.2
        centering = "node"
        "#,
        None,
    )?;
    let cache = std::env::temp_dir().join("moving-source-cache");
    for (strategy, m) in [(BinStrategy::Regular, 5), (BinStrategy::Regular, 6), (BinStrategy::Random, 5)] {
        let mut spec = RunSpec::from_config(&cfg);
        spec.run.strategy = strategy;
        spec.run.m = m;
        let o = run_single(&spec, Some(&cache))?;
        let f = o.selection.frequencies(0);
        let expected = (strategy == BinStrategy::Regular).then(|| predicted_period(f[1] - f[0], spec.scenario.motion.v_s));
        let period = sidelobe_period(&o.map, Axis::X);
        println!(
            "{strategy} M={m}: peak {:?}, measured period {}, predicted {}",
            find_peak(&o.map),
            period.map_or("none".into(), |p| format!("{p:.3} m")),
            expected.map_or("none".into(), |p| format!("{p:.3} m"))
        );
    }
    Ok(())
}
