//! A fully reflecting ground: data with a mirror source, inverted with and
//! without the mirror in the model.

use moving_source::analysis::{area_above, find_peak};
use moving_source::config::ExperimentConfig;
use moving_source::experiment::{run_single, RunSpec};

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::from_toml("[ground]\nenabled = true\nz = -1.0\n", None)?;
    let cache = std::env::temp_dir().join("moving-source-cache");
    for (label, model_ground) in [("mirror kernel", None), ("free-field kernel", Some(false))] {
        let mut spec = RunSpec::from_config(&cfg);
        spec.run.model_ground = model_ground;
        let o = run_single(&spec, Some(&cache))?;
        println!(
            "{label:>18}: peak {:?}, −3 dB area {:.3} m², beamwidths {:?}",
            find_peak(&o.map),
            area_above(&o.map, 3.0),
            o.report.map(|r| (r.horizontal_bw, r.vertical_bw))
        );
    }
    Ok(())
}
