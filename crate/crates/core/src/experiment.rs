//! End-to-end runs: simulate, assemble, invert, analyze; and sweeps over the
//! Cartesian product of configuration axes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{beamwidth_report, sidelobe_period, to_source_map, Axis, BeamwidthReport, SourceMap};
use crate::config::{ExperimentConfig, RunConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::inverse::{solve_pipeline, RegularizationResult};
use crate::io;
use crate::scenario::Scenario;
use crate::sim::{add_noise, add_stabilization_noise, default_noise_band, record_array, NoiseSpec, Recording, SignalSpec};
use crate::specfun::Kernel2D;
use crate::spectral::{analysis_band, select_bins, BinSelection, Window};
use crate::transfer::{TransferMatrix, TransferModel};

/// One fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub scenario: ScenarioConfig,
    pub run: RunConfig,
}

impl RunSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> RunSpec {
        RunSpec {
            scenario: cfg.scenario(),
            run: cfg.run.clone(),
        }
    }
}

/// Derived objects shared by the pipeline stages of one run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub signal: SignalSpec,
    pub window: Window,
    pub band: (f64, f64),
    pub selection: BinSelection,
    pub kernel: Kernel2D,
}

pub fn prepare(spec: &RunSpec) -> Result<Prepared> {
    let r = &spec.run;
    let scenario = spec.scenario.build()?;
    let signal = SignalSpec::new(r.f0, Complex64::new(1.0, 0.0))?;
    let window = Window::centered(r.window, r.t_g_ms * 1e-3, r.fs, 0.0)?;
    let band = match r.band {
        Some(b) => b,
        None => analysis_band(r.f0, scenario.motion.speed, &scenario.medium)?,
    };
    let selection = select_bins(r.strategy, band, &window, r.f0, r.m, scenario.array.len(), r.seed)?;
    let kernel = match r.model_ground {
        None => scenario.kernel(),
        Some(false) => Kernel2D::FreeField,
        Some(true) => Kernel2D::HalfPlane {
            z_plane: spec.scenario.ground.z,
        },
    };
    Ok(Prepared {
        scenario,
        signal,
        window,
        band,
        selection,
        kernel,
    })
}

/// Simulated recording covering the analysis window, with the configured noise.
pub fn simulate(prep: &Prepared, run: &RunConfig) -> Result<Recording> {
    let w = &prep.window;
    let span = (w.first_time() - run.margin, w.end_time() + run.margin);
    let mut rec = record_array(&prep.scenario, &prep.signal, run.fs, span)?;
    if let Some(noise) = &run.correlated_noise {
        let spec = NoiseSpec {
            snr_db: noise.snr_db,
            source_position: noise.position,
            band: noise.band.unwrap_or_else(|| default_noise_band(prep.band)),
            seed: run.seed,
        };
        rec = add_noise(&rec, &prep.scenario, &spec)?;
    }
    if let Some(snr) = run.stabilization_snr_db {
        // separate stream from the correlated noise
        rec = add_stabilization_noise(&rec, snr, run.seed ^ 0x5354_4142);
    }
    Ok(rec)
}

pub fn transfer_model(prep: &Prepared, run: &RunConfig) -> Result<TransferModel> {
    TransferModel::new(&prep.scenario, &prep.window, prep.kernel, run.f0, run.quad)
}

pub fn assemble(prep: &Prepared, run: &RunConfig, cache_dir: Option<&Path>) -> Result<TransferMatrix> {
    let model = transfer_model(prep, run)?;
    match cache_dir {
        Some(dir) => model.assemble_cached(&prep.selection, dir),
        None => model.assemble(&prep.selection),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub selection: BinSelection,
    pub recording: Recording,
    pub transfer_digest: String,
    pub result: RegularizationResult,
    pub map: SourceMap,
    pub report: Option<BeamwidthReport>,
    pub period: Option<f64>,
    pub seconds: f64,
}

/// Maps, beamwidths and period from a solution vector.
pub fn analyze(
    a: &[Complex64],
    scenario: &Scenario,
    threshold_db: f64,
) -> Result<(SourceMap, Option<BeamwidthReport>, Option<f64>)> {
    let map = to_source_map(a, &scenario.grid)?;
    let truth = (scenario.motion.x0, scenario.motion.z0);
    let report = match beamwidth_report(&map, Some(truth), threshold_db) {
        Ok(r) => Some(r),
        Err(Error::NoContour { .. }) => None,
        Err(e) => return Err(e),
    };
    let period = sidelobe_period(&map, Axis::X);
    Ok((map, report, period))
}

pub fn run_single(spec: &RunSpec, cache_dir: Option<&Path>) -> Result<RunOutcome> {
    let start = Instant::now();
    let prep = prepare(spec)?;
    let recording = simulate(&prep, &spec.run)?;
    let h = assemble(&prep, &spec.run, cache_dir)?;
    let result = solve_pipeline(&h, &recording, &prep.window, &prep.selection, &spec.run.lcurve)?;
    let (map, report, period) = analyze(&result.a, &prep.scenario, spec.run.threshold_db)?;
    Ok(RunOutcome {
        spec: spec.clone(),
        selection: prep.selection,
        recording,
        transfer_digest: h.key.digest(),
        result,
        map,
        report,
        period,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Expand a configuration's sweep into run specs, in a fixed order.
pub fn expand(cfg: &ExperimentConfig) -> Result<Vec<RunSpec>> {
    let sweep = cfg.sweep_or_single();
    sweep.validate()?;
    let mut runs = Vec::with_capacity(sweep.n_runs());
    for &f0 in &sweep.f0 {
        for &v_s in &sweep.v_s {
            for &t_g in &sweep.t_g_ms {
                for &strategy in &sweep.strategy {
                    for &m in &sweep.m {
                        for &seed in &sweep.seeds {
                            for &snr in &sweep.snr_db {
                                for &distance in &sweep.distance {
                                    let mut spec = RunSpec::from_config(cfg);
                                    spec.run.f0 = f0;
                                    spec.scenario.motion.v_s = v_s;
                                    spec.run.t_g_ms = t_g;
                                    spec.run.strategy = strategy;
                                    spec.run.m = m;
                                    spec.run.seed = seed;
                                    spec.run.stabilization_snr_db = (snr.is_finite() && snr >= 0.0).then_some(snr);
                                    spec.scenario.array.distance = distance;
                                    runs.push(spec);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(runs)
}

/// Validate every run of a plan before doing any work.
pub fn validate_plan(runs: &[RunSpec]) -> Result<()> {
    for (i, spec) in runs.iter().enumerate() {
        prepare(spec).map_err(|e| Error::Config(format!("run {}: {e}", i + 1)))?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str =
    "run,f0,v_s,t_g_ms,strategy,m,seed,snr_db,distance,lambda,displacement,h_bw,v_bw,period,status";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

pub fn summary_row(index: usize, spec: &RunSpec, outcome: &Result<RunOutcome>) -> String {
    let r = &spec.run;
    let mut s = format!(
        "{},{},{},{},{},{},{},{},{}",
        index + 1,
        r.f0,
        spec.scenario.motion.v_s,
        r.t_g_ms,
        r.strategy,
        r.m,
        r.seed,
        r.stabilization_snr_db.map_or_else(|| "off".into(), |v| v.to_string()),
        spec.scenario.array.distance
    );
    match outcome {
        Ok(o) => {
            let rep = o.report.as_ref();
            let _ = write!(
                s,
                ",{:.6e},{},{},{},{},ok",
                o.result.lambda,
                fmt_opt(rep.map(|r| r.displacement)),
                fmt_opt(rep.map(|r| r.horizontal_bw)),
                fmt_opt(rep.map(|r| r.vertical_bw)),
                fmt_opt(o.period)
            );
        }
        Err(e) => {
            let msg = e.to_string().replace([',', '\n'], ";");
            let _ = write!(s, ",,,,,,error: {msg}");
        }
    }
    s
}

/// Write the per-run artifacts into `dir`.
pub fn write_run_outputs(dir: &Path, o: &RunOutcome, plot_data: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("spec.toml"), toml::to_string_pretty(&o.spec).map_err(|e| Error::Config(e.to_string()))?)?;
    std::fs::write(dir.join("recording.json"), json(&o.recording.meta))?;
    std::fs::write(dir.join("selection.json"), o.selection.to_json())?;
    std::fs::write(dir.join("transfer.txt"), format!("{}\n", o.transfer_digest))?;
    let meta = serde_json::json!({
        "lambda": o.result.lambda,
        "residual_norm": o.result.residual_norm,
        "solution_norm": o.result.solution_norm,
        "transfer_digest": o.result.transfer_digest,
        "observation_hash": o.result.observation_hash,
    });
    io::write_vector(&dir.join("result.bin"), "solution", &o.result.a, meta.clone())?;
    std::fs::write(dir.join("result.json"), json(&meta))?;
    std::fs::write(dir.join("lcurve.csv"), o.result.trace_csv())?;
    std::fs::write(dir.join("map.csv"), o.map.to_csv())?;
    std::fs::write(dir.join("beamwidth.json"), json(&o.report))?;
    if plot_data {
        std::fs::write(dir.join("map.gnuplot"), o.map.to_gnuplot_matrix())?;
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub summary_path: PathBuf,
    pub summary: String,
    pub n_runs: usize,
    pub n_failed: usize,
}

/// Run every spec with at most `jobs` runs in flight; matrices are shared
/// through `out_dir/cache`. The summary CSV is ordered by run index.
pub fn run_plan(runs: &[RunSpec], out_dir: &Path, jobs: usize, plot_data: bool) -> Result<SweepReport> {
    std::fs::create_dir_all(out_dir)?;
    let cache = out_dir.join("cache");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows: Vec<(String, bool)> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, spec)| {
                let outcome = run_single(spec, Some(&cache));
                let written = outcome
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|o| {
                        write_run_outputs(&out_dir.join(format!("run-{:04}", i + 1)), o, plot_data).map_err(|e| e.to_string())
                    });
                if let Err(e) = &written {
                    log::error!("run {}: {e}", i + 1);
                }
                let row = match (&outcome, written) {
                    (Ok(_), Err(e)) => summary_row(i, spec, &Err(Error::Config(e))),
                    _ => summary_row(i, spec, &outcome),
                };
                let ok = row.ends_with(",ok");
                (row, ok)
            })
            .collect()
    });
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for (row, _) in &rows {
        summary.push_str(row);
        summary.push('\n');
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, &summary)?;
    Ok(SweepReport {
        summary_path,
        summary,
        n_runs: runs.len(),
        n_failed: rows.iter().filter(|(_, ok)| !ok).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let text = r#"
            [grid]
            origin = [1.5, 0.0, 1.5]
            x_extent = 1.0
            z_extent = 1.0
            spacing = 0.1
            centering = "node"
            [array]
            n_mics = 8
            arms = 2
            [run]
            t_g_ms = 50.0
            m = 3
        "#;
        ExperimentConfig::from_toml(text, None).unwrap()
    }

    #[test]
    fn expansion_order_and_count() {
        let mut cfg = tiny();
        cfg.sweep = Some(crate::config::SweepConfig {
            m: vec![1, 3],
            t_g_ms: vec![50.0, 100.0],
            ..cfg.sweep_or_single()
        });
        let runs = expand(&cfg).unwrap();
        assert_eq!(runs.len(), 4);
        assert_eq!((runs[0].run.t_g_ms, runs[0].run.m), (50.0, 1));
        assert_eq!((runs[1].run.t_g_ms, runs[1].run.m), (50.0, 3));
        assert_eq!((runs[3].run.t_g_ms, runs[3].run.m), (100.0, 3));
    }

    #[test]
    fn too_many_bins_rejected_early() {
        let mut cfg = tiny();
        cfg.run.f0 = 250.0;
        cfg.run.m = 5;
        let err = validate_plan(&expand(&cfg).unwrap()).unwrap_err();
        assert!(err.to_string().contains("only 3 DFT bins"), "{err}");
    }

    #[test]
    fn small_run_localizes_and_is_deterministic() {
        let cfg = tiny();
        let spec = RunSpec::from_config(&cfg);
        let a = run_single(&spec, None).unwrap();
        let rep = a.report.clone().unwrap();
        assert!(rep.displacement <= 0.1 + 1e-9, "{rep:?}");
        let b = run_single(&spec, None).unwrap();
        assert_eq!(a.result, b.result);
        assert!(a.result.residual_norm / a.result.lcurve_trace.len().max(1) as f64 >= 0.0);
    }
}
