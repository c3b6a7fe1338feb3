//! TOML configuration: scenario geometry, single-run settings and sweep plans.
//!
//! A configuration document is merged over a profile's defaults, so a file
//! only needs the keys it changes:
//!
//! ```toml
//! profile = "desk"
//!
//! [motion]
//! v_s = 25.0
//!
//! [run]
//! t_g_ms = 250.0
//! strategy = "regular"
//!
//! [sweep]
//! m = [1, 5]
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::LcurveOptions;
use crate::scenario::{
    make_source_grid, make_spiral_array, GridCentering, GroundPlane, Medium, MicArray, MotionSpec, Scenario,
    DEFAULT_SPIRAL_TURNS,
};
use crate::spectral::{BinStrategy, WindowKind};
use crate::transfer::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Reduced problem: 40×40 grid at 0.1 m, 32-microphone spiral.
    #[default]
    Desk,
    /// Full size: 80×80 grid at 0.05 m, 112-microphone spiral.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!("unknown profile `{s}` (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: [f64; 3],
    pub x_extent: f64,
    pub z_extent: f64,
    pub spacing: f64,
    /// `y` of the source plane.
    pub y: f64,
    pub centering: GridCentering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Spiral,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    #[serde(rename = "type")]
    pub kind: ArrayKind,
    pub n_mics: usize,
    pub diameter: f64,
    pub arms: usize,
    pub turns: f64,
    pub seed: u64,
    /// Array file (one `x y z` per line) when `type = "file"`; positions are absolute.
    pub file: Option<PathBuf>,
    /// Distance of the array plane from the source plane along `y`.
    pub distance: f64,
    /// Array centre; defaults to the grid centre in `x`/`z` at `y + distance`.
    pub center: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub v_s: f64,
    pub x0: f64,
    pub z0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundConfig {
    pub enabled: bool,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub medium: MediumConfig,
    pub grid: GridConfig,
    pub array: ArrayConfig,
    pub motion: MotionConfig,
    pub ground: GroundConfig,
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        let medium = Medium::new(self.medium.c)?;
        let g = &self.grid;
        let grid = make_source_grid(g.origin, g.x_extent, g.z_extent, g.spacing, g.y, g.centering)?;
        let a = &self.array;
        let array = match a.kind {
            ArrayKind::Spiral => {
                let center = a.center.unwrap_or([
                    g.origin[0] + 0.5 * g.x_extent,
                    g.y + a.distance,
                    g.origin[2] + 0.5 * g.z_extent,
                ]);
                make_spiral_array(a.n_mics, a.diameter, a.arms, a.turns, a.seed)?.placed_at(center)
            }
            ArrayKind::File => {
                let path = a
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::Config("array.type = \"file\" needs array.file".into()))?;
                MicArray::from_file(path)?
            }
        };
        let motion = MotionSpec {
            speed: self.motion.v_s,
            x0: self.motion.x0,
            z0: self.motion.z0,
        };
        let ground = GroundPlane {
            enabled: self.ground.enabled,
            z_plane: self.ground.z,
        };
        Scenario::new(medium, grid, array, motion, ground)
    }
}

/// Correlated noise from a stationary point source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatedNoiseConfig {
    pub snr_db: f64,
    pub position: [f64; 3],
    /// Passband in Hz; defaults to `[0.8 f−, 1.2 f+]` of the analysis band.
    pub band: Option<(f64, f64)>,
}

/// Everything about one run that is not geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fs: f64,
    pub f0: f64,
    pub window: WindowKind,
    pub t_g_ms: f64,
    pub strategy: BinStrategy,
    pub m: usize,
    /// Seed for random bin selection and noise realizations.
    pub seed: u64,
    /// Analysis band in Hz; defaults to `[0.92 f0, 1.12 f0]` clipped to the Doppler band.
    pub band: Option<(f64, f64)>,
    /// Uncorrelated stabilization noise; `None` disables it.
    pub stabilization_snr_db: Option<f64>,
    pub correlated_noise: Option<CorrelatedNoiseConfig>,
    /// Kernel assumed by the inversion; defaults to the scenario's own ground model.
    pub model_ground: Option<bool>,
    pub quad: QuadratureSpec,
    pub lcurve: LcurveOptions,
    pub threshold_db: f64,
    /// Recording margin beyond the window on each side, seconds.
    pub margin: f64,
}

/// Sweep axes; the Cartesian product defines the run set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub f0: Vec<f64>,
    pub v_s: Vec<f64>,
    pub t_g_ms: Vec<f64>,
    pub strategy: Vec<BinStrategy>,
    pub m: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Stabilization SNR values; a negative value or `inf` disables the noise.
    pub snr_db: Vec<f64>,
    pub distance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub medium: MediumConfig,
    pub grid: GridConfig,
    pub array: ArrayConfig,
    pub motion: MotionConfig,
    pub ground: GroundConfig,
    pub run: RunConfig,
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            medium: self.medium.clone(),
            grid: self.grid.clone(),
            array: self.array.clone(),
            motion: self.motion.clone(),
            ground: self.ground.clone(),
        }
    }

    pub fn profile_defaults(profile: Profile) -> ExperimentConfig {
        let (grid, array) = match profile {
            Profile::Desk => (
                GridConfig {
                    origin: [-0.05, 0.0, -0.05],
                    x_extent: 4.0,
                    z_extent: 4.0,
                    spacing: 0.1,
                    y: 0.0,
                    centering: GridCentering::Cell,
                },
                (32, 4),
            ),
            Profile::Paper => (
                GridConfig {
                    origin: [-0.025, 0.0, -0.025],
                    x_extent: 4.0,
                    z_extent: 4.0,
                    spacing: 0.05,
                    y: 0.0,
                    centering: GridCentering::Cell,
                },
                (112, 7),
            ),
        };
        ExperimentConfig {
            profile,
            medium: MediumConfig { c: 343.0 },
            grid,
            array: ArrayConfig {
                kind: ArrayKind::Spiral,
                n_mics: array.0,
                diameter: 1.0,
                arms: array.1,
                turns: DEFAULT_SPIRAL_TURNS,
                seed: 0,
                file: None,
                distance: 4.0,
                center: None,
            },
            motion: MotionConfig {
                v_s: 50.0,
                x0: 2.0,
                z0: 2.0,
            },
            ground: GroundConfig {
                enabled: false,
                z: -1.0,
            },
            run: RunConfig {
                fs: 10_000.0,
                f0: 1000.0,
                window: WindowKind::Hanning,
                t_g_ms: 1000.0,
                strategy: BinStrategy::Random,
                m: 5,
                seed: 0,
                band: None,
                stabilization_snr_db: Some(80.0),
                correlated_noise: None,
                model_ground: None,
                quad: QuadratureSpec::default(),
                lcurve: LcurveOptions::default(),
                threshold_db: 3.0,
                margin: 0.01,
            },
            sweep: None,
        }
    }

    /// Parse a TOML document over the defaults of its `profile` key (or
    /// `profile` when given, which takes precedence).
    pub fn from_toml(text: &str, profile: Option<Profile>) -> Result<Self> {
        let user: toml::Value = toml::from_str(text).map_err(|e| Error::Config(format!("configuration: {e}")))?;
        let from_file = user
            .get("profile")
            .and_then(|v| v.as_str())
            .map(Profile::from_str)
            .transpose()?;
        let profile = profile.or(from_file).unwrap_or_default();
        let mut merged = toml::Value::try_from(Self::profile_defaults(profile)).expect("serializable defaults");
        merge(&mut merged, user);
        if let toml::Value::Table(t) = &mut merged {
            t.insert("profile".into(), toml::Value::try_from(profile).expect("serializable profile"));
        }
        let sweep = match &mut merged {
            toml::Value::Table(t) => t.remove("sweep"),
            _ => None,
        };
        let config_err = |e: toml::de::Error| Error::Config(format!("configuration: {e}"));
        let mut cfg: ExperimentConfig = merged.try_into().map_err(config_err)?;
        if let Some(user_sweep) = sweep {
            // axes left out of [sweep] take the single-run value
            let mut axes = toml::Value::try_from(cfg.sweep_or_single()).expect("serializable sweep");
            merge(&mut axes, user_sweep);
            let sweep: SweepConfig = axes.try_into().map_err(config_err)?;
            sweep.validate()?;
            cfg.sweep = Some(sweep);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path, profile: Option<Profile>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, profile)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable configuration")
    }

    /// The sweep of this configuration, with missing axes taken from the single-run values.
    pub fn sweep_or_single(&self) -> SweepConfig {
        self.sweep.clone().unwrap_or_else(|| SweepConfig {
            f0: vec![self.run.f0],
            v_s: vec![self.motion.v_s],
            t_g_ms: vec![self.run.t_g_ms],
            strategy: vec![self.run.strategy],
            m: vec![self.run.m],
            seeds: vec![self.run.seed],
            snr_db: vec![self.run.stabilization_snr_db.unwrap_or(f64::INFINITY)],
            distance: vec![self.array.distance],
        })
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("f0", self.f0.len()),
            ("v_s", self.v_s.len()),
            ("t_g_ms", self.t_g_ms.len()),
            ("strategy", self.strategy.len()),
            ("m", self.m.len()),
            ("seeds", self.seeds.len()),
            ("snr_db", self.snr_db.len()),
            ("distance", self.distance.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!("sweep axis `{name}` is empty")));
        }
        Ok(())
    }

    pub fn n_runs(&self) -> usize {
        self.f0.len()
            * self.v_s.len()
            * self.t_g_ms.len()
            * self.strategy.len()
            * self.m.len()
            * self.seeds.len()
            * self.snr_db.len()
            * self.distance.len()
    }
}

/// Recursive table merge: values in `over` replace those in `base`.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_profile_builds() {
        let cfg = ExperimentConfig::from_toml("", None).unwrap();
        assert_eq!(cfg.profile, Profile::Desk);
        let s = cfg.scenario().build().unwrap();
        assert_eq!((s.grid.nx, s.grid.nz), (40, 40));
        assert_eq!(s.array.len(), 32);
        assert!(s.grid.index_of(2.0, 2.0).is_some());
        let center: f64 = s.array.positions.iter().map(|p| p[1]).sum::<f64>() / 32.0;
        assert!((center - 4.0).abs() < 1e-12);
    }

    #[test]
    fn paper_profile_builds() {
        let cfg = ExperimentConfig::from_toml("profile = \"paper\"", None).unwrap();
        let s = cfg.scenario().build().unwrap();
        assert_eq!((s.grid.nx, s.grid.nz, s.array.len()), (80, 80, 112));
        assert!(s.grid.index_of(2.0, 2.0).is_some());
        let ap = s.array.aperture();
        assert!(ap <= 1.01 && ap > 0.9, "aperture {ap}");
    }

    #[test]
    fn overrides_merge() {
        let text = "[motion]\nv_s = 25.0\n[run]\nstrategy = \"regular\"\nt_g_ms = 250.0\n";
        let cfg = ExperimentConfig::from_toml(text, Some(Profile::Desk)).unwrap();
        assert_eq!(cfg.motion.v_s, 25.0);
        assert_eq!(cfg.motion.x0, 2.0);
        assert_eq!(cfg.run.strategy, BinStrategy::Regular);
        assert_eq!(cfg.run.m, 5);
        let back = ExperimentConfig::from_toml(&cfg.to_toml(), None).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_empty_axes() {
        assert!(ExperimentConfig::from_toml("[motion]\nspeed = 3.0\n", None).is_err());
        let err = ExperimentConfig::from_toml("[sweep]\nf0 = []\n", None).unwrap_err();
        assert!(err.to_string().contains("f0"));
        let cfg = ExperimentConfig::from_toml("[sweep]\nm = [1, 5]\nt_g_ms = [50.0, 1000.0]\n", None).unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.n_runs(), 4);
        assert_eq!(sweep.f0, vec![1000.0]);
    }
}
