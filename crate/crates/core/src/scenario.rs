//! Geometry, kinematics and medium shared by simulation and inversion.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::specfun::Kernel2D;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    /// Speed of sound in m/s.
    pub c: f64,
}

impl Medium {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("speed of sound must be positive, got {c}")));
        }
        Ok(Medium { c })
    }
}

impl Default for Medium {
    fn default() -> Self {
        Medium { c: 343.0 }
    }
}

/// Whether grid points sit on cell corners or cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridCentering {
    /// `extent / spacing` points per axis, offset by half a spacing.
    #[default]
    Cell,
    /// `extent / spacing + 1` points per axis, including both edges.
    Node,
}

/// Rectangular source grid in an `x`-`z` plane at fixed `y`, positions at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceGrid {
    pub origin: Vec3,
    pub x_extent: f64,
    pub z_extent: f64,
    pub spacing: f64,
    pub y_plane: f64,
    pub centering: GridCentering,
    pub nx: usize,
    pub nz: usize,
    #[serde(skip)]
    points: Vec<Vec3>,
}

fn commensurate_count(extent: f64, spacing: f64, axis: &str) -> Result<usize> {
    let ratio = extent / spacing;
    let n = ratio.round();
    if n < 1.0 || ((ratio - n) / n).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "{axis} extent {extent} m is not an integer multiple of spacing {spacing} m"
        )));
    }
    Ok(n as usize)
}

/// Build a source grid; points are ordered row-major with `x` fastest.
pub fn make_source_grid(
    origin: Vec3,
    x_extent: f64,
    z_extent: f64,
    spacing: f64,
    y_plane: f64,
    centering: GridCentering,
) -> Result<SourceGrid> {
    if !(spacing > 0.0) || !(x_extent > 0.0) || !(z_extent > 0.0) {
        return Err(Error::Config("grid extents and spacing must be positive".into()));
    }
    let cx = commensurate_count(x_extent, spacing, "x")?;
    let cz = commensurate_count(z_extent, spacing, "z")?;
    let (nx, nz) = match centering {
        GridCentering::Cell => (cx, cz),
        GridCentering::Node => (cx + 1, cz + 1),
    };
    let mut grid = SourceGrid {
        origin,
        x_extent,
        z_extent,
        spacing,
        y_plane,
        centering,
        nx,
        nz,
        points: Vec::new(),
    };
    grid.rebuild_points();
    Ok(grid)
}

impl SourceGrid {
    fn offset(&self) -> f64 {
        match self.centering {
            GridCentering::Cell => 0.5 * self.spacing,
            GridCentering::Node => 0.0,
        }
    }

    fn rebuild_points(&mut self) {
        let off = self.offset();
        self.points = (0..self.nz)
            .flat_map(|iz| (0..self.nx).map(move |ix| (ix, iz)))
            .map(|(ix, iz)| {
                [
                    self.origin[0] + off + ix as f64 * self.spacing,
                    self.y_plane,
                    self.origin[2] + off + iz as f64 * self.spacing,
                ]
            })
            .collect();
    }

    /// Restore the cached point list after deserialization.
    pub fn restored(mut self) -> Self {
        self.rebuild_points();
        self
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn index(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn x_coord(&self, ix: usize) -> f64 {
        self.origin[0] + self.offset() + ix as f64 * self.spacing
    }

    pub fn z_coord(&self, iz: usize) -> f64 {
        self.origin[2] + self.offset() + iz as f64 * self.spacing
    }

    /// Inverse of the index map for coordinates lying on grid points.
    pub fn index_of(&self, x: f64, z: f64) -> Option<usize> {
        let fx = (x - self.x_coord(0)) / self.spacing;
        let fz = (z - self.z_coord(0)) / self.spacing;
        let (ix, iz) = (fx.round(), fz.round());
        if (fx - ix).abs() > 1e-6 || (fz - iz).abs() > 1e-6 {
            return None;
        }
        if ix < 0.0 || iz < 0.0 || ix as usize >= self.nx || iz as usize >= self.nz {
            return None;
        }
        Some(self.index(ix as usize, iz as usize))
    }

    /// Grid point closest to `(x, z)`, clamped to the grid.
    pub fn nearest(&self, x: f64, z: f64) -> usize {
        let clamp = |f: f64, n: usize| f.round().clamp(0.0, (n - 1) as f64) as usize;
        let ix = clamp((x - self.x_coord(0)) / self.spacing, self.nx);
        let iz = clamp((z - self.z_coord(0)) / self.spacing, self.nz);
        self.index(ix, iz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicArray {
    pub positions: Vec<Vec3>,
    pub label: String,
}

impl MicArray {
    pub fn new(positions: Vec<Vec3>, label: impl Into<String>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("microphone array needs at least one position".into()));
        }
        for (i, a) in positions.iter().enumerate() {
            for b in &positions[i + 1..] {
                if distance(a, b) < 1e-12 {
                    return Err(Error::Config(format!("duplicate microphone position {a:?}")));
                }
            }
        }
        Ok(MicArray {
            positions,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest distance between any two microphones.
    pub fn aperture(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.max(distance(a, b));
            }
        }
        best
    }

    /// Translate so that the planar layout is centred at `center`.
    pub fn placed_at(mut self, center: Vec3) -> Self {
        for p in &mut self.positions {
            for k in 0..3 {
                p[k] += center[k];
            }
        }
        self
    }

    /// Read a plain-text array file: one `x y z` triple per line, in metres.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            match vals {
                Ok(v) if v.len() == 3 => positions.push([v[0], v[1], v[2]]),
                _ => {
                    return Err(Error::Format {
                        path: path.to_owned(),
                        reason: format!("line {}: expected three numbers", lineno + 1),
                    })
                }
            }
        }
        MicArray::new(positions, path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.positions {
            s.push_str(&format!("{:.12} {:.12} {:.12}\n", p[0], p[1], p[2]));
        }
        s
    }
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Default number of spiral turns per arm.
pub const DEFAULT_SPIRAL_TURNS: f64 = 0.75;

/// Multi-arm Archimedean spiral in the `x`-`z` plane, centred at the origin.
///
/// Arm `a` carries `n_mics / n_arms` microphones at radii `R (j+1)/m` and
/// angles `2π a / n_arms + 2π · turns · (j+1)/m + rotation`, where `R` is half
/// the diameter. Seed 0 gives no extra rotation; other seeds rotate the whole
/// pattern by a seeded angle.
pub fn make_spiral_array(
    n_mics: usize,
    diameter: f64,
    n_arms: usize,
    turns: f64,
    seed: u64,
) -> Result<MicArray> {
    if n_arms == 0 || n_mics == 0 || n_mics % n_arms != 0 {
        return Err(Error::Config(format!(
            "{n_mics} microphones cannot be split evenly over {n_arms} spiral arms"
        )));
    }
    if !(diameter > 0.0) {
        return Err(Error::Config("array diameter must be positive".into()));
    }
    let label = format!("spiral-{n_mics}x{n_arms}-d{diameter}");
    if n_mics == 1 {
        return MicArray::new(vec![[0.0; 3]], label);
    }
    let rotation = if seed == 0 {
        0.0
    } else {
        ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..2.0 * PI)
    };
    let per_arm = n_mics / n_arms;
    let radius = 0.5 * diameter;
    let mut positions = Vec::with_capacity(n_mics);
    for j in 0..per_arm {
        for arm in 0..n_arms {
            let s = (j + 1) as f64 / per_arm as f64;
            let angle = 2.0 * PI * arm as f64 / n_arms as f64 + 2.0 * PI * turns * s + rotation;
            positions.push([radius * s * angle.cos(), 0.0, radius * s * angle.sin()]);
        }
    }
    MicArray::new(positions, label)
}

/// Uniform motion along `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    /// Source speed along `x` in m/s (sign gives the direction).
    pub speed: f64,
    /// Source `x` at `t = 0`.
    pub x0: f64,
    /// Source height `z`; the source moves in the grid plane `y = y_plane`.
    pub z0: f64,
}

impl MotionSpec {
    pub fn validate(&self, medium: &Medium) -> Result<()> {
        if self.speed == 0.0 || !self.speed.is_finite() {
            return Err(Error::Config("source speed must be nonzero".into()));
        }
        if self.speed.abs() >= medium.c {
            return Err(Error::Domain(format!(
                "source speed {} m/s is not subsonic (c = {} m/s)",
                self.speed, medium.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundPlane {
    pub enabled: bool,
    pub z_plane: f64,
}

/// Everything geometric about one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub medium: Medium,
    pub grid: SourceGrid,
    pub array: MicArray,
    pub motion: MotionSpec,
    pub ground: GroundPlane,
}

impl Scenario {
    pub fn new(
        medium: Medium,
        grid: SourceGrid,
        array: MicArray,
        motion: MotionSpec,
        ground: GroundPlane,
    ) -> Result<Self> {
        motion.validate(&medium)?;
        if ground.enabled {
            let lowest_grid = grid.points().iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
            let lowest_mic = array.positions.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
            if ground.z_plane >= lowest_grid.min(lowest_mic).min(motion.z0) {
                return Err(Error::Config(format!(
                    "ground plane z = {} must lie below all sources and microphones",
                    ground.z_plane
                )));
            }
        }
        Ok(Scenario {
            medium,
            grid,
            array,
            motion,
            ground,
        })
    }

    /// Position of the simulated source at `t = 0`.
    pub fn source_position(&self) -> Vec3 {
        [self.motion.x0, self.grid.y_plane, self.motion.z0]
    }

    /// The 2D kernel matching this scenario's ground model.
    pub fn kernel(&self) -> Kernel2D {
        if self.ground.enabled {
            Kernel2D::HalfPlane {
                z_plane: self.ground.z_plane,
            }
        } else {
            Kernel2D::FreeField
        }
    }

    pub fn content_hash(&self) -> String {
        content_hash(self)
    }
}

/// SHA-256 of the canonical JSON encoding, hex encoded (first 16 bytes).
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..16])
}

/// Maximum Doppler range `(f0/(1+v/c), f0/(1-v/c))` at a stationary receiver.
pub fn doppler_band(f0: f64, speed: f64, medium: &Medium) -> Result<(f64, f64)> {
    if !(f0 > 0.0) {
        return Err(Error::Domain(format!("source frequency must be positive, got {f0}")));
    }
    let mach = speed.abs() / medium.c;
    if mach >= 1.0 {
        return Err(Error::Domain(format!(
            "source speed {speed} m/s must stay below c = {} m/s",
            medium.c
        )));
    }
    Ok((f0 / (1.0 + mach), f0 / (1.0 - mach)))
}
