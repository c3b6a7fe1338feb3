//! Source maps and localization metrics: peak, −3 dB beamwidths, spatial
//! periodicity of sidelobes.

use std::collections::VecDeque;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SourceGrid;

pub const DEFAULT_FLOOR_DB: f64 = -20.0;
pub const DEFAULT_THRESHOLD_DB: f64 = 3.0;
/// Stand-in for −∞ dB when interpolating contour crossings next to zeros.
const ZERO_DB: f64 = -400.0;

/// `|a|` on the grid with its peak-normalized dB map (x fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMap {
    pub grid: SourceGrid,
    pub amplitudes: Vec<f64>,
    /// `20 log10(|a| / max|a|)`, clamped to the floor.
    pub db: Vec<f64>,
    pub dynamic_floor_db: f64,
}

pub fn to_source_map(a: &[Complex64], grid: &SourceGrid) -> Result<SourceMap> {
    to_source_map_with_floor(a, grid, DEFAULT_FLOOR_DB)
}

pub fn to_source_map_with_floor(a: &[Complex64], grid: &SourceGrid, floor_db: f64) -> Result<SourceMap> {
    if a.len() != grid.len() {
        return Err(Error::Config(format!(
            "solution has {} coefficients, grid has {} points",
            a.len(),
            grid.len()
        )));
    }
    let amplitudes: Vec<f64> = a.iter().map(|z| z.norm()).collect();
    let max = amplitudes.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::EmptyMap);
    }
    let db = amplitudes
        .iter()
        .map(|&v| (20.0 * (v / max).log10()).max(floor_db))
        .collect();
    Ok(SourceMap {
        grid: grid.clone(),
        amplitudes,
        db,
        dynamic_floor_db: floor_db,
    })
}

impl SourceMap {
    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes.iter().copied().fold(0.0, f64::max)
    }

    /// Unclamped level in dB relative to the peak.
    pub fn raw_db(&self, index: usize) -> f64 {
        let r = self.amplitudes[index] / self.max_amplitude();
        if r > 0.0 {
            (20.0 * r.log10()).max(ZERO_DB)
        } else {
            ZERO_DB
        }
    }

    pub fn coords(&self, index: usize) -> (f64, f64) {
        let (ix, iz) = self.grid.cell(index);
        (self.grid.x_coord(ix), self.grid.z_coord(iz))
    }

    /// `x,z,amplitude,db` rows in grid order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,z,amplitude,db\n");
        for i in 0..self.amplitudes.len() {
            let (x, z) = self.coords(i);
            let _ = writeln!(s, "{x:.6},{z:.6},{:e},{:.6}", self.amplitudes[i], self.db[i]);
        }
        s
    }

    /// gnuplot `nonuniform matrix` text: first row `nx x₀ … x_{nx−1}`, then
    /// one row `z db…` per z level.
    pub fn to_gnuplot_matrix(&self) -> String {
        let g = &self.grid;
        let mut s = format!("{}", g.nx);
        for ix in 0..g.nx {
            let _ = write!(s, " {:.6}", g.x_coord(ix));
        }
        s.push('\n');
        for iz in 0..g.nz {
            let _ = write!(s, "{:.6}", g.z_coord(iz));
            for ix in 0..g.nx {
                let _ = write!(s, " {:.4}", self.db[g.index(ix, iz)]);
            }
            s.push('\n');
        }
        s
    }
}

/// Position of the largest amplitude; ties go to the smallest grid index.
pub fn find_peak(map: &SourceMap) -> (f64, f64) {
    map.coords(peak_index(map))
}

pub fn peak_index(map: &SourceMap) -> usize {
    let mut best = 0;
    for (i, &v) in map.amplitudes.iter().enumerate() {
        if v > map.amplitudes[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beamwidth {
    pub horizontal: f64,
    pub vertical: f64,
    /// The contour region reaches the edge of the grid, so the extents are clipped.
    pub touches_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamwidthReport {
    pub peak_xy: (f64, f64),
    pub true_xy: (f64, f64),
    pub displacement: f64,
    pub horizontal_bw: f64,
    pub vertical_bw: f64,
    pub threshold_db: f64,
    pub touches_boundary: bool,
}

/// Connected region of grid points at or above `level_db` containing `start`.
fn region(map: &SourceMap, start: usize, level_db: f64) -> Vec<bool> {
    let g = &map.grid;
    let mut inside = vec![false; g.len()];
    let mut queue = VecDeque::from([start]);
    inside[start] = true;
    while let Some(i) = queue.pop_front() {
        let (ix, iz) = g.cell(i);
        let mut visit = |jx: usize, jz: usize| {
            let j = g.index(jx, jz);
            if !inside[j] && map.raw_db(j) >= level_db {
                inside[j] = true;
                queue.push_back(j);
            }
        };
        if ix > 0 {
            visit(ix - 1, iz);
        }
        if ix + 1 < g.nx {
            visit(ix + 1, iz);
        }
        if iz > 0 {
            visit(ix, iz - 1);
        }
        if iz + 1 < g.nz {
            visit(ix, iz + 1);
        }
    }
    inside
}

/// Horizontal and vertical extent of the `−threshold_db` contour enclosing
/// `center`, with crossings interpolated linearly in dB between grid points.
pub fn beamwidth(map: &SourceMap, center: (f64, f64), threshold_db: f64) -> Result<Beamwidth> {
    let g = &map.grid;
    let level = -threshold_db.abs();
    let start = g.nearest(center.0, center.1);
    if map.raw_db(start) < level {
        return Err(Error::NoContour {
            level_db: level,
            x: center.0,
            z: center.1,
        });
    }
    let inside = region(map, start, level);
    let (mut xmin, mut xmax, mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut touches = false;
    let crossing = |a: usize, b: usize| {
        // fraction of the way from a (inside) to b (outside) where the level is met
        let (da, db) = (map.raw_db(a), map.raw_db(b));
        ((da - level) / (da - db)).clamp(0.0, 1.0)
    };
    for i in (0..g.len()).filter(|&i| inside[i]) {
        let (ix, iz) = g.cell(i);
        let (x, z) = map.coords(i);
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        zmin = zmin.min(z);
        zmax = zmax.max(z);
        if ix == 0 || iz == 0 || ix + 1 == g.nx || iz + 1 == g.nz {
            touches = true;
        }
        let h = g.spacing;
        if ix > 0 && !inside[g.index(ix - 1, iz)] {
            xmin = xmin.min(x - h * crossing(i, g.index(ix - 1, iz)));
        }
        if ix + 1 < g.nx && !inside[g.index(ix + 1, iz)] {
            xmax = xmax.max(x + h * crossing(i, g.index(ix + 1, iz)));
        }
        if iz > 0 && !inside[g.index(ix, iz - 1)] {
            zmin = zmin.min(z - h * crossing(i, g.index(ix, iz - 1)));
        }
        if iz + 1 < g.nz && !inside[g.index(ix, iz + 1)] {
            zmax = zmax.max(z + h * crossing(i, g.index(ix, iz + 1)));
        }
    }
    Ok(Beamwidth {
        horizontal: xmax - xmin,
        vertical: zmax - zmin,
        touches_boundary: touches,
    })
}

/// Beamwidths around the true position when known (else the peak).
pub fn beamwidth_report(map: &SourceMap, true_xy: Option<(f64, f64)>, threshold_db: f64) -> Result<BeamwidthReport> {
    let peak = find_peak(map);
    let center = true_xy.unwrap_or(peak);
    let bw = beamwidth(map, center, threshold_db)?;
    Ok(BeamwidthReport {
        peak_xy: peak,
        true_xy: center,
        displacement: ((peak.0 - center.0).powi(2) + (peak.1 - center.1).powi(2)).sqrt(),
        horizontal_bw: bw.horizontal,
        vertical_bw: bw.vertical,
        threshold_db: threshold_db.abs(),
        touches_boundary: bw.touches_boundary,
    })
}

/// Total area of grid cells at or above `−threshold_db`.
pub fn area_above(map: &SourceMap, threshold_db: f64) -> f64 {
    let level = -threshold_db.abs();
    let n = (0..map.amplitudes.len()).filter(|&i| map.raw_db(i) >= level).count();
    n as f64 * map.grid.spacing * map.grid.spacing
}

/// Minimum normalized autocorrelation prominence for a period to count.
pub const PERIOD_PROMINENCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

/// Dominant spatial period of the profile through the peak along `axis`.
///
/// The profile is taken in dB above the dynamic floor, so lobes weaker than
/// the floor do not contribute. Returns `None` when no secondary local
/// maximum rises above the floor or the autocorrelation has no local maximum
/// that both exceeds [`PERIOD_PROMINENCE`] and rises that much above the
/// preceding minimum.
pub fn sidelobe_period(map: &SourceMap, axis: Axis) -> Option<f64> {
    let g = &map.grid;
    let (pix, piz) = g.cell(peak_index(map));
    let profile: Vec<f64> = match axis {
        Axis::X => (0..g.nx).map(|ix| map.db[g.index(ix, piz)]).collect(),
        Axis::Z => (0..g.nz).map(|iz| map.db[g.index(pix, iz)]).collect(),
    };
    let floor = map.dynamic_floor_db;
    let n = profile.len();
    let peak_pos = match axis {
        Axis::X => pix,
        Axis::Z => piz,
    };
    let secondary = (0..n).any(|i| {
        i != peak_pos
            && profile[i] > floor
            && (i == 0 || profile[i] > profile[i - 1])
            && (i + 1 == n || profile[i] >= profile[i + 1])
    });
    if !secondary {
        return None;
    }
    let lifted: Vec<f64> = profile.iter().map(|&d| d - floor).collect();
    let mean = lifted.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = lifted.iter().map(|v| v - mean).collect();
    let r0: f64 = dev.iter().map(|v| v * v).sum();
    if r0 == 0.0 {
        return None;
    }
    let r: Vec<f64> = (0..n)
        .map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / r0)
        .collect();
    let mut running_min = r[0];
    for k in 1..n.saturating_sub(1) {
        running_min = running_min.min(r[k]);
        let is_max = r[k] > r[k - 1] && r[k] >= r[k + 1];
        if is_max && r[k] >= PERIOD_PROMINENCE && r[k] - running_min >= PERIOD_PROMINENCE {
            let (a, b, c) = (r[k - 1], r[k], r[k + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            return Some((k as f64 + shift.clamp(-0.5, 0.5)) * g.spacing);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_source_grid, GridCentering};
    use proptest::prelude::*;

    fn grid(n: usize, h: f64) -> SourceGrid {
        make_source_grid([0.0, 0.0, 0.0], n as f64 * h, n as f64 * h, h, 4.0, GridCentering::Cell).unwrap()
    }

    fn from_fn(g: &SourceGrid, f: impl Fn(f64, f64) -> f64) -> Vec<Complex64> {
        g.points().iter().map(|p| Complex64::new(f(p[0], p[2]), 0.0)).collect()
    }

    #[test]
    fn delta_map() {
        let g = grid(10, 0.1);
        let mut a = vec![Complex64::new(0.0, 0.0); g.len()];
        a[37] = Complex64::new(0.0, -2.0);
        let m = to_source_map(&a, &g).unwrap();
        assert_eq!(m.db[37], 0.0);
        assert!(m.db.iter().enumerate().all(|(i, &d)| i == 37 || d == DEFAULT_FLOOR_DB));
        assert_eq!(find_peak(&m), m.coords(37));
        let bw = beamwidth(&m, m.coords(37), 3.0).unwrap();
        assert!(bw.horizontal <= g.spacing && bw.vertical <= g.spacing);
    }

    #[test]
    fn ties_and_empty() {
        let g = grid(4, 0.1);
        let mut a = vec![Complex64::new(0.0, 0.0); g.len()];
        assert!(matches!(to_source_map(&a, &g), Err(Error::EmptyMap)));
        a[3] = Complex64::new(1.0, 0.0);
        a[9] = Complex64::new(0.0, 1.0);
        let m = to_source_map(&a, &g).unwrap();
        assert_eq!((m.db[3], m.db[9]), (0.0, 0.0));
        assert_eq!(peak_index(&m), 3);
    }

    #[test]
    fn center_below_level_is_an_error() {
        let g = grid(10, 0.1);
        let a = from_fn(&g, |x, z| (-((x - 0.25).powi(2) + (z - 0.25).powi(2)) / 0.01).exp());
        let m = to_source_map(&a, &g).unwrap();
        assert!(matches!(beamwidth(&m, (0.85, 0.85), 3.0), Err(Error::NoContour { .. })));
    }

    /// Extent of `{db ≥ level}` sampled on a grid ten times finer.
    fn refined_extent(f: &dyn Fn(f64, f64) -> f64, lo: f64, hi: f64, h: f64, level: f64, zc: f64) -> f64 {
        let fine = h / 10.0;
        let n = ((hi - lo) / fine).round() as usize;
        let peak = f(0.0, 0.0).max(1e-300);
        let xs: Vec<f64> = (0..=n)
            .map(|i| lo + i as f64 * fine)
            .filter(|&x| 20.0 * (f(x, zc) / peak).log10() >= level)
            .collect();
        xs.last().unwrap() - xs.first().unwrap()
    }

    #[test]
    fn gaussian_blob_against_refined_grid() {
        let h = 0.05;
        let g = grid(60, h);
        let (cx, cz) = (g.x_coord(30), g.z_coord(30));
        let sigma = 0.2;
        let f = |x: f64, z: f64| (-((x - cx).powi(2) + (z - cz).powi(2)) / (2.0 * sigma * sigma)).exp();
        let m = to_source_map(&from_fn(&g, f), &g).unwrap();
        let bw = beamwidth(&m, (cx, cz), 3.0).unwrap();
        let centered = |x: f64, z: f64| f(x + cx, z + cz);
        let oracle = refined_extent(&centered, -1.0, 1.0, h, -3.0, 0.0);
        assert!((bw.horizontal - oracle).abs() <= h, "{} vs {oracle}", bw.horizontal);
        assert!((bw.vertical - oracle).abs() <= h);
        // closed form: full width at −3 dB
        let exact = 2.0 * sigma * (2.0 * 3.0 / 20.0 * std::f64::consts::LN_10).sqrt();
        assert!((bw.horizontal - exact).abs() < 0.2 * h);
        assert!(!bw.touches_boundary);
    }

    #[test]
    fn boundary_flag() {
        let g = grid(20, 0.1);
        let f = |x: f64, _z: f64| 1.0 / (1.0 + x);
        let m = to_source_map(&from_fn(&g, f), &g).unwrap();
        let bw = beamwidth(&m, find_peak(&m), 3.0).unwrap();
        assert!(bw.touches_boundary);
        assert!((bw.vertical - (g.z_coord(19) - g.z_coord(0))).abs() < 1e-12);
    }

    #[test]
    fn periodic_profile() {
        let h = 0.2;
        let g = make_source_grid([0.0, 0.0, 0.0], 8.0, 2.0, h, 4.0, GridCentering::Node).unwrap();
        let f = |x: f64, z: f64| {
            let envelope = (-(x - 4.0).powi(2) / 8.0).exp() * (-(z - 1.0).powi(2) / 0.1).exp();
            envelope * (0.2 + (std::f64::consts::PI * (x - 4.0)).cos().powi(2))
        };
        let m = to_source_map(&from_fn(&g, f), &g).unwrap();
        let p = sidelobe_period(&m, Axis::X).unwrap();
        assert!((p - 1.0).abs() < 0.1, "period {p}");
        let single = to_source_map(&from_fn(&g, |x, z| (-((x - 4.0).powi(2) + (z - 1.0).powi(2)) / 0.05).exp()), &g).unwrap();
        assert_eq!(sidelobe_period(&single, Axis::X), None);
    }

    #[test]
    fn exports() {
        let g = grid(3, 0.5);
        let a = from_fn(&g, |x, z| 1.0 + x + z);
        let m = to_source_map(&a, &g).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.lines().last().unwrap().ends_with(",0.000000"));
        let gp = m.to_gnuplot_matrix();
        assert_eq!(gp.lines().count(), 4);
        assert!(gp.starts_with("3 0.250000 0.750000 1.250000"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scale_invariance(vals in prop::collection::vec(0.0f64..1.0, 16), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(vals.iter().any(|&v| v > 1e-3) && (re.abs() + im.abs()) > 1e-3);
            let g = grid(4, 0.1);
            let a: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.5 * v)).collect();
            let c = Complex64::new(re, im);
            let scaled: Vec<Complex64> = a.iter().map(|z| z * c).collect();
            let m1 = to_source_map(&a, &g).unwrap();
            let m2 = to_source_map(&scaled, &g).unwrap();
            for (x, y) in m1.db.iter().zip(&m2.db) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert!(m1.db.iter().all(|&d| d <= 0.0));
            prop_assert!(m1.db.iter().any(|&d| d == 0.0));
        }

        #[test]
        fn beamwidth_monotone_in_threshold(sx in 0.1f64..0.5, sz in 0.1f64..0.5, t1 in 0.5f64..6.0, dt in 0.0f64..6.0) {
            let g = grid(30, 0.1);
            let f = |x: f64, z: f64| (-(x - 1.55).powi(2) / (2.0 * sx * sx) - (z - 1.45).powi(2) / (2.0 * sz * sz)).exp()
                + 0.3 * (-(x - 0.5).powi(2) / 0.02).exp();
            let m = to_source_map(&from_fn(&g, f), &g).unwrap();
            let a = beamwidth(&m, (1.55, 1.45), t1).unwrap();
            let b = beamwidth(&m, (1.55, 1.45), t1 + dt).unwrap();
            prop_assert!(b.horizontal >= a.horizontal - 1e-12);
            prop_assert!(b.vertical >= a.vertical - 1e-12);
        }
    }
}
