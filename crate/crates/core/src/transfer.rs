//! Transfer matrix between source amplitudes on the moving grid and windowed
//! DFT observations at the microphones.
//!
//! One entry is
//!
//! ```text
//! h = 1/(2π|v|) ∫ q(√(ω²/c² − (ω−ω0)²/v²)) ĝ(ω′ − ω) e^{i(ω−ω0)(x_r − x_s)/v} dω
//! ```
//!
//! where `q` is the 2D cross-section field, `ĝ` the window DTFT and `x_s` the
//! source's `x` at `t = 0`. The kernel argument vanishes at the Doppler
//! frequencies `cω0/(c ± v)`, where `q` has a logarithmic singularity; panels
//! always end there. Outside them the kernel is evanescent and the integral is
//! cut where `K0` drops below `abs_tol`. `ĝ` confines the integral to
//! `|ω − ω′| ≤ Δω_g` from [`decay_limits`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadSettings};
use crate::scenario::{content_hash, Scenario};
use crate::specfun::{bessel_k0, Kernel2D, Radii};
use crate::spectral::{decay_limits, BinSelection, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub truncation_db: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_subdivisions: 4000,
            truncation_db: 80.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::Config(format!("rel_tol {} outside (0, 1e-2]", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) || !(self.truncation_db > 0.0) {
            return Err(Error::Config("abs_tol and truncation_db must be positive".into()));
        }
        Ok(())
    }

    fn settings(&self) -> QuadSettings {
        QuadSettings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// `(mic, bin)` origin of one matrix row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowIndex {
    pub mic: usize,
    pub bin: i64,
    pub frequency: f64,
}

/// Hashes identifying everything a transfer matrix depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferKey {
    pub scenario: String,
    pub window: String,
    pub selection: String,
    pub kernel: Kernel2D,
    pub quad: QuadratureSpec,
    pub f0: f64,
}

impl TransferKey {
    pub fn digest(&self) -> String {
        content_hash(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub entries: DMatrix<Complex64>,
    pub rows: Vec<RowIndex>,
    pub key: TransferKey,
}

impl TransferMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }
}

/// Squared axial-section wavenumber `ω²/c² − (ω−ω0)²/v²`.
#[inline]
pub fn k2_squared(omega: f64, omega0: f64, speed: f64, c: f64) -> f64 {
    let w = omega / c;
    let d = (omega - omega0) / speed;
    w * w - d * d
}

/// Frequencies where `k2² = −K²`: for `K = 0` these are the singular
/// Doppler frequencies `cω0/(c ± |v|)`.
fn k2_roots(omega0: f64, speed: f64, c: f64, kappa: f64) -> (f64, f64) {
    let a = 1.0 / (speed * speed) - 1.0 / (c * c);
    let b = -2.0 * omega0 / (speed * speed);
    let cc = omega0 * omega0 / (speed * speed) - kappa * kappa;
    let disc = (b * b - 4.0 * a * cc).max(0.0).sqrt();
    // stable pair of roots
    let q = -0.5 * (b - disc);
    let (r1, r2) = (q / a, cc / q);
    (r1.min(r2), r1.max(r2))
}

/// Argument `x` beyond which `K0(x)/(2π) < tol`.
fn k0_cutoff(tol: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3f64, 800.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bessel_k0(mid) / (2.0 * PI) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Source columns sharing one `(y, z)`, hence one 2D kernel per microphone.
#[derive(Debug, Clone)]
struct ColumnGroup {
    yz: [f64; 2],
    cols: Vec<usize>,
    xs: Vec<f64>,
    /// Uniform `x` step, enabling a phase recurrence.
    dx: Option<f64>,
}

fn column_groups(scenario: &Scenario) -> Vec<ColumnGroup> {
    let mut map: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (l, p) in scenario.grid.points().iter().enumerate() {
        map.entry((p[1].to_bits(), p[2].to_bits())).or_default().push(l);
    }
    let pts = scenario.grid.points();
    let mut groups: Vec<ColumnGroup> = map
        .into_values()
        .map(|cols| {
            let xs: Vec<f64> = cols.iter().map(|&l| pts[l][0]).collect();
            let dx = if xs.len() > 1 {
                let step = xs[1] - xs[0];
                xs.windows(2)
                    .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-12 * step.abs().max(1.0))
                    .then_some(step)
            } else {
                None
            };
            let p = pts[cols[0]];
            ColumnGroup {
                yz: [p[1], p[2]],
                cols,
                xs,
                dx,
            }
        })
        .collect();
    groups.sort_by_key(|g| g.cols[0]);
    groups
}

/// Everything needed to evaluate transfer entries for one scenario and window.
#[derive(Debug, Clone)]
pub struct TransferModel {
    pub scenario: Scenario,
    pub window: Window,
    pub kernel: Kernel2D,
    pub f0: f64,
    pub quad: QuadratureSpec,
    /// Half-width of the window DTFT support, rad/s.
    pub window_halfwidth: f64,
    evanescent_cutoff: f64,
    groups: Vec<ColumnGroup>,
}

impl TransferModel {
    pub fn new(
        scenario: &Scenario,
        window: &Window,
        kernel: Kernel2D,
        f0: f64,
        quad: QuadratureSpec,
    ) -> Result<Self> {
        quad.validate()?;
        scenario.motion.validate(&scenario.medium)?;
        if !(f0 > 0.0) {
            return Err(Error::Config("source frequency must be positive".into()));
        }
        let window_halfwidth = decay_limits(window, quad.truncation_db)?;
        Ok(TransferModel {
            scenario: scenario.clone(),
            window: window.clone(),
            kernel,
            f0,
            quad,
            window_halfwidth,
            evanescent_cutoff: k0_cutoff(quad.abs_tol),
            groups: column_groups(scenario),
        })
    }

    fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }

    /// Singular frequencies `cω0/(c ± |v|)` in rad/s.
    pub fn singular_frequencies(&self) -> (f64, f64) {
        let c = self.scenario.medium.c;
        let v = self.scenario.motion.speed.abs();
        (c * self.omega0() / (c + v), c * self.omega0() / (c - v))
    }

    /// Breakpoints of the integration interval for bin `omega_b` and minimum radius `r_min`.
    fn breakpoints(&self, omega_b: f64, r_min: f64) -> Vec<f64> {
        let c = self.scenario.medium.c;
        let v = self.scenario.motion.speed;
        let (tail_lo, tail_hi) = k2_roots(self.omega0(), v, c, self.evanescent_cutoff / r_min);
        let lo = (omega_b - self.window_halfwidth).max(tail_lo);
        let hi = (omega_b + self.window_halfwidth).min(tail_hi);
        if !(hi > lo) {
            return Vec::new();
        }
        let (s_lo, s_hi) = self.singular_frequencies();
        // Initial panels of at most two DFT bins keep the window oscillation resolved.
        let panel = 2.0 * 2.0 * PI * self.window.bin_spacing();
        let n_panels = (((hi - lo) / panel).ceil() as usize).clamp(1, 512);
        let mut pts: Vec<f64> = (0..=n_panels)
            .map(|i| lo + (hi - lo) * i as f64 / n_panels as f64)
            .collect();
        for s in [s_lo, s_hi, omega_b] {
            if s > lo && s < hi {
                pts.push(s);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        pts
    }

    /// Entries for every column of `group` at microphone `mic` and bin `frequency`.
    fn group_entries(&self, mic: usize, frequency: f64, group: &ColumnGroup) -> Result<Vec<Complex64>> {
        let c = self.scenario.medium.c;
        let v = self.scenario.motion.speed;
        let omega0 = self.omega0();
        let omega_b = 2.0 * PI * frequency;
        let receiver = self.scenario.array.positions[mic];
        let radii: Radii = self.kernel.radii(group.yz, [receiver[1], receiver[2]]);
        radii.validate()?;
        let pts = self.breakpoints(omega_b, radii.min());
        let dim = group.cols.len();
        if pts.is_empty() {
            return Ok(vec![Complex64::new(0.0, 0.0); dim]);
        }
        let prefactor = 1.0 / (2.0 * PI * v.abs());
        let collar = (1e-6 * omega0 / c).powi(2);
        let x_first = group.xs[0];
        let xr = receiver[0];
        let integrand = |omega: f64, out: &mut [Complex64]| {
            let mut k2sq = k2_squared(omega, omega0, v, c);
            if k2sq.abs() < collar {
                k2sq = if k2sq < 0.0 { -collar } else { collar };
            }
            let base = radii.field(k2sq) * self.window.dtft(omega_b - omega) * prefactor;
            let theta = (omega - omega0) / v;
            match group.dx {
                Some(dx) => {
                    let mut ph = base * Complex64::from_polar(1.0, theta * (xr - x_first));
                    let step = Complex64::from_polar(1.0, -theta * dx);
                    for o in out.iter_mut() {
                        *o = ph;
                        ph *= step;
                    }
                }
                None => {
                    for (o, &xs) in out.iter_mut().zip(&group.xs) {
                        *o = base * Complex64::from_polar(1.0, theta * (xr - xs));
                    }
                }
            }
        };
        let outcome = integrate(integrand, &pts, dim, &self.quad.settings())?;
        Ok(outcome.values)
    }

    /// Single entry `h_{nℓ}` at bin frequency `frequency` (Hz).
    pub fn entry(&self, mic: usize, column: usize, frequency: f64) -> Result<Complex64> {
        let p = self.scenario.grid.points()[column];
        let group = ColumnGroup {
            yz: [p[1], p[2]],
            cols: vec![column],
            xs: vec![p[0]],
            dx: None,
        };
        Ok(self.group_entries(mic, frequency, &group)?[0])
    }

    pub fn key(&self, selection: &BinSelection) -> TransferKey {
        TransferKey {
            scenario: self.scenario.content_hash(),
            window: self.window.content_hash(),
            selection: selection.content_hash(),
            kernel: self.kernel,
            quad: self.quad,
            f0: self.f0,
        }
    }

    /// Full matrix for `selection`. `progress(done, total)` is called after
    /// each finished row block.
    pub fn assemble_with_progress(
        &self,
        selection: &BinSelection,
        progress: &(dyn Fn(usize, usize) + Sync),
    ) -> Result<TransferMatrix> {
        if selection.sets.len() != self.scenario.array.len() {
            return Err(Error::Config(format!(
                "selection covers {} microphones, array has {}",
                selection.sets.len(),
                self.scenario.array.len()
            )));
        }
        if ((selection.bin_spacing - self.window.bin_spacing()) / self.window.bin_spacing()).abs() > 1e-12 {
            return Err(Error::Config("selection bin spacing does not match the window".into()));
        }
        let rows: Vec<RowIndex> = selection
            .sets
            .iter()
            .enumerate()
            .flat_map(|(mic, set)| {
                set.iter().map(move |&bin| RowIndex {
                    mic,
                    bin,
                    frequency: bin as f64 * selection.bin_spacing,
                })
            })
            .collect();
        let n_cols = self.scenario.grid.len();
        let total = rows.len();
        let done = std::sync::atomic::AtomicUsize::new(0);
        let blocks: Vec<Vec<(usize, Complex64)>> = rows
            .par_iter()
            .enumerate()
            .map(|(r, row)| -> Result<Vec<(usize, Complex64)>> {
                let mut out = Vec::with_capacity(n_cols);
                for g in &self.groups {
                    let vals = self.group_entries(row.mic, row.frequency, g).map_err(|e| Error::Entry {
                        row: r,
                        col: g.cols[0],
                        source: Box::new(e),
                    })?;
                    out.extend(g.cols.iter().copied().zip(vals));
                }
                let d = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(d, total);
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut entries = DMatrix::from_element(total, n_cols, Complex64::new(0.0, 0.0));
        for (r, block) in blocks.into_iter().enumerate() {
            for (col, v) in block {
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Entry {
                        row: r,
                        col,
                        source: Box::new(Error::Numerical("non-finite entry".into())),
                    });
                }
                entries[(r, col)] = v;
            }
        }
        Ok(TransferMatrix {
            entries,
            rows,
            key: self.key(selection),
        })
    }

    pub fn assemble(&self, selection: &BinSelection) -> Result<TransferMatrix> {
        self.assemble_with_progress(selection, &|_, _| {})
    }

    /// Assemble through an on-disk cache keyed by the content hashes.
    ///
    /// A cached file whose header does not match the key is rebuilt.
    pub fn assemble_cached(&self, selection: &BinSelection, cache_dir: &Path) -> Result<TransferMatrix> {
        let key = self.key(selection);
        let path = cache_path(cache_dir, &key);
        if path.exists() {
            match crate::io::read_transfer(&path, Some(&key)) {
                Ok(m) => return Ok(m),
                Err(e) => log::warn!("rebuilding transfer cache {}: {e}", path.display()),
            }
        }
        let m = self.assemble(selection)?;
        std::fs::create_dir_all(cache_dir)?;
        crate::io::write_transfer_atomic(&path, &m)?;
        Ok(m)
    }
}

pub fn cache_path(cache_dir: &Path, key: &TransferKey) -> PathBuf {
    cache_dir.join(format!("transfer-{}.htm", key.digest()))
}

/// One entry of the transfer matrix; see [`TransferModel::entry`].
pub fn transfer_entry(
    mic: usize,
    column: usize,
    frequency: f64,
    scenario: &Scenario,
    window: &Window,
    kernel: Kernel2D,
    f0: f64,
    quad: QuadratureSpec,
) -> Result<Complex64> {
    TransferModel::new(scenario, window, kernel, f0, quad)?.entry(mic, column, frequency)
}

/// Infinitely long window limit: the window transform becomes `2π δ(ω − ω′)`,
/// leaving `(1/|v|) q(k2(ω′)) e^{i(ω′−ω0)(x_r − x_s)/v}`.
///
/// A sampled window's DTFT integrates to `2π fs g(0)` instead, so a
/// long-window [`transfer_entry`] approaches this value times
/// [`Window::limit_scale`].
pub fn limit_transfer_entry(
    mic: usize,
    column: usize,
    frequency: f64,
    scenario: &Scenario,
    kernel: Kernel2D,
    f0: f64,
) -> Result<Complex64> {
    let c = scenario.medium.c;
    let v = scenario.motion.speed;
    let omega0 = 2.0 * PI * f0;
    let omega = 2.0 * PI * frequency;
    let k2sq = k2_squared(omega, omega0, v, c);
    if !(k2sq > 0.0) {
        return Err(Error::Domain(format!(
            "{frequency} Hz is not strictly inside the Doppler band of {f0} Hz at {v} m/s"
        )));
    }
    let receiver = scenario.array.positions[mic];
    let source = scenario.grid.points()[column];
    let radii = kernel.radii([source[1], source[2]], [receiver[1], receiver[2]]);
    radii.validate()?;
    let phase = (omega - omega0) * (receiver[0] - source[0]) / v;
    Ok(radii.field(k2sq) * Complex64::from_polar(1.0 / v.abs(), phase))
}

/// Spatial period `|v| / Δf` of regular-bin sidelobes.
pub fn predicted_period(delta_f: f64, speed: f64) -> f64 {
    speed.abs() / delta_f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        make_source_grid, GridCentering, GroundPlane, Medium, MicArray, MotionSpec,
    };
    use crate::sim::{record_array, SignalSpec};
    use crate::spectral::{windowed_dft, WindowKind};

    fn scenario(mics: Vec<[f64; 3]>, speed: f64, x0: f64) -> Scenario {
        let grid = make_source_grid([0.0; 3], 4.0, 4.0, 0.5, 0.0, GridCentering::Node).unwrap();
        Scenario::new(
            Medium::default(),
            grid,
            MicArray::new(mics, "t").unwrap(),
            MotionSpec {
                speed,
                x0,
                z0: 2.0,
            },
            GroundPlane::default(),
        )
        .unwrap()
    }

    #[test]
    fn singular_roots() {
        let (lo, hi) = k2_roots(2.0 * PI * 1000.0, 50.0, 343.0, 0.0);
        assert!((lo / (2.0 * PI) - 1000.0 / (1.0 + 50.0 / 343.0)).abs() < 1e-9);
        assert!((hi / (2.0 * PI) - 1000.0 / (1.0 - 50.0 / 343.0)).abs() < 1e-9);
        assert!(k2_squared(lo, 2.0 * PI * 1000.0, 50.0, 343.0).abs() < 1e-9);
    }

    #[test]
    fn periods() {
        assert!((predicted_period(50.0, 50.0) - 1.0).abs() < 1e-15);
        assert!((predicted_period(40.0, 50.0) - 1.25).abs() < 1e-15);
        assert!((predicted_period(40.0, 100.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn forward_consistency_short_window() {
        let mics = vec![[2.3, 4.0, 2.2], [1.1, 4.0, 1.6]];
        let s = scenario(mics, 50.0, 2.0);
        let col = s.grid.index_of(2.0, 2.0).unwrap();
        let fs = 10_000.0;
        let w = Window::centered(WindowKind::Hanning, 0.05, fs, 0.0).unwrap();
        let signal = SignalSpec::new(1000.0, Complex64::new(1.0, 0.0)).unwrap();
        let rec = record_array(&s, &signal, fs, (-0.03, 0.03)).unwrap();
        let model =
            TransferModel::new(&s, &w, Kernel2D::FreeField, 1000.0, QuadratureSpec::default()).unwrap();
        for mic in 0..2 {
            for bin in [46i64, 50, 53, 56] {
                let measured = windowed_dft(&rec.channels[mic], rec.first_index, &w, bin).unwrap();
                let modeled = model.entry(mic, col, w.bin_frequency(bin)).unwrap();
                let rel = (measured - modeled).norm() / measured.norm();
                assert!(rel < 1e-2, "mic {mic} bin {bin}: rel {rel}");
            }
        }
    }

    #[test]
    fn motion_reversal_symmetry() {
        // h(x_r - x_s, v) = h(-(x_r - x_s), -v) with the same window and bin
        let w = Window::centered(WindowKind::Hanning, 0.05, 10_000.0, 0.0).unwrap();
        let fwd = scenario(vec![[2.7, 4.0, 2.0]], 50.0, 2.0);
        let rev = scenario(vec![[1.3, 4.0, 2.0]], -50.0, 2.0);
        let col = fwd.grid.index_of(2.0, 2.0).unwrap();
        let q = QuadratureSpec::default();
        for f in [940.0, 1000.0, 1100.0] {
            let a = transfer_entry(0, col, f, &fwd, &w, Kernel2D::FreeField, 1000.0, q).unwrap();
            let b = transfer_entry(0, col, f, &rev, &w, Kernel2D::FreeField, 1000.0, q).unwrap();
            assert!((a - b).norm() < 1e-6 * a.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn batched_equals_single() {
        let s = scenario(vec![[2.3, 4.0, 2.2]], 50.0, 2.0);
        let w = Window::centered(WindowKind::Hanning, 0.05, 10_000.0, 0.0).unwrap();
        let model =
            TransferModel::new(&s, &w, Kernel2D::FreeField, 1000.0, QuadratureSpec::default()).unwrap();
        let sel = crate::spectral::select_bins(
            crate::spectral::BinStrategy::Regular,
            (920.0, 1120.0),
            &w,
            1000.0,
            3,
            1,
            0,
        )
        .unwrap();
        let m = model.assemble(&sel).unwrap();
        assert_eq!(m.shape(), (3, s.grid.len()));
        for &col in &[0usize, 17, 40, 80] {
            let single = model.entry(0, col, m.rows[1].frequency).unwrap();
            let batched = m.entries[(1, col)];
            assert!((single - batched).norm() < 1e-5 * single.norm().max(1e-3));
        }
    }

    #[test]
    fn limit_entry_properties() {
        let s = scenario(vec![[2.3, 4.0, 2.2]], 50.0, 2.0);
        let a = limit_transfer_entry(0, 0, 1000.0, &s, Kernel2D::FreeField, 1000.0).unwrap();
        let b = limit_transfer_entry(0, 5, 1000.0, &s, Kernel2D::FreeField, 1000.0).unwrap();
        assert!((a - b).norm() < 1e-15, "same row differs only in x");
        let c = limit_transfer_entry(0, 3, 1050.0, &s, Kernel2D::FreeField, 1000.0).unwrap();
        let d = limit_transfer_entry(0, 4, 1050.0, &s, Kernel2D::FreeField, 1000.0).unwrap();
        assert!((c.norm() - d.norm()).abs() < 1e-15 * c.norm());
        // x step 0.5 m at slope -2π rad/m is a phase of -π
        assert!((d / c + 1.0).norm() < 1e-9, "{}", d / c);
        assert!(limit_transfer_entry(0, 0, 1170.65, &s, Kernel2D::FreeField, 1000.0).is_err());
    }
}
