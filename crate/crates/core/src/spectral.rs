//! Analysis windows, their DTFTs, windowed DFTs and observation-bin selection.
//!
//! Sample `k` of a window sits at absolute time `(first_index + k) / fs`, and
//! all DFT phases use absolute times, so model and measurement share one time
//! origin regardless of where the window is placed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{content_hash, doppler_band, Medium};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// `g[k] = ½(1 − cos(2π(k+1)/(N+1)))`, strictly positive on its support.
    Hanning,
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub kind: WindowKind,
    /// Nominal duration `T_g` in seconds.
    pub duration: f64,
    pub fs: f64,
    pub n_samples: usize,
    /// Sample index (in units of `1/fs` from `t = 0`) of the first sample.
    pub first_index: i64,
    #[serde(skip)]
    samples: Vec<f64>,
}

impl Window {
    /// Window of `round(duration·fs)` samples whose midpoint is as close to
    /// `center` as the sampling grid allows.
    pub fn centered(kind: WindowKind, duration: f64, fs: f64, center: f64) -> Result<Window> {
        if !(fs > 0.0) || !(duration > 0.0) {
            return Err(Error::Config("window duration and sampling rate must be positive".into()));
        }
        let n = (duration * fs).round();
        if n < 2.0 {
            return Err(Error::Config(format!("window of {duration} s holds fewer than 2 samples")));
        }
        let n_samples = n as usize;
        let first_index = (center * fs - 0.5 * (n - 1.0)).round() as i64;
        let mut w = Window {
            kind,
            duration,
            fs,
            n_samples,
            first_index,
            samples: Vec::new(),
        };
        w.rebuild_samples();
        Ok(w)
    }

    fn rebuild_samples(&mut self) {
        let n = self.n_samples;
        self.samples = match self.kind {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hanning => (0..n)
                .map(|k| 0.5 * (1.0 - (2.0 * PI * (k + 1) as f64 / (n + 1) as f64).cos()))
                .collect(),
        };
    }

    /// Restore cached samples after deserialization.
    pub fn restored(mut self) -> Self {
        self.rebuild_samples();
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn first_time(&self) -> f64 {
        self.first_index as f64 / self.fs
    }

    /// Midpoint of the sampled support.
    pub fn center_time(&self) -> f64 {
        (self.first_index as f64 + 0.5 * (self.n_samples as f64 - 1.0)) / self.fs
    }

    /// Exclusive end of the support, `(first_index + N) / fs`.
    pub fn end_time(&self) -> f64 {
        (self.first_index + self.n_samples as i64) as f64 / self.fs
    }

    /// DFT bin spacing `fs / N` (equal to `1/T_g` for integer `T_g fs`).
    pub fn bin_spacing(&self) -> f64 {
        self.fs / self.n_samples as f64
    }

    pub fn bin_frequency(&self, m: i64) -> f64 {
        m as f64 * self.bin_spacing()
    }

    /// Bin index of an exact bin frequency.
    pub fn bin_index(&self, f: f64) -> Option<i64> {
        let x = f / self.bin_spacing();
        let m = x.round();
        ((x - m).abs() <= 1e-9 * m.abs().max(1.0)).then_some(m as i64)
    }

    /// `Σ g[k] e^{iω t_k}` in closed form.
    pub fn dtft(&self, omega: f64) -> Complex64 {
        let theta = omega / self.fs;
        let n = self.n_samples;
        let real = match self.kind {
            WindowKind::Rectangular => dirichlet_ratio(0.5 * theta, n),
            WindowKind::Hanning => {
                // The three shifted kernels pick up phases e^{±iα(N+1)/2} = -1,
                // which turns the combination real after removing the midpoint phase.
                let alpha = 2.0 * PI / (n + 1) as f64;
                0.5 * dirichlet_ratio(0.5 * theta, n)
                    + 0.25 * dirichlet_ratio(0.5 * (theta + alpha), n)
                    + 0.25 * dirichlet_ratio(0.5 * (theta - alpha), n)
            }
        };
        Complex64::from_polar(1.0, omega * self.center_time()) * real
    }

    /// Magnitude of the DTFT; it is even in `ω` for real windows.
    pub fn dtft_abs(&self, omega: f64) -> f64 {
        self.dtft(omega).norm()
    }

    pub fn content_hash(&self) -> String {
        content_hash(self)
    }

    /// `fs · g(t = 0)`: the weight of the sampled window's DTFT over one
    /// period divided by `2π`, zero when `t = 0` is outside the support.
    pub fn limit_scale(&self) -> f64 {
        let k = -self.first_index;
        if k < 0 || k >= self.n_samples as i64 {
            return 0.0;
        }
        self.fs * self.samples[k as usize]
    }
}

/// `sin(Nφ)/sin(φ)` with the removable singularities at `φ = jπ` handled exactly.
fn dirichlet_ratio(phi: f64, n: usize) -> f64 {
    let j = (phi / PI).round();
    let reduced = phi - j * PI;
    let sign = if (j as i64 * (n as i64 - 1)).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    if reduced == 0.0 {
        return sign * n as f64;
    }
    sign * (n as f64 * reduced).sin() / reduced.sin()
}

/// DTFT of a window, see [`Window::dtft`].
pub fn window_dtft(window: &Window, omega: f64) -> Complex64 {
    window.dtft(omega)
}

/// `Σ p[t_k] g[t_k] e^{i 2π f′ t_k}` over the window support.
///
/// `first_index` is the sample index of `channel[0]` relative to `t = 0`.
pub fn windowed_dft(
    channel: &[Complex64],
    first_index: i64,
    window: &Window,
    bin: i64,
) -> Result<Complex64> {
    let offset = window.first_index - first_index;
    let end = offset + window.n_samples as i64;
    if offset < 0 || end > channel.len() as i64 {
        let fs = window.fs;
        let have = (first_index as f64 / fs, (first_index + channel.len() as i64) as f64 / fs);
        return Err(Error::WindowSpan {
            start: window.first_time(),
            end: window.end_time(),
            missing: format!("recording covers only [{}, {}) s", have.0, have.1),
        });
    }
    let n = window.n_samples as i64;
    let m = bin.rem_euclid(n);
    // e^{i 2π m k / N} is periodic in k, so reduce the absolute index mod N.
    let step = 2.0 * PI * m as f64 / n as f64;
    let start = window.first_index.rem_euclid(n);
    let mut acc = Complex64::new(0.0, 0.0);
    let data = &channel[offset as usize..end as usize];
    for (k, (p, g)) in data.iter().zip(window.samples()).enumerate() {
        let idx = (start + k as i64) % n;
        acc += p * Complex64::from_polar(*g, step * idx as f64);
    }
    Ok(acc)
}

/// Half-width `Δω` beyond which `|ĝ|` stays more than `threshold_db` below `|ĝ(0)|`.
///
/// Scans outward on a grid of `Δf_DFT / 50` up to `fs/2`, then bisects the
/// last crossing. Fails when the sidelobes near `fs/2` still exceed the level.
pub fn decay_limits(window: &Window, threshold_db: f64) -> Result<f64> {
    if threshold_db <= 0.0 {
        return Ok(0.0);
    }
    let peak = window.dtft_abs(0.0);
    let level = peak * 10f64.powf(-threshold_db / 20.0);
    let step = window.bin_spacing() / 50.0;
    let n_steps = (0.5 * window.fs / step).floor() as usize;
    let mag = |f: f64| window.dtft_abs(2.0 * PI * f);
    let mut last_above = 0usize;
    let mut tail_max = 0.0f64;
    for i in 1..=n_steps {
        let m = mag(i as f64 * step);
        if m >= level {
            last_above = i;
        }
        if i * 10 >= n_steps * 9 {
            tail_max = tail_max.max(m);
        }
    }
    // Crossings in the last tenth of the half period mean the sidelobe floor
    // never drops below the threshold.
    if last_above * 10 >= n_steps * 9 {
        return Err(Error::DecayLimit {
            threshold_db,
            reachable_db: -20.0 * (tail_max / peak).log10(),
        });
    }
    let (mut lo, mut hi) = (last_above as f64 * step, (last_above + 1) as f64 * step);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mag(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(2.0 * PI * hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinStrategy {
    /// The bin nearest `f0`, shared by all microphones.
    Single,
    /// `M` bins nearest to equal spacing across the band, shared by all microphones.
    Regular,
    /// `M` bins per microphone drawn without replacement.
    Random,
}

impl std::str::FromStr for BinStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(BinStrategy::Single),
            "regular" => Ok(BinStrategy::Regular),
            "random" => Ok(BinStrategy::Random),
            other => Err(Error::Config(format!("unknown bin strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for BinStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BinStrategy::Single => "single",
            BinStrategy::Regular => "regular",
            BinStrategy::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSelection {
    pub strategy: BinStrategy,
    pub m: usize,
    pub band: (f64, f64),
    pub bin_spacing: f64,
    pub seed: u64,
    /// Per-microphone bin indices, ascending; frequency is `index · bin_spacing`.
    pub sets: Vec<Vec<i64>>,
}

impl BinSelection {
    pub fn frequencies(&self, mic: usize) -> Vec<f64> {
        self.sets[mic].iter().map(|&m| m as f64 * self.bin_spacing).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn content_hash(&self) -> String {
        content_hash(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable selection")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bin selection: {e}")))
    }
}

/// Default analysis band `[0.92 f0, 1.12 f0]`, clipped to the Doppler band.
pub fn analysis_band(f0: f64, speed: f64, medium: &Medium) -> Result<(f64, f64)> {
    let (lo, hi) = doppler_band(f0, speed, medium)?;
    Ok(((0.92 * f0).max(lo), (1.12 * f0).min(hi)))
}

/// Bin indices `m` with `band.0 ≤ m Δf ≤ band.1`.
pub fn available_bins(band: (f64, f64), bin_spacing: f64) -> Vec<i64> {
    let slack = 1e-9;
    let first = (band.0 / bin_spacing - slack).ceil() as i64;
    let last = (band.1 / bin_spacing + slack).floor() as i64;
    (first..=last).collect()
}

pub fn select_bins(
    strategy: BinStrategy,
    band: (f64, f64),
    window: &Window,
    f0: f64,
    m: usize,
    n_mics: usize,
    seed: u64,
) -> Result<BinSelection> {
    if !(band.0 < band.1) {
        return Err(Error::Config(format!("empty band [{}, {}] Hz", band.0, band.1)));
    }
    let df = window.bin_spacing();
    let avail = available_bins(band, df);
    let too_many = |requested| Error::Bins {
        requested,
        available: avail.len(),
        f_minus: band.0,
        f_plus: band.1,
    };
    if m == 0 || m > avail.len() {
        return Err(too_many(m));
    }
    let sets = match strategy {
        BinStrategy::Single => {
            if m != 1 {
                return Err(Error::Config("the single strategy uses exactly one bin".into()));
            }
            let nearest = (f0 / df).round() as i64;
            let bin = nearest.clamp(avail[0], *avail.last().unwrap());
            vec![vec![bin]; n_mics]
        }
        BinStrategy::Regular => {
            let first = avail[0] as f64;
            let span = (avail.len() - 1) as f64;
            let set: Vec<i64> = if m == 1 {
                vec![(f0 / df).round().clamp(first, first + span) as i64]
            } else {
                (0..m)
                    .map(|j| (first + span * j as f64 / (m - 1) as f64).round() as i64)
                    .collect()
            };
            vec![set; n_mics]
        }
        BinStrategy::Random => (0..n_mics)
            .map(|mic| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(mic as u64);
                let mut set: Vec<i64> =
                    sample(&mut rng, avail.len(), m).into_iter().map(|i| avail[i]).collect();
                set.sort_unstable();
                set
            })
            .collect(),
    };
    Ok(BinSelection {
        strategy,
        m,
        band,
        bin_spacing: df,
        seed,
        sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::oracle::dtft_bruteforce;
    use proptest::prelude::*;

    fn hann(ms: f64) -> Window {
        Window::centered(WindowKind::Hanning, ms * 1e-3, 10_000.0, 0.0).unwrap()
    }

    #[test]
    fn window_geometry() {
        let w = hann(50.0);
        assert_eq!(w.n_samples, 500);
        assert_eq!(w.first_index, -250);
        assert!((w.bin_spacing() - 20.0).abs() < 1e-12);
        assert!(w.samples().iter().all(|&g| g > 0.0 && g <= 1.0));
    }

    #[test]
    fn dtft_at_zero() {
        let r = Window::centered(WindowKind::Rectangular, 0.05, 10_000.0, 0.0).unwrap();
        assert!((r.dtft(0.0) - Complex64::new(500.0, 0.0)).norm() < 1e-12);
        let h = hann(50.0);
        let brute = dtft_bruteforce(h.samples(), h.first_time(), h.fs, 0.0);
        assert!((h.dtft(0.0) - brute).norm() < 1e-12 * brute.norm());
        assert!((h.dtft(0.0).re - 250.5).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_zeros() {
        let r = Window::centered(WindowKind::Rectangular, 0.05, 10_000.0, 0.0).unwrap();
        for k in [1i64, 2, 7, -3, 499] {
            let v = r.dtft(2.0 * PI * r.bin_spacing() * k as f64);
            assert!(v.norm() < 1e-9 * 500.0, "k={k}: {v}");
        }
    }

    #[test]
    fn closed_form_matches_bruteforce() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [WindowKind::Hanning, WindowKind::Rectangular] {
            for &(dur, center) in &[(0.05, 0.0), (0.0503, 0.0123), (0.25, -0.1)] {
                let w = Window::centered(kind, dur, 10_000.0, center).unwrap();
                let peak = w.dtft_abs(0.0);
                for _ in 0..100 {
                    let omega = rng.gen_range(-2.0 * PI * 20_000.0..2.0 * PI * 20_000.0);
                    let brute = dtft_bruteforce(w.samples(), w.first_time(), w.fs, omega);
                    let err = (w.dtft(omega) - brute).norm();
                    assert!(err < 1e-12 * peak, "{kind:?} ω={omega}: err {err}");
                }
            }
        }
    }

    #[test]
    fn pure_tone_bins() {
        let fs = 10_000.0;
        let a = Complex64::new(0.3, -0.4);
        let tone: Vec<Complex64> = (-2000i64..2000)
            .map(|k| a * Complex64::from_polar(1.0, -2.0 * PI * 1000.0 * k as f64 / fs))
            .collect();
        let r = Window::centered(WindowKind::Rectangular, 0.05, fs, 0.0).unwrap();
        let v = windowed_dft(&tone, -2000, &r, 50).unwrap();
        assert!((v.norm() - 500.0 * a.norm()).abs() < 1e-9);
        let h = hann(50.0);
        let n = h.n_samples as f64;
        let c = windowed_dft(&tone, -2000, &h, 50).unwrap().norm();
        let side = windowed_dft(&tone, -2000, &h, 51).unwrap().norm();
        // endpoint convention g over N+1 periods: sums are (N+1)/2 and (N+1)/4
        assert!((c - 0.5 * (n + 1.0) * a.norm()).abs() < 1e-9, "{c}");
        let expected_side = h.dtft_abs(2.0 * PI * 20.0) * a.norm();
        assert!((side - expected_side).abs() < 1e-9, "{side} vs {expected_side}");
        assert!((side / (n * a.norm()) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn window_span_error() {
        let data = vec![Complex64::new(1.0, 0.0); 100];
        let h = hann(50.0);
        assert!(matches!(windowed_dft(&data, -50, &h, 50), Err(Error::WindowSpan { .. })));
    }

    #[test]
    fn parseval() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = Window::centered(WindowKind::Hanning, 0.0128, 10_000.0, 0.0031).unwrap();
        let data: Vec<Complex64> = (0..400)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let first = h.first_index - 50;
        let n = h.n_samples as i64;
        let spectral: f64 =
            (0..n).map(|m| windowed_dft(&data, first, &h, m).unwrap().norm_sqr()).sum();
        let temporal: f64 = h
            .samples()
            .iter()
            .enumerate()
            .map(|(k, g)| (data[50 + k] * g).norm_sqr())
            .sum();
        assert!((spectral - n as f64 * temporal).abs() < 1e-9 * spectral);
    }

    #[test]
    fn decay_limit_scan() {
        let long = hann(1000.0);
        let d_long = decay_limits(&long, 80.0).unwrap();
        let f = d_long / (2.0 * PI);
        assert!(f > 5.0 && f < 100.0, "limit {f} Hz");
        let peak = long.dtft_abs(0.0);
        let step = long.bin_spacing() / 37.0;
        let mut x = f + 1e-9;
        while x < 5000.0 {
            assert!(long.dtft_abs(2.0 * PI * x) < peak * 1e-4);
            x += step;
        }
        let d_short = decay_limits(&hann(50.0), 80.0).unwrap();
        let ratio = d_short / d_long;
        assert!((ratio - 20.0).abs() < 2.0, "ratio {ratio}");
        assert_eq!(decay_limits(&long, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rectangular_decay_limit_errors() {
        let r = Window::centered(WindowKind::Rectangular, 0.05, 10_000.0, 0.0).unwrap();
        match decay_limits(&r, 80.0) {
            Err(Error::DecayLimit { reachable_db, .. }) => assert!(reachable_db < 80.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bin_counts() {
        assert_eq!(available_bins((920.0, 1120.0), 20.0).len(), 11);
        assert_eq!(available_bins((920.0, 1120.0), 1.0).len(), 201);
        let m = Medium::default();
        let band = analysis_band(250.0, 50.0, &m).unwrap();
        let w = hann(50.0);
        match select_bins(BinStrategy::Regular, band, &w, 250.0, 5, 4, 0) {
            Err(Error::Bins { available, .. }) => assert_eq!(available, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn analysis_band_clipping() {
        let m = Medium::default();
        assert_eq!(analysis_band(1000.0, 50.0, &m).unwrap(), (920.0, 1120.0));
        let (lo, hi) = analysis_band(1000.0, 10.0, &m).unwrap();
        assert!((lo - 1000.0 / (1.0 + 10.0 / 343.0)).abs() < 1e-9);
        assert!((hi - 1000.0 / (1.0 - 10.0 / 343.0)).abs() < 1e-9);
    }

    #[test]
    fn single_and_regular() {
        let w = hann(50.0);
        let s = select_bins(BinStrategy::Single, (920.0, 1120.0), &w, 1000.0, 1, 3, 0).unwrap();
        assert!(s.sets.iter().all(|set| set == &vec![50]));
        assert_eq!(s.frequencies(2), vec![1000.0]);
        let r = select_bins(BinStrategy::Regular, (920.0, 1120.0), &w, 1000.0, 5, 2, 0).unwrap();
        assert_eq!(r.frequencies(0), vec![920.0, 980.0, 1020.0, 1080.0, 1120.0]);
        let w1 = hann(1000.0);
        let r = select_bins(BinStrategy::Regular, (920.0, 1120.0), &w1, 1000.0, 5, 2, 0).unwrap();
        assert_eq!(r.frequencies(1), vec![920.0, 970.0, 1020.0, 1070.0, 1120.0]);
    }

    #[test]
    fn selection_json_roundtrip() {
        let w = hann(1000.0);
        let s = select_bins(BinStrategy::Random, (920.0, 1120.0), &w, 1000.0, 5, 6, 42).unwrap();
        let back = BinSelection::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    proptest! {
        #[test]
        fn random_selection_invariants(seed in any::<u64>(), m in 1usize..12, n in 1usize..8) {
            let w = hann(1000.0);
            let a = select_bins(BinStrategy::Random, (920.0, 1120.0), &w, 1000.0, m, n, seed).unwrap();
            let b = select_bins(BinStrategy::Random, (920.0, 1120.0), &w, 1000.0, m, n, seed).unwrap();
            prop_assert_eq!(&a, &b);
            for set in &a.sets {
                prop_assert_eq!(set.len(), m);
                for pair in set.windows(2) {
                    prop_assert!(pair[0] < pair[1]);
                }
                for &bin in set {
                    let f = w.bin_frequency(bin);
                    prop_assert!((920.0..=1120.0).contains(&f));
                    prop_assert_eq!(w.bin_index(f), Some(bin));
                }
            }
        }

        #[test]
        fn random_seeds_differ(seed in 0u64..1_000_000) {
            let w = hann(1000.0);
            let a = select_bins(BinStrategy::Random, (920.0, 1120.0), &w, 1000.0, 5, 4, seed).unwrap();
            let b = select_bins(BinStrategy::Random, (920.0, 1120.0), &w, 1000.0, 5, 4, seed + 1).unwrap();
            prop_assert_ne!(a.sets, b.sets);
        }
    }
}
