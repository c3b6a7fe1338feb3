//! Time-domain simulation of a uniformly moving monopole at a microphone array.
//!
//! The pressure at a receiver is the convected-monopole solution
//! `p(t) = s(τ) / (4π R (1 − M_r))`, where `τ` is the emission time,
//! `R = c (t − τ)` the emission distance and `M_r` the Mach number of the source
//! velocity projected on the source→receiver direction at emission.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{distance, doppler_band, Medium, Scenario, Vec3};

/// Single-frequency source `s(t) = a e^{−iω0 t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub f0: f64,
    pub amplitude: Complex64,
}

impl SignalSpec {
    pub fn new(f0: f64, amplitude: Complex64) -> Result<Self> {
        if !(f0 > 0.0) {
            return Err(Error::Config(format!("source frequency must be positive, got {f0}")));
        }
        Ok(SignalSpec { f0, amplitude })
    }

    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub scenario_hash: String,
    pub signal: Option<SignalSpec>,
    /// One line per processing step (noise injections with their seeds and filters).
    pub history: Vec<String>,
}

/// Complex samples on the common grid `t_k = (first_index + k) / fs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub fs: f64,
    pub first_index: i64,
    pub channels: Vec<Vec<Complex64>>,
    pub meta: RecordingMeta,
}

impl Recording {
    pub fn t_start(&self) -> f64 {
        self.first_index as f64 / self.fs
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples() as i64)
            .map(|k| (self.first_index + k) as f64 / self.fs)
            .collect()
    }

    pub fn peak(&self, channel: usize) -> f64 {
        self.channels[channel].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn energy(&self, channel: usize) -> f64 {
        self.channels[channel].iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Stationary noise source radiating band-limited Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub source_position: Vec3,
    pub band: (f64, f64),
    pub seed: u64,
}

/// Default noise passband `[0.8 f−, 1.2 f+]` of an analysis band.
pub fn default_noise_band(analysis_band: (f64, f64)) -> (f64, f64) {
    (0.8 * analysis_band.0, 1.2 * analysis_band.1)
}

/// Relative width of the cosine taper on each side of the noise passband.
pub const NOISE_TAPER: f64 = 0.1;

/// Emission time `τ` for a receiver at time `t`.
///
/// Closed-form root of `c²(t−τ)² = (X + v(t−τ))² + ρ²` with
/// `X = x_r − x0 − v t`; the subsonic case has exactly one causal root.
pub fn retarded_time(
    receiver: Vec3,
    source_at_zero: Vec3,
    speed: f64,
    medium: &Medium,
    t: f64,
) -> Result<f64> {
    Ok(t - emission_delay(receiver, source_at_zero, speed, medium.c, t)?)
}

/// `u = t − τ`, the propagation delay.
fn emission_delay(receiver: Vec3, source_at_zero: Vec3, v: f64, c: f64, t: f64) -> Result<f64> {
    if v.abs() >= c {
        return Err(Error::Domain(format!("source speed {v} m/s is not subsonic")));
    }
    let x = receiver[0] - source_at_zero[0] - v * t;
    let rho2 = (receiver[1] - source_at_zero[1]).powi(2) + (receiver[2] - source_at_zero[2]).powi(2);
    let a = c * c - v * v;
    let disc = (x * x * c * c + a * rho2).sqrt();
    // Pick the cancellation-free form of the positive root.
    let u = if x * v >= 0.0 {
        (x * v + disc) / a
    } else {
        (x * x + rho2) / (disc - x * v)
    };
    Ok(u)
}

/// Field of one monopole moving along `x` from `source_at_zero`.
fn monopole_field(
    receiver: Vec3,
    source_at_zero: Vec3,
    v: f64,
    c: f64,
    signal: &SignalSpec,
    t: f64,
) -> Result<Complex64> {
    let u = emission_delay(receiver, source_at_zero, v, c, t)?;
    let r = c * u;
    if !(r > 0.0) {
        return Err(Error::Evaluation {
            time: t,
            reason: "receiver coincides with the source path".into(),
        });
    }
    let x = receiver[0] - source_at_zero[0] - v * t;
    let mach_r = v * (x + v * u) / (c * r);
    let tau = t - u;
    let s = signal.amplitude * Complex64::from_polar(1.0, -signal.omega0() * tau);
    Ok(s / (4.0 * PI * r * (1.0 - mach_r)))
}

/// Image of the moving source in the ground plane, if enabled.
pub fn image_source(scenario: &Scenario) -> Option<Vec3> {
    scenario.ground.enabled.then(|| {
        let s = scenario.source_position();
        [s[0], s[1], 2.0 * scenario.ground.z_plane - s[2]]
    })
}

/// Pressure at `mic` for each of `times`, including the mirror source when
/// the scenario has a ground plane.
pub fn simulate_pressure(
    scenario: &Scenario,
    signal: &SignalSpec,
    mic: Vec3,
    times: &[f64],
) -> Result<Vec<Complex64>> {
    let v = scenario.motion.speed;
    let c = scenario.medium.c;
    let direct = scenario.source_position();
    let image = image_source(scenario);
    times
        .iter()
        .map(|&t| {
            let mut p = monopole_field(mic, direct, v, c, signal, t)?;
            if let Some(img) = image {
                p += monopole_field(mic, img, v, c, signal, t)?;
            }
            Ok(p)
        })
        .collect()
}

/// Sample all microphones on `[t_span.0, t_span.1)` at `fs`.
pub fn record_array(
    scenario: &Scenario,
    signal: &SignalSpec,
    fs: f64,
    t_span: (f64, f64),
) -> Result<Recording> {
    let (_, f_plus) = doppler_band(signal.f0, scenario.motion.speed, &scenario.medium)?;
    if !(fs > 2.0 * f_plus) {
        return Err(Error::Config(format!(
            "sampling rate {fs} Hz does not resolve the Doppler band up to {f_plus:.1} Hz"
        )));
    }
    let first = (t_span.0 * fs - 1e-9).ceil() as i64;
    let end = (t_span.1 * fs - 1e-9).ceil() as i64;
    if end <= first {
        return Err(Error::Config("empty recording span".into()));
    }
    let times: Vec<f64> = (first..end).map(|k| k as f64 / fs).collect();
    let channels = scenario
        .array
        .positions
        .iter()
        .map(|&mic| simulate_pressure(scenario, signal, mic, &times))
        .collect::<Result<Vec<_>>>()?;
    Ok(Recording {
        fs,
        first_index: first,
        channels,
        meta: RecordingMeta {
            scenario_hash: scenario.content_hash(),
            signal: Some(*signal),
            history: Vec::new(),
        },
    })
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Zero-phase bandpass gain: flat on `[lo, hi]`, cosine tapers over
/// `NOISE_TAPER` of the edge frequency on each side, zero elsewhere.
pub fn noise_filter_gain(f: f64, band: (f64, f64)) -> f64 {
    let f = f.abs();
    let (lo, hi) = band;
    let lo_stop = lo * (1.0 - NOISE_TAPER);
    let hi_stop = hi * (1.0 + NOISE_TAPER);
    if f <= lo_stop || f >= hi_stop {
        0.0
    } else if f < lo {
        0.5 * (1.0 - (PI * (f - lo_stop) / (lo - lo_stop)).cos())
    } else if f <= hi {
        1.0
    } else {
        0.5 * (1.0 + (PI * (f - hi) / (hi_stop - hi)).cos())
    }
}

/// Add correlated noise radiated by a stationary point source.
///
/// A common white Gaussian sequence is bandpass filtered in the frequency
/// domain, delayed by `r/c` to each microphone and scaled by `1/(4π r)`. The
/// overall level is set so that the peak signal magnitude on channel 0 over
/// the noise RMS on channel 0 equals `snr_db`. An infinite SNR returns the
/// input unchanged.
pub fn add_noise(recording: &Recording, scenario: &Scenario, noise: &NoiseSpec) -> Result<Recording> {
    if noise.snr_db == f64::INFINITY {
        return Ok(recording.clone());
    }
    let nyquist = 0.5 * recording.fs;
    if !(0.0 < noise.band.0 && noise.band.0 < noise.band.1 && noise.band.1 < nyquist) {
        return Err(Error::Config(format!(
            "noise band [{}, {}] Hz must satisfy 0 < low < high < fs/2",
            noise.band.0, noise.band.1
        )));
    }
    let peak = recording.peak(0);
    if peak == 0.0 {
        return Err(Error::Config("cannot set an SNR against a zero signal".into()));
    }
    let len = recording.n_samples();
    let p = (2 * len).next_power_of_two();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut white: Vec<Complex64> = (0..p)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(p);
    let inverse = planner.plan_fft_inverse(p);
    forward.process(&mut white);
    let freq = |k: usize| -> f64 {
        let k = k as f64;
        let pf = p as f64;
        if k < pf / 2.0 {
            k * recording.fs / pf
        } else {
            (k - pf) * recording.fs / pf
        }
    };
    let c = scenario.medium.c;
    let mut per_mic: Vec<Vec<f64>> = Vec::with_capacity(recording.channels.len());
    for mic in &scenario.array.positions {
        let r = distance(mic, &noise.source_position);
        let delay = r / c;
        let mut spec: Vec<Complex64> = white
            .iter()
            .enumerate()
            .map(|(k, w)| {
                if k == p / 2 {
                    return Complex64::new(0.0, 0.0);
                }
                let f = freq(k);
                w * noise_filter_gain(f, noise.band)
                    * Complex64::from_polar(1.0 / (4.0 * PI * r), -2.0 * PI * f * delay)
            })
            .collect();
        inverse.process(&mut spec);
        per_mic.push(spec[..len].iter().map(|z| z.re / p as f64).collect());
    }
    let noise_rms = rms(&per_mic[0]);
    let target_rms = peak * 10f64.powf(-noise.snr_db / 20.0);
    let scale = target_rms / noise_rms;
    let mut out = recording.clone();
    for (ch, n) in out.channels.iter_mut().zip(&per_mic) {
        for (z, x) in ch.iter_mut().zip(n) {
            z.re += scale * x;
        }
    }
    out.meta.history.push(format!(
        "correlated noise: snr {} dB on channel 0, source {:?}, seed {}, filter fft zero-phase cosine-tapered bandpass [{}, {}] Hz taper {}",
        noise.snr_db, noise.source_position, noise.seed, noise.band.0, noise.band.1, NOISE_TAPER
    ));
    Ok(out)
}

/// Independent white Gaussian noise per channel, scaled so each channel's
/// peak magnitude over its noise RMS equals `snr_db`.
pub fn add_stabilization_noise(recording: &Recording, snr_db: f64, seed: u64) -> Recording {
    let mut out = recording.clone();
    if snr_db == f64::INFINITY {
        return out;
    }
    for (n, ch) in out.channels.iter_mut().enumerate() {
        let peak = ch.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 || ch.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let raw: Vec<f64> = (0..ch.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = peak * 10f64.powf(-snr_db / 20.0) / rms(&raw);
        for (z, x) in ch.iter_mut().zip(&raw) {
            z.re += scale * x;
        }
    }
    out.meta
        .history
        .push(format!("stabilization noise: snr {snr_db} dB per channel, seed {seed}"));
    out
}

/// SNR of `noisy` relative to `clean` as defined for noise injection:
/// peak clean magnitude over RMS of the difference, on one channel.
pub fn measured_snr_db(clean: &Recording, noisy: &Recording, channel: usize) -> f64 {
    let diff: Vec<f64> = clean.channels[channel]
        .iter()
        .zip(&noisy.channels[channel])
        .map(|(a, b)| (b - a).norm())
        .collect();
    20.0 * (clean.peak(channel) / rms(&diff)).log10()
}
