//! Window transforms and the band of the transform that the transfer
//! integral has to cover.

use std::f64::consts::PI;

use moving_source::spectral::{decay_limits, Window, WindowKind};

fn main() -> moving_source::Result<()> {
    for ms in [50.0, 250.0, 1000.0] {
        let w = Window::centered(WindowKind::Hanning, ms * 1e-3, 10_000.0, 0.0)?;
        let peak = w.dtft_abs(0.0);
        let limit = decay_limits(&w, 80.0)? / (2.0 * PI);
        println!(
            "Hanning {ms:>6} ms: N = {}, Δf = {:.2} Hz, |ĝ(0)| = {peak:.1}, −80 dB beyond ±{limit:.2} Hz",
            w.n_samples,
            w.bin_spacing()
        );
        for k in 0..5 {
            let f = k as f64 * 0.5 * w.bin_spacing();
            println!("    {f:7.2} Hz  {:8.2} dB", 20.0 * (w.dtft_abs(2.0 * PI * f) / peak).log10());
        }
    }
    let r = Window::centered(WindowKind::Rectangular, 0.05, 10_000.0, 0.0)?;
    match decay_limits(&r, 80.0) {
        Ok(l) => println!("rectangular: {:.1} Hz", l / (2.0 * PI)),
        Err(e) => println!("rectangular: {e}"),
    }
    Ok(())
}
