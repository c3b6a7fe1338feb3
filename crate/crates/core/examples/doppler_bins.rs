//! Doppler band, analysis band and the DFT bins available for inversion.

use moving_source::scenario::{doppler_band, Medium};
use moving_source::spectral::{analysis_band, available_bins, select_bins, BinStrategy, Window, WindowKind};

fn main() -> moving_source::Result<()> {
    let medium = Medium::default();
    for f0 in [250.0, 500.0, 1000.0, 2000.0] {
        for v in [1.0, 10.0, 25.0, 50.0] {
            let (lo, hi) = doppler_band(f0, v, &medium)?;
            let band = analysis_band(f0, v, &medium)?;
            let counts: Vec<usize> = [50.0, 250.0, 1000.0]
                .iter()
                .map(|ms| available_bins(band, 1000.0 / ms).len())
                .collect();
            println!(
                "f0 {f0:>6} Hz  v {v:>4} m/s  Doppler [{lo:8.2}, {hi:8.2}]  band [{:8.2}, {:8.2}]  bins @50/250/1000 ms {:?}",
                band.0, band.1, counts
            );
        }
    }

    let w = Window::centered(WindowKind::Hanning, 1.0, 10_000.0, 0.0)?;
    let band = analysis_band(1000.0, 50.0, &medium)?;
    for strategy in [BinStrategy::Single, BinStrategy::Regular, BinStrategy::Random] {
        let m = if strategy == BinStrategy::Single { 1 } else { 5 };
        let sel = select_bins(strategy, band, &w, 1000.0, m, 3, 7)?;
        for mic in 0..3 {
            println!("{strategy:>8} mic {mic}: {:?} Hz", sel.frequencies(mic));
        }
    }
    Ok(())
}
