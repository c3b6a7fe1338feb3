//! Run selected acceptance checks from the library, e.g.
//! `cargo run --release --example acceptance_suite -- 2 5 8`.

use moving_source::verify::{run_suite, summary_text, SuiteOptions};

fn main() {
    let mut opts = SuiteOptions::new(std::env::temp_dir().join("moving-source-verify"));
    opts.cache_dir = Some(std::env::temp_dir().join("moving-source-cache"));
    opts.only = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    std::fs::create_dir_all(&opts.work_dir).expect("scratch directory");
    let results = run_suite(&opts, |c| eprintln!("{:.1} s  {}", c.seconds, c.name));
    print!("{}", summary_text(&results));
}
