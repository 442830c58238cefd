//! Runs the variant-comparison suite on synthetic scenarios and prints the
//! final score of every tracker.
//!
//! cargo run --release --example benchmark -- [scenarios] [runs] [seed]

use std::time::Instant;

use groundtrack::simulator::{run_suite, SuiteConfig};
use groundtrack::tracker::Variant;

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = SuiteConfig {
        scenarios: args.first().copied().unwrap_or(10) as usize,
        runs: args.get(1).copied().unwrap_or(5) as u32,
        seed: args.get(2).copied().unwrap_or(0),
        ..SuiteConfig::default()
    };
    let start = Instant::now();
    let result = run_suite(&cfg).expect("suite runs");
    println!("{} scenarios x {} runs in {:.1?}", cfg.scenarios, cfg.runs, start.elapsed());
    for v in Variant::ALL {
        let r = result.report(v).expect("variant evaluated");
        println!("{:>3}: f_final {:.3}  std {:.3}", v.name(), r.f_final, r.std);
    }
}
