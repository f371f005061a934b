//! One cell of the bias simulation, scaled down so it runs in seconds.
//!
//! ```text
//! cargo run --release --example bias_simulation -- 50
//! ```
//! The optional argument is the replicate count (default 20). The bias table
//! is written to standard output as CSV.

use repmatch::simlab::{run_cell, BiasReport, Effect, SimConfig, Sizes};

fn main() -> repmatch::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let mut cfg = SimConfig::new(10, 0.5, 0.0, Effect::Strong);
    cfg.sizes = Sizes {
        template: 100,
        treated: 400,
        control: 1200,
    };
    cfg.replicates = replicates;
    let report = BiasReport {
        rows: run_cell(&cfg)?,
    };
    report.write_csv(std::io::stdout().lock())?;
    eprintln!();
    for row in &report.rows {
        eprintln!("{:<28} {:>+7.2}% (se {:.2})", row.algorithm.to_string(), row.percent_bias, row.mc_se);
    }
    Ok(())
}
