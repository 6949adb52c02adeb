//! Full repeated audit on a LENGTH-injected synthetic corpus.
//!
//! ```text
//! cargo run --release --example synthetic_audit -- [report-dir]
//! ```

use xai_disparity::dataset::{
    default_templates, generate_synthetic_paired, AuditDataset, Injection,
};
use xai_disparity::pipeline::{run_audit, write_report_dir, AuditConfig};
use xai_disparity::report::{render_bias, render_effect_table, render_grid};

fn main() -> xai_disparity::Result<()> {
    let data = AuditDataset::paired(generate_synthetic_paired(
        &default_templates(),
        300,
        Injection::Length,
        7,
    )?)?;
    let cfg = AuditConfig {
        runs: 3,
        ..AuditConfig::default()
    };
    let report = run_audit(&data, &cfg)?;

    print!(
        "{}\n{}\n{}",
        render_grid(&report),
        render_effect_table(&report),
        render_bias(&report)
    );
    let explanations: usize = report.runs.iter().map(|r| r.explanations).sum();
    println!(
        "{explanations} explanations, config {}",
        &report.config_hash[..12]
    );

    if let Some(dir) = std::env::args().nth(1) {
        write_report_dir(dir.as_ref(), &report)?;
        println!("wrote {dir}");
    }
    Ok(())
}
