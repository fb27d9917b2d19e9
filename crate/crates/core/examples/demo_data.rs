//! Writes the bundled demo price series: `cargo run --example demo_data -- data/synthetic_prices.csv`.

use std::io::Write;

fn main() -> std::io::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "synthetic_prices.csv".into());
    let prices = tsxai_core::synth::synthetic_prices(1200, 2024);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "date,close")?;
    for (d, p) in prices.dates().iter().zip(prices.values()) {
        writeln!(out, "{},{:.4}", d.format("%Y-%m-%d"), p)?;
    }
    Ok(())
}
