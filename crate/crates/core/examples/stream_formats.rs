//! Writes a simulated stream in the text and binary formats and reads both
//! back.
//!
//!     cargo run --example stream_formats

use pairsource::detection::{ArmBudget, DetectorModel};
use pairsource::sim::{simulate, SimConfig};
use pairsource::stream::TimestampStream;

fn main() -> pairsource::Result<()> {
    let det = DetectorModel { jitter_fwhm_ps: 80.0, ..DetectorModel::ideal(0.5) };
    let cfg = SimConfig::new(1e5, 0.01, 99, ArmBudget::new(0.3, det)?, ArmBudget::new(0.3, det)?);
    let stream = simulate(&cfg)?;

    let dir = std::env::temp_dir().join("pairsource-stream-formats");
    std::fs::create_dir_all(&dir)?;
    for name in ["stream.txt", "stream.qtt"] {
        let path = dir.join(name);
        stream.save(&path)?;
        let back = TimestampStream::load(&path)?;
        let size = std::fs::metadata(&path)?.len();
        println!("{name}: {size} bytes, {} events, identical: {}", back.events.len(), back.events == stream.events);
    }

    let mut head = Vec::new();
    stream.slice(0, 200_000_000).write_text(&mut head)?;
    let text = String::from_utf8_lossy(&head);
    println!("\nfirst lines of the text format:");
    for line in text.lines().take(12) {
        println!("  {line}");
    }
    Ok(())
}
