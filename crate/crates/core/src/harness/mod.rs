//! RBER sweeps: repeated corruption trials, box statistics and the robustness
//! measure `R(x)`.

pub mod stats;
mod sweep;

use std::io::Write;

pub use stats::{box_stats, spearman, BoxStats};
pub use sweep::{
    parity_variant, plain_variant, robustness, robustness_from_means, run_sweep, ParityBudget, SweepConfig,
    SweepPoint, SweepResult, TrialSample, DEFAULT_TRIALS, DEFAULT_X,
};

use crate::error::Result;

/// Writes the per-trial block, a blank line, then the per-rate summary block.
pub fn write_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "rber,trial,accuracy,flips")?;
    for p in &result.points {
        for s in &p.samples {
            writeln!(w, "{},{},{},{}", p.rber, s.trial, s.accuracy, s.flips)?;
        }
    }
    writeln!(w)?;
    writeln!(w, "rber,mean,median,q1,q3,whisker_low,whisker_high,outlier_count")?;
    for p in &result.points {
        let s = &p.stats;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.rber,
            s.mean,
            s.median,
            s.q1,
            s.q3,
            s.whisker_low,
            s.whisker_high,
            s.outliers.len()
        )?;
    }
    Ok(())
}

pub fn csv_string(result: &SweepResult) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

pub fn write_json<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, result)?;
    Ok(())
}
