use std::io::{self, Write};

use cslearn::experiments::summary::BenchSummary;

/// Per-method medians and means, one line per metric.
pub fn print_summary(w: &mut impl Write, s: &BenchSummary) -> io::Result<()> {
    writeln!(w, "{:<16} {:<26} {:>6} {:>14} {:>14}", "method", "metric", "count", "median", "mean")?;
    for (method, metrics) in &s.methods {
        for (metric, st) in metrics {
            writeln!(
                w,
                "{:<16} {:<26} {:>6} {:>14.6e} {:>14.6e}",
                method, metric, st.count, st.median, st.mean
            )?;
        }
    }
    writeln!(
        w,
        "scenarios executed: {}, failed cells: {}",
        s.scenarios_executed, s.failed_cells
    )
}
