use std::fmt::Write;

use super::EvalReport;

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", 100.0 * x))
}

/// Plain-text summary: one line per detection row and per association row.
/// Values are percentages with one decimal; `-` marks an absent value.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<10} {:<7} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "target", "protocol", "band", "AP", "AP@lo", "AP@hi", "AR", "gts"
    );
    for r in &report.detection {
        let _ = writeln!(
            out,
            "{:<14} {:<10} {:<7} {:>6} {:>6} {:>6} {:>6} {:>6}",
            r.target,
            r.protocol.to_string(),
            r.band.to_string(),
            pct(r.ap),
            pct(r.ap_at.first().copied()),
            pct(r.ap_at.last().copied()),
            pct(r.ar),
            r.num_gt
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<14} {:>6} {:>6} {:>6} {:>6}",
        "part", "AP50", "JAP", "CA", "gts"
    );
    for r in &report.association {
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6} {:>6}",
            r.target,
            pct(r.ap50),
            pct(r.jap),
            r.ca.map_or_else(|| "-".to_string(), |c| format!("{c:.1}")),
            r.num_gt
        );
    }
    if !report.skipped.is_empty() {
        let _ = writeln!(out, "\nskipped images: {}", report.skipped.join(", "));
    }
    out
}
