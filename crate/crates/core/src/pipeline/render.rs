use std::fmt::Write as _;

use super::report::Report;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected text or json)")),
        }
    }
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => report.to_json(),
        Format::Text => Ok(render_text(report)),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Human-readable report: each class's rules in rank order, then the
/// Imitation@K table.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for class in &report.classes {
        let _ = writeln!(
            out,
            "Class {} (baseline {}, {} rules)",
            class.class,
            pct(class.baseline),
            class.rules.len()
        );
        for (i, r) in class.rules.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {:>2}. {} (precision {}, coverage {})",
                i + 1,
                r.text,
                pct(r.precision),
                pct(r.coverage)
            );
        }
        out.push('\n');
    }
    if !report.imitation.points.is_empty() {
        out.push_str("Imitation@K on the test split\n");
        out.push_str(&report.imitation.to_table());
    }
    if let Some(acc) = report.metadata.model_accuracy {
        let _ = writeln!(out, "\nModel accuracy on the test split: {}", pct(acc));
    }
    for w in &report.metadata.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
