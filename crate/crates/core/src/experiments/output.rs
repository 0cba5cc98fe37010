use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::table::{AggregateRow, ResultTable};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Writes `results.csv`, `results.json` and `<experiment>.svg` into `dir`
/// and returns their paths. Output bytes depend only on the table.
pub fn emit_outputs(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let aggregates = table.aggregates();

    let csv_path = dir.join("results.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["row_type", "condition", "seed", "metric", "value", "n", "ci95_halfwidth"])?;
    for r in &table.rows {
        w.write_record([
            "raw",
            &r.condition,
            &r.seed.to_string(),
            &r.metric,
            &r.value.to_string(),
            "",
            "",
        ])?;
    }
    for a in &aggregates {
        w.write_record([
            "aggregate",
            &a.condition,
            "",
            &a.metric,
            &a.mean.to_string(),
            &a.n.to_string(),
            &a.ci95_halfwidth.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let json_path = dir.join("results.json");
    let json = serde_json::json!({
        "experiment": table.experiment,
        "rows": table.rows,
        "aggregates": aggregates,
    });
    let text = serde_json::to_string_pretty(&json)? + "\n";
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

    let svg_path = dir.join(format!("{}.svg", table.experiment));
    std::fs::write(&svg_path, render_svg(table)).map_err(|e| Error::io(&svg_path, e))?;
    Ok(vec![csv_path, json_path, svg_path])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    lo: f64,
    hi: f64,
}

impl Frame {
    fn new(points: &[&AggregateRow]) -> Self {
        let lo = points
            .iter()
            .map(|a| a.mean - a.ci95_halfwidth)
            .fold(0.0f64, f64::min);
        let mut hi = points
            .iter()
            .map(|a| a.mean + a.ci95_halfwidth)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        Frame { lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.lo) / (self.hi - self.lo) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn whisker(out: &mut String, x: f64, f: &Frame, a: &AggregateRow) {
    let (y0, y1) = (f.y(a.mean - a.ci95_halfwidth), f.y(a.mean + a.ci95_halfwidth));
    let _ = write!(
        out,
        r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/><line x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="black"/><line x1="{:.2}" y1="{y1:.2}" x2="{:.2}" y2="{y1:.2}" stroke="black"/>"#,
        x - 4.0,
        x + 4.0,
        x - 4.0,
        x + 4.0
    );
    out.push('\n');
}

/// Static chart of the first metric's means with 95% CI whiskers: a line
/// over the `Specific-p` conditions for the case study, grouped bars
/// otherwise.
pub fn render_svg(table: &ResultTable) -> String {
    let metric = table.metrics().first().map(|m| m.to_string()).unwrap_or_default();
    let aggs: Vec<AggregateRow> = table
        .aggregates()
        .into_iter()
        .filter(|a| a.metric == metric)
        .collect();
    let points: Vec<&AggregateRow> = aggs.iter().collect();
    let f = Frame::new(&points);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{} ({})</text>"#,
        WIDTH / 2.0,
        escape(&table.experiment),
        escape(&metric)
    );
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{:.2}" x2="{x1}" y2="{:.2}" stroke="black"/><line x1="{x0}" y1="{MARGIN}" x2="{x0}" y2="{:.2}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        HEIGHT - MARGIN,
        HEIGHT - MARGIN
    );
    for v in [f.lo, (f.lo + f.hi) / 2.0, f.hi] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            x0 - 6.0,
            f.y(v) + 4.0
        );
    }

    let (line, flat): (Vec<&AggregateRow>, Vec<&AggregateRow>) = if table.experiment == "case-study" {
        points.iter().partition(|a| a.condition.starts_with("Specific-"))
    } else {
        (Vec::new(), points.clone())
    };
    let slot = |k: usize, n: usize| x0 + (k as f64 + 0.5) * (x1 - x0) / n.max(1) as f64;
    let label = |out: &mut String, x: f64, text: &str| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            HEIGHT - MARGIN + 16.0,
            escape(text)
        );
    };
    if line.is_empty() {
        let bar = 0.6 * (x1 - x0) / flat.len().max(1) as f64;
        for (k, a) in flat.iter().enumerate() {
            let x = slot(k, flat.len());
            let (top, base) = (f.y(a.mean.max(0.0)), f.y(a.mean.min(0.0)));
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="#4c72b0"/>"##,
                x - bar / 2.0,
                base - top
            );
            whisker(&mut out, x, &f, a);
            label(&mut out, x, &a.condition);
        }
    } else {
        let pts: Vec<(f64, f64)> = line
            .iter()
            .enumerate()
            .map(|(k, a)| (slot(k, line.len()), f.y(a.mean)))
            .collect();
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#4c72b0" stroke-width="2"/>"##,
            path.join(" ")
        );
        for (a, (x, y)) in line.iter().zip(&pts) {
            let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#4c72b0"/>"##);
            whisker(&mut out, *x, &f, a);
            label(&mut out, *x, &a.condition);
        }
        for a in &flat {
            let y = f.y(a.mean);
            let _ = writeln!(
                out,
                r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#c44e52" stroke-dasharray="6,4"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#c44e52">{}</text>"##,
                x1,
                y - 4.0,
                escape(&a.condition)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(experiment: &str) -> ResultTable {
        let mut t = ResultTable::new(experiment);
        for s in 0..3 {
            t.push("NoPretrain", s, "acc", 0.5 + 0.01 * s as f64).unwrap();
            t.push("Specific-0", s, "acc", 0.4).unwrap();
            t.push("Specific-100", s, "acc", 0.9 - 0.02 * s as f64).unwrap();
        }
        t
    }

    #[test]
    fn outputs_are_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let t = table("case-study");
        let paths = emit_outputs(&t, dir.path()).unwrap();
        let first: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        emit_outputs(&t, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        let csv = String::from_utf8(first[0].clone()).unwrap();
        assert_eq!(csv.lines().count(), 1 + t.rows.len() + t.aggregates().len());
        let svg = String::from_utf8(first[2].clone()).unwrap();
        assert!(svg.contains("<polyline") && svg.contains("stroke-dasharray"));
        let bars = render_svg(&table("mask-compare"));
        assert_eq!(bars.matches("<rect").count(), 3);
    }

    #[test]
    fn escapes_labels() {
        let mut t = ResultTable::new("x<y");
        t.push("a&b", 0, "m", 1.0).unwrap();
        let svg = render_svg(&t);
        assert!(svg.contains("a&amp;b") && svg.contains("x&lt;y"));
    }
}
