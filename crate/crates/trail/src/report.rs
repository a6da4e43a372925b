//! Report artifacts: CSV tables and standalone SVG charts.
//!
//! Charts are hand-rolled polyline/rect SVG — no plotting dependency. CSV is
//! the plain comma-separated flavor without quoting; every value this crate
//! writes is a number or a bare identifier, and readers reject embedded
//! commas rather than quote them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Write a CSV file with a header row. Every row must match the header
/// width, and no cell may contain a comma or newline.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch(format!(
                "csv row {} has {} cells, header has {}",
                i + 1,
                row.len(),
                header.len()
            )));
        }
        if let Some(bad) = row.iter().find(|c| c.contains(',') || c.contains('\n')) {
            return Err(Error::DataFormat {
                line: i + 2,
                msg: format!("cell {bad:?} needs quoting, which this writer does not do"),
            });
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a CSV file written by [`write_csv`]: returns `(header, rows)`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut lines = text.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) if !h.is_empty() => h.split(',').map(str::to_string).collect(),
        _ => return Err(Error::EmptyDataset(format!("{} has no header", path.as_ref().display()))),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::DataFormat {
                line: i + 2,
                msg: format!("{} cells, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// One named line on a chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0; // left margin
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, what: &str) -> Result<Axis> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{what} axis value {v}")));
            }
            if log && v <= 0.0 {
                return Err(Error::NonFinite(format!(
                    "{what} axis value {v} on a logarithmic scale"
                )));
            }
            let t = if log { v.log10() } else { v };
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if lo > hi {
            return Err(Error::EmptyDataset(format!("{what} axis has no points")));
        }
        if hi - lo < 1e-12 {
            // Degenerate range: pad so the single value sits mid-axis.
            lo -= 0.5;
            hi += 0.5;
        }
        Ok(Axis { lo, hi, log })
    }

    fn frac(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    /// Five evenly spaced ticks as `(fraction, label)`.
    fn ticks(&self) -> Vec<(f64, String)> {
        (0..5)
            .map(|i| {
                let f = i as f64 / 4.0;
                let t = self.lo + f * (self.hi - self.lo);
                let v = if self.log { 10f64.powf(t) } else { t };
                (f, fmt_tick(v))
            })
            .collect()
    }
}

fn x_px(f: f64) -> f64 {
    ML + f * (W - ML - MR)
}

fn y_px(f: f64) -> f64 {
    H - MB - f * (H - MT - MB)
}

fn chart_frame(svg: &mut String, title: &str, x_label: &str, y_label: &str, xa: &Axis, ya: &Axis) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{tx}" y="22" text-anchor="middle" font-size="15">{title}</text>
<text x="{tx}" y="{xl}" text-anchor="middle">{x_label}</text>
<text x="16" y="{yl}" text-anchor="middle" transform="rotate(-90 16 {yl})">{y_label}</text>
"#,
        tx = (ML + W - MR) / 2.0,
        xl = H - 12.0,
        yl = (MT + H - MB) / 2.0,
    );
    for (f, label) in xa.ticks() {
        let x = x_px(f);
        let _ = write!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{y0:.1}\" x2=\"{x:.1}\" y2=\"{y1:.1}\" stroke=\"#ddd\"/>\n<text x=\"{x:.1}\" y=\"{ty:.1}\" text-anchor=\"middle\">{label}</text>\n",
            y0 = y_px(0.0),
            y1 = y_px(1.0),
            ty = y_px(0.0) + 18.0,
        );
    }
    for (f, label) in ya.ticks() {
        let y = y_px(f);
        let _ = write!(
            svg,
            "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{x1:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\">{label}</text>\n",
            x0 = x_px(0.0),
            x1 = x_px(1.0),
            tx = x_px(0.0) - 6.0,
            ty = y + 4.0,
        );
    }
    let _ = write!(
        svg,
        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"#333\"/>\n",
        x = x_px(0.0),
        y = y_px(1.0),
        w = x_px(1.0) - x_px(0.0),
        h = y_px(0.0) - y_px(1.0),
    );
}

/// Write a line chart of one or more series. Log axes reject non-positive
/// values; every series must be non-empty.
pub fn line_chart(
    path: impl AsRef<Path>,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_x: bool,
    log_y: bool,
) -> Result<()> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::EmptyDataset("line chart needs non-empty series".into()));
    }
    let xa = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), log_x, "x")?;
    let ya = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), log_y, "y")?;
    let mut svg = String::new();
    chart_frame(&mut svg, title, x_label, y_label, &xa, &ya);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", x_px(xa.frac(x)), y_px(ya.frac(y))))
            .collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = write!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                x_px(xa.frac(x)),
                y_px(ya.frac(y))
            );
        }
        let ly = MT + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{lx2:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{tx:.1}\" y=\"{ty:.1}\">{name}</text>\n",
            lx = W - MR - 130.0,
            lx2 = W - MR - 110.0,
            tx = W - MR - 105.0,
            ty = ly + 4.0,
            name = s.name,
        );
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

/// Write a bar chart; each bar is `(label, value, stderr)` and gets an error
/// whisker when the stderr is positive.
pub fn bar_chart(
    path: impl AsRef<Path>,
    title: &str,
    y_label: &str,
    bars: &[(String, f64, f64)],
) -> Result<()> {
    if bars.is_empty() {
        return Err(Error::EmptyDataset("bar chart needs at least one bar".into()));
    }
    let ya = Axis::fit(
        bars.iter().flat_map(|&(_, v, e)| [0.0, v + e, v - e]).chain(std::iter::once(0.0)),
        false,
        "y",
    )?;
    let xa = Axis { lo: 0.0, hi: 1.0, log: false };
    let mut svg = String::new();
    chart_frame(&mut svg, title, "", y_label, &xa, &ya);
    let n = bars.len() as f64;
    let slot = (x_px(1.0) - x_px(0.0)) / n;
    for (i, (label, value, err)) in bars.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let cx = x_px(0.0) + slot * (i as f64 + 0.5);
        let bw = (slot * 0.6).min(80.0);
        let y0 = y_px(ya.frac(0.0));
        let yv = y_px(ya.frac(*value));
        let _ = write!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bw:.1}\" height=\"{h:.1}\" fill=\"{color}\"/>\n<text x=\"{cx:.1}\" y=\"{ly:.1}\" text-anchor=\"middle\">{label}</text>\n",
            x = cx - bw / 2.0,
            y = yv.min(y0),
            h = (y0 - yv).abs(),
            ly = y_px(0.0) + 34.0,
        );
        if *err > 0.0 {
            let yl = y_px(ya.frac(value - err));
            let yh = y_px(ya.frac(value + err));
            let _ = write!(
                svg,
                "<line x1=\"{cx:.1}\" y1=\"{yl:.1}\" x2=\"{cx:.1}\" y2=\"{yh:.1}\" stroke=\"#333\" stroke-width=\"1.5\"/>\n<line x1=\"{x0:.1}\" y1=\"{yl:.1}\" x2=\"{x1:.1}\" y2=\"{yl:.1}\" stroke=\"#333\"/>\n<line x1=\"{x0:.1}\" y1=\"{yh:.1}\" x2=\"{x1:.1}\" y2=\"{yh:.1}\" stroke=\"#333\"/>\n",
                x0 = cx - 5.0,
                x1 = cx + 5.0,
            );
        }
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            vec!["100".to_string(), "0.5".to_string()],
            vec!["1000".to_string(), "0.1".to_string()],
        ];
        write_csv(&path, &["n", "diff"], &rows).unwrap();
        let (header, back) = read_csv(&path).unwrap();
        assert_eq!(header, vec!["n", "diff"]);
        assert_eq!(back, rows);
    }

    #[test]
    fn csv_rejects_ragged_rows_and_commas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        assert!(write_csv(&path, &["a", "b"], &[vec!["1".into()]]).is_err());
        assert!(write_csv(&path, &["a"], &[vec!["1,2".into()]]).is_err());
        std::fs::write(&path, "a,b\n1\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::DataFormat { line: 2, .. })));
    }

    #[test]
    fn line_chart_writes_wellformed_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.svg");
        let series = vec![
            Series { name: "mean".into(), points: vec![(100.0, 0.5), (1000.0, 0.2), (10000.0, 0.06)] },
            Series { name: "bound".into(), points: vec![(100.0, 5.4), (1000.0, 1.7), (10000.0, 0.54)] },
        ];
        line_chart(&path, "sweep", "n", "diff", &series, true, true).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("bound"));
    }

    #[test]
    fn log_axes_reject_nonpositive_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.svg");
        let series =
            vec![Series { name: "s".into(), points: vec![(1.0, 0.0), (2.0, 1.0)] }];
        assert!(matches!(
            line_chart(&path, "t", "x", "y", &series, false, true),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn bar_chart_writes_bars_and_whiskers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.svg");
        let bars = vec![
            ("trail-tabular".to_string(), 0.8, 0.05),
            ("bc".to_string(), 0.3, 0.04),
        ];
        bar_chart(&path, "success", "rate", &bars).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("<rect").count(), 2 + 2); // background + frame + 2 bars
        assert!(svg.contains("trail-tabular"));
    }
}
