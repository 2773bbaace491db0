//! Tube output: CSV of block box hulls, `.poly` constraint sidecars and SVG
//! interval bands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use reachdec::reach::ReachTube;
use reachdec::sets::LazySet;

use crate::error::CliError;

pub const CSV_HEADER: &str = "k,t_lo,t_hi,block,var_lo_1,var_hi_1,var_lo_2,var_hi_2";

/// One CSV row: the box hull of block `block` at step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeRow {
    pub k: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub block: usize,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

/// Box hulls of every stored block set, ordered by step then tracked block.
pub fn tube_rows(tube: &ReachTube) -> Result<Vec<TubeRow>, CliError> {
    let mut rows = Vec::with_capacity(tube.len() * tube.tracked.len());
    for (k, sets) in tube.sets.iter().enumerate() {
        let (t_lo, t_hi) = tube.time_interval(k);
        for (&block, set) in tube.tracked.iter().zip(sets) {
            let h = set.interval_hull()?;
            rows.push(TubeRow {
                k,
                t_lo,
                t_hi,
                block,
                low: h.low(),
                high: h.high(),
            });
        }
    }
    Ok(rows)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_csv(rows: &[TubeRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{}", r.k, num(r.t_lo), num(r.t_hi), r.block);
        for i in 0..2 {
            match (r.low.get(i), r.high.get(i)) {
                (Some(lo), Some(hi)) => {
                    let _ = write!(out, ",{},{}", num(*lo), num(*hi));
                }
                _ => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text written by [`format_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<TubeRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(format!("line 1: expected header {CSV_HEADER:?}")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: &str| format!("line {}: {m}", i + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(at(&format!("expected 8 fields, found {}", f.len())));
        }
        let float = |s: &str| s.trim().parse::<f64>().map_err(|_| at(&format!("malformed number {s:?}")));
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| at(&format!("malformed index {s:?}")));
        let mut low = Vec::new();
        let mut high = Vec::new();
        for pair in [(f[4], f[5]), (f[6], f[7])] {
            if pair.0.is_empty() && pair.1.is_empty() {
                continue;
            }
            low.push(float(pair.0)?);
            high.push(float(pair.1)?);
        }
        rows.push(TubeRow {
            k: int(f[0])?,
            t_lo: float(f[1])?,
            t_hi: float(f[2])?,
            block: int(f[3])?,
            low,
            high,
        });
    }
    Ok(rows)
}

/// `block,k,a1,a2,b` rows for every polygon in the tube, or `None` when no
/// block set is a polygon.
pub fn format_poly(tube: &ReachTube) -> Option<String> {
    let mut out = String::from("block,k,a1,a2,b\n");
    let mut any = false;
    for (k, sets) in tube.sets.iter().enumerate() {
        for (&block, set) in tube.tracked.iter().zip(sets) {
            if let LazySet::Polygon(p) = set.as_ref() {
                any = true;
                for c in p.constraints() {
                    let _ = writeln!(out, "{block},{k},{},{},{}", num(c.normal[0]), num(c.normal[1]), num(c.offset));
                }
            }
        }
    }
    any.then_some(out)
}

const COLORS: [&str; 2] = ["#e8731a", "#1f77b4"];

/// Interval bands of one block over time: one rectangle per step and variable.
pub fn format_svg(rows: &[TubeRow], block: usize) -> String {
    let rows: Vec<&TubeRow> = rows.iter().filter(|r| r.block == block).collect();
    let (w, h, pad) = (800.0, 400.0, 50.0);
    let t_min = rows.iter().map(|r| r.t_lo).fold(f64::INFINITY, f64::min);
    let t_max = rows.iter().map(|r| r.t_hi).fold(f64::NEG_INFINITY, f64::max);
    let y_min = rows.iter().flat_map(|r| r.low.iter().copied()).fold(f64::INFINITY, f64::min);
    let y_max = rows.iter().flat_map(|r| r.high.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (t_span, y_span) = (span(t_min, t_max), span(y_min, y_max));
    // Discrete-time rows have t_lo = t_hi; give them a visible width.
    let min_width = if rows.len() > 1 { (w - 2.0 * pad) / rows.len() as f64 } else { w - 2.0 * pad };
    let x = |t: f64| pad + (t - t_min) / t_span * (w - 2.0 * pad);
    let y = |v: f64| h - pad - (v - y_min) / y_span * (h - 2.0 * pad);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (var, color) in COLORS.iter().enumerate() {
        let _ = writeln!(out, r#"<g fill="{color}" fill-opacity="0.5" stroke="none">"#);
        for r in &rows {
            let (Some(lo), Some(hi)) = (r.low.get(var), r.high.get(var)) else { continue };
            let x0 = x(r.t_lo);
            let width = (x(r.t_hi) - x0).max(min_width.min(w - pad - x0));
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.3}" y="{:.3}" width="{width:.3}" height="{:.3}"/>"#,
                y(*hi),
                (y(*lo) - y(*hi)).max(0.5)
            );
        }
        out.push_str("</g>\n");
    }
    let _ = writeln!(
        out,
        r#"<g stroke="black" fill="none"><line x1="{pad}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}"/></g>"#,
        b = h - pad,
        r = w - pad
    );
    let text = |out: &mut String, x: f64, y: f64, anchor: &str, s: String| {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" font-size="12" text-anchor="{anchor}">{s}</text>"#);
    };
    text(&mut out, pad, h - pad + 16.0, "start", format!("{t_min:.4}"));
    text(&mut out, w - pad, h - pad + 16.0, "end", format!("{t_max:.4}"));
    text(&mut out, w / 2.0, h - 10.0, "middle", "t".into());
    text(&mut out, pad - 4.0, h - pad, "end", format!("{y_min:.4}"));
    text(&mut out, pad - 4.0, pad + 4.0, "end", format!("{y_max:.4}"));
    let vars: Vec<String> = (0..rows.first().map_or(0, |r| r.low.len()))
        .map(|i| format!(r#"<tspan fill="{}">x{}</tspan>"#, COLORS[i], 2 * block + i + 1))
        .collect();
    text(&mut out, w / 2.0, pad / 2.0, "middle", format!("block {block}: {}", vars.join(" ")));
    out.push_str("</svg>\n");
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Svg,
    Both,
}

/// Writes `tube.csv` (plus `tube.poly` when polygons are stored) and/or one
/// `block_<i>.svg` per tracked block into `dir`. Returns the files written.
pub fn emit_tube(tube: &ReachTube, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    if tube.is_empty() {
        return Err(CliError::Usage("the tube is empty".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let rows = tube_rows(tube)?;
    let mut written = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        let p = dir.join("tube.csv");
        write_file(&p, &format_csv(&rows))?;
        written.push(p);
        if let Some(poly) = format_poly(tube) {
            let p = dir.join("tube.poly");
            write_file(&p, &poly)?;
            written.push(p);
        }
    }
    if matches!(format, Format::Svg | Format::Both) {
        for &b in &tube.tracked {
            let p = dir.join(format!("block_{b}.svg"));
            write_file(&p, &format_svg(&rows, b))?;
            written.push(p);
        }
    }
    Ok(written)
}
