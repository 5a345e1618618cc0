//! Deterministic output emission: CSV with provenance headers, JSON
//! reports, and dependency-free SVG line plots.  Identical inputs produce
//! byte-identical files; nothing here reads the clock or the environment.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::propagator::ChannelLabel;
use crate::spectral::MandelSpectrum;

/// Version string embedded in every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the scenario text, the provenance tag of every output.
pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Full-precision decimal formatting (17 significant digits round-trips f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn channel_name(ch: ChannelLabel) -> &'static str {
    match ch {
        ChannelLabel::XiI => "xi1",
        ChannelLabel::XiIII => "xi3",
        ChannelLabel::TI => "t1",
        ChannelLabel::TIII => "t3",
    }
}

fn header(meta: &[(&str, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# spinlight {VERSION}");
    for (key, value) in meta {
        let _ = writeln!(out, "# {key}: {value}");
    }
    out
}

/// Spectra as CSV rows `mode_index,abscissa,value,channel`; one series per
/// labeled spectrum, channel tags carry the caller's stage suffix.
pub fn spectra_csv(meta: &[(&str, String)], series: &[(String, &MandelSpectrum)]) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "mode_index,abscissa,value,channel");
    for (label, spec) in series {
        for (k, (x, v)) in spec.abscissa.iter().zip(spec.values.iter()).enumerate() {
            let _ = writeln!(out, "{k},{},{},{label}", fmt_f64(*x), fmt_f64(*v));
        }
    }
    out
}

/// Mode-pair CSV: `kind,index,coordinate,value` with `h` on the time grid
/// and `g` on the space grid (values are the unit-L2 mode samples).
pub fn modes_csv(
    meta: &[(&str, String)],
    t_coords: &[f64],
    h: &[f64],
    z_coords: &[f64],
    g: &[f64],
) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "kind,index,coordinate,value");
    for (i, (t, v)) in t_coords.iter().zip(h.iter()).enumerate() {
        let _ = writeln!(out, "h,{i},{},{}", fmt_f64(*t), fmt_f64(*v));
    }
    for (j, (z, v)) in z_coords.iter().zip(g.iter()).enumerate() {
        let _ = writeln!(out, "g,{j},{},{}", fmt_f64(*z), fmt_f64(*v));
    }
    out
}

/// Rows of a generic numeric table.
pub fn table_csv(meta: &[(&str, String)], columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "{}", columns.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV reading (for the plot subcommand)

/// One plottable series extracted from a spectra CSV.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Parse a spectra CSV produced by [`spectra_csv`] back into series.
pub fn read_spectra_csv(text: &str) -> Result<Vec<Series>> {
    let mut series: Vec<Series> = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            // column header line
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected 4 csv fields, got {}", fields.len()),
            });
        }
        let x: f64 = fields[1]
            .parse()
            .map_err(|_| Error::Parse { line: idx + 1, msg: "bad abscissa".into() })?;
        let y: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse { line: idx + 1, msg: "bad value".into() })?;
        let label = fields[3].to_string();
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series { label, points: vec![(x, y)] }),
        }
    }
    if series.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no data series in csv".into() });
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// SVG plotting

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log-ordinate line plot of the series, styled like a two-panel spectral
/// figure: one polyline per series, fixed canvas, 5% padded auto ranges.
/// Purely a function of the input data.
pub fn plot_svg(title: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Domain("nothing to plot: empty series".into()));
    }
    let (width, height) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if y > 0.0 {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
    }
    if !(y_min.is_finite() && y_max.is_finite()) {
        return Err(Error::Domain("no positive values to plot on a log axis".into()));
    }
    let pad_x = 0.05 * (x_max - x_min).max(1e-300);
    let (x_lo, x_hi) = (x_min - pad_x, x_max + pad_x);
    let (ly_min, ly_max) = (y_min.log10(), y_max.log10());
    let pad_y = 0.05 * (ly_max - ly_min).max(0.1);
    let (y_lo, y_hi) = (ly_min - pad_y, ly_max + pad_y);

    let px = |x: f64| ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr);
    let py = |y: f64| height - mb - (y.log10() - y_lo) / (y_hi - y_lo) * (height - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="monospace" font-size="14">{title}</text>"#,
        ml
    );

    // frame
    let _ = writeln!(
        svg,
        r#"<rect x="{ml}" y="{mt}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        width - ml - mr,
        height - mt - mb
    );

    // decade gridlines and labels on the log axis
    let dec_lo = y_lo.floor() as i64;
    let dec_hi = y_hi.ceil() as i64;
    for d in dec_lo..=dec_hi {
        let y = 10f64.powi(d as i32);
        let yy = py(y);
        if yy >= mt && yy <= height - mb {
            let _ = writeln!(
                svg,
                r##"<line x1="{ml}" y1="{yy:.2}" x2="{:.1}" y2="{yy:.2}" stroke="#dddddd"/>"##,
                width - mr
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="end">1e{d}</text>"#,
                ml - 6.0,
                yy + 4.0
            );
        }
    }
    // abscissa ticks
    for k in 0..=4 {
        let x = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
        let xx = px(x);
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.2}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{x:.2}</text>"#,
            height - mb + 18.0
        );
    }

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in s.points.iter().filter(|(_, y)| *y > 0.0) {
            let cmd = if path.is_empty() { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" fill="{color}">{}</text>"#,
            width - mr - 150.0,
            mt + 16.0 + 14.0 * si as f64,
            s.label
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
