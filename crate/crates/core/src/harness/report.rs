use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use super::ExperimentRecord;
use crate::{Error, Result};

/// One header line, then one row per record. Failed records keep their
/// identifying columns and leave the measurements empty.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(out);
    let k = records.iter().map(|r| r.params.k).max().unwrap_or(0);
    let mut header = vec!["family".to_string(), "s".into(), "h_fine".into()];
    header.extend((1..=k).map(|j| format!("lam{j}")));
    header.extend((1..=k).map(|j| format!("lam{j}B")));
    header.extend(["d", "d_err", "eps", "ratio21", "linf_margin", "status"].map(String::from));
    out.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![r.params.family.clone(), format!("{}", r.params.s)];
        match &r.measured {
            Some(m) => {
                row.push(format!("{}", m.h_fine));
                for values in [&m.eigenvalues, &m.ball] {
                    row.extend((0..k).map(|j| values.get(j).map(|v| format!("{v}")).unwrap_or_default()));
                }
                row.push(format!("{}", m.d));
                row.push(format!("{}", m.d_err));
                row.push(format!("{}", m.eps));
                row.push(m.ratio21.map(|v| format!("{v}")).unwrap_or_default());
                row.push(format!("{}", m.linf_margin));
            }
            None => row.extend(std::iter::repeat(String::new()).take(2 * k + 6)),
        }
        row.push(r.status.as_str().to_string());
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("csv: {other:?}")),
    }
}

pub fn write_jsonl<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Invalid(format!("record on line {}: {e}", i + 1)))?);
    }
    Ok(records)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log scatter of named series; nonpositive points are dropped.
pub fn plot_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 440.0, 60.0);
    let pts = || series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0 > 0.0 && p.1 > 0.0);
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = pts().map(|p| f(p).log10()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo.is_finite() {
            (lo.floor(), hi.ceil().max(lo.floor() + 1.0))
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| pad + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for e in (x0 as i32)..=(x1 as i32) {
        let x = sx(10f64.powi(e));
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="middle">1e{e}</text>"#, h - pad + 16.0);
    }
    for e in (y0 as i32)..=(y1 as i32) {
        let y = sy(10f64.powi(e));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">1e{e}</text>"#, pad - 6.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, (name, data)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in data.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0) {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - pad - 150.0,
            pad + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `deficit_vs_asymmetry.svg` and `higher_deficits.svg` into `dir`.
pub fn write_plots(records: &[ExperimentRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut by_family: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut higher: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let Some(m) = &r.measured else { continue };
        let name = format!("{} ({}d)", r.params.family, r.params.spec.dim);
        let slot = match by_family.iter().position(|s| s.0 == name) {
            Some(i) => i,
            None => {
                by_family.push((name.clone(), Vec::new()));
                higher.push((name, Vec::new()));
                by_family.len() - 1
            }
        };
        by_family[slot].1.push((m.d, m.deficit_first));
        higher[slot].1.push((m.deficit_first, m.deficit_last.abs()));
    }
    let files = [
        ("deficit_vs_asymmetry.svg", plot_svg("first eigenvalue deficit", "d", "λ_1 - λ_1(B)", &by_family)),
        ("higher_deficits.svg", plot_svg("last requested eigenvalue", "λ_1 deficit", "|λ_k - λ_k(B)|", &higher)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}
