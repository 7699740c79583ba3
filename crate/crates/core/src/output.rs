//! CSV, JSON and SVG artifacts. Floats are written with 17 significant digits
//! so that every CSV parses back bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::SectorSpec;

pub const SPECTRUM_HEADER: [&str; 9] = [
    "level_q",
    "block_m",
    "lambda_re",
    "lambda_im",
    "k_re",
    "k_im",
    "multiplicity",
    "residual",
    "in_sector",
];
pub const COUNTING_HEADER: [&str; 6] = ["r", "log_r", "N_toeplitz", "N_annulus", "phi_model", "ratio"];
pub const INDEX_HEADER: [&str; 4] = ["k_re", "k_im", "multiplicity_index", "multiplicity_cluster"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub level_q: usize,
    pub block_m: Option<i64>,
    pub lambda: Complex64,
    pub k: Complex64,
    pub multiplicity: usize,
    pub residual: f64,
    pub in_sector: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingRow {
    pub r: f64,
    pub log_r: f64,
    pub n_toeplitz: usize,
    pub n_annulus: usize,
    pub phi_model: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub k: Complex64,
    pub multiplicity_index: i64,
    pub multiplicity_cluster: usize,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Consistency(format!("csv: {e}"))
}

fn to_csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Consistency(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> Result<String> {
    to_csv(
        SPECTRUM_HEADER,
        rows.iter().map(|r| {
            [
                r.level_q.to_string(),
                r.block_m.map(|m| m.to_string()).unwrap_or_default(),
                fmt_f64(r.lambda.re),
                fmt_f64(r.lambda.im),
                fmt_f64(r.k.re),
                fmt_f64(r.k.im),
                r.multiplicity.to_string(),
                fmt_f64(r.residual),
                r.in_sector.to_string(),
            ]
        }),
    )
}

pub fn counting_csv(rows: &[CountingRow]) -> Result<String> {
    to_csv(
        COUNTING_HEADER,
        rows.iter().map(|r| {
            [
                fmt_f64(r.r),
                fmt_f64(r.log_r),
                r.n_toeplitz.to_string(),
                r.n_annulus.to_string(),
                fmt_opt(r.phi_model),
                fmt_opt(r.ratio),
            ]
        }),
    )
}

pub fn index_csv(rows: &[IndexRow]) -> Result<String> {
    to_csv(
        INDEX_HEADER,
        rows.iter().map(|r| {
            [
                fmt_f64(r.k.re),
                fmt_f64(r.k.im),
                r.multiplicity_index.to_string(),
                r.multiplicity_cluster.to_string(),
            ]
        }),
    )
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let s = rec.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::config(format!("line {line}, column {}", SPECTRUM_HEADER[i]), format!("cannot parse `{s}`")))
}

/// Inverse of [`spectrum_csv`].
pub fn parse_spectrum_csv(text: &str) -> Result<Vec<SpectrumRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SPECTRUM_HEADER) {
        return Err(Error::config("line 1", "unexpected spectrum header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let block = rec.get(1).unwrap_or("");
        rows.push(SpectrumRow {
            level_q: field(&rec, 0, line)?,
            block_m: if block.is_empty() { None } else { Some(field(&rec, 1, line)?) },
            lambda: Complex64::new(field(&rec, 2, line)?, field(&rec, 3, line)?),
            k: Complex64::new(field(&rec, 4, line)?, field(&rec, 5, line)?),
            multiplicity: field(&rec, 6, line)?,
            residual: field(&rec, 7, line)?,
            in_sector: field(&rec, 8, line)?,
        });
    }
    Ok(rows)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Consistency(format!("json: {e}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Corners of ∓e^{iα}C_δ(r, r0) in the k-plane.
pub fn sector_polygon(sec: &SectorSpec) -> [Complex64; 4] {
    let rot = -f64::from(sec.sign_j) * Complex64::from_polar(1.0, sec.alpha);
    let z = [
        Complex64::new(sec.r, -sec.delta * sec.r),
        Complex64::new(sec.r0, -sec.delta * sec.r0),
        Complex64::new(sec.r0, sec.delta * sec.r0),
        Complex64::new(sec.r, sec.delta * sec.r),
    ];
    z.map(|w| rot * w)
}

const SVG_SIZE: f64 = 480.0;

/// k-plane scatter with one polygon per sector overlay.
pub fn render_svg(points: &[Complex64], sectors: &[SectorSpec], title: &str) -> String {
    let mut extent: f64 = 1e-12;
    for p in points {
        extent = extent.max(p.re.abs()).max(p.im.abs());
    }
    for s in sectors {
        for c in sector_polygon(s) {
            extent = extent.max(c.re.abs()).max(c.im.abs());
        }
    }
    extent *= 1.1;
    let half = SVG_SIZE / 2.0;
    let map = |z: Complex64| (half + z.re / extent * half, half - z.im / extent * half);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    );
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<line x1="0" y1="{half}" x2="{SVG_SIZE}" y2="{half}" stroke="#999" stroke-width="0.5"/>"##
    );
    let _ = writeln!(
        s,
        r##"<line x1="{half}" y1="0" x2="{half}" y2="{SVG_SIZE}" stroke="#999" stroke-width="0.5"/>"##
    );
    for sec in sectors {
        let pts: Vec<String> = sector_polygon(sec)
            .iter()
            .map(|&c| {
                let (x, y) = map(c);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#4a90d9" fill-opacity="0.15" stroke="#4a90d9"/>"##,
            pts.join(" ")
        );
    }
    for &p in points {
        let (x, y) = map(p);
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="2.5" fill="#c0392b"/>"##);
    }
    let _ = writeln!(
        s,
        r#"<text x="8" y="16" font-size="12" font-family="sans-serif">k-plane, extent ±{extent:.3e}</text>"#
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip_is_exact() {
        let rows = vec![
            SpectrumRow {
                level_q: 1,
                block_m: Some(-3),
                lambda: Complex64::new(1.9000000000000001, -1e-300),
                k: Complex64::new(0.1 + 1e-17, f64::MIN_POSITIVE),
                multiplicity: 2,
                residual: 3.3e-15,
                in_sector: true,
            },
            SpectrumRow {
                level_q: 0,
                block_m: None,
                lambda: Complex64::new(-0.0, std::f64::consts::PI),
                k: Complex64::new(1.0 / 3.0, -2.0 / 7.0),
                multiplicity: 1,
                residual: 0.0,
                in_sector: false,
            },
        ];
        let text = spectrum_csv(&rows).unwrap();
        let back = parse_spectrum_csv(&text).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.lambda.re.to_bits(), b.lambda.re.to_bits());
            assert_eq!(a.lambda.im.to_bits(), b.lambda.im.to_bits());
            assert_eq!(a.k.re.to_bits(), b.k.re.to_bits());
            assert_eq!(a.k.im.to_bits(), b.k.im.to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn counting_csv_one_row_per_point() {
        let rows: Vec<CountingRow> = (0..10)
            .map(|i| CountingRow {
                r: 10f64.powi(-i),
                log_r: -(i as f64) * 10f64.ln(),
                n_toeplitz: i as usize,
                n_annulus: i as usize,
                phi_model: None,
                ratio: None,
            })
            .collect();
        let text = counting_csv(&rows).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("r,log_r,N_toeplitz,N_annulus,phi_model,ratio\n"));
    }

    #[test]
    fn svg_has_one_polygon_per_sector() {
        let sec = |alpha| SectorSpec {
            alpha,
            sign_j: -1,
            delta: 0.3,
            r: 0.01,
            r0: 0.3,
        };
        let svg = render_svg(&[Complex64::new(0.1, 0.02)], &[sec(0.0), sec(1.0)], "t");
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn bad_spectrum_header_is_rejected() {
        assert!(parse_spectrum_csv("a,b\n1,2\n").is_err());
    }
}
