//! CSV formats.
//!
//! * point cloud: one point per row, comma-separated, no header;
//! * weighted measure: same, with the mass as the last column;
//! * graph: `i,j,weight` rows;
//! * geodesic: `# distance=<value>` then the polyline points in order.
//!
//! Floats are written with 17 significant digits (shortest `%g`-style form),
//! which round-trips every `f64`. Readers skip blank lines and lines starting
//! with `#`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::measures::{PointCloud, WeightedMeasure};
use crate::paths::GeodesicResult;

/// `%.17g` formatting.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Joins floats into one CSV row.
pub fn fmt_row(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out
}

/// Parses numeric CSV text into rows of equal arity.
pub fn parse_rows(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                message: format!("non-finite value {bad}"),
            });
        }
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("expected {} columns, found {}", first.len(), values.len()),
                });
            }
        }
        rows.push(values);
    }
    Ok(rows)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let rows = parse_rows(&read_text(path)?, path)?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{}: no points", path.display())));
    }
    PointCloud::from_points(&rows)
}

pub fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.iter() {
        out.push_str(&fmt_row(p));
        out.push('\n');
    }
    out
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_text(path, &cloud_to_csv(cloud))
}

pub fn read_measure(path: &Path) -> Result<WeightedMeasure> {
    let rows = parse_rows(&read_text(path)?, path)?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{}: no atoms", path.display())));
    }
    if rows[0].len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: "a measure row needs coordinates and a mass".into(),
        });
    }
    let masses = rows.iter().map(|r| r[r.len() - 1]).collect();
    let points: Vec<&[f64]> = rows.iter().map(|r| &r[..r.len() - 1]).collect();
    WeightedMeasure::new(PointCloud::from_points(&points)?, masses)
}

pub fn measure_to_csv(mu: &WeightedMeasure) -> String {
    let mut out = String::new();
    for (p, w) in mu.cloud().iter().zip(mu.masses()) {
        out.push_str(&fmt_row(p));
        out.push(',');
        out.push_str(&fmt_f64(*w));
        out.push('\n');
    }
    out
}

pub fn write_measure(path: &Path, mu: &WeightedMeasure) -> Result<()> {
    write_text(path, &measure_to_csv(mu))
}

pub fn graph_to_csv(graph: &MetricGraph) -> String {
    let mut out = String::new();
    for e in graph.edges() {
        let _ = writeln!(out, "{},{},{}", e.i, e.j, fmt_f64(e.weight));
    }
    out
}

pub fn write_graph(path: &Path, graph: &MetricGraph) -> Result<()> {
    write_text(path, &graph_to_csv(graph))
}

pub fn geodesic_to_csv(geo: &GeodesicResult) -> String {
    let mut out = format!("# distance={}\n", fmt_f64(geo.distance));
    for p in &geo.polyline {
        out.push_str(&fmt_row(p));
        out.push('\n');
    }
    out
}

pub fn write_geodesic(path: &Path, geo: &GeodesicResult) -> Result<()> {
    write_text(path, &geodesic_to_csv(geo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_like_percent_17g() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(-2.25), "-2.25");
        assert_eq!(fmt_f64(0.1), "0.10000000000000001");
        assert_eq!(fmt_f64(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt_f64(1e20), "1e+20");
        assert_eq!(fmt_f64(123456.0), "123456");
    }

    #[test]
    fn parse_reports_row_numbers() {
        let p = Path::new("mem.csv");
        let err = parse_rows("1,2\n# c\n3,x\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        let err = parse_rows("1,2\n3,4,5\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
        assert_eq!(parse_rows("\n1, 2\n", p).unwrap(), vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn measure_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.csv");
        let cloud = PointCloud::from_points(&[[0.1, 0.2], [0.3, -0.7]]).unwrap();
        let mu = WeightedMeasure::new(cloud, vec![0.3, 0.7]).unwrap();
        write_measure(&path, &mu).unwrap();
        assert_eq!(read_measure(&path).unwrap(), mu);
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL) {
            let s = fmt_f64(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn cloud_csv_round_trip(pts in prop::collection::vec(prop::array::uniform3(-1e6f64..1e6), 1..20)) {
            let cloud = PointCloud::from_points(&pts).unwrap();
            let text = cloud_to_csv(&cloud);
            let rows = parse_rows(&text, Path::new("t")).unwrap();
            prop_assert_eq!(PointCloud::from_points(&rows).unwrap(), cloud);
        }
    }
}
