//! CSV and plot-data emission.
//!
//! Floats are written with six decimals, so a CSV round trip reproduces the
//! rows up to that rounding. Empty cells stand for `None`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Method, MetricStatus, Metrics};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "demand_kbps",
    "latency_ms",
    "method",
    "status",
    "embb_sum_kbps",
    "urllc_coverage",
    "fully_covered",
    "wall_time_s",
    "nodes",
];

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (a, b) => a.is_some().cmp(&b.is_some()),
    }
}

pub(super) fn sort_rows(rows: &mut [Metrics]) {
    rows.sort_by(|a, b| {
        cmp_opt(a.demand_kbps, b.demand_kbps)
            .then(cmp_opt(a.latency_ms, b.latency_ms))
            .then(a.method.cmp(&b.method))
    });
}

fn fmt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn fmt_u<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record(m: &Metrics) -> [String; 9] {
    [
        fmt_f(m.demand_kbps),
        fmt_f(m.latency_ms),
        m.method.to_string(),
        m.status.as_str().to_string(),
        fmt_f(m.embb_sum_kbps),
        fmt_f(m.urllc_coverage),
        fmt_u(m.fully_covered),
        fmt_f(m.wall_time_s),
        fmt_u(m.nodes),
    ]
}

fn write_rows<W: std::io::Write>(rows: &[Metrics], out: W) -> std::result::Result<(), csv::Error> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for m in &sorted {
        w.write_record(record(m))?;
    }
    w.flush()?;
    Ok(())
}

/// The CSV text for `rows`, sorted by (demand, latency, method).
pub fn csv_string(rows: &[Metrics]) -> String {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf).expect("writing CSV to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Writes `rows` to `path` as CSV. Fails on an empty row set.
pub fn emit_csv(rows: &[Metrics], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no rows to write".into()));
    }
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    write_rows(rows, file).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })
}

fn parse_opt<T: std::str::FromStr>(cell: &str, row: usize, column: &str) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| Error::CsvParse {
        row,
        detail: format!("bad {column} value {cell:?}"),
    })
}

/// Parses CSV text written by [`csv_string`] or [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<Metrics>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::CsvParse {
        row: 0,
        detail: e.to_string(),
    })?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::CsvParse {
            row: 0,
            detail: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::CsvParse {
            row,
            detail: e.to_string(),
        })?;
        let method = Method::parse(&rec[2]).ok_or_else(|| Error::CsvParse {
            row,
            detail: format!("unknown method {:?}", &rec[2]),
        })?;
        let status = MetricStatus::parse(&rec[3]).ok_or_else(|| Error::CsvParse {
            row,
            detail: format!("unknown status {:?}", &rec[3]),
        })?;
        rows.push(Metrics {
            demand_kbps: parse_opt(&rec[0], row, CSV_HEADER[0])?,
            latency_ms: parse_opt(&rec[1], row, CSV_HEADER[1])?,
            method,
            status,
            embb_sum_kbps: parse_opt(&rec[4], row, CSV_HEADER[4])?,
            urllc_coverage: parse_opt(&rec[5], row, CSV_HEADER[5])?,
            fully_covered: parse_opt(&rec[6], row, CSV_HEADER[6])?,
            wall_time_s: parse_opt(&rec[7], row, CSV_HEADER[7])?,
            nodes: parse_opt(&rec[8], row, CSV_HEADER[8])?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<Metrics>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_csv(&text)
}

fn demand_groups(rows: &[Metrics]) -> Result<BTreeMap<u64, (f64, Vec<&Metrics>)>> {
    // Keyed by the bit pattern so equal demands group exactly; positive floats sort the same way.
    let mut groups: BTreeMap<u64, (f64, Vec<&Metrics>)> = BTreeMap::new();
    for m in rows {
        let (Some(d), Some(_)) = (m.demand_kbps, m.latency_ms) else {
            return Err(Error::InvalidConfig(
                "plot data needs demand and latency on every row".into(),
            ));
        };
        groups.entry(d.to_bits()).or_insert_with(|| (d, Vec::new())).1.push(m);
    }
    Ok(groups)
}

/// Gnuplot-style text for one demand: a `# method` block per method with
/// `latency_ms embb_sum_kbps` lines, blocks separated by two blank lines.
/// Points without an allocation are left out.
pub fn plot_series_text(demand_kbps: f64, rows: &[&Metrics]) -> String {
    let mut by_method: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
    for m in rows {
        let entry = by_method.entry(m.method).or_default();
        if let (Some(l), Some(e)) = (m.latency_ms, m.embb_sum_kbps) {
            entry.push((l, e));
        }
    }
    let mut text = String::new();
    let _ = writeln!(text, "# eMBB sum throughput vs URLLC latency tolerance");
    let _ = writeln!(text, "# demand_kbps {demand_kbps:.6}");
    let _ = writeln!(text, "# columns: latency_ms embb_sum_kbps");
    for (method, mut points) in by_method {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let _ = writeln!(text, "\n\n# method {method}");
        for (l, e) in points {
            let _ = writeln!(text, "{l:.6} {e:.6}");
        }
    }
    text
}

/// Writes one `embb_vs_latency_<demand>kbps.dat` file per demand into `dir`.
pub fn emit_plot_data(rows: &[Metrics], dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no rows to plot".into()));
    }
    let groups = demand_groups(rows)?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut paths = Vec::new();
    for (demand, group) in groups.values() {
        let path = dir.join(format!("embb_vs_latency_{demand}kbps.dat"));
        std::fs::write(&path, plot_series_text(*demand, group)).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(d: f64, l: f64, method: Method, embb: Option<f64>) -> Metrics {
        Metrics {
            demand_kbps: Some(d),
            latency_ms: Some(l),
            method,
            status: if embb.is_some() {
                MetricStatus::Optimal
            } else {
                MetricStatus::Infeasible
            },
            embb_sum_kbps: embb,
            urllc_coverage: embb.map(|_| 1.0),
            fully_covered: embb.map(|_| 2),
            wall_time_s: None,
            nodes: Some(17),
        }
    }

    #[test]
    fn csv_is_sorted_with_empty_cells() {
        let rows = [
            row(64.0, 1.0, Method::Heuristic, Some(10.5)),
            row(64.0, 0.25, Method::P0, None),
            row(16.0, 2.0, Method::P1, Some(3.0)),
        ];
        let text = csv_string(&rows);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines[1], "16.000000,2.000000,p1,Optimal,3.000000,1.000000,2,,17");
        assert_eq!(lines[2], "64.000000,0.250000,p0,Infeasible,,,,,17");
        assert!(lines[3].starts_with("64.000000,1.000000,heuristic,"));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(16.0, 0.5, Method::P0, Some(1.25)), row(16.0, 0.5, Method::P1, None)];
        assert_eq!(parse_csv(&csv_string(&rows)).unwrap(), rows);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let mut text = csv_string(&[row(16.0, 0.5, Method::P0, Some(1.0))]);
        text = text.replace(",p0,", ",p9,");
        assert!(matches!(parse_csv(&text), Err(Error::CsvParse { row: 1, .. })));
    }

    #[test]
    fn plot_omits_infeasible_points() {
        let rows = [
            row(64.0, 0.25, Method::P0, None),
            row(64.0, 0.5, Method::P0, Some(5.0)),
            row(64.0, 0.25, Method::Heuristic, Some(4.0)),
        ];
        let refs: Vec<&Metrics> = rows.iter().collect();
        let text = plot_series_text(64.0, &refs);
        assert_eq!(
            text,
            "# eMBB sum throughput vs URLLC latency tolerance\n# demand_kbps 64.000000\n\
             # columns: latency_ms embb_sum_kbps\n\n\n# method p0\n0.500000 5.000000\n\
             \n\n# method heuristic\n0.250000 4.000000\n"
        );
    }

    #[test]
    fn plot_files_per_demand() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [
            row(16.0, 1.0, Method::P0, Some(1.0)),
            row(64.0, 1.0, Method::P0, Some(2.0)),
        ];
        let paths = emit_plot_data(&rows, dir.path()).unwrap();
        let names: Vec<_> = paths.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(names, ["embb_vs_latency_16kbps.dat", "embb_vs_latency_64kbps.dat"]);
        assert!(emit_plot_data(&[], dir.path()).is_err());
        assert!(emit_csv(&[], &dir.path().join("x.csv")).is_err());
    }
}
