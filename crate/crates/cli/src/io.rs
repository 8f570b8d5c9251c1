//! CSV reading and writing for point clouds and ridge results.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use densridge::ridge_search::RidgeResult;
use densridge::PointCloud;

use crate::error::{CliError, Result};

/// Closed interval on one input column, given by header name or 1-based index.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub column: String,
    pub lo: f64,
    pub hi: f64,
}

impl std::str::FromStr for Filter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.rsplitn(3, ':');
        let (hi, lo, column) = match (parts.next(), parts.next(), parts.next()) {
            (Some(hi), Some(lo), Some(col)) if !col.is_empty() => (hi, lo, col),
            _ => return Err(format!("filter '{s}' is not of the form col:lo:hi")),
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in filter '{s}'"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in filter '{s}'"))?;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(format!("filter '{s}' has an empty range"));
        }
        Ok(Filter {
            column: column.trim().to_string(),
            lo,
            hi,
        })
    }
}

fn resolve_column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    if let Some(i) = header.iter().position(|h| h == name) {
        return Ok(i);
    }
    match name.parse::<usize>() {
        Ok(k) if k >= 1 && k <= header.len() => Ok(k - 1),
        _ => Err(CliError::Input(format!(
            "{}: no column '{name}' (columns: {})",
            path.display(),
            header.join(", ")
        ))),
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn header_of(reader: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    let header = reader.headers().map_err(|e| CliError::csv(path, e))?;
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Input(format!("{}: missing header row", path.display())));
    }
    Ok(header)
}

fn parse_field(field: &str, path: &Path, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("column '{column}': '{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("column '{column}': non-finite value"),
        });
    }
    Ok(v)
}

/// Reads the numeric CSV at `path`, keeps rows inside every filter and
/// returns the selected columns (all of them when `columns` is empty) in file
/// order, labelled with their header names.
pub fn ingest(path: &Path, columns: &[String], filters: &[Filter]) -> Result<PointCloud> {
    let mut reader = open(path)?;
    let header = header_of(&mut reader, path)?;
    let selected: Vec<usize> = if columns.is_empty() {
        (0..header.len()).collect()
    } else {
        columns
            .iter()
            .map(|c| resolve_column(&header, c, path))
            .collect::<Result<_>>()?
    };
    let bounds: Vec<(usize, f64, f64)> = filters
        .iter()
        .map(|f| Ok((resolve_column(&header, &f.column, path)?, f.lo, f.hi)))
        .collect::<Result<_>>()?;

    let mut coords = Vec::new();
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(CliError::csv(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(header.len());
        for (j, field) in record.iter().enumerate() {
            values.push(parse_field(field, path, line, &header[j])?);
        }
        rows += 1;
        if bounds.iter().all(|&(j, lo, hi)| values[j] >= lo && values[j] <= hi) {
            coords.extend(selected.iter().map(|&j| values[j]));
        }
    }
    if coords.is_empty() {
        return Err(CliError::Input(format!(
            "{}: zero rows left after filtering ({rows} read)",
            path.display()
        )));
    }
    let labels = selected.iter().map(|&j| header[j].clone()).collect();
    Ok(PointCloud::new(selected.len(), coords)?.with_labels(labels)?)
}

/// Decimal form with 17 significant digits; parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(mut w: std::io::BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes a cloud with its labels (or `x_1..x_d`) as the header.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> = match cloud.labels() {
        Some(l) => l.to_vec(),
        None => (1..=cloud.dim()).map(|j| format!("x_{j}")).collect(),
    };
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for p in cloud.iter() {
        let row: Vec<String> = p.iter().map(|&v| fmt_num(v)).collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    finish(w, path)
}

pub fn results_header(d: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(4 * d + 3);
    h.extend((1..=d).map(|j| format!("start_{j}")));
    h.extend((1..=d).map(|j| format!("point_{j}")));
    h.push("iterations".into());
    h.push("converged".into());
    h.extend((1..=d).map(|j| format!("int_lo_{j}")));
    h.extend((1..=d).map(|j| format!("int_hi_{j}")));
    h.push("flat_top".into());
    h
}

/// Writes one row per result. Interval and `flat_top` fields are empty when
/// the variant does not produce an interval.
pub fn write_results(path: &Path, d: usize, results: &[RidgeResult]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", results_header(d).join(",")).map_err(io)?;
    for r in results {
        let mut row: Vec<String> = r.start.iter().chain(&r.point).map(|&v| fmt_num(v)).collect();
        row.push(r.iterations.to_string());
        row.push(r.converged.to_string());
        match &r.interval {
            Some((lo, hi)) => {
                row.extend(lo.iter().chain(hi).map(|&v| fmt_num(v)));
                row.push(r.flat_top.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 2 * d + 1)),
        }
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    finish(w, path)
}

/// Writes `start_index,iteration,x_1..x_d` for every recorded iterate.
pub fn write_trace(path: &Path, d: usize, results: &[RidgeResult]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    let mut header = vec!["start_index".to_string(), "iteration".to_string()];
    header.extend((1..=d).map(|j| format!("x_{j}")));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, r) in results.iter().enumerate() {
        for (k, x) in r.trace.iter().flatten().enumerate() {
            let coords: Vec<String> = x.iter().map(|&v| fmt_num(v)).collect();
            writeln!(w, "{i},{k},{}", coords.join(",")).map_err(io)?;
        }
    }
    finish(w, path)
}

/// One parsed row of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub start: Vec<f64>,
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
    pub flat_top: Option<bool>,
}

fn parse_bool(field: &str, path: &Path, line: u64) -> Result<bool> {
    match field {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CliError::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("'{other}' is not true/false"),
        }),
    }
}

/// Reads a results file written by [`write_results`].
pub fn read_results(path: &Path) -> Result<(usize, Vec<ResultRow>)> {
    let mut reader = open(path)?;
    let header = header_of(&mut reader, path)?;
    let d = header.iter().filter(|h| h.starts_with("point_")).count();
    if d == 0 || header != results_header(d) {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "header does not match the results layout".into(),
        });
    }
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(CliError::csv(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        let f: Vec<&str> = record.iter().collect();
        if f.len() != header.len() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected {} fields, found {}", header.len(), f.len()),
            });
        }
        let nums = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
            range.map(|j| parse_field(f[j], path, line, &header[j])).collect()
        };
        let start = nums(0..d)?;
        let point = nums(d..2 * d)?;
        let iterations = f[2 * d].parse().map_err(|_| CliError::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("'{}' is not an iteration count", f[2 * d]),
        })?;
        let converged = parse_bool(f[2 * d + 1], path, line)?;
        let tail = &f[2 * d + 2..];
        let (interval, flat_top) = if tail.iter().all(|s| s.is_empty()) {
            (None, None)
        } else {
            let lo = nums(2 * d + 2..3 * d + 2)?;
            let hi = nums(3 * d + 2..4 * d + 2)?;
            (Some((lo, hi)), Some(parse_bool(f[4 * d + 2], path, line)?))
        };
        rows.push(ResultRow {
            start,
            point,
            iterations,
            converged,
            interval,
            flat_top,
        });
    }
    Ok((d, rows))
}

pub fn path_with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_parsing() {
        let f: Filter = "ra:130:180".parse().unwrap();
        assert_eq!(f, Filter { column: "ra".into(), lo: 130.0, hi: 180.0 });
        let f: Filter = "2:-1.5:2e1".parse().unwrap();
        assert_eq!((f.lo, f.hi), (-1.5, 20.0));
        assert!("ra:5:1".parse::<Filter>().is_err());
        assert!("ra:5".parse::<Filter>().is_err());
        assert!(":1:2".parse::<Filter>().is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 5e-324, f64::MAX, 0.0, 123456.789] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            results_header(2).join(","),
            "start_1,start_2,point_1,point_2,iterations,converged,int_lo_1,int_lo_2,int_hi_1,int_hi_2,flat_top"
        );
    }
}
