//! CSV ingestion and export of domains.
//!
//! Format contract: a header row naming the feature columns `f0..f{d-1}`,
//! optionally followed by a final `label` column holding literal +1/−1
//! values; UTF-8, '.' decimal separator, no comments. A file without the
//! label column is an unlabeled target.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::{Domain, Error, Result};

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads one domain from `path`.
pub fn read_domain_csv(path: impl AsRef<Path>) -> Result<Domain> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file, expected a header row"))?;
    let header = header?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let labeled = columns.last() == Some(&"label");
    let d = if labeled {
        columns.len() - 1
    } else {
        columns.len()
    };
    if d == 0 {
        return Err(parse_error(path, 1, "no feature columns in header"));
    }
    for (i, &name) in columns.iter().take(d).enumerate() {
        let expected = format!("f{i}");
        if name != expected {
            return Err(parse_error(
                path,
                1,
                format!("feature column {i} must be named '{expected}', found '{name}'"),
            ));
        }
    }

    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {} cells, found {}", columns.len(), cells.len()),
            ));
        }
        for &cell in cells.iter().take(d) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("non-numeric cell '{cell}'")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line_no, format!("non-finite value '{cell}'")));
            }
            features.push(v);
        }
        if labeled {
            let cell = cells[d];
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("non-numeric label '{cell}'")))?;
            if v != 1.0 && v != -1.0 {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("label must be +1 or -1, found '{cell}'"),
                ));
            }
            labels.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_error(path, 1, "file contains no data rows"));
    }

    let x = DMatrix::from_row_slice(rows, d, &features);
    if labeled {
        Domain::labeled(x, DVector::from_vec(labels))
    } else {
        Domain::unlabeled(x)
    }
}

/// Reads one domain per file; all files must agree on the feature dimension.
pub fn load_domains_csv(paths: &[PathBuf]) -> Result<Vec<Domain>> {
    if paths.is_empty() {
        return Err(Error::Domain("no input files".into()));
    }
    let mut domains = Vec::with_capacity(paths.len());
    for path in paths {
        domains.push(read_domain_csv(path)?);
    }
    let d = domains[0].dim();
    for (domain, path) in domains.iter().zip(paths) {
        if domain.dim() != d {
            return Err(Error::Dimension(format!(
                "{} has {} feature columns, {} has {}",
                paths[0].display(),
                d,
                path.display(),
                domain.dim()
            )));
        }
    }
    Ok(domains)
}

/// Writes a domain in the same format `read_domain_csv` accepts. Values use
/// the shortest decimal representation that round-trips exactly.
pub fn write_domain_csv(domain: &Domain, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    let d = domain.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    if domain.labels().is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..domain.len() {
        let mut cells: Vec<String> = (0..d).map(|j| domain.features()[(i, j)].to_string()).collect();
        if let Some(labels) = domain.labels() {
            cells.push(labels[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
