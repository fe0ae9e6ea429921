//! Readers and writers for the plain-text formats the CLI speaks:
//!
//! - MAF file: one decimal per line, m lines;
//! - genotype file: header-less CSV, n rows by m columns, raw counts
//!   (0/1/2) or standardized reals;
//! - phenotype file: one real per line;
//! - subset file: one 1-based SNP index per line;
//! - LD / kernel matrices: header-less CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{LDMatrix, MafVector, RawGenotypeMatrix};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let _ = i;
        out.push(line);
    }
    Ok(out)
}

/// One float per non-empty line.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("expected a number, found {t:?}")))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(parse_err(path, 1, "file contains no values"));
    }
    Ok(out)
}

pub fn write_vector(path: &Path, values: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for v in values {
        writeln!(w, "{v}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn read_maf_file(path: &Path) -> Result<MafVector> {
    MafVector::new(read_vector(path)?)
}

/// Header-less CSV of reals; all rows must have the same width.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in t.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(path, i + 1, format!("expected a number, found {:?}", field.trim()))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "matrix file is empty"));
    }
    let n = rows.len();
    let m = rows[0].len();
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| format!("{}", matrix[(i, j)]))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Raw genotype CSV (0/1/2 integers) paired with a MAF vector.
pub fn read_raw_genotypes_csv(path: &Path, mafs: MafVector) -> Result<RawGenotypeMatrix> {
    let dense = read_matrix_csv(path)?;
    let mut counts = DMatrix::<u8>::zeros(dense.nrows(), dense.ncols());
    for i in 0..dense.nrows() {
        for j in 0..dense.ncols() {
            let v = dense[(i, j)];
            if v != 0.0 && v != 1.0 && v != 2.0 {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("raw genotype must be 0, 1 or 2; found {v}"),
                ));
            }
            counts[(i, j)] = v as u8;
        }
    }
    RawGenotypeMatrix::new(counts, mafs)
}

pub fn write_raw_genotypes_csv(path: &Path, raw: &RawGenotypeMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..raw.n() {
        let row: Vec<String> = (0..raw.m())
            .map(|j| format!("{}", raw.counts()[(i, j)]))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// LD matrix from a dense header-less CSV (single block).
pub fn read_ld_csv(path: &Path) -> Result<LDMatrix> {
    LDMatrix::from_dense(read_matrix_csv(path)?)
}

/// Subset file: one 1-based index per line, returned 0-based ascending.
pub fn read_subset_file(path: &Path, m: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::new();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let v: usize = t
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("expected an index, found {t:?}")))?;
        if v == 0 || v > m {
            return Err(parse_err(
                path,
                i + 1,
                format!("index {v} out of range 1..={m}"),
            ));
        }
        idx.push(v - 1);
    }
    if idx.is_empty() {
        return Err(parse_err(path, 1, "subset file contains no indices"));
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

/// Effects file: either one value per line, or the CSV written by the
/// simulator with an `index,u,psi,causal` header (the `u` column is read).
pub fn read_effects_file(path: &Path) -> Result<DVector<f64>> {
    let lines = read_lines(path)?;
    let has_header = lines
        .first()
        .map(|l| l.trim_start().starts_with("index,"))
        .unwrap_or(false);
    if !has_header {
        return Ok(DVector::from_vec(read_vector(path)?));
    }
    let mut values = Vec::new();
    for (i, raw) in lines.iter().enumerate().skip(1) {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() < 2 {
            return Err(parse_err(path, i + 1, "expected index,u[,psi,causal]"));
        }
        let v: f64 = fields[1].trim().parse().map_err(|_| {
            parse_err(path, i + 1, format!("expected a number, found {:?}", fields[1]))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_err(path, 1, "effects file contains no values"));
    }
    Ok(DVector::from_vec(values))
}

/// Effects CSV with full detail: index (1-based), effect, draw variance,
/// causal flag.
pub fn write_effects_csv(path: &Path, u: &crate::model::EffectVector) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "index,u,psi,causal").map_err(|e| io_err(path, e))?;
    let mut psi_of = std::collections::HashMap::new();
    for (k, &j) in u.causal_set().iter().enumerate() {
        psi_of.insert(j, u.psi()[k]);
    }
    for j in 0..u.len() {
        let (psi, causal) = match psi_of.get(&j) {
            Some(&p) => (p, 1),
            None => (0.0, 0),
        };
        writeln!(w, "{},{},{},{}", j + 1, u.u()[j], psi, causal).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn vector_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        write_vector(&p, &[1.5, -2.25, 0.0]).unwrap();
        assert_eq!(read_vector(&p).unwrap(), vec![1.5, -2.25, 0.0]);
        std::fs::write(&p, "1.0\nnot-a-number\n").unwrap();
        let err = read_vector(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn matrix_roundtrip_and_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        std::fs::write(&p, "1,2,3\n4,5\n").unwrap();
        assert!(matches!(
            read_matrix_csv(&p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn subset_file_is_one_based() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        std::fs::write(&p, "3\n1\n8\n").unwrap();
        assert_eq!(read_subset_file(&p, 10).unwrap(), vec![0, 2, 7]);
        std::fs::write(&p, "0\n").unwrap();
        assert!(read_subset_file(&p, 10).is_err());
        std::fs::write(&p, "11\n").unwrap();
        assert!(read_subset_file(&p, 10).is_err());
    }

    #[test]
    fn effects_file_both_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        std::fs::write(&p, "0.5\n-0.25\n").unwrap();
        assert_eq!(
            read_effects_file(&p).unwrap(),
            DVector::from_vec(vec![0.5, -0.25])
        );
        let mut u = DVector::zeros(3);
        u[1] = 0.7;
        let effects =
            crate::model::EffectVector::new(u, vec![1], vec![0.3], 0.3).unwrap();
        write_effects_csv(&p, &effects).unwrap();
        let back = read_effects_file(&p).unwrap();
        assert_eq!(back, DVector::from_vec(vec![0.0, 0.7, 0.0]));
    }

    #[test]
    fn raw_genotype_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        std::fs::write(&p, "0,1\n2,1\n").unwrap();
        let mafs = MafVector::new(vec![0.3, 0.4]).unwrap();
        let raw = read_raw_genotypes_csv(&p, mafs.clone()).unwrap();
        assert_eq!(raw.n(), 2);
        std::fs::write(&p, "0,3\n").unwrap();
        assert!(read_raw_genotypes_csv(&p, mafs).is_err());
    }
}
