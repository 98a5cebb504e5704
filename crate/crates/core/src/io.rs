//! CSV and raw little-endian `f64` file formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SourceModel;
use crate::sim::ErleTrace;
use crate::warp::WarpedBand;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// One coefficient per row under an `n,<name>` header. Values use the
/// shortest round-trip representation, so a write/read cycle is exact.
pub fn write_coefficients(path: &Path, name: &str, coeffs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["n", name])
        .map_err(|e| csv_error(path, e))?;
    for (n, c) in coeffs.iter().enumerate() {
        w.write_record([n.to_string(), c.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the last column of a coefficient CSV written by
/// [`write_coefficients`], or a headerless single column.
pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let Some(field) = rec.iter().next_back() else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => {
                return Err(Error::Parse(format!(
                    "{}:{}: non-finite coefficient {v}",
                    path.display(),
                    line + 1
                )))
            }
            Err(_) if line == 0 => {}
            Err(_) => {
                return Err(Error::Parse(format!(
                    "{}:{}: cannot parse {field:?} as a number",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("{}: no coefficients", path.display())));
    }
    Ok(out)
}

/// `omega,value` rows sampled on `ω_k = -π + 2πk/n`. A header row is
/// optional; the first column is checked against the expected grid.
pub fn read_spectrum(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut omega = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 2 columns (omega, value), found {}",
                path.display(),
                line + 1,
                rec.len()
            )));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(w), Ok(v)) => {
                omega.push(w);
                values.push(v);
            }
            _ if line == 0 => {}
            _ => {
                return Err(Error::Parse(format!(
                    "{}:{}: cannot parse row as numbers",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    let grid = SourceModel::grid(values.len());
    if values.is_empty() || omega.iter().zip(&grid).any(|(a, b)| (a - b).abs() > 1e-6) {
        return Err(Error::Parse(format!(
            "{}: omega column must be the uniform grid -pi + 2*pi*k/n",
            path.display()
        )));
    }
    Ok(values)
}

pub fn write_spectrum(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["omega", name])
        .map_err(|e| csv_error(path, e))?;
    for (omega, v) in SourceModel::grid(values.len()).iter().zip(values) {
        w.write_record([omega.to_string(), v.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_f64(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_raw_f64(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Samples from `.f64`/`.raw` (little-endian) or CSV files.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f64") | Some("raw") | Some("bin") => read_raw_f64(path),
        _ => read_coefficients(path),
    }
}

pub fn write_trace(path: &Path, trace: &ErleTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["t_seconds", "erle_db"])
        .map_err(|e| csv_error(path, e))?;
    for (t, e) in trace.time.iter().zip(&trace.erle_db) {
        w.write_record([t.to_string(), e.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_band_row(band: &WarpedBand) -> [String; 3] {
    [
        band.index.to_string(),
        format!("{:.4}", band.omega_l),
        format!("{:.4}", band.omega_h),
    ]
}

pub fn write_bands(path: &Path, bands: &[WarpedBand]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["band", "omega_l", "omega_h"])
        .map_err(|e| csv_error(path, e))?;
    for b in bands {
        w.write_record(format_band_row(b))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table with a header row, full precision.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("warpbank-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn coefficients_round_trip_bit_exact() {
        let c = vec![0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE];
        let p = temp("c.csv");
        write_coefficients(&p, "h", &c).unwrap();
        let back = read_coefficients(&p).unwrap();
        assert_eq!(
            c.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn raw_round_trip() {
        let c = vec![1.5, -2.25, std::f64::consts::PI];
        let p = temp("c.f64");
        write_raw_f64(&p, &c).unwrap();
        assert_eq!(read_samples(&p).unwrap(), c);
        std::fs::write(&p, [0u8; 7]).unwrap();
        assert!(read_raw_f64(&p).is_err());
    }

    #[test]
    fn malformed_coefficients_report_line() {
        let p = temp("bad.csv");
        std::fs::write(&p, "n,h\n0,0.5\n1,abc\n").unwrap();
        let err = read_coefficients(&p).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
    }

    #[test]
    fn spectrum_grid_checked() {
        let p = temp("s.csv");
        write_spectrum(&p, "pxx", &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(read_spectrum(&p).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        std::fs::write(&p, "omega,pxx\n0.0,1.0\n1.0,2.0\n").unwrap();
        assert!(read_spectrum(&p).is_err());
    }
}
