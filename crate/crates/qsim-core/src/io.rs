//! CSV and JSON export formats shared by the command-line tools.
//!
//! Floats are written with Rust's shortest round-trip formatting, so repeated
//! runs with identical inputs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::Fringe;
use crate::qcore::{DensityMatrix9, Mat9, C64};
use crate::ring::SpectralResponse;
use crate::{Error, Result};

/// Column names of the nine coincidence pairs, signal-major port order.
pub const PORT_PAIR_COLUMNS: [&str; 9] = [
    "cc_12", "cc_14", "cc_16", "cc_32", "cc_34", "cc_36", "cc_52", "cc_54", "cc_56",
];

fn fmt_f64(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("non-finite value {v} in output")));
    }
    if v == 0.0 {
        return Ok("0".to_string());
    }
    Ok(format!("{v}"))
}

/// Transmission spectrum: one row per wavelength with complex drop/through
/// responses split into power and phase.
pub fn write_spectrum_csv(path: &Path, resp: &SpectralResponse) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "wavelength_nm",
        "drop_power",
        "through_power",
        "drop_phase",
        "through_phase",
    ])?;
    for (i, wl) in resp.wavelengths_nm.iter().enumerate() {
        w.write_record([
            fmt_f64(*wl)?,
            fmt_f64(resp.drop_power(i))?,
            fmt_f64(resp.through_power(i))?,
            fmt_f64(resp.drop[i].arg())?,
            fmt_f64(resp.through[i].arg())?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per scanned phase, nine coincidence columns in port order.
pub fn write_port_series_csv(
    path: &Path,
    phases_rad: &[f64],
    values: &[[[f64; 3]; 3]],
) -> Result<()> {
    if phases_rad.len() != values.len() {
        return Err(Error::Domain(
            "phase grid and value series differ in length".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["phase_rad"];
    header.extend_from_slice(&PORT_PAIR_COLUMNS);
    w.write_record(&header)?;
    for (phase, m) in phases_rad.iter().zip(values) {
        let mut row = vec![fmt_f64(*phase)?];
        for r in 0..3 {
            for c in 0..3 {
                row.push(fmt_f64(m[r][c])?);
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fringe scan in the port-series layout.
pub fn write_fringe_csv(path: &Path, fringe: &Fringe) -> Result<()> {
    write_port_series_csv(path, &fringe.phases_rad, &fringe.values)
}

/// Two-phase grid in long format: one row per (pz1, pz2) point, row-major in
/// pz1, with the nine coincidence columns in port order.
pub fn write_phase_grid_csv(
    path: &Path,
    pz1_rad: &[f64],
    pz2_rad: &[f64],
    values: &[Vec<[[f64; 3]; 3]>],
) -> Result<()> {
    if values.len() != pz1_rad.len() || values.iter().any(|row| row.len() != pz2_rad.len()) {
        return Err(Error::Domain(
            "grid values do not match the phase axes".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["pz1_rad", "pz2_rad"];
    header.extend_from_slice(&PORT_PAIR_COLUMNS);
    w.write_record(&header)?;
    for (p1, row) in pz1_rad.iter().zip(values) {
        for (p2, m) in pz2_rad.iter().zip(row) {
            let mut rec = vec![fmt_f64(*p1)?, fmt_f64(*p2)?];
            for r in 0..3 {
                for c in 0..3 {
                    rec.push(fmt_f64(m[r][c])?);
                }
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Labeled numeric table: one key column plus named value columns.
pub fn write_labeled_csv(
    path: &Path,
    key_header: &str,
    value_headers: &[&str],
    rows: &[(String, Vec<f64>)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![key_header];
    header.extend_from_slice(value_headers);
    w.write_record(&header)?;
    for (label, values) in rows {
        if values.len() != value_headers.len() {
            return Err(Error::Domain(format!(
                "row \"{label}\" has {} values for {} columns",
                values.len(),
                value_headers.len()
            )));
        }
        let mut row = vec![label.clone()];
        for v in values {
            row.push(fmt_f64(*v)?);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Tomography schedule counts: setting index, label, observed counts.
pub fn write_counts_csv(path: &Path, labels: &[String], counts: &[u64]) -> Result<()> {
    if labels.len() != counts.len() {
        return Err(Error::Domain("labels and counts differ in length".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["setting", "label", "counts"])?;
    for (i, (label, n)) in labels.iter().zip(counts).enumerate() {
        w.write_record([i.to_string(), label.clone(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityMatrixFile {
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

/// Density matrix as JSON with separate real and imaginary 9×9 blocks.
pub fn write_density_json(path: &Path, rho: &DensityMatrix9) -> Result<()> {
    let m = rho.matrix();
    let file = DensityMatrixFile {
        real: (0..9)
            .map(|r| (0..9).map(|c| m[(r, c)].re).collect())
            .collect(),
        imag: (0..9)
            .map(|r| (0..9).map(|c| m[(r, c)].im).collect())
            .collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a density matrix written by [`write_density_json`], revalidating it.
pub fn read_density_json(path: &Path) -> Result<DensityMatrix9> {
    let file: DensityMatrixFile = serde_json::from_reader(File::open(path)?)?;
    if file.real.len() != 9
        || file.imag.len() != 9
        || file.real.iter().any(|r| r.len() != 9)
        || file.imag.iter().any(|r| r.len() != 9)
    {
        return Err(Error::InvalidDensity("JSON blocks must be 9x9".into()));
    }
    let m = Mat9::from_fn(|r, c| C64::new(file.real[r][c], file.imag[r][c]));
    DensityMatrix9::new(m)
}

/// Density matrix as CSV: row index plus alternating re/im columns.
pub fn write_density_csv(path: &Path, rho: &DensityMatrix9) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["row".to_string()];
    for c in 0..9 {
        header.push(format!("re_{c}"));
        header.push(format!("im_{c}"));
    }
    w.write_record(&header)?;
    let m = rho.matrix();
    for r in 0..9 {
        let mut row = vec![r.to_string()];
        for c in 0..9 {
            row.push(fmt_f64(m[(r, c)].re)?);
            row.push(fmt_f64(m[(r, c)].im)?);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON report with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::build_state;
    use crate::qcore::fidelity;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    #[test]
    fn spectrum_csv_layout() {
        let resp = SpectralResponse {
            wavelengths_nm: vec![1550.0, 1550.5],
            drop: vec![C64::new(0.5, 0.0), C64::new(0.0, 0.1)],
            through: vec![C64::new(0.0, -0.2), C64::new(0.9, 0.0)],
        };
        let dir = tmp();
        let path = dir.path().join("spectrum.csv");
        write_spectrum_csv(&path, &resp).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "wavelength_nm,drop_power,through_power,drop_phase,through_phase"
        );
        assert_eq!(lines.count(), 2);
        assert!(text.contains("0.25"));
    }

    #[test]
    fn fringe_csv_header_is_port_ordered() {
        let fringe = Fringe::new(
            crate::experiment::FringeKind::Qubit,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![[[0.0; 3]; 3]; 7],
            (0, 0),
        )
        .unwrap();
        let dir = tmp();
        let path = dir.path().join("fringe.csv");
        write_fringe_csv(&path, &fringe).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("phase_rad,cc_12,cc_14,cc_16,cc_32,cc_34,cc_36,cc_52,cc_54,cc_56\n")
        );
    }

    #[test]
    fn density_json_roundtrip_and_validation() {
        let rho = crate::qcore::DensityMatrix9::from_pure(
            &build_state([1.0; 3], [0.3, -0.7]).unwrap().ket(),
        )
        .mix_white(0.05)
        .unwrap();
        let dir = tmp();
        let path = dir.path().join("rho.json");
        write_density_json(&path, &rho).unwrap();
        let back = read_density_json(&path).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                let d = (rho.matrix()[(r, c)] - back.matrix()[(r, c)]).norm();
                assert!(d < 1e-12, "entry ({r},{c}) drifted by {d}");
            }
        }
        let target = build_state([1.0; 3], [0.3, -0.7]).unwrap().ket();
        assert!((fidelity(&back, &target) - fidelity(&rho, &target)).abs() < 1e-12);

        std::fs::write(dir.path().join("bad.json"), "{\"real\": [], \"imag\": []}").unwrap();
        assert!(read_density_json(&dir.path().join("bad.json")).is_err());
    }

    #[test]
    fn labeled_csv_checks_column_count() {
        let dir = tmp();
        let path = dir.path().join("table.csv");
        let rows = vec![("A1B1".to_string(), vec![0.8293, 0.0595])];
        write_labeled_csv(&path, "setting", &["p_equal", "p_other"], &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("setting,p_equal,p_other\n"));
        assert!(text.contains("A1B1,0.8293,0.0595"));

        let bad = vec![("X".to_string(), vec![1.0])];
        assert!(write_labeled_csv(&path, "k", &["a", "b"], &bad).is_err());
    }

    #[test]
    fn reruns_are_byte_identical_and_nonfinite_rejected() {
        let dir = tmp();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let phases = vec![0.0, 0.1, 0.2];
        let values = vec![[[0.125; 3]; 3]; 3];
        write_port_series_csv(&p1, &phases, &values).unwrap();
        write_port_series_csv(&p2, &phases, &values).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let bad = vec![[[f64::NAN; 3]; 3]; 3];
        assert!(write_port_series_csv(&p1, &phases, &bad).is_err());
    }

    #[test]
    fn phase_grid_csv_is_row_major_in_pz1() {
        let dir = tmp();
        let path = dir.path().join("grid.csv");
        let pz1 = vec![0.0, 1.0];
        let pz2 = vec![0.5];
        let values = vec![vec![[[0.25; 3]; 3]], vec![[[0.75; 3]; 3]]];
        write_phase_grid_csv(&path, &pz1, &pz2, &values).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("pz1_rad,pz2_rad,cc_12"));
        assert!(lines.next().unwrap().starts_with("0,0.5,0.25"));
        assert!(lines.next().unwrap().starts_with("1,0.5,0.75"));

        let ragged = vec![vec![[[0.0; 3]; 3]]; 3];
        assert!(write_phase_grid_csv(&path, &pz1, &pz2, &ragged).is_err());
    }

    #[test]
    fn counts_csv_layout() {
        let dir = tmp();
        let path = dir.path().join("counts.csv");
        let labels = vec!["0|0".to_string(), "0+i1|2".to_string()];
        write_counts_csv(&path, &labels, &[10, 20]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("setting,label,counts\n"));
        assert!(text.contains("1,0+i1|2,20"));
        assert!(write_counts_csv(&path, &labels, &[1]).is_err());
    }
}
