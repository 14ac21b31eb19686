//! Companion gnuplot scripts for the CSV outputs.
//!
//! The scripts are self-contained: run `gnuplot <name>.gp` next to the CSV and
//! a PNG with the same stem appears. They are only written under
//! `--gnuplot-stub`.

use std::fmt::Write as _;
use std::path::Path;

use crate::{fatal, CmdResult};

fn stem_names(csv_path: &Path) -> (String, String) {
    let csv = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = csv_path
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    (csv, format!("{stem}.png"))
}

fn write_script(csv_path: &Path, body: &str) -> CmdResult<()> {
    let gp = csv_path.with_extension("gp");
    fatal(std::fs::write(&gp, body).map_err(qsim_core::Error::from))
}

/// Line plot of every value column against the first column.
pub fn series_stub(
    csv_path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    n_value_cols: usize,
) -> CmdResult<()> {
    let (csv, png) = stem_names(csv_path);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator comma");
    let _ = writeln!(s, "set terminal pngcairo size 1100,700");
    let _ = writeln!(s, "set output \"{png}\"");
    let _ = writeln!(s, "set key outside autotitle columnhead");
    let _ = writeln!(s, "set title \"{title}\"");
    let _ = writeln!(s, "set xlabel \"{xlabel}\"");
    let _ = writeln!(s, "set ylabel \"{ylabel}\"");
    let _ = writeln!(
        s,
        "plot for [col=2:{}] \"{csv}\" using 1:col with lines",
        1 + n_value_cols
    );
    write_script(csv_path, &s)
}

/// Heat map of one value column over the two leading phase columns.
pub fn grid_stub(
    csv_path: &Path,
    title: &str,
    value_col: usize,
    value_name: &str,
) -> CmdResult<()> {
    let (csv, png) = stem_names(csv_path);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator comma");
    let _ = writeln!(s, "set terminal pngcairo size 900,780");
    let _ = writeln!(s, "set output \"{png}\"");
    let _ = writeln!(s, "set title \"{title}\"");
    let _ = writeln!(s, "set xlabel \"pz1 (rad)\"");
    let _ = writeln!(s, "set ylabel \"pz2 (rad)\"");
    let _ = writeln!(s, "set cblabel \"{value_name}\"");
    let _ = writeln!(s, "set view map");
    let _ = writeln!(
        s,
        "splot \"{csv}\" using 1:2:{value_col} with points pt 5 ps 1.6 palette notitle"
    );
    write_script(csv_path, &s)
}
