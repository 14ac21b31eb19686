//! `qsim spectrum`: drop/through response of one ring source.

use serde::Serialize;

use qsim_core::io;
use qsim_core::ring::{
    classify_coupling, find_resonances, fsr_nm, linewidth_pm, low_power_efficiency, sweep_spectrum,
    CouplingRegime,
};

use crate::{fatal, gnuplot, sayln, shown, CmdResult, Ctx};

#[derive(Serialize)]
struct ResonanceRow {
    lambda_nm: f64,
    linewidth_pm: f64,
    coupling: &'static str,
    drop_power: f64,
    through_power: f64,
}

#[derive(Serialize)]
struct SpectrumReport {
    source: usize,
    start_nm: f64,
    stop_nm: f64,
    points: usize,
    resonances: Vec<ResonanceRow>,
    fsr_nm: Option<f64>,
    pump_resonance_nm: Option<f64>,
    low_power_heralding_efficiency: Option<f64>,
}

fn regime_name(r: CouplingRegime) -> &'static str {
    match r {
        CouplingRegime::Under => "under",
        CouplingRegime::Critical => "critical",
        CouplingRegime::Over => "over",
    }
}

fn nearest_index(xs: &[f64], x: f64) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn run(ctx: &Ctx, source: usize, start_nm: f64, stop_nm: f64, points: usize) -> CmdResult<()> {
    let ring = ctx.source(source)?;
    let resp = sweep_spectrum(ring, start_nm, stop_nm, points)?;
    let resonances = find_resonances(ring, start_nm, stop_nm)?;
    let fsr = fsr_nm(&resonances);

    let mut rows = Vec::with_capacity(resonances.len());
    for &lam in &resonances {
        let i = nearest_index(&resp.wavelengths_nm, lam);
        rows.push(ResonanceRow {
            lambda_nm: lam,
            linewidth_pm: fatal(linewidth_pm(ring, lam))?,
            coupling: regime_name(fatal(classify_coupling(ring, lam))?),
            drop_power: resp.drop_power(i),
            through_power: resp.through_power(i),
        });
    }
    let pump = resonances.iter().copied().min_by(|a, b| {
        (a - ring.lambda0_nm)
            .abs()
            .total_cmp(&(b - ring.lambda0_nm).abs())
    });
    // best effort: None when no resonance sits near the design wavelength
    let efficiency = low_power_efficiency(ring).ok();

    let csv = ctx.path("spectrum.csv");
    fatal(io::write_spectrum_csv(&csv, &resp))?;
    let report = SpectrumReport {
        source,
        start_nm,
        stop_nm,
        points,
        resonances: rows,
        fsr_nm: fsr,
        pump_resonance_nm: pump,
        low_power_heralding_efficiency: efficiency,
    };
    let json = ctx.path("spectrum.json");
    fatal(io::write_json(&json, &report))?;
    if ctx.gnuplot {
        gnuplot::series_stub(
            &csv,
            "Ring transmission spectrum",
            "wavelength (nm)",
            "power / phase",
            4,
        )?;
    }

    match (fsr, pump) {
        (Some(f), Some(p)) => sayln!(
            "spectrum: {} resonances, FSR {:.4} nm, pump line at {:.4} nm",
            report.resonances.len(),
            f,
            p
        ),
        _ => sayln!("spectrum: {} resonances", report.resonances.len()),
    }
    sayln!("wrote {} and {}", shown(&csv), shown(&json));
    Ok(())
}
