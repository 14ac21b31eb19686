//! `qsim fringes`: interference fringe scans with Poissonian visibility
//! error bars.

use anyhow::anyhow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qsim_core::experiment::{
    expected_counts, qubit_fringe, rhom_fringe, sample_poisson, visibility, Fringe, FringeKind,
    FringeTemplate,
};
use qsim_core::io;

use crate::cmd::mean_std;
use crate::{fatal, gnuplot, sayln, shown, usage, CmdResult, Ctx};

#[derive(Serialize)]
struct FringeReport {
    kind: FringeKind,
    pair: [usize; 2],
    tracked_ports: &'static str,
    visibility: f64,
    offset: f64,
    amplitude: f64,
    phase0_rad: f64,
    phase0_heater_mw: f64,
    flat: bool,
    counts_visibility_mean: f64,
    counts_visibility_std: f64,
    mc_samples: usize,
    pair_rate_hz: f64,
    integration_time_s: f64,
    seed: u64,
}

fn parse_pair(s: &str) -> CmdResult<(usize, usize)> {
    let err = || {
        usage(anyhow!(
            "pair must be two distinct source indices in 1..=3, like 1,2; got {s:?}"
        ))
    };
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(err());
    }
    let a: usize = parts[0].parse().map_err(|_| err())?;
    let b: usize = parts[1].parse().map_err(|_| err())?;
    if !(1..=3).contains(&a) || !(1..=3).contains(&b) || a == b {
        return Err(err());
    }
    Ok((a - 1, b - 1))
}

fn kind_name(kind: FringeKind) -> &'static str {
    match kind {
        FringeKind::Rhom => "rhom",
        FringeKind::Qubit => "qubit",
    }
}

pub fn run(ctx: &Ctx, kind: FringeKind, pair_arg: &str, points: usize) -> CmdResult<()> {
    let pair = parse_pair(pair_arg)?;
    let seed = ctx.require_seed()?;
    if points < 4 {
        return Err(usage(anyhow!("--points must be at least 4")));
    }
    let span = 2.0 * std::f64::consts::PI;
    let grid: Vec<f64> = (0..points)
        .map(|i| span * i as f64 / (points - 1) as f64)
        .collect();
    let template = FringeTemplate {
        source_amplitudes: ctx.config.pump.splitting,
        noise: ctx.config.noise.clone(),
    };
    let fringe = match kind {
        FringeKind::Rhom => rhom_fringe(pair, &grid, &template),
        FringeKind::Qubit => qubit_fringe(pair, &grid, &template),
    }?;
    let fit = fatal(visibility(&fringe))?;

    // The fringe curve already carries the white-noise floor; zero it here so
    // the simulated counts do not mix it in a second time.
    let mut count_noise = ctx.config.noise.clone();
    count_noise.white_noise_weight = 0.0;
    let c = ctx.config.counts;
    let means: Vec<[[f64; 3]; 3]> = fringe
        .values
        .iter()
        .map(|m| expected_counts(m, c.pair_rate_hz, c.integration_time_s, &count_noise))
        .collect();

    let mut vis = Vec::with_capacity(c.mc_samples);
    for s in 0..c.mc_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + s as u64));
        let mut sampled = Vec::with_capacity(means.len());
        for m in &means {
            let mut cell = [[0.0; 3]; 3];
            for (r, row) in m.iter().enumerate() {
                for (k, mean) in row.iter().enumerate() {
                    cell[r][k] = fatal(sample_poisson(&mut rng, *mean))? as f64;
                }
            }
            sampled.push(cell);
        }
        let sf = fatal(Fringe::new(
            kind,
            fringe.phases_rad.clone(),
            sampled,
            fringe.tracked,
        ))?;
        vis.push(fatal(visibility(&sf))?.visibility);
    }
    let (counts_mean, counts_std) = mean_std(&vis);

    let csv = ctx.path("fringes.csv");
    fatal(io::write_fringe_csv(&csv, &fringe))?;
    let tracked = io::PORT_PAIR_COLUMNS[3 * fringe.tracked.0 + fringe.tracked.1];
    let report = FringeReport {
        kind,
        pair: [pair.0 + 1, pair.1 + 1],
        tracked_ports: tracked,
        visibility: fit.visibility,
        offset: fit.offset,
        amplitude: fit.amplitude,
        phase0_rad: fit.phase0_rad,
        phase0_heater_mw: ctx
            .config
            .heater
            .calibration()
            .phase_to_power_mw(fit.phase0_rad),
        flat: fit.flat,
        counts_visibility_mean: counts_mean,
        counts_visibility_std: counts_std,
        mc_samples: c.mc_samples,
        pair_rate_hz: c.pair_rate_hz,
        integration_time_s: c.integration_time_s,
        seed,
    };
    let json = ctx.path("fringes.json");
    fatal(io::write_json(&json, &report))?;
    if ctx.gnuplot {
        gnuplot::series_stub(
            &csv,
            "Coincidence fringes",
            "phase (rad)",
            "coincidence probability",
            9,
        )?;
    }

    sayln!(
        "fringes: {} scan of sources ({},{}) on {}: visibility {:.4}, counts give {:.4} +/- {:.4}",
        kind_name(kind),
        pair.0 + 1,
        pair.1 + 1,
        tracked,
        fit.visibility,
        counts_mean,
        counts_std
    );
    sayln!("wrote {} and {}", shown(&csv), shown(&json));
    Ok(())
}
