//! `qsim inequalities`: Bell, contextuality, and key-rate evaluations on the
//! configured state.
//!
//! Each table CSV carries four columns per term: the noiseless value of the
//! configured state, the analytic value with noise, and the mean and standard
//! deviation over Poisson-resampled count simulations.

use anyhow::anyhow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qsim_core::analysis::{
    cglmp_i3, cglmp_probabilities, ks_lhs, no_signalling_checks, prob_diff, qkd_error_rate,
    simulate_ks_contexts, OutcomeTable, QkdReport,
};
use qsim_core::experiment::{build_state, sample_poisson};
use qsim_core::io;
use qsim_core::qcore::{fidelity, DensityMatrix9, Ket9};

use crate::cmd::mean_std;
use crate::{fatal, sayln, shown, CmdResult, Ctx, Failure};

const VALUE_COLUMNS: [&str; 4] = ["ideal", "expected", "simulated_mean", "simulated_std"];

/// The eight correlation terms whose signed sum is I₃, each naming the
/// probability it reads, the table (a,b) it comes from, the outcome shift,
/// and its sign in the sum.
const CGLMP_ROWS: [(&str, usize, usize, i32, f64); 8] = [
    ("P(A1=B1)", 0, 0, 0, 1.0),
    ("P(B1=A2+1)", 1, 0, -1, 1.0),
    ("P(A2=B2)", 1, 1, 0, 1.0),
    ("P(B2=A1)", 0, 1, 0, 1.0),
    ("P(A1=B1-1)", 0, 0, -1, -1.0),
    ("P(B1=A2)", 1, 0, 0, -1.0),
    ("P(A2=B2-1)", 1, 1, -1, -1.0),
    ("P(B2=A1-1)", 0, 1, 1, -1.0),
];

fn configured_rhos(ctx: &Ctx) -> CmdResult<(DensityMatrix9, DensityMatrix9, Ket9)> {
    let state = build_state(ctx.config.pump.splitting, ctx.config.pump.phases_rad)?;
    let target = state.ket();
    let pure = DensityMatrix9::from_pure(&target);
    let noisy = fatal(pure.mix_white(ctx.config.noise.white_noise_weight))?;
    Ok((pure, noisy, target))
}

fn cglmp_tables(rho: &DensityMatrix9) -> CmdResult<[[OutcomeTable; 2]; 2]> {
    let mut t = [[[[0.0; 3]; 3]; 2]; 2];
    for a in 0..2u8 {
        for b in 0..2u8 {
            t[a as usize][b as usize] = fatal(cglmp_probabilities(rho, a + 1, b + 1))?;
        }
    }
    Ok(t)
}

fn cglmp_terms(tables: &[[OutcomeTable; 2]; 2]) -> ([f64; 8], f64) {
    let mut vals = [0.0; 8];
    for (i, (_, a, b, s, _)) in CGLMP_ROWS.iter().enumerate() {
        vals[i] = prob_diff(&tables[*a][*b], *s);
    }
    (vals, cglmp_i3(tables))
}

#[derive(Serialize)]
struct CglmpReport {
    i3_ideal: f64,
    i3_expected: f64,
    i3_simulated_mean: f64,
    i3_simulated_std: f64,
    classical_bound: f64,
    violation_sigma: f64,
    events_per_setting: f64,
    mc_samples: usize,
    seed: u64,
    white_noise_weight: f64,
}

pub fn run_cglmp(ctx: &Ctx) -> CmdResult<()> {
    let seed = ctx.require_seed()?;
    let (pure, noisy, _) = configured_rhos(ctx)?;
    let (rows_ideal, i3_ideal) = cglmp_terms(&cglmp_tables(&pure)?);
    let t_noisy = cglmp_tables(&noisy)?;
    let (rows_expected, i3_expected) = cglmp_terms(&t_noisy);

    let c = ctx.config.counts;
    let events = c.pair_rate_hz * c.integration_time_s;
    let mut row_samples: Vec<Vec<f64>> = (0..8).map(|_| Vec::with_capacity(c.mc_samples)).collect();
    let mut i3_samples = Vec::with_capacity(c.mc_samples);
    for s in 0..c.mc_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
        let mut sampled = [[[[0.0; 3]; 3]; 2]; 2];
        for (a, row) in t_noisy.iter().enumerate() {
            for (b, table) in row.iter().enumerate() {
                let mut total = 0.0;
                for r in 0..3 {
                    for k in 0..3 {
                        let n = fatal(sample_poisson(&mut rng, events * table[r][k]))? as f64;
                        sampled[a][b][r][k] = n;
                        total += n;
                    }
                }
                if total == 0.0 {
                    return Err(Failure::Fatal(anyhow!(
                        "no counts drawn for setting A{} B{}; raise counts.pair_rate_hz",
                        a + 1,
                        b + 1
                    )));
                }
                for r in 0..3 {
                    for k in 0..3 {
                        sampled[a][b][r][k] /= total;
                    }
                }
            }
        }
        let (vals, i3) = cglmp_terms(&sampled);
        for (series, v) in row_samples.iter_mut().zip(vals) {
            series.push(v);
        }
        i3_samples.push(i3);
    }
    let (i3_mean, i3_std) = mean_std(&i3_samples);

    let mut rows = Vec::with_capacity(9);
    for (i, (label, ..)) in CGLMP_ROWS.iter().enumerate() {
        let (m, sd) = mean_std(&row_samples[i]);
        rows.push((
            label.to_string(),
            vec![rows_ideal[i], rows_expected[i], m, sd],
        ));
    }
    rows.push((
        "I3".to_string(),
        vec![i3_ideal, i3_expected, i3_mean, i3_std],
    ));
    let csv = ctx.path("cglmp.csv");
    fatal(io::write_labeled_csv(&csv, "term", &VALUE_COLUMNS, &rows))?;

    let report = CglmpReport {
        i3_ideal,
        i3_expected,
        i3_simulated_mean: i3_mean,
        i3_simulated_std: i3_std,
        classical_bound: 2.0,
        violation_sigma: (i3_mean - 2.0) / i3_std,
        events_per_setting: events,
        mc_samples: c.mc_samples,
        seed,
        white_noise_weight: ctx.config.noise.white_noise_weight,
    };
    let json = ctx.path("cglmp.json");
    fatal(io::write_json(&json, &report))?;

    sayln!(
        "cglmp: I3 = {:.4} +/- {:.4} from counts (expected {:.4}, classical bound 2)",
        i3_mean,
        i3_std,
        i3_expected
    );
    sayln!("wrote {} and {}", shown(&csv), shown(&json));
    Ok(())
}

#[derive(Serialize)]
struct KsCliReport {
    lhs_ideal: f64,
    lhs_expected: f64,
    lhs_simulated_mean: f64,
    lhs_simulated_std: f64,
    noncontextual_bound: f64,
    conditionals_expected: [f64; 3],
    bob_marginal: f64,
    no_signalling_max: f64,
    events_per_context: f64,
    mc_samples: usize,
    seed: u64,
    white_noise_weight: f64,
}

pub fn run_ks(ctx: &Ctx) -> CmdResult<()> {
    let seed = ctx.require_seed()?;
    let (pure, noisy, _) = configured_rhos(ctx)?;
    let ideal = fatal(ks_lhs(&pure))?;
    let expected = fatal(ks_lhs(&noisy))?;

    let c = ctx.config.counts;
    let events = c.pair_rate_hz * c.integration_time_s;
    let mut cond_samples: Vec<Vec<f64>> =
        (0..3).map(|_| Vec::with_capacity(c.mc_samples)).collect();
    let mut lhs_samples = Vec::with_capacity(c.mc_samples);
    let mut no_signalling = [0.0f64; 3];
    for s in 0..c.mc_samples {
        let tables = fatal(simulate_ks_contexts(
            &noisy,
            events,
            seed.wrapping_add(s as u64),
        ))?;
        let mut as_f = [[[0.0f64; 2]; 2]; 3];
        for (cx, t) in tables.iter().enumerate() {
            for r in 0..2 {
                for k in 0..2 {
                    as_f[cx][r][k] = t[r][k] as f64;
                }
            }
        }
        if s == 0 {
            no_signalling = fatal(no_signalling_checks(&as_f))?;
        }
        let mut cond = [0.0; 3];
        for (cx, t) in as_f.iter().enumerate() {
            let herald = t[0][0] + t[1][0];
            if herald == 0.0 {
                return Err(Failure::Fatal(anyhow!(
                    "no heralding counts in context {}; raise counts.pair_rate_hz",
                    cx + 1
                )));
            }
            cond[cx] = t[0][0] / herald;
        }
        for (series, v) in cond_samples.iter_mut().zip(cond) {
            series.push(v);
        }
        lhs_samples.push(cond[0] - cond[1] - cond[2]);
    }
    let (lhs_mean, lhs_std) = mean_std(&lhs_samples);

    let labels = ["P(f|i)", "P(a0|i)", "P(a1|i)"];
    let mut rows = Vec::with_capacity(4);
    for (i, label) in labels.iter().enumerate() {
        let (m, sd) = mean_std(&cond_samples[i]);
        rows.push((
            label.to_string(),
            vec![ideal.conditionals[i], expected.conditionals[i], m, sd],
        ));
    }
    rows.push((
        "LHS".to_string(),
        vec![ideal.lhs, expected.lhs, lhs_mean, lhs_std],
    ));
    let csv = ctx.path("ks.csv");
    fatal(io::write_labeled_csv(&csv, "term", &VALUE_COLUMNS, &rows))?;

    let report = KsCliReport {
        lhs_ideal: ideal.lhs,
        lhs_expected: expected.lhs,
        lhs_simulated_mean: lhs_mean,
        lhs_simulated_std: lhs_std,
        noncontextual_bound: 0.0,
        conditionals_expected: expected.conditionals,
        bob_marginal: expected.bob_marginal,
        no_signalling_max: no_signalling.iter().copied().fold(0.0, f64::max),
        events_per_context: events,
        mc_samples: c.mc_samples,
        seed,
        white_noise_weight: ctx.config.noise.white_noise_weight,
    };
    let json = ctx.path("ks.json");
    fatal(io::write_json(&json, &report))?;

    sayln!(
        "ks: LHS = {:.4} +/- {:.4} from counts (expected {:.4}, noncontextual bound 0)",
        lhs_mean,
        lhs_std,
        expected.lhs
    );
    sayln!("wrote {} and {}", shown(&csv), shown(&json));
    Ok(())
}

#[derive(Serialize)]
struct QkdCliReport {
    fidelity: f64,
    white_noise_weight: f64,
    #[serde(flatten)]
    report: QkdReport,
}

pub fn run_qkd(ctx: &Ctx) -> CmdResult<()> {
    let (_, noisy, target) = configured_rhos(ctx)?;
    let f = fidelity(&noisy, &target);
    let report = fatal(qkd_error_rate(f))?;

    let rows = vec![(
        "qutrit_channel".to_string(),
        vec![
            f,
            report.error_rate,
            report.security_bound,
            report.below_bound as u8 as f64,
        ],
    )];
    let csv = ctx.path("qkd.csv");
    fatal(io::write_labeled_csv(
        &csv,
        "case",
        &["fidelity", "error_rate", "security_bound", "below_bound"],
        &rows,
    ))?;

    let verdict = if report.below_bound {
        "secure key possible"
    } else {
        "insecure"
    };
    let full = QkdCliReport {
        fidelity: f,
        white_noise_weight: ctx.config.noise.white_noise_weight,
        report,
    };
    let json = ctx.path("qkd.json");
    fatal(io::write_json(&json, &full))?;

    sayln!(
        "qkd: error rate {:.4} vs bound {:.4} -> {}",
        full.report.error_rate,
        full.report.security_bound,
        verdict
    );
    sayln!("wrote {} and {}", shown(&csv), shown(&json));
    Ok(())
}
