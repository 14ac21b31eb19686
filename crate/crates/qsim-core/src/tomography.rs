//! 81-setting two-qutrit state tomography.
//!
//! Both photons are projected onto each of nine single-qutrit states (the
//! three basis kets plus six two-level superpositions), giving 81 joint
//! settings. Reconstruction is linear inversion on the Gell-Mann operator
//! basis followed by projection to the physical set; an iterative
//! maximum-likelihood refinement is available on top.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::{self, Strategy};
use crate::experiment::sample_poisson;
use crate::qcore::{fidelity, gell_mann_set, purity, DensityMatrix9, Ket9, Mat3, Mat9, Vec3C, C64};
use crate::{Error, Result};

pub const N_SETTINGS: usize = 81;

/// One joint projective setting: both photons land on a single-qutrit state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub signal: Vec3C,
    pub idler: Vec3C,
    pub label: String,
}

/// The nine single-qutrit analysis states with their labels.
fn single_qutrit_states() -> [(Vec3C, &'static str); 9] {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let ri = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    [
        (Vec3C::new(one, zero, zero), "0"),
        (Vec3C::new(zero, one, zero), "1"),
        (Vec3C::new(zero, zero, one), "2"),
        (Vec3C::new(r, r, zero), "0+1"),
        (Vec3C::new(zero, r, r), "1+2"),
        (Vec3C::new(r, zero, r), "0+2"),
        (Vec3C::new(r, ri, zero), "0+i1"),
        (Vec3C::new(zero, r, ri), "1+i2"),
        (Vec3C::new(r, zero, ri), "0+i2"),
    ]
}

/// Full 81-setting schedule, signal state varying slowest.
pub fn schedule_81() -> Vec<MeasurementSetting> {
    let states = single_qutrit_states();
    let mut out = Vec::with_capacity(N_SETTINGS);
    for (s, ls) in &states {
        for (i, li) in &states {
            out.push(MeasurementSetting {
                signal: *s,
                idler: *i,
                label: format!("{ls}|{li}"),
            });
        }
    }
    out
}

/// Indices of the nine computational-basis settings, which partition unity
/// and anchor the count normalization.
fn computational_indices() -> [usize; 9] {
    let mut idx = [0; 9];
    let mut n = 0;
    for a in 0..3 {
        for b in 0..3 {
            idx[n] = 9 * a + b;
            n += 1;
        }
    }
    idx
}

/// Detection probability ⟨p_s ⊗ p_i| ρ |p_s ⊗ p_i⟩ of one setting.
pub fn setting_probability(rho: &DensityMatrix9, setting: &MeasurementSetting) -> f64 {
    let p = Ket9::product(&setting.signal, &setting.idler).expect("schedule states are unit norm");
    let v = p.vector();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..9 {
        for c in 0..9 {
            acc += v[r].conj() * rho.matrix()[(r, c)] * v[c];
        }
    }
    acc.re.max(0.0)
}

/// Noise-free rates for the whole schedule (arbitrary scale 1 = all pairs).
pub fn ideal_rates(rho: &DensityMatrix9) -> Vec<f64> {
    schedule_81()
        .iter()
        .map(|s| setting_probability(rho, s))
        .collect()
}

/// Poisson-sampled counts with `scale` expected events per unit probability.
///
/// `scale` = 900 gives the reference regime of roughly 100 counts on each
/// computational setting for a maximally entangled state.
pub fn simulate_counts_81(rho: &DensityMatrix9, scale: f64, seed: u64) -> Result<Vec<f64>> {
    if scale <= 0.0 {
        return Err(Error::Domain("count scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ideal_rates(rho)
        .iter()
        .map(|p| sample_poisson(&mut rng, scale * p).map(|c| c as f64))
        .collect()
}

/// Projectors |p_s⟩⟨p_s| ⊗ |p_i⟩⟨p_i| for the 81 settings, as 9×9 matrices.
#[cfg(test)]
fn setting_projectors() -> Vec<Mat9> {
    schedule_81()
        .iter()
        .map(|s| {
            let p = Ket9::product(&s.signal, &s.idler).expect("unit norm");
            let v = p.vector();
            Mat9::from_fn(|r, c| v[r] * v[c].conj())
        })
        .collect()
}

/// Design matrix A[k][m] = Tr(P_k · G_a ⊗ G_b), exploiting the product
/// structure Tr = ⟨s|G_a|s⟩·⟨i|G_b|i⟩.
fn design_matrix() -> DMatrix<f64> {
    let states = single_qutrit_states();
    let gm = gell_mann_set();
    let mut q = [[0.0; 9]; 9];
    for (si, (s, _)) in states.iter().enumerate() {
        for (gi, g) in gm.iter().enumerate() {
            q[si][gi] = expectation(g, s);
        }
    }
    DMatrix::from_fn(N_SETTINGS, N_SETTINGS, |k, m| {
        let (ka, kb) = (k / 9, k % 9);
        let (ma, mb) = (m / 9, m % 9);
        q[ka][ma] * q[kb][mb]
    })
}

fn expectation(g: &Mat3, s: &Vec3C) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..3 {
        for c in 0..3 {
            acc += s[r].conj() * g[(r, c)] * s[c];
        }
    }
    acc.re
}

/// Nearest density matrix: clip negative eigenvalues, renormalize the trace.
fn project_to_physical(m: &Mat9) -> Result<DensityMatrix9> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDensity("all eigenvalues non-positive".into()));
    }
    let mut rebuilt = Mat9::zeros();
    for (i, l) in clipped.iter().enumerate() {
        if *l == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        let w = C64::new(l / total, 0.0);
        for r in 0..9 {
            for c in 0..9 {
                rebuilt[(r, c)] += w * v[r] * v[c].conj();
            }
        }
    }
    DensityMatrix9::new(rebuilt)
}

fn normalized_probabilities(rates: &[f64]) -> Result<Vec<f64>> {
    if rates.len() != N_SETTINGS {
        return Err(Error::Domain(format!(
            "expected {N_SETTINGS} rates, got {}",
            rates.len()
        )));
    }
    if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Domain(
            "rates must be finite and non-negative".into(),
        ));
    }
    let norm: f64 = computational_indices().iter().map(|&k| rates[k]).sum();
    if norm <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    Ok(rates.iter().map(|r| r / norm).collect())
}

/// Linear-inversion tomography with projection to the physical set.
///
/// Rates are normalized by the computational-basis block, inverted against
/// the design matrix in the Gell-Mann product basis, and the result is
/// projected to the nearest positive unit-trace matrix.
pub fn reconstruct(rates: &[f64]) -> Result<DensityMatrix9> {
    let probs = normalized_probabilities(rates)?;
    let a = design_matrix();
    let x = a
        .lu()
        .solve(&DVector::from_vec(probs))
        .ok_or(Error::SingularDesign)?;
    let gm = gell_mann_set();
    let mut rho = Mat9::zeros();
    for m in 0..N_SETTINGS {
        let (ma, mb) = (m / 9, m % 9);
        let w = C64::new(x[m], 0.0);
        for r in 0..9 {
            for c in 0..9 {
                rho[(r, c)] += w * gm[ma][(r / 3, c / 3)] * gm[mb][(r % 3, c % 3)];
            }
        }
    }
    project_to_physical(&rho)
}

fn log_likelihood(probs: &[f64], counts: &[f64], exposure: f64) -> f64 {
    probs
        .iter()
        .zip(counts)
        .map(|(p, n)| {
            let lam = (exposure * p).max(1e-300);
            n * lam.ln() - lam
        })
        .sum()
}

/// Which estimator turns measured rates into a density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Linear inversion with projection to the physical set. Fast, but the
    /// projection clips sampling noise one-sidedly, so fidelities come out
    /// biased low when counts are scarce.
    Linear,
    /// Likelihood ascent seeded by the linear estimate. Slower, and the one
    /// to use for absolute fidelity claims.
    Mle,
}

/// Reconstruction with an explicit estimator choice.
pub fn reconstruct_with(estimator: Estimator, rates: &[f64]) -> Result<DensityMatrix9> {
    match estimator {
        Estimator::Linear => reconstruct(rates),
        Estimator::Mle => reconstruct_mle(rates, 500, 1e-10),
    }
}

fn setting_probability_ket(rho: &DensityMatrix9, ket: &Ket9) -> f64 {
    let v = ket.vector();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..9 {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..9 {
            row += rho.matrix()[(i, j)] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc.re
}

/// Maximum-likelihood refinement of [`reconstruct`].
///
/// Poissonian likelihood ascent with a damped multiplicative update
/// ρ ← N[(1+εG)ρ(1+εG)], G the likelihood gradient operator. The ascent
/// starts from the linear estimate; rank-deficient starts get a small
/// maximally-mixed admixture so no outcome has zero probability. The step is
/// halved whenever the likelihood would drop; iteration stops after
/// `max_iters` rounds or when the gain falls below `tol`.
pub fn reconstruct_mle(rates: &[f64], max_iters: usize, tol: f64) -> Result<DensityMatrix9> {
    let counts = normalized_probabilities(rates)?;
    let mut rho = reconstruct(rates)?;
    if rho.eigenvalues().iter().any(|l| *l < 1e-9) {
        let mixed =
            rho.matrix() * C64::new(0.999, 0.0) + Mat9::identity() * C64::new(0.001 / 9.0, 0.0);
        rho = DensityMatrix9::new(mixed)?;
    }
    let kets: Vec<Ket9> = schedule_81()
        .iter()
        .map(|s| Ket9::product(&s.signal, &s.idler).expect("schedule states are unit norm"))
        .collect();
    let exposure: f64 = 1.0;

    let probs_of = |r: &DensityMatrix9| -> Vec<f64> {
        kets.iter()
            .map(|k| setting_probability_ket(r, k).max(1e-12))
            .collect()
    };

    let mut ll = log_likelihood(&probs_of(&rho), &counts, exposure);
    let mut eps = 0.1;
    for _ in 0..max_iters {
        let probs = probs_of(&rho);
        let mut grad = Mat9::zeros();
        for (k, ket) in kets.iter().enumerate() {
            let w = C64::new(counts[k] / probs[k] - exposure, 0.0);
            let v = ket.vector();
            for r in 0..9 {
                for c in 0..9 {
                    grad[(r, c)] += w * v[r] * v[c].conj();
                }
            }
        }
        grad = (grad + grad.adjoint()) * C64::new(0.5, 0.0);
        let mut improved = false;
        while eps > 1e-12 {
            let step = Mat9::identity() + grad * C64::new(eps, 0.0);
            let candidate = step * rho.matrix() * step.adjoint();
            let trace: f64 = (0..9).map(|i| candidate[(i, i)].re).sum();
            if trace <= 0.0 {
                eps *= 0.5;
                continue;
            }
            let normalized = candidate / C64::new(trace, 0.0);
            match DensityMatrix9::new((normalized + normalized.adjoint()) * C64::new(0.5, 0.0)) {
                Ok(next) => {
                    let ll_next = log_likelihood(&probs_of(&next), &counts, exposure);
                    if ll_next >= ll - 1e-15 {
                        let gain = ll_next - ll;
                        rho = next;
                        ll = ll_next;
                        improved = true;
                        if gain < tol {
                            return Ok(rho);
                        }
                        eps = (eps * 1.5).min(0.5);
                        break;
                    }
                    eps *= 0.5;
                }
                Err(_) => eps *= 0.5,
            }
        }
        if !improved {
            break;
        }
    }
    Ok(rho)
}

/// Monte Carlo error propagation through the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSummary {
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    pub samples: usize,
}

/// Resamples every count from a Poisson law with the measured value as mean,
/// reconstructs each sample, and reports the spread of the fidelity to
/// `target`. Samples run in parallel under the default strategy.
pub fn monte_carlo_errors(
    estimator: Estimator,
    counts: &[f64],
    target: &Ket9,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    monte_carlo_errors_with(
        Strategy::default(),
        estimator,
        counts,
        target,
        n_samples,
        seed,
    )
}

/// [`monte_carlo_errors`] with an explicit execution strategy.
pub fn monte_carlo_errors_with(
    strategy: Strategy,
    estimator: Estimator,
    counts: &[f64],
    target: &Ket9,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if n_samples < 10 {
        return Err(Error::Domain("need at least 10 Monte Carlo samples".into()));
    }
    normalized_probabilities(counts)?;
    let fidelities = exec::map_range(strategy, n_samples, |i| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let resampled: Vec<f64> = counts
            .iter()
            .map(|c| sample_poisson(&mut rng, *c).map(|n| n as f64))
            .collect::<Result<_>>()?;
        Ok(fidelity(&reconstruct_with(estimator, &resampled)?, target))
    });
    let values: Vec<f64> = fidelities.into_iter().collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var =
        values.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(MonteCarloSummary {
        fidelity_mean: mean,
        fidelity_std: var.sqrt(),
        samples: n_samples,
    })
}

/// Splitmix-style stream derivation so Monte Carlo samples are independent.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// End-to-end tomography summary for one measured schedule.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho: DensityMatrix9,
    pub fidelity_to_target: f64,
    pub fidelity_std: f64,
    pub purity: f64,
    pub mc_samples: usize,
}

/// Reconstructs, scores against `target`, and attaches Monte Carlo error bars.
pub fn run_tomography(
    estimator: Estimator,
    counts: &[f64],
    target: &Ket9,
    mc_samples: usize,
    seed: u64,
) -> Result<TomographyResult> {
    let rho = reconstruct_with(estimator, counts)?;
    let mc = monte_carlo_errors(estimator, counts, target, mc_samples, seed)?;
    Ok(TomographyResult {
        fidelity_to_target: fidelity(&rho, target),
        fidelity_std: mc.fidelity_std,
        purity: purity(&rho),
        mc_samples: mc.samples,
        rho,
    })
}
