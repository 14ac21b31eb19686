//! State preparation, the coincidence engine, count simulation, and fringes.
//!
//! Three ring sources pumped coherently emit a path-entangled two-qutrit
//! state. Pump phases enter doubled because pair generation is a third-order
//! process consuming two pump photons. Detection uses six ports: signal modes
//! 0,1,2 map to ports 5,3,1 and idler modes to ports 6,4,2.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::qcore::{tensor, DensityMatrix9, Ket9, Mat2, Unitary3, Vec9C, C64};
use crate::{Error, Result};

/// Hardware port labels for the three signal output paths, by mode.
pub const SIGNAL_PORTS: [u8; 3] = [5, 3, 1];
/// Hardware port labels for the three idler output paths, by mode.
pub const IDLER_PORTS: [u8; 3] = [6, 4, 2];

/// Row index into a port-ordered coincidence matrix for a signal mode.
fn signal_row(mode: usize) -> usize {
    2 - mode
}

/// Column index into a port-ordered coincidence matrix for an idler mode.
fn idler_col(mode: usize) -> usize {
    2 - mode
}

/// Pump-controlled two-qutrit path state
/// α·e^{i2φ_pz1}|00⟩ + β·e^{i2φ_pz2}|11⟩ + γ|22⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQutritState {
    /// Normalized real amplitudes (α, β, γ) per source.
    pub amplitudes: [f64; 3],
    /// Pump phases (φ_pz1, φ_pz2), radians. Source 3 is the phase reference.
    pub pump_phases: [f64; 2],
}

/// Normalizes the pump splitting and attaches pump phases.
///
/// The phases are stored as given; the factor 2 from two-photon pumping is
/// applied when the ket is built.
pub fn build_state(pump_splitting: [f64; 3], pump_phases: [f64; 2]) -> Result<TwoQutritState> {
    if pump_splitting.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::Domain(
            "pump splitting amplitudes must be finite and non-negative".into(),
        ));
    }
    let norm = pump_splitting.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::NotNormalizable(
            "all pump amplitudes are zero".into(),
        ));
    }
    Ok(TwoQutritState {
        amplitudes: pump_splitting.map(|a| a / norm),
        pump_phases,
    })
}

impl TwoQutritState {
    /// Phase of the |mm⟩ term, radians, including pump-phase doubling.
    fn term_phase(&self, mode: usize) -> f64 {
        match mode {
            0 => 2.0 * self.pump_phases[0],
            1 => 2.0 * self.pump_phases[1],
            _ => 0.0,
        }
    }

    pub fn ket(&self) -> Ket9 {
        self.ket_with_offsets([0.0; 3])
    }

    /// Ket with an extra phase offset on each source term (models per-source
    /// resonance detuning).
    pub fn ket_with_offsets(&self, offsets: [f64; 3]) -> Ket9 {
        let mut v = Vec9C::zeros();
        for m in 0..3 {
            v[3 * m + m] = C64::from_polar(self.amplitudes[m], self.term_phase(m) + offsets[m]);
        }
        Ket9::new(v).expect("amplitudes are normalized by construction")
    }
}

/// Count-level imperfection model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Weight p̄ of the maximally mixed component, ρ = (1−p̄)ρ₀ + p̄·I/9.
    pub white_noise_weight: f64,
    /// Detection efficiency per hardware port 1..6.
    pub port_efficiencies: [f64; 6],
    /// Accidental coincidence rate per detector pair, counts/s.
    pub accidental_rate_hz: f64,
    /// Per-source phase offsets from pump/resonance misalignment, radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance_detuning_rad: Option<[f64; 3]>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            white_noise_weight: 0.0,
            port_efficiencies: [1.0; 6],
            accidental_rate_hz: 0.0,
            resonance_detuning_rad: None,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.white_noise_weight) {
            return Err(Error::Domain(format!(
                "white noise weight {} outside [0,1]",
                self.white_noise_weight
            )));
        }
        for (i, e) in self.port_efficiencies.iter().enumerate() {
            if !(0.0..=1.0).contains(e) {
                return Err(Error::Domain(format!(
                    "port {} efficiency {e} outside [0,1]",
                    i + 1
                )));
            }
        }
        if self.accidental_rate_hz < 0.0 {
            return Err(Error::Domain("accidental rate must be non-negative".into()));
        }
        Ok(())
    }

    fn detuning(&self) -> [f64; 3] {
        self.resonance_detuning_rad.unwrap_or([0.0; 3])
    }

    /// Efficiency of the signal port carrying `mode`, indexed by matrix row.
    fn signal_efficiency(&self, row: usize) -> f64 {
        self.port_efficiencies[(SIGNAL_PORTS[2 - row] - 1) as usize]
    }

    fn idler_efficiency(&self, col: usize) -> f64 {
        self.port_efficiencies[(IDLER_PORTS[2 - col] - 1) as usize]
    }
}

/// Mode-level outcome probabilities |⟨a| U_s ⊗ ⟨b| U_i |ψ⟩|², indexed (a, b).
pub fn outcome_probs(psi: &Ket9, u_s: &Unitary3, u_i: &Unitary3) -> [[f64; 3]; 3] {
    let mut p = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut amp = C64::new(0.0, 0.0);
            for j in 0..3 {
                for k in 0..3 {
                    amp += u_s.matrix()[(a, j)] * u_i.matrix()[(b, k)] * psi.amplitude(j, k);
                }
            }
            p[a][b] = amp.norm_sqr();
        }
    }
    p
}

/// Mode-level outcome probabilities for a mixed state.
pub fn outcome_probs_rho(rho: &DensityMatrix9, u_s: &Unitary3, u_i: &Unitary3) -> [[f64; 3]; 3] {
    let u = tensor(u_s, u_i);
    let evolved = u.matrix() * rho.matrix() * u.matrix().adjoint();
    let mut p = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            p[a][b] = evolved[(3 * a + b, 3 * a + b)].re.max(0.0);
        }
    }
    p
}

/// Reindexes a mode-level table into detector-port order.
///
/// Row r holds signal ports (1, 3, 5)[r], column c idler ports (2, 4, 6)[c],
/// matching the CC_ij labeling of the readout electronics.
pub fn port_matrix(mode_probs: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut p = [[0.0; 3]; 3];
    for (a, row) in mode_probs.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            p[signal_row(a)][idler_col(b)] = *v;
        }
    }
    p
}

/// Port-ordered coincidence probabilities for a pure state.
pub fn coincidence_probs(psi: &TwoQutritState, u_s: &Unitary3, u_i: &Unitary3) -> [[f64; 3]; 3] {
    port_matrix(&outcome_probs(&psi.ket(), u_s, u_i))
}

/// Port-ordered coincidence probabilities for a mixed state.
pub fn coincidence_probs_rho(
    rho: &DensityMatrix9,
    u_s: &Unitary3,
    u_i: &Unitary3,
) -> [[f64; 3]; 3] {
    port_matrix(&outcome_probs_rho(rho, u_s, u_i))
}

/// One integration window of simulated coincidence counts.
///
/// `counts[r][c]` pairs signal port (1,3,5)[r] with idler port (2,4,6)[c].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub counts: [[u64; 3]; 3],
    pub integration_time_s: f64,
    pub rng_seed: u64,
}

impl CoincidenceRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Expected counts per cell: pair_rate·T·P'·η_s·η_i + accidentals·T, where
/// P' mixes in the white-noise floor.
pub fn expected_counts(
    p_ports: &[[f64; 3]; 3],
    pair_rate_hz: f64,
    integration_time_s: f64,
    noise: &NoiseModel,
) -> [[f64; 3]; 3] {
    let p = noise.white_noise_weight;
    let mut mean = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mixed = (1.0 - p) * p_ports[r][c] + p / 9.0;
            mean[r][c] = pair_rate_hz
                * integration_time_s
                * mixed
                * noise.signal_efficiency(r)
                * noise.idler_efficiency(c)
                + noise.accidental_rate_hz * integration_time_s;
        }
    }
    mean
}

/// Draws one Poissonian coincidence record. Deterministic in `seed`; cells
/// are sampled row-major.
pub fn simulate_counts(
    p_ports: &[[f64; 3]; 3],
    pair_rate_hz: f64,
    integration_time_s: f64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CoincidenceRecord> {
    if pair_rate_hz < 0.0 || integration_time_s < 0.0 {
        return Err(Error::Domain("rate and time must be non-negative".into()));
    }
    noise.validate()?;
    let mean = expected_counts(p_ports, pair_rate_hz, integration_time_s, noise);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [[0u64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            counts[r][c] = sample_poisson(&mut rng, mean[r][c])?;
        }
    }
    Ok(CoincidenceRecord {
        counts,
        integration_time_s,
        rng_seed: seed,
    })
}

/// One Poisson draw with the given mean, advancing `rng`. A zero mean yields
/// zero counts without consuming randomness.
pub fn sample_poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if mean < 0.0 || !mean.is_finite() {
        return Err(Error::Domain(format!("invalid Poisson mean {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Numerical(format!("poisson: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Which heater a fringe scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FringeKind {
    /// Reverse Hong-Ou-Mandel: pump phase scanned, fringe period π.
    Rhom,
    /// Idler analysis phase scanned, fringe period 2π.
    Qubit,
}

impl FringeKind {
    /// Angular frequency of the fringe in the scanned phase.
    pub fn harmonic(&self) -> f64 {
        match self {
            FringeKind::Rhom => 2.0,
            FringeKind::Qubit => 1.0,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.harmonic()
    }
}

/// Coincidence curves over a phase scan, one 3×3 port matrix per grid point.
#[derive(Debug, Clone)]
pub struct Fringe {
    pub kind: FringeKind,
    pub phases_rad: Vec<f64>,
    pub values: Vec<[[f64; 3]; 3]>,
    /// (row, col) of the port pair that visibility fitting tracks.
    pub tracked: (usize, usize),
}

impl Fringe {
    pub fn new(
        kind: FringeKind,
        phases_rad: Vec<f64>,
        values: Vec<[[f64; 3]; 3]>,
        tracked: (usize, usize),
    ) -> Result<Self> {
        if phases_rad.len() != values.len() {
            return Err(Error::Domain(
                "phase grid and values differ in length".into(),
            ));
        }
        if phases_rad.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "phase grid must be strictly increasing".into(),
            ));
        }
        if tracked.0 > 2 || tracked.1 > 2 {
            return Err(Error::Domain("tracked cell out of range".into()));
        }
        Ok(Fringe {
            kind,
            phases_rad,
            values,
            tracked,
        })
    }

    pub fn tracked_series(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|m| m[self.tracked.0][self.tracked.1])
            .collect()
    }
}

/// Source strengths and noise shared by the points of one fringe scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeTemplate {
    /// Relative pump amplitude per source; modes outside the scanned pair are
    /// zeroed by the fringe builders.
    pub source_amplitudes: [f64; 3],
    pub noise: NoiseModel,
}

impl Default for FringeTemplate {
    fn default() -> Self {
        FringeTemplate {
            source_amplitudes: [1.0; 3],
            noise: NoiseModel::default(),
        }
    }
}

fn check_pair(pair: (usize, usize)) -> Result<()> {
    let (j, k) = pair;
    if j > 2 || k > 2 || j == k {
        return Err(Error::Domain(format!("invalid source pair ({j}, {k})")));
    }
    Ok(())
}

/// 50:50 splitter on modes (j, k), identity on the third mode.
fn splitter_on_pair(pair: (usize, usize)) -> Unitary3 {
    let m: Mat2 = crate::circuit::mmi();
    let (j, k) = pair;
    let mut u = nalgebra::Matrix3::identity();
    u[(j, j)] = m[(0, 0)];
    u[(j, k)] = m[(0, 1)];
    u[(k, j)] = m[(1, 0)];
    u[(k, k)] = m[(1, 1)];
    Unitary3::new(u).expect("embedded splitter is unitary")
}

fn pump_phases_for(pair: (usize, usize), phi: f64) -> [f64; 2] {
    // The scanned source is the lower mode of the pair; source 3 carries no
    // pump shifter so pairs are always scanned through source 1 or 2.
    match pair.0.min(pair.1) {
        0 => [phi, 0.0],
        _ => [0.0, phi],
    }
}

fn pair_state(
    pair: (usize, usize),
    template: &FringeTemplate,
    phases: [f64; 2],
) -> Result<TwoQutritState> {
    let (j, k) = (pair.0.min(pair.1), pair.0.max(pair.1));
    let mut amps = [0.0; 3];
    amps[j] = template.source_amplitudes[j];
    amps[k] = template.source_amplitudes[k];
    build_state(amps, phases)
}

fn fringe_over(
    kind: FringeKind,
    pair: (usize, usize),
    scan: &[f64],
    template: &FringeTemplate,
    point: impl Fn(f64) -> Result<[[f64; 3]; 3]>,
) -> Result<Fringe> {
    check_pair(pair)?;
    template.noise.validate()?;
    let values = scan
        .iter()
        .map(|&phi| point(phi))
        .collect::<Result<Vec<_>>>()?;
    let j = pair.0.min(pair.1);
    Fringe::new(kind, scan.to_vec(), values, (signal_row(j), idler_col(j)))
}

fn probs_with_noise(
    state: &TwoQutritState,
    u_s: &Unitary3,
    u_i: &Unitary3,
    noise: &NoiseModel,
) -> Result<[[f64; 3]; 3]> {
    let ket = state.ket_with_offsets(noise.detuning());
    let p = noise.white_noise_weight;
    if p == 0.0 {
        Ok(port_matrix(&outcome_probs(&ket, u_s, u_i)))
    } else {
        let rho = DensityMatrix9::from_pure(&ket).mix_white(p)?;
        Ok(coincidence_probs_rho(&rho, u_s, u_i))
    }
}

/// Reverse Hong-Ou-Mandel fringe: two sources pumped, the pump phase of the
/// lower mode scanned, both photons split on 50:50 couplers.
///
/// The tracked cell follows (1 − cos 2φ)-type interference: the two-photon
/// amplitude inherits twice the pump phase, so the period is π.
pub fn rhom_fringe(
    pair: (usize, usize),
    scan: &[f64],
    template: &FringeTemplate,
) -> Result<Fringe> {
    check_pair(pair)?;
    let u = splitter_on_pair(pair);
    fringe_over(FringeKind::Rhom, pair, scan, template, |phi| {
        let state = pair_state(pair, template, pump_phases_for(pair, phi))?;
        probs_with_noise(&state, &u, &u, &template.noise)
    })
}

/// Single-photon correlation fringe: pump phases fixed, the idler analysis
/// phase scanned ahead of its splitter. Period 2π.
pub fn qubit_fringe(
    pair: (usize, usize),
    scan: &[f64],
    template: &FringeTemplate,
) -> Result<Fringe> {
    check_pair(pair)?;
    let u_s = splitter_on_pair(pair);
    let k = pair.0.max(pair.1);
    fringe_over(FringeKind::Qubit, pair, scan, template, |phi| {
        let mut shift = nalgebra::Matrix3::identity();
        shift[(k, k)] = C64::from_polar(1.0, phi);
        let u_i = Unitary3::new(u_s.matrix() * shift).expect("phase-shifted splitter is unitary");
        let state = pair_state(pair, template, [0.0, 0.0])?;
        probs_with_noise(&state, &u_s, &u_i, &template.noise)
    })
}

/// Sinusoid fit of one fringe: value ≈ offset + amplitude·cos(kφ − phase0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityFit {
    pub visibility: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub phase0_rad: f64,
    /// Set when the data carry no fittable modulation.
    pub flat: bool,
}

/// Least-squares visibility of the tracked detector pair.
///
/// The fit model is c₀ + c₁cos(kφ) + c₂sin(kφ) with the harmonic k fixed by
/// the fringe kind; visibility is (max−min)/(max+min) of the fitted curve.
pub fn visibility(f: &Fringe) -> Result<VisibilityFit> {
    let y = f.tracked_series();
    let k = f.kind.harmonic();
    let span = f.phases_rad.last().unwrap_or(&0.0) - f.phases_rad.first().unwrap_or(&0.0);
    if f.phases_rad.len() < 4 {
        return Err(Error::Domain("fringe needs at least 4 points".into()));
    }
    if span + 1e-12 < f.kind.period() {
        return Err(Error::Domain(format!(
            "scan span {span:.4} rad does not cover one period {:.4} rad",
            f.kind.period()
        )));
    }

    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (phi, yi) in f.phases_rad.iter().zip(&y) {
        let row = nalgebra::Vector3::new(1.0, (k * phi).cos(), (k * phi).sin());
        ata += row * row.transpose();
        aty += row * *yi;
    }
    let coeffs = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::Numerical("singular normal equations in fringe fit".into()))?;
    let (c0, c1, c2) = (coeffs[0], coeffs[1], coeffs[2]);
    let amplitude = (c1 * c1 + c2 * c2).sqrt();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if amplitude < 1e-9 * scale || c0 <= 0.0 {
        return Ok(VisibilityFit {
            visibility: 0.0,
            offset: c0,
            amplitude,
            phase0_rad: 0.0,
            flat: true,
        });
    }
    Ok(VisibilityFit {
        visibility: amplitude / c0,
        offset: c0,
        amplitude,
        phase0_rad: c2.atan2(c1),
        flat: false,
    })
}
