//! Transfer-matrix model of the dual-MZI micro-ring (DMZI-R) photon-pair source.
//!
//! The ring is coupled through two unbalanced MZIs built from four directional
//! couplers (κ₁..κ₄) and six waveguide arms (l₁..l₆; l₃..l₆ are the ring
//! quarters, l₁/l₂ the outer MZI arms). Drop/through amplitudes come from a
//! closed-form expression and, independently, from a chain-matrix cascade; the
//! two routes agree to machine precision and are cross-checked in tests.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Strategy};
use crate::qcore::{Mat2, C64};
use crate::{Error, Result};

/// Ring radius of the reference chip, µm.
pub const RADIUS_UM: f64 = 15.0;
/// Outer-arm length excess of the input MZI, µm.
pub const DELTA_L1_UM: f64 = 47.8;
/// Outer-arm length excess of the output MZI, µm.
pub const DELTA_L2_UM: f64 = 48.0;
/// Amplitude coupling ratio of the input-side directional couplers.
pub const KAPPA_IN: f64 = 0.25;
/// Amplitude coupling ratio of the output-side directional couplers.
pub const KAPPA_OUT: f64 = 0.20;
/// Power attenuation 2α of the waveguide, 1/cm; the field decays at half this.
pub const POWER_LOSS_PER_CM: f64 = 0.69;
/// Pump resonance wavelength the model is anchored to, nm.
pub const LAMBDA0_NM: f64 = 1552.02;
/// Ring free spectral range the group index is calibrated to, nm.
pub const FSR_TARGET_NM: f64 = 6.2;
/// Longitudinal mode order of the anchor resonance.
pub const RESONANCE_ORDER: u32 = 146;
/// Coupler amplitude transmission in the calibrated configuration.
pub const GAMMA_CALIBRATED: f64 = 0.998;

/// Input-MZI heater phase that nulls the through port at the pump resonance
/// for the calibrated configuration. Solved by [`critical_coupling_trim`],
/// which tests reproduce against this value.
pub const TRIM1_CRITICAL_RAD: f64 = 2.194206136883405;

/// Geometry and material parameters of one DMZI-R source.
///
/// Units are carried in the field names. `alpha_field_per_cm` is the field
/// amplitude decay rate, i.e. half the usual power attenuation coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingParams {
    pub radius_um: f64,
    pub alpha_field_per_cm: f64,
    /// Coupler amplitude ratios κ₁..κ₄ (κ₁,κ₂ input MZI; κ₃,κ₄ output MZI).
    pub kappa: [f64; 4],
    /// Coupler amplitude transmission γ.
    pub gamma: f64,
    /// Arm lengths l₁..l₆, µm. l₁/l₂ are the MZI outer arms; l₃..l₆ the ring quarters.
    pub arm_lengths_um: [f64; 6],
    /// Static heater phase offsets added to each arm's propagation phase, rad.
    pub phase_trims_rad: [f64; 6],
    pub group_index: f64,
    /// Effective index at `lambda0_nm`.
    pub n_eff0: f64,
    pub lambda0_nm: f64,
}

impl RingParams {
    /// Reference geometry with the given coupler transmission and heater trims.
    fn reference(gamma: f64, phase_trims_rad: [f64; 6]) -> Self {
        let l_ring = 2.0 * std::f64::consts::PI * RADIUS_UM;
        let l_arc = l_ring / 4.0;
        let lam0_um = LAMBDA0_NM * 1e-3;
        // Group index pinned by the resonance spacing; effective index by the mode order.
        let group_index = lam0_um * lam0_um / (FSR_TARGET_NM * 1e-3 * l_ring);
        let n_eff0 = f64::from(RESONANCE_ORDER) * lam0_um / l_ring;
        RingParams {
            radius_um: RADIUS_UM,
            alpha_field_per_cm: POWER_LOSS_PER_CM / 2.0,
            kappa: [KAPPA_IN, KAPPA_IN, KAPPA_OUT, KAPPA_OUT],
            gamma,
            arm_lengths_um: [
                l_arc + DELTA_L1_UM,
                l_arc + DELTA_L2_UM,
                l_arc,
                l_arc,
                l_arc,
                l_arc,
            ],
            phase_trims_rad,
            group_index,
            n_eff0,
            lambda0_nm: LAMBDA0_NM,
        }
    }

    /// As-designed chip: ideal couplers, no heater trims.
    pub fn nominal() -> Self {
        Self::reference(1.0, [0.0; 6])
    }

    /// Heater-calibrated operating point: the output MZI is parked at its
    /// anti-parity phase (decoupled for the pump) and the input MZI is trimmed
    /// so the pump resonance is critically coupled.
    pub fn calibrated() -> Self {
        let mut p = Self::reference(GAMMA_CALIBRATED, [0.0; 6]);
        p.phase_trims_rad[0] = TRIM1_CRITICAL_RAD;
        p.phase_trims_rad[1] = p.antiparity_trim2();
        p
    }

    /// Copy with loss and coupler attenuation switched off.
    pub fn lossless(&self) -> Self {
        let mut p = self.clone();
        p.alpha_field_per_cm = 0.0;
        p.gamma = 1.0;
        p
    }

    /// Output-MZI trim that puts its detuning phase at π for the anchor wavelength.
    pub fn antiparity_trim2(&self) -> f64 {
        let beta0 = self.beta_per_um(self.lambda0_nm);
        let dl2 = self.arm_lengths_um[1] - self.arm_lengths_um[4];
        (std::f64::consts::PI - beta0 * dl2).rem_euclid(2.0 * std::f64::consts::PI)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius_um <= 0.0 {
            return Err(Error::Domain("radius must be positive".into()));
        }
        for (i, k) in self.kappa.iter().enumerate() {
            if !(0.0..=1.0).contains(k) {
                return Err(Error::Domain(format!("kappa{} = {k} outside [0,1]", i + 1)));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Domain(format!(
                "gamma = {} outside (0,1]",
                self.gamma
            )));
        }
        if self.arm_lengths_um.iter().any(|&l| l <= 0.0) {
            return Err(Error::Domain("arm lengths must be positive".into()));
        }
        if self.alpha_field_per_cm < 0.0 {
            return Err(Error::Domain(
                "loss coefficient must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// First-order dispersion: n_eff(λ) = n_eff0 − (λ−λ0)(n_g−n_eff0)/λ0.
    pub fn n_eff(&self, lambda_nm: f64) -> f64 {
        let lam = lambda_nm * 1e-3;
        let lam0 = self.lambda0_nm * 1e-3;
        self.n_eff0 - (lam - lam0) * (self.group_index - self.n_eff0) / lam0
    }

    /// Propagation constant β = 2π·n_eff/λ, 1/µm.
    pub fn beta_per_um(&self, lambda_nm: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.n_eff(lambda_nm) / (lambda_nm * 1e-3)
    }

    fn alpha_per_um(&self) -> f64 {
        self.alpha_field_per_cm * 1e-4
    }

    /// Arm phase factor φᵢ = e^{−αlᵢ}·e^{iθᵢ} with θᵢ = βlᵢ + trimᵢ.
    fn arm_phase(&self, arm: usize, beta: f64) -> C64 {
        let l = self.arm_lengths_um[arm];
        let theta = beta * l + self.phase_trims_rad[arm];
        C64::from_polar((-self.alpha_per_um() * l).exp(), theta)
    }

    /// Arm phase θᵢ = βlᵢ + trimᵢ (radians, not reduced).
    pub fn arm_theta(&self, arm: usize, lambda_nm: f64) -> f64 {
        self.beta_per_um(lambda_nm) * self.arm_lengths_um[arm] + self.phase_trims_rad[arm]
    }
}

/// Directional coupler transfer matrix γ·[[t, iκ],[iκ, t]], t = √(1−κ²).
pub fn coupler_matrix(kappa: f64, gamma: f64) -> Result<Mat2> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Domain(format!("kappa = {kappa} outside [0,1]")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} outside (0,1]")));
    }
    let t = C64::new(gamma * (1.0 - kappa * kappa).sqrt(), 0.0);
    let ik = C64::new(0.0, gamma * kappa);
    Ok(Mat2::new(t, ik, ik, t))
}

/// Two-arm propagation matrix diag(e^{i(β+iα)lₐ}, e^{i(β+iα)l_b}).
pub fn propagation_matrix(l_a_um: f64, l_b_um: f64, beta_per_um: f64, alpha_per_um: f64) -> Mat2 {
    let z = C64::new(0.0, 0.0);
    let pa = C64::from_polar((-alpha_per_um * l_a_um).exp(), beta_per_um * l_a_um);
    let pb = C64::from_polar((-alpha_per_um * l_b_um).exp(), beta_per_um * l_b_um);
    Mat2::new(pa, z, z, pb)
}

/// Transfer-to-chain conversion: for H mapping (x₁,x₂)→(y₁,y₂), the chain
/// matrix maps (y₂,x₂)→(x₁,y₁). Requires H₂₁ ≠ 0.
pub fn h_to_g(h: &Mat2) -> Result<Mat2> {
    let h21 = h[(1, 0)];
    if h21.norm() < 1e-15 {
        return Err(Error::SingularConversion("H21 is zero".into()));
    }
    Ok(Mat2::new(
        C64::new(1.0, 0.0) / h21,
        -h[(1, 1)] / h21,
        h[(0, 0)] / h21,
        (h[(0, 1)] * h21 - h[(0, 0)] * h[(1, 1)]) / h21,
    ))
}

/// Chain-to-transfer conversion, the exact inverse of [`h_to_g`]. Requires G₁₁ ≠ 0.
pub fn g_to_h(g: &Mat2) -> Result<Mat2> {
    let g11 = g[(0, 0)];
    if g11.norm() < 1e-15 {
        return Err(Error::SingularConversion("G11 is zero".into()));
    }
    Ok(Mat2::new(
        g[(1, 0)] / g11,
        (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]) / g11,
        C64::new(1.0, 0.0) / g11,
        -g[(0, 1)] / g11,
    ))
}

fn kappa_t(p: &RingParams) -> ([f64; 4], [f64; 4]) {
    let mut t = [0.0; 4];
    for i in 0..4 {
        t[i] = (1.0 - p.kappa[i] * p.kappa[i]).sqrt();
    }
    (p.kappa, t)
}

/// Drop/through field amplitudes at one wavelength (closed form).
///
/// The drop and through expressions share the resonance denominator
/// D = γ⁴(t₃t₄φ₅−κ₃κ₄φ₂)φ₆(t₁t₂φ₃−κ₁κ₂φ₁)φ₄ − 1.
pub fn drop_through_amplitudes(p: &RingParams, lambda_nm: f64) -> Result<(C64, C64)> {
    p.validate()?;
    let beta = p.beta_per_um(lambda_nm);
    let (k, t) = kappa_t(p);
    let ph: Vec<C64> = (0..6).map(|i| p.arm_phase(i, beta)).collect();
    let (p1, p2, p3, p4, p5, p6) = (ph[0], ph[1], ph[2], ph[3], ph[4], ph[5]);
    let g2 = p.gamma * p.gamma;
    let g4 = g2 * g2;
    let g6 = g4 * g2;
    let den = (t[2] * t[3] * p5 - k[2] * k[3] * p2)
        * p6
        * (t[0] * t[1] * p3 - k[0] * k[1] * p1)
        * p4
        * g4
        - C64::new(1.0, 0.0);
    if den.norm() < 1e-15 {
        return Err(Error::Numerical(format!(
            "resonance denominator vanished at {lambda_nm} nm"
        )));
    }
    let e_d =
        (t[0] * k[1] * p1 + k[0] * t[1] * p3) * p4 * (k[2] * t[3] * p2 + t[2] * k[3] * p5) * g4
            / den;
    let e_t = ((t[2] * t[3] * p1 * p3 * p4 * p5 * p6 - k[2] * k[3] * p1 * p2 * p3 * p4 * p6) * g6
        - (t[0] * t[1] * p1 - k[0] * k[1] * p3) * g2)
        / den;
    Ok((e_d, e_t))
}

/// Drop/through amplitudes via the full chain-matrix cascade.
///
/// Independent of [`drop_through_amplitudes`]: builds the two MZI transfer
/// matrices, converts them to chain form, closes the loop through the ring
/// arcs, and reads E_d = 1/G_T12, E_t = G_T22/G_T12 for unit input.
pub fn drop_through_cascade(p: &RingParams, lambda_nm: f64) -> Result<(C64, C64)> {
    p.validate()?;
    let beta = p.beta_per_um(lambda_nm);
    let trims = p.phase_trims_rad;
    let trim_phase = |i: usize| C64::from_polar(1.0, trims[i]);

    let c_in = coupler_matrix(p.kappa[0], p.gamma)?;
    let c_in2 = coupler_matrix(p.kappa[1], p.gamma)?;
    let c_out = coupler_matrix(p.kappa[2], p.gamma)?;
    let c_out2 = coupler_matrix(p.kappa[3], p.gamma)?;
    let alpha = p.alpha_per_um();
    let ls = p.arm_lengths_um;

    let mut prop1 = propagation_matrix(ls[0], ls[2], beta, alpha);
    prop1[(0, 0)] *= trim_phase(0);
    prop1[(1, 1)] *= trim_phase(2);
    let mut prop2 = propagation_matrix(ls[1], ls[4], beta, alpha);
    prop2[(0, 0)] *= trim_phase(1);
    prop2[(1, 1)] *= trim_phase(4);

    let h_c1 = c_in2 * prop1 * c_in;
    let h_c2 = c_out2 * prop2 * c_out;
    let g_c1 = h_to_g(&h_c1)?;
    let g_c2 = h_to_g(&h_c2)?;
    let det = g_c2[(0, 0)] * g_c2[(1, 1)] - g_c2[(0, 1)] * g_c2[(1, 0)];
    if det.norm() < 1e-15 {
        return Err(Error::SingularConversion(
            "chain matrix not invertible".into(),
        ));
    }
    let g_c2_inv = Mat2::new(g_c2[(1, 1)], -g_c2[(0, 1)], -g_c2[(1, 0)], g_c2[(0, 0)]) / det;

    // Arc section: E₂ = φ₄⁻¹·E₃ (running backwards through l₄), E₁ = φ₆·E₄.
    let phi4 = p.arm_phase(3, beta);
    let phi6 = p.arm_phase(5, beta);
    let z = C64::new(0.0, 0.0);
    let t_arcs = Mat2::new(z, C64::new(1.0, 0.0) / phi4, phi6, z);

    let g_t = g_c1 * t_arcs * g_c2_inv;
    if g_t[(0, 1)].norm() < 1e-15 {
        return Err(Error::SingularConversion("G_T12 is zero".into()));
    }
    let e_d = C64::new(1.0, 0.0) / g_t[(0, 1)];
    let e_t = g_t[(1, 1)] / g_t[(0, 1)];
    Ok((e_d, e_t))
}

/// Complex drop/through spectra over a strictly increasing wavelength grid.
#[derive(Debug, Clone)]
pub struct SpectralResponse {
    pub wavelengths_nm: Vec<f64>,
    pub drop: Vec<C64>,
    pub through: Vec<C64>,
}

impl SpectralResponse {
    pub fn drop_power(&self, i: usize) -> f64 {
        self.drop[i].norm_sqr()
    }

    pub fn through_power(&self, i: usize) -> f64 {
        self.through[i].norm_sqr()
    }
}

/// Evaluates the closed-form response over a uniform grid.
pub fn sweep_spectrum(
    p: &RingParams,
    lambda_start_nm: f64,
    lambda_stop_nm: f64,
    n_points: usize,
) -> Result<SpectralResponse> {
    sweep_spectrum_with(
        Strategy::default(),
        p,
        lambda_start_nm,
        lambda_stop_nm,
        n_points,
    )
}

/// [`sweep_spectrum`] with an explicit execution strategy (used by benches).
pub fn sweep_spectrum_with(
    strategy: Strategy,
    p: &RingParams,
    lambda_start_nm: f64,
    lambda_stop_nm: f64,
    n_points: usize,
) -> Result<SpectralResponse> {
    if !lambda_start_nm.is_finite()
        || !lambda_stop_nm.is_finite()
        || lambda_start_nm >= lambda_stop_nm
    {
        return Err(Error::Domain(format!(
            "empty wavelength range [{lambda_start_nm}, {lambda_stop_nm}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::Domain("sweep needs at least 2 points".into()));
    }
    p.validate()?;
    let step = (lambda_stop_nm - lambda_start_nm) / (n_points - 1) as f64;
    let wavelengths_nm: Vec<f64> = (0..n_points)
        .map(|i| lambda_start_nm + step * i as f64)
        .collect();
    let points = exec::map_range(strategy, n_points, |i| {
        drop_through_amplitudes(p, wavelengths_nm[i]).expect("params validated above")
    });
    let drop = points.iter().map(|(d, _)| *d).collect();
    let through = points.iter().map(|(_, t)| *t).collect();
    Ok(SpectralResponse {
        wavelengths_nm,
        drop,
        through,
    })
}

fn through_power_at(p: &RingParams, lambda_nm: f64) -> f64 {
    drop_through_amplitudes(p, lambda_nm)
        .map(|(_, t)| t.norm_sqr())
        .unwrap_or(f64::MAX)
}

/// Golden-section minimization of a unimodal scalar function.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xatol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xatol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Through-port dip wavelengths in [start, stop], refined to 0.01 pm.
///
/// A dip is a grid-local minimum falling below 0.9× the window's maximum
/// through power.
pub fn find_resonances(
    p: &RingParams,
    lambda_start_nm: f64,
    lambda_stop_nm: f64,
) -> Result<Vec<f64>> {
    let span = lambda_stop_nm - lambda_start_nm;
    if span <= 0.0 {
        return Err(Error::Domain("empty wavelength range".into()));
    }
    let n = ((span / 5e-4).ceil() as usize).clamp(201, 200_001);
    let sr = sweep_spectrum(p, lambda_start_nm, lambda_stop_nm, n)?;
    let t: Vec<f64> = (0..n).map(|i| sr.through_power(i)).collect();
    let t_max = t.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if t[i] < t[i - 1] && t[i] <= t[i + 1] && t[i] < 0.9 * t_max {
            let lam = golden_min(
                |l| through_power_at(p, l),
                sr.wavelengths_nm[i - 1],
                sr.wavelengths_nm[i + 1],
                1e-8,
            );
            out.push(lam);
        }
    }
    Ok(out)
}

/// Mean adjacent spacing of a resonance comb, nm.
pub fn fsr_nm(resonances: &[f64]) -> Option<f64> {
    if resonances.len() < 2 {
        return None;
    }
    let sum: f64 = resonances.windows(2).map(|w| w[1] - w[0]).sum();
    Some(sum / (resonances.len() - 1) as f64)
}

/// Full width at half depth of the through-port dip at `lambda_res_nm`, pm.
pub fn linewidth_pm(p: &RingParams, lambda_res_nm: f64) -> Result<f64> {
    let window = 0.45;
    let n = 2001;
    let sr = sweep_spectrum(p, lambda_res_nm - window, lambda_res_nm + window, n)?;
    let t: Vec<f64> = (0..n).map(|i| sr.through_power(i)).collect();
    let (i_min, _) = t
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty sweep");
    let t_min = through_power_at(
        p,
        golden_min(
            |l| through_power_at(p, l),
            sr.wavelengths_nm[i_min.saturating_sub(1)],
            sr.wavelengths_nm[(i_min + 1).min(n - 1)],
            1e-8,
        ),
    );
    let t_bg = t.iter().copied().fold(0.0, f64::max);
    let half = 0.5 * (t_bg + t_min);

    let crossing = |mut lo: f64, mut hi: f64, rising: bool| -> f64 {
        // Bisect for through_power == half between lo (below) and hi (above).
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let above = through_power_at(p, mid) > half;
            if above == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut il = i_min;
    while il > 0 && t[il] < half {
        il -= 1;
    }
    let mut ir = i_min;
    while ir < n - 1 && t[ir] < half {
        ir += 1;
    }
    if t[il] < half || t[ir] < half {
        return Err(Error::NotAResonance(lambda_res_nm));
    }
    let left = crossing(sr.wavelengths_nm[il], sr.wavelengths_nm[il + 1], false);
    let right = crossing(sr.wavelengths_nm[ir - 1], sr.wavelengths_nm[ir], true);
    Ok((right - left) * 1000.0)
}

/// One satisfied round-trip phase condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopCondition {
    /// Loop index 1..=4: both outer arms, outer-1 only, outer-2 only, bare ring.
    pub loop_index: u8,
    /// Nearest integer N with loop phase ≈ N·π.
    pub nearest_n: i64,
    pub residual_rad: f64,
}

impl LoopCondition {
    pub fn n_is_even(&self) -> bool {
        self.nearest_n % 2 == 0
    }
}

/// Round-trip phase conditions satisfied at `lambda_nm` within `tol_rad`.
///
/// The four closed loops are (1) l₁+l₄+l₂+l₆, (2) l₁+l₄+l₅+l₆,
/// (3) l₃+l₄+l₂+l₆ and (4) l₃+l₄+l₅+l₆; each resonates when its total phase
/// is an integer multiple of π, with the parity selecting the interference sign.
pub fn resonance_conditions(p: &RingParams, lambda_nm: f64, tol_rad: f64) -> Vec<LoopCondition> {
    let th: Vec<f64> = (0..6).map(|i| p.arm_theta(i, lambda_nm)).collect();
    let loops = [
        th[0] + th[3] + th[1] + th[5],
        th[0] + th[3] + th[4] + th[5],
        th[2] + th[3] + th[1] + th[5],
        th[2] + th[3] + th[4] + th[5],
    ];
    let mut out = Vec::new();
    for (i, phase) in loops.iter().enumerate() {
        let n = (phase / std::f64::consts::PI).round();
        let residual = phase - n * std::f64::consts::PI;
        if residual.abs() <= tol_rad {
            out.push(LoopCondition {
                loop_index: (i + 1) as u8,
                nearest_n: n as i64,
                residual_rad: residual,
            });
        }
    }
    out
}

/// Coupling regime of a resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingRegime {
    Under,
    Critical,
    Over,
}

/// Classifies the resonance at `lambda_nm` by perturbing the input coupling.
///
/// Critical requires the on-resonance through power to be both extinguished
/// (< 0.01) and a local minimum under ±1% input-κ perturbation; otherwise the
/// sign of dT/dκ separates over- from under-coupling.
pub fn classify_coupling(p: &RingParams, lambda_nm: f64) -> Result<CouplingRegime> {
    let refine = |params: &RingParams, guess: f64, half_window: f64| -> f64 {
        golden_min(
            |l| through_power_at(params, l),
            guess - half_window,
            guess + half_window,
            1e-8,
        )
    };
    let lam_res = refine(p, lambda_nm, 0.1);
    let t0 = through_power_at(p, lam_res);

    let sr = sweep_spectrum(p, lambda_nm - 1.55, lambda_nm + 1.55, 501)?;
    let t_bg = (0..501).map(|i| sr.through_power(i)).fold(0.0, f64::max);
    if t0 > 0.9 * t_bg || (lam_res - lambda_nm).abs() > 0.09 {
        return Err(Error::NotAResonance(lambda_nm));
    }

    let perturbed = |scale: f64| -> f64 {
        let mut q = p.clone();
        q.kappa[0] *= scale;
        q.kappa[1] *= scale;
        let lam = refine(&q, lam_res, 0.15);
        through_power_at(&q, lam)
    };
    let t_minus = perturbed(0.99);
    let t_plus = perturbed(1.01);

    if t0 < 0.01 && t0 <= t_minus && t0 <= t_plus {
        Ok(CouplingRegime::Critical)
    } else if t_plus > t_minus {
        Ok(CouplingRegime::Over)
    } else {
        Ok(CouplingRegime::Under)
    }
}

/// Coincidence efficiency CC²_DD / (CC_DD + (CC_DT + CC_TD)/2)².
///
/// CC_DD counts drop-drop pair coincidences; CC_DT and CC_TD count pairs
/// split between the drop and through ports.
pub fn coincidence_efficiency(cc_dd: f64, cc_dt: f64, cc_td: f64) -> Result<f64> {
    if cc_dd < 0.0 || cc_dt < 0.0 || cc_td < 0.0 {
        return Err(Error::Domain("counts must be non-negative".into()));
    }
    if cc_dd == 0.0 && cc_dt == 0.0 && cc_td == 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    let denom = cc_dd + 0.5 * (cc_dt + cc_td);
    Ok(cc_dd * cc_dd / (denom * denom))
}

/// Expected split-coincidence counts when each photon independently leaks to
/// the through port: CC_DD = N(1−q_s)(1−q_i), CC_DT = N(1−q_s)q_i, CC_TD = N q_s(1−q_i).
pub fn split_coincidence_counts(n_pairs: f64, q_signal: f64, q_idler: f64) -> (f64, f64, f64) {
    (
        n_pairs * (1.0 - q_signal) * (1.0 - q_idler),
        n_pairs * (1.0 - q_signal) * q_idler,
        n_pairs * q_signal * (1.0 - q_idler),
    )
}

/// Low-power coincidence efficiency predicted from the simulated spectra.
///
/// The split fractions are the on-resonance through/(through+drop) power
/// ratios at the signal (+1 FSR) and idler (−1 FSR) resonances.
pub fn low_power_efficiency(p: &RingParams) -> Result<f64> {
    let pump = find_resonances(p, p.lambda0_nm - 1.0, p.lambda0_nm + 1.0)?
        .first()
        .copied()
        .ok_or(Error::NotAResonance(p.lambda0_nm))?;
    let q_at = |guess: f64| -> Result<f64> {
        let res = find_resonances(p, guess - 1.5, guess + 1.5)?;
        let lam = res
            .iter()
            .copied()
            .min_by(|a, b| (a - guess).abs().total_cmp(&(b - guess).abs()))
            .ok_or(Error::NotAResonance(guess))?;
        let (d, t) = drop_through_amplitudes(p, lam)?;
        Ok(t.norm_sqr() / (t.norm_sqr() + d.norm_sqr()))
    };
    let q_s = q_at(pump + FSR_TARGET_NM)?;
    let q_i = q_at(pump - FSR_TARGET_NM)?;
    let (dd, dt, td) = split_coincidence_counts(1e4, q_s, q_i);
    coincidence_efficiency(dd, dt, td)
}

/// Solves for the input-MZI trim that critically couples the pump resonance.
///
/// Returns (trim1, λ_res). Seeds the trim from the analytic condition
/// M₁ = γ⁴·M₂·e^{−αL} on the MZI transmission magnitudes, locates the
/// resonance dip with a coarse scan, then drives |E_t|² to zero with a
/// Levenberg-Marquardt iteration in (λ, trim1).
pub fn critical_coupling_trim(p: &RingParams) -> Result<(f64, f64)> {
    p.validate()?;
    let l_ring: f64 = p.arm_lengths_um[2..6].iter().sum();
    let g4 = p.gamma.powi(4);
    let (k, t) = kappa_t(p);
    let beta0 = p.beta_per_um(p.lambda0_nm);

    let delta2 = beta0 * (p.arm_lengths_um[1] - p.arm_lengths_um[4]) + p.phase_trims_rad[1]
        - p.phase_trims_rad[4];
    let m2 = (C64::new(t[2] * t[3], 0.0)
        - C64::new(k[2] * k[3], 0.0) * C64::from_polar(1.0, -delta2))
    .norm();
    let m1_target = g4 * m2 * (-p.alpha_per_um() * l_ring).exp();
    let cos_d1 = (t[0].powi(2) * t[1].powi(2) + k[0].powi(2) * k[1].powi(2)
        - m1_target * m1_target)
        / (2.0 * t[0] * t[1] * k[0] * k[1]);
    if !(-1.0..=1.0).contains(&cos_d1) {
        return Err(Error::Numerical(
            "critical coupling unreachable for these couplers".into(),
        ));
    }
    let delta1 = cos_d1.acos();
    let dl1 = p.arm_lengths_um[0] - p.arm_lengths_um[2];
    let trim_seed =
        (delta1 - beta0 * dl1 - p.phase_trims_rad[2]).rem_euclid(2.0 * std::f64::consts::PI);

    let et = |lam: f64, trim: f64| -> Result<C64> {
        let mut q = p.clone();
        q.phase_trims_rad[0] = trim;
        drop_through_amplitudes(&q, lam).map(|(_, e_t)| e_t)
    };

    let mut trim = trim_seed;
    // Land in the resonance basin first: the dip is a few tens of pm wide,
    // so a cold-started root step has nothing to bite on.
    let mut lam = p.lambda0_nm;
    let mut r0 = et(lam, trim)?.norm_sqr();
    for i in 0..=400 {
        let l = p.lambda0_nm - 0.1 + 0.2 * i as f64 / 400.0;
        let r = et(l, trim)?.norm_sqr();
        if r < r0 {
            r0 = r;
            lam = l;
        }
    }

    // Levenberg-Marquardt on ½|E_t|². Marquardt scaling keeps the step sane
    // even though λ (nm) and trim (rad) have very different derivative scales.
    let (d_lam, d_trim) = (1e-6, 1e-7);
    let mut mu = 1e-3;
    for _ in 0..200 {
        if r0 < 1e-22 {
            return Ok((trim, lam));
        }
        let f0 = et(lam, trim)?;
        let fl = (et(lam + d_lam, trim)? - f0) / d_lam;
        let ft = (et(lam, trim + d_trim)? - f0) / d_trim;
        let jtj = [
            [fl.norm_sqr(), (fl.conj() * ft).re],
            [(fl.conj() * ft).re, ft.norm_sqr()],
        ];
        let jtf = [(fl.conj() * f0).re, (ft.conj() * f0).re];
        let mut accepted = false;
        for _ in 0..60 {
            let a = [
                [jtj[0][0] * (1.0 + mu), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + mu)],
            ];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                mu *= 10.0;
                continue;
            }
            let dx = (-jtf[0] * a[1][1] + jtf[1] * a[0][1]) / det;
            let dy = (-jtf[1] * a[0][0] + jtf[0] * a[1][0]) / det;
            let r_try = et(lam + dx, trim + dy)?.norm_sqr();
            if r_try < r0 {
                lam += dx;
                trim += dy;
                r0 = r_try;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
            if mu > 1e14 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    if r0 < 1e-18 {
        Ok((trim, lam))
    } else {
        Err(Error::Numerical(format!(
            "trim solve did not converge: |E_t|^2 = {r0:.3e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coupler_limits() {
        let id = coupler_matrix(0.0, 1.0).unwrap();
        assert!((id - Mat2::identity()).norm() < 1e-15);
        let cross = coupler_matrix(1.0, 1.0).unwrap();
        assert!(cross[(0, 0)].norm() < 1e-15);
        assert_abs_diff_eq!(cross[(0, 1)].im, 1.0, epsilon = 1e-15);
        let c = coupler_matrix(0.25, 1.0).unwrap();
        assert!((c * c.adjoint() - Mat2::identity()).norm() < 1e-12);
        assert!(coupler_matrix(1.5, 1.0).is_err());
    }

    #[test]
    fn propagation_phase_and_loss() {
        let lam_um = 1.552;
        let n_eff = 2.4;
        let beta = 2.0 * std::f64::consts::PI * n_eff / lam_um;
        let m = propagation_matrix(48.0, 48.0, beta, 0.0);
        let expect = C64::from_polar(1.0, beta * 48.0);
        assert!((m[(0, 0)] - expect).norm() < 1e-9);

        let full_wave = 2.0 * std::f64::consts::PI / beta;
        let m2 = propagation_matrix(full_wave, full_wave, beta, 0.0);
        assert!((m2[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-9);

        let lossy = propagation_matrix(100.0, 100.0, beta, 1e-3);
        assert!(lossy[(0, 0)].norm() < 1.0);
    }

    #[test]
    fn chain_conversion_roundtrip_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let h = Mat2::from_fn(|_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            if h[(1, 0)].norm() < 1e-3 {
                continue;
            }
            let back = g_to_h(&h_to_g(&h).unwrap()).unwrap();
            assert!((back - h).norm() < 1e-12);
        }
        let swap = Mat2::new(
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        );
        let g = h_to_g(&swap).unwrap();
        assert!((g - Mat2::identity()).norm() < 1e-15);
        let singular = Mat2::new(
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        );
        assert!(h_to_g(&singular).is_err());
    }

    #[test]
    fn closed_form_matches_cascade_on_random_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut max_err: f64 = 0.0;
        for _ in 0..1000 {
            let mut p = RingParams::nominal();
            p.kappa = [(); 4].map(|_| rng.random_range(0.05..0.95));
            p.gamma = rng.random_range(0.9..1.0);
            p.arm_lengths_um = [(); 6].map(|_| rng.random_range(5.0..120.0));
            p.phase_trims_rad = [(); 6].map(|_| rng.random_range(0.0..std::f64::consts::TAU));
            let lam = rng.random_range(1530.0..1570.0);
            let (d1, t1) = drop_through_amplitudes(&p, lam).unwrap();
            let (d2, t2) = drop_through_cascade(&p, lam).unwrap();
            max_err = max_err.max((d1 - d2).norm()).max((t1 - t2).norm());
        }
        assert!(max_err < 1e-9, "max closed-vs-cascade error {max_err:.3e}");
    }

    #[test]
    fn lossless_energy_conservation() {
        let p = RingParams::calibrated().lossless();
        for i in 0..500 {
            let lam = 1540.0 + 25.0 * (i as f64) / 499.0;
            let (d, t) = drop_through_amplitudes(&p, lam).unwrap();
            assert_abs_diff_eq!(d.norm_sqr() + t.norm_sqr(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn kappa_zero_output_decouples_drop() {
        let mut p = RingParams::nominal();
        p.kappa[2] = 0.0;
        p.kappa[3] = 0.0;
        let (d, _) = drop_through_amplitudes(&p, 1552.0).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn calibrated_pump_resonance_is_critically_nulled() {
        let p = RingParams::calibrated();
        let (trim1, lam_res) = critical_coupling_trim(&p).unwrap();
        assert_abs_diff_eq!(trim1, TRIM1_CRITICAL_RAD, epsilon = 1e-6);
        assert_abs_diff_eq!(lam_res, 1551.983858509681, epsilon = 1e-6);
        let (_, e_t) = drop_through_amplitudes(&p, lam_res).unwrap();
        assert!(e_t.norm_sqr() < 1e-12);
    }

    #[test]
    fn calibrated_linewidth_and_fsr() {
        let p = RingParams::calibrated();
        let res = find_resonances(&p, LAMBDA0_NM - 16.0, LAMBDA0_NM + 16.0).unwrap();
        assert_eq!(res.len(), 5, "expected 5 resonances, got {res:?}");
        let fsr = fsr_nm(&res).unwrap();
        assert!((fsr - 6.2).abs() < 0.2, "FSR {fsr} nm");
        let pump = res[2];
        let lw = linewidth_pm(&p, pump).unwrap();
        assert!((30.8..=68.9).contains(&lw), "linewidth {lw} pm");
    }

    #[test]
    fn drop_power_alternates_between_resonances() {
        let p = RingParams::calibrated();
        let res = find_resonances(&p, LAMBDA0_NM - 16.0, LAMBDA0_NM + 16.0).unwrap();
        let drops: Vec<f64> = res
            .iter()
            .map(|&l| drop_through_amplitudes(&p, l).unwrap().0.norm_sqr())
            .collect();
        for w in drops.windows(2) {
            let ratio = w[1] / w[0];
            assert!(
                (ratio - 1.0).abs() > 0.5,
                "adjacent resonances should alternate, ratio {ratio}"
            );
        }
        let above: Vec<bool> = drops.windows(2).map(|w| w[1] > w[0]).collect();
        for pair in above.windows(2) {
            assert_ne!(pair[0], pair[1], "alternation must flip sign each step");
        }
    }

    #[test]
    fn grid_refinement_keeps_peak_positions() {
        let p = RingParams::calibrated();
        let coarse = sweep_spectrum(&p, 1550.0, 1554.0, 4001).unwrap();
        let fine = sweep_spectrum(&p, 1550.0, 1554.0, 8001).unwrap();
        let argmin = |sr: &SpectralResponse| {
            let (i, _) = (0..sr.wavelengths_nm.len())
                .map(|i| (i, sr.through_power(i)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            sr.wavelengths_nm[i]
        };
        let step = 4.0 / 4000.0;
        assert!((argmin(&coarse) - argmin(&fine)).abs() <= step + 1e-12);
    }

    #[test]
    fn trims_are_two_pi_periodic() {
        let p = RingParams::calibrated();
        let mut q = p.clone();
        q.phase_trims_rad[0] += 2.0 * std::f64::consts::PI;
        q.phase_trims_rad[1] -= 2.0 * std::f64::consts::PI;
        for i in 0..40 {
            let lam = 1549.0 + 6.0 * (i as f64) / 39.0;
            let (d1, t1) = drop_through_amplitudes(&p, lam).unwrap();
            let (d2, t2) = drop_through_amplitudes(&q, lam).unwrap();
            assert!((d1 - d2).norm() < 1e-9);
            assert!((t1 - t2).norm() < 1e-9);
        }
    }

    #[test]
    fn resonance_loops_at_design_point() {
        // With design trims (both MZI detunings parked) every loop resonates at λ0,
        // with parities odd/even/odd/even.
        let mut p = RingParams::nominal();
        let beta0 = p.beta_per_um(LAMBDA0_NM);
        p.phase_trims_rad[0] = (-beta0 * DELTA_L1_UM).rem_euclid(2.0 * std::f64::consts::PI);
        p.phase_trims_rad[1] =
            (std::f64::consts::PI - beta0 * DELTA_L2_UM).rem_euclid(2.0 * std::f64::consts::PI);
        let loops = resonance_conditions(&p, LAMBDA0_NM, 1e-6);
        assert_eq!(
            loops.len(),
            4,
            "all four loops at the design point: {loops:?}"
        );
        let parity: Vec<bool> = loops.iter().map(LoopCondition::n_is_even).collect();
        assert_eq!(parity, vec![false, true, false, true]);

        let off = resonance_conditions(&p, LAMBDA0_NM + 1.3, 1e-6);
        assert!(
            off.is_empty(),
            "off resonance no loop should close: {off:?}"
        );
    }

    #[test]
    fn calibrated_pump_loops() {
        // The critical trims detune the MZI loops; only the trim-free ring
        // loop 4 still closes near the pump resonance (residual ~0.04 rad).
        let p = RingParams::calibrated();
        let lam_res = 1551.983858509681;
        let loops = resonance_conditions(&p, lam_res, 0.05);
        let idx: Vec<u8> = loops.iter().map(|l| l.loop_index).collect();
        assert!(
            idx.contains(&4),
            "ring loop must close at the pump: {loops:?}"
        );
        let four = loops.iter().find(|l| l.loop_index == 4).unwrap();
        assert!(
            four.n_is_even(),
            "pump sits on an even (drop-suppressed) order"
        );
        assert!(four.residual_rad.abs() < 0.05);

        let tight = resonance_conditions(&p, lam_res, 1e-2);
        assert!(
            tight.iter().all(|l| l.loop_index >= 3),
            "MZI loops 1 and 2 are parked off resonance: {tight:?}"
        );
    }

    #[test]
    fn coupling_classification() {
        let p = RingParams::calibrated();
        let res = find_resonances(&p, LAMBDA0_NM - 10.0, LAMBDA0_NM + 10.0).unwrap();
        let pump = res
            .iter()
            .copied()
            .min_by(|a, b| (a - LAMBDA0_NM).abs().total_cmp(&(b - LAMBDA0_NM).abs()))
            .unwrap();
        assert_eq!(
            classify_coupling(&p, pump).unwrap(),
            CouplingRegime::Critical
        );
        let signal = res.iter().copied().find(|&l| l > pump + 3.0).unwrap();
        let idler = res.iter().copied().rev().find(|&l| l < pump - 3.0).unwrap();
        assert_eq!(classify_coupling(&p, signal).unwrap(), CouplingRegime::Over);
        assert_eq!(classify_coupling(&p, idler).unwrap(), CouplingRegime::Over);

        assert!(matches!(
            classify_coupling(&p, pump + 1.5),
            Err(Error::NotAResonance(_))
        ));
    }

    #[test]
    fn under_coupling_detected_at_high_loss() {
        // Twenty times the design loss drops the round-trip amplitude below
        // the input-MZI transmission left at its critical setting, which is
        // the under-coupled side.
        let mut p = RingParams::calibrated();
        p.alpha_field_per_cm *= 20.0;
        let res = find_resonances(&p, LAMBDA0_NM - 1.0, LAMBDA0_NM + 1.0).unwrap();
        assert!(!res.is_empty());
        assert_eq!(
            classify_coupling(&p, res[0]).unwrap(),
            CouplingRegime::Under
        );
    }

    #[test]
    fn efficiency_formula() {
        assert_abs_diff_eq!(
            coincidence_efficiency(100.0, 0.0, 0.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            coincidence_efficiency(100.0, 10.0, 10.0).unwrap(),
            (100.0f64 / 110.0).powi(2),
            epsilon = 1e-12
        );
        assert!(matches!(
            coincidence_efficiency(0.0, 0.0, 0.0),
            Err(Error::UndefinedEfficiency)
        ));
    }

    #[test]
    fn low_power_efficiency_near_097() {
        let eff = low_power_efficiency(&RingParams::calibrated()).unwrap();
        assert!((eff - 0.97).abs() < 0.02, "efficiency {eff}");
    }

    #[test]
    fn config_roundtrip_via_json() {
        let p = RingParams::calibrated();
        let s = serde_json::to_string(&p).unwrap();
        let q: RingParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = s.replace("\"radius_um\"", "\"radius\"");
        assert!(serde_json::from_str::<RingParams>(&bad).is_err());
    }
}
