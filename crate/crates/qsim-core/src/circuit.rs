//! Programmable three-mode interferometer: MZI mesh, heater calibration,
//! and the closed-form decomposition of an arbitrary SU(3) target.
//!
//! Each analysis mesh is three MZIs with external phase shifters, acting on
//! mode pairs (1,2), (0,1), (1,2) in that order. Output phases are not
//! programmable, so synthesis is exact only up to a diagonal of phases on the
//! output modes; all probability-level quantities are unaffected.

use serde::{Deserialize, Serialize};

use crate::qcore::{Mat2, Mat3, Unitary3, Vec3C, C64, STRUCT_TOL};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// 50:50 multimode interference coupler, (1/√2)·[[1, i],[i, 1]].
pub fn mmi() -> Mat2 {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    Mat2::new(r, i, i, r)
}

/// MZI transfer matrix: MMI, internal phase θ on the second arm, MMI.
///
/// Equals i·e^{iθ/2}·[[−sin(θ/2), cos(θ/2)], [cos(θ/2), sin(θ/2)]];
/// θ = π is the bar state (up to mode-1 sign), θ = 0 the cross state.
pub fn mzi_unitary(theta: f64) -> Mat2 {
    let m = mmi();
    let z = C64::new(0.0, 0.0);
    let phase = Mat2::new(C64::new(1.0, 0.0), z, z, C64::from_polar(1.0, theta));
    m * phase * m
}

/// Heater phases for one mesh: external phases `z` and internal MZI phases `y`,
/// both in radians, indexed by element (element 0 acts first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSetting {
    pub z: [f64; 3],
    pub y: [f64; 3],
}

impl PhaseSetting {
    pub fn from_radians(z: [f64; 3], y: [f64; 3]) -> Self {
        PhaseSetting { z, y }
    }

    /// Builds from (Sz, Sy) pairs given in units of π.
    pub fn from_pi_pairs(pairs: [(f64, f64); 3]) -> Self {
        PhaseSetting {
            z: pairs.map(|(sz, _)| sz * std::f64::consts::PI),
            y: pairs.map(|(_, sy)| sy * std::f64::consts::PI),
        }
    }

    /// All phases folded into [0, 2π).
    pub fn reduced(&self) -> Self {
        PhaseSetting {
            z: self.z.map(|p| p.rem_euclid(TWO_PI)),
            y: self.y.map(|p| p.rem_euclid(TWO_PI)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseSettingWire {
    #[serde(rename = "Sz1")]
    sz1: f64,
    #[serde(rename = "Sy1")]
    sy1: f64,
    #[serde(rename = "Sz2")]
    sz2: f64,
    #[serde(rename = "Sy2")]
    sy2: f64,
    #[serde(rename = "Sz3")]
    sz3: f64,
    #[serde(rename = "Sy3")]
    sy3: f64,
    /// "rad" (default) or "pi".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<String>,
}

impl Serialize for PhaseSetting {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        PhaseSettingWire {
            sz1: self.z[0],
            sy1: self.y[0],
            sz2: self.z[1],
            sy2: self.y[1],
            sz3: self.z[2],
            sy3: self.y[2],
            units: None,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PhaseSetting {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let w = PhaseSettingWire::deserialize(de)?;
        let scale = match w.units.as_deref() {
            None | Some("rad") => 1.0,
            Some("pi") => std::f64::consts::PI,
            Some(other) => {
                return Err(serde::de::Error::custom(format!(
                    "unknown units \"{other}\", expected \"rad\" or \"pi\""
                )))
            }
        };
        Ok(PhaseSetting {
            z: [w.sz1 * scale, w.sz2 * scale, w.sz3 * scale],
            y: [w.sy1 * scale, w.sy2 * scale, w.sy3 * scale],
        })
    }
}

/// Thermo-optic phase shifter calibration: electrical power per 2π of phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeaterCalibration {
    pub mw_per_two_pi: f64,
}

impl Default for HeaterCalibration {
    fn default() -> Self {
        HeaterCalibration {
            mw_per_two_pi: 42.0,
        }
    }
}

impl HeaterCalibration {
    /// Heater power for a phase, with the phase folded into [0, 2π).
    pub fn phase_to_power_mw(&self, phase_rad: f64) -> f64 {
        self.mw_per_two_pi * phase_rad.rem_euclid(TWO_PI) / TWO_PI
    }

    /// Phase in [0, 2π) for a heater power in [0, mw_per_two_pi].
    pub fn power_to_phase_rad(&self, power_mw: f64) -> Result<f64> {
        if !(0.0..=self.mw_per_two_pi).contains(&power_mw) {
            return Err(Error::Domain(format!(
                "power {power_mw} mW outside [0, {}]",
                self.mw_per_two_pi
            )));
        }
        Ok((TWO_PI * power_mw / self.mw_per_two_pi) % TWO_PI)
    }
}

/// Mode pairs the three mesh elements act on, in application order.
const ELEMENT_PAIRS: [(usize, usize); 3] = [(1, 2), (0, 1), (1, 2)];

/// Embeds `block` on modes (`i`, `j`) of a 3×3 identity.
fn embed(pair: (usize, usize), block: &Mat2) -> Mat3 {
    let (i, j) = pair;
    let mut m = Mat3::identity();
    m[(i, i)] = block[(0, 0)];
    m[(i, j)] = block[(0, 1)];
    m[(j, i)] = block[(1, 0)];
    m[(j, j)] = block[(1, 1)];
    m
}

fn element(pair: (usize, usize), theta: f64, phi: f64) -> Mat3 {
    let z = C64::new(0.0, 0.0);
    let ext = Mat2::new(C64::new(1.0, 0.0), z, z, C64::from_polar(1.0, phi));
    embed(pair, &(mzi_unitary(theta) * ext))
}

/// Transfer matrix of the full mesh for one heater setting.
///
/// With all internal phases at π and external phases at zero the mesh is the
/// bar state diag(1, −1, 1).
pub fn multiport_unitary(setting: &PhaseSetting) -> Unitary3 {
    let mut u = Mat3::identity();
    for k in 0..3 {
        u = element(ELEMENT_PAIRS[k], setting.y[k], setting.z[k]) * u;
    }
    Unitary3::new(u).expect("mesh elements are unitary by construction")
}

/// Heater phases realizing `target` up to output-mode phases.
///
/// Closed form: the first two elements null the (0,2) and (0,1) entries of the
/// target by right-multiplication with their inverses, the third diagonalizes
/// the remaining 2×2 block. Every row of the synthesized mesh then matches the
/// corresponding target row up to a global phase.
pub fn decompose_unitary(target: &Unitary3) -> PhaseSetting {
    let u = target.matrix();

    let theta1 = 2.0 * u[(0, 1)].norm().atan2(u[(0, 2)].norm());
    let phi1 = u[(0, 2)].arg() - u[(0, 1)].arg() + std::f64::consts::PI;
    let v = u * element(ELEMENT_PAIRS[0], theta1, phi1).adjoint();

    let theta2 = 2.0 * v[(0, 0)].norm().atan2(v[(0, 1)].norm());
    let phi2 = v[(0, 1)].arg() - v[(0, 0)].arg() + std::f64::consts::PI;
    let w = v * element(ELEMENT_PAIRS[1], theta2, phi2).adjoint();

    let theta3 = 2.0 * w[(1, 1)].norm().atan2(w[(1, 2)].norm());
    let phi3 = w[(1, 2)].arg() - w[(1, 1)].arg() + std::f64::consts::PI;

    PhaseSetting {
        z: [phi1, phi2, phi3],
        y: [theta1, theta2, theta3],
    }
    .reduced()
}

/// Smallest |⟨a-th row of `a`, a-th row of `b`⟩| over the three rows.
///
/// Equals 1 exactly when the matrices agree up to per-row phases, the gauge
/// freedom left by [`decompose_unitary`].
pub fn row_overlap(a: &Unitary3, b: &Unitary3) -> f64 {
    let (ma, mb) = (a.matrix(), b.matrix());
    (0..3)
        .map(|r| {
            (0..3)
                .map(|c| ma[(r, c)].conj() * mb[(r, c)])
                .sum::<C64>()
                .norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Measurement unitary whose a-th output amplitude is ⟨ket_a|ψ⟩.
///
/// The rows must form an orthonormal basis; the returned matrix is their
/// entrywise conjugate so it composes directly with the mode-evolution engine.
pub fn measurement_unitary_from_kets(kets: &[Vec3C; 3]) -> Result<Unitary3> {
    let m = Mat3::from_fn(|a, j| kets[a][j].conj());
    Unitary3::new(m).map_err(|_| Error::NotUnitary {
        defect: {
            let g = m * m.adjoint();
            (g - Mat3::identity()).norm()
        },
        tol: STRUCT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random_unitary3;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mmi_is_unitary_and_balanced() {
        let m = mmi();
        assert!((m * m.adjoint() - Mat2::identity()).norm() < 1e-15);
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(m[(r, c)].norm_sqr(), 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn mzi_bar_and_cross_states() {
        let bar = mzi_unitary(std::f64::consts::PI);
        assert!(
            (bar - Mat2::new(
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
            ))
            .norm()
                < 1e-12
        );
        let cross = mzi_unitary(0.0);
        assert!(cross[(0, 0)].norm() < 1e-12);
        assert_abs_diff_eq!(cross[(0, 1)].norm_sqr(), 1.0, epsilon = 1e-12);
        let half = mzi_unitary(std::f64::consts::FRAC_PI_2);
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(half[(r, c)].norm_sqr(), 0.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn all_bar_mesh_is_signed_identity() {
        let setting = PhaseSetting::from_radians([0.0; 3], [std::f64::consts::PI; 3]);
        let u = multiport_unitary(&setting);
        let want = Mat3::from_diagonal(&Vec3C::new(
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(1.0, 0.0),
        ));
        assert!((u.matrix() - want).norm() < 1e-12);
    }

    #[test]
    fn fourier_setting_reaches_fourier_rows() {
        let setting = PhaseSetting::from_pi_pairs([(0.333, 0.5), (0.583, 0.392), (0.779, 0.5)]);
        let u = multiport_unitary(&setting);
        let f = Unitary3::fourier();
        let mut assigned = [usize::MAX; 3];
        for a in 0..3 {
            let overlaps: Vec<f64> = (0..3)
                .map(|b| {
                    (0..3)
                        .map(|c| u.matrix()[(a, c)].conj() * f.matrix()[(b, c)])
                        .sum::<C64>()
                        .norm()
                })
                .collect();
            let (best, &val) = overlaps
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .unwrap();
            assert!(val > 1.0 - 2e-2, "row {a} best overlap {val}");
            assigned[a] = best;
        }
        let mut sorted = assigned;
        sorted.sort_unstable();
        assert_eq!(sorted, [0, 1, 2], "rows must map to distinct Fourier rows");
    }

    #[test]
    fn projector_setting_routes_target_ket_to_one_port() {
        let setting = PhaseSetting::from_pi_pairs([(0.0, 0.5), (1.25, 0.608), (0.0, 1.0)]);
        let u = multiport_unitary(&setting);
        let s3 = 3f64.sqrt();
        let f = Vec3C::new(
            C64::new(1.0 / s3, 0.0),
            C64::new(-1.0 / s3, 0.0),
            C64::new(1.0 / s3, 0.0),
        );
        let out = u.matrix() * f;
        assert!(
            out[1].norm_sqr() > 0.999,
            "mode 1 power {}",
            out[1].norm_sqr()
        );
    }

    #[test]
    fn decompose_recompose_haar() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let u = random_unitary3(&mut rng);
            let setting = decompose_unitary(&u);
            let back = multiport_unitary(&setting);
            worst = worst.min(row_overlap(&back, &u));
        }
        assert!(worst >= 1.0 - 1e-9, "worst row overlap {worst}");
    }

    #[test]
    fn decompose_degenerate_targets() {
        for u in [
            Unitary3::identity(),
            Unitary3::fourier(),
            Unitary3::new(Mat3::from_diagonal(&Vec3C::new(
                C64::new(1.0, 0.0),
                C64::new(-1.0, 0.0),
                C64::new(1.0, 0.0),
            )))
            .unwrap(),
            Unitary3::new(Mat3::from_fn(|r, c| {
                if (r + 1) % 3 == c {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }))
            .unwrap(),
        ] {
            let back = multiport_unitary(&decompose_unitary(&u));
            assert!(row_overlap(&back, &u) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn measurement_kets_give_inner_products() {
        let f = Unitary3::fourier();
        let kets = [
            Vec3C::new(f.matrix()[(0, 0)], f.matrix()[(0, 1)], f.matrix()[(0, 2)]),
            Vec3C::new(f.matrix()[(1, 0)], f.matrix()[(1, 1)], f.matrix()[(1, 2)]),
            Vec3C::new(f.matrix()[(2, 0)], f.matrix()[(2, 1)], f.matrix()[(2, 2)]),
        ];
        let m = measurement_unitary_from_kets(&kets).unwrap();
        let psi = Vec3C::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let out = m.matrix() * psi;
        for a in 0..3 {
            let direct = (0..3).map(|j| kets[a][j].conj() * psi[j]).sum::<C64>();
            assert!((out[a] - direct).norm() < 1e-12);
        }

        let bad = [
            Vec3C::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            Vec3C::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            Vec3C::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        ];
        assert!(measurement_unitary_from_kets(&bad).is_err());
    }

    #[test]
    fn heater_calibration_roundtrip() {
        let cal = HeaterCalibration::default();
        assert_abs_diff_eq!(cal.phase_to_power_mw(TWO_PI), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cal.phase_to_power_mw(std::f64::consts::PI),
            21.0,
            epsilon = 1e-12
        );
        for p in [0.0, 1.0, 10.5, 41.9] {
            let phase = cal.power_to_phase_rad(p).unwrap();
            assert_abs_diff_eq!(cal.phase_to_power_mw(phase), p, epsilon = 1e-9);
        }
        assert!(cal.power_to_phase_rad(-1.0).is_err());
        assert!(cal.power_to_phase_rad(43.0).is_err());
    }

    #[test]
    fn phase_setting_serde_units() {
        let rad: PhaseSetting = serde_json::from_str(
            r#"{"Sz1":0.1,"Sy1":0.2,"Sz2":0.3,"Sy2":0.4,"Sz3":0.5,"Sy3":0.6}"#,
        )
        .unwrap();
        assert_abs_diff_eq!(rad.z[0], 0.1, epsilon = 1e-15);
        let pi: PhaseSetting = serde_json::from_str(
            r#"{"Sz1":0.5,"Sy1":1.0,"Sz2":0.0,"Sy2":1.0,"Sz3":0.0,"Sy3":1.0,"units":"pi"}"#,
        )
        .unwrap();
        assert_abs_diff_eq!(pi.z[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(pi.y[0], std::f64::consts::PI, epsilon = 1e-15);
        assert!(serde_json::from_str::<PhaseSetting>(
            r#"{"Sz1":0,"Sy1":0,"Sz2":0,"Sy2":0,"Sz3":0,"Sy3":0,"units":"deg"}"#
        )
        .is_err());
        assert!(serde_json::from_str::<PhaseSetting>(
            r#"{"Sz1":0,"Sy1":0,"Sz2":0,"Sy2":0,"Sz3":0,"Sy3":0,"extra":1}"#
        )
        .is_err());
    }
}
