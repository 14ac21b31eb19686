//! Complex linear algebra, quantum-state containers, and state functionals.

use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};
use num_complex::Complex;
use rand::Rng;

use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type Mat2 = nalgebra::Matrix2<C64>;
pub type Mat3 = Matrix3<C64>;
pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec3C = Vector3<C64>;
pub type Vec9C = SVector<C64, 9>;

/// Default tolerance for structural checks (unitarity, hermiticity, trace).
pub const STRUCT_TOL: f64 = 1e-9;
/// Default tolerance for algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Primitive cube root of unity, e^{i2π/3}.
pub fn omega() -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Frobenius norm of M·M† − I.
fn unitarity_defect<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    let id = SMatrix::<C64, N, N>::identity();
    (m * m.adjoint() - id).norm()
}

/// True iff ‖M·M† − I‖_F ≤ tol. Errors on non-square input.
pub fn is_unitary(m: &DMatrix<C64>, tol: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    Ok((m * m.adjoint() - id).norm() <= tol)
}

/// A validated 3×3 unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary3(Mat3);

impl Unitary3 {
    pub fn new(m: Mat3) -> Result<Self> {
        let defect = unitarity_defect(&m);
        if defect > STRUCT_TOL {
            return Err(Error::NotUnitary {
                defect,
                tol: STRUCT_TOL,
            });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// The 3×3 discrete Fourier transform, (1/√3)·[ω^{jk}].
    pub fn fourier() -> Self {
        let w = omega();
        let s = C64::new(1.0 / 3f64.sqrt(), 0.0);
        Self(Mat3::from_fn(|j, k| s * w.powu((j * k) as u32)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Entrywise complex conjugate (also unitary).
    pub fn conjugate(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }
}

/// A validated 9×9 unitary acting on the two-qutrit space.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary9(Mat9);

impl Unitary9 {
    pub fn new(m: Mat9) -> Result<Self> {
        let defect = unitarity_defect(&m);
        if defect > STRUCT_TOL {
            return Err(Error::NotUnitary {
                defect,
                tol: STRUCT_TOL,
            });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat9 {
        &self.0
    }

    pub fn apply(&self, k: &Ket9) -> Ket9 {
        Ket9(self.0 * k.0)
    }
}

/// Kronecker product of two local unitaries, index convention (s,i) → 3s+i.
pub fn tensor(a: &Unitary3, b: &Unitary3) -> Unitary9 {
    let mut m = Mat9::zeros();
    for sa in 0..3 {
        for sb in 0..3 {
            for ia in 0..3 {
                for ib in 0..3 {
                    m[(3 * sa + ia, 3 * sb + ib)] = a.0[(sa, sb)] * b.0[(ia, ib)];
                }
            }
        }
    }
    Unitary9(m)
}

/// A normalized two-qutrit state vector, index convention (s,i) → 3s+i.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket9(Vec9C);

impl Ket9 {
    pub fn new(v: Vec9C) -> Result<Self> {
        let n = v.norm();
        if (n - 1.0).abs() > STRUCT_TOL {
            return Err(Error::NotNormalizable(format!("norm {n} != 1")));
        }
        Ok(Self(v))
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(v: Vec9C) -> Result<Self> {
        let n = v.norm();
        if n < 1e-300 {
            return Err(Error::NotNormalizable("zero vector".into()));
        }
        Ok(Self(v / C64::new(n, 0.0)))
    }

    pub fn vector(&self) -> &Vec9C {
        &self.0
    }

    /// Amplitude of |s⟩⊗|i⟩.
    pub fn amplitude(&self, s: usize, i: usize) -> C64 {
        self.0[3 * s + i]
    }

    /// Product state |a⟩⊗|b⟩ from two normalized single-qutrit vectors.
    pub fn product(a: &Vec3C, b: &Vec3C) -> Result<Self> {
        let mut v = Vec9C::zeros();
        for s in 0..3 {
            for i in 0..3 {
                v[3 * s + i] = a[s] * b[i];
            }
        }
        Self::new(v)
    }

    pub fn inner(&self, other: &Ket9) -> C64 {
        self.0.dotc(&other.0)
    }
}

/// A validated two-qutrit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix9(Mat9);

impl DensityMatrix9 {
    pub fn new(m: Mat9) -> Result<Self> {
        let herm_defect = (m - m.adjoint()).norm();
        if herm_defect > STRUCT_TOL {
            return Err(Error::InvalidDensity(format!(
                "hermiticity defect {herm_defect:.3e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STRUCT_TOL || tr.im.abs() > STRUCT_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
        }
        let min_eig = hermitian_eigenvalues(&m)
            .into_iter()
            .fold(f64::MAX, f64::min);
        if min_eig < -STRUCT_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self(m))
    }

    pub fn from_pure(k: &Ket9) -> Self {
        Self(k.0 * k.0.adjoint())
    }

    /// Convex mixture with the maximally mixed state: (1−p)ρ + p·I/9.
    pub fn mix_white(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "white-noise weight {p} outside [0,1]"
            )));
        }
        let id = Mat9::identity() * C64::new(p / 9.0, 0.0);
        Ok(Self(self.0 * C64::new(1.0 - p, 0.0) + id))
    }

    pub fn matrix(&self) -> &Mat9 {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat9) -> Vec<f64> {
    let sym = nalgebra::SymmetricEigen::new(*m);
    let mut ev: Vec<f64> = sym.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Identity plus the eight Gell-Mann matrices.
///
/// The non-identity elements are traceless, Hermitian, and orthogonal under
/// Tr(λₐλᵦ) = 2δₐᵦ; together with I they span all 3×3 Hermitian matrices.
pub fn gell_mann_set() -> [Mat3; 9] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let s3 = 1.0 / 3f64.sqrt();
    [
        Mat3::identity(),
        Mat3::new(z, one, z, one, z, z, z, z, z),
        Mat3::new(z, -i, z, i, z, z, z, z, z),
        Mat3::new(one, z, z, z, -one, z, z, z, z),
        Mat3::new(z, z, one, z, z, z, one, z, z),
        Mat3::new(z, z, -i, z, z, z, i, z, z),
        Mat3::new(z, z, z, z, z, one, z, one, z),
        Mat3::new(z, z, z, z, z, -i, z, i, z),
        Mat3::new(
            C64::new(s3, 0.0),
            z,
            z,
            z,
            C64::new(s3, 0.0),
            z,
            z,
            z,
            C64::new(-2.0 * s3, 0.0),
        ),
    ]
}

/// Which qutrit to keep when tracing out the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Signal,
    Idler,
}

/// Reduced 3×3 density matrix of one qutrit.
pub fn partial_trace(rho: &DensityMatrix9, keep: Subsystem) -> Mat3 {
    let m = rho.matrix();
    let mut out = Mat3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..3 {
                acc += match keep {
                    Subsystem::Signal => m[(3 * a + k, 3 * b + k)],
                    Subsystem::Idler => m[(3 * k + a, 3 * k + b)],
                };
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Fidelity ⟨ψ|ρ|ψ⟩ of a state against a pure target, clamped to [0,1].
pub fn fidelity(rho: &DensityMatrix9, psi: &Ket9) -> f64 {
    let v = psi.vector();
    let f = (v.adjoint() * rho.matrix() * v)[(0, 0)];
    f.re.clamp(0.0, 1.0)
}

/// Purity Tr ρ².
pub fn purity(rho: &DensityMatrix9) -> f64 {
    (rho.matrix() * rho.matrix()).trace().re
}

/// I-concurrence √(2(1 − Tr ρ_A²)) of a pure two-qutrit state.
pub fn i_concurrence(psi: &Ket9) -> f64 {
    let rho = DensityMatrix9::from_pure(psi);
    let ra = partial_trace(&rho, Subsystem::Signal);
    let tr2 = (ra * ra).trace().re;
    (2.0 * (1.0 - tr2)).max(0.0).sqrt()
}

/// Lower bound √(2(1 − Tr ρ_A²)) evaluated on a possibly mixed state.
///
/// For mixed ρ this is not the convex-roof I-concurrence, only a bound.
pub fn i_concurrence_lower_bound(rho: &DensityMatrix9) -> f64 {
    let ra = partial_trace(rho, Subsystem::Signal);
    let tr2 = (ra * ra).trace().re;
    (2.0 * (1.0 - tr2)).max(0.0).sqrt()
}

/// Expansion coefficients of a Hermitian matrix in the `gell_mann_set` basis.
///
/// H = c₀·I + Σₐ cₐ·λₐ with c₀ = Tr(H)/3 and cₐ = Tr(H·λₐ)/2.
pub fn gell_mann_coefficients(h: &Mat3) -> [f64; 9] {
    let basis = gell_mann_set();
    let mut c = [0.0; 9];
    c[0] = (h * basis[0]).trace().re / 3.0;
    for a in 1..9 {
        c[a] = (h * basis[a]).trace().re / 2.0;
    }
    c
}

/// Re-sums `gell_mann_coefficients` output back into a Hermitian matrix.
pub fn hermitian_from_coefficients(c: &[f64; 9]) -> Mat3 {
    let basis = gell_mann_set();
    let mut h = Mat3::zeros();
    for a in 0..9 {
        h += basis[a] * C64::new(c[a], 0.0);
    }
    h
}

/// Haar-random 3×3 unitary via QR of a complex Ginibre matrix.
pub fn random_unitary3<R: Rng>(rng: &mut R) -> Unitary3 {
    use rand_distr::{Distribution, StandardNormal};
    let g = Mat3::from_fn(|_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the gauge so the distribution is Haar: scale columns by phase of R's diagonal.
    let mut u = q;
    for j in 0..3 {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / C64::new(d.norm(), 0.0)
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..3 {
            u[(i, j)] *= phase;
        }
    }
    Unitary3(u)
}

/// Random normalized two-qutrit state vector.
pub fn random_ket9<R: Rng>(rng: &mut R) -> Ket9 {
    use rand_distr::{Distribution, StandardNormal};
    let v = Vec9C::from_fn(|_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    Ket9::normalized(v).expect("gaussian vector is nonzero")
}
