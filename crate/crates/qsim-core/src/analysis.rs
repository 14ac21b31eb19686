//! Entanglement analyses: CGLMP inequality, contextuality with no-signalling
//! checks, mutually unbiased bases, perfect-matching graphs, a QKD error
//! bound, and interferometric phase sensitivity.
//!
//! All probability tables here are mode-indexed (outcome × outcome); port
//! bookkeeping stays in the experiment module.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{self, Strategy};
use crate::experiment::{build_state, outcome_probs_rho, port_matrix, sample_poisson};
use crate::qcore::{omega, DensityMatrix9, Ket9, Mat3, Unitary3, Vec3C, C64};
use crate::{Error, Result};

/// 3×3 joint-outcome probability (or count) table.
pub type OutcomeTable = [[f64; 3]; 3];

fn expect_pure(rho: &DensityMatrix9, ket: &Ket9) -> f64 {
    let v = ket.vector();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..9 {
        for c in 0..9 {
            acc += v[r].conj() * rho.matrix()[(r, c)] * v[c];
        }
    }
    acc.re.max(0.0)
}

// ---------------------------------------------------------------------------
// CGLMP inequality
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    A,
    B,
}

/// One CGLMP measurement choice: party and setting index 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CglmpSetting {
    pub party: Party,
    pub index: u8,
}

impl CglmpSetting {
    pub fn new(party: Party, index: u8) -> Result<Self> {
        if !(1..=2).contains(&index) {
            return Err(Error::Domain(format!(
                "CGLMP setting index {index} not in {{1,2}}"
            )));
        }
        Ok(CglmpSetting { party, index })
    }

    /// Phase offset of the violation-maximizing bases: α₁=0, α₂=1/2 on A;
    /// β₁=1/4, β₂=−1/4 on B.
    pub fn offset(&self) -> f64 {
        match (self.party, self.index) {
            (Party::A, 1) => 0.0,
            (Party::A, _) => 0.5,
            (Party::B, 1) => 0.25,
            (Party::B, _) => -0.25,
        }
    }
}

/// Measurement basis for one CGLMP setting; row K (or L) is the outcome ket.
///
/// Alice's outcome K has components exp[i(2π/3)·j·(K+α)]/√3; Bob's outcome L
/// uses −L in the exponent with his offset β.
pub fn cglmp_bases(setting: &CglmpSetting) -> Unitary3 {
    let sign = match setting.party {
        Party::A => 1.0,
        Party::B => -1.0,
    };
    let off = setting.offset();
    let m = Mat3::from_fn(|outcome, j| {
        let arg = 2.0 * std::f64::consts::PI / 3.0 * j as f64 * (sign * outcome as f64 + off);
        C64::from_polar(1.0 / 3f64.sqrt(), arg)
    });
    Unitary3::new(m).expect("CGLMP bases are unitary for integer outcome spacing")
}

/// Joint outcome table P(K, L) under setting pair (a, b).
pub fn cglmp_probabilities(rho: &DensityMatrix9, a: u8, b: u8) -> Result<OutcomeTable> {
    let basis_a = cglmp_bases(&CglmpSetting::new(Party::A, a)?);
    let basis_b = cglmp_bases(&CglmpSetting::new(Party::B, b)?);
    // The engine evolves modes; measuring along a ket row means feeding its
    // conjugate, so table[K][L] = |⟨ket_K ⊗ ket_L|ψ⟩|².
    Ok(outcome_probs_rho(
        rho,
        &basis_a.conjugate(),
        &basis_b.conjugate(),
    ))
}

/// P(A = B + s mod 3) read off one probability table.
pub fn prob_diff(table: &OutcomeTable, s: i32) -> f64 {
    (0..3)
        .map(|k| table[k][(k as i32 - s).rem_euclid(3) as usize])
        .sum()
}

/// CGLMP combination I₃ from the four tables, indexed `tables[a-1][b-1]`.
///
/// I₃ = P(A₁=B₁) + P(B₁=A₂+1) + P(A₂=B₂) + P(B₂=A₁)
///    − P(A₁=B₁−1) − P(B₁=A₂) − P(A₂=B₂−1) − P(B₂=A₁−1);
/// local realism bounds it by 2.
pub fn cglmp_i3(tables: &[[OutcomeTable; 2]; 2]) -> f64 {
    let (t11, t12, t21, t22) = (&tables[0][0], &tables[0][1], &tables[1][0], &tables[1][1]);
    prob_diff(t11, 0) + prob_diff(t21, -1) + prob_diff(t22, 0) + prob_diff(t12, 0)
        - prob_diff(t11, -1)
        - prob_diff(t21, 0)
        - prob_diff(t22, -1)
        - prob_diff(t12, 1)
}

/// I₃ evaluated directly on a state.
pub fn cglmp_i3_for(rho: &DensityMatrix9) -> Result<f64> {
    let mut tables = [[[[0.0; 3]; 3]; 2]; 2];
    for a in 1..=2u8 {
        for b in 1..=2u8 {
            tables[(a - 1) as usize][(b - 1) as usize] = cglmp_probabilities(rho, a, b)?;
        }
    }
    Ok(cglmp_i3(&tables))
}

// ---------------------------------------------------------------------------
// Contextuality (state-dependent, two-party)
// ---------------------------------------------------------------------------

/// The four projector kets of the contextuality protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct KsProjectors {
    /// Bob's heralding ket |i⟩ = (1,1,1)/√3.
    pub i: Vec3C,
    /// Alice's target ket |f⟩ = (1,−1,1)/√3.
    pub f: Vec3C,
    /// Alice's first compatibility test |a₀⟩ = (0,1,−1)/√2.
    pub a0: Vec3C,
    /// Alice's second compatibility test |a₁⟩ = (1,−1,0)/√2.
    pub a1: Vec3C,
}

pub fn ks_projectors() -> KsProjectors {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    let c = |x: f64| C64::new(x, 0.0);
    KsProjectors {
        i: Vec3C::new(c(1.0 / s3), c(1.0 / s3), c(1.0 / s3)),
        f: Vec3C::new(c(1.0 / s3), c(-1.0 / s3), c(1.0 / s3)),
        a0: Vec3C::new(c(0.0), c(1.0 / s2), c(-1.0 / s2)),
        a1: Vec3C::new(c(1.0 / s2), c(-1.0 / s2), c(0.0)),
    }
}

/// Conditional probabilities of the contextuality inequality and their
/// combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    /// P(f|i) − P(a₀|i) − P(a₁|i); positive values defy non-contextual models.
    pub lhs: f64,
    /// (P(f|i), P(a₀|i), P(a₁|i)), all conditioned on Bob's |i⟩ click.
    pub conditionals: [f64; 3],
    /// Bob's heralding probability P(i).
    pub bob_marginal: f64,
}

fn joint_with_bob_i(rho: &DensityMatrix9, alice: &Vec3C, bob_i: &Vec3C) -> f64 {
    let ket = Ket9::product(alice, bob_i).expect("projector kets are unit norm");
    expect_pure(rho, &ket)
}

fn bob_marginal_i(rho: &DensityMatrix9, bob_i: &Vec3C) -> f64 {
    let mut total = 0.0;
    for a in 0..3 {
        let mut e = Vec3C::zeros();
        e[a] = C64::new(1.0, 0.0);
        total += joint_with_bob_i(rho, &e, bob_i);
    }
    total
}

/// Evaluates the contextuality witness on a state.
pub fn ks_lhs(rho: &DensityMatrix9) -> Result<KsReport> {
    let p = ks_projectors();
    let marginal = bob_marginal_i(rho, &p.i);
    if marginal < 1e-12 {
        return Err(Error::UndefinedConditional);
    }
    let cond = [
        joint_with_bob_i(rho, &p.f, &p.i) / marginal,
        joint_with_bob_i(rho, &p.a0, &p.i) / marginal,
        joint_with_bob_i(rho, &p.a1, &p.i) / marginal,
    ];
    Ok(KsReport {
        lhs: cond[0] - cond[1] - cond[2],
        conditionals: cond,
        bob_marginal: marginal,
    })
}

/// Exact 2×2 outcome tables for the three measurement contexts.
///
/// Context c pairs Alice's projector (f, a₀, a₁)[c] with Bob's |i⟩; in each
/// table, row 0 is "Alice projector fired", column 0 is "Bob |i⟩ fired".
pub fn ks_context_probs(rho: &DensityMatrix9) -> [[[f64; 2]; 2]; 3] {
    let p = ks_projectors();
    let marginal_i = bob_marginal_i(rho, &p.i);
    let mut out = [[[0.0; 2]; 2]; 3];
    for (c, alice) in [&p.f, &p.a0, &p.a1].into_iter().enumerate() {
        let joint = joint_with_bob_i(rho, alice, &p.i);
        let alice_marginal = {
            let mut total = 0.0;
            for b in 0..3 {
                let mut e = Vec3C::zeros();
                e[b] = C64::new(1.0, 0.0);
                let ket = Ket9::product(alice, &e).expect("unit norm");
                total += expect_pure(rho, &ket);
            }
            total
        };
        out[c][0][0] = joint;
        out[c][0][1] = (alice_marginal - joint).max(0.0);
        out[c][1][0] = (marginal_i - joint).max(0.0);
        out[c][1][1] = (1.0 - alice_marginal - marginal_i + joint).max(0.0);
    }
    out
}

/// Poisson-sampled counts for the three contexts, `mean_total` expected
/// events per context. Deterministic in `seed`.
pub fn simulate_ks_contexts(
    rho: &DensityMatrix9,
    mean_total: f64,
    seed: u64,
) -> Result<[[[u64; 2]; 2]; 3]> {
    if mean_total <= 0.0 {
        return Err(Error::Domain("mean total must be positive".into()));
    }
    let probs = ks_context_probs(rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [[[0u64; 2]; 2]; 3];
    for c in 0..3 {
        for r in 0..2 {
            for k in 0..2 {
                out[c][r][k] = sample_poisson(&mut rng, mean_total * probs[c][r][k])?;
            }
        }
    }
    Ok(out)
}

/// Differences of Bob's heralding frequency between context pairs
/// (1,2), (1,3), (2,3). Zero for any non-signalling data set.
pub fn no_signalling_checks(tables: &[[[f64; 2]; 2]; 3]) -> Result<[f64; 3]> {
    let mut p_i = [0.0; 3];
    for (c, t) in tables.iter().enumerate() {
        let total: f64 = t.iter().flatten().sum();
        if total <= 0.0 {
            return Err(Error::ZeroCounts);
        }
        p_i[c] = (t[0][0] + t[1][0]) / total;
    }
    Ok([
        (p_i[0] - p_i[1]).abs(),
        (p_i[0] - p_i[2]).abs(),
        (p_i[1] - p_i[2]).abs(),
    ])
}

// ---------------------------------------------------------------------------
// Mutually unbiased bases
// ---------------------------------------------------------------------------

/// The four qutrit MUBs; rows of each matrix are the outcome kets for the
/// signal photon. The idler is analyzed in the conjugate basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MubBasis {
    pub signal: [Unitary3; 4],
}

impl MubBasis {
    /// Idler basis paired with signal basis `k` (1-based): the entrywise
    /// conjugate, which makes every pair correlate on equal outcomes.
    pub fn idler(&self, k: usize) -> Result<Unitary3> {
        Ok(self.checked(k)?.conjugate())
    }

    pub fn checked(&self, k: usize) -> Result<&Unitary3> {
        self.signal
            .get(k.wrapping_sub(1))
            .ok_or_else(|| Error::Domain(format!("MUB index {k} not in 1..=4")))
    }
}

/// Computational basis plus the three Fourier-family bases
/// M_t[q][j] = ω^{qj + t·j²}/√3.
pub fn mub_bases() -> MubBasis {
    let w = omega();
    let fourier_family = |t: usize| {
        Mat3::from_fn(|q, j| {
            let power = (q * j + t * j * j) % 3;
            w.powu(power as u32) / C64::new(3f64.sqrt(), 0.0)
        })
    };
    MubBasis {
        signal: [
            Unitary3::identity(),
            Unitary3::new(fourier_family(0)).expect("Fourier-family bases are unitary"),
            Unitary3::new(fourier_family(1)).expect("Fourier-family bases are unitary"),
            Unitary3::new(fourier_family(2)).expect("Fourier-family bases are unitary"),
        ],
    }
}

/// Joint outcome table of basis pair k (signal S_k, idler S_k*).
pub fn mub_probs(rho: &DensityMatrix9, k: usize) -> Result<OutcomeTable> {
    let bases = mub_bases();
    let s = bases.checked(k)?;
    let i = bases.idler(k)?;
    Ok(outcome_probs_rho(rho, &s.conjugate(), &i.conjugate()))
}

/// Fraction of counts in the correlated cells of basis pair `k`.
///
/// With the idler analyzed in the conjugate basis the correlated cells are
/// the diagonal for every k; a maximally entangled state scores 1 and the
/// maximally mixed state 1/3.
pub fn correlation_coefficient(counts: &OutcomeTable, k: usize) -> Result<f64> {
    mub_bases().checked(k)?;
    let total: f64 = counts.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    let correlated: f64 = (0..3).map(|q| counts[q][q]).sum();
    Ok(correlated / total)
}

// ---------------------------------------------------------------------------
// Perfect-matching graphs
// ---------------------------------------------------------------------------

/// Pair-source edge: connects two photons (vertices) and labels both with a
/// mode index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub u: String,
    pub v: String,
    pub mode: u8,
}

/// Multigraph whose vertices are photons and whose edges are pair sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Graph {
    pub vertices: Vec<String>,
    pub edges: Vec<GraphEdge>,
}

impl Graph {
    fn vertex_index(&self) -> Result<std::collections::HashMap<&str, usize>> {
        let mut map = std::collections::HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if map.insert(v.as_str(), i).is_some() {
                return Err(Error::Graph(format!("duplicate vertex \"{v}\"")));
            }
        }
        Ok(map)
    }

    /// Edges as index pairs, after validation.
    fn edge_indices(&self) -> Result<Vec<(usize, usize)>> {
        let map = self.vertex_index()?;
        self.edges
            .iter()
            .map(|e| {
                let u = *map
                    .get(e.u.as_str())
                    .ok_or_else(|| Error::Graph(format!("unknown vertex \"{}\"", e.u)))?;
                let v = *map
                    .get(e.v.as_str())
                    .ok_or_else(|| Error::Graph(format!("unknown vertex \"{}\"", e.v)))?;
                if u == v {
                    return Err(Error::Graph(format!("self-loop on \"{}\"", e.u)));
                }
                Ok((u, v))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.edge_indices().map(|_| ())
    }
}

fn enumerate_matchings(g: &Graph) -> Result<Vec<Vec<usize>>> {
    let ends = g.edge_indices()?;
    let n = g.vertices.len();
    let mut incident = vec![Vec::new(); n];
    for (ei, &(u, v)) in ends.iter().enumerate() {
        incident[u].push(ei);
        incident[v].push(ei);
    }
    let mut covered = vec![false; n];
    let mut current = Vec::new();
    let mut found = Vec::new();
    fn recurse(
        ends: &[(usize, usize)],
        incident: &[Vec<usize>],
        covered: &mut [bool],
        current: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        let Some(u) = covered.iter().position(|c| !c) else {
            found.push(current.clone());
            return;
        };
        for &ei in &incident[u] {
            let (a, b) = ends[ei];
            let w = if a == u { b } else { a };
            if covered[w] {
                continue;
            }
            covered[u] = true;
            covered[w] = true;
            current.push(ei);
            recurse(ends, incident, covered, current, found);
            current.pop();
            covered[u] = false;
            covered[w] = false;
        }
    }
    recurse(&ends, &incident, &mut covered, &mut current, &mut found);
    Ok(found)
}

/// Number of perfect matchings, by exhaustive enumeration.
///
/// The empty graph has exactly one (empty) matching.
pub fn perfect_matchings(g: &Graph) -> Result<u64> {
    Ok(enumerate_matchings(g)?.len() as u64)
}

/// Ket label contributed by each perfect matching: vertex order, one mode
/// digit per photon.
pub fn state_terms(g: &Graph) -> Result<Vec<String>> {
    let ends = g.edge_indices()?;
    let matchings = enumerate_matchings(g)?;
    let mut terms = Vec::with_capacity(matchings.len());
    for m in matchings {
        let mut modes = vec![0u8; g.vertices.len()];
        for &ei in &m {
            let (u, v) = ends[ei];
            modes[u] = g.edges[ei].mode;
            modes[v] = g.edges[ei].mode;
        }
        let digits: String = modes.iter().map(|d| d.to_string()).collect();
        terms.push(format!("|{digits}⟩"));
    }
    Ok(terms)
}

/// Perfect-matching count via the permanent of the biadjacency matrix.
///
/// Independent of [`perfect_matchings`]: two-colors the graph, builds the
/// multiplicity matrix between the parts, and evaluates the permanent with
/// Ryser's formula. Limited to 6 vertices per part.
pub fn permanent_biadjacency(g: &Graph) -> Result<u64> {
    let ends = g.edge_indices()?;
    let n = g.vertices.len();
    let mut adjacency = vec![Vec::new(); n];
    for &(u, v) in &ends {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }

    let mut color = vec![None; n];
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(false);
        let mut queue = std::collections::VecDeque::from([start]);
        let mut part = [0usize; 2];
        part[0] = 1;
        while let Some(u) = queue.pop_front() {
            let cu = color[u].expect("queued vertices are colored");
            for &w in &adjacency[u] {
                match color[w] {
                    None => {
                        color[w] = Some(!cu);
                        part[!cu as usize] += 1;
                        queue.push_back(w);
                    }
                    Some(cw) if cw == cu => {
                        return Err(Error::Graph("graph is not bipartite".into()));
                    }
                    Some(_) => {}
                }
            }
        }
        if part[0] != part[1] {
            return Ok(0);
        }
    }

    let left: Vec<usize> = (0..n).filter(|&v| color[v] == Some(false)).collect();
    let right: Vec<usize> = (0..n).filter(|&v| color[v] == Some(true)).collect();
    if left.len() != right.len() {
        return Ok(0);
    }
    let side = left.len();
    if side > 6 {
        return Err(Error::Graph(
            "permanent route limited to 6 vertices per part".into(),
        ));
    }
    if side == 0 {
        return Ok(1);
    }
    let pos_l: std::collections::HashMap<usize, usize> =
        left.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let pos_r: std::collections::HashMap<usize, usize> =
        right.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut a = vec![vec![0i128; side]; side];
    for &(u, v) in &ends {
        let (l, r) = if color[u] == Some(false) {
            (u, v)
        } else {
            (v, u)
        };
        a[pos_l[&l]][pos_r[&r]] += 1;
    }

    // Ryser: perm(A) = (−1)^n Σ_S (−1)^{|S|} Π_i Σ_{j∈S} a_ij
    let mut total: i128 = 0;
    for mask in 1u32..(1 << side) {
        let sign = if (side as u32 - mask.count_ones()).is_multiple_of(2) {
            1i128
        } else {
            -1i128
        };
        let mut prod: i128 = 1;
        for row in a.iter() {
            let mut s: i128 = 0;
            for (j, aij) in row.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    s += aij;
                }
            }
            prod *= s;
            if prod == 0 {
                break;
            }
        }
        total += sign * prod;
    }
    Ok(total as u64)
}

// ---------------------------------------------------------------------------
// QKD error bound
// ---------------------------------------------------------------------------

/// Coherent-attack security threshold on the qutrit QKD error rate.
pub const QKD_SECURITY_BOUND: f64 = 0.1595;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QkdReport {
    pub error_rate: f64,
    pub security_bound: f64,
    pub below_bound: bool,
}

/// Error rate inferred from state fidelity, ER = 3(1−F)/4.
pub fn qkd_error_rate(fidelity: f64) -> Result<QkdReport> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::Domain(format!("fidelity {fidelity} outside [0,1]")));
    }
    let er = 3.0 * (1.0 - fidelity) / 4.0;
    Ok(QkdReport {
        error_rate: er,
        security_bound: QKD_SECURITY_BOUND,
        below_bound: er < QKD_SECURITY_BOUND,
    })
}

// ---------------------------------------------------------------------------
// Phase sensitivity
// ---------------------------------------------------------------------------

/// Peak normalized slope of a sampled curve: max|dy/dφ| / max y.
///
/// Central differences with one Richardson refinement
/// D = (4·D_h − D_{2h})/3 on a uniform grid covering the feature of interest.
pub fn curve_sensitivity(phases: &[f64], values: &[f64]) -> Result<f64> {
    let (slope, peak) = slope_and_peak(phases, values)?;
    Ok(slope / peak)
}

fn slope_and_peak(phases: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let n = phases.len();
    if n != values.len() {
        return Err(Error::Domain("grid and values differ in length".into()));
    }
    if n < 5 {
        return Err(Error::Domain(
            "sensitivity needs at least 5 grid points".into(),
        ));
    }
    let h = phases[1] - phases[0];
    if h <= 0.0 {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    for w in phases.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::Domain("sensitivity grid must be uniform".into()));
        }
    }
    let peak = values.iter().copied().fold(f64::MIN, f64::max);
    if !peak.is_finite() || peak <= 0.0 {
        return Err(Error::Domain("curve has no positive peak".into()));
    }
    let mut max_slope = 0.0f64;
    for i in 2..n - 2 {
        let d_h = (values[i + 1] - values[i - 1]) / (2.0 * h);
        let d_2h = (values[i + 2] - values[i - 2]) / (4.0 * h);
        let d = (4.0 * d_h - d_2h) / 3.0;
        max_slope = max_slope.max(d.abs());
    }
    Ok((max_slope, peak))
}

/// Phase-sensitivity scan along the pump-phase cut P_z1 = −P_z2 = φ.
#[derive(Debug, Clone)]
pub struct SensitivityScan {
    pub phases_rad: Vec<f64>,
    /// Port-ordered coincidence probabilities per grid point.
    pub curves: Vec<[[f64; 3]; 3]>,
    /// Sensitivity of each port pair, 1/rad.
    pub per_pair: [[f64; 3]; 3],
    /// Mean over the nine port pairs.
    pub mean_over_pairs: f64,
    /// Mean over the three degeneracy groups of the Fourier readout.
    pub mean_over_groups: f64,
    /// Global max slope over global max value.
    pub pooled: f64,
    /// Set when the grid resolves one fringe period with fewer than 50 points.
    pub resolution_warning: bool,
}

/// Runs the scan with the default execution strategy.
pub fn sensitivity_scan(grid: &[f64], white_noise_weight: f64) -> Result<SensitivityScan> {
    sensitivity_scan_with(Strategy::default(), grid, white_noise_weight)
}

/// Coincidence probabilities along the metrology cut at one pump phase:
/// equal pumping, P_z1 = φ, P_z2 = −φ, Fourier analysis on both photons.
pub fn metrology_point(phi: f64, white_noise_weight: f64) -> Result<[[f64; 3]; 3]> {
    let state = build_state([1.0; 3], [phi, -phi])?;
    let rho = DensityMatrix9::from_pure(&state.ket()).mix_white(white_noise_weight)?;
    let f = Unitary3::fourier();
    Ok(port_matrix(&outcome_probs_rho(&rho, &f, &f)))
}

/// [`sensitivity_scan`] with an explicit execution strategy (used by benches).
pub fn sensitivity_scan_with(
    strategy: Strategy,
    grid: &[f64],
    white_noise_weight: f64,
) -> Result<SensitivityScan> {
    if !(0.0..=1.0).contains(&white_noise_weight) {
        return Err(Error::Domain(format!(
            "white noise weight {white_noise_weight} outside [0,1]"
        )));
    }
    let curves: Vec<[[f64; 3]; 3]> = exec::map_range(strategy, grid.len(), |i| {
        metrology_point(grid[i], white_noise_weight).expect("validated inputs")
    });

    let mut per_pair = [[0.0; 3]; 3];
    let mut slopes = [[0.0; 3]; 3];
    let mut peaks = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let series: Vec<f64> = curves.iter().map(|m| m[r][c]).collect();
            let (slope, peak) = slope_and_peak(grid, &series)?;
            per_pair[r][c] = slope / peak;
            slopes[r][c] = slope;
            peaks[r][c] = peak;
        }
    }
    let mean_over_pairs = per_pair.iter().flatten().sum::<f64>() / 9.0;

    // Port cell (r, c) reads modes (2−r, 2−c); the Fourier readout makes all
    // cells with the same (mode sum mod 3) identical curves.
    let mut group_sum = [0.0; 3];
    let mut group_n = [0usize; 3];
    for r in 0..3 {
        for c in 0..3 {
            let g = (4 - r - c) % 3;
            group_sum[g] += per_pair[r][c];
            group_n[g] += 1;
        }
    }
    let mean_over_groups = (0..3)
        .map(|g| group_sum[g] / group_n[g] as f64)
        .sum::<f64>()
        / 3.0;

    let pooled = slopes.iter().flatten().copied().fold(0.0f64, f64::max)
        / peaks.iter().flatten().copied().fold(f64::MIN, f64::max);

    let period = std::f64::consts::PI;
    let h = grid[1] - grid[0];
    Ok(SensitivityScan {
        phases_rad: grid.to_vec(),
        curves,
        per_pair,
        mean_over_pairs,
        mean_over_groups,
        pooled,
        resolution_warning: period / h < 50.0,
    })
}
