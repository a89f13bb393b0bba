//! Exact finite-dimensional algebra of the three-level system.
//!
//! Energy basis {φ1, φ2, φ3} diagonalizes H_S(σ) = diag(E0, E+σ/2, E−σ/2).
//! The Liouville space ℂ³⊗ℂ³ uses the product basis φ_jk = φ_j⊗φ_k in
//! row-major order (1,1),(1,2),(1,3),(2,1),(2,2),(2,3),(3,1),(3,2),(3,3);
//! every module agrees on this ordering.

use crate::linalg::{c64, eig_hermitian, hermitian_sqrt, CMat, C64};
use crate::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Model parameters of the Λ-system.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SystemParams {
    /// Isolated level energy E0.
    pub e0: f64,
    /// Center of the quasi-degenerate doublet.
    pub e: f64,
    /// Level splitting σ ≥ 0.
    pub sigma: f64,
    /// Inverse temperature β > 0.
    pub beta: f64,
    /// System-reservoir coupling constant λ.
    pub lambda: f64,
    /// Coupling asymmetry γ in G_γ (1 = symmetric coupling).
    #[serde(with = "complex_pair", default = "default_gamma")]
    pub gamma_coupling: C64,
}

fn default_gamma() -> C64 {
    C64::new(1.0, 0.0)
}

mod complex_pair {
    use super::*;
    pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap() > 0.0) {
            return Err(Error::Domain(format!(
                "gap Δ = E0 − E must be positive, got {}",
                self.gap()
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "splitting σ must be ≥ 0, got {}",
                self.sigma
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Domain(format!(
                "β must be positive, got {}",
                self.beta
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Domain("λ must be finite".into()));
        }
        Ok(())
    }

    /// Δ = E0 − E.
    pub fn gap(&self) -> f64 {
        self.e0 - self.e
    }

    /// Advertised regime σ < λ² < Δ. Reported, never enforced.
    pub fn regime_ok(&self) -> bool {
        let l2 = self.lambda * self.lambda;
        self.sigma < l2 && l2 < self.gap()
    }
}

/// H_S(σ) = diag(E0, E+σ/2, E−σ/2).
pub fn hamiltonian(params: &SystemParams) -> CMat<3> {
    CMat::from_diag(&[
        c64(params.e0, 0.0),
        c64(params.e + 0.5 * params.sigma, 0.0),
        c64(params.e - 0.5 * params.sigma, 0.0),
    ])
}

/// Coupling operator G_γ: level 1 couples to the doublet with weights (1, γ).
pub fn coupling_matrix(gamma: C64) -> CMat<3> {
    let mut g = CMat::<3>::zeros();
    g.data[0][1] = c64(1.0, 0.0);
    g.data[0][2] = gamma;
    g.data[1][0] = c64(1.0, 0.0);
    g.data[2][0] = gamma.conj();
    g
}

/// Dark state τ_γ = (γ φ2 − φ3)/√(1+|γ|²); G_γ τ_γ = 0, H_S(0) τ_γ = E τ_γ.
pub fn dark_state(gamma: C64) -> [C64; 3] {
    let norm = (1.0 + gamma.norm_sqr()).sqrt();
    [c64(0.0, 0.0), gamma / norm, c64(-1.0 / norm, 0.0)]
}

/// 3×3 complex Hermitian unit-trace state in the energy basis.
///
/// JSON form: nested arrays of [re, im] pairs in the fixed basis order;
/// serialization round-trips exactly (deserialization does not re-validate,
/// so approximate-dynamics outputs survive the trip).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(pub CMat<3>);

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw: [[[f64; 2]; 3]; 3] = core::array::from_fn(|i| {
            core::array::from_fn(|j| [self.0.data[i][j].re, self.0.data[i][j].im])
        });
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[[[f64; 2]; 3]; 3]>::deserialize(d)?;
        for row in &raw {
            for entry in row {
                if !entry[0].is_finite() || !entry[1].is_finite() {
                    return Err(D::Error::custom("non-finite density matrix entry"));
                }
            }
        }
        Ok(DensityMatrix(CMat::from_fn(|i, j| {
            c64(raw[i][j][0], raw[i][j][1])
        })))
    }
}

impl DensityMatrix {
    /// Validating constructor: Hermitian to 1e-12, unit trace to 1e-12,
    /// eigenvalues ≥ -1e-10.
    pub fn new(m: CMat<3>) -> Result<Self> {
        let herm = m.hermiticity_deviation();
        if herm > 1e-12 {
            return Err(Error::Domain(format!(
                "density matrix is not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr - c64(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::Domain(format!(
                "density matrix trace must be 1, got {tr}"
            )));
        }
        let (vals, _) = eig_hermitian(&m);
        if vals[0] < -1e-10 {
            return Err(Error::Domain(format!(
                "density matrix has negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(Self(m.hermitize()))
    }

    /// Wrap an evolved state: Hermitized, trace left as produced by the
    /// approximate dynamics (deviates O(βσ) from 1 when σ > 0).
    pub fn from_evolution(m: CMat<3>) -> Self {
        Self(m.hermitize())
    }

    pub fn matrix(&self) -> &CMat<3> {
        &self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0.data[i][j]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        eig_hermitian(&self.0).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// |φ1⟩⟨φ1| (donor level fully occupied).
    pub fn level1() -> Self {
        let mut m = CMat::zeros();
        m.data[0][0] = c64(1.0, 0.0);
        Self(m)
    }

    /// Pure dark state ρ_τ for coupling asymmetry γ.
    pub fn dark(gamma: C64) -> Self {
        let tau = dark_state(gamma);
        Self(CMat::from_fn(|i, j| tau[i] * tau[j].conj()))
    }

    /// Diagonal donor/acceptor initial state with [ρ]_{11} = p_d0 and
    /// acceptor populations (p2, p3); equal split of the remainder when not
    /// given.
    pub fn donor(p_d0: f64, acceptors: Option<(f64, f64)>) -> Result<Self> {
        let (p2, p3) = acceptors.unwrap_or(((1.0 - p_d0) / 2.0, (1.0 - p_d0) / 2.0));
        Self::new(CMat::from_diag(&[
            c64(p_d0, 0.0),
            c64(p2, 0.0),
            c64(p3, 0.0),
        ]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("density matrix serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Domain(format!("density matrix JSON: {e}")))
    }
}

/// Gibbs state e^{-βH_S(σ)}/Z at the given splitting (not necessarily the
/// splitting stored in `params`).
pub fn gibbs_state(params: &SystemParams, sigma: f64) -> DensityMatrix {
    let energies = [params.e0, params.e + 0.5 * sigma, params.e - 0.5 * sigma];
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights = energies.map(|en| (-params.beta * (en - emin)).exp());
    let z: f64 = weights.iter().sum();
    DensityMatrix(CMat::from_diag(&[
        c64(weights[0] / z, 0.0),
        c64(weights[1] / z, 0.0),
        c64(weights[2] / z, 0.0),
    ]))
}

/// Partition function Tr e^{-βH_S(σ)}.
pub fn partition_function(params: &SystemParams, sigma: f64) -> f64 {
    let energies = [params.e0, params.e + 0.5 * sigma, params.e - 0.5 * sigma];
    energies.iter().map(|en| (-params.beta * en).exp()).sum()
}

/// X_σ = √(Z_0/Z_σ)·diag(1, e^{-βσ/4}, e^{βσ/4});
/// satisfies X_σ ρ_{S,β,0} X_σ = ρ_{S,β,σ}. Identity at σ = 0.
pub fn x_sigma(params: &SystemParams) -> CMat<3> {
    if params.sigma == 0.0 {
        return CMat::identity();
    }
    let z0 = partition_function(params, 0.0);
    let zs = partition_function(params, params.sigma);
    let s = (z0 / zs).sqrt();
    CMat::from_diag(&[
        c64(s, 0.0),
        c64(s * (-params.beta * params.sigma / 4.0).exp(), 0.0),
        c64(s * (params.beta * params.sigma / 4.0).exp(), 0.0),
    ])
}

/// Trace norm Σ|eigenvalues| of a Hermitian matrix.
pub fn trace_norm(m: &CMat<3>) -> Result<f64> {
    let dev = m.hermiticity_deviation();
    if dev > 1e-10 * m.max_norm().max(1.0) {
        return Err(Error::Domain(format!(
            "trace norm input is not Hermitian (deviation {dev:.3e})"
        )));
    }
    let (vals, _) = eig_hermitian(m);
    Ok(vals.iter().map(|v| v.abs()).sum())
}

/// Trace-norm distance ‖ρ − ρ'‖₁.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = a.0.sub(&b.0);
    let (vals, _) = eig_hermitian(&diff);
    vals.iter().map(|v| v.abs()).sum()
}

// ---------------------------------------------------------------------------
// Liouville space ℂ³⊗ℂ³
// ---------------------------------------------------------------------------

/// Vector in the product basis φ_jk, row-major index 3j + k (0-based).
pub type LiouvilleVec = [C64; 9];

/// Index of φ_{jk} (0-based j, k).
pub const fn prod_idx(j: usize, k: usize) -> usize {
    3 * j + k
}

/// Product-basis indices of the sector spanned by {φ12, φ13} (eigenvalue +Δ).
pub const SECTOR_PLUS_IDX: [usize; 2] = [prod_idx(0, 1), prod_idx(0, 2)];
/// Product-basis indices of the sector spanned by {φ21, φ31} (eigenvalue −Δ).
pub const SECTOR_MINUS_IDX: [usize; 2] = [prod_idx(1, 0), prod_idx(2, 0)];

/// Trace (reference) vector ψ_ref = 3^{-1/2}(φ11 + φ22 + φ33).
pub fn reference_vector() -> LiouvilleVec {
    let mut v = [c64(0.0, 0.0); 9];
    let a = c64(1.0 / 3.0_f64.sqrt(), 0.0);
    v[prod_idx(0, 0)] = a;
    v[prod_idx(1, 1)] = a;
    v[prod_idx(2, 2)] = a;
    v
}

/// Orthonormal basis {Ψ1..Ψ5} of the zero-eigenvalue sector of L_S(0):
/// Ψ1 = φ11, Ψ2 = ν⊗ν, Ψ3 = τ⊗τ, Ψ4 = (φ23−φ32)/√2, Ψ5 = (φ22−φ33)/√2,
/// with ν = (φ2+φ3)/√2, τ = (φ2−φ3)/√2.
pub fn psi_basis() -> [LiouvilleVec; 5] {
    let z = c64(0.0, 0.0);
    let mut psi = [[z; 9]; 5];
    psi[0][prod_idx(0, 0)] = c64(1.0, 0.0);
    for (a, b, s) in [(1, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 1.0)] {
        psi[1][prod_idx(a, b)] = c64(0.5 * s, 0.0);
    }
    for (a, b, s) in [(1, 1, 1.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0)] {
        psi[2][prod_idx(a, b)] = c64(0.5 * s, 0.0);
    }
    let r = 1.0 / 2.0_f64.sqrt();
    psi[3][prod_idx(1, 2)] = c64(r, 0.0);
    psi[3][prod_idx(2, 1)] = c64(-r, 0.0);
    psi[4][prod_idx(1, 1)] = c64(r, 0.0);
    psi[4][prod_idx(2, 2)] = c64(-r, 0.0);
    psi
}

/// (A ⊗ 1) as a 9×9 matrix: entry [(i,k)][(j,k)] = A[i][j].
pub fn op_tensor_id(a: &CMat<3>) -> CMat<9> {
    CMat::from_fn(|row, col| {
        let (i, k) = (row / 3, row % 3);
        let (j, l) = (col / 3, col % 3);
        if k == l {
            a.data[i][j]
        } else {
            c64(0.0, 0.0)
        }
    })
}

/// (1 ⊗ b) as a 9×9 matrix: entry [(j,n)][(j,m)] = b[n][m].
pub fn id_tensor_op(b: &CMat<3>) -> CMat<9> {
    CMat::from_fn(|row, col| {
        let (j, n) = (row / 3, row % 3);
        let (i, m) = (col / 3, col % 3);
        if i == j {
            b.data[n][m]
        } else {
            c64(0.0, 0.0)
        }
    })
}

/// Vector representative ψ_S of ρ: coefficients of ρ^{1/2} on the product
/// basis, so that ⟨ψ_S, (A⊗1)ψ_S⟩ = Tr(ρA).
pub fn state_vector(rho: &DensityMatrix) -> Result<LiouvilleVec> {
    let root = hermitian_sqrt(&rho.0, 1e-8)
        .ok_or_else(|| Error::Domain("state is not positive semidefinite".into()))?;
    let mut v = [c64(0.0, 0.0); 9];
    for j in 0..3 {
        for k in 0..3 {
            v[prod_idx(j, k)] = root.data[j][k];
        }
    }
    Ok(v)
}

/// The unique b with (1⊗b)ψ_ref = ψ_S: b = √3·(ρ^{1/2})ᵀ in the energy basis.
pub fn b_operator(rho: &DensityMatrix) -> Result<CMat<3>> {
    let root = hermitian_sqrt(&rho.0, 1e-8)
        .ok_or_else(|| Error::Domain("state is not positive semidefinite".into()))?;
    Ok(root.transpose().scale(c64(3.0_f64.sqrt(), 0.0)))
}

// ---------------------------------------------------------------------------
// Invariant manifold and final-state formulas (σ = 0)
// ---------------------------------------------------------------------------

/// Point of the σ = 0 invariant manifold: population p of level 1 with the
/// coherence α = ((2e^{βΔ}+1)p − 1)/2 forced by stationarity.
#[derive(Clone, Copy, Debug)]
pub struct ManifoldPoint {
    pub p: f64,
    pub alpha: f64,
    pub p_max: f64,
}

impl ManifoldPoint {
    pub fn new(p: f64, beta: f64, gap: f64) -> Result<Self> {
        let ebd = (beta * gap).exp();
        let p_max = 1.0 / (ebd + 1.0);
        if !(0.0..=p_max).contains(&p) {
            return Err(Error::Domain(format!(
                "manifold parameter p = {p} outside [0, {p_max}]"
            )));
        }
        Ok(Self {
            p,
            alpha: 0.5 * ((2.0 * ebd + 1.0) * p - 1.0),
            p_max,
        })
    }

    pub fn state(&self) -> DensityMatrix {
        manifold_matrix(self.p, self.alpha)
    }
}

fn manifold_matrix(p: f64, alpha: f64) -> DensityMatrix {
    let mut m = CMat::zeros();
    m.data[0][0] = c64(p, 0.0);
    m.data[1][1] = c64(0.5 * (1.0 - p), 0.0);
    m.data[2][2] = c64(0.5 * (1.0 - p), 0.0);
    m.data[1][2] = c64(alpha, 0.0);
    m.data[2][1] = c64(alpha, 0.0);
    DensityMatrix(m)
}

/// State of the invariant manifold at parameter p ∈ [0, p_max].
pub fn manifold_state(p: f64, beta: f64, gap: f64) -> Result<DensityMatrix> {
    Ok(ManifoldPoint::new(p, beta, gap)?.state())
}

/// If ρ lies on the invariant manifold within `tol` (trace norm), returns
/// its parameter p = [ρ]_{11}.
pub fn manifold_membership(rho: &DensityMatrix, beta: f64, gap: f64, tol: f64) -> Option<f64> {
    let p = rho.entry(0, 0).re;
    let point = ManifoldPoint::new(p, beta, gap).ok()?;
    let dist = trace_distance(rho, &point.state());
    (dist <= tol).then_some(p)
}

/// Default tolerance for [`manifold_membership`].
pub const MANIFOLD_TOL: f64 = 1e-8;

/// Asymptotic state of the degenerate (σ = 0) dynamics:
/// p_∞ = (1 + [ρ0]_{11} + 2Re[ρ0]_{23})/(2(e^{βΔ}+1)), α_∞ from p_∞.
pub fn final_state_formula(rho0: &DensityMatrix, beta: f64, gap: f64) -> DensityMatrix {
    let ebd = (beta * gap).exp();
    let p = (1.0 + rho0.entry(0, 0).re + 2.0 * rho0.entry(1, 2).re) / (2.0 * (ebd + 1.0));
    let alpha = 0.5 * ((2.0 * ebd + 1.0) * p - 1.0);
    manifold_matrix(p, alpha)
}

/// Quasi-stationary state reached on the fast time scale for σ > 0: same
/// formula as [`final_state_formula`], named for its intermediate-plateau
/// role.
pub fn quasi_stationary_state(rho0: &DensityMatrix, beta: f64, gap: f64) -> DensityMatrix {
    final_state_formula(rho0, beta, gap)
}


#[cfg(test)]
mod tests {
    use super::test_support::random_density;
    use super::*;
    use crate::linalg::{vec_dot, vec_norm};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(sigma: f64) -> SystemParams {
        SystemParams {
            e0: 1.0,
            e: 0.0,
            sigma,
            beta: 1.0,
            lambda: 0.05,
            gamma_coupling: c64(1.0, 0.0),
        }
    }

    #[test]
    fn hamiltonian_entries() {
        let h = hamiltonian(&params(0.0));
        assert_eq!(h.data[1][1], h.data[2][2]);
        let h = hamiltonian(&SystemParams {
            sigma: 0.01,
            ..params(0.0)
        });
        assert_eq!(h.data[0][0], c64(1.0, 0.0));
        assert_eq!(h.data[1][1], c64(0.005, 0.0));
        assert_eq!(h.data[2][2], c64(-0.005, 0.0));
        // gap between level 1 and the doublet midpoint is Δ
        let mid = 0.5 * (h.data[1][1].re + h.data[2][2].re);
        assert_eq!(h.data[0][0].re - mid, 1.0);
    }

    #[test]
    fn coupling_matrix_structure() {
        let g = coupling_matrix(c64(1.0, 0.0));
        for (i, j, v) in [(0, 1, 1.0), (0, 2, 1.0), (1, 0, 1.0), (2, 0, 1.0)] {
            assert_eq!(g.data[i][j], c64(v, 0.0));
        }
        for gamma in [c64(1.0, 0.0), c64(2.0, 0.0), c64(0.0, 1.0), c64(1.0, 1.0)] {
            assert_eq!(coupling_matrix(gamma).hermiticity_deviation(), 0.0);
        }
        // γ = i annihilates (iφ2 − φ3)/√2
        let g = coupling_matrix(c64(0.0, 1.0));
        let v = [c64(0.0, 0.0), c64(0.0, 1.0), c64(-1.0, 0.0)];
        assert!(vec_norm(&g.matvec(&v)) < 1e-15);
    }

    #[test]
    fn gibbs_state_populations() {
        let p = params(0.0);
        let rho = gibbs_state(&p, 0.0);
        let expected = 1.0 / (1.0 + 2.0 * 1.0f64.exp());
        assert!((rho.entry(0, 0).re - expected).abs() < 1e-15);
        // infinite temperature limit
        let hot = SystemParams { beta: 1e-12, ..p };
        let rho = gibbs_state(&hot, 0.0);
        for i in 0..3 {
            assert!((rho.entry(i, i).re - 1.0 / 3.0).abs() < 1e-12);
        }
        // σ > 0 population of level 1
        let sigma = 0.3;
        let rho = gibbs_state(&p, sigma);
        let expected = 1.0 / (1.0 + (1.0 + sigma / 2.0).exp() + (1.0 - sigma / 2.0).exp());
        assert!((rho.entry(0, 0).re - expected).abs() < 1e-15);
    }

    #[test]
    fn dark_state_properties() {
        let tau = dark_state(c64(1.0, 0.0));
        assert!((tau[1].re - 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
        assert!((tau[2].re + 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
        let p = params(0.0);
        let h0 = hamiltonian(&p);
        for gamma in [c64(1.0, 0.0), c64(2.0, 0.0), c64(0.0, 1.0), c64(1.0, 1.0)] {
            let tau = dark_state(gamma);
            assert!((vec_norm(&tau) - 1.0).abs() < 1e-14);
            assert!(vec_norm(&coupling_matrix(gamma).matvec(&tau)) < 1e-14);
            // (H_S(0) − E)τ = 0
            let htau = h0.matvec(&tau);
            for i in 0..3 {
                assert!((htau[i] - p.e * tau[i]).norm() < 1e-14);
            }
            assert_eq!(tau[0], c64(0.0, 0.0));
        }
    }

    #[test]
    fn reference_vector_properties() {
        let r = reference_vector();
        assert!((vec_norm(&r) - 1.0).abs() < 1e-15);
        // ⟨ψ_ref, (A⊗1)ψ_ref⟩ = Tr(A)/3 for A = diag(1,2,3)
        let a = CMat::from_diag(&[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]);
        let av = op_tensor_id(&a).matvec(&r);
        assert!((vec_dot(&r, &av) - c64(2.0, 0.0)).norm() < 1e-15);
        // Ψ-coordinates (Ψ1+Ψ2+Ψ3)/√3
        let psi = psi_basis();
        for (k, expected) in [(0, 1.0), (1, 1.0), (2, 1.0), (3, 0.0), (4, 0.0)] {
            let coord = vec_dot(&psi[k], &r);
            assert!((coord - c64(expected / 3.0f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn psi_basis_is_orthonormal_and_unitary() {
        let psi = psi_basis();
        for a in 0..5 {
            for b in 0..5 {
                let d = vec_dot(&psi[a], &psi[b]);
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((d - c64(expected, 0.0)).norm() < 1e-14);
            }
        }
        // together with the ±Δ sectors the 9 columns form a unitary
        let mut cols: Vec<LiouvilleVec> = psi.to_vec();
        for idx in SECTOR_PLUS_IDX.iter().chain(SECTOR_MINUS_IDX.iter()) {
            let mut v = [c64(0.0, 0.0); 9];
            v[*idx] = c64(1.0, 0.0);
            cols.push(v);
        }
        let u = CMat::<9>::from_fn(|i, j| cols[j][i]);
        assert!(u.adjoint().matmul(&u).deviation_from_identity() < 1e-14);
    }

    #[test]
    fn b_operator_known_cases() {
        // pure level-1 state
        let b = b_operator(&DensityMatrix::level1()).unwrap();
        assert!((b.data[0][0] - c64(3.0f64.sqrt(), 0.0)).norm() < 1e-14);
        assert!(b.max_norm() - 3.0f64.sqrt() < 1e-14);

        // Gibbs: b = √(3/(e^{βE}Z))·diag(e^{-βΔ/2}, 1, 1) with Z = Σe^{-βE_j}
        let p = params(0.0);
        let rho = gibbs_state(&p, 0.0);
        let b = b_operator(&rho).unwrap();
        let z = partition_function(&p, 0.0);
        let scale = (3.0 / ((p.beta * p.e).exp() * z)).sqrt();
        assert!((b.data[0][0].re - scale * (-p.beta * p.gap() / 2.0).exp()).abs() < 1e-14);
        assert!((b.data[1][1].re - scale).abs() < 1e-14);
        assert!((b.data[2][2].re - scale).abs() < 1e-14);

        // dark state: b ∝ the (φ2−φ3) pattern, normalized so Bψ_ref = τ⊗τ
        let b = b_operator(&DensityMatrix::dark(c64(1.0, 0.0))).unwrap();
        let s = 3.0f64.sqrt() / 2.0;
        assert!(vec_norm(&b.matvec(&[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)])) < 1e-14);
        let bphi2 = b.matvec(&[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert!((bphi2[1].re - s).abs() < 1e-14 && (bphi2[2].re + s).abs() < 1e-14);
    }

    #[test]
    fn b_operator_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi_ref = reference_vector();
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            let b = b_operator(&rho).unwrap();
            let psi_s = state_vector(&rho).unwrap();
            // Bψ_ref = ψ_S
            let bp = id_tensor_op(&b).matvec(&psi_ref);
            for i in 0..9 {
                assert!((bp[i] - psi_s[i]).norm() < 1e-13);
            }
            // ⟨ψ_S, (A⊗1)ψ_S⟩ = Tr(ρA) for the 9 matrix units
            for j in 0..3 {
                for k in 0..3 {
                    let mut a = CMat::<3>::zeros();
                    a.data[j][k] = c64(1.0, 0.0);
                    let lhs = vec_dot(&psi_s, &op_tensor_id(&a).matvec(&psi_s));
                    let rhs = rho.0.matmul(&a).trace();
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
        // non-PSD input errors
        let bad = CMat::from_diag(&[c64(1.5, 0.0), c64(-0.5, 0.0), c64(0.0, 0.0)]);
        assert!(b_operator(&DensityMatrix(bad)).is_err());
    }

    #[test]
    fn x_sigma_properties() {
        let p0 = params(0.0);
        assert_eq!(x_sigma(&p0), CMat::identity());
        for sigma in [1e-3, 1e-5] {
            let p = SystemParams { sigma, ..p0 };
            let x = x_sigma(&p);
            let sandwich = x.matmul(&gibbs_state(&p, 0.0).0).matmul(&x);
            assert!(
                sandwich.sub(&gibbs_state(&p, sigma).0).max_norm() < 1e-14,
                "σ={sigma}"
            );
        }
        // ‖X_σ − 1‖ ≤ βσ for small σ
        for sigma in [1e-4, 1e-5] {
            let p = SystemParams { sigma, ..p0 };
            let dev = x_sigma(&p).sub(&CMat::identity()).max_norm();
            assert!(dev <= p.beta * sigma, "σ={sigma}: dev={dev}");
        }
        // diagonal operators commute exactly
        let p = SystemParams { sigma: 0.1, ..p0 };
        let (h, x, g) = (hamiltonian(&p), x_sigma(&p), gibbs_state(&p, 0.1).0);
        assert_eq!(h.matmul(&x).sub(&x.matmul(&h)).max_norm(), 0.0);
        assert_eq!(h.matmul(&g).sub(&g.matmul(&h)).max_norm(), 0.0);
        assert_eq!(x.matmul(&g).sub(&g.matmul(&x)).max_norm(), 0.0);
    }

    #[test]
    fn trace_norm_cases() {
        assert_eq!(trace_norm(&CMat::zeros()).unwrap(), 0.0);
        let m = CMat::from_diag(&[c64(1.0, 0.0), c64(-1.0, 0.0), c64(0.0, 0.0)]);
        assert!((trace_norm(&m).unwrap() - 2.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_density(&mut rng);
            let b = random_density(&mut rng);
            assert!(trace_distance(&a, &b) <= 2.0 + 1e-12);
        }
        let mut nh = CMat::<3>::zeros();
        nh.data[0][1] = c64(1.0, 0.0);
        assert!(trace_norm(&nh).is_err());
    }

    #[test]
    fn manifold_states() {
        let (beta, gap) = (1.0, 1.0);
        let ebd = 1.0f64.exp();
        // p = 0 is the dark state
        let rho = manifold_state(0.0, beta, gap).unwrap();
        assert!(trace_distance(&rho, &DensityMatrix::dark(c64(1.0, 0.0))) < 1e-14);
        // p = (1+2e^{βΔ})^{-1} is the σ = 0 Gibbs state
        let p_gibbs = 1.0 / (1.0 + 2.0 * ebd);
        let rho = manifold_state(p_gibbs, beta, gap).unwrap();
        let p = params(0.0);
        assert!(trace_distance(&rho, &gibbs_state(&p, 0.0)) < 1e-14);
        // p = p_max has a rank-one doublet block along ν = (φ2+φ3)/√2
        let p_max = 1.0 / (ebd + 1.0);
        let rho = manifold_state(p_max, beta, gap).unwrap();
        let evs = rho.eigenvalues();
        assert!(evs[0].abs() < 1e-14); // ν-orthogonal direction is empty
        // PSD and unit trace across the manifold
        for k in 0..=50 {
            let pk = p_max * k as f64 / 50.0;
            let rho = manifold_state(pk, beta, gap).unwrap();
            assert!(rho.min_eigenvalue() >= -1e-14);
            assert!((rho.trace().re - 1.0).abs() < 1e-14);
        }
        assert!(manifold_state(p_max + 1e-6, beta, gap).is_err());
        assert!(manifold_state(-1e-9, beta, gap).is_err());
    }

    #[test]
    fn manifold_membership_checks() {
        let (beta, gap) = (1.0, 1.0);
        let dark = DensityMatrix::dark(c64(1.0, 0.0));
        assert_eq!(
            manifold_membership(&dark, beta, gap, MANIFOLD_TOL),
            Some(0.0)
        );
        // maximally mixed state violates the α-relation
        let mixed = DensityMatrix(CMat::from_diag(&[
            c64(1.0 / 3.0, 0.0),
            c64(1.0 / 3.0, 0.0),
            c64(1.0 / 3.0, 0.0),
        ]));
        assert_eq!(manifold_membership(&mixed, beta, gap, MANIFOLD_TOL), None);
        // σ > 0 Gibbs state has asymmetric doublet populations
        let rho = gibbs_state(&params(0.0), 0.4);
        assert_eq!(manifold_membership(&rho, beta, gap, MANIFOLD_TOL), None);
    }

    #[test]
    fn final_state_formula_cases() {
        let (beta, gap) = (1.0, 1.0);
        let ebd = 1.0f64.exp();
        // donor initial state
        let f = final_state_formula(&DensityMatrix::level1(), beta, gap);
        assert!((f.entry(0, 0).re - 1.0 / (1.0 + ebd)).abs() < 1e-15);
        // fixed points
        let dark = DensityMatrix::dark(c64(1.0, 0.0));
        assert!(trace_distance(&final_state_formula(&dark, beta, gap), &dark) < 1e-14);
        let g0 = gibbs_state(&params(0.0), 0.0);
        assert!(trace_distance(&final_state_formula(&g0, beta, gap), &g0) < 1e-14);
        // idempotence on random inputs
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let rho = random_density(&mut rng);
            let once = final_state_formula(&rho, beta, gap);
            let twice = final_state_formula(&once, beta, gap);
            assert!(trace_distance(&once, &twice) < 1e-15);
            // quasi-stationary alias gives the identical formula
            let q = quasi_stationary_state(&rho, beta, gap);
            assert_eq!(q.0, once.0);
        }
        // level-1 quasi-stationary coherence value α = e^{βΔ}/(2(e^{βΔ}+1))
        let q = quasi_stationary_state(&DensityMatrix::level1(), beta, gap);
        assert!((q.entry(1, 2).re - ebd / (2.0 * (ebd + 1.0))).abs() < 1e-15);
        // diagonal initial states acquire coherence
        // α = ((2e^{βΔ}+1)p11 − 1)/(4(e^{βΔ}+1)); the ¼(e^{βΔ}+1)^{-1}
        // lower bound holds when |(2e^{βΔ}+1)p11 − 1| ≥ 1 (it degenerates
        // near the Gibbs-diagonal population p11 = (2e^{βΔ}+1)^{-1})
        for pd in [0.0, 0.3, 1.0] {
            let rho = DensityMatrix::donor(pd, None).unwrap();
            let q = quasi_stationary_state(&rho, beta, gap);
            let alpha_exact = ((2.0 * ebd + 1.0) * pd - 1.0) / (4.0 * (ebd + 1.0));
            assert!((q.entry(1, 2).re - alpha_exact).abs() < 1e-15);
        }
        for pd in [0.0, 1.0] {
            let rho = DensityMatrix::donor(pd, None).unwrap();
            let q = quasi_stationary_state(&rho, beta, gap);
            assert!(q.entry(1, 2).re.abs() >= 0.25 / (ebd + 1.0) - 1e-15);
        }
    }

    #[test]
    fn density_matrix_json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let rho = random_density(&mut rng);
            let back = DensityMatrix::from_json(&rho.to_json()).unwrap();
            assert_eq!(rho.0, back.0);
        }
        assert!(DensityMatrix::from_json("[[1,2]]").is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMat::identity()).is_err()); // trace 3
        let mut m = CMat::<3>::zeros();
        m.data[0][0] = c64(1.0, 0.0);
        m.data[0][1] = c64(0.1, 0.0); // not Hermitian
        assert!(DensityMatrix::new(m).is_err());
        let neg = CMat::from_diag(&[c64(1.2, 0.0), c64(-0.2, 0.0), c64(0.0, 0.0)]);
        assert!(DensityMatrix::new(neg).is_err());
        let p = params(0.0);
        assert!(p.validate().is_ok());
        assert!(p.regime_ok()); // σ = 0 < λ² < Δ at the standard point
        let loud = SystemParams { lambda: 2.0, ..p };
        assert!(!loud.regime_ok());
    }
}
