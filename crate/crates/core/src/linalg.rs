//! Small dense complex linear algebra.
//!
//! Everything in this crate lives in dimension ≤ 9, so matrices are
//! stack-allocated `[[C64; N]; N]` behind a thin wrapper. The only
//! nontrivial routines are an LU solver with partial pivoting (used by
//! inverse iteration) and a cyclic Jacobi eigensolver for Hermitian
//! matrices (used for trace norms and Hermitian square roots).

use num_complex::Complex64;

pub type C64 = Complex64;

pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense N×N complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize> {
    pub data: [[C64; N]; N],
}

impl<const N: usize> CMat<N> {
    pub fn zeros() -> Self {
        Self {
            data: [[C64::new(0.0, 0.0); N]; N],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: [[C64; N]; N]) -> Self {
        Self { data: rows }
    }

    pub fn from_diag(d: &[C64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = d[i];
        }
        m
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    /// Rank-one matrix |r⟩⟨l| (sesquilinear: entries r_i · conj(l_j)).
    pub fn outer(r: &[C64; N], l: &[C64; N]) -> Self {
        Self::from_fn(|i, j| r[i] * l[j].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.data[i][k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..N {
                    out.data[i][j] += a * rhs.data[k][j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64; N]) -> [C64; N] {
        let mut out = [C64::new(0.0, 0.0); N];
        for i in 0..N {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..N {
                acc += self.data[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::from_fn(|i, j| self.data[i][j] + rhs.data[i][j])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::from_fn(|i, j| self.data[i][j] - rhs.data[i][j])
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::from_fn(|i, j| z * self.data[i][j])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.data[j][i])
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(|i, j| self.data[i][j].conj())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.data[j][i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.data[i][i]).sum()
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for row in &self.data {
            for z in row {
                m = m.max(z.norm());
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Max-entry deviation from the identity.
    pub fn deviation_from_identity(&self) -> f64 {
        self.sub(&Self::identity()).max_norm()
    }

    /// Max-entry deviation from Hermiticity, max_ij |m_ij − conj(m_ji)|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..N {
            for j in 0..N {
                d = d.max((self.data[i][j] - self.data[j][i].conj()).norm());
            }
        }
        d
    }

    /// (M + Mᴴ)/2.
    pub fn hermitize(&self) -> Self {
        Self::from_fn(|i, j| 0.5 * (self.data[i][j] + self.data[j][i].conj()))
    }
}

pub fn vec_dot<const N: usize>(a: &[C64; N], b: &[C64; N]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..N {
        acc += a[i].conj() * b[i];
    }
    acc
}

/// Bilinear pairing Σ a_i b_i (no conjugation).
pub fn vec_dot_bilinear<const N: usize>(a: &[C64; N], b: &[C64; N]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..N {
        acc += a[i] * b[i];
    }
    acc
}

pub fn vec_norm<const N: usize>(a: &[C64; N]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_scale<const N: usize>(a: &[C64; N], z: C64) -> [C64; N] {
    let mut out = *a;
    for x in &mut out {
        *x *= z;
    }
    out
}

pub fn vec_sub<const N: usize>(a: &[C64; N], b: &[C64; N]) -> [C64; N] {
    let mut out = *a;
    for i in 0..N {
        out[i] -= b[i];
    }
    out
}

pub fn vec_conj<const N: usize>(a: &[C64; N]) -> [C64; N] {
    let mut out = *a;
    for x in &mut out {
        *x = x.conj();
    }
    out
}

/// LU factorization with partial pivoting, for repeated solves against the
/// same shifted matrix during inverse iteration.
pub struct Lu<const N: usize> {
    lu: [[C64; N]; N],
    piv: [usize; N],
    pub min_pivot: f64,
}

impl<const N: usize> Lu<N> {
    /// Factor `a`; near-singular pivots are nudged so that inverse iteration
    /// with an exact eigenvalue shift still works.
    pub fn factor(a: &CMat<N>) -> Self {
        let mut lu = a.data;
        let mut piv = [0usize; N];
        let scale = a.max_norm().max(f64::MIN_POSITIVE);
        let mut min_pivot = f64::INFINITY;
        for k in 0..N {
            // pivot search
            let mut p = k;
            let mut best = lu[k][k].norm();
            for i in (k + 1)..N {
                let v = lu[i][k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if p != k {
                lu.swap(p, k);
            }
            let mut d = lu[k][k];
            // Exact singularity: replace by a tiny pivot so the solve blows
            // up along the null direction. The floor must keep |d|² above
            // the subnormal range, or complex division NaNs out.
            if d.norm() < 1e-120 * scale {
                d = C64::new(1e-120 * scale, 0.0);
                lu[k][k] = d;
            }
            min_pivot = min_pivot.min(d.norm());
            for i in (k + 1)..N {
                let f = lu[i][k] / d;
                lu[i][k] = f;
                for j in (k + 1)..N {
                    let t = f * lu[k][j];
                    lu[i][j] -= t;
                }
            }
        }
        Self { lu, piv, min_pivot }
    }

    pub fn solve(&self, b: &[C64; N]) -> [C64; N] {
        let mut x = *b;
        for k in 0..N {
            x.swap(k, self.piv[k]);
            for i in (k + 1)..N {
                let t = self.lu[i][k] * x[k];
                x[i] -= t;
            }
        }
        for k in (0..N).rev() {
            for j in (k + 1)..N {
                let t = self.lu[k][j] * x[j];
                x[k] -= t;
            }
            x[k] /= self.lu[k][k];
        }
        x
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvector columns.
pub fn eig_hermitian<const N: usize>(m: &CMat<N>) -> ([f64; N], CMat<N>) {
    let mut a = m.hermitize().data;
    let mut v = CMat::<N>::identity().data;
    let scale = m.max_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..N {
            for q in (p + 1)..N {
                off = off.max(a[p][q].norm());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let g = a[p][q];
                let absg = g.norm();
                if absg <= 1e-18 * scale {
                    continue;
                }
                let w = g / absg; // unit phase of the off-diagonal entry
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let tau = (aqq - app) / (2.0 * absg);
                // smaller-magnitude root of t² − 2τt − 1 = 0
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                // unitary U: col p -> c e_p + s w̄ e_q ; col q -> -s w e_p + c e_q
                let up = (C64::new(cth, 0.0), sth * w.conj());
                let uq = (-sth * w, C64::new(cth, 0.0));
                // A <- U† A U : update columns then rows
                for i in 0..N {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = aip * up.0 + aiq * up.1;
                    a[i][q] = aip * uq.0 + aiq * uq.1;
                }
                for j in 0..N {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = up.0.conj() * apj + up.1.conj() * aqj;
                    a[q][j] = uq.0.conj() * apj + uq.1.conj() * aqj;
                }
                for i in 0..N {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = vip * up.0 + viq * up.1;
                    v[i][q] = vip * uq.0 + viq * uq.1;
                }
            }
        }
    }
    let mut order: [usize; N] = core::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a[i][i].re.partial_cmp(&a[j][j].re).unwrap());
    let vals: [f64; N] = core::array::from_fn(|k| a[order[k]][order[k]].re);
    let vecs = CMat::<N>::from_fn(|i, k| v[i][order[k]]);
    (vals, vecs)
}

/// Hermitian square root with eigenvalue clamping: eigenvalues in
/// `[-clamp_tol, 0)` are treated as exact zeros, anything below that is a
/// domain error reported by the caller via `None`.
pub fn hermitian_sqrt<const N: usize>(m: &CMat<N>, clamp_tol: f64) -> Option<CMat<N>> {
    let (vals, vecs) = eig_hermitian(m);
    let mut roots = [0.0f64; N];
    for i in 0..N {
        if vals[i] < -clamp_tol {
            return None;
        }
        roots[i] = vals[i].max(0.0).sqrt();
    }
    let mut out = CMat::<N>::zeros();
    for i in 0..N {
        for j in 0..N {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..N {
                acc += vecs.data[i][k] * roots[k] * vecs.data[j][k].conj();
            }
            out.data[i][j] = acc;
        }
    }
    Some(out)
}

/// Deterministic pseudo-random unit vector (splitmix64), used to seed
/// inverse iteration without dragging an RNG dependency into the hot path.
pub fn seeded_unit_vector<const N: usize>(seed: u64) -> [C64; N] {
    let mut s = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        s = s.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut v = [C64::new(0.0, 0.0); N];
    for x in &mut v {
        let re = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        let im = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        *x = C64::new(re, im);
    }
    let n = vec_norm(&v);
    vec_scale(&v, C64::new(1.0 / n, 0.0))
}
