//! The reduced dynamics assembled from the resonance data.
//!
//! The propagator on the 9-dim Liouville space is
//! U(t) = Σ_{j,s} e^{itε_j^{(s)}} P_j^{(s)}, block diagonal over the three
//! spectral sectors; matrix elements of the evolved state follow from
//! [T_t(ρ)]_{k,l} = ⟨ψ_S, (1⊗b) U(t) (X_σ|φ_l⟩⟨φ_k|X_σ ⊗ 1) ψ_ref⟩
//! with (ψ_S, b) built from the initial state. The σ-dressing X_σ makes the
//! unique σ > 0 equilibrium come out as ρ_{S,β,σ} exactly.
//!
//! Phases e^{itε} are evaluated with an FMA-split argument (t·Re ε carried
//! as hi+lo), so the group law U(t+s) = U(t)U(s) survives at phases of
//! 10⁷ rad and beyond — the slow time scale λ²/σ² is this large at the
//! operating point.

use crate::linalg::{c64, CMat, C64};
use crate::reservoir::{FormFactor, ReservoirConstants};
use crate::resonance::{self, ResonanceSet, Sector};
use crate::system::{
    self, b_operator, gibbs_state, psi_basis, reference_vector, state_vector, x_sigma,
    DensityMatrix, LiouvilleVec, SystemParams, SECTOR_MINUS_IDX, SECTOR_PLUS_IDX,
};
use crate::{Error, Result};
use rayon::prelude::*;

/// e^{itε} with the oscillatory argument split into hi + lo parts via FMA.
fn phase_factor(t: f64, eps: C64) -> C64 {
    let theta_hi = t * eps.re;
    let theta_lo = t.mul_add(eps.re, -theta_hi); // exact product residual
    let (s_hi, c_hi) = theta_hi.sin_cos();
    let c = c_hi - theta_lo * s_hi;
    let s = s_hi + theta_lo * c_hi;
    let damp = (-t * eps.im).exp();
    c64(c * damp, s * damp)
}

/// One resonance embedded in the product basis of ℂ³⊗ℂ³.
#[derive(Clone, Debug)]
struct Mode {
    sector: Sector,
    index: usize,
    energy: C64,
    right: LiouvilleVec,
    left: LiouvilleVec,
}

/// Resonance propagator U(t) = Σ e^{itε} |right⟩⟨left| on ℂ³⊗ℂ³.
#[derive(Clone, Debug)]
pub struct Propagator {
    modes: Vec<Mode>,
}

impl Propagator {
    fn from_set(set: &ResonanceSet) -> Self {
        let psi = psi_basis();
        let mut modes = Vec::with_capacity(9);
        for d in &set.data {
            let (right, left) = match d.sector {
                Sector::Zero => {
                    let mut r = [c64(0.0, 0.0); 9];
                    let mut l = [c64(0.0, 0.0); 9];
                    for (k, basis_vec) in psi.iter().enumerate() {
                        for i in 0..9 {
                            r[i] += d.right[k] * basis_vec[i];
                            l[i] += d.left[k] * basis_vec[i];
                        }
                    }
                    (r, l)
                }
                Sector::Plus => embed_two(&d.right, &d.left, &SECTOR_PLUS_IDX),
                Sector::Minus => embed_two(&d.right, &d.left, &SECTOR_MINUS_IDX),
            };
            modes.push(Mode {
                sector: d.sector,
                index: d.index,
                energy: d.energy,
                right,
                left,
            });
        }
        Self { modes }
    }

    /// U(t) as a dense 9×9 matrix.
    pub fn u_at(&self, t: f64) -> CMat<9> {
        let mut u = CMat::<9>::zeros();
        for m in &self.modes {
            let phase = phase_factor(t, m.energy);
            for i in 0..9 {
                let ri = phase * m.right[i];
                if ri == c64(0.0, 0.0) {
                    continue;
                }
                for j in 0..9 {
                    u.data[i][j] += ri * m.left[j].conj();
                }
            }
        }
        u
    }
}

fn embed_two(r2: &[C64], l2: &[C64], idx: &[usize; 2]) -> (LiouvilleVec, LiouvilleVec) {
    let mut r = [c64(0.0, 0.0); 9];
    let mut l = [c64(0.0, 0.0); 9];
    for k in 0..2 {
        r[idx[k]] = r2[k];
        l[idx[k]] = l2[k];
    }
    (r, l)
}

/// Evolved state plus the diagnostics the approximation contract tracks.
#[derive(Clone, Debug)]
pub struct EvolvedState {
    pub state: DensityMatrix,
    /// max |M − Mᴴ| before Hermitization.
    pub hermiticity_deviation: f64,
    /// |Tr − 1| (O(βσ) for σ > 0 by construction).
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
}

/// Initial-state data reused across a trajectory.
struct EvolveContext {
    /// g_d = ⟨ψ_S, (1⊗b) right_d⟩ per mode.
    g: Vec<C64>,
}

/// Time grid specification for trajectories.
#[derive(Clone, Debug)]
pub enum TimeGrid {
    Geometric {
        t_min: f64,
        t_max: f64,
        points: usize,
    },
    Linear {
        t_min: f64,
        t_max: f64,
        points: usize,
    },
    Explicit(Vec<f64>),
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        let ts = match self {
            TimeGrid::Geometric {
                t_min,
                t_max,
                points,
            } => {
                if !(*t_min > 0.0) || !(*t_max > *t_min) || *points < 2 {
                    return Err(Error::Domain(format!(
                        "geometric grid needs 0 < t_min < t_max and ≥ 2 points \
                         (got {t_min}, {t_max}, {points})"
                    )));
                }
                let ratio = t_max / t_min;
                (0..*points)
                    .map(|k| t_min * ratio.powf(k as f64 / (*points - 1) as f64))
                    .collect()
            }
            TimeGrid::Linear {
                t_min,
                t_max,
                points,
            } => {
                if !(*t_min >= 0.0) || !(*t_max > *t_min) || *points < 2 {
                    return Err(Error::Domain(format!(
                        "linear grid needs 0 ≤ t_min < t_max and ≥ 2 points \
                         (got {t_min}, {t_max}, {points})"
                    )));
                }
                (0..*points)
                    .map(|k| t_min + (t_max - t_min) * k as f64 / (*points - 1) as f64)
                    .collect()
            }
            TimeGrid::Explicit(ts) => {
                if ts.is_empty() {
                    return Err(Error::Domain("explicit grid is empty".into()));
                }
                for w in ts.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(Error::Domain(
                            "explicit grid must be strictly increasing".into(),
                        ));
                    }
                }
                if ts[0] < 0.0 {
                    return Err(Error::Domain("times must be ≥ 0".into()));
                }
                ts.clone()
            }
        };
        Ok(ts)
    }
}

/// Trajectory of the reduced dynamics with per-time distance channels.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// ‖T_t(ρ0) − ρ_{S,β,σ}‖₁
    pub dist_gibbs: Vec<f64>,
    /// ‖T_t(ρ0) − quasi-stationary formula state‖₁
    pub dist_qstat: Vec<f64>,
    /// ‖T_t(ρ0) − final-state formula state‖₁
    pub dist_final: Vec<f64>,
    /// donor population [T_t(ρ0)]_{11}
    pub p_donor: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub trace_dev: Vec<f64>,
    pub herm_dev: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Distance channel selector for rate fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceChannel {
    Gibbs,
    QuasiStationary,
    Final,
}

/// Two-timescale summary at one parameter point.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TimescaleReport {
    /// Fast scale t1 = 1/λ².
    pub t1: f64,
    /// Slow scale t2 = λ²/σ² (infinite at σ = 0).
    pub t2: f64,
    /// Exact fast rate λ²·γ_deg.
    pub rate_fast: f64,
    /// Exact slow rate (σ²/λ²)·γ_nd (zero at σ = 0).
    pub rate_slow: f64,
    /// t2/t1 = λ⁴/σ².
    pub ratio: f64,
    pub regime_ok: bool,
}

/// Observation-formula value with its validity flag (t ≫ 1/λ² required).
#[derive(Clone, Copy, Debug)]
pub struct ObservationPoint {
    pub value: f64,
    pub within_validity: bool,
}

/// Everything needed to evolve states at one parameter point: bath
/// constants, resonance set, embedded propagator and the X_σ dressing.
pub struct Dynamics {
    params: SystemParams,
    form_factor: FormFactor,
    constants: ReservoirConstants,
    resonances: ResonanceSet,
    propagator: Propagator,
    x_diag: [f64; 3],
}

impl Dynamics {
    pub fn new(params: SystemParams, form_factor: FormFactor) -> Result<Self> {
        params.validate()?;
        let constants = ReservoirConstants::compute(&form_factor, params.beta, params.gap())?;
        Self::with_constants(params, form_factor, constants)
    }

    /// Reuse precomputed bath constants (they depend only on (β, Δ, ff)).
    pub fn with_constants(
        params: SystemParams,
        form_factor: FormFactor,
        constants: ReservoirConstants,
    ) -> Result<Self> {
        params.validate()?;
        if (constants.beta - params.beta).abs() > 1e-12 * params.beta
            || (constants.gap - params.gap()).abs() > 1e-12 * params.gap()
        {
            return Err(Error::Domain(
                "reservoir constants were computed for different (β, Δ)".into(),
            ));
        }
        let resonances = ResonanceSet::compute(&params, &constants)?;
        let propagator = Propagator::from_set(&resonances);
        let x = x_sigma(&params);
        let x_diag = [x.data[0][0].re, x.data[1][1].re, x.data[2][2].re];
        Ok(Self {
            params,
            form_factor,
            constants,
            resonances,
            propagator,
            x_diag,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn form_factor(&self) -> &FormFactor {
        &self.form_factor
    }

    pub fn constants(&self) -> &ReservoirConstants {
        &self.constants
    }

    pub fn resonances(&self) -> &ResonanceSet {
        &self.resonances
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    fn prepare(&self, rho0: &DensityMatrix) -> Result<EvolveContext> {
        let b = b_operator(rho0)?;
        let psi_s = state_vector(rho0)?;
        let mut g = Vec::with_capacity(self.propagator.modes.len());
        for m in &self.propagator.modes {
            // (1⊗b) right: component (j,n) = Σ_m b[n][m]·right[(j,m)]
            let mut acc = c64(0.0, 0.0);
            for j in 0..3 {
                for n in 0..3 {
                    let mut bn = c64(0.0, 0.0);
                    for mm in 0..3 {
                        bn += b.data[n][mm] * m.right[system::prod_idx(j, mm)];
                    }
                    acc += psi_s[system::prod_idx(j, n)].conj() * bn;
                }
            }
            g.push(acc);
        }
        Ok(EvolveContext { g })
    }

    fn evolve_prepared(&self, ctx: &EvolveContext, t: f64) -> EvolvedState {
        let s3 = 3.0_f64.sqrt();
        let mut raw = CMat::<3>::zeros();
        for (m, &g) in self.propagator.modes.iter().zip(ctx.g.iter()) {
            let weight = phase_factor(t, m.energy) * g;
            if weight == c64(0.0, 0.0) {
                continue;
            }
            for k in 0..3 {
                for l in 0..3 {
                    raw.data[k][l] += weight
                        * m.left[system::prod_idx(l, k)].conj()
                        * (self.x_diag[k] * self.x_diag[l] / s3);
                }
            }
        }
        let herm_dev = raw.hermiticity_deviation();
        let state = DensityMatrix::from_evolution(raw);
        let trace_dev = (state.trace() - c64(1.0, 0.0)).norm();
        let min_eigenvalue = state.min_eigenvalue();
        EvolvedState {
            state,
            hermiticity_deviation: herm_dev,
            trace_deviation: trace_dev,
            min_eigenvalue,
        }
    }

    /// T_t(ρ0) with diagnostics.
    pub fn evolve_detailed(&self, rho0: &DensityMatrix, t: f64) -> Result<EvolvedState> {
        if t < 0.0 {
            return Err(Error::Domain(format!("time must be ≥ 0, got {t}")));
        }
        let ctx = self.prepare(rho0)?;
        let evolved = self.evolve_prepared(&ctx, t);
        if evolved.hermiticity_deviation > 1e-8 {
            return Err(Error::Inconsistency(format!(
                "evolved state lost Hermiticity ({:.3e} at t = {t})",
                evolved.hermiticity_deviation
            )));
        }
        Ok(evolved)
    }

    /// T_t(ρ0).
    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        Ok(self.evolve_detailed(rho0, t)?.state)
    }

    /// Contribution of the single resonance (sector, index) to T_t(ρ0):
    /// the e^{itε}·χ term as a raw 3×3 matrix (one term of the expansion,
    /// not a state by itself).
    pub fn mode_contribution(
        &self,
        rho0: &DensityMatrix,
        sector: Sector,
        index: usize,
        t: f64,
    ) -> Result<CMat<3>> {
        let ctx = self.prepare(rho0)?;
        let pos = self
            .propagator
            .modes
            .iter()
            .position(|m| m.sector == sector && m.index == index)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "no resonance with sector {} index {index}",
                    sector.label()
                ))
            })?;
        let m = &self.propagator.modes[pos];
        let s3 = 3.0_f64.sqrt();
        let weight = phase_factor(t, m.energy) * ctx.g[pos];
        let mut out = CMat::<3>::zeros();
        for k in 0..3 {
            for l in 0..3 {
                out.data[k][l] = weight
                    * m.left[system::prod_idx(l, k)].conj()
                    * (self.x_diag[k] * self.x_diag[l] / s3);
            }
        }
        Ok(out)
    }

    /// Heisenberg evolution α_t(A), read off from U(t)(A⊗1)ψ_ref.
    pub fn heisenberg(&self, a: &CMat<3>, t: f64) -> CMat<3> {
        let psi_ref = reference_vector();
        let a91 = system::op_tensor_id(a);
        let v = a91.matvec(&psi_ref);
        let mut uv = [c64(0.0, 0.0); 9];
        for m in &self.propagator.modes {
            let phase = phase_factor(t, m.energy);
            let mut lv = c64(0.0, 0.0);
            for i in 0..9 {
                lv += m.left[i].conj() * v[i];
            }
            let w = phase * lv;
            for i in 0..9 {
                uv[i] += w * m.right[i];
            }
        }
        let s3 = 3.0_f64.sqrt();
        CMat::from_fn(|j, k| s3 * uv[system::prod_idx(j, k)])
    }

    /// X_σ A X_σ for the duality relation Tr(T_t(ρ)A) = Tr(ρ α_t(X_σAX_σ)).
    pub fn dress(&self, a: &CMat<3>) -> CMat<3> {
        CMat::from_fn(|i, j| a.data[i][j] * self.x_diag[i] * self.x_diag[j])
    }

    /// Asymptotic state: the Gibbs state ρ_{S,β,σ} for σ > 0 (only ε = 0
    /// survives), the two zero-mode contributions for σ = 0 (which
    /// reproduce the final-state formula).
    pub fn final_state_limit(&self, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        if self.params.sigma > 0.0 {
            return Ok(gibbs_state(&self.params, self.params.sigma));
        }
        let ctx = self.prepare(rho0)?;
        let s3 = 3.0_f64.sqrt();
        let mut raw = CMat::<3>::zeros();
        for (m, &g) in self.propagator.modes.iter().zip(ctx.g.iter()) {
            if m.energy != c64(0.0, 0.0) {
                continue;
            }
            for k in 0..3 {
                for l in 0..3 {
                    raw.data[k][l] += g
                        * m.left[system::prod_idx(l, k)].conj()
                        * (self.x_diag[k] * self.x_diag[l] / s3);
                }
            }
        }
        Ok(DensityMatrix::from_evolution(raw))
    }

    /// Evolve over a grid, computing all distance channels; grid points are
    /// independent and evaluated in parallel, collected in time order.
    pub fn trajectory(&self, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Trajectory> {
        let times = grid.times()?;
        let ctx = self.prepare(rho0)?;
        let gibbs = gibbs_state(&self.params, self.params.sigma);
        let qstat = system::quasi_stationary_state(rho0, self.params.beta, self.params.gap());
        let final_formula = system::final_state_formula(rho0, self.params.beta, self.params.gap());

        struct Row {
            state: DensityMatrix,
            dist_gibbs: f64,
            dist_qstat: f64,
            dist_final: f64,
            p_donor: f64,
            min_eig: f64,
            trace_dev: f64,
            herm_dev: f64,
        }

        let rows: Vec<Result<Row>> = times
            .par_iter()
            .map(|&t| {
                let ev = self.evolve_prepared(&ctx, t);
                if ev.hermiticity_deviation > 1e-8 {
                    return Err(Error::Inconsistency(format!(
                        "evolved state lost Hermiticity ({:.3e} at t = {t})",
                        ev.hermiticity_deviation
                    )));
                }
                Ok(Row {
                    dist_gibbs: system::trace_distance(&ev.state, &gibbs),
                    dist_qstat: system::trace_distance(&ev.state, &qstat),
                    dist_final: system::trace_distance(&ev.state, &final_formula),
                    p_donor: ev.state.entry(0, 0).re,
                    min_eig: ev.min_eigenvalue,
                    trace_dev: ev.trace_deviation,
                    herm_dev: ev.hermiticity_deviation,
                    state: ev.state,
                })
            })
            .collect();

        let mut traj = Trajectory {
            times,
            states: Vec::new(),
            dist_gibbs: Vec::new(),
            dist_qstat: Vec::new(),
            dist_final: Vec::new(),
            p_donor: Vec::new(),
            min_eig: Vec::new(),
            trace_dev: Vec::new(),
            herm_dev: Vec::new(),
            warnings: Vec::new(),
        };
        let mut worst_min_eig = f64::INFINITY;
        let mut worst_trace = 0.0f64;
        for row in rows {
            let r = row?;
            worst_min_eig = worst_min_eig.min(r.min_eig);
            worst_trace = worst_trace.max(r.trace_dev);
            traj.states.push(r.state);
            traj.dist_gibbs.push(r.dist_gibbs);
            traj.dist_qstat.push(r.dist_qstat);
            traj.dist_final.push(r.dist_final);
            traj.p_donor.push(r.p_donor);
            traj.min_eig.push(r.min_eig);
            traj.trace_dev.push(r.trace_dev);
            traj.herm_dev.push(r.herm_dev);
        }
        // positivity is monitored, not enforced
        if worst_min_eig < -1e-6 {
            traj.warnings.push(format!(
                "positivity: min eigenvalue reached {worst_min_eig:.3e}"
            ));
        }
        let trace_budget = if self.params.sigma == 0.0 {
            1e-12
        } else {
            10.0 * self.params.beta * self.params.sigma
        };
        if worst_trace > trace_budget {
            traj.warnings.push(format!(
                "trace drift {worst_trace:.3e} exceeded the contract {trace_budget:.3e}"
            ));
        }
        Ok(traj)
    }

    /// Default grid: geometric over [1e-2·t1, 50·t2] with 400 points
    /// (bounded multiple of t1 when σ = 0 makes t2 infinite).
    pub fn default_grid(&self) -> TimeGrid {
        let t1 = 1.0 / (self.params.lambda * self.params.lambda);
        let t_max = if self.params.sigma > 0.0 {
            50.0 * self.params.lambda * self.params.lambda
                / (self.params.sigma * self.params.sigma)
        } else {
            1e3 * t1
        };
        TimeGrid::Geometric {
            t_min: 1e-2 * t1,
            t_max,
            points: 400,
        }
    }

    /// Donor population p_D(t) = [T_t(ρ0)]_{11} for the diagonal initial
    /// state (p_d0, p2, p3) (equal acceptor split if not specified).
    pub fn donor_probability(
        &self,
        p_d0: f64,
        acceptors: Option<(f64, f64)>,
        t: f64,
    ) -> Result<f64> {
        let rho0 = DensityMatrix::donor(p_d0, acceptors)?;
        Ok(self.evolve(&rho0, t)?.entry(0, 0).re)
    }

    /// Closed observation formula for ρ0 = |φ1⟩⟨φ1|, valid for t ≫ 1/λ²:
    /// p(t) = (1+2e^{βΔ})⁻¹ + e^{-γ σ²t/λ²}/(2e^{βΔ}+3+e^{-βΔ}) with γ the
    /// exact slow-rate constant.
    pub fn observation_curve(&self, t: f64) -> ObservationPoint {
        let bd = self.params.beta * self.params.gap();
        let gamma = resonance::gamma_nd(&self.constants).exact;
        let l2 = self.params.lambda * self.params.lambda;
        let decay = (-gamma * self.params.sigma * self.params.sigma * t / l2).exp();
        let value =
            1.0 / (1.0 + 2.0 * bd.exp()) + decay / (2.0 * bd.exp() + 3.0 + (-bd).exp());
        ObservationPoint {
            value,
            within_validity: t * l2 >= 5.0,
        }
    }

    /// Plateau value (1+2e^{βΔ})⁻¹ + (2e^{βΔ}+3+e^{-βΔ})⁻¹ of the
    /// observation curve at the start of its validity window.
    pub fn p_quasi_stationary(&self) -> f64 {
        let bd = self.params.beta * self.params.gap();
        1.0 / (1.0 + 2.0 * bd.exp()) + 1.0 / (2.0 * bd.exp() + 3.0 + (-bd).exp())
    }

    /// Two-timescale summary with the exact rates from the resonance set.
    pub fn timescale_report(&self) -> TimescaleReport {
        let l2 = self.params.lambda * self.params.lambda;
        let sigma = self.params.sigma;
        let rate_fast = l2 * self.resonances.gamma_deg_exact(self.params.lambda);
        let (t2, rate_slow, ratio) = if sigma > 0.0 {
            let gnd = self
                .resonances
                .gamma_nd_exact(sigma, self.params.lambda)
                .unwrap_or(f64::NAN);
            (
                l2 / (sigma * sigma),
                sigma * sigma / l2 * gnd,
                l2 * l2 / (sigma * sigma),
            )
        } else {
            (f64::INFINITY, 0.0, f64::INFINITY)
        };
        TimescaleReport {
            t1: 1.0 / l2,
            t2,
            rate_fast,
            rate_slow,
            ratio,
            regime_ok: self.params.regime_ok(),
        }
    }
}

/// Least-squares slope of log(distance) vs t over the window; returns the
/// decay rate (−slope). Needs ≥ 4 strictly positive samples in the window.
pub fn fit_decay_rate(
    traj: &Trajectory,
    channel: DistanceChannel,
    window: (f64, f64),
) -> Result<f64> {
    let series = match channel {
        DistanceChannel::Gibbs => &traj.dist_gibbs,
        DistanceChannel::QuasiStationary => &traj.dist_qstat,
        DistanceChannel::Final => &traj.dist_final,
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &d) in traj.times.iter().zip(series.iter()) {
        if t >= window.0 && t <= window.1 {
            if d <= 0.0 {
                return Err(Error::Numeric(format!(
                    "non-positive distance {d:.3e} at t = {t} in the fit window"
                )));
            }
            xs.push(t);
            ys.push(d.ln());
        }
    }
    if xs.len() < 4 {
        return Err(Error::Numeric(format!(
            "need at least 4 samples in the window, found {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::Numeric("degenerate time window".into()));
    }
    Ok(-(n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::CutoffExponent;
    use crate::system::test_support::random_density;
    use crate::system::{final_state_formula, manifold_state, trace_distance};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn standard(sigma: f64) -> Dynamics {
        let params = SystemParams {
            e0: 1.0,
            e: 0.0,
            sigma,
            beta: 1.0,
            lambda: 0.05,
            gamma_coupling: c64(1.0, 0.0),
        };
        let ff = FormFactor::isotropic(0.3, 0, CutoffExponent::Exponential, 1.0).unwrap();
        Dynamics::new(params, ff).unwrap()
    }

    #[test]
    fn propagator_identity_and_group_law() {
        let dyn0 = standard(1e-5);
        let u0 = dyn0.propagator().u_at(0.0);
        assert!(u0.deviation_from_identity() < 1e-10);
        // group law across both timescales, dyadic times so t+s is exact
        let times = [6.25, 400.0, 25_600.0, 1_562_500.0, 25_000_000.0];
        for &t in &times {
            for &s in &times {
                let lhs = dyn0.propagator().u_at(t + s);
                let rhs = dyn0.propagator().u_at(t).matmul(&dyn0.propagator().u_at(s));
                assert!(
                    lhs.sub(&rhs).max_norm() < 1e-10,
                    "t={t}, s={s}: {:.3e}",
                    lhs.sub(&rhs).max_norm()
                );
            }
        }
    }

    #[test]
    fn degenerate_stationary_states() {
        let dyn0 = standard(0.0);
        let gibbs0 = gibbs_state(dyn0.params(), 0.0);
        let dark = DensityMatrix::dark(c64(1.0, 0.0));
        for &t in &[0.0, 1.0, 400.0, 4000.0, 100_000.0] {
            let out = dyn0.evolve(&gibbs0, t).unwrap();
            assert!(trace_distance(&out, &gibbs0) < 1e-9, "gibbs at t={t}");
            let out = dyn0.evolve(&dark, t).unwrap();
            assert!(trace_distance(&out, &dark) < 1e-9, "dark at t={t}");
        }
        // the whole invariant manifold is stationary
        let p_max = 1.0 / (1.0f64.exp() + 1.0);
        for k in 0..=10 {
            let p = p_max * k as f64 / 10.0;
            let rho = manifold_state(p, 1.0, 1.0).unwrap();
            for &t in &[400.0, 4000.0, 40_000.0] {
                let out = dyn0.evolve(&rho, t).unwrap();
                assert!(
                    trace_distance(&out, &rho) < 1e-9,
                    "manifold p={p} t={t}: {:.3e}",
                    trace_distance(&out, &rho)
                );
            }
        }
    }

    #[test]
    fn degenerate_final_state_matches_formula() {
        let dyn0 = standard(0.0);
        let delta_rate = dyn0.constants().delta * 0.05f64 * 0.05;
        let t = 200.0 / delta_rate;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let rho0 = random_density(&mut rng);
            let evolved = dyn0.evolve(&rho0, t).unwrap();
            let formula = final_state_formula(&rho0, 1.0, 1.0);
            assert!(trace_distance(&evolved, &formula) < 1e-6);
            // final_state_limit agrees with the formula
            let lim = dyn0.final_state_limit(&rho0).unwrap();
            assert!(trace_distance(&lim, &formula) < 1e-10);
        }
        // donor case p_∞ = (1+e^{βΔ})^{-1}
        let evolved = dyn0.evolve(&DensityMatrix::level1(), t).unwrap();
        let expected = 1.0 / (1.0 + 1.0f64.exp());
        assert!((evolved.entry(0, 0).re - expected).abs() < 1e-6);
    }

    #[test]
    fn zero_mode_contribution_is_the_gibbs_functional() {
        let dyn0 = standard(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho0 = random_density(&mut rng);
        let term = dyn0
            .mode_contribution(&rho0, Sector::Zero, 1, 123.0)
            .unwrap();
        let gibbs0 = gibbs_state(dyn0.params(), 0.0);
        assert!(term.sub(&gibbs0.0).max_norm() < 1e-12);
    }

    #[test]
    fn nondegenerate_equilibrium() {
        let dyn1 = standard(1e-5);
        let gibbs = gibbs_state(dyn1.params(), 1e-5);
        let gnd = dyn1.resonances().gamma_nd_exact(1e-5, 0.05).unwrap();
        let t_final = 20.0 * 0.05f64.powi(2) / (1e-10 * gnd);
        for rho0 in [
            DensityMatrix::level1(),
            DensityMatrix::dark(c64(1.0, 0.0)),
            gibbs_state(dyn1.params(), 0.0),
        ] {
            let out = dyn1.evolve(&rho0, t_final).unwrap();
            assert!(
                trace_distance(&out, &gibbs) <= 1e-3,
                "dist {:.3e}",
                trace_distance(&out, &gibbs)
            );
            let lim = dyn1.final_state_limit(&rho0).unwrap();
            assert!(trace_distance(&lim, &gibbs) < 1e-14);
        }
    }

    #[test]
    fn heisenberg_composition_and_duality() {
        let dyn1 = standard(1e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        // α_0(A) = A
        let a = CMat::<3>::from_fn(|i, j| c64(0.1 * (i + 1) as f64, 0.05 * j as f64));
        assert!(dyn1.heisenberg(&a, 0.0).sub(&a).max_norm() < 1e-10);
        // composition and duality on random data
        for seed in 0..3 {
            let a = CMat::<3>::from_fn(|i, j| {
                c64(
                    ((i * 3 + j + seed) as f64 * 0.37).sin(),
                    ((i + 2 * j + seed) as f64 * 0.53).cos() * 0.2,
                )
            });
            for &(t, s) in &[(10.0, 25.0), (400.0, 1200.0)] {
                let once = dyn1.heisenberg(&a, t + s);
                let twice = dyn1.heisenberg(&dyn1.heisenberg(&a, s), t);
                assert!(once.sub(&twice).max_norm() < 1e-10);
            }
            let rho = random_density(&mut rng);
            let t = 800.0;
            let lhs = dyn1.evolve(&rho, t).unwrap().0.matmul(&a).trace();
            let dressed = dyn1.dress(&a);
            let rhs = rho.0.matmul(&dyn1.heisenberg(&dressed, t)).trace();
            assert!(
                (lhs - rhs).norm() < 1e-10,
                "duality off by {:.3e}",
                (lhs - rhs).norm()
            );
        }
    }

    #[test]
    fn linearity_on_mixtures() {
        let dyn1 = standard(1e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..4 {
            let rho_a = random_density(&mut rng);
            let rho_b = random_density(&mut rng);
            let w = 0.3;
            let mix = DensityMatrix::from_evolution(
                rho_a
                    .0
                    .scale(c64(w, 0.0))
                    .add(&rho_b.0.scale(c64(1.0 - w, 0.0))),
            );
            for &t in &[0.0, 50.0, 2000.0] {
                let lhs = dyn1.evolve(&mix, t).unwrap();
                let ra = dyn1.evolve(&rho_a, t).unwrap();
                let rb = dyn1.evolve(&rho_b, t).unwrap();
                let rhs = ra.0.scale(c64(w, 0.0)).add(&rb.0.scale(c64(1.0 - w, 0.0)));
                assert!(lhs.0.sub(&rhs).max_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn conservation_contracts() {
        // σ = 0: trace exact to 1e-12, Hermiticity deviation ≤ 1e-10
        let dyn0 = standard(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rho0 = random_density(&mut rng);
        for &t in &[0.0, 10.0, 400.0, 1e5] {
            let ev = dyn0.evolve_detailed(&rho0, t).unwrap();
            assert!(
                ev.trace_deviation <= 1e-12,
                "t={t}: {:.3e}",
                ev.trace_deviation
            );
            assert!(ev.hermiticity_deviation <= 1e-10);
        }
        // σ > 0: the trace deviation scales linearly in σ
        let rho_asym = DensityMatrix::donor(0.2, Some((0.5, 0.3))).unwrap();
        let dev = |sigma: f64| -> f64 {
            let d = standard(sigma);
            let mut worst = 0.0f64;
            for &t in &[0.0, 100.0, 10_000.0] {
                worst = worst.max(d.evolve_detailed(&rho_asym, t).unwrap().trace_deviation);
            }
            worst
        };
        let d1 = dev(1e-5);
        let d2 = dev(5e-6);
        let ratio = d1 / d2;
        assert!(
            (ratio - 2.0).abs() < 0.2,
            "trace deviation ratio {ratio} (d1={d1:.3e}, d2={d2:.3e})"
        );
    }

    #[test]
    fn trajectory_channels_and_two_timescales() {
        let dyn1 = standard(1e-5);
        let grid = TimeGrid::Explicit(vec![0.01, 1.0, 100.0, 10_515.0, 1.25e6, 1.2e9]);
        let traj = dyn1.trajectory(&DensityMatrix::level1(), &grid).unwrap();
        // plateau: the σ-exact slow projection sits an O(σ)-sized distance
        // (≈ 0.38·σ/λ² = 150·σ here) from the σ → 0 formula state, and far
        // from Gibbs
        assert!(
            traj.dist_qstat[3] <= 155.0 * 1e-5 && traj.dist_qstat[3] >= 100.0 * 1e-5,
            "qstat {:.3e}",
            traj.dist_qstat[3]
        );
        assert!(traj.dist_gibbs[3] >= 0.05);
        assert!(traj.dist_gibbs[4] >= 0.01); // plateau persists
        assert!(traj.dist_gibbs[5] <= 1e-3); // final decay done
        // σ = 0: distance to the final formula decays, Gibbs distance stays
        let dyn0 = standard(0.0);
        let grid = TimeGrid::Explicit(vec![1.0, 4000.0, 40_000.0]);
        let traj0 = dyn0.trajectory(&DensityMatrix::level1(), &grid).unwrap();
        assert!(traj0.dist_final[2] < 1e-6);
        let gibbs0 = gibbs_state(dyn0.params(), 0.0);
        let f = final_state_formula(&DensityMatrix::level1(), 1.0, 1.0);
        let plateau = trace_distance(&f, &gibbs0);
        assert!(plateau > 0.05);
        assert!((traj0.dist_gibbs[2] - plateau).abs() < 1e-6);
        // single-point grid at t = 0 returns ρ0 (U(0) = Id; X_σ cancels in
        // the diagonal round trip only at σ = 0, so allow the σ contract)
        let grid = TimeGrid::Explicit(vec![0.0]);
        let traj = dyn1.trajectory(&DensityMatrix::level1(), &grid).unwrap();
        let d0 = trace_distance(&traj.states[0], &DensityMatrix::level1());
        assert!(d0 <= 2.0 * (1e-5 + 0.0025));
    }

    #[test]
    fn decay_rate_fits() {
        // synthetic single-exponential channel
        let times: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let dist: Vec<f64> = times.iter().map(|t| (-3.0 * t).exp()).collect();
        let traj = Trajectory {
            times: times.clone(),
            states: Vec::new(),
            dist_gibbs: dist.clone(),
            dist_qstat: dist.clone(),
            dist_final: dist,
            p_donor: Vec::new(),
            min_eig: Vec::new(),
            trace_dev: Vec::new(),
            herm_dev: Vec::new(),
            warnings: Vec::new(),
        };
        let rate = fit_decay_rate(&traj, DistanceChannel::Gibbs, (0.0, 5.0)).unwrap();
        assert!((rate - 3.0).abs() < 1e-10);
        // errors: too few points in the window
        assert!(fit_decay_rate(&traj, DistanceChannel::Gibbs, (0.0, 0.2)).is_err());

        // slow tail of the real dynamics ≈ Im ε0^{(2)}
        let dyn1 = standard(1e-5);
        let im_slow = dyn1.resonances().get(Sector::Zero, 2).unwrap().energy.im;
        let t_lo = 30.0 / (dyn1.constants().delta * 0.0025);
        let t_hi = 2.0 / im_slow;
        let grid = TimeGrid::Geometric {
            t_min: t_lo,
            t_max: t_hi,
            points: 40,
        };
        let traj = dyn1.trajectory(&DensityMatrix::level1(), &grid).unwrap();
        let rate = fit_decay_rate(&traj, DistanceChannel::Gibbs, (t_lo, t_hi)).unwrap();
        assert!(
            (rate - im_slow).abs() <= 0.1 * im_slow,
            "rate {rate:.3e} vs Im ε {im_slow:.3e}"
        );
        // early window: multi-exponential, rate within 25% of λ²·γ_deg
        let dyn0 = standard(0.0);
        let l2 = 0.0025;
        let fast = l2 * dyn0.resonances().gamma_deg_exact(0.05);
        let grid = TimeGrid::Geometric {
            t_min: 1.0 / fast,
            t_max: 4.0 / fast,
            points: 24,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho0 = random_density(&mut rng);
        let traj = dyn0.trajectory(&rho0, &grid).unwrap();
        let rate =
            fit_decay_rate(&traj, DistanceChannel::Final, (1.0 / fast, 4.0 / fast)).unwrap();
        assert!(
            (rate - fast).abs() <= 0.25 * fast,
            "early rate {rate:.3e} vs λ²γ_deg {fast:.3e}"
        );
    }

    #[test]
    fn donor_probability_values() {
        let ebd = 1.0f64.exp();
        // σ = 0: p_D(∞) = (1+p_D(0))/(2(1+e^{βΔ}))
        let dyn0 = standard(0.0);
        let t_inf = 200.0 / (dyn0.constants().delta * 0.0025);
        for p0 in [0.0, 0.4, 1.0] {
            let p_inf = dyn0.donor_probability(p0, None, t_inf).unwrap();
            let expected = (1.0 + p0) / (2.0 * (1.0 + ebd));
            assert!((p_inf - expected).abs() < 1e-6, "p0={p0}");
        }
        // σ > 0: p_D(∞) = (1+2e^{βΔ})^{-1}
        let dyn1 = standard(1e-5);
        let gnd = dyn1.resonances().gamma_nd_exact(1e-5, 0.05).unwrap();
        let t_inf = 20.0 * 0.0025 / (1e-10 * gnd);
        let p_inf = dyn1.donor_probability(1.0, None, t_inf).unwrap();
        assert!((p_inf - 1.0 / (1.0 + 2.0 * ebd)).abs() < 1e-3);
        // t = 0 reproduces the initial value within the contract
        let p = dyn1.donor_probability(0.7, None, 0.0).unwrap();
        assert!((p - 0.7).abs() <= 2.0 * (1e-5 + 0.0025));
    }

    #[test]
    fn observation_curve_matches_evolution() {
        let dyn1 = standard(1e-5);
        let ebd = 1.0f64.exp();
        // limits
        let late = dyn1.observation_curve(1e12);
        assert!((late.value - 1.0 / (1.0 + 2.0 * ebd)).abs() < 1e-9);
        let early = dyn1.observation_curve(5.0 / 0.0025);
        assert!((early.value - dyn1.p_quasi_stationary()).abs() < 1e-3);
        assert!(early.within_validity);
        assert!(!dyn1.observation_curve(1.0).within_validity);
        // agreement with the evolved population across the window
        let tol = 2.0 * (1e-5 + 0.0025);
        for &t in &[2000.0, 20_000.0, 2e5, 5e6] {
            let formula = dyn1.observation_curve(t).value;
            let evolved = dyn1.donor_probability(1.0, None, t).unwrap();
            assert!(
                (formula - evolved).abs() <= tol,
                "t={t}: formula {formula} vs evolved {evolved}"
            );
        }
    }

    #[test]
    fn timescale_report_values() {
        let dyn1 = standard(1e-5);
        let rep = dyn1.timescale_report();
        assert!((rep.t1 - 400.0).abs() < 1e-9);
        assert!((rep.t2 - 2.5e7).abs() < 1e-2);
        assert!((rep.ratio - 62_500.0).abs() < 1e-6);
        assert!(rep.regime_ok);
        assert!(rep.rate_fast > 0.0 && rep.rate_slow > 0.0);
        let rep0 = standard(0.0).timescale_report();
        assert!(rep0.t2.is_infinite());
        assert!(rep0.ratio.is_infinite());
    }
}
