//! Built-in validation suite.
//!
//! Ten numbered criteria cover the quadrature oracles, the eigenvalue
//! oracle, propagator algebra, stationarity, final states, the two-timescale
//! structure, donor/observation values, conservation contracts and the
//! correlation closed forms. Every tolerance is pinned here. The acceptance
//! integration test runs the suite at the standard operating point; the CLI
//! `validate` command runs it for an arbitrary configuration, skipping the
//! σ-dependent criteria when the configured parameters fall outside the
//! operating regime.

use crate::dynamics::{fit_decay_rate, DistanceChannel, Dynamics, TimeGrid};
use crate::linalg::{c64, CMat};
use crate::reservoir::{self, CutoffExponent, FormFactor, ReservoirConstants};
use crate::resonance::{
    self, build_lambda0, eigensolve_small, perturbative_energies, ResonanceSet, Sector,
};
use crate::system::{
    final_state_formula, gibbs_state, manifold_state, quasi_stationary_state, trace_distance,
    DensityMatrix, SystemParams,
};
use crate::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Result of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub outcome: Outcome,
    pub details: String,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Passed,
    Failed,
    Skipped(String),
}

impl Criterion {
    /// Skipped criteria do not count as failures.
    pub fn is_failure(&self) -> bool {
        self.outcome == Outcome::Failed
    }

    pub fn status_str(&self) -> &'static str {
        match self.outcome {
            Outcome::Passed => "PASS",
            Outcome::Failed => "FAIL",
            Outcome::Skipped(_) => "SKIP",
        }
    }
}

/// The standard operating point used throughout the analysis:
/// β = 1, Δ = 1 (E0 = 1, E = 0), λ = 0.05, σ = 1e-5, bath amplitude 0.3,
/// p = -1/2, m = 1, ϰ0 = 1, W = 4π.
pub fn standard_setup() -> (SystemParams, FormFactor) {
    let params = SystemParams {
        e0: 1.0,
        e: 0.0,
        sigma: 1e-5,
        beta: 1.0,
        lambda: 0.05,
        gamma_coupling: c64(1.0, 0.0),
    };
    let ff = FormFactor::isotropic(0.3, 0, CutoffExponent::Exponential, 1.0)
        .expect("standard form factor is valid");
    (params, ff)
}

struct Ctx {
    params: SystemParams,
    ff: FormFactor,
    constants: ReservoirConstants,
}

fn check(
    id: usize,
    name: &'static str,
    body: impl FnOnce(&mut Vec<String>) -> Result<bool>,
) -> Criterion {
    let start = Instant::now();
    let mut notes = Vec::new();
    let outcome = match body(&mut notes) {
        Ok(true) => Outcome::Passed,
        Ok(false) => Outcome::Failed,
        Err(e) => {
            notes.push(format!("error: {e}"));
            Outcome::Failed
        }
    };
    Criterion {
        id,
        name,
        outcome,
        details: notes.join("; "),
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn skip(id: usize, name: &'static str, reason: String) -> Criterion {
    Criterion {
        id,
        name,
        outcome: Outcome::Skipped(reason),
        details: String::new(),
        runtime_ms: 0.0,
    }
}

/// Run all criteria for the given parameter point. σ-dependent criteria are
/// skipped (and reported as skipped) when σ = 0 or the regime σ < λ² < Δ is
/// violated.
pub fn run_all(params: &SystemParams, ff: &FormFactor) -> Result<Vec<Criterion>> {
    params.validate()?;
    let constants = ReservoirConstants::compute(ff, params.beta, params.gap())?;
    let ctx = Ctx {
        params: *params,
        ff: *ff,
        constants,
    };
    let sigma_ok = params.sigma > 0.0 && params.regime_ok();
    let skip_reason = || {
        if params.sigma == 0.0 {
            "σ = 0: criterion needs a non-degenerate splitting".to_string()
        } else {
            format!(
                "regime σ < λ² < Δ violated (σ={}, λ²={}, Δ={})",
                params.sigma,
                params.lambda * params.lambda,
                params.gap()
            )
        }
    };

    let mut out = Vec::with_capacity(10);
    out.push(criterion_1(&ctx));
    out.push(criterion_2(&ctx));
    out.push(criterion_3(&ctx));
    out.push(criterion_4(&ctx));
    out.push(criterion_5(&ctx));
    for (id, name, f) in [
        (
            6usize,
            "unique equilibrium and slow rate",
            criterion_6 as fn(&Ctx) -> Criterion,
        ),
        (7, "two-timescale structure", criterion_7),
        (8, "donor and observation values", criterion_8),
        (9, "conservation contracts", criterion_9),
    ] {
        if sigma_ok {
            out.push(f(&ctx));
        } else {
            out.push(skip(id, name, skip_reason()));
        }
    }
    out.push(criterion_10(&ctx));
    Ok(out)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn criterion_1(ctx: &Ctx) -> Criterion {
    check(1, "quadrature oracle", |notes| {
        let mut ok = true;
        // spectral density: sphere-quadrature path vs closed form at 20
        // frequencies in (0, 5ϰ0]
        let mut worst = 0.0f64;
        for k in 1..=20 {
            let omega = 5.0 * ctx.ff.kappa0 * k as f64 / 20.0;
            let closed = reservoir::spectral_density(&ctx.ff, omega)?;
            let quad = reservoir::spectral_density_sphere_quadrature(&ctx.ff, omega)?;
            worst = worst.max(rel_err(quad, closed));
        }
        notes.push(format!("J quadrature rel err {worst:.2e} (≤ 1e-6)"));
        ok &= worst <= 1e-6;
        // J̃(0) against ½πWA²
        let jt0 = reservoir::spectral_slope_at_zero(&ctx.ff);
        let closed = 0.5 * std::f64::consts::PI * ctx.ff.angular_weight * ctx.ff.amplitude.powi(2);
        let e = rel_err(jt0, closed);
        notes.push(format!("J̃(0) rel err {e:.2e} (≤ 1e-8)"));
        ok &= e <= 1e-8;
        // Re η against the closed family value ½WA²ϰ0
        let eta = reservoir::eta_constant(&ctx.ff, ctx.params.beta)?;
        let closed = 0.5 * ctx.ff.angular_weight * ctx.ff.amplitude.powi(2) * ctx.ff.kappa0;
        let e = rel_err(eta.re, closed);
        notes.push(format!("Re η rel err {e:.2e} (≤ 1e-8)"));
        ok &= e <= 1e-8;
        Ok(ok)
    })
}

fn criterion_2(ctx: &Ctx) -> Criterion {
    check(2, "eigenvalue oracle", |notes| {
        let sigmas = [1e-5, 1e-6, 1e-7];
        let l2 = ctx.params.lambda * ctx.params.lambda;
        if l2 <= 100.0 * sigmas[0] {
            notes.push("λ² too small for the pinned σ ladder".into());
            return Ok(false);
        }
        let mut ok = true;
        // relative error of the slow eigenvalue vs the printed formula,
        // slope 2 in σ
        let mut ln_err = Vec::new();
        let mut err_at_1em6 = f64::NAN;
        for &sigma in &sigmas {
            let p = SystemParams {
                sigma,
                ..ctx.params
            };
            let set = ResonanceSet::compute(&p, &ctx.constants)?;
            let pert = perturbative_energies(&p, &ctx.constants);
            let slow = set.get(Sector::Zero, 2).unwrap();
            let rel = (slow.energy - pert.sector0[1]).norm() / slow.energy.norm();
            if sigma == 1e-6 {
                err_at_1em6 = rel;
            }
            ln_err.push(rel.ln());
        }
        let xs: Vec<f64> = sigmas.iter().map(|s: &f64| s.ln()).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ln_err.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ln_err).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        notes.push(format!("slow-mode error slope {slope:.3} (2 ± 0.3)"));
        ok &= (slope - 2.0).abs() <= 0.3;
        notes.push(format!("rel err at σ=1e-6: {err_at_1em6:.2e} (≤ 1e-2)"));
        ok &= err_at_1em6 <= 1e-2;

        // σ = 0 spectra against the closed sets, rel 1e-10
        let p0 = SystemParams {
            sigma: 0.0,
            ..ctx.params
        };
        let m0 = build_lambda0(&p0, &ctx.constants);
        let pairs = eigensolve_small(&m0)?;
        let pert0 = perturbative_energies(&p0, &ctx.constants);
        let mut worst = 0.0f64;
        let mut used = vec![false; pairs.len()];
        for target in pert0.sector0 {
            let (idx, best) = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, p)| (i, (p.value - target).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            used[idx] = true;
            if target.norm() == 0.0 {
                // the exact zeros must come out exact
                if pairs[idx].value != c64(0.0, 0.0) {
                    ok = false;
                    notes.push("zero eigenvalue not exactly zero".into());
                }
            } else {
                worst = worst.max(best / target.norm());
            }
        }
        let ops = resonance::LevelShiftOperators::build(&p0, &ctx.constants);
        for (matrix_eigs, targets) in [
            (eigensolve_small(&ops.lambda_plus)?, pert0.sector_plus),
            (eigensolve_small(&ops.lambda_minus)?, pert0.sector_minus),
        ] {
            for target in targets {
                let best = matrix_eigs
                    .iter()
                    .map(|p| (p.value - target).norm())
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best / target.norm());
            }
        }
        notes.push(format!("σ=0 spectrum rel err {worst:.2e} (≤ 1e-10)"));
        ok &= worst <= 1e-10;
        Ok(ok)
    })
}

fn criterion_3(ctx: &Ctx) -> Criterion {
    check(3, "propagator algebra", |notes| {
        let dynamics = Dynamics::with_constants(ctx.params, ctx.ff, ctx.constants)?;
        let u0 = dynamics.propagator().u_at(0.0);
        let dev0 = u0.deviation_from_identity();
        notes.push(format!("‖U(0) − Id‖ = {dev0:.2e} (≤ 1e-10)"));
        let mut ok = dev0 <= 1e-10;
        // 5×5 grid of integer times spanning both timescales so that the
        // sums t+s are exact in floating point
        let t1 = 1.0 / (ctx.params.lambda * ctx.params.lambda);
        let t2 = if ctx.params.sigma > 0.0 {
            (ctx.params.lambda * ctx.params.lambda) / (ctx.params.sigma * ctx.params.sigma)
        } else {
            1e4 * t1
        };
        let times: Vec<f64> = (0..5)
            .map(|k| {
                let raw = 0.015625 * t1 * (t2 / t1).powf(k as f64 / 4.0) * 64.0;
                raw.max(1.0).round()
            })
            .collect();
        let mut worst = 0.0f64;
        for &t in &times {
            for &s in &times {
                let lhs = dynamics.propagator().u_at(t + s);
                let rhs = dynamics
                    .propagator()
                    .u_at(t)
                    .matmul(&dynamics.propagator().u_at(s));
                worst = worst.max(lhs.sub(&rhs).max_norm());
            }
        }
        notes.push(format!("max ‖U(t+s) − U(t)U(s)‖ = {worst:.2e} (≤ 1e-10)"));
        ok &= worst <= 1e-10;
        Ok(ok)
    })
}

fn criterion_4(ctx: &Ctx) -> Criterion {
    check(4, "stationarity of the invariant manifold (σ = 0)", |notes| {
        let p0 = SystemParams {
            sigma: 0.0,
            ..ctx.params
        };
        let dynamics = Dynamics::with_constants(p0, ctx.ff, ctx.constants)?;
        let l2 = p0.lambda * p0.lambda;
        let p_max = 1.0 / ((p0.beta * p0.gap()).exp() + 1.0);
        let mut worst = 0.0f64;
        for k in 0..10 {
            let p = p_max * (k as f64 + 0.5) / 10.0;
            let rho = manifold_state(p, p0.beta, p0.gap())?;
            for mult in [1.0, 10.0, 100.0] {
                let t = mult / l2;
                let evolved = dynamics.evolve(&rho, t)?;
                worst = worst.max(trace_distance(&evolved, &rho));
            }
        }
        notes.push(format!("max ‖T_t(ρ(p)) − ρ(p)‖₁ = {worst:.2e} (≤ 1e-9)"));
        Ok(worst <= 1e-9)
    })
}

fn criterion_5(ctx: &Ctx) -> Criterion {
    check(5, "final state formula (σ = 0)", |notes| {
        let p0 = SystemParams {
            sigma: 0.0,
            ..ctx.params
        };
        let dynamics = Dynamics::with_constants(p0, ctx.ff, ctx.constants)?;
        let t = 200.0 / (p0.lambda * p0.lambda * ctx.constants.delta);
        let mut rng = ChaCha8Rng::seed_from_u64(2025);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let rho0 = random_density(&mut rng);
            let evolved = dynamics.evolve(&rho0, t)?;
            let formula = final_state_formula(&rho0, p0.beta, p0.gap());
            worst = worst.max(trace_distance(&evolved, &formula));
        }
        notes.push(format!(
            "max ‖T_t(ρ0) − final formula‖₁ = {worst:.2e} at t = {t:.3e} (≤ 1e-6)"
        ));
        Ok(worst <= 1e-6)
    })
}

fn criterion_6(ctx: &Ctx) -> Criterion {
    check(6, "unique equilibrium and slow rate", |notes| {
        let dynamics = Dynamics::with_constants(ctx.params, ctx.ff, ctx.constants)?;
        let sigma = ctx.params.sigma;
        let l2 = ctx.params.lambda * ctx.params.lambda;
        let gnd_formula = resonance::gamma_nd(&ctx.constants).exact;
        let im_slow = dynamics
            .resonances()
            .get(Sector::Zero, 2)
            .unwrap()
            .energy
            .im;
        let t_final = 20.0 * l2 / (sigma * sigma * gnd_formula);
        let gibbs = gibbs_state(&ctx.params, sigma);
        let mut worst = 0.0f64;
        for rho0 in [
            DensityMatrix::level1(),
            DensityMatrix::dark(ctx.params.gamma_coupling),
            gibbs_state(&ctx.params, 0.0),
        ] {
            let evolved = dynamics.evolve(&rho0, t_final)?;
            worst = worst.max(trace_distance(&evolved, &gibbs));
        }
        notes.push(format!(
            "max ‖T_t(ρ0) − ρ_gibbs‖₁ = {worst:.2e} at t = 20λ²/(σ²γ_nd) (≤ 1e-3)"
        ));
        let mut ok = worst <= 1e-3;

        // fitted slow rate on the single-exponential tail
        let t_lo = 30.0 / (l2 * ctx.constants.delta);
        let t_hi = 2.0 / im_slow;
        let grid = TimeGrid::Geometric {
            t_min: t_lo,
            t_max: t_hi,
            points: 40,
        };
        let traj = dynamics.trajectory(&DensityMatrix::level1(), &grid)?;
        let rate = fit_decay_rate(&traj, DistanceChannel::Gibbs, (t_lo, t_hi))?;
        let dev_numeric = rel_err(rate, im_slow);
        let dev_formula = rel_err(rate, gnd_formula * sigma * sigma / l2);
        notes.push(format!(
            "fitted rate {rate:.4e}: vs numeric Im ε {dev_numeric:.2e} (≤ 0.1), \
             vs closed form {dev_formula:.2e} (≤ 0.2)"
        ));
        ok &= dev_numeric <= 0.1 && dev_formula <= 0.2;
        Ok(ok)
    })
}

fn criterion_7(ctx: &Ctx) -> Criterion {
    check(7, "two-timescale structure", |notes| {
        let dynamics = Dynamics::with_constants(ctx.params, ctx.ff, ctx.constants)?;
        let sigma = ctx.params.sigma;
        let l2 = ctx.params.lambda * ctx.params.lambda;
        let rho0 = DensityMatrix::level1();
        let qstat = quasi_stationary_state(&rho0, ctx.params.beta, ctx.params.gap());
        let gibbs = gibbs_state(&ctx.params, sigma);

        let t_plateau = 20.0 / (l2 * ctx.constants.delta);
        let at_plateau = dynamics.evolve(&rho0, t_plateau)?;
        let d_qstat = trace_distance(&at_plateau, &qstat);
        let d_gibbs = trace_distance(&at_plateau, &gibbs);
        notes.push(format!(
            "at t = 20/(λ²δ): dist_qstat = {d_qstat:.3e} (≤ 1e-3), dist_gibbs = {d_gibbs:.3e} (≥ 0.05)"
        ));
        let mut ok = d_qstat <= 1e-3;
        if !ok {
            notes.push(format!(
                "plateau offset is the O(σ) vicinity of the σ-exact slow projection \
                 (≈ 0.38·σ/λ² = {:.3e} here), irreducible for the σ-exact propagator",
                0.38 * sigma / l2
            ));
        }
        ok &= d_gibbs >= 0.05;

        let t_persist = 0.05 * l2 / (sigma * sigma);
        let later = dynamics.evolve(&rho0, t_persist)?;
        let d_persist = trace_distance(&later, &gibbs);
        notes.push(format!(
            "at t = 0.05λ²/σ²: dist_gibbs = {d_persist:.3e} (≥ 0.01)"
        ));
        ok &= d_persist >= 0.01;

        // runtime guard: the full default trajectory must stay cheap
        let start = Instant::now();
        let traj = dynamics.trajectory(&rho0, &dynamics.default_grid())?;
        let secs = start.elapsed().as_secs_f64();
        notes.push(format!(
            "full {}-point trajectory in {secs:.2} s (< 60 s)",
            traj.times.len()
        ));
        ok &= secs < 60.0;
        Ok(ok)
    })
}

fn criterion_8(ctx: &Ctx) -> Criterion {
    check(8, "donor and observation values", |notes| {
        let mut ok = true;
        let ebd = (ctx.params.beta * ctx.params.gap()).exp();
        let l2 = ctx.params.lambda * ctx.params.lambda;
        // σ = 0 donor limit for three initial donor populations
        let p0 = SystemParams {
            sigma: 0.0,
            ..ctx.params
        };
        let dyn0 = Dynamics::with_constants(p0, ctx.ff, ctx.constants)?;
        let t_inf = 200.0 / (l2 * ctx.constants.delta);
        let mut worst = 0.0f64;
        for pd in [0.0, 0.5, 1.0] {
            let p_final = dyn0.donor_probability(pd, None, t_inf)?;
            let expected = (1.0 + pd) / (2.0 * (1.0 + ebd));
            worst = worst.max((p_final - expected).abs());
        }
        notes.push(format!("σ=0 donor limit dev {worst:.2e} (≤ 1e-6)"));
        ok &= worst <= 1e-6;

        // σ > 0 donor limit
        let dynamics = Dynamics::with_constants(ctx.params, ctx.ff, ctx.constants)?;
        let gnd = resonance::gamma_nd(&ctx.constants).exact;
        let sigma = ctx.params.sigma;
        let t_inf = 20.0 * l2 / (sigma * sigma * gnd);
        let p_final = dynamics.donor_probability(1.0, None, t_inf)?;
        let dev = (p_final - 1.0 / (1.0 + 2.0 * ebd)).abs();
        notes.push(format!("σ>0 donor limit dev {dev:.2e} (≤ 1e-3)"));
        ok &= dev <= 1e-3;

        // observation formula vs the evolved population over its window
        let tol = 2.0 * (sigma + l2);
        let t_lo = 5.0 / l2;
        let t_hi = 0.2 * l2 / (sigma * sigma);
        let mut worst = 0.0f64;
        for k in 0..=5 {
            let t = t_lo * (t_hi / t_lo).powf(k as f64 / 5.0);
            let formula = dynamics.observation_curve(t).value;
            let evolved = dynamics.donor_probability(1.0, None, t)?;
            worst = worst.max((formula - evolved).abs());
        }
        notes.push(format!(
            "observation curve dev {worst:.2e} over the window (≤ {tol:.2e})"
        ));
        ok &= worst <= tol;
        // plateau value at the window start
        let plateau_dev =
            (dynamics.observation_curve(t_lo).value - dynamics.p_quasi_stationary()).abs();
        notes.push(format!("p_qstat plateau dev {plateau_dev:.2e} (≤ {tol:.2e})"));
        ok &= plateau_dev <= tol;
        Ok(ok)
    })
}

fn criterion_9(ctx: &Ctx) -> Criterion {
    check(9, "conservation contracts", |notes| {
        let mut ok = true;
        let l2 = ctx.params.lambda * ctx.params.lambda;
        // σ = 0: trace exact to 1e-12 on a grid
        let p0 = SystemParams {
            sigma: 0.0,
            ..ctx.params
        };
        let dyn0 = Dynamics::with_constants(p0, ctx.ff, ctx.constants)?;
        let mut rng = ChaCha8Rng::seed_from_u64(4096);
        let rho0 = random_density(&mut rng);
        let mut worst_trace = 0.0f64;
        let mut worst_herm = 0.0f64;
        for k in 0..12 {
            let t = 0.01 / l2 * (1e4f64).powf(k as f64 / 11.0);
            let ev = dyn0.evolve_detailed(&rho0, t)?;
            worst_trace = worst_trace.max(ev.trace_deviation);
            worst_herm = worst_herm.max(ev.hermiticity_deviation);
        }
        notes.push(format!("σ=0 trace dev {worst_trace:.2e} (≤ 1e-12)"));
        ok &= worst_trace <= 1e-12;
        notes.push(format!("hermiticity dev {worst_herm:.2e} (≤ 1e-10)"));
        ok &= worst_herm <= 1e-10;

        // σ > 0: deviation halves when σ halves
        let rho_asym = DensityMatrix::donor(0.2, Some((0.5, 0.3)))?;
        let max_dev = |sigma: f64| -> Result<f64> {
            let d = Dynamics::with_constants(
                SystemParams {
                    sigma,
                    ..ctx.params
                },
                ctx.ff,
                ctx.constants,
            )?;
            let mut worst = 0.0f64;
            for &t in &[0.0, 1.0 / l2, 25.0 / l2] {
                worst = worst.max(d.evolve_detailed(&rho_asym, t)?.trace_deviation);
            }
            Ok(worst)
        };
        let d_full = max_dev(ctx.params.sigma)?;
        let d_half = max_dev(0.5 * ctx.params.sigma)?;
        let ratio = d_full / d_half;
        notes.push(format!(
            "trace-dev ratio σ/(σ/2) = {ratio:.3} (within [1.8, 2.2])"
        ));
        ok &= (1.8..=2.2).contains(&ratio);
        Ok(ok)
    })
}

fn criterion_10(ctx: &Ctx) -> Criterion {
    check(10, "correlation closed forms", |notes| {
        if ctx.ff.n != 0 || ctx.ff.m != CutoffExponent::Exponential {
            notes.push("closed forms need the p = -1/2, m = 1 family".into());
            return Ok(false);
        }
        let beta = ctx.params.beta;
        let mut ok = true;
        // reconstruct T1 from the full quadrature minus the exact T2 part
        let pref = reservoir::correlation_prefactor(&ctx.ff, beta);
        let scale = (beta * ctx.ff.kappa0).powi(2);
        let mut worst = 0.0f64;
        for &tk in &[0.0, 0.5, 1.0, 2.0] {
            let t = tk / ctx.ff.kappa0;
            let c = reservoir::correlation(&ctx.ff, beta, t)?;
            let t2_exact = reservoir::correlation_t2_quadrature(&ctx.ff, beta, t)?;
            let (t1_closed, _) = reservoir::correlation_closed(&ctx.ff, beta, t)?;
            let rec = c / pref - t2_exact;
            worst = worst.max((rec - t1_closed).abs() / t1_closed.abs().max(0.01 * scale));
        }
        notes.push(format!("T1 reconstruction rel err {worst:.2e} (≤ 1e-4)"));
        ok &= worst <= 1e-4;

        // fitted correlation time across cutoffs
        let mut worst = 0.0f64;
        for &kappa0 in &[0.5, 1.0, 2.0] {
            let ff = FormFactor::new(
                ctx.ff.amplitude,
                0,
                CutoffExponent::Exponential,
                kappa0,
                ctx.ff.angular_weight,
            )?;
            let tau = reservoir::correlation_time(&ff, beta)?;
            worst = worst.max((tau - 1.0 / kappa0).abs() * kappa0);
        }
        notes.push(format!(
            "τ_c rel err {worst:.2e} over ϰ0 ∈ {{0.5,1,2}} (≤ 0.15)"
        ));
        ok &= worst <= 0.15;
        Ok(ok)
    })
}

fn random_density(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let mut rows = [[c64(0.0, 0.0); 3]; 3];
    for row in &mut rows {
        for entry in row {
            *entry = c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let g = CMat::<3>::from_rows(rows);
    let mut m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    m = m.scale(c64(1.0 / tr, 0.0));
    DensityMatrix::new(m).expect("Gram matrix is a valid state")
}
