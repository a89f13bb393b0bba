//! Quadrature building blocks for the bath integrals.
//!
//! All reservoir quantities reduce to one-dimensional radial integrals with
//! an exponential (or Gaussian) cutoff, occasionally with a principal-value
//! pole and occasionally oscillatory. Three primitives cover everything:
//!
//! - composite Gauss–Legendre panels with panel-doubling certification,
//! - the substitution `r = scale·s/(1−s)` for semi-infinite tails,
//! - a symmetric-window fold for principal values: inside `[x0−w, x0+w]`
//!   the pole integrand is rewritten as `(f(x0+x) − f(x0−x))/x`, which is
//!   smooth, and the log terms cancel exactly by symmetry.

use crate::{Error, Result};
use std::sync::OnceLock;

const GL_ORDER: usize = 16;
const MAX_PANELS: usize = 1 << 14;

/// Nodes/weights of the `GL_ORDER`-point Gauss–Legendre rule on [-1, 1],
/// computed once by Newton iteration on the Legendre recurrence.
fn gl_rule() -> &'static [(f64, f64); GL_ORDER] {
    static RULE: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = [(0.0f64, 0.0f64); GL_ORDER];
        for k in 0..n {
            // Tricomi initial guess, then Newton
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out[n - 1 - k] = (x, w);
        }
        out
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss–Legendre over `panels` equal panels of [a, b].
pub fn integrate_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gl_rule();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for &(x, w) in rule.iter() {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// Panel-doubling integration of a smooth integrand on [a, b]; the panel
/// count doubles until two successive refinements agree to `rel_tol`.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(b >= a) {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    // Absolute floor for integrals that vanish by cancellation: rounding in
    // the panel sums is ~1e-16 of the L1 mass, below which refinement noise
    // is indistinguishable from convergence.
    let l1_scale = integrate_panels(&|x| f(x).abs(), a, b, 8);
    let floor = 1e-15 * l1_scale + 1e-300;
    let mut panels = 1usize;
    let mut prev = integrate_panels(f, a, b, panels);
    loop {
        panels *= 2;
        let cur = integrate_panels(f, a, b, panels);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(prev.abs()) + floor {
            return Ok(cur);
        }
        if panels >= MAX_PANELS {
            return Err(Error::Numeric(format!(
                "quadrature on [{a}, {b}] did not converge: {panels} panels, last delta {:.3e}",
                (cur - prev).abs()
            )));
        }
        prev = cur;
    }
}

/// ∫_lo^∞ f, via r = lo + scale·s/(1−s). Requires f to decay fast enough
/// (all bath integrands carry an exponential cutoff).
pub fn integrate_semi_infinite(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<f64> {
    let scale = scale.max(1e-12);
    let g = move |s: f64| {
        let om = 1.0 - s;
        let r = lo + scale * s / om;
        let jac = scale / (om * om);
        let v = f(r);
        if v == 0.0 {
            0.0
        } else {
            v * jac
        }
    };
    integrate_adaptive(&g, 0.0, 1.0, rel_tol)
}

/// Principal value ∫_0^∞ f(r)/(r − pole) dr with 0 < window < pole.
///
/// Pieces: [0, pole−w] and [pole+w, ∞) are pole-free; on the symmetric
/// window the fold (f(pole+x) − f(pole−x))/x is smooth (→ 2 f'(pole)).
pub fn integrate_principal_value(
    f: &dyn Fn(f64) -> f64,
    pole: f64,
    window: f64,
    tail_scale: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(pole > 0.0) || !(window > 0.0) || window >= pole {
        return Err(Error::Domain(format!(
            "principal value window must satisfy 0 < w < pole (w={window}, pole={pole})"
        )));
    }
    let left = integrate_adaptive(&|r| f(r) / (r - pole), 0.0, pole - window, rel_tol)?;
    let fold = integrate_adaptive(&|x| (f(pole + x) - f(pole - x)) / x, 0.0, window, rel_tol)?;
    let right = integrate_semi_infinite(
        &|r| f(r) / (r - pole),
        pole + window,
        tail_scale,
        rel_tol,
    )?;
    Ok(left + fold + right)
}

/// ∫_0^{u_max} g(u)·cos(u t) du on a fixed grid with at least 40 nodes per
/// oscillation period 2π/t, certified by one panel doubling.
///
/// Errors out when the required panel count exceeds the budget, reporting
/// the largest t the budget supports.
pub fn integrate_oscillatory_cos(
    g: &dyn Fn(f64) -> f64,
    t: f64,
    u_max: f64,
    rel_tol: f64,
) -> Result<f64> {
    let t = t.abs();
    // quarter-period panels => 64 Gauss nodes per period
    let h_osc = if t > 0.0 {
        0.25 * (2.0 * std::f64::consts::PI / t)
    } else {
        f64::INFINITY
    };
    let h = h_osc.min(u_max / 8.0);
    let panels = (u_max / h).ceil() as usize;
    const BUDGET: usize = 200_000;
    if panels > BUDGET {
        let t_max = 0.25 * 2.0 * std::f64::consts::PI * BUDGET as f64 / u_max;
        return Err(Error::Numeric(format!(
            "oscillation budget exceeded at t={t}: max supported t ≈ {t_max:.3e} for this integrand"
        )));
    }
    let f = move |u: f64| g(u) * (u * t).cos();
    let coarse = integrate_panels(&f, 0.0, u_max, panels);
    let fine = integrate_panels(&f, 0.0, u_max, panels * 2);
    let scale_hint = integrate_panels(&|u| g(u).abs(), 0.0, u_max, panels.min(64));
    if (fine - coarse).abs() > rel_tol * fine.abs().max(1e-13 * scale_hint) + 1e-300 {
        return Err(Error::Numeric(format!(
            "oscillatory quadrature at t={t} failed to certify: delta {:.3e}",
            (fine - coarse).abs()
        )));
    }
    Ok(fine)
}
