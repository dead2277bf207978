//! Singular-integral quadrature for the 1-D fractional Laplacian on the
//! power test function `w_p(x) = (x ∨ 0)^p`, and for the cylindrical
//! operator applied to powers of the distance to a hyperplane.
//!
//! For 0 < p < α the operator acts as a pure power,
//! `(Δ^{α/2} w_p)(x) = C(p,α) x^{p-α}`, with
//! `C(p,α) = (p C_{1,α}/α) ∫_0^∞ t^{-α} [(1+t)^{p-1} - (1+t)^{α-p-1}] dt`,
//! which is positive for p ∈ (α/2, α), zero at p = α/2 (the integrand
//! vanishes identically) and negative for p ∈ (0, α/2).
//!
//! Two independent evaluation routes are kept: the reduced integral above
//! and the direct principal-value quadrature of the second-difference form.
//! Both treat the t→0 singularity by a three-term series on [0, 1e-3] and
//! the slowly-decaying tail by a three-term asymptotic remainder added at
//! the cutoff T = 1e6 (the tail decays only like t^{-1-p}, so truncating
//! without the remainder loses O(T^{-p}/p), which is huge for small p).

use crate::quad;
use crate::stable::c1_alpha;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FracLapError {
    #[error("quadrature did not converge for p={p}, alpha={alpha}")]
    QuadratureNonConvergence { p: f64, alpha: f64 },
    #[error("need 0 < p < alpha < 2, got p={p}, alpha={alpha}")]
    BadExponents { p: f64, alpha: f64 },
    #[error("point is on or below the hyperplane (Phi(x) = {0})")]
    PointBelowHyperplane(f64),
    #[error("hyperplane normal must be nonzero")]
    ZeroNormal,
}

fn check_exponents(p: f64, alpha: f64) -> Result<(), FracLapError> {
    if !(p > 0.0 && p < alpha && alpha < 2.0) {
        return Err(FracLapError::BadExponents { p, alpha });
    }
    Ok(())
}

const HEAD: f64 = 1e-3;
const TAIL_CUTOFF: f64 = 1e6;
const BUDGET: usize = 400_000;

/// `C(p,α) = (Δ^{α/2} w_p)(1)` via the reduced integral.
pub fn ctest_constant(p: f64, alpha: f64) -> Result<f64, FracLapError> {
    check_exponents(p, alpha)?;
    let a_exp = p - 1.0; // exponent A in (1+t)^A
    let b_exp = alpha - p - 1.0;
    if (alpha - 2.0 * p).abs() < 1e-15 {
        // integrand is identically zero at p = alpha/2
        return Ok(0.0);
    }
    // head: g(t) = (1+t)^A - (1+t)^B = c1 t + c2 t^2 + c3 t^3 + O(t^4)
    let c1 = a_exp - b_exp;
    let c2 = (a_exp * (a_exp - 1.0) - b_exp * (b_exp - 1.0)) / 2.0;
    let c3 = (a_exp * (a_exp - 1.0) * (a_exp - 2.0) - b_exp * (b_exp - 1.0) * (b_exp - 2.0)) / 6.0;
    let head = c1 * HEAD.powf(2.0 - alpha) / (2.0 - alpha)
        + c2 * HEAD.powf(3.0 - alpha) / (3.0 - alpha)
        + c3 * HEAD.powf(4.0 - alpha) / (4.0 - alpha);

    let f = |t: f64| t.powf(-alpha) * ((1.0 + t).powf(a_exp) - (1.0 + t).powf(b_exp));
    let mid = quad::integrate_segmented(
        &f,
        &[HEAD, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, TAIL_CUTOFF],
        1e-12,
        44,
        BUDGET,
    );
    if !mid.converged {
        return Err(FracLapError::QuadratureNonConvergence { p, alpha });
    }

    // tails: (1+t)^A t^{-α} ≈ t^{A-α} (1 + A/t + A(A-1)/2t²)
    let t_ = TAIL_CUTOFF;
    let tail1 = t_.powf(p - alpha) / (alpha - p)
        + a_exp * t_.powf(p - alpha - 1.0) / (alpha - p + 1.0)
        + a_exp * (a_exp - 1.0) / 2.0 * t_.powf(p - alpha - 2.0) / (alpha - p + 2.0);
    let tail2 = t_.powf(-p) / p
        + b_exp * t_.powf(-p - 1.0) / (p + 1.0)
        + b_exp * (b_exp - 1.0) / 2.0 * t_.powf(-p - 2.0) / (p + 2.0);

    Ok(p * c1_alpha(alpha) / alpha * (head + mid.value + tail1 - tail2))
}

/// `(Δ^{α/2} w_p)(x) = C(p,α) x^{p-α}` for x > 0.
pub fn frac_lap_power(p: f64, alpha: f64, x: f64) -> Result<f64, FracLapError> {
    check_exponents(p, alpha)?;
    assert!(x > 0.0);
    Ok(ctest_constant(p, alpha)? * x.powf(p - alpha))
}

/// Direct second-difference principal-value quadrature of
/// `(Δ^{α/2} w_p)(x) = C_{1,α} ∫_0^∞ [w_p(x+z) + w_p(x-z) - 2 w_p(x)] z^{-1-α} dz`,
/// kept independent of [`ctest_constant`] as its cross-validation oracle.
pub fn frac_lap_power_pv(p: f64, alpha: f64, x: f64) -> Result<f64, FracLapError> {
    check_exponents(p, alpha)?;
    assert!(x > 0.0);
    let w = |s: f64| if s > 0.0 { s.powf(p) } else { 0.0 };
    let f = |z: f64| (w(x + z) + w(x - z) - 2.0 * w(x)) / z.powf(1.0 + alpha);

    // series on [0, eps]: w(x+z)+w(x-z)-2w(x) = 2 Σ_k binom(p,2k) x^{p-2k} z^{2k}.
    // eps is chosen where the series is already exact to ~1e-32 relative but
    // the second difference is still far above f64 cancellation noise.
    let eps = 1e-2 * x;
    let mut head = 0.0;
    let mut binom = 1.0; // running binom(p, m)
    let mut m = 0u32;
    for k in 1..=8 {
        while m < 2 * k {
            binom *= (p - m as f64) / (m as f64 + 1.0);
            m += 1;
        }
        head += 2.0 * binom * x.powf(p - 2.0 * k as f64) * eps.powf(2.0 * k as f64 - alpha)
            / (2.0 * k as f64 - alpha);
    }

    let z_cut = TAIL_CUTOFF * x;
    let mid = quad::integrate_segmented(
        &f,
        &[
            eps,
            0.5 * x,
            x,
            2.0 * x,
            10.0 * x,
            100.0 * x,
            1e3 * x,
            1e4 * x,
            1e5 * x,
            z_cut,
        ],
        1e-12 * x.powf(p - alpha),
        44,
        BUDGET,
    );
    if !mid.converged {
        return Err(FracLapError::QuadratureNonConvergence { p, alpha });
    }

    // tail: (1+z/x)^p ~ asymptotic three terms, minus the constant 2w(x)
    let z = z_cut;
    let tail = x.powf(p)
        * ((z / x).powf(p - alpha) / (alpha - p)
            + p * (z / x).powf(p - 1.0 - alpha) / (alpha + 1.0 - p)
            + p * (p - 1.0) / 2.0 * (z / x).powf(p - 2.0 - alpha) / (alpha + 2.0 - p)
            - 2.0 * (z / x).powf(-alpha) / alpha)
        * x.powf(-alpha);

    Ok(c1_alpha(alpha) * (head + mid.value + tail))
}

/// Hyperplane `Π = {y : (a, y - x0) = 0}` with the upper half-space
/// distance `δ_Π(y) = ((a, y-x0) ∨ 0) / |a|`.
#[derive(Clone, Debug)]
pub struct Hyperplane {
    normal: Vec<f64>,
    base: Vec<f64>,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, base: Vec<f64>) -> Result<Self, FracLapError> {
        assert_eq!(normal.len(), base.len());
        if normal.iter().all(|&a| a == 0.0) {
            return Err(FracLapError::ZeroNormal);
        }
        Ok(Hyperplane { normal, base })
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x.iter().zip(&self.base)).map(|(a, (xi, bi))| a * (xi - bi)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.normal.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// The cylindrical operator applied to `δ_Π^p` at a point above the plane:
/// `(L δ_Π^p)(x) = C(p,α) Φ(x)^{p-α} |a|^{-p} Σ_k |a_k|^α`.
///
/// Per coordinate, `(Δ_k^{α/2} δ_Π^p)(x) = C(p,α) Φ(x)^{p-α} |a_k|^α / |a|^p`,
/// and `Σ_k |a_k|^α / |a|^α ∈ [d^{-α/2}, d]` gives the two-sided comparison
/// with `δ_Π^{p-α}`; at p = α/2 the whole expression vanishes.
pub fn cyl_op_hyperplane(h: &Hyperplane, p: f64, alpha: f64, x: &[f64]) -> Result<f64, FracLapError> {
    check_exponents(p, alpha)?;
    let phi = h.phi(x);
    if phi <= 0.0 {
        return Err(FracLapError::PointBelowHyperplane(phi));
    }
    let c = ctest_constant(p, alpha)?;
    let sum_axes: f64 = h.normal.iter().map(|a| a.abs().powf(alpha)).sum();
    Ok(c * phi.powf(p - alpha) * h.norm().powf(-p) * sum_axes)
}

/// Per-coordinate contribution `(Δ_k^{α/2} δ_Π^p)(x)`, used by the sum
/// identity check.
pub fn cyl_op_hyperplane_coord(
    h: &Hyperplane,
    p: f64,
    alpha: f64,
    x: &[f64],
    k: usize,
) -> Result<f64, FracLapError> {
    check_exponents(p, alpha)?;
    let phi = h.phi(x);
    if phi <= 0.0 {
        return Err(FracLapError::PointBelowHyperplane(phi));
    }
    let c = ctest_constant(p, alpha)?;
    Ok(c * phi.powf(p - alpha) * h.norm().powf(-p) * h.normal[k].abs().powf(alpha))
}
