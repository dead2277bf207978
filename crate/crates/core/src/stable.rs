//! One-dimensional symmetric α-stable marginals and the d-dimensional
//! product kernel of the cylindrical process.
//!
//! The free kernel factorizes over coordinates,
//! `p(t,x,y) = ∏_k p1(t, x_k - y_k)`, and each factor is computed by Fourier
//! inversion `p1(t,0,z) = (1/π) ∫_0^∞ exp(-t u^α) cos(uz) du` after reducing
//! to `t = 1` with the stable scaling `p1(t,z) = t^{-1/α} p1(1, z t^{-1/α})`.

use crate::quad;
use crate::rng::Stream;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StableError {
    #[error("adaptive quadrature did not converge for alpha={alpha}, zeta={zeta}")]
    QuadratureNonConvergence { alpha: f64, zeta: f64 },
    #[error("levy density is singular at a=b={0}")]
    SingularArguments(f64),
    #[error("invalid stability index alpha={0}, must be in (0,2)")]
    BadAlpha(f64),
    #[error("invalid dimension {0}, must be >= 1")]
    BadDim(usize),
}

/// Stability index α ∈ (0,2) together with the ambient dimension d ≥ 1.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AlphaParam {
    alpha: f64,
    dim: usize,
}

impl AlphaParam {
    pub fn new(alpha: f64, dim: usize) -> Result<Self, StableError> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(StableError::BadAlpha(alpha));
        }
        if dim == 0 {
            return Err(StableError::BadDim(dim));
        }
        Ok(AlphaParam { alpha, dim })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// The normalizing constant of the fractional Laplacian,
/// `C_{d,α} = α 2^{α-1} Γ((d+α)/2) / (π^{d/2} Γ(1-α/2))`.
pub fn cd_alpha(params: &AlphaParam) -> f64 {
    let a = params.alpha;
    let d = params.dim as f64;
    a * 2f64.powf(a - 1.0) * gamma((d + a) / 2.0) / (PI.powf(d / 2.0) * gamma(1.0 - a / 2.0))
}

/// `C_{1,α}` for a bare alpha (the per-axis jump constant).
pub fn c1_alpha(alpha: f64) -> f64 {
    let a = alpha;
    a * 2f64.powf(a - 1.0) * gamma((1.0 + a) / 2.0) / (PI.sqrt() * gamma(1.0 - a / 2.0))
}

/// One-sided Lévy jump density along a coordinate axis,
/// `j(a,b) = C_{1,α} |a-b|^{-(1+α)}`.
pub fn levy_density_axis(alpha: f64, a: f64, b: f64) -> Result<f64, StableError> {
    if a == b {
        return Err(StableError::SingularArguments(a));
    }
    Ok(c1_alpha(alpha) / (a - b).abs().powf(1.0 + alpha))
}

// Fourier cutoff: exp(-U^alpha) = e^{-35} ~ 6e-16, below f64 relevance.
const CUTOFF_EXPONENT: f64 = 35.0;
// switch to per-half-period panels once [0,U] holds this much oscillation
const OSC_THRESHOLD: f64 = 50.0;
const MAX_PANELS: usize = 400;
const ACCEL_WINDOW: usize = 40;
const EVAL_BUDGET: usize = 200_000;

/// Reduced density `p1(1, ζ)`, the standard symmetric α-stable density.
pub fn density_reduced(alpha: f64, zeta: f64) -> Result<f64, StableError> {
    let z = zeta.abs();
    let u_cut = CUTOFF_EXPONENT.powf(1.0 / alpha);
    let f = |u: f64| (-u.powf(alpha)).exp() * (u * z).cos();

    if z * u_cut <= OSC_THRESHOLD {
        let r = quad::integrate(&f, 0.0, u_cut, 1e-14, 48, EVAL_BUDGET);
        if !r.converged {
            return Err(StableError::QuadratureNonConvergence { alpha, zeta });
        }
        return Ok(r.value / PI);
    }

    // Per-half-period panels with boundaries at the zeros of cos(uz), so the
    // panel integrals alternate in sign. The head panel and (for alpha < 1)
    // panels near u=0 see the singular derivative of exp(-u^alpha) and get
    // deeper refinement.
    let h = PI / z;
    let mut partials = Vec::with_capacity(MAX_PANELS + 1);
    let mut sum = 0.0;
    let mut comp = 0.0; // Neumaier compensation
    let add = |s: &mut f64, c: &mut f64, v: f64| {
        let t = *s + v;
        if s.abs() >= v.abs() {
            *c += (*s - t) + v;
        } else {
            *c += (v - t) + *s;
        }
        *s = t;
    };
    let mut converged = true;

    let head = quad::integrate(&f, 0.0, 0.5 * h, 2e-14 * h, 48, EVAL_BUDGET);
    converged &= head.converged;
    add(&mut sum, &mut comp, head.value);
    partials.push(sum + comp);

    let mut a = 0.5 * h;
    let mut reached_cutoff = false;
    for _ in 0..MAX_PANELS {
        if a >= u_cut {
            reached_cutoff = true;
            break;
        }
        let b = (a + h).min(u_cut);
        let env = (-a.powf(alpha)).exp();
        let cap = if alpha < 1.0 && a < 0.5 { 12 } else { 8 };
        let tol = (2e-14 * h * env).max(1e-18 * h);
        let r = quad::integrate(&f, a, b, tol, cap, EVAL_BUDGET);
        converged &= r.converged;
        add(&mut sum, &mut comp, r.value);
        partials.push(sum + comp);
        a = b;
    }

    let value = if reached_cutoff || a >= u_cut {
        sum + comp
    } else {
        // Euler-accelerate the alternating remainder
        let w = partials.len().min(ACCEL_WINDOW);
        let window = &partials[partials.len() - w..];
        let full = quad::euler_accelerate(window);
        let dropped = quad::euler_accelerate(&window[..w - 1]);
        if (full - dropped).abs() > 5e-9 + 1e-6 * full.abs() {
            converged = false;
        }
        full
    };

    if !converged {
        return Err(StableError::QuadratureNonConvergence { alpha, zeta });
    }
    Ok(value / PI)
}

/// 1-D symmetric α-stable transition density `p1(t, z) = p^{(1,α)}(t, 0, z)`.
pub fn density_1d(alpha: f64, t: f64, z: f64) -> Result<f64, StableError> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(StableError::BadAlpha(alpha));
    }
    assert!(t > 0.0, "density_1d requires t > 0");
    let scale = t.powf(-1.0 / alpha);
    Ok(scale * density_reduced(alpha, z * scale)?)
}

/// Free transition kernel of the cylindrical process,
/// `p(t,x,y) = ∏_k p1(t, |x_k - y_k|)`.
///
/// Coordinate differences enter through their absolute value, so swapping
/// `x` and `y` gives a bitwise-identical result.
pub fn product_kernel(params: &AlphaParam, t: f64, x: &[f64], y: &[f64]) -> Result<f64, StableError> {
    assert_eq!(x.len(), params.dim);
    assert_eq!(y.len(), params.dim);
    let mut p = 1.0;
    for k in 0..params.dim {
        p *= density_1d(params.alpha, t, (x[k] - y[k]).abs())?;
    }
    Ok(p)
}

/// One draw of a standard symmetric α-stable variate (characteristic
/// function `exp(-|ξ|^α)`), by the Chambers–Mallows–Stuck transform.
///
/// The symmetric-case formula is continuous through α = 1, where it
/// degenerates to `tan(V)`; no special-casing is needed, but we take the
/// cheap exact branch there anyway.
#[inline]
pub fn standard_stable(alpha: f64, stream: &mut Stream) -> f64 {
    let v = PI * (stream.uniform() - 0.5);
    if alpha == 1.0 {
        let _ = stream.uniform(); // keep the counter layout uniform in alpha
        return v.tan();
    }
    let w = stream.exponential();
    (alpha * v).sin() / v.cos().powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One increment of a coordinate process over a step of length `dt`,
/// i.e. `dt^{1/α}` times a standard draw.
#[inline]
pub fn sample_increment(alpha: f64, dt: f64, stream: &mut Stream) -> f64 {
    dt.powf(1.0 / alpha) * standard_stable(alpha, stream)
}

/// Two-sided envelope for the product kernel,
/// `C^{-1} ∏_k (t^{-1/α} ∧ t |x_k-y_k|^{-(1+α)}) ≤ p ≤ C ∏_k (...)`.
///
/// The comparison constant is not given numerically by the theory, so it is
/// calibrated once per α: the per-coordinate ratio density/envelope is
/// scanned over a log-spaced grid of |z|/t^{1/α} in [1e-3, 1e3], the scan
/// extremes are padded by 5%, and the d-dimensional constant is the
/// per-coordinate constant to the d-th power.
#[derive(Clone, Debug)]
pub struct Envelope {
    alpha: f64,
    c1: f64,
}

impl Envelope {
    pub fn calibrate(alpha: f64) -> Result<Self, StableError> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(StableError::BadAlpha(alpha));
        }
        let n = 121;
        let (lo, hi) = (1e-3f64, 1e3f64);
        let mut up: f64 = 1.0;
        let mut dn: f64 = 1.0;
        for i in 0..n {
            let zeta = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
            let env = 1f64.min(zeta.powf(-1.0 - alpha));
            let ratio = density_reduced(alpha, zeta)? / env;
            up = up.max(ratio);
            dn = dn.min(ratio);
        }
        // include the zeta -> 0 end where the ratio tends to p1(1,0)
        let at0 = density_reduced(alpha, 0.0)?;
        up = up.max(at0);
        dn = dn.min(at0);
        let c1 = up.max(1.0 / dn) * 1.05;
        Ok(Envelope { alpha, c1 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Per-coordinate calibrated constant.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// `(low, high)` envelope values for `p(t,x,y)`.
    pub fn bound_envelope(&self, params: &AlphaParam, t: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
        assert_eq!(params.alpha, self.alpha);
        let mut prod = 1.0;
        for k in 0..params.dim {
            let dz = (x[k] - y[k]).abs();
            let peak = t.powf(-1.0 / params.alpha);
            let tail = t / dz.powf(1.0 + params.alpha);
            prod *= peak.min(tail);
        }
        let c = self.c1.powi(params.dim as i32);
        (prod / c, prod * c)
    }
}
