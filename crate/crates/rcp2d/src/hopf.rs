//! Center-manifold reduction at the Hopf point and closed-form criticality
//! curves.
//!
//! At `κ = κc` the linearization has the simple root pair `±iω0`, with
//! eigenfunction `q(θ) = e^{iω0θ}` and adjoint eigenfunction
//! `q*(s) = D e^{iω0 s}` normalized through
//!
//! ```text
//! D = 1 / (1 + κτ1 ξ_y e^{iω0τ1} + κτ2 ξ_z e^{iω0τ2}),
//! ```
//!
//! so that `⟨q*, q⟩ = 1` and `⟨q*, q̄⟩ = 0` under the delay bilinear form.
//! Projecting the quadratic and cubic terms onto this pair yields the
//! coefficients `g20, g11, g02, g21`, where `g21` needs the second-order
//! center-manifold corrections `w20(θ)` and `w11(θ)` (constants `E`, `F`).
//! Everything funnels into the first Lyapunov quantity
//!
//! ```text
//! c1(0) = i/(2ω0) (g20 g11 − 2|g11|² − |g02|²/3) + g21/2,
//! ```
//!
//! whose real part decides the verdict: `μ2 = −Re c1(0)/α′(0)` is positive
//! for a supercritical bifurcation (stable small cycle) and negative for a
//! subcritical one; `β2 = 2 Re c1(0)` is the leading Floquet exponent.
//!
//! Two closed forms shortcut the machinery. Without queue feedback the sign
//! of `Re c1(0)` is that of [`f_tilde`], a function of the phase `ϑ` alone
//! (negative throughout, so the bifurcation is always supercritical). With
//! queue feedback, [`g_tilde_mu2`] gives `μ2` for the capacity-normalized
//! model as a function of `(ϑ, ρ*)` only; for a dimensional parameter set
//! the machinery value satisfies `normal_form(..).mu2 = g_tilde_mu2 · C²/(4κc)`.

use num_complex::Complex;

use crate::model::{Equilibrium, ModelParams, TaylorCoefficients};
use crate::stability::HopfPoint;
use crate::{as_f64, cast, Error, Real, Result};

/// Direction of the Hopf bifurcation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    /// `μ2 > 0`: a stable small-amplitude limit cycle exists past `κc`.
    Supercritical,
    /// `μ2 < 0`: no stable local cycle; trajectories leave the neighborhood.
    Subcritical,
    /// `Re c1(0)` is numerically indistinguishable from zero.
    Degenerate,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criticality::Supercritical => "supercritical",
            Criticality::Subcritical => "subcritical",
            Criticality::Degenerate => "degenerate",
        })
    }
}

/// All quantities produced by the center-manifold reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalForm<T> {
    /// Adjoint-eigenvector normalization `D`.
    pub d_norm: Complex<T>,
    pub g20: Complex<T>,
    pub g11: Complex<T>,
    pub g02: Complex<T>,
    pub g21: Complex<T>,
    /// Center-manifold constant `E` (coefficient of `e^{2iω0θ}` in `w20`).
    pub e_const: Complex<T>,
    /// Center-manifold constant `F` (constant part of `w11`).
    pub f_const: Complex<T>,
    pub w20_0: Complex<T>,
    pub w20_t1: Complex<T>,
    pub w20_t2: Complex<T>,
    pub w11_0: Complex<T>,
    pub w11_t1: Complex<T>,
    pub w11_t2: Complex<T>,
    /// First Lyapunov quantity `c1(0)`.
    pub c1_0: Complex<T>,
    /// Direction coefficient `μ2 = −Re c1(0)/α′(0)`.
    pub mu2: T,
    /// Floquet exponent `β2 = 2 Re c1(0)`.
    pub beta2: T,
    pub criticality: Criticality,
}

/// Runs the full center-manifold reduction at the Hopf point.
///
/// `params.kappa` must equal `hp.kappa_c` to relative tolerance `1e−10`;
/// the whole computation is only meaningful on the critical manifold.
pub fn normal_form<T: Real>(
    params: &ModelParams<T>,
    eq: &Equilibrium<T>,
    coeffs: &TaylorCoefficients<T>,
    hp: &HopfPoint<T>,
) -> Result<NormalForm<T>> {
    if (coeffs.xi_y + eq.a_tilde).abs() > cast::<T>(1e-10) * eq.a_tilde.abs() {
        return Err(Error::Degenerate {
            reason: format!(
                "Taylor coefficients disagree with the equilibrium: ξ_y = {} but −ã = {}",
                coeffs.xi_y, -eq.a_tilde
            ),
        });
    }
    if (params.kappa - hp.kappa_c).abs() > cast::<T>(1e-10) * hp.kappa_c.abs() {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: format!(
                "normal form is evaluated at the Hopf point; got κ = {} but κc = {}",
                params.kappa, hp.kappa_c
            ),
        });
    }

    let k = hp.kappa_c;
    let w0 = hp.omega0;
    let (tau1, tau2) = (params.tau1, params.tau2);
    let one = Complex::new(T::one(), T::zero());
    let i_unit = Complex::new(T::zero(), T::one());
    let two = cast::<T>(2.0);
    let three = cast::<T>(3.0);
    let four = cast::<T>(4.0);
    let six = cast::<T>(6.0);

    // e^{−iω0τj} and conjugates, reused everywhere below.
    let em1 = Complex::from_polar(T::one(), -w0 * tau1);
    let em2 = Complex::from_polar(T::one(), -w0 * tau2);
    let ep1 = em1.conj();
    let ep2 = em2.conj();

    let d_norm = one / (one + ep1 * (k * tau1 * coeffs.xi_y) + ep2 * (k * tau2 * coeffs.xi_z));
    let db = d_norm.conj();

    let g20 = db
        * (em1 * coeffs.xi_xy
            + em2 * coeffs.xi_xz
            + em1 * em1 * coeffs.xi_yy
            + em1 * em2 * coeffs.xi_yz
            + em2 * em2 * coeffs.xi_zz)
        * (two * k);
    let g11 = db
        * ((em1 + ep1) * coeffs.xi_xy
            + (em2 + ep2) * coeffs.xi_xz
            + Complex::new(two * coeffs.xi_yy, T::zero())
            + (em1 * ep2 + ep1 * em2) * coeffs.xi_yz
            + Complex::new(two * coeffs.xi_zz, T::zero()))
        * k;
    let g02 = db
        * (ep1 * coeffs.xi_xy
            + ep2 * coeffs.xi_xz
            + ep1 * ep1 * coeffs.xi_yy
            + ep1 * ep2 * coeffs.xi_yz
            + ep2 * ep2 * coeffs.xi_zz)
        * (two * k);

    let e_den = db * (em1 * em1 * (k * coeffs.xi_y) + em2 * em2 * (k * coeffs.xi_z)
        - i_unit * (two * w0));
    if e_den.norm() < cast::<T>(1e-14) {
        return Err(Error::Resonance {
            magnitude: as_f64(e_den.norm()),
        });
    }
    let e_const = -g20 / e_den;

    let xi_sum = coeffs.xi_y + coeffs.xi_z;
    if xi_sum == T::zero() || !xi_sum.is_finite() {
        return Err(Error::Degenerate {
            reason: "ξ_y + ξ_z = 0 leaves the constant part of w11 undefined".to_string(),
        });
    }
    let f_const = -g11 / (db * (k * xi_sum));

    let i_w0 = i_unit * w0;
    let w20 = |theta: T| -> Complex<T> {
        -(g20 / i_w0) * (i_w0 * theta).exp() - (g02.conj() / (i_w0 * three)) * (-i_w0 * theta).exp()
            + e_const * (i_w0 * theta * two).exp()
    };
    let w11 = |theta: T| -> Complex<T> {
        (g11 / i_w0) * (i_w0 * theta).exp() - (g11.conj() / i_w0) * (-i_w0 * theta).exp() + f_const
    };

    let w20_0 = w20(T::zero());
    let w20_t1 = w20(-tau1);
    let w20_t2 = w20(-tau2);
    let w11_0 = w11(T::zero());
    let w11_t1 = w11(-tau1);
    let w11_t2 = w11(-tau2);

    // Cross phases appearing only in the cubic bracket.
    let e_m2p1 = em1 * em1 * ep2; // e^{iω0(−2τ1+τ2)}
    let e_m2p2 = em2 * em2 * ep1; // e^{iω0(−2τ2+τ1)}
    let e_diff = ep1 * em2; // e^{iω0(τ1−τ2)}

    let g21 = db
        * ((w11_0 * em1 * two + w20_0 * ep1 + w11_t1 * two + w20_t1) * coeffs.xi_xy
            + (w11_0 * em2 * two + w20_0 * ep2 + w11_t2 * two + w20_t2) * coeffs.xi_xz
            + (w11_t1 * em1 * four + w20_t1 * ep1 * two) * coeffs.xi_yy
            + (w11_t1 * em2 * two + w20_t1 * ep2 + w11_t2 * em1 * two + w20_t2 * ep1)
                * coeffs.xi_yz
            + (w11_t2 * em2 * four + w20_t2 * ep2 * two) * coeffs.xi_zz
            + (em1 * em1 * two + Complex::new(four, T::zero())) * coeffs.xi_xyy
            + (em2 * em2 * two + Complex::new(four, T::zero())) * coeffs.xi_xzz
            + (e_m2p1 * two + em2 * four) * coeffs.xi_yyz
            + (e_m2p2 * two + em1 * four) * coeffs.xi_yzz
            + (e_diff * two + e_diff.conj() * two + em1 * em2 * two) * coeffs.xi_xyz
            + em1 * (six * coeffs.xi_yyy)
            + em2 * (six * coeffs.xi_zzz))
        * k;

    let c1_0 = i_unit / (w0 * two)
        * (g20 * g11 - g11 * g11.conj() * two - g02 * g02.conj() / three)
        + g21 / two;

    let re_c1 = c1_0.re;
    let mu2 = -re_c1 / hp.alpha_prime;
    let beta2 = two * re_c1;
    let criticality = if re_c1.abs() < cast::<T>(1e-12) * T::one().max(c1_0.norm()) {
        Criticality::Degenerate
    } else if re_c1 < T::zero() {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    };

    Ok(NormalForm {
        d_norm,
        g20,
        g11,
        g02,
        g21,
        e_const,
        f_const,
        w20_0,
        w20_t1,
        w20_t2,
        w11_0,
        w11_t1,
        w11_t2,
        c1_0,
        mu2,
        beta2,
        criticality,
    })
}

/// Evaluates the eigenfunction inner products `(⟨q*, q⟩, ⟨q*, q̄⟩)` under the
/// delay bilinear form; by construction of `D` these are `1` and `0`.
pub fn inner_products<T: Real>(
    params: &ModelParams<T>,
    coeffs: &TaylorCoefficients<T>,
    hp: &HopfPoint<T>,
) -> (Complex<T>, Complex<T>) {
    let k = hp.kappa_c;
    let w0 = hp.omega0;
    let one = Complex::new(T::one(), T::zero());
    let em1 = Complex::from_polar(T::one(), -w0 * params.tau1);
    let em2 = Complex::from_polar(T::one(), -w0 * params.tau2);
    let d_norm = one / (one + em1.conj() * (k * params.tau1 * coeffs.xi_y)
        + em2.conj() * (k * params.tau2 * coeffs.xi_z));
    let db = d_norm.conj();

    let q_q = db * (one + em1 * (k * params.tau1 * coeffs.xi_y) + em2 * (k * params.tau2 * coeffs.xi_z));
    let q_qbar = db
        * (T::one()
            + k / w0 * (coeffs.xi_y * (w0 * params.tau1).sin() + coeffs.xi_z * (w0 * params.tau2).sin()));
    (q_q, q_qbar)
}

/// Criticality function for the model without queue feedback:
/// `sign(Re c1(0)) = sign(f̃(ϑ))`, and `f̃ < 0` on all of `(0, π)`.
pub fn f_tilde<T: Real>(theta: T) -> T {
    let two = cast::<T>(2.0);
    let pi = T::PI();
    let s = theta.sin();
    let c = theta.cos();
    let c2 = (two * theta).cos();
    -two * pi * s.powi(4) - pi * s.powi(2) * c2.powi(2) - two * c2 * s.powi(3)
        - c2 * s.powi(2) * c * (pi - two * theta)
}

/// Closed-form `μ2(ϑ, ρ*)` for the model with queue feedback, in the
/// capacity-normalized gauge (rate in units of `C/2`, `κ` calibrated so that
/// `κc = 1`). Multiply by `C²/(4κc)` to compare against a dimensional
/// [`normal_form`] result.
pub fn g_tilde_mu2<T: Real>(theta: T, rho_star: T) -> Result<T> {
    if !(theta > T::zero() && theta < T::PI()) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("phase must lie in (0, π), got {theta}"),
        });
    }
    if !(rho_star >= cast::<T>(0.01) && rho_star <= cast::<T>(0.99)) {
        return Err(Error::InvalidParameter {
            name: "rho_star",
            reason: format!("utilization must lie in [0.01, 0.99], got {rho_star}"),
        });
    }

    let one = T::one();
    let two = cast::<T>(2.0);
    let three = cast::<T>(3.0);
    let four = cast::<T>(4.0);
    let rho = rho_star;
    let s = theta.sin();
    let c2 = (two * theta).cos();
    let s3 = (three * theta).sin();
    let den = Complex::new(c2, two * s);

    let t1 = (Complex::new(T::zero(), two * s) - Complex::new(two * c2, s) / den)
        * (s / (rho * (one - rho)));
    let t2 = Complex::new(-s, c2) * ((one + rho) / (rho * rho)) / den;
    let t3 = Complex::new(-four * s, three * c2)
        * (two * s * s / ((one - rho) * (one - rho) * (one + rho)))
        / den;
    let t4 = Complex::new(T::zero(), -three * (three * s - s3) / (four * (one - rho) * (one - rho) * s));
    let g = t1 + t2 + t3 + t4;

    let a_coef = one + (T::PI() - two * theta) * theta.cos() / (two * s);
    let b_coef = T::PI() / two;
    let db = Complex::new(a_coef, b_coef).inv();

    let numer = (g * db).re;
    let denom = (Complex::new(T::zero(), one + rho) * db).re;
    Ok(numer / denom)
}

/// One row of a criticality table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalityPoint<T> {
    pub theta: T,
    pub rho_star: T,
    pub mu2: T,
    pub criticality: Criticality,
}

/// Tabulates `μ2(ϑ, ρ*)` over the cartesian product of the two grids
/// (ϑ-major order).
pub fn criticality_map<T: Real>(thetas: &[T], rhos: &[T]) -> Result<Vec<CriticalityPoint<T>>> {
    let mut rows = Vec::with_capacity(thetas.len() * rhos.len());
    for &theta in thetas {
        for &rho in rhos {
            let mu2 = g_tilde_mu2(theta, rho)?;
            let criticality = if mu2.abs() < cast::<T>(1e-12) {
                Criticality::Degenerate
            } else if mu2 > T::zero() {
                Criticality::Supercritical
            } else {
                Criticality::Subcritical
            };
            rows.push(CriticalityPoint {
                theta,
                rho_star: rho,
                mu2,
                criticality,
            });
        }
    }
    Ok(rows)
}
