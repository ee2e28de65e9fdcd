//! Characteristic-equation analysis of the linearized two-delay model.
//!
//! Linearizing about the equilibrium and rescaling time by the delay sum
//! turns linear stability into root placement of
//!
//! ```text
//! h(λ) = λ + κ ã (e^{−λτ1} + e^{−λτ2}) = 0.
//! ```
//!
//! The first root pair crosses the imaginary axis at frequency
//! `ω0 = π/(τ1+τ2)` regardless of every other parameter, which makes the
//! phase `ϑ = ω0 τ1` the natural delay coordinate. Stability holds exactly
//! while
//!
//! ```text
//! κ ã (τ1+τ2) cos(ω0(τ1−τ2)/2) < π/2,
//! ```
//!
//! and the critical multiplier `κc` solves this with equality. The crossing
//! is transversal: `α′(0) = Re dλ/dκ = π ã sin ϑ / (A² + B²) > 0` with
//! `A = 1 − ω0 cos ϑ (τ1−τ2)/(2 sin ϑ)` and `B = π/2`.
//!
//! [`rightmost_root_scan`] provides an independent check on the closed
//! forms: Newton's method on `h` seeded from a grid over a complex-plane
//! rectangle, using the exact derivative `1 − κã(τ1 e^{−λτ1} + τ2 e^{−λτ2})`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::model::{equilibrium, ModelParams};
use crate::{cast, Error, Real, Result};

/// Hopf point of the characteristic equation: crossing frequency, phase,
/// critical multiplier, and crossing speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfPoint<T> {
    /// Crossing frequency `ω0 = π/(τ1+τ2)`.
    pub omega0: T,
    /// Delay phase `ϑ = ω0 τ1 ∈ (0, π)`.
    pub theta: T,
    /// Critical bifurcation multiplier `κc`.
    pub kappa_c: T,
    /// Transversality value `α′(0) = Re dλ/dκ` at the crossing.
    pub alpha_prime: T,
}

/// Outcome of the exact stability criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict<T> {
    /// Whether every characteristic root has negative real part.
    pub stable: bool,
    /// Signed distance `κã(τ1+τ2)cos(ω0(τ1−τ2)/2) − π/2`; negative means
    /// stable, zero is the Hopf point.
    pub margin: T,
}

/// Crossing frequency and delay phase `(ω0, ϑ)` for a delay pair.
pub fn hopf_frequency<T: Real>(tau1: T, tau2: T) -> (T, T) {
    let omega0 = T::PI() / (tau1 + tau2);
    (omega0, omega0 * tau1)
}

/// Applies the exact stability criterion to the given parameters.
pub fn is_stable<T: Real>(p: &ModelParams<T>) -> StabilityVerdict<T> {
    let eq = equilibrium(p);
    let (omega0, _) = hopf_frequency(p.tau1, p.tau2);
    let half = cast::<T>(0.5);
    let margin = p.kappa * eq.a_tilde * p.total_delay() * (omega0 * (p.tau1 - p.tau2) * half).cos()
        - T::PI() * half;
    StabilityVerdict {
        stable: margin < T::zero(),
        margin,
    }
}

/// Critical multiplier `κc` together with the crossing data.
///
/// The cosine factor is strictly positive because its argument
/// `ω0(τ1−τ2)/2 = (2ϑ−π)/2` lies in `(−π/2, π/2)`.
pub fn critical_kappa<T: Real>(p: &ModelParams<T>) -> HopfPoint<T> {
    let eq = equilibrium(p);
    let (omega0, theta) = hopf_frequency(p.tau1, p.tau2);
    let half = cast::<T>(0.5);
    let kappa_c = T::PI() * half
        / (eq.a_tilde * p.total_delay() * (omega0 * (p.tau1 - p.tau2) * half).cos());
    let hp = HopfPoint {
        omega0,
        theta,
        kappa_c,
        alpha_prime: T::zero(),
    };
    let alpha_prime = transversality(p, &hp);
    HopfPoint { alpha_prime, ..hp }
}

/// Crossing speed `α′(0) = πã sin ϑ/(A²+B²)`, strictly positive.
pub fn transversality<T: Real>(p: &ModelParams<T>, hp: &HopfPoint<T>) -> T {
    let eq = equilibrium(p);
    let two = cast::<T>(2.0);
    let sin_theta = hp.theta.sin();
    let a = T::one() - hp.omega0 * hp.theta.cos() * (p.tau1 - p.tau2) / (two * sin_theta);
    let b = T::PI() / two;
    T::PI() * eq.a_tilde * sin_theta / (a * a + b * b)
}

/// Evaluates the characteristic function `λ + κã(e^{−λτ1} + e^{−λτ2})`.
pub fn characteristic_residual<T: Real>(lambda: Complex<T>, p: &ModelParams<T>) -> Complex<T> {
    let eq = equilibrium(p);
    let ka = p.kappa * eq.a_tilde;
    lambda + ((-lambda * p.tau1).exp() + (-lambda * p.tau2).exp()) * ka
}

/// Derivative of the characteristic function,
/// `1 − κã(τ1 e^{−λτ1} + τ2 e^{−λτ2})`.
pub fn characteristic_derivative<T: Real>(lambda: Complex<T>, p: &ModelParams<T>) -> Complex<T> {
    let eq = equilibrium(p);
    let ka = p.kappa * eq.a_tilde;
    Complex::new(T::one(), T::zero())
        - ((-lambda * p.tau1).exp() * p.tau1 + (-lambda * p.tau2).exp() * p.tau2) * ka
}

/// Rectangle in the complex plane searched by [`rightmost_root_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox<T> {
    pub re_min: T,
    pub re_max: T,
    pub im_min: T,
    pub im_max: T,
}

impl<T: Real> SearchBox<T> {
    /// Default window around the first crossing: `Re ∈ [−2ω0, 2ω0]`,
    /// `Im ∈ [0, 3ω0]` (conjugate roots are implied).
    pub fn default_for(p: &ModelParams<T>) -> Self {
        let (omega0, _) = hopf_frequency(p.tau1, p.tau2);
        let two = cast::<T>(2.0);
        let three = cast::<T>(3.0);
        SearchBox {
            re_min: -two * omega0,
            re_max: two * omega0,
            im_min: T::zero(),
            im_max: three * omega0,
        }
    }

    fn contains(&self, z: Complex<T>, tol: T) -> bool {
        z.re >= self.re_min - tol
            && z.re <= self.re_max + tol
            && z.im >= self.im_min - tol
            && z.im <= self.im_max + tol
    }
}

/// Finds characteristic roots inside `search_box` by Newton iteration from a
/// dense seed grid; roots are deduplicated and sorted rightmost-first, with
/// conjugates implied by those on or above the real axis.
///
/// Returns [`Error::OracleDisagreement`] when the scan comes back empty while
/// [`is_stable`] reports instability, since the unstable root pair must then
/// lie near the origin and should have been found.
pub fn rightmost_root_scan<T: Real>(
    p: &ModelParams<T>,
    search_box: &SearchBox<T>,
) -> Result<Vec<Complex<T>>> {
    let eq = equilibrium(p);
    let ka = p.kappa * eq.a_tilde;
    let (omega0, _) = hopf_frequency(p.tau1, p.tau2);
    let spacing = (cast::<T>(0.1) / p.total_delay()).min(omega0 / cast::<T>(10.0));

    let n_re = (((search_box.re_max - search_box.re_min) / spacing).ceil())
        .to_usize()
        .unwrap_or(0)
        + 1;
    let n_im = (((search_box.im_max - search_box.im_min) / spacing).ceil())
        .to_usize()
        .unwrap_or(0)
        + 1;

    let char_fn = |z: Complex<T>| -> Complex<T> {
        z + ((-z * p.tau1).exp() + (-z * p.tau2).exp()) * ka
    };
    let char_deriv = |z: Complex<T>| -> Complex<T> {
        Complex::new(T::one(), T::zero())
            - ((-z * p.tau1).exp() * p.tau1 + (-z * p.tau2).exp() * p.tau2) * ka
    };

    let newton = move |seed: Complex<T>| -> Option<Complex<T>> {
        let mut z = seed;
        for _ in 0..60 {
            let f = char_fn(z);
            let df = char_deriv(z);
            if df.norm_sqr() < cast::<T>(1e-300) {
                return None;
            }
            let step = f / df;
            z = z - step;
            if !(z.re.is_finite() && z.im.is_finite()) {
                return None;
            }
            if step.norm() <= cast::<T>(1e-13) * (T::one() + z.norm()) {
                // Converged; keep it only if it is a genuine root.
                let scale = T::one() + ka + z.norm();
                if char_fn(z).norm() <= cast::<T>(1e-10) * scale {
                    return Some(z);
                }
                return None;
            }
        }
        None
    };

    let boundary_tol = cast::<T>(1e-12);
    let mut found: Vec<Complex<T>> = (0..n_re)
        .into_par_iter()
        .flat_map_iter(|i| {
            let re = search_box.re_min + spacing * cast::<T>(i as f64);
            (0..n_im).filter_map(move |j| {
                let im = search_box.im_min + spacing * cast::<T>(j as f64);
                let root = newton(Complex::new(re, im))?;
                // Conjugate symmetry: reflect anything that slid below the axis.
                let root = if root.im < T::zero() { root.conj() } else { root };
                search_box.contains(root, boundary_tol).then_some(root)
            })
        })
        .collect();

    found.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("roots are finite")
    });
    let mut roots: Vec<Complex<T>> = Vec::new();
    let dedupe_tol = cast::<T>(1e-8);
    for r in found {
        if !roots.iter().any(|q| (r - *q).norm() < dedupe_tol) {
            roots.push(r);
        }
    }
    roots.sort_by(|a, b| b.re.partial_cmp(&a.re).expect("roots are finite"));

    if roots.is_empty() && !is_stable(p).stable {
        return Err(Error::OracleDisagreement);
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn set1(kappa: f64) -> ModelParams<f64> {
        ModelParams::with_queue(2.16, 0.0222, 100.0, 10.0, 70.0, kappa).unwrap()
    }

    #[test]
    fn crossing_frequency_and_phase() {
        let (omega0, theta) = hopf_frequency(10.0, 70.0);
        assert_relative_eq!(omega0, std::f64::consts::PI / 80.0);
        assert_relative_eq!(theta, std::f64::consts::PI / 8.0);

        let (_, theta) = hopf_frequency(35.0, 35.0);
        assert_relative_eq!(theta, std::f64::consts::FRAC_PI_2);

        let (_, theta) = hopf_frequency(10.0, 20.0);
        assert_relative_eq!(theta, std::f64::consts::PI / 3.0);
    }

    #[test]
    fn stability_flips_across_the_critical_multiplier() {
        assert!(is_stable(&set1(0.99)).stable);
        assert!(!is_stable(&set1(1.01)).stable);
        let at_crossing = set1(critical_kappa(&set1(1.0)).kappa_c);
        assert_abs_diff_eq!(is_stable(&at_crossing).margin, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn small_gain_without_queue_is_stable_for_any_delays() {
        for (tau1, tau2) in [(1.0, 1.0), (10.0, 70.0), (3.0, 200.0)] {
            let p = ModelParams::without_queue(1.5, 0.95, 100.0, tau1, tau2, 1.0).unwrap();
            assert!(is_stable(&p).stable, "tau1={tau1}, tau2={tau2}");
        }
    }

    #[test]
    fn critical_kappa_reference_values() {
        let hp = critical_kappa(&set1(1.0));
        assert_relative_eq!(hp.kappa_c, 1.000142849206, epsilon = 1e-10);

        let p = ModelParams::with_queue(0.87, 0.0222, 100.0, 10.0, 15.0, 1.0).unwrap();
        assert_relative_eq!(critical_kappa(&p).kappa_c, 0.999148102097, epsilon = 1e-10);

        let p = ModelParams::with_queue(1.17, 0.736, 100.0, 10.0, 20.0, 1.0).unwrap();
        assert_relative_eq!(critical_kappa(&p).kappa_c, 1.000114186195, epsilon = 1e-10);
    }

    #[test]
    fn transversality_reference_values() {
        let p = set1(1.0);
        let hp = critical_kappa(&p);
        assert_relative_eq!(hp.alpha_prime, 0.003576447081, epsilon = 1e-9);

        // Symmetric delays collapse A to 1.
        let q = ModelParams::with_queue(1.0, 0.0222, 100.0, 35.0, 35.0, 1.0).unwrap();
        let hq = critical_kappa(&q);
        let a_tilde = equilibrium(&q).a_tilde;
        let expected = std::f64::consts::PI * a_tilde
            / (1.0 + std::f64::consts::PI.powi(2) / 4.0);
        assert_relative_eq!(hq.alpha_prime, expected, epsilon = 1e-14);
    }

    #[test]
    fn residual_vanishes_at_the_constructed_crossing() {
        let hp = critical_kappa(&set1(1.0));
        let p = set1(hp.kappa_c);
        let res = characteristic_residual(Complex::new(0.0, hp.omega0), &p);
        let a_tilde = equilibrium(&p).a_tilde;
        assert!(res.norm() < 1e-10 * a_tilde, "residual {res}");
    }

    #[test]
    fn residual_at_zero_is_twice_kappa_a_tilde() {
        let p = set1(1.3);
        let a_tilde = equilibrium(&p).a_tilde;
        let res = characteristic_residual(Complex::new(0.0, 0.0), &p);
        assert_relative_eq!(res.re, 2.0 * 1.3 * a_tilde);
        assert_eq!(res.im, 0.0);
    }

    #[test]
    fn residual_matches_vanishing_delay_limit() {
        // As both delays shrink, λ = −2κã approaches a root.
        let p = ModelParams::without_queue(2e-9, 1.0, 100.0, 1e-9, 1e-9, 1.0).unwrap();
        let a_tilde = equilibrium(&p).a_tilde;
        assert_relative_eq!(a_tilde, 1.0);
        let res = characteristic_residual(Complex::new(-2.0, 0.0), &p);
        assert!(res.norm() < 1e-8, "residual {res}");
    }

    #[test]
    fn scan_finds_the_crossing_root() {
        let hp = critical_kappa(&set1(1.0));
        let p = set1(hp.kappa_c);
        let roots = rightmost_root_scan(&p, &SearchBox::default_for(&p)).unwrap();
        let target = Complex::new(0.0, hp.omega0);
        assert!(
            roots.iter().any(|r| (r - target).norm() < 1e-8),
            "no root near iω0 in {roots:?}"
        );
    }

    #[test]
    fn scan_sign_matches_the_closed_form_verdict() {
        let hp = critical_kappa(&set1(1.0));

        let stable = set1(0.5 * hp.kappa_c);
        let roots = rightmost_root_scan(&stable, &SearchBox::default_for(&stable)).unwrap();
        assert!(!roots.is_empty());
        assert!(roots.iter().all(|r| r.re < 0.0), "{roots:?}");

        let unstable = set1(1.5 * hp.kappa_c);
        let roots = rightmost_root_scan(&unstable, &SearchBox::default_for(&unstable)).unwrap();
        assert!(roots.iter().any(|r| r.re > 0.0), "{roots:?}");
    }

    #[test]
    fn swapping_delays_changes_nothing() {
        let p = set1(1.0);
        let q = ModelParams::with_queue(2.16, 0.0222, 100.0, 70.0, 10.0, 1.0).unwrap();
        let hp = critical_kappa(&p);
        let hq = critical_kappa(&q);
        assert_relative_eq!(hp.kappa_c, hq.kappa_c, epsilon = 1e-14);
        assert_relative_eq!(hp.omega0, hq.omega0, epsilon = 1e-14);
        assert_relative_eq!(is_stable(&p).margin, is_stable(&q).margin, epsilon = 1e-14);
    }

    #[test]
    fn rescaling_time_preserves_the_critical_multiplier() {
        let p = set1(1.0);
        for c in [0.1, 3.0, 40.0] {
            let q = ModelParams::with_queue(2.16, 0.0222, 100.0, 10.0 * c, 70.0 * c, 1.0).unwrap();
            let hp = critical_kappa(&p);
            let hq = critical_kappa(&q);
            assert_relative_eq!(hq.kappa_c, hp.kappa_c, epsilon = 1e-12);
            assert_relative_eq!(hq.omega0 * c, hp.omega0, epsilon = 1e-12);
        }
    }
}
