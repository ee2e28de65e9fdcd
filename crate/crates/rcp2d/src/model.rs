//! Model parameters, the bottleneck equilibrium, and Taylor coefficients of
//! the rate dynamics about that equilibrium.
//!
//! With queue feedback (`b > 0`) the equilibrium utilization `ρ* = 2R*/C`
//! solves `2(1−ρ*)² = bσ²ρ*`, giving the closed form
//!
//! ```text
//! ρ* = (4 + bσ² − √((bσ²)² + 8bσ²)) / 4,      R* = ρ*C/2.
//! ```
//!
//! Without queue feedback (`b = 0`) the rate simply splits the utilization
//! target: `R* = γC/2`. The linearization constant is `ã = a(1+ρ*)/(τ1+τ2)`
//! in the first case and `ã = a/(τ1+τ2)` in the second.
//!
//! Writing the dynamics as `dR/dt = κ f(x, y, z)` with `x = R(t)`,
//! `y = R(t−τ1)`, `z = R(t−τ2)`, the Taylor coefficients `ξ_*` below are the
//! monomial coefficients of the expansion of `f` about `(R*, R*, R*)`
//! (factorials already absorbed, so e.g. `ξ_yy` is half the second partial).
//! The equilibrium identity `bσ²ρ* = 2(1−ρ*)²` collapses every queue-slope
//! term into rational functions of `ρ*` alone, which is how they are
//! evaluated here.

use crate::{as_f64, cast, Error, Real, Result};

/// Parameters of the two-delay rate control model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Gain on the rate update.
    pub a: T,
    /// Queue-feedback weight; `0` disables the queue term.
    pub b: T,
    /// Utilization target, only active when `b = 0`.
    pub gamma: T,
    /// Link capacity `C` (packets per unit time).
    pub capacity: T,
    /// Round-trip delay of the first class.
    pub tau1: T,
    /// Round-trip delay of the second class.
    pub tau2: T,
    /// Dimensionless bifurcation multiplier on the right-hand side.
    pub kappa: T,
    /// Variance factor `σ²` of the Brownian queue model.
    pub sigma_sq: T,
}

impl<T: Real> ModelParams<T> {
    /// Model with queue feedback (`b > 0`); the utilization target is implied
    /// by `b` through the equilibrium condition.
    pub fn with_queue(a: T, b: T, capacity: T, tau1: T, tau2: T, kappa: T) -> Result<Self> {
        if !(b > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("queue-feedback weight must be > 0, got {b}; use `without_queue` for b = 0"),
            });
        }
        let p = Self {
            a,
            b,
            gamma: T::one(),
            capacity,
            tau1,
            tau2,
            kappa,
            sigma_sq: T::one(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Model without queue feedback (`b = 0`), steering toward load `γC`.
    pub fn without_queue(a: T, gamma: T, capacity: T, tau1: T, tau2: T, kappa: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("utilization target must lie in (0, 1], got {gamma}"),
            });
        }
        let p = Self {
            a,
            b: T::zero(),
            gamma,
            capacity,
            tau1,
            tau2,
            kappa,
            sigma_sq: T::one(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks every field against its domain.
    pub fn validate(&self) -> Result<()> {
        fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        }
        positive("a", self.a)?;
        positive("capacity", self.capacity)?;
        positive("tau1", self.tau1)?;
        positive("tau2", self.tau2)?;
        positive("kappa", self.kappa)?;
        positive("sigma_sq", self.sigma_sq)?;
        if !(self.b >= T::zero() && self.b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("must be nonnegative and finite, got {}", self.b),
            });
        }
        if !(self.gamma > T::zero() && self.gamma <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must lie in (0, 1], got {}", self.gamma),
            });
        }
        Ok(())
    }

    /// Same parameters with a different bifurcation multiplier.
    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.kappa = kappa;
        self
    }

    /// Whether the queue term participates in the dynamics.
    pub fn has_queue_feedback(&self) -> bool {
        self.b > T::zero()
    }

    /// Delay sum `τ1 + τ2`.
    pub fn total_delay(&self) -> T {
        self.tau1 + self.tau2
    }

    /// Mean round-trip time `T̄ = (τ1 + τ2)/2`.
    pub fn mean_rtt(&self) -> T {
        self.total_delay() / cast::<T>(2.0)
    }
}

/// Non-zero equilibrium of the rate dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium<T> {
    /// Per-flow equilibrium rate `R*`.
    pub r_star: T,
    /// Equilibrium utilization `ρ* = 2R*/C`.
    pub rho_star: T,
    /// Linearization constant `ã` of the delayed load.
    pub a_tilde: T,
}

/// Dimensionless Brownian mean queue `p(y) = yσ²/(2(C−y))`.
pub fn mean_queue<T: Real>(y: T, capacity: T, sigma_sq: T) -> Result<T> {
    if y < T::zero() || !y.is_finite() {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!("arrival rate must be nonnegative and finite, got {y}"),
        });
    }
    if y >= capacity {
        return Err(Error::QueueSingular {
            y: as_f64(y),
            capacity: as_f64(capacity),
        });
    }
    Ok(y * sigma_sq / (cast::<T>(2.0) * (capacity - y)))
}

/// Computes the equilibrium rate, utilization, and linearization constant.
pub fn equilibrium<T: Real>(p: &ModelParams<T>) -> Equilibrium<T> {
    let two = cast::<T>(2.0);
    if p.has_queue_feedback() {
        let beff = p.b * p.sigma_sq;
        let four = cast::<T>(4.0);
        let eight = cast::<T>(8.0);
        let rho = (four + beff - (beff * beff + eight * beff).sqrt()) / four;
        Equilibrium {
            r_star: rho * p.capacity / two,
            rho_star: rho,
            a_tilde: p.a * (T::one() + rho) / p.total_delay(),
        }
    } else {
        Equilibrium {
            r_star: p.gamma * p.capacity / two,
            rho_star: p.gamma,
            a_tilde: p.a / p.total_delay(),
        }
    }
}

/// Inverts the equilibrium relation: the `b` that yields utilization `ρ*`.
///
/// From `2(1−ρ*)² = bρ*` (σ² = 1), so `b = 2(1−ρ*)²/ρ*`.
pub fn rho_to_b<T: Real>(rho_star: T) -> Result<T> {
    if !(rho_star > T::zero() && rho_star < T::one()) {
        return Err(Error::InvalidParameter {
            name: "rho_star",
            reason: format!("utilization must lie in (0, 1), got {rho_star}"),
        });
    }
    let one_minus = T::one() - rho_star;
    Ok(cast::<T>(2.0) * one_minus * one_minus / rho_star)
}

/// Taylor coefficients of the right-hand side about the equilibrium, indexed
/// by the monomial in `(x, y, z) = (R(t), R(t−τ1), R(t−τ2))` deviations.
///
/// Monomials not listed are zero; with `b = 0` only the four coefficients
/// involving at most one delayed factor survive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCoefficients<T> {
    pub xi_y: T,
    pub xi_z: T,
    pub xi_xy: T,
    pub xi_xz: T,
    pub xi_yy: T,
    pub xi_yz: T,
    pub xi_zz: T,
    pub xi_xyy: T,
    pub xi_xyz: T,
    pub xi_xzz: T,
    pub xi_yyz: T,
    pub xi_yzz: T,
    pub xi_yyy: T,
    pub xi_zzz: T,
}

/// Evaluates all Taylor coefficients for the given parameters and their
/// equilibrium.
pub fn taylor_coefficients<T: Real>(
    p: &ModelParams<T>,
    eq: &Equilibrium<T>,
) -> Result<TaylorCoefficients<T>> {
    let total = p.total_delay();
    let zero = T::zero();
    if !p.has_queue_feedback() {
        let xi_y = -p.a / total;
        return Ok(TaylorCoefficients {
            xi_y,
            xi_z: xi_y,
            xi_xy: xi_y / eq.r_star,
            xi_xz: xi_y / eq.r_star,
            xi_yy: zero,
            xi_yz: zero,
            xi_zz: zero,
            xi_xyy: zero,
            xi_xyz: zero,
            xi_xzz: zero,
            xi_yyz: zero,
            xi_yzz: zero,
            xi_yyy: zero,
            xi_zzz: zero,
        });
    }

    let half_cap = p.capacity / cast::<T>(2.0);
    if !(eq.r_star > zero && eq.r_star < half_cap) {
        return Err(Error::Degenerate {
            reason: format!(
                "equilibrium rate {} outside (0, C/2) = (0, {}); equilibrium does not match b > 0",
                eq.r_star, half_cap
            ),
        });
    }

    let rho = eq.rho_star;
    let one_minus = T::one() - rho;
    let two = cast::<T>(2.0);
    let three = cast::<T>(3.0);

    let xi_y = -p.a * (T::one() + rho) / total;
    // In b, C, R* form these read −a/(τ√(bCR*)) and −a/(τ bCR*); the
    // equilibrium identity √(bCR*) = C(1−ρ*)/σ turns them into the ρ* forms
    // below, which also stay exact for σ² ≠ 1.
    let xi_yy = -p.a / (total * p.capacity * one_minus);
    let xi_yyy = -p.a / (total * p.capacity * p.capacity * one_minus * one_minus);

    Ok(TaylorCoefficients {
        xi_y,
        xi_z: xi_y,
        xi_xy: xi_y / eq.r_star,
        xi_xz: xi_y / eq.r_star,
        xi_yy,
        xi_yz: two * xi_yy,
        xi_zz: xi_yy,
        xi_xyy: xi_yy / eq.r_star,
        xi_xyz: two * xi_yy / eq.r_star,
        xi_xzz: xi_yy / eq.r_star,
        xi_yyz: three * xi_yyy,
        xi_yzz: three * xi_yyy,
        xi_yyy,
        xi_zzz: xi_yyy,
    })
}
