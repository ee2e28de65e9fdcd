//! Stability and Hopf bifurcation analysis for a rate control protocol
//! operating over two heterogeneous round-trip delays.
//!
//! A single bottleneck of capacity `C` serves flows split into two RTT
//! classes `τ1` and `τ2`. The router advertises one fair rate `R(t)` and
//! adjusts it from the delayed aggregate load and (optionally) a queue
//! penalty:
//!
//! ```text
//! dR/dt = κ a R(t) / (C T̄) · (C − y(t) − b C p(y(t))),   y(t) = R(t−τ1) + R(t−τ2)
//! ```
//!
//! with mean RTT `T̄ = (τ1+τ2)/2` and Brownian mean-queue approximation
//! `p(y) = y σ²/(2(C−y))`. Setting `b = 0` drops the queue term and targets
//! utilization `γ` instead. The dimensionless knob `κ` scales the whole
//! right-hand side; `κ = 1` is the protocol as deployed, and pushing `κ`
//! across its critical value `κc` drives the system through a Hopf
//! bifurcation.
//!
//! The crate answers three questions about that bifurcation:
//!
//! * **where** it happens: characteristic-root analysis, the exact stability
//!   boundary, `κc`, and the crossing speed `α′(0)` ([`stability`]);
//! * **what kind** it is: center-manifold reduction to the first Lyapunov
//!   coefficient `c1(0)`, the direction number `μ2`, and closed-form
//!   criticality curves in the phase `ϑ = πτ1/(τ1+τ2)` ([`hopf`]);
//! * **what it looks like**: delay-differential trajectories with amplitude
//!   and period extraction ([`fluid`]) and a discrete-event packet simulator
//!   of the same bottleneck ([`packet`]).
//!
//! Analysis code is generic over the scalar type through the [`Real`] trait;
//! `f64` aliases for the main types live at the crate root. Rates are in
//! packets per millisecond and delays in milliseconds throughout the
//! examples, but nothing depends on the choice of units.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive};

pub mod fluid;
pub mod hopf;
pub mod model;
pub mod packet;
pub mod stability;

pub use fluid::{amplitude_sweep, extract_cycle_metrics, integrate, CycleMetrics, Outcome, SimConfig, SweepPoint, TraceSeries};
pub use hopf::{criticality_map, f_tilde, g_tilde_mu2, inner_products, normal_form, Criticality, CriticalityPoint, NormalForm};
pub use model::{equilibrium, mean_queue, rho_to_b, taylor_coefficients, Equilibrium, ModelParams, TaylorCoefficients};
pub use packet::{oscillation_metrics, NetworkConfig, OscillationMetrics, PacketOutcome, PacketTrace, TraceSample};
pub use stability::{characteristic_derivative, characteristic_residual, critical_kappa, hopf_frequency, is_stable, rightmost_root_scan, transversality, HopfPoint, SearchBox, StabilityVerdict};

/// Scalar type the analysis layer is generic over (`f32`, `f64`, ...).
///
/// Bundles the floating-point, constant, and conversion bounds every
/// numeric routine here needs; blanket-implemented for anything that
/// satisfies them.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
pub(crate) fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Converts the working scalar into `f64` for diagnostics.
pub(crate) fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Errors produced by model construction, analysis, and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its valid domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: String,
    },

    /// The queue model p(y) = yσ²/(2(C−y)) is singular at or above capacity.
    #[error("queue model singular at or above capacity (y = {y}, C = {capacity})")]
    QueueSingular { y: f64, capacity: f64 },

    /// Inputs are internally inconsistent or sit on a structural degeneracy.
    #[error("degenerate parameters: {reason}")]
    Degenerate { reason: String },

    /// The center-manifold solve hit a (near-)resonant denominator.
    #[error("resonant denominator in center-manifold solve (|denominator| = {magnitude:.3e})")]
    Resonance { magnitude: f64 },

    /// The integrator produced a non-finite state.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A trace neither settled nor escaped within the configured horizon.
    #[error("trace inconclusive at t_end = {t_end}: {reason}; extend t_end")]
    Inconclusive { t_end: f64, reason: String },

    /// The root scan found nothing while the closed-form verdict is unstable.
    #[error("root scan found no roots although the stability criterion reports instability")]
    OracleDisagreement,
}

/// Convenience alias for results carrying [`Error`].
pub type Result<T> = std::result::Result<T, Error>;

/// [`model::ModelParams`] specialized to `f64`.
pub type ModelParams64 = model::ModelParams<f64>;
/// [`model::Equilibrium`] specialized to `f64`.
pub type Equilibrium64 = model::Equilibrium<f64>;
/// [`model::TaylorCoefficients`] specialized to `f64`.
pub type TaylorCoefficients64 = model::TaylorCoefficients<f64>;
/// [`stability::HopfPoint`] specialized to `f64`.
pub type HopfPoint64 = stability::HopfPoint<f64>;
/// [`stability::StabilityVerdict`] specialized to `f64`.
pub type StabilityVerdict64 = stability::StabilityVerdict<f64>;
/// [`hopf::NormalForm`] specialized to `f64`.
pub type NormalForm64 = hopf::NormalForm<f64>;
/// [`fluid::SimConfig`] specialized to `f64`.
pub type SimConfig64 = fluid::SimConfig<f64>;
/// [`fluid::TraceSeries`] specialized to `f64`.
pub type TraceSeries64 = fluid::TraceSeries<f64>;
