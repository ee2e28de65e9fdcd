//! Fixed-step integration of the nonlinear two-delay rate dynamics, with
//! amplitude/period extraction and bifurcation sweeps over κ.
//!
//! The integrator is classical fourth-order Runge-Kutta on a uniform grid.
//! Delayed values `R(t−τj)` fall between grid points, so they are read
//! through four-point (cubic) Lagrange interpolation of the stored history;
//! both the step and the lookup are fourth-order accurate, and accuracy is
//! certified by step-halving rather than adaptive control. The delays exceed
//! the step by construction (`dt ≤ min(τ1,τ2)/50`), so every lookup lands in
//! already-computed history.
//!
//! Initial data is a constant history `R(t) = R*(1+ε)` on `[−max τ, 0]`
//! (ε = 0.01 by default). Trajectories are classified as converged, as a
//! limit cycle with measured peak-to-peak amplitude and period, or as
//! escaped once the rate leaves `[escape_lo·C, escape_hi·C]`. The exact flow
//! preserves `R > 0`, but a sub-critical excursion steepens until one step
//! overshoots; the overshooting sample is kept in the trace and stamps the
//! escape time.

use rayon::prelude::*;

use crate::model::{equilibrium, ModelParams};
use crate::{as_f64, cast, Error, Real, Result};

/// Configuration of one trajectory integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub params: ModelParams<T>,
    /// Duration of the integration.
    pub t_end: T,
    /// Step size; must satisfy `dt ≤ min(τ1, τ2)/50`.
    pub dt: T,
    /// Constant initial history; defaults to `R*(1 + 0.01)`.
    pub history: Option<T>,
    /// Fraction of the trace discarded before classification (default 0.8).
    pub transient_fraction: T,
    /// Upper escape bound as a multiple of capacity (default 10).
    pub escape_hi: T,
    /// Lower escape bound as a multiple of capacity (default 1e−9); the
    /// zero rate is an absorbing equilibrium, so reaching it is divergence.
    pub escape_lo: T,
}

impl<T: Real> SimConfig<T> {
    /// Defaults: `dt = min(τ1,τ2)/100`, perturbed-equilibrium history,
    /// transient fraction 0.8, escape bounds `[1e−9·C, 10·C]`.
    pub fn new(params: ModelParams<T>, t_end: T) -> Self {
        let dt = params.tau1.min(params.tau2) / cast::<T>(100.0);
        SimConfig {
            params,
            t_end,
            dt,
            history: None,
            transient_fraction: cast::<T>(0.8),
            escape_hi: cast::<T>(10.0),
            escape_lo: cast::<T>(1e-9),
        }
    }

    /// Same configuration with an explicit step size.
    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    /// Same configuration with an explicit constant history value.
    pub fn with_history(mut self, history: T) -> Self {
        self.history = Some(history);
        self
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let min_tau = self.params.tau1.min(self.params.tau2);
        if !(self.dt > T::zero()) || self.dt > min_tau / cast::<T>(50.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!(
                    "step must lie in (0, min(τ1,τ2)/50] = (0, {}], got {}",
                    min_tau / cast::<T>(50.0),
                    self.dt
                ),
            });
        }
        let min_t_end = cast::<T>(40.0) * self.params.total_delay();
        if self.t_end < min_t_end {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("needs t_end ≥ 40(τ1+τ2) = {min_t_end}, got {}", self.t_end),
            });
        }
        if !(self.transient_fraction >= T::zero() && self.transient_fraction < T::one()) {
            return Err(Error::InvalidParameter {
                name: "transient_fraction",
                reason: format!("must lie in [0, 1), got {}", self.transient_fraction),
            });
        }
        if !(self.escape_lo >= T::zero() && self.escape_lo < T::one() && self.escape_hi > T::one())
        {
            return Err(Error::InvalidParameter {
                name: "escape bounds",
                reason: format!(
                    "need 0 ≤ lo < 1 < hi in multiples of C, got [{}, {}]",
                    self.escape_lo, self.escape_hi
                ),
            });
        }
        if let Some(h) = self.history {
            if !(h > T::zero() && h.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "history",
                    reason: format!("must be positive and finite, got {h}"),
                });
            }
        }
        Ok(())
    }
}

/// Verdict on a finished trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    /// Post-transient variation below `1e−4·R*`.
    ConvergedToEquilibrium,
    /// Sustained oscillation with steady peak-to-peak amplitude and period.
    LimitCycle { amplitude: T, period: T },
    /// The rate left `[escape_lo·C, escape_hi·C]` at time `t`.
    Escaped { t: T },
}

/// An integrated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries<T> {
    /// Sample times starting at 0 with uniform spacing `dt`.
    pub times: Vec<T>,
    /// Rate `R(t)` at each sample.
    pub rates: Vec<T>,
    /// Queue proxy `p(y(t))` at each sample; present only with `b > 0`.
    pub queue: Option<Vec<T>>,
    /// Equilibrium rate of the integrated parameters.
    pub r_star: T,
    /// Trajectory classification.
    pub outcome: Outcome<T>,
    /// Whether the queue clamp `y ↦ min(y, C(1−1e−9))` was ever active.
    pub saturated: bool,
}

/// Steady-cycle measurements of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMetrics<T> {
    /// Mean peak-to-trough amplitude; 0 for a converged trace.
    pub amplitude: T,
    /// Mean peak spacing; `None` for a converged trace.
    pub period: Option<T>,
}

/// Four-point Lagrange interpolation over a uniform grid.
///
/// `u` is the fractional index; the stencil is `floor(u) − 1 .. floor(u) + 2`.
#[inline]
fn lagrange4<T: Real>(grid: &[T], u: T) -> T {
    let j = u.floor();
    let f = u - j;
    let j = j.to_usize().expect("lookup index is in range");
    let sixth = cast::<T>(1.0 / 6.0);
    let half = cast::<T>(0.5);
    let one = T::one();
    let two = cast::<T>(2.0);
    let cm1 = -f * (f - one) * (f - two) * sixth;
    let c0 = (f + one) * (f - one) * (f - two) * half;
    let c1 = -(f + one) * f * (f - two) * half;
    let c2 = (f + one) * f * (f - one) * sixth;
    grid[j - 1] * cm1 + grid[j] * c0 + grid[j + 1] * c1 + grid[j + 2] * c2
}

/// Integrates one trajectory.
///
/// Errors with [`Error::Integration`] if the state turns non-finite, and with
/// [`Error::Inconclusive`] if the trace neither settles, cycles steadily, nor
/// escapes within `t_end`.
pub fn integrate<T: Real>(config: &SimConfig<T>) -> Result<TraceSeries<T>> {
    config.validate()?;
    let p = &config.params;
    let eq = equilibrium(p);
    let r_star = eq.r_star;
    let dt = config.dt;
    let cap = p.capacity;

    let n_steps = (config.t_end / dt).ceil().to_usize().ok_or_else(|| Error::InvalidParameter {
        name: "t_end",
        reason: "not representable as a step count".to_string(),
    })?;
    let max_tau = p.tau1.max(p.tau2);
    let idx0 = (max_tau / dt).ceil().to_usize().unwrap() + 3;

    let h0 = config.history.unwrap_or(r_star * cast::<T>(1.01));
    let mut grid: Vec<T> = Vec::with_capacity(idx0 + n_steps + 1);
    grid.resize(idx0 + 1, h0);

    // Fractional-index offsets of the two delayed reads.
    let idx0_t = cast::<T>(idx0 as f64);
    let off1 = idx0_t - p.tau1 / dt;
    let off2 = idx0_t - p.tau2 / dt;

    let half = cast::<T>(0.5);
    let two = cast::<T>(2.0);
    let six = cast::<T>(6.0);
    let clamp_at = cap * (T::one() - cast::<T>(1e-9));
    let mut saturated = false;

    let queue_feedback = p.has_queue_feedback();
    let (target, prefactor) = if queue_feedback {
        (cap, p.kappa * p.a / (cap * p.mean_rtt()))
    } else {
        let gc = p.gamma * cap;
        (gc, p.kappa * p.a / (gc * p.mean_rtt()))
    };
    let b_cap = p.b * cap;
    let sigma_sq = p.sigma_sq;

    let rhs = |x: T, y1: T, y2: T, saturated: &mut bool| -> T {
        let w = y1 + y2;
        if queue_feedback {
            let wq = if w > clamp_at {
                *saturated = true;
                clamp_at
            } else {
                w
            };
            let queue = wq * sigma_sq / (two * (cap - wq));
            prefactor * x * (target - w - b_cap * queue)
        } else {
            prefactor * x * (target - w)
        }
    };

    let hi = config.escape_hi * cap;
    let lo = config.escape_lo * cap;
    let mut escaped_at: Option<T> = None;

    for n in 0..n_steps {
        let t_frac = cast::<T>(n as f64);
        let r_n = grid[idx0 + n];

        let y1_a = lagrange4(&grid, off1 + t_frac);
        let y2_a = lagrange4(&grid, off2 + t_frac);
        let k1 = rhs(r_n, y1_a, y2_a, &mut saturated);

        let y1_b = lagrange4(&grid, off1 + t_frac + half);
        let y2_b = lagrange4(&grid, off2 + t_frac + half);
        let k2 = rhs(r_n + half * dt * k1, y1_b, y2_b, &mut saturated);
        let k3 = rhs(r_n + half * dt * k2, y1_b, y2_b, &mut saturated);

        let y1_c = lagrange4(&grid, off1 + t_frac + T::one());
        let y2_c = lagrange4(&grid, off2 + t_frac + T::one());
        let k4 = rhs(r_n + dt * k3, y1_c, y2_c, &mut saturated);

        let r_next = r_n + dt / six * (k1 + two * (k2 + k3) + k4);
        let t_next = dt * cast::<T>((n + 1) as f64);
        if !r_next.is_finite() {
            return Err(Error::Integration {
                t: as_f64(t_next),
                reason: format!("state became non-finite from R = {r_n} in one step"),
            });
        }
        grid.push(r_next);
        if r_next >= hi || r_next <= lo {
            escaped_at = Some(t_next);
            break;
        }
    }

    let rates: Vec<T> = grid[idx0..].to_vec();
    let times: Vec<T> = (0..rates.len()).map(|n| dt * cast::<T>(n as f64)).collect();

    let queue = queue_feedback.then(|| {
        (0..rates.len())
            .map(|n| {
                let t_frac = cast::<T>(n as f64);
                let w = lagrange4(&grid, off1 + t_frac) + lagrange4(&grid, off2 + t_frac);
                let wq = w.min(clamp_at).max(T::zero());
                wq * sigma_sq / (two * (cap - wq))
            })
            .collect()
    });

    let outcome = match escaped_at {
        Some(t) => Outcome::Escaped { t },
        None => {
            match classify_window(&times, &rates, r_star, config.transient_fraction)? {
                CycleMetrics { period: Some(period), amplitude } => {
                    Outcome::LimitCycle { amplitude, period }
                }
                _ => Outcome::ConvergedToEquilibrium,
            }
        }
    };

    Ok(TraceSeries {
        times,
        rates,
        queue,
        r_star,
        outcome,
        saturated,
    })
}

/// Quadratic-refined local extrema of `series`, as `(time, value)` pairs.
fn extrema<T: Real>(times: &[T], series: &[T], maxima: bool) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let half = cast::<T>(0.5);
    let quarter = cast::<T>(0.25);
    let two = cast::<T>(2.0);
    for i in 1..series.len().saturating_sub(1) {
        let (a, b, c) = (series[i - 1], series[i], series[i + 1]);
        let is_ext = if maxima { a < b && b >= c } else { a > b && b <= c };
        if !is_ext {
            continue;
        }
        let denom = a - two * b + c;
        let (dt_off, value) = if denom.abs() > T::epsilon() * (a.abs() + b.abs() + c.abs()) {
            let delta = half * (a - c) / denom;
            (delta, b - quarter * (a - c) * delta)
        } else {
            (T::zero(), b)
        };
        let step = times[i + 1] - times[i];
        out.push((times[i] + dt_off * step, value));
    }
    out
}

/// Classifies the post-transient window: amplitude 0 (settled), a steady
/// cycle, or an [`Error::Inconclusive`] transient.
fn classify_window<T: Real>(
    times: &[T],
    rates: &[T],
    r_star: T,
    transient_fraction: T,
) -> Result<CycleMetrics<T>> {
    let start = (cast::<T>(times.len() as f64) * transient_fraction)
        .to_usize()
        .unwrap_or(0)
        .min(times.len().saturating_sub(2));
    let (times, rates) = (&times[start..], &rates[start..]);
    let t_end = as_f64(*times.last().expect("window is nonempty"));

    let mut lo = rates[0];
    let mut hi = rates[0];
    for &r in rates.iter() {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let variation = hi - lo;
    if variation < cast::<T>(1e-4) * r_star {
        return Ok(CycleMetrics {
            amplitude: T::zero(),
            period: None,
        });
    }

    // A steady cycle swings by the same amount in both halves of the
    // window; a decaying or growing transient does not, however slowly it
    // moves, so this comparison is what separates the two.
    let span = |r: &[T]| {
        let mut lo = r[0];
        let mut hi = r[0];
        for &v in r {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    };
    let v1 = span(&rates[..rates.len() / 2]);
    let v2 = span(&rates[rates.len() / 2..]);
    if (v2 - v1).abs() > cast::<T>(0.02) * v1.max(v2) {
        return Err(Error::Inconclusive {
            t_end,
            reason: format!(
                "swing changed from {} to {} across the window; still transient",
                as_f64(v1),
                as_f64(v2)
            ),
        });
    }

    let peaks = extrema(times, rates, true);
    let troughs = extrema(times, rates, false);
    if peaks.len() < 6 || troughs.len() < 5 {
        return Err(Error::Inconclusive {
            t_end,
            reason: format!(
                "variation {} above the settling threshold but only {} peaks in the window",
                as_f64(variation),
                peaks.len()
            ),
        });
    }

    let last_peaks = &peaks[peaks.len() - 6..];
    let last_troughs = &troughs[troughs.len() - 5..];
    let five = cast::<T>(5.0);
    let peak_mean = last_peaks[1..].iter().map(|&(_, v)| v).sum::<T>() / five;
    let trough_mean = last_troughs.iter().map(|&(_, v)| v).sum::<T>() / five;
    let amplitude = peak_mean - trough_mean;
    let period = (last_peaks[5].0 - last_peaks[0].0) / five;

    Ok(CycleMetrics {
        amplitude,
        period: Some(period),
    })
}

/// Measures amplitude and period over the post-transient part of a trace.
///
/// Returns amplitude 0 and no period if the window has settled to within
/// `1e−4·R*`; errors with [`Error::Inconclusive`] when the window is still
/// transient, and rejects escaped traces.
pub fn extract_cycle_metrics<T: Real>(
    trace: &TraceSeries<T>,
    transient_fraction: T,
) -> Result<CycleMetrics<T>> {
    if let Outcome::Escaped { t } = trace.outcome {
        return Err(Error::InvalidParameter {
            name: "trace",
            reason: format!("escaped at t = {t}; cycle metrics are undefined"),
        });
    }
    classify_window(&trace.times, &trace.rates, trace.r_star, transient_fraction)
}

/// How one κ in a sweep turned out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOutcome {
    Converged,
    LimitCycle,
    Escaped,
    /// Still transient after all horizon extensions.
    Inconclusive,
}

impl std::fmt::Display for SweepOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepOutcome::Converged => "converged",
            SweepOutcome::LimitCycle => "limit-cycle",
            SweepOutcome::Escaped => "escaped",
            SweepOutcome::Inconclusive => "inconclusive",
        })
    }
}

/// One row of a bifurcation diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint<T> {
    pub kappa: T,
    /// Steady peak-to-peak amplitude; 0 when converged, `None` when escaped
    /// or inconclusive.
    pub amplitude: Option<T>,
    pub period: Option<T>,
    pub outcome: SweepOutcome,
}

/// Integrates the model across `n_points` values of κ spanning
/// `kappa_range` and extracts the steady amplitude at each.
///
/// Points that are still transient after `t_end` are retried with the
/// horizon doubled, twice; whatever remains inconclusive is reported as
/// such rather than failing the sweep. Points run in parallel.
pub fn amplitude_sweep<T: Real>(
    params: &ModelParams<T>,
    kappa_range: (T, T),
    n_points: usize,
    t_end: T,
) -> Result<Vec<SweepPoint<T>>> {
    let (kappa_lo, kappa_hi) = kappa_range;
    if n_points < 2 || !(kappa_hi > kappa_lo) {
        return Err(Error::InvalidParameter {
            name: "kappa_range",
            reason: "need kappa_hi > kappa_lo and at least two points".to_string(),
        });
    }
    let step = (kappa_hi - kappa_lo) / cast::<T>((n_points - 1) as f64);
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let kappa = kappa_lo + step * cast::<T>(i as f64);
            let mut horizon = t_end;
            for attempt in 0..3 {
                let config = SimConfig::new(params.with_kappa(kappa), horizon);
                match integrate(&config) {
                    Ok(trace) => {
                        let point = match trace.outcome {
                            Outcome::ConvergedToEquilibrium => SweepPoint {
                                kappa,
                                amplitude: Some(T::zero()),
                                period: None,
                                outcome: SweepOutcome::Converged,
                            },
                            Outcome::LimitCycle { amplitude, period } => SweepPoint {
                                kappa,
                                amplitude: Some(amplitude),
                                period: Some(period),
                                outcome: SweepOutcome::LimitCycle,
                            },
                            Outcome::Escaped { .. } => SweepPoint {
                                kappa,
                                amplitude: None,
                                period: None,
                                outcome: SweepOutcome::Escaped,
                            },
                        };
                        return Ok(point);
                    }
                    Err(Error::Inconclusive { .. }) if attempt < 2 => {
                        horizon = horizon * cast::<T>(2.0);
                    }
                    Err(Error::Inconclusive { .. }) => {
                        return Ok(SweepPoint {
                            kappa,
                            amplitude: None,
                            period: None,
                            outcome: SweepOutcome::Inconclusive,
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            unreachable!("loop always returns");
        })
        .collect()
}
