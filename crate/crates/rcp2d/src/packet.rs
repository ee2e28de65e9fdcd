//! Discrete-event packet-level simulation of a single bottleneck link under
//! explicit rate control.
//!
//! Poisson sources in two (or more) round-trip-time classes send fixed-size
//! packets into a FIFO queue drained at deterministic rate `C`. Every
//! `update_interval` the router re-computes the per-flow rate from the
//! measured arrival rate and the instantaneous queue occupancy,
//!
//! ```text
//! R ← R · (1 + κ·a·Δ/(C_eff·T̄) · (C_eff − ŷ − b·C·q̂))
//! ```
//!
//! with `C_eff = C` when queue feedback is active (`b > 0`) and `C_eff = γC`
//! when the controller works on rate mismatch alone (`b = 0`). The freshly
//! stamped rate reaches each source one round-trip after the update, so the
//! closed loop realizes the same two-delay structure the fluid model
//! integrates, with the measured occupancy standing in for the analytic
//! stationary mean queue.
//!
//! Every run is reproducible: each source draws inter-arrival times from its
//! own counter-based stream seeded from `rng_seed` plus the source index,
//! and simultaneous events are ordered by a fixed type priority and then by
//! insertion order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::{Error, Result};

/// Queue occupancy above which a run is declared overflowed.
const OVERFLOW_PKTS: u64 = 1_000_000;

/// A single bottleneck experiment: sources, link, and controller settings.
///
/// Times are in milliseconds and rates in packets per millisecond
/// throughout; packets have constant size 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Link capacity in packets/ms.
    pub capacity: f64,
    /// Per-source round-trip time; the length is the number of sources.
    pub rtts: Vec<f64>,
    /// Controller gain.
    pub a: f64,
    /// Queue-feedback weight; 0 selects the rate-mismatch-only controller.
    pub b: f64,
    /// Target utilization for the rate-mismatch-only controller.
    pub gamma: f64,
    /// Bifurcation multiplier on the update gain.
    pub kappa: f64,
    /// Router recompute period Δ; also the trace sampling period.
    pub update_interval: f64,
    /// Run length in ms.
    pub sim_duration: f64,
    /// Base seed; source `i` draws from a stream seeded `rng_seed + i`.
    pub rng_seed: u64,
    /// Starting per-flow rate; defaults to the fair share of the target load.
    pub initial_rate: Option<f64>,
    /// Exponential smoothing weight in (0, 1] applied to the measured
    /// arrival rate; 1 uses each interval's average directly.
    pub load_smoothing: f64,
}

impl NetworkConfig {
    /// Controller with queue feedback (`b > 0`), sources split half and half
    /// between the two round-trip times.
    pub fn with_queue_feedback(
        capacity: f64,
        n_sources: usize,
        tau1: f64,
        tau2: f64,
        a: f64,
        b: f64,
        kappa: f64,
        sim_duration: f64,
    ) -> Self {
        NetworkConfig {
            capacity,
            rtts: half_and_half(n_sources, tau1, tau2),
            a,
            b,
            gamma: 1.0,
            kappa,
            update_interval: (tau1 + tau2) / 2.0,
            sim_duration,
            rng_seed: 0,
            initial_rate: None,
            load_smoothing: 1.0,
        }
    }

    /// Rate-mismatch-only controller (`b = 0`) targeting utilization γ,
    /// sources split half and half between the two round-trip times.
    pub fn rate_mismatch_only(
        capacity: f64,
        n_sources: usize,
        tau1: f64,
        tau2: f64,
        a: f64,
        gamma: f64,
        kappa: f64,
        sim_duration: f64,
    ) -> Self {
        NetworkConfig {
            capacity,
            rtts: half_and_half(n_sources, tau1, tau2),
            a,
            b: 0.0,
            gamma,
            kappa,
            update_interval: (tau1 + tau2) / 2.0,
            sim_duration,
            rng_seed: 0,
            initial_rate: None,
            load_smoothing: 1.0,
        }
    }

    /// Same configuration with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Same configuration with an explicit starting per-flow rate.
    pub fn with_initial_rate(mut self, rate: f64) -> Self {
        self.initial_rate = Some(rate);
        self
    }

    /// Same configuration with an explicit per-source RTT assignment.
    pub fn with_rtts(mut self, rtts: Vec<f64>) -> Self {
        self.rtts = rtts;
        self
    }

    pub fn n_sources(&self) -> usize {
        self.rtts.len()
    }

    /// Mean round-trip time across sources, the controller's T̄.
    pub fn mean_rtt(&self) -> f64 {
        self.rtts.iter().sum::<f64>() / self.rtts.len() as f64
    }

    /// Effective capacity the controller steers toward: `C` with queue
    /// feedback, `γC` without.
    fn effective_capacity(&self) -> f64 {
        if self.b > 0.0 {
            self.capacity
        } else {
            self.gamma * self.capacity
        }
    }

    /// Equilibrium per-flow fair share of the target load.
    fn fair_share(&self) -> f64 {
        let rho = if self.b > 0.0 {
            (4.0 + self.b - (self.b * self.b + 8.0 * self.b).sqrt()) / 4.0
        } else {
            self.gamma
        };
        rho * self.capacity / self.rtts.len() as f64
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("capacity", self.capacity)?;
        positive("a", self.a)?;
        positive("kappa", self.kappa)?;
        positive("update_interval", self.update_interval)?;
        positive("sim_duration", self.sim_duration)?;
        if self.rtts.is_empty() {
            return Err(Error::InvalidParameter {
                name: "rtts",
                reason: "need at least one source".to_string(),
            });
        }
        if self.rtts.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "rtts",
                reason: "every round-trip time must be positive and finite".to_string(),
            });
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("must be nonnegative, got {}", self.b),
            });
        }
        if self.b == 0.0 && !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must lie in (0, 1] when b = 0, got {}", self.gamma),
            });
        }
        if !(self.load_smoothing > 0.0 && self.load_smoothing <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "load_smoothing",
                reason: format!("must lie in (0, 1], got {}", self.load_smoothing),
            });
        }
        if let Some(r0) = self.initial_rate {
            positive("initial_rate", r0)?;
        }
        Ok(())
    }

    /// Runs the experiment to completion (or overflow).
    pub fn run(&self) -> Result<PacketTrace> {
        self.validate()?;
        Simulation::new(self).run()
    }
}

fn half_and_half(n_sources: usize, tau1: f64, tau2: f64) -> Vec<f64> {
    (0..n_sources)
        .map(|i| if i < n_sources / 2 { tau1 } else { tau2 })
        .collect()
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketOutcome {
    /// Ran for the full configured duration.
    Completed,
    /// The queue exceeded a million packets at time `t` and the run stopped.
    QueueOverflow { t: f64 },
}

/// State of the system at one sampling instant (every `update_interval`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// Sample time in ms.
    pub t: f64,
    /// Packets in the system, the one in service included.
    pub queue_pkts: u64,
    /// Per-flow rate just stamped by the router, packets/ms.
    pub rate: f64,
    /// Measured aggregate arrival rate over the preceding interval.
    pub arrivals_per_ms: f64,
    /// Packets arrived since the start of the run.
    pub cum_arrivals: u64,
    /// Packets fully served since the start of the run.
    pub cum_departures: u64,
}

/// Result of one packet-level run.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketTrace {
    /// One sample per update interval, starting with the initial state.
    pub samples: Vec<TraceSample>,
    pub outcome: PacketOutcome,
    /// Mean offered load over the second half of the run, as a fraction of
    /// capacity.
    pub utilization: f64,
    pub packets_arrived: u64,
    pub packets_departed: u64,
    /// How often the per-flow rate was pinned at its floor of `1e−6·C/n`.
    pub clamp_count: u64,
}

/// Queue-occupancy statistics over the second half of a trace, where the
/// transient has died out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationMetrics {
    pub mean: f64,
    pub peak: f64,
    pub peak_to_peak: f64,
    /// Root-mean-square deviation from the window mean. Peak-to-peak is an
    /// extreme statistic and jitters with the seed near the noise floor; the
    /// rms deviation orders runs by sustained swing much more reliably.
    pub rms: f64,
}

/// Summarizes the post-transient queue behavior of a run.
pub fn oscillation_metrics(trace: &PacketTrace) -> OscillationMetrics {
    let window = &trace.samples[trace.samples.len() / 2..];
    if window.is_empty() {
        return OscillationMetrics {
            mean: 0.0,
            peak: 0.0,
            peak_to_peak: 0.0,
            rms: 0.0,
        };
    }
    let mut lo = window[0].queue_pkts;
    let mut hi = lo;
    let mut sum = 0.0;
    for s in window {
        lo = lo.min(s.queue_pkts);
        hi = hi.max(s.queue_pkts);
        sum += s.queue_pkts as f64;
    }
    let mean = sum / window.len() as f64;
    let var = window
        .iter()
        .map(|s| {
            let d = s.queue_pkts as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / window.len() as f64;
    OscillationMetrics {
        mean,
        peak: hi as f64,
        peak_to_peak: (hi - lo) as f64,
        rms: var.sqrt(),
    }
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    ServiceCompletion,
    PacketArrival { source: usize, version: u64 },
    RateUpdate,
    FeedbackDelivery { source: usize, rate: f64 },
}

impl EventKind {
    /// Priority for simultaneous events; lower runs first.
    fn priority(&self) -> u8 {
        match self {
            EventKind::ServiceCompletion => 0,
            EventKind::PacketArrival { .. } => 1,
            EventKind::RateUpdate => 2,
            EventKind::FeedbackDelivery { .. } => 3,
        }
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl Eq for Event {}

impl Ord for Event {
    /// Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.priority().cmp(&self.kind.priority()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Source {
    rate: f64,
    rtt: f64,
    /// Bumped on every applied rate change; pending arrivals scheduled under
    /// an older version are stale and dropped, which re-draws the next
    /// arrival from the new intensity (exact for a Poisson process by
    /// memorylessness).
    version: u64,
    rng: ChaCha8Rng,
}

impl Source {
    /// Exponential inter-arrival time at the source's current intensity.
    fn next_gap(&mut self) -> f64 {
        // Top 53 bits mapped into (0, 1], so ln never sees zero.
        let u = ((self.rng.next_u64() >> 11) + 1) as f64 * (2.0f64).powi(-53);
        -u.ln() / self.rate
    }
}

struct Simulation<'c> {
    config: &'c NetworkConfig,
    events: BinaryHeap<Event>,
    next_seq: u64,
    sources: Vec<Source>,
    router_rate: f64,
    smoothed_load: Option<f64>,
    arrivals_in_interval: u64,
    updates_done: u64,
    in_system: u64,
    cum_arrivals: u64,
    cum_departures: u64,
    clamp_count: u64,
    samples: Vec<TraceSample>,
}

impl<'c> Simulation<'c> {
    fn new(config: &'c NetworkConfig) -> Self {
        let r0 = config.initial_rate.unwrap_or_else(|| config.fair_share());
        let sources = config
            .rtts
            .iter()
            .enumerate()
            .map(|(i, &rtt)| Source {
                rate: r0,
                rtt,
                version: 0,
                rng: ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(i as u64)),
            })
            .collect();
        Simulation {
            config,
            events: BinaryHeap::new(),
            next_seq: 0,
            sources,
            router_rate: r0,
            smoothed_load: None,
            arrivals_in_interval: 0,
            updates_done: 0,
            in_system: 0,
            cum_arrivals: 0,
            cum_departures: 0,
            clamp_count: 0,
            samples: Vec::new(),
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.events.push(Event { time, seq, kind });
    }

    fn push_sample(&mut self, t: f64, arrivals_per_ms: f64) {
        self.samples.push(TraceSample {
            t,
            queue_pkts: self.in_system,
            rate: self.router_rate,
            arrivals_per_ms,
            cum_arrivals: self.cum_arrivals,
            cum_departures: self.cum_departures,
        });
    }

    fn run(mut self) -> Result<PacketTrace> {
        let c = self.config;
        let service_time = 1.0 / c.capacity;
        let rate_floor = 1e-6 * c.capacity / c.rtts.len() as f64;
        let c_eff = c.effective_capacity();
        let t_bar = c.mean_rtt();
        let delta = c.update_interval;
        let gain = c.kappa * c.a * delta / (c_eff * t_bar);

        self.push_sample(0.0, 0.0);
        for i in 0..self.sources.len() {
            let gap = self.sources[i].next_gap();
            self.schedule(gap, EventKind::PacketArrival { source: i, version: 0 });
        }
        self.schedule(delta, EventKind::RateUpdate);

        let mut outcome = PacketOutcome::Completed;
        'events: while let Some(ev) = self.events.pop() {
            let t = ev.time;
            if t > c.sim_duration {
                break;
            }
            match ev.kind {
                EventKind::ServiceCompletion => {
                    self.in_system -= 1;
                    self.cum_departures += 1;
                    if self.in_system > 0 {
                        self.schedule(t + service_time, EventKind::ServiceCompletion);
                    }
                }
                EventKind::PacketArrival { source, version } => {
                    if version != self.sources[source].version {
                        continue;
                    }
                    self.cum_arrivals += 1;
                    self.arrivals_in_interval += 1;
                    self.in_system += 1;
                    if self.in_system == 1 {
                        self.schedule(t + service_time, EventKind::ServiceCompletion);
                    }
                    if self.in_system > OVERFLOW_PKTS {
                        outcome = PacketOutcome::QueueOverflow { t };
                        break 'events;
                    }
                    let gap = self.sources[source].next_gap();
                    self.schedule(t + gap, EventKind::PacketArrival { source, version });
                }
                EventKind::RateUpdate => {
                    let measured = self.arrivals_in_interval as f64 / delta;
                    self.arrivals_in_interval = 0;
                    let w = c.load_smoothing;
                    let y_hat = match self.smoothed_load {
                        Some(prev) => w * measured + (1.0 - w) * prev,
                        None => measured,
                    };
                    self.smoothed_load = Some(y_hat);
                    let q_hat = self.in_system as f64;
                    let mismatch = c_eff - y_hat - c.b * c.capacity * q_hat;
                    let mut new_rate = self.router_rate * (1.0 + gain * mismatch);
                    if new_rate < rate_floor {
                        new_rate = rate_floor;
                        self.clamp_count += 1;
                    }
                    self.router_rate = new_rate;
                    for i in 0..self.sources.len() {
                        let rtt = self.sources[i].rtt;
                        self.schedule(
                            t + rtt,
                            EventKind::FeedbackDelivery { source: i, rate: new_rate },
                        );
                    }
                    self.push_sample(t, measured);
                    self.updates_done += 1;
                    self.schedule(
                        delta * (self.updates_done + 1) as f64,
                        EventKind::RateUpdate,
                    );
                }
                EventKind::FeedbackDelivery { source, rate } => {
                    let s = &mut self.sources[source];
                    if rate != s.rate {
                        s.rate = rate;
                        s.version += 1;
                        let version = s.version;
                        let gap = self.sources[source].next_gap();
                        self.schedule(t + gap, EventKind::PacketArrival { source, version });
                    }
                }
            }
        }

        let utilization = {
            let mid = &self.samples[self.samples.len() / 2];
            let last = self.samples.last().expect("initial sample always present");
            let span = last.t - mid.t;
            if span > 0.0 {
                (last.cum_arrivals - mid.cum_arrivals) as f64 / (c.capacity * span)
            } else {
                0.0
            }
        };

        Ok(PacketTrace {
            utilization,
            packets_arrived: self.cum_arrivals,
            packets_departed: self.cum_departures,
            clamp_count: self.clamp_count,
            outcome,
            samples: self.samples,
        })
    }
}
