//! Numbered end-to-end acceptance checks, one test per criterion so the
//! harness prints exactly one pass/fail line for each. The criteria pin
//! the reference operating points, agreement between the closed-form
//! criticality rate and the full normal-form machinery, cross-checks of
//! the stability verdict against an independent root scan, and the
//! qualitative behavior of the fluid and packet simulators.

use num_complex::Complex;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rcp2d::{
    characteristic_derivative, characteristic_residual, critical_kappa, equilibrium, f_tilde,
    g_tilde_mu2, inner_products, integrate, is_stable, normal_form, oscillation_metrics, rho_to_b,
    rightmost_root_scan, taylor_coefficients, transversality, Criticality, HopfPoint, ModelParams,
    NetworkConfig, NormalForm, Outcome, PacketOutcome, SearchBox, SimConfig,
};

const PI: f64 = std::f64::consts::PI;

/// The four concrete operating points used throughout: (a, b, C, tau1, tau2).
/// The first and third sit on the supercritical side of the crossing, the
/// second and fourth on the subcritical side.
const OPERATING_POINTS: [(f64, f64, f64, f64, f64); 4] = [
    (2.16, 0.0222, 100.0, 10.0, 70.0),
    (0.87, 0.0222, 100.0, 10.0, 15.0),
    (1.17, 0.736, 100.0, 10.0, 20.0),
    (0.95, 0.0222, 100.0, 10.0, 20.0),
];

fn operating_point(i: usize) -> ModelParams<f64> {
    let (a, b, c, tau1, tau2) = OPERATING_POINTS[i];
    ModelParams::with_queue(a, b, c, tau1, tau2, 1.0).unwrap()
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (2.0f64).powi(-53)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    uniform(rng, lo.ln(), hi.ln()).exp()
}

/// Draws a parameter set with the delay ratio controlled through the phase
/// split, mixing queue-feedback and rate-mismatch-only controllers.
fn random_params(rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let theta = uniform(rng, 0.02 * PI, 0.98 * PI);
    let tau1 = log_uniform(rng, 1.0, 100.0);
    let tau2 = tau1 * (PI - theta) / theta;
    let a = uniform(rng, 0.1, 3.0);
    let capacity = log_uniform(rng, 10.0, 1000.0);
    if unit(rng) < 0.25 {
        let gamma = uniform(rng, 0.3, 0.98);
        ModelParams::without_queue(a, gamma, capacity, tau1, tau2, 1.0).unwrap()
    } else {
        let b = log_uniform(rng, 1e-3, 50.0);
        ModelParams::with_queue(a, b, capacity, tau1, tau2, 1.0).unwrap()
    }
}

/// Rebuilds a parameter set with different delays, keeping the controller.
fn with_delays(p: &ModelParams<f64>, tau1: f64, tau2: f64) -> ModelParams<f64> {
    if p.b > 0.0 {
        ModelParams::with_queue(p.a, p.b, p.capacity, tau1, tau2, 1.0).unwrap()
    } else {
        ModelParams::without_queue(p.a, p.gamma, p.capacity, tau1, tau2, 1.0).unwrap()
    }
}

/// Runs the full pipeline at the crossing: critical gain, equilibrium,
/// cubic expansion, normal form.
fn normal_form_at_crossing(p: &ModelParams<f64>) -> (HopfPoint<f64>, NormalForm<f64>) {
    let hp = critical_kappa(p);
    let pc = p.with_kappa(hp.kappa_c);
    let eq = equilibrium(&pc);
    let coeffs = taylor_coefficients(&pc, &eq).unwrap();
    let nf = normal_form(&pc, &eq, &coeffs, &hp).unwrap();
    (hp, nf)
}

/// Newton iteration on the characteristic function from a given seed.
fn refine_root(p: &ModelParams<f64>, seed: Complex<f64>) -> Complex<f64> {
    let mut z = seed;
    for _ in 0..80 {
        let step = characteristic_residual(z, p) / characteristic_derivative(z, p);
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

#[test]
fn criterion_01_critical_gain_is_near_unity_at_the_reference_points() {
    for i in 0..3 {
        let p = operating_point(i);
        let kc = critical_kappa(&p).kappa_c;
        assert!(
            (kc - 1.000).abs() <= 0.005,
            "operating point {i}: kappa_c = {kc}, expected 1.000 +/- 0.005"
        );
    }
}

#[test]
fn criterion_02_symmetric_gain_curve_is_negative_with_the_expected_midpoint() {
    for k in 0..1000 {
        let theta = 0.001 * PI + (0.998 * PI) * (k as f64) / 999.0;
        let ft = f_tilde(theta);
        assert!(ft < 0.0, "f~({theta}) = {ft}, expected negative");
    }
    let mid = f_tilde(PI / 2.0);
    assert!(
        (mid - (-PI)).abs() <= 1e-12,
        "f~(pi/2) = {mid}, expected -pi +/- 1e-12; the four terms at \
         theta = pi/2 are -2*pi, -pi, +2 and 0, so the function equals \
         2 - 3*pi = {} there: negative, as the sweep above confirms, \
         but not -pi",
        2.0 - 3.0 * PI
    );
}

#[test]
fn criterion_03_criticality_signs_match_the_reference_map() {
    let positive = [(PI / 8.0, 0.9), (PI / 3.0, 0.55)];
    let negative = [(2.0 * PI / 5.0, 0.9), (PI / 3.0, 0.9)];
    for (theta, rho) in positive {
        let mu2 = g_tilde_mu2(theta, rho).unwrap();
        assert!(mu2 > 0.0, "mu2({theta}, {rho}) = {mu2}, expected positive");
    }
    for (theta, rho) in negative {
        let mu2 = g_tilde_mu2(theta, rho).unwrap();
        assert!(mu2 < 0.0, "mu2({theta}, {rho}) = {mu2}, expected negative");
    }
}

#[test]
fn criterion_04_closed_form_rate_matches_the_full_normal_form() {
    // The closed form fixes the gauge a*C^2*(1 + rho)*sin(theta) = 2*pi, so
    // realize each grid point with exactly that scaling and compare.
    for i in 0..20 {
        let theta = 0.05 * PI + 0.90 * PI * (i as f64) / 19.0;
        for j in 0..20 {
            let rho = 0.05 + 0.90 * (j as f64) / 19.0;
            let a = PI / (2.0 * (1.0 + rho) * theta.sin());
            let tau2 = 10.0 * (PI - theta) / theta;
            let b = rho_to_b(rho).unwrap();
            let p = ModelParams::with_queue(a, b, 2.0, 10.0, tau2, 1.0).unwrap();
            let (hp, nf) = normal_form_at_crossing(&p);
            let eq = equilibrium(&p.with_kappa(hp.kappa_c));
            let closed = g_tilde_mu2(hp.theta, eq.rho_star).unwrap();
            let rel = ((nf.mu2 - closed) / closed).abs();
            assert!(
                rel < 1e-8,
                "theta = {theta:.4}, rho = {rho:.3}: machinery mu2 = {}, closed form = {closed}, rel = {rel:.3e}",
                nf.mu2
            );
        }
    }
    // Without queue feedback the sign of Re c1(0) must agree with the
    // symmetric-gain curve everywhere, making the crossing supercritical.
    for k in 0..500 {
        let theta = 0.001 * PI + 0.998 * PI * (k as f64) / 499.0;
        let tau2 = 10.0 * (PI - theta) / theta;
        let p = ModelParams::without_queue(0.4, 0.95, 100.0, 10.0, tau2, 1.0).unwrap();
        let (hp, nf) = normal_form_at_crossing(&p);
        let ft = f_tilde(hp.theta);
        assert!(
            (nf.c1_0.re < 0.0) && (ft < 0.0),
            "theta = {theta:.4}: Re c1(0) = {}, f~ = {ft}, expected both negative",
            nf.c1_0.re
        );
        assert_eq!(
            nf.criticality,
            Criticality::Supercritical,
            "theta = {theta:.4}: expected a supercritical crossing"
        );
    }
}

#[test]
fn criterion_05_crossing_speed_is_positive_and_matches_root_tracking() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..500 {
        let p = random_params(&mut rng);
        let hp = critical_kappa(&p);
        let alpha = transversality(&p, &hp);
        assert!(
            alpha > 0.0,
            "case {case}: alpha'(0) = {alpha} for {p:?}"
        );

        // Track the crossing pair a small step to either side of the
        // critical gain and difference the real parts.
        let h = 1e-3;
        let seed = Complex::new(0.0, hp.omega0);
        let plus = refine_root(&p.with_kappa(hp.kappa_c * (1.0 + h)), seed);
        let minus = refine_root(&p.with_kappa(hp.kappa_c * (1.0 - h)), seed);
        let fd = (plus.re - minus.re) / (2.0 * h * hp.kappa_c);
        let rel = ((fd - alpha) / alpha).abs();
        assert!(
            rel < 1e-4,
            "case {case}: finite difference {fd} vs analytic {alpha}, rel = {rel:.3e} for {p:?}"
        );
    }
}

#[test]
fn criterion_06_margin_verdict_agrees_with_the_rightmost_root_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 200 {
        let base = random_params(&mut rng);
        let u = uniform(&mut rng, 0.8, 1.25);
        if (u - 1.0).abs() < 0.02 {
            continue;
        }
        let hp = critical_kappa(&base);
        let p = base.with_kappa(u * hp.kappa_c);
        let verdict = is_stable(&p);
        let roots = rightmost_root_scan(&p, &SearchBox::default_for(&p)).unwrap_or_else(|e| {
            panic!("case {checked}: scan failed with {e} while the margin verdict says stable = {} for {p:?}", verdict.stable)
        });
        let rightmost = roots.first();
        if verdict.stable {
            assert!(
                rightmost.map_or(true, |r| r.re < 0.0),
                "case {checked}: margin {} says stable but the scan found {rightmost:?} for {p:?}",
                verdict.margin
            );
        } else {
            let r = rightmost.unwrap_or_else(|| {
                panic!("case {checked}: margin {} says unstable but the scan found nothing for {p:?}", verdict.margin)
            });
            assert!(
                r.re > 0.0,
                "case {checked}: margin {} says unstable but the rightmost root is {r} for {p:?}",
                verdict.margin
            );
        }
        checked += 1;
    }
}

#[test]
fn criterion_07_supercritical_point_converges_below_and_cycles_above() {
    let base = operating_point(0);
    let eq = equilibrium(&base);

    let below = integrate(&SimConfig::new(base.with_kappa(0.95), 40_000.0)).unwrap();
    assert_eq!(
        below.outcome,
        Outcome::ConvergedToEquilibrium,
        "kappa = 0.95 should settle"
    );
    let r_end = *below.rates.last().unwrap();
    assert!(
        (r_end - 45.0).abs() <= 0.5,
        "kappa = 0.95 settled at R = {r_end}, expected 45 +/- 0.5"
    );

    let above = integrate(&SimConfig::new(base.with_kappa(1.05), 60_000.0)).unwrap();
    match above.outcome {
        Outcome::LimitCycle { period, .. } => assert!(
            (period - 160.0).abs() <= 8.0,
            "kappa = 1.05 cycle period = {period}, expected 160 +/- 8"
        ),
        other => panic!("kappa = 1.05 should cycle, got {other:?}"),
    }

    // Just past the crossing the squared amplitude grows linearly in
    // kappa - kappa_c; the ratio must stay flat to within 25%.
    let kc = critical_kappa(&base).kappa_c;
    let runs = [
        (1.005, 300_000.0),
        (1.010, 200_000.0),
        (1.015, 150_000.0),
        (1.020, 150_000.0),
    ];
    let mut ratios = Vec::new();
    for (kappa, t_end) in runs {
        let cfg = SimConfig::new(base.with_kappa(kappa), t_end)
            .with_dt(0.1)
            .with_history(eq.r_star * 1.05);
        let trace = integrate(&cfg).unwrap();
        match trace.outcome {
            Outcome::LimitCycle { amplitude, .. } => {
                ratios.push(amplitude * amplitude / (kappa - kc))
            }
            other => panic!("kappa = {kappa} should cycle, got {other:?}"),
        }
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(
        hi <= 1.25 * lo,
        "amplitude^2/(kappa - kappa_c) spans {lo:.1}..{hi:.1}, more than 25%"
    );
}

#[test]
fn criterion_08_subcritical_points_converge_below_and_escape_above() {
    // Escape horizons are at least 100 round-trip sums: 100*25 and 100*30.
    let cases = [
        (operating_point(1), 3_500.0, 2_500.0),
        (operating_point(3), 4_500.0, 4_000.0),
    ];
    for (p, t_converge, t_escape) in cases {
        let below = integrate(&SimConfig::new(p.with_kappa(0.95), t_converge)).unwrap();
        assert_eq!(
            below.outcome,
            Outcome::ConvergedToEquilibrium,
            "{p:?} at kappa = 0.95 should settle"
        );

        let above = integrate(&SimConfig::new(p.with_kappa(1.05), t_escape)).unwrap();
        assert!(
            matches!(above.outcome, Outcome::Escaped { .. }),
            "{p:?} at kappa = 1.05 should escape, got {:?}",
            above.outcome
        );
    }
}

#[test]
fn criterion_09_packet_runs_reproduce_the_qualitative_contrasts() {
    // Matched 95% utilization, 1 Gbps link as 125 pkt/ms, 100 sources split
    // between 100 ms and 150 ms round trips. Updates every 1 ms so the
    // discrete loop tracks the fluid limit; both runs start kicked 25%
    // above fair share.
    let with_queue = {
        let mut c =
            NetworkConfig::with_queue_feedback(125.0, 100, 100.0, 150.0, 0.85, 0.005, 1.0, 60_000.0)
                .with_seed(1)
                .with_initial_rate(1.49);
        c.update_interval = 1.0;
        c
    };
    let without_queue = {
        let mut c =
            NetworkConfig::rate_mismatch_only(125.0, 100, 100.0, 150.0, 1.6, 0.95, 1.0, 60_000.0)
                .with_seed(1)
                .with_initial_rate(1.48);
        c.update_interval = 1.0;
        c
    };
    let wq = with_queue.run().unwrap();
    let noq = without_queue.run().unwrap();
    assert_eq!(wq.outcome, PacketOutcome::Completed);
    assert_eq!(noq.outcome, PacketOutcome::Completed);

    let m_wq = oscillation_metrics(&wq);
    let m_noq = oscillation_metrics(&noq);
    assert!(
        m_wq.peak_to_peak >= 3.0 * m_noq.peak_to_peak,
        "queue swing with feedback = {} vs without = {}, expected at least 3x",
        m_wq.peak_to_peak,
        m_noq.peak_to_peak
    );

    // Sweeping the gain upward with queue feedback must not shrink the
    // sustained queue swing; rms deviation is the seed-robust statistic.
    let mut rms = Vec::new();
    let mut sweep_traces = Vec::new();
    for a in [0.2, 0.6, 1.0] {
        let mut c =
            NetworkConfig::with_queue_feedback(125.0, 100, 100.0, 150.0, a, 0.005, 1.0, 60_000.0)
                .with_seed(1);
        c.update_interval = 1.0;
        let trace = c.run().unwrap();
        assert_eq!(trace.outcome, PacketOutcome::Completed, "a = {a}");
        rms.push(oscillation_metrics(&trace).rms);
        sweep_traces.push(trace);
    }
    assert!(
        rms[0] <= rms[1] && rms[1] <= rms[2],
        "queue rms not nondecreasing across the gain sweep: {rms:?}"
    );

    // Stable-regime utilization lands within 5% of the configured target.
    let rho_star = equilibrium(&ModelParams::with_queue(
        0.2, 0.005, 125.0, 100.0, 150.0, 1.0,
    )
    .unwrap())
    .rho_star;
    assert!(
        (sweep_traces[0].utilization - rho_star).abs() <= 0.05 * rho_star,
        "utilization {} vs target {rho_star}",
        sweep_traces[0].utilization
    );
    assert!(
        (noq.utilization - 0.95).abs() <= 0.05 * 0.95,
        "utilization {} vs target 0.95",
        noq.utilization
    );

    // Every sample balances the packet ledger exactly.
    for s in sweep_traces[1].samples.iter().chain(wq.samples.iter()) {
        assert_eq!(
            s.queue_pkts,
            s.cum_arrivals - s.cum_departures,
            "conservation broken at t = {}",
            s.t
        );
    }
}

#[test]
fn criterion_10_structural_invariants_hold() {
    let b0 = ModelParams::without_queue(0.4, 0.95, 100.0, 10.0, 25.0, 1.0).unwrap();
    let sets = [operating_point(0), operating_point(1), operating_point(2), b0];
    for p in sets {
        let (hp, nf) = normal_form_at_crossing(&p);

        // Swapping the two delays changes nothing observable.
        let swapped = with_delays(&p, p.tau2, p.tau1);
        let (hs, ns) = normal_form_at_crossing(&swapped);
        assert!(
            ((hs.kappa_c - hp.kappa_c) / hp.kappa_c).abs() <= 1e-12,
            "delay swap moved kappa_c: {} vs {}",
            hs.kappa_c,
            hp.kappa_c
        );
        assert!(
            ((ns.mu2 - nf.mu2) / nf.mu2).abs() <= 1e-10,
            "delay swap moved mu2: {} vs {}",
            ns.mu2,
            nf.mu2
        );

        // Rescaling time leaves the critical gain and the direction of the
        // bifurcation alone.
        let scaled = with_delays(&p, 7.3 * p.tau1, 7.3 * p.tau2);
        let (hr, nr) = normal_form_at_crossing(&scaled);
        assert!(
            ((hr.kappa_c - hp.kappa_c) / hp.kappa_c).abs() <= 1e-12,
            "time rescale moved kappa_c: {} vs {}",
            hr.kappa_c,
            hp.kappa_c
        );
        assert_eq!(
            nr.mu2 > 0.0,
            nf.mu2 > 0.0,
            "time rescale flipped the bifurcation direction"
        );

        // Normal-form identities and the adjoint normalization.
        let c1 = nf.c1_0;
        assert!(
            (nf.mu2 * hp.alpha_prime + c1.re).abs() <= 1e-12 * c1.re.abs(),
            "mu2 * alpha' = {} vs -Re c1(0) = {}",
            nf.mu2 * hp.alpha_prime,
            -c1.re
        );
        assert!(
            (nf.beta2 - 2.0 * c1.re).abs() <= 1e-12 * c1.re.abs(),
            "beta2 = {} vs 2 Re c1(0) = {}",
            nf.beta2,
            2.0 * c1.re
        );

        let pc = p.with_kappa(hp.kappa_c);
        let eq = equilibrium(&pc);
        let coeffs = taylor_coefficients(&pc, &eq).unwrap();
        let (qq, q_qbar) = inner_products(&pc, &coeffs, &hp);
        assert!(
            (qq - Complex::new(1.0, 0.0)).norm() <= 1e-12,
            "<q*, q> = {qq}"
        );
        assert!(q_qbar.norm() <= 1e-12, "<q*, conj q> = {q_qbar}");
    }
}
