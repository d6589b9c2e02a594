//! Acceptance suite. Each test prints one `criterion N ... PASS|FAIL` line
//! and then asserts, so `cargo test --test acceptance -- --nocapture`
//! shows the full table.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crn_sim::channel::{evolve_channel, rayleigh_cdf, sample_channel, ChannelParams};
use crn_sim::controller::{gain_from_theta, ControllerKind};
use crn_sim::dynamics::{exact_phi_rho_nu, predict_sir_recursion, ErrorSystem};
use crn_sim::estimator::{
    default_window, update_w_min_norm, utility, window_residuals, BasisKind, EstimatorParams,
    HistoryWindow, Sample, TimeRegression,
};
use crn_sim::network::{compute_sir, interference, Case, NetworkState};
use crn_sim::riccati::backward_riccati;
use crn_sim::sim::{run_scenario, write_csv, ScenarioConfig, Simulation, StepReport};

use common::{controller_config, drive_single_user, static_user_network, OWN_GAIN};

fn report(
    id: u32,
    name: &str,
    pass: bool,
    elapsed: Duration,
    limit: Option<Duration>,
    detail: &str,
) {
    let timing = match limit {
        Some(l) => format!("{:.2}s (limit {}s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id} {name}: {verdict} [{timing}] {detail}");
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed < Duration::from_secs(secs)
}

#[test]
fn criterion_1_oracle_gain_recovery() {
    let start = Instant::now();
    let horizon = 300;
    let config = controller_config(ControllerKind::Fhaodpa, horizon);
    let est = config.estimator.clone();
    let trace = drive_single_user(config, 0, static_user_network(0.05));
    let sys = ErrorSystem::new(0.0, OWN_GAIN);
    let oracle = backward_riccati(&sys.a, &sys.b, &est.q, est.s, &est.p_n, horizon).unwrap();

    let mut worst = 0.0f64;
    let mut missing = 0;
    for k in horizon - 75..horizon {
        match trace.outputs[k].diagnostics.gain {
            Some(g) => {
                let scale = oracle.k[k].norm();
                worst = worst.max((g - oracle.k[k]).amax() / scale);
            }
            None => missing += 1,
        }
    }
    let elapsed = start.elapsed();
    let pass = missing == 0 && worst < 0.05 && within(elapsed, 10);
    report(
        1,
        "oracle gain recovery",
        pass,
        elapsed,
        Some(Duration::from_secs(10)),
        &format!("max relative gain error {worst:.3e} over last 75 steps, {missing} steps without a gain"),
    );
    assert!(pass);
}

/// Fixed linear policy on a frozen plant. Its action-value kernel is exactly
/// affine in the time-to-go, so the regression has no misfit and every
/// residual should shrink by `alpha` per update.
fn contraction_run(alpha: f64) -> Vec<f64> {
    let horizon = 300;
    let rho = OWN_GAIN;
    let gamma = 0.1;
    let est = EstimatorParams::default();
    let basis = TimeRegression::new(3, BasisKind::Step).unwrap();
    let w = default_window(basis.len);
    let policy = |_: &Vector2<f64>| gamma / rho;
    let sys = ErrorSystem::new(0.0, rho);
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut window = HistoryWindow::new(w, est.theta_n());
    let mut weights = DMatrix::zeros(basis.len, 6);
    let mut e = Vector2::new(0.1, gamma);
    let mut combined = Vec::new();
    for k in 0..horizon - 1 {
        let nu = policy(&e) + 0.5 * gamma / rho * rng.random_range(-1.0..1.0);
        let e_next = sys.a * e + sys.b * nu;
        let z = Vector3::new(e[0], e[1], nu);
        let z_next = Vector3::new(e_next[0], e_next[1], policy(&e_next));
        window.push(Sample::new(
            &basis,
            horizon,
            (k, &z),
            (k + 1, &z_next),
            utility(&e, nu, &est.q, est.s),
        ));
        e = e_next;
        if window.len() < w {
            continue;
        }
        let (bellman, terminal) = window_residuals(&weights, &window, &basis);
        combined.push(bellman + terminal);
        if bellman + terminal < 1e-12 * combined[0] {
            break;
        }
        weights = update_w_min_norm(&weights, &window, &basis, alpha, 0.0).unwrap();
    }
    combined
}

#[test]
fn criterion_2_residual_contraction() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for alpha in [0.1, 0.5] {
        let c = contraction_run(alpha);
        let c0 = c[0];
        // above the round-off floor
        let live: Vec<f64> = c.iter().copied().take_while(|&x| x > 1e-9 * c0).collect();
        let worst_band = live
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let r = x / (c0 * alpha.powi(j as i32));
                r.max(1.0 / r)
            })
            .fold(1.0f64, f64::max);
        let ratios: Vec<f64> = live.windows(2).map(|p| p[1] / p[0]).collect();
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let ok_band = live.len() >= 5 && worst_band <= 3.0;
        let ok_ratio = alpha != 0.5 || (mean_ratio - 0.5).abs() <= 0.1;
        pass &= ok_band && ok_ratio;
        details.push(format!(
            "alpha {alpha}: {} steps above floor, envelope factor {worst_band:.3}, mean ratio {mean_ratio:.4}",
            live.len()
        ));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 5);
    report(
        2,
        "residual contraction",
        pass,
        elapsed,
        Some(Duration::from_secs(5)),
        &details.join("; "),
    );
    assert!(pass);
}

#[test]
fn criterion_3_terminal_constraint() {
    let start = Instant::now();
    let horizon = 300;
    let config = controller_config(ControllerKind::Fhaodpa, horizon);
    let theta_n = config.estimator.theta_n().norm();
    let trace = drive_single_user(config, 0, static_user_network(0.05));
    let fc = trace.outputs[horizon - 1]
        .diagnostics
        .terminal_residual
        .unwrap_or(f64::INFINITY);
    let elapsed = start.elapsed();
    let pass = fc < 0.01 * theta_n && within(elapsed, 5);
    report(
        3,
        "terminal constraint",
        pass,
        elapsed,
        Some(Duration::from_secs(5)),
        &format!(
            "terminal residual {fc:.3e} at k = N-1, threshold {:.3e}",
            0.01 * theta_n
        ),
    );
    assert!(pass);
}

fn reduced_preset(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        count_pu: 4,
        count_su: 10,
        horizon: 500,
        seed,
        ..ScenarioConfig::preset("paper-fig4").unwrap()
    }
}

fn run_reports(config: ScenarioConfig) -> Vec<StepReport> {
    Simulation::new(config)
        .unwrap()
        .map(|r| r.unwrap())
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

#[test]
fn criterion_4_sir_tracking() {
    let start = Instant::now();
    let config = reduced_preset(0);
    let schedule = config.schedule().unwrap();
    let reports = run_reports(config.clone());
    let mut pass = true;
    let mut details = Vec::new();
    for iv in &schedule.intervals {
        let a = (iv.start / config.sample_time).round() as usize;
        let b = (iv.end / config.sample_time).round() as usize;
        let tail = &reports[(a + b) / 2..b];
        let su = mean(tail.iter().filter_map(|r| r.record.su_sir_db));
        match iv.case {
            Case::Case1 => {
                let ok = (su + 10.0).abs() <= 1.5;
                pass &= ok;
                details.push(format!("[{a},{b}) SU {su:.2} dB"));
            }
            Case::Case2 => {
                let pu = mean(tail.iter().filter_map(|r| r.record.pu_sir_db));
                let ok = (pu + 7.0).abs() <= 1.5 && (su + 20.0).abs() <= 2.0;
                pass &= ok;
                details.push(format!("[{a},{b}) PU {pu:.2} dB SU {su:.2} dB"));
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 60);
    report(
        4,
        "SIR tracking",
        pass,
        elapsed,
        Some(Duration::from_secs(60)),
        &details.join("; "),
    );
    assert!(pass);
}

/// Five secondary links on the standard area, frozen channels, Case 1
/// throughout.
fn static_five_user(seed: u64, controller: ControllerKind) -> ScenarioConfig {
    ScenarioConfig {
        count_pu: 0,
        count_su: 5,
        horizon: 300,
        seed,
        static_channel: true,
        controller,
        schedule_breakpoints: vec![0.0, 300.0],
        schedule_cases: vec![Case::Case1],
        ..ScenarioConfig::default()
    }
}

#[test]
fn criterion_5_cost_dominance() {
    let start = Instant::now();
    let mut wins = 0;
    let mut worst_excess = 0.0f64;
    for seed in 0..20 {
        let cost = |kind| {
            run_scenario(&static_five_user(seed, kind))
                .unwrap()
                .last()
                .map(|r| r.cumulative_cost)
                .unwrap()
        };
        let (fh, base) = (
            cost(ControllerKind::Fhaodpa),
            cost(ControllerKind::Baseline),
        );
        if fh <= base {
            wins += 1;
        } else {
            worst_excess = worst_excess.max((fh - base) / base);
        }
    }
    let elapsed = start.elapsed();
    let pass = wins >= 18 && within(elapsed, 60);
    report(
        5,
        "cost dominance",
        pass,
        elapsed,
        Some(Duration::from_secs(60)),
        &format!(
            "learned cost <= baseline on {wins}/20 seeds, worst relative excess {worst_excess:.3e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_spectrum_efficiency() {
    let start = Instant::now();
    let mut violations = Vec::new();
    let mut checked = 0;
    for seed in 0..5 {
        let config = reduced_preset(seed);
        let deny = ScenarioConfig {
            deny_su_when_pu_active: true,
            ..config.clone()
        };
        let learned = run_reports(config.clone());
        let denied = run_reports(deny);
        for iv in config
            .schedule()
            .unwrap()
            .intervals
            .iter()
            .filter(|iv| iv.case == Case::Case2)
        {
            let a = (iv.start / config.sample_time).round() as usize;
            let b = (iv.end / config.sample_time).round() as usize;
            // the first half of each segment is warm-up
            for k in (a + b) / 2..b {
                checked += 1;
                let (x, y) = (
                    learned[k].record.spectrum_efficiency,
                    denied[k].record.spectrum_efficiency,
                );
                if x < y {
                    violations.push((seed, k, x, y));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations.is_empty() && within(elapsed, 30);
    let first = violations
        .first()
        .map(|(s, k, x, y)| format!(", first: seed {s} step {k} {x:.4} < {y:.4}"))
        .unwrap_or_default();
    report(
        6,
        "spectrum efficiency",
        pass,
        elapsed,
        Some(Duration::from_secs(30)),
        &format!(
            "{} of {checked} post-warm-up Case-2 steps below deny-SU{first}",
            violations.len()
        ),
    );
    assert!(pass);
}

/// One-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|p| (p[0] - m) * (p[1] - m)).sum();
    cov / var
}

#[test]
fn criterion_7_channel_statistics() {
    let start = Instant::now();
    let params = ChannelParams::default();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<_> = (0..n)
        .map(|_| sample_channel(&mut rng, 1.0, &params).unwrap())
        .collect();

    let d = ks_statistic(draws.iter().map(|s| s.fading_amplitude).collect(), |x| {
        rayleigh_cdf(x, params.rayleigh_scale)
    });
    // asymptotic 1% critical value
    let critical = 1.628 / (n as f64).sqrt();

    let zeta: Vec<f64> = draws.iter().map(|s| s.shadowing_db).collect();
    let m = zeta.iter().sum::<f64>() / n as f64;
    let var = zeta.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let target_var = params.shadowing_stddev_db.powi(2);

    let mut state = draws[0];
    let mut chain_zeta = Vec::with_capacity(n);
    let mut chain_latent = Vec::with_capacity(n);
    for _ in 0..n {
        state = evolve_channel(&state, &params, &mut rng);
        chain_zeta.push(state.shadowing_db);
        chain_latent.push(state.latent[0]);
    }
    let ac_zeta = lag1_autocorrelation(&chain_zeta);
    let ac_latent = lag1_autocorrelation(&chain_latent);

    let elapsed = start.elapsed();
    let pass = d < critical
        && (var - target_var).abs() <= 0.05 * target_var
        && (ac_zeta - params.correlation).abs() <= 0.02
        && (ac_latent - params.correlation).abs() <= 0.02
        && within(elapsed, 10);
    report(
        7,
        "channel statistics",
        pass,
        elapsed,
        Some(Duration::from_secs(10)),
        &format!(
            "KS {d:.4e} (critical {critical:.4e}), shadowing variance {var:.3} vs {target_var}, lag-1 autocorrelation {ac_zeta:.4}/{ac_latent:.4} vs {}",
            params.correlation
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_dynamics_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Frozen channel and only user i moving: the recursion is exact.
    let mut worst_recursion = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..6);
        let gains = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                rng.random_range(1.0..20.0)
            } else {
                rng.random_range(1e-3..0.5)
            }
        });
        let powers: Vec<f64> = (0..n).map(|_| rng.random_range(1e-4..1.0)).collect();
        let i = rng.random_range(0..n);
        let mut net = NetworkState::from_gains(&gains, &powers, 1e-13);
        let (r_k, i_k) = (compute_sir(i, &net).unwrap(), interference(i, &net));
        let mut next = powers.clone();
        next[i] = rng.random_range(1e-4..1.0);
        let c = exact_phi_rho_nu(i, &gains, &gains, &powers, &next, i_k).unwrap();
        net.nodes[i].power = next[i];
        let r_next = compute_sir(i, &net).unwrap();
        let predicted = predict_sir_recursion(r_k, c.phi, c.rho, c.nu);
        worst_recursion = worst_recursion.max((predicted - r_next).abs() / r_next.abs());
    }

    // Action-value blocks against the one-step Bellman backup, and gains.
    let est = EstimatorParams::default();
    let mut worst_bellman = 0.0f64;
    let mut gain_mismatches = 0;
    for _ in 0..1000 {
        let sys = ErrorSystem::new(rng.random_range(-1.0..1.0), rng.random_range(0.1..30.0));
        let horizon = rng.random_range(1..40);
        let sol = backward_riccati(&sys.a, &sys.b, &est.q, est.s, &est.p_n, horizon).unwrap();
        let k = rng.random_range(0..horizon);
        let e = Vector2::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.random_range(0.01..0.2),
        );
        let v: f64 = rng.sample(StandardNormal);
        let z = Vector3::new(e[0], e[1], v);
        let lhs = (z.transpose() * sol.theta[k] * z)[0];
        let next = sys.a * e + sys.b * v;
        let rhs = utility(&e, v, &est.q, est.s) + (next.transpose() * sol.g[k + 1] * next)[0];
        worst_bellman = worst_bellman.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
        if gain_from_theta(&sol.theta[k]).unwrap() != sol.k[k] {
            gain_mismatches += 1;
        }
    }

    let elapsed = start.elapsed();
    let pass = worst_recursion <= 1e-12
        && worst_bellman <= 1e-12
        && gain_mismatches == 0
        && within(elapsed, 5);
    report(
        8,
        "dynamics identities",
        pass,
        elapsed,
        Some(Duration::from_secs(5)),
        &format!(
            "recursion {worst_recursion:.2e}, Bellman block {worst_bellman:.2e}, gain mismatches {gain_mismatches}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let config = ScenarioConfig::preset("paper-fig4").unwrap();
    let csv = || {
        let mut buf = Vec::new();
        write_csv(&run_scenario(&config).unwrap(), &mut buf).unwrap();
        buf
    };
    let (a, b) = (csv(), csv());
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    let elapsed = start.elapsed();
    let pass = a == b && lines == config.horizon + 1;
    report(
        9,
        "determinism",
        pass,
        elapsed,
        None,
        &format!("{} bytes, {lines} lines, identical: {}", a.len(), a == b),
    );
    assert!(pass);
}
