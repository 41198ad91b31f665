//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rotkey::channel::{honest_stats, max_k, ChannelModel, ObservedStats};
use rotkey::keyrate::{asymptotic_gain, finite_rate, optimize_gamma, optimize_mu, threshold_eps, threshold_eps_for, FiniteRateOptions};
use rotkey::montecarlo::{compare, simulate, SimConfig};
use rotkey::operators::verify_closed_forms;
use rotkey::phase_bound::{choose_phi_prime, g_asymptotic, FiniteOptions, FiniteProblem};
use rotkey::source::{angular_weights, default_n_max, fock_oracle_weights, poisson_dist, verify_state_consistency};
use rotkey::ProtocolParams;

use common::{multinomial_difference_z, BoundData};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn params(m: usize, l: usize) -> ProtocolParams {
    ProtocolParams::new(m, l).expect("valid parameters")
}

fn run(id: usize, name: &str, limit: Option<Duration>, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
        .unwrap_or_else(|_| outcome(false, "panicked"));
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = result.pass && in_time;
    let timing = match limit {
        Some(l) => format!("{:.2} s, limit {} s", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.2} s", elapsed.as_secs_f64()),
    };
    println!("{} [{id:>2}] {name}: {} ({timing})", if pass { "PASS" } else { "FAIL" }, result.detail);
    pass
}

fn operator_oracle() -> Outcome {
    let phis = [0.0, 0.3, -0.7, 1.9, PI / 2.0];
    let mut worst_dev: f64 = 0.0;
    let mut worst_leak: f64 = 0.0;
    let mut all = true;
    let mut cases = 0;
    for m in [4, 5, 6, 8] {
        for l in [1, 2] {
            if 2 * l > m {
                continue;
            }
            let report = verify_closed_forms(&params(m, l), &phis);
            all &= report.passed();
            worst_dev = worst_dev.max(report.max_deviation());
            worst_leak = worst_leak.max(report.max_leakage());
            cases += 1;
        }
    }
    let pass = all && worst_dev <= 1e-10 && worst_leak <= 1e-12;
    outcome(pass, format!("{cases} (M,L) cases, max deviation {worst_dev:.2e}, max leakage {worst_leak:.2e}"))
}

fn state_oracle() -> Outcome {
    let n_max = 6;
    let mut pass = true;
    let (mut proj, mut rot, mut weights) = (0.0f64, 0.0f64, 0.0f64);
    for (m, l) in [(4, 1), (4, 2), (5, 1), (6, 1)] {
        for mu in [0.2, 0.5] {
            let p = params(m, l);
            let full = poisson_dist(mu, default_n_max(mu)).expect("poisson");
            let truncated = full.truncated(n_max);
            let report = verify_state_consistency(&p, &truncated, n_max).expect("state check");
            pass &= report.projection_deviation <= 1e-10 && report.rotation_deviation <= 1e-10;
            proj = proj.max(report.projection_deviation);
            rot = rot.max(report.rotation_deviation);
            // Closed form from the full distribution against the Fock oracle built at n_max.
            let closed = angular_weights(&full, m).expect("weights");
            let oracle = fock_oracle_weights(&truncated, m, n_max).expect("oracle");
            let tail: f64 = full.weights()[n_max + 1..].iter().sum::<f64>() + full.tail_mass();
            let dev = closed.t.iter().zip(&oracle.t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            pass &= dev <= 1e-12 + tail;
            let exact = report.weights_deviation;
            pass &= exact <= 1e-12;
            weights = weights.max(exact);
        }
    }
    outcome(pass, format!("projection {proj:.2e}, rotation {rot:.2e}, T_k vs Fock (same truncation) {weights:.2e}"))
}

fn optimal_intensity() -> Outcome {
    let (gamma, result) = optimize_gamma(&params(4, 1), 2, 0.0).expect("optimize");
    let root = gamma.sqrt();
    outcome((root - 1.51).abs() <= 0.02, format!("sqrt(gamma*) = {root:.4}, gain {:.5}", result.gain))
}

fn g_at_origin() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut text = Vec::new();
    for (k, theta) in [(2usize, PI / 4.0), (3, PI / 6.0), (3, PI / 5.0)] {
        let g = g_asymptotic(k, theta, 0.0, 0.0).expect("g").g_value;
        let expected = -((k - 1) as f64 * theta).cos() * theta.sin().powi(2);
        worst = worst.max((g - expected).abs());
        text.push(format!("{g:.6}"));
    }
    let g41 = g_asymptotic(2, params(4, 1).theta(), 0.0, 0.0).expect("g").g_value;
    let dev41 = (g41 + 2f64.sqrt() / 4.0).abs();
    outcome(worst <= 1e-6 && dev41 <= 1e-6, format!("g(0,0) = [{}], max deviation {:.1e}, (4,1) {dev41:.1e}", text.join(", "), worst))
}

fn scaling_exponent() -> Outcome {
    let mut pass = true;
    let mut text = Vec::new();
    for (m, k) in [(4usize, 2usize), (6, 3)] {
        let p = params(m, 1);
        let gains: Vec<f64> = [1e-4, 1e-5]
            .iter()
            .map(|&eta| {
                let channel = ChannelModel::new(eta, 0.0).expect("channel");
                optimize_mu(&p, &channel, &FiniteRateOptions::default()).expect("rate").gain
            })
            .collect();
        let slope = (gains[0] / gains[1]).log10();
        let target = (k + 1) as f64 / k as f64;
        pass &= gains[1] > 0.0 && (slope - target).abs() <= 0.05;
        text.push(format!("({m},1) slope {slope:.4} vs {target:.4}"));
    }
    outcome(pass, text.join("; "))
}

fn finite_asymptotic_consistency() -> Outcome {
    let eta = 1e-5;
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (m, k) in [(4usize, 2usize), (6, 3)] {
        let p = params(m, 1);
        let (gamma, _) = optimize_gamma(&p, k, 0.0).expect("gamma");
        let mu = (gamma * eta).powf(1.0 / k as f64);
        for eps in [0.0, 0.02] {
            let channel = ChannelModel::new(eta, eps).expect("channel");
            let stats = honest_stats(&p, mu, &channel).expect("stats");
            let rate = finite_rate(&p, mu, &channel, &FiniteRateOptions { k: Some(k), ..Default::default() }).expect("rate");
            let finite = rate.phase_bound.expect("bound").r_ph_bar / stats.r_con;
            let beta = 1.0 - p.theta().cos().powi(2) * (1.0 - eps);
            let asym = 0.5 + g_asymptotic(k, p.theta(), gamma, eps).expect("g").g_value / (2.0 * beta);
            let rel = ((finite - asym) / asym).abs();
            worst = worst.max(rel);
            pass &= rel <= 0.02;
        }
    }
    outcome(pass, format!("(4,1) and (6,1), eps in {{0, 0.02}}: max relative gap {:.3}%", 100.0 * worst))
}

fn threshold_checks() -> Outcome {
    let a = threshold_eps_for(&params(4, 1), 2).expect("threshold");
    let b = threshold_eps_for(&params(8, 2), 2).expect("threshold");
    let mut pass = (a - b).abs() <= 1e-4;
    let mut text = vec![format!("(4,1) {a:.6} vs (8,2) {b:.6}")];
    for k in [3usize, 4] {
        let centre = PI / (4.0 * (k - 1) as f64);
        let grid: Vec<f64> = (0..9)
            .map(|i| threshold_eps(k, centre * (1.0 + 0.1 * (i as f64 - 4.0))).expect("threshold"))
            .collect();
        let peak = grid[4];
        let peak_ok = grid.iter().all(|&t| t <= peak);
        pass &= peak_ok;
        text.push(format!("K={k} peak {peak:.6} at pi/{} {}", 4 * (k - 1), if peak_ok { "is max" } else { "NOT max" }));
    }
    outcome(pass, text.join("; "))
}

fn monte_carlo() -> Outcome {
    let p = params(4, 1);
    let mut pass = true;
    let mut text = Vec::new();
    for (eps, seed) in [(0.0, 11u64), (0.1, 12)] {
        let channel = ChannelModel::new(0.1, eps).expect("channel");
        let config = SimConfig::new(p, 0.1, channel, 10_000_000, seed).expect("config");
        let sim = simulate(&config).expect("simulate");
        let analytic = honest_stats(&p, 0.1, &channel).expect("stats");
        let report = compare(&sim, &analytic);
        pass &= report.passed();
        if eps == 0.0 {
            pass &= sim.counts.conclusive_errors == 0;
        }
        text.push(format!(
            "eps={eps}: z = ({:.2}, {:.2}, {:.2}), errors {}",
            report.z_eta_d, report.z_r_con, report.z_r_bit, sim.counts.conclusive_errors
        ));
    }
    outcome(pass, text.join("; "))
}

fn optimizer_honesty() -> Outcome {
    let mut cases: Vec<(ProtocolParams, f64, FiniteProblem)> = Vec::new();
    let honest = |m: usize, l: usize, mu: f64, eta: f64, eps: f64| {
        let p = params(m, l);
        let k = max_k(&p);
        let stats = honest_stats(&p, mu, &ChannelModel::new(eta, eps).unwrap()).unwrap();
        let weights = angular_weights(&poisson_dist(mu, default_n_max(mu)).unwrap(), m).unwrap();
        let phi_prime = choose_phi_prime(k, p.theta());
        (p, phi_prime, FiniteProblem::new(&p, phi_prime, &stats, &weights).unwrap())
    };
    cases.push(honest(4, 1, 0.3, 0.05, 0.0));
    cases.push(honest(4, 1, 0.05, 1e-3, 0.03));
    cases.push(honest(4, 2, 0.1, 0.2, 0.02));
    let p = params(4, 1);
    let stats = ObservedStats::from_x(&p, 0.01, 0.9).unwrap();
    cases.push((p, -0.2, FiniteProblem::from_budget(&p, -0.2, &stats, vec![2.0, 2.0, 0.3, 0.05]).unwrap()));

    let mut pass = true;
    let mut text = Vec::new();
    for (p, phi_prime, problem) in &cases {
        let data = BoundData {
            m: p.m(),
            theta: p.theta(),
            phi_prime: *phi_prime,
            x_target: problem.x_target(),
            r_con: problem.r_con(),
            budget: problem.budget().to_vec(),
        };
        let (witness, value) = problem.maximize(&FiniteOptions::default()).expect("maximize");
        let grid = data.grid_value(0.1).expect("grid has a feasible point");
        let violation = data.violation(&witness.p, &witness.x);
        let recomputed = data.bound(&witness.p, &witness.x);
        let ok = value >= grid - 1e-9 && value <= grid + 5e-3 && violation <= 1e-9 && (recomputed - value).abs() <= 1e-9;
        pass &= ok;
        text.push(format!("{:.6} vs grid {:.6}", value, grid));
    }
    outcome(pass, text.join("; "))
}

fn doubling() -> Outcome {
    let mut pass = true;
    for (m, k) in [(4usize, 2usize), (6, 3), (8, 4)] {
        let plain = params(m, 1);
        let doubled = plain.with_doubling(true).expect("even M");
        for (gamma, eps) in [(0.5, 0.0), (2.27, 0.0), (1.0, 0.01), (5.0, 0.003)] {
            let a = asymptotic_gain(&plain, k, gamma, eps).expect("gain");
            let b = asymptotic_gain(&doubled, k, gamma, eps).expect("gain");
            pass &= b.gain == 2.0 * a.gain && a.bracket == b.bracket && a.e_ph == b.e_ph;
        }
    }
    let p = params(4, 1).with_doubling(true).expect("even M");
    let config = SimConfig::new(p, 0.1, ChannelModel::new(0.1, 0.1).expect("channel"), 10_000_000, 21).expect("config");
    let sim = simulate(&config).expect("simulate");
    let c = sim.counts;
    let mirrored = c.mirrored_conclusive.expect("mirrored pool");
    let mirrored_err = c.mirrored_errors.expect("mirrored pool");
    let z_con = multinomial_difference_z(mirrored, c.conclusive, c.detected);
    let z_err = multinomial_difference_z(mirrored_err, c.conclusive_errors, c.detected);
    pass &= z_con.abs() <= 4.0 && z_err.abs() <= 4.0 && mirrored > 0;
    outcome(pass, format!("gain ratio exactly 2; mirrored vs primary z = {z_con:.2} (conclusive), {z_err:.2} (errors)"))
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run(1, "operator oracle", Some(secs(5)), operator_oracle),
        run(2, "state oracle", Some(secs(10)), state_oracle),
        run(3, "optimal intensity", Some(secs(5)), optimal_intensity),
        run(4, "g(0,0) closed form", None, g_at_origin),
        run(5, "scaling exponent", Some(secs(120)), scaling_exponent),
        run(6, "finite vs asymptotic phase error", None, finite_asymptotic_consistency),
        run(7, "threshold M-independence and peak", None, threshold_checks),
        run(8, "Monte Carlo agreement", Some(secs(60)), monte_carlo),
        run(9, "optimizer honesty", None, optimizer_honesty),
        run(10, "even-M doubling", None, doubling),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
