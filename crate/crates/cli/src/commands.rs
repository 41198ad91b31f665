//! Subcommand implementations. Every input is validated before any
//! computation starts; validation problems are usage errors.

use rayon::prelude::*;
use serde_json::{json, Value};

use rotkey::channel::{honest_stats, k_is_valid, max_k, ChannelModel, ObservedStats};
use rotkey::keyrate::{
    asymptotic_gain, finite_rate, finite_rate_with_stats, optimize_gamma, optimize_mu, scan_eps, threshold_eps,
    FiniteRateOptions, KeyRateResult,
};
use rotkey::montecarlo::{compare, simulate as run_simulation, simulate_logged, SimConfig, Verdict};
use rotkey::operators::{verify_closed_forms, CLOSED_FORM_TOL, IDENTITY_TOL};
use rotkey::source::{default_n_max, poisson_dist, verify_state_consistency_perturbed, FOCK_ORACLE_MAX_N, STATE_TOL};
use rotkey::ProtocolParams;

use crate::args::{AsymptoticArgs, Format, RateArgs, ScanArgs, SimulateArgs, ThresholdArgs, VerifyArgs};
use crate::output::{Outcome, Table};
use crate::range::{parse_range, AutoOr};
use crate::CliError;

fn usage(e: rotkey::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: rotkey::Error) -> CliError {
    CliError::Failure(e.to_string())
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required flag {flag}")))
}

fn protocol(m: Option<usize>, l: Option<usize>, double_even: bool) -> Result<ProtocolParams, CliError> {
    let p = ProtocolParams::new(require(m, "--M")?, require(l, "--L")?).map_err(usage)?;
    p.with_doubling(double_even).map_err(usage)
}

fn resolve_k(params: &ProtocolParams, k: Option<AutoOr<usize>>) -> Result<usize, CliError> {
    match k.unwrap_or(AutoOr::Auto) {
        AutoOr::Auto => Ok(max_k(params)),
        AutoOr::Value(k) if k_is_valid(params, k) => Ok(k),
        AutoOr::Value(k) => Err(CliError::Usage(format!(
            "K = {k} is not admissible for (M, L) = ({}, {}); the largest is {}",
            params.m(),
            params.l(),
            max_k(params)
        ))),
    }
}

fn params_json(p: &ProtocolParams) -> Value {
    json!({ "M": p.m(), "L": p.l(), "double_even": p.double_even() })
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn status(pass: bool) -> String {
    if pass { "pass" } else { "FAIL" }.to_string()
}

pub fn verify(args: VerifyArgs) -> Result<Outcome, CliError> {
    let ms = args.m.unwrap_or_else(|| vec![4, 5, 6, 8]);
    let ls = args.l.unwrap_or_else(|| vec![1, 2]);
    let phis = args.phi.unwrap_or_else(|| vec![0.0, 0.3, -0.7, 1.9, std::f64::consts::FRAC_PI_2]);
    let mus = args.mu.unwrap_or_else(|| vec![0.2, 0.5]);
    let nmax = match (args.nmax, args.perturb) {
        (Some(n), _) => Some(n),
        (None, Some(_)) => Some(6),
        (None, None) => None,
    };
    if let Some(n) = nmax {
        if n > FOCK_ORACLE_MAX_N {
            return Err(CliError::Usage(format!("--nmax must be at most {FOCK_ORACLE_MAX_N}, got {n}")));
        }
    }
    let mut cases = Vec::new();
    for &m in &ms {
        for &l in &ls {
            if 2 * l <= m {
                cases.push(ProtocolParams::new(m, l).map_err(usage)?);
            }
        }
    }
    if cases.is_empty() {
        return Err(CliError::Usage("no (M, L) pair with 2L <= M in the given lists".into()));
    }
    let dists = mus
        .iter()
        .map(|&mu| poisson_dist(mu, default_n_max(mu)).map(|d| (mu, d)))
        .collect::<rotkey::Result<Vec<_>>>()
        .map_err(usage)?;

    let mut table = Table::new(&["check", "M", "L", "param", "metric", "value", "tolerance", "status"]);
    let mut records = Vec::new();
    let mut all = true;
    let mut add = |table: &mut Table, check: &str, p: &ProtocolParams, param: String, metric: &str, value: f64, tol: f64| {
        let pass = value <= tol;
        all &= pass;
        table.push(vec![
            check.into(),
            p.m().to_string(),
            p.l().to_string(),
            param.clone(),
            metric.into(),
            format!("{value:.3e}"),
            format!("{tol:.0e}"),
            status(pass),
        ]);
        records.push(json!({ "check": check, "M": p.m(), "L": p.l(), "param": param, "metric": metric, "value": value, "tolerance": tol, "pass": pass }));
    };
    for p in &cases {
        let report = verify_closed_forms(p, &phis);
        let phases = format!("{} phases", phis.len());
        add(&mut table, "operators", p, phases.clone(), "block_deviation", report.max_deviation(), CLOSED_FORM_TOL);
        add(&mut table, "operators", p, phases, "leakage", report.max_leakage(), IDENTITY_TOL);
        if let Some(n) = nmax {
            for (mu, dist) in &dists {
                let r = verify_state_consistency_perturbed(p, &dist.truncated(n), n, args.perturb).map_err(failure)?;
                let param = format!("mu={mu} nmax={n}");
                add(&mut table, "state", p, param.clone(), "projection", r.projection_deviation, STATE_TOL);
                add(&mut table, "state", p, param.clone(), "rotation", r.rotation_deviation, STATE_TOL);
                add(&mut table, "state", p, param, "fock_weights", r.weights_deviation, 1e-12);
            }
        }
    }
    Ok(Outcome { json: json!({ "checks": records, "pass": all }), table, default_format: None, success: all })
}

fn rate_row(table: &mut Table, p: &ProtocolParams, r: &KeyRateResult) {
    table.push(vec![
        format!("{:?}", r.mode).to_lowercase(),
        p.m().to_string(),
        p.l().to_string(),
        opt_str(r.k),
        opt_str(r.mu),
        opt_str(r.gamma),
        r.e_bit.to_string(),
        r.e_ph.to_string(),
        r.bracket.to_string(),
        r.gain.to_string(),
    ]);
}

const RATE_HEADER: [&str; 10] = ["mode", "M", "L", "K", "mu", "gamma", "e_bit", "e_ph", "bracket", "gain"];

pub fn rate(args: RateArgs) -> Result<Outcome, CliError> {
    let p = protocol(args.m, args.l, args.double_even)?;
    let k = resolve_k(&p, args.k)?;
    let mu = if args.optimize_mu { AutoOr::Auto } else { require(args.mu, "--mu")? };
    if let AutoOr::Value(mu) = mu {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(CliError::Usage(format!("--mu must be positive, got {mu}")));
        }
    }
    let options = FiniteRateOptions { k: Some(k), scan_phi: args.scan_phi, ..Default::default() };
    let (result, config) = if let Some(path) = &args.stats_json {
        let AutoOr::Value(mu) = mu else {
            return Err(CliError::Usage("--stats-json needs an explicit --mu".into()));
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let stats = ObservedStats::from_json(&p, &text).map_err(usage)?;
        let r = finite_rate_with_stats(&p, mu, &stats, &options).map_err(failure)?;
        (r, json!({ "protocol": params_json(&p), "K": k, "mu": mu, "stats": stats, "scan_phi": args.scan_phi }))
    } else {
        let channel = ChannelModel::new(require(args.eta, "--eta")?, args.eps.unwrap_or(0.0)).map_err(usage)?;
        let r = match mu {
            AutoOr::Auto => optimize_mu(&p, &channel, &options),
            AutoOr::Value(mu) => finite_rate(&p, mu, &channel, &options),
        }
        .map_err(failure)?;
        let mu_echo = match mu {
            AutoOr::Auto => json!("auto"),
            AutoOr::Value(v) => json!(v),
        };
        (
            r,
            json!({ "protocol": params_json(&p), "K": k, "mu": mu_echo, "eta": channel.eta(), "eps": channel.eps(), "scan_phi": args.scan_phi }),
        )
    };
    let mut table = Table::new(&RATE_HEADER);
    rate_row(&mut table, &p, &result);
    Ok(Outcome {
        json: json!({ "config": config, "result": result }),
        table,
        default_format: Some(Format::Json),
        success: true,
    })
}

fn check_eps(eps: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&eps) {
        Ok(eps)
    } else {
        Err(CliError::Usage(format!("eps must lie in [0, 1], got {eps}")))
    }
}

pub fn asymptotic(args: AsymptoticArgs) -> Result<Outcome, CliError> {
    let p = protocol(args.m, args.l, args.double_even)?;
    let k = resolve_k(&p, args.k)?;
    let eps = check_eps(args.eps.unwrap_or(0.0))?;
    if let Some(g) = args.gamma {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(CliError::Usage(format!("--gamma must be finite and >= 0, got {g}")));
        }
    }
    let result = match args.gamma {
        Some(gamma) if !args.optimize => asymptotic_gain(&p, k, gamma, eps).map_err(failure)?,
        _ => optimize_gamma(&p, k, eps).map_err(failure)?.1,
    };
    let mu_coefficient = result.gamma.map(|g| g.powf(1.0 / k as f64));
    let mut table = Table::new(&RATE_HEADER);
    rate_row(&mut table, &p, &result);
    Ok(Outcome {
        json: json!({
            "config": { "protocol": params_json(&p), "K": k, "eps": eps, "gamma": args.gamma, "optimize": args.gamma.is_none() || args.optimize },
            "result": result,
            "mu_coefficient": mu_coefficient,
        }),
        table,
        default_format: Some(Format::Json),
        success: true,
    })
}

pub fn scan(args: ScanArgs) -> Result<Outcome, CliError> {
    let p = protocol(args.m, args.l, args.double_even)?;
    let k = resolve_k(&p, args.k)?;
    let eps_values = parse_range(&require(args.eps_range, "--eps-range")?)?;
    for &e in &eps_values {
        check_eps(e)?;
    }
    let rows = scan_eps(&p, k, &eps_values).map_err(failure)?;
    let mut table = Table::new(&["eps", "gamma_star", "bracket", "gain"]);
    for r in &rows {
        table.push(vec![r.eps.to_string(), r.gamma_star.to_string(), r.bracket.to_string(), r.gain.to_string()]);
    }
    Ok(Outcome {
        json: json!({ "config": { "protocol": params_json(&p), "K": k }, "rows": rows }),
        table,
        default_format: Some(Format::Csv),
        success: true,
    })
}

pub fn threshold(args: ThresholdArgs) -> Result<Outcome, CliError> {
    let jobs: Vec<(usize, f64)> = match (args.theta, args.m, args.l) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::Usage("give either --Theta or --M/--L, not both".into()));
        }
        (Some(thetas), None, None) => {
            let Some(AutoOr::Value(k)) = args.k else {
                return Err(CliError::Usage("--Theta needs an explicit --K".into()));
            };
            thetas.iter().map(|t| (k, t.0)).collect()
        }
        (None, m, l) => {
            let p = protocol(m, l, false)?;
            vec![(resolve_k(&p, args.k)?, p.theta())]
        }
    };
    for &(k, theta) in &jobs {
        if k < 1 || !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) || ((k - 1) as f64 * theta).cos() <= 1e-12 {
            return Err(CliError::Usage(format!("need K >= 1, Theta in (0, pi/2] and cos((K-1)Theta) > 0 (K = {k}, Theta = {theta})")));
        }
    }
    let values = jobs
        .par_iter()
        .map(|&(k, theta)| threshold_eps(k, theta))
        .collect::<rotkey::Result<Vec<f64>>>()
        .map_err(failure)?;
    let mut table = Table::new(&["K", "Theta", "eps_star"]);
    let mut rows = Vec::new();
    for (&(k, theta), &eps) in jobs.iter().zip(&values) {
        table.push(vec![k.to_string(), theta.to_string(), eps.to_string()]);
        rows.push(json!({ "K": k, "Theta": theta, "eps_star": eps }));
    }
    Ok(Outcome { json: json!({ "rows": rows }), table, default_format: Some(Format::Csv), success: true })
}

pub fn simulate(args: SimulateArgs) -> Result<Outcome, CliError> {
    let p = protocol(args.m, args.l, args.double_even)?;
    let channel = ChannelModel::new(require(args.eta, "--eta")?, args.eps.unwrap_or(0.0)).map_err(usage)?;
    let config = SimConfig::new(p, require(args.mu, "--mu")?, channel, args.pulses.unwrap_or(1_000_000), args.seed.unwrap_or(0))
        .map_err(usage)?;
    let result = match &args.event_log {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            simulate_logged(&config, std::io::BufWriter::new(file)).map_err(failure)?
        }
        None => run_simulation(&config).map_err(failure)?,
    };
    let report = if args.compare {
        let analytic = honest_stats(&p, config.mu, &channel).map_err(failure)?;
        Some(compare(&result, &analytic))
    } else {
        None
    };
    let c = &result.counts;
    let f = &result.frequencies;
    let mut table = Table::new(&[
        "pulses", "detected", "conclusive", "conclusive_errors", "mirrored_conclusive", "mirrored_errors", "eta_d_hat",
        "r_con_hat", "r_bit_hat", "verdict",
    ]);
    table.push(vec![
        c.pulses.to_string(),
        c.detected.to_string(),
        c.conclusive.to_string(),
        c.conclusive_errors.to_string(),
        opt_str(c.mirrored_conclusive),
        opt_str(c.mirrored_errors),
        f.eta_d_hat.to_string(),
        f.r_con_hat.to_string(),
        f.r_bit_hat.to_string(),
        report.map(|r| format!("{:?}", r.verdict).to_lowercase()).unwrap_or_default(),
    ]);
    let success = report.is_none_or(|r| r.verdict != Verdict::Fail);
    let mut json = serde_json::to_value(&result).map_err(|e| CliError::Failure(e.to_string()))?;
    if let Some(r) = report {
        json["compare"] = serde_json::to_value(r).map_err(|e| CliError::Failure(e.to_string()))?;
    }
    Ok(Outcome { json, table, default_format: Some(Format::Json), success })
}
