//! Event-level simulation of the honest protocol: Poisson source, lossy
//! randomly rotating channel, rotated polarizing beam splitter with two
//! photon-number-resolving detectors, and sifting.
//!
//! Pulses are grouped into fixed-size batches. Batch `i` draws from a ChaCha8
//! stream keyed by `(seed, i)`, so the result does not depend on how batches
//! are scheduled across threads.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ObservedStats};
use crate::error::{Error, Result};
use crate::protocol::ProtocolParams;

/// Pulses per independently keyed batch.
pub const BATCH_PULSES: u64 = 1 << 16;

/// |z| above which [`compare`] reports a mismatch.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub mu: f64,
    pub channel: ChannelModel,
    pub pulses: u64,
    pub seed: u64,
    /// Shift every angle of the protocol by `π·frame_offset/M`.
    #[serde(default)]
    pub frame_offset: usize,
}

impl SimConfig {
    pub fn new(params: ProtocolParams, mu: f64, channel: ChannelModel, pulses: u64, seed: u64) -> Result<Self> {
        let config = Self { params, mu, channel, pulses, seed, frame_offset: 0 };
        config.validate()?;
        Ok(config)
    }

    pub fn with_frame_offset(mut self, offset: usize) -> Self {
        self.frame_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses < 1 {
            return Err(Error::InvalidParams("need at least one pulse".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::OutOfRange(format!("intensity must be finite and >= 0, got {}", self.mu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub pulses: u64,
    pub detected: u64,
    pub conclusive: u64,
    pub conclusive_errors: u64,
    /// Conclusive events of the mirrored pool (doubling only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirrored_conclusive: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirrored_errors: Option<u64>,
}

impl Counts {
    fn add(mut self, other: Self) -> Self {
        let sum = |a: Option<u64>, b: Option<u64>| match (a, b) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
        };
        self.pulses += other.pulses;
        self.detected += other.detected;
        self.conclusive += other.conclusive;
        self.conclusive_errors += other.conclusive_errors;
        self.mirrored_conclusive = sum(self.mirrored_conclusive, other.mirrored_conclusive);
        self.mirrored_errors = sum(self.mirrored_errors, other.mirrored_errors);
        self
    }

    fn check_nesting(&self) -> Result<()> {
        let nested = self.conclusive_errors <= self.conclusive
            && self.conclusive <= self.detected
            && self.detected <= self.pulses
            && self.pulses >= 1;
        let mirrored_ok = match (self.mirrored_conclusive, self.mirrored_errors) {
            (None, None) => true,
            (Some(c), Some(e)) => e <= c && c <= self.detected && c + self.conclusive <= self.detected,
            _ => false,
        };
        if nested && mirrored_ok {
            Ok(())
        } else {
            Err(Error::Parse(format!("counts violate nesting: {self:?}")))
        }
    }
}

/// Empirical rates (or their binomial standard errors).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rates {
    pub eta_d_hat: f64,
    pub r_con_hat: f64,
    pub r_bit_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirrored_r_con_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirrored_r_bit_hat: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn binomial_se(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let p = ratio(num, den);
    (p * (1.0 - p) / den as f64).sqrt()
}

impl Rates {
    fn frequencies(c: &Counts) -> Self {
        Self {
            eta_d_hat: ratio(c.detected, c.pulses),
            r_con_hat: ratio(c.conclusive, c.detected),
            r_bit_hat: ratio(c.conclusive_errors, c.detected),
            mirrored_r_con_hat: c.mirrored_conclusive.map(|n| ratio(n, c.detected)),
            mirrored_r_bit_hat: c.mirrored_errors.map(|n| ratio(n, c.detected)),
        }
    }

    fn std_errors(c: &Counts) -> Self {
        Self {
            eta_d_hat: binomial_se(c.detected, c.pulses),
            r_con_hat: binomial_se(c.conclusive, c.detected),
            r_bit_hat: binomial_se(c.conclusive_errors, c.detected),
            mirrored_r_con_hat: c.mirrored_conclusive.map(|n| binomial_se(n, c.detected)),
            mirrored_r_bit_hat: c.mirrored_errors.map(|n| binomial_se(n, c.detected)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub counts: Counts,
    pub frequencies: Rates,
    pub std_errors: Rates,
    pub seed: u64,
}

impl SimResult {
    fn from_counts(config: SimConfig, counts: Counts) -> Self {
        Self {
            config,
            counts,
            frequencies: Rates::frequencies(&counts),
            std_errors: Rates::std_errors(&counts),
            seed: config.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Decode and check the result: counts must nest and the frequencies and
    /// standard errors must be exactly the ones implied by the counts.
    pub fn from_json(text: &str) -> Result<Self> {
        let decoded: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        decoded.config.validate()?;
        decoded.counts.check_nesting()?;
        if decoded.counts.pulses != decoded.config.pulses || decoded.seed != decoded.config.seed {
            return Err(Error::Parse("counts or seed disagree with the config echo".into()));
        }
        let expected = Self::from_counts(decoded.config, decoded.counts);
        if expected != decoded {
            return Err(Error::Parse("frequencies or std_errors disagree with counts".into()));
        }
        Ok(decoded)
    }
}

/// One simulated pulse, as written to the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseEvent {
    pub pulse_index: u64,
    pub a: u8,
    pub j: usize,
    pub n_sent: u64,
    pub n_arrived: u64,
    pub theta_prime_index: usize,
    pub d1: u64,
    pub d2: u64,
    pub detected: bool,
    pub conclusive: bool,
    pub b: Option<u8>,
    pub error: bool,
}

pub const EVENT_LOG_HEADER: &str =
    "pulse_index,a,j,n_sent,n_arrived,theta_prime_index,d1,d2,detected,conclusive,b,error";

impl PulseEvent {
    fn csv_line(&self) -> String {
        let b = self.b.map(|b| b.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.pulse_index,
            self.a,
            self.j,
            self.n_sent,
            self.n_arrived,
            self.theta_prime_index,
            self.d1,
            self.d2,
            u8::from(self.detected),
            u8::from(self.conclusive),
            b,
            u8::from(self.error)
        )
    }
}

struct Sampler {
    m: usize,
    l: usize,
    theta: f64,
    offset: f64,
    eta: f64,
    eps: f64,
    poisson: Option<Poisson<f64>>,
    mirrored: bool,
}

impl Sampler {
    fn new(config: &SimConfig) -> Result<Self> {
        let p = &config.params;
        let poisson = if config.mu > 0.0 {
            Some(Poisson::new(config.mu).map_err(|e| Error::OutOfRange(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            m: p.m(),
            l: p.l(),
            theta: p.theta(),
            offset: PI * (config.frame_offset % p.m()) as f64 / p.m() as f64,
            eta: config.channel.eta(),
            eps: config.channel.eps(),
            poisson,
            mirrored: p.double_even(),
        })
    }

    fn pulse(&self, rng: &mut ChaCha8Rng, pulse_index: u64) -> PulseEvent {
        let m = self.m;
        let a: u8 = rng.random_range(0..2);
        let j = rng.random_range(0..m);
        let n_sent = self.poisson.as_ref().map_or(0, |d| d.sample(rng) as u64);
        let n_arrived = (0..n_sent).filter(|_| rng.random::<f64>() < self.eta).count() as u64;
        let mut theta_pol = f64::from(a) * self.theta + PI * j as f64 / m as f64 + self.offset;
        if rng.random::<f64>() < self.eps {
            theta_pol += rng.random_range(0.0..PI);
        }
        let l_idx = rng.random_range(0..m);
        let theta_prime = PI * l_idx as f64 / m as f64 + self.offset;
        let p_d1 = (theta_pol - theta_prime).cos().powi(2);
        let d1 = (0..n_arrived).filter(|_| rng.random::<f64>() < p_d1).count() as u64;
        let d2 = n_arrived - d1;
        let detected = n_arrived == 1;

        let primary = [((self.l + j) % m, 0u8), (j, 1u8)];
        let half = m / 2;
        let mirror = [((self.l + j + half) % m, 0u8), ((j + half) % m, 1u8)];
        let lookup = |table: &[(usize, u8); 2]| table.iter().find(|(idx, _)| *idx == l_idx).map(|(_, b)| *b);
        let b = if !detected {
            None
        } else if d2 == 1 {
            lookup(&primary)
        } else if self.mirrored {
            lookup(&mirror)
        } else {
            None
        };
        PulseEvent {
            pulse_index,
            a,
            j,
            n_sent,
            n_arrived,
            theta_prime_index: l_idx,
            d1,
            d2,
            detected,
            conclusive: b.is_some(),
            b,
            error: b.is_some_and(|b| b != a),
        }
    }

    fn batch(&self, seed: u64, batch: u64, pulses: u64, mut sink: impl FnMut(&PulseEvent)) -> Counts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch);
        let start = batch * BATCH_PULSES;
        let end = (start + BATCH_PULSES).min(pulses);
        let mut counts = Counts {
            mirrored_conclusive: self.mirrored.then_some(0),
            mirrored_errors: self.mirrored.then_some(0),
            ..Counts::default()
        };
        for index in start..end {
            let ev = self.pulse(&mut rng, index);
            counts.pulses += 1;
            counts.detected += u64::from(ev.detected);
            if ev.conclusive {
                if ev.d2 == 1 {
                    counts.conclusive += 1;
                    counts.conclusive_errors += u64::from(ev.error);
                } else {
                    *counts.mirrored_conclusive.as_mut().expect("mirrored pool") += 1;
                    *counts.mirrored_errors.as_mut().expect("mirrored pool") += u64::from(ev.error);
                }
            }
            sink(&ev);
        }
        counts
    }
}

fn batch_count(pulses: u64) -> u64 {
    pulses.div_ceil(BATCH_PULSES)
}

/// Run the simulation; batches execute in parallel.
pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let sampler = Sampler::new(config)?;
    let per_batch: Vec<Counts> = (0..batch_count(config.pulses))
        .into_par_iter()
        .map(|b| sampler.batch(config.seed, b, config.pulses, |_| {}))
        .collect();
    let counts = per_batch.into_iter().fold(Counts::default(), Counts::add);
    Ok(SimResult::from_counts(*config, counts))
}

/// Serial run that also writes one CSV line per pulse. The returned result is
/// identical to [`simulate`] for the same config.
pub fn simulate_logged(config: &SimConfig, mut log: impl Write) -> Result<SimResult> {
    config.validate()?;
    let sampler = Sampler::new(config)?;
    let io_err = |e: std::io::Error| Error::InvalidParams(format!("event log: {e}"));
    writeln!(log, "{EVENT_LOG_HEADER}").map_err(io_err)?;
    let mut counts = Counts::default();
    let mut failure = None;
    for b in 0..batch_count(config.pulses) {
        let batch = sampler.batch(config.seed, b, config.pulses, |ev| {
            if failure.is_none() {
                if let Err(e) = writeln!(log, "{}", ev.csv_line()) {
                    failure = Some(e);
                }
            }
        });
        counts = counts.add(batch);
    }
    if let Some(e) = failure {
        return Err(io_err(e));
    }
    Ok(SimResult::from_counts(*config, counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareReport {
    pub z_eta_d: f64,
    pub z_r_con: f64,
    pub z_r_bit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_mirrored_r_con: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_mirrored_r_bit: Option<f64>,
    pub verdict: Verdict,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn from_scores(z: [f64; 3], mirrored: Option<(f64, f64)>, detected: u64) -> Self {
        let all = z.iter().copied().chain(mirrored.into_iter().flat_map(|(a, b)| [a, b]));
        let ok = all.fold(true, |ok, v| ok && v.abs() <= Z_LIMIT);
        let verdict = match (detected, ok) {
            (0, _) => Verdict::Inconclusive,
            (_, true) => Verdict::Pass,
            (_, false) => Verdict::Fail,
        };
        Self {
            z_eta_d: z[0],
            z_r_con: z[1],
            z_r_bit: z[2],
            z_mirrored_r_con: mirrored.map(|m| m.0),
            z_mirrored_r_bit: mirrored.map(|m| m.1),
            verdict,
        }
    }
}

/// z-score of an observed frequency against probability `p` over `n` trials.
fn z_score(observed: f64, p: f64, n: u64) -> f64 {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let diff = observed - p;
    if sigma > 0.0 {
        diff / sigma
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// z-scores of the simulated frequencies against analytic statistics, with σ
/// taken from the analytic probabilities. The mirrored pool, when present, is
/// compared against the same analytic fractions.
pub fn compare(sim: &SimResult, analytic: &ObservedStats) -> CompareReport {
    let c = &sim.counts;
    let f = &sim.frequencies;
    if c.detected == 0 {
        let z = z_score(f.eta_d_hat, analytic.eta_d, c.pulses);
        return CompareReport::from_scores([z, 0.0, 0.0], None, 0);
    }
    let z = [
        z_score(f.eta_d_hat, analytic.eta_d, c.pulses),
        z_score(f.r_con_hat, analytic.r_con, c.detected),
        z_score(f.r_bit_hat, analytic.r_bit, c.detected),
    ];
    let mirrored = f.mirrored_r_con_hat.zip(f.mirrored_r_bit_hat).map(|(con, bit)| {
        (z_score(con, analytic.r_con, c.detected), z_score(bit, analytic.r_bit, c.detected))
    });
    CompareReport::from_scores(z, mirrored, c.detected)
}

fn two_sample_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let sigma = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let diff = ratio(k1, n1) - ratio(k2, n2);
    if sigma > 0.0 {
        diff / sigma
    } else {
        0.0
    }
}

/// Pooled two-proportion z-test between two runs.
pub fn compare_runs(a: &SimResult, b: &SimResult) -> CompareReport {
    let (x, y) = (&a.counts, &b.counts);
    let z = [
        two_sample_z(x.detected, x.pulses, y.detected, y.pulses),
        two_sample_z(x.conclusive, x.detected, y.conclusive, y.detected),
        two_sample_z(x.conclusive_errors, x.detected, y.conclusive_errors, y.detected),
    ];
    let mirrored = match (x.mirrored_conclusive.zip(x.mirrored_errors), y.mirrored_conclusive.zip(y.mirrored_errors)) {
        (Some((c1, e1)), Some((c2, e2))) => {
            Some((two_sample_z(c1, x.detected, c2, y.detected), two_sample_z(e1, x.detected, e2, y.detected)))
        }
        _ => None,
    };
    CompareReport::from_scores(z, mirrored, x.detected.min(y.detected))
}
