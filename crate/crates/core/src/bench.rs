//! Experiment harness: prep and memory sweeps with ε_L statistics, the
//! prep-noise proxy tuning, and the table reproduction checks.

use std::time::Instant;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuitsmith::{build_memory_circuit, Channel, Circuit, Instruction, PrepPolicy};
use crate::codeforge::{CodeError, Csd};
use crate::compiler::{injection_histogram, CompileError, GeneratorSet, InjectionKind};
use crate::decoder::{decode, DecodeError, DecoderConfig, DecodingProblem};
use crate::distance::estimate_distance;
use crate::liftgate::{
    find_swap_transversal_gates, g_tau_generators, group_closure, group_order, lift_circuit, logical_action,
    logical_global_s, logical_s, sp_order, lift_example_rows, LiftError, LogicalAction,
};
use crate::noisesim::{
    extract_dem, memory_experiment, prep_experiment, sample, NoiseModel, PrepNoiseProxy,
    Shot, SimError,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("unknown code {0}")]
    UnknownCode(String),
}

/// Printed parameters of one constructible code row.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CodeRow {
    pub seed: &'static str,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub double_d: usize,
    pub q_max: usize,
    pub g_tau: u64,
}

pub const CODE_ROWS: [CodeRow; 4] = [
    CodeRow { seed: "c422", n: 16, k: 4, d: 4, double_d: 2, q_max: 8, g_tau: 216 },
    CodeRow { seed: "c513", n: 20, k: 2, d: 6, double_d: 3, q_max: 8, g_tau: 18 },
    CodeRow { seed: "c833", n: 32, k: 6, d: 6, double_d: 3, q_max: 16, g_tau: 1008 },
    CodeRow { seed: "c1244", n: 48, k: 8, d: 8, double_d: 4, q_max: 16, g_tau: 2160 },
];

pub fn code_row(seed: &str) -> Result<CodeRow, BenchError> {
    CODE_ROWS.iter().copied().find(|r| r.seed == seed).ok_or_else(|| BenchError::UnknownCode(seed.to_string()))
}

// ---------------------------------------------------------------------------
// Statistics

/// `1 - (1 - p_L)^{1/m}`.
#[must_use]
pub fn epsilon(p_l: f64, m: usize) -> f64 {
    1.0 - (1.0 - p_l).powf(1.0 / m as f64)
}

/// Delta-method standard deviation of `epsilon(F/S, m)` for a binomial
/// failure count.
#[must_use]
pub fn epsilon_stddev(failures: u64, shots: u64, m: usize) -> f64 {
    if shots == 0 {
        return 0.0;
    }
    let p = failures as f64 / shots as f64;
    let sigma = (p * (1.0 - p) / shots as f64).sqrt();
    let slope = (1.0 - p).powf(1.0 / m as f64 - 1.0) / m as f64;
    slope * sigma
}

/// One-sided 95% upper bound on a binomial rate (Clopper-Pearson by
/// bisection).
#[must_use]
pub fn rate_upper_bound(failures: u64, shots: u64) -> f64 {
    if shots == 0 {
        return 1.0;
    }
    if failures == 0 {
        return 1.0 - 0.05f64.powf(1.0 / shots as f64);
    }
    // P(X <= F | p) = 0.05 via a normal-approximation-free bisection on
    // the binomial CDF in log space.
    let cdf = |p: f64| -> f64 {
        let n = shots as f64;
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        let mut log_c = 0.0;
        let mut total = 0.0;
        for i in 0..=failures {
            if i > 0 {
                log_c += ((n - i as f64 + 1.0) / i as f64).ln();
            }
            total += (log_c + i as f64 * lp + (n - i as f64) * lq).exp();
        }
        total
    };
    let (mut lo, mut hi) = (failures as f64 / shots as f64, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) > 0.05 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepPoint {
    pub p: f64,
    pub shots: u64,
    /// Shots that passed circuit postselection and heavy-error
    /// postselection; the denominator of `p_l`.
    pub accepted: u64,
    pub failures: u64,
    pub p_l: f64,
    pub epsilon: f64,
    pub stddev: f64,
    /// 95% upper bound on `epsilon`.
    pub epsilon_upper: f64,
    pub p_prime: Option<f64>,
    pub seed: u64,
}

impl SweepPoint {
    #[must_use]
    pub fn acceptance(&self) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.accepted as f64 / self.shots as f64
        }
    }

    fn new(p: f64, shots: u64, accepted: u64, failures: u64, m: usize, seed: u64) -> Self {
        let p_l = if accepted == 0 { 0.0 } else { failures as f64 / accepted as f64 };
        Self {
            p,
            shots,
            accepted,
            failures,
            p_l,
            epsilon: epsilon(p_l, m),
            stddev: epsilon_stddev(failures, accepted, m),
            epsilon_upper: epsilon(rate_upper_bound(failures, accepted), m),
            p_prime: None,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub code: String,
    pub n: usize,
    pub k: usize,
    pub rounds: Option<usize>,
    pub points: Vec<SweepPoint>,
    pub runtime_s: f64,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl ExperimentReport {
    #[must_use]
    pub fn p_grid(&self) -> Vec<f64> {
        self.points.iter().map(|pt| pt.p).collect()
    }

    #[must_use]
    pub fn point(&self, p: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|pt| (pt.p - p).abs() <= 1e-12 * p.max(1e-300))
    }
}

pub const CSV_HEADER: &str = "experiment,code,n,k,rounds,p,p_prime,shots,accepted,acceptance,failures,p_l,epsilon,stddev,epsilon_upper,seed";

#[must_use]
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for pt in &r.points {
            out.push_str(&format!(
                "{},{},{},{},{},{:e},{},{},{},{:.6},{},{:e},{:e},{:e},{:e},{}\n",
                r.experiment,
                r.code,
                r.n,
                r.k,
                r.rounds.map(|d| d.to_string()).unwrap_or_default(),
                pt.p,
                pt.p_prime.map(|x| format!("{x:e}")).unwrap_or_default(),
                pt.shots,
                pt.accepted,
                pt.acceptance(),
                pt.failures,
                pt.p_l,
                pt.epsilon,
                pt.stddev,
                pt.epsilon_upper,
                pt.seed
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Sweeps

/// Shots per point: `high` for `p >= threshold`, `low` below.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShotBudget {
    pub high: u64,
    pub low: u64,
    pub threshold: f64,
}

impl Default for ShotBudget {
    fn default() -> Self {
        Self { high: 100_000, low: 1_000_000, threshold: 1e-3 }
    }
}

impl ShotBudget {
    #[must_use]
    pub fn fixed(shots: u64) -> Self {
        Self { high: shots, low: shots, threshold: 0.0 }
    }

    #[must_use]
    pub fn shots(&self, p: f64) -> u64 {
        if p >= self.threshold {
            self.high
        } else {
            self.low
        }
    }
}

pub const DEFAULT_P_GRID: [f64; 4] = [3e-4, 1e-3, 2e-3, 3e-3];

/// Seed of sweep point `j` of code `i`.
#[must_use]
pub fn point_seed(seed: u64, code: usize, point: usize) -> u64 {
    seed ^ ((code as u64) << 40) ^ ((point as u64) << 20)
}

/// Decodes shots in parallel: returns `(kept, failures)` where shots
/// discarded by heavy-error postselection are not kept. A wrong
/// observable or an inconsistent syndrome is a failure.
pub fn count_failures(problem: &DecodingProblem, shots: &[Shot], cfg: &DecoderConfig) -> Result<(u64, u64), BenchError> {
    let results: Vec<(bool, bool)> = shots
        .par_iter()
        .map(|s| {
            let out = decode(problem, &s.detectors, cfg)?;
            Ok((out.postselected, !out.consistent || out.observables != s.observables))
        })
        .collect::<Result<_, DecodeError>>()?;
    let kept = results.iter().filter(|r| !r.0).count() as u64;
    let failures = results.iter().filter(|r| !r.0 && r.1).count() as u64;
    Ok((kept, failures))
}

/// One prep point: acceptance by postselection detectors and decoded
/// failures over the whole circuit including the destructive readout.
pub fn prep_point(
    csd: &Csd,
    p: f64,
    shots: u64,
    policy: &PrepPolicy,
    cfg: &DecoderConfig,
    seed: u64,
) -> Result<SweepPoint, BenchError> {
    let samples = prep_experiment(csd, policy, &NoiseModel::new(p), shots as usize, seed)?;
    let problem = DecodingProblem::from_dem(&samples.dem)?;
    let (kept, failures) = count_failures(&problem, &samples.accepted, cfg)?;
    Ok(SweepPoint::new(p, shots, kept, failures, csd.code.k(), seed))
}

pub fn run_prep_sweep(
    codes: &[Csd],
    grid: &[f64],
    budget: &ShotBudget,
    policy: &PrepPolicy,
    cfg: &DecoderConfig,
    seed: u64,
) -> Result<Vec<ExperimentReport>, BenchError> {
    codes
        .iter()
        .enumerate()
        .map(|(i, csd)| {
            let start = Instant::now();
            let points = grid
                .iter()
                .enumerate()
                .map(|(j, &p)| prep_point(csd, p, budget.shots(p), policy, cfg, point_seed(seed, i, j)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ExperimentReport {
                experiment: "prep".into(),
                code: csd.name.clone(),
                n: csd.code.n,
                k: csd.code.k(),
                rounds: None,
                points,
                runtime_s: start.elapsed().as_secs_f64(),
                seed,
                config: serde_json::json!({ "policy": policy, "decoder": cfg, "budget": budget }),
            })
        })
        .collect()
}

/// How the ancilla-prep noise `p′` is set at each physical `p`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum ProxyChoice {
    /// `p′ = ratio · p`.
    Ratio(f64),
    Fixed(f64),
}

impl ProxyChoice {
    #[must_use]
    pub fn p_prime(&self, p: f64) -> f64 {
        match *self {
            Self::Ratio(r) => r * p,
            Self::Fixed(x) => x,
        }
    }
}

/// Exponent `k·d` of the memory ε, where the block holds `2k` logical
/// qubits (the prep ε uses `2k`).
#[must_use]
pub fn memory_normalization(logical_qubits: usize, rounds: usize) -> usize {
    (logical_qubits / 2).max(1) * rounds
}

pub fn memory_point(
    csd: &Csd,
    rounds: usize,
    p: f64,
    p_prime: f64,
    shots: u64,
    cfg: &DecoderConfig,
    seed: u64,
) -> Result<SweepPoint, BenchError> {
    let proxy = PrepNoiseProxy { p_prime, meas_flip: p };
    let samples = memory_experiment(csd, rounds, &NoiseModel::new(p), &proxy, shots as usize, seed)?;
    let problem = DecodingProblem::from_dem(&samples.dem)?;
    let (kept, failures) = count_failures(&problem, &samples.samples, cfg)?;
    let mut pt = SweepPoint::new(p, shots, kept, failures, memory_normalization(csd.code.k(), rounds), seed);
    pt.p_prime = Some(p_prime);
    Ok(pt)
}

/// Memory sweep with `d` rounds per code; `proxies[i]` sets the ancilla
/// noise of code `i`.
pub fn run_memory_sweep(
    codes: &[Csd],
    grid: &[f64],
    budget: &ShotBudget,
    proxies: &[ProxyChoice],
    cfg: &DecoderConfig,
    seed: u64,
) -> Result<Vec<ExperimentReport>, BenchError> {
    assert_eq!(codes.len(), proxies.len());
    codes
        .iter()
        .zip(proxies)
        .enumerate()
        .map(|(i, (csd, proxy))| {
            let start = Instant::now();
            let rounds = code_row(&csd.name)?.d;
            let points = grid
                .iter()
                .enumerate()
                .map(|(j, &p)| memory_point(csd, rounds, p, proxy.p_prime(p), budget.shots(p), cfg, point_seed(seed, i, j)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ExperimentReport {
                experiment: "memory".into(),
                code: csd.name.clone(),
                n: csd.code.n,
                k: csd.code.k(),
                rounds: Some(rounds),
                points,
                runtime_s: start.elapsed().as_secs_f64(),
                seed,
                config: serde_json::json!({ "proxy": proxy, "decoder": cfg, "budget": budget }),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Prep-noise proxy

/// Noiseless `|0̄⟩`, depolarizing `p′` on every data qubit, then the same
/// noiseless readout as the memory circuit.
#[must_use]
pub fn prep_proxy_circuit(csd: &Csd, p_prime: f64) -> Circuit {
    let mut pc = build_memory_circuit(csd, 0, 0.0, 0.0);
    let noise = (0..csd.code.n).map(|q| Instruction::Noise(Channel::Depolarize1 { p: p_prime, q }));
    pc.circuit.instructions.splice(pc.readout_start..pc.readout_start, noise);
    pc.circuit
}

/// Decoded prep ε of the proxy state.
pub fn proxy_point(csd: &Csd, p_prime: f64, shots: u64, cfg: &DecoderConfig, seed: u64) -> Result<SweepPoint, BenchError> {
    let dem = extract_dem(&prep_proxy_circuit(csd, p_prime))?;
    let problem = DecodingProblem::from_dem(&dem)?;
    let samples = sample(&dem, shots as usize, seed);
    let (kept, failures) = count_failures(&problem, &samples, cfg)?;
    let mut pt = SweepPoint::new(0.0, shots, kept, failures, csd.code.k(), seed);
    pt.p_prime = Some(p_prime);
    Ok(pt)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProxyTuning {
    pub code: String,
    pub p: f64,
    pub target_epsilon: f64,
    pub p_prime: f64,
    pub proxy_epsilon: f64,
    pub relative_error: f64,
}

/// Bisection in `log p′` for a proxy ε of `target`. The proxy ε is
/// monotone in `p′` up to sampling noise; the same seed is reused so the
/// noise is shared between steps.
pub fn tune_p_prime(
    csd: &Csd,
    p: f64,
    target: f64,
    shots: u64,
    cfg: &DecoderConfig,
    seed: u64,
) -> Result<ProxyTuning, BenchError> {
    let (mut lo, mut hi) = (1e-6f64.ln(), 0.1f64.ln());
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..14 {
        let mid = 0.5 * (lo + hi);
        let pt = proxy_point(csd, mid.exp(), shots, cfg, seed)?;
        let rel = (pt.epsilon - target).abs() / target;
        if rel < best.0 {
            best = (rel, mid.exp(), pt.epsilon);
        }
        if rel < 0.02 {
            break;
        }
        if pt.epsilon < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ProxyTuning {
        code: csd.name.clone(),
        p,
        target_epsilon: target,
        p_prime: best.1,
        proxy_epsilon: best.2,
        relative_error: best.0,
    })
}

/// Default `p′/p` per code, from `csd tune` at `p = 10⁻³` (see README).
#[must_use]
pub fn default_proxy(seed: &str) -> ProxyChoice {
    ProxyChoice::Ratio(match seed {
        "c422" => 2.90,
        "c513" => 5.14,
        "c833" => 5.10,
        "c1244" => 9.22,
        _ => 1.0,
    })
}

/// `ε_memory / ε_prep` helper for reports sharing a `p`.
#[must_use]
pub fn epsilon_ratio(memory: &SweepPoint, prep: &SweepPoint) -> f64 {
    memory.epsilon / prep.epsilon
}

// ---------------------------------------------------------------------------
// Table reproduction

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TableCheck {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl TableCheck {
    fn new(name: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        let (expected, actual) = (expected.to_string(), actual.to_string());
        let pass = expected == actual;
        Self { name: name.into(), expected, actual, pass }
    }
}

fn actions(csd: &Csd) -> Result<Vec<LogicalAction>, BenchError> {
    let seed_gates = find_swap_transversal_gates(&csd.seed, 1 << 24)?;
    Ok(g_tau_generators(&seed_gates, &csd.tau, &csd.code, &csd.layout)?.into_iter().map(|g| g.action).collect())
}

/// Construction, distance, gate-group, lift-example and injection checks
/// against the printed values.
pub fn reproduce_tables(distance_trials: usize, seed: u64) -> Result<Vec<TableCheck>, BenchError> {
    let mut out = Vec::new();
    for row in CODE_ROWS {
        let csd = Csd::from_seed(row.seed)?;
        let name = |what: &str| format!("{}/{what}", row.seed);
        out.push(TableCheck::new(name("n"), row.n, csd.code.n));
        out.push(TableCheck::new(name("k"), row.k, csd.code.k()));
        out.push(TableCheck::new(name("q_max"), row.q_max, csd.q_max()));
        out.push(TableCheck::new(name("d"), row.d, estimate_distance(&csd.code, distance_trials, seed).d));
        out.push(TableCheck::new(name("double_d"), row.double_d, estimate_distance(&csd.double, distance_trials, seed).d));
    }
    for seed_name in ["c422", "c513"] {
        let row = code_row(seed_name)?;
        let csd = Csd::from_seed(seed_name)?;
        let acts = actions(&csd)?;
        out.push(TableCheck::new(format!("{seed_name}/g_tau"), row.g_tau, group_closure(&acts, 1_000_000)?.order));
        let t = csd.code.k();
        let mut with_s = acts.clone();
        with_s.push(logical_s(t, crate::liftgate::default_injection_qubit(t)));
        out.push(TableCheck::new(format!("{seed_name}/g_tau+S"), sp_order(t), group_order(&with_s, seed)?));
        if seed_name == "c422" {
            let mut global = acts.clone();
            global.push(logical_global_s(t));
            out.push(TableCheck::new("c422/g_tau+global_S", BigUint::from(1_625_702_400u64), group_order(&global, seed)?));
        }
    }
    let c = Csd::from_seed("c422")?;
    for row in lift_example_rows() {
        let double = logical_action(&row.double, &c.double);
        let mut ok = double.is_ok();
        if let (Some(seed), Ok(_)) = (&row.seed, &double) {
            ok &= logical_action(seed, &c.seed).is_ok() && lift_circuit(seed, &c.tau).ok().as_ref() == Some(&row.double);
        }
        if let (Some(phys), Ok(d)) = (&row.csd, &double) {
            ok &= logical_action(phys, &c.code).ok().as_ref() == Some(d);
        }
        out.push(TableCheck::new(format!("lift/{}", row.label), true, ok));
    }
    let csd = Csd::from_seed("c513")?;
    let free = {
        let seed_gates = find_swap_transversal_gates(&csd.seed, 1 << 24)?;
        g_tau_generators(&seed_gates, &csd.tau, &csd.code, &csd.layout)?
    };
    let t = csd.code.k();
    let q = crate::liftgate::default_injection_qubit(t);
    for (label, kinds) in [("S", vec![InjectionKind::S(q)]), ("S+sqrtX", vec![InjectionKind::S(q), InjectionKind::SqrtX(q)])] {
        let gens = GeneratorSet::new(free.clone(), kinds.iter().map(|k| k.injection(t)).collect())?;
        let hist = injection_histogram(&gens)?;
        let max = hist.keys().max().copied().unwrap_or(0);
        out.push(TableCheck::new(format!("c513/injections[{label}]/max"), 4, max));
        out.push(TableCheck::new(format!("c513/injections[{label}]/median<=2"), true, histogram_median(&hist) <= 2));
    }
    Ok(out)
}

/// Median of a histogram `value -> count` (the lower median).
#[must_use]
pub fn histogram_median(hist: &std::collections::BTreeMap<usize, u64>) -> usize {
    let total: u64 = hist.values().sum();
    let mut seen = 0;
    for (&v, &c) in hist {
        seen += c;
        if 2 * seen >= total {
            return v;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisesim::{epsilon_memory, epsilon_prep};

    #[test]
    fn epsilon_formulas() {
        assert_eq!(epsilon(0.0, 8), 0.0);
        let e = epsilon(0.1, 4);
        assert!(((1.0 - e).powi(4) - 0.9).abs() < 1e-12);
        assert!((epsilon(0.1, 8) - epsilon_memory(0.1, 4, 2)).abs() < 1e-15);
        assert!((epsilon(0.1, 4) - epsilon_prep(0.1, 4)).abs() < 1e-15);
        assert_eq!(memory_normalization(4, 4), 8);
        assert_eq!(memory_normalization(2, 6), 6);
    }

    #[test]
    fn stddev_matches_finite_difference() {
        let (f, s, m) = (37u64, 10_000u64, 16usize);
        let p = f as f64 / s as f64;
        let sigma = (p * (1.0 - p) / s as f64).sqrt();
        let h = 1e-7;
        let slope = (epsilon(p + h, m) - epsilon(p - h, m)) / (2.0 * h);
        assert!((epsilon_stddev(f, s, m) - slope * sigma).abs() < 1e-9);
        assert_eq!(epsilon_stddev(0, 100, 4), 0.0);
    }

    #[test]
    fn upper_bound_brackets_rate() {
        assert!((rate_upper_bound(0, 1000) - 0.002991).abs() < 1e-5);
        // Clopper-Pearson one-sided 95%: F = 5 of 1000 gives about 0.01051.
        let ub = rate_upper_bound(5, 1000);
        assert!((ub - 0.01051).abs() < 2e-4, "{ub}");
        assert!(rate_upper_bound(50, 1000) > 0.05);
    }

    #[test]
    fn zero_noise_memory_point() {
        let csd = Csd::from_seed("c422").unwrap();
        let pt = memory_point(&csd, 2, 0.0, 0.0, 200, &DecoderConfig::default(), 1).unwrap();
        assert_eq!((pt.failures, pt.accepted, pt.epsilon), (0, 200, 0.0));
        let pt = prep_point(&csd, 0.0, 200, &PrepPolicy::default(), &DecoderConfig::default(), 1).unwrap();
        assert_eq!((pt.failures, pt.accepted), (0, 200));
    }

    #[test]
    fn proxy_epsilon_grows_with_p_prime() {
        let csd = Csd::from_seed("c422").unwrap();
        let cfg = DecoderConfig::default();
        let lo = proxy_point(&csd, 2e-3, 20_000, &cfg, 5).unwrap();
        let hi = proxy_point(&csd, 2e-2, 20_000, &cfg, 5).unwrap();
        assert!(lo.epsilon < hi.epsilon);
        assert_eq!(proxy_point(&csd, 0.0, 100, &cfg, 5).unwrap().failures, 0);
    }

    #[test]
    fn sweeps_are_reproducible() {
        let csd = vec![Csd::from_seed("c422").unwrap()];
        let cfg = DecoderConfig::default();
        let budget = ShotBudget::fixed(2000);
        let a = run_prep_sweep(&csd, &[2e-3], &budget, &PrepPolicy::default(), &cfg, 9).unwrap();
        let b = run_prep_sweep(&csd, &[2e-3], &budget, &PrepPolicy::default(), &cfg, 9).unwrap();
        assert_eq!(a[0].points, b[0].points);
        let csv = reports_to_csv(&a);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(CSV_HEADER));
    }
}
