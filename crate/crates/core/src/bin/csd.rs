use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use csd::bench::{
    code_row, default_proxy, reports_to_csv, reproduce_tables, run_memory_sweep, run_prep_sweep, tune_p_prime,
    ExperimentReport, ProxyChoice, ShotBudget, DEFAULT_P_GRID,
};
use csd::circuitsmith::{Basis, PrepPolicy};
use csd::codeforge::{CodeJson, Csd, CssCode};
use csd::compiler::{factorize, schedule, GeneratorSet, InjectionKind, WordItem};
use csd::decoder::{decode, DecoderConfig, DecodingProblem, OsdOrder};
use csd::distance::estimate_distance;
use csd::f2core::{BitMatrix, BitVector, SymplecticMatrix};
use csd::liftgate::{default_injection_qubit, find_swap_transversal_gates, g_tau_generators, group_order, GateRecordJson};
use csd::noisesim::{sample, DetectorErrorModel};

#[derive(Parser)]
#[command(name = "csd", version, about = "Concatenated symplectic double codes")]
struct Cli {
    /// Master PRNG seed. `csd build` also takes a library seed name here.
    #[arg(long, global = true, default_value = "7")]
    seed: String,
    /// Worker threads (defaults to CSD_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `csv`, `json`, or a file path whose extension picks the format.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Seed,
    Double,
    Csd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Builds a code from the seed library and emits it as JSON.
    Build {
        /// Library seed name; `--seed <name>` works too.
        #[arg(long)]
        code: Option<String>,
        #[arg(long, value_enum, default_value = "csd")]
        level: Level,
    },
    /// Estimates the distance of a code (seed name or JSON file).
    Distance {
        #[arg(long)]
        code: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Lists the G_τ generators of a CSD code.
    Gates {
        #[arg(long)]
        code: String,
        /// Emit every generator record instead of a summary.
        #[arg(long)]
        list: bool,
    },
    /// Factorizes a logical Clifford into free gates and injections.
    Compile {
        #[arg(long)]
        code: String,
        /// JSON array of 2t bitstrings (rows of the symplectic matrix).
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value = "s")]
        injections: String,
    },
    /// Noisy state preparation sweep.
    Prep {
        #[arg(long, value_delimiter = ',', default_value = "c422")]
        code: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Fixed shots per point (default: 1e5 for p >= 1e-3, 1e6 below).
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        allow_m: usize,
        #[arg(long)]
        no_flagcilla: bool,
        #[arg(long, default_value = "z")]
        basis: String,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Memory experiment sweep with d Steane rounds.
    Memory {
        #[arg(long, value_delimiter = ',', default_value = "c422")]
        code: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long)]
        shots: Option<u64>,
        /// p′/p for the ancilla-prep proxy (default: tuned per code).
        #[arg(long)]
        p_prime_ratio: Option<f64>,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Tunes the ancilla-prep proxy p′ against the prep experiment.
    Tune {
        #[arg(long, value_delimiter = ',', default_value = "c422")]
        code: Vec<String>,
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Checks construction, distance, gate-group and compilation values.
    Reproduce {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Samples shots from a DEM file.
    Sample {
        #[arg(long)]
        dem: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Decodes a shots file against a DEM file.
    Decode {
        #[arg(long)]
        dem: PathBuf,
        /// One shot per line: detector bits, then a space and observable bits.
        #[arg(long)]
        shots: PathBuf,
        #[arg(long, default_value = "10")]
        osd_order: String,
        #[arg(long, default_value_t = 30)]
        max_iters: usize,
    },
}

#[derive(clap::Args, Clone)]
struct DecoderArgs {
    /// OSD order λ, or `full`.
    #[arg(long, default_value = "10")]
    osd_order: String,
    #[arg(long, default_value_t = 30)]
    max_iters: usize,
    /// Prior multiplier on mechanisms of triggered C4 blocks.
    #[arg(long)]
    prior_factor: Option<f64>,
    /// Discard shots with many triggered C4 blocks.
    #[arg(long)]
    heavy_postselect: bool,
}

impl DecoderArgs {
    fn config(&self, d: Option<usize>) -> Result<DecoderConfig> {
        Ok(DecoderConfig {
            max_iters: self.max_iters,
            osd_order: parse_osd_order(&self.osd_order)?,
            prior_factor: self.prior_factor,
            heavy_distance: if self.heavy_postselect { d } else { None },
        })
    }
}

fn parse_osd_order(s: &str) -> Result<OsdOrder> {
    if s.eq_ignore_ascii_case("full") {
        Ok(OsdOrder::Full)
    } else {
        Ok(OsdOrder::Order(s.parse().with_context(|| format!("bad OSD order {s}"))?))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

struct Output {
    format: Format,
    path: Option<PathBuf>,
}

impl Output {
    fn new(out: Option<&str>, default: Format) -> Self {
        match out {
            None => Self { format: default, path: None },
            Some("csv") => Self { format: Format::Csv, path: None },
            Some("json") => Self { format: Format::Json, path: None },
            Some(p) => {
                let format = match Path::new(p).extension().and_then(|e| e.to_str()) {
                    Some("csv") => Format::Csv,
                    Some("json") => Format::Json,
                    _ => default,
                };
                Self { format, path: Some(PathBuf::from(p)) }
            }
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.path {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                let r = stdout.write_all(text.as_bytes()).and_then(|()| {
                    if text.ends_with('\n') {
                        Ok(())
                    } else {
                        stdout.write_all(b"\n")
                    }
                });
                match r {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                    _ => Ok(()),
                }
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        self.emit(&serde_json::to_string_pretty(value)?)
    }

    fn reports(&self, reports: &[ExperimentReport]) -> Result<()> {
        match self.format {
            Format::Csv => self.emit(&reports_to_csv(reports)),
            Format::Json => self.json(&reports),
        }
    }
}

/// A library seed name, or a JSON file from `csd build` whose name is one.
fn load_csd(name: &str) -> Result<Csd> {
    if Path::new(name).exists() {
        let json: CodeJson = serde_json::from_str(&fs::read_to_string(name)?)?;
        return Csd::from_seed(&json.name).with_context(|| format!("{name}: code name is not a library seed"));
    }
    Ok(Csd::from_seed(name)?)
}

fn load_css(name: &str) -> Result<CssCode> {
    if Path::new(name).exists() {
        let json: CodeJson = serde_json::from_str(&fs::read_to_string(name)?)?;
        return Ok(json.to_css()?);
    }
    Ok(Csd::from_seed(name)?.code)
}

fn load_dem(path: &Path) -> Result<DetectorErrorModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(DetectorErrorModel::parse(&text)?)
}

fn bits(s: &str) -> Result<BitVector> {
    if s.is_empty() {
        return Ok(BitVector::zeros(0));
    }
    BitVector::parse(s).map_err(|e| anyhow::anyhow!("{e}"))
}

fn grid(p: &[f64]) -> Vec<f64> {
    if p.is_empty() {
        DEFAULT_P_GRID.to_vec()
    } else {
        p.to_vec()
    }
}

fn budget(shots: Option<u64>) -> ShotBudget {
    shots.map_or_else(ShotBudget::default, ShotBudget::fixed)
}

fn codes(names: &[String]) -> Result<Vec<Csd>> {
    names.iter().map(|n| load_csd(n)).collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = || -> Result<u64> { cli.seed.parse().with_context(|| format!("--seed {} is not an integer", cli.seed)) };
    let threads = cli.threads.or_else(|| std::env::var("CSD_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let out = |default| Output::new(cli.out.as_deref(), default);
    match &cli.cmd {
        Cmd::Build { code, level } => {
            let name = code.clone().unwrap_or_else(|| cli.seed.clone());
            let c = Csd::from_seed(&name)?;
            match level {
                Level::Seed => out(Format::Json).json(&serde_json::json!({
                    "name": name, "n": c.seed.n, "k": c.seed.k(),
                    "checks": c.seed.check_matrix().to_bitstrings(),
                }))?,
                Level::Double => out(Format::Json).json(&CodeJson::from_css(&name, &c.double, None))?,
                Level::Csd => out(Format::Json).json(&CodeJson::from_css(&name, &c.code, Some(&c.layout)))?,
            }
        }
        Cmd::Distance { code, trials } => {
            let c = load_css(code)?;
            let est = estimate_distance(&c, *trials, seed()?);
            out(Format::Json).json(&serde_json::json!({
                "d": est.d, "dx": est.dx, "dz": est.dz,
                "witness": est.witness.to_symplectic().to_bitstring(),
                "trials": trials, "seed": seed()?,
            }))?;
        }
        Cmd::Gates { code, list } => {
            let c = load_csd(code)?;
            let seed_gates = find_swap_transversal_gates(&c.seed, 1 << 24)?;
            let gens = g_tau_generators(&seed_gates, &c.tau, &c.code, &c.layout)?;
            if *list {
                let records: Vec<GateRecordJson> = gens.iter().map(GateRecordJson::from).collect();
                out(Format::Json).json(&records)?;
            } else {
                let acts: Vec<_> = gens.iter().map(|g| g.action.clone()).collect();
                out(Format::Json).json(&serde_json::json!({
                    "code": c.name, "generators": gens.len(),
                    "g_tau_order": group_order(&acts, seed()?)?.to_string(),
                }))?;
            }
        }
        Cmd::Compile { code, target, injections } => {
            let c = load_csd(code)?;
            let t = c.code.k();
            let rows: Vec<String> = serde_json::from_str(&fs::read_to_string(target)?)?;
            let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
            let m = SymplecticMatrix::new(
                BitMatrix::parse(2 * t, &refs).map_err(|e| anyhow::anyhow!("{e}"))?,
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            let kinds = injections
                .split(',')
                .map(|s| InjectionKind::parse(s, default_injection_qubit(t)))
                .collect::<Result<Vec<_>, _>>()?;
            let seed_gates = find_swap_transversal_gates(&c.seed, 1 << 24)?;
            let free = g_tau_generators(&seed_gates, &c.tau, &c.code, &c.layout)?;
            let gens = GeneratorSet::new(free, kinds.iter().map(|k| k.injection(t)).collect())?;
            let fact = factorize(&m, &gens)?;
            let word: Vec<serde_json::Value> = fact
                .word
                .iter()
                .map(|w| match w {
                    WordItem::Free { generators, .. } => serde_json::json!({
                        "free": generators.iter().map(|&g| gens.free[g].label.clone()).collect::<Vec<_>>()
                    }),
                    WordItem::Inject { label, .. } => serde_json::json!({ "inject": label }),
                })
                .collect();
            out(Format::Json).json(&serde_json::json!({
                "injection_count": fact.injection_count,
                "exact": fact.exact,
                "word": word,
                "schedule": schedule(&fact, &gens)?,
            }))?;
        }
        Cmd::Prep { code, p, shots, allow_m, no_flagcilla, basis, decoder } => {
            let basis = match basis.to_ascii_lowercase().as_str() {
                "z" => Basis::Z,
                "x" => Basis::X,
                other => bail!("prep basis must be z or x, got {other}"),
            };
            let policy = PrepPolicy { basis, allow_m: *allow_m, use_flagcilla: !no_flagcilla };
            let mut reports = Vec::new();
            for c in codes(code)? {
                let cfg = decoder.config(Some(code_row(&c.name)?.d))?;
                reports.extend(run_prep_sweep(&[c], &grid(p), &budget(*shots), &policy, &cfg, seed()?)?);
            }
            out(Format::Csv).reports(&reports)?;
        }
        Cmd::Memory { code, p, shots, p_prime_ratio, decoder } => {
            let mut reports = Vec::new();
            for c in codes(code)? {
                let cfg = decoder.config(Some(code_row(&c.name)?.d))?;
                let proxy = p_prime_ratio.map_or_else(|| default_proxy(&c.name), ProxyChoice::Ratio);
                reports.extend(run_memory_sweep(&[c], &grid(p), &budget(*shots), &[proxy], &cfg, seed()?)?);
            }
            out(Format::Csv).reports(&reports)?;
        }
        Cmd::Tune { code, p, shots, decoder } => {
            let mut results = Vec::new();
            for c in codes(code)? {
                let cfg = decoder.config(None)?;
                let prep = csd::bench::prep_point(&c, *p, *shots, &PrepPolicy::default(), &cfg, seed()?)?;
                let tuning = tune_p_prime(&c, *p, prep.epsilon, *shots, &cfg, seed()? ^ 1)?;
                results.push(serde_json::json!({ "prep": prep, "tuning": tuning, "ratio": tuning.p_prime / p }));
            }
            out(Format::Json).json(&results)?;
        }
        Cmd::Reproduce { trials } => {
            let checks = reproduce_tables(*trials, seed()?)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            let o = out(Format::Csv);
            if o.format == Format::Json {
                o.json(&checks)?;
            } else {
                let mut text = String::from("check,expected,actual,pass\n");
                for c in &checks {
                    text.push_str(&format!("{},{},{},{}\n", c.name, c.expected, c.actual, if c.pass { "PASS" } else { "FAIL" }));
                }
                o.emit(&text)?;
            }
            eprintln!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Sample { dem, count } => {
            let dem = load_dem(dem)?;
            let mut text = String::new();
            for s in sample(&dem, *count, seed()?) {
                text.push_str(&format!("{} {}\n", s.detectors.to_bitstring(), s.observables.to_bitstring()));
            }
            out(Format::Csv).emit(&text)?;
        }
        Cmd::Decode { dem, shots, osd_order, max_iters } => {
            let dem = load_dem(dem)?;
            let problem = DecodingProblem::from_dem(&dem)?;
            let cfg = DecoderConfig { max_iters: *max_iters, osd_order: parse_osd_order(osd_order)?, ..Default::default() };
            let mut text = String::from("shot,prediction,converged,consistent,failed\n");
            let (mut total, mut failures) = (0u64, 0u64);
            for (i, line) in fs::read_to_string(shots)?.lines().enumerate() {
                let mut parts = line.split_whitespace();
                let Some(det) = parts.next() else { continue };
                let det = bits(det)?;
                if det.len() != dem.num_detectors {
                    bail!("shot {i}: {} detector bits, DEM has {}", det.len(), dem.num_detectors);
                }
                let obs = parts.next().map(bits).transpose()?;
                let o = decode(&problem, &det, &cfg)?;
                let failed = obs.as_ref().map(|obs| !o.consistent || *obs != o.observables);
                total += 1;
                failures += u64::from(failed == Some(true));
                text.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    o.observables.to_bitstring(),
                    o.converged,
                    o.consistent,
                    failed.map(|f| f.to_string()).unwrap_or_default()
                ));
            }
            text.push_str(&format!("# shots={total} failures={failures}\n"));
            out(Format::Csv).emit(&text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
