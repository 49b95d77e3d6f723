//! Circuit IR with measurement records, detectors and observables, and the
//! builders for CSD state preparation, `Ȳ` measurement, Steane rounds and
//! gate teleportation.
//!
//! Records are numbered in emission order. `PARITY` creates a virtual record
//! (the XOR of earlier ones) so that syndrome-level flips can be modeled.
//! Regions between `NOISE OFF` and `NOISE ON` are skipped by noise
//! annotation; they hold the idealized encoders.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codeforge::{CssCode, Csd};
use crate::f2core::{BitMatrix, PauliOperator};
use crate::liftgate::{h_tau, is_hadamard_swap, FoldTarget, Gate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("record r{0} does not exist yet")]
    BadRecord(usize),
    #[error("qubit {0} out of range")]
    QubitOutOfRange(usize),
    #[error("detector or observable references no records")]
    EmptyParity,
    #[error("generator {0} has empty support")]
    EmptySupport(usize),
    #[error("index {0} out of range ({1} available)")]
    IndexOutOfRange(usize, usize),
    #[error("flagcilla used on block {0} before its first individual measurement")]
    FlagcillaBeforeFirst(usize),
    #[error("H_tau is not a Hadamard+SWAP logical gate on this code")]
    NoHadamardBasis,
    #[error("state preparation requires a {0}-basis")]
    UnsupportedBasis(Basis),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::Y => "Y",
            Basis::Z => "Z",
        })
    }
}

impl FromStr for Basis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" => Ok(Basis::X),
            "Y" => Ok(Basis::Y),
            "Z" => Ok(Basis::Z),
            _ => Err(format!("bad basis {s:?}")),
        }
    }
}

impl Basis {
    /// `(x, z)` bits of the single-qubit Pauli of this type.
    #[must_use]
    pub fn bits(self) -> (bool, bool) {
        match self {
            Basis::X => (true, false),
            Basis::Y => (true, true),
            Basis::Z => (false, true),
        }
    }

    #[must_use]
    pub fn from_bits(x: bool, z: bool) -> Option<Self> {
        match (x, z) {
            (true, false) => Some(Basis::X),
            (true, true) => Some(Basis::Y),
            (false, true) => Some(Basis::Z),
            (false, false) => None,
        }
    }

    /// X <-> Z.
    #[must_use]
    pub fn dual(self) -> Self {
        match self {
            Basis::X => Basis::Z,
            Basis::Y => Basis::Y,
            Basis::Z => Basis::X,
        }
    }
}

/// Noise channels. Depolarizing channels are exclusive mixtures over the
/// 3 or 15 non-identity Paulis.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Depolarize1 { p: f64, q: usize },
    Depolarize2 { p: f64, a: usize, b: usize },
    Pauli { p: f64, q: usize, kind: Basis },
    /// Flips a measurement or parity record.
    Flip { p: f64, rec: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    Gate(Gate),
    Reset { q: usize, basis: Basis },
    Measure { q: usize, basis: Basis, rec: usize },
    Parity { recs: Vec<usize>, rec: usize },
    Tick,
    Detector { recs: Vec<usize>, postselect: bool, block: Option<usize> },
    Observable { id: usize, recs: Vec<usize> },
    /// Applies `pauli` when the XOR of `recs` is 1.
    Feedback { recs: Vec<usize>, pauli: Vec<(usize, Basis)> },
    Noise(Channel),
    NoiseOff,
    NoiseOn,
}

/// Detector metadata kept alongside the instruction stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorInfo {
    pub postselect: bool,
    pub block: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub instructions: Vec<Instruction>,
    num_records: usize,
    detectors: Vec<DetectorInfo>,
    num_observables: usize,
}

impl Circuit {
    #[must_use]
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, instructions: Vec::new(), num_records: 0, detectors: Vec::new(), num_observables: 0 }
    }

    #[must_use]
    pub fn num_records(&self) -> usize {
        self.num_records
    }

    #[must_use]
    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    #[must_use]
    pub fn num_observables(&self) -> usize {
        self.num_observables
    }

    #[must_use]
    pub fn detector_info(&self) -> &[DetectorInfo] {
        &self.detectors
    }

    #[must_use]
    pub fn num_ticks(&self) -> usize {
        self.instructions.iter().filter(|i| matches!(i, Instruction::Tick)).count()
    }

    /// Appends an instruction after validating indices. Measurement and
    /// parity record numbers must equal the next free record.
    pub fn push(&mut self, ins: Instruction) -> Result<(), CircuitError> {
        let n = self.n_qubits;
        let check_q = |q: usize| if q < n { Ok(()) } else { Err(CircuitError::QubitOutOfRange(q)) };
        let nrec = self.num_records;
        let check_recs = |recs: &[usize]| {
            if recs.is_empty() {
                return Err(CircuitError::EmptyParity);
            }
            match recs.iter().find(|&&r| r >= nrec) {
                Some(&r) => Err(CircuitError::BadRecord(r)),
                None => Ok(()),
            }
        };
        match &ins {
            Instruction::Gate(g) => {
                let (a, b) = g.qubits();
                check_q(a)?;
                if let Some(b) = b {
                    check_q(b)?;
                    if a == b {
                        return Err(CircuitError::QubitOutOfRange(b));
                    }
                }
            }
            Instruction::Reset { q, .. } => check_q(*q)?,
            Instruction::Measure { q, rec, .. } => {
                check_q(*q)?;
                if *rec != nrec {
                    return Err(CircuitError::BadRecord(*rec));
                }
            }
            Instruction::Parity { recs, rec } => {
                check_recs(recs)?;
                if *rec != nrec {
                    return Err(CircuitError::BadRecord(*rec));
                }
            }
            Instruction::Detector { recs, .. } | Instruction::Observable { recs, .. } => check_recs(recs)?,
            Instruction::Feedback { recs, pauli } => {
                check_recs(recs)?;
                for &(q, _) in pauli {
                    check_q(q)?;
                }
            }
            Instruction::Noise(ch) => match *ch {
                Channel::Depolarize1 { q, .. } | Channel::Pauli { q, .. } => check_q(q)?,
                Channel::Depolarize2 { a, b, .. } => {
                    check_q(a)?;
                    check_q(b)?;
                }
                Channel::Flip { rec, .. } => {
                    if rec >= nrec {
                        return Err(CircuitError::BadRecord(rec));
                    }
                }
            },
            Instruction::Tick | Instruction::NoiseOff | Instruction::NoiseOn => {}
        }
        match &ins {
            Instruction::Measure { .. } | Instruction::Parity { .. } => self.num_records += 1,
            Instruction::Detector { postselect, block, .. } => {
                self.detectors.push(DetectorInfo { postselect: *postselect, block: *block });
            }
            Instruction::Observable { id, .. } => self.num_observables = self.num_observables.max(id + 1),
            _ => {}
        }
        self.instructions.push(ins);
        Ok(())
    }

    fn emit(&mut self, ins: Instruction) {
        self.push(ins).expect("builder emitted an invalid instruction");
    }

    pub fn gate(&mut self, g: Gate) {
        self.emit(Instruction::Gate(g));
    }

    pub fn reset(&mut self, q: usize, basis: Basis) {
        self.emit(Instruction::Reset { q, basis });
    }

    pub fn measure(&mut self, q: usize, basis: Basis) -> usize {
        let rec = self.num_records;
        self.emit(Instruction::Measure { q, basis, rec });
        rec
    }

    pub fn parity(&mut self, recs: Vec<usize>) -> usize {
        let rec = self.num_records;
        self.emit(Instruction::Parity { recs, rec });
        rec
    }

    pub fn tick(&mut self) {
        self.emit(Instruction::Tick);
    }

    /// Declares a detector and returns its index.
    pub fn detector(&mut self, recs: Vec<usize>, postselect: bool, block: Option<usize>) -> usize {
        self.emit(Instruction::Detector { recs, postselect, block });
        self.detectors.len() - 1
    }

    pub fn observable(&mut self, id: usize, recs: Vec<usize>) {
        self.emit(Instruction::Observable { id, recs });
    }

    pub fn feedback(&mut self, recs: Vec<usize>, pauli: &PauliOperator, offset: usize) {
        let terms: Vec<(usize, Basis)> =
            (0..pauli.n()).filter_map(|q| Basis::from_bits(pauli.x.get(q), pauli.z.get(q)).map(|b| (q + offset, b))).collect();
        if !terms.is_empty() {
            self.emit(Instruction::Feedback { recs, pauli: terms });
        }
    }

    pub fn noise(&mut self, ch: Channel) {
        self.emit(Instruction::Noise(ch));
    }

    pub fn noise_off(&mut self) {
        self.emit(Instruction::NoiseOff);
    }

    pub fn noise_on(&mut self) {
        self.emit(Instruction::NoiseOn);
    }

    /// Appends `other`, shifting its record numbers past ours. Observable ids
    /// are kept.
    pub fn append(&mut self, other: &Circuit) {
        assert!(other.n_qubits <= self.n_qubits, "appended circuit is wider");
        let off = self.num_records;
        let shift = |v: &[usize]| v.iter().map(|r| r + off).collect::<Vec<_>>();
        for ins in &other.instructions {
            let ins = match ins {
                Instruction::Measure { q, basis, rec } => Instruction::Measure { q: *q, basis: *basis, rec: rec + off },
                Instruction::Parity { recs, rec } => Instruction::Parity { recs: shift(recs), rec: rec + off },
                Instruction::Detector { recs, postselect, block } => {
                    Instruction::Detector { recs: shift(recs), postselect: *postselect, block: *block }
                }
                Instruction::Observable { id, recs } => Instruction::Observable { id: *id, recs: shift(recs) },
                Instruction::Feedback { recs, pauli } => Instruction::Feedback { recs: shift(recs), pauli: pauli.clone() },
                Instruction::Noise(Channel::Flip { p, rec }) => Instruction::Noise(Channel::Flip { p: *p, rec: rec + off }),
                other => other.clone(),
            };
            self.emit(ins);
        }
    }

    /// Number of instructions of each noise-free gate kind, for structure tests.
    #[must_use]
    pub fn count_gates(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        self.instructions.iter().filter(|i| matches!(i, Instruction::Gate(g) if pred(g))).count()
    }

    pub fn parse(text: &str) -> Result<Self, CircuitError> {
        let mut circ: Option<Circuit> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| CircuitError::Parse { line: idx + 1, msg: msg.to_string() };
            if let Some(rest) = line.strip_prefix("QUBITS ") {
                if circ.is_some() {
                    return Err(err("duplicate QUBITS header"));
                }
                circ = Some(Circuit::new(rest.trim().parse().map_err(|_| err("bad qubit count"))?));
                continue;
            }
            let c = circ.as_mut().ok_or_else(|| err("missing QUBITS header"))?;
            let ins = parse_instruction(line).map_err(|m| err(&m))?;
            c.push(ins).map_err(|e| err(&e.to_string()))?;
        }
        circ.ok_or(CircuitError::Parse { line: 0, msg: "empty circuit".into() })
    }
}

fn fmt_recs(recs: &[usize]) -> String {
    recs.iter().map(|r| format!("r{r}")).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Gate(g) => write!(f, "{g}"),
            Instruction::Reset { q, basis } => write!(f, "R {basis} {q}"),
            Instruction::Measure { q, basis, rec } => write!(f, "M {basis} {q} -> r{rec}"),
            Instruction::Parity { recs, rec } => write!(f, "PARITY {} -> r{rec}", fmt_recs(recs)),
            Instruction::Tick => f.write_str("TICK"),
            Instruction::Detector { recs, postselect, block } => {
                let mut tags = Vec::new();
                if *postselect {
                    tags.push("post".to_string());
                }
                if let Some(b) = block {
                    tags.push(format!("block={b}"));
                }
                if tags.is_empty() {
                    write!(f, "DETECTOR {}", fmt_recs(recs))
                } else {
                    write!(f, "DETECTOR({}) {}", tags.join(","), fmt_recs(recs))
                }
            }
            Instruction::Observable { id, recs } => write!(f, "OBSERVABLE {id} {}", fmt_recs(recs)),
            Instruction::Feedback { recs, pauli } => {
                let terms: Vec<String> = pauli.iter().map(|(q, b)| format!("{b}{q}")).collect();
                write!(f, "FEEDBACK {} -> {}", fmt_recs(recs), terms.join(" "))
            }
            Instruction::Noise(ch) => match ch {
                Channel::Depolarize1 { p, q } => write!(f, "DEPOLARIZE1({p}) {q}"),
                Channel::Depolarize2 { p, a, b } => write!(f, "DEPOLARIZE2({p}) {a} {b}"),
                Channel::Pauli { p, q, kind } => write!(f, "{kind}_ERROR({p}) {q}"),
                Channel::Flip { p, rec } => write!(f, "FLIP({p}) r{rec}"),
            },
            Instruction::NoiseOff => f.write_str("NOISE OFF"),
            Instruction::NoiseOn => f.write_str("NOISE ON"),
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QUBITS {}", self.n_qubits)?;
        for ins in &self.instructions {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

fn parse_rec(tok: &str) -> Result<usize, String> {
    tok.strip_prefix('r').and_then(|s| s.parse().ok()).ok_or_else(|| format!("bad record {tok:?}"))
}

fn parse_usize(tok: &str) -> Result<usize, String> {
    tok.parse().map_err(|_| format!("bad integer {tok:?}"))
}

/// Splits `NAME(arg)` into the name and the argument.
fn split_arg(head: &str) -> (&str, Option<&str>) {
    match head.find('(') {
        Some(i) if head.ends_with(')') => (&head[..i], Some(&head[i + 1..head.len() - 1])),
        _ => (head, None),
    }
}

fn parse_instruction(line: &str) -> Result<Instruction, String> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let (name, arg) = split_arg(toks[0]);
    let rest = &toks[1..];
    let prob = || -> Result<f64, String> {
        arg.ok_or("missing probability")?.parse::<f64>().map_err(|_| "bad probability".to_string())
    };
    let arrow = |rest: &[&str]| -> Result<(Vec<usize>, usize), String> {
        let pos = rest.iter().position(|t| *t == "->").ok_or("missing ->")?;
        let recs = rest[..pos].iter().map(|t| parse_rec(t)).collect::<Result<Vec<_>, _>>()?;
        let [out] = &rest[pos + 1..] else { return Err("expected one output record".into()) };
        Ok((recs, parse_rec(out)?))
    };
    Ok(match name {
        "TICK" => Instruction::Tick,
        "NOISE" => match rest {
            ["OFF"] => Instruction::NoiseOff,
            ["ON"] => Instruction::NoiseOn,
            _ => return Err("expected NOISE OFF or NOISE ON".into()),
        },
        "R" => match rest {
            [b, q] => Instruction::Reset { q: parse_usize(q)?, basis: b.parse()? },
            _ => return Err("expected R <basis> <qubit>".into()),
        },
        "M" => match rest {
            [b, q, "->", r] => Instruction::Measure { q: parse_usize(q)?, basis: b.parse()?, rec: parse_rec(r)? },
            _ => return Err("expected M <basis> <qubit> -> r<k>".into()),
        },
        "PARITY" => {
            let (recs, rec) = arrow(rest)?;
            Instruction::Parity { recs, rec }
        }
        "DETECTOR" => {
            let mut postselect = false;
            let mut block = None;
            if let Some(a) = arg {
                for tag in a.split(',') {
                    if tag == "post" {
                        postselect = true;
                    } else if let Some(b) = tag.strip_prefix("block=") {
                        block = Some(parse_usize(b)?);
                    } else {
                        return Err(format!("bad detector tag {tag:?}"));
                    }
                }
            }
            let recs = rest.iter().map(|t| parse_rec(t)).collect::<Result<_, _>>()?;
            Instruction::Detector { recs, postselect, block }
        }
        "OBSERVABLE" => {
            let (id, recs) = rest.split_first().ok_or("missing observable id")?;
            Instruction::Observable { id: parse_usize(id)?, recs: recs.iter().map(|t| parse_rec(t)).collect::<Result<_, _>>()? }
        }
        "FEEDBACK" => {
            let pos = rest.iter().position(|t| *t == "->").ok_or("missing ->")?;
            let recs = rest[..pos].iter().map(|t| parse_rec(t)).collect::<Result<_, _>>()?;
            let pauli = rest[pos + 1..]
                .iter()
                .map(|t| {
                    let (b, q) = t.split_at(1);
                    Ok((parse_usize(q)?, b.parse::<Basis>()?))
                })
                .collect::<Result<_, String>>()?;
            Instruction::Feedback { recs, pauli }
        }
        "DEPOLARIZE1" => match rest {
            [q] => Instruction::Noise(Channel::Depolarize1 { p: prob()?, q: parse_usize(q)? }),
            _ => return Err("expected one qubit".into()),
        },
        "DEPOLARIZE2" => match rest {
            [a, b] => Instruction::Noise(Channel::Depolarize2 { p: prob()?, a: parse_usize(a)?, b: parse_usize(b)? }),
            _ => return Err("expected two qubits".into()),
        },
        "X_ERROR" | "Y_ERROR" | "Z_ERROR" => match rest {
            [q] => Instruction::Noise(Channel::Pauli { p: prob()?, q: parse_usize(q)?, kind: name[..1].parse()? }),
            _ => return Err("expected one qubit".into()),
        },
        "FLIP" => match rest {
            [r] => Instruction::Noise(Channel::Flip { p: prob()?, rec: parse_rec(r)? }),
            _ => return Err("expected one record".into()),
        },
        _ => {
            let a = rest.first().map(|t| parse_usize(t)).transpose()?.ok_or("missing qubit")?;
            let b = rest.get(1).map(|t| parse_usize(t)).transpose()?;
            if rest.len() > 2 {
                return Err("too many operands".into());
            }
            Instruction::Gate(Gate::from_name(name, a, b).ok_or_else(|| format!("unknown instruction {name:?}"))?)
        }
    })
}

// ---------------------------------------------------------------------------
// Layered fragments

/// Operation inside a fragment layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Gate(Gate),
    Reset(usize, Basis),
    Measure(usize, Basis),
}

/// Time-ordered layers; operations inside one layer act on disjoint qubits.
type Fragment = Vec<Vec<Op>>;

/// Emits fragments side by side, one `TICK` after each layer, and returns
/// the record numbers of each fragment's measurements in order.
fn emit_parallel(circ: &mut Circuit, fragments: &[Fragment]) -> Vec<Vec<usize>> {
    let depth = fragments.iter().map(Vec::len).max().unwrap_or(0);
    let mut recs = vec![Vec::new(); fragments.len()];
    for t in 0..depth {
        for (f, frag) in fragments.iter().enumerate() {
            if let Some(layer) = frag.get(t) {
                for op in layer {
                    match *op {
                        Op::Gate(g) => circ.gate(g),
                        Op::Reset(q, b) => circ.reset(q, b),
                        Op::Measure(q, b) => recs[f].push(circ.measure(q, b)),
                    }
                }
            }
        }
        circ.tick();
    }
    recs
}

fn sequence(gates: impl IntoIterator<Item = Gate>) -> Fragment {
    gates.into_iter().map(|g| vec![Op::Gate(g)]).collect()
}

// ---------------------------------------------------------------------------
// Concatenated generators

/// A concatenated (outer) generator of a CSD code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcatGenerator {
    /// `X` for rows of `hx`, `Z` for rows of `hz`.
    pub kind: Basis,
    pub row: usize,
    pub support: Vec<usize>,
}

/// All concatenated generators: the X-type outer rows, then the Z-type.
#[must_use]
pub fn concatenated_generators(csd: &Csd) -> Vec<ConcatGenerator> {
    let mut out = Vec::new();
    for (kind, m) in [(Basis::X, &csd.code.hx), (Basis::Z, &csd.code.hz)] {
        for row in csd.outer_rows() {
            out.push(ConcatGenerator { kind, row, support: m.row(row).ones().collect() });
        }
    }
    out
}

/// Support order for a bare measurement: the first qubit of every touched
/// block (blocks ascending), then the remaining qubits, so each block is
/// split across the midpoint.
#[must_use]
pub fn bare_measure_order(support: &[usize]) -> Vec<usize> {
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut last_block = None;
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    for q in sorted {
        if last_block == Some(q / 4) {
            second.push(q);
        } else {
            first.push(q);
            last_block = Some(q / 4);
        }
    }
    first.extend(second);
    first
}

fn bare_fragment(generator: &ConcatGenerator, ancilla: usize) -> Fragment {
    let mut frag = vec![vec![Op::Reset(ancilla, generator.kind)]];
    for q in bare_measure_order(&generator.support) {
        let g = match generator.kind {
            Basis::Z => Gate::CX(q, ancilla),
            _ => Gate::CX(ancilla, q),
        };
        frag.push(vec![Op::Gate(g)]);
    }
    frag.push(vec![Op::Measure(ancilla, generator.kind)]);
    frag
}

fn generator_at(csd: &Csd, gen_index: usize) -> Result<ConcatGenerator, CircuitError> {
    let gens = concatenated_generators(csd);
    let len = gens.len();
    let g = gens.into_iter().nth(gen_index).ok_or(CircuitError::IndexOutOfRange(gen_index, len))?;
    if g.support.is_empty() {
        return Err(CircuitError::EmptySupport(gen_index));
    }
    Ok(g)
}

/// Non-FT measurement of one concatenated generator with a single ancilla
/// (qubit `n`).
pub fn build_bare_measure(csd: &Csd, gen_index: usize) -> Result<Circuit, CircuitError> {
    let g = generator_at(csd, gen_index)?;
    let n = csd.code.n;
    let mut c = Circuit::new(n + 1);
    emit_parallel(&mut c, &[bare_fragment(&g, n)]);
    Ok(c)
}

/// `C4` blocks whose checks overlap the support of generator `gen_index`.
pub fn c4_checks_to_verify(csd: &Csd, gen_index: usize) -> Result<Vec<usize>, CircuitError> {
    let gens = concatenated_generators(csd);
    let g = gens.get(gen_index).ok_or(CircuitError::IndexOutOfRange(gen_index, gens.len()))?;
    Ok(blocks_of(&g.support))
}

fn blocks_of(support: &[usize]) -> Vec<usize> {
    support.iter().map(|q| q / 4).collect::<BTreeSet<_>>().into_iter().collect()
}

fn block_qubits(block: usize) -> [usize; 4] {
    [4 * block, 4 * block + 1, 4 * block + 2, 4 * block + 3]
}

/// `XXXX` with syndrome ancilla `a` and a `|0⟩` flag `f`. Measures
/// `[syndrome, flag]`.
fn flag_x_fragment(d: [usize; 4], a: usize, f: usize) -> Fragment {
    let mut frag = vec![vec![Op::Reset(a, Basis::X), Op::Reset(f, Basis::Z)]];
    frag.extend(sequence([
        Gate::CX(a, d[0]),
        Gate::CX(a, f),
        Gate::CX(a, d[1]),
        Gate::CX(a, d[2]),
        Gate::CX(a, f),
        Gate::CX(a, d[3]),
    ]));
    frag.push(vec![Op::Measure(a, Basis::X), Op::Measure(f, Basis::Z)]);
    frag
}

/// `ZZZZ` with syndrome ancilla `a` and a `|+⟩` flag `f`.
fn flag_z_fragment(d: [usize; 4], a: usize, f: usize) -> Fragment {
    let mut frag = vec![vec![Op::Reset(a, Basis::Z), Op::Reset(f, Basis::X)]];
    frag.extend(sequence([
        Gate::CX(d[0], a),
        Gate::CX(f, a),
        Gate::CX(d[1], a),
        Gate::CX(d[2], a),
        Gate::CX(f, a),
        Gate::CX(d[3], a),
    ]));
    frag.push(vec![Op::Measure(a, Basis::Z), Op::Measure(f, Basis::X)]);
    frag
}

/// Both checks at once; each ancilla flags the other's hook errors.
/// Measures `[XXXX, ZZZZ]`.
fn flagcilla_fragment(d: [usize; 4], ax: usize, az: usize) -> Fragment {
    let mut frag = vec![vec![Op::Reset(ax, Basis::X), Op::Reset(az, Basis::Z)]];
    frag.extend(sequence([
        Gate::CX(ax, d[0]),
        Gate::CX(d[0], az),
        Gate::CX(d[1], az),
        Gate::CX(ax, d[1]),
        Gate::CX(ax, d[2]),
        Gate::CX(d[2], az),
        Gate::CX(d[3], az),
        Gate::CX(ax, d[3]),
    ]));
    frag.push(vec![Op::Measure(ax, Basis::X), Op::Measure(az, Basis::Z)]);
    frag
}

fn check_block(csd: &Csd, block: usize) -> Result<(), CircuitError> {
    if block < csd.num_blocks() {
        Ok(())
    } else {
        Err(CircuitError::IndexOutOfRange(block, csd.num_blocks()))
    }
}

/// Flagged `XXXX` measurement on `block`; ancillas are qubits `n` and `n+1`.
pub fn build_flag_c4_x(csd: &Csd, block: usize) -> Result<Circuit, CircuitError> {
    check_block(csd, block)?;
    let n = csd.code.n;
    let mut c = Circuit::new(n + 2);
    emit_parallel(&mut c, &[flag_x_fragment(block_qubits(block), n, n + 1)]);
    Ok(c)
}

/// Flagged `ZZZZ` measurement on `block`.
pub fn build_flag_c4_z(csd: &Csd, block: usize) -> Result<Circuit, CircuitError> {
    check_block(csd, block)?;
    let n = csd.code.n;
    let mut c = Circuit::new(n + 2);
    emit_parallel(&mut c, &[flag_z_fragment(block_qubits(block), n, n + 1)]);
    Ok(c)
}

/// Flagcilla measurement of both checks on `block`. Refused unless the
/// random-type check of the block has already been measured once with an
/// individual flag circuit.
pub fn build_flagcilla_c4(csd: &Csd, block: usize, first_measured: bool) -> Result<Circuit, CircuitError> {
    check_block(csd, block)?;
    if !first_measured {
        return Err(CircuitError::FlagcillaBeforeFirst(block));
    }
    let n = csd.code.n;
    let mut c = Circuit::new(n + 2);
    emit_parallel(&mut c, &[flagcilla_fragment(block_qubits(block), n, n + 1)]);
    Ok(c)
}

// ---------------------------------------------------------------------------
// State preparation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepPolicy {
    /// `Z` prepares `|0̄⟩^{⊗2k}`, `X` prepares `|+̄⟩^{⊗2k}`.
    pub basis: Basis,
    /// A shot is accepted when at most this many postselection detectors fire.
    pub allow_m: usize,
    pub use_flagcilla: bool,
}

impl Default for PrepPolicy {
    fn default() -> Self {
        Self { basis: Basis::Z, allow_m: 0, use_flagcilla: true }
    }
}

/// A built protocol circuit together with where its readout begins.
#[derive(Clone, Debug)]
pub struct ProtocolCircuit {
    pub circuit: Circuit,
    pub data: Range<usize>,
    /// Instruction index at which the destructive readout starts (or the
    /// circuit length when there is none).
    pub readout_start: usize,
    /// Ticks before the readout.
    pub depth: usize,
}

/// Greedy grouping of generators with pairwise disjoint support, in index order.
fn disjoint_groups(gens: &[ConcatGenerator]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(Vec<usize>, BTreeSet<usize>)> = Vec::new();
    let mut remaining: Vec<usize> = (0..gens.len()).collect();
    while !remaining.is_empty() {
        let mut used = BTreeSet::new();
        let mut group = Vec::new();
        remaining.retain(|&i| {
            if gens[i].support.iter().any(|q| used.contains(q)) {
                true
            } else {
                used.extend(gens[i].support.iter().copied());
                group.push(i);
                false
            }
        });
        groups.push((group, used));
    }
    groups.into_iter().map(|(g, _)| g).collect()
}

/// Fault-tolerant bare-ancilla preparation of `|0̄⟩^{⊗2k}` (basis `Z`) or
/// `|+̄⟩^{⊗2k}` (basis `X`), followed by a destructive readout in the same
/// basis with decoding detectors and logical observables. Every detector
/// before the readout is a postselection detector.
pub fn build_state_prep(csd: &Csd, policy: &PrepPolicy) -> Result<ProtocolCircuit, CircuitError> {
    let (random, det) = match policy.basis {
        Basis::Z => (Basis::X, Basis::Z),
        Basis::X => (Basis::Z, Basis::X),
        Basis::Y => return Err(CircuitError::UnsupportedBasis(Basis::Y)),
    };
    let code = &csd.code;
    let n = code.n;
    let nb = csd.num_blocks();
    let gens: Vec<ConcatGenerator> = concatenated_generators(csd).into_iter().filter(|g| g.kind == random).collect();
    if let Some(i) = gens.iter().position(|g| g.support.is_empty()) {
        return Err(CircuitError::EmptySupport(i));
    }
    let groups = disjoint_groups(&gens);
    let max_group = groups.iter().map(Vec::len).max().unwrap_or(0);
    let block_anc = |b: usize| (n + 2 * b, n + 2 * b + 1);
    let gen_anc = |j: usize| n + 2 * nb + j;
    let mut c = Circuit::new(n + 2 * nb + max_group);

    for q in 0..n {
        c.reset(q, policy.basis);
    }
    c.tick();

    // First measurement of the random-type C4 checks, individual flag circuits.
    let mut last_random: Vec<usize> = Vec::with_capacity(nb);
    let frags: Vec<Fragment> = (0..nb)
        .map(|b| {
            let (a, f) = block_anc(b);
            match random {
                Basis::X => flag_x_fragment(block_qubits(b), a, f),
                _ => flag_z_fragment(block_qubits(b), a, f),
            }
        })
        .collect();
    for (b, recs) in emit_parallel(&mut c, &frags).into_iter().enumerate() {
        last_random.push(recs[0]);
        c.detector(vec![recs[1]], true, Some(b));
    }

    for group in &groups {
        let frags: Vec<Fragment> = group.iter().enumerate().map(|(j, &g)| bare_fragment(&gens[g], gen_anc(j))).collect();
        emit_parallel(&mut c, &frags);
        let support: Vec<usize> = group.iter().flat_map(|&g| gens[g].support.iter().copied()).collect();
        let blocks = blocks_of(&support);
        let frags: Vec<Fragment> = blocks
            .iter()
            .map(|&b| {
                let (a, f) = block_anc(b);
                match (policy.use_flagcilla, det) {
                    (true, _) => flagcilla_fragment(block_qubits(b), a, f),
                    (false, Basis::Z) => flag_z_fragment(block_qubits(b), a, f),
                    (false, _) => flag_x_fragment(block_qubits(b), a, f),
                }
            })
            .collect();
        for (&b, recs) in blocks.iter().zip(emit_parallel(&mut c, &frags)) {
            if policy.use_flagcilla {
                let (rx, rz) = (recs[0], recs[1]);
                let (r_det, r_rand) = if det == Basis::Z { (rz, rx) } else { (rx, rz) };
                c.detector(vec![r_det], true, Some(b));
                c.detector(vec![r_rand, last_random[b]], true, Some(b));
                last_random[b] = r_rand;
            } else {
                c.detector(vec![recs[0]], true, Some(b));
                c.detector(vec![recs[1]], true, Some(b));
            }
        }
    }

    let depth = c.num_ticks();
    let readout_start = c.instructions.len();
    let recs: Vec<usize> = (0..n).map(|q| c.measure(q, policy.basis)).collect();
    let (checks, logicals) = match det {
        Basis::Z => (&code.hz, code.logical_z.iter().map(|p| p.z.clone()).collect::<Vec<_>>()),
        _ => (&code.hx, code.logical_x.iter().map(|p| p.x.clone()).collect()),
    };
    emit_readout(&mut c, checks, nb, &recs, None);
    for (j, l) in logicals.iter().enumerate() {
        c.observable(j, l.ones().map(|q| recs[q]).collect());
    }
    Ok(ProtocolCircuit { circuit: c, data: 0..n, readout_start, depth })
}

/// Declares one detector per check row over `recs`, XORed with `previous`
/// syndrome records when given. The first `nb` rows are tagged with their block.
fn emit_readout(c: &mut Circuit, checks: &BitMatrix, nb: usize, recs: &[usize], previous: Option<&[usize]>) {
    for (j, row) in checks.row_vecs().iter().enumerate() {
        let mut r: Vec<usize> = row.ones().map(|q| recs[q]).collect();
        if let Some(prev) = previous {
            r.push(prev[j]);
        }
        c.detector(r, false, (j < nb).then_some(j));
    }
}

// ---------------------------------------------------------------------------
// Idealized encoders

/// Noiseless encoder of the `+1` eigenstate of the X-type rows of `hx` and
/// of every Z-type operator in `ker(hx)`, on `qubits`.
fn encode_zero_raw(c: &mut Circuit, hx: &BitMatrix, qubits: &[usize]) {
    for &q in qubits {
        c.reset(q, Basis::Z);
    }
    let rref = hx.rref();
    for (r, &p) in rref.pivots.iter().enumerate() {
        c.gate(Gate::H(qubits[p]));
        for j in rref.matrix.row(r).ones().filter(|&j| j != p) {
            c.gate(Gate::CX(qubits[p], qubits[j]));
        }
    }
}

/// Noiseless `|0̄⟩^{⊗k}` on `qubits` (no ticks, noise disabled).
pub fn encode_zero(c: &mut Circuit, code: &CssCode, qubits: &[usize]) {
    c.noise_off();
    encode_zero_raw(c, &code.hx, qubits);
    c.noise_on();
}

/// Noiseless `|+̄⟩^{⊗k}` on `qubits`.
pub fn encode_plus(c: &mut Circuit, code: &CssCode, qubits: &[usize]) {
    c.noise_off();
    encode_zero_raw(c, &code.hz, qubits);
    for &q in qubits {
        c.gate(Gate::H(q));
    }
    c.noise_on();
}

/// `Ȳ_i = i X̄_i Z̄_i`, a Hermitian Pauli.
#[must_use]
pub fn logical_y(code: &CssCode, i: usize) -> PauliOperator {
    let mut y = code.logical_x[i].mul(&code.logical_z[i]);
    let s = y.sign_power();
    y.set_sign_power((s + 1) % 4);
    y
}

fn controlled_pauli(anc: usize, q: usize, b: Basis) -> Gate {
    match b {
        Basis::X => Gate::CX(anc, q),
        Basis::Y => Gate::CY(anc, q),
        Basis::Z => Gate::CZ(anc, q),
    }
}

/// Terms `(qubit, type)` of `p`, with `offset` added to qubit indices.
fn pauli_terms(p: &PauliOperator, offset: usize) -> Vec<(usize, Basis)> {
    (0..p.n()).filter_map(|q| Basis::from_bits(p.x.get(q), p.z.get(q)).map(|b| (q + offset, b))).collect()
}

/// Ideal measurement of the Hermitian Pauli `p` (on qubits `offset..`) with
/// ancilla `anc`; returns the outcome record (1 means eigenvalue -1).
fn measure_pauli_ideal(c: &mut Circuit, p: &PauliOperator, offset: usize, anc: usize) -> usize {
    c.noise_off();
    c.reset(anc, Basis::X);
    for (q, b) in pauli_terms(p, offset) {
        c.gate(controlled_pauli(anc, q, b));
    }
    if p.sign_power() == 2 {
        c.gate(Gate::Z(anc));
    }
    let r = c.measure(anc, Basis::X);
    c.noise_on();
    r
}

/// Noiseless `S̄^{⊗2k}|+̄⟩^{⊗2k}` on `qubits offset..offset+n`, via ideal
/// `Ȳ_j` measurements and `Z̄_j` corrections.
fn encode_s_plus(c: &mut Circuit, code: &CssCode, offset: usize, anc: usize) {
    let qubits: Vec<usize> = (offset..offset + code.n).collect();
    encode_plus(c, code, &qubits);
    for j in 0..code.k() {
        let r = measure_pauli_ideal(c, &logical_y(code, j), offset, anc);
        c.feedback(vec![r], &code.logical_z[j], offset);
    }
}

// ---------------------------------------------------------------------------
// Y measurement

/// Canonical `C4` class of an even 4-bit block pattern modulo `1111`.
fn c4_class(nibble: u8) -> u8 {
    if nibble & 1 == 1 { nibble ^ 0b1111 } else { nibble }
}

fn block_nibbles(v: &crate::f2core::BitVector, nb: usize) -> Vec<u8> {
    let mut out = vec![0u8; nb];
    for q in v.ones() {
        out[q / 4] |= 1 << (q % 4);
    }
    out
}

/// Representative of `Ȳ_i` (times stabilizers of `|+̄⟩^{⊗2k}`) whose
/// restriction to every block is `XX`, `ZZ` or `YY` on one pair of qubits
/// wherever possible, so that each block is touched by at most two
/// controlled Paulis. Blocks where this is impossible keep three or four.
#[must_use]
pub fn y_representative(csd: &Csd, i: usize) -> PauliOperator {
    let code = &csd.code;
    let n = code.n;
    let nb = csd.num_blocks();
    let y = logical_y(code, i);
    let mut x_gens: Vec<PauliOperator> = csd
        .outer_rows()
        .map(|r| PauliOperator::from_xz(code.hx.row(r).clone(), crate::f2core::BitVector::zeros(n)))
        .collect();
    x_gens.extend((0..code.k()).filter(|&j| j != i).map(|j| code.logical_x[j].clone()));
    x_gens.truncate(12);
    let z_gens: Vec<PauliOperator> = csd
        .outer_rows()
        .map(|r| PauliOperator::from_xz(crate::f2core::BitVector::zeros(n), code.hz.row(r).clone()))
        .take(8)
        .collect();
    let xn: Vec<Vec<u8>> = x_gens.iter().map(|g| block_nibbles(&g.x, nb)).collect();
    let zn: Vec<Vec<u8>> = z_gens.iter().map(|g| block_nibbles(&g.z, nb)).collect();
    let (yx, yz) = (block_nibbles(&y.x, nb), block_nibbles(&y.z, nb));
    // Gray-code walk over the X combinations for every Z combination.
    let mut z_cur = yz.clone();
    let mut best: Option<((usize, usize), u64, u64)> = None;
    for zm in 0u64..1 << z_gens.len() {
        if zm > 0 {
            let bit = zm.trailing_zeros() as usize;
            z_cur.iter_mut().zip(&zn[bit]).for_each(|(a, b)| *a ^= b);
        }
        let zc: Vec<u8> = z_cur.iter().map(|&v| c4_class(v)).collect();
        let mut x_cur = yx.clone();
        for xm in 0u64..1 << x_gens.len() {
            if xm > 0 {
                let bit = xm.trailing_zeros() as usize;
                x_cur.iter_mut().zip(&xn[bit]).for_each(|(a, b)| *a ^= b);
            }
            let mut bad = 0;
            let mut touched = 0;
            for (b, &zb) in zc.iter().enumerate() {
                let xb = c4_class(x_cur[b]);
                if xb != 0 && zb != 0 && xb != zb {
                    bad += 1;
                }
                if xb != 0 || zb != 0 {
                    touched += 1;
                }
            }
            let gray = |m: u64| m ^ (m >> 1);
            if best.is_none_or(|(cost, _, _)| (bad, touched) < cost) {
                best = Some(((bad, touched), gray(xm), gray(zm)));
            }
        }
    }
    let (_, xm, zm) = best.expect("at least one combination");
    let mut p = y;
    for (_, g) in x_gens.iter().enumerate().filter(|(j, _)| xm >> j & 1 == 1) {
        p = p.mul(g);
    }
    for (_, g) in z_gens.iter().enumerate().filter(|(j, _)| zm >> j & 1 == 1) {
        p = p.mul(g);
    }
    // Move each block onto its canonical pair with the block checks.
    let (px, pz) = (block_nibbles(&p.x, nb), block_nibbles(&p.z, nb));
    for b in 0..nb {
        let full = crate::f2core::BitVector::from_indices(n, &block_qubits(b));
        let zero = crate::f2core::BitVector::zeros(n);
        if px[b] & 1 == 1 {
            p = p.mul(&PauliOperator::from_xz(full.clone(), zero.clone()));
        }
        if pz[b] & 1 == 1 {
            p = p.mul(&PauliOperator::from_xz(zero, full));
        }
    }
    debug_assert!(p.sign_power().is_multiple_of(2), "Hermitian representative");
    p
}

/// Segments of controlled Paulis: per block at most one CX and one CZ, or a
/// single CY alone.
#[must_use]
pub fn y_segments(pauli: &PauliOperator) -> Vec<Vec<(usize, Basis)>> {
    let mut per_block: std::collections::BTreeMap<usize, Vec<(usize, Basis)>> = Default::default();
    for (q, b) in pauli_terms(pauli, 0) {
        per_block.entry(q / 4).or_default().push((q, b));
    }
    let mut segments = Vec::new();
    while per_block.values().any(|v| !v.is_empty()) {
        let mut seg = Vec::new();
        for ops in per_block.values_mut() {
            if let Some(pos) = ops.iter().position(|&(_, b)| b == Basis::Y) {
                seg.push(ops.remove(pos));
                continue;
            }
            for kind in [Basis::X, Basis::Z] {
                if let Some(pos) = ops.iter().position(|&(_, b)| b == kind) {
                    seg.push(ops.remove(pos));
                }
            }
        }
        segments.push(seg);
    }
    segments
}

/// Fault-tolerant measurement of `Ȳ_i` on a noiselessly prepared
/// `|+̄⟩^{⊗2k}`, repeated once. Each repetition applies the segments
/// (with flags around the middle contacts of blocks touched more than
/// twice), then a flagcilla round on every touched block; a `Z̄_i`
/// correction is conditioned on the first outcome.
pub fn build_y_measurement(csd: &Csd, logical_index: usize) -> Result<ProtocolCircuit, CircuitError> {
    let code = &csd.code;
    if logical_index >= code.k() {
        return Err(CircuitError::IndexOutOfRange(logical_index, code.k()));
    }
    let n = code.n;
    let nb = csd.num_blocks();
    let anc = n + 2 * nb;
    let y = y_representative(csd, logical_index);
    let segments = y_segments(&y);
    let contacts: Vec<(usize, Basis)> = segments.iter().flatten().copied().collect();
    // Blocks with more than two contacts get a flag on the ancilla around
    // their middle contacts: a fault there can leave a data error plus an
    // ancilla X that spreads into the same block.
    let mut per_block: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (pos, &(q, _)) in contacts.iter().enumerate() {
        per_block.entry(q / 4).or_default().push(pos);
    }
    let windows: Vec<(usize, usize, usize)> = per_block
        .iter()
        .filter(|(_, p)| p.len() > 2)
        .map(|(&b, p)| (b, p[1], p[p.len() - 2]))
        .collect();
    let flagged: Vec<usize> = windows.iter().map(|w| w.0).collect();
    let mut c = Circuit::new(n + 2 * nb + 1);
    encode_plus(&mut c, code, &(0..n).collect::<Vec<_>>());
    let mut outcomes = Vec::new();
    for _ in 0..2 {
        c.reset(anc, Basis::X);
        for &b in &flagged {
            c.reset(n + 2 * b, Basis::Z);
        }
        c.tick();
        let mut ops = Vec::new();
        for (pos, &(q, b)) in contacts.iter().enumerate() {
            ops.extend(windows.iter().filter(|w| w.1 == pos).map(|w| Gate::CX(anc, n + 2 * w.0)));
            ops.push(controlled_pauli(anc, q, b));
            ops.extend(windows.iter().filter(|w| w.2 == pos).map(|w| Gate::CX(anc, n + 2 * w.0)));
        }
        emit_parallel(&mut c, &[sequence(ops)]);
        for &b in &flagged {
            let r = c.measure(n + 2 * b, Basis::Z);
            c.detector(vec![r], true, Some(b));
        }
        // A partial segment anticommutes with the checks of the blocks it
        // touches, so detection waits until the whole operator is applied.
        let blocks = blocks_of(&segments.iter().flatten().map(|&(q, _)| q).collect::<Vec<_>>());
        let frags: Vec<Fragment> =
            blocks.iter().map(|&b| flagcilla_fragment(block_qubits(b), n + 2 * b, n + 2 * b + 1)).collect();
        for (&b, recs) in blocks.iter().zip(emit_parallel(&mut c, &frags)) {
            c.detector(vec![recs[0]], true, Some(b));
            c.detector(vec![recs[1]], true, Some(b));
        }
        if y.sign_power() == 2 {
            c.gate(Gate::Z(anc));
            c.tick();
        }
        outcomes.push(c.measure(anc, Basis::X));
        c.tick();
    }
    c.detector(outcomes.clone(), true, None);
    c.feedback(vec![outcomes[0]], &code.logical_z[logical_index], 0);
    let depth = c.num_ticks();
    let readout_start = c.instructions.len();
    Ok(ProtocolCircuit { circuit: c, data: 0..n, readout_start, depth })
}

// ---------------------------------------------------------------------------
// Steane rounds and memory

/// Running syndrome state of a memory circuit.
#[derive(Clone, Debug, Default)]
pub struct SyndromeHistory {
    /// Last records of the `hz` (X-error) syndromes.
    pub x_errors: Option<Vec<usize>>,
    /// Last records of the `hx` (Z-error) syndromes.
    pub z_errors: Option<Vec<usize>>,
}

/// One Steane round on data qubits `0..n` with the ancilla block on
/// `n..2n`: X errors through a fresh `|+̄⟩` and transversal CNOT, then Z
/// errors through a fresh `|0̄⟩`. Ancillas get `DEPOLARIZE1(p_prime)` after
/// their ideal preparation; ancilla measurements are noiseless and each
/// concatenated-generator syndrome gets `FLIP(syndrome_flip)`.
pub fn build_steane_round(c: &mut Circuit, csd: &Csd, p_prime: f64, syndrome_flip: f64, history: &mut SyndromeHistory) {
    let code = &csd.code;
    let n = code.n;
    let nb = csd.num_blocks();
    let anc: Vec<usize> = (n..2 * n).collect();
    for (into_data, checks) in [(false, &code.hz), (true, &code.hx)] {
        if into_data {
            encode_zero(c, code, &anc);
        } else {
            encode_plus(c, code, &anc);
        }
        if p_prime > 0.0 {
            for &a in &anc {
                c.noise(Channel::Depolarize1 { p: p_prime, q: a });
            }
        }
        for q in 0..n {
            c.gate(if into_data { Gate::CX(n + q, q) } else { Gate::CX(q, n + q) });
        }
        c.tick();
        c.noise_off();
        let basis = if into_data { Basis::X } else { Basis::Z };
        let recs: Vec<usize> = anc.iter().map(|&a| c.measure(a, basis)).collect();
        c.noise_on();
        let synd: Vec<usize> = checks
            .row_vecs()
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let r = c.parity(row.ones().map(|q| recs[q]).collect());
                if j >= nb && syndrome_flip > 0.0 {
                    c.noise(Channel::Flip { p: syndrome_flip, rec: r });
                }
                r
            })
            .collect();
        let slot = if into_data { &mut history.z_errors } else { &mut history.x_errors };
        for (j, &s) in synd.iter().enumerate() {
            let mut r = vec![s];
            if let Some(prev) = slot.as_ref() {
                r.push(prev[j]);
            }
            c.detector(r, false, (j < nb).then_some(j));
        }
        *slot = Some(synd);
    }
}

/// Memory experiment: ideal `|0̄⟩^{⊗2k}`, `rounds` Steane rounds, noiseless
/// `Z` readout with a final syndrome and the `Z̄_j` observables.
#[must_use]
pub fn build_memory_circuit(csd: &Csd, rounds: usize, p_prime: f64, syndrome_flip: f64) -> ProtocolCircuit {
    let code = &csd.code;
    let n = code.n;
    let mut c = Circuit::new(2 * n);
    encode_zero(&mut c, code, &(0..n).collect::<Vec<_>>());
    let mut history = SyndromeHistory::default();
    for _ in 0..rounds {
        build_steane_round(&mut c, csd, p_prime, syndrome_flip, &mut history);
    }
    let depth = c.num_ticks();
    let readout_start = c.instructions.len();
    c.noise_off();
    let recs: Vec<usize> = (0..n).map(|q| c.measure(q, Basis::Z)).collect();
    emit_readout(&mut c, &code.hz, csd.num_blocks(), &recs, history.x_errors.as_deref());
    for (j, l) in code.logical_z.iter().enumerate() {
        c.observable(j, l.z.ones().map(|q| recs[q]).collect());
    }
    c.noise_on();
    ProtocolCircuit { circuit: c, data: 0..n, readout_start, depth }
}

// ---------------------------------------------------------------------------
// Gate teleportation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TeleportKind {
    STeleport,
    KnillS,
    SqrtXTeleport,
}

/// A teleportation gadget. The input block `input` is left untouched at
/// the start so callers can prepend their own state preparation; the result
/// sits on `output`.
#[derive(Clone, Debug)]
pub struct Teleport {
    pub circuit: Circuit,
    pub input: Range<usize>,
    pub output: Range<usize>,
}

/// Builds the S-teleport, Knill+S or √X-teleport gadget applying `S̄` (or
/// `√X̄`) to every logical qubit of the input block.
pub fn build_injection_circuit(csd: &Csd, kind: TeleportKind) -> Result<Teleport, CircuitError> {
    let code = &csd.code;
    let n = code.n;
    let k = code.k();
    let blocks = if kind == TeleportKind::KnillS { 3 } else { 2 };
    let anc = blocks * n;
    let mut c = Circuit::new(blocks * n + 1);
    let range = |b: usize| b * n..(b + 1) * n;
    encode_s_plus(&mut c, code, n, anc);
    match kind {
        TeleportKind::STeleport => {
            for q in 0..n {
                c.gate(Gate::CX(n + q, q));
            }
            c.tick();
            let recs: Vec<usize> = (0..n).map(|q| c.measure(q, Basis::Z)).collect();
            for j in 0..k {
                let r: Vec<usize> = code.logical_z[j].z.ones().map(|q| recs[q]).collect();
                c.feedback(r, &logical_y(code, j), n);
            }
            Ok(Teleport { circuit: c, input: range(0), output: range(1) })
        }
        TeleportKind::KnillS => {
            encode_zero(&mut c, code, &range(2).collect::<Vec<_>>());
            for q in 0..n {
                c.gate(Gate::CX(n + q, 2 * n + q));
            }
            c.tick();
            for q in 0..n {
                c.gate(Gate::CX(q, n + q));
            }
            c.tick();
            let rx: Vec<usize> = (0..n).map(|q| c.measure(q, Basis::X)).collect();
            let rz: Vec<usize> = (0..n).map(|q| c.measure(n + q, Basis::Z)).collect();
            for j in 0..k {
                let a: Vec<usize> = code.logical_x[j].x.ones().map(|q| rx[q]).collect();
                c.feedback(a, &code.logical_z[j], 2 * n);
                let b: Vec<usize> = code.logical_z[j].z.ones().map(|q| rz[q]).collect();
                c.feedback(b, &logical_y(code, j), 2 * n);
            }
            Ok(Teleport { circuit: c, input: range(0), output: range(2) })
        }
        TeleportKind::SqrtXTeleport => {
            let h = h_tau(FoldTarget::Csd { code, layout: &csd.layout }).map_err(|_| CircuitError::NoHadamardBasis)?;
            let perm = is_hadamard_swap(&h.action).ok_or(CircuitError::NoHadamardBasis)?;
            for g in &h.circuit.ops {
                c.gate(*g);
            }
            c.tick();
            for q in 0..n {
                c.gate(Gate::CX(n + q, q));
            }
            c.tick();
            for g in &h.circuit.ops {
                c.gate(g.shifted(n));
            }
            c.tick();
            let recs: Vec<usize> = (0..n).map(|q| c.measure(q, Basis::Z)).collect();
            for j in 0..k {
                let r: Vec<usize> = code.logical_z[j].z.ones().map(|q| recs[q]).collect();
                c.feedback(r, &logical_y(code, perm[j]), n);
            }
            Ok(Teleport { circuit: c, input: range(0), output: range(1) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::f2core::{BitVector, RowSpace};
    use crate::liftgate::CliffordCircuit;
    use crate::noisesim::{
        check_detectors, elementary_faults, propagate_faults, simulate, single_fault_check, ElementaryFault,
        FaultAction, ResidualGroups,
    };

    fn csd(name: &str) -> Csd {
        Csd::from_seed(name).unwrap()
    }

    fn prefix(c: &Circuit, len: usize) -> Circuit {
        let mut out = Circuit::new(c.n_qubits);
        for ins in &c.instructions[..len] {
            out.push(ins.clone()).unwrap();
        }
        out
    }

    /// `p` on qubits `offset..` of a `total`-qubit register.
    fn embed(p: &PauliOperator, offset: usize, total: usize) -> PauliOperator {
        let shift = |v: &BitVector| BitVector::from_indices(total, &v.ones().map(|q| q + offset).collect::<Vec<_>>());
        let mut out = PauliOperator::from_xz(shift(&p.x), shift(&p.z));
        out.set_sign_power(p.sign_power());
        out
    }

    fn policies() -> Vec<PrepPolicy> {
        let mut v = Vec::new();
        for basis in [Basis::Z, Basis::X] {
            for use_flagcilla in [true, false] {
                v.push(PrepPolicy { basis, allow_m: 0, use_flagcilla });
            }
        }
        v
    }

    #[test]
    fn text_round_trip() {
        let c = csd("c422");
        let mut circuits = vec![
            build_state_prep(&c, &PrepPolicy::default()).unwrap().circuit,
            build_y_measurement(&c, 1).unwrap().circuit,
            build_memory_circuit(&c, 2, 1e-3, 2e-3).circuit,
            build_injection_circuit(&c, TeleportKind::KnillS).unwrap().circuit,
        ];
        circuits.push(crate::noisesim::annotate(&circuits[0], &crate::noisesim::NoiseModel::new(1.5e-3)));
        for circ in circuits {
            let text = circ.to_string();
            let back = Circuit::parse(&text).unwrap();
            assert_eq!(back, circ);
            assert_eq!(back.to_string(), text);
        }
    }

    #[test]
    fn parse_rejects_bad_records() {
        assert!(Circuit::parse("QUBITS 2\nM Z 0 -> r1\n").is_err());
        assert!(Circuit::parse("QUBITS 2\nDETECTOR r0\n").is_err());
        assert!(Circuit::parse("QUBITS 2\nCX 0 2\n").is_err());
        assert!(Circuit::parse("QUBITS 2\nM Z 0 -> r0\nDETECTOR\n").is_err());
    }

    #[test]
    fn builders_have_deterministic_detectors() {
        for name in ["c422", "c513"] {
            let c = csd(name);
            for pol in policies() {
                check_detectors(&build_state_prep(&c, &pol).unwrap().circuit).unwrap();
            }
            for i in 0..c.code.k() {
                check_detectors(&build_y_measurement(&c, i).unwrap().circuit).unwrap();
            }
            check_detectors(&build_memory_circuit(&c, 3, 0.0, 0.0).circuit).unwrap();
        }
    }

    #[test]
    fn prep_output_is_codestate() {
        for name in ["c422", "c513"] {
            let c = csd(name);
            for pol in policies() {
                let pc = build_state_prep(&c, &pol).unwrap();
                let total = pc.circuit.n_qubits;
                let r = simulate(&prefix(&pc.circuit, pc.readout_start), 4);
                let t = &r.tableau;
                // Random-type checks end up with known but random signs.
                let zero = BitVector::zeros(c.code.n);
                for (row, x_type) in
                    c.code.hx.row_vecs().iter().map(|r| (r, true)).chain(c.code.hz.row_vecs().iter().map(|r| (r, false)))
                {
                    let p = if x_type {
                        PauliOperator::from_xz(row.clone(), zero.clone())
                    } else {
                        PauliOperator::from_xz(zero.clone(), row.clone())
                    };
                    let e = t.expectation(&embed(&p, 0, total));
                    if x_type == (pol.basis == Basis::Z) {
                        assert!(e.is_some());
                    } else {
                        assert_eq!(e, Some(false));
                    }
                }
                let logicals = if pol.basis == Basis::Z { &c.code.logical_z } else { &c.code.logical_x };
                for l in logicals {
                    assert_eq!(t.expectation(&embed(l, 0, total)), Some(false));
                }
                let full = simulate(&pc.circuit, 4);
                assert!(full.detectors.iter().all(|d| !d));
                assert!(full.observables.iter().all(|o| !o));
            }
        }
    }

    #[test]
    fn prep_layers_touch_each_qubit_once() {
        for name in ["c422", "c513", "c1244"] {
            let c = csd(name);
            let pc = build_state_prep(&c, &PrepPolicy::default()).unwrap();
            let mut used = BTreeSet::new();
            for ins in &pc.circuit.instructions {
                let qs: Vec<usize> = match ins {
                    Instruction::Gate(g) => {
                        let (a, b) = g.qubits();
                        std::iter::once(a).chain(b).collect()
                    }
                    Instruction::Reset { q, .. } | Instruction::Measure { q, .. } => vec![*q],
                    Instruction::Tick => {
                        used.clear();
                        continue;
                    }
                    _ => continue,
                };
                for q in qs {
                    assert!(used.insert(q), "{name}: qubit {q} used twice in one tick");
                }
            }
        }
    }

    #[test]
    fn parallel_groups_are_disjoint() {
        for name in ["c513", "c1244"] {
            let gens = concatenated_generators(&csd(name));
            let groups = disjoint_groups(&gens);
            assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), gens.len());
            for g in &groups {
                let mut seen = BTreeSet::new();
                for &i in g {
                    assert!(gens[i].support.iter().all(|q| seen.insert(*q)));
                }
            }
        }
    }

    #[test]
    fn prep_depth() {
        let small = build_state_prep(&csd("c422"), &PrepPolicy::default()).unwrap().depth;
        assert!((10..100).contains(&small), "depth {small}");
        let large = build_state_prep(&csd("c1244"), &PrepPolicy::default()).unwrap().depth;
        assert!((150..400).contains(&large), "depth {large}");
    }

    #[test]
    fn single_faults_on_small_preps() {
        let c = csd("c422");
        for pol in policies() {
            let pc = build_state_prep(&c, &pol).unwrap();
            let rep = single_fault_check(&pc, &ResidualGroups::prep(&c.code, pol.basis), 1e-3);
            assert!(rep.faults > 100);
            assert!(rep.violations.is_empty(), "{pol:?}: {:?}", &rep.violations[..rep.violations.len().min(5)]);
        }
    }

    #[test]
    fn single_faults_on_y_measurement() {
        let c = csd("c422");
        for i in 0..c.code.k() {
            let pc = build_y_measurement(&c, i).unwrap();
            let rep = single_fault_check(&pc, &ResidualGroups::y_eigenstate(&c.code, i), 1e-3);
            assert!(rep.violations.is_empty(), "logical {i}: {:?}", rep.violations);
        }
    }

    #[test]
    fn y_measurement_projects_onto_y() {
        for name in ["c422", "c513"] {
            let c = csd(name);
            for i in 0..c.code.k() {
                let pc = build_y_measurement(&c, i).unwrap();
                let total = pc.circuit.n_qubits;
                for seed in 0..4 {
                    let r = simulate(&pc.circuit, seed);
                    assert_eq!(r.tableau.expectation(&embed(&logical_y(&c.code, i), 0, total)), Some(false));
                    for j in (0..c.code.k()).filter(|&j| j != i) {
                        assert_eq!(r.tableau.expectation(&embed(&c.code.logical_x[j], 0, total)), Some(false));
                    }
                }
            }
        }
    }

    #[test]
    fn y_segments_follow_contact_rule() {
        for name in ["c422", "c513", "c1244"] {
            let c = csd(name);
            for i in 0..c.code.k() {
                let y = y_representative(&c, i);
                assert!(y.commutes_with(&logical_y(&c.code, i)));
                let segs = y_segments(&y);
                assert!(segs.len() <= 4);
                let mut all: Vec<(usize, Basis)> = segs.iter().flatten().copied().collect();
                all.sort_by_key(|t| t.0);
                assert_eq!(all, pauli_terms(&y, 0));
                for seg in &segs {
                    let mut per_block: std::collections::BTreeMap<usize, Vec<Basis>> = Default::default();
                    for &(q, b) in seg {
                        per_block.entry(q / 4).or_default().push(b);
                    }
                    for kinds in per_block.values() {
                        let ys = kinds.iter().filter(|&&b| b == Basis::Y).count();
                        let xs = kinds.iter().filter(|&&b| b == Basis::X).count();
                        let zs = kinds.iter().filter(|&&b| b == Basis::Z).count();
                        assert!(if ys > 0 { kinds.len() == 1 } else { xs <= 1 && zs <= 1 });
                    }
                }
            }
        }
    }

    #[test]
    fn cy_moves_control_x_to_target_y() {
        let mut v = BitVector::parse("10 00").unwrap();
        controlled_pauli(0, 1, Basis::Y).conjugate(&mut v, 2);
        assert_eq!(v, BitVector::parse("11 01").unwrap());
    }

    #[test]
    fn bare_measure_hooks_are_contained() {
        let c = csd("c422");
        let n = c.code.n;
        let gens = concatenated_generators(&c);
        assert!(gens.iter().any(|g| g.support.len() == 8));
        for (gi, g) in gens.iter().enumerate() {
            let circ = build_bare_measure(&c, gi).unwrap();
            let q = g.support.len();
            assert_eq!(circ.count_gates(Gate::is_two_qubit), q);
            let cx_positions: Vec<usize> = circ
                .instructions
                .iter()
                .enumerate()
                .filter(|(_, i)| matches!(i, Instruction::Gate(_)))
                .map(|(i, _)| i)
                .collect();
            for (t, &at) in cx_positions.iter().enumerate() {
                let t = t + 1;
                for b in [Basis::X, Basis::Y, Basis::Z] {
                    let f = ElementaryFault { at, p: 0.1, action: FaultAction::Pauli(vec![(n, b)]) };
                    let e = &propagate_faults(&circ, &[f], circ.instructions.len())[0];
                    let data = if g.kind == Basis::X { e.frame_x.slice(0, n) } else { e.frame_z.slice(0, n) };
                    let sup = BitVector::from_indices(n, &g.support);
                    let mut best = data.clone();
                    let mut alt = data.clone();
                    alt.xor_assign(&sup);
                    if alt.weight() < best.weight() {
                        best = alt;
                    }
                    assert!(best.weight() <= t.min(q - t));
                    let blocks: BTreeSet<usize> = best.ones().map(|q| q / 4).collect();
                    assert_eq!(blocks.len(), best.weight(), "at most one error per block");
                }
            }
        }
        assert!(build_bare_measure(&c, 99).is_err());
    }

    #[test]
    fn empty_generator_rejected() {
        let g = ConcatGenerator { kind: Basis::X, row: 0, support: vec![] };
        assert!(blocks_of(&g.support).is_empty());
    }

    #[test]
    fn c4_verification_blocks() {
        let c = csd("c422");
        let gens = concatenated_generators(&c);
        for (i, g) in gens.iter().enumerate() {
            let blocks = c4_checks_to_verify(&c, i).unwrap();
            assert_eq!(blocks.len() * 2, g.support.len());
            if g.support.len() == 8 {
                assert_eq!(blocks.len(), 4);
            }
        }
        let big = csd("c1244");
        for i in 0..concatenated_generators(&big).len() {
            assert!(c4_checks_to_verify(&big, i).unwrap().len() <= big.q_max() / 2);
        }
    }

    /// Data residual of each single fault of `circ` with the given records
    /// as detectors.
    fn fragment_effects(circ: &Circuit, n: usize) -> Vec<(BitVector, BitVector, Vec<usize>)> {
        let mut c = circ.clone();
        for r in 0..c.num_records() {
            c.detector(vec![r], false, None);
        }
        let noisy = crate::noisesim::annotate(&c, &crate::noisesim::NoiseModel::new(1e-3));
        let faults = elementary_faults(&noisy);
        propagate_faults(&noisy, &faults, noisy.instructions.len())
            .into_iter()
            .map(|e| (e.frame_x.slice(0, n), e.frame_z.slice(0, n), e.detectors))
            .collect()
    }

    fn c4_weight(v: &BitVector, block: usize) -> usize {
        let w = block_qubits(block).iter().filter(|&&q| v.get(q)).count();
        w.min(4 - w)
    }

    #[test]
    fn flag_circuits_catch_hooks() {
        let c = csd("c422");
        let n = c.code.n;
        for (circ, x_check) in [(build_flag_c4_x(&c, 1).unwrap(), true), (build_flag_c4_z(&c, 1).unwrap(), false)] {
            assert_eq!(circ.count_gates(|g| matches!(g, Gate::CX(..))), 6);
            let mut ok = true;
            let mut hooks = 0;
            for (ex, ez, dets) in fragment_effects(&circ, n) {
                let hook = if x_check { c4_weight(&ex, 1) } else { c4_weight(&ez, 1) };
                if hook >= 2 {
                    hooks += 1;
                    ok &= dets.contains(&1);
                }
            }
            assert!(hooks > 0);
            assert!(ok, "a weight-2 hook left the flag at 0");
        }
        let r = simulate(&build_flag_c4_x(&c, 0).unwrap(), 0);
        assert!(!r.records[1]);
    }

    #[test]
    fn flagcilla_catches_hooks_per_sector() {
        let c = csd("c422");
        let n = c.code.n;
        let circ = build_flagcilla_c4(&c, 2, true).unwrap();
        assert_eq!(circ.count_gates(|g| matches!(g, Gate::CX(..))), 8);
        for (ex, ez, dets) in fragment_effects(&circ, n) {
            if c4_weight(&ex, 2) >= 2 {
                assert!(dets.contains(&1), "X hook not seen by ZZZZ");
            }
            if c4_weight(&ez, 2) >= 2 {
                assert!(dets.contains(&0), "Z hook not seen by XXXX");
            }
        }
        assert_eq!(build_flagcilla_c4(&c, 2, false).unwrap_err(), CircuitError::FlagcillaBeforeFirst(2));
        assert!(build_flagcilla_c4(&c, 4, true).is_err());
    }

    #[test]
    fn transversal_cnot_preserves_stabilizers() {
        for name in ["c422", "c513"] {
            let code = csd(name).code;
            let n = code.n;
            let cnot = CliffordCircuit::new(2 * n, (0..n).map(|q| Gate::CX(q, n + q)).collect()).unwrap();
            let lift = |v: &BitVector, block: usize, x: bool| {
                let mut out = BitVector::zeros(4 * n);
                for q in v.ones() {
                    out.set(block * n + q + if x { 0 } else { 2 * n }, true);
                }
                out
            };
            let mut group = RowSpace::new(4 * n);
            let mut gens = Vec::new();
            for b in 0..2 {
                for r in code.hx.row_vecs() {
                    gens.push(lift(r, b, true));
                }
                for r in code.hz.row_vecs() {
                    gens.push(lift(r, b, false));
                }
            }
            for g in &gens {
                group.insert(g.clone());
            }
            for g in &gens {
                assert!(group.contains(&cnot.conjugate(g)));
            }
        }
    }

    #[test]
    fn memory_noiseless_has_no_flips() {
        let c = csd("c422");
        let pc = build_memory_circuit(&c, 4, 0.0, 0.0);
        for seed in 0..3 {
            let r = simulate(&pc.circuit, seed);
            assert!(r.detectors.iter().all(|d| !d));
            assert!(r.observables.iter().all(|o| !o));
        }
        let detectors_per_round = 2 * c.code.hx.rows();
        assert_eq!(pc.circuit.num_detectors(), 4 * detectors_per_round + c.code.hz.rows());
    }

    /// Random logical stabilizer input on block 0, via ideal logical Pauli
    /// measurements.
    fn random_input(code: &CssCode, total: usize, anc: usize, seed: u64) -> Circuit {
        let mut c = Circuit::new(total);
        encode_zero(&mut c, code, &(0..code.n).collect::<Vec<_>>());
        let mut s = seed;
        for _ in 0..3 {
            let mut p = PauliOperator::identity(code.n);
            for j in 0..code.k() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                match (s >> 33) % 4 {
                    1 => p = p.mul(&code.logical_x[j]),
                    2 => p = p.mul(&code.logical_z[j]),
                    3 => p = p.mul(&logical_y(code, j)),
                    _ => {}
                }
            }
            p.set_sign_power(0);
            if p.weight() > 0 {
                measure_pauli_ideal(&mut c, &p, 0, anc);
            }
        }
        c
    }

    /// All Hermitian logical Paulis `(per-qubit types, operator)`.
    fn logical_paulis(code: &CssCode) -> Vec<(Vec<u8>, PauliOperator)> {
        let k = code.k();
        (0..4usize.pow(k as u32))
            .map(|mut m| {
                let mut types = Vec::new();
                let mut p = PauliOperator::identity(code.n);
                for j in 0..k {
                    let t = (m % 4) as u8;
                    m /= 4;
                    types.push(t);
                    match t {
                        1 => p = p.mul(&code.logical_x[j]),
                        2 => p = p.mul(&code.logical_z[j]),
                        3 => p = p.mul(&logical_y(code, j)),
                        _ => {}
                    }
                }
                (types, p)
            })
            .collect()
    }

    /// Logical Pauli with per-qubit types, built on the output indices.
    fn build_logical(code: &CssCode, types: &[u8]) -> PauliOperator {
        let mut p = PauliOperator::identity(code.n);
        for (j, &t) in types.iter().enumerate() {
            match t {
                1 => p = p.mul(&code.logical_x[j]),
                2 => p = p.mul(&code.logical_z[j]),
                3 => p = p.mul(&logical_y(code, j)),
                _ => {}
            }
        }
        p
    }

    fn check_teleport(name: &str, kind: TeleportKind) {
        let c = csd(name);
        let code = &c.code;
        let tele = build_injection_circuit(&c, kind).unwrap();
        let total = tele.circuit.n_qubits;
        let anc = total - 1;
        for seed in 0..6 {
            let input = random_input(code, total, anc, seed);
            let before = simulate(&input, seed).tableau;
            let mut full = input.clone();
            full.append(&tele.circuit);
            let after = simulate(&full, seed).tableau;
            let mut checked = 0;
            for (types, p) in logical_paulis(code) {
                let Some(sign) = before.expectation(&embed(&p, 0, total)) else { continue };
                // Per-qubit images: S maps X->Y, Y->-X; √X maps Z->-Y, Y->Z.
                let mut out_types = vec![0u8; types.len()];
                let mut flip = false;
                for (j, &t) in types.iter().enumerate() {
                    let (nt, neg) = match (kind, t) {
                        (TeleportKind::SqrtXTeleport, 2) => (3, true),
                        (TeleportKind::SqrtXTeleport, 3) => (2, false),
                        (TeleportKind::SqrtXTeleport, t) => (t, false),
                        (_, 1) => (3, false),
                        (_, 3) => (1, true),
                        (_, t) => (t, false),
                    };
                    out_types[j] = nt;
                    flip ^= neg;
                }
                let q = build_logical(code, &out_types);
                let got = after.expectation(&embed(&q, tele.output.start, total));
                assert_eq!(got, Some(sign ^ flip), "{name} {kind:?} seed {seed} types {types:?}");
                checked += 1;
            }
            assert!(checked >= 1 << code.k());
        }
    }

    #[test]
    fn s_teleport_applies_s() {
        check_teleport("c422", TeleportKind::STeleport);
        check_teleport("c513", TeleportKind::STeleport);
    }

    #[test]
    fn knill_s_applies_s() {
        check_teleport("c422", TeleportKind::KnillS);
    }

    #[test]
    fn sqrt_x_teleport_applies_sqrt_x() {
        check_teleport("c422", TeleportKind::SqrtXTeleport);
        check_teleport("c513", TeleportKind::SqrtXTeleport);
    }
}
