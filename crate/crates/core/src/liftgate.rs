//! Clifford circuits, their logical action, gate lifting to the symplectic
//! double and its `C4` concatenation, and symplectic group computations.
//!
//! Everything here is phase-free: gates act on `(x | z)` vectors and
//! logical actions are symplectic matrices in the code's logical basis
//! `(X̄_0..X̄_{t-1} | Z̄_0..Z̄_{t-1})`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codeforge::{ConcatLayout, CssCode, StabilizerCode, StabilizerView, ZXDuality};
use crate::f2core::{symplectic_form, BitMatrix, BitVector, RowSpace, SymplecticMatrix};

pub type LogicalAction = SymplecticMatrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiftError {
    #[error("not a logical gate: image of check {0} leaves the stabilizer group")]
    NotALogicalGate(usize),
    #[error("invalid circuit: {0}")]
    BadCircuit(String),
    #[error("brute-force budget exceeded ({0} candidates)")]
    BudgetExceeded(u128),
    #[error("closure exceeded cap {0}")]
    CapExceeded(usize),
    #[error("symplectic dimension {0} too large")]
    DimensionTooLarge(usize),
    #[error("gate {0} has no SWAP-transversal image on the concatenated code")]
    Unsupported(String),
}

/// Clifford gates acting on qubit indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    SqrtX(usize),
    SqrtXdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    CX(usize, usize),
    CY(usize, usize),
    CZ(usize, usize),
    Swap(usize, usize),
}

impl Gate {
    #[must_use]
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::Sdg(q) | Gate::SqrtX(q) | Gate::SqrtXdg(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => {
                (q, None)
            }
            Gate::CX(a, b) | Gate::CY(a, b) | Gate::CZ(a, b) | Gate::Swap(a, b) => (a, Some(b)),
        }
    }

    /// The same gate on qubits shifted by `off`.
    #[must_use]
    pub fn shifted(&self, off: usize) -> Self {
        match *self {
            Gate::H(q) => Gate::H(q + off),
            Gate::S(q) => Gate::S(q + off),
            Gate::Sdg(q) => Gate::Sdg(q + off),
            Gate::SqrtX(q) => Gate::SqrtX(q + off),
            Gate::SqrtXdg(q) => Gate::SqrtXdg(q + off),
            Gate::X(q) => Gate::X(q + off),
            Gate::Y(q) => Gate::Y(q + off),
            Gate::Z(q) => Gate::Z(q + off),
            Gate::CX(a, b) => Gate::CX(a + off, b + off),
            Gate::CY(a, b) => Gate::CY(a + off, b + off),
            Gate::CZ(a, b) => Gate::CZ(a + off, b + off),
            Gate::Swap(a, b) => Gate::Swap(a + off, b + off),
        }
    }

    #[must_use]
    pub fn is_two_qubit(&self) -> bool {
        self.qubits().1.is_some()
    }

    #[must_use]
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::S(_) => "S",
            Gate::Sdg(_) => "S_DAG",
            Gate::SqrtX(_) => "SQRT_X",
            Gate::SqrtXdg(_) => "SQRT_X_DAG",
            Gate::X(_) => "X",
            Gate::Y(_) => "Y",
            Gate::Z(_) => "Z",
            Gate::CX(..) => "CX",
            Gate::CY(..) => "CY",
            Gate::CZ(..) => "CZ",
            Gate::Swap(..) => "SWAP",
        }
    }

    /// Builds a gate from its text name.
    #[must_use]
    pub fn from_name(name: &str, a: usize, b: Option<usize>) -> Option<Self> {
        Some(match (name, b) {
            ("H", None) => Gate::H(a),
            ("S", None) => Gate::S(a),
            ("S_DAG", None) => Gate::Sdg(a),
            ("SQRT_X", None) => Gate::SqrtX(a),
            ("SQRT_X_DAG", None) => Gate::SqrtXdg(a),
            ("X", None) => Gate::X(a),
            ("Y", None) => Gate::Y(a),
            ("Z", None) => Gate::Z(a),
            ("CX", Some(b)) => Gate::CX(a, b),
            ("CY", Some(b)) => Gate::CY(a, b),
            ("CZ", Some(b)) => Gate::CZ(a, b),
            ("SWAP", Some(b)) => Gate::Swap(a, b),
            _ => return None,
        })
    }

    /// Conjugates the symplectic vector `v` (length `2n`) by this gate.
    #[inline]
    pub fn conjugate(&self, v: &mut BitVector, n: usize) {
        let g = |v: &BitVector, i: usize| v.get(i);
        match *self {
            Gate::H(q) => {
                let (x, z) = (g(v, q), g(v, n + q));
                v.set(q, z);
                v.set(n + q, x);
            }
            Gate::S(q) | Gate::Sdg(q) => {
                if g(v, q) {
                    v.flip(n + q);
                }
            }
            Gate::SqrtX(q) | Gate::SqrtXdg(q) => {
                if g(v, n + q) {
                    v.flip(q);
                }
            }
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
            Gate::CX(c, t) => {
                if g(v, c) {
                    v.flip(t);
                }
                if g(v, n + t) {
                    v.flip(n + c);
                }
            }
            Gate::CZ(a, b) => {
                let (xa, xb) = (g(v, a), g(v, b));
                if xb {
                    v.flip(n + a);
                }
                if xa {
                    v.flip(n + b);
                }
            }
            Gate::CY(c, t) => {
                let (xc, xt, zt) = (g(v, c), g(v, t), g(v, n + t));
                if xc {
                    v.flip(t);
                    v.flip(n + t);
                }
                if xt ^ zt {
                    v.flip(n + c);
                }
            }
            Gate::Swap(a, b) => {
                let (xa, za, xb, zb) = (g(v, a), g(v, n + a), g(v, b), g(v, n + b));
                v.set(a, xb);
                v.set(b, xa);
                v.set(n + a, zb);
                v.set(n + b, za);
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.qubits() {
            (a, None) => write!(f, "{} {a}", self.name()),
            (a, Some(b)) => write!(f, "{} {a} {b}", self.name()),
        }
    }
}

/// Ordered list of Clifford gates on `n` qubits (first gate applied first).
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CliffordCircuit {
    pub n: usize,
    pub ops: Vec<Gate>,
}

impl CliffordCircuit {
    #[must_use]
    pub fn empty(n: usize) -> Self {
        Self { n, ops: Vec::new() }
    }

    pub fn new(n: usize, ops: Vec<Gate>) -> Result<Self, LiftError> {
        let mut c = Self::empty(n);
        for g in ops {
            c.try_push(g)?;
        }
        Ok(c)
    }

    pub fn try_push(&mut self, g: Gate) -> Result<(), LiftError> {
        let (a, b) = g.qubits();
        if a >= self.n || b.is_some_and(|b| b >= self.n) {
            return Err(LiftError::BadCircuit(format!("{g} out of range for {} qubits", self.n)));
        }
        if b == Some(a) {
            return Err(LiftError::BadCircuit(format!("{g} acts twice on one qubit")));
        }
        self.ops.push(g);
        Ok(())
    }

    /// Appends `g`; panics on invalid indices.
    pub fn push(&mut self, g: Gate) {
        self.try_push(g).expect("valid gate");
    }

    pub fn extend(&mut self, other: &CliffordCircuit) {
        assert_eq!(self.n, other.n);
        self.ops.extend_from_slice(&other.ops);
    }

    /// Conjugates a symplectic vector through the whole circuit.
    #[must_use]
    pub fn conjugate(&self, v: &BitVector) -> BitVector {
        let mut v = v.clone();
        for g in &self.ops {
            g.conjugate(&mut v, self.n);
        }
        v
    }

    /// Symplectic matrix of the circuit on all `n` physical qubits.
    #[must_use]
    pub fn physical_symplectic(&self) -> SymplecticMatrix {
        let d = 2 * self.n;
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            cols.push(self.conjugate(&BitVector::from_indices(d, &[j])));
        }
        SymplecticMatrix::new(BitMatrix::from_rows(d, cols).transpose()).expect("square")
    }

    #[must_use]
    pub fn words(&self) -> Vec<String> {
        self.ops.iter().map(ToString::to_string).collect()
    }
}

/// Logical action of `circuit` on `code`, after checking that every check
/// is mapped into the stabilizer group.
pub fn logical_action<C: StabilizerView + ?Sized>(circuit: &CliffordCircuit, code: &C) -> Result<LogicalAction, LiftError> {
    let n = code.num_qubits();
    if circuit.n != n {
        return Err(LiftError::BadCircuit(format!("circuit on {} qubits, code on {n}", circuit.n)));
    }
    let stabs = code.stabilizer_rows();
    let span = RowSpace::from_matrix(&BitMatrix::from_rows(2 * n, stabs.clone()));
    for (i, s) in stabs.iter().enumerate() {
        if !span.contains(&circuit.conjugate(s)) {
            return Err(LiftError::NotALogicalGate(i));
        }
    }
    let (lx, lz) = code.logical_rows();
    let t = lx.len();
    let mut m = BitMatrix::zeros(2 * t, 2 * t);
    for (col, l) in lx.iter().chain(&lz).enumerate() {
        let img = circuit.conjugate(l);
        let mut residual = img.clone();
        for j in 0..t {
            if symplectic_form(&img, &lz[j]) {
                m.set(j, col, true);
                residual.xor_assign(&lx[j]);
            }
            if symplectic_form(&img, &lx[j]) {
                m.set(t + j, col, true);
                residual.xor_assign(&lz[j]);
            }
        }
        if !span.contains(&residual) {
            return Err(LiftError::NotALogicalGate(usize::MAX));
        }
    }
    Ok(SymplecticMatrix::new(m).expect("square"))
}

/// Phase-free single-qubit Clifford: `(x, z) -> (a x + b z, c x + d z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clifford1 {
    pub m: [[bool; 2]; 2],
}

impl Clifford1 {
    pub const I: Self = Self { m: [[true, false], [false, true]] };

    #[must_use]
    pub fn of_gate(g: &Gate) -> Self {
        let (t, f) = (true, false);
        match g {
            Gate::H(_) => Self { m: [[f, t], [t, f]] },
            Gate::S(_) | Gate::Sdg(_) => Self { m: [[t, f], [t, t]] },
            Gate::SqrtX(_) | Gate::SqrtXdg(_) => Self { m: [[t, t], [f, t]] },
            _ => Self::I,
        }
    }

    /// `self` after `other`.
    #[must_use]
    pub fn after(&self, other: &Self) -> Self {
        let a = self.m;
        let b = other.m;
        let e = |i: usize, j: usize| (a[i][0] & b[0][j]) ^ (a[i][1] & b[1][j]);
        Self { m: [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]] }
    }

    #[must_use]
    pub fn apply(&self, x: bool, z: bool) -> (bool, bool) {
        ((self.m[0][0] & x) ^ (self.m[0][1] & z), (self.m[1][0] & x) ^ (self.m[1][1] & z))
    }

    /// Shortest `H`/`S` word (time order) realizing this element on qubit `q`.
    #[must_use]
    pub fn word(&self, q: usize) -> Vec<Gate> {
        single_qubit_classes()
            .into_iter()
            .find(|(c, _)| c == self)
            .map(|(_, w)| w.into_iter().map(|k| if k == 'H' { Gate::H(q) } else { Gate::S(q) }).collect())
            .expect("every 2x2 symplectic matrix is a class")
    }
}

/// The six phase-free single-qubit Cliffords with shortest words over
/// `{H, S}`, in BFS order.
#[must_use]
pub fn single_qubit_classes() -> Vec<(Clifford1, Vec<char>)> {
    let mut out = vec![(Clifford1::I, Vec::new())];
    let mut i = 0;
    while i < out.len() {
        let (c, w) = out[i].clone();
        for (k, g) in [('H', Gate::H(0)), ('S', Gate::S(0))] {
            let next = Clifford1::of_gate(&g).after(&c);
            if !out.iter().any(|(d, _)| *d == next) {
                let mut w2 = w.clone();
                w2.push(k);
                out.push((next, w2));
            }
        }
        i += 1;
    }
    out
}

/// Lifts a single-qubit word on qubit `i` of the seed to the fold pair
/// `{i, tau(i)}`: `H -> SWAP`, `S, S† -> CX(i, tau i)`, `√X -> CX(tau i, i)`,
/// Paulis -> nothing.
pub fn lift_single_qubit(word: &[Gate], i: usize, tau: &ZXDuality) -> Result<CliffordCircuit, LiftError> {
    let j = tau.apply(i);
    let mut c = CliffordCircuit::empty(tau.len());
    for g in word {
        if g.qubits() != (i, None) {
            return Err(LiftError::BadCircuit(format!("{g} is not a single-qubit gate on {i}")));
        }
        match g {
            Gate::H(_) => c.try_push(Gate::Swap(i, j))?,
            Gate::S(_) | Gate::Sdg(_) => c.try_push(Gate::CX(i, j))?,
            Gate::SqrtX(_) | Gate::SqrtXdg(_) => c.try_push(Gate::CX(j, i))?,
            _ => {}
        }
    }
    Ok(c)
}

/// `SWAP(i,j) SWAP(tau i, tau j)`.
pub fn lift_swap(i: usize, j: usize, tau: &ZXDuality) -> Result<CliffordCircuit, LiftError> {
    if i == j {
        return Err(LiftError::BadCircuit("SWAP on one qubit".into()));
    }
    CliffordCircuit::new(tau.len(), vec![Gate::Swap(i, j), Gate::Swap(tau.apply(i), tau.apply(j))])
}

/// Lifts a seed circuit made of single-qubit gates and SWAPs to the double.
pub fn lift_circuit(c: &CliffordCircuit, tau: &ZXDuality) -> Result<CliffordCircuit, LiftError> {
    let mut out = CliffordCircuit::empty(tau.len());
    for g in &c.ops {
        let piece = match *g {
            Gate::Swap(a, b) => lift_swap(a, b, tau)?,
            g if !g.is_two_qubit() => lift_single_qubit(&[g], g.qubits().0, tau)?,
            g => return Err(LiftError::Unsupported(g.to_string())),
        };
        out.extend(&piece);
    }
    Ok(out)
}

/// Rewrites a fold-transversal circuit on the double into its physical
/// form on the concatenated code using the `C4` identities
/// `CNOT̄₁₂ = SWAP₂₄`, `CNOT̄₂₁ = SWAP₃₄`, `SWAP̄₁₂ = SWAP₂₃`,
/// `CZ̄ = S†₁S₂S₃S†₄` and block swaps for paired SWAPs.
pub fn double_to_csd(c: &CliffordCircuit, layout: &ConcatLayout) -> Result<CliffordCircuit, LiftError> {
    let n = 4 * layout.num_blocks();
    let mut out = CliffordCircuit::empty(n);
    let mut k = 0;
    while k < c.ops.len() {
        let g = c.ops[k];
        let (a, b) = g.qubits();
        let Some(b) = b else {
            if matches!(g, Gate::X(_) | Gate::Y(_) | Gate::Z(_)) {
                k += 1;
                continue;
            }
            return Err(LiftError::Unsupported(g.to_string()));
        };
        let (ba, sa) = layout.pair_map[a];
        let (bb, sb) = layout.pair_map[b];
        let base = 4 * ba;
        if ba == bb {
            match g {
                Gate::Swap(..) => out.push(Gate::Swap(base + 1, base + 2)),
                Gate::CX(..) if sa == 1 => out.push(Gate::Swap(base + 1, base + 3)),
                Gate::CX(..) => out.push(Gate::Swap(base + 2, base + 3)),
                Gate::CZ(..) => {
                    out.push(Gate::Sdg(base));
                    out.push(Gate::S(base + 1));
                    out.push(Gate::S(base + 2));
                    out.push(Gate::Sdg(base + 3));
                }
                _ => return Err(LiftError::Unsupported(g.to_string())),
            }
            k += 1;
            continue;
        }
        // A SWAP across blocks must be followed by its partner across the fold.
        let partner = c.ops.get(k + 1).copied();
        let ok = matches!(g, Gate::Swap(..))
            && matches!(partner, Some(Gate::Swap(p, q))
                if { let (bp, _) = layout.pair_map[p]; let (bq, _) = layout.pair_map[q];
                     (bp, bq) == (ba, bb) || (bp, bq) == (bb, ba) } && p != a && q != b);
        if !ok {
            return Err(LiftError::Unsupported(format!("unpaired {g}")));
        }
        for o in 0..4 {
            out.push(Gate::Swap(4 * ba + o, 4 * bb + o));
        }
        if sa != sb {
            out.push(Gate::Swap(4 * ba + 1, 4 * ba + 2));
            out.push(Gate::Swap(4 * bb + 1, 4 * bb + 2));
        }
        k += 2;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transversality {
    Transversal,
    SwapTransversal,
    FoldTransversal,
    Injected,
}

#[derive(Clone, Debug)]
pub struct GateRecord {
    pub label: String,
    pub circuit: CliffordCircuit,
    pub action: LogicalAction,
    pub transversality: Transversality,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateRecordJson {
    pub label: String,
    pub circuit: Vec<String>,
    pub action: Vec<String>,
    pub transversality: Transversality,
}

impl From<&GateRecord> for GateRecordJson {
    fn from(g: &GateRecord) -> Self {
        Self {
            label: g.label.clone(),
            circuit: g.circuit.words(),
            action: g.action.matrix().to_bitstrings(),
            transversality: g.transversality,
        }
    }
}

/// The code on which a fold-transversal gate is realized.
#[derive(Clone, Copy, Debug)]
pub enum FoldTarget<'a> {
    Double { code: &'a CssCode, tau: &'a ZXDuality },
    Csd { code: &'a CssCode, layout: &'a ConcatLayout },
}

impl FoldTarget<'_> {
    fn code(&self) -> &CssCode {
        match self {
            FoldTarget::Double { code, .. } | FoldTarget::Csd { code, .. } => code,
        }
    }
}

fn record(label: &str, circuit: CliffordCircuit, target: &FoldTarget<'_>, tr: Transversality) -> Result<GateRecord, LiftError> {
    let action = logical_action(&circuit, target.code())?;
    Ok(GateRecord { label: label.to_string(), circuit, action, transversality: tr })
}

/// `H_τ`: H on every qubit plus SWAPs across the duality on the double;
/// plain `⊗H` on the concatenated code.
pub fn h_tau(target: FoldTarget<'_>) -> Result<GateRecord, LiftError> {
    match target {
        FoldTarget::Double { code, tau } => {
            let mut c = CliffordCircuit::empty(code.n);
            for q in 0..code.n {
                c.push(Gate::H(q));
            }
            for (i, j) in tau.orbits() {
                c.push(Gate::Swap(i, j));
            }
            record("H_tau", c, &target, Transversality::FoldTransversal)
        }
        FoldTarget::Csd { code, .. } => {
            let c = CliffordCircuit::new(code.n, (0..code.n).map(Gate::H).collect())?;
            record("H_tau", c, &target, Transversality::Transversal)
        }
    }
}

/// `S_τ`: CZ across every duality orbit on the double; `S†SSS†` per block
/// on the concatenated code.
pub fn s_tau(target: FoldTarget<'_>) -> Result<GateRecord, LiftError> {
    match target {
        FoldTarget::Double { code, tau } => {
            let c = CliffordCircuit::new(code.n, tau.orbits().into_iter().map(|(i, j)| Gate::CZ(i, j)).collect())?;
            record("S_tau", c, &target, Transversality::FoldTransversal)
        }
        FoldTarget::Csd { code, layout } => {
            let mut c = CliffordCircuit::empty(code.n);
            for b in 0..layout.num_blocks() {
                c.push(Gate::Sdg(4 * b));
                c.push(Gate::S(4 * b + 1));
                c.push(Gate::S(4 * b + 2));
                c.push(Gate::Sdg(4 * b + 3));
            }
            record("S_tau", c, &target, Transversality::Transversal)
        }
    }
}

/// SWAP network moving the content of qubit `q` to position `perm[q]`.
#[must_use]
pub fn permutation_swaps(perm: &[usize]) -> Vec<Gate> {
    let n = perm.len();
    let mut content: Vec<usize> = (0..n).collect();
    let mut where_is: Vec<usize> = (0..n).collect();
    let mut want = vec![0; n];
    for (q, &p) in perm.iter().enumerate() {
        want[p] = q;
    }
    let mut out = Vec::new();
    for p in 0..n {
        if content[p] != want[p] {
            let r = where_is[want[p]];
            out.push(Gate::Swap(p, r));
            let (cp, cr) = (content[p], content[r]);
            content.swap(p, r);
            where_is[cp] = r;
            where_is[cr] = p;
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    fn rec(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur[k..=i].rotate_right(1);
            rec(k + 1, cur, out);
            cur[k..=i].rotate_left(1);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Enumerates every (single-qubit Clifford layer, qubit relabeling) pair
/// that preserves the stabilizer group of a seed with `n <= 6`, deduplicated
/// by logical action. `budget` caps the number of candidates inspected.
pub fn find_swap_transversal_gates(code: &StabilizerCode, budget: u128) -> Result<Vec<GateRecord>, LiftError> {
    let n = code.n;
    let fact: u128 = (1..=n as u128).product();
    let total = fact * 6u128.pow(n as u32);
    if n > 6 || total > budget {
        return Err(LiftError::BudgetExceeded(total));
    }
    let classes = single_qubit_classes();
    let to_bits = |v: &BitVector| -> u32 { (0..2 * n).filter(|&i| v.get(i)).map(|i| 1u32 << i).sum() };
    let rows: Vec<u32> = code.stabilizer_rows().iter().map(to_bits).collect();
    let mut group = vec![false; 1 << (2 * n)];
    let basis = RowSpace::from_matrix(&code.check_matrix());
    let gens: Vec<u32> = basis.vectors().map(to_bits).collect();
    for mask in 0u32..(1 << gens.len()) {
        let mut e = 0;
        for (i, g) in gens.iter().enumerate() {
            if (mask >> i) & 1 == 1 {
                e ^= g;
            }
        }
        group[e as usize] = true;
    }
    let image = |row: u32, perm: &[usize], assign: &[usize]| -> u32 {
        let mut out = 0;
        for q in 0..n {
            let x = (row >> q) & 1 == 1;
            let z = (row >> (n + q)) & 1 == 1;
            let (x2, z2) = classes[assign[q]].0.apply(x, z);
            out |= (u32::from(x2)) << perm[q];
            out |= (u32::from(z2)) << (n + perm[q]);
        }
        out
    };
    let perms = permutations(n);
    let mut found: Vec<(Vec<usize>, Vec<usize>)> = perms
        .par_iter()
        .flat_map_iter(|perm| {
            let mut hits = Vec::new();
            let mut assign = vec![0usize; n];
            loop {
                if rows.iter().all(|&r| group[image(r, perm, &assign) as usize]) {
                    hits.push((perm.clone(), assign.clone()));
                }
                let mut q = 0;
                loop {
                    if q == n {
                        return hits;
                    }
                    assign[q] += 1;
                    if assign[q] < 6 {
                        break;
                    }
                    assign[q] = 0;
                    q += 1;
                }
            }
        })
        .collect();
    found.sort();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (perm, assign) in found {
        let mut c = CliffordCircuit::empty(n);
        for q in 0..n {
            for g in classes[assign[q]].0.word(q) {
                c.push(g);
            }
        }
        for g in permutation_swaps(&perm) {
            c.push(g);
        }
        let action = logical_action(&c, code)?;
        if seen.insert(action.key()) {
            let label = format!("aut{}", out.len());
            out.push(GateRecord { label, circuit: c, action, transversality: Transversality::SwapTransversal });
        }
    }
    Ok(out)
}

/// Generators of `G_τ` realized on the concatenated code: every seed
/// SWAP-transversal gate lifted through the double, plus `H_τ` and `S_τ`.
pub fn g_tau_generators(
    seed_gates: &[GateRecord],
    tau: &ZXDuality,
    code: &CssCode,
    layout: &ConcatLayout,
) -> Result<Vec<GateRecord>, LiftError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let target = FoldTarget::Csd { code, layout };
    for g in seed_gates {
        let double = lift_circuit(&g.circuit, tau)?;
        let phys = double_to_csd(&double, layout)?;
        let rec = record(&format!("lift({})", g.label), phys, &target, Transversality::SwapTransversal)?;
        if !rec.action.is_identity() && seen.insert(rec.action.key()) {
            out.push(rec);
        }
    }
    out.push(h_tau(target)?);
    out.push(s_tau(target)?);
    Ok(out)
}

/// Logical `S` on logical qubit `q` of `t`: `Z̄_q += X̄_q`.
#[must_use]
pub fn logical_s(t: usize, q: usize) -> LogicalAction {
    let mut m = BitMatrix::identity(2 * t);
    m.set(t + q, q, true);
    SymplecticMatrix::new(m).expect("square")
}

/// Logical `√X` on logical qubit `q`: `X̄_q += Z̄_q`.
#[must_use]
pub fn logical_sqrt_x(t: usize, q: usize) -> LogicalAction {
    let mut m = BitMatrix::identity(2 * t);
    m.set(q, t + q, true);
    SymplecticMatrix::new(m).expect("square")
}

/// `S` on every logical qubit.
#[must_use]
pub fn logical_global_s(t: usize) -> LogicalAction {
    (0..t).fold(SymplecticMatrix::identity(t), |acc, q| logical_s(t, q).mul(&acc))
}

/// Default injection qubit: the third logical qubit when it exists.
#[must_use]
pub fn default_injection_qubit(t: usize) -> usize {
    if t > 2 {
        2
    } else {
        0
    }
}

/// Whether an `H_τ` action is `⊗H̄` followed by a logical qubit permutation,
/// i.e. off-diagonal blocks `P`, `P` with `P` a permutation matrix.
#[must_use]
pub fn is_hadamard_swap(action: &LogicalAction) -> Option<Vec<usize>> {
    let [a, b, c, d] = action.blocks();
    if !a.is_zero() || !d.is_zero() || b != c {
        return None;
    }
    let t = action.t();
    let mut perm = vec![0; t];
    for j in 0..t {
        let col = b.column(j);
        if col.weight() != 1 {
            return None;
        }
        perm[j] = col.first_one().expect("weight one");
    }
    Some(perm)
}

#[derive(Clone, Debug)]
pub struct Closure {
    pub order: usize,
    pub elements: Vec<LogicalAction>,
}

/// BFS closure of `generators` under multiplication; fails above `cap`.
pub fn group_closure(generators: &[LogicalAction], cap: usize) -> Result<Closure, LiftError> {
    let t = generators.first().map_or(0, SymplecticMatrix::t);
    let id = SymplecticMatrix::identity(t.max(1));
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    seen.insert(id.key(), ());
    let mut elements = vec![id];
    let mut i = 0;
    while i < elements.len() {
        for g in generators {
            let next = g.mul(&elements[i]);
            if seen.insert(next.key(), ()).is_none() {
                if elements.len() >= cap {
                    return Err(LiftError::CapExceeded(cap));
                }
                elements.push(next);
            }
        }
        i += 1;
    }
    Ok(Closure { order: elements.len(), elements })
}

/// `|Sp_{2t}(F_2)| = 2^{t^2} prod_{i=1}^t (4^i - 1)`.
#[must_use]
pub fn sp_order(t: usize) -> BigUint {
    let mut acc = BigUint::from(1u8) << (t * t);
    for i in 1..=t {
        acc *= (BigUint::from(1u8) << (2 * i)) - BigUint::from(1u8);
    }
    acc
}

/// Linear map on `F_2^d` stored by column images, with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Elem {
    cols: Vec<u64>,
    inv: Vec<u64>,
}

fn apply_cols(cols: &[u64], v: u64) -> u64 {
    let mut out = 0;
    let mut v = v;
    while v != 0 {
        out ^= cols[v.trailing_zeros() as usize];
        v &= v - 1;
    }
    out
}

impl Elem {
    fn identity(d: usize) -> Self {
        let cols: Vec<u64> = (0..d).map(|j| 1u64 << j).collect();
        Self { inv: cols.clone(), cols }
    }

    fn from_symplectic(m: &SymplecticMatrix) -> Self {
        let to_cols = |m: &BitMatrix| -> Vec<u64> {
            (0..m.cols()).map(|j| (0..m.rows()).filter(|&i| m.get(i, j)).map(|i| 1u64 << i).sum()).collect()
        };
        Self { cols: to_cols(m.matrix()), inv: to_cols(m.inverse().matrix()) }
    }

    fn apply(&self, v: u64) -> u64 {
        apply_cols(&self.cols, v)
    }

    /// `self ∘ other`.
    fn compose(&self, other: &Self) -> Self {
        Self {
            cols: other.cols.iter().map(|&c| self.apply(c)).collect(),
            inv: self.inv.iter().map(|&c| apply_cols(&other.inv, c)).collect(),
        }
    }

    fn inverse(&self) -> Self {
        Self { cols: self.inv.clone(), inv: self.cols.clone() }
    }

    fn is_identity(&self) -> bool {
        self.cols.iter().enumerate().all(|(j, &c)| c == 1u64 << j)
    }
}

struct Level {
    base: u64,
    /// point -> transversal element mapping `base` to the point.
    orbit: HashMap<u64, Elem>,
    gens: Vec<usize>,
}

fn build_chain(strong: &[Elem], base: &[u64]) -> Vec<Level> {
    let d = strong.first().map_or(0, |e| e.cols.len());
    let mut levels = Vec::with_capacity(base.len());
    for (l, &b) in base.iter().enumerate() {
        let gens: Vec<usize> =
            (0..strong.len()).filter(|&s| base[..l].iter().all(|&p| strong[s].apply(p) == p)).collect();
        let mut orbit = HashMap::new();
        orbit.insert(b, Elem::identity(d));
        let mut queue = VecDeque::from([b]);
        while let Some(p) = queue.pop_front() {
            let u = orbit[&p].clone();
            for &s in &gens {
                let q = strong[s].apply(p);
                if let std::collections::hash_map::Entry::Vacant(e) = orbit.entry(q) {
                    e.insert(strong[s].compose(&u));
                    queue.push_back(q);
                }
            }
        }
        levels.push(Level { base: b, orbit, gens });
    }
    levels
}

/// Strips `h` through levels `from..`; returns the residue and the level at
/// which it left the chain (`levels.len()` when it passed every level).
fn sift(h: &Elem, levels: &[Level], from: usize) -> (Elem, usize) {
    let mut h = h.clone();
    for (l, level) in levels.iter().enumerate().skip(from) {
        let p = h.apply(level.base);
        match level.orbit.get(&p) {
            None => return (h, l),
            Some(u) => h = u.inverse().compose(&h),
        }
    }
    (h, levels.len())
}

fn moved_basis_vector(h: &Elem) -> u64 {
    (0..h.cols.len()).map(|j| 1u64 << j).find(|&e| h.apply(e) != e).expect("non-identity")
}

/// Exact order of the group generated by `generators`, via a stabilizer
/// chain on the nonzero vectors of `F_2^{2t}`. A randomized Schreier-Sims
/// phase builds the chain; a deterministic Schreier generator pass then
/// completes and certifies it.
pub fn group_order(generators: &[LogicalAction], seed: u64) -> Result<BigUint, LiftError> {
    let Some(first) = generators.first() else {
        return Ok(BigUint::from(1u8));
    };
    let d = 2 * first.t();
    if d > 24 {
        return Err(LiftError::DimensionTooLarge(d));
    }
    let mut strong: Vec<Elem> =
        generators.iter().map(Elem::from_symplectic).filter(|e| !e.is_identity()).collect();
    if strong.is_empty() {
        return Ok(BigUint::from(1u8));
    }
    let mut base: Vec<u64> = Vec::new();
    for s in &strong {
        if base.iter().all(|&b| s.apply(b) == b) {
            base.push(moved_basis_vector(s));
        }
    }
    let mut levels = build_chain(&strong, &base);

    let add = |h: Elem, strong: &mut Vec<Elem>, base: &mut Vec<u64>, exit: usize| {
        if exit == base.len() {
            base.push(moved_basis_vector(&h));
        }
        strong.push(h);
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<Elem> = strong.clone();
    while pool.len() < 10 {
        pool.push(strong[pool.len() % strong.len()].clone());
    }
    let mut acc = Elem::identity(d);
    let mut quiet = 0;
    while quiet < 40 {
        let i = rng.gen_range(0..pool.len());
        let mut j = rng.gen_range(0..pool.len());
        while j == i {
            j = rng.gen_range(0..pool.len());
        }
        pool[i] = if rng.gen() { pool[i].compose(&pool[j]) } else { pool[i].compose(&pool[j].inverse()) };
        acc = acc.compose(&pool[i]);
        let (h, exit) = sift(&acc, &levels, 0);
        if h.is_identity() {
            quiet += 1;
        } else {
            quiet = 0;
            add(h, &mut strong, &mut base, exit);
            levels = build_chain(&strong, &base);
        }
    }

    'verify: loop {
        for l in (0..levels.len()).rev() {
            let points: Vec<u64> = levels[l].orbit.keys().copied().collect();
            for p in points {
                for &s in &levels[l].gens {
                    let sp = strong[s].apply(p);
                    let u_p = &levels[l].orbit[&p];
                    let u_sp = &levels[l].orbit[&sp];
                    let schreier = u_sp.inverse().compose(&strong[s].compose(u_p));
                    let (h, exit) = sift(&schreier, &levels, l + 1);
                    if !h.is_identity() {
                        add(h, &mut strong, &mut base, exit);
                        levels = build_chain(&strong, &base);
                        continue 'verify;
                    }
                }
            }
        }
        break;
    }
    Ok(levels.iter().fold(BigUint::from(1u8), |acc, l| acc * BigUint::from(l.orbit.len())))
}

/// True iff the generated group is all of `Sp_{2t}(F_2)`. Uses full
/// enumeration for `t <= 2`, the stabilizer chain otherwise.
pub fn is_full_symplectic(generators: &[LogicalAction]) -> Result<bool, LiftError> {
    let Some(first) = generators.first() else {
        return Ok(false);
    };
    let t = first.t();
    let target = sp_order(t);
    if t <= 2 {
        let cap = usize::try_from(&target).expect("small order");
        return Ok(BigUint::from(group_closure(generators, cap)?.order) == target);
    }
    Ok(group_order(generators, 0x5eed)? == target)
}

/// Generators of the two-block group: each block's generators embedded on
/// its own half plus the transversal CNOTs in both directions.
#[must_use]
pub fn two_block_generators(block_gens: &[LogicalAction]) -> Vec<LogicalAction> {
    let t = block_gens.first().map_or(1, SymplecticMatrix::t);
    let embed = |g: &LogicalAction, offset: usize| {
        let mut m = BitMatrix::identity(4 * t);
        for r in 0..2 * t {
            for c in 0..2 * t {
                let (gr, gc) = (if r < t { r } else { r + t }, if c < t { c } else { c + t });
                m.set(gr + offset, gc + offset, g.get(r, c));
            }
        }
        SymplecticMatrix::new(m).expect("square")
    };
    let mut out = Vec::new();
    for g in block_gens {
        out.push(embed(g, 0));
        out.push(embed(g, t));
    }
    let cnot = |forward: bool| {
        let mut m = BitMatrix::identity(4 * t);
        for i in 0..t {
            if forward {
                // X of block 1 spreads to block 2; Z of block 2 back to block 1.
                m.set(t + i, i, true);
                m.set(2 * t + i, 3 * t + i, true);
            } else {
                m.set(i, t + i, true);
                m.set(3 * t + i, 2 * t + i, true);
            }
        }
        SymplecticMatrix::new(m).expect("square")
    };
    out.push(cnot(true));
    out.push(cnot(false));
    out
}

/// One row of the `[[4,2,2]] -> [[8,4,2]] -> [[16,4,4]]` gate table, with
/// 0-based qubit indices and gates in time order.
#[derive(Clone, Debug)]
pub struct LiftExampleRow {
    pub label: &'static str,
    pub seed: Option<CliffordCircuit>,
    pub double: CliffordCircuit,
    pub csd: Option<CliffordCircuit>,
}

/// The printed gate table for the `c422` seed.
#[must_use]
pub fn lift_example_rows() -> Vec<LiftExampleRow> {
    use Gate::{Sdg, Swap, CX, CZ, H, S};
    let c = |n: usize, ops: Vec<Gate>| CliffordCircuit::new(n, ops).expect("table literal");
    let blockswap = |a: usize, b: usize| (0..4).map(move |i| Swap(4 * a + i, 4 * b + i));
    vec![
        LiftExampleRow {
            label: "row1",
            seed: Some(c(4, vec![H(2), H(3), Swap(2, 3)])),
            double: c(8, vec![Swap(2, 6), Swap(3, 7), Swap(2, 3), Swap(6, 7)]),
            csd: Some(c(16, [Swap(9, 10), Swap(13, 14)].into_iter().chain(blockswap(2, 3)).collect())),
        },
        LiftExampleRow {
            label: "row2",
            seed: Some(c(4, (0..4).map(H).collect())),
            double: c(8, (0..4).map(|i| Swap(i, i + 4)).collect()),
            csd: Some(c(16, (0..4).map(|i| Swap(1 + 4 * i, 2 + 4 * i)).collect())),
        },
        LiftExampleRow {
            label: "row3",
            seed: Some(c(4, vec![H(1), H(3), Swap(2, 3), Swap(1, 3)])),
            double: c(8, vec![Swap(1, 5), Swap(3, 7), Swap(2, 3), Swap(6, 7), Swap(1, 3), Swap(5, 7)]),
            csd: Some(c(
                16,
                [Swap(5, 6), Swap(13, 14)].into_iter().chain(blockswap(2, 3)).chain(blockswap(1, 3)).collect(),
            )),
        },
        LiftExampleRow {
            label: "row4",
            seed: Some(c(4, vec![H(0), S(0), Sdg(1), H(1), Sdg(2), H(2), H(3), S(3)])),
            double: c(8, vec![Swap(0, 4), CX(0, 4), CX(1, 5), Swap(1, 5), CX(2, 6), Swap(2, 6), Swap(3, 7), CX(3, 7)]),
            csd: Some(c(
                16,
                vec![Swap(1, 2), Swap(1, 3), Swap(5, 7), Swap(5, 6), Swap(9, 11), Swap(9, 10), Swap(13, 14), Swap(13, 15)],
            )),
        },
        LiftExampleRow {
            label: "H_tau",
            seed: None,
            double: c(8, (0..8).map(H).chain((0..4).map(|i| Swap(i, i + 4))).collect()),
            csd: Some(c(16, (0..16).map(H).collect())),
        },
        LiftExampleRow {
            label: "S_tau",
            seed: None,
            double: c(8, (0..4).map(|i| CZ(i, i + 4)).collect()),
            csd: Some(c(
                16,
                (0..4).flat_map(|i| [Sdg(4 * i), Sdg(4 * i + 3), S(4 * i + 1), S(4 * i + 2)]).collect(),
            )),
        },
        LiftExampleRow { label: "global_S_double", seed: None, double: c(8, (0..8).map(S).collect()), csd: None },
        LiftExampleRow { label: "swap_double", seed: None, double: c(8, vec![Swap(5, 6), Swap(2, 4)]), csd: None },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codeforge::{seed_library, Csd};
    use crate::f2core::{is_symplectic, BitVector};

    fn csd(name: &str) -> Csd {
        Csd::from_seed(name).unwrap()
    }

    #[test]
    fn single_qubit_classes_are_six() {
        let cl = single_qubit_classes();
        assert_eq!(cl.len(), 6);
        for (c, w) in &cl {
            let gates: Vec<Gate> = w.iter().map(|&k| if k == 'H' { Gate::H(0) } else { Gate::S(0) }).collect();
            let prod = gates.iter().fold(Clifford1::I, |acc, g| Clifford1::of_gate(g).after(&acc));
            assert_eq!(prod, *c);
        }
    }

    #[test]
    fn cy_propagation() {
        // CY (X ⊗ I) CY† = X ⊗ Y and CY (Z ⊗ I) CY† = Z ⊗ I.
        let mut v = BitVector::parse("10 00").unwrap();
        Gate::CY(0, 1).conjugate(&mut v, 2);
        assert_eq!(v, BitVector::parse("11 01").unwrap());
        let mut v = BitVector::parse("00 10").unwrap();
        Gate::CY(0, 1).conjugate(&mut v, 2);
        assert_eq!(v, BitVector::parse("00 10").unwrap());
    }

    #[test]
    fn physical_symplectic_of_gates() {
        for g in [Gate::H(0), Gate::S(1), Gate::CX(0, 1), Gate::CZ(1, 0), Gate::CY(0, 1), Gate::Swap(0, 1), Gate::SqrtX(1)] {
            let c = CliffordCircuit::new(2, vec![g]).unwrap();
            assert!(is_symplectic(&c.physical_symplectic()), "{g}");
        }
        assert!(CliffordCircuit::new(2, vec![Gate::CX(1, 1)]).is_err());
        assert!(CliffordCircuit::new(2, vec![Gate::H(2)]).is_err());
    }

    #[test]
    fn empty_circuit_identity() {
        let c = csd("c422");
        let a = logical_action(&CliffordCircuit::empty(16), &c.code).unwrap();
        assert!(a.is_identity());
    }

    #[test]
    fn non_logical_rejected() {
        let c = csd("c422");
        let circ = CliffordCircuit::new(16, vec![Gate::H(0)]).unwrap();
        assert!(matches!(logical_action(&circ, &c.code), Err(LiftError::NotALogicalGate(_))));
    }

    #[test]
    fn lifting_examples() {
        let c = csd("c422");
        let l = lift_single_qubit(&[Gate::H(2)], 2, &c.tau).unwrap();
        assert_eq!(l.ops, vec![Gate::Swap(2, 6)]);
        assert!(lift_single_qubit(&[], 1, &c.tau).unwrap().ops.is_empty());
        let l = lift_single_qubit(&[Gate::H(0), Gate::S(0)], 0, &c.tau).unwrap();
        assert_eq!(l.ops, vec![Gate::Swap(0, 4), Gate::CX(0, 4)]);
        assert_eq!(lift_swap(2, 3, &c.tau).unwrap().ops, vec![Gate::Swap(2, 3), Gate::Swap(6, 7)]);
        assert!(lift_swap(1, 1, &c.tau).is_err());
    }

    #[test]
    fn lift_examples_match() {
        let c = csd("c422");
        for row in lift_example_rows() {
            let on_double = logical_action(&row.double, &c.double).unwrap_or_else(|e| panic!("{}: {e}", row.label));
            assert!(is_symplectic(&on_double));
            if let Some(seed) = &row.seed {
                assert!(logical_action(seed, &c.seed).is_ok(), "{}", row.label);
                assert_eq!(lift_circuit(seed, &c.tau).unwrap(), row.double, "{}", row.label);
            }
            if let Some(phys) = &row.csd {
                let on_csd = logical_action(phys, &c.code).unwrap_or_else(|e| panic!("{}: {e}", row.label));
                assert_eq!(on_csd, on_double, "{}", row.label);
            }
        }
    }

    #[test]
    fn double_to_csd_reproduces_table_words() {
        let c = csd("c422");
        for row in lift_example_rows().into_iter().filter(|r| r.seed.is_some()) {
            let converted = double_to_csd(&row.double, &c.layout).unwrap();
            assert_eq!(converted, row.csd.clone().unwrap(), "{}", row.label);
        }
    }

    #[test]
    fn fold_gates_have_expected_shapes() {
        let c = csd("c422");
        for target in [FoldTarget::Double { code: &c.double, tau: &c.tau }, FoldTarget::Csd { code: &c.code, layout: &c.layout }] {
            let h = h_tau(target).unwrap();
            let [a, _, _, d] = h.action.blocks();
            assert!(a.is_zero() && d.is_zero());
            assert!(h.action.mul(&h.action).is_identity());
            assert!(is_hadamard_swap(&h.action).is_some());

            let s = s_tau(target).unwrap();
            let [a, b, cc, d] = s.action.blocks();
            let t = s.action.t();
            assert_eq!(a, BitMatrix::identity(t));
            assert_eq!(d, BitMatrix::identity(t));
            assert!(b.is_zero());
            assert_eq!(cc, cc.transpose());
            assert!((0..t).all(|i| !cc.get(i, i)));
            assert!(s.action.mul(&s.action).is_identity());
        }
        let s = s_tau(FoldTarget::Csd { code: &c.code, layout: &c.layout }).unwrap();
        assert!(s.circuit.ops.iter().all(|g| matches!(g, Gate::S(_) | Gate::Sdg(_))));
        let h = h_tau(FoldTarget::Csd { code: &c.code, layout: &c.layout }).unwrap();
        assert_eq!(h.circuit.ops, (0..16).map(Gate::H).collect::<Vec<_>>());
    }

    #[test]
    fn lifted_actions_are_block_diagonal() {
        let c = csd("c422");
        let gates = find_swap_transversal_gates(&c.seed, 1 << 20).unwrap();
        for g in &gates {
            let lifted = lift_circuit(&g.circuit, &c.tau).unwrap();
            let a = logical_action(&lifted, &c.double).unwrap();
            let [m, b, cc, d] = a.blocks();
            assert!(b.is_zero() && cc.is_zero());
            assert_eq!(d, m.inverse().unwrap().transpose());
            // The X block is the seed action itself in the doubled basis.
            assert_eq!(m, g.action.matrix().clone());
        }
    }

    #[test]
    fn brute_force_cases() {
        let trivial = crate::codeforge::compute_logicals(&StabilizerCode::from_checks(1, vec![])).unwrap();
        assert_eq!(find_swap_transversal_gates(&trivial, 1000).unwrap().len(), 6);
        let seven = StabilizerCode::from_checks(7, vec![]);
        assert!(matches!(find_swap_transversal_gates(&seven, u128::MAX), Err(LiftError::BudgetExceeded(_))));

        let c = csd("c422");
        let gates = find_swap_transversal_gates(&c.seed, 1 << 20).unwrap();
        let keys: HashSet<Vec<u64>> = gates.iter().map(|g| g.action.key()).collect();
        for row in lift_example_rows().into_iter().filter_map(|r| r.seed) {
            let a = logical_action(&row, &c.seed).unwrap();
            assert!(keys.contains(&a.key()));
        }
    }

    fn g_tau(name: &str) -> (Csd, Vec<GateRecord>) {
        let c = csd(name);
        let seed_gates = find_swap_transversal_gates(&c.seed, 1 << 24).unwrap();
        let gens = g_tau_generators(&seed_gates, &c.tau, &c.code, &c.layout).unwrap();
        (c, gens)
    }

    #[test]
    fn g_tau_orders() {
        // Complete automorphism search: [[5,1,3]] has an H-type logical via
        // ⊗H plus relabeling, doubling the group of the relabeling-free gates.
        for (name, order) in [("c422", 216), ("c513", 36)] {
            let (_, gens) = g_tau(name);
            let acts: Vec<LogicalAction> = gens.iter().map(|g| g.action.clone()).collect();
            let cl = group_closure(&acts, 100_000).unwrap();
            assert_eq!(cl.order, order, "{name}");
            assert_eq!(group_order(&acts, 1).unwrap(), BigUint::from(order), "{name}");
            assert!(!is_full_symplectic(&acts).unwrap());
        }
        let c = csd("c513");
        let seed: Vec<GateRecord> = find_swap_transversal_gates(&c.seed, 1 << 24)
            .unwrap()
            .into_iter()
            .filter(|g| !g.circuit.ops.iter().any(|op| matches!(op, Gate::Swap(..))))
            .collect();
        let gens = g_tau_generators(&seed, &c.tau, &c.code, &c.layout).unwrap();
        let acts: Vec<LogicalAction> = gens.iter().map(|g| g.action.clone()).collect();
        assert_eq!(group_closure(&acts, 1000).unwrap().order, 18);
    }

    #[test]
    fn sp_orders() {
        assert_eq!(sp_order(1), BigUint::from(6u8));
        assert_eq!(sp_order(2), BigUint::from(720u32));
        assert_eq!(sp_order(3), BigUint::from(1_451_520u64));
        assert_eq!(sp_order(4), BigUint::from(47_377_612_800u64));
    }

    #[test]
    fn schreier_sims_matches_enumeration() {
        // Transvections generate Sp_4; a few of them generate proper subgroups.
        let u = |s: &str| SymplecticMatrix::transvection(&BitVector::parse(s).unwrap());
        let all: Vec<LogicalAction> = ["1000", "0100", "0010", "0001", "1010", "0101", "1100"].iter().map(|s| u(s)).collect();
        assert_eq!(group_order(&all, 3).unwrap(), sp_order(2));
        assert_eq!(group_closure(&all, 1000).unwrap().order, 720);
        for k in 1..all.len() {
            let sub = &all[..k];
            let brute = group_closure(sub, 1000).unwrap().order;
            assert_eq!(group_order(sub, 9).unwrap(), BigUint::from(brute));
        }
    }

    #[test]
    fn c513_with_injection_is_full() {
        let (c, gens) = g_tau("c513");
        let t = c.code.k();
        let mut acts: Vec<LogicalAction> = gens.iter().map(|g| g.action.clone()).collect();
        acts.push(logical_s(t, default_injection_qubit(t)));
        assert!(is_full_symplectic(&acts).unwrap());
        assert_eq!(group_closure(&acts, 1000).unwrap().order, 720);
    }

    #[test]
    fn c422_injections() {
        let (c, gens) = g_tau("c422");
        let t = c.code.k();
        let base: Vec<LogicalAction> = gens.iter().map(|g| g.action.clone()).collect();
        for q in 0..t {
            let mut acts = base.clone();
            acts.push(logical_s(t, q));
            assert_eq!(group_order(&acts, 5).unwrap(), sp_order(4), "qubit {q}");
        }
        let mut acts = base.clone();
        acts.push(logical_global_s(t));
        let order = group_order(&acts, 5).unwrap();
        // |(A_6 x A_6) ⋊ (C_2 x C_2)|; 20160² · 4 does not divide |Sp_8|.
        assert_eq!(order, BigUint::from(518_400u64));
        assert_ne!(sp_order(4) % BigUint::from(1_625_702_400u64), BigUint::from(0u8));
        assert!(!is_full_symplectic(&acts).unwrap());
    }

    #[test]
    fn two_block_completeness_small() {
        // Sp_2 per block (k = 1) plus transversal CNOTs gives Sp_4.
        let h = SymplecticMatrix::new(BitMatrix::parse(2, &["01", "10"]).unwrap()).unwrap();
        let s = logical_s(1, 0);
        let gens = two_block_generators(&[h, s]);
        assert!(gens.iter().all(is_symplectic));
        assert_eq!(group_closure(&gens, 1000).unwrap().order, 720);
        // Full Sp_4 per block gives Sp_8.
        let (c, g) = g_tau("c513");
        let t = c.code.k();
        let mut block: Vec<LogicalAction> = g.iter().map(|r| r.action.clone()).collect();
        block.push(logical_s(t, 0));
        let gens = two_block_generators(&block);
        assert_eq!(group_order(&gens, 2).unwrap(), sp_order(4));
    }

    #[test]
    fn unitriangular_product_rule() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        runner
            .run(&(any::<u16>(), any::<u16>()), |(a, b)| {
                let mat = |bits: u16| {
                    let mut m = BitMatrix::zeros(4, 4);
                    for i in 0..16 {
                        m.set(i / 4, i % 4, (bits >> i) & 1 == 1);
                    }
                    m
                };
                let (ma, mb) = (mat(a), mat(b));
                let i = BitMatrix::identity(4);
                let z = BitMatrix::zeros(4, 4);
                let ua = SymplecticMatrix::from_blocks(&i, &ma, &z, &i);
                let ub = SymplecticMatrix::from_blocks(&i, &mb, &z, &i);
                let mut sum = ma.clone();
                for r in 0..4 {
                    sum.row_mut(r).xor_assign(mb.row(r));
                }
                prop_assert_eq!(ua.mul(&ub), SymplecticMatrix::from_blocks(&i, &sum, &z, &i));
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn swap_network_realizes_permutation() {
        for perm in permutations(4) {
            let c = CliffordCircuit::new(4, permutation_swaps(&perm)).unwrap();
            for q in 0..4 {
                let v = BitVector::from_indices(8, &[q]);
                assert_eq!(c.conjugate(&v), BitVector::from_indices(8, &[perm[q]]), "{perm:?}");
            }
        }
    }

    #[test]
    fn seed_library_gates_are_logical() {
        let seed = seed_library("c513").unwrap();
        let gates = find_swap_transversal_gates(&seed, 1 << 24).unwrap();
        assert!(!gates.is_empty());
        for g in &gates {
            assert_eq!(logical_action(&g.circuit, &seed).unwrap(), g.action);
        }
    }
}
