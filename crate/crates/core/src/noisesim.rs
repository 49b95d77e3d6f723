//! Stabilizer simulation, noise annotation, detector error models and
//! Monte Carlo sampling.
//!
//! The tableau keeps destabilizer rows `0..n` and stabilizer rows `n..2n`
//! with a sign bit per row (Aaronson-Gottesman). Fault propagation uses a
//! Pauli-frame engine that runs 64 frames at once, one per bit of a `u64`.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuitsmith::{
    build_memory_circuit, build_state_prep, Basis, Channel, Circuit, CircuitError, DetectorInfo, Instruction,
    PrepPolicy, ProtocolCircuit,
};
use crate::codeforge::{Csd, CssCode};
use crate::distance::trial_rng;
use crate::f2core::{BitMatrix, BitVector, PauliOperator, RowSpace};
use crate::liftgate::Gate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("detectors {0:?} are not deterministic without noise")]
    NondeterministicDetectors(Vec<usize>),
    #[error("detectors {0:?} are 1 in the noiseless reference run")]
    NonzeroReference(Vec<usize>),
    #[error("bad DEM line {0}: {1}")]
    Parse(usize, String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

// ---------------------------------------------------------------------------
// Tableau

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tableau {
    n: usize,
    w: usize,
    xs: Vec<u64>,
    zs: Vec<u64>,
    signs: Vec<bool>,
}

impl Tableau {
    /// `|0…0⟩`.
    #[must_use]
    pub fn new(n: usize) -> Self {
        let w = n.div_ceil(64).max(1);
        let mut t = Self { n, w, xs: vec![0; 2 * n * w], zs: vec![0; 2 * n * w], signs: vec![false; 2 * n] };
        for q in 0..n {
            t.xs[q * w + q / 64] |= 1 << (q % 64);
            t.zs[(n + q) * w + q / 64] |= 1 << (q % 64);
        }
        t
    }

    #[must_use]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn get(&self, row: usize, q: usize) -> (bool, bool) {
        let i = row * self.w + q / 64;
        let m = 1 << (q % 64);
        (self.xs[i] & m != 0, self.zs[i] & m != 0)
    }

    fn set(&mut self, row: usize, q: usize, x: bool, z: bool) {
        let i = row * self.w + q / 64;
        let m = 1u64 << (q % 64);
        self.xs[i] = if x { self.xs[i] | m } else { self.xs[i] & !m };
        self.zs[i] = if z { self.zs[i] | m } else { self.zs[i] & !m };
    }

    /// Stabilizer generator `j` as a signed Pauli.
    #[must_use]
    pub fn stabilizer(&self, j: usize) -> PauliOperator {
        self.row_pauli(self.n + j)
    }

    fn row_pauli(&self, row: usize) -> PauliOperator {
        let mut x = BitVector::zeros(self.n);
        let mut z = BitVector::zeros(self.n);
        for q in 0..self.n {
            let (a, b) = self.get(row, q);
            x.set(q, a);
            z.set(q, b);
        }
        let mut p = PauliOperator::from_xz(x, z);
        p.set_sign_power(if self.signs[row] { 2 } else { 0 });
        p
    }

    /// Applies a per-row update `f(x_a, z_a, x_b, z_b) -> (x_a, z_a, x_b, z_b, sign flip)`.
    fn map2(&mut self, a: usize, b: usize, f: impl Fn(bool, bool, bool, bool) -> (bool, bool, bool, bool, bool)) {
        for row in 0..2 * self.n {
            let (xa, za) = self.get(row, a);
            let (xb, zb) = self.get(row, b);
            let (xa2, za2, xb2, zb2, flip) = f(xa, za, xb, zb);
            self.set(row, a, xa2, za2);
            self.set(row, b, xb2, zb2);
            self.signs[row] ^= flip;
        }
    }

    fn map1(&mut self, q: usize, f: impl Fn(bool, bool) -> (bool, bool, bool)) {
        for row in 0..2 * self.n {
            let (x, z) = self.get(row, q);
            let (x2, z2, flip) = f(x, z);
            self.set(row, q, x2, z2);
            self.signs[row] ^= flip;
        }
    }

    /// Applies `g` to the state (`P -> g P g†` on every row).
    pub fn apply(&mut self, g: &Gate) {
        match *g {
            Gate::H(q) => self.map1(q, |x, z| (z, x, x & z)),
            Gate::S(q) => self.map1(q, |x, z| (x, z ^ x, x & z)),
            Gate::Sdg(q) => self.map1(q, |x, z| (x, z ^ x, x & !z)),
            Gate::SqrtX(q) => self.map1(q, |x, z| (x ^ z, z, z & !x)),
            Gate::SqrtXdg(q) => self.map1(q, |x, z| (x ^ z, z, x & z)),
            Gate::X(q) => self.map1(q, |x, z| (x, z, z)),
            Gate::Y(q) => self.map1(q, |x, z| (x, z, x ^ z)),
            Gate::Z(q) => self.map1(q, |x, z| (x, z, x)),
            Gate::CX(c, t) => self.map2(c, t, |xc, zc, xt, zt| (xc, zc ^ zt, xt ^ xc, zt, xc & zt & !(xt ^ zc))),
            Gate::CZ(a, b) => self.map2(a, b, |xa, za, xb, zb| (xa, za ^ xb, xb, zb ^ xa, xa & xb & (za ^ zb))),
            Gate::CY(c, t) => {
                self.apply(&Gate::Sdg(t));
                self.apply(&Gate::CX(c, t));
                self.apply(&Gate::S(t));
            }
            Gate::Swap(a, b) => self.map2(a, b, |xa, za, xb, zb| (xb, zb, xa, za, false)),
        }
    }

    /// Row `h` <- row `h` * row `i`.
    fn rowsum(&mut self, h: usize, i: usize) {
        let w = self.w;
        let mut ph: u32 = 2 * u32::from(self.signs[h]) + 2 * u32::from(self.signs[i]);
        let mut new_xz = 0u32;
        for k in 0..w {
            let (x1, z1) = (self.xs[h * w + k], self.zs[h * w + k]);
            let (x2, z2) = (self.xs[i * w + k], self.zs[i * w + k]);
            ph += (x1 & z1).count_ones() + (x2 & z2).count_ones() + 2 * (z1 & x2).count_ones();
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            new_xz += (x3 & z3).count_ones();
            self.xs[h * w + k] = x3;
            self.zs[h * w + k] = z3;
        }
        let s = (ph + 4 * 64 * w as u32 - new_xz) % 4;
        // Destabilizer rows may pick up a factor of i; their signs are unused.
        debug_assert!(h < self.n || s.is_multiple_of(2), "product of commuting stabilizer rows");
        self.signs[h] = s == 2;
    }

    /// Measures `Z_q`; returns `(outcome, was_random)`.
    pub fn measure_z(&mut self, q: usize, rng: &mut impl Rng) -> (bool, bool) {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&r| self.get(r, q).0) {
            for r in 0..2 * n {
                if r != p && self.get(r, q).0 {
                    self.rowsum(r, p);
                }
            }
            let w = self.w;
            let (src, dst) = (p * w, (p - n) * w);
            self.xs.copy_within(src..src + w, dst);
            self.zs.copy_within(src..src + w, dst);
            self.signs[p - n] = self.signs[p];
            for k in 0..w {
                self.xs[p * w + k] = 0;
                self.zs[p * w + k] = 0;
            }
            self.set(p, q, false, true);
            let outcome: bool = rng.gen();
            self.signs[p] = outcome;
            (outcome, true)
        } else {
            (self.deterministic_z(q), false)
        }
    }

    fn deterministic_z(&self, q: usize) -> bool {
        let n = self.n;
        let mut scratch = Tableau { n, w: self.w, xs: vec![0; self.w], zs: vec![0; self.w], signs: vec![false] };
        for r in 0..n {
            if self.get(r, q).0 {
                scratch.mul_row_from(self, n + r);
            }
        }
        scratch.signs[0]
    }

    /// Row 0 of `self` (a scratch tableau) <- row 0 * `other[row]`.
    fn mul_row_from(&mut self, other: &Tableau, row: usize) {
        let w = self.w;
        let mut ph: u32 = 2 * u32::from(self.signs[0]) + 2 * u32::from(other.signs[row]);
        let mut new_xz = 0;
        for k in 0..w {
            let (x1, z1) = (self.xs[k], self.zs[k]);
            let (x2, z2) = (other.xs[row * w + k], other.zs[row * w + k]);
            ph += (x1 & z1).count_ones() + (x2 & z2).count_ones() + 2 * (z1 & x2).count_ones();
            self.xs[k] = x1 ^ x2;
            self.zs[k] = z1 ^ z2;
            new_xz += (self.xs[k] & self.zs[k]).count_ones();
        }
        self.signs[0] = (ph + 4 * 64 * w as u32 - new_xz) % 4 == 2;
    }

    /// Measures `q` in `basis`.
    pub fn measure(&mut self, q: usize, basis: Basis, rng: &mut impl Rng) -> bool {
        let (pre, post): (&[Gate], &[Gate]) = match basis {
            Basis::Z => (&[], &[]),
            Basis::X => (&[Gate::H(q)], &[Gate::H(q)]),
            Basis::Y => (&[Gate::Sdg(q), Gate::H(q)], &[Gate::H(q), Gate::S(q)]),
        };
        for g in pre {
            self.apply(g);
        }
        let (m, _) = self.measure_z(q, rng);
        for g in post {
            self.apply(g);
        }
        m
    }

    /// Resets `q` to the `+1` eigenstate of `basis`.
    pub fn reset(&mut self, q: usize, basis: Basis, rng: &mut impl Rng) {
        if self.measure(q, basis, rng) {
            let fix = match basis {
                Basis::Z => Gate::X(q),
                Basis::X => Gate::Z(q),
                Basis::Y => Gate::Z(q),
            };
            self.apply(&fix);
        }
    }

    /// `Some(false)` if `+p` stabilizes the state, `Some(true)` for `-p`,
    /// `None` if the outcome of measuring `p` would be random.
    #[must_use]
    pub fn expectation(&self, p: &PauliOperator) -> Option<bool> {
        let n = self.n;
        let anticommutes = |row: usize| {
            let mut s = false;
            for q in 0..n {
                let (x, z) = self.get(row, q);
                s ^= (x & p.z.get(q)) ^ (z & p.x.get(q));
            }
            s
        };
        if (n..2 * n).any(anticommutes) {
            return None;
        }
        let mut scratch = Tableau { n, w: self.w, xs: vec![0; self.w], zs: vec![0; self.w], signs: vec![false] };
        for r in 0..n {
            if anticommutes(r) {
                scratch.mul_row_from(self, n + r);
            }
        }
        let prod = scratch.row_pauli(0);
        debug_assert!(prod.x == p.x && prod.z == p.z);
        let sign = (prod.sign_power() + 4 - p.sign_power()) % 4;
        Some(sign == 2)
    }
}

// ---------------------------------------------------------------------------
// Reference simulation

/// A fault injected by `simulate_with_faults`, applied right after
/// instruction `at`.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectedFault {
    pub at: usize,
    pub action: FaultAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FaultAction {
    Pauli(Vec<(usize, Basis)>),
    FlipRecord(usize),
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub records: Vec<bool>,
    pub detectors: Vec<bool>,
    pub observables: Vec<bool>,
    pub tableau: Tableau,
}

fn apply_pauli(t: &mut Tableau, q: usize, b: Basis) {
    t.apply(&match b {
        Basis::X => Gate::X(q),
        Basis::Y => Gate::Y(q),
        Basis::Z => Gate::Z(q),
    });
}

const PAULIS: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

fn xor_recs(records: &[bool], recs: &[usize]) -> bool {
    recs.iter().fold(false, |a, &r| a ^ records[r])
}

/// Exact stabilizer simulation. Noise channels are sampled from `rng`
/// (`sample_noise`) or ignored; `faults` are applied after their instruction.
fn run_tableau(circuit: &Circuit, rng: &mut ChaCha8Rng, sample_noise: bool, faults: &[InjectedFault]) -> SimResult {
    let mut t = Tableau::new(circuit.n_qubits);
    let mut records: Vec<bool> = Vec::with_capacity(circuit.num_records());
    let mut detectors = Vec::with_capacity(circuit.num_detectors());
    let mut observables = vec![false; circuit.num_observables()];
    let mut fi = 0;
    for (idx, ins) in circuit.instructions.iter().enumerate() {
        match ins {
            Instruction::Gate(g) => t.apply(g),
            Instruction::Reset { q, basis } => t.reset(*q, *basis, rng),
            Instruction::Measure { q, basis, .. } => {
                let m = t.measure(*q, *basis, rng);
                records.push(m);
            }
            Instruction::Parity { recs, .. } => records.push(xor_recs(&records, recs)),
            Instruction::Detector { recs, .. } => detectors.push(xor_recs(&records, recs)),
            Instruction::Observable { id, recs } => observables[*id] ^= xor_recs(&records, recs),
            Instruction::Feedback { recs, pauli } => {
                if xor_recs(&records, recs) {
                    for &(q, b) in pauli {
                        apply_pauli(&mut t, q, b);
                    }
                }
            }
            Instruction::Noise(ch) if sample_noise => match *ch {
                Channel::Depolarize1 { p, q } => {
                    if rng.gen::<f64>() < p {
                        apply_pauli(&mut t, q, PAULIS[rng.gen_range(0..3)]);
                    }
                }
                Channel::Depolarize2 { p, a, b } => {
                    if rng.gen::<f64>() < p {
                        let k = rng.gen_range(1..16usize);
                        for (q, v) in [(a, k & 3), (b, k >> 2)] {
                            if v > 0 {
                                apply_pauli(&mut t, q, PAULIS[v - 1]);
                            }
                        }
                    }
                }
                Channel::Pauli { p, q, kind } => {
                    if rng.gen::<f64>() < p {
                        apply_pauli(&mut t, q, kind);
                    }
                }
                Channel::Flip { p, rec } => {
                    if rng.gen::<f64>() < p {
                        records[rec] ^= true;
                    }
                }
            },
            Instruction::Noise(_) | Instruction::Tick | Instruction::NoiseOff | Instruction::NoiseOn => {}
        }
        while fi < faults.len() && faults[fi].at == idx {
            match &faults[fi].action {
                FaultAction::Pauli(terms) => {
                    for &(q, b) in terms {
                        apply_pauli(&mut t, q, b);
                    }
                }
                FaultAction::FlipRecord(r) => records[*r] ^= true,
            }
            fi += 1;
        }
    }
    SimResult { records, detectors, observables, tableau: t }
}

/// Noisy (or noiseless) reference simulation with seeded random outcomes.
#[must_use]
pub fn simulate(circuit: &Circuit, seed: u64) -> SimResult {
    run_tableau(circuit, &mut trial_rng(seed, 0), true, &[])
}

/// Noise channels ignored, `faults` (sorted by `at`) injected.
#[must_use]
pub fn simulate_with_faults(circuit: &Circuit, seed: u64, faults: &[InjectedFault]) -> SimResult {
    let mut sorted = faults.to_vec();
    sorted.sort_by_key(|f| f.at);
    run_tableau(circuit, &mut trial_rng(seed, 0), false, &sorted)
}

/// Direct noisy tableau simulation of `shots` shots; shot `i` uses stream `i`.
#[must_use]
pub fn simulate_shots(circuit: &Circuit, shots: usize, seed: u64) -> Vec<(BitVector, BitVector)> {
    (0..shots)
        .into_par_iter()
        .map(|s| {
            let r = run_tableau(circuit, &mut trial_rng(seed, s as u64), true, &[]);
            (BitVector::from_bools(&r.detectors), BitVector::from_bools(&r.observables))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Noise annotation

/// Circuit-level noise: two-qubit depolarizing `p` after two-qubit gates,
/// measurement flips `p`, and depolarizing `p/10` after single-qubit gates
/// and on idle qubits per tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
}

impl NoiseModel {
    #[must_use]
    pub fn new(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability out of range");
        Self { p }
    }

    #[must_use]
    pub fn single_qubit(&self) -> f64 {
        self.p / 10.0
    }

    #[must_use]
    pub fn idle(&self) -> f64 {
        self.p / 10.0
    }
}

/// Strength of the idealized ancilla-block noise used in memory circuits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepNoiseProxy {
    pub p_prime: f64,
    pub meas_flip: f64,
}

/// Inserts noise channels per `model`, skipping `NOISE OFF` regions.
/// A qubit is idle in a tick if no gate, reset or measurement touched it;
/// qubits count as live from the start unless their first use is a reset,
/// and stop being live when measured.
#[must_use]
pub fn annotate(circuit: &Circuit, model: &NoiseModel) -> Circuit {
    if model.p == 0.0 {
        return circuit.clone();
    }
    let n = circuit.n_qubits;
    let mut first_is_reset = vec![None; n];
    for ins in &circuit.instructions {
        let (qs, is_reset): (Vec<usize>, bool) = match ins {
            Instruction::Gate(g) => {
                let (a, b) = g.qubits();
                (std::iter::once(a).chain(b).collect(), false)
            }
            Instruction::Reset { q, .. } => (vec![*q], true),
            Instruction::Measure { q, .. } => (vec![*q], false),
            _ => continue,
        };
        for q in qs {
            first_is_reset[q].get_or_insert(is_reset);
        }
    }
    let mut live: Vec<bool> = first_is_reset.iter().map(|f| !f.unwrap_or(false)).collect();
    let mut touched = vec![false; n];
    let mut noisy = true;
    let mut out = Circuit::new(n);
    let push = |out: &mut Circuit, ins: Instruction| out.push(ins).expect("annotated instruction");
    for ins in &circuit.instructions {
        match ins {
            Instruction::NoiseOff => noisy = false,
            Instruction::NoiseOn => noisy = true,
            _ => {}
        }
        match ins {
            Instruction::Gate(g) => {
                push(&mut out, ins.clone());
                let (a, b) = g.qubits();
                touched[a] = true;
                live[a] = true;
                if let Some(b) = b {
                    touched[b] = true;
                    live[b] = true;
                }
                if noisy {
                    let ch = match b {
                        Some(b) => Channel::Depolarize2 { p: model.p, a, b },
                        None => Channel::Depolarize1 { p: model.single_qubit(), q: a },
                    };
                    push(&mut out, Instruction::Noise(ch));
                }
            }
            Instruction::Reset { q, .. } => {
                touched[*q] = true;
                live[*q] = true;
                push(&mut out, ins.clone());
            }
            Instruction::Measure { q, rec, .. } => {
                touched[*q] = true;
                live[*q] = false;
                push(&mut out, ins.clone());
                if noisy {
                    push(&mut out, Instruction::Noise(Channel::Flip { p: model.p, rec: *rec }));
                }
            }
            Instruction::Tick => {
                if noisy {
                    for q in 0..n {
                        if live[q] && !touched[q] {
                            push(&mut out, Instruction::Noise(Channel::Depolarize1 { p: model.idle(), q }));
                        }
                    }
                }
                touched.iter_mut().for_each(|t| *t = false);
                push(&mut out, ins.clone());
            }
            _ => push(&mut out, ins.clone()),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Frame engine

/// An elementary fault of a noisy circuit: one Pauli component of a
/// channel, or one record flip.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryFault {
    pub at: usize,
    pub p: f64,
    pub action: FaultAction,
}

/// Splits every channel into independent components (`p/3`, `p/15`).
#[must_use]
pub fn elementary_faults(circuit: &Circuit) -> Vec<ElementaryFault> {
    let mut out = Vec::new();
    for (at, ins) in circuit.instructions.iter().enumerate() {
        let Instruction::Noise(ch) = ins else { continue };
        match *ch {
            Channel::Depolarize1 { p, q } => {
                for b in PAULIS {
                    out.push(ElementaryFault { at, p: p / 3.0, action: FaultAction::Pauli(vec![(q, b)]) });
                }
            }
            Channel::Depolarize2 { p, a, b } => {
                for k in 1..16usize {
                    let mut terms = Vec::new();
                    for (q, v) in [(a, k & 3), (b, k >> 2)] {
                        if v > 0 {
                            terms.push((q, PAULIS[v - 1]));
                        }
                    }
                    out.push(ElementaryFault { at, p: p / 15.0, action: FaultAction::Pauli(terms) });
                }
            }
            Channel::Pauli { p, q, kind } => {
                out.push(ElementaryFault { at, p, action: FaultAction::Pauli(vec![(q, kind)]) });
            }
            Channel::Flip { p, rec } => out.push(ElementaryFault { at, p, action: FaultAction::FlipRecord(rec) }),
        }
        out.retain(|f| f.p > 0.0);
    }
    out
}

/// 64 Pauli frames in parallel.
struct Frames {
    x: Vec<u64>,
    z: Vec<u64>,
    recs: Vec<u64>,
    dets: Vec<u64>,
    obs: Vec<u64>,
}

impl Frames {
    fn new(circuit: &Circuit) -> Self {
        Self {
            x: vec![0; circuit.n_qubits],
            z: vec![0; circuit.n_qubits],
            recs: Vec::with_capacity(circuit.num_records()),
            dets: Vec::with_capacity(circuit.num_detectors()),
            obs: vec![0; circuit.num_observables()],
        }
    }

    fn pauli(&mut self, q: usize, b: Basis, lanes: u64) {
        let (x, z) = b.bits();
        if x {
            self.x[q] ^= lanes;
        }
        if z {
            self.z[q] ^= lanes;
        }
    }

    fn xor(&self, recs: &[usize]) -> u64 {
        recs.iter().fold(0, |a, &r| a ^ self.recs[r])
    }

    fn gate(&mut self, g: &Gate) {
        let (x, z) = (&mut self.x, &mut self.z);
        match *g {
            Gate::H(q) => std::mem::swap(&mut x[q], &mut z[q]),
            Gate::S(q) | Gate::Sdg(q) => z[q] ^= x[q],
            Gate::SqrtX(q) | Gate::SqrtXdg(q) => x[q] ^= z[q],
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
            Gate::CX(c, t) => {
                x[t] ^= x[c];
                z[c] ^= z[t];
            }
            Gate::CZ(a, b) => {
                z[a] ^= x[b];
                z[b] ^= x[a];
            }
            Gate::CY(c, t) => {
                let old = x[t] ^ z[t];
                z[c] ^= old;
                x[t] ^= x[c];
                z[t] ^= x[c];
            }
            Gate::Swap(a, b) => {
                x.swap(a, b);
                z.swap(a, b);
            }
        }
    }

    /// Processes one instruction. `gauge` randomizes the stabilizing Pauli
    /// after resets and measurements, which exposes nondeterministic records.
    fn step(&mut self, ins: &Instruction, gauge: Option<&mut ChaCha8Rng>) {
        match ins {
            Instruction::Gate(g) => self.gate(g),
            Instruction::Reset { q, basis } => {
                self.x[*q] = 0;
                self.z[*q] = 0;
                if let Some(rng) = gauge {
                    self.pauli(*q, *basis, rng.gen());
                }
            }
            Instruction::Measure { q, basis, .. } => {
                let flip = match basis {
                    Basis::Z => self.x[*q],
                    Basis::X => self.z[*q],
                    Basis::Y => self.x[*q] ^ self.z[*q],
                };
                self.recs.push(flip);
                if let Some(rng) = gauge {
                    self.pauli(*q, *basis, rng.gen());
                }
            }
            Instruction::Parity { recs, .. } => {
                let v = self.xor(recs);
                self.recs.push(v);
            }
            Instruction::Detector { recs, .. } => {
                let v = self.xor(recs);
                self.dets.push(v);
            }
            Instruction::Observable { id, recs } => self.obs[*id] ^= self.xor(recs),
            Instruction::Feedback { recs, pauli } => {
                let m = self.xor(recs);
                for &(q, b) in pauli {
                    self.pauli(q, b, m);
                }
            }
            Instruction::Noise(_) | Instruction::Tick | Instruction::NoiseOff | Instruction::NoiseOn => {}
        }
    }

    fn inject(&mut self, action: &FaultAction, lane: u64) {
        match action {
            FaultAction::Pauli(terms) => {
                for &(q, b) in terms {
                    self.pauli(q, b, lane);
                }
            }
            FaultAction::FlipRecord(r) => self.recs[*r] ^= lane,
        }
    }
}

/// Detectors that are not deterministic without noise, found by gauge
/// randomization over 64 frames (a nondeterministic detector escapes with
/// probability `2^-64`).
#[must_use]
pub fn nondeterministic_detectors(circuit: &Circuit, seed: u64) -> Vec<usize> {
    let mut rng = trial_rng(seed, 0);
    let mut f = Frames::new(circuit);
    for q in 0..circuit.n_qubits {
        f.z[q] = rng.gen();
    }
    for ins in &circuit.instructions {
        f.step(ins, Some(&mut rng));
    }
    f.dets.iter().enumerate().filter(|(_, &w)| w != 0).map(|(i, _)| i).collect()
}

/// Checks that every detector is deterministic and 0 without noise.
pub fn check_detectors(circuit: &Circuit) -> Result<(), SimError> {
    let nd = nondeterministic_detectors(circuit, 0x5eed);
    if !nd.is_empty() {
        return Err(SimError::NondeterministicDetectors(nd));
    }
    let noiseless: Vec<Instruction> =
        circuit.instructions.iter().filter(|i| !matches!(i, Instruction::Noise(_))).cloned().collect();
    let mut c = Circuit::new(circuit.n_qubits);
    for ins in noiseless {
        c.push(ins)?;
    }
    let r = simulate(&c, 0);
    let ones: Vec<usize> = r.detectors.iter().enumerate().filter(|(_, &d)| d).map(|(i, _)| i).collect();
    if ones.is_empty() { Ok(()) } else { Err(SimError::NonzeroReference(ones)) }
}

/// Effect of one fault: flipped detectors and observables, plus the frame
/// on every qubit at the stopping point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultEffect {
    pub detectors: Vec<usize>,
    pub observables: Vec<usize>,
    pub frame_x: BitVector,
    pub frame_z: BitVector,
}

/// Propagates each fault (independently) up to instruction `stop`
/// (exclusive); detectors declared before `stop` are reported.
#[must_use]
pub fn propagate_faults(circuit: &Circuit, faults: &[ElementaryFault], stop: usize) -> Vec<FaultEffect> {
    let ins = &circuit.instructions[..stop.min(circuit.instructions.len())];
    let mut order: Vec<usize> = (0..faults.len()).collect();
    order.sort_by_key(|&i| faults[i].at);
    let chunks: Vec<&[usize]> = order.chunks(64).collect();
    let mut results: Vec<(usize, FaultEffect)> = chunks
        .par_iter()
        .flat_map_iter(|chunk| {
            let mut f = Frames::new(circuit);
            let start = faults[chunk[0]].at;
            // Records before the first fault carry no flips.
            let recs_before = ins[..start].iter().filter(|i| matches!(i, Instruction::Measure { .. } | Instruction::Parity { .. })).count();
            let dets_before = ins[..start].iter().filter(|i| matches!(i, Instruction::Detector { .. })).count();
            f.recs.resize(recs_before, 0);
            f.dets.resize(dets_before, 0);
            let mut next = 0;
            for (idx, instr) in ins.iter().enumerate().skip(start) {
                f.step(instr, None);
                while next < chunk.len() && faults[chunk[next]].at == idx {
                    f.inject(&faults[chunk[next]].action, 1 << next);
                    next += 1;
                }
            }
            let n = circuit.n_qubits;
            chunk
                .iter()
                .enumerate()
                .map(|(lane, &fi)| {
                    let m = 1u64 << lane;
                    let dets = f.dets.iter().enumerate().filter(|(_, &w)| w & m != 0).map(|(i, _)| i).collect();
                    let obs = f.obs.iter().enumerate().filter(|(_, &w)| w & m != 0).map(|(i, _)| i).collect();
                    let fx = BitVector::from_bools(&(0..n).map(|q| f.x[q] & m != 0).collect::<Vec<_>>());
                    let fz = BitVector::from_bools(&(0..n).map(|q| f.z[q] & m != 0).collect::<Vec<_>>());
                    (fi, FaultEffect { detectors: dets, observables: obs, frame_x: fx, frame_z: fz })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, e)| e).collect()
}

// ---------------------------------------------------------------------------
// Single-fault tolerance check

/// Stabilizers of a protocol's target state, split by sector. `mixed`
/// holds elements with both X and Z parts, as `(x, z)` pairs.
#[derive(Clone, Debug)]
pub struct ResidualGroups {
    pub x: BitMatrix,
    pub z: BitMatrix,
    pub mixed: Vec<(BitVector, BitVector)>,
}

fn logical_rows(code: &CssCode, x_type: bool, skip: Option<usize>) -> Vec<BitVector> {
    let ls = if x_type { &code.logical_x } else { &code.logical_z };
    ls.iter().enumerate().filter(|(j, _)| Some(*j) != skip).map(|(_, l)| if x_type { l.x.clone() } else { l.z.clone() }).collect()
}

impl ResidualGroups {
    /// `|0̄⟩^{⊗2k}` (basis `Z`) or `|+̄⟩^{⊗2k}` (basis `X`).
    #[must_use]
    pub fn prep(code: &CssCode, basis: Basis) -> Self {
        let n = code.n;
        let mut x = code.hx.clone();
        let mut z = code.hz.clone();
        if basis == Basis::Z {
            z = z.vstack(&BitMatrix::from_rows(n, logical_rows(code, false, None)));
        } else {
            x = x.vstack(&BitMatrix::from_rows(n, logical_rows(code, true, None)));
        }
        Self { x, z, mixed: Vec::new() }
    }

    /// The `Ȳ_i` eigenstate left by a `Ȳ_i` measurement on `|+̄⟩^{⊗2k}`.
    #[must_use]
    pub fn y_eigenstate(code: &CssCode, i: usize) -> Self {
        let n = code.n;
        let x = code.hx.vstack(&BitMatrix::from_rows(n, logical_rows(code, true, Some(i))));
        let mixed = vec![(code.logical_x[i].x.clone(), code.logical_z[i].z.clone())];
        Self { x, z: code.hz.clone(), mixed }
    }
}

/// Within weight one of a row space: `reduce(v)` is zero or equals the
/// reduction of a unit vector.
struct NearSpan {
    space: RowSpace,
    units: std::collections::HashSet<BitVector>,
}

impl NearSpan {
    fn new(m: &BitMatrix) -> Self {
        let space = RowSpace::from_matrix(m);
        let units = (0..m.cols()).map(|q| space.reduce(&BitVector::from_indices(m.cols(), &[q]))).collect();
        Self { space, units }
    }

    fn accepts(&self, v: &BitVector) -> bool {
        let r = self.space.reduce(v);
        r.is_zero() || self.units.contains(&r)
    }
}

#[derive(Clone, Debug, Default)]
pub struct FtReport {
    pub faults: usize,
    pub detected: usize,
    pub violations: Vec<ElementaryFault>,
}

/// Enumerates every elementary fault of `annotate(circuit, p)` before the
/// readout. A fault passes if it fires a postselection detector, or if the
/// data residual is within weight one of the target stabilizers in each
/// sector separately.
#[must_use]
pub fn single_fault_check(pc: &ProtocolCircuit, groups: &ResidualGroups, p: f64) -> FtReport {
    let noisy = annotate(&pc.circuit, &NoiseModel::new(p));
    let mut seen = 0;
    let mut stop = noisy.instructions.len();
    for (i, ins) in noisy.instructions.iter().enumerate() {
        if seen == pc.readout_start {
            stop = i;
            break;
        }
        if !matches!(ins, Instruction::Noise(_)) {
            seen += 1;
        }
    }
    let faults: Vec<ElementaryFault> = elementary_faults(&noisy).into_iter().filter(|f| f.at < stop).collect();
    let effects = propagate_faults(&noisy, &faults, stop);
    let (xs, zs) = (NearSpan::new(&groups.x), NearSpan::new(&groups.z));
    let info = noisy.detector_info();
    let mut report = FtReport { faults: faults.len(), ..Default::default() };
    let d = &pc.data;
    for (f, e) in faults.into_iter().zip(effects) {
        if e.detectors.iter().any(|&i| info[i].postselect) {
            report.detected += 1;
            continue;
        }
        let ex = e.frame_x.slice(d.start, d.end);
        let ez = e.frame_z.slice(d.start, d.end);
        let ok = (0..1usize << groups.mixed.len()).any(|mask| {
            let (mut x, mut z) = (ex.clone(), ez.clone());
            for (j, (mx, mz)) in groups.mixed.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    x.xor_assign(mx);
                    z.xor_assign(mz);
                }
            }
            xs.accepts(&x) && zs.accepts(&z)
        });
        if !ok {
            report.violations.push(f);
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Detector error model

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub p: f64,
    pub detectors: Vec<usize>,
    pub observables: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorErrorModel {
    pub mechanisms: Vec<Mechanism>,
    pub num_detectors: usize,
    pub num_observables: usize,
    /// Block tags and postselection flags copied from the circuit.
    pub detector_info: Vec<DetectorInfo>,
}

/// Probability that exactly one of two independent events fires.
#[must_use]
pub fn merge_probability(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

impl DetectorErrorModel {
    /// Mechanisms with identical symptoms merged, in order of first appearance.
    #[must_use]
    pub fn from_effects(
        effects: impl IntoIterator<Item = (f64, Vec<usize>, Vec<usize>)>,
        num_detectors: usize,
        num_observables: usize,
        detector_info: Vec<DetectorInfo>,
    ) -> Self {
        let mut index: HashMap<(Vec<usize>, Vec<usize>), usize> = HashMap::new();
        let mut mechanisms: Vec<Mechanism> = Vec::new();
        for (p, d, o) in effects {
            if d.is_empty() && o.is_empty() {
                continue;
            }
            match index.get(&(d.clone(), o.clone())) {
                Some(&i) => mechanisms[i].p = merge_probability(mechanisms[i].p, p),
                None => {
                    index.insert((d.clone(), o.clone()), mechanisms.len());
                    mechanisms.push(Mechanism { p, detectors: d, observables: o });
                }
            }
        }
        Self { mechanisms, num_detectors, num_observables, detector_info }
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut mechanisms = Vec::new();
        let mut num_detectors = 0;
        let mut num_observables = 0;
        let mut info = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            let err = |m: &str| SimError::Parse(i + 1, m.to_string());
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("detector ") {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let id: usize = toks.first().and_then(|t| t.strip_prefix('D')).and_then(|t| t.parse().ok()).ok_or_else(|| err("bad detector"))?;
                if id != info.len() {
                    return Err(err("detectors out of order"));
                }
                let mut d = DetectorInfo { postselect: false, block: None };
                for t in &toks[1..] {
                    if *t == "post" {
                        d.postselect = true;
                    } else if let Some(b) = t.strip_prefix("block=") {
                        d.block = Some(b.parse().map_err(|_| err("bad block"))?);
                    }
                }
                info.push(d);
                num_detectors = num_detectors.max(id + 1);
                continue;
            }
            if let Some(rest) = line.strip_prefix("observables ") {
                num_observables = rest.trim().parse().map_err(|_| err("bad observable count"))?;
                continue;
            }
            let rest = line.strip_prefix("error(").ok_or_else(|| err("expected error(p)"))?;
            let close = rest.find(')').ok_or_else(|| err("missing )"))?;
            let p: f64 = rest[..close].parse().map_err(|_| err("bad probability"))?;
            let mut m = Mechanism { p, detectors: Vec::new(), observables: Vec::new() };
            for t in rest[close + 1..].split_whitespace() {
                if let Some(d) = t.strip_prefix('D') {
                    let d: usize = d.parse().map_err(|_| err("bad detector"))?;
                    num_detectors = num_detectors.max(d + 1);
                    m.detectors.push(d);
                } else if let Some(l) = t.strip_prefix('L') {
                    let l: usize = l.parse().map_err(|_| err("bad observable"))?;
                    num_observables = num_observables.max(l + 1);
                    m.observables.push(l);
                } else {
                    return Err(err("bad target"));
                }
            }
            mechanisms.push(m);
        }
        info.resize(num_detectors, DetectorInfo { postselect: false, block: None });
        Ok(Self { mechanisms, num_detectors, num_observables, detector_info: info })
    }
}

impl fmt::Display for DetectorErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.detector_info.iter().enumerate() {
            write!(f, "detector D{i}")?;
            if d.postselect {
                write!(f, " post")?;
            }
            if let Some(b) = d.block {
                write!(f, " block={b}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "observables {}", self.num_observables)?;
        for m in &self.mechanisms {
            write!(f, "error({})", m.p)?;
            for d in &m.detectors {
                write!(f, " D{d}")?;
            }
            for l in &m.observables {
                write!(f, " L{l}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Detector error model of a noisy circuit by single-fault propagation.
pub fn extract_dem(circuit: &Circuit) -> Result<DetectorErrorModel, SimError> {
    let nd = nondeterministic_detectors(circuit, 0x5eed);
    if !nd.is_empty() {
        return Err(SimError::NondeterministicDetectors(nd));
    }
    let faults = elementary_faults(circuit);
    let effects = propagate_faults(circuit, &faults, circuit.instructions.len());
    Ok(DetectorErrorModel::from_effects(
        faults.iter().zip(effects).map(|(f, e)| (f.p, e.detectors, e.observables)),
        circuit.num_detectors(),
        circuit.num_observables(),
        circuit.detector_info().to_vec(),
    ))
}

// ---------------------------------------------------------------------------
// Sampling

/// Detector and observable bits of one shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shot {
    pub detectors: BitVector,
    pub observables: BitVector,
}

/// Mechanisms bucketed by probability in `(2^-(b+1), 2^-b]`, sampled by
/// geometric skipping at the bucket maximum and thinning.
struct Sampler<'a> {
    dem: &'a DetectorErrorModel,
    buckets: Vec<(f64, Vec<usize>)>,
}

impl<'a> Sampler<'a> {
    fn new(dem: &'a DetectorErrorModel) -> Self {
        let mut map: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for (i, m) in dem.mechanisms.iter().enumerate() {
            if m.p > 0.0 {
                map.entry((-m.p.log2()).floor() as i32).or_default().push(i);
            }
        }
        let buckets = map
            .into_values()
            .map(|idx| (idx.iter().map(|&i| dem.mechanisms[i].p).fold(0.0, f64::max), idx))
            .collect();
        Self { dem, buckets }
    }

    fn shot(&self, rng: &mut ChaCha8Rng) -> Shot {
        let mut det = BitVector::zeros(self.dem.num_detectors);
        let mut obs = BitVector::zeros(self.dem.num_observables);
        for (pmax, idx) in &self.buckets {
            let mut fire = |m: &Mechanism| {
                for &d in &m.detectors {
                    det.flip(d);
                }
                for &o in &m.observables {
                    obs.flip(o);
                }
            };
            if *pmax >= 1.0 {
                idx.iter().for_each(|&i| fire(&self.dem.mechanisms[i]));
                continue;
            }
            let log_q = (1.0 - pmax).ln();
            let mut pos = 0usize;
            loop {
                let u: f64 = 1.0 - rng.gen::<f64>();
                let skip = (u.ln() / log_q).floor();
                if skip >= (idx.len() - pos) as f64 {
                    break;
                }
                pos += skip as usize;
                let m = &self.dem.mechanisms[idx[pos]];
                if m.p >= *pmax || rng.gen::<f64>() * pmax < m.p {
                    fire(m);
                }
                pos += 1;
                if pos >= idx.len() {
                    break;
                }
            }
        }
        Shot { detectors: det, observables: obs }
    }
}

/// Samples `shots` shots; shot `i` uses its own stream, so results do not
/// depend on the thread count.
#[must_use]
pub fn sample(dem: &DetectorErrorModel, shots: usize, seed: u64) -> Vec<Shot> {
    let sampler = Sampler::new(dem);
    (0..shots).into_par_iter().map(|s| sampler.shot(&mut trial_rng(seed, s as u64))).collect()
}

// ---------------------------------------------------------------------------
// Experiments

/// Number of postselection detectors that fired.
#[must_use]
pub fn triggered_postselect(dem: &DetectorErrorModel, shot: &Shot) -> usize {
    shot.detectors.ones().filter(|&d| dem.detector_info[d].postselect).count()
}

#[derive(Clone, Debug)]
pub struct PrepSamples {
    pub shots: usize,
    pub accepted: Vec<Shot>,
    pub dem: DetectorErrorModel,
    pub circuit: ProtocolCircuit,
}

impl PrepSamples {
    #[must_use]
    pub fn acceptance(&self) -> f64 {
        self.accepted.len() as f64 / self.shots as f64
    }
}

/// Noisy state preparation: shots with at most `policy.allow_m` fired
/// postselection detectors are kept for decoding.
pub fn prep_experiment(
    csd: &Csd,
    policy: &PrepPolicy,
    model: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<PrepSamples, SimError> {
    let circuit = build_state_prep(csd, policy)?;
    let noisy = annotate(&circuit.circuit, model);
    let dem = extract_dem(&noisy)?;
    let accepted = sample(&dem, shots, seed).into_iter().filter(|s| triggered_postselect(&dem, s) <= policy.allow_m).collect();
    Ok(PrepSamples { shots, accepted, dem, circuit })
}

#[derive(Clone, Debug)]
pub struct MemorySamples {
    pub rounds: usize,
    pub samples: Vec<Shot>,
    pub dem: DetectorErrorModel,
}

/// `rounds` Steane rounds on an ideal `|0̄⟩^{⊗2k}` with circuit noise
/// `model` and ancilla noise `proxy`.
pub fn memory_experiment(
    csd: &Csd,
    rounds: usize,
    model: &NoiseModel,
    proxy: &PrepNoiseProxy,
    shots: usize,
    seed: u64,
) -> Result<MemorySamples, SimError> {
    let dem = memory_dem(csd, rounds, model, proxy)?;
    let samples = sample(&dem, shots, seed);
    Ok(MemorySamples { rounds, samples, dem })
}

/// DEM of the memory circuit.
pub fn memory_dem(csd: &Csd, rounds: usize, model: &NoiseModel, proxy: &PrepNoiseProxy) -> Result<DetectorErrorModel, SimError> {
    let circuit = build_memory_circuit(csd, rounds, proxy.p_prime, proxy.meas_flip);
    extract_dem(&annotate(&circuit.circuit, model))
}

/// Memory error rate `1 - (1 - p_L)^{1/(k d)}` for a block of `2k`
/// logical qubits.
#[must_use]
pub fn epsilon_memory(p_l: f64, k: usize, rounds: usize) -> f64 {
    1.0 - (1.0 - p_l).powf(1.0 / (k * rounds) as f64)
}

/// Per-logical-qubit preparation error `1 - (1 - p_L)^{1/k}`, where `k` is
/// the number of logical qubits of the block (`2k` of the seed).
#[must_use]
pub fn epsilon_prep(p_l: f64, k: usize) -> f64 {
    1.0 - (1.0 - p_l).powf(1.0 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    // Dense state-vector oracle for a few qubits.
    type C = (f64, f64);
    const ZERO: C = (0.0, 0.0);

    fn cmul(a: C, b: C) -> C {
        (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
    }

    fn cadd(a: C, b: C) -> C {
        (a.0 + b.0, a.1 + b.1)
    }

    struct Dense {
        n: usize,
        amp: Vec<C>,
    }

    impl Dense {
        fn new(n: usize) -> Self {
            let mut amp = vec![ZERO; 1 << n];
            amp[0] = (1.0, 0.0);
            Self { n, amp }
        }

        fn apply1(&mut self, q: usize, m: [[C; 2]; 2]) {
            let bit = 1 << q;
            for i in 0..self.amp.len() {
                if i & bit == 0 {
                    let (a, b) = (self.amp[i], self.amp[i | bit]);
                    self.amp[i] = cadd(cmul(m[0][0], a), cmul(m[0][1], b));
                    self.amp[i | bit] = cadd(cmul(m[1][0], a), cmul(m[1][1], b));
                }
            }
        }

        fn controlled(&mut self, c: usize, t: usize, m: [[C; 2]; 2]) {
            let (cb, tb) = (1 << c, 1 << t);
            for i in 0..self.amp.len() {
                if i & cb != 0 && i & tb == 0 {
                    let (a, b) = (self.amp[i], self.amp[i | tb]);
                    self.amp[i] = cadd(cmul(m[0][0], a), cmul(m[0][1], b));
                    self.amp[i | tb] = cadd(cmul(m[1][0], a), cmul(m[1][1], b));
                }
            }
        }

        fn gate(&mut self, g: &Gate) {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let (o, i, z) = ((1.0, 0.0), (0.0, 1.0), ZERO);
            let x = [[z, o], [o, z]];
            let y = [[z, (0.0, -1.0)], [i, z]];
            let zz = [[o, z], [z, (-1.0, 0.0)]];
            match *g {
                Gate::H(q) => self.apply1(q, [[(h, 0.0), (h, 0.0)], [(h, 0.0), (-h, 0.0)]]),
                Gate::S(q) => self.apply1(q, [[o, z], [z, i]]),
                Gate::Sdg(q) => self.apply1(q, [[o, z], [z, (0.0, -1.0)]]),
                Gate::SqrtX(q) => self.apply1(q, [[(0.5, 0.5), (0.5, -0.5)], [(0.5, -0.5), (0.5, 0.5)]]),
                Gate::SqrtXdg(q) => self.apply1(q, [[(0.5, -0.5), (0.5, 0.5)], [(0.5, 0.5), (0.5, -0.5)]]),
                Gate::X(q) => self.apply1(q, x),
                Gate::Y(q) => self.apply1(q, y),
                Gate::Z(q) => self.apply1(q, zz),
                Gate::CX(c, t) => self.controlled(c, t, x),
                Gate::CY(c, t) => self.controlled(c, t, y),
                Gate::CZ(c, t) => self.controlled(c, t, zz),
                Gate::Swap(a, b) => {
                    self.controlled(a, b, x);
                    self.controlled(b, a, x);
                    self.controlled(a, b, x);
                }
            }
        }

        /// `P|ψ⟩` for a Hermitian Pauli.
        fn pauli_apply(&self, p: &PauliOperator) -> Vec<C> {
            let mut d = Dense { n: self.n, amp: self.amp.clone() };
            for q in 0..self.n {
                match (p.x.get(q), p.z.get(q)) {
                    (true, true) => d.gate(&Gate::Y(q)),
                    (true, false) => d.gate(&Gate::X(q)),
                    (false, true) => d.gate(&Gate::Z(q)),
                    _ => {}
                }
            }
            if p.sign_power() == 2 {
                d.amp.iter_mut().for_each(|a| *a = (-a.0, -a.1));
            }
            d.amp
        }

        fn expectation(&self, p: &PauliOperator) -> f64 {
            let pa = self.pauli_apply(p);
            self.amp.iter().zip(&pa).map(|(a, b)| a.0 * b.0 + a.1 * b.1).sum()
        }

        /// Projects onto `(-1)^m` of `p`; returns the outcome probability.
        fn project(&mut self, p: &PauliOperator, m: bool) -> f64 {
            let pa = self.pauli_apply(p);
            let s = if m { -1.0 } else { 1.0 };
            for (a, b) in self.amp.iter_mut().zip(&pa) {
                *a = (0.5 * (a.0 + s * b.0), 0.5 * (a.1 + s * b.1));
            }
            let norm: f64 = self.amp.iter().map(|a| a.0 * a.0 + a.1 * a.1).sum();
            if norm > 1e-12 {
                let r = norm.sqrt();
                self.amp.iter_mut().for_each(|a| *a = (a.0 / r, a.1 / r));
            }
            norm
        }
    }

    fn all_paulis(n: usize) -> Vec<PauliOperator> {
        (0..4usize.pow(n as u32))
            .map(|mut k| {
                let mut x = BitVector::zeros(n);
                let mut z = BitVector::zeros(n);
                for q in 0..n {
                    x.set(q, k & 1 == 1);
                    z.set(q, k & 2 == 2);
                    k >>= 2;
                }
                PauliOperator::from_xz(x, z)
            })
            .collect()
    }

    fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        match rng.gen_range(0..12) {
            0 => Gate::H(a),
            1 => Gate::S(a),
            2 => Gate::Sdg(a),
            3 => Gate::SqrtX(a),
            4 => Gate::SqrtXdg(a),
            5 => Gate::X(a),
            6 => Gate::Y(a),
            7 => Gate::Z(a),
            8 => Gate::CX(a, b),
            9 => Gate::CY(a, b),
            10 => Gate::CZ(a, b),
            _ => Gate::Swap(a, b),
        }
    }

    fn basis_pauli(n: usize, q: usize, b: Basis) -> PauliOperator {
        PauliOperator::single(n, q, b.to_string().chars().next().unwrap())
    }

    #[test]
    fn tableau_matches_state_vector() {
        let n = 3;
        let paulis = all_paulis(n);
        for trial in 0..60 {
            let mut rng = trial_rng(11, trial);
            let mut t = Tableau::new(n);
            let mut d = Dense::new(n);
            for _ in 0..40 {
                match rng.gen_range(0..10) {
                    0 | 1 => {
                        let q = rng.gen_range(0..n);
                        let b = PAULIS[rng.gen_range(0..3)];
                        let m = t.measure(q, b, &mut rng);
                        let prob = d.project(&basis_pauli(n, q, b), m);
                        assert!(prob > 1e-9, "tableau outcome has zero probability");
                        if rng.gen_bool(0.3) {
                            t.reset(q, b, &mut rng);
                            let m = d.expectation(&basis_pauli(n, q, b)) < 0.0;
                            let fix = if b == Basis::Z { Gate::X(q) } else { Gate::Z(q) };
                            // Reset in the dense oracle: project, then flip if needed.
                            let prob = d.project(&basis_pauli(n, q, b), m);
                            assert!(prob > 1e-9);
                            if m {
                                d.gate(&fix);
                            }
                        }
                    }
                    _ => {
                        let g = random_gate(&mut rng, n);
                        t.apply(&g);
                        d.gate(&g);
                    }
                }
                for p in &paulis {
                    let e = d.expectation(p);
                    let want = if e > 0.999 {
                        Some(false)
                    } else if e < -0.999 {
                        Some(true)
                    } else {
                        assert!(e.abs() < 1e-9, "stabilizer states have expectations 0 or ±1");
                        None
                    };
                    assert_eq!(t.expectation(p), want, "trial {trial}, pauli {p:?}");
                }
            }
        }
    }

    #[test]
    fn measurement_of_plus_is_random_and_repeatable() {
        let mut t = Tableau::new(1);
        t.apply(&Gate::H(0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, random) = t.measure_z(0, &mut rng);
        assert!(random);
        let (m2, random2) = t.measure_z(0, &mut rng);
        assert!(!random2);
        assert_eq!(m, m2);
    }

    fn inverse(g: &Gate) -> Gate {
        match *g {
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            Gate::SqrtX(q) => Gate::SqrtXdg(q),
            Gate::SqrtXdg(q) => Gate::SqrtX(q),
            other => other,
        }
    }

    /// `U`, faults, `U†`, then Z measurements as detectors.
    fn mirror_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
        let gates: Vec<Gate> = (0..len).map(|_| random_gate(rng, n)).collect();
        let mut c = Circuit::new(n);
        for q in 0..n {
            c.reset(q, Basis::Z);
        }
        for g in &gates {
            c.gate(*g);
            c.noise(Channel::Depolarize1 { p: 0.01, q: g.qubits().0 });
        }
        for g in gates.iter().rev() {
            c.gate(inverse(g));
        }
        for q in 0..n {
            let r = c.measure(q, Basis::Z);
            c.noise(Channel::Flip { p: 0.01, rec: r });
            c.detector(vec![r], false, None);
        }
        c.observable(0, vec![0, 1]);
        c
    }

    #[test]
    fn frames_agree_with_tableau() {
        for trial in 0..20 {
            let mut rng = trial_rng(5, trial);
            let c = mirror_circuit(&mut rng, 5, 30);
            check_detectors(&c).unwrap();
            let faults = elementary_faults(&c);
            assert_eq!(faults.len(), 30 * 3 + 5);
            let effects = propagate_faults(&c, &faults, c.instructions.len());
            for (f, e) in faults.iter().zip(&effects) {
                let r = simulate_with_faults(&c, 1, &[InjectedFault { at: f.at, action: f.action.clone() }]);
                let dets: Vec<usize> = r.detectors.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                assert_eq!(dets, e.detectors);
                let obs: Vec<usize> = r.observables.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                assert_eq!(obs, e.observables);
            }
        }
    }

    #[test]
    fn gauge_randomization_finds_random_detectors() {
        let c = Circuit::parse(
            "QUBITS 1\nR Z 0\nH 0\nM Z 0 -> r0\nFEEDBACK r0 -> X0\nM Z 0 -> r1\nDETECTOR r1\nDETECTOR r0\n",
        )
        .unwrap();
        assert_eq!(nondeterministic_detectors(&c, 1), vec![1]);
        assert!(matches!(extract_dem(&c), Err(SimError::NondeterministicDetectors(_))));
    }

    #[test]
    fn feedback_propagates_through_frames() {
        let c = Circuit::parse(
            "QUBITS 1\nR Z 0\nH 0\nX_ERROR(0.1) 0\nM Z 0 -> r0\nFEEDBACK r0 -> X0\nM Z 0 -> r1\nDETECTOR r1\n",
        )
        .unwrap();
        check_detectors(&c).unwrap();
        // X on |+⟩ is harmless; Z would flip the random outcome but the
        // feedback restores |0⟩ either way.
        let dem = extract_dem(&c).unwrap();
        assert!(dem.mechanisms.is_empty());
    }

    #[test]
    fn repetition_code_dem() {
        // Three data qubits, two ZZ checks, X errors on the middle qubit and
        // on the first one (twice, merged).
        let c = Circuit::parse(
            "QUBITS 5\nR Z 0\nR Z 1\nR Z 2\nR Z 3\nR Z 4\nX_ERROR(0.1) 1\nX_ERROR(0.2) 0\nX_ERROR(0.3) 0\n\
             CX 0 3\nCX 1 3\nCX 1 4\nCX 2 4\nM Z 3 -> r0\nM Z 4 -> r1\nDETECTOR r0\nDETECTOR r1\n\
             M Z 0 -> r2\nOBSERVABLE 0 r2\n",
        )
        .unwrap();
        let dem = extract_dem(&c).unwrap();
        assert_eq!(dem.mechanisms.len(), 2);
        assert_eq!(dem.mechanisms[0].detectors, vec![0, 1]);
        assert!((dem.mechanisms[0].p - 0.1).abs() < 1e-12);
        assert_eq!(dem.mechanisms[1].detectors, vec![0]);
        assert_eq!(dem.mechanisms[1].observables, vec![0]);
        assert!((dem.mechanisms[1].p - (0.2 * 0.7 + 0.3 * 0.8)).abs() < 1e-12);
        let text = dem.to_string();
        assert!(text.contains("error(0.1) D0 D1"));
        assert_eq!(DetectorErrorModel::parse(&text).unwrap(), dem);
    }

    #[test]
    fn dem_probabilities_bounded() {
        let mut rng = trial_rng(2, 0);
        let c = annotate(&mirror_circuit(&mut rng, 4, 20), &NoiseModel::new(0.3));
        let dem = extract_dem(&c).unwrap();
        assert!(dem.mechanisms.iter().all(|m| m.p > 0.0 && m.p <= 0.5));
        assert!(dem.mechanisms.iter().all(|m| !m.detectors.is_empty() || !m.observables.is_empty()));
    }

    #[test]
    fn annotate_cx_tick_on_four_qubits() {
        let c = Circuit::parse("QUBITS 4\nCX 0 1\nTICK\n").unwrap();
        let noisy = annotate(&c, &NoiseModel::new(1e-3));
        let chans: Vec<&Channel> =
            noisy.instructions.iter().filter_map(|i| if let Instruction::Noise(ch) = i { Some(ch) } else { None }).collect();
        assert_eq!(chans.len(), 3);
        assert_eq!(*chans[0], Channel::Depolarize2 { p: 1e-3, a: 0, b: 1 });
        assert_eq!(*chans[1], Channel::Depolarize1 { p: 1e-4, q: 2 });
        assert_eq!(*chans[2], Channel::Depolarize1 { p: 1e-4, q: 3 });
    }

    #[test]
    fn annotate_respects_noise_off_and_liveness() {
        let c = Circuit::parse("QUBITS 3\nNOISE OFF\nH 0\nTICK\nNOISE ON\nR Z 2\nH 2\nM Z 2 -> r0\nTICK\nH 0\nTICK\n").unwrap();
        let noisy = annotate(&c, &NoiseModel::new(1e-2));
        let text = noisy.to_string();
        // First tick is noiseless, qubit 2 is dead after its measurement and
        // qubit 1 idles in both noisy ticks.
        assert_eq!(text.matches("DEPOLARIZE1(0.001) 1").count(), 2);
        assert_eq!(text.matches("DEPOLARIZE1(0.001) 2").count(), 1);
        assert!(text.contains("FLIP(0.01) r0"));
        assert_eq!(annotate(&c, &NoiseModel::new(0.0)), c);
    }

    #[test]
    fn sampled_marginals_match_exact() {
        let mut effects = Vec::new();
        let ps = [0.3, 0.05, 0.011, 0.002, 0.0004];
        for (i, &p) in ps.iter().enumerate() {
            for j in 0..40 {
                effects.push((p, vec![(i * 7 + j) % 12], if j % 9 == 0 { vec![0] } else { vec![] }));
            }
        }
        let dem = DetectorErrorModel::from_effects(effects, 12, 1, vec![DetectorInfo { postselect: false, block: None }; 12]);
        let shots = 100_000;
        let s = sample(&dem, shots, 9);
        for d in 0..12 {
            let prod: f64 = dem.mechanisms.iter().filter(|m| m.detectors.contains(&d)).map(|m| 1.0 - 2.0 * m.p).product();
            let exact = (1.0 - prod) / 2.0;
            let got = s.iter().filter(|x| x.detectors.get(d)).count() as f64 / shots as f64;
            let sigma = (exact * (1.0 - exact) / shots as f64).sqrt();
            assert!((got - exact).abs() < 5.0 * sigma, "detector {d}: {got} vs {exact}");
        }
        assert_eq!(sample(&dem, 100, 9)[..], s[..100]);
    }

    #[test]
    fn epsilon_formulas() {
        assert!((epsilon_memory(0.0, 4, 4)).abs() < 1e-15);
        let e = epsilon_memory(0.1, 2, 3);
        assert!(((1.0 - e).powi(6) - 0.9).abs() < 1e-12);
        let e = epsilon_prep(0.1, 4);
        assert!(((1.0 - e).powi(4) - 0.9).abs() < 1e-12);
    }
}
