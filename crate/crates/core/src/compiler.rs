//! Injection-minimizing factorization of logical Cliffords.
//!
//! Elements of the free group `F` (SWAP-transversal gates) cost nothing, and
//! each injected gate costs one. The reachable set after `j` injections is
//! `X_j = F S F S ... F`, a union of right cosets of `F`, so the search runs
//! level by level over cosets. Matrices are packed into a `u64`, one byte
//! per row, which limits the compiler to `2t <= 8` logical dimensions.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2core::{BitMatrix, SymplecticMatrix};
use crate::liftgate::{
    logical_global_s, logical_s, logical_sqrt_x, permutation_swaps, Clifford1, CliffordCircuit, Gate, GateRecord,
    LogicalAction,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("target is not in the generated group")]
    NotInGroup,
    #[error("heuristic search found no word with at most {0} injections")]
    DepthExceeded(usize),
    #[error("logical dimension {0} exceeds the packed limit of 8")]
    DimensionTooLarge(usize),
    #[error("group too large for exhaustive search ({0} elements seen)")]
    GroupTooLarge(usize),
    #[error("generators have mismatched dimensions")]
    DimensionMismatch,
    #[error("free element {0} has no single-qubit-plus-relabeling realization")]
    NoRealization(String),
    #[error("unknown injection {0:?}")]
    UnknownInjection(String),
}

/// 8x8 (or smaller) binary matrix, row `i` in byte `i`, column `j` in bit `j`.
type Packed = u64;

fn pack(m: &SymplecticMatrix) -> Packed {
    let d = 2 * m.t();
    let mut out = 0u64;
    for i in 0..d {
        for j in 0..d {
            if m.get(i, j) {
                out |= 1 << (8 * i + j);
            }
        }
    }
    out
}

fn unpack(p: Packed, t: usize) -> SymplecticMatrix {
    let d = 2 * t;
    let mut m = BitMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m.set(i, j, (p >> (8 * i + j)) & 1 == 1);
        }
    }
    SymplecticMatrix::new(m).expect("square")
}

#[inline]
fn pmul(a: Packed, b: Packed) -> Packed {
    let mut out = 0u64;
    for i in 0..8 {
        let mut row = (a >> (8 * i)) & 0xff;
        let mut acc = 0u64;
        while row != 0 {
            let j = row.trailing_zeros();
            acc ^= (b >> (8 * j)) & 0xff;
            row &= row - 1;
        }
        out |= acc << (8 * i);
    }
    out
}

fn pidentity(t: usize) -> Packed {
    (0..2 * t).map(|i| 1u64 << (9 * i)).sum()
}

/// Inverse of a symplectic packed matrix: `Λ Mᵀ Λ`.
fn pinverse(p: Packed, t: usize) -> Packed {
    pack(&unpack(p, t).inverse())
}

#[derive(Clone, Debug)]
pub struct Injection {
    pub label: String,
    pub action: LogicalAction,
}

/// Injection kinds accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InjectionKind {
    S(usize),
    SqrtX(usize),
    GlobalS,
}

impl InjectionKind {
    /// Parses `s`, `sx`, `s2`, `sx0`, `global-s`; a missing qubit means `default_qubit`.
    pub fn parse(s: &str, default_qubit: usize) -> Result<Self, CompileError> {
        let s = s.trim().to_ascii_lowercase();
        let qubit = |rest: &str| -> Result<usize, CompileError> {
            if rest.is_empty() {
                Ok(default_qubit)
            } else {
                rest.parse().map_err(|_| CompileError::UnknownInjection(s.clone()))
            }
        };
        if s == "global-s" || s == "gs" {
            Ok(Self::GlobalS)
        } else if let Some(rest) = s.strip_prefix("sx") {
            Ok(Self::SqrtX(qubit(rest)?))
        } else if let Some(rest) = s.strip_prefix('s') {
            Ok(Self::S(qubit(rest)?))
        } else {
            Err(CompileError::UnknownInjection(s))
        }
    }

    #[must_use]
    pub fn injection(&self, t: usize) -> Injection {
        match *self {
            Self::S(q) => Injection { label: format!("S_{q}"), action: logical_s(t, q) },
            Self::SqrtX(q) => Injection { label: format!("SQRT_X_{q}"), action: logical_sqrt_x(t, q) },
            Self::GlobalS => Injection { label: "S_all".into(), action: logical_global_s(t) },
        }
    }
}

/// Free generators (each with its physical realization) and injected gates.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    pub free: Vec<GateRecord>,
    pub injected: Vec<Injection>,
}

impl GeneratorSet {
    pub fn new(free: Vec<GateRecord>, mut injected: Vec<Injection>) -> Result<Self, CompileError> {
        let t = free.first().map(|g| g.action.t()).or_else(|| injected.first().map(|i| i.action.t()));
        let t = t.ok_or(CompileError::DimensionMismatch)?;
        if free.iter().any(|g| g.action.t() != t) || injected.iter().any(|i| i.action.t() != t) {
            return Err(CompileError::DimensionMismatch);
        }
        if 2 * t > 8 {
            return Err(CompileError::DimensionTooLarge(2 * t));
        }
        injected.sort_by(|a, b| a.label.cmp(&b.label));
        Ok(Self { free, injected })
    }

    #[must_use]
    pub fn t(&self) -> usize {
        self.free.first().map_or_else(|| self.injected[0].action.t(), |g| g.action.t())
    }
}

/// One entry of a factorization, in time order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordItem {
    /// A free element and a word over free generator indices (time order).
    Free { element: LogicalAction, generators: Vec<usize> },
    Inject { label: String, index: usize },
}

#[derive(Clone, Debug)]
pub struct Factorization {
    /// Alternating `[free, inject, free, ..., inject, free]`.
    pub word: Vec<WordItem>,
    pub injection_count: usize,
    /// Whether minimality is certified.
    pub exact: bool,
}

impl Factorization {
    /// Product of the word in time order.
    #[must_use]
    pub fn product(&self, gens: &GeneratorSet) -> LogicalAction {
        let t = gens.t();
        self.word.iter().fold(SymplecticMatrix::identity(t), |acc, item| match item {
            WordItem::Free { element, .. } => element.mul(&acc),
            WordItem::Inject { index, .. } => gens.injected[*index].action.mul(&acc),
        })
    }
}

/// Enumerated free group with BFS words over the generators.
struct FreeGroup {
    elems: Vec<Packed>,
    index: HashMap<Packed, u32>,
    /// `(parent, generator)`; element = gen · parent.
    tree: Vec<(u32, u32)>,
    /// For each vector `v` (bit `i` = row `i`): the least vector of its
    /// orbit and an element of `F` mapping `v` there.
    orbit_min: Vec<(u8, u32)>,
    /// Stabilizer in `F` of each orbit minimum.
    stabilizer: HashMap<u8, Vec<Packed>>,
}

fn apply_vec(m: Packed, v: u8) -> u8 {
    let mut out = 0u8;
    for i in 0..8 {
        let row = ((m >> (8 * i)) & 0xff) as u8;
        out |= (((row & v).count_ones() & 1) as u8) << i;
    }
    out
}

fn first_column(m: Packed) -> u8 {
    let mut out = 0u8;
    for i in 0..8 {
        out |= (((m >> (8 * i)) & 1) as u8) << i;
    }
    out
}

impl FreeGroup {
    fn build(gens: &[Packed], t: usize, cap: usize) -> Result<Self, CompileError> {
        let id = pidentity(t);
        let mut elems = vec![id];
        let mut index = HashMap::from([(id, 0u32)]);
        let mut tree = vec![(0, u32::MAX)];
        let mut i = 0;
        while i < elems.len() {
            for (g, &m) in gens.iter().enumerate() {
                let next = pmul(m, elems[i]);
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(next) {
                    if elems.len() >= cap {
                        return Err(CompileError::GroupTooLarge(cap));
                    }
                    e.insert(elems.len() as u32);
                    elems.push(next);
                    tree.push((i as u32, g as u32));
                }
            }
            i += 1;
        }
        let mut orbit_min = vec![(0u8, 0u32); 256];
        for v in 0..=255u8 {
            orbit_min[v as usize] = elems
                .iter()
                .enumerate()
                .map(|(i, &f)| (apply_vec(f, v), i as u32))
                .min()
                .expect("nonempty");
        }
        let mut stabilizer: HashMap<u8, Vec<Packed>> = HashMap::new();
        for &(w, _) in &orbit_min {
            stabilizer.entry(w).or_insert_with(|| elems.iter().copied().filter(|&f| apply_vec(f, w) == w).collect());
        }
        Ok(Self { elems, index, tree, orbit_min, stabilizer })
    }

    fn word(&self, mut e: u32) -> Vec<usize> {
        let mut out = Vec::new();
        while self.tree[e as usize].1 != u32::MAX {
            let (p, g) = self.tree[e as usize];
            out.push(g as usize);
            e = p;
        }
        out.reverse();
        out
    }

    /// Canonical key of the right coset `F g`.
    /// Moves the first column of `g` to its orbit minimum `w`, then
    /// minimizes over the stabilizer of `w`.
    fn coset_key(&self, g: Packed) -> Packed {
        let (w, f) = self.orbit_min[first_column(g) as usize];
        let g = pmul(self.elems[f as usize], g);
        self.stabilizer[&w].iter().map(|&h| pmul(h, g)).min().expect("contains identity")
    }
}

/// A coset discovered by the search: representative `rep = inj · prev`,
/// where `prev` lies in the coset `parent`.
#[derive(Clone, Copy, Debug)]
struct CosetRec {
    level: u8,
    rep: Packed,
    parent: u32,
    prev: Packed,
    inj: u8,
}

/// Levelled coset store. `elements` maps group elements to their coset
/// when element-level storage is enabled (exact mode).
struct Search<'a> {
    free: &'a FreeGroup,
    t: usize,
    injected: Vec<Packed>,
    cosets: Vec<CosetRec>,
    key_to_coset: HashMap<Packed, u32>,
    elements: Option<HashMap<Packed, u32>>,
}

impl<'a> Search<'a> {
    fn new(free: &'a FreeGroup, gens: &GeneratorSet, element_level: bool) -> Self {
        let t = gens.t();
        let id = pidentity(t);
        let mut s = Self {
            free,
            t,
            injected: gens.injected.iter().map(|i| pack(&i.action)).collect(),
            cosets: Vec::new(),
            key_to_coset: HashMap::new(),
            elements: element_level.then(HashMap::new),
        };
        s.add_coset(CosetRec { level: 0, rep: id, parent: u32::MAX, prev: id, inj: u8::MAX });
        s
    }

    fn add_coset(&mut self, rec: CosetRec) -> bool {
        let id = self.cosets.len() as u32;
        if let Some(elements) = &mut self.elements {
            if elements.contains_key(&rec.rep) {
                return false;
            }
            for &f in &self.free.elems {
                elements.insert(pmul(f, rec.rep), id);
            }
        } else {
            let key = self.free.coset_key(rec.rep);
            if self.key_to_coset.contains_key(&key) {
                return false;
            }
            self.key_to_coset.insert(key, id);
        }
        self.cosets.push(rec);
        true
    }

    fn coset_of(&self, g: Packed) -> Option<u32> {
        match &self.elements {
            Some(e) => e.get(&g).copied(),
            None => self.key_to_coset.get(&self.free.coset_key(g)).copied(),
        }
    }

    /// Expands every coset at `level`; returns the number of new cosets.
    fn expand(&mut self, level: u8) -> usize {
        let frontier: Vec<u32> =
            (0..self.cosets.len() as u32).filter(|&c| self.cosets[c as usize].level == level).collect();
        let mut added = 0;
        for c in frontier {
            let rep = self.cosets[c as usize].rep;
            for f in 0..self.free.elems.len() {
                let x = pmul(self.free.elems[f], rep);
                for s in 0..self.injected.len() {
                    let y = pmul(self.injected[s], x);
                    if self.coset_of(y).is_none() {
                        let rec = CosetRec { level: level + 1, rep: y, parent: c, prev: x, inj: s as u8 };
                        if self.add_coset(rec) {
                            added += 1;
                        }
                    }
                }
            }
        }
        added
    }

    /// Word for an element `g` of coset `c`, in time order.
    fn word(&self, g: Packed, c: u32, gens: &GeneratorSet) -> Vec<WordItem> {
        let rec = self.cosets[c as usize];
        let f = pmul(g, pinverse(rec.rep, self.t));
        let mut out = if rec.parent == u32::MAX {
            Vec::new()
        } else {
            let mut w = self.word(rec.prev, rec.parent, gens);
            let s = rec.inj as usize;
            w.push(WordItem::Inject { label: gens.injected[s].label.clone(), index: s });
            w
        };
        let fi = self.free.index[&f];
        out.push(WordItem::Free { element: unpack(f, self.t), generators: self.free.word(fi) });
        out
    }
}

/// Default cap on enumerated elements for exact mode.
pub const EXACT_ELEMENT_CAP: usize = 20_000_000;
/// Levels stored by the heuristic search on each side.
pub const HEURISTIC_LEVELS: u8 = 4;

fn check_target(target: &LogicalAction, gens: &GeneratorSet) -> Result<(), CompileError> {
    if target.t() != gens.t() {
        return Err(CompileError::DimensionMismatch);
    }
    Ok(())
}

fn free_group(gens: &GeneratorSet, cap: usize) -> Result<FreeGroup, CompileError> {
    let packed: Vec<Packed> = gens.free.iter().map(|g| pack(&g.action)).collect();
    FreeGroup::build(&packed, gens.t(), cap)
}

/// Minimal-injection factorization. Uses the exact level search when the
/// full group fits under [`EXACT_ELEMENT_CAP`], meet-in-the-middle otherwise.
pub fn factorize(target: &LogicalAction, gens: &GeneratorSet) -> Result<Factorization, CompileError> {
    let t = gens.t();
    let order = crate::liftgate::sp_order(t);
    if order <= num_bigint::BigUint::from(EXACT_ELEMENT_CAP) {
        factorize_exact(target, gens)
    } else {
        factorize_heuristic(target, gens, 2 * usize::from(HEURISTIC_LEVELS) + 1)
    }
}

/// Exact 0/1 search: the first level containing the target is the minimum.
pub fn factorize_exact(target: &LogicalAction, gens: &GeneratorSet) -> Result<Factorization, CompileError> {
    check_target(target, gens)?;
    let free = free_group(gens, EXACT_ELEMENT_CAP)?;
    let g = pack(target);
    let mut search = Search::new(&free, gens, true);
    let mut level = 0u8;
    loop {
        if let Some(c) = search.coset_of(g) {
            let word = search.word(g, c, gens);
            return Ok(Factorization { word, injection_count: usize::from(search.cosets[c as usize].level), exact: true });
        }
        if search.elements.as_ref().map_or(0, HashMap::len) > EXACT_ELEMENT_CAP {
            return Err(CompileError::GroupTooLarge(EXACT_ELEMENT_CAP));
        }
        if search.expand(level) == 0 {
            return Err(CompileError::NotInGroup);
        }
        level += 1;
    }
}

/// Meet-in-the-middle over stored coset levels `<= HEURISTIC_LEVELS`:
/// `t = u v` with `u` in `X_a` and `v` a coset representative of `X_b`.
/// Words up to `2 * HEURISTIC_LEVELS` injections are minimal; one more
/// level is tried by extending `v` with a single injection.
pub fn factorize_heuristic(target: &LogicalAction, gens: &GeneratorSet, max_depth: usize) -> Result<Factorization, CompileError> {
    check_target(target, gens)?;
    let t = gens.t();
    let free = free_group(gens, EXACT_ELEMENT_CAP)?;
    let g = pack(target);
    let mut search = Search::new(&free, gens, false);
    for level in 0..HEURISTIC_LEVELS {
        search.expand(level);
    }
    let stored = usize::from(HEURISTIC_LEVELS);
    let by_level = |b: usize| -> Vec<u32> {
        (0..search.cosets.len() as u32).filter(|&c| usize::from(search.cosets[c as usize].level) == b).collect()
    };
    for m in 0..=max_depth.min(2 * stored + 1) {
        let a = m.min(stored);
        let b = m - a;
        if b <= stored {
            let hit = by_level(b).into_par_iter().find_map_first(|v| {
                let rep = search.cosets[v as usize].rep;
                let u = pmul(g, pinverse(rep, t));
                search.coset_of(u).filter(|&c| usize::from(search.cosets[c as usize].level) <= a).map(|c| (c, v, u))
            });
            if let Some((cu, cv, u)) = hit {
                let mut word = search.word(search.cosets[cv as usize].rep, cv, gens);
                word.extend(search.word(u, cu, gens));
                return Ok(finish(word, m <= 2 * stored));
            }
        } else {
            // v = s · f · r with r at the deepest stored level.
            let reps = by_level(stored);
            let candidates: Vec<(u32, usize, usize)> = reps
                .iter()
                .flat_map(|&r| (0..free.elems.len()).flat_map(move |f| (0..gens.injected.len()).map(move |s| (r, f, s))))
                .collect();
            let hit = candidates.into_par_iter().find_map_first(|(r, f, s)| {
                let x = pmul(free.elems[f], search.cosets[r as usize].rep);
                let v = pmul(search.injected[s], x);
                let u = pmul(g, pinverse(v, t));
                search.coset_of(u).map(|c| (c, r, x, s, u))
            });
            if let Some((cu, r, x, s, u)) = hit {
                let mut word = search.word(x, r, gens);
                word.push(WordItem::Inject { label: gens.injected[s].label.clone(), index: s });
                word.push(WordItem::Free { element: SymplecticMatrix::identity(t), generators: Vec::new() });
                word.extend(search.word(u, cu, gens));
                return Ok(finish(word, false));
            }
        }
    }
    Err(CompileError::DepthExceeded(max_depth.min(2 * stored + 1)))
}

/// Merges adjacent free elements and counts injections.
fn finish(word: Vec<WordItem>, exact: bool) -> Factorization {
    let mut out: Vec<WordItem> = Vec::with_capacity(word.len());
    for item in word {
        match (out.last_mut(), item) {
            (Some(WordItem::Free { element, generators }), WordItem::Free { element: e2, generators: g2 }) => {
                *element = e2.mul(element);
                generators.extend(g2);
            }
            (_, item) => out.push(item),
        }
    }
    let injection_count = out.iter().filter(|i| matches!(i, WordItem::Inject { .. })).count();
    Factorization { word: out, injection_count, exact }
}

/// Number of right cosets of the free group first reached at each number
/// of injections, up to `max_level`.
pub fn coset_level_sizes(gens: &GeneratorSet, max_level: u8) -> Result<Vec<usize>, CompileError> {
    let free = free_group(gens, EXACT_ELEMENT_CAP)?;
    let mut search = Search::new(&free, gens, false);
    let mut sizes = vec![1];
    for level in 0..max_level {
        let added = search.expand(level);
        if added == 0 {
            break;
        }
        sizes.push(added);
    }
    Ok(sizes)
}

/// Minimal injection count of every group element, as `count -> elements`.
pub fn injection_histogram(gens: &GeneratorSet) -> Result<BTreeMap<usize, u64>, CompileError> {
    if gens.t() > 3 {
        return Err(CompileError::GroupTooLarge(usize::MAX));
    }
    let free = free_group(gens, EXACT_ELEMENT_CAP)?;
    let mut search = Search::new(&free, gens, true);
    let mut level = 0;
    while search.expand(level) > 0 {
        level += 1;
    }
    let mut hist = BTreeMap::new();
    for c in &search.cosets {
        *hist.entry(usize::from(c.level)).or_insert(0) += free.elems.len() as u64;
    }
    Ok(hist)
}

/// Injection counts along shortest Cayley-graph words, where every free
/// generator and every injection has length one. Among the shortest words
/// for an element the fewest injections is kept. This is the count a plain
/// shortest-word search reports; it can exceed the minimum from
/// [`injection_histogram`].
pub fn shortest_word_histogram(gens: &GeneratorSet) -> Result<BTreeMap<usize, u64>, CompileError> {
    if gens.t() > 3 {
        return Err(CompileError::GroupTooLarge(usize::MAX));
    }
    let moves: Vec<(Packed, usize)> = gens
        .free
        .iter()
        .map(|g| (pack(&g.action), 0))
        .chain(gens.injected.iter().map(|i| (pack(&i.action), 1)))
        .collect();
    let id = pidentity(gens.t());
    let mut best: HashMap<Packed, (usize, usize)> = HashMap::from([(id, (0, 0))]);
    let mut frontier = vec![id];
    let mut len = 0;
    while !frontier.is_empty() {
        len += 1;
        let mut next = Vec::new();
        for e in &frontier {
            let inj = best[e].1;
            for &(m, w) in &moves {
                let n = pmul(m, *e);
                match best.get_mut(&n) {
                    None => {
                        best.insert(n, (len, inj + w));
                        next.push(n);
                    }
                    Some(b) if b.0 == len && b.1 > inj + w => b.1 = inj + w,
                    _ => {}
                }
            }
        }
        frontier = next;
    }
    let mut hist = BTreeMap::new();
    for (_, inj) in best.values() {
        *hist.entry(*inj).or_insert(0) += 1;
    }
    Ok(hist)
}

/// One step of a physical schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleStep {
    /// Single-qubit layer (per-qubit words) followed by a relabeling
    /// `q -> relabel[q]`.
    Layer { gates: Vec<Gate>, relabel: Vec<usize> },
    Inject { label: String },
}

/// Collapses a circuit of single-qubit gates and SWAPs into one Clifford per
/// qubit followed by a relabeling.
pub fn compress(circuit: &CliffordCircuit) -> Result<(Vec<Clifford1>, Vec<usize>), CompileError> {
    let n = circuit.n;
    let mut at: Vec<usize> = (0..n).collect();
    let mut u = vec![Clifford1::I; n];
    for g in &circuit.ops {
        match *g {
            Gate::Swap(a, b) => at.swap(a, b),
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
            g if !g.is_two_qubit() => {
                let q = at[g.qubits().0];
                u[q] = Clifford1::of_gate(&g).after(&u[q]);
            }
            g => return Err(CompileError::NoRealization(g.to_string())),
        }
    }
    let mut pos = vec![0; n];
    for (p, &q) in at.iter().enumerate() {
        pos[q] = p;
    }
    Ok((u, pos))
}

/// Physical circuit of a compressed layer.
#[must_use]
pub fn layer_circuit(u: &[Clifford1], relabel: &[usize]) -> CliffordCircuit {
    let mut c = CliffordCircuit::empty(u.len());
    for (q, cl) in u.iter().enumerate() {
        for g in cl.word(q) {
            c.push(g);
        }
    }
    for g in permutation_swaps(relabel) {
        c.push(g);
    }
    c
}

/// Alternating physical schedule: each free element becomes one compressed
/// layer, each injection a marker.
pub fn schedule(fact: &Factorization, gens: &GeneratorSet) -> Result<Vec<ScheduleStep>, CompileError> {
    let mut out = Vec::new();
    for item in &fact.word {
        match item {
            WordItem::Free { generators, .. } => {
                if generators.is_empty() {
                    continue;
                }
                let n = gens.free[generators[0]].circuit.n;
                let mut c = CliffordCircuit::empty(n);
                for &g in generators {
                    c.extend(&gens.free[g].circuit);
                }
                let (u, relabel) = compress(&c).map_err(|_| CompileError::NoRealization(gens.free[generators[0]].label.clone()))?;
                let gates = u.iter().enumerate().flat_map(|(q, cl)| cl.word(q)).collect();
                out.push(ScheduleStep::Layer { gates, relabel });
            }
            WordItem::Inject { label, .. } => out.push(ScheduleStep::Inject { label: label.clone() }),
        }
    }
    Ok(out)
}
