//! Stabilizer and CSS codes, the symplectic double, ZX-duality, `C4`
//! concatenation, the Hadamard transform and the seed library.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2core::{swap_halves, symplectic_form, BitMatrix, BitVector, PauliOperator, RowSpace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("unknown seed code {0:?}")]
    UnknownSeed(String),
    #[error("checks {0},{1} anticommute")]
    Anticommuting(usize, usize),
    #[error("invalid ZX-duality: {0}")]
    InvalidDuality(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("pattern length {0} does not match {1} qubits")]
    PatternLength(usize, usize),
}

/// Anything that can be viewed as a stabilizer group plus a logical basis.
pub trait StabilizerView {
    fn num_qubits(&self) -> usize;
    /// Symplectic generator rows `(x | z)` of length `2n`.
    fn stabilizer_rows(&self) -> Vec<BitVector>;
    /// Logical `(X̄_i, Z̄_i)` as symplectic vectors.
    fn logical_rows(&self) -> (Vec<BitVector>, Vec<BitVector>);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerCode {
    pub n: usize,
    pub checks: Vec<PauliOperator>,
    pub logical_x: Vec<PauliOperator>,
    pub logical_z: Vec<PauliOperator>,
}

impl StabilizerCode {
    /// Code with checks only; logicals must be filled by [`compute_logicals`].
    #[must_use]
    pub fn from_checks(n: usize, checks: Vec<PauliOperator>) -> Self {
        Self { n, checks, logical_x: Vec::new(), logical_z: Vec::new() }
    }

    /// Checks given as an `m x 2n` matrix of `(x | z)` rows.
    #[must_use]
    pub fn from_check_matrix(h: &BitMatrix) -> Self {
        let n = h.cols() / 2;
        Self::from_checks(n, h.row_vecs().iter().map(PauliOperator::from_symplectic).collect())
    }

    #[must_use]
    pub fn k(&self) -> usize {
        self.logical_x.len()
    }

    #[must_use]
    pub fn check_matrix(&self) -> BitMatrix {
        BitMatrix::from_rows(2 * self.n, self.checks.iter().map(PauliOperator::to_symplectic).collect())
    }

    /// Exchanges X and Z on every qubit flagged in `pattern`.
    pub fn hadamard_transform(&self, pattern: &[bool]) -> Result<Self, CodeError> {
        if pattern.len() != self.n {
            return Err(CodeError::PatternLength(pattern.len(), self.n));
        }
        let swap = |p: &PauliOperator| {
            let mut x = p.x.clone();
            let mut z = p.z.clone();
            for (q, &h) in pattern.iter().enumerate() {
                if h {
                    let (a, b) = (x.get(q), z.get(q));
                    x.set(q, b);
                    z.set(q, a);
                }
            }
            PauliOperator::from_xz(x, z)
        };
        Ok(Self {
            n: self.n,
            checks: self.checks.iter().map(swap).collect(),
            logical_x: self.logical_x.iter().map(swap).collect(),
            logical_z: self.logical_z.iter().map(swap).collect(),
        })
    }
}

impl StabilizerView for StabilizerCode {
    fn num_qubits(&self) -> usize {
        self.n
    }
    fn stabilizer_rows(&self) -> Vec<BitVector> {
        self.checks.iter().map(PauliOperator::to_symplectic).collect()
    }
    fn logical_rows(&self) -> (Vec<BitVector>, Vec<BitVector>) {
        (
            self.logical_x.iter().map(PauliOperator::to_symplectic).collect(),
            self.logical_z.iter().map(PauliOperator::to_symplectic).collect(),
        )
    }
}

/// CSS code with X-checks `hx` and Z-checks `hz`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CssCode {
    pub n: usize,
    pub hx: BitMatrix,
    pub hz: BitMatrix,
    pub logical_x: Vec<PauliOperator>,
    pub logical_z: Vec<PauliOperator>,
}

impl CssCode {
    /// Builds the code and derives CSS-type logicals.
    #[must_use]
    pub fn new(hx: BitMatrix, hz: BitMatrix) -> Self {
        let n = hx.cols();
        let (lx, lz) = css_logicals(&hx, &hz);
        let logical_x = lx.iter().map(|v| PauliOperator::from_xz(v.clone(), BitVector::zeros(n))).collect();
        let logical_z = lz.iter().map(|v| PauliOperator::from_xz(BitVector::zeros(n), v.clone())).collect();
        Self { n, hx, hz, logical_x, logical_z }
    }

    #[must_use]
    pub fn k(&self) -> usize {
        self.logical_x.len()
    }

    #[must_use]
    pub fn is_self_dual(&self) -> bool {
        self.hx == self.hz
    }

    /// X-type logical supports (CSS logicals only; the X part otherwise).
    #[must_use]
    pub fn logical_x_supports(&self) -> Vec<BitVector> {
        self.logical_x.iter().map(|p| p.x.clone()).collect()
    }

    #[must_use]
    pub fn logical_z_supports(&self) -> Vec<BitVector> {
        self.logical_z.iter().map(|p| p.z.clone()).collect()
    }

    #[must_use]
    pub fn to_stabilizer(&self) -> StabilizerCode {
        let n = self.n;
        let mut checks = Vec::new();
        for r in self.hx.row_vecs() {
            checks.push(PauliOperator::from_xz(r.clone(), BitVector::zeros(n)));
        }
        for r in self.hz.row_vecs() {
            checks.push(PauliOperator::from_xz(BitVector::zeros(n), r.clone()));
        }
        StabilizerCode {
            n,
            checks,
            logical_x: self.logical_x.clone(),
            logical_z: self.logical_z.clone(),
        }
    }
}

impl StabilizerView for CssCode {
    fn num_qubits(&self) -> usize {
        self.n
    }
    fn stabilizer_rows(&self) -> Vec<BitVector> {
        let zero = BitVector::zeros(self.n);
        let mut rows: Vec<BitVector> = self.hx.row_vecs().iter().map(|r| r.concat(&zero)).collect();
        rows.extend(self.hz.row_vecs().iter().map(|r| zero.concat(r)));
        rows
    }
    fn logical_rows(&self) -> (Vec<BitVector>, Vec<BitVector>) {
        (
            self.logical_x.iter().map(PauliOperator::to_symplectic).collect(),
            self.logical_z.iter().map(PauliOperator::to_symplectic).collect(),
        )
    }
}

/// Fixed-point-free involution on qubits exchanging the X and Z sectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZXDuality {
    perm: Vec<usize>,
}

impl ZXDuality {
    pub fn new(perm: Vec<usize>) -> Result<Self, CodeError> {
        let n = perm.len();
        for (i, &p) in perm.iter().enumerate() {
            if p >= n {
                return Err(CodeError::InvalidDuality(format!("image {p} out of range")));
            }
            if p == i {
                return Err(CodeError::InvalidDuality(format!("fixed point {i}")));
            }
            if perm[p] != i {
                return Err(CodeError::InvalidDuality(format!("not an involution at {i}")));
            }
        }
        Ok(Self { perm })
    }

    /// `i <-> i + n` on `2n` qubits.
    #[must_use]
    pub fn half_shift(two_n: usize) -> Self {
        let n = two_n / 2;
        Self { perm: (0..two_n).map(|i| (i + n) % two_n).collect() }
    }

    #[inline]
    #[must_use]
    pub fn apply(&self, i: usize) -> usize {
        self.perm[i]
    }

    #[must_use]
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Orbits `(i, tau(i))` with `i < tau(i)`, in increasing `i`.
    #[must_use]
    pub fn orbits(&self) -> Vec<(usize, usize)> {
        (0..self.perm.len()).filter(|&i| i < self.perm[i]).map(|i| (i, self.perm[i])).collect()
    }
}

/// Placement of outer qubits into `C4` blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcatLayout {
    /// Physical qubits of each block, `4b..4b+3`.
    pub blocks: Vec<[usize; 4]>,
    /// Outer qubit -> (block index, logical slot 1 or 2).
    pub pair_map: Vec<(usize, u8)>,
}

impl ConcatLayout {
    #[must_use]
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block of a physical qubit.
    #[must_use]
    pub fn block_of(&self, q: usize) -> usize {
        q / 4
    }
}

/// Physical offsets of the X and Z images of a `C4` logical slot:
/// `X̄₁=XXII, Z̄₁=ZIZI, X̄₂=XIXI, Z̄₂=ZZII`.
const C4_X: [[usize; 2]; 2] = [[0, 1], [0, 2]];
const C4_Z: [[usize; 2]; 2] = [[0, 2], [0, 1]];

fn lift_support(v: &BitVector, layout: &ConcatLayout, table: &[[usize; 2]; 2]) -> BitVector {
    let mut out = BitVector::zeros(4 * layout.blocks.len());
    for i in v.ones() {
        let (b, slot) = layout.pair_map[i];
        for &o in &table[slot as usize - 1] {
            out.flip(4 * b + o);
        }
    }
    out
}

/// Maps an outer Pauli through the `C4` logical operators.
#[must_use]
pub fn concat_pauli(p: &PauliOperator, layout: &ConcatLayout) -> PauliOperator {
    let x = lift_support(&p.x, layout, &C4_X);
    let z = lift_support(&p.z, layout, &C4_Z);
    PauliOperator::from_xz(x, z)
}

/// A symplectic basis of the logical space, checks unchanged.
///
/// Declared logicals that already form a valid basis are kept as they are.
/// Otherwise a symplectic Gram-Schmidt runs over the normalizer basis in
/// fixed qubit order, so the result is reproducible.
pub fn compute_logicals(code: &StabilizerCode) -> Result<StabilizerCode, CodeError> {
    let n = code.n;
    let rows = code.stabilizer_rows();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if symplectic_form(&rows[i], &rows[j]) {
                return Err(CodeError::Anticommuting(i, j));
            }
        }
    }
    if !code.logical_x.is_empty() && validate(code).violations.is_empty() {
        return Ok(code.clone());
    }
    let (lx, lz) = symplectic_logical_basis(n, &rows);
    Ok(StabilizerCode {
        n,
        checks: code.checks.clone(),
        logical_x: lx.iter().map(PauliOperator::from_symplectic).collect(),
        logical_z: lz.iter().map(PauliOperator::from_symplectic).collect(),
    })
}

fn symplectic_logical_basis(n: usize, rows: &[BitVector]) -> (Vec<BitVector>, Vec<BitVector>) {
    let swapped = BitMatrix::from_rows(2 * n, rows.iter().map(swap_halves).collect());
    let normalizer = swapped.kernel();
    let mut span = RowSpace::new(2 * n);
    for r in rows {
        span.insert(r.clone());
    }
    let mut pool: Vec<BitVector> = Vec::new();
    for v in normalizer.row_vecs() {
        if span.insert(v.clone()) {
            pool.push(v.clone());
        }
    }
    let mut lx = Vec::new();
    let mut lz = Vec::new();
    while !pool.is_empty() {
        let a = pool.remove(0);
        let pos = pool
            .iter()
            .position(|b| symplectic_form(&a, b))
            .expect("logical quotient is nondegenerate");
        let b = pool.remove(pos);
        for v in &mut pool {
            let ca = symplectic_form(v, &b);
            let cb = symplectic_form(v, &a);
            if ca {
                v.xor_assign(&a);
            }
            if cb {
                v.xor_assign(&b);
            }
        }
        lx.push(a);
        lz.push(b);
    }
    (lx, lz)
}

/// CSS logical supports: X in `ker(hz)` mod `row(hx)`, Z in `ker(hx)`
/// mod `row(hz)`, paired so that `lx[i] . lz[j] = delta_ij`.
#[must_use]
pub fn css_logicals(hx: &BitMatrix, hz: &BitMatrix) -> (Vec<BitVector>, Vec<BitVector>) {
    let quotient = |checks_other: &BitMatrix, checks_same: &BitMatrix| {
        let mut span = RowSpace::from_matrix(checks_same);
        let mut out = Vec::new();
        for v in checks_other.kernel().into_rows() {
            if span.insert(v.clone()) {
                out.push(v);
            }
        }
        out
    };
    let lx = quotient(hz, hx);
    let lz = quotient(hx, hz);
    let k = lx.len();
    assert_eq!(k, lz.len(), "inconsistent CSS logical count");
    if k == 0 {
        return (lx, lz);
    }
    let mut p = BitMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            p.set(i, j, lx[i].dot(&lz[j]));
        }
    }
    let inv = p.inverse().expect("logical pairing is invertible");
    let n = hx.cols();
    let lz_new = (0..k)
        .map(|j| {
            let mut v = BitVector::zeros(n);
            for l in 0..k {
                if inv.get(l, j) {
                    v.xor_assign(&lz[l]);
                }
            }
            v
        })
        .collect();
    (lx, lz_new)
}

/// Seed codes printed with explicit parity checks.
pub const SEED_NAMES: [&str; 4] = ["c422", "c513", "c833", "c1244"];

pub fn seed_library(name: &str) -> Result<StabilizerCode, CodeError> {
    let rows: &[&str] = match name {
        "c422" => &["1001 0110", "0110 1001"],
        "c513" => &["10010 01100", "01001 00110", "10100 00011", "01010 10001"],
        "c833" => &[
            "11111111 00000000",
            "00000000 11111111",
            "01011010 00001111",
            "01010101 00110011",
            "01101001 01010101",
        ],
        "c1244" => &[
            "100101010100 010101011101",
            "010101010001 001100001010",
            "001100000101 101010010111",
            "000011000101 010110010111",
            "000000110000 110011001100",
            "000000001100 111100000011",
            "000000000011 001111001111",
            "000000000000 000000111111",
        ],
        other => return Err(CodeError::UnknownSeed(other.to_string())),
    };
    let vecs: Vec<BitVector> = rows.iter().map(|r| BitVector::parse(r).expect("seed literal")).collect();
    let h = BitMatrix::from_rows(vecs[0].len(), vecs);
    let mut code = StabilizerCode::from_check_matrix(&h);
    if name == "c422" {
        let p = |s: &str| PauliOperator::parse(s).expect("logical literal");
        code.logical_x = vec![p("IZZI"), p("ZIIZ")];
        code.logical_z = vec![p("ZIXI"), p("IZIX")];
    }
    compute_logicals(&code)
}

/// The doubled CSS code `hx = (H_X | H_Z)`, `hz = (H_Z | H_X)` with the
/// duality `i <-> i+n`.
///
/// Every logical `L = (a | b)` of the seed yields an X-type logical with
/// support `(a, b)` and a Z-type logical with support `(b, a)`. Logical
/// qubit `j < k` uses `X̄_j`, logical qubit `k + j` uses `Z̄_j` of the seed.
#[must_use]
pub fn symplectic_double(c: &StabilizerCode) -> (CssCode, ZXDuality) {
    let n = c.n;
    let h = c.check_matrix();
    let hx_rows: Vec<BitVector> = h.row_vecs().to_vec();
    let hz_rows: Vec<BitVector> = h.row_vecs().iter().map(swap_halves).collect();
    let zero = BitVector::zeros(2 * n);
    let xl = |l: &PauliOperator| PauliOperator::from_xz(l.to_symplectic(), zero.clone());
    let zl = |l: &PauliOperator| PauliOperator::from_xz(zero.clone(), swap_halves(&l.to_symplectic()));
    let mut logical_x: Vec<PauliOperator> = c.logical_x.iter().map(xl).collect();
    logical_x.extend(c.logical_z.iter().map(xl));
    let mut logical_z: Vec<PauliOperator> = c.logical_z.iter().map(zl).collect();
    logical_z.extend(c.logical_x.iter().map(zl));
    let code = CssCode {
        n: 2 * n,
        hx: BitMatrix::from_rows(2 * n, hx_rows),
        hz: BitMatrix::from_rows(2 * n, hz_rows),
        logical_x,
        logical_z,
    };
    (code, ZXDuality::half_shift(2 * n))
}

/// Concatenates the outer code `d` with `C4`, placing each duality orbit
/// in one block. Rows are stored as all `C4` checks first, then the
/// rewritten outer checks.
pub fn concatenate_c4(d: &CssCode, tau: &ZXDuality) -> Result<(CssCode, ConcatLayout), CodeError> {
    if tau.len() != d.n {
        return Err(CodeError::InvalidDuality(format!("length {} for {} qubits", tau.len(), d.n)));
    }
    ZXDuality::new(tau.perm().to_vec())?;
    let orbits = tau.orbits();
    let mut pair_map = vec![(0, 0); d.n];
    let mut blocks = Vec::with_capacity(orbits.len());
    for (b, &(i, j)) in orbits.iter().enumerate() {
        pair_map[i] = (b, 1);
        pair_map[j] = (b, 2);
        blocks.push([4 * b, 4 * b + 1, 4 * b + 2, 4 * b + 3]);
    }
    let layout = ConcatLayout { blocks, pair_map };
    let n = 4 * orbits.len();
    let c4_rows: Vec<BitVector> =
        (0..orbits.len()).map(|b| BitVector::from_indices(n, &[4 * b, 4 * b + 1, 4 * b + 2, 4 * b + 3])).collect();
    let mut hx = c4_rows.clone();
    hx.extend(d.hx.row_vecs().iter().map(|r| lift_support(r, &layout, &C4_X)));
    let mut hz = c4_rows;
    hz.extend(d.hz.row_vecs().iter().map(|r| lift_support(r, &layout, &C4_Z)));
    let code = CssCode {
        n,
        hx: BitMatrix::from_rows(n, hx),
        hz: BitMatrix::from_rows(n, hz),
        logical_x: d.logical_x.iter().map(|p| concat_pauli(p, &layout)).collect(),
        logical_z: d.logical_z.iter().map(|p| concat_pauli(p, &layout)).collect(),
    };
    Ok((code, layout))
}

/// `hadamard_transform` on a CSS code viewed as a stabilizer code.
pub fn hadamard_transform(d: &CssCode, pattern: &[bool]) -> Result<StabilizerCode, CodeError> {
    d.to_stabilizer().hadamard_transform(pattern)
}

/// Full construction chain for one seed.
#[derive(Clone, Debug)]
pub struct Csd {
    pub name: String,
    pub seed: StabilizerCode,
    pub double: CssCode,
    pub tau: ZXDuality,
    pub code: CssCode,
    pub layout: ConcatLayout,
}

impl Csd {
    pub fn from_seed(name: &str) -> Result<Self, CodeError> {
        let seed = seed_library(name)?;
        Self::from_code(name, seed)
    }

    pub fn from_code(name: &str, seed: StabilizerCode) -> Result<Self, CodeError> {
        let seed = compute_logicals(&seed)?;
        let (double, tau) = symplectic_double(&seed);
        let (code, layout) = concatenate_c4(&double, &tau)?;
        Ok(Self { name: name.to_string(), seed, double, tau, code, layout })
    }

    /// Number of `C4` blocks.
    #[must_use]
    pub fn num_blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    /// Indices into `hx`/`hz` of the concatenated (outer) generators.
    #[must_use]
    pub fn outer_rows(&self) -> std::ops::Range<usize> {
        self.num_blocks()..self.code.hx.rows()
    }

    /// Largest weight among the concatenated generators.
    #[must_use]
    pub fn q_max(&self) -> usize {
        q_max(&self.code, &self.layout)
    }
}

/// Largest weight among the rows after the per-block `C4` rows.
#[must_use]
pub fn q_max(code: &CssCode, layout: &ConcatLayout) -> usize {
    code.hx.row_vecs()[layout.num_blocks()..].iter().map(BitVector::weight).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub k: usize,
    pub check_weights: Vec<usize>,
    pub self_dual: Option<bool>,
    pub violations: Vec<String>,
}

/// Checks every code invariant and collects violations.
#[must_use]
pub fn validate(code: &StabilizerCode) -> ValidationReport {
    let rows = code.stabilizer_rows();
    let (lx, lz) = code.logical_rows();
    let mut violations = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != 2 * code.n {
            violations.push(format!("check {i} has length {} for {} qubits", r.len() / 2, code.n));
            return ValidationReport {
                n: code.n,
                k: lx.len(),
                check_weights: Vec::new(),
                self_dual: None,
                violations,
            };
        }
    }
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if symplectic_form(&rows[i], &rows[j]) {
                violations.push(format!("checks {i},{j} anticommute"));
            }
        }
    }
    if lx.len() != lz.len() {
        violations.push(format!("{} X logicals but {} Z logicals", lx.len(), lz.len()));
    }
    for (name, ls) in [("X", &lx), ("Z", &lz)] {
        for (i, l) in ls.iter().enumerate() {
            for (j, r) in rows.iter().enumerate() {
                if symplectic_form(l, r) {
                    violations.push(format!("logical {name}{i} anticommutes with check {j}"));
                }
            }
        }
    }
    let k = lx.len().min(lz.len());
    for i in 0..k {
        for j in 0..k {
            if symplectic_form(&lx[i], &lz[j]) != (i == j) {
                violations.push(format!("logical pairing X{i}/Z{j} is wrong"));
            }
            if i < j && symplectic_form(&lx[i], &lx[j]) {
                violations.push(format!("logicals X{i},X{j} anticommute"));
            }
            if i < j && symplectic_form(&lz[i], &lz[j]) {
                violations.push(format!("logicals Z{i},Z{j} anticommute"));
            }
        }
    }
    let rank = BitMatrix::from_rows(2 * code.n, rows.clone()).rank();
    if code.n - rank != lx.len() {
        violations.push(format!("k = {} but n - rank = {}", lx.len(), code.n - rank));
    }
    let span = RowSpace::from_matrix(&BitMatrix::from_rows(2 * code.n, rows.clone()));
    for (i, l) in lx.iter().chain(&lz).enumerate() {
        if span.contains(l) {
            violations.push(format!("logical {i} lies in the stabilizer group"));
        }
    }
    ValidationReport {
        n: code.n,
        k: lx.len(),
        check_weights: code.checks.iter().map(PauliOperator::weight).collect(),
        self_dual: None,
        violations,
    }
}

/// [`validate`] plus the CSS orthogonality and self-duality checks.
#[must_use]
pub fn validate_css(code: &CssCode) -> ValidationReport {
    let mut report = validate(&code.to_stabilizer());
    let prod = code.hx.mul(&code.hz.transpose());
    for i in 0..prod.rows() {
        for j in prod.row(i).ones() {
            report.violations.push(format!("hx row {i} overlaps hz row {j} oddly"));
        }
    }
    report.self_dual = Some(code.is_self_dual());
    report
}

/// Plain-text code definition: `n m k`, `m` rows of `2n` bits, then
/// optional `LX`/`LZ` rows.
#[must_use]
pub fn to_text(code: &StabilizerCode) -> String {
    let mut s = format!("{} {} {}\n", code.n, code.checks.len(), code.k());
    for c in &code.checks {
        s.push_str(&c.to_symplectic().to_bitstring());
        s.push('\n');
    }
    for l in &code.logical_x {
        s.push_str(&format!("LX {}\n", l.to_symplectic().to_bitstring()));
    }
    for l in &code.logical_z {
        s.push_str(&format!("LZ {}\n", l.to_symplectic().to_bitstring()));
    }
    s
}

pub fn from_text(text: &str) -> Result<StabilizerCode, CodeError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| CodeError::Parse("empty input".into()))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| CodeError::Parse(format!("bad header {header:?}"))))
        .collect::<Result<_, _>>()?;
    let [n, m, k] = nums[..] else {
        return Err(CodeError::Parse(format!("bad header {header:?}")));
    };
    let parse_row = |s: &str| -> Result<BitVector, CodeError> {
        let v = BitVector::parse(s).map_err(|e| CodeError::Parse(e.to_string()))?;
        if v.len() != 2 * n {
            return Err(CodeError::Parse(format!("row {s:?} has {} bits, expected {}", v.len(), 2 * n)));
        }
        Ok(v)
    };
    let mut checks = Vec::with_capacity(m);
    for _ in 0..m {
        let row = lines.next().ok_or_else(|| CodeError::Parse("missing check rows".into()))?;
        checks.push(PauliOperator::from_symplectic(&parse_row(row)?));
    }
    let mut code = StabilizerCode::from_checks(n, checks);
    for line in lines {
        if let Some(r) = line.strip_prefix("LX") {
            code.logical_x.push(PauliOperator::from_symplectic(&parse_row(r)?));
        } else if let Some(r) = line.strip_prefix("LZ") {
            code.logical_z.push(PauliOperator::from_symplectic(&parse_row(r)?));
        } else {
            return Err(CodeError::Parse(format!("unexpected line {line:?}")));
        }
    }
    let code = compute_logicals(&code)?;
    if code.k() != k {
        return Err(CodeError::Parse(format!("header says k = {k}, checks give {}", code.k())));
    }
    Ok(code)
}

/// JSON form of a CSS code; rows and logicals as bitstrings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeJson {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub hx: Vec<String>,
    pub hz: Vec<String>,
    /// Logicals as `(x | z)` bitstrings of length `2n`.
    pub logical_x: Vec<String>,
    pub logical_z: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<ConcatLayout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<usize>,
}

impl CodeJson {
    #[must_use]
    pub fn from_css(name: &str, code: &CssCode, layout: Option<&ConcatLayout>) -> Self {
        Self {
            name: name.to_string(),
            n: code.n,
            k: code.k(),
            hx: code.hx.to_bitstrings(),
            hz: code.hz.to_bitstrings(),
            logical_x: code.logical_x.iter().map(|p| p.to_symplectic().to_bitstring()).collect(),
            logical_z: code.logical_z.iter().map(|p| p.to_symplectic().to_bitstring()).collect(),
            layout: layout.cloned(),
            q_max: layout.map(|l| q_max(code, l)),
        }
    }

    pub fn to_css(&self) -> Result<CssCode, CodeError> {
        let mat = |rows: &[String]| -> Result<BitMatrix, CodeError> {
            let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
            BitMatrix::parse(self.n, &refs).map_err(|e| CodeError::Parse(e.to_string()))
        };
        let paulis = |rows: &[String]| -> Result<Vec<PauliOperator>, CodeError> {
            rows.iter()
                .map(|r| {
                    BitVector::parse(r)
                        .map_err(|e| CodeError::Parse(e.to_string()))
                        .map(|v| PauliOperator::from_symplectic(&v))
                })
                .collect()
        };
        let hx = mat(&self.hx)?;
        let hz = mat(&self.hz)?;
        if self.logical_x.is_empty() && self.k > 0 {
            return Ok(CssCode::new(hx, hz));
        }
        Ok(CssCode { n: self.n, hx, hz, logical_x: paulis(&self.logical_x)?, logical_z: paulis(&self.logical_z)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rowspace(rows: &[BitVector]) -> Vec<BitVector> {
        let m = BitMatrix::from_rows(rows[0].len(), rows.to_vec());
        let r = m.rref();
        r.matrix.into_rows().into_iter().take(r.rank).collect()
    }

    #[test]
    fn c422_seed_and_logicals() {
        let c = seed_library("c422").unwrap();
        let s: Vec<String> = c.checks.iter().map(ToString::to_string).collect();
        assert_eq!(s, ["XZZX", "ZXXZ"]);
        let lx: Vec<String> = c.logical_x.iter().map(ToString::to_string).collect();
        let lz: Vec<String> = c.logical_z.iter().map(ToString::to_string).collect();
        assert_eq!(lx, ["IZZI", "ZIIZ"]);
        assert_eq!(lz, ["ZIXI", "IZIX"]);
        assert!(validate(&c).violations.is_empty());
    }

    #[test]
    fn seed_parameters() {
        for (name, n, k) in [("c422", 4, 2), ("c513", 5, 1), ("c833", 8, 3), ("c1244", 12, 4)] {
            let c = seed_library(name).unwrap();
            assert_eq!((c.n, c.k()), (n, k), "{name}");
            assert!(validate(&c).violations.is_empty(), "{name}");
        }
        assert_eq!(seed_library("c999"), Err(CodeError::UnknownSeed("c999".into())));
    }

    #[test]
    fn compute_logicals_cases() {
        // C4 with its declared logicals comes back unchanged.
        let p = |s: &str| PauliOperator::parse(s).unwrap();
        let c4 = StabilizerCode {
            n: 4,
            checks: vec![p("XXXX"), p("ZZZZ")],
            logical_x: vec![p("XXII"), p("XIXI")],
            logical_z: vec![p("ZIZI"), p("ZZII")],
        };
        assert_eq!(compute_logicals(&c4).unwrap(), c4);

        let full = StabilizerCode::from_checks(2, vec![p("XX"), p("ZZ")]);
        let out = compute_logicals(&full).unwrap();
        assert!(out.logical_x.is_empty() && out.logical_z.is_empty());

        let c513 = seed_library("c513").unwrap();
        assert_eq!(c513.k(), 1);
        assert!(!c513.logical_x[0].commutes_with(&c513.logical_z[0]));

        let bad = StabilizerCode::from_checks(1, vec![p("X"), p("Z")]);
        assert_eq!(compute_logicals(&bad), Err(CodeError::Anticommuting(0, 1)));
    }

    #[test]
    fn double_of_c422_matches_printed() {
        let c = seed_library("c422").unwrap();
        let (d, tau) = symplectic_double(&c);
        assert_eq!(d.hx.to_bitstrings(), ["10010110", "01101001"]);
        assert_eq!(d.hz.to_bitstrings(), ["01101001", "10010110"]);
        assert_eq!((d.n, d.k()), (8, 4));
        assert_eq!(tau.apply(1), 5);
        assert!(validate_css(&d).violations.is_empty());
    }

    #[test]
    fn double_of_c513_and_trivial() {
        let (d, _) = symplectic_double(&seed_library("c513").unwrap());
        assert_eq!((d.n, d.k()), (10, 2));
        assert!(validate_css(&d).violations.is_empty());

        let empty = compute_logicals(&StabilizerCode::from_checks(1, vec![])).unwrap();
        let (d, _) = symplectic_double(&empty);
        assert_eq!((d.n, d.k(), d.hx.rows(), d.hz.rows()), (2, 2, 0, 0));
    }

    #[test]
    fn csd_16_4_4_matches_printed() {
        let csd = Csd::from_seed("c422").unwrap();
        let expected = [
            "1111000000000000",
            "0000111100000000",
            "0000000011110000",
            "0000000000001111",
            "1100101010101100",
            "1010110011001010",
        ];
        assert_eq!(csd.code.hx.to_bitstrings(), expected);
        assert!(csd.code.is_self_dual());
        assert_eq!(csd.q_max(), 8);
        let r = validate_css(&csd.code);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert_eq!((r.n, r.k, r.self_dual), (16, 4, Some(true)));
    }

    #[test]
    fn table_parameters() {
        for (name, n, k, q) in [("c422", 16, 4, 8), ("c513", 20, 2, 8), ("c833", 32, 6, 16), ("c1244", 48, 8, 16)] {
            let csd = Csd::from_seed(name).unwrap();
            assert_eq!((csd.code.n, csd.code.k(), csd.q_max()), (n, k, q), "{name}");
            assert!(csd.code.is_self_dual());
            let r = validate_css(&csd.code);
            assert!(r.violations.is_empty(), "{name}: {:?}", r.violations);
        }
    }

    #[test]
    fn tau_swaps_sectors() {
        for name in SEED_NAMES {
            let csd = Csd::from_seed(name).unwrap();
            let d = &csd.double;
            let permuted: Vec<BitVector> = d.hx.row_vecs().iter().map(|r| r.permuted(csd.tau.perm())).collect();
            assert_eq!(rowspace(&permuted), rowspace(d.hz.row_vecs()), "{name}");
        }
    }

    #[test]
    fn c4_hadamard_gives_c422_structure() {
        let p = |s: &str| PauliOperator::parse(s).unwrap();
        let xx = BitMatrix::parse(4, &["1111"]).unwrap();
        let c4 = CssCode {
            n: 4,
            hx: xx.clone(),
            hz: xx,
            logical_x: vec![p("XXII"), p("XIXI")],
            logical_z: vec![p("ZIZI"), p("ZZII")],
        };
        assert_eq!(hadamard_transform(&c4, &[false; 4]).unwrap(), c4.to_stabilizer());
        let t = hadamard_transform(&c4, &[false, true, true, false]).unwrap();
        let seed = seed_library("c422").unwrap();
        assert_eq!(rowspace(&t.stabilizer_rows()), rowspace(&seed.stabilizer_rows()));
        assert!(hadamard_transform(&c4, &[true]).is_err());
    }

    #[test]
    fn hypercube_recursion_64_8() {
        let csd = Csd::from_seed("c422").unwrap();
        let pattern: Vec<bool> = (0..16).map(|q| matches!(q % 4, 1 | 2)).collect();
        let t = hadamard_transform(&csd.code, &pattern).unwrap();
        let next = Csd::from_code("c422x2", t).unwrap();
        assert_eq!((next.code.n, next.code.k()), (64, 8));
        assert!(next.q_max() <= 32);
        assert!(validate_css(&next.code).violations.is_empty());
    }

    #[test]
    fn validate_reports_anticommuting() {
        let p = |s: &str| PauliOperator::parse(s).unwrap();
        let bad = StabilizerCode::from_checks(2, vec![p("XI"), p("ZI")]);
        let r = validate(&bad);
        assert!(r.violations.contains(&"checks 0,1 anticommute".to_string()));
    }

    #[test]
    fn css_logicals_are_paired() {
        let csd = Csd::from_seed("c833").unwrap();
        let fresh = CssCode::new(csd.code.hx.clone(), csd.code.hz.clone());
        assert_eq!(fresh.k(), 6);
        assert!(validate_css(&fresh).violations.is_empty());
    }

    #[test]
    fn text_and_json_round_trip() {
        let seed = seed_library("c513").unwrap();
        let text = to_text(&seed);
        assert_eq!(from_text(&text).unwrap(), seed);
        let bare = "4 2 2\n10010110\n01101001\n";
        let c = from_text(bare).unwrap();
        assert_eq!(c.k(), 2);
        assert!(from_text("4 2 1\n10010110\n01101001\n").is_err());

        let csd = Csd::from_seed("c422").unwrap();
        let json = CodeJson::from_css("c422", &csd.code, Some(&csd.layout));
        let s = serde_json::to_string(&json).unwrap();
        let back: CodeJson = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_css().unwrap(), csd.code);
        assert_eq!(back.q_max, Some(8));
    }
}
