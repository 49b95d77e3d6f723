//! Dense GF(2) linear algebra on 64-bit words, binary symplectic forms and
//! Pauli arithmetic.
//!
//! Symplectic vectors always use the `(x | z)` layout: for `n` qubits the
//! first `n` bits are the X part and the last `n` bits the Z part.

use std::fmt;
use std::ops::BitXor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum F2Error {
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("no solution")]
    NoSolution,
    #[error("invalid character {0:?} in bit or Pauli string")]
    Parse(char),
    #[error("matrix is not square with even dimension ({0}x{1})")]
    NotEvenSquare(usize, usize),
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

/// Fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    #[must_use]
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    #[must_use]
    pub fn from_indices(len: usize, ones: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in ones {
            v.set(i, true);
        }
        v
    }

    #[must_use]
    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Parses a string over `{0,1}`; whitespace is ignored.
    pub fn parse(s: &str) -> Result<Self, F2Error> {
        let mut bits = Vec::new();
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() => {}
                c => return Err(F2Error::Parse(c)),
            }
        }
        Ok(Self::from_bools(&bits))
    }

    #[inline]
    #[must_use]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    #[must_use]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    #[must_use]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    #[must_use]
    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len, "length mismatch in and");
        Self {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    #[must_use]
    pub fn or(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len, "length mismatch in or");
        Self {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    /// Inner product over GF(2).
    #[inline]
    #[must_use]
    pub fn dot(&self, other: &Self) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot");
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() & 1 == 1
    }

    #[inline]
    #[must_use]
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit.
    #[must_use]
    pub fn first_one(&self) -> Option<usize> {
        for (k, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(k * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * 64 + t)
                }
            })
        })
    }

    #[must_use]
    pub fn concat(&self, other: &Self) -> Self {
        let mut v = Self::zeros(self.len + other.len);
        for i in self.ones() {
            v.set(i, true);
        }
        for i in other.ones() {
            v.set(self.len + i, true);
        }
        v
    }

    /// Bits `start..end` as a new vector.
    #[must_use]
    pub fn slice(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.len);
        let mut v = Self::zeros(end - start);
        for i in self.ones().filter(|&i| i >= start && i < end) {
            v.set(i - start, true);
        }
        v
    }

    /// `out[j] = self[perm[j]]`.
    #[must_use]
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len);
        let mut v = Self::zeros(self.len);
        for (j, &p) in perm.iter().enumerate() {
            if self.get(p) {
                v.set(j, true);
            }
        }
        v
    }

    #[must_use]
    pub fn to_bitstring(&self) -> String {
        (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({})", self.to_bitstring())
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl BitXor<&BitVector> for &BitVector {
    type Output = BitVector;
    fn bitxor(self, rhs: &BitVector) -> BitVector {
        let mut v = self.clone();
        v.xor_assign(rhs);
        v
    }
}

/// Result of row reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rref {
    pub matrix: BitMatrix,
    pub pivots: Vec<usize>,
    pub rank: usize,
}

/// Row-major dense GF(2) matrix.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVector>,
}

impl BitMatrix {
    #[must_use]
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![BitVector::zeros(cols); rows] }
    }

    #[must_use]
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows that must all have length `cols`.
    #[must_use]
    pub fn from_rows(cols: usize, rows: Vec<BitVector>) -> Self {
        for r in &rows {
            assert_eq!(r.len(), cols, "row length mismatch");
        }
        Self { rows: rows.len(), cols, data: rows }
    }

    pub fn parse(cols: usize, rows: &[&str]) -> Result<Self, F2Error> {
        let mut data = Vec::with_capacity(rows.len());
        for r in rows {
            let v = BitVector::parse(r)?;
            if v.len() != cols {
                return Err(F2Error::SizeMismatch(v.len(), cols));
            }
            data.push(v);
        }
        Ok(Self::from_rows(cols, data))
    }

    #[inline]
    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    #[must_use]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    #[must_use]
    pub fn row(&self, i: usize) -> &BitVector {
        &self.data[i]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut BitVector {
        &mut self.data[i]
    }

    #[must_use]
    pub fn row_vecs(&self) -> &[BitVector] {
        &self.data
    }

    #[must_use]
    pub fn into_rows(self) -> Vec<BitVector> {
        self.data
    }

    #[inline]
    #[must_use]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r].get(c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.data[r].set(c, value);
    }

    pub fn push_row(&mut self, row: BitVector) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.push(row);
        self.rows += 1;
    }

    #[must_use]
    pub fn column(&self, c: usize) -> BitVector {
        let mut v = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            if self.get(r, c) {
                v.set(r, true);
            }
        }
        v
    }

    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(BitVector::is_zero)
    }

    #[must_use]
    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for (r, row) in self.data.iter().enumerate() {
            for c in row.ones() {
                t.set(c, r, true);
            }
        }
        t
    }

    /// Matrix product `self * other`.
    #[must_use]
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for (r, row) in self.data.iter().enumerate() {
            let acc = &mut out.data[r];
            for k in row.ones() {
                acc.xor_assign(&other.data[k]);
            }
        }
        out
    }

    /// `self * v` for a column vector `v` of length `cols`.
    #[must_use]
    pub fn mul_vec(&self, v: &BitVector) -> BitVector {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let mut out = BitVector::zeros(self.rows);
        for (r, row) in self.data.iter().enumerate() {
            if row.dot(v) {
                out.set(r, true);
            }
        }
        out
    }

    /// `v * self` for a row vector `v` of length `rows`.
    #[must_use]
    pub fn vec_mul(&self, v: &BitVector) -> BitVector {
        assert_eq!(v.len(), self.rows, "vector length mismatch");
        let mut out = BitVector::zeros(self.cols);
        for r in v.ones() {
            out.xor_assign(&self.data[r]);
        }
        out
    }

    #[must_use]
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.concat(b)).collect();
        Self { rows: self.rows, cols: self.cols + other.cols, data }
    }

    #[must_use]
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Self { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// `out[:, j] = self[:, perm[j]]`.
    #[must_use]
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let data = self.data.iter().map(|r| r.permuted(perm)).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    #[must_use]
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let data = self
            .data
            .iter()
            .map(|r| {
                let mut v = BitVector::zeros(cols.len());
                for (j, &c) in cols.iter().enumerate() {
                    if r.get(c) {
                        v.set(j, true);
                    }
                }
                v
            })
            .collect();
        Self { rows: self.rows, cols: cols.len(), data }
    }

    /// Reduced row echelon form, with zero rows kept at the bottom.
    #[must_use]
    pub fn rref(&self) -> Rref {
        let mut m = self.clone();
        let pivots = eliminate(&mut m.data, m.cols, None);
        Rref { rank: pivots.len(), matrix: m, pivots }
    }

    #[must_use]
    pub fn rank(&self) -> usize {
        self.rref().rank
    }

    /// Basis of the right null space `{v : M v = 0}` as rows.
    #[must_use]
    pub fn kernel(&self) -> Self {
        let Rref { matrix, pivots, .. } = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let mut basis = Vec::new();
        for f in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = BitVector::zeros(self.cols);
            v.set(f, true);
            for (i, &p) in pivots.iter().enumerate() {
                if matrix.get(i, f) {
                    v.set(p, true);
                }
            }
            basis.push(v);
        }
        Self::from_rows(self.cols, basis)
    }

    /// Some `x` with `M x = b`.
    pub fn solve(&self, b: &BitVector) -> Result<BitVector, F2Error> {
        if b.len() != self.rows {
            return Err(F2Error::SizeMismatch(b.len(), self.rows));
        }
        let mut m = self.clone();
        let mut rhs = b.clone();
        let pivots = eliminate(&mut m.data, m.cols, Some(&mut rhs));
        if (pivots.len()..self.rows).any(|r| rhs.get(r)) {
            return Err(F2Error::NoSolution);
        }
        let mut x = BitVector::zeros(self.cols);
        for (i, &p) in pivots.iter().enumerate() {
            if rhs.get(i) {
                x.set(p, true);
            }
        }
        Ok(x)
    }

    /// Inverse of a square matrix, if it exists.
    #[must_use]
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let aug = self.hstack(&Self::identity(n));
        let r = aug.rref();
        if r.pivots.len() < n || r.pivots[n - 1] != n - 1 {
            return None;
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        let mut inv = r.matrix.select_columns(&cols);
        inv.data.truncate(n);
        inv.rows = n;
        Some(inv)
    }

    #[must_use]
    pub fn to_bitstrings(&self) -> Vec<String> {
        self.data.iter().map(BitVector::to_bitstring).collect()
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows, self.cols)?;
        for r in &self.data {
            writeln!(f, "  {r}")?;
        }
        write!(f, "]")
    }
}

/// Gauss-Jordan elimination in place. Returns the pivot columns; row `i`
/// of the result has its pivot at `pivots[i]`. Row operations are mirrored
/// onto `rhs` when given.
fn eliminate(rows: &mut [BitVector], cols: usize, mut rhs: Option<&mut BitVector>) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| rows[i].get(c)) else {
            continue;
        };
        rows.swap(r, p);
        if let Some(b) = rhs.as_deref_mut() {
            let (x, y) = (b.get(r), b.get(p));
            b.set(r, y);
            b.set(p, x);
        }
        let (head, tail) = rows.split_at_mut(r);
        let (pivot_row, rest) = tail.split_first_mut().expect("pivot row");
        for (i, row) in head.iter_mut().chain(rest.iter_mut()).enumerate() {
            if row.get(c) {
                row.xor_assign(pivot_row);
                if let Some(b) = rhs.as_deref_mut() {
                    let target = if i < r { i } else { i + 1 };
                    if b.get(r) {
                        b.flip(target);
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Incrementally maintained fully reduced basis for span membership tests.
#[derive(Clone, Debug, Default)]
pub struct RowSpace {
    len: usize,
    basis: Vec<(usize, BitVector)>,
}

impl RowSpace {
    #[must_use]
    pub fn new(len: usize) -> Self {
        Self { len, basis: Vec::new() }
    }

    #[must_use]
    pub fn from_matrix(m: &BitMatrix) -> Self {
        let mut s = Self::new(m.cols());
        for r in m.row_vecs() {
            s.insert(r.clone());
        }
        s
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    #[must_use]
    pub fn reduce(&self, v: &BitVector) -> BitVector {
        let mut v = v.clone();
        for (p, row) in &self.basis {
            if v.get(*p) {
                v.xor_assign(row);
            }
        }
        v
    }

    #[must_use]
    pub fn contains(&self, v: &BitVector) -> bool {
        self.reduce(v).is_zero()
    }

    /// Adds `v`; returns false when it was already in the span.
    pub fn insert(&mut self, v: BitVector) -> bool {
        assert_eq!(v.len(), self.len);
        let v = self.reduce(&v);
        let Some(p) = v.first_one() else {
            return false;
        };
        for (_, row) in &mut self.basis {
            if row.get(p) {
                row.xor_assign(&v);
            }
        }
        self.basis.push((p, v));
        true
    }

    pub fn vectors(&self) -> impl Iterator<Item = &BitVector> {
        self.basis.iter().map(|(_, v)| v)
    }
}

/// Symplectic form of two `(x | z)` vectors of length `2n`.
#[must_use]
pub fn symplectic_form(a: &BitVector, b: &BitVector) -> bool {
    assert_eq!(a.len(), b.len());
    assert!(a.len().is_multiple_of(2));
    let n = a.len() / 2;
    let mut acc = false;
    for i in a.ones() {
        let j = if i < n { i + n } else { i - n };
        acc ^= b.get(j);
    }
    acc
}

/// Swaps the X and Z halves of a `(x | z)` vector.
#[must_use]
pub fn swap_halves(v: &BitVector) -> BitVector {
    let n = v.len() / 2;
    v.slice(n, 2 * n).concat(&v.slice(0, n))
}

/// Pauli operator `i^phase * prod_j X_j^{x_j} Z_j^{z_j}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    pub x: BitVector,
    pub z: BitVector,
    phase: u8,
}

impl PauliOperator {
    #[must_use]
    pub fn identity(n: usize) -> Self {
        Self { x: BitVector::zeros(n), z: BitVector::zeros(n), phase: 0 }
    }

    /// Hermitian Pauli with `+` sign (every `Y` counted as `iXZ`).
    #[must_use]
    pub fn from_xz(x: BitVector, z: BitVector) -> Self {
        assert_eq!(x.len(), z.len());
        let phase = (x.and(&z).weight() % 4) as u8;
        Self { x, z, phase }
    }

    #[must_use]
    pub fn from_symplectic(v: &BitVector) -> Self {
        let n = v.len() / 2;
        Self::from_xz(v.slice(0, n), v.slice(n, 2 * n))
    }

    /// Single-qubit Pauli `kind` in {'X','Y','Z'} on qubit `q`.
    #[must_use]
    pub fn single(n: usize, q: usize, kind: char) -> Self {
        let mut x = BitVector::zeros(n);
        let mut z = BitVector::zeros(n);
        match kind {
            'X' => x.set(q, true),
            'Z' => z.set(q, true),
            'Y' => {
                x.set(q, true);
                z.set(q, true);
            }
            _ => {}
        }
        Self::from_xz(x, z)
    }

    /// Parses strings such as `XZZX`, `-iYZ`, `+IXI`.
    pub fn parse(s: &str) -> Result<Self, F2Error> {
        let s = s.trim();
        let (mut sign, body) = if let Some(r) = s.strip_prefix("+i") {
            (1u8, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else {
            (0, s)
        };
        let n = body.chars().count();
        let mut x = BitVector::zeros(n);
        let mut z = BitVector::zeros(n);
        for (i, c) in body.chars().enumerate() {
            match c {
                'I' | '_' => {}
                'X' => x.set(i, true),
                'Z' => z.set(i, true),
                'Y' => {
                    x.set(i, true);
                    z.set(i, true);
                    sign += 1;
                }
                c => return Err(F2Error::Parse(c)),
            }
        }
        Ok(Self { x, z, phase: sign % 4 })
    }

    #[inline]
    #[must_use]
    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Power of `i` in the `X^x Z^z` representation.
    #[must_use]
    pub fn phase(&self) -> u8 {
        self.phase
    }

    /// Overall sign as a power of `i` relative to the Hermitian I/X/Y/Z string.
    #[must_use]
    pub fn sign_power(&self) -> u8 {
        ((4 + self.phase as usize - self.x.and(&self.z).weight() % 4) % 4) as u8
    }

    pub fn set_sign_power(&mut self, s: u8) {
        self.phase = ((s as usize + self.x.and(&self.z).weight()) % 4) as u8;
    }

    #[must_use]
    pub fn weight(&self) -> usize {
        self.x.or(&self.z).weight()
    }

    #[must_use]
    pub fn to_symplectic(&self) -> BitVector {
        self.x.concat(&self.z)
    }

    /// Operator product `self * other` with exact phase.
    #[must_use]
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n(), other.n(), "qubit count mismatch");
        let cross = u8::from(self.z.dot(&other.x));
        Self {
            x: &self.x ^ &other.x,
            z: &self.z ^ &other.z,
            phase: (self.phase + other.phase + 2 * cross) % 4,
        }
    }

    #[must_use]
    pub fn commutes_with(&self, other: &Self) -> bool {
        !(self.x.dot(&other.z) ^ self.z.dot(&other.x))
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "+i", "-", "-i"][self.sign_power() as usize];
        f.write_str(prefix)?;
        for i in 0..self.n() {
            let c = match (self.x.get(i), self.z.get(i)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pauli({self})")
    }
}

/// `p.x . q.z + p.z . q.x` mod 2; 1 iff the operators anticommute.
pub fn symplectic_product(p: &PauliOperator, q: &PauliOperator) -> Result<bool, F2Error> {
    if p.n() != q.n() {
        return Err(F2Error::SizeMismatch(p.n(), q.n()));
    }
    Ok(!p.commutes_with(q))
}

/// The standard form `[[0, I], [I, 0]]` on `2t` coordinates.
#[must_use]
pub fn lambda(t: usize) -> BitMatrix {
    let mut m = BitMatrix::zeros(2 * t, 2 * t);
    for i in 0..t {
        m.set(i, i + t, true);
        m.set(i + t, i, true);
    }
    m
}

/// `2t x 2t` matrix acting on column vectors `(x | z)`; column `j` is the
/// image of basis vector `j`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymplecticMatrix {
    m: BitMatrix,
}

impl SymplecticMatrix {
    pub fn new(m: BitMatrix) -> Result<Self, F2Error> {
        if m.rows() != m.cols() || !m.rows().is_multiple_of(2) {
            return Err(F2Error::NotEvenSquare(m.rows(), m.cols()));
        }
        Ok(Self { m })
    }

    #[must_use]
    pub fn identity(t: usize) -> Self {
        Self { m: BitMatrix::identity(2 * t) }
    }

    /// Transvection `v -> v + <v, u> u`.
    #[must_use]
    pub fn transvection(u: &BitVector) -> Self {
        let d = u.len();
        let lu = swap_halves(u);
        let mut m = BitMatrix::identity(d);
        for r in u.ones() {
            m.row_mut(r).xor_assign(&lu);
        }
        Self { m }
    }

    #[must_use]
    pub fn t(&self) -> usize {
        self.m.rows() / 2
    }

    #[must_use]
    pub fn matrix(&self) -> &BitMatrix {
        &self.m
    }

    #[must_use]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.m.get(r, c)
    }

    /// Composition `self * other` (apply `other` first).
    #[must_use]
    pub fn mul(&self, other: &Self) -> Self {
        Self { m: self.m.mul(&other.m) }
    }

    #[must_use]
    pub fn apply(&self, v: &BitVector) -> BitVector {
        self.m.mul_vec(v)
    }

    /// Inverse via `Lambda M^T Lambda`, valid for symplectic matrices.
    #[must_use]
    pub fn inverse(&self) -> Self {
        let l = lambda(self.t());
        Self { m: l.mul(&self.m.transpose()).mul(&l) }
    }

    #[must_use]
    pub fn is_identity(&self) -> bool {
        self.m == BitMatrix::identity(self.m.rows())
    }

    /// Compact key: row words concatenated.
    #[must_use]
    pub fn key(&self) -> Vec<u64> {
        self.m.row_vecs().iter().flat_map(|r| r.words().iter().copied()).collect()
    }

    /// Upper-left, upper-right, lower-left, lower-right `t x t` blocks.
    #[must_use]
    pub fn blocks(&self) -> [BitMatrix; 4] {
        let t = self.t();
        let top: Vec<usize> = (0..t).collect();
        let bottom: Vec<usize> = (t..2 * t).collect();
        let sub = |rows: &[usize], cols: &[usize]| {
            let mut out = BitMatrix::zeros(rows.len(), cols.len());
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    out.set(i, j, self.m.get(r, c));
                }
            }
            out
        };
        [sub(&top, &top), sub(&top, &bottom), sub(&bottom, &top), sub(&bottom, &bottom)]
    }

    #[must_use]
    pub fn from_blocks(a: &BitMatrix, b: &BitMatrix, c: &BitMatrix, d: &BitMatrix) -> Self {
        let m = a.hstack(b).vstack(&c.hstack(d));
        Self { m }
    }
}

impl fmt::Debug for SymplecticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symplectic{:?}", self.m)
    }
}

/// True iff `M^T Lambda M = Lambda`.
#[must_use]
pub fn is_symplectic(m: &SymplecticMatrix) -> bool {
    let l = lambda(m.t());
    m.m.transpose().mul(&l).mul(&m.m) == l
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(s: &str) -> BitVector {
        BitVector::parse(s).unwrap()
    }

    #[test]
    fn rref_identity() {
        let r = BitMatrix::identity(3).rref();
        assert_eq!(r.matrix, BitMatrix::identity(3));
        assert_eq!(r.pivots, vec![0, 1, 2]);
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn rref_842_x_block() {
        let m = BitMatrix::parse(8, &["10010110", "01101001"]).unwrap();
        let r = m.rref();
        assert_eq!(r.rank, 2);
        assert_eq!(r.pivots, vec![0, 1]);
        // Already reduced: pivots in columns 0 and 1 with disjoint supports.
        assert_eq!(r.matrix, m);
    }

    #[test]
    fn rref_zero() {
        let r = BitMatrix::zeros(2, 4).rref();
        assert!(r.matrix.is_zero());
        assert_eq!(r.rank, 0);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(BitMatrix::identity(5).kernel().rows(), 0);
        let k = BitMatrix::parse(2, &["11"]).unwrap().kernel();
        assert_eq!(k.rows(), 1);
        assert_eq!(k.row(0), &bv("11"));

        let c4 = BitMatrix::parse(4, &["1111"]).unwrap();
        let k = c4.kernel();
        assert_eq!(k.rows(), 3);
        // Brute-force oracle: the kernel is exactly the even-weight vectors.
        let span = RowSpace::from_matrix(&k);
        for v in 0u32..16 {
            let bits: Vec<bool> = (0..4).map(|i| (v >> i) & 1 == 1).collect();
            let x = BitVector::from_bools(&bits);
            assert_eq!(span.contains(&x), v.count_ones() % 2 == 0);
        }
        assert!(span.contains(&bv("1100")));
    }

    #[test]
    fn solve_examples() {
        let b = bv("101");
        assert_eq!(BitMatrix::identity(3).solve(&b).unwrap(), b);
        let m = BitMatrix::parse(2, &["11"]).unwrap();
        let x = m.solve(&bv("1")).unwrap();
        assert!(x == bv("10") || x == bv("01"));
        assert_eq!(BitMatrix::zeros(1, 2).solve(&bv("1")), Err(F2Error::NoSolution));
    }

    #[test]
    fn pauli_products() {
        let x0 = PauliOperator::parse("X").unwrap();
        let z0 = PauliOperator::parse("Z").unwrap();
        assert!(symplectic_product(&x0, &z0).unwrap());
        let xxii = PauliOperator::parse("XXII").unwrap();
        let zizi = PauliOperator::parse("ZIZI").unwrap();
        let zzii = PauliOperator::parse("ZZII").unwrap();
        assert!(symplectic_product(&xxii, &zizi).unwrap());
        assert!(!symplectic_product(&xxii, &zzii).unwrap());
        assert!(symplectic_product(&xxii, &x0).is_err());

        // XZ = -iY, ZX = iY.
        let xz = x0.mul(&z0);
        assert_eq!(xz.to_string(), "-iY");
        assert_eq!(z0.mul(&x0).to_string(), "+iY");
        let y = PauliOperator::parse("Y").unwrap();
        assert_eq!(y.mul(&y).to_string(), "I");
        assert_eq!(PauliOperator::parse("-XYZ").unwrap().to_string(), "-XYZ");
    }

    #[test]
    fn symplectic_examples() {
        assert!(is_symplectic(&SymplecticMatrix::identity(3)));
        // Block CNOT between two logical registers of size k: x2 += x1, z1 += z2.
        let k = 2;
        let i = BitMatrix::identity(k);
        let z = BitMatrix::zeros(k, k);
        let upper = BitMatrix::identity(k).hstack(&z).vstack(&i.hstack(&i));
        let lower_inv_t = i.hstack(&i).vstack(&z.hstack(&i));
        let zero = BitMatrix::zeros(2 * k, 2 * k);
        let cnot = SymplecticMatrix::from_blocks(&upper, &zero, &zero, &lower_inv_t);
        assert!(is_symplectic(&cnot));

        let mut bad = BitMatrix::identity(4);
        bad.set(0, 1, true);
        assert!(!is_symplectic(&SymplecticMatrix::new(bad).unwrap()));
    }

    #[test]
    fn inverse_matches() {
        let m = BitMatrix::parse(3, &["110", "011", "001"]).unwrap();
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), BitMatrix::identity(3));
        assert!(BitMatrix::parse(2, &["11", "11"]).unwrap().inverse().is_none());
    }

    fn arb_bits(len: usize) -> impl Strategy<Value = BitVector> {
        proptest::collection::vec(any::<bool>(), len).prop_map(|b| BitVector::from_bools(&b))
    }

    fn arb_matrix() -> impl Strategy<Value = BitMatrix> {
        (1usize..12, 1usize..80).prop_flat_map(|(r, c)| {
            proptest::collection::vec(arb_bits(c), r).prop_map(move |rows| BitMatrix::from_rows(c, rows))
        })
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliOperator> {
        (arb_bits(n), arb_bits(n), 0u8..4).prop_map(|(x, z, s)| {
            let mut p = PauliOperator::from_xz(x, z);
            p.set_sign_power(s);
            p
        })
    }

    proptest! {
        #[test]
        fn rref_idempotent(m in arb_matrix()) {
            let r = m.rref();
            let rr = r.matrix.rref();
            prop_assert_eq!(&rr.matrix, &r.matrix);
            prop_assert_eq!(rr.rank, r.rank);
            prop_assert!(r.rank <= m.rows().min(m.cols()));
            for (i, &p) in r.pivots.iter().enumerate() {
                prop_assert_eq!(r.matrix.column(p), BitVector::from_indices(m.rows(), &[i]));
            }
        }

        #[test]
        fn kernel_annihilates(m in arb_matrix()) {
            let k = m.kernel();
            prop_assert_eq!(k.rows(), m.cols() - m.rank());
            for v in k.row_vecs() {
                prop_assert!(m.mul_vec(v).is_zero());
            }
            prop_assert_eq!(k.rank(), k.rows());
        }

        #[test]
        fn solve_consistent(m in arb_matrix(), seed in any::<u64>()) {
            // b in the column space by construction.
            let x0 = BitVector::from_bools(&(0..m.cols()).map(|i| (seed >> (i % 64)) & 1 == 1).collect::<Vec<_>>());
            let b = m.mul_vec(&x0);
            let x = m.solve(&b).unwrap();
            prop_assert_eq!(m.mul_vec(&x), b);
        }

        #[test]
        fn symplectic_product_bilinear(p in arb_pauli(9), q in arb_pauli(9), r in arb_pauli(9)) {
            let pq = p.mul(&q);
            let lhs = symplectic_product(&pq, &r).unwrap();
            let rhs = symplectic_product(&p, &r).unwrap() ^ symplectic_product(&q, &r).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(symplectic_product(&p, &q).unwrap(), symplectic_form(&p.to_symplectic(), &q.to_symplectic()));
        }

        #[test]
        fn pauli_phase_rule(p in arb_pauli(6), q in arb_pauli(6)) {
            // pq = (-1)^{sp(p,q)} qp, and Hermitian squares are +I.
            let pq = p.mul(&q);
            let qp = q.mul(&p);
            let anti = symplectic_product(&p, &q).unwrap();
            prop_assert_eq!((pq.phase() + if anti { 2 } else { 0 }) % 4, qp.phase());
            let h = PauliOperator::from_xz(p.x.clone(), p.z.clone());
            prop_assert_eq!(h.mul(&h), PauliOperator::identity(6));
            prop_assert_eq!(p.weight(), (0..6).filter(|&i| p.x.get(i) || p.z.get(i)).count());
        }

        #[test]
        fn transvection_products_symplectic(us in proptest::collection::vec(arb_bits(8), 1..8)) {
            let mut acc = SymplecticMatrix::identity(4);
            for u in &us {
                let t = SymplecticMatrix::transvection(u);
                prop_assert!(is_symplectic(&t));
                acc = t.mul(&acc);
            }
            prop_assert!(is_symplectic(&acc));
            let inv = acc.inverse();
            prop_assert!(is_symplectic(&inv));
            prop_assert!(acc.mul(&inv).is_identity());
        }
    }
}
