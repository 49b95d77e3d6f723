//! BP+OSD decoding over detector error models, with the block-aware prior
//! update and heavy-error postselection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2core::BitVector;
use crate::noisesim::DetectorErrorModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("syndrome has length {0}, expected {1}")]
    SyndromeLength(usize, usize),
    #[error("syndrome is not in the column space of the check matrix")]
    Inconsistent,
    #[error("prior {0} outside (0, 0.5]")]
    BadPrior(f64),
}

/// Sparse check matrix (detectors × mechanisms) with priors and the
/// observable matrix.
#[derive(Clone, Debug)]
pub struct DecodingProblem {
    pub num_detectors: usize,
    pub num_observables: usize,
    /// Detectors flipped by each mechanism.
    pub columns: Vec<Vec<usize>>,
    /// Mechanisms touching each detector.
    pub rows: Vec<Vec<usize>>,
    /// Observables flipped by each mechanism.
    pub observables: Vec<Vec<usize>>,
    pub priors: Vec<f64>,
    /// `C4` block of each mechanism, from the block tags of its detectors.
    pub blocks: Vec<Vec<usize>>,
    /// Block tag of each detector.
    pub detector_blocks: Vec<Option<usize>>,
}

impl DecodingProblem {
    pub fn new(
        num_detectors: usize,
        num_observables: usize,
        columns: Vec<Vec<usize>>,
        observables: Vec<Vec<usize>>,
        priors: Vec<f64>,
    ) -> Result<Self, DecodeError> {
        assert_eq!(columns.len(), priors.len());
        assert_eq!(columns.len(), observables.len());
        if let Some(&p) = priors.iter().find(|&&p| !(p > 0.0 && p <= 0.5)) {
            return Err(DecodeError::BadPrior(p));
        }
        let mut rows = vec![Vec::new(); num_detectors];
        for (j, col) in columns.iter().enumerate() {
            for &d in col {
                rows[d].push(j);
            }
        }
        let blocks = vec![Vec::new(); columns.len()];
        Ok(Self {
            num_detectors,
            num_observables,
            columns,
            rows,
            observables,
            priors,
            blocks,
            detector_blocks: vec![None; num_detectors],
        })
    }

    pub fn from_dem(dem: &DetectorErrorModel) -> Result<Self, DecodeError> {
        let mut p = Self::new(
            dem.num_detectors,
            dem.num_observables,
            dem.mechanisms.iter().map(|m| m.detectors.clone()).collect(),
            dem.mechanisms.iter().map(|m| m.observables.clone()).collect(),
            dem.mechanisms.iter().map(|m| m.p).collect(),
        )?;
        p.detector_blocks = dem.detector_info.iter().map(|d| d.block).collect();
        p.blocks = p
            .columns
            .iter()
            .map(|col| col.iter().filter_map(|&d| p.detector_blocks[d]).collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        Ok(p)
    }

    #[must_use]
    pub fn num_mechanisms(&self) -> usize {
        self.columns.len()
    }

    #[must_use]
    pub fn syndrome_of(&self, mechanisms: &[usize]) -> BitVector {
        let mut s = BitVector::zeros(self.num_detectors);
        for &j in mechanisms {
            for &d in &self.columns[j] {
                s.flip(d);
            }
        }
        s
    }

    #[must_use]
    pub fn observables_of(&self, mechanisms: &[usize]) -> BitVector {
        let mut o = BitVector::zeros(self.num_observables);
        for &j in mechanisms {
            for &l in &self.observables[j] {
                o.flip(l);
            }
        }
        o
    }

    /// `Σ log((1-p)/p)` over `mechanisms`: minus the log-likelihood ratio
    /// of the pattern against no error.
    #[must_use]
    pub fn weight(&self, mechanisms: &[usize]) -> f64 {
        weight_of(&self.priors, mechanisms)
    }
}

fn weight_of(priors: &[f64], mechanisms: &[usize]) -> f64 {
    mechanisms.iter().map(|&j| llr(priors[j])).sum()
}

fn llr(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

// ---------------------------------------------------------------------------
// Belief propagation

#[derive(Clone, Debug)]
pub struct BpResult {
    /// Posterior log-likelihood ratios (negative means "flipped").
    pub posteriors: Vec<f64>,
    pub hard: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

pub const MIN_SUM_SCALE: f64 = 0.625;

/// Min-sum BP with a serial (layered) schedule over checks.
pub fn bp(problem: &DecodingProblem, priors: &[f64], syndrome: &BitVector, max_iters: usize) -> Result<BpResult, DecodeError> {
    if syndrome.len() != problem.num_detectors {
        return Err(DecodeError::SyndromeLength(syndrome.len(), problem.num_detectors));
    }
    let m = problem.num_mechanisms();
    let mut q: Vec<f64> = priors.iter().map(|&p| llr(p)).collect();
    let hard_of = |q: &[f64]| (0..m).filter(|&j| q[j] < 0.0).collect::<Vec<_>>();
    let mut hard = hard_of(&q);
    if problem.syndrome_of(&hard) == *syndrome {
        return Ok(BpResult { posteriors: q, hard, converged: true, iterations: 0 });
    }
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(problem.rows.iter().scan(0, |acc, r| {
            *acc += r.len();
            Some(*acc)
        }))
        .collect();
    let mut msgs = vec![0.0f64; *offsets.last().unwrap_or(&0)];
    let mut t = Vec::new();
    for it in 1..=max_iters {
        for (c, row) in problem.rows.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let base = offsets[c];
            t.clear();
            t.extend(row.iter().enumerate().map(|(e, &j)| q[j] - msgs[base + e]));
            let mut sign = syndrome.get(c);
            let (mut min1, mut min2, mut argmin) = (f64::INFINITY, f64::INFINITY, usize::MAX);
            for (e, &v) in t.iter().enumerate() {
                sign ^= v < 0.0;
                let a = v.abs();
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    argmin = e;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for (e, &j) in row.iter().enumerate() {
                let mag = if e == argmin { min2 } else { min1 };
                let s = sign ^ (t[e] < 0.0);
                let r = MIN_SUM_SCALE * if s { -mag } else { mag };
                let r = if r.is_finite() { r } else { 0.0 };
                msgs[base + e] = r;
                q[j] = t[e] + r;
            }
        }
        hard = hard_of(&q);
        if problem.syndrome_of(&hard) == *syndrome {
            return Ok(BpResult { posteriors: q, hard, converged: true, iterations: it });
        }
    }
    Ok(BpResult { posteriors: q, hard, converged: false, iterations: max_iters })
}

// ---------------------------------------------------------------------------
// Ordered statistics

/// `λ` for OSD: a fixed order or every non-pivot column (exact ML).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OsdOrder {
    Order(usize),
    Full,
}

/// OSD-E: pivots chosen greedily in order of decreasing error likelihood,
/// then all `2^λ` patterns on the `λ` least reliable non-pivot columns
/// scored by prior weight. Ties in reliability go to the lower index.
pub fn osd(
    problem: &DecodingProblem,
    priors: &[f64],
    syndrome: &BitVector,
    posteriors: &[f64],
    order: OsdOrder,
) -> Result<Vec<usize>, DecodeError> {
    if syndrome.len() != problem.num_detectors {
        return Err(DecodeError::SyndromeLength(syndrome.len(), problem.num_detectors));
    }
    let m = problem.num_mechanisms();
    let nd = problem.num_detectors;
    let mut cols: Vec<usize> = (0..m).collect();
    cols.sort_by(|&a, &b| posteriors[a].total_cmp(&posteriors[b]).then(a.cmp(&b)));
    // Row-reduce rows restricted to the support of the syndrome and the
    // permuted columns; the syndrome rides along as an extra column.
    let words = (m + 1).div_ceil(64);
    let mut mat = vec![0u64; nd * words];
    for (pos, &j) in cols.iter().enumerate() {
        for &d in &problem.columns[j] {
            mat[d * words + pos / 64] ^= 1 << (pos % 64);
        }
    }
    for d in syndrome.ones() {
        mat[d * words + m / 64] ^= 1 << (m % 64);
    }
    let bit = |mat: &[u64], r: usize, c: usize| (mat[r * words + c / 64] >> (c % 64)) & 1 == 1;
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for c in 0..m {
        if rank == nd {
            break;
        }
        let Some(p) = (rank..nd).find(|&r| bit(&mat, r, c)) else { continue };
        if p != rank {
            for w in 0..words {
                mat.swap(p * words + w, rank * words + w);
            }
        }
        for r in 0..nd {
            if r != rank && bit(&mat, r, c) {
                for w in 0..words {
                    let v = mat[rank * words + w];
                    mat[r * words + w] ^= v;
                }
            }
        }
        pivots.push(c);
        rank += 1;
    }
    if (rank..nd).any(|r| bit(&mat, r, m)) {
        return Err(DecodeError::Inconsistent);
    }
    let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
    let free: Vec<usize> = (0..m).filter(|c| !pivot_set.contains(c)).collect();
    let lambda = match order {
        OsdOrder::Order(l) => l.min(free.len()),
        OsdOrder::Full => free.len(),
    };
    assert!(lambda < 40, "exhaustive OSD order too large");
    let search: &[usize] = &free[..lambda];
    let w: Vec<f64> = cols.iter().map(|&j| llr(priors[j])).collect();
    let pivot_weights: Vec<f64> = pivots.iter().map(|&c| w[c]).collect();
    // Pivot values as bit masks over rows, for the base solution and each
    // searched column.
    let pack = |col: usize| -> Vec<u64> {
        let mut v = vec![0u64; rank.div_ceil(64).max(1)];
        for r in 0..rank {
            if bit(&mat, r, col) {
                v[r / 64] |= 1 << (r % 64);
            }
        }
        v
    };
    let base = pack(m);
    let search_cols: Vec<Vec<u64>> = search.iter().map(|&c| pack(c)).collect();
    let score = |v: &[u64]| -> f64 {
        let mut s = 0.0;
        for (i, word) in v.iter().enumerate() {
            let mut x = *word;
            while x != 0 {
                let b = x.trailing_zeros() as usize;
                s += pivot_weights[i * 64 + b];
                x &= x - 1;
            }
        }
        s
    };
    let mut cur = base.clone();
    let mut cur_free = 0.0;
    let mut best = (score(&cur), 0u64);
    // Gray-code walk over the searched columns.
    for k in 1u64..1 << lambda {
        let b = k.trailing_zeros() as usize;
        for (a, x) in cur.iter_mut().zip(&search_cols[b]) {
            *a ^= x;
        }
        let g = k ^ (k >> 1);
        cur_free += if g >> b & 1 == 1 { w[search[b]] } else { -w[search[b]] };
        let s = score(&cur) + cur_free;
        if s < best.0 - 1e-12 {
            best = (s, g);
        }
    }
    let (_, g) = best;
    let mut sol = base;
    let mut out: Vec<usize> = Vec::new();
    for (b, &c) in search.iter().enumerate() {
        if g >> b & 1 == 1 {
            for (a, x) in sol.iter_mut().zip(&search_cols[b]) {
                *a ^= x;
            }
            out.push(cols[c]);
        }
    }
    for (r, &c) in pivots.iter().enumerate() {
        if (sol[r / 64] >> (r % 64)) & 1 == 1 {
            out.push(cols[c]);
        }
    }
    out.sort_unstable();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Heuristics

/// Multiplies the priors of mechanisms touching `triggered` blocks by
/// `factor`, capped at 0.5.
#[must_use]
pub fn prior_update(problem: &DecodingProblem, triggered: &BTreeSet<usize>, factor: f64) -> Vec<f64> {
    problem
        .priors
        .iter()
        .zip(&problem.blocks)
        .map(|(&p, bs)| if bs.iter().any(|b| triggered.contains(b)) { (p * factor).min(0.5) } else { p })
        .collect()
}

/// Blocks with at least one fired block-tagged detector.
#[must_use]
pub fn triggered_blocks(problem: &DecodingProblem, syndrome: &BitVector) -> BTreeSet<usize> {
    syndrome.ones().filter_map(|d| problem.detector_blocks[d]).collect()
}

/// Discard when at least `⌊(d-1)/2⌋ + 1` blocks report a `-1` syndrome.
#[must_use]
pub fn heavy_postselect(triggered: usize, d: usize) -> bool {
    triggered > d.saturating_sub(1) / 2
}

// ---------------------------------------------------------------------------
// Full pipeline

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub max_iters: usize,
    pub osd_order: OsdOrder,
    /// Prior multiplier for mechanisms on triggered blocks.
    pub prior_factor: Option<f64>,
    /// Code distance for heavy-error postselection.
    pub heavy_distance: Option<usize>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { max_iters: 30, osd_order: OsdOrder::Order(10), prior_factor: None, heavy_distance: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub mechanisms: Vec<usize>,
    pub observables: BitVector,
    pub converged: bool,
    pub postselected: bool,
    /// False when OSD found the syndrome inconsistent; such shots count as
    /// failures.
    pub consistent: bool,
}

pub fn decode(problem: &DecodingProblem, syndrome: &BitVector, cfg: &DecoderConfig) -> Result<DecodeOutcome, DecodeError> {
    let triggered = triggered_blocks(problem, syndrome);
    let postselected = cfg.heavy_distance.is_some_and(|d| heavy_postselect(triggered.len(), d));
    let priors = match cfg.prior_factor {
        Some(f) if !triggered.is_empty() => prior_update(problem, &triggered, f),
        _ => problem.priors.clone(),
    };
    let r = bp(problem, &priors, syndrome, cfg.max_iters)?;
    let (mechanisms, consistent) = if r.converged {
        (r.hard, true)
    } else {
        match osd(problem, &priors, syndrome, &r.posteriors, cfg.osd_order) {
            Ok(m) => (m, true),
            Err(DecodeError::Inconsistent) => (Vec::new(), false),
            Err(e) => return Err(e),
        }
    };
    let observables = problem.observables_of(&mechanisms);
    Ok(DecodeOutcome { mechanisms, observables, converged: r.converged, postselected, consistent })
}
