//! Minimum-distance estimation by random information sets.
//!
//! Each trial permutes the columns of a kernel basis at random, row-reduces,
//! and inspects every reduced row: rows outside the stabilizer row space are
//! logical operators, and the lightest one seen is kept. The result is an
//! upper bound that tightens with more trials.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codeforge::CssCode;
use crate::f2core::{BitMatrix, BitVector, PauliOperator, RowSpace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceEstimate {
    pub d: usize,
    pub dx: usize,
    pub dz: usize,
    /// A logical operator of weight `d`.
    pub witness: PauliOperator,
}

/// Independent stream per trial so results do not depend on thread count.
pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Lightest vector of `ker(checks_other) \ row(checks_same)` over the trials,
/// with the trial index where it was first seen.
fn sector_min(
    checks_other: &BitMatrix,
    checks_same: &BitMatrix,
    trials: usize,
    seed: u64,
    stream_offset: u64,
) -> Option<(usize, usize, BitVector)> {
    let n = checks_other.cols();
    let kernel = checks_other.kernel();
    let stabs = RowSpace::from_matrix(checks_same);
    (0..trials)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = trial_rng(seed, stream_offset + t as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let reduced = kernel.permute_columns(&perm).rref();
            let mut inverse = vec![0; n];
            for (j, &p) in perm.iter().enumerate() {
                inverse[p] = j;
            }
            reduced.matrix.row_vecs()[..reduced.rank]
                .iter()
                .map(|row| row.permuted(&inverse))
                .filter(|v| !stabs.contains(v))
                .map(|v| (v.weight(), t, v))
                .min_by(|a, b| (a.0, &a.2).cmp(&(b.0, &b.2)))
        })
        .min_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)))
}

/// Estimates the distance of a CSS code with `trials` information sets per
/// sector. Deterministic for a fixed `seed`.
///
/// Panics if `trials == 0`.
#[must_use]
pub fn estimate_distance(code: &CssCode, trials: usize, seed: u64) -> DistanceEstimate {
    assert!(trials >= 1, "need at least one trial");
    let n = code.n;
    if code.k() == 0 {
        return DistanceEstimate { d: usize::MAX, dx: usize::MAX, dz: usize::MAX, witness: PauliOperator::identity(n) };
    }
    let x = sector_min(&code.hz, &code.hx, trials, seed, 0);
    let z = sector_min(&code.hx, &code.hz, trials, seed, 1 << 32);
    let (dx, xv) = x.map_or((usize::MAX, None), |(w, _, v)| (w, Some(v)));
    let (dz, zv) = z.map_or((usize::MAX, None), |(w, _, v)| (w, Some(v)));
    let zero = BitVector::zeros(n);
    let witness = if dx <= dz {
        PauliOperator::from_xz(xv.expect("X logical"), zero)
    } else {
        PauliOperator::from_xz(zero, zv.expect("Z logical"))
    };
    DistanceEstimate { d: dx.min(dz), dx, dz, witness }
}
