//! Word-basis truncation of the free-product space and compressed operators.

use super::{FactorSpec, FreeContext, LazyVec, Letter, LetterOp, NcPoly, Word};
use crate::sparse::{operator_norm, NormEstimate, NormSolver, SparseOp};
use crate::{C64, Error, Result};
use std::collections::HashMap;

/// Default ceiling on the number of basis words (≈ 150 bytes per word).
pub const DEFAULT_MAX_WORDS: usize = 8_000_000;

/// The compression of the free-product space to words of graded length ≤ L.
///
/// The basis enumeration is deterministic: length-major, then lexicographic
/// in the letter sequence ordered by (factor index, coordinate). Word 0 is
/// the distinguished vector ξ. Operators compressed to this basis are exact
/// on their domain (intermediate expansion is unbounded) and projected back,
/// so norms are genuine lower bounds, nondecreasing in L.
#[derive(Debug, Clone)]
pub struct TruncatedFreeRep {
    ctx: FreeContext,
    cutoff: usize,
    words: Vec<Word>,
    index: HashMap<Word, u32>,
}

impl TruncatedFreeRep {
    /// Build the truncation at graded length `cutoff`, refusing to allocate
    /// more than `max_words` basis words.
    pub fn build(ctx: FreeContext, cutoff: usize, max_words: usize) -> Result<Self> {
        let predicted = count_words(ctx.factors(), cutoff);
        if predicted > max_words as u128 {
            return Err(Error::Budget(format!(
                "basis would hold {predicted} words, budget is {max_words}"
            )));
        }
        let mut buckets: Vec<Vec<Word>> = vec![Vec::new(); cutoff + 1];
        buckets[0].push(Word::empty());
        let mut stack = Vec::new();
        enumerate(ctx.factors(), cutoff, &mut stack, 0, None, &mut buckets);
        let mut words = Vec::with_capacity(predicted as usize);
        for bucket in buckets {
            words.extend(bucket);
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            index.insert(w.clone(), i as u32);
        }
        Ok(TruncatedFreeRep { ctx, cutoff, words, index })
    }

    /// Build with the default word budget.
    pub fn build_default(ctx: FreeContext, cutoff: usize) -> Result<Self> {
        Self::build(ctx, cutoff, DEFAULT_MAX_WORDS)
    }

    pub fn context(&self) -> &FreeContext {
        &self.ctx
    }

    pub fn factors(&self) -> &[FactorSpec] {
        self.ctx.factors()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn basis_size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn word_index(&self, w: &Word) -> Option<u32> {
        self.index.get(w).copied()
    }

    /// Project a finitely supported vector onto the basis, dropping
    /// out-of-truncation words.
    pub fn project(&self, v: &LazyVec) -> Vec<(u32, C64)> {
        let mut out = Vec::with_capacity(v.len());
        for (w, &c) in v {
            if let Some(i) = self.index.get(w) {
                out.push((*i, c));
            }
        }
        out
    }

    /// Q_L λ_factor(op) Q_L as a sparse matrix over the word basis: the
    /// exact action of a single factor letter, compressed.
    pub fn factor_operator(&self, factor: usize, op: &LetterOp) -> Result<SparseOp> {
        let n = self.words.len();
        let mut columns = Vec::with_capacity(n);
        for w in &self.words {
            let mut v = LazyVec::new();
            v.insert(w.clone(), C64::new(1.0, 0.0));
            let image = self.ctx.apply_letter(factor, op, &v, None)?;
            columns.push(self.project(&image));
        }
        Ok(SparseOp::from_columns(n, columns))
    }

    /// Q_L λ(P) Q_L: the polynomial is evaluated exactly on each basis word
    /// (intermediate words may exceed the cutoff) and then compressed.
    pub fn compressed_op(&self, p: &NcPoly) -> Result<SparseOp> {
        self.ctx.check_poly(p)?;
        let n = self.words.len();
        let mut columns = Vec::with_capacity(n);
        for w in &self.words {
            let mut v = LazyVec::new();
            v.insert(w.clone(), C64::new(1.0, 0.0));
            let image = self.ctx.apply_poly(p, &v, None)?;
            columns.push(self.project(&image));
        }
        Ok(SparseOp::from_columns(n, columns))
    }

    /// ‖Q_L λ(P) Q_L‖ via the Krylov extremal-singular-value solver. A
    /// degenerate cutoff L = 0 compresses every operator to the scalar
    /// τ(P); this is well defined, not an error.
    pub fn compressed_norm(&self, p: &NcPoly, solver: &NormSolver) -> Result<NormEstimate> {
        let op = self.compressed_op(p)?;
        Ok(operator_norm(&op, solver))
    }
}

/// Number of alternating words of graded length ≤ cutoff (including ξ).
pub fn count_words(factors: &[FactorSpec], cutoff: usize) -> u128 {
    // per factor: how many letters of each graded length
    let hist: Vec<Vec<(usize, u128)>> = factors
        .iter()
        .map(|f| {
            let mut h: Vec<(usize, u128)> = Vec::new();
            for (_, wt) in f.letters() {
                match h.iter_mut().find(|(w, _)| *w == wt) {
                    Some((_, c)) => *c += 1,
                    None => h.push((wt, 1)),
                }
            }
            h
        })
        .collect();
    let nf = factors.len();
    // exact[len][f] = words of exact graded length `len` whose last letter
    // belongs to factor f
    let mut exact = vec![vec![0u128; nf]; cutoff + 1];
    for (f, h) in hist.iter().enumerate() {
        for &(wt, mult) in h {
            if wt <= cutoff {
                exact[wt][f] = exact[wt][f].saturating_add(mult);
            }
        }
    }
    for len in 1..=cutoff {
        for last in 0..nf {
            let sources = exact[len][last];
            if sources == 0 {
                continue;
            }
            for (next, h) in hist.iter().enumerate() {
                if next == last {
                    continue;
                }
                for &(wt, mult) in h {
                    if len + wt <= cutoff {
                        exact[len + wt][next] = exact[len + wt][next]
                            .saturating_add(sources.saturating_mul(mult));
                    }
                }
            }
        }
    }
    let mut total: u128 = 1; // ξ
    for row in exact.iter().skip(1) {
        total = total.saturating_add(row.iter().sum::<u128>());
    }
    total
}

fn enumerate(
    factors: &[FactorSpec],
    cutoff: usize,
    stack: &mut Vec<Letter>,
    used: usize,
    last: Option<u8>,
    buckets: &mut Vec<Vec<Word>>,
) {
    for (fi, f) in factors.iter().enumerate() {
        if Some(fi as u8) == last {
            continue;
        }
        for (coord, wt) in f.letters() {
            if used + wt > cutoff {
                continue;
            }
            stack.push(Letter { factor: fi as u8, coord });
            buckets[used + wt].push(Word(stack.as_slice().into()));
            enumerate(factors, cutoff, stack, used + wt, Some(fi as u8), buckets);
            stack.pop();
        }
    }
}

/// Maximal distance ‖λ_A(handle) − λ_B(handle)‖ over the given handles,
/// for two truncations sharing factor shapes (hence identical word bases).
/// This realizes the approximate-containment comparison on one space, the
/// case where only factor traces differ.
pub fn free_rep_distance(
    rep_a: &TruncatedFreeRep,
    rep_b: &TruncatedFreeRep,
    handles: &[(usize, LetterOp)],
    solver: &NormSolver,
) -> Result<f64> {
    if rep_a.cutoff != rep_b.cutoff
        || rep_a.factors().len() != rep_b.factors().len()
        || rep_a
            .factors()
            .iter()
            .zip(rep_b.factors())
            .any(|(f, g)| !f.same_shape(g))
    {
        return Err(Error::ShapeMismatch(
            "representations have different word bases".into(),
        ));
    }
    debug_assert_eq!(rep_a.words, rep_b.words);
    let mut max = 0.0f64;
    for (factor, op) in handles {
        let a = rep_a.factor_operator(*factor, op)?;
        let b = rep_b.factor_operator(*factor, op)?;
        let diff = a.sub(&b);
        if diff.nnz() == 0 {
            continue;
        }
        let est = operator_norm(&diff, solver);
        max = max.max(est.value);
    }
    Ok(max)
}
