//! Truncated reduced free products.
//!
//! Given factors (A_i, τ_i) with GNS data (H_i, ξ_i), the free-product
//! Hilbert space is
//!
//! ```text
//! H = ℂξ ⊕ ⊕_{n≥1} ⊕_{j_1≠j_2≠⋯≠j_n} H̊_{j_1} ⊗ ⋯ ⊗ H̊_{j_n},
//! ```
//!
//! indexed by alternating words over the reduced subspaces H̊_i. Each factor
//! acts by λ_i(x) = V_i(π_i(x) ⊗ I)V_i*; the vector state τ(x) = ⟨xξ, ξ⟩ is
//! the free-product trace.
//!
//! Two factor kinds are supported. A finite-dimensional factor contributes
//! the orthonormal reduced basis p_2, …, p_d of its GNS space, each letter of
//! length 1. A Haar-unitary factor contributes basis vectors ê_k = û^k of
//! ℓ²(ℤ), each letter ê_k of length |k|, windowed to −K ≤ k ≤ K+1 in the
//! truncated basis. Grading words by total letter length makes the
//! truncation at length L of a pure Haar product exactly the radius-L ball
//! of the free-group Cayley graph, so compressed norms increase to the
//! free-group values as L grows.
//!
//! Moment evaluation never truncates: a monomial of total length D applied
//! to ξ is supported on words of length ≤ D, so the vector state is exact up
//! to floating-point arithmetic.

mod checks;
mod rep;

pub use checks::{
    apply_poly_exact, evaluate_moment, evaluate_moment_capped, freeness_check, haar_check,
    Family, HaarReport,
};
pub use rep::{free_rep_distance, TruncatedFreeRep};

use crate::algebra::{eval_trace, trace_inner, AlgElement, FdAlgebra, TracialState};
use crate::gns::{canonical_basis, gram_schmidt, GnsBasis};
use crate::{C64, Error, Result};
use smallvec::SmallVec;
use std::collections::BTreeMap;

/// One free-product factor.
#[derive(Debug, Clone)]
pub enum FactorSpec {
    /// A finite-dimensional C*-algebra with a faithful tracial state;
    /// GNS space of dimension d, reduced subspace of dimension d − 1.
    FiniteDim { algebra: FdAlgebra, trace: TracialState },
    /// The factor C*_r(ℤ) generated by one Haar unitary, with basis window
    /// cutoff K ≥ 1.
    HaarUnitary { cutoff: usize },
}

impl FactorSpec {
    pub fn finite(algebra: FdAlgebra, trace: TracialState) -> Self {
        FactorSpec::FiniteDim { algebra, trace }
    }

    pub fn haar(cutoff: usize) -> Self {
        FactorSpec::HaarUnitary { cutoff }
    }

    /// Number of reduced-basis letters this factor contributes.
    pub fn reduced_dim(&self) -> usize {
        match self {
            FactorSpec::FiniteDim { algebra, .. } => algebra.dim() - 1,
            FactorSpec::HaarUnitary { cutoff } => 2 * cutoff + 1,
        }
    }

    /// Truncation letters as (coordinate, graded length), in coordinate
    /// order. Finite-dimensional coordinates index p_2, …, p_d and have
    /// length 1; Haar coordinates are the exponents k ≠ 0, −K ≤ k ≤ K+1,
    /// with length |k|.
    fn letters(&self) -> Vec<(i16, usize)> {
        match self {
            FactorSpec::FiniteDim { algebra, .. } => {
                (0..algebra.dim() as i16 - 1).map(|c| (c, 1usize)).collect()
            }
            FactorSpec::HaarUnitary { cutoff } => {
                let k = *cutoff as i16;
                (-k..=k + 1)
                    .filter(|&c| c != 0)
                    .map(|c| (c, c.unsigned_abs() as usize))
                    .collect()
            }
        }
    }

    fn same_shape(&self, other: &FactorSpec) -> bool {
        match (self, other) {
            (FactorSpec::FiniteDim { algebra: a, .. }, FactorSpec::FiniteDim { algebra: b, .. }) => {
                a.block_sizes() == b.block_sizes()
            }
            (FactorSpec::HaarUnitary { cutoff: a }, FactorSpec::HaarUnitary { cutoff: b }) => a == b,
            _ => false,
        }
    }
}

/// A letter of a word: factor index plus a reduced-basis coordinate.
///
/// Finite-dimensional factors use coordinates 0, …, d−2 (meaning
/// p_{coord+2}); Haar factors use the nonzero exponent k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub factor: u8,
    pub coord: i16,
}

/// An alternating word: adjacent letters come from distinct factors. The
/// empty word denotes the distinguished vector ξ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub SmallVec<[Letter; 8]>);

impl Word {
    pub fn empty() -> Self {
        Word(SmallVec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    fn head(&self) -> Option<Letter> {
        self.0.first().copied()
    }

    fn tail(&self) -> Word {
        Word(self.0[1..].into())
    }

    fn prepend(&self, l: Letter) -> Word {
        let mut v = SmallVec::with_capacity(self.0.len() + 1);
        v.push(l);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// Total graded length within the given factor family.
    pub fn graded_len(&self, factors: &[FactorSpec]) -> usize {
        self.0
            .iter()
            .map(|l| match &factors[l.factor as usize] {
                FactorSpec::FiniteDim { .. } => 1,
                FactorSpec::HaarUnitary { .. } => l.coord.unsigned_abs() as usize,
            })
            .sum()
    }
}

/// Finitely supported vector in the free-product space, keyed by word.
/// Deterministically ordered so floating-point accumulation does not depend
/// on hashing.
pub type LazyVec = BTreeMap<Word, C64>;

fn lazy_add(v: &mut LazyVec, w: Word, c: C64) {
    if c.norm_sqr() == 0.0 {
        return;
    }
    use std::collections::btree_map::Entry;
    match v.entry(w) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            // exact cancellations are common for group-like letters
            if e.get().norm_sqr() == 0.0 {
                e.remove();
            }
        }
    }
}

/// One noncommutative letter of a polynomial: either an element of a
/// finite-dimensional factor or an integer power of a Haar generator.
#[derive(Debug, Clone, PartialEq)]
pub enum LetterOp {
    Elem(AlgElement),
    Power(i64),
}

impl LetterOp {
    pub fn adjoint(&self) -> LetterOp {
        match self {
            LetterOp::Elem(x) => LetterOp::Elem(x.adjoint()),
            LetterOp::Power(m) => LetterOp::Power(-m),
        }
    }

    /// Graded length contributed by this letter.
    fn graded_len(&self) -> usize {
        match self {
            LetterOp::Elem(_) => 1,
            LetterOp::Power(m) => m.unsigned_abs() as usize,
        }
    }
}

/// A letter bound to its factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyLetter {
    pub factor: usize,
    pub op: LetterOp,
}

/// A noncommutative *-polynomial over the declared factors: a formal sum of
/// coefficient–monomial pairs, a monomial being a sequence of letters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NcPoly {
    terms: Vec<(C64, Vec<PolyLetter>)>,
}

impl NcPoly {
    pub fn zero() -> Self {
        NcPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        NcPoly::scalar(C64::new(1.0, 0.0))
    }

    pub fn scalar(c: C64) -> Self {
        NcPoly { terms: vec![(c, Vec::new())] }.normalized()
    }

    /// The element x of a finite-dimensional factor.
    pub fn element(factor: usize, x: AlgElement) -> Self {
        NcPoly {
            terms: vec![(
                C64::new(1.0, 0.0),
                vec![PolyLetter { factor, op: LetterOp::Elem(x) }],
            )],
        }
    }

    /// u^m for the Haar generator of a factor.
    pub fn haar_power(factor: usize, m: i64) -> Self {
        NcPoly {
            terms: vec![(
                C64::new(1.0, 0.0),
                vec![PolyLetter { factor, op: LetterOp::Power(m) }],
            )],
        }
        .normalized()
    }

    /// u for the Haar generator of a factor.
    pub fn haar(factor: usize) -> Self {
        NcPoly::haar_power(factor, 1)
    }

    pub fn terms(&self) -> &[(C64, Vec<PolyLetter>)] {
        &self.terms
    }

    pub fn add(&self, other: &NcPoly) -> NcPoly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        NcPoly { terms }.normalized()
    }

    pub fn sub(&self, other: &NcPoly) -> NcPoly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> NcPoly {
        NcPoly {
            terms: self.terms.iter().map(|(a, m)| (a * c, m.clone())).collect(),
        }
        .normalized()
    }

    pub fn mul(&self, other: &NcPoly) -> NcPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, m1) in &self.terms {
            for (b, m2) in &other.terms {
                let mut m = m1.clone();
                m.extend(m2.iter().cloned());
                terms.push((a * b, m));
            }
        }
        NcPoly { terms }.normalized()
    }

    pub fn pow(&self, e: usize) -> NcPoly {
        let mut acc = NcPoly::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Adjoint: reverse each monomial, adjoint each letter, conjugate each
    /// coefficient.
    pub fn adjoint(&self) -> NcPoly {
        NcPoly {
            terms: self
                .terms
                .iter()
                .map(|(c, m)| {
                    (
                        c.conj(),
                        m.iter()
                            .rev()
                            .map(|l| PolyLetter { factor: l.factor, op: l.op.adjoint() })
                            .collect(),
                    )
                })
                .collect(),
        }
        .normalized()
    }

    /// Degree: maximal monomial letter count.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, m)| m.len()).max().unwrap_or(0)
    }

    /// Maximal graded length over monomials; bounds the word lengths a
    /// monomial applied to ξ can reach.
    pub fn len_budget(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, m)| m.iter().map(|l| l.op.graded_len()).sum::<usize>())
            .max()
            .unwrap_or(0)
    }

    /// Largest factor index referenced, if any.
    pub fn max_factor(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|(_, m)| m.iter().map(|l| l.factor))
            .max()
    }

    /// Merge adjacent Haar powers of the same factor, drop zero powers,
    /// and consolidate identical monomials.
    fn normalized(mut self) -> NcPoly {
        for (_, m) in &mut self.terms {
            let mut out: Vec<PolyLetter> = Vec::with_capacity(m.len());
            for l in m.drain(..) {
                if let LetterOp::Power(0) = l.op {
                    continue;
                }
                match (out.last_mut(), &l.op) {
                    (Some(PolyLetter { factor, op: LetterOp::Power(a) }), LetterOp::Power(b))
                        if *factor == l.factor =>
                    {
                        *a += b;
                        if *a == 0 {
                            out.pop();
                        }
                    }
                    _ => out.push(l),
                }
            }
            *m = out;
        }
        // consolidate identical monomials
        let mut merged: Vec<(C64, Vec<PolyLetter>)> = Vec::with_capacity(self.terms.len());
        'outer: for (c, m) in self.terms {
            for (c0, m0) in merged.iter_mut() {
                if *m0 == m {
                    *c0 += c;
                    continue 'outer;
                }
            }
            merged.push((c, m));
        }
        merged.retain(|(c, _)| c.norm_sqr() != 0.0);
        NcPoly { terms: merged }
    }
}

/// Precomputed data for a family of factors: per finite-dimensional factor,
/// the orthonormal GNS basis p_1 = 1, p_2, …, p_d over the canonical algebra
/// basis.
#[derive(Debug, Clone)]
pub struct FreeContext {
    factors: Vec<FactorSpec>,
    fin: Vec<Option<GnsBasis>>,
}

impl FreeContext {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Invalid("need at least one factor".into()));
        }
        if factors.len() > u8::MAX as usize {
            return Err(Error::Invalid("too many factors".into()));
        }
        for f in &factors {
            if let FactorSpec::HaarUnitary { cutoff } = f {
                if *cutoff == 0 {
                    return Err(Error::Invalid("Haar cutoff must be at least 1".into()));
                }
            }
        }
        let fin = factors
            .iter()
            .map(|f| match f {
                FactorSpec::FiniteDim { algebra, trace } => {
                    gram_schmidt(&canonical_basis(algebra), trace).map(Some)
                }
                FactorSpec::HaarUnitary { .. } => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FreeContext { factors, fin })
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// GNS basis of a finite-dimensional factor.
    pub fn gns_basis(&self, factor: usize) -> Option<&GnsBasis> {
        self.fin.get(factor).and_then(|b| b.as_ref())
    }

    /// Trace of a letter operator in its own factor: τ_i(x) or δ_{m,0}.
    pub fn letter_trace(&self, factor: usize, op: &LetterOp) -> Result<C64> {
        match (op, &self.factors[factor]) {
            (LetterOp::Elem(x), FactorSpec::FiniteDim { trace, .. }) => eval_trace(trace, x),
            (LetterOp::Power(m), FactorSpec::HaarUnitary { .. }) => {
                Ok(C64::new(if *m == 0 { 1.0 } else { 0.0 }, 0.0))
            }
            _ => Err(Error::ShapeMismatch(format!(
                "letter operator does not match factor {factor}"
            ))),
        }
    }

    fn check_letter(&self, factor: usize, op: &LetterOp) -> Result<()> {
        if factor >= self.factors.len() {
            return Err(Error::Invalid(format!("factor index {factor} out of range")));
        }
        match (op, &self.factors[factor]) {
            (LetterOp::Elem(x), FactorSpec::FiniteDim { algebra, .. }) => {
                if x.algebra() != algebra {
                    return Err(Error::ShapeMismatch(format!(
                        "element does not belong to factor {factor}"
                    )));
                }
                Ok(())
            }
            (LetterOp::Power(_), FactorSpec::HaarUnitary { .. }) => Ok(()),
            (LetterOp::Elem(_), _) => Err(Error::ShapeMismatch(format!(
                "factor {factor} is a Haar factor, element handle invalid"
            ))),
            (LetterOp::Power(_), _) => Err(Error::ShapeMismatch(format!(
                "factor {factor} is finite-dimensional, power handle invalid"
            ))),
        }
    }

    pub(crate) fn check_poly(&self, p: &NcPoly) -> Result<()> {
        for (_, m) in p.terms() {
            for l in m {
                self.check_letter(l.factor, &l.op)?;
            }
        }
        Ok(())
    }

    /// Decompose an algebra element of a finite factor in its GNS basis:
    /// returns (⟨y, p_1⟩, [(coord, ⟨y, p_{coord+2}⟩), …]) keeping only
    /// nonzero reduced components.
    fn decompose(&self, factor: usize, y: &AlgElement) -> Result<(C64, Vec<(i16, C64)>)> {
        let basis = self.fin[factor]
            .as_ref()
            .expect("decompose called on a Haar factor");
        let trace = basis.trace();
        let scalar = trace_inner(trace, y, &basis.elements()[0])?;
        let mut comps = Vec::new();
        for (j, p) in basis.elements().iter().enumerate().skip(1) {
            let c = trace_inner(trace, y, p)?;
            if c.norm_sqr() != 0.0 {
                comps.push(((j - 1) as i16, c));
            }
        }
        Ok((scalar, comps))
    }

    /// Exact action of one letter operator on a finitely supported vector:
    /// λ_factor(op) applied with no truncation.
    pub(crate) fn apply_letter(
        &self,
        factor: usize,
        op: &LetterOp,
        v: &LazyVec,
        cap: Option<usize>,
    ) -> Result<LazyVec> {
        self.check_letter(factor, op)?;
        let f8 = factor as u8;
        let mut out = LazyVec::new();
        match op {
            LetterOp::Power(0) => return Ok(v.clone()),
            LetterOp::Power(m) => {
                for (w, &c) in v {
                    match w.head() {
                        Some(l) if l.factor == f8 => {
                            let k2 = l.coord as i64 + m;
                            if k2 == 0 {
                                lazy_add(&mut out, w.tail(), c);
                            } else {
                                let k2 = i16::try_from(k2).map_err(|_| {
                                    Error::Budget("Haar exponent overflow".into())
                                })?;
                                lazy_add(
                                    &mut out,
                                    w.tail().prepend(Letter { factor: f8, coord: k2 }),
                                    c,
                                );
                            }
                        }
                        _ => {
                            let k = i16::try_from(*m)
                                .map_err(|_| Error::Budget("Haar exponent overflow".into()))?;
                            lazy_add(&mut out, w.prepend(Letter { factor: f8, coord: k }), c);
                        }
                    }
                }
            }
            LetterOp::Elem(x) => {
                if is_identity(x) {
                    return Ok(v.clone());
                }
                let basis = self.fin[factor].as_ref().unwrap();
                for (w, &c) in v {
                    match w.head() {
                        Some(l) if l.factor == f8 => {
                            // x · (p̂_a ⊗ rest): decompose x p_a, the ξ_i
                            // component drops the letter
                            let pa = &basis.elements()[l.coord as usize + 1];
                            let y = x.mul(pa)?;
                            let (scalar, comps) = self.decompose(factor, &y)?;
                            let rest = w.tail();
                            lazy_add(&mut out, rest.clone(), c * scalar);
                            for (t, a) in comps {
                                lazy_add(
                                    &mut out,
                                    rest.prepend(Letter { factor: f8, coord: t }),
                                    c * a,
                                );
                            }
                        }
                        _ => {
                            // x · w = τ(x)·w + x̊ ⊗ w
                            let (scalar, comps) = self.decompose(factor, x)?;
                            lazy_add(&mut out, w.clone(), c * scalar);
                            for (t, a) in comps {
                                lazy_add(
                                    &mut out,
                                    w.prepend(Letter { factor: f8, coord: t }),
                                    c * a,
                                );
                            }
                        }
                    }
                }
            }
        }
        if let Some(max_len) = cap {
            for w in out.keys() {
                if w.graded_len(&self.factors) > max_len {
                    return Err(Error::Budget(format!(
                        "intermediate word exceeds workspace depth {max_len}"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Apply a whole polynomial: Σ coeff · λ(monomial), letters applied
    /// right to left.
    pub(crate) fn apply_poly(&self, p: &NcPoly, v: &LazyVec, cap: Option<usize>) -> Result<LazyVec> {
        let mut acc = LazyVec::new();
        for (coeff, monomial) in p.terms() {
            let mut cur = v.clone();
            for l in monomial.iter().rev() {
                cur = self.apply_letter(l.factor, &l.op, &cur, cap)?;
            }
            for (w, c) in cur {
                lazy_add(&mut acc, w, c * coeff);
            }
        }
        Ok(acc)
    }
}

fn is_identity(x: &AlgElement) -> bool {
    x.blocks().iter().all(|b| {
        let n = b.nrows();
        (0..n).all(|i| (0..n).all(|j| {
            let v = b[(i, j)];
            if i == j {
                v == C64::new(1.0, 0.0)
            } else {
                v == C64::new(0.0, 0.0)
            }
        }))
    })
}
