//! Finite-dimensional C*-algebras as direct sums of matrix blocks.
//!
//! An algebra `M_{n_1} ⊕ ⋯ ⊕ M_{n_r}` is described by its block sizes; an
//! element is one dense complex matrix per block. A faithful tracial state is
//! a weight vector (α_1, …, α_r) with α_i > 0 and Σ α_i = 1, acting as
//! `τ(x) = Σ α_i · tr(x_i)/n_i`. When every α_i is a fraction p_i/q over a
//! common denominator the rational form is kept alongside the floats, which
//! is what trace-preserving matrix embeddings consume.

use crate::{C64, CMatrix, Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Shape of a finite-dimensional C*-algebra: an ordered list of block sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FdAlgebra {
    block_sizes: Vec<usize>,
}

impl FdAlgebra {
    /// Algebra `M_{n_1} ⊕ ⋯ ⊕ M_{n_r}` with the given block sizes.
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::Invalid("algebra needs at least one block".into()));
        }
        if block_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Invalid("block sizes must be positive".into()));
        }
        Ok(FdAlgebra { block_sizes })
    }

    /// The scalars ℂ.
    pub fn scalars() -> Self {
        FdAlgebra { block_sizes: vec![1] }
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    /// Complex dimension d = Σ n_i².
    pub fn dim(&self) -> usize {
        self.block_sizes.iter().map(|n| n * n).sum()
    }

    /// The identity element.
    pub fn unit(&self) -> AlgElement {
        AlgElement {
            algebra: self.clone(),
            blocks: self
                .block_sizes
                .iter()
                .map(|&n| CMatrix::identity(n, n))
                .collect(),
        }
    }

    /// The zero element.
    pub fn zero(&self) -> AlgElement {
        AlgElement {
            algebra: self.clone(),
            blocks: self
                .block_sizes
                .iter()
                .map(|&n| CMatrix::zeros(n, n))
                .collect(),
        }
    }

    /// Matrix unit e_{jk} of one block (all other blocks zero).
    pub fn matrix_unit(&self, block: usize, row: usize, col: usize) -> Result<AlgElement> {
        let n = *self
            .block_sizes
            .get(block)
            .ok_or_else(|| Error::Invalid(format!("block index {block} out of range")))?;
        if row >= n || col >= n {
            return Err(Error::Invalid(format!(
                "matrix unit ({row},{col}) out of range for block of size {n}"
            )));
        }
        let mut e = self.zero();
        e.blocks[block][(row, col)] = C64::new(1.0, 0.0);
        Ok(e)
    }

    /// Build an element from per-block matrices.
    pub fn element(&self, blocks: Vec<CMatrix>) -> Result<AlgElement> {
        if blocks.len() != self.block_sizes.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                self.block_sizes.len(),
                blocks.len()
            )));
        }
        for (i, (b, &n)) in blocks.iter().zip(&self.block_sizes).enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} is {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(AlgElement { algebra: self.clone(), blocks })
    }

    /// Element with the given diagonal entries, one scalar per coordinate of
    /// each block (blocks of size 1 take a single scalar).
    pub fn diagonal(&self, entries: &[C64]) -> Result<AlgElement> {
        let total: usize = self.block_sizes.iter().sum();
        if entries.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "expected {total} diagonal entries, got {}",
                entries.len()
            )));
        }
        let mut blocks = Vec::with_capacity(self.block_sizes.len());
        let mut off = 0;
        for &n in &self.block_sizes {
            let mut m = CMatrix::zeros(n, n);
            for j in 0..n {
                m[(j, j)] = entries[off + j];
            }
            off += n;
            blocks.push(m);
        }
        self.element(blocks)
    }
}

/// An element of an [`FdAlgebra`]: one dense matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    algebra: FdAlgebra,
    blocks: Vec<CMatrix>,
}

impl AlgElement {
    pub fn algebra(&self) -> &FdAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// Adjoint x ↦ x*.
    pub fn adjoint(&self) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    pub fn add(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check_same_algebra(other)?;
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &AlgElement) -> Result<AlgElement> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Product in the algebra (blockwise matrix product).
    pub fn mul(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check_same_algebra(other)?;
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// x − c·1.
    pub fn sub_scalar(&self, c: C64) -> AlgElement {
        let mut out = self.clone();
        for b in &mut out.blocks {
            let n = b.nrows();
            for j in 0..n {
                b[(j, j)] -= c;
            }
        }
        out
    }

    /// Largest singular value over the blocks; the C*-norm of the element.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                if b.nrows() == 1 {
                    b[(0, 0)].norm()
                } else {
                    b.clone().singular_values().max()
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.blocks
            .iter()
            .all(|b| b.iter().all(|c| c.norm() <= tol))
    }

    fn check_same_algebra(&self, other: &AlgElement) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(Error::ShapeMismatch(
                "elements belong to different algebras".into(),
            ));
        }
        Ok(())
    }
}

/// Exact rational weights p_i/q over a common denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalWeights {
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

/// A faithful tracial state `τ(x) = Σ α_i · tr(x_i)/n_i` with α_i > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TracialState {
    weights: Vec<f64>,
    rational: Option<RationalWeights>,
}

impl TracialState {
    /// Trace with the given block weights. Weights must be strictly positive
    /// (faithfulness) and sum to 1 within 1e−12; out-of-tolerance input is
    /// rejected rather than silently renormalized.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("trace needs at least one weight".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Invalid(
                "trace weights must be strictly positive (faithfulness)".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Invalid(format!(
                "trace weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"
            )));
        }
        Ok(TracialState { weights, rational: None })
    }

    /// Trace with weights p_i/q; the floating weights are derived from the
    /// fractions so the rational form is exact.
    pub fn from_rational(numerators: Vec<u64>, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::Invalid("zero denominator".into()));
        }
        if numerators.iter().any(|&p| p == 0) {
            return Err(Error::Invalid(
                "rational weights must be strictly positive (faithfulness)".into(),
            ));
        }
        let total: u64 = numerators.iter().sum();
        if total != denominator {
            return Err(Error::Invalid(format!(
                "rational weights sum to {total}/{denominator}, expected 1"
            )));
        }
        let weights = numerators
            .iter()
            .map(|&p| p as f64 / denominator as f64)
            .collect();
        Ok(TracialState {
            weights,
            rational: Some(RationalWeights { numerators, denominator }),
        })
    }

    /// The trace on ℂ.
    pub fn point() -> Self {
        TracialState {
            weights: vec![1.0],
            rational: Some(RationalWeights { numerators: vec![1], denominator: 1 }),
        }
    }

    /// Uniform weights 1/r over r blocks.
    pub fn uniform(r: usize) -> Result<Self> {
        Self::from_rational(vec![1; r], r as u64)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rational(&self) -> Option<&RationalWeights> {
        self.rational.as_ref()
    }

    pub fn num_blocks(&self) -> usize {
        self.weights.len()
    }

    fn check_algebra(&self, x: &FdAlgebra) -> Result<()> {
        if self.weights.len() != x.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "trace has {} weights but algebra has {} blocks",
                self.weights.len(),
                x.num_blocks()
            )));
        }
        Ok(())
    }
}

/// τ(x) = Σ α_i · tr(x_i)/n_i (normalized block traces).
pub fn eval_trace(trace: &TracialState, x: &AlgElement) -> Result<C64> {
    trace.check_algebra(x.algebra())?;
    let mut acc = C64::new(0.0, 0.0);
    for ((b, &n), &w) in x.blocks().iter().zip(x.algebra().block_sizes()).zip(trace.weights()) {
        let mut tr = C64::new(0.0, 0.0);
        for j in 0..n {
            tr += b[(j, j)];
        }
        acc += tr * (w / n as f64);
    }
    Ok(acc)
}

/// ⟨x, y⟩ = τ(y* x), the trace inner product.
pub fn trace_inner(trace: &TracialState, x: &AlgElement, y: &AlgElement) -> Result<C64> {
    eval_trace(trace, &y.adjoint().mul(x)?)
}

/// Minimal tensor product of two traced algebras.
///
/// Blocks refine pairwise to sizes n_i·m_j with weights α_i·β_j (i outer,
/// j inner); the product trace factorizes on elementary tensors:
/// τ(x ⊗ y) = τ_1(x)·τ_2(y).
pub fn tensor_min(
    a1: &FdAlgebra,
    t1: &TracialState,
    a2: &FdAlgebra,
    t2: &TracialState,
) -> Result<(FdAlgebra, TracialState)> {
    t1.check_algebra(a1)?;
    t2.check_algebra(a2)?;
    let mut sizes = Vec::with_capacity(a1.num_blocks() * a2.num_blocks());
    let mut weights = Vec::with_capacity(sizes.capacity());
    for (&n, &a) in a1.block_sizes().iter().zip(t1.weights()) {
        for (&m, &b) in a2.block_sizes().iter().zip(t2.weights()) {
            sizes.push(n * m);
            weights.push(a * b);
        }
    }
    let algebra = FdAlgebra::new(sizes)?;
    // Kronecker weights can drift off 1 by a few ulps; rescale the last one.
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Invalid(format!("tensor weights sum to {sum}")));
    }
    let rational = match (t1.rational(), t2.rational()) {
        (Some(r1), Some(r2)) => {
            let mut nums = Vec::with_capacity(weights.len());
            for &p in &r1.numerators {
                for &q in &r2.numerators {
                    nums.push(p * q);
                }
            }
            Some(RationalWeights {
                numerators: nums,
                denominator: r1.denominator * r2.denominator,
            })
        }
        _ => None,
    };
    let trace = match rational {
        Some(r) => TracialState::from_rational(r.numerators, r.denominator)?,
        None => TracialState::new(weights)?,
    };
    Ok((algebra, trace))
}

/// Elementary tensor x ⊗ y in the algebra produced by [`tensor_min`].
pub fn tensor_element(x: &AlgElement, y: &AlgElement) -> Result<AlgElement> {
    let mut sizes = Vec::new();
    let mut blocks = Vec::new();
    for (bx, &n) in x.blocks().iter().zip(x.algebra().block_sizes()) {
        for (by, &m) in y.blocks().iter().zip(y.algebra().block_sizes()) {
            sizes.push(n * m);
            blocks.push(bx.kronecker(by));
        }
    }
    FdAlgebra::new(sizes)?.element(blocks)
}

/// Snap a faithful trace to rational weights p_i/Q at denominator Q.
///
/// Rounds each weight, then repairs the sum by stepping the entries with the
/// largest rounding residual, never letting any p_i drop below 1. The result
/// satisfies max_i |α_i − p_i/Q| ≤ r/Q.
pub fn approx_rational_trace(trace: &TracialState, q: u64) -> Result<TracialState> {
    let r = trace.num_blocks() as u64;
    if q < r {
        return Err(Error::Invalid(format!(
            "denominator {q} cannot give {r} strictly positive weights"
        )));
    }
    let mut nums: Vec<i64> = trace
        .weights()
        .iter()
        .map(|&w| ((w * q as f64).round() as i64).max(1))
        .collect();
    let mut total: i64 = nums.iter().sum();
    // Residual of rounding *up* by one unit: larger means the weight was
    // rounded down harder. Used to pick repair targets deterministically.
    let residual = |nums: &[i64], i: usize| trace.weights()[i] * q as f64 - nums[i] as f64;
    while total != q as i64 {
        if total < q as i64 {
            let mut best = 0;
            for i in 1..nums.len() {
                if residual(&nums, i) > residual(&nums, best) {
                    best = i;
                }
            }
            nums[best] += 1;
            total += 1;
        } else {
            let mut best: Option<usize> = None;
            for i in 0..nums.len() {
                if nums[i] <= 1 {
                    continue;
                }
                match best {
                    None => best = Some(i),
                    Some(b) => {
                        if residual(&nums, i) < residual(&nums, b) {
                            best = Some(i);
                        }
                    }
                }
            }
            let b = best.expect("sum > q implies some entry exceeds 1");
            nums[b] -= 1;
            total -= 1;
        }
    }
    TracialState::from_rational(nums.into_iter().map(|p| p as u64).collect(), q)
}
