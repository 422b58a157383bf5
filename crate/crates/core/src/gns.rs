//! GNS matrix representations of traced finite-dimensional C*-algebras.
//!
//! Orthogonalizing a basis 1, b_1, …, b_{d−1} of (B, ψ) under the trace
//! inner product ⟨x, y⟩ = ψ(y*x) yields an orthonormal basis p_1 = 1,
//! p_2, …, p_d. Left multiplication then acts on coordinates as d×d matrices
//! with entries ψ(p_t* b p_s), a faithful unital *-representation whose
//! cyclic vector is e_1 and which recovers the state: ψ(b) = ⟨ρ(b)e_1, e_1⟩.

use crate::algebra::{trace_inner, AlgElement, FdAlgebra, TracialState};
use crate::{C64, CMatrix, Error, Result};

/// Condition-number threshold above which the Gram matrix of the input
/// family is treated as singular (dependent input or non-faithful trace).
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// An orthonormal basis of (B, ψ) under the trace inner product, with
/// p_1 = 1.
#[derive(Debug, Clone)]
pub struct GnsBasis {
    algebra: FdAlgebra,
    trace: TracialState,
    elements: Vec<AlgElement>,
}

impl GnsBasis {
    pub fn algebra(&self) -> &FdAlgebra {
        &self.algebra
    }

    pub fn trace(&self) -> &TracialState {
        &self.trace
    }

    /// The orthonormal elements p_1, …, p_d.
    pub fn elements(&self) -> &[AlgElement] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Coordinates ⟨x, p_t⟩ of an element in this basis.
    pub fn coordinates(&self, x: &AlgElement) -> Result<Vec<C64>> {
        self.elements
            .iter()
            .map(|p| trace_inner(&self.trace, x, p))
            .collect()
    }
}

/// Canonical basis of an algebra: the unit followed by the matrix units
/// e_{jk} in (block, row, column) lexicographic order, with the final
/// diagonal unit of the last block omitted (it equals the unit minus the
/// other diagonal units). This ordering is frozen: GNS matrices are
/// basis-dependent and cross-module data relies on it.
pub fn canonical_basis(algebra: &FdAlgebra) -> Vec<AlgElement> {
    let mut out = vec![algebra.unit()];
    let last_block = algebra.num_blocks() - 1;
    let last_size = algebra.block_sizes()[last_block];
    for (block, &n) in algebra.block_sizes().iter().enumerate() {
        for row in 0..n {
            for col in 0..n {
                if block == last_block && row == last_size - 1 && col == last_size - 1 {
                    continue;
                }
                out.push(algebra.matrix_unit(block, row, col).unwrap());
            }
        }
    }
    debug_assert_eq!(out.len(), algebra.dim());
    out
}

fn gram_matrix(vectors: &[AlgElement], trace: &TracialState) -> Result<CMatrix> {
    let d = vectors.len();
    let mut g = CMatrix::zeros(d, d);
    for s in 0..d {
        for t in 0..d {
            g[(t, s)] = trace_inner(trace, &vectors[s], &vectors[t])?;
        }
    }
    Ok(g)
}

fn gram_condition(g: &CMatrix) -> f64 {
    let eig = g.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
///
/// The first input must be the identity and the family must be linearly
/// independent under ⟨x, y⟩ = ψ(y*x); a Gram condition number above
/// [`GRAM_COND_LIMIT`] is reported as [`Error::SingularGram`]. The sign
/// convention ⟨p_m, y_m⟩ > 0 pins the same basis the determinant
/// orthogonalization formula produces, up to a positive scalar.
pub fn gram_schmidt(vectors: &[AlgElement], trace: &TracialState) -> Result<GnsBasis> {
    if vectors.is_empty() {
        return Err(Error::Invalid("empty basis".into()));
    }
    let algebra = vectors[0].algebra().clone();
    trace
        .weights()
        .len()
        .eq(&algebra.num_blocks())
        .then_some(())
        .ok_or_else(|| Error::ShapeMismatch("trace does not match algebra".into()))?;
    if !vectors[0].sub(&algebra.unit())?.is_zero(1e-12) {
        return Err(Error::Invalid("first basis vector must be the identity".into()));
    }

    let g = gram_matrix(vectors, trace)?;
    let cond = gram_condition(&g);
    if !cond.is_finite() || cond > GRAM_COND_LIMIT {
        return Err(Error::SingularGram { cond });
    }

    let mut basis: Vec<AlgElement> = Vec::with_capacity(vectors.len());
    for y in vectors {
        let mut v = y.clone();
        // two passes of projection removal
        for _ in 0..2 {
            for p in &basis {
                let c = trace_inner(trace, &v, p)?;
                v = v.sub(&p.scale(c))?;
            }
        }
        let nrm2 = trace_inner(trace, &v, &v)?.re;
        if nrm2 <= 0.0 {
            return Err(Error::SingularGram { cond: f64::INFINITY });
        }
        let mut p = v.scale(C64::new(1.0 / nrm2.sqrt(), 0.0));
        // ⟨p, y⟩ is real and positive in exact arithmetic; enforce the
        // convention against roundoff by rotating the residual phase away.
        let overlap = trace_inner(trace, &p, y)?;
        if overlap.norm() > 0.0 {
            let phase = overlap / overlap.norm();
            p = p.scale(phase);
        }
        basis.push(p);
    }
    Ok(GnsBasis {
        algebra,
        trace: trace.clone(),
        elements: basis,
    })
}

/// A GNS matrix realization of (B, ψ): one d×d matrix per canonical basis
/// element, with cyclic vector e_1.
#[derive(Debug, Clone)]
pub struct GnsRep {
    basis: GnsBasis,
    canonical: Vec<AlgElement>,
    matrices: Vec<CMatrix>,
}

impl GnsRep {
    pub fn basis(&self) -> &GnsBasis {
        &self.basis
    }

    /// The canonical algebra basis the matrices are indexed by.
    pub fn canonical_elements(&self) -> &[AlgElement] {
        &self.canonical
    }

    /// Matrices of the canonical basis elements, in order.
    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Matrix of an arbitrary element: entries ⟨x p_s, p_t⟩ = ψ(p_t* x p_s)
    /// at row t, column s. Linear in x, multiplicative, and *-preserving.
    pub fn matrix_of(&self, x: &AlgElement) -> Result<CMatrix> {
        rep_matrix(&self.basis, x)
    }
}

fn rep_matrix(basis: &GnsBasis, x: &AlgElement) -> Result<CMatrix> {
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    for s in 0..d {
        let xs = x.mul(&basis.elements()[s])?;
        for t in 0..d {
            m[(t, s)] = trace_inner(basis.trace(), &xs, &basis.elements()[t])?;
        }
    }
    Ok(m)
}

/// GNS representation of (B, ψ) over the canonical basis.
pub fn build_gns(algebra: &FdAlgebra, trace: &TracialState) -> Result<GnsRep> {
    let canonical = canonical_basis(algebra);
    let basis = gram_schmidt(&canonical, trace)?;
    let matrices = canonical
        .iter()
        .map(|b| rep_matrix(&basis, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(GnsRep { basis, canonical, matrices })
}

fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 1 {
        m[(0, 0)].norm()
    } else {
        m.clone().singular_values().max()
    }
}

/// Per canonical basis element: the exact operator-norm difference
/// ‖ρ_{t'}(b_i) − ρ_t(b_i)‖ and the entrywise bound
/// d² · max_{s,t} |Δ entry|. The norm difference never exceeds the bound.
pub fn rep_perturbation(
    algebra: &FdAlgebra,
    t: &TracialState,
    t_prime: &TracialState,
) -> Result<Vec<(f64, f64)>> {
    let rep = build_gns(algebra, t)?;
    let rep_prime = build_gns(algebra, t_prime)?;
    let d = rep.dim() as f64;
    let mut out = Vec::with_capacity(rep.matrices().len());
    for (a, b) in rep.matrices().iter().zip(rep_prime.matrices()) {
        let diff = b - a;
        let max_entry = diff.iter().map(|c| c.norm()).fold(0.0, f64::max);
        out.push((operator_norm(&diff), d * d * max_entry));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::eval_trace;
    use crate::testutil::{random_element, random_faithful_trace};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sym_algebra() -> (FdAlgebra, TracialState) {
        (
            FdAlgebra::new(vec![1, 1]).unwrap(),
            TracialState::new(vec![0.5, 0.5]).unwrap(),
        )
    }

    #[test]
    fn canonical_basis_shapes() {
        assert_eq!(canonical_basis(&FdAlgebra::scalars()).len(), 1);

        let a = FdAlgebra::new(vec![1, 1]).unwrap();
        let basis = canonical_basis(&a);
        assert_eq!(basis.len(), 2);
        // second element is e^{(1)}_{11}
        assert_eq!(basis[1], a.matrix_unit(0, 0, 0).unwrap());

        let m2 = FdAlgebra::new(vec![2]).unwrap();
        let basis = canonical_basis(&m2);
        assert_eq!(basis.len(), 4);
        assert_eq!(basis[1], m2.matrix_unit(0, 0, 0).unwrap());
        assert_eq!(basis[2], m2.matrix_unit(0, 0, 1).unwrap());
        assert_eq!(basis[3], m2.matrix_unit(0, 1, 0).unwrap());
    }

    #[test]
    fn canonical_basis_is_independent() {
        let m2 = FdAlgebra::new(vec![2]).unwrap();
        let t = TracialState::new(vec![1.0]).unwrap();
        let g = gram_matrix(&canonical_basis(&m2), &t).unwrap();
        let eig = g.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v > 1e-3), "Gram rank deficient: {eig:?}");
    }

    #[test]
    fn gram_schmidt_keeps_orthonormal_input() {
        let (a, t) = sym_algebra();
        let u = a.unit();
        let z = a.diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let basis = gram_schmidt(&[u.clone(), z.clone()], &t).unwrap();
        assert!(basis.elements()[0].sub(&u).unwrap().is_zero(1e-12));
        assert!(basis.elements()[1].sub(&z).unwrap().is_zero(1e-12));
    }

    #[test]
    fn gram_schmidt_two_point_algebra() {
        let (a, t) = sym_algebra();
        let e11 = a.matrix_unit(0, 0, 0).unwrap();
        let basis = gram_schmidt(&[a.unit(), e11], &t).unwrap();
        // e11 − ψ(e11)·1 = diag(1/2, −1/2), normalized to diag(1, −1)
        let expected = a.diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!(basis.elements()[1].sub(&expected).unwrap().is_zero(1e-12));
    }

    #[test]
    fn gram_schmidt_rejects_dependent_input() {
        let (a, t) = sym_algebra();
        let u = a.unit();
        match gram_schmidt(&[u.clone(), u], &t) {
            Err(Error::SingularGram { .. }) => {}
            other => panic!("expected singular Gram, got {other:?}"),
        }
    }

    #[test]
    fn build_gns_symmetry_matrix() {
        let (a, t) = sym_algebra();
        let rep = build_gns(&a, &t).unwrap();
        let z = a.diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let m = rep.matrix_of(&z).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(0.0, 0.0),
        ]);
        assert!((m - expected).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn build_gns_scalars() {
        let rep = build_gns(&FdAlgebra::scalars(), &TracialState::point()).unwrap();
        assert_eq!(rep.dim(), 1);
        assert_eq!(rep.matrices()[0][(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn gns_of_full_block_preserves_norm() {
        let m2 = FdAlgebra::new(vec![2]).unwrap();
        let t = TracialState::new(vec![1.0]).unwrap();
        let rep = build_gns(&m2, &t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_element(&m2, &mut rng);
            let sa = x.add(&x.adjoint()).unwrap();
            let m = rep.matrix_of(&sa).unwrap();
            let defect = (operator_norm(&m) - sa.norm()).abs();
            assert!(defect < 1e-10, "norm defect {defect}");
        }
    }

    #[test]
    fn gns_laws_on_random_instances() {
        // homomorphism, adjoint, state recovery, faithfulness, cyclicity
        let shapes: [&[usize]; 5] = [&[1, 1], &[2], &[2, 1], &[1, 1, 1], &[2, 2]];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for round in 0..10 {
            let algebra = FdAlgebra::new(shapes[round % shapes.len()].to_vec()).unwrap();
            let trace = random_faithful_trace(algebra.num_blocks(), &mut rng);
            let rep = build_gns(&algebra, &trace).unwrap();
            let x = random_element(&algebra, &mut rng);
            let y = random_element(&algebra, &mut rng);

            let mx = rep.matrix_of(&x).unwrap();
            let my = rep.matrix_of(&y).unwrap();
            let mxy = rep.matrix_of(&x.mul(&y).unwrap()).unwrap();
            assert!(operator_norm(&(&mx * &my - &mxy)) <= 1e-9);
            assert!(operator_norm(&(rep.matrix_of(&x.adjoint()).unwrap() - mx.adjoint())) <= 1e-9);

            let state = mx[(0, 0)];
            assert!((state - eval_trace(&trace, &x).unwrap()).norm() <= 1e-9);

            // kernel is trivial on the canonical basis
            for m in rep.matrices() {
                assert!(operator_norm(m) > 1e-8);
            }

            // cyclicity: the columns ρ(b)e_1 span ℂ^d
            let d = rep.dim();
            let mut cols = CMatrix::zeros(d, d);
            for (j, m) in rep.matrices().iter().enumerate() {
                cols.set_column(j, &m.column(0));
            }
            let sv = cols.singular_values();
            assert!(sv[sv.len() - 1] > 1e-8, "cyclic vector fails to generate");
        }
    }

    #[test]
    fn perturbation_zero_for_identical_traces() {
        let (a, t) = sym_algebra();
        for (nd, bound) in rep_perturbation(&a, &t, &t).unwrap() {
            assert_eq!(nd, 0.0);
            assert_eq!(bound, 0.0);
        }
    }

    #[test]
    fn perturbation_shrinks_linearly() {
        let a = FdAlgebra::new(vec![1, 1]).unwrap();
        let t = TracialState::new(vec![0.5, 0.5]).unwrap();
        for delta in [1e-3, 5e-4] {
            let t1 = TracialState::new(vec![0.5 + delta, 0.5 - delta]).unwrap();
            let t2 = TracialState::new(vec![0.5 + delta / 2.0, 0.5 - delta / 2.0]).unwrap();
            let d1: f64 = rep_perturbation(&a, &t, &t1)
                .unwrap()
                .iter()
                .map(|p| p.0)
                .fold(0.0, f64::max);
            let d2: f64 = rep_perturbation(&a, &t, &t2)
                .unwrap()
                .iter()
                .map(|p| p.0)
                .fold(0.0, f64::max);
            let ratio = d2 / d1;
            assert!((0.3..=0.7).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn perturbation_norm_below_entry_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = FdAlgebra::new(vec![2, 1]).unwrap();
        for _ in 0..5 {
            let t = random_faithful_trace(2, &mut rng);
            let t2 = random_faithful_trace(2, &mut rng);
            for (nd, bound) in rep_perturbation(&a, &t, &t2).unwrap() {
                assert!(nd <= bound + 1e-12, "norm {nd} exceeds bound {bound}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn basis_invariant_under_positive_scaling(seed in 0u64..256, scale in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = FdAlgebra::new(vec![2]).unwrap();
            let t = random_faithful_trace(1, &mut rng);
            let canonical = canonical_basis(&a);
            let b1 = gram_schmidt(&canonical, &t).unwrap();
            let mut scaled = canonical.clone();
            for y in scaled.iter_mut().skip(1) {
                *y = y.scale(C64::new(scale, 0.0));
            }
            let b2 = gram_schmidt(&scaled, &t).unwrap();
            for (p, q) in b1.elements().iter().zip(b2.elements()) {
                prop_assert!(p.sub(q).unwrap().is_zero(1e-10));
            }
        }
    }
}
