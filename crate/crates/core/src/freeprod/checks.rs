//! Exact moment evaluation and freeness/Haar diagnostics.

use super::{FreeContext, LazyVec, LetterOp, NcPoly, PolyLetter, TruncatedFreeRep, Word};
use crate::sparse::NormSolver;
use crate::{C64, Error, Result};

/// Guard against runaway supports in very high-degree evaluations.
const SUPPORT_BUDGET: usize = 4_000_000;

/// The free-product state τ(P) = ⟨λ(P)ξ, ξ⟩, evaluated exactly: a monomial
/// of total graded length D applied to ξ is supported on words of length
/// ≤ D, so no truncation enters.
pub fn evaluate_moment(ctx: &FreeContext, p: &NcPoly) -> Result<C64> {
    evaluate_moment_capped(ctx, p, p.len_budget())
}

/// Same as [`evaluate_moment`] but with an explicit workspace depth; any
/// depth ≥ the polynomial's graded length yields bitwise-identical results
/// (the cap only guards memory).
pub fn evaluate_moment_capped(ctx: &FreeContext, p: &NcPoly, depth: usize) -> Result<C64> {
    ctx.check_poly(p)?;
    if depth < p.len_budget() {
        return Err(Error::Budget(format!(
            "workspace depth {depth} below polynomial length {}",
            p.len_budget()
        )));
    }
    let mut total = C64::new(0.0, 0.0);
    for (coeff, monomial) in p.terms() {
        let mut v = LazyVec::new();
        v.insert(Word::empty(), C64::new(1.0, 0.0));
        for l in monomial.iter().rev() {
            v = ctx.apply_letter(l.factor, &l.op, &v, Some(depth))?;
            if v.len() > SUPPORT_BUDGET {
                return Err(Error::Budget(format!(
                    "moment support exceeded {SUPPORT_BUDGET} words"
                )));
            }
        }
        if let Some(c) = v.get(&Word::empty()) {
            total += coeff * c;
        }
    }
    Ok(total)
}

/// Apply λ(P) to a finitely supported vector with no truncation.
pub fn apply_poly_exact(ctx: &FreeContext, p: &NcPoly, v: &LazyVec) -> Result<LazyVec> {
    ctx.check_poly(p)?;
    ctx.apply_poly(p, v, None)
}

/// One family of elements within a single factor, for freeness testing.
#[derive(Debug, Clone)]
pub struct Family {
    pub factor: usize,
    pub elements: Vec<LetterOp>,
}

/// Max |τ(z_1 z_2 ⋯ z_k)| over alternating products of centered elements,
/// k ≤ max_degree, where z ranges over the families and adjacent z's come
/// from distinct families. Families that are free by construction give
/// values at floating-point scale; reusing one factor for two families is
/// the standard non-free control.
pub fn freeness_check(ctx: &FreeContext, families: &[Family], max_degree: usize) -> Result<f64> {
    if max_degree < 2 {
        return Err(Error::Invalid("freeness check needs degree at least 2".into()));
    }
    // center: z = x − τ(x)·1; Haar powers are already centered for m ≠ 0
    let mut centered: Vec<Vec<PolyLetter>> = Vec::with_capacity(families.len());
    for fam in families {
        let mut ops = Vec::new();
        for op in &fam.elements {
            match op {
                LetterOp::Elem(x) => {
                    let t = ctx.letter_trace(fam.factor, op)?;
                    let z = x.sub_scalar(t);
                    if !z.is_zero(0.0) {
                        ops.push(PolyLetter { factor: fam.factor, op: LetterOp::Elem(z) });
                    }
                }
                LetterOp::Power(0) => {}
                LetterOp::Power(m) => {
                    ops.push(PolyLetter { factor: fam.factor, op: LetterOp::Power(*m) });
                }
            }
        }
        centered.push(ops);
    }

    let mut worst = 0.0f64;
    let mut stack: Vec<PolyLetter> = Vec::new();
    for start in 0..centered.len() {
        alternate(ctx, &centered, max_degree, start, &mut stack, &mut worst)?;
    }
    Ok(worst)
}

fn alternate(
    ctx: &FreeContext,
    centered: &[Vec<PolyLetter>],
    max_degree: usize,
    family: usize,
    stack: &mut Vec<PolyLetter>,
    worst: &mut f64,
) -> Result<()> {
    for letter in &centered[family] {
        stack.push(letter.clone());
        let poly = NcPoly { terms: vec![(C64::new(1.0, 0.0), stack.clone())] };
        let v = evaluate_moment(ctx, &poly)?;
        *worst = worst.max(v.norm());
        if stack.len() < max_degree {
            for next in 0..centered.len() {
                if next != family {
                    alternate(ctx, centered, max_degree, next, stack, worst)?;
                }
            }
        }
        stack.pop();
    }
    Ok(())
}

/// Report of a Haar-unitarity test: max |τ(w^m)| for 1 ≤ m ≤ n_max.
#[derive(Debug, Clone)]
pub struct HaarReport {
    pub moments: Vec<C64>,
    pub max_abs: f64,
}

/// Check whether a unitary word w is Haar: τ(w^m) must vanish for all
/// m ≠ 0. Unitarity is verified first (τ(w*w) = 1 and compressed norm
/// ≤ 1 + 1e−6); non-unitary input is an error.
pub fn haar_check(ctx: &FreeContext, w: &NcPoly, n_max: usize) -> Result<HaarReport> {
    ctx.check_poly(w)?;
    let ww = w.adjoint().mul(w);
    let t = evaluate_moment(ctx, &ww)?;
    if (t - C64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(Error::Invalid(format!("word is not unitary: τ(w*w) = {t}")));
    }
    let rep = TruncatedFreeRep::build(
        ctx.clone(),
        w.len_budget().max(1),
        super::rep::DEFAULT_MAX_WORDS,
    )?;
    let nrm = rep.compressed_norm(w, &NormSolver::default())?;
    if nrm.value > 1.0 + 1e-6 {
        return Err(Error::Invalid(format!(
            "word is not unitary: compressed norm {}",
            nrm.value
        )));
    }

    let mut v = LazyVec::new();
    v.insert(Word::empty(), C64::new(1.0, 0.0));
    let mut moments = Vec::with_capacity(n_max);
    let mut max_abs = 0.0f64;
    for _ in 0..n_max {
        v = ctx.apply_poly(w, &v, None)?;
        if v.len() > SUPPORT_BUDGET {
            return Err(Error::Budget("Haar power support exceeded budget".into()));
        }
        let m = v.get(&Word::empty()).copied().unwrap_or(C64::new(0.0, 0.0));
        max_abs = max_abs.max(m.norm());
        moments.push(m);
    }
    Ok(HaarReport { moments, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{FdAlgebra, TracialState};
    use crate::freeprod::FactorSpec;
    use crate::gns::canonical_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;


    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn sym_factor() -> FactorSpec {
        FactorSpec::finite(
            FdAlgebra::new(vec![1, 1]).unwrap(),
            TracialState::new(vec![0.5, 0.5]).unwrap(),
        )
    }

    fn centered_symmetry(factor: usize) -> NcPoly {
        let a = FdAlgebra::new(vec![1, 1]).unwrap();
        let z = a.diagonal(&[c(1.0), c(-1.0)]).unwrap();
        NcPoly::element(factor, z)
    }

    /// Independent oracle: the trace on the infinite dihedral group
    /// ℤ₂ * ℤ₂. Words in the two symmetries reduce by xx = yy = e; the
    /// group trace of a product is 1 if it reduces to e, else 0.
    fn dihedral_oracle(pattern: &[usize]) -> f64 {
        let mut reduced: Vec<usize> = Vec::new();
        for &g in pattern {
            if reduced.last() == Some(&g) {
                reduced.pop();
            } else {
                reduced.push(g);
            }
        }
        if reduced.is_empty() {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn moment_of_unit_is_one() {
        let ctx = FreeContext::new(vec![sym_factor()]).unwrap();
        let v = evaluate_moment(&ctx, &NcPoly::one()).unwrap();
        assert_eq!(v, c(1.0));
    }

    #[test]
    fn haar_square_moment() {
        // τ((u + u*)²) = 2: cross terms give uu* + u*u = 2
        let ctx = FreeContext::new(vec![FactorSpec::haar(1)]).unwrap();
        let u = NcPoly::haar(0);
        let p = u.add(&u.adjoint()).pow(2);
        let v = evaluate_moment(&ctx, &p).unwrap();
        assert!((v - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn product_of_free_symmetries_is_haar() {
        // x, y free trace-zero symmetries: τ((xy)^m) = 0 for 1 ≤ m ≤ 6,
        // cross-checked against the reduced-word oracle in ℤ₂ * ℤ₂
        let ctx = FreeContext::new(vec![sym_factor(), sym_factor()]).unwrap();
        let xy = centered_symmetry(0).mul(&centered_symmetry(1));
        let mut p = NcPoly::one();
        for m in 1..=6usize {
            p = p.mul(&xy);
            let v = evaluate_moment(&ctx, &p).unwrap();
            let pattern: Vec<usize> = (0..m).flat_map(|_| [0usize, 1]).collect();
            assert_eq!(dihedral_oracle(&pattern), 0.0);
            assert!(v.norm() <= 1e-10, "m={m}: {v}");
        }
    }

    #[test]
    fn dihedral_words_match_group_oracle() {
        // all words of length ≤ 6 in the two symmetries have the group trace
        let ctx = FreeContext::new(vec![sym_factor(), sym_factor()]).unwrap();
        let gens = [centered_symmetry(0), centered_symmetry(1)];
        for len in 1..=6usize {
            for pattern_id in 0..(1usize << len) {
                let pattern: Vec<usize> =
                    (0..len).map(|i| (pattern_id >> i) & 1).collect();
                let mut p = NcPoly::one();
                for &g in &pattern {
                    p = p.mul(&gens[g]);
                }
                let v = evaluate_moment(&ctx, &p).unwrap();
                let expected = dihedral_oracle(&pattern);
                assert!(
                    (v - c(expected)).norm() <= 1e-10,
                    "pattern {pattern:?}: {v} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn moment_workspace_depth_is_irrelevant_bitwise() {
        let m2 = FactorSpec::finite(
            FdAlgebra::new(vec![2]).unwrap(),
            TracialState::new(vec![1.0]).unwrap(),
        );
        let ctx = FreeContext::new(vec![m2, FactorSpec::haar(4)]).unwrap();
        let alg = FdAlgebra::new(vec![2]).unwrap();
        let x = alg
            .matrix_unit(0, 0, 1)
            .unwrap()
            .add(&alg.matrix_unit(0, 1, 0).unwrap())
            .unwrap();
        let u = NcPoly::haar(1);
        let p = NcPoly::element(0, x).add(&u).pow(3);
        let d = p.len_budget();
        let a = evaluate_moment_capped(&ctx, &p, d).unwrap();
        let b = evaluate_moment_capped(&ctx, &p, d + 5).unwrap();
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
        // a cap below the polynomial's length is rejected
        assert!(evaluate_moment_capped(&ctx, &p, d - 1).is_err());
    }

    #[test]
    fn moments_are_tracial_on_random_monomials() {
        let m2 = FactorSpec::finite(
            FdAlgebra::new(vec![2]).unwrap(),
            TracialState::new(vec![1.0]).unwrap(),
        );
        let ctx = FreeContext::new(vec![m2, FactorSpec::haar(3)]).unwrap();
        let alg = FdAlgebra::new(vec![2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let random_monomial = |deg: usize, rng: &mut ChaCha8Rng| {
            let mut p = NcPoly::one();
            for _ in 0..deg {
                if rng.gen_bool(0.5) {
                    let x = crate::testutil::random_element(&alg, rng);
                    p = p.mul(&NcPoly::element(0, x));
                } else {
                    let m = *[-2i64, -1, 1, 2].get(rng.gen_range(0..4)).unwrap();
                    p = p.mul(&NcPoly::haar_power(1, m));
                }
            }
            p
        };
        for _ in 0..50 {
            let dp = rng.gen_range(1..=4);
            let dq = rng.gen_range(1..=4);
            let p = random_monomial(dp, &mut rng);
            let q = random_monomial(dq, &mut rng);
            let pq = evaluate_moment(&ctx, &p.mul(&q)).unwrap();
            let qp = evaluate_moment(&ctx, &q.mul(&p)).unwrap();
            assert!((pq - qp).norm() <= 1e-10, "tracial defect {}", (pq - qp).norm());
        }
    }

    #[test]
    fn state_is_positive_on_random_polynomials() {
        let ctx = FreeContext::new(vec![sym_factor(), FactorSpec::haar(2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let mut p = NcPoly::zero();
            for _ in 0..rng.gen_range(1..=3) {
                let mut m = NcPoly::scalar(C64::new(
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                ));
                for _ in 0..rng.gen_range(0..=4usize) {
                    if rng.gen_bool(0.5) {
                        m = m.mul(&centered_symmetry(0));
                    } else {
                        m = m.mul(&NcPoly::haar_power(1, if rng.gen_bool(0.5) { 1 } else { -1 }));
                    }
                }
                p = p.add(&m);
            }
            let v = evaluate_moment(&ctx, &p.adjoint().mul(&p)).unwrap();
            assert!(v.re >= -1e-12, "τ(P*P) = {v}");
            assert!(v.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn freeness_of_two_full_matrix_factors() {
        let m2 = || {
            FactorSpec::finite(
                FdAlgebra::new(vec![2]).unwrap(),
                TracialState::new(vec![1.0]).unwrap(),
            )
        };
        let ctx = FreeContext::new(vec![m2(), m2()]).unwrap();
        let alg = FdAlgebra::new(vec![2]).unwrap();
        let elems = |factor: usize| Family {
            factor,
            elements: canonical_basis(&alg)
                .into_iter()
                .map(LetterOp::Elem)
                .collect(),
        };
        let worst = freeness_check(&ctx, &[elems(0), elems(1)], 4).unwrap();
        assert!(worst <= 1e-10, "freeness defect {worst}");
    }

    #[test]
    fn non_free_control_detects_same_factor() {
        let ctx = FreeContext::new(vec![sym_factor()]).unwrap();
        let a = FdAlgebra::new(vec![1, 1]).unwrap();
        let z = a.diagonal(&[c(1.0), c(-1.0)]).unwrap();
        let fam = |_: usize| Family {
            factor: 0,
            elements: vec![LetterOp::Elem(z.clone())],
        };
        // both families in the same factor: τ(z·z) = 1
        let worst = freeness_check(&ctx, &[fam(0), fam(1)], 2).unwrap();
        assert!(worst >= 0.5, "control violation only {worst}");
    }

    #[test]
    fn freeness_single_family_is_vacuous() {
        let ctx = FreeContext::new(vec![sym_factor()]).unwrap();
        let a = FdAlgebra::new(vec![1, 1]).unwrap();
        let z = a.diagonal(&[c(1.0), c(-1.0)]).unwrap();
        let worst = freeness_check(
            &ctx,
            &[Family { factor: 0, elements: vec![LetterOp::Elem(z)] }],
            4,
        )
        .unwrap();
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn freeness_rejects_degree_below_two() {
        let ctx = FreeContext::new(vec![sym_factor()]).unwrap();
        assert!(freeness_check(&ctx, &[], 1).is_err());
    }

    #[test]
    fn haar_generator_is_haar() {
        let ctx = FreeContext::new(vec![FactorSpec::haar(2)]).unwrap();
        let report = haar_check(&ctx, &NcPoly::haar(0), 8).unwrap();
        assert_eq!(report.max_abs, 0.0);
    }

    #[test]
    fn product_of_symmetries_haar_report() {
        let ctx = FreeContext::new(vec![sym_factor(), sym_factor()]).unwrap();
        let xy = centered_symmetry(0).mul(&centered_symmetry(1));
        let report = haar_check(&ctx, &xy, 6).unwrap();
        assert!(report.max_abs <= 1e-10);
    }

    #[test]
    fn involution_is_not_haar_but_detected() {
        let ctx = FreeContext::new(vec![sym_factor()]).unwrap();
        let z = centered_symmetry(0);
        let report = haar_check(&ctx, &z, 2).unwrap();
        // τ(z²) = 1: unitary but not Haar
        assert!((report.moments[1] - c(1.0)).norm() < 1e-12);
        assert!(report.max_abs >= 1.0 - 1e-12);
    }

    #[test]
    fn haar_check_rejects_non_unitary() {
        let ctx = FreeContext::new(vec![FactorSpec::haar(2)]).unwrap();
        let u = NcPoly::haar(0);
        let p = u.add(&u.adjoint()); // self-adjoint, not unitary
        assert!(haar_check(&ctx, &p, 3).is_err());
    }
}
