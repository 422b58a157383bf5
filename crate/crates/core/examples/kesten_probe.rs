use fpl_core::freeprod::{FactorSpec, FreeContext, NcPoly, TruncatedFreeRep};
use fpl_core::sparse::NormSolver;
use std::time::Instant;

fn main() {
    let poly = {
        let u1 = NcPoly::haar(0);
        let u2 = NcPoly::haar(1);
        u1.add(&u1.adjoint()).add(&u2.add(&u2.adjoint()))
    };
    for l in [4usize, 6, 8, 10, 12] {
        let t0 = Instant::now();
        let ctx = FreeContext::new(vec![FactorSpec::haar(l), FactorSpec::haar(l)]).unwrap();
        let rep = TruncatedFreeRep::build(ctx, l, 8_000_000).unwrap();
        let t_build = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let est = rep.compressed_norm(&poly, &NormSolver::default()).unwrap();
        println!(
            "L={l:2} basis={:7} value={:.9} iters={} conv={} build={:.1}s solve={:.1}s",
            rep.basis_size(), est.value, est.iterations, est.converged,
            t_build, t1.elapsed().as_secs_f64()
        );
    }
}
