//! Analytic compliance sensitivities against central finite differences of
//! the full solve.

use rand::{rngs::StdRng, RngExt, SeedableRng};

use fpto::fea::{assemble_and_solve, ElementStiffness, Mesh, Problem};
use fpto::material::MaterialModel;
use fpto::optimizer::compute_sensitivities;

const STEP: f64 = 1e-6;

fn field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.2..0.9)).collect()
}

fn check(model: MaterialModel, problem: Problem, seed: u64) {
    let mesh = Mesh::build(&problem, 6, 4).unwrap();
    let ke = ElementStiffness::new(0.3).unwrap();
    let x = field(24, seed);
    let compliance = |x: &[f64]| assemble_and_solve(&mesh, ke, &model.moduli(x).unwrap()).unwrap();
    let sol = compliance(&x);
    let dc = compute_sensitivities(&x, &sol.ce, &model).unwrap();
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += STEP;
        xm[i] -= STEP;
        let fd = (compliance(&xp).compliance - compliance(&xm).compliance) / (2.0 * STEP);
        let rel = (dc[i] - fd).abs() / fd.abs();
        assert!(rel <= 1e-4, "{:?} element {i}: analytic {} fd {fd} rel {rel}", model.kind(), dc[i]);
    }
}

#[test]
fn ersatz_matches_finite_differences() {
    check(MaterialModel::ersatz(), Problem::Cantilever, 1);
    check(MaterialModel::ersatz(), Problem::Mbb, 2);
}

#[test]
fn hs_matches_finite_differences() {
    check(MaterialModel::hs_upper_2d(), Problem::Cantilever, 3);
    check(MaterialModel::hs_upper_2d(), Problem::Mbb, 4);
}

#[test]
fn simp_matches_finite_differences() {
    check(MaterialModel::simp(3.0).unwrap(), Problem::Cantilever, 5);
    check(MaterialModel::simp(3.0).unwrap(), Problem::Mbb, 6);
}
