//! Finite element results against a dense assembly solved with nalgebra.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{rngs::StdRng, RngExt, SeedableRng};

use fpto::fea::{assemble_and_solve, ElementStiffness, Mesh, Problem};
use fpto::material::MaterialModel;

/// Dense K restricted to free DOFs, solved by LU.
fn dense_solve(mesh: &Mesh, ke: &ElementStiffness, moduli: &[f64]) -> (Vec<f64>, f64) {
    let n = mesh.dof_count();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (e, &m) in moduli.iter().enumerate() {
        let dofs = mesh.element_dofs(e);
        for a in 0..8 {
            for b in 0..8 {
                k[(dofs[a], dofs[b])] += m * ke.ke[a][b];
            }
        }
    }
    let f = mesh.force_vector();
    let free: Vec<usize> = (0..n).filter(|&d| !mesh.is_fixed(d)).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let ff = DVector::from_iterator(free.len(), free.iter().map(|&d| f[d]));
    let uf = kf.lu().solve(&ff).expect("nonsingular");
    let mut u = vec![0.0; n];
    for (i, &d) in free.iter().enumerate() {
        u[d] = uf[i];
    }
    let c = f.iter().zip(&u).map(|(a, b)| a * b).sum();
    (u, c)
}

fn random_field(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

#[test]
fn single_element_cantilever() {
    let mesh = Mesh::build(&Problem::Cantilever, 2, 2).unwrap();
    let ke = ElementStiffness::new(0.3).unwrap();
    let moduli = [1.0, 1.0, 1.0, 1.0];
    let sol = assemble_and_solve(&mesh, ke, &moduli).unwrap();
    let (u, c) = dense_solve(&mesh, &ke, &moduli);
    assert!((sol.compliance - c).abs() <= 1e-12 * c);
    for (a, b) in sol.u.iter().zip(&u) {
        assert!((a - b).abs() <= 1e-10 * c.abs().max(1.0));
    }
}

#[test]
fn element_energies_sum_to_compliance() {
    let mesh = Mesh::build(&Problem::Mbb, 8, 4).unwrap();
    let ke = ElementStiffness::new(0.3).unwrap();
    let model = MaterialModel::simp(3.0).unwrap();
    let x = random_field(32, 7, 0.1, 1.0);
    let moduli = model.moduli(&x).unwrap();
    let sol = assemble_and_solve(&mesh, ke, &moduli).unwrap();
    let energy: f64 = sol.ce.iter().zip(&moduli).map(|(c, m)| c * m).sum();
    assert!((energy - sol.compliance).abs() <= 1e-10 * sol.compliance);
}

#[test]
fn stiffer_material_lowers_compliance() {
    let mesh = Mesh::build(&Problem::Cantilever, 6, 4).unwrap();
    let ke = ElementStiffness::new(0.3).unwrap();
    let base = random_field(24, 3, 0.2, 0.9);
    let c0 = assemble_and_solve(&mesh, ke, &base).unwrap().compliance;
    for e in 0..24 {
        let mut m = base.clone();
        m[e] += 0.1;
        let c = assemble_and_solve(&mesh, ke, &m).unwrap().compliance;
        assert!(c <= c0 + 1e-12 * c0, "element {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn banded_solve_matches_dense(
        nelx in 2usize..7,
        nely in 2usize..6,
        seed in any::<u64>(),
        mbb in any::<bool>(),
    ) {
        let problem = if mbb { Problem::Mbb } else { Problem::Cantilever };
        let mesh = Mesh::build(&problem, nelx, nely).unwrap();
        let ke = ElementStiffness::new(0.3).unwrap();
        let moduli = random_field(nelx * nely, seed, 1e-3, 1.0);
        let sol = assemble_and_solve(&mesh, ke, &moduli).unwrap();
        let (u, c) = dense_solve(&mesh, &ke, &moduli);
        prop_assert!((sol.compliance - c).abs() <= 1e-8 * c);
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in sol.u.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-8 * umax);
        }
    }
}
