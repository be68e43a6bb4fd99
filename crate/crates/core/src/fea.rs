//! Fixed-mesh plane-stress finite element analysis on a regular grid of
//! unit square bilinear elements.
//!
//! Numbering follows the classic compact topology-optimization codes:
//! nodes and elements are numbered column by column, top to bottom, so node
//! `(ix, iy)` is `ix * (nely + 1) + iy` and element `(ix, iy)` is
//! `ix * nely + iy`, with `iy = 0` on the top edge. DOF `2n` is the
//! horizontal and `2n + 1` the vertical (positive up) displacement of node
//! `n`.

use crate::banded::{BandMatrix, ZeroPivot};
use crate::error::{Error, Result};

pub const DEFAULT_POISSON: f64 = 0.3;

/// Pivot threshold relative to the original diagonal entry.
const PIVOT_TOL: f64 = 1e-10;

/// 8×8 stiffness of a unit square element with unit Young's modulus.
///
/// DOF order is lower-left, lower-right, upper-right, upper-left node, each
/// as `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementStiffness {
    pub ke: [[f64; 8]; 8],
    pub nu: f64,
}

impl ElementStiffness {
    pub fn new(nu: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::param("nu", format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
        }
        const A11: [[f64; 4]; 4] = [
            [12., 3., -6., -3.],
            [3., 12., 3., 0.],
            [-6., 3., 12., -3.],
            [-3., 0., -3., 12.],
        ];
        const A12: [[f64; 4]; 4] = [
            [-6., -3., 0., 3.],
            [-3., -6., -3., -6.],
            [0., -3., -6., 3.],
            [3., -6., 3., -6.],
        ];
        const B11: [[f64; 4]; 4] = [
            [-4., 3., -2., 9.],
            [3., -4., -9., 4.],
            [-2., -9., -4., -3.],
            [9., 4., -3., -4.],
        ];
        const B12: [[f64; 4]; 4] = [
            [2., -3., 4., -9.],
            [-3., 2., 9., -2.],
            [4., 9., 2., 3.],
            [-9., -2., 3., 2.],
        ];
        let scale = 1.0 / (1.0 - nu * nu) / 24.0;
        let mut ke = [[0.0; 8]; 8];
        for r in 0..4 {
            for c in 0..4 {
                ke[r][c] = scale * (A11[r][c] + nu * B11[r][c]);
                ke[r][c + 4] = scale * (A12[r][c] + nu * B12[r][c]);
                ke[r + 4][c] = scale * (A12[c][r] + nu * B12[c][r]);
                ke[r + 4][c + 4] = scale * (A11[r][c] + nu * B11[r][c]);
            }
        }
        Ok(Self { ke, nu })
    }

    /// `uᵀ ke u` for one element's displacement vector.
    #[inline]
    pub fn energy(&self, u: &[f64; 8]) -> f64 {
        let mut s = 0.0;
        for (r, row) in self.ke.iter().enumerate() {
            let ku: f64 = row.iter().zip(u).map(|(k, v)| k * v).sum();
            s += u[r] * ku;
        }
        s
    }
}

/// A node selector used by support and load definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeIndex {
    All,
    At(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub ix: NodeIndex,
    pub iy: NodeIndex,
    pub fix_x: bool,
    pub fix_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointLoad {
    pub ix: usize,
    pub iy: usize,
    pub fx: f64,
    pub fy: f64,
}

/// Built-in benchmark problems and user-defined boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// Left edge clamped, unit downward load at the middle of the right edge.
    Cantilever,
    /// Full simply supported beam: pin at the bottom-left node, vertical
    /// roller at the bottom-right node, unit downward load at mid-span on
    /// the top edge.
    Mbb,
    Custom {
        supports: Vec<Support>,
        loads: Vec<PointLoad>,
    },
}

impl Problem {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "cantilever" => Ok(Problem::Cantilever),
            "mbb" => Ok(Problem::Mbb),
            "custom" => Ok(Problem::Custom {
                supports: Vec::new(),
                loads: Vec::new(),
            }),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Cantilever => "cantilever",
            Problem::Mbb => "mbb",
            Problem::Custom { .. } => "custom",
        }
    }
}

/// Regular grid with boundary conditions.
#[derive(Debug, Clone)]
pub struct Mesh {
    nelx: usize,
    nely: usize,
    edofs: Vec<[usize; 8]>,
    fixed: Vec<bool>,
    loads: Vec<(usize, f64)>,
}

impl Mesh {
    /// Unconstrained, unloaded grid.
    pub fn new(nelx: usize, nely: usize) -> Result<Self> {
        if nelx == 0 || nely == 0 {
            return Err(Error::param("nelx/nely", "mesh needs at least one element per direction"));
        }
        let mut edofs = Vec::with_capacity(nelx * nely);
        for ix in 0..nelx {
            for iy in 0..nely {
                let n1 = ix * (nely + 1) + iy;
                let n2 = (ix + 1) * (nely + 1) + iy;
                edofs.push([
                    2 * (n1 + 1),
                    2 * (n1 + 1) + 1,
                    2 * (n2 + 1),
                    2 * (n2 + 1) + 1,
                    2 * n2,
                    2 * n2 + 1,
                    2 * n1,
                    2 * n1 + 1,
                ]);
            }
        }
        let ndof = 2 * (nelx + 1) * (nely + 1);
        Ok(Self {
            nelx,
            nely,
            edofs,
            fixed: vec![false; ndof],
            loads: Vec::new(),
        })
    }

    pub fn build(problem: &Problem, nelx: usize, nely: usize) -> Result<Self> {
        if nelx < 2 || nely < 2 {
            return Err(Error::param("nelx/nely", format!("need at least 2x2 elements, got {nelx}x{nely}")));
        }
        let mut mesh = Self::new(nelx, nely)?;
        match problem {
            Problem::Cantilever => {
                for iy in 0..=nely {
                    mesh.fix_node(0, iy, true, true);
                }
                mesh.add_load(nelx, nely / 2, 0.0, -1.0)?;
            }
            Problem::Mbb => {
                mesh.fix_node(0, nely, true, true);
                mesh.fix_node(nelx, nely, false, true);
                mesh.add_load(nelx / 2, 0, 0.0, -1.0)?;
            }
            Problem::Custom { supports, loads } => {
                for s in supports {
                    let xs = mesh.select(s.ix, nelx)?;
                    let ys = mesh.select(s.iy, nely)?;
                    for &ix in &xs {
                        for &iy in &ys {
                            mesh.fix_node(ix, iy, s.fix_x, s.fix_y);
                        }
                    }
                }
                for l in loads {
                    mesh.add_load(l.ix, l.iy, l.fx, l.fy)?;
                }
                if mesh.fixed_count() == 0 {
                    return Err(Error::Config("custom problem defines no supports".into()));
                }
                if mesh.loads.is_empty() {
                    return Err(Error::Config("custom problem defines no loads".into()));
                }
            }
        }
        Ok(mesh)
    }

    fn select(&self, sel: NodeIndex, max: usize) -> Result<Vec<usize>> {
        match sel {
            NodeIndex::All => Ok((0..=max).collect()),
            NodeIndex::At(i) if i <= max => Ok(vec![i]),
            NodeIndex::At(i) => Err(Error::param("support", format!("node index {i} exceeds {max}"))),
        }
    }

    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    pub fn element_count(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn node_count(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        ix * (self.nely + 1) + iy
    }

    pub fn element(&self, ix: usize, iy: usize) -> usize {
        ix * self.nely + iy
    }

    /// `(ix, iy)` grid position of element `e`.
    pub fn element_position(&self, e: usize) -> (usize, usize) {
        (e / self.nely, e % self.nely)
    }

    pub fn element_dofs(&self, e: usize) -> &[usize; 8] {
        &self.edofs[e]
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[dof]
    }

    pub fn fixed_dofs(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&d| self.fixed[d]).collect()
    }

    fn fixed_count(&self) -> usize {
        self.fixed.iter().filter(|&&f| f).count()
    }

    pub fn loads(&self) -> &[(usize, f64)] {
        &self.loads
    }

    pub fn fix_node(&mut self, ix: usize, iy: usize, x: bool, y: bool) {
        let n = self.node(ix, iy);
        if x {
            self.fixed[2 * n] = true;
        }
        if y {
            self.fixed[2 * n + 1] = true;
        }
    }

    pub fn fix_dof(&mut self, dof: usize) -> Result<()> {
        if dof >= self.fixed.len() {
            return Err(Error::param("dof", format!("{dof} out of range")));
        }
        if self.loads.iter().any(|&(d, _)| d == dof) {
            return Err(Error::LoadOnFixedDof { dof });
        }
        self.fixed[dof] = true;
        Ok(())
    }

    pub fn add_load(&mut self, ix: usize, iy: usize, fx: f64, fy: f64) -> Result<()> {
        if ix > self.nelx || iy > self.nely {
            return Err(Error::param("load", format!("node ({ix}, {iy}) outside the mesh")));
        }
        let n = self.node(ix, iy);
        for (dof, f) in [(2 * n, fx), (2 * n + 1, fy)] {
            if f != 0.0 {
                self.add_dof_load(dof, f)?;
            }
        }
        Ok(())
    }

    pub fn add_dof_load(&mut self, dof: usize, f: f64) -> Result<()> {
        if dof >= self.fixed.len() {
            return Err(Error::param("load", format!("DOF {dof} out of range")));
        }
        if self.fixed[dof] {
            return Err(Error::LoadOnFixedDof { dof });
        }
        match self.loads.iter_mut().find(|(d, _)| *d == dof) {
            Some((_, v)) => *v += f,
            None => self.loads.push((dof, f)),
        }
        Ok(())
    }

    /// Dense global force vector.
    pub fn force_vector(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.dof_count()];
        for &(d, v) in &self.loads {
            f[d] += v;
        }
        f
    }

    /// Solver position of each DOF. Nodes are renumbered along the shorter
    /// grid direction to keep the band narrow.
    fn band_ordering(&self) -> Vec<usize> {
        let mut perm = vec![0; self.dof_count()];
        for ix in 0..=self.nelx {
            for iy in 0..=self.nely {
                let n = self.node(ix, iy);
                let pos = if self.nely <= self.nelx {
                    n
                } else {
                    iy * (self.nelx + 1) + ix
                };
                perm[2 * n] = 2 * pos;
                perm[2 * n + 1] = 2 * pos + 1;
            }
        }
        perm
    }
}

/// Displacements, per-element unit strain energies and compliance.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub u: Vec<f64>,
    /// `u_eᵀ K¹ u_e` with the unit-modulus element stiffness.
    pub ce: Vec<f64>,
    pub compliance: f64,
}

/// Reusable assembly/solve workspace bound to one mesh.
#[derive(Debug, Clone)]
pub struct FeaSolver<'m> {
    mesh: &'m Mesh,
    ke: ElementStiffness,
    perm: Vec<usize>,
    band: BandMatrix,
}

impl<'m> FeaSolver<'m> {
    pub fn new(mesh: &'m Mesh, ke: ElementStiffness) -> Self {
        let perm = mesh.band_ordering();
        let bw = mesh
            .edofs
            .iter()
            .map(|ed| {
                let p = ed.map(|d| perm[d]);
                p.iter().max().unwrap() - p.iter().min().unwrap()
            })
            .max()
            .unwrap_or(0);
        Self {
            mesh,
            ke,
            perm,
            band: BandMatrix::zeros(mesh.dof_count(), bw),
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn stiffness(&self) -> &ElementStiffness {
        &self.ke
    }

    /// Assembles `K(E)`, solves `K u = f` with fixed DOFs held at zero and
    /// evaluates element energies and compliance `fᵀu`.
    pub fn solve(&mut self, moduli: &[f64]) -> Result<FieldSolution> {
        let mesh = self.mesh;
        let ne = mesh.element_count();
        if moduli.len() != ne {
            return Err(Error::LengthMismatch {
                expected: ne,
                actual: moduli.len(),
            });
        }
        if let Some(i) = moduli.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::param("moduli", format!("element {i} has non-positive modulus {}", moduli[i])));
        }

        self.band.clear();
        let ke = &self.ke.ke;
        for (e, ed) in mesh.edofs.iter().enumerate() {
            let scale = moduli[e];
            let p = ed.map(|d| self.perm[d]);
            for a in 0..8 {
                for b in 0..8 {
                    if p[a] >= p[b] {
                        self.band.add(p[a], p[b], scale * ke[a][b]);
                    }
                }
            }
        }
        for (dof, &fixed) in mesh.fixed.iter().enumerate() {
            if fixed {
                self.band.pin(self.perm[dof]);
            }
        }
        if let Err(ZeroPivot(pos)) = self.band.factorize(PIVOT_TOL) {
            let dof = self.perm.iter().position(|&p| p == pos).unwrap_or(pos);
            return Err(Error::SingularSystem {
                dof,
                node: dof / 2,
                axis: if dof % 2 == 0 { 'x' } else { 'y' },
            });
        }

        let mut rhs = vec![0.0; mesh.dof_count()];
        for &(dof, f) in &mesh.loads {
            rhs[self.perm[dof]] += f;
        }
        self.band.solve_in_place(&mut rhs);
        let mut u: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for (dof, &fixed) in mesh.fixed.iter().enumerate() {
            if fixed {
                u[dof] = 0.0;
            }
        }

        let ce: Vec<f64> = mesh
            .edofs
            .iter()
            .map(|ed| self.ke.energy(&ed.map(|d| u[d])))
            .collect();
        let compliance = mesh.loads.iter().map(|&(d, f)| f * u[d]).sum();
        Ok(FieldSolution { u, ce, compliance })
    }
}

/// One-shot convenience wrapper around [`FeaSolver`].
pub fn assemble_and_solve(mesh: &Mesh, ke: ElementStiffness, moduli: &[f64]) -> Result<FieldSolution> {
    FeaSolver::new(mesh, ke).solve(moduli)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ke03() -> ElementStiffness {
        ElementStiffness::new(0.3).unwrap()
    }

    #[test]
    fn corner_entry_matches_block_formula() {
        let k = ke03();
        let expected = (12.0 + 0.3 * -4.0) / (24.0 * (1.0 - 0.09));
        assert!((k.ke[0][0] - expected).abs() < 1e-15);
        assert!((k.ke[0][0] - 0.494505).abs() < 1e-6);
    }

    #[test]
    fn symmetric_with_rigid_body_nullspace() {
        for nu in [0.0, 0.2, 0.3, 0.45] {
            let k = ElementStiffness::new(nu).unwrap().ke;
            for r in 0..8 {
                for c in 0..8 {
                    assert!((k[r][c] - k[c][r]).abs() < 1e-15);
                }
            }
            // translations x, y and an infinitesimal rotation about the centre
            let coords = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let mut modes = [[0.0; 8]; 3];
            for (n, &(x, y)) in coords.iter().enumerate() {
                modes[0][2 * n] = 1.0;
                modes[1][2 * n + 1] = 1.0;
                modes[2][2 * n] = -(y - 0.5);
                modes[2][2 * n + 1] = x - 0.5;
            }
            for m in &modes {
                for row in &k {
                    let v: f64 = row.iter().zip(m).map(|(a, b)| a * b).sum();
                    assert!(v.abs() < 1e-12, "nu={nu}: {v}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_poisson() {
        assert!(ElementStiffness::new(0.5).is_err());
        assert!(ElementStiffness::new(-0.1).is_err());
    }

    #[test]
    fn counts_and_dof_maps() {
        let mesh = Mesh::build(&Problem::Cantilever, 2, 2).unwrap();
        assert_eq!(mesh.node_count(), 9);
        assert_eq!(mesh.dof_count(), 18);
        assert_eq!(mesh.fixed_dofs().len(), 6);
        for e in 0..mesh.element_count() {
            let mut d = mesh.element_dofs(e).to_vec();
            assert!(d.iter().all(|&x| x < 18));
            d.sort();
            d.dedup();
            assert_eq!(d.len(), 8);
        }
    }

    #[test]
    fn cantilever_load_dof() {
        let (nelx, nely) = (120, 80);
        let mesh = Mesh::build(&Problem::Cantilever, nelx, nely).unwrap();
        assert_eq!(mesh.fixed_dofs(), (0..2 * (nely + 1)).collect::<Vec<_>>());
        // 1-based DOF 2(nely+1)(nelx+1) - nely
        let dof = 2 * (nely + 1) * (nelx + 1) - nely - 1;
        assert_eq!(mesh.loads(), &[(dof, -1.0)]);
    }

    #[test]
    fn mbb_supports_and_load() {
        let mesh = Mesh::build(&Problem::Mbb, 240, 40).unwrap();
        let top_mid = mesh.node(120, 0);
        assert_eq!(mesh.loads(), &[(2 * top_mid + 1, -1.0)]);
        let bl = mesh.node(0, 40);
        let br = mesh.node(240, 40);
        assert_eq!(mesh.fixed_dofs(), vec![2 * bl, 2 * bl + 1, 2 * br + 1]);
    }

    #[test]
    fn unknown_problem_and_small_mesh() {
        assert!(matches!(Problem::from_name("bridge"), Err(Error::UnknownProblem(_))));
        assert!(Mesh::build(&Problem::Cantilever, 1, 4).is_err());
    }

    #[test]
    fn load_on_fixed_dof_rejected() {
        let problem = Problem::Custom {
            supports: vec![Support {
                ix: NodeIndex::At(0),
                iy: NodeIndex::All,
                fix_x: true,
                fix_y: true,
            }],
            loads: vec![PointLoad {
                ix: 0,
                iy: 1,
                fx: 0.0,
                fy: -1.0,
            }],
        };
        assert!(matches!(Mesh::build(&problem, 3, 3), Err(Error::LoadOnFixedDof { .. })));
    }

    #[test]
    fn insufficient_supports_reported() {
        let mut mesh = Mesh::new(3, 2).unwrap();
        mesh.fix_node(0, 2, true, true);
        mesh.add_load(3, 0, 0.0, -1.0).unwrap();
        let err = assemble_and_solve(&mesh, ke03(), &[1.0; 6]).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }), "{err}");
    }

    #[test]
    fn compliance_scales_inversely_with_modulus() {
        let mesh = Mesh::build(&Problem::Cantilever, 12, 8).unwrap();
        let mut s = FeaSolver::new(&mesh, ke03());
        let full = s.solve(&vec![1.0; 96]).unwrap();
        let half = s.solve(&vec![0.5; 96]).unwrap();
        assert!((half.compliance / full.compliance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tall_mesh_uses_transposed_ordering() {
        // Same physics on a tall grid exercises the row-major band ordering.
        let wide = Mesh::build(&Problem::Mbb, 8, 3).unwrap();
        let tall = Mesh::build(&Problem::Mbb, 3, 8).unwrap();
        let cw = assemble_and_solve(&wide, ke03(), &[1.0; 24]).unwrap();
        let ct = assemble_and_solve(&tall, ke03(), &[1.0; 24]).unwrap();
        assert!(cw.compliance > 0.0 && ct.compliance > 0.0);
        let ce_sum: f64 = ct.ce.iter().sum();
        assert!((ce_sum - ct.compliance).abs() / ct.compliance < 1e-10);
    }
}
