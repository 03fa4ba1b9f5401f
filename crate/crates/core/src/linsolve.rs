//! Sparse symmetric positive definite solves for P1 stiffness systems.
//!
//! The sparsity pattern depends only on the mesh and on which nodes are
//! fixed, so the symbolic Cholesky factorization is computed once and reused
//! for every reweighted system.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Col, Side};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Required relative residual of every linear solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Local element matrices, one symmetric 3x3 block per triangle.
pub type Local = [[f64; 3]; 3];

pub(crate) struct StiffnessPattern {
    triangles: Vec<[usize; 3]>,
    /// Free-system index of each node, `usize::MAX` for fixed nodes.
    free_of: Vec<usize>,
    n_free: usize,
    /// For every triangle, the local pairs `(i, j)` that contribute to the
    /// lower triangle of the free system, in the order of `entries`.
    tri_pairs: Vec<Vec<(u8, u8)>>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: SymbolicLlt<usize>,
}

impl StiffnessPattern {
    pub fn new(mesh: &TriMesh, fixed: &[bool]) -> Result<StiffnessPattern> {
        let mut free_of = vec![usize::MAX; mesh.num_nodes()];
        let mut n_free = 0;
        for (i, &f) in fixed.iter().enumerate() {
            if !f {
                free_of[i] = n_free;
                n_free += 1;
            }
        }
        let mut idx = Vec::with_capacity(mesh.triangles().len() * 6);
        let mut tri_pairs = Vec::with_capacity(mesh.triangles().len());
        for t in mesh.triangles() {
            let mut pairs = Vec::with_capacity(6);
            for i in 0..3 {
                for j in 0..3 {
                    let (fi, fj) = (free_of[t[i]], free_of[t[j]]);
                    if fi != usize::MAX && fj != usize::MAX && fi >= fj {
                        pairs.push((i as u8, j as u8));
                        idx.push(Pair { row: fi, col: fj });
                    }
                }
            }
            tri_pairs.push(pairs);
        }
        if n_free == 0 {
            return Err(Error::Precondition("every node is fixed".into()));
        }
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n_free, n_free, &idx)
            .map_err(|e| Error::SingularSystem(format!("pattern: {e:?}")))?;
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("symbolic factorization: {e:?}")))?;
        Ok(StiffnessPattern {
            triangles: mesh.triangles().to_vec(),
            free_of,
            n_free,
            tri_pairs,
            symbolic,
            argsort,
            llt,
        })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        let f = self.free_of[node];
        (f != usize::MAX).then_some(f)
    }

    /// Free-system product `K x`, where `x` is indexed by free node.
    fn apply(&self, local: &[Local], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_free];
        for (t, m) in self.triangles.iter().zip(local) {
            for i in 0..3 {
                let fi = self.free_of[t[i]];
                if fi == usize::MAX {
                    continue;
                }
                for j in 0..3 {
                    let fj = self.free_of[t[j]];
                    if fj != usize::MAX {
                        y[fi] += m[i][j] * x[fj];
                    }
                }
            }
        }
        y
    }

    /// Solves `K x = b` on the free nodes, with `K` assembled from the local
    /// matrices. The solution is refined until the relative residual meets
    /// [`RESIDUAL_TOL`].
    pub fn solve(&self, local: &[Local], b: &[f64]) -> Result<Vec<f64>> {
        let mut val = Vec::with_capacity(self.argsort_len());
        for (pairs, m) in self.tri_pairs.iter().zip(local) {
            for &(i, j) in pairs {
                val.push(m[i as usize][j as usize]);
            }
        }
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, &val)
            .map_err(|e| Error::SingularSystem(format!("assembly: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(self.llt.clone(), mat.as_ref(), Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("matrix is not positive definite: {e:?}")))?;
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; self.n_free]);
        }
        let rhs = Col::<f64>::from_fn(self.n_free, |i| b[i]);
        let sol = llt.solve(&rhs);
        let mut x: Vec<f64> = (0..self.n_free).map(|i| sol[i]).collect();
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let kx = self.apply(local, &x);
            let r: Vec<f64> = b.iter().zip(&kx).map(|(b, k)| b - k).collect();
            rel = norm(&r) / bnorm;
            if !rel.is_finite() {
                break;
            }
            if rel <= RESIDUAL_TOL {
                return Ok(x);
            }
            let rc = Col::<f64>::from_fn(self.n_free, |i| r[i]);
            let dx = llt.solve(&rc);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += dx[i];
            }
        }
        Err(Error::SingularSystem(format!("relative residual {rel:.3e} above {RESIDUAL_TOL:e}")))
    }

    fn argsort_len(&self) -> usize {
        self.tri_pairs.iter().map(Vec::len).sum()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
