//! Element loops for the mass, stiffness and Saint-Venant-Kirchhoff force operators.

use std::sync::Arc;

use dnf_core::{MechanicalSystem, NonlinearOperators, SparseSymmetricMatrix};
use rayon::prelude::*;

use crate::material::Material;
use crate::mesh::{invert, Mesh};
use crate::quadrature::{rule, RuleChoice};
use crate::FeError;

type M3 = [[f64; 3]; 3];

/// Physical shape gradients and weights at the integration points of every element.
#[derive(Clone, Debug)]
pub struct StrainKernels {
    nodes_per_element: usize,
    points_per_element: usize,
    /// `w·det J` per element and point.
    weights: Vec<f64>,
    /// `∂N_a/∂X` per element, point and node.
    grads: Vec<[f64; 3]>,
}

impl StrainKernels {
    pub fn new(mesh: &Mesh, choice: RuleChoice) -> Result<Self, FeError> {
        let nn = mesh.kind.nodes();
        let r = rule(mesh.kind, choice);
        let np = r.points.len();
        let per: Vec<Result<(Vec<f64>, Vec<[f64; 3]>), FeError>> = (0..mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let mut values = vec![0.0; nn];
                let mut derivs = vec![[0.0; 3]; nn];
                let mut w = Vec::with_capacity(np);
                let mut g = Vec::with_capacity(np * nn);
                for (p, wt) in r.points.iter().zip(&r.weights) {
                    let (det, it) = invert(&mesh.jacobian(e, *p, &mut values, &mut derivs));
                    if !(det > 0.0) {
                        return Err(FeError::NegativeJacobian { element: e, det });
                    }
                    w.push(wt * det);
                    for d in &derivs {
                        g.push(std::array::from_fn(|i| it[i][0] * d[0] + it[i][1] * d[1] + it[i][2] * d[2]));
                    }
                }
                Ok((w, g))
            })
            .collect();
        let mut weights = Vec::with_capacity(mesh.element_count() * np);
        let mut grads = Vec::with_capacity(mesh.element_count() * np * nn);
        for item in per {
            let (w, g) = item?;
            weights.extend(w);
            grads.extend(g);
        }
        Ok(Self { nodes_per_element: nn, points_per_element: np, weights, grads })
    }

    fn point(&self, e: usize, q: usize) -> (f64, &[[f64; 3]]) {
        let i = e * self.points_per_element + q;
        let nn = self.nodes_per_element;
        (self.weights[i], &self.grads[i * nn..(i + 1) * nn])
    }

    /// `eⁿˢ(a, b) = ½(∇aᵀ∇b + ∇bᵀ∇a)` from two displacement gradients.
    pub fn nonlinear_strain(ha: &M3, hb: &M3) -> M3 {
        std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (0..3).map(|k| ha[k][i] * hb[k][j] + hb[k][i] * ha[k][j]).sum::<f64>()))
    }
}

fn gradient(grads: &[[f64; 3]], ue: &[[f64; 3]]) -> M3 {
    let mut h = [[0.0; 3]; 3];
    for (g, u) in grads.iter().zip(ue) {
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += u[i] * g[j];
            }
        }
    }
    h
}

fn sym(h: &M3) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (h[i][j] + h[j][i])))
}

fn matmul(a: &M3, b: &M3) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

fn add_scaled(out: &mut M3, c: f64, a: &M3) {
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += c * a[i][j];
        }
    }
}

/// Finite element model with the clamped DOFs removed from the numbering.
#[derive(Clone, Debug)]
pub struct FeModel {
    mesh: Arc<Mesh>,
    material: Material,
    kernels: StrainKernels,
    /// Free index of every global DOF, `usize::MAX` when clamped.
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
    constrained: Vec<usize>,
}

impl FeModel {
    /// Clamps every node of the named sets in all three directions.
    pub fn new(mesh: Mesh, material: Material, clamped_sets: &[&str]) -> Result<Self, FeError> {
        Self::with_rule(mesh, material, clamped_sets, RuleChoice::Standard)
    }

    pub fn with_rule(mesh: Mesh, material: Material, clamped_sets: &[&str], choice: RuleChoice) -> Result<Self, FeError> {
        material.validate()?;
        mesh.validate()?;
        let mut clamped = vec![false; mesh.node_count()];
        for name in clamped_sets {
            for &n in mesh.set(name)? {
                clamped[n] = true;
            }
        }
        let mut free_index = vec![usize::MAX; mesh.dof_count()];
        let mut free_dofs = Vec::new();
        let mut constrained = Vec::new();
        for (node, &c) in clamped.iter().enumerate() {
            for d in 0..3 {
                let g = 3 * node + d;
                if c {
                    constrained.push(g);
                } else {
                    free_index[g] = free_dofs.len();
                    free_dofs.push(g);
                }
            }
        }
        if free_dofs.is_empty() {
            return Err(FeError::Mesh("every DOF is clamped".into()));
        }
        let kernels = StrainKernels::new(&mesh, choice)?;
        Ok(Self { mesh: Arc::new(mesh), material, kernels, free_index, free_dofs, constrained })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> Material {
        self.material
    }

    pub fn free_dof_count(&self) -> usize {
        self.free_dofs.len()
    }

    /// Global DOF (`3·node + component`) of each free index.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    /// Global DOF vector with zeros on the clamped DOFs.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.dof_count()];
        for (&g, &v) in self.free_dofs.iter().zip(free) {
            full[g] = v;
        }
        full
    }

    /// Free entries of a global DOF vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| full[g]).collect()
    }

    fn check(&self, v: &[f64]) -> Result<(), FeError> {
        if v.len() != self.free_dofs.len() {
            return Err(FeError::Length { expected: self.free_dofs.len(), got: v.len() });
        }
        Ok(())
    }

    fn element_values(&self, full: &[f64], e: usize) -> Vec<[f64; 3]> {
        self.mesh.elements[e].iter().map(|&n| [full[3 * n], full[3 * n + 1], full[3 * n + 2]]).collect()
    }

    /// `S = λ tr(E) I + 2μ E`.
    fn stress(&self, e: &M3) -> M3 {
        let (lambda, mu) = self.material.lame();
        let tr = e[0][0] + e[1][1] + e[2][2];
        std::array::from_fn(|i| std::array::from_fn(|j| 2.0 * mu * e[i][j] + if i == j { lambda * tr } else { 0.0 }))
    }

    /// Integrates `Σ_j ∂_j N_a P_ij` for a per-point tensor `P` and scatters to the free DOFs.
    fn assemble_vector<F>(&self, inputs: &[&[f64]], tensor: F) -> Vec<f64>
    where
        F: Fn(&[M3]) -> M3 + Sync,
    {
        let fulls: Vec<Vec<f64>> = inputs.iter().map(|v| self.expand(v)).collect();
        let np = self.kernels.points_per_element;
        let elems: Vec<Vec<[f64; 3]>> = (0..self.mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let ues: Vec<Vec<[f64; 3]>> = fulls.iter().map(|f| self.element_values(f, e)).collect();
                let mut fe = vec![[0.0; 3]; self.kernels.nodes_per_element];
                for q in 0..np {
                    let (w, grads) = self.kernels.point(e, q);
                    let hs: Vec<M3> = ues.iter().map(|ue| gradient(grads, ue)).collect();
                    let p = tensor(&hs);
                    for (a, g) in grads.iter().enumerate() {
                        for i in 0..3 {
                            fe[a][i] += w * (p[i][0] * g[0] + p[i][1] * g[1] + p[i][2] * g[2]);
                        }
                    }
                }
                fe
            })
            .collect();
        let mut out = vec![0.0; self.free_dofs.len()];
        for (e, fe) in elems.iter().enumerate() {
            for (a, &n) in self.mesh.elements[e].iter().enumerate() {
                for i in 0..3 {
                    let f = self.free_index[3 * n + i];
                    if f != usize::MAX {
                        out[f] += fe[a][i];
                    }
                }
            }
        }
        out
    }

    /// `G(a, b)` with the symmetrized quadratic weak form.
    pub fn quadratic_force(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>, FeError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.assemble_vector(&[a, b], |h| {
            let (ha, hb) = (&h[0], &h[1]);
            let mut p = self.stress(&StrainKernels::nonlinear_strain(ha, hb));
            add_scaled(&mut p, 1.0, &matmul(ha, &self.stress(&sym(hb))));
            add_scaled(&mut p, 1.0, &matmul(hb, &self.stress(&sym(ha))));
            p.map(|row| row.map(|v| 0.5 * v))
        }))
    }

    /// `H(a, b, c)` with the symmetrized cubic weak form.
    pub fn cubic_force(&self, a: &[f64], b: &[f64], c: &[f64]) -> Result<Vec<f64>, FeError> {
        self.check(a)?;
        self.check(b)?;
        self.check(c)?;
        Ok(self.assemble_vector(&[a, b, c], |h| {
            let (ha, hb, hc) = (&h[0], &h[1], &h[2]);
            let mut p = matmul(ha, &self.stress(&StrainKernels::nonlinear_strain(hb, hc)));
            add_scaled(&mut p, 1.0, &matmul(hb, &self.stress(&StrainKernels::nonlinear_strain(hc, ha))));
            add_scaled(&mut p, 1.0, &matmul(hc, &self.stress(&StrainKernels::nonlinear_strain(ha, hb))));
            p.map(|row| row.map(|v| v / 6.0))
        }))
    }

    /// Internal force `∫ (F S) : ∇ũ` with the Green-Lagrange strain, no polynomial splitting.
    pub fn full_internal_force(&self, u: &[f64]) -> Result<Vec<f64>, FeError> {
        self.check(u)?;
        Ok(self.assemble_vector(&[u], |h| {
            let hu = &h[0];
            let f: M3 = std::array::from_fn(|i| std::array::from_fn(|j| hu[i][j] + if i == j { 1.0 } else { 0.0 }));
            let ftf = matmul(&transpose(&f), &f);
            let e: M3 = std::array::from_fn(|i| {
                std::array::from_fn(|j| 0.5 * (ftf[i][j] - if i == j { 1.0 } else { 0.0 }))
            });
            matmul(&f, &self.stress(&e))
        }))
    }

    /// Linear force `K u` from the element loop, independent of the assembled matrix.
    pub fn linear_force(&self, u: &[f64]) -> Result<Vec<f64>, FeError> {
        self.check(u)?;
        Ok(self.assemble_vector(&[u], |h| self.stress(&sym(&h[0]))))
    }

    fn assemble_matrix<F>(&self, element: F) -> Result<SparseSymmetricMatrix, FeError>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let nn = self.kernels.nodes_per_element;
        let nd = 3 * nn;
        let blocks: Vec<Vec<f64>> = (0..self.mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let mut ke = vec![0.0; nd * nd];
                element(e, &mut ke);
                ke
            })
            .collect();
        let mut trip = Vec::with_capacity(blocks.len() * nd * (nd + 1) / 2);
        for (e, ke) in blocks.iter().enumerate() {
            let dofs: Vec<usize> =
                self.mesh.elements[e].iter().flat_map(|&n| (0..3).map(move |i| 3 * n + i)).collect();
            for (r, &gr) in dofs.iter().enumerate() {
                let fr = self.free_index[gr];
                if fr == usize::MAX {
                    continue;
                }
                for (c, &gc) in dofs.iter().enumerate() {
                    let fc = self.free_index[gc];
                    if fc == usize::MAX || fc < fr {
                        continue;
                    }
                    trip.push((fr, fc, ke[r * nd + c]));
                }
            }
        }
        Ok(SparseSymmetricMatrix::from_triplets(self.free_dofs.len(), trip)?)
    }

    /// Linear stiffness `K` on the free DOFs.
    pub fn stiffness(&self) -> Result<SparseSymmetricMatrix, FeError> {
        self.tangent_matrix(None)
    }

    /// Consistent tangent `∂F_full/∂u` at `u`.
    pub fn tangent(&self, u: &[f64]) -> Result<SparseSymmetricMatrix, FeError> {
        self.check(u)?;
        self.tangent_matrix(Some(&self.expand(u)))
    }

    fn tangent_matrix(&self, u: Option<&[f64]>) -> Result<SparseSymmetricMatrix, FeError> {
        let (lambda, mu) = self.material.lame();
        let nn = self.kernels.nodes_per_element;
        let nd = 3 * nn;
        let np = self.kernels.points_per_element;
        self.assemble_matrix(|e, ke| {
            let ue = u.map(|full| self.element_values(full, e));
            for q in 0..np {
                let (w, grads) = self.kernels.point(e, q);
                let h = ue.as_ref().map_or([[0.0; 3]; 3], |ue| gradient(grads, ue));
                let f: M3 = std::array::from_fn(|i| std::array::from_fn(|j| h[i][j] + if i == j { 1.0 } else { 0.0 }));
                let s = if u.is_some() {
                    let ftf = matmul(&transpose(&f), &f);
                    let e: M3 = std::array::from_fn(|i| {
                        std::array::from_fn(|j| 0.5 * (ftf[i][j] - if i == j { 1.0 } else { 0.0 }))
                    });
                    self.stress(&e)
                } else {
                    [[0.0; 3]; 3]
                };
                // B[a][i] = sym(F_i ⊗ ∇N_a) as the strain variation of a unit nodal displacement.
                let b: Vec<[M3; 3]> = grads
                    .iter()
                    .map(|g| std::array::from_fn(|i| sym(&std::array::from_fn(|m| std::array::from_fn(|n| f[i][m] * g[n])))))
                    .collect();
                let tr: Vec<[f64; 3]> = b.iter().map(|bi| bi.map(|m| m[0][0] + m[1][1] + m[2][2])).collect();
                for a in 0..nn {
                    let sga: [f64; 3] = std::array::from_fn(|j| (0..3).map(|k| s[j][k] * grads[a][k]).sum());
                    for c in 0..nn {
                        let geo: f64 = (0..3).map(|j| sga[j] * grads[c][j]).sum();
                        for i in 0..3 {
                            for k in 0..3 {
                                let dd: f64 =
                                    (0..3).flat_map(|m| (0..3).map(move |n| (m, n))).map(|(m, n)| b[a][i][m][n] * b[c][k][m][n]).sum();
                                let mut v = lambda * tr[a][i] * tr[c][k] + 2.0 * mu * dd;
                                if i == k {
                                    v += geo;
                                }
                                ke[(3 * a + i) * nd + 3 * c + k] += w * v;
                            }
                        }
                    }
                }
            }
        })
    }

    /// Consistent mass on the free DOFs.
    pub fn mass(&self) -> Result<SparseSymmetricMatrix, FeError> {
        let kind = self.mesh.kind;
        let r = rule(kind, RuleChoice::Mass);
        let nn = kind.nodes();
        let nd = 3 * nn;
        let rho = self.material.density;
        self.assemble_matrix(|e, me| {
            let mut values = vec![0.0; nn];
            let mut derivs = vec![[0.0; 3]; nn];
            for (p, wt) in r.points.iter().zip(&r.weights) {
                let (det, _) = invert(&self.mesh.jacobian(e, *p, &mut values, &mut derivs));
                let w = rho * wt * det;
                for a in 0..nn {
                    for c in 0..nn {
                        let v = w * values[a] * values[c];
                        for i in 0..3 {
                            me[(3 * a + i) * nd + 3 * c + i] += v;
                        }
                    }
                }
            }
        })
    }

    /// `(M, K)` on the free DOFs.
    pub fn linear(&self) -> Result<(SparseSymmetricMatrix, SparseSymmetricMatrix), FeError> {
        Ok((self.mass()?, self.stiffness()?))
    }

    /// Mechanical system whose operators are the intrusive element loops of `model`.
    pub fn system(model: &Arc<FeModel>) -> Result<MechanicalSystem, FeError> {
        let (m, k) = model.linear()?;
        let ops = Arc::new(FeOperators { model: Arc::clone(model) });
        Ok(MechanicalSystem::new(m, k, ops, model.constrained.clone())?)
    }
}

fn transpose(a: &M3) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

/// [`NonlinearOperators`] adapter for an [`FeModel`].
#[derive(Clone, Debug)]
pub struct FeOperators {
    pub model: Arc<FeModel>,
}

impl NonlinearOperators for FeOperators {
    fn dof_count(&self) -> usize {
        self.model.free_dof_count()
    }

    fn quadratic(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.model.quadratic_force(a, b).expect("length checked by the system")
    }

    fn cubic(&self, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
        self.model.cubic_force(a, b, c).expect("length checked by the system")
    }

    fn full_force(&self, u: &[f64]) -> Option<Vec<f64>> {
        self.model.full_internal_force(u).ok()
    }

    fn tangent_matrix(&self, u: &[f64]) -> Option<SparseSymmetricMatrix> {
        self.model.tangent(u).ok()
    }
}
