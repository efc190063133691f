//! P2/P1 Taylor-Hood discretization on [`TriMesh`].
//!
//! Scalar P2 nodes are the mesh vertices followed by the edge midpoints
//! (`vertex` and `num_vertices + edge`). Velocity coefficients are blocked
//! by component: all x-components, then all y-components, so velocity dof
//! `c * n_scalar + s` is component `c` at scalar node `s`. Pressure dofs are
//! the vertices.
//!
//! Forms assembled here:
//!
//! | matrix | form |
//! |--------|------|
//! | `K`    | `(grad u, grad v)` |
//! | `G`    | `(div u, div v)` |
//! | `A~`   | `nu K + gamma G` |
//! | `B`    | `-(q, div v)` |
//! | `Mp`   | `(p, q)` |
//! | `C(w)` | `((w . grad) u, v) + 1/2 ((div w) u, v)` |

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::mesh::{BoundaryTag, Point2, TriMesh};
use crate::quadrature::QuadratureRule;
use crate::sparse::{cholesky_factorize, CsrMatrix, MassPreconditioner, SchurOperator, SparseFactorization};
use crate::{Error, Result};

/// Quadrature degree used for load vectors and error norms.
pub const HIGH_ORDER_DEGREE: usize = 10;

/// Values and physical gradients of the six local P2 basis functions.
#[derive(Debug, Clone, Copy)]
pub struct P2Basis {
    pub values: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

/// Geometry and global numbering of one triangle.
///
/// Local P2 ordering: the three vertices, then the midpoints of the edges
/// opposite vertex 0, 1 and 2.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub vertices: [usize; 3],
    pub points: [Point2; 3],
    pub scalar_dofs: [usize; 6],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn point(&self, l: &[f64; 3]) -> Point2 {
        let p = &self.points;
        Point2::new(
            l[0] * p[0].x + l[1] * p[1].x + l[2] * p[2].x,
            l[0] * p[0].y + l[1] * p[1].y + l[2] * p[2].y,
        )
    }

    pub fn p2(&self, l: &[f64; 3]) -> P2Basis {
        let g = &self.grad_lambda;
        let mut values = [0.0; 6];
        let mut grads = [[0.0; 2]; 6];
        for i in 0..3 {
            values[i] = l[i] * (2.0 * l[i] - 1.0);
            let s = 4.0 * l[i] - 1.0;
            grads[i] = [s * g[i][0], s * g[i][1]];
        }
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            values[3 + k] = 4.0 * l[i] * l[j];
            grads[3 + k] = [
                4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
            ];
        }
        P2Basis { values, grads }
    }
}

#[derive(Debug, Clone)]
pub struct TaylorHoodSpace {
    mesh: TriMesh,
    n_scalar: usize,
    /// Boundary tag of each scalar node, `None` in the interior.
    node_tags: Vec<Option<BoundaryTag>>,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
    constrained: Vec<usize>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: TriMesh) -> Self {
        let nv = mesh.num_vertices();
        let n_scalar = nv + mesh.num_edges();
        let mut node_tags: Vec<Option<BoundaryTag>> = vec![None; n_scalar];
        for be in mesh.boundary_edges() {
            node_tags[nv + be.edge] = Some(be.tag);
            // corners shared by lid and wall are walls
            for &v in &be.vertices {
                node_tags[v] = match (node_tags[v], be.tag) {
                    (Some(BoundaryTag::Wall), _) | (_, BoundaryTag::Wall) => Some(BoundaryTag::Wall),
                    _ => Some(BoundaryTag::Lid),
                };
            }
        }
        let n_velocity = 2 * n_scalar;
        let mut free = Vec::new();
        let mut constrained = Vec::new();
        let mut free_index = vec![None; n_velocity];
        for d in 0..n_velocity {
            if node_tags[d % n_scalar].is_some() {
                constrained.push(d);
            } else {
                free_index[d] = Some(free.len());
                free.push(d);
            }
        }
        Self { mesh, n_scalar, node_tags, free, free_index, constrained }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn n_scalar(&self) -> usize {
        self.n_scalar
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_scalar
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    /// Position of each velocity dof among the free dofs.
    pub fn free_index(&self) -> &[Option<usize>] {
        &self.free_index
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.free_index[dof].is_none()
    }

    pub fn node_tag(&self, scalar: usize) -> Option<BoundaryTag> {
        self.node_tags[scalar]
    }

    pub fn node_point(&self, scalar: usize) -> Point2 {
        let nv = self.mesh.num_vertices();
        if scalar < nv {
            self.mesh.vertices()[scalar]
        } else {
            self.mesh.edge_midpoint(scalar - nv)
        }
    }

    pub fn element(&self, t: usize) -> Element {
        let vertices = self.mesh.triangles()[t];
        let points = self.mesh.triangle_points(t);
        let te = self.mesh.triangle_edges()[t];
        let off = self.mesh.midpoint_offset();
        let [p0, p1, p2] = points;
        let det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        let grad_lambda = [
            [(p1.y - p2.y) / det, (p2.x - p1.x) / det],
            [(p2.y - p0.y) / det, (p0.x - p2.x) / det],
            [(p0.y - p1.y) / det, (p1.x - p0.x) / det],
        ];
        Element {
            vertices,
            points,
            scalar_dofs: [vertices[0], vertices[1], vertices[2], off + te[0], off + te[1], off + te[2]],
            area: 0.5 * det,
            grad_lambda,
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.mesh.num_triangles()).map(|t| self.element(t))
    }

    /// Gathers the free entries of a full velocity vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Full velocity vector from free values plus constrained values taken
    /// from `dirichlet`.
    pub fn extend(&self, free_values: &[f64], dirichlet: &DirichletData) -> Vec<f64> {
        let mut full = dirichlet.values.clone();
        for (&d, &v) in self.free.iter().zip(free_values) {
            full[d] = v;
        }
        full
    }

    /// Nodal interpolation of a velocity field (P2) and a pressure (P1).
    pub fn interpolate(
        &self,
        u: impl Fn(Point2) -> [f64; 2],
        p: impl Fn(Point2) -> f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let ns = self.n_scalar;
        let mut uu = vec![0.0; 2 * ns];
        for s in 0..ns {
            let v = u(self.node_point(s));
            uu[s] = v[0];
            uu[ns + s] = v[1];
        }
        let pp = self.mesh.vertices().iter().map(|&x| p(x)).collect();
        (uu, pp)
    }

    /// Velocity and its gradient `grad[c][d] = d u_c / d x_d` at `p`.
    pub fn evaluate_velocity(&self, velocity: &[f64], p: Point2) -> Result<FieldValue> {
        self.check_velocity_len(velocity)?;
        let loc = self.mesh.locate(p)?;
        let el = self.element(loc.triangle);
        let b = el.p2(&loc.barycentric);
        Ok(self.velocity_at(velocity, &el, &b))
    }

    /// Velocity value and gradient from precomputed basis data.
    pub fn velocity_at(&self, velocity: &[f64], el: &Element, b: &P2Basis) -> FieldValue {
        let ns = self.n_scalar;
        let mut out = FieldValue::default();
        for (k, &s) in el.scalar_dofs.iter().enumerate() {
            for c in 0..2 {
                let coef = velocity[c * ns + s];
                out.value[c] += coef * b.values[k];
                out.gradient[c][0] += coef * b.grads[k][0];
                out.gradient[c][1] += coef * b.grads[k][1];
            }
        }
        out
    }

    pub fn evaluate_pressure(&self, pressure: &[f64], p: Point2) -> Result<f64> {
        if pressure.len() != self.n_pressure() {
            return Err(Error::DimensionMismatch { expected: self.n_pressure(), got: pressure.len() });
        }
        let loc = self.mesh.locate(p)?;
        let v = self.mesh.triangles()[loc.triangle];
        Ok((0..3).map(|i| loc.barycentric[i] * pressure[v[i]]).sum())
    }

    fn check_velocity_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_velocity() {
            return Err(Error::DimensionMismatch { expected: self.n_velocity(), got: v.len() });
        }
        Ok(())
    }

    /// `(grad u, grad v)` on the blocked vector space.
    pub fn assemble_stiffness(&self) -> CsrMatrix {
        let rule = QuadratureRule::seven_point();
        let ns = self.n_scalar;
        let mut t = Vec::with_capacity(self.mesh.num_triangles() * 72);
        for el in self.elements() {
            let mut local = [[0.0; 6]; 6];
            for (l, w) in rule.iter() {
                let b = el.p2(l);
                let wa = w * el.area;
                for i in 0..6 {
                    for j in 0..6 {
                        local[i][j] += wa * (b.grads[i][0] * b.grads[j][0] + b.grads[i][1] * b.grads[j][1]);
                    }
                }
            }
            for (i, &si) in el.scalar_dofs.iter().enumerate() {
                for (j, &sj) in el.scalar_dofs.iter().enumerate() {
                    t.push((si, sj, local[i][j]));
                    t.push((ns + si, ns + sj, local[i][j]));
                }
            }
        }
        CsrMatrix::from_triplets(2 * ns, 2 * ns, &t)
    }

    /// `(div u, div v)`.
    pub fn assemble_grad_div(&self) -> CsrMatrix {
        let rule = QuadratureRule::seven_point();
        let ns = self.n_scalar;
        let mut t = Vec::with_capacity(self.mesh.num_triangles() * 144);
        for el in self.elements() {
            // local[c][d][i][j] = int d_c phi_i * d_d phi_j
            let mut local = [[[[0.0; 6]; 6]; 2]; 2];
            for (l, w) in rule.iter() {
                let b = el.p2(l);
                let wa = w * el.area;
                for c in 0..2 {
                    for d in 0..2 {
                        for i in 0..6 {
                            for j in 0..6 {
                                local[c][d][i][j] += wa * b.grads[i][c] * b.grads[j][d];
                            }
                        }
                    }
                }
            }
            for c in 0..2 {
                for d in 0..2 {
                    for (i, &si) in el.scalar_dofs.iter().enumerate() {
                        for (j, &sj) in el.scalar_dofs.iter().enumerate() {
                            t.push((c * ns + si, d * ns + sj, local[c][d][i][j]));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(2 * ns, 2 * ns, &t)
    }

    /// `A~ = nu K + gamma G`.
    pub fn assemble_operator_a(&self, nu: f64, gamma: f64) -> CsrMatrix {
        self.assemble_stiffness().linear_combination(nu, &self.assemble_grad_div(), gamma)
    }

    /// `B[q, v] = -(psi_q, div phi_v)`, shape `n_pressure x n_velocity`.
    pub fn assemble_divergence(&self) -> CsrMatrix {
        let rule = QuadratureRule::seven_point();
        let ns = self.n_scalar;
        let mut t = Vec::with_capacity(self.mesh.num_triangles() * 36);
        for el in self.elements() {
            let mut local = [[[0.0; 6]; 3]; 2];
            for (l, w) in rule.iter() {
                let b = el.p2(l);
                let wa = w * el.area;
                for d in 0..2 {
                    for q in 0..3 {
                        for j in 0..6 {
                            local[d][q][j] -= wa * l[q] * b.grads[j][d];
                        }
                    }
                }
            }
            for d in 0..2 {
                for (q, &vq) in el.vertices.iter().enumerate() {
                    for (j, &sj) in el.scalar_dofs.iter().enumerate() {
                        t.push((vq, d * ns + sj, local[d][q][j]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n_pressure(), 2 * ns, &t)
    }

    /// P1 mass matrix.
    pub fn assemble_pressure_mass(&self) -> CsrMatrix {
        let rule = QuadratureRule::seven_point();
        let mut t = Vec::with_capacity(self.mesh.num_triangles() * 9);
        for el in self.elements() {
            let mut local = [[0.0; 3]; 3];
            for (l, w) in rule.iter() {
                for a in 0..3 {
                    for b in 0..3 {
                        local[a][b] += w * el.area * l[a] * l[b];
                    }
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    t.push((el.vertices[a], el.vertices[b], local[a][b]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_pressure(), self.n_pressure(), &t)
    }

    /// Skew-symmetrized convection matrix for the advecting field `w`.
    ///
    /// Row `(c, i)`, column `(c, j)` holds
    /// `int (w . grad phi_j) phi_i + 1/2 (div w) phi_j phi_i`; the two
    /// component blocks are identical and uncoupled.
    pub fn assemble_convection(&self, w: &[f64]) -> Result<CsrMatrix> {
        self.check_velocity_len(w)?;
        let rule = QuadratureRule::seven_point();
        let ns = self.n_scalar;
        let mut t = Vec::with_capacity(self.mesh.num_triangles() * 72);
        for el in self.elements() {
            let mut local = [[0.0; 6]; 6];
            for (l, wq) in rule.iter() {
                let b = el.p2(l);
                let wv = self.velocity_at(w, &el, &b);
                let div_w = wv.gradient[0][0] + wv.gradient[1][1];
                let wa = wq * el.area;
                for j in 0..6 {
                    let adv = wv.value[0] * b.grads[j][0] + wv.value[1] * b.grads[j][1] + 0.5 * div_w * b.values[j];
                    for i in 0..6 {
                        local[i][j] += wa * adv * b.values[i];
                    }
                }
            }
            for (i, &si) in el.scalar_dofs.iter().enumerate() {
                for (j, &sj) in el.scalar_dofs.iter().enumerate() {
                    t.push((si, sj, local[i][j]));
                    t.push((ns + si, ns + sj, local[i][j]));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(2 * ns, 2 * ns, &t))
    }

    /// `F_i = int f . phi_i` with the given rule.
    pub fn assemble_load(&self, f: impl Fn(Point2) -> [f64; 2], rule: &QuadratureRule) -> Vec<f64> {
        let ns = self.n_scalar;
        let mut load = vec![0.0; 2 * ns];
        for el in self.elements() {
            for (l, w) in rule.iter() {
                let b = el.p2(l);
                let fv = f(el.point(l));
                let wa = w * el.area;
                for (k, &s) in el.scalar_dofs.iter().enumerate() {
                    load[s] += wa * fv[0] * b.values[k];
                    load[ns + s] += wa * fv[1] * b.values[k];
                }
            }
        }
        load
    }

    /// Constrained values for the given boundary data.
    pub fn dirichlet_values(&self, bc: &BoundaryData) -> Result<DirichletData> {
        let ns = self.n_scalar;
        let mut values = vec![0.0; 2 * ns];
        for s in 0..ns {
            if let Some(tag) = self.node_tags[s] {
                let f = bc.by_tag.get(&tag).ok_or(Error::MissingBoundaryData(tag))?;
                let v = f(self.node_point(s));
                values[s] = v[0];
                values[ns + s] = v[1];
            }
        }
        Ok(DirichletData { values })
    }
}

/// Point value of a P2 velocity field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldValue {
    pub value: [f64; 2],
    /// `gradient[c][d] = d u_c / d x_d`
    pub gradient: [[f64; 2]; 2],
}

impl FieldValue {
    pub fn divergence(&self) -> f64 {
        self.gradient[0][0] + self.gradient[1][1]
    }
}

pub type VelocityFn = Arc<dyn Fn(Point2) -> [f64; 2] + Send + Sync>;

/// Velocity data per boundary tag.
#[derive(Clone, Default)]
pub struct BoundaryData {
    by_tag: BTreeMap<BoundaryTag, VelocityFn>,
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData").field("tags", &self.by_tag.keys().collect::<Vec<_>>()).finish()
    }
}

impl BoundaryData {
    pub fn new() -> Self {
        Self::default()
    }

    /// No-slip on every tag.
    pub fn homogeneous() -> Self {
        Self::new().with(BoundaryTag::Wall, |_| [0.0, 0.0]).with(BoundaryTag::Lid, |_| [0.0, 0.0])
    }

    pub fn with(mut self, tag: BoundaryTag, f: impl Fn(Point2) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.by_tag.insert(tag, Arc::new(f));
        self
    }
}

/// Constrained velocity values as a full-length vector (zero on free dofs).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    pub values: Vec<f64>,
}

impl DirichletData {
    pub fn is_homogeneous(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Assembled operators for fixed `nu` and `gamma` on all dofs.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub space: Arc<TaylorHoodSpace>,
    pub nu: f64,
    pub gamma: f64,
    /// Velocity H1-seminorm Gram matrix.
    pub stiffness: CsrMatrix,
    /// Divergence Gram matrix.
    pub grad_div: CsrMatrix,
    pub a_tilde: CsrMatrix,
    pub divergence: CsrMatrix,
    pub pressure_mass: CsrMatrix,
    pub load: Vec<f64>,
}

impl DiscreteSystem {
    pub fn assemble(
        space: Arc<TaylorHoodSpace>,
        nu: f64,
        gamma: f64,
        forcing: impl Fn(Point2) -> [f64; 2],
    ) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("viscosity must be positive, got {nu}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("grad-div parameter must be nonnegative, got {gamma}")));
        }
        let stiffness = space.assemble_stiffness();
        let grad_div = space.assemble_grad_div();
        let a_tilde = stiffness.linear_combination(nu, &grad_div, gamma);
        let divergence = space.assemble_divergence();
        let pressure_mass = space.assemble_pressure_mass();
        let load = space.assemble_load(forcing, &QuadratureRule::collapsed(HIGH_ORDER_DEGREE));
        Ok(Self { space, nu, gamma, stiffness, grad_div, a_tilde, divergence, pressure_mass, load })
    }

    /// Splits into free/constrained blocks and lifts the boundary data.
    pub fn apply_dirichlet(self, bc: &BoundaryData) -> Result<ConstrainedSystem> {
        let dirichlet = self.space.dirichlet_values(bc)?;
        ConstrainedSystem::new(self, dirichlet)
    }
}

/// Free-dof operators with boundary lifting and cached factorizations.
pub struct ConstrainedSystem {
    system: DiscreteSystem,
    dirichlet: DirichletData,
    a_ff: CsrMatrix,
    k_ff: CsrMatrix,
    g_ff: CsrMatrix,
    b_f: CsrMatrix,
    /// `F_f - (A~ g)_f`
    lifted_load: Vec<f64>,
    /// `-B_c g`
    divergence_lifting: Vec<f64>,
    a_factor: OnceLock<Arc<SparseFactorization>>,
    mass_precond: OnceLock<Arc<MassPreconditioner>>,
}

impl std::fmt::Debug for ConstrainedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedSystem")
            .field("n_free", &self.n_free())
            .field("n_pressure", &self.n_pressure())
            .field("nu", &self.system.nu)
            .field("gamma", &self.system.gamma)
            .finish()
    }
}

impl ConstrainedSystem {
    pub fn new(system: DiscreteSystem, dirichlet: DirichletData) -> Result<Self> {
        let space = system.space.clone();
        if dirichlet.values.len() != space.n_velocity() {
            return Err(Error::DimensionMismatch { expected: space.n_velocity(), got: dirichlet.values.len() });
        }
        let free = space.free_dofs();
        let map = space.free_index();
        let nf = space.n_free();
        let a_ff = system.a_tilde.submatrix(free, map, nf);
        let k_ff = system.stiffness.submatrix(free, map, nf);
        let g_ff = system.grad_div.submatrix(free, map, nf);
        let all_p: Vec<usize> = (0..space.n_pressure()).collect();
        let b_f = system.divergence.submatrix(&all_p, map, nf);

        let ag = system.a_tilde.mul_vec(&dirichlet.values);
        let lifted_load = free.iter().map(|&d| system.load[d] - ag[d]).collect();
        let divergence_lifting = system.divergence.mul_vec(&dirichlet.values).iter().map(|v| -v).collect();

        Ok(Self {
            system,
            dirichlet,
            a_ff,
            k_ff,
            g_ff,
            b_f,
            lifted_load,
            divergence_lifting,
            a_factor: OnceLock::new(),
            mass_precond: OnceLock::new(),
        })
    }

    pub fn system(&self) -> &DiscreteSystem {
        &self.system
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        &self.system.space
    }

    pub fn nu(&self) -> f64 {
        self.system.nu
    }

    pub fn gamma(&self) -> f64 {
        self.system.gamma
    }

    pub fn n_free(&self) -> usize {
        self.a_ff.nrows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b_f.nrows()
    }

    pub fn dirichlet(&self) -> &DirichletData {
        &self.dirichlet
    }

    /// `A~` on free dofs.
    pub fn a_tilde_ff(&self) -> &CsrMatrix {
        &self.a_ff
    }

    pub fn stiffness_ff(&self) -> &CsrMatrix {
        &self.k_ff
    }

    pub fn grad_div_ff(&self) -> &CsrMatrix {
        &self.g_ff
    }

    /// `B` restricted to free velocity columns.
    pub fn divergence_free_cols(&self) -> &CsrMatrix {
        &self.b_f
    }

    pub fn pressure_mass(&self) -> &CsrMatrix {
        &self.system.pressure_mass
    }

    pub fn lifted_load(&self) -> &[f64] {
        &self.lifted_load
    }

    pub fn divergence_lifting(&self) -> &[f64] {
        &self.divergence_lifting
    }

    /// Cholesky factorization of `A~_ff`, computed on first use.
    pub fn a_tilde_factor(&self) -> Result<Arc<SparseFactorization>> {
        if let Some(f) = self.a_factor.get() {
            return Ok(f.clone());
        }
        let f = Arc::new(cholesky_factorize(&self.a_ff)?);
        Ok(self.a_factor.get_or_init(|| f).clone())
    }

    pub fn mass_preconditioner(&self) -> Result<Arc<MassPreconditioner>> {
        if let Some(m) = self.mass_precond.get() {
            return Ok(m.clone());
        }
        let m = Arc::new(MassPreconditioner::new(&self.system.pressure_mass)?);
        Ok(self.mass_precond.get_or_init(|| m).clone())
    }

    pub fn schur_operator(&self) -> Result<SchurOperator> {
        SchurOperator::new(self.b_f.clone(), self.a_tilde_factor()?)
    }

    /// Full velocity vector with boundary values.
    pub fn extend(&self, free_values: &[f64]) -> Vec<f64> {
        self.space().extend(free_values, &self.dirichlet)
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.space().restrict(full)
    }

    /// `A_ff = A~_ff + C_ff(w)` and the right-hand side
    /// `F_f - ((A~ + C(w)) g)_f` for one linearized momentum solve.
    pub fn linearized_operator(&self, w: &[f64]) -> Result<(CsrMatrix, Vec<f64>)> {
        let space = self.space();
        let c = space.assemble_convection(w)?;
        let c_ff = c.submatrix(space.free_dofs(), space.free_index(), space.n_free());
        let a = self.a_ff.linear_combination(1.0, &c_ff, 1.0);
        let rhs = if self.dirichlet.is_homogeneous() {
            self.lifted_load.clone()
        } else {
            let cg = c.mul_vec(&self.dirichlet.values);
            space.free_dofs().iter().zip(&self.lifted_load).map(|(&d, l)| l - cg[d]).collect()
        };
        Ok((a, rhs))
    }

    /// Shifts a pressure vector to zero `Mp`-weighted mean.
    pub fn zero_mean_pressure(&self, p: &mut [f64]) {
        let ones = vec![1.0; p.len()];
        let mp1 = self.system.pressure_mass.mul_vec(&ones);
        let area: f64 = mp1.iter().sum();
        let mean = crate::sparse::dot(&mp1, p) / area;
        p.iter_mut().for_each(|v| *v -= mean);
    }
}
