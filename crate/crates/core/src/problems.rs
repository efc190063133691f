//! Benchmark problems on the unit square.

use std::sync::Arc;

use crate::fe::{BoundaryData, ConstrainedSystem, DiscreteSystem, TaylorHoodSpace};
use crate::mesh::{BoundaryTag, Point2, TriMesh};
use crate::Result;

/// Manufactured solution with stream function `(x^2 - x)^2 (y^2 - y)^2`
/// and pressure `(2x - 1)(2y - 1)`.
///
/// The velocity is a curl, hence exactly divergence-free, and vanishes on
/// the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub nu: f64,
}

/// `q(t) = (t^2 - t)^2` and its first three derivatives.
fn quartic(t: f64) -> [f64; 4] {
    let s = t * t - t;
    let ds = 2.0 * t - 1.0;
    [s * s, 2.0 * s * ds, 2.0 * ds * ds + 4.0 * s, 12.0 * ds]
}

impl ManufacturedSolution {
    pub fn new(nu: f64) -> Self {
        Self { nu }
    }

    pub fn velocity(&self, p: Point2) -> [f64; 2] {
        let qx = quartic(p.x);
        let qy = quartic(p.y);
        [qx[0] * qy[1], -qx[1] * qy[0]]
    }

    /// `grad[c][d] = d u_c / d x_d`.
    pub fn velocity_gradient(&self, p: Point2) -> [[f64; 2]; 2] {
        let qx = quartic(p.x);
        let qy = quartic(p.y);
        [[qx[1] * qy[1], qx[0] * qy[2]], [-qx[2] * qy[0], -qx[1] * qy[1]]]
    }

    pub fn pressure(&self, p: Point2) -> f64 {
        (2.0 * p.x - 1.0) * (2.0 * p.y - 1.0)
    }

    /// `f = -nu lap u + (u . grad) u + grad p`; the grad-div term drops out.
    pub fn forcing(&self, p: Point2) -> [f64; 2] {
        let qx = quartic(p.x);
        let qy = quartic(p.y);
        let u = self.velocity(p);
        let g = self.velocity_gradient(p);
        let lap = [qx[2] * qy[1] + qx[0] * qy[3], -qx[3] * qy[0] - qx[1] * qy[2]];
        let grad_p = [2.0 * (2.0 * p.y - 1.0), 2.0 * (2.0 * p.x - 1.0)];
        let mut f = [0.0; 2];
        for c in 0..2 {
            let adv = u[0] * g[c][0] + u[1] * g[c][1];
            f[c] = -self.nu * lap[c] + adv + grad_p[c];
        }
        f
    }

    pub fn build(&self, n: usize, gamma: f64) -> Result<ConstrainedSystem> {
        let space = Arc::new(TaylorHoodSpace::new(TriMesh::unit_square(n)?));
        let this = *self;
        DiscreteSystem::assemble(space, self.nu, gamma, move |p| this.forcing(p))?
            .apply_dirichlet(&BoundaryData::homogeneous())
    }
}

/// Regularized lid profile `[1 - (2x - 1)^8]^2`.
pub fn regularized_lid(x: f64) -> f64 {
    let t = (2.0 * x - 1.0).powi(8);
    (1.0 - t) * (1.0 - t)
}

/// Lid-driven cavity with unit lid speed: `Re = 1 / nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidDrivenCavity {
    pub reynolds: f64,
    /// Use the regularized lid; otherwise the lid velocity is 1 on the whole
    /// open top side.
    pub regularized: bool,
}

impl LidDrivenCavity {
    pub fn new(reynolds: f64) -> Self {
        Self { reynolds, regularized: true }
    }

    pub fn nu(&self) -> f64 {
        1.0 / self.reynolds
    }

    pub fn lid_velocity(&self, x: f64) -> f64 {
        if self.regularized {
            regularized_lid(x)
        } else {
            1.0
        }
    }

    pub fn boundary_data(&self) -> BoundaryData {
        let this = *self;
        BoundaryData::new()
            .with(BoundaryTag::Wall, |_| [0.0, 0.0])
            .with(BoundaryTag::Lid, move |p| [this.lid_velocity(p.x), 0.0])
    }

    pub fn build(&self, n: usize, gamma: f64) -> Result<ConstrainedSystem> {
        let space = Arc::new(TaylorHoodSpace::new(TriMesh::unit_square(n)?));
        self.build_on(space, gamma)
    }

    /// Reuses an existing space, e.g. along a Reynolds continuation.
    pub fn build_on(&self, space: Arc<TaylorHoodSpace>, gamma: f64) -> Result<ConstrainedSystem> {
        DiscreteSystem::assemble(space, self.nu(), gamma, |_| [0.0, 0.0])?.apply_dirichlet(&self.boundary_data())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const H: f64 = 1e-5;

    fn fd_gradient(f: impl Fn(Point2) -> f64, p: Point2) -> [f64; 2] {
        [
            (f(Point2::new(p.x + H, p.y)) - f(Point2::new(p.x - H, p.y))) / (2.0 * H),
            (f(Point2::new(p.x, p.y + H)) - f(Point2::new(p.x, p.y - H))) / (2.0 * H),
        ]
    }

    /// Independent oracle: the velocity written out exactly as the two
    /// component formulas, differentiated by central differences.
    fn oracle_u(p: Point2) -> [f64; 2] {
        let (x, y) = (p.x, p.y);
        [
            2.0 * (x * x - x).powi(2) * (y * y - y) * (2.0 * y - 1.0),
            -2.0 * (y * y - y).powi(2) * (x * x - x) * (2.0 * x - 1.0),
        ]
    }

    fn oracle_forcing(nu: f64, p: Point2) -> [f64; 2] {
        let u = oracle_u(p);
        let mut f = [0.0; 2];
        for c in 0..2 {
            let uc = |q: Point2| oracle_u(q)[c];
            let g = fd_gradient(uc, p);
            let lap = {
                let c0 = uc(p);
                (uc(Point2::new(p.x + H, p.y)) + uc(Point2::new(p.x - H, p.y)) + uc(Point2::new(p.x, p.y + H))
                    + uc(Point2::new(p.x, p.y - H))
                    - 4.0 * c0)
                    / (H * H)
            };
            let gp = fd_gradient(|q| (2.0 * q.x - 1.0) * (2.0 * q.y - 1.0), p);
            f[c] = -nu * lap + u[0] * g[0] + u[1] * g[1] + gp[c];
        }
        f
    }

    #[test]
    fn velocity_matches_component_formulas() {
        let m = ManufacturedSolution::new(1.0);
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let p = Point2::new(rng.gen(), rng.gen());
            let (a, b) = (m.velocity(p), oracle_u(p));
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_centre_and_boundary_values() {
        let m = ManufacturedSolution::new(1.0);
        assert_eq!(m.velocity(Point2::new(0.5, 0.5)), [0.0, 0.0]);
        for t in [0.0, 0.3, 1.0] {
            for p in [Point2::new(t, 0.0), Point2::new(t, 1.0), Point2::new(0.0, t), Point2::new(1.0, t)] {
                assert_eq!(m.velocity(p), [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn gradient_and_divergence() {
        let m = ManufacturedSolution::new(1.0);
        let mut rng = StdRng::seed_from_u64(18);
        for _ in 0..50 {
            let p = Point2::new(rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
            let g = m.velocity_gradient(p);
            for c in 0..2 {
                let fd = fd_gradient(|q| oracle_u(q)[c], p);
                assert!((g[c][0] - fd[0]).abs() < 1e-8 && (g[c][1] - fd[1]).abs() < 1e-8);
            }
            assert!((g[0][0] + g[1][1]).abs() < 1e-15);
        }
    }

    #[test]
    fn forcing_matches_finite_difference_oracle() {
        let mut rng = StdRng::seed_from_u64(19);
        for nu in [1.0, 0.01] {
            let m = ManufacturedSolution::new(nu);
            for _ in 0..50 {
                let p = Point2::new(rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
                let (f, o) = (m.forcing(p), oracle_forcing(nu, p));
                assert!((f[0] - o[0]).abs() < 1e-6 && (f[1] - o[1]).abs() < 1e-6, "{f:?} vs {o:?}");
            }
        }
    }

    #[test]
    fn lid_profile() {
        assert_eq!(regularized_lid(0.5), 1.0);
        assert_eq!(regularized_lid(0.0), 0.0);
        assert_eq!(regularized_lid(1.0), 0.0);
        assert!(regularized_lid(0.25) > 0.99);
        let c = LidDrivenCavity::new(400.0);
        assert!((c.nu() - 0.0025).abs() < 1e-18);
    }
}
