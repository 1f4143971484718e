//! Best constant of the weighted Poincaré inequality on the sphere
//!
//! ∫|∇g|² M ≥ Λ_κ (∫g² M − (∫g M)²),
//!
//! with M the von Mises density of concentration κ. Separating variables in
//! the polar angle reduces it to a family of Sturm–Liouville problems on
//! (0, π) with weight m(θ) = e^{κ cos θ} sin^{n−2}θ:
//!
//! −(1/m)(m g′)′ + ℓ(ℓ + n − 3) g / sin²θ = Λ g.
//!
//! Only the sectors ℓ = 0 (whose lowest mode is the constant) and ℓ = 1 can
//! carry the minimum. On the circle (n = 2) the two "sectors" are the even
//! and odd parts of g, which translate into Neumann and Dirichlet conditions
//! at θ = 0 and θ = π.
//!
//! The discretization is a cell-centred finite-volume scheme: nodes
//! θ_i = (i + ½)π/N, weight sampled at cell faces for the stiffness and at
//! nodes for the mass. Scaling by the square root of the diagonal mass turns
//! the generalized problem into a symmetric tridiagonal one, solved by
//! Sturm-sequence bisection. All weight ratios are formed from logarithms so
//! that large κ cannot overflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::SymTridiagonal;
use crate::scalar::Scalar;
use crate::vonmises::Dimension;

pub const MIN_MESH: usize = 16;
pub const DEFAULT_MESH: usize = 2000;
/// Relative change under mesh doubling above which a value is rejected.
pub const MESH_TOL: f64 = 1e-3;
const MAX_MESH: usize = 128_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareProblem<T> {
    pub kappa: T,
    pub n: Dimension,
    pub mesh_size: usize,
}

impl<T: Scalar> PoincareProblem<T> {
    pub fn new(kappa: T, n: Dimension, mesh_size: usize) -> Result<Self> {
        if !(kappa >= T::zero() && kappa.is_finite()) {
            return Err(domain("kappa", kappa.as_f64(), "kappa >= 0"));
        }
        if mesh_size < MIN_MESH {
            return Err(domain("mesh_size", mesh_size as f64, "mesh_size >= 16"));
        }
        Ok(Self { kappa, n, mesh_size })
    }

    fn refined(&self) -> Self {
        Self {
            mesh_size: self.mesh_size * 2,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    /// ℓ = 0: functions of θ alone (even part on the circle).
    Axisymmetric,
    /// ℓ = 1 (odd part on the circle).
    FirstHarmonic,
}

/// Nodes and log-weights of the discretized problem.
struct Mesh<T> {
    step: T,
    theta: Vec<T>,
    /// ln m at the nodes.
    node: Vec<T>,
    /// ln m at the N + 1 faces, including θ = 0 and θ = π.
    face: Vec<T>,
}

fn log_weight<T: Scalar>(theta: T, kappa: T, n: Dimension) -> T {
    // ln(e^{κ(cos θ − 1)} sin^{n−2}θ); the constant e^{κ} cancels everywhere
    let p = T::from_count(n.get() as usize - 2);
    let sh = (theta * T::lit(0.5)).sin();
    let exponent = -kappa * T::lit(2.0) * sh * sh;
    if p == T::zero() {
        exponent
    } else {
        exponent + p * theta.sin().ln()
    }
}

impl<T: Scalar> Mesh<T> {
    fn new(problem: &PoincareProblem<T>) -> Self {
        let n = problem.mesh_size;
        let step = T::PI() / T::from_count(n);
        let half = T::lit(0.5);
        let theta: Vec<T> = (0..n).map(|i| (T::from_count(i) + half) * step).collect();
        let node = theta.iter().map(|&t| log_weight(t, problem.kappa, problem.n)).collect();
        let face = (0..=n)
            .map(|i| {
                if problem.n.get() > 2 && (i == 0 || i == n) {
                    T::neg_infinity()
                } else {
                    log_weight(T::from_count(i) * step, problem.kappa, problem.n)
                }
            })
            .collect();
        Self { step, theta, node, face }
    }

    /// Face weight over node weight, m_face / m_node.
    fn ratio(&self, face: usize, node: usize) -> T {
        (self.face[face] - self.node[node]).exp()
    }

    fn operator(&self, n: Dimension, sector: Sector) -> SymTridiagonal<T> {
        let size = self.theta.len();
        let inv_h2 = T::one() / (self.step * self.step);
        let half = T::lit(0.5);
        // no flux through θ = 0 and θ = π: only interior faces contribute
        let mut diag: Vec<T> = (0..size)
            .map(|i| {
                let left = if i > 0 { self.ratio(i, i) } else { T::zero() };
                let right = if i + 1 < size { self.ratio(i + 1, i) } else { T::zero() };
                (left + right) * inv_h2
            })
            .collect();
        let off = (0..size - 1)
            .map(|i| -(self.face[i + 1] - (self.node[i] + self.node[i + 1]) * half).exp() * inv_h2)
            .collect();
        if sector == Sector::FirstHarmonic {
            if n.get() == 2 {
                // odd part: ghost values g_{-1} = -g_0 and g_N = -g_{N-1}
                let two = T::lit(2.0);
                diag[0] = diag[0] + two * self.ratio(0, 0) * inv_h2;
                diag[size - 1] = diag[size - 1] + two * self.ratio(size, size - 1) * inv_h2;
            } else {
                let potential = T::from_count(n.get() as usize - 2);
                for (d, &t) in diag.iter_mut().zip(&self.theta) {
                    let s = t.sin();
                    *d = *d + potential / (s * s);
                }
            }
        }
        SymTridiagonal { diag, off }
    }
}

/// Smallest relevant eigenvalue of one sector on the given mesh.
fn sector_eigenvalue<T: Scalar>(mesh: &Mesh<T>, n: Dimension, sector: Sector) -> T {
    let op = mesh.operator(n, sector);
    match sector {
        // index 0 is the constant mode
        Sector::Axisymmetric => op.eigenvalue(1),
        Sector::FirstHarmonic => op.eigenvalue(0),
    }
}

fn solve_on_mesh<T: Scalar>(problem: &PoincareProblem<T>) -> (T, Sector) {
    let mesh = Mesh::new(problem);
    let a = sector_eigenvalue(&mesh, problem.n, Sector::Axisymmetric);
    let b = sector_eigenvalue(&mesh, problem.n, Sector::FirstHarmonic);
    if a <= b {
        (a, Sector::Axisymmetric)
    } else {
        (b, Sector::FirstHarmonic)
    }
}

/// Λ_κ on the problem's mesh, rejected with [`Error::MeshUnresolved`] if
/// doubling the mesh moves it by more than [`MESH_TOL`] relative.
pub fn poincare_constant<T: Scalar>(problem: &PoincareProblem<T>) -> Result<T> {
    let (coarse, _) = solve_on_mesh(problem);
    let (fine, _) = solve_on_mesh(&problem.refined());
    let change = ((fine - coarse) / fine).abs();
    if !(change <= T::lit(MESH_TOL)) {
        return Err(Error::MeshUnresolved {
            kappa: problem.kappa.as_f64(),
            change: change.as_f64(),
        });
    }
    Ok(coarse)
}

/// Λ_κ starting from [`DEFAULT_MESH`] and doubling until two successive
/// meshes agree to [`MESH_TOL`]; the finer value is returned.
pub fn poincare_constant_converged<T: Scalar>(kappa: T, n: Dimension) -> Result<T> {
    let mut problem = PoincareProblem::new(kappa, n, DEFAULT_MESH)?;
    let (mut prev, _) = solve_on_mesh(&problem);
    loop {
        problem = problem.refined();
        let (cur, _) = solve_on_mesh(&problem);
        let change = ((cur - prev) / cur).abs();
        if change <= T::lit(MESH_TOL) {
            return Ok(cur);
        }
        if problem.mesh_size >= MAX_MESH {
            return Err(Error::MeshUnresolved {
                kappa: kappa.as_f64(),
                change: change.as_f64(),
            });
        }
        prev = cur;
    }
}

/// A discrete eigenpair: Λ, the sector attaining it, and the eigenfunction
/// sampled at the nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair<T> {
    pub lambda: T,
    pub sector: Sector,
    pub theta: Vec<T>,
    pub g: Vec<T>,
}

/// The minimizing eigenpair on the problem's mesh (no mesh check).
pub fn eigenpair<T: Scalar>(problem: &PoincareProblem<T>) -> Eigenpair<T> {
    let mesh = Mesh::new(problem);
    let (lambda, sector) = solve_on_mesh(problem);
    let op = mesh.operator(problem.n, sector);
    let y = op.eigenvector(lambda);
    let top = mesh.node.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let half = T::lit(0.5);
    let g = y
        .iter()
        .zip(&mesh.node)
        .map(|(&yi, &ln_m)| yi * (-(ln_m - top) * half).exp())
        .collect();
    Eigenpair {
        lambda,
        sector,
        theta: mesh.theta,
        g,
    }
}

/// Discrete quadratic forms of the inequality for a nodal function `g`:
/// (∫|∇g|² M, ∫g² M − (∫g M)²), both under the normalized weight. In the
/// first-harmonic sector the mean term is dropped, since the angular factor
/// integrates to zero.
pub fn rayleigh_forms<T: Scalar>(problem: &PoincareProblem<T>, sector: Sector, g: &[T]) -> (T, T) {
    let mesh = Mesh::new(problem);
    let size = mesh.theta.len();
    let top = mesh.node.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let w = |ln_m: T| (ln_m - top).exp();
    let h = mesh.step;
    let mut dirichlet = T::zero();
    for i in 0..size - 1 {
        let d = (g[i + 1] - g[i]) / h;
        dirichlet = dirichlet + w(mesh.face[i + 1]) * d * d * h;
    }
    if sector == Sector::FirstHarmonic {
        if problem.n.get() == 2 {
            let two = T::lit(2.0);
            for (face, node) in [(0, 0), (size, size - 1)] {
                let d = two * g[node] / h;
                dirichlet = dirichlet + w(mesh.face[face]) * d * d * h * T::lit(0.5);
            }
        } else {
            let potential = T::from_count(problem.n.get() as usize - 2);
            for ((&th, &ln_m), &gi) in mesh.theta.iter().zip(&mesh.node).zip(g) {
                let s = th.sin();
                dirichlet = dirichlet + potential / (s * s) * w(ln_m) * gi * gi * h;
            }
        }
    }
    let (mut z, mut first, mut second) = (T::zero(), T::zero(), T::zero());
    for (&ln_m, &gi) in mesh.node.iter().zip(g) {
        let m = w(ln_m) * h;
        z = z + m;
        first = first + m * gi;
        second = second + m * gi * gi;
    }
    let mean = first / z;
    let variance = match sector {
        Sector::Axisymmetric => second / z - mean * mean,
        Sector::FirstHarmonic => second / z,
    };
    (dirichlet / z, variance)
}

/// Λ_κ tabulated on a κ grid, with a monotone cubic (PCHIP) interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareTable<T> {
    pub n: Dimension,
    pub mesh_size: usize,
    pub kappa: Vec<T>,
    pub lambda: Vec<T>,
}

pub fn poincare_table<T: Scalar>(kappa_grid: &[T], n: Dimension, mesh_size: usize) -> Result<PoincareTable<T>> {
    for (i, &k) in kappa_grid.iter().enumerate() {
        if !(k >= T::zero()) {
            return Err(domain("kappa", k.as_f64(), "kappa >= 0"));
        }
        if i > 0 && !(k > kappa_grid[i - 1]) {
            return Err(domain("kappa", k.as_f64(), "kappa grid strictly increasing"));
        }
    }
    let lambda = kappa_grid
        .par_iter()
        .map(|&k| poincare_constant(&PoincareProblem::new(k, n, mesh_size)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(PoincareTable {
        n,
        mesh_size,
        kappa: kappa_grid.to_vec(),
        lambda,
    })
}

impl<T: Scalar> PoincareTable<T> {
    fn slopes(&self) -> Vec<T> {
        let x = &self.kappa;
        let y = &self.lambda;
        let m = x.len();
        let delta: Vec<T> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![T::zero(); m];
        d[0] = delta[0];
        d[m - 1] = delta[m - 2];
        let two = T::lit(2.0);
        for k in 1..m - 1 {
            if delta[k - 1] * delta[k] <= T::zero() {
                continue;
            }
            let h0 = x[k] - x[k - 1];
            let h1 = x[k + 1] - x[k];
            let w1 = two * h1 + h0;
            let w2 = h1 + two * h0;
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
        d
    }

    /// Monotone cubic interpolation of Λ at `kappa` within the table range.
    pub fn interpolate(&self, kappa: T) -> Result<T> {
        let x = &self.kappa;
        let m = x.len();
        if m == 0 || !(kappa >= x[0] && kappa <= x[m - 1]) {
            return Err(Error::OutOfRange {
                name: "kappa",
                value: kappa.as_f64(),
                limit: x.last().map_or(f64::NAN, |v| v.as_f64()),
            });
        }
        if m == 1 {
            return Ok(self.lambda[0]);
        }
        let i = match x.iter().position(|&v| v > kappa) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => m - 2,
        };
        let d = self.slopes();
        let h = x[i + 1] - x[i];
        let s = (kappa - x[i]) / h;
        let (two, three) = (T::lit(2.0), T::lit(3.0));
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        Ok(h00 * self.lambda[i] + h10 * h * d[i] + h01 * self.lambda[i + 1] + h11 * h * d[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_gap_of_uniform_weight() {
        for (n, gap) in [(Dimension::TWO, 1.0f64), (Dimension::THREE, 2.0), (Dimension::new(4).unwrap(), 3.0)] {
            let (lambda, _) = solve_on_mesh(&PoincareProblem::new(0.0, n, 1000).unwrap());
            assert!((lambda - gap).abs() < 1e-5, "n={n}: {lambda}");
        }
    }

    #[test]
    fn second_order_mesh_convergence() {
        let p = PoincareProblem::new(1.0f64, Dimension::THREE, 200).unwrap();
        let l1 = solve_on_mesh(&p).0;
        let l2 = solve_on_mesh(&p.refined()).0;
        let l3 = solve_on_mesh(&p.refined().refined()).0;
        let order = ((l1 - l2) / (l2 - l3)).abs().log2();
        assert!(order > 1.8 && order < 2.2, "observed order {order}");
    }

    #[test]
    fn eigenpair_satisfies_rayleigh_identity() {
        for (kappa, n) in [(0.0f64, Dimension::TWO), (1.2619, Dimension::TWO), (2.0, Dimension::THREE), (5.0, Dimension::THREE)] {
            let p = PoincareProblem::new(kappa, n, 400).unwrap();
            let pair = eigenpair(&p);
            let (d, v) = rayleigh_forms(&p, pair.sector, &pair.g);
            assert!(((d - pair.lambda * v) / d).abs() < 1e-8, "kappa={kappa}");
        }
    }

    #[test]
    fn coarse_mesh_is_flagged_for_concentrated_weight() {
        let p = PoincareProblem::new(2000.0, Dimension::TWO, 16).unwrap();
        assert!(matches!(poincare_constant(&p), Err(Error::MeshUnresolved { .. })));
    }

    #[test]
    fn invalid_problems_are_rejected() {
        assert!(PoincareProblem::new(-1.0, Dimension::TWO, 100).is_err());
        assert!(PoincareProblem::new(1.0, Dimension::TWO, 8).is_err());
    }

    #[test]
    fn table_is_positive_continuous_and_interpolates() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let table = poincare_table(&grid, Dimension::TWO, 400).unwrap();
        assert!((table.lambda[0] - 1.0).abs() < 1e-5);
        assert!(table.lambda.iter().all(|&l| l > 0.0));
        for w in table.lambda.windows(2) {
            assert!(((w[1] - w[0]) / w[0]).abs() < 0.1);
        }
        for (i, &k) in grid.iter().enumerate() {
            assert_eq!(table.interpolate(k).unwrap(), table.lambda[i]);
        }
        let mid = table.interpolate(1.05).unwrap();
        let lo = table.lambda[10].min(table.lambda[11]);
        let hi = table.lambda[10].max(table.lambda[11]);
        assert!(mid >= lo && mid <= hi);
        assert!(table.interpolate(3.0).is_err());
    }
}
