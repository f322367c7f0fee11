//! Differential geometry of an MP-system on the closed coordinate ball `|x| ≤ R`.
//!
//! All tensors are handled in the global Cartesian chart. Index conventions:
//!
//! * `dg[k][i][j] = ∂_k g_ij`
//! * `gamma[i][j][k] = Γ^i_jk`
//! * `omega[i][j] = Ω_ij = ∂_i α_j − ∂_j α_i`
//! * `lorentz[i][j] = Y^i_j`, so that `Ω(u, v) = (Y u, v)_g`.

use crate::error::{Error, Result};
use crate::fieldexpr::{Expr, Jet1, Jet2, Scalar};
use crate::linalg::{self, inner, zero_matrix, zero_vector};
use crate::{Matrix, Vector, MAX_DIM};

/// Riemannian metric given either as `c(x)·δ` or as a full symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Conformal(Expr),
    Full(Vec<Vec<Expr>>),
}

impl Metric {
    pub fn euclidean() -> Metric {
        Metric::Conformal(Expr::one())
    }

    /// Full metric from a square array of expressions. The array must be
    /// symmetric entry by entry (compared through the canonical printer).
    pub fn full(rows: Vec<Vec<Expr>>) -> Result<Metric> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSystem("metric must be a square array".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j].to_string() != rows[j][i].to_string() {
                    return Err(Error::InvalidSystem(format!(
                        "metric entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Metric::Full(rows))
    }

    pub fn entry(&self, i: usize, j: usize) -> Expr {
        match self {
            Metric::Conformal(c) => {
                if i == j {
                    c.clone()
                } else {
                    Expr::zero()
                }
            }
            Metric::Full(rows) => rows[i][j].clone(),
        }
    }

    pub fn to_rows(&self, n: usize) -> Vec<Vec<Expr>> {
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    /// `factor · g`, keeping the conformal form when possible.
    pub fn scaled(&self, factor: &Expr) -> Metric {
        match self {
            Metric::Conformal(c) => Metric::Conformal(factor.clone() * c.clone()),
            Metric::Full(rows) => Metric::Full(
                rows.iter()
                    .map(|r| r.iter().map(|e| factor.clone() * e.clone()).collect())
                    .collect(),
            ),
        }
    }

    /// `g + s·h` for a symmetric perturbation `h`.
    pub fn perturbed(&self, n: usize, h: &[Vec<Expr>], s: f64) -> Metric {
        Metric::Full(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| self.entry(i, j) + s * h[i][j].clone())
                        .collect()
                })
                .collect(),
        )
    }

    fn arity(&self) -> usize {
        match self {
            Metric::Conformal(c) => c.arity(),
            Metric::Full(rows) => rows.iter().flatten().map(Expr::arity).max().unwrap_or(0),
        }
    }
}

/// A metric, magnetic potential and scalar potential on the ball of radius
/// `radius`, observed at energy `energy`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpSystem {
    pub dim: usize,
    pub radius: f64,
    pub metric: Metric,
    pub alpha: Vec<Expr>,
    pub potential: Expr,
    pub energy: f64,
}

/// Field values with derivatives at one point, in jet type `T`.
struct FieldJets<T> {
    metric: [[T; MAX_DIM]; MAX_DIM],
    alpha: [T; MAX_DIM],
    potential: T,
}

impl MpSystem {
    pub fn new(
        dim: usize,
        radius: f64,
        metric: Metric,
        alpha: Vec<Expr>,
        potential: Expr,
        energy: f64,
    ) -> Result<MpSystem> {
        let sys = MpSystem {
            dim,
            radius,
            metric,
            alpha,
            potential,
            energy,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Checks dimensions, positive definiteness of `g` and `k > U` on a sampling grid.
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidSystem(format!(
                "dimension must be 2 or 3, got {}",
                self.dim
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidSystem("radius must be positive".into()));
        }
        if !self.energy.is_finite() {
            return Err(Error::InvalidSystem("energy must be finite".into()));
        }
        if self.alpha.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: self.alpha.len(),
            });
        }
        if let Metric::Full(rows) = &self.metric {
            if rows.len() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    got: rows.len(),
                });
            }
        }
        let arity = self
            .metric
            .arity()
            .max(self.potential.arity())
            .max(self.alpha.iter().map(Expr::arity).max().unwrap_or(0));
        if arity > self.dim {
            return Err(Error::InvalidSystem(format!(
                "fields use x{arity} in a {}-dimensional system",
                self.dim
            )));
        }
        for x in sample_ball(self.dim, self.radius, 8, 16) {
            let x = &x[..self.dim];
            let g = self.metric_at(x)?;
            if linalg::cholesky(self.dim, &g).is_none() {
                return Err(Error::InvalidSystem(format!(
                    "metric is not positive definite at x = {x:?}"
                )));
            }
            let u = self.potential.eval(x)?;
            if u >= self.energy {
                return Err(Error::EnergyBelowPotential {
                    energy: self.energy,
                    potential: u,
                    point: x.to_vec(),
                });
            }
        }
        Ok(())
    }

    fn field_jets<T: Scalar>(&self, x: &[f64]) -> Result<FieldJets<T>> {
        let n = self.dim;
        let zero = T::constant(0.0);
        let mut metric = [[zero; MAX_DIM]; MAX_DIM];
        match &self.metric {
            Metric::Conformal(c) => {
                let cj = c.eval_scalar::<T>(x)?;
                for (i, row) in metric.iter_mut().enumerate().take(n) {
                    row[i] = cj;
                }
            }
            Metric::Full(rows) => {
                for i in 0..n {
                    for j in i..n {
                        let e = rows[i][j].eval_scalar::<T>(x)?;
                        metric[i][j] = e;
                        metric[j][i] = e;
                    }
                }
            }
        }
        let mut alpha = [zero; MAX_DIM];
        for (a, e) in alpha.iter_mut().zip(&self.alpha) {
            *a = e.eval_scalar::<T>(x)?;
        }
        Ok(FieldJets {
            metric,
            alpha,
            potential: self.potential.eval_scalar::<T>(x)?,
        })
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<Matrix> {
        let jets = self.field_jets::<f64>(x)?;
        Ok(jets.metric)
    }

    pub fn potential_at(&self, x: &[f64]) -> Result<f64> {
        self.potential.eval(x)
    }

    /// `P = 2(k − U)` as an expression.
    pub fn conformal_factor(&self) -> Expr {
        2.0 * (Expr::constant(self.energy) - self.potential.clone())
    }

    /// `P(x) = 2(k − U(x))`.
    pub fn conformal_factor_at(&self, x: &[f64]) -> Result<f64> {
        Ok(2.0 * (self.energy - self.potential.eval(x)?))
    }

    /// Geometry with first derivatives of the fields (enough for the flow).
    pub fn local(&self, x: &[f64]) -> Result<LocalGeometry> {
        let jets = self.field_jets::<Jet1>(x)?;
        LocalGeometry::from_jets(self.dim, x, &jets)
    }

    /// Geometry with second derivatives (curvature, `∇Y`).
    pub fn local2(&self, x: &[f64]) -> Result<SecondOrderGeometry> {
        let jets = self.field_jets::<Jet2>(x)?;
        SecondOrderGeometry::from_jets(self.dim, x, &jets)
    }

    pub fn with_energy(&self, energy: f64) -> Result<MpSystem> {
        MpSystem::new(
            self.dim,
            self.radius,
            self.metric.clone(),
            self.alpha.clone(),
            self.potential.clone(),
            energy,
        )
    }

    /// Largest `U` on the validation grid.
    pub fn max_potential(&self) -> Result<f64> {
        let mut m = f64::NEG_INFINITY;
        for x in sample_ball(self.dim, self.radius, 16, 32) {
            m = m.max(self.potential.eval(&x[..self.dim])?);
        }
        Ok(m)
    }
}

/// Polar (2D) or spherical (3D) sample of the closed ball, including the centre
/// and the boundary sphere.
pub fn sample_ball(dim: usize, radius: f64, radial: usize, angular: usize) -> Vec<Vector> {
    let mut pts = vec![zero_vector()];
    for ir in 1..=radial {
        let r = radius * ir as f64 / radial as f64;
        for ia in 0..angular {
            let phi = 2.0 * std::f64::consts::PI * ia as f64 / angular as f64;
            if dim == 2 {
                pts.push([r * phi.cos(), r * phi.sin(), 0.0]);
            } else {
                let polar_count = angular / 2;
                for ip in 0..=polar_count {
                    let th = std::f64::consts::PI * ip as f64 / polar_count as f64;
                    pts.push([
                        r * th.sin() * phi.cos(),
                        r * th.sin() * phi.sin(),
                        r * th.cos(),
                    ]);
                }
            }
        }
    }
    pts
}

/// Metric, connection, Lorentz force and potential gradient at a point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub dim: usize,
    pub x: Vector,
    pub g: Matrix,
    pub g_inv: Matrix,
    pub det_g: f64,
    pub dg: [Matrix; MAX_DIM],
    pub gamma: [Matrix; MAX_DIM],
    pub omega: Matrix,
    pub lorentz: Matrix,
    pub potential: f64,
    pub grad_potential: Vector,
}

impl LocalGeometry {
    fn from_jets<T: Scalar + Into<Jet1>>(
        n: usize,
        x: &[f64],
        jets: &FieldJets<T>,
    ) -> Result<LocalGeometry> {
        let mut g = zero_matrix();
        let mut dg = [zero_matrix(); MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                let jet: Jet1 = jets.metric[i][j].into();
                g[i][j] = jet.value;
                for (k, dgk) in dg.iter_mut().enumerate().take(n) {
                    dgk[i][j] = jet.grad[k];
                }
            }
        }
        let g_inv =
            linalg::inverse(n, &g).ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
        let det_g = linalg::det(n, &g);

        let mut gamma = [zero_matrix(); MAX_DIM];
        for (i, gi) in gamma.iter_mut().enumerate().take(n) {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += g_inv[i][l] * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
                    }
                    gi[j][k] = 0.5 * s;
                }
            }
        }

        let mut dalpha = zero_matrix(); // dalpha[i][j] = ∂_i α_j
        for j in 0..n {
            let a: Jet1 = jets.alpha[j].into();
            for (i, row) in dalpha.iter_mut().enumerate().take(n) {
                row[j] = a.grad[i];
            }
        }
        let mut omega = zero_matrix();
        for i in 0..n {
            for j in 0..n {
                omega[i][j] = dalpha[i][j] - dalpha[j][i];
            }
        }
        let lorentz = lorentz_from(n, &g_inv, &omega);

        let u: Jet1 = jets.potential.into();
        let mut grad_potential = zero_vector();
        grad_potential[..n].copy_from_slice(&u.grad[..n]);

        Ok(LocalGeometry {
            dim: n,
            x: linalg::to_vector(x),
            g,
            g_inv,
            det_g,
            dg,
            gamma,
            omega,
            lorentz,
            potential: u.value,
            grad_potential,
        })
    }

    pub fn raise(&self, covector: &Vector) -> Vector {
        linalg::mat_vec(self.dim, &self.g_inv, covector)
    }

    pub fn lower(&self, vector: &Vector) -> Vector {
        linalg::mat_vec(self.dim, &self.g, vector)
    }

    pub fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        inner(self.dim, &self.g, a, b)
    }

    /// `(a, b)_g` for covectors.
    pub fn co_inner(&self, a: &Vector, b: &Vector) -> f64 {
        inner(self.dim, &self.g_inv, a, b)
    }

    pub fn apply_lorentz(&self, v: &Vector) -> Vector {
        linalg::mat_vec(self.dim, &self.lorentz, v)
    }

    /// Lorentz force acting on covectors, `u ↦ −u_j Y^j_i`. With this sign the
    /// odd part of the generator applied to `u_i v^i + φ` is `dφ − Y(u)`.
    pub fn covector_lorentz(&self, u: &Vector) -> Vector {
        let n = self.dim;
        let mut out = zero_vector();
        for i in 0..n {
            out[i] = -(0..n).map(|j| u[j] * self.lorentz[j][i]).sum::<f64>();
        }
        out
    }

    /// `∇U` as a vector.
    pub fn potential_gradient_vector(&self) -> Vector {
        self.raise(&self.grad_potential)
    }

    /// Right-hand side of `∇_σ̇ σ̇ = Y(σ̇) − ∇U` in coordinates.
    pub fn acceleration(&self, v: &Vector) -> Vector {
        let n = self.dim;
        let yv = self.apply_lorentz(v);
        let grad = self.potential_gradient_vector();
        let mut a = zero_vector();
        for i in 0..n {
            let mut quad = 0.0;
            for j in 0..n {
                for k in 0..n {
                    quad += self.gamma[i][j][k] * v[j] * v[k];
                }
            }
            a[i] = -quad + yv[i] - grad[i];
        }
        a
    }

    pub fn energy(&self, v: &Vector) -> f64 {
        0.5 * self.inner(v, v) + self.potential
    }

    /// `∇_i u_j` from the value and gradient of a covector field.
    pub fn covariant_derivative(&self, u: &[Jet1]) -> Matrix {
        let n = self.dim;
        let mut out = zero_matrix();
        for i in 0..n {
            for j in 0..n {
                let mut s = u[j].grad[i];
                for k in 0..n {
                    s -= self.gamma[k][i][j] * u[k].value;
                }
                out[i][j] = s;
            }
        }
        out
    }

    /// Symmetric differential `(d^s u)_ij = ½(∇_i u_j + ∇_j u_i)`.
    pub fn sym_differential(&self, u: &[Jet1]) -> Matrix {
        let n = self.dim;
        let nabla = self.covariant_derivative(u);
        let mut out = zero_matrix();
        for i in 0..n {
            for j in 0..n {
                out[i][j] = 0.5 * (nabla[i][j] + nabla[j][i]);
            }
        }
        out
    }

    /// Divergence `δw = g^{ij}(∂_i w_j − Γ^k_ij w_k)`.
    pub fn divergence(&self, w: &[Jet1]) -> f64 {
        let n = self.dim;
        let nabla = self.covariant_derivative(w);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.g_inv[i][j] * nabla[i][j];
            }
        }
        s
    }

    /// Inward g-unit normal to the sphere `|x| = const` through this point.
    pub fn inward_normal(&self) -> Vector {
        let n = self.dim;
        let covector = linalg::scale(n, &self.x, -1.0);
        let v = self.raise(&covector);
        let len = self.co_inner(&covector, &covector).sqrt();
        linalg::scale(n, &v, 1.0 / len)
    }
}

fn lorentz_from(n: usize, g_inv: &Matrix, omega: &Matrix) -> Matrix {
    let mut y = zero_matrix();
    for i in 0..n {
        for j in 0..n {
            y[i][j] = (0..n).map(|l| g_inv[i][l] * omega[j][l]).sum();
        }
    }
    y
}

impl From<Jet2> for Jet1 {
    fn from(j: Jet2) -> Jet1 {
        j.first_order()
    }
}

/// Local geometry together with second derivatives of the fields.
#[derive(Debug, Clone)]
pub struct SecondOrderGeometry {
    pub first: LocalGeometry,
    /// `d2g[a][b][i][j] = ∂_a ∂_b g_ij`
    pub d2g: [[Matrix; MAX_DIM]; MAX_DIM],
    /// `dgamma[m][i][j][k] = ∂_m Γ^i_jk`
    pub dgamma: [[Matrix; MAX_DIM]; MAX_DIM],
    /// `dlorentz[m][i][j] = ∂_m Y^i_j`
    pub dlorentz: [Matrix; MAX_DIM],
    pub hess_potential: Matrix,
}

impl SecondOrderGeometry {
    fn from_jets(n: usize, x: &[f64], jets: &FieldJets<Jet2>) -> Result<SecondOrderGeometry> {
        let first = LocalGeometry::from_jets(n, x, jets)?;
        let gi = &first.g_inv;
        let dg = &first.dg;

        let mut d2g = [[zero_matrix(); MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                let h = jets.metric[i][j].hess;
                for a in 0..n {
                    for b in 0..n {
                        d2g[a][b][i][j] = h[a][b];
                    }
                }
            }
        }

        // ∂_m g^{il} = −g^{ia} ∂_m g_ab g^{bl}
        let mut dginv = [zero_matrix(); MAX_DIM];
        for (m, dm) in dginv.iter_mut().enumerate().take(n) {
            for i in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s += gi[i][a] * dg[m][a][b] * gi[b][l];
                        }
                    }
                    dm[i][l] = -s;
                }
            }
        }

        let mut dgamma = [[zero_matrix(); MAX_DIM]; MAX_DIM];
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let sym = dg[j][l][k] + dg[k][l][j] - dg[l][j][k];
                            let dsym = d2g[m][j][l][k] + d2g[m][k][l][j] - d2g[m][l][j][k];
                            s += dginv[m][i][l] * sym + gi[i][l] * dsym;
                        }
                        dgamma[m][i][j][k] = 0.5 * s;
                    }
                }
            }
        }

        // ∂_m Ω_jl = ∂_m ∂_j α_l − ∂_m ∂_l α_j
        let mut domega = [zero_matrix(); MAX_DIM];
        for (m, dm) in domega.iter_mut().enumerate().take(n) {
            for j in 0..n {
                for l in 0..n {
                    dm[j][l] = jets.alpha[l].hess[m][j] - jets.alpha[j].hess[m][l];
                }
            }
        }
        let mut dlorentz = [zero_matrix(); MAX_DIM];
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += dginv[m][i][l] * first.omega[j][l] + gi[i][l] * domega[m][j][l];
                    }
                    dlorentz[m][i][j] = s;
                }
            }
        }

        let mut hess_potential = zero_matrix();
        for a in 0..n {
            for b in 0..n {
                hess_potential[a][b] = jets.potential.hess[a][b];
            }
        }

        Ok(SecondOrderGeometry {
            first,
            d2g,
            dgamma,
            dlorentz,
            hess_potential,
        })
    }

    /// `R^l_ijk` with `R(∂_i, ∂_j)∂_k = R^l_ijk ∂_l`; returned as `r[l][i][j][k]`.
    pub fn riemann(&self) -> [[Matrix; MAX_DIM]; MAX_DIM] {
        let n = self.first.dim;
        let gamma = &self.first.gamma;
        let mut r = [[zero_matrix(); MAX_DIM]; MAX_DIM];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = self.dgamma[i][l][j][k] - self.dgamma[j][l][i][k];
                        for m in 0..n {
                            s += gamma[l][i][m] * gamma[m][j][k] - gamma[l][j][m] * gamma[m][i][k];
                        }
                        r[l][i][j][k] = s;
                    }
                }
            }
        }
        r
    }

    /// Sectional curvature of the plane spanned by `v` and `w`.
    pub fn sectional_curvature(&self, v: &Vector, w: &Vector) -> Result<f64> {
        let geo = &self.first;
        let n = geo.dim;
        let area2 = geo.inner(v, v) * geo.inner(w, w) - geo.inner(v, w).powi(2);
        let scale = geo.inner(v, v) * geo.inner(w, w);
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(area2 > 1e-12 * scale) {
            return Err(Error::DegeneratePlane);
        }
        let r = self.riemann();
        // ⟨R(v,w)w, v⟩
        let mut s = 0.0;
        for l in 0..n {
            let mut rl = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        rl += r[l][i][j][k] * v[i] * w[j] * w[k];
                    }
                }
            }
            for a in 0..n {
                s += geo.g[l][a] * rl * v[a];
            }
        }
        Ok(s / area2)
    }

    /// `(∇_w Y)(v)`.
    pub fn lorentz_derivative(&self, w: &Vector, v: &Vector) -> Vector {
        let geo = &self.first;
        let n = geo.dim;
        let y = &geo.lorentz;
        let gamma = &geo.gamma;
        let mut out = zero_vector();
        for i in 0..n {
            let mut s = 0.0;
            for m in 0..n {
                for j in 0..n {
                    let mut nab = self.dlorentz[m][i][j];
                    for l in 0..n {
                        nab += gamma[i][m][l] * y[l][j] - y[i][l] * gamma[l][m][j];
                    }
                    s += w[m] * nab * v[j];
                }
            }
            out[i] = s;
        }
        out
    }
}

fn check_point(sys: &MpSystem, x: &[f64]) -> Result<()> {
    if x.len() != sys.dim {
        return Err(Error::Dimension {
            expected: sys.dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Christoffel symbols `Γ^i_jk` at `x`, as `gamma[i][j][k]`.
pub fn christoffel(sys: &MpSystem, x: &[f64]) -> Result<[Matrix; MAX_DIM]> {
    check_point(sys, x)?;
    Ok(sys.local(x)?.gamma)
}

/// Lorentz force `Y^i_j` at `x`.
pub fn lorentz_force(sys: &MpSystem, x: &[f64]) -> Result<Matrix> {
    check_point(sys, x)?;
    Ok(sys.local(x)?.lorentz)
}

/// `E(x, v) = ½|v|²_g + U(x)`.
pub fn energy(sys: &MpSystem, x: &[f64], v: &[f64]) -> Result<f64> {
    check_point(sys, x)?;
    let g = sys.metric_at(x)?;
    let v = linalg::to_vector(v);
    Ok(0.5 * inner(sys.dim, &g, &v, &v) + sys.potential_at(x)?)
}

fn covector_jets(u: &[Expr], x: &[f64]) -> Result<Vec<Jet1>> {
    u.iter().map(|e| e.eval_jet1(x)).collect()
}

/// Symmetric differential of the covector field `u` at `x`.
pub fn sym_differential(sys: &MpSystem, u: &[Expr], x: &[f64]) -> Result<Matrix> {
    check_point(sys, x)?;
    let jets = covector_jets(u, x)?;
    Ok(sys.local(x)?.sym_differential(&jets))
}

/// Divergence of the covector field `w` at `x`.
pub fn divergence(sys: &MpSystem, w: &[Expr], x: &[f64]) -> Result<f64> {
    check_point(sys, x)?;
    let jets = covector_jets(w, x)?;
    Ok(sys.local(x)?.divergence(&jets))
}

/// Sectional curvature of `sys.metric` at `x` on the plane spanned by `v`, `w`.
pub fn sectional_curvature(sys: &MpSystem, x: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    check_point(sys, x)?;
    sys.local2(x)?
        .sectional_curvature(&linalg::to_vector(v), &linalg::to_vector(w))
}

/// Strict convexity margin `Λ(x,v) − [⟨Y v, ν⟩ − dU(ν)]` at a boundary point.
///
/// `Λ` is the second fundamental form of the sphere `|x| = R` with respect to
/// the inward normal, computed as `−Hess ρ(v,v) / |dρ|_g` for
/// `ρ = R² − |x|²`.
pub fn convexity_margin(sys: &MpSystem, x: &[f64], v: &[f64]) -> Result<f64> {
    check_point(sys, x)?;
    let r = linalg::euclidean_norm(x);
    if (r - sys.radius).abs() > 1e-9 * sys.radius {
        return Err(Error::NotOnBoundary { point: x.to_vec() });
    }
    let n = sys.dim;
    let geo = sys.local(x)?;
    let v = linalg::to_vector(v);
    let xv = linalg::to_vector(x);
    let vnorm = linalg::norm(n, &geo.g, &v);
    let nu = geo.inward_normal();
    let normal_component = geo.inner(&v, &nu);
    if normal_component.abs() > 1e-8 * vnorm.max(1.0) {
        return Err(Error::NotTangent { normal_component });
    }
    // ∂ρ = −2x, ∂²ρ = −2δ
    let mut hess = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut h = if i == j { -2.0 } else { 0.0 };
            for k in 0..n {
                h -= geo.gamma[k][i][j] * (-2.0 * xv[k]);
            }
            hess += h * v[i] * v[j];
        }
    }
    let drho = linalg::scale(n, &xv, -2.0);
    let drho_norm = geo.co_inner(&drho, &drho).sqrt();
    let lambda = -hess / drho_norm;
    let yv = geo.apply_lorentz(&v);
    let du_nu = linalg::dot(n, &geo.grad_potential, &nu);
    Ok(lambda - (geo.inner(&yv, &nu) - du_nu))
}
