//! Ray transforms of tensor triples `[h, β, V]` and pairs `[h, β]`.
//!
//! A triple acts on phase points by `f(x, v) = h_ij v^i v^j + β_i v^i + V`.
//! Its MP-ray transform is `If(x, v) = ∫₀^τ f(σ, σ̇) dt` over the ray leaving
//! `(x, v) ∈ ∂₊SᵏM`. The magnetic transform of a pair is the same integral
//! over unit-speed rays of a reduced system.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fieldexpr::Expr;
use crate::flow::{self, format_number, IntegratorOptions, PhasePoint};
use crate::geometry::{LocalGeometry, MpSystem};
use crate::linalg::{self, zero_matrix, zero_vector};
use crate::measures::SpatialQuadrature;
use crate::quadrature;
use crate::reduction;
use crate::{Matrix, Vector};

/// Value of a triple at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TripleAt {
    pub h: Matrix,
    pub beta: Vector,
    pub v: f64,
}

impl TripleAt {
    /// `h(w, w) + β(w) + V`.
    pub fn apply(&self, dim: usize, w: &Vector) -> f64 {
        let mut s = self.v + linalg::dot(dim, &self.beta, w);
        for i in 0..dim {
            for j in 0..dim {
                s += self.h[i][j] * w[i] * w[j];
            }
        }
        s
    }

    pub fn combine(&self, a: f64, other: &TripleAt, b: f64) -> TripleAt {
        let mut out = TripleAt::default();
        for i in 0..crate::MAX_DIM {
            out.beta[i] = a * self.beta[i] + b * other.beta[i];
            for j in 0..crate::MAX_DIM {
                out.h[i][j] = a * self.h[i][j] + b * other.h[i][j];
            }
        }
        out.v = a * self.v + b * other.v;
        out
    }

    /// Largest component of the difference.
    pub fn max_abs_diff(&self, other: &TripleAt) -> f64 {
        let mut m = (self.v - other.v).abs();
        for i in 0..crate::MAX_DIM {
            m = m.max((self.beta[i] - other.beta[i]).abs());
            for j in 0..crate::MAX_DIM {
                m = m.max((self.h[i][j] - other.h[i][j]).abs());
            }
        }
        m
    }
}

/// Anything that can be evaluated as `[h, β, V]` at a point.
pub trait TripleField: Send + Sync {
    fn eval(&self, x: &[f64]) -> Result<TripleAt>;
}

/// Expression-backed `[h, β, V]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTriple {
    pub h: Vec<Vec<Expr>>,
    pub beta: Vec<Expr>,
    pub v: Expr,
}

/// Expression-backed `[h, β]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticPair {
    pub h: Vec<Vec<Expr>>,
    pub beta: Vec<Expr>,
}

fn check_symmetric(h: &[Vec<Expr>]) -> Result<()> {
    let n = h.len();
    if h.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSystem("tensor field must be square".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if h[i][j].to_string() != h[j][i].to_string() {
                return Err(Error::InvalidSystem(format!(
                    "tensor field entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    Ok(())
}

fn eval_parts(h: &[Vec<Expr>], beta: &[Expr], x: &[f64]) -> Result<(Matrix, Vector)> {
    let n = beta.len();
    let mut hm = zero_matrix();
    for i in 0..n {
        for j in i..n {
            let v = h[i][j].eval(x)?;
            hm[i][j] = v;
            hm[j][i] = v;
        }
    }
    let mut b = zero_vector();
    for (bi, e) in b.iter_mut().zip(beta) {
        *bi = e.eval(x)?;
    }
    Ok((hm, b))
}

impl TensorTriple {
    pub fn new(h: Vec<Vec<Expr>>, beta: Vec<Expr>, v: Expr) -> Result<TensorTriple> {
        check_symmetric(&h)?;
        if h.len() != beta.len() {
            return Err(Error::Dimension {
                expected: h.len(),
                got: beta.len(),
            });
        }
        Ok(TensorTriple { h, beta, v })
    }

    pub fn zero(dim: usize) -> TensorTriple {
        TensorTriple {
            h: vec![vec![Expr::zero(); dim]; dim],
            beta: vec![Expr::zero(); dim],
            v: Expr::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// `a·self + b·other`, built symbolically.
    pub fn linear_combination(&self, a: f64, other: &TensorTriple, b: f64) -> TensorTriple {
        let n = self.dim();
        TensorTriple {
            h: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| a * self.h[i][j].clone() + b * other.h[i][j].clone())
                        .collect()
                })
                .collect(),
            beta: (0..n)
                .map(|i| a * self.beta[i].clone() + b * other.beta[i].clone())
                .collect(),
            v: a * self.v.clone() + b * other.v.clone(),
        }
    }
}

impl TripleField for TensorTriple {
    fn eval(&self, x: &[f64]) -> Result<TripleAt> {
        let (h, beta) = eval_parts(&self.h, &self.beta, x)?;
        Ok(TripleAt {
            h,
            beta,
            v: self.v.eval(x)?,
        })
    }
}

impl MagneticPair {
    pub fn new(h: Vec<Vec<Expr>>, beta: Vec<Expr>) -> Result<MagneticPair> {
        check_symmetric(&h)?;
        if h.len() != beta.len() {
            return Err(Error::Dimension {
                expected: h.len(),
                got: beta.len(),
            });
        }
        Ok(MagneticPair { h, beta })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }
}

impl TripleField for MagneticPair {
    fn eval(&self, x: &[f64]) -> Result<TripleAt> {
        let (h, beta) = eval_parts(&self.h, &self.beta, x)?;
        Ok(TripleAt { h, beta, v: 0.0 })
    }
}

/// Triple given by a pointwise closure.
pub struct FnField<F>(pub F);

impl<F> TripleField for FnField<F>
where
    F: Fn(&[f64]) -> Result<TripleAt> + Send + Sync,
{
    fn eval(&self, x: &[f64]) -> Result<TripleAt> {
        (self.0)(x)
    }
}

/// `Φ([h, β, V]) = [P h + V g, β]`.
pub fn phi_map(sys: &MpSystem, f: &TensorTriple) -> MagneticPair {
    let n = sys.dim;
    let p = sys.conformal_factor();
    MagneticPair {
        h: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| p.clone() * f.h[i][j].clone() + f.v.clone() * sys.metric.entry(i, j))
                    .collect()
            })
            .collect(),
        beta: f.beta.clone(),
    }
}

/// `Φ` applied pointwise to any triple field.
pub fn phi_map_at(sys: &MpSystem, f: &TripleAt, x: &[f64]) -> Result<TripleAt> {
    let n = sys.dim;
    let p = sys.conformal_factor_at(x)?;
    let g = sys.metric_at(x)?;
    let mut out = TripleAt {
        beta: f.beta,
        ..Default::default()
    };
    for i in 0..n {
        for j in 0..n {
            out.h[i][j] = p * f.h[i][j] + f.v * g[i][j];
        }
    }
    Ok(out)
}

/// `[h / P, β, 0]`, a preimage of `[h, β]` under `Φ`.
pub fn phi_preimage(sys: &MpSystem, p: &MagneticPair) -> TensorTriple {
    let pf = sys.conformal_factor();
    TensorTriple {
        h: p.h
            .iter()
            .map(|r| r.iter().map(|e| e.clone() / pf.clone()).collect())
            .collect(),
        beta: p.beta.clone(),
        v: Expr::zero(),
    }
}

/// `η[−g, 0, 2(k − U)]`, which spans the kernel of `Φ`.
pub fn kernel_generator(sys: &MpSystem, eta: &Expr) -> TensorTriple {
    let n = sys.dim;
    TensorTriple {
        h: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| -(eta.clone() * sys.metric.entry(i, j)))
                    .collect()
            })
            .collect(),
        beta: vec![Expr::zero(); n],
        v: eta.clone() * sys.conformal_factor(),
    }
}

/// One boundary phase point with its weight in `dμ_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanSample {
    pub x: Vector,
    pub v: Vector,
    pub weight: f64,
    /// Boundary position angles: `θ` in 2D, (polar, azimuth) in 3D.
    pub boundary: [f64; 2],
    /// Direction angles from the inward normal: `ψ` in 2D, (ψ, χ) in 3D.
    pub direction: [f64; 2],
}

/// Quadrature sampling of `∂₊SᵏM` realizing `dμ_k = (v, ν_k)_g dΣ_k`.
#[derive(Debug, Clone)]
pub struct BoundaryFan {
    pub dim: usize,
    pub positions: usize,
    pub directions: usize,
    pub samples: Vec<FanSample>,
}

impl BoundaryFan {
    /// In 2D: `positions` equispaced boundary angles times `directions`
    /// Gauss–Legendre nodes in `ψ ∈ (−π/2, π/2)`. In 3D: a Gauss–Legendre ×
    /// trapezoid grid on the boundary sphere (`positions/2` × `positions`)
    /// and on the inward hemisphere (`directions/2` × `directions`).
    pub fn new(sys: &MpSystem, positions: usize, directions: usize) -> Result<BoundaryFan> {
        if positions == 0 || directions == 0 {
            return Err(Error::EmptyGrid(
                "boundary fan needs at least one ray".into(),
            ));
        }
        let samples = match sys.dim {
            2 => fan_2d(sys, positions, directions)?,
            3 => fan_3d(sys, positions, directions)?,
            d => {
                return Err(Error::Dimension {
                    expected: 2,
                    got: d,
                })
            }
        };
        Ok(BoundaryFan {
            dim: sys.dim,
            positions,
            directions,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Σ wᵢ G(sampleᵢ)` for precomputed values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.samples
            .iter()
            .zip(values)
            .map(|(s, v)| s.weight * v)
            .sum()
    }

    /// The same boundary points with velocities rescaled into a reduced
    /// system, `w = v / P(x)`.
    pub fn reduced_directions(&self, sys: &MpSystem) -> Result<Vec<Vector>> {
        self.samples
            .iter()
            .map(|s| {
                let p = sys.conformal_factor_at(&s.x[..sys.dim])?;
                Ok(linalg::scale(sys.dim, &s.v, 1.0 / p))
            })
            .collect()
    }
}

fn fan_2d(sys: &MpSystem, positions: usize, directions: usize) -> Result<Vec<FanSample>> {
    let r = sys.radius;
    let psi_rule = quadrature::gauss_legendre(
        directions,
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
    );
    let mut out = Vec::with_capacity(positions * directions);
    for (theta, wt) in quadrature::periodic(positions, 0.0) {
        let x = [r * theta.cos(), r * theta.sin()];
        let geo = sys.local(&x)?;
        let p = sys.conformal_factor_at(&x)?;
        let nu = geo.inward_normal();
        let e = [-theta.sin(), theta.cos(), 0.0];
        let t = linalg::orthogonalize(2, &geo.g, &e, &[nu]);
        let t = linalg::scale(2, &t, 1.0 / linalg::norm(2, &geo.g, &t));
        let line = r * linalg::norm(2, &geo.g, &e);
        for &(psi, wp) in &psi_rule {
            let dir = linalg::axpy(2, psi.cos(), &nu, &linalg::scale(2, &t, psi.sin()));
            let v = linalg::scale(2, &dir, p.sqrt());
            // (v, ν_k) = P cos ψ; fiber arc element P^{1/2} dψ
            let weight = p * psi.cos() * p.sqrt() * wp * line * wt;
            out.push(FanSample {
                x: linalg::to_vector(&x),
                v,
                weight,
                boundary: [theta, 0.0],
                direction: [psi, 0.0],
            });
        }
    }
    Ok(out)
}

fn fan_3d(sys: &MpSystem, positions: usize, directions: usize) -> Result<Vec<FanSample>> {
    let r = sys.radius;
    let polar = quadrature::gauss_legendre((positions / 2).max(1), -1.0, 1.0);
    let azimuth = quadrature::periodic(positions, 0.0);
    let psi_rule =
        quadrature::gauss_legendre((directions / 2).max(1), 0.0, std::f64::consts::FRAC_PI_2);
    let chi_rule = quadrature::periodic(directions, 0.0);
    let mut out = Vec::new();
    for &(z, wz) in &polar {
        let a = z.acos();
        let sa = a.sin();
        for &(b, wb) in &azimuth {
            let x = [r * sa * b.cos(), r * sa * b.sin(), r * z];
            let geo = sys.local(&x)?;
            let p = sys.conformal_factor_at(&x)?;
            let nu = geo.inward_normal();
            let ea = [r * z * b.cos(), r * z * b.sin(), -r * sa];
            let eb = [-r * sa * b.sin(), r * sa * b.cos(), 0.0];
            let gram = geo.inner(&ea, &ea) * geo.inner(&eb, &eb) - geo.inner(&ea, &eb).powi(2);
            // dA = sqrt(det) da db, and da = dz / sin a
            let area = gram.sqrt() / sa * wz * wb;
            let t1 = linalg::orthogonalize(3, &geo.g, &ea, &[nu]);
            let t1 = linalg::scale(3, &t1, 1.0 / linalg::norm(3, &geo.g, &t1));
            let t2 = linalg::orthogonalize(3, &geo.g, &eb, &[nu, t1]);
            let t2 = linalg::scale(3, &t2, 1.0 / linalg::norm(3, &geo.g, &t2));
            for &(psi, wp) in &psi_rule {
                for &(chi, wc) in &chi_rule {
                    let tan = linalg::axpy(3, chi.cos(), &t1, &linalg::scale(3, &t2, chi.sin()));
                    let dir = linalg::axpy(3, psi.cos(), &nu, &linalg::scale(3, &tan, psi.sin()));
                    let v = linalg::scale(3, &dir, p.sqrt());
                    // (v, ν_k) = P cos ψ; fiber area element P sin ψ dψ dχ
                    let weight = p * psi.cos() * p * psi.sin() * wp * wc * area;
                    out.push(FanSample {
                        x: linalg::to_vector(&x),
                        v,
                        weight,
                        boundary: [a, b],
                        direction: [psi, chi],
                    });
                }
            }
        }
    }
    Ok(out)
}

fn triple_integrand<'a>(
    f: &'a dyn TripleField,
) -> impl Fn(&LocalGeometry, &Vector, &mut [f64]) -> Result<()> + Sync + 'a {
    move |geo: &LocalGeometry, v: &Vector, d: &mut [f64]| {
        let at = f.eval(&geo.x[..geo.dim])?;
        d[0] = at.apply(geo.dim, v);
        Ok(())
    }
}

/// `If(x, v)` for an inward boundary phase point.
pub fn mp_ray(sys: &MpSystem, f: &dyn TripleField, x: &[f64], v: &[f64]) -> Result<f64> {
    flow::check_inward(sys, x, v)?;
    let integrand = triple_integrand(f);
    let traj = flow::integrate_augmented(
        sys,
        &PhasePoint::new(x, v),
        &[0.0],
        &integrand,
        &IntegratorOptions::default(),
    )?;
    traj.tau()?;
    Ok(traj.aux[0])
}

/// Magnetic ray transform over a reduced system (unit-speed rays).
pub fn magnetic_ray(msys: &MpSystem, p: &dyn TripleField, x: &[f64], w: &[f64]) -> Result<f64> {
    mp_ray(msys, p, x, w)
}

/// Transform of `f` over every ray of the fan, in fan order.
pub fn mp_ray_fan(sys: &MpSystem, f: &dyn TripleField, fan: &BoundaryFan) -> Result<Vec<f64>> {
    let n = sys.dim;
    fan.samples
        .par_iter()
        .map(|s| mp_ray(sys, f, &s.x[..n], &s.v[..n]))
        .collect()
}

/// `|If(x, v) − I_M Φ(f)(x, v / P(x))|`.
pub fn reduction_identity_residual(
    sys: &MpSystem,
    f: &TensorTriple,
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    let msys = reduction::reduce(sys)?;
    let p = sys.conformal_factor_at(x)?;
    let w: Vec<f64> = v.iter().map(|c| c / p).collect();
    let lhs = mp_ray(sys, f, x, v)?;
    let rhs = magnetic_ray(&msys, &phi_map(sys, f), x, &w)?;
    Ok((lhs - rhs).abs())
}

/// Pointwise `|h|²_g + |β|²_g + V²`.
pub fn triple_norm_sq(geo: &LocalGeometry, f: &TripleAt) -> f64 {
    let n = geo.dim;
    let gi = &geo.g_inv;
    let mut h2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    h2 += gi[i][a] * gi[j][b] * f.h[i][j] * f.h[a][b];
                }
            }
        }
    }
    h2 + geo.co_inner(&f.beta, &f.beta) + f.v * f.v
}

/// `(∫_M |h|² + |β|² + V² dvol_g)^{1/2}`.
pub fn l2_norm_triple(
    sys: &MpSystem,
    f: &dyn TripleField,
    grid: &SpatialQuadrature,
) -> Result<f64> {
    let n = sys.dim;
    let mut total = 0.0;
    for node in &grid.nodes {
        let geo = sys.local(&node.x[..n])?;
        let at = f.eval(&node.x[..n])?;
        total += node.weight * geo.det_g.sqrt() * triple_norm_sq(&geo, &at);
    }
    Ok(total.sqrt())
}

/// `(∫_{∂₊SᵏM} |G|² dμ_k)^{1/2}` for values sampled on the fan.
pub fn l2_norm_boundary(fan: &BoundaryFan, values: &[f64]) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    fan.integrate(&sq).sqrt()
}

/// Both sides of `‖If‖²_μ ≤ C̃ ∫_{SᵏM} f² dΣ_k`, with `C = max τ` over the fan
/// and `C̃ = C · max_M P^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundedness {
    pub lhs: f64,
    pub rhs: f64,
    pub c: f64,
    pub c_tilde: f64,
}

impl Boundedness {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

pub fn boundedness_check(
    sys: &MpSystem,
    f: &dyn TripleField,
    fan: &BoundaryFan,
    phase: &crate::measures::PhaseQuadrature,
) -> Result<Boundedness> {
    let n = sys.dim;
    let integrand = triple_integrand(f);
    let rays: Vec<(f64, f64)> = fan
        .samples
        .par_iter()
        .map(|s| {
            let traj = flow::integrate_augmented(
                sys,
                &PhasePoint::new(&s.x[..n], &s.v[..n]),
                &[0.0],
                &integrand,
                &IntegratorOptions::default(),
            )?;
            Ok((traj.tau()?, traj.aux[0]))
        })
        .collect::<Result<_>>()?;
    let c = rays.iter().map(|r| r.0).fold(0.0, f64::max);
    let mut pmax: f64 = 0.0;
    for x in crate::geometry::sample_ball(n, sys.radius, 16, 32) {
        pmax = pmax.max(sys.conformal_factor_at(&x[..n])?);
    }
    let c_tilde = c * pmax.sqrt();
    let values: Vec<f64> = rays.iter().map(|r| r.1 * r.1).collect();
    let lhs = fan.integrate(&values);
    let f2 = crate::measures::phase_integral(sys, phase, &|x: &[f64], v: &[f64]| {
        let at = f.eval(x)?;
        Ok(at.apply(n, &linalg::to_vector(v)).powi(2))
    })?;
    Ok(Boundedness {
        lhs,
        rhs: c_tilde * f2,
        c,
        c_tilde,
    })
}

/// Sinogram CSV: `boundary_angle, direction_angle, value` per fan sample
/// (3D fans add `boundary_angle2, direction_angle2`).
pub fn write_sinogram<W: Write>(fan: &BoundaryFan, values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if fan.dim == 2 {
        w.write_record(["boundary_angle", "direction_angle", "value"])?;
    } else {
        w.write_record([
            "boundary_angle",
            "boundary_angle2",
            "direction_angle",
            "direction_angle2",
            "value",
        ])?;
    }
    for (s, v) in fan.samples.iter().zip(values) {
        if fan.dim == 2 {
            w.write_record([
                format_number(s.boundary[0]),
                format_number(s.direction[0]),
                format_number(*v),
            ])?;
        } else {
            w.write_record([
                format_number(s.boundary[0]),
                format_number(s.boundary[1]),
                format_number(s.direction[0]),
                format_number(s.direction[1]),
                format_number(*v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
