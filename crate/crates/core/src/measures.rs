//! Liouville-type measures on the energy shell `SᵏM` and on `∂₊SᵏM`,
//! Santaló's formula, and the curvature functional of the reduced system.
//!
//! Normalizations:
//!
//! * fiber measure `dσ^k = P^{(n−1)/2} dω`, where `dω` is the round measure of
//!   the g-unit sphere, so `Sᵏ_x` (g-radius `√P`) has its natural size;
//! * `dΣ_k = dvol_g dσ^k` on `SᵏM`;
//! * `dμ_k = (v, ν_k)_g dvol_∂g dσ^k` with `ν_k = P^{1/2} ν`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{self, IntegratorOptions, PhasePoint};
use crate::geometry::{LocalGeometry, MpSystem};
use crate::linalg::{self, zero_vector};
use crate::quadrature;
use crate::reduction;
use crate::transform::BoundaryFan;
use crate::Vector;

/// Scalar function on phase space, `F(x, v)`.
pub type PhaseFunction<'a> = dyn Fn(&[f64], &[f64]) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialNode {
    pub x: Vector,
    /// Euclidean volume weight.
    pub weight: f64,
}

/// Product rule on the coordinate ball: Gauss–Legendre in the radius times
/// the trapezoid rule in the angle (2D), or times Gauss–Legendre in the polar
/// cosine and trapezoid in the azimuth (3D).
#[derive(Debug, Clone)]
pub struct SpatialQuadrature {
    pub dim: usize,
    pub radial: usize,
    pub angular: usize,
    pub nodes: Vec<SpatialNode>,
}

impl SpatialQuadrature {
    pub fn new(
        dim: usize,
        radius: f64,
        radial: usize,
        angular: usize,
    ) -> Result<SpatialQuadrature> {
        if radial == 0 || angular == 0 {
            return Err(Error::EmptyGrid("spatial quadrature needs nodes".into()));
        }
        let rr = quadrature::gauss_legendre(radial, 0.0, radius);
        let mut nodes = Vec::new();
        match dim {
            2 => {
                for &(r, wr) in &rr {
                    for (th, wt) in quadrature::periodic(angular, 0.0) {
                        nodes.push(SpatialNode {
                            x: [r * th.cos(), r * th.sin(), 0.0],
                            weight: r * wr * wt,
                        });
                    }
                }
            }
            3 => {
                let polar = quadrature::gauss_legendre((angular / 2).max(1), -1.0, 1.0);
                for &(r, wr) in &rr {
                    for &(z, wz) in &polar {
                        let s = (1.0 - z * z).sqrt();
                        for (b, wb) in quadrature::periodic(angular, 0.0) {
                            nodes.push(SpatialNode {
                                x: [r * s * b.cos(), r * s * b.sin(), r * z],
                                weight: r * r * wr * wz * wb,
                            });
                        }
                    }
                }
            }
            d => {
                return Err(Error::Dimension {
                    expected: 2,
                    got: d,
                })
            }
        }
        Ok(SpatialQuadrature {
            dim,
            radial,
            angular,
            nodes,
        })
    }
}

/// Spatial rule times a fiber rule on each energy sphere.
#[derive(Debug, Clone)]
pub struct PhaseQuadrature {
    pub spatial: SpatialQuadrature,
    pub fiber: usize,
    /// Unit-sphere directions with round-measure weights.
    directions: Vec<(Vector, f64)>,
}

impl PhaseQuadrature {
    pub fn new(
        sys: &MpSystem,
        radial: usize,
        angular: usize,
        fiber: usize,
    ) -> Result<PhaseQuadrature> {
        if fiber == 0 {
            return Err(Error::EmptyGrid("fiber rule needs nodes".into()));
        }
        let spatial = SpatialQuadrature::new(sys.dim, sys.radius, radial, angular)?;
        Ok(PhaseQuadrature {
            spatial,
            fiber,
            directions: sphere_rule(sys.dim, fiber),
        })
    }

    /// 32 × 64 spatial nodes and 64 fiber nodes.
    pub fn standard(sys: &MpSystem) -> Result<PhaseQuadrature> {
        PhaseQuadrature::new(sys, 32, 64, 64)
    }
}

/// Round unit sphere in `ℝⁿ`: trapezoid on the circle, or Gauss–Legendre in
/// the polar cosine times trapezoid in azimuth on `S²`.
fn sphere_rule(dim: usize, count: usize) -> Vec<(Vector, f64)> {
    if dim == 2 {
        quadrature::periodic(count, 0.0)
            .into_iter()
            .map(|(a, w)| ([a.cos(), a.sin(), 0.0], w))
            .collect()
    } else {
        let mut out = Vec::new();
        for (z, wz) in quadrature::gauss_legendre((count / 2).max(1), -1.0, 1.0) {
            let s = (1.0 - z * z).sqrt();
            for (b, wb) in quadrature::periodic(count, 0.0) {
                out.push(([s * b.cos(), s * b.sin(), z], wz * wb));
            }
        }
        out
    }
}

/// `∫_{SᵏM} F dΣ_k`.
pub fn phase_integral(sys: &MpSystem, q: &PhaseQuadrature, f: &PhaseFunction<'_>) -> Result<f64> {
    let n = sys.dim;
    let parts: Vec<f64> = q
        .spatial
        .nodes
        .par_iter()
        .map(|node| {
            let x = &node.x[..n];
            let g = sys.metric_at(x)?;
            let frame = linalg::orthonormal_frame(n, &g)
                .ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
            let p = sys.conformal_factor_at(x)?;
            let radius = p.sqrt();
            let fiber_scale = p.powf((n as f64 - 1.0) / 2.0);
            let mut acc = 0.0;
            for (u, w) in &q.directions {
                let mut v = zero_vector();
                for (k, e) in frame.iter().enumerate().take(n) {
                    v = linalg::axpy(n, u[k] * radius, e, &v);
                }
                acc += w * f(x, &v[..n])?;
            }
            Ok(node.weight * linalg::det(n, &g).sqrt() * fiber_scale * acc)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// `∫_{∂₊SᵏM} G dμ_k` on a fan.
pub fn boundary_integral(sys: &MpSystem, fan: &BoundaryFan, g: &PhaseFunction<'_>) -> Result<f64> {
    let n = sys.dim;
    let values: Vec<f64> = fan
        .samples
        .par_iter()
        .map(|s| g(&s.x[..n], &s.v[..n]))
        .collect::<Result<_>>()?;
    Ok(fan.integrate(&values))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SantaloReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Both sides of Santaló's formula
/// `∫_{SᵏM} f dΣ_k = ∫_{∂₊SᵏM} (∫₀^τ P^{1/2}(σ) f(σ, σ̇) dt) P^{−1}(x) dμ_k`.
pub fn santalo_residual(
    sys: &MpSystem,
    f: &PhaseFunction<'_>,
    phase: &PhaseQuadrature,
    fan: &BoundaryFan,
) -> Result<SantaloReport> {
    let n = sys.dim;
    let lhs = phase_integral(sys, phase, f)?;
    let integrand = |geo: &LocalGeometry, v: &Vector, d: &mut [f64]| -> Result<()> {
        let p = 2.0 * (sys.energy - geo.potential);
        d[0] = p.sqrt() * f(&geo.x[..n], &v[..n])?;
        Ok(())
    };
    let values: Vec<f64> = fan
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
            traj.tau()?;
            Ok(traj.aux[0] / sys.conformal_factor_at(&s.x[..n])?)
        })
        .collect::<Result<_>>()?;
    let rhs = fan.integrate(&values);
    let scale = lhs.abs().max(rhs.abs());
    let relative_gap = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    Ok(SantaloReport {
        lhs,
        rhs,
        relative_gap,
    })
}

/// Measures of the fibers `Sᵏ_x` (in g) and `S^G_x` (in `G = P g`), each
/// computed as the induced Riemannian measure of a coordinate-angle
/// parametrization with finite-difference tangents.
pub fn fiber_measures(sys: &MpSystem, x: &[f64], count: usize) -> Result<(f64, f64)> {
    let n = sys.dim;
    let g = sys.metric_at(x)?;
    let p = sys.conformal_factor_at(x)?;
    let mut big_g = g;
    for row in big_g.iter_mut() {
        for e in row.iter_mut() {
            *e *= p;
        }
    }
    let k = sphere_measure(n, &g, p.sqrt(), count);
    let unit = sphere_measure(n, &big_g, 1.0, count);
    Ok((k, unit))
}

fn sphere_measure(n: usize, g: &crate::Matrix, radius: f64, count: usize) -> f64 {
    let h = 1e-5;
    let point = |angles: &[f64]| -> Vector {
        let d = if n == 2 {
            [angles[0].cos(), angles[0].sin(), 0.0]
        } else {
            let (a, b) = (angles[0], angles[1]);
            [a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]
        };
        linalg::scale(n, &d, radius / linalg::norm(n, g, &d))
    };
    let diff = |angles: &[f64], k: usize| -> Vector {
        let mut p = angles.to_vec();
        let mut m = angles.to_vec();
        p[k] += h;
        m[k] -= h;
        let (a, b) = (point(&p), point(&m));
        let mut out = zero_vector();
        for i in 0..n {
            out[i] = (a[i] - b[i]) / (2.0 * h);
        }
        out
    };
    let mut total = 0.0;
    if n == 2 {
        for (a, w) in quadrature::periodic(count, 0.0) {
            total += w * linalg::norm(2, g, &diff(&[a], 0));
        }
    } else {
        for (a, wa) in quadrature::gauss_legendre((count / 2).max(1), 0.0, std::f64::consts::PI) {
            for (b, wb) in quadrature::periodic(count, 0.0) {
                let ta = diff(&[a, b], 0);
                let tb = diff(&[a, b], 1);
                let gram = linalg::inner(3, g, &ta, &ta) * linalg::inner(3, g, &tb, &tb)
                    - linalg::inner(3, g, &ta, &tb).powi(2);
                total += wa * wb * gram.max(0.0).sqrt();
            }
        }
    }
    total
}

/// `k_μ(x, v)` of a reduced system at a G-unit vector `v`. In 2D the
/// supremum runs over the two G-unit normals of `v`; in 3D over
/// `normals` equispaced directions of the normal circle.
pub fn k_mu(msys: &MpSystem, x: &[f64], v: &[f64], normals: usize) -> Result<f64> {
    let n = msys.dim;
    let geo2 = msys.local2(x)?;
    let geo = &geo2.first;
    let v = linalg::to_vector(v);
    let vn = linalg::scale(n, &v, 1.0 / linalg::norm(n, &geo.g, &v));
    let mut candidates = Vec::new();
    let mut basis = vec![vn];
    for axis in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = zero_vector();
        e[axis] = 1.0;
        let r = linalg::orthogonalize(n, &geo.g, &e, &basis);
        let len = linalg::norm(n, &geo.g, &r);
        if len > 1e-6 {
            basis.push(linalg::scale(n, &r, 1.0 / len));
        }
    }
    if n == 2 {
        candidates.push(basis[1]);
    } else {
        for (c, _) in quadrature::periodic(normals.max(1), 0.0) {
            candidates.push(linalg::axpy(
                n,
                c.cos(),
                &basis[1],
                &linalg::scale(n, &basis[2], c.sin()),
            ));
        }
    }
    let mut best = f64::NEG_INFINITY;
    for w in candidates {
        let k = geo2.sectional_curvature(&vn, &w)?;
        let yw = geo.apply_lorentz(&w);
        let dy = geo2.lorentz_derivative(&w, &vn);
        let val = 2.0 * k + geo.inner(&yw, &vn).powi(2) + (n as f64 + 3.0) * geo.inner(&yw, &yw)
            - 2.0 * geo.inner(&dy, &w);
        best = best.max(val);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureReport {
    /// Fan estimate of `sup_γ T_γ ∫₀^{T_γ} k_μ⁺`.
    pub value: f64,
    /// `value ≤ 4`.
    pub verdict: bool,
    /// Length of the maximizing reduced geodesic.
    pub length: f64,
    /// Largest `k_μ` met along the sampled geodesics.
    pub max_k_mu: f64,
}

fn curvature_ray(msys: &MpSystem, x: &[f64], w: &[f64], normals: usize) -> Result<(f64, f64, f64)> {
    let n = msys.dim;
    let integrand = |geo: &LocalGeometry, v: &Vector, d: &mut [f64]| -> Result<()> {
        let k = k_mu(msys, &geo.x[..n], &v[..n], normals)?;
        d[0] = k.max(0.0);
        d[1] = k;
        Ok(())
    };
    let traj = flow::integrate_augmented(
        msys,
        &PhasePoint::new(x, w),
        &[0.0, 0.0],
        &integrand,
        &IntegratorOptions::default(),
    )?;
    let t = traj.tau()?;
    let mut kmax = f64::NEG_INFINITY;
    for st in &traj.states {
        kmax = kmax.max(k_mu(msys, &st.x[..n], &st.v[..n], normals)?);
    }
    Ok((t * traj.aux[0], t, kmax))
}

/// `k(M, 2(k−U)g, α)` estimated over the reduced rays of a boundary fan, the
/// best 2D ray polished by golden-section search in the direction angle.
pub fn curvature_bound(
    sys: &MpSystem,
    positions: usize,
    directions: usize,
) -> Result<CurvatureReport> {
    let msys = reduction::reduce(sys)?;
    let n = sys.dim;
    let fan = BoundaryFan::new(&msys, positions, directions)?;
    let normals = 64;
    let rays: Vec<(f64, f64, f64)> = fan
        .samples
        .par_iter()
        .map(|s| curvature_ray(&msys, &s.x[..n], &s.v[..n], normals))
        .collect::<Result<_>>()?;
    let (best_idx, _) = rays
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| {
            if r.0 > acc.1 {
                (i, r.0)
            } else {
                acc
            }
        });
    let mut value = rays[best_idx].0;
    let mut length = rays[best_idx].1;
    let max_k_mu = rays.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);

    if n == 2 && value > 0.0 {
        let s = fan.samples[best_idx];
        let theta = s.boundary[0];
        let x = [sys.radius * theta.cos(), sys.radius * theta.sin()];
        let geo = msys.local(&x)?;
        let nu = geo.inward_normal();
        let e = [-theta.sin(), theta.cos(), 0.0];
        let t = linalg::orthogonalize(2, &geo.g, &e, &[nu]);
        let t = linalg::scale(2, &t, 1.0 / linalg::norm(2, &geo.g, &t));
        let eval = |psi: f64| -> Result<(f64, f64)> {
            let w = linalg::axpy(2, psi.cos(), &nu, &linalg::scale(2, &t, psi.sin()));
            let r = curvature_ray(&msys, &x, &w[..2], normals)?;
            Ok((r.0, r.1))
        };
        let step = std::f64::consts::PI / directions as f64;
        let lim = std::f64::consts::FRAC_PI_2 - 1e-9;
        let (mut a, mut b) = (
            (s.direction[0] - step).max(-lim),
            (s.direction[0] + step).min(lim),
        );
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        for _ in 0..40 {
            if fc.0 > fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = eval(d)?;
            }
            if b - a < 1e-7 {
                break;
            }
        }
        for cand in [fc, fd] {
            if cand.0 > value {
                value = cand.0;
                length = cand.1;
            }
        }
    }
    Ok(CurvatureReport {
        value,
        verdict: value <= 4.0,
        length,
        max_k_mu,
    })
}
