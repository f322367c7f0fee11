//! Two-point shooting, the time-free action on boundary pairs, the first
//! variation of the action, and gauge transformations of a system.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fieldexpr::Expr;
use crate::flow::{self, format_number, IntegratorOptions, PhasePoint, Trajectory};
use crate::geometry::{sample_ball, LocalGeometry, Metric, MpSystem};
use crate::linalg::{self, zero_matrix, zero_vector};
use crate::quadrature;
use crate::transform::{mp_ray, TensorTriple};
use crate::{Vector, MAX_DIM};

/// Shooting gives up above this miss, relative to the radius.
pub const SHOOTING_TOLERANCE: f64 = 1e-8;
const SHOOTING_TARGET: f64 = 1e-12;
const SHOOTING_MAX_ITERATIONS: usize = 40;
const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ShootResult {
    /// Initial velocity on the energy shell at `x`.
    pub v0: Vector,
    pub trajectory: Trajectory,
    /// Euclidean distance between the exit point and the target.
    pub miss: f64,
    pub iterations: usize,
}

/// `ν` followed by a g-orthonormal basis of the tangent space of the sphere at `x`.
fn boundary_frame(geo: &LocalGeometry) -> [Vector; MAX_DIM] {
    let n = geo.dim;
    let mut frame = [zero_vector(); MAX_DIM];
    frame[0] = geo.inward_normal();
    let mut filled = 1;
    let mut used = [false; MAX_DIM];
    while filled < n {
        let mut best = (0, zero_vector(), -1.0);
        for k in (0..n).filter(|&k| !used[k]) {
            let mut e = zero_vector();
            e[k] = 1.0;
            let r = linalg::orthogonalize(n, &geo.g, &e, &frame[..filled]);
            let len = linalg::norm(n, &geo.g, &r);
            if len > best.2 {
                best = (k, r, len);
            }
        }
        used[best.0] = true;
        frame[filled] = linalg::scale(n, &best.1, 1.0 / best.2);
        filled += 1;
    }
    frame
}

/// Log map of the round sphere at `target`: the tangent vector at `target`
/// pointing to `z`, with length the angle between them.
fn sphere_log(n: usize, target: &Vector, z: &Vector) -> Vector {
    let t_len = linalg::dot(n, target, target).sqrt();
    let radial = linalg::dot(n, z, target) / t_len;
    let tangent = linalg::axpy(n, -radial / t_len, target, z);
    let len = linalg::dot(n, &tangent, &tangent).sqrt();
    if len == 0.0 {
        return zero_vector();
    }
    // atan2 keeps full precision for small angles, where acos does not
    let angle = len.atan2(radial);
    linalg::scale(n, &tangent, angle * t_len / len)
}

/// Euclidean orthonormal basis of the tangent plane of the sphere at `y`.
fn euclidean_tangent_basis(n: usize, y: &Vector) -> Vec<Vector> {
    let id = linalg::identity(n);
    let mut basis = vec![linalg::scale(n, y, 1.0 / linalg::dot(n, y, y).sqrt())];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()));
    for k in order {
        if basis.len() == n {
            break;
        }
        let mut e = zero_vector();
        e[k] = 1.0;
        let r = linalg::orthogonalize(n, &id, &e, &basis);
        let len = linalg::dot(n, &r, &r).sqrt();
        if len > 1e-6 {
            basis.push(linalg::scale(n, &r, 1.0 / len));
        }
    }
    basis.remove(0);
    basis
}

fn on_boundary(sys: &MpSystem, x: &[f64]) -> Result<Vector> {
    if x.len() != sys.dim {
        return Err(Error::Dimension {
            expected: sys.dim,
            got: x.len(),
        });
    }
    let r = linalg::euclidean_norm(x);
    if (r - sys.radius).abs() > 1e-9 * sys.radius {
        return Err(Error::NotOnBoundary { point: x.to_vec() });
    }
    Ok(linalg::to_vector(x))
}

struct Shooter<'a> {
    sys: &'a MpSystem,
    x: Vector,
    y: Vector,
    frame: [Vector; MAX_DIM],
    speed: f64,
    tangent: Vec<Vector>,
    opts: IntegratorOptions,
}

struct Shot {
    v0: Vector,
    trajectory: Trajectory,
    residual: Vector,
    miss: f64,
}

impl Shooter<'_> {
    fn velocity(&self, a: &[f64]) -> Vector {
        let n = self.sys.dim;
        let mut d = self.frame[0];
        for (ai, t) in a.iter().zip(&self.frame[1..n]) {
            d = linalg::axpy(n, *ai, t, &d);
        }
        let len = (1.0 + a.iter().map(|c| c * c).sum::<f64>()).sqrt();
        linalg::scale(n, &d, self.speed / len)
    }

    fn fire(&self, a: &[f64]) -> Result<Shot> {
        let n = self.sys.dim;
        let v0 = self.velocity(a);
        let trajectory =
            flow::integrate_with(self.sys, &PhasePoint { x: self.x, v: v0 }, &self.opts)?;
        let z = trajectory.exit()?.exit_state.x;
        let log = sphere_log(n, &self.y, &z);
        let mut residual = zero_vector();
        for (r, t) in residual.iter_mut().zip(&self.tangent) {
            *r = linalg::dot(n, &log, t);
        }
        let miss = linalg::euclidean_norm(&linalg::axpy(n, -1.0, &self.y, &z)[..n]);
        Ok(Shot {
            v0,
            trajectory,
            residual,
            miss,
        })
    }

    fn seed(&self) -> Vec<f64> {
        let n = self.sys.dim;
        let g = self
            .sys
            .metric_at(&self.x[..n])
            .expect("metric evaluated before");
        let chord = linalg::axpy(n, -1.0, &self.x, &self.y);
        let c0 = linalg::inner(n, &g, &chord, &self.frame[0]);
        (1..n)
            .map(|i| linalg::inner(n, &g, &chord, &self.frame[i]) / c0)
            .collect()
    }
}

/// The MP-geodesic from boundary point `x` to boundary point `y`, found by
/// damped Newton iteration on the exit point over the initial direction.
pub fn shoot(sys: &MpSystem, x: &[f64], y: &[f64]) -> Result<ShootResult> {
    let n = sys.dim;
    let xv = on_boundary(sys, x)?;
    let yv = on_boundary(sys, y)?;
    if linalg::euclidean_norm(&linalg::axpy(n, -1.0, &xv, &yv)[..n]) < 1e-9 * sys.radius {
        return Err(Error::InvalidSystem(
            "shooting needs two distinct boundary points".into(),
        ));
    }
    let geo = sys.local(x)?;
    let shooter = Shooter {
        sys,
        x: xv,
        y: yv,
        frame: boundary_frame(&geo),
        speed: sys.conformal_factor_at(x)?.sqrt(),
        tangent: euclidean_tangent_basis(n, &yv),
        opts: IntegratorOptions::default(),
    };
    let m = n - 1;
    let mut a = shooter.seed();
    let mut best = shooter.fire(&a)?;
    let mut iterations = 0;
    while iterations < SHOOTING_MAX_ITERATIONS && best.miss > SHOOTING_TARGET * sys.radius {
        iterations += 1;
        let mut jac = zero_matrix();
        for j in 0..m {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[j] += JACOBIAN_STEP;
            am[j] -= JACOBIAN_STEP;
            let p = shooter.fire(&ap)?;
            let q = shooter.fire(&am)?;
            for i in 0..m {
                jac[i][j] = (p.residual[i] - q.residual[i]) / (2.0 * JACOBIAN_STEP);
            }
        }
        let Some(inv) = linalg::inverse(m, &jac) else {
            break;
        };
        let step = linalg::mat_vec(m, &inv, &best.residual);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-4 {
            let trial: Vec<f64> = (0..m).map(|i| a[i] - lambda * step[i]).collect();
            if let Ok(shot) = shooter.fire(&trial) {
                if shot.miss < best.miss {
                    a = trial;
                    best = shot;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    log::debug!(
        "shoot {x:?} -> {y:?}: miss {:e} after {iterations} iterations",
        best.miss
    );
    if best.miss > SHOOTING_TOLERANCE * sys.radius {
        return Err(Error::ShootingFailed {
            iterations,
            miss: best.miss,
        });
    }
    Ok(ShootResult {
        v0: best.v0,
        trajectory: best.trajectory,
        miss: best.miss,
        iterations,
    })
}

/// `½|v|²_g + k − α(v) − U` at `(geo.x, v)`.
fn lagrangian(sys: &MpSystem, geo: &LocalGeometry, v: &Vector) -> Result<f64> {
    let n = sys.dim;
    let x = &geo.x[..n];
    let mut alpha_v = 0.0;
    for (a, vi) in sys.alpha.iter().zip(v) {
        alpha_v += a.eval(x)? * vi;
    }
    Ok(0.5 * geo.inner(v, v) + sys.energy - alpha_v - geo.potential)
}

/// Time-free action of the MP-geodesic starting at `start`, up to its exit.
pub fn action_along(sys: &MpSystem, start: &PhasePoint) -> Result<f64> {
    let integrand = |geo: &LocalGeometry, v: &Vector, d: &mut [f64]| {
        d[0] = lagrangian(sys, geo, v)?;
        Ok(())
    };
    let traj = flow::integrate_augmented(
        sys,
        start,
        &[0.0],
        &integrand,
        &IntegratorOptions::default(),
    )?;
    traj.tau()?;
    Ok(traj.aux[0])
}

/// Time-free action `½∫|σ̇|² + kT − ∫(α(σ̇) + U)` of an arbitrary curve
/// `t ↦ (σ(t), σ̇(t))` on `[0, T]`, by Gauss–Legendre quadrature.
pub fn curve_action(
    sys: &MpSystem,
    curve: &dyn Fn(f64) -> (Vector, Vector),
    duration: f64,
    nodes: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (t, w) in quadrature::gauss_legendre(nodes, 0.0, duration) {
        let (x, v) = curve(t);
        let geo = sys.local(&x[..sys.dim])?;
        total += w * lagrangian(sys, &geo, &v)?;
    }
    Ok(total)
}

/// Mañé action potential `𝔸(x, y)` between boundary points.
pub fn mane_action(sys: &MpSystem, x: &[f64], y: &[f64]) -> Result<f64> {
    let shot = shoot(sys, x, y)?;
    action_along(
        sys,
        &PhasePoint {
            x: linalg::to_vector(x),
            v: shot.v0,
        },
    )
}

/// Action potential of a magnetic system (zero potential, energy ½), for
/// instance the output of `reduction::reduce`.
pub fn magnetic_action(msys: &MpSystem, x: &[f64], y: &[f64]) -> Result<f64> {
    if !msys.potential.is_zero() || msys.energy != 0.5 {
        return Err(Error::InvalidSystem(
            "a magnetic system has zero potential and energy 1/2".into(),
        ));
    }
    mane_action(msys, x, y)
}

/// The system `(g + s h, α + s β, U + s V)`.
pub fn perturbed_system(sys: &MpSystem, pert: &TensorTriple, s: f64) -> Result<MpSystem> {
    let n = sys.dim;
    if pert.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: pert.dim(),
        });
    }
    let metric = sys.metric.perturbed(n, &pert.h, s);
    let alpha: Vec<Expr> = (0..n)
        .map(|i| sys.alpha[i].clone() + s * pert.beta[i].clone())
        .collect();
    let potential = sys.potential.clone() + s * pert.v.clone();
    let out = MpSystem {
        metric,
        alpha,
        potential,
        ..sys.clone()
    };
    for x in sample_ball(n, sys.radius, 8, 16) {
        if linalg::cholesky(n, &out.metric_at(&x[..n])?).is_none() {
            return Err(Error::NotPositiveDefinite { step: s });
        }
    }
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationCheck {
    /// Richardson-extrapolated central difference of `s ↦ 𝔸_s(x, y)`.
    pub fd_slope: f64,
    /// `½∫h(σ̇, σ̇) − ∫β(σ̇) − ∫V` along the unperturbed geodesic.
    pub transform_value: f64,
    /// `|fd_slope − transform_value|`.
    pub discrepancy: f64,
}

impl LinearizationCheck {
    pub fn relative_error(&self) -> f64 {
        self.discrepancy / self.transform_value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Compare the derivative of the boundary action under the perturbation
/// `[h, β, V]` with the ray integral of `[h/2, −β, −V]`. `steps = (δ₁, δ₂)`
/// are the two central-difference steps combined by Richardson extrapolation.
pub fn linearization_check(
    sys: &MpSystem,
    pert: &TensorTriple,
    x: &[f64],
    y: &[f64],
    steps: (f64, f64),
) -> Result<LinearizationCheck> {
    let slope = |d: f64| -> Result<f64> {
        let plus = mane_action(&perturbed_system(sys, pert, d)?, x, y)?;
        let minus = mane_action(&perturbed_system(sys, pert, -d)?, x, y)?;
        Ok((plus - minus) / (2.0 * d))
    };
    let (d1, d2) = steps;
    let q2 = (d1 / d2).powi(2);
    let fd_slope = (q2 * slope(d2)? - slope(d1)?) / (q2 - 1.0);

    let shot = shoot(sys, x, y)?;
    let probe = TensorTriple::zero(sys.dim).linear_combination(0.0, pert, 1.0);
    let probe = TensorTriple {
        h: probe
            .h
            .iter()
            .map(|r| r.iter().map(|e| 0.5 * e.clone()).collect())
            .collect(),
        beta: probe.beta.iter().map(|e| -e.clone()).collect(),
        v: -probe.v,
    };
    let transform_value = mp_ray(sys, &probe, x, &shot.v0[..sys.dim])?;
    Ok(LinearizationCheck {
        fd_slope,
        transform_value,
        discrepancy: (fd_slope - transform_value).abs(),
    })
}

/// A k-gauge: a diffeomorphism `f` fixing the boundary, a scalar `φ`
/// vanishing on the boundary and a positive scalar `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeData {
    pub map: Vec<Expr>,
    pub varphi: Expr,
    pub mu: Expr,
}

fn boundary_samples(dim: usize, radius: f64) -> Vec<Vector> {
    let mut out = Vec::new();
    if dim == 2 {
        for (t, _) in quadrature::periodic(64, 0.0) {
            out.push([radius * t.cos(), radius * t.sin(), 0.0]);
        }
    } else {
        for (p, _) in quadrature::midpoint(16, 0.0, std::f64::consts::PI) {
            for (t, _) in quadrature::periodic(32, 0.0) {
                out.push([
                    radius * p.sin() * t.cos(),
                    radius * p.sin() * t.sin(),
                    radius * p.cos(),
                ]);
            }
        }
    }
    out
}

impl GaugeData {
    pub fn identity(dim: usize) -> GaugeData {
        GaugeData {
            map: (0..dim).map(Expr::var).collect(),
            varphi: Expr::zero(),
            mu: Expr::one(),
        }
    }

    /// Adds `dφ` to the magnetic potential.
    pub fn exact_form(dim: usize, varphi: Expr) -> GaugeData {
        GaugeData {
            varphi,
            ..GaugeData::identity(dim)
        }
    }

    pub fn conformal(dim: usize, mu: Expr) -> GaugeData {
        GaugeData {
            mu,
            ..GaugeData::identity(dim)
        }
    }

    /// `x ↦ x + ε (R² − |x|²)² w`, the identity on the boundary sphere.
    pub fn interior_diffeo(dim: usize, radius: f64, epsilon: f64, w: &[f64]) -> GaugeData {
        let rho = Expr::constant(radius * radius) - Expr::radius_squared(dim);
        let bump = epsilon * rho.powi(2);
        GaugeData {
            map: (0..dim)
                .map(|i| Expr::var(i) + w[i] * bump.clone())
                .collect(),
            ..GaugeData::identity(dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    fn is_identity_map(&self) -> bool {
        self.map.iter().enumerate().all(|(i, e)| *e == Expr::var(i))
    }

    pub fn apply_map(&self, x: &[f64]) -> Result<Vector> {
        let mut out = zero_vector();
        for (o, e) in out.iter_mut().zip(&self.map) {
            *o = e.eval(x)?;
        }
        Ok(out)
    }

    /// `f⁻¹(y)` by the fixed-point iteration `x ← x − (f(x) − y)`.
    pub fn inverse_point(&self, y: &[f64]) -> Result<Vector> {
        let n = self.dim();
        let mut x = linalg::to_vector(y);
        for _ in 0..200 {
            let fx = self.apply_map(&x[..n])?;
            let mut change: f64 = 0.0;
            for i in 0..n {
                let d = fx[i] - y[i];
                x[i] -= d;
                change = change.max(d.abs());
            }
            if change < 1e-15 {
                return Ok(x);
            }
        }
        Err(Error::InvalidGauge(format!(
            "fixed-point inversion of the gauge map did not converge at {y:?}"
        )))
    }

    /// Check the boundary conditions on `f` and `φ`, positivity of `μ` and
    /// invertibility of `Df` on sampling grids.
    pub fn validate(&self, sys: &MpSystem) -> Result<()> {
        let n = sys.dim;
        if self.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.dim(),
            });
        }
        for x in boundary_samples(n, sys.radius) {
            let x = &x[..n];
            let fx = self.apply_map(x)?;
            let moved = (0..n).map(|i| (fx[i] - x[i]).abs()).fold(0.0, f64::max);
            if moved > 1e-10 {
                return Err(Error::InvalidGauge(format!(
                    "map moves the boundary point {x:?} by {moved:e}"
                )));
            }
            let phi = self.varphi.eval(x)?;
            if phi.abs() > 1e-10 {
                return Err(Error::InvalidGauge(format!(
                    "scalar is {phi:e} at the boundary point {x:?}"
                )));
            }
        }
        let jac: Vec<Vec<Expr>> = self
            .map
            .iter()
            .map(|f| (0..n).map(|i| f.diff(i)).collect())
            .collect();
        for x in sample_ball(n, sys.radius, 8, 16) {
            let x = &x[..n];
            if self.mu.eval(x)? <= 0.0 {
                return Err(Error::InvalidGauge(format!("mu is not positive at {x:?}")));
            }
            let mut m = zero_matrix();
            for a in 0..n {
                for i in 0..n {
                    m[a][i] = jac[a][i].eval(x)?;
                }
            }
            // f is the identity on the boundary, so Df keeps a positive determinant
            if linalg::det(n, &m) < 1e-8 {
                return Err(Error::SingularGauge { point: x.to_vec() });
            }
        }
        Ok(())
    }
}

/// The gauge-equivalent system `g′ = μ⁻¹ f*g`, `α′ = f*α + dφ`,
/// `U′ = μ(f*U − k) + k`.
pub fn gauge_apply(sys: &MpSystem, gd: &GaugeData) -> Result<MpSystem> {
    gd.validate(sys)?;
    let n = sys.dim;
    let k = sys.energy;
    let inv_mu = Expr::one() / gd.mu.clone();
    let (metric, alpha, potential) = if gd.is_identity_map() {
        let alpha = (0..n)
            .map(|i| sys.alpha[i].clone() + gd.varphi.diff(i))
            .collect();
        (sys.metric.scaled(&inv_mu), alpha, sys.potential.clone())
    } else {
        let jac: Vec<Vec<Expr>> = gd
            .map
            .iter()
            .map(|f| (0..n).map(|i| f.diff(i)).collect())
            .collect();
        let pulled: Vec<Vec<Expr>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| sys.metric.entry(a, b).substitute(&gd.map))
                    .collect()
            })
            .collect();
        let mut rows = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let mut e = Expr::zero();
                for a in 0..n {
                    for b in 0..n {
                        e = e + jac[a][i].clone() * jac[b][j].clone() * pulled[a][b].clone();
                    }
                }
                rows[i][j] = inv_mu.clone() * e;
                rows[j][i] = rows[i][j].clone();
            }
        }
        let alpha = (0..n)
            .map(|i| {
                let mut e = gd.varphi.diff(i);
                for a in 0..n {
                    e = e + jac[a][i].clone() * sys.alpha[a].substitute(&gd.map);
                }
                e
            })
            .collect();
        (Metric::Full(rows), alpha, sys.potential.substitute(&gd.map))
    };
    let potential = if gd.mu == Expr::one() {
        potential
    } else {
        gd.mu.clone() * (potential - k) + k
    };
    MpSystem::new(n, sys.radius, metric, alpha, potential, k)
}

/// Boundary action values `𝔸(x_i, x_j)` on a planar system, with
/// `x_i = R(cos θ_i, sin θ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    pub angles: Vec<f64>,
    /// `None` on pairs closer than the separation threshold.
    pub values: Vec<Vec<Option<f64>>>,
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

pub fn boundary_point(radius: f64, theta: f64) -> [f64; 2] {
    [radius * theta.cos(), radius * theta.sin()]
}

/// Boundary action table over `angles`, skipping pairs with angular
/// separation below `min_separation`.
pub fn boundary_action_table(
    sys: &MpSystem,
    angles: &[f64],
    min_separation: f64,
) -> Result<ActionTable> {
    if sys.dim != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: sys.dim,
        });
    }
    if angles.is_empty() {
        return Err(Error::EmptyGrid("boundary angles".into()));
    }
    let m = angles.len();
    let flat: Vec<Option<f64>> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            if angular_distance(angles[i], angles[j]) < min_separation {
                return Ok(None);
            }
            let x = boundary_point(sys.radius, angles[i]);
            let y = boundary_point(sys.radius, angles[j]);
            mane_action(sys, &x, &y).map(Some)
        })
        .collect::<Result<_>>()?;
    Ok(ActionTable {
        angles: angles.to_vec(),
        values: flat.chunks(m).map(<[_]>::to_vec).collect(),
    })
}

impl ActionTable {
    /// Largest entrywise difference over pairs present in both tables.
    pub fn max_abs_diff(&self, other: &ActionTable) -> f64 {
        let mut m: f64 = 0.0;
        for (r, s) in self.values.iter().zip(&other.values) {
            for (a, b) in r.iter().zip(s) {
                if let (Some(a), Some(b)) = (a, b) {
                    m = m.max((a - b).abs());
                }
            }
        }
        m
    }

    /// CSV with the angles as header row and first column; excluded pairs are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["theta".to_string()];
        header.extend(self.angles.iter().map(|a| format!("{a:.12}")));
        w.write_record(&header)?;
        for (a, row) in self.angles.iter().zip(&self.values) {
            let mut rec = vec![format!("{a:.12}")];
            rec.extend(row.iter().map(|v| v.map(format_number).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
