//! Magnetic reduction: `(g, α, U)` at energy `k` becomes `(G, α)` with
//! `G = P g`, `P = 2(k − U)`, at energy ½ and with no potential.
//!
//! A ray `σ(t)` of the original system, reparametrized by
//! `s(t) = ∫₀ᵗ P(σ) dt`, is a unit-speed magnetic geodesic `γ(s)` of the
//! reduced one, with `dγ/ds = σ̇ / P`.

use crate::error::{Error, Result};
use std::sync::Arc;

use crate::fieldexpr::Expr;
use crate::flow::{self, ExitRecord, IntegratorOptions, PhasePoint, TimeChange, Trajectory};
use crate::geometry::{LocalGeometry, MpSystem};
use crate::linalg;
use crate::Vector;

/// The reduced system, as an MP-system with `U = 0` and `k = ½`.
pub fn reduce(sys: &MpSystem) -> Result<MpSystem> {
    MpSystem::new(
        sys.dim,
        sys.radius,
        sys.metric.scaled(&sys.conformal_factor()),
        sys.alpha.clone(),
        Expr::zero(),
        0.5,
    )
}

/// Right-hand side of the magnetic geodesic equation of a reduced system.
pub fn magnetic_rhs(msys: &MpSystem, x: &[f64], w: &[f64]) -> Result<(Vector, Vector)> {
    flow::mp_rhs(msys, x, w)
}

/// Monotone table `t ↦ s(t)`, interpolated by monotone cubic Hermite pieces
/// whose node slopes are the exact derivatives `P(σ(t))`.
#[derive(Debug, Clone)]
pub struct ReparamMap {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    slope: Vec<f64>,
}

impl ReparamMap {
    fn new(t: Vec<f64>, s: Vec<f64>, mut slope: Vec<f64>) -> ReparamMap {
        // Fritsch–Carlson limiter on each interval.
        for i in 0..t.len().saturating_sub(1) {
            let secant = (s[i + 1] - s[i]) / (t[i + 1] - t[i]);
            if secant <= 0.0 {
                slope[i] = 0.0;
                slope[i + 1] = 0.0;
                continue;
            }
            let a = slope[i] / secant;
            let b = slope[i + 1] / secant;
            let r = a * a + b * b;
            if r > 9.0 {
                let f = 3.0 / r.sqrt();
                slope[i] = f * a * secant;
                slope[i + 1] = f * b * secant;
            }
        }
        ReparamMap { t, s, slope }
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        let last = self.t.len() - 1;
        if t <= self.t[0] {
            return self.s[0];
        }
        if t >= self.t[last] {
            return self.s[last];
        }
        let i = self.t.partition_point(|&ti| ti <= t) - 1;
        let h = self.t[i + 1] - self.t[i];
        let u = (t - self.t[i]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.s[i]
            + h10 * h * self.slope[i]
            + h01 * self.s[i + 1]
            + h11 * h * self.slope[i + 1]
    }

    /// Inverse map by bisection.
    pub fn t_of_s(&self, s: f64) -> f64 {
        let last = self.t.len() - 1;
        if s <= self.s[0] {
            return self.t[0];
        }
        if s >= self.s[last] {
            return self.t[last];
        }
        let i = self.s.partition_point(|&si| si <= s) - 1;
        let (mut lo, mut hi) = (self.t[i], self.t[i + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.s_of_t(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn total(&self) -> f64 {
        *self.s.last().expect("nonempty table")
    }
}

fn conformal_integrand(
    sys: &MpSystem,
) -> impl Fn(&LocalGeometry, &Vector, &mut [f64]) -> Result<()> + Sync + '_ {
    move |geo: &LocalGeometry, _v: &Vector, d: &mut [f64]| {
        d[0] = 2.0 * (sys.energy - geo.potential);
        Ok(())
    }
}

/// The MP-ray from `traj`'s start point, re-integrated together with `s(t)`,
/// returned as a curve of the reduced system with its time change.
pub fn reparametrize(sys: &MpSystem, traj: &Trajectory) -> Result<(Trajectory, ReparamMap)> {
    let msys = reduce(sys)?;
    let start = traj.states[0];
    let opts = IntegratorOptions {
        t_max: Some(traj.t_max),
        ..IntegratorOptions::default()
    }
    .with_dense();
    let f = conformal_integrand(sys);
    // re-run with s as an extra state so that s(t) has the same accuracy as σ
    let source = flow::integrate_augmented(sys, &start, &[0.0], &f, &opts)?;
    let n = sys.dim;
    let mut states = Vec::with_capacity(source.states.len());
    let mut slope = Vec::with_capacity(source.states.len());
    let mut drift: f64 = 0.0;
    for st in &source.states {
        let p = sys.conformal_factor_at(&st.x[..n])?;
        let w = linalg::scale(n, &st.v, 1.0 / p);
        drift = drift.max((crate::geometry::energy(&msys, &st.x[..n], &w[..n])? - 0.5).abs());
        slope.push(p);
        states.push(PhasePoint { x: st.x, v: w });
    }
    let map = ReparamMap::new(source.times.clone(), source.aux_history(0), slope);
    let exit = source.exit.as_ref().map(|_| ExitRecord {
        tau: map.total(),
        exit_state: *states.last().expect("nonempty"),
    });
    let curve = Trajectory {
        dim: n,
        times: map.s.clone(),
        states,
        exit,
        aux: Vec::new(),
        energy_drift: drift,
        t_max: map.total(),
        aux_samples: Vec::new(),
        dense: Vec::new(),
        time_change: Some(Arc::new(TimeChange {
            map: map.clone(),
            source,
            sys: sys.clone(),
        })),
    };
    Ok((curve, map))
}

/// Initial condition of the reduced ray matching the MP-ray `(x, v)`.
pub fn reduced_start(sys: &MpSystem, start: &PhasePoint) -> Result<PhasePoint> {
    let p = sys.conformal_factor_at(&start.x[..sys.dim])?;
    if p <= 0.0 {
        return Err(Error::EnergyBelowPotential {
            energy: sys.energy,
            potential: sys.potential_at(&start.x[..sys.dim])?,
            point: start.x[..sys.dim].to_vec(),
        });
    }
    Ok(PhasePoint {
        x: start.x,
        v: linalg::scale(sys.dim, &start.v, 1.0 / p),
    })
}

/// Largest coordinate distance between the reparametrized MP-ray and the
/// directly integrated reduced ray, sampled at `samples` equispaced values
/// of `s`, together with the largest `| |γ′|_G − 1 |`.
pub fn correspondence_residual(
    sys: &MpSystem,
    start: &PhasePoint,
    samples: usize,
) -> Result<(f64, f64)> {
    let msys = reduce(sys)?;
    let opts = IntegratorOptions::default().with_dense();
    let traj = flow::integrate_with(sys, start, &opts)?;
    let (curve, map) = reparametrize(sys, &traj)?;
    let direct = flow::integrate_with(&msys, &reduced_start(sys, start)?, &opts)?;
    let n = sys.dim;
    let s_end = map.total().min(direct.end_time());
    let mut dist: f64 = 0.0;
    let mut speed: f64 = 0.0;
    for i in 0..=samples {
        let s = s_end * i as f64 / samples as f64;
        let t = map.t_of_s(s);
        let a = traj.state_at(t);
        let b = direct.state_at(s);
        let d: f64 = (0..n)
            .map(|k| (a.x[k] - b.x[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        dist = dist.max(d);
        let c = curve.state_at(s);
        let g = msys.metric_at(&c.x[..n])?;
        speed = speed.max((linalg::norm(n, &g, &c.v) - 1.0).abs());
    }
    // exit of one ray and not the other would show up as a large endpoint gap
    let gap = (map.total() - direct.tau().unwrap_or(f64::INFINITY)).abs();
    if traj.exit.is_some() != direct.exit.is_some() {
        dist = f64::INFINITY;
    } else if traj.exit.is_some() {
        dist = dist.max(gap);
    }
    Ok((dist, speed))
}
