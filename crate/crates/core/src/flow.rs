//! Fixed-energy flow of an MP-system.
//!
//! The integrator is the Dormand–Prince 5(4) pair with Hairer's dense output.
//! The state is `[x, v, aux]`: position, velocity and any number of
//! accumulated integrals (`d aux / dt = integrand(x, v)`), all under the same
//! error control. A ray stops when `ρ = R² − |x|²` changes sign; the crossing
//! is bracketed on the dense output and polished with Newton steps that
//! re-take an exact Runge–Kutta step from the start of the bracketing step.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{LocalGeometry, MpSystem};
use crate::linalg;
use crate::Vector;

/// Accumulated integrand along a ray: writes `d aux / dt` at `(geo.x, v)`.
pub type Integrand<'a> = dyn Fn(&LocalGeometry, &Vector, &mut [f64]) -> Result<()> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vector,
    pub v: Vector,
}

impl PhasePoint {
    pub fn new(x: &[f64], v: &[f64]) -> PhasePoint {
        PhasePoint {
            x: linalg::to_vector(x),
            v: linalg::to_vector(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitRecord {
    pub tau: f64,
    pub exit_state: PhasePoint,
}

/// One accepted step with its dense-output coefficients.
#[derive(Debug, Clone)]
pub(crate) struct DenseStep {
    t0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval(&self, theta: f64, out: &mut [f64]) {
        let th1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub exit: Option<ExitRecord>,
    /// Values of the accumulated integrals at the last time.
    pub aux: Vec<f64>,
    /// `max |E − k|` over the accepted steps.
    pub energy_drift: f64,
    pub t_max: f64,
    /// Accumulated integrals at every entry of `times`, row-major.
    pub(crate) aux_samples: Vec<f64>,
    pub(crate) dense: Vec<DenseStep>,
    /// Set on curves obtained from another trajectory by a change of time.
    pub(crate) time_change: Option<Arc<TimeChange>>,
}

/// `γ(s) = σ(t(s))`, `γ′(s) = σ̇(t(s)) / P(σ(t(s)))`.
#[derive(Debug, Clone)]
pub(crate) struct TimeChange {
    pub map: crate::reduction::ReparamMap,
    pub source: Trajectory,
    pub sys: MpSystem,
}

impl Trajectory {
    /// Exit record, or `Trapped` when the ray ran to `t_max` inside the domain.
    pub fn exit(&self) -> Result<&ExitRecord> {
        self.exit
            .as_ref()
            .ok_or(Error::Trapped { t_max: self.t_max })
    }

    pub fn tau(&self) -> Result<f64> {
        Ok(self.exit()?.tau)
    }

    pub fn end_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least one sample")
    }

    /// Phase point at any time within the integrated range, from the dense output.
    pub fn state_at(&self, t: f64) -> PhasePoint {
        let n = self.dim;
        if let Some(tc) = &self.time_change {
            let st = tc.source.state_at(tc.map.t_of_s(t));
            let p = tc.sys.conformal_factor_at(&st.x[..n]).unwrap_or(f64::NAN);
            return PhasePoint {
                x: st.x,
                v: linalg::scale(n, &st.v, 1.0 / p),
            };
        }
        if self.dense.is_empty() || t <= self.times[0] {
            return self.states[0];
        }
        if t >= self.end_time() {
            return *self.states.last().expect("nonempty");
        }
        let idx = self
            .dense
            .partition_point(|s| s.t0 + s.h < t)
            .min(self.dense.len() - 1);
        let step = &self.dense[idx];
        let mut buf = vec![0.0; step.rcont[0].len()];
        step.eval(((t - step.t0) / step.h).clamp(0.0, 1.0), &mut buf);
        PhasePoint::new(&buf[..n], &buf[n..2 * n])
    }

    /// Values of accumulated integral `index` at every entry of `times`.
    pub fn aux_history(&self, index: usize) -> Vec<f64> {
        let m = self.aux.len();
        self.aux_samples
            .iter()
            .skip(index)
            .step_by(m.max(1))
            .copied()
            .collect()
    }

    /// CSV with columns `t, x1..xn, v1..vn, E`.
    pub fn write_csv<W: Write>(&self, sys: &MpSystem, out: W) -> Result<()> {
        let n = self.dim;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.push("E".into());
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let e = crate::geometry::energy(sys, &s.x[..n], &s.v[..n])?;
            let mut row = vec![format_number(*t)];
            row.extend(s.x[..n].iter().map(|v| format_number(*v)));
            row.extend(s.v[..n].iter().map(|v| format_number(*v)));
            row.push(format_number(e));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fixed-width scientific notation used by every CSV writer.
pub fn format_number(v: f64) -> String {
    format!("{v:.15e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Cutoff time; `None` picks `50·R / |v|` from the start state.
    pub t_max: Option<f64>,
    pub max_steps: usize,
    /// Keep the dense output (needed for `state_at`).
    pub keep_dense: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            t_max: None,
            max_steps: 1_000_000,
            keep_dense: false,
        }
    }
}

impl IntegratorOptions {
    pub fn with_dense(mut self) -> Self {
        self.keep_dense = true;
        self
    }
}

/// `(dx, dv)` of the MP-geodesic equation.
pub fn mp_rhs(sys: &MpSystem, x: &[f64], v: &[f64]) -> Result<(Vector, Vector)> {
    let geo = sys.local(x)?;
    let v = linalg::to_vector(v);
    Ok((v, geo.acceleration(&v)))
}

fn rho(sys: &MpSystem, y: &[f64]) -> f64 {
    sys.radius * sys.radius - y[..sys.dim].iter().map(|v| v * v).sum::<f64>()
}

fn rho_rate(sys: &MpSystem, y: &[f64]) -> f64 {
    let n = sys.dim;
    -2.0 * (0..n).map(|i| y[i] * y[n + i]).sum::<f64>()
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stepper<'a> {
    sys: &'a MpSystem,
    integrand: Option<&'a Integrand<'a>>,
    len: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a MpSystem, integrand: Option<&'a Integrand<'a>>, aux_len: usize) -> Self {
        let len = 2 * sys.dim + aux_len;
        Stepper {
            sys,
            integrand,
            len,
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.sys.dim;
        let geo = self.sys.local(&y[..n])?;
        let v = linalg::to_vector(&y[n..2 * n]);
        let a = geo.acceleration(&v);
        dy[..n].copy_from_slice(&v[..n]);
        dy[n..2 * n].copy_from_slice(&a[..n]);
        if let Some(f) = self.integrand {
            f(&geo, &v, &mut dy[2 * n..])?;
        }
        Ok(())
    }

    /// One step of size `h` from `y` with `k[0] = f(y)` already filled.
    /// Writes the 5th-order solution to `y1` and `k[6] = f(y1)`; returns the
    /// scaled error norm.
    fn step(&mut self, y: &[f64], h: f64, y1: &mut [f64], rtol: f64, atol: f64) -> Result<f64> {
        let len = self.len;
        macro_rules! stage {
            ($dst:expr, $($coef:expr => $src:expr),+) => {{
                for i in 0..len {
                    self.tmp[i] = y[i] + h * (0.0 $(+ $coef * self.k[$src][i])+);
                }
                let tmp = std::mem::take(&mut self.tmp);
                let mut dst = std::mem::take(&mut self.k[$dst]);
                let r = self.rhs(&tmp, &mut dst);
                self.tmp = tmp;
                self.k[$dst] = dst;
                r?;
            }};
        }
        stage!(1, A21 => 0);
        stage!(2, A31 => 0, A32 => 1);
        stage!(3, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..len {
            y1[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        let mut k7 = std::mem::take(&mut self.k[6]);
        let r = self.rhs(y1, &mut k7);
        self.k[6] = k7;
        r?;
        let mut err = 0.0;
        for i in 0..len {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        Ok((err / len as f64).sqrt())
    }

    fn dense(&self, t0: f64, h: f64, y0: &[f64], y1: &[f64]) -> DenseStep {
        let len = self.len;
        let k = &self.k;
        let mut r = std::array::from_fn(|_| vec![0.0; len]);
        for i in 0..len {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = y0[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i]
                    + D3 * k[2][i]
                    + D4 * k[3][i]
                    + D5 * k[4][i]
                    + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        DenseStep { t0, h, rcont: r }
    }
}

/// How an integration run ends.
#[derive(Debug, Clone, Copy, PartialEq)]
enum StopRule {
    /// At the first boundary crossing, or at `t_max` (trapped).
    Exit,
    /// Exactly at `t_end`; crossing the boundary first is an error.
    Time(f64),
}

struct RunOutput {
    traj: Trajectory,
    /// Time at which the ray left the domain during a `StopRule::Time` run.
    left_at: Option<f64>,
}

fn run(
    sys: &MpSystem,
    start: &PhasePoint,
    aux0: &[f64],
    integrand: Option<&Integrand<'_>>,
    opts: &IntegratorOptions,
    stop: StopRule,
) -> Result<RunOutput> {
    let n = sys.dim;
    let m = aux0.len();
    let mut st = Stepper::new(sys, integrand, m);
    let len = st.len;
    let mut y = vec![0.0; len];
    y[..n].copy_from_slice(&start.x[..n]);
    y[n..2 * n].copy_from_slice(&start.v[..n]);
    y[2 * n..].copy_from_slice(aux0);

    let speed = linalg::euclidean_norm(&start.v[..n]);
    let t_max = match stop {
        StopRule::Time(t) => t,
        StopRule::Exit => opts.t_max.unwrap_or(50.0 * sys.radius / speed.max(1e-300)),
    };

    let mut traj = Trajectory {
        dim: n,
        times: vec![0.0],
        states: vec![*start],
        exit: None,
        aux: aux0.to_vec(),
        energy_drift: 0.0,
        t_max,
        aux_samples: aux0.to_vec(),
        dense: Vec::new(),
        time_change: None,
    };
    let energy_of =
        |y: &[f64]| -> Result<f64> { crate::geometry::energy(sys, &y[..n], &y[n..2 * n]) };
    traj.energy_drift = (energy_of(&y)? - sys.energy).abs();
    if t_max == 0.0 {
        return Ok(RunOutput {
            traj,
            left_at: None,
        });
    }

    let mut k0 = std::mem::take(&mut st.k[0]);
    st.rhs(&y, &mut k0)?;
    st.k[0] = k0;

    // Initial step from Hairer's heuristic.
    let mut h = {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..len {
            let sc = opts.atol + opts.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (st.k[0][i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / len as f64).sqrt(), (d1 / len as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0.min(t_max).min(0.1 * sys.radius / speed.max(1e-300))
    };

    let mut t = 0.0;
    let mut y1 = vec![0.0; len];
    let mut buf = vec![0.0; len];
    let mut rejected_last = false;
    for _ in 0..opts.max_steps {
        if t + h > t_max {
            h = t_max - t;
        }
        if h <= 1e-14 * t.abs().max(sys.radius / speed.max(1e-300)) {
            return Err(Error::StepUnderflow { t });
        }
        let err = st.step(&y, h, &mut y1, opts.rtol, opts.atol)?;
        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= fac;
            rejected_last = true;
            continue;
        }

        // Boundary crossing inside [t, t + h]?
        let dense = st.dense(t, h, &y, &y1);
        let mut crossing = None;
        let mut lo = 0.0;
        const SUB: usize = 8;
        for j in 1..=SUB {
            let theta = j as f64 / SUB as f64;
            let r = if j == SUB {
                rho(sys, &y1)
            } else {
                dense.eval(theta, &mut buf);
                rho(sys, &buf)
            };
            if r < 0.0 {
                crossing = Some((lo, theta));
                break;
            }
            lo = theta;
        }

        if let Some((mut a, mut b)) = crossing {
            if let StopRule::Time(_) = stop {
                let tc = t + h * b;
                traj.exit = None;
                return Ok(RunOutput {
                    traj,
                    left_at: Some(tc),
                });
            }
            while (b - a) * h > 1e-13 {
                let mid = 0.5 * (a + b);
                dense.eval(mid, &mut buf);
                if rho(sys, &buf) >= 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let mut hc = 0.5 * (a + b) * h;
            // Newton polish with exact steps from the start of this step.
            let mut ye = vec![0.0; len];
            let mut k_saved = st.k[0].clone();
            let mut best = {
                dense.eval(hc / h, &mut buf);
                buf.clone()
            };
            for _ in 0..4 {
                if hc <= 0.0 {
                    break;
                }
                st.k[0].copy_from_slice(&k_saved);
                st.step(&y, hc, &mut ye, opts.rtol, opts.atol)?;
                best.copy_from_slice(&ye);
                let r = rho(sys, &ye);
                let dr = rho_rate(sys, &ye);
                if dr == 0.0 {
                    break;
                }
                let next = hc - r / dr;
                if !(next >= 0.0 && next <= h) || (next - hc).abs() <= 1e-15 * h {
                    break;
                }
                hc = next;
            }
            if hc <= 0.0 {
                hc = 0.0;
                best.copy_from_slice(&y);
            } else {
                st.k[0].copy_from_slice(&k_saved);
                st.step(&y, hc, &mut ye, opts.rtol, opts.atol)?;
                best.copy_from_slice(&ye);
            }
            std::mem::swap(&mut k_saved, &mut st.k[0]);
            let tau = t + hc;
            let exit_state = PhasePoint::new(&best[..n], &best[n..2 * n]);
            traj.energy_drift = traj
                .energy_drift
                .max((energy_of(&best)? - sys.energy).abs());
            if opts.keep_dense && hc > 0.0 {
                traj.dense.push(dense);
            }
            traj.times.push(tau);
            traj.states.push(exit_state);
            traj.aux = best[2 * n..].to_vec();
            traj.aux_samples.extend_from_slice(&best[2 * n..]);
            traj.exit = Some(ExitRecord { tau, exit_state });
            return Ok(RunOutput {
                traj,
                left_at: None,
            });
        }

        // Accept.
        t += h;
        std::mem::swap(&mut y, &mut y1);
        let k6 = std::mem::take(&mut st.k[6]);
        st.k[0] = k6;
        st.k[6] = vec![0.0; len];
        traj.energy_drift = traj.energy_drift.max((energy_of(&y)? - sys.energy).abs());
        traj.times.push(t);
        traj.states.push(PhasePoint::new(&y[..n], &y[n..2 * n]));
        traj.aux_samples.extend_from_slice(&y[2 * n..]);
        if opts.keep_dense {
            traj.dense.push(dense);
        }
        if t >= t_max {
            traj.aux = y[2 * n..].to_vec();
            return Ok(RunOutput {
                traj,
                left_at: None,
            });
        }
        let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
        fac = fac.clamp(0.2, 5.0);
        if rejected_last {
            fac = fac.min(1.0);
        }
        rejected_last = false;
        h *= fac;
    }
    Err(Error::StepUnderflow { t })
}

fn check_start(sys: &MpSystem, start: &PhasePoint) -> Result<()> {
    let n = sys.dim;
    let e = crate::geometry::energy(sys, &start.x[..n], &start.v[..n])?;
    if (e - sys.energy).abs() > 1e-10 * sys.energy.abs().max(1.0) {
        return Err(Error::EnergyMismatch {
            expected: sys.energy,
            found: e,
        });
    }
    Ok(())
}

/// Integrate from `start` until the ray leaves the ball or `t_max` elapses.
/// Running out of time is not an error: the trajectory comes back without an
/// exit record.
pub fn integrate(sys: &MpSystem, start: &PhasePoint, t_max: Option<f64>) -> Result<Trajectory> {
    let opts = IntegratorOptions {
        t_max,
        ..IntegratorOptions::default()
    };
    integrate_with(sys, start, &opts)
}

pub fn integrate_with(
    sys: &MpSystem,
    start: &PhasePoint,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    check_start(sys, start)?;
    Ok(run(sys, start, &[], None, opts, StopRule::Exit)?.traj)
}

/// Integrate with accumulated integrals. `aux0` fixes their count and
/// initial values.
pub fn integrate_augmented(
    sys: &MpSystem,
    start: &PhasePoint,
    aux0: &[f64],
    integrand: &Integrand<'_>,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    check_start(sys, start)?;
    Ok(run(sys, start, aux0, Some(integrand), opts, StopRule::Exit)?.traj)
}

/// Check that `(x, v)` is a boundary point of the energy shell with inward `v`.
pub fn check_inward(sys: &MpSystem, x: &[f64], v: &[f64]) -> Result<()> {
    let r = linalg::euclidean_norm(x);
    if (r - sys.radius).abs() > 1e-9 * sys.radius {
        return Err(Error::NotOnBoundary { point: x.to_vec() });
    }
    let geo = sys.local(x)?;
    let nu = geo.inward_normal();
    let v = linalg::to_vector(v);
    let c = geo.inner(&v, &nu);
    if c < -1e-9 * linalg::norm(sys.dim, &geo.g, &v).max(1.0) {
        return Err(Error::NotInward {
            normal_component: c,
        });
    }
    Ok(())
}

/// Exit time `τ(x, v)` of an inward boundary ray.
pub fn exit_time(sys: &MpSystem, x: &[f64], v: &[f64]) -> Result<f64> {
    check_inward(sys, x, v)?;
    integrate(sys, &PhasePoint::new(x, v), None)?.tau()
}

/// `exp_x(w)`: follow the ray with initial direction `w/|w|` scaled to the
/// energy shell for the parameter `|w|_g / √P(x)`.
pub fn mp_exp(sys: &MpSystem, x: &[f64], w: &[f64]) -> Result<Vector> {
    let n = sys.dim;
    let geo = sys.local(x)?;
    let wv = linalg::to_vector(w);
    let wn = linalg::norm(n, &geo.g, &wv);
    if wn == 0.0 {
        return Ok(linalg::to_vector(x));
    }
    let speed = sys.conformal_factor_at(x)?.sqrt();
    let t = wn / speed;
    let v = linalg::scale(n, &wv, 1.0 / t);
    let start = PhasePoint {
        x: linalg::to_vector(x),
        v,
    };
    let opts = IntegratorOptions::default();
    let out = run(sys, &start, &[], None, &opts, StopRule::Time(t))?;
    if let Some(tc) = out.left_at {
        return Err(Error::LeftDomain { fraction: tc / t });
    }
    Ok(out.traj.states.last().expect("nonempty").x)
}

/// Determinant of the central-difference Jacobian of `w ↦ exp_x(w)`.
pub fn exp_jacobian_det(sys: &MpSystem, x: &[f64], w: &[f64], step: f64) -> Result<f64> {
    let n = sys.dim;
    let mut jac = linalg::zero_matrix();
    for j in 0..n {
        let mut wp = w.to_vec();
        let mut wm = w.to_vec();
        wp[j] += step;
        wm[j] -= step;
        let p = mp_exp(sys, x, &wp)?;
        let q = mp_exp(sys, x, &wm)?;
        for i in 0..n {
            jac[i][j] = (p[i] - q[i]) / (2.0 * step);
        }
    }
    Ok(linalg::det(n, &jac))
}

/// Velocity on the energy shell at `x` along direction `dir`.
pub fn shell_velocity(sys: &MpSystem, x: &[f64], dir: &[f64]) -> Result<Vector> {
    let n = sys.dim;
    let g = sys.metric_at(x)?;
    let d = linalg::to_vector(dir);
    let len = linalg::norm(n, &g, &d);
    let speed = sys.conformal_factor_at(x)?.sqrt();
    Ok(linalg::scale(n, &d, speed / len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn rhs_examples() {
        let (_, dv) = mp_rhs(&catalog::sys_e(), &[0.3, 0.1], &[1.0, 0.0]).unwrap();
        assert_eq!(&dv[..2], &[0.0, 0.0]);
        let (_, dv) = mp_rhs(&catalog::sys_b(0.2), &[0.3, 0.1], &[1.0, 0.0]).unwrap();
        assert!((dv[0]).abs() < 1e-16 && (dv[1] - 0.2).abs() < 1e-16);
        let (dx, dv) = mp_rhs(&catalog::sys_u(0.1), &[0.3, -0.5], &[0.2, 0.1]).unwrap();
        assert_eq!(&dx[..2], &[0.2, 0.1]);
        assert!((dv[0] + 0.06).abs() < 1e-16 && (dv[1] - 0.1).abs() < 1e-16);
    }

    #[test]
    fn euclidean_chord() {
        let sys = catalog::sys_e();
        let traj = integrate(&sys, &PhasePoint::new(&[-1.0, 0.0], &[1.0, 0.0]), None).unwrap();
        let exit = traj.exit().unwrap();
        assert!((exit.tau - 2.0).abs() < 1e-12);
        assert!((exit.exit_state.x[0] - 1.0).abs() < 1e-12);
        assert!(exit.exit_state.x[1].abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_closed_form() {
        let sys = catalog::sys_u(0.1);
        let w = 0.2f64.sqrt();
        let x0 = [-0.5, 0.0];
        let v0 = [0.3, (0.95f64 - 0.09).sqrt()];
        let traj = integrate_with(
            &sys,
            &PhasePoint::new(&x0, &v0),
            &IntegratorOptions::default().with_dense(),
        )
        .unwrap();
        let tau = traj.tau().unwrap();
        for i in 0..=20 {
            let t = tau * i as f64 / 20.0;
            let s = traj.state_at(t);
            for k in 0..2 {
                let want = x0[k] * (w * t).cos() + v0[k] / w * (w * t).sin();
                assert!((s.x[k] - want).abs() < 1e-8, "t={t}");
            }
        }
        let end = traj.exit().unwrap().exit_state.x;
        assert!((end[0].hypot(end[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnetic_circle_exit() {
        let sys = catalog::sys_b(0.2);
        let traj = integrate(&sys, &PhasePoint::new(&[-1.0, 0.0], &[1.0, 0.0]), None).unwrap();
        let exit = traj.exit().unwrap();
        // circle of radius 5 around (−1, 5) meets the unit circle again at (12/13, 5/13)
        assert!((exit.exit_state.x[0] - 12.0 / 13.0).abs() < 1e-8);
        assert!((exit.exit_state.x[1] - 5.0 / 13.0).abs() < 1e-8);
        let arc = 5.0 * (12.0f64 / 13.0).acos();
        assert!((exit.tau - arc).abs() < 1e-8);
        assert!(traj.energy_drift < 1e-9);
    }

    #[test]
    fn chord_length_formula() {
        let sys = catalog::sys_e();
        for (pos, ang) in [(0.3f64, 0.0f64), (1.0, 0.7), (2.0, -1.2), (4.0, 1.5)] {
            let x = [pos.cos(), pos.sin()];
            let nu = [-x[0], -x[1]];
            let v = [
                nu[0] * ang.cos() - nu[1] * ang.sin(),
                nu[0] * ang.sin() + nu[1] * ang.cos(),
            ];
            let tau = exit_time(&sys, &x, &v).unwrap();
            assert!((tau - 2.0 * ang.cos()).abs() < 1e-10, "{tau}");
        }
    }

    #[test]
    fn tangent_ray_exits_immediately() {
        let sys = catalog::sys_e();
        assert!(exit_time(&sys, &[1.0, 0.0], &[0.0, 1.0]).unwrap() <= 1e-6);
        let sys = catalog::sys_b(0.2);
        assert!(exit_time(&sys, &[1.0, 0.0], &[0.0, -1.0]).unwrap() <= 1e-6);
    }

    #[test]
    fn outward_start_is_rejected() {
        let sys = catalog::sys_e();
        assert!(matches!(
            exit_time(&sys, &[1.0, 0.0], &[1.0, 0.0]),
            Err(Error::NotInward { .. })
        ));
        assert!(matches!(
            integrate(&sys, &PhasePoint::new(&[0.0, 0.0], &[2.0, 0.0]), None),
            Err(Error::EnergyMismatch { .. })
        ));
    }

    #[test]
    fn exponential_map() {
        let sys = catalog::sys_e();
        assert_eq!(
            mp_exp(&sys, &[0.2, 0.1], &[0.0, 0.0]).unwrap()[..2],
            [0.2, 0.1]
        );
        let p = mp_exp(&sys, &[0.0, 0.0], &[0.6, 0.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && p[1].abs() < 1e-12);
        match mp_exp(&sys, &[0.0, 0.0], &[2.0, 0.0]) {
            Err(Error::LeftDomain { fraction }) => assert!(fraction > 0.4 && fraction < 0.6),
            other => panic!("{other:?}"),
        }
        let det = exp_jacobian_det(&catalog::sys_b(0.2), &[0.1, 0.0], &[0.3, 0.2], 1e-5).unwrap();
        assert!(det > 0.0);
    }

    #[test]
    fn trapped_ray_is_reported() {
        let sys = catalog::sys_e();
        let traj = integrate(&sys, &PhasePoint::new(&[0.0, 0.0], &[1.0, 0.0]), Some(0.5)).unwrap();
        assert!(traj.exit.is_none());
        assert!(matches!(traj.tau(), Err(Error::Trapped { .. })));
        assert!((traj.end_time() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn augmented_integral_of_one_is_exit_time() {
        let sys = catalog::sys_mixed();
        let f = |_: &LocalGeometry, _: &Vector, d: &mut [f64]| {
            d[0] = 1.0;
            Ok(())
        };
        let x = [0.6f64.cos(), 0.6f64.sin()];
        let v = shell_velocity(&sys, &x, &[-x[0] + 0.2, -x[1]]).unwrap();
        let traj = integrate_augmented(
            &sys,
            &PhasePoint::new(&x, &v[..2]),
            &[0.0],
            &f,
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert!((traj.aux[0] - traj.tau().unwrap()).abs() < 1e-11);
    }
}
