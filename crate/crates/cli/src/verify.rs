//! The verification suite. Every check draws its samples from its own seeded
//! stream, so checks can run in any order.

use mpray::action::{self, boundary_action_table, gauge_apply, linearization_check};
use mpray::flow::{self, PhasePoint};
use mpray::measures::{self, PhaseFunction, PhaseQuadrature};
use mpray::potentials::{self, d2};
use mpray::reduction;
use mpray::transform::{
    self, kernel_generator, mp_ray_fan, reduction_identity_residual, BoundaryFan,
};
use mpray::{Error, MpSystem, Result};
use rayon::prelude::*;

use crate::config::{RunConfig, SantaloIntegrand};
use crate::fields;
use crate::record::Check;

pub const ENERGY_TOL: f64 = 1e-9;
pub const REDUCTION_TOL: f64 = 1e-6;
pub const KERNEL_TOL: f64 = 1e-8;
pub const POTENTIAL_TOL: f64 = 1e-6;
pub const DIAGRAM_TOL: f64 = 1e-8;
pub const SANTALO_TOL: f64 = 5e-3;
pub const ACTION_TOL: f64 = 1e-6;
pub const LINEARIZATION_TOL: f64 = 1e-4;
pub const GAUGE_TOL: f64 = 1e-5;
pub const CURVATURE_LIMIT: f64 = 4.0;
/// Boundary pairs closer than this (radians) are skipped.
pub const MIN_SEPARATION: f64 = 0.2;

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest energy drift over the rays of `fan`.
pub fn energy_conservation(sys: &MpSystem, fan: &BoundaryFan) -> Result<Check> {
    let n = sys.dim;
    let drifts: Vec<f64> = fan
        .samples
        .par_iter()
        .map(|s| {
            let t = flow::integrate(sys, &PhasePoint::new(&s.x[..n], &s.v[..n]), None)?;
            t.tau()?;
            Ok(t.energy_drift)
        })
        .collect::<Result<_>>()?;
    Ok(
        Check::at_most("energy_conservation", max_abs(&drifts), ENERGY_TOL)
            .with_detail(format!("{} rays", drifts.len())),
    )
}

/// `|If(x,v) − I_M Φ(f)(x, v/P)|` over random rays and polynomial triples.
pub fn reduction_identity(sys: &MpSystem, seed: u64, rays: usize, triples: usize) -> Result<Check> {
    let mut rng = fields::rng(seed, 1);
    let triples: Vec<_> = (0..triples)
        .map(|_| fields::random_triple(&mut rng, sys.dim))
        .collect();
    let starts: Vec<PhasePoint> = (0..rays)
        .map(|_| fields::random_inward(&mut rng, sys))
        .collect::<Result<_>>()?;
    let n = sys.dim;
    let jobs: Vec<(usize, usize)> = (0..triples.len())
        .flat_map(|i| (0..starts.len()).map(move |j| (i, j)))
        .collect();
    let res: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let s = &starts[j];
            reduction_identity_residual(sys, &triples[i], &s.x[..n], &s.v[..n])
        })
        .collect::<Result<_>>()?;
    Ok(
        Check::at_most("reduction_identity", max_abs(&res), REDUCTION_TOL).with_detail(format!(
            "{} triples x {} rays",
            triples.len(),
            starts.len()
        )),
    )
}

/// `|I(kernel_generator(η))|` over the fan for smooth random `η`.
pub fn kernel_vanishing(
    sys: &MpSystem,
    fan: &BoundaryFan,
    seed: u64,
    count: usize,
) -> Result<Check> {
    let mut rng = fields::rng(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let eta = fields::random_smooth(&mut rng, sys.dim);
        let vals = mp_ray_fan(sys, &kernel_generator(sys, &eta), fan)?;
        worst = worst.max(max_abs(&vals));
    }
    Ok(Check::at_most("kernel_vanishing", worst, KERNEL_TOL))
}

/// `|I(d₂w)| / (1 + ‖w‖)` for boundary-vanishing potential triples.
pub fn potential_vanishing(
    sys: &MpSystem,
    fan: &BoundaryFan,
    seed: u64,
    count: usize,
) -> Result<Check> {
    let mut rng = fields::rng(seed, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let w = fields::random_potential(&mut rng, sys);
        let size = fields::potential_size(sys, &w)?;
        let vals = mp_ray_fan(sys, &d2(sys, &w), fan)?;
        worst = worst.max(max_abs(&vals) / (1.0 + size));
    }
    Ok(Check::at_most("potential_vanishing", worst, POTENTIAL_TOL))
}

/// Pointwise `|Φ(d₂w) − d_M(φw)|`.
pub fn diagram(sys: &MpSystem, seed: u64, points: usize, triples: usize) -> Result<Check> {
    let mut rng = fields::rng(seed, 4);
    let msys = reduction::reduce(sys)?;
    let mut worst: f64 = 0.0;
    for _ in 0..triples {
        let w = fields::random_free_potential(&mut rng, sys);
        for _ in 0..points {
            let x = fields::random_interior(&mut rng, sys);
            let r = potentials::diagram_residual_with(sys, &msys, &w, &x[..sys.dim])?;
            worst = worst.max(r);
        }
    }
    Ok(Check::at_most("commuting_diagram", worst, DIAGRAM_TOL))
}

/// The three test integrands of the Santaló check.
pub fn santalo_integrand(sys: &MpSystem, which: SantaloIntegrand) -> Box<PhaseFunction<'_>> {
    match which {
        SantaloIntegrand::One => Box::new(|_: &[f64], _: &[f64]| Ok(1.0)),
        SantaloIntegrand::Linear => Box::new(move |x: &[f64], v: &[f64]| {
            Ok(1.0 + x[0] + v[0] * v[0] / sys.conformal_factor_at(x)?)
        }),
        SantaloIntegrand::Mixed => Box::new(move |x: &[f64], v: &[f64]| {
            let p = sys.conformal_factor_at(x)?;
            Ok((x[0] * x[1]).cos() + v[0] * v[1] / p + x[1] * v[0] / p.sqrt())
        }),
    }
}

pub const SANTALO_INTEGRANDS: [SantaloIntegrand; 3] = [
    SantaloIntegrand::One,
    SantaloIntegrand::Linear,
    SantaloIntegrand::Mixed,
];

/// Largest relative gap between the two sides of Santaló's formula.
pub fn santalo(sys: &MpSystem, phase: &PhaseQuadrature, fan: &BoundaryFan) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for which in SANTALO_INTEGRANDS {
        let f = santalo_integrand(sys, which);
        worst = worst.max(measures::santalo_residual(sys, &*f, phase, fan)?.relative_gap);
    }
    Ok(Check::at_most("santalo_gap", worst, SANTALO_TOL))
}

/// `|𝔸(x,y) − 𝔸_G(x,y)|` on random boundary pairs.
pub fn action_equality(sys: &MpSystem, seed: u64, pairs: usize) -> Result<Check> {
    let mut rng = fields::rng(seed, 5);
    let msys = reduction::reduce(sys)?;
    let n = sys.dim;
    let pairs: Vec<_> = (0..pairs)
        .map(|_| fields::random_pair(&mut rng, sys, MIN_SEPARATION))
        .collect();
    let res: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| {
            let a = action::mane_action(sys, &x[..n], &y[..n])?;
            let b = action::magnetic_action(&msys, &x[..n], &y[..n])?;
            Ok((a - b).abs())
        })
        .collect::<Result<_>>()?;
    Ok(Check::at_most("action_equality", max_abs(&res), ACTION_TOL))
}

/// Relative error between the Richardson slope of the boundary action and
/// the ray integral of `[h/2, −β, −V]`.
pub fn linearization(
    sys: &MpSystem,
    seed: u64,
    perturbations: usize,
    pairs: usize,
) -> Result<Check> {
    let mut rng = fields::rng(seed, 6);
    let n = sys.dim;
    let perts: Vec<_> = (0..perturbations)
        .map(|_| fields::random_perturbation(&mut rng, n))
        .collect();
    let pairs: Vec<_> = (0..pairs)
        .map(|_| fields::random_pair(&mut rng, sys, MIN_SEPARATION))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..perts.len())
        .flat_map(|i| (0..pairs.len()).map(move |j| (i, j)))
        .collect();
    let res: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = &pairs[j];
            let chk = linearization_check(sys, &perts[i], &x[..n], &y[..n], (1e-2, 5e-3))?;
            Ok(chk.relative_error())
        })
        .collect::<Result<_>>()?;
    Ok(
        Check::at_most("linearization", max_abs(&res), LINEARIZATION_TOL).with_detail(format!(
            "{} perturbations x {} pairs",
            perts.len(),
            pairs.len()
        )),
    )
}

/// Largest change of the boundary action under each elementary gauge.
pub fn gauge_invariance(sys: &MpSystem, seed: u64, angles: usize, pairs: usize) -> Result<Check> {
    let mut rng = fields::rng(seed, 7);
    let gauges = fields::random_gauges(&mut rng, sys);
    let others: Vec<MpSystem> = gauges
        .iter()
        .map(|(_, gd)| gauge_apply(sys, gd))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    if sys.dim == 2 {
        let grid: Vec<f64> = (0..angles)
            .map(|i| std::f64::consts::TAU * (i as f64 + 0.25) / angles as f64)
            .collect();
        let base = boundary_action_table(sys, &grid, MIN_SEPARATION)?;
        for other in &others {
            worst =
                worst.max(base.max_abs_diff(&boundary_action_table(other, &grid, MIN_SEPARATION)?));
        }
    } else {
        let n = sys.dim;
        let pairs: Vec<_> = (0..pairs)
            .map(|_| fields::random_pair(&mut rng, sys, MIN_SEPARATION))
            .collect();
        for (x, y) in &pairs {
            let a = action::mane_action(sys, &x[..n], &y[..n])?;
            for other in &others {
                worst = worst.max((action::mane_action(other, &x[..n], &y[..n])? - a).abs());
            }
        }
    }
    let names: Vec<&str> = gauges.iter().map(|g| g.0).collect();
    Ok(Check::at_most("gauge_invariance", worst, GAUGE_TOL).with_detail(names.join(", ")))
}

/// Curvature functional of the reduced system against the bound 4.
pub fn curvature(sys: &MpSystem, positions: usize, directions: usize) -> Result<Check> {
    let rep = measures::curvature_bound(sys, positions, directions)?;
    Ok(
        Check::at_most("curvature_bound", rep.value, CURVATURE_LIMIT).with_detail(format!(
            "max k_mu {:e}, length {}",
            rep.max_k_mu, rep.length
        )),
    )
}

/// The L² bound `‖If‖² ≤ C̃ ‖f‖²` on random polynomial triples.
pub fn boundedness(
    sys: &MpSystem,
    fan: &BoundaryFan,
    phase: &PhaseQuadrature,
    seed: u64,
    count: usize,
) -> Result<Check> {
    let mut rng = fields::rng(seed, 8);
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;
    for _ in 0..count {
        let f = fields::random_triple(&mut rng, sys.dim);
        let b = transform::boundedness_check(sys, &f, fan, phase)?;
        all &= b.holds();
        worst = worst.max(b.lhs / b.rhs);
    }
    Ok(Check {
        name: "l2_boundedness".into(),
        value: Some(worst),
        tolerance: 1.0,
        pass: all,
        detail: Some("ratio |If|^2 / (C~ |f|^2), strict".into()),
    })
}

/// Run every check for `cfg`. A check whose computation fails is recorded as
/// failed with the error; the first numerical error is returned alongside.
pub fn run_all(sys: &MpSystem, cfg: &RunConfig) -> (Vec<Check>, Option<Error>) {
    let g = &cfg.grids;
    let v = &cfg.verify;
    let seed = cfg.seed;
    let fan = BoundaryFan::new(sys, g.fan_positions, g.fan_directions);
    let santalo_fan = BoundaryFan::new(sys, g.santalo_positions, g.santalo_directions);
    let phase = PhaseQuadrature::new(sys, g.radial, g.angular, g.fiber);
    type Job<'a> = (&'static str, f64, Box<dyn Fn() -> Result<Check> + 'a>);
    let jobs: Vec<Job<'_>> = vec![
        (
            "energy_conservation",
            ENERGY_TOL,
            Box::new(|| energy_conservation(sys, fan.as_ref().map_err(Clone::clone)?)),
        ),
        (
            "reduction_identity",
            REDUCTION_TOL,
            Box::new(|| reduction_identity(sys, seed, v.rays, v.triples)),
        ),
        (
            "kernel_vanishing",
            KERNEL_TOL,
            Box::new(|| {
                kernel_vanishing(sys, fan.as_ref().map_err(Clone::clone)?, seed, v.triples)
            }),
        ),
        (
            "potential_vanishing",
            POTENTIAL_TOL,
            Box::new(|| {
                potential_vanishing(sys, fan.as_ref().map_err(Clone::clone)?, seed, v.triples)
            }),
        ),
        (
            "commuting_diagram",
            DIAGRAM_TOL,
            Box::new(|| diagram(sys, seed, v.interior_points, v.triples)),
        ),
        (
            "santalo_gap",
            SANTALO_TOL,
            Box::new(|| {
                santalo(
                    sys,
                    phase.as_ref().map_err(Clone::clone)?,
                    santalo_fan.as_ref().map_err(Clone::clone)?,
                )
            }),
        ),
        (
            "action_equality",
            ACTION_TOL,
            Box::new(|| action_equality(sys, seed, v.pairs)),
        ),
        (
            "linearization",
            LINEARIZATION_TOL,
            Box::new(|| linearization(sys, seed, v.perturbations, v.pairs)),
        ),
        (
            "gauge_invariance",
            GAUGE_TOL,
            Box::new(|| gauge_invariance(sys, seed, v.gauge_angles, v.pairs)),
        ),
        (
            "curvature_bound",
            CURVATURE_LIMIT,
            Box::new(|| curvature(sys, g.curvature_positions, g.curvature_directions)),
        ),
        (
            "l2_boundedness",
            1.0,
            Box::new(|| {
                boundedness(
                    sys,
                    fan.as_ref().map_err(Clone::clone)?,
                    phase.as_ref().map_err(Clone::clone)?,
                    seed,
                    v.triples,
                )
            }),
        ),
    ];
    let mut checks = Vec::new();
    let mut numerical = None;
    for (name, tol, job) in jobs {
        log::info!("running check {name}");
        match job() {
            Ok(c) => checks.push(c),
            Err(e) => {
                log::warn!("check {name} failed: {e}");
                checks.push(Check::errored(name, tol, &e));
                if numerical.is_none() && e.is_numerical() {
                    numerical = Some(e);
                }
            }
        }
    }
    (checks, numerical)
}
