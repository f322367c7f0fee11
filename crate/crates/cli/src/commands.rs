use mpray::action::boundary_action_table;
use mpray::flow::{self, IntegratorOptions, PhasePoint};
use mpray::linalg;
use mpray::measures::{self, PhaseQuadrature};
use mpray::transform::{l2_norm_boundary, mp_ray_fan, write_sinogram, BoundaryFan};
use mpray::{Error, MpSystem};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::record::Check;
use crate::verify;
use crate::CliError;

/// A file produced by a command, written under `--out` or printed.
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

pub struct Outcome {
    pub checks: Vec<Check>,
    pub outputs: Value,
    pub artifacts: Vec<Artifact>,
    /// A numerical failure met while running checks.
    pub numerical: Option<Error>,
}

impl Outcome {
    fn plain(outputs: Value, artifacts: Vec<Artifact>) -> Outcome {
        Outcome {
            checks: Vec::new(),
            outputs,
            artifacts,
            numerical: None,
        }
    }
}

fn json_artifact(name: &'static str, value: &Value) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("json");
    bytes.push(b'\n');
    Artifact { name, bytes }
}

pub fn cmd_integrate(sys: &MpSystem, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let n = sys.dim;
    let x = cfg.integrate.x.clone().unwrap_or_else(|| {
        let mut x = vec![0.0; n];
        x[0] = -sys.radius;
        x
    });
    let dir = cfg.integrate.direction.clone().unwrap_or_else(|| {
        let mut d = vec![0.0; n];
        d[0] = 1.0;
        d
    });
    if x.len() != n || dir.len() != n {
        return Err(CliError::Config {
            pointer: "/integrate".into(),
            message: format!("start point and direction need {n} components"),
        });
    }
    let v = flow::shell_velocity(sys, &x, &dir)?;
    let opts = IntegratorOptions {
        rtol: cfg.integrator.rtol,
        atol: cfg.integrator.atol,
        t_max: cfg.integrator.t_max,
        ..IntegratorOptions::default()
    };
    let traj = flow::integrate_with(sys, &PhasePoint::new(&x, &v[..n]), &opts)?;
    let exit = traj.exit()?;
    let mut csv = Vec::new();
    traj.write_csv(sys, &mut csv)?;
    let outputs = json!({
        "tau": exit.tau,
        "exit_point": &exit.exit_state.x[..n],
        "exit_velocity": &exit.exit_state.v[..n],
        "energy_drift": traj.energy_drift,
        "steps": traj.times.len() - 1,
    });
    Ok(Outcome::plain(
        outputs,
        vec![Artifact {
            name: "trajectory.csv",
            bytes: csv,
        }],
    ))
}

pub fn cmd_transform(sys: &MpSystem, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let fan = BoundaryFan::new(sys, cfg.grids.fan_positions, cfg.grids.fan_directions)?;
    let f = cfg.build_triple(sys.dim)?;
    let values = mp_ray_fan(sys, &f, &fan)?;
    let mut csv = Vec::new();
    write_sinogram(&fan, &values, &mut csv)?;
    let outputs = json!({
        "rays": fan.len(),
        "boundary_l2_norm": l2_norm_boundary(&fan, &values),
    });
    Ok(Outcome::plain(
        outputs,
        vec![Artifact {
            name: "sinogram.csv",
            bytes: csv,
        }],
    ))
}

pub fn cmd_action(sys: &MpSystem, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let table = boundary_action_table(sys, &cfg.action.angles(), cfg.action.min_separation)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let entries = table
        .values
        .iter()
        .flatten()
        .filter(|v| v.is_some())
        .count();
    let outputs = json!({ "angles": table.angles.len(), "entries": entries });
    Ok(Outcome::plain(
        outputs,
        vec![Artifact {
            name: "action_table.csv",
            bytes: csv,
        }],
    ))
}

pub fn cmd_santalo(sys: &MpSystem, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = &cfg.grids;
    let phase = PhaseQuadrature::new(sys, g.radial, g.angular, g.fiber)?;
    let fan = BoundaryFan::new(sys, g.santalo_positions, g.santalo_directions)?;
    let f = verify::santalo_integrand(sys, cfg.santalo.integrand);
    let rep = measures::santalo_residual(sys, &*f, &phase, &fan)?;
    let outputs = json!({
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "relative_gap": rep.relative_gap,
        "grids": {
            "radial": g.radial,
            "angular": g.angular,
            "fiber": g.fiber,
            "fan_positions": g.santalo_positions,
            "fan_directions": g.santalo_directions,
        },
    });
    let artifact = json_artifact("santalo.json", &outputs);
    Ok(Outcome::plain(outputs, vec![artifact]))
}

pub fn cmd_curvature(sys: &MpSystem, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = &cfg.grids;
    let rep = measures::curvature_bound(sys, g.curvature_positions, g.curvature_directions)?;
    let outputs = json!({
        "value": rep.value,
        "verdict": rep.verdict,
        "length": rep.length,
        "max_k_mu": rep.max_k_mu,
    });
    let artifact = json_artifact("curvature.json", &outputs);
    Ok(Outcome::plain(outputs, vec![artifact]))
}

pub fn cmd_verify(sys: &MpSystem, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (checks, numerical) = verify::run_all(sys, cfg);
    let outputs = json!({
        "system_dim": sys.dim,
        "energy": sys.energy,
        "max_potential": sys.max_potential()?,
        "min_conformal_factor": 2.0 * (sys.energy - sys.max_potential()?),
        "radius": sys.radius,
        "origin_metric_det": linalg::det(sys.dim, &sys.metric_at(&vec![0.0; sys.dim])?),
    });
    Ok(Outcome {
        checks,
        outputs,
        artifacts: Vec::new(),
        numerical,
    })
}
