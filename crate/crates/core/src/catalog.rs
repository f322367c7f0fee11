//! Built-in systems, reachable by name (`"SYS-B"`, `"SYS-B(0.3)"`, ...).
//!
//! | name       | metric              | α                        | U          |
//! |------------|---------------------|--------------------------|------------|
//! | `SYS-E`    | δ                   | 0                        | 0          |
//! | `SYS-B(B)` | δ                   | (B/2)(−x2 dx1 + x1 dx2)  | 0          |
//! | `SYS-U(ε)` | δ                   | 0                        | ε\|x\|²    |
//! | `SYS-C(λ)` | e^{2λ\|x\|²} δ      | 0                        | 0          |
//! | `SYS-M`    | e^{2λ\|x\|²} δ      | uniform field B          | ε\|x\|²    |
//!
//! All systems live on the unit disk at energy ½. `SYS-M` uses λ = 0.05,
//! B = 0.2, ε = 0.1.

use crate::error::{Error, Result};
use crate::fieldexpr::Expr;
use crate::geometry::{Metric, MpSystem};

pub const DEFAULT_B: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_LAMBDA: f64 = 0.05;

fn build(metric: Metric, alpha: Vec<Expr>, potential: Expr) -> MpSystem {
    MpSystem::new(2, 1.0, metric, alpha, potential, 0.5).expect("catalog system is valid")
}

fn uniform_field(b: f64) -> Vec<Expr> {
    vec![-0.5 * b * Expr::var(1), 0.5 * b * Expr::var(0)]
}

pub fn sys_e() -> MpSystem {
    build(
        Metric::euclidean(),
        vec![Expr::zero(), Expr::zero()],
        Expr::zero(),
    )
}

/// Euclidean ball in dimension `dim`, energy ½.
pub fn sys_e_dim(dim: usize) -> Result<MpSystem> {
    MpSystem::new(
        dim,
        1.0,
        Metric::euclidean(),
        vec![Expr::zero(); dim],
        Expr::zero(),
        0.5,
    )
}

pub fn sys_b(b: f64) -> MpSystem {
    build(Metric::euclidean(), uniform_field(b), Expr::zero())
}

pub fn sys_u(epsilon: f64) -> MpSystem {
    build(
        Metric::euclidean(),
        vec![Expr::zero(), Expr::zero()],
        epsilon * Expr::radius_squared(2),
    )
}

pub fn sys_c(lambda: f64) -> MpSystem {
    build(
        Metric::Conformal((2.0 * lambda * Expr::radius_squared(2)).exp()),
        vec![Expr::zero(), Expr::zero()],
        Expr::zero(),
    )
}

pub fn sys_mixed() -> MpSystem {
    build(
        Metric::Conformal((2.0 * DEFAULT_LAMBDA * Expr::radius_squared(2)).exp()),
        uniform_field(DEFAULT_B),
        DEFAULT_EPSILON * Expr::radius_squared(2),
    )
}

/// The four named families at their default parameters.
pub fn standard() -> Vec<(String, MpSystem)> {
    vec![
        ("SYS-E".into(), sys_e()),
        (format!("SYS-B({DEFAULT_B})"), sys_b(DEFAULT_B)),
        (format!("SYS-U({DEFAULT_EPSILON})"), sys_u(DEFAULT_EPSILON)),
        (format!("SYS-C({DEFAULT_LAMBDA})"), sys_c(DEFAULT_LAMBDA)),
    ]
}

/// Resolve `NAME` or `NAME(param)`.
pub fn by_name(name: &str) -> Result<MpSystem> {
    let name = name.trim();
    let (base, param) = match name.find('(') {
        Some(open) => {
            let inner = name[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidSystem(format!("malformed catalog name `{name}`")))?;
            let value: f64 = inner.trim().parse().map_err(|_| {
                Error::InvalidSystem(format!("bad parameter `{inner}` in `{name}`"))
            })?;
            (&name[..open], Some(value))
        }
        None => (name, None),
    };
    let reject = |p: Option<f64>| match p {
        Some(_) => Err(Error::InvalidSystem(format!("`{base}` takes no parameter"))),
        None => Ok(()),
    };
    let sys = match base {
        "SYS-E" => {
            reject(param)?;
            sys_e()
        }
        "SYS-M" => {
            reject(param)?;
            sys_mixed()
        }
        "SYS-B" => checked(
            Metric::euclidean(),
            uniform_field(param.unwrap_or(DEFAULT_B)),
            Expr::zero(),
        )?,
        "SYS-U" => checked(
            Metric::euclidean(),
            vec![Expr::zero(), Expr::zero()],
            param.unwrap_or(DEFAULT_EPSILON) * Expr::radius_squared(2),
        )?,
        "SYS-C" => checked(
            Metric::Conformal(
                (2.0 * param.unwrap_or(DEFAULT_LAMBDA) * Expr::radius_squared(2)).exp(),
            ),
            vec![Expr::zero(), Expr::zero()],
            Expr::zero(),
        )?,
        _ => {
            return Err(Error::InvalidSystem(format!(
                "unknown catalog system `{name}` (expected SYS-E, SYS-B, SYS-U, SYS-C or SYS-M)"
            )))
        }
    };
    Ok(sys)
}

fn checked(metric: Metric, alpha: Vec<Expr>, potential: Expr) -> Result<MpSystem> {
    MpSystem::new(2, 1.0, metric, alpha, potential, 0.5)
}
