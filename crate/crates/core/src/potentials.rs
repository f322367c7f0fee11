//! Potential triples `[u, φ, η]` and the operators built from them.
//!
//! * `d₁[u, φ, η] = [d^s u, dφ − Y(u), −(dU, u)_g]`, the even/odd split of the
//!   generator applied to `u_i v^i + φ`;
//! * `d₂ = d₁ + η[−g/2, 0, k − U]`, the linearized gauge action;
//! * `d_M[u, φ] = [d^s_G u, dφ − Y_G(u)]` on the reduced system;
//! * `φ[u, φ, η] = [P u, φ]`.
//!
//! Here `Y(u)_j = −u_i Y^i_j` is the Lorentz force acting on covectors.
//! With `Φ` from the transform module, `Φ ∘ d₂ = d_M ∘ φ`.

use crate::error::{Error, Result};
use crate::fieldexpr::{Expr, Jet1};
use crate::geometry::{LocalGeometry, MpSystem};
use crate::linalg::{self, zero_matrix, zero_vector};
use crate::reduction;
use crate::transform::{phi_map_at, FnField, TripleAt, TripleField};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTriple {
    pub u: Vec<Expr>,
    pub phi: Expr,
    pub eta: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticPotentialPair {
    pub u: Vec<Expr>,
    pub phi: Expr,
}

impl PotentialTriple {
    pub fn new(u: Vec<Expr>, phi: Expr, eta: Expr) -> PotentialTriple {
        PotentialTriple { u, phi, eta }
    }

    /// `[ρu, ρφ, η]` with `ρ = R² − |x|²`, so that `u` and `φ` vanish on the
    /// boundary sphere.
    pub fn boundary_vanishing(u: Vec<Expr>, phi: Expr, eta: Expr, radius: f64) -> PotentialTriple {
        let dim = u.len();
        let rho = Expr::constant(radius * radius) - Expr::radius_squared(dim);
        PotentialTriple {
            u: u.into_iter().map(|e| rho.clone() * e).collect(),
            phi: rho * phi,
            eta,
        }
    }

    /// Largest `|u|`, `|φ|` over boundary samples (zero for boundary-vanishing triples).
    pub fn boundary_size(&self, sys: &MpSystem) -> Result<f64> {
        let mut m: f64 = 0.0;
        for x in crate::geometry::sample_ball(sys.dim, sys.radius, 1, 32) {
            if linalg::euclidean_norm(&x[..sys.dim]) == 0.0 {
                continue;
            }
            m = m.max(self.phi.eval(&x[..sys.dim])?.abs());
            for e in &self.u {
                m = m.max(e.eval(&x[..sys.dim])?.abs());
            }
        }
        Ok(m)
    }
}

fn jets(exprs: &[Expr], x: &[f64]) -> Result<Vec<Jet1>> {
    exprs.iter().map(|e| e.eval_jet1(x)).collect()
}

fn values(j: &[Jet1]) -> Vector {
    let mut v = zero_vector();
    for (vi, ji) in v.iter_mut().zip(j) {
        *vi = ji.value;
    }
    v
}

fn odd_row(geo: &LocalGeometry, u: &Vector, dphi: &Vector) -> Vector {
    let n = geo.dim;
    let yu = geo.covector_lorentz(u);
    let mut beta = zero_vector();
    for i in 0..n {
        beta[i] = dphi[i] - yu[i];
    }
    beta
}

/// `d₁ w` at `x`.
pub fn d1_at(sys: &MpSystem, w: &PotentialTriple, x: &[f64]) -> Result<TripleAt> {
    let geo = sys.local(x)?;
    let uj = jets(&w.u, x)?;
    let u = values(&uj);
    let phi = w.phi.eval_jet1(x)?;
    Ok(TripleAt {
        h: geo.sym_differential(&uj),
        beta: odd_row(&geo, &u, &phi.grad),
        v: -geo.co_inner(&geo.grad_potential, &u),
    })
}

/// `d₂ w` at `x`.
pub fn d2_at(sys: &MpSystem, w: &PotentialTriple, x: &[f64]) -> Result<TripleAt> {
    let mut out = d1_at(sys, w, x)?;
    let eta = w.eta.eval(x)?;
    let g = sys.metric_at(x)?;
    let n = sys.dim;
    for i in 0..n {
        for j in 0..n {
            out.h[i][j] -= 0.5 * eta * g[i][j];
        }
    }
    out.v += eta * (sys.energy - sys.potential_at(x)?);
    Ok(out)
}

/// `d₁ w` as a field.
pub fn d1<'a>(sys: &'a MpSystem, w: &'a PotentialTriple) -> impl TripleField + 'a {
    FnField(move |x: &[f64]| d1_at(sys, w, x))
}

/// `d₂ w` as a field.
pub fn d2<'a>(sys: &'a MpSystem, w: &'a PotentialTriple) -> impl TripleField + 'a {
    FnField(move |x: &[f64]| d2_at(sys, w, x))
}

/// `d_M p` at `x` on a reduced system, using the Christoffel symbols of `G`.
pub fn dm_at(msys: &MpSystem, p: &MagneticPotentialPair, x: &[f64]) -> Result<TripleAt> {
    let geo = msys.local(x)?;
    let uj = jets(&p.u, x)?;
    let u = values(&uj);
    let phi = p.phi.eval_jet1(x)?;
    Ok(TripleAt {
        h: geo.sym_differential(&uj),
        beta: odd_row(&geo, &u, &phi.grad),
        v: 0.0,
    })
}

/// `d_M p` as a field.
pub fn dm<'a>(msys: &'a MpSystem, p: &'a MagneticPotentialPair) -> impl TripleField + 'a {
    FnField(move |x: &[f64]| dm_at(msys, p, x))
}

/// `d^s_G u` through the conformal formula
/// `d^s_G u = P d^s_g(u/P) − (dU, u/P)_g g`, using only the geometry of `g`.
pub fn reduced_sym_differential(sys: &MpSystem, u: &[Expr], x: &[f64]) -> Result<Matrix> {
    let n = sys.dim;
    let geo = sys.local(x)?;
    let p = sys.conformal_factor();
    let scaled: Vec<Expr> = u.iter().map(|e| e.clone() / p.clone()).collect();
    let sj = jets(&scaled, x)?;
    let ds = geo.sym_differential(&sj);
    let pv = sys.conformal_factor_at(x)?;
    let du_u = geo.co_inner(&geo.grad_potential, &values(&sj));
    let mut out = zero_matrix();
    for i in 0..n {
        for j in 0..n {
            out[i][j] = pv * ds[i][j] - du_u * geo.g[i][j];
        }
    }
    Ok(out)
}

/// `[P u, φ]`.
pub fn phi_small(sys: &MpSystem, w: &PotentialTriple) -> MagneticPotentialPair {
    let p = sys.conformal_factor();
    MagneticPotentialPair {
        u: w.u.iter().map(|e| p.clone() * e.clone()).collect(),
        phi: w.phi.clone(),
    }
}

/// `[u / P, φ, 0]`, a preimage of `[u, φ]` under `phi_small`.
pub fn phi_small_preimage(sys: &MpSystem, p: &MagneticPotentialPair) -> PotentialTriple {
    let pf = sys.conformal_factor();
    PotentialTriple {
        u: p.u.iter().map(|e| e.clone() / pf.clone()).collect(),
        phi: p.phi.clone(),
        eta: Expr::zero(),
    }
}

/// Largest component of `Φ(d₂ w) − d_M(φ w)` at `x`.
pub fn diagram_residual(sys: &MpSystem, w: &PotentialTriple, x: &[f64]) -> Result<f64> {
    let msys = reduction::reduce(sys)?;
    diagram_residual_with(sys, &msys, w, x)
}

/// As `diagram_residual`, with the reduced system supplied by the caller.
pub fn diagram_residual_with(
    sys: &MpSystem,
    msys: &MpSystem,
    w: &PotentialTriple,
    x: &[f64],
) -> Result<f64> {
    let left = phi_map_at(sys, &d2_at(sys, w, x)?, x)?;
    let right = dm_at(msys, &phi_small(sys, w), x)?;
    Ok(left.max_abs_diff(&right))
}

/// `δ(P^{n/2} u)` at `x`, the divergence taken in `g`.
pub fn remark_residual(sys: &MpSystem, u: &[Expr], x: &[f64]) -> Result<f64> {
    if u.len() != sys.dim {
        return Err(Error::Dimension {
            expected: sys.dim,
            got: u.len(),
        });
    }
    let weight = sys
        .conformal_factor()
        .pow(Expr::constant(sys.dim as f64 / 2.0));
    let w: Vec<Expr> = u.iter().map(|e| weight.clone() * e.clone()).collect();
    crate::geometry::divergence(sys, &w, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::fieldexpr::parse;
    use crate::transform::{mp_ray_fan, BoundaryFan};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn d1_of_pure_scalar_is_its_differential() {
        let sys = catalog::sys_mixed();
        let w = PotentialTriple::new(vec![Expr::zero(), Expr::zero()], p("x1*x2^2"), Expr::zero());
        let at = d1_at(&sys, &w, &[0.3, -0.4]).unwrap();
        assert_eq!(at.h, zero_matrix());
        assert!((at.beta[0] - 0.16).abs() < 1e-15);
        assert!((at.beta[1] + 0.24).abs() < 1e-15);
        assert_eq!(at.v, 0.0);
    }

    #[test]
    fn d1_without_fields_is_symmetric_differential() {
        let sys = catalog::sys_e();
        let w = PotentialTriple::new(vec![p("x2"), p("x1")], Expr::zero(), Expr::zero());
        let at = d1_at(&sys, &w, &[0.1, 0.2]).unwrap();
        assert_eq!([at.h[0][0], at.h[0][1], at.h[1][1]], [0.0, 1.0, 0.0]);
        assert_eq!(at.beta[..2], [0.0, 0.0]);
    }

    #[test]
    fn d1_potential_row() {
        let sys = catalog::sys_u(0.1);
        let w = PotentialTriple::new(vec![Expr::zero(), p("x1")], Expr::zero(), Expr::zero());
        let x = [0.3, 0.7];
        let at = d1_at(&sys, &w, &x).unwrap();
        assert!((at.v + 0.2 * x[0] * x[1]).abs() < 1e-15);
    }

    #[test]
    fn d2_adds_the_energy_column() {
        let sys = catalog::sys_e().with_energy(1.0).unwrap();
        let w = PotentialTriple::new(vec![Expr::zero(), Expr::zero()], Expr::zero(), Expr::one());
        let at = d2_at(&sys, &w, &[0.2, 0.2]).unwrap();
        assert_eq!(
            [at.h[0][0], at.h[0][1], at.h[1][1], at.v],
            [-0.5, 0.0, -0.5, 1.0]
        );
        let sys = catalog::sys_mixed();
        let w = PotentialTriple::new(vec![p("x2"), p("x1^2")], p("x1"), p("1 + x2"));
        for x in [[0.1, 0.2], [-0.6, 0.3]] {
            let a = d1_at(&sys, &w, &x).unwrap();
            let b = d2_at(&sys, &w, &x).unwrap();
            let eta = 1.0 + x[1];
            let g = sys.metric_at(&x).unwrap();
            let k_u = 0.5 - sys.potential_at(&x).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((b.h[i][j] - a.h[i][j] + 0.5 * eta * g[i][j]).abs() < 1e-12);
                }
            }
            assert!((b.v - a.v - eta * k_u).abs() < 1e-12);
        }
    }

    #[test]
    fn covector_lorentz_sign_makes_potentials_integrate_to_zero() {
        // With the opposite sign on the odd row this transform would not vanish.
        let sys = catalog::sys_b(0.2);
        let w = PotentialTriple::boundary_vanishing(
            vec![p("1 + x1"), p("x2")],
            Expr::zero(),
            Expr::zero(),
            1.0,
        );
        let fan = BoundaryFan::new(&sys, 6, 6).unwrap();
        let vals = mp_ray_fan(&sys, &d1(&sys, &w), &fan).unwrap();
        assert!(vals.iter().all(|v| v.abs() < 1e-8), "{vals:?}");
    }

    #[test]
    fn two_paths_for_the_reduced_symmetric_differential() {
        for sys in [
            catalog::sys_u(0.1),
            catalog::sys_mixed(),
            catalog::sys_e().with_energy(3.0).unwrap(),
        ] {
            let msys = reduction::reduce(&sys).unwrap();
            let u = vec![p("x1*x2 + 1"), p("sin(x1) - x2^2")];
            for x in [[0.0, 0.1], [0.4, -0.5], [-0.7, 0.2]] {
                let a = reduced_sym_differential(&sys, &u, &x).unwrap();
                let b = crate::geometry::sym_differential(&msys, &u, &x).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((a[i][j] - b[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn diagram_commutes() {
        let w = PotentialTriple::new(vec![p("x1^2 - x2"), p("x1*x2")], p("x2^3"), p("1 + x1"));
        for sys in [catalog::sys_e(), catalog::sys_u(0.1), catalog::sys_mixed()] {
            for x in [[0.0, 0.0], [0.5, 0.1], [-0.3, -0.8]] {
                assert!(diagram_residual(&sys, &w, &x).unwrap() < 1e-12);
            }
        }
        let kernel =
            PotentialTriple::new(vec![Expr::zero(), Expr::zero()], Expr::zero(), p("x1 - x2"));
        let sys = catalog::sys_mixed();
        let left = phi_map_at(
            &sys,
            &d2_at(&sys, &kernel, &[0.2, 0.3]).unwrap(),
            &[0.2, 0.3],
        )
        .unwrap();
        assert!(left.max_abs_diff(&TripleAt::default()) < 1e-15);
    }

    #[test]
    fn phi_small_roundtrip_and_kernel() {
        let sys = catalog::sys_u(0.1);
        let w = PotentialTriple::new(vec![Expr::zero(), Expr::zero()], Expr::zero(), p("x1"));
        let m = phi_small(&sys, &w);
        assert!(m.u.iter().all(Expr::is_zero) && m.phi.is_zero());
        let pair = MagneticPotentialPair {
            u: vec![p("x2"), p("x1 + 1")],
            phi: p("x1*x2"),
        };
        let back = phi_small(&sys, &phi_small_preimage(&sys, &pair));
        for x in [[0.1, 0.9], [-0.4, 0.0]] {
            for i in 0..2 {
                let a = back.u[i].eval(&x).unwrap();
                let b = pair.u[i].eval(&x).unwrap();
                assert!((a - b).abs() < 1e-15);
            }
        }
        let e = catalog::sys_e();
        let m = phi_small(
            &e,
            &PotentialTriple::new(pair.u.clone(), pair.phi.clone(), Expr::one()),
        );
        assert_eq!(m.u[0].eval(&[0.3, 0.2]).unwrap(), 0.2);
    }

    #[test]
    fn remark_residual_cases() {
        let sys = catalog::sys_u(0.1);
        let zero = vec![Expr::zero(), Expr::zero()];
        assert_eq!(remark_residual(&sys, &zero, &[0.2, 0.1]).unwrap(), 0.0);
        // a rotation field solves d^s u = (dU, u)/P · g here, so its weighted divergence vanishes
        let rot = vec![p("-x2"), p("x1")];
        assert!(remark_residual(&sys, &rot, &[0.3, -0.6]).unwrap().abs() < 1e-14);
        let e = catalog::sys_e();
        let u = vec![p("x1"), p("x2")];
        assert_eq!(remark_residual(&e, &u, &[0.3, 0.1]).unwrap(), 2.0);
    }
}
