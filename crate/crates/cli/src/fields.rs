//! Seeded sample fields, rays and boundary pairs for the verification suite.

use mpray::action::GaugeData;
use mpray::flow::{self, PhasePoint};
use mpray::geometry::sample_ball;
use mpray::potentials::PotentialTriple;
use mpray::transform::TensorTriple;
use mpray::{Expr, MpSystem, Vector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for check number `stream` under `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn monomials(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; dim]];
    for _ in 0..degree {
        let mut next = out.clone();
        for m in &out {
            for i in 0..dim {
                let mut e = m.clone();
                e[i] += 1;
                if !next.contains(&e) {
                    next.push(e);
                }
            }
        }
        out = next;
    }
    out
}

fn monomial(exps: &[usize]) -> Expr {
    exps.iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .fold(Expr::one(), |acc, (i, &k)| {
            acc * Expr::var(i).powi(k as i32)
        })
}

/// Polynomial of total degree `degree` with coefficients uniform in `[−scale, scale]`.
pub fn random_polynomial(rng: &mut ChaCha8Rng, dim: usize, degree: usize, scale: f64) -> Expr {
    monomials(dim, degree).iter().fold(Expr::zero(), |acc, m| {
        acc + rng.gen_range(-scale..scale) * monomial(m)
    })
}

/// Quadratic polynomial triple `[h, β, V]`.
pub fn random_triple(rng: &mut ChaCha8Rng, dim: usize) -> TensorTriple {
    let mut h = vec![vec![Expr::zero(); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            h[i][j] = random_polynomial(rng, dim, 2, 1.0);
            h[j][i] = h[i][j].clone();
        }
    }
    let beta = (0..dim)
        .map(|_| random_polynomial(rng, dim, 2, 1.0))
        .collect();
    let v = random_polynomial(rng, dim, 2, 1.0);
    TensorTriple { h, beta, v }
}

/// Small perturbation with a definite first variation: `h` carries a positive
/// multiple of `δ` and `V` a negative constant, so the ray integral of
/// `[h/2, −β, −V]` stays away from zero.
pub fn random_perturbation(rng: &mut ChaCha8Rng, dim: usize) -> TensorTriple {
    let a = rng.gen_range(0.2..0.4);
    let mut h = vec![vec![Expr::zero(); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let shift = if i == j { a } else { 0.0 };
            h[i][j] = shift + random_polynomial(rng, dim, 2, 0.05);
            h[j][i] = h[i][j].clone();
        }
    }
    let beta = (0..dim)
        .map(|_| random_polynomial(rng, dim, 2, 0.1))
        .collect();
    let v = random_polynomial(rng, dim, 2, 0.05) - rng.gen_range(0.1..0.2);
    TensorTriple { h, beta, v }
}

/// Smooth scalar `c + b·x + 0.3 sin(a·x)`.
pub fn random_smooth(rng: &mut ChaCha8Rng, dim: usize) -> Expr {
    let lin = random_polynomial(rng, dim, 1, 1.0);
    let arg = random_polynomial(rng, dim, 1, 2.0);
    lin + 0.3 * arg.sin()
}

/// Potential triple whose `u` and `φ` vanish on the boundary.
pub fn random_potential(rng: &mut ChaCha8Rng, sys: &MpSystem) -> PotentialTriple {
    let n = sys.dim;
    let u = (0..n).map(|_| random_polynomial(rng, n, 1, 1.0)).collect();
    let phi = random_polynomial(rng, n, 2, 1.0);
    let eta = random_polynomial(rng, n, 1, 1.0);
    PotentialTriple::boundary_vanishing(u, phi, eta, sys.radius)
}

/// Potential triple without boundary conditions.
pub fn random_free_potential(rng: &mut ChaCha8Rng, sys: &MpSystem) -> PotentialTriple {
    let n = sys.dim;
    PotentialTriple::new(
        (0..n).map(|_| random_polynomial(rng, n, 2, 1.0)).collect(),
        random_polynomial(rng, n, 2, 1.0),
        random_smooth(rng, n),
    )
}

/// Sup of `|u|`, `|φ|`, `|η|` over a sampling grid.
pub fn potential_size(sys: &MpSystem, w: &PotentialTriple) -> mpray::Result<f64> {
    let n = sys.dim;
    let mut m: f64 = 0.0;
    for x in sample_ball(n, sys.radius, 8, 16) {
        let x = &x[..n];
        for e in w.u.iter().chain([&w.phi, &w.eta]) {
            m = m.max(e.eval(x)?.abs());
        }
    }
    Ok(m)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    loop {
        let mut v = [0.0; 3];
        for c in v.iter_mut().take(dim) {
            *c = rng.gen_range(-1.0..1.0);
        }
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            return v.map(|c| c / r);
        }
    }
}

/// Boundary point.
pub fn random_boundary_point(rng: &mut ChaCha8Rng, sys: &MpSystem) -> Vector {
    random_unit(rng, sys.dim).map(|c| c * sys.radius)
}

/// Inward boundary phase point on the energy shell, at least `0.15` in
/// cosine away from grazing.
pub fn random_inward(rng: &mut ChaCha8Rng, sys: &MpSystem) -> mpray::Result<PhasePoint> {
    let n = sys.dim;
    let x = random_boundary_point(rng, sys);
    loop {
        let d = random_unit(rng, n);
        let c = -(0..n).map(|i| d[i] * x[i]).sum::<f64>() / sys.radius;
        if c > 0.15 {
            let v = flow::shell_velocity(sys, &x[..n], &d[..n])?;
            return Ok(PhasePoint::new(&x[..n], &v[..n]));
        }
    }
}

/// Interior point with `|x| ≤ 0.95 R`.
pub fn random_interior(rng: &mut ChaCha8Rng, sys: &MpSystem) -> Vector {
    let r = 0.95 * sys.radius * rng.gen_range(0.0f64..1.0).powf(1.0 / sys.dim as f64);
    random_unit(rng, sys.dim).map(|c| c * r)
}

/// Pair of boundary points at least `min_angle` apart as seen from the centre.
pub fn random_pair(rng: &mut ChaCha8Rng, sys: &MpSystem, min_angle: f64) -> (Vector, Vector) {
    let n = sys.dim;
    loop {
        let a = random_boundary_point(rng, sys);
        let b = random_boundary_point(rng, sys);
        let c = (0..n).map(|i| a[i] * b[i]).sum::<f64>() / (sys.radius * sys.radius);
        if c.clamp(-1.0, 1.0).acos() >= min_angle {
            return (a, b);
        }
    }
}

/// Exact-form, conformal and interior-diffeomorphism gauges.
pub fn random_gauges(rng: &mut ChaCha8Rng, sys: &MpSystem) -> Vec<(&'static str, GaugeData)> {
    let n = sys.dim;
    let rho = Expr::constant(sys.radius * sys.radius) - Expr::radius_squared(n);
    let phi = rng.gen_range(0.1..0.5) * rho.clone() * (1.0 + random_polynomial(rng, n, 1, 0.5));
    let mu = 1.0 + 0.1 * rho.powi(2) * (1.0 + 0.5 * random_polynomial(rng, n, 1, 1.0).sin());
    let w = random_unit(rng, n);
    vec![
        ("exact_form", GaugeData::exact_form(n, phi)),
        ("conformal", GaugeData::conformal(n, mu)),
        (
            "interior_diffeo",
            GaugeData::interior_diffeo(n, sys.radius, 0.1, &w[..n]),
        ),
    ]
}
