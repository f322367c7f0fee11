//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always appear; exits nonzero on any failure.

use std::f64::consts::PI;
use std::time::Instant;

use mpray::catalog;
use mpray::measures::{self, PhaseQuadrature};
use mpray::transform::BoundaryFan;
use mpray::{parse, MpSystem};
use mpray_cli::verify::{self, SANTALO_INTEGRANDS};
use mpray_cli::{Cli, Command};

const SEED: u64 = 42;

const ENERGY_TOL: f64 = 1e-9;
const REDUCTION_TOL: f64 = 1e-6;
const KERNEL_TOL: f64 = 1e-8;
const POTENTIAL_TOL: f64 = 1e-6;
const DIAGRAM_TOL: f64 = 1e-8;
const SANTALO_TOL: f64 = 5e-3;
const SANTALO_SHRINK: f64 = 3.0;
/// Gaps below this are at the quadrature/integrator noise floor.
const SANTALO_NOISE_FLOOR: f64 = 1e-8;
const ACTION_TOL: f64 = 1e-6;
const LINEARIZATION_TOL: f64 = 1e-4;
const GAUGE_TOL: f64 = 1e-5;
const CURVATURE_REL_TOL: f64 = 0.01;
const JET_TOL: f64 = 1e-6;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn catalog() -> Vec<(String, MpSystem)> {
    catalog::standard()
}

/// Run `check` on every catalog system; report the worst value.
fn over_catalog(
    tol: f64,
    check: impl Fn(&MpSystem) -> mpray::Result<mpray_cli::record::Check>,
) -> Outcome {
    let mut worst = (0.0f64, String::new());
    for (name, sys) in catalog() {
        let c = check(&sys).map_err(|e| format!("{name}: {e}"))?;
        let v = c.value.ok_or_else(|| format!("{name}: no value"))?;
        if v >= worst.0 {
            worst = (v, name);
        }
    }
    Ok((
        worst.0 <= tol,
        format!("worst {:.3e} on {} (tol {tol:e})", worst.0, worst.1),
    ))
}

fn fan(sys: &MpSystem, p: usize, d: usize) -> mpray::Result<BoundaryFan> {
    BoundaryFan::new(sys, p, d)
}

fn energy() -> Outcome {
    over_catalog(ENERGY_TOL, |s| {
        verify::energy_conservation(s, &fan(s, 10, 10)?)
    })
}

fn reduction() -> Outcome {
    over_catalog(REDUCTION_TOL, |s| {
        verify::reduction_identity(s, SEED, 20, 5)
    })
}

fn kernel() -> Outcome {
    over_catalog(KERNEL_TOL, |s| {
        verify::kernel_vanishing(s, &fan(s, 8, 8)?, SEED, 5)
    })
}

fn potential() -> Outcome {
    over_catalog(POTENTIAL_TOL, |s| {
        verify::potential_vanishing(s, &fan(s, 8, 8)?, SEED, 5)
    })
}

fn diagram() -> Outcome {
    over_catalog(DIAGRAM_TOL, |s| verify::diagram(s, SEED, 50, 5))
}

fn santalo() -> Outcome {
    let mut ok = true;
    let mut worst_gap: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for (name, sys) in catalog() {
        let coarse_q = PhaseQuadrature::new(&sys, 32, 64, 64).map_err(|e| e.to_string())?;
        let fine_q = PhaseQuadrature::new(&sys, 64, 128, 128).map_err(|e| e.to_string())?;
        let coarse_f = fan(&sys, 64, 64).map_err(|e| e.to_string())?;
        let fine_f = fan(&sys, 128, 128).map_err(|e| e.to_string())?;
        for which in SANTALO_INTEGRANDS {
            let f = verify::santalo_integrand(&sys, which);
            let c = measures::santalo_residual(&sys, &*f, &coarse_q, &coarse_f)
                .map_err(|e| format!("{name}: {e}"))?;
            let r = measures::santalo_residual(&sys, &*f, &fine_q, &fine_f)
                .map_err(|e| format!("{name}: {e}"))?;
            let shrinks = r.relative_gap * SANTALO_SHRINK <= c.relative_gap
                || r.relative_gap <= SANTALO_NOISE_FLOOR;
            ok &= c.relative_gap <= SANTALO_TOL && shrinks;
            worst_gap = worst_gap.max(c.relative_gap);
            if r.relative_gap > 0.0 {
                worst_ratio = worst_ratio.min(c.relative_gap / r.relative_gap);
            }
        }
    }
    let e = catalog::sys_e();
    let q = PhaseQuadrature::new(&e, 32, 64, 64).map_err(|e| e.to_string())?;
    let one = |_: &[f64], _: &[f64]| Ok(1.0);
    let vol = measures::phase_integral(&e, &q, &one).map_err(|e| e.to_string())?;
    let vol_err = (vol / (2.0 * PI * PI) - 1.0).abs();
    ok &= vol_err <= SANTALO_TOL;
    Ok((
        ok,
        format!(
            "worst gap {worst_gap:.3e} (tol {SANTALO_TOL:e}); worst coarse/fine ratio {worst_ratio:.2} \
             (need >= {SANTALO_SHRINK} unless fine gap <= {SANTALO_NOISE_FLOOR:e}); \
             SYS-E volume rel. error {vol_err:.2e}"
        ),
    ))
}

fn action() -> Outcome {
    over_catalog(ACTION_TOL, |s| verify::action_equality(s, SEED, 10))
}

fn linearization() -> Outcome {
    over_catalog(LINEARIZATION_TOL, |s| verify::linearization(s, SEED, 5, 5))
}

fn gauge() -> Outcome {
    over_catalog(GAUGE_TOL, |s| verify::gauge_invariance(s, SEED, 6, 10))
}

fn curvature() -> Outcome {
    let e = measures::curvature_bound(&catalog::sys_e(), 16, 16).map_err(|e| e.to_string())?;
    let mut ok = e.value == 0.0;
    let mut msg = format!("SYS-E value {}", e.value);
    let mut last = f64::NEG_INFINITY;
    for b in [0.1, 0.2, 0.3] {
        let rep =
            measures::curvature_bound(&catalog::sys_b(b), 16, 16).map_err(|e| e.to_string())?;
        let expected = 6.0 * b * b;
        let rel = (rep.max_k_mu / expected - 1.0).abs();
        ok &= rel <= CURVATURE_REL_TOL && rep.verdict && rep.value >= last;
        last = rep.value;
        msg += &format!(
            "; B={b}: k_mu {:.6} vs {expected:.4}, value {:.4}, verdict {}",
            rep.max_k_mu, rep.value, rep.verdict
        );
    }
    Ok((ok, msg))
}

fn boundedness() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (name, sys) in catalog() {
        let q = PhaseQuadrature::new(&sys, 32, 64, 64).map_err(|e| e.to_string())?;
        let c = verify::boundedness(
            &sys,
            &fan(&sys, 8, 8).map_err(|e| e.to_string())?,
            &q,
            SEED,
            5,
        )
        .map_err(|e| format!("{name}: {e}"))?;
        ok &= c.pass;
        worst = worst.max(c.value.unwrap_or(f64::INFINITY));
    }
    Ok((
        ok,
        format!("largest |If|^2 / (C~ |f|^2) = {worst:.4} (strict < 1 on every triple)"),
    ))
}

fn parser() -> Outcome {
    let corpus = include_str!("../../core/tests/data/parser_corpus.tsv");
    let points = [[0.3, 0.7, 0.45], [0.8, 0.2, 0.6]];
    let mut count = 0;
    let mut jet_err: f64 = 0.0;
    for line in corpus.lines() {
        let (src, printed) = line.split_once('\t').ok_or("malformed corpus line")?;
        let e = parse(src).map_err(|e| e.to_string())?;
        if e.to_string() != printed
            || parse(printed).map_err(|e| e.to_string())?.to_string() != printed
        {
            return Ok((false, format!("round trip failed for `{src}`")));
        }
        count += 1;
        let h = 1e-5;
        for x in points {
            let jet = e.eval_jet1(&x).map_err(|e| e.to_string())?;
            for i in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[i] += h;
                xm[i] -= h;
                let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
                jet_err = jet_err.max((fd - jet.grad[i]).abs() / (1.0 + jet.value.abs()));
            }
        }
    }
    Ok((
        count == 50 && jet_err <= JET_TOL,
        format!("{count} expressions round-trip; jet vs FD {jet_err:.2e} (tol {JET_TOL:e})"),
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"system": "SYS-B(0.2)"}"#).map_err(|e| e.to_string())?;
    let mut records = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let cli = Cli {
            command: Command::Verify,
            config: Some(config.clone()),
            out: Some(out.clone()),
            seed: None,
            threads: None,
            deterministic: true,
        };
        let code = mpray_cli::run(&cli);
        if code != 0 {
            return Ok((false, format!("verify exited with {code}")));
        }
        records.push(std::fs::read(out.join("record.json")).map_err(|e| e.to_string())?);
    }
    Ok((
        records[0] == records[1],
        format!("two verify records, {} bytes each", records[0].len()),
    ))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("energy conservation", energy),
        ("reduction identity", reduction),
        ("kernel vanishing", kernel),
        ("potential vanishing", potential),
        ("commuting diagram", diagram),
        ("Santalo formula", santalo),
        ("action reduction equality", action),
        ("linearization", linearization),
        ("gauge invariance", gauge),
        ("curvature functional", curvature),
        ("L2 boundedness", boundedness),
        ("parser", parser),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, msg) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {:>2}. {name}: {msg} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
