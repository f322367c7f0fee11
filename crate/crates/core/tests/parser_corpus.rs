use approx::assert_relative_eq;
use mpray::parse;

const CORPUS: &str = include_str!("data/parser_corpus.tsv");
const POINTS: [[f64; 3]; 3] = [[0.3, 0.7, 0.45], [0.8, 0.2, 0.6], [0.55, 0.35, 0.9]];

fn corpus() -> Vec<(&'static str, &'static str)> {
    CORPUS
        .lines()
        .map(|l| l.split_once('\t').expect("tab separated"))
        .collect()
}

#[test]
fn corpus_has_fifty_entries() {
    assert_eq!(corpus().len(), 50);
}

#[test]
fn printing_matches_golden_and_round_trips() {
    for (src, printed) in corpus() {
        let e = parse(src).unwrap();
        assert_eq!(e.to_string(), printed, "input `{src}`");
        let again = parse(printed).unwrap();
        assert_eq!(again.to_string(), printed);
        for x in POINTS {
            let (a, b) = (e.eval(&x).unwrap(), again.eval(&x).unwrap());
            assert!(
                a == b || (a - b).abs() <= 1e-15 * a.abs(),
                "`{src}` at {x:?}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn jets_agree_with_finite_differences() {
    let h = 1e-5;
    for (src, _) in corpus() {
        let e = parse(src).unwrap();
        for x in POINTS {
            let jet = e.eval_jet2(&x).unwrap();
            assert_relative_eq!(jet.value, e.eval(&x).unwrap(), max_relative = 1e-14);
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
                let scale = 1.0 + jet.value.abs();
                assert!(
                    (fd - jet.grad[i]).abs() <= 1e-6 * scale,
                    "`{src}` d{i}: {fd} vs {}",
                    jet.grad[i]
                );
                let gp = e.eval_jet1(&xp).unwrap().grad;
                let gm = e.eval_jet1(&xm).unwrap().grad;
                for j in 0..3 {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                    assert!(
                        (fd2 - jet.hess[i][j]).abs() <= 1e-6 * scale,
                        "`{src}` d{i}d{j}: {fd2} vs {}",
                        jet.hess[i][j]
                    );
                }
            }
        }
    }
}

#[test]
fn symbolic_derivatives_match_jets() {
    for (src, _) in corpus() {
        let e = parse(src).unwrap();
        for x in POINTS {
            let jet = e.eval_jet1(&x).unwrap();
            for i in 0..3 {
                let d = e.diff(i).eval(&x).unwrap();
                assert!(
                    (d - jet.grad[i]).abs() <= 1e-12 * (1.0 + d.abs()),
                    "`{src}` d{i}"
                );
            }
        }
    }
}
