//! Library values against frozen numbers from the numpy oracle in `golden/oracle.py`.

use std::path::PathBuf;

use triqi_core::appendix::{audit, paper_sign_trace, principal_trace, AuditOptions, SignChoice};
use triqi_core::bounds::{bhattacharyya_bound, chernoff, helstrom_optimum};
use triqi_core::engine::{DenseEngine, DiscriminationEngine, EngineOptions, SecularEngine};
use triqi_core::report::{Record, Value};
use triqi_core::spectral::eigh;
use triqi_core::states::{
    background_state, classical_trace_distance, evolve_exact, thermal_state, BackgroundVariant,
    HypothesisPair, IdlerVariant, ProtocolParams,
};

fn golden(name: &str) -> Record {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    Record::parse(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn num(r: &Record, key: &str) -> f64 {
    r.get_f64(key).unwrap_or_else(|| panic!("missing {key}"))
}

fn list<'a>(r: &'a Record, key: &str) -> &'a [f64] {
    match r.get(key) {
        Some(Value::List(xs)) => xs,
        other => panic!("{key}: {other:?}"),
    }
}

fn golden_params() -> ProtocolParams {
    ProtocolParams {
        theta: 0.1,
        eta: 0.05,
        nbar2: 3.0,
        nbar3: 3.0,
        cutoffs: Some([2, 6, 6]),
        background: BackgroundVariant::Thermal,
        idler: IdlerVariant::PaperPure,
        tail_bound: 1.0,
        ..Default::default()
    }
}

fn equivalence_params(name: &str) -> ProtocolParams {
    let (theta, eta, nbar, cutoffs, background, idler) = match name {
        "thermal3" => (0.1, 0.05, 3.0, [2, 6, 6], "thermal", "paper-pure"),
        "thermal3_traced" => (0.1, 0.05, 3.0, [2, 6, 6], "thermal", "traced"),
        "thermal3_c8" => (0.1, 0.05, 3.0, [2, 8, 8], "thermal", "paper-pure"),
        "flat3" => (0.1, 0.05, 3.0, [2, 6, 6], "flat", "paper-pure"),
        "flat20" => (0.05, 0.04, 20.0, [2, 20, 20], "flat", "paper-pure"),
        "flat20_traced" => (0.05, 0.04, 20.0, [2, 20, 20], "flat", "traced"),
        "thermal2_c10" => (0.2, 0.3, 2.0, [3, 10, 10], "thermal", "paper-pure"),
        _ => unreachable!(),
    };
    ProtocolParams {
        theta,
        eta,
        nbar2: nbar,
        nbar3: nbar,
        cutoffs: Some(cutoffs),
        background: background.parse().unwrap(),
        idler: idler.parse().unwrap(),
        tail_bound: 1.0,
        ..Default::default()
    }
}

const PAIRS: [&str; 7] = [
    "thermal3",
    "thermal3_traced",
    "thermal3_c8",
    "flat3",
    "flat20",
    "flat20_traced",
    "thermal2_c10",
];

#[test]
fn golden_pair_values() {
    let g = golden("pair_golden.txt");
    let pair = HypothesisPair::build(&golden_params()).unwrap();
    let opts = EngineOptions::default();
    for engine in [&DenseEngine as &dyn DiscriminationEngine, &SecularEngine] {
        let p = engine.prepare(&pair.rho0, &pair.rho1, &opts).unwrap();
        assert!((p.q_s(0.5).unwrap() - num(&g, "q_half")).abs() < 1e-12);
        assert!((p.q_s(0.25).unwrap() - num(&g, "q_quarter")).abs() < 1e-12);
        assert!((helstrom_optimum(p.as_ref(), 0.5).unwrap() - num(&g, "helstrom")).abs() < 1e-12);
        let b = bhattacharyya_bound(p.q_s(0.5).unwrap(), 100.0).unwrap();
        assert!((b - num(&g, "bhattacharyya_m100")).abs() < 1e-12);

        // oracle scans s on a 1e-4 grid; the minimizer must land within a cell
        let c = chernoff(p.as_ref(), 1e-6).unwrap();
        assert!(c.convex);
        assert!((c.s_star - num(&g, "s_star")).abs() <= 1e-4, "{}", c.s_star);
        assert!(c.q_star <= num(&g, "q_star") + 1e-13);
        assert!((c.q_star - num(&g, "q_star")).abs() < 1e-9);
        assert!((c.exponent - num(&g, "exponent")).abs() < 1e-9);
    }
}

#[test]
fn golden_spectrum_and_partial_trace() {
    let g = golden("pair_golden.txt");
    let pair = HypothesisPair::build(&golden_params()).unwrap();
    let dense = pair.rho1.to_dense(4096).unwrap();
    let mut spec = eigh(&dense, 4096).unwrap().eigenvalues().to_vec();
    spec.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let want = list(&g, "rho1_spectrum");
    assert_eq!(spec.len(), want.len());
    for (a, b) in spec.iter().zip(want) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }

    let pt = pair.rho1.partial_trace(&[1, 2]).unwrap().to_dense(4096).unwrap();
    let (re, im) = (list(&g, "partial_trace_re"), list(&g, "partial_trace_im"));
    let n = pt.nrows();
    assert_eq!(n * n, re.len());
    for i in 0..n {
        for j in 0..n {
            let z = pt[(i, j)];
            assert!((z.re - re[i * n + j]).abs() < 1e-15 && (z.im - im[i * n + j]).abs() < 1e-15);
        }
    }
}

#[test]
fn structured_equals_dense_on_golden_pairs() {
    let g = golden("equivalence.txt");
    let opts = EngineOptions::default();
    for name in PAIRS {
        let params = equivalence_params(name);
        let pair = HypothesisPair::build(&params).unwrap();
        assert!(pair.rho0.dim() <= 1000);
        let d = DenseEngine.prepare(&pair.rho0, &pair.rho1, &opts).unwrap();
        let s = SecularEngine.prepare(&pair.rho0, &pair.rho1, &opts).unwrap();
        for (x, key) in [(0.5, "q_half"), (0.3, "q_0_3")] {
            let want = num(&g, &format!("{name}.{key}"));
            assert!((d.q_s(x).unwrap() - want).abs() < 1e-11, "{name} dense {key}");
            assert!((s.q_s(x).unwrap() - want).abs() < 1e-11, "{name} secular {key}");
        }
        let h = num(&g, &format!("{name}.helstrom"));
        assert!((helstrom_optimum(s.as_ref(), 0.5).unwrap() - h).abs() < 1e-11);
        // Helstrom never exceeds half the Bhattacharyya coefficient
        assert!(h <= 0.5 * num(&g, &format!("{name}.q_half")) + 1e-15);
        let pd = principal_trace(&params, "dense", &opts).unwrap();
        let ps = principal_trace(&params, "secular", &opts).unwrap();
        assert!((pd - ps).abs() < 1e-10, "{name}");
    }
}

#[test]
fn evolution_amplitudes() {
    let g = golden("evolution.txt");
    let ev = evolve_exact(num(&g, "gt"), 8).unwrap();
    let (re, im) = (list(&g, "amplitudes_re"), list(&g, "amplitudes_im"));
    for (n, a) in ev.chain.iter().enumerate() {
        assert!((a.re - re[n]).abs() < 1e-14 && (a.im - im[n]).abs() < 1e-14, "level {n}");
    }
    let mean = triqi_core::states::mean_photon_number(&ev.ket, 0).unwrap();
    assert!((mean - num(&g, "mean_photons")).abs() < 1e-14);
    assert!((mean - 0.01).abs() <= 0.1f64.powi(3));
}

#[test]
fn background_trace_distance() {
    let g = golden("backgrounds.txt");
    let th = thermal_state(20.0, 256, 1e-4).unwrap();
    let mut flat = vec![0.0; 256];
    flat[..20].iter_mut().for_each(|x| *x = 1.0 / 20.0);
    let d = classical_trace_distance(&th.probabilities, &flat).unwrap();
    assert!((d - num(&g, "trace_distance_n20_c256")).abs() < 1e-14);

    let p = ProtocolParams {
        nbar2: 20.0,
        nbar3: 20.0,
        cutoffs: Some([2, 256, 256]),
        ..Default::default()
    };
    let bg = background_state(&p).unwrap();
    assert_eq!(bg.marginals[0], flat);
}

#[test]
fn regime_point_audit() {
    let g = golden("regime_point.txt");
    let params = ProtocolParams::default();
    assert_eq!((params.theta, params.eta, params.nbar()), (0.01, 0.01, 50.0));
    let a = audit(&params, &AuditOptions::default()).unwrap();
    assert!((a.t_principal.unwrap() - num(&g, "t_principal")).abs() < 1e-10);
    assert_eq!(a.t_paper, num(&g, "t_paper"));
    let ps = paper_sign_trace(&params, SignChoice::PAPER).unwrap();
    assert_eq!(a.t_papersign, ps.total);
    assert!(ps.total <= 1.0);
    assert!((ps.total - a.t_paper).abs() <= a.error_terms.tolerance());
}
