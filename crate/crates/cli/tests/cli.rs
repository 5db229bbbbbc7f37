use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use wcreg::adversary::AdversarialPair;
use wcreg::GridFunction;
use wcreg_cli::config::{ClassName, LatticeName, Method, NoiseKind, OperatorKind, PhiKind, Truth};
use wcreg_cli::{read_table, ExperimentConfig};

fn wcreg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcreg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    read_table(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

#[test]
fn differentiate_quadratic_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = wcreg(
        dir.path(),
        &["differentiate", "--out", "r", "--set", "deltas=1e-4", "--set", "a=2", "--set", "m=1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&dir.path().join("r/summary.csv"));
    assert_eq!(header, ["delta", "h", "eta"]);
    assert_eq!(rows, vec![vec![1e-4, 0.01, 0.02]]);
    let file = fs::File::open(dir.path().join("r/reconstruction.csv")).unwrap();
    let recon = GridFunction::read_csv(BufReader::new(file)).unwrap();
    assert_eq!(recon.len(), 1001);
}

#[test]
fn differentiate_from_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridFunction::from_fn(201, |x| x * x / 2.0).unwrap();
    fs::write(dir.path().join("g.csv"), g.to_csv_string()).unwrap();
    let out = wcreg(
        dir.path(),
        &["differentiate", "--out", "r", "--set", "input=g.csv", "--set", "deltas=1e-4"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file = fs::File::open(dir.path().join("r/reconstruction.csv")).unwrap();
    let recon = GridFunction::read_csv(BufReader::new(file)).unwrap();
    assert!((recon.values()[100] - 0.5).abs() < 1e-12);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["differentiate", "--set", "input=missing.csv"],
        &["differentiate", "--set", "a=1"],
        &["sweep", "--set", "deltas=1e-3"],
        &["adversary", "--set", "class=banana"],
        &["modulus", "--config", "nowhere.txt"],
        &["variational", "--set", "noise=stencil-worst"],
    ];
    for args in cases {
        let out = wcreg(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = wcreg(dir.path(), &["differentiate", "--set", "a=1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("a > 1"));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // 21^7 lattice points cannot be enumerated
    let out = wcreg(
        dir.path(),
        &["modulus", "--set", "lattice=product", "--set", "nodes=7", "--set", "deltas=0.1"],
    );
    assert_eq!(out.status.code(), Some(3));
    // a truth outside the compactum
    let out = wcreg(
        dir.path(),
        &["variational", "--grid", "5", "--set", "truth=constant", "--set", "amplitude=5", "--set", "deltas=0.1"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_table_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = wcreg(
        dir.path(),
        &[
            "sweep", "--out", "r", "--set", "deltas=1e-2,1e-3,1e-4,1e-5", "--set", "amplitude=0.25",
            "--set", "ensemble=30",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("r/sweep.csv")).unwrap();
    let (header, rows) = read_table(&text).unwrap();
    assert_eq!(header, ["delta", "h", "eta", "sup_err_est"]);
    assert_eq!(column(&rows, 0), vec![1e-5, 1e-4, 1e-3, 1e-2]);
    let slope_line = text.lines().find(|l| l.starts_with("# slope")).unwrap();
    let eta_slope: f64 = slope_line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("eta="))
        .unwrap()
        .parse()
        .unwrap();
    // h is snapped to the grid, so the slope is 1 - 1/a only up to the snapping
    assert!((eta_slope - 0.5).abs() < 1e-3, "{slope_line}");
    for r in &rows {
        assert!(r[3] <= r[2] * 1.25 + 1e-15);
    }
}

#[test]
fn adversary_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = wcreg(
        dir.path(),
        &["adversary", "--out", "sup", "--set", "class=sup", "--set", "deltas=1e-2,1e-3"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = table(&dir.path().join("sup/separation.csv"));
    for r in &rows {
        assert!((r[1] - 1.0).abs() < 0.02);
    }
    for i in 0..2 {
        let file = fs::File::open(dir.path().join(format!("sup/pair_{i}.csv"))).unwrap();
        AdversarialPair::read_csv(BufReader::new(file)).unwrap();
    }

    let out = wcreg(
        dir.path(),
        &["adversary", "--out", "lip", "--grid", "4001", "--set", "class=lip", "--set", "m=2", "--set", "deltas=1e-3,1e-4,1e-5"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = table(&dir.path().join("lip/separation.csv"));
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert!((wcreg::log_log_slope(&pts) - 0.5).abs() < 0.05);
}

#[test]
fn variational_oracle_instance_and_empty_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = wcreg(
        dir.path(),
        &[
            "variational", "--out", "r", "--grid", "3", "--set", "truth=constant", "--set", "noise=none",
            "--set", "deltas=0.1", "--set", "budget=20000",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&dir.path().join("r/convergence.csv"));
    assert_eq!(header.len(), 7);
    // within one lattice step of the optimum 0.1, which is below the certificate 0.4
    assert!(rows[0][3] <= 0.1 + 0.02);

    let out = wcreg(dir.path(), &["variational", "--out", "e", "--set", "deltas="]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = table(&dir.path().join("e/convergence.csv"));
    assert!(rows.is_empty());
}

#[test]
fn modulus_constants_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = wcreg(
        dir.path(),
        &["modulus", "--out", "r", "--set", "c=1", "--set", "deltas=0.05,0.25,0.55,1.05,2.5"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = table(&dir.path().join("r/modulus.csv"));
    let expected = [0.0, 0.2, 0.5, 1.0, 2.0];
    for (r, e) in rows.iter().zip(expected) {
        assert!((r[1] - e).abs() < 1e-12, "{r:?}");
    }
    let out = wcreg(
        dir.path(),
        &["modulus", "--out", "s", "--set", "c=1", "--set", "method=search", "--set", "deltas=0.05,0.25,0.55,1.05,2.5"],
    );
    assert!(out.status.success());
    let (_, search) = table(&dir.path().join("s/modulus.csv"));
    for (s, b) in search.iter().zip(&rows) {
        assert!(s[1] <= b[1]);
    }
}

#[test]
fn operator_file_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "1 0 0\n1 1 0\n1 1 1\n").unwrap();
    fs::write(
        dir.path().join("exp.cfg"),
        "# lower-triangular operator\ncommand = modulus\noperator = file:a.txt\nlattice = product\nnodes = 3\nlevels = 5\nc = 1\ndeltas = 0, 0.6\n",
    )
    .unwrap();
    let out = wcreg(dir.path(), &["modulus", "--config", "exp.cfg", "--out", "r"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = table(&dir.path().join("r/modulus.csv"));
    assert_eq!(rows[0][1], 0.0);
    assert!(rows[1][1] > 0.0);
    let written = ExperimentConfig::parse(&fs::read_to_string(dir.path().join("r/config.txt")).unwrap()).unwrap();
    assert_eq!(written.operator, OperatorKind::File("a.txt".into()));
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let finite = || prop_oneof![-1e6..1e6f64, Just(0.0), 1e-12..1e-3f64];
    let head = (
        finite(),
        finite(),
        finite(),
        prop::collection::vec(1e-9..10.0f64, 0..5),
        2usize..5000,
        0usize..500,
        0usize..100_000,
        any::<u64>(),
    );
    let tail = (
        prop::sample::select(vec![NoiseKind::Uniform, NoiseKind::Alternating, NoiseKind::StencilWorst, NoiseKind::None]),
        prop::sample::select(vec![PhiKind::Sup, PhiKind::Holder]),
        prop_oneof![
            Just(OperatorKind::Integration),
            Just(OperatorKind::Identity),
            "[a-z][a-z0-9_/.]{0,12}".prop_map(|p| OperatorKind::File(p.into())),
        ],
        prop_oneof![
            Just(Truth::Quadratic),
            Just(Truth::Constant),
            Just(Truth::AbsShift),
            (0.0..50.0f64).prop_map(Truth::Sine),
        ],
        finite(),
        (
            prop::sample::select(vec![ClassName::Lip, ClassName::Sup]),
            prop::sample::select(vec![LatticeName::Constants, LatticeName::Product]),
            prop::sample::select(vec![Method::Bruteforce, Method::Search, Method::SearchGrid]),
        ),
        (1usize..50, 2usize..9),
        prop::option::of("[a-z][a-z0-9_/.]{0,12}"),
    );
    (head, tail).prop_map(
        |((a, m, c, deltas, grid, ensemble, budget, seed), (noise, phi, operator, truth, amplitude, kinds, sizes, input))| {
            ExperimentConfig {
                command: Some(wcreg_cli::Command::Sweep),
                input: input.map(Into::into),
                out: "results/run".into(),
                a,
                m,
                c,
                deltas,
                grid,
                ensemble,
                budget,
                seed,
                noise,
                phi,
                operator,
                truth,
                amplitude,
                class: kinds.0,
                lattice: kinds.1,
                levels: sizes.0,
                nodes: sizes.1,
                method: kinds.2,
            }
        },
    )
}

proptest! {
    #[test]
    fn config_round_trip(config in arb_config()) {
        let text = config.to_string();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), config);
    }
}
