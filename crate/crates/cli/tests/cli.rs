use std::fs;
use std::path::Path;
use std::process::Command;

use astral::nn::{train_pinn, TrainConfig};
use astral::problems::gen_dataset;
use astral::{EllipticProblem, Family, PinnProblem, TensorGrid};
use astral_cli::commands::{load_operator_checkpoint, load_pinn_checkpoint};
use astral_cli::container::{Dataset, DatasetInfo, MANIFEST};
use astral_cli::table::read_report;
use astral_cli::{read_dataset, write_dataset, CliError, EXIT_FAILURE, EXIT_USAGE};

fn astral(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_astral")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = astral(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bits(p: &EllipticProblem<f64>) -> Vec<u64> {
    let mut fields = vec![p.a.a11(), &p.b_sq, &p.f];
    fields.extend(p.a.a12());
    fields.extend(p.a.a22());
    fields.extend(p.exact_solution.as_ref());
    fields.iter().flat_map(|f| f.values().iter().map(|x| x.to_bits())).collect()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn datasets_round_trip_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    for (family, grid) in [
        (Family::SmoothB, TensorGrid::square(4).unwrap()),
        (Family::OneD3, TensorGrid::interval(5).unwrap()),
        (Family::PinnManufactured, TensorGrid::square(3).unwrap()),
    ] {
        let problems = gen_dataset(family, 3, 10, grid).unwrap();
        let dir = tmp.path().join(family.tag());
        write_dataset(&dir, family, grid, &problems, &DatasetInfo { master_seed: 3, ..Default::default() }).unwrap();
        let back = read_dataset(&dir).unwrap();
        assert_eq!(back.len(), 10);
        for (a, b) in problems.iter().zip(&back) {
            assert_eq!(bits(a), bits(b));
            assert_eq!(a.key, b.key);
            assert_eq!(a.family, b.family);
        }
    }
}

#[test]
fn empty_dataset_is_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = TensorGrid::square(3).unwrap();
    write_dataset(tmp.path(), Family::DiscO, grid, &[], &DatasetInfo::default()).unwrap();
    assert!(read_dataset(tmp.path()).unwrap().is_empty());
    assert_eq!(Dataset::open(tmp.path()).unwrap().manifest.n_samples, 0);
}

#[test]
fn damaged_datasets_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = TensorGrid::square(3).unwrap();
    let problems = gen_dataset(Family::DiscB, 1, 2, grid).unwrap();
    write_dataset(tmp.path(), Family::DiscB, grid, &problems, &DatasetInfo::default()).unwrap();

    let f = tmp.path().join("b_sq.f64");
    let bytes = fs::read(&f).unwrap();
    fs::write(&f, &bytes[..bytes.len() - 8]).unwrap();
    let err = read_dataset(tmp.path()).unwrap_err();
    assert!(matches!(&err, CliError::Format(m) if m.contains("`b_sq`")), "{err}");
    fs::write(&f, &bytes).unwrap();

    let manifest = tmp.path().join(MANIFEST);
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, text.replace("\"format_version\": 1", "\"format_version\": 2")).unwrap();
    assert!(matches!(read_dataset(tmp.path()), Err(CliError::Format(m)) if m.contains("format version")));
}

#[test]
fn generation_is_deterministic_and_manifest_keys_are_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["gen", "--family", "disc_o", "--J", "5", "--n", "8", "--seed", "7", "--out", s(d)]);
    }
    assert_eq!(dir_contents(&a), dir_contents(&b));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join(MANIFEST)).unwrap()).unwrap();
    let keys: Vec<&String> = manifest.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(manifest["n_samples"], 8);
    assert!(a.join("config.gen.json").exists());
}

#[test]
fn certified_bounds_dominate_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, c) = (tmp.path().join("d"), tmp.path().join("c"));
    ok(&["gen", "--family", "smooth_b", "--J", "4", "--n", "4", "--seed", "2", "--out", s(&d)]);
    ok(&["solve", "--data", s(&d), "--set", "reference_level=6"]);
    ok(&["certify", "--data", s(&d), "--out", s(&c), "--threads", "1"]);
    let text = fs::read_to_string(c.join("certify.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sample,error,bound,ratio,beta,norm,iterations");
    let mut rows = 0;
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[2] >= f[1], "{line}");
        rows += 1;
    }
    assert_eq!(rows, 4);
    let ds = Dataset::open(&d).unwrap();
    assert!(ds.has("certificate_y") && ds.has("certificate_beta") && ds.has("fem_solution"));
    assert_eq!(ds.manifest.arrays["certificate_y"].shape, vec![4, 2, 17, 17]);
    let row = &read_report(&c.join("metrics.csv")).unwrap()[0];
    assert_eq!(row.equation, "smooth_b");
    assert!(row.rub_test.unwrap() >= 1.0);
}

#[test]
fn certify_without_references_fails_numerically() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--family", "disc_o", "--J", "3", "--n", "2", "--out", s(&d)]);
    let out = astral(&["certify", "--data", s(&d), "--out", s(&tmp.path().join("c"))]);
    assert_eq!(out.status.code(), Some(EXIT_FAILURE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`reference`"));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    for args in [
        vec!["gen", "--out", out, "--set", "colour=red"],
        vec!["gen", "--out", out, "--family", "nonsense"],
        vec!["gen", "--n", "3"],
        vec!["train-pinn", "--out", out, "--set", "train.width=0"],
        vec!["frobnicate"],
    ] {
        assert_eq!(astral(&args).status.code(), Some(EXIT_USAGE), "{args:?}");
    }
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"train": {"widht": 3}}"#).unwrap();
    assert_eq!(astral(&["train-pinn", "--out", out, "--config", s(&cfg)]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn divergence_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--family", "1d_2", "--J", "4", "--n", "4", "--out", s(&d)]);
    let out = astral(&[
        "train-op",
        "--data",
        s(&d),
        "--out",
        s(&tmp.path().join("o")),
        "--set",
        "operator.epochs=3",
        "--set",
        "operator.optimizer.lr=1e30",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_FAILURE));
}

#[test]
fn operator_training_writes_artifacts_and_is_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let (tr, te) = (tmp.path().join("tr"), tmp.path().join("te"));
    ok(&["gen", "--family", "1d_2", "--J", "4", "--n", "12", "--seed", "1", "--out", s(&tr)]);
    ok(&["gen", "--family", "1d_2", "--J", "4", "--n", "6", "--seed", "2", "--out", s(&te)]);
    ok(&["solve", "--data", s(&tr), "--set", "reference_level=6"]);
    ok(&["solve", "--data", s(&te), "--set", "reference_level=6"]);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let o = tmp.path().join(format!("op{threads}"));
        ok(&[
            "train-op", "--data", s(&tr), "--test", s(&te), "--out", s(&o), "--threads", threads, "--seed", "4", "--set",
            "operator.epochs=6", "--set", "operator.width=8", "--set", "operator.layers=2",
        ]);
        outputs.push(o);
    }
    for f in ["metrics.csv", "trace.csv", "config.train-op.json"] {
        assert_eq!(fs::read(outputs[0].join(f)).unwrap(), fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
    let row = &read_report(&outputs[0].join("metrics.csv")).unwrap()[0];
    assert_eq!((row.equation.as_str(), row.n_train), ("1d_2", 12));
    assert!(row.corr_test.is_some_and(|c| (-1.0..=1.0).contains(&c)));
    let trace = fs::read_to_string(outputs[0].join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7);
    let nets = load_operator_checkpoint(&outputs[0].join("checkpoint")).unwrap();
    assert_eq!(nets.len(), 1);
    assert_eq!(nets[0].1.m.len(), nets[0].0.num_params());
    assert!(nets[0].1.step > 0);
    let echo: serde_json::Value = serde_json::from_slice(&fs::read(outputs[0].join("config.train-op.json")).unwrap()).unwrap();
    assert_eq!(echo["operator"]["seed"], 4);
    assert_eq!(echo["operator"]["epochs"], 6);
}

#[test]
fn pinn_checkpoint_restores_the_trained_networks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("p");
    ok(&["train-pinn", "--out", s(&o), "--seed", "5", "--set", "train.epochs=4", "--set", "train.width=8", "--set", "J=4"]);
    let nets = load_pinn_checkpoint(&o.join("checkpoint")).unwrap();
    let config = TrainConfig { epochs: 4, width: 8, seed: 5, ..TrainConfig::default() };
    let problem = PinnProblem::<f64>::sample(0, &TensorGrid::square(4).unwrap()).unwrap();
    let run = train_pinn(&problem, &config).unwrap();
    let expected: Vec<_> = std::iter::once(&run.solution).chain(&run.flux).collect();
    assert_eq!(nets.len(), expected.len());
    for ((net, state), (want, want_state)) in nets.iter().zip(expected.iter().zip(&run.optimizer)) {
        assert_eq!(net, *want);
        assert_eq!(state, want_state);
    }
    let trace = fs::read_to_string(o.join("trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,loss,bound,energy_error,relative_error\n"));
}

#[test]
fn report_sorts_rows_by_equation_and_training_size() {
    let tmp = tempfile::tempdir().unwrap();
    let header = "equation,n_train,e_train,e_test,eub_train,eub_test,rub_train,rub_test,corr_train,corr_test\n";
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, format!("{header}smooth_o,400,1,2,3,4,5,6,0.5,0.6\ndisc_o,200,1,,,,,,,\n")).unwrap();
    fs::write(&b, format!("{header}smooth_o,200,7,8,9,1,2,3,0.1,0.2\ndisc_o,200,2,,,,,,,\n")).unwrap();
    let out = tmp.path().join("r");
    ok(&["report", "--out", s(&out), s(&a), s(&b)]);
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    let keys: Vec<String> = text.lines().skip(1).map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(
        keys,
        ["disc_o,200,1.00000000e+00", "disc_o,200,2.00000000e+00", "smooth_o,200,7.00000000e+00", "smooth_o,400,1.00000000e+00"]
    );
    assert!(!text.contains('\r'));
}
