//! End-to-end tests of the mptsig binary: exit codes, determinism and
//! file-format round trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mptsig_cli::io::{
    self, ConfigDto, EddyLimitDto, EvalDto, FeaturesDto, GridDto, LayoutDto, ModeDto, ModelDto,
    NoiseDto, ObjectDto, ReceiverDto, TensorDto,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mptsig"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn demo_model() -> ModelDto {
    ModelDto {
        label: Some("demo disc".into()),
        alpha_m: 0.01,
        sigma_star_s_per_m: 5.96e6,
        mu_r: 2.0,
        n0_m3: TensorDto {
            c11: 3e-6,
            c22: 2.5e-6,
            c33: 2e-6,
            c12: 1e-7,
            c13: 0.0,
            c23: -5e-8,
        },
        modes: vec![
            ModeDto {
                lambda: 10.0,
                weight: TensorDto {
                    c11: 2.0,
                    c22: 1.0,
                    c33: 0.5,
                    c12: 0.1,
                    c13: 0.0,
                    c23: 0.05,
                },
            },
            ModeDto {
                lambda: 300.0,
                weight: TensorDto {
                    c11: 1.0,
                    c22: 2.0,
                    c33: 3.0,
                    c12: -0.2,
                    c13: 0.1,
                    c23: 0.0,
                },
            },
        ],
        eddy_limit: Some(EddyLimitDto {
            diameter_m: 0.02,
            sigma_min_s_per_m: 5.96e6,
            mu_max_h_per_m: 8.0e-7 * std::f64::consts::PI,
            threshold: 0.01,
            c1: 1.0,
            c2: 1.0,
        }),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn cube_layout() -> LayoutDto {
    let s = 0.5;
    let mut receivers = Vec::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let c = [s * sx, s * sy, s * sz];
                let n = (3.0f64).sqrt().recip();
                receivers.push(ReceiverDto {
                    center_m: c,
                    normal: [n * sx, n * sy, n * sz],
                    radius_m: 0.05,
                    quadrature_order: 8,
                });
            }
        }
    }
    LayoutDto {
        z_m: [0.0, 0.0, 0.0],
        exciters_a_per_m: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        receivers,
    }
}

fn demo_config(dir: &Path) -> PathBuf {
    let mut rod = demo_model();
    rod.label = Some("demo rod".into());
    rod.modes[0].lambda = 100.0;
    rod.modes[1].lambda = 3000.0;
    let config = ConfigDto {
        classes: vec!["disc".into(), "rod".into()],
        objects: vec![
            ObjectDto { model_file: None, model: Some(demo_model()), class: 0 },
            ObjectDto { model_file: None, model: Some(rod), class: 1 },
        ],
        grid: GridDto {
            omega_min_rad_per_s: 1e3,
            omega_max_rad_per_s: 1e7,
            num: 7,
            spacing: "log".into(),
        },
        features: FeaturesDto { variant: "eig".into(), with_commutator: true },
        noise: NoiseDto { level: 0.01, replicates: 15 },
        seed: 42,
        evaluation: Some(EvalDto {
            k: 3,
            zscore: true,
            holdout_fraction: 0.25,
            resamples: 20,
            seed: 7,
        }),
    };
    let path = dir.join("config.json");
    write_json(&path, &config);
    path
}

#[test]
fn synth_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    write_json(&model, &demo_model());
    let outs: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("s{i}.csv"))).collect();
    for (i, out) in outs.iter().enumerate() {
        let threads = ["1", "1", "7"][i];
        let r = run(&[
            "--threads",
            threads,
            "synth",
            model.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--omega-min",
            "1e2",
            "--omega-max",
            "1e8",
            "--num",
            "21",
        ]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
    }
    let bytes: Vec<Vec<u8>> = outs.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1], "rerun changed the output");
    assert_eq!(bytes[0], bytes[2], "thread count changed the output");

    let sig = io::signature_from_csv(std::str::from_utf8(&bytes[0]).unwrap()).unwrap();
    assert_eq!(sig.samples.len(), 21);
    assert_eq!(sig.label.as_deref(), Some("demo disc"));
    assert!(sig.omega_limit.is_some());
    assert_eq!(sig.samples[0].omega(), 1e2);
    assert_eq!(sig.samples[20].omega(), 1e8);

    // Parsing and re-serializing reproduces the file byte for byte.
    assert_eq!(io::signature_to_csv(&sig).as_bytes(), &bytes[0][..]);
}

#[test]
fn synth_zero_minimum_prepends_static_row_with_decade_steps() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    write_json(&model, &demo_model());
    let out = dir.path().join("s.csv");
    let r = run(&[
        "synth",
        model.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--omega-min",
        "0",
        "--omega-max",
        "1e6",
        "--num",
        "5",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let sig = io::signature_from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let omegas: Vec<f64> = sig.samples.iter().map(|s| s.omega()).collect();
    assert_eq!(omegas, vec![0.0, 1e3, 1e4, 1e5, 1e6]);
    // The static row carries the model's N0 and a zero imaginary part.
    assert_eq!(sig.samples[0].r_tilde().c11, 3e-6);
    assert_eq!(sig.samples[0].i_part().coeffs(), [0.0; 6]);
}

#[test]
fn invariants_sets_produce_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    write_json(&model, &demo_model());
    let sig_path = dir.path().join("s.csv");
    let r = run(&[
        "synth",
        model.to_str().unwrap(),
        "--out",
        sig_path.to_str().unwrap(),
        "--num",
        "9",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    for (set, cols) in [("eig", 6), ("principal", 6), ("alternative", 6), ("commutator", 1)] {
        let out = dir.path().join(format!("inv_{set}.csv"));
        let r = run(&[
            "invariants",
            sig_path.to_str().unwrap(),
            "--set",
            set,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        let table = io::invariants_from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(table.set, set);
        assert_eq!(table.columns.len(), cols);
        assert_eq!(table.rows.len(), 9);
    }
    let r = run(&[
        "invariants",
        sig_path.to_str().unwrap(),
        "--set",
        "bogus",
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2, "unknown set is an input error");
}

#[test]
// The expected semiaxis 1.4426 is a geometric radius, not log2(e).
#[allow(clippy::approx_constant)]
fn equiv_ellipsoid_reports_the_generating_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq.json");
    let r = run(&[
        "equiv-ellipsoid",
        "--eigs",
        "2.2283027277256530e-05",
        "2.0791153519353115e-05",
        "1.9125240655028549e-05",
        "--alpha",
        "0.01",
        "--contrast",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let root = &report["root_finding"];
    for (key, want) in [("a", 2.4243), ("b", 1.8797), ("c", 1.4426)] {
        let got = root[key].as_f64().unwrap();
        assert!(
            (got - want).abs() <= 1e-3 * want,
            "{key} = {got}, expected about {want}"
        );
    }
    assert!(root["a1"].as_f64().unwrap() < root["a3"].as_f64().unwrap());
    assert!(!root["accuracy_warning"].as_bool().unwrap());
    assert!(report["max_radius_discrepancy"].as_f64().unwrap() < 1e-8);
    assert!(report["minimisation"]["objective"].as_f64().unwrap() < 1e-30);
}

#[test]
fn measure_roundtrip_recovers_on_and_off_grid() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    write_json(&model, &demo_model());
    let layout = dir.path().join("layout.json");
    write_json(&layout, &cube_layout());
    let sig = dir.path().join("s.csv");
    let r = run(&[
        "synth",
        model.to_str().unwrap(),
        "--out",
        sig.to_str().unwrap(),
        "--omega-min",
        "1e3",
        "--omega-max",
        "1e7",
        "--num",
        "9",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));

    // Grid endpoints are set exactly, so 1e7 hits a stored sample.
    let on = dir.path().join("on.json");
    let r = run(&[
        "measure-roundtrip",
        layout.to_str().unwrap(),
        sig.to_str().unwrap(),
        "--omega",
        "1e7",
        "--out",
        on.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&on).unwrap()).unwrap();
    assert_eq!(rep["rank"], 6);
    assert!(!rep["interpolated"].as_bool().unwrap());
    assert!(rep["relative_error"].as_f64().unwrap() < 1e-10);
    assert!(rep["condition_number"].as_f64().unwrap() < 10.0);
    assert!(rep["noise"].is_null());

    let off = dir.path().join("off.json");
    let r = run(&[
        "measure-roundtrip",
        layout.to_str().unwrap(),
        sig.to_str().unwrap(),
        "--omega",
        "3.3e4",
        "--noise",
        "0.02",
        "--trials",
        "8",
        "--seed",
        "5",
        "--out",
        off.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&off).unwrap()).unwrap();
    assert!(rep["interpolated"].as_bool().unwrap());
    let noise = &rep["noise"];
    assert_eq!(noise["trials"], 8);
    let mean = noise["mean_relative_error"].as_f64().unwrap();
    assert!(mean > 0.0 && mean < 0.2, "implausible noisy error {mean}");
    assert!(noise["min_relative_error"].as_f64().unwrap() <= mean);
    assert!(noise["max_relative_error"].as_f64().unwrap() >= mean);
}

#[test]
fn dataset_then_classify_reaches_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo_config(dir.path());
    let data = dir.path().join("data.csv");
    for _ in 0..2 {
        let r = run(&[
            "dataset",
            config.to_str().unwrap(),
            "--out",
            data.to_str().unwrap(),
        ]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
    }
    let first = std::fs::read(&data).unwrap();
    let r = run(&["dataset", config.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    assert_eq!(first, std::fs::read(&data).unwrap(), "dataset rebuild differs");

    let (dataset, meta) = io::read_dataset(&data).unwrap();
    assert_eq!(dataset.pairs().len(), 30);
    assert_eq!(meta.class_names, vec!["disc".to_string(), "rod".to_string()]);
    assert_eq!(meta.feature_names.len(), dataset.layout().len());

    // Query signature on the same grid as the config.
    let rod_model = dir.path().join("rod.json");
    let mut rod = demo_model();
    rod.label = Some("unknown".into());
    rod.modes[0].lambda = 100.0;
    rod.modes[1].lambda = 3000.0;
    write_json(&rod_model, &rod);
    let query = dir.path().join("query.csv");
    let r = run(&[
        "synth",
        rod_model.to_str().unwrap(),
        "--out",
        query.to_str().unwrap(),
        "--omega-min",
        "1e3",
        "--omega-max",
        "1e7",
        "--num",
        "7",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));

    let report_path = dir.path().join("report.json");
    let r = run(&[
        "classify",
        config.to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(rep["overall_accuracy"].as_f64().unwrap(), 1.0);
    assert_eq!(rep["query"]["predicted_class_name"], "rod");
    let confusion = rep["confusion_matrix"].as_array().unwrap();
    assert_eq!(confusion[0][1], 0);
    assert_eq!(confusion[1][0], 0);

    // The report itself lands on stdout as JSON too.
    let parsed: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(parsed["overall_accuracy"], rep["overall_accuracy"]);
}

#[test]
fn input_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let missing = run(&[
        "synth",
        dir.path().join("absent.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).starts_with("error: "));

    let garbled = dir.path().join("bad.json");
    std::fs::write(&garbled, "{not json").unwrap();
    let r = run(&["synth", garbled.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);

    let model = dir.path().join("model.json");
    write_json(&model, &demo_model());
    let r = run(&[
        "synth",
        model.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--num",
        "1",
    ]);
    assert_eq!(code(&r), 2, "single-point grid with unequal bounds");

    let mut negative = demo_model();
    negative.mu_r = -3.0;
    let bad_model = dir.path().join("neg.json");
    write_json(&bad_model, &negative);
    let r = run(&["synth", bad_model.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);

    // Zero trials on the measurement command.
    let layout = dir.path().join("layout.json");
    write_json(&layout, &cube_layout());
    let sig = dir.path().join("s.csv");
    let r = run(&["synth", model.to_str().unwrap(), "--out", sig.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let r = run(&[
        "measure-roundtrip",
        layout.to_str().unwrap(),
        sig.to_str().unwrap(),
        "--omega",
        "1e5",
        "--trials",
        "0",
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn model_errors_exit_with_code_3() {
    let unrealizable = run(&[
        "equiv-ellipsoid",
        "--eigs",
        "1e-6",
        "1e-6",
        "9e-4",
        "--alpha",
        "0.01",
        "--contrast",
        "2",
    ]);
    assert_eq!(code(&unrealizable), 3, "{}", stderr(&unrealizable));

    let degenerate = run(&[
        "equiv-ellipsoid",
        "--eigs",
        "1e-6",
        "2e-6",
        "3e-6",
        "--alpha",
        "0.01",
        "--contrast",
        "1",
    ]);
    assert_eq!(code(&degenerate), 3, "{}", stderr(&degenerate));
}

#[test]
fn mismatched_query_grid_is_a_clean_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo_config(dir.path());
    let model = dir.path().join("model.json");
    write_json(&model, &demo_model());
    let query = dir.path().join("query.csv");
    let r = run(&[
        "synth",
        model.to_str().unwrap(),
        "--out",
        query.to_str().unwrap(),
        "--num",
        "5",
    ]);
    assert_eq!(code(&r), 0);
    let r = run(&[
        "classify",
        config.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    assert!(!stderr(&r).is_empty());
}
