use std::process::Command as Proc;

use fk_saddle_cli::config::{parse_entries, Window};
use fk_saddle_cli::{parse_config, print_config, run, Command, ConfigError, RunManifest};
use proptest::prelude::*;

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_fk-saddle"))
}

fn arb_config_text() -> impl Strategy<Value = String> {
    (
        prop::sample::select(Command::ALL.to_vec()),
        proptest::option::of(0u64..1000),
        prop::sample::select(vec!["classical-fk", "pinned-fk", "two-well-fk"]),
        prop::collection::vec(1usize..5, 2..=2),
        1usize..4,
        prop::option::of(4usize..50),
        prop::option::of(0.0f64..0.49),
        prop::option::of(1e-12f64..1e-6),
        prop::option::of(0.5f64..3.0),
    )
        .prop_map(|(cmd, seed, model, p, q, window, jitter, tol, strength)| {
            let mut t = format!("command = {}\nmodel = {model}\n", cmd.name());
            let seed = match cmd {
                Command::Gap | Command::Verify => Some(seed.unwrap_or(1)),
                _ => seed,
            };
            if let Some(s) = seed {
                t.push_str(&format!("seed = {s}\n"));
            }
            let p = if cmd == Command::Landscape { vec![2, 1] } else { p };
            t.push_str(&format!("p = {},{}\nq = {q}\n", p[0], p[1]));
            if let Some(w) = window {
                t.push_str(&format!("[strip]\nwindow = {w}\n"));
            }
            if let Some(j) = jitter {
                t.push_str(&format!("[path]\njitter = {j}\nkind = linear\n"));
            }
            if let Some(tol) = tol {
                t.push_str(&format!("[flow]\ntol = {tol}\n"));
            }
            if let Some(a) = strength {
                t.push_str(&format!("[model]\nstrength = {a}\n"));
            }
            t
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printed_config_parses_back(text in arb_config_text()) {
        let c = parse_config(&text).unwrap();
        let printed = print_config(&c);
        prop_assert_eq!(parse_config(&printed).unwrap(), c.clone());
        prop_assert_eq!(print_config(&parse_config(&printed).unwrap()), printed);
    }
}

#[test]
fn sections_and_inline_comments() {
    let c = parse_config("# run\ncommand = mph  # strip pass\nmodel = pinned-fk\n[strip]\nwindow = 30\nk_max = 3\n")
        .unwrap();
    assert_eq!(c.command, Command::Mph);
    assert_eq!(c.strip.window, Window::Fixed(30));
    assert_eq!(c.strip.k_max, 3);
    let e = parse_entries("[nonsense]\nx = 1\n").unwrap_err();
    assert!(matches!(e, ConfigError::UnknownKey { line: Some(2), .. }), "{e}");
}

#[test]
fn landscape_writes_triples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.csv");
    let st = bin()
        .args([
            "landscape",
            "--model",
            "classical-fk",
            "--p",
            "2,1",
            "--grid",
            "3",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().any(|r| r[2] == -2.0));
    assert!(rows.iter().any(|r| r[0] == 0.5 && r[1] == 0.5 && r[2] == 2.0));
    let m: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("l.manifest.json")).unwrap()).unwrap();
    assert!(m.success);
    assert_eq!(m.scalars["grid_max"], 2.0);
}

#[test]
fn minimize_manifest_scales_with_cells() {
    let dir = tempfile::tempdir().unwrap();
    for (p, cells) in [("1,1", 1.0), ("3,2", 6.0)] {
        let out = dir.path().join(format!("m{cells}.json"));
        let st = bin().args(["minimize", "--p", p, "--out"]).arg(&out).status().unwrap();
        assert!(st.success());
        let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!((m.scalars["c0p"] + cells).abs() < 1e-8, "{:?}", m.scalars);
        assert!(m.files.iter().any(|f| f.to_string_lossy().ends_with(".field.csv")));
        assert_eq!(parse_config(&m.config_text).unwrap(), m.config);
    }
}

#[test]
fn exit_codes() {
    let flipped = bin()
        .args([
            "verify",
            "--seed",
            "1",
            "--p",
            "2,1",
            "--trials",
            "10",
            "--param",
            "flip_axis=0",
        ])
        .output()
        .unwrap();
    assert_eq!(flipped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flipped.stderr).contains("comparison"));

    let no_seed = bin().args(["gap", "--p", "1,1"]).output().unwrap();
    assert_eq!(no_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("seed"));

    let bad = bin().args(["minimize", "--p", "0,1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn run_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mpp.cfg");
    let out = dir.path().join("mpp.json");
    std::fs::write(
        &cfg,
        format!("command = mpp\np = 2,1\nout = {}\n[path]\nnodes = 65\n", out.display()),
    )
    .unwrap();
    let st = bin().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert!(st.success());
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((m.scalars["d0p"] - 0.0625).abs() <= 1e-3);
    assert!(m.scalars["residual"] <= 1e-8);
}

#[test]
fn identical_configs_give_identical_scalars() {
    let c = parse_config("command = multiplicity\nseed = 3\n[scan]\nk_max = 3\n").unwrap();
    let (a, b) = (run(&c), run(&c));
    assert!(a.success && b.success);
    assert_eq!(a.scalars.len(), b.scalars.len());
    for ((ka, va), (kb, vb)) in a.scalars.iter().zip(&b.scalars) {
        assert_eq!(ka, kb);
        assert_eq!(va.to_bits(), vb.to_bits(), "{ka}");
    }
}
