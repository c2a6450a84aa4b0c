use std::path::PathBuf;
use std::process::Command;

use qvhs::format::PotentialFile;
use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "data", name].iter().collect();
    p.display().to_string()
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qvhs"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, text) = run(args);
    (code, serde_json::from_str(&text).expect("json report"))
}

#[test]
fn wdvv_check_on_weight3_passes() {
    let (code, report) = json(&["wdvv-check", &data("e1.module.json"), &data("e1q.potential.json"), "--order", "8"]);
    assert_eq!(code, 0);
    assert_eq!(report["schema"], "qvhs-report/1");
    assert_eq!(report["status"], "pass");
    assert_eq!(report["flags"]["order"], "8");
}

#[test]
fn round_trip_emits_the_worked_tower() {
    let (code, report) = json(&["round-trip", &data("e1.module.json"), &data("e1q.potential.json"), "--order", "8"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = report["payload"]["gamma"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        lines,
        [
            "gamma[-1](T1) = tau^2*q1*T2",
            "gamma[-2](T0) = tau*q1*T2",
            "gamma[-2](T1) = -tau*q1*T3",
            "gamma[-3](T0) = -2*q1*T3",
        ]
    );
}

#[test]
fn broken_module_fails_with_frobenius_witness() {
    let (code, report) = json(&["validate", &data("broken.module.json")]);
    assert_eq!(code, 1);
    let failing: Vec<&Value> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .collect();
    assert_eq!(failing.len(), 1);
    assert_eq!(failing[0]["name"], "module.frobenius");
    assert!(failing[0]["witness"].as_str().unwrap().starts_with("(T1,T2,T0)"));
}

#[test]
fn perturbed_potential_reports_first_quadruple() {
    let (code, report) = json(&["wdvv-check", &data("p1p4.module.json"), &data("p1p4_perturbed.potential.json")]);
    assert_eq!(code, 1);
    assert_eq!(report["checks"][0]["witness"], "(j=1, l=2, a=1, d=5) at q1: 2*tau");
}

#[test]
fn malformed_input_exits_with_two_and_a_location() {
    let dir = std::env::temp_dir().join(format!("qvhs-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.module.json");
    std::fs::write(&bad, "{\n  \"k\": 3,\n  \"dims\": [1, 1, 1, 1],\n  \"pairing\": {\"0,x\": \"1\"}\n}\n").unwrap();
    let (code, report) = json(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(report["status"], "error");
    assert!(report["error"].as_str().unwrap().contains("line 4"));

    let (code, _) = json(&["validate", dir.join("missing.json").to_str().unwrap()]);
    assert_eq!(code, 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_divisor_index_is_an_input_error() {
    let (code, _) = json(&["residue", "--j", "2", &data("e1.module.json"), &data("e1q.potential.json")]);
    assert_eq!(code, 2);
}

#[test]
fn check_pvhs_is_byte_stable() {
    let args = ["check-pvhs", &data("e1.module.json"), &data("e1q.potential.json"), "--order", "8"];
    let (code, first) = run(&args);
    let (_, second) = run(&args);
    assert_eq!(code, 0);
    assert_eq!(first, second);
    let mut text_args = args.to_vec();
    text_args.extend(["--format", "text"]);
    assert_eq!(run(&text_args).1, run(&text_args).1);
}

#[test]
fn extracted_potential_reparses_to_the_input() {
    for (module, potential) in [("p1p4.module.json", "p1p4.potential.json"), ("e1.module.json", "e1q.potential.json")] {
        let (code, report) = json(&["extract-potential", &data(module), &data(potential)]);
        assert_eq!(code, 0);
        let emitted: PotentialFile = serde_json::from_value(report["payload"]["potential"].clone()).unwrap();
        let original = PotentialFile::parse(&std::fs::read_to_string(data(potential)).unwrap()).unwrap();
        assert_eq!(emitted, original);
        assert_eq!(emitted.to_json(), std::fs::read_to_string(data(potential)).unwrap());
    }
}

#[test]
fn every_subcommand_runs_on_the_weight5_example() {
    let m = data("p1p4.module.json");
    let p = data("p1p4.potential.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["validate", &m, &p],
        vec!["classical-potential", &m],
        vec!["wdvv-check", &m, &p],
        vec!["quantum-product", &m, &p, "--j", "2", "--a", "3"],
        vec!["correspond", &m, &p],
        vec!["flat-frame", &m, &p],
        vec!["canonical-frame", &m, &p],
        vec!["residue", &m, &p, "--j", "1"],
        vec!["monodromy", &m, &p, "--j", "2"],
        vec!["check-orbit", &m],
    ];
    for args in cases {
        let (code, report) = json(&args);
        assert_eq!(code, 0, "{:?}: {}", args, report);
    }
}

#[test]
fn literal_calibration_flips_the_odd_weight_orbit() {
    let (code, report) = json(&["check-orbit", &data("e1.module.json"), "--sign-calibration", "literal"]);
    assert_eq!(code, 1);
    assert_eq!(report["flags"]["sign-calibration"], "literal");
}
