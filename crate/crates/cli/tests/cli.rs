//! Problem schema, artifact round trips and binary exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use symcon_cli::commands::{self, FrrReport};
use symcon_cli::format;
use symcon_cli::problem::Problem;
use symcon_core::relations::FrrCondition;

fn manifest(p: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(p)
}

const TOY: &str = r#"
[plant]
name = "custom-affine"
a = [[0.0]]
b = [[1.0]]
c = [[0.12]]

[grid]
first_center = [0.0]
eta = [0.25]
counts = [16]
periodic = [false]

[inputs]
list = [[-0.42], [0.0], [0.6], [0.9]]

[sampling]
tau = 1.0

[spec]
kind = "reach-avoid"
target = [[{ lb = [2.9], ub = [3.9] }]]
avoid = [{ lb = [1.4], ub = [1.6] }]
initial = [{ lb = [0.2], ub = [0.4] }]
"#;

fn toy_problem() -> Problem {
    // plant.c is a vector, fix up the nested array from the template
    let text = TOY.replace("c = [[0.12]]", "c = [0.12]");
    Problem::from_toml_str(&text).unwrap()
}

#[test]
fn toy_problem_parses_and_masks_are_consistent() {
    let p = toy_problem();
    assert_eq!(p.grid.n_cells(), 16);
    assert_eq!(p.inputs.len(), 4);
    let avoid = p.avoid_cells();
    assert!(avoid.iter().any(|&a| a));
    let targets = p.target_cells();
    assert_eq!(targets.len(), 1);
    assert!(targets[0].iter().any(|&t| t));
    assert!(!p.initial_cells().is_empty());
}

#[test]
fn schema_errors_are_reported() {
    // unknown field
    let bad = TOY.replace("c = [[0.12]]", "c = [0.12]") + "\n[extra]\nfoo = 1\n";
    assert!(Problem::from_toml_str(&bad).is_err());
    // measurement error exceeding the inflation is rejected
    let bad = TOY.replace("c = [[0.12]]", "c = [0.12]")
        + "\n[perturbation]\np1 = [0.0]\np2 = [0.1]\n";
    assert!(Problem::from_toml_str(&bad).is_err());
    // reach-avoid with two targets
    let bad = TOY.replace("c = [[0.12]]", "c = [0.12]").replace(
        "target = [[{ lb = [2.9], ub = [3.9] }]]",
        "target = [[{ lb = [3.0], ub = [3.6] }], [{ lb = [1.0], ub = [1.2] }]]",
    );
    assert!(Problem::from_toml_str(&bad).is_err());
}

#[test]
fn transitions_artifact_round_trips() {
    let p = toy_problem();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.trans");
    let stats = commands::cmd_abstract(&p, &path, 1).unwrap();
    assert_eq!(stats.cells, 16);
    let (sys, meta) = format::read_transitions(&path).unwrap();
    assert_eq!(sys.n_states(), 16);
    assert_eq!(sys.n_inputs(), 4);
    assert_eq!(meta.tau, 1.0);
    assert_eq!(meta.inputs, p.inputs);
    assert_eq!(sys.transition_count(), stats.transitions);
    // writing the same system again is byte-identical
    let path2 = dir.path().join("toy2.trans");
    format::write_transitions(
        &path2,
        &sys,
        &format::TransitionsMeta {
            tau: meta.tau,
            substeps: meta.substeps,
            w: meta.w.clone(),
            inputs: meta.inputs.clone(),
        },
    )
    .unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn controller_file_save_load_save_is_byte_identical() {
    let p = toy_problem();
    let dir = tempfile::tempdir().unwrap();
    let trans = dir.path().join("toy.trans");
    commands::cmd_abstract(&p, &trans, 1).unwrap();
    let ctl = dir.path().join("toy.ctl");
    let stats = commands::cmd_synthesize(&p, &trans, &ctl).unwrap();
    assert!(stats.solved(), "the toy reach problem must be solvable");
    let (ctrl, inputs) = format::read_controller(&ctl).unwrap();
    let ctl2 = dir.path().join("toy2.ctl");
    format::write_controller(&ctl2, &ctrl, &inputs).unwrap();
    assert_eq!(std::fs::read(&ctl).unwrap(), std::fs::read(&ctl2).unwrap());
}

#[test]
fn simulate_rejects_mismatched_controller() {
    let p = toy_problem();
    let dir = tempfile::tempdir().unwrap();
    let trans = dir.path().join("toy.trans");
    commands::cmd_abstract(&p, &trans, 1).unwrap();
    let ctl = dir.path().join("toy.ctl");
    commands::cmd_synthesize(&p, &trans, &ctl).unwrap();
    // a problem with different inputs must be refused
    let other = Problem::from_toml_str(
        &TOY.replace("c = [[0.12]]", "c = [0.12]")
            .replace("list = [[-0.42], [0.0], [0.6], [0.9]]", "list = [[-0.3], [0.3]]"),
    )
    .unwrap();
    let err = commands::cmd_simulate(&other, &ctl, 1, 10, dir.path(), None, false).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn simulated_toy_traces_satisfy_and_reproduce() {
    let p = toy_problem();
    let dir = tempfile::tempdir().unwrap();
    let trans = dir.path().join("toy.trans");
    commands::cmd_abstract(&p, &trans, 1).unwrap();
    let ctl = dir.path().join("toy.ctl");
    commands::cmd_synthesize(&p, &trans, &ctl).unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let s1 = commands::cmd_simulate(&p, &ctl, 5, 50, &out1, Some(9), false).unwrap();
    assert_eq!(s1.satisfied, 5);
    let s2 = commands::cmd_simulate(&p, &ctl, 5, 50, &out2, Some(9), false).unwrap();
    assert_eq!(s2.satisfied, 5);
    for r in 0..5 {
        let name = format!("trace_{r:03}.csv");
        assert_eq!(
            std::fs::read(out1.join(&name)).unwrap(),
            std::fs::read(out2.join(&name)).unwrap(),
            "same seed must give identical traces"
        );
    }
}

#[test]
fn verify_frr_reports_documented_witnesses() {
    let fx = |n: &str| manifest("fixtures").join(n);
    match commands::cmd_verify_frr(
        &fx("info_plant.sys"),
        &fx("info_abstraction.sys"),
        &fx("info_relation.rel"),
    )
    .unwrap()
    {
        FrrReport::Violated(w) => {
            assert_eq!((w.x1, w.x2, w.u), (1, 1, 0));
            assert_eq!(w.condition, FrrCondition::SuccessorContainment);
            assert_eq!(w.offending, Some((1, 1)));
        }
        FrrReport::Holds => panic!("the collapsed model must fail the check"),
    }
    match commands::cmd_verify_frr(
        &fx("static_plant.sys"),
        &fx("static_abstraction.sys"),
        &fx("static_relation.rel"),
    )
    .unwrap()
    {
        FrrReport::Violated(w) => {
            assert_eq!((w.x1, w.x2, w.u), (0, 0, 0));
            assert_eq!(w.offending, Some((1, 1)));
        }
        FrrReport::Holds => panic!("the split model must fail the check"),
    }
    match commands::cmd_verify_frr(
        &fx("quotient_plant.sys"),
        &fx("quotient_abstraction.sys"),
        &fx("quotient_relation.rel"),
    )
    .unwrap()
    {
        FrrReport::Holds => {}
        FrrReport::Violated(w) => panic!("the ring quotient is a refinement: {w:?}"),
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_symcon");
    let dir = tempfile::tempdir().unwrap();

    // schema error -> 2
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "not really toml [").unwrap();
    let out = Command::new(bin)
        .args(["abstract", "--problem"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("x.trans"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unsolvable toy -> 3 (target unreachable behind the avoid wall)
    let toy = TOY
        .replace("c = [[0.12]]", "c = [0.12]")
        .replace("avoid = [{ lb = [1.4], ub = [1.6] }]", "avoid = [{ lb = [1.0], ub = [2.4] }]");
    let prob = dir.path().join("unsolvable.toml");
    std::fs::write(&prob, toy).unwrap();
    let trans = dir.path().join("u.trans");
    let out = Command::new(bin)
        .args(["abstract", "--problem"])
        .arg(&prob)
        .arg("--out")
        .arg(&trans)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(bin)
        .args(["synthesize", "--problem"])
        .arg(&prob)
        .arg("--transitions")
        .arg(&trans)
        .arg("--out")
        .arg(dir.path().join("u.ctl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // verify-frr on fixtures -> 0
    let fx = |n: &str| manifest("fixtures").join(n);
    let out = Command::new(bin)
        .args(["verify-frr", "--s1"])
        .arg(fx("quotient_plant.sys"))
        .arg("--s2")
        .arg(fx("quotient_abstraction.sys"))
        .arg("--relation")
        .arg(fx("quotient_relation.rel"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("holds"));
}
