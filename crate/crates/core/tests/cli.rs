use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nodal-enum"));
    c.env_remove("NODAL_ENUM_MAX_REWRITE");
    c
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn tg_presets_and_custom_invariants() {
    let out = exec(&["tg", "--preset", "p2", "--m", "4", "--n", "4"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["count"], 666);
    assert_eq!(v["method"], "closed-form");
    assert_eq!(v["invariants"]["d"], 16);

    let out = exec(&["tg", "--preset", "k3", "--g", "6", "--n", "6"]);
    assert_eq!(json(&out)["count"], 1073720);

    let out = exec(&[
        "tg", "--d", "8", "--k1", "-8", "--k2", "8", "--c2", "4", "--n", "1",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["count"], 12);
    assert_eq!(json(&out)["label"], "custom");
}

#[test]
fn derived_method_reports_sigma_degrees() {
    let out = exec(&[
        "tg", "--preset", "p2", "--m", "4", "--n", "6", "--method", "derived",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["count"], 105);
    assert_eq!(v["method"], "derived");
    assert!(v["sigma_degrees"]["(3,2,2)"].is_number());
}

#[test]
fn output_is_deterministic() {
    let args = [
        "tg", "--preset", "p1xp1", "--m1", "3", "--m2", "3", "--n", "5", "--method", "derived",
    ];
    let a = exec(&args);
    let b = exec(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_with_flag_override() {
    let dir = std::env::temp_dir().join(format!("nodal-enum-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "[surface]\nd = 16\nk1 = -12\nk2 = 9\nc2 = 3\n\n[run]\nn = 4\nmethod = \"derived\"\n",
    )
    .unwrap();
    let path = cfg.to_str().unwrap();
    assert_eq!(json(&exec(&["tg", "--config", path]))["count"], 666);
    let out = exec(&["tg", "--config", path, "--n", "5", "--method", "closed"]);
    assert_eq!(json(&out)["count"], 378);
    assert_eq!(json(&out)["method"], "closed-form");

    let empty = dir.join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let out = exec(&["tg", "--config", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "[surface]\nd = \"x\"\n").unwrap();
    assert_eq!(
        code(&exec(&[
            "tg",
            "--config",
            bad.to_str().unwrap(),
            "--n",
            "1"
        ])),
        2
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_code_contract() {
    let out = exec(&[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(
        code(&exec(&["tg", "--preset", "p2", "--m", "4", "--n", "7"])),
        2
    );
    assert_eq!(code(&exec(&["tg", "--preset", "k3", "--n", "3"])), 2);
    assert_eq!(
        code(&exec(&["threefold", "--m", "3", "--route", "fano"])),
        2
    );

    let out = exec(&[
        "tg", "--d", "1", "--k1", "0", "--k2", "0", "--c2", "0", "--n", "2",
    ]);
    assert_eq!(code(&out), 3);
    let v = json(&out);
    assert_eq!(v["status"], "OUT_OF_VALIDITY");
    assert_eq!(v["count"], "-33/2");
}

#[test]
fn threefold_routes() {
    let out = exec(&["threefold", "--m", "5"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["count"], 21617125);
    assert_eq!(v["breakdown"]["rational plane quintics"], 17601000);
    assert_eq!(v["breakdown"]["line planes"], 3406875);

    let v = json(&exec(&["threefold", "--m", "4", "--route", "fano"]));
    assert_eq!(v["count"], 5600);
    assert_eq!(v["breakdown"]["raw integral"], 134400);

    let v = json(&exec(&["threefold", "--m", "4", "--route", "derived"]));
    assert_eq!(v["count"], 5600);
}

#[test]
fn verify_quick_suite() {
    let out = exec(&["verify-paper", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["failures"], 0);
    let out = exec(&["verify-paper", "--suite", "quick"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("| tg4 p2(4) | 666 | 666 | pass |"));
}

#[test]
fn rewrite_cap_from_environment() {
    let args = [
        "tg", "--preset", "p2", "--m", "4", "--n", "3", "--method", "derived",
    ];
    let out = bin()
        .args(args)
        .env("NODAL_ENUM_MAX_REWRITE", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("NonTerminating"));
    let out = bin()
        .args(args)
        .env("NODAL_ENUM_MAX_REWRITE", "50")
        .output()
        .unwrap();
    assert_eq!(json(&out)["count"], 675);
}

#[test]
fn verify_full_suite() {
    let out = exec(&["verify-paper", "--suite", "full", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["suite"], "full");
    assert!(v["total"].as_u64().unwrap() > 60);
}
