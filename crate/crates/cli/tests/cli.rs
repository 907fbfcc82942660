use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfi-forge")).args(args).env_remove("CFI_FORGE_SEED").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn ktdim() {
    assert_eq!(run(&["ktdim", "2"]).stdout, b"6\n");
    assert_eq!(run(&["ktdim", "3"]).stdout, b"10\n");
    assert_eq!(code(&run(&["ktdim", "4"])), 2);
    assert_eq!(code(&run(&["ktdim", "two"])), 2);
}

#[test]
fn verify_inverse_two_thirds_potential() {
    let o = run(&[
        "verify",
        "--potential",
        "k*(x*y)^(-2/3)",
        "--param",
        "k=1",
        "--fi",
        "(vx^2 - 2*H)*x*vx - (vy^2 - 2*H)*y*vy",
        "--ic",
        "1,1,0.2,-0.3",
        "--tmax",
        "10",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["pass"], true);
    assert!(r["worst"][0]["relative_drift"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["rank"], 2);
}

#[test]
fn verify_free_cube_and_broken_cube() {
    assert_eq!(code(&run(&["verify", "--potential", "0", "--fi", "vx^3"])), 0);
    let o = run(&["verify", "--potential", "x^4", "--fi", "vx^3"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["pass"], false);
    assert!(r["worst"][0]["relative_drift"].as_f64().unwrap() > 1e-3);
}

#[test]
fn error_exit_codes() {
    // parse error and unbound parameter
    assert_eq!(code(&run(&["verify", "--potential", "x^(", "--fi", "vx"])), 2);
    assert_eq!(code(&run(&["verify", "--potential", "k*x", "--fi", "vx"])), 2);
    assert_eq!(code(&run(&["verify", "--potential", "0"])), 2);
    assert_eq!(code(&run(&["verify", "--potential", "0", "--fi", "vx", "--ic", "1,2,3"])), 2);
    assert_eq!(code(&run(&["verify", "--potential", "0", "--fi", "vx", "--tol", "1e-3"])), 2);
    // start on the singular line
    let o = run(&["verify", "--potential", "1/x", "--fi", "vy", "--ic", "0,1,0,0"]);
    assert_eq!(code(&o), 3);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&run(&["catalog", "check", "Nope"])), 2);
    assert_eq!(code(&run(&["search", "--potential", "x^2", "--family", "exp"])), 2);
}

#[test]
fn catalog_list_and_checks() {
    let ids = json(&run(&["catalog", "list"]));
    assert_eq!(ids.as_array().unwrap().len(), 32);

    let o = run(&["catalog", "check", "Vs6", "--param", "c0=1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["rank"], 3);

    let o = run(&["catalog", "check", "V1", "--preset", "toda"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["pass"], true);
    assert!(r["constraint_residual"].as_f64().unwrap() <= 1e-8);

    // The inconsistent second condition of Vs16 is a runtime domain error.
    assert_eq!(code(&run(&["catalog", "check", "Vs16"])), 3);
}

#[test]
fn search_examples() {
    let o = run(&[
        "search",
        "--potential",
        "x^2 + 4*y^2 + 1/x^2",
        "--degree",
        "1",
        "--dictionary",
        "potential",
        "--domain",
        "0.5,2,-1,1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    let nontrivial: Vec<&Value> = r["candidates"].as_array().unwrap().iter().filter(|c| c["trivial"] == false).collect();
    assert_eq!(nontrivial.len(), 1);

    let r = json(&run(&["search", "--potential", "0", "--degree", "1"]));
    assert_eq!(r["kernel_dim"], 13);

    let o = run(&[
        "search",
        "--potential",
        "exp(y + sqrt(3)*x) + exp(y - sqrt(3)*x) + exp(-2*y)",
        "--degree",
        "0",
        "--dictionary",
        "1; exp(y + sqrt(3)*x); exp(y - sqrt(3)*x); exp(-2*y)",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&o)["candidates"].as_array().unwrap().iter().any(|c| c["trivial"] == false));
}

#[test]
fn structured_candidate_file_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let fi = dir.path().join("toda.json");
    std::fs::write(
        &fi,
        r#"{"name": "Jt", "family": "aut", "kt3": [0,0,0,1,0,0,0,0,0,-1],
            "b": ["3*(exp(y + sqrt(3)*x) + exp(y - sqrt(3)*x) - 2*exp(-2*y))",
                  "-3*sqrt(3)*(exp(y + sqrt(3)*x) - exp(y - sqrt(3)*x))"]}"#,
    )
    .unwrap();
    let out = dir.path().join("report.csv");
    let svg = dir.path().join("drift.svg");
    let o = run(&[
        "verify",
        "--potential",
        "exp(y + sqrt(3)*x) + exp(y - sqrt(3)*x) + exp(-2*y)",
        "--fi-file",
        fi.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("integral,ic,j0,max_abs_drift,relative_drift,pass\n"));
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("Jt,") && l.ends_with(",true")));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    std::fs::write(&fi, r#"{"family": "exp", "gen": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0], "b": ["0", "0"]}"#).unwrap();
    assert_eq!(code(&run(&["verify", "--potential", "0", "--fi-file", fi.to_str().unwrap()])), 2);
}

#[test]
fn seeded_reports_are_byte_identical() {
    let args = ["verify", "--potential", "x^2 + y^4", "--fi", "(vx^2)/2 + x^2", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let env = Command::new(env!("CARGO_BIN_EXE_cfi-forge"))
        .args(&args[..5])
        .env("CFI_FORGE_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
    assert_ne!(run(&args[..5]).stdout, a.stdout);
}
