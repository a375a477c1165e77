use std::process::{Command, Output};

use fracpois::special_fn::{mittag_leffler, SeriesConfig};
use fracpois::verify::fixture::{parse_fixture, PMF_REFERENCE};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpois")).args(args).env_remove("FRACPOIS_THREADS").output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

/// Parses CSV output into a header and rows of strings.
fn csv_table(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(out: &Output, name: &str) -> Vec<f64> {
    let (header, rows) = csv_table(out);
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn poisson_rows() {
    let out = run(&["pmf", "--alpha", "1", "--nu", "1", "--lambda", "1", "--t", "1", "--kmax", "2"]);
    assert!(out.status.success());
    let (header, _) = csv_table(&out);
    assert_eq!(header, ["k", "p", "error_bound"]);
    let p = column(&out, "p");
    let e = (-1.0f64).exp();
    for (got, want) in p.iter().zip([e, e, e / 2.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert!(String::from_utf8(out.stdout).unwrap().ends_with('\n'));
}

#[test]
fn first_space_fractional_row_is_exponential() {
    let p = column(&run(&["pmf", "--alpha", "0.5", "--kmax", "0", "--lambda", "1", "--t", "1"]), "p");
    assert_eq!(p.len(), 1);
    assert!((p[0] - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn space_time_rows_match_reference_table() {
    let refs: Vec<_> =
        parse_fixture(PMF_REFERENCE).unwrap().into_iter().filter(|r| r.alpha == 0.5 && r.nu == 0.5).collect();
    let out = run(&["pmf", "--alpha", "0.5", "--nu", "0.5", "--lambda", "1", "--t", "1", "--kmax", "5"]);
    let (p, bound) = (column(&out, "p"), column(&out, "error_bound"));
    assert_eq!(p.len(), 6);
    for k in 0..6 {
        assert!((p[k] - refs[k].value).abs() <= bound[k] + 1e-16, "k={k}");
    }
}

#[test]
fn csv_values_round_trip_through_json() {
    let args = ["pmf", "--alpha", "0.37", "--nu", "0.81", "--lambda", "1.3", "--t", "0.9", "--kmax", "12"];
    let p = column(&run(&args), "p");
    let mut with_json = args.to_vec();
    with_json.extend(["--format", "json"]);
    let v = json(&run(&with_json));
    assert_eq!(v["meta"]["command"], "pmf");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), p.len());
    for (row, x) in rows.iter().zip(&p) {
        // Both printers emit the shortest round-trip form, so values agree bit for bit.
        assert_eq!(row["p"].as_f64().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn bad_flags_are_usage_errors() {
    for args in [
        &["pmf", "--alpha", "0"][..],
        &["pmf", "--alpha", "1.5"],
        &["pmf", "--lambda", "0"],
        &["pmf", "--t", "0"],
        &["pmf", "--t", "-1"],
        &["pmf", "--kmax", "x"],
        &["pgf", "--u", "1.5"],
        &["pgf"],
        &["frobnicate"],
        &["sample", "--process", "bogus", "--n", "3"],
        &["sample", "--process", "space", "--n", "0"],
        &["sample", "--process", "composed", "--n", "3"],
        &["sample", "--process", "space", "--nu", "0.5", "--n", "3"],
        &["sample", "--process", "space", "--gamma", "0.5", "--n", "3"],
        &["verify", "--suite", "nope"],
        &["verify", "--suite", "subordination"],
        &["verify", "--suite", "ode", "--nu", "0.5"],
        &["passage", "--k", "-1", "--t", "1"],
        &["passage", "--k", "1"],
        &["passage", "--k", "1", "--t", "1", "--tmax", "2", "--steps", "3"],
        &["--threads", "0", "pmf"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["pmf", "--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 1);
}

#[test]
fn nonconvergence_flushes_partial_rows() {
    let args = ["pmf", "--alpha", "1", "--nu", "0.3", "--lambda", "1.5", "--t", "5", "--kmax", "40"];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    let (_, rows) = csv_table(&out);
    assert!(!rows.is_empty() && rows.len() < 41);
    let mut with_json = args.to_vec();
    with_json.extend(["--format", "json"]);
    let out = run(&with_json);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), rows.len());
    assert!(v["meta"]["error"].as_str().unwrap().contains("did not converge"));
}

#[test]
fn generating_function_values() {
    assert_eq!(column(&run(&["pgf", "--alpha", "0.5", "--nu", "0.5", "--u", "1"]), "value"), [1.0]);
    let v = column(&run(&["pgf", "--alpha", "1", "--nu", "1", "--lambda", "2", "--t", "1", "--u", "0.5"]), "value");
    assert!((v[0] - (-1.0f64).exp()).abs() < 1e-15);
    let out = run(&["pgf", "--alpha", "0.5", "--nu", "0.5", "--u", "0.3", "--lambda", "1", "--t", "1"]);
    let want = mittag_leffler(0.5, -(0.7f64).sqrt(), &SeriesConfig::default()).unwrap().value;
    assert!((column(&out, "value")[0] - want).abs() < 1e-13);
}

#[test]
fn sampling_is_reproducible() {
    let args = ["sample", "--process", "space", "--alpha", "0.6", "--n", "40000", "--seed", "7"];
    let a = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, run(&args).stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(a.stdout, run(&threaded).stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_fracpois")).args(args).env("FRACPOIS_THREADS", "2").output().unwrap();
    assert_eq!(a.stdout, env.stdout);
    let mut other = args.to_vec();
    other[7] = "8";
    assert_ne!(a.stdout, run(&other).stdout);
}

#[test]
fn every_process_samples() {
    for args in [
        &["sample", "--process", "time", "--nu", "0.5", "--n", "100"][..],
        &["sample", "--process", "space-time", "--alpha", "0.5", "--nu", "0.7", "--n", "100"],
        &["sample", "--process", "composed", "--alpha", "0.8", "--gamma", "0.5", "--n", "100"],
    ] {
        let out = run(args);
        assert!(out.status.success(), "{args:?}");
        assert_eq!(column(&out, "count").len(), 100);
    }
    let v = json(&run(&[
        "sample",
        "--process",
        "composed",
        "--alpha",
        "0.8",
        "--gamma",
        "0.5",
        "--n",
        "3",
        "--format",
        "json",
    ]));
    assert_eq!(v["meta"]["sampler"]["method"], "composed");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn zero_count_frequency_matches_exponential() {
    let out = run(&["sample", "--process", "space", "--alpha", "0.5", "--n", "1000000", "--lambda", "1", "--t", "1"]);
    let counts = column(&out, "count");
    let n = counts.len() as f64;
    let p0 = (-1.0f64).exp();
    let hat = counts.iter().filter(|&&c| c == 0.0).count() as f64 / n;
    assert!((hat - p0).abs() < 3.0 * (p0 * (1.0 - p0) / n).sqrt(), "{hat}");
}

#[test]
fn suites_pass() {
    for args in [
        &["verify", "--suite", "ode", "--alpha", "1"][..],
        &["verify", "--suite", "ode", "--alpha", "0.5"],
        &["verify", "--suite", "subordination", "--alpha", "0.8", "--gamma", "0.5"],
        &["verify", "--suite", "oracle"],
        &["verify", "--suite", "pmf-mc", "--alpha", "0.5", "--n", "100000"],
        &["verify", "--suite", "pmf-mc", "--alpha", "1", "--nu", "0.6", "--n", "100000"],
        &["verify", "--suite", "min-uniform", "--alpha", "0.5", "--nu", "0.5", "--n", "100000"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let v = json(&run(&["verify", "--suite", "oracle", "--format", "json"]));
    assert_eq!(v["meta"]["passed"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), parse_fixture(PMF_REFERENCE).unwrap().len());
}

#[test]
fn degenerate_table_is_a_statistical_failure() {
    let out = run(&["verify", "--suite", "pmf-mc", "--lambda", "1e-9", "--n", "10000"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn passage_rows() {
    let out = run(&["passage", "--alpha", "1", "--lambda", "1", "--k", "1", "--t", "2"]);
    let (c, bound, d) = (column(&out, "cdf")[0], column(&out, "cdf_error_bound")[0], column(&out, "density")[0]);
    assert!((c - (1.0 - (-2.0f64).exp())).abs() <= bound && bound < 1e-12);
    assert!((d - (-2.0f64).exp()).abs() < 1e-15);
    let d = column(&run(&["passage", "--alpha", "1", "--lambda", "2", "--k", "3", "--t", "1"]), "density")[0];
    assert!((d - 4.0 * (-2.0f64).exp()).abs() < 1e-15);

    let refs = parse_fixture(PMF_REFERENCE).unwrap();
    let p: Vec<f64> = refs.iter().filter(|r| r.alpha == 0.5 && r.nu == 1.0 && r.k <= 1).map(|r| r.value).collect();
    let c = column(&run(&["passage", "--alpha", "0.5", "--k", "2", "--t", "1"]), "cdf")[0];
    assert!((c - (1.0 - p[0] - p[1])).abs() < 1e-12);

    let out = run(&["passage", "--alpha", "0.5", "--k", "0", "--tmax", "2", "--steps", "4"]);
    let (header, rows) = csv_table(&out);
    assert_eq!(header, ["t", "cdf", "cdf_error_bound", "density", "density_error_bound"]);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[1] == "1" && r[2] == "0" && r[3].is_empty() && r[4].is_empty()));
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = run(&["pmf", "--kmax", "3", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}
