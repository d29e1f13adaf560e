use std::process::Command;

use packmatch::cli::OutputRecord;
use packmatch::coincidence::{coincidence_probability, PackSpec};

fn packmatch(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_packmatch"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn counts_table_golden() {
    let (stdout, _, code) = packmatch(&["table"]);
    assert_eq!(code, 0);
    let expected = "\
|E(n,d)|: ordered pairs of fillings that end in the same pack
   n\\d       1       2       3       4       5
     1       1       2       3       4       5
     2       1       6      15      28      45
     3       1      20      93     256     545
     4       1      70     639    2716    7885
     5       1     252    4653   31504  127905
";
    assert_eq!(stdout, expected);
}

#[test]
fn probabilities_csv_golden() {
    let (stdout, _, code) = packmatch(&["table", "2", "3", "probabilities", "--format", "csv"]);
    assert_eq!(code, 0);
    let expected = "\
# table max_d=3 max_n=2 which=probabilities
name,n,d,numerator,denominator,decimal,digits,rendering,error_bound,tail_bound,last_index
\"P(1,1)\",1,1,1,1,1.0000,4,fixed,,,
\"P(1,2)\",1,2,1,2,0.5000,4,fixed,,,
\"P(1,3)\",1,3,1,3,0.3333,4,fixed,,,
\"P(2,1)\",2,1,1,1,1.0000,4,fixed,,,
\"P(2,2)\",2,2,3,8,0.3750,4,fixed,,,
\"P(2,3)\",2,3,5,27,0.1852,4,fixed,,,
";
    assert_eq!(stdout, expected);
}

#[test]
fn json_output_reparses_exactly() {
    let (stdout, _, code) = packmatch(&["prob", "--n", "60", "--d", "5", "--format", "json"]);
    assert_eq!(code, 0);
    let record: OutputRecord = serde_json::from_str(&stdout).unwrap();
    assert_eq!(record.command, "prob");
    assert_eq!(record.invocation, "prob --n 60 --d 5 --format json");
    let p = coincidence_probability(PackSpec::new(60, 5).unwrap());
    let probs: Vec<_> = record
        .values
        .iter()
        .filter(|v| v.name.starts_with("probability"))
        .map(|v| v.exact.as_ref().unwrap().to_ratio().unwrap())
        .collect();
    assert_eq!(probs, vec![p.clone(), p.clone(), p]);
}

#[test]
fn simulation_output_is_reproducible() {
    let args = [
        "simulate", "pair", "--n", "2", "--d", "2", "--trials", "1000000", "--seed", "7",
        "--format", "json",
    ];
    let (first, _, code) = packmatch(&args);
    assert_eq!(code, 0);
    let (second, _, _) = packmatch(&args);
    assert_eq!(first, second);
    let record: OutputRecord = serde_json::from_str(&first).unwrap();
    let sim = record.simulation.unwrap();
    let (lo, hi) = (
        sim["ci_low"].as_f64().unwrap(),
        sim["ci_high"].as_f64().unwrap(),
    );
    assert!(lo <= 0.375 && 0.375 <= hi);
    assert_eq!(sim["seed"], 7);
}

#[test]
fn exit_statuses() {
    assert_eq!(packmatch(&["prob", "--n", "3", "--d", "0"]).2, 2);
    assert_eq!(packmatch(&["frobnicate"]).2, 2);
    assert_eq!(
        packmatch(&["expect", "--n", "2", "--d", "2", "--tol", "-1"]).2,
        2
    );
    let (_, stderr, code) = packmatch(&["mixture", "/definitely/missing", "--d", "3"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("error:"));
    assert_eq!(packmatch(&["--version"]).2, 0);
}

#[test]
fn mixture_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sizes.txt");
    std::fs::write(&path, "# sizes\n58 1/2\n59 banana\n").unwrap();
    let (_, stderr, code) = packmatch(&["mixture", path.to_str().unwrap(), "--d", "5"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");
}
