use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hippi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hippi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn generate(dir: &Path, extra: &[&str]) -> String {
    let path = dir.join("problem.json");
    let p = path.to_str().unwrap();
    let mut args = vec![
        "generate", "--out", p, "--seed", "4", "--k", "4", "--d-true", "9",
    ];
    args.extend_from_slice(extra);
    let out = hippi(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    p.to_string()
}

/// Column `name` of the first data row of a CSV document.
fn field(csv: &str, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    row[i].to_string()
}

#[test]
fn generate_prints_summary_and_outlier_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let out = hippi(&[
        "generate",
        "--out",
        path.to_str().unwrap(),
        "--k",
        "7",
        "--d-true",
        "12",
        "--outlier-fraction",
        "0.5",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("k = 7, m = 168, d_true = 12"), "{text}");
    assert!(
        text.contains("outliers per object: 12 12 12 12 12 12 12"),
        "{text}"
    );
}

#[test]
fn planted_problem_solves_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let problem = generate(dir.path(), &[]);
    let run = dir.path().join("run");
    let out = hippi(&["solve", &problem, "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(field(&stdout(&out), "fscore"), "1.0");

    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    let objectives: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(objectives.windows(2).all(|w| w[1] >= w[0]));
    assert!(run.join("report.csv").exists());

    let assignment = run.join("assignment.json");
    let out = hippi(&["eval", &problem, assignment.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(field(&stdout(&out), "fscore"), "1.0");
    assert_eq!(field(&stdout(&out), "cycle_error"), "0.0");

    let out = hippi(&["verify", assignment.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(field(&stdout(&out), "transitivity_violations"), "0");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let problem = generate(
        dir.path(),
        &["--outlier-fraction", "0.2", "--visibility", "0.8"],
    );
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = hippi(&[
            "solve",
            &problem,
            "--out",
            out_dir.to_str().unwrap(),
            "--init",
            "random",
            "--seed",
            "9",
            "--projection",
            "auction",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        files.push((
            fs::read(out_dir.join("assignment.json")).unwrap(),
            fs::read(out_dir.join("trace.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn config_file_is_read_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let problem = generate(dir.path(), &[]);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "method = \"spectral\"\nproblem = {problem:?}\nout = \"from-config\"\n[solver]\nuniverse_size = {{ explicit = 12 }}\n"
        ),
    )
    .unwrap();
    let out = hippi(&["--config", config.to_str().unwrap(), "solve"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(field(&text, "method"), "spectral");
    assert_eq!(field(&text, "d"), "12");
    assert!(dir
        .path()
        .join("from-config")
        .join("assignment.json")
        .exists());

    let out = hippi(&[
        "--config",
        config.to_str().unwrap(),
        "solve",
        "--method",
        "greedy",
        "--d",
        "10",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(field(&stdout(&out), "method"), "greedy");
    assert_eq!(field(&stdout(&out), "d"), "10");
}

#[test]
fn external_results_are_imported() {
    let dir = tempfile::tempdir().unwrap();
    let problem = generate(dir.path(), &[]);
    let first = dir.path().join("first");
    assert_eq!(
        code(&hippi(&[
            "solve",
            &problem,
            "--method",
            "random",
            "--out",
            first.to_str().unwrap()
        ])),
        0
    );
    let import = first.join("assignment.json");
    let out = hippi(&[
        "solve",
        &problem,
        "--method",
        "quickmatch",
        "--import",
        import.to_str().unwrap(),
        "--out",
        dir.path().join("second").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(field(&stdout(&out), "method"), "quickmatch");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let problem = generate(dir.path(), &[]);
    let out_dir = dir.path().join("x");
    let o = out_dir.to_str().unwrap();
    assert_eq!(code(&hippi(&["frobnicate"])), 1);
    assert_eq!(
        code(&hippi(&[
            "solve", &problem, "--out", o, "--method", "magic"
        ])),
        1
    );
    assert_eq!(
        code(&hippi(&[
            "solve",
            &problem,
            "--out",
            o,
            "--projection",
            "simplex"
        ])),
        1
    );
    assert_eq!(
        code(&hippi(&["solve", &problem, "--out", o, "--sigma", "-1"])),
        1
    );
    assert_eq!(code(&hippi(&["solve", &problem])), 1);
    assert_eq!(code(&hippi(&["solve", "/nonexistent.json", "--out", o])), 1);
    assert_eq!(
        code(&hippi(&[
            "solve", &problem, "--out", o, "--method", "matchals"
        ])),
        1
    );
    assert_eq!(code(&hippi(&["--help"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let problem = generate(dir.path(), &[]);
    let empty = dir.path().join("empty.json");
    fs::write(&empty, "").unwrap();
    assert_eq!(
        code(&hippi(&["eval", &problem, empty.to_str().unwrap()])),
        2
    );
    assert_eq!(code(&hippi(&["verify", empty.to_str().unwrap()])), 2);
    let out = dir.path().join("o");
    assert_eq!(
        code(&hippi(&[
            "solve",
            &problem,
            "--out",
            out.to_str().unwrap(),
            "--d",
            "3"
        ])),
        2
    );
}

#[test]
fn strict_psd_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // a 4-cycle with over-long diagonals has no Euclidean embedding and
    // gives an indefinite Gaussian kernel
    let problem = r#"{
      "format": "hippi-problem",
      "sizes": [4, 4],
      "objects": [
        {"points": [[0,0],[1,0],[0,1],[1,1]],
         "features": [[0],[1],[2],[3]],
         "distances": [[0,1,1,3],[1,0,3,1],[1,3,0,1],[3,1,1,0]]},
        {"points": [[0,0],[1,0],[0,1],[1,1]],
         "features": [[0],[1],[2],[3]]}
      ]
    }"#;
    let path = dir.path().join("indefinite.json");
    fs::write(&path, problem).unwrap();
    let p = path.to_str().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(code(&hippi(&["solve", p, "--out", o])), 0);
    assert_eq!(code(&hippi(&["solve", p, "--out", o, "--strict-psd"])), 3);
}

#[test]
fn bench_reports_rows_and_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = hippi(&[
        "bench",
        "--sizes",
        "100,200,400",
        "--d",
        "25",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("exponent"));
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 4);
}
