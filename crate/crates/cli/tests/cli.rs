use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_boxlattice"));
    c.env_remove("BOXLATTICE_MAX_CELLS");
    c
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn moment_csv_header() {
    let text = stdout(&[
        "moment",
        "--catalog",
        "hyperbola",
        "--prime",
        "11",
        "--box",
        "3,4",
    ]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("#boxlattice-v1"));
    assert_eq!(
        lines.next(),
        Some(
            "p,r,n,delta,vol_B,N_V,expected,second_moment,bound_ratio,epsilon,\
             exceptional_fraction,zero_fraction,nonempty_translates"
        )
    );
    let r = rows(&text);
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][..6], ["11", "2", "1", "-1", "12", "10"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "moment",
        "--catalog",
        "fermat_cubic",
        "--prime",
        "11,13",
        "--box",
        "3,4,5",
        "--format",
        "json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn worker_count_does_not_change_output() {
    let cfg = data("joint.json");
    let args = ["run", cfg.to_str().unwrap()];
    let one = bin()
        .args(args)
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .unwrap();
    let many = bin()
        .args(args)
        .env("RAYON_NUM_THREADS", "6")
        .output()
        .unwrap();
    assert!(
        one.status.success(),
        "{}",
        String::from_utf8_lossy(&one.stderr)
    );
    assert_eq!(one.stdout, many.stdout);

    let es = [
        "expsum",
        "--catalog",
        "hyperbola",
        "--prime",
        "97",
        "--u",
        "3,-5",
    ];
    let one = bin()
        .args(es)
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .unwrap();
    let many = bin()
        .args(es)
        .env("RAYON_NUM_THREADS", "6")
        .output()
        .unwrap();
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn scaling_config_reports_trend() {
    let text = stdout(&["run", data("scaling.json").to_str().unwrap()]);
    let r = rows(&text);
    assert_eq!(
        r.iter().map(|row| row[0].as_str()).collect::<Vec<_>>(),
        ["101", "211", "401", "809"]
    );
    for row in &r {
        let ratio: f64 = row[8].parse().unwrap();
        assert!(ratio <= 16.0);
    }
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("#bound_ratio_non_increasing="));
}

#[test]
fn lemma2_batch_is_satisfied() {
    let text = stdout(&["run", data("lemma2.json").to_str().unwrap()]);
    let r = rows(&text);
    assert_eq!(r.len(), 24 * 4);
    assert!(r.iter().all(|row| row[5] == "true" && row[6] == "true"));
}

#[test]
fn output_file_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = run(&[
        "map-sweep",
        "--variety",
        data("elliptic_x3px.json").to_str().unwrap(),
        "--map",
        data("map_xy.json").to_str().unwrap(),
        "--prime",
        "7",
        "--box",
        "2,2",
        "--box2",
        "3",
        "--oracle",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["format"], "boxlattice-v1");
    let row = &v["rows"][0];
    assert_eq!(row["oracle_checked"], true);
    let mass: u64 = row["histogram"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, n)| k.parse::<u64>().unwrap() * n.as_u64().unwrap())
        .sum();
    assert_eq!(mass, 7 * 4 * 3);
}

#[test]
fn count_and_enumerate() {
    let r = rows(&stdout(&[
        "enumerate",
        "--catalog",
        "elliptic_x3px",
        "--prime",
        "5",
    ]));
    assert_eq!(r, [["5", "0", "0"], ["5", "2", "0"], ["5", "3", "0"]]);
    let text = stdout(&[
        "count",
        "--catalog",
        "hyperbola",
        "--prime",
        "5",
        "--box",
        "1:2,2:2",
    ]);
    assert!(text
        .lines()
        .nth(2)
        .unwrap()
        .starts_with("5,4,\"1:2,2:2\",,4,1,"));
}

#[test]
fn indep_reports_witness() {
    let text = stdout(&[
        "indep",
        "--catalog",
        "elliptic_x3px",
        "--map",
        data("map_diagonal.json").to_str().unwrap(),
        "--prime",
        "13",
    ]);
    assert_eq!(
        rows(&text)[0],
        ["13", "19", "4", "5", "false", "0 0 0 1 -1", "true"]
    );
}

#[test]
fn sweep_dumps_field() {
    let text = stdout(&[
        "sweep",
        "--catalog",
        "hyperbola",
        "--prime",
        "5",
        "--box",
        "2,2",
    ]);
    let r = rows(&text);
    assert_eq!(r.len(), 25);
    let total: u64 = r.iter().map(|row| row[2].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 4 * 4);
}

#[test]
fn catalog_lists_entries() {
    let text = stdout(&["catalog"]);
    for name in [
        "hyperbola",
        "elliptic_x3px",
        "hyperelliptic_l",
        "parabola_graph",
        "fermat_cubic",
    ] {
        assert!(text.contains(name));
    }
}

#[test]
fn guard_exit_code() {
    let out = run(&[
        "moment",
        "--catalog",
        "hyperbola",
        "--prime",
        "20011",
        "--box",
        "1,1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args([
            "moment",
            "--catalog",
            "hyperbola",
            "--prime",
            "101",
            "--box",
            "1,1",
        ])
        .env("BOXLATTICE_MAX_CELLS", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args([
            "moment",
            "--catalog",
            "hyperbola",
            "--prime",
            "101",
            "--box",
            "1,1",
            "--force",
        ])
        .env("BOXLATTICE_MAX_CELLS", "1000")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn invalid_input_exit_code() {
    for args in [
        &[
            "moment",
            "--catalog",
            "nope",
            "--prime",
            "5",
            "--box",
            "1,1",
        ][..],
        &[
            "moment",
            "--catalog",
            "hyperbola",
            "--prime",
            "9",
            "--box",
            "1,1",
        ],
        &[
            "moment",
            "--catalog",
            "hyperbola",
            "--prime",
            "5",
            "--box",
            "1,1,1",
        ],
        &[
            "moment",
            "--catalog",
            "hyperbola",
            "--param",
            "c=5",
            "--prime",
            "5",
            "--box",
            "1,1",
        ],
        &["moment", "--prime", "5", "--box", "1,1"],
        &["lemma2", "--prime", "3", "--length", "1"],
        &[
            "expsum",
            "--catalog",
            "hyperbola",
            "--prime",
            "5",
            "--u",
            "0,0",
        ],
        &["bogus"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"catalog": "hyperbola", "primes": [], "boxes": ["1,1"]}"#,
    )
    .unwrap();
    assert_eq!(run(&["run", cfg.to_str().unwrap()]).status.code(), Some(1));
}
