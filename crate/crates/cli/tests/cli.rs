use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pgraph::schema::{Body, Document};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn pgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgraph"))
        .args(args)
        .env_remove("ELPI_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let line = fixture("line.csv");
    assert_eq!(code(&pgraph(&["fit", "--input.path", &line, "--fit.nodes", "4"])), 0);
    assert_eq!(
        code(&pgraph(&["fit", "-c", &fixture("bad.toml"), "--input.path", &line])),
        2
    );
    assert_eq!(code(&pgraph(&["fit", "--input.path", &line, "--fit.alpha", "-1"])), 2);
    assert_eq!(code(&pgraph(&["pseudotime", "--input.path", &line])), 2);
    assert_eq!(code(&pgraph(&["maze", "--input.path", &line])), 2);
    assert_eq!(code(&pgraph(&["fit", "--input.path", "/no/such/file.csv"])), 3);
    assert_eq!(code(&pgraph(&["fit", "--input.path", &line, "--fit.r0", "1e-9"])), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = tmp(&dir, "bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = pgraph(&["fit", "--input.path", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 2"));
}

#[test]
fn thread_count_comes_from_flag_or_environment() {
    let line = fixture("line.csv");
    let args = ["fit", "--input.path", &line, "--fit.nodes", "4"];
    let base = stdout(&pgraph(&args));
    let mut with_flag = args.to_vec();
    with_flag.extend(["--threads", "2"]);
    assert_eq!(stdout(&pgraph(&with_flag)), base);
    let env = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_pgraph"))
            .args(args)
            .env("ELPI_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(stdout(&env("1")), base);
    assert_eq!(code(&env("many")), 2);
}

#[test]
fn flags_override_the_config_file() {
    let star = fixture("star.csv");
    let cfg = fixture("star.toml");
    let from_file = stdout(&pgraph(&["fit", "-c", &cfg, "--input.path", &star]));
    let from_flags = stdout(&pgraph(&[
        "fit",
        "--input.path",
        &star,
        "--input.header",
        "true",
        "--input.weight_column",
        "2",
        "--input.label_column",
        "3",
        "--fit.strategy",
        "tree",
        "--fit.nodes",
        "12",
        "--fit.r0",
        "auto",
    ]));
    assert_eq!(from_file, from_flags);
    let doc = Document::from_json(&stdout(&pgraph(&[
        "fit",
        "-c",
        &cfg,
        "--input.path",
        &star,
        "--fit.nodes",
        "7",
    ])))
    .unwrap();
    let Body::Graph(g) = doc.body else {
        panic!("expected a graph")
    };
    assert_eq!(g.nodes.len(), 7);
    assert!(g.r0.is_some_and(f64::is_finite));
}

#[test]
fn json_output_round_trips_exactly() {
    let star = fixture("star.csv");
    let cfg = fixture("star.toml");
    let text = stdout(&pgraph(&["fit", "-c", &cfg, "--input.path", &star]));
    assert_eq!(Document::from_json(&text).unwrap().to_json(), text);
    let text = stdout(&pgraph(&[
        "forest",
        "--input.path",
        &fixture("line.csv"),
        "--fit.nodes",
        "4",
        "--fit.r0",
        "0.2",
    ]));
    assert_eq!(Document::from_json(&text).unwrap().to_json(), text);
    let text = std::fs::read_to_string(fixture("line_ensemble.json")).unwrap();
    assert_eq!(Document::from_json(&text).unwrap().to_json(), text);
}

#[test]
fn pseudotime_csv_has_one_row_per_point() {
    let out = pgraph(&[
        "pseudotime",
        "-c",
        &fixture("star.toml"),
        "--input.path",
        &fixture("star.csv"),
        "--analysis.graph",
        &fixture("star_graph.json"),
        "--analysis.root",
        "0",
        "--analysis.leaf",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("point_index,pseudotime,on_path,edge_index,t"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 180);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], i.to_string());
        assert!(r[2] == "0" || r[2] == "1");
        assert_eq!(r[1].is_empty(), r[2] == "0");
        if let Ok(s) = r[1].parse::<f64>() {
            assert!((0.0..=1.0).contains(&s));
        }
    }
    assert!(rows.iter().any(|r| r[2] == "1"));

    let bad = pgraph(&[
        "pseudotime",
        "-c",
        &fixture("star.toml"),
        "--input.path",
        &fixture("star.csv"),
        "--analysis.graph",
        &fixture("star_graph.json"),
        "--analysis.root",
        "0",
        "--analysis.leaf",
        "99",
    ]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn svg_coordinates_use_six_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let svg = tmp(&dir, "out.svg");
    let out = pgraph(&[
        "fit",
        "-c",
        &fixture("star.toml"),
        "--input.path",
        &fixture("star.csv"),
        "--output.graph",
        tmp(&dir, "g.json").to_str().unwrap(),
        "--output.svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"point\"").count(), 180);
    assert_eq!(text.matches("class=\"node\"").count(), 12);
    for attr in text.split(['"']).filter(|s| s.parse::<f64>().is_ok()) {
        let digits = attr.chars().filter(char::is_ascii_digit).collect::<String>();
        assert!(digits.trim_start_matches('0').len() <= 6, "{attr}");
    }
}

#[test]
fn render_accepts_every_document_kind() {
    let dir = tempfile::tempdir().unwrap();
    let line = fixture("line.csv");
    let mut docs = vec![fixture("line_ensemble.json")];
    for (cmd, extra) in [
        ("forest", vec!["--fit.r0", "0.2"]),
        ("maze", vec!["--fit.r0", "0.2"]),
        ("consensus", vec![]),
    ] {
        let path = tmp(&dir, &format!("{cmd}.json"));
        let mut args = vec![
            cmd,
            "--input.path",
            &line,
            "--fit.nodes",
            "5",
            "--output.graph",
            path.to_str().unwrap(),
        ];
        args.extend(extra);
        if cmd == "consensus" {
            args.extend(["--consensus.ensemble", docs[0].as_str()]);
        }
        let out = pgraph(&args);
        assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        docs.push(path.display().to_string());
    }
    let list = format!(
        "[{}]",
        docs.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>().join(", ")
    );
    let out = pgraph(&[
        "render",
        "--input.path",
        &line,
        "--render.graphs",
        &list,
        "--render.projection",
        "pca",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = stdout(&out);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.matches("class=\"graph\"").count() >= 8 + 3);
}

#[test]
fn bench_writes_one_row_per_setting() {
    let out = pgraph(&[
        "bench",
        "--bench.nodes",
        "[4, 6]",
        "--bench.points",
        "[200]",
        "--bench.dims",
        "[2, 5]",
        "--bench.strategies",
        "[\"curve\", \"circle\"]",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("strategy,nodes,points,dims,seconds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("200")));
}
