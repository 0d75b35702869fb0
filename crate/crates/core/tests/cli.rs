use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hashnet::cli::{run, EXIT_INPUT, EXIT_OK, EXIT_UNDEFINED_METRIC};
use hashnet::index::{binarize, pack};
use hashnet::io::{load_model, read_codes, write_codes, write_features, write_labels};
use hashnet::numerics::Matrix;
use hashnet::synthetic::Mixture;
use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn hashnet(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hashnet").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    features: PathBuf,
    labels: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let data = Mixture::well_separated(3, 8, 1.0, 6.0, 1)
            .unwrap()
            .sample(120, 2);
        let features = dir.path().join("train.hsf");
        let labels = dir.path().join("train.hsl");
        write_features(&features, &data.features).unwrap();
        write_labels(&labels, &data.labels).unwrap();
        Fixture {
            dir,
            features,
            labels,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, model: &Path) -> Outcome {
        hashnet(&[
            "train",
            "--features",
            p(&self.features),
            "--labels",
            p(&self.labels),
            "--out",
            p(model),
            "--bits",
            "8",
            "--outer",
            "2",
        ])
    }
}

fn codes_file(dir: &Path, name: &str, cols: &[&[f64]]) -> PathBuf {
    let bits = cols[0].len();
    let b = Matrix::from_fn(bits, cols.len(), |r, c| cols[c][r]);
    let path = dir.join(name);
    write_codes(&path, &pack(&b).unwrap()).unwrap();
    path
}

#[test]
fn train_is_byte_reproducible_and_logs_every_batch() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a.json"), fx.path("b.json"));
    let first = fx.train(&a);
    assert_eq!(first.code, EXIT_OK, "{}", first.stderr);
    assert_eq!(fx.train(&b).code, EXIT_OK);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(fx.path("a.json.log")).unwrap(),
        fs::read(fx.path("b.json.log")).unwrap()
    );

    let log = fs::read_to_string(fx.path("a.json.log")).unwrap();
    let lines: Vec<Vec<&str>> = log.lines().map(|l| l.split(' ').collect()).collect();
    // 120 samples, batch 120: T = 4 per outer iteration.
    assert_eq!(lines.len(), 2 * 4);
    for (i, fields) in lines.iter().enumerate() {
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[0].parse::<usize>().unwrap(), i / 4 + 1);
        assert_eq!(fields[1].parse::<usize>().unwrap(), i % 4 + 1);
        let terms: Vec<f64> = fields[2..].iter().map(|f| f.parse().unwrap()).collect();
        let sum: f64 = terms[1..].iter().sum();
        assert!((terms[0] - sum).abs() <= 1e-12 * terms[0].abs().max(1.0));
    }
    assert!(!first.stdout.is_empty());
}

#[test]
fn encode_matches_forward_pass_and_is_reproducible() {
    let fx = Fixture::new();
    let model = fx.path("m.json");
    assert_eq!(fx.train(&model).code, EXIT_OK);
    let (c1, c2) = (fx.path("c1.hsb"), fx.path("c2.hsb"));
    for out in [&c1, &c2] {
        let r = hashnet(&[
            "encode",
            "--model",
            p(&model),
            "--features",
            p(&fx.features),
            "--out",
            p(out),
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    }
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());

    let (network, _) = load_model(&model).unwrap();
    let x = hashnet::io::read_features(&fx.features).unwrap();
    let expected = pack(&binarize(&network.predict(&x.transpose()).unwrap())).unwrap();
    assert_eq!(read_codes(&c1).unwrap(), expected);
}

#[test]
fn encode_accepts_empty_feature_files() {
    let fx = Fixture::new();
    let model = fx.path("m.json");
    assert_eq!(fx.train(&model).code, EXIT_OK);
    let empty = fx.path("empty.hsf");
    write_features(&empty, &Matrix::zeros(0, 8)).unwrap();
    let out = fx.path("empty.hsb");
    let r = hashnet(&[
        "encode",
        "--model",
        p(&model),
        "--features",
        p(&empty),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let codes = read_codes(&out).unwrap();
    assert_eq!((codes.len(), codes.bits()), (0, 8));
}

#[test]
fn encode_rejects_wrong_dimension() {
    let fx = Fixture::new();
    let model = fx.path("m.json");
    assert_eq!(fx.train(&model).code, EXIT_OK);
    let wide = fx.path("wide.hsf");
    write_features(&wide, &Matrix::zeros(3, 9)).unwrap();
    let r = hashnet(&[
        "encode",
        "--model",
        p(&model),
        "--features",
        p(&wide),
        "--out",
        p(&fx.path("x.hsb")),
    ]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn missing_input_is_an_input_error() {
    let fx = Fixture::new();
    let r = hashnet(&[
        "train",
        "--features",
        p(&fx.path("nope.hsf")),
        "--labels",
        p(&fx.labels),
        "--out",
        p(&fx.path("m.json")),
    ]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("nope.hsf"));
}

#[test]
fn corrupt_magic_names_file_and_offset() {
    let fx = Fixture::new();
    let bad = fx.path("bad.hsb");
    fs::write(&bad, b"XXXX\x01\x00\x00\x00\x08\x00\x00\x00\x00").unwrap();
    let r = hashnet(&["search", "--db", p(&bad), "--queries", p(&bad)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("bad.hsb"));
    assert!(r.stderr.contains("offset 0"), "{}", r.stderr);
}

#[test]
fn search_finds_itself_first_and_caps_k() {
    let dir = TempDir::new().unwrap();
    let db = codes_file(
        dir.path(),
        "db.hsb",
        &[&[1.0, 1.0, 1.0], &[1.0, 1.0, -1.0], &[-1.0, -1.0, -1.0]],
    );
    let r = hashnet(&["search", "--db", p(&db), "--queries", p(&db), "--k", "10"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout, "0 0:0 1:1 2:3\n1 1:0 0:1 2:2\n2 2:0 1:2 0:3\n");

    let out = dir.path().join("hits.txt");
    let r = hashnet(&[
        "search",
        "--db",
        p(&db),
        "--queries",
        p(&db),
        "--k",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.is_empty());
    assert_eq!(fs::read_to_string(out).unwrap(), "0 0:0\n1 1:0\n2 2:0\n");
}

#[test]
fn search_rejects_code_length_mismatch() {
    let dir = TempDir::new().unwrap();
    let db = codes_file(dir.path(), "db.hsb", &[&[1.0; 8]]);
    let q = codes_file(dir.path(), "q.hsb", &[&[1.0; 16]]);
    assert_eq!(
        hashnet(&["search", "--db", p(&db), "--queries", p(&q)]).code,
        EXIT_INPUT
    );
}

#[test]
fn eval_reports_map_with_six_decimals() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let db = codes_file(
        d,
        "db.hsb",
        &[
            &[1.0, 1.0, 1.0, 1.0],
            &[1.0, 1.0, 1.0, -1.0],
            &[1.0, 1.0, -1.0, -1.0],
        ],
    );
    let q = codes_file(d, "q.hsb", &[&[1.0, 1.0, 1.0, 1.0]]);
    write_labels(d.join("db.hsl"), &[0, 1, 0]).unwrap();
    write_labels(d.join("q.hsl"), &[0]).unwrap();
    let r = hashnet(&[
        "eval",
        "--db-codes",
        p(&db),
        "--db-labels",
        p(&d.join("db.hsl")),
        "--query-codes",
        p(&q),
        "--query-labels",
        p(&d.join("q.hsl")),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    // Relevance [1, 0, 1]: (1/1 + 2/3) / 2.
    assert_eq!(
        r.stdout,
        "bits=4 database=3 queries=1 leave_one_out=false map=0.833333\n"
    );
}

#[test]
fn eval_leave_one_out_on_perfect_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let a: &[f64] = &[1.0, -1.0];
    let b: &[f64] = &[-1.0, 1.0];
    let codes = codes_file(d, "c.hsb", &[a, a, b, b, a]);
    write_labels(d.join("c.hsl"), &[3, 3, 7, 7, 3]).unwrap();
    let labels = d.join("c.hsl");
    let args = [
        "eval",
        "--db-codes",
        p(&codes),
        "--db-labels",
        p(&labels),
        "--query-codes",
        p(&codes),
        "--query-labels",
        p(&labels),
        "--leave-one-out",
    ];
    let r = hashnet(&args);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(
        r.stdout.ends_with("leave_one_out=true map=1.000000\n"),
        "{}",
        r.stdout
    );
}

#[test]
fn eval_without_relevant_items_is_undefined() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let db = codes_file(d, "db.hsb", &[&[1.0], &[-1.0]]);
    write_labels(d.join("db.hsl"), &[0, 0]).unwrap();
    write_labels(d.join("q.hsl"), &[5, 6]).unwrap();
    let r = hashnet(&[
        "eval",
        "--db-codes",
        p(&db),
        "--db-labels",
        p(&d.join("db.hsl")),
        "--query-codes",
        p(&db),
        "--query-labels",
        p(&d.join("q.hsl")),
    ]);
    assert_eq!(r.code, EXIT_UNDEFINED_METRIC);
}

#[test]
fn itq_prints_monotone_trace_and_is_reproducible() {
    let fx = Fixture::new();
    let (c1, c2) = (fx.path("i1.hsb"), fx.path("i2.hsb"));
    let itq = |out: &Path| {
        hashnet(&[
            "itq",
            "--features",
            p(&fx.features),
            "--bits",
            "4",
            "--iters",
            "20",
            "--out",
            p(out),
        ])
    };
    let run1 = itq(&c1);
    let run2 = itq(&c2);
    assert_eq!(run1.code, EXIT_OK, "{}", run1.stderr);
    assert_eq!(run1.stdout, run2.stdout);
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());

    let lines: Vec<&str> = run1.stdout.lines().collect();
    assert_eq!(lines.len(), 21);
    let objectives: Vec<f64> = lines[..20]
        .iter()
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert!(objectives.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(lines[20].starts_with("final objective "));
}

#[test]
fn itq_on_hypercube_corners_reaches_zero() {
    let dir = TempDir::new().unwrap();
    let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
    let features = dir.path().join("corners.hsf");
    write_features(&features, &x).unwrap();
    let out = dir.path().join("corners.hsb");
    let r = hashnet(&[
        "itq",
        "--features",
        p(&features),
        "--bits",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let last = r.stdout.lines().last().unwrap();
    let objective: f64 = last.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(objective <= 1e-12, "{last}");
    assert_eq!(read_codes(&out).unwrap().len(), 4);
}

#[test]
fn unknown_flag_is_an_input_error() {
    let r = hashnet(&["search", "--db", "a", "--queries", "b", "--frobnicate"]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn binary_exits_with_the_library_code() {
    let dir = TempDir::new().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_hashnet"))
        .args(["search", "--db"])
        .arg(dir.path().join("absent.hsb"))
        .args(["--queries", "x"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&status.stderr).contains("absent.hsb"));
}
