use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn value_after(text: &str, prefix: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_else(|| panic!("no `{prefix}` in {text}"))
        .trim()
        .to_owned()
}

#[test]
fn train_then_eval_reports_the_same_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.csv");
    let tree = dir.path().join("t.json");
    let o = topk(&[
        "synth",
        "parity-mix",
        "--h",
        "3",
        "--K",
        "4",
        "--eps",
        "0.2",
        "--n",
        "1500",
        "--seed",
        "9",
        "--out",
        p(&data),
    ]);
    assert!(o.status.success(), "{o:?}");
    for engine in ["plain", "opt"] {
        let o = topk(&[
            "train",
            "--data",
            p(&data),
            "--k",
            "3",
            "--depth",
            "3",
            "--engine",
            engine,
            "--out",
            p(&tree),
        ]);
        assert!(o.status.success(), "{o:?}");
        let trained = value_after(&stdout(&o), "train accuracy:");
        let o = topk(&["eval", "--tree", p(&tree), "--data", p(&data)]);
        assert!(o.status.success());
        assert_eq!(value_after(&stdout(&o), "accuracy:"), trained);
        let acc: f64 = trained.parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn identical_invocations_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = topk(&[
            "synth",
            "monotone-mix",
            "--h",
            "4",
            "--K",
            "3",
            "--eps",
            "0.1",
            "--n",
            "300",
            "--seed",
            "4",
            "--out",
            p(out),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ta = dir.path().join("ta.json");
    let tb = dir.path().join("tb.json");
    for t in [&ta, &tb] {
        assert!(topk(&[
            "train",
            "--data",
            p(&a),
            "--k",
            "2",
            "--depth",
            "3",
            "--out",
            p(t)
        ])
        .status
        .success());
    }
    assert_eq!(fs::read(&ta).unwrap(), fs::read(&tb).unwrap());
}

#[test]
fn usage_errors_exit_with_one() {
    let o = topk(&["train", "--data", "x.csv", "--k", "0", "--out", "t.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage: topk train"));
    assert_eq!(topk(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(topk(&["nonsense"]).status.code(), Some(1));
    assert_eq!(
        topk(&[
            "synth",
            "parity-mix",
            "--h",
            "2",
            "--K",
            "3",
            "--eps",
            "1.5",
            "--n",
            "5",
            "--out",
            "x"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        topk(&[
            "--impurity",
            "misclass",
            "eval",
            "--tree",
            "a",
            "--data",
            "b"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        topk(&["--time-limit", "0", "eval", "--tree", "a", "--data", "b"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(topk(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = topk(&["eval", "--tree", p(&missing), "--data", p(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,label\n0,1\n2,0\n").unwrap();
    let o = topk(&[
        "train",
        "--data",
        p(&bad),
        "--out",
        p(&dir.path().join("t.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn binarize_raw_data() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let schema = dir.path().join("schema.json");
    let out = dir.path().join("bin.csv");
    let map = dir.path().join("map.json");
    fs::write(
        &raw,
        "color,size,y\nred,1.0,a\nblue,2.0,b\nred,3.0,a\ngreen,4.0,b\n",
    )
    .unwrap();
    fs::write(
        &schema,
        r#"{"columns":[{"name":"color","kind":"categorical"},{"name":"size","kind":"numeric"},{"name":"y","kind":"label"}]}"#,
    )
    .unwrap();
    let o = topk(&[
        "binarize",
        "--data",
        p(&raw),
        "--schema",
        p(&schema),
        "--out",
        p(&out),
        "--max-features",
        "5",
        "--map-out",
        p(&map),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 6);
    assert!(header.ends_with(",label"));
    assert!(map.exists());
}

#[test]
fn oracle_check_passes() {
    let o = topk(&[
        "oracle-check",
        "--instances",
        "40",
        "--max-d",
        "6",
        "--max-n",
        "32",
        "--seed",
        "11",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("40 of 40"));
}

#[test]
fn bench_subcommands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.csv");
    assert!(topk(&[
        "synth",
        "parity-mix",
        "--h",
        "2",
        "--K",
        "3",
        "--eps",
        "0.1",
        "--n",
        "400",
        "--out",
        p(&data)
    ])
    .status
    .success());

    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"datasets":[{:?}],"ks":[1,2],"depths":[1,2],"splits":{{"count":2,"seed":1}},"time_limit":30}}"#,
            p(&data)
        ),
    )
    .unwrap();
    let res = dir.path().join("res.csv");
    let o = topk(&["bench", "accuracy", "--config", p(&cfg), "--out", p(&res)]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&res).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "dataset,k,depth,split,train_acc,test_acc,train_time_ms,status"
    );
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);

    let sc = dir.path().join("sc.csv");
    let o = topk(&[
        "bench",
        "scale-features",
        "--data",
        p(&data),
        "--ks",
        "1,2",
        "--depths",
        "2",
        "--counts",
        "2,4",
        "--out",
        p(&sc),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(&sc).unwrap().lines().count(), 5);

    let ss = dir.path().join("ss.csv");
    let o = topk(&[
        "bench",
        "scale-samples",
        "--data",
        p(&data),
        "--ks",
        "1",
        "--depths",
        "2",
        "--counts",
        "100,400",
        "--out",
        p(&ss),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(&ss).unwrap().lines().count(), 3);

    let kp = dir.path().join("kp.csv");
    let o = topk(&[
        "bench",
        "k-plateau",
        "--data",
        "builtin:tic-tac-toe",
        "--ks",
        "1,2,4",
        "--splits",
        "2",
        "--out",
        p(&kp),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(&kp).unwrap().lines().count(), 1 + 3 * 2);
}
