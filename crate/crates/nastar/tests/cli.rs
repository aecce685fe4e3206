use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nastar::formats::{decode_pnm, read_weights};
use nastar::render::{ENDPOINT, EXPLORED, FREE, OBSTACLE, PATH};
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn nastar(args: &[&str]) -> Out {
    let o = Command::new(env!("CARGO_BIN_EXE_nastar")).args(args).output().expect("binary runs");
    Out {
        code: o.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> Out {
    let o = nastar(args);
    assert_eq!(o.code, 0, "nastar {args:?}\nstdout:\n{}\nstderr:\n{}", o.stdout, o.stderr);
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "gen",
        "--out",
        s(dir),
        "--size",
        "16",
        "16",
        "--n-train",
        "6",
        "--n-val",
        "2",
        "--n-test",
        "2",
        "--seed",
        "3",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

fn train_small(data: &Path, ckpt: &Path, extra: &[&str]) -> Out {
    let mut args = vec![
        "train",
        "--data",
        s(data),
        "--out",
        s(ckpt),
        "--epochs",
        "2",
        "--batch",
        "3",
        "--base-channels",
        "4",
        "--depth",
        "1",
    ];
    args.extend_from_slice(extra);
    nastar(&args)
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn help_documents_every_subcommand() {
    let o = ok(&["--help"]);
    for sub in ["gen", "train", "eval", "plan", "bench"] {
        assert!(o.stdout.contains(sub), "{sub} missing from help");
    }
    let o = ok(&["train", "--help"]);
    for flag in ["--data", "--out", "--epochs", "--batch", "--lr", "--variant", "--seed", "--resume"] {
        assert!(o.stdout.contains(flag), "{flag} missing from train help");
    }
}

#[test]
fn gen_smoke_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut args = vec!["gen", "--out", s(&a), "--size", "16", "16", "--n-train", "6", "--n-val", "2", "--n-test", "2"];
    let o = ok(&args);
    assert!(o.stdout.contains("train maps     6"), "{}", o.stdout);
    args[2] = s(&b);
    ok(&args);
    let fa = files_under(&a);
    assert_eq!(fa.len(), 10 + 2);
    assert_eq!(fa, files_under(&b));
    assert!(fa.iter().all(|(p, _)| p.extension().is_some_and(|e| e != "ppm")));
}

#[test]
fn gen_image_mode_emits_ppm() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("img");
    gen_small(&d, &["--image-mode"]);
    let maps: Vec<_> = fs::read_dir(d.join("maps")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(maps.len(), 10);
    for m in maps {
        assert_eq!(m.extension().unwrap(), "ppm");
        assert_eq!(decode_pnm(&fs::read(&m).unwrap(), &m).unwrap().magic, 6);
    }
}

#[test]
fn gen_rejects_bad_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("x");
    assert_eq!(nastar(&["gen", "--out", s(&d), "--size", "0", "16"]).code, 2);
    assert_eq!(nastar(&["gen", "--out", s(&d), "--bogus"]).code, 2);
    assert_eq!(nastar(&["gen", "--out", s(&d), "--style", "maze", "--image-mode"]).code, 2);
}

#[test]
fn config_file_supplies_defaults_under_explicit_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("gen.json");
    fs::write(&cfg, r#"{"size": [16, 16], "n_train": 3, "n_val": 1, "n_test": 1, "seed": 4}"#).unwrap();
    let d = tmp.path().join("d");
    let o = ok(&["--config", s(&cfg), "gen", "--out", s(&d), "--n-train", "2"]);
    assert!(o.stdout.contains("train maps     2"), "{}", o.stdout);
    assert!(o.stdout.contains("val   maps     1"), "{}", o.stdout);

    fs::write(&cfg, r#"{"no_such_flag": 1}"#).unwrap();
    assert_eq!(nastar(&["--config", s(&cfg), "gen", "--out", s(&d)]).code, 2);
    assert_eq!(nastar(&["--config", s(&tmp.path().join("missing.json")), "gen", "--out", s(&d)]).code, 2);
}

#[test]
fn train_smoke_resume_and_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen_small(&data, &[]);
    let ckpt = tmp.path().join("m.nasw");
    let o = train_small(&data, &ckpt, &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("best val hmean"));
    let log = fs::read_to_string(tmp.path().join("m.nasw.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2);
    let (header, _) = read_weights(&tmp.path().join("m.nasw.last")).unwrap();
    assert_eq!(header.epoch, Some(2));
    assert!(json(&tmp.path().join("m.nasw.json"))["optimizer"]["decay"].as_f64() == Some(0.99));

    let resumed = tmp.path().join("r.nasw");
    let last = tmp.path().join("m.nasw.last");
    let o = train_small(&data, &resumed, &["--epochs", "1", "--resume", s(&last)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let (header, _) = read_weights(&tmp.path().join("r.nasw.last")).unwrap();
    assert_eq!(header.epoch, Some(3));

    let o = train_small(&data, &resumed, &["--base-channels", "8", "--resume", s(&last)]);
    assert_eq!(o.code, 5, "{}", o.stderr);
    let o = train_small(&data, &resumed, &["--variant", "bf", "--resume", s(&last)]);
    assert_eq!(o.code, 5, "{}", o.stderr);
}

#[test]
fn train_fails_with_instance_id_on_bad_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen_small(&data, &[]);
    // Drop the expert path of the first training instance.
    let path = data.join("instances.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let first = lines.iter_mut().find(|l| l["split"] == "train").unwrap();
    first["gt_path"] = Value::Array(vec![]);
    let id = first["id"].as_u64().unwrap();
    fs::write(&path, lines.iter().map(|l| l.to_string() + "\n").collect::<String>()).unwrap();
    let o = train_small(&data, &tmp.path().join("m.nasw"), &["--batch", "1"]);
    assert_eq!(o.code, 4, "{}", o.stderr);
    assert!(o.stderr.contains(&format!("instance id {id}")), "{}", o.stderr);
}

#[test]
fn eval_classical_self_consistency_and_neural_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen_small(&data, &[]);
    let o = ok(&["eval", "--data", s(&data), "--planner", "dijkstra"]);
    assert!(o.stdout.contains("Opt"));
    let r = json(&data.join("results-dijkstra-test.results.json"));
    assert_eq!(r["opt"]["mean"].as_f64(), Some(100.0));
    let csv = fs::read_to_string(data.join("results-dijkstra-test.maps.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("map_id,opt,exp,hmean"));
    assert_eq!(csv.lines().count(), 1 + 2);

    let prefix = tmp.path().join("astar");
    ok(&["eval", "--data", s(&data), "--planner", "astar", "--out", s(&prefix)]);
    let r = json(&tmp.path().join("astar.results.json"));
    assert_eq!(r["exp"]["mean"].as_f64(), Some(0.0));
    assert!(r["meta"]["chamfer"].as_str().unwrap().contains("symmetric"));

    assert_eq!(nastar(&["eval", "--data", s(&data), "--planner", "neural-astar"]).code, 2);
    assert_eq!(nastar(&["eval", "--data", s(&tmp.path().join("nope")), "--planner", "astar"]).code, 2);
    let ckpt = tmp.path().join("m.nasw");
    assert_eq!(train_small(&data, &ckpt, &["--epochs", "1"]).code, 0);
    ok(&["eval", "--data", s(&data), "--planner", "neural-astar", "--ckpt", s(&ckpt)]);
    assert_eq!(nastar(&["eval", "--data", s(&data), "--planner", "neural-bf", "--ckpt", s(&ckpt)]).code, 5);

    let img = tmp.path().join("img");
    gen_small(&img, &["--image-mode"]);
    assert_eq!(nastar(&["eval", "--data", s(&img), "--planner", "neural-astar", "--ckpt", s(&ckpt)]).code, 5);
    assert_eq!(nastar(&["eval", "--data", s(&img), "--planner", "astar"]).code, 5);
}

fn pixels(path: &Path) -> Vec<[u8; 3]> {
    let p = decode_pnm(&fs::read(path).unwrap(), path).unwrap();
    assert_eq!(p.magic, 6);
    p.data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn write_pgm(path: &Path, rows: &[&str]) {
    let (h, w) = (rows.len(), rows[0].len());
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for r in rows {
        bytes.extend(r.bytes().map(|b| if b == b'#' { 0 } else { 255 }));
    }
    fs::write(path, bytes).unwrap();
}

#[test]
fn plan_corridor_render() {
    let tmp = tempfile::tempdir().unwrap();
    let map = tmp.path().join("c.pgm");
    write_pgm(&map, &["#######", "#.....#", "#######"]);
    let prefix = tmp.path().join("c");
    ok(&["plan", "--map", s(&map), "--start", "1,1", "--goal", "1,5", "--out", s(&prefix)]);
    let px = pixels(&tmp.path().join("c.search.ppm"));
    assert_eq!(px.iter().filter(|&&p| p == PATH).count(), 3);
    assert_eq!(px.iter().filter(|&&p| p == ENDPOINT).count(), 2);
    assert!(px.iter().all(|p| [OBSTACLE, FREE, EXPLORED, PATH, ENDPOINT].contains(p)));
    assert_eq!(px[7 + 1], ENDPOINT);
    assert_eq!(px[0], OBSTACLE);
    assert!(!tmp.path().join("c.guidance.ppm").exists());
    let path = json(&tmp.path().join("c.path.json"));
    let coords: Vec<Vec<u64>> = serde_json::from_value(path["path"].clone()).unwrap();
    assert_eq!(coords, (1..=5).map(|c| vec![1, c]).collect::<Vec<_>>());
}

#[test]
fn plan_unreachable_and_bad_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let map = tmp.path().join("u.pgm");
    write_pgm(&map, &["..#..", "..#..", "..#.."]);
    let prefix = tmp.path().join("u");
    assert_eq!(nastar(&["plan", "--map", s(&map), "--start", "0,0", "--goal", "2,4", "--out", s(&prefix)]).code, 6);
    assert_eq!(nastar(&["plan", "--map", s(&map), "--start", "0,2", "--goal", "2,4", "--out", s(&prefix)]).code, 2);
    assert_eq!(nastar(&["plan", "--map", s(&map), "--start", "0;0", "--goal", "2,4", "--out", s(&prefix)]).code, 2);
    let missing = tmp.path().join("missing.pgm");
    assert_eq!(nastar(&["plan", "--map", s(&missing), "--start", "0,0", "--goal", "2,1", "--out", s(&prefix)]).code, 2);
}

#[test]
fn plan_with_checkpoint_writes_guidance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen_small(&data, &[]);
    let ckpt = tmp.path().join("m.nasw");
    assert_eq!(train_small(&data, &ckpt, &["--epochs", "1"]).code, 0);
    let map = data.join("maps/000000.pgm");
    let line: Value =
        serde_json::from_str(fs::read_to_string(data.join("instances.jsonl")).unwrap().lines().next().unwrap())
            .unwrap();
    let rc = |k: &str| format!("{},{}", line[k][0], line[k][1]);
    let prefix = tmp.path().join("p");
    let o = ok(&[
        "plan",
        "--map",
        s(&map),
        "--start",
        &rc("start"),
        "--goal",
        &rc("goal"),
        "--ckpt",
        s(&ckpt),
        "--out",
        s(&prefix),
    ]);
    assert!(o.stdout.contains("neural-astar"));
    let g = pixels(&tmp.path().join("p.guidance.ppm"));
    assert_eq!(g.len(), 256);
    assert!(g.iter().all(|p| p[0] == p[1] && p[1] == p[2]));
}

#[test]
fn plan_on_image_map() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("img");
    gen_small(&data, &["--image-mode"]);
    let prefix = tmp.path().join("i");
    ok(&["plan", "--map", s(&data.join("maps/000000.ppm")), "--start", "0,0", "--goal", "15,15", "--out", s(&prefix)]);
    assert_eq!(pixels(&tmp.path().join("i.search.ppm")).len(), 256);
}

#[test]
fn bench_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen_small(&data, &[]);
    let o = ok(&["bench", "--data", s(&data), "--planner", "astar", "--repeat", "1"]);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], nastar::bench::CSV_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("astar,16,16,"), "{}", lines[1]);
    assert_eq!(nastar(&["bench", "--data", s(&data), "--planner", "astar", "--repeat", "0"]).code, 2);
}
