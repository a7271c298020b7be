use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_roughmax")).args(args).arg("--out").arg(dir).output().unwrap()
}

#[test]
fn runs_are_deterministic() {
    for cmd in ["maximal", "sparse", "sharpness"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ra, rb) = (run(a.path(), &[cmd, "--seed", "3"]), run(b.path(), &[cmd, "--seed", "3"]));
        assert!(ra.status.success(), "{cmd}: {}", String::from_utf8_lossy(&ra.stderr));
        assert_eq!(ra.stdout, rb.stdout);
        for ext in ["csv", "json"] {
            let name = format!("{cmd}.{ext}");
            assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
        }
    }
}

#[test]
fn seed_enters_the_hash() {
    let d = tempfile::tempdir().unwrap();
    let hash = |seed: &str| {
        let out = run(d.path(), &["maximal", "--seed", seed]);
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("1"), hash("2"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, r#"{"grid":{"n":1,"level":2},"profile":{"alpha":5,"p":[2]},
        "functions":[{"kind":"constant","value":1}]}"#).unwrap();
    let out = run(d.path(), &["maximal", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let garbled = d.path().join("garbled.json");
    std::fs::write(&garbled, "{").unwrap();
    assert_eq!(run(d.path(), &["maximal", "--config", garbled.to_str().unwrap()]).status.code(), Some(2));
    let missing = d.path().join("missing.json");
    assert_eq!(run(d.path(), &["maximal", "--config", missing.to_str().unwrap()]).status.code(), Some(5));
    let big = d.path().join("big.json");
    std::fs::write(&big, r#"{"grid":{"n":1,"level":8},"profile":{"alpha":0,"p":[1]},"family":{"kind":"all-cubes"},
        "functions":[{"kind":"constant","value":1}]}"#).unwrap();
    let out = run(d.path(), &["maximal", "--config", big.to_str().unwrap(), "--budget", "10"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
