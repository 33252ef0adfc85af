use std::path::Path;
use std::process::{Command, Output};

fn platewise(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platewise"))
        .current_dir(dir)
        .env_remove("PLATEWISE_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path) {
    let o = platewise(dir, &["synth", "data", "--meals-per-type", "240"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_artifact_names_file_and_producer() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    for stage in ["ingest", "prototype", "cluster-profile"] {
        let o = platewise(tmp.path(), &["-c", "data/platewise.toml", stage]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let o = platewise(tmp.path(), &["-c", "data/platewise.toml", "generate"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("sampler.json") && err.contains("fit-sampler"), "{err}");
}

#[test]
fn generate_requires_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let cfg = tmp.path().join("data/platewise.toml");
    let text = std::fs::read_to_string(&cfg).unwrap();
    let unseeded: String = text.lines().filter(|l| !l.starts_with("seed =")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&cfg, unseeded).unwrap();
    let o = platewise(tmp.path(), &["-c", "data/platewise.toml", "generate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "seed = 1\n[paths]\nfoodz = \"x.csv\"\n").unwrap();
    let o = platewise(tmp.path(), &["-c", "bad.toml", "ingest"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("foodz"), "{}", stderr(&o));
}

#[test]
fn missing_input_file_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("p.toml"), "seed = 1\n[paths]\nfoods = \"nope.csv\"\nmeals = \"nope.csv\"\n").unwrap();
    let o = platewise(tmp.path(), &["-c", "p.toml", "-o", "out", "ingest"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
