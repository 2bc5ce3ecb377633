use std::path::{Path, PathBuf};
use std::process::Command;

fn moranlab(out: &Path, args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_moranlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (o.status.code().expect("exit code"), String::from_utf8(o.stdout).expect("utf-8 report"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("moranlab-it-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch("det");
    let args = ["profile", "--spec", "corpus:pab", "--depth", "10"];
    let (code, first) = moranlab(&dir, &args);
    assert_eq!(code, 0, "{first}");
    let files = snapshot(&dir);
    assert!(files.iter().any(|(n, _)| n == "profile_report.json"));
    assert!(files.iter().any(|(n, _)| n.ends_with(".csv")));
    let (_, second) = moranlab(&dir, &args);
    assert_eq!(first, second);
    assert_eq!(files, snapshot(&dir));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    assert_eq!(moranlab(&dir, &["validate", "--spec", "corpus:cantor"]).0, 0);
    assert_eq!(moranlab(&dir, &["no-such-command"]).0, 2);
    let (code, report) = moranlab(&dir, &["validate", "--spec", "/nonexistent/spec.toml"]);
    assert_eq!(code, 1);
    assert!(report.contains("\"status\": \"error\""));
    // binary into ternary needs log2/log3 <= log3/log3 at every scale, the reverse cannot embed
    let (code, _) = moranlab(&dir, &["criteria", "--embed", "--spec", "corpus:example2_ternary", "--spec", "corpus:example2_binary"]);
    assert_eq!(code, 3);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn spec_files_in_the_repo_validate() {
    let dir = scratch("files");
    let specs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let mut seen = 0;
    for e in std::fs::read_dir(&specs).unwrap() {
        let path = e.unwrap().path();
        let (code, report) = moranlab(&dir, &["validate", "--spec", path.to_str().unwrap()]);
        assert_eq!(code, 0, "{}: {report}", path.display());
        seen += 1;
    }
    assert!(seen >= 10);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn reproduce_writes_tables() {
    let dir = scratch("repro");
    let (code, report) = moranlab(&dir, &["reproduce", "pab"]);
    assert_eq!(code, 0, "{report}");
    let names: Vec<String> = snapshot(&dir).into_iter().map(|(n, _)| n).collect();
    assert!(names.iter().any(|n| n == "reproduce_PAB_report.json"), "{names:?}");
    assert!(names.iter().any(|n| n.starts_with("reproduce_PAB_") && n.ends_with(".csv")), "{names:?}");
    let _ = std::fs::remove_dir_all(&dir);
}
