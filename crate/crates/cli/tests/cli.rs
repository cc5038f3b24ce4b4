use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_takeover-sim"));
    c.env("TAKEOVER_SIM_DATA", data());
    c
}

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn ok(c: &mut Command) -> String {
    let out = c.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let help = ok(bin().arg("--help"));
    for sub in ["run", "serve", "analyze", "gen-trace"] {
        assert!(help.contains(sub), "{sub}");
    }
    let run = ok(bin().args(["run", "--help"]));
    for flag in ["--config", "--seed", "--out", "--threads"] {
        assert!(run.contains(flag), "{flag}");
    }
    let serve = ok(bin().args(["serve", "--help"]));
    for flag in ["--port", "--scenario", "--strategy", "--alpha"] {
        assert!(serve.contains(flag), "{flag}");
    }
}

#[test]
fn bundled_traces_match_a_fresh_recording() {
    let dir = tempfile::tempdir().unwrap();
    for route in ["route-a", "route-b"] {
        ok(bin().args(["gen-trace", "--route", route, "--out"]).arg(dir.path()));
    }
    for e in std::fs::read_dir(data().join("traces")).unwrap() {
        let p = e.unwrap().path();
        let fresh = std::fs::read(dir.path().join(p.file_name().unwrap())).unwrap();
        assert!(std::fs::read(&p).unwrap() == fresh, "{} is stale", p.display());
    }
}

#[test]
fn run_then_analyze_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "routes = [\"route-b\"]\nstrategies = [\"SHARED\"]\ndisengagements = [\"URGENT\"]\nrepetitions = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(bin().args(["run", "--threads", "2", "--seed", "5", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(std::fs::read_dir(out.join("logs")).unwrap().count(), 12);

    let again = dir.path().join("again");
    ok(bin().args(["analyze", "--theta", "3", "--logs"]).arg(&out).arg("--out").arg(&again));
    assert_eq!(std::fs::read(out.join("summary.json")).unwrap(), std::fs::read(again.join("summary.json")).unwrap());

    let bad = bin().args(["run", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn serve_accepts_a_session_and_saves_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["serve", "--port", "0", "--scenario", "route-a", "--strategy", "MANUAL", "--alpha", "0.5"])
        .args(["--disengagement", "URGENT", "--speedup", "0", "--sessions", "1", "--out"])
        .arg(dir.path())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first.strip_prefix("listening on ").expect(&first).to_string();

    let stream = TcpStream::connect(&addr).unwrap();
    let mut w = stream.try_clone().unwrap();
    let mut r = BufReader::new(stream);
    let mut line = String::new();
    r.read_line(&mut line).unwrap();
    let hello: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["strategy"], "MANUAL");
    assert_eq!(hello["ticks"], 4800);
    w.write_all(b"{\"type\":\"ready\"}\n").unwrap();
    let mut states = 0;
    loop {
        line.clear();
        if r.read_line(&mut line).unwrap() == 0 {
            break;
        }
        let m: serde_json::Value = serde_json::from_str(&line).unwrap();
        match m["type"].as_str().unwrap() {
            "state" => states += 1,
            "tlx_request" => w
                .write_all(b"{\"type\":\"tlx\",\"mental\":50,\"physical\":50,\"temporal\":50,\"performance\":50,\"effort\":50,\"frustration\":50}\n")
                .unwrap(),
            "saved" => break,
            _ => {}
        }
    }
    assert!(states > 0);
    assert!(child.wait().unwrap().success());
    let rest: Vec<String> = lines.map(|l| l.unwrap()).collect();
    assert!(rest.iter().any(|l| l.contains("saved")), "{rest:?}");
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with(".jsonl")));
    assert!(names.iter().any(|n| n.ends_with(".tlx.json")));
}
