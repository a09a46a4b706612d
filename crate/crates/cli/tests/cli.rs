//! End-to-end runs of the `pide` and `pide-checker` binaries.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use pide_core::markup::{parse_xml, Markup, Tree};
use pide_core::service::ClientEvent;
use pide_core::session::{Session, SessionConfig, Transport};
use tempfile::TempDir;
use tungstenite::Message as Frame;

fn pide() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pide"));
    c.env_remove("PIDE_WORKERS");
    c
}

fn script(name: &str, body: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    (dir, path)
}

fn run(args: &[&str]) -> Output {
    pide().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CHAIN: &str = "insert 0 \"have \\\"a = b\\\"\\nalso\\nhave \\\"b = c\\\"\\nfinally\\n\"\nawait-quiescent\n";
const UNBOUND: &str = "insert 0 \"have \\\"x + y = 0\\\"\"\nawait-quiescent\n";

#[test]
fn empty_script_prints_nothing() {
    let (_d, path) = script("empty.pide", "");
    let o = run(&["replay", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn chain_dump_contains_the_derived_equation() {
    let (_d, path) = script("chain.pide", CHAIN);
    let o = run(&["replay", "--stable", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("<writeln>derived: a = c</writeln>"), "{out}");
}

#[test]
fn unbound_dump_has_the_printout_vocabulary() {
    let (_d, path) = script("unbound.pide", UNBOUND);
    let o = run(&["replay", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let at = out.find("<warning serial=\"").expect("a warning element");
    let warning = &out[at..];
    assert!(warning.contains("offset=\"7\" end_offset=\"11\""), "{warning}");
    assert!(warning.contains("<free>"), "{warning}");
    assert!(warning.contains("<entity ref=\""), "{warning}");
}

/// Converts an external parser's element into our tree type.
fn from_roxml(node: roxmltree::Node) -> Tree {
    if node.is_text() {
        return Tree::text(node.text().unwrap());
    }
    let mut m = Markup::new(node.tag_name().name());
    for a in node.attributes() {
        m.attrs.push((a.name().to_string(), a.value().to_string()));
    }
    Tree::Elem(m, node.children().map(from_roxml).collect())
}

#[test]
fn xml_dump_reads_back_through_an_independent_parser() {
    let (_d, path) = script("unbound.pide", &format!("{UNBOUND}insert 16 \"\\nprint 1 < 2\\nlet s = 1\\n\"\nawait-quiescent\n"));
    let out = stdout(&run(&["replay", path.to_str().unwrap()]));
    assert!(!out.is_empty());
    for line in out.lines() {
        let ours = parse_xml(line).unwrap();
        let doc = roxmltree::Document::parse(line).unwrap();
        assert_eq!(ours, vec![from_roxml(doc.root_element())], "{line}");
    }
}

#[test]
fn stable_dumps_are_reproducible() {
    let body = format!("{CHAIN}insert 0 \"let q = fib(12)\\nprint q + w\\n\"\ninsert 3 \"r\"\nawait-quiescent\n");
    let (_d, path) = script("det.pide", &body);
    let a = stdout(&run(&["replay", "--stable", "--workers", "3", path.to_str().unwrap()]));
    let b = stdout(&run(&["replay", "--stable", "--workers", "1", path.to_str().unwrap()]));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(!a.contains("serial="));
}

#[test]
fn yxml_dump_and_out_file() {
    let d = TempDir::new().unwrap();
    let (_s, path) = script("u.pide", UNBOUND);
    let out = d.path().join("dump.txt");
    let o = run(&["replay", "--dump", "yxml", "--out", out.to_str().unwrap(), path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("\\x05\\x06node\\x06name=main"), "{text}");
}

#[test]
fn layout_resolves_blocks_and_breaks() {
    let (_d, path) = script("u.pide", UNBOUND);
    let out = stdout(&run(&["replay", "--layout", "--margin", "40", path.to_str().unwrap()]));
    assert!(out.contains("<free>x</free>"));
    assert!(!out.contains("<break"), "{out}");
}

#[test]
fn script_errors_exit_2_with_the_line() {
    let (_d, path) = script("bad.pide", "insert 0 \"print 1\"\n# fine so far\nfrobnicate 3\n");
    let o = run(&["replay", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let (_d, path) = script("range.pide", "insert 0 \"ab\"\nremove 1 9\n");
    let o = run(&["replay", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert_eq!(run(&["replay"]).status.code(), Some(2));
    assert_eq!(run(&["replay", "/no/such/script"]).status.code(), Some(2));
    assert_eq!(run(&["replay", "--workers", "0", "x"]).status.code(), Some(2));
}

#[test]
fn a_broken_checker_exits_1() {
    let (_d, path) = script("u.pide", UNBOUND);
    let o = run(&["replay", "--checker", "/bin/false", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn snapshot_steps_print_query_hits() {
    let (_d, path) = script("s.pide", &format!("{UNBOUND}snapshot 6 7\n"));
    let out = stdout(&run(&["replay", "--stable", path.to_str().unwrap()]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("<string offset=\"6\" end_offset=\"16\"/>"));
    assert_eq!(lines.next(), Some("<free offset=\"7\" end_offset=\"7\"/>"));
    assert!(lines.next().unwrap().starts_with("<node name=\"main\">"));
}

#[test]
fn bench_reports_reuse() {
    let (_d, path) = script(
        "b.pide",
        "insert 0 \"let a = 1\\nprint a\\nprint a + 1\\n\"\nawait-quiescent\ninsert 16 \"a\"\nawait-quiescent\n",
    );
    let o = run(&["bench", "--workers", "2", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("version 2: reused 1 rerun 2"), "{out}");
    assert!(out.contains("speedup vs 1 worker:"), "{out}");
}

#[test]
fn workers_come_from_the_environment() {
    let (_d, path) = script("u.pide", UNBOUND);
    let o = pide()
        .env("PIDE_WORKERS", "3")
        .args(["bench", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(stdout(&o).starts_with("workers: 3\n"), "{}", stdout(&o));
}

#[test]
fn stray_checker_output_becomes_diagnostics() {
    let session = Session::start(SessionConfig {
        workers: 1,
        transport: Transport::Process {
            program: env!("CARGO_BIN_EXE_pide-checker").into(),
        },
    })
    .unwrap();
    session
        .edit_node("main", vec![pide_core::document::TextEdit::insert(0, "print 6 * 7")])
        .unwrap();
    assert!(session.await_quiescent(Duration::from_secs(30)));
    let snap = session.snapshot("main");
    let out: Vec<String> = snap.commands()[0].exec.unwrap().output().map(|m| m.text()).collect();
    assert_eq!(out, ["42"]);
    let deadline = Instant::now() + Duration::from_secs(5);
    while !session.diagnostics().iter().any(|d| d.starts_with("checker stdout: pide-checker")) {
        assert!(Instant::now() < deadline, "{:?}", session.diagnostics());
        std::thread::sleep(Duration::from_millis(5));
    }
    assert_eq!(session.protocol_errors(), 0);
    let started = Instant::now();
    session.shutdown().unwrap();
    assert!(started.elapsed() < Duration::from_secs(2));
}

#[test]
fn serve_shuts_down_with_its_checker() {
    let mut child = pide()
        .args(["serve", "--listen", "127.0.0.1:0", "--workers", "1"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut banner).unwrap();
    let url = banner.trim().strip_prefix("listening on ").unwrap().to_string();
    let (mut ws, _) = tungstenite::connect(&url).unwrap();
    let send = |ws: &mut tungstenite::WebSocket<_>, e: ClientEvent| {
        ws.send(Frame::Binary(e.encode().into())).unwrap();
    };
    send(&mut ws, ClientEvent::OpenNode { node: "main".into() });
    send(
        &mut ws,
        ClientEvent::Edit {
            node: "main".into(),
            edits: vec![pide_core::document::TextEdit::insert(0, "print fib(70)")],
        },
    );
    std::thread::sleep(Duration::from_millis(100));
    send(&mut ws, ClientEvent::Shutdown);
    let started = Instant::now();
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(started.elapsed() < Duration::from_secs(5), "pide serve did not exit");
        std::thread::sleep(Duration::from_millis(10));
    };
    assert!(status.success());
    assert!(started.elapsed() < Duration::from_secs(2), "{:?}", started.elapsed());
}
