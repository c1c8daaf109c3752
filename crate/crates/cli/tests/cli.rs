use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use fibersurf::export::parse_surface_sidecar;
use fibersurf::{compute_jacobi_set, load_dataset, synth, RangePoint};

fn fibersurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibersurf")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth_file(dir: &Path, kind: &str, n: usize) -> PathBuf {
    let path = dir.join(format!("{kind}-{n}.txt"));
    let o = fibersurf(&["synth", "--kind", kind, "--n", &n.to_string(), "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    path
}

#[test]
fn synth_writes_loadable_grids() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth_file(dir.path(), "height-distance", 2);
    let (mesh, field) = load_dataset(&path).unwrap();
    assert_eq!(mesh.n_vertices(), 8);
    assert_eq!(field.value(7), RangePoint::new(1.0, 3f64.sqrt()));

    let path = synth_file(dir.path(), "height-distance", 5);
    let (_, loaded) = load_dataset(&path).unwrap();
    let (_, direct) = synth::height_distance_dataset(5).unwrap();
    assert_eq!(loaded.values(), direct.values());

    let out = dir.path().join("x.txt");
    assert_eq!(fibersurf(&["synth", "--n", "1", "--out", out.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(fibersurf(&["synth", "--kind", "bogus", "--n", "3", "--out", "x"]).status.code(), Some(3));
}

#[test]
fn jacobi_counts_and_listing() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth_file(dir.path(), "height-distance", 8);
    let listing = dir.path().join("jacobi.txt");
    let o = fibersurf(&["jacobi", "--dataset", path.to_str().unwrap(), "--out", listing.to_str().unwrap()]);
    assert!(o.status.success());
    let (mesh, field) = synth::height_distance_dataset(8).unwrap();
    let jset = compute_jacobi_set(&mesh, &field);
    assert_eq!(stdout(&o).trim(), format!("{} extremum, {} saddle", jset.n_extremum(), jset.n_saddle()));
    let text = std::fs::read_to_string(listing).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), jset.len());

    // The linear field's Jacobi edges all lie on the domain boundary.
    let path = synth_file(dir.path(), "linear", 5);
    let listing = dir.path().join("linear.txt");
    let o = fibersurf(&["jacobi", "--dataset", path.to_str().unwrap(), "--out", listing.to_str().unwrap()]);
    assert!(o.status.success());
    let (mesh, _) = load_dataset(&path).unwrap();
    for line in std::fs::read_to_string(listing).unwrap().lines().filter(|l| !l.starts_with('#')) {
        let id: u32 = line.split(' ').next().unwrap().parse().unwrap();
        assert!(mesh.edge_link(id).is_boundary_edge);
    }

    assert_eq!(fibersurf(&["jacobi", "--dataset", "/nonexistent/file.txt"]).status.code(), Some(2));
    assert_eq!(fibersurf(&["jacobi"]).status.code(), Some(3));
}

#[test]
fn extract_writes_obj_sidecar_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "height-distance", 10);
    let obj = dir.path().join("s.obj");
    let trace = dir.path().join("trace.json");
    let o = fibersurf(&[
        "extract", "--dataset", data.to_str().unwrap(),
        "--polygon=-0.3,0.5 0.3,0.5 0.3,0.8", "--closed",
        "--out", obj.to_str().unwrap(), "--trace-out", trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&obj).unwrap();
    let n_v = text.lines().filter(|l| l.starts_with("v ")).count();
    let n_f = text.lines().filter(|l| l.starts_with("f ")).count();
    assert!(n_f > 0 && text.contains("o component_0"));
    let (t, source) = parse_surface_sidecar(&std::fs::read(obj.with_extension("fsmb")).unwrap()).unwrap();
    assert_eq!((t.len(), source.len()), (n_v, n_f));
    assert!(t.iter().all(|t| (0.0..=1.0).contains(t)));

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    let edges = report["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 3);
    for key in ["jacobi_intersections_ms", "directed_search_ms", "restricted_bfs_ms", "n_jacobi_intersections", "n_tets_fs"] {
        assert!(edges.iter().all(|e| e.get(key).is_some()), "missing {key}");
    }

    // Repeated runs give identical bytes.
    let again = dir.path().join("again.obj");
    let o = fibersurf(&["extract", "--dataset", data.to_str().unwrap(), "--polygon", "-0.3,0.5 0.3,0.5 0.3,0.8", "--closed", "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&obj).unwrap(), std::fs::read(&again).unwrap());

    // Out of range: empty surface, still success.
    let empty = dir.path().join("empty.obj");
    let o = fibersurf(&["extract", "--dataset", data.to_str().unwrap(), "--polygon", "5,5 6,6", "--out", empty.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(!std::fs::read_to_string(&empty).unwrap().lines().any(|l| l.starts_with("f ")));
}

#[test]
fn extract_single_component() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "height-distance", 10);
    let (mesh, field) = load_dataset(&data).unwrap();
    let jset = compute_jacobi_set(&mesh, &field);
    let e = fibersurf::ControlEdge::new(RangePoint::new(-0.1, 0.45), RangePoint::new(-0.1, 0.55)).unwrap();
    let hit = fibersurf::jacobi_intersections(&jset, &e)[0].jacobi_edge_id;

    let full = dir.path().join("full.obj");
    let part = dir.path().join("part.obj");
    let polygon = "-0.1,0.45 -0.1,0.55";
    let d = data.to_str().unwrap();
    assert!(fibersurf(&["extract", "--dataset", d, &format!("--polygon={polygon}"), "--out", full.to_str().unwrap()]).status.success());
    let o = fibersurf(&["extract", "--dataset", d, &format!("--polygon={polygon}"), "--jacobi-edge", &hit.to_string(), "--out", part.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let faces = |p: &Path| std::fs::read_to_string(p).unwrap().lines().filter(|l| l.starts_with("f ")).count();
    assert!(faces(&part) > 0 && faces(&part) <= faces(&full));
    let groups = std::fs::read_to_string(&part).unwrap().lines().filter(|l| l.starts_with("o ")).count();
    assert_eq!(groups, 1);

    // Not a hit, or a multi-edge polygon, is an argument error.
    let miss = jset.edges().iter().map(|je| je.edge_id).find(|id| fibersurf::jacobi_intersections(&jset, &e).iter().all(|h| h.jacobi_edge_id != *id)).unwrap();
    let o = fibersurf(&["extract", "--dataset", d, &format!("--polygon={polygon}"), "--jacobi-edge", &miss.to_string(), "--out", part.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = fibersurf(&["extract", "--dataset", d, "--polygon", "0,0.5 0.1,0.5 0.2,0.6", "--jacobi-edge", "1", "--out", part.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn polygon_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "height-distance", 4);
    let d = data.to_str().unwrap();
    let out = dir.path().join("o.obj");
    let o_ = out.to_str().unwrap();
    for polygon in ["0,0", "0,0 0,0", "0,0 1", "a,b c,d"] {
        assert_eq!(fibersurf(&["extract", "--dataset", d, &format!("--polygon={polygon}"), "--out", o_]).status.code(), Some(3), "{polygon}");
    }
    assert_eq!(fibersurf(&["extract", "--dataset", d, "--out", o_]).status.code(), Some(3));
    let missing = dir.path().join("none.txt");
    assert_eq!(fibersurf(&["extract", "--dataset", d, "--polygon-file", missing.to_str().unwrap(), "--out", o_]).status.code(), Some(2));

    let file = dir.path().join("poly.txt");
    std::fs::write(&file, "# control polygon\n-0.5 0.6\n0.5, 0.6\n").unwrap();
    assert!(fibersurf(&["extract", "--dataset", d, "--polygon-file", file.to_str().unwrap(), "--out", o_]).status.success());
}

#[test]
fn validate_matches_and_reports_injected_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "height-distance", 10);
    let d = data.to_str().unwrap();
    let o = fibersurf(&["validate", "--dataset", d, "--random-edges", "20", "--seed", "3", "--threads", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("20 of 20 control edges match"));

    let o = fibersurf(&["validate", "--dataset", d, "--polygon", "5,5 6,6"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("search 0 tets / 0 components = oracle 0 tets / 0 components"));

    let o = fibersurf(&["validate", "--dataset", d, "--polygon=-0.1,0.45 -0.1,0.55", "--inject-mismatch"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("MISMATCH"));

    let random = synth_file(dir.path(), "random", 8);
    let o = fibersurf(&["validate", "--dataset", random.to_str().unwrap(), "--random-edges", "10", "--seed", "9"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn density_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "height-distance", 8);
    let out = dir.path().join("d.pgm");
    let run = || fibersurf(&["density", "--dataset", data.to_str().unwrap(), "--width", "64", "--height", "32", "--seed", "5", "--out", out.to_str().unwrap()]);
    let o = run();
    assert!(o.status.success());
    let mass: f64 = stdout(&o).split(',').next().unwrap().trim_start_matches("mass ").parse().unwrap();
    assert!((mass - 8.0).abs() < 0.08);
    let first = std::fs::read(&out).unwrap();
    assert!(first.starts_with(b"P5\n# range_rect -1 1 0.24"));
    assert!(first.len() > 64 * 32 * 2);
    assert!(run().status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
    assert_eq!(fibersurf(&["density", "--dataset", data.to_str().unwrap(), "--width", "0", "--out", "x"]).status.code(), Some(3));
}

fn http(port: u16, request: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(30))).ok()?;
    stream.write_all(request.as_bytes()).ok()?;
    let mut reply = String::new();
    stream.read_to_string(&mut reply).ok()?;
    Some(reply)
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    synth_file(dir.path(), "height-distance", 6);
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_fibersurf"))
        .args(["serve", "--port", &port.to_string(), "--datasets-dir", dir.path().to_str().unwrap()])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    let body = r#"{"path":"height-distance-6.txt"}"#;
    let request = format!(
        "POST /sessions HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let deadline = Instant::now() + Duration::from_secs(30);
    let reply = loop {
        if let Some(r) = http(port, &request) {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not come up");
        std::thread::sleep(Duration::from_millis(100));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"n_tets\":750"));

    let missing = dir.path().join("absent");
    let o = fibersurf(&["serve", "--port", "0", "--datasets-dir", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
