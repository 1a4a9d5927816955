use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use nullspace::dense::DenseBlock;
use nullspace::fixtures::{dense_spsd, diagonal_test_matrix, planted_nullity, random_graph};
use nullspace::graph::Graph;
use nullspace::mmio::{read_dense_array_file, read_matrix_market_file, write_matrix_market_file};
use nullspace::rng::{gaussian_vec, stream, uniform_vec, Stream};
use nullspace::solver::HISTORY_COLUMNS;
use nullspace::SparseMatrix;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nullspace"));
    cmd.args(args).env_remove("NULLSPACE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of the first `key: value` line.
fn field(text: &str, key: &str) -> String {
    let prefix = format!("{key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no '{key}' in:\n{text}"))
        .to_string()
}

fn put(dir: &TempDir, name: &str, a: &SparseMatrix) -> PathBuf {
    let p = dir.path().join(name);
    write_matrix_market_file(a, &p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn svd_nullity(a: &SparseMatrix) -> usize {
    let d = a.to_dense();
    let sv = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)]).singular_values();
    let smax = sv.max();
    d.ncols() - sv.iter().filter(|&&x| x > 1e-8 * smax).count()
}

#[test]
fn diagonal_matrix_has_nullity_21() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "diag.mtx", &diagonal_test_matrix());
    let o = run(&["solve", s(&p), "--epsilon", "1e-3", "--block", "1", "--dimk", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("nullity: 21"));
    for key in ["# input", "# command", "# config", "# timings_ms", "# matvecs", "# outcome"] {
        assert!(stdout(&o).contains(key), "missing {key}");
    }
}

#[test]
fn empty_file_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("empty.mtx");
    fs::write(&p, "").unwrap();
    let o = run(&["solve", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));
}

#[test]
fn planted_fixture_matches_svd_nullity() {
    let dir = TempDir::new().unwrap();
    for seed in 0..3u64 {
        let a = planted_nullity(150, 100, 2 + 3 * seed as usize, seed);
        let p = put(&dir, "planted.mtx", &a);
        let o = run(&["solve", s(&p), "--epsilon", "1e-4", "--block", "2", "--dimk", "48", "--seed", &seed.to_string()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(field(&stdout(&o), "nullity"), svd_nullity(&a).to_string());
        assert!(stdout(&o).contains("mode=gram"));
    }
}

#[test]
fn basis_and_history_are_written() {
    let dir = TempDir::new().unwrap();
    let a = planted_nullity(80, 60, 4, 9);
    let p = put(&dir, "a.mtx", &a);
    let (basis, hist) = (dir.path().join("v.mtx"), dir.path().join("h.csv"));
    let o = run(&[
        "solve", s(&p), "--epsilon", "1e-4", "--block", "2", "--dimk", "32", "--basis-out", s(&basis), "--history-out", s(&hist),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: DenseBlock = read_dense_array_file(&basis).unwrap();
    assert_eq!(v.shape(), (60, 4));
    assert!(v.orthonormality_error() < 1e-10);
    assert!(a.spmv_block(&v).unwrap().frobenius() < 1e-3);
    let text = fs::read_to_string(&hist).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), HISTORY_COLUMNS.join(","));
    let rows: Vec<&str> = lines.collect();
    // One row per cycle; the last cycle ends without a restart.
    let restarts: usize = field(&stdout(&o), "restarts").parse().unwrap();
    assert_eq!(rows.len(), restarts + 1);
    assert!(rows.iter().all(|r| r.split(',').count() == HISTORY_COLUMNS.len()));
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "a.mtx", &planted_nullity(120, 90, 5, 4));
    let first = run(&["solve", s(&p), "--deterministic", "--seed", "17", "--epsilon", "1e-4", "--dimk", "40"]);
    assert_eq!(first.status.code(), Some(0));
    let out = stdout(&first);
    let config = field(&out, "# config");
    let get = |k: &str| {
        config
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(&format!("{k}=")))
            .unwrap()
            .to_string()
    };
    let mut args: Vec<String> = vec!["solve".into(), s(&p).into(), "--deterministic".into()];
    for k in ["epsilon", "block", "dimk", "tol", "seed", "mode", "precond", "max_restarts"] {
        args.push(format!("--{}", k.replace('_', "-")));
        args.push(get(k));
    }
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let second = run(&argv);
    let again = stdout(&second);
    for key in ["nullity", "matvecs", "restarts", "residual_av"] {
        assert_eq!(field(&out, key), field(&again, key), "{key}");
    }
    assert_eq!(field(&out, "# config"), field(&again, "# config"));
}

#[test]
fn sequential_kernels_give_the_same_answer() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "a.mtx", &planted_nullity(100, 70, 3, 2));
    let args = ["solve", s(&p), "--epsilon", "1e-4", "--dimk", "32"];
    let a = run(&args);
    let b = run_env(&args, &[("NULLSPACE_THREADS", "0")]);
    let c = run_env(&args, &[("NULLSPACE_THREADS", "nope")]);
    for key in ["nullity", "matvecs", "residual_av"] {
        assert_eq!(field(&stdout(&a), key), field(&stdout(&b), key));
    }
    assert_eq!(c.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_3_with_a_summary() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "diag.mtx", &diagonal_test_matrix());
    let o = run(&["solve", s(&p), "--block", "1", "--dimk", "32", "--max-restarts", "1", "--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("converged: false"));
    assert!(stdout(&o).contains("nullity: "));
}

#[test]
fn shape_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "rect.mtx", &planted_nullity(30, 20, 2, 1));
    let o = run(&["solve", s(&p), "--mode", "spsd"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_1() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "diag.mtx", &diagonal_test_matrix());
    for args in [
        vec!["frobnicate"],
        vec!["analyze", "sideways", s(&p)],
        vec!["solve", s(&p), "--mode", "sideways"],
        vec!["solve", s(&p), "--epsilon", "-1"],
        vec!["solve", s(&p), "--block", "0"],
        vec!["solve", s(&p), "--mode", "spsd", "--precond", "inner"],
        vec!["solve", "/nonexistent/file.mtx"],
        vec![],
    ] {
        assert_eq!(run(&args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn triangle_laplacian() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("tri.txt");
    fs::write(&edges, "# a triangle\n10 20\n20 30\n30 10\n10 10\n20 10\n").unwrap();
    let out = dir.path().join("L.mtx");
    let o = run(&["laplacian", s(&edges), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "components"), "1");
    let l = read_matrix_market_file(&out).unwrap().to_dense();
    assert_eq!(l.shape(), (3, 3));
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
        }
    }
    let map = fs::read_to_string(dir.path().join("L.mtx.nodes.csv")).unwrap();
    assert_eq!(map, "row,node_id\n1,10\n2,20\n3,30\n");
}

#[test]
fn two_triangles_have_nullity_two() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("two.txt");
    fs::write(&edges, "1 2\n2 3\n3 1\n4 5\n5 6\n6 4\n").unwrap();
    let (out, map) = (dir.path().join("L.mtx"), dir.path().join("map.csv"));
    let o = run(&["laplacian", s(&edges), "--out", s(&out), "--map-out", s(&map)]);
    assert_eq!(field(&stdout(&o), "components"), "2");
    assert!(map.exists());
    let o = run(&["solve", s(&out), "--mode", "spsd", "--block", "1", "--dimk", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "nullity"), "2");
}

#[test]
fn random_graphs_match_union_find() {
    let dir = TempDir::new().unwrap();
    for seed in 0..4u64 {
        let k = 1 + seed as usize * 2;
        let edges = random_graph(k, 5, 20, seed);
        let text: String = edges.iter().map(|(u, v)| format!("{u}\t{v}\n")).collect();
        let path = dir.path().join("g.txt");
        fs::write(&path, text).unwrap();
        let expected = Graph::from_edges(&edges).filter_min_degree(2).components().0;
        let out = dir.path().join("L.mtx");
        let o = run(&["laplacian", s(&path), "--out", s(&out), "--min-degree", "2"]);
        assert_eq!(field(&stdout(&o), "components"), expected.to_string());
        let n: usize = field(&stdout(&o), "nodes").parse().unwrap();
        let dimk = 48.min(n - 2 - n % 2).to_string();
        let o = run(&["solve", s(&out), "--epsilon", "1e-4", "--block", "2", "--dimk", &dimk]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(field(&stdout(&o), "nullity"), expected.to_string(), "seed {seed}");
    }
}

#[test]
fn malformed_edge_list_exits_1() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("bad.txt");
    fs::write(&edges, "1 2\n3\n").unwrap();
    let o = run(&["laplacian", s(&edges), "--out", s(&dir.path().join("x.mtx"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn repulsion_csv_matches_diagonal_oracle() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "diag.mtx", &diagonal_test_matrix());
    let o = run(&["analyze", "repulsion", s(&p), "--trials", "100", "--epsilon", "1e-6", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,min_gap"));
    let gaps: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(gaps.len(), 100);
    // AᵀA + εD is diagonal, so the perturbed zeros are the εd_i of the 21
    // zero rows.
    for (t, &g) in gaps.iter().enumerate() {
        let d = uniform_vec(&mut stream(3, Stream::Trial(t as u64)), 420);
        let mut zeros: Vec<f64> = d[..21].iter().map(|x| 1e-6 * x).collect();
        zeros.sort_by(f64::total_cmp);
        let want = zeros.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!((g - want).abs() <= 1e-12 * want.max(1e-18) + 1e-24, "trial {t}");
    }
    assert_eq!(field(&stderr(&o), "nullity"), "21");
}

/// `tan` of the t-th principal angle between the low eigenvectors and the
/// Krylov space `K_ell(B, ω)`, from nalgebra QR and SVD.
fn krylov_tan(b: &DMatrix<f64>, omega: &[f64], nullity: usize, t: usize, ell: usize) -> f64 {
    let n = b.nrows();
    let eig = b.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let v = DMatrix::from_fn(n, nullity, |i, j| eig.eigenvectors[(i, order[j])]);
    let mut k = DMatrix::zeros(n, ell);
    let mut x = nalgebra::DVector::from_column_slice(omega);
    for j in 0..ell {
        x /= x.norm();
        k.set_column(j, &x);
        x = b * &x;
    }
    let q = k.qr().q();
    let mut cos: Vec<f64> = (v.transpose() * q).singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    let c = cos[t - 1].min(1.0);
    (1.0 - c * c).sqrt() / c
}

#[test]
fn angle_trace_is_monotone_and_matches_dense_krylov() {
    let dir = TempDir::new().unwrap();
    let mut spectrum = vec![0.01, 0.02, 0.03];
    spectrum.extend((0..47).map(|i| 1.0 + i as f64 / 10.0));
    let (b, _) = dense_spsd(&spectrum, 5);
    let sparse = SparseMatrix::from_dense(&b);
    let p = put(&dir, "b.mtx", &sparse);
    let o = run(&[
        "analyze", "angles", s(&p), "--epsilon", "1e-14", "--nullity", "3", "--t", "2", "--ell-max", "30", "--seed", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ell,tan_angle,ratio,chebyshev_bound"));
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.first().unwrap().0, 2);
    for w in rows.windows(2) {
        assert!(w[1].1 <= w[0].1 * (1.0 + 1e-10), "{w:?}");
    }
    // Round-trip the matrix the binary saw, so the oracle uses the same B.
    let read = read_matrix_market_file(&p).unwrap().to_dense();
    let bn = DMatrix::from_fn(50, 50, |i, j| read[(i, j)]);
    let omega = gaussian_vec(&mut stream(2, Stream::StartBlock), 50);
    for &(ell, tan) in rows.iter().take(6) {
        let want = krylov_tan(&bn, &omega, 3, 2, ell);
        assert!((tan - want).abs() <= 1e-6 * want, "ell {ell}: {tan} vs {want}");
    }
}

#[test]
fn bounds_csv_has_every_check() {
    let dir = TempDir::new().unwrap();
    let p = put(&dir, "a.mtx", &planted_nullity(90, 60, 3, 8));
    let o = run(&["analyze", "bounds", s(&p), "--epsilon", "1e-4", "--dimk", "32", "--block", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("context,quantity,bound,applicable,satisfied"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[3] != "true" || r[4] == "true"), "{text}");
    assert!(field(&stderr(&o), "# outcome").starts_with("0 failed"));
    let o = run(&["analyze", "bounds", s(&p), "--mode", "spsd"]);
    assert_eq!(o.status.code(), Some(1));
}
