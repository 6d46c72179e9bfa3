use negsob::fem_oracles::{NormOracle, DEFAULT_DEPTH};
use negsob::mesh::{builtin, MeshHierarchy};
use negsob::model_problems::{build_sriesz, write_user_matrix};
use negsob::Variant;
use std::path::Path;
use std::process::{Command, Output};

fn negsob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negsob")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn uniform_mesh_has_expected_size() {
    let o = negsob(&["mesh", "--builtin", "square2", "--uniform", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.starts_with("3,128,"), "{last}");
}

#[test]
fn graded_mesh_passes_audit_and_writes_levels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("levels");
    let o = negsob(&[
        "mesh",
        "--builtin",
        "square2",
        "--adaptive-corner",
        "0,0",
        "--steps",
        "8",
        "--mesh-dir",
        d.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 10);
    let text = std::fs::read_to_string(d.join("level_8.mesh")).unwrap();
    let m = negsob::mesh::parse_mesh(&text).unwrap();
    assert!(m.num_elements() > 8);
}

#[test]
fn invalid_mesh_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.mesh");
    std::fs::write(&p, "v 0 0\nv 1 0\nv 0 1\nt 0 1 x\n").unwrap();
    let o = negsob(&["mesh", "--mesh", p.to_str().unwrap(), "--uniform", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(negsob(&["bench"]).status.code(), Some(1));
    assert_eq!(negsob(&["norm", "--uniform", "2", "--s", "1.5"]).status.code(), Some(1));
    assert_eq!(negsob(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(negsob(&["--help"]).status.code(), Some(0));
}

#[test]
fn norm_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = negsob(&[
            "norm", "--uniform", "2", "--s", "0.25,0.5", "--variant", "tilde", "--samples", "3", "--seed", "9",
            "--output", p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("L,s,variant,level,contribution,active_elems,total,sample,oracle_sq,ratio,oswald_ratio\n"));
    // 2 values of s, 3 samples, 3 levels.
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 3);
}

#[test]
fn atom_and_constant_sources() {
    let o = negsob(&["norm", "--uniform", "1", "--phi", "atom:0,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = negsob(&["norm", "--uniform", "1", "--phi", "constant", "--variant", "tilde"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(negsob(&["norm", "--uniform", "1", "--phi", "atom:0,99"]).status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# split study\nuniform = 2\ns = 0.25, 0.75\nsamples = 2\nvariant = tilde\n").unwrap();
    let o = negsob(&["split", "--config", cfg.to_str().unwrap(), "--s", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",0.5,tilde,2,")), "{out}");
    std::fs::write(&cfg, "uniform = 2\nbogus = 1\n").unwrap();
    assert_eq!(negsob(&["split", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

fn kappa_column(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(7).unwrap().parse().unwrap()).collect()
}

#[test]
fn precond_on_imported_matrix_matches_oracle() {
    let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 2).unwrap();
    let o = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    let a = build_sriesz(&o, 0.5).unwrap().dense();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.txt");
    write_user_matrix(Path::new(&p), &a).unwrap();
    let from_file = negsob(&["precond", "--uniform", "2", "--levels", "2", "--matrix", p.to_str().unwrap()]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    let from_oracle = negsob(&["precond", "--uniform", "2", "--levels", "2", "--control"]);
    assert_eq!(from_oracle.status.code(), Some(0));
    let k1 = kappa_column(&stdout(&from_file));
    let k2 = kappa_column(&stdout(&from_oracle));
    assert_eq!(k2.len(), 2);
    assert!(((k1[0] - k2[0]) / k2[0]).abs() < 1e-6, "{k1:?} {k2:?}");
    assert!(k2[1] > k2[0]);
    // Wrong dimension for level 1.
    let o = negsob(&["precond", "--uniform", "1", "--levels", "1", "--matrix", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_reports_counts_within_budget() {
    let o = negsob(&["bench", "--uniform", "4", "--levels", "2,3,4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for row in out.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let (apply, norm, bound): (u64, u64, u64) = (f[3].parse().unwrap(), f[4].parse().unwrap(), f[5].parse().unwrap());
        assert!(apply <= bound && norm <= bound);
        assert!(!f[8].is_empty());
    }
}
