use std::path::Path;
use std::process::{Command, Output};

use varexp::pgm::Image;
use varexp::vxf::{self, Location, VxfField};

const MATCHED: &str = "
[grid]
dim = 2
origin = -1 -1
extent = 2 2
cells = 16 16

[exponent]
kind = wave
base = 2
amplitude = 0.1
frequency = 1.3 0.7

[data]
instance = matched

[estimates]
q = 1 2
root_side = 1
";

fn varexp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varexp"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn solve_writes_fields_that_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", MATCHED);
    let o = varexp(dir.path(), &["solve", "--config", &cfg, "--out", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let u = vxf::read_nodes(&out.join("u.vxf")).unwrap();
    assert_eq!(u.grid().cells_per_axis()[..2], [16, 16]);
    let g = VxfField::read(&out.join("g.vxf")).unwrap();
    assert_eq!(g.location, Location::Cells);
    assert_eq!(g.codomain, 2);
    let stages = csv_rows(&out.join("solve.csv"));
    assert!(!stages.is_empty());
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("command = solve"));
    assert!(report.contains("config_sha256 = "));
    assert!(report.contains("converged = true"));
}

#[test]
fn verify_reports_every_record_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", MATCHED);
    let o = varexp(dir.path(), &["verify", "--config", &cfg, "--out", "out"]);
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("out/records.csv"));
    for name in ["caccioppoli", "reverse_holder", "higher_integrability"] {
        assert!(rows.iter().any(|r| &r[0] == name), "missing {name}");
    }
    // q = 1 is the trivial end of the scale: a finite, positive constant
    let trivial = rows
        .iter()
        .find(|r| &r[0] == "higher_integrability" && r[9].contains("q=1;"))
        .expect("q = 1 record");
    let c: f64 = trivial[6].parse().unwrap();
    assert!(c.is_finite() && c > 0.0);
}

#[test]
fn gehring_on_constant_exponent_finds_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let text = MATCHED.replace("amplitude = 0.1", "amplitude = 0");
    let cfg = write_config(dir.path(), "g.cfg", &text);
    let o = varexp(dir.path(), &["gehring", "--config", &cfg, "--out", "out"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let m0: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("m0 = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(m0 > 1.0);
    assert_eq!(csv_rows(&dir.path().join("out/gehring.csv")).len(), 9);
}

#[test]
fn refinement_sweep_lists_each_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{MATCHED}\n[sweep]\nkind = refinement\nresolutions = 8 16\n");
    let cfg = write_config(dir.path(), "s.cfg", &text);
    let o = varexp(dir.path(), &["sweep", "--config", &cfg, "--out", "out", "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("out/sweep.csv"));
    let params: Vec<&str> = rows.iter().filter(|r| &r[2] == "sup_error").map(|r| r.get(1).unwrap()).collect();
    assert_eq!(params, ["8", "16"]);
}

#[test]
fn seed_override_is_reproducible_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", MATCHED);
    for (seed, out) in [("1", "a"), ("1", "b"), ("2", "c")] {
        assert!(varexp(dir.path(), &["verify", "--config", &cfg, "--out", out, "--seed", seed]).status.success());
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("records.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let report = std::fs::read_to_string(dir.path().join("c/report.txt")).unwrap();
    assert!(report.contains("seed = 2"));
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", &format!("{MATCHED}\n[solver]\nmax_iterations = 1\n"));
    let o = varexp(dir.path(), &["solve", "--config", &cfg, "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
    // outputs are still written for inspection
    assert!(dir.path().join("out/u.vxf").exists());
}

#[test]
fn bad_configs_exit_with_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[grid]\ndim = 2\ncels = 4 4\n", "cels"),
        ("[grid]\ndim = 2\ncells = 8 8\n[exponent]\nkind = constant\nvalue = 0.9\n", "value"),
        ("[denoise]\ninput = missing.pgm\n", "missing.pgm"),
        ("[grid\n", "line 1"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.cfg"), text);
        let cmd = if text.contains("denoise") { "denoise" } else { "solve" };
        let o = varexp(dir.path(), &[cmd, "--config", &cfg, "--out", "out"]);
        assert_eq!(o.status.code(), Some(1), "{text:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{text:?}: {err}");
    }
    let o = varexp(dir.path(), &["solve", "--config", "nowhere.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn denoise_writes_image_of_the_same_size() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (20, 12);
    let img = Image::new(w, h, (0..w * h).map(|i| if (i % w) < w / 2 { 60 } else { 190 }).collect());
    img.write(&dir.path().join("in.pgm"), varexp::config::PgmFormat::Ascii).unwrap();
    let cfg = write_config(dir.path(), "d.cfg", "[denoise]\ninput = in.pgm\nformat = p2\n");
    let o = varexp(dir.path(), &["denoise", "--config", &cfg, "--out", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read(dir.path().join("out/denoised.pgm")).unwrap();
    assert!(text.starts_with(b"P2"));
    let out = Image::decode(&text).unwrap();
    assert_eq!((out.width, out.height), (w, h));
    let p = VxfField::read(&dir.path().join("out/p.vxf")).unwrap();
    assert!(p.values.iter().all(|v| (1.2..=2.0).contains(v)));
}
