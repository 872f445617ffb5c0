use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bgk_cli::snapshot::read_snapshot;
use bgk_core::lambda_from_macros;

const SINGLE: &str = r#"
[[species]]
name = "a"
mass = 1.5
initial = { kind = "maxwellian", n = 2.0, u = [0.3, -0.2, 0.1], T = 0.8 }

[[frequency]]
pair = [1, 1]
model = { kind = "constant", nu0 = 2.0 }

[grid]
kind = "auto"
nodes = 16

[time]
dt = 0.1
t_final = 0.3
"#;

const TWO: &str = r#"
[[species]]
name = "light"
mass = 1.0
initial = { kind = "maxwellian", n = 1.0, u = [1.0, 0.0, 0.0], T = 1.0 }

[[species]]
name = "heavy"
mass = 2.0
initial = { kind = "two_maxwellian_sum", components = [
    { n = 0.5, u = [-1.0, 0.0, 0.0], T = 1.0 },
    { n = 0.5, u = [-0.5, 0.3, 0.0], T = 2.0 },
] }

[[frequency]]
pair = [1, 1]
model = { kind = "constant", nu0 = 1.0 }

[[frequency]]
pair = [1, 2]
model = { kind = "coulomb_like", nu0 = 1.0 }

[[frequency]]
pair = [2, 1]
model = { kind = "coulomb_like", nu0 = 1.0 }

[[frequency]]
pair = [2, 2]
model = { kind = "soft_power_law", nu0 = 1.0, gamma = 1.0 }

[grid]
kind = "auto"
nodes = 16

[time]
dt = 0.05
t_final = 0.5

[output]
every = 3
"#;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn bgk(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_bgk"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn version_and_usage() {
    let sb = Sandbox::new();
    let o = sb.bgk(&["version"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), format!("bgk {}", env!("CARGO_PKG_VERSION")));
    let o = sb.bgk(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_config_echoes_defaults() {
    let sb = Sandbox::new();
    let cfg = sb.write("min.toml", &SINGLE.replace("[grid]\nkind = \"auto\"\nnodes = 16\n", ""));
    let o = sb.bgk(&["check-config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for needle in ["widths = 6.0", "nodes = 32", "max_iter = 200", "scheme = \"explicit_euler\"", "every = 1"] {
        assert!(out.contains(needle), "{needle} missing from\n{out}");
    }
    let echoed: toml::Table = out.parse().unwrap();
    assert_eq!(echoed["newton"]["grad_tol"].as_float(), Some(1e-10));
    assert!(out.contains("# resolved time: dt = 0.1, steps = 3"), "{out}");
    // the echo is itself a valid config
    let again = sb.write("echo.toml", &out);
    assert!(sb.bgk(&["check-config", s(&again)]).status.success());
}

#[test]
fn config_errors_are_one_line_with_exit_2() {
    let sb = Sandbox::new();
    let missing = TWO.replace("pair = [2, 1]", "pair = [2, 2]").replacen(
        "[[frequency]]\npair = [2, 2]\nmodel = { kind = \"soft_power_law\", nu0 = 1.0, gamma = 1.0 }\n",
        "",
        1,
    );
    let cases = [
        (missing, "(2,1)"),
        (SINGLE.replace("[[species]]", "[[speceis]]"), "speceis"),
        (SINGLE.replace("mass = 1.5", "mass = -1.5"), "mass"),
        (SINGLE.replace("dt = 0.1", "dt = 0.7"), "dt"),
        (SINGLE.replace("t_final = 0.3", "t_final = 0.25"), "multiple"),
    ];
    for (text, needle) in cases {
        let cfg = sb.write("bad.toml", &text);
        for cmd in ["check-config", "run", "solve-target"] {
            let o = sb.bgk(&[cmd, s(&cfg)]);
            assert_eq!(o.status.code(), Some(2), "{cmd} {needle}: {}", stderr(&o));
            let err = stderr(&o);
            assert_eq!(err.lines().count(), 1, "{err}");
            assert!(err.starts_with("error: config: ") && err.contains(needle), "{err}");
        }
    }
    assert!(!sb.path("timeseries.csv").exists());
}

#[test]
fn missing_files_exit_4() {
    let sb = Sandbox::new();
    let o = sb.bgk(&["run", "nope.toml"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error: io: "));
    let cfg = sb.write("c.toml", SINGLE);
    let o = sb.bgk(&["run", s(&cfg), "--output", "no/such/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn solver_failure_exits_3_after_flushing_header() {
    let sb = Sandbox::new();
    let text = TWO.replace("[output]", "[newton]\nmax_iter = 1\n\n[output]");
    let cfg = sb.write("fail.toml", &text);
    let o = sb.bgk(&["run", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: solver: "), "{}", stderr(&o));
    let csv = std::fs::read_to_string(sb.path("timeseries.csv")).unwrap();
    assert!(csv.starts_with("t,rho_1,"));
}

#[test]
fn single_species_csv_has_twelve_columns() {
    let sb = Sandbox::new();
    let cfg = sb.write("one.toml", SINGLE);
    let o = sb.bgk(&["run", s(&cfg), "--output", "one.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(sb.path("one.csv")).unwrap();
    assert!(csv.ends_with('\n'));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines.iter().all(|l| l.split(',').count() == 12));
    assert!(!sb.path("timeseries.csv").exists());
}

#[test]
fn two_species_run_is_deterministic() {
    let sb = Sandbox::new();
    let cfg = sb.write("two.toml", TWO);
    let a = sb.bgk(&["run", s(&cfg), "--output", "a.csv"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(sb.bgk(&["run", s(&cfg), "--output", "b.csv"]).status.success());
    let first = std::fs::read(sb.path("a.csv")).unwrap();
    assert_eq!(first, std::fs::read(sb.path("b.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t,rho_1,ux_1,uy_1,uz_1,T_1,rho_2,ux_2,uy_2,uz_2,T_2,qx_tot,qy_tot,qz_tot,E_tot,H,S,residual_12"
    );
    // 10 steps recorded every 3, plus the final time
    let times: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(times.len(), 5);
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    assert!((times[0]).abs() < 1e-15 && (times[4] - 0.5).abs() < 1e-12);
    let last: Vec<f64> = lines[4].split(',').map(|x| x.parse().unwrap()).collect();
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    for col in [11, 12, 13, 14] {
        assert!((last[col] - first[col]).abs() < 1e-8 * first[14], "column {col}");
    }
    assert!(last[15] <= first[15]);
    assert!(stdout(&a).contains("wrote 5 records"));
}

#[test]
fn snapshot_round_trips_through_tabulated_input() {
    let sb = Sandbox::new();
    let text = TWO.replace("every = 3", "every = 3\nsnapshot = true\nsnapshot_prefix = \"end\"");
    let cfg = sb.write("two.toml", &text);
    let o = sb.bgk(&["run", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let light = read_snapshot(&sb.path("end_light.bin")).unwrap().unwrap();
    let heavy = read_snapshot(&sb.path("end_heavy.bin")).unwrap().unwrap();
    assert_eq!(light.values.len(), 16 * 16 * 16);

    let rest = &TWO[TWO.find("[[frequency]]").unwrap()..];
    let restart = format!(
        "[[species]]\nname = \"light\"\nmass = 1.0\ninitial = {{ kind = \"tabulated_field\", file = \"end_light.bin\" }}\n\n\
         [[species]]\nname = \"heavy\"\nmass = 2.0\ninitial = {{ kind = \"tabulated_field\", file = \"end_heavy.bin\" }}\n\n{rest}"
    );
    let path = sb.write("restart.toml", &restart);
    let p = bgk_cli::app::prepare_file(&path).unwrap();
    assert_eq!(p.state.distribution(0).values(), &light.values[..]);
    assert_eq!(p.state.distribution(1).values(), &heavy.values[..]);
    assert!(light.matches(p.state.grid()));
}

#[test]
fn solve_target_matches_analytic_multipliers() {
    let sb = Sandbox::new();
    let cfg = sb.write("one.toml", &SINGLE.replace("nodes = 16", "nodes = 32"));
    let o = sb.bgk(&["solve-target", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: toml::Table = stdout(&o).parse().unwrap();
    let row = &report["target"].as_array().unwrap()[0];
    let num = |k: &str| row[k].as_float().unwrap();
    let l1: Vec<f64> = row["lambda1"].as_array().unwrap().iter().map(|x| x.as_float().unwrap()).collect();
    let exact = lambda_from_macros(2.0, [0.3, -0.2, 0.1], 0.8, 1.5).unwrap();
    assert!((num("lambda0") - exact.l0).abs() < 1e-8);
    assert!((num("lambda2") - exact.l2).abs() < 1e-8);
    for a in 0..3 {
        assert!((l1[a] - exact.l1[a]).abs() < 1e-8);
    }
    assert!(num("residual") < 1e-10);
}

#[test]
fn solve_target_lists_every_ordered_pair() {
    let sb = Sandbox::new();
    let cfg = sb.write("two.toml", TWO);
    let o = sb.bgk(&["solve-target", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: toml::Table = stdout(&o).parse().unwrap();
    let rows = report["target"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let l2 = |k: usize| rows[k]["lambda2"].as_float().unwrap();
    // (1,2) and (2,1) share the quadratic multiplier
    assert_eq!(l2(1), l2(2));
    assert!(rows[1].get("iterations").is_some() && rows[0].get("iterations").is_none());
}
