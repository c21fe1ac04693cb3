use std::path::PathBuf;
use std::process::{Command, Output};

use cohsim::io::map_from_json;
use cohsim::quantum::{
    identity, kron, max_abs_diff, partial_trace, rotation_unitary, DensityMatrix, QuantumChannel,
};

const PI_4: &str = "0.7853981633974483";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coherence-sim"));
    c.env_remove("COHSIM_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn field(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"));
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

fn csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn robustness_examples() {
    let out = ok(&["robustness", "--channel", &format!("rotation:{PI_4}")]);
    assert_eq!(field(&out, "C_R:"), 1.0);
    let out = ok(&["robustness", "--state", "maxcoh:4"]);
    assert_eq!(field(&out, "C_R:"), 3.0);
    let out = ok(&["robustness", "--state", "plus"]);
    assert_eq!(field(&out, "C_R:"), 1.0);
}

#[test]
fn two_rotations_from_a_qubit_resource() {
    let out = ok(&[
        "simulate",
        "--class",
        "mio",
        "--target",
        &format!("rotation:{PI_4}:2"),
        "--resource",
        "maxcoh:2",
    ]);
    assert!(out.contains("probability: 0.333333"), "{out}");
    assert!(out.contains("analytic: applies"), "{out}");
    assert!(out.contains(": 0.333333\n"), "{out}");
}

#[test]
fn dio_replacement_step() {
    let p = |eps: &str| {
        field(
            &ok(&[
                "simulate",
                "--class",
                "dio",
                "--target",
                "replacement:psi_m:4",
                "--resource",
                "maxcoh:2",
                "--epsilon",
                eps,
            ]),
            "probability:",
        )
    };
    assert_eq!(p("0.5"), 1.0);
    assert_eq!(p("0.4"), 0.0);
}

#[test]
fn dio_no_go_notice() {
    let out = ok(&[
        "simulate",
        "--class",
        "dio",
        "--target",
        "rotation:0.3",
        "--resource",
        "maxcoh:2",
    ]);
    assert!(out.contains("no-go"), "{out}");
    assert_eq!(field(&out, "probability:"), 0.0);
}

#[test]
fn nogo_reports() {
    let out = ok(&["nogo", "--channel", &format!("rotation:{PI_4}")]);
    assert!(out.contains("nonactivating: false"));
    assert_eq!(field(&out, "deviation:"), 0.5);
    for ch in ["replacement:plus", "dephasing:3", "identity:2"] {
        let out = ok(&["nogo", "--channel", ch]);
        assert!(out.contains("nonactivating: true"), "{ch}: {out}");
    }
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["robustness", "--state", "nonsense"]), Some(2));
    assert_eq!(code(&["robustness", "--state", "pure:0,0"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(
        code(&[
            "simulate",
            "--class",
            "mio",
            "--target",
            "rotation:0.3",
            "--resource",
            "plus",
            "--epsilon",
            "1.5",
        ]),
        Some(2)
    );
    assert_eq!(
        code(&["--tol", "-1", "robustness", "--state", "plus"]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "--config",
            "/nonexistent/cohsim.conf",
            "robustness",
            "--state",
            "plus"
        ]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "sweep",
            "--preset",
            "fig4",
            "-o",
            "/nonexistent/dir/out.csv"
        ]),
        Some(1)
    );
    assert_eq!(
        code(&["--max-iterations", "1", "robustness", "--state", "maxcoh:3"]),
        Some(3)
    );
}

#[test]
fn environment_tolerance_sits_between_config_and_flags() {
    let o = bin()
        .env("COHSIM_TOL", "not-a-number")
        .args(["robustness", "--state", "plus"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let conf = scratch("loose.conf");
    std::fs::write(&conf, "# loose\ntol = 1e-2\n").unwrap();
    let o = bin()
        .env("COHSIM_TOL", "1e-9")
        .args([
            "--config",
            conf.to_str().unwrap(),
            "robustness",
            "--state",
            "maxcoh:3",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "C_R:"), 2.0);
}

#[test]
fn sweeps_are_deterministic() {
    let (a, b) = (scratch("fig3-a.csv"), scratch("fig3-b.csv"));
    for p in [&a, &b] {
        ok(&["sweep", "--preset", "fig3", "-o", p.to_str().unwrap()]);
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("x,eps=0,eps=0.02,eps=0.04,eps=0.06\n"));
    assert!(!text.contains("nan"));
    // exact simulation of |+> costs 2 alpha
    for row in csv(&text) {
        assert!((row[1] - 2.0 * row[0]).abs() <= 2e-6, "{row:?}");
    }
}

#[test]
fn theta_sweep_is_monotone() {
    let out = ok(&[
        "sweep",
        "--variable",
        "theta",
        "--grid",
        &format!("0:{PI_4}:5"),
        "--series",
        "eps:0,0.1",
        "--power",
        "2",
        "--resource",
        "maxcoh:2",
    ]);
    assert!(out.starts_with("x,eps=0,eps=0.1\n"), "{out}");
    let rows = csv(&out);
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        for k in 1..3 {
            assert!(w[1][k] <= w[0][k] + 1e-6, "{w:?}");
        }
    }
    for r in &rows {
        assert!(r[2] >= r[1] - 1e-6, "{r:?}");
    }
    assert!((rows[4][1] - 1.0 / 3.0).abs() <= 1e-6);
}

#[test]
fn dio_never_beats_mio_along_epsilon() {
    let out = ok(&["sweep", "--preset", "fig4"]);
    assert!(out.starts_with("x,mio,dio\n"));
    let rows = csv(&out);
    assert_eq!(rows.len(), 21);
    for r in rows {
        assert!(r[2] <= r[1] + 1e-6, "{r:?}");
        let want = if r[0] >= 0.5 - 1e-12 { 1.0 } else { 0.0 };
        assert!((r[2] - want).abs() <= 1e-6, "{r:?}");
    }
}

#[test]
fn dumped_protocol_reproduces_the_target() {
    let path = scratch("protocol.json");
    let out = ok(&[
        "simulate",
        "--class",
        "mio",
        "--target",
        "rotation:0.4",
        "--resource",
        "maxcoh:2",
        "--dump-protocol",
        path.to_str().unwrap(),
    ]);
    let p = field(&out, "probability:");
    let text = std::fs::read_to_string(&path).unwrap();
    let map = map_from_json(&text).unwrap();
    assert_eq!((map.dim_in(), map.dim_out()), (4, 2));

    // written with round-trip precision
    let again = map_from_json(&cohsim::io::channel_to_json(&map)).unwrap();
    assert!(max_abs_diff(again.choi(), map.choi()) <= 1e-12);

    let omega = DensityMatrix::maximally_coherent(2).unwrap();
    let w = kron(&omega.matrix().transpose(), &identity(4));
    let jm = partial_trace(&(map.choi() * w), &[2, 2, 2], &[0]).unwrap();
    let target = QuantumChannel::from_unitary(&rotation_unitary(0.4)).unwrap();
    assert!(max_abs_diff(&jm, &target.choi().scale(p)) <= 1e-5);
}
