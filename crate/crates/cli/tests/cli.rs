use std::process::Command;

use dimerloop::{Domain, DomainKind, Link, LinkConfig, LinkKind};
use dimerloop_cli::render::render_svg;
use dimerloop_cli::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dimerloop"))
}

#[test]
fn sample_is_deterministic_under_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "[model]\nn = 3\nu = 0.5\n[lattice]\nkind = primal-rect\nL = 3\nbeta = 2\n[mcmc]\nsweeps = 20\nburnin = 5\nchains = 2\nseed = 7\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = bin().args(["sample", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(st.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.ndjson");
    assert_eq!(a, run("b.ndjson"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 40);
}

#[test]
fn ed_check_reports_exact_value() {
    let out = bin().args(["ed-check", "--n", "2", "--L", "1", "--u", "0", "--beta", "1", "--sweeps", "2000"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let e = std::f64::consts::E;
    assert!(text.contains(&format!("{:.6}", e / (e + 3.0))), "{text}");
    assert!(text.contains("sigma"));
}

#[test]
fn exit_codes() {
    assert_eq!(bin().args(["sample", "--set", "model.q=1"]).status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["sample", "--no-such-flag"]).status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["repair-audit", "--kind", "torus"]).status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["series-check", "--n", "2.5"]).status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["series-check", "--n", "2", "--L", "1", "--beta", "0.2"]).status().unwrap().code(), Some(0));
}

#[test]
fn render_round_trip_through_stream() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.ndjson");
    assert!(bin().args(["sample", "--sweeps", "3", "--out"]).arg(&s).status().unwrap().success());
    let svg = dir.path().join("c.svg");
    let st = bin().args(["render", "--index", "1", "--clusters", "--in"]).arg(&s).arg("--out").arg(&svg).status().unwrap();
    assert!(st.success());
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
    let missing = bin().args(["render", "--index", "99", "--in"]).arg(&s).status().unwrap();
    assert_eq!(missing.code(), Some(1));
}

#[test]
fn svg_glyphs_and_determinism() {
    let d = Domain::new(DomainKind::Torus, 1, 1.0).unwrap();
    let empty = render_svg(&LinkConfig::empty(d), None);
    assert_eq!(empty.matches("<line").count(), 2);
    let cfg = LinkConfig::from_links(d, [Link::new(0, 0.25, LinkKind::Bar), Link::new(0, 0.75, LinkKind::Cross)]).unwrap();
    let svg = render_svg(&cfg, None);
    assert_eq!(svg.matches("#1565c0").count(), 2);
    assert_eq!(svg.matches("#c62828").count(), 2);
    // Bar at t = 0.25 sits 3/4 of the way down the 400px plot.
    assert!(svg.contains(r#"y1="318.000""#) && svg.contains(r#"y1="322.000""#));
    assert_eq!(svg, render_svg(&cfg, None));
}

#[test]
fn config_overrides() {
    let mut c = RunConfig::parse_text("lattice.L = 5\n").unwrap();
    c.set("model.kappa", "0.1").unwrap();
    assert_eq!(c.lattice.l, 5);
    assert_eq!(c.params().unwrap().kappa, 0.1);
}
