//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::Instant;

use common::{brute_loop_count, cross, bar, domain_for, kinds, random_config, sigma_distance, small_domain};
use dimerloop::clusters::{classify_trivial, count_preimages, repair};
use dimerloop::loops::{delta_loops, trace_loops};
use dimerloop::mirror::{
    black_white_order, mirror_enumerate_exact, mirror_sweep, rescaled_params, to_link_config, FaceColour, Mirror,
    MirrorConfig, MirrorLattice, MirrorParams,
};
use dimerloop::observables::{
    dimer_psi, domination_check, loop_series, perimeter_of, perimeter_tail_from, probe_times, Window,
};
use dimerloop::quantum::{build_loop_model, build_model, loop_parameters, ObservableSpec};
use dimerloop::sampler::{chain_rng, sample_t1_rejection, Chain};
use dimerloop::smallexact::partition_series;
use dimerloop::stats::estimate;
use dimerloop::{DomainKind, Link, LinkConfig, LinkKind, Move, SimParams};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn observables(n: usize) -> [(&'static str, ObservableSpec); 3] {
    [
        ("Q", ObservableSpec::q_projector(0, n)),
        ("|00><11|", ObservableSpec::elementary(vec![0, 1], vec![0, 0], vec![1, 1])),
        ("|01><10|", ObservableSpec::elementary(vec![0, 1], vec![0, 1], vec![1, 0])),
    ]
}

fn params(u: f64, n: f64) -> SimParams {
    SimParams::new(u, n).unwrap()
}

fn loop_count_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = chain_rng(101, 0);
    let mut mismatches = 0;
    for kind in kinds() {
        for _ in 0..200 {
            let cfg = random_config(small_domain(kind, &mut rng), 6, &mut rng);
            if trace_loops(&cfg).ell() != brute_loop_count(&cfg) {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(mismatches == 0 && secs < 10.0, format!("600 configs, {mismatches} mismatches, {secs:.2} s"))
}

/// Loop estimates of the three observables, sampling until every standard
/// error is at most `target` or the sweep budget runs out.
fn estimate_observables(
    kind: DomainKind,
    l: i64,
    u: f64,
    n: usize,
    times: &[f64],
    seed: u64,
) -> Vec<(f64, f64)> {
    let beta = 1.0;
    let d = domain_for(kind, l, beta);
    let obs = observables(n);
    let mut chain = Chain::from_empty(d, params(u, n as f64), seed, 0);
    for _ in 0..2_000 {
        chain.sweep().unwrap();
    }
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); obs.len()];
    let target = 4e-3;
    let mut results = Vec::new();
    for _ in 0..40 {
        for _ in 0..20_000 {
            chain.sweep().unwrap();
            for (k, (_, o)) in obs.iter().enumerate() {
                series[k].push(loop_series(std::slice::from_ref(chain.cfg()), n, o, times).unwrap()[0]);
            }
        }
        results = series.iter().map(|s| estimate(s).map(|e| (e.mean, e.std_error)).unwrap()).collect();
        if results.iter().all(|r| r.1 <= target) {
            break;
        }
    }
    results
}

fn identity_check(kind_of: impl Fn(i64) -> DomainKind, exact_of: impl Fn(usize, i64, f64, &ObservableSpec) -> f64, times_of: impl Fn(DomainKind, i64) -> Vec<f64>) -> Outcome {
    let start = Instant::now();
    let mut worst_sigma: f64 = 0.0;
    let mut worst_se: f64 = 0.0;
    let mut failures = Vec::new();
    let mut seed = 0;
    for n in [2usize, 3] {
        for l in [1i64, 2] {
            for u in [0.0, 0.5, 1.0] {
                seed += 1;
                let kind = kind_of(l);
                let est = estimate_observables(kind, l, u, n, &times_of(kind, l), seed);
                for ((name, o), (mean, se)) in observables(n).iter().zip(est) {
                    let exact = exact_of(n, l, u, o);
                    let sigma = sigma_distance(mean, se, exact, 0.0);
                    worst_sigma = worst_sigma.max(sigma);
                    worst_se = worst_se.max(se);
                    if sigma > 4.0 || se > 5e-3 {
                        failures.push(format!("n={n} L={l} u={u} {name}: {mean:.5}±{se:.5} vs {exact:.5}"));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut detail = format!("36 comparisons, worst {worst_sigma:.2} sigma, worst se {worst_se:.1e}, {secs:.0} s");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    outcome(failures.is_empty() && secs <= 600.0, detail)
}

fn dictionary_identity() -> Outcome {
    identity_check(
        |_| DomainKind::Torus,
        |n, l, u, o| build_loop_model(n, l, u).unwrap().gibbs_expectation(o, 1.0).unwrap(),
        |kind, l| probe_times(&domain_for(kind, l, 1.0)),
    )
}

fn seeded_identity() -> Outcome {
    identity_check(
        |l| if l % 2 == 1 { DomainKind::PrimalRect } else { DomainKind::DualRect },
        |n, l, u, o| build_loop_model(n, l, u).unwrap().seeded_expectation(o, 1.0).unwrap(),
        |_, _| vec![0.0],
    )
}

fn partition_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for beta in [0.1, 0.2, 0.3] {
        for n in [2usize, 3] {
            for u in [0.0, 0.5, 1.0] {
                let trace = build_loop_model(n, 1, u).unwrap().partition_function(beta);
                let s = partition_series(&domain_for(DomainKind::Torus, 1, beta), u, n as f64, 14).unwrap();
                let slack = (trace - s.value).abs() - (s.tail_bound + 1e-8);
                worst = worst.max(slack);
                pass &= slack <= 0.0;
                let lp = loop_parameters(u, n as f64, beta).unwrap();
                let literal = build_model(n, 1, u).unwrap().partition_function(beta);
                let s = partition_series(&domain_for(DomainKind::Torus, 1, lp.beta), lp.u, n as f64, 14).unwrap();
                let factor = (lp.scale * beta).exp();
                let slack = (literal - factor * s.value).abs() - factor * (s.tail_bound + 1e-8);
                worst = worst.max(slack);
                pass &= slack <= 0.0;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 60.0, format!("36 cases (normalised and literal trace), max(|diff| - bound) = {worst:.2e}, {secs:.2} s"))
}

fn delta_contract() -> Outcome {
    let mut rng = chain_rng(105, 0);
    let mut audits = 0;
    let mut violations = 0;
    let mut disagreements = 0;
    while audits < 100_000 {
        let kind = kinds()[rng.random_range(0..3)];
        let cfg = random_config(small_domain(kind, &mut rng), 12, &mut rng);
        let d = *cfg.domain();
        let before = trace_loops(&cfg).ell() as i64;
        for _ in 0..10 {
            let mv = if cfg.is_empty() || rng.random_bool(0.5) {
                Move::Insert(Link {
                    edge: d.edge_at(rng.random_range(0..d.num_edges())),
                    t: rng.random_range(d.t_min()..d.t_max()),
                    kind: if rng.random_bool(0.5) { LinkKind::Cross } else { LinkKind::Bar },
                })
            } else {
                Move::Delete(rng.random_range(0..cfg.len()))
            };
            let Ok(after) = cfg.apply_move(&mv) else { continue };
            let delta = delta_loops(&cfg, &mv).unwrap();
            assert!(delta.abs() <= 1, "|Δℓ| = {} for {mv:?} on\n{}", delta.abs(), cfg.serialize());
            violations += usize::from(delta.abs() > 1);
            disagreements += usize::from(delta != trace_loops(&after).ell() as i64 - before);
            audits += 1;
        }
    }
    let d = domain_for(DomainKind::Torus, 1, 1.0);
    let witness = LinkConfig::from_links(d, [cross(0, 0.3)]).unwrap();
    let mv = Move::Insert(bar(0, 0.7));
    let witness_ok = trace_loops(&witness).ell() == 1
        && delta_loops(&witness, &mv).unwrap() == 0
        && trace_loops(&witness.apply_move(&mv).unwrap()).ell() == 1;
    outcome(
        violations == 0 && disagreements == 0 && witness_ok,
        format!("{audits} audits, {violations} with |Δℓ|>1, {disagreements} disagree with retrace, witness ℓ=1: {witness_ok}"),
    )
}

fn domination() -> Outcome {
    let start = Instant::now();
    let d = domain_for(DomainKind::Torus, 2, 2.0);
    let windows = [
        Window { x_lo: 0, x_hi: 0, t_lo: 0.0, t_hi: 2.0 },
        Window { x_lo: -1, x_hi: 1, t_lo: 0.0, t_hi: 0.5 },
        Window { x_lo: 1, x_hi: 1, t_lo: 0.2, t_hi: 0.4 },
    ];
    let mut flags = 0;
    let mut tests = 0;
    let mut seed = 600;
    for n in [1.0, 3.0, 8.0] {
        for u in [0.0, 0.5] {
            seed += 1;
            let mut chain = Chain::from_empty(d, params(u, n), seed, 0);
            for _ in 0..1_000 {
                chain.sweep().unwrap();
            }
            let samples: Vec<LinkConfig> = (0..100_000)
                .map(|_| {
                    chain.sweep().unwrap();
                    chain.cfg().clone()
                })
                .collect();
            let report = domination_check(&samples, n, &windows).unwrap();
            flags += report.flags.len();
            tests += report.tests;
        }
    }
    let t1 = domain_for(DomainKind::Torus, 1, 1.0);
    let heavy = LinkConfig::from_links(t1, (0..20).map(|i| bar(0, 0.01 + 0.04 * i as f64))).unwrap();
    let stress = domination_check(&vec![heavy; 100], 2.0, &[Window { x_lo: 0, x_hi: 0, t_lo: 0.0, t_hi: 1.0 }]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        flags == 0 && !stress.passed() && secs < 300.0,
        format!("{tests} tail tests, {flags} flags; stress input flagged: {}; {secs:.0} s", !stress.passed()),
    )
}

fn conditional_poisson() -> Outcome {
    let d = domain_for(DomainKind::PrimalRect, 1, 0.5);
    let p = params(0.5, 3.0);
    let mean = (1.0 - p.u) * p.n * d.beta();
    let mut rng = chain_rng(107, 0);
    let samples = 20_000;
    let top = 4;
    let mut observed = vec![0.0; top + 1];
    for _ in 0..samples {
        let cfg = sample_t1_rejection(&p, &d, &mut rng, 1_000_000).unwrap();
        observed[cfg.len().min(top)] += 1.0;
    }
    let pois = Poisson::new(mean).unwrap();
    let expected: Vec<f64> = (0..=top)
        .map(|k| samples as f64 * if k < top { pois.pmf(k as u64) } else { pois.sf(top as u64 - 1) })
        .collect();
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p_value = 1.0 - ChiSquared::new(top as f64).unwrap().cdf(chi2);
    outcome(p_value > 0.01, format!("{samples} samples, mean {mean}, chi2 {chi2:.2} on {top} dof, p = {p_value:.3}"))
}

fn repair_audit() -> Outcome {
    let start = Instant::now();
    let p = params(0.5, 12.0).with_kappa(0.1).unwrap();
    let mut chain = Chain::from_empty(domain_for(DomainKind::PrimalRect, 7, 8.0), p, 108, 0);
    for _ in 0..500 {
        chain.sweep().unwrap();
    }
    let mut failures = 0;
    let mut gain = 0.0;
    for _ in 0..10_000 {
        chain.sweep().unwrap();
        chain.sweep().unwrap();
        let out = repair(chain.cfg(), &p).unwrap();
        assert!(out.checks.all_hold(), "repair observation failed: {:?}\n{}", out.checks, chain.cfg().serialize());
        failures += usize::from(!out.checks.all_hold());
        gain += out.checks.delta_ell as f64;
    }
    let mut small = Chain::from_empty(domain_for(DomainKind::PrimalRect, 3, 2.0), p, 208, 0);
    let (mut enumerated, mut bad) = (0, 0);
    let mut largest = 0;
    while enumerated < 1_000 {
        small.sweep().unwrap();
        let out = repair(small.cfg(), &p).unwrap();
        if out.checks.out_bar_real > 8 {
            continue;
        }
        let count = count_preimages(&out, &p, Some(small.cfg())).unwrap();
        bad += usize::from(!count.contains_target || count.preimages as f64 > count.bound);
        largest = largest.max(count.out_size);
        enumerated += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && bad == 0,
        format!(
            "10000 samples, mean Δℓ {:.2}, {failures} failures; {enumerated} preimage counts (|out| ≤ {largest}), {bad} bad; {secs:.0} s",
            gain / 10_000.0
        ),
    )
}

struct DimerRun {
    psi: (f64, f64),
    perimeters: Vec<f64>,
}

fn dimer_run(kind: DomainKind, l: i64, seed: u64, perimeters: bool) -> DimerRun {
    let p = params(0.5, 12.0).with_kappa(0.1).unwrap();
    let mut chain = Chain::from_empty(domain_for(kind, l, 8.0), p, seed, 0);
    for _ in 0..1_000 {
        chain.sweep().unwrap();
    }
    let mut psi = Vec::new();
    let mut per = Vec::new();
    for k in 0..20_000 {
        chain.sweep().unwrap();
        psi.push(dimer_psi(chain.cfg(), &p));
        if perimeters && k % 4 == 0 {
            per.push(perimeter_of(chain.cfg(), &p, (0, 0.0)).unwrap());
        }
    }
    let e = estimate(&psi).unwrap();
    DimerRun { psi: (e.mean, e.std_error), perimeters: per }
}

fn dimerization(primal: &DimerRun) -> Outcome {
    let start = Instant::now();
    let dual = dimer_run(DomainKind::DualRect, 8, 209, false).psi;
    let odd = dimer_run(DomainKind::Torus, 7, 309, false).psi;
    let even = dimer_run(DomainKind::Torus, 8, 409, false).psi;
    let z = |r: (f64, f64)| r.0 / r.1;
    let p = primal.psi;
    let pass = z(p) > 5.0 && z(dual) < -5.0 && z(odd) * z(even) < 0.0 && z(odd).abs() > 5.0 && z(even).abs() > 5.0;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        pass,
        format!(
            "psi primal L=7 {:.3}±{:.3}, dual L=8 {:.3}±{:.3}, torus L=7 {:.3}±{:.3}, torus L=8 {:.3}±{:.3}; {secs:.0} s",
            p.0, p.1, dual.0, dual.1, odd.0, odd.1, even.0, even.1
        ),
    )
}

fn perimeter_tail(primal: &DimerRun) -> Outcome {
    match perimeter_tail_from(&primal.perimeters, 40) {
        Ok(t) => outcome(
            t.fit.slope < 0.0 && t.fit.r_squared > 0.9,
            format!(
                "{} samples, slope {:.4}, R² {:.3} over {} points",
                t.n_samples, t.fit.slope, t.fit.r_squared, t.fit.points
            ),
        ),
        Err(e) => outcome(false, format!("no fit: {e}")),
    }
}

fn mirror_run(lat: &MirrorLattice, p: &MirrorParams, sweeps: usize, seed: u64) -> Vec<MirrorConfig> {
    let mut rng = chain_rng(seed, 0);
    let mut cfg = MirrorConfig::uniform(lat.clone(), Mirror::V);
    for _ in 0..500 {
        mirror_sweep(&mut cfg, p, &mut rng).unwrap();
    }
    (0..sweeps)
        .map(|_| {
            mirror_sweep(&mut cfg, p, &mut rng).unwrap();
            cfg.clone()
        })
        .collect()
}

fn mirror_model() -> Outcome {
    let start = Instant::now();
    let lat = MirrorLattice::rect(3, 6).unwrap();
    let p = MirrorParams::new(0.4, 0.4, 0.2, 3.0).unwrap();
    let exact = mirror_enumerate_exact(&lat, &p).unwrap();
    let mut rng = chain_rng(111, 0);
    let mut cfg = MirrorConfig::uniform(lat.clone(), Mirror::V);
    for _ in 0..1_000 {
        mirror_sweep(&mut cfg, &p, &mut rng).unwrap();
    }
    let free = lat.free_sites();
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(1_000_000); 3 * free.len()];
    for _ in 0..1_000_000 {
        mirror_sweep(&mut cfg, &p, &mut rng).unwrap();
        for (k, &s) in free.iter().enumerate() {
            for (j, m) in Mirror::ALL.iter().enumerate() {
                series[3 * k + j].push(f64::from(u8::from(cfg.state[s] == *m)));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..free.len() {
        let marg = exact.marginal(k);
        for j in 0..3 {
            let e = estimate(&series[3 * k + j]).unwrap();
            worst = worst.max(sigma_distance(e.mean, e.std_error, marg[j], 0.0));
        }
    }
    drop(series);
    let p8 = MirrorParams::new(0.4, 0.4, 0.2, 8.0).unwrap();
    let order = |colour, seed| {
        let lat = MirrorLattice::boxed(10, 10, colour).unwrap();
        let e = black_white_order(&mirror_run(&lat, &p8, 20_000, seed)).unwrap();
        (e.mean, e.std_error)
    };
    let black = order(FaceColour::Black, 211);
    let white = order(FaceColour::White, 311);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 4.0 && black.0 > 5.0 * black.1 && white.0 < 0.0,
        format!(
            "{} free sites, worst marginal {worst:.2} sigma; order black {:.3}±{:.3}, white {:.3}±{:.3}; {secs:.0} s",
            free.len(),
            black.0,
            black.1,
            white.0,
            white.1
        ),
    )
}

fn continuum_bridge() -> Outcome {
    let start = Instant::now();
    let (u, n, beta, l, eps): (f64, f64, f64, i64, f64) = (0.5, 3.0, 2.0, 2, 0.02);
    let sp = params(u, n);
    let small_trivial = |cfg: &LinkConfig| classify_trivial(&trace_loops(cfg), &sp).iter().filter(|t| t.small).count() as f64;
    let lat = MirrorLattice::chain(l, (2.0 * beta / eps).round() as i64).unwrap();
    let mp = rescaled_params(u, eps, n).unwrap();
    let mut rng = chain_rng(112, 0);
    let mut cfg = MirrorConfig::uniform(lat, Mirror::V);
    for _ in 0..1_000 {
        mirror_sweep(&mut cfg, &mp, &mut rng).unwrap();
    }
    let mirror: Vec<f64> = (0..64_000)
        .map(|_| {
            mirror_sweep(&mut cfg, &mp, &mut rng).unwrap();
            small_trivial(&to_link_config(&cfg, eps).unwrap())
        })
        .collect();
    let m = estimate(&mirror).unwrap();
    let mut chain = Chain::from_empty(domain_for(DomainKind::Torus, l, beta), sp, 212, 0);
    for _ in 0..2_000 {
        chain.sweep().unwrap();
    }
    let cont: Vec<f64> = (0..400_000)
        .map(|_| {
            chain.sweep().unwrap();
            small_trivial(chain.cfg())
        })
        .collect();
    let c = estimate(&cont).unwrap();
    let rel = (m.mean - c.mean).abs() / c.mean;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rel < 0.05,
        format!(
            "eps {eps}: mirror {:.4}±{:.4}, continuum {:.4}±{:.4}, relative error {:.2}%; {secs:.0} s",
            m.mean,
            m.std_error,
            c.mean,
            c.std_error,
            100.0 * rel
        ),
    )
}

fn main() {
    let report = |k: usize, name: &str, o: Outcome| {
        println!("criterion {k:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        o.pass
    };
    let mut all = true;
    all &= report(1, "loop-count oracle", loop_count_oracle());
    all &= report(2, "dictionary identity", dictionary_identity());
    all &= report(3, "seeded-state identity", seeded_identity());
    all &= report(4, "partition identity", partition_identity());
    all &= report(5, "loop-change contract", delta_contract());
    all &= report(6, "stochastic domination", domination());
    all &= report(7, "conditional Poisson law", conditional_poisson());
    all &= report(8, "repair map audit", repair_audit());
    let primal = dimer_run(DomainKind::PrimalRect, 7, 109, true);
    all &= report(9, "dimerization signature", dimerization(&primal));
    all &= report(10, "perimeter tail", perimeter_tail(&primal));
    all &= report(11, "mirror model", mirror_model());
    all &= report(12, "continuum bridge", continuum_bridge());
    if !all {
        std::process::exit(1);
    }
}
