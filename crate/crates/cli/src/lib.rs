//! Subcommands of the `dimerloop` binary.

pub mod config;
pub mod render;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dimerloop::clusters::{build_clusters, count_preimages, repair};
use dimerloop::mirror::{black_white_value, mirror_sweep, MirrorConfig as MirrorState, MirrorLattice, Mirror};
use dimerloop::observables::{dimer_psi, loop_series, perimeter_of, perimeter_tail_from};
use dimerloop::quantum::{build_loop_model, build_model, loop_parameters, ObservableSpec};
use dimerloop::sampler::{chain_rng, Chain};
use dimerloop::smallexact::partition_series;
use dimerloop::stats::{estimate, EstimatorResult};
use dimerloop::{Domain, DomainKind, Link, LinkConfig, LinkKind, SimParams};

pub use config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, configuration or guard violations: exit code 1.
    Validation(String),
    /// Failures while running, including failed checks: exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<dimerloop::Error> for CliError {
    fn from(e: dimerloop::Error) -> Self {
        use dimerloop::Error as E;
        match e {
            E::InvalidDomain(_)
            | E::InvalidParameter(_)
            | E::Parse { .. }
            | E::Budget(_)
            | E::DimensionGuard { .. }
            | E::Unsupported(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// One line of a sample stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub chain: usize,
    pub index: u64,
    pub kind: String,
    #[serde(rename = "L")]
    pub l: i64,
    pub beta: f64,
    pub ell: usize,
    pub links: Vec<(i64, f64, char)>,
}

impl SampleRecord {
    pub fn from_chain(chain: usize, index: u64, ch: &Chain) -> SampleRecord {
        let d = ch.cfg().domain();
        SampleRecord {
            chain,
            index,
            kind: d.kind().to_string(),
            l: d.l(),
            beta: d.beta(),
            ell: ch.ell(),
            links: ch.cfg().links().map(|l| (l.edge.x_left, l.t, l.kind.symbol())).collect(),
        }
    }

    pub fn to_config(&self) -> CliResult<LinkConfig> {
        let kind: DomainKind = self.kind.parse()?;
        let domain = Domain::new(kind, self.l, self.beta)?;
        let links = self
            .links
            .iter()
            .map(|&(x, t, k)| match k {
                'B' => Ok(Link::new(x, t, LinkKind::Bar)),
                'X' => Ok(Link::new(x, t, LinkKind::Cross)),
                _ => Err(CliError::Validation(format!("bad link kind '{k}' in sample"))),
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(LinkConfig::from_links(domain, links)?)
    }
}

/// Compact view of an estimator for output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std_error: f64,
    pub tau: f64,
    pub samples: usize,
}

impl From<EstimatorResult> for Summary {
    fn from(e: EstimatorResult) -> Self {
        Summary { mean: e.mean, std_error: e.std_error, tau: e.autocorrelation_time, samples: e.n_samples }
    }
}

fn summarize(xs: &[f64]) -> CliResult<Summary> {
    Ok(estimate(xs)?.into())
}

/// Write `text` to `out`, or to stdout.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable output");
    s.push('\n');
    s
}

/// Run one chain per stream on its own thread; results come back in
/// stream order.
pub fn run_chains<T: Send>(
    cfg: &RunConfig,
    domain: Domain,
    params: SimParams,
    visit: impl Fn(usize, u64, &Chain) -> CliResult<T> + Sync,
) -> CliResult<Vec<Vec<T>>> {
    let schedule = cfg.schedule()?;
    let seed = cfg.mcmc.seed;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.mcmc.chains)
            .map(|k| {
                let visit = &visit;
                scope.spawn(move || -> CliResult<Vec<T>> {
                    let mut chain = Chain::from_empty(domain, params, seed, k as u64);
                    let mut out = Vec::new();
                    let mut err = None;
                    let mut index = 0;
                    chain.run(&schedule, |ch| {
                        if err.is_none() {
                            match visit(k, index, ch) {
                                Ok(v) => out.push(v),
                                Err(e) => err = Some(e),
                            }
                        }
                        index += 1;
                    })?;
                    err.map_or(Ok(out), Err)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().map_err(|_| CliError::Runtime("worker panicked".into()))?).collect()
    })
}

pub fn read_samples(path: &Path) -> CliResult<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Validation(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn cmd_sample(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let records = run_chains(cfg, cfg.domain()?, cfg.params()?, |k, i, ch| Ok(SampleRecord::from_chain(k, i, ch)))?;
    let mut text = String::new();
    for r in records.iter().flatten() {
        text.push_str(&serde_json::to_string(r).expect("serialisable record"));
        text.push('\n');
    }
    emit(out, &text)
}

fn samples_or_run(cfg: &RunConfig, input: Option<&Path>) -> CliResult<Vec<LinkConfig>> {
    match input {
        Some(p) => read_samples(p)?.iter().map(SampleRecord::to_config).collect(),
        None => Ok(run_chains(cfg, cfg.domain()?, cfg.params()?, |_, _, ch| Ok(ch.cfg().clone()))?
            .into_iter()
            .flatten()
            .collect()),
    }
}

/// Evenly spread times across the time range.
fn spread_times(d: &Domain, k: usize) -> Vec<f64> {
    (0..k).map(|i| d.t_min() + d.beta() * (i as f64 + 0.5) / k as f64).collect()
}

#[derive(Serialize)]
struct Measurement {
    samples: usize,
    ell: Summary,
    links: Summary,
    psi: Summary,
    small_loops: Summary,
    vol_outside: Summary,
    q_edge0: Option<Summary>,
}

pub fn cmd_measure(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let params = cfg.params()?;
    let samples = samples_or_run(cfg, input)?;
    if samples.is_empty() {
        return Err(CliError::Validation("no samples to measure".into()));
    }
    let mut cols: [Vec<f64>; 5] = Default::default();
    for s in &samples {
        let r = build_clusters(s, &params)?;
        let sum = r.summary();
        cols[0].push(sum.ell as f64);
        cols[1].push(s.len() as f64);
        cols[2].push(dimer_psi(s, &params));
        cols[3].push(sum.num_small as f64);
        cols[4].push(sum.vol_outside);
    }
    let q_edge0 = match cfg.integer_n() {
        Ok(n) => {
            let times = spread_times(samples[0].domain(), 8);
            let series = loop_series(&samples, n, &ObservableSpec::q_projector(0, n), &times)?;
            Some(summarize(&series)?)
        }
        Err(_) => None,
    };
    let m = Measurement {
        samples: samples.len(),
        ell: summarize(&cols[0])?,
        links: summarize(&cols[1])?,
        psi: summarize(&cols[2])?,
        small_loops: summarize(&cols[3])?,
        vol_outside: summarize(&cols[4])?,
        q_edge0,
    };
    emit(out, &json(&m))
}

#[derive(Serialize)]
struct EdCheck {
    n: usize,
    l: i64,
    u: f64,
    beta: f64,
    loop_u: f64,
    loop_beta: f64,
    exact: f64,
    estimate: Summary,
    sigma_distance: f64,
}

/// Literal `⟨Q⟩` on the edge `(0, 1)` at inverse temperature β against the
/// loop estimator at the matched loop parameters.
pub fn cmd_ed_check(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let n = cfg.integer_n()?;
    let (l, u, beta) = (cfg.lattice.l, cfg.model.u, cfg.lattice.beta);
    let obs = ObservableSpec::q_projector(0, n);
    let exact = build_model(n, l, u)?.gibbs_expectation(&obs, beta)?;
    let lp = loop_parameters(u, n as f64, beta)?;
    let domain = Domain::new(DomainKind::Torus, l, lp.beta)?;
    let params = SimParams::new(lp.u, n as f64)?;
    let times = spread_times(&domain, 8);
    let series: Vec<f64> = run_chains(cfg, domain, params, |_, _, ch| {
        Ok(loop_series(std::slice::from_ref(ch.cfg()), n, &obs, &times)?[0])
    })?
    .into_iter()
    .flatten()
    .collect();
    let est = summarize(&series)?;
    let sigma_distance = if est.std_error > 0.0 { (est.mean - exact).abs() / est.std_error } else { f64::INFINITY };
    let report = EdCheck { n, l, u, beta, loop_u: lp.u, loop_beta: lp.beta, exact, estimate: est, sigma_distance };
    println!("exact <Q>  = {:.6}", report.exact);
    println!("loop  <Q>  = {:.6} ± {:.6} ({} samples)", report.estimate.mean, report.estimate.std_error, report.estimate.samples);
    println!("distance   = {:.2} sigma", report.sigma_distance);
    if let Some(p) = out {
        emit(Some(p), &json(&report))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SeriesCheck {
    trace: f64,
    series: f64,
    tail_bound: f64,
    difference: f64,
    k_max: usize,
    passed: bool,
}

/// `Tr e^{-βH̃}` against the truncated link-number series on the torus.
pub fn cmd_series_check(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let n = cfg.integer_n()?;
    let (l, u, beta) = (cfg.lattice.l, cfg.model.u, cfg.lattice.beta);
    let trace = build_loop_model(n, l, u)?.partition_function(beta);
    let domain = Domain::new(DomainKind::Torus, l, beta)?;
    let s = partition_series(&domain, u, n as f64, cfg.series.k_max)?;
    let difference = (trace - s.value).abs();
    let report = SeriesCheck {
        trace,
        series: s.value,
        tail_bound: s.tail_bound,
        difference,
        k_max: s.k_max,
        passed: difference <= s.tail_bound + 1e-8,
    };
    emit(out, &json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("series differs from trace by {difference:e} > tail bound {:e}", s.tail_bound)))
    }
}

#[derive(Serialize, Default)]
struct AuditRow {
    delta_ell: i64,
    exposed: usize,
    out_size: usize,
    holds: bool,
    preimages: Option<u64>,
    bound: Option<f64>,
    contains_target: Option<bool>,
}

#[derive(Serialize)]
struct AuditReport {
    samples: usize,
    failures: usize,
    first_failures: Vec<String>,
    enumerated: usize,
    preimages_contain_target: bool,
    preimages_within_bound: bool,
    mean_delta_ell: f64,
}

pub fn cmd_repair_audit(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let domain = cfg.domain()?;
    if domain.kind() != DomainKind::PrimalRect {
        return Err(CliError::Validation("repair-audit needs lattice.kind = primal-rect".into()));
    }
    let params = cfg.params()?;
    let per_chain = cfg.audit.preimages.div_ceil(cfg.mcmc.chains.max(1));
    let enumerated = std::sync::atomic::AtomicUsize::new(0);
    let rows = run_chains(cfg, domain, params, |_, _, ch| {
        let r = repair(ch.cfg(), &params)?;
        let c = &r.checks;
        let mut row = AuditRow { delta_ell: c.delta_ell, exposed: c.exposed, out_size: c.out_bar_real, holds: c.all_hold(), ..Default::default() };
        if c.out_bar_real <= cfg.audit.max_out && enumerated.load(std::sync::atomic::Ordering::Relaxed) < per_chain * cfg.mcmc.chains {
            enumerated.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let p = count_preimages(&r, &params, Some(ch.cfg()))?;
            row.preimages = Some(p.preimages);
            row.bound = Some(p.bound);
            row.contains_target = Some(p.contains_target);
        }
        Ok(row)
    })?;
    let rows: Vec<AuditRow> = rows.into_iter().flatten().collect();
    let failures: Vec<String> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.holds)
        .map(|(i, r)| format!("sample {i}: delta_ell {} exposed {}", r.delta_ell, r.exposed))
        .collect();
    let enumerated: Vec<&AuditRow> = rows.iter().filter(|r| r.preimages.is_some()).collect();
    let report = AuditReport {
        samples: rows.len(),
        failures: failures.len(),
        first_failures: failures.iter().take(10).cloned().collect(),
        enumerated: enumerated.len(),
        preimages_contain_target: enumerated.iter().all(|r| r.contains_target == Some(true)),
        preimages_within_bound: enumerated.iter().all(|r| r.preimages.unwrap_or(0) as f64 <= r.bound.unwrap_or(0.0)),
        mean_delta_ell: rows.iter().map(|r| r.delta_ell as f64).sum::<f64>() / rows.len().max(1) as f64,
    };
    emit(out, &json(&report))?;
    if report.failures > 0 || !report.preimages_contain_target || !report.preimages_within_bound {
        return Err(CliError::Runtime(format!("repair audit failed on {} of {} samples", report.failures, report.samples)));
    }
    Ok(())
}

pub fn cmd_perimeter_tail(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let params = cfg.params()?;
    let x0 = (cfg.perimeter.site, cfg.perimeter.time);
    let perimeters: Vec<f64> = match input {
        Some(p) => read_samples(p)?
            .iter()
            .map(|r| Ok(perimeter_of(&r.to_config()?, &params, x0)?))
            .collect::<CliResult<_>>()?,
        None => run_chains(cfg, cfg.domain()?, params, |_, _, ch| Ok(perimeter_of(ch.cfg(), &params, x0)?))?
            .into_iter()
            .flatten()
            .collect(),
    };
    let table = perimeter_tail_from(&perimeters, cfg.perimeter.grid)?;
    let mut csv = String::from("perimeter,survival\n");
    for (v, s) in &table.points {
        csv.push_str(&format!("{v},{s}\n"));
    }
    emit(out, &csv)?;
    eprintln!(
        "slope {:.5} intercept {:.5} r2 {:.4} over [{}, {}] from {} samples",
        table.fit.slope, table.fit.intercept, table.fit.r_squared, table.fit_range.0, table.fit_range.1, table.n_samples
    );
    Ok(())
}

#[derive(Serialize)]
struct MirrorReport {
    width: i64,
    height: i64,
    colour: String,
    order: Summary,
}

pub fn cmd_mirror(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let m = &cfg.mirror;
    let params = cfg.mirror_params()?;
    let lattice = MirrorLattice::boxed(m.width, m.height, m.colour)?;
    let schedule = cfg.schedule()?;
    let values: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.mcmc.chains)
            .map(|k| {
                let lattice = lattice.clone();
                scope.spawn(move || -> CliResult<Vec<f64>> {
                    let mut rng = chain_rng(cfg.mcmc.seed, k as u64);
                    let mut state = MirrorState::uniform(lattice, Mirror::V);
                    for _ in 0..schedule.burnin {
                        mirror_sweep(&mut state, &params, &mut rng)?;
                    }
                    let mut v = Vec::new();
                    for s in 1..=schedule.sweeps {
                        mirror_sweep(&mut state, &params, &mut rng)?;
                        if s % schedule.thin == 0 {
                            v.push(black_white_value(&state));
                        }
                    }
                    Ok(v)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| CliError::Runtime("worker panicked".into()))?)
            .collect::<CliResult<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    let report = MirrorReport {
        width: m.width,
        height: m.height,
        colour: format!("{:?}", m.colour).to_lowercase(),
        order: summarize(&values)?,
    };
    emit(out, &json(&report))
}

pub fn cmd_render(cfg: &RunConfig, input: &Path, index: usize, clusters: bool, out: Option<&Path>) -> CliResult<()> {
    let records = read_samples(input)?;
    let rec = records
        .get(index)
        .ok_or_else(|| CliError::Validation(format!("index {index} out of range ({} samples)", records.len())))?;
    let lc = rec.to_config()?;
    let report = if clusters { Some(build_clusters(&lc, &cfg.params()?)?) } else { None };
    emit(out, &render::render_svg(&lc, report.as_ref()))
}
