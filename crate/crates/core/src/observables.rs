//! Estimators over sample streams: quantum expectations from loops, the
//! dimerization order parameter, perimeter tails, correlation decay and
//! stochastic domination audits.

use serde::Serialize;
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::clusters::{boundary_component, build_clusters, classify_trivial};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Parity};
use crate::linkconfig::{LinkConfig, SimParams};
use crate::loops::{pairing_at, trace_loops};
use crate::quantum::{ObsEntry, ObservableSpec};
use crate::stats::{estimate, linear_fit, EstimatorResult, LinearFit};

/// Largest number of cut points the compatibility sum accepts.
pub const MAX_SUPPORT: usize = 4;

/// Observable whose sites may sit at different times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointObservable {
    pub points: Vec<(i64, f64)>,
    pub entries: Vec<ObsEntry>,
}

impl PointObservable {
    pub fn at_time(obs: &ObservableSpec, t: f64) -> PointObservable {
        PointObservable { points: obs.sites.iter().map(|&x| (x, t)).collect(), entries: obs.entries.clone() }
    }

    /// Tensor product of two observables on disjoint points.
    pub fn tensor(&self, other: &PointObservable) -> Result<PointObservable> {
        if self.points.iter().any(|p| other.points.contains(p)) {
            return Err(Error::InvalidParameter("tensor factors share a point".into()));
        }
        let mut points = self.points.clone();
        points.extend(&other.points);
        let mut entries = Vec::with_capacity(self.entries.len() * other.entries.len());
        for a in &self.entries {
            for b in &other.entries {
                let mut minus = a.minus.clone();
                minus.extend(&b.minus);
                let mut plus = a.plus.clone();
                plus.extend(&b.plus);
                entries.push(ObsEntry { minus, plus, value: a.value * b.value });
            }
        }
        Ok(PointObservable { points, entries })
    }
}

/// `Σ_entries A · n^{-ℓ(π)} · 1{π ∼ (i⁻, i⁺)}` for one configuration.
pub fn loop_term(cfg: &LinkConfig, n: usize, obs: &PointObservable) -> Result<f64> {
    if obs.points.len() > MAX_SUPPORT {
        return Err(Error::Unsupported(format!("{} cut points exceed {MAX_SUPPORT}", obs.points.len())));
    }
    let beta = cfg.domain().beta();
    let mut last = None;
    for attempt in 0..8 {
        let shift = attempt as f64 * 1e-9 * beta;
        let pts: Vec<(i64, f64)> = obs.points.iter().map(|&(x, t)| (x, t + shift)).collect();
        match pairing_at(cfg, &pts) {
            Ok(p) => {
                let weight = (n as f64).powi(-(p.ell() as i32));
                let pairs = p.pairs();
                let colour = |e: &ObsEntry, end: usize| if end % 2 == 0 { e.minus[end / 2] } else { e.plus[end / 2] };
                let sum: f64 = obs
                    .entries
                    .iter()
                    .filter(|e| pairs.iter().all(|&(a, b)| colour(e, a) == colour(e, b)))
                    .map(|e| e.value)
                    .sum();
                return Ok(weight * sum);
            }
            Err(e @ Error::BadPoint { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Per-sample terms averaged over the given cut times.
pub fn loop_series(samples: &[LinkConfig], n: usize, obs: &ObservableSpec, times: &[f64]) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("need at least one cut time".into()));
    }
    obs.validate(n)?;
    let probes: Vec<PointObservable> = times.iter().map(|&t| PointObservable::at_time(obs, t)).collect();
    samples
        .iter()
        .map(|cfg| {
            let mut acc = 0.0;
            for p in &probes {
                acc += loop_term(cfg, n, p)?;
            }
            Ok(acc / probes.len() as f64)
        })
        .collect()
}

/// Loop-side estimate of `⟨A⟩`, with `A` placed at every time in `times`.
pub fn loop_estimator(samples: &[LinkConfig], n: usize, obs: &ObservableSpec, times: &[f64]) -> Result<EstimatorResult> {
    estimate(&loop_series(samples, n, obs, times)?)
}

/// Probe times for ψ: eight evenly spaced times in the central half of `[t_min, t_max]`.
pub fn probe_times(domain: &Domain) -> Vec<f64> {
    let b = domain.beta();
    (0..8).map(|i| domain.t_min() + 0.25 * b + 0.5 * b * (i as f64 + 0.5) / 8.0).collect()
}

/// Edges whose centre lies in the central half of the chain.
pub fn probe_edges(domain: &Domain) -> Vec<crate::geometry::Edge> {
    let half = domain.l() as f64 / 2.0;
    domain.edges().filter(|e| (e.center() - 0.5).abs() <= half / 2.0 + 1e-12).collect()
}

/// `ψ = ρ_primal − ρ_dual` for one configuration, where `ρ_p` is the
/// fraction of probes on parity-`p` edges inside a small trivial loop on
/// that edge.
pub fn dimer_psi(cfg: &LinkConfig, params: &SimParams) -> f64 {
    let d = *cfg.domain();
    let decomp = trace_loops(cfg);
    let trivial = classify_trivial(&decomp, params);
    let times = probe_times(&d);
    let mut hit = [0usize; 2];
    let mut total = [0usize; 2];
    for e in probe_edges(&d) {
        let p = e.parity() as usize;
        let on_edge: Vec<_> = trivial.iter().filter(|t| t.small && t.edge == e).collect();
        for &t in &times {
            total[p] += 1;
            if on_edge.iter().any(|tl| tl.spans(t, d.beta())) {
                hit[p] += 1;
            }
        }
    }
    let rho = |p: Parity| {
        let i = p as usize;
        if total[i] == 0 {
            0.0
        } else {
            hit[i] as f64 / total[i] as f64
        }
    };
    rho(Parity::Primal) - rho(Parity::Dual)
}

pub fn dimer_order_parameter(samples: &[LinkConfig], params: &SimParams) -> Result<EstimatorResult> {
    estimate(&samples.iter().map(|c| dimer_psi(c, params)).collect::<Vec<_>>())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailTable {
    /// `(v, P̂[perimeter > v])`.
    pub points: Vec<(f64, f64)>,
    pub fit: LinearFit,
    /// Points entering the fit.
    pub fit_range: (f64, f64),
    pub n_samples: usize,
}

/// Perimeter of `𝒞(x₀)` for one configuration.
pub fn perimeter_of(cfg: &LinkConfig, params: &SimParams, x0: (i64, f64)) -> Result<f64> {
    let report = build_clusters(cfg, params)?;
    Ok(boundary_component(&report, x0)?.perimeter)
}

/// Empirical survival function of perimeters on a grid of `grid` points
/// up to the largest value, and a least-squares fit of its logarithm over
/// the points with `25/N ≤ P̂ < 1`.
pub fn perimeter_tail_from(perimeters: &[f64], grid: usize) -> Result<TailTable> {
    let n = perimeters.len();
    if n == 0 || grid < 2 {
        return Err(Error::InsufficientData("no perimeters".into()));
    }
    let mut sorted = perimeters.to_vec();
    sorted.sort_by(f64::total_cmp);
    let vmax = *sorted.last().unwrap();
    let points: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let v = vmax * i as f64 / (grid - 1) as f64;
            let above = n - sorted.partition_point(|&p| p <= v);
            (v, above as f64 / n as f64)
        })
        .collect();
    let floor = 25.0 / n as f64;
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, s)| s >= floor && s > 0.0 && s < 1.0).collect();
    if usable.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable tail points, need 4", usable.len())));
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailTable { points, fit, fit_range: (xs[0], *xs.last().unwrap()), n_samples: n })
}

pub fn perimeter_tail(samples: &[LinkConfig], params: &SimParams, x0: (i64, f64), grid: usize) -> Result<TailTable> {
    let per: Vec<f64> = samples.iter().map(|c| perimeter_of(c, params, x0)).collect::<Result<_>>()?;
    perimeter_tail_from(&per, grid)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationPoint {
    pub dx: i64,
    pub dt: f64,
    pub truncated: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub points: Vec<CorrelationPoint>,
    /// Fit of `ln |⟨A; B⟩|` against `|dx| + |dt|` over points exceeding two
    /// standard errors; `None` with fewer than three such points.
    pub fit: Option<LinearFit>,
}

/// Truncated correlations `⟨A(t); B(t+dt)⟩` with `B` translated by `dx`.
pub fn correlation_decay(
    samples: &[LinkConfig],
    n: usize,
    a: &ObservableSpec,
    b: &ObservableSpec,
    t: f64,
    separations: &[(i64, f64)],
) -> Result<CorrelationTable> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 samples".into()));
    }
    a.validate(n)?;
    b.validate(n)?;
    let pa = PointObservable::at_time(a, t);
    let sa: Vec<f64> = samples.iter().map(|c| loop_term(c, n, &pa)).collect::<Result<_>>()?;
    let ea = estimate(&sa)?;
    let mut points = Vec::with_capacity(separations.len());
    for &(dx, dt) in separations {
        let pb = PointObservable::at_time(&b.translated(dx), t + dt);
        for &(x, _) in &pb.points {
            if samples[0].domain().site_index(x).is_none() {
                return Err(Error::InvalidParameter(format!("translated observable leaves the domain at site {x}")));
            }
        }
        let pab = pa.tensor(&pb)?;
        let sb: Vec<f64> = samples.iter().map(|c| loop_term(c, n, &pb)).collect::<Result<_>>()?;
        let sab: Vec<f64> = samples.iter().map(|c| loop_term(c, n, &pab)).collect::<Result<_>>()?;
        let (eb, eab) = (estimate(&sb)?, estimate(&sab)?);
        let truncated = eab.mean - ea.mean * eb.mean;
        let std_error =
            (eab.std_error.powi(2) + (eb.mean * ea.std_error).powi(2) + (ea.mean * eb.std_error).powi(2)).sqrt();
        points.push(CorrelationPoint { dx, dt, truncated, std_error });
    }
    let usable: Vec<&CorrelationPoint> = points.iter().filter(|p| p.truncated.abs() > 2.0 * p.std_error).collect();
    let fit = if usable.len() >= 3 {
        let xs: Vec<f64> = usable.iter().map(|p| p.dx.abs() as f64 + p.dt.abs()).collect();
        let ys: Vec<f64> = usable.iter().map(|p| p.truncated.abs().ln()).collect();
        linear_fit(&xs, &ys).ok()
    } else {
        None
    };
    Ok(CorrelationTable { points, fit })
}

/// Space-time window: edges `x_lo..=x_hi` (by left site) over `[t_lo, t_hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub x_lo: i64,
    pub x_hi: i64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Window {
    pub fn area(&self, domain: &Domain) -> f64 {
        let edges = (self.x_lo..=self.x_hi).filter(|&x| domain.edge_index(crate::geometry::Edge::new(x)).is_some()).count();
        edges as f64 * (self.t_hi - self.t_lo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationFlag {
    pub window: usize,
    pub k: u64,
    pub empirical: f64,
    pub poisson: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationReport {
    pub tests: usize,
    pub flags: Vec<DominationFlag>,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Compare window-count tails with those of `Poisson(n·|window|)` for `k`
/// up to the Poisson 99.9th percentile. A flag is raised when the empirical
/// tail exceeds the Poisson tail by more than three standard errors; the
/// error is the larger of the binned error of the indicator series and the
/// binomial error at the Poisson tail.
pub fn domination_check(samples: &[LinkConfig], n: f64, windows: &[Window]) -> Result<DominationReport> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientData("no samples".into()));
    };
    let d = *first.domain();
    let big_n = samples.len() as f64;
    let mut report = DominationReport { tests: 0, flags: Vec::new() };
    for (wi, w) in windows.iter().enumerate() {
        if !(d.contains_time(w.t_lo) || w.t_lo == d.t_min()) || w.t_hi > d.t_max() || w.t_hi <= w.t_lo {
            return Err(Error::InvalidParameter(format!("window {wi} lies outside the domain")));
        }
        let mean = n * w.area(&d);
        let pois = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let k_top = pois.inverse_cdf(0.999);
        let counts: Vec<u64> =
            samples.iter().map(|c| c.count_in_window(w.x_lo, w.x_hi, w.t_lo, w.t_hi) as u64).collect();
        for k in 1..=k_top {
            let ind: Vec<f64> = counts.iter().map(|&c| if c >= k { 1.0 } else { 0.0 }).collect();
            let empirical = ind.iter().sum::<f64>() / big_n;
            let poisson = pois.sf(k - 1);
            let binned = if samples.len() >= 2 { estimate(&ind)?.std_error } else { 0.0 };
            let std_error = binned.max((poisson * (1.0 - poisson) / big_n).sqrt());
            report.tests += 1;
            if empirical - poisson > 3.0 * std_error {
                report.flags.push(DominationFlag { window: wi, k, empirical, poisson, std_error });
            }
        }
    }
    Ok(report)
}
