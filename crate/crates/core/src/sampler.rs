//! Birth/death/flip Metropolis–Hastings chain targeting `ℙⁿ ∝ n^ℓ dℙ₁`,
//! plus direct samplers for the conditional law on the all-bars event.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Parity};
use crate::linkconfig::{random_time, sample_poisson, Link, LinkConfig, LinkKind, Move, SimParams};
use crate::loops::{delta_loops, trace_loops};
use crate::stats::estimate;

/// Sweeps between consistency audits of the cached loop count.
pub const AUDIT_INTERVAL: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MoveMix {
    pub birth: f64,
    pub death: f64,
    pub flip: f64,
}

impl MoveMix {
    pub fn for_u(u: f64) -> MoveMix {
        if u == 0.0 || u == 1.0 {
            MoveMix { birth: 0.5, death: 0.5, flip: 0.0 }
        } else {
            MoveMix { birth: 0.4, death: 0.4, flip: 0.2 }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MoveType {
    Birth,
    Death,
    Flip,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Proposal {
    Birth(Link),
    Death(usize),
    Flip(usize),
}

impl Proposal {
    pub fn as_move(&self) -> Move {
        match *self {
            Proposal::Birth(l) => Move::Insert(l),
            Proposal::Death(i) => Move::Delete(i),
            Proposal::Flip(i) => Move::Flip(i),
        }
    }
}

/// Unclamped Hastings ratio of a proposal given its loop change.
pub fn hastings_ratio(cfg: &LinkConfig, proposal: &Proposal, delta_ell: i64, params: &SimParams) -> f64 {
    let nu = cfg.domain().total_intensity();
    let w = params.n.powi(delta_ell as i32);
    match *proposal {
        Proposal::Birth(_) => nu / (cfg.len() as f64 + 1.0) * w,
        Proposal::Death(_) => cfg.len() as f64 / nu * w,
        Proposal::Flip(i) => {
            let old = cfg.link(i).map(|l| l.kind).unwrap_or(LinkKind::Bar);
            old.flipped().weight(params.u) / old.weight(params.u) * w
        }
    }
}

pub fn acceptance_probability(cfg: &LinkConfig, proposal: &Proposal, delta_ell: i64, params: &SimParams) -> f64 {
    hastings_ratio(cfg, proposal, delta_ell, params).min(1.0)
}

/// Density of proposing `proposal` from `cfg`: births with respect to
/// Lebesgue measure on edges × time (and counting on marks), deaths and
/// flips with respect to counting measure.
pub fn proposal_density(cfg: &LinkConfig, proposal: &Proposal, params: &SimParams, mix: &MoveMix) -> f64 {
    let d = cfg.domain();
    match *proposal {
        Proposal::Birth(l) => mix.birth / d.total_intensity() * l.kind.weight(params.u),
        Proposal::Death(_) => mix.death / cfg.len() as f64,
        Proposal::Flip(_) => mix.flip / cfg.len() as f64,
    }
}

/// Log density of `ℙⁿ` relative to the unit-rate unmarked Poisson process,
/// up to an additive constant.
pub fn log_weight(cfg: &LinkConfig, params: &SimParams) -> f64 {
    let marks: f64 = cfg.links().map(|l| l.kind.weight(params.u).ln()).sum();
    marks + trace_loops(cfg).ell() as f64 * params.n.ln()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Tallies {
    pub birth: MoveTally,
    pub death: MoveTally,
    pub flip: MoveTally,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub burnin: u64,
    pub sweeps: u64,
    pub thin: u64,
}

impl Schedule {
    pub fn samples(&self) -> u64 {
        self.sweeps / self.thin.max(1)
    }
}

#[derive(Clone, Debug)]
pub struct Chain {
    cfg: LinkConfig,
    ell: usize,
    params: SimParams,
    mix: MoveMix,
    rng: ChaCha8Rng,
    sweeps: u64,
    tallies: Tallies,
}

pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Chain {
    pub fn new(cfg: LinkConfig, params: SimParams, seed: u64, stream: u64) -> Chain {
        let ell = trace_loops(&cfg).ell();
        Chain {
            cfg,
            ell,
            params,
            mix: MoveMix::for_u(params.u),
            rng: chain_rng(seed, stream),
            sweeps: 0,
            tallies: Tallies::default(),
        }
    }

    pub fn from_empty(domain: Domain, params: SimParams, seed: u64, stream: u64) -> Chain {
        Chain::new(LinkConfig::empty(domain), params, seed, stream)
    }

    pub fn cfg(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn tallies(&self) -> &Tallies {
        &self.tallies
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn steps_per_sweep(&self) -> u64 {
        self.cfg.domain().total_intensity().ceil().max(1.0) as u64
    }

    fn propose(&mut self) -> (MoveType, Option<Proposal>) {
        let r: f64 = self.rng.random();
        let n = self.cfg.len();
        if r < self.mix.birth {
            let d = *self.cfg.domain();
            let edge = d.edge_at(self.rng.random_range(0..d.num_edges()));
            let t = random_time(&d, &mut self.rng);
            let kind = if self.rng.random::<f64>() < self.params.u { LinkKind::Cross } else { LinkKind::Bar };
            (MoveType::Birth, Some(Proposal::Birth(Link { edge, t, kind })))
        } else if r < self.mix.birth + self.mix.death {
            (MoveType::Death, (n > 0).then(|| Proposal::Death(self.rng.random_range(0..n))))
        } else {
            (MoveType::Flip, (n > 0).then(|| Proposal::Flip(self.rng.random_range(0..n))))
        }
    }

    fn tally(&mut self, kind: MoveType) -> &mut MoveTally {
        match kind {
            MoveType::Birth => &mut self.tallies.birth,
            MoveType::Death => &mut self.tallies.death,
            MoveType::Flip => &mut self.tallies.flip,
        }
    }

    /// One elementary Metropolis–Hastings step. Returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        let (kind, proposal) = self.propose();
        self.tally(kind).proposed += 1;
        let Some(p) = proposal else { return false };
        let mv = p.as_move();
        let Ok(delta) = delta_loops(&self.cfg, &mv) else { return false };
        let a = acceptance_probability(&self.cfg, &p, delta, &self.params);
        if self.rng.random::<f64>() < a && self.cfg.apply_move_in_place(&mv).is_ok() {
            self.ell = (self.ell as i64 + delta) as usize;
            self.tally(kind).accepted += 1;
            true
        } else {
            false
        }
    }

    pub fn sweep(&mut self) -> Result<()> {
        for _ in 0..self.steps_per_sweep() {
            self.step();
        }
        self.sweeps += 1;
        if self.sweeps % AUDIT_INTERVAL == 0 {
            self.audit()?;
        }
        Ok(())
    }

    pub fn audit(&self) -> Result<()> {
        let full = trace_loops(&self.cfg).ell();
        if full != self.ell {
            return Err(Error::Invariant(format!(
                "cached loop count {} differs from full trace {} after {} sweeps",
                self.ell, full, self.sweeps
            )));
        }
        Ok(())
    }

    /// Burn in, then call `visit` every `thin` sweeps.
    pub fn run(&mut self, schedule: &Schedule, mut visit: impl FnMut(&Chain)) -> Result<()> {
        for _ in 0..schedule.burnin {
            self.sweep()?;
        }
        let thin = schedule.thin.max(1);
        for k in 1..=schedule.sweeps {
            self.sweep()?;
            if k % thin == 0 {
                visit(self);
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> String {
        let mut s = self.cfg.serialize();
        let _ = writeln!(s, "# sweep={}", self.sweeps);
        let seed: String = self.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(s, "# rng={}:{:016x}:{:032x}", seed, self.rng.get_stream(), self.rng.get_word_pos());
        s
    }

    pub fn restore(text: &str, params: SimParams) -> Result<Chain> {
        let cfg = LinkConfig::deserialize(text)?;
        let (mut sweeps, mut rng) = (None, None);
        for (i, line) in text.lines().enumerate() {
            let perr = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            if let Some(v) = line.trim().strip_prefix("# sweep=") {
                sweeps = Some(v.parse::<u64>().map_err(|_| perr("bad sweep counter"))?);
            } else if let Some(v) = line.trim().strip_prefix("# rng=") {
                let parts: Vec<&str> = v.split(':').collect();
                if parts.len() != 3 || parts[0].len() != 64 {
                    return Err(perr("rng state needs seed:stream:word_pos"));
                }
                let mut seed = [0u8; 32];
                for (k, b) in seed.iter_mut().enumerate() {
                    *b = u8::from_str_radix(&parts[0][2 * k..2 * k + 2], 16).map_err(|_| perr("bad seed hex"))?;
                }
                let stream = u64::from_str_radix(parts[1], 16).map_err(|_| perr("bad stream hex"))?;
                let pos = u128::from_str_radix(parts[2], 16).map_err(|_| perr("bad word position hex"))?;
                let mut r = ChaCha8Rng::from_seed(seed);
                r.set_stream(stream);
                r.set_word_pos(pos);
                rng = Some(r);
            }
        }
        let (Some(sweeps), Some(rng)) = (sweeps, rng) else {
            return Err(Error::Parse { line: 0, msg: "checkpoint footer missing sweep or rng line".into() });
        };
        let mut chain = Chain::new(cfg, params, 0, 0);
        chain.sweeps = sweeps;
        chain.rng = rng;
        Ok(chain)
    }
}

/// Run a pilot of `pilot_sweeps`, measure the autocorrelation time of ℓ in
/// sweeps, and suggest a burn-in of 100 τ and thinning of ⌈τ⌉.
pub fn pilot_schedule(chain: &mut Chain, pilot_sweeps: u64, sweeps: u64) -> Result<Schedule> {
    let mut series = Vec::with_capacity(pilot_sweeps as usize);
    for _ in 0..pilot_sweeps {
        chain.sweep()?;
        series.push(chain.ell() as f64);
    }
    let tau = estimate(&series).map(|r| r.autocorrelation_time).unwrap_or(1.0).max(0.5);
    Ok(Schedule { burnin: (100.0 * tau).ceil() as u64, sweeps, thin: tau.ceil() as u64 })
}

fn require_rect(domain: &Domain) -> Result<Parity> {
    domain
        .boundary_parity()
        .ok_or_else(|| Error::Unsupported("the all-bars conditional law needs a rectangular domain".into()))
}

/// Direct sampler for `ℙⁿ` conditioned on every link being a bar on a
/// boundary-parity edge: bars at rate `(1-u)n` on those edges.
pub fn sample_t1<R: Rng + ?Sized>(params: &SimParams, domain: &Domain, rng: &mut R) -> Result<LinkConfig> {
    let p = require_rect(domain)?;
    Ok(sample_poisson(domain, 0.0, (1.0 - params.u) * params.n, |e| e.parity() == p, rng))
}

pub fn is_t1(cfg: &LinkConfig) -> bool {
    match cfg.domain().boundary_parity() {
        Some(p) => cfg.links().all(|l| l.kind == LinkKind::Bar && l.edge.parity() == p),
        None => false,
    }
}

/// Rejection sampler for the same law, used as an oracle: propose from the
/// Poisson process with rates `(un, (1-u)n)`, accept with probability
/// `n^{ℓ - ℓ₀ - |ω|}`, and keep only all-bars configurations.
pub fn sample_t1_rejection<R: Rng + ?Sized>(
    params: &SimParams,
    domain: &Domain,
    rng: &mut R,
    budget: u64,
) -> Result<LinkConfig> {
    require_rect(domain)?;
    if params.n < 1.0 {
        return Err(Error::InvalidParameter("rejection sampler needs n >= 1".into()));
    }
    let ell0 = trace_loops(&LinkConfig::empty(*domain)).ell() as i64;
    for _ in 0..budget {
        let w = sample_poisson(domain, params.u * params.n, (1.0 - params.u) * params.n, |_| true, rng);
        let ell = trace_loops(&w).ell() as i64;
        let expo = ell - ell0 - w.len() as i64;
        if expo > 0 {
            return Err(Error::Invariant(format!("loop count exceeded ℓ₀ + |ω| by {expo}")));
        }
        if rng.random::<f64>() < params.n.powi(expo as i32) && is_t1(&w) {
            return Ok(w);
        }
    }
    Err(Error::Budget(format!("no acceptance within {budget} proposals")))
}
