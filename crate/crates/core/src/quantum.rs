//! Exact diagonalisation of `H = -Σ_x [u T + (1-u) Q]` on a short open
//! chain, used as the reference for the loop estimators.
//!
//! The loop measure with crosses at rate `u` and double-bars at rate `1-u`
//! corresponds to the double-bar operator `n·Q = Σ|b b⟩⟨a a|` and a unit
//! shift per edge: `H̃ = -Σ_x [u T + (1-u) n Q - 1]` satisfies
//! `Tr e^{-βH̃} = E₁[n^ℓ]` exactly (see [`build_loop_model`]). The two
//! Hamiltonians are related by [`LoopParameters`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2000;

/// Sparse operator on the sites `sites`: a sum of `value · |minus⟩⟨plus|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSpec {
    pub sites: Vec<i64>,
    pub entries: Vec<ObsEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObsEntry {
    pub minus: Vec<usize>,
    pub plus: Vec<usize>,
    pub value: f64,
}

fn colorings(k: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(k as u32);
    (0..total).map(move |mut c| {
        let mut v = vec![0; k];
        for slot in v.iter_mut().rev() {
            *slot = c % n;
            c /= n;
        }
        v
    })
}

impl ObservableSpec {
    pub fn elementary(sites: Vec<i64>, minus: Vec<usize>, plus: Vec<usize>) -> ObservableSpec {
        ObservableSpec { sites, entries: vec![ObsEntry { minus, plus, value: 1.0 }] }
    }

    pub fn identity(sites: Vec<i64>, n: usize) -> ObservableSpec {
        let entries = colorings(sites.len(), n)
            .map(|c| ObsEntry { minus: c.clone(), plus: c, value: 1.0 })
            .collect();
        ObservableSpec { sites, entries }
    }

    /// `Q = (1/n) Σ_{a,b} |b b⟩⟨a a|` on the edge `(x, x+1)`.
    pub fn q_projector(x: i64, n: usize) -> ObservableSpec {
        let mut entries = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                entries.push(ObsEntry { minus: vec![b, b], plus: vec![a, a], value: 1.0 / n as f64 });
            }
        }
        ObservableSpec { sites: vec![x, x + 1], entries }
    }

    /// Transposition `T |a b⟩ = |b a⟩` on the edge `(x, x+1)`.
    pub fn swap(x: i64, n: usize) -> ObservableSpec {
        let mut entries = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                entries.push(ObsEntry { minus: vec![b, a], plus: vec![a, b], value: 1.0 });
            }
        }
        ObservableSpec { sites: vec![x, x + 1], entries }
    }

    pub fn translated(&self, d: i64) -> ObservableSpec {
        ObservableSpec { sites: self.sites.iter().map(|x| x + d).collect(), entries: self.entries.clone() }
    }

    pub fn scaled(&self, c: f64) -> ObservableSpec {
        let mut o = self.clone();
        for e in &mut o.entries {
            e.value *= c;
        }
        o
    }

    /// Tensor product of operators with disjoint supports.
    pub fn product(&self, other: &ObservableSpec) -> Result<ObservableSpec> {
        if self.sites.iter().any(|x| other.sites.contains(x)) {
            return Err(Error::InvalidParameter("product needs disjoint supports".into()));
        }
        let mut sites = self.sites.clone();
        sites.extend(&other.sites);
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
        Ok(ObservableSpec { sites, entries })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let k = self.sites.len();
        if k == 0 {
            return Err(Error::InvalidParameter("observable needs a non-empty support".into()));
        }
        let mut s = self.sites.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != k {
            return Err(Error::InvalidParameter("observable support has repeated sites".into()));
        }
        for e in &self.entries {
            if e.minus.len() != k || e.plus.len() != k || e.minus.iter().chain(&e.plus).any(|&c| c >= n) {
                return Err(Error::InvalidParameter("observable entry does not match support or colours".into()));
            }
        }
        Ok(())
    }

    /// Dense `n^k × n^k` matrix of the local operator.
    pub fn local_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        self.validate(n)?;
        let dim = n.pow(self.sites.len() as u32);
        if dim > MAX_DIM {
            return Err(Error::DimensionGuard { dim, max: MAX_DIM });
        }
        let idx = |c: &[usize]| c.iter().fold(0, |acc, &x| acc * n + x);
        let mut m = DMatrix::zeros(dim, dim);
        for e in &self.entries {
            m[(idx(&e.minus), idx(&e.plus))] += e.value;
        }
        Ok(m)
    }

    /// Operator norm (largest singular value).
    pub fn norm(&self, n: usize) -> Result<f64> {
        let m = self.local_matrix(n)?;
        Ok(m.singular_values().iter().cloned().fold(0.0, f64::max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StateKind {
    Gibbs,
    Seeded,
}

#[derive(Clone, Debug)]
pub struct QuantumModel {
    n: usize,
    l: i64,
    u: f64,
    dim: usize,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    hamiltonian: DMatrix<f64>,
}

fn decode(mut b: usize, n: usize, len: usize) -> Vec<usize> {
    let mut c = vec![0; len];
    for slot in c.iter_mut().rev() {
        *slot = b % n;
        b /= n;
    }
    c
}

fn encode(c: &[usize], n: usize) -> usize {
    c.iter().fold(0, |acc, &x| acc * n + x)
}

fn check_u(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("u must lie in [0,1], got {u}")));
    }
    Ok(())
}

/// `H = -Σ_x [u T + (1-u) Q]`.
pub fn build_model(n: usize, l: i64, u: f64) -> Result<QuantumModel> {
    check_u(u)?;
    let mut m = build_general(n, l, u, 1.0 - u, 0.0)?;
    m.u = u;
    Ok(m)
}

/// `H̃ = -Σ_x [u T + (1-u) n Q - 1]`, the Hamiltonian whose Gibbs and seeded
/// states the loop measure at the same `(u, β)` represents.
pub fn build_loop_model(n: usize, l: i64, u: f64) -> Result<QuantumModel> {
    check_u(u)?;
    let mut m = build_general(n, l, u, (1.0 - u) * n as f64, 1.0)?;
    m.u = u;
    Ok(m)
}

/// Loop-measure parameters equivalent to `build_model(n, _, u)` at inverse
/// temperature `β`: `H = λ (H̃(u_loop) - |E|)` with `λ = u + (1-u)/n`, so
/// states agree at `β_loop = λ β` and `Tr e^{-βH} = e^{λβ|E|} Tr e^{-β_loop H̃}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LoopParameters {
    pub u: f64,
    pub beta: f64,
    pub scale: f64,
}

pub fn loop_parameters(u: f64, n: f64, beta: f64) -> Result<LoopParameters> {
    check_u(u)?;
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("n must be positive, got {n}")));
    }
    let scale = u + (1.0 - u) / n;
    Ok(LoopParameters { u: u / scale, beta: scale * beta, scale })
}

/// `H = -Σ_x [t_coef T + q_coef Q - shift]` with `Q = (1/n) Σ|b b⟩⟨a a|`.
pub fn build_general(n: usize, l: i64, t_coef: f64, q_coef: f64, shift: f64) -> Result<QuantumModel> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be a positive integer".into()));
    }
    if l < 1 {
        return Err(Error::InvalidParameter(format!("L must be >= 1, got {l}")));
    }
    let sites = (2 * l) as usize;
    let dim = (n as f64).powi(sites as i32);
    if dim > MAX_DIM as f64 {
        return Err(Error::DimensionGuard { dim: dim.min(usize::MAX as f64) as usize, max: MAX_DIM });
    }
    let dim = dim as usize;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for col in 0..dim {
        let c = decode(col, n, sites);
        for p in 0..sites - 1 {
            let mut s = c.clone();
            s.swap(p, p + 1);
            h[(encode(&s, n), col)] -= t_coef;
            h[(col, col)] += shift;
            if c[p] == c[p + 1] {
                for b in 0..n {
                    let mut s = c.clone();
                    s[p] = b;
                    s[p + 1] = b;
                    h[(encode(&s, n), col)] -= q_coef / n as f64;
                }
            }
        }
    }
    let eig = SymmetricEigen::new(h.clone());
    Ok(QuantumModel { n, l, u: f64::NAN, dim, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors, hamiltonian: h })
}

impl QuantumModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> i64 {
        self.l
    }

    /// The `u` the model was built from; NaN for [`build_general`].
    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    fn num_sites(&self) -> usize {
        (2 * self.l) as usize
    }

    fn lambda_min(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Nonzero entries `(row, col, value)` of an observable on the full chain.
    pub fn embed(&self, obs: &ObservableSpec) -> Result<Vec<(usize, usize, f64)>> {
        obs.validate(self.n)?;
        let positions: Vec<usize> = obs
            .sites
            .iter()
            .map(|&x| {
                let p = x + self.l - 1;
                if p < 0 || p as usize >= self.num_sites() {
                    Err(Error::InvalidParameter(format!("site {x} outside the chain")))
                } else {
                    Ok(p as usize)
                }
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for col in 0..self.dim {
            let c = decode(col, self.n, self.num_sites());
            for e in &obs.entries {
                if positions.iter().zip(&e.plus).all(|(&p, &a)| c[p] == a) {
                    let mut r = c.clone();
                    for (&p, &b) in positions.iter().zip(&e.minus) {
                        r[p] = b;
                    }
                    out.push((encode(&r, self.n), col, e.value));
                }
            }
        }
        Ok(out)
    }

    pub fn dense(&self, obs: &ObservableSpec) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.embed(obs)? {
            m[(r, c)] += v;
        }
        Ok(m)
    }

    pub fn partition_function(&self, beta: f64) -> f64 {
        self.eigenvalues.iter().map(|&l| (-beta * l).exp()).sum()
    }

    /// `Tr(A e^{-βH}) / Tr e^{-βH}`.
    pub fn gibbs_expectation(&self, obs: &ObservableSpec, beta: f64) -> Result<f64> {
        let a = self.embed(obs)?;
        let lmin = self.lambda_min();
        let v = &self.eigenvectors;
        let mut num = 0.0;
        let mut z = 0.0;
        for k in 0..self.dim {
            let w = (-beta * (self.eigenvalues[k] - lmin)).exp();
            z += w;
            if w == 0.0 {
                continue;
            }
            let diag: f64 = a.iter().map(|&(r, c, val)| val * v[(r, k)] * v[(c, k)]).sum();
            num += w * diag;
        }
        Ok(num / z)
    }

    /// `Ψ_L`: normalised singlet-like pairs on `(−L+2i−1, −L+2i)`.
    pub fn dimer_vector(&self) -> DVector<f64> {
        let sites = self.num_sites();
        let amp = (self.n as f64).powf(-(self.l as f64) / 2.0);
        DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|b| {
                let c = decode(b, self.n, sites);
                if (0..sites / 2).all(|i| c[2 * i] == c[2 * i + 1]) {
                    amp
                } else {
                    0.0
                }
            }),
        )
    }

    fn seeded_vector(&self, beta: f64) -> DVector<f64> {
        let v = &self.eigenvectors;
        let lmin = self.lambda_min();
        let mut coef = v.transpose() * self.dimer_vector();
        for k in 0..self.dim {
            coef[k] *= (-0.5 * beta * (self.eigenvalues[k] - lmin)).exp();
        }
        v * coef
    }

    fn quadratic(&self, a: &[(usize, usize, f64)], phi: &DVector<f64>) -> f64 {
        let num: f64 = a.iter().map(|&(r, c, v)| phi[r] * v * phi[c]).sum();
        num / phi.dot(phi)
    }

    /// `⟨φ, A φ⟩ / ⟨φ, φ⟩` with `φ = e^{-βH/2} Ψ_L`.
    pub fn seeded_expectation(&self, obs: &ObservableSpec, beta: f64) -> Result<f64> {
        let a = self.embed(obs)?;
        Ok(self.quadratic(&a, &self.seeded_vector(beta)))
    }

    /// The `β → ∞` limit: `Ψ_L` projected onto the ground eigenspace.
    pub fn seeded_ground_expectation(&self, obs: &ObservableSpec) -> Result<f64> {
        let a = self.embed(obs)?;
        let lmin = self.lambda_min();
        let psi = self.dimer_vector();
        let v = &self.eigenvectors;
        let mut phi = DVector::zeros(self.dim);
        for k in 0..self.dim {
            if self.eigenvalues[k] - lmin < 1e-9 {
                let col = v.column(k);
                phi += col * col.dot(&psi);
            }
        }
        if phi.norm() < 1e-12 {
            return Err(Error::Unsupported("seed vector is orthogonal to the ground space".into()));
        }
        Ok(self.quadratic(&a, &phi))
    }

    /// `⟨A B(t)⟩ − ⟨A⟩⟨B(t)⟩` with `B(t) = e^{tH} B e^{-tH}`, `0 ≤ t ≤ β`.
    pub fn truncated_correlation(
        &self,
        a: &ObservableSpec,
        b: &ObservableSpec,
        beta: f64,
        t: f64,
        state: StateKind,
    ) -> Result<f64> {
        if !(0.0..=beta).contains(&t) {
            return Err(Error::InvalidParameter(format!("time {t} outside [0, β]")));
        }
        let v = &self.eigenvectors;
        let vt = v.transpose();
        let ap = &vt * self.dense(a)? * v;
        let bp = &vt * self.dense(b)? * v;
        let lmin = self.lambda_min();
        let mu: Vec<f64> = self.eigenvalues.iter().map(|&l| l - lmin).collect();
        let d = self.dim;
        // B(t) in the eigenbasis.
        let mut bt = bp.clone();
        for j in 0..d {
            for k in 0..d {
                bt[(j, k)] *= (t * (mu[j] - mu[k])).exp();
            }
        }
        match state {
            StateKind::Gibbs => {
                let w: Vec<f64> = mu.iter().map(|m| (-beta * m).exp()).collect();
                let z: f64 = w.iter().sum();
                let abt = &ap * &bt;
                let mean = |m: &DMatrix<f64>| (0..d).map(|k| w[k] * m[(k, k)]).sum::<f64>() / z;
                Ok(mean(&abt) - mean(&ap) * mean(&bt))
            }
            StateKind::Seeded => {
                let phi = vt * self.seeded_vector(beta);
                let norm = phi.dot(&phi);
                let ev = |m: &DMatrix<f64>| (phi.transpose() * m * &phi)[(0, 0)] / norm;
                Ok(ev(&(&ap * &bt)) - ev(&ap) * ev(&bt))
            }
        }
    }
}
