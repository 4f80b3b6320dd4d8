//! Resonant action-angle charts and lattice-model expansion.
//!
//! A completely resonant torus of an integrable lattice has frequencies
//! proportional to an integer vector `k` (normalized so `k₁ = 1`). The chart
//! replaces the site angles φ by hat angles `q̂ = A φ` with `A` unimodular,
//! chosen so `q̂₁` is the fast angle advancing with frequency ω while the
//! remaining `q̂_j` are slow — constant on the resonant motion. Actions extend
//! canonically as `p̂ = A^{-T} J`, which makes `p̂₁ = ⟨k, J⟩` the resonant
//! action conjugate to the fast angle.
//!
//! [`expand_hamiltonian`] then Taylor-expands a [`ModelSpec`] around the torus
//! `J = I*` in these variables, producing the graded container the
//! normalization engine consumes: the linear part is exactly `ω p̂₁` (the slow
//! frequencies vanish by construction — that is the point of the chart), the
//! quadratic-and-up grades carry the twist, and each coupling contributes at
//! its power of the perturbation parameter.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::expansion::{Caps, EpsExpansion};
use crate::series::{FtSeries, TermKey};

/// How the slow angles are formed from the site angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartMode {
    /// `q̂_{j} = φ_j − φ_{j−1}` for `j ≥ 2`; requires `k = (1, …, 1)`.
    /// Natural for nearest-neighbor lattices, where couplings depend on
    /// consecutive differences only.
    #[serde(rename = "consecutive-differences")]
    ConsecutiveDifferences,
    /// `q̂_j = k_j φ₁ − φ_j` for `j ≥ 2`; works for any resonance with
    /// `k₁ = 1`. The matrix is an involution.
    #[serde(rename = "first-angle-differences")]
    FirstAngleDifferences,
}

/// A unimodular angle chart adapted to the resonance `k`.
#[derive(Clone, Debug)]
pub struct ResonantChart {
    k: Vec<i64>,
    a: DMatrix<i64>,
    a_inv: DMatrix<i64>,
}

impl ResonantChart {
    /// Build the chart for resonance vector `k` (length = number of sites).
    pub fn build(k: &[i64], mode: ChartMode) -> Result<Self> {
        let n = k.len();
        if n < 2 {
            return Err(CoreError::InvalidInput(
                "need at least two sites for a resonant chart".into(),
            ));
        }
        if k[0] != 1 {
            return Err(CoreError::UnsupportedResonance(format!(
                "resonance vector must be normalized with k₁ = 1, got k₁ = {}",
                k[0]
            )));
        }
        let mut a = DMatrix::<i64>::zeros(n, n);
        a[(0, 0)] = 1;
        match mode {
            ChartMode::ConsecutiveDifferences => {
                if k.iter().any(|&kj| kj != 1) {
                    return Err(CoreError::UnsupportedResonance(
                        "consecutive-difference charts require k = (1, …, 1)".into(),
                    ));
                }
                for j in 1..n {
                    a[(j, j)] = 1;
                    a[(j, j - 1)] = -1;
                }
            }
            ChartMode::FirstAngleDifferences => {
                for j in 1..n {
                    a[(j, 0)] = k[j];
                    a[(j, j)] = -1;
                }
            }
        }
        let a_inv = integer_inverse(&a)?;
        // p̂₁ = ⟨k, J⟩ must hold: the first row of A^{-T} is the first
        // column of A⁻¹.
        for j in 0..n {
            if a_inv[(j, 0)] != k[j] {
                return Err(CoreError::UnsupportedResonance(
                    "chart does not realize p̂₁ = ⟨k, J⟩ for this resonance".into(),
                ));
            }
        }
        Ok(ResonantChart { k: k.to_vec(), a, a_inv })
    }

    pub fn sites(&self) -> usize {
        self.k.len()
    }

    pub fn resonance(&self) -> &[i64] {
        &self.k
    }

    pub fn matrix(&self) -> &DMatrix<i64> {
        &self.a
    }

    /// Site variables → hat variables: `q̂ = A φ`, `p̂ = A^{-T} J`.
    pub fn to_hat(&self, phi: &[f64], j_act: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.sites();
        if phi.len() != n || j_act.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "expected {n} site angles and actions"
            )));
        }
        let mut q = vec![0.0; n];
        let mut p = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                q[i] += self.a[(i, j)] as f64 * phi[j];
                p[i] += self.a_inv[(j, i)] as f64 * j_act[j];
            }
        }
        Ok((q, p))
    }

    /// Hat variables → site variables: `φ = A⁻¹ q̂`, `J = Aᵀ p̂`.
    pub fn from_hat(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.sites();
        if q.len() != n || p.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "expected {n} hat angles and actions"
            )));
        }
        let mut phi = vec![0.0; n];
        let mut j_act = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                phi[i] += self.a_inv[(i, j)] as f64 * q[j];
                j_act[i] += self.a[(j, i)] as f64 * p[j];
            }
        }
        Ok((phi, j_act))
    }

    /// Integer harmonic of a site-angle combination `⟨w, φ⟩` re-expressed in
    /// hat angles: `⟨w, φ⟩ = ⟨wᵀA⁻¹, q̂⟩`.
    fn harmonic_to_hat(&self, w: &[i64]) -> Vec<i16> {
        let n = self.sites();
        let mut out = vec![0i16; n];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc: i64 = 0;
            for j in 0..n {
                acc += w[j] * self.a_inv[(j, i)];
            }
            *slot = acc as i16;
        }
        out
    }
}

/// Exact inverse of a unimodular integer matrix: invert in floating point,
/// round, then verify the product in 128-bit integers.
fn integer_inverse(a: &DMatrix<i64>) -> Result<DMatrix<i64>> {
    let n = a.nrows();
    let af = a.map(|v| v as f64);
    let det = af.clone().determinant().round() as i64;
    if det != 1 && det != -1 {
        return Err(CoreError::InvalidInput(format!(
            "chart matrix must be unimodular, determinant is {det}"
        )));
    }
    let inv_f = af
        .try_inverse()
        .ok_or_else(|| CoreError::InvalidInput("chart matrix is singular".into()))?;
    let inv = inv_f.map(|v| v.round() as i64);
    for i in 0..n {
        for j in 0..n {
            let mut acc: i128 = 0;
            for l in 0..n {
                acc += a[(i, l)] as i128 * inv[(l, j)] as i128;
            }
            if acc != if i == j { 1 } else { 0 } {
                return Err(CoreError::Numeric(
                    "integer inverse failed verification".into(),
                ));
            }
        }
    }
    Ok(inv)
}

/// Couplings between two sites. The only shape presently needed multiplies
/// the geometric mean of the two actions by a cosine of the angle difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingKind {
    /// `coeff · √(I_a I_b) · cos(φ_a − φ_b − phase)`.
    #[serde(rename = "sqrt-product")]
    SqrtProduct,
}

/// One two-site coupling term of a lattice model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Coupling {
    /// Zero-based site indices `(a, b)`.
    pub sites: (usize, usize),
    pub coeff: f64,
    /// Power of the perturbation parameter the term enters at.
    pub eps_power: usize,
    /// Phase offset in `cos(φ_a − φ_b − phase)`; 0 keeps the term even.
    #[serde(default)]
    pub phase: f64,
    pub kind: CouplingKind,
}

/// A lattice Hamiltonian `H = Σ_j h₀(I_j) + Σ couplings` together with the
/// resonant torus to expand around.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub sites: usize,
    /// Resonance vector, `k₁ = 1`.
    pub resonance: Vec<i64>,
    /// Torus actions `I*_j`, one per site, each positive.
    pub istar: Vec<f64>,
    /// On-site energy as polynomial coefficients: `h₀(I) = Σ_d h0[d] I^d`.
    pub h0: Vec<f64>,
    pub couplings: Vec<Coupling>,
    pub chart: ChartMode,
}

impl ModelSpec {
    /// The 4-site square cell of the discrete nonlinear Schrödinger lattice:
    /// `h₀(I) = I + I²`, unit resonance, torus at `I* = 1/2` (so ω = 2 and the
    /// period is π), nearest-neighbor bonds closed into a ring.
    pub fn dnls_square_cell() -> Self {
        let bond = |a: usize, b: usize| Coupling {
            sites: (a, b),
            coeff: 2.0,
            eps_power: 1,
            phase: 0.0,
            kind: CouplingKind::SqrtProduct,
        };
        ModelSpec {
            sites: 4,
            resonance: vec![1, 1, 1, 1],
            istar: vec![0.5; 4],
            h0: vec![0.0, 1.0, 1.0],
            couplings: vec![bond(1, 0), bond(2, 1), bond(3, 2), bond(0, 3)],
            chart: ChartMode::ConsecutiveDifferences,
        }
    }

    /// Direct evaluation in site variables, for cross-checking expansions.
    /// `eps_power` folds with the given ε.
    pub fn energy(&self, phi: &[f64], actions: &[f64], eps: f64) -> Result<f64> {
        if phi.len() != self.sites || actions.len() != self.sites {
            return Err(CoreError::DimensionMismatch(format!(
                "expected {} site angles and actions",
                self.sites
            )));
        }
        let mut h = 0.0;
        for &a in actions {
            let mut pow = 1.0;
            for &c in &self.h0 {
                h += c * pow;
                pow *= a;
            }
        }
        for c in &self.couplings {
            let (a, b) = c.sites;
            let prod = actions[a] * actions[b];
            if prod < 0.0 {
                return Err(CoreError::Domain(
                    "negative action product under square root".into(),
                ));
            }
            h += eps.powi(c.eps_power as i32)
                * c.coeff
                * prod.sqrt()
                * (phi[a] - phi[b] - c.phase).cos();
        }
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        let n = self.sites;
        if self.resonance.len() != n || self.istar.len() != n {
            return Err(CoreError::DimensionMismatch(
                "resonance and istar must have one entry per site".into(),
            ));
        }
        if self.istar.iter().any(|&v| v <= 0.0) {
            return Err(CoreError::Domain(
                "torus actions must be positive for the square-root expansion".into(),
            ));
        }
        for c in &self.couplings {
            if c.sites.0 >= n || c.sites.1 >= n || c.sites.0 == c.sites.1 {
                return Err(CoreError::InvalidInput(format!(
                    "coupling sites {:?} out of range",
                    c.sites
                )));
            }
            if c.eps_power == 0 {
                return Err(CoreError::InvalidInput(
                    "couplings are perturbative; eps_power must be ≥ 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn h0_taylor_coefficient(&self, istar: f64, d: usize) -> f64 {
        // d-th Taylor coefficient of h₀ at I*: Σ_e c_e C(e, d) I*^{e−d}.
        let mut out = 0.0;
        for (e, &c) in self.h0.iter().enumerate() {
            if e < d {
                continue;
            }
            let mut binom = 1.0;
            for t in 0..d {
                binom *= (e - t) as f64 / (d - t) as f64;
            }
            out += c * binom * istar.powi((e - d) as i32);
        }
        out
    }
}

/// Expand a model around its resonant torus into the graded container.
///
/// The constant energy of the torus is dropped; the linear grade is exactly
/// `ω p̂₁` (enforced — a mismatch means the torus is not `k`-resonant); the
/// quadratic grade at ε⁰ carries the twist form; couplings enter at their
/// declared ε-powers with the square roots expanded binomially to the degree
/// cap.
pub fn expand_hamiltonian(model: &ModelSpec, caps: Caps) -> Result<(ResonantChart, EpsExpansion<f64>)> {
    model.validate()?;
    let n = model.sites;
    let n_par = n - 1;
    let chart = ResonantChart::build(&model.resonance, model.chart)?;

    // Resonance check: h₀'(I*_j) = k_j ω for every site.
    let omega = model.h0_taylor_coefficient(model.istar[0], 1);
    if omega.abs() < 1e-12 {
        return Err(CoreError::InvalidInput(
            "resonant frequency vanishes on the torus".into(),
        ));
    }
    for j in 0..n {
        let wj = model.h0_taylor_coefficient(model.istar[j], 1);
        let target = model.resonance[j] as f64 * omega;
        if (wj - target).abs() > 1e-10 * (1.0 + omega.abs()) {
            return Err(CoreError::InvalidInput(format!(
                "site {j} frequency {wj} ≠ k_j·ω = {target}; torus is not resonant"
            )));
        }
    }

    let mut h = EpsExpansion::new(omega, n, n_par, caps);
    let omega_p1 = h.omega_p1();
    h.accumulate(1, 0, &omega_p1)?;

    // Per-site action deviations δJ_j = Σ_i A_{ij} p̂_i as grade-1 series.
    let delta_j: Vec<FtSeries<f64>> = (0..n)
        .map(|j| {
            let mut s = FtSeries::zero(n, n_par, 1);
            for i in 0..n {
                let a_ij = chart.a[(i, j)];
                if a_ij != 0 {
                    let mut iv = vec![0u8; n];
                    iv[i] = 1;
                    s.add_term(
                        TermKey::new(iv, vec![0; n], vec![0; n_par]),
                        Complex::new(a_ij as f64, 0.0),
                    )?;
                }
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    // On-site Taylor terms. The linear grade must reassemble to ω p̂₁ exactly:
    // Σ_j h₀'(I*_j) δJ_j = ω Σ_j k_j δJ_j = ω p̂₁ by the chart identity. We
    // build it anyway and verify, so a bad chart cannot slip through.
    let mut linear = FtSeries::zero(n, n_par, 1);
    for j in 0..n {
        linear = linear.add(&delta_j[j].scaled_real(model.h0_taylor_coefficient(model.istar[j], 1)))?;
    }
    if linear.sub(&omega_p1)?.pruned().max_abs() > 1e-9 * (1.0 + omega.abs()) {
        return Err(CoreError::Numeric(
            "linear grade did not reduce to ω p̂₁".into(),
        ));
    }
    for j in 0..n {
        let mut pow = delta_j[j].clone();
        for d in 2..=caps.degree_cap {
            pow = pow.mul(&delta_j[j])?;
            let c = model.h0_taylor_coefficient(model.istar[j], d);
            if c != 0.0 {
                h.accumulate(d, 0, &pow.scaled_real(c))?;
            }
        }
    }

    // Couplings: coeff √(I_a I_b) cos(φ_a − φ_b − phase) with
    // √(1 + x) = Σ_d binom(1/2, d) x^d, x_j = δJ_j / I*_j.
    for c in &model.couplings {
        let (a, b) = c.sites;
        let CouplingKind::SqrtProduct = c.kind;
        let scale = c.coeff * (model.istar[a] * model.istar[b]).sqrt();

        // The harmonic e^{i(φ_a − φ_b)} in hat angles, entered with the
        // phase folded into the coefficient so the pair stays real.
        let mut w = vec![0i64; n];
        w[a] += 1;
        w[b] -= 1;
        let kappa = chart.harmonic_to_hat(&w);
        let mut harmonic = FtSeries::zero(n, n_par, 0);
        let key = TermKey::new(vec![0; n], kappa, vec![0; n_par]);
        let half = Complex::from_polar(0.5, -c.phase);
        harmonic.add_term(key.mirrored(), half.conj())?;
        harmonic.add_term(key, half)?;

        // Grade-d coefficients of √(1+x_a)√(1+x_b).
        let xa = delta_j[a].scaled_real(1.0 / model.istar[a]);
        let xb = delta_j[b].scaled_real(1.0 / model.istar[b]);
        let pow_a = grade_powers(&xa, caps.degree_cap)?;
        let pow_b = grade_powers(&xb, caps.degree_cap)?;
        let binom = half_binomials(caps.degree_cap);
        for d in 0..=caps.degree_cap {
            let mut grade_d = FtSeries::zero(n, n_par, d);
            for da in 0..=d {
                let db = d - da;
                let factor = binom[da] * binom[db];
                grade_d = grade_d.add(&pow_a[da].mul(&pow_b[db])?.scaled_real(factor))?;
            }
            let term = grade_d.mul(&harmonic)?.scaled_real(scale).pruned();
            if !term.is_empty() {
                h.accumulate(d, c.eps_power, &term)?;
            }
        }
    }

    h.drop_empty();
    h.validate()?;
    Ok((chart, h))
}

/// `[x⁰, x¹, …, x^cap]` for a grade-1 series.
fn grade_powers(x: &FtSeries<f64>, cap: usize) -> Result<Vec<FtSeries<f64>>> {
    let n_dyn = x.n_dyn();
    let n_par = x.n_par();
    let mut one = FtSeries::zero(n_dyn, n_par, 0);
    one.add_term(
        TermKey::new(vec![0; n_dyn], vec![0; n_dyn], vec![0; n_par]),
        Complex::new(1.0, 0.0),
    )?;
    let mut out = vec![one];
    for d in 1..=cap {
        let next = out[d - 1].mul(x)?;
        out.push(next);
    }
    Ok(out)
}

/// Binomial coefficients `C(1/2, d)` for `d = 0..=cap`.
fn half_binomials(cap: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for d in 1..=cap {
        let prev = out[d - 1];
        out.push(prev * (0.5 - (d as f64 - 1.0)) / d as f64);
    }
    out
}
