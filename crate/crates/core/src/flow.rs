//! Numeric time evolution in the resonant chart: Hamiltonians compiled to
//! flat term lists, Hamilton's equations, variational equations, and an
//! embedded Dormand–Prince integrator.
//!
//! Angles evolve on the universal cover — nothing here wraps to [0, 2π), so
//! period maps can subtract initial from final angles without branch logic.
//! The state layout everywhere is `y = [q̂₁..q̂_n, p̂₁..p̂_n]`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::expansion::EpsExpansion;

/// Tolerances and guards for one integration.
#[derive(Clone, Debug)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step the controller may take.
    pub max_step: f64,
    /// Integration aborts when any |p̂_j| exceeds this (the expansion is only
    /// trustworthy inside its action polydisc).
    pub action_bound: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: 0.25,
            action_bound: f64::INFINITY,
        }
    }
}

struct CompiledTerm {
    /// Per-action exponents of the monomial p̂^i.
    i: Vec<u8>,
    k: Vec<i16>,
    c: Complex<f64>,
}

/// An ε-assembled Hamiltonian ready for pointwise evaluation: every slot is
/// scaled by ε^s, parameter harmonics are frozen at a numeric q*, and terms
/// with equal (i, k) are merged. The imaginary parts of a real expansion
/// cancel pairwise, so evaluations return the real part of the complex sum.
pub struct CompiledHamiltonian {
    n_dyn: usize,
    terms: Vec<CompiledTerm>,
}

impl CompiledHamiltonian {
    pub fn compile(h: &EpsExpansion<f64>, eps: f64, qstar: &[f64]) -> Result<Self> {
        let mut n_dyn = 0;
        let mut merged: std::collections::BTreeMap<(Vec<u8>, Vec<i16>), Complex<f64>> =
            std::collections::BTreeMap::new();
        for (&(_, s), series) in h.slots() {
            n_dyn = series.n_dyn();
            if series.n_par() > 0 && series.n_par() != qstar.len() {
                return Err(CoreError::DimensionMismatch(format!(
                    "{} parameter angles in the expansion, {} numeric values supplied",
                    series.n_par(),
                    qstar.len()
                )));
            }
            let scale = eps.powi(s as i32);
            if scale == 0.0 && s > 0 {
                continue;
            }
            for (key, &c) in series.iter() {
                let phase: f64 = key
                    .m
                    .iter()
                    .zip(qstar)
                    .map(|(&mj, &qj)| f64::from(mj) * qj)
                    .sum();
                let folded = c * Complex::from_polar(scale, phase);
                *merged
                    .entry((key.i.clone(), key.k.clone()))
                    .or_insert(Complex::new(0.0, 0.0)) += folded;
            }
        }
        if n_dyn == 0 {
            return Err(CoreError::InvalidInput(
                "cannot compile an empty expansion".into(),
            ));
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|((i, k), c)| CompiledTerm { i, k, c })
            .collect();
        Ok(CompiledHamiltonian { n_dyn, terms })
    }

    pub fn n_dyn(&self) -> usize {
        self.n_dyn
    }

    pub fn energy(&self, q: &[f64], p: &[f64]) -> f64 {
        let mut acc = Complex::new(0.0, 0.0);
        for t in &self.terms {
            acc += t.c * monomial(&t.i, p) * phase_factor(&t.k, q);
        }
        acc.re
    }

    /// (∂H/∂q̂, ∂H/∂p̂) at a point.
    pub fn gradient(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_dyn;
        let mut dq = vec![Complex::new(0.0, 0.0); n];
        let mut dp = vec![Complex::new(0.0, 0.0); n];
        for t in &self.terms {
            let mono = monomial(&t.i, p);
            let ph = phase_factor(&t.k, q);
            let base = t.c * ph;
            for j in 0..n {
                if t.k[j] != 0 {
                    dq[j] += base * mono * Complex::new(0.0, f64::from(t.k[j]));
                }
                if t.i[j] != 0 {
                    dp[j] += base * monomial_d1(&t.i, p, j);
                }
            }
        }
        (dq.iter().map(|z| z.re).collect(), dp.iter().map(|z| z.re).collect())
    }

    /// Full second-derivative matrix over the state (q̂, p̂), ordered as the
    /// state vector: rows/cols 0..n are q̂, n..2n are p̂.
    pub fn hessian(&self, q: &[f64], p: &[f64]) -> DMatrix<f64> {
        let n = self.n_dyn;
        let mut hess = DMatrix::zeros(2 * n, 2 * n);
        for t in &self.terms {
            let mono = monomial(&t.i, p);
            let ph = phase_factor(&t.k, q);
            let base = t.c * ph;
            for a in 0..n {
                for b in a..n {
                    // q-q block: two angle derivatives give −k_a k_b.
                    if t.k[a] != 0 && t.k[b] != 0 {
                        let v = (base * mono * (-f64::from(t.k[a]) * f64::from(t.k[b]))).re;
                        hess[(a, b)] += v;
                        if a != b {
                            hess[(b, a)] += v;
                        }
                    }
                    // p-p block.
                    let v = (base * monomial_d2(&t.i, p, a, b)).re;
                    if v != 0.0 {
                        hess[(n + a, n + b)] += v;
                        if a != b {
                            hess[(n + b, n + a)] += v;
                        }
                    }
                }
                for b in 0..n {
                    // q-p block: i k_a on the angle side, one action derivative.
                    if t.k[a] != 0 && t.i[b] != 0 {
                        let v = (base
                            * monomial_d1(&t.i, p, b)
                            * Complex::new(0.0, f64::from(t.k[a])))
                        .re;
                        hess[(a, n + b)] += v;
                        hess[(n + b, a)] += v;
                    }
                }
            }
        }
        hess
    }

    /// Hamilton's equations: q̇̂ = ∂H/∂p̂, ṗ̂ = −∂H/∂q̂.
    pub fn vector_field(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n_dyn;
        let (dq, dp) = self.gradient(&y[..n], &y[n..2 * n]);
        dy[..n].copy_from_slice(&dp);
        for j in 0..n {
            dy[n + j] = -dq[j];
        }
    }

    /// The linearization A(y) of the vector field, the coefficient matrix of
    /// the variational equations V̇ = A V.
    pub fn linearization(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.n_dyn;
        let h = self.hessian(&y[..n], &y[n..2 * n]);
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..2 * n {
                // d(q̇_r)/dy_c = ∂²H/∂p̂_r∂y_c ; d(ṗ_r)/dy_c = −∂²H/∂q̂_r∂y_c.
                a[(r, c)] = h[(n + r, c)];
                a[(n + r, c)] = -h[(r, c)];
            }
        }
        a
    }
}

fn monomial(i: &[u8], p: &[f64]) -> f64 {
    let mut v = 1.0;
    for (j, &e) in i.iter().enumerate() {
        for _ in 0..e {
            v *= p[j];
        }
    }
    v
}

/// ∂(p̂^i)/∂p̂_j.
fn monomial_d1(i: &[u8], p: &[f64], j: usize) -> f64 {
    if i[j] == 0 {
        return 0.0;
    }
    let mut v = f64::from(i[j]);
    for (l, &e) in i.iter().enumerate() {
        let e = if l == j { e - 1 } else { e };
        for _ in 0..e {
            v *= p[l];
        }
    }
    v
}

/// ∂²(p̂^i)/∂p̂_a∂p̂_b.
fn monomial_d2(i: &[u8], p: &[f64], a: usize, b: usize) -> f64 {
    let factor = if a == b {
        f64::from(i[a]) * (f64::from(i[a]) - 1.0)
    } else {
        f64::from(i[a]) * f64::from(i[b])
    };
    if factor == 0.0 {
        return 0.0;
    }
    let mut v = factor;
    for (l, &e) in i.iter().enumerate() {
        let mut e = e as i32;
        if l == a {
            e -= 1;
        }
        if l == b {
            e -= 1;
        }
        for _ in 0..e {
            v *= p[l];
        }
    }
    v
}

fn phase_factor(k: &[i16], q: &[f64]) -> Complex<f64> {
    let angle: f64 = k.iter().zip(q).map(|(&kj, &qj)| f64::from(kj) * qj).sum();
    Complex::from_polar(1.0, angle)
}

const STAGES: usize = 7;
/// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th- and 4th-order weights (error estimator).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate y' = f(y) from 0 to `t_end` with adaptive step control. The
/// field is autonomous — time never enters our Hamiltonians. `guard` is
/// checked after every accepted step (and on the initial state).
pub fn dopri5<F, G>(
    f: F,
    y0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
    guard: G,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64]) -> Result<()>,
{
    if t_end < 0.0 {
        return Err(CoreError::InvalidInput(
            "integration time must be nonnegative".into(),
        ));
    }
    guard(y0)?;
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    if t_end == 0.0 {
        return Ok(y);
    }
    let mut h = opts.max_step.min(t_end / 16.0).max(t_end * 1e-6);
    let mut k = vec![vec![0.0; dim]; STAGES];
    let mut y_stage = vec![0.0; dim];
    let h_floor = t_end * 1e-14;

    while t < t_end {
        if h < h_floor {
            return Err(CoreError::Integration(format!(
                "step size underflow at t = {t:.6e} (local error will not shrink)"
            )));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        f(&y, &mut k[0]);
        for s in 1..STAGES {
            for d in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][j] * kj[d];
                }
                y_stage[d] = y[d] + h * acc;
            }
            f(&y_stage, &mut k[s]);
        }
        // 5th-order solution is the last stage state (the tableau's FSAL row).
        let y_new: Vec<f64> = (0..dim)
            .map(|d| {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc += A[5][j] * kj[d];
                }
                y[d] + h * acc
            })
            .collect();
        let mut err_sq = 0.0;
        for d in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[d];
            }
            let scale = opts.abs_tol + opts.rel_tol * y[d].abs().max(y_new[d].abs());
            let r = h * e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / dim as f64).sqrt();
        if err <= 1.0 {
            t += h;
            y = y_new;
            guard(&y)?;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(opts.max_step);
    }
    Ok(y)
}

/// Endpoint of the Hamiltonian flow after time `t`.
pub fn flow(
    ham: &CompiledHamiltonian,
    x0: &[f64],
    t: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<f64>> {
    let n = ham.n_dyn();
    if x0.len() != 2 * n {
        return Err(CoreError::DimensionMismatch(format!(
            "state has {} entries, expected {}",
            x0.len(),
            2 * n
        )));
    }
    let bound = opts.action_bound;
    dopri5(
        |y, dy| ham.vector_field(y, dy),
        x0,
        t,
        opts,
        move |y| {
            if y[n..2 * n].iter().any(|p| p.abs() > bound) {
                return Err(CoreError::Domain(format!(
                    "trajectory left the action domain (|p̂| > {bound})"
                )));
            }
            Ok(())
        },
    )
}

/// Endpoint and the full 2n×2n derivative of the time-t flow map with
/// respect to the initial state, from the variational equations integrated
/// alongside the trajectory.
pub fn flow_with_variational(
    ham: &CompiledHamiltonian,
    x0: &[f64],
    t: f64,
    opts: &IntegratorOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = ham.n_dyn();
    let dim = 2 * n;
    if x0.len() != dim {
        return Err(CoreError::DimensionMismatch(format!(
            "state has {} entries, expected {dim}",
            x0.len()
        )));
    }
    // Augmented state: the phase point followed by V in column-major order,
    // V(0) = identity.
    let mut y0 = vec![0.0; dim + dim * dim];
    y0[..dim].copy_from_slice(x0);
    for d in 0..dim {
        y0[dim + d * dim + d] = 1.0;
    }
    let bound = opts.action_bound;
    let end = dopri5(
        |y, dy| {
            ham.vector_field(&y[..dim], &mut dy[..dim]);
            let a = ham.linearization(&y[..dim]);
            for col in 0..dim {
                let v = &y[dim + col * dim..dim + (col + 1) * dim];
                for row in 0..dim {
                    let mut acc = 0.0;
                    for (idx, &vi) in v.iter().enumerate() {
                        acc += a[(row, idx)] * vi;
                    }
                    dy[dim + col * dim + row] = acc;
                }
            }
        },
        &y0,
        t,
        opts,
        move |y| {
            if y[n..dim].iter().any(|p| p.abs() > bound) {
                return Err(CoreError::Domain(format!(
                    "trajectory left the action domain (|p̂| > {bound})"
                )));
            }
            Ok(())
        },
    )?;
    let endpoint = end[..dim].to_vec();
    let v = DMatrix::from_column_slice(dim, dim, &end[dim..]);
    Ok((endpoint, v))
}
