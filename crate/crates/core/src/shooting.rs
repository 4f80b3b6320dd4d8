//! Periodic-orbit shooting: the T-period map Υ, its Jacobian M(ε) and block
//! expansion, the kernel and bifurcation analysis for degenerate families,
//! certified Newton–Kantorovich continuation, and the coordinate maps between
//! normalized and original variables.
//!
//! Conventions, fixed once here and used by every routine:
//! the unknown vector is `x = [q₂..q_n, p̂₁..p̂_n] ∈ ℝ^{2n−1}` (slow angles,
//! then all actions; the fast phase q₁(0) is a parameter, its conjugate
//! equation is dropped). Υ stacks the n angle residuals `F = q̂(T) − q̂(0) − ΛT`
//! on top of the n−1 rescaled slow-action residuals `G = (p(T) − p(0))/ε`,
//! with Λ = (ω, 0, …, 0). M(ε) = DΥ then splits into
//!
//! ```text
//!         q-cols (n−1)      p̂-cols (n)
//! F-rows [ εA₁ + O(ε²)      C₀ + εC₁ + O(ε²) ]
//! G-rows [ B₀ + εB₁ + O(ε²) D₀ + εD₁ + O(ε²) ]
//! ```
//!
//! with C₀ = CT the twist block and B₀ the (rescaled) angle Hessian of the
//! first-order averaged potential. The period is fixed at T = 2π/ω — the
//! action translations of the normalization keep the frequency pinned, so no
//! per-iteration period correction is wanted.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::expansion::EpsExpansion;
use crate::flow::{flow, flow_with_variational, CompiledHamiltonian, IntegratorOptions};
use crate::lie::Generator;
use crate::normal_form::GeneratingStep;
use crate::series::{FtSeries, Var};

/// A Hamiltonian fixed for shooting: the expansion, numeric parameter angles,
/// and the fast initial phase. Works for the original chart Hamiltonian
/// (parameter block unused, pass zeros) and for a normalized one frozen at a
/// candidate q*.
pub struct ShootingSetup<'a> {
    h: &'a EpsExpansion<f64>,
    qstar: Vec<f64>,
    pub q1_0: f64,
    pub integrator: IntegratorOptions,
}

impl<'a> ShootingSetup<'a> {
    pub fn new(h: &'a EpsExpansion<f64>, qstar: Vec<f64>) -> Result<Self> {
        if h.omega() == 0.0 {
            return Err(CoreError::InvalidInput(
                "zero fast frequency has no period map".into(),
            ));
        }
        if h.n_par() > 0 && qstar.len() != h.n_par() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} parameter angles expected, {} given",
                h.n_par(),
                qstar.len()
            )));
        }
        Ok(ShootingSetup {
            h,
            qstar,
            q1_0: 0.0,
            integrator: IntegratorOptions::default(),
        })
    }

    pub fn n_dyn(&self) -> usize {
        self.h.n_dyn()
    }

    pub fn t_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.h.omega()
    }

    fn unknowns(&self) -> usize {
        2 * self.h.n_dyn() - 1
    }

    /// Assemble the full phase point from the unknown vector.
    fn state_of(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        let n = self.h.n_dyn();
        if x.len() != self.unknowns() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} unknowns, expected {}",
                x.len(),
                self.unknowns()
            )));
        }
        let mut state = vec![0.0; 2 * n];
        state[0] = self.q1_0;
        for j in 0..n - 1 {
            state[1 + j] = x[j];
        }
        for j in 0..n {
            state[n + j] = x[n - 1 + j];
        }
        Ok(state)
    }

    /// The period map Υ(x; ε). At ε = 0 the G component is defined as its
    /// limit value 0 (the actions are exactly conserved there).
    pub fn upsilon(&self, eps: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.h.n_dyn();
        let state = self.state_of(x)?;
        let ham = CompiledHamiltonian::compile(self.h, eps, &self.qstar)?;
        let t = self.t_period();
        let end = flow(&ham, &state, t, &self.integrator)?;
        let mut ups = DVector::zeros(self.unknowns());
        for j in 0..n {
            ups[j] = end[j] - state[j] - if j == 0 { self.h.omega() * t } else { 0.0 };
        }
        if eps != 0.0 {
            for j in 0..n - 1 {
                ups[n + j] = (end[n + 1 + j] - state[n + 1 + j]) / eps;
            }
        }
        Ok(ups)
    }

    /// M(ε) = DΥ at `x`, from the variational equations. The G rows inherit
    /// the 1/ε rescaling; at ε = 0 they are zero like G itself.
    pub fn jacobian_m(&self, eps: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.h.n_dyn();
        let state = self.state_of(x)?;
        let ham = CompiledHamiltonian::compile(self.h, eps, &self.qstar)?;
        let (_, v) = flow_with_variational(&ham, &state, self.t_period(), &self.integrator)?;
        let dim = self.unknowns();
        let mut m = DMatrix::zeros(dim, dim);
        // Unknown j ↦ column of the full state.
        let state_col = |j: usize| if j < n - 1 { 1 + j } else { n + (j - (n - 1)) };
        for col in 0..dim {
            let sc = state_col(col);
            for row in 0..n {
                let dq0 = if row == sc { 1.0 } else { 0.0 };
                m[(row, col)] = v[(row, sc)] - dq0;
            }
            if eps != 0.0 {
                for row in 0..n - 1 {
                    let sr = n + 1 + row;
                    let dp0 = if sr == sc { 1.0 } else { 0.0 };
                    m[(n + row, col)] = (v[(sr, sc)] - dp0) / eps;
                }
            }
        }
        Ok(m)
    }

    /// Sample M(ε) on a geometric ε ladder at (q_center, p̂ = 0) and fit the
    /// linear model M₀ + εM₁ entrywise by least squares.
    pub fn block_expand(
        &self,
        q_center: &[f64],
        eps_samples: &[f64],
    ) -> Result<JacobianBlocks> {
        let n = self.h.n_dyn();
        if q_center.len() != n - 1 {
            return Err(CoreError::DimensionMismatch(format!(
                "{} slow angles expected, {} given",
                n - 1,
                q_center.len()
            )));
        }
        if eps_samples.len() < 3 || eps_samples.iter().any(|&e| e <= 0.0) {
            return Err(CoreError::InvalidInput(
                "need at least three positive ε samples".into(),
            ));
        }
        let ratio = eps_samples[1] / eps_samples[0];
        for w in eps_samples.windows(2) {
            if (w[1] / w[0] / ratio - 1.0).abs() > 1e-6 {
                return Err(CoreError::InvalidInput(
                    "ε samples must form a geometric progression".into(),
                ));
            }
        }
        let mut x = DVector::zeros(self.unknowns());
        for (j, &q) in q_center.iter().enumerate() {
            x[j] = q;
        }
        let ms: Vec<DMatrix<f64>> = eps_samples
            .iter()
            .map(|&e| self.jacobian_m(e, &x))
            .collect::<Result<_>>()?;

        // Entrywise 2-parameter least squares against [1, ε].
        let k = eps_samples.len();
        let design = DMatrix::from_fn(k, 2, |r, c| if c == 0 { 1.0 } else { eps_samples[r] });
        let normal = (design.transpose() * &design)
            .try_inverse()
            .ok_or_else(|| CoreError::Numeric("degenerate ε design matrix".into()))?
            * design.transpose();
        let dim = self.unknowns();
        let mut m0 = DMatrix::zeros(dim, dim);
        let mut m1 = DMatrix::zeros(dim, dim);
        let mut fit_residual = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                let ys = DVector::from_fn(k, |i, _| ms[i][(r, c)]);
                let beta = &normal * &ys;
                m0[(r, c)] = beta[0];
                m1[(r, c)] = beta[1];
                for i in 0..k {
                    fit_residual =
                        fit_residual.max((beta[0] + beta[1] * eps_samples[i] - ys[i]).abs());
                }
            }
        }
        Ok(JacobianBlocks::from_fit(
            n,
            m0,
            m1,
            fit_residual,
            eps_samples.to_vec(),
        ))
    }

    /// Certified continuation from `x0`. Frozen mode iterates with the
    /// Jacobian fixed at x0 and issues the contraction certificate; full mode
    /// refreshes the Jacobian every step (faster, uncertified).
    pub fn newton_kantorovich(
        &self,
        eps: f64,
        x0: &DVector<f64>,
        opts: &NkOptions,
    ) -> Result<NkResult> {
        let map = |x: &DVector<f64>| self.upsilon(eps, x);
        let jac = |x: &DVector<f64>| self.jacobian_m(eps, x);
        // Lipschitz probes do not need the trajectory tolerance — cap it.
        let probe = |x: &DVector<f64>| self.clone_with_tolerance(1e-9).jacobian_m(eps, x);
        nk_solve(map, jac, probe, x0, opts)
    }

    fn clone_with_tolerance(&self, tol: f64) -> ShootingSetup<'a> {
        let mut integrator = self.integrator.clone();
        integrator.rel_tol = integrator.rel_tol.max(tol);
        integrator.abs_tol = integrator.abs_tol.max(tol);
        ShootingSetup {
            h: self.h,
            qstar: self.qstar.clone(),
            q1_0: self.q1_0,
            integrator,
        }
    }
}

/// The fitted ε-expansion of M(ε) and its named blocks.
#[derive(Clone, Debug)]
pub struct JacobianBlocks {
    pub n: usize,
    pub m0: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    /// F-rows × q-cols of M₁ (the ε-slope of the angle block).
    pub a1: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub c0: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    /// Largest entrywise deviation of the sampled M(ε) from the linear fit.
    pub fit_residual: f64,
    pub eps_samples: Vec<f64>,
}

impl JacobianBlocks {
    pub fn from_fit(
        n: usize,
        m0: DMatrix<f64>,
        m1: DMatrix<f64>,
        fit_residual: f64,
        eps_samples: Vec<f64>,
    ) -> Self {
        let q = n - 1;
        let a1 = m1.view((0, 0), (n, q)).into_owned();
        let c0 = m0.view((0, q), (n, n)).into_owned();
        let c1 = m1.view((0, q), (n, n)).into_owned();
        let b0 = m0.view((n, 0), (q, q)).into_owned();
        let b1 = m1.view((n, 0), (q, q)).into_owned();
        let d0 = m0.view((n, q), (q, n)).into_owned();
        let d1 = m1.view((n, q), (q, n)).into_owned();
        JacobianBlocks {
            n,
            m0,
            m1,
            a1,
            b0,
            b1,
            c0,
            c1,
            d0,
            d1,
            fit_residual,
            eps_samples,
        }
    }

    /// Assemble blocks directly (tests, planted examples). ε-order-0 blocks
    /// of A are zero by construction of Υ.
    pub fn from_parts(
        b0: DMatrix<f64>,
        c0: DMatrix<f64>,
        d0: DMatrix<f64>,
        a1: DMatrix<f64>,
        b1: DMatrix<f64>,
    ) -> Self {
        let n = c0.nrows();
        let q = n - 1;
        let mut m0 = DMatrix::zeros(2 * n - 1, 2 * n - 1);
        m0.view_mut((0, q), (n, n)).copy_from(&c0);
        m0.view_mut((n, 0), (q, q)).copy_from(&b0);
        m0.view_mut((n, q), (q, n)).copy_from(&d0);
        let mut m1 = DMatrix::zeros(2 * n - 1, 2 * n - 1);
        m1.view_mut((0, 0), (n, q)).copy_from(&a1);
        m1.view_mut((n, 0), (q, q)).copy_from(&b1);
        JacobianBlocks {
            n,
            m0,
            m1: m1.clone(),
            a1,
            b0,
            b1,
            c0,
            c1: DMatrix::zeros(n, n),
            d0,
            d1: DMatrix::zeros(q, n),
            fit_residual: 0.0,
            eps_samples: Vec::new(),
        }
    }
}

/// Kernel structure of M₀ for the one-parameter-family degeneracy.
#[derive(Clone, Debug)]
pub struct KernelAnalysis {
    /// Unit generator of Ker(B₀), sign-fixed.
    pub a1: DVector<f64>,
    /// Its embedding (a₁, 0) ∈ ℝ^{2n−1}, the right kernel vector of M₀.
    pub f1: DVector<f64>,
    /// Left kernel vector (−C₀⁻ᵀD₀ᵀa₁, a₁) of M₀.
    pub g: DVector<f64>,
    /// ⟨f₁, g⟩; zero means a second generalized eigenvector exists.
    pub orthogonality: f64,
    /// Solution of M₀f₂ = f₁ when the chain extends.
    pub f2: Option<DVector<f64>>,
    /// Established length of the Jordan chain at 0: 1, 2, or 3 (3 = at
    /// least 3; the γ criterion needs exactly 2).
    pub chain_length: usize,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Moore–Penrose least-squares solve with relative truncation.
fn pinv_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(rhs, 1e-12 * smax.max(1e-300)).unwrap()
}

/// Kernel and Jordan-chain analysis of the fitted M₀. Errors when Ker(B₀) is
/// not one-dimensional — multi-parameter degeneracies are outside the scope
/// of the γ criterion.
///
/// Zero tests are measured against `blocks.fit_residual`: entries of a fitted
/// M₀ carry the ε-ladder truncation error, so an exact-arithmetic threshold
/// like 1e−8 would read that noise as genuine nonzero structure.
pub fn kernel_analysis(blocks: &JacobianBlocks) -> Result<KernelAnalysis> {
    let q = blocks.n - 1;
    let noise = blocks.fit_residual;
    let svd = blocks.b0.clone().svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax <= (20.0 * noise).max(1e-10) {
        return Err(CoreError::UnsupportedDegeneracy(
            "B₀ vanishes to fit precision: every direction is degenerate here \
             (a family crossing), outside the rank-one criterion"
                .into(),
        ));
    }
    let thresh = (1e-6 * smax).max(10.0 * noise);
    let small: Vec<usize> = (0..q)
        .filter(|&i| svd.singular_values[i] < thresh)
        .collect();
    if small.len() != 1 {
        return Err(CoreError::UnsupportedDegeneracy(format!(
            "Ker(B₀) has dimension {}, the family criterion needs 1",
            small.len()
        )));
    }
    let vt = svd.v_t.as_ref().unwrap();
    let mut a1: DVector<f64> = vt.row(small[0]).transpose();
    // Deterministic sign: first appreciable component positive.
    if let Some(&lead) = a1.iter().find(|v| v.abs() > 1e-8) {
        if lead < 0.0 {
            a1 = -a1;
        }
    }

    let dim = 2 * blocks.n - 1;
    let mut f1 = DVector::zeros(dim);
    for i in 0..q {
        f1[i] = a1[i];
    }
    let rhs = blocks.d0.transpose() * &a1;
    let g_f = blocks
        .c0
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CoreError::Numeric("twist block C₀ is singular".into()))?;
    let mut g = DVector::zeros(dim);
    for i in 0..blocks.n {
        g[i] = -g_f[i];
    }
    for i in 0..q {
        g[blocks.n + i] = a1[i];
    }

    let orthogonality = f1.dot(&g);
    let scale = g.norm().max(1.0);
    let (f2, chain_length) = if orthogonality.abs() >= 1e-8 * scale + 10.0 * noise {
        (None, 1)
    } else {
        let f2 = pinv_solve(&blocks.m0, &f1);
        let defect = (&blocks.m0 * &f2 - &f1).norm();
        if defect > (1e-6 * f1.norm()).max(10.0 * noise) {
            (None, 1)
        } else {
            // One more extension M₀f₃ = f₂ exists iff ⟨f₂, g⟩ = 0 too.
            let extendable =
                f2.dot(&g).abs() < 1e-8 * (f2.norm() * scale).max(1e-300) + 10.0 * noise;
            let len = if extendable { 3 } else { 2 };
            (Some(f2), len)
        }
    };
    Ok(KernelAnalysis {
        a1,
        f1,
        g,
        orthogonality,
        f2,
        chain_length,
    })
}

/// The bifurcation coefficient γ = ⟨(B₁ − D₀C₀⁻¹A₁)a₁, a₁⟩ with a₁ unit.
/// (Values quoted for a non-unit family tangent scale by its squared norm.)
pub fn gamma_criterion(blocks: &JacobianBlocks, kernel: &KernelAnalysis) -> Result<f64> {
    let a1q = blocks.a1.clone();
    let sol = blocks
        .c0
        .clone()
        .lu()
        .solve(&(a1q * &kernel.a1))
        .ok_or_else(|| CoreError::Numeric("twist block C₀ is singular".into()))?;
    let v = &blocks.b1 * &kernel.a1 - &blocks.d0 * sol;
    Ok(v.dot(&kernel.a1))
}

/// Eigenvalues bifurcating from a length-h Jordan block at λ₀ = 0:
/// the h complex roots of −(εγ)^{1/h}, to leading order.
pub fn bifurcation_prediction(gamma: f64, h: usize, eps: f64) -> Result<Vec<Complex<f64>>> {
    if gamma == 0.0 {
        return Err(CoreError::Certification(
            "γ = 0: bifurcation criterion inconclusive, a higher normalization order is needed"
                .into(),
        ));
    }
    if h < 2 {
        return Err(CoreError::InvalidInput(
            "bifurcation needs an algebraic multiplicity of at least 2".into(),
        ));
    }
    let base = Complex::new(eps * gamma, 0.0).powf(1.0 / h as f64);
    Ok((0..h)
        .map(|j| {
            let root = base
                * Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / h as f64);
            -root
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NkMode {
    /// Jacobian frozen at x₀; the contraction certificate applies to this
    /// variant.
    Frozen,
    /// Jacobian refreshed each iteration; no certificate.
    Full,
}

#[derive(Clone, Debug)]
pub struct NkOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: NkMode,
    /// Radius of the ball on which the Jacobian Lipschitz constant is probed.
    pub ball_radius: f64,
}

impl Default for NkOptions {
    fn default() -> Self {
        NkOptions {
            tol: 1e-10,
            max_iter: 50,
            mode: NkMode::Frozen,
            ball_radius: 1e-3,
        }
    }
}

/// Kantorovich data at x₀: with μ = ‖F(x₀)‖, M = ‖F'(x₀)⁻¹‖, C₃ the probed
/// Lipschitz constant of F', the scheme contracts when h = M²C₃μ < 1/4, and
/// the solution lies within radius ηt₋ of x₀, η = Mμ, t₋ = (1−√(1−4h))/(2h).
#[derive(Clone, Debug, serde::Serialize)]
pub struct NkCertificate {
    pub mu: f64,
    pub inverse_norm: f64,
    pub c3: f64,
    pub eta: f64,
    pub h: f64,
    pub radius: f64,
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct NkResult {
    pub x_star: DVector<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: Option<NkCertificate>,
}

/// Damped-free Newton iteration with a Kantorovich certificate, generic over
/// the residual map. `jac` is the exact Jacobian; `jac_probe` may be a
/// cheaper evaluation used only for the Lipschitz constant.
pub fn nk_solve<F, J, P>(
    map: F,
    jac: J,
    jac_probe: P,
    x0: &DVector<f64>,
    opts: &NkOptions,
) -> Result<NkResult>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
    P: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let j0 = jac(x0)?;
    let lu = j0.clone().lu();
    if !lu.is_invertible() {
        return Err(CoreError::Numeric(
            "Jacobian at the starting point is singular".into(),
        ));
    }
    let r0 = map(x0)?;

    let certificate = if opts.mode == NkMode::Frozen {
        let mu = r0.norm();
        let inv_norm = {
            let svd = j0.clone().svd(false, false);
            let smin = svd
                .singular_values
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            1.0 / smin
        };
        // Lipschitz probe: coordinate displacements on the sphere of the
        // configured radius.
        let mut c3 = 0.0f64;
        let j0_probe = jac_probe(x0)?;
        for i in 0..x0.len() {
            for sign in [-1.0, 1.0] {
                let mut z = x0.clone();
                z[i] += sign * opts.ball_radius;
                let jz = jac_probe(&z)?;
                c3 = c3.max(spectral_norm(&(jz - &j0_probe)) / opts.ball_radius);
            }
        }
        let eta = inv_norm * mu;
        let h = inv_norm * c3 * eta;
        let certified = h < 0.25;
        let radius = if h == 0.0 {
            eta
        } else if certified {
            eta * (1.0 - (1.0 - 4.0 * h).sqrt()) / (2.0 * h)
        } else {
            f64::NAN
        };
        Some(NkCertificate {
            mu,
            inverse_norm: inv_norm,
            c3,
            eta,
            h,
            radius,
            certified,
        })
    } else {
        None
    };

    let mut x = x0.clone();
    let mut residual = r0;
    let mut residual_inf = residual.amax();
    let mut iterations = 0;
    while residual_inf > opts.tol && iterations < opts.max_iter {
        let step = match opts.mode {
            NkMode::Frozen => lu.solve(&residual),
            NkMode::Full => {
                let j = jac(&x)?;
                j.lu().solve(&residual)
            }
        }
        .ok_or_else(|| CoreError::Numeric("singular Jacobian during iteration".into()))?;
        x -= step;
        residual = map(&x)?;
        residual_inf = residual.amax();
        iterations += 1;
    }
    Ok(NkResult {
        x_star: x,
        residual_inf,
        iterations,
        converged: residual_inf <= opts.tol,
        certificate,
    })
}

/// One Lie coordinate map Φ^χ at a numeric point: every coordinate function
/// c picks up Σ_{m≥1} ε^{mr} t_m(point) with t₁ = Lc and t_{m+1} = L t_m/(m+1).
fn apply_generator(
    gen: &Generator<f64>,
    state: &mut [f64],
    qstar: &[f64],
    eps: f64,
    eps_cap: usize,
    n: usize,
) -> Result<()> {
    if gen.is_zero() {
        return Ok(());
    }
    let r = gen.eps_order();
    if r > eps_cap {
        return Ok(());
    }
    let (q, p) = state.split_at(n);
    let q = q.to_vec();
    let p = p.to_vec();
    let mut shift = vec![0.0; 2 * n];

    // Seeds L[coordinate]: angles get −∂χ/∂p̂_j, actions +∂χ/∂q̂_j (+ζ_j for
    // a translation generator, whose angle seeds vanish).
    for j in 0..n {
        let mut seeds: Vec<(usize, FtSeries<f64>)> = Vec::new();
        match gen {
            Generator::Series { chi, .. } => {
                seeds.push((j, chi.partial_derivative(Var::Action(j))?.scaled_real(-1.0)));
                seeds.push((n + j, chi.partial_derivative(Var::Angle(j))?));
            }
            Generator::Translation { x0, zeta, .. } => {
                let dq = x0.partial_derivative(Var::Angle(j))?.add(&zeta[j])?;
                seeds.push((n + j, dq));
            }
        }
        for (slot, seed) in seeds {
            let mut term = seed;
            let mut m = 1usize;
            loop {
                if m * r > eps_cap || term.is_empty() {
                    break;
                }
                shift[slot] +=
                    eps.powi((m * r) as i32) * term.evaluate(&p, &q, qstar)?.re;
                term = gen.derivative(&term)?.scaled_real(1.0 / (m as f64 + 1.0));
                m += 1;
            }
        }
    }
    for (s, d) in state.iter_mut().zip(&shift) {
        *s += d;
    }
    Ok(())
}

/// Map a point from normalized to original coordinates: the generating maps
/// are applied innermost-last-step-first, translation after averaging within
/// each step, truncated at the expansion's ε cap.
pub fn map_back(
    steps: &[GeneratingStep<f64>],
    state: &[f64],
    qstar: &[f64],
    eps: f64,
    eps_cap: usize,
) -> Result<Vec<f64>> {
    let n = state.len() / 2;
    let mut y = state.to_vec();
    for step in steps.iter().rev() {
        apply_generator(&step.second_generator()?, &mut y, qstar, eps, eps_cap, n)?;
        apply_generator(&step.first_generator()?, &mut y, qstar, eps, eps_cap, n)?;
    }
    Ok(y)
}

/// Inverse of [`map_back`]: original to normalized coordinates, via the
/// negated generators in the opposite order.
pub fn map_forward(
    steps: &[GeneratingStep<f64>],
    state: &[f64],
    qstar: &[f64],
    eps: f64,
    eps_cap: usize,
) -> Result<Vec<f64>> {
    let n = state.len() / 2;
    let mut y = state.to_vec();
    for step in steps {
        apply_generator(
            &step.first_generator()?.negated(),
            &mut y,
            qstar,
            eps,
            eps_cap,
            n,
        )?;
        apply_generator(
            &step.second_generator()?.negated(),
            &mut y,
            qstar,
            eps,
            eps_cap,
            n,
        )?;
    }
    Ok(y)
}
