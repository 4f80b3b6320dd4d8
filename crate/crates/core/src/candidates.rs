//! Roots and one-parameter families of the candidate systems on the torus.
//!
//! The candidate system `F₀ : T^{n−1} → R^{n−1}` is the gradient of the
//! order-1 slow potential; its zeros are the phase configurations that can
//! survive as periodic orbits. Zeros come in two kinds: isolated points
//! (nondegenerate Jacobian) and one-parameter families, along which the
//! Jacobian has a kernel spanned by the curve tangent. The sweep here finds
//! both: a grid of Newton starts classifies converged roots by the smallest
//! singular value of the Jacobian, degenerate ones seed a pseudo-arclength
//! trace that follows each family around the torus, and the next-order system
//! `F₁` is paired against the kernel along the way — the zeros of that
//! pairing are the only family points that can persist.
//!
//! Tracing works in the universal cover (angles unwrapped, so curves that
//! wind around the torus stay continuous) and closure is tested in the torus
//! metric. At family crossings the kernel is two-dimensional; continuity of
//! the tangent carries the trace through, and seeds sitting exactly on a
//! crossing are skipped in favor of generic seeds of the same curves.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::series::{FtSeries, Var};

/// A candidate system on the slow torus: the component series together with
/// their angle-gradient, ready for pointwise evaluation.
pub struct TorusSystem {
    comps: Vec<FtSeries<f64>>,
    jac: Vec<Vec<FtSeries<f64>>>,
    n_slow: usize,
    n_dyn: usize,
    n_par: usize,
}

impl TorusSystem {
    pub fn new(comps: Vec<FtSeries<f64>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(CoreError::InvalidInput("empty candidate system".into()));
        }
        let n_dyn = comps[0].n_dyn();
        let n_par = comps[0].n_par();
        let n_slow = n_dyn - 1;
        if comps.len() != n_slow {
            return Err(CoreError::DimensionMismatch(format!(
                "{} components for {} slow angles",
                comps.len(),
                n_slow
            )));
        }
        for c in &comps {
            if c.grade() != 0 || c.n_dyn() != n_dyn || c.n_par() != n_par {
                return Err(CoreError::InvalidInput(
                    "candidate components must be grade-0 series of equal shape".into(),
                ));
            }
        }
        let jac = comps
            .iter()
            .map(|c| {
                (1..n_dyn)
                    .map(|j| c.partial_derivative(Var::Angle(j)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TorusSystem {
            comps,
            jac,
            n_slow,
            n_dyn,
            n_par,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_slow
    }

    fn point(&self, q_slow: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut q = vec![0.0; self.n_dyn];
        q[1..].copy_from_slice(q_slow);
        (vec![0.0; self.n_dyn], q, vec![0.0; self.n_par])
    }

    pub fn eval(&self, q_slow: &[f64]) -> Result<DVector<f64>> {
        let (p, q, qs) = self.point(q_slow);
        let mut out = DVector::zeros(self.n_slow);
        for (i, c) in self.comps.iter().enumerate() {
            out[i] = c.evaluate(&p, &q, &qs)?.re;
        }
        Ok(out)
    }

    pub fn jacobian(&self, q_slow: &[f64]) -> Result<DMatrix<f64>> {
        let (p, q, qs) = self.point(q_slow);
        let mut out = DMatrix::zeros(self.n_slow, self.n_slow);
        for i in 0..self.n_slow {
            for j in 0..self.n_slow {
                out[(i, j)] = self.jac[i][j].evaluate(&p, &q, &qs)?.re;
            }
        }
        Ok(out)
    }

    /// Coefficient-level bound on the Jacobian entries over the whole torus,
    /// used as an absolute reference for singular-value thresholds. At points
    /// where the Jacobian itself nearly vanishes (e.g. where several families
    /// cross) a purely local relative test would see a well-conditioned tiny
    /// matrix and misclassify.
    pub fn jacobian_scale(&self) -> f64 {
        self.jac
            .iter()
            .flatten()
            .map(|s| s.coeff_l1())
            .fold(1e-12, f64::max)
    }
}

/// A nondegenerate zero of the candidate system.
#[derive(Clone, Debug)]
pub struct IsolatedPoint {
    /// Slow angles in `[0, 2π)^{n−1}`.
    pub q: Vec<f64>,
    pub residual: f64,
    pub jacobian_det: f64,
    pub sigma_min: f64,
}

/// A sampled one-parameter family of zeros.
#[derive(Clone, Debug)]
pub struct FamilyCurve {
    /// Samples in `[0, 2π)^{n−1}`, ordered along the curve.
    pub points: Vec<Vec<f64>>,
    /// Unit kernel vectors `a₁`, continuously oriented along the curve.
    pub tangents: Vec<Vec<f64>>,
    /// `⟨F₁, a₁⟩` per sample, when a next-order system was supplied.
    pub pairings: Option<Vec<f64>>,
    /// Whether the trace returned to its start (a closed loop on the torus).
    pub closed: bool,
    /// Whether the Jacobian was symmetric along the whole curve (the
    /// hypothesis under which the pairing criterion is necessary).
    pub symmetric_jacobian: bool,
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub isolated: Vec<IsolatedPoint>,
    pub families: Vec<FamilyCurve>,
}

#[derive(Clone, Debug)]
pub struct CandidateOptions {
    /// Newton starts per angle (the sweep uses `grid^{n−1}` seeds).
    pub grid: usize,
    pub newton_tol: f64,
    /// Torus distance under which two roots are the same.
    pub dedup_tol: f64,
    /// Relative singular-value threshold separating families from isolated
    /// points: degenerate iff `σ_min < sigma_rel · σ_max`.
    pub sigma_rel: f64,
    /// Arclength step of the family trace.
    pub arc_step: f64,
    pub max_steps: usize,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            grid: 16,
            newton_tol: 1e-13,
            dedup_tol: 1e-6,
            sigma_rel: 1e-6,
            arc_step: 0.05,
            max_steps: 4000,
        }
    }
}

fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut y = x % tau;
    if y < 0.0 {
        y += tau;
    }
    // Roots an ulp below 2π are the same torus point as 0; canonicalize so
    // reports don't show 6.2831853… for the origin.
    if tau - y < 1e-9 {
        y = 0.0;
    }
    y
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let d = (a - b).rem_euclid(tau);
    d.min(tau - d)
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| circ_dist(x, y))
        .fold(0.0f64, |acc, d| acc.max(d))
}

/// Truncated-SVD Newton step: `−J⁺ F` with singular values below
/// `1e−10 σ_max` dropped, so steps never explode along a kernel.
fn pinv_step(j: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max();
    let mut step = DVector::zeros(j.ncols());
    for r in 0..svd.singular_values.len() {
        let s = svd.singular_values[r];
        if s <= 1e-10 * smax || s == 0.0 {
            continue;
        }
        let coef = u.column(r).dot(f) / s;
        step += vt.row(r).transpose() * coef;
    }
    -step
}

/// Singular data used for classification and tangents.
struct SvdInfo {
    sigma_min: f64,
    degenerate: bool,
    /// Right singular vectors for singular values below the degeneracy
    /// threshold (the numerical kernel), or the single least-singular
    /// direction when the matrix is full rank.
    kernel: Vec<DVector<f64>>,
}

/// `floor` is the global Jacobian scale (see [`TorusSystem::jacobian_scale`]);
/// degeneracy is judged against `max(σ_max, floor)` so rank decisions stay
/// meaningful where the whole matrix is small.
fn svd_info(j: &DMatrix<f64>, sigma_rel: f64, floor: f64) -> SvdInfo {
    let svd = j.clone().svd(false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let threshold = sigma_rel * smax.max(floor);
    let mut kernel = Vec::new();
    for r in 0..svd.singular_values.len() {
        if svd.singular_values[r] < threshold {
            kernel.push(vt.row(r).transpose());
        }
    }
    let degenerate = !kernel.is_empty();
    if kernel.is_empty() {
        // Keep the least-singular direction available for tangent seeding.
        let r = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        kernel.push(vt.row(r).transpose());
    }
    SvdInfo {
        sigma_min: smin,
        degenerate,
        kernel,
    }
}

/// Newton-polish one seed; `None` if it does not converge.
fn polish(system: &TorusSystem, seed: &[f64], tol: f64) -> Result<Option<Vec<f64>>> {
    let mut x = DVector::from_column_slice(seed);
    for _ in 0..60 {
        let f = system.eval(x.as_slice())?;
        if f.amax() < tol {
            return Ok(Some(x.as_slice().to_vec()));
        }
        let j = system.jacobian(x.as_slice())?;
        let dx = pinv_step(&j, &f);
        if !dx.iter().all(|v| v.is_finite()) || dx.amax() > 10.0 {
            return Ok(None);
        }
        x += dx;
    }
    Ok(None)
}

/// Tangent through a possibly multi-dimensional kernel: project the previous
/// tangent onto the kernel (carrying the trace across family crossings), or
/// take the most singular direction when starting out.
fn kernel_tangent(info: &SvdInfo, prev: Option<&DVector<f64>>) -> DVector<f64> {
    let mut t = match prev {
        Some(p) => {
            let mut acc = DVector::zeros(p.len());
            for v in &info.kernel {
                acc += v * v.dot(p);
            }
            if acc.norm() < 1e-10 {
                info.kernel[0].clone()
            } else {
                acc
            }
        }
        None => info.kernel[0].clone(),
    };
    t /= t.norm();
    if prev.is_none() {
        // Deterministic orientation for fresh tangents.
        if let Some(v) = t.iter().find(|v| v.abs() > 1e-9) {
            if *v < 0.0 {
                t = -t;
            }
        }
    }
    t
}

/// One pseudo-arclength corrector solve: `F(x) = 0` plus the plane through
/// the predictor orthogonal to the tangent.
fn palc_correct(
    system: &TorusSystem,
    pred: &DVector<f64>,
    tangent: &DVector<f64>,
    tol: f64,
) -> Result<Option<DVector<f64>>> {
    let n = system.dim();
    let mut x = pred.clone();
    for _ in 0..25 {
        let f = system.eval(x.as_slice())?;
        let constraint = tangent.dot(&(&x - pred));
        if f.amax() < tol && constraint.abs() < tol.max(1e-12) {
            return Ok(Some(x));
        }
        let j = system.jacobian(x.as_slice())?;
        let mut aug = DMatrix::zeros(n + 1, n);
        aug.view_mut((0, 0), (n, n)).copy_from(&j);
        aug.row_mut(n).copy_from(&tangent.transpose());
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-&f));
        rhs[n] = -constraint;
        let dx = pinv_step(&aug, &(-rhs));
        if !dx.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        x += dx;
    }
    Ok(None)
}

/// Trace the family through `start` (a degenerate root with a 1-dimensional
/// kernel). Returns samples in the universal cover, ordered along the curve.
fn trace_family(
    system: &TorusSystem,
    start: &[f64],
    opts: &CandidateOptions,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, bool)> {
    let x0 = DVector::from_column_slice(start);
    let floor = system.jacobian_scale();
    let info0 = svd_info(&system.jacobian(start)?, opts.sigma_rel, floor);
    let t0 = kernel_tangent(&info0, None);

    let forward = march(system, &x0, &t0, opts)?;
    if forward.2 {
        return Ok(forward);
    }
    // Open so far: extend backward and splice.
    let backward = march(system, &x0, &(-&t0), opts)?;
    let (mut pts, mut tans, _) = backward;
    pts.reverse();
    tans.reverse();
    // Backward tangents point the wrong way along the spliced curve.
    for t in &mut tans {
        *t = -&*t;
    }
    pts.pop(); // drop the duplicated start
    tans.pop();
    let (fpts, ftans, _) = forward;
    pts.extend(fpts);
    tans.extend(ftans);
    Ok((pts, tans, false))
}

fn march(
    system: &TorusSystem,
    x0: &DVector<f64>,
    t0: &DVector<f64>,
    opts: &CandidateOptions,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, bool)> {
    let floor = system.jacobian_scale();
    let mut pts = vec![x0.clone()];
    let mut tans = vec![t0.clone()];
    let mut x = x0.clone();
    let mut t = t0.clone();
    for step in 0..opts.max_steps {
        let pred = &x + &t * opts.arc_step;
        let Some(next) = palc_correct(system, &pred, &t, opts.newton_tol)? else {
            return Ok((pts, tans, false));
        };
        let info = svd_info(&system.jacobian(next.as_slice())?, opts.sigma_rel, floor);
        let mut tn = kernel_tangent(&info, Some(&t));
        if tn.dot(&t) < 0.0 {
            tn = -tn;
        }
        x = next;
        t = tn;
        pts.push(x.clone());
        tans.push(t.clone());
        if step >= 4 && torus_dist(x.as_slice(), x0.as_slice()) < 0.6 * opts.arc_step {
            return Ok((pts, tans, true));
        }
    }
    Ok((pts, tans, false))
}

/// Gauss–Newton refinement of one pairing zero on a family: solves the
/// overdetermined system `F₀(q) = 0`, `⟨F₁(q), a₁(q)⟩ = 0` for the slow
/// angles, where `a₁(q)` is the unit kernel tangent of `DF₀` oriented along
/// the supplied tangent. Family zeros interpolated from curve samples carry
/// the sampling error of the trace; this sharpens them to solver precision,
/// which the downstream shooting and block-fit stages need. Returns the
/// refined point (wrapped to `[0, 2π)^{n−1}`) and its tangent.
pub fn refine_family_zero(
    f0: &TorusSystem,
    f1: &TorusSystem,
    q0: &[f64],
    tangent0: &[f64],
    opts: &CandidateOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = f0.dim();
    let floor = f0.jacobian_scale();
    let orient = DVector::from_column_slice(tangent0);
    let tangent_at = |q: &DVector<f64>| -> Result<DVector<f64>> {
        let info = svd_info(&f0.jacobian(q.as_slice())?, opts.sigma_rel, floor);
        let mut t = kernel_tangent(&info, Some(&orient));
        if t.dot(&orient) < 0.0 {
            t = -t;
        }
        Ok(t)
    };
    let pairing_at = |q: &DVector<f64>| -> Result<f64> {
        Ok(f1.eval(q.as_slice())?.dot(&tangent_at(q)?))
    };

    let mut q = DVector::from_column_slice(q0);
    let scale = 1.0 + floor + f1.eval(q0)?.amax();
    let tol = 1e-12 * scale;
    for _ in 0..25 {
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&f0.eval(q.as_slice())?);
        r[n] = pairing_at(&q)?;
        if r.amax() < tol {
            let t = tangent_at(&q)?;
            return Ok((
                q.iter().map(|&v| wrap_angle(v)).collect(),
                t.as_slice().to_vec(),
            ));
        }
        // The F₀ rows get the exact Jacobian; the pairing row is finite-
        // differenced because the kernel tangent itself moves with q.
        let mut jac = DMatrix::zeros(n + 1, n);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&f0.jacobian(q.as_slice())?);
        let h = 1e-6;
        for j in 0..n {
            let mut qp = q.clone();
            qp[j] += h;
            let mut qm = q.clone();
            qm[j] -= h;
            jac[(n, j)] = (pairing_at(&qp)? - pairing_at(&qm)?) / (2.0 * h);
        }
        let dx = pinv_step(&jac, &r);
        if !dx.iter().all(|v| v.is_finite()) || dx.amax() > 1.0 {
            return Err(CoreError::Numeric(
                "family-zero refinement diverged".into(),
            ));
        }
        q += dx;
    }
    Err(CoreError::Numeric(
        "family-zero refinement did not reach tolerance".into(),
    ))
}

/// Sweep the torus for zeros of `f0`, classify them, trace the families, and
/// evaluate the persistence pairing against `f1` where given.
pub fn candidate_set(
    f0: &TorusSystem,
    f1: Option<&TorusSystem>,
    opts: &CandidateOptions,
) -> Result<CandidateSet> {
    let n = f0.dim();
    let tau = std::f64::consts::TAU;

    // Scale of the system, for absolute residual thresholds.
    let scale: f64 = 1.0 + (0..n)
        .map(|i| f0.comps[i].max_abs())
        .fold(0.0f64, f64::max);
    let accept_tol = 1e-11 * scale;

    // Grid sweep.
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let mut counters = vec![0usize; n];
    loop {
        let seed: Vec<f64> = counters
            .iter()
            .map(|&c| (c as f64 + 0.5) * tau / opts.grid as f64)
            .collect();
        if let Some(root) = polish(f0, &seed, opts.newton_tol.max(accept_tol * 1e-2))? {
            let wrapped: Vec<f64> = root.iter().map(|&v| wrap_angle(v)).collect();
            if f0.eval(&wrapped)?.amax() < accept_tol
                && !roots.iter().any(|r| torus_dist(r, &wrapped) < opts.dedup_tol)
            {
                roots.push(wrapped);
            }
        }
        // Odometer over the grid.
        let mut d = 0;
        loop {
            counters[d] += 1;
            if counters[d] < opts.grid {
                break;
            }
            counters[d] = 0;
            d += 1;
            if d == n {
                break;
            }
        }
        if d == n {
            break;
        }
    }

    // Classify.
    let floor = f0.jacobian_scale();
    let mut isolated = Vec::new();
    let mut degenerate: Vec<(Vec<f64>, usize)> = Vec::new();
    for root in roots {
        let j = f0.jacobian(&root)?;
        let info = svd_info(&j, opts.sigma_rel, floor);
        if info.degenerate {
            let kdim = info.kernel.len();
            degenerate.push((root, kdim));
        } else {
            isolated.push(IsolatedPoint {
                residual: f0.eval(&root)?.amax(),
                jacobian_det: j.determinant(),
                sigma_min: info.sigma_min,
                q: root,
            });
        }
    }
    isolated.sort_by(|a, b| a.q.partial_cmp(&b.q).unwrap());

    // Trace families from generic degenerate roots; crossings (kernel
    // dimension ≥ 2) only ever get claimed, never used as trace starts.
    let mut families: Vec<FamilyCurve> = Vec::new();
    let mut claimed = vec![false; degenerate.len()];
    for i in 0..degenerate.len() {
        if claimed[i] || degenerate[i].1 != 1 {
            continue;
        }
        let (pts, tans, closed) = trace_family(f0, &degenerate[i].0, opts)?;
        if pts.len() < 4 {
            continue;
        }
        // Claim every degenerate root lying on this curve.
        for (j, (root, _)) in degenerate.iter().enumerate() {
            if !claimed[j]
                && pts
                    .iter()
                    .any(|p| torus_dist(p.as_slice(), root) < 0.8 * opts.arc_step)
            {
                claimed[j] = true;
            }
        }
        let mut symmetric = true;
        for p in &pts {
            let j = f0.jacobian(p.as_slice())?;
            let asym = (&j - j.transpose()).abs().max();
            if asym > 1e-8 * (1.0 + j.abs().max()) {
                symmetric = false;
                break;
            }
        }
        let pairings = match f1 {
            Some(sys) => {
                let mut vals = Vec::with_capacity(pts.len());
                for (p, t) in pts.iter().zip(&tans) {
                    vals.push(sys.eval(p.as_slice())?.dot(t));
                }
                Some(vals)
            }
            None => None,
        };
        families.push(FamilyCurve {
            points: pts
                .iter()
                .map(|p| p.iter().map(|&v| wrap_angle(v)).collect())
                .collect(),
            tangents: tans.iter().map(|t| t.as_slice().to_vec()).collect(),
            pairings,
            closed,
            symmetric_jacobian: symmetric,
        });
    }
    families.sort_by(|a, b| a.points[0].partial_cmp(&b.points[0]).unwrap());

    Ok(CandidateSet { isolated, families })
}
