//! End-to-end checks of the four-site lattice cell against its closed-form
//! results: the zero set and its three families, the first-step translation
//! coefficients, the second-order system and its pairing, the fitted
//! period-map blocks and γ, eigenvalue scaling at a degenerate candidate,
//! certified continuation of the in/out-of-phase configurations, the exact
//! family construction, the combinatorial bound suite, the algebra and
//! dynamics property suites, and the scaling laws behind the continuation
//! bound.
//!
//! Runs without a harness so every criterion prints exactly one line,
//!
//! ```text
//! ACCEPTANCE  3 second-order-system          PASS  ...
//! ```
//!
//! A FAIL line is honest output, not a broken build: two closed-form block
//! identities hold for the bare potential Hessian but not for the flow-fitted
//! Jacobian (the line says what was measured instead). The process exits
//! nonzero only when a pinned measurement drifts or a hard invariant breaks.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torbit_core::candidates::{
    candidate_set, refine_family_zero, CandidateOptions, CandidateSet, TorusSystem,
};
use torbit_core::chart::{expand_hamiltonian, Coupling, CouplingKind, ModelSpec};
use torbit_core::estimates::{
    floor_lemma_sweep, measure_e, verify_lemmone, EstimateParams, NuTable,
};
use torbit_core::expansion::{Caps, EpsExpansion};
use torbit_core::flow::{flow, flow_with_variational, CompiledHamiltonian};
use torbit_core::normal_form::{normalize, NormalFormResult};
use torbit_core::series::{FtSeries, TermKey};
use torbit_core::shooting::{
    gamma_criterion, kernel_analysis, map_back, map_forward, NkOptions, ShootingSetup,
};

type R<T> = Result<T, Box<dyn std::error::Error>>;

/// Fail the criterion (hard error, nonzero exit) unless `cond` holds.
macro_rules! check {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+).into());
        }
    };
}

const TAU: f64 = 2.0 * PI;

/// Distance from `x` to the nearest multiple of 2π.
fn circ(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    y.min(TAU - y)
}

/// Componentwise circular distance between two angle tuples.
fn angle_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| circ(x - y))
        .fold(0.0, f64::max)
}

/// Least-squares slope of ln y against ln x.
fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Shared state: the lattice cell expanded and normalized once.
struct Ctx {
    input: EpsExpansion<f64>,
    nf: NormalFormResult<f64>,
    f0: TorusSystem,
    f1: TorusSystem,
    set: CandidateSet,
    sweep_secs: f64,
}

impl Ctx {
    fn build() -> R<Ctx> {
        let model = ModelSpec::dnls_square_cell();
        let (_, input) = expand_hamiltonian(&model, Caps::new(4, 2))?;
        let nf = normalize(&input, 2)?;
        let systems = nf.candidate_systems()?;
        let f0 = TorusSystem::new(systems[0].clone())?;
        let f1 = TorusSystem::new(systems[1].clone())?;
        let t = Instant::now();
        let set = candidate_set(&f0, Some(&f1), &CandidateOptions::default())?;
        let sweep_secs = t.elapsed().as_secs_f64();
        Ok(Ctx {
            input,
            nf,
            f0,
            f1,
            set,
            sweep_secs,
        })
    }

    fn period(&self) -> f64 {
        TAU / self.input.omega()
    }
}

// ---------------------------------------------------------------------------
// Trigonometric projection helpers (exact on an 8×8×8 grid for |k| ≤ 2).

const GRID: usize = 8;

/// Project sampled torus data onto `cos(k·q)` / `sin(k·q)` for the given
/// harmonics. Returns (cos coefficients, sin coefficients, means, max
/// residual after removing the projected content) per component.
struct Projection {
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    mean: Vec<f64>,
    residual: f64,
    scale: f64,
}

fn project(values: &[Vec<f64>], harmonics: &[[i32; 3]]) -> Projection {
    let ncomp = values.len();
    let total = (GRID * GRID * GRID) as f64;
    let mut cos = vec![vec![0.0; harmonics.len()]; ncomp];
    let mut sin = vec![vec![0.0; harmonics.len()]; ncomp];
    let mut mean = vec![0.0; ncomp];
    let mut scale = 0.0f64;
    let mut idx = 0;
    let mut phases = Vec::with_capacity(GRID * GRID * GRID);
    for a in 0..GRID {
        for b in 0..GRID {
            for c in 0..GRID {
                let q = [
                    TAU * a as f64 / GRID as f64,
                    TAU * b as f64 / GRID as f64,
                    TAU * c as f64 / GRID as f64,
                ];
                phases.push(q);
                for (j, comp) in values.iter().enumerate() {
                    let v = comp[idx];
                    scale = scale.max(v.abs());
                    mean[j] += v / total;
                    for (h, k) in harmonics.iter().enumerate() {
                        let arg = k[0] as f64 * q[0] + k[1] as f64 * q[1] + k[2] as f64 * q[2];
                        cos[j][h] += 2.0 * v * arg.cos() / total;
                        sin[j][h] += 2.0 * v * arg.sin() / total;
                    }
                }
                idx += 1;
            }
        }
    }
    // Residual: what the listed harmonics and the mean do not explain.
    let mut residual = 0.0f64;
    for (j, comp) in values.iter().enumerate() {
        for (idx, q) in phases.iter().enumerate() {
            let mut rec = mean[j];
            for (h, k) in harmonics.iter().enumerate() {
                let arg = k[0] as f64 * q[0] + k[1] as f64 * q[1] + k[2] as f64 * q[2];
                rec += cos[j][h] * arg.cos() + sin[j][h] * arg.sin();
            }
            residual = residual.max((comp[idx] - rec).abs());
        }
    }
    Projection {
        cos,
        sin,
        mean,
        residual,
        scale: scale.max(1e-300),
    }
}

/// Sample a torus system on the projection grid.
fn sample_system(sys: &TorusSystem) -> R<Vec<Vec<f64>>> {
    let n = sys.dim();
    let mut values = vec![Vec::with_capacity(GRID * GRID * GRID); n];
    for a in 0..GRID {
        for b in 0..GRID {
            for c in 0..GRID {
                let q = [
                    TAU * a as f64 / GRID as f64,
                    TAU * b as f64 / GRID as f64,
                    TAU * c as f64 / GRID as f64,
                ];
                let v = sys.eval(&q)?;
                for j in 0..n {
                    values[j].push(v[j]);
                }
            }
        }
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// Criteria.

/// 1: the first-order zero set — two isolated points and three closed
/// families, found by the sweep within its time budget.
fn c1_zero_set(ctx: &Ctx) -> R<(bool, String)> {
    let nearest = |target: &[f64]| {
        ctx.set
            .isolated
            .iter()
            .map(|p| angle_dev(&p.q, target))
            .fold(f64::INFINITY, f64::min)
    };
    let d_zero = nearest(&[0.0, 0.0, 0.0]);
    let d_pi = nearest(&[PI, PI, PI]);
    check!(
        d_zero < 1e-6 && d_pi < 1e-6,
        "isolated zeros missed the in/out-of-phase points: dev {d_zero:.2e}, {d_pi:.2e}"
    );

    // The three one-parameter families, by their defining relations (mod 2π).
    let rels: [(&str, fn(&[f64]) -> f64); 3] = [
        ("(θ,θ,π−θ)", |q| circ(q[0] - q[1]).max(circ(q[0] + q[2] - PI))),
        ("(θ,π−θ,θ)", |q| circ(q[0] - q[2]).max(circ(q[0] + q[1] - PI))),
        ("(θ,π−θ,π−θ)", |q| circ(q[1] - q[2]).max(circ(q[0] + q[1] - PI))),
    ];
    check!(
        ctx.set.families.len() == 3,
        "expected 3 family curves, sweep found {}",
        ctx.set.families.len()
    );
    let mut claimed = [usize::MAX; 3];
    let mut max_dev = 0.0f64;
    for (fi, fam) in ctx.set.families.iter().enumerate() {
        check!(fam.closed, "family {fi} did not close");
        let (best, dev) = rels
            .iter()
            .enumerate()
            .map(|(ri, (_, rel))| {
                let d = fam.points.iter().map(|p| rel(p)).fold(0.0, f64::max);
                (ri, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        check!(
            dev < 1e-6,
            "family {fi} strays {dev:.2e} from the nearest closed form {}",
            rels[best].0
        );
        check!(
            claimed[best] == usize::MAX,
            "two traced families match the same closed form {}",
            rels[best].0
        );
        claimed[best] = fi;
        max_dev = max_dev.max(dev);
    }
    check!(
        ctx.sweep_secs < 10.0,
        "candidate sweep took {:.1}s (budget 10s)",
        ctx.sweep_secs
    );
    Ok((
        true,
        format!(
            "(0,0,0)/(π,π,π) found to {:.1e}; families (θ,θ,π−θ), (θ,π−θ,θ), (θ,π−θ,π−θ) all matched to {:.1e}; sweep {:.1}s",
            d_zero.max(d_pi),
            max_dev.max(1e-16),
            ctx.sweep_secs
        ),
    ))
}

/// 2: the first-step action translation ζ is the closed cosine table with
/// coefficients in {0, −1/2, −1} after one overall normalization.
fn c2_translation_table(ctx: &Ctx) -> R<(bool, String)> {
    let zeta = &ctx.nf.steps[0].zeta;
    check!(zeta.len() == 4, "expected 4 translation components");
    let harmonics = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]];
    let table: [[f64; 4]; 4] = [
        [-1.0, -1.0, -1.0, -1.0],
        [-0.5, -1.0, -1.0, -0.5],
        [0.0, -0.5, -1.0, -0.5],
        [0.0, 0.0, -0.5, -0.5],
    ];

    // Sample each component over the grid; the series may carry its angles
    // as parameter harmonics, so feed the same value both ways.
    let npar = zeta[0].n_par();
    let mut values = vec![Vec::with_capacity(GRID * GRID * GRID); 4];
    for a in 0..GRID {
        for b in 0..GRID {
            for c in 0..GRID {
                let slow = [
                    TAU * a as f64 / GRID as f64,
                    TAU * b as f64 / GRID as f64,
                    TAU * c as f64 / GRID as f64,
                ];
                let q = [0.0, slow[0], slow[1], slow[2]];
                let p = [0.0; 4];
                let qs = if npar == 3 { slow.to_vec() } else { vec![0.0; npar] };
                for (j, z) in zeta.iter().enumerate() {
                    values[j].push(z.evaluate(&p, &q, &qs)?.re);
                }
            }
        }
    }
    let proj = project(&values, &harmonics);

    // Normalize on the (0,0,1) cosine of the fourth component (table −1/2).
    let s = proj.cos[3][2] / (-0.5);
    check!(
        s.is_finite() && s.abs() > 1e-12,
        "degenerate normalization: reference coefficient {:.3e}",
        proj.cos[3][2]
    );
    let mut max_err = 0.0f64;
    for j in 0..4 {
        for h in 0..4 {
            let got = proj.cos[j][h] / s;
            max_err = max_err.max((got - table[j][h]).abs());
            check!(
                (got - table[j][h]).abs() < 1e-10,
                "ζ{} cosine at k={:?}: {got:.12} vs {}",
                j + 1,
                harmonics[h],
                table[j][h]
            );
            check!(
                proj.sin[j][h].abs() < 1e-10 * proj.scale,
                "ζ{} has a sine component {:.2e} at k={:?}",
                j + 1,
                proj.sin[j][h],
                harmonics[h]
            );
        }
        check!(
            proj.mean[j].abs() < 1e-10 * proj.scale,
            "ζ{} has a constant offset {:.2e}",
            j + 1,
            proj.mean[j]
        );
    }
    check!(
        proj.residual < 1e-10 * proj.scale,
        "ζ carries harmonics outside the table (residual {:.2e})",
        proj.residual
    );
    Ok((
        true,
        format!(
            "all 16 cosine coefficients rational per table (max dev {:.1e}), no stray content ({:.1e}); scale s = {s:.6}",
            max_err, proj.residual
        ),
    ))
}

/// 3: the second-order system is the closed sine table up to one positive
/// factor, and its pairing along the first family is a pure sin 2θ with
/// zeros at the parity points; the second family pairs to zero identically.
fn c3_second_order_system(ctx: &Ctx) -> R<(bool, String)> {
    // First-order rows: −8(sin q_j + sin(q₂+q₃+q₄)) up to one factor.
    let harm0 = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]];
    let table0: [[f64; 4]; 3] = [
        [-8.0, 0.0, 0.0, -8.0],
        [0.0, -8.0, 0.0, -8.0],
        [0.0, 0.0, -8.0, -8.0],
    ];
    let vals0 = sample_system(&ctx.f0)?;
    let p0 = project(&vals0, &harm0);
    let s0 = p0.sin[0][0] / (-8.0);
    check!(s0 > 0.0, "first-order scale is not positive: {s0:.3e}");
    for j in 0..3 {
        for h in 0..4 {
            check!(
                (p0.sin[j][h] / s0 - table0[j][h]).abs() < 1e-9,
                "first-order row {} sine at k={:?}: {:.9} vs {}",
                j + 1,
                harm0[h],
                p0.sin[j][h] / s0,
                table0[j][h]
            );
            check!(
                p0.cos[j][h].abs() < 1e-9 * p0.scale,
                "first-order row {} has cosine content {:.2e}",
                j + 1,
                p0.cos[j][h]
            );
        }
    }
    check!(
        p0.residual < 1e-9 * p0.scale,
        "first-order rows carry extra harmonics ({:.2e})",
        p0.residual
    );

    // Second-order rows: the ten-harmonic sine table, same positive-factor
    // convention. Harmonic order: see `table1` rows.
    let harm1 = [
        [2, 0, 0],
        [1, -1, 0],
        [1, 1, 0],
        [0, 2, 0],
        [0, 1, -1],
        [0, 1, 1],
        [0, 0, 2],
        [2, 2, 2],
        [2, 1, 1],
        [1, 1, 2],
    ];
    let table1: [[f64; 10]; 3] = [
        [2.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 1.0],
        [0.0, -1.0, 2.0, 2.0, 1.0, 2.0, 0.0, 2.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 0.0, -1.0, 2.0, 2.0, 2.0, 1.0, 2.0],
    ];
    let vals1 = sample_system(&ctx.f1)?;
    let p1 = project(&vals1, &harm1);
    let s1 = p1.sin[0][0] / 2.0;
    check!(s1 > 0.0, "second-order scale is not positive: {s1:.3e}");
    let mut max_dev1 = 0.0f64;
    for j in 0..3 {
        for h in 0..10 {
            let got = p1.sin[j][h] / s1;
            max_dev1 = max_dev1.max((got - table1[j][h]).abs());
            check!(
                (got - table1[j][h]).abs() < 1e-9,
                "second-order row {} sine at k={:?}: {got:.9} vs {}",
                j + 1,
                harm1[h],
                table1[j][h]
            );
            check!(
                p1.cos[j][h].abs() < 1e-9 * p1.scale,
                "second-order row {} has cosine content {:.2e} at k={:?}",
                j + 1,
                p1.cos[j][h],
                harm1[h]
            );
        }
    }
    check!(
        p1.residual < 1e-9 * p1.scale,
        "second-order rows carry harmonics outside the table ({:.2e})",
        p1.residual
    );

    // Pairing along (θ,θ,π−θ) with tangent (1,1,−1): c·sin 2θ, c = 8·s1.
    // The third family with tangent (1,−1,−1) gives the same function; the
    // second family with tangent (1,−1,1) pairs to zero.
    let c_expect = 8.0 * s1;
    let mut dev_pairing = 0.0f64;
    let mut max_q2 = 0.0f64;
    for k in 0..64 {
        let th = TAU * k as f64 / 64.0;
        let g1 = ctx.f1.eval(&[th, th, PI - th])?.dot(&DVector::from_column_slice(&[1.0, 1.0, -1.0]));
        let g3 = ctx.f1.eval(&[th, PI - th, PI - th])?.dot(&DVector::from_column_slice(&[1.0, -1.0, -1.0]));
        dev_pairing = dev_pairing.max((g1 - c_expect * (2.0 * th).sin()).abs());
        dev_pairing = dev_pairing.max((g3 - c_expect * (2.0 * th).sin()).abs());
        let g2 = ctx.f1.eval(&[th, PI - th, th])?.dot(&DVector::from_column_slice(&[1.0, -1.0, 1.0]));
        max_q2 = max_q2.max(g2.abs());
    }
    check!(
        dev_pairing < 1e-10 * c_expect.abs().max(1.0),
        "pairing is not c·sin 2θ (dev {dev_pairing:.2e})"
    );
    check!(
        max_q2 < 1e-10,
        "second-family pairing should vanish, max {max_q2:.2e}"
    );

    // Zeros of the pairing refine onto the parity points.
    let unit = [1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), -1.0 / 3f64.sqrt()];
    let opts = CandidateOptions::default();
    let mut zero_dev = 0.0f64;
    for m in 0..4 {
        let th = m as f64 * PI / 2.0;
        let seed = [th + 0.1, th + 0.1, PI - th - 0.1];
        let (z, _) = refine_family_zero(&ctx.f0, &ctx.f1, &seed, &unit, &opts)?;
        zero_dev = zero_dev.max(angle_dev(&z, &[th, th, PI - th]));
    }
    check!(
        zero_dev < 1e-8,
        "refined pairing zeros miss the parity points by {zero_dev:.2e}"
    );
    Ok((
        true,
        format!(
            "both sine tables match (scales {s0:.4}, {s1:.4}; max dev {:.1e}); pairing ≡ 8s·sin2θ to {:.1e}, zeros at θ ∈ {{0,π/2,π,3π/2}} to {:.1e}; flat-family pairing ≤ {:.1e}",
            max_dev1, dev_pairing, zero_dev.max(1e-16), max_q2
        ),
    ))
}

/// 4: fitted period-map blocks. The determinant and γ identities hold; the
/// literal "D₀ = 0" and ring-pattern B₁ displays do not hold for the
/// flow-fitted blocks (they describe the bare potential Hessian), so those
/// two sub-checks report their measured values and the criterion prints
/// FAIL.
fn c4_jacobian_blocks(ctx: &Ctx) -> R<(bool, String)> {
    let t0 = Instant::now();
    let t = ctx.period();
    let ladder = [4e-4, 2e-4, 1e-4];
    let blocks_at = |q: &[f64]| -> R<torbit_core::shooting::JacobianBlocks> {
        let mut setup = ShootingSetup::new(&ctx.nf.h, q.to_vec())?;
        setup.integrator.rel_tol = 1e-11;
        setup.integrator.abs_tol = 1e-11;
        Ok(setup.block_expand(q, &ladder)?)
    };

    let det0 = (blocks_at(&[0.0, 0.0, 0.0])?.b0 / t).determinant();
    let detp = (blocks_at(&[PI, PI, PI])?.b0 / t).determinant();
    check!(
        (det0 - 4.0).abs() < 4e-3,
        "det(B₀/T) at (0,0,0) is {det0:.6}, expected +4"
    );
    check!(
        (detp + 4.0).abs() < 4e-3,
        "det(B₀/T) at (π,π,π) is {detp:.6}, expected −4"
    );

    // Out-of-phase family zero: kernel, γ, and the two display sub-checks.
    let q = [0.0, 0.0, PI];
    let bl = blocks_at(&q)?;
    let ka = kernel_analysis(&bl)?;
    check!(
        ka.chain_length == 2,
        "Jordan chain at (0,0,π) has length {}, expected 2",
        ka.chain_length
    );
    // γ with the non-unit family tangent (1,1,−1): quadratic in the kernel
    // vector, so 3× the unit-vector value.
    let gamma = 3.0 * gamma_criterion(&bl, &ka)?;
    let gamma_rel = (gamma + 4.0 * t).abs() / (4.0 * t);
    check!(
        gamma_rel < 1e-3,
        "γ((1,1,−1)) = {gamma:.6} vs −4T = {:.6} (rel {gamma_rel:.2e})",
        -4.0 * t
    );

    // Sub-check "D₀ = 0" at ε-fit: false for the flow Jacobian. The slow
    // angles drift by t·C·δp̂ inside the period, and that drift couples back
    // through the potential curvature: D₀ = −(T²/2)·D²V₁·C + O(fit). It
    // does annihilate the kernel direction, which is why γ is clean.
    let d0_max = bl.d0.amax();
    let d0_claim_ok = d0_max <= 1e-4 * t;
    let d0_kernel = (bl.d0.transpose() * &ka.a1).amax();
    check!(
        d0_max > 1.0,
        "pinned: D₀ should be O(10) from the kinematic drift, measured {d0_max:.3}"
    );
    check!(
        d0_kernel < 1e-2,
        "pinned: D₀ᵀa₁ should vanish on the kernel, measured {d0_kernel:.2e}"
    );

    // Sub-check B₁ ∝ T·[[−2,−1,−1],[−1,−2,−1],[−1,−1,−2]] at ε-fit: also
    // false for the flow Jacobian, for the same reason. The bare Hessian of
    // the second-order potential does match the ring pattern.
    let pattern = DMatrix::from_row_slice(
        3,
        3,
        &[-2.0, -1.0, -1.0, -1.0, -2.0, -1.0, -1.0, -1.0, -2.0],
    ) * t;
    let fit_factor = |m: &DMatrix<f64>| {
        let num: f64 = m.iter().zip(pattern.iter()).map(|(a, b)| a * b).sum();
        let den: f64 = pattern.iter().map(|b| b * b).sum();
        num / den
    };
    let s_fit = fit_factor(&bl.b1);
    let b1_dev = (&bl.b1 - &pattern * s_fit).amax() / (s_fit.abs() * 2.0 * t).max(1e-300);
    let b1_claim_ok = b1_dev <= 1e-4;
    let bare = -ctx.f1.jacobian(&q)? * t;
    let s_bare = fit_factor(&bare);
    let bare_dev = (&bare - &pattern * s_bare).amax() / (s_bare.abs() * 2.0 * t).max(1e-300);
    check!(
        bare_dev < 1e-9,
        "pinned: bare −T·D²V₂ should equal the ring pattern, dev {bare_dev:.2e}"
    );

    let secs = t0.elapsed().as_secs_f64();
    check!(secs < 120.0, "block fits took {secs:.0}s (budget 120s)");
    let pass = d0_claim_ok && b1_claim_ok;
    Ok((
        pass,
        format!(
            "det(B₀/T) = {det0:.4} / {detp:.4} ok; γ = {gamma:.4} vs −4T rel {gamma_rel:.1e} ok; \
             D₀ = 0 claim: measured max {d0_max:.1} (kinematic T²/2·D²V·C drift; D₀ᵀa₁ = {d0_kernel:.1e}); \
             B₁ ring-pattern claim: ε-fit deviates {b1_dev:.2} entrywise (bare −T·D²V₂ matches to {bare_dev:.1e}); {secs:.0}s",
        ),
    ))
}

/// 5: the two near-zero eigenvalues of M(ε) at the out-of-phase degenerate
/// candidate scale as √ε with the predicted magnitude.
fn c5_eigenvalue_scaling(ctx: &Ctx) -> R<(bool, String)> {
    let q = [0.0, 0.0, PI];
    let mut setup = ShootingSetup::new(&ctx.nf.h, q.to_vec())?;
    setup.integrator.rel_tol = 1e-12;
    setup.integrator.abs_tol = 1e-12;
    let x = DVector::from_column_slice(&[0.0, 0.0, PI, 0.0, 0.0, 0.0, 0.0]);
    let t = ctx.period();
    let epses = [1e-3, 1e-4, 1e-5];
    let mut mags = Vec::new();
    let mut ratios = Vec::new();
    for &eps in &epses {
        let m = setup.jacobian_m(eps, &x)?;
        let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|l| l.norm()).collect();
        moduli.sort_by(f64::total_cmp);
        let target = (eps * 4.0 * t).sqrt();
        for &l in &moduli[..2] {
            let r = l / target;
            check!(
                (0.8..=1.2).contains(&r),
                "|λ| = {l:.6} at ε = {eps:.0e} is {r:.3}× √(4Tε), outside ±20%"
            );
            ratios.push(r);
        }
        mags.push((moduli[0] * moduli[1]).sqrt());
    }
    let slope = log_slope(&epses, &mags);
    check!(
        (slope - 0.5).abs() <= 0.05,
        "eigenvalue log-log slope {slope:.4} is not 0.5 ± 0.05"
    );
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    Ok((
        true,
        format!(
            "slope {slope:.4}; |λ|₁,₂ at ε=1e-3: {:.5}; |λ|/√(4Tε) ∈ [{rmin:.3}, {rmax:.3}]",
            mags[0]
        ),
    ))
}

/// 6: certified continuation from the four in/out-of-phase configurations on
/// the untransformed system, with the slow angles pinned by parity.
fn c6_continuation(ctx: &Ctx) -> R<(bool, String)> {
    let eps = 1e-3;
    let cap = ctx.input.caps().eps_cap;
    let candidates: [[f64; 3]; 4] = [
        [0.0, 0.0, 0.0],
        [PI, PI, PI],
        [0.0, 0.0, PI],
        [PI, PI, 0.0],
    ];
    let mut hs = Vec::new();
    let mut max_res = 0.0f64;
    let mut max_angle = 0.0f64;
    for q in &candidates {
        let mut state0 = vec![0.0; 8];
        state0[1..4].copy_from_slice(q);
        let back = map_back(&ctx.nf.steps, &state0, q, eps, cap)?;
        let mut setup = ShootingSetup::new(&ctx.input, vec![0.0; ctx.input.n_par()])?;
        setup.q1_0 = back[0];
        setup.integrator.rel_tol = 1e-11;
        setup.integrator.abs_tol = 1e-11;
        let x0 = DVector::from_column_slice(&back[1..]);
        let res = setup.newton_kantorovich(eps, &x0, &NkOptions::default())?;
        check!(
            res.converged && res.residual_inf < 1e-10,
            "continuation from ({},{},{}) left residual {:.2e}",
            q[0],
            q[1],
            q[2],
            res.residual_inf
        );
        let cert = res
            .certificate
            .as_ref()
            .ok_or("continuation returned no certificate")?;
        check!(
            cert.certified && cert.h < 0.25,
            "certificate at ({},{},{}) has h = {:.4}",
            q[0],
            q[1],
            q[2],
            cert.h
        );
        let adev = (0..3)
            .map(|j| circ(res.x_star[j] - q[j]))
            .fold(0.0, f64::max);
        check!(
            adev < 1e-10,
            "continued slow angles moved {adev:.2e} off the candidate ({},{},{})",
            q[0],
            q[1],
            q[2]
        );
        hs.push(cert.h);
        max_res = max_res.max(res.residual_inf);
        max_angle = max_angle.max(adev);
    }
    Ok((
        true,
        format!(
            "4/4 certified at ε=1e-3: h = {{{:.1e}, {:.1e}, {:.3}, {:.3}}} < 1/4; residuals ≤ {max_res:.1e}; slow angles pinned to {max_angle:.1e}",
            hs[0], hs[1], hs[2], hs[3]
        ),
    ))
}

/// 7: the flat family is exact — uncoupled rotation at the resonant
/// frequency solves the full system for finite ε.
fn c7_exact_family(ctx: &Ctx) -> R<(bool, String)> {
    let eps = 0.05;
    let mut setup = ShootingSetup::new(&ctx.input, vec![0.0; ctx.input.n_par()])?;
    setup.integrator.rel_tol = 1e-12;
    setup.integrator.abs_tol = 1e-12;
    let mut worst = 0.0f64;
    for k in 0..8 {
        let th = 0.37 + TAU * k as f64 / 8.0;
        let x = DVector::from_column_slice(&[th, PI - th, th, 0.0, 0.0, 0.0, 0.0]);
        let ups = setup.upsilon(eps, &x)?;
        worst = worst.max(ups.amax());
    }
    check!(
        worst < 1e-9,
        "flat-family defect at ε=0.05 reached {worst:.2e}"
    );
    Ok((
        true,
        format!("max ‖Υ‖∞ = {worst:.1e} over 8 sampled θ at ε = 0.05"),
    ))
}

/// 8: the combinatorial bound suite — counting sequence identities, the
/// exhaustive exponent inequality, and the measured margins of the order-2
/// run.
fn c8_estimates(ctx: &Ctx) -> R<(bool, String)> {
    let t0 = Instant::now();
    let mut nu = NuTable::new();
    check!(nu.nu(1, 1) == BigUint::from(5u32), "ν₁,₁ ≠ 5");
    for r in 2..=10 {
        let lhs = nu.nu(r, r);
        let rhs = BigUint::from(5u32) * nu.nu(r - 1, r);
        check!(lhs == rhs, "ν_{{r,r}} = 5ν_{{r−1,r}} fails at r = {r}");
    }
    let twenty = BigUint::from(20u32);
    let hundred = BigUint::from(100u32);
    for s in 1..=14usize {
        let cap = hundred.pow(s as u32);
        for r in 1..=s {
            check!(
                &twenty * nu.nu(r, s) <= cap,
                "20·ν_{{{r},{s}}} exceeds 100^{s}"
            );
        }
    }

    let sweep = floor_lemma_sweep(8, 24, 8)?;
    check!(
        sweep.generic_violations.is_empty(),
        "the exponent inequality failed at {:?}",
        &sweep.generic_violations[..sweep.generic_violations.len().min(3)]
    );
    // The tabulated intermediate exponents over-promise on their discounted
    // low-grade branches; disclose the count rather than hide it.
    check!(
        sweep.table_violations.len() == 21
            && sweep.table_violations.iter().all(|&(_, _, l, _)| l <= 2),
        "discounted-branch exceptions changed: {} rows",
        sweep.table_violations.len()
    );

    let (rho, sigma, d) = (1.0, 1.0, 0.25);
    let e = measure_e(&ctx.input, rho, sigma)?;
    let params = EstimateParams {
        e_bound: e,
        omega: ctx.input.omega(),
        twist_m: ctx.nf.twist_m,
        rho,
        sigma,
        d,
    };
    let report = verify_lemmone(&ctx.nf, &ctx.input, &params)?;
    check!(
        report.min_margin >= 1.0 - 1e-12,
        "a bound margin dipped below 1: {:.6}",
        report.min_margin
    );
    let secs = t0.elapsed().as_secs_f64();
    check!(secs < 30.0, "estimate suite took {secs:.1}s (budget 30s)");
    Ok((
        true,
        format!(
            "ν identities ok (r ≤ 10, s ≤ 14); exponent inequality ok at {} points (21 discounted-branch rows disclosed); margins ≥ {:.3}, E = {e:.3}, ε̂ = {:.2e}; {secs:.1}s",
            sweep.checked, report.min_margin, report.epsilon_star
        ),
    ))
}

/// Random real series with bounded harmonics, mirroring the unit-test
/// generator.
fn random_series(rng: &mut ChaCha8Rng, n_dyn: usize, n_par: usize, grade: usize) -> FtSeries<f64> {
    let mut s = FtSeries::zero(n_dyn, n_par, grade);
    for _ in 0..6 {
        let mut i = vec![0u8; n_dyn];
        for _ in 0..grade {
            i[rng.gen_range(0..n_dyn)] += 1;
        }
        let k: Vec<i16> = (0..n_dyn).map(|_| rng.gen_range(-2..=2)).collect();
        let m: Vec<i16> = (0..n_par).map(|_| rng.gen_range(-2..=2)).collect();
        let coeff = num_complex::Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let key = TermKey::new(i, k, m);
        s.add_term(key.mirrored(), coeff.conj()).unwrap();
        s.add_term(key, coeff).unwrap();
    }
    s.prune(1e-14);
    s.into_real().unwrap()
}

/// 9: algebra properties of the bracket and the weighted norm on random
/// series.
fn c9_algebra(_ctx: &Ctx) -> R<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut max_bracket_dev = 0.0f64;
    for trial in 0..200 {
        let lf = 1 + trial % 3;
        let lg = 1 + (trial / 3) % 2;
        let f = random_series(&mut rng, 3, 1, lf);
        let g = random_series(&mut rng, 3, 1, lg);
        let h = random_series(&mut rng, 3, 1, 1);

        let fg = f.poisson_bracket(&g)?;
        let gf = g.poisson_bracket(&f)?;
        let anti = fg.add(&gf)?.max_abs();
        let scale = 1.0 + fg.max_abs();
        check!(anti < 1e-11 * scale, "antisymmetry violated: {anti:.2e}");
        if !fg.is_empty() {
            check!(
                fg.grade() == lf + lg - 1,
                "bracket grade {} from grades {lf}, {lg}",
                fg.grade()
            );
        }

        // Leibniz: {f, g·h} = {f,g}·h + g·{f,h}.
        let lhs = f.poisson_bracket(&g.mul(&h)?)?;
        let rhs = fg.mul(&h)?.add(&g.mul(&f.poisson_bracket(&h)?)?)?;
        let leib = lhs.sub(&rhs)?.max_abs();
        check!(
            leib < 1e-10 * (1.0 + lhs.max_abs()),
            "Leibniz violated: {leib:.2e}"
        );

        // Jacobi: {f,{g,h}} + {g,{h,f}} + {h,{f,g}} = 0.
        let j1 = f.poisson_bracket(&g.poisson_bracket(&h)?)?;
        let j2 = g.poisson_bracket(&h.poisson_bracket(&f)?)?;
        let j3 = h.poisson_bracket(&fg)?;
        let jac = j1.add(&j2)?.add(&j3)?.max_abs();
        check!(
            jac < 1e-10 * (1.0 + j1.max_abs()),
            "Jacobi violated: {jac:.2e}"
        );
        max_bracket_dev = max_bracket_dev.max(anti / scale).max(jac);
    }

    // Derivative norm inequalities on shrunk domains, three shrink factors.
    let (rho, sigma) = (1.1, 0.8);
    let mut min_slack = f64::INFINITY;
    for _ in 0..100 {
        let f = random_series(&mut rng, 3, 0, 2);
        let base = f.weighted_norm(rho, sigma, 1.0)?;
        for &d in &[0.1, 0.25, 0.5] {
            let alpha = 1.0 - d;
            for j in 0..3 {
                let dp = f
                    .partial_derivative(torbit_core::series::Var::Action(j))?
                    .weighted_norm(rho, sigma, alpha)?;
                let bound = base / (d * rho);
                check!(dp <= bound + 1e-12, "action derivative bound: {dp} > {bound}");
                min_slack = min_slack.min(bound - dp);
                let dq = f
                    .partial_derivative(torbit_core::series::Var::Angle(j))?
                    .weighted_norm(rho, sigma, alpha)?;
                let bound = base / (std::f64::consts::E * d * sigma);
                check!(dq <= bound + 1e-12, "angle derivative bound: {dq} > {bound}");
                min_slack = min_slack.min(bound - dq);
            }
        }
    }

    // Norm monotonicity in the action weight, and the triangle inequality.
    for _ in 0..50 {
        let f = random_series(&mut rng, 3, 1, 2);
        let g = random_series(&mut rng, 3, 1, 2);
        let n1 = f.weighted_norm(rho, sigma, 1.0)?;
        let n2 = f.weighted_norm(rho, sigma, 0.6)?;
        check!(n2 <= n1 + 1e-12, "norm not monotone in α: {n2} > {n1}");
        let sum = f.add(&g)?.weighted_norm(rho, sigma, 1.0)?;
        check!(
            sum <= n1 + g.weighted_norm(rho, sigma, 1.0)? + 1e-10,
            "triangle inequality violated"
        );
    }
    Ok((
        true,
        format!(
            "200 bracket triples (antisymmetry/grade/Leibniz/Jacobi ≤ {max_bracket_dev:.1e}); 1800 derivative bounds hold (min slack {min_slack:.2e}); norms monotone"
        ),
    ))
}

/// 10: numeric dynamics — variational flow against finite differences,
/// energy conservation, symplectic volume, and the coordinate round trip.
fn c10_dynamics(ctx: &Ctx) -> R<(bool, String)> {
    let eps = 1e-3;
    let t = ctx.period();
    let qstar = vec![0.0; ctx.input.n_par()];
    let ham = CompiledHamiltonian::compile(&ctx.input, eps, &qstar)?;
    let mut opts = torbit_core::flow::IntegratorOptions::default();
    opts.rel_tol = 1e-12;
    opts.abs_tol = 1e-12;

    let x0 = [0.1, 0.9, 2.0, -0.7, 0.01, -0.02, 0.015, 0.005];
    let e0 = ham.energy(&x0[..4], &x0[4..]);
    let end = flow(&ham, &x0, t, &opts)?;
    let e1 = ham.energy(&end[..4], &end[4..]);
    let drift = (e1 - e0).abs();
    check!(drift < 1e-9, "energy drifted {drift:.2e} over one period");

    let (endv, v) = flow_with_variational(&ham, &x0, t, &opts)?;
    let endpoint_dev: f64 = end
        .iter()
        .zip(&endv)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check!(
        endpoint_dev < 1e-9,
        "augmented endpoint diverged {endpoint_dev:.2e} from the plain flow"
    );
    let vmax = v.amax();
    let mut fd_dev = 0.0f64;
    let h = 1e-5;
    for j in 0..8 {
        let mut xp = x0;
        xp[j] += h;
        let mut xm = x0;
        xm[j] -= h;
        let fp = flow(&ham, &xp, t, &opts)?;
        let fm = flow(&ham, &xm, t, &opts)?;
        for i in 0..8 {
            fd_dev = fd_dev.max(((fp[i] - fm[i]) / (2.0 * h) - v[(i, j)]).abs());
        }
    }
    check!(
        fd_dev < 1e-6 * (1.0 + vmax),
        "variational matrix off finite differences by {fd_dev:.2e}"
    );

    // Symplectic volume over a genuine periodic orbit (a flat-family point).
    let star = [0.0, 0.37, PI - 0.37, 0.37, 0.0, 0.0, 0.0, 0.0];
    let ham5 = CompiledHamiltonian::compile(&ctx.input, 0.05, &qstar)?;
    let (_, mono) = flow_with_variational(&ham5, &star, t, &opts)?;
    let det = mono.determinant();
    check!(
        (det - 1.0).abs() < 1e-6,
        "monodromy determinant {det:.8} strays from 1"
    );

    // Round trip through the normalization transform and back.
    let cap = ctx.input.caps().eps_cap;
    let mut trip = 0.0f64;
    for state in [
        [0.0, 0.0, 0.0, PI, 0.0, 0.0, 0.0, 0.0],
        [0.2, 1.1, -0.4, 2.5, 0.02, -0.01, 0.03, -0.02],
    ] {
        let qs = [state[1], state[2], state[3]];
        let back = map_back(&ctx.nf.steps, &state, &qs, eps, cap)?;
        let fwd = map_forward(&ctx.nf.steps, &back, &qs, eps, cap)?;
        let dev = state
            .iter()
            .zip(&fwd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trip = trip.max(dev);
    }
    check!(trip < 1e-9, "transform round trip left {trip:.2e}");
    Ok((
        true,
        format!(
            "variational vs FD {fd_dev:.1e}; energy drift {drift:.1e}/period; monodromy det−1 = {:.1e}; round trip {trip:.1e}",
            (det - 1.0).abs()
        ),
    ))
}

/// 11: scaling laws — the defect of a mapped-back candidate scales like ε^r,
/// and on an asymmetry-broken variant the continued orbit sits ε^{3/2} from
/// the candidate.
fn c11_order_scaling(ctx: &Ctx) -> R<(bool, String)> {
    let epses = [1e-3, 10f64.powf(-3.5), 1e-4];
    let cap = ctx.input.caps().eps_cap;
    let q = [0.0, 0.0, PI];

    // (a) defect exponent of the period map at the candidate, orders 1 and 2.
    let nf1 = normalize(&ctx.input, 1)?;
    let mut slopes = Vec::new();
    for (nf, r) in [(&nf1, 1usize), (&ctx.nf, 2usize)] {
        let mut mus = Vec::new();
        for &eps in &epses {
            let mut state0 = vec![0.0; 8];
            state0[1..4].copy_from_slice(&q);
            let back = map_back(&nf.steps, &state0, &q, eps, cap)?;
            let mut setup = ShootingSetup::new(&ctx.input, vec![0.0; ctx.input.n_par()])?;
            setup.q1_0 = back[0];
            setup.integrator.rel_tol = 1e-12;
            setup.integrator.abs_tol = 1e-12;
            let x = DVector::from_column_slice(&back[1..]);
            mus.push(setup.upsilon(eps, &x)?.amax());
        }
        let slope = log_slope(&epses, &mus);
        check!(
            slope >= r as f64 - 0.2,
            "defect exponent at order {r} is {slope:.3}, below {}",
            r as f64 - 0.2
        );
        slopes.push(slope);
    }

    // (b) distance scaling on a variant with a second-order coupling that
    // breaks the parity of the potential.
    let mut model = ModelSpec::dnls_square_cell();
    model.couplings.push(Coupling {
        sites: (0, 2),
        coeff: 1.0,
        eps_power: 2,
        phase: 0.7,
        kind: CouplingKind::SqrtProduct,
    });
    let (_, input_b) = expand_hamiltonian(&model, Caps::new(4, 2))?;
    let nf_b = normalize(&input_b, 2)?;
    let systems_b = nf_b.candidate_systems()?;
    let f0_b = TorusSystem::new(systems_b[0].clone())?;
    let f1_b = TorusSystem::new(systems_b[1].clone())?;

    // Locate a pairing zero on the (θ,θ,π−θ) family by sign change, then
    // refine it onto the exact curve.
    let unit = [1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), -1.0 / 3f64.sqrt()];
    let pairing = |th: f64| -> R<f64> {
        let v = f1_b.eval(&[th, th, PI - th])?;
        Ok(v[0] * unit[0] + v[1] * unit[1] + v[2] * unit[2])
    };
    let mut seed = None;
    let m = 256;
    let mut prev = pairing(0.0)?;
    for k in 1..=m {
        let th = TAU * k as f64 / m as f64;
        let cur = pairing(th)?;
        if prev * cur < 0.0 {
            seed = Some(th - PI / m as f64);
            break;
        }
        prev = cur;
    }
    let th0 = seed.ok_or("asymmetric pairing never changes sign")?;
    let (z, _) = refine_family_zero(
        &f0_b,
        &f1_b,
        &[th0, th0, PI - th0],
        &unit,
        &CandidateOptions::default(),
    )?;
    // The zero must be genuinely displaced from every parity configuration,
    // otherwise the variant failed to break the symmetry.
    let parity_dist = (0..8)
        .map(|mask| {
            let p = [
                if mask & 1 == 0 { 0.0 } else { PI },
                if mask & 2 == 0 { 0.0 } else { PI },
                if mask & 4 == 0 { 0.0 } else { PI },
            ];
            angle_dev(&z, &p)
        })
        .fold(f64::INFINITY, f64::min);
    check!(
        parity_dist > 1e-3,
        "asymmetric candidate still sits on a parity point ({parity_dist:.2e})"
    );

    let mut dists = Vec::new();
    for &eps in &epses {
        let mut state0 = vec![0.0; 8];
        state0[1..4].copy_from_slice(&z);
        let back = map_back(&nf_b.steps, &state0, &z, eps, cap)?;
        let mut setup = ShootingSetup::new(&input_b, vec![0.0; input_b.n_par()])?;
        setup.q1_0 = back[0];
        setup.integrator.rel_tol = 1e-12;
        setup.integrator.abs_tol = 1e-12;
        let x0 = DVector::from_column_slice(&back[1..]);
        let opts = NkOptions {
            tol: 1e-12,
            ..NkOptions::default()
        };
        let res = setup.newton_kantorovich(eps, &x0, &opts)?;
        check!(
            res.converged,
            "continuation of the asymmetric candidate failed at ε = {eps:.1e}"
        );
        dists.push((&res.x_star - &x0).norm());
    }
    let slope_b = log_slope(&epses, &dists);
    // What the bound ε^{r−α} = ε^{3/2} would give if it were tight. It is an
    // upper bound and the measured distance sits one half-order below it:
    // the defect at a refined zero of both slow systems is ε³ (one order
    // better than generic, see the exponents above), and the inverse
    // Jacobian grows like 1/ε (the near-zero pair is a non-normal Jordan
    // block, so its smallest singular value is ~ε even though |λ| ~ √ε).
    // Net: ε³·ε⁻¹ = ε². Pin the measured law so drift is caught.
    check!(
        (slope_b - 2.0).abs() < 0.3,
        "pinned: distance slope should be ~2 (ε³ defect × ε⁻¹ inverse), measured {slope_b:.3}"
    );
    let pass = (slope_b - 1.5).abs() <= 0.2;
    Ok((
        pass,
        format!(
            "defect exponents {:.3} (order 1), {:.3} (order 2), both ≥ r − 0.2; asymmetric-variant distance slope {slope_b:.3} vs 1.5 ± 0.2 (zero at ({:.3},{:.3},{:.3}), distances {:.1e} → {:.1e})",
            slopes[0], slopes[1], z[0], z[1], z[2], dists[0], dists[2]
        ),
    ))
}

// ---------------------------------------------------------------------------

struct Tally {
    passed: usize,
    failed: usize,
    hard: bool,
}

fn criterion(
    tally: &mut Tally,
    n: usize,
    slug: &str,
    f: impl FnOnce() -> R<(bool, String)>,
) {
    let t = Instant::now();
    match f() {
        Ok((true, detail)) => {
            tally.passed += 1;
            println!("ACCEPTANCE {n:>2} {slug:<26} PASS  {detail}");
        }
        Ok((false, detail)) => {
            tally.failed += 1;
            println!("ACCEPTANCE {n:>2} {slug:<26} FAIL  {detail}");
        }
        Err(e) => {
            tally.failed += 1;
            tally.hard = true;
            println!(
                "ACCEPTANCE {n:>2} {slug:<26} ERROR {e} [{:.1}s]",
                t.elapsed().as_secs_f64()
            );
        }
    }
}

fn main() {
    let t0 = Instant::now();
    let ctx = match Ctx::build() {
        Ok(c) => c,
        Err(e) => {
            println!("ACCEPTANCE setup ERROR {e}");
            std::process::exit(1);
        }
    };
    let mut tally = Tally {
        passed: 0,
        failed: 0,
        hard: false,
    };
    criterion(&mut tally, 1, "first-order-zero-set", || c1_zero_set(&ctx));
    criterion(&mut tally, 2, "translation-table", || c2_translation_table(&ctx));
    criterion(&mut tally, 3, "second-order-system", || c3_second_order_system(&ctx));
    criterion(&mut tally, 4, "jacobian-blocks", || c4_jacobian_blocks(&ctx));
    criterion(&mut tally, 5, "eigenvalue-scaling", || c5_eigenvalue_scaling(&ctx));
    criterion(&mut tally, 6, "certified-continuation", || c6_continuation(&ctx));
    criterion(&mut tally, 7, "exact-family", || c7_exact_family(&ctx));
    criterion(&mut tally, 8, "estimate-suite", || c8_estimates(&ctx));
    criterion(&mut tally, 9, "algebra-properties", || c9_algebra(&ctx));
    criterion(&mut tally, 10, "dynamics-properties", || c10_dynamics(&ctx));
    criterion(&mut tally, 11, "order-scaling", || c11_order_scaling(&ctx));

    println!(
        "ACCEPTANCE SUMMARY: {} pass, {} fail in {:.0}s{}",
        tally.passed,
        tally.failed,
        t0.elapsed().as_secs_f64(),
        if tally.hard {
            " (hard failures present)"
        } else if tally.failed > 0 {
            " (failures are measured divergences from the closed-form displays, detailed above)"
        } else {
            ""
        }
    );
    if tally.hard {
        std::process::exit(1);
    }
}
