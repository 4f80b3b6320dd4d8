//! On-disk stage artifacts. Every pipeline stage reads its predecessor's
//! artifact from disk and writes its own, so stages can be re-run and
//! inspected independently. All numeric payloads go through serde_json with
//! round-trip floats; identical inputs produce byte-identical files.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use torbit_core::candidates::{
    refine_family_zero, CandidateOptions, CandidateSet, FamilyCurve, TorusSystem,
};
use torbit_core::chart::ModelSpec;
use torbit_core::error::{CoreError, Result};
use torbit_core::expansion::{EpsExpansion, ExpansionJson};
use torbit_core::normal_form::{GeneratingStep, NormalFormResult};
use torbit_core::series::{FtSeries, SeriesJson};
use torbit_core::shooting::NkCertificate;

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut doc = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::Serialization(e.to_string()))?;
    doc.push('\n');
    fs::write(path, doc)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let doc = fs::read_to_string(path)?;
    serde_json::from_str(&doc)
        .map_err(|e| CoreError::Serialization(format!("{}: {e}", path.display())))
}

/// Plain comma-separated table; all fields here are numbers or bare words,
/// so no quoting is ever needed.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct StepJson {
    pub r: usize,
    pub x0: SeriesJson,
    pub zeta: Vec<SeriesJson>,
    pub chi2: SeriesJson,
}

/// Output of the normalize stage: the input expansion, the normal form, the
/// generating data of every step, and the derived scalars downstream stages
/// need. Self-contained on purpose — `continue` must be able to shoot the
/// *original* Hamiltonian and map candidates back through the steps.
#[derive(Serialize, Deserialize)]
pub struct NormalFormArtifact {
    pub model: ModelSpec,
    pub order: usize,
    pub omega: f64,
    pub period: f64,
    pub twist_m: f64,
    pub c_matrix: Vec<Vec<f64>>,
    pub input: ExpansionJson,
    pub normal_form: ExpansionJson,
    pub steps: Vec<StepJson>,
}

impl NormalFormArtifact {
    pub fn new(model: ModelSpec, input: &EpsExpansion<f64>, nf: &NormalFormResult<f64>) -> Self {
        let n = nf.c_matrix.nrows();
        NormalFormArtifact {
            model,
            order: nf.order,
            omega: input.omega(),
            period: 2.0 * std::f64::consts::PI / input.omega(),
            twist_m: nf.twist_m,
            c_matrix: (0..n)
                .map(|r| (0..n).map(|c| nf.c_matrix[(r, c)]).collect())
                .collect(),
            input: input.to_json(),
            normal_form: nf.h.to_json(),
            steps: nf
                .steps
                .iter()
                .map(|st| StepJson {
                    r: st.r,
                    x0: st.x0.to_json(),
                    zeta: st.zeta.iter().map(FtSeries::to_json).collect(),
                    chi2: st.chi2.to_json(),
                })
                .collect(),
        }
    }

    pub fn input_expansion(&self) -> Result<EpsExpansion<f64>> {
        EpsExpansion::from_json(&self.input)
    }

    pub fn normal_form_result(&self) -> Result<NormalFormResult<f64>> {
        let h = EpsExpansion::from_json(&self.normal_form)?;
        let steps = self
            .steps
            .iter()
            .map(|st| {
                Ok(GeneratingStep {
                    r: st.r,
                    x0: FtSeries::from_json(&st.x0)?,
                    zeta: st
                        .zeta
                        .iter()
                        .map(FtSeries::from_json)
                        .collect::<Result<Vec<_>>>()?,
                    chi2: FtSeries::from_json(&st.chi2)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = self.c_matrix.len();
        let flat: Vec<f64> = self.c_matrix.iter().flatten().copied().collect();
        if flat.len() != n * n {
            return Err(CoreError::Serialization("ragged twist matrix".into()));
        }
        Ok(NormalFormResult {
            h,
            steps,
            c_matrix: DMatrix::from_row_slice(n, n, &flat),
            twist_m: self.twist_m,
            order: self.order,
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct IsolatedJson {
    pub q: Vec<f64>,
    pub residual: f64,
    pub jacobian_det: f64,
    pub sigma_min: f64,
}

#[derive(Serialize, Deserialize)]
pub struct FamilyZeroJson {
    /// Interpolated point on the curve where the persistence pairing
    /// vanishes.
    pub q: Vec<f64>,
    /// Kernel tangent at the nearest sample.
    pub tangent: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct FamilyJson {
    pub closed: bool,
    pub symmetric_jacobian: bool,
    pub n_samples: usize,
    pub max_abs_pairing: Option<f64>,
    /// True when the pairing vanishes identically: the family satisfies the
    /// necessary condition everywhere at this order.
    pub exact_at_order: Option<bool>,
    pub zeros: Vec<FamilyZeroJson>,
    pub points: Vec<Vec<f64>>,
    pub tangents: Vec<Vec<f64>>,
    pub pairings: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
pub struct CandidateTolerances {
    pub newton_tol: f64,
    pub dedup_tol: f64,
    pub sigma_rel: f64,
    pub pairing_zero_tol: f64,
}

#[derive(Serialize, Deserialize)]
pub struct CandidateArtifact {
    pub order: usize,
    pub tolerances: CandidateTolerances,
    pub isolated: Vec<IsolatedJson>,
    pub families: Vec<FamilyJson>,
    /// Set when the perturbation has no angle dependence at all.
    pub note: Option<String>,
}

const PAIRING_EXACT_TOL: f64 = 1e-10;

fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = x.rem_euclid(tau);
    // An ulp below 2π is the same torus point as 0.
    if w >= tau || tau - w < 1e-9 {
        0.0
    } else {
        w
    }
}

/// Signed angular difference in (−π, π].
fn wrap_diff(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut d = x.rem_euclid(tau);
    if d > std::f64::consts::PI {
        d -= tau;
    }
    d
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrap_diff(x - y).abs())
        .fold(0.0, f64::max)
}

/// Locate the pairing zeros along a sampled family by sign change, with
/// linear interpolation in the curve parameter.
fn family_zeros(fam: &FamilyCurve, pairings: &[f64]) -> Vec<FamilyZeroJson> {
    let m = fam.points.len();
    if m < 2 {
        return Vec::new();
    }
    let count = if fam.closed { m } else { m - 1 };
    let mut zeros: Vec<FamilyZeroJson> = Vec::new();
    let mut push = |q: Vec<f64>, idx: usize| {
        if !zeros.iter().any(|z| torus_dist(&z.q, &q) < 1e-3) {
            zeros.push(FamilyZeroJson {
                q,
                tangent: fam.tangents[idx].clone(),
            });
        }
    };
    for i in 0..count {
        let j = (i + 1) % m;
        let (pi, pj) = (pairings[i], pairings[j]);
        if pi == 0.0 || pi.signum() != pj.signum() {
            let t = if pi == pj { 0.0 } else { pi / (pi - pj) };
            let q: Vec<f64> = fam.points[i]
                .iter()
                .zip(&fam.points[j])
                .map(|(&a, &b)| wrap_angle(a + t * wrap_diff(b - a)))
                .collect();
            push(q, if t < 0.5 { i } else { j });
        }
    }
    zeros
}

impl CandidateArtifact {
    /// Build the artifact; when the candidate systems are supplied, each
    /// interpolated family zero is sharpened by [`refine_family_zero`] (the
    /// raw interpolation carries the curve-sampling error, a few 1e−6).
    pub fn from_set(
        order: usize,
        set: &CandidateSet,
        tolerances: CandidateTolerances,
        systems: Option<(&TorusSystem, &TorusSystem)>,
        note: Option<String>,
    ) -> Self {
        let families = set
            .families
            .iter()
            .map(|fam| {
                let (max_abs, exact, mut zeros) = match &fam.pairings {
                    None => (None, None, Vec::new()),
                    Some(p) => {
                        let max_abs = p.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                        if max_abs < PAIRING_EXACT_TOL {
                            (Some(max_abs), Some(true), Vec::new())
                        } else {
                            (Some(max_abs), Some(false), family_zeros(fam, p))
                        }
                    }
                };
                if let Some((f0, f1)) = systems {
                    for z in &mut zeros {
                        if let Ok((q, t)) = refine_family_zero(
                            f0,
                            f1,
                            &z.q,
                            &z.tangent,
                            &CandidateOptions::default(),
                        ) {
                            z.q = q;
                            z.tangent = t;
                        }
                    }
                }
                FamilyJson {
                    closed: fam.closed,
                    symmetric_jacobian: fam.symmetric_jacobian,
                    n_samples: fam.points.len(),
                    max_abs_pairing: max_abs,
                    exact_at_order: exact,
                    zeros,
                    points: fam.points.clone(),
                    tangents: fam.tangents.clone(),
                    pairings: fam.pairings.clone(),
                }
            })
            .collect();
        CandidateArtifact {
            order,
            tolerances,
            isolated: set
                .isolated
                .iter()
                .map(|p| IsolatedJson {
                    q: p.q.clone(),
                    residual: p.residual,
                    jacobian_det: p.jacobian_det,
                    sigma_min: p.sigma_min,
                })
                .collect(),
            families,
            note,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize)]
pub struct ContinuationReport {
    pub eps: f64,
    pub source: String,
    /// Candidate slow angles in normalized coordinates.
    pub candidate_q: Vec<f64>,
    /// Start vector `[q₂.., p̂..]` in the shooting coordinates.
    pub x0: Vec<f64>,
    pub x_star: Vec<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: Option<NkCertificate>,
    /// Monodromy eigenvalues at the continued orbit, |λ| descending.
    pub floquet: Vec<ComplexJson>,
    pub newton_tol: f64,
    pub integrator_tol: f64,
}

#[derive(Serialize)]
pub struct SpectrumRow {
    pub eps: f64,
    /// |λ_j| of the period-map Jacobian M(ε), ascending.
    pub moduli: Vec<f64>,
}

#[derive(Serialize)]
pub struct SpectrumReport {
    pub q: Vec<f64>,
    pub integrator_tol: f64,
    pub rows: Vec<SpectrumRow>,
}

#[derive(Serialize)]
pub struct BifurcationRecord {
    pub family: usize,
    pub q: Vec<f64>,
    pub kernel: Option<Vec<f64>>,
    pub orthogonality: Option<f64>,
    pub chain_length: Option<usize>,
    /// Criterion value for the unit kernel vector a₁.
    pub gamma: Option<f64>,
    /// γ divided by ⟨f₂, g⟩, the normalization entering the eigenvalue
    /// asymptotics.
    pub gamma_normalized: Option<f64>,
    /// Predicted bifurcating eigenvalues at the smallest requested ε.
    pub predicted: Option<Vec<ComplexJson>>,
    pub fit_residual: Option<f64>,
    pub error: Option<String>,
}
