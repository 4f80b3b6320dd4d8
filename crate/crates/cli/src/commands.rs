//! Subcommand implementations. Each writes its artifacts under the chosen
//! output directory and prints a one-line summary to stdout; errors bubble to
//! `main`, which maps them onto the documented exit codes.

use std::path::{Path, PathBuf};

use nalgebra::DVector;

use torbit_core::candidates::{candidate_set, CandidateOptions, TorusSystem};
use torbit_core::chart::{expand_hamiltonian, ModelSpec};
use torbit_core::error::{CoreError, Result};
use torbit_core::estimates::{measure_e, verify_lemmone, EstimateParams};
use torbit_core::expansion::{Caps, EpsExpansion};
use torbit_core::flow::{flow_with_variational, CompiledHamiltonian};
use torbit_core::normal_form::{normalize, NormalFormResult};
use torbit_core::shooting::{map_back, NkMode, NkOptions, ShootingSetup};

use crate::artifacts::*;

pub fn ensure_outdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// `--model` accepts a JSON file path or the built-in name `dnls-square`.
pub fn load_model(spec: &str) -> Result<ModelSpec> {
    if spec == "dnls-square" {
        return Ok(ModelSpec::dnls_square_cell());
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CoreError::InvalidInput(format!(
            "model '{spec}' is neither a file nor a built-in name"
        )));
    }
    load_json(path)
}

pub fn cmd_normalize(
    model_spec: &str,
    order: usize,
    degree_cap: usize,
    eps_cap: Option<usize>,
    out: &Path,
) -> Result<()> {
    if order == 0 {
        return Err(CoreError::InvalidInput("order must be at least 1".into()));
    }
    ensure_outdir(out)?;
    let model = load_model(model_spec)?;
    let caps = Caps::new(degree_cap, eps_cap.unwrap_or(order));
    let (_, h) = expand_hamiltonian(&model, caps)?;
    let nf = normalize(&h, order)?;
    write_normal_form_stage(out, model, &h, &nf)?;
    println!(
        "normalized to order {order}: ω = {}, twist m = {}, artifacts in {}",
        h.omega(),
        nf.twist_m,
        out.display()
    );
    Ok(())
}

pub fn write_normal_form_stage(
    out: &Path,
    model: ModelSpec,
    input: &EpsExpansion<f64>,
    nf: &NormalFormResult<f64>,
) -> Result<()> {
    let artifact = NormalFormArtifact::new(model, input, nf);
    save_json(&out.join("normal_form.json"), &artifact)?;
    let mut rows = Vec::new();
    for (&(l, s), series) in nf.h.slots() {
        rows.push(vec![
            s.to_string(),
            l.to_string(),
            series.len().to_string(),
            series.coeff_l1().to_string(),
            series.max_abs().to_string(),
        ]);
    }
    write_csv(
        &out.join("norm_table.csv"),
        "eps_power,grade_subscript,terms,coeff_l1,max_abs",
        &rows,
    )
}

pub fn cmd_candidates(artifact_path: &Path, grid: usize, out: &Path) -> Result<()> {
    ensure_outdir(out)?;
    let art: NormalFormArtifact = load_json(artifact_path)?;
    let nf = art.normal_form_result()?;
    let stage = candidates_stage(&nf, grid)?;
    write_candidates_stage(out, &stage)?;
    println!(
        "{} isolated candidate(s), {} family(ies){}",
        stage.isolated.len(),
        stage.families.len(),
        stage.note.as_deref().map(|n| format!(" — {n}")).unwrap_or_default()
    );
    Ok(())
}

pub fn candidates_stage(nf: &NormalFormResult<f64>, grid: usize) -> Result<CandidateArtifact> {
    let systems = nf.candidate_systems()?;
    let opts = CandidateOptions {
        grid,
        ..CandidateOptions::default()
    };
    let tolerances = CandidateTolerances {
        newton_tol: opts.newton_tol,
        dedup_tol: opts.dedup_tol,
        sigma_rel: opts.sigma_rel,
        pairing_zero_tol: 1e-10,
    };
    if systems
        .first()
        .is_none_or(|sys| sys.iter().all(|c| c.is_empty()))
    {
        return Ok(CandidateArtifact {
            order: nf.order,
            tolerances,
            isolated: Vec::new(),
            families: Vec::new(),
            note: Some("no candidates; torus persists trivially".into()),
        });
    }
    let f0 = TorusSystem::new(systems[0].clone())?;
    let f1 = match systems.get(1) {
        Some(sys) => Some(TorusSystem::new(sys.clone())?),
        None => None,
    };
    let set = candidate_set(&f0, f1.as_ref(), &opts)?;
    let systems = f1.as_ref().map(|f1| (&f0, f1));
    Ok(CandidateArtifact::from_set(
        nf.order, &set, tolerances, systems, None,
    ))
}

pub fn write_candidates_stage(out: &Path, artifact: &CandidateArtifact) -> Result<()> {
    save_json(&out.join("candidates.json"), artifact)?;
    let iso_rows: Vec<Vec<String>> = artifact
        .isolated
        .iter()
        .map(|p| {
            let mut row: Vec<String> = p.q.iter().map(f64::to_string).collect();
            row.push(p.residual.to_string());
            row.push(p.jacobian_det.to_string());
            row.push(p.sigma_min.to_string());
            row
        })
        .collect();
    let n_slow = artifact.isolated.first().map_or(0, |p| p.q.len());
    let q_cols = |n: usize| (0..n).map(|j| format!("q{}", j + 2)).collect::<Vec<_>>().join(",");
    write_csv(
        &out.join("isolated.csv"),
        &format!("{},residual,jacobian_det,sigma_min", q_cols(n_slow.max(1))),
        &iso_rows,
    )?;
    let mut fam_rows = Vec::new();
    let mut fam_cols = 1;
    for (fi, fam) in artifact.families.iter().enumerate() {
        for (i, pt) in fam.points.iter().enumerate() {
            fam_cols = pt.len();
            let mut row = vec![fi.to_string(), i.to_string()];
            row.extend(pt.iter().map(f64::to_string));
            row.push(match &fam.pairings {
                Some(p) => p[i].to_string(),
                None => String::new(),
            });
            fam_rows.push(row);
        }
    }
    write_csv(
        &out.join("families.csv"),
        &format!("family,sample,{},pairing", q_cols(fam_cols)),
        &fam_rows,
    )
}

#[derive(Clone, Copy)]
pub enum ShootingSource {
    Original,
    Normalized,
}

impl std::str::FromStr for ShootingSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "original" => Ok(ShootingSource::Original),
            "normalized" => Ok(ShootingSource::Normalized),
            other => Err(format!("unknown source '{other}' (original|normalized)")),
        }
    }
}

pub struct ContinueConfig {
    pub eps: f64,
    pub source: ShootingSource,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub integrator_tol: f64,
}

/// Continue one candidate. The candidate lives in normalized coordinates at
/// `(q, p̂ = 0)`; with the original source it is mapped back through the
/// generating steps first and the untransformed Hamiltonian is integrated.
pub fn continue_candidate(
    art: &NormalFormArtifact,
    candidate_q: &[f64],
    cfg: &ContinueConfig,
) -> Result<ContinuationReport> {
    if cfg.eps <= 0.0 {
        return Err(CoreError::InvalidInput("ε must be positive".into()));
    }
    let nf = art.normal_form_result()?;
    let input = art.input_expansion()?;
    let n = input.n_dyn();
    if candidate_q.len() != n - 1 {
        return Err(CoreError::DimensionMismatch(format!(
            "{} slow angles expected, {} given",
            n - 1,
            candidate_q.len()
        )));
    }
    let eps_cap = input.caps().eps_cap;

    let mut state0 = vec![0.0; 2 * n];
    state0[1..n].copy_from_slice(candidate_q);
    let (h, qstar, x0_state) = match cfg.source {
        ShootingSource::Original => {
            let back = map_back(&nf.steps, &state0, candidate_q, cfg.eps, eps_cap)?;
            (&input, vec![0.0; input.n_par()], back)
        }
        ShootingSource::Normalized => (&nf.h, candidate_q.to_vec(), state0),
    };

    let mut setup = ShootingSetup::new(h, qstar.clone())?;
    setup.q1_0 = x0_state[0];
    setup.integrator.rel_tol = cfg.integrator_tol;
    setup.integrator.abs_tol = cfg.integrator_tol;
    let x0 = DVector::from_iterator(
        2 * n - 1,
        x0_state[1..n].iter().chain(&x0_state[n..]).copied(),
    );
    let opts = NkOptions {
        tol: cfg.newton_tol,
        max_iter: cfg.max_iter,
        mode: NkMode::Frozen,
        ball_radius: 1e-3,
    };
    let res = setup.newton_kantorovich(cfg.eps, &x0, &opts)?;

    // Floquet data: monodromy of the full state flow at the solution.
    let mut star_state = x0_state.clone();
    star_state[1..n].copy_from_slice(&res.x_star.as_slice()[..n - 1]);
    star_state[n..].copy_from_slice(&res.x_star.as_slice()[n - 1..]);
    let compiled = CompiledHamiltonian::compile(h, cfg.eps, &qstar)?;
    let (_, v) = flow_with_variational(
        &compiled,
        &star_state,
        setup.t_period(),
        &setup.integrator,
    )?;
    let mut floquet: Vec<ComplexJson> = v
        .complex_eigenvalues()
        .iter()
        .map(|l| ComplexJson { re: l.re, im: l.im })
        .collect();
    floquet.sort_by(|a, b| {
        let (ma, mb) = (a.re.hypot(a.im), b.re.hypot(b.im));
        mb.partial_cmp(&ma)
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });

    Ok(ContinuationReport {
        eps: cfg.eps,
        source: match cfg.source {
            ShootingSource::Original => "original".into(),
            ShootingSource::Normalized => "normalized".into(),
        },
        candidate_q: candidate_q.to_vec(),
        x0: x0.as_slice().to_vec(),
        x_star: res.x_star.as_slice().to_vec(),
        residual_inf: res.residual_inf,
        iterations: res.iterations,
        converged: res.converged,
        certificate: res.certificate,
        floquet,
        newton_tol: cfg.newton_tol,
        integrator_tol: cfg.integrator_tol,
    })
}

pub fn cmd_continue(
    artifact_path: &Path,
    candidates_path: Option<&PathBuf>,
    candidate_index: Option<usize>,
    angles: &[f64],
    cfg: &ContinueConfig,
    out: &Path,
) -> Result<()> {
    ensure_outdir(out)?;
    let art: NormalFormArtifact = load_json(artifact_path)?;
    let q: Vec<f64> = match (candidate_index, angles.is_empty()) {
        (Some(idx), true) => {
            let path = candidates_path.ok_or_else(|| {
                CoreError::InvalidInput("--candidate needs --candidates <file>".into())
            })?;
            let cand: CandidateArtifact = load_json(path)?;
            cand.isolated
                .get(idx)
                .ok_or_else(|| {
                    CoreError::InvalidInput(format!(
                        "candidate index {idx} out of range ({} isolated)",
                        cand.isolated.len()
                    ))
                })?
                .q
                .clone()
        }
        (None, false) => angles.to_vec(),
        _ => {
            return Err(CoreError::InvalidInput(
                "give exactly one of --candidate or --angles".into(),
            ))
        }
    };
    let report = continue_candidate(&art, &q, cfg)?;
    save_json(&out.join("continuation.json"), &report)?;
    let rows: Vec<Vec<String>> = report
        .floquet
        .iter()
        .map(|l| {
            vec![
                l.re.to_string(),
                l.im.to_string(),
                l.re.hypot(l.im).to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("floquet.csv"), "re,im,modulus", &rows)?;
    println!(
        "continued at ε = {}: residual {:.3e} after {} iteration(s), certificate h = {}",
        report.eps,
        report.residual_inf,
        report.iterations,
        report
            .certificate
            .as_ref()
            .map(|c| format!("{:.4}", c.h))
            .unwrap_or_else(|| "n/a".into()),
    );
    if !report.converged {
        return Err(CoreError::Numeric(format!(
            "iteration stalled at residual {:.3e}",
            report.residual_inf
        )));
    }
    if let Some(cert) = &report.certificate {
        if !cert.certified {
            return Err(CoreError::Certification(format!(
                "Kantorovich condition failed: h = {:.4} ≥ 1/4",
                cert.h
            )));
        }
    }
    Ok(())
}

pub fn cmd_spectrum(
    artifact_path: &Path,
    angles: &[f64],
    eps_list: &[f64],
    source: ShootingSource,
    integrator_tol: f64,
    out: &Path,
) -> Result<()> {
    ensure_outdir(out)?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| e <= 0.0) {
        return Err(CoreError::InvalidInput(
            "ε list must be non-empty and positive".into(),
        ));
    }
    let art: NormalFormArtifact = load_json(artifact_path)?;
    let nf = art.normal_form_result()?;
    let input = art.input_expansion()?;
    let n = input.n_dyn();
    if angles.len() != n - 1 {
        return Err(CoreError::DimensionMismatch(format!(
            "{} slow angles expected, {} given",
            n - 1,
            angles.len()
        )));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        // The Jacobian is taken at the candidate's orbit, which sits at
        // (q, 0) in normalized coordinates — for the original source the
        // point is mapped back through the generating steps per ε.
        let mut state0 = vec![0.0; 2 * n];
        state0[1..n].copy_from_slice(angles);
        let (h, qstar, state) = match source {
            ShootingSource::Original => {
                let back = map_back(&nf.steps, &state0, angles, eps, input.caps().eps_cap)?;
                (&input, vec![0.0; input.n_par()], back)
            }
            ShootingSource::Normalized => (&nf.h, angles.to_vec(), state0),
        };
        let mut setup = ShootingSetup::new(h, qstar)?;
        setup.q1_0 = state[0];
        setup.integrator.rel_tol = integrator_tol;
        setup.integrator.abs_tol = integrator_tol;
        let x = DVector::from_iterator(
            2 * n - 1,
            state[1..n].iter().chain(&state[n..]).copied(),
        );
        let m = setup.jacobian_m(eps, &x)?;
        let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|l| l.norm()).collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(SpectrumRow { eps, moduli });
    }
    let report = SpectrumReport {
        q: angles.to_vec(),
        integrator_tol,
        rows,
    };
    save_json(&out.join("spectrum.json"), &report)?;
    let csv_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.eps.to_string()];
            row.extend(r.moduli.iter().map(f64::to_string));
            row
        })
        .collect();
    let k = report.rows.first().map_or(0, |r| r.moduli.len());
    let header = std::iter::once("eps".to_string())
        .chain((1..=k).map(|j| format!("lambda{j}")))
        .collect::<Vec<_>>()
        .join(",");
    write_csv(&out.join("spectrum.csv"), &header, &csv_rows)?;
    println!(
        "spectrum over {} ε value(s) written to {}",
        report.rows.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_verify_estimates(
    artifact_path: &Path,
    rho: f64,
    sigma: f64,
    d: f64,
    e_bound: Option<f64>,
    out: &Path,
) -> Result<()> {
    ensure_outdir(out)?;
    let art: NormalFormArtifact = load_json(artifact_path)?;
    let nf = art.normal_form_result()?;
    let input = art.input_expansion()?;
    let e = match e_bound {
        Some(e) => e,
        None => measure_e(&input, rho, sigma)?,
    };
    let params = EstimateParams {
        e_bound: e,
        omega: input.omega(),
        twist_m: nf.twist_m,
        rho,
        sigma,
        d,
    };
    let report = verify_lemmone(&nf, &input, &params)?;
    write_estimates_stage(out, &report)?;
    println!(
        "all bounds hold: min margin {:.4}, ε* = {:.4e}",
        report.min_margin, report.epsilon_star
    );
    Ok(())
}

pub fn write_estimates_stage(
    out: &Path,
    report: &torbit_core::estimates::LemmoneReport,
) -> Result<()> {
    save_json(&out.join("estimates.json"), report)?;
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                "slot".into(),
                r.r.to_string(),
                r.s.to_string(),
                r.l.to_string(),
                r.actual.to_string(),
                r.bound.to_string(),
                r.margin.to_string(),
            ]
        })
        .collect();
    rows.extend(report.generators.iter().map(|g| {
        vec![
            g.name.to_string(),
            g.r.to_string(),
            String::new(),
            String::new(),
            g.actual.to_string(),
            g.bound.to_string(),
            g.margin.to_string(),
        ]
    }));
    write_csv(
        &out.join("estimates.csv"),
        "kind,r,s,l,actual,bound,margin",
        &rows,
    )
}
