//! Lie-series transforms: the derivations `L_χ f = {χ, f}` attached to a
//! generating function χ, and the exponentials `exp(L_χ)` that implement
//! canonical near-identity changes of variables as graded power series in the
//! perturbation parameter.
//!
//! Two generator shapes occur. A plain [`Generator::Series`] acts purely
//! through the Poisson bracket. A [`Generator::Translation`] bundles an
//! oscillating part `X₀` with an action shift ζ — one grade-0 coefficient per
//! action, depending only on the parameter angles — and acts as
//!
//! ```text
//! L f = {X₀, f} + Σ_j ζ_j ∂f/∂p̂_j ,
//! ```
//!
//! which is the bracket with `X₀ + ⟨ζ, q̂⟩` without ever materializing the
//! non-periodic `⟨ζ, q̂⟩` summand as a series. On the level of points the
//! translation moves every action by `−ε^r ζ` (equivalently, a function of the
//! old variables turns into itself evaluated at `p̂ + ε^r ζ`), which is exactly
//! how the engine recenters the invariant torus at `p̂ = 0`.
//!
//! Every exponential is truncated by the [`Caps`] in force: ε-orders beyond
//! `eps_cap` and grades beyond `degree_cap` are dropped, and a series growing
//! past `term_budget` aborts with a resource error instead of thrashing.

use crate::error::{CoreError, Result};
use crate::expansion::{Caps, EpsExpansion};
use crate::scalar::Scalar;
use crate::series::{FtSeries, Var};

/// A generating function, tagged with the ε-order its coefficients carry.
#[derive(Clone, Debug)]
pub enum Generator<T: Scalar> {
    /// `L_χ f = {χ, f}` for an ordinary series χ.
    Series { chi: FtSeries<T>, eps_order: usize },
    /// `χ = X₀ + ⟨ζ, q̂⟩`: an oscillating grade-0 part plus an exact action
    /// translation by ζ (grade-0 series in the parameter angles only).
    Translation {
        x0: FtSeries<T>,
        zeta: Vec<FtSeries<T>>,
        eps_order: usize,
    },
}

impl<T: Scalar> Generator<T> {
    pub fn series(chi: FtSeries<T>, eps_order: usize) -> Result<Self> {
        if eps_order == 0 {
            return Err(CoreError::InvalidInput(
                "generator must carry a positive ε-order".into(),
            ));
        }
        Ok(Generator::Series { chi, eps_order })
    }

    /// Build a translation generator. `x0` must be grade 0; each ζ component
    /// must be grade 0 with no dynamic-angle harmonics, one per action.
    pub fn translation(x0: FtSeries<T>, zeta: Vec<FtSeries<T>>, eps_order: usize) -> Result<Self> {
        if eps_order == 0 {
            return Err(CoreError::InvalidInput(
                "generator must carry a positive ε-order".into(),
            ));
        }
        if x0.grade() != 0 {
            return Err(CoreError::InvalidInput(format!(
                "oscillating part has grade {}, expected 0",
                x0.grade()
            )));
        }
        if zeta.len() != x0.n_dyn() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} translation components for {} actions",
                zeta.len(),
                x0.n_dyn()
            )));
        }
        for (j, z) in zeta.iter().enumerate() {
            if z.n_dyn() != x0.n_dyn() || z.n_par() != x0.n_par() || z.grade() != 0 {
                return Err(CoreError::InvalidInput(format!(
                    "translation component {j} has incompatible shape or grade"
                )));
            }
            if z.iter().any(|(key, _)| key.k.iter().any(|&kj| kj != 0)) {
                return Err(CoreError::InvalidInput(format!(
                    "translation component {j} depends on dynamic angles"
                )));
            }
        }
        Ok(Generator::Translation {
            x0,
            zeta,
            eps_order,
        })
    }

    pub fn eps_order(&self) -> usize {
        match self {
            Generator::Series { eps_order, .. } | Generator::Translation { eps_order, .. } => {
                *eps_order
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Generator::Series { chi, .. } => chi.is_empty(),
            Generator::Translation { x0, zeta, .. } => {
                x0.is_empty() && zeta.iter().all(|z| z.is_empty())
            }
        }
    }

    /// The generator of the inverse transformation.
    pub fn negated(&self) -> Self {
        let minus = -T::one();
        match self {
            Generator::Series { chi, eps_order } => Generator::Series {
                chi: chi.scaled_real(minus),
                eps_order: *eps_order,
            },
            Generator::Translation {
                x0,
                zeta,
                eps_order,
            } => Generator::Translation {
                x0: x0.scaled_real(minus),
                zeta: zeta.iter().map(|z| z.scaled_real(minus)).collect(),
                eps_order: *eps_order,
            },
        }
    }

    /// One application of the derivation, `L f`.
    pub fn derivative(&self, f: &FtSeries<T>) -> Result<FtSeries<T>> {
        match self {
            Generator::Series { chi, .. } => chi.poisson_bracket(f),
            Generator::Translation { x0, zeta, .. } => {
                let mut out = x0.poisson_bracket(f)?;
                for (j, z) in zeta.iter().enumerate() {
                    if z.is_empty() {
                        continue;
                    }
                    let df = f.partial_derivative(Var::Action(j))?;
                    out = out.add(&z.mul(&df)?)?;
                }
                Ok(out)
            }
        }
    }
}

/// Expand `exp(L_χ) f = Σ_j (1/j!) L_χ^j f` as a list of `(ε-order, term)`
/// pairs, the `j = 0` term included.
///
/// `f_eps_order` tags the order carried by `f` itself; term `j` lands at
/// `f_eps_order + j · χ-order`. Iteration stops once the series empties, the
/// next order would exceed `eps_cap`, or the grade leaves `[0, degree_cap]`.
pub fn lie_series_apply<T: Scalar>(
    gen: &Generator<T>,
    f: &FtSeries<T>,
    f_eps_order: usize,
    caps: Caps,
) -> Result<Vec<(usize, FtSeries<T>)>> {
    let mut out = Vec::new();
    if f_eps_order > caps.eps_cap {
        return Ok(out);
    }
    let mut current = f.clone().pruned();
    if current.is_empty() || current.grade() > caps.degree_cap {
        return Ok(out);
    }
    out.push((f_eps_order, current.clone()));
    for j in 1usize.. {
        let order = f_eps_order + j * gen.eps_order();
        if order > caps.eps_cap {
            break;
        }
        let inv = T::one() / T::from_usize(j).unwrap();
        current = gen.derivative(&current)?.scaled_real(inv).pruned();
        if current.is_empty() || current.grade() > caps.degree_cap {
            break;
        }
        if current.len() > caps.term_budget {
            return Err(CoreError::Resource(format!(
                "Lie iterate holds {} terms, budget {}",
                current.len(),
                caps.term_budget
            )));
        }
        out.push((order, current.clone()));
    }
    Ok(out)
}

/// The coordinate correction `exp(L_χ) x − x = Σ_{n≥1} (1/n!) L^{n−1} c₁`
/// where `c₁ = L_χ x` is supplied by the caller (for an action, `c₁ =
/// ∂χ/∂q̂_j` plus the translation component; for an angle, `c₁ = −∂χ/∂p̂_j`).
///
/// Note the weights: term `n` is `(1/n!) L^{n−1} c₁`, not the plain
/// exponential of `c₁`, which is why this cannot be phrased through
/// [`lie_series_apply`].
pub fn lie_exp_correction<T: Scalar>(
    gen: &Generator<T>,
    c1: &FtSeries<T>,
    c1_eps_order: usize,
    caps: Caps,
) -> Result<Vec<(usize, FtSeries<T>)>> {
    let mut out = Vec::new();
    if c1_eps_order > caps.eps_cap {
        return Ok(out);
    }
    let mut current = c1.clone().pruned();
    let mut n = 1usize;
    while !current.is_empty() && current.grade() <= caps.degree_cap {
        out.push((c1_eps_order + (n - 1) * gen.eps_order(), current.clone()));
        n += 1;
        let order = c1_eps_order + (n - 1) * gen.eps_order();
        if order > caps.eps_cap {
            break;
        }
        let inv = T::one() / T::from_usize(n).unwrap();
        current = gen.derivative(&current)?.scaled_real(inv).pruned();
        if current.len() > caps.term_budget {
            return Err(CoreError::Resource(format!(
                "coordinate correction holds {} terms, budget {}",
                current.len(),
                caps.term_budget
            )));
        }
    }
    Ok(out)
}

/// Apply `exp(L_χ)` to a whole graded Hamiltonian, slot by slot.
///
/// Every slot is treated uniformly, the `ω p̂₁` slot included — its image
/// under the bracket feeds the higher ε-orders while the slot itself is
/// reproduced by the `j = 0` term, so the result still validates.
pub fn exp_lie<T: Scalar>(gen: &Generator<T>, h: &EpsExpansion<T>) -> Result<EpsExpansion<T>> {
    let caps = h.caps();
    let mut out = EpsExpansion::new(h.omega(), h.n_dyn(), h.n_par(), caps);
    for (&(_, s), series) in h.slots() {
        for (order, term) in lie_series_apply(gen, series, s, caps)? {
            out.accumulate(term.grade(), order, &term)?;
        }
    }
    Ok(out)
}
