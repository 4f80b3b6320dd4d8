//! The Hamiltonian as a graded double family.
//!
//! A normalization run manipulates the Hamiltonian in the shape
//!
//! ```text
//!   H = ω p̂₁ + Σ_{l,s} ε^s f_{2l}^{(·,s)}(p̂, q̂; q*),
//! ```
//!
//! keyed by the action grade `l` and the perturbation order `s`. Slots store
//! the *coefficient of ε^s* (the power of ε is never multiplied in), which
//! keeps every norm statement about the family free of ε bookkeeping. The
//! unperturbed linear part ω p̂₁ lives in slot `(1, 0)`; the exact quadratic
//! in slot `(2, 0)`.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::series::{FtSeries, SeriesJson, TermKey};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Slot key: (action grade l, ε-order s).
pub type SlotKey = (usize, usize);

/// Caps and budgets applied throughout transforms.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Caps {
    /// Maximal action grade retained.
    pub degree_cap: usize,
    /// Maximal ε-order retained.
    pub eps_cap: usize,
    /// Hard ceiling on stored terms per series; exceeding it is a resource
    /// error rather than a silent truncation.
    pub term_budget: usize,
}

impl Caps {
    pub fn new(degree_cap: usize, eps_cap: usize) -> Self {
        Caps {
            degree_cap,
            eps_cap,
            term_budget: 4_000_000,
        }
    }
}

/// A Hamiltonian organized by (grade, ε-order), plus its frequency and shape.
#[derive(Clone, Debug)]
pub struct EpsExpansion<T: Scalar> {
    omega: T,
    n_dyn: usize,
    n_par: usize,
    caps: Caps,
    slots: BTreeMap<SlotKey, FtSeries<T>>,
}

impl<T: Scalar> EpsExpansion<T> {
    pub fn new(omega: T, n_dyn: usize, n_par: usize, caps: Caps) -> Self {
        EpsExpansion {
            omega,
            n_dyn,
            n_par,
            caps,
            slots: BTreeMap::new(),
        }
    }

    pub fn omega(&self) -> T {
        self.omega
    }
    pub fn n_dyn(&self) -> usize {
        self.n_dyn
    }
    pub fn n_par(&self) -> usize {
        self.n_par
    }
    pub fn caps(&self) -> Caps {
        self.caps
    }

    pub fn slots(&self) -> impl Iterator<Item = (&SlotKey, &FtSeries<T>)> {
        self.slots.iter()
    }

    pub fn slot_keys(&self) -> Vec<SlotKey> {
        self.slots.keys().copied().collect()
    }

    pub fn get(&self, l: usize, s: usize) -> Option<&FtSeries<T>> {
        self.slots.get(&(l, s))
    }

    /// The slot as an owned series, empty if absent.
    pub fn get_or_zero(&self, l: usize, s: usize) -> FtSeries<T> {
        self.slots
            .get(&(l, s))
            .cloned()
            .unwrap_or_else(|| FtSeries::zero(self.n_dyn, self.n_par, l))
    }

    /// Accumulate a series into slot (l, s), enforcing shape, grade and caps.
    /// Content beyond the caps is silently dropped (the caps are the
    /// truncation policy, applied after every operation).
    pub fn accumulate(&mut self, l: usize, s: usize, series: &FtSeries<T>) -> Result<()> {
        if series.is_empty() {
            return Ok(());
        }
        if l > self.caps.degree_cap || s > self.caps.eps_cap {
            return Ok(());
        }
        if series.n_dyn() != self.n_dyn || series.n_par() != self.n_par {
            return Err(CoreError::DimensionMismatch(format!(
                "slot ({l},{s}): series shape ({},{}) vs expansion ({},{})",
                series.n_dyn(),
                series.n_par(),
                self.n_dyn,
                self.n_par
            )));
        }
        if series.grade() != l {
            return Err(CoreError::InvalidInput(format!(
                "slot ({l},{s}): series grade {}",
                series.grade()
            )));
        }
        let entry = self
            .slots
            .entry((l, s))
            .or_insert_with(|| FtSeries::zero(self.n_dyn, self.n_par, l));
        *entry = entry.add(series)?;
        if entry.len() > self.caps.term_budget {
            return Err(CoreError::Resource(format!(
                "slot ({l},{s}) holds {} terms",
                entry.len()
            )));
        }
        if entry.is_empty() {
            self.slots.remove(&(l, s));
        }
        Ok(())
    }

    pub fn remove(&mut self, l: usize, s: usize) -> Option<FtSeries<T>> {
        self.slots.remove(&(l, s))
    }

    pub fn drop_empty(&mut self) {
        self.slots.retain(|_, s| !s.is_empty());
    }

    /// Numeric value of H at a phase point for a concrete ε:
    /// `Σ_s ε^s Σ_l f_{l,s}(p̂, q̂; q*)`. Real part; callers relying on real
    /// Hamiltonians should hold real-flagged slots.
    pub fn evaluate(&self, p: &[T], q: &[T], qstar: &[T], eps: T) -> Result<Complex<T>> {
        let mut total = Complex::new(T::zero(), T::zero());
        for ((_, s), series) in &self.slots {
            let weight = eps.powi(*s as i32);
            total = total + series.evaluate(p, q, qstar)? * Complex::new(weight, T::zero());
        }
        Ok(total)
    }

    /// Build the canonical linear slot ω p̂₁ for this shape.
    pub fn omega_p1(&self) -> FtSeries<T> {
        let mut s = FtSeries::zero(self.n_dyn, self.n_par, 1);
        let mut i = vec![0u8; self.n_dyn];
        i[0] = 1;
        s.add_term(
            TermKey::new(i, vec![0; self.n_dyn], vec![0; self.n_par]),
            Complex::new(self.omega, T::zero()),
        )
        .expect("omega_p1 key is always valid");
        s
    }

    /// Check the container invariants: slot grades match keys, the (1,0)
    /// slot is exactly ω p̂₁, and no slot exceeds the caps.
    pub fn validate(&self) -> Result<()> {
        for ((l, s), series) in &self.slots {
            if series.grade() != *l {
                return Err(CoreError::InvalidInput(format!(
                    "slot ({l},{s}) holds grade {}",
                    series.grade()
                )));
            }
            if *l > self.caps.degree_cap || *s > self.caps.eps_cap {
                return Err(CoreError::InvalidInput(format!(
                    "slot ({l},{s}) outside caps"
                )));
            }
        }
        if let Some(lin) = self.get(1, 0) {
            let defect = lin.sub(&self.omega_p1())?.max_abs();
            let tol = T::from_f64_lit(1e-12) * (T::one() + self.omega.abs());
            if defect > tol {
                return Err(CoreError::InvalidInput(format!(
                    "(1,0) slot differs from omega*p1 by {defect}"
                )));
            }
        }
        Ok(())
    }
}

// --- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SlotJson {
    l: usize,
    s: usize,
    series: SeriesJson,
}

/// Versioned on-disk form of an expansion; slots in (l, s) order.
#[derive(Serialize, Deserialize)]
pub struct ExpansionJson {
    pub version: u32,
    pub omega: f64,
    pub n_dyn: usize,
    pub n_par: usize,
    pub caps: Caps,
    slots: Vec<SlotJson>,
}

pub const EXPANSION_FORMAT_VERSION: u32 = 1;

impl EpsExpansion<f64> {
    pub fn to_json(&self) -> ExpansionJson {
        ExpansionJson {
            version: EXPANSION_FORMAT_VERSION,
            omega: self.omega,
            n_dyn: self.n_dyn,
            n_par: self.n_par,
            caps: self.caps,
            slots: self
                .slots
                .iter()
                .map(|((l, s), series)| SlotJson {
                    l: *l,
                    s: *s,
                    series: series.to_json(),
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &ExpansionJson) -> Result<Self> {
        if doc.version != EXPANSION_FORMAT_VERSION {
            return Err(CoreError::Serialization(format!(
                "expansion format version {} (expected {})",
                doc.version, EXPANSION_FORMAT_VERSION
            )));
        }
        let mut out = EpsExpansion::new(doc.omega, doc.n_dyn, doc.n_par, doc.caps);
        for slot in &doc.slots {
            let series = FtSeries::from_json(&slot.series)?;
            out.accumulate(slot.l, slot.s, &series)?;
        }
        out.validate()?;
        Ok(out)
    }
}
