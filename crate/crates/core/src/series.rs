//! Sparse Fourier–Taylor series.
//!
//! The working objects are elements of the graded classes P_{2l}: homogeneous
//! polynomials of degree `l` in the translated actions `p̂` whose coefficients
//! are trigonometric polynomials in the dynamic angles `q̂` and, optionally,
//! in a block of parameter angles `q*`:
//!
//! ```text
//!   g(p̂, q̂; q*) = Σ  g_{i,k,m} · p̂^i · e^{i⟨k,q̂⟩} · e^{i⟨m,q*⟩},   |i| = l.
//! ```
//!
//! Terms live in a sorted sparse map keyed by `(i, k, m)`, so iteration order
//! (and therefore serialization) is deterministic. Real-valued series are kept
//! in full complex form with the conjugate symmetry
//! `g_{i,-k,-m} = conj(g_{i,k,m})` tracked by a flag; storing both halves
//! keeps the homological division by `i·k₁ω` a plain per-term operation.
//!
//! Parameter angles are spectators everywhere: they carry no conjugate
//! momenta, so brackets and derivatives never touch the `m` block except to
//! copy it.

use crate::error::{CoreError, Result};
use crate::scalar::{prune_threshold, Scalar};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Sparse index of one term: action exponents `i`, dynamic harmonic `k`,
/// parameter harmonic `m`. The derived lexicographic order on `(i, k, m)` is
/// the canonical term order used for iteration and serialization.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct TermKey {
    pub i: Vec<u8>,
    pub k: Vec<i16>,
    pub m: Vec<i16>,
}

impl TermKey {
    pub fn new(i: Vec<u8>, k: Vec<i16>, m: Vec<i16>) -> Self {
        TermKey { i, k, m }
    }

    /// Total action degree |i|.
    pub fn degree(&self) -> usize {
        self.i.iter().map(|&e| e as usize).sum()
    }

    /// ℓ1 size of the full harmonic (|k| + |m|), the quantity the Fourier
    /// weight e^{(|k|+|m|)ασ} is built from.
    pub fn harmonic_size(&self) -> usize {
        self.k.iter().map(|&x| x.unsigned_abs() as usize).sum::<usize>()
            + self.m.iter().map(|&x| x.unsigned_abs() as usize).sum::<usize>()
    }

    /// The key of the conjugate harmonic: all angle indices negated.
    pub fn mirrored(&self) -> TermKey {
        TermKey {
            i: self.i.clone(),
            k: self.k.iter().map(|&x| -x).collect(),
            m: self.m.iter().map(|&x| -x).collect(),
        }
    }
}

/// Differentiation targets. Indices are 0-based; dynamic angle 0 is the fast
/// angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Action(usize),
    Angle(usize),
    Parameter(usize),
}

/// A homogeneous Fourier–Taylor series (one grade of the P_{2l} hierarchy).
#[derive(Clone, Debug, PartialEq)]
pub struct FtSeries<T: Scalar> {
    n_dyn: usize,
    n_par: usize,
    grade_l: usize,
    real_flag: bool,
    terms: BTreeMap<TermKey, Complex<T>>,
}

impl<T: Scalar> FtSeries<T> {
    /// The zero series of the given shape and grade. Starts real-flagged
    /// (zero is real); the flag degrades as complex content is inserted.
    pub fn zero(n_dyn: usize, n_par: usize, grade_l: usize) -> Self {
        FtSeries {
            n_dyn,
            n_par,
            grade_l,
            real_flag: true,
            terms: BTreeMap::new(),
        }
    }

    /// Single-term constructor, mostly for tests and model assembly.
    pub fn monomial(
        n_dyn: usize,
        n_par: usize,
        i: Vec<u8>,
        k: Vec<i16>,
        m: Vec<i16>,
        c: Complex<T>,
    ) -> Result<Self> {
        let grade = i.iter().map(|&e| e as usize).sum();
        let mut s = FtSeries::zero(n_dyn, n_par, grade);
        s.add_term(TermKey::new(i, k, m), c)?;
        s.real_flag = s.check_reality(prune_threshold::<T>());
        Ok(s)
    }

    pub fn n_dyn(&self) -> usize {
        self.n_dyn
    }
    pub fn n_par(&self) -> usize {
        self.n_par
    }
    pub fn grade(&self) -> usize {
        self.grade_l
    }
    pub fn is_real(&self) -> bool {
        self.real_flag
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TermKey, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, key: &TermKey) -> Complex<T> {
        self.terms
            .get(key)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    fn check_key(&self, key: &TermKey) -> Result<()> {
        if key.i.len() != self.n_dyn || key.k.len() != self.n_dyn || key.m.len() != self.n_par {
            return Err(CoreError::DimensionMismatch(format!(
                "term key shape ({},{},{}) vs series ({},{},{})",
                key.i.len(),
                key.k.len(),
                key.m.len(),
                self.n_dyn,
                self.n_dyn,
                self.n_par
            )));
        }
        if key.degree() != self.grade_l {
            return Err(CoreError::InvalidInput(format!(
                "action degree {} does not match grade {}",
                key.degree(),
                self.grade_l
            )));
        }
        Ok(())
    }

    /// Accumulate a coefficient onto a term (validating the key shape).
    pub fn add_term(&mut self, key: TermKey, c: Complex<T>) -> Result<()> {
        self.check_key(&key)?;
        let slot = self
            .terms
            .entry(key)
            .or_insert_with(|| Complex::new(T::zero(), T::zero()));
        *slot = *slot + c;
        Ok(())
    }

    /// Drop terms with magnitude below `tol`; zero-size map stays valid.
    pub fn prune(&mut self, tol: T) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    /// `prune` at the type's default threshold, returning self for chaining.
    pub fn pruned(mut self) -> Self {
        self.prune(prune_threshold::<T>());
        self
    }

    /// Whether coefficients currently satisfy the conjugate symmetry within
    /// `tol` (absolute, per term).
    pub fn check_reality(&self, tol: T) -> bool {
        self.terms.iter().all(|(key, c)| {
            let mirror = self.coefficient(&key.mirrored());
            (mirror.conj() - *c).norm() <= tol
        })
    }

    /// Assert and record the reality flag. Errors if the symmetry fails at
    /// the default pruning threshold scaled by the series size.
    pub fn into_real(mut self) -> Result<Self> {
        let tol = prune_threshold::<T>()
            * T::from_usize(self.terms.len().max(1)).unwrap()
            * T::from_f64_lit(16.0);
        if !self.check_reality(tol) {
            return Err(CoreError::InvalidInput(
                "conjugate symmetry violated; series is not real".into(),
            ));
        }
        self.real_flag = true;
        Ok(self)
    }

    fn assert_same_shape(&self, other: &Self) -> Result<()> {
        if self.n_dyn != other.n_dyn || self.n_par != other.n_par {
            return Err(CoreError::DimensionMismatch(format!(
                "series shapes ({},{}) vs ({},{})",
                self.n_dyn, self.n_par, other.n_dyn, other.n_par
            )));
        }
        Ok(())
    }

    /// Term-wise sum; grades must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.assert_same_shape(other)?;
        if self.grade_l != other.grade_l {
            return Err(CoreError::InvalidInput(format!(
                "cannot add grades {} and {}",
                self.grade_l, other.grade_l
            )));
        }
        let mut out = self.clone();
        out.real_flag = self.real_flag && other.real_flag;
        for (key, c) in &other.terms {
            out.add_term(key.clone(), *c)?;
        }
        out.prune(prune_threshold::<T>());
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled_real(-T::one()))
    }

    /// Multiply every coefficient by a complex constant.
    pub fn scaled(&self, c: Complex<T>) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = *v * c;
        }
        if c.im != T::zero() {
            out.real_flag = false;
        }
        out
    }

    pub fn scaled_real(&self, x: T) -> Self {
        self.scaled(Complex::new(x, T::zero()))
    }

    /// Product of series: P_{2l₁} × P_{2l₂} → P_{2(l₁+l₂)}.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.assert_same_shape(other)?;
        let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l + other.grade_l);
        out.real_flag = self.real_flag && other.real_flag;
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = TermKey {
                    i: ka.i.iter().zip(&kb.i).map(|(a, b)| a + b).collect(),
                    k: ka.k.iter().zip(&kb.k).map(|(a, b)| a + b).collect(),
                    m: ka.m.iter().zip(&kb.m).map(|(a, b)| a + b).collect(),
                };
                out.add_term(key, *ca * *cb)?;
            }
        }
        out.prune(prune_threshold::<T>());
        Ok(out)
    }

    /// Canonical Poisson bracket `{f, g} = Σ_j (∂f/∂q̂_j ∂g/∂p̂_j − ∂f/∂p̂_j ∂g/∂q̂_j)`,
    /// so that q̇ = {q, H} = ∂H/∂p̂. Parameter angles are inert.
    ///
    /// Result grade is `l_f + l_g − 1`; the bracket of two grade-0 series is
    /// identically zero (the class below grade 0 is trivial) and is returned
    /// as the empty grade-0 series.
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self> {
        self.assert_same_shape(other)?;
        let lf = self.grade_l;
        let lg = other.grade_l;
        if lf + lg == 0 {
            return Ok(FtSeries::zero(self.n_dyn, self.n_par, 0));
        }
        let mut out = FtSeries::zero(self.n_dyn, self.n_par, lf + lg - 1);
        out.real_flag = self.real_flag && other.real_flag;
        let i_unit = Complex::new(T::zero(), T::one());
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                for j in 0..self.n_dyn {
                    // ∂f/∂q̂_j ∂g/∂p̂_j : needs exponent b_j ≥ 1 on g.
                    if kb.i[j] > 0 && ka.k[j] != 0 {
                        let coeff = i_unit
                            * *ca
                            * *cb
                            * Complex::new(
                                T::from_i16(ka.k[j]).unwrap() * T::from_u8(kb.i[j]).unwrap(),
                                T::zero(),
                            );
                        let mut i = Vec::with_capacity(self.n_dyn);
                        for t in 0..self.n_dyn {
                            let e = ka.i[t] + kb.i[t] - u8::from(t == j);
                            i.push(e);
                        }
                        let key = TermKey {
                            i,
                            k: ka.k.iter().zip(&kb.k).map(|(a, b)| a + b).collect(),
                            m: ka.m.iter().zip(&kb.m).map(|(a, b)| a + b).collect(),
                        };
                        out.add_term(key, coeff)?;
                    }
                    // − ∂f/∂p̂_j ∂g/∂q̂_j : needs exponent a_j ≥ 1 on f.
                    if ka.i[j] > 0 && kb.k[j] != 0 {
                        let coeff = -i_unit
                            * *ca
                            * *cb
                            * Complex::new(
                                T::from_i16(kb.k[j]).unwrap() * T::from_u8(ka.i[j]).unwrap(),
                                T::zero(),
                            );
                        let mut i = Vec::with_capacity(self.n_dyn);
                        for t in 0..self.n_dyn {
                            let e = ka.i[t] + kb.i[t] - u8::from(t == j);
                            i.push(e);
                        }
                        let key = TermKey {
                            i,
                            k: ka.k.iter().zip(&kb.k).map(|(a, b)| a + b).collect(),
                            m: ka.m.iter().zip(&kb.m).map(|(a, b)| a + b).collect(),
                        };
                        out.add_term(key, coeff)?;
                    }
                }
            }
        }
        out.prune(prune_threshold::<T>());
        Ok(out)
    }

    /// Weighted norm `Σ |g_{i,k,m}| (αρ)^l e^{(|k|+|m|)ασ}`.
    ///
    /// The scaling α shrinks both the action radius and the angular strip,
    /// i.e. ‖·‖_α is the norm at (αρ, ασ).
    pub fn weighted_norm(&self, rho: T, sigma: T, alpha: T) -> Result<T> {
        if rho <= T::zero() || sigma <= T::zero() || alpha <= T::zero() || alpha > T::one() {
            return Err(CoreError::InvalidInput(
                "weighted norm needs rho, sigma > 0 and 0 < alpha <= 1".into(),
            ));
        }
        let radial = (alpha * rho).powi(self.grade_l as i32);
        let mut total = T::zero();
        for (key, c) in &self.terms {
            let fourier =
                (alpha * sigma * T::from_usize(key.harmonic_size()).unwrap()).exp();
            total += c.norm() * radial * fourier;
        }
        Ok(total)
    }

    /// Projection onto the fast-angle average: keep exactly the terms with
    /// k₁ = 0 (dynamic index 0). Idempotent and norm-nonincreasing.
    pub fn average_q1(&self) -> Self {
        let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l);
        out.real_flag = self.real_flag;
        for (key, c) in &self.terms {
            if key.k[0] == 0 {
                out.terms.insert(key.clone(), *c);
            }
        }
        out
    }

    /// The complementary projection: terms with k₁ ≠ 0.
    pub fn oscillating_part(&self) -> Self {
        let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l);
        out.real_flag = self.real_flag;
        for (key, c) in &self.terms {
            if key.k[0] != 0 {
                out.terms.insert(key.clone(), *c);
            }
        }
        out
    }

    /// Exact term-wise partial derivative. Action derivatives lower the grade
    /// by one; angle derivatives multiply by `i·k_j` (or `i·m_j`). The action
    /// derivative of a grade-0 series is the zero grade-0 series.
    pub fn partial_derivative(&self, var: Var) -> Result<Self> {
        match var {
            Var::Action(j) => {
                if j >= self.n_dyn {
                    return Err(CoreError::InvalidInput(format!("action index {j}")));
                }
                let out_grade = self.grade_l.saturating_sub(1);
                let mut out = FtSeries::zero(self.n_dyn, self.n_par, out_grade);
                out.real_flag = self.real_flag;
                if self.grade_l == 0 {
                    return Ok(out);
                }
                for (key, c) in &self.terms {
                    if key.i[j] == 0 {
                        continue;
                    }
                    let mut i = key.i.clone();
                    i[j] -= 1;
                    let factor = T::from_u8(key.i[j]).unwrap();
                    out.add_term(
                        TermKey::new(i, key.k.clone(), key.m.clone()),
                        *c * Complex::new(factor, T::zero()),
                    )?;
                }
                Ok(out)
            }
            Var::Angle(j) => {
                if j >= self.n_dyn {
                    return Err(CoreError::InvalidInput(format!("angle index {j}")));
                }
                let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l);
                out.real_flag = self.real_flag;
                for (key, c) in &self.terms {
                    if key.k[j] == 0 {
                        continue;
                    }
                    let factor = Complex::new(T::zero(), T::from_i16(key.k[j]).unwrap());
                    out.add_term(key.clone(), *c * factor)?;
                }
                Ok(out)
            }
            Var::Parameter(j) => {
                if j >= self.n_par {
                    return Err(CoreError::InvalidInput(format!("parameter index {j}")));
                }
                let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l);
                out.real_flag = self.real_flag;
                for (key, c) in &self.terms {
                    if key.m[j] == 0 {
                        continue;
                    }
                    let factor = Complex::new(T::zero(), T::from_i16(key.m[j]).unwrap());
                    out.add_term(key.clone(), *c * factor)?;
                }
                Ok(out)
            }
        }
    }

    /// Evaluate at a phase-space point. For real-flagged series the imaginary
    /// part is rounding noise only.
    pub fn evaluate(&self, p: &[T], q: &[T], qstar: &[T]) -> Result<Complex<T>> {
        if p.len() != self.n_dyn || q.len() != self.n_dyn || qstar.len() != self.n_par {
            return Err(CoreError::DimensionMismatch(format!(
                "evaluate with ({},{},{}) on series ({},{})",
                p.len(),
                q.len(),
                qstar.len(),
                self.n_dyn,
                self.n_par
            )));
        }
        let mut total = Complex::new(T::zero(), T::zero());
        for (key, c) in &self.terms {
            let mut amp = T::one();
            for (e, &pj) in key.i.iter().zip(p) {
                amp = amp * pj.powi(*e as i32);
            }
            let mut phase = T::zero();
            for (kj, &qj) in key.k.iter().zip(q) {
                phase += T::from_i16(*kj).unwrap() * qj;
            }
            for (mj, &sj) in key.m.iter().zip(qstar) {
                phase += T::from_i16(*mj).unwrap() * sj;
            }
            total = total + *c * Complex::from_polar(amp, phase);
        }
        Ok(total)
    }

    /// Fold the parameter block onto the slow dynamic angles (`q* → q`):
    /// every `m_j` is added to the matching slow harmonic `k_{j+1}` and the
    /// parameter block is zeroed. Used only to assemble the candidate system,
    /// never inside a canonical transformation.
    pub fn substitute_parameter_diagonal(&self) -> Result<Self> {
        if self.n_par + 1 != self.n_dyn {
            return Err(CoreError::DimensionMismatch(format!(
                "diagonal substitution needs n_par = n_dyn - 1, got ({}, {})",
                self.n_dyn, self.n_par
            )));
        }
        let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l);
        out.real_flag = self.real_flag;
        for (key, c) in &self.terms {
            let mut k = key.k.clone();
            for (j, mj) in key.m.iter().enumerate() {
                k[j + 1] += mj;
            }
            out.add_term(TermKey::new(key.i.clone(), k, vec![0; self.n_par]), *c)?;
        }
        out.prune(prune_threshold::<T>());
        Ok(out)
    }

    /// The opposite substitution (`q → q*` on the slow block): every slow
    /// harmonic `k_{j+1}` is moved into the parameter block, leaving only the
    /// fast harmonic dynamic. This is how "evaluated at the fixed torus
    /// phase" quantities are formed while q* stays symbolic.
    pub fn freeze_slow_angles(&self) -> Result<Self> {
        if self.n_par + 1 != self.n_dyn {
            return Err(CoreError::DimensionMismatch(format!(
                "freezing needs n_par = n_dyn - 1, got ({}, {})",
                self.n_dyn, self.n_par
            )));
        }
        let mut out = FtSeries::zero(self.n_dyn, self.n_par, self.grade_l);
        out.real_flag = self.real_flag;
        for (key, c) in &self.terms {
            let mut k = vec![0i16; self.n_dyn];
            k[0] = key.k[0];
            let mut m = key.m.clone();
            for j in 1..self.n_dyn {
                m[j - 1] += key.k[j];
            }
            out.add_term(TermKey::new(key.i.clone(), k, m), *c)?;
        }
        out.prune(prune_threshold::<T>());
        Ok(out)
    }

    /// Largest coefficient magnitude (0 for the zero series).
    pub fn max_abs(&self) -> T {
        self.terms
            .values()
            .map(|c| c.norm())
            .fold(T::zero(), T::max)
    }

    /// Plain ℓ1 mass of the coefficients (the weighted norm at ρ=σ=α=1 would
    /// add the Fourier weights; this is the unweighted size used for
    /// tolerances relative to "coefficient mass").
    pub fn coeff_l1(&self) -> T {
        self.terms.values().map(|c| c.norm()).sum()
    }
}

impl<T: Scalar> fmt::Display for FtSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 [grade {}]", self.grade_l);
        }
        let mut first = true;
        for (key, c) in self.terms.iter().take(12) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            for (j, e) in key.i.iter().enumerate() {
                if *e > 0 {
                    write!(f, " p{}^{}", j + 1, e)?;
                }
            }
            if key.k.iter().any(|&x| x != 0) || key.m.iter().any(|&x| x != 0) {
                write!(f, " exp(i[")?;
                for (j, kj) in key.k.iter().enumerate() {
                    if *kj != 0 {
                        write!(f, "{:+}q{}", kj, j + 1)?;
                    }
                }
                for (j, mj) in key.m.iter().enumerate() {
                    if *mj != 0 {
                        write!(f, "{:+}s{}", mj, j + 1)?;
                    }
                }
                write!(f, "])")?;
            }
        }
        if self.terms.len() > 12 {
            write!(f, " + … ({} terms)", self.terms.len())?;
        }
        Ok(())
    }
}

// --- serialization --------------------------------------------------------

/// One term of the on-disk format.
#[derive(Serialize, Deserialize)]
struct TermJson {
    i: Vec<u8>,
    k: Vec<i16>,
    m: Vec<i16>,
    re: f64,
    im: f64,
}

/// Versioned on-disk form of a series. Terms are emitted in the canonical
/// `(i, k, m)` lexicographic order, so identical series serialize to
/// identical bytes.
#[derive(Serialize, Deserialize)]
pub struct SeriesJson {
    pub version: u32,
    pub n_dyn: usize,
    pub n_par: usize,
    pub grade_l: usize,
    pub real_flag: bool,
    terms: Vec<TermJson>,
}

pub const SERIES_FORMAT_VERSION: u32 = 1;

impl FtSeries<f64> {
    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            version: SERIES_FORMAT_VERSION,
            n_dyn: self.n_dyn,
            n_par: self.n_par,
            grade_l: self.grade_l,
            real_flag: self.real_flag,
            terms: self
                .terms
                .iter()
                .map(|(key, c)| TermJson {
                    i: key.i.clone(),
                    k: key.k.clone(),
                    m: key.m.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &SeriesJson) -> Result<Self> {
        if doc.version != SERIES_FORMAT_VERSION {
            return Err(CoreError::Serialization(format!(
                "series format version {} (expected {})",
                doc.version, SERIES_FORMAT_VERSION
            )));
        }
        let mut s = FtSeries::zero(doc.n_dyn, doc.n_par, doc.grade_l);
        for t in &doc.terms {
            s.add_term(
                TermKey::new(t.i.clone(), t.k.clone(), t.m.clone()),
                Complex::new(t.re, t.im),
            )?;
        }
        s.real_flag = doc.real_flag;
        if doc.real_flag && !s.check_reality(1e-9) {
            return Err(CoreError::Serialization(
                "real-flagged series violates conjugate symmetry".into(),
            ));
        }
        Ok(s)
    }
}

// --- convenience constructors used across the crate ------------------------

impl<T: Scalar> FtSeries<T> {
    /// `cos⟨k, q̂⟩` (plus an optional parameter harmonic), entered as the
    /// symmetric pair of complex exponentials with coefficient c/2.
    pub fn cosine(
        n_dyn: usize,
        n_par: usize,
        k: Vec<i16>,
        m: Vec<i16>,
        amplitude: T,
    ) -> Result<Self> {
        let mut s = FtSeries::zero(n_dyn, n_par, 0);
        let half = Complex::new(amplitude / T::from_f64_lit(2.0), T::zero());
        let key = TermKey::new(vec![0; n_dyn], k, m);
        s.add_term(key.mirrored(), half)?;
        s.add_term(key, half)?;
        Ok(s)
    }

    /// `sin⟨k, q̂⟩` (plus an optional parameter harmonic).
    pub fn sine(
        n_dyn: usize,
        n_par: usize,
        k: Vec<i16>,
        m: Vec<i16>,
        amplitude: T,
    ) -> Result<Self> {
        let mut s = FtSeries::zero(n_dyn, n_par, 0);
        // sin x = (e^{ix} − e^{−ix}) / (2i)
        let c = Complex::new(T::zero(), -amplitude / T::from_f64_lit(2.0));
        let key = TermKey::new(vec![0; n_dyn], k, m);
        s.add_term(key.mirrored(), -c)?;
        s.add_term(key, c)?;
        Ok(s)
    }

    /// The action monomial `p̂_j`.
    pub fn action(n_dyn: usize, n_par: usize, j: usize) -> Result<Self> {
        let mut i = vec![0u8; n_dyn];
        i[j] = 1;
        FtSeries::monomial(
            n_dyn,
            n_par,
            i,
            vec![0; n_dyn],
            vec![0; n_par],
            Complex::new(T::one(), T::zero()),
        )
    }
}
