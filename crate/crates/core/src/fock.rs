//! Sparse bosonic Fock states over polarization-resolved spatial paths.
//!
//! States are maps from occupation vectors to complex amplitudes. A mode is a
//! `(path, polarization, internal)` triple; the internal label carries partial
//! distinguishability (label 0 is the shared reference mode, label `i > 0` the
//! private mode of source `i`). All values are immutable after construction
//! and every operation is a pure function.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex;
use serde_json::{json, Value};
use thiserror::Error;

use crate::scalar::Real;

/// Maximum total photon number supported by the sparse algebra.
pub const MAX_PHOTONS: u32 = 8;

/// Errors from state construction and manipulation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FockError {
    /// Two photons were requested on the same input path.
    #[error("path collision: duplicate path {0} in product input")]
    PathCollision(Path),

    /// A Jones vector failed its normalization check.
    #[error("invalid polarization: Jones vector is not normalized")]
    InvalidPolarization,

    /// The photon-number cap was exceeded.
    #[error("photon limit exceeded: more than {MAX_PHOTONS} photons")]
    PhotonLimit,

    /// Two states being combined occupy a common path.
    #[error("tensor factors share path {0}")]
    OverlappingModes(Path),

    /// Malformed serialized state.
    #[error("invalid state text: {0}")]
    Parse(String),
}

/// Polarization index of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub fn label(self) -> &'static str {
        match self {
            Pol::H => "H",
            Pol::V => "V",
        }
    }

    fn parse(s: &str) -> Result<Self, FockError> {
        match s {
            "H" => Ok(Pol::H),
            "V" => Ok(Pol::V),
            other => Err(FockError::Parse(format!("unknown polarization {other:?}"))),
        }
    }
}

impl fmt::Display for Pol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Spatial path label.
///
/// The gate layout uses a fixed set of named paths; arbitrary small integers
/// are available for ad-hoc circuits in tests and examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(pub u8);

impl Path {
    /// Control input.
    pub const C_IN: Path = Path(0);
    /// First ancilla input (prepared in `|+>`).
    pub const A1: Path = Path(1);
    /// Second ancilla input (prepared in `|H>`).
    pub const A2: Path = Path(2);
    /// Target input.
    pub const T_IN: Path = Path(3);
    /// First splitter output; carries the control output qubit.
    pub const P1: Path = Path(4);
    /// First splitter output feeding the Bell analyzer.
    pub const P2: Path = Path(5);
    /// Second splitter output feeding the Bell analyzer.
    pub const P3: Path = Path(6);
    /// Second splitter output; carries the target output qubit.
    pub const P4: Path = Path(7);
    /// Transmitted port of the analyzer splitter.
    pub const P2_OUT: Path = Path(8);
    /// Reflected port of the analyzer splitter.
    pub const P3_OUT: Path = Path(9);
    /// Alias: the control output leaves on path 1.
    pub const C_OUT: Path = Path::P1;
    /// Alias: the target output leaves on path 4.
    pub const T_OUT: Path = Path::P4;

    pub fn label(self) -> String {
        match self {
            Path::C_IN => "c_in".into(),
            Path::A1 => "a1".into(),
            Path::A2 => "a2".into(),
            Path::T_IN => "t_in".into(),
            Path::P1 => "1".into(),
            Path::P2 => "2".into(),
            Path::P3 => "3".into(),
            Path::P4 => "4".into(),
            Path::P2_OUT => "2'".into(),
            Path::P3_OUT => "3'".into(),
            Path(n) => format!("p{n}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self, FockError> {
        let path = match s {
            "c_in" => Path::C_IN,
            "a1" => Path::A1,
            "a2" => Path::A2,
            "t_in" => Path::T_IN,
            "1" | "c_out" => Path::P1,
            "2" => Path::P2,
            "3" => Path::P3,
            "4" | "t_out" => Path::P4,
            "2'" => Path::P2_OUT,
            "3'" => Path::P3_OUT,
            other => {
                let digits = other
                    .strip_prefix('p')
                    .ok_or_else(|| FockError::Parse(format!("unknown path {other:?}")))?;
                let n: u8 = digits
                    .parse()
                    .map_err(|_| FockError::Parse(format!("unknown path {other:?}")))?;
                Path(n)
            }
        };
        Ok(path)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A single bosonic mode. The derived ordering of `(path, pol, internal)` is
/// the canonical mode order used for sign-free normal ordering everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub path: Path,
    pub pol: Pol,
    pub internal: u8,
}

impl Mode {
    pub fn new(path: Path, pol: Pol, internal: u8) -> Self {
        Mode { path, pol, internal }
    }

    /// Mode in the shared reference internal state.
    pub fn shared(path: Path, pol: Pol) -> Self {
        Mode::new(path, pol, 0)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.path, self.pol, self.internal)
    }
}

/// Occupation-number vector in canonical sparse form: counts are strictly
/// positive and keyed in canonical mode order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FockState {
    occupation: BTreeMap<Mode, u8>,
}

impl FockState {
    pub fn vacuum() -> Self {
        FockState::default()
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (Mode, u8)>) -> Self {
        let occupation = counts.into_iter().filter(|&(_, n)| n > 0).collect();
        FockState { occupation }
    }

    pub fn occupation(&self) -> &BTreeMap<Mode, u8> {
        &self.occupation
    }

    pub fn count(&self, mode: Mode) -> u8 {
        self.occupation.get(&mode).copied().unwrap_or(0)
    }

    pub fn total_photons(&self) -> u32 {
        self.occupation.values().map(|&n| n as u32).sum()
    }

    pub fn path_photons(&self, path: Path) -> u32 {
        self.occupation
            .iter()
            .filter(|(m, _)| m.path == path)
            .map(|(_, &n)| n as u32)
            .sum()
    }

    pub fn paths(&self) -> BTreeSet<Path> {
        self.occupation.keys().map(|m| m.path).collect()
    }

    /// Splits the occupation into (modes on `paths`, remaining modes).
    pub fn split_paths(&self, paths: &BTreeSet<Path>) -> (FockState, FockState) {
        let mut on = BTreeMap::new();
        let mut off = BTreeMap::new();
        for (&m, &n) in &self.occupation {
            if paths.contains(&m.path) {
                on.insert(m, n);
            } else {
                off.insert(m, n);
            }
        }
        (FockState { occupation: on }, FockState { occupation: off })
    }

    /// Returns a copy with one more photon in `mode`, plus the new count.
    fn with_created(&self, mode: Mode) -> (FockState, u8) {
        let mut occ = self.occupation.clone();
        let n = occ.entry(mode).or_insert(0);
        *n += 1;
        let count = *n;
        (FockState { occupation: occ }, count)
    }

    /// Merges two occupations over disjoint mode sets.
    fn merged(&self, other: &FockState) -> FockState {
        let mut occ = self.occupation.clone();
        for (&m, &n) in &other.occupation {
            *occ.entry(m).or_insert(0) += n;
        }
        FockState { occupation: occ }
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.occupation.is_empty() {
            return f.write_str("|vac>");
        }
        f.write_str("|")?;
        for (i, (m, n)) in self.occupation.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{m}x{n}")?;
        }
        f.write_str(">")
    }
}

/// Polarization Jones vector `(h, v)` of a single photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones<R: Real> {
    pub h: Complex<R>,
    pub v: Complex<R>,
}

impl<R: Real> Jones<R> {
    pub fn new(h: Complex<R>, v: Complex<R>) -> Self {
        Jones { h, v }
    }

    pub fn from_reals(h: R, v: R) -> Self {
        Jones {
            h: Complex::new(h, R::zero()),
            v: Complex::new(v, R::zero()),
        }
    }

    pub fn horizontal() -> Self {
        Jones::from_reals(R::one(), R::zero())
    }

    pub fn vertical() -> Self {
        Jones::from_reals(R::zero(), R::one())
    }

    pub fn plus() -> Self {
        let s = R::FRAC_1_SQRT_2();
        Jones::from_reals(s, s)
    }

    pub fn minus() -> Self {
        let s = R::FRAC_1_SQRT_2();
        Jones::from_reals(s, -s)
    }

    pub fn right() -> Self {
        let s = R::FRAC_1_SQRT_2();
        Jones::new(Complex::new(s, R::zero()), Complex::new(R::zero(), s))
    }

    pub fn left() -> Self {
        let s = R::FRAC_1_SQRT_2();
        Jones::new(Complex::new(s, R::zero()), Complex::new(R::zero(), -s))
    }

    pub fn norm_sqr(&self) -> R {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn is_normalized(&self, tol: R) -> bool {
        (self.norm_sqr() - R::one()).abs() <= tol
    }

    /// Hermitian inner product `<self|other>`.
    pub fn dot(&self, other: &Jones<R>) -> Complex<R> {
        self.h.conj() * other.h + self.v.conj() * other.v
    }
}

/// One photon of a product input: where it enters, its polarization, and its
/// internal (temporal/spectral) mode label.
#[derive(Debug, Clone, Copy)]
pub struct PhotonSpec<R: Real> {
    pub path: Path,
    pub jones: Jones<R>,
    pub internal: u8,
}

impl<R: Real> PhotonSpec<R> {
    pub fn new(path: Path, jones: Jones<R>) -> Self {
        PhotonSpec { path, jones, internal: 0 }
    }

    pub fn with_internal(path: Path, jones: Jones<R>, internal: u8) -> Self {
        PhotonSpec { path, jones, internal }
    }
}

/// The four maximally entangled two-qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "Phi+",
            BellKind::PhiMinus => "Phi-",
            BellKind::PsiPlus => "Psi+",
            BellKind::PsiMinus => "Psi-",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sparse state vector: a map from occupation vectors to complex amplitudes.
///
/// Sub-normalized states are legal (projections keep their squared norm as a
/// probability); amplitudes below `tolerance` are pruned.
#[derive(Debug, Clone)]
pub struct StateVector<R: Real> {
    terms: BTreeMap<FockState, Complex<R>>,
    tolerance: R,
}

impl<R: Real> Default for StateVector<R> {
    fn default() -> Self {
        StateVector::zero()
    }
}

impl<R: Real> StateVector<R> {
    /// The zero vector (no terms).
    pub fn zero() -> Self {
        StateVector {
            terms: BTreeMap::new(),
            tolerance: R::prune_tolerance(),
        }
    }

    /// The vacuum state with amplitude one.
    pub fn vacuum() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(FockState::vacuum(), Complex::new(R::one(), R::zero()));
        StateVector {
            terms,
            tolerance: R::prune_tolerance(),
        }
    }

    /// Builds a state from explicit terms, pruning sub-tolerance amplitudes.
    pub fn from_terms(terms: impl IntoIterator<Item = (FockState, Complex<R>)>) -> Self {
        let mut sv = StateVector::zero();
        for (f, a) in terms {
            let slot = sv.terms.entry(f).or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *slot = *slot + a;
        }
        sv.prune();
        sv
    }

    pub fn with_tolerance(mut self, tolerance: R) -> Self {
        self.tolerance = tolerance;
        self.prune();
        self
    }

    pub fn tolerance(&self) -> R {
        self.tolerance
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockState, &Complex<R>)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, f: &FockState) -> Complex<R> {
        self.terms
            .get(f)
            .copied()
            .unwrap_or_else(|| Complex::new(R::zero(), R::zero()))
    }

    pub fn norm_sqr(&self) -> R {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> R {
        self.norm_sqr().sqrt()
    }

    /// Total photon number, if every term agrees on it.
    pub fn uniform_photon_count(&self) -> Option<u32> {
        let mut counts = self.terms.keys().map(|f| f.total_photons());
        let first = counts.next()?;
        counts.all(|n| n == first).then_some(first)
    }

    /// All paths occupied by at least one term.
    pub fn occupied_paths(&self) -> BTreeSet<Path> {
        let mut set = BTreeSet::new();
        for f in self.terms.keys() {
            set.extend(f.paths());
        }
        set
    }

    fn prune(&mut self) {
        let tol = self.tolerance;
        self.terms.retain(|_, a| a.norm() > tol);
    }

    pub fn scaled(&self, c: Complex<R>) -> Self {
        let mut out = self.clone();
        for a in out.terms.values_mut() {
            *a = *a * c;
        }
        out.prune();
        out
    }

    pub fn scaled_real(&self, c: R) -> Self {
        self.scaled(Complex::new(c, R::zero()))
    }

    pub fn plus(&self, other: &StateVector<R>) -> Self {
        let mut out = self.clone();
        for (f, a) in &other.terms {
            let slot = out
                .terms
                .entry(f.clone())
                .or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *slot = *slot + *a;
        }
        out.prune();
        out
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == R::zero() {
            return self.clone();
        }
        self.scaled_real(R::one() / n)
    }

    /// Applies a creation operator: `a†|n> = sqrt(n+1)|n+1>`.
    pub fn create(&self, mode: Mode) -> Result<StateVector<R>, FockError> {
        let mut out = StateVector::zero().with_tolerance(self.tolerance);
        for (f, a) in &self.terms {
            if f.total_photons() + 1 > MAX_PHOTONS {
                return Err(FockError::PhotonLimit);
            }
            let (nf, count) = f.with_created(mode);
            let factor = R::of(count as f64).sqrt();
            let slot = out
                .terms
                .entry(nf)
                .or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *slot = *slot + *a * Complex::new(factor, R::zero());
        }
        out.prune();
        Ok(out)
    }

    /// Applies a linear combination of creation operators (one photon).
    pub fn apply_creation(&self, poly: &[(Mode, Complex<R>)]) -> Result<StateVector<R>, FockError> {
        let mut out = StateVector::zero().with_tolerance(self.tolerance);
        for &(mode, coeff) in poly {
            if coeff.norm() == R::zero() {
                continue;
            }
            out = out.plus(&self.create(mode)?.scaled(coeff));
        }
        Ok(out)
    }

    /// Tensor product of states over disjoint path sets.
    pub fn tensor(&self, other: &StateVector<R>) -> Result<StateVector<R>, FockError> {
        let left_paths = self.occupied_paths();
        for p in other.occupied_paths() {
            if left_paths.contains(&p) {
                return Err(FockError::OverlappingModes(p));
            }
        }
        let mut out = StateVector::zero().with_tolerance(self.tolerance);
        for (fa, aa) in &self.terms {
            for (fb, ab) in &other.terms {
                if fa.total_photons() + fb.total_photons() > MAX_PHOTONS {
                    return Err(FockError::PhotonLimit);
                }
                let f = fa.merged(fb);
                let slot = out
                    .terms
                    .entry(f)
                    .or_insert_with(|| Complex::new(R::zero(), R::zero()));
                *slot = *slot + *aa * *ab;
            }
        }
        out.prune();
        Ok(out)
    }

    /// Component of the state whose per-path photon totals equal `counts`
    /// exactly on every listed path. The result is unnormalized; its squared
    /// norm is the probability of that case. Unlisted paths are unconstrained.
    pub fn project_photon_counts(&self, counts: &BTreeMap<Path, u32>) -> StateVector<R> {
        let mut out = StateVector::zero().with_tolerance(self.tolerance);
        'term: for (f, a) in &self.terms {
            for (&path, &want) in counts {
                if f.path_photons(path) != want {
                    continue 'term;
                }
            }
            out.terms.insert(f.clone(), *a);
        }
        out
    }

    /// Splits the state into orthogonal components keyed by the photon count
    /// vector over `paths`. The components sum to the original state.
    pub fn split_by_path_counts(&self, paths: &[Path]) -> BTreeMap<Vec<u32>, StateVector<R>> {
        let mut out: BTreeMap<Vec<u32>, StateVector<R>> = BTreeMap::new();
        for (f, a) in &self.terms {
            let key: Vec<u32> = paths.iter().map(|&p| f.path_photons(p)).collect();
            out.entry(key)
                .or_insert_with(|| StateVector::zero().with_tolerance(self.tolerance))
                .terms
                .insert(f.clone(), *a);
        }
        out
    }

    /// Partial inner product: contracts `bra` against this state's component
    /// on `paths`, returning the (unnormalized) relative state on the rest.
    /// `bra` must only occupy modes on `paths`.
    pub fn partial_project(&self, bra: &StateVector<R>, paths: &[Path]) -> StateVector<R> {
        let path_set: BTreeSet<Path> = paths.iter().copied().collect();
        debug_assert!(bra.occupied_paths().is_subset(&path_set));
        let mut out = StateVector::zero().with_tolerance(self.tolerance);
        for (f, a) in &self.terms {
            let (on, off) = f.split_paths(&path_set);
            let b = bra.amplitude(&on);
            if b.norm() == R::zero() {
                continue;
            }
            let slot = out
                .terms
                .entry(off)
                .or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *slot = *slot + b.conj() * *a;
        }
        out.prune();
        out
    }
}

/// `<a|b>`, conjugate-linear in the first argument.
pub fn inner_product<R: Real>(a: &StateVector<R>, b: &StateVector<R>) -> Complex<R> {
    let mut acc = Complex::new(R::zero(), R::zero());
    // Iterate over the smaller map.
    let (small, large, conj_small) = if a.terms.len() <= b.terms.len() {
        (&a.terms, &b.terms, true)
    } else {
        (&b.terms, &a.terms, false)
    };
    for (f, x) in small {
        if let Some(y) = large.get(f) {
            acc = acc
                + if conj_small {
                    x.conj() * *y
                } else {
                    y.conj() * *x
                };
        }
    }
    acc
}

/// Squared overlap of normalized versions of `a` and `b` (1 for parallel
/// states regardless of global phase, 0 for orthogonal ones).
pub fn fidelity<R: Real>(a: &StateVector<R>, b: &StateVector<R>) -> R {
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if na == R::zero() || nb == R::zero() {
        return R::zero();
    }
    inner_product(a, b).norm_sqr() / (na * nb)
}

/// Whether two states are equal up to one global phase, within `tol` on every
/// amplitude.
pub fn approx_eq_up_to_phase<R: Real>(a: &StateVector<R>, b: &StateVector<R>, tol: R) -> bool {
    if a.is_zero() && b.is_zero() {
        return true;
    }
    // Fix the phase on the largest amplitude of `a`.
    let Some((f0, a0)) = a
        .terms()
        .max_by(|(_, x), (_, y)| x.norm().partial_cmp(&y.norm()).unwrap())
    else {
        return b.norm() <= tol;
    };
    let b0 = b.amplitude(f0);
    if b0.norm() <= tol {
        return false;
    }
    let phase = b0 / *a0 / Complex::new((b0 / *a0).norm(), R::zero());
    let keys: BTreeSet<&FockState> = a.terms.keys().chain(b.terms.keys()).collect();
    keys.into_iter()
        .all(|f| (a.amplitude(f) * phase - b.amplitude(f)).norm() <= tol)
}

/// Builds the product state of independent single photons, one per path.
///
/// Returns `⊗_i (h_i a†_{p_i,H} + v_i a†_{p_i,V}) |vac>` with each photon in
/// its declared internal mode.
pub fn make_product_input<R: Real>(specs: &[PhotonSpec<R>]) -> Result<StateVector<R>, FockError> {
    let mut seen = BTreeSet::new();
    // 1e-9 at double precision; the scalar's own check tolerance when that
    // is coarser (f32).
    let tol = {
        let base = R::of(1e-9);
        let strict = R::strict_tolerance();
        if strict > base {
            strict
        } else {
            base
        }
    };
    for spec in specs {
        if !seen.insert(spec.path) {
            return Err(FockError::PathCollision(spec.path));
        }
        if !spec.jones.is_normalized(tol) {
            return Err(FockError::InvalidPolarization);
        }
    }
    let mut state = StateVector::vacuum();
    for spec in specs {
        state = state.apply_creation(&[
            (Mode::new(spec.path, Pol::H, spec.internal), spec.jones.h),
            (Mode::new(spec.path, Pol::V, spec.internal), spec.jones.v),
        ])?;
    }
    Ok(state)
}

/// One of the four Bell states on two paths (shared internal mode).
pub fn bell_state<R: Real>(a: Path, b: Path, kind: BellKind) -> StateVector<R> {
    let s = R::FRAC_1_SQRT_2();
    let amp = |sign: R| Complex::new(sign * s, R::zero());
    let pair = |pa: Pol, pb: Pol| {
        FockState::from_counts([(Mode::shared(a, pa), 1), (Mode::shared(b, pb), 1)])
    };
    let (first, second, sign) = match kind {
        BellKind::PhiPlus => (pair(Pol::H, Pol::H), pair(Pol::V, Pol::V), R::one()),
        BellKind::PhiMinus => (pair(Pol::H, Pol::H), pair(Pol::V, Pol::V), -R::one()),
        BellKind::PsiPlus => (pair(Pol::H, Pol::V), pair(Pol::V, Pol::H), R::one()),
        BellKind::PsiMinus => (pair(Pol::H, Pol::V), pair(Pol::V, Pol::H), -R::one()),
    };
    StateVector::from_terms([(first, amp(R::one())), (second, amp(sign))])
}

/// A classical mixture of pure branches: `(weight, state)` pairs.
#[derive(Debug, Clone, Default)]
pub struct MixedEnsemble<R: Real> {
    branches: Vec<(R, StateVector<R>)>,
}

impl<R: Real> MixedEnsemble<R> {
    pub fn new() -> Self {
        MixedEnsemble { branches: Vec::new() }
    }

    pub fn pure(state: StateVector<R>) -> Self {
        MixedEnsemble {
            branches: vec![(R::one(), state)],
        }
    }

    pub fn from_branches(branches: Vec<(R, StateVector<R>)>) -> Self {
        MixedEnsemble { branches }
    }

    pub fn push(&mut self, weight: R, state: StateVector<R>) {
        if weight > R::zero() {
            self.branches.push((weight, state));
        }
    }

    pub fn branches(&self) -> &[(R, StateVector<R>)] {
        &self.branches
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn total_weight(&self) -> R {
        self.branches.iter().map(|(w, _)| *w).sum()
    }

    /// Weighted expectation of a per-branch quantity.
    pub fn expect<F: Fn(&StateVector<R>) -> R>(&self, f: F) -> R {
        self.branches.iter().map(|(w, s)| *w * f(s)).sum()
    }

    pub fn map_states<F: Fn(&StateVector<R>) -> StateVector<R>>(&self, f: F) -> Self {
        MixedEnsemble {
            branches: self.branches.iter().map(|(w, s)| (*w, f(s))).collect(),
        }
    }

    /// Rescales weights to sum to one (no-op on an empty ensemble).
    pub fn normalized_weights(&self) -> Self {
        let total = self.total_weight();
        if total == R::zero() {
            return self.clone();
        }
        MixedEnsemble {
            branches: self
                .branches
                .iter()
                .map(|(w, s)| (*w / total, s.clone()))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization: canonical JSON form.
// ---------------------------------------------------------------------------

impl<R: Real> StateVector<R> {
    /// Canonical JSON form: a list of `{occupation, re, im}` entries with the
    /// occupation written as `[[path, pol, internal, count], ...]` in
    /// canonical mode order.
    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .terms
            .iter()
            .map(|(f, a)| {
                let occ: Vec<Value> = f
                    .occupation()
                    .iter()
                    .map(|(m, &n)| {
                        json!([m.path.label(), m.pol.label(), m.internal, n])
                    })
                    .collect();
                json!({
                    "occupation": occ,
                    "re": a.re.to_f64().unwrap(),
                    "im": a.im.to_f64().unwrap(),
                })
            })
            .collect();
        Value::Array(entries)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json(value: &Value) -> Result<Self, FockError> {
        let entries = value
            .as_array()
            .ok_or_else(|| FockError::Parse("expected a JSON array of terms".into()))?;
        let mut terms = BTreeMap::new();
        for entry in entries {
            let occ_val = entry
                .get("occupation")
                .and_then(Value::as_array)
                .ok_or_else(|| FockError::Parse("term missing occupation".into()))?;
            let mut counts = BTreeMap::new();
            for quad in occ_val {
                let quad = quad
                    .as_array()
                    .filter(|q| q.len() == 4)
                    .ok_or_else(|| FockError::Parse("occupation entry is not a 4-tuple".into()))?;
                let path = Path::parse(
                    quad[0]
                        .as_str()
                        .ok_or_else(|| FockError::Parse("path must be a string".into()))?,
                )?;
                let pol = Pol::parse(
                    quad[1]
                        .as_str()
                        .ok_or_else(|| FockError::Parse("polarization must be a string".into()))?,
                )?;
                let internal = quad[2]
                    .as_u64()
                    .filter(|&x| x <= u8::MAX as u64)
                    .ok_or_else(|| FockError::Parse("bad internal label".into()))?
                    as u8;
                let count = quad[3]
                    .as_u64()
                    .filter(|&x| (1..=MAX_PHOTONS as u64).contains(&x))
                    .ok_or_else(|| FockError::Parse("bad photon count".into()))?
                    as u8;
                if counts.insert(Mode::new(path, pol, internal), count).is_some() {
                    return Err(FockError::Parse("duplicate mode in occupation".into()));
                }
            }
            let fock = FockState::from_counts(counts);
            if fock.total_photons() > MAX_PHOTONS {
                return Err(FockError::PhotonLimit);
            }
            let re = entry
                .get("re")
                .and_then(Value::as_f64)
                .ok_or_else(|| FockError::Parse("term missing re".into()))?;
            let im = entry
                .get("im")
                .and_then(Value::as_f64)
                .ok_or_else(|| FockError::Parse("term missing im".into()))?;
            if terms
                .insert(fock, Complex::new(R::of(re), R::of(im)))
                .is_some()
            {
                return Err(FockError::Parse("duplicate occupation vector".into()));
            }
        }
        let sv = StateVector {
            terms,
            tolerance: R::prune_tolerance(),
        };
        if sv.norm_sqr() > R::one() + R::of(1e-9) {
            return Err(FockError::Parse("state norm exceeds one".into()));
        }
        Ok(sv)
    }

    pub fn from_json_str(text: &str) -> Result<Self, FockError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| FockError::Parse(e.to_string()))?;
        Self::from_json(&value)
    }
}
