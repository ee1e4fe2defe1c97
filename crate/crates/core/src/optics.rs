//! Wave-plates and generalized polarizing beam splitters as unitary linear
//! maps on creation operators.
//!
//! A [`ModeLinearMap`] acts on a declared set of `(path, polarization)` modes
//! and is the identity everywhere else; internal mode labels pass through
//! untouched. Unitarity is checked at construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::fock::{FockState, Jones, Mode, Path, Pol, StateVector};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpticsError {
    /// Transmitted/reflected vectors are not an orthonormal pair.
    #[error("basis vectors are not orthonormal")]
    NonOrthogonalBasis,

    /// The assembled matrix failed the unitarity check.
    #[error("matrix is not unitary (defect {0})")]
    NonUnitary(String),

    /// Beam-splitter port labels do not form a valid wiring.
    #[error("invalid beam-splitter wiring: ports must be fully distinct or coincide pairwise")]
    InvalidWiring,
}

/// Named polarization basis of a splitter or analyzer: the transmitted and
/// reflected Jones vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationBasis<R: Real> {
    pub name: BasisName,
    pub transmitted: Jones<R>,
    pub reflected: Jones<R>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasisName {
    HV,
    DA,
    RL,
    Custom,
}

impl BasisName {
    pub fn label(self) -> &'static str {
        match self {
            BasisName::HV => "HV",
            BasisName::DA => "DA",
            BasisName::RL => "RL",
            BasisName::Custom => "custom",
        }
    }
}

impl<R: Real> PolarizationBasis<R> {
    /// Horizontal/vertical basis.
    pub fn hv() -> Self {
        PolarizationBasis {
            name: BasisName::HV,
            transmitted: Jones::horizontal(),
            reflected: Jones::vertical(),
        }
    }

    /// Diagonal/antidiagonal basis `(|H>±|V>)/sqrt(2)`.
    pub fn da() -> Self {
        PolarizationBasis {
            name: BasisName::DA,
            transmitted: Jones::plus(),
            reflected: Jones::minus(),
        }
    }

    /// Circular basis `(|H>±i|V>)/sqrt(2)`.
    pub fn rl() -> Self {
        PolarizationBasis {
            name: BasisName::RL,
            transmitted: Jones::right(),
            reflected: Jones::left(),
        }
    }

    pub fn custom(transmitted: Jones<R>, reflected: Jones<R>) -> Result<Self, OpticsError> {
        let tol = R::strict_tolerance();
        let ortho = transmitted.dot(&reflected).norm() <= tol;
        if !transmitted.is_normalized(tol) || !reflected.is_normalized(tol) || !ortho {
            return Err(OpticsError::NonOrthogonalBasis);
        }
        Ok(PolarizationBasis {
            name: BasisName::Custom,
            transmitted,
            reflected,
        })
    }

    /// Eigenbasis of `σx·cos(θ) + σy·sin(θ)`: transmitted is the +1
    /// eigenvector `(|H> + e^{iθ}|V>)/sqrt(2)`.
    pub fn equatorial(theta: R) -> Self {
        let s = R::FRAC_1_SQRT_2();
        let phase = Complex::new(theta.cos(), theta.sin()) * Complex::new(s, R::zero());
        let re = Complex::new(s, R::zero());
        let name = if theta == R::zero() { BasisName::DA } else { BasisName::Custom };
        PolarizationBasis {
            name,
            transmitted: Jones::new(re, phase),
            reflected: Jones::new(re, -phase),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "HV" => Some(Self::hv()),
            "DA" => Some(Self::da()),
            "RL" => Some(Self::rl()),
            _ => None,
        }
    }

    /// One-character outcome labels for the (transmitted, reflected) ports.
    pub fn outcome_labels(&self) -> (char, char) {
        match self.name {
            BasisName::HV => ('H', 'V'),
            BasisName::DA => ('+', '-'),
            BasisName::RL => ('R', 'L'),
            BasisName::Custom => ('t', 'r'),
        }
    }
}

/// Wave-plate retarder kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WavePlateKind {
    Half,
    Quarter,
}

/// Unitary linear transformation on creation operators over a declared set of
/// `(path, polarization)` modes; identity on all other modes.
#[derive(Debug, Clone)]
pub struct ModeLinearMap<R: Real> {
    /// Modes the map acts on, in canonical order.
    modes: Vec<(Path, Pol)>,
    /// Row-major square matrix; column `c` is the image of `modes[c]`.
    mat: Vec<Complex<R>>,
}

impl<R: Real> ModeLinearMap<R> {
    /// Builds a map from an explicit matrix, checking unitarity.
    pub fn new(modes: Vec<(Path, Pol)>, mat: Vec<Complex<R>>) -> Result<Self, OpticsError> {
        let n = modes.len();
        assert_eq!(mat.len(), n * n, "matrix shape must match mode count");
        let map = ModeLinearMap { modes, mat };
        let defect = map.unitarity_defect();
        if defect > R::strict_tolerance() {
            return Err(OpticsError::NonUnitary(format!("{defect}")));
        }
        Ok(map)
    }

    /// Identity on an empty mode set.
    pub fn identity() -> Self {
        ModeLinearMap {
            modes: Vec::new(),
            mat: Vec::new(),
        }
    }

    pub fn acted_modes(&self) -> &[(Path, Pol)] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<R> {
        self.mat[row * self.dim() + col]
    }

    /// Max-norm of `U†U − I`.
    pub fn unitarity_defect(&self) -> R {
        let n = self.dim();
        let mut worst = R::zero();
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::new(R::zero(), R::zero());
                for k in 0..n {
                    acc = acc + self.entry(k, i).conj() * self.entry(k, j);
                }
                let target = if i == j { R::one() } else { R::zero() };
                let dev = (acc - Complex::new(target, R::zero())).norm();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        worst
    }

    /// Jones matrix of a half- or quarter-wave plate with its fast axis at
    /// `angle`, acting in place on one path.
    pub fn waveplate(kind: WavePlateKind, angle: R, path: Path) -> Self {
        let modes = vec![(path, Pol::H), (path, Pol::V)];
        let zero = R::zero();
        let mat = match kind {
            WavePlateKind::Half => {
                let two = R::one() + R::one();
                let c2 = (two * angle).cos();
                let s2 = (two * angle).sin();
                vec![
                    Complex::new(c2, zero),
                    Complex::new(s2, zero),
                    Complex::new(s2, zero),
                    Complex::new(-c2, zero),
                ]
            }
            WavePlateKind::Quarter => {
                let c = angle.cos();
                let s = angle.sin();
                let cc = c * c;
                let ss = s * s;
                let sc = s * c;
                vec![
                    Complex::new(cc, -ss),
                    Complex::new(sc, sc),
                    Complex::new(sc, sc),
                    Complex::new(ss, -cc),
                ]
            }
        };
        ModeLinearMap::new(modes, mat).expect("wave-plate matrices are unitary")
    }

    /// Generalized polarizing beam splitter.
    ///
    /// The transmitted basis vector entering `in_a` leaves on `out_t` and the
    /// one entering `in_b` leaves on `out_r`; reflected components swap ports.
    /// The reflection phase is +1. Ports must either all be distinct (the map
    /// is completed with the reverse routing so it stays unitary) or coincide
    /// pairwise for in-place wiring.
    pub fn pbs(
        basis: &PolarizationBasis<R>,
        in_a: Path,
        in_b: Path,
        out_t: Path,
        out_r: Path,
    ) -> Result<Self, OpticsError> {
        let tol = R::strict_tolerance();
        if basis.transmitted.dot(&basis.reflected).norm() > tol
            || !basis.transmitted.is_normalized(tol)
            || !basis.reflected.is_normalized(tol)
        {
            return Err(OpticsError::NonOrthogonalBasis);
        }

        let in_place_straight = out_t == in_a && out_r == in_b;
        let in_place_crossed = out_t == in_b && out_r == in_a;
        let distinct = [in_a, in_b, out_t, out_r];
        let all_distinct = (1..4).all(|i| (0..i).all(|j| distinct[i] != distinct[j]));
        if !(all_distinct || in_place_straight || in_place_crossed) {
            return Err(OpticsError::InvalidWiring);
        }

        let mut paths = vec![in_a, in_b];
        for p in [out_t, out_r] {
            if !paths.contains(&p) {
                paths.push(p);
            }
        }
        paths.sort();
        let modes: Vec<(Path, Pol)> = paths
            .iter()
            .flat_map(|&p| [(p, Pol::H), (p, Pol::V)])
            .collect();
        let index: BTreeMap<(Path, Pol), usize> = modes
            .iter()
            .copied()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let n = modes.len();
        let mut mat = vec![Complex::new(R::zero(), R::zero()); n * n];

        // Adds |out, vec_out><in, vec_in| expressed in H/V coordinates.
        let mut add_pair = |p_in: Path, j_in: &Jones<R>, p_out: Path, j_out: &Jones<R>| {
            let in_coords = [(Pol::H, j_in.h), (Pol::V, j_in.v)];
            let out_coords = [(Pol::H, j_out.h), (Pol::V, j_out.v)];
            for (pol_o, co) in out_coords {
                for (pol_i, ci) in in_coords {
                    let row = index[&(p_out, pol_o)];
                    let col = index[&(p_in, pol_i)];
                    mat[row * n + col] = mat[row * n + col] + co * ci.conj();
                }
            }
        };

        let t = basis.transmitted;
        let r = basis.reflected;
        add_pair(in_a, &t, out_t, &t);
        add_pair(in_a, &r, out_r, &r);
        add_pair(in_b, &t, out_r, &t);
        add_pair(in_b, &r, out_t, &r);
        if all_distinct {
            // Reverse routing keeps the doubled mode space unitary; circuits
            // never populate output labels before the element fires.
            add_pair(out_t, &t, in_a, &t);
            add_pair(out_r, &r, in_a, &r);
            add_pair(out_r, &t, in_b, &t);
            add_pair(out_t, &r, in_b, &r);
        }

        ModeLinearMap::new(modes, mat)
    }

    /// Rotation taking a polarization basis to H/V on one path: transmitted
    /// component to the H slot, reflected to the V slot.
    pub fn basis_to_hv(path: Path, basis: &PolarizationBasis<R>) -> Self {
        let modes = vec![(path, Pol::H), (path, Pol::V)];
        let t = basis.transmitted;
        let r = basis.reflected;
        let mat = vec![t.h.conj(), t.v.conj(), r.h.conj(), r.v.conj()];
        ModeLinearMap::new(modes, mat).expect("basis rotation is unitary")
    }

    pub fn pauli_x(path: Path) -> Self {
        let zero = Complex::new(R::zero(), R::zero());
        let one = Complex::new(R::one(), R::zero());
        ModeLinearMap::new(
            vec![(path, Pol::H), (path, Pol::V)],
            vec![zero, one, one, zero],
        )
        .unwrap()
    }

    pub fn pauli_y(path: Path) -> Self {
        let zero = Complex::new(R::zero(), R::zero());
        let i = Complex::new(R::zero(), R::one());
        ModeLinearMap::new(
            vec![(path, Pol::H), (path, Pol::V)],
            vec![zero, -i, i, zero],
        )
        .unwrap()
    }

    pub fn pauli_z(path: Path) -> Self {
        let zero = Complex::new(R::zero(), R::zero());
        let one = Complex::new(R::one(), R::zero());
        ModeLinearMap::new(
            vec![(path, Pol::H), (path, Pol::V)],
            vec![one, zero, zero, -one],
        )
        .unwrap()
    }

    /// Single-qubit observable `σx·cos(θ) + σy·sin(θ)` (Hermitian unitary).
    pub fn equatorial_observable(path: Path, theta: R) -> Self {
        let zero = Complex::new(R::zero(), R::zero());
        let e = Complex::new(theta.cos(), theta.sin());
        ModeLinearMap::new(
            vec![(path, Pol::H), (path, Pol::V)],
            vec![zero, e.conj(), e, zero],
        )
        .unwrap()
    }

    /// Haar-ish random unitary on the given modes, for property tests.
    pub fn random_unitary(modes: Vec<(Path, Pol)>, rng: &mut impl Rng) -> Self {
        let n = modes.len();
        // Complex Gaussian matrix, then Gram-Schmidt on columns.
        let mut cols: Vec<Vec<Complex<R>>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        Complex::new(R::of(gauss(rng)), R::of(gauss(rng)))
                    })
                    .collect()
            })
            .collect();
        for c in 0..n {
            for prev in 0..c {
                let dot = cols[prev]
                    .iter()
                    .zip(&cols[c])
                    .fold(Complex::new(R::zero(), R::zero()), |acc, (a, b)| {
                        acc + a.conj() * *b
                    });
                let projection: Vec<Complex<R>> =
                    cols[prev].iter().map(|&v| v * dot).collect();
                for (x, sub) in cols[c].iter_mut().zip(projection) {
                    *x = *x - sub;
                }
            }
            let norm: R = cols[c].iter().map(|z| z.norm_sqr()).sum::<R>().sqrt();
            for x in cols[c].iter_mut() {
                *x = *x / Complex::new(norm, R::zero());
            }
        }
        let mut mat = vec![Complex::new(R::zero(), R::zero()); n * n];
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                mat[r * n + c] = *v;
            }
        }
        ModeLinearMap::new(modes, mat).expect("Gram-Schmidt output is unitary")
    }

    /// Matrix product `self · other` over the union of their mode sets.
    pub fn compose(&self, other: &ModeLinearMap<R>) -> Self {
        let mut modes: Vec<(Path, Pol)> = self
            .modes
            .iter()
            .chain(other.modes.iter())
            .copied()
            .collect();
        modes.sort();
        modes.dedup();
        let n = modes.len();
        let a = self.embedded(&modes);
        let b = other.embedded(&modes);
        let mut mat = vec![Complex::new(R::zero(), R::zero()); n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex::new(R::zero(), R::zero());
                for k in 0..n {
                    acc = acc + a[r * n + k] * b[k * n + c];
                }
                mat[r * n + c] = acc;
            }
        }
        ModeLinearMap { modes, mat }
    }

    /// The matrix extended by identity onto `modes` (a superset).
    fn embedded(&self, modes: &[(Path, Pol)]) -> Vec<Complex<R>> {
        let n = modes.len();
        let mut out = vec![Complex::new(R::zero(), R::zero()); n * n];
        let pos: BTreeMap<(Path, Pol), usize> = modes
            .iter()
            .copied()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        for i in 0..n {
            out[i * n + i] = Complex::new(R::one(), R::zero());
        }
        for (ci, cm) in self.modes.iter().enumerate() {
            let c = pos[cm];
            out[c * n + c] = Complex::new(R::zero(), R::zero());
            for (ri, rm) in self.modes.iter().enumerate() {
                out[pos[rm] * n + c] = self.entry(ri, ci);
            }
        }
        out
    }

    /// Max-norm difference to another map over the union of mode sets.
    pub fn matrix_distance(&self, other: &ModeLinearMap<R>) -> R {
        let mut modes: Vec<(Path, Pol)> = self
            .modes
            .iter()
            .chain(other.modes.iter())
            .copied()
            .collect();
        modes.sort();
        modes.dedup();
        let a = self.embedded(&modes);
        let b = other.embedded(&modes);
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (*x - *y).norm())
            .fold(R::zero(), |acc, v| if v > acc { v } else { acc })
    }

    /// Max-norm difference between the two maps' actions on creation
    /// operators of the given input paths (columns restricted to `inputs`).
    /// For splitters with distinct ports this is the physical comparison:
    /// the completion block that keeps the doubled mode space unitary is a
    /// representation choice.
    pub fn action_distance_on(&self, other: &ModeLinearMap<R>, inputs: &[Path]) -> R {
        self.restricted_distance(other, inputs, false)
    }

    /// Like [`Self::action_distance_on`] but quotients out one global phase.
    pub fn action_distance_on_up_to_phase(&self, other: &ModeLinearMap<R>, inputs: &[Path]) -> R {
        self.restricted_distance(other, inputs, true)
    }

    fn restricted_distance(&self, other: &ModeLinearMap<R>, inputs: &[Path], phase_free: bool) -> R {
        let mut modes: Vec<(Path, Pol)> = self
            .modes
            .iter()
            .chain(other.modes.iter())
            .copied()
            .collect();
        modes.sort();
        modes.dedup();
        let n = modes.len();
        let a = self.embedded(&modes);
        let b = other.embedded(&modes);
        let cols: Vec<usize> = modes
            .iter()
            .enumerate()
            .filter(|(_, (p, _))| inputs.contains(p))
            .map(|(i, _)| i)
            .collect();
        let cells = || cols.iter().flat_map(|&c| (0..n).map(move |r| r * n + c));
        let phase = if phase_free {
            let k = cells()
                .max_by(|&i, &j| a[i].norm().partial_cmp(&a[j].norm()).unwrap())
                .expect("restricted block is nonempty");
            if a[k].norm() == R::zero() || b[k].norm() == R::zero() {
                Complex::new(R::one(), R::zero())
            } else {
                let p = b[k] / a[k];
                p / Complex::new(p.norm(), R::zero())
            }
        } else {
            Complex::new(R::one(), R::zero())
        };
        cells()
            .map(|i| (a[i] * phase - b[i]).norm())
            .fold(R::zero(), |acc, v| if v > acc { v } else { acc })
    }

    /// Applies the map to a state: every creation operator is rewritten as
    /// its image and the product re-expanded into normalized occupations.
    /// Modes outside the acted set pass through unchanged; internal labels
    /// are untouched.
    pub fn apply(&self, s: &StateVector<R>) -> StateVector<R> {
        let index: BTreeMap<(Path, Pol), usize> = self
            .modes
            .iter()
            .copied()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let n = self.dim();
        let mut out_terms: BTreeMap<FockState, Complex<R>> = BTreeMap::new();

        for (fock, amp) in s.terms() {
            // Split occupation into acted and pass-through modes.
            let mut acted: Vec<(Mode, u8)> = Vec::new();
            let mut passthrough: Vec<(Mode, u8)> = Vec::new();
            for (&m, &count) in fock.occupation() {
                if index.contains_key(&(m.path, m.pol)) {
                    acted.push((m, count));
                } else {
                    passthrough.push((m, count));
                }
            }

            // Expansion terms: accumulated occupation of acted-space output
            // modes plus a running coefficient.
            let mut partial: Vec<(BTreeMap<Mode, u8>, Complex<R>)> =
                vec![(BTreeMap::new(), *amp)];
            for &(mode, count) in &acted {
                let col = index[&(mode.path, mode.pol)];
                let images: Vec<(Mode, Complex<R>)> = (0..n)
                    .filter_map(|row| {
                        let coeff = self.entry(row, col);
                        (coeff.norm() > R::zero()).then(|| {
                            let (p, pol) = self.modes[row];
                            (Mode::new(p, pol, mode.internal), coeff)
                        })
                    })
                    .collect();
                let mut compositions = Vec::new();
                enumerate_compositions(count as u32, images.len(), &mut compositions);
                let inv_norm = R::one() / factorial::<R>(count as u32).sqrt();
                let mut next = Vec::with_capacity(partial.len() * compositions.len());
                for (occ, coeff) in &partial {
                    for ks in &compositions {
                        let mut c = *coeff * Complex::new(multinomial::<R>(count as u32, ks) * inv_norm, R::zero());
                        let mut occ2 = occ.clone();
                        for (slot, &k) in ks.iter().enumerate() {
                            if k == 0 {
                                continue;
                            }
                            let (m, u) = images[slot];
                            let mut power = Complex::new(R::one(), R::zero());
                            for _ in 0..k {
                                power = power * u;
                            }
                            c = c * power;
                            *occ2.entry(m).or_insert(0) += k as u8;
                        }
                        next.push((occ2, c));
                    }
                }
                partial = next;
            }

            for (occ, coeff) in partial {
                // Normal-ordering factor for the accumulated output counts.
                let mut norm_factor = R::one();
                for &k in occ.values() {
                    norm_factor = norm_factor * factorial::<R>(k as u32);
                }
                let c = coeff * Complex::new(norm_factor.sqrt(), R::zero());
                let full = FockState::from_counts(
                    occ.into_iter().chain(passthrough.iter().copied()),
                );
                let slot = out_terms
                    .entry(full)
                    .or_insert_with(|| Complex::new(R::zero(), R::zero()));
                *slot = *slot + c;
            }
        }

        StateVector::from_terms(out_terms).with_tolerance(s.tolerance())
    }

    /// Debug dump of the matrix as CSV (`re+im i` cells, modes as headers).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("mode");
        for (p, pol) in &self.modes {
            let _ = write!(out, ",{p}:{pol}");
        }
        out.push('\n');
        for (r, (p, pol)) in self.modes.iter().enumerate() {
            let _ = write!(out, "{p}:{pol}");
            for c in 0..self.dim() {
                let z = self.entry(r, c);
                let _ = write!(
                    out,
                    ",{}{}{}i",
                    z.re,
                    if z.im < R::zero() { "-" } else { "+" },
                    z.im.abs()
                );
            }
            out.push('\n');
        }
        out
    }
}

fn factorial<R: Real>(n: u32) -> R {
    let mut acc = R::one();
    for k in 2..=n {
        acc = acc * R::of(k as f64);
    }
    acc
}

fn multinomial<R: Real>(n: u32, ks: &[u32]) -> R {
    let mut acc = factorial::<R>(n);
    for &k in ks {
        acc = acc / factorial::<R>(k);
    }
    acc
}

/// All ways to split `n` photons over `slots` image modes.
fn enumerate_compositions(n: u32, slots: usize, out: &mut Vec<Vec<u32>>) {
    fn rec(n: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=n {
            prefix.push(k);
            rec(n - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    if slots == 0 {
        if n == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut prefix = Vec::new();
    rec(n, slots, &mut prefix, out);
}

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller; plenty for test unitaries.
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}
