//! Source and detector imperfection models.
//!
//! Sources are on-demand emitters with per-photon survival probability
//! `eta_s` and an internal-mode overlap `x` (pairwise two-photon
//! interference visibility `x^2`). Detectors come in three kinds: ideal
//! photon-number resolving, standard binary, and a k-way multiplexed
//! pseudo-PNRD built from binary elements behind a balanced 1-to-k splitter.

use std::collections::BTreeMap;

use num_complex::Complex;
use thiserror::Error;

use crate::fock::{bell_state, BellKind, Jones, MixedEnsemble, Mode, Path, Pol, StateVector};
use crate::network::{ClickPattern, Network, NetworkError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("efficiency {0} outside [0, 1]")]
    BadEfficiency(f64),

    #[error("overlap {0} outside [0, 1]")]
    BadOverlap(f64),

    #[error("photon number {0} exceeds the supported maximum of 8")]
    TooManyPhotons(u32),

    #[error("pseudo detector needs at least one element")]
    NoElements,
}

/// Lossy on-demand photon source: each photon survives with probability
/// `eta_s` and carries internal-mode overlap `overlap_x` with its siblings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel<R: Real> {
    pub eta_s: R,
    pub overlap_x: R,
}

impl<R: Real> SourceModel<R> {
    pub fn new(eta_s: R, overlap_x: R) -> Result<Self, DeviceError> {
        if eta_s < R::zero() || eta_s > R::one() {
            return Err(DeviceError::BadEfficiency(eta_s.to_f64().unwrap()));
        }
        if overlap_x < R::zero() || overlap_x > R::one() {
            return Err(DeviceError::BadOverlap(overlap_x.to_f64().unwrap()));
        }
        Ok(SourceModel { eta_s, overlap_x })
    }

    pub fn ideal() -> Self {
        SourceModel {
            eta_s: R::one(),
            overlap_x: R::one(),
        }
    }
}

/// Detector architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    /// Perfect photon-number resolution: `P(m|n) = δ_{mn}`.
    IdealPnrd,
    /// Binary click/no-click detector. The default convention reports a
    /// click on any `n >= 1` with probability `eta_d`; the physical variant
    /// uses `1 - (1 - eta_d)^n`.
    Standard { physical: bool },
    /// `elements` binary detectors behind a balanced 1-to-k splitter; the
    /// reported count is the number of elements that click.
    PseudoPnrd { elements: u32 },
}

/// Detector response kernel `P(m | n)` with per-element efficiency `eta_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<R: Real> {
    pub kind: DetectorKind,
    pub eta_d: R,
}

impl<R: Real> DetectorModel<R> {
    pub fn new(kind: DetectorKind, eta_d: R) -> Self {
        DetectorModel { kind, eta_d }
    }

    pub fn ideal() -> Self {
        DetectorModel::new(DetectorKind::IdealPnrd, R::one())
    }

    pub fn pseudo_four(eta_d: R) -> Self {
        DetectorModel::new(DetectorKind::PseudoPnrd { elements: 4 }, eta_d)
    }

    pub fn standard(eta_d: R) -> Self {
        DetectorModel::new(DetectorKind::Standard { physical: false }, eta_d)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.eta_d < R::zero() || self.eta_d > R::one() {
            return Err(DeviceError::BadEfficiency(self.eta_d.to_f64().unwrap()));
        }
        if let DetectorKind::PseudoPnrd { elements: 0 } = self.kind {
            return Err(DeviceError::NoElements);
        }
        Ok(())
    }

    /// Distribution over detected counts `m` for `n` injected photons.
    /// The returned vector has length `n + 1` and sums to one.
    pub fn response(&self, n: u32) -> Result<Vec<R>, DeviceError> {
        pnrd_response(n, self)
    }

    /// `P(m | n)` with `m` beyond the vector treated as zero.
    pub fn prob(&self, m: u32, n: u32) -> R {
        self.response(n)
            .map(|v| v.get(m as usize).copied().unwrap_or_else(R::zero))
            .unwrap_or_else(|_| R::zero())
    }
}

/// Response kernel of a detector model: probabilities of reporting
/// `m = 0..=n` photons when `n` arrive.
pub fn pnrd_response<R: Real>(n: u32, model: &DetectorModel<R>) -> Result<Vec<R>, DeviceError> {
    if n > crate::fock::MAX_PHOTONS {
        return Err(DeviceError::TooManyPhotons(n));
    }
    model.validate()?;
    let eta = model.eta_d;
    let mut out = vec![R::zero(); n as usize + 1];
    if n == 0 {
        out[0] = R::one();
        return Ok(out);
    }
    match model.kind {
        DetectorKind::IdealPnrd => {
            out[n as usize] = R::one();
        }
        DetectorKind::Standard { physical } => {
            let p_click = if physical {
                R::one() - (R::one() - eta).powi(n as i32)
            } else {
                eta
            };
            out[0] = R::one() - p_click;
            out[1] = p_click;
        }
        DetectorKind::PseudoPnrd { elements } => {
            let k = elements;
            // Photons scatter uniformly over k elements; an element holding
            // at least one photon clicks with probability eta_d. Occupancy
            // statistics come from Stirling partition counts.
            for e in 1..=n.min(k) {
                let p_occupied = R::of(stirling2(n, e) as f64) * falling_factorial::<R>(k, e)
                    / R::of(k as f64).powi(n as i32);
                for m in 0..=e {
                    let p_clicks = R::of(binomial(e, m) as f64)
                        * eta.powi(m as i32)
                        * (R::one() - eta).powi((e - m) as i32);
                    out[m as usize] = out[m as usize] + p_occupied * p_clicks;
                }
            }
        }
    }
    Ok(out)
}

/// Stirling numbers of the second kind: partitions of `n` items into `e`
/// nonempty blocks. Exact for the photon numbers supported here.
fn stirling2(n: u32, e: u32) -> u64 {
    if e == 0 {
        return (n == 0) as u64;
    }
    if e > n {
        return 0;
    }
    let mut row = vec![0u64; n as usize + 1];
    row[0] = 1; // S(0, 0)
    let mut table = vec![row];
    for i in 1..=n as usize {
        let prev = &table[i - 1];
        let mut next = vec![0u64; n as usize + 1];
        for j in 1..=i {
            next[j] = (j as u64) * prev[j] + prev[j - 1];
        }
        table.push(next);
    }
    table[n as usize][e as usize]
}

fn falling_factorial<R: Real>(k: u32, e: u32) -> R {
    let mut acc = R::one();
    for i in 0..e {
        acc = acc * R::of((k - i) as f64);
    }
    acc
}

fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Expands lossy sources into the mixture over which photons survived.
///
/// Each of the `2^N` branches carries weight `eta_s^|S| (1-eta_s)^(N-|S|)`;
/// photon `i` is prepared as `sqrt(x)`·(shared internal mode) plus
/// `sqrt(1-x)`·(its private internal mode `i+1`).
pub fn source_ensemble<R: Real>(
    specs: &[(Path, Jones<R>)],
    model: &SourceModel<R>,
) -> MixedEnsemble<R> {
    let n = specs.len();
    let x = model.overlap_x;
    let shared_amp = Complex::new(x.sqrt(), R::zero());
    let private_amp = Complex::new((R::one() - x).sqrt(), R::zero());

    let mut ensemble = MixedEnsemble::new();
    for subset in 0..(1u32 << n) {
        let present = subset.count_ones();
        let weight =
            model.eta_s.powi(present as i32) * (R::one() - model.eta_s).powi((n - present as usize) as i32);
        if weight <= R::zero() {
            continue;
        }
        let mut state = StateVector::vacuum();
        for (i, (path, jones)) in specs.iter().enumerate() {
            if subset & (1 << i) == 0 {
                continue;
            }
            let label = (i + 1) as u8;
            state = state
                .apply_creation(&[
                    (Mode::new(*path, Pol::H, 0), jones.h * shared_amp),
                    (Mode::new(*path, Pol::V, 0), jones.v * shared_amp),
                    (Mode::new(*path, Pol::H, label), jones.h * private_amp),
                    (Mode::new(*path, Pol::V, label), jones.v * private_amp),
                ])
                .expect("source photons stay within the photon cap");
        }
        ensemble.push(weight, state);
    }
    ensemble
}

/// Derives which heralding coincidences each Bell state of the analyzer
/// input pair produces, by injecting ideal photons and propagating.
///
/// Exactly two Bell states must produce coincidence patterns, mutually
/// exclusive ones; the other two must bunch (no cross-port coincidence).
pub fn bell_pattern_map<R: Real>(
    net: &Network<R>,
) -> Result<BTreeMap<BellKind, Vec<ClickPattern>>, NetworkError> {
    let analyzed = net.analyzed_paths();
    if analyzed.len() != 2 {
        return Err(NetworkError::AmbiguousBellMap);
    }
    let mut map = BTreeMap::new();
    for kind in BellKind::ALL {
        let input = bell_state::<R>(Path::P2, Path::P3, kind);
        let out = net.propagate_from(&input, &[Path::P2, Path::P3]);
        let rotated = net.apply_analyzer_rotations(&out);

        let mut patterns = Vec::new();
        let tol = R::strict_tolerance();
        for (counts, component) in rotated.split_by_path_counts(&analyzed) {
            if counts != vec![1, 1] || component.norm_sqr() <= tol {
                continue;
            }
            // One photon on each analyzer path: read the polarization slots.
            for (f, a) in component.terms() {
                if a.norm_sqr() <= tol {
                    continue;
                }
                let clicks = f.occupation().iter().map(|(m, &c)| {
                    let analyzer = &net.analyzers()[&m.path];
                    let name = match m.pol {
                        Pol::H => analyzer.det_transmitted.clone(),
                        Pol::V => analyzer.det_reflected.clone(),
                    };
                    (name, c)
                });
                let pattern = ClickPattern::new(clicks);
                if !patterns.contains(&pattern) {
                    patterns.push(pattern);
                }
            }
        }
        patterns.sort();
        map.insert(kind, patterns);
    }

    // The analyzer must separate exactly two Bell states with disjoint
    // pattern sets.
    let clicking: Vec<&BellKind> = map.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k).collect();
    if clicking.len() != 2 {
        return Err(NetworkError::AmbiguousBellMap);
    }
    let (a, b) = (clicking[0], clicking[1]);
    if map[a].iter().any(|p| map[b].contains(p)) {
        return Err(NetworkError::AmbiguousBellMap);
    }
    Ok(map)
}
