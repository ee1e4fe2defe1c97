//! Optical networks: ordered element stacks terminated by polarization
//! analyzers, and the exact outcome distribution over detector click
//! patterns.
//!
//! The heralded-CNOT preset lives here: an H/V splitter combining control
//! and first ancilla, a D/A splitter combining target and second ancilla, a
//! half-wave plate at zero degrees, and a circular-basis splitter feeding
//! two polarization analyzers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::DetectorModel;
use crate::fock::{
    bell_state, BellKind, FockState, MixedEnsemble, Mode, Path, Pol, StateVector,
};
use crate::optics::{ModeLinearMap, OpticsError, PolarizationBasis, WavePlateKind};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("mode out of map domain: state occupies path {0} unknown to the network")]
    ModeMismatch(Path),

    #[error("analyzer does not separate Bell states")]
    AmbiguousBellMap,

    #[error(transparent)]
    Optics(#[from] OpticsError),

    #[error("invalid network description: {0}")]
    Parse(String),
}

/// Serializable description of one element in the stack.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    Pbs {
        basis: String,
        in_a: String,
        in_b: String,
        out_t: String,
        out_r: String,
    },
    Hwp {
        angle_deg: f64,
        path: String,
    },
    Qwp {
        angle_deg: f64,
        path: String,
    },
}

/// One placed element: its description plus the compiled unitary.
#[derive(Debug, Clone)]
pub struct Element<R: Real> {
    pub spec: ElementSpec,
    pub map: ModeLinearMap<R>,
    inputs: Vec<Path>,
    outputs: Vec<Path>,
}

/// Terminal polarization measurement on one path: the analysis basis and the
/// detector names wired to its transmitted and reflected ports.
#[derive(Debug, Clone)]
pub struct Analyzer<R: Real> {
    pub basis: PolarizationBasis<R>,
    pub det_transmitted: String,
    pub det_reflected: String,
}

/// An ordered element stack with terminal analyzers.
#[derive(Debug, Clone, Default)]
pub struct Network<R: Real> {
    elements: Vec<Element<R>>,
    analyzers: BTreeMap<Path, Analyzer<R>>,
}

/// Which detectors fired, with multiplicity. Zero counts are not stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct ClickPattern(BTreeMap<String, u8>);

impl ClickPattern {
    pub fn new(counts: impl IntoIterator<Item = (String, u8)>) -> Self {
        ClickPattern(counts.into_iter().filter(|&(_, n)| n > 0).collect())
    }

    pub fn of(pairs: &[(&str, u8)]) -> Self {
        Self::new(pairs.iter().map(|&(d, n)| (d.to_string(), n)))
    }

    pub fn counts(&self) -> &BTreeMap<String, u8> {
        &self.0
    }

    pub fn count(&self, det: &str) -> u8 {
        self.0.get(det).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.0.values().map(|&n| n as u32).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("(no clicks)");
        }
        for (i, (d, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{d}:{n}")?;
        }
        Ok(())
    }
}

/// Probability of one click pattern plus the conditional state it heralds on
/// the unmeasured paths. The conditional is an ensemble: with imperfect
/// detectors (or partially distinguishable photons) several orthogonal
/// components can feed the same pattern.
#[derive(Debug, Clone)]
pub struct PatternOutcome<R: Real> {
    pub probability: R,
    pub conditional: MixedEnsemble<R>,
}

/// Exact distribution over detector click patterns.
#[derive(Debug, Clone, Default)]
pub struct OutcomeDistribution<R: Real> {
    entries: BTreeMap<ClickPattern, PatternOutcome<R>>,
}

impl<R: Real> OutcomeDistribution<R> {
    pub fn entries(&self) -> impl Iterator<Item = (&ClickPattern, &PatternOutcome<R>)> {
        self.entries.iter()
    }

    pub fn probability(&self, pattern: &ClickPattern) -> R {
        self.entries
            .get(pattern)
            .map(|o| o.probability)
            .unwrap_or_else(R::zero)
    }

    pub fn outcome(&self, pattern: &ClickPattern) -> Option<&PatternOutcome<R>> {
        self.entries.get(pattern)
    }

    pub fn total_probability(&self) -> R {
        self.entries.values().map(|o| o.probability).sum()
    }
}

impl<R: Real> Network<R> {
    pub fn new() -> Self {
        Network {
            elements: Vec::new(),
            analyzers: BTreeMap::new(),
        }
    }

    pub fn push_pbs(
        &mut self,
        basis: PolarizationBasis<R>,
        in_a: Path,
        in_b: Path,
        out_t: Path,
        out_r: Path,
    ) -> Result<(), NetworkError> {
        let map = ModeLinearMap::pbs(&basis, in_a, in_b, out_t, out_r)?;
        self.elements.push(Element {
            spec: ElementSpec::Pbs {
                basis: basis.name.label().to_string(),
                in_a: in_a.label(),
                in_b: in_b.label(),
                out_t: out_t.label(),
                out_r: out_r.label(),
            },
            map,
            inputs: vec![in_a, in_b],
            outputs: vec![out_t, out_r],
        });
        Ok(())
    }

    pub fn push_waveplate(&mut self, kind: WavePlateKind, angle: R, path: Path) {
        let map = ModeLinearMap::waveplate(kind, angle, path);
        let angle_deg = angle.to_f64().unwrap().to_degrees();
        let spec = match kind {
            WavePlateKind::Half => ElementSpec::Hwp {
                angle_deg,
                path: path.label(),
            },
            WavePlateKind::Quarter => ElementSpec::Qwp {
                angle_deg,
                path: path.label(),
            },
        };
        self.elements.push(Element {
            spec,
            map,
            inputs: vec![path],
            outputs: vec![path],
        });
    }

    pub fn set_analyzer(
        &mut self,
        path: Path,
        basis: PolarizationBasis<R>,
        det_transmitted: &str,
        det_reflected: &str,
    ) {
        self.analyzers.insert(
            path,
            Analyzer {
                basis,
                det_transmitted: det_transmitted.to_string(),
                det_reflected: det_reflected.to_string(),
            },
        );
    }

    pub fn elements(&self) -> &[Element<R>] {
        &self.elements
    }

    pub(crate) fn retain_elements(&mut self, keep: impl Fn(&ElementSpec) -> bool) {
        self.elements.retain(|e| keep(&e.spec));
    }

    pub fn analyzers(&self) -> &BTreeMap<Path, Analyzer<R>> {
        &self.analyzers
    }

    pub fn analyzed_paths(&self) -> Vec<Path> {
        self.analyzers.keys().copied().collect()
    }

    pub fn detector_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in self.analyzers.values() {
            out.push(a.det_transmitted.clone());
            out.push(a.det_reflected.clone());
        }
        out
    }

    /// Every path an element or analyzer touches.
    pub fn path_universe(&self) -> BTreeSet<Path> {
        let mut set = BTreeSet::new();
        for e in &self.elements {
            set.extend(e.inputs.iter().copied());
            set.extend(e.outputs.iter().copied());
        }
        set.extend(self.analyzers.keys().copied());
        set
    }

    /// Applies all elements in order. The state must stay inside the
    /// network's path universe; a network without elements is the identity.
    pub fn propagate_state(&self, state: &StateVector<R>) -> Result<StateVector<R>, NetworkError> {
        if self.elements.is_empty() {
            return Ok(state.clone());
        }
        let universe = self.path_universe();
        for p in state.occupied_paths() {
            if !universe.contains(&p) {
                return Err(NetworkError::ModeMismatch(p));
            }
        }
        let mut s = state.clone();
        for e in &self.elements {
            s = e.map.apply(&s);
        }
        Ok(s)
    }

    /// Propagates each branch of a mixture; weights are untouched.
    pub fn propagate(&self, input: &MixedEnsemble<R>) -> Result<MixedEnsemble<R>, NetworkError> {
        let mut out = Vec::with_capacity(input.branches().len());
        for (w, s) in input.branches() {
            out.push((*w, self.propagate_state(s)?));
        }
        Ok(MixedEnsemble::from_branches(out))
    }

    /// Applies only the elements reachable from photons injected on
    /// `start_paths`, in order. Elements whose inputs are not live are
    /// skipped (their reverse completion must never see amplitude).
    pub fn propagate_from(&self, state: &StateVector<R>, start_paths: &[Path]) -> StateVector<R> {
        let mut live: BTreeSet<Path> = start_paths.iter().copied().collect();
        let mut s = state.clone();
        for e in &self.elements {
            if e.inputs.iter().any(|p| live.contains(p)) {
                s = e.map.apply(&s);
                for p in &e.inputs {
                    live.remove(p);
                }
                live.extend(e.outputs.iter().copied());
            }
        }
        s
    }

    /// Rotates every analyzed path into its analysis basis (transmitted
    /// outcome on the H slot, reflected on the V slot).
    pub fn apply_analyzer_rotations(&self, state: &StateVector<R>) -> StateVector<R> {
        let mut s = state.clone();
        for (&path, analyzer) in &self.analyzers {
            s = ModeLinearMap::basis_to_hv(path, &analyzer.basis).apply(&s);
        }
        s
    }

    /// Serializable description (element list plus analyzers).
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            elements: self.elements.iter().map(|e| e.spec.clone()).collect(),
            analyzers: self
                .analyzers
                .iter()
                .map(|(p, a)| AnalyzerSpec {
                    path: p.label(),
                    basis: a.basis.name.label().to_string(),
                    det_transmitted: a.det_transmitted.clone(),
                    det_reflected: a.det_reflected.clone(),
                })
                .collect(),
        }
    }

    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, NetworkError> {
        let mut net = Network::new();
        let parse_path = |s: &str| Path::parse(s).map_err(|e| NetworkError::Parse(e.to_string()));
        let parse_basis = |name: &str| {
            PolarizationBasis::from_name(name)
                .ok_or_else(|| NetworkError::Parse(format!("unknown basis {name:?}")))
        };
        for e in &spec.elements {
            match e {
                ElementSpec::Pbs {
                    basis,
                    in_a,
                    in_b,
                    out_t,
                    out_r,
                } => net.push_pbs(
                    parse_basis(basis)?,
                    parse_path(in_a)?,
                    parse_path(in_b)?,
                    parse_path(out_t)?,
                    parse_path(out_r)?,
                )?,
                ElementSpec::Hwp { angle_deg, path } => net.push_waveplate(
                    WavePlateKind::Half,
                    R::of(angle_deg.to_radians()),
                    parse_path(path)?,
                ),
                ElementSpec::Qwp { angle_deg, path } => net.push_waveplate(
                    WavePlateKind::Quarter,
                    R::of(angle_deg.to_radians()),
                    parse_path(path)?,
                ),
            }
        }
        for a in &spec.analyzers {
            net.set_analyzer(
                parse_path(&a.path)?,
                parse_basis(&a.basis)?,
                &a.det_transmitted,
                &a.det_reflected,
            );
        }
        Ok(net)
    }
}

/// JSON-facing network description; round-trip stable.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub elements: Vec<ElementSpec>,
    pub analyzers: Vec<AnalyzerSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSpec {
    pub path: String,
    pub basis: String,
    pub det_transmitted: String,
    pub det_reflected: String,
}

/// Names of the four heralding detectors.
pub mod herald_detectors {
    pub const H1: &str = "H1";
    pub const V1: &str = "V1";
    pub const H2: &str = "H2";
    pub const V2: &str = "V2";
}

/// Names of the output-qubit detectors used by tomography runs.
pub mod output_detectors {
    pub const CT: &str = "CT";
    pub const CR: &str = "CR";
    pub const TT: &str = "TT";
    pub const TR: &str = "TR";
}

/// The heralded-CNOT gate preset.
///
/// Control and first ancilla meet at an H/V splitter whose transmitted
/// control component leaves on path 2; second ancilla and target meet at a
/// D/A splitter whose transmitted ancilla component leaves on path 4. A
/// half-wave plate at zero degrees sits on path 2, then paths 2 and 3
/// interfere on a circular-basis splitter whose ports carry H/V analyzers
/// (detectors H1/V1 and H2/V2). Paths 1 and 4 carry the output qubits.
pub fn heralded_cnot_network<R: Real>() -> Network<R> {
    let mut net = Network::new();
    net.push_pbs(
        PolarizationBasis::hv(),
        Path::C_IN,
        Path::A1,
        Path::P2,
        Path::P1,
    )
    .expect("preset wiring is valid");
    net.push_pbs(
        PolarizationBasis::da(),
        Path::A2,
        Path::T_IN,
        Path::P4,
        Path::P3,
    )
    .expect("preset wiring is valid");
    net.push_waveplate(WavePlateKind::Half, R::zero(), Path::P2);
    net.push_pbs(
        PolarizationBasis::rl(),
        Path::P2,
        Path::P3,
        Path::P2_OUT,
        Path::P3_OUT,
    )
    .expect("preset wiring is valid");
    net.set_analyzer(
        Path::P2_OUT,
        PolarizationBasis::hv(),
        herald_detectors::H1,
        herald_detectors::V1,
    );
    net.set_analyzer(
        Path::P3_OUT,
        PolarizationBasis::hv(),
        herald_detectors::H2,
        herald_detectors::V2,
    );
    net
}

/// The preset without the half-wave plate: the analyzer then heralds the
/// `Psi+`/`Phi-` pair instead of `Phi+`/`Psi-`.
pub fn heralded_cnot_network_without_hwp<R: Real>() -> Network<R> {
    let mut net = heralded_cnot_network::<R>();
    net.retain_elements(|spec| !matches!(spec, ElementSpec::Hwp { .. }));
    net
}

/// Adds polarization analyzers on the two output paths, as used for gate
/// tomography.
pub fn with_output_analyzers<R: Real>(
    mut net: Network<R>,
    basis_control: PolarizationBasis<R>,
    basis_target: PolarizationBasis<R>,
) -> Network<R> {
    net.set_analyzer(
        Path::C_OUT,
        basis_control,
        output_detectors::CT,
        output_detectors::CR,
    );
    net.set_analyzer(
        Path::T_OUT,
        basis_target,
        output_detectors::TT,
        output_detectors::TR,
    );
    net
}

/// Exact outcome distribution over click patterns.
///
/// The input mixture is propagated branch by branch, true photon counts are
/// read per detector mode (summing internal labels), and each true count
/// configuration is convolved with the detector response kernels.
/// Conditional states on unmeasured paths come back normalized alongside the
/// probability of their pattern.
pub fn outcome_distribution<R: Real>(
    net: &Network<R>,
    input: &MixedEnsemble<R>,
    det: &DetectorModel<R>,
) -> Result<OutcomeDistribution<R>, NetworkError> {
    let analyzed: BTreeSet<Path> = net.analyzers.keys().copied().collect();
    // Detector order is fixed by analyzer path order: (transmitted, reflected).
    let detectors: Vec<(String, Path, Pol)> = net
        .analyzers
        .iter()
        .flat_map(|(&p, a)| {
            [
                (a.det_transmitted.clone(), p, Pol::H),
                (a.det_reflected.clone(), p, Pol::V),
            ]
        })
        .collect();

    type Accumulated<R> = (R, Vec<(R, StateVector<R>)>);
    let mut accum: BTreeMap<ClickPattern, Accumulated<R>> = BTreeMap::new();

    for (weight, branch) in input.branches() {
        let propagated = net.propagate_state(branch)?;
        let rotated = net.apply_analyzer_rotations(&propagated);

        // Group terms by the detector-visible counts (internal labels summed).
        let mut groups: BTreeMap<Vec<u8>, StateVector<R>> = BTreeMap::new();
        for (f, a) in rotated.terms() {
            let key: Vec<u8> = detectors
                .iter()
                .map(|(_, p, pol)| {
                    f.occupation()
                        .iter()
                        .filter(|(m, _)| m.path == *p && m.pol == *pol)
                        .map(|(_, &n)| n)
                        .sum()
                })
                .collect();
            let slot = groups.entry(key).or_default();
            *slot = slot.plus(&StateVector::from_terms([(f.clone(), *a)]));
        }

        for (true_counts, component) in groups {
            let p_case = *weight * component.norm_sqr();
            if p_case <= R::zero() {
                continue;
            }
            // Conditional on the unmeasured paths: trace out the measured
            // modes in the Fock basis (each measured configuration is one
            // orthogonal branch).
            let mut cond_branches: Vec<(R, StateVector<R>)> = Vec::new();
            let mut by_measured: BTreeMap<FockState, StateVector<R>> = BTreeMap::new();
            for (f, a) in component.terms() {
                let (on, off) = f.split_paths(&analyzed);
                let slot = by_measured.entry(on).or_default();
                *slot = slot.plus(&StateVector::from_terms([(off, *a)]));
            }
            let total = component.norm_sqr();
            for (_, rest) in by_measured {
                let w = rest.norm_sqr() / total;
                if w > R::zero() {
                    cond_branches.push((w, rest.normalized()));
                }
            }

            // Convolve with the detector response kernels.
            let kernels: Vec<Vec<R>> = true_counts
                .iter()
                .map(|&n| det.response(n as u32).expect("photon count within cap"))
                .collect();
            let mut patterns: Vec<(Vec<u8>, R)> = vec![(Vec::new(), R::one())];
            for kernel in &kernels {
                let mut next = Vec::with_capacity(patterns.len() * kernel.len());
                for (prefix, p) in &patterns {
                    for (m, pm) in kernel.iter().enumerate() {
                        if *pm <= R::zero() {
                            continue;
                        }
                        let mut ext = prefix.clone();
                        ext.push(m as u8);
                        next.push((ext, *p * *pm));
                    }
                }
                patterns = next;
            }
            for (clicks, p_clicks) in patterns {
                let pattern = ClickPattern::new(
                    detectors
                        .iter()
                        .zip(clicks.iter())
                        .map(|((name, _, _), &m)| (name.clone(), m)),
                );
                let contribution = p_case * p_clicks;
                let entry = accum
                    .entry(pattern)
                    .or_insert_with(|| (R::zero(), Vec::new()));
                entry.0 = entry.0 + contribution;
                for (w, s) in &cond_branches {
                    entry.1.push((contribution * *w, s.clone()));
                }
            }
        }
    }

    let entries = accum
        .into_iter()
        .map(|(pattern, (probability, branches))| {
            let conditional = MixedEnsemble::from_branches(branches).normalized_weights();
            (
                pattern,
                PatternOutcome {
                    probability,
                    conditional,
                },
            )
        })
        .collect();
    Ok(OutcomeDistribution { entries })
}

/// The four unambiguous heralding coincidences: exactly one click on each
/// side of the analyzer splitter.
pub fn herald_patterns() -> [ClickPattern; 4] {
    use herald_detectors::*;
    [
        ClickPattern::of(&[(H1, 1), (H2, 1)]),
        ClickPattern::of(&[(V1, 1), (V2, 1)]),
        ClickPattern::of(&[(H1, 1), (V2, 1)]),
        ClickPattern::of(&[(V1, 1), (H2, 1)]),
    ]
}

/// The two patterns used as the gate herald in the experiment layout (the
/// half-wave plate maps the target Bell state onto the same-label pair).
pub fn experiment_herald_patterns() -> [ClickPattern; 2] {
    use herald_detectors::*;
    [
        ClickPattern::of(&[(H1, 1), (H2, 1)]),
        ClickPattern::of(&[(V1, 1), (V2, 1)]),
    ]
}

/// Ideal CNOT action on a control `(a, b)` and target `(g, d)` qubit pair,
/// written on the gate's output paths.
pub fn cnot_reference<R: Real>(
    alpha: Complex<R>,
    beta: Complex<R>,
    gamma: Complex<R>,
    delta: Complex<R>,
) -> StateVector<R> {
    let term = |pc: Pol, pt: Pol, amp: Complex<R>| {
        (
            FockState::from_counts([
                (Mode::shared(Path::C_OUT, pc), 1),
                (Mode::shared(Path::T_OUT, pt), 1),
            ]),
            amp,
        )
    };
    StateVector::from_terms([
        term(Pol::H, Pol::H, alpha * gamma),
        term(Pol::H, Pol::V, alpha * delta),
        term(Pol::V, Pol::V, beta * gamma),
        term(Pol::V, Pol::H, beta * delta),
    ])
}

/// The gate input as a product of four photons: control `(a, b)`, ancillas
/// `|+>` and `|H>`, target `(g, d)`.
pub fn gate_input_state<R: Real>(
    alpha: Complex<R>,
    beta: Complex<R>,
    gamma: Complex<R>,
    delta: Complex<R>,
) -> Result<StateVector<R>, crate::fock::FockError> {
    use crate::fock::{make_product_input, Jones, PhotonSpec};
    make_product_input(&[
        PhotonSpec::new(Path::C_IN, Jones::new(alpha, beta)),
        PhotonSpec::new(Path::A1, Jones::plus()),
        PhotonSpec::new(Path::A2, Jones::horizontal()),
        PhotonSpec::new(Path::T_IN, Jones::new(gamma, delta)),
    ])
}

/// Pauli correction attached to each Bell projection of the ancilla pair.
pub fn pauli_correction<R: Real>(kind: BellKind) -> Vec<ModeLinearMap<R>> {
    match kind {
        BellKind::PhiPlus => vec![],
        BellKind::PhiMinus => vec![ModeLinearMap::pauli_z(Path::C_OUT)],
        BellKind::PsiPlus => vec![ModeLinearMap::pauli_x(Path::T_OUT)],
        BellKind::PsiMinus => vec![
            ModeLinearMap::pauli_z(Path::C_OUT),
            ModeLinearMap::pauli_x(Path::T_OUT),
        ],
    }
}

/// Fidelities of the Pauli-corrected conditional states against the ideal
/// CNOT output, one per Bell projection of the ancilla pair.
///
/// The input product state is pushed through the two input splitters, the
/// one-photon-per-path component is kept, and each Bell state of paths 2 and
/// 3 is projected out.
pub fn feed_forward_fidelities<R: Real>(
    alpha: Complex<R>,
    beta: Complex<R>,
    gamma: Complex<R>,
    delta: Complex<R>,
) -> Result<[R; 4], NetworkError> {
    let input = gate_input_state(alpha, beta, gamma, delta)
        .map_err(|e| NetworkError::Parse(e.to_string()))?;
    let net = heralded_cnot_network::<R>();
    // Only the two input splitters: elements before the analyzer section.
    let mut s = input;
    for e in &net.elements[..2] {
        s = e.map.apply(&s);
    }
    let one_each: BTreeMap<Path, u32> = [Path::P1, Path::P2, Path::P3, Path::P4]
        .map(|p| (p, 1))
        .into();
    let projected = s.project_photon_counts(&one_each);
    let reference = cnot_reference(alpha, beta, gamma, delta);

    let mut out = [R::zero(); 4];
    for (i, kind) in BellKind::ALL.iter().enumerate() {
        let bell = bell_state::<R>(Path::P2, Path::P3, *kind);
        let mut conditional = projected.partial_project(&bell, &[Path::P2, Path::P3]);
        for correction in pauli_correction::<R>(*kind) {
            conditional = correction.apply(&conditional);
        }
        out[i] = crate::fock::fidelity(&conditional, &reference);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{DetectorKind, DetectorModel};
    use crate::fock::inner_product;
    use crate::fock::{approx_eq_up_to_phase, make_product_input, Jones, PhotonSpec};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    type C = Complex<f64>;
    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn random_qubit(rng: &mut StdRng) -> (C, C) {
        let a = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let b = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        (a / n, b / n)
    }

    /// Hand-transcribed expansion of the four-photon state after the two
    /// input splitters, built directly from creation operators.
    fn expected_after_input_splitters(a: C, b: C, g: C, d: C) -> StateVector<f64> {
        let vac = StateVector::<f64>::vacuum();
        let h = |p| Mode::shared(p, Pol::H);
        let v = |p| Mode::shared(p, Pol::V);
        // (a H2 + b V1)(H1 + V2)/sqrt(2)
        let first = vac
            .apply_creation(&[(h(Path::P2), a), (v(Path::P1), b)])
            .unwrap()
            .apply_creation(&[(h(Path::P1), c(S, 0.0)), (v(Path::P2), c(S, 0.0))])
            .unwrap();
        // (+4 + -3)/sqrt(2) then (g+d)/sqrt(2)·+3 + (g-d)/sqrt(2)·-4
        let plus = |p| [(h(p), c(S, 0.0)), (v(p), c(S, 0.0))];
        let minus = |p| [(h(p), c(S, 0.0)), (v(p), c(-S, 0.0))];
        let after_a2 = first
            .apply_creation(&plus(Path::P4))
            .unwrap()
            .scaled(c(S, 0.0))
            .plus(
                &first
                    .apply_creation(&minus(Path::P3))
                    .unwrap()
                    .scaled(c(S, 0.0)),
            );
        after_a2
            .apply_creation(&plus(Path::P3))
            .unwrap()
            .scaled((g + d) * c(S, 0.0))
            .plus(
                &after_a2
                    .apply_creation(&minus(Path::P4))
                    .unwrap()
                    .scaled((g - d) * c(S, 0.0)),
            )
    }

    #[test]
    fn preset_propagation_matches_hand_expansion() {
        let (a, b) = {
            let a = c(0.6, 0.1);
            let b = c(0.79, -0.1);
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            (a / n, b / n)
        };
        let (g, d) = {
            let g = c(0.3, 0.2);
            let d = c(0.9, 0.24);
            let n = (g.norm_sqr() + d.norm_sqr()).sqrt();
            (g / n, d / n)
        };

        let input = gate_input_state(a, b, g, d).unwrap();
        let net = heralded_cnot_network::<f64>();
        let mut state = input;
        for e in &net.elements()[..2] {
            state = e.map.apply(&state);
        }
        let expected = expected_after_input_splitters(a, b, g, d);
        // The sixteen product terms of the expansion span 32 H/V-basis
        // occupation vectors; the two routes must agree on every one.
        assert_eq!(state.len(), expected.len());
        assert_eq!(state.len(), 32);
        let diff = state.plus(&expected.scaled_real(-1.0));
        assert!(diff.norm() < 1e-12, "term-for-term agreement");
    }

    #[test]
    fn one_photon_per_path_case_has_probability_one_quarter() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let (a, b) = random_qubit(&mut rng);
            let (g, d) = random_qubit(&mut rng);
            let input = gate_input_state(a, b, g, d).unwrap();
            let net = heralded_cnot_network::<f64>();
            let mut state = input;
            for e in &net.elements()[..2] {
                state = e.map.apply(&state);
            }
            let counts: BTreeMap<Path, u32> = [Path::P1, Path::P2, Path::P3, Path::P4]
                .map(|p| (p, 1))
                .into();
            let projected = state.project_photon_counts(&counts);
            assert!((projected.norm_sqr() - 0.25).abs() < 1e-12);

            let nine_way = state.split_by_path_counts(&[Path::P1, Path::P2, Path::P3, Path::P4]);
            let total: f64 = nine_way.values().map(|s| s.norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-12, "cases form a partition");
            assert_eq!(nine_way.len(), 9);
        }
    }

    #[test]
    fn projected_gate_case_matches_the_bell_pair_product() {
        // The one-photon-per-path component is (a HH + b VV)_{12} tensored
        // with the target-controlled pair structure on paths 3 and 4, at
        // half amplitude.
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..5 {
            let (a, b) = random_qubit(&mut rng);
            let (g, d) = random_qubit(&mut rng);
            let input = gate_input_state(a, b, g, d).unwrap();
            let net = heralded_cnot_network::<f64>();
            let mut state = input;
            for e in &net.elements()[..2] {
                state = e.map.apply(&state);
            }
            let counts: BTreeMap<Path, u32> = [Path::P1, Path::P2, Path::P3, Path::P4]
                .map(|p| (p, 1))
                .into();
            let projected = state.project_photon_counts(&counts);

            let vac = StateVector::<f64>::vacuum();
            let h = |p| Mode::shared(p, Pol::H);
            let v = |p| Mode::shared(p, Pol::V);
            let control_pair = vac
                .create(h(Path::P1))
                .unwrap()
                .create(h(Path::P2))
                .unwrap()
                .scaled(a)
                .plus(
                    &vac.create(v(Path::P1))
                        .unwrap()
                        .create(v(Path::P2))
                        .unwrap()
                        .scaled(b),
                );
            let plus = |p| [(h(p), c(S, 0.0)), (v(p), c(S, 0.0))];
            let minus = |p| [(h(p), c(S, 0.0)), (v(p), c(-S, 0.0))];
            let target_pair = vac
                .apply_creation(&plus(Path::P3))
                .unwrap()
                .apply_creation(&plus(Path::P4))
                .unwrap()
                .scaled((g + d) * c(S, 0.0))
                .plus(
                    &vac.apply_creation(&minus(Path::P3))
                        .unwrap()
                        .apply_creation(&minus(Path::P4))
                        .unwrap()
                        .scaled((g - d) * c(S, 0.0)),
                );
            let expected = control_pair.tensor(&target_pair).unwrap().scaled_real(0.5);
            let diff = projected.plus(&expected.scaled_real(-1.0));
            assert!(diff.norm() < 1e-12);
        }
    }

    #[test]
    fn swapping_identity_has_uniform_half_coefficients() {
        let joint = bell_state::<f64>(Path::P1, Path::P2, BellKind::PhiPlus)
            .tensor(&bell_state(Path::P3, Path::P4, BellKind::PhiPlus))
            .unwrap();
        for outer in BellKind::ALL {
            for inner in BellKind::ALL {
                let bra = bell_state::<f64>(Path::P1, Path::P4, outer)
                    .tensor(&bell_state(Path::P2, Path::P3, inner))
                    .unwrap();
                let amp = inner_product(&bra, &joint);
                let expected = if outer == inner { 0.5 } else { 0.0 };
                assert!(
                    (amp.re - expected).abs() < 1e-12 && amp.im.abs() < 1e-12,
                    "pairing {outer}/{inner} gave {amp}"
                );
            }
        }
    }

    #[test]
    fn feed_forward_recovers_cnot_for_every_bell_projection() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..120 {
            let (a, b) = random_qubit(&mut rng);
            let (g, d) = random_qubit(&mut rng);
            let fids = feed_forward_fidelities(a, b, g, d).unwrap();
            for f in fids {
                assert!(f >= 1.0 - 1e-10, "fidelity {f}");
            }
        }
    }

    #[test]
    fn truth_table_holds_on_herald() {
        // HH->HH, HV->HV, VH->VV, VV->VH under the same-label herald.
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let cases = [
            ((one, zero, one, zero), (Pol::H, Pol::H)),
            ((one, zero, zero, one), (Pol::H, Pol::V)),
            ((zero, one, one, zero), (Pol::V, Pol::V)),
            ((zero, one, zero, one), (Pol::V, Pol::H)),
        ];
        let net = heralded_cnot_network::<f64>();
        let det = DetectorModel::new(DetectorKind::IdealPnrd, 1.0);
        for ((a, b, g, d), (pc, pt)) in cases {
            let input = MixedEnsemble::pure(gate_input_state(a, b, g, d).unwrap());
            let dist = outcome_distribution(&net, &input, &det).unwrap();
            let expected = StateVector::from_terms([(
                FockState::from_counts([
                    (Mode::shared(Path::C_OUT, pc), 1),
                    (Mode::shared(Path::T_OUT, pt), 1),
                ]),
                one,
            )]);
            for pattern in experiment_herald_patterns() {
                let outcome = dist.outcome(&pattern).expect("herald pattern present");
                assert!((outcome.probability - 1.0 / 32.0).abs() < 1e-12);
                assert_eq!(outcome.conditional.branches().len(), 1);
                let (_, state) = &outcome.conditional.branches()[0];
                assert!(approx_eq_up_to_phase(state, &expected, 1e-10));
            }
        }
    }

    #[test]
    fn herald_probability_is_one_eighth() {
        let mut rng = StdRng::seed_from_u64(5);
        let (a, b) = random_qubit(&mut rng);
        let (g, d) = random_qubit(&mut rng);
        let net = heralded_cnot_network::<f64>();
        let det = DetectorModel::new(DetectorKind::IdealPnrd, 1.0);
        let input = MixedEnsemble::pure(gate_input_state(a, b, g, d).unwrap());
        let dist = outcome_distribution(&net, &input, &det).unwrap();
        let total: f64 = herald_patterns().iter().map(|p| dist.probability(p)).sum();
        assert!((total - 0.125).abs() < 1e-12);
        // Each Bell branch contributes 1/16, split evenly over its two
        // click patterns.
        for p in herald_patterns() {
            assert!((dist.probability(&p) - 1.0 / 32.0).abs() < 1e-12);
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_ensemble_weight() {
        let mut rng = StdRng::seed_from_u64(9);
        let (a, b) = random_qubit(&mut rng);
        let (g, d) = random_qubit(&mut rng);
        let net = heralded_cnot_network::<f64>();
        let det = DetectorModel::new(DetectorKind::PseudoPnrd { elements: 4 }, 0.8);
        // Two-branch mixture with total weight 0.9.
        let input = MixedEnsemble::from_branches(vec![
            (0.6, gate_input_state(a, b, g, d).unwrap()),
            (0.3, gate_input_state(c(1.0, 0.0), c(0.0, 0.0), g, d).unwrap()),
        ]);
        let dist = outcome_distribution(&net, &input, &det).unwrap();
        assert!((dist.total_probability() - 0.9).abs() < 1e-10);
    }

    #[test]
    fn joint_h_v_pair_never_triggers_cross_coincidence() {
        // Two photons entering the analyzer splitter on one path bunch and
        // never produce a coincidence across its two ports.
        let pair = StateVector::<f64>::vacuum()
            .create(Mode::shared(Path::P2, Pol::H))
            .unwrap()
            .create(Mode::shared(Path::P2, Pol::V))
            .unwrap();
        let net = heralded_cnot_network::<f64>();
        let out = net.propagate_from(&pair, &[Path::P2]);
        let split = out.split_by_path_counts(&[Path::P2_OUT, Path::P3_OUT]);
        let cross: f64 = split
            .iter()
            .filter(|(k, _)| k[0] >= 1 && k[1] >= 1)
            .map(|(_, s)| s.norm_sqr())
            .sum();
        assert!(cross < 1e-14);
    }

    #[test]
    fn propagate_rejects_unknown_paths() {
        let photon =
            make_product_input(&[PhotonSpec::new(Path(33), Jones::<f64>::horizontal())]).unwrap();
        let net = heralded_cnot_network::<f64>();
        let err = net.propagate_state(&photon).unwrap_err();
        assert!(matches!(err, NetworkError::ModeMismatch(_)));
        assert!(err.to_string().contains("mode out of map domain"));
    }

    #[test]
    fn single_h_photon_routes_to_path_two() {
        let photon =
            make_product_input(&[PhotonSpec::new(Path::C_IN, Jones::<f64>::horizontal())])
                .unwrap();
        let net = heralded_cnot_network::<f64>();
        let mut s = photon;
        for e in &net.elements()[..1] {
            s = e.map.apply(&s);
        }
        let expected = StateVector::from_terms([(
            FockState::from_counts([(Mode::shared(Path::P2, Pol::H), 1)]),
            c(1.0, 0.0),
        )]);
        assert!(approx_eq_up_to_phase(&s, &expected, 1e-12));
    }

    #[test]
    fn vacuum_propagates_to_vacuum() {
        let net = heralded_cnot_network::<f64>();
        let out = net.propagate_state(&StateVector::vacuum()).unwrap();
        assert!(approx_eq_up_to_phase(&out, &StateVector::vacuum(), 1e-15));
    }

    #[test]
    fn element_free_network_is_the_identity() {
        let mut net = heralded_cnot_network::<f64>();
        net.retain_elements(|_| false);
        let input = gate_input_state(
            c(0.6, 0.0),
            c(0.0, 0.8),
            c(1.0, 0.0),
            c(0.0, 0.0),
        )
        .unwrap();
        let out = net.propagate_state(&input).unwrap();
        let diff = out.plus(&input.scaled_real(-1.0));
        assert!(diff.norm() < 1e-15, "inputs pass through unchanged");
    }

    #[test]
    fn dead_sources_put_all_probability_on_no_clicks() {
        let specs = [
            (Path::C_IN, Jones::<f64>::plus()),
            (Path::A1, Jones::plus()),
            (Path::A2, Jones::horizontal()),
            (Path::T_IN, Jones::horizontal()),
        ];
        let ensemble = crate::devices::source_ensemble(
            &specs,
            &crate::devices::SourceModel::new(0.0, 1.0).unwrap(),
        );
        let net = heralded_cnot_network::<f64>();
        let det = DetectorModel::new(DetectorKind::PseudoPnrd { elements: 4 }, 0.8);
        let dist = outcome_distribution(&net, &ensemble, &det).unwrap();
        let zero = ClickPattern::default();
        assert!((dist.probability(&zero) - 1.0).abs() < 1e-12);
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_scalar_reproduces_the_success_probability() {
        // The core is generic over the scalar; f32 carries the same physics
        // at its looser tolerance.
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let net = heralded_cnot_network::<f32>();
        let input = MixedEnsemble::pure(
            gate_input_state(
                Complex::new(s, 0.0f32),
                Complex::new(s, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 0.0),
            )
            .unwrap(),
        );
        let det = DetectorModel::<f32>::new(DetectorKind::IdealPnrd, 1.0);
        let dist = outcome_distribution(&net, &input, &det).unwrap();
        let total: f32 = herald_patterns().iter().map(|p| dist.probability(p)).sum();
        assert!((total - 0.125).abs() < 1e-5);
    }

    #[test]
    fn network_description_round_trips() {
        let net = heralded_cnot_network::<f64>();
        let spec = net.to_spec();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let parsed: NetworkSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, parsed);
        let rebuilt = Network::<f64>::from_spec(&parsed).unwrap();
        assert_eq!(rebuilt.elements().len(), net.elements().len());
        for (a, b) in rebuilt.elements().iter().zip(net.elements()) {
            assert_eq!(a.spec, b.spec);
            assert!(a.map.matrix_distance(&b.map) < 1e-12);
        }
        assert_eq!(rebuilt.to_spec(), spec);
    }
}
