//! The reproduce-paper report: every shipped reference value recomputed
//! from first principles and compared at its documented tolerance.

use std::path::Path as FsPath;

use anyhow::{Context, Result};
use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use heraldix_core::demux::DemuxConfig;
use heraldix_core::devices::{pnrd_response, DetectorKind, DetectorModel, SourceModel};
use heraldix_core::fidelity::{
    average_gate_fidelity, hofmann_f1, hofmann_f2, hofmann_f3, process_bounds, psi_minus_fidelity,
    simulate_tomography, ProbabilityTable, Protocol,
};
use heraldix_core::fock::{bell_state, inner_product, BellKind, Mode, Path, Pol, StateVector};
use heraldix_core::herald::{
    eta_h_closed_form, herald_budget_bruteforce, p2_terms_closed_form, ClosedFormKind,
};
use heraldix_core::network::{
    feed_forward_fidelities, gate_input_state, herald_patterns, heralded_cnot_network,
    outcome_distribution,
};
use heraldix_core::optics::{ModeLinearMap, PolarizationBasis, WavePlateKind};
use heraldix_core::scalar::format_significant;
use heraldix_core::{Jones, MixedEnsemble};

type C = Complex<f64>;
const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One checked reference value.
#[derive(Debug, Clone, Serialize)]
pub struct ReportItem {
    pub name: &'static str,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub abs_error: f64,
    pub pass: bool,
}

impl ReportItem {
    fn check(name: &'static str, value: f64, reference: f64, tolerance: f64) -> Self {
        let abs_error = (value - reference).abs();
        ReportItem {
            name,
            value,
            reference,
            tolerance,
            abs_error,
            pass: abs_error <= tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<28} value={} reference={} tol={:.1e} err={:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            format_significant(self.value, 12),
            format_significant(self.reference, 12),
            self.tolerance,
            self.abs_error,
        )
    }
}

fn random_qubit(rng: &mut StdRng) -> (C, C) {
    let a = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let b = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    (a / n, b / n)
}

fn load_table(dir: &FsPath, name: &str) -> Result<ProbabilityTable<f64>> {
    let path = dir.join(name);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("missing golden file {}", path.display()))?;
    let table = ProbabilityTable::from_csv(&text)
        .with_context(|| format!("golden file {} does not parse", path.display()))?;
    table.validate_columns().map_err(|e| {
        anyhow::anyhow!(
            "golden file {} is corrupted: {e}\n{}",
            path.display(),
            table
        )
    })?;
    Ok(table)
}

/// Builds the full report. `tolerance_override` replaces every item's
/// documented tolerance when given.
pub fn build_report(golden_dir: &FsPath, tolerance_override: Option<f64>) -> Result<Vec<ReportItem>> {
    let mut items = Vec::new();
    let tol = |documented: f64| tolerance_override.unwrap_or(documented);

    let net = heralded_cnot_network::<f64>();
    let ideal_source = SourceModel::ideal();
    let ideal_det = DetectorModel::<f64>::ideal();

    // Heralded coincidence probability for an arbitrary input.
    {
        let input = MixedEnsemble::pure(
            gate_input_state(C::new(S, 0.0), C::new(S, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0))
                .unwrap(),
        );
        let dist = outcome_distribution(&net, &input, &ideal_det)?;
        let total: f64 = herald_patterns().iter().map(|p| dist.probability(p)).sum();
        items.push(ReportItem::check("success_probability", total, 0.125, tol(1e-12)));
    }

    // Ideal truth table.
    {
        let table = simulate_tomography(&net, &ideal_source, &ideal_det, Protocol::F1)?;
        let expected_row = [0usize, 1, 3, 2];
        let mut worst = 0.0f64;
        for (col, &row) in expected_row.iter().enumerate() {
            for r in 0..4 {
                let want = if r == row { 1.0 } else { 0.0 };
                worst = worst.max((table.cells[r][col] - want).abs());
            }
        }
        items.push(ReportItem::check("truth_table_max_dev", worst, 0.0, tol(1e-10)));
    }

    // Feed-forward identity over randomized inputs.
    {
        let mut rng = StdRng::seed_from_u64(31);
        let mut min_fid = 1.0f64;
        for _ in 0..100 {
            let (a, b) = random_qubit(&mut rng);
            let (g, d) = random_qubit(&mut rng);
            for f in feed_forward_fidelities(a, b, g, d)? {
                min_fid = min_fid.min(f);
            }
        }
        items.push(ReportItem::check(
            "feed_forward_infidelity",
            1.0 - min_fid,
            0.0,
            tol(1e-10),
        ));
    }

    // Bunching exclusion at the analyzer splitter.
    {
        let pair = StateVector::<f64>::vacuum()
            .create(Mode::shared(Path::P2, Pol::H))
            .unwrap()
            .create(Mode::shared(Path::P2, Pol::V))
            .unwrap();
        let out = net.propagate_from(&pair, &[Path::P2]);
        let cross: f64 = out
            .split_by_path_counts(&[Path::P2_OUT, Path::P3_OUT])
            .iter()
            .filter(|(k, _)| k[0] >= 1 && k[1] >= 1)
            .map(|(_, s)| s.norm_sqr())
            .sum();
        items.push(ReportItem::check("bunching_cross_probability", cross, 0.0, tol(1e-14)));
    }

    // Multiplexed detector pair response.
    {
        let det = DetectorModel::<f64>::pseudo_four(0.8);
        let r = det.response(2).unwrap();
        items.push(ReportItem::check("pnrd_p2_given_2", r[2], 0.48, tol(1e-15)));
        items.push(ReportItem::check("pnrd_p1_given_2", r[1], 0.44, tol(1e-15)));
        items.push(ReportItem::check("pnrd_p0_given_2", r[0], 0.08, tol(1e-15)));
    }

    // Heralding-efficiency closed forms at the working point.
    items.push(ReportItem::check(
        "eta_h_ideal",
        eta_h_closed_form(ClosedFormKind::Ide, 0.175),
        0.00915,
        tol(5e-5),
    ));
    items.push(ReportItem::check(
        "eta_h_pseudo",
        eta_h_closed_form(ClosedFormKind::Pse, 0.175),
        0.00875,
        tol(5e-5),
    ));
    items.push(ReportItem::check(
        "eta_h_standard",
        eta_h_closed_form(ClosedFormKind::Sta, 0.175),
        0.00857,
        tol(5e-5),
    ));

    // Exhaustive-simulation oracle against the general closed forms.
    {
        let mut rng = StdRng::seed_from_u64(606);
        let detectors = [
            DetectorModel::ideal(),
            DetectorModel::pseudo_four(0.8),
            DetectorModel::standard(0.8),
        ];
        let mut worst = 0.0f64;
        for trial in 0..20 {
            let (a, b) = random_qubit(&mut rng);
            let (g, d) = random_qubit(&mut rng);
            let det = &detectors[trial % detectors.len()];
            for k in 1..=10 {
                let eta_s = k as f64 / 10.0;
                let brute = herald_budget_bruteforce(a, b, g, d, eta_s, det)?;
                let closed = p2_terms_closed_form(a, b, g, d, eta_s, det)?;
                worst = worst.max(brute.max_abs_difference(&closed));
            }
        }
        items.push(ReportItem::check("herald_oracle_max_gap", worst, 0.0, tol(1e-10)));
    }

    // Reference tomography tables.
    {
        let f1 = hofmann_f1(&load_table(golden_dir, "gate_tomography_hv.csv")?)?;
        let f2 = hofmann_f2(&load_table(golden_dir, "gate_tomography_da.csv")?)?;
        let f3 = hofmann_f3(&load_table(golden_dir, "gate_tomography_rl.csv")?)?;
        items.push(ReportItem::check("f1_computational", f1, 0.8775, tol(5e-4)));
        items.push(ReportItem::check("f2_superposition", f2, 0.8860, tol(5e-4)));
        items.push(ReportItem::check("f3_mixed_basis", f3, 0.8677, tol(5e-4)));
        // The published rounding of the third fidelity is 0.870; the tables
        // themselves give 0.8677. Documented discrepancy, wide tolerance.
        items.push(ReportItem::check("f3_vs_published", f3, 0.870, tol(2.5e-3)));
        let bounds = process_bounds(f1, f2);
        items.push(ReportItem::check("process_lower_bound", bounds.lower, 0.7635, tol(5e-4)));
        items.push(ReportItem::check("process_upper_bound", bounds.upper, 0.8775, tol(5e-4)));
        items.push(ReportItem::check(
            "average_gate_fidelity",
            average_gate_fidelity(f1, f2, f3),
            0.8771,
            tol(5e-4),
        ));
    }

    // Event-ready entangled state.
    items.push(ReportItem::check(
        "bell_state_fidelity",
        psi_minus_fidelity(0.8729, -0.8039, -0.7875)?,
        0.83425,
        tol(1e-4),
    ));

    // Pairwise re-pairing of two maximally entangled pairs.
    {
        let joint = bell_state::<f64>(Path::P1, Path::P2, BellKind::PhiPlus)
            .tensor(&bell_state(Path::P3, Path::P4, BellKind::PhiPlus))
            .unwrap();
        let mut worst = 0.0f64;
        for outer in BellKind::ALL {
            for inner in BellKind::ALL {
                let bra = bell_state::<f64>(Path::P1, Path::P4, outer)
                    .tensor(&bell_state(Path::P2, Path::P3, inner))
                    .unwrap();
                let amp = inner_product(&bra, &joint);
                let expected = if outer == inner { 0.5 } else { 0.0 };
                worst = worst.max((amp.re - expected).abs()).max(amp.im.abs());
            }
        }
        items.push(ReportItem::check("swapping_max_dev", worst, 0.0, tol(1e-12)));
    }

    // Demultiplexer schedule and budget.
    {
        let cfg = DemuxConfig::<f64>::experiment(0.263, 0.83, 0.80)
            .map_err(|e| anyhow::anyhow!("demux: {e}"))?;
        let counts = cfg.per_channel_counts();
        let balanced = counts.iter().all(|&c| c == 25);
        items.push(ReportItem::check(
            "demux_pulses_per_channel",
            counts[0] as f64,
            25.0,
            tol(0.0),
        ));
        items.push(ReportItem::check(
            "demux_balanced",
            balanced as u8 as f64,
            1.0,
            tol(0.0),
        ));
        items.push(ReportItem::check(
            "demux_eta_s",
            cfg.efficiency_budget(),
            0.17463,
            tol(1e-5),
        ));
    }

    // Property suites.
    {
        let mut worst = 0.0f64;
        for kind in [WavePlateKind::Half, WavePlateKind::Quarter] {
            for step in 0..16 {
                let angle = step as f64 * std::f64::consts::PI / 16.0;
                worst = worst.max(ModeLinearMap::waveplate(kind, angle, Path::P1).unitarity_defect());
            }
        }
        for basis in [
            PolarizationBasis::<f64>::hv(),
            PolarizationBasis::da(),
            PolarizationBasis::rl(),
        ] {
            let map = ModeLinearMap::pbs(&basis, Path::C_IN, Path::A1, Path::P2, Path::P1)
                .map_err(|e| anyhow::anyhow!("pbs: {e}"))?;
            worst = worst.max(map.unitarity_defect());
        }
        items.push(ReportItem::check("element_unitarity_max", worst, 0.0, tol(1e-12)));
    }
    {
        let specs = [
            (Path::C_IN, Jones::<f64>::plus()),
            (Path::A1, Jones::plus()),
            (Path::A2, Jones::horizontal()),
            (Path::T_IN, Jones::horizontal()),
        ];
        let ensemble = heraldix_core::devices::source_ensemble(
            &specs,
            &SourceModel::new(0.6, 0.9).map_err(|e| anyhow::anyhow!("source: {e}"))?,
        );
        let dist = outcome_distribution(&net, &ensemble, &DetectorModel::pseudo_four(0.8))?;
        items.push(ReportItem::check(
            "probability_conservation",
            (dist.total_probability() - ensemble.total_weight()).abs(),
            0.0,
            tol(1e-10),
        ));
    }
    {
        let mut worst = 0.0f64;
        for det in [
            DetectorModel::<f64>::ideal(),
            DetectorModel::standard(0.8),
            DetectorModel::new(DetectorKind::Standard { physical: true }, 0.45),
            DetectorModel::pseudo_four(0.8),
        ] {
            for n in 0..=8 {
                let sum: f64 = pnrd_response(n, &det).unwrap().iter().sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
        items.push(ReportItem::check("kernel_stochasticity_max", worst, 0.0, tol(1e-12)));
    }
    {
        let mut monotone = true;
        for kind in [ClosedFormKind::Ide, ClosedFormKind::Pse, ClosedFormKind::Sta] {
            let mut last = 0.0;
            for k in 1..=10 {
                let v = eta_h_closed_form(kind, k as f64 / 10.0);
                monotone &= v > last;
                last = v;
            }
        }
        items.push(ReportItem::check(
            "eta_h_monotone_in_eta_s",
            monotone as u8 as f64,
            1.0,
            tol(0.0),
        ));
    }

    Ok(items)
}

pub fn report_to_csv(items: &[ReportItem]) -> String {
    let mut out = String::from("name,value,reference,tolerance,abs_error,status\n");
    for item in items {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            item.name,
            format_significant(item.value, 12),
            format_significant(item.reference, 12),
            format_significant(item.tolerance, 12),
            format_significant(item.abs_error, 12),
            if item.pass { "pass" } else { "fail" },
        ));
    }
    out
}
