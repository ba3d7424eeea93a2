mod common;

use photonic_core::circuit::{simulate_branches, CircuitGraph, ElementKind};
use photonic_core::gates::{
    bell_resource, build_bell_cnot, build_classical_cnot_ancilla, build_classical_cnot_qnd, build_entangler,
    build_fiber_cnot, disentangled_resource, phi_plus, psi_plus, EntanglerInput,
};
use photonic_core::optics::PbsBasis;
use photonic_core::qnd::KerrProbe;
use photonic_core::{PhotonicState, QubitAmplitudes, C64};

fn probe() -> KerrProbe {
    KerrProbe::new("probe", C64::new(10.0, 0.0), 0.5).unwrap()
}

fn inputs() -> Vec<(&'static str, QubitAmplitudes, QubitAmplitudes)> {
    let (h, v, p) = (QubitAmplitudes::h(), QubitAmplitudes::v(), QubitAmplitudes::plus());
    vec![("HH", h, h), ("HV", h, v), ("VH", v, h), ("VV", v, v), ("++", p, p)]
}

fn two_port(g: &CircuitGraph, a: QubitAmplitudes, b: QubitAmplitudes) -> PhotonicState {
    PhotonicState::qubit(&g.inputs[0], a).tensor(&PhotonicState::qubit(&g.inputs[1], b))
}

fn check(g: &CircuitGraph, input: &PhotonicState, label: &str) -> f64 {
    let lib = simulate_branches(g, input).unwrap();
    let reference = common::evaluate(g, input);
    let total: f64 = reference.iter().map(|b| b.weight()).sum();
    assert!((total - 1.0).abs() < 1e-10, "{} {label}: reference norm {total}", g.name);
    let d = common::max_branch_deviation(&lib, &reference);
    assert!(d < 1e-10, "{} {label}: amplitude deviation {d:e}", g.name);
    d
}

fn gate_circuits() -> Vec<CircuitGraph> {
    vec![
        build_classical_cnot_ancilla(),
        build_classical_cnot_qnd(&probe()),
        build_bell_cnot(&bell_resource(phi_plus())).unwrap(),
        build_bell_cnot(&bell_resource(psi_plus())).unwrap(),
        build_bell_cnot(&bell_resource(disentangled_resource())).unwrap(),
        build_fiber_cnot(),
    ]
}

#[test]
fn gates_match_reference_evaluation() {
    for g in gate_circuits() {
        for (label, a, b) in inputs() {
            check(&g, &two_port(&g, a, b), label);
        }
    }
}

#[test]
fn entangler_matches_reference_evaluation() {
    for hwp in [false, true] {
        for (label, a, b) in inputs() {
            let input = EntanglerInput::with_signals(a, b);
            let g = build_entangler(&input, hwp, &probe());
            check(&g, &input.signal_state(), label);
        }
    }
}

#[test]
fn reference_distinguishes_wrong_circuits() {
    let g = build_fiber_cnot();
    let mut h = g.clone();
    for e in h.elements.iter_mut() {
        if let ElementKind::Pbs(pbs) = &mut e.kind {
            if e.id == "PBS+_1" {
                pbs.basis = PbsBasis::hv();
            }
        }
    }
    let input = two_port(&g, QubitAmplitudes::plus(), QubitAmplitudes::h());
    let lib = simulate_branches(&h, &input).unwrap();
    let reference = common::evaluate(&g, &input);
    assert!(common::max_branch_deviation(&lib, &reference) > 1e-3);
}
