mod common;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use nalgebra::Matrix4;
use proptest::prelude::*;

use photonic_core::circuit::{
    apply_corrections, expected_output, output_coincidence, simulate, simulate_branches, Action, CircuitGraph, Element,
    ElementKind, Expect, FeedForwardRule, MeasurementDetail, QndScheme, RawBranch, Record, Trigger,
};
use photonic_core::fock::{hermitian_eigenvalues, wootters_concurrence};
use photonic_core::gates::{
    bell_resource, build_bell_cnot, build_classical_cnot_ancilla, build_classical_cnot_qnd, build_entangler,
    build_fiber_cnot, cnot, herald_patterns, matches_pattern, phi_plus, psi_plus, run_entangler, EntanglerInput,
};
use photonic_core::optics::{apply_jones, delay, pbs_diag, pbs_hv, pockels, BinSelector, JonesMatrix};
use photonic_core::qnd::{
    coherent_overlap, discriminate, helstrom_error, kerr_interact, qnd_polarization_preserving, qnd_presence, ErrorModel,
    KerrProbe, ModeSet,
};
use photonic_core::sampling::{chi_square, sample_result};
use photonic_core::{BasisKet, ModeId, PathId, PhotonicError, PhotonicState, Pol, QubitAmplitudes, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn amp() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c(re, im))
}

fn qubit() -> impl Strategy<Value = QubitAmplitudes> {
    (amp(), amp())
        .prop_filter("nonzero", |(h, v)| h.norm_sqr() + v.norm_sqr() > 1e-3)
        .prop_map(|(h, v)| {
            let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
            QubitAmplitudes::new(h / n, v / n).unwrap()
        })
}

fn two_qubit_amps() -> impl Strategy<Value = [C64; 4]> {
    [amp(), amp(), amp(), amp()]
        .prop_filter("nonzero", |a| a.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(|a| {
            let n = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            a.map(|x| x / n)
        })
}

/// Random normalized superposition of up to two photons on paths a and b.
fn two_photon_state() -> impl Strategy<Value = PhotonicState> {
    let modes: Vec<ModeId> = ["a", "b"]
        .iter()
        .flat_map(|p| [Pol::H, Pol::V].map(|pol| ModeId::new(*p, pol, 0)))
        .collect();
    let mut kets = Vec::new();
    for i in 0..modes.len() {
        for j in i..modes.len() {
            kets.push(BasisKet::from_modes([modes[i].clone(), modes[j].clone()]));
        }
    }
    proptest::collection::vec(amp(), kets.len())
        .prop_filter("nonzero", |v| v.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(move |v| PhotonicState::from_kets(kets.clone().into_iter().zip(v)).normalized().unwrap())
}

fn photon_numbers(s: &PhotonicState) -> Vec<u32> {
    s.terms().map(|(k, _, _)| k.total()).collect()
}

fn max_diff(x: &PhotonicState, y: &PhotonicState) -> f64 {
    x.terms()
        .chain(y.terms())
        .map(|(k, t, _)| (x.amplitude_tagged(k, t) - y.amplitude_tagged(k, t)).norm())
        .fold(0.0, f64::max)
}

fn pair_input(g: &CircuitGraph, a: &QubitAmplitudes, b: &QubitAmplitudes) -> PhotonicState {
    PhotonicState::qubit(&g.inputs[0], *a).tensor(&PhotonicState::qubit(&g.inputs[1], *b))
}

fn probe() -> KerrProbe {
    KerrProbe::with_mean_n("probe", 100.0, 0.5).unwrap()
}

fn prebuilt() -> Vec<CircuitGraph> {
    vec![
        build_classical_cnot_ancilla(),
        build_classical_cnot_qnd(&probe()),
        build_bell_cnot(&bell_resource(phi_plus())).unwrap(),
        build_fiber_cnot(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn linear_elements_keep_norm_and_photon_number(s in two_photon_state(), angle in -3.2f64..3.2, bins in 0u32..3) {
        let before = s.norm_squared();
        let steps = [
            pbs_hv(&s, ["a", "b"], ["a", "b"]),
            pbs_diag(&s, ["a", "b"], ["b", "a"]),
            apply_jones(&s, &"a".into(), BinSelector::All, &JonesMatrix::rotation(angle)),
            pockels(&s, &"b".into(), BinSelector::Only(0), true),
            delay(&s, &"a".into(), bins),
        ];
        for out in steps {
            prop_assert!((out.norm_squared() - before).abs() < 1e-12);
            prop_assert!(photon_numbers(&out).iter().all(|&n| n == 2));
        }
    }

    #[test]
    fn concurrence_matches_reduced_spectrum(amps in two_qubit_amps()) {
        let (a, b): (PathId, PathId) = ("a".into(), "b".into());
        let s = PhotonicState::two_qubit([&a, &b], amps, 0);
        let rho = s.reduced_density(std::slice::from_ref(&a)).unwrap();
        let l = hermitian_eigenvalues(&rho);
        let expected = 2.0 * (l[0].max(0.0) * l[1].max(0.0)).sqrt();
        prop_assert!((s.concurrence([&a, &b]).unwrap() - expected).abs() < 1e-10);
        let full = s.reduced_density(&[a.clone(), b.clone()]).unwrap();
        prop_assert!((wootters_concurrence(&full).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn projection_renormalizes(s in two_photon_state(), pol in prop::bool::ANY) {
        let pol = if pol { Pol::H } else { Pol::V };
        let (p, prob) = s.project(|k| k.count_where(|m| m.pol == pol) >= 1);
        if prob > 0.0 {
            prop_assert!((p.normalized().unwrap().norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pbs_mirror_pair_is_identity(x in qubit(), y in qubit()) {
        let s = PhotonicState::qubit("a", x).tensor(&PhotonicState::qubit("b", y));
        let once = pbs_hv(&s, ["a", "b"], ["c", "d"]);
        let back = pbs_hv(&once, ["c", "d"], ["a", "b"]);
        prop_assert!(max_diff(&s, &back) < 1e-12);
    }

    #[test]
    fn pockels_is_an_involution(s in two_photon_state()) {
        let twice = pockels(&pockels(&s, &"a".into(), BinSelector::All, true), &"a".into(), BinSelector::All, true);
        prop_assert!(max_diff(&s, &twice) < 1e-12);
    }

    #[test]
    fn rotations_are_unitary(angle in -10.0f64..10.0) {
        let m = JonesMatrix::rotation(angle);
        let u = m.matrix().adjoint() * m.matrix();
        prop_assert!((u - nalgebra::Matrix2::identity()).norm() < 1e-12);
    }

    #[test]
    fn non_demolition(s in two_photon_state(), ideal in prop::bool::ANY) {
        let model = if ideal { ErrorModel::Ideal } else { ErrorModel::Overlap };
        let path = PathId::new("a");
        let outs = qnd_presence(&s, &path, &KerrProbe::with_mean_n("q", 2.0, 0.6).unwrap(), model).unwrap();
        let total: f64 = outs.iter().map(|o| o.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for o in outs {
            prop_assert!(!o.conditional_state.has_probe_tags());
            let (proj, _) = s.project(|k| k.count_on_path(&path) == o.true_count);
            prop_assert!(max_diff(&proj.normalized().unwrap(), &o.conditional_state) < 1e-12);
        }
    }

    #[test]
    fn polarization_blind_presence(q in qubit()) {
        let s = PhotonicState::qubit("a", q);
        let outs = qnd_polarization_preserving(&s, &"a".into(), &probe(), ErrorModel::Ideal).unwrap();
        prop_assert_eq!(outs.len(), 1);
        prop_assert_eq!(outs[0].photon_count_branch, 1);
        prop_assert!((outs[0].probability - 1.0).abs() < 1e-12);
        prop_assert!(max_diff(&outs[0].conditional_state, &s) < 1e-12);
    }

    #[test]
    fn probe_tags_are_consumed(s in two_photon_state()) {
        let p = probe();
        let tagged = kerr_interact(&s, &ModeSet::Paths(vec!["b".into()]), &p);
        prop_assert!(tagged.has_probe_tags() || s.terms().all(|(k, _, _)| k.count_on_path(&"b".into()) == 0));
        for o in discriminate(&tagged, &p, ErrorModel::Overlap).unwrap() {
            prop_assert!(o.conditional_state.terms().all(|(_, t, _)| t.get(p.id()).is_none()));
        }
    }
}

#[test]
fn diagonal_pbs_is_rotated_rectilinear_pbs() {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(50));
    runner
        .run(&two_photon_state(), |s| {
            let rotate = |s: &PhotonicState, angle: f64, paths: [&str; 2]| {
                let r = JonesMatrix::rotation(angle);
                let s = apply_jones(s, &paths[0].into(), BinSelector::All, &r);
                apply_jones(&s, &paths[1].into(), BinSelector::All, &r)
            };
            let direct = pbs_diag(&s, ["a", "b"], ["c", "d"]);
            let via = rotate(&pbs_hv(&rotate(&s, FRAC_PI_4, ["a", "b"]), ["a", "b"], ["c", "d"]), -FRAC_PI_4, ["c", "d"]);
            prop_assert!(max_diff(&direct, &via) < 1e-12);
            Ok(())
        })
        .unwrap();
}

#[test]
fn overlap_model_approaches_ideal() {
    let p = helstrom_error(coherent_overlap(1e6, 0.1));
    assert!(p < 1e-9, "{p:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn branch_probabilities_sum_to_one(a in qubit(), b in qubit()) {
        for g in prebuilt() {
            let r = simulate(&g, &pair_input(&g, &a, &b)).unwrap();
            prop_assert!((r.total_probability() - 1.0).abs() < 1e-10, "{}", g.name);
            for br in &r.branches {
                prop_assert!((br.state.norm_squared() - 1.0).abs() < 1e-10);
            }
        }
        let input = EntanglerInput::with_signals(a, b);
        let g = build_entangler(&input, false, &probe());
        let r = simulate(&g, &input.signal_state()).unwrap();
        prop_assert!((r.total_probability() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn simulation_is_linear(a in qubit(), b in qubit(), x in amp(), y in amp()) {
        type Key = (Record, Vec<MeasurementDetail>);
        let collect = |branches: Vec<RawBranch>| {
            let mut m: BTreeMap<Key, PhotonicState> = BTreeMap::new();
            for br in branches {
                let e = m.entry((br.record, br.details)).or_insert_with(PhotonicState::empty);
                *e = e.add(&br.state);
            }
            m
        };
        for g in prebuilt() {
            let s1 = pair_input(&g, &a, &QubitAmplitudes::h());
            let s2 = pair_input(&g, &QubitAmplitudes::v(), &b);
            let sum = s1.scaled(x).add(&s2.scaled(y));
            let lhs = collect(simulate_branches(&g, &sum).unwrap());
            let r1 = collect(simulate_branches(&g, &s1).unwrap());
            let r2 = collect(simulate_branches(&g, &s2).unwrap());
            let mut keys: Vec<&Key> = lhs.keys().chain(r1.keys()).chain(r2.keys()).collect();
            keys.sort();
            keys.dedup();
            let empty = PhotonicState::empty();
            for k in keys {
                let want = r1.get(k).unwrap_or(&empty).scaled(x).add(&r2.get(k).unwrap_or(&empty).scaled(y));
                prop_assert!(max_diff(lhs.get(k).unwrap_or(&empty), &want) < 1e-12, "{}", g.name);
            }
        }
    }

    #[test]
    fn matches_reference_on_product_inputs(a in qubit(), b in qubit()) {
        for g in prebuilt() {
            let input = pair_input(&g, &a, &b);
            let lib = simulate_branches(&g, &input).unwrap();
            let d = common::max_branch_deviation(&lib, &common::evaluate(&g, &input));
            prop_assert!(d < 1e-10, "{}: {d:e}", g.name);
        }
    }

    #[test]
    fn entangler_concurrence_tracks_inputs(i in qubit(), iv in qubit()) {
        let out = run_entangler(&EntanglerInput::with_signals(i, iv), false, &probe(), ErrorModel::Ideal).unwrap();
        prop_assert!((out.concurrence_13 - 2.0 * (iv.h * iv.v).norm()).abs() < 1e-10);
        prop_assert!((out.concurrence_24 - 2.0 * (i.h * i.v).norm()).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn corrected_bell_cnot_is_exact(a in qubit(), b in qubit()) {
        let g = build_bell_cnot(&bell_resource(phi_plus())).unwrap();
        let r = simulate(&g, &pair_input(&g, &a, &b)).unwrap();
        let rc = apply_corrections(&r, &g.corrections).unwrap();
        let expect = expected_output(&r, &cnot(), (&a, &b)).unwrap();
        let mut success = 0.0;
        for br in rc.branches.iter().filter(|br| herald_patterns().iter().any(|p| matches_pattern(&br.record, *p))) {
            let (sel, w) = output_coincidence(&br.state, &rc.outputs, rc.output_bin);
            prop_assert!(w > 1.0 - 1e-10);
            prop_assert!(sel.fidelity(&expect) >= 1.0 - 1e-10);
            success += br.probability * w;
        }
        prop_assert!((success - 0.25).abs() < 1e-10);
    }

    #[test]
    fn swapped_resource_conjugates_by_x(a in qubit(), b in qubit()) {
        let mut x = Matrix4::<C64>::zeros();
        for (i, j) in [(0, 2), (1, 3), (2, 0), (3, 1)] {
            x[(i, j)] = c(1.0, 0.0);
        }
        let oracle = x * cnot() * x;
        let g = build_bell_cnot(&bell_resource(psi_plus())).unwrap();
        let r = simulate(&g, &pair_input(&g, &a, &b)).unwrap();
        let rc = apply_corrections(&r, &g.corrections).unwrap();
        let expect = expected_output(&r, &oracle, (&a, &b)).unwrap();
        for br in rc.branches.iter().filter(|br| herald_patterns().iter().any(|p| matches_pattern(&br.record, *p))) {
            let (sel, _) = output_coincidence(&br.state, &rc.outputs, rc.output_bin);
            prop_assert!(sel.fidelity(&expect) >= 1.0 - 1e-10);
        }
    }
}

#[test]
fn classical_gates_agree_on_basis_inputs() {
    let a = build_classical_cnot_ancilla();
    let q = build_classical_cnot_qnd(&probe());
    for x in [Pol::H, Pol::V] {
        for y in [Pol::H, Pol::V] {
            let (qx, qy) = (QubitAmplitudes::basis(x), QubitAmplitudes::basis(y));
            let ra = simulate(&a, &pair_input(&a, &qx, &qy)).unwrap();
            let rq = simulate(&q, &pair_input(&q, &qx, &qy)).unwrap();
            assert_eq!(ra.branches.len(), 1);
            assert_eq!(rq.branches.len(), 1);
            let out = |g: &CircuitGraph, s: &PhotonicState| {
                let (k, _, _) = s.terms().next().unwrap();
                g.outputs.iter().map(|p| k.iter().find(|(m, _)| &m.path == p).map(|(m, _)| m.pol)).collect::<Vec<_>>()
            };
            assert_eq!(out(&a, &ra.branches[0].state), out(&q, &rq.branches[0].state), "{x}{y}");
        }
    }
}

/// Marginal probability of the values recorded by `ids`.
fn marginal(g: &CircuitGraph, input: &PhotonicState, ids: &[&str]) -> BTreeMap<Vec<Option<u32>>, f64> {
    let mut m = BTreeMap::new();
    for b in simulate(g, input).unwrap().branches {
        *m.entry(ids.iter().map(|id| b.record.get(id)).collect()).or_insert(0.0) += b.probability;
    }
    m
}

#[test]
fn removing_feed_forward_keeps_earlier_statistics() {
    let p = QubitAmplitudes::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    for (g, ids) in [
        (build_classical_cnot_ancilla(), vec!["D1"]),
        (build_classical_cnot_qnd(&probe()), vec!["QND"]),
        (build_bell_cnot(&bell_resource(phi_plus())).unwrap(), vec!["D1", "D2", "D3", "D4"]),
    ] {
        let input = pair_input(&g, &p, &QubitAmplitudes::plus());
        let mut bare = g.clone();
        bare.rules.clear();
        let with = marginal(&g, &input, &ids);
        let without = marginal(&bare, &input, &ids);
        assert_eq!(with.len(), without.len(), "{}", g.name);
        for (k, v) in &with {
            assert!((v - without[k]).abs() < 1e-12, "{}", g.name);
        }
    }
}

#[test]
fn backward_activation_is_rejected() {
    let mut g = CircuitGraph::new("loop").with_inputs(&["a"]).with_outputs(&["a"]);
    g.push(Element::new("PC", 0, ElementKind::Pockels { path: "a".into(), bins: BinSelector::All }).on_signal())
        .push(Element::new("QND", 1, ElementKind::Qnd { path: "a".into(), probe: probe(), scheme: QndScheme::Presence }));
    g.rules.push(FeedForwardRule::new(Trigger::when("QND", Expect::Count(1)), vec![Action::Activate("PC".into())]));
    let err = simulate(&g, &PhotonicState::qubit("a", QubitAmplitudes::h())).unwrap_err();
    assert!(matches!(err, PhotonicError::ScheduleViolation { .. }), "{err}");
}

#[test]
fn sampling_fits_every_prebuilt_circuit() {
    let a = QubitAmplitudes::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let b = QubitAmplitudes::plus();
    let mut cases: Vec<(CircuitGraph, PhotonicState)> = prebuilt()
        .into_iter()
        .map(|g| {
            let s = pair_input(&g, &a, &b);
            (g, s)
        })
        .collect();
    let input = EntanglerInput::with_signals(a, b);
    cases.push((build_entangler(&input, false, &probe()), input.signal_state()));
    for (seed, (g, input)) in cases.iter().enumerate() {
        let r = simulate(g, input).unwrap();
        let h = sample_result(&r, 100_000, seed as u64, Default::default()).unwrap();
        let t = chi_square(&h, &r.record_distribution()).unwrap();
        assert!(t.p_value > 0.001, "{}: p = {}", g.name, t.p_value);
    }
}
