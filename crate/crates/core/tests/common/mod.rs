//! Brute-force reference evaluator.
//!
//! Photons are treated as labeled particles: a state is a map from an
//! ordered tuple of single-photon modes to an amplitude, symmetric under
//! relabeling. Every linear element acts as the same single-particle matrix
//! on each photon in turn, detectors project onto the set of modes found on
//! their path, and the result is converted back to occupation numbers only
//! at the end. Nothing here goes through the Fock-space transforms of the
//! library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C;
use photonic_core::circuit::{Action, CircuitGraph, Control, ElementKind, MeasurementDetail, RawBranch, Record};
use photonic_core::optics::{Pbs, PbsBasis};
use photonic_core::{BasisKet, ModeId, PathId, PhotonicState, Pol};

pub type Tuple = Vec<ModeId>;
pub type Labeled = BTreeMap<Tuple, C>;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn occupation_factor(modes: &[ModeId]) -> f64 {
    let mut occ: BTreeMap<&ModeId, u32> = BTreeMap::new();
    for m in modes {
        *occ.entry(m).or_default() += 1;
    }
    occ.values().map(|&n| factorial(n)).product::<f64>() / factorial(modes.len() as u32)
}

fn orderings(modes: &[ModeId]) -> BTreeSet<Tuple> {
    if modes.len() <= 1 {
        return [modes.to_vec()].into_iter().collect();
    }
    let mut out = BTreeSet::new();
    for i in 0..modes.len() {
        let mut rest = modes.to_vec();
        let first = rest.remove(i);
        for mut tail in orderings(&rest) {
            tail.insert(0, first.clone());
            out.insert(tail);
        }
    }
    out
}

fn ket_modes(ket: &BasisKet) -> Vec<ModeId> {
    ket.iter().flat_map(|(m, n)| std::iter::repeat_n(m.clone(), n as usize)).collect()
}

/// Occupation-number state to a symmetric labeled wavefunction.
pub fn to_labeled(state: &PhotonicState) -> Labeled {
    let mut out = Labeled::new();
    for (ket, _, amp) in state.terms() {
        let modes = ket_modes(ket);
        let c = amp * occupation_factor(&modes).sqrt();
        for t in orderings(&modes) {
            *out.entry(t).or_default() += c;
        }
    }
    out
}

/// Back to occupation numbers, dropping photons on `absorbed` paths.
pub fn to_fock(state: &Labeled, absorbed: &BTreeSet<PathId>) -> BTreeMap<BasisKet, C> {
    let mut out: BTreeMap<BasisKet, C> = BTreeMap::new();
    for (t, amp) in state {
        let mut sorted = t.clone();
        sorted.sort();
        let full = amp / occupation_factor(&sorted).sqrt();
        let kept = BasisKet::from_modes(sorted.into_iter().filter(|m| !absorbed.contains(&m.path)));
        // Every ordering of the same occupation carries the same amplitude.
        out.entry(kept).or_insert(full);
    }
    out.retain(|_, a| a.norm() > 1e-15);
    out
}

fn pol_index(p: Pol) -> usize {
    match p {
        Pol::H => 0,
        Pol::V => 1,
    }
}

const POLS: [Pol; 2] = [Pol::H, Pol::V];

fn mode(path: &PathId, pol: Pol, bin: u32) -> ModeId {
    ModeId { path: path.clone(), pol, bin }
}

/// Single-photon image of a polarizing beam splitter.
fn pbs_matrix(pbs: &Pbs, m: &ModeId) -> Option<Vec<(ModeId, C)>> {
    let port = pbs.inputs.iter().position(|p| p == &m.path)?;
    let straight = &pbs.outputs[port];
    let crossed = &pbs.outputs[1 - port];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Some(match pbs.basis {
        PbsBasis::Hv { transmit } => {
            let out = if m.pol == transmit { straight } else { crossed };
            vec![(mode(out, m.pol, m.bin), C::new(1.0, 0.0))]
        }
        PbsBasis::Diagonal { plus_transmits } => {
            let plus = [s, s];
            let minus = [s, -s];
            let (plus_out, minus_out) = if plus_transmits { (straight, crossed) } else { (crossed, straight) };
            let i = pol_index(m.pol);
            let mut v = Vec::new();
            for (basis, out) in [(plus, plus_out), (minus, minus_out)] {
                let overlap = basis[i];
                for (j, p) in POLS.iter().enumerate() {
                    v.push((mode(out, *p, m.bin), C::new(overlap * basis[j], 0.0)));
                }
            }
            v
        }
    })
}

fn single_photon_image(kind: &ElementKind, m: &ModeId) -> Vec<(ModeId, C)> {
    let identity = || vec![(m.clone(), C::new(1.0, 0.0))];
    match kind {
        ElementKind::Pbs(pbs) => pbs_matrix(pbs, m).unwrap_or_else(identity),
        ElementKind::Jones { path, bins, matrix } if &m.path == path && bins.matches(m.bin) => {
            let j = pol_index(m.pol);
            POLS.iter().map(|p| (mode(path, *p, m.bin), matrix.matrix()[(pol_index(*p), j)])).collect()
        }
        ElementKind::Pockels { path, bins } if &m.path == path && bins.matches(m.bin) => {
            vec![(mode(path, m.pol.flipped(), m.bin), C::new(1.0, 0.0))]
        }
        ElementKind::Delay { path, bins } if &m.path == path => {
            vec![(mode(path, m.pol, m.bin + bins), C::new(1.0, 0.0))]
        }
        ElementKind::Route { map, bins } if bins.matches(m.bin) => match map.iter().find(|(from, _)| from == &m.path) {
            Some((_, to)) => vec![(mode(to, m.pol, m.bin), C::new(1.0, 0.0))],
            None => identity(),
        },
        _ => identity(),
    }
}

/// Applies the same single-photon map to every photon of every tuple.
fn apply_linear(state: &Labeled, f: impl Fn(&ModeId) -> Vec<(ModeId, C)>) -> Labeled {
    let mut out = Labeled::new();
    for (t, amp) in state {
        let mut partial: Vec<(Tuple, C)> = vec![(Vec::new(), *amp)];
        for m in t {
            let img = f(m);
            partial = partial
                .into_iter()
                .flat_map(|(prefix, a)| {
                    img.iter().map(move |(m2, c)| {
                        let mut p = prefix.clone();
                        p.push(m2.clone());
                        (p, a * c)
                    })
                })
                .collect();
        }
        for (t2, a) in partial {
            *out.entry(t2).or_default() += a;
        }
    }
    out.retain(|_, a| a.norm() > 1e-16);
    out
}

#[derive(Clone, Debug)]
pub struct OracleBranch {
    pub record: Record,
    pub details: Vec<MeasurementDetail>,
    pub state: Labeled,
    sinks: BTreeSet<PathId>,
    active: BTreeSet<String>,
    fired: Vec<bool>,
}

impl OracleBranch {
    pub fn weight(&self) -> f64 {
        self.state.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn fock(&self) -> BTreeMap<BasisKet, C> {
        to_fock(&self.state, &self.sinks)
    }
}

fn sink(id: &str) -> PathId {
    PathId::new(&format!("absorbed by {id}"))
}

fn group_by_path(state: &Labeled, path: &PathId) -> BTreeMap<Vec<ModeId>, Labeled> {
    let mut groups: BTreeMap<Vec<ModeId>, Labeled> = BTreeMap::new();
    for (t, a) in state {
        let mut on: Vec<ModeId> = t.iter().filter(|m| &m.path == path).cloned().collect();
        on.sort();
        groups.entry(on).or_default().insert(t.clone(), *a);
    }
    groups
}

/// Every fine-grained branch of `circuit` on `input`, ideal readout.
pub fn evaluate(circuit: &CircuitGraph, input: &PhotonicState) -> Vec<OracleBranch> {
    let mut initial = to_labeled(input);
    if let Some(r) = &circuit.resource {
        initial = symmetric_product(&initial, &to_labeled(r));
    }
    let mut order: Vec<usize> = (0..circuit.elements.len()).collect();
    order.sort_by_key(|&i| (circuit.elements[i].slot, i));

    let mut branches = vec![OracleBranch {
        record: Record::default(),
        details: Vec::new(),
        state: initial,
        sinks: BTreeSet::new(),
        active: BTreeSet::new(),
        fired: vec![false; circuit.rules.len()],
    }];
    for idx in order {
        let el = &circuit.elements[idx];
        let mut next = Vec::new();
        for b in branches {
            if el.control == Control::OnSignal && !b.active.contains(&el.id) {
                next.push(b);
                continue;
            }
            let children = match &el.kind {
                ElementKind::Detector { path, number_resolving } => {
                    let dest = sink(&el.id);
                    group_by_path(&b.state, path)
                        .into_iter()
                        .map(|(absorbed, part)| {
                            let n = absorbed.len() as u32;
                            let mut c = b.clone();
                            c.record.insert(&el.id, if *number_resolving { n } else { n.min(1) });
                            c.details.push(MeasurementDetail::Absorbed {
                                id: el.id.clone(),
                                photons: BasisKet::from_modes(absorbed),
                            });
                            c.state = apply_linear(&part, |m| {
                                let to = if &m.path == path { dest.clone() } else { m.path.clone() };
                                vec![(mode(&to, m.pol, m.bin), C::new(1.0, 0.0))]
                            });
                            c.sinks.insert(dest.clone());
                            c
                        })
                        .collect::<Vec<_>>()
                }
                ElementKind::Qnd { path, .. } => {
                    let mut by_count: BTreeMap<u32, Labeled> = BTreeMap::new();
                    for (t, a) in &b.state {
                        let n = t.iter().filter(|m| &m.path == path).count() as u32;
                        by_count.entry(n).or_default().insert(t.clone(), *a);
                    }
                    by_count
                        .into_iter()
                        .map(|(n, part)| {
                            let mut c = b.clone();
                            c.record.insert(&el.id, n.min(2));
                            c.details.push(MeasurementDetail::QndCount { id: el.id.clone(), true_count: n });
                            c.state = part;
                            c
                        })
                        .collect()
                }
                ElementKind::Trace => vec![b],
                kind => {
                    let mut c = b;
                    c.state = apply_linear(&c.state, |m| single_photon_image(kind, m));
                    vec![c]
                }
            };
            for mut c in children {
                if el.kind.is_measurement() {
                    fire(circuit, &mut c);
                }
                if c.weight() > 1e-24 {
                    next.push(c);
                }
            }
        }
        branches = next;
    }
    branches
}

fn fire(circuit: &CircuitGraph, b: &mut OracleBranch) {
    for (i, rule) in circuit.rules.iter().enumerate() {
        if b.fired[i] {
            continue;
        }
        let Some(ok) = rule.trigger.evaluate(&b.record) else { continue };
        b.fired[i] = true;
        if !ok {
            continue;
        }
        for a in &rule.actions {
            match a {
                Action::Activate(id) => {
                    b.active.insert(id.clone());
                }
                Action::Correct { path, bins, matrix } => {
                    let kind = ElementKind::Jones { path: path.clone(), bins: *bins, matrix: matrix.clone() };
                    b.state = apply_linear(&b.state, |m| single_photon_image(&kind, m));
                }
            }
        }
    }
}

/// Symmetrized product of two labeled states on disjoint modes.
pub fn symmetric_product(a: &Labeled, b: &Labeled) -> Labeled {
    let fa = to_fock(a, &BTreeSet::new());
    let fb = to_fock(b, &BTreeSet::new());
    let mut out = Labeled::new();
    for (ka, aa) in &fa {
        for (kb, ab) in &fb {
            let modes: Vec<ModeId> = ket_modes(ka).into_iter().chain(ket_modes(kb)).collect();
            let c = aa * ab * occupation_factor(&modes).sqrt();
            for t in orderings(&modes) {
                *out.entry(t).or_default() += c;
            }
        }
    }
    out
}

/// Largest amplitude difference between library and reference branches,
/// matched on record and hidden measurement details.
pub fn max_branch_deviation(library: &[RawBranch], reference: &[OracleBranch]) -> f64 {
    type Key = (Record, Vec<MeasurementDetail>);
    let mut lib: BTreeMap<Key, BTreeMap<BasisKet, C>> = BTreeMap::new();
    for b in library {
        let e = lib.entry((b.record.clone(), b.details.clone())).or_default();
        for (ket, _, a) in b.state.terms() {
            *e.entry(ket.clone()).or_default() += a;
        }
    }
    let mut refs: BTreeMap<Key, BTreeMap<BasisKet, C>> = BTreeMap::new();
    for b in reference {
        let e = refs.entry((b.record.clone(), b.details.clone())).or_default();
        for (ket, a) in b.fock() {
            *e.entry(ket).or_default() += a;
        }
    }
    let empty = BTreeMap::new();
    let keys: BTreeSet<&Key> = lib.keys().chain(refs.keys()).collect();
    let mut worst = 0.0f64;
    for k in keys {
        let x = lib.get(k).unwrap_or(&empty);
        let y = refs.get(k).unwrap_or(&empty);
        let kets: BTreeSet<&BasisKet> = x.keys().chain(y.keys()).collect();
        for ket in kets {
            let d = x.get(ket).copied().unwrap_or_default() - y.get(ket).copied().unwrap_or_default();
            worst = worst.max(d.norm());
        }
    }
    worst
}
