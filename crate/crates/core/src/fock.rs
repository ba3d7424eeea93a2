//! Sparse Fock-space state vectors over photonic modes.
//!
//! A mode is a (spatial path, polarization, time bin) triple. Basis kets are
//! occupation-number assignments over those modes, and a [`PhotonicState`] is
//! a sparse complex superposition of basis kets, each optionally tagged with
//! the accumulated phase multipliers of cross-Kerr probes it interacted with.
//!
//! Linear optics is applied through [`PhotonicState::transform_modes`], which
//! expands every creation operator of a ket through a single-photon mode map
//! and keeps the bosonic `sqrt(n!)` factors exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PhotonicError, Result};

/// Amplitudes below this magnitude are dropped after every transformation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Tolerance used for normalization checks.
pub const NORM_TOLERANCE: f64 = 1e-12;

pub type C64 = Complex64;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub fn flipped(self) -> Pol {
        match self {
            Pol::H => Pol::V,
            Pol::V => Pol::H,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Pol {
        if i == 0 {
            Pol::H
        } else {
            Pol::V
        }
    }
}

impl fmt::Display for Pol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pol::H => f.write_str("H"),
            Pol::V => f.write_str("V"),
        }
    }
}

/// Symbolic spatial path label ("upper", "a_i", "out3", ...).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(Arc<str>);

impl PathId {
    pub fn new(label: &str) -> Self {
        PathId(Arc::from(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for PathId {
    fn from(s: &str) -> Self {
        PathId::new(s)
    }
}

impl From<&PathId> for PathId {
    fn from(p: &PathId) -> Self {
        p.clone()
    }
}

impl fmt::Debug for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for PathId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PathId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(PathId::new(&s))
    }
}

/// A single optical mode. Ordering is lexicographic on (path, pol, bin).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub path: PathId,
    pub pol: Pol,
    pub bin: u32,
}

impl ModeId {
    pub fn new(path: impl Into<PathId>, pol: Pol, bin: u32) -> Self {
        ModeId { path: path.into(), pol, bin }
    }

    pub fn with_pol(&self, pol: Pol) -> Self {
        ModeId { path: self.path.clone(), pol, bin: self.bin }
    }

    pub fn with_path(&self, path: &PathId) -> Self {
        ModeId { path: path.clone(), pol: self.pol, bin: self.bin }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bin == 0 {
            write!(f, "{}({})", self.pol, self.path)
        } else {
            write!(f, "{}({})@{}", self.pol, self.path, self.bin)
        }
    }
}

/// Occupation numbers over modes. Zero counts are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisKet {
    occupation: BTreeMap<ModeId, u32>,
}

impl BasisKet {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn from_modes<I: IntoIterator<Item = ModeId>>(modes: I) -> Self {
        let mut ket = Self::vacuum();
        for m in modes {
            ket.add_photon(m);
        }
        ket
    }

    pub fn single(path: impl Into<PathId>, pol: Pol) -> Self {
        Self::from_modes([ModeId::new(path, pol, 0)])
    }

    pub fn add_photon(&mut self, mode: ModeId) {
        *self.occupation.entry(mode).or_insert(0) += 1;
    }

    pub fn count(&self, mode: &ModeId) -> u32 {
        self.occupation.get(mode).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.occupation.values().sum()
    }

    pub fn count_on_path(&self, path: &PathId) -> u32 {
        self.occupation.iter().filter(|(m, _)| &m.path == path).map(|(_, n)| n).sum()
    }

    pub fn count_where(&self, mut pred: impl FnMut(&ModeId) -> bool) -> u32 {
        self.occupation.iter().filter(|(m, _)| pred(m)).map(|(_, n)| n).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeId, u32)> {
        self.occupation.iter().map(|(m, n)| (m, *n))
    }

    pub fn is_vacuum(&self) -> bool {
        self.occupation.is_empty()
    }

    pub fn paths(&self) -> BTreeSet<PathId> {
        self.occupation.keys().map(|m| m.path.clone()).collect()
    }

    /// Splits into (photons on modes matching `pred`, the rest).
    pub fn split(&self, mut pred: impl FnMut(&ModeId) -> bool) -> (BasisKet, BasisKet) {
        let mut hit = BasisKet::vacuum();
        let mut rest = BasisKet::vacuum();
        for (m, n) in &self.occupation {
            let target = if pred(m) { &mut hit } else { &mut rest };
            target.occupation.insert(m.clone(), *n);
        }
        (hit, rest)
    }

    /// Union of occupations.
    pub fn merged(&self, other: &BasisKet) -> BasisKet {
        let mut out = self.clone();
        for (m, n) in &other.occupation {
            *out.occupation.entry(m.clone()).or_insert(0) += n;
        }
        out
    }

    /// Product of `n!` over all occupied modes.
    pub(crate) fn factorial_product(&self) -> f64 {
        self.occupation.values().map(|&n| factorial(n)).product()
    }

    /// Each photon listed once per unit of occupation, in mode order.
    pub(crate) fn photons(&self) -> Vec<&ModeId> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (m, &n) in &self.occupation {
            for _ in 0..n {
                out.push(m);
            }
        }
        out
    }
}

impl fmt::Display for BasisKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.occupation.is_empty() {
            return f.write_str("vac");
        }
        let mut first = true;
        for (m, n) in &self.occupation {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if *n > 1 {
                write!(f, "{n}")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Identifier of a registered cross-Kerr probe.
pub type ProbeId = PathId;

/// Accumulated probe phase multipliers: probe id -> n, meaning the probe
/// picked up phase `n * theta`. Multiplier 0 is stored explicitly so that an
/// interacted probe can be told apart from one that never touched the term.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProbeTag {
    phases: BTreeMap<ProbeId, u32>,
}

impl ProbeTag {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, probe: &ProbeId) -> Option<u32> {
        self.phases.get(probe).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub(crate) fn add(&mut self, probe: &ProbeId, n: u32) {
        *self.phases.entry(probe.clone()).or_insert(0) += n;
    }

    pub(crate) fn remove(&mut self, probe: &ProbeId) -> Option<u32> {
        self.phases.remove(probe)
    }
}

/// Term key: occupation ket plus probe branch.
pub type TermKey = (BasisKet, ProbeTag);

/// Sparse superposition over (ket, probe tag) pairs.
///
/// States are values: every operation returns a new state. Branch states
/// inside the simulator may be unnormalized; their squared norm is the branch
/// weight.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhotonicState {
    terms: BTreeMap<TermKey, C64>,
}

impl PhotonicState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vacuum() -> Self {
        Self::from_ket(BasisKet::vacuum())
    }

    pub fn from_ket(ket: BasisKet) -> Self {
        let mut s = Self::empty();
        s.add_term(ket, ProbeTag::none(), c(1.0, 0.0));
        s
    }

    pub fn from_kets<I: IntoIterator<Item = (BasisKet, C64)>>(kets: I) -> Self {
        let mut s = Self::empty();
        for (k, a) in kets {
            s.add_term(k, ProbeTag::none(), a);
        }
        s.pruned()
    }

    /// A single photon on `path` (bin 0) with polarization amplitudes (h, v).
    pub fn qubit(path: impl Into<PathId>, amps: QubitAmplitudes) -> Self {
        let path = path.into();
        Self::from_kets([
            (BasisKet::single(path.clone(), Pol::H), amps.h),
            (BasisKet::single(path, Pol::V), amps.v),
        ])
    }

    pub fn add_term(&mut self, ket: BasisKet, tag: ProbeTag, amp: C64) {
        *self.terms.entry((ket, tag)).or_insert(c(0.0, 0.0)) += amp;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisKet, &ProbeTag, C64)> {
        self.terms.iter().map(|((k, t), a)| (k, t, *a))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, ket: &BasisKet) -> C64 {
        self.terms.get(&(ket.clone(), ProbeTag::none())).copied().unwrap_or_default()
    }

    pub fn amplitude_tagged(&self, ket: &BasisKet, tag: &ProbeTag) -> C64 {
        self.terms.get(&(ket.clone(), tag.clone())).copied().unwrap_or_default()
    }

    pub fn norm_squared(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() < NORM_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_squared();
        if n <= 0.0 {
            return Err(PhotonicError::ZeroNorm);
        }
        Ok(self.scaled(c(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { terms: self.terms.iter().map(|(k, a)| (k.clone(), a * factor)).collect() }.pruned()
    }

    /// Drops amplitudes below [`PRUNE_THRESHOLD`].
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        self
    }

    pub fn add(&self, other: &PhotonicState) -> Self {
        let mut out = self.clone();
        for ((k, t), a) in &other.terms {
            out.add_term(k.clone(), t.clone(), *a);
        }
        out.pruned()
    }

    /// `<self|other>`. Terms with different probe tags are orthogonal.
    pub fn inner(&self, other: &PhotonicState) -> C64 {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = c(0.0, 0.0);
        for (k, a) in &small.terms {
            if let Some(b) = large.terms.get(k) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        acc
    }

    /// Global-phase-insensitive fidelity `|<a|b>|^2 / (|a|^2 |b|^2)`.
    pub fn fidelity(&self, other: &PhotonicState) -> f64 {
        let na = self.norm_squared();
        let nb = other.norm_squared();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        self.inner(other).norm_sqr() / (na * nb)
    }

    /// Product state on disjoint modes. Probe tags are combined.
    pub fn tensor(&self, other: &PhotonicState) -> Self {
        let mut out = Self::empty();
        for ((k1, t1), a1) in &self.terms {
            for ((k2, t2), a2) in &other.terms {
                let mut tag = t1.clone();
                for (p, n) in &t2.phases {
                    tag.add(p, *n);
                }
                // Joining two kets that share a mode would need bosonic
                // factors; callers only combine disjoint registers.
                let ket = k1.merged(k2);
                out.add_term(ket, tag, a1 * a2);
            }
        }
        out.pruned()
    }

    /// Sub-superposition whose kets satisfy `pred`, with its squared norm.
    /// The returned state is not renormalized.
    pub fn project(&self, mut pred: impl FnMut(&BasisKet) -> bool) -> (PhotonicState, f64) {
        let terms: BTreeMap<_, _> =
            self.terms.iter().filter(|((k, _), _)| pred(k)).map(|(k, a)| (k.clone(), *a)).collect();
        let s = PhotonicState { terms };
        let p = s.norm_squared();
        (s, p)
    }

    /// Like [`project`](Self::project) but also sees the probe tag.
    pub fn project_tagged(
        &self,
        mut pred: impl FnMut(&BasisKet, &ProbeTag) -> bool,
    ) -> PhotonicState {
        let terms = self.terms.iter().filter(|((k, t), _)| pred(k, t)).map(|(k, a)| (k.clone(), *a)).collect();
        PhotonicState { terms }
    }

    /// Rewrites each term's key. Colliding keys add coherently.
    pub fn map_terms(&self, mut f: impl FnMut(&BasisKet, &ProbeTag) -> (BasisKet, ProbeTag)) -> Self {
        let mut out = Self::empty();
        for ((k, t), a) in &self.terms {
            let (k2, t2) = f(k, t);
            out.add_term(k2, t2, *a);
        }
        out.pruned()
    }

    /// Applies a linear single-photon mode map to every photon.
    ///
    /// `image(mode)` returns `None` for modes the map leaves untouched, or the
    /// list of `(output mode, coefficient)` the creation operator expands
    /// into. A ket `prod_m (a_m^+)^{n_m} / sqrt(n_m!)` is expanded operator by
    /// operator and the output occupations are re-normalized with their own
    /// `sqrt(n!)` factors.
    pub fn transform_modes<F>(&self, image: F) -> Self
    where
        F: Fn(&ModeId) -> Option<Vec<(ModeId, C64)>>,
    {
        let mut out = Self::empty();
        for ((ket, tag), amp) in &self.terms {
            let photons = ket.photons();
            let images: Vec<Option<Vec<(ModeId, C64)>>> = photons.iter().map(|m| image(m)).collect();
            if images.iter().all(Option::is_none) {
                out.add_term(ket.clone(), tag.clone(), *amp);
                continue;
            }
            let in_norm = 1.0 / ket.factorial_product().sqrt();
            let mut partial: Vec<(BasisKet, C64)> = vec![(BasisKet::vacuum(), *amp * in_norm)];
            for (m, img) in photons.iter().zip(images) {
                let img = img.unwrap_or_else(|| vec![((*m).clone(), c(1.0, 0.0))]);
                let mut next = Vec::with_capacity(partial.len() * img.len());
                for (k, a) in &partial {
                    for (m2, coef) in &img {
                        if coef.norm() < PRUNE_THRESHOLD {
                            continue;
                        }
                        let mut k2 = k.clone();
                        k2.add_photon(m2.clone());
                        next.push((k2, a * coef));
                    }
                }
                partial = next;
            }
            for (k, a) in partial {
                let out_norm = k.factorial_product().sqrt();
                out.add_term(k, tag.clone(), a * out_norm);
            }
        }
        out.pruned()
    }

    /// Removes every photon on modes matching `pred`, splitting the state by
    /// the removed configuration. Returns (removed ket, remaining state) for
    /// each configuration that occurs, in ket order.
    pub fn split_off(&self, mut pred: impl FnMut(&ModeId) -> bool) -> Vec<(BasisKet, PhotonicState)> {
        let mut groups: BTreeMap<BasisKet, PhotonicState> = BTreeMap::new();
        for ((ket, tag), amp) in &self.terms {
            let (hit, rest) = ket.split(&mut pred);
            groups.entry(hit).or_default().add_term(rest, tag.clone(), *amp);
        }
        groups.into_iter().map(|(k, s)| (k, s.pruned())).filter(|(_, s)| !s.is_empty()).collect()
    }

    /// All paths occupied in any term.
    pub fn occupied_paths(&self) -> BTreeSet<PathId> {
        self.terms.keys().flat_map(|(k, _)| k.paths()).collect()
    }

    pub fn has_probe_tags(&self) -> bool {
        self.terms.keys().any(|(_, t)| !t.is_empty())
    }

    /// Reduced polarization density matrix of the qubits carried on `keep`.
    ///
    /// Every occupied path must carry exactly one photon in every term. The
    /// result has dimension `2^keep.len()`, qubit order following `keep`, H
    /// before V. Photons on other paths, time bins and probe tags are traced.
    pub fn reduced_density(&self, keep: &[PathId]) -> Result<DMatrix<C64>> {
        let all_paths = self.occupied_paths();
        for p in keep {
            if !all_paths.contains(p) {
                return Err(PhotonicError::NonQubitSubsystem(format!("path {p} carries no photon")));
            }
        }
        let dim = 1usize << keep.len();
        // Environment key -> vector over the kept register.
        let mut env: BTreeMap<(BasisKet, Vec<u32>, ProbeTag), Vec<C64>> = BTreeMap::new();
        for ((ket, tag), amp) in &self.terms {
            for p in &all_paths {
                if ket.count_on_path(p) != 1 {
                    return Err(PhotonicError::NonQubitSubsystem(format!(
                        "path {p} holds {} photons in term {ket}",
                        ket.count_on_path(p)
                    )));
                }
            }
            let mut idx = 0usize;
            let mut bins = Vec::with_capacity(keep.len());
            for p in keep {
                let (m, _) = ket.iter().find(|(m, _)| &m.path == p).expect("checked above");
                idx = (idx << 1) | m.pol.index();
                bins.push(m.bin);
            }
            let (_, traced) = ket.split(|m| keep.contains(&m.path));
            let v = env.entry((traced, bins, tag.clone())).or_insert_with(|| vec![c(0.0, 0.0); dim]);
            v[idx] += amp;
        }
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        for v in env.values() {
            for i in 0..dim {
                for j in 0..dim {
                    rho[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
        if tr <= 0.0 {
            return Err(PhotonicError::ZeroNorm);
        }
        Ok(rho / c(tr, 0.0))
    }

    /// Amplitudes (HH, HV, VH, VV) of a pure two-qubit state on `paths`.
    ///
    /// Every term must hold exactly one photon on each of the two paths and
    /// nothing else; time bins are ignored as long as each polarization
    /// pattern is reached by a single term.
    pub fn two_qubit_amplitudes(&self, paths: [&PathId; 2]) -> Result<[C64; 4]> {
        if self.has_probe_tags() {
            return Err(PhotonicError::NonQubitSubsystem("state still entangled with a probe".into()));
        }
        let mut out = [c(0.0, 0.0); 4];
        let mut seen = [false; 4];
        for ((ket, _), amp) in &self.terms {
            if ket.total() != 2 || ket.count_on_path(paths[0]) != 1 || ket.count_on_path(paths[1]) != 1 {
                return Err(PhotonicError::NonQubitSubsystem(format!(
                    "term {ket} is not one photon on each of {} and {}",
                    paths[0], paths[1]
                )));
            }
            let pol = |p: &PathId| ket.iter().find(|(m, _)| &m.path == p).map(|(m, _)| m.pol).unwrap();
            let idx = pol(paths[0]).index() * 2 + pol(paths[1]).index();
            if seen[idx] {
                return Err(PhotonicError::NonQubitSubsystem(format!(
                    "polarization pattern {idx} appears in several time-bin configurations"
                )));
            }
            seen[idx] = true;
            out[idx] = *amp;
        }
        Ok(out)
    }

    /// Concurrence `2|wz - xy|` of a pure two-qubit state on `paths`.
    pub fn concurrence(&self, paths: [&PathId; 2]) -> Result<f64> {
        let n = self.norm_squared();
        if n <= 0.0 {
            return Err(PhotonicError::ZeroNorm);
        }
        let [w, x, y, z] = self.two_qubit_amplitudes(paths)?;
        Ok(((w * z - x * y).norm() * 2.0 / n).min(1.0))
    }

    /// Two-qubit product or entangled state from 4 amplitudes (HH, HV, VH, VV)
    /// on the given paths at time bin `bin`.
    pub fn two_qubit(paths: [&PathId; 2], amps: [C64; 4], bin: u32) -> Self {
        let mut s = Self::empty();
        for (idx, a) in amps.iter().enumerate() {
            let p0 = Pol::from_index(idx >> 1);
            let p1 = Pol::from_index(idx & 1);
            let ket = BasisKet::from_modes([
                ModeId::new(paths[0], p0, bin),
                ModeId::new(paths[1], p1, bin),
            ]);
            s.add_term(ket, ProbeTag::none(), *a);
        }
        s.pruned()
    }
}

impl fmt::Display for PhotonicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for ((k, t), a) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{}⟩", a.re, a.im, k)?;
            if !t.is_empty() {
                write!(f, "{t:?}")?;
            }
        }
        Ok(())
    }
}

/// Polarization amplitudes of one photonic qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitAmplitudes {
    pub h: C64,
    pub v: C64,
}

impl QubitAmplitudes {
    /// Normalizes the given amplitudes; fails on the zero vector.
    pub fn new(h: C64, v: C64) -> Result<Self> {
        let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(PhotonicError::InvalidInput("qubit amplitudes must not both vanish".into()));
        }
        Ok(Self { h: h / n, v: v / n })
    }

    pub fn real(h: f64, v: f64) -> Result<Self> {
        Self::new(c(h, 0.0), c(v, 0.0))
    }

    pub fn h() -> Self {
        Self { h: c(1.0, 0.0), v: c(0.0, 0.0) }
    }

    pub fn v() -> Self {
        Self { h: c(0.0, 0.0), v: c(1.0, 0.0) }
    }

    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self { h: c(s, 0.0), v: c(s, 0.0) }
    }

    pub fn minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self { h: c(s, 0.0), v: c(-s, 0.0) }
    }

    pub fn basis(pol: Pol) -> Self {
        match pol {
            Pol::H => Self::h(),
            Pol::V => Self::v(),
        }
    }

    pub fn as_vector(&self) -> [C64; 2] {
        [self.h, self.v]
    }

    pub fn is_normalized(&self) -> bool {
        (self.h.norm_sqr() + self.v.norm_sqr() - 1.0).abs() < NORM_TOLERANCE
    }
}

/// Kronecker product of two qubits in (HH, HV, VH, VV) order.
pub fn product_amplitudes(first: &QubitAmplitudes, second: &QubitAmplitudes) -> [C64; 4] {
    [first.h * second.h, first.h * second.v, first.v * second.h, first.v * second.v]
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Wootters concurrence of a two-qubit density matrix (4x4, H before V).
pub fn wootters_concurrence(rho: &DMatrix<C64>) -> Result<f64> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(PhotonicError::NonQubitSubsystem(format!("expected 4x4 density matrix, got {}x{}", rho.nrows(), rho.ncols())));
    }
    // sigma_y (x) sigma_y is real: anti-diagonal (-1, 1, 1, -1).
    let mut yy = DMatrix::<C64>::zeros(4, 4);
    for (i, s) in [-1.0, 1.0, 1.0, -1.0].iter().enumerate() {
        yy[(i, 3 - i)] = c(*s, 0.0);
    }
    let eig = rho.clone().symmetric_eigen();
    let purity = (rho * rho).trace().re;
    if (purity - 1.0).abs() < 1e-12 {
        // Pure: the square-root route below loses half the digits.
        let top = eig.eigenvalues.iamax();
        let psi = eig.eigenvectors.column(top);
        return Ok(2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm());
    }
    let tilde = &yy * rho.map(|z| z.conj()) * &yy;
    let sqrt_vals = eig.eigenvalues.map(|l| c(l.max(0.0).sqrt(), 0.0));
    let sqrt_rho = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint();
    let m = &sqrt_rho * tilde * &sqrt_rho;
    let herm = (&m + m.adjoint()) * c(0.5, 0.0);
    let mut l: Vec<f64> = hermitian_eigenvalues(&herm).into_iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

pub(crate) fn matrix2_is_unitary(m: &Matrix2<C64>, tol: f64) -> f64 {
    let prod = m.adjoint() * m;
    let dev = prod - Matrix2::identity();
    let d = dev.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if d > tol {
        d
    } else {
        0.0
    }
}
