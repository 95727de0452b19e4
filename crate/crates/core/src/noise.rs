//! Noisy preparation channels, gate fidelities and Monte-Carlo noisy potentials.

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::fitting::mean_stderr;
use crate::hologron::{interaction, PotentialCurve, PotentialPoint};
use crate::mera::{BulkCoordinate, Circuit, FlipSet, GateSet, GateSource, MeraNetwork, CORE_LEVEL};
use crate::ops::{self, CMat, Pauli};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Random rotations `exp(i Σ θ_S S)` with `θ_S ~ U[0, 2πε)`, or centered on zero.
    ControlError { centered: bool },
    /// Independent `Z` errors on each leg of every gate.
    Dephasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::Parameter(format!("noise strength must be non-negative, got {epsilon}")));
        }
        if kind == NoiseKind::Dephasing && epsilon > 1.0 {
            return Err(Error::Parameter(format!("dephasing strength must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self { kind, epsilon, seed })
    }

    /// Independent generator for one network location and sample.
    pub fn rng(&self, layer: usize, position: usize, sample: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample);
        rng.set_word_pos(((layer as u128) << 40 | (position as u128) << 2 | slot as u128) << 6);
        rng
    }

    /// Applied gate with one sampled error.
    pub fn sample_gate(&self, gate: &CMat, rng: &mut ChaCha8Rng) -> CMat {
        match self.kind {
            NoiseKind::ControlError { centered } => sample_control_gate(gate, self.epsilon, centered, rng),
            NoiseKind::Dephasing => sample_dephased_gate(gate, self.epsilon, rng),
        }
    }
}

/// The 15 non-identity two-qubit Pauli strings.
pub fn two_qubit_paulis() -> Vec<CMat> {
    Pauli::ALL
        .iter()
        .flat_map(|&hi| Pauli::ALL.iter().map(move |&lo| (lo, hi)))
        .filter(|&(lo, hi)| (lo, hi) != (Pauli::I, Pauli::I))
        .map(|(lo, hi)| ops::two_site(lo, hi))
        .collect()
}

/// Control-error sample: the applied gate becomes `exp(-i Σ θ_S S) g`.
pub fn sample_control_gate(gate: &CMat, epsilon: f64, centered: bool, rng: &mut impl Rng) -> CMat {
    if epsilon == 0.0 {
        return gate.clone();
    }
    let width = 2.0 * std::f64::consts::PI * epsilon;
    let mut generator = CMat::zeros(4, 4);
    for s in two_qubit_paulis() {
        let mut theta = rng.gen::<f64>() * width;
        if centered {
            theta -= 0.5 * width;
        }
        generator += ops::scale(&s, C64::new(-theta, 0.0));
    }
    ops::expi_hermitian(&generator) * gate
}

/// Kraus operators of a dephasing channel around a gate.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<CMat>,
    /// Born weights of each branch.
    pub probabilities: Vec<f64>,
}

impl KrausSet {
    /// Largest entry of `Σ K†K - I`.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.operators[0].ncols();
        let mut acc = CMat::zeros(d, d);
        for k in &self.operators {
            acc += k.adjoint() * k;
        }
        ops::max_abs_diff(&acc, &ops::identity(d))
    }
}

const DEPHASING_PATTERNS: [(Pauli, Pauli); 4] = [
    (Pauli::I, Pauli::I),
    (Pauli::Z, Pauli::I),
    (Pauli::I, Pauli::Z),
    (Pauli::Z, Pauli::Z),
];

fn dephasing_amplitudes(epsilon: f64) -> [f64; 4] {
    let cross = (epsilon * (1.0 - epsilon)).sqrt();
    [1.0 - epsilon, cross, cross, epsilon]
}

/// Applied-gate Kraus operators `a_{ab} g (S_a ⊗ S_b)`; the zero-weight branches are dropped.
pub fn dephasing_kraus(epsilon: f64, gate: &CMat) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Parameter(format!("dephasing strength must lie in [0, 1], got {epsilon}")));
    }
    let mut operators = Vec::new();
    let mut probabilities = Vec::new();
    for (amp, (lo, hi)) in dephasing_amplitudes(epsilon).into_iter().zip(DEPHASING_PATTERNS) {
        if amp == 0.0 {
            continue;
        }
        operators.push(ops::scale(&(gate * ops::two_site(lo, hi)), C64::new(amp, 0.0)));
        probabilities.push(amp * amp);
    }
    Ok(KrausSet {
        operators,
        probabilities,
    })
}

/// Closed-form average gate fidelity of the dephasing channel, `(d(1-ε)² + 1)/(d + 1)`.
pub fn dephasing_fidelity(epsilon: f64) -> f64 {
    let d = 4.0;
    (d * (1.0 - epsilon).powi(2) + 1.0) / (d + 1.0)
}

/// One dephasing branch drawn with its Born weight.
pub fn sample_dephased_gate(gate: &CMat, epsilon: f64, rng: &mut impl Rng) -> CMat {
    if epsilon == 0.0 {
        return gate.clone();
    }
    let amps = dephasing_amplitudes(epsilon);
    let mut r: f64 = rng.gen();
    for (amp, (lo, hi)) in amps.into_iter().zip(DEPHASING_PATTERNS) {
        let p = amp * amp;
        if r < p {
            return gate * ops::two_site(lo, hi);
        }
        r -= p;
    }
    gate * ops::two_site(Pauli::Z, Pauli::Z)
}

/// `(|tr(g† g')|² + d) / (d (d + 1))`.
pub fn gate_fidelity(ideal: &CMat, actual: &CMat) -> f64 {
    let d = ideal.nrows() as f64;
    let t = ops::trace(&(ideal.adjoint() * actual));
    (t.norm_sqr() + d) / (d * (d + 1.0))
}

/// Monte-Carlo average gate fidelity with its standard error.
pub fn fidelity_estimate(model: &NoiseModel, gate: &CMat, samples: usize) -> (f64, f64) {
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = model.rng(0, 0, i, 0);
            gate_fidelity(gate, &model.sample_gate(gate, &mut rng))
        })
        .collect();
    mean_stderr(&values)
}

/// Gates sampled independently at every network location.
pub struct NoisyGates {
    /// `isometries[layer][parent] = [v, ṽ]`.
    isometries: Vec<Vec<[CMat; 2]>>,
    disentanglers: Vec<Vec<CMat>>,
}

impl NoisyGates {
    pub fn sample(gates: &GateSet, depth: usize, model: &NoiseModel, sample: u64) -> Self {
        let layers = |f: &(dyn Fn(usize, usize) -> CMat + Sync)| -> Vec<Vec<CMat>> {
            (0..depth)
                .map(|layer| {
                    if layer < CORE_LEVEL {
                        return Vec::new();
                    }
                    (0..1usize << layer).map(|pos| f(layer, pos)).collect()
                })
                .collect()
        };
        let ws = layers(&|layer, pos| model.sample_gate(gates.w(), &mut model.rng(layer, pos, sample, 0)));
        let isometries = ws
            .into_iter()
            .map(|layer| {
                layer
                    .into_iter()
                    .map(|w| {
                        let v = CMat::from_fn(4, 2, |r, c| w[(r, c)]);
                        let vt = CMat::from_fn(4, 2, |r, c| w[(r, c + 2)]);
                        [v, vt]
                    })
                    .collect()
            })
            .collect();
        let disentanglers = layers(&|layer, pos| model.sample_gate(gates.u(), &mut model.rng(layer, pos, sample, 1)));
        Self {
            isometries,
            disentanglers,
        }
    }
}

impl GateSource for NoisyGates {
    fn isometry(&self, layer: usize, parent: usize, flipped: bool) -> &CMat {
        &self.isometries[layer][parent][flipped as usize]
    }

    fn disentangler(&self, layer: usize, pair: usize) -> &CMat {
        &self.disentanglers[layer][pair]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyPoint {
    pub x1: BulkCoordinate,
    pub x2: BulkCoordinate,
    pub e1_mean: f64,
    pub e2_mean: f64,
    pub v_mean: f64,
    pub v_stderr: f64,
    /// `V̄ / min(Ē_1h(x1), Ē_1h(x2))`.
    pub collapsed: f64,
    pub collapsed_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyCurve {
    pub depth: usize,
    pub model: NoiseModel,
    pub samples: usize,
    pub points: Vec<NoisyPoint>,
}

impl NoisyCurve {
    /// Sample means as an ordinary potential curve.
    pub fn mean_curve(&self) -> PotentialCurve {
        PotentialCurve {
            depth: self.depth,
            points: self
                .points
                .iter()
                .map(|p| PotentialPoint {
                    x1: p.x1,
                    x2: p.x2,
                    e1: p.e1_mean,
                    e2: p.e2_mean,
                    pair: p.e1_mean + p.e2_mean + p.v_mean,
                    v: p.v_mean,
                    collapsed: p.collapsed,
                })
                .collect(),
        }
    }
}

struct SampleValues {
    singles: Vec<f64>,
    pairs: Vec<f64>,
}

/// Monte-Carlo noisy interaction for every pair; each sample is one pure noisy network.
///
/// The core keeps the noiseless optimum of `net`.
pub fn noisy_potential(
    net: &MeraNetwork,
    model: &NoiseModel,
    pairs: &[(BulkCoordinate, BulkCoordinate)],
    samples: usize,
) -> Result<NoisyCurve> {
    if samples == 0 {
        return Err(Error::Parameter("at least one sample is required".into()));
    }
    let depth = net.depth();
    let mut singles: Vec<BulkCoordinate> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    singles.sort();
    singles.dedup();
    for &(a, b) in pairs {
        FlipSet::new(&[a, b], depth)?;
    }
    let per_sample = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let gates = NoisyGates::sample(net.gates(), depth, model, i);
            let engine = Engine::new(Circuit {
                depth,
                core: net.core(),
                gates: &gates,
            });
            let single_vals = singles
                .iter()
                .map(|&x| Ok(engine.energy_shift(&FlipSet::new(&[x], depth)?)))
                .collect::<Result<Vec<f64>>>()?;
            let pair_vals = pairs
                .iter()
                .map(|&(a, b)| interaction(&engine, a, b))
                .collect::<Result<Vec<f64>>>()?;
            Ok(SampleValues {
                singles: single_vals,
                pairs: pair_vals,
            })
        })
        .collect::<Result<Vec<SampleValues>>>()?;
    let single_mean: Vec<f64> = (0..singles.len())
        .map(|k| mean_stderr(&per_sample.iter().map(|s| s.singles[k]).collect::<Vec<_>>()).0)
        .collect();
    let lookup = |x: BulkCoordinate| single_mean[singles.binary_search(&x).expect("collected coordinate")];
    let points = pairs
        .iter()
        .enumerate()
        .map(|(k, &(x1, x2))| {
            let (v_mean, v_stderr) = mean_stderr(&per_sample.iter().map(|s| s.pairs[k]).collect::<Vec<_>>());
            let (e1_mean, e2_mean) = (lookup(x1), lookup(x2));
            let b = e1_mean.min(e2_mean);
            NoisyPoint {
                x1,
                x2,
                e1_mean,
                e2_mean,
                v_mean,
                v_stderr,
                collapsed: v_mean / b,
                collapsed_stderr: v_stderr / b.abs(),
            }
        })
        .collect();
    Ok(NoisyCurve {
        depth,
        model: *model,
        samples,
        points,
    })
}

/// Pairs `rho1 < rho2` on the ancilla-leg lineage through `(2, base)` with radii in `[lo, hi]`.
pub fn radial_pairs(depth: usize, lo: usize, hi: usize, base: usize) -> Result<Vec<(BulkCoordinate, BulkCoordinate)>> {
    let root = BulkCoordinate::new(CORE_LEVEL, base, depth)?;
    if lo < CORE_LEVEL || hi >= depth || lo > hi {
        return Err(Error::Parameter(format!("radial range [{lo}, {hi}] is outside [{CORE_LEVEL}, {}]", depth - 1)));
    }
    Ok((lo..=hi)
        .flat_map(|r1| (r1 + 1..=hi).map(move |r2| (root.lineage_at(r1), root.lineage_at(r2))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hologron::{radial_potential, RadialRange};
    use crate::mera::analytic_gates;

    #[test]
    fn zero_strength_is_ideal() {
        let g = analytic_gates();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_control_gate(g.u(), 0.0, false, &mut rng), g.u().clone());
        assert_eq!(sample_dephased_gate(g.u(), 0.0, &mut rng), g.u().clone());
        let k = dephasing_kraus(0.0, g.u()).unwrap();
        assert_eq!(k.operators.len(), 1);
        assert_eq!(k.operators[0], g.u().clone());
    }

    #[test]
    fn sampled_gates_are_unitary() {
        let g = analytic_gates();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            for centered in [false, true] {
                let s = sample_control_gate(g.w(), 0.05, centered, &mut rng);
                assert!(ops::max_abs_diff(&(s.adjoint() * &s), &ops::identity(4)) < 1e-12);
            }
        }
    }

    #[test]
    fn kraus_completeness() {
        let g = analytic_gates();
        for eps in [0.0, 0.0025, 0.3, 1.0] {
            assert!(dephasing_kraus(eps, g.u()).unwrap().completeness_defect() < 1e-12);
        }
        assert!(dephasing_kraus(1.5, g.u()).is_err());
        assert!(NoiseModel::new(NoiseKind::Dephasing, -0.1, 0).is_err());
    }

    #[test]
    fn dephasing_closed_form_values() {
        assert!((dephasing_fidelity(0.005) - 0.99202).abs() < 1e-5);
        assert!((dephasing_fidelity(0.0037) - 0.99409095).abs() < 1e-7);
        assert!((dephasing_fidelity(0.0025) - 0.996005).abs() < 1e-6);
    }

    #[test]
    fn dephasing_monte_carlo_matches_closed_form() {
        let g = analytic_gates();
        let model = NoiseModel::new(NoiseKind::Dephasing, 0.05, 3).unwrap();
        let (f, se) = fidelity_estimate(&model, g.u(), 10_000);
        assert!((f - dephasing_fidelity(0.05)).abs() < 3.0 * se, "{f} {se}");
    }

    #[test]
    fn control_error_fidelity() {
        let g = analytic_gates();
        let model = NoiseModel::new(NoiseKind::ControlError { centered: false }, 6e-3, 11).unwrap();
        let (f, se) = fidelity_estimate(&model, g.u(), 4000);
        assert!((f - 0.9944).abs() < 3.0 * se + 2e-4, "{f} {se}");
    }

    #[test]
    fn location_streams_are_reproducible_and_distinct() {
        let model = NoiseModel::new(NoiseKind::ControlError { centered: false }, 0.01, 5).unwrap();
        let a: f64 = model.rng(3, 4, 2, 0).gen();
        let b: f64 = model.rng(3, 4, 2, 0).gen();
        let c: f64 = model.rng(3, 5, 2, 0).gen();
        let d: f64 = model.rng(3, 4, 3, 0).gen();
        assert_eq!(a, b);
        assert!(a != c && a != d);
    }

    #[test]
    fn noiseless_limit_matches_clean_potential() {
        let net = MeraNetwork::new(6).unwrap();
        let engine = Engine::new(net.circuit());
        let clean = radial_potential(&engine, RadialRange::full(6), 0).unwrap();
        let model = NoiseModel::new(NoiseKind::ControlError { centered: false }, 0.0, 1).unwrap();
        let pairs = radial_pairs(6, 2, 5, 0).unwrap();
        let noisy = noisy_potential(&net, &model, &pairs, 2).unwrap();
        for (p, q) in clean.points.iter().zip(&noisy.points) {
            assert_eq!((p.x1, p.x2), (q.x1, q.x2));
            assert!((p.v - q.v_mean).abs() < 1e-10);
            assert_eq!(q.v_stderr, 0.0);
        }
    }

    #[test]
    fn noisy_samples_are_reproducible() {
        let net = MeraNetwork::new(5).unwrap();
        let model = NoiseModel::new(NoiseKind::Dephasing, 0.05, 9).unwrap();
        let pairs = radial_pairs(5, 2, 4, 0).unwrap();
        let a = noisy_potential(&net, &model, &pairs, 4).unwrap();
        let b = noisy_potential(&net, &model, &pairs, 4).unwrap();
        assert_eq!(a, b);
    }
}
