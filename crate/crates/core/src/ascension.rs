//! Ascension superoperators, their scaling spectra and the conformal data read from them.

use crate::error::{Error, Result};
use crate::lattice;
use crate::mera::GateSet;
use crate::ops::{self, CMat, Pauli, ONE, ZERO};
use faer::linalg::solvers::DenseSolveCore;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

pub const MIN_SITES: usize = 3;
pub const MAX_SITES: usize = 6;
/// Width in `-log2|λ|` of a group of equal scaling dimension.
pub const GROUP_TOL: f64 = 0.1;
/// Relative singular value below which a direction belongs to the kernel.
const KERNEL_TOL: f64 = 1e-9;
/// Eigenvalues closer than this are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-6;
/// Smallest singular value of a cluster's eigenvectors below which it is defective.
const DEFECTIVE_OVERLAP: f64 = 1e-4;
/// Singular value treated as zero in a generalized eigenspace.
const NULL_TOL: f64 = 1e-10;

/// Which window placements are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Single(usize),
    Average,
    EvenSelective,
    OddSelective,
}

impl Variant {
    pub fn placements(&self, k: usize) -> Result<Vec<usize>> {
        let all = 0..k - 1;
        let js: Vec<usize> = match self {
            Variant::Single(j) => {
                if *j >= k - 1 {
                    return Err(Error::Parameter(format!("placement {j} out of range for k = {k}")));
                }
                vec![*j]
            }
            Variant::Average => all.collect(),
            Variant::EvenSelective => all.filter(|j| j % 2 == 0).collect(),
            Variant::OddSelective => all.filter(|j| j % 2 == 1).collect(),
        };
        Ok(js)
    }

    pub fn label(&self) -> String {
        match self {
            Variant::Single(j) => format!("single{j}"),
            Variant::Average => "average".into(),
            Variant::EvenSelective => "even".into(),
            Variant::OddSelective => "odd".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "average" | "avg" => Ok(Variant::Average),
            "even" => Ok(Variant::EvenSelective),
            "odd" => Ok(Variant::OddSelective),
            other => other
                .strip_prefix("single")
                .and_then(|j| j.parse().ok())
                .map(Variant::Single)
                .ok_or_else(|| Error::Parameter(format!("unknown superoperator variant {other:?}"))),
        }
    }
}

/// Linear map on vectorized `k`-site operators; `vec(O)[o 2^k + o'] = O[o, o']`.
#[derive(Debug, Clone)]
pub struct Superoperator {
    pub k: usize,
    pub variant: Variant,
    pub matrix: CMat,
}

/// `k` isometries followed by the `k - 1` inner disentanglers, as a `4^k x 2^k` matrix.
fn ascension_circuit(k: usize, gates: &GateSet) -> CMat {
    let n = 2 * k;
    let cols: Vec<Vec<C64>> = (0..1usize << k)
        .into_par_iter()
        .map(|b| {
            let mut psi = vec![ONE];
            for p in 0..k {
                let col: Vec<C64> = (0..4).map(|r| gates.v()[(r, (b >> p) & 1)]).collect();
                let mut next = vec![ZERO; psi.len() * 4];
                for (hi, c) in col.iter().enumerate() {
                    for (lo, a) in psi.iter().enumerate() {
                        next[lo + psi.len() * hi] = *a * *c;
                    }
                }
                psi = next;
            }
            for i in 0..k - 1 {
                ops::apply_2q(&mut psi, 2 * i + 1, 2 * i + 2, gates.u());
            }
            psi
        })
        .collect();
    CMat::from_fn(1 << n, 1 << k, |r, c| cols[c][r])
}

/// Ascension for the window of child sites `j + 1 ..= j + k`.
fn single_placement(m: &CMat, k: usize, j: usize) -> CMat {
    let d = 1usize << k;
    let low = j + 1;
    let env = d; // 2^(2k - k) traced configurations
    // P[(b, a), (o, p)] = M[(b, o, a), p]
    let p_mat = CMat::from_fn(env, d * d, |ba, op| {
        let (b, a) = (ba >> low, ba & ((1 << low) - 1));
        let (o, p) = (op / d, op % d);
        m[(a | (o << low) | (b << (low + k)), p)]
    });
    let g = p_mat.adjoint() * &p_mat;
    // S[(p, r), (o, q)] = G[(o, p), (q, r)]
    CMat::from_fn(d * d, d * d, |pr, oq| {
        let (p, r) = (pr / d, pr % d);
        let (o, q) = (oq / d, oq % d);
        g[(o * d + p, q * d + r)]
    })
}

pub fn build_superoperator(k: usize, variant: Variant, gates: &GateSet) -> Result<Superoperator> {
    if !(MIN_SITES..=MAX_SITES).contains(&k) {
        return Err(Error::Capacity(format!(
            "superoperators are supported for {MIN_SITES} <= k <= {MAX_SITES}, got {k}"
        )));
    }
    let js = variant.placements(k)?;
    if js.is_empty() {
        return Err(Error::Parameter(format!("variant {} has no placements at k = {k}", variant.label())));
    }
    let m = ascension_circuit(k, gates);
    let parts: Vec<CMat> = js.par_iter().map(|&j| single_placement(&m, k, j)).collect();
    let dim = 1usize << (2 * k);
    let mut matrix = CMat::zeros(dim, dim);
    for part in &parts {
        matrix += part;
    }
    let matrix = ops::scale(&matrix, C64::new(1.0 / js.len() as f64, 0.0));
    Ok(Superoperator { k, variant, matrix })
}

/// Loads a cached superoperator from `dir`, building and storing it when absent.
pub fn cached_superoperator(k: usize, variant: Variant, gates: &GateSet, dir: &Path) -> Result<Superoperator> {
    let path = cache_path(dir, k, variant, gates);
    if let Ok(bytes) = std::fs::read(&path) {
        let dim = 1usize << (2 * k);
        if bytes.len() == dim * dim * 16 {
            let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
            let mut matrix = CMat::zeros(dim, dim);
            for r in 0..dim {
                for c in 0..dim {
                    let re = vals.next().unwrap();
                    let im = vals.next().unwrap();
                    matrix[(r, c)] = C64::new(re, im);
                }
            }
            return Ok(Superoperator { k, variant, matrix });
        }
    }
    let s = build_superoperator(k, variant, gates)?;
    let mut bytes = Vec::with_capacity(s.matrix.nrows() * s.matrix.ncols() * 16);
    for r in 0..s.matrix.nrows() {
        for c in 0..s.matrix.ncols() {
            bytes.extend_from_slice(&s.matrix[(r, c)].re.to_le_bytes());
            bytes.extend_from_slice(&s.matrix[(r, c)].im.to_le_bytes());
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::Parameter(format!("cache directory: {e}")))?;
    std::fs::write(&path, bytes).map_err(|e| Error::Parameter(format!("cache write: {e}")))?;
    Ok(s)
}

fn cache_path(dir: &Path, k: usize, variant: Variant, gates: &GateSet) -> PathBuf {
    use std::hash::{Hash, Hasher};
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    for m in [gates.w(), gates.u()] {
        for r in 0..4 {
            for c in 0..4 {
                m[(r, c)].re.to_bits().hash(&mut hasher);
                m[(r, c)].im.to_bits().hash(&mut hasher);
            }
        }
    }
    dir.join(format!("ascension-k{k}-{}-{:016x}.bin", variant.label(), hasher.finish()))
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        1 << self.k
    }

    pub fn apply(&self, op: &CMat) -> CMat {
        let d = self.dim();
        let v = vectorize(op);
        let out = &self.matrix * &v;
        CMat::from_fn(d, d, |o, q| out[(o * d + q, 0)])
    }

    /// `A^steps[op]`.
    pub fn ascend_iterated(&self, op: &CMat, steps: usize) -> CMat {
        let mut cur = op.clone();
        for _ in 0..steps {
            cur = self.apply(&cur);
        }
        cur
    }

    /// Largest `|S_ab|` linking different charge sectors.
    pub fn sector_leakage(&self) -> f64 {
        let d = self.dim();
        let parity = |x: usize| ((x / d).count_ones() + (x % d).count_ones()) % 2;
        let n = d * d;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                if parity(r) != parity(c) {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        Ok(self.charged_eigenvalues()?.into_iter().map(|(l, _)| l).collect())
    }

    /// Eigenvalues with the charge of their sector, sorted by scaling dimension.
    pub fn charged_eigenvalues(&self) -> Result<Vec<(C64, i8)>> {
        let mut out = Vec::new();
        for (sector, charge) in [(0, 1i8), (1, -1i8)] {
            let idx = sector_indices(self.dim(), sector);
            let block = CMat::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
            let values = block.eigenvalues().map_err(|e| Error::Solver(format!("{e:?}")))?;
            out.extend(values.into_iter().map(|l| (l, charge)));
        }
        out.sort_by(|a, b| dimension_of(a.0).total_cmp(&dimension_of(b.0)));
        Ok(out)
    }

    /// Full eigendecomposition, one charge sector at a time.
    pub fn eigendecompose(&self) -> Result<ScalingSpectrum> {
        let d = self.dim();
        let n = d * d;
        let mut entries = Vec::with_capacity(n);
        let mut warnings = Vec::new();
        let mut worst_condition = 0.0f64;
        for (sector, charge) in [(0usize, 1i8), (1, -1)] {
            let idx = sector_indices(d, sector);
            let m = idx.len();
            let block = CMat::from_fn(m, m, |r, c| self.matrix[(idx[r], idx[c])]);
            let basis = sector_basis(&block)?;
            let (vals, r) = (basis.values, basis.right);
            let rinv = r.partial_piv_lu().inverse();
            let condition = ops::frobenius(&r) * ops::frobenius(&rinv) / m as f64;
            worst_condition = worst_condition.max(condition);
            warnings.extend(basis.warnings);
            for j in 0..m {
                let mut right = vec![ZERO; n];
                let mut left = vec![ZERO; n];
                for (i, &g) in idx.iter().enumerate() {
                    right[g] = r[(i, j)];
                    left[g] = rinv[(j, i)];
                }
                entries.push(SpectrumEntry {
                    lambda: vals[j],
                    delta: dimension_of(vals[j]),
                    charge,
                    right,
                    left,
                });
            }
        }
        entries.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        let mut spectrum = ScalingSpectrum {
            k: self.k,
            variant: self.variant,
            entries,
            condition: worst_condition,
            warnings,
        };
        spectrum.normalize_identity()?;
        Ok(spectrum)
    }
}

/// Eigenvalues with a basis of right vectors: eigenvectors, or generalized
/// eigenspace bases for defective clusters.
struct SectorBasis {
    values: Vec<C64>,
    right: CMat,
    warnings: Vec<Error>,
}

fn solver_err(e: impl std::fmt::Debug) -> Error {
    Error::Solver(format!("{e:?}"))
}

fn normalize_columns(m: &mut CMat) {
    for j in 0..m.ncols() {
        let nrm = (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] /= nrm;
            }
        }
    }
}

fn sector_basis(block: &CMat) -> Result<SectorBasis> {
    let m = block.nrows();
    let mut warnings = Vec::new();
    // split off the kernel, which is non-defective when rank S = rank S^2
    let svd = block.svd().map_err(solver_err)?;
    let sv = svd.S().column_vector();
    let top = sv[0].re;
    let rank = (0..m).filter(|&i| sv[i].re > KERNEL_TOL * top).count();
    let (range, reduced) = if rank < m {
        let range = svd.U().subcols(0, rank).to_owned();
        let reduced = range.adjoint() * block * &range;
        let leak = ops::frobenius(&(block * &range - &range * &reduced));
        if leak > 1e-8 * top {
            return Err(Error::Solver(format!("range of the superoperator is not invariant ({leak:.3e})")));
        }
        (range, reduced)
    } else {
        (ops::identity(m), block.clone())
    };
    let eig = reduced.eigen().map_err(solver_err)?;
    let mut values: Vec<C64> = (0..rank).map(|i| eig.S().column_vector()[i]).collect();
    let mut y = eig.U().to_owned();
    normalize_columns(&mut y);
    for cluster in clusters(&values) {
        if cluster.len() < 2 {
            continue;
        }
        let yc = CMat::from_fn(rank, cluster.len(), |i, j| y[(i, cluster[j])]);
        let svals = yc.singular_values().map_err(solver_err)?;
        let smallest = svals[svals.len() - 1];
        if smallest > DEFECTIVE_OVERLAP {
            continue;
        }
        let a = cluster.len();
        let mean = cluster.iter().map(|&i| values[i]).sum::<C64>() / a as f64;
        let shifted = &reduced - ops::scale(&ops::identity(rank), mean);
        let mut power = ops::identity(rank);
        let mut found = None;
        for _ in 0..a {
            power = &power * &shifted;
            let psvd = power.svd().map_err(solver_err)?;
            let ps = psvd.S().column_vector();
            let null = (0..rank).filter(|&i| ps[i].re < NULL_TOL).count();
            if null >= a {
                found = Some(psvd.V().subcols(rank - a, a).to_owned());
                break;
            }
        }
        let v = found.ok_or_else(|| Error::SpectrumDegeneracy {
            cluster: vec![dimension_of(mean); a],
            condition: 1.0 / smallest,
        })?;
        for (t, &col) in cluster.iter().enumerate() {
            for i in 0..rank {
                y[(i, col)] = v[(i, t)];
            }
            values[col] = mean;
        }
        warnings.push(Error::SpectrumDegeneracy {
            cluster: vec![dimension_of(mean); a],
            condition: 1.0 / smallest,
        });
    }
    let lifted = &range * &y;
    let kernel = m - rank;
    let mut right = CMat::zeros(m, m);
    for j in 0..rank {
        for i in 0..m {
            right[(i, j)] = lifted[(i, j)];
        }
    }
    for j in 0..kernel {
        for i in 0..m {
            right[(i, rank + j)] = svd.V()[(i, rank + j)];
        }
    }
    values.extend(std::iter::repeat(ZERO).take(kernel));
    normalize_columns(&mut right);
    Ok(SectorBasis { values, right, warnings })
}

/// Groups eigenvalues closer than `CLUSTER_TOL`, transitively.
fn clusters(values: &[C64]) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() < CLUSTER_TOL {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut label, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// `-log2 |λ|`.
pub fn dimension_of(lambda: C64) -> f64 {
    -lambda.norm().log2()
}

fn sector_indices(d: usize, sector: usize) -> Vec<usize> {
    (0..d * d)
        .filter(|x| ((x / d).count_ones() + (x % d).count_ones()) as usize % 2 == sector)
        .collect()
}

pub fn vectorize(op: &CMat) -> CMat {
    let d = op.nrows();
    CMat::from_fn(d * d, 1, |i, _| op[(i / d, i % d)])
}

fn unvec(v: &[C64], d: usize) -> CMat {
    CMat::from_fn(d, d, |o, q| v[o * d + q])
}

#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    pub lambda: C64,
    pub delta: f64,
    /// `+1` when the operator commutes with `Z` on every site.
    pub charge: i8,
    right: Vec<C64>,
    left: Vec<C64>,
}

impl SpectrumEntry {
    pub fn right_operator(&self) -> CMat {
        let d = (self.right.len() as f64).sqrt() as usize;
        unvec(&self.right, d)
    }

    /// Left operator with `tr(φ^L O) = Σ left · vec(O)`.
    pub fn left_operator(&self) -> CMat {
        let d = (self.left.len() as f64).sqrt() as usize;
        unvec(&self.left, d).transpose().to_owned()
    }

    /// `tr(φ^L op)`.
    pub fn overlap(&self, op: &CMat) -> C64 {
        let d = op.nrows();
        (0..d * d).map(|i| self.left[i] * op[(i / d, i % d)]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ScalingSpectrum {
    pub k: usize,
    pub variant: Variant,
    pub entries: Vec<SpectrumEntry>,
    /// Worst per-sector condition estimate of the eigenbasis.
    pub condition: f64,
    pub warnings: Vec<Error>,
}

/// An eigenvalue cluster of (approximately) equal scaling dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionGroup {
    pub delta: f64,
    pub members: Vec<usize>,
}

impl ScalingSpectrum {
    fn normalize_identity(&mut self) -> Result<()> {
        let d = 1usize << self.k;
        let id_vec: Vec<C64> = (0..d * d).map(|i| if i / d == i % d { ONE } else { ZERO }).collect();
        let (best, _) = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.charge == 1)
            .map(|(i, e)| (i, ops::inner(&e.right, &id_vec).norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let e = &mut self.entries[best];
        let scale = e.right[0];
        if scale.norm() < 1e-12 {
            return Err(Error::Solver("no identity eigenoperator".into()));
        }
        e.right.iter_mut().for_each(|z| *z /= scale);
        e.left.iter_mut().for_each(|z| *z *= scale);
        let entry = self.entries.remove(best);
        self.entries.insert(0, entry);
        Ok(())
    }

    pub fn dimensions(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.delta).collect()
    }

    pub fn identity(&self) -> &SpectrumEntry {
        &self.entries[0]
    }

    /// Largest `|tr(φ^L_a φ^R_b) - δ_ab|`.
    pub fn biorthonormality_residual(&self) -> f64 {
        let n = self.entries.len();
        let lm = CMat::from_fn(n, n, |a, i| self.entries[a].left[i]);
        let rm = CMat::from_fn(n, n, |i, b| self.entries[b].right[i]);
        let prod = lm * rm;
        ops::max_abs_diff(&prod, &ops::identity(n))
    }

    /// Entries within `tol` of `delta`, optionally restricted to one charge.
    pub fn group(&self, delta: f64, tol: f64, charge: Option<i8>) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| (e.delta - delta).abs() < tol && charge.map_or(true, |c| c == e.charge))
            .map(|(i, _)| i)
            .collect()
    }

    /// Projection of `op` onto the right eigenoperators at dimension `delta`.
    pub fn conformal_project(&self, op: &CMat, delta: f64) -> Result<CMat> {
        let members = self.group(delta, GROUP_TOL, None);
        if members.is_empty() {
            return Err(Error::NoSuchDimension(delta));
        }
        Ok(self.project_onto(&members, op))
    }

    fn project_onto(&self, members: &[usize], op: &CMat) -> CMat {
        let d = op.nrows();
        let mut out = CMat::zeros(d, d);
        for &a in members {
            let c = self.entries[a].overlap(op);
            out += ops::scale(&self.entries[a].right_operator(), c);
        }
        out
    }

    /// Clusters of scaling dimensions, greedily merged within `tol` of the cluster start.
    pub fn grouped(&self, tol: f64) -> Vec<DimensionGroup> {
        let mut groups: Vec<DimensionGroup> = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if (e.delta - g.delta).abs() < tol => g.members.push(i),
                _ => groups.push(DimensionGroup {
                    delta: e.delta,
                    members: vec![i],
                }),
            }
        }
        for g in &mut groups {
            g.delta = g.members.iter().map(|&i| self.entries[i].delta).sum::<f64>() / g.members.len() as f64;
        }
        groups
    }
}

/// Conformally projected stress tensors and energy descendants with their duals.
#[derive(Debug, Clone)]
pub struct LabeledOperators {
    /// `T`, `T̄`, `∂ε`, `∂̄ε`.
    pub right: [CMat; 4],
    pub left: [CMat; 4],
    /// Embedded energy density used for the trials.
    pub h: CMat,
    pub group: Vec<usize>,
}

pub const LABELS: [&str; 4] = ["T", "Tbar", "d_eps", "dbar_eps"];

/// The even three-site scaling operator at dimension one, unit norm, phase fixed.
pub fn energy_operator(spectrum: &ScalingSpectrum) -> Result<CMat> {
    let members = spectrum.group(1.0, GROUP_TOL, Some(1));
    let &first = members.first().ok_or(Error::NoSuchDimension(1.0))?;
    let mut op = spectrum.entries[first].right_operator();
    let nrm = ops::frobenius(&op);
    let mut pivot = ZERO;
    for r in 0..op.nrows() {
        for c in 0..op.ncols() {
            if op[(r, c)].norm() > pivot.norm() + 1e-12 {
                pivot = op[(r, c)];
            }
        }
    }
    let phase = pivot.conj() / pivot.norm();
    op = ops::scale(&op, phase / nrm);
    Ok(op)
}

/// Koo–Saleur trials and discrete energy derivatives, projected to dimension two.
///
/// `spectrum` acts on five sites; `eps3` is the three-site energy operator.
pub fn extract_stress_and_descendants(spectrum: &ScalingSpectrum, eps3: &CMat) -> Result<LabeledOperators> {
    let k = spectrum.k;
    if k != 5 {
        return Err(Error::Parameter(format!("stress extraction uses five-site operators, got k = {k}")));
    }
    let group = spectrum.group(2.0, GROUP_TOL, None);
    if group.len() < 4 {
        return Err(Error::Degeneracy {
            dimension: 2.0,
            expected: 4,
            found: group.len(),
        });
    }
    let h3 = lattice::energy_density();
    let h_at = |offset: usize| ops::embed(&h3, 3, offset, k);
    let h = h_at(1);
    let p = ops::scale(&ops::commutator(&h, &h_at(0)), ops::I);
    let half = C64::new(0.5, 0.0);
    let t_trial = ops::scale(&(&h + &p), half);
    let tbar_trial = ops::scale(&(&h - &p), half);
    let e1 = ops::embed(eps3, 3, 1, k);
    let e2 = ops::embed(eps3, 3, 2, k);
    let dx = &e2 - &e1;
    let local_h = h_at(0) + h_at(1) + h_at(2);
    let dt = ops::scale(&ops::commutator(&local_h, &e1), ops::I);
    let trials = [t_trial, tbar_trial, &dx + &dt, &dx - &dt];
    let right: Vec<CMat> = trials.iter().map(|t| spectrum.project_onto(&group, t)).collect();
    // duals inside the group: M[g, b] = tr(L_g R_b)
    let g = group.len();
    let m = CMat::from_fn(g, 4, |gi, b| spectrum.entries[group[gi]].overlap(&right[b]));
    let gram = m.adjoint() * &m;
    let gram_inv = gram.partial_piv_lu().inverse();
    let pinv = &gram_inv * m.adjoint();
    let cond = ops::frobenius(&gram) * ops::frobenius(&gram_inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Conditioning(cond));
    }
    let left: Vec<CMat> = (0..4)
        .map(|b| {
            let mut acc = CMat::zeros(1 << k, 1 << k);
            for (gi, &a) in group.iter().enumerate() {
                acc += ops::scale(&spectrum.entries[a].left_operator(), pinv[(b, gi)]);
            }
            acc
        })
        .collect();
    Ok(LabeledOperators {
        right: [right[0].clone(), right[1].clone(), right[2].clone(), right[3].clone()],
        left: [left[0].clone(), left[1].clone(), left[2].clone(), left[3].clone()],
        h,
        group,
    })
}

/// The flip operator on a four-site boundary window: `(u⊗u) w(1⊗X)w† (u⊗u)†`.
pub fn flip_operator(gates: &GateSet) -> CMat {
    let x_anc = ops::two_site(Pauli::I, Pauli::X);
    let mid = gates.w() * &x_anc * gates.w().adjoint();
    let uu = ops::kron(gates.u(), gates.u());
    &uu * ops::embed(&mid, 2, 1, 4) * uu.adjoint()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub label: String,
    pub delta: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub c_t: f64,
    pub c_tbar: f64,
    /// `(1/π) c_T tr(φ_1^L X̃ φ_{T+T̄} X̃)`, the analytic rest energy `mc²/2`.
    pub rest_energy: f64,
    pub entries: Vec<CoefficientEntry>,
}

impl CoefficientTable {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.c)
    }

    /// `C_Δ`: sum of coefficients within `GROUP_TOL` of `delta`.
    pub fn grouped(&self, delta: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| (e.delta - delta).abs() < GROUP_TOL)
            .map(|e| e.c)
            .sum()
    }
}

/// Offsets of the flip operator inside the five-site window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipPlacement {
    pub first: usize,
    pub second: usize,
}

impl Default for FlipPlacement {
    fn default() -> Self {
        Self { first: 0, second: 0 }
    }
}

pub fn coefficient_table(
    spectrum: &ScalingSpectrum,
    labeled: &LabeledOperators,
    gates: &GateSet,
    placement: FlipPlacement,
) -> Result<CoefficientTable> {
    let k = spectrum.k;
    if labeled.group.len() < 4 {
        return Err(Error::LabelingRequired);
    }
    let xt = flip_operator(gates);
    let x1 = ops::embed(&xt, 4, placement.first, k);
    let x2 = ops::embed(&xt, 4, placement.second, k);
    let c_t = ops::trace_product(&labeled.left[0], &labeled.h).re;
    let c_tbar = ops::trace_product(&labeled.left[1], &labeled.h).re;
    let stress = &labeled.right[0] + &labeled.right[1];
    let sandwiched = &x1 * &stress * &x1;
    let id_left = spectrum.identity().left_operator();
    let rest_energy = c_t * ops::trace_product(&id_left, &sandwiched).re / PI;
    let coefficient = |left: &CMat, right: &CMat, stress_like: bool| -> f64 {
        let first = ops::trace_product(left, &sandwiched).re - if stress_like { 1.0 } else { 0.0 };
        let second = ops::trace_product(&id_left, &(&x2 * right * &x2)).re;
        c_t * first * second / PI
    };
    let mut entries = Vec::new();
    let eps_members = spectrum.group(1.0, GROUP_TOL, Some(1));
    if let Some(&e) = eps_members.first() {
        let entry = &spectrum.entries[e];
        entries.push(CoefficientEntry {
            label: "eps".into(),
            delta: 1.0,
            c: coefficient(&entry.left_operator(), &entry.right_operator(), false),
        });
    }
    for (b, label) in LABELS.iter().enumerate() {
        entries.push(CoefficientEntry {
            label: (*label).into(),
            delta: 2.0,
            c: coefficient(&labeled.left[b], &labeled.right[b], b < 2),
        });
    }
    Ok(CoefficientTable {
        c_t,
        c_tbar,
        rest_energy,
        entries,
    })
}

/// Thermodynamic energy density `tr(φ_1^L h)` from the averaged three-site spectrum.
pub fn fixed_point_energy_density(spectrum: &ScalingSpectrum) -> Result<f64> {
    if spectrum.k != 3 {
        return Err(Error::Parameter("energy density uses the three-site spectrum".into()));
    }
    Ok(spectrum.identity().overlap(&lattice::energy_density()).re)
}

/// Everything the coefficient protocol needs, computed from one gate set.
pub fn coefficient_protocol(gates: &GateSet, placement: FlipPlacement) -> Result<CoefficientTable> {
    let s3 = build_superoperator(3, Variant::Average, gates)?.eigendecompose()?;
    let eps3 = energy_operator(&s3)?;
    let s5 = build_superoperator(5, Variant::Average, gates)?.eigendecompose()?;
    let labeled = extract_stress_and_descendants(&s5, &eps3)?;
    coefficient_table(&s5, &labeled, gates, placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mera::analytic_gates;

    fn spectrum3() -> ScalingSpectrum {
        build_superoperator(3, Variant::Average, &analytic_gates())
            .unwrap()
            .eigendecompose()
            .unwrap()
    }

    #[test]
    fn superoperator_is_unital_and_contractive() {
        let g = analytic_gates();
        for k in 3..=4 {
            for variant in [Variant::Average, Variant::Single(0), Variant::EvenSelective, Variant::OddSelective] {
                let s = build_superoperator(k, variant, &g).unwrap();
                let id = ops::identity(1 << k);
                assert!(ops::max_abs_diff(&s.apply(&id), &id) < 1e-10);
                assert!(s.sector_leakage() < 1e-10);
                let top = s.eigenvalues().unwrap().iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(top <= 1.0 + 1e-8);
            }
        }
    }

    #[test]
    fn unsupported_sizes_are_rejected() {
        let g = analytic_gates();
        assert!(matches!(build_superoperator(2, Variant::Average, &g), Err(Error::Capacity(_))));
        assert!(matches!(build_superoperator(7, Variant::Average, &g), Err(Error::Capacity(_))));
    }

    #[test]
    fn single_placement_matches_explicit_contraction() {
        // apply the window map directly on an operator: A[O] = M† (I ⊗ O ⊗ I) M
        let g = analytic_gates();
        let k = 3;
        let m = ascension_circuit(k, &g);
        let op = ops::pauli_string(3, &[(0, Pauli::X), (2, Pauli::Z)]);
        for j in 0..k - 1 {
            let big = ops::embed(&op, k, j + 1, 2 * k);
            let want = m.adjoint() * &big * &m;
            let s = build_superoperator(k, Variant::Single(j), &g).unwrap();
            assert!(ops::max_abs_diff(&s.apply(&op), &want) < 1e-12);
        }
    }

    #[test]
    fn hermiticity_is_preserved() {
        let s = build_superoperator(3, Variant::Average, &analytic_gates()).unwrap();
        let op = ops::pauli_string(3, &[(0, Pauli::Y), (1, Pauli::X)]);
        let a = ops::scale(&op, C64::new(0.3, 0.7));
        let lhs = s.apply(&ops::dagger(&a));
        let rhs = ops::dagger(&s.apply(&a));
        assert!(ops::max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn three_site_tower() {
        let sp = spectrum3();
        assert!(sp.biorthonormality_residual() < 1e-8, "{} {}", sp.biorthonormality_residual(), sp.condition);
        assert!(ops::max_abs_diff(&sp.identity().right_operator(), &ops::identity(8)) < 1e-10);
        assert!(sp.identity().delta.abs() < 1e-10);
        let dims = sp.dimensions();
        for target in [0.0, 0.125, 1.0, 1.125, 2.0] {
            assert!(dims.iter().any(|d| (d - target).abs() < 0.05), "missing {target}");
        }
    }

    #[test]
    fn five_site_spectrum_and_coefficients() {
        let g = analytic_gates();
        let sp5 = build_superoperator(5, Variant::Average, &g).unwrap().eigendecompose().unwrap();
        assert!(sp5.biorthonormality_residual() < 1e-8, "{}", sp5.biorthonormality_residual());
        assert!(sp5.dimensions().iter().all(|d| *d > -1e-8));
        let labeled = extract_stress_and_descendants(&sp5, &energy_operator(&spectrum3()).unwrap()).unwrap();
        assert!(labeled.group.len() >= 4);
        for a in 0..4 {
            for b in 0..4 {
                let ov = ops::trace_product(&labeled.left[a], &labeled.right[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ov - C64::new(want, 0.0)).norm() < 1e-6, "{a} {b} {ov}");
            }
        }
        let table = coefficient_table(&sp5, &labeled, &g, FlipPlacement::default()).unwrap();
        assert!((table.c_t - table.c_tbar).abs() < 1e-8);
        assert!((table.get("T").unwrap() - table.get("Tbar").unwrap()).abs() < 1e-6);
    }

    #[test]
    fn even_selective_five_site_outlier() {
        let ev = build_superoperator(5, Variant::EvenSelective, &analytic_gates())
            .unwrap()
            .eigenvalues()
            .unwrap();
        assert!(ev.iter().any(|z| (dimension_of(*z) - 2.55).abs() < 0.1));
    }

    #[test]
    fn projection_is_idempotent() {
        let sp = spectrum3();
        let eps = energy_operator(&sp).unwrap();
        let once = sp.conformal_project(&eps, 1.0).unwrap();
        assert!(ops::max_abs_diff(&once, &eps) < 1e-8);
        let h = lattice::energy_density();
        let p1 = sp.conformal_project(&h, 2.0).unwrap();
        let p2 = sp.conformal_project(&p1, 2.0).unwrap();
        assert!(ops::max_abs_diff(&p1, &p2) < 1e-8);
        assert!(matches!(sp.conformal_project(&h, 7.3), Err(Error::NoSuchDimension(_))));
    }

    #[test]
    fn iterated_energy_converges_with_stress_dimension() {
        let s = build_superoperator(3, Variant::Average, &analytic_gates()).unwrap();
        let sp = s.eigendecompose().unwrap();
        let eps = fixed_point_energy_density(&sp).unwrap();
        let h = lattice::energy_density();
        assert!(ops::max_abs_diff(&s.ascend_iterated(&h, 0), &h) < 1e-15);
        let id = ops::identity(8);
        let resid = |n: usize| ops::frobenius(&(s.ascend_iterated(&h, n) - ops::scale(&id, C64::new(eps, 0.0))));
        let slope = (resid(14) / resid(10)).log2() / 4.0;
        assert!((slope + 2.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn fixed_point_energy_density_value() {
        let eps = fixed_point_energy_density(&spectrum3()).unwrap();
        assert!((eps - (-1.24222)).abs() < 5e-4, "{eps}");
    }

    #[test]
    fn flip_operator_is_a_hermitian_unitary() {
        let x = flip_operator(&analytic_gates());
        assert!(ops::hermiticity_defect(&x) < 1e-12);
        assert!(ops::max_abs_diff(&(&x * &x), &ops::identity(16)) < 1e-12);
    }

    #[test]
    fn variants_parse() {
        assert_eq!(Variant::parse("even").unwrap(), Variant::EvenSelective);
        assert_eq!(Variant::parse("single2").unwrap(), Variant::Single(2));
        assert!(Variant::parse("bogus").is_err());
        assert!(Variant::Single(3).placements(4).is_err());
    }
}
