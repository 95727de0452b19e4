//! The critical spin chain, its local densities and an exact-diagonalization oracle.

use crate::error::{Error, Result};
use crate::ops::{self, CMat, Pauli, ONE, ZERO};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Largest chain for which a dense Hamiltonian is materialized.
pub const DENSE_MAX_SITES: usize = 12;
/// Largest chain accepted by the iterative ground-state solver.
pub const ED_MAX_SITES: usize = 20;

/// Three-site energy density `X Z X - (X X 1 + 1 X X) / 2` on sites `(s-1, s, s+1)`,
/// with `s-1` on the lowest register position.
pub fn energy_density() -> CMat {
    let xzx = ops::pauli_string(3, &[(0, Pauli::X), (1, Pauli::Z), (2, Pauli::X)]);
    let xx_left = ops::pauli_string(3, &[(0, Pauli::X), (1, Pauli::X)]);
    let xx_right = ops::pauli_string(3, &[(1, Pauli::X), (2, Pauli::X)]);
    &xzx - ops::scale(&(&xx_left + &xx_right), C64::new(0.5, 0.0))
}

#[derive(Debug, Clone)]
pub struct LocalTerm {
    pub center: usize,
    pub sites: [usize; 3],
    pub op: CMat,
}

/// The energy density centered at `s` of an `n`-site periodic chain.
pub fn local_term(s: usize, n: usize) -> Result<LocalTerm> {
    if s >= n {
        return Err(Error::Index { index: s, size: n });
    }
    Ok(LocalTerm {
        center: s,
        sites: [(s + n - 1) % n, s, (s + 1) % n],
        op: energy_density(),
    })
}

/// Momentum density `i [h_s, h_{s-1}]` on sites `(s-2, s-1, s, s+1)`.
#[derive(Debug, Clone)]
pub struct MomentumDensity {
    pub site: usize,
    pub sites: [usize; 4],
    pub op: CMat,
}

pub fn momentum_density(s: usize, n: usize) -> Result<MomentumDensity> {
    if s >= n {
        return Err(Error::Index { index: s, size: n });
    }
    let h = energy_density();
    let upper = ops::embed(&h, 3, 1, 4);
    let lower = ops::embed(&h, 3, 0, 4);
    let op = ops::scale(&ops::commutator(&upper, &lower), ops::I);
    Ok(MomentumDensity {
        site: s,
        sites: [(s + n - 2) % n, (s + n - 1) % n, s, (s + 1) % n],
        op,
    })
}

/// `H = (N / 4 pi) sum_s h_s` on a periodic chain of `n` sites.
#[derive(Debug, Clone, Copy)]
pub struct ChainHamiltonian {
    n: usize,
}

impl ChainHamiltonian {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "chain length must be a power of two >= 4, got {n}"
            )));
        }
        if n > ED_MAX_SITES {
            return Err(Error::Capacity(format!(
                "{n} sites exceeds the {ED_MAX_SITES}-site exact-diagonalization limit"
            )));
        }
        Ok(Self { n })
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn prefactor(&self) -> f64 {
        prefactor(self.n)
    }

    pub fn terms(&self) -> Vec<LocalTerm> {
        (0..self.n).map(|s| local_term(s, self.n).unwrap()).collect()
    }

    /// Applies `sum_s h_s` (no prefactor) to a real vector.
    fn apply_bare(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (b, &amp) in x.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            for s in 0..n {
                let l = (s + n - 1) % n;
                let r = (s + 1) % n;
                let sign = if (b >> s) & 1 == 1 { -1.0 } else { 1.0 };
                out[b ^ (1 << l) ^ (1 << r)] += sign * amp;
                // each bond (s, s+1) collects -1/2 from two neighbouring terms
                out[b ^ (1 << s) ^ (1 << r)] -= amp;
            }
        }
    }

    /// `H x` including the prefactor.
    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_bare(x, &mut out);
        let p = self.prefactor();
        out.iter_mut().for_each(|v| *v *= p);
        out
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let re: Vec<f64> = psi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
        let hr = self.apply_real(&re);
        let hi = self.apply_real(&im);
        hr.into_iter().zip(hi).map(|(a, b)| C64::new(a, b)).collect()
    }

    pub fn expectation(&self, psi: &[C64]) -> f64 {
        ops::inner(psi, &self.apply(psi)).re / ops::inner(psi, psi).re
    }

    pub fn build_dense(&self) -> Result<CMat> {
        build_dense(self.n)
    }
}

pub fn prefactor(n: usize) -> f64 {
    n as f64 / (4.0 * PI)
}

/// Dense Hamiltonian including the prefactor.
pub fn build_dense(n: usize) -> Result<CMat> {
    if n > DENSE_MAX_SITES {
        return Err(Error::Capacity(format!(
            "dense Hamiltonian limited to {DENSE_MAX_SITES} sites, requested {n}"
        )));
    }
    let ham = ChainHamiltonian::new(n)?;
    let dim = 1usize << n;
    let mut m = CMat::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for c in 0..dim {
        e[c] = 1.0;
        let col = ham.apply_real(&e);
        for (r, v) in col.iter().enumerate() {
            if *v != 0.0 {
                m[(r, c)] = C64::new(*v, 0.0);
            }
        }
        e[c] = 0.0;
    }
    Ok(m)
}

/// Expectation of `prod_s Z_s`.
pub fn parity(psi: &[C64]) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(b, a)| {
            if b.count_ones() % 2 == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: Vec<C64>,
    pub parity: i32,
}

impl GroundState {
    /// Energy per site without the `N / 4 pi` prefactor.
    pub fn density(&self) -> f64 {
        let n = self.state.len().trailing_zeros() as usize;
        self.energy / (prefactor(n) * n as f64)
    }
}

/// Lowest eigenpair of the chain, from Lanczos in both parity sectors.
pub fn ed_ground(n: usize) -> Result<GroundState> {
    let ham = ChainHamiltonian::new(n)?;
    let even = lanczos_sector(&ham, 0)?;
    let odd = lanczos_sector(&ham, 1)?;
    let (energy, vec, par) = if even.0 <= odd.0 {
        (even.0, even.1, 1)
    } else {
        (odd.0, odd.1, -1)
    };
    Ok(GroundState {
        energy,
        state: vec.into_iter().map(|x| C64::new(x, 0.0)).collect(),
        parity: par,
    })
}

/// Lowest eigenpair restricted to one parity sector (0 even, 1 odd).
pub fn ed_sector_ground(n: usize, sector: u32) -> Result<(f64, Vec<C64>)> {
    let ham = ChainHamiltonian::new(n)?;
    let (e, v) = lanczos_sector(&ham, sector)?;
    Ok((e, v.into_iter().map(|x| C64::new(x, 0.0)).collect()))
}

fn lanczos_sector(ham: &ChainHamiltonian, sector: u32) -> Result<(f64, Vec<f64>)> {
    let dim = 1usize << ham.sites();
    let in_sector = |b: usize| b.count_ones() % 2 == sector;
    let project = |v: &mut [f64]| {
        for (b, x) in v.iter_mut().enumerate() {
            if !in_sector(b) {
                *x = 0.0;
            }
        }
    };
    // deterministic, non-symmetric start vector
    let mut start: Vec<f64> = (0..dim)
        .map(|b| {
            let x = (b as f64 * 0.618_033_988_749_895).fract();
            0.5 + x
        })
        .collect();
    project(&mut start);
    normalize(&mut start);

    let krylov = if dim <= 1 << 16 { 120 } else { 60 };
    let krylov = krylov.min(dim / 2);
    let mut best = f64::INFINITY;
    for _restart in 0..40 {
        let (theta, ritz, residual) = lanczos_pass(ham, &start, krylov, &project);
        let scale = theta.abs().max(1.0);
        if residual < 1e-11 * scale || (best - theta).abs() < 1e-14 * scale && residual < 1e-8 * scale {
            return Ok((theta, ritz));
        }
        best = theta;
        start = ritz;
    }
    Err(Error::Solver(format!(
        "Lanczos did not converge for {} sites",
        ham.sites()
    )))
}

fn normalize(v: &mut [f64]) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
}

fn lanczos_pass(
    ham: &ChainHamiltonian,
    start: &[f64],
    m: usize,
    project: &dyn Fn(&mut [f64]),
) -> (f64, Vec<f64>, f64) {
    let dim = start.len();
    let mut basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; dim];
    for j in 0..m {
        w.copy_from_slice(&ham.apply_real(&basis[j]));
        project(&mut w);
        let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if j + 1 == m || b < 1e-13 {
            beta.push(b);
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .expect("tridiagonal eigendecomposition");
    let theta = eig.S().column_vector()[0];
    let y = eig.U().col(0);
    let mut ritz = vec![0.0; dim];
    for (i, q) in basis.iter().enumerate().take(k) {
        let c = y[i];
        ritz.iter_mut().zip(q).for_each(|(x, v)| *x += c * v);
    }
    normalize(&mut ritz);
    let residual = beta[k - 1].abs() * y[k - 1].abs();
    (theta, ritz, residual)
}

/// Lowest eigenvalues of a dense Hermitian matrix, ascending.
pub fn dense_spectrum(m: &CMat) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("{e:?}")))
}

/// `max |i[H_bare, h_s] - (p_{s+1} - p_s)|` on an `n`-site chain, computed densely.
pub fn continuity_residual(n: usize, s: usize) -> Result<f64> {
    if n > 10 {
        return Err(Error::Capacity("continuity check limited to 10 sites".into()));
    }
    let h = energy_density();
    let dense_term = |center: usize| -> CMat {
        let t = local_term(center, n).unwrap();
        ops::embed_on(&h, &t.sites, n)
    };
    let dim = 1usize << n;
    let mut total = CMat::zeros(dim, dim);
    for c in 0..n {
        total += dense_term(c);
    }
    let hs = dense_term(s);
    let lhs = ops::scale(&ops::commutator(&total, &hs), ops::I);
    let p = |site: usize| -> CMat {
        let m = momentum_density(site, n).unwrap();
        ops::embed_on(&m.op, &m.sites, n)
    };
    let rhs = p((s + 1) % n) - p(s);
    Ok(ops::max_abs_diff(&lhs, &rhs))
}

pub fn z_string(n: usize) -> CMat {
    let dim = 1usize << n;
    CMat::from_fn(dim, dim, |i, j| {
        if i != j {
            ZERO
        } else if i.count_ones() % 2 == 0 {
            ONE
        } else {
            -ONE
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_term_is_traceless_hermitian_and_neutral() {
        let t = local_term(0, 8).unwrap();
        assert_eq!(t.sites, [7, 0, 1]);
        assert!(ops::trace(&t.op).norm() < 1e-15);
        assert!(ops::hermiticity_defect(&t.op) < 1e-14);
        let zzz = z_string(3);
        assert!(ops::max_abs(&ops::commutator(&t.op, &zzz)) < 1e-14);
        assert!(matches!(local_term(8, 8), Err(Error::Index { .. })));
    }

    #[test]
    fn local_term_on_plus_states() {
        // |+++> is an eigenvector of every X; X Z X maps it to a state orthogonal to it
        let plus = vec![C64::new(1.0 / 8f64.sqrt(), 0.0); 8];
        let h = energy_density();
        let out: Vec<C64> = (0..8).map(|r| (0..8).map(|c| h[(r, c)] * plus[c]).sum()).collect();
        let diag = ops::inner(&plus, &out);
        // <+++| XZX |+++> = <+|Z|+> = 0 and each XX gives 1
        assert!((diag.re - (0.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn dense_matches_term_sum() {
        let n = 4;
        let dense = build_dense(n).unwrap();
        let h = energy_density();
        let mut want = CMat::zeros(16, 16);
        for s in 0..n {
            let t = local_term(s, n).unwrap();
            want += ops::embed_on(&h, &t.sites, n);
        }
        let want = ops::scale(&want, C64::new(prefactor(n), 0.0));
        assert!(ops::max_abs_diff(&dense, &want) < 1e-13);
        assert!(ops::hermiticity_defect(&dense) < 1e-12);
        let z = z_string(n);
        assert!(ops::max_abs(&ops::commutator(&dense, &z)) < 1e-12);
    }

    #[test]
    fn prefactor_doubles_with_length() {
        assert!((prefactor(16) - 2.0 * prefactor(8)).abs() < 1e-15);
    }

    #[test]
    fn dense_capacity_limit() {
        assert!(matches!(build_dense(16), Err(Error::Capacity(_))));
        assert!(matches!(ChainHamiltonian::new(6), Err(Error::Parameter(_))));
    }

    #[test]
    fn momentum_density_is_hermitian_and_traceless() {
        let p = momentum_density(3, 8).unwrap();
        assert_eq!(p.sites, [1, 2, 3, 4]);
        assert!(ops::hermiticity_defect(&p.op) < 1e-14);
        assert!(ops::trace(&p.op).norm() < 1e-14);
        let z = z_string(4);
        assert!(ops::max_abs(&ops::commutator(&p.op, &z)) < 1e-14);
    }

    #[test]
    fn translation_permutes_dense_matrix() {
        let n = 4;
        let dense = build_dense(n).unwrap();
        let shift = |b: usize| ((b << 1) | (b >> (n - 1))) & ((1 << n) - 1);
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(dense[(shift(r), shift(c))], dense[(r, c)]);
            }
        }
    }

    #[test]
    fn continuity_holds_at_eight_sites() {
        for s in [0, 3, 7] {
            assert!(continuity_residual(8, s).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense_eigensolver() {
        let n = 8;
        let dense = build_dense(n).unwrap();
        let spectrum = dense_spectrum(&dense).unwrap();
        let gs = ed_ground(n).unwrap();
        assert!((gs.energy - spectrum[0]).abs() < 1e-10);
        assert!((ops::norm(&gs.state) - 1.0).abs() < 1e-12);
        assert!((ham_residual(n, &gs) / gs.energy.abs()) < 1e-8);
        assert_eq!(gs.parity, 1);
        assert!((parity(&gs.state) - 1.0).abs() < 1e-10);
    }

    fn ham_residual(n: usize, gs: &GroundState) -> f64 {
        let ham = ChainHamiltonian::new(n).unwrap();
        let hv = ham.apply(&gs.state);
        hv.iter()
            .zip(&gs.state)
            .map(|(a, b)| (a - b * gs.energy).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn frozen_ground_energy_densities() {
        // frozen from an independent sparse eigensolver
        let e8 = ed_ground(8).unwrap();
        assert!((e8.density() - (-1.281_457_723_870_756)).abs() < 1e-9, "{}", e8.density());
        let e16 = ed_ground(16).unwrap();
        assert!((e16.density() - (-1.275_287_154_672_289)).abs() < 1e-9, "{}", e16.density());
        let bulk = -4.0 / PI;
        assert!(e8.density() < e16.density() && e16.density() < bulk);
        assert!((e16.density() - bulk).abs() < (e8.density() - bulk).abs());
    }

    #[test]
    fn four_site_ground_state_is_even() {
        let gs = ed_ground(4).unwrap();
        let dense = build_dense(4).unwrap();
        let spectrum = dense_spectrum(&dense).unwrap();
        assert!((gs.energy - spectrum[0]).abs() < 1e-12);
        assert!((parity(&gs.state).abs() - 1.0).abs() < 1e-12);
    }
}
