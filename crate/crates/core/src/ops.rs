//! Local operator algebra on little-endian qubit registers.
//!
//! Site `q` of an `n`-qubit register is bit `q` of the basis index. A two-qubit
//! gate acting on `(q0, q1)` is a 4x4 matrix whose local index is `b0 + 2 b1`.

use faer::Mat;
use num_complex::Complex64 as C64;

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMat {
        let mut m = CMat::zeros(2, 2);
        match self {
            Pauli::I => {
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
            }
            Pauli::X => {
                m[(0, 1)] = ONE;
                m[(1, 0)] = ONE;
            }
            Pauli::Y => {
                m[(0, 1)] = -I;
                m[(1, 0)] = I;
            }
            Pauli::Z => {
                m[(0, 0)] = ONE;
                m[(1, 1)] = -ONE;
            }
        }
        m
    }
}

pub fn identity(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| if i == j { ONE } else { ZERO })
}

/// Kronecker product `high ⊗ low`: `low` acts on the least significant bits.
pub fn kron(high: &CMat, low: &CMat) -> CMat {
    let (hr, hc) = (high.nrows(), high.ncols());
    let (lr, lc) = (low.nrows(), low.ncols());
    CMat::from_fn(hr * lr, hc * lc, |i, j| {
        high[(i / lr, j / lc)] * low[(i % lr, j % lc)]
    })
}

/// Two-site product with `p` on the lower site and `q` on the upper site.
pub fn two_site(p: Pauli, q: Pauli) -> CMat {
    kron(&q.matrix(), &p.matrix())
}

/// Pauli string on `n` sites; unspecified sites carry the identity.
pub fn pauli_string(n: usize, ops: &[(usize, Pauli)]) -> CMat {
    let dim = 1usize << n;
    CMat::from_fn(dim, dim, |r, c| {
        let mut amp = ONE;
        for q in 0..n {
            let p = ops
                .iter()
                .find(|(s, _)| *s == q)
                .map(|(_, p)| *p)
                .unwrap_or(Pauli::I);
            let (br, bc) = ((r >> q) & 1, (c >> q) & 1);
            amp *= p.matrix()[(br, bc)];
            if amp == ZERO {
                return ZERO;
            }
        }
        amp
    })
}

/// Embeds an `m`-site operator at `offset` inside a `width`-site register.
pub fn embed(op: &CMat, m: usize, offset: usize, width: usize) -> CMat {
    assert!(offset + m <= width, "embedding out of range");
    assert_eq!(op.nrows(), 1 << m);
    let mask = (1usize << m) - 1;
    let dim = 1usize << width;
    CMat::from_fn(dim, dim, |r, c| {
        let (ro, co) = ((r >> offset) & mask, (c >> offset) & mask);
        let (rest_r, rest_c) = (r & !(mask << offset), c & !(mask << offset));
        if rest_r != rest_c {
            return ZERO;
        }
        op[(ro, co)]
    })
}

/// Embeds an operator given on an ordered list of register positions.
pub fn embed_on(op: &CMat, positions: &[usize], width: usize) -> CMat {
    let m = positions.len();
    assert_eq!(op.nrows(), 1 << m);
    let dim = 1usize << width;
    let mut mask = 0usize;
    for &p in positions {
        mask |= 1 << p;
    }
    let local = |x: usize| -> usize {
        positions
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &p)| acc | (((x >> p) & 1) << k))
    };
    CMat::from_fn(dim, dim, |r, c| {
        if r & !mask != c & !mask {
            ZERO
        } else {
            op[(local(r), local(c))]
        }
    })
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn frobenius(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn scale(m: &CMat, s: C64) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// Matrix exponential of `i * h` for Hermitian `h`.
pub fn expi_hermitian(h: &CMat) -> CMat {
    let eig = h
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("Hermitian eigendecomposition");
    let u = eig.U();
    let s = eig.S().column_vector();
    let n = h.nrows();
    let phases = CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::from_polar(1.0, s[i].re)
        } else {
            ZERO
        }
    });
    u * &phases * u.adjoint()
}

/// Applies a single-qubit gate to site `q` of a state vector in place.
pub fn apply_1q(psi: &mut [C64], q: usize, g: &CMat) {
    let stride = 1usize << q;
    let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    for base in 0..psi.len() {
        if base & stride != 0 {
            continue;
        }
        let (a, b) = (psi[base], psi[base | stride]);
        psi[base] = g00 * a + g01 * b;
        psi[base | stride] = g10 * a + g11 * b;
    }
}

/// Applies a two-qubit gate to sites `(q0, q1)` of a state vector in place.
pub fn apply_2q(psi: &mut [C64], q0: usize, q1: usize, g: &CMat) {
    assert_ne!(q0, q1);
    let (m0, m1) = (1usize << q0, 1usize << q1);
    let mut gm = [[ZERO; 4]; 4];
    for (r, row) in gm.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = g[(r, c)];
        }
    }
    for base in 0..psi.len() {
        if base & (m0 | m1) != 0 {
            continue;
        }
        let idx = [base, base | m0, base | m1, base | m0 | m1];
        let a = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        for r in 0..4 {
            psi[idx[r]] = gm[r][0] * a[0] + gm[r][1] * a[1] + gm[r][2] * a[2] + gm[r][3] * a[3];
        }
    }
}

/// Applies an operator acting on an ordered list of sites to a state vector.
pub fn apply_local(psi: &[C64], sites: &[usize], op: &CMat) -> Vec<C64> {
    let m = sites.len();
    let dim = 1usize << m;
    assert_eq!(op.nrows(), dim);
    let mut mask = 0usize;
    for &s in sites {
        mask |= 1 << s;
    }
    let scatter = |local: usize| -> usize {
        sites
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &s)| acc | (((local >> k) & 1) << s))
    };
    let offsets: Vec<usize> = (0..dim).map(scatter).collect();
    let mut out = vec![ZERO; psi.len()];
    for base in 0..psi.len() {
        if base & mask != 0 {
            continue;
        }
        for r in 0..dim {
            let mut acc = ZERO;
            for c in 0..dim {
                let g = op[(r, c)];
                if g != ZERO {
                    acc += g * psi[base | offsets[c]];
                }
            }
            out[base | offsets[r]] = acc;
        }
    }
    out
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `U ρ U†` with `U` a two-qubit gate on register positions `(q0, q1)`.
pub fn conjugate_2q(rho: &CMat, n: usize, q0: usize, q1: usize, g: &CMat) -> CMat {
    let dim = 1usize << n;
    let mut tmp = rho.to_owned();
    let mut col = vec![ZERO; dim];
    for j in 0..dim {
        for (i, v) in col.iter_mut().enumerate() {
            *v = tmp[(i, j)];
        }
        apply_2q(&mut col, q0, q1, g);
        for (i, v) in col.iter().enumerate() {
            tmp[(i, j)] = *v;
        }
    }
    // right multiplication by g† acts on rows with conj(g)
    let gc = CMat::from_fn(4, 4, |r, c| g[(r, c)].conj());
    let mut row = vec![ZERO; dim];
    for i in 0..dim {
        for (j, v) in row.iter_mut().enumerate() {
            *v = tmp[(i, j)];
        }
        apply_2q(&mut row, q0, q1, &gc);
        for (j, v) in row.iter().enumerate() {
            tmp[(i, j)] = *v;
        }
    }
    tmp
}

/// Partial trace of an `n`-qubit operator keeping `keep` in the given order.
pub fn partial_trace(rho: &CMat, n: usize, keep: &[usize]) -> CMat {
    let k = keep.len();
    let kd = 1usize << k;
    let mut keep_mask = 0usize;
    for &q in keep {
        keep_mask |= 1 << q;
    }
    let traced: Vec<usize> = (0..n).filter(|q| keep_mask & (1 << q) == 0).collect();
    let scatter_keep: Vec<usize> = (0..kd)
        .map(|l| {
            keep.iter()
                .enumerate()
                .fold(0, |acc, (b, &q)| acc | (((l >> b) & 1) << q))
        })
        .collect();
    let env: Vec<usize> = (0..1usize << traced.len())
        .map(|l| {
            traced
                .iter()
                .enumerate()
                .fold(0, |acc, (b, &q)| acc | (((l >> b) & 1) << q))
        })
        .collect();
    CMat::from_fn(kd, kd, |r, c| {
        let (rr, cc) = (scatter_keep[r], scatter_keep[c]);
        env.iter().map(|&e| rho[(rr | e, cc | e)]).sum()
    })
}

/// Reduced density matrix of a pure state on the listed sites.
pub fn reduced_density(psi: &[C64], n: usize, keep: &[usize]) -> CMat {
    let k = keep.len();
    let kd = 1usize << k;
    let mut keep_mask = 0usize;
    for &q in keep {
        keep_mask |= 1 << q;
    }
    debug_assert_eq!(psi.len(), 1 << n);
    let scatter: Vec<usize> = (0..kd)
        .map(|l| {
            keep.iter()
                .enumerate()
                .fold(0, |acc, (b, &q)| acc | (((l >> b) & 1) << q))
        })
        .collect();
    let mut rho = CMat::zeros(kd, kd);
    for base in 0..psi.len() {
        if base & keep_mask != 0 {
            continue;
        }
        for r in 0..kd {
            let a = psi[base | scatter[r]];
            if a == ZERO {
                continue;
            }
            for c in 0..kd {
                rho[(r, c)] += a * psi[base | scatter[c]].conj();
            }
        }
    }
    rho
}

/// Conjugation by `Z` on every site multiplies entry `(r, c)` by this sign.
pub fn parity_sign(r: usize, c: usize) -> f64 {
    if (r.count_ones() + c.count_ones()) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        let mut acc = 0.0;
        let mut comp = 0.0;
        for &x in xs {
            let y = x - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
