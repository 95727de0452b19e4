//! Dense complex tensors with labeled legs and pairwise contraction.

use crate::error::{Error, Result};
use crate::ops::{CMat, ZERO};
use num_complex::Complex64 as C64;

/// Row-major dense tensor. The last leg varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
    labels: Vec<i64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Capacity(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        let labels = (0..shape.len() as i64).collect();
        Ok(Self { shape, data, labels })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        let labels = (0..shape.len() as i64).collect();
        Self {
            shape,
            data: vec![ZERO; len],
            labels,
        }
    }

    /// Views a matrix as a two-leg tensor `(row, col)`.
    pub fn from_matrix(m: &CMat) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let data = (0..r * c).map(|k| m[(k / c, k % c)]).collect();
        Self {
            shape: vec![r, c],
            data,
            labels: vec![0, 1],
        }
    }

    /// Splits a square 2^n-dimensional operator into `n` output legs then `n`
    /// input legs, each ordered from the highest site to the lowest.
    pub fn from_operator(m: &CMat, sites: usize) -> Self {
        let t = Self::from_matrix(m);
        let mut shape = vec![2; 2 * sites];
        if sites == 0 {
            shape = vec![];
        }
        Self {
            labels: (0..shape.len() as i64).collect(),
            shape,
            data: t.data,
        }
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.shape.len() {
            return Err(Error::LegPartition(format!(
                "{} labels for {} legs",
                labels.len(),
                self.shape.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        let st = strides(&self.shape);
        self.data[index.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * s).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Reorders legs so that new leg `k` is old leg `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_partition(perm, self.rank())?;
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_st = strides(&self.shape);
        let gathered: Vec<usize> = perm.iter().map(|&p| old_st[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut offset = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[offset]);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                offset += gathered[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                offset -= gathered[k] * idx[k];
                idx[k] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data,
            labels: perm.iter().map(|&p| self.labels[p]).collect(),
        })
    }

    /// Flattens into a matrix with `row_legs` rows; legs must already be ordered.
    pub fn to_matrix(&self, row_legs: usize) -> CMat {
        let rows: usize = self.shape[..row_legs].iter().product();
        let cols: usize = self.shape[row_legs..].iter().product();
        CMat::from_fn(rows, cols, |i, j| self.data[i * cols + j])
    }
}

fn check_partition(perm: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if perm.len() != rank {
        return Err(Error::LegPartition(format!(
            "{} legs listed for rank {rank}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(Error::LegPartition(format!("leg {p} invalid or repeated")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Contracts `a` and `b` over the listed `(leg of a, leg of b)` pairs.
///
/// The result carries the free legs of `a` followed by the free legs of `b`,
/// each in declaration order.
pub fn contract(a: &Tensor, b: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(la, lb) in pairs {
        if la >= a.rank() {
            return Err(Error::Index {
                index: la,
                size: a.rank(),
            });
        }
        if lb >= b.rank() {
            return Err(Error::Index {
                index: lb,
                size: b.rank(),
            });
        }
        if used_a[la] {
            return Err(Error::DuplicateLeg(la));
        }
        if used_b[lb] {
            return Err(Error::DuplicateLeg(lb));
        }
        used_a[la] = true;
        used_b[lb] = true;
        if a.shape[la] != b.shape[lb] {
            return Err(Error::ContractShape {
                leg_a: la,
                leg_b: lb,
                dim_a: a.shape[la],
                dim_b: b.shape[lb],
            });
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&k| !used_a[k]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&k| !used_b[k]).collect();
    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let ma = a.permute(&perm_a)?.to_matrix(free_a.len());
    let mb = b.permute(&perm_b)?.to_matrix(pairs.len());
    let prod = &ma * &mb;
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&k| a.shape[k])
        .chain(free_b.iter().map(|&k| b.shape[k]))
        .collect();
    let labels = free_a
        .iter()
        .map(|&k| a.labels[k])
        .chain(free_b.iter().map(|&k| b.labels[k]))
        .collect();
    let cols = prod.ncols();
    let data = (0..prod.nrows() * cols)
        .map(|k| prod[(k / cols, k % cols)])
        .collect();
    Ok(Tensor {
        shape,
        data,
        labels,
    })
}

/// Conjugate transpose: the result lists `in_legs` first, then `out_legs`.
pub fn dagger(a: &Tensor, in_legs: &[usize], out_legs: &[usize]) -> Result<Tensor> {
    let perm: Vec<usize> = in_legs.iter().chain(out_legs).copied().collect();
    let mut t = a.permute(&perm)?;
    for x in &mut t.data {
        *x = x.conj();
    }
    Ok(t)
}
