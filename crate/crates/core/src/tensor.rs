//! Dense k-way tensors and the multilinear contractions the solver needs.
//!
//! Storage is row-major (last index fastest). Contractions are carried out as
//! a sequence of single-mode folds, trailing modes first, so each fold walks
//! contiguous memory.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<f64>,
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for m in (0..shape.len().saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * shape[m + 1];
    }
    strides
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Contract the last mode (extent `n`) of a row-major block with `u`.
fn fold_trailing(data: &[f64], n: usize, u: &[f64]) -> Vec<f64> {
    data.chunks_exact(n).map(|row| dot(row, u)).collect()
}

/// Contract the first mode (extent `n`) of a row-major block with `u`.
fn fold_leading(data: &[f64], n: usize, u: &[f64]) -> Vec<f64> {
    let rest = data.len() / n;
    let mut out = vec![0.0; rest];
    for (a, &w) in u.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(&data[a * rest..(a + 1) * rest]) {
            *o += w * x;
        }
    }
    out
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Input("tensor order must be at least 1".into()));
        }
        if shape.contains(&0) {
            return Err(Error::Input(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(dim_err(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite entry at flat index {pos}")));
        }
        let strides = row_major_strides(&shape);
        Ok(Self {
            shape,
            strides,
            data,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    /// Build from a function of the multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for m in (0..shape.len()).rev() {
                idx[m] += 1;
                if idx[m] < shape[m] {
                    break;
                }
                idx[m] = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(dim_err(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn frobenius_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    fn check_vectors(&self, u: &[&[f64]], skip: Option<usize>) -> Result<()> {
        if u.len() != self.order() {
            return Err(dim_err(format!(
                "expected {} vectors, got {}",
                self.order(),
                u.len()
            )));
        }
        for (m, (v, &n)) in u.iter().zip(&self.shape).enumerate() {
            if Some(m) != skip && v.len() != n {
                return Err(dim_err(format!(
                    "vector for mode {m} has length {}, expected {n}",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    /// `<A, u_1 ⊗ ... ⊗ u_k>`.
    pub fn contract_full(&self, u: &[&[f64]]) -> Result<f64> {
        self.check_vectors(u, None)?;
        let k = self.order();
        let mut cur = fold_trailing(&self.data, self.shape[k - 1], u[k - 1]);
        for m in (0..k - 1).rev() {
            cur = fold_trailing(&cur, self.shape[m], u[m]);
        }
        Ok(cur[0])
    }

    /// Contract every mode except `mode`; the vector at `mode` is ignored.
    ///
    /// The result `v` satisfies `<v, w> = contract_full(u with u[mode] = w)`.
    pub fn contract_skip(&self, u: &[&[f64]], mode: usize) -> Result<Vec<f64>> {
        let k = self.order();
        if mode >= k {
            return Err(dim_err(format!("mode {mode} out of range for order {k}")));
        }
        self.check_vectors(u, Some(mode))?;
        let mut cur: Option<Vec<f64>> = None;
        for m in (mode + 1..k).rev() {
            let src = cur.as_deref().unwrap_or(&self.data);
            cur = Some(fold_trailing(src, self.shape[m], u[m]));
        }
        for m in 0..mode {
            let src = cur.as_deref().unwrap_or(&self.data);
            cur = Some(fold_leading(src, self.shape[m], u[m]));
        }
        Ok(cur.unwrap_or_else(|| self.data.clone()))
    }

    /// Mode product `T ×_mode Mᵀ`: mode `mode` of extent `n` becomes extent
    /// `cols(M)` with `out[.., j, ..] = Σ_a T[.., a, ..] M[a, j]`.
    pub fn mode_product_transpose(&self, mode: usize, m: &DMatrix<f64>) -> Result<Self> {
        let n = self.shape[mode];
        if m.nrows() != n {
            return Err(dim_err(format!(
                "matrix for mode {mode} has {} rows, expected {n}",
                m.nrows()
            )));
        }
        let c = m.ncols();
        let left: usize = self.shape[..mode].iter().product();
        let right: usize = self.shape[mode + 1..].iter().product();
        let mut out = vec![0.0; left * c * right];
        for l in 0..left {
            let src = &self.data[l * n * right..(l + 1) * n * right];
            let dst = &mut out[l * c * right..(l + 1) * c * right];
            for a in 0..n {
                let row = &src[a * right..(a + 1) * right];
                for j in 0..c {
                    let w = m[(a, j)];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &x) in dst[j * right..(j + 1) * right].iter_mut().zip(row) {
                        *o += w * x;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = c;
        Self::new(shape, out)
    }

    /// `(M_1ᵀ, ..., M_kᵀ)·A`.
    pub fn multilinear_transform(&self, mats: &[DMatrix<f64>]) -> Result<Self> {
        if mats.len() != self.order() {
            return Err(dim_err(format!(
                "expected {} matrices, got {}",
                self.order(),
                mats.len()
            )));
        }
        let mut cur = self.clone();
        for (m, mat) in mats.iter().enumerate().rev() {
            cur = cur.mode_product_transpose(m, mat)?;
        }
        Ok(cur)
    }

    /// Superdiagonal `(T[j, ..., j])_j` of a cubical tensor.
    pub fn diag_k(&self) -> Result<Vec<f64>> {
        let r = self.shape[0];
        if self.shape.iter().any(|&n| n != r) {
            return Err(dim_err(format!("tensor {:?} is not cubical", self.shape)));
        }
        let step: usize = self.strides.iter().sum();
        Ok((0..r).map(|j| self.data[j * step]).collect())
    }

    pub fn read_dtf(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_dtf(&text)
    }

    /// Parse the `.dtf` text format: order on line 1, extents on line 2,
    /// then the row-major entries separated by arbitrary whitespace.
    pub fn parse_dtf(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let k: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty file".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line 1 (order): {e}")))?;
        let dims_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))?;
        let shape = dims_line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line 2 (dims): {e}")))?;
        if shape.len() != k {
            return Err(Error::Parse(format!(
                "order {k} but {} extents listed",
                shape.len()
            )));
        }
        let mut data = Vec::new();
        for line in lines {
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("value `{tok}`: {e}")))?,
                );
            }
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Parse(format!(
                "expected {expected} values, found {}",
                data.len()
            )));
        }
        Self::new(shape, data).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Serialize to `.dtf`; one line per last-mode fiber.
    pub fn to_dtf(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.order());
        let dims: Vec<String> = self.shape.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "{}", dims.join(" "));
        let last = *self.shape.last().unwrap();
        for row in self.data.chunks_exact(last) {
            let vals: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out
    }
}

/// `Σ_j λ_j u^(1)_j ⊗ ... ⊗ u^(k)_j` from factor matrices with one column per
/// component.
pub fn rank1_sum(factors: &[DMatrix<f64>], lambda: &[f64]) -> Result<DenseTensor> {
    if factors.is_empty() {
        return Err(Error::Input("at least one factor matrix required".into()));
    }
    let r = lambda.len();
    if let Some(bad) = factors.iter().position(|f| f.ncols() != r) {
        return Err(dim_err(format!(
            "factor {bad} has {} columns, expected {r}",
            factors[bad].ncols()
        )));
    }
    let shape: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let len: usize = shape.iter().product();
    let mut data = vec![0.0; len];
    let mut term = Vec::with_capacity(len);
    for j in 0..r {
        term.clear();
        term.push(lambda[j]);
        for f in factors {
            let col = f.column(j);
            let prev = std::mem::take(&mut term);
            term.reserve(prev.len() * col.len());
            for &p in &prev {
                term.extend(col.iter().map(|&c| p * c));
            }
        }
        for (d, t) in data.iter_mut().zip(&term) {
            *d += t;
        }
    }
    DenseTensor::new(shape, data)
}

/// Column `j` of a column-major matrix as a slice.
#[inline]
pub fn col(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn indicator_111() -> DenseTensor {
        DenseTensor::from_fn(vec![2, 2, 2], |i| if i == [0, 0, 0] { 1.0 } else { 0.0 }).unwrap()
    }

    fn ones(shape: Vec<usize>) -> DenseTensor {
        let len = shape.iter().product();
        DenseTensor::new(shape, vec![1.0; len]).unwrap()
    }

    fn random_tensor(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let len = shape.iter().product();
        DenseTensor::new(shape, rng::gaussian_vec(&mut rng::stream(seed, 99), len)).unwrap()
    }

    /// Brute-force contraction over every multi-index.
    fn brute_contract(a: &DenseTensor, u: &[&[f64]]) -> f64 {
        let mut total = 0.0;
        let mut idx = vec![0usize; a.order()];
        for _ in 0..a.len() {
            let w: f64 = idx.iter().enumerate().map(|(m, &i)| u[m][i]).product();
            total += a.get(&idx) * w;
            for m in (0..a.order()).rev() {
                idx[m] += 1;
                if idx[m] < a.shape()[m] {
                    break;
                }
                idx[m] = 0;
            }
        }
        total
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(DenseTensor::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(DenseTensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn contract_full_examples() {
        let a = indicator_111();
        let e1 = e(2, 0);
        assert_eq!(a.contract_full(&[&e1, &e1, &e1]).unwrap(), 1.0);
        let z = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        let v = [0.3, -1.2];
        assert_eq!(z.contract_full(&[&v, &v, &v]).unwrap(), 0.0);
        let o = [1.0, 1.0];
        assert_eq!(ones(vec![2, 2, 2]).contract_full(&[&o, &o, &o]).unwrap(), 8.0);
        assert!(a.contract_full(&[&e1, &e1]).is_err());
        assert!(a.contract_full(&[&e1, &e1, &[1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn contract_full_matches_brute_force() {
        let a = random_tensor(vec![3, 4, 2, 3], 1);
        let mut r = rng::stream(2, 0);
        let u: Vec<Vec<f64>> = a.shape().iter().map(|&n| rng::gaussian_vec(&mut r, n)).collect();
        let refs: Vec<&[f64]> = u.iter().map(|v| v.as_slice()).collect();
        let got = a.contract_full(&refs).unwrap();
        let want = brute_contract(&a, &refs);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn contract_skip_examples() {
        let a = indicator_111();
        let e1 = e(2, 0);
        let junk = [9.0, 9.0];
        assert_eq!(a.contract_skip(&[&junk, &e1, &e1], 0).unwrap(), vec![1.0, 0.0]);
        let o = ones(vec![2, 2, 2]);
        assert_eq!(o.contract_skip(&[&junk, &e1, &e1], 0).unwrap(), vec![1.0, 1.0]);
        assert!(o.contract_skip(&[&junk, &e1, &e1], 3).is_err());
    }

    #[test]
    fn contract_skip_defining_identity() {
        let a = random_tensor(vec![3, 3, 3], 5);
        let mut r = rng::stream(6, 0);
        let u: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let v = rng::gaussian_vec(&mut r, 3);
                let n = dot(&v, &v).sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = u.iter().map(|v| v.as_slice()).collect();
        for mode in 0..3 {
            let v = a.contract_skip(&refs, mode).unwrap();
            let full = a.contract_full(&refs).unwrap();
            assert!((dot(&v, &u[mode]) - full).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }

    #[test]
    fn contract_skip_duality_on_basis_vectors() {
        let a = random_tensor(vec![2, 3, 4, 2], 8);
        let mut r = rng::stream(9, 0);
        let u: Vec<Vec<f64>> = a.shape().iter().map(|&n| rng::gaussian_vec(&mut r, n)).collect();
        for mode in 0..a.order() {
            let refs: Vec<&[f64]> = u.iter().map(|v| v.as_slice()).collect();
            let v = a.contract_skip(&refs, mode).unwrap();
            for b in 0..a.shape()[mode] {
                let basis = e(a.shape()[mode], b);
                let mut swapped = refs.clone();
                swapped[mode] = &basis;
                let want = brute_contract(&a, &swapped);
                assert!((v[b] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn multilinear_transform_examples() {
        let a = random_tensor(vec![2, 3, 2], 3);
        let eye: Vec<DMatrix<f64>> = a.shape().iter().map(|&n| DMatrix::identity(n, n)).collect();
        assert_eq!(a.multilinear_transform(&eye).unwrap(), a);

        let m = DenseTensor::from_fn(vec![3, 3], |i| if i == [0, 0] { 1.0 } else { 0.0 }).unwrap();
        let e1 = DMatrix::from_column_slice(3, 1, &e(3, 0));
        let t = m.multilinear_transform(&[e1.clone(), e1]).unwrap();
        assert_eq!(t.shape(), &[1, 1]);
        assert_eq!(t.data(), &[1.0]);

        assert!(a.multilinear_transform(&eye[..2]).is_err());
    }

    #[test]
    fn multilinear_transform_entries_match_direct_sum() {
        let a = random_tensor(vec![2, 2, 2], 11);
        let mut r = rng::stream(12, 0);
        let mats: Vec<DMatrix<f64>> = (0..3)
            .map(|_| DMatrix::from_vec(2, 2, rng::gaussian_vec(&mut r, 4)))
            .collect();
        let t = a.multilinear_transform(&mats).unwrap();
        for j in 0..8usize {
            let jj = [j >> 2 & 1, j >> 1 & 1, j & 1];
            let mut want = 0.0;
            for a0 in 0..2 {
                for a1 in 0..2 {
                    for a2 in 0..2 {
                        want += a.get(&[a0, a1, a2])
                            * mats[0][(a0, jj[0])]
                            * mats[1][(a1, jj[1])]
                            * mats[2][(a2, jj[2])];
                    }
                }
            }
            assert!((t.get(&jj) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn diag_k_examples() {
        let one = DenseTensor::new(vec![1, 1, 1], vec![4.5]).unwrap();
        assert_eq!(one.diag_k().unwrap(), vec![4.5]);
        let t = DenseTensor::from_fn(vec![2, 2, 2], |i| match i {
            [0, 0, 0] => 3.0,
            [1, 1, 1] => 5.0,
            _ => 0.0,
        })
        .unwrap();
        assert_eq!(t.diag_k().unwrap(), vec![3.0, 5.0]);
        let rnd = random_tensor(vec![3, 3, 3], 4);
        let d = rnd.diag_k().unwrap();
        for j in 0..3 {
            assert_eq!(d[j], rnd.get(&[j, j, j]));
        }
        assert!(random_tensor(vec![2, 3], 1).diag_k().is_err());
    }

    #[test]
    fn rank1_sum_examples() {
        let u = DMatrix::from_column_slice(2, 1, &[0.6, 0.8]);
        let t = rank1_sum(&[u.clone(), u.clone(), u.clone()], &[1.0]).unwrap();
        assert!((t.frobenius() - 1.0).abs() < 1e-15);
        let z = rank1_sum(&[u.clone(), u.clone()], &[0.0]).unwrap();
        assert_eq!(z.frobenius(), 0.0);
        assert!(rank1_sum(&[u.clone()], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rank1_sum_matches_outer_product_oracle() {
        let mut r = rng::stream(13, 0);
        let f: Vec<DMatrix<f64>> = [3usize, 2, 4]
            .iter()
            .map(|&n| DMatrix::from_vec(n, 2, rng::gaussian_vec(&mut r, 2 * n)))
            .collect();
        let lambda = [1.5, -0.7];
        let t = rank1_sum(&f, &lambda).unwrap();
        for i0 in 0..3 {
            for i1 in 0..2 {
                for i2 in 0..4 {
                    let want: f64 = (0..2)
                        .map(|j| lambda[j] * f[0][(i0, j)] * f[1][(i1, j)] * f[2][(i2, j)])
                        .sum();
                    assert!((t.get(&[i0, i1, i2]) - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn norms() {
        assert_eq!(DenseTensor::zeros(vec![2, 2]).unwrap().frobenius(), 0.0);
        let e11 = DenseTensor::from_fn(vec![2, 2], |i| if i == [0, 0] { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(e11.frobenius(), 1.0);
        assert!((ones(vec![2, 2, 2]).frobenius() - 8f64.sqrt()).abs() < 1e-15);
        let a = random_tensor(vec![3, 2], 2);
        assert!((a.inner(&a).unwrap() - a.frobenius().powi(2)).abs() < 1e-12);
        assert!(a.inner(&ones(vec![2, 3])).is_err());
    }

    #[test]
    fn orthonormal_transform_preserves_norm() {
        let a = random_tensor(vec![3, 4, 2], 21);
        let mut r = rng::stream(22, 0);
        let mats: Vec<DMatrix<f64>> = a
            .shape()
            .iter()
            .map(|&n| crate::linalg::random_orthonormal(n, n, &mut r).unwrap())
            .collect();
        let t = a.multilinear_transform(&mats).unwrap();
        assert!((t.frobenius() - a.frobenius()).abs() <= 1e-12 * a.frobenius());
    }

    #[test]
    fn dtf_parsing() {
        let t = DenseTensor::parse_dtf("2\n2 3\n1 2\n3\n\n 4   5\t6\n").unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.get(&[1, 0]), 4.0);
        assert!(DenseTensor::parse_dtf("2\n2 3\n1 2 3 4 5\n").is_err());
        assert!(DenseTensor::parse_dtf("2\n2 3\n1 2 3 4 5 6 7\n").is_err());
        assert!(DenseTensor::parse_dtf("3\n2 3\n1 2 3 4 5 6\n").is_err());
        assert!(DenseTensor::parse_dtf("2\n2 3\n1 2 3 4 5 x\n").is_err());
        assert!(DenseTensor::parse_dtf("").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dtf_round_trip(seed in 0u64..1000, dims in proptest::collection::vec(1usize..4, 1..5)) {
                let a = random_tensor(dims, seed);
                let back = DenseTensor::parse_dtf(&a.to_dtf()).unwrap();
                prop_assert_eq!(back, a);
            }

            #[test]
            fn contract_full_is_multilinear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0, mode in 0usize..3) {
                let a = random_tensor(vec![3, 2, 4], seed);
                let mut r = rng::stream(seed, 1);
                let u: Vec<Vec<f64>> = a.shape().iter().map(|&n| rng::gaussian_vec(&mut r, n)).collect();
                let w = rng::gaussian_vec(&mut r, a.shape()[mode]);
                let mix: Vec<f64> = u[mode].iter().zip(&w).map(|(x, y)| alpha * x + beta * y).collect();
                let mut refs: Vec<&[f64]> = u.iter().map(|v| v.as_slice()).collect();
                let fu = a.contract_full(&refs).unwrap();
                refs[mode] = &w;
                let fw = a.contract_full(&refs).unwrap();
                refs[mode] = &mix;
                let fmix = a.contract_full(&refs).unwrap();
                let want = alpha * fu + beta * fw;
                prop_assert!((fmix - want).abs() <= 1e-12 * (alpha.abs() * fu.abs() + beta.abs() * fw.abs()).max(1.0));
            }
        }
    }
}
