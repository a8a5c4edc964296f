//! Sparse storage and the two linear solvers used by the time loop: a banded
//! LU with partial pivoting and ILU(0)-preconditioned BiCGSTAB.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from rows given in order; entries within a row may be unsorted
    /// and duplicates are summed.
    pub fn from_rows<I>(n: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if c >= n {
                    return Err(Error::Index(format!("column {c} out of range for n = {n}")));
                }
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        if indptr.len() != n + 1 {
            return Err(Error::Index(format!("expected {n} rows, got {}", indptr.len() - 1)));
        }
        Ok(Self { n, indptr, indices, values })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[p] * x[self.indices[p]];
            }
            *o = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out);
        out
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let c = self.indices[p];
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }

    /// `||b - A x|| / ||b||` (absolute norm when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let num = ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let den = norm(b);
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LU factors of a banded matrix with row interchanges, column-major band
/// storage with `kl` extra rows for fill-in.
///
/// Per-column nonzero extents are tracked so that work follows the actual
/// profile rather than the full band (the Neumann rows are much wider than
/// the stencil rows).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// Number of stored multipliers below the diagonal in column `j`.
    lext: Vec<usize>,
    /// First row with a nonzero of `U` in column `j`.
    utop: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[j * ldab + kv + i - j] = v;
            }
        }
        let mut ipiv = vec![0; n];
        let mut lext = vec![0; n];
        // Last column touched by any pivot row so far.
        let mut ju = 0usize;
        for j in 0..n {
            let base = j * ldab + kv;
            let mut km = kl.min(n - 1 - j);
            while km > 0 && ab[base + km] == 0.0 {
                km -= 1;
            }
            let mut jp = 0;
            let mut best = ab[base].abs();
            for i in 1..=km {
                let v = ab[base + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            lext[j] = km;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Linear(format!("singular or non-finite pivot in column {j}")));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let p = c * ldab + kv;
                    ab.swap(p + j - c, p + j + jp - c);
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[base];
                for v in &mut ab[base + 1..=base + km] {
                    *v *= inv;
                }
                for c in j + 1..=ju {
                    let (left, right) = ab.split_at_mut(c * ldab);
                    let off = kv + j - c;
                    let a = right[off];
                    if a != 0.0 {
                        let lcol = &left[base + 1..=base + km];
                        for (t, l) in right[off + 1..=off + km].iter_mut().zip(lcol) {
                            *t -= l * a;
                        }
                    }
                }
            }
        }
        let mut utop = vec![0; n];
        for (j, top) in utop.iter_mut().enumerate() {
            let mut i = j.saturating_sub(kv);
            while i < j && ab[j * ldab + kv + i - j] == 0.0 {
                i += 1;
            }
            *top = i;
        }
        Ok(Self { n, kl, ku, ldab, ab, ipiv, lext, utop })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidths of the factored matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Solve in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, ldab) = (self.n, self.ldab);
        let kv = self.kl + self.ku;
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let km = self.lext[j];
            let bj = b[j];
            if bj != 0.0 && km > 0 {
                let base = j * ldab + kv;
                for (t, l) in b[j + 1..=j + km].iter_mut().zip(&self.ab[base + 1..=base + km]) {
                    *t -= l * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab;
            b[j] /= self.ab[col + kv];
            let bj = b[j];
            if bj != 0.0 {
                let top = self.utop[j];
                let off = col + kv - j;
                for (i, t) in b[top..j].iter_mut().enumerate() {
                    *t -= self.ab[off + top + i] * bj;
                }
            }
        }
    }
}

/// Incomplete LU with zero fill on the pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in lu.indptr[i]..lu.indptr[i + 1] {
                if lu.indices[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Linear(format!("ILU(0): missing diagonal in row {i}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (rs, re) = (lu.indptr[i], lu.indptr[i + 1]);
            for p in rs..re {
                pos[lu.indices[p]] = p;
            }
            for p in rs..diag[i] {
                let k = lu.indices[p];
                let piv = lu.values[diag[k]];
                if piv == 0.0 {
                    return Err(Error::Linear(format!("ILU(0): zero pivot in row {k}")));
                }
                let m = lu.values[p] / piv;
                lu.values[p] = m;
                for q in diag[k] + 1..lu.indptr[k + 1] {
                    let c = lu.indices[q];
                    let t = pos[c];
                    if t != usize::MAX {
                        lu.values[t] -= m * lu.values[q];
                    }
                }
            }
            for p in rs..re {
                pos[lu.indices[p]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(Error::Linear(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    pub fn apply(&self, b: &[f64], out: &mut [f64]) {
        let n = self.lu.n;
        for i in 0..n {
            let mut s = b[i];
            for p in self.lu.indptr[i]..self.diag[i] {
                s -= self.lu.values[p] * out[self.lu.indices[p]];
            }
            out[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = out[i];
            for p in self.diag[i] + 1..self.lu.indptr[i + 1] {
                s -= self.lu.values[p] * out[self.lu.indices[p]];
            }
            out[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Right-preconditioned BiCGSTAB; `x` holds the initial guess on entry.
pub fn bicgstab(a: &CsrMatrix, m: &Ilu0, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<KrylovStats> {
    let n = a.n;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovStats { iterations: 0, residual: 0.0 });
    }
    let mut r = a.matvec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if norm(&r) / bnorm <= tol {
        return Ok(KrylovStats { iterations: 0, residual: norm(&r) / bnorm });
    }
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::Linear(format!("BiCGSTAB breakdown (rho) at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut phat);
        a.matvec_into(&phat, &mut v);
        let rv = dot(&rhat, &v);
        if rv == 0.0 {
            return Err(Error::Linear(format!("BiCGSTAB breakdown (r.v) at iteration {it}")));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(KrylovStats { iterations: it, residual: a.relative_residual(x, b) });
        }
        m.apply(&s, &mut shat);
        a.matvec_into(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Linear(format!("BiCGSTAB breakdown (t.t) at iteration {it}")));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(KrylovStats { iterations: it, residual: a.relative_residual(x, b) });
        }
        if omega == 0.0 {
            return Err(Error::Linear(format!("BiCGSTAB breakdown (omega) at iteration {it}")));
        }
    }
    Err(Error::Linear(format!(
        "BiCGSTAB did not converge in {max_iter} iterations (residual {:e})",
        a.relative_residual(x, b)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Random banded, non-symmetric matrix, made non-singular by a dominant
    /// diagonal that is sometimes placed off the diagonal to force pivoting.
    fn banded(n: usize, kl: usize, ku: usize, seed: u64, swap: bool) -> CsrMatrix {
        let mut s = seed;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let rows = (0..n).map(|i| {
            let mut row = Vec::new();
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                row.push((j, rnd()));
            }
            let dom = if swap && i % 3 == 1 && i >= 1 { i - 1 } else { i };
            row.push((dom, 4.0 + kl as f64 + ku as f64));
            row
        });
        CsrMatrix::from_rows(n, rows).unwrap()
    }

    fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.n;
        let mut m = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                m[i][j] = v;
            }
            m[i][n] = b[i];
        }
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap()).unwrap();
            m.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn csr_duplicates_are_summed() {
        let a = CsrMatrix::from_rows(2, vec![vec![(1, 1.0), (0, 2.0), (1, 3.0)], vec![(0, 1.0)]]).unwrap();
        assert_eq!(a.indices, vec![0, 1, 0]);
        assert_eq!(a.values, vec![2.0, 4.0, 1.0]);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![6.0, 1.0]);
        assert!(CsrMatrix::from_rows(2, vec![vec![(2, 1.0)], vec![]]).is_err());
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        // Zero leading pivot.
        let a = CsrMatrix::from_rows(2, vec![vec![(1, 1.0)], vec![(0, 2.0), (1, 1.0)]]).unwrap();
        let lu = BandedLu::factor(&a).unwrap();
        let mut b = vec![3.0, 5.0];
        lu.solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-15 && (b[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]).unwrap();
        assert!(BandedLu::factor(&a).is_err());
    }

    proptest! {
        #[test]
        fn banded_lu_matches_dense(n in 1usize..40, kl in 0usize..6, ku in 0usize..6, seed in any::<u64>(), swap in any::<bool>()) {
            let a = banded(n, kl, ku, seed, swap);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let want = dense_solve(&a, &b);
            let lu = BandedLu::factor(&a).unwrap();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            for i in 0..n {
                prop_assert!((x[i] - want[i]).abs() <= 1e-10 * (1.0 + want[i].abs()));
            }
            prop_assert!(a.relative_residual(&x, &b) <= 1e-12);
        }

        #[test]
        fn bicgstab_matches_lu(n in 5usize..200, kl in 1usize..5, ku in 1usize..5, seed in any::<u64>()) {
            let a = banded(n, kl, ku, seed, false);
            let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
            let ilu = Ilu0::factor(&a).unwrap();
            let mut x = vec![0.0; n];
            let st = bicgstab(&a, &ilu, &b, &mut x, 1e-12, 500).unwrap();
            prop_assert!(st.residual <= 1e-10);
            let lu = BandedLu::factor(&a).unwrap();
            let mut y = b.clone();
            lu.solve_in_place(&mut y);
            for i in 0..n {
                prop_assert!((x[i] - y[i]).abs() <= 1e-8 * (1.0 + y[i].abs()));
            }
        }
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        // No fill-in for tridiagonal matrices, so ILU(0) = LU.
        let n = 50;
        let rows = (0..n).map(|i| {
            let mut r = vec![(i, 2.5)];
            if i > 0 {
                r.push((i - 1, -1.0));
            }
            if i + 1 < n {
                r.push((i + 1, -0.7));
            }
            r
        });
        let a = CsrMatrix::from_rows(n, rows).unwrap();
        let ilu = Ilu0::factor(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut x = vec![0.0; n];
        ilu.apply(&b, &mut x);
        assert!(a.relative_residual(&x, &b) < 1e-14);
    }
}
