//! Product-space bookkeeping for uniform local dimension: multi-index
//! conversions, site-local operator application (left/right) on dense
//! matrices, dense embeddings, partial trace and partial transpose.
//!
//! Basis states are big-endian digit strings: site 0 is the most significant
//! digit, so the stride of site `s` is `d^(n-1-s)` and rows of a row-major
//! density matrix are contiguous in the last site's digit.

use crate::C64;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2};

/// Tensor-product space of `n_sites` factors of dimension `local_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProductBasis {
    pub n_sites: usize,
    pub local_dim: usize,
}

impl ProductBasis {
    pub fn new(n_sites: usize, local_dim: usize) -> Self {
        Self { n_sites, local_dim }
    }

    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n_sites as u32)
    }

    /// Stride of site `s` in the flattened index.
    pub fn stride(&self, site: usize) -> usize {
        self.local_dim.pow((self.n_sites - 1 - site) as u32)
    }

    pub fn digit(&self, idx: usize, site: usize) -> usize {
        (idx / self.stride(site)) % self.local_dim
    }

    pub fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_sites];
        for s in (0..self.n_sites).rev() {
            out[s] = idx % self.local_dim;
            idx /= self.local_dim;
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.local_dim + d)
    }
}

/// A sparse operator acting on one site: list of (local_row, local_col,
/// coefficient) triplets.
#[derive(Clone, Debug)]
pub struct SiteOp {
    pub site: usize,
    pub elems: Vec<(usize, usize, C64)>,
}

impl SiteOp {
    pub fn new(site: usize, elems: Vec<(usize, usize, C64)>) -> Self {
        Self { site, elems }
    }

    pub fn from_real(site: usize, elems: &[(usize, usize, f64)]) -> Self {
        Self {
            site,
            elems: elems
                .iter()
                .map(|&(r, c, v)| (r, c, C64::new(v, 0.0)))
                .collect(),
        }
    }

    pub fn dagger(&self) -> Self {
        Self {
            site: self.site,
            elems: self.elems.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    /// out += scale · Op · src
    pub fn apply_left_into(
        &self,
        basis: ProductBasis,
        src: &ArrayView2<C64>,
        scale: C64,
        out: &mut ArrayViewMut2<C64>,
    ) {
        let st = basis.stride(self.site);
        let d = basis.local_dim;
        let block = st * d;
        let dim = basis.dim();
        for &(lo, li, w) in &self.elems {
            let c = scale * w;
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut base = 0;
            while base < dim {
                let ro = base + lo * st;
                let ri = base + li * st;
                for low in 0..st {
                    let src_row = src.row(ri + low);
                    let mut out_row = out.row_mut(ro + low);
                    out_row.scaled_add(c, &src_row);
                }
                base += block;
            }
        }
    }

    /// out += scale · src · Op
    pub fn apply_right_into(
        &self,
        basis: ProductBasis,
        src: &ArrayView2<C64>,
        scale: C64,
        out: &mut ArrayViewMut2<C64>,
    ) {
        let st = basis.stride(self.site);
        let d = basis.local_dim;
        let block = st * d;
        let dim = basis.dim();
        for &(lo, li, w) in &self.elems {
            // (src·Op)[r, env⊕li] += src[r, env⊕lo] · w
            let c = scale * w;
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..dim {
                let src_row = src.row(r);
                let mut out_row = out.row_mut(r);
                let mut base = 0;
                while base < dim {
                    let ci = base + lo * st;
                    let co = base + li * st;
                    for low in 0..st {
                        out_row[co + low] += c * src_row[ci + low];
                    }
                    base += block;
                }
            }
        }
    }

    /// Dense dim × dim embedding.
    pub fn to_dense(&self, basis: ProductBasis) -> Array2<C64> {
        let dim = basis.dim();
        let st = basis.stride(self.site);
        let d = basis.local_dim;
        let block = st * d;
        let mut out = Array2::zeros((dim, dim));
        for &(lo, li, w) in &self.elems {
            let mut base = 0;
            while base < dim {
                for low in 0..st {
                    out[[base + lo * st + low, base + li * st + low]] += w;
                }
                base += block;
            }
        }
        out
    }
}

/// Dense embedding of a product of two single-site operators on distinct
/// sites, A_i · B_j.
pub fn embed_pair(
    basis: ProductBasis,
    a: &SiteOp,
    b: &SiteOp,
) -> Array2<C64> {
    assert_ne!(a.site, b.site, "embed_pair requires distinct sites");
    let dim = basis.dim();
    let mut out = Array2::zeros((dim, dim));
    let (si, sj) = (a.site, b.site);
    let (sti, stj) = (basis.stride(si), basis.stride(sj));
    let d = basis.local_dim;
    for &(ro_i, ri_i, wi) in &a.elems {
        for &(ro_j, ri_j, wj) in &b.elems {
            let w = wi * wj;
            for idx in 0..dim {
                if (idx / sti) % d == ri_i && (idx / stj) % d == ri_j {
                    let jdx = idx - ri_i * sti - ri_j * stj + ro_i * sti + ro_j * stj;
                    out[[jdx, idx]] += w;
                }
            }
        }
    }
    out
}

/// Product state ⊗_s kets[s].
pub fn product_state(basis: ProductBasis, kets: &[Array1<C64>]) -> Array1<C64> {
    assert_eq!(kets.len(), basis.n_sites);
    let mut out = Array1::from_elem(1, C64::new(1.0, 0.0));
    for k in kets {
        assert_eq!(k.len(), basis.local_dim);
        let mut next = Array1::zeros(out.len() * k.len());
        for (i, a) in out.iter().enumerate() {
            for (j, b) in k.iter().enumerate() {
                next[i * k.len() + j] = a * b;
            }
        }
        out = next;
    }
    out
}

/// |ψ⟩⟨ψ|
pub fn pure_density(psi: &Array1<C64>) -> Array2<C64> {
    let n = psi.len();
    Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
}

/// Partial trace keeping the listed sites (ascending order of `keep` sets the
/// factor order of the reduced space).
pub fn partial_trace(rho: &ArrayView2<C64>, basis: ProductBasis, keep: &[usize]) -> Array2<C64> {
    let d = basis.local_dim;
    let dim_keep = d.pow(keep.len() as u32);
    let traced: Vec<usize> = (0..basis.n_sites).filter(|s| !keep.contains(s)).collect();
    let dim_tr = d.pow(traced.len() as u32);
    let mut out = Array2::zeros((dim_keep, dim_keep));
    let keep_basis = ProductBasis::new(keep.len(), d);
    let tr_basis = ProductBasis::new(traced.len(), d);
    let mut digits_row = vec![0usize; basis.n_sites];
    let mut digits_col = vec![0usize; basis.n_sites];
    for ka in 0..dim_keep {
        let da = keep_basis.digits(ka);
        for kb in 0..dim_keep {
            let db = keep_basis.digits(kb);
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..dim_tr {
                let de = tr_basis.digits(e);
                for (pos, &s) in keep.iter().enumerate() {
                    digits_row[s] = da[pos];
                    digits_col[s] = db[pos];
                }
                for (pos, &s) in traced.iter().enumerate() {
                    digits_row[s] = de[pos];
                    digits_col[s] = de[pos];
                }
                acc += rho[[basis.index_of(&digits_row), basis.index_of(&digits_col)]];
            }
            out[[ka, kb]] = acc;
        }
    }
    out
}

/// Partial transpose over the listed sites.
pub fn partial_transpose(
    rho: &ArrayView2<C64>,
    basis: ProductBasis,
    sites_a: &[usize],
) -> Array2<C64> {
    let dim = basis.dim();
    let mut out = Array2::zeros((dim, dim));
    for r in 0..dim {
        let dr = basis.digits(r);
        for c in 0..dim {
            let dc = basis.digits(c);
            let mut dr2 = dr.clone();
            let mut dc2 = dc.clone();
            for &s in sites_a {
                dr2[s] = dc[s];
                dc2[s] = dr[s];
            }
            out[[basis.index_of(&dr2), basis.index_of(&dc2)]] = rho[[r, c]];
        }
    }
    out
}

/// tr(ρ · A)
pub fn expectation(rho: &ArrayView2<C64>, op: &ArrayView2<C64>) -> C64 {
    let n = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += rho[[i, j]] * op[[j, i]];
        }
    }
    acc
}
