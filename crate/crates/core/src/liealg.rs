//! Root systems, Chevalley bases and pointwise Lie algebra arithmetic for
//! sl(n, C), including the Killing identification of the algebra with its
//! dual.
//!
//! Conventions, fixed once and used by every module downstream:
//!
//! * Vectors in `g` are coefficient columns over the basis
//!   `x_1 .. x_r, e_{b_1} .. e_{b_m}, e_{-b_1} .. e_{-b_m}` (orthonormal
//!   Cartan first, then positive roots by height-then-lex, then mirrored
//!   negatives).
//! * Covectors in `g*` are coefficient columns over the dual basis, so the
//!   pairing of a covector with a vector is the plain dot product.
//! * `e_{-a}` is rescaled so that `killing(e_a, e_{-a}) = 1`, which makes
//!   `[e_a, e_{-a}] = h_a` with `h_a` the Killing-sharp of the root `a`.
//! * `ad_star(x) = ad(x)^T` and `group_ad_star(x) = Ad(x)^T` are the right
//!   coadjoint actions `<ad_star(x) k, y> = <k, [x, y]>` used by all the
//!   r-matrix and groupoid formulas; `coad(x) = -ad(x)^T` is the left
//!   coadjoint representation.
//! * Cartan covectors (elements of `h*`) are length-`r` columns over the
//!   basis dual to `(x_i)`; the root-space pairing of two of them is the
//!   plain dot product because `(x_i)` is orthonormal.

use crate::error::{Error, Result};
use crate::numerics::{cr, CMat, CVec, C};
use std::collections::HashMap;

/// Supported series of simple Lie algebras.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    A,
}

impl std::str::FromStr for Series {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Series::A),
            other => Err(Error::UnsupportedSeries(other.to_string())),
        }
    }
}

/// One root, stored both abstractly and in the concrete realization.
#[derive(Debug, Clone)]
pub struct Root {
    /// Integer coordinates in the simple-root basis.
    pub coeffs: Vec<i64>,
    /// Elementary-matrix indices: the root eps_i - eps_j maps to (i, j).
    pub pair: (usize, usize),
    /// Coordinates of the root as a covector on the orthonormal Cartan,
    /// i.e. alpha(x_k).
    pub hstar: CVec,
    /// Sum of simple-root coefficients.
    pub height: i64,
}

impl Root {
    pub fn is_positive(&self) -> bool {
        self.height > 0
    }
}

/// Root system data for one simple series.
#[derive(Debug, Clone)]
pub struct RootSystem {
    pub rank: usize,
    pub roots: Vec<Root>,
    /// Indices into `roots` of the simple system.
    pub simple: Vec<usize>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    /// Killing-induced pairing of simple roots, (alpha_i, alpha_j).
    pub pairing: Vec<Vec<f64>>,
    /// Index of the opposite root.
    pub neg_of: Vec<usize>,
}

impl RootSystem {
    /// Pairing (alpha, lambda) of a root with a Cartan covector.
    pub fn root_pair(&self, root: usize, lambda: &CVec) -> C {
        self.roots[root].hstar.dot(lambda)
    }
}

/// Basis label of the adjoint module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    /// Orthonormal Cartan element x_i.
    Cartan(usize),
    /// Root vector e_a, index into `RootSystem::roots`.
    Root(usize),
}

/// A simple complex Lie algebra in a fixed Chevalley-type basis.
#[derive(Debug, Clone)]
pub struct SimpleLieAlgebra {
    pub series: Series,
    pub rootsystem: RootSystem,
    /// Size of the defining representation (n for sl(n)).
    pub n: usize,
    /// Dimension of the algebra.
    pub dim: usize,
    pub basis: Vec<BasisLabel>,
    /// Defining-representation matrix of each basis element.
    pub defrep: Vec<CMat>,
    /// Structure tensor packaged as ad matrices: ad_mats[k] = ad(b_k).
    pub ad_mats: Vec<CMat>,
    /// Killing Gram matrix in the basis.
    pub killing: CMat,
    pub killing_inv: CMat,
    /// Structure constants N_{a,b} with [e_a, e_b] = N_{a,b} e_{a+b},
    /// keyed by root indices.
    pub nmap: HashMap<(usize, usize), C>,
    /// basis index of the root vector for each root index
    pub root_slot: Vec<usize>,
}

/// Element of the algebra (or, by the dual-basis convention, of its dual).
#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    pub coeffs: CVec,
}

impl AlgElement {
    pub fn new(coeffs: CVec) -> Self {
        Self { coeffs }
    }
    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: CVec::zeros(dim),
        }
    }
}

/// Build the algebra for a series and rank.
pub fn build_algebra(series: Series, rank: usize) -> Result<SimpleLieAlgebra> {
    match series {
        Series::A => build_type_a(rank),
    }
}

fn elementary(n: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = cr(1.0);
    m
}

fn build_type_a(rank: usize) -> Result<SimpleLieAlgebra> {
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    let n = rank + 1;
    let kappa = |a: &CMat, b: &CMat| -> C { (a * b).trace() * cr(2.0 * n as f64) };

    // Positive roots by closure of the simple system under addition; the
    // membership test is a nonzero commutator of elementary matrices.
    let mut positives: Vec<(Vec<i64>, (usize, usize))> = (0..rank)
        .map(|i| {
            let mut c = vec![0i64; rank];
            c[i] = 1;
            (c, (i, i + 1))
        })
        .collect();
    loop {
        let mut added = false;
        let snapshot = positives.clone();
        for (gc, gp) in &snapshot {
            for s in 0..rank {
                let sp = (s, s + 1);
                let comm = &elementary(n, gp.0, gp.1) * &elementary(n, sp.0, sp.1)
                    - &elementary(n, sp.0, sp.1) * &elementary(n, gp.0, gp.1);
                if comm.iter().any(|z| z.norm() > 0.5) {
                    // locate the (single) nonzero entry
                    let mut pair = None;
                    for i in 0..n {
                        for j in 0..n {
                            if comm[(i, j)].norm() > 0.5 {
                                pair = Some((i, j));
                            }
                        }
                    }
                    let pair = pair.unwrap();
                    if pair.0 < pair.1 && !positives.iter().any(|(_, p)| *p == pair) {
                        let mut c = gc.clone();
                        c[s] += 1;
                        positives.push((c, pair));
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }
    positives.sort_by(|a, b| {
        let ha: i64 = a.0.iter().sum();
        let hb: i64 = b.0.iter().sum();
        ha.cmp(&hb).then(a.0.cmp(&b.0))
    });

    // Orthonormal Cartan basis under the Killing form 2n tr(xy).
    let mut cartan: Vec<CMat> = Vec::with_capacity(rank);
    for k in 1..=rank {
        let c = 1.0 / (2.0 * n as f64 * (k * (k + 1)) as f64).sqrt();
        let mut m = CMat::zeros(n, n);
        for i in 0..k {
            m[(i, i)] = cr(c);
        }
        m[(k, k)] = cr(-(k as f64) * c);
        cartan.push(m);
    }

    // Roots: positives then mirrored negatives.
    let m = positives.len();
    let mut roots = Vec::with_capacity(2 * m);
    for (c, p) in &positives {
        let hstar = CVec::from_fn(rank, |k, _| {
            let x = &cartan[k];
            x[(p.0, p.0)] - x[(p.1, p.1)]
        });
        roots.push(Root {
            coeffs: c.clone(),
            pair: *p,
            hstar,
            height: c.iter().sum(),
        });
    }
    for k in 0..m {
        let r = &roots[k];
        roots.push(Root {
            coeffs: r.coeffs.iter().map(|v| -v).collect(),
            pair: (r.pair.1, r.pair.0),
            hstar: r.hstar.map(|z| -z),
            height: -r.height,
        });
    }
    let neg_of: Vec<usize> = (0..2 * m).map(|k| (k + m) % (2 * m)).collect();
    let simple: Vec<usize> = (0..2 * m)
        .filter(|k| roots[*k].height == 1 && roots[*k].coeffs.iter().sum::<i64>() == 1)
        .filter(|k| roots[*k].coeffs.iter().all(|c| *c == 0 || *c == 1))
        .filter(|k| roots[*k].coeffs.iter().filter(|c| **c == 1).count() == 1)
        .collect();

    // Defining representation: e_a = E_ij for positive a, and the dual
    // normalization e_{-a} = E_ji / (2n) so that killing(e_a, e_{-a}) = 1.
    let mut basis = Vec::with_capacity(rank + 2 * m);
    let mut defrep = Vec::with_capacity(rank + 2 * m);
    for (i, x) in cartan.iter().enumerate() {
        basis.push(BasisLabel::Cartan(i));
        defrep.push(x.clone());
    }
    let mut root_slot = vec![0usize; 2 * m];
    for (ri, root) in roots.iter().enumerate() {
        let (i, j) = root.pair;
        let scale = if root.is_positive() {
            1.0
        } else {
            1.0 / (2.0 * n as f64)
        };
        root_slot[ri] = basis.len();
        basis.push(BasisLabel::Root(ri));
        defrep.push(elementary(n, i, j).map(|z| z * cr(scale)));
    }
    let dim = basis.len();

    // Killing Gram matrix and its inverse.
    let killing = CMat::from_fn(dim, dim, |i, j| kappa(&defrep[i], &defrep[j]));
    let killing_inv = killing
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;

    // Expansion of an arbitrary defining-rep matrix in the basis.
    let expand = |mat: &CMat| -> CVec {
        let pairings = CVec::from_fn(dim, |j, _| kappa(mat, &defrep[j]));
        &killing_inv * pairings
    };

    // Structure tensor as ad matrices.
    let mut ad_mats = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let comm = &defrep[k] * &defrep[j] - &defrep[j] * &defrep[k];
            cols.push(expand(&comm));
        }
        ad_mats.push(CMat::from_columns(&cols));
    }

    // N_{a,b} for root pairs with a + b a root.
    let mut nmap = HashMap::new();
    for (a, ra) in roots.iter().enumerate() {
        for (b, rb) in roots.iter().enumerate() {
            let sum: Vec<i64> = ra
                .coeffs
                .iter()
                .zip(rb.coeffs.iter())
                .map(|(x, y)| x + y)
                .collect();
            if let Some(c) = roots.iter().position(|r| r.coeffs == sum) {
                let comm = &defrep[root_slot[a]] * &defrep[root_slot[b]]
                    - &defrep[root_slot[b]] * &defrep[root_slot[a]];
                let coeffs = expand(&comm);
                nmap.insert((a, b), coeffs[root_slot[c]]);
            }
        }
    }

    let pairing = (0..rank)
        .map(|i| {
            (0..rank)
                .map(|j| {
                    let si = simple[i];
                    let sj = simple[j];
                    roots[si].hstar.dot(&roots[sj].hstar).re
                })
                .collect()
        })
        .collect();

    Ok(SimpleLieAlgebra {
        series: Series::A,
        rootsystem: RootSystem {
            rank,
            roots,
            simple,
            positive: (0..m).collect(),
            negative: (m..2 * m).collect(),
            pairing,
            neg_of,
        },
        n,
        dim,
        basis,
        defrep,
        ad_mats,
        killing,
        killing_inv,
        nmap,
        root_slot,
    })
}

impl SimpleLieAlgebra {
    pub fn rank(&self) -> usize {
        self.rootsystem.rank
    }

    /// Defining-rep matrix of a coefficient vector.
    pub fn to_matrix(&self, v: &CVec) -> CMat {
        let mut out = CMat::zeros(self.n, self.n);
        for (k, b) in self.defrep.iter().enumerate() {
            out += b.map(|z| z * v[k]);
        }
        out
    }

    /// Expand a traceless defining-rep matrix in the basis.
    pub fn expand(&self, mat: &CMat) -> CVec {
        let pairings = CVec::from_fn(self.dim, |j, _| self.kappa_mat(mat, &self.defrep[j]));
        &self.killing_inv * pairings
    }

    fn kappa_mat(&self, a: &CMat, b: &CMat) -> C {
        (a * b).trace() * cr(2.0 * self.n as f64)
    }

    /// Lie bracket of coefficient vectors.
    pub fn bracket(&self, x: &CVec, y: &CVec) -> Result<CVec> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len().max(y.len()),
            });
        }
        Ok(self.ad(x) * y)
    }

    /// Killing form of two algebra vectors.
    pub fn killing_form(&self, x: &CVec, y: &CVec) -> C {
        (x.transpose() * &self.killing * y)[(0, 0)]
    }

    /// Killing-sharp g* -> g in dual/primal coordinates.
    pub fn sharp(&self, xi: &CVec) -> CVec {
        &self.killing_inv * xi
    }

    /// Killing-flat g -> g*.
    pub fn flat(&self, x: &CVec) -> CVec {
        &self.killing * x
    }

    /// ad(x) as a dim x dim matrix.
    pub fn ad(&self, x: &CVec) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            if x[k].norm() != 0.0 {
                out += self.ad_mats[k].map(|z| z * x[k]);
            }
        }
        out
    }

    /// Left coadjoint representation, <coad(x) k, y> = -<k, [x, y]>.
    pub fn coad(&self, x: &CVec) -> CMat {
        -self.ad(x).transpose()
    }

    /// Right coadjoint action used by the r-matrix and cocycle formulas,
    /// <ad_star(x) k, y> = <k, [x, y]>.
    pub fn ad_star(&self, x: &CVec) -> CMat {
        self.ad(x).transpose()
    }

    /// Adjoint action of a group element (defining-rep matrix) on g.
    pub fn group_ad(&self, g: &CMat) -> Result<CMat> {
        let gi = g.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let cols: Vec<CVec> = (0..self.dim)
            .map(|k| self.expand(&(g * &self.defrep[k] * &gi)))
            .collect();
        Ok(CMat::from_columns(&cols))
    }

    /// Left coadjoint action of the group, coAd(g) = Ad(g^{-1})^T.
    pub fn group_coad(&self, g: &CMat) -> Result<CMat> {
        let gi = g.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        Ok(self.group_ad(&gi)?.transpose())
    }

    /// Right coadjoint action of the group, Ad*(g) = Ad(g)^T; this is the
    /// `Ad^*` of the groupoid cocycle formulas.
    pub fn group_ad_star(&self, g: &CMat) -> Result<CMat> {
        Ok(self.group_ad(g)?.transpose())
    }

    /// Basis slot of a root vector.
    pub fn slot(&self, root: usize) -> usize {
        self.root_slot[root]
    }

    /// Restriction g* -> h* (Cartan components of a covector).
    pub fn istar(&self, xi: &CVec) -> CVec {
        CVec::from_fn(self.rank(), |i, _| xi[i])
    }

    /// Inclusion h -> g of a Cartan coefficient vector.
    pub fn embed_h(&self, z: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim);
        for i in 0..self.rank() {
            out[i] = z[i];
        }
        out
    }

    /// Extension h* -> g* by zero on the root spaces.
    pub fn embed_hstar(&self, lambda: &CVec) -> CVec {
        self.embed_h(lambda)
    }

    /// h-part of a g-vector.
    pub fn cartan_part(&self, x: &CVec) -> CVec {
        CVec::from_fn(self.rank(), |i, _| x[i])
    }

    /// Cartan-subgroup element exp(Z) for Z in h, as a defining-rep matrix.
    pub fn cartan_group(&self, z: &CVec) -> CMat {
        crate::numerics::mat_exp(&self.to_matrix(&self.embed_h(z)))
    }

    /// True when the matrix lies in the chosen Cartan subgroup (diagonal,
    /// unimodular for type A).
    pub fn in_cartan_group(&self, g: &CMat, tol: f64) -> bool {
        let mut off = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    off = off.max(g[(i, j)].norm());
                }
            }
        }
        off <= tol && (g.determinant() - cr(1.0)).norm() <= tol
    }

    /// Coadjoint action of the Cartan subgroup on h*; trivial when h is
    /// abelian but kept general.
    pub fn coad_h_on_hstar(&self, h: &CMat) -> Result<CMat> {
        let hi = h.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let r = self.rank();
        let mut mat = CMat::zeros(r, r);
        for i in 0..r {
            let moved = self.expand(&(&hi * &self.defrep[i] * h));
            for j in 0..r {
                mat[(j, i)] = moved[j];
            }
        }
        // <coAd(h) p, x_i> = <p, Ad(h^{-1}) x_i>
        Ok(mat.transpose())
    }

    /// ad*_Z q for Z in h, q in h*: the transpose of ad(Z) restricted to h.
    /// Identically zero for an abelian Cartan, computed rather than assumed.
    pub fn ad_star_h(&self, z: &CVec, q: &CVec) -> CVec {
        let r = self.rank();
        CVec::from_fn(r, |i, _| {
            let ei = CVec::from_fn(r, |k, _| if k == i { cr(1.0) } else { cr(0.0) });
            let br = self.ad(&self.embed_h(z)) * self.embed_h(&ei);
            q.dot(&self.cartan_part(&br))
        })
    }

    /// Pairing on h* induced by the Killing form (plain dot in the
    /// orthonormal coordinates).
    pub fn hstar_pair(&self, a: &CVec, b: &CVec) -> C {
        a.dot(b)
    }

    /// The covector of a root on the Cartan.
    pub fn root_covector(&self, root: usize) -> CVec {
        self.rootsystem.roots[root].hstar.clone()
    }

    /// Killing-dual covector of a basis root vector: flat(e_a) is the dual
    /// basis covector sitting at the slot of e_{-a}.
    pub fn flat_root(&self, root: usize) -> CVec {
        let mut out = CVec::zeros(self.dim);
        out[self.slot(self.rootsystem.neg_of[root])] = cr(1.0);
        out
    }
}
