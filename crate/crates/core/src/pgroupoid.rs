//! The trivial Lie groupoid X = U x G x U and its Poisson structures:
//! structure maps and axioms, cocycles for the adjoint-type representation,
//! the dynamical-type bivector, the seven-term bracket, brute-force and
//! analytic Jacobi checks, coisotropy of the multiplication graph, the
//! morphism from the Hamiltonian unit, and the reduction at the zero fiber.
//!
//! Covectors on X are written in right-trivialized coordinates
//! `(Z1, b, Z2)` with `Z1, Z2` in h and `b` in g*; the bivector is the
//! block matrix assembled in `pi_matrix`, and
//! `{f, g} = <df, Pi dg>`.

use crate::dynrmat::RMatrix;
use crate::error::{Error, Result};
use crate::liealg::SimpleLieAlgebra;
use crate::numerics::{cr, max_abs, max_abs_vec, numerical_rank, CMat, CVec, C};
use crate::poly::{Poly, PolyMap};
use crate::residual::Residual;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// A point (p, x, q) of U x G x U in the defining representation.
#[derive(Debug, Clone)]
pub struct GroupoidPoint {
    pub p: CVec,
    pub x: CMat,
    pub q: CVec,
}

impl GroupoidPoint {
    pub fn unit(q: &CVec, n: usize) -> Self {
        Self {
            p: q.clone(),
            x: CMat::identity(n, n),
            q: q.clone(),
        }
    }

    pub fn source(&self) -> &CVec {
        &self.p
    }

    pub fn target(&self) -> &CVec {
        &self.q
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(Self {
            p: self.q.clone(),
            x: self.x.clone().try_inverse().ok_or(Error::SingularMatrix)?,
            q: self.p.clone(),
        })
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if max_abs_vec(&(&self.q - &other.p)) > 1e-9 {
            return Err(Error::NotComposable);
        }
        Ok(Self {
            p: self.p.clone(),
            x: &self.x * &other.x,
            q: other.q.clone(),
        })
    }

    fn describe(&self) -> String {
        format!("p0={:.3}", self.p[0].re)
    }
}

/// Groupoid axiom residuals on a composable triple.
pub fn groupoid_axiom_residuals(
    g: &SimpleLieAlgebra,
    a: &GroupoidPoint,
    b: &GroupoidPoint,
    c: &GroupoidPoint,
    tol: f64,
) -> Result<Vec<Residual>> {
    let mut out = Vec::new();
    let assoc_l = a.compose(b)?.compose(c)?;
    let assoc_r = a.compose(&b.compose(c)?)?;
    out.push(Residual::new(
        "assoc",
        max_abs(&(&assoc_l.x - &assoc_r.x))
            .max(max_abs_vec(&(&assoc_l.p - &assoc_r.p)))
            .max(max_abs_vec(&(&assoc_l.q - &assoc_r.q))),
        tol,
        a.describe(),
    ));
    let unit_l = GroupoidPoint::unit(&a.p, g.n).compose(a)?;
    let unit_r = a.compose(&GroupoidPoint::unit(&a.q, g.n))?;
    out.push(Residual::new(
        "unit",
        max_abs(&(&unit_l.x - &a.x)).max(max_abs(&(&unit_r.x - &a.x))),
        tol,
        a.describe(),
    ));
    let inv = a.inverse()?;
    let left = a.compose(&inv)?;
    let right = inv.compose(a)?;
    out.push(Residual::new(
        "inverse",
        max_abs(&(&left.x - CMat::identity(g.n, g.n)))
            .max(max_abs(&(&right.x - CMat::identity(g.n, g.n))))
            .max(max_abs_vec(&(&left.q - &a.p)))
            .max(max_abs_vec(&(&right.p - &a.q))),
        tol,
        a.describe(),
    ));
    Ok(out)
}

/// Exact first-order data of a function at a point: partials along the two
/// base slots and right/left gradients along the group slot.
#[derive(Debug, Clone)]
pub struct XGrad {
    pub d1: CVec,
    pub d2: CVec,
    /// right gradient Df in g*
    pub dr: CVec,
    /// left gradient D'f in g*
    pub dl: CVec,
}

/// Polynomial test function on U x G x U; variables are the coordinates of
/// p, the matrix entries of x (row major), and the coordinates of q.
#[derive(Debug, Clone)]
pub struct XFun {
    pub poly: Poly,
    pub rank: usize,
    pub n: usize,
}

impl XFun {
    pub fn nvars(rank: usize, n: usize) -> usize {
        2 * rank + n * n
    }

    pub fn new(poly: Poly, rank: usize, n: usize) -> Self {
        assert_eq!(poly.nvars, Self::nvars(rank, n));
        Self { poly, rank, n }
    }

    pub fn random(rank: usize, n: usize, deg: u8, rng: &mut ChaCha8Rng) -> Self {
        Self::new(Poly::random(Self::nvars(rank, n), deg, 6, rng), rank, n)
    }

    fn vars(&self, pt: &GroupoidPoint) -> Vec<C> {
        let mut v = Vec::with_capacity(Self::nvars(self.rank, self.n));
        for i in 0..self.rank {
            v.push(pt.p[i]);
        }
        for i in 0..self.n {
            for j in 0..self.n {
                v.push(pt.x[(i, j)]);
            }
        }
        for i in 0..self.rank {
            v.push(pt.q[i]);
        }
        v
    }

    pub fn eval(&self, pt: &GroupoidPoint) -> C {
        self.poly.eval(&self.vars(pt))
    }

    /// Exact gradients at a point.
    pub fn grad(&self, g: &SimpleLieAlgebra, pt: &GroupoidPoint) -> XGrad {
        let vals = self.vars(pt);
        let r = self.rank;
        let n = self.n;
        let d1 = CVec::from_fn(r, |i, _| self.poly.partial(i).eval(&vals));
        let d2 = CVec::from_fn(r, |i, _| self.poly.partial(r + n * n + i).eval(&vals));
        // matrix of entry partials
        let gmat = CMat::from_fn(n, n, |i, j| self.poly.partial(r + i * n + j).eval(&vals));
        let m_right = &pt.x * gmat.transpose();
        let m_left = gmat.transpose() * &pt.x;
        let dr = CVec::from_fn(g.dim, |k, _| (&m_right * &g.defrep[k]).trace());
        let dl = CVec::from_fn(g.dim, |k, _| (&m_left * &g.defrep[k]).trace());
        XGrad { d1, d2, dr, dl }
    }
}

/// Numeric gradients of an arbitrary function on X via central differences
/// along the base coordinates and one-parameter subgroups in the group slot.
pub fn numeric_grad<F: Fn(&GroupoidPoint) -> Result<C>>(
    g: &SimpleLieAlgebra,
    f: &F,
    pt: &GroupoidPoint,
    step: f64,
) -> Result<XGrad> {
    let r = g.rank();
    let probe = |shift: &dyn Fn(f64) -> GroupoidPoint, eps: f64| -> Result<C> {
        Ok((f(&shift(eps))? - f(&shift(-eps))?) / cr(2.0 * eps))
    };
    // Richardson extrapolation of the (step, step/2) pair; when the pair
    // itself is wildly inconsistent the wider (10 step, 5 step) pair is
    // used instead, away from the roundoff floor
    let robust = |shift: &dyn Fn(f64) -> GroupoidPoint| -> Result<C> {
        let d1 = probe(shift, step)?;
        let d2 = probe(shift, step / 2.0)?;
        let fine = (d2 * cr(4.0) - d1) / cr(3.0);
        if (d1 - d2).norm() > 10.0 * 1e-4 * (1.0 + d1.norm()) {
            let c1 = probe(shift, 10.0 * step)?;
            let c2 = probe(shift, 5.0 * step)?;
            Ok((c2 * cr(4.0) - c1) / cr(3.0))
        } else {
            Ok(fine)
        }
    };
    let mut d1 = CVec::zeros(r);
    let mut d2 = CVec::zeros(r);
    for i in 0..r {
        d1[i] = robust(&|eps: f64| {
            let mut p = pt.clone();
            p.p[i] += cr(eps);
            p
        })?;
        d2[i] = robust(&|eps: f64| {
            let mut p = pt.clone();
            p.q[i] += cr(eps);
            p
        })?;
    }
    let mut dr = CVec::zeros(g.dim);
    let mut dl = CVec::zeros(g.dim);
    for k in 0..g.dim {
        let b = g.defrep[k].clone();
        dr[k] = robust(&|eps: f64| {
            let mut p = pt.clone();
            p.x = crate::numerics::mat_exp(&b.map(|z| z * cr(eps))) * &p.x;
            p
        })?;
        dl[k] = robust(&|eps: f64| {
            let mut p = pt.clone();
            p.x = &p.x * crate::numerics::mat_exp(&b.map(|z| z * cr(eps)));
            p
        })?;
    }
    Ok(XGrad { d1, d2, dr, dl })
}

/// A groupoid 1-cocycle for the adjoint-type representation
/// rho(x) T = Ad_x T Ad*_x, with exact partial derivatives.
pub trait Cocycle: Send + Sync {
    fn algebra(&self) -> &Arc<SimpleLieAlgebra>;
    fn eval(&self, pt: &GroupoidPoint) -> Result<CMat>;
    /// d/dt P(p + t dir, x, q)
    fn delta1(&self, pt: &GroupoidPoint, dir: &CVec) -> Result<CMat>;
    /// d/dt P(p, x, q + t dir)
    fn delta2(&self, pt: &GroupoidPoint, dir: &CVec) -> Result<CMat>;
    /// d/dt P(p, exp(tX) x, q)
    fn dmul(&self, pt: &GroupoidPoint, xdir: &CVec) -> Result<CMat>;
}

/// The adjoint-type representation itself.
pub fn rho(g: &SimpleLieAlgebra, x: &CMat, t: &CMat) -> Result<CMat> {
    Ok(g.group_ad(x)? * t * g.group_ad_star(x)?)
}

/// Coboundary cocycle P(p, x, q) = -R(p) + Ad_x R(q) Ad*_x.
pub struct CoboundaryCocycle {
    pub r: Arc<dyn RMatrix>,
}

impl CoboundaryCocycle {
    pub fn new(r: Arc<dyn RMatrix>) -> Self {
        Self { r }
    }
}

impl Cocycle for CoboundaryCocycle {
    fn algebra(&self) -> &Arc<SimpleLieAlgebra> {
        self.r.algebra()
    }

    fn eval(&self, pt: &GroupoidPoint) -> Result<CMat> {
        let g = self.algebra();
        Ok(-self.r.eval(&pt.p)? + rho(g, &pt.x, &self.r.eval(&pt.q)?)?)
    }

    fn delta1(&self, pt: &GroupoidPoint, dir: &CVec) -> Result<CMat> {
        Ok(-self.r.eval_d(&pt.p, dir)?)
    }

    fn delta2(&self, pt: &GroupoidPoint, dir: &CVec) -> Result<CMat> {
        let g = self.algebra();
        rho(g, &pt.x, &self.r.eval_d(&pt.q, dir)?)
    }

    fn dmul(&self, pt: &GroupoidPoint, xdir: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let inner = rho(g, &pt.x, &self.r.eval(&pt.q)?)?;
        Ok(g.ad(xdir) * &inner + &inner * g.ad_star(xdir))
    }
}

/// Cocycle built from a polynomial map l with l(q0) = 0 and zero group
/// part: P(p, x, q) = -l(p) + rho(x) l(q).
pub struct MapCocycle {
    pub algebra: Arc<SimpleLieAlgebra>,
    /// dim^2 polynomial entries over the rank coordinates, row major
    pub l: PolyMap,
}

impl MapCocycle {
    /// Random l with l(q0) = 0: l(q) = sum_k (q_k - q0_k) M_k.
    pub fn random(algebra: Arc<SimpleLieAlgebra>, q0: &CVec, rng: &mut ChaCha8Rng) -> Self {
        let rank = algebra.rank();
        let dim = algebra.dim;
        let mats: Vec<CMat> = (0..rank)
            .map(|_| {
                CMat::from_fn(dim, dim, |_, _| {
                    C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                })
            })
            .collect();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut p = Poly::zero(rank);
                for (k, m) in mats.iter().enumerate() {
                    p = p.add(&Poly::var(rank, k).scale(m[(i, j)]));
                    p = p.add(&Poly::constant(rank, -q0[k] * m[(i, j)]));
                }
                entries.push(p);
            }
        }
        Self {
            algebra,
            l: PolyMap::new(entries),
        }
    }

    pub fn l_at(&self, q: &CVec) -> CMat {
        let v = self.l.eval(q);
        let dim = self.algebra.dim;
        CMat::from_fn(dim, dim, |i, j| v[i * dim + j])
    }

    fn l_deriv(&self, q: &CVec, dir: &CVec) -> CMat {
        let v = self.l.deriv(q, dir);
        let dim = self.algebra.dim;
        CMat::from_fn(dim, dim, |i, j| v[i * dim + j])
    }
}

impl Cocycle for MapCocycle {
    fn algebra(&self) -> &Arc<SimpleLieAlgebra> {
        &self.algebra
    }
    fn eval(&self, pt: &GroupoidPoint) -> Result<CMat> {
        Ok(-self.l_at(&pt.p) + rho(&self.algebra, &pt.x, &self.l_at(&pt.q))?)
    }
    fn delta1(&self, pt: &GroupoidPoint, dir: &CVec) -> Result<CMat> {
        Ok(-self.l_deriv(&pt.p, dir))
    }
    fn delta2(&self, pt: &GroupoidPoint, dir: &CVec) -> Result<CMat> {
        rho(&self.algebra, &pt.x, &self.l_deriv(&pt.q, dir))
    }
    fn dmul(&self, pt: &GroupoidPoint, xdir: &CVec) -> Result<CMat> {
        let g = &self.algebra;
        let inner = rho(g, &pt.x, &self.l_at(&pt.q))?;
        Ok(g.ad(xdir) * &inner + &inner * g.ad_star(xdir))
    }
}

/// Cocycle identity residual: P(p, xy, q) - P(p, x, r) - rho(x) P(r, y, q).
pub fn cocycle_residual(
    cocycle: &dyn Cocycle,
    p: &CVec,
    r: &CVec,
    q: &CVec,
    x: &CMat,
    y: &CMat,
    tol: f64,
) -> Result<Residual> {
    let g = cocycle.algebra();
    let lhs = cocycle.eval(&GroupoidPoint {
        p: p.clone(),
        x: x * y,
        q: q.clone(),
    })?;
    let mid = cocycle.eval(&GroupoidPoint {
        p: p.clone(),
        x: x.clone(),
        q: r.clone(),
    })?;
    let last = cocycle.eval(&GroupoidPoint {
        p: r.clone(),
        x: y.clone(),
        q: q.clone(),
    })?;
    let value = max_abs(&(lhs - mid - rho(g, x, &last)?));
    Ok(Residual::new("cocycle", value, tol, format!("p0={:.3}", p[0].re)))
}

/// The dynamical-type bivector on X: K(p) Z = ad*_Z p, the inclusion as the
/// connecting map, and a cocycle P supplying the group block. An optional
/// cross term between the two base slots serves as the negative control of
/// the coisotropy suite.
pub struct DynamicalBivector {
    pub algebra: Arc<SimpleLieAlgebra>,
    pub cocycle: Arc<dyn Cocycle>,
    pub cross_perturbation: Option<(f64, CMat)>,
}

impl DynamicalBivector {
    pub fn new(algebra: Arc<SimpleLieAlgebra>, cocycle: Arc<dyn Cocycle>) -> Self {
        Self {
            algebra,
            cocycle,
            cross_perturbation: None,
        }
    }

    /// K(p) as a matrix h -> h*.
    fn kmat(&self, p: &CVec) -> CMat {
        let r = self.algebra.rank();
        let mut out = CMat::zeros(r, r);
        for j in 0..r {
            let ej = CVec::from_fn(r, |k, _| if k == j { cr(1.0) } else { cr(0.0) });
            let col = self.algebra.ad_star_h(&ej, p);
            for i in 0..r {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// The full bivector matrix in right-trivialized covector coordinates
    /// (Z1 in h, b in g*, Z2 in h); {f, g} = df^T Pi dg.
    pub fn pi_matrix(&self, pt: &GroupoidPoint) -> Result<CMat> {
        let g = &self.algebra;
        let r = g.rank();
        let dim = g.dim;
        let total = 2 * r + dim;
        let mut m = CMat::zeros(total, total);
        let kp = self.kmat(&pt.p);
        let kq = self.kmat(&pt.q);
        let pmat = self.cocycle.eval(pt)?;
        let adx = g.group_ad(&pt.x)?;
        let adsx = g.group_ad_star(&pt.x)?;
        // block (h* <- Z1'): -K(p)
        for i in 0..r {
            for j in 0..r {
                m[(i, j)] = -kp[(i, j)];
                m[(r + dim + i, r + dim + j)] = kq[(i, j)];
            }
        }
        // block (h* <- b'): -i* ; and (g <- Z1'): +i
        for i in 0..r {
            // Cartan slots of g*/g share the first r indices
            m[(i, r + i)] = cr(-1.0);
            m[(r + i, i)] = cr(1.0);
        }
        // block (g <- b'): P
        for i in 0..dim {
            for j in 0..dim {
                m[(r + i, r + j)] = pmat[(i, j)];
            }
        }
        // block (g <- Z2'): Ad_x i ; block (h*_2 <- b'): -i* Ad*_x
        for j in 0..r {
            let col = &adx * g.embed_h(&CVec::from_fn(r, |k, _| {
                if k == j {
                    cr(1.0)
                } else {
                    cr(0.0)
                }
            }));
            for i in 0..dim {
                m[(r + i, r + dim + j)] = col[i];
            }
        }
        for i in 0..r {
            for j in 0..dim {
                m[(r + dim + i, r + j)] = -adsx[(i, j)];
            }
        }
        if let Some((eps, cross)) = &self.cross_perturbation {
            // A1-style cross term between the two base slots
            for i in 0..r {
                for j in 0..r {
                    m[(i, r + dim + j)] += cross[(i, j)] * cr(*eps);
                    m[(r + dim + j, i)] -= cross[(i, j)] * cr(*eps);
                }
            }
        }
        Ok(m)
    }

    fn stack(&self, grad: &XGrad) -> CVec {
        let r = self.algebra.rank();
        let dim = self.algebra.dim;
        let mut v = CVec::zeros(2 * r + dim);
        for i in 0..r {
            v[i] = grad.d1[i];
            v[r + dim + i] = grad.d2[i];
        }
        for k in 0..dim {
            v[r + k] = grad.dr[k];
        }
        v
    }

    /// Bracket from first-order data, {f, g} = <df, Pi dg>.
    pub fn bracket_from_grads(
        &self,
        pt: &GroupoidPoint,
        df: &XGrad,
        dg: &XGrad,
    ) -> Result<C> {
        let m = self.pi_matrix(pt)?;
        let a = self.stack(df);
        let b = self.stack(dg);
        Ok(a.dot(&(m * b)))
    }

    /// The Poisson bracket of two polynomial functions.
    pub fn bracket(&self, f: &XFun, h: &XFun, pt: &GroupoidPoint) -> Result<C> {
        let df = f.grad(&self.algebra, pt);
        let dh = h.grad(&self.algebra, pt);
        self.bracket_from_grads(pt, &df, &dh)
    }

    /// Bivector pairing of two right-trivialized covectors.
    pub fn pair(
        &self,
        pt: &GroupoidPoint,
        om: &(CVec, CVec, CVec),
        om2: &(CVec, CVec, CVec),
    ) -> Result<C> {
        let m = self.pi_matrix(pt)?;
        let a = self.stack(&XGrad {
            d1: om.0.clone(),
            dr: om.1.clone(),
            dl: CVec::zeros(self.algebra.dim),
            d2: om.2.clone(),
        });
        let b = self.stack(&XGrad {
            d1: om2.0.clone(),
            dr: om2.1.clone(),
            dl: CVec::zeros(self.algebra.dim),
            d2: om2.2.clone(),
        });
        Ok(a.dot(&(m * b)))
    }
}

/// Independent second route for the coboundary bracket: the literal term
/// list with the r-matrix evaluated on both ends, no bivector assembly.
pub fn coboundary_bracket_naive(
    r: &dyn RMatrix,
    f: &XFun,
    h: &XFun,
    pt: &GroupoidPoint,
) -> Result<C> {
    let g = r.algebra();
    let df = f.grad(g, pt);
    let dh = h.grad(g, pt);
    let mut acc = cr(0.0);
    acc += pt
        .p
        .dot(&g.cartan_part(&g.bracket(&g.embed_h(&df.d1), &g.embed_h(&dh.d1))?));
    acc -= pt
        .q
        .dot(&g.cartan_part(&g.bracket(&g.embed_h(&df.d2), &g.embed_h(&dh.d2))?));
    acc -= dh.dr.dot(&g.embed_h(&df.d1));
    acc -= dh.dl.dot(&g.embed_h(&df.d2));
    acc += df.dr.dot(&g.embed_h(&dh.d1));
    acc += df.dl.dot(&g.embed_h(&dh.d2));
    acc += dh.dr.dot(&(r.eval(&pt.p)? * &df.dr));
    acc -= dh.dl.dot(&(r.eval(&pt.q)? * &df.dl));
    Ok(acc)
}

/// { f, { g, h } } + cyclic, the outer bracket differentiated numerically.
pub fn jacobi_bruteforce(
    bivector: &DynamicalBivector,
    f: &XFun,
    g2: &XFun,
    h: &XFun,
    pt: &GroupoidPoint,
    step: f64,
    tol: f64,
) -> Result<Residual> {
    let g = &bivector.algebra;
    let term = |a: &XFun, b: &XFun, c: &XFun| -> Result<C> {
        let inner = |q: &GroupoidPoint| bivector.bracket(b, c, q);
        let dinner = numeric_grad(g, &inner, pt, step)?;
        let da = a.grad(g, pt);
        bivector.bracket_from_grads(pt, &da, &dinner)
    };
    let total = term(f, g2, h)? + term(g2, h, f)? + term(h, f, g2)?;
    Ok(Residual::new(
        "jacobi-bruteforce",
        total.norm(),
        tol,
        pt.describe(),
    ))
}

/// The analytic cyclic Jacobi condition over a dual basis of covector
/// triples, for the dynamical type where the connecting map is the
/// inclusion.
pub fn jacobi_condition_residual(
    bivector: &DynamicalBivector,
    pt: &GroupoidPoint,
    tol: f64,
) -> Result<Residual> {
    let g = &bivector.algebra;
    let dim = g.dim;
    let p = bivector.cocycle.eval(pt)?;
    let adsx = g.group_ad_star(&pt.x)?;
    // precompute delta_i P contractions for basis directions in h*
    let expr = |alpha: &CVec, beta: &CVec, gamma: &CVec| -> Result<C> {
        let pa = &p * alpha;
        let pc = &p * gamma;
        let mut acc = beta.dot(&g.bracket(&pa, &pc)?);
        acc -= beta.dot(&(bivector.cocycle.dmul(pt, &pa)? * gamma));
        acc += beta.dot(&(bivector.cocycle.delta1(pt, &g.istar(alpha))? * gamma));
        acc += beta.dot(&(bivector.cocycle.delta2(pt, &g.istar(&(&adsx * alpha)))? * gamma));
        Ok(acc)
    };
    let mut worst: f64 = 0.0;
    let basis = |k: usize| CVec::from_fn(dim, |i, _| if i == k { cr(1.0) } else { cr(0.0) });
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                let (ea, eb, ec) = (basis(a), basis(b), basis(c));
                let total = expr(&ea, &eb, &ec)? + expr(&eb, &ec, &ea)? + expr(&ec, &ea, &eb)?;
                worst = worst.max(total.norm());
            }
        }
    }
    Ok(Residual::new(
        "jacobi-condition",
        worst,
        tol,
        pt.describe(),
    ))
}

/// Coisotropy of the multiplication graph: the conormal of Gr(m) at a
/// composable pair is spanned by
/// ((Z1, b, Z2), (-Z2, Ad*_x b, Z3), (-Z1, -b, -Z3))
/// in right-trivialized coordinates; the alternating sum of bivector
/// pairings of two such covectors must vanish.
pub struct ConormalParams {
    pub b: CVec,
    pub z1: CVec,
    pub z2: CVec,
    pub z3: CVec,
}

pub fn coisotropy_residual_x(
    bivector: &DynamicalBivector,
    pt: &GroupoidPoint,
    pt2: &GroupoidPoint,
    om: &ConormalParams,
    om2: &ConormalParams,
    tol: f64,
) -> Result<Residual> {
    let g = &bivector.algebra;
    let prod = pt.compose(pt2)?;
    let adsx = g.group_ad_star(&pt.x)?;
    let lift = |pr: &ConormalParams| {
        (
            (pr.z1.clone(), pr.b.clone(), pr.z2.clone()),
            (pr.z2.map(|z| -z), &adsx * &pr.b, pr.z3.clone()),
            (pr.z1.map(|z| -z), pr.b.map(|z| -z), pr.z3.map(|z| -z)),
        )
    };
    let (a1, a2, a3) = lift(om);
    let (b1, b2, b3) = lift(om2);
    let total = bivector.pair(pt, &a1, &b1)? + bivector.pair(pt2, &a2, &b2)?
        - bivector.pair(&prod, &a3, &b3)?;
    Ok(Residual::new(
        "coisotropy-x",
        total.norm(),
        tol,
        pt.describe(),
    ))
}

/// Norm of the cocycle along the image of the unit embedding of the
/// Hamiltonian unit: P(coAd_h p, h, p) for h in the Cartan subgroup.
pub fn dynamical_morphism_residual(
    bivector: &DynamicalBivector,
    h: &CMat,
    p: &CVec,
    tol: f64,
) -> Result<Residual> {
    let g = &bivector.algebra;
    if !g.in_cartan_group(h, 1e-9) {
        return Err(Error::NotInCartan);
    }
    let pm = g.coad_h_on_hstar(h)? * p;
    let value = max_abs(&bivector.cocycle.eval(&GroupoidPoint {
        p: pm,
        x: h.clone(),
        q: p.clone(),
    })?);
    Ok(Residual::new(
        "dynamical-morphism",
        value,
        tol,
        format!("p0={:.3}", p[0].re),
    ))
}

/// Polynomial function on the Hamiltonian unit H x U; variables are the
/// diagonal entries of h followed by the coordinates of p.
#[derive(Debug, Clone)]
pub struct UnitFun {
    pub poly: Poly,
    pub rank: usize,
    pub n: usize,
}

impl UnitFun {
    pub fn nvars(rank: usize, n: usize) -> usize {
        n + rank
    }

    fn vars(&self, h: &CMat, p: &CVec) -> Vec<C> {
        let mut v: Vec<C> = (0..self.n).map(|i| h[(i, i)]).collect();
        v.extend(p.iter().cloned());
        v
    }

    pub fn eval(&self, h: &CMat, p: &CVec) -> C {
        self.poly.eval(&self.vars(h, p))
    }

    /// left gradient in h* and base partial in h
    pub fn grads(&self, g: &SimpleLieAlgebra, h: &CMat, p: &CVec) -> (CVec, CVec) {
        let vals = self.vars(h, p);
        let dprime = CVec::from_fn(g.rank(), |j, _| {
            let mut acc = cr(0.0);
            for i in 0..self.n {
                acc += self.poly.partial(i).eval(&vals) * h[(i, i)] * g.defrep[j][(i, i)];
            }
            acc
        });
        let delta = CVec::from_fn(g.rank(), |i, _| self.poly.partial(self.n + i).eval(&vals));
        (dprime, delta)
    }
}

/// The nondegenerate bracket of the Hamiltonian unit,
/// {f, g}(h, p) = -<D'g, df> + <D'f, dg> - <p, [df, dg]>.
pub fn unit_bracket(
    g: &SimpleLieAlgebra,
    f: &UnitFun,
    f2: &UnitFun,
    h: &CMat,
    p: &CVec,
) -> Result<C> {
    let (dpf, df) = f.grads(g, h, p);
    let (dpg, dg) = f2.grads(g, h, p);
    let lie = g.cartan_part(&g.bracket(&g.embed_h(&df), &g.embed_h(&dg))?);
    Ok(-dpg.dot(&df) + dpf.dot(&dg) - p.dot(&lie))
}

/// The coarse-groupoid bracket on U x U for functions f(p, q):
/// <p, [d1 f, d1 g]> - <q, [d2 f, d2 g]>.
pub fn coarse_bracket(
    g: &SimpleLieAlgebra,
    f: &PolyMap,
    f2: &PolyMap,
    p: &CVec,
    q: &CVec,
) -> Result<C> {
    // functions are single-entry maps over 2 * rank variables (p then q)
    let r = g.rank();
    let stack = {
        let mut v = CVec::zeros(2 * r);
        for i in 0..r {
            v[i] = p[i];
            v[r + i] = q[i];
        }
        v
    };
    let grad = |fun: &PolyMap| -> (CVec, CVec) {
        let jac = fun.jacobian(&stack);
        (
            CVec::from_fn(r, |i, _| jac[(0, i)]),
            CVec::from_fn(r, |i, _| jac[(0, r + i)]),
        )
    };
    let (f1, fq) = grad(f);
    let (g1, gq) = grad(f2);
    let lie1 = g.cartan_part(&g.bracket(&g.embed_h(&f1), &g.embed_h(&g1))?);
    let lie2 = g.cartan_part(&g.bracket(&g.embed_h(&fq), &g.embed_h(&gq))?);
    Ok(p.dot(&lie1) - q.dot(&lie2))
}

/// Rank of the Hamiltonian-unit bivector at a point, computed from the
/// brackets of the 2 rank coordinate-like functions.
pub fn unit_bivector_rank(g: &SimpleLieAlgebra, h: &CMat, p: &CVec) -> Result<usize> {
    let r = g.rank();
    let n = g.n;
    let mut funs = Vec::new();
    for i in 0..r {
        let mut poly = Poly::zero(UnitFun::nvars(r, n));
        poly.add_term(
            {
                let mut e = vec![0u8; UnitFun::nvars(r, n)];
                e[i] = 1;
                e
            },
            cr(1.0),
        );
        funs.push(UnitFun { poly, rank: r, n });
    }
    for i in 0..r {
        let mut poly = Poly::zero(UnitFun::nvars(r, n));
        poly.add_term(
            {
                let mut e = vec![0u8; UnitFun::nvars(r, n)];
                e[n + i] = 1;
                e
            },
            cr(1.0),
        );
        funs.push(UnitFun { poly, rank: r, n });
    }
    let m = CMat::from_fn(2 * r, 2 * r, |i, j| {
        unit_bracket(g, &funs[i], &funs[j], h, p).unwrap()
    });
    Ok(numerical_rank(&m, 1e-10))
}

/// H-invariant polynomial functions on {0} x G x U for the reduction test:
/// row-balanced monomials in the group entries plus polynomials in q.
pub fn invariant_xfun(
    g: &SimpleLieAlgebra,
    coeffs: &[(Vec<usize>, C)],
    qpoly: &Poly,
) -> XFun {
    let r = g.rank();
    let n = g.n;
    let nv = XFun::nvars(r, n);
    let mut poly = Poly::zero(nv);
    // one entry chosen in every row: product over rows i of x_{i, cols[i]}
    for (cols, c) in coeffs {
        let mut e = vec![0u8; nv];
        for (i, j) in cols.iter().enumerate() {
            e[r + i * n + j] += 1;
        }
        poly.add_term(e, *c);
    }
    for (e, c) in &qpoly.terms {
        let mut exps = vec![0u8; nv];
        for (k, v) in e.iter().enumerate() {
            exps[r + n * n + k] = *v;
        }
        poly.add_term(exps, *c);
    }
    XFun::new(poly, r, n)
}

/// Left-invariance check: i* Df must vanish on {0} x G x U.
pub fn check_h_invariant(g: &SimpleLieAlgebra, f: &XFun, pts: &[GroupoidPoint]) -> Result<()> {
    for pt in pts {
        let grad = f.grad(g, pt);
        let res = max_abs_vec(&g.istar(&grad.dr));
        if res > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "test function is not H-invariant: {res:e}"
            )));
        }
    }
    Ok(())
}

/// Bracket value at the base point (0, 1, 0) and its differential along
/// (0, Y, lambda), by Richardson-extrapolated central differences of the
/// exact bracket.
pub fn reduced_linearization(
    bivector: &DynamicalBivector,
    f: &XFun,
    h: &XFun,
    y: &CVec,
    lambda: &CVec,
) -> Result<(C, C)> {
    let g = &bivector.algebra;
    let base = GroupoidPoint {
        p: CVec::zeros(g.rank()),
        x: CMat::identity(g.n, g.n),
        q: CVec::zeros(g.rank()),
    };
    let value = bivector.bracket(f, h, &base)?;
    let curve = |s: f64| -> Result<C> {
        let pt = GroupoidPoint {
            p: CVec::zeros(g.rank()),
            x: crate::numerics::mat_exp(&g.to_matrix(y).map(|z| z * cr(s))),
            q: lambda.map(|z| z * cr(s)),
        };
        bivector.bracket(f, h, &pt)
    };
    let eps = 1e-4;
    let d1 = (curve(eps)? - curve(-eps)?) / cr(2.0 * eps);
    let d2 = (curve(eps / 2.0)? - curve(-eps / 2.0)?) / cr(eps);
    let diff = (d2 * cr(4.0) - d1) / cr(3.0);
    Ok((value, diff))
}
