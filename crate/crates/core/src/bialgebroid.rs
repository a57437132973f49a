//! The tangent Lie bialgebroid of the trivial groupoid: brackets of sections
//! of both algebroids in the pair, the vertex Lie algebra at a base point
//! with its diagonal isomorphism onto the fixed Lie algebra `g'`, the flat
//! connection and the trivialization it induces, the dual cocycle recovered
//! from the duality requirement, and the morphism conditions.
//!
//! Sections of either bundle are pairs of maps over the base with analytic
//! first and (where needed) second directional derivatives; polynomial
//! sections carry exact derivatives of all orders.

use crate::dynrmat::{DynamicalR, RMatrix, RootClass};
use crate::error::{Error, Result};
use crate::liealg::SimpleLieAlgebra;
use crate::numerics::{cr, max_abs, max_abs_vec, CMat, CVec, C};
use crate::poly::PolyMap;
use crate::residual::Residual;
use std::sync::Arc;

type ValFn = Arc<dyn Fn(&CVec) -> Result<(CVec, CVec)> + Send + Sync>;
type DerFn = Arc<dyn Fn(&CVec, &CVec) -> Result<(CVec, CVec)> + Send + Sync>;
type Der2Fn = Arc<dyn Fn(&CVec, &CVec, &CVec) -> Result<(CVec, CVec)> + Send + Sync>;

/// A section of a trivial rank-two-block bundle over U: a pair of
/// vector-valued maps with analytic directional derivatives.
#[derive(Clone)]
pub struct Section {
    pub val: ValFn,
    pub der: DerFn,
    pub der2: Der2Fn,
}

impl Section {
    pub fn constant(a: CVec, b: CVec) -> Self {
        let (ra, rb) = (a.len(), b.len());
        let (a2, b2) = (a.clone(), b.clone());
        Self {
            val: Arc::new(move |_| Ok((a.clone(), b.clone()))),
            der: Arc::new(move |_, _| Ok((CVec::zeros(ra), CVec::zeros(rb)))),
            der2: Arc::new(move |_, _, _| Ok((CVec::zeros(a2.len()), CVec::zeros(b2.len())))),
        }
    }

    pub fn from_polymaps(first: PolyMap, second: PolyMap) -> Self {
        let (f1, s1) = (first.clone(), second.clone());
        let (f2, s2) = (first.clone(), second.clone());
        Self {
            val: Arc::new(move |q| Ok((first.eval(q), second.eval(q)))),
            der: Arc::new(move |q, d| Ok((f1.deriv(q, d), s1.deriv(q, d)))),
            der2: Arc::new(move |q, d1, d2| Ok((f2.deriv2(q, d1, d2), s2.deriv2(q, d1, d2)))),
        }
    }

    pub fn scaled_by_poly(&self, f: PolyMap) -> Self {
        assert_eq!(f.dim_out(), 1);
        let s = self.clone();
        let (sa, sb, sc) = (s.clone(), s.clone(), s.clone());
        let (fa, fb, fc) = (f.clone(), f.clone(), f.clone());
        Self {
            val: Arc::new(move |q| {
                let (a, b) = (sa.val)(q)?;
                let c = fa.eval(q)[0];
                Ok((a.map(|z| z * c), b.map(|z| z * c)))
            }),
            der: Arc::new(move |q, d| {
                let (a, b) = (sb.val)(q)?;
                let (da, db) = (sb.der)(q, d)?;
                let c = fb.eval(q)[0];
                let dc = fb.deriv(q, d)[0];
                Ok((
                    da.map(|z| z * c) + a.map(|z| z * dc),
                    db.map(|z| z * c) + b.map(|z| z * dc),
                ))
            }),
            der2: Arc::new(move |q, d1, d2| {
                let (a, b) = (sc.val)(q)?;
                let (da1, db1) = (sc.der)(q, d1)?;
                let (da2, db2) = (sc.der)(q, d2)?;
                let (dda, ddb) = (sc.der2)(q, d1, d2)?;
                let c = fc.eval(q)[0];
                let dc1 = fc.deriv(q, d1)[0];
                let dc2 = fc.deriv(q, d2)[0];
                let ddc = fc.deriv2(q, d1, d2)[0];
                Ok((
                    dda.map(|z| z * c)
                        + da1.map(|z| z * dc2)
                        + da2.map(|z| z * dc1)
                        + a.map(|z| z * ddc),
                    ddb.map(|z| z * c)
                        + db1.map(|z| z * dc2)
                        + db2.map(|z| z * dc1)
                        + b.map(|z| z * ddc),
                ))
            }),
        }
    }
}

fn unimplemented_der2() -> Der2Fn {
    Arc::new(|_, _, _| {
        Err(Error::InvalidConfig(
            "second derivative of a derived section is not available".into(),
        ))
    })
}

/// The trivial-algebroid bracket [(l, X), (l', X')] =
/// (dl' . l - dl . l', dX' . l - dX . l' + [X, X']_fiber), with the fiber
/// bracket supplied by the caller. Used for both the plain and the primed
/// algebroid.
pub fn trivial_algebroid_bracket(
    fiber: Arc<dyn Fn(&CVec, &CVec) -> Result<CVec> + Send + Sync>,
    s: &Section,
    t: &Section,
) -> Section {
    let (s1, t1) = (s.clone(), t.clone());
    let (s2, t2) = (s.clone(), t.clone());
    let fiber2 = fiber.clone();
    Section {
        val: Arc::new(move |q| {
            let (ls, xs) = (s1.val)(q)?;
            let (lt, xt) = (t1.val)(q)?;
            let (dlt, dxt) = (t1.der)(q, &ls)?;
            let (dls, dxs) = (s1.der)(q, &lt)?;
            Ok((dlt - dls, dxt - dxs + fiber(&xs, &xt)?))
        }),
        der: Arc::new(move |q, dir| {
            let (ls, xs) = (s2.val)(q)?;
            let (lt, xt) = (t2.val)(q)?;
            let (dls_d, dxs_d) = (s2.der)(q, dir)?;
            let (dlt_d, dxt_d) = (t2.der)(q, dir)?;
            // d/d dir of dl'(q)(l(q)): second derivative plus chain
            let (a1, b1) = (t2.der2)(q, &ls, dir)?;
            let (a2, b2) = (t2.der)(q, &dls_d)?;
            let (a3, b3) = (s2.der2)(q, &lt, dir)?;
            let (a4, b4) = (s2.der)(q, &dlt_d)?;
            let lie_d = fiber2(&dxs_d, &xt)? + fiber2(&xs, &dxt_d)?;
            Ok((a1 + a2 - a3 - a4, b1 + b2 - b3 - b4 + lie_d))
        }),
        der2: unimplemented_der2(),
    }
}

/// Everything attached to one dynamical r-matrix configuration: the root
/// classes, the diagonal scale factors, the fixed Lie algebra `g'`, and the
/// section brackets of both algebroids.
pub struct Bialgebroid {
    pub r: Arc<DynamicalR>,
}

impl Bialgebroid {
    pub fn new(r: Arc<DynamicalR>) -> Self {
        Self { r }
    }

    pub fn algebra(&self) -> &Arc<SimpleLieAlgebra> {
        &self.r.algebra
    }

    /// Basis scale factor: E_a(q) = scale_a(q) e_a; the vertex isomorphism
    /// is psi(q) e_a = -(1 / scale_a(q)) e_a on root vectors and -1 on the
    /// Cartan.
    pub fn scale(&self, q: &CVec, root: usize) -> Result<C> {
        let x = self.r.root_arg(q, root);
        Ok(match self.r.class(root) {
            RootClass::Span => {
                if x.norm() < self.r.singular_guard {
                    return Err(Error::SingularPoint {
                        value: x.norm(),
                        guard: self.r.singular_guard,
                    });
                }
                (x / cr(2.0)).sinh() * cr(2.0)
            }
            RootClass::BarPlus => (x / cr(2.0)).exp(),
            RootClass::BarMinus => (-x / cr(2.0)).exp(),
        })
    }

    fn dscale(&self, q: &CVec, root: usize, dir: &CVec) -> Result<C> {
        let x = self.r.root_arg(q, root);
        let alpha = &self.algebra().rootsystem.roots[root].hstar;
        let dx = alpha.dot(dir);
        Ok(match self.r.class(root) {
            RootClass::Span => (x / cr(2.0)).cosh() * dx,
            RootClass::BarPlus => (x / cr(2.0)).exp() * dx / cr(2.0),
            RootClass::BarMinus => -(-x / cr(2.0)).exp() * dx / cr(2.0),
        })
    }

    pub fn psi_scalar(&self, q: &CVec, root: usize) -> Result<C> {
        Ok(-self.scale(q, root)?.inv())
    }

    pub fn dpsi_scalar(&self, q: &CVec, root: usize, dir: &CVec) -> Result<C> {
        let s = self.scale(q, root)?;
        Ok(self.dscale(q, root, dir)? / (s * s))
    }

    /// psi(q) as a matrix on g (minus identity on the Cartan, diagonal with
    /// psi scalars on the root spaces).
    pub fn psi_matrix(&self, q: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut m = CMat::zeros(g.dim, g.dim);
        for i in 0..g.rank() {
            m[(i, i)] = cr(-1.0);
        }
        for root in 0..g.rootsystem.roots.len() {
            let s = g.slot(root);
            m[(s, s)] = self.psi_scalar(q, root)?;
        }
        Ok(m)
    }

    pub fn psi_inv_matrix(&self, q: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut m = CMat::zeros(g.dim, g.dim);
        for i in 0..g.rank() {
            m[(i, i)] = cr(-1.0);
        }
        for root in 0..g.rootsystem.roots.len() {
            let s = g.slot(root);
            m[(s, s)] = self.psi_scalar(q, root)?.inv();
        }
        Ok(m)
    }

    /// Killing transpose of psi: psi_{-a} on the root spaces, -1 on h.
    pub fn psi_star_matrix(&self, q: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut m = CMat::zeros(g.dim, g.dim);
        for i in 0..g.rank() {
            m[(i, i)] = cr(-1.0);
        }
        for root in 0..g.rootsystem.roots.len() {
            let s = g.slot(root);
            m[(s, s)] = self.psi_scalar(q, g.rootsystem.neg_of[root])?;
        }
        Ok(m)
    }

    fn dpsi_inv_matrix(&self, q: &CVec, dir: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut m = CMat::zeros(g.dim, g.dim);
        for root in 0..g.rootsystem.roots.len() {
            let s = g.slot(root);
            // d(1/psi) = -dpsi / psi^2
            let psi = self.psi_scalar(q, root)?;
            m[(s, s)] = -self.dpsi_scalar(q, root, dir)? / (psi * psi);
        }
        Ok(m)
    }

    /// The fixed Lie algebra `g'` on the vector space of g: the g-bracket,
    /// except that both-negative-bar pairs flip sign and mixed-bar pairs
    /// vanish.
    pub fn gprime_bracket(&self, a: &CVec, b: &CVec) -> Result<CVec> {
        let g = self.algebra();
        let mut out = CVec::zeros(g.dim);
        // Cartan-involving parts: plain g-bracket of the h components
        // against everything (the Cartan acts adjointly on every summand).
        let ah = g.embed_h(&g.cartan_part(a));
        let bh = g.embed_h(&g.cartan_part(b));
        out += g.bracket(&ah, b)?;
        out += g.bracket(&(a - &ah), &bh)?;
        // root-root parts by class
        for ra in 0..g.rootsystem.roots.len() {
            let ca = a[g.slot(ra)];
            if ca.norm() == 0.0 {
                continue;
            }
            for rb in 0..g.rootsystem.roots.len() {
                let cb = b[g.slot(rb)];
                if cb.norm() == 0.0 {
                    continue;
                }
                let sign = match (self.r.class(ra), self.r.class(rb)) {
                    (RootClass::BarPlus, RootClass::BarMinus)
                    | (RootClass::BarMinus, RootClass::BarPlus) => continue,
                    (RootClass::BarMinus, RootClass::BarMinus) => cr(-1.0),
                    _ => cr(1.0),
                };
                let mut ea = CVec::zeros(g.dim);
                ea[g.slot(ra)] = ca;
                let mut eb = CVec::zeros(g.dim);
                eb[g.slot(rb)] = cb;
                out += g.bracket(&ea, &eb)?.map(|z| z * sign);
            }
        }
        Ok(out)
    }

    /// Anchor of the dual algebroid on a fiber element: -K(q)Z + i* B.
    pub fn astar_anchor(&self, q: &CVec, z: &CVec, b: &CVec) -> CVec {
        let g = self.algebra();
        g.istar(b) - g.ad_star_h(z, q)
    }

    pub fn astar_anchor_deriv(
        &self,
        q: &CVec,
        s: &Section,
        dir: &CVec,
    ) -> Result<CVec> {
        let g = self.algebra();
        let (z, _) = (s.val)(q)?;
        let (dz, db) = (s.der)(q, dir)?;
        Ok(g.istar(&db) - g.ad_star_h(&dz, q) - g.ad_star_h(&z, dir))
    }

    /// The dual-algebroid bracket in the closed dynamical form, returned as
    /// a section with an analytic first derivative (second derivatives of
    /// the arguments and of the r-matrix enter).
    pub fn bracket_astar(&self, s: &Section, t: &Section) -> Section {
        let rb = self.r.clone();
        let rb2 = self.r.clone();
        let (s1, t1) = (s.clone(), t.clone());
        let (s2, t2) = (s.clone(), t.clone());
        let value = move |q: &CVec| -> Result<(CVec, CVec)> {
            let g = &rb.algebra;
            let (zs, bs) = (s1.val)(q)?;
            let (zt, bt) = (t1.val)(q)?;
            let a_s = g.istar(&bs);
            let a_t = g.istar(&bt);
            let rm = rb.eval(q)?;
            let mut w = CVec::zeros(g.rank());
            for i in 0..g.rank() {
                let ei = CVec::from_fn(g.rank(), |k, _| if k == i { cr(1.0) } else { cr(0.0) });
                w[i] = -bt.dot(&(rb.eval_d(q, &ei)? * &bs));
            }
            let w = w + (t1.der)(q, &a_s)?.0 - (s1.der)(q, &a_t)?.0;
            let u = &rm * &bs + g.embed_h(&zs);
            let v = &rm * &bt + g.embed_h(&zt);
            let c = -(s1.der)(q, &a_t)?.1 + (t1.der)(q, &a_s)?.1 + g.ad_star(&u) * &bt
                - g.ad_star(&v) * &bs;
            Ok((w, c))
        };
        let deriv = move |q: &CVec, dir: &CVec| -> Result<(CVec, CVec)> {
            let g = &rb2.algebra;
            let (zs, bs) = (s2.val)(q)?;
            let (zt, bt) = (t2.val)(q)?;
            let (dzs, dbs) = (s2.der)(q, dir)?;
            let (dzt, dbt) = (t2.der)(q, dir)?;
            let a_s = g.istar(&bs);
            let a_t = g.istar(&bt);
            let da_s = g.istar(&dbs);
            let da_t = g.istar(&dbt);
            let rm = rb2.eval(q)?;
            let drm = rb2.eval_d(q, dir)?;
            let mut dw = CVec::zeros(g.rank());
            for i in 0..g.rank() {
                let ei = CVec::from_fn(g.rank(), |k, _| if k == i { cr(1.0) } else { cr(0.0) });
                let d1 = rb2.eval_d(q, &ei)?;
                let d2 = rb2.eval_d2(q, &ei, dir)?;
                dw[i] = -dbt.dot(&(&d1 * &bs)) - bt.dot(&(&d2 * &bs)) - bt.dot(&(&d1 * &dbs));
            }
            let dw = dw + (t2.der2)(q, &a_s, dir)?.0 + (t2.der)(q, &da_s)?.0
                - (s2.der2)(q, &a_t, dir)?.0
                - (s2.der)(q, &da_t)?.0;
            let u = &rm * &bs + g.embed_h(&zs);
            let v = &rm * &bt + g.embed_h(&zt);
            let du = &drm * &bs + &rm * &dbs + g.embed_h(&dzs);
            let dv = &drm * &bt + &rm * &dbt + g.embed_h(&dzt);
            let dc = -(s2.der2)(q, &a_t, dir)?.1 - (s2.der)(q, &da_t)?.1
                + (t2.der2)(q, &a_s, dir)?.1
                + (t2.der)(q, &da_s)?.1
                + g.ad_star(&du) * &bt
                + g.ad_star(&u) * &dbt
                - g.ad_star(&dv) * &bs
                - g.ad_star(&v) * &dbs;
            Ok((dw, dc))
        };
        Section {
            val: Arc::new(value),
            der: Arc::new(deriv),
            der2: unimplemented_der2(),
        }
    }

    /// The dual-algebroid bracket through the pairing-defined general form,
    /// with the cocycle data of the coboundary case. Independent of the
    /// closed route above.
    pub fn bracket_astar_general(&self, s: &Section, t: &Section, q: &CVec) -> Result<(CVec, CVec)> {
        let g = self.algebra().clone();
        let r = self.r.clone();
        let dot = |a: &CVec, b: &CVec| a.dot(b);
        let pair_data = GeneralAstarData {
            algebra: g.clone(),
            pairing: Arc::new(dot),
            bracket_fiber: {
                let g2 = g.clone();
                Arc::new(move |a: &CVec, b: &CVec| g2.bracket(a, b))
            },
            restrict: {
                let g2 = g.clone();
                Arc::new(move |b: &CVec| g2.istar(b))
            },
            embed: {
                let g2 = g.clone();
                Arc::new(move |z: &CVec| g2.embed_h(z))
            },
            from_pairings: Arc::new(|v: &CVec| v.clone()),
            delta1: {
                let r2 = r.clone();
                Arc::new(move |q: &CVec, dir: &CVec| Ok(-r2.eval_d(q, dir)?))
            },
            dmul: {
                let r2 = r.clone();
                let g2 = g.clone();
                Arc::new(move |q: &CVec, y: &CVec| {
                    let m = r2.eval(q)?;
                    Ok(g2.ad(y) * &m + &m * g2.ad_star(y))
                })
            },
        };
        bracket_astar_pairing_route(&pair_data, s, t, q)
    }

    /// The vertex Lie algebra at q: the table of the dual bracket on
    /// constant sections valued in the anchor kernel.
    pub fn vertex(&self, q: &CVec) -> Result<VertexAlgebra> {
        let g = self.algebra();
        let r = g.rank();
        let nroots = g.rootsystem.roots.len();
        let n = r + nroots;
        let basis = |k: usize| -> Section {
            if k < r {
                let z = CVec::from_fn(r, |i, _| if i == k { cr(1.0) } else { cr(0.0) });
                Section::constant(z, CVec::zeros(g.dim))
            } else {
                Section::constant(CVec::zeros(r), g.flat_root(k - r))
            }
        };
        let mut table = vec![vec![CVec::zeros(n); n]; n];
        let mut closure: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let br = self.bracket_astar(&basis(i), &basis(j));
                let (w, c) = (br.val)(q)?;
                // anchor of the output must vanish (the kernel closes)
                closure = closure.max(max_abs_vec(&self.astar_anchor(q, &w, &c)));
                let mut coords = CVec::zeros(n);
                for k in 0..r {
                    coords[k] = w[k];
                }
                for root in 0..nroots {
                    coords[r + root] = c[g.slot(g.rootsystem.neg_of[root])];
                }
                table[i][j] = coords;
            }
        }
        Ok(VertexAlgebra {
            q: q.clone(),
            rank: r,
            table,
            closure_residual: closure,
        })
    }

    /// Vertex fiber element (Z, B-covector) as a g-vector Z + n.
    pub fn vertex_to_g(&self, z: &CVec, b: &CVec) -> CVec {
        let g = self.algebra();
        let mut out = g.embed_h(z);
        for root in 0..g.rootsystem.roots.len() {
            out[g.slot(root)] += b[g.slot(g.rootsystem.neg_of[root])];
        }
        out
    }

    /// Max over basis pairs of || psi [u, v]_vertex - [psi u, psi v]_g' ||.
    pub fn psi_iso_residual(&self, q: &CVec, tol: f64) -> Result<Residual> {
        let g = self.algebra();
        let psi = self.psi_matrix(q)?;
        let n = g.rank() + g.rootsystem.roots.len();
        let basis = |k: usize| -> (CVec, CVec) {
            if k < g.rank() {
                (
                    CVec::from_fn(g.rank(), |i, _| if i == k { cr(1.0) } else { cr(0.0) }),
                    CVec::zeros(g.dim),
                )
            } else {
                (CVec::zeros(g.rank()), g.flat_root(k - g.rank()))
            }
        };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (zi, bi) = basis(i);
                let (zj, bj) = basis(j);
                let si = Section::constant(zi.clone(), bi.clone());
                let sj = Section::constant(zj.clone(), bj.clone());
                let (w, c) = (self.bracket_astar(&si, &sj).val)(q)?;
                let lhs = &psi * self.vertex_to_g(&w, &c);
                let rhs = self.gprime_bracket(
                    &(&psi * self.vertex_to_g(&zi, &bi)),
                    &(&psi * self.vertex_to_g(&zj, &bj)),
                )?;
                worst = worst.max(max_abs_vec(&(lhs - rhs)));
            }
        }
        Ok(Residual::new("psi-iso", worst, tol, format!("q0={:.3}", q[0].re)))
    }

    /// The flat connection lambda -> (-C^#(q) lambda, lambda embedded).
    pub fn theta_star_section(&self, lambda: PolyMap) -> Section {
        let rb = self.r.clone();
        let rb2 = self.r.clone();
        let (l1, l2) = (lambda.clone(), lambda.clone());
        Section {
            val: Arc::new(move |q| {
                let lam = l1.eval(q);
                let g = &rb.algebra;
                Ok((
                    -(rb.csharp(q) * &lam),
                    g.embed_hstar(&lam),
                ))
            }),
            der: Arc::new(move |q, dir| {
                let lam = l2.eval(q);
                let dlam = l2.deriv(q, dir);
                let g = &rb2.algebra;
                Ok((
                    -(rb2.dcsharp(dir) * &lam) - rb2.csharp(q) * &dlam,
                    g.embed_hstar(&dlam),
                ))
            }),
            der2: unimplemented_der2(),
        }
    }

    /// The adjoint-bundle trivialization: xi -> (-h-part, flat(psi^{-1} n)).
    pub fn psi_tilde_section(&self, xi: PolyMap) -> Section {
        let me = Bialgebroid { r: self.r.clone() };
        let me2 = Bialgebroid { r: self.r.clone() };
        let (x1, x2) = (xi.clone(), xi.clone());
        Section {
            val: Arc::new(move |q| {
                let g = &me.r.algebra;
                let v = x1.eval(q);
                let h = g.cartan_part(&v);
                let n = &v - g.embed_h(&h);
                Ok((-h, g.flat(&(me.psi_inv_matrix(q)? * n))))
            }),
            der: Arc::new(move |q, dir| {
                let g = &me2.r.algebra;
                let v = x2.eval(q);
                let dv = x2.deriv(q, dir);
                let n = &v - g.embed_h(&g.cartan_part(&v));
                let dn = &dv - g.embed_h(&g.cartan_part(&dv));
                Ok((
                    -g.cartan_part(&dv),
                    g.flat(&(me2.dpsi_inv_matrix(q, dir)? * n + me2.psi_inv_matrix(q)? * dn)),
                ))
            }),
            der2: unimplemented_der2(),
        }
    }

    /// sigma(q, lambda, xi) = theta*(lambda) + psi~(xi), as a fiber value.
    pub fn sigma(&self, q: &CVec, lambda: &CVec, xi: &CVec) -> Result<(CVec, CVec)> {
        let g = self.algebra();
        let h = g.cartan_part(xi);
        let n = xi - g.embed_h(&h);
        Ok((
            -(self.r.csharp(q) * lambda) - h,
            g.embed_hstar(lambda) + g.flat(&(self.psi_inv_matrix(q)? * n)),
        ))
    }

    /// tau(q, Z, B) = (lambda, -C^# lambda - Z + psi n).
    pub fn tau(&self, q: &CVec, z: &CVec, b: &CVec) -> Result<(CVec, CVec)> {
        let g = self.algebra();
        let lambda = g.istar(b);
        let n = g.sharp(&(b - g.embed_hstar(&lambda)));
        let xi = g.embed_h(&(-(self.r.csharp(q) * &lambda) - z)) + self.psi_matrix(q)? * n;
        Ok((lambda, xi))
    }

    /// Dual-side map of the trivialization: tau*(q, Z, B') =
    /// (-lambda, C^# lambda + Z + psi* n) from A'* to A(X).
    pub fn tau_star_section(&self, zmap: PolyMap, bprime: PolyMap) -> Section {
        let me = Bialgebroid { r: self.r.clone() };
        let me2 = Bialgebroid { r: self.r.clone() };
        let (z1, b1) = (zmap.clone(), bprime.clone());
        let (z2, b2) = (zmap.clone(), bprime.clone());
        Section {
            val: Arc::new(move |q| {
                let g = &me.r.algebra;
                let z = z1.eval(q);
                let bp = b1.eval(q);
                let lambda = g.cartan_part(&bp);
                let n = &bp - g.embed_h(&lambda);
                let x = g.embed_h(&(me.r.csharp(q) * &lambda + &z)) + me.psi_star_matrix(q)? * n;
                Ok((-lambda, x))
            }),
            der: Arc::new(move |q, dir| {
                let g = &me2.r.algebra;
                let z = z2.eval(q);
                let dz = z2.deriv(q, dir);
                let bp = b2.eval(q);
                let dbp = b2.deriv(q, dir);
                let lambda = g.cartan_part(&bp);
                let dlambda = g.cartan_part(&dbp);
                let n = &bp - g.embed_h(&lambda);
                let dn = &dbp - g.embed_h(&dlambda);
                let dpsistar = me2.dpsi_star_matrix(q, dir)?;
                let dx = g.embed_h(
                    &(me2.r.dcsharp(dir) * &lambda + me2.r.csharp(q) * &dlambda + &dz),
                ) + &dpsistar * n
                    + me2.psi_star_matrix(q)? * dn;
                let _ = z;
                Ok((-dlambda, dx))
            }),
            der2: unimplemented_der2(),
        }
    }

    fn dpsi_star_matrix(&self, q: &CVec, dir: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut m = CMat::zeros(g.dim, g.dim);
        for root in 0..g.rootsystem.roots.len() {
            let s = g.slot(root);
            m[(s, s)] = self.dpsi_scalar(q, g.rootsystem.neg_of[root], dir)?;
        }
        Ok(m)
    }

    /// delta_1 P'(dir) of the dual cocycle, as an operator on g' in the
    /// Killing-identified coordinates.
    pub fn delta1_pprime(&self, q: &CVec, dir: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut pair = CMat::zeros(g.dim, g.dim);
        // root-root block
        for a in 0..g.rootsystem.roots.len() {
            let b = g.rootsystem.neg_of[a];
            let entry = self.psi_scalar(q, b)? * self.psi_scalar(q, a)?;
            let alpha = &g.rootsystem.roots[a].hstar;
            pair[(g.slot(a), g.slot(b))] = entry * alpha.dot(dir);
        }
        // Cartan block from the two-form
        for i in 0..g.rank() {
            let ei = CVec::from_fn(g.rank(), |k, _| if k == i { cr(1.0) } else { cr(0.0) });
            for j in 0..g.rank() {
                let ej = CVec::from_fn(g.rank(), |k, _| if k == j { cr(1.0) } else { cr(0.0) });
                let v = self.r.dcsharp(&ej) * &ei - self.r.dcsharp(&ei) * &ej;
                pair[(i, j)] = v.dot(dir);
            }
        }
        Ok(&self.algebra().killing_inv * pair)
    }

    /// The group-direction derivative of the dual cocycle at (q, 1, q),
    /// vanishing on Cartan directions.
    pub fn dmul_pprime(&self, q: &CVec, w: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let nroots = g.rootsystem.roots.len();
        let ncoeff = |root: usize| w[g.slot(root)];
        let mut pair = CMat::zeros(g.dim, g.dim);
        let psi_inv = |root: usize| -> Result<C> { Ok(self.psi_scalar(q, root)?.inv()) };
        for a in 0..nroots {
            for b in 0..nroots {
                // -(Pi_n [psi* e_a, psi* e_b], psi^{-1} w)
                let ra = &g.rootsystem.roots[a];
                let rb = &g.rootsystem.roots[b];
                let sum: Vec<i64> = ra
                    .coeffs
                    .iter()
                    .zip(rb.coeffs.iter())
                    .map(|(x, y)| x + y)
                    .collect();
                if let Some(cidx) = g.rootsystem.roots.iter().position(|r| r.coeffs == sum) {
                    let nab = g.nmap.get(&(a, b)).copied().unwrap_or(cr(0.0));
                    let neg_c = g.rootsystem.neg_of[cidx];
                    pair[(g.slot(a), g.slot(b))] = -self.psi_scalar(q, g.rootsystem.neg_of[a])?
                        * self.psi_scalar(q, g.rootsystem.neg_of[b])?
                        * nab
                        * psi_inv(neg_c)?
                        * ncoeff(neg_c);
                }
            }
        }
        for i in 0..g.rank() {
            let ei = CVec::from_fn(g.rank(), |k, _| if k == i { cr(1.0) } else { cr(0.0) });
            for b in 0..nroots {
                // -(d(psi*^{-1})(e_i) psi* e_b, w) - ([C# e_i, e_b], w)
                let negb = g.rootsystem.neg_of[b];
                let psi_negb = self.psi_scalar(q, negb)?;
                let dpsi_inv_negb = -self.dpsi_scalar(q, negb, &ei)? / (psi_negb * psi_negb);
                let beta = &g.rootsystem.roots[b].hstar;
                let csharp_beta = beta.dot(&(self.r.csharp(q) * &ei));
                let entry = -dpsi_inv_negb * psi_negb * ncoeff(negb) - csharp_beta * ncoeff(negb);
                pair[(i, g.slot(b))] = entry;
                pair[(g.slot(b), i)] = -entry;
            }
        }
        Ok(&g.killing_inv * pair)
    }

    /// P'_*(q, dir, w) = -delta_1 P'(dir) + dP'(w).
    pub fn pprime_star(&self, q: &CVec, dir: &CVec, w: &CVec) -> Result<CMat> {
        Ok(-self.delta1_pprime(q, dir)? + self.dmul_pprime(q, w)?)
    }

    /// The base part of the dual cocycle in closed form, l(q) with
    /// l(q0) = 0.
    pub fn lprime(&self, q: &CVec, q0: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let mut m = CMat::zeros(g.dim, g.dim);
        let cdiff = self.r.csharp(q) - self.r.csharp(q0);
        for i in 0..g.rank() {
            for j in 0..g.rank() {
                m[(i, j)] = cdiff[(i, j)];
            }
        }
        for root in 0..g.rootsystem.roots.len() {
            let s = g.slot(root);
            let beta = &g.rootsystem.roots[root];
            m[(s, s)] = match self.r.class(root) {
                RootClass::Span => self.r.phi(q, root)? - self.r.phi(q0, root)?,
                RootClass::BarPlus => {
                    let bm = beta.hstar.dot(&self.r.mu);
                    bm.exp() * ((-beta.hstar.dot(q0)).exp() - (-beta.hstar.dot(q)).exp())
                }
                RootClass::BarMinus => {
                    let bm = beta.hstar.dot(&self.r.mu);
                    (-bm).exp() * ((beta.hstar.dot(q)).exp() - (beta.hstar.dot(q0)).exp())
                }
            };
        }
        Ok(m)
    }

    /// The group-cocycle derivative at the identity, evaluated at q0, from
    /// the closed expressions.
    pub fn dpi1(&self, q0: &CVec, w: &CVec) -> Result<CMat> {
        let g = self.algebra();
        let nroots = g.rootsystem.roots.len();
        let ncoeff = |root: usize| w[g.slot(root)];
        let mut pair = CMat::zeros(g.dim, g.dim);
        for i in 0..g.rank() {
            let ei = CVec::from_fn(g.rank(), |k, _| if k == i { cr(1.0) } else { cr(0.0) });
            for b in 0..nroots {
                let beta = &g.rootsystem.roots[b].hstar;
                let phi = self.r.phi(q0, b)?;
                let entry =
                    -(phi * beta.dot(&ei) + beta.dot(&(self.r.csharp(q0) * &ei))) * ncoeff(g.rootsystem.neg_of[b]);
                pair[(i, g.slot(b))] = entry;
                pair[(g.slot(b), i)] = -entry;
            }
        }
        for a in 0..nroots {
            for b in 0..nroots {
                let ra = &g.rootsystem.roots[a];
                let rbv = &g.rootsystem.roots[b];
                let sum: Vec<i64> = ra
                    .coeffs
                    .iter()
                    .zip(rbv.coeffs.iter())
                    .map(|(x, y)| x + y)
                    .collect();
                if let Some(cidx) = g.rootsystem.roots.iter().position(|r| r.coeffs == sum) {
                    let nab = g.nmap.get(&(a, b)).copied().unwrap_or(cr(0.0));
                    let ratio = self.psi_scalar(q0, g.rootsystem.neg_of[a])?
                        * self.psi_scalar(q0, g.rootsystem.neg_of[b])?
                        / self.psi_scalar(q0, g.rootsystem.neg_of[cidx])?;
                    pair[(g.slot(a), g.slot(b))] =
                        -ratio * nab * ncoeff(g.rootsystem.neg_of[cidx]);
                }
            }
        }
        Ok(&g.killing_inv * pair)
    }

    /// Bracket of sections of the primed dual algebroid through the general
    /// pairing route, with the dual-cocycle data.
    pub fn bracket_astar_primed(&self, s: &Section, t: &Section, q: &CVec) -> Result<(CVec, CVec)> {
        let g = self.algebra().clone();
        let me = Bialgebroid { r: self.r.clone() };
        let me2 = Bialgebroid { r: self.r.clone() };
        let me3 = Bialgebroid { r: self.r.clone() };
        let g2 = g.clone();
        let g3 = g.clone();
        let g4 = g.clone();
        let data = GeneralAstarData {
            algebra: g.clone(),
            pairing: Arc::new(move |a: &CVec, b: &CVec| g2.killing_form(a, b)),
            bracket_fiber: Arc::new(move |a: &CVec, b: &CVec| me.gprime_bracket(a, b)),
            restrict: {
                let g5 = g.clone();
                Arc::new(move |b: &CVec| g5.cartan_part(b))
            },
            embed: Arc::new(move |z: &CVec| g3.embed_h(z)),
            from_pairings: Arc::new(move |v: &CVec| &g4.killing_inv * v),
            delta1: Arc::new(move |q: &CVec, dir: &CVec| me2.delta1_pprime(q, dir)),
            dmul: Arc::new(move |q: &CVec, y: &CVec| me3.dmul_pprime(q, y)),
        };
        bracket_astar_pairing_route(&data, s, t, q)
    }
}

/// Inputs of the pairing-defined dual-algebroid bracket, general enough to
/// serve both the plain and the primed algebroid.
pub struct GeneralAstarData {
    pub algebra: Arc<SimpleLieAlgebra>,
    pub pairing: Arc<dyn Fn(&CVec, &CVec) -> C + Send + Sync>,
    pub bracket_fiber: Arc<dyn Fn(&CVec, &CVec) -> Result<CVec> + Send + Sync>,
    pub restrict: Arc<dyn Fn(&CVec) -> CVec + Send + Sync>,
    pub embed: Arc<dyn Fn(&CVec) -> CVec + Send + Sync>,
    pub from_pairings: Arc<dyn Fn(&CVec) -> CVec + Send + Sync>,
    pub delta1: Arc<dyn Fn(&CVec, &CVec) -> Result<CMat> + Send + Sync>,
    pub dmul: Arc<dyn Fn(&CVec, &CVec) -> Result<CMat> + Send + Sync>,
}

/// The pairing form of the dual-algebroid bracket: every term of the display
/// is paired against a dual basis of (Lambda, Y) to produce coordinates.
pub fn bracket_astar_pairing_route(
    data: &GeneralAstarData,
    s: &Section,
    t: &Section,
    q: &CVec,
) -> Result<(CVec, CVec)> {
    let g = &data.algebra;
    let rank = g.rank();
    let dim = g.dim;
    let (zs, bs) = (s.val)(q)?;
    let (zt, bt) = (t.val)(q)?;
    // K(q) Z - A*(q) B = -anchor fiber part
    let arg_s = g.ad_star_h(&zs, q) - (data.restrict)(&bs);
    let arg_t = g.ad_star_h(&zt, q) - (data.restrict)(&bt);
    let d1p = |dir: &CVec| (data.delta1)(q, dir);
    // h-part: pair against the h* basis
    let mut w = CVec::zeros(rank);
    for i in 0..rank {
        let ei = CVec::from_fn(rank, |k, _| if k == i { cr(1.0) } else { cr(0.0) });
        let mut acc = cr(0.0);
        // line 1
        acc += (-(t.der)(q, &arg_s)?.0 + (s.der)(q, &arg_t)?.0).dot(&ei);
        // line 2: -<Z', dK(q)(e_i) Z>
        acc -= zt.dot(&g.ad_star_h(&zs, &ei));
        // line 3
        acc -= (data.pairing)(&bs, &(d1p(&ei)? * &bt));
        w[i] = acc;
    }
    // fiber part: pair against the fiber basis
    let mut pairings = CVec::zeros(dim);
    for k in 0..dim {
        let ek = CVec::from_fn(dim, |i, _| if i == k { cr(1.0) } else { cr(0.0) });
        let mut acc = cr(0.0);
        // line 4
        let v = (s.der)(q, &arg_t)?.1 - (t.der)(q, &arg_s)?.1;
        acc += (data.pairing)(&v, &ek);
        // line 5: <ad*_{embed Z} B' - ad*_{embed Z'} B, Y>
        acc += (data.pairing)(&bt, &(data.bracket_fiber)(&(data.embed)(&zs), &ek)?);
        acc -= (data.pairing)(&bs, &(data.bracket_fiber)(&(data.embed)(&zt), &ek)?);
        // line 6
        acc += (data.pairing)(&bs, &((data.dmul)(q, &ek)? * &bt));
        pairings[k] = acc;
    }
    Ok((w, (data.from_pairings)(&pairings)))
}

/// Structure constants of the anchor kernel at one base point.
pub struct VertexAlgebra {
    pub q: CVec,
    pub rank: usize,
    pub table: Vec<Vec<CVec>>,
    pub closure_residual: f64,
}

impl VertexAlgebra {
    pub fn dim(&self) -> usize {
        self.table.len()
    }

    pub fn bracket(&self, a: &CVec, b: &CVec) -> CVec {
        let n = self.dim();
        let mut out = CVec::zeros(n);
        for i in 0..n {
            if a[i].norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                out += self.table[i][j].map(|z| z * a[i] * b[j]);
            }
        }
        out
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(max_abs_vec(&(&self.table[i][j] + &self.table[j][i])));
            }
        }
        worst
    }

    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        let basis = |k: usize| CVec::from_fn(n, |i, _| if i == k { cr(1.0) } else { cr(0.0) });
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = self.bracket(&basis(i), &self.table[j][k]);
                    let b = self.bracket(&basis(j), &self.table[k][i]);
                    let c = self.bracket(&basis(k), &self.table[i][j]);
                    worst = worst.max(max_abs_vec(&(a + b + c)));
                }
            }
        }
        worst
    }
}

/// The morphism condition of the bialgebroid functor for the dynamical type:
/// <B, dP(embed Z) B' - delta_1 P(ad*_Z q) B'> maximized over dual basis
/// pairs, which reduces to equivariance of the r-matrix.
pub fn bialgebroid_morphism_residual(
    r: &dyn RMatrix,
    q: &CVec,
    z: &CVec,
    tol: f64,
) -> Result<Residual> {
    let g = r.algebra();
    let m = r.eval(q)?;
    let zg = g.embed_h(z);
    let dp = g.ad(&zg) * &m + &m * g.ad_star(&zg);
    let d1 = -r.eval_d(q, &g.ad_star_h(z, q))?;
    let op = dp - d1;
    Ok(Residual::new(
        "bialgebroid-morphism",
        max_abs(&op),
        tol,
        format!("q0={:.3}", q[0].re),
    ))
}
