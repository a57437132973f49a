//! Symplectic leaves of the groupoid side as orbits of the group action
//! obtained by restricting the extended left action, for the standard
//! constant r-matrix and for the zero r-matrix, plus the reduction at the
//! zero level of the difference of the two momentum maps.

use super::{DoubleGroup, DualGroupElement, GammaElement};
use crate::error::{Error, Result};
use crate::numerics::{
    cr, max_abs_vec, numerical_rank, subspace_inclusion_residual, CMat, CVec, C,
};
use crate::pgroupoid::{DynamicalBivector, GroupoidPoint, XFun};
use crate::residual::Residual;
use rand_chacha::ChaCha8Rng;

impl DoubleGroup {
    /// The group action of H x (H x G*) on the groupoid side obtained by
    /// restricting the extended action.
    pub fn leaf_action(
        &self,
        k: &CMat,
        h: &CMat,
        u: &DualGroupElement,
        x: &GroupoidPoint,
    ) -> Result<GroupoidPoint> {
        let gm = GammaElement {
            h: h.clone(),
            p: x.p.clone(),
            u: u.clone(),
        };
        self.big_psi_minus(&gm, k, x)
    }

    /// The same action for the zero r-matrix, where the dual group is the
    /// additive dual and both dressings collapse to coadjoint actions.
    pub fn leaf_action_zero_r(
        &self,
        k: &CMat,
        h: &CMat,
        a: &CVec,
        x: &GroupoidPoint,
    ) -> Result<GroupoidPoint> {
        let g = &self.algebra;
        let hi = h.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let ki = k.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let hgk = h * &x.x * &ki;
        Ok(GroupoidPoint {
            p: g.coad_h_on_hstar(&hi)?.transpose() * &x.p + g.istar(a),
            x: hgk.clone(),
            q: g.coad_h_on_hstar(&ki)?.transpose() * &x.q
                + g.istar(&(g.group_ad_star(&hgk)? * a)),
        })
    }

    /// Orbit tangent directions at a point: derivatives of the action along
    /// a basis of the acting Lie algebra, stacked as columns in the
    /// right-trivialized coordinates of the groupoid side.
    pub fn orbit_tangents(&self, x: &GroupoidPoint, zero_r: bool) -> Result<CMat> {
        let g = &self.algebra;
        let r = g.rank();
        let dim = g.dim;
        let total = 2 * r + dim;
        let eps = self.fd_step;
        let id = CMat::identity(g.n, g.n);
        let mut cols = Vec::new();
        let embed_tangent = |plus: &GroupoidPoint, minus: &GroupoidPoint| -> CVec {
            let mut v = CVec::zeros(total);
            let dp = (&plus.p - &minus.p).map(|z| z / cr(2.0 * eps));
            let dq = (&plus.q - &minus.q).map(|z| z / cr(2.0 * eps));
            let dx = (&plus.x - &minus.x).map(|z| z / cr(2.0 * eps));
            let xinv = x.x.clone().try_inverse().unwrap();
            let right = g.expand(&(dx * xinv));
            for i in 0..r {
                v[i] = dp[i];
                v[r + dim + i] = dq[i];
            }
            for kk in 0..dim {
                v[r + kk] = right[kk];
            }
            v
        };
        // k-directions and h-directions
        for j in 0..r {
            let step = |sg: f64| {
                g.cartan_group(&CVec::from_fn(r, |i, _| {
                    if i == j {
                        cr(sg)
                    } else {
                        cr(0.0)
                    }
                }))
            };
            let act = |kmat: &CMat, hmat: &CMat| -> Result<GroupoidPoint> {
                if zero_r {
                    self.leaf_action_zero_r(kmat, hmat, &CVec::zeros(dim), x)
                } else {
                    self.leaf_action(kmat, hmat, &DualGroupElement::identity(g.n), x)
                }
            };
            cols.push(embed_tangent(&act(&step(eps), &id)?, &act(&step(-eps), &id)?));
            cols.push(embed_tangent(&act(&id, &step(eps))?, &act(&id, &step(-eps))?));
        }
        // dual directions
        for kk in 0..dim {
            let mut a = CVec::zeros(dim);
            a[kk] = cr(1.0);
            let act = |sg: f64| -> Result<GroupoidPoint> {
                if zero_r {
                    self.leaf_action_zero_r(&id, &id, &a.map(|z| z * cr(sg)), x)
                } else {
                    self.leaf_action(&id, &id, &self.exp_gstar(&a.map(|z| z * cr(sg))), x)
                }
            };
            cols.push(embed_tangent(&act(eps)?, &act(-eps)?));
        }
        Ok(CMat::from_columns(&cols))
    }

    /// Rank equality and inclusion residual between the orbit tangent space
    /// and the range of the groupoid bivector at the point.
    pub fn leaf_tangency(
        &self,
        bivector: &DynamicalBivector,
        x: &GroupoidPoint,
        zero_r: bool,
        tol: f64,
    ) -> Result<(usize, usize, Residual)> {
        let pi = bivector.pi_matrix(x)?;
        let orbit = self.orbit_tangents(x, zero_r)?;
        let rank_pi = numerical_rank(&pi, 1e-8);
        let rank_orbit = numerical_rank(&orbit, 1e-8);
        let incl = subspace_inclusion_residual(&pi, &orbit, 1e-8);
        Ok((
            rank_pi,
            rank_orbit,
            Residual::new("leaf-tangency", incl, tol, "sample"),
        ))
    }

    /// The Poisson-action condition of the leaf theorem: the action bracket
    /// of two pullbacks minus the pullback of the groupoid bracket, the
    /// acting group carrying the product structure whose only nonzero part
    /// lives on the dual factor.
    pub fn poisson_action_residual(
        &self,
        bivector: &DynamicalBivector,
        f: &XFun,
        f2: &XFun,
        k: &CMat,
        h: &CMat,
        u: &DualGroupElement,
        x: &GroupoidPoint,
        zero_r: bool,
        tol: f64,
    ) -> Result<Residual> {
        let g = &self.algebra;
        let dim = g.dim;
        let eps = self.fd_step;
        let image = if zero_r {
            let a = self.i_star_inverse_zero(u)?;
            self.leaf_action_zero_r(k, h, &a, x)?
        } else {
            self.leaf_action(k, h, u, x)?
        };
        // X-part of the product bracket: gradients of the composed maps in
        // the groupoid slot
        let act = |kk: &CMat, hh: &CMat, uu: &DualGroupElement, y: &GroupoidPoint| {
            if zero_r {
                let a = self.i_star_inverse_zero(uu)?;
                self.leaf_action_zero_r(kk, hh, &a, y)
            } else {
                self.leaf_action(kk, hh, uu, y)
            }
        };
        let comp_f = |y: &GroupoidPoint| -> Result<C> { Ok(f.eval(&act(k, h, u, y)?)) };
        let comp_f2 = |y: &GroupoidPoint| -> Result<C> { Ok(f2.eval(&act(k, h, u, y)?)) };
        let df = crate::pgroupoid::numeric_grad(g, &comp_f, x, eps)?;
        let df2 = crate::pgroupoid::numeric_grad(g, &comp_f2, x, eps)?;
        let x_part = bivector.bracket_from_grads(x, &df, &df2)?;
        // dual-factor part: -d_* F lam+(l-grad of F')(u) with the gradient
        // of the composite in the u-slot
        let dual_part = if zero_r {
            // Lie-Poisson bracket <A, [delta F, delta F']> on the additive
            // dual; gradients along the flat directions
            let a0 = self.i_star_inverse_zero(u)?;
            let mut dfa = CVec::zeros(dim);
            let mut df2a = CVec::zeros(dim);
            for kk in 0..dim {
                let mut e = CVec::zeros(dim);
                e[kk] = cr(1.0);
                let probe = |sg: f64, fun: &XFun| -> Result<C> {
                    let a = &a0 + e.map(|z| z * cr(sg * eps));
                    Ok(fun.eval(&self.leaf_action_zero_r(k, h, &a, x)?))
                };
                dfa[kk] = (probe(1.0, f)? - probe(-1.0, f)?) / cr(2.0 * eps);
                df2a[kk] = (probe(1.0, f2)? - probe(-1.0, f2)?) / cr(2.0 * eps);
            }
            // gradients already live in g (functions of a covector)
            let lie = g.bracket(&dfa, &df2a)?;
            a0.dot(&lie)
        } else {
            let comp_u = |fun: &XFun, uu: &DualGroupElement| -> Result<C> {
                Ok(fun.eval(&act(k, h, uu, x)?))
            };
            // right gradient D_* and left gradient D'_* of both composites
            let mut dstar_f = CVec::zeros(dim);
            let mut dstar_left_f2 = CVec::zeros(dim);
            for kk in 0..dim {
                let mut e = CVec::zeros(dim);
                e[kk] = cr(1.0);
                let right = |sg: f64, fun: &XFun| -> Result<C> {
                    comp_u(fun, &self.exp_gstar(&e.map(|z| z * cr(sg * eps))).mul(u))
                };
                let left = |sg: f64, fun: &XFun| -> Result<C> {
                    comp_u(fun, &u.mul(&self.exp_gstar(&e.map(|z| z * cr(sg * eps)))))
                };
                dstar_f[kk] = (right(1.0, f)? - right(-1.0, f)?) / cr(2.0 * eps);
                dstar_left_f2[kk] = (left(1.0, f2)? - left(-1.0, f2)?) / cr(2.0 * eps);
            }
            // -<dF, lam+(D'_* F')(u)>: contract the right gradient with the
            // right-trivialized dressing tangent
            let lam = self.lambda_plus(&dstar_left_f2, u)?;
            let lam_right = self.right_triv(u, &lam)?;
            -lam_right.dot(&dstar_f)
        };
        let lhs = x_part + dual_part;
        let rhs = bivector.bracket(f, f2, &image)?;
        Ok(Residual::new(
            "poisson-action",
            (lhs - rhs).norm(),
            tol,
            "sample",
        ))
    }

    /// Chart inverse of the additive dual for the zero r-matrix: the
    /// covector with the same triangular data.
    pub fn i_star_inverse_zero(&self, u: &DualGroupElement) -> Result<CVec> {
        // log of both factors recovers the additive coordinate
        let up = crate::numerics::mat_log(&u.bplus)?;
        let um = crate::numerics::mat_log(&u.bminus)?;
        Ok(self.pair_to_gstar(&up, &um))
    }

    /// The combined conjugation action of the Cartan subgroup on the
    /// groupoid side.
    pub fn conjugation_action(&self, h: &CMat, x: &GroupoidPoint) -> Result<GroupoidPoint> {
        let g = &self.algebra;
        let hi = h.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        Ok(GroupoidPoint {
            p: g.coad_h_on_hstar(&hi)?.transpose() * &x.p,
            x: h * &x.x * &hi,
            q: g.coad_h_on_hstar(&hi)?.transpose() * &x.q,
        })
    }

    /// Equivariance and Hamiltonian residuals of the momentum map of the
    /// conjugation action (the difference of target and source).
    pub fn reduction_momentum_residuals(
        &self,
        bivector: &DynamicalBivector,
        x: &GroupoidPoint,
        z: &CVec,
        tol: f64,
    ) -> Result<Vec<Residual>> {
        let g = &self.algebra;
        let mut out = Vec::new();
        // equivariance: J(h . x) = coAd_h J(x)
        let h = g.cartan_group(z);
        let hi = h.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let moved = self.conjugation_action(&h, x)?;
        let jm = &moved.p - &moved.q;
        let want = g.coad_h_on_hstar(&hi)?.transpose() * (&x.p - &x.q);
        out.push(Residual::new(
            "reduction-equivariance",
            max_abs_vec(&(jm - want)),
            tol,
            "sample",
        ));
        // Hamiltonian vector field of <J, Z> against the generator
        let jz = {
            // f = <p - q, Z> as a polynomial function
            let r = g.rank();
            let nv = XFun::nvars(r, g.n);
            let mut poly = crate::poly::Poly::zero(nv);
            for i in 0..r {
                let mut e = vec![0u8; nv];
                e[i] = 1;
                poly.add_term(e, z[i]);
                let mut e = vec![0u8; nv];
                e[nv - r + i] = 1;
                poly.add_term(e, -z[i]);
            }
            XFun::new(poly, r, g.n)
        };
        let grads = jz.grad(g, x);
        let pi = bivector.pi_matrix(x)?;
        let r = g.rank();
        let dim = g.dim;
        let mut stacked = CVec::zeros(2 * r + dim);
        for i in 0..r {
            stacked[i] = grads.d1[i];
            stacked[r + dim + i] = grads.d2[i];
        }
        for kk in 0..dim {
            stacked[r + kk] = grads.dr[kk];
        }
        let ham = pi * stacked;
        // generator of the conjugation action in the same coordinates
        let eps = self.fd_step;
        let hp = g.cartan_group(&z.map(|v| v * cr(eps)));
        let hm = g.cartan_group(&z.map(|v| v * cr(-eps)));
        let plus = self.conjugation_action(&hp, x)?;
        let minus = self.conjugation_action(&hm, x)?;
        let mut gen = CVec::zeros(2 * r + dim);
        let xinv = x.x.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let dxr = g.expand(&((&plus.x - &minus.x).map(|v| v / cr(2.0 * eps)) * xinv));
        for i in 0..r {
            gen[i] = (plus.p[i] - minus.p[i]) / cr(2.0 * eps);
            gen[r + dim + i] = (plus.q[i] - minus.q[i]) / cr(2.0 * eps);
        }
        for kk in 0..dim {
            gen[r + kk] = dxr[kk];
        }
        out.push(Residual::new(
            "reduction-hamiltonian",
            max_abs_vec(&(ham - gen)),
            tol,
            "sample",
        ));
        Ok(out)
    }

    /// Extension independence of the reduced bracket: two different
    /// invariant extensions of functions on the zero fiber produce the same
    /// restricted bracket.
    pub fn reduction_extension_residual(
        &self,
        bivector: &DynamicalBivector,
        x0: &GroupoidPoint,
        rng: &mut ChaCha8Rng,
        tol: f64,
    ) -> Result<Residual> {
        let g = &self.algebra;
        let r = g.rank();
        let n = g.n;
        let nv = XFun::nvars(r, n);
        // invariant data: trace polynomials of the group slot times
        // polynomials of the base slots
        let trace_poly = |weights: &[C]| -> crate::poly::Poly {
            // weights[0] tr(g) + weights[1] tr(g^2)-entry expansion
            let mut poly = crate::poly::Poly::zero(nv);
            for i in 0..n {
                let mut e = vec![0u8; nv];
                e[r + i * n + i] = 1;
                poly.add_term(e, weights[0]);
            }
            for i in 0..n {
                for j in 0..n {
                    let mut e = vec![0u8; nv];
                    e[r + i * n + j] += 1;
                    e[r + j * n + i] += 1;
                    poly.add_term(e, weights[1]);
                }
            }
            poly
        };
        use rand::Rng;
        let mk_pair = |rng: &mut ChaCha8Rng| -> (XFun, XFun) {
            let w = [
                C::new(rng.gen::<f64>() - 0.5, 0.0),
                C::new(rng.gen::<f64>() - 0.5, 0.0),
            ];
            let tp = trace_poly(&w);
            // extension a: multiply by a polynomial of p; extension b: the
            // same polynomial of (p + q) / 2 -- they agree on the zero fiber
            let c = C::new(rng.gen::<f64>() - 0.5, 0.0);
            let mut pa = crate::poly::Poly::zero(nv);
            for i in 0..r {
                let mut e = vec![0u8; nv];
                e[i] = 1;
                pa.add_term(e, c);
            }
            let mut pb = crate::poly::Poly::zero(nv);
            for i in 0..r {
                let mut e = vec![0u8; nv];
                e[i] = 1;
                pb.add_term(e, c / cr(2.0));
                let mut e = vec![0u8; nv];
                e[nv - r + i] = 1;
                pb.add_term(e, c / cr(2.0));
            }
            (
                XFun::new(tp.mul(&pa), r, n),
                XFun::new(tp.mul(&pb), r, n),
            )
        };
        let (fa, fb) = mk_pair(rng);
        let (ga, gb) = mk_pair(rng);
        let va = bivector.bracket(&fa, &ga, x0)?;
        let vb = bivector.bracket(&fb, &gb, x0)?;
        Ok(Residual::new(
            "reduction-extension",
            (va - vb).norm(),
            tol,
            "sample",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Conventions, DoubleGroup};
    use super::*;
    use crate::dynrmat::ConstantR;
    use crate::liealg::{build_algebra, Series};
    use crate::pgroupoid::CoboundaryCocycle;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn dd(rank: usize) -> DoubleGroup {
        let g = Arc::new(build_algebra(Series::A, rank).unwrap());
        DoubleGroup::new(g, Conventions::default())
    }

    fn bivector(d: &DoubleGroup, scale: f64) -> DynamicalBivector {
        let r = ConstantR::standard(d.algebra.clone(), cr(scale));
        DynamicalBivector::new(
            d.algebra.clone(),
            Arc::new(CoboundaryCocycle::new(Arc::new(r))),
        )
    }

    fn random_x(d: &DoubleGroup, rng: &mut ChaCha8Rng) -> GroupoidPoint {
        GroupoidPoint {
            p: crate::dynrmat::random_covector(d.algebra.rank(), rng),
            x: d.random_group(rng),
            q: crate::dynrmat::random_covector(d.algebra.rank(), rng),
        }
    }

    #[test]
    fn identity_acts_trivially() {
        let d = dd(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_x(&d, &mut rng);
        let id = CMat::identity(2, 2);
        let out = d
            .leaf_action(&id, &id, &DualGroupElement::identity(2), &x)
            .unwrap();
        assert!(max_abs_vec(&(&out.p - &x.p)) < 1e-12);
        assert!(crate::numerics::max_abs(&(&out.x - &x.x)) < 1e-12);
    }

    #[test]
    fn zero_r_action_display() {
        let d = dd(1);
        let g = &d.algebra;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_x(&d, &mut rng);
        let h = d.random_cartan(&mut rng);
        let k = d.random_cartan(&mut rng);
        let a = crate::dynrmat::random_covector(g.dim, &mut rng);
        let out = d.leaf_action_zero_r(&k, &h, &a, &x).unwrap();
        // first slot: coAd-moved p plus the restriction of the covector
        let want = &x.p + g.istar(&a);
        assert!(max_abs_vec(&(&out.p - &want)) < 1e-12);
    }

    #[test]
    fn leaf_tangency_at_regular_points() {
        let d = dd(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let biv = bivector(&d, d.conventions.x_rmatrix_scale);
        let biv0 = bivector(&d, 0.0);
        for _ in 0..3 {
            let x = random_x(&d, &mut rng);
            let (rp, ro, res) = d.leaf_tangency(&biv, &x, false, 1e-6).unwrap();
            assert_eq!(rp, ro, "standard-r ranks {rp} vs {ro}");
            assert!(res.pass, "{}", res.value);
            let (rp, ro, res) = d.leaf_tangency(&biv0, &x, true, 1e-6).unwrap();
            assert_eq!(rp, ro, "zero-r ranks {rp} vs {ro}");
            assert!(res.pass, "{}", res.value);
        }
    }

    #[test]
    fn poisson_action_condition() {
        let d = dd(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let biv = bivector(&d, d.conventions.x_rmatrix_scale);
        let f = XFun::random(1, 2, 2, &mut rng);
        let f2 = XFun::random(1, 2, 2, &mut rng);
        for _ in 0..2 {
            let x = random_x(&d, &mut rng);
            let k = d.random_cartan(&mut rng);
            let h = d.random_cartan(&mut rng);
            let u = d.random_dual(&mut rng);
            let res = d
                .poisson_action_residual(&biv, &f, &f2, &k, &h, &u, &x, false, 1e-6)
                .unwrap();
            assert!(res.pass, "standard-r: {}", res.value);
        }
        let biv0 = bivector(&d, 0.0);
        let x = random_x(&d, &mut rng);
        let k = d.random_cartan(&mut rng);
        let h = d.random_cartan(&mut rng);
        let u = d.exp_gstar(&crate::dynrmat::random_covector(d.algebra.dim, &mut rng));
        let res = d
            .poisson_action_residual(&biv0, &f, &f2, &k, &h, &u, &x, true, 1e-6)
            .unwrap();
        assert!(res.pass, "zero-r: {}", res.value);
    }

    #[test]
    fn reduction_momentum_and_extensions() {
        let d = dd(1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let biv = bivector(&d, d.conventions.x_rmatrix_scale);
        let x = random_x(&d, &mut rng);
        let z = crate::dynrmat::random_covector(1, &mut rng);
        for res in d.reduction_momentum_residuals(&biv, &x, &z, 1e-6).unwrap() {
            assert!(res.pass, "{}: {}", res.name, res.value);
        }
        // J(unit) = 0
        let q = crate::dynrmat::random_covector(1, &mut rng);
        let e = GroupoidPoint::unit(&q, 2);
        assert!(max_abs_vec(&(&e.p - &e.q)) < 1e-15);
        // extension independence on the zero fiber
        let x0 = GroupoidPoint {
            p: q.clone(),
            x: d.random_group(&mut rng),
            q,
        };
        let res = d
            .reduction_extension_residual(&biv, &x0, &mut rng, 1e-6)
            .unwrap();
        assert!(res.pass, "{}", res.value);
    }
}
