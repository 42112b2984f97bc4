//! Error norms, self-convergence order estimation, cost/gain metrics, and a
//! rational-arithmetic harness that executes the local time-stepping
//! synchronization on a minimal coarse|fine pair with f(q) = lambda q,
//! recovering the one-step amplification polynomials and the interface error
//! terms with exact coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::mr::DenseField;
use crate::time::SchemeKind;

// ---------------------------------------------------------------------------
// Norms, orders and cost metrics
// ---------------------------------------------------------------------------

/// Discrete L1 error per component on the uniform level-L grid:
/// (1/2^{Ld}) sum_i |q_ref,i - q_i|.
pub fn l1_error(field: &DenseField, reference: &DenseField) -> Result<Vec<f64>> {
    if field.level != reference.level
        || field.dim != reference.dim
        || field.ncomp != reference.ncomp
    {
        return Err(Error::Constraint {
            key: "l1_error".into(),
            msg: "field shapes differ".into(),
        });
    }
    let cells = field.cells() as f64;
    let mut e = vec![0.0; field.ncomp];
    for (cell, chunk) in field.data.chunks(field.ncomp).enumerate() {
        for (k, v) in chunk.iter().enumerate() {
            e[k] += (reference.data[cell * field.ncomp + k] - v).abs();
        }
    }
    for v in &mut e {
        *v /= cells;
    }
    Ok(e)
}

fn l1_total_diff(a: &DenseField, b: &DenseField) -> Result<f64> {
    Ok(l1_error(a, b)?.iter().sum())
}

/// Self-convergence order from three runs differing only in dt:
/// p = log2 ||q_dt - q_{dt/2}||_1 / ||q_{dt/2} - q_{dt/4}||_1.
pub fn self_convergence_order(
    q_dt: &DenseField,
    q_half: &DenseField,
    q_quarter: &DenseField,
) -> Result<f64> {
    let num = l1_total_diff(q_dt, q_half)?;
    let den = l1_total_diff(q_half, q_quarter)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).log2())
}

/// mu = e * t_method / t_fv.
pub fn cost_mu(e: f64, t_method: f64, t_fv: f64) -> Result<f64> {
    if t_fv <= 0.0 {
        return Err(Error::Constraint { key: "t_fv".into(), msg: "must be positive".into() });
    }
    Ok(e * t_method / t_fv)
}

/// lambda = mu_other / mu_nerk.
pub fn gain_lambda(mu_other: f64, mu_nerk: f64) -> Result<f64> {
    if mu_nerk <= 0.0 {
        return Err(Error::Constraint { key: "mu_nerk".into(), msg: "must be positive".into() });
    }
    Ok(mu_other / mu_nerk)
}

/// Per-cycle grid sample recorded by the runner.
#[derive(Debug, Clone, Copy)]
pub struct CycleSample {
    pub cycle: u64,
    pub t: f64,
    pub leaves: usize,
    pub virtuals: usize,
    pub compression: f64,
}

/// Metrics of one run: errors, wall time (evolution only, I/O excluded),
/// leaf-count time series and compression statistics.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub problem: String,
    pub scheme: SchemeKind,
    pub e_l1: Option<Vec<f64>>,
    pub wall_seconds: f64,
    pub cycles: u64,
    pub series: Vec<CycleSample>,
    pub min_comp0: f64,
    pub max_comp0: f64,
}

impl RunMetrics {
    pub fn compression_mean(&self) -> f64 {
        if self.series.is_empty() {
            return 100.0;
        }
        self.series.iter().map(|s| s.compression).sum::<f64>() / self.series.len() as f64
    }

    pub fn compression_final(&self) -> f64 {
        self.series.last().map(|s| s.compression).unwrap_or(100.0)
    }
}

// ---------------------------------------------------------------------------
// Exact rational polynomials in w = lambda dt
// ---------------------------------------------------------------------------

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Polynomial with exact rational coefficients, ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<BigRational>);

impl Poly {
    pub fn zero() -> Self {
        Poly(vec![])
    }

    pub fn one() -> Self {
        Poly(vec![BigRational::one()])
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut c = vec![BigRational::zero(); n];
        for (k, v) in self.0.iter().enumerate() {
            c[k] += v;
        }
        for (k, v) in other.0.iter().enumerate() {
            c[k] += v;
        }
        Poly(c).trimmed()
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(ratio(-1, 1)))
    }

    pub fn scale(&self, c: BigRational) -> Poly {
        Poly(self.0.iter().map(|v| v * &c).collect()).trimmed()
    }

    pub fn scale_i(&self, n: i64, d: i64) -> Poly {
        self.scale(ratio(n, d))
    }

    /// Multiply by the variable (one further factor lambda dt).
    pub fn shift(&self) -> Poly {
        if self.0.is_empty() {
            return Poly::zero();
        }
        let mut c = Vec::with_capacity(self.0.len() + 1);
        c.push(BigRational::zero());
        c.extend(self.0.iter().cloned());
        Poly(c)
    }

    /// Substitute w = z/2: polynomial in the doubled step variable.
    pub fn rescale_half(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .map(|(k, v)| v / BigRational::from(BigInt::from(1i64 << k)))
                .collect(),
        )
        .trimmed()
    }

    pub fn eval(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for v in self.0.iter().rev() {
            acc = acc * z + v.to_f64().expect("rational fits f64");
        }
        acc
    }

    fn trimmed(mut self) -> Poly {
        while self.0.last().map(|v| v.is_zero()).unwrap_or(false) {
            self.0.pop();
        }
        self
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.to_f64().unwrap()).collect()
    }

    pub fn expect_coeffs(&self, coeffs: &[(i64, i64)]) -> bool {
        let want: Vec<BigRational> = coeffs.iter().map(|(n, d)| ratio(*n, *d)).collect();
        let got = &self.trimmed_ref();
        got.0.len() == want.len() && got.0.iter().zip(want.iter()).all(|(a, b)| a == b)
    }

    fn trimmed_ref(&self) -> Poly {
        self.clone().trimmed()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| v.is_zero())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.0.iter().fold(0.0, |m: f64, v| m.max(v.abs().to_f64().unwrap()))
    }
}

// ---------------------------------------------------------------------------
// Symbolic two-cell interface harness
// ---------------------------------------------------------------------------

/// Which one-step map of the stability model to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceSide {
    Uniform,
    CoarseSide,
    FineSide,
}

#[derive(Debug, Clone)]
struct SymCell {
    q_n: Poly,
    q_star: Poly,
    q_dstar: Poly,
    q14: Poly,
    q12: Poly,
    q34: Poly,
    /// dt_l * f of the most recent stage (the compact k value).
    k: Poly,
}

impl SymCell {
    fn unit() -> Self {
        SymCell {
            q_n: Poly::one(),
            q_star: Poly::zero(),
            q_dstar: Poly::zero(),
            q14: Poly::zero(),
            q12: Poly::zero(),
            q34: Poly::zero(),
            k: Poly::zero(),
        }
    }
}

/// Result of one symbolic LT iteration on the coarse|fine pair, everything
/// expressed in w = lambda dt_fine.
#[derive(Debug, Clone)]
pub struct InterfaceRun {
    pub fine_w: Poly,
    pub coarse_w: Poly,
    /// eps_1, eps_2, eps_3, eps_4 in w (eps_3 only for three-stage schemes).
    pub eps_w: [Poly; 4],
}

/// Uniform-grid amplification polynomial of the scheme (pure RK chain).
fn uniform_poly(rk3: bool) -> Poly {
    let q = Poly::one();
    let k1 = q.shift();
    let qs = q.add(&k1);
    let k2 = qs.shift();
    if !rk3 {
        // 1/2 q + 1/2 q* + 1/2 k2
        q.scale_i(1, 2).add(&qs.scale_i(1, 2)).add(&k2.scale_i(1, 2))
    } else {
        let qss = q.scale_i(3, 4).add(&qs.scale_i(1, 4)).add(&k2.scale_i(1, 4));
        let k3 = qss.shift();
        q.scale_i(1, 3).add(&qss.scale_i(2, 3)).add(&k3.scale_i(2, 3))
    }
}

/// Execute one LT iteration (n = 0, both levels active) on the periodic
/// coarse|fine layout, mirroring the tree scheduler: the fine flux arguments
/// are the coarse-side virtual-leaf predictions, the coarse flux arguments
/// the extrapolated/completed fine values. Prediction and projection act as
/// the identity on this symmetric pair.
pub fn interface_run(scheme: SchemeKind) -> InterfaceRun {
    let rk3 = scheme.is_rk3();
    let mut c = SymCell::unit(); // coarse leaf, step 2w
    let mut n = SymCell::unit(); // internal node above the fine leaves
    let mut f = SymCell::unit(); // fine leaf, step w
    let mut v = SymCell::unit(); // virtual child of the coarse leaf

    // Truth chains of the plain RK method at the fine and coarse steps.
    let hat_qs_f = Poly::one().add(&Poly::one().shift()); // 1 + w
    let hat_qss_f = {
        let q = Poly::one();
        let k2 = hat_qs_f.shift();
        q.scale_i(3, 4).add(&hat_qs_f.scale_i(1, 4)).add(&k2.scale_i(1, 4))
    };
    let shift2 = |p: &Poly| p.shift().scale_i(2, 1); // times 2w
    let hat_qs_c = Poly::one().add(&shift2(&Poly::one())); // 1 + 2w
    let hat_qss_c = {
        let q = Poly::one();
        let k2 = shift2(&hat_qs_c);
        q.scale_i(3, 4).add(&hat_qs_c.scale_i(1, 4)).add(&k2.scale_i(1, 4))
    };

    // refresh before stage 1: project q^n upward, predict virtual leaves.
    n.q_n = f.q_n.clone();
    v.q_n = c.q_n.clone();

    // stage 1 sweeps (finest level first).
    f.k = v.q_n.shift();
    f.q_star = f.q_n.add(&f.k);
    match scheme {
        SchemeKind::MrltNerk2 => f.q12 = f.q_n.add(&f.k.scale_i(3, 8)),
        SchemeKind::MrltRk2 => f.q12 = f.q_n.add(&f.k.scale_i(1, 2)),
        SchemeKind::MrltNerk3 => {
            f.q14 = f.q_n.add(&f.k.scale_i(7, 32));
            f.q34 = f.q_n.add(&f.k.scale_i(15, 32));
        }
        _ => {}
    }
    c.k = shift2(&f.q_n);
    c.q_star = c.q_n.add(&c.k);
    match scheme {
        SchemeKind::MrltNerk2 => c.q12 = c.q_n.add(&c.k.scale_i(3, 8)),
        SchemeKind::MrltRk2 => c.q12 = c.q_n.add(&c.k.scale_i(1, 2)),
        SchemeKind::MrltNerk3 => {
            c.q14 = c.q_n.add(&c.k.scale_i(7, 32));
            c.q34 = c.q_n.add(&c.k.scale_i(15, 32));
        }
        _ => {}
    }

    // refresh before stage 2.
    let n_mid = f.q_star.clone();
    n.q_star = if scheme == SchemeKind::MrltRk2 {
        n_mid.clone()
    } else {
        n_mid.scale_i(2, 1).sub(&n.q_n)
    };
    v.q_star = c.q_n.scale_i(1, 2).add(&c.q_star.scale_i(1, 2));
    if !rk3 {
        v.q12 = v.q_n.scale_i(1, 2).add(&v.q_star.scale_i(1, 2));
    }
    let eps1 = hat_qs_f.sub(&v.q_star);

    // stage 2, fine level.
    let k2_f = v.q_star.shift();
    match scheme {
        SchemeKind::MrltNerk2 => f.q12 = f.q12.add(&k2_f.scale_i(1, 8)),
        SchemeKind::MrltNerk3 => {
            f.q14 = f.q14.add(&k2_f.scale_i(1, 32));
            f.q34 = f.q34.add(&k2_f.scale_i(9, 32));
        }
        _ => {}
    }
    let fine_stage2 = f
        .q_n
        .scale_i(if rk3 { 3 } else { 1 }, if rk3 { 4 } else { 2 })
        .add(&f.q_star.scale_i(1, if rk3 { 4 } else { 2 }))
        .add(&k2_f.scale_i(1, if rk3 { 4 } else { 2 }));
    if rk3 {
        f.q_dstar = fine_stage2;
    } else {
        f.q_n = fine_stage2;
    }
    f.k = k2_f.clone();

    // projection inside the second step, then the coarse sweep.
    let fine_extrap = if scheme == SchemeKind::MrltRk2 {
        f.q_star.clone() // no extrapolation in the plain MRLT scheme
    } else {
        f.q_star.add(&f.k) // q* + dt f(q*) = q^n + k1 + k2
    };
    n.q_star = fine_extrap.clone();
    let eps2 = hat_qs_c.sub(&fine_extrap);
    let k2_c = shift2(&fine_extrap);
    match scheme {
        SchemeKind::MrltNerk2 => c.q12 = c.q12.add(&k2_c.scale_i(1, 8)),
        SchemeKind::MrltNerk3 => {
            c.q14 = c.q14.add(&k2_c.scale_i(1, 32));
            c.q34 = c.q34.add(&k2_c.scale_i(9, 32));
        }
        _ => {}
    }
    let coarse_stage2 = c
        .q_n
        .scale_i(if rk3 { 3 } else { 1 }, if rk3 { 4 } else { 2 })
        .add(&c.q_star.scale_i(1, if rk3 { 4 } else { 2 }))
        .add(&k2_c.scale_i(1, if rk3 { 4 } else { 2 }));
    if rk3 {
        c.q_dstar = coarse_stage2;
    } else {
        c.q_n = coarse_stage2;
    }

    let mut eps3 = Poly::zero();
    let mut eps4 = Poly::zero();
    if rk3 {
        // refresh before stage 3.
        n.q14 = f.q_dstar.clone();
        n.q34 = n
            .q_n
            .scale_i(-13, 2)
            .add(&n.q_star.scale_i(-3, 2))
            .add(&n.q14.scale_i(9, 1));
        n.q_dstar = n
            .q_n
            .scale_i(-11, 2)
            .add(&n.q_star.scale_i(-3, 2))
            .add(&n.q14.scale_i(8, 1));
        v.q_dstar = c.q14.clone();
        v.q14 = v
            .q_dstar
            .scale_i(1, 8)
            .add(&v.q_n.scale_i(11, 16))
            .add(&v.q_star.scale_i(3, 16));
        v.q34 = v
            .q_n
            .scale_i(-13, 2)
            .add(&v.q_star.scale_i(-3, 2))
            .add(&v.q14.scale_i(9, 1));
        eps3 = hat_qss_f.sub(&v.q_dstar);

        // stage 3, fine level.
        let k3_f = v.q_dstar.shift();
        f.q_n = f
            .q_n
            .scale_i(1, 3)
            .add(&f.q_dstar.scale_i(2, 3))
            .add(&k3_f.scale_i(2, 3));

        // projection inside the third step, then the coarse sweep.
        n.q_dstar = f.q_n.clone();
        n.q12 = n.q_n.add(&n.q34.sub(&n.q14).scale_i(2, 1));
        eps4 = hat_qss_c.sub(&f.q_n);
        let k3_c = shift2(&f.q_n);
        c.q_n = c
            .q_n
            .scale_i(1, 3)
            .add(&c.q_dstar.scale_i(2, 3))
            .add(&k3_c.scale_i(2, 3));
    }

    InterfaceRun {
        fine_w: f.q_n.clone(),
        coarse_w: c.q_n.clone(),
        eps_w: [eps1, eps2, eps3, eps4],
    }
}

/// One-step amplification polynomial of `scheme` in z = lambda dt_l of the
/// designated cell. The uniform case is the scheme's RK polynomial; the
/// interface cases execute the synchronization path on the two-cell model.
pub fn amplification_polynomial(scheme: SchemeKind, side: InterfaceSide) -> Poly {
    match side {
        InterfaceSide::Uniform => uniform_poly(scheme.is_rk3()),
        InterfaceSide::FineSide => {
            if scheme.is_local_time() {
                interface_run(scheme).fine_w
            } else {
                uniform_poly(scheme.is_rk3())
            }
        }
        InterfaceSide::CoarseSide => {
            if scheme.is_local_time() {
                interface_run(scheme).coarse_w.rescale_half()
            } else {
                uniform_poly(scheme.is_rk3())
            }
        }
    }
}

/// The four interface error terms of the three-stage local time-stepping
/// scheme as polynomials in z = lambda dt_l of the cell they apply to:
/// eps1 = 0, eps2 = -z^2/4, eps3 = z^2/8 - z^3/16,
/// eps4 = z^2/8 - z^3/96 - z^4/384.
pub fn interface_error_terms() -> [Poly; 4] {
    let run = interface_run(SchemeKind::MrltNerk3);
    let [e1, e2, e3, e4] = run.eps_w;
    [e1, e2.rescale_half(), e3, e4.rescale_half()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_examples() {
        let mut a = DenseField::zeros(1, 2, 1);
        let b = DenseField::zeros(1, 2, 1);
        assert_eq!(l1_error(&a, &b).unwrap()[0], 0.0);
        a.data[1] = 0.4;
        assert!((l1_error(&a, &b).unwrap()[0] - 0.1).abs() < 1e-15);
        // homogeneity
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        for v in a2.data.iter_mut() {
            *v *= 3.0;
        }
        for v in b2.data.iter_mut() {
            *v *= 3.0;
        }
        assert!((l1_error(&a2, &b2).unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn convergence_order_ratios() {
        let mut q0 = DenseField::zeros(1, 3, 1);
        let mut q1 = DenseField::zeros(1, 3, 1);
        let q2 = DenseField::zeros(1, 3, 1);
        // differences 8 : 1 -> p = 3; 4 : 1 -> p = 2
        for v in q0.data.iter_mut() {
            *v = 8.0 + 1.0;
        }
        for v in q1.data.iter_mut() {
            *v = 1.0;
        }
        assert!((self_convergence_order(&q0, &q1, &q2).unwrap() - 3.0).abs() < 1e-12);
        for v in q0.data.iter_mut() {
            *v = 5.0;
        }
        assert!((self_convergence_order(&q0, &q1, &q2).unwrap() - 2.0).abs() < 1e-12);
        assert!(self_convergence_order(&q1, &q2, &q2).is_err());
    }

    #[test]
    fn mu_lambda() {
        assert!((cost_mu(1e-2, 30.0, 60.0).unwrap() - 5e-3).abs() < 1e-18);
        assert_eq!(gain_lambda(2.0, 2.0).unwrap(), 1.0);
        assert!(cost_mu(1.0, 1.0, 0.0).is_err());
        // lambda invariant under common wall-time rescaling
        let m1 = cost_mu(1e-2, 30.0, 60.0).unwrap();
        let m2 = cost_mu(2e-2, 10.0, 60.0).unwrap();
        let l = gain_lambda(m1, m2).unwrap();
        let m1s = cost_mu(1e-2, 300.0, 600.0).unwrap();
        let m2s = cost_mu(2e-2, 100.0, 600.0).unwrap();
        let ls = gain_lambda(m1s, m2s).unwrap();
        assert!((l - ls).abs() < 1e-15);
    }

    #[test]
    fn uniform_polynomials() {
        assert!(amplification_polynomial(SchemeKind::FvRk2, InterfaceSide::Uniform)
            .expect_coeffs(&[(1, 1), (1, 1), (1, 2)]));
        assert!(amplification_polynomial(SchemeKind::FvRk3, InterfaceSide::Uniform)
            .expect_coeffs(&[(1, 1), (1, 1), (1, 2), (1, 6)]));
    }

    #[test]
    fn nerk3_interface_polynomials() {
        let fine = amplification_polynomial(SchemeKind::MrltNerk3, InterfaceSide::FineSide);
        assert!(
            fine.expect_coeffs(&[(1, 1), (1, 1), (1, 2), (1, 12), (1, 24)]),
            "fine: {:?}",
            fine.coeffs_f64()
        );
        let coarse = amplification_polynomial(SchemeKind::MrltNerk3, InterfaceSide::CoarseSide);
        assert!(
            coarse.expect_coeffs(&[(1, 1), (1, 1), (1, 2), (1, 8), (1, 144), (1, 576)]),
            "coarse: {:?}",
            coarse.coeffs_f64()
        );
    }

    #[test]
    fn error_terms_exact() {
        let [e1, e2, e3, e4] = interface_error_terms();
        assert!(e1.is_zero(), "eps1: {:?}", e1.coeffs_f64());
        assert!(e2.expect_coeffs(&[(0, 1), (0, 1), (-1, 4)]), "eps2: {:?}", e2.coeffs_f64());
        assert!(
            e3.expect_coeffs(&[(0, 1), (0, 1), (1, 8), (-1, 16)]),
            "eps3: {:?}",
            e3.coeffs_f64()
        );
        assert!(
            e4.expect_coeffs(&[(0, 1), (0, 1), (1, 8), (-1, 96), (-1, 384)]),
            "eps4: {:?}",
            e4.coeffs_f64()
        );
    }

    #[test]
    fn harness_matches_tree_scheduler_at_z() {
        // The symbolic harness and a floating-point two-level run through the
        // real scheduler agree when the returned polynomials are evaluated at
        // z = -0.1.
        use crate::lt::{lt_cycle, LtClock};
        use crate::models::{ModelKind, ModelSpec};
        use crate::mr::GhostSpec;
        use crate::tree::{CellIndex, CellRecord, GradedTree, NodeKind};
        use smallvec::smallvec;

        let w = -0.1f64;
        let dt = 0.25f64;
        for scheme in [SchemeKind::MrltNerk2, SchemeKind::MrltRk2, SchemeKind::MrltNerk3] {
            let model = ModelSpec {
                name: "probe".into(),
                kind: ModelKind::LinearProbe { lambda: w / dt },
                dim: 1,
                ncomp: 1,
                nu: 0.0,
                lo: [0.0; 3],
                hi: [1.0, 1.0, 1.0],
                ghost: GhostSpec::all_periodic(),
            };
            let mut t = GradedTree::new(1, 2, model.lo, model.hi, [true, false, false], 1);
            t.split_into_leaves(CellIndex::root());
            t.split_into_leaves(CellIndex::d1(1, 1));
            for v in [CellIndex::d1(2, 0), CellIndex::d1(2, 1)] {
                t.nodes.insert(v, CellRecord::new(NodeKind::VirtualLeaf, 1));
            }
            t.rebuild_lists();
            for rec in t.nodes.values_mut() {
                rec.q_n = smallvec![1.0];
            }
            let mut clock = LtClock { dt, n: 0 };
            lt_cycle(&mut t, &mut clock, &model, scheme, None).unwrap();

            let run = interface_run(scheme);
            let fine = t.record(CellIndex::d1(2, 2)).q_n[0];
            let coarse = t.record(CellIndex::d1(1, 0)).q_n[0];
            assert!(
                (fine - run.fine_w.eval(w)).abs() <= 1e-12,
                "{scheme:?} fine: {fine} vs {}",
                run.fine_w.eval(w)
            );
            assert!(
                (coarse - run.coarse_w.eval(w)).abs() <= 1e-12,
                "{scheme:?} coarse: {coarse} vs {}",
                run.coarse_w.eval(w)
            );
        }
    }

    #[test]
    fn uniform_interface_sides_coincide_for_global_schemes() {
        for scheme in [SchemeKind::MrRk2, SchemeKind::FvRk3] {
            let u = amplification_polynomial(scheme, InterfaceSide::Uniform);
            let f = amplification_polynomial(scheme, InterfaceSide::FineSide);
            let c = amplification_polynomial(scheme, InterfaceSide::CoarseSide);
            assert_eq!(u, f);
            assert_eq!(u, c);
        }
    }

    #[test]
    fn poly_eval_and_rescale() {
        let p = Poly(vec![
            BigRational::from(BigInt::from(1)),
            BigRational::from(BigInt::from(2)),
        ]);
        assert!((p.eval(0.5) - 2.0).abs() < 1e-15);
        let r = p.rescale_half();
        assert!((r.eval(1.0) - 2.0).abs() < 1e-15);
    }
}
