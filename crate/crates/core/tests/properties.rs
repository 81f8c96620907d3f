use proptest::prelude::*;
use rug::Float;

use scatt_core::connection::scattering_length;
use scatt_core::error::ScattError;
use scatt_core::mpkernel::{gamma, pow_real, rel_diff, PrecisionContext};
use scatt_core::oracle::{oracle_scattering, IntegrationSetup};
use scatt_core::series::{eval_w, eval_w_derivatives, thome_logderiv, Basis, PotentialSpec};

fn ctx() -> PrecisionContext {
    PrecisionContext::new(15).unwrap()
}

fn basis() -> impl Strategy<Value = Basis> {
    prop_oneof![Just(Basis::W1), Just(Basis::W2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gamma_recurrence(x in 0.05f64..60.0) {
        let c = ctx();
        let x = c.real(x);
        let lhs = gamma(&Float::with_val(c.bits(), &x + 1u32), &c).unwrap();
        let rhs = Float::with_val(c.bits(), &x * &gamma(&x, &c).unwrap());
        prop_assert!(rel_diff(&lhs, &rhs) < c.pow10(-(c.working_digits() as i32) + 5));
    }

    #[test]
    fn pow_additivity(x in 0.01f64..20.0, a in -8.0f64..8.0, b in -8.0f64..8.0) {
        let c = ctx();
        let (x, a, b) = (c.real(x), c.real(a), c.real(b));
        let sum = Float::with_val(c.bits(), &a + &b);
        let lhs = pow_real(&x, &sum, &c).unwrap();
        let rhs = Float::with_val(c.bits(), pow_real(&x, &a, &c).unwrap() * pow_real(&x, &b, &c).unwrap());
        prop_assert!(rel_diff(&lhs, &rhs) < c.pow10(-(c.working_digits() as i32) + 5));
    }

    #[test]
    fn pow_rejects_non_positive_base(x in -10.0f64..=0.0, y in -3.0f64..3.0) {
        let c = ctx();
        let is_domain = matches!(pow_real(&c.real(x), &c.real(y), &c), Err(ScattError::Domain { .. }));
        prop_assert!(is_domain);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wronskian_normalization(s in 4u32..=7, x in 0.5f64..50.0, z in 1.0f64..6.0) {
        let c = ctx();
        let spec = PotentialSpec::from_sqrt_lambda(s, x).unwrap();
        let z = c.real(z);
        let (w1, d1) = eval_w(&spec, Basis::W1, &z, &c).unwrap();
        let (w2, d2) = eval_w(&spec, Basis::W2, &z, &c).unwrap();
        let wr = Float::with_val(c.bits(), &w1 * &d2) - Float::with_val(c.bits(), &w2 * &d1);
        prop_assert!((wr + 1u32).abs().to_f64() < 1e-15);
    }

    #[test]
    fn basic_solutions_solve_the_equation(s in 4u32..=7, x in 0.5f64..50.0, z in 1.0f64..6.0, j in basis()) {
        let c = ctx();
        let bits = c.bits();
        let spec = PotentialSpec::from_sqrt_lambda(s, x).unwrap();
        let z = c.real(z);
        let [w, _, d2] = eval_w_derivatives(&spec, j, &z, &c).unwrap();
        let zinv = Float::with_val(bits, z.recip_ref());
        let rep = Float::with_val(bits, zinv.pow_ref_helper(12));
        let att = Float::with_val(bits, zinv.pow_ref_helper(s));
        let q = Float::with_val(bits, &rep - &att) * spec.lambda_at(&c);
        let rhs = Float::with_val(bits, &q * &w);
        let scale = Float::with_val(bits, d2.abs_ref()) + Float::with_val(bits, rhs.abs_ref()) + Float::with_val(bits, w.abs_ref());
        let resid = (Float::with_val(bits, &d2 - &rhs) / scale).abs();
        prop_assert!(resid.to_f64() < 1e-30, "residual {}", resid);
    }

    /// y = w_reg'/w_reg satisfies y' + y^2 = lambda (z^-12 - z^-s).
    #[test]
    fn thome_logderiv_riccati(s in 4u32..=7, x in 0.5f64..40.0, inward in 0.8f64..1.0) {
        let c = ctx();
        let bits = c.bits();
        let spec = PotentialSpec::from_sqrt_lambda(s, x).unwrap();
        // anywhere inside the point where the oracle trusts the expansion
        let z0 = IntegrationSetup::new(&spec, &c).unwrap().z_start.to_f64() * inward;
        let z = c.real(z0);
        let h = c.real(z0 * 1e-12);
        let zp = Float::with_val(bits, &z + &h);
        let zm = Float::with_val(bits, &z - &h);
        let (y, _) = thome_logderiv(&spec, &z, &c).unwrap();
        let (yp, _) = thome_logderiv(&spec, &zp, &c).unwrap();
        let (ym, _) = thome_logderiv(&spec, &zm, &c).unwrap();
        let dy = Float::with_val(bits, &yp - &ym) / Float::with_val(bits, &h * 2u32);
        let zinv = Float::with_val(bits, z.recip_ref());
        let q = Float::with_val(bits, zinv.pow_ref_helper(12) - zinv.pow_ref_helper(s)) * spec.lambda_at(&c);
        let lhs = dy + Float::with_val(bits, y.square_ref());
        prop_assert!(rel_diff(&lhs, &q).to_f64() < 1e-12, "{} vs {}", lhs, q);
    }

    #[test]
    fn methods_agree_away_from_poles(s in 4u32..=7, x in 0.5f64..45.0) {
        let c = ctx();
        let spec = PotentialSpec::from_sqrt_lambda(s, x).unwrap();
        let conn = match scattering_length(&spec, &c) {
            Ok(r) => r,
            Err(ScattError::AtPole { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        // near a pole the matching loses digits in proportion to |a|
        prop_assume!(conn.a_over_r0_f64().abs() < 1e4);
        let orc = oracle_scattering(&spec, &c).unwrap();
        let diff = (conn.a_over_r0_f64() - orc.a_over_r0_f64()).abs();
        prop_assert!(diff <= 1e-9 * conn.a_over_r0_f64().abs().max(1.0), "{} vs {}", conn.a_over_r0, orc.a_over_r0);
    }

    #[test]
    fn r0_only_rescales(s in 4u32..=7, x in 0.5f64..20.0, r0 in 0.1f64..10.0) {
        let c = ctx();
        let base = PotentialSpec::from_sqrt_lambda(s, x).unwrap();
        let scaled = base.clone().with_r0(r0).unwrap();
        match (scattering_length(&base, &c), scattering_length(&scaled, &c)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.a_over_r0, &b.a_over_r0);
                prop_assert!((b.a() - r0 * a.a_over_r0_f64()).abs() <= 1e-15 * b.a().abs());
            }
            (Err(ScattError::AtPole { .. }), Err(ScattError::AtPole { .. })) => {}
            (a, b) => prop_assert!(false, "{:?} / {:?}", a.err(), b.err()),
        }
    }
}

trait PowHelper {
    fn pow_ref_helper(&self, e: u32) -> Float;
}

impl PowHelper for Float {
    fn pow_ref_helper(&self, e: u32) -> Float {
        use rug::ops::Pow;
        Float::with_val(self.prec(), self.pow(e))
    }
}
