mod common;

use common::{random_hazard, rel_close};
use pedrisk::oracle::{quadrature_incidence, quadrature_survival};
use pedrisk::risk::{
    cumulative_incidence, cumulative_incidence_competing, posterior_carrier, posterior_hazard, posterior_survival,
    RiskQuery,
};
use pedrisk::survival::{builtin_claus_easton, builtin_french_death};
use pedrisk::DiseaseModel;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn ce() -> DiseaseModel {
    builtin_claus_easton().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hazard_is_bracketed(pi in 0.0..=1.0f64, tau in 0.0..99.0f64, dt in 0.0..60.0f64) {
        let dm = ce();
        let q = RiskQuery::new(pi, tau, &dm);
        let t = tau + dt;
        let h = posterior_hazard(&q, t).unwrap();
        let (a, b) = (dm.noncarrier.rate_at(t), dm.carrier.rate_at(t));
        prop_assert!(h >= a.min(b) * (1.0 - 1e-12) && h <= a.max(b) * (1.0 + 1e-12));
    }

    #[test]
    fn survival_matches_integrated_hazard(pi in 0.0..=1.0f64, tau in 0.0..80.0f64, dt in 0.0..40.0f64) {
        let dm = ce();
        let q = RiskQuery::new(pi, tau, &dm);
        let t = tau + dt;
        let s = posterior_survival(&q, t).unwrap();
        prop_assert!((s - quadrature_survival(&q, t)).abs() < 1e-9);
    }

    #[test]
    fn carrier_probability_is_non_increasing(pi in 0.0..=1.0f64, tau in 0.0..90.0f64, a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let dm = ce();
        let q = RiskQuery::new(pi, tau, &dm);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(posterior_carrier(&q, tau + hi).unwrap() <= posterior_carrier(&q, tau + lo).unwrap() + 1e-15);
    }

    #[test]
    fn closed_form_incidence_matches_quadrature(seed in any::<u64>(), tau in 0.0..50.0f64, len in 0.1..60.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let alpha = random_hazard(&mut rng, 0.05);
        let beta = random_hazard(&mut rng, 0.2);
        let t = tau + len;
        let exact = cumulative_incidence(&alpha, &beta, tau, t);
        let numeric = quadrature_incidence(&alpha, &beta, tau, t);
        prop_assert!(rel_close(exact, numeric, 1e-8) || (exact - numeric).abs() < 1e-14, "{} vs {}", exact, numeric);
    }

    #[test]
    fn curves_are_monotone_and_ordered(pi in 0.0..=1.0f64, tau in 0.0..95.0f64) {
        let dm = ce();
        let death = builtin_french_death();
        let q = RiskQuery::new(pi, tau, &dm).with_death(&death).with_delta_t(0.5);
        let c = cumulative_incidence_competing(&q).unwrap();
        let with = c.risk_competing.as_ref().unwrap();
        for k in 1..c.len() {
            prop_assert!(c.risk_no_competing[k] >= c.risk_no_competing[k - 1]);
            prop_assert!(with[k] >= with[k - 1]);
            prop_assert!(with[k] <= c.risk_no_competing[k] + 1e-12);
            prop_assert!((0.0..=1.0).contains(&with[k]));
        }
    }
}
