use vexspace_core::cantor::{build_stage, GapSequence};
use vexspace_core::certifier::{certify_almost_compact, CertifierConfig, SingularSet, WeightSpec};
use vexspace_core::exponent::sobolev_conjugate;
use vexspace_core::sobolev::certify_compact;
use vexspace_core::{Domain, ExponentField, Expr, Verdict};

fn strip() -> Domain {
    Domain::new_box(vec![0.0, -0.5], vec![1.0, 0.5]).unwrap()
}

#[test]
fn embedded_cantor_weight_gives_compact_embedding() {
    let domain = strip();
    let stage = build_stage(&GapSequence::classical(), 30).unwrap();
    let set = SingularSet::Cantor(stage.clone());
    let weight = WeightSpec::normalized(1, 0.5, 1.0, &domain).unwrap();
    let p = ExponentField::constant(1.5, domain.clone());
    let p_sharp = sobolev_conjugate(&p, 2).unwrap();
    // 1/(p# − q) = ω(d_K)
    let b = weight.scale;
    let omega = (b / Expr::dist_to_cantor(stage)).ln().sqrt();
    let q = ExponentField::new(p_sharp.expr().clone() - 1.0 / omega, domain);
    let config = CertifierConfig { refinements: 1, ..CertifierConfig::default() };
    let c = certify_compact(&p, &q, Some(&set), Some(&weight), &config).unwrap();
    assert_eq!(c.verdict, Verdict::Compact, "{:?}", c.diagnostics);
    let ac = c.almost_compact.unwrap();
    let preset = ac.preset.unwrap();
    assert!(preset.compatible);
    assert!((preset.envelope.power - ((2.0f64 / 3.0).ln() / (1.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
    assert!(preset.tails.iter().all(|t| t.certified));
}

#[test]
fn zeta_cantor_needs_a_doubly_logarithmic_weight() {
    let domain = Domain::unit_interval();
    let stage = build_stage(&GapSequence::zeta(2.0).unwrap(), 40).unwrap();
    let set = SingularSet::Cantor(stage.clone());
    let p = ExponentField::constant(3.0, domain.clone());
    for (level, expect) in [(1u8, Verdict::Inconclusive), (2, Verdict::AlmostCompact)] {
        let weight = WeightSpec::normalized(level, 0.5, 1.0, &domain).unwrap();
        let b = weight.scale;
        let mut l = (b / Expr::dist_to_cantor(stage.clone())).ln();
        if level == 2 {
            l = l.ln();
        }
        let q = ExponentField::new(3.0 - 1.0 / l.sqrt(), domain.clone());
        let config = CertifierConfig { refinements: 1, ..CertifierConfig::default() };
        let c = certify_almost_compact(&p, &q, Some(&set), Some(&weight), &config).unwrap();
        assert_eq!(c.verdict, expect, "level {level}: {:?}", c.diagnostics);
    }
}
