//! BC witnesses on a map with a slowly attracting 2-cycle, checked by
//! mapping them forward and by re-deriving them for a larger constant.

use dynlab::conditions::{check_bc, confirm_bc_witness, Verdict};
use dynlab::pullback::{dist_to_points, PullbackEngine};
use dynlab::{Complex64, Polynomial};

#[test]
fn near_neutral_cycle_violates_bc_with_checkable_witnesses() {
    // multiplier of the 2-cycle is 4(c + 1) = 0.9996, so its basin is too
    // slow for the classifier budget and 0 stays in the checked set
    let f = Polynomial::quadratic(Complex64::new(-0.7501, 0.0));
    let r = 2.0;
    let report = check_bc(&f, r, 0.05, 4, 8, 100_000).unwrap();
    assert_eq!(report.verdict, Verdict::Violated);
    assert!(!report.witnesses.is_empty());

    let engine = PullbackEngine::new(&f).unwrap();
    for w in report.witnesses.iter().take(6) {
        let (delta, point) = (w.delta.unwrap(), w.point.unwrap());
        assert!(w.diameter.unwrap() >= delta);
        assert!(w.dist_to_critical_values.unwrap() <= delta);

        let target = engine.tilde_ball(w.critical_point, r * delta).unwrap().component;
        let image = (0..w.depth).fold(point, |z, _| f.eval(z));
        assert!(target.contains(image), "witness at depth {} does not map into its target", w.depth);

        let (enlarged, still_witness) = confirm_bc_witness(&engine, w, 2.0 * r).unwrap();
        assert!(still_witness);
        assert!(enlarged.contains(point));
        assert!(dist_to_points(&enlarged, engine.critical_values()) <= delta);
    }
}
