//! Deliberately broken mechanisms must be caught by the matching criterion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repeated_delegation::agents::Myopic;
use repeated_delegation::engine::play;
use repeated_delegation::instances::fixture;
use repeated_delegation::mechanisms::{iterative_search, DelayedBinarySearch, Mechanism, UcbThreshold};
use repeated_delegation::verify::{mutation_changes, ucb_rate_check};

#[test]
fn ucb_without_bonus_fails_the_rate_check() {
    let (spread, util) = ucb_rate_check(&|t| Ok(Box::new(UcbThreshold::new(t)?.without_bonus()) as Box<dyn Mechanism>))
        .unwrap();
    let f_star = 4.0 * (2f64.sqrt() - 1.0) / 3.0;
    assert!(spread > 1.5 || util < f_star - 0.03, "spread {spread}, utility {util}");

    let (spread, util) = ucb_rate_check(&|t| Ok(Box::new(UcbThreshold::new(t)?) as Box<dyn Mechanism>)).unwrap();
    assert!(spread <= 1.5 && util >= f_star - 0.03, "spread {spread}, utility {util}");
}

#[test]
fn unwrapped_mechanisms_fail_the_delay_check() {
    let inst = fixture("TwoUniformComplement").unwrap();
    let horizon = 300;
    let protos: Vec<Box<dyn Mechanism>> = vec![
        Box::new(UcbThreshold::new(horizon).unwrap()),
        Box::new(iterative_search()),
        // claims D = 4 below but runs with no delay at all
        Box::new(DelayedBinarySearch::with_delay(0, horizon).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for proto in protos {
        let mut m = proto.clone_box();
        let mut base = Vec::new();
        play(&inst, m.as_mut(), &mut Myopic, 0.9, false, horizon, 2, false, |r| base.push(r.clone())).unwrap();
        let changed = mutation_changes(proto.as_ref(), 4, &base, 500, &mut rng);
        assert!(changed > 0, "{} was not caught", proto.name());
    }
}
